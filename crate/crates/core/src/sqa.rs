//! Path-integral Monte Carlo simulated quantum annealing.
//!
//! The Suzuki–Trotter action over `M` replicas with periodic boundaries is
//! `S = (β/M) Σₖ H₀(σₖ) − J⊥ Σₖ Σᵢ σₖᵢ σₖ₊₁ᵢ`, `J⊥ = −½ ln tanh(βΓ/M)`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IsingModel;
use crate::spin::SpinConfig;

/// Inter-slice coupling used once `Γ` is small enough that `J⊥` diverges.
pub const J_PERP_CAP: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqaConfig {
    pub trotter_slices: usize,
    pub beta: f64,
    pub gamma_start: f64,
    pub gamma_end: f64,
    pub sweeps: usize,
    pub samples: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for SqaConfig {
    fn default() -> Self {
        SqaConfig {
            trotter_slices: 32,
            beta: 10.0,
            gamma_start: 3.0,
            gamma_end: 0.01,
            sweeps: 1000,
            samples: 1000,
            runs: 10,
            seed: 42,
        }
    }
}

impl SqaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.trotter_slices < 2 {
            return bad("trotter_slices must be >= 2");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be > 0");
        }
        if !(self.gamma_start > self.gamma_end && self.gamma_end >= 0.0) {
            return bad("gamma schedule must satisfy gamma_start > gamma_end >= 0");
        }
        if self.sweeps == 0 || self.samples == 0 || self.runs == 0 {
            return bad("sweeps, samples and runs must be >= 1");
        }
        Ok(())
    }

    /// Transverse field used during sweep `s`.
    pub fn gamma_at(&self, s: usize) -> f64 {
        if self.sweeps == 1 {
            return self.gamma_end;
        }
        let f = s as f64 / (self.sweeps - 1) as f64;
        self.gamma_start + (self.gamma_end - self.gamma_start) * f
    }
}

pub fn j_perp(beta: f64, gamma: f64, slices: usize) -> f64 {
    let x = (beta * gamma / slices as f64).tanh();
    if x <= 0.0 {
        return J_PERP_CAP;
    }
    (-0.5 * x.ln()).min(J_PERP_CAP)
}

/// Quadratic model in adjacency form: `H₀ = Σ hᵢσᵢ + Σ Jᵢⱼσᵢσⱼ + offset`.
#[derive(Debug, Clone)]
struct Quadratic {
    h: Vec<f64>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl Quadratic {
    fn new(model: &IsingModel) -> Result<Self> {
        if model.max_order() > 2 {
            return Err(Error::InvalidArgument(
                "the sampler handles models with at most pairwise terms".into(),
            ));
        }
        let n = model.num_spins();
        let compiled = model.compile()?;
        let mut h = vec![0.0; n];
        let mut adj = vec![Vec::new(); n];
        for &(mask, c) in &compiled.masks {
            let i = mask.trailing_zeros() as usize;
            let rest = mask & !(1u128 << i);
            if rest == 0 {
                h[i] += c;
            } else {
                let j = rest.trailing_zeros() as usize;
                adj[i].push((j, c));
                adj[j].push((i, c));
            }
        }
        Ok(Quadratic { h, adj })
    }
}

/// Replica state of one path-integral chain.
pub struct PathIntegral {
    q: Quadratic,
    n: usize,
    slices: usize,
    beta: f64,
    /// `spins[k*n + i]`, ±1.
    spins: Vec<f64>,
    /// Classical local field `hᵢ + Σⱼ Jᵢⱼσₖⱼ` per replica.
    field: Vec<f64>,
}

impl PathIntegral {
    /// Replicas initialised uniformly at random.
    pub fn new(model: &IsingModel, slices: usize, beta: f64, rng: &mut impl Rng) -> Result<Self> {
        let q = Quadratic::new(model)?;
        let n = model.num_spins();
        let spins: Vec<f64> = (0..n * slices)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let mut p = PathIntegral {
            q,
            n,
            slices,
            beta,
            spins,
            field: vec![0.0; n * slices],
        };
        p.refresh_fields();
        Ok(p)
    }

    fn refresh_fields(&mut self) {
        for k in 0..self.slices {
            for i in 0..self.n {
                let mut f = self.q.h[i];
                for &(j, c) in &self.q.adj[i] {
                    f += c * self.spins[k * self.n + j];
                }
                self.field[k * self.n + i] = f;
            }
        }
    }

    /// One Metropolis pass over every (slice, site) pair at fixed `Γ`.
    pub fn sweep(&mut self, gamma: f64, rng: &mut impl Rng) {
        let (n, m) = (self.n, self.slices);
        let jp = j_perp(self.beta, gamma, m);
        let scale = self.beta / m as f64;
        for k in 0..m {
            let prev = if k == 0 { m - 1 } else { k - 1 };
            let next = if k + 1 == m { 0 } else { k + 1 };
            for i in 0..n {
                let idx = k * n + i;
                let s = self.spins[idx];
                let neighbours = self.spins[prev * n + i] + self.spins[next * n + i];
                let ds = -2.0 * scale * s * self.field[idx] + 2.0 * jp * s * neighbours;
                if ds <= 0.0 || rng.gen::<f64>() < (-ds).exp() {
                    let new = -s;
                    self.spins[idx] = new;
                    for &(j, c) in &self.q.adj[i] {
                        self.field[k * n + j] += 2.0 * c * new;
                    }
                }
            }
        }
    }

    pub fn slice(&self, k: usize) -> SpinConfig {
        let mut bits = 0u128;
        for i in 0..self.n {
            if self.spins[k * self.n + i] > 0.0 {
                bits |= 1 << i;
            }
        }
        SpinConfig(bits)
    }
}

/// One anneal along the configured schedule; returns slice 0.
pub fn anneal_once(model: &IsingModel, cfg: &SqaConfig, rng: &mut impl Rng) -> Result<SpinConfig> {
    cfg.validate()?;
    let mut path = PathIntegral::new(model, cfg.trotter_slices, cfg.beta, rng)?;
    for s in 0..cfg.sweeps {
        path.sweep(cfg.gamma_at(s), rng);
    }
    Ok(path.slice(0))
}

/// Independent stream for sample `sample` of run `run`.
pub fn sample_rng(seed: u64, run: usize, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((run as u64) << 40) | sample as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleTally {
    pub targets: Vec<String>,
    pub samples: usize,
    pub runs: usize,
    /// `counts[run][target]`.
    pub counts: Vec<Vec<u64>>,
    pub out_of_set: Vec<u64>,
    /// Mean per-run frequency of each target.
    pub mean: Vec<f64>,
    /// Standard error of `mean` across runs (sample standard deviation / √runs).
    pub stderr: Vec<f64>,
}

impl SampleTally {
    pub fn total_hits(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn hit_rate(&self) -> f64 {
        self.total_hits() as f64 / (self.samples * self.runs) as f64
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("tally serializes")
    }
}

/// `runs × samples` anneals, tallying hits on `targets`.
pub fn run_experiment(
    model: &IsingModel,
    targets: &[SpinConfig],
    cfg: &SqaConfig,
) -> Result<SampleTally> {
    cfg.validate()?;
    Quadratic::new(model)?;
    let mut sorted = targets.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != targets.len() || sorted != targets {
        return Err(Error::InvalidArgument(
            "target states must be sorted and unique".into(),
        ));
    }
    let index: HashMap<SpinConfig, usize> =
        targets.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut counts = Vec::with_capacity(cfg.runs);
    let mut out_of_set = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let hits: Vec<Option<usize>> = (0..cfg.samples)
            .into_par_iter()
            .map(|sample| {
                let mut rng = sample_rng(cfg.seed, run, sample);
                anneal_once(model, cfg, &mut rng).map(|s| index.get(&s).copied())
            })
            .collect::<Result<_>>()?;
        let mut c = vec![0u64; targets.len()];
        let mut miss = 0;
        for h in hits {
            match h {
                Some(i) => c[i] += 1,
                None => miss += 1,
            }
        }
        counts.push(c);
        out_of_set.push(miss);
    }
    let runs = cfg.runs as f64;
    let freq = |r: usize, t: usize| counts[r][t] as f64 / cfg.samples as f64;
    let mean: Vec<f64> = (0..targets.len())
        .map(|t| (0..cfg.runs).map(|r| freq(r, t)).sum::<f64>() / runs)
        .collect();
    let stderr = (0..targets.len())
        .map(|t| {
            if cfg.runs < 2 {
                return f64::NAN;
            }
            let var = (0..cfg.runs)
                .map(|r| (freq(r, t) - mean[t]).powi(2))
                .sum::<f64>()
                / (runs - 1.0);
            (var / runs).sqrt()
        })
        .collect();
    let n = model.num_spins();
    Ok(SampleTally {
        targets: targets.iter().map(|s| s.label(n)).collect(),
        samples: cfg.samples,
        runs: cfg.runs,
        counts,
        out_of_set,
        mean,
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(samples: usize, runs: usize) -> SqaConfig {
        SqaConfig {
            trotter_slices: 8,
            sweeps: 200,
            samples,
            runs,
            ..SqaConfig::default()
        }
    }

    #[test]
    fn ferromagnetic_pair_aligns() {
        let model = IsingModel::from_terms(2, &[(&[0, 1], -1.0)], 0.0).unwrap();
        let targets = [SpinConfig(0b00), SpinConfig(0b11)];
        let t = run_experiment(&model, &targets, &quick(400, 1)).unwrap();
        assert!(t.hit_rate() > 0.99, "{t:?}");
    }

    #[test]
    fn free_spin_is_fair() {
        let model = IsingModel::from_terms(1, &[], 0.0).unwrap();
        let t = run_experiment(&model, &[SpinConfig(0), SpinConfig(1)], &quick(100, 10)).unwrap();
        let diff = (t.mean[0] - t.mean[1]).abs();
        let se = (t.stderr[0].powi(2) + t.stderr[1].powi(2)).sqrt();
        assert!(diff <= 3.0 * se, "{t:?}");
        for r in 0..t.runs {
            assert_eq!(t.counts[r].iter().sum::<u64>() + t.out_of_set[r], 100);
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let model = IsingModel::from_terms(3, &[(&[0, 1], -1.0), (&[1, 2], 1.0), (&[0], 0.2)], 0.0)
            .unwrap();
        let targets: Vec<SpinConfig> = (0..8).map(SpinConfig).collect();
        let a = run_experiment(&model, &targets, &quick(50, 2)).unwrap();
        let b = run_experiment(&model, &targets, &quick(50, 2)).unwrap();
        assert_eq!(a, b);
        let mut r1 = sample_rng(42, 0, 3);
        let mut r2 = sample_rng(42, 0, 3);
        let cfg = quick(1, 1);
        assert_eq!(
            anneal_once(&model, &cfg, &mut r1).unwrap(),
            anneal_once(&model, &cfg, &mut r2).unwrap()
        );
    }

    #[test]
    fn coupling_clamps() {
        assert_eq!(j_perp(10.0, 0.0, 32), J_PERP_CAP);
        assert!(j_perp(10.0, 3.0, 32) < 1.0);
        assert_eq!(SqaConfig::default().gamma_at(0), 3.0);
        assert!((SqaConfig::default().gamma_at(999) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        let model = IsingModel::from_terms(1, &[], 0.0).unwrap();
        let cfg = SqaConfig {
            gamma_end: 5.0,
            ..SqaConfig::default()
        };
        assert!(run_experiment(&model, &[SpinConfig(0)], &cfg).is_err());
        assert!(run_experiment(&model, &[SpinConfig(1), SpinConfig(0)], &quick(1, 1)).is_err());
    }

    /// Exact path weights `e^{−S}` over all `2^(N·M)` paths, marginalised to slice 0.
    fn exact_slice_marginal(model: &IsingModel, beta: f64, gamma: f64, m: usize) -> Vec<f64> {
        let n = model.num_spins();
        let jp = j_perp(beta, gamma, m);
        let mut marg = vec![0.0; 1 << n];
        for path in 0..1usize << (n * m) {
            let slice = |k: usize| SpinConfig(((path >> (k * n)) & ((1 << n) - 1)) as u128);
            let mut s = 0.0;
            for k in 0..m {
                let (a, b) = (slice(k), slice((k + 1) % m));
                s += beta / m as f64 * model.energy(a).unwrap();
                for i in 0..n {
                    s -= jp * f64::from(a.spin(i) * b.spin(i));
                }
            }
            marg[slice(0).bits() as usize] += (-s).exp();
        }
        let z: f64 = marg.iter().sum();
        marg.iter().map(|w| w / z).collect()
    }

    #[test]
    fn fixed_gamma_detailed_balance() {
        let model = IsingModel::from_terms(2, &[(&[0, 1], -1.0), (&[0], 0.3)], 0.0).unwrap();
        let (beta, gamma, m) = (2.0, 1.0, 4);
        let exact = exact_slice_marginal(&model, beta, gamma, m);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut path = PathIntegral::new(&model, m, beta, &mut rng).unwrap();
        for _ in 0..1000 {
            path.sweep(gamma, &mut rng);
        }
        let batches = 40;
        let per_batch = 5000;
        let mut freqs = vec![vec![0.0; 4]; batches];
        for batch in freqs.iter_mut() {
            for _ in 0..per_batch {
                path.sweep(gamma, &mut rng);
                batch[path.slice(0).bits() as usize] += 1.0 / per_batch as f64;
            }
        }
        for s in 0..4 {
            let mean = freqs.iter().map(|f| f[s]).sum::<f64>() / batches as f64;
            let var =
                freqs.iter().map(|f| (f[s] - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
            let se = (var / batches as f64).sqrt();
            assert!(
                (mean - exact[s]).abs() <= 3.0 * se,
                "state {s}: {mean} vs {} (se {se})",
                exact[s]
            );
        }
    }
}
