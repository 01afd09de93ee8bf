//! Degenerate ground manifolds of diagonal Hamiltonians.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CompiledModel, IsingModel};
use crate::spin::SpinConfig;

/// Hard cap on exhaustive enumeration.
pub const ENUMERATION_CAP: usize = 28;

/// Spins handled by one Gray-code block.
const BLOCK_BITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldSource {
    BruteForce,
    Provided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundManifold {
    states: Vec<SpinConfig>,
    e0: f64,
    tol: f64,
    num_spins: usize,
    source: ManifoldSource,
}

/// `1e-9 · max(1, |e0|)`.
pub fn default_tol(e0: f64) -> f64 {
    1e-9 * e0.abs().max(1.0)
}

impl GroundManifold {
    pub fn states(&self) -> &[SpinConfig] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn source(&self) -> ManifoldSource {
        self.source
    }

    pub fn index_of(&self, s: SpinConfig) -> Option<usize> {
        self.states.binary_search(&s).ok()
    }

    pub fn contains(&self, s: SpinConfig) -> bool {
        self.index_of(s).is_some()
    }

    pub fn labels(&self) -> Vec<String> {
        self.states
            .iter()
            .map(|s| s.label(self.num_spins))
            .collect()
    }

    /// Exhaustive scan of all `2^N` configurations. `tol = None` selects
    /// [`default_tol`] relative to the exact minimum.
    pub fn enumerate(model: &IsingModel, tol: Option<f64>) -> Result<Self> {
        Self::enumerate_with_cap(model, tol, ENUMERATION_CAP)
    }

    pub fn enumerate_with_cap(model: &IsingModel, tol: Option<f64>, cap: usize) -> Result<Self> {
        let n = model.num_spins();
        if n > cap {
            return Err(Error::Capacity {
                what: "exhaustive ground-state enumeration",
                size: n,
                cap,
                hint: "supply the ground states explicitly (GroundManifold::from_states)",
            });
        }
        if let Some(t) = tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "tolerance must be >= 0, got {t}"
                )));
            }
        }
        let compiled = model.compile()?;
        let low_bits = n.min(BLOCK_BITS);
        let blocks = 1u128 << (n - low_bits);
        let incidence = gray_incidence(&compiled, low_bits);

        let partials: Vec<(f64, Vec<SpinConfig>)> = (0..blocks)
            .into_par_iter()
            .map(|high| {
                scan_block(
                    &compiled,
                    &incidence,
                    high << low_bits,
                    low_bits,
                    tol.unwrap_or(0.0),
                )
            })
            .collect();

        // Screening used incremental energies; decide on exact ones.
        let mut candidates: Vec<(SpinConfig, f64)> = partials
            .into_iter()
            .flat_map(|(_, c)| c)
            .map(|s| (s, compiled.energy(s)))
            .collect();
        let e0 = candidates
            .iter()
            .map(|&(_, e)| e)
            .fold(f64::INFINITY, f64::min);
        let tol = tol.unwrap_or_else(|| default_tol(e0));
        candidates.retain(|&(_, e)| e <= e0 + tol);
        let mut states: Vec<SpinConfig> = candidates.into_iter().map(|(s, _)| s).collect();
        states.sort_unstable();
        Ok(GroundManifold {
            states,
            e0,
            tol,
            num_spins: n,
            source: ManifoldSource::BruteForce,
        })
    }

    /// Wraps externally supplied ground states, checking they are degenerate within `tol`.
    pub fn from_states(
        model: &IsingModel,
        states: &[SpinConfig],
        tol: Option<f64>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument(
                "ground manifold cannot be empty".into(),
            ));
        }
        let n = model.num_spins();
        let limit = crate::spin::full_mask(n);
        if let Some(s) = states.iter().find(|s| s.bits() & !limit != 0) {
            return Err(Error::InvalidArgument(format!(
                "state {:#b} has bits beyond {n} spins",
                s.bits()
            )));
        }
        let compiled = model.compile()?;
        let mut states = states.to_vec();
        states.sort_unstable();
        states.dedup();
        let energies: Vec<f64> = states.iter().map(|&s| compiled.energy(s)).collect();
        let (mut lo, mut hi) = (0, 0);
        for (i, &e) in energies.iter().enumerate() {
            if e < energies[lo] {
                lo = i;
            }
            if e > energies[hi] {
                hi = i;
            }
        }
        let e0 = energies[lo];
        let tol = tol.unwrap_or_else(|| default_tol(e0));
        if energies[hi] - e0 > tol {
            return Err(Error::InconsistentManifold {
                low: states[lo].label(n),
                low_energy: e0,
                high: states[hi].label(n),
                high_energy: energies[hi],
                tol,
            });
        }
        Ok(GroundManifold {
            states,
            e0,
            tol,
            num_spins: n,
            source: ManifoldSource::Provided,
        })
    }

    /// Energy of `s` when it lies outside the manifold; `None` for members.
    pub fn excited_energy(&self, model: &CompiledModel, s: SpinConfig) -> Option<f64> {
        if self.contains(s) {
            None
        } else {
            Some(model.energy(s))
        }
    }

    /// Reorders nothing but relabels through a bijection on configurations;
    /// used to carry a manifold across spectrum-preserving transforms.
    pub fn mapped(&self, f: impl Fn(SpinConfig) -> SpinConfig) -> Self {
        let mut states: Vec<SpinConfig> = self.states.iter().map(|&s| f(s)).collect();
        states.sort_unstable();
        GroundManifold {
            states,
            ..self.clone()
        }
    }
}

/// For each low spin, the term indices it touches, used for Gray-code updates.
fn gray_incidence(model: &CompiledModel, low_bits: usize) -> Vec<Vec<usize>> {
    (0..low_bits)
        .map(|i| {
            model
                .masks
                .iter()
                .enumerate()
                .filter(|(_, (m, _))| m >> i & 1 == 1)
                .map(|(k, _)| k)
                .collect()
        })
        .collect()
}

/// Scans `base | x` for all `x < 2^low_bits` in Gray-code order. Returns the
/// block minimum and every configuration within a loose screening window of
/// the running minimum.
fn scan_block(
    model: &CompiledModel,
    incidence: &[Vec<usize>],
    base: u128,
    low_bits: usize,
    window: f64,
) -> (f64, Vec<SpinConfig>) {
    let slack = |e: f64| 1e-6 * e.abs().max(1.0) + window;
    let mut state = base;
    let down = !state;
    let mut signs: Vec<f64> = model
        .masks
        .iter()
        .map(|&(m, _)| {
            if (down & m).count_ones() & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let mut energy = model.energy(SpinConfig(state));
    let mut best = energy;
    let mut kept: Vec<(SpinConfig, f64)> = vec![(SpinConfig(state), energy)];
    let count = 1u64 << low_bits;
    for step in 1..count {
        let bit = step.trailing_zeros() as usize;
        let mut delta = 0.0;
        for &k in &incidence[bit] {
            delta -= 2.0 * model.masks[k].1 * signs[k];
            signs[k] = -signs[k];
        }
        energy += delta;
        state ^= 1u128 << bit;
        if energy <= best + slack(best) {
            if energy < best {
                best = energy;
                let cut = best + slack(best);
                kept.retain(|&(_, e)| e <= cut);
            }
            kept.push((SpinConfig(state), energy));
        }
    }
    (best, kept.into_iter().map(|(s, _)| s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn labels(m: &GroundManifold) -> Vec<String> {
        m.labels()
    }

    #[test]
    fn chain_has_n_plus_one_states() {
        let m = GroundManifold::enumerate(&fixtures::chain(4), None).unwrap();
        assert_eq!(m.e0(), -3.0);
        assert_eq!(labels(&m), vec!["0000", "1000", "1100", "1110", "1111"]);
    }

    #[test]
    fn triangle_three_states() {
        let m = GroundManifold::enumerate(&fixtures::triangle(1.0), None).unwrap();
        assert_eq!(m.e0(), -2.0);
        assert_eq!(labels(&m), vec!["110", "101", "011"]);
    }

    #[test]
    fn single_spin() {
        let model = IsingModel::from_terms(1, &[(&[0], -1.0)], 0.0).unwrap();
        let m = GroundManifold::enumerate(&model, None).unwrap();
        assert_eq!(labels(&m), vec!["1"]);
        assert_eq!(m.e0(), -1.0);
    }

    #[test]
    fn capacity_error() {
        let model = IsingModel::from_terms(30, &[(&[0], -1.0)], 0.0).unwrap();
        let err = GroundManifold::enumerate(&model, None).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn excited_energies() {
        let model = fixtures::triangle(1.0);
        let c = model.compile().unwrap();
        let m = GroundManifold::enumerate(&model, None).unwrap();
        let up = SpinConfig::parse("111").unwrap();
        assert_eq!(m.excited_energy(&c, up), Some(0.0));
        assert_eq!(m.excited_energy(&c, m.states()[0]), None);

        let chain = fixtures::chain(4);
        let cc = chain.compile().unwrap();
        let cm = GroundManifold::enumerate(&chain, None).unwrap();
        let e = cm
            .excited_energy(&cc, SpinConfig::parse("↑↓↑↑").unwrap())
            .unwrap();
        assert_eq!(e, 1.0);
        assert_eq!(e - cm.e0(), 4.0);
    }

    #[test]
    fn from_states_dedups_and_checks_spread() {
        let model = fixtures::chain(4);
        let s = |l: &str| SpinConfig::parse(l).unwrap();
        let m =
            GroundManifold::from_states(&model, &[s("1111"), s("0000"), s("1111")], None).unwrap();
        assert_eq!(labels(&m), vec!["0000", "1111"]);
        assert_eq!(m.source(), ManifoldSource::Provided);
        let err = GroundManifold::from_states(&model, &[s("1111"), s("1011")], None).unwrap_err();
        assert!(matches!(err, Error::InconsistentManifold { .. }));
    }

    #[test]
    fn tol_monotone() {
        let model = fixtures::chain(5);
        let tight = GroundManifold::enumerate(&model, Some(0.0)).unwrap();
        let loose = GroundManifold::enumerate(&model, Some(4.5)).unwrap();
        assert!(tight.states().iter().all(|s| loose.contains(*s)));
        assert!(loose.len() > tight.len());
    }

    #[test]
    fn agrees_with_naive_scan_across_blocks() {
        // 16 spins spans several Gray-code blocks.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let n = 16;
            let h: Vec<f64> = (0..n)
                .map(|_| f64::from(rng.gen_range(-1i32..=1)))
                .collect();
            let mut couplings = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(0.3) {
                        couplings.push((i, j, f64::from(rng.gen_range(-2i32..=2))));
                    }
                }
            }
            let model = IsingModel::from_fields_couplings(n, &h, &couplings).unwrap();
            let m = GroundManifold::enumerate(&model, None).unwrap();
            let c = model.compile().unwrap();
            let all: Vec<f64> = (0..1u128 << n).map(|b| c.energy(SpinConfig(b))).collect();
            let e0 = all.iter().cloned().fold(f64::INFINITY, f64::min);
            let naive: Vec<SpinConfig> = (0..1u128 << n)
                .filter(|&b| all[b as usize] <= e0 + default_tol(e0))
                .map(SpinConfig)
                .collect();
            assert_eq!(m.e0(), e0);
            assert_eq!(m.states(), naive.as_slice());
        }
    }
}
