//! Exact small-system references: the lowest eigenspace of `H₀ + λV`
//! (quasi-static limit) and real-time evolution under the linear schedule
//! `H(t) = (t/τ)H₀ + (1 − t/τ)V`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::driver::DriverSpec;
use crate::error::{Error, Result};
use crate::groundset::GroundManifold;
use crate::metrics;
use crate::model::IsingModel;
use crate::perturb::{self, OrderPolicy};

pub const QUASISTATIC_MAX_SPINS: usize = 20;
pub const ADIABATIC_MAX_SPINS: usize = 14;
pub const DEFAULT_LAMBDA: f64 = 1e-3;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const MAX_NORM_DRIFT: f64 = 1e-8;
pub const MIN_TAU: f64 = 10.0;

const PARALLEL_DIM: usize = 1 << 12;
const BASIS_BYTES: usize = 256 << 20;
const MAX_RESTARTS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quasistatic,
    Schrodinger,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degeneracy_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub method: Method,
    /// `|⟨gᵢ|ψ⟩|²` per manifold state.
    pub probs: Vec<f64>,
    /// `probs` rescaled to sum to one over the manifold.
    pub normalized: Vec<f64>,
    pub residual_mass: f64,
    pub settings: OracleSettings,
    /// Quasi-static only: bottom eigenvalues kept in the averaged eigenspace.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub eigenvalues: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_norm_drift: Option<f64>,
}

fn finish(method: Method, probs: Vec<f64>, settings: OracleSettings) -> OracleResult {
    let total: f64 = probs.iter().sum();
    let normalized = if total > 0.0 {
        probs.iter().map(|p| p / total).collect()
    } else {
        vec![0.0; probs.len()]
    };
    OracleResult {
        method,
        probs,
        normalized,
        residual_mass: (1.0 - total).max(0.0),
        settings,
        eigenvalues: Vec::new(),
        eigen_residual: None,
        max_norm_drift: None,
    }
}

fn check_inputs(
    model: &IsingModel,
    driver: &DriverSpec,
    manifold: &GroundManifold,
    cap: usize,
    what: &'static str,
) -> Result<()> {
    let n = model.num_spins();
    if driver.num_spins() != n || manifold.num_spins() != n {
        return Err(Error::InvalidArgument(
            "model, driver and manifold must act on the same spins".into(),
        ));
    }
    if n > cap {
        return Err(Error::Capacity {
            what,
            size: n,
            cap,
            hint: "exact oracles need the full 2^N state vector",
        });
    }
    Ok(())
}

/// `H₀ + λV` (or any `a·H₀ + b·V`) applied matrix-free.
struct Operator {
    diag: Vec<f64>,
    xterms: Vec<(usize, f64)>,
}

impl Operator {
    fn new(model: &IsingModel, driver: &DriverSpec) -> Result<Self> {
        Ok(Operator {
            diag: model.compile()?.diagonal(),
            xterms: driver
                .xterms()
                .iter()
                .map(|&(m, c)| (m as usize, c))
                .collect(),
        })
    }

    fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `y = a·H₀x + b·Vx` for real vectors.
    fn apply(&self, a: f64, b: f64, x: &[f64], y: &mut [f64]) {
        let body = |offset: usize, out: &mut [f64]| {
            for (k, yk) in out.iter_mut().enumerate() {
                let s = offset + k;
                let mut acc = a * self.diag[s] * x[s];
                for &(m, c) in &self.xterms {
                    acc += b * c * x[s ^ m];
                }
                *yk = acc;
            }
        };
        if y.len() >= PARALLEL_DIM {
            y.par_chunks_mut(PARALLEL_DIM)
                .enumerate()
                .for_each(|(i, chunk)| body(i * PARALLEL_DIM, chunk));
        } else {
            body(0, y);
        }
    }

    /// `y = −i(a·H₀ + b·V)x` for complex vectors.
    fn apply_evolution(&self, a: f64, b: f64, x: &[Complex64], y: &mut [Complex64]) {
        let body = |offset: usize, out: &mut [Complex64]| {
            for (k, yk) in out.iter_mut().enumerate() {
                let s = offset + k;
                let mut acc = x[s] * (a * self.diag[s]);
                for &(m, c) in &self.xterms {
                    acc += x[s ^ m] * (b * c);
                }
                *yk = Complex64::new(acc.im, -acc.re);
            }
        };
        if y.len() >= PARALLEL_DIM {
            y.par_chunks_mut(PARALLEL_DIM)
                .enumerate()
                .for_each(|(i, chunk)| body(i * PARALLEL_DIM, chunk));
        } else {
            body(0, y);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthogonalises `v` against `basis` (two passes) and normalises it;
/// returns `None` when `v` lies in the span.
fn orthonormalize(basis: &[Vec<f64>], mut v: Vec<f64>) -> Option<Vec<f64>> {
    let start = dot(&v, &v).sqrt();
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &v);
            axpy(-c, q, &mut v);
        }
    }
    let norm = dot(&v, &v).sqrt();
    if norm <= 1e-10 * start {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

struct Cluster {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residual: f64,
}

/// Bottom eigenvalue cluster of `diag + λV` by explicitly restarted block
/// Lanczos with full reorthogonalisation, seeded with `start`.
fn bottom_cluster(
    op: &Operator,
    lambda: f64,
    start: Vec<Vec<f64>>,
    cluster_tol: f64,
) -> Result<Cluster> {
    let dim = op.dim();
    let block = start.len().max(1);
    let max_basis = (BASIS_BYTES / (16 * dim)).max(block + 2).min(dim).max(1);
    let mut seeds = start;
    let mut last_residual = f64::INFINITY;

    for _ in 0..MAX_RESTARTS {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut images: Vec<Vec<f64>> = Vec::new();
        let mut pending = seeds;
        'grow: while !pending.is_empty() && basis.len() < max_basis {
            let mut added = Vec::new();
            for v in pending {
                if basis.len() >= max_basis {
                    break;
                }
                if let Some(q) = orthonormalize(&basis, v) {
                    let mut hq = vec![0.0; dim];
                    op.apply(1.0, lambda, &q, &mut hq);
                    basis.push(q);
                    images.push(hq.clone());
                    added.push(hq);
                }
            }
            if added.is_empty() {
                break 'grow;
            }
            pending = added;
        }
        let k = basis.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]))
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let ritz = |idx: usize| -> (f64, Vec<f64>, f64) {
            let theta = eig.eigenvalues[idx];
            let u = eig.eigenvectors.column(idx);
            let mut y = vec![0.0; dim];
            let mut hy = vec![0.0; dim];
            for j in 0..k {
                axpy(u[j], &basis[j], &mut y);
                axpy(u[j], &images[j], &mut hy);
            }
            axpy(-theta, &y, &mut hy);
            (theta, y, dot(&hy, &hy).sqrt())
        };

        let theta0 = eig.eigenvalues[order[0]];
        let keep = block.max(2).min(k);
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        let mut worst: f64 = 0.0;
        let mut restart = Vec::new();
        for (rank, &idx) in order.iter().take(keep).enumerate() {
            let (theta, y, r) = ritz(idx);
            if theta - theta0 <= cluster_tol {
                worst = worst.max(r / theta.abs().max(1.0));
                values.push(theta);
                vectors.push(y.clone());
            }
            if rank < block {
                restart.push(y);
            }
        }
        last_residual = worst;
        if worst <= RESIDUAL_TOL || k == dim {
            return Ok(Cluster {
                values,
                vectors,
                residual: worst,
            });
        }
        seeds = restart;
    }
    Err(Error::NonConvergence {
        what: "quasi-static eigensolver",
        residual: last_residual,
    })
}

/// Lowest eigenspace of `H₀ + λV`; manifold probabilities are averaged
/// uniformly over an orthonormal basis of that eigenspace.
pub fn quasistatic(
    model: &IsingModel,
    driver: &DriverSpec,
    manifold: &GroundManifold,
    lambda: f64,
) -> Result<OracleResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be > 0, got {lambda}"
        )));
    }
    check_inputs(
        model,
        driver,
        manifold,
        QUASISTATIC_MAX_SPINS,
        "quasi-static oracle",
    )?;
    let op = Operator::new(model, driver)?;
    let dim = op.dim();
    let start: Vec<Vec<f64>> = manifold
        .states()
        .iter()
        .map(|s| {
            let mut v = vec![0.0; dim];
            v[s.bits() as usize] = 1.0;
            v
        })
        .collect();
    // λ² alone falls below double-precision noise on E₀ for small λ.
    let cluster_tol = (1e-10 * lambda * lambda).max(1e-11 * manifold.e0().abs().max(1.0));
    let cluster = bottom_cluster(&op, lambda, start, cluster_tol)?;
    let d = cluster.vectors.len() as f64;
    let probs = manifold
        .states()
        .iter()
        .map(|s| {
            let i = s.bits() as usize;
            cluster.vectors.iter().map(|v| v[i] * v[i]).sum::<f64>() / d
        })
        .collect();
    let mut out = finish(
        Method::Quasistatic,
        probs,
        OracleSettings {
            lambda: Some(lambda),
            tau: None,
            dt: None,
            residual_tol: Some(RESIDUAL_TOL),
            degeneracy_tol: Some(cluster_tol),
        },
    );
    out.eigenvalues = cluster.values;
    out.eigen_residual = Some(cluster.residual);
    Ok(out)
}

/// Integrates `i dψ/dt = H(t)ψ` from the uniform superposition with fixed-step RK4.
pub fn adiabatic(
    model: &IsingModel,
    driver: &DriverSpec,
    manifold: &GroundManifold,
    tau: f64,
    dt: f64,
) -> Result<OracleResult> {
    if !(tau >= MIN_TAU && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau must be >= {MIN_TAU}, got {tau}"
        )));
    }
    if !(dt > 0.0 && dt <= tau) {
        return Err(Error::InvalidArgument(format!(
            "dt must be in (0, tau], got {dt}"
        )));
    }
    check_inputs(
        model,
        driver,
        manifold,
        ADIABATIC_MAX_SPINS,
        "adiabatic oracle",
    )?;
    let op = Operator::new(model, driver)?;
    let dim = op.dim();
    let mut psi = vec![Complex64::new(1.0 / (dim as f64).sqrt(), 0.0); dim];
    let steps = (tau / dt).round().max(1.0) as usize;
    let h = tau / steps as f64;
    let mut k1 = vec![Complex64::default(); dim];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let mut max_drift: f64 = 0.0;
    let sched = |t: f64| (t / tau, 1.0 - t / tau);

    for step in 0..steps {
        let t = step as f64 * h;
        let (a, b) = sched(t);
        op.apply_evolution(a, b, &psi, &mut k1);
        let (a, b) = sched(t + 0.5 * h);
        for i in 0..dim {
            tmp[i] = psi[i] + k1[i] * (0.5 * h);
        }
        op.apply_evolution(a, b, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = psi[i] + k2[i] * (0.5 * h);
        }
        op.apply_evolution(a, b, &tmp, &mut k3);
        let (a, b) = sched(t + h);
        for i in 0..dim {
            tmp[i] = psi[i] + k3[i] * h;
        }
        op.apply_evolution(a, b, &tmp, &mut k4);
        for i in 0..dim {
            psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let drift = (norm - 1.0).abs();
        if drift > MAX_NORM_DRIFT {
            return Err(Error::StepSize {
                drift,
                time: t + h,
                dt: h,
            });
        }
        max_drift = max_drift.max(drift);
        psi.iter_mut().for_each(|z| *z /= norm);
    }
    let probs = manifold
        .states()
        .iter()
        .map(|s| psi[s.bits() as usize].norm_sqr())
        .collect();
    let mut out = finish(
        Method::Schrodinger,
        probs,
        OracleSettings {
            lambda: None,
            tau: Some(tau),
            dt: Some(h),
            residual_tol: None,
            degeneracy_tol: None,
        },
    );
    out.max_norm_drift = Some(max_drift);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossValidation {
    pub predicted: Vec<f64>,
    pub quasistatic: OracleResult,
    pub adiabatic: OracleResult,
    pub tv_quasistatic_prediction: f64,
    pub tv_adiabatic_prediction: f64,
    pub tv_quasistatic_adiabatic: f64,
}

/// Runs both oracles and compares them with the perturbative prediction.
pub fn cross_validate(
    model: &IsingModel,
    driver: &DriverSpec,
    manifold: &GroundManifold,
    lambda: f64,
    tau: f64,
    dt: f64,
) -> Result<CrossValidation> {
    let graph = perturb::resolve(model, manifold, driver, OrderPolicy::Auto)?;
    let predicted = metrics::predicted_probabilities(&graph)?.p();
    let (qs, ad) = rayon::join(
        || quasistatic(model, driver, manifold, lambda),
        || adiabatic(model, driver, manifold, tau, dt),
    );
    let (qs, ad) = (qs?, ad?);
    Ok(CrossValidation {
        tv_quasistatic_prediction: metrics::tv_distance(&qs.normalized, &predicted),
        tv_adiabatic_prediction: metrics::tv_distance(&ad.normalized, &predicted),
        tv_quasistatic_adiabatic: metrics::tv_distance(&qs.normalized, &ad.normalized),
        predicted,
        quasistatic: qs,
        adiabatic: ad,
    })
}

/// Nonzero entries `(row, col, value)` of `H₀ + λV`, row-major.
pub fn assemble_triplets(
    model: &IsingModel,
    driver: &DriverSpec,
    lambda: f64,
) -> Result<Vec<(usize, usize, f64)>> {
    check_inputs(
        model,
        driver,
        &GroundManifold::enumerate(model, None)?,
        QUASISTATIC_MAX_SPINS,
        "sparse assembly",
    )?;
    let op = Operator::new(model, driver)?;
    let mut out = Vec::new();
    for s in 0..op.dim() {
        if op.diag[s] != 0.0 {
            out.push((s, s, op.diag[s]));
        }
        let mut row: Vec<(usize, f64)> = op
            .xterms
            .iter()
            .map(|&(m, c)| (s ^ m, lambda * c))
            .collect();
        row.sort_by_key(|&(j, _)| j);
        out.extend(row.into_iter().map(|(j, v)| (s, j, v)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::metrics::tv_distance;

    fn tf(n: usize) -> DriverSpec {
        DriverSpec::transverse_field(n).unwrap()
    }

    #[test]
    fn chain_quasistatic_matches_prediction() {
        let model = fixtures::chain(4);
        let g = GroundManifold::enumerate(&model, None).unwrap();
        let r = quasistatic(&model, &tf(4), &g, 1e-3).unwrap();
        let expected = [1.0 / 12.0, 0.25, 1.0 / 3.0, 0.25, 1.0 / 12.0];
        assert!(tv_distance(&r.normalized, &expected) < 1e-3);
        assert!((r.probs.iter().sum::<f64>() + r.residual_mass - 1.0).abs() < 1e-8);
        assert!(r.eigen_residual.unwrap() < RESIDUAL_TOL);
    }

    #[test]
    fn triangle_symmetric_point() {
        let model = fixtures::triangle(1.0);
        let g = GroundManifold::enumerate(&model, None).unwrap();
        let r = quasistatic(&model, &tf(3), &g, 1e-3).unwrap();
        assert!(tv_distance(&r.normalized, &[1.0 / 3.0; 3]) < 1e-6);
    }

    #[test]
    fn single_spin_adiabatic() {
        let model = IsingModel::from_terms(1, &[(&[0], -1.0)], 0.0).unwrap();
        let g = GroundManifold::enumerate(&model, None).unwrap();
        let r = adiabatic(&model, &tf(1), &g, 100.0, 0.01).unwrap();
        assert!(r.probs[0] > 1.0 - 1e-4);
        assert!(r.max_norm_drift.unwrap() < MAX_NORM_DRIFT);
    }

    #[test]
    fn argument_and_capacity_errors() {
        let model = fixtures::chain(4);
        let g = GroundManifold::enumerate(&model, None).unwrap();
        assert!(matches!(
            quasistatic(&model, &tf(4), &g, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            quasistatic(&model, &tf(4), &g, -1.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            adiabatic(&model, &tf(4), &g, 5.0, 0.01),
            Err(Error::InvalidArgument(_))
        ));
        let big = fixtures::chain(21);
        let bg = GroundManifold::enumerate(&big, None).unwrap();
        let err = quasistatic(&big, &tf(21), &bg, 1e-3).unwrap_err();
        assert_eq!(err.class(), crate::ErrorClass::Capacity);
        let mid = fixtures::chain(15);
        let mg = GroundManifold::enumerate(&mid, None).unwrap();
        assert!(matches!(
            adiabatic(&mid, &tf(15), &mg, 20.0, 0.01),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn step_size_error_on_coarse_dt() {
        let model = fixtures::chain(4);
        let g = GroundManifold::enumerate(&model, None).unwrap();
        let err = adiabatic(&model, &tf(4), &g, 10.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::StepSize { .. }));
        assert_eq!(err.class(), crate::ErrorClass::Numerical);
    }

    #[test]
    fn hermitian_assembly() {
        let model = fixtures::matsuda();
        let v = DriverSpec::transverse_field_with_pairs(5).unwrap();
        let t = assemble_triplets(&model, &v, 0.37).unwrap();
        let map: std::collections::HashMap<(usize, usize), f64> =
            t.iter().map(|&(i, j, x)| ((i, j), x)).collect();
        for (&(i, j), &x) in &map {
            assert_eq!(map.get(&(j, i)), Some(&x));
        }
    }

    #[test]
    fn bottom_eigenvalue_near_e0() {
        let model = fixtures::matsuda();
        let g = GroundManifold::enumerate(&model, None).unwrap();
        let v = tf(5);
        for lambda in [1e-2, 1e-3, 1e-4] {
            let r = quasistatic(&model, &v, &g, lambda).unwrap();
            let e = r.eigenvalues[0];
            assert!((e - g.e0()).abs() <= lambda * v.norm_bound());
        }
    }

    #[test]
    fn quasistatic_agrees_with_dense_diagonalisation() {
        let model = fixtures::triangle(0.6);
        let g = GroundManifold::enumerate(&model, None).unwrap();
        let lambda = 0.05;
        let r = quasistatic(&model, &tf(3), &g, lambda).unwrap();
        let t = assemble_triplets(&model, &tf(3), lambda).unwrap();
        let mut h = DMatrix::zeros(8, 8);
        for (i, j, x) in t {
            h[(i, j)] = x;
        }
        let eig = SymmetricEigen::new(h);
        let k = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(k);
        for (idx, s) in g.states().iter().enumerate() {
            let p = v[s.bits() as usize].powi(2);
            assert!((p - r.probs[idx]).abs() < 1e-9);
        }
    }
}
