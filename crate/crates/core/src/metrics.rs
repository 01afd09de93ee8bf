//! Centralities, energy flatness, component verdicts and predicted probabilities.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::OracleResult;
use crate::perturb::{Order, SolutionGraph};

/// Relative tolerance for treating two component eigenvalues as tied.
pub const SURVIVOR_REL_TOL: f64 = 1e-9;
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpectrum {
    pub members: Vec<usize>,
    pub lambda1: f64,
    /// Unit-norm nonnegative Perron vector, indexed like `members`.
    pub vector: Vec<f64>,
}

/// Leading eigenpair of a nonnegative symmetric matrix by shifted power
/// iteration. The shift keeps the iteration away from the `−λ₁` eigenvalue of
/// bipartite graphs.
pub fn power_iteration(a: &DMatrix<f64>, start: Option<&[f64]>) -> Result<(f64, DVector<f64>)> {
    let m = a.nrows();
    if m == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if m == 1 {
        return Ok((a[(0, 0)], DVector::from_element(1, 1.0)));
    }
    let max_row = (0..m).map(|i| a.row(i).sum()).fold(0.0, f64::max);
    if max_row == 0.0 {
        // Zero matrix: any unit vector is an eigenvector; keep the symmetric one.
        return Ok((0.0, DVector::from_element(m, 1.0 / (m as f64).sqrt())));
    }
    let shift = 0.5 * max_row;
    let mut x = match start {
        Some(s) => {
            if s.len() != m || s.iter().any(|&v| v.is_nan() || v <= 0.0) {
                return Err(Error::InvalidArgument(
                    "start vector must be positive".into(),
                ));
            }
            DVector::from_column_slice(s)
        }
        None => DVector::from_element(m, 1.0),
    };
    x /= x.norm();
    let scale = max_row.max(1.0);
    let mut lambda = f64::NAN;
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        let ax = a * &x;
        let next_lambda = x.dot(&ax);
        residual = (&ax - &x * next_lambda).norm();
        let settled = (next_lambda - lambda).abs() <= POWER_TOL * scale;
        lambda = next_lambda;
        if settled && residual <= POWER_TOL * scale {
            return Ok((lambda, x.map(|v| v.abs())));
        }
        let mut y = ax + &x * shift;
        let norm = y.norm();
        y /= norm;
        x = y;
    }
    Err(Error::NonConvergence {
        what: "power iteration",
        residual,
    })
}

/// λ₁ and Perron vector of every connected component.
pub fn component_spectra(graph: &SolutionGraph) -> Result<Vec<ComponentSpectrum>> {
    spectra_of(graph.matrix(), graph.components())
}

fn spectra_of(a: &DMatrix<f64>, components: &[Vec<usize>]) -> Result<Vec<ComponentSpectrum>> {
    components
        .par_iter()
        .map(|members| {
            let k = members.len();
            let sub = DMatrix::from_fn(k, k, |i, j| a[(members[i], members[j])]);
            let (lambda1, v) = power_iteration(&sub, None)?;
            Ok(ComponentSpectrum {
                members: members.clone(),
                lambda1,
                vector: v.iter().copied().collect(),
            })
        })
        .collect()
}

/// Per-state prediction computed from a raw matrix, independent of the
/// manifold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
    pub lambda1: Vec<f64>,
    pub surviving: Vec<bool>,
    /// Max-normalised within each component.
    pub c_eig: Vec<f64>,
    /// Unit 2-norm within each component.
    pub c_eig_unit: Vec<f64>,
    pub p: Vec<f64>,
}

/// Survivors are the components whose λ₁ ties the global maximum; each gets an
/// equal share of probability, split inside the component as `cᵢ² / Σc²`.
pub fn predict(a: &DMatrix<f64>, components: &[Vec<usize>]) -> Result<Prediction> {
    let m = a.nrows();
    let spectra = spectra_of(a, components)?;
    let top = spectra
        .iter()
        .map(|s| s.lambda1)
        .fold(f64::NEG_INFINITY, f64::max);
    let surviving: Vec<bool> = spectra
        .iter()
        .map(|s| s.lambda1 >= top - SURVIVOR_REL_TOL * top.abs().max(f64::MIN_POSITIVE))
        .collect();
    let k = surviving.iter().filter(|&&s| s).count() as f64;

    let mut component_of = vec![0; m];
    let mut c_eig = vec![0.0; m];
    let mut c_eig_unit = vec![0.0; m];
    let mut p = vec![0.0; m];
    for (id, s) in spectra.iter().enumerate() {
        let max = s.vector.iter().cloned().fold(0.0, f64::max);
        let sq: f64 = s.vector.iter().map(|v| v * v).sum();
        for (&i, &v) in s.members.iter().zip(&s.vector) {
            component_of[i] = id;
            c_eig[i] = v / max;
            c_eig_unit[i] = v;
            if surviving[id] {
                p[i] = v * v / sq / k;
            }
        }
    }
    Ok(Prediction {
        components: components.to_vec(),
        component_of,
        lambda1: spectra.iter().map(|s| s.lambda1).collect(),
        surviving,
        c_eig,
        c_eig_unit,
        p,
    })
}

/// `EFᵢ = Σ_{k≠i} Aᵢₖ` and `REFᵢ = EFᵢ / Σ_{j≠i} EFⱼ`; `None` at first order.
pub fn energy_flatness(graph: &SolutionGraph) -> Option<Vec<(f64, Option<f64>)>> {
    if graph.order() != Order::Second {
        return None;
    }
    Some(flatness_of(graph.matrix()))
}

pub fn flatness_of(a: &DMatrix<f64>) -> Vec<(f64, Option<f64>)> {
    let m = a.nrows();
    let ef: Vec<f64> = (0..m).map(|i| a.row(i).sum() - a[(i, i)]).collect();
    let total: f64 = ef.iter().sum();
    ef.iter()
        .map(|&e| {
            let rest = total - e;
            (e, (rest != 0.0).then(|| e / rest))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralBounds {
    pub avg_degree: f64,
    pub max_degree: f64,
    pub lambda1: f64,
    pub pass: bool,
}

/// Checks `d̄ ≤ λ₁ ≤ Δ` on the 0/1 adjacency of a connected graph.
pub fn spectral_bounds(adj: &DMatrix<f64>) -> Result<SpectralBounds> {
    let m = adj.nrows();
    let deg: Vec<f64> = (0..m)
        .map(|i| (0..m).filter(|&j| j != i && adj[(i, j)] > 0.0).count() as f64)
        .collect();
    let unweighted = DMatrix::from_fn(m, m, |i, j| {
        if i != j && adj[(i, j)] > 0.0 {
            1.0
        } else {
            0.0
        }
    });
    let (lambda1, _) = power_iteration(&unweighted, None)?;
    let avg_degree = deg.iter().sum::<f64>() / m as f64;
    let max_degree = deg.iter().cloned().fold(0.0, f64::max);
    let pass = avg_degree <= lambda1 + 1e-9 && lambda1 <= max_degree + 1e-9;
    Ok(SpectralBounds {
        avg_degree,
        max_degree,
        lambda1,
        pass,
    })
}

pub fn spectral_bounds_check(graph: &SolutionGraph) -> Result<Vec<SpectralBounds>> {
    let a = graph.matrix();
    graph
        .components()
        .iter()
        .map(|members| {
            let k = members.len();
            spectral_bounds(&DMatrix::from_fn(k, k, |i, j| a[(members[i], members[j])]))
        })
        .collect()
}

/// `½ Σ |pᵢ − 1/M|`.
pub fn tv_from_uniform(p: &[f64]) -> f64 {
    let u = 1.0 / p.len() as f64;
    0.5 * p.iter().map(|x| (x - u).abs()).sum::<f64>()
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Population coefficient of variation; 0 for an empty or zero-mean sample.
pub fn coefficient_of_variation(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FairnessScalars {
    pub tv_uniform: f64,
    pub cv_centrality: f64,
}

/// TV distance of `p` from uniform and CV of the surviving states' centralities.
pub fn fairness_scalars(p: &[f64], surviving_centralities: &[f64]) -> FairnessScalars {
    FairnessScalars {
        tv_uniform: tv_from_uniform(p),
        cv_centrality: coefficient_of_variation(surviving_centralities),
    }
}

/// Kendall rank correlation, tau-b variant (tie corrected). Returns `None`
/// when either sequence is constant.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let (mut concordant, mut discordant, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j])?;
            let dy = y[i].partial_cmp(&y[j])?;
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {}
                (Equal, _) => tx += 1,
                (_, Equal) => ty += 1,
                (a, b) if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let denom = (((concordant + discordant + tx) * (concordant + discordant + ty)) as f64).sqrt();
    (denom > 0.0).then(|| (concordant - discordant) as f64 / denom)
}

#[derive(Debug, Clone, Serialize)]
pub struct StateReport {
    pub state: String,
    pub component: usize,
    pub c_deg: f64,
    pub c_eig: f64,
    pub c_eig_unit: f64,
    #[serde(rename = "EF")]
    pub ef: Option<f64>,
    #[serde(rename = "REF")]
    pub ref_: Option<f64>,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_p: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentReport {
    pub id: usize,
    pub states: Vec<String>,
    pub lambda1: f64,
    pub surviving: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportSettings {
    pub manifold_tol: f64,
    pub survivor_rel_tol: f64,
    pub power_tol: f64,
    pub tie_rule: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub driver: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_policy: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSection {
    #[serde(flatten)]
    pub result: OracleResult,
    pub tv_vs_prediction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FairnessReport {
    pub num_spins: usize,
    pub e0: f64,
    pub order: Order,
    pub states: Vec<StateReport>,
    pub components: Vec<ComponentReport>,
    pub tv_uniform: f64,
    pub cv_centrality: f64,
    pub settings: ReportSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
}

impl FairnessReport {
    pub fn p(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.p).collect()
    }

    pub fn c_eig(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.c_eig).collect()
    }

    pub fn c_eig_unit(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.c_eig_unit).collect()
    }

    pub fn surviving_components(&self) -> Vec<&ComponentReport> {
        self.components.iter().filter(|c| c.surviving).collect()
    }

    pub fn oracle_p(&self) -> Option<Vec<f64>> {
        self.states.iter().map(|s| s.oracle_p).collect()
    }

    /// Attaches an oracle run, filling per-state `oracle_p` with the
    /// manifold-normalised probabilities.
    pub fn attach_oracle(&mut self, result: OracleResult) -> Result<()> {
        if result.normalized.len() != self.states.len() {
            return Err(Error::InvalidArgument(
                "oracle result does not match the manifold".into(),
            ));
        }
        for (s, &q) in self.states.iter_mut().zip(&result.normalized) {
            s.oracle_p = Some(q);
        }
        let tv = tv_distance(&self.p(), &result.normalized);
        self.oracle = Some(OracleSection {
            result,
            tv_vs_prediction: tv,
        });
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv_rows(out, None, std::iter::once(self))
    }
}

/// Writes one row per ground state; with `key`, a leading column carries the
/// given value per report (used for parameter sweeps).
pub fn write_csv_rows<'a, W: Write>(
    out: W,
    key: Option<(&str, &[f64])>,
    reports: impl IntoIterator<Item = &'a FairnessReport>,
) -> Result<()> {
    let io = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = Vec::new();
    if let Some((name, _)) = key {
        header.push(name.to_string());
    }
    header.extend(
        [
            "state",
            "component",
            "c_deg",
            "c_eig",
            "c_eig_unit",
            "EF",
            "REF",
            "p",
            "oracle_p",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(io)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (k, report) in reports.into_iter().enumerate() {
        for s in &report.states {
            let mut row = Vec::new();
            if let Some((_, values)) = key {
                row.push(values[k].to_string());
            }
            row.extend([
                s.state.clone(),
                s.component.to_string(),
                s.c_deg.to_string(),
                s.c_eig.to_string(),
                s.c_eig_unit.to_string(),
                opt(s.ef),
                opt(s.ref_),
                s.p.to_string(),
                opt(s.oracle_p),
            ]);
            w.write_record(&row).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })?;
    Ok(())
}

/// Builds the full report for a solution graph.
pub fn predicted_probabilities(graph: &SolutionGraph) -> Result<FairnessReport> {
    let a = graph.matrix();
    let manifold = graph.manifold();
    let n = manifold.num_spins();
    let pred = predict(a, graph.components())?;
    let flat = energy_flatness(graph);
    let states: Vec<StateReport> = manifold
        .states()
        .iter()
        .enumerate()
        .map(|(i, s)| StateReport {
            state: s.label(n),
            component: pred.component_of[i],
            c_deg: a.row(i).sum(),
            c_eig: pred.c_eig[i],
            c_eig_unit: pred.c_eig_unit[i],
            ef: flat.as_ref().map(|f| f[i].0),
            ref_: flat.as_ref().and_then(|f| f[i].1),
            p: pred.p[i],
            oracle_p: None,
        })
        .collect();
    let components = pred
        .components
        .iter()
        .enumerate()
        .map(|(id, members)| ComponentReport {
            id,
            states: members
                .iter()
                .map(|&i| manifold.states()[i].label(n))
                .collect(),
            lambda1: pred.lambda1[id],
            surviving: pred.surviving[id],
        })
        .collect();
    let surviving_c: Vec<f64> = (0..states.len())
        .filter(|&i| pred.surviving[pred.component_of[i]])
        .map(|i| pred.c_eig[i])
        .collect();
    let scalars = fairness_scalars(&pred.p, &surviving_c);
    Ok(FairnessReport {
        num_spins: n,
        e0: manifold.e0(),
        order: graph.order(),
        states,
        components,
        tv_uniform: scalars.tv_uniform,
        cv_centrality: scalars.cv_centrality,
        settings: ReportSettings {
            manifold_tol: manifold.tol(),
            survivor_rel_tol: SURVIVOR_REL_TOL,
            power_tol: POWER_TOL,
            tie_rule: "equal_split",
            driver: None,
            order_policy: None,
        },
        oracle: None,
    })
}
