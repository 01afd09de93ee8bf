//! Solution graphs: `A⁽¹⁾ = −P₁VP₁` and, when that vanishes, the second-order
//! matrix `A⁽²⁾ = −P₁WP₁` with `W = PV(E₀ − H₀)⁻¹QVP`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::driver::DriverSpec;
use crate::error::{Error, Result};
use crate::groundset::GroundManifold;
use crate::model::IsingModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Order {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderPolicy {
    #[default]
    Auto,
    First,
    Second,
}

impl std::str::FromStr for OrderPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(OrderPolicy::Auto),
            "first" => Ok(OrderPolicy::First),
            "second" => Ok(OrderPolicy::Second),
            _ => Err(Error::InvalidArgument(format!(
                "order must be auto, first or second, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionGraph {
    manifold: GroundManifold,
    order: Order,
    a: DMatrix<f64>,
    hamming: DMatrix<u32>,
    components: Vec<Vec<usize>>,
}

impl SolutionGraph {
    /// Wraps an arbitrary nonnegative symmetric matrix over a manifold.
    pub fn from_matrix(manifold: GroundManifold, order: Order, a: DMatrix<f64>) -> Result<Self> {
        let m = manifold.len();
        if a.nrows() != m || a.ncols() != m {
            return Err(Error::InvalidArgument(format!(
                "matrix is {}x{}, manifold has {m} states",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::InvalidArgument(
                "solution-graph weights must be finite and >= 0".into(),
            ));
        }
        let states = manifold.states();
        let hamming = DMatrix::from_fn(m, m, |i, j| states[i].hamming(states[j]));
        let components = connected_components(&a);
        Ok(SolutionGraph {
            manifold,
            order,
            a,
            hamming,
            components,
        })
    }

    pub fn manifold(&self) -> &GroundManifold {
        &self.manifold
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.a.nrows() == 0
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    pub fn hamming(&self, i: usize, j: usize) -> u32 {
        self.hamming[(i, j)]
    }

    /// Components ordered by their smallest member; members ascending.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_of(&self, i: usize) -> usize {
        self.components
            .iter()
            .position(|c| c.contains(&i))
            .expect("components partition the index set")
    }

    /// Off-diagonal pairs `(i, j, w)` with `i < j` and `w > 0`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let m = self.len();
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                let w = self.a[(i, j)];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|&x| x == 0.0)
    }
}

/// `A⁽¹⁾ᵢⱼ = −⟨gᵢ|V|gⱼ⟩`.
pub fn build_a1(manifold: &GroundManifold, driver: &DriverSpec) -> Result<SolutionGraph> {
    check_sizes(manifold, driver)?;
    let states = manifold.states();
    let m = states.len();
    let a = DMatrix::from_fn(m, m, |i, j| -driver.matrix_element(states[i], states[j]));
    SolutionGraph::from_matrix(manifold.clone(), Order::First, a)
}

/// Second-order matrix, summing over intermediates `m = gᵢ ⊕ t ∉ 𝒢` with
/// `gⱼ = m ⊕ t′`: `A⁽²⁾ᵢⱼ = Σ c_t c_t′ / (E_m − E₀)`.
pub fn build_a2(
    model: &IsingModel,
    manifold: &GroundManifold,
    driver: &DriverSpec,
) -> Result<SolutionGraph> {
    check_sizes(manifold, driver)?;
    if model.num_spins() != manifold.num_spins() {
        return Err(Error::InvalidArgument(
            "model and manifold have different spin counts".into(),
        ));
    }
    if !build_a1(manifold, driver)?.is_zero() {
        return Err(Error::OrderConflict);
    }
    let compiled = model.compile()?;
    let states = manifold.states();
    let m = states.len();
    let n = manifold.num_spins();
    let e0 = manifold.e0();
    let tol = manifold.tol();

    let rows: Vec<Vec<f64>> = states
        .par_iter()
        .map(|&g| {
            let mut row = vec![0.0; m];
            for (mid, c1) in driver.neighbors(g) {
                if manifold.contains(mid) {
                    continue;
                }
                let gap = compiled.energy(mid) - e0;
                if gap <= tol {
                    return Err(Error::DegenerateIntermediate {
                        state: mid.label(n),
                        gap,
                    });
                }
                for (end, c2) in driver.neighbors(mid) {
                    if let Some(j) = manifold.index_of(end) {
                        row[j] += c1 * c2 / gap;
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let a = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
    SolutionGraph::from_matrix(manifold.clone(), Order::Second, a)
}

/// Picks the perturbative order. `Auto` uses first order whenever `A⁽¹⁾` has
/// a nonzero entry; forcing `Second` on such input is refused because the
/// second-order matrix is only defined here for an identically zero `A⁽¹⁾`.
pub fn resolve(
    model: &IsingModel,
    manifold: &GroundManifold,
    driver: &DriverSpec,
    policy: OrderPolicy,
) -> Result<SolutionGraph> {
    let a1 = build_a1(manifold, driver)?;
    match policy {
        OrderPolicy::First => Ok(a1),
        OrderPolicy::Auto if !a1.is_zero() => Ok(a1),
        OrderPolicy::Auto | OrderPolicy::Second => build_a2(model, manifold, driver),
    }
}

fn check_sizes(manifold: &GroundManifold, driver: &DriverSpec) -> Result<()> {
    if manifold.num_spins() != driver.num_spins() {
        return Err(Error::InvalidArgument(format!(
            "driver acts on {} spins, manifold on {}",
            driver.num_spins(),
            manifold.num_spins()
        )));
    }
    Ok(())
}

fn connected_components(a: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let m = a.nrows();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..m {
        for j in i + 1..m {
            if a[(i, j)] > 0.0 || a[(j, i)] > 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..m {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}
