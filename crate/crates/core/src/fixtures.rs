//! Small models used throughout the tests, examples and CLI fixtures.

use std::collections::BTreeMap;

use crate::model::{Coeff, IsingModel};
use crate::transforms::Embedding;

/// Open chain `H₀ = −Σ σᵢσᵢ₊₁ − σ₀ + σ_{n−1}`; its `n + 1` ground states are
/// the single-domain-wall states `↑…↑↓…↓`.
pub fn chain(n: usize) -> IsingModel {
    assert!(n >= 2, "chain needs at least two spins");
    let mut terms: Vec<(Vec<usize>, f64)> = (0..n - 1).map(|i| (vec![i, i + 1], -1.0)).collect();
    terms.push((vec![0], -1.0));
    terms.push((vec![n - 1], 1.0));
    IsingModel::new(n, terms.into_iter().map(|(s, c)| (s, Coeff::value(c))), 0.0)
        .expect("valid chain")
}

/// `H₀ = bσ₀σ₁ + bσ₀σ₂ + σ₁σ₂ − bσ₀ − σ₁ − σ₂` with `b` left as a parameter
/// (default 1).
pub fn triangle_template() -> IsingModel {
    let b = |w: f64| Coeff::param("b", w);
    IsingModel::new(
        3,
        vec![
            (vec![0], b(-1.0)),
            (vec![1], Coeff::value(-1.0)),
            (vec![2], Coeff::value(-1.0)),
            (vec![0, 1], b(1.0)),
            (vec![0, 2], b(1.0)),
            (vec![1, 2], Coeff::value(1.0)),
        ],
        0.0,
    )
    .expect("valid triangle")
    .with_params(BTreeMap::from([("b".to_string(), 1.0)]))
}

pub fn triangle(b: f64) -> IsingModel {
    triangle_template()
        .substitute(&BTreeMap::from([("b".to_string(), b)]))
        .expect("b bound")
}

/// Three-spin toy whose ground states are exactly `↑↑↑`, `↑↓↓` and `↓↓↓`
/// (energy −1, every other state 0).
pub fn three_state_toy() -> IsingModel {
    let mut table = [0.0; 8];
    for bits in [0b111, 0b001, 0b000] {
        table[bits] = -1.0;
    }
    IsingModel::from_energy_table(3, &table).expect("valid table")
}

/// Five-spin wheel: ring 0–1–2–3 plus the central spin 4. Ground states are
/// `↑↑↑↑↑`, `↓↓↓↓↓`, `↑↑↓↓↑`, `↓↓↑↑↓`, `↑↑↓↓↓`, `↓↓↑↑↑` at `E₀ = −4`.
pub fn matsuda() -> IsingModel {
    IsingModel::from_terms(
        5,
        &[
            (&[0, 1], -1.0),
            (&[2, 3], -1.0),
            (&[1, 2], 1.0),
            (&[0, 3], 1.0),
            (&[0, 4], -1.0),
            (&[1, 4], -1.0),
            (&[2, 4], -1.0),
            (&[3, 4], -1.0),
        ],
        0.0,
    )
    .expect("valid model")
}

/// The central spin becomes the two-qubit chain `[4, 5]`; spokes from spins 0
/// and 2 land on qubit 4, spokes from 1 and 3 on qubit 5.
pub fn matsuda_embedding() -> Embedding {
    let assignment = BTreeMap::from([
        ((0, 1), (0, 1)),
        ((0, 3), (0, 3)),
        ((1, 2), (1, 2)),
        ((2, 3), (2, 3)),
        ((0, 4), (0, 4)),
        ((1, 4), (1, 5)),
        ((2, 4), (2, 4)),
        ((3, 4), (3, 5)),
    ]);
    Embedding::new(
        vec![vec![0], vec![1], vec![2], vec![3], vec![4, 5]],
        vec![vec![], vec![], vec![], vec![], vec![(4, 5)]],
        assignment,
        None,
    )
    .expect("valid embedding")
}

/// Pair terms `−σ₀ˣσ₁ˣ − σ₂ˣσ₃ˣ` that join the Matsuda solution graph.
pub fn matsuda_partial_pairs() -> crate::DriverSpec {
    crate::DriverSpec::from_spin_lists(5, &[(&[0, 1], -1.0), (&[2, 3], -1.0)])
        .expect("valid driver")
}
