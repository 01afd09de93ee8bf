#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use solgraph::groundset::GroundManifold;
use solgraph::perturb::{self, OrderPolicy};
use solgraph::transforms::{self, Embedding};
use solgraph::{DriverSpec, IsingModel, SpinConfig};

pub fn s(label: &str) -> SpinConfig {
    SpinConfig::parse(label).unwrap()
}

pub fn labels(m: &GroundManifold) -> Vec<String> {
    m.labels()
}

/// Wheel on ring 0–1–2–3 with hub 4, couplings shared by the 90°-rotation
/// pairs: `a` on 01/23, `b` on 12/30, `c` on spokes 0/2, `d` on spokes 1/3.
pub fn wheel(a: f64, b: f64, c: f64, d: f64) -> IsingModel {
    IsingModel::from_terms(
        5,
        &[
            (&[0, 1], a),
            (&[2, 3], a),
            (&[1, 2], b),
            (&[0, 3], b),
            (&[0, 4], c),
            (&[2, 4], c),
            (&[1, 4], d),
            (&[3, 4], d),
        ],
        0.0,
    )
    .unwrap()
}

pub const MATSUDA_GROUND: [&str; 6] = ["00000", "11000", "00110", "11001", "00111", "11111"];

pub fn matsuda_tf_components() -> Vec<Vec<String>> {
    [
        vec!["00000"],
        vec!["11000", "11001"],
        vec!["00110", "00111"],
        vec!["11111"],
    ]
    .iter()
    .map(|c| c.iter().map(|x| x.to_string()).collect())
    .collect()
}

pub fn component_labels(model: &IsingModel, driver: &DriverSpec) -> Vec<Vec<String>> {
    let g = GroundManifold::enumerate(model, None).unwrap();
    let graph = perturb::resolve(model, &g, driver, OrderPolicy::Auto).unwrap();
    let mut out: Vec<Vec<String>> = graph
        .components()
        .iter()
        .map(|c| c.iter().map(|&i| g.states()[i].label(5)).collect())
        .collect();
    for c in &mut out {
        c.sort();
    }
    out.sort();
    out
}

/// Every wheel with integer couplings in -2..=2 and nonzero spokes whose
/// ground manifold is exactly the six target states and whose
/// transverse-field solution graph splits like the target. Sorted by L1 norm.
pub fn matsuda_search() -> Vec<(i32, [i32; 4])> {
    let mut target = matsuda_tf_components();
    target.sort();
    let mut want: Vec<String> = MATSUDA_GROUND.iter().map(|x| x.to_string()).collect();
    want.sort();
    let tf = DriverSpec::transverse_field(5).unwrap();
    let mut hits = Vec::new();
    for a in -2i32..=2 {
        for b in -2i32..=2 {
            for c in -2i32..=2 {
                for d in -2i32..=2 {
                    if c == 0 || d == 0 {
                        continue;
                    }
                    let m = wheel(a as f64, b as f64, c as f64, d as f64);
                    let g = GroundManifold::enumerate(&m, None).unwrap();
                    let mut got = labels(&g);
                    got.sort();
                    if got != want || component_labels(&m, &tf) != target {
                        continue;
                    }
                    hits.push((2 * (a.abs() + b.abs() + c.abs() + d.abs()), [a, b, c, d]));
                }
            }
        }
    }
    hits.sort();
    hits
}

/// Embedding of the five-spin wheel with hub 4 split over qubits 4 and 5;
/// `spokes[i]` is the qubit receiving the coupling from ring spin `i`.
pub fn wheel_embedding(spokes: [usize; 4]) -> Embedding {
    let mut assignment = BTreeMap::from([
        ((0, 1), (0, 1)),
        ((0, 3), (0, 3)),
        ((1, 2), (1, 2)),
        ((2, 3), (2, 3)),
    ]);
    for (i, &q) in spokes.iter().enumerate() {
        assignment.insert((i, 4), (i, q));
    }
    Embedding::new(
        vec![vec![0], vec![1], vec![2], vec![3], vec![4, 5]],
        vec![vec![], vec![], vec![], vec![], vec![(4, 5)]],
        assignment,
        None,
    )
    .unwrap()
}

pub const CHAIN_STRENGTHS: [f64; 3] = [0.5, 1.0, 1.5];

/// Ground manifold of the embedded model equals the chain-extended logical
/// manifold at every chain strength.
pub fn embedding_is_exact(model: &IsingModel, emb: &Embedding) -> bool {
    let logical = GroundManifold::enumerate(model, None).unwrap();
    let mut want: Vec<SpinConfig> = logical
        .states()
        .iter()
        .map(|&x| emb.chain_extend(x))
        .collect();
    want.sort();
    CHAIN_STRENGTHS.iter().all(|&jf| {
        let phys = transforms::embed(model, emb, jf).unwrap();
        GroundManifold::enumerate(&phys, None).unwrap().states() == want.as_slice()
    })
}

/// Lexicographically first spoke assignment that keeps every physical qubit
/// at degree ≤ 3 (so each chain qubit takes two spokes) and embeds exactly.
pub fn embedding_search(model: &IsingModel) -> Option<[usize; 4]> {
    for code in 0..16u32 {
        let spokes: [usize; 4] = std::array::from_fn(|i| 4 + ((code >> (3 - i)) & 1) as usize);
        if spokes.iter().filter(|&&q| q == 4).count() != 2 {
            continue;
        }
        if embedding_is_exact(model, &wheel_embedding(spokes)) {
            return Some(spokes);
        }
    }
    None
}

/// Pairwise order agreement, treating values within `tol` as tied.
pub fn concordant(x: &[f64], y: &[f64], tol: f64) -> bool {
    let sign = |a: f64, b: f64| {
        if (a - b).abs() <= tol {
            0
        } else if a > b {
            1
        } else {
            -1
        }
    };
    (0..x.len()).all(|i| (i + 1..x.len()).all(|j| sign(x[i], x[j]) == sign(y[i], y[j])))
}

/// Full `2^N` matrix of the driver.
pub fn dense_driver(driver: &DriverSpec) -> DMatrix<f64> {
    let dim = 1usize << driver.num_spins();
    let mut v = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for &(mask, c) in driver.xterms() {
            v[(r, r ^ mask as usize)] += c;
        }
    }
    v
}

fn projector(manifold: &GroundManifold, dim: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(dim, dim);
    for st in manifold.states() {
        let i = st.bits() as usize;
        p[(i, i)] = 1.0;
    }
    p
}

fn restrict(full: &DMatrix<f64>, manifold: &GroundManifold) -> DMatrix<f64> {
    let idx: Vec<usize> = manifold
        .states()
        .iter()
        .map(|st| st.bits() as usize)
        .collect();
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| full[(idx[i], idx[j])])
}

/// `−P V P` on the manifold basis.
pub fn projector_a1(manifold: &GroundManifold, driver: &DriverSpec) -> DMatrix<f64> {
    let v = dense_driver(driver);
    let p = projector(manifold, v.nrows());
    restrict(&(-(&p * &v * &p)), manifold)
}

/// `−P W P` with `W = V Q (E₀ − H₀)⁻¹ Q V`. The reduced resolvent is taken
/// from a general inverse of `Q(H₀ − E₀)Q + P`.
pub fn projector_a2(
    model: &IsingModel,
    manifold: &GroundManifold,
    driver: &DriverSpec,
) -> DMatrix<f64> {
    let v = dense_driver(driver);
    let dim = v.nrows();
    let compiled = model.compile().unwrap();
    let h0 = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            compiled.energy(SpinConfig(i as u128)) - manifold.e0()
        } else {
            0.0
        }
    });
    let p = projector(manifold, dim);
    let q = DMatrix::identity(dim, dim) - &p;
    let shifted = &q * &h0 * &q + &p;
    let inv = shifted.try_inverse().expect("Q(H0-E0)Q + P is invertible");
    let resolvent = -(&q * inv * &q);
    let w = &v * resolvent * &v;
    restrict(&(-(&p * w * &p)), manifold)
}
