//! N-Queens as a penalty QUBO, with exact solution enumeration, dihedral
//! families and the (a, b, c) local-landscape triple.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groundset::GroundManifold;
use crate::model::IsingModel;
use crate::spin::SpinConfig;

/// Row `r` holds its queen in column `placement[r]`.
pub type Placement = Vec<usize>;

/// Largest board whose `n²` variables fit in a [`SpinConfig`].
pub const MAX_MODEL_N: usize = 11;
pub const MAX_ENUMERATE_N: usize = 12;

#[derive(Debug, Clone)]
pub struct QueensInstance {
    pub n: usize,
    pub model: IsingModel,
}

impl QueensInstance {
    /// Variable index of square `(row, col)`.
    pub fn var(&self, row: usize, col: usize) -> usize {
        row * self.n + col
    }

    pub fn config(&self, placement: &[usize]) -> SpinConfig {
        placement_config(placement, self.n)
    }

    /// Ground manifold given by the complete solution list.
    pub fn manifold(&self) -> Result<GroundManifold> {
        let states: Vec<SpinConfig> = enumerate_solutions(self.n)?
            .iter()
            .map(|p| self.config(p))
            .collect();
        GroundManifold::from_states(&self.model, &states, None)
    }
}

pub fn placement_config(placement: &[usize], n: usize) -> SpinConfig {
    let mut bits = 0u128;
    for (r, &c) in placement.iter().enumerate() {
        bits |= 1 << (r * n + c);
    }
    SpinConfig(bits)
}

/// Groups of squares sharing a row, a column, or a diagonal of either direction.
fn lines(n: usize) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let idx = |r: usize, c: usize| r * n + c;
    let mut exact_one = Vec::new();
    for r in 0..n {
        exact_one.push((0..n).map(|c| idx(r, c)).collect());
    }
    for c in 0..n {
        exact_one.push((0..n).map(|r| idx(r, c)).collect());
    }
    let mut at_most_one = Vec::new();
    for d in 0..2 * n - 1 {
        // r − c = d − (n − 1)
        let diag: Vec<usize> = (0..n)
            .filter_map(|r| {
                let c = r as isize - (d as isize - (n as isize - 1));
                (0..n as isize).contains(&c).then(|| idx(r, c as usize))
            })
            .collect();
        // r + c = d
        let anti: Vec<usize> = (0..n)
            .filter_map(|r| d.checked_sub(r).filter(|&c| c < n).map(|c| idx(r, c)))
            .collect();
        for line in [diag, anti] {
            if line.len() > 1 {
                at_most_one.push(line);
            }
        }
    }
    (exact_one, at_most_one)
}

/// `Σ_rows (Σx − 1)² + Σ_cols (Σx − 1)² + Σ_diag (Σx)(Σx − 1)` over binary `x`,
/// converted to spins.
pub fn build(n: usize) -> Result<QueensInstance> {
    if !(4..=MAX_MODEL_N).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "board size must be in 4..={MAX_MODEL_N}, got {n}"
        )));
    }
    let (exact_one, at_most_one) = lines(n);
    let mut monomials: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut offset = 0.0;
    for line in &exact_one {
        // (Σx − 1)² = −Σx + 2Σ_{a<b} x_a x_b + 1 using x² = x.
        offset += 1.0;
        for (k, &a) in line.iter().enumerate() {
            monomials.push((vec![a], -1.0));
            for &b in &line[k + 1..] {
                monomials.push((vec![a, b], 2.0));
            }
        }
    }
    for line in &at_most_one {
        // (Σx)(Σx − 1) = 2Σ_{a<b} x_a x_b.
        for (k, &a) in line.iter().enumerate() {
            for &b in &line[k + 1..] {
                monomials.push((vec![a, b], 2.0));
            }
        }
    }
    Ok(QueensInstance {
        n,
        model: IsingModel::from_binary_polynomial(n * n, &monomials, offset)?,
    })
}

/// Direct evaluation of the penalty on a 0/1 board.
pub fn penalty(n: usize, occupied: &[bool]) -> f64 {
    let (exact_one, at_most_one) = lines(n);
    let count = |line: &Vec<usize>| line.iter().filter(|&&i| occupied[i]).count() as f64;
    exact_one
        .iter()
        .map(|l| (count(l) - 1.0).powi(2))
        .sum::<f64>()
        + at_most_one
            .iter()
            .map(|l| count(l) * (count(l) - 1.0))
            .sum::<f64>()
}

/// All solutions in lexicographic order of their column vectors.
pub fn enumerate_solutions(n: usize) -> Result<Vec<Placement>> {
    if n == 0 || n > MAX_ENUMERATE_N {
        return Err(Error::InvalidArgument(format!(
            "board size must be in 1..={MAX_ENUMERATE_N}, got {n}"
        )));
    }
    fn extend(
        n: usize,
        row: usize,
        cols: u32,
        d1: u32,
        d2: u32,
        cur: &mut Placement,
        out: &mut Vec<Placement>,
    ) {
        if row == n {
            out.push(cur.clone());
            return;
        }
        for c in 0..n {
            let (a, b) = (row + c, row + n - 1 - c);
            if cols >> c & 1 == 1 || d1 >> a & 1 == 1 || d2 >> b & 1 == 1 {
                continue;
            }
            cur.push(c);
            extend(
                n,
                row + 1,
                cols | 1 << c,
                d1 | 1 << a,
                d2 | 1 << b,
                cur,
                out,
            );
            cur.pop();
        }
    }
    let per_first: Vec<Vec<Placement>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            let mut cur = vec![c];
            extend(n, 1, 1 << c, 1 << c, 1 << (n - 1 - c), &mut cur, &mut out);
            out
        })
        .collect();
    Ok(per_first.into_iter().flatten().collect())
}

pub fn is_solution(placement: &[usize], n: usize) -> bool {
    if placement.len() != n || placement.iter().any(|&c| c >= n) {
        return false;
    }
    for r in 0..n {
        for s in r + 1..n {
            let (a, b) = (placement[r], placement[s]);
            if a == b || a.abs_diff(b) == s - r {
                return false;
            }
        }
    }
    true
}

/// The eight images of a placement under the board's dihedral group.
pub fn symmetries(placement: &[usize]) -> [Placement; 8] {
    let n = placement.len();
    let map = |f: &dyn Fn(usize, usize) -> (usize, usize)| {
        let mut out = vec![0; n];
        for (r, &c) in placement.iter().enumerate() {
            let (r2, c2) = f(r, c);
            out[r2] = c2;
        }
        out
    };
    let m = n - 1;
    [
        map(&|r, c| (r, c)),
        map(&|r, c| (c, m - r)),
        map(&|r, c| (m - r, m - c)),
        map(&|r, c| (m - c, r)),
        map(&|r, c| (r, m - c)),
        map(&|r, c| (m - r, c)),
        map(&|r, c| (c, r)),
        map(&|r, c| (m - c, m - r)),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolutionFamily {
    pub fundamental: Placement,
    pub variants: Vec<Placement>,
}

/// Orbit partition; the fundamental solution is the lexicographically
/// smallest member. Families are ordered by their fundamental solution.
pub fn group_families(solutions: &[Placement]) -> Vec<SolutionFamily> {
    let mut families: std::collections::BTreeMap<Placement, Vec<Placement>> = Default::default();
    for s in solutions {
        let canonical = symmetries(s).into_iter().min().expect("eight images");
        families.entry(canonical).or_default().push(s.clone());
    }
    families
        .into_iter()
        .map(|(fundamental, mut variants)| {
            variants.sort();
            variants.dedup();
            SolutionFamily {
                fundamental,
                variants,
            }
        })
        .collect()
}

/// Counts empty squares whose new queen would share a diagonal with 0, 1 or 2
/// existing queens.
pub fn landscape_triple(placement: &[usize]) -> Result<(usize, usize, usize)> {
    let n = placement.len();
    if !is_solution(placement, n) {
        return Err(Error::InvalidArgument(format!(
            "{placement:?} is not a solution"
        )));
    }
    let mut diag = vec![false; 2 * n - 1];
    let mut anti = vec![false; 2 * n - 1];
    for (r, &c) in placement.iter().enumerate() {
        diag[r + n - 1 - c] = true;
        anti[r + c] = true;
    }
    let mut t = (0, 0, 0);
    for r in 0..n {
        for c in 0..n {
            if placement[r] == c {
                continue;
            }
            match usize::from(diag[r + n - 1 - c]) + usize::from(anti[r + c]) {
                0 => t.0 += 1,
                1 => t.1 += 1,
                _ => t.2 += 1,
            }
        }
    }
    Ok(t)
}
