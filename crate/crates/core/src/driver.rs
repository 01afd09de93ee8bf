//! Stoquastic X-product drivers `V = Σ c_t Π_{i∈t} σᵢˣ` with `c_t < 0`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{SpinConfig, MAX_SPINS};

#[derive(Debug, Clone, PartialEq)]
pub struct DriverSpec {
    num_spins: usize,
    /// `(flip mask, coefficient)`, sorted by mask value, masks unique, coefficients < 0.
    xterms: Vec<(u128, f64)>,
}

impl DriverSpec {
    /// Builds a driver, merging repeated masks. Positive coefficients are
    /// rejected; terms whose merged coefficient is zero are dropped.
    pub fn new(num_spins: usize, terms: impl IntoIterator<Item = (u128, f64)>) -> Result<Self> {
        if num_spins == 0 || num_spins > MAX_SPINS {
            return Err(Error::InvalidArgument(format!(
                "num_spins must be in 1..={MAX_SPINS}, got {num_spins}"
            )));
        }
        let limit = crate::spin::full_mask(num_spins);
        let mut merged: BTreeMap<u128, f64> = BTreeMap::new();
        for (mask, c) in terms {
            if mask == 0 {
                return Err(Error::InvalidArgument(
                    "driver term with empty flip mask".into(),
                ));
            }
            if mask & !limit != 0 {
                return Err(Error::InvalidArgument(format!(
                    "driver mask {mask:#b} touches spins beyond {num_spins}"
                )));
            }
            if !c.is_finite() || c > 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "driver coefficient {c} is not stoquastic (must be <= 0)"
                )));
            }
            *merged.entry(mask).or_insert(0.0) += c;
        }
        Ok(DriverSpec {
            num_spins,
            xterms: merged.into_iter().filter(|&(_, c)| c < 0.0).collect(),
        })
    }

    /// `V = −Σᵢ σᵢˣ`.
    pub fn transverse_field(num_spins: usize) -> Result<Self> {
        Self::new(num_spins, (0..num_spins).map(|i| (1u128 << i, -1.0)))
    }

    /// `V = −Σᵢ σᵢˣ − Σ_{i<j} σᵢˣσⱼˣ`.
    pub fn transverse_field_with_pairs(num_spins: usize) -> Result<Self> {
        let pairs = (0..num_spins)
            .flat_map(|i| (i + 1..num_spins).map(move |j| ((1u128 << i) | (1u128 << j), -1.0)));
        Self::new(
            num_spins,
            (0..num_spins).map(|i| (1u128 << i, -1.0)).chain(pairs),
        )
    }

    /// Builds a driver from spin-index lists.
    pub fn from_spin_lists(num_spins: usize, terms: &[(&[usize], f64)]) -> Result<Self> {
        let mut raw = Vec::with_capacity(terms.len());
        for (spins, c) in terms {
            let mut mask = 0u128;
            for &i in spins.iter() {
                if i >= num_spins {
                    return Err(Error::InvalidArgument(format!(
                        "driver spin {i} out of range 0..{num_spins}"
                    )));
                }
                mask |= 1 << i;
            }
            raw.push((mask, *c));
        }
        Self::new(num_spins, raw)
    }

    /// Union of two drivers on the same spins; coefficients of shared masks add.
    pub fn combined(&self, other: &DriverSpec) -> Result<Self> {
        if self.num_spins != other.num_spins {
            return Err(Error::InvalidArgument(
                "drivers act on different spin counts".into(),
            ));
        }
        Self::new(
            self.num_spins,
            self.xterms.iter().chain(other.xterms.iter()).copied(),
        )
    }

    /// Parses the CLI shorthands `tf` and `tf+pairs`.
    pub fn from_shorthand(name: &str, num_spins: usize) -> Result<Self> {
        match name {
            "tf" => Self::transverse_field(num_spins),
            "tf+pairs" => Self::transverse_field_with_pairs(num_spins),
            other => Err(Error::InvalidArgument(format!(
                "unknown driver shorthand {other:?} (expected tf or tf+pairs)"
            ))),
        }
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn xterms(&self) -> &[(u128, f64)] {
        &self.xterms
    }

    pub fn is_empty(&self) -> bool {
        self.xterms.is_empty()
    }

    pub fn coefficient(&self, mask: u128) -> f64 {
        match self.xterms.binary_search_by_key(&mask, |&(m, _)| m) {
            Ok(i) => self.xterms[i].1,
            Err(_) => 0.0,
        }
    }

    /// `⟨s|V|t⟩`.
    pub fn matrix_element(&self, s: SpinConfig, t: SpinConfig) -> f64 {
        let mask = s.bits() ^ t.bits();
        if mask == 0 {
            return 0.0;
        }
        self.coefficient(mask)
    }

    /// States reachable from `s` by one driver term, with the term's coefficient.
    pub fn neighbors(&self, s: SpinConfig) -> impl Iterator<Item = (SpinConfig, f64)> + '_ {
        self.xterms.iter().map(move |&(m, c)| (s.flip_mask(m), c))
    }

    /// Sum of |coefficients|, an upper bound on ‖V‖.
    pub fn norm_bound(&self) -> f64 {
        self.xterms.iter().map(|(_, c)| c.abs()).sum()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: DriverFile = serde_json::from_str(text).map_err(|e| Error::Schema {
            field: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let lists: Vec<(&[usize], f64)> = file
            .xterms
            .iter()
            .map(|t| (t.spins.as_slice(), t.coeff))
            .collect();
        Self::from_spin_lists(file.num_spins, &lists)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let file = DriverFile {
            num_spins: self.num_spins,
            xterms: self
                .xterms
                .iter()
                .map(|&(m, c)| XTermFile {
                    spins: (0..self.num_spins).filter(|i| m >> i & 1 == 1).collect(),
                    coeff: c,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("driver serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct DriverFile {
    num_spins: usize,
    xterms: Vec<XTermFile>,
}

#[derive(Serialize, Deserialize)]
struct XTermFile {
    spins: Vec<usize>,
    coeff: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: &str) -> SpinConfig {
        SpinConfig::parse(s).unwrap()
    }

    #[test]
    fn single_flip_element() {
        let v = DriverSpec::transverse_field(3).unwrap();
        assert_eq!(v.matrix_element(cfg("↑↓↓"), cfg("↓↓↓")), -1.0);
        assert_eq!(v.matrix_element(cfg("↑↑↑"), cfg("↓↓↑")), 0.0);
        assert_eq!(v.matrix_element(cfg("↑↑↑"), cfg("↑↑↑")), 0.0);
    }

    #[test]
    fn pair_term_element() {
        let v = DriverSpec::from_spin_lists(5, &[(&[2, 3], -1.0)]).unwrap();
        assert_eq!(v.matrix_element(cfg("↑↑↑↑↑"), cfg("↑↑↓↓↑")), -1.0);
    }

    #[test]
    fn neighbor_lists() {
        let v = DriverSpec::transverse_field(3).unwrap();
        let n: Vec<_> = v.neighbors(cfg("111")).collect();
        assert_eq!(n.len(), 3);
        assert!(n
            .iter()
            .all(|&(t, c)| t.hamming(cfg("111")) == 1 && c == -1.0));
        let empty = DriverSpec::new(3, Vec::new()).unwrap();
        assert_eq!(empty.neighbors(cfg("111")).count(), 0);
        let both = DriverSpec::transverse_field(5)
            .unwrap()
            .combined(&DriverSpec::from_spin_lists(5, &[(&[0, 1], -1.0), (&[2, 3], -1.0)]).unwrap())
            .unwrap();
        assert_eq!(both.neighbors(cfg("11111")).count(), 7);
    }

    #[test]
    fn rejects_positive_coefficients() {
        assert!(DriverSpec::new(2, vec![(1, 0.5)]).is_err());
        assert!(DriverSpec::new(2, vec![(0, -1.0)]).is_err());
        assert!(DriverSpec::new(2, vec![(4, -1.0)]).is_err());
    }

    #[test]
    fn merges_masks() {
        let v = DriverSpec::new(2, vec![(1, -1.0), (1, -0.5), (2, 0.0)]).unwrap();
        assert_eq!(v.xterms(), &[(1, -1.5)]);
    }

    #[test]
    fn stoquastic_and_symmetric_exhaustive() {
        for n in 1..=5 {
            let v = DriverSpec::transverse_field_with_pairs(n).unwrap();
            for a in 0..1u128 << n {
                for b in 0..1u128 << n {
                    let (x, y) = (SpinConfig(a), SpinConfig(b));
                    let e = v.matrix_element(x, y);
                    assert_eq!(e, v.matrix_element(y, x));
                    assert!(e <= 0.0);
                    assert_eq!(e != 0.0, a != b && (a ^ b).count_ones() <= 2);
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let v = DriverSpec::from_spin_lists(4, &[(&[0], -1.0), (&[1, 3], -0.5)]).unwrap();
        assert_eq!(DriverSpec::from_json_str(&v.to_json_string()).unwrap(), v);
    }
}
