//! Diagonal target Hamiltonians over ±1 spins.
//!
//! A model stores the coefficient of every spin product exactly as it
//! appears in H₀, so `H₀ = Σ c_S Π_{i∈S} σᵢ + offset`. No sign convention
//! for fields or couplings is implied; [`IsingModel::from_fields_couplings`]
//! is the one place that applies the `−Σhσ − ΣJσσ` convention.
//!
//! Coefficients may be templated: a coefficient is a linear form
//! `constant + Σ weight·param`, written in model files as `"$name"` or
//! `"-$name"`. Templated models must be substituted before evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{SpinConfig, MAX_SPINS};

/// Linear form over named parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coeff {
    pub constant: f64,
    pub params: BTreeMap<String, f64>,
}

impl Coeff {
    pub fn value(v: f64) -> Self {
        Coeff {
            constant: v,
            params: BTreeMap::new(),
        }
    }

    pub fn param(name: &str, weight: f64) -> Self {
        let mut params = BTreeMap::new();
        params.insert(name.to_string(), weight);
        Coeff {
            constant: 0.0,
            params,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.params.is_empty()
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.is_constant().then_some(self.constant)
    }

    fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.params.is_empty()
    }

    fn add_assign(&mut self, other: &Coeff) {
        self.constant += other.constant;
        for (name, w) in &other.params {
            let entry = self.params.entry(name.clone()).or_insert(0.0);
            *entry += w;
        }
        self.params.retain(|_, w| *w != 0.0);
    }

    pub fn scaled(&self, s: f64) -> Coeff {
        Coeff {
            constant: self.constant * s,
            params: self
                .params
                .iter()
                .map(|(k, w)| (k.clone(), w * s))
                .collect(),
        }
    }

    fn resolve(&self, lookup: &dyn Fn(&str) -> Option<f64>, missing: &mut BTreeSet<String>) -> f64 {
        let mut v = self.constant;
        for (name, w) in &self.params {
            match lookup(name) {
                Some(x) => v += w * x,
                None => {
                    missing.insert(name.clone());
                }
            }
        }
        v
    }
}

/// One product term `coeff · Π_{i∈spins} σᵢ`; `spins` is sorted and non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub spins: Vec<usize>,
    pub coeff: Coeff,
}

impl Term {
    pub fn mask(&self) -> u128 {
        self.spins.iter().fold(0u128, |m, &i| m | (1u128 << i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    num_spins: usize,
    terms: Vec<Term>,
    offset: f64,
    params: BTreeMap<String, f64>,
}

impl IsingModel {
    /// Builds a model from raw terms, validating indices and merging equal supports.
    pub fn new(
        num_spins: usize,
        raw_terms: impl IntoIterator<Item = (Vec<usize>, Coeff)>,
        offset: f64,
    ) -> Result<Self> {
        if num_spins == 0 || num_spins > MAX_SPINS {
            return Err(Error::InvalidArgument(format!(
                "num_spins must be in 1..={MAX_SPINS}, got {num_spins}"
            )));
        }
        let mut offset = offset;
        let mut merged: BTreeMap<(usize, Vec<usize>), Coeff> = BTreeMap::new();
        for (idx, (mut spins, coeff)) in raw_terms.into_iter().enumerate() {
            spins.sort_unstable();
            if let Some(&bad) = spins.iter().find(|&&i| i >= num_spins) {
                return Err(Error::schema(
                    format!("terms[{idx}].spins"),
                    format!("spin index {bad} out of range 0..{num_spins}"),
                ));
            }
            if spins.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::schema(
                    format!("terms[{idx}].spins"),
                    "duplicate spin index in support",
                ));
            }
            if spins.is_empty() {
                match coeff.as_constant() {
                    Some(c) => offset += c,
                    None => {
                        return Err(Error::schema(
                            format!("terms[{idx}]"),
                            "an empty support is only allowed with a numeric coefficient",
                        ))
                    }
                }
                continue;
            }
            merged
                .entry((spins.len(), spins))
                .or_default()
                .add_assign(&coeff);
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((_, spins), coeff)| Term { spins, coeff })
            .collect();
        Ok(IsingModel {
            num_spins,
            terms,
            offset,
            params: BTreeMap::new(),
        })
    }

    /// Numeric-coefficient convenience constructor.
    pub fn from_terms(num_spins: usize, terms: &[(&[usize], f64)], offset: f64) -> Result<Self> {
        Self::new(
            num_spins,
            terms.iter().map(|(s, c)| (s.to_vec(), Coeff::value(*c))),
            offset,
        )
    }

    /// `H₀ = −Σ hᵢσᵢ − Σ Jᵢⱼσᵢσⱼ`.
    pub fn from_fields_couplings(
        num_spins: usize,
        fields: &[f64],
        couplings: &[(usize, usize, f64)],
    ) -> Result<Self> {
        if fields.len() != num_spins {
            return Err(Error::InvalidArgument(format!(
                "expected {num_spins} fields, got {}",
                fields.len()
            )));
        }
        let terms = fields
            .iter()
            .enumerate()
            .map(|(i, &h)| (vec![i], Coeff::value(-h)))
            .chain(
                couplings
                    .iter()
                    .map(|&(i, j, c)| (vec![i, j], Coeff::value(-c))),
            );
        Self::new(num_spins, terms, 0.0)
    }

    /// Converts a polynomial over binary variables `x ∈ {0,1}` to spins via
    /// `x = (1 + σ)/2`. Repeated variables inside a monomial collapse (`x² = x`).
    pub fn from_binary_polynomial(
        num_vars: usize,
        monomials: &[(Vec<usize>, f64)],
        offset: f64,
    ) -> Result<Self> {
        let mut out: Vec<(Vec<usize>, Coeff)> = Vec::new();
        let mut constant = offset;
        for (vars, c) in monomials {
            let mut vars = vars.clone();
            vars.sort_unstable();
            vars.dedup();
            let k = vars.len();
            if k > 30 {
                return Err(Error::InvalidArgument(
                    "binary monomial of degree > 30".to_string(),
                ));
            }
            let scale = c / f64::from(1u32 << k);
            for subset in 0u32..(1u32 << k) {
                let support: Vec<usize> = (0..k)
                    .filter(|b| subset >> b & 1 == 1)
                    .map(|b| vars[b])
                    .collect();
                if support.is_empty() {
                    constant += scale;
                } else {
                    out.push((support, Coeff::value(scale)));
                }
            }
        }
        Self::new(num_vars, out, constant)
    }

    /// Exact polynomial representation of an arbitrary energy table indexed by
    /// configuration bits (Walsh–Hadamard expansion).
    pub fn from_energy_table(num_spins: usize, table: &[f64]) -> Result<Self> {
        if num_spins > 24 || table.len() != 1usize << num_spins {
            return Err(Error::InvalidArgument(format!(
                "energy table must have 2^{num_spins} entries (num_spins <= 24)"
            )));
        }
        let mut a = table.to_vec();
        let mut h = 1;
        while h < a.len() {
            for block in (0..a.len()).step_by(2 * h) {
                for i in block..block + h {
                    let (x, y) = (a[i], a[i + h]);
                    a[i] = x + y;
                    a[i + h] = x - y;
                }
            }
            h *= 2;
        }
        let norm = table.len() as f64;
        let mut offset = 0.0;
        let mut terms = Vec::new();
        for (mask, &v) in a.iter().enumerate() {
            // σ_T = (-1)^{|T|} (-1)^{popcount(T & s)}
            let sign = if mask.count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            let c = sign * v / norm;
            if c == 0.0 {
                continue;
            }
            if mask == 0 {
                offset = c;
            } else {
                let spins = (0..num_spins).filter(|i| mask >> i & 1 == 1).collect();
                terms.push((spins, Coeff::value(c)));
            }
        }
        Self::new(num_spins, terms, offset)
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Default parameter values carried by the model file.
    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    /// Names of every parameter referenced by a coefficient.
    pub fn param_names(&self) -> BTreeSet<String> {
        self.terms
            .iter()
            .flat_map(|t| t.coeff.params.keys().cloned())
            .collect()
    }

    pub fn is_resolved(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.is_constant())
    }

    pub fn max_order(&self) -> usize {
        self.terms.iter().map(|t| t.spins.len()).max().unwrap_or(0)
    }

    /// Numeric coefficient of the product over `spins` (0 if absent).
    pub fn coefficient(&self, spins: &[usize]) -> Option<f64> {
        let mut key = spins.to_vec();
        key.sort_unstable();
        match self.terms.iter().find(|t| t.spins == key) {
            Some(t) => t.coeff.as_constant(),
            None => Some(0.0),
        }
    }

    /// Replaces parameters by values. `bindings` take precedence over the
    /// model's own defaults; any name bound by neither is reported.
    pub fn substitute(&self, bindings: &BTreeMap<String, f64>) -> Result<IsingModel> {
        let lookup = |name: &str| {
            bindings
                .get(name)
                .or_else(|| self.params.get(name))
                .copied()
        };
        let mut missing = BTreeSet::new();
        let terms: Vec<(Vec<usize>, Coeff)> = self
            .terms
            .iter()
            .map(|t| {
                let v = t.coeff.resolve(&lookup, &mut missing);
                (t.spins.clone(), Coeff::value(v))
            })
            .collect();
        if !missing.is_empty() {
            return Err(Error::UnboundParameters(missing.into_iter().collect()));
        }
        if let Some((spins, c)) = terms.iter().find(|(_, c)| !c.constant.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "coefficient of {spins:?} is not finite ({})",
                c.constant
            )));
        }
        Self::new(self.num_spins, terms, self.offset)
    }

    /// Substitutes the model's own default parameters.
    pub fn resolve(&self) -> Result<IsingModel> {
        self.substitute(&BTreeMap::new())
    }

    /// Returns a copy with every coefficient (and the offset) multiplied by `s`.
    pub fn scaled(&self, s: f64) -> IsingModel {
        IsingModel {
            num_spins: self.num_spins,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    spins: t.spins.clone(),
                    coeff: t.coeff.scaled(s),
                })
                .collect(),
            offset: self.offset * s,
            params: self.params.clone(),
        }
    }

    /// Energy `Σ c_S Π σ + offset`.
    pub fn energy(&self, s: SpinConfig) -> Result<f64> {
        let mut e = self.offset;
        for t in &self.terms {
            let c = match t.coeff.as_constant() {
                Some(c) => c,
                None => {
                    let name = t.coeff.params.keys().next().cloned().unwrap_or_default();
                    return Err(Error::UnresolvedParameter(name));
                }
            };
            let mut p = 1.0;
            for &i in &t.spins {
                p *= f64::from(s.spin(i));
            }
            e += c * p;
        }
        Ok(e)
    }

    /// Flattens the model into masks for fast repeated evaluation.
    pub fn compile(&self) -> Result<CompiledModel> {
        let mut masks = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            match t.coeff.as_constant() {
                Some(c) => masks.push((t.mask(), c)),
                None => {
                    let name = t.coeff.params.keys().next().cloned().unwrap_or_default();
                    return Err(Error::UnresolvedParameter(name));
                }
            }
        }
        Ok(CompiledModel {
            num_spins: self.num_spins,
            masks,
            offset: self.offset,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| {
            Error::schema(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        file.into_model()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(ModelFile::from_model(self)?).expect("model serializes"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from_model(self)?).expect("model serializes"))
    }
}

/// Mask form of a parameter-free model.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub num_spins: usize,
    pub masks: Vec<(u128, f64)>,
    pub offset: f64,
}

impl CompiledModel {
    #[inline]
    pub fn energy(&self, s: SpinConfig) -> f64 {
        let down = !s.bits();
        let mut e = self.offset;
        for &(mask, c) in &self.masks {
            if (down & mask).count_ones() & 1 == 0 {
                e += c;
            } else {
                e -= c;
            }
        }
        e
    }

    /// Full diagonal of H₀ over all `2^N` configurations.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..1u128 << self.num_spins)
            .map(|b| self.energy(SpinConfig(b)))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    num_spins: usize,
    terms: Vec<TermFile>,
    #[serde(default)]
    offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<BTreeMap<String, f64>>,
}

#[derive(Serialize, Deserialize)]
struct TermFile {
    spins: Vec<usize>,
    coeff: CoeffFile,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoeffFile {
    Number(f64),
    Param(String),
}

fn parse_param_ref(idx: usize, s: &str) -> Result<Coeff> {
    let (weight, rest) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s),
    };
    let name = rest.strip_prefix('$').ok_or_else(|| {
        Error::schema(
            format!("terms[{idx}].coeff"),
            format!("expected a number, \"$name\" or \"-$name\", got {s:?}"),
        )
    })?;
    if name.is_empty() {
        return Err(Error::schema(
            format!("terms[{idx}].coeff"),
            "empty parameter name",
        ));
    }
    Ok(Coeff::param(name, weight))
}

impl ModelFile {
    fn into_model(self) -> Result<IsingModel> {
        let mut raw = Vec::with_capacity(self.terms.len());
        for (idx, t) in self.terms.into_iter().enumerate() {
            let coeff = match t.coeff {
                CoeffFile::Number(v) => Coeff::value(v),
                CoeffFile::Param(s) => parse_param_ref(idx, &s)?,
            };
            raw.push((t.spins, coeff));
        }
        let model = IsingModel::new(self.num_spins, raw, self.offset)?;
        Ok(model.with_params(self.params.unwrap_or_default()))
    }

    fn from_model(m: &IsingModel) -> Result<Self> {
        let mut terms = Vec::new();
        for t in &m.terms {
            if t.coeff.constant != 0.0 || t.coeff.params.is_empty() {
                terms.push(TermFile {
                    spins: t.spins.clone(),
                    coeff: CoeffFile::Number(t.coeff.constant),
                });
            }
            for (name, &w) in &t.coeff.params {
                // The file schema only carries unit weights; repeat the entry otherwise.
                let (sign, reps) = if w < 0.0 { ("-", -w) } else { ("", w) };
                let whole = reps.round();
                if (reps - whole).abs() < 1e-12 && whole >= 1.0 {
                    for _ in 0..whole as usize {
                        terms.push(TermFile {
                            spins: t.spins.clone(),
                            coeff: CoeffFile::Param(format!("{sign}${name}")),
                        });
                    }
                } else {
                    return Err(Error::schema(
                        format!("terms {:?}", t.spins),
                        format!("parameter weight {w} for `{name}` is not representable"),
                    ));
                }
            }
        }
        Ok(ModelFile {
            num_spins: m.num_spins,
            terms,
            offset: m.offset,
            params: (!m.params.is_empty()).then(|| m.params.clone()),
        })
    }
}
