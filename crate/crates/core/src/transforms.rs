//! Minor embedding with chain strength, and the ELTIP exchange of local fields
//! and interactions.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coeff, IsingModel};
use crate::spin::{full_mask, SpinConfig};

/// Parameter name used for the chain strength in templated embeddings.
pub const CHAIN_STRENGTH_PARAM: &str = "J_F";

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    chains: Vec<Vec<usize>>,
    chain_edges: Vec<Vec<(usize, usize)>>,
    assignment: BTreeMap<(usize, usize), (usize, usize)>,
    field_split: Vec<Vec<f64>>,
    num_physical: usize,
}

impl Embedding {
    /// Validates and builds an embedding. `field_split = None` puts every
    /// logical field on the first qubit of its chain.
    pub fn new(
        chains: Vec<Vec<usize>>,
        chain_edges: Vec<Vec<(usize, usize)>>,
        assignment: BTreeMap<(usize, usize), (usize, usize)>,
        field_split: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::Embedding(m));
        if chain_edges.len() != chains.len() {
            return bad("chain_edges must list one entry per chain".into());
        }
        let mut owner = BTreeMap::new();
        for (i, chain) in chains.iter().enumerate() {
            if chain.is_empty() {
                return bad(format!("chain of logical {i} is empty"));
            }
            for &q in chain {
                if let Some(prev) = owner.insert(q, i) {
                    return bad(format!("qubit {q} appears in chains {prev} and {i}"));
                }
            }
        }
        let num_physical = owner.len();
        if owner.keys().copied().ne(0..num_physical) {
            return bad(format!("physical qubits must be exactly 0..{num_physical}"));
        }
        if num_physical > crate::spin::MAX_SPINS {
            return bad(format!(
                "{num_physical} physical qubits exceed the spin cap"
            ));
        }
        for (i, (chain, edges)) in chains.iter().zip(&chain_edges).enumerate() {
            let members: BTreeSet<usize> = chain.iter().copied().collect();
            for &(a, b) in edges {
                if a == b || !members.contains(&a) || !members.contains(&b) {
                    return bad(format!("chain edge ({a},{b}) is not inside chain {i}"));
                }
            }
            if !spans(chain, edges) {
                return bad(format!(
                    "chain_edges of logical {i} do not connect its chain"
                ));
            }
        }
        let mut normalized = BTreeMap::new();
        for (&(i, j), &(a, b)) in &assignment {
            let (i, j, a, b) = if i < j { (i, j, a, b) } else { (j, i, b, a) };
            if i == j || j >= chains.len() {
                return bad(format!("assignment key ({i},{j}) is not a logical edge"));
            }
            if owner.get(&a) != Some(&i) || owner.get(&b) != Some(&j) {
                return bad(format!(
                    "assignment ({i},{j}) -> ({a},{b}) must join chain {i} to chain {j}"
                ));
            }
            normalized.insert((i, j), (a, b));
        }
        let field_split = match field_split {
            Some(split) => {
                if split.len() != chains.len() {
                    return bad("field_split must list one entry per chain".into());
                }
                for (i, (w, chain)) in split.iter().zip(&chains).enumerate() {
                    let sum: f64 = w.iter().sum();
                    if w.len() != chain.len()
                        || (sum - 1.0).abs() > 1e-12
                        || w.iter().any(|x| !x.is_finite())
                    {
                        return bad(format!("field_split of logical {i} must have one weight per qubit summing to 1"));
                    }
                }
                split
            }
            None => chains
                .iter()
                .map(|c| {
                    let mut w = vec![0.0; c.len()];
                    w[0] = 1.0;
                    w
                })
                .collect(),
        };
        Ok(Embedding {
            chains,
            chain_edges,
            assignment: normalized,
            field_split,
            num_physical,
        })
    }

    /// Every chain a singleton and every pair of logicals assignable.
    pub fn identity(n: usize) -> Self {
        let assignment = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| ((i, j), (i, j))))
            .collect();
        Embedding::new(
            (0..n).map(|i| vec![i]).collect(),
            vec![Vec::new(); n],
            assignment,
            None,
        )
        .expect("identity embedding is valid")
    }

    pub fn num_logical(&self) -> usize {
        self.chains.len()
    }

    pub fn num_physical(&self) -> usize {
        self.num_physical
    }

    pub fn chains(&self) -> &[Vec<usize>] {
        &self.chains
    }

    pub fn chain_edges(&self) -> &[Vec<(usize, usize)>] {
        &self.chain_edges
    }

    pub fn assignment(&self) -> &BTreeMap<(usize, usize), (usize, usize)> {
        &self.assignment
    }

    pub fn total_chain_edges(&self) -> usize {
        self.chain_edges.iter().map(Vec::len).sum()
    }

    /// Physical configuration with every qubit of chain `i` set to `σᵢ`.
    pub fn chain_extend(&self, logical: SpinConfig) -> SpinConfig {
        let mut bits = 0u128;
        for (i, chain) in self.chains.iter().enumerate() {
            if logical.is_up(i) {
                for &q in chain {
                    bits |= 1 << q;
                }
            }
        }
        SpinConfig(bits)
    }

    /// Logical indices whose chain is not uniformly aligned.
    pub fn broken_chains(&self, physical: SpinConfig) -> Vec<usize> {
        self.chains
            .iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|&q| physical.is_up(q) != physical.is_up(c[0])))
            .map(|(i, _)| i)
            .collect()
    }

    /// Logical configuration of an unbroken physical state.
    pub fn decode(&self, physical: SpinConfig) -> Option<SpinConfig> {
        if !self.broken_chains(physical).is_empty() {
            return None;
        }
        let mut bits = 0u128;
        for (i, chain) in self.chains.iter().enumerate() {
            if physical.is_up(chain[0]) {
                bits |= 1 << i;
            }
        }
        Some(SpinConfig(bits))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: EmbeddingFile = serde_json::from_str(text).map_err(|e| Error::Schema {
            field: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        file.into_embedding()
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
        let key = |i: usize| i.to_string();
        let file = EmbeddingFile {
            chains: self
                .chains
                .iter()
                .enumerate()
                .map(|(i, c)| (key(i), c.clone()))
                .collect(),
            chain_edges: self
                .chain_edges
                .iter()
                .enumerate()
                .map(|(i, e)| (key(i), e.iter().map(|&(a, b)| [a, b]).collect()))
                .collect(),
            assignment: self
                .assignment
                .iter()
                .map(|(&(i, j), &(a, b))| (format!("{i},{j}"), [a, b]))
                .collect(),
            field_split: Some(
                self.field_split
                    .iter()
                    .enumerate()
                    .map(|(i, w)| (key(i), w.clone()))
                    .collect(),
            ),
        };
        serde_json::to_string_pretty(&file).expect("embedding serializes")
    }
}

fn spans(chain: &[usize], edges: &[(usize, usize)]) -> bool {
    let mut reached: BTreeSet<usize> = BTreeSet::from([chain[0]]);
    loop {
        let before = reached.len();
        for &(a, b) in edges {
            if reached.contains(&a) || reached.contains(&b) {
                reached.insert(a);
                reached.insert(b);
            }
        }
        if reached.len() == before {
            return reached.len() == chain.len();
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EmbeddingFile {
    chains: BTreeMap<String, Vec<usize>>,
    chain_edges: BTreeMap<String, Vec<[usize; 2]>>,
    assignment: BTreeMap<String, [usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field_split: Option<BTreeMap<String, Vec<f64>>>,
}

impl EmbeddingFile {
    fn into_embedding(self) -> Result<Embedding> {
        let index = |field: &str, k: &str| -> Result<usize> {
            k.trim()
                .parse()
                .map_err(|_| Error::schema(format!("{field}.{k}"), "expected a logical index"))
        };
        let by_index = |field: &str, keys: Vec<usize>| -> Result<()> {
            if keys.iter().copied().ne(0..keys.len()) {
                return Err(Error::schema(
                    field,
                    "keys must be the logical indices 0..n",
                ));
            }
            Ok(())
        };
        let mut chains: Vec<(usize, Vec<usize>)> = Vec::new();
        for (k, v) in self.chains {
            chains.push((index("chains", &k)?, v));
        }
        chains.sort_by_key(|(i, _)| *i);
        by_index("chains", chains.iter().map(|(i, _)| *i).collect())?;
        let n = chains.len();

        let mut edges = vec![Vec::new(); n];
        for (k, v) in self.chain_edges {
            let i = index("chain_edges", &k)?;
            if i >= n {
                return Err(Error::schema(format!("chain_edges.{k}"), "no such chain"));
            }
            edges[i] = v.into_iter().map(|[a, b]| (a, b)).collect();
        }
        let mut assignment = BTreeMap::new();
        for (k, [a, b]) in self.assignment {
            let (i, j) = k
                .split_once(',')
                .ok_or_else(|| Error::schema(format!("assignment.{k}"), "expected key \"i,j\""))?;
            assignment.insert((index("assignment", i)?, index("assignment", j)?), (a, b));
        }
        let split = match self.field_split {
            None => None,
            Some(map) => {
                let mut w: Vec<Option<Vec<f64>>> = vec![None; n];
                for (k, v) in map {
                    let i = index("field_split", &k)?;
                    if i >= n {
                        return Err(Error::schema(format!("field_split.{k}"), "no such chain"));
                    }
                    w[i] = Some(v);
                }
                Some(
                    w.into_iter()
                        .zip(&chains)
                        .map(|(w, (_, c))| {
                            w.unwrap_or_else(|| {
                                let mut d = vec![0.0; c.len()];
                                d[0] = 1.0;
                                d
                            })
                        })
                        .collect(),
                )
            }
        };
        Embedding::new(
            chains.into_iter().map(|(_, c)| c).collect(),
            edges,
            assignment,
            split,
        )
    }
}

/// Physical model with the chain strength left as the parameter `J_F`
/// (each chain edge carries `−J_F σₐσ_b`).
pub fn embed_template(model: &IsingModel, emb: &Embedding) -> Result<IsingModel> {
    if model.num_spins() != emb.num_logical() {
        return Err(Error::Embedding(format!(
            "model has {} spins, embedding {} chains",
            model.num_spins(),
            emb.num_logical()
        )));
    }
    if model.max_order() > 2 {
        return Err(Error::Embedding(
            "only models with at most pairwise terms can be embedded".into(),
        ));
    }
    let mut raw: Vec<(Vec<usize>, Coeff)> = Vec::new();
    for term in model.terms() {
        match *term.spins.as_slice() {
            [i] => {
                for (&q, &w) in emb.chains[i].iter().zip(&emb.field_split[i]) {
                    if w != 0.0 {
                        raw.push((vec![q], term.coeff.scaled(w)));
                    }
                }
            }
            [i, j] => {
                let &(a, b) = emb.assignment.get(&(i, j)).ok_or_else(|| {
                    Error::Embedding(format!(
                        "no physical edge assigned to logical edge ({i},{j})"
                    ))
                })?;
                raw.push((vec![a, b], term.coeff.clone()));
            }
            _ => unreachable!("max_order checked"),
        }
    }
    for edges in &emb.chain_edges {
        for &(a, b) in edges {
            raw.push((vec![a, b], Coeff::param(CHAIN_STRENGTH_PARAM, -1.0)));
        }
    }
    Ok(IsingModel::new(emb.num_physical(), raw, model.offset())?
        .with_params(model.params().clone()))
}

/// Physical model at chain strength `j_f > 0`.
pub fn embed(model: &IsingModel, emb: &Embedding, j_f: f64) -> Result<IsingModel> {
    if !(j_f > 0.0 && j_f.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "chain strength must be > 0, got {j_f}"
        )));
    }
    let mut bindings = BTreeMap::new();
    bindings.insert(CHAIN_STRENGTH_PARAM.to_string(), j_f);
    embed_template(model, emb)?.substitute(&bindings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EltipRule {
    /// Exchanges, for every other spin `j`, the coefficient of `σⱼ` with that
    /// of `σⱼσ_k`. This is the change of variables `τⱼ = σⱼσ_k`, so the
    /// spectrum is unchanged and ground states map one-to-one.
    #[default]
    Gauge,
    /// Swaps `h_k` with the common value of the couplings incident on `k`.
    /// Refuses spins without a field or with unequal incident couplings.
    FieldSwap,
}

impl std::str::FromStr for EltipRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauge" => Ok(EltipRule::Gauge),
            "field-swap" => Ok(EltipRule::FieldSwap),
            _ => Err(Error::InvalidArgument(format!(
                "ELTIP rule must be gauge or field-swap, got {s:?}"
            ))),
        }
    }
}

pub fn eltip(model: &IsingModel, k: usize, rule: EltipRule) -> Result<IsingModel> {
    let n = model.num_spins();
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "spin {k} out of range 0..{n}"
        )));
    }
    match rule {
        EltipRule::Gauge => eltip_gauge(model, k),
        EltipRule::FieldSwap => eltip_field_swap(model, k),
    }
}

fn eltip_gauge(model: &IsingModel, k: usize) -> Result<IsingModel> {
    if model.max_order() > 2 {
        return Err(Error::UnsupportedTransform(
            "ELTIP is defined for models with at most pairwise terms".into(),
        ));
    }
    // σ_S ↦ τ_{S \ {k}} · τ_k^{|S|}: k is in the image support iff |S| is odd.
    let raw = model.terms().iter().map(|t| {
        let mut spins: Vec<usize> = t.spins.iter().copied().filter(|&i| i != k).collect();
        if t.spins.len() % 2 == 1 {
            spins.push(k);
            spins.sort_unstable();
        }
        (spins, t.coeff.clone())
    });
    Ok(
        IsingModel::new(model.num_spins(), raw, model.offset())?
            .with_params(model.params().clone()),
    )
}

fn eltip_field_swap(model: &IsingModel, k: usize) -> Result<IsingModel> {
    let unsupported = |m: String| Err(Error::UnsupportedTransform(m));
    let mut field = None;
    let mut couplings = Vec::new();
    for t in model.terms() {
        if !t.spins.contains(&k) {
            continue;
        }
        match t.spins.len() {
            1 => field = Some(t.coeff.clone()),
            2 => couplings.push(t.spins.clone()),
            _ => return unsupported(format!("spin {k} takes part in a higher-order term")),
        }
    }
    let Some(h) = field else {
        return unsupported(format!("spin {k} has no local-field term to exchange"));
    };
    if couplings.is_empty() {
        return unsupported(format!("spin {k} has no couplings to exchange"));
    }
    let coeff_of = |spins: &[usize]| {
        model
            .terms()
            .iter()
            .find(|t| t.spins == spins)
            .map(|t| t.coeff.clone())
            .expect("term present")
    };
    let j = coeff_of(&couplings[0]);
    if couplings.iter().any(|c| coeff_of(c) != j) {
        return unsupported(format!(
            "couplings incident on spin {k} are unequal; the exchange is under-determined"
        ));
    }
    let raw = model.terms().iter().map(|t| {
        let coeff = if t.spins == [k] {
            j.clone()
        } else if t.spins.len() == 2 && t.spins.contains(&k) {
            h.clone()
        } else {
            t.coeff.clone()
        };
        (t.spins.clone(), coeff)
    });
    Ok(
        IsingModel::new(model.num_spins(), raw, model.offset())?
            .with_params(model.params().clone()),
    )
}

/// Image of a configuration under the gauge ELTIP at spin `k`
/// (`τⱼ = σⱼσ_k` for `j ≠ k`); an involution.
pub fn eltip_state_map(s: SpinConfig, k: usize, num_spins: usize) -> SpinConfig {
    if s.is_up(k) {
        s
    } else {
        SpinConfig(s.bits() ^ (full_mask(num_spins) & !(1u128 << k)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::groundset::GroundManifold;
    use crate::perturb::{self, OrderPolicy};
    use crate::{metrics, DriverSpec};

    fn toy_chain_embedding() -> (IsingModel, Embedding) {
        // Logical spin 1 becomes the chain [1, 2]; its field stays on qubit 1
        // while the coupling to spin 0 lands on qubit 2.
        let model =
            IsingModel::from_terms(2, &[(&[0], -3.0), (&[1], 2.0), (&[0, 1], -1.0)], 0.0).unwrap();
        let emb = Embedding::new(
            vec![vec![0], vec![1, 2]],
            vec![vec![], vec![(1, 2)]],
            BTreeMap::from([((0, 1), (0, 2))]),
            None,
        )
        .unwrap();
        (model, emb)
    }

    #[test]
    fn chain_terms_carry_minus_jf() {
        let (model, emb) = toy_chain_embedding();
        let phys = embed(&model, &emb, 1.5).unwrap();
        assert_eq!(phys.coefficient(&[1, 2]), Some(-1.5));
        assert_eq!(phys.coefficient(&[0, 2]), Some(-1.0));
        assert_eq!(phys.coefficient(&[1]), Some(2.0));
        let template = embed_template(&model, &emb).unwrap();
        let json: serde_json::Value = template.to_json_value().unwrap();
        let coeffs: Vec<String> = json["terms"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t["coeff"].to_string())
            .collect();
        assert!(coeffs.contains(&"\"-$J_F\"".to_string()));
    }

    #[test]
    fn identity_embedding_is_a_no_op() {
        let model = fixtures::matsuda();
        let phys = embed(&model, &Embedding::identity(5), 1.0).unwrap();
        assert_eq!(phys, model);
    }

    #[test]
    fn weak_chains_break() {
        let (model, emb) = toy_chain_embedding();
        let weak = GroundManifold::enumerate(&embed(&model, &emb, 0.5).unwrap(), None).unwrap();
        assert!(weak
            .states()
            .iter()
            .any(|&s| !emb.broken_chains(s).is_empty()));
        let strong = GroundManifold::enumerate(&embed(&model, &emb, 2.0).unwrap(), None).unwrap();
        assert!(strong
            .states()
            .iter()
            .all(|&s| emb.broken_chains(s).is_empty()));
        let logical = GroundManifold::enumerate(&model, None).unwrap();
        let images: Vec<SpinConfig> = logical
            .states()
            .iter()
            .map(|&s| emb.chain_extend(s))
            .collect();
        assert_eq!(strong.states(), images.as_slice());
    }

    #[test]
    fn energies_shift_by_chain_edges() {
        let model = fixtures::matsuda();
        let emb = fixtures::matsuda_embedding();
        for j_f in [0.5, 1.0, 1.5] {
            let phys = embed(&model, &emb, j_f).unwrap();
            let shift = -j_f * emb.total_chain_edges() as f64;
            for s in 0..32u128 {
                let l = SpinConfig(s);
                let e = phys.energy(emb.chain_extend(l)).unwrap();
                assert!((e - (model.energy(l).unwrap() + shift)).abs() < 1e-12);
                assert_eq!(emb.decode(emb.chain_extend(l)), Some(l));
            }
        }
    }

    #[test]
    fn embedding_errors() {
        let model = fixtures::matsuda();
        let mut emb = Embedding::identity(5);
        emb.assignment.remove(&(1, 2));
        let err = embed(&model, &emb, 1.0).unwrap_err();
        assert!(err.to_string().contains("(1,2)"), "{err}");
        assert!(matches!(
            embed(&model, &Embedding::identity(5), 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(Embedding::new(
            vec![vec![0], vec![0]],
            vec![vec![], vec![]],
            BTreeMap::new(),
            None
        )
        .is_err());
        assert!(Embedding::new(vec![vec![0, 1]], vec![vec![]], BTreeMap::new(), None).is_err());
        assert!(Embedding::new(
            vec![vec![0], vec![2]],
            vec![vec![], vec![]],
            BTreeMap::new(),
            None
        )
        .is_err());
    }

    #[test]
    fn embedding_json_round_trip() {
        let emb = fixtures::matsuda_embedding();
        assert_eq!(
            Embedding::from_json_str(&emb.to_json_string()).unwrap(),
            emb
        );
        let text = r#"{"chains": {"0": [0], "1": [1, 2]}, "chain_edges": {"1": [[1, 2]]},
                       "assignment": {"0,1": [0, 2]}}"#;
        assert_eq!(
            Embedding::from_json_str(text).unwrap(),
            toy_chain_embedding().1
        );
    }

    #[test]
    fn field_swap_involution_and_refusals() {
        let toy = IsingModel::from_terms(
            3,
            &[(&[0], 0.5), (&[0, 1], -1.0), (&[0, 2], -1.0), (&[1], 0.2)],
            0.0,
        )
        .unwrap();
        let once = eltip(&toy, 0, EltipRule::FieldSwap).unwrap();
        assert_eq!(once.coefficient(&[0]), Some(-1.0));
        assert_eq!(once.coefficient(&[0, 2]), Some(0.5));
        assert_eq!(eltip(&once, 0, EltipRule::FieldSwap).unwrap(), toy);
        assert_eq!(once.terms().len(), toy.terms().len());

        let matsuda = fixtures::matsuda();
        for k in [0, 4] {
            let err = eltip(&matsuda, k, EltipRule::FieldSwap).unwrap_err();
            assert!(matches!(err, Error::UnsupportedTransform(_)));
        }
        let unequal =
            IsingModel::from_terms(3, &[(&[0], 0.5), (&[0, 1], -1.0), (&[0, 2], 1.0)], 0.0)
                .unwrap();
        assert!(matches!(
            eltip(&unequal, 0, EltipRule::FieldSwap),
            Err(Error::UnsupportedTransform(_))
        ));
    }

    #[test]
    fn gauge_preserves_spectrum() {
        let model = IsingModel::from_terms(
            4,
            &[
                (&[0], 0.3),
                (&[1], -1.0),
                (&[0, 1], 0.7),
                (&[1, 2], -1.1),
                (&[2, 3], 0.4),
                (&[0, 3], 1.0),
            ],
            0.25,
        )
        .unwrap();
        for k in 0..4 {
            let t = eltip(&model, k, EltipRule::Gauge).unwrap();
            assert_eq!(t.num_spins(), 4);
            for s in 0..16u128 {
                let s = SpinConfig(s);
                let img = eltip_state_map(s, k, 4);
                assert!((t.energy(img).unwrap() - model.energy(s).unwrap()).abs() < 1e-12);
                assert_eq!(eltip_state_map(img, k, 4), s);
            }
            assert_eq!(eltip(&t, k, EltipRule::Gauge).unwrap(), model);
        }
    }

    #[test]
    fn matsuda_outer_spin_gauge() {
        let model = eltip(&fixtures::matsuda(), 0, EltipRule::Gauge).unwrap();
        let g = GroundManifold::enumerate(&model, None).unwrap();
        let graph = perturb::resolve(
            &model,
            &g,
            &DriverSpec::transverse_field(5).unwrap(),
            OrderPolicy::Auto,
        )
        .unwrap();
        let r = metrics::predicted_probabilities(&graph).unwrap();
        let mut sizes: Vec<usize> = r.components.iter().map(|c| c.states.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 4]);
        let surv = r.surviving_components();
        assert_eq!(surv.len(), 1);
        assert_eq!(surv[0].states.len(), 4);
        for s in &r.states {
            let expect = if surv[0].states.contains(&s.state) {
                0.25
            } else {
                0.0
            };
            assert!((s.p - expect).abs() < 1e-12);
        }
    }
}
