use std::collections::BTreeMap;
use std::path::PathBuf;

use solgraph::fixtures;
use solgraph::transforms::Embedding;
use solgraph::{DriverSpec, IsingModel};

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn energies(m: &IsingModel) -> Vec<f64> {
    m.compile().unwrap().diagonal()
}

#[test]
fn model_files_match_builtin_fixtures() {
    for (file, model) in [
        ("chain4.json", fixtures::chain(4)),
        ("toy.json", fixtures::three_state_toy()),
        ("matsuda.json", fixtures::matsuda()),
    ] {
        let loaded = IsingModel::load(path(file)).unwrap();
        let (a, b) = (energies(&loaded), energies(&model));
        assert!(
            a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12),
            "{file}"
        );
    }
}

#[test]
fn triangle_file_is_the_template() {
    let t = IsingModel::load(path("triangle.json")).unwrap();
    assert!(!t.is_resolved());
    assert_eq!(t.param_names().into_iter().collect::<Vec<_>>(), ["b"]);
    for b in [0.5, 1.0, 1.5] {
        let m = t
            .substitute(&BTreeMap::from([("b".to_string(), b)]))
            .unwrap();
        assert_eq!(energies(&m), energies(&fixtures::triangle(b)));
    }
    assert_eq!(
        energies(&t.resolve().unwrap()),
        energies(&fixtures::triangle(1.0))
    );
}

#[test]
fn embedding_file_matches() {
    let e = Embedding::load(path("matsuda_embedding.json")).unwrap();
    let f = fixtures::matsuda_embedding();
    assert_eq!(e.chains(), f.chains());
    assert_eq!(e.chain_edges(), f.chain_edges());
    assert_eq!(e.assignment(), f.assignment());
    assert_eq!(
        Embedding::from_json_str(&f.to_json_string())
            .unwrap()
            .assignment(),
        f.assignment()
    );
}

#[test]
fn partial_driver_file_matches() {
    let d = DriverSpec::load(path("matsuda_partial_driver.json")).unwrap();
    let want = DriverSpec::transverse_field(5)
        .unwrap()
        .combined(&fixtures::matsuda_partial_pairs())
        .unwrap();
    assert_eq!(d.xterms(), want.xterms());
}

#[test]
fn model_json_round_trip() {
    for m in [fixtures::matsuda(), fixtures::triangle_template()] {
        let back = IsingModel::from_json_str(&m.to_json_string().unwrap()).unwrap();
        assert_eq!(back.param_names(), m.param_names());
        assert_eq!(
            energies(&back.resolve().unwrap()),
            energies(&m.resolve().unwrap())
        );
    }
}
