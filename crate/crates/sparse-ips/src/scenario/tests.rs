use super::*;

fn small_spec() -> ScenarioSpec {
    ScenarioSpec {
        name: "unit".into(),
        graph: GraphSpec::RegularTree { kappa: 3, depth: 2 },
        model: ModelSpec::Voter,
        init: InitSpec::Bernoulli { p: 0.3 },
        horizon: 1.0,
        dt: 0.25,
        replicas: 2_000,
        methods: vec![Method::Direct, Method::Meanfield, Method::LocaleqOde],
        agreement_k: Some(2),
        seed: Some(42),
        mc_max_iters: None,
        mc_tol: None,
    }
}

#[test]
fn toml_roundtrip_and_unknown_keys_rejected() {
    let text = r#"
name = "t"
model = "voter"
horizon = 2.0
dt = 0.5
replicas = 100
methods = ["direct"]

[graph.regular_tree]
kappa = 3
depth = 2

[init.bernoulli]
p = 0.3
"#;
    let spec = ScenarioSpec::from_toml(text).unwrap();
    assert_eq!(spec.name, "t");
    assert!(matches!(spec.model, ModelSpec::Voter));

    let bad = format!("{text}\nunknown_key = 1\n");
    assert!(ScenarioSpec::from_toml(&bad).is_err());

    let bad_graph = text.replace("depth = 2", "depth = 2\nextra = 1");
    assert!(ScenarioSpec::from_toml(&bad_graph).is_err());
}

#[test]
fn validation_catches_bad_fields() {
    let mut s = small_spec();
    s.horizon = -1.0;
    assert!(s.validate().is_err());
    let mut s = small_spec();
    s.dt = 2.0;
    assert!(s.validate().is_err());
    let mut s = small_spec();
    s.replicas = 0;
    assert!(s.validate().is_err());
    let mut s = small_spec();
    s.methods.clear();
    assert!(s.validate().is_err());
    assert!(InitSpec::Bernoulli { p: 1.5 }.marginal(2).is_err());
    assert!(InitSpec::Product {
        probs: vec![0.5, 0.6]
    }
    .marginal(2)
    .is_err());
    assert!(ModelSpec::Contact { lambda: -1.0 }.build().is_err());
}

#[test]
fn builtin_scenarios_exist() {
    let fig2 = builtin_scenario("fig2").unwrap();
    assert_eq!(fig2.methods, vec![Method::Direct, Method::Meanfield]);
    assert_eq!(fig2.replicas, 100_000);
    let fig4 = builtin_scenario("fig4").unwrap();
    assert!(fig4.methods.contains(&Method::LocaleqOde));
    assert!(builtin_scenario("fig9").is_none());
}

#[test]
fn scenario_run_writes_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec();
    let out = run_scenario(&spec, dir.path(), None).unwrap();
    assert_eq!(out.curves.len(), 3);
    for f in &out.files {
        assert!(f.exists(), "{f:?}");
    }
    // agreement at t=0 equals the binomial value for mean-field and ODE
    for (method, curve) in &out.curves {
        if matches!(method, Method::Meanfield | Method::LocaleqOde) {
            assert!((curve.mean[0] - 0.3654).abs() <= 1e-9, "{method:?}");
        }
    }
    // byte-identical rerun at a different thread count
    let dir2 = tempfile::tempdir().unwrap();
    with_threads(Some(2), || run_scenario(&spec, dir2.path(), None))
        .unwrap()
        .unwrap();
    for f in &out.files {
        let name = f.file_name().unwrap();
        let a = fs::read(f).unwrap();
        let b = fs::read(dir2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name:?} differs between runs");
    }
}

#[test]
fn manifest_hash_verifies_and_detects_drift() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec();
    let path = write_manifest(dir.path(), "unit", 7, &spec).unwrap();
    assert!(verify_manifest(&path, &spec).unwrap());
    let mut other = spec.clone();
    other.replicas += 1;
    assert!(!verify_manifest(&path, &other).unwrap());
}

#[test]
fn randomlimit_reports_positive_dispersion() {
    let dir = tempfile::tempdir().unwrap();
    let spec = RandomLimitSpec {
        ns: vec![100, 200],
        replicas: 60,
        ..RandomLimitSpec::default()
    };
    let report = run_randomlimit(&spec, dir.path(), None).unwrap();
    assert_eq!(report.dispersion.len(), 2);
    assert!(report.dispersion.iter().all(|&d| d > 0.0));
    assert!(dir.path().join("randomlimit.csv").exists());
}

#[test]
fn hydro_near_zero_coupling_is_trivially_close() {
    // at c = 0.01 almost every vertex is isolated and frozen, so both
    // sides are essentially the Bernoulli initial law
    let dir = tempfile::tempdir().unwrap();
    let spec = HydroSpec {
        ns: vec![200],
        c: 0.01,
        graph_seeds: 4,
        replicas: 50,
        ugw_samples: 8_000,
        ugw_depth: 4,
        ..HydroSpec::default()
    };
    let report = run_hydro(&spec, dir.path(), None).unwrap();
    assert!(report.distances[0] <= 0.02, "{}", report.distances[0]);
}

#[test]
fn ugw_baseline_self_distance_is_noise() {
    let m = crate::jump::voter_model();
    let a = ugw_root_law(&m, 2.0, 5, 2000, 0.3, 1.0, 1).unwrap();
    let b = ugw_root_law(&m, 2.0, 5, 2000, 0.3, 1.0, 2).unwrap();
    let d = wasserstein_discrete(&a, &b).unwrap();
    assert!(d <= 0.04, "self-distance {d}");
}

#[test]
fn graph_spec_builders() {
    assert_eq!(
        GraphSpec::Cycle { n: 5 }.build(1, 0).unwrap().len(),
        5
    );
    assert_eq!(GraphSpec::Path { n: 4 }.build(1, 0).unwrap().edge_count(), 3);
    let g = GraphSpec::ErdosRenyiComponent { n: 50, c: 2.0 }
        .build(3, 0)
        .unwrap();
    assert!(g.is_connected());
    // same (seed, replica) ⇒ same graph; different replica ⇒ usually not
    let a = GraphSpec::ErdosRenyi { n: 30, c: 2.0 }.build(9, 0).unwrap();
    let b = GraphSpec::ErdosRenyi { n: 30, c: 2.0 }.build(9, 0).unwrap();
    assert_eq!(a.edge_count(), b.edge_count());
}
