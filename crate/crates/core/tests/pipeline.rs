use current_lab::exact::{exact_measure, FiniteDistribution, ModelKind};
use current_lab::harness::{run_on, ExperimentConfig, Suite, Verdict};
use current_lab::loopsoup::{magnitudes, LoopCatalog};
use current_lab::sampling::SeedSpec;
use current_lab::vrjp::{Vrjp, VrjpParams};
use current_lab::{LabError, Network, NetworkSpec, Pinning};
use proptest::prelude::*;

fn single_edge() -> Network {
    Network::from_json(r#"{"vertices": 2, "edges": [[0, 1]], "beta": [1.0], "pinning": {"vertex": 0, "conductance": 2.0}}"#)
        .unwrap()
}

/// Given the occupation field, crossings of the single edge should follow
/// the current law with weight β u_0 u_1. Per occupation cell, compare the
/// crossing frequency with the mixture 1 − mean(1/cosh β^u) and check that it
/// sits closer to it than to the unconditioned 1 − 1/cosh β.
#[test]
fn crossings_given_occupation_follow_reweighted_current() {
    let net = single_edge();
    let cat = LoopCatalog::new(&net, 24).unwrap();
    let seed = SeedSpec::new(31, 0);
    let edges = [0.0, 0.25, 0.5, 1.0, 2.0, f64::INFINITY];
    let mut cells = vec![(0usize, 0usize, 0.0f64); edges.len() - 1];
    for i in 0..60_000 {
        let f = cat.sample(0.5, &mut seed.replica(i).rng()).unwrap().fields();
        let u = magnitudes(&f.occupation);
        let bu = u[0] * u[1];
        let k = edges.windows(2).position(|w| bu >= w[0] && bu < w[1]).unwrap();
        cells[k].0 += 1;
        cells[k].1 += (f.crossings.0[0] > 0) as usize;
        cells[k].2 += 1.0 - 1.0 / bu.cosh();
    }
    let plain = 1.0 - 1.0 / 1f64.cosh();
    for (k, &(n, hits, pred)) in cells.iter().enumerate() {
        assert!(n > 1000, "cell {k} has {n} samples");
        let (obs, pred) = (hits as f64 / n as f64, pred / n as f64);
        let se = (pred * (1.0 - pred) / n as f64).sqrt().max(1e-9);
        assert!((obs - pred).abs() < 3.5 * se, "cell {k}: {obs} vs {pred}");
        if (pred - plain).abs() > 6.0 * se {
            assert!((obs - pred).abs() < (obs - plain).abs(), "cell {k}");
        }
    }
}

#[test]
fn distribution_dump_round_trip() {
    let tri = Network::from_json(r#"{"vertices": 3, "edges": [[0,1],[1,2],[2,0]], "beta": [0.5, 0.7, 0.2]}"#).unwrap();
    for kind in [ModelKind::Ising, ModelKind::Fk, ModelKind::CurrentParity, ModelKind::CurrentTrace] {
        let d = exact_measure(&tri, kind).unwrap();
        let back = FiniteDistribution::read_dump(d.dump_string().as_bytes()).unwrap();
        assert_eq!(back.space(), d.space());
        for (a, b) in back.probs().iter().zip(d.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn network_file_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"vertices": 2, "edges": [[0, 1]], "beta": [-1.0]}"#).unwrap();
    let e = Network::load(&path).unwrap_err();
    assert!(e.is_input_error());
    let msg = e.to_string();
    assert!(msg.contains("bad.json") && msg.contains("beta[0]"), "{msg}");
    assert!(matches!(Network::load(dir.path().join("missing.json")), Err(LabError::Io { .. })));
}

#[test]
fn report_lists_defaults_and_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new("n.json", Suite::VerifyCoupling);
    cfg.replicas = 500;
    cfg.threads = Some(2);
    let out = run_on(&cfg, &single_edge()).unwrap();
    assert!(out.report.passed());
    out.write(dir.path()).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["tolerances"]["tv_exact"], 1e-12);
    assert_eq!(json["config"]["cutoff"], 24);
    assert_eq!(json["environment"]["threads"], 2);
    assert!(dir.path().join("coupling.csv").exists());
    assert_eq!(out.report.check("coupling_tv").unwrap().verdict, Verdict::Pass);
}

#[test]
fn unpinned_network_gets_default_pinning() {
    let net = Network::from_json(r#"{"vertices": 2, "edges": [[0, 1]], "beta": [1.0]}"#).unwrap();
    let mut cfg = ExperimentConfig::new("n.json", Suite::GffCheck);
    cfg.replicas = 2000;
    let out = run_on(&cfg, &net).unwrap();
    assert!(out.report.default_pinning_applied);
    let zero = net.with_pinning(Some(Pinning { vertex: 0, conductance: 0.0 })).unwrap();
    assert!(matches!(run_on(&cfg, &zero), Err(LabError::Unpinned)));
}

fn small_network() -> impl Strategy<Value = Network> {
    (2usize..=5)
        .prop_flat_map(|n| {
            let edge = (0..n, 0..n);
            (Just(n), prop::collection::vec((edge, 0.05f64..1.5), n - 1..=8))
        })
        .prop_filter_map("connected", |(n, es)| {
            let mut edges: Vec<[usize; 2]> = (1..n).map(|x| [x - 1, x]).collect();
            let mut beta = vec![0.7; n - 1];
            for ((u, v), b) in es {
                edges.push([u, v]);
                beta.push(b);
            }
            Network::build(&NetworkSpec {
                vertices: n,
                edges,
                beta,
                pinning: Some(Pinning { vertex: n - 1, conductance: 1.5 }),
            })
            .ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn soup_crossings_always_sourceless(net in small_network(), seed in any::<u64>()) {
        let cat = LoopCatalog::new(&net, 30).unwrap();
        let mut rng = SeedSpec::new(seed, 0).rng();
        for _ in 0..20 {
            let f = cat.sample(0.5, &mut rng).unwrap().fields();
            prop_assert!(f.crossings.is_sourceless(&net).unwrap());
            prop_assert!(f.occupation.iter().all(|&l| l >= 0.0));
        }
    }

    #[test]
    fn vrjp_output_always_sourceless(net in small_network(), seed in any::<u64>()) {
        let v = Vrjp::new(&net, VrjpParams::default()).unwrap();
        let order: Vec<usize> = (0..net.vertex_count()).rev().collect();
        let mut rng = SeedSpec::new(seed, 1).rng();
        for _ in 0..10 {
            prop_assert!(v.run(&order, &mut rng).unwrap().is_sourceless(&net).unwrap());
        }
    }
}
