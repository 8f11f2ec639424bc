//! Replays the checked-in fuzz corpus through the parsers on stable.

use std::path::PathBuf;

use current_lab::exact::{FiniteDistribution, Space};
use current_lab::harness::ExperimentConfig;
use current_lab::vrjp::parse_order;
use current_lab::Network;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn network_seeds() {
    let mut valid = 0;
    for (name, data) in seeds("network_json") {
        if let Ok(net) = Network::from_json(std::str::from_utf8(&data).unwrap()) {
            assert_eq!(Network::from_json(&net.to_json()).unwrap().to_spec(), net.to_spec(), "{name}");
            valid += 1;
        }
    }
    assert!(valid >= 4);
}

#[test]
fn config_seeds() {
    let ok: Vec<bool> = seeds("experiment_config")
        .iter()
        .map(|(_, d)| ExperimentConfig::from_json(std::str::from_utf8(d).unwrap()).is_ok())
        .collect();
    assert!(ok.contains(&true) && ok.contains(&false));
}

#[test]
fn order_seeds() {
    for (name, data) in seeds("vertex_order") {
        let n = data[0] as usize % 16;
        let parsed = parse_order(std::str::from_utf8(&data[1..]).unwrap(), n);
        assert_eq!(parsed.is_ok(), name == "three" || name == "spaces", "{name}");
    }
}

#[test]
fn dump_seeds() {
    for (name, data) in seeds("distribution_dump") {
        match FiniteDistribution::read_dump(data.as_slice()) {
            Ok(d) => assert_eq!(FiniteDistribution::read_dump(d.dump_string().as_bytes()).unwrap().len(), d.len()),
            Err(_) => assert_eq!(name, "out_of_order.csv"),
        }
    }
}

#[test]
fn config_string_seeds() {
    for (name, data) in seeds("config_string") {
        let dims = data[1] as usize % 12;
        let space = match data[0] % 3 {
            0 => Space::spins(dims),
            1 => Space::edges(dims),
            _ => Space::parity(dims),
        };
        let text = std::str::from_utf8(&data[2..]).unwrap();
        match space.parse_config(text) {
            Ok(i) => assert_eq!(space.config_string(i), text),
            Err(_) => assert_eq!(name, "bad"),
        }
    }
}
