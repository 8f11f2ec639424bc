use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use current_lab::harness::{run_experiment, ExperimentConfig, Suite, Verdict};
use current_lab::vrjp::parse_order;
use current_lab::{LabError, Network};

/// Exact and Monte Carlo checks of Ising / random-current / FK / GFF /
/// loop-soup couplings on small networks.
#[derive(Debug, Parser)]
#[command(name = "current-lab", version)]
struct Cli {
    /// verify-coupling, gff-check, loopsoup-check, vrjp-check,
    /// reconstruct-check or full
    suite: String,
    /// Network JSON file (required unless the config names one).
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Comma-separated VRJP vertex order.
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Longest loop kept in the loop soup.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Output directory for report.json and the CSV tables.
    #[arg(long, default_value = "current-lab-out")]
    out: PathBuf,
    /// JSON experiment config; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (overrides CURRENT_LAB_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, LabError> {
    let suite: Suite = cli.suite.parse()?;
    let mut cfg = match &cli.config {
        Some(path) => {
            let mut c = ExperimentConfig::load(path)?;
            c.suite = suite;
            c
        }
        None => {
            let network = cli.network.clone().ok_or_else(|| LabError::Validation {
                field: "network".into(),
                message: "--network is required without --config".into(),
            })?;
            ExperimentConfig::new(network, suite)
        }
    };
    if let Some(n) = &cli.network {
        cfg.network = n.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = cli.replicas {
        cfg.replicas = r;
    }
    if let Some(a) = cli.alpha {
        cfg.alpha = a;
    }
    if let Some(l) = cli.cutoff {
        cfg.cutoff = l;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.order {
        let net = Network::load(&cfg.network)?;
        cfg.order = Some(parse_order(o, net.vertex_count())?);
    }
    cfg.out = Some(cli.out.clone());
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build_config(&cli).and_then(|cfg| run_experiment(&cfg));
    match result {
        Ok(outcome) => {
            let r = &outcome.report;
            for c in &r.checks {
                let verdict = match c.verdict {
                    Verdict::Pass => "PASS",
                    Verdict::Fail => "FAIL",
                    Verdict::Skipped => "SKIP",
                };
                let stat = c.statistic.map_or("-".to_string(), |s| format!("{s:.3e}"));
                let tol = c.tolerance.map_or("-".to_string(), |t| format!("{t:.3e}"));
                println!("{verdict} {:<28} {stat} <= {tol}", c.name);
            }
            println!("{}: {}", r.suite, if r.passed() { "pass" } else { "FAIL" });
            if r.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
