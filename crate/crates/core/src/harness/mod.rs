//! Experiment configs, the verification suites and report emission.

mod config;
mod report;
mod suites;

use std::time::Instant;

pub use config::{ExperimentConfig, Suite, Tolerances, THREADS_ENV};
pub use report::{CheckKind, CheckRecord, Environment, ExperimentReport, Outcome, Table, Timing, Verdict};

use crate::error::{LabError, Result};
use crate::gff::DEFAULT_PINNING_CONDUCTANCE;
use crate::graph::{Network, Pinning};

use report::finalize;
use suites::Ctx;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Group {
    Coupling,
    TraceReconstruction,
    Gff,
    Soup,
    SoupReconstruction,
    Vrjp,
}

impl Group {
    fn name(self) -> &'static str {
        match self {
            Group::Coupling => "coupling",
            Group::TraceReconstruction => "trace-reconstruction",
            Group::Gff => "gff",
            Group::Soup => "loopsoup",
            Group::SoupReconstruction => "soup-reconstruction",
            Group::Vrjp => "vrjp",
        }
    }
}

fn groups(suite: Suite) -> &'static [Group] {
    match suite {
        // Coupling already includes the trace reconstruction.
        Suite::VerifyCoupling => &[Group::Coupling],
        Suite::GffCheck => &[Group::Gff],
        Suite::LoopsoupCheck => &[Group::Soup, Group::SoupReconstruction],
        Suite::VrjpCheck => &[Group::Vrjp],
        Suite::ReconstructCheck => &[Group::TraceReconstruction, Group::SoupReconstruction],
        Suite::Full => &[
            Group::Coupling,
            Group::Gff,
            Group::Soup,
            Group::SoupReconstruction,
            Group::Vrjp,
        ],
    }
}

/// Runs a suite on an already-loaded network.
pub fn run_on(cfg: &ExperimentConfig, net: &Network) -> Result<Outcome> {
    cfg.validate()?;
    let threads = cfg.resolved_threads()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::validation("threads", e.to_string()))?;
    let default_pinning = net.pinning().is_none();
    let pinned = if default_pinning {
        net.with_pinning(Some(Pinning {
            vertex: 0,
            conductance: DEFAULT_PINNING_CONDUCTANCE,
        }))?
    } else {
        net.clone()
    };
    let mut ctx = Ctx {
        cfg,
        net,
        pinned: &pinned,
        pending: Vec::new(),
        tables: Vec::new(),
    };
    let mut timings = Vec::new();
    pool.install(|| -> Result<()> {
        for &g in groups(cfg.suite) {
            let start = Instant::now();
            match g {
                Group::Coupling => suites::coupling(&mut ctx)?,
                Group::TraceReconstruction => suites::trace_reconstruction(&mut ctx)?,
                Group::Gff => suites::gff(&mut ctx)?,
                Group::Soup => suites::loopsoup(&mut ctx)?,
                Group::SoupReconstruction => suites::soup_reconstruction(&mut ctx)?,
                Group::Vrjp => suites::vrjp(&mut ctx)?,
            }
            timings.push(Timing {
                stage: g.name().into(),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        Ok(())
    })?;
    let Ctx { pending, tables, .. } = ctx;
    let (checks, family) = finalize(pending, cfg.tolerances.sigma_level);
    let verdict = if checks.iter().any(|c| c.verdict == Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    let mut resolved = cfg.clone();
    resolved.threads = Some(threads);
    Ok(Outcome {
        report: ExperimentReport {
            suite: cfg.suite.name().into(),
            verdict,
            config: resolved,
            network: net.to_spec(),
            default_pinning_applied: default_pinning,
            environment: Environment {
                seed: cfg.seed,
                threads,
                version: env!("CARGO_PKG_VERSION"),
            },
            statistical_family: family,
            checks,
            timings,
        },
        tables,
    })
}

/// Loads the network named in the config, runs the suite and, if `out` is
/// set, writes the report and tables there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let net = Network::load(&cfg.network)?;
    let outcome = run_on(cfg, &net)?;
    if let Some(dir) = &cfg.out {
        outcome.write(dir)?;
    }
    Ok(outcome)
}
