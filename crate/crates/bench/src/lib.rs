//! Reproduction harness for the manufactured-recovery, Duffing and battery
//! experiments.
//!
//! Every replicate is seeded from the master seed by
//! [`replicate_seed`], so results never depend on scheduling.

pub mod config;
pub mod experiments;
pub mod table;

use chaosamp::seed::{derive_seed, label_tag};

pub use config::{CandidateRule, DuffingMode, ExperimentConfig, ExperimentKind, FamilyChoice, SizeGrid};
pub use experiments::{battery_pdf, run, run_battery, run_duffing, run_recovery, PdfReport, RunOutput};
pub use table::{GroupSummary, ResultRow, ResultTable};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] chaosamp::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Describes the seed-splitting rule in output headers.
pub const SEED_RULE: &str =
    "seed rule: splitmix64 fold of (master, fnv1a(experiment), fnv1a(strategy), N, replicate)";

/// Seed of one (experiment, strategy, N, replicate) cell.
pub fn replicate_seed(master: u64, experiment: &str, strategy: &str, n: usize, replicate: usize) -> u64 {
    derive_seed(
        master,
        &[label_tag(experiment), label_tag(strategy), n as u64, replicate as u64],
    )
}

/// Seed for a named auxiliary stream (validation points, model draws, ...).
pub fn stream_seed(master: u64, experiment: &str, stream: &str, index: u64) -> u64 {
    derive_seed(master, &[label_tag(experiment), label_tag(stream), index])
}

/// Two-sample Kolmogorov–Smirnov distance `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
