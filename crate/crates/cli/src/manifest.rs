//! Run manifests: one JSON document per run capturing everything needed to
//! reproduce its outputs.

use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::{Cli, RunOutcome};

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    /// Fully resolved invocation (defaults included).
    config: &'a Cli,
    seed: Option<u64>,
    outputs: Vec<String>,
    finished_unix_secs: u64,
    wall_time_secs: f64,
}

/// Writes `<primary output>.manifest.json`.
pub fn write(cli: &Cli, run: &RunOutcome, elapsed: Duration) -> std::io::Result<()> {
    let manifest = Manifest {
        tool: "shiftforest",
        version: env!("CARGO_PKG_VERSION"),
        config: cli,
        seed: run.seed,
        outputs: run
            .outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        finished_unix_secs: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        wall_time_secs: elapsed.as_secs_f64(),
    };
    let path = crate::sibling_path(&run.primary_output, "manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(path, text)
}
