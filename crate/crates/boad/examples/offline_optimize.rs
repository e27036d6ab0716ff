//! A complete offline optimization run, end to end.
//!
//! Uses the built-in world, the deterministic mock chat provider, and all
//! default knobs: 20 rounds, teams of 3, 4 warm-up episodes per new design.
//! Afterwards it walks the append-only event log the run left behind and
//! prints the final archive ranking.
//!
//! Run with:
//!
//! ```not_rust
//! cargo run -q --example offline_optimize
//! ```

use std::collections::BTreeMap;

use boad::archive::{rank_arms, RankMetric};
use boad::config::RunConfig;
use boad::events::read_log;
use boad::runner::run_optimize;

fn main() {
    let out = std::env::temp_dir().join(format!("boad_optimize_demo_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&out);

    let cfg = RunConfig::default();
    let outcome = run_optimize(&cfg, &out, None).unwrap();
    println!(
        "finished {} rounds; archive holds {} designs",
        outcome.rounds_completed,
        outcome.archive.len(),
    );
    println!("log:      {}", outcome.log_path.display());
    println!("snapshot: {}\n", outcome.snapshot_path.display());

    // The log is one JSON record per line; every decision the run took is
    // on it, in order, with a logical timestamp.
    let events = read_log(&outcome.log_path).unwrap();
    let mut by_kind: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &events {
        *by_kind.entry(e.event.body.kind()).or_default() += 1;
    }
    println!("event log: {} records", events.len());
    for (kind, n) in &by_kind {
        println!("  {kind:<18} {n}");
    }

    let top = rank_arms(&outcome.archive, RankMetric::HelpfulnessMean, 3).unwrap();
    println!("\ntop designs by measured helpfulness:");
    for row in &top {
        println!(
            "  {:<22} mean {:.3} over {} labels",
            row.arm_id.as_str(),
            row.mean,
            row.sample_count,
        );
    }
}
