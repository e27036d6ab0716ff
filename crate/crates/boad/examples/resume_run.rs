//! Stopping a run mid-flight and resuming it without a seam.
//!
//! The first run is told to stop after 10 of its 20 rounds. Resuming reads
//! the log back, replays the archive to the last consistent point, and
//! continues with the same seeded decisions — the final log is byte-for-byte
//! the log an uninterrupted run writes.
//!
//! Run with:
//!
//! ```not_rust
//! cargo run -q --example resume_run
//! ```

use boad::config::RunConfig;
use boad::runner::{resume_run, run_optimize};

fn main() {
    let base = std::env::temp_dir().join(format!("boad_resume_demo_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    let cfg = RunConfig::default();

    let full = run_optimize(&cfg, &base.join("full"), None).unwrap();
    println!("uninterrupted run: {} rounds", full.rounds_completed);

    let staged = run_optimize(&cfg, &base.join("staged"), Some(10)).unwrap();
    println!("staged run stopped after {} rounds", staged.rounds_completed);

    let resumed = resume_run(&staged.log_path, None).unwrap();
    println!("resume carried it to {} rounds", resumed.rounds_completed);

    let a = std::fs::read(&full.log_path).unwrap();
    let b = std::fs::read(&resumed.log_path).unwrap();
    println!(
        "\nlogs identical: {} ({} bytes each)",
        a == b,
        a.len(),
    );

    // Resume also survives torn logs: it truncates any half-written round
    // and replays from the last statistics update, so a crash can cost at
    // most one round of evaluations.
}
