//! Ranking a snapshot and exporting the best designs as a deployable bundle.
//!
//! Loads the archive fixture bundled with the crate (twenty designs with
//! realistic helpfulness statistics), ranks it under both credit metrics,
//! and exports the top two together with an orchestrator plan.
//!
//! Run with:
//!
//! ```not_rust
//! cargo run -q --example export_bundle
//! ```

use std::path::Path;

use boad::archive::{rank_arms, Archive, RankMetric};
use boad::gateway::MockProvider;
use boad::runner::export_top_arms;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/subagent_catalog.json");
    let archive = Archive::restore(&std::fs::read_to_string(path).unwrap()).unwrap();
    println!("archive: {} designs\n", archive.len());

    println!("top 5 by helpfulness mean:");
    for row in rank_arms(&archive, RankMetric::HelpfulnessMean, 5).unwrap() {
        println!(
            "  {:<22} {:.3}  ({} labels, created round {})",
            row.name, row.mean, row.sample_count, row.created_round,
        );
    }

    let provider = MockProvider::new();
    let bundle = export_top_arms(
        &archive,
        2,
        RankMetric::HelpfulnessMean,
        true,
        &provider,
        "boad-mock",
    )
    .unwrap();
    println!("\nexport bundle (version {}):", bundle.version);
    for arm in &bundle.arms {
        println!("  {} — mean {:.3}", arm.spec.name, arm.mean);
    }
    println!("\norchestrator plan for the exported team:\n");
    println!("{}", bundle.plan.plan_text);
}
