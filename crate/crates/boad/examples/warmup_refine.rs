//! Refining a freshly created design before it enters the archive.
//!
//! A new design runs a few solo episodes on the design set; after each one
//! the model proposes field edits based on the trajectory. Proposals are
//! filtered hard — the docstring prefix and the context placeholder are
//! load-bearing — so a bad suggestion is skipped with a reason, never
//! applied. The provider here is scripted to show both outcomes.
//!
//! Run with:
//!
//! ```not_rust
//! cargo run -q --example warmup_refine
//! ```

use boad::archive::{Origin, SubAgentSpec};
use boad::bandit::ArmId;
use boad::factory::{warmup_refine, WarmupConfig};
use boad::gateway::SequenceProvider;
use boad::simenv::{builtin_world, synthesize_design_set, SimulatedBackend};

fn main() {
    let world = builtin_world("acceptance").unwrap();
    let design = synthesize_design_set(&world, 6, 0, 30);
    let backend = SimulatedBackend::new(world, 0).unwrap();

    // One scripted reply per warm-up episode, consumed in order.
    let provider = SequenceProvider::new([
        // Two acceptable edits: both survive the filter.
        "```yaml\nupdates:\n  docstring: \"[subagent] Explains an issue and names the code it implicates.\"\n  instance_template: \"Issue to analyze:\\n{{context}}\\nReport causes via submit_subagent.\"\n```",
        // Drops the required docstring prefix: rejected.
        "```yaml\nupdates:\n  docstring: \"Now a general-purpose assistant.\"\n```",
        // Loses the context placeholder: rejected.
        "```yaml\nupdates:\n  instance_template: \"Just do your best.\"\n```",
        // Nothing to change.
        "```yaml\nupdates: {}\n```",
    ]);

    let spec = SubAgentSpec {
        arm_id: ArmId::new("issue_analyzer"),
        name: "issue_analyzer".to_owned(),
        docstring: "[subagent] Explains what an issue actually asks for.".to_owned(),
        context_description: "The issue text, verbatim.".to_owned(),
        instance_template: "Issue:\n{{context}}\nReport via submit_subagent.".to_owned(),
        system_template: "You are an analyst.\n{{command_docs}}\n{{problem_statement}}".to_owned(),
        created_round: 1,
        origin: Origin::CrpGenerated,
    };

    let cfg = WarmupConfig {
        rounds: 4,
        seed: 0,
        round: 1,
        model: "boad-mock".to_owned(),
    };
    let outcome = warmup_refine(&spec, &design, &cfg, &backend, &provider).unwrap();

    for report in &outcome.history {
        println!("warm-up {} on {}:", report.warmup_round, report.instance_id);
        for field in &report.applied {
            println!("  applied {field}");
        }
        for reason in &report.skipped {
            println!("  skipped {reason}");
        }
    }
    println!("\ndocstring after refinement:\n  {}", outcome.spec.docstring);
    println!("instance template after refinement:\n  {:?}", outcome.spec.instance_template);
}
