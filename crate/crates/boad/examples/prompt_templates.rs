//! The versioned prompt assets and their strict rendering contract.
//!
//! Every model-facing prompt comes from a checked-in template with a
//! declared placeholder list. Rendering demands exactly that binding set —
//! a missing or extra key is an error, not a silent blank — so prompt drift
//! shows up at the call site instead of in model behavior.
//!
//! Run with:
//!
//! ```not_rust
//! cargo run -q --example prompt_templates
//! ```

use std::collections::BTreeMap;

use boad::factory::{generate_subagent, GenerationRequest};
use boad::gateway::{
    render_template, MockProvider, HELPFUL_JUDGE_V1, ORCHESTRATOR_PLAN_V1, SUBAGENT_GEN_V1,
    SUBAGENT_TEMPLATES_V1, WARMUP_REFINE_V1,
};

fn main() {
    println!("asset                  placeholders");
    for asset in [
        &SUBAGENT_GEN_V1,
        &SUBAGENT_TEMPLATES_V1,
        &ORCHESTRATOR_PLAN_V1,
        &WARMUP_REFINE_V1,
        &HELPFUL_JUDGE_V1,
    ] {
        println!("{:<22} {:?}", asset.id, asset.placeholders);
    }

    let bindings = BTreeMap::from([
        ("TOOL_NAME", "patch_editor".to_owned()),
        ("TRAJECTORIES", "=== Trajectory for instance demo ===\n(elided)".to_owned()),
    ]);
    let prompt = render_template(&HELPFUL_JUDGE_V1, &bindings).unwrap();
    let head: String = prompt.lines().take(6).collect::<Vec<_>>().join("\n");
    println!("\njudge prompt, first lines:\n{head}\n");

    // Wrong binding sets are rejected outright.
    let err = render_template(&HELPFUL_JUDGE_V1, &BTreeMap::new()).unwrap_err();
    println!("empty bindings -> {err}");

    // The mock provider answers the generation protocol deterministically,
    // so the whole two-stage design flow runs offline.
    let provider = MockProvider::new();
    let req = GenerationRequest {
        round: 1,
        existing: vec![("code_navigator".into(), "[subagent] Finds code.".into())],
        feedback: None,
    };
    let spec = generate_subagent(&req, &provider, "boad-mock").unwrap();
    println!("\ngenerated design: {} — {}", spec.name, spec.docstring);
}
