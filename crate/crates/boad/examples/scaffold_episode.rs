//! One orchestrated episode through the chat-driven scaffold.
//!
//! The orchestrator model gets a plan and a command list, delegates to its
//! sub-agents with `<function=name>` calls, and ends with `submit`. Here a
//! scripted provider plays both the orchestrator and the delegated workers,
//! so the full delegation loop runs without any network.
//!
//! Run with:
//!
//! ```not_rust
//! cargo run -q --example scaffold_episode
//! ```

use boad::archive::{Origin, SubAgentSpec};
use boad::bandit::ArmId;
use boad::evaluation::{
    build_orchestrator_plan, EvalContext, EvaluationBackend, TaskInstance,
};
use boad::gateway::SequenceProvider;
use boad::scaffold::LlmScaffoldBackend;

fn spec(id: &str, blurb: &str) -> SubAgentSpec {
    SubAgentSpec {
        arm_id: ArmId::new(id),
        name: id.to_owned(),
        docstring: format!("[subagent] {blurb}"),
        context_description: "Everything the worker needs, spelled out.".to_owned(),
        instance_template: "Request:\n{{context}}\nReport via submit_subagent.".to_owned(),
        system_template: "You are {{command_docs}} bound to: {{problem_statement}}".to_owned(),
        created_round: 0,
        origin: Origin::Fixture,
    }
}

fn main() {
    let specs = vec![
        spec("issue_analyzer", "Explains what the issue actually asks for."),
        spec("precision_editor", "Applies one well-scoped code edit."),
    ];
    let team: Vec<&SubAgentSpec> = specs.iter().collect();

    // Scripted replies, consumed in order: orchestrator delegates twice,
    // each worker reports back, then the orchestrator submits.
    let provider = SequenceProvider::new([
        "Starting with analysis.\n<function=issue_analyzer>\n<parameter=context>Explain the crash in parser.rs reported in the issue.</parameter>\n</function>",
        "The parser indexes past the final token when input ends in a comma.\n<function=submit_subagent>\n<parameter=context>Off-by-one in parser.rs: the trailing-comma path reads one token too many.</parameter>\n</function>",
        "Handing the fix to the editor.\n<function=precision_editor>\n<parameter=context>In parser.rs, guard the trailing-comma path against reading past the last token.</parameter>\n</function>",
        "<function=submit_subagent>\n<parameter=context>Added the bounds guard; parsing a trailing comma no longer panics.</parameter>\n</function>",
        "Fix is in.\n<function=submit>\n</function>",
    ]);

    let backend = LlmScaffoldBackend::new(&provider, "boad-mock");
    let plan = build_orchestrator_plan(&team, false, &provider, "boad-mock").unwrap();
    let instance = TaskInstance {
        instance_id: "demo_issue".to_owned(),
        problem_statement: "Parser panics on input ending with a comma.".to_owned(),
        repo_ref: "demo/repo".to_owned(),
        max_steps: 10,
    };
    let ctx = EvalContext { round: 1, label: "demo".to_owned() };
    let traj = backend.evaluate(&ctx, &plan, &team, &instance).unwrap();

    println!("submitted: {}, steps: {}\n", traj.submitted, traj.steps.len());
    for (i, step) in traj.steps.iter().enumerate() {
        println!("step {i} [{:?}] {}: {}", step.actor, step.action, step.observation);
    }
    println!("\nsub-agent segments:");
    for seg in &traj.segments {
        println!(
            "  {} covers steps {}..{}",
            seg.arm_id.as_str(),
            seg.start_step,
            seg.start_step + seg.length,
        );
    }
}
