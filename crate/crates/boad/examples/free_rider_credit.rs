//! Why per-trajectory hindsight labels beat team-level success rates.
//!
//! The bundled `free_rider` world has two genuinely useful specialists and
//! one arm with no skills at all. Scoring arms by their team's success rate
//! rewards the passenger as much as the drivers; hindsight labels, which ask
//! whether each arm's own contribution mattered, give it exactly zero.
//!
//! Run with:
//!
//! ```not_rust
//! cargo run -q --example free_rider_credit
//! ```

use boad::archive::{Origin, SubAgentSpec};
use boad::bandit::ArmId;
use boad::credit::{build_credit_report, CreditMetric, OracleJudge};
use boad::evaluation::{build_orchestrator_plan, RoundRecord, TaskInstance, Trajectory};
use boad::gateway::MockProvider;
use boad::rng::Stream;
use boad::simenv::{builtin_world, simulate_trajectory};

fn spec(id: &str) -> SubAgentSpec {
    SubAgentSpec {
        arm_id: ArmId::new(id),
        name: id.to_owned(),
        docstring: format!("[subagent] Demo stand-in for {id}."),
        context_description: "Self-contained task description.".to_owned(),
        instance_template: "Task:\n{{context}}\nReport via submit_subagent.".to_owned(),
        system_template: "You are a specialist.\n{{command_docs}}\n{{problem_statement}}".to_owned(),
        created_round: 0,
        origin: Origin::Fixture,
    }
}

fn main() {
    let world = builtin_world("free_rider").unwrap();
    let specs: Vec<SubAgentSpec> = world.arms.iter().map(|a| spec(a.arm_id.as_str())).collect();
    let team: Vec<&SubAgentSpec> = specs.iter().collect();
    let required = world.tasks[0].required.clone();

    // 200 simulated episodes with the full three-arm team.
    let trajectories: Vec<Trajectory> = (0..200)
        .map(|i| {
            let instance = TaskInstance {
                instance_id: format!("demo_{i:03}"),
                problem_statement: "Resolve the reported defect.".to_owned(),
                repo_ref: "task:0".to_owned(),
                max_steps: 8,
            };
            let mut rng = Stream::scoped(42, 1, "credit_demo", &instance.instance_id);
            simulate_trajectory(&world, &team, &required, &instance, &mut rng).unwrap()
        })
        .collect();
    let wins = trajectories.iter().filter(|t| t.success).count();
    println!("team solved {wins}/200 episodes\n");

    let provider = MockProvider::new();
    let record = RoundRecord {
        round: 1,
        subset: specs.iter().map(|s| s.arm_id.clone()).collect(),
        plan: build_orchestrator_plan(&team, false, &provider, "boad-mock").unwrap(),
        trajectories,
        credit: None,
    };

    println!("arm                success-rate    hindsight");
    let naive = build_credit_report(&record, &team, CreditMetric::SuccessRate, None).unwrap();
    let hindsight =
        build_credit_report(&record, &team, CreditMetric::Helpfulness, Some(&OracleJudge)).unwrap();
    for s in &specs {
        println!(
            "{:<18} {:>12.3} {:>12.3}",
            s.name, naive.per_arm_score[&s.arm_id], hindsight.per_arm_score[&s.arm_id],
        );
    }
    println!("\nthe success-rate column cannot tell the free rider from the workers");
}
