//! Trajectories, orchestrator plans, and the per-round evaluation runner.
//!
//! A round evaluates one fixed team (the selected arm subset) under one
//! orchestrator plan across the whole design set of task instances. Backends
//! produce [`Trajectory`] values; whether a backend talks to a live scaffold
//! or to the simulated environment, the shape of what comes back — and
//! therefore everything credit assignment can see — is identical.

use serde::{Deserialize, Serialize};

use crate::archive::SubAgentSpec;
use crate::bandit::ArmId;
use crate::credit::CreditReport;
use crate::error::{Error, Result};
use crate::gateway::{render_template, ChatExchange, ChatProvider, ORCHESTRATOR_PLAN_V1};

/// Mandated second-to-last plan step.
pub const CLEANUP_STEP: &str =
    "After you have solved the issue, delete any test files or temporary files you created.";

/// Mandated final plan step.
pub const SUBMIT_STEP: &str = "Use the submit tool to submit the changes to the repository.";

/// One task the team is evaluated on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskInstance {
    pub instance_id: String,
    pub problem_statement: String,
    /// Where the task lives; the simulated backend reads `task:<index>`.
    pub repo_ref: String,
    pub max_steps: u32,
}

/// Who performed a step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Actor {
    Orchestrator,
    Subagent { arm_id: ArmId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub actor: Actor,
    pub action: String,
    pub observation: String,
}

/// Contiguous run of steps attributable to one sub-agent invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub arm_id: ArmId,
    pub start_step: usize,
    pub length: usize,
}

/// Full record of one evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub instance_id: String,
    /// The team that was available, in selection order.
    pub subset: Vec<ArmId>,
    pub steps: Vec<Step>,
    pub segments: Vec<Segment>,
    pub submitted: bool,
    pub success: bool,
    /// Present only for simulated episodes; judges must not require it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<crate::simenv::GroundTruth>,
}

/// Structural checks every trajectory must pass before credit assignment.
pub fn validate_trajectory(traj: &Trajectory) -> Result<()> {
    if traj.success && !traj.submitted {
        return Err(Error::invalid(format!(
            "trajectory {}: success without submission",
            traj.instance_id
        )));
    }
    let mut spans: Vec<(usize, usize)> = Vec::with_capacity(traj.segments.len());
    for seg in &traj.segments {
        if seg.length == 0 {
            return Err(Error::invalid(format!(
                "trajectory {}: empty segment for {}",
                traj.instance_id, seg.arm_id
            )));
        }
        if seg.start_step + seg.length > traj.steps.len() {
            return Err(Error::invalid(format!(
                "trajectory {}: segment for {} exceeds step count",
                traj.instance_id, seg.arm_id
            )));
        }
        if !traj.subset.contains(&seg.arm_id) {
            return Err(Error::invalid(format!(
                "trajectory {}: segment for {} outside the subset",
                traj.instance_id, seg.arm_id
            )));
        }
        spans.push((seg.start_step, seg.start_step + seg.length));
    }
    spans.sort_unstable();
    for pair in spans.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(Error::invalid(format!(
                "trajectory {}: overlapping segments",
                traj.instance_id
            )));
        }
    }
    Ok(())
}

/// The orchestrator's step-by-step strategy for a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrchestratorPlan {
    pub plan_text: String,
    pub subset: Vec<ArmId>,
    /// True when the plan was written for this specific team; false for the
    /// team-agnostic fallback plan.
    pub customized: bool,
}

/// Team-agnostic plan used when customization is disabled. Same numbered
/// shape and mandated closing steps as customized plans; it encourages
/// delegation without naming anyone.
pub fn generic_plan() -> String {
    [
        "Analyze the problem statement and identify the affected components.",
        "Locate the relevant files and understand the current behavior, delegating to the available subagents where their specialties apply.",
        "Implement a focused change that addresses the root cause.",
        "Verify the change against the reported symptoms and existing tests.",
        CLEANUP_STEP,
        SUBMIT_STEP,
    ]
    .iter()
    .enumerate()
    .map(|(i, s)| format!("{}. {s}", i + 1))
    .collect::<Vec<_>>()
    .join("\n")
}

/// Split a plan into its numbered steps, insisting that every non-empty line
/// is `N. <text>` with `N` counting up from 1.
fn parse_numbered_steps(text: &str) -> Result<Vec<String>> {
    let mut steps = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (num, rest) = line
            .split_once(". ")
            .ok_or_else(|| Error::Parse {
                what: "orchestrator plan".to_owned(),
                detail: format!("line is not a numbered step: {line:?}"),
            })?;
        let n: usize = num.parse().map_err(|_| Error::Parse {
            what: "orchestrator plan".to_owned(),
            detail: format!("step number is not an integer: {line:?}"),
        })?;
        if n != steps.len() + 1 {
            return Err(Error::Parse {
                what: "orchestrator plan".to_owned(),
                detail: format!("expected step {}, found {n}", steps.len() + 1),
            });
        }
        steps.push(rest.trim().to_owned());
    }
    if steps.is_empty() {
        return Err(Error::Parse {
            what: "orchestrator plan".to_owned(),
            detail: "no numbered steps found".to_owned(),
        });
    }
    Ok(steps)
}

/// Validate a plan's structure and, for customized plans, that every team
/// member is explicitly put to work with `Use the <name> subagent to ...`.
pub fn validate_plan(plan: &OrchestratorPlan, specs: &[&SubAgentSpec]) -> Result<()> {
    let steps = parse_numbered_steps(&plan.plan_text)?;
    if !(3..=7).contains(&steps.len()) {
        return Err(Error::invalid(format!(
            "plan has {} steps, expected 3 to 7",
            steps.len()
        )));
    }
    let n = steps.len();
    if steps[n - 2] != CLEANUP_STEP {
        return Err(Error::invalid(format!(
            "plan step {} must be the cleanup step",
            n - 1
        )));
    }
    if steps[n - 1] != SUBMIT_STEP {
        return Err(Error::invalid(format!("plan step {n} must be the submit step")));
    }
    if plan.customized {
        for id in &plan.subset {
            let spec = specs
                .iter()
                .find(|s| &s.arm_id == id)
                .ok_or_else(|| Error::UnknownArm(id.to_string()))?;
            let phrase = format!("Use the {} subagent to", spec.name);
            if !plan.plan_text.contains(&phrase) {
                return Err(Error::invalid(format!(
                    "customized plan never uses {}: missing {phrase:?}",
                    spec.name
                )));
            }
        }
    }
    Ok(())
}

const PLAN_RETRY_REMINDER: &str = "Your previous reply did not follow the required format. Respond with ONLY the numbered plan: every line must be \"N. <step>\" with N counting up from 1, 3 to 7 steps total, every subagent used via \"Use the <name> subagent to ...\", and the final two steps must be exactly:\n- After you have solved the issue, delete any test files or temporary files you created.\n- Use the submit tool to submit the changes to the repository.";

/// Obtain the round's plan.
///
/// `customized = false` short-circuits to the team-agnostic plan without any
/// provider call. Customized plans are requested from the provider, strictly
/// parsed, and — on a malformed reply — re-requested once with the original
/// conversation plus a corrective reminder appended.
pub fn build_orchestrator_plan(
    specs: &[&SubAgentSpec],
    customized: bool,
    provider: &dyn ChatProvider,
    model: &str,
) -> Result<OrchestratorPlan> {
    let subset: Vec<ArmId> = specs.iter().map(|s| s.arm_id.clone()).collect();
    if !customized {
        let plan = OrchestratorPlan {
            plan_text: generic_plan(),
            subset,
            customized: false,
        };
        validate_plan(&plan, specs)?;
        return Ok(plan);
    }
    let overview = specs
        .iter()
        .map(|s| format!("- name: {} — {}", s.name, s.docstring))
        .collect::<Vec<_>>()
        .join("\n");
    let mut bindings = std::collections::BTreeMap::new();
    bindings.insert("subagents_overview", overview);
    let prompt = render_template(&ORCHESTRATOR_PLAN_V1, &bindings)?;
    let first = ChatExchange::new(model).user(prompt);
    let mut reply = provider.complete(&first)?;
    let attempt_plan = |reply: &str| -> Result<OrchestratorPlan> {
        let plan = OrchestratorPlan {
            plan_text: reply.trim().to_owned(),
            subset: subset.clone(),
            customized: true,
        };
        validate_plan(&plan, specs)?;
        Ok(plan)
    };
    match attempt_plan(&reply) {
        Ok(plan) => Ok(plan),
        Err(first_err) => {
            log::warn!("plan reply malformed, retrying once: {first_err}");
            let retry = first.assistant(reply.clone()).user(PLAN_RETRY_REMINDER);
            reply = provider.complete(&retry)?;
            attempt_plan(&reply).map_err(|e| Error::Parse {
                what: "orchestrator plan".to_owned(),
                detail: format!("still malformed after retry: {e}"),
            })
        }
    }
}

/// Cache key for one (team, plan mode) combination: subset ids sorted, so the
/// key is order-insensitive, plus the template version the plan came from.
pub fn plan_cache_key(subset: &[ArmId], customized: bool, template_version: &str) -> String {
    let mut ids: Vec<&str> = subset.iter().map(ArmId::as_str).collect();
    ids.sort_unstable();
    format!("{}|customized={customized}|{template_version}", ids.join(","))
}

/// Backend failure taxonomy: transient failures are retried per instance,
/// fatal ones are not.
#[derive(Debug, Clone)]
pub enum BackendError {
    Transient(String),
    Fatal(String),
}

impl std::fmt::Display for BackendError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendError::Transient(d) => write!(f, "transient: {d}"),
            BackendError::Fatal(d) => write!(f, "fatal: {d}"),
        }
    }
}

/// Where in a run an evaluation happens; backends use `label` to partition
/// their randomness so warm-up episodes never perturb round episodes.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub round: u64,
    pub label: String,
}

/// Anything that can run one task instance under a plan with a team.
pub trait EvaluationBackend {
    fn evaluate(
        &self,
        ctx: &EvalContext,
        plan: &OrchestratorPlan,
        specs: &[&SubAgentSpec],
        instance: &TaskInstance,
    ) -> std::result::Result<Trajectory, BackendError>;
}

/// Everything one round produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub subset: Vec<ArmId>,
    pub plan: OrchestratorPlan,
    pub trajectories: Vec<Trajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credit: Option<CreditReport>,
}

const INSTANCE_ATTEMPTS: u32 = 3;

/// Trajectory standing in for an episode the backend could not produce: not
/// submitted, not successful, error recorded as the only step.
fn failed_trajectory(instance: &TaskInstance, subset: &[ArmId], detail: &str) -> Trajectory {
    Trajectory {
        instance_id: instance.instance_id.clone(),
        subset: subset.to_vec(),
        steps: vec![Step {
            actor: Actor::Orchestrator,
            action: "error".to_owned(),
            observation: format!("evaluation failed: {detail}"),
        }],
        segments: Vec::new(),
        submitted: false,
        success: false,
        ground_truth: None,
    }
}

/// Evaluate every instance of the design set under one plan.
///
/// Transient backend errors are retried (3 attempts per instance); an
/// instance that still fails — or fails fatally — contributes a failed
/// trajectory rather than aborting the round, so one bad episode cannot
/// starve the other eleven of credit.
pub fn run_round(
    round: u64,
    specs: &[&SubAgentSpec],
    plan: &OrchestratorPlan,
    instances: &[TaskInstance],
    backend: &dyn EvaluationBackend,
) -> Result<RoundRecord> {
    if instances.is_empty() {
        return Err(Error::invalid("round needs at least one task instance"));
    }
    let subset: Vec<ArmId> = specs.iter().map(|s| s.arm_id.clone()).collect();
    if plan.subset != subset {
        return Err(Error::invalid("plan subset does not match the team's designs"));
    }
    let ctx = EvalContext {
        round,
        label: "round".to_owned(),
    };
    let mut trajectories = Vec::with_capacity(instances.len());
    for instance in instances {
        let mut outcome: Option<Trajectory> = None;
        let mut last_error = String::new();
        for attempt in 1..=INSTANCE_ATTEMPTS {
            match backend.evaluate(&ctx, plan, specs, instance) {
                Ok(traj) => {
                    validate_trajectory(&traj)?;
                    outcome = Some(traj);
                    break;
                }
                Err(BackendError::Fatal(d)) => {
                    last_error = format!("fatal: {d}");
                    break;
                }
                Err(BackendError::Transient(d)) => {
                    log::warn!(
                        "instance {} attempt {attempt}/{INSTANCE_ATTEMPTS} failed: {d}",
                        instance.instance_id
                    );
                    last_error = format!("transient (after {attempt} attempts): {d}");
                }
            }
        }
        trajectories.push(outcome.unwrap_or_else(|| failed_trajectory(instance, &subset, &last_error)));
    }
    Ok(RoundRecord {
        round,
        subset,
        plan: plan.clone(),
        trajectories,
        credit: None,
    })
}
