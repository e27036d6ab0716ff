//! Hindsight credit assignment: per-(arm, trajectory) binary labels.
//!
//! Team success is a terrible proxy for individual contribution — an idle
//! arm on a strong team looks exactly as good as the arms doing the work.
//! Credit here is assigned *per arm per trajectory*, in hindsight: a judge
//! (exact oracle in simulation, LLM otherwise) reads the full episode and
//! answers one question — did this arm's work materially help? Labels exist
//! for failed episodes too; partial progress earns credit even when the team
//! lost. The success-rate baseline is also implemented, deliberately simple,
//! as the comparison point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::archive::SubAgentSpec;
use crate::bandit::ArmId;
use crate::error::{Error, Result};
use crate::evaluation::{Actor, RoundRecord, Trajectory};
use crate::gateway::{
    extract_single_fenced_block, render_template, ChatExchange, ChatProvider, HELPFUL_JUDGE_V1,
};

/// What produced a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    /// Ground-truth lookup in the simulated world.
    Oracle,
    /// LLM reading the trajectory.
    Llm,
    /// The trajectory's success flag copied onto every team member.
    SuccessProxy,
}

/// One binary credit decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryLabel {
    pub arm_id: ArmId,
    pub instance_id: String,
    pub label: bool,
    pub judge_kind: JudgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
}

/// Which credit signal a run records into arm statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreditMetric {
    Helpfulness,
    SuccessRate,
}

/// All credit decisions of one round: one label per (subset arm, trajectory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreditReport {
    pub round: u64,
    pub metric: CreditMetric,
    pub labels: Vec<TrajectoryLabel>,
    pub per_arm_score: BTreeMap<ArmId, f64>,
}

impl CreditReport {
    /// This round's labels for one arm, in trajectory order.
    pub fn labels_for(&self, arm: &ArmId) -> Vec<bool> {
        self.labels
            .iter()
            .filter(|l| &l.arm_id == arm)
            .map(|l| l.label)
            .collect()
    }
}

/// Mean of a non-empty batch of binary labels.
pub fn helpfulness_score(labels: &[bool]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("helpfulness of an empty label set"));
    }
    Ok(labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64)
}

/// Fraction of trajectories that succeeded — the score the success-rate
/// baseline hands to *every* team member indiscriminately.
pub fn success_rate_score(trajectories: &[Trajectory]) -> Result<f64> {
    if trajectories.is_empty() {
        return Err(Error::invalid("success rate of an empty trajectory set"));
    }
    Ok(trajectories.iter().filter(|t| t.success).count() as f64 / trajectories.len() as f64)
}

/// A hindsight judge: reads one trajectory, labels one arm's contribution.
pub trait TrajectoryJudge {
    fn judge(&self, traj: &Trajectory, spec: &SubAgentSpec) -> Result<(bool, Option<String>)>;
    fn kind(&self) -> JudgeKind;
}

/// Exact judge over simulated trajectories (requires ground truth).
pub struct OracleJudge;

impl TrajectoryJudge for OracleJudge {
    fn judge(&self, traj: &Trajectory, spec: &SubAgentSpec) -> Result<(bool, Option<String>)> {
        let label = crate::simenv::oracle_judge(traj, &spec.arm_id)?;
        Ok((label, None))
    }

    fn kind(&self) -> JudgeKind {
        JudgeKind::Oracle
    }
}

/// Render a trajectory as the text a judge reads: every step with its actor
/// and observation, then the sub-agent segment map.
pub fn render_trajectory_text(traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "INSTANCE: {}\nOUTCOME: submitted={} success={}\nSTEPS:\n",
        traj.instance_id, traj.submitted, traj.success
    ));
    for (i, step) in traj.steps.iter().enumerate() {
        let actor = match &step.actor {
            Actor::Orchestrator => "orchestrator".to_owned(),
            Actor::Subagent { arm_id } => format!("subagent {arm_id}"),
        };
        out.push_str(&format!("{}. [{actor}] {}\n   -> {}\n", i + 1, step.action, step.observation));
    }
    if traj.segments.is_empty() {
        out.push_str("SUBAGENT SEGMENTS: none\n");
    } else {
        out.push_str("SUBAGENT SEGMENTS:\n");
        for seg in &traj.segments {
            out.push_str(&format!(
                "- {}: steps {}..{}\n",
                seg.arm_id,
                seg.start_step + 1,
                seg.start_step + seg.length
            ));
        }
    }
    out
}

const JUDGE_RETRY_REMINDER: &str = "Your previous reply did not follow the required format. Respond with exactly one fenced code block containing YAML with the keys `helpful` (true or false) and `reasoning` (a string), and no other fenced blocks.";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JudgeDoc {
    helpful: bool,
    reasoning: String,
}

fn parse_judge_reply(reply: &str) -> Result<(bool, String)> {
    let block = extract_single_fenced_block(reply)?;
    let doc: JudgeDoc = serde_yaml::from_str(&block).map_err(|e| Error::Parse {
        what: "judge verdict".to_owned(),
        detail: e.to_string(),
    })?;
    Ok((doc.helpful, doc.reasoning))
}

/// LLM judge: renders the judging prompt for (arm, trajectory), parses the
/// strict `helpful`/`reasoning` verdict, and retries once on a malformed
/// reply with the conversation plus a corrective reminder.
pub struct LlmJudge<'a> {
    provider: &'a dyn ChatProvider,
    model: String,
}

impl<'a> LlmJudge<'a> {
    pub fn new(provider: &'a dyn ChatProvider, model: impl Into<String>) -> LlmJudge<'a> {
        LlmJudge {
            provider,
            model: model.into(),
        }
    }
}

impl TrajectoryJudge for LlmJudge<'_> {
    fn judge(&self, traj: &Trajectory, spec: &SubAgentSpec) -> Result<(bool, Option<String>)> {
        let mut bindings = BTreeMap::new();
        bindings.insert("TOOL_NAME", spec.name.clone());
        bindings.insert("TRAJECTORIES", render_trajectory_text(traj));
        let prompt = render_template(&HELPFUL_JUDGE_V1, &bindings)?;
        let first = ChatExchange::new(&self.model).user(prompt);
        let reply = self.provider.complete(&first)?;
        match parse_judge_reply(&reply) {
            Ok((label, reasoning)) => Ok((label, Some(reasoning))),
            Err(first_err) => {
                log::warn!("judge reply malformed, retrying once: {first_err}");
                let retry = first.assistant(reply).user(JUDGE_RETRY_REMINDER);
                let reply = self.provider.complete(&retry)?;
                let (label, reasoning) = parse_judge_reply(&reply).map_err(|e| Error::Parse {
                    what: "judge verdict".to_owned(),
                    detail: format!("still malformed after retry: {e}"),
                })?;
                Ok((label, Some(reasoning)))
            }
        }
    }

    fn kind(&self) -> JudgeKind {
        JudgeKind::Llm
    }
}

/// Label one (trajectory, arm) pair, wrapping failures with their context.
pub fn judge_trajectory(
    judge: &dyn TrajectoryJudge,
    traj: &Trajectory,
    spec: &SubAgentSpec,
) -> Result<TrajectoryLabel> {
    let (label, reasoning) = judge.judge(traj, spec).map_err(|e| Error::Judge {
        arm: spec.arm_id.to_string(),
        instance: traj.instance_id.clone(),
        detail: e.to_string(),
    })?;
    Ok(TrajectoryLabel {
        arm_id: spec.arm_id.clone(),
        instance_id: traj.instance_id.clone(),
        label,
        judge_kind: judge.kind(),
        reasoning,
    })
}

/// Assign this round's credit: exactly one label per (subset arm,
/// trajectory).
///
/// Helpfulness needs a judge — except for arms that were never invoked in a
/// trajectory (no segment), which are labeled unhelpful mechanically, with
/// no judge call. Success-rate mode copies each trajectory's success flag
/// onto every subset arm; its blindness to individual contribution is the
/// point of keeping it around.
pub fn build_credit_report(
    record: &RoundRecord,
    specs: &[&SubAgentSpec],
    metric: CreditMetric,
    judge: Option<&dyn TrajectoryJudge>,
) -> Result<CreditReport> {
    if record.trajectories.is_empty() {
        return Err(Error::invalid("credit for a round with no trajectories"));
    }
    let subset_specs: Vec<&SubAgentSpec> = record
        .subset
        .iter()
        .map(|id| {
            specs
                .iter()
                .find(|s| &s.arm_id == id)
                .copied()
                .ok_or_else(|| Error::UnknownArm(id.to_string()))
        })
        .collect::<Result<_>>()?;

    let mut labels = Vec::with_capacity(record.subset.len() * record.trajectories.len());
    match metric {
        CreditMetric::SuccessRate => {
            for traj in &record.trajectories {
                for spec in &subset_specs {
                    labels.push(TrajectoryLabel {
                        arm_id: spec.arm_id.clone(),
                        instance_id: traj.instance_id.clone(),
                        label: traj.success,
                        judge_kind: JudgeKind::SuccessProxy,
                        reasoning: None,
                    });
                }
            }
        }
        CreditMetric::Helpfulness => {
            let judge =
                judge.ok_or_else(|| Error::invalid("helpfulness credit needs a judge"))?;
            for traj in &record.trajectories {
                for spec in &subset_specs {
                    let invoked = traj.segments.iter().any(|s| s.arm_id == spec.arm_id);
                    if !invoked {
                        labels.push(TrajectoryLabel {
                            arm_id: spec.arm_id.clone(),
                            instance_id: traj.instance_id.clone(),
                            label: false,
                            judge_kind: judge.kind(),
                            reasoning: Some("never invoked in this trajectory".to_owned()),
                        });
                        continue;
                    }
                    labels.push(judge_trajectory(judge, traj, spec)?);
                }
            }
        }
    }

    let mut per_arm_score = BTreeMap::new();
    for spec in &subset_specs {
        let arm_labels: Vec<bool> = labels
            .iter()
            .filter(|l| l.arm_id == spec.arm_id)
            .map(|l| l.label)
            .collect();
        per_arm_score.insert(spec.arm_id.clone(), helpfulness_score(&arm_labels)?);
    }

    Ok(CreditReport {
        round: record.round,
        metric,
        labels,
        per_arm_score,
    })
}
