//! The arm archive: sub-agent designs, their label statistics, snapshots,
//! Chinese-restaurant-process expansion, and post-hoc ranking.
//!
//! The archive only ever grows. A new arm enters with zero samples, which the
//! UCB policy treats as `+inf`, so every design is tried before any scored
//! design is re-picked. Expansion is decided per round by comparing a uniform
//! draw against
//!
//! ```text
//! p_new = theta / (theta + |archive|)
//! ```
//!
//! so growth slows as the archive fills: over `T` rounds the expected number
//! of additions is `O(theta * ln T)`, not linear in `T`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bandit::{ArmId, ArmStats};
use crate::error::{Error, Result};

/// Required opening of every design docstring; lets the surrounding harness
/// recognize sub-agent tools without a separate registry.
pub const DOCSTRING_PREFIX: &str = "[subagent]";

/// Placeholder every instance template must carry; the scaffold substitutes
/// the orchestrator-provided context here.
pub const CONTEXT_PLACEHOLDER: &str = "{{context}}";

const SNAPSHOT_VERSION: u32 = 1;

/// How an arm entered the archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Bootstrap,
    CrpGenerated,
    Fixture,
}

/// A complete sub-agent design: identity, prompt surfaces, and provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubAgentSpec {
    pub arm_id: ArmId,
    /// Tool name the orchestrator calls, e.g. `issue_localizer`.
    pub name: String,
    /// One-line tool description; must start with [`DOCSTRING_PREFIX`].
    pub docstring: String,
    /// What the orchestrator should pass as the `context` argument.
    pub context_description: String,
    /// Per-invocation user prompt; must contain [`CONTEXT_PLACEHOLDER`].
    pub instance_template: String,
    /// System prompt of the sub-agent.
    pub system_template: String,
    pub created_round: u64,
    pub origin: Origin,
}

impl SubAgentSpec {
    /// Check the structural invariants every design must satisfy.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::SpecInvariant {
                arm: self.arm_id.to_string(),
                reason: reason.to_owned(),
            })
        };
        if self.arm_id.as_str().is_empty() {
            return fail("empty arm_id");
        }
        if self.name.is_empty() {
            return fail("empty name");
        }
        if !self.docstring.starts_with(DOCSTRING_PREFIX) {
            return fail("docstring must start with \"[subagent]\"");
        }
        if !self.instance_template.contains(CONTEXT_PLACEHOLDER) {
            return fail("instance_template must contain \"{{context}}\"");
        }
        Ok(())
    }
}

/// Stats row in the snapshot; `created_round` lives on the design, not here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatsRow {
    arm_id: ArmId,
    sample_count: u64,
    label_sum: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Snapshot {
    version: u32,
    theta: f64,
    round_cursor: u64,
    arms: Vec<SubAgentSpec>,
    stats: Vec<StatsRow>,
}

/// The growing arm store.
///
/// Arms are kept in insertion order (which is also creation order); per-arm
/// statistics are keyed by id. `round_cursor` is the round new arms are
/// stamped with and advances monotonically under the runner's control.
#[derive(Debug, Clone)]
pub struct Archive {
    arms: Vec<SubAgentSpec>,
    stats: BTreeMap<ArmId, ArmStats>,
    theta: f64,
    round_cursor: u64,
}

impl Archive {
    /// Empty archive with concentration parameter `theta > 0`.
    pub fn new(theta: f64) -> Result<Archive> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::invalid(format!(
                "concentration theta must be positive and finite, got {theta}"
            )));
        }
        Ok(Archive {
            arms: Vec::new(),
            stats: BTreeMap::new(),
            theta,
            round_cursor: 0,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn round_cursor(&self) -> u64 {
        self.round_cursor
    }

    /// Advance the creation-round stamp for subsequently added arms.
    pub fn set_round_cursor(&mut self, round: u64) {
        debug_assert!(round >= self.round_cursor, "round cursor moved backwards");
        self.round_cursor = round;
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    /// All designs in creation order.
    pub fn arms(&self) -> &[SubAgentSpec] {
        &self.arms
    }

    pub fn get_arm(&self, id: &ArmId) -> Option<&SubAgentSpec> {
        self.arms.iter().find(|a| &a.arm_id == id)
    }

    pub fn get_stats(&self, id: &ArmId) -> Option<&ArmStats> {
        self.stats.get(id)
    }

    /// Stats for every arm, in creation order (the order selection expects).
    pub fn all_stats(&self) -> Vec<ArmStats> {
        self.arms
            .iter()
            .map(|a| self.stats[&a.arm_id].clone())
            .collect()
    }

    /// Validate and add a design. Its `created_round` is stamped from the
    /// archive's round cursor regardless of what the caller set.
    pub fn add_arm(&mut self, mut spec: SubAgentSpec) -> Result<()> {
        spec.created_round = self.round_cursor;
        spec.validate()?;
        if self.stats.contains_key(&spec.arm_id) {
            return Err(Error::DuplicateArm(spec.arm_id.to_string()));
        }
        self.stats.insert(
            spec.arm_id.clone(),
            ArmStats::new(spec.arm_id.clone(), spec.created_round),
        );
        self.arms.push(spec);
        Ok(())
    }

    /// Fold a batch of binary labels into one arm's statistics.
    pub fn record_labels(&mut self, id: &ArmId, labels: &[bool]) -> Result<()> {
        let current = self
            .stats
            .get(id)
            .ok_or_else(|| Error::UnknownArm(id.to_string()))?;
        let next = crate::bandit::record_samples(current, labels)?;
        self.stats.insert(id.clone(), next);
        Ok(())
    }

    /// Overwrite one arm's running totals; used when replaying a run log,
    /// where the log's `stats_update` events are authoritative.
    pub(crate) fn set_stats_totals(
        &mut self,
        id: &ArmId,
        sample_count: u64,
        label_sum: u64,
    ) -> Result<()> {
        if label_sum > sample_count {
            return Err(Error::invalid(format!(
                "label_sum {label_sum} exceeds sample_count {sample_count} for {id}"
            )));
        }
        let current = self
            .stats
            .get_mut(id)
            .ok_or_else(|| Error::UnknownArm(id.to_string()))?;
        current.sample_count = sample_count;
        current.label_sum = label_sum;
        Ok(())
    }

    /// Serialize the archive to its versioned JSON snapshot.
    pub fn snapshot(&self) -> Result<String> {
        let snap = Snapshot {
            version: SNAPSHOT_VERSION,
            theta: self.theta,
            round_cursor: self.round_cursor,
            arms: self.arms.clone(),
            stats: self
                .arms
                .iter()
                .map(|a| {
                    let s = &self.stats[&a.arm_id];
                    StatsRow {
                        arm_id: s.arm_id.clone(),
                        sample_count: s.sample_count,
                        label_sum: s.label_sum,
                    }
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&snap)?)
    }

    /// Rebuild an archive from a snapshot, re-checking every invariant the
    /// live API enforces. A snapshot that would be unreachable through the
    /// API — duplicate ids, stats for unknown arms, more positive labels than
    /// samples — is rejected rather than repaired.
    pub fn restore(json: &str) -> Result<Archive> {
        let snap: Snapshot =
            serde_json::from_str(json).map_err(|e| Error::Snapshot(e.to_string()))?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::SnapshotVersion {
                found: snap.version,
                expected: SNAPSHOT_VERSION,
            });
        }
        if !(snap.theta > 0.0 && snap.theta.is_finite()) {
            return Err(Error::Snapshot(format!("invalid theta {}", snap.theta)));
        }
        let mut stats = BTreeMap::new();
        for spec in &snap.arms {
            spec.validate()?;
            if stats
                .insert(
                    spec.arm_id.clone(),
                    ArmStats::new(spec.arm_id.clone(), spec.created_round),
                )
                .is_some()
            {
                return Err(Error::Snapshot(format!("duplicate arm {}", spec.arm_id)));
            }
        }
        if snap.stats.len() != snap.arms.len() {
            return Err(Error::Snapshot(format!(
                "{} stats rows for {} arms",
                snap.stats.len(),
                snap.arms.len()
            )));
        }
        for row in &snap.stats {
            if row.label_sum > row.sample_count {
                return Err(Error::Snapshot(format!(
                    "label_sum {} exceeds sample_count {} for {}",
                    row.label_sum, row.sample_count, row.arm_id
                )));
            }
            let entry = stats
                .get_mut(&row.arm_id)
                .ok_or_else(|| Error::Snapshot(format!("stats for unknown arm {}", row.arm_id)))?;
            if entry.sample_count != 0 {
                return Err(Error::Snapshot(format!("duplicate stats for {}", row.arm_id)));
            }
            entry.sample_count = row.sample_count;
            entry.label_sum = row.label_sum;
        }
        Ok(Archive {
            arms: snap.arms,
            stats,
            theta: snap.theta,
            round_cursor: snap.round_cursor,
        })
    }
}

/// Decide whether a round opens with a brand-new arm.
///
/// `draw` is a uniform sample in `[0, 1)`; the comparison is strict
/// (`draw < p_new`) so `p_new = 0` can never fire and `p_new = 1` always does.
pub fn crp_expansion_decision(theta: f64, archive_size: usize, draw: f64) -> Result<bool> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::invalid(format!(
            "concentration theta must be positive and finite, got {theta}"
        )));
    }
    if !(0.0..1.0).contains(&draw) {
        return Err(Error::invalid(format!("draw {draw} outside [0, 1)")));
    }
    let p_new = theta / (theta + archive_size as f64);
    Ok(draw < p_new)
}

/// Which empirical mean a ranking should be read as.
///
/// Helpfulness means come from per-(arm, trajectory) hindsight labels;
/// success-rate means from trajectory success flags. The archive keeps one
/// running tally — a run records one kind of label throughout — and the
/// metric tag says how to interpret it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMetric {
    HelpfulnessMean,
    SuccessRateMean,
}

/// One row of a ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedArm {
    pub arm_id: ArmId,
    pub name: String,
    pub mean: f64,
    pub sample_count: u64,
    pub created_round: u64,
}

/// Rank visited arms by empirical mean, descending; never-visited arms are
/// excluded (they have no mean). Ties break by sample count descending (more
/// evidence first), then arm id ascending.
pub fn rank_arms(archive: &Archive, metric: RankMetric, k: usize) -> Result<Vec<RankedArm>> {
    let _ = metric; // interpretation tag only; both metrics rank the same tally
    if k == 0 {
        return Err(Error::invalid("ranking size k must be >= 1"));
    }
    let mut rows: Vec<RankedArm> = archive
        .arms()
        .iter()
        .filter_map(|spec| {
            let s = archive.get_stats(&spec.arm_id)?;
            s.mean().map(|mean| RankedArm {
                arm_id: spec.arm_id.clone(),
                name: spec.name.clone(),
                mean,
                sample_count: s.sample_count,
                created_round: spec.created_round,
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        b.mean
            .partial_cmp(&a.mean)
            .expect("means are never NaN")
            .then_with(|| b.sample_count.cmp(&a.sample_count))
            .then_with(|| a.arm_id.cmp(&b.arm_id))
    });
    rows.truncate(k);
    Ok(rows)
}

#[cfg(test)]
pub(crate) fn test_spec(id: &str) -> SubAgentSpec {
    SubAgentSpec {
        arm_id: ArmId::from(id),
        name: id.to_owned(),
        docstring: format!("[subagent] Test design {id}."),
        context_description: "What to work on.".to_owned(),
        instance_template: "Task: {{context}}".to_owned(),
        system_template: "You are a focused assistant.".to_owned(),
        created_round: 0,
        origin: Origin::Fixture,
    }
}
