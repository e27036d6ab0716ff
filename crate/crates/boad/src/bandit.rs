//! Upper-confidence-bound scoring over a growing set of arms.
//!
//! Each arm accumulates binary labels; its score at round `t` is
//!
//! ```text
//! ucb = mean + sqrt(2 * ln(t) / n)
//! ```
//!
//! where `mean` is the empirical label mean and `n` the number of labels. An
//! arm with no labels scores positive infinity so it is always tried before
//! any scored arm. `t` is the 1-based optimization round, not the label count.
//!
//! All operations here are pure: they take statistics in and hand new
//! statistics back, which keeps selection decisions replayable from a run log.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Opaque, unique identifier of an arm (a sub-agent design).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmId(String);

impl ArmId {
    pub fn new(id: impl Into<String>) -> ArmId {
        ArmId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ArmId {
    fn from(s: &str) -> ArmId {
        ArmId(s.to_owned())
    }
}

impl From<String> for ArmId {
    fn from(s: String) -> ArmId {
        ArmId(s)
    }
}

/// Label history backing one arm's score.
///
/// Labels are binary, so the sum is kept as an integer and the empirical mean
/// `label_sum / sample_count` is exact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmStats {
    pub arm_id: ArmId,
    pub sample_count: u64,
    pub label_sum: u64,
    pub created_round: u64,
}

impl ArmStats {
    /// Fresh, unvisited stats for an arm created at `created_round`.
    pub fn new(arm_id: ArmId, created_round: u64) -> ArmStats {
        ArmStats {
            arm_id,
            sample_count: 0,
            label_sum: 0,
            created_round,
        }
    }

    /// Empirical label mean; `None` while the arm is unvisited.
    pub fn mean(&self) -> Option<f64> {
        if self.sample_count == 0 {
            None
        } else {
            Some(self.label_sum as f64 / self.sample_count as f64)
        }
    }
}

/// A UCB value: finite for visited arms, `+inf` for unvisited ones.
///
/// Serialized as a JSON number when finite and as the string `"inf"` otherwise
/// (JSON has no infinity literal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score(pub f64);

impl Score {
    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            ser.serialize_str("inf")
        } else {
            ser.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Score, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(de)? {
            Repr::Num(x) => Ok(Score(x)),
            Repr::Text(s) if s == "inf" => Ok(Score(f64::INFINITY)),
            Repr::Text(s) => Err(D::Error::custom(format!("invalid score {s:?}"))),
        }
    }
}

/// Outcome of one round's arm selection.
///
/// `scores` covers every candidate arm, not only the chosen ones, so the
/// decision is fully auditable from the record alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub round: u64,
    pub chosen: Vec<ArmId>,
    pub scores: BTreeMap<ArmId, Score>,
}

/// UCB score for one arm at round `round`.
///
/// `mean` must be present exactly when `samples > 0` and lie in `[0, 1]`;
/// `round` must be at least 1. Unvisited arms score `+inf` deterministically —
/// forced initial exploration without any tie-breaking randomness.
pub fn ucb_score(mean: Option<f64>, samples: u64, round: u64) -> Result<f64> {
    if round == 0 {
        return Err(Error::invalid("ucb round index must be >= 1"));
    }
    match (mean, samples) {
        (None, 0) => Ok(f64::INFINITY),
        (Some(_), 0) => Err(Error::invalid("mean supplied for an unvisited arm")),
        (None, _) => Err(Error::invalid("mean missing for a visited arm")),
        (Some(m), n) => {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::invalid(format!("mean {m} outside [0, 1]")));
            }
            Ok(m + (2.0 * (round as f64).ln() / n as f64).sqrt())
        }
    }
}

/// Select up to `k` arms by UCB score at round `round`.
///
/// Ordering is total and deterministic: score descending, then
/// `created_round` ascending (older first), then `arm_id` ascending. Ties
/// among unvisited arms (all `+inf`) fall through to the same rule.
pub fn select_top_k(stats: &[ArmStats], round: u64, k: usize) -> Result<SelectionResult> {
    if stats.is_empty() {
        return Err(Error::invalid("cannot select from an empty arm set"));
    }
    if k == 0 {
        return Err(Error::invalid("selection size k must be >= 1"));
    }
    let mut scored: Vec<(&ArmStats, f64)> = Vec::with_capacity(stats.len());
    let mut scores = BTreeMap::new();
    for s in stats {
        let value = ucb_score(s.mean(), s.sample_count, round)?;
        if scores.insert(s.arm_id.clone(), Score(value)).is_some() {
            return Err(Error::DuplicateArm(s.arm_id.to_string()));
        }
        scored.push((s, value));
    }
    scored.sort_by(|(a, sa), (b, sb)| {
        sb.partial_cmp(sa)
            .expect("ucb scores are never NaN")
            .then_with(|| a.created_round.cmp(&b.created_round))
            .then_with(|| a.arm_id.cmp(&b.arm_id))
    });
    let chosen = scored
        .iter()
        .take(k.min(scored.len()))
        .map(|(s, _)| s.arm_id.clone())
        .collect();
    Ok(SelectionResult {
        round,
        chosen,
        scores,
    })
}

/// Fold a batch of binary labels into an arm's statistics, returning the
/// updated copy. The label list must be non-empty.
pub fn record_samples(stats: &ArmStats, labels: &[bool]) -> Result<ArmStats> {
    if labels.is_empty() {
        return Err(Error::invalid("empty label batch"));
    }
    let mut next = stats.clone();
    next.sample_count += labels.len() as u64;
    next.label_sum += labels.iter().filter(|&&l| l).count() as u64;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn visited(id: &str, n: u64, sum: u64, created: u64) -> ArmStats {
        ArmStats {
            arm_id: ArmId::from(id),
            sample_count: n,
            label_sum: sum,
            created_round: created,
        }
    }

    // Reference values computed with an arbitrary-precision calculator.
    const UCB_HALF_4_10: f64 = 1.572983013144674; // 0.5 + sqrt(2 ln 10 / 4)
    const UCB_P9_100_1000: f64 = 1.2716922188849837; // 0.9 + sqrt(2 ln 1000 / 100)
    const TOL: f64 = 1e-9;

    #[test]
    fn ucb_matches_reference_values() {
        let v = ucb_score(Some(0.5), 4, 10).unwrap();
        assert!((v - UCB_HALF_4_10).abs() / UCB_HALF_4_10 < TOL, "{v}");
        let v = ucb_score(Some(0.9), 100, 1000).unwrap();
        assert!((v - UCB_P9_100_1000).abs() / UCB_P9_100_1000 < TOL, "{v}");
        // ln(1) = 0, so the bonus vanishes at round 1.
        assert_eq!(ucb_score(Some(0.0), 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn unvisited_scores_infinity() {
        assert_eq!(ucb_score(None, 0, 5).unwrap(), f64::INFINITY);
    }

    #[test]
    fn ucb_rejects_bad_inputs() {
        assert!(ucb_score(Some(0.5), 4, 0).is_err());
        assert!(ucb_score(Some(0.5), 0, 3).is_err());
        assert!(ucb_score(None, 4, 3).is_err());
        assert!(ucb_score(Some(1.5), 4, 3).is_err());
    }

    #[test]
    fn unvisited_wins_then_created_round_then_id() {
        let stats = vec![
            visited("b", 4, 3, 2), // mean 0.75
            ArmStats::new(ArmId::from("a"), 5),
            visited("c", 4, 3, 3), // same mean, younger
        ];
        let sel = select_top_k(&stats, 9, 2).unwrap();
        assert_eq!(sel.chosen, vec![ArmId::from("a"), ArmId::from("b")]);
        assert!(sel.scores[&ArmId::from("a")].is_infinite());
        assert_eq!(sel.scores.len(), 3);
    }

    #[test]
    fn equal_everything_breaks_on_arm_id() {
        let stats = vec![visited("z", 4, 2, 1), visited("y", 4, 2, 1)];
        let sel = select_top_k(&stats, 5, 1).unwrap();
        assert_eq!(sel.chosen, vec![ArmId::from("y")]);
    }

    #[test]
    fn k_larger_than_arm_set_returns_all() {
        let stats = vec![visited("a", 1, 0, 1), visited("b", 1, 1, 1)];
        let sel = select_top_k(&stats, 2, 10).unwrap();
        assert_eq!(sel.chosen.len(), 2);
    }

    #[test]
    fn selection_rejects_empty_zero_k_and_duplicates() {
        assert!(select_top_k(&[], 1, 1).is_err());
        let stats = vec![visited("a", 1, 0, 1)];
        assert!(select_top_k(&stats, 1, 0).is_err());
        let dup = vec![visited("a", 1, 0, 1), visited("a", 2, 1, 1)];
        assert!(select_top_k(&dup, 1, 1).is_err());
    }

    #[test]
    fn record_samples_counts_true_labels() {
        let s = visited("a", 12, 6, 1);
        let next = record_samples(&s, &[false; 12]).unwrap();
        assert_eq!((next.sample_count, next.label_sum), (24, 6));
        let next = record_samples(&next, &[true, true, false]).unwrap();
        assert_eq!((next.sample_count, next.label_sum), (27, 8));
        assert!(record_samples(&s, &[]).is_err());
    }

    #[test]
    fn score_serde_handles_infinity() {
        let json = serde_json::to_string(&Score(f64::INFINITY)).unwrap();
        assert_eq!(json, "\"inf\"");
        let back: Score = serde_json::from_str(&json).unwrap();
        assert!(back.is_infinite());
        let finite: Score = serde_json::from_str("0.625").unwrap();
        assert_eq!(finite.0, 0.625);
        assert!(serde_json::from_str::<Score>("\"huge\"").is_err());
    }

    #[test]
    fn selection_result_serialization_is_stable() {
        let stats = vec![
            visited("b", 4, 3, 2),
            ArmStats::new(ArmId::from("a"), 5),
            visited("c", 8, 1, 3),
        ];
        let one = serde_json::to_string(&select_top_k(&stats, 9, 2).unwrap()).unwrap();
        let two = serde_json::to_string(&select_top_k(&stats, 9, 2).unwrap()).unwrap();
        assert_eq!(one, two);
        let back: SelectionResult = serde_json::from_str(&one).unwrap();
        assert_eq!(back, select_top_k(&stats, 9, 2).unwrap());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// More samples at the same mean and round strictly shrink the score.
            #[test]
            fn score_decreases_in_samples(
                mean in 0.0f64..=1.0,
                n1 in 1u64..500,
                extra in 1u64..500,
                round in 2u64..10_000,
            ) {
                let lo = ucb_score(Some(mean), n1 + extra, round).unwrap();
                let hi = ucb_score(Some(mean), n1, round).unwrap();
                prop_assert!(hi > lo);
            }

            /// Later rounds at the same statistics strictly grow the score.
            #[test]
            fn score_increases_in_round(
                mean in 0.0f64..=1.0,
                n in 1u64..500,
                round in 1u64..10_000,
                jump in 1u64..1000,
            ) {
                let early = ucb_score(Some(mean), n, round).unwrap();
                let late = ucb_score(Some(mean), n, round + jump).unwrap();
                prop_assert!(late > early);
            }

            /// Unvisited arms fill the selection before any visited arm.
            #[test]
            fn unvisited_precede_visited(
                visited_means in prop::collection::vec((1u64..50, 0u64..50), 0..8),
                unvisited_count in 0usize..8,
                k in 1usize..6,
                round in 1u64..1000,
            ) {
                let mut stats = Vec::new();
                for (i, (n, sum)) in visited_means.iter().enumerate() {
                    let sum = (*sum).min(*n);
                    stats.push(ArmStats {
                        arm_id: ArmId::new(format!("v{i}")),
                        sample_count: *n,
                        label_sum: sum,
                        created_round: i as u64,
                    });
                }
                for i in 0..unvisited_count {
                    stats.push(ArmStats::new(ArmId::new(format!("u{i}")), i as u64));
                }
                prop_assume!(!stats.is_empty());
                let sel = select_top_k(&stats, round, k).unwrap();
                let chosen_unvisited = sel
                    .chosen
                    .iter()
                    .filter(|id| id.as_str().starts_with('u'))
                    .count();
                prop_assert_eq!(chosen_unvisited, unvisited_count.min(k));
            }

            /// Identical inputs serialize to identical bytes (pure selection).
            #[test]
            fn selection_is_pure(
                arms in prop::collection::vec((1u64..100, 0u64..100, 0u64..20), 1..10),
                round in 1u64..1000,
                k in 1usize..5,
            ) {
                let stats: Vec<ArmStats> = arms
                    .iter()
                    .enumerate()
                    .map(|(i, (n, sum, created))| ArmStats {
                        arm_id: ArmId::new(format!("arm{i}")),
                        sample_count: *n,
                        label_sum: (*sum).min(*n),
                        created_round: *created,
                    })
                    .collect();
                let a = serde_json::to_vec(&select_top_k(&stats, round, k).unwrap()).unwrap();
                let b = serde_json::to_vec(&select_top_k(&stats, round, k).unwrap()).unwrap();
                prop_assert_eq!(a, b);
            }

            /// Folding one batch is the same as folding it in two pieces.
            #[test]
            fn record_samples_is_associative(
                labels in prop::collection::vec(any::<bool>(), 2..40),
                split in 1usize..39,
            ) {
                prop_assume!(split < labels.len());
                let base = ArmStats::new(ArmId::from("a"), 0);
                let whole = record_samples(&base, &labels).unwrap();
                let first = record_samples(&base, &labels[..split]).unwrap();
                let second = record_samples(&first, &labels[split..]).unwrap();
                prop_assert_eq!(whole, second);
            }
        }
    }
}
