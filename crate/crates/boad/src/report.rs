//! Post-hoc reporting: turn a run's event log into flat tables.
//!
//! Everything here is derived from the log alone — the report never touches
//! live state, so it works on finished, stopped, and crashed runs alike.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::archive::{Origin, SubAgentSpec};
use crate::bandit::ArmId;
use crate::config::BackendKind;
use crate::error::{Error, Result};
use crate::events::{read_log, EventBody};
use crate::policy::ORACLE_COMBINATION_CAP;
use crate::runner::load_world;
use crate::simenv::{regret_curve, WorldArm};

/// Per-arm row of the report.
#[derive(Debug, Clone)]
pub struct ArmRow {
    pub arm_id: ArmId,
    pub name: String,
    pub origin: Origin,
    pub created_round: u64,
    pub sample_count: u64,
    pub mean: f64,
    pub times_selected: u64,
}

/// What `write_report` produced.
#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub rounds_completed: u64,
    pub arms: Vec<ArmRow>,
    pub files: Vec<PathBuf>,
    /// Per-round hindsight regret; empty when the run was not simulated.
    pub regret: Vec<f64>,
}

fn origin_label(origin: Origin) -> &'static str {
    match origin {
        Origin::Bootstrap => "bootstrap",
        Origin::CrpGenerated => "crp_generated",
        Origin::Fixture => "fixture",
    }
}

/// Summarize one event log into TSV tables under `out_dir`.
///
/// Writes `arms.tsv` (one row per arm: identity, provenance, evidence),
/// `rounds.tsv` (one row per selection: the team picked), `regret.tsv`
/// (simulated runs only: hindsight regret per round), and `summary.txt`.
pub fn write_report(log_path: &Path, out_dir: &Path) -> Result<ReportSummary> {
    let events = read_log(log_path)?;
    let cfg = match &events[0].event.body {
        EventBody::RunStart { config, .. } => config.clone(),
        _ => unreachable!("read_log guarantees run_start first"),
    };

    let mut specs: Vec<SubAgentSpec> = Vec::new();
    let mut skills_by_arm: BTreeMap<ArmId, BTreeMap<crate::simenv::Role, f64>> = BTreeMap::new();
    let mut last_stats: BTreeMap<ArmId, (u64, u64)> = BTreeMap::new();
    let mut selected: BTreeMap<ArmId, u64> = BTreeMap::new();
    // (available arms, chosen team) per selection, for hindsight regret.
    let mut round_teams: Vec<(Vec<ArmId>, Vec<ArmId>)> = Vec::new();
    let mut rounds_completed = 0u64;

    for le in &events {
        match &le.event.body {
            EventBody::Expansion { arm, skills, .. } => {
                if let Some(skills) = skills {
                    skills_by_arm.insert(arm.arm_id.clone(), skills.clone());
                }
                specs.push(arm.clone());
            }
            EventBody::Selection(sel) => {
                for id in &sel.chosen {
                    *selected.entry(id.clone()).or_default() += 1;
                }
                let available: Vec<ArmId> = specs.iter().map(|s| s.arm_id.clone()).collect();
                round_teams.push((available, sel.chosen.clone()));
            }
            EventBody::StatsUpdate { stats } => {
                rounds_completed = le.event.round;
                last_stats = stats
                    .iter()
                    .map(|s| (s.arm_id.clone(), (s.sample_count, s.label_sum)))
                    .collect();
            }
            EventBody::RunEnd { rounds_completed: n } => rounds_completed = *n,
            _ => {}
        }
    }
    if specs.is_empty() {
        return Err(Error::invalid("log holds no arms; nothing to report"));
    }

    let arms: Vec<ArmRow> = specs
        .iter()
        .map(|s| {
            let (n, sum) = last_stats.get(&s.arm_id).copied().unwrap_or((0, 0));
            ArmRow {
                arm_id: s.arm_id.clone(),
                name: s.name.clone(),
                origin: s.origin,
                created_round: s.created_round,
                sample_count: n,
                mean: if n == 0 { 0.0 } else { sum as f64 / n as f64 },
                times_selected: selected.get(&s.arm_id).copied().unwrap_or(0),
            }
        })
        .collect();

    // Hindsight regret needs the world the run was simulated against.
    let regret = if cfg.evaluation_backend == BackendKind::Simulated && !round_teams.is_empty() {
        let mut world = load_world(&cfg)?;
        for (id, skills) in &skills_by_arm {
            if world.skills(id).is_none() {
                world.register_arm(WorldArm {
                    arm_id: id.clone(),
                    skills: skills.clone(),
                })?;
            }
        }
        regret_curve(&world, cfg.k, &round_teams, ORACLE_COMBINATION_CAP)?
    } else {
        Vec::new()
    };

    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();

    let mut arms_tsv = String::from("arm_id\tname\torigin\tcreated_round\tsample_count\tmean\ttimes_selected\n");
    for row in &arms {
        writeln!(
            arms_tsv,
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{}",
            row.arm_id,
            row.name,
            origin_label(row.origin),
            row.created_round,
            row.sample_count,
            row.mean,
            row.times_selected
        )
        .expect("string write");
    }
    let arms_path = out_dir.join("arms.tsv");
    fs::write(&arms_path, arms_tsv)?;
    files.push(arms_path);

    let mut rounds_tsv = String::from("round\tteam\n");
    for (i, (_, chosen)) in round_teams.iter().enumerate() {
        let team: Vec<&str> = chosen.iter().map(|id| id.as_str()).collect();
        writeln!(rounds_tsv, "{}\t{}", i + 1, team.join(",")).expect("string write");
    }
    let rounds_path = out_dir.join("rounds.tsv");
    fs::write(&rounds_path, rounds_tsv)?;
    files.push(rounds_path);

    if !regret.is_empty() {
        let mut regret_tsv = String::from("round\tregret\n");
        for (i, r) in regret.iter().enumerate() {
            writeln!(regret_tsv, "{}\t{:.6}", i + 1, r).expect("string write");
        }
        let regret_path = out_dir.join("regret.tsv");
        fs::write(&regret_path, regret_tsv)?;
        files.push(regret_path);
    }

    let mut summary = String::new();
    writeln!(summary, "rounds completed: {rounds_completed}").expect("string write");
    writeln!(summary, "arms in archive: {}", arms.len()).expect("string write");
    let mut by_mean: Vec<&ArmRow> = arms.iter().filter(|a| a.sample_count > 0).collect();
    by_mean.sort_by(|a, b| {
        b.mean
            .partial_cmp(&a.mean)
            .expect("finite means")
            .then(b.sample_count.cmp(&a.sample_count))
            .then(a.arm_id.cmp(&b.arm_id))
    });
    for row in by_mean.iter().take(5) {
        writeln!(
            summary,
            "  {}  mean={:.3}  n={}  selected {}x",
            row.arm_id, row.mean, row.sample_count, row.times_selected
        )
        .expect("string write");
    }
    if !regret.is_empty() {
        let half = regret.len() / 2;
        if half > 0 {
            let early: f64 = regret[..half].iter().sum::<f64>() / half as f64;
            let late: f64 =
                regret[half..].iter().sum::<f64>() / (regret.len() - half) as f64;
            writeln!(summary, "mean regret: {early:.4} (early) -> {late:.4} (late)")
                .expect("string write");
        }
    }
    let summary_path = out_dir.join("summary.txt");
    fs::write(&summary_path, summary)?;
    files.push(summary_path);

    Ok(ReportSummary {
        rounds_completed,
        arms,
        files,
        regret,
    })
}
