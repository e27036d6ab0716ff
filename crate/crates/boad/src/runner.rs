//! End-to-end optimization runs: configuration in, event log + archive
//! snapshot out, with crash-safe resume and final export.
//!
//! A run is: bootstrap the archive with generated arms, then per round —
//! maybe expand, select a team, plan, evaluate the design set, judge,
//! record labels. Every state change lands in the event log before the run
//! moves on, and all randomness is keyed by `(seed, round, purpose)`, so
//! resuming a truncated log replays onto the exact byte stream the
//! uninterrupted run would have produced.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::archive::{
    crp_expansion_decision, rank_arms, Archive, RankMetric, SubAgentSpec,
};
use crate::bandit::{select_top_k, ArmId};
use crate::config::{BackendKind, ProviderKind, RunConfig};
use crate::credit::{build_credit_report, CreditMetric, LlmJudge, OracleJudge, TrajectoryJudge};
use crate::error::{Error, Result};
use crate::evaluation::{
    build_orchestrator_plan, plan_cache_key, run_round, EvaluationBackend, OrchestratorPlan,
    TaskInstance,
};
use crate::events::{read_log, EventBody, EventLog, LOG_VERSION};
use crate::factory::{generate_subagent, warmup_refine, GenerationRequest, WarmupConfig};
use crate::gateway::{ChatProvider, HttpProvider, MockProvider, ProviderConfig};
use crate::rng::Stream;
use crate::scaffold::LlmScaffoldBackend;
use crate::simenv::{builtin_world, synthesize_design_set, SimulatedBackend, WorldArm, WorldModel};

/// Event log file name inside a run directory.
pub const EVENTS_FILE: &str = "events.jsonl";
/// Archive snapshot file name inside a run directory.
pub const SNAPSHOT_FILE: &str = "archive.json";

const PLAN_TEMPLATE_VERSION: &str = "orchestrator_plan_v1";
const EXPORT_VERSION: u32 = 1;

/// What a finished (or stopped) run hands back.
pub struct RunOutcome {
    pub config: RunConfig,
    pub rounds_completed: u64,
    pub archive: Archive,
    pub log_path: PathBuf,
    pub snapshot_path: PathBuf,
}

/// Build the chat provider a config asks for.
pub fn make_provider(cfg: &RunConfig) -> Result<Box<dyn ChatProvider>> {
    match cfg.provider {
        ProviderKind::Mock => Ok(Box::new(MockProvider::new())),
        ProviderKind::Http => Ok(Box::new(HttpProvider::new(ProviderConfig::from_env()?)?)),
    }
}

/// Load the world model a config asks for (simulated backend only).
pub fn load_world(cfg: &RunConfig) -> Result<WorldModel> {
    match &cfg.world {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read world {}: {e}", path.display())))?;
            WorldModel::from_json(&text)
        }
        None => builtin_world("acceptance"),
    }
}

fn design_set(cfg: &RunConfig, world: Option<&WorldModel>) -> Result<Vec<TaskInstance>> {
    if let Some(instances) = &cfg.design_instances {
        return Ok(instances.clone());
    }
    match world {
        Some(world) => Ok(synthesize_design_set(
            world,
            cfg.design_set_size,
            cfg.seed,
            (cfg.k + 2).max(30) as u32,
        )),
        None => Err(Error::Config(
            "the llm_scaffold backend needs explicit design_instances".to_owned(),
        )),
    }
}

/// Live state of a run while it advances.
struct RunSession<'a> {
    cfg: &'a RunConfig,
    provider: &'a dyn ChatProvider,
    backend: &'a dyn EvaluationBackend,
    /// Set when the backend is simulated; used to stage generated arms.
    simulated: Option<&'a SimulatedBackend>,
    design: &'a [TaskInstance],
    archive: Archive,
    log: EventLog,
    plan_cache: HashMap<String, OrchestratorPlan>,
}

impl<'a> RunSession<'a> {
    /// Generate one arm, stage its abilities, warm it up, and admit it.
    /// Emits the warm-up trail first, then the expansion with the final
    /// (post-warm-up) design — replay needs only the expansion events.
    fn create_arm(&mut self, round: u64) -> Result<()> {
        let existing: Vec<(String, String)> = self
            .archive
            .arms()
            .iter()
            .map(|a| (a.name.clone(), a.docstring.clone()))
            .collect();
        let req = GenerationRequest { round, existing, feedback: None };
        let spec = generate_subagent(&req, self.provider, &self.cfg.model)?;

        let skills = match self.simulated {
            Some(sim) => {
                let skills = if sim.has_arm(&spec.arm_id) {
                    // A catalog arm of the same name is already live; the
                    // generated design plays with its ability table.
                    sim.world().skills(&spec.arm_id).expect("present").clone()
                } else {
                    let skills = {
                        let world = sim.world();
                        match world.base_skills(&spec.name) {
                            Some(s) => s.clone(),
                            None => {
                                let mut rng = Stream::scoped(
                                    self.cfg.seed,
                                    0,
                                    "new_arm_skills",
                                    spec.arm_id.as_str(),
                                );
                                world.sample_skills(&mut rng)
                            }
                        }
                    };
                    sim.register_arm(WorldArm {
                        arm_id: spec.arm_id.clone(),
                        skills: skills.clone(),
                    })?;
                    skills
                };
                Some(skills)
            }
            None => None,
        };

        let wcfg = WarmupConfig {
            rounds: self.cfg.warmup_rounds,
            seed: self.cfg.seed,
            round,
            model: self.cfg.model.clone(),
        };
        let outcome = warmup_refine(&spec, self.design, &wcfg, self.backend, self.provider)?;
        self.archive.add_arm(outcome.spec.clone())?;
        for h in &outcome.history {
            if h.evaluated {
                self.log.bump_tick();
            }
            self.log.emit(
                round,
                EventBody::WarmupUpdate {
                    arm_id: outcome.spec.arm_id.clone(),
                    warmup_round: h.warmup_round,
                    instance_id: h.instance_id.clone(),
                    applied: h.applied.clone(),
                    skipped: h.skipped.clone(),
                },
            )?;
        }
        let stamped = self
            .archive
            .get_arm(&outcome.spec.arm_id)
            .expect("just added")
            .clone();
        self.log.emit(
            round,
            EventBody::Expansion {
                arm: stamped,
                skills,
                warmup_rounds: wcfg.rounds,
            },
        )?;
        Ok(())
    }

    /// Plan for a team, reusing any plan already built for the same set of
    /// arms in the same mode. A cached plan fixes the team order too.
    fn plan_for(&mut self, chosen: &[ArmId]) -> Result<OrchestratorPlan> {
        let key = plan_cache_key(chosen, self.cfg.customized_orchestrator, PLAN_TEMPLATE_VERSION);
        if let Some(plan) = self.plan_cache.get(&key) {
            return Ok(plan.clone());
        }
        let specs: Vec<&SubAgentSpec> = chosen
            .iter()
            .map(|id| self.archive.get_arm(id).expect("chosen arms exist"))
            .collect();
        let plan = build_orchestrator_plan(
            &specs,
            self.cfg.customized_orchestrator,
            self.provider,
            &self.cfg.model,
        )?;
        self.plan_cache.insert(key, plan.clone());
        Ok(plan)
    }

    fn judge(&self) -> Option<Box<dyn TrajectoryJudge + 'a>> {
        match self.cfg.credit_metric {
            CreditMetric::SuccessRate => None,
            CreditMetric::Helpfulness => Some(match self.cfg.evaluation_backend {
                BackendKind::Simulated => Box::new(OracleJudge),
                BackendKind::LlmScaffold => {
                    Box::new(LlmJudge::new(self.provider, self.cfg.model.clone()))
                }
            }),
        }
    }

    fn run_rounds(&mut self, from: u64, to: u64) -> Result<()> {
        for t in from..=to {
            self.archive.set_round_cursor(t);
            if self.cfg.expansion_enabled {
                let draw = Stream::named(self.cfg.seed, t, "expansion").next_f64();
                if crp_expansion_decision(self.cfg.theta, self.archive.len(), draw)? {
                    if let Err(e) = self.create_arm(t) {
                        // The round proceeds with the archive as is; nothing
                        // was logged for the failed attempt.
                        log::warn!("round {t}: arm generation failed, skipping expansion: {e}");
                    }
                }
            }

            let selection = select_top_k(&self.archive.all_stats(), t, self.cfg.k)?;
            self.log.emit(t, EventBody::Selection(selection.clone()))?;

            let plan = self.plan_for(&selection.chosen)?;
            self.log.emit(t, EventBody::PlanBuilt { plan: plan.clone() })?;

            let specs: Vec<&SubAgentSpec> = plan
                .subset
                .iter()
                .map(|id| self.archive.get_arm(id).expect("subset arms exist"))
                .collect();
            let n = self.cfg.effective_instances_per_round(self.design.len());
            let record = run_round(t, &specs, &plan, &self.design[..n], self.backend)?;
            for traj in &record.trajectories {
                self.log.bump_tick();
                self.log
                    .emit(t, EventBody::TrajectoryDone { trajectory: traj.clone() })?;
            }

            let judge = self.judge();
            let report =
                build_credit_report(&record, &specs, self.cfg.credit_metric, judge.as_deref())?;
            drop(specs);
            self.log.emit(t, EventBody::Credit(report.clone()))?;
            for id in &plan.subset {
                let labels = report.labels_for(id);
                self.archive.record_labels(id, &labels)?;
            }
            self.log.emit(
                t,
                EventBody::StatsUpdate { stats: self.archive.all_stats() },
            )?;
        }
        Ok(())
    }

    fn finish(mut self, final_round: u64, log_path: &Path) -> Result<RunOutcome> {
        self.log
            .emit(final_round, EventBody::RunEnd { rounds_completed: final_round })?;
        let out_dir = log_path.parent().unwrap_or_else(|| Path::new("."));
        let snapshot_path = out_dir.join(SNAPSHOT_FILE);
        fs::write(&snapshot_path, self.archive.snapshot()?)?;
        Ok(RunOutcome {
            config: self.cfg.clone(),
            rounds_completed: final_round,
            archive: self.archive,
            log_path: log_path.to_path_buf(),
            snapshot_path,
        })
    }
}

/// Run a fresh optimization into `out_dir`, stopping early after
/// `stop_after` rounds when given. Refuses a directory that already holds a
/// run log — resume exists for that.
pub fn run_optimize(cfg: &RunConfig, out_dir: &Path, stop_after: Option<u64>) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let log_path = out_dir.join(EVENTS_FILE);
    if log_path.exists() {
        return Err(Error::invalid(format!(
            "run log {} already exists; resume it or pick a fresh directory",
            log_path.display()
        )));
    }

    let provider = make_provider(cfg)?;
    let simulated;
    let scaffold;
    let design;
    let backend: &dyn EvaluationBackend = match cfg.evaluation_backend {
        BackendKind::Simulated => {
            let world = load_world(cfg)?;
            design = design_set(cfg, Some(&world))?;
            simulated = Some(SimulatedBackend::new(world, cfg.seed)?);
            scaffold = None;
            let _ = &scaffold;
            simulated.as_ref().expect("just set")
        }
        BackendKind::LlmScaffold => {
            design = design_set(cfg, None)?;
            scaffold = Some(LlmScaffoldBackend::new(provider.as_ref(), &cfg.model));
            simulated = None;
            scaffold.as_ref().expect("just set")
        }
    };

    let mut log = EventLog::create(&log_path)?;
    log.emit(
        0,
        EventBody::RunStart {
            version: LOG_VERSION.to_owned(),
            config: cfg.clone(),
        },
    )?;

    let mut session = RunSession {
        cfg,
        provider: provider.as_ref(),
        backend,
        simulated: simulated.as_ref(),
        design: &design,
        archive: Archive::new(cfg.theta)?,
        log,
        plan_cache: HashMap::new(),
    };
    for _ in 0..cfg.bootstrap_size {
        session.create_arm(0)?;
    }
    let final_round = cfg.effective_final_round(stop_after);
    session.run_rounds(1, final_round)?;
    session.finish(final_round, &log_path)
}

/// Resume a run from its event log.
///
/// The log is truncated back to its last consistent cut — the latest
/// archive-statistics update (or completed bootstrap arm) — replayed to
/// rebuild the archive, world staging, and plan cache, and then the run
/// continues, appending the same bytes an uninterrupted run would have
/// written.
pub fn resume_run(log_path: &Path, stop_after: Option<u64>) -> Result<RunOutcome> {
    let events = read_log(log_path)?;
    let cfg = match &events[0].event.body {
        EventBody::RunStart { version, config } => {
            if version != LOG_VERSION {
                return Err(Error::CorruptLog {
                    detail: format!("log version {version:?} (this build writes {LOG_VERSION:?})"),
                    last_valid_seq: 0,
                });
            }
            config.clone()
        }
        _ => unreachable!("read_log guarantees run_start first"),
    };
    cfg.validate()?;

    // Last consistent cut: after a stats update every label of its round is
    // in the archive; after a round-0 expansion a bootstrap arm is complete.
    let keep_idx = events
        .iter()
        .rposition(|le| {
            matches!(le.event.body, EventBody::StatsUpdate { .. })
                || (le.event.round == 0 && matches!(le.event.body, EventBody::Expansion { .. }))
        })
        .unwrap_or(0);
    let kept = &events[..=keep_idx];
    let cut = kept.last().expect("kept includes run_start");
    let file = OpenOptions::new().write(true).open(log_path)?;
    file.set_len(cut.end_offset)?;
    drop(file);

    let provider = make_provider(&cfg)?;
    let simulated;
    let scaffold;
    let design;
    let backend: &dyn EvaluationBackend = match cfg.evaluation_backend {
        BackendKind::Simulated => {
            let world = load_world(&cfg)?;
            design = design_set(&cfg, Some(&world))?;
            simulated = Some(SimulatedBackend::new(world, cfg.seed)?);
            scaffold = None;
            let _ = &scaffold;
            simulated.as_ref().expect("just set")
        }
        BackendKind::LlmScaffold => {
            design = design_set(&cfg, None)?;
            scaffold = Some(LlmScaffoldBackend::new(provider.as_ref(), &cfg.model));
            simulated = None;
            scaffold.as_ref().expect("just set")
        }
    };

    let mut archive = Archive::new(cfg.theta)?;
    let mut plan_cache = HashMap::new();
    let mut bootstrap_done = 0usize;
    let mut completed_round = 0u64;
    for le in &kept[1..] {
        match &le.event.body {
            EventBody::Expansion { arm, skills, .. } => {
                archive.set_round_cursor(le.event.round);
                archive.add_arm(arm.clone())?;
                if le.event.round == 0 {
                    bootstrap_done += 1;
                }
                if let (Some(sim), Some(skills)) = (simulated.as_ref(), skills) {
                    if !sim.has_arm(&arm.arm_id) {
                        sim.register_arm(WorldArm {
                            arm_id: arm.arm_id.clone(),
                            skills: skills.clone(),
                        })?;
                    }
                }
            }
            EventBody::StatsUpdate { stats } => {
                completed_round = le.event.round;
                for row in stats {
                    archive.set_stats_totals(&row.arm_id, row.sample_count, row.label_sum)?;
                }
            }
            EventBody::PlanBuilt { plan } => {
                let key =
                    plan_cache_key(&plan.subset, plan.customized, PLAN_TEMPLATE_VERSION);
                plan_cache.insert(key, plan.clone());
            }
            _ => {}
        }
    }

    let log = EventLog::reopen(log_path, cut.event.seq + 1, cut.event.tick)?;
    let mut session = RunSession {
        cfg: &cfg,
        provider: provider.as_ref(),
        backend,
        simulated: simulated.as_ref(),
        design: &design,
        archive,
        log,
        plan_cache,
    };
    for _ in bootstrap_done..cfg.bootstrap_size {
        session.create_arm(0)?;
    }
    let final_round = cfg.effective_final_round(stop_after);
    if completed_round < final_round {
        session.run_rounds(completed_round + 1, final_round)?;
    }
    session.finish(final_round, log_path)
}

/// One arm of an export bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedArm {
    pub spec: SubAgentSpec,
    pub mean: f64,
    pub sample_count: u64,
}

/// The hand-over artifact: the run's best designs plus an orchestration
/// plan for deploying them together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportBundle {
    pub version: u32,
    pub generated_at_round: u64,
    pub metric: RankMetric,
    pub arms: Vec<ExportedArm>,
    pub plan: OrchestratorPlan,
}

/// Rank the archive and bundle its top `k` designs for hand-over.
pub fn export_top_arms(
    archive: &Archive,
    k: usize,
    metric: RankMetric,
    customized: bool,
    provider: &dyn ChatProvider,
    model: &str,
) -> Result<ExportBundle> {
    let ranked = rank_arms(archive, metric, k)?;
    if ranked.is_empty() {
        return Err(Error::invalid("no visited arms to export"));
    }
    let arms: Vec<ExportedArm> = ranked
        .iter()
        .map(|r| ExportedArm {
            spec: archive
                .get_arm(&r.arm_id)
                .expect("ranked arms exist")
                .clone(),
            mean: r.mean,
            sample_count: r.sample_count,
        })
        .collect();
    let specs: Vec<&SubAgentSpec> = arms.iter().map(|a| &a.spec).collect();
    let plan = build_orchestrator_plan(&specs, customized, provider, model)?;
    Ok(ExportBundle {
        version: EXPORT_VERSION,
        generated_at_round: archive.round_cursor(),
        metric,
        arms,
        plan,
    })
}
