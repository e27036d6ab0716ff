//! Release gate: every check this crate must pass before shipping, one test
//! per criterion, each printing a single `[PASS]`/`[FAIL]` line (visible
//! with `--nocapture`). Failures carry the measured numbers.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, resume_unwind};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use boad::archive::{crp_expansion_decision, rank_arms, Archive, Origin, RankMetric, SubAgentSpec};
use boad::bandit::{select_top_k, ucb_score, ArmId, ArmStats};
use boad::credit::{
    build_credit_report, judge_trajectory, CreditMetric, JudgeKind, LlmJudge, OracleJudge,
};
use boad::evaluation::{build_orchestrator_plan, Actor, RoundRecord, Step, TaskInstance, Trajectory};
use boad::factory::{generate_subagent, GenerationRequest};
use boad::gateway::{
    render_template, SequenceProvider, HELPFUL_JUDGE_V1, ORCHESTRATOR_PLAN_V1, SUBAGENT_GEN_V1,
    SUBAGENT_TEMPLATES_V1, WARMUP_REFINE_V1,
};
use boad::policy::{mean_regret, run_policy, Policy, SimRunConfig, SimRunResult};
use boad::rng::Stream;
use boad::simenv::{builtin_world, expected_success, simulate_trajectory};

fn criterion<F: FnOnce() + std::panic::UnwindSafe>(name: &str, f: F) {
    match catch_unwind(f) {
        Ok(()) => eprintln!("[PASS] {name}"),
        Err(cause) => {
            eprintln!("[FAIL] {name}");
            resume_unwind(cause);
        }
    }
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn ucb_determinism() {
    criterion("ucb_determinism", || {
        let start = Instant::now();

        assert!(ucb_score(None, 0, 5).unwrap().is_infinite());
        assert_eq!(ucb_score(Some(0.0), 1, 1).unwrap(), 0.0);
        // Frozen from an independent high-precision evaluation of
        // 0.5 + sqrt(2 ln 10 / 4).
        let got = ucb_score(Some(0.5), 4, 10).unwrap();
        let expected = 1.572_983_013_144_674_f64;
        assert!(
            ((got - expected) / expected).abs() < 1e-9,
            "ucb(0.5, 4, 10) = {got}, expected {expected}"
        );

        // Unvisited arm outranks everything.
        let stats = vec![stat("a", 1, 0, 0), stat("b", 1, 5, 4), stat("c", 1, 5, 3)];
        let sel = select_top_k(&stats, 6, 2).unwrap();
        assert_eq!(ids(&sel.chosen), ["a", "b"]);

        // Two unvisited arms: creation order decides, no randomness.
        let stats = vec![stat("a", 1, 0, 0), stat("b", 2, 0, 0)];
        let sel = select_top_k(&stats, 1, 1).unwrap();
        assert_eq!(ids(&sel.chosen), ["a"]);

        // k beyond the archive clamps.
        let stats = vec![stat("a", 1, 2, 1), stat("b", 1, 2, 1), stat("c", 1, 2, 1)];
        let sel = select_top_k(&stats, 9, 5).unwrap();
        assert_eq!(sel.chosen.len(), 3);

        assert!(start.elapsed() < Duration::from_secs(1), "took {:?}", start.elapsed());
    });
}

fn stat(id: &str, created: u64, n: u64, ones: u64) -> ArmStats {
    let mut s = ArmStats::new(ArmId::new(id), created);
    s.sample_count = n;
    s.label_sum = ones;
    s
}

fn ids(chosen: &[ArmId]) -> Vec<&str> {
    chosen.iter().map(|a| a.as_str()).collect()
}

// ------------------------------------------------------------ criteria 2 & 3

/// Twenty long bandit runs on the calibration world, shared between the
/// concentration and regret criteria; the `Duration` is the cost of all 20.
fn long_runs() -> &'static (Vec<SimRunResult>, Duration) {
    static RUNS: OnceLock<(Vec<SimRunResult>, Duration)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let world = builtin_world("acceptance").unwrap();
        let start = Instant::now();
        let runs = (0..20)
            .map(|seed| {
                run_policy(
                    &world,
                    &SimRunConfig {
                        policy: Policy::Ucb,
                        rounds: 2000,
                        expansion: false,
                        seed,
                        ..SimRunConfig::default()
                    },
                )
                .unwrap()
            })
            .collect();
        (runs, start.elapsed())
    })
}

#[test]
fn best_team_concentration() {
    criterion("best_team_concentration", || {
        let world = builtin_world("acceptance").unwrap();
        // Independent ranking: each arm's solo expected success.
        let mut solo: Vec<(ArmId, f64)> = world
            .arms
            .iter()
            .map(|a| {
                let v = expected_success(&world, &[a.arm_id.clone()]).unwrap();
                (a.arm_id.clone(), v)
            })
            .collect();
        solo.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let best: BTreeSet<&ArmId> = solo.iter().take(3).map(|(id, _)| id).collect();

        let (runs, elapsed) = long_runs();
        let hits = runs
            .iter()
            .filter(|r| {
                let mut counts: Vec<(&ArmId, u64)> =
                    r.selection_counts.iter().map(|(a, n)| (a, *n)).collect();
                counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
                let top: BTreeSet<&ArmId> = counts.iter().take(3).map(|(a, _)| *a).collect();
                top == best
            })
            .count();
        assert!(
            hits >= 18,
            "top-3 selection counts matched the top-3 solo contributors in only {hits}/20 runs"
        );
        assert!(*elapsed < Duration::from_secs(30), "20 runs took {elapsed:?}");
    });
}

#[test]
fn regret_decrease() {
    criterion("regret_decrease", || {
        let (runs, _) = long_runs();
        let hits = runs
            .iter()
            .filter(|r| {
                let early = mean_regret(&r.rounds, 1, 200);
                let late = mean_regret(&r.rounds, 1801, 2000);
                late < 0.5 * early
            })
            .count();
        assert!(
            hits >= 18,
            "late-phase regret fell below half the early-phase level in only {hits}/20 runs"
        );
    });
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn archive_growth_calibration() {
    criterion("archive_growth_calibration", || {
        let start = Instant::now();
        const REPS: u64 = 1000;
        const ROUNDS: u64 = 100;
        const THETA: f64 = 2.0;
        const BOOTSTRAP: f64 = 3.0;

        // Subject: the shipped decision rule fed by its own seeded streams.
        let subject = |seed: u64| -> f64 {
            let mut size = BOOTSTRAP as usize;
            let mut added = 0u64;
            for t in 1..=ROUNDS {
                let draw = Stream::named(seed, t, "expansion").next_f64();
                if crp_expansion_decision(THETA, size, draw).unwrap() {
                    size += 1;
                    added += 1;
                }
            }
            added as f64
        };

        // Oracle: the same growth process stepped with an independently
        // coded generator (64-bit LCG), sharing no code with the subject.
        let oracle = |seed: u64| -> f64 {
            let mut state = seed
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            let mut size = BOOTSTRAP;
            let mut added = 0u64;
            for _ in 0..ROUNDS {
                state = state
                    .wrapping_mul(6_364_136_223_846_793_005)
                    .wrapping_add(1_442_695_040_888_963_407);
                let draw = (state >> 11) as f64 / (1u64 << 53) as f64;
                if draw < THETA / (THETA + size) {
                    size += 1.0;
                    added += 1;
                }
            }
            added as f64
        };

        let mean_se = |samples: &[f64]| {
            let n = samples.len() as f64;
            let mean = samples.iter().sum::<f64>() / n;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        };
        let subj: Vec<f64> = (0..REPS).map(subject).collect();
        let orac: Vec<f64> = (0..REPS).map(oracle).collect();
        let (m_subj, se_subj) = mean_se(&subj);
        let (m_orac, se_orac) = mean_se(&orac);
        let tol = 3.0 * (se_subj.powi(2) + se_orac.powi(2)).sqrt();
        assert!(
            (m_subj - m_orac).abs() <= tol,
            "growth means diverge: subject {m_subj:.3} vs oracle {m_orac:.3} (3se = {tol:.3})"
        );
        assert!(
            (15.0..=25.0).contains(&m_subj),
            "mean arms added over {ROUNDS} rounds was {m_subj:.3}, outside [15, 25]"
        );
        assert!(start.elapsed() < Duration::from_secs(10), "took {:?}", start.elapsed());
    });
}

// ---------------------------------------------------------------- criterion 5

fn plain_spec(id: &str) -> SubAgentSpec {
    SubAgentSpec {
        arm_id: ArmId::new(id),
        name: id.to_owned(),
        docstring: format!("[subagent] Evaluation stand-in for {id}."),
        context_description: "Self-contained task description.".to_owned(),
        instance_template: "Task:\n{{context}}\nReport via submit_subagent.".to_owned(),
        system_template: "You are a specialist sub-agent.\n{{command_docs}}\n{{problem_statement}}"
            .to_owned(),
        created_round: 0,
        origin: Origin::Fixture,
    }
}

#[test]
fn free_rider_separation() {
    criterion("free_rider_separation", || {
        let world = builtin_world("free_rider").unwrap();
        let specs: Vec<SubAgentSpec> = world
            .arms
            .iter()
            .map(|a| plain_spec(a.arm_id.as_str()))
            .collect();
        let refs: Vec<&SubAgentSpec> = specs.iter().collect();
        let subset: Vec<ArmId> = specs.iter().map(|s| s.arm_id.clone()).collect();
        let free_rider = ArmId::new("free_rider");
        let required = world.tasks[0].required.clone();
        let provider = SequenceProvider::new(Vec::<String>::new());
        let plan = build_orchestrator_plan(&refs, false, &provider, "m").unwrap();

        const EPISODES: usize = 50;
        for seed in 0..20u64 {
            let trajectories: Vec<Trajectory> = (0..EPISODES)
                .map(|i| {
                    let instance = TaskInstance {
                        instance_id: format!("fr_{i:02}"),
                        problem_statement: "Resolve the reported defect.".to_owned(),
                        repo_ref: "task:0".to_owned(),
                        max_steps: 8,
                    };
                    let mut rng =
                        Stream::scoped(seed, 1, "free_rider_gate", &instance.instance_id);
                    simulate_trajectory(&world, &refs, &required, &instance, &mut rng).unwrap()
                })
                .collect();
            let successes = trajectories.iter().filter(|t| t.success).count();
            let record = RoundRecord {
                round: 1,
                subset: subset.clone(),
                plan: plan.clone(),
                trajectories,
                credit: None,
            };

            // Hindsight helpfulness: the idle arm is labeled unhelpful in
            // every single trajectory.
            let helpful =
                build_credit_report(&record, &refs, CreditMetric::Helpfulness, Some(&OracleJudge))
                    .unwrap();
            let labels = helpful.labels_for(&free_rider);
            assert_eq!(labels.len(), EPISODES);
            assert!(
                labels.iter().all(|l| !*l),
                "seed {seed}: free rider got a positive hindsight label"
            );
            assert_eq!(helpful.per_arm_score[&free_rider], 0.0);

            // Success-rate proxy: the same arm inherits the team's success
            // rate wholesale.
            let proxy =
                build_credit_report(&record, &refs, CreditMetric::SuccessRate, None).unwrap();
            let rate = successes as f64 / EPISODES as f64;
            assert_eq!(proxy.per_arm_score[&free_rider], rate, "seed {seed}");
            assert!(
                rate > 0.4,
                "seed {seed}: team success rate {rate} not above 0.4"
            );
        }
    });
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn ucb_beats_evolution_at_equal_budget() {
    criterion("ucb_beats_evolution_at_equal_budget", || {
        let start = Instant::now();
        let world = builtin_world("acceptance").unwrap();
        let mut wins = 0;
        for seed in 0..20u64 {
            let ucb = run_policy(
                &world,
                &SimRunConfig { seed, ..SimRunConfig::default() },
            )
            .unwrap();
            let evo = run_policy(
                &world,
                &SimRunConfig {
                    policy: Policy::Evolution,
                    seed,
                    ..SimRunConfig::default()
                },
            )
            .unwrap();
            if ucb.exported_value >= evo.exported_value {
                wins += 1;
            }
        }
        assert!(
            wins >= 14,
            "bandit optimization beat the evolutionary baseline in only {wins}/20 seeds"
        );
        assert!(start.elapsed() < Duration::from_secs(60), "took {:?}", start.elapsed());
    });
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn offline_run_resumes_byte_identically() {
    criterion("offline_run_resumes_byte_identically", || {
        let start = Instant::now();
        let bin = env!("CARGO_BIN_EXE_boad");
        let base = tempfile::tempdir().unwrap();
        let full = base.path().join("full");
        let staged = base.path().join("staged");
        // A planted credential: it must never reach any artifact on disk.
        let secret = "acceptance-planted-credential-314159";

        let run = |args: &[&str]| {
            let out = Command::new(bin)
                .args(args)
                .env("BOAD_API_KEY", secret)
                .env("BOAD_API_BASE", "http://127.0.0.1:9/unused")
                .output()
                .unwrap();
            assert!(
                out.status.success(),
                "boad {args:?} failed:\n{}",
                String::from_utf8_lossy(&out.stderr)
            );
        };
        run(&["optimize", "--out", full.to_str().unwrap()]);
        run(&["optimize", "--out", staged.to_str().unwrap(), "--stop-after", "10"]);
        let staged_log = staged.join("events.jsonl");
        run(&["optimize", "--resume", staged_log.to_str().unwrap()]);

        for file in ["events.jsonl", "archive.json", "export.json"] {
            let a = std::fs::read(full.join(file)).unwrap();
            let b = std::fs::read(staged.join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between the full and resumed runs");
        }
        for dir in [&full, &staged] {
            for entry in std::fs::read_dir(dir).unwrap() {
                let path = entry.unwrap().path();
                let bytes = std::fs::read(&path).unwrap();
                assert!(
                    !String::from_utf8_lossy(&bytes).contains(secret),
                    "credential found in {}",
                    path.display()
                );
            }
        }
        assert!(start.elapsed() < Duration::from_secs(60), "took {:?}", start.elapsed());
    });
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn bundled_archive_ranking_regression() {
    criterion("bundled_archive_ranking_regression", || {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/subagent_catalog.json");
        let archive = Archive::restore(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(archive.len(), 20);
        let top = rank_arms(&archive, RankMetric::HelpfulnessMean, 2).unwrap();
        let names: Vec<&str> = top.iter().map(|r| r.arm_id.as_str()).collect();
        assert_eq!(names, ["issue_analyzer", "code_navigator"]);
        assert!(
            (top[0].mean - 0.982).abs() < 5e-4,
            "issue_analyzer mean {} does not round to 0.982",
            top[0].mean
        );
        assert!(
            (top[1].mean - 0.933).abs() < 5e-4,
            "code_navigator mean {} does not round to 0.933",
            top[1].mean
        );
    });
}

// ---------------------------------------------------------------- criterion 9

const TEMPLATES_BINDING: &str = "SUBAGENT TO CONFIGURE:\n\
name: patch_editor\n\
docstring: [subagent] Fixes a specific part of code that has errors.\n\
context argument description: File path, lines, and a description of the defect.";

const OVERVIEW_BINDING: &str = "- name: issue_localizer — Identify files and code regions relevant to the issue.\n\
- name: code_tester — Run tests to verify the fix.";

const TRAJ_BINDING: &str = "=== Trajectory for instance design_000 ===\n\
step 0 [orchestrator] plan: working design_000 with team of 1\n\
step 1 [subagent patch_editor] invoke patch_editor: patch_editor achieved: edit\n\
step 2 [orchestrator] submit: all required capabilities covered";

/// Stage-one generation reply: prose followed by one fenced tool document.
const SAMPLE_TOOL_REPLY: &str = r#"It may be useful to have a patch editor subagent. This would go well with previous subagents and help the main agent more efficiently patch the issue.
```yaml
patch_editor:
  signature: "patch_editor <context>"
  docstring: "[subagent] Fixes a specific part of code that has errors. Outputs the changes made with reasoning. After calling, the correct changes are already implemented in the repository."
  arguments:
    - name: context
      type: string
      description: "A string containing the specific file path to make edits in, the lines where edits need to be made, a comprehensive description of the issue with the code (do not assume the subagent has any information about the repository or problem statement), and what to edit."
      required: true
  subagent: true
```"#;

const SAMPLE_TEMPLATES_REPLY: &str = r#"The templates keep the worker focused on its single edit.
```yaml
system_template: |
  You are a code-patching specialist.
  Call submit_subagent when the edit is complete.
instance_template: |-
  Edit request:
  {{context}}
  Apply the change and report what was modified.
```"#;

const SAMPLE_JUDGE_REPLY: &str = r#"```yaml
helpful: true
reasoning: |
  The tool produced the edit the final patch used.
```"#;

#[test]
fn prompt_protocol_conformance() {
    criterion("prompt_protocol_conformance", || {
        // Golden renders: each asset against its frozen bindings must
        // reproduce the checked-in prompt byte for byte. The goldens were
        // produced by an independent plain-text substitution.
        let renders: Vec<(&str, String, &str)> = vec![
            (
                "subagent_gen_v1",
                render_template(
                    &SUBAGENT_GEN_V1,
                    &BTreeMap::from([("PREVIOUS_ITERATION_FEEBACK", "None yet.".to_owned())]),
                )
                .unwrap(),
                include_str!("golden/subagent_gen_v1.golden.txt"),
            ),
            (
                "subagent_templates_v1",
                render_template(
                    &SUBAGENT_TEMPLATES_V1,
                    &BTreeMap::from([(
                        "PREVIOUS_ITERATION_FEEDBACK",
                        TEMPLATES_BINDING.to_owned(),
                    )]),
                )
                .unwrap(),
                include_str!("golden/subagent_templates_v1.golden.txt"),
            ),
            (
                "orchestrator_plan_v1",
                render_template(
                    &ORCHESTRATOR_PLAN_V1,
                    &BTreeMap::from([("subagents_overview", OVERVIEW_BINDING.to_owned())]),
                )
                .unwrap(),
                include_str!("golden/orchestrator_plan_v1.golden.txt"),
            ),
            (
                "warmup_refine_v1",
                render_template(
                    &WARMUP_REFINE_V1,
                    &BTreeMap::from([("TRAJECTORIES", TRAJ_BINDING.to_owned())]),
                )
                .unwrap(),
                include_str!("golden/warmup_refine_v1.golden.txt"),
            ),
            (
                "helpful_judge_v1",
                render_template(
                    &HELPFUL_JUDGE_V1,
                    &BTreeMap::from([
                        ("TRAJECTORIES", TRAJ_BINDING.to_owned()),
                        ("TOOL_NAME", "patch_editor".to_owned()),
                    ]),
                )
                .unwrap(),
                include_str!("golden/helpful_judge_v1.golden.txt"),
            ),
        ];
        for (name, rendered, golden) in &renders {
            assert_eq!(rendered, golden, "render of {name} diverges from its golden prompt");
        }

        // The generation parser accepts the documented sample exchange.
        let provider = SequenceProvider::new([SAMPLE_TOOL_REPLY, SAMPLE_TEMPLATES_REPLY]);
        let req = GenerationRequest { round: 1, existing: Vec::new(), feedback: None };
        let spec = generate_subagent(&req, &provider, "m").unwrap();
        assert_eq!(spec.name, "patch_editor");
        assert!(spec
            .docstring
            .starts_with("[subagent] Fixes a specific part of code that has errors."));
        assert!(spec.instance_template.contains("{{context}}"));

        // And rejects the malformed variants, even after its one retry.
        let two_docs = format!("{SAMPLE_TOOL_REPLY}\n```yaml\nsecond_tool: {{}}\n```");
        let no_prefix = SAMPLE_TOOL_REPLY.replace("[subagent] ", "");
        let extra_arg = SAMPLE_TOOL_REPLY.replace(
            "  subagent: true",
            "    - name: extra\n      type: string\n      description: \"x\"\n      required: true\n  subagent: true",
        );
        for bad in [two_docs.as_str(), "no fenced document here", no_prefix.as_str(), extra_arg.as_str()] {
            let provider = SequenceProvider::new([bad, bad]);
            assert!(
                generate_subagent(&req, &provider, "m").is_err(),
                "malformed generation reply was accepted: {bad:.60}"
            );
        }

        // The judge parser accepts the documented verdict shape…
        let spec = plain_spec("patch_editor");
        let traj = Trajectory {
            instance_id: "design_000".to_owned(),
            subset: vec![spec.arm_id.clone()],
            steps: vec![Step {
                actor: Actor::Orchestrator,
                action: "plan".to_owned(),
                observation: "working design_000".to_owned(),
            }],
            segments: Vec::new(),
            submitted: true,
            success: false,
            ground_truth: None,
        };
        let provider = SequenceProvider::new([SAMPLE_JUDGE_REPLY]);
        let judge = LlmJudge::new(&provider, "m");
        let label = judge_trajectory(&judge, &traj, &spec).unwrap();
        assert!(label.label);
        assert_eq!(label.judge_kind, JudgeKind::Llm);

        // …and refuses a reply with no verdict, after its one retry.
        let provider = SequenceProvider::new(["no verdict here", "still prose"]);
        let judge = LlmJudge::new(&provider, "m");
        assert!(judge_trajectory(&judge, &traj, &spec).is_err());
    });
}
