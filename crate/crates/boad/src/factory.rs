//! LLM-backed creation and warm-up refinement of sub-agent designs.
//!
//! Generation runs in two stages. Stage one asks for a tool document — name,
//! signature, docstring, the single `context` argument — and stage two asks
//! for the prompt surfaces (system and instance templates) for the chosen
//! tool. Each stage parses its reply strictly and retries once with a
//! corrective reminder before giving up.
//!
//! Warm-up takes a fresh design through a few solo episodes and lets the
//! model propose targeted edits to the prompt-facing fields. Proposals pass
//! through mechanical filters (an uninvoked arm's instance template cannot
//! be blamed; structural invariants must hold) and a malformed reply skips
//! its round rather than failing the arm. Warm-up never touches statistics:
//! the bandit first sees a warmed arm as brand new.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::archive::{Origin, SubAgentSpec, CONTEXT_PLACEHOLDER, DOCSTRING_PREFIX};
use crate::bandit::ArmId;
use crate::credit::render_trajectory_text;
use crate::error::{Error, Result};
use crate::evaluation::{
    generic_plan, EvalContext, EvaluationBackend, OrchestratorPlan, TaskInstance,
};
use crate::gateway::{
    extract_single_fenced_block, render_template, ChatExchange, ChatProvider, SUBAGENT_GEN_V1,
    SUBAGENT_TEMPLATES_V1, WARMUP_REFINE_V1,
};
use crate::rng::Stream;

/// Inputs to one generation attempt.
#[derive(Debug, Clone)]
pub struct GenerationRequest {
    /// Round the new arm will be created in.
    pub round: u64,
    /// `(name, docstring)` of every design already in the archive.
    pub existing: Vec<(String, String)>,
    /// Optional guidance distilled from earlier rounds.
    pub feedback: Option<String>,
}

fn feedback_text(req: &GenerationRequest) -> String {
    if req.existing.is_empty() && req.feedback.is_none() {
        return "None yet.".to_owned();
    }
    let mut out = String::new();
    if !req.existing.is_empty() {
        out.push_str("PREVIOUS SUBAGENTS:\n");
        for (name, docstring) in &req.existing {
            out.push_str(&format!("- {name}: {docstring}\n"));
        }
    }
    if let Some(feedback) = &req.feedback {
        out.push_str(&format!("FEEDBACK FROM PREVIOUS ITERATION:\n{feedback}\n"));
    }
    out.trim_end().to_owned()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArgDoc {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    description: String,
    required: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToolDoc {
    #[allow(dead_code)] // parsed for shape checking; the signature is implied by the argument
    signature: String,
    docstring: String,
    arguments: Vec<ArgDoc>,
    subagent: bool,
}

/// Parsed and validated stage-one output.
struct ToolChoice {
    name: String,
    docstring: String,
    context_description: String,
}

fn parse_tool_doc(reply: &str) -> Result<ToolChoice> {
    let block = extract_single_fenced_block(reply)?;
    let docs: BTreeMap<String, ToolDoc> = serde_yaml::from_str(&block).map_err(|e| Error::Parse {
        what: "tool document".to_owned(),
        detail: e.to_string(),
    })?;
    let malformed = |detail: String| Error::Parse {
        what: "tool document".to_owned(),
        detail,
    };
    if docs.len() != 1 {
        return Err(malformed(format!("expected exactly one tool, found {}", docs.len())));
    }
    let (name, doc) = docs.into_iter().next().expect("one entry");
    if name.is_empty() {
        return Err(malformed("empty tool name".to_owned()));
    }
    if !doc.docstring.starts_with(DOCSTRING_PREFIX) {
        return Err(malformed(format!(
            "docstring must start with {DOCSTRING_PREFIX:?}"
        )));
    }
    if !doc.subagent {
        return Err(malformed("tool is not marked subagent: true".to_owned()));
    }
    if doc.arguments.len() != 1 {
        return Err(malformed(format!(
            "expected exactly one argument, found {}",
            doc.arguments.len()
        )));
    }
    let arg = &doc.arguments[0];
    if arg.name != "context" || arg.kind != "string" || !arg.required {
        return Err(malformed(format!(
            "the argument must be a required string named \"context\", found {} ({}, required={})",
            arg.name, arg.kind, arg.required
        )));
    }
    Ok(ToolChoice {
        name,
        docstring: doc.docstring,
        context_description: arg.description.clone(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateDoc {
    system_template: String,
    instance_template: String,
}

fn parse_template_doc(reply: &str) -> Result<TemplateDoc> {
    let block = extract_single_fenced_block(reply)?;
    let doc: TemplateDoc = serde_yaml::from_str(&block).map_err(|e| Error::Parse {
        what: "template document".to_owned(),
        detail: e.to_string(),
    })?;
    if !doc.instance_template.contains(CONTEXT_PLACEHOLDER) {
        return Err(Error::Parse {
            what: "template document".to_owned(),
            detail: format!("instance_template lacks {CONTEXT_PLACEHOLDER:?}"),
        });
    }
    Ok(doc)
}

/// Run one strict-parse stage: ask, parse; on failure remind once and parse
/// again; surface the second failure.
fn staged_exchange<T>(
    provider: &dyn ChatProvider,
    first: ChatExchange,
    reminder: &str,
    parse: impl Fn(&str) -> Result<T>,
) -> Result<T> {
    let reply = provider.complete(&first)?;
    match parse(&reply) {
        Ok(value) => Ok(value),
        Err(first_err) => {
            log::warn!("stage reply malformed, retrying once: {first_err}");
            let retry = first.assistant(reply).user(reminder.to_owned());
            let reply = provider.complete(&retry)?;
            parse(&reply).map_err(|e| Error::Parse {
                what: "generation stage".to_owned(),
                detail: format!("still malformed after retry: {e}"),
            })
        }
    }
}

const GEN_RETRY_REMINDER: &str = "Your previous reply did not follow the required format. Respond with exactly ONE fenced YAML block containing exactly one top-level tool entry, whose docstring starts with \"[subagent]\", with exactly one required string argument named \"context\", and with subagent: true.";

const TEMPLATES_RETRY_REMINDER: &str = "Your previous reply did not follow the required format. Respond with exactly ONE fenced YAML block containing the keys system_template and instance_template (literal block scalars), where instance_template includes the {{context}} placeholder.";

/// Pick the lowest-numbered free name: `name`, then `name_2`, `name_3`, ...
fn resolve_name_collision(name: &str, existing: &[(String, String)]) -> String {
    let taken = |candidate: &str| existing.iter().any(|(n, _)| n == candidate);
    if !taken(name) {
        return name.to_owned();
    }
    let mut i = 2u32;
    loop {
        let candidate = format!("{name}_{i}");
        if !taken(&candidate) {
            return candidate;
        }
        i += 1;
    }
}

/// Generate a complete new design through the two-stage protocol.
pub fn generate_subagent(
    req: &GenerationRequest,
    provider: &dyn ChatProvider,
    model: &str,
) -> Result<SubAgentSpec> {
    let mut bindings = BTreeMap::new();
    bindings.insert("PREVIOUS_ITERATION_FEEBACK", feedback_text(req));
    let gen_prompt = render_template(&SUBAGENT_GEN_V1, &bindings)?;
    let tool = staged_exchange(
        provider,
        ChatExchange::new(model).user(gen_prompt),
        GEN_RETRY_REMINDER,
        parse_tool_doc,
    )?;

    let description = format!(
        "SUBAGENT TO CONFIGURE:\nname: {}\ndocstring: {}\ncontext argument description: {}",
        tool.name, tool.docstring, tool.context_description
    );
    let mut bindings = BTreeMap::new();
    bindings.insert("PREVIOUS_ITERATION_FEEDBACK", description);
    let templates_prompt = render_template(&SUBAGENT_TEMPLATES_V1, &bindings)?;
    let templates = staged_exchange(
        provider,
        ChatExchange::new(model).user(templates_prompt),
        TEMPLATES_RETRY_REMINDER,
        parse_template_doc,
    )?;

    let name = resolve_name_collision(&tool.name, &req.existing);
    let spec = SubAgentSpec {
        arm_id: ArmId::new(name.clone()),
        name,
        docstring: tool.docstring,
        context_description: tool.context_description,
        instance_template: templates.instance_template,
        system_template: templates.system_template,
        created_round: req.round,
        origin: Origin::CrpGenerated,
    };
    spec.validate()?;
    Ok(spec)
}

/// Warm-up settings for one arm.
#[derive(Debug, Clone)]
pub struct WarmupConfig {
    /// Number of refinement episodes (one provider call each).
    pub rounds: u32,
    pub seed: u64,
    /// Optimization round the arm is being created in.
    pub round: u64,
    pub model: String,
}

/// What one warm-up round did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarmupRoundReport {
    pub warmup_round: u32,
    pub instance_id: String,
    /// Whether the episode actually produced a trajectory (false when the
    /// backend failed and the round was skipped before any model call).
    pub evaluated: bool,
    /// Fields whose proposed updates were applied.
    pub applied: Vec<String>,
    /// `field: reason` entries for proposals that were filtered out, or a
    /// round-level reason when the whole round was skipped.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct WarmupOutcome {
    pub spec: SubAgentSpec,
    pub rounds_completed: u32,
    pub history: Vec<WarmupRoundReport>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UpdatesDoc {
    updates: BTreeMap<String, String>,
}

const ALLOWED_UPDATE_FIELDS: [&str; 3] = ["docstring", "context_description", "instance_template"];

fn parse_updates(reply: &str) -> Result<BTreeMap<String, String>> {
    let block = extract_single_fenced_block(reply)?;
    let doc: UpdatesDoc = serde_yaml::from_str(&block).map_err(|e| Error::Parse {
        what: "warm-up updates".to_owned(),
        detail: e.to_string(),
    })?;
    for key in doc.updates.keys() {
        if !ALLOWED_UPDATE_FIELDS.contains(&key.as_str()) {
            return Err(Error::Parse {
                what: "warm-up updates".to_owned(),
                detail: format!("unknown field {key:?}"),
            });
        }
    }
    Ok(doc.updates)
}

/// Refine a fresh design over `cfg.rounds` solo episodes.
///
/// Each episode: pick a design-set instance (seeded by arm and round, not by
/// call order), run the arm alone under the generic plan, ask the model for
/// field updates, filter, apply. At most one provider call per episode —
/// exactly one whenever the evaluation succeeds: a malformed reply skips the
/// episode after its call, a failed evaluation before it, and there is no
/// retry either way. The returned spec carries the accumulated edits; its
/// statistics are untouched.
pub fn warmup_refine(
    spec: &SubAgentSpec,
    design_set: &[TaskInstance],
    cfg: &WarmupConfig,
    backend: &dyn EvaluationBackend,
    provider: &dyn ChatProvider,
) -> Result<WarmupOutcome> {
    if design_set.is_empty() {
        return Err(Error::invalid("warm-up needs a non-empty design set"));
    }
    let mut current = spec.clone();
    let mut history = Vec::with_capacity(cfg.rounds as usize);
    for i in 0..cfg.rounds {
        let mut report = WarmupRoundReport {
            warmup_round: i,
            instance_id: String::new(),
            evaluated: false,
            applied: Vec::new(),
            skipped: Vec::new(),
        };
        let mut pick = Stream::scoped(
            cfg.seed,
            cfg.round,
            "warmup_pick",
            &format!("{}:{i}", current.arm_id),
        );
        let instance = &design_set[pick.next_index(design_set.len())];
        report.instance_id = instance.instance_id.clone();

        let subset = vec![current.arm_id.clone()];
        let plan = OrchestratorPlan {
            plan_text: generic_plan(),
            subset,
            customized: false,
        };
        let ctx = EvalContext {
            round: cfg.round,
            label: format!("warmup:{}:{i}", current.arm_id),
        };
        let refs = [&current];
        let traj = match backend.evaluate(&ctx, &plan, &refs, instance) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("warm-up episode {i} for {} failed: {e}", current.arm_id);
                report.skipped.push(format!("round: evaluation failed: {e}"));
                history.push(report);
                continue;
            }
        };
        report.evaluated = true;

        let mut bindings = BTreeMap::new();
        bindings.insert("TRAJECTORIES", render_trajectory_text(&traj));
        let prompt = render_template(&WARMUP_REFINE_V1, &bindings)?;
        let reply = provider.complete(&ChatExchange::new(&cfg.model).user(prompt))?;
        let mut updates = match parse_updates(&reply) {
            Ok(u) => u,
            Err(e) => {
                log::warn!("warm-up reply {i} for {} malformed, skipping: {e}", current.arm_id);
                report.skipped.push(format!("round: malformed reply: {e}"));
                history.push(report);
                continue;
            }
        };

        // The instance template is only visible to the sub-agent; if the
        // sub-agent never ran, the proposal is based on nothing.
        let invoked = traj.segments.iter().any(|s| s.arm_id == current.arm_id);
        if !invoked && updates.remove("instance_template").is_some() {
            report
                .skipped
                .push("instance_template: subagent was not invoked".to_owned());
        }

        for (field, value) in updates {
            match field.as_str() {
                "docstring" => {
                    if value.starts_with(DOCSTRING_PREFIX) {
                        current.docstring = value;
                        report.applied.push(field);
                    } else {
                        report
                            .skipped
                            .push(format!("docstring: missing {DOCSTRING_PREFIX:?} prefix"));
                    }
                }
                "context_description" => {
                    current.context_description = value;
                    report.applied.push(field);
                }
                "instance_template" => {
                    if value.contains(CONTEXT_PLACEHOLDER) {
                        current.instance_template = value;
                        report.applied.push(field);
                    } else {
                        report
                            .skipped
                            .push(format!("instance_template: missing {CONTEXT_PLACEHOLDER:?}"));
                    }
                }
                _ => unreachable!("filtered by parse_updates"),
            }
        }
        history.push(report);
    }
    current.validate()?;
    Ok(WarmupOutcome {
        spec: current,
        rounds_completed: cfg.rounds,
        history,
    })
}
