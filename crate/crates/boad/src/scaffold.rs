//! Live orchestration scaffold: an LLM plays the orchestrator, delegating to
//! sub-agents through an XML tool-call convention, and each delegation runs
//! as its own model exchange under the sub-agent's prompt surfaces.
//!
//! The scaffold never decides success; trajectories come back with
//! `success: false` and the hindsight judge supplies the training signal.
//! Transport failures are reported as transient (the evaluation loop may
//! retry the instance); malformed provider answers and protocol errors are
//! fatal for the attempt.

use std::collections::BTreeMap;

use crate::archive::SubAgentSpec;
use crate::error::Error;
use crate::evaluation::{
    Actor, BackendError, EvalContext, EvaluationBackend, OrchestratorPlan, Segment, Step,
    TaskInstance, Trajectory,
};
use crate::gateway::{substitute, ChatExchange, ChatProvider};

/// Name of the built-in command that ends an episode.
pub const SUBMIT_COMMAND: &str = "submit";

/// Name of the command a sub-agent uses to report back.
pub const SUBAGENT_SUBMIT_COMMAND: &str = "submit_subagent";

/// One parsed tool call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolCall {
    pub name: String,
    pub parameters: BTreeMap<String, String>,
}

impl ToolCall {
    pub fn context(&self) -> Option<&str> {
        self.parameters.get("context").map(String::as_str)
    }
}

/// Extract the first `<function=name>...<parameter=key>value</parameter>...
/// </function>` call from free-form model output. Text around the call is
/// ignored; a reply without a call yields `None`.
pub fn parse_first_tool_call(text: &str) -> Option<ToolCall> {
    let start = text.find("<function=")?;
    let rest = &text[start + "<function=".len()..];
    let name_end = rest.find('>')?;
    let name = rest[..name_end].trim();
    if name.is_empty() || name.contains('<') {
        return None;
    }
    let after_name = &rest[name_end + 1..];
    // A missing closing tag still parses: parameters are read to end of text.
    let body = match after_name.find("</function>") {
        Some(end) => &after_name[..end],
        None => after_name,
    };
    let mut parameters = BTreeMap::new();
    let mut cursor = body;
    while let Some(p) = cursor.find("<parameter=") {
        let after = &cursor[p + "<parameter=".len()..];
        let Some(key_end) = after.find('>') else { break };
        let key = after[..key_end].trim().to_owned();
        let value_rest = &after[key_end + 1..];
        let Some(value_end) = value_rest.find("</parameter>") else { break };
        parameters.insert(key, value_rest[..value_end].trim().to_owned());
        cursor = &value_rest[value_end + "</parameter>".len()..];
    }
    Some(ToolCall {
        name: name.to_owned(),
        parameters,
    })
}

/// Render the command documentation block the orchestrator sees: one entry
/// per sub-agent in the team plus the built-in `submit`.
pub fn format_command_docs(specs: &[&SubAgentSpec]) -> String {
    let mut out = String::from("COMMANDS:\n");
    for spec in specs {
        out.push_str(&format!(
            "{name}:\n  signature: {name} <context>\n  docstring: {doc}\n  arguments:\n    - context (string, required): {ctx}\n",
            name = spec.name,
            doc = spec.docstring,
            ctx = spec.context_description,
        ));
    }
    out.push_str(
        "submit:\n  signature: submit\n  docstring: Submit the current changes to the repository and end the episode.\n",
    );
    out
}

const CALL_CONVENTION: &str = "To run a command, end your reply with exactly one call in this format:\n<function=command_name>\n<parameter=context>the context to pass</parameter>\n</function>\n\nRules:\n- Issue exactly one command call per reply.\n- Delegate work to the subagent commands; pass each one a self-contained context (they cannot see this conversation).\n- When the issue is resolved, call submit.";

/// Documentation handed to sub-agents (bound to their templates'
/// `{{command_docs}}` slot): how to report back.
const SUBAGENT_COMMAND_DOCS: &str = "submit_subagent:\n  signature: submit_subagent <context>\n  docstring: Report your findings back to the orchestrator and finish.\n  arguments:\n    - context (string, required): Everything the orchestrator needs from your work.\n\nTo call it:\n<function=submit_subagent>\n<parameter=context>your report</parameter>\n</function>";

fn orchestrator_system(plan: &OrchestratorPlan, specs: &[&SubAgentSpec]) -> String {
    format!(
        "You are the orchestrator for a software engineering task. Follow this plan:\n\n{plan}\n\n{docs}\n{convention}",
        plan = plan.plan_text,
        docs = format_command_docs(specs),
        convention = CALL_CONVENTION,
    )
}

fn classify(e: Error) -> BackendError {
    match e {
        Error::Transport { attempts, detail } => {
            BackendError::Transient(format!("transport after {attempts} attempt(s): {detail}"))
        }
        other => BackendError::Fatal(other.to_string()),
    }
}

/// Evaluation backend that drives real (or mock) chat completions.
pub struct LlmScaffoldBackend<'a> {
    provider: &'a dyn ChatProvider,
    model: String,
}

impl<'a> LlmScaffoldBackend<'a> {
    pub fn new(provider: &'a dyn ChatProvider, model: impl Into<String>) -> LlmScaffoldBackend<'a> {
        LlmScaffoldBackend {
            provider,
            model: model.into(),
        }
    }

    /// Run one delegation: substitute the sub-agent's prompt surfaces and ask
    /// the model once. The observation is the `submit_subagent` report when
    /// the reply contains one, otherwise the raw reply.
    fn run_subagent(
        &self,
        spec: &SubAgentSpec,
        instance: &TaskInstance,
        context: &str,
    ) -> crate::error::Result<String> {
        let mut bindings = BTreeMap::new();
        bindings.insert("command_docs", SUBAGENT_COMMAND_DOCS.to_owned());
        bindings.insert("problem_statement", instance.problem_statement.clone());
        let system = substitute(&spec.system_template, &bindings);
        let mut bindings = BTreeMap::new();
        bindings.insert("context", context.to_owned());
        let user = substitute(&spec.instance_template, &bindings);
        let reply = self
            .provider
            .complete(&ChatExchange::new(&self.model).system(system).user(user))?;
        let report = match parse_first_tool_call(&reply) {
            Some(call) if call.name == SUBAGENT_SUBMIT_COMMAND => {
                call.context().unwrap_or("").to_owned()
            }
            _ => reply,
        };
        Ok(report)
    }
}

impl EvaluationBackend for LlmScaffoldBackend<'_> {
    fn evaluate(
        &self,
        _ctx: &EvalContext,
        plan: &OrchestratorPlan,
        specs: &[&SubAgentSpec],
        instance: &TaskInstance,
    ) -> std::result::Result<Trajectory, BackendError> {
        let by_name: BTreeMap<&str, &SubAgentSpec> =
            specs.iter().map(|s| (s.name.as_str(), *s)).collect();
        let mut exchange = ChatExchange::new(&self.model)
            .system(orchestrator_system(plan, specs))
            .user(instance.problem_statement.clone());
        let mut steps: Vec<Step> = Vec::new();
        let mut segments: Vec<Segment> = Vec::new();
        let mut submitted = false;

        for _ in 0..instance.max_steps {
            let reply = self.provider.complete(&exchange).map_err(classify)?;
            match parse_first_tool_call(&reply) {
                None => {
                    steps.push(Step {
                        actor: Actor::Orchestrator,
                        action: "reply without a command".to_owned(),
                        observation: "no command call found".to_owned(),
                    });
                    exchange = exchange
                        .assistant(reply)
                        .user("Reply with exactly one command call in the documented format.");
                }
                Some(call) if call.name == SUBMIT_COMMAND => {
                    steps.push(Step {
                        actor: Actor::Orchestrator,
                        action: SUBMIT_COMMAND.to_owned(),
                        observation: "changes submitted".to_owned(),
                    });
                    submitted = true;
                    break;
                }
                Some(call) => match by_name.get(call.name.as_str()) {
                    Some(spec) => {
                        let context = call.context().unwrap_or("");
                        let report = self
                            .run_subagent(spec, instance, context)
                            .map_err(classify)?;
                        segments.push(Segment {
                            arm_id: spec.arm_id.clone(),
                            start_step: steps.len(),
                            length: 1,
                        });
                        steps.push(Step {
                            actor: Actor::Subagent {
                                arm_id: spec.arm_id.clone(),
                            },
                            action: format!("invoke {}", spec.name),
                            observation: report.clone(),
                        });
                        exchange = exchange
                            .assistant(reply)
                            .user(format!("OBSERVATION:\n{report}"));
                    }
                    None => {
                        steps.push(Step {
                            actor: Actor::Orchestrator,
                            action: format!("call {}", call.name),
                            observation: "unknown command".to_owned(),
                        });
                        exchange = exchange.assistant(reply).user(format!(
                            "Unknown command {:?}. Use one of the documented commands.",
                            call.name
                        ));
                    }
                },
            }
        }

        let trajectory = Trajectory {
            instance_id: instance.instance_id.clone(),
            subset: plan.subset.clone(),
            steps,
            segments,
            submitted,
            // Success is decided by held-out verification this scaffold does
            // not have; hindsight judging works on the trajectory regardless.
            success: false,
            ground_truth: None,
        };
        crate::evaluation::validate_trajectory(&trajectory)
            .map_err(|e| BackendError::Fatal(e.to_string()))?;
        Ok(trajectory)
    }
}
