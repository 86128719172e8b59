//! Per-timestep loop: perceive, pool the graph, build the prompt, ask the
//! policy, parse and execute its action, remember the decision.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CrossModalGraph, PLAYER};
use crate::memory::{DecisionRecord, MemoryError, MemoryStack, DEFAULT_RECALL_STEPS};
use crate::perception::{
    partition_observations, DetectionRecord, HotbarLayout, ObservationFrame, PerceptionConfig,
    PerceptionError,
};
use crate::policy::{Policy, PolicyError, PolicyRequest};
use crate::retrieval::{
    retrieve, textualize, PooledSubgraph, RetrievalError, TaskSpec, TextMode, TextOptions,
};
use crate::skills::{
    format_action, parse_action, ActionDecision, ExecutionReport, InputBackend, SkillError,
    SkillLibrary,
};

pub const OUTPUT_RULE: &str = "The output format must be: \"Action: skill_function(*params)\"";
pub const NOT_VISIBLE: &str = "target not currently visible";
pub const TRIVIAL: &str = "task trivially satisfied";

/// Section headers, in prompt order.
pub const SECTION_MARKERS: [&str; 8] = [
    "[task]",
    "[knowledge]",
    "[inventory]",
    "[environment]",
    "[skills]",
    "[memory]",
    "[cot]",
    "[output]",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub recall_steps: usize,
    /// Extra attempts after an unparseable reply, before falling back.
    pub max_reprompts: usize,
    pub text_mode: TextMode,
    pub perception: PerceptionConfig,
    pub hotbar: HotbarLayout,
    pub fallback: ActionDecision,
    pub max_output_tokens: u32,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            recall_steps: DEFAULT_RECALL_STEPS,
            max_reprompts: 2,
            text_mode: TextMode::NamesOnly,
            perception: PerceptionConfig::default(),
            hotbar: HotbarLayout::default(),
            fallback: ActionDecision::new("turn", [30, 0]),
            max_output_tokens: 512,
        }
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("policy failed: {0}")]
    Policy(#[from] PolicyError),
    #[error("fallback action failed: {0}")]
    Fallback(SkillError),
    #[error("execution failed: {0}")]
    Execution(SkillError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSections {
    pub task: String,
    pub knowledge: String,
    pub inventory: String,
    pub environment: String,
    pub skills: String,
    pub memory: String,
    pub cot: String,
    pub output_rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesizedPrompt {
    pub text: String,
    pub sections: PromptSections,
}

impl SynthesizedPrompt {
    pub fn token_estimate(&self) -> u64 {
        estimate_tokens(&self.text)
    }
}

pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

fn block(lines: &[String]) -> String {
    if lines.is_empty() {
        "none".into()
    } else {
        lines.join("\n")
    }
}

/// Text that entity matching scans: the task, its questions and recent decisions.
/// Knowledge and skill listings are excluded (the first is the output of pooling,
/// the second is static and names nearly every item).
pub fn emp_scan_text(task: &TaskSpec, recalled: &[DecisionRecord]) -> String {
    let mut parts = vec![task.description.clone()];
    parts.extend(task.cot_questions.iter().cloned());
    parts.extend(recalled.iter().map(DecisionRecord::line));
    parts.join("\n")
}

pub struct AgentState {
    pub timestep: u64,
    pub graph: CrossModalGraph,
    pub task: TaskSpec,
    pub memory: MemoryStack,
    pub library: Arc<SkillLibrary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub timestep: u64,
    pub pooled_nodes: usize,
    /// Estimated tokens over every prompt sent this step, reprompts included.
    pub prompt_tokens: u64,
    pub action: Option<String>,
    pub attempts: usize,
    pub fallback: bool,
    pub execution: Option<ExecutionReport>,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub report: StepReport,
    pub prompt: Option<SynthesizedPrompt>,
    pub action: Option<ActionDecision>,
    pub frame: ObservationFrame,
}

pub struct Agent {
    pub state: AgentState,
    pub config: AgentConfig,
}

impl Agent {
    pub fn new(
        graph: CrossModalGraph,
        task: TaskSpec,
        library: Arc<SkillLibrary>,
        config: AgentConfig,
    ) -> Result<Self, AgentError> {
        if !graph.contains(&task.target_name()) {
            return Err(RetrievalError::UnknownTarget(task.target.clone()).into());
        }
        let graph = graph.clear_visual_attributes();
        Ok(Self {
            state: AgentState {
                timestep: 0,
                graph,
                task,
                memory: MemoryStack::default(),
                library,
            },
            config,
        })
    }

    pub fn with_memory(mut self, memory: MemoryStack) -> Self {
        self.state.memory = memory;
        self
    }

    fn text_options(&self) -> TextOptions {
        TextOptions {
            mode: self.config.text_mode,
            hotbar: Some(self.config.hotbar),
        }
    }

    /// Environment-attributed pooled node closest (in hops) to the task target.
    fn range_subject<'a>(
        &self,
        graph: &'a CrossModalGraph,
        pooled: &PooledSubgraph,
    ) -> Option<(&'a str, &'static str)> {
        let hops = graph.hop_distances(&self.state.task.target_name());
        pooled
            .nodes
            .iter()
            .filter_map(|n| {
                let node = graph.node(n)?;
                let env = node.env_attr.as_ref()?;
                Some((
                    hops.get(n).copied().unwrap_or(usize::MAX),
                    node.name.as_str(),
                    env.range.phrase(),
                ))
            })
            .min_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)))
            .map(|(_, n, p)| (n, p))
    }

    /// Fill the prompt template from the attributed graph, frame and pooled subgraph.
    pub fn synthesize_prompt(
        &self,
        graph: &CrossModalGraph,
        frame: &ObservationFrame,
        pooled: &PooledSubgraph,
    ) -> SynthesizedPrompt {
        let task = &self.state.task;
        let text = textualize(pooled, graph, &self.text_options());
        let range = match self.range_subject(graph, pooled) {
            Some((name, phrase)) => {
                format!("The distance between the player and the {name} is {phrase} the interactable range.")
            }
            None => format!("Range: {NOT_VISIBLE}."),
        };
        let sections = PromptSections {
            task: format!(
                "The player is working on this task: {}. Pick each action from the current environment and inventory. The crosshair is at ({}, {}) on the screen. {range}",
                task.description, frame.crosshair.0, frame.crosshair.1
            ),
            knowledge: format!(
                "Known dependencies between items and behaviors that bear on the current state:\n{}",
                block(&text.knowledge())
            ),
            inventory: format!("Inventory status:\n{}", block(&text.inventory)),
            environment: format!("Environment status:\n{}", block(&text.environment)),
            skills: format!(
                "Callable actions, one function per line with its parameters and purpose:\n{}",
                self.state.library.library_text()
            ),
            memory: format!(
                "Previous decisions, newest first:\n{}",
                block(
                    &self
                        .state
                        .memory
                        .recall(self.config.recall_steps)
                        .iter()
                        .map(DecisionRecord::line)
                        .collect::<Vec<_>>()
                )
            ),
            cot: format!("Work through these questions before choosing:\n{}", block(&task.cot_questions)),
            output_rule: format!("Then pick the single best next action and compute its parameters. {OUTPUT_RULE}"),
        };
        let body = [
            &sections.task,
            &sections.knowledge,
            &sections.inventory,
            &sections.environment,
            &sections.skills,
            &sections.memory,
            &sections.cot,
            &sections.output_rule,
        ];
        let text = SECTION_MARKERS
            .iter()
            .zip(body)
            .map(|(m, b)| format!("{m}\n{b}\n"))
            .collect::<Vec<_>>()
            .join("\n");
        SynthesizedPrompt { text, sections }
    }

    /// Run one perception → decision → action cycle.
    pub fn step(
        &mut self,
        detections: &[DetectionRecord],
        policy: &mut dyn Policy,
        env: &mut dyn InputBackend,
    ) -> Result<StepOutcome, AgentError> {
        let t = self.state.timestep;
        let mut frame =
            partition_observations(detections, &self.state.graph, &self.config.perception)?;
        frame.timestep = t;
        let (graph, _) = self.state.graph.embed_visual_attributes(&frame);
        self.state.graph = graph;

        if self.state.task.target_name() == PLAYER {
            self.state
                .memory
                .push(DecisionRecord::new(t, "(none)").with_note(TRIVIAL))?;
            self.state.timestep += 1;
            return Ok(StepOutcome {
                report: StepReport {
                    timestep: t,
                    pooled_nodes: 1,
                    prompt_tokens: 0,
                    action: None,
                    attempts: 0,
                    fallback: false,
                    execution: None,
                    note: Some(TRIVIAL.into()),
                },
                prompt: None,
                action: None,
                frame,
            });
        }

        let recalled = self.state.memory.recall(self.config.recall_steps);
        let scan = emp_scan_text(&self.state.task, &recalled);
        let pooled = retrieve(&self.state.graph, &self.state.task, &scan)?;
        let prompt = self.synthesize_prompt(&self.state.graph, &frame, &pooled);

        let mut tokens = 0;
        let mut attempts = 0;
        let mut last_err = None;
        let mut decision = None;
        let mut text = prompt.text.clone();
        while attempts <= self.config.max_reprompts {
            attempts += 1;
            tokens += estimate_tokens(&text);
            let req = PolicyRequest {
                prompt: text.clone(),
                max_output: self.config.max_output_tokens,
                task_id: self.state.task.id.clone(),
                timestep: t,
            };
            let resp = policy.decide(&req)?;
            match parse_action(&resp.text, &self.state.library) {
                Ok(a) => {
                    decision = Some(a);
                    break;
                }
                Err(e) => {
                    text = format!(
                        "{}\nYour previous reply could not be used ({e}). Answer again with exactly one action line.\n",
                        prompt.text
                    );
                    last_err = Some(e);
                }
            }
        }

        let fallback = decision.is_none();
        let action = decision.unwrap_or_else(|| self.config.fallback.clone());
        let execution = self.state.library.execute(&action, env).map_err(|e| {
            if fallback {
                AgentError::Fallback(e)
            } else {
                AgentError::Execution(e)
            }
        })?;
        let mut notes = Vec::new();
        if let (true, Some(e)) = (fallback, &last_err) {
            notes.push(format!(
                "fallback after {attempts} unusable replies: {}",
                sanitize(&e.to_string())
            ));
        }
        notes.extend(summarize_notes(&execution.notes));
        let note = (!notes.is_empty()).then(|| notes.join("; "));

        let action_text = format_action(&action);
        let mut record = DecisionRecord::new(t, action_text.clone());
        if let Some(n) = &note {
            record = record.with_note(n.clone());
        }
        self.state.memory.push(record)?;
        self.state.timestep += 1;

        Ok(StepOutcome {
            report: StepReport {
                timestep: t,
                pooled_nodes: pooled.nodes.len(),
                prompt_tokens: tokens,
                action: Some(action_text),
                attempts,
                fallback,
                execution: Some(execution),
                note,
            },
            prompt: Some(prompt),
            action: Some(action),
            frame,
        })
    }
}

/// Keep the action marker out of memory notes so recalled lines hold exactly one action.
fn sanitize(s: &str) -> String {
    s.replace("Action:", "action marker")
}

/// Drop cursor bookkeeping from GUI scripts; keep outcomes.
fn summarize_notes(notes: &[String]) -> Vec<String> {
    notes
        .iter()
        .filter(|n| {
            let chatter = ["picked up", "merged", "swapped", "nothing to pick up"];
            let placed_count = n
                .strip_prefix("placed ")
                .is_some_and(|r| r.starts_with(|c: char| c.is_ascii_digit()));
            !placed_count && !chatter.iter().any(|c| n.starts_with(c))
        })
        .map(|n| sanitize(n))
        .collect()
}
