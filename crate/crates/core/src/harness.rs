//! Episode runner, retrieval benchmark, token comparison and replay checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{emp_scan_text, Agent, AgentConfig, AgentError};
use crate::graph::{CrossModalGraph, PLAYER};
use crate::perception::{parse_detections, partition_observations, PerceptionConfig, RangeConfig};
use crate::policy::{EndpointConfig, Policy, PolicyError, RemotePolicy, ScriptedPolicy};
use crate::retrieval::{
    entity_match_pool, fpr_fnr, path_search_pool, retrieve, retrieve_emp_then_psp,
    similarity_retrieve, BagOfWords, GlobalPool, PooledSubgraph, Provenance, RetrievalMetrics,
    SimilaritySelection, TaskSpec, TextMode,
};
use crate::sim::{milestone_id, RecipeTable, ScenarioConfig, SimError, Simulator, MILESTONE_ITEMS};
use crate::skills::{agent_library, InputEvent};

pub const DEFAULT_MAX_STEPS: usize = 400;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("malformed benchmark case {case}: {message}")]
    Case { case: String, message: String },
}

impl HarnessError {
    fn file(path: &Path, e: impl std::fmt::Display) -> Self {
        HarnessError::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

impl From<SimError> for HarnessError {
    fn from(e: SimError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    #[default]
    Scripted,
    Remote {
        endpoint: EndpointConfig,
    },
}

fn default_seed() -> u64 {
    7
}
fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}
fn default_recall() -> usize {
    3
}

/// Everything one episode needs. File fields default to the built-in assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub graph_file: Option<PathBuf>,
    #[serde(default)]
    pub scenario_file: Option<PathBuf>,
    #[serde(default)]
    pub tasks_file: Option<PathBuf>,
    pub task: String,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_recall")]
    pub recall_steps: usize,
    #[serde(default)]
    pub range: RangeConfig,
    #[serde(default)]
    pub text_mode: TextMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(task: &str, seed: u64) -> Self {
        Self {
            graph_file: None,
            scenario_file: None,
            tasks_file: None,
            task: task.into(),
            policy: PolicySpec::Scripted,
            seed,
            max_steps: DEFAULT_MAX_STEPS,
            recall_steps: default_recall(),
            range: RangeConfig::default(),
            text_mode: TextMode::NamesOnly,
            output_dir: None,
        }
    }

    /// Read a JSON config; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::file(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| HarnessError::file(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.graph_file,
            &mut cfg.scenario_file,
            &mut cfg.tasks_file,
            &mut cfg.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        if self.max_steps == 0 {
            return Err(HarnessError::Config("max_steps must be positive".into()));
        }
        self.range.check().map_err(HarnessError::Config)?;
        for p in [&self.graph_file, &self.scenario_file, &self.tasks_file]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(HarnessError::Config(format!(
                    "file not found: {}",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}

/// Loaded inputs of an episode.
pub struct Resources {
    pub graph: CrossModalGraph,
    pub scenario: ScenarioConfig,
    pub recipes: RecipeTable,
    pub task: TaskSpec,
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::file(path, e))
}

pub fn load_graph(path: Option<&Path>) -> Result<CrossModalGraph, HarnessError> {
    match path {
        Some(p) => CrossModalGraph::load(&read(p)?).map_err(|e| HarnessError::file(p, e)),
        None => CrossModalGraph::load(crate::assets::MINECRAFT_KG)
            .map_err(|e| HarnessError::Config(e.to_string())),
    }
}

pub fn load_tasks(path: Option<&Path>) -> Result<Vec<TaskSpec>, HarnessError> {
    match path {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| HarnessError::file(p, e)),
        None => serde_json::from_str(crate::assets::TASKS)
            .map_err(|e| HarnessError::Config(e.to_string())),
    }
}

pub fn load_scenario(path: Option<&Path>) -> Result<(ScenarioConfig, RecipeTable), HarnessError> {
    let Some(p) = path else {
        return Ok((ScenarioConfig::plains_default(), RecipeTable::builtin()));
    };
    let scenario = ScenarioConfig::from_json(&read(p)?).map_err(|e| HarnessError::file(p, e))?;
    let recipes = match &scenario.recipes {
        Some(r) => {
            let rp = p.parent().unwrap_or(Path::new(".")).join(r);
            RecipeTable::from_json(&read(&rp)?).map_err(|e| HarnessError::file(&rp, e))?
        }
        None => RecipeTable::builtin(),
    };
    Ok((scenario, recipes))
}

impl Resources {
    pub fn load(cfg: &RunConfig) -> Result<Self, HarnessError> {
        cfg.check()?;
        let graph = load_graph(cfg.graph_file.as_deref())?;
        let (scenario, recipes) = load_scenario(cfg.scenario_file.as_deref())?;
        let task = load_tasks(cfg.tasks_file.as_deref())?
            .into_iter()
            .find(|t| t.id == cfg.task)
            .ok_or_else(|| HarnessError::Config(format!("unknown task `{}`", cfg.task)))?;
        if !graph.contains(&task.target_name()) {
            return Err(HarnessError::Config(format!(
                "task target `{}` is not in the graph",
                task.target
            )));
        }
        Ok(Self {
            graph,
            scenario,
            recipes,
            task,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub timestep: u64,
    pub action: Option<String>,
    pub attempts: usize,
    pub fallback: bool,
    pub pooled_nodes: usize,
    pub prompt_tokens: u64,
    /// Input events delivered and their scripted duration.
    pub events: usize,
    pub event_ms: u64,
    pub note: Option<String>,
    pub new_milestones: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MilestoneEntry {
    pub goal: String,
    pub timestep: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    StepLimit,
    TransportFailure { message: String },
    Error { message: String },
}

impl Outcome {
    /// Process exit status for this outcome.
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::StepLimit | Outcome::Error { .. } => 1,
            Outcome::TransportFailure { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeReport {
    pub task: String,
    pub seed: u64,
    pub text_mode: TextMode,
    pub outcome: Outcome,
    pub steps: Vec<StepRecord>,
    pub milestones: Vec<MilestoneEntry>,
    /// One flag per milestone of the full tool chain.
    pub success: BTreeMap<String, bool>,
    pub task_complete: bool,
    pub total_prompt_tokens: u64,
    pub final_world_hash: String,
    pub wall_time_ms: u64,
}

impl EpisodeReport {
    /// JSON with the wall-clock field zeroed, for run-to-run comparison.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.wall_time_ms = 0;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }
}

/// Header line of a replay log; the remaining lines are input events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayHeader {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub recipes: RecipeTable,
    pub final_world_hash: String,
}

#[derive(Debug)]
pub struct Episode {
    pub report: EpisodeReport,
    pub replay: ReplayHeader,
    pub events: Vec<InputEvent>,
}

impl Episode {
    pub fn replay_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.replay).expect("header serializes") + "\n";
        for e in &self.events {
            out += &(serde_json::to_string(e).expect("event serializes") + "\n");
        }
        out
    }
}

pub fn build_policy(spec: &PolicySpec) -> Result<Box<dyn Policy>, HarnessError> {
    Ok(match spec {
        PolicySpec::Scripted => Box::new(ScriptedPolicy),
        PolicySpec::Remote { endpoint } => Box::new(
            RemotePolicy::new(endpoint.clone()).map_err(|e| HarnessError::Config(e.to_string()))?,
        ),
    })
}

/// Run one episode with the policy named in the config.
pub fn run(cfg: &RunConfig) -> Result<Episode, HarnessError> {
    let res = Resources::load(cfg)?;
    let mut policy = build_policy(&cfg.policy)?;
    run_with(cfg, res, policy.as_mut())
}

pub fn run_with(
    cfg: &RunConfig,
    res: Resources,
    policy: &mut dyn Policy,
) -> Result<Episode, HarnessError> {
    let started = Instant::now();
    let Resources {
        graph,
        scenario,
        recipes,
        task,
    } = res;
    let mut sim = Simulator::reset(cfg.seed, scenario.clone(), recipes.clone())?;
    let agent_cfg = AgentConfig {
        recall_steps: cfg.recall_steps,
        text_mode: cfg.text_mode,
        perception: PerceptionConfig {
            range: cfg.range,
            ..PerceptionConfig::default()
        },
        ..AgentConfig::default()
    };
    let goals: BTreeSet<String> = task.goals.iter().cloned().collect();
    let mut agent = Agent::new(graph, task.clone(), Arc::new(agent_library()), agent_cfg)
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let mut steps = Vec::new();
    let mut timeline = Vec::new();
    let mut seen = sim.milestones();
    let mut outcome = Outcome::StepLimit;
    let done = |seen: &BTreeSet<String>| !goals.is_empty() && goals.is_subset(seen);
    for _ in 0..cfg.max_steps {
        if done(&seen) {
            break;
        }
        let t = agent.state.timestep;
        let detections = sim.observe(t);
        let step = match agent.step(&detections, policy, &mut sim) {
            Ok(s) => s,
            Err(AgentError::Policy(e))
                if e.is_transport() || matches!(e, PolicyError::Config(_)) =>
            {
                outcome = Outcome::TransportFailure {
                    message: e.to_string(),
                };
                break;
            }
            Err(e) => {
                outcome = Outcome::Error {
                    message: e.to_string(),
                };
                break;
            }
        };
        let now = sim.milestones();
        let new: Vec<String> = now.difference(&seen).cloned().collect();
        timeline.extend(new.iter().map(|g| MilestoneEntry {
            goal: g.clone(),
            timestep: t,
        }));
        seen = now;
        let r = step.report;
        steps.push(StepRecord {
            timestep: r.timestep,
            action: r.action,
            attempts: r.attempts,
            fallback: r.fallback,
            pooled_nodes: r.pooled_nodes,
            prompt_tokens: r.prompt_tokens,
            events: r.execution.as_ref().map_or(0, |x| x.events),
            event_ms: r.execution.as_ref().map_or(0, |x| x.duration_ms),
            note: r.note,
            new_milestones: new,
        });
    }
    let task_complete = done(&seen);
    if task_complete {
        outcome = Outcome::Success;
    }
    let report = EpisodeReport {
        task: task.id.clone(),
        seed: cfg.seed,
        text_mode: cfg.text_mode,
        outcome,
        total_prompt_tokens: steps.iter().map(|s| s.prompt_tokens).sum(),
        steps,
        milestones: timeline,
        success: MILESTONE_ITEMS
            .iter()
            .map(|i| (milestone_id(i), seen.contains(&milestone_id(i))))
            .collect(),
        task_complete,
        final_world_hash: sim.hash(),
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    let replay = ReplayHeader {
        seed: cfg.seed,
        scenario,
        recipes,
        final_world_hash: report.final_world_hash.clone(),
    };
    let episode = Episode {
        report,
        replay,
        events: sim.event_log,
    };
    if let Some(dir) = &cfg.output_dir {
        write_artifacts(dir, cfg, &episode)?;
    }
    Ok(episode)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config: Option<RunConfig>,
    pub files: Vec<ManifestEntry>,
}

/// Write named files under `dir` plus a `manifest.json` listing them.
pub fn write_with_manifest(
    dir: &Path,
    config: Option<&RunConfig>,
    files: &[(&str, String)],
) -> Result<Manifest, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::file(dir, e))?;
    let mut entries = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| HarnessError::file(&path, e))?;
        entries.push(ManifestEntry {
            path: name.to_string(),
            bytes: content.len() as u64,
            sha256: hex::encode(Sha256::digest(content.as_bytes())),
        });
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: config.cloned(),
        files: entries,
    };
    let path = dir.join("manifest.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|e| HarnessError::file(&path, e))?;
    Ok(manifest)
}

fn write_artifacts(dir: &Path, cfg: &RunConfig, ep: &Episode) -> Result<(), HarnessError> {
    let report = serde_json::to_string_pretty(&ep.report).expect("report serializes");
    write_with_manifest(
        dir,
        Some(cfg),
        &[("report.json", report), ("replay.jsonl", ep.replay_jsonl())],
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayCheck {
    pub events: usize,
    pub recorded_hash: String,
    pub replayed_hash: String,
}

impl ReplayCheck {
    pub fn matches(&self) -> bool {
        self.recorded_hash == self.replayed_hash
    }
}

pub fn replay_log(text: &str) -> Result<ReplayCheck, HarnessError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let bad =
        |n: usize, e: serde_json::Error| HarnessError::Config(format!("replay line {n}: {e}"));
    let header: ReplayHeader = serde_json::from_str(
        lines
            .next()
            .ok_or_else(|| HarnessError::Config("empty replay log".into()))?,
    )
    .map_err(|e| bad(1, e))?;
    let events = lines
        .enumerate()
        .map(|(i, l)| serde_json::from_str::<InputEvent>(l).map_err(|e| bad(i + 2, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let sim = crate::sim::replay(header.seed, header.scenario, header.recipes, &events)?;
    Ok(ReplayCheck {
        events: events.len(),
        recorded_hash: header.final_world_hash,
        replayed_hash: sim.hash(),
    })
}

// ---------------------------------------------------------------------------
// Token comparison

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenComparison {
    pub tokens_a: u64,
    pub tokens_b: u64,
    pub mode_a: TextMode,
    pub mode_b: TextMode,
    /// tokens_b / tokens_a.
    pub ratio: f64,
    /// Percentage of A's tokens saved by B.
    pub reduction_pct: f64,
    pub milestones_equal: bool,
}

pub fn compare_tokens(a: &RunConfig, b: &RunConfig) -> Result<TokenComparison, HarnessError> {
    let mut aligned = b.clone();
    aligned.text_mode = a.text_mode;
    aligned.output_dir = a.output_dir.clone();
    if aligned != *a {
        return Err(HarnessError::Config(
            "configs may differ only in text_mode".into(),
        ));
    }
    let ra = run(a)?.report;
    let rb = run(b)?.report;
    let ratio = if ra.total_prompt_tokens == 0 {
        1.0
    } else {
        rb.total_prompt_tokens as f64 / ra.total_prompt_tokens as f64
    };
    Ok(TokenComparison {
        tokens_a: ra.total_prompt_tokens,
        tokens_b: rb.total_prompt_tokens,
        mode_a: a.text_mode,
        mode_b: b.text_mode,
        ratio,
        reduction_pct: (1.0 - ratio) * 100.0,
        milestones_equal: ra.success == rb.success,
    })
}

// ---------------------------------------------------------------------------
// Retrieval benchmark

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchCase {
    pub name: String,
    /// Defaults to the built-in graph; relative to the case file otherwise.
    #[serde(default)]
    pub graph_file: Option<PathBuf>,
    pub task: TaskSpec,
    /// Text entity matching scans. Defaults to the task's scan text with empty memory.
    #[serde(default)]
    pub prompt: Option<String>,
    /// Detection lines embedded before pooling.
    #[serde(default)]
    pub detections: Option<String>,
    pub oracle: Vec<String>,
    #[serde(default)]
    pub similarity: SimilaritySelection,
}

pub const STRATEGIES: [&str; 5] = ["similarity", "emp_only", "psp_only", "emp_psp", "psp_emp"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub case: String,
    pub strategy: String,
    pub fpr: f64,
    pub fnr: f64,
    pub retrieved: usize,
    /// Whether the retrieved subgraph still links the player to the target.
    pub connected: bool,
}

impl BenchRow {
    pub fn metrics(&self) -> RetrievalMetrics {
        RetrievalMetrics {
            fpr: self.fpr,
            fnr: self.fnr,
        }
    }
}

pub fn bench_case(case: &BenchCase, base: &Path) -> Result<Vec<BenchRow>, HarnessError> {
    let err = |m: String| HarnessError::Case {
        case: case.name.clone(),
        message: m,
    };
    let graph = match &case.graph_file {
        Some(p) => load_graph(Some(&base.join(p)))?,
        None => load_graph(None)?,
    };
    let graph = match &case.detections {
        Some(lines) => {
            let recs = parse_detections(lines).map_err(|e| err(e.to_string()))?;
            let frame = partition_observations(&recs, &graph, &PerceptionConfig::default())
                .map_err(|e| err(e.to_string()))?;
            graph.embed_visual_attributes(&frame).0
        }
        None => graph,
    };
    let oracle: BTreeSet<String> = case
        .oracle
        .iter()
        .map(|n| crate::graph::normalize_name(n))
        .collect();
    if let Some(unknown) = oracle.iter().find(|n| !graph.contains(n)) {
        return Err(err(format!("oracle node `{unknown}` is not in the graph")));
    }
    let prompt = case
        .prompt
        .clone()
        .unwrap_or_else(|| emp_scan_text(&case.task, &[]));
    let task = &case.task;
    let target = task.target_name();
    let psp = path_search_pool(&graph, task).map_err(|e| err(e.to_string()))?;
    let subgraphs: [PooledSubgraph; 5] = [
        similarity_retrieve(&graph, &prompt, &BagOfWords, case.similarity),
        entity_match_pool(&GlobalPool::whole_graph(&graph), &prompt, &graph, task),
        PooledSubgraph::from_pool(psp, Provenance::PspOnly),
        retrieve_emp_then_psp(&graph, task, &prompt).map_err(|e| err(e.to_string()))?,
        retrieve(&graph, task, &prompt).map_err(|e| err(e.to_string()))?,
    ];
    Ok(STRATEGIES
        .iter()
        .zip(subgraphs)
        .map(|(s, sub)| {
            let m = fpr_fnr(&sub.nodes, &oracle);
            BenchRow {
                case: case.name.clone(),
                strategy: s.to_string(),
                fpr: m.fpr,
                fnr: m.fnr,
                retrieved: sub.nodes.len(),
                connected: sub.connects(PLAYER, &target),
            }
        })
        .collect())
}

/// Every `*.json` case in `dir`, in file-name order.
pub fn bench_retrieval(dir: &Path) -> Result<Vec<BenchRow>, HarnessError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| HarnessError::file(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut rows = Vec::new();
    for p in paths {
        let case: BenchCase = serde_json::from_str(&read(&p)?).map_err(|e| HarnessError::Case {
            case: p.display().to_string(),
            message: e.to_string(),
        })?;
        rows.extend(bench_case(&case, dir)?);
    }
    Ok(rows)
}

/// The shipped cases, parsed from the compiled-in assets.
pub fn builtin_bench_cases() -> Vec<BenchCase> {
    crate::assets::BENCH_CASES
        .iter()
        .map(|(_, text)| serde_json::from_str(text).expect("shipped case parses"))
        .collect()
}

pub fn format_bench_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:<24} {:<11} {:>6} {:>6} {:>5} {}\n",
        "case", "strategy", "FPR", "FNR", "n", "connected"
    );
    for r in rows {
        out += &format!(
            "{:<24} {:<11} {:>6.3} {:>6.3} {:>5} {}\n",
            r.case, r.strategy, r.fpr, r.fnr, r.retrieved, r.connected
        );
    }
    out
}
