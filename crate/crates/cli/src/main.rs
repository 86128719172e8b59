use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use kgagent::harness::{
    bench_case, bench_retrieval, builtin_bench_cases, compare_tokens, format_bench_table,
    replay_log, run, write_with_manifest, HarnessError, PolicySpec, RunConfig,
};
use kgagent::policy::EndpointConfig;
use kgagent::retrieval::TextMode;

/// Knowledge-graph agent harness: episodes, retrieval benchmark and replay checks.
#[derive(Parser)]
#[command(name = "kgagent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and report milestones.
    Run(RunArgs),
    /// Score the five pooling strategies on benchmark cases.
    BenchRetrieval {
        /// Directory of case files; the shipped cases when omitted.
        #[arg(long)]
        cases: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare prompt tokens between full-attribute and names-only text.
    CompareTokens {
        #[command(flatten)]
        run: RunArgs,
        /// Second config; defaults to the first with the other text mode.
        #[arg(long)]
        against: Option<PathBuf>,
    },
    /// Check a graph file's invariants.
    ValidateGraph {
        /// Graph file; the shipped graph when omitted.
        file: Option<PathBuf>,
    },
    /// Re-apply a replay log and compare world hashes.
    Replay { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    NamesOnly,
    FullAttributes,
}

impl From<Mode> for TextMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::NamesOnly => TextMode::NamesOnly,
            Mode::FullAttributes => TextMode::FullAttributes,
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON run config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    recall_steps: Option<usize>,
    #[arg(long, value_enum)]
    text_mode: Option<Mode>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Endpoint config file; switches to the remote policy.
    #[arg(long)]
    endpoint: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print the full report JSON instead of a summary.
    #[arg(long)]
    json: bool,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::new("diamond", 7),
        };
        if let Some(t) = &self.task {
            cfg.task = t.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.max_steps {
            cfg.max_steps = n;
        }
        if let Some(n) = self.recall_steps {
            cfg.recall_steps = n;
        }
        if let Some(m) = self.text_mode {
            cfg.text_mode = m.into();
        }
        for (flag, field) in [
            (&self.graph, &mut cfg.graph_file),
            (&self.scenario, &mut cfg.scenario_file),
            (&self.tasks, &mut cfg.tasks_file),
            (&self.output, &mut cfg.output_dir),
        ] {
            if flag.is_some() {
                *field = flag.clone();
            }
        }
        if let Some(p) = &self.endpoint {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let endpoint: EndpointConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            cfg.policy = PolicySpec::Remote { endpoint };
        }
        Ok(cfg)
    }
}

const CONFIG_ERROR: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let ep = run(&cfg)?;
            let r = &ep.report;
            if args.json {
                println!("{}", serde_json::to_string_pretty(r)?);
            } else {
                println!(
                    "task {} seed {}: {} steps, {} prompt tokens, {} ms",
                    r.task,
                    r.seed,
                    r.steps.len(),
                    r.total_prompt_tokens,
                    r.wall_time_ms
                );
                for m in &r.milestones {
                    println!("  step {:>4}  {}", m.timestep, m.goal);
                }
                println!(
                    "outcome: {}",
                    serde_json::to_value(&r.outcome)?["status"]
                        .as_str()
                        .unwrap_or("?")
                );
                if let kgagent::harness::Outcome::TransportFailure { message }
                | kgagent::harness::Outcome::Error { message } = &r.outcome
                {
                    eprintln!("{message}");
                }
                println!("world hash: {}", r.final_world_hash);
            }
            Ok(r.outcome.exit_code() as u8)
        }
        Command::BenchRetrieval {
            cases,
            json,
            output,
        } => {
            let rows = match &cases {
                Some(dir) => bench_retrieval(dir)?,
                None => {
                    let mut rows = Vec::new();
                    for case in builtin_bench_cases() {
                        rows.extend(bench_case(&case, Path::new("."))?);
                    }
                    rows
                }
            };
            let table = format_bench_table(&rows);
            let rows_json = serde_json::to_string_pretty(&rows)?;
            if json {
                println!("{rows_json}");
            } else {
                print!("{table}");
            }
            if let Some(dir) = output {
                write_with_manifest(
                    &dir,
                    None,
                    &[("bench.json", rows_json), ("bench.txt", table)],
                )?;
            }
            Ok(0)
        }
        Command::CompareTokens { run, against } => {
            let mut a = run.resolve()?;
            let b = match against {
                Some(p) => {
                    let mut b = RunConfig::load(&p)?;
                    b.output_dir = None;
                    b
                }
                None => {
                    if run.text_mode.is_none() {
                        a.text_mode = TextMode::FullAttributes;
                    }
                    let mut b = a.clone();
                    b.text_mode = match a.text_mode {
                        TextMode::FullAttributes => TextMode::NamesOnly,
                        TextMode::NamesOnly => TextMode::FullAttributes,
                    };
                    b
                }
            };
            let out_dir = a.output_dir.take();
            let c = compare_tokens(&a, &b)?;
            println!("{:?}: {} tokens", c.mode_a, c.tokens_a);
            println!("{:?}: {} tokens", c.mode_b, c.tokens_b);
            println!(
                "ratio {:.4}, reduction {:.1}%, milestones equal: {}",
                c.ratio, c.reduction_pct, c.milestones_equal
            );
            if let Some(dir) = out_dir {
                write_with_manifest(
                    &dir,
                    Some(&a),
                    &[("tokens.json", serde_json::to_string_pretty(&c)?)],
                )?;
            }
            Ok(0)
        }
        Command::ValidateGraph { file } => {
            let g = kgagent::harness::load_graph(file.as_deref())?;
            let findings = g.validate();
            println!("{} nodes, {} edges", g.node_names().len(), g.edges().len());
            for f in &findings {
                println!("{}", serde_json::to_string(f)?);
            }
            Ok(if findings.is_empty() { 0 } else { CONFIG_ERROR })
        }
        Command::Replay { file } => {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", file.display())))?;
            let check = replay_log(&text)?;
            println!("{} events", check.events);
            println!("recorded {}", check.recorded_hash);
            println!("replayed {}", check.replayed_hash);
            Ok(if check.matches() { 0 } else { 1 })
        }
    }
}
