use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use kgagent::harness::{replay_log, run, run_with, Outcome, Resources, RunConfig};
use kgagent::policy::stub::{StubMode, StubServer};
use kgagent::policy::{
    EndpointConfig, Policy, PolicyError, PolicyRequest, PolicyResponse, RemotePolicy,
    ScriptedPolicy,
};
use kgagent::retrieval::TextMode;
use kgagent::sim::{milestone_id, MILESTONE_ITEMS};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn scripted_policy_reaches_every_milestone() {
    for seed in [0u64, 7, 8, 14] {
        let r = run(&RunConfig::new("diamond", seed)).unwrap().report;
        assert_eq!(r.outcome, Outcome::Success, "seed {seed}");
        assert!(r.steps.len() <= 400);
        assert!(r.success.values().all(|&v| v));
        // The timeline follows the dependency order of the tool chain.
        let order: Vec<&str> = r.milestones.iter().map(|m| m.goal.as_str()).collect();
        let pos = |item: &str| order.iter().position(|g| *g == milestone_id(item)).unwrap();
        for w in [
            "log",
            "plank",
            "crafting_table",
            "wood_pickaxe",
            "cobblestone",
            "stone_pickaxe",
            "iron_ore",
            "furnace",
            "iron_ingot",
            "iron_pickaxe",
            "diamond",
        ]
        .windows(2)
        {
            assert!(
                pos(w[0]) < pos(w[1]),
                "seed {seed}: {} before {}",
                w[0],
                w[1]
            );
        }
        assert!(r
            .milestones
            .windows(2)
            .all(|w| w[0].timestep <= w[1].timestep));
        assert_eq!(r.milestones.len(), MILESTONE_ITEMS.len());
    }
}

#[test]
fn seed_seven_golden_run() {
    let r = run(&RunConfig::new("diamond", 7)).unwrap().report;
    assert_eq!(r.steps.len(), 58);
    assert_eq!(r.milestones.first().map(|m| m.timestep), Some(2));
    assert_eq!(
        r.milestones.last().map(|m| (m.goal.as_str(), m.timestep)),
        Some(("obtain_diamond", 57))
    );
}

#[test]
fn same_config_same_report() {
    let cfg = RunConfig::new("diamond", 11);
    let (a, b) = (run(&cfg).unwrap(), run(&cfg).unwrap());
    assert_eq!(a.report.canonical_json(), b.report.canonical_json());
    assert_eq!(a.report.final_world_hash, b.report.final_world_hash);
    assert_ne!(
        run(&RunConfig::new("diamond", 12))
            .unwrap()
            .report
            .final_world_hash,
        a.report.final_world_hash
    );
}

#[test]
fn artifacts_and_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new("wood_pickaxe", 4);
    cfg.output_dir = Some(dir.path().to_path_buf());
    let ep = run(&cfg).unwrap();
    assert_eq!(ep.report.outcome, Outcome::Success);

    let report: kgagent::harness::EpisodeReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report, ep.report);
    let manifest: kgagent::harness::Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    let files: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(files, ["report.json", "replay.jsonl"]);

    let check =
        replay_log(&std::fs::read_to_string(dir.path().join("replay.jsonl")).unwrap()).unwrap();
    assert!(check.matches());
    assert_eq!(check.recorded_hash, ep.report.final_world_hash);
    assert_eq!(check.events, ep.events.len());

    // A truncated log reproduces a different world.
    let text = ep.replay_jsonl();
    let cut: Vec<&str> = text.lines().take(text.lines().count() / 2).collect();
    assert!(!replay_log(&cut.join("\n")).unwrap().matches());
}

#[test]
fn names_only_text_saves_tokens() {
    let mut full = RunConfig::new("diamond", 7);
    full.text_mode = TextMode::FullAttributes;
    let c = kgagent::harness::compare_tokens(&full, &RunConfig::new("diamond", 7)).unwrap();
    assert!(c.milestones_equal);
    assert!(c.tokens_b < c.tokens_a);
    assert!(c.reduction_pct >= 20.0, "{c:?}");
}

/// Scripted decisions served over HTTP, as a remote model would.
fn scripted_server(mode_wrapper: impl FnOnce(StubMode) -> StubMode) -> StubServer {
    let respond = StubMode::Respond(Box::new(|prompt: &str| {
        let req = PolicyRequest {
            prompt: prompt.into(),
            max_output: 64,
            task_id: String::new(),
            timestep: 0,
        };
        ScriptedPolicy
            .decide(&req)
            .map(|r| r.text)
            .unwrap_or_else(|e| e.to_string())
    }));
    StubServer::start(mode_wrapper(respond)).unwrap()
}

fn remote_config(server: &StubServer, var: &str) -> RunConfig {
    std::env::set_var(var, "test-key");
    let mut endpoint = EndpointConfig::new(&server.base_url(), "stub", var);
    endpoint.backoff_ms = 5;
    endpoint.timeout_ms = 5000;
    let mut cfg = RunConfig::new("log", 1);
    cfg.scenario_file = Some(fixture("single_trunk.json"));
    cfg.policy = kgagent::harness::PolicySpec::Remote { endpoint };
    cfg
}

#[test]
fn remote_policy_completes_short_episode() {
    let server = scripted_server(|m| m);
    let r = run(&remote_config(&server, "KGAGENT_EPISODE_KEY_A"))
        .unwrap()
        .report;
    assert_eq!(r.outcome, Outcome::Success);
    assert_eq!(r.steps.len(), 3);
    assert_eq!(server.requests(), 3);
    assert_eq!(r.steps[2].action.as_deref(), Some("Action: mine_log(1200)"));
}

#[test]
fn remote_transient_failures_are_retried() {
    let server = scripted_server(|m| StubMode::FailFirst(2, Box::new(m)));
    let r = run(&remote_config(&server, "KGAGENT_EPISODE_KEY_B"))
        .unwrap()
        .report;
    assert_eq!(r.outcome, Outcome::Success);
    assert_eq!(server.requests(), 5);
}

#[test]
fn remote_server_errors_end_episode_as_transport_failure() {
    let server = StubServer::start(StubMode::Status(500)).unwrap();
    let r = run(&remote_config(&server, "KGAGENT_EPISODE_KEY_C"))
        .unwrap()
        .report;
    assert!(matches!(r.outcome, Outcome::TransportFailure { .. }));
    assert_eq!(r.outcome.exit_code(), 3);
    assert!(r.steps.is_empty());
    assert_eq!(server.requests(), 4);
}

struct Recording(Arc<Mutex<Vec<String>>>);
impl Policy for Recording {
    fn decide(&mut self, req: &PolicyRequest) -> Result<PolicyResponse, PolicyError> {
        self.0.lock().unwrap().push(req.prompt.clone());
        ScriptedPolicy.decide(req)
    }
}

#[test]
fn prompts_carry_memory_and_range() {
    let log = Arc::new(Mutex::new(Vec::new()));
    let mut cfg = RunConfig::new("log", 1);
    cfg.scenario_file = Some(fixture("single_trunk.json"));
    let res = Resources::load(&cfg).unwrap();
    run_with(&cfg, res, &mut Recording(log.clone())).unwrap();
    let prompts = log.lock().unwrap();
    assert_eq!(prompts.len(), 3);
    assert!(prompts[0].contains("Previous decisions, newest first:\nnone"));
    assert!(prompts[2].contains("t=1: Action: turn_and_move_forward(250, -1, 10)"));
    assert!(prompts[2].contains(
        "The distance between the player and the trunk is less than the interactable range."
    ));
}

#[test]
fn missing_credential_is_a_config_error() {
    let server = StubServer::start(StubMode::Echo("Action: turn(5, 5)".into())).unwrap();
    let mut cfg = remote_config(&server, "KGAGENT_EPISODE_KEY_D");
    if let kgagent::harness::PolicySpec::Remote { endpoint } = &mut cfg.policy {
        endpoint.credential_env = "KGAGENT_EPISODE_KEY_UNSET".into();
    }
    assert!(matches!(
        run(&cfg),
        Err(kgagent::harness::HarnessError::Config(_))
    ));
    assert_eq!(server.requests(), 0);
    let _ = RemotePolicy::new(EndpointConfig::new("", "m", "X")).unwrap_err();
}
