//! Decision providers: a deterministic scripted policy that reads the prompt's
//! structured sections, and a client for chat-completion style endpoints.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::skills::{format_action, parse_action_syntax, ActionDecision};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRequest {
    pub prompt: String,
    pub max_output: u32,
    pub task_id: String,
    pub timestep: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyResponse {
    pub text: String,
    pub latency_ms: u64,
    /// (prompt, completion) tokens when the provider reports them.
    pub token_usage: Option<(u64, u64)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("policy configuration: {0}")]
    Config(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("prompt could not be read: {0}")]
    Prompt(String),
}

impl PolicyError {
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            PolicyError::Transport { .. } | PolicyError::Status { .. } | PolicyError::Malformed(_)
        )
    }
}

pub trait Policy {
    fn decide(&mut self, req: &PolicyRequest) -> Result<PolicyResponse, PolicyError>;
}

// ---------------------------------------------------------------------------
// Prompt reading

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvItem {
    pub x: i64,
    pub y: i64,
    pub count: u32,
    pub key: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvItem {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
    pub range: String,
}

/// The parts of a synthesized prompt the scripted policy acts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptView {
    pub crosshair: (i64, i64),
    pub inventory: BTreeMap<String, InvItem>,
    pub environment: BTreeMap<String, EnvItem>,
    /// Recalled decisions, newest first: (action, note).
    pub memory: Vec<(ActionDecision, String)>,
}

fn section<'a>(text: &'a str, marker: &str) -> Result<&'a str, PolicyError> {
    let start = text
        .find(&format!("{marker}\n"))
        .ok_or_else(|| PolicyError::Prompt(format!("missing {marker} section")))?
        + marker.len()
        + 1;
    let rest = &text[start..];
    let end = rest.find("\n[").unwrap_or(rest.len());
    // Skip the section's header sentence.
    Ok(rest[..end]
        .split_once('\n')
        .map_or("", |(_, body)| body)
        .trim())
}

fn body_lines(body: &str) -> impl Iterator<Item = &str> {
    body.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && *l != "none")
}

fn pair(s: &str) -> Option<(i64, i64)> {
    let inner = s.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (a, b) = inner.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn bad_line(line: &str) -> PolicyError {
    PolicyError::Prompt(format!("unreadable line `{line}`"))
}

impl PromptView {
    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        let start = text
            .find("[task]\n")
            .ok_or_else(|| PolicyError::Prompt("missing [task] section".into()))?;
        let task_text = &text[start..];
        let cross = task_text
            .find("crosshair is at ")
            .and_then(|i| {
                let rest = &task_text[i + "crosshair is at ".len()..];
                pair(&rest[..=rest.find(')')?])
            })
            .ok_or_else(|| PolicyError::Prompt("no crosshair position".into()))?;

        let mut inventory = BTreeMap::new();
        for line in body_lines(section(text, "[inventory]")?) {
            let (name, rest) = line.split_once(": inv at ").ok_or_else(|| bad_line(line))?;
            let close = rest.find(')').ok_or_else(|| bad_line(line))?;
            let (x, y) = pair(&rest[..=close]).ok_or_else(|| bad_line(line))?;
            let mut item = InvItem {
                x,
                y,
                count: 1,
                key: None,
            };
            for part in rest[close + 1..].split(", ").map(str::trim) {
                if let Some(c) = part.strip_prefix("count ") {
                    item.count = c.parse().map_err(|_| bad_line(line))?;
                } else if let Some(k) = part.strip_prefix("hotbar key ") {
                    item.key = Some(k.parse().map_err(|_| bad_line(line))?);
                }
            }
            inventory.insert(name.to_string(), item);
        }

        let mut environment = BTreeMap::new();
        for line in body_lines(section(text, "[environment]")?) {
            let (name, rest) = line.split_once(": env at ").ok_or_else(|| bad_line(line))?;
            let (at, rest) = rest.split_once(" size ").ok_or_else(|| bad_line(line))?;
            let (size, rest) = rest.split_once(", ").ok_or_else(|| bad_line(line))?;
            let (x, y) = pair(at).ok_or_else(|| bad_line(line))?;
            let (w, h) = pair(size).ok_or_else(|| bad_line(line))?;
            let range = rest
                .strip_suffix(" interaction range")
                .ok_or_else(|| bad_line(line))?;
            environment.insert(
                name.to_string(),
                EnvItem {
                    x,
                    y,
                    w,
                    h,
                    range: range.to_string(),
                },
            );
        }

        let mut memory = Vec::new();
        for line in body_lines(section(text, "[memory]")?) {
            let Some(i) = line.find("Action:") else {
                continue;
            };
            let Some(close) = line[i..].find(')') else {
                continue;
            };
            let Ok(a) = parse_action_syntax(&line[i..=i + close]) else {
                continue;
            };
            memory.push((a, line[i + close + 1..].to_string()));
        }
        Ok(Self {
            crosshair: cross,
            inventory,
            environment,
            memory,
        })
    }

    fn count(&self, name: &str) -> u32 {
        self.inventory.get(name).map_or(0, |i| i.count)
    }

    fn pos(&self, name: &str) -> (i64, i64) {
        self.inventory.get(name).map_or((0, 0), |i| (i.x, i.y))
    }

    fn key(&self, name: &str) -> Option<i64> {
        self.inventory.get(name).and_then(|i| i.key).map(i64::from)
    }

    fn recently(&self, pred: impl Fn(&ActionDecision, &str) -> bool) -> bool {
        self.memory.iter().any(|(a, n)| pred(a, n))
    }
}

// ---------------------------------------------------------------------------
// Scripted policy

/// Horizontal scan step: a quarter turn at 0.15 degrees per pixel.
pub const SCAN_PX: i64 = 600;
const ALIGNED_PX: i64 = 30;

/// Finite-state rules that walk the tool progression from logs to a diamond.
/// The decision depends only on the prompt text.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedPolicy;

impl ScriptedPolicy {
    pub fn decide_prompt(&self, prompt: &str) -> Result<(String, ActionDecision), PolicyError> {
        let v = PromptView::parse(prompt)?;
        Ok(script(&v))
    }
}

impl Policy for ScriptedPolicy {
    fn decide(&mut self, req: &PolicyRequest) -> Result<PolicyResponse, PolicyError> {
        let (stage, action) = self.decide_prompt(&req.prompt)?;
        Ok(PolicyResponse {
            text: format!("Stage: {stage}.\n{}", format_action(&action)),
            latency_ms: 0,
            token_usage: None,
        })
    }
}

fn act(skill: &str, args: &[i64]) -> ActionDecision {
    ActionDecision::new(skill, args.to_vec())
}

/// Approach and act on `target`, scanning and then exploring when it is out of view.
fn pursue(
    v: &PromptView,
    target: &str,
    on_reach: ActionDecision,
    explore: ActionDecision,
) -> ActionDecision {
    if let Some(e) = v.environment.get(target) {
        let (dx, dy) = (e.x - v.crosshair.0, e.y - v.crosshair.1);
        return match e.range.as_str() {
            "within" if dx * dx + dy * dy <= ALIGNED_PX * ALIGNED_PX => on_reach,
            "within" => act("turn", &[dx, dy]),
            "near" => act("turn_and_move_forward", &[250, dx, dy]),
            _ => {
                let d = match e.w {
                    w if w < 20 => 1500,
                    w if w < 50 => 1000,
                    _ => 500,
                };
                act("turn_and_move_forward", &[d, dx, dy])
            }
        };
    }
    let scan = act("turn", &[SCAN_PX, 0]);
    let scanned = v.memory.len() >= 3 && v.memory.iter().take(3).all(|(a, _)| *a == scan);
    if scanned {
        explore
    } else {
        scan
    }
}

fn script(v: &PromptView) -> (String, ActionDecision) {
    let n = |s: &str| v.count(s);
    let at = |s: &str| v.pos(s);
    let placed = |station: &str| v.recently(|_, note| note.contains(&format!("placed {station}")));
    let stage = |s: &str, a: ActionDecision| (s.to_string(), a);

    if n("diamond") > 0 {
        return stage("done", act("turn", &[30, 0]));
    }
    if let Some(k) = v.key("iron pickaxe") {
        let mine = act("mine_diamond_ore", &[k, 1000]);
        return stage(
            "find diamond",
            pursue(
                v,
                "diamond ore",
                mine,
                act("dig_vertical_mine_tunnels", &[k, 400]),
            ),
        );
    }
    if n("iron ingot") >= 3 {
        if n("stick") < 2 {
            let (x, y) = at("plank");
            return stage("craft sticks", act("craft_stick", &[x, y]));
        }
        let ((ix, iy), (sx, sy)) = (at("iron ingot"), at("stick"));
        return stage(
            "craft iron pickaxe",
            act("craft_iron_pickaxe", &[ix, iy, sx, sy]),
        );
    }
    if let Some(k) = v.key("stone pickaxe") {
        if n("raw iron") < 3 && n("iron ingot") == 0 {
            let mine = act("mine_iron_ore", &[k, 1000]);
            return stage(
                "find iron",
                pursue(
                    v,
                    "iron ore",
                    mine,
                    act("dig_vertical_mine_tunnels", &[k, 500]),
                ),
            );
        }
        if let Some(f) = v.key("furnace") {
            return stage("place furnace", act("put_functional_block", &[f, 200]));
        }
        if placed("furnace") || v.recently(|a, _| a.skill == "smelt_iron_ore") {
            let ((ox, oy), (px, py)) = (at("raw iron"), at("plank"));
            return stage("smelt", act("smelt_iron_ore", &[ox, oy, px, py]));
        }
        if n("cobblestone") >= 8 {
            let (x, y) = at("cobblestone");
            return stage("craft furnace", act("craft_furnace", &[x, y]));
        }
        return stage(
            "gather cobblestone",
            act("dig_horizontal_mine_tunnels", &[k]),
        );
    }
    if let Some(k) = v.key("wood pickaxe") {
        if n("stick") < 2 {
            let (x, y) = at("plank");
            return stage("craft sticks", act("craft_stick", &[x, y]));
        }
        if n("cobblestone") >= 3 {
            let ((cx, cy), (sx, sy)) = (at("cobblestone"), at("stick"));
            return stage(
                "craft stone pickaxe",
                act("craft_stone_pickaxe", &[cx, cy, sx, sy]),
            );
        }
        return stage("dig down", act("dig_vertical_mine_tunnels", &[k, 900]));
    }
    if let Some(k) = v.key("crafting table") {
        return stage(
            "place crafting table",
            act("put_functional_block", &[k, 200]),
        );
    }
    if placed("crafting table") {
        if n("stick") >= 2 && n("plank") >= 3 {
            let ((px, py), (sx, sy)) = (at("plank"), at("stick"));
            return stage(
                "craft wooden pickaxe",
                act("craft_wood_pickaxe", &[px, py, sx, sy]),
            );
        }
        if n("plank") >= 2 {
            let (x, y) = at("plank");
            return stage("craft sticks", act("craft_stick", &[x, y]));
        }
    }
    if n("log") >= 1 && n("log") * 4 + n("plank") >= 16 {
        let (x, y) = at("log");
        return stage("craft planks", act("craft_plank", &[x, y]));
    }
    if n("plank") >= 16 {
        let (x, y) = at("plank");
        return stage("craft crafting table", act("craft_crafting_table", &[x, y]));
    }
    let mine = act("mine_log", &[1200]);
    stage(
        "gather logs",
        pursue(v, "trunk", mine, act("move_forward", &[2000])),
    )
}

// ---------------------------------------------------------------------------
// Remote endpoint

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Name of the environment variable holding the API key.
    pub credential_env: String,
    #[serde(default = "default_path")]
    pub path: String,
    /// Dotted path to the reply text in the response body; digits index arrays.
    #[serde(default = "default_text_path")]
    pub response_text_path: String,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Extra top-level request fields, passed through unchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Map<String, Value>>,
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_retries() -> u32 {
    3
}
fn default_path() -> String {
    "/v1/chat/completions".into()
}
fn default_text_path() -> String {
    "choices.0.message.content".into()
}
fn default_backoff_ms() -> u64 {
    250
}

impl EndpointConfig {
    pub fn new(base_url: &str, model: &str, credential_env: &str) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
            credential_env: credential_env.into(),
            path: default_path(),
            response_text_path: default_text_path(),
            backoff_ms: default_backoff_ms(),
            temperature: None,
            extra: None,
        }
    }

    pub fn url(&self) -> String {
        format!(
            "{}/{}",
            self.base_url.trim_end_matches('/'),
            self.path.trim_start_matches('/')
        )
    }

    /// Upper bound on wall time for one decision, retries included.
    pub fn deadline(&self) -> Duration {
        Duration::from_millis(
            self.timeout_ms
                .saturating_mul(u64::from(self.max_retries) + 1),
        )
    }
}

pub fn lookup_path<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.')
        .filter(|p| !p.is_empty())
        .try_fold(v, |cur, part| match part.parse::<usize>() {
            Ok(i) => cur.get(i),
            Err(_) => cur.get(part),
        })
}

pub struct RemotePolicy {
    cfg: EndpointConfig,
    credential: String,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for RemotePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemotePolicy")
            .field("url", &self.cfg.url())
            .field("model", &self.cfg.model)
            .finish()
    }
}

impl RemotePolicy {
    /// Reads the credential up front; a missing variable fails before any request.
    pub fn new(cfg: EndpointConfig) -> Result<Self, PolicyError> {
        if cfg.base_url.is_empty() || cfg.model.is_empty() {
            return Err(PolicyError::Config(
                "base_url and model are required".into(),
            ));
        }
        if cfg.timeout_ms == 0 {
            return Err(PolicyError::Config("timeout_ms must be positive".into()));
        }
        let credential = std::env::var(&cfg.credential_env)
            .ok()
            .filter(|v| !v.is_empty())
            .ok_or_else(|| {
                PolicyError::Config(format!(
                    "credential variable `{}` is not set",
                    cfg.credential_env
                ))
            })?;
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| PolicyError::Config(e.to_string()))?;
        Ok(Self {
            cfg,
            credential,
            client,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    fn body(&self, req: &PolicyRequest) -> Value {
        let mut body = json!({
            "model": self.cfg.model,
            "messages": [{ "role": "user", "content": req.prompt }],
            "max_tokens": req.max_output,
        });
        let obj = body.as_object_mut().expect("object literal");
        if let Some(t) = self.cfg.temperature {
            obj.insert("temperature".into(), json!(t));
        }
        for (k, v) in self.cfg.extra.iter().flatten() {
            obj.insert(k.clone(), v.clone());
        }
        body
    }

    fn read(&self, body: &Value) -> Result<(String, Option<(u64, u64)>), PolicyError> {
        let text = lookup_path(body, &self.cfg.response_text_path)
            .and_then(Value::as_str)
            .ok_or_else(|| {
                PolicyError::Malformed(format!("no text at `{}`", self.cfg.response_text_path))
            })?;
        let usage = body.get("usage").and_then(|u| {
            Some((
                u.get("prompt_tokens")?.as_u64()?,
                u.get("completion_tokens")?.as_u64()?,
            ))
        });
        Ok((text.to_string(), usage))
    }
}

impl Policy for RemotePolicy {
    fn decide(&mut self, req: &PolicyRequest) -> Result<PolicyResponse, PolicyError> {
        if req.prompt.is_empty() {
            return Err(PolicyError::Config("empty prompt".into()));
        }
        let started = Instant::now();
        let deadline = started + self.cfg.deadline();
        let body = self.body(req);
        let attempts_allowed = self.cfg.max_retries as usize + 1;
        let mut last = String::new();
        for attempt in 1..=attempts_allowed {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(PolicyError::Transport {
                    attempts: attempt - 1,
                    message: "deadline exceeded".into(),
                });
            }
            let timeout = remaining.min(Duration::from_millis(self.cfg.timeout_ms));
            let sent = self
                .client
                .post(self.cfg.url())
                .bearer_auth(&self.credential)
                .timeout(timeout)
                .json(&body)
                .send();
            match sent {
                Ok(resp) if resp.status().is_success() => {
                    let value: Value = resp
                        .json()
                        .map_err(|e| PolicyError::Malformed(e.to_string()))?;
                    let (text, token_usage) = self.read(&value)?;
                    return Ok(PolicyResponse {
                        text,
                        latency_ms: started.elapsed().as_millis() as u64,
                        token_usage,
                    });
                }
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.text().unwrap_or_default();
                    if !(status >= 500 || status == 429) {
                        return Err(PolicyError::Status { status, body: text });
                    }
                    last = format!("status {status}");
                }
                Err(e) => last = e.to_string(),
            }
            if attempt < attempts_allowed {
                let wait = Duration::from_millis(
                    self.cfg
                        .backoff_ms
                        .saturating_mul(1 << (attempt - 1).min(16)),
                );
                std::thread::sleep(wait.min(deadline.saturating_duration_since(Instant::now())));
            }
        }
        Err(PolicyError::Transport {
            attempts: attempts_allowed,
            message: last,
        })
    }
}

pub mod stub {
    //! Minimal HTTP endpoint for exercising the remote client offline.

    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{SocketAddr, TcpListener, TcpStream};
    use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
    use std::sync::{Arc, Mutex};
    use std::thread::JoinHandle;

    use serde_json::{json, Value};

    pub type Responder = Box<dyn Fn(&str) -> String + Send>;

    pub enum StubMode {
        /// Always answer with this text.
        Echo(String),
        /// Answer 500 to the first `n` requests, then behave like `then`.
        FailFirst(usize, Box<StubMode>),
        /// Always answer with this status code.
        Status(u16),
        /// Compute the reply from the prompt.
        Respond(Responder),
    }

    pub struct StubServer {
        addr: SocketAddr,
        requests: Arc<AtomicUsize>,
        prompts: Arc<Mutex<Vec<String>>>,
        stop: Arc<AtomicBool>,
        handle: Option<JoinHandle<()>>,
    }

    impl StubServer {
        pub fn start(mode: StubMode) -> std::io::Result<Self> {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?;
            let requests = Arc::new(AtomicUsize::new(0));
            let prompts = Arc::new(Mutex::new(Vec::new()));
            let stop = Arc::new(AtomicBool::new(false));
            let (r, p, s) = (requests.clone(), prompts.clone(), stop.clone());
            let handle = std::thread::spawn(move || {
                for conn in listener.incoming() {
                    if s.load(Ordering::SeqCst) {
                        break;
                    }
                    if let Ok(stream) = conn {
                        let _ = serve(stream, &mode, &r, &p);
                    }
                }
            });
            Ok(Self {
                addr,
                requests,
                prompts,
                stop,
                handle: Some(handle),
            })
        }

        pub fn base_url(&self) -> String {
            format!("http://{}", self.addr)
        }

        pub fn requests(&self) -> usize {
            self.requests.load(Ordering::SeqCst)
        }

        pub fn prompts(&self) -> Vec<String> {
            self.prompts.lock().expect("prompt log").clone()
        }
    }

    impl Drop for StubServer {
        fn drop(&mut self) {
            self.stop.store(true, Ordering::SeqCst);
            let _ = TcpStream::connect(self.addr);
            if let Some(h) = self.handle.take() {
                let _ = h.join();
            }
        }
    }

    fn serve(
        stream: TcpStream,
        mode: &StubMode,
        count: &AtomicUsize,
        prompts: &Mutex<Vec<String>>,
    ) -> std::io::Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        if line.is_empty() {
            return Ok(());
        }
        let mut length = 0usize;
        loop {
            let mut h = String::new();
            reader.read_line(&mut h)?;
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body)?;
        let n = count.fetch_add(1, Ordering::SeqCst);
        let prompt = serde_json::from_slice::<Value>(&body)
            .ok()
            .and_then(|v| v["messages"][0]["content"].as_str().map(str::to_string))
            .unwrap_or_default();
        prompts.lock().expect("prompt log").push(prompt.clone());

        let (status, payload) = reply(mode, n, &prompt);
        let reason = if status == 200 { "OK" } else { "Error" };
        let mut out = stream;
        write!(
            out,
            "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
            payload.len()
        )?;
        out.flush()
    }

    fn reply(mode: &StubMode, n: usize, prompt: &str) -> (u16, String) {
        let ok = |text: String| {
            let v = json!({
                "choices": [{ "index": 0, "message": { "role": "assistant", "content": text } }],
                "usage": { "prompt_tokens": prompt.len().div_ceil(4), "completion_tokens": text.len().div_ceil(4) },
            });
            (200, v.to_string())
        };
        match mode {
            StubMode::Echo(t) => ok(t.clone()),
            StubMode::Status(s) => (*s, json!({ "error": "induced" }).to_string()),
            StubMode::FailFirst(k, _) if n < *k => (500, json!({ "error": "induced" }).to_string()),
            StubMode::FailFirst(k, then) => reply(then, n - k, prompt),
            StubMode::Respond(f) => ok(f(prompt)),
        }
    }
}
