//! Parameterized skills expanded into mouse/keyboard event scripts.
//!
//! A policy answers with `Action: name(a, b, ...)`; the call is validated
//! against the registry and expanded into [`InputEvent`]s for a backend.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Integer,
    PixelCoord,
    DurationMs,
    HotbarKey,
    SignedOffset,
}

impl ParamType {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamType::Integer => "integer",
            ParamType::PixelCoord => "pixel_coord",
            ParamType::DurationMs => "duration_ms",
            ParamType::HotbarKey => "hotbar_key",
            ParamType::SignedOffset => "signed_offset",
        }
    }

    pub fn range(self) -> RangeInclusive<i64> {
        match self {
            ParamType::Integer => 0..=64,
            ParamType::PixelCoord => 0..=4096,
            ParamType::DurationMs => 0..=60_000,
            ParamType::HotbarKey => 1..=9,
            ParamType::SignedOffset => -4096..=4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub ptype: ParamType,
    pub description: String,
}

impl ParamSpec {
    pub fn new(name: &str, ptype: ParamType, description: &str) -> Self {
        Self {
            name: name.into(),
            ptype,
            description: description.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSpec {
    pub name: String,
    pub params: Vec<ParamSpec>,
    pub description: String,
}

impl SkillSpec {
    pub fn signature(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| format!("{}: {}", p.name, p.ptype.as_str()))
            .collect();
        format!("{}({})", self.name, params.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionDecision {
    pub skill: String,
    pub args: Vec<i64>,
}

impl ActionDecision {
    pub fn new(skill: &str, args: impl Into<Vec<i64>>) -> Self {
        Self {
            skill: skill.into(),
            args: args.into(),
        }
    }
}

impl fmt::Display for ActionDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_action(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Key {
    Forward,
    Inventory,
    Jump,
    Shift,
    Hotbar(u8),
}

impl From<Key> for String {
    fn from(k: Key) -> String {
        match k {
            Key::Forward => "w".into(),
            Key::Inventory => "e".into(),
            Key::Jump => "space".into(),
            Key::Shift => "shift".into(),
            Key::Hotbar(n) => n.to_string(),
        }
    }
}

impl TryFrom<String> for Key {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        Ok(match s.as_str() {
            "w" => Key::Forward,
            "e" => Key::Inventory,
            "space" => Key::Jump,
            "shift" => Key::Shift,
            d => match d.parse::<u8>() {
                Ok(n @ 1..=9) => Key::Hotbar(n),
                _ => return Err(format!("unknown key `{s}`")),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Button {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputEvent {
    KeyPress { key: Key },
    KeyRelease { key: Key },
    MouseMove { dx: i64, dy: i64 },
    MouseButtonPress { button: Button },
    MouseButtonRelease { button: Button },
    Wait { ms: u64 },
}

/// True when every press is released exactly once, in order, with nothing left held.
pub fn balanced(events: &[InputEvent]) -> bool {
    let mut keys = BTreeSet::new();
    let mut buttons = BTreeSet::new();
    for ev in events {
        let ok = match ev {
            InputEvent::KeyPress { key } => keys.insert(*key),
            InputEvent::KeyRelease { key } => keys.remove(key),
            InputEvent::MouseButtonPress { button } => buttons.insert(*button),
            InputEvent::MouseButtonRelease { button } => buttons.remove(button),
            _ => true,
        };
        if !ok {
            return false;
        }
    }
    keys.is_empty() && buttons.is_empty()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SkillError {
    #[error("skill `{0}` already registered")]
    Duplicate(String),
    #[error("skill `{0}` expands to no events")]
    EmptyExpansion(String),
    #[error("`{0}` is not a valid skill identifier")]
    BadName(String),
    #[error("no `Action:` marker in policy output")]
    NoMarker,
    #[error("malformed action: {0}")]
    Malformed(String),
    #[error("unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("`{skill}` takes {expected} argument(s), got {got}")]
    Arity {
        skill: String,
        expected: usize,
        got: usize,
    },
    #[error("hotbar key {value} for `{param}` is outside 1..9")]
    HotbarRange { param: String, value: i64 },
    #[error("argument `{param}` = {value} outside {min}..={max}")]
    OutOfRange {
        param: String,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("backend rejected event {index}: {source}")]
    Backend { index: usize, source: BackendError },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct BackendError(pub String);

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Receives input events in order; one action at a time.
pub trait InputBackend {
    fn deliver(&mut self, event: &InputEvent) -> Result<Ack, BackendError>;
}

/// Writes each event as a JSON line and keeps a copy in memory.
pub struct RecordingBackend<W: Write> {
    out: W,
    pub events: Vec<InputEvent>,
}

impl<W: Write> RecordingBackend<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            events: Vec::new(),
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> InputBackend for RecordingBackend<W> {
    fn deliver(&mut self, event: &InputEvent) -> Result<Ack, BackendError> {
        let line = serde_json::to_string(event).map_err(|e| BackendError(e.to_string()))?;
        writeln!(self.out, "{line}").map_err(|e| BackendError(e.to_string()))?;
        self.events.push(*event);
        Ok(Ack::default())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub events: usize,
    pub duration_ms: u64,
    /// Non-empty acknowledgement notes, in delivery order.
    pub notes: Vec<String>,
}

pub type Expansion = Box<dyn Fn(&[i64]) -> Vec<InputEvent> + Send + Sync>;

struct Entry {
    spec: SkillSpec,
    expand: Expansion,
}

#[derive(Default)]
pub struct SkillLibrary {
    skills: BTreeMap<String, Entry>,
}

impl fmt::Debug for SkillLibrary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.skills.keys()).finish()
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl SkillLibrary {
    pub fn register_skill(&mut self, spec: SkillSpec, expand: Expansion) -> Result<(), SkillError> {
        if !is_identifier(&spec.name) {
            return Err(SkillError::BadName(spec.name));
        }
        if self.skills.contains_key(&spec.name) {
            return Err(SkillError::Duplicate(spec.name));
        }
        // Probe with the smallest legal arguments.
        let probe: Vec<i64> = spec
            .params
            .iter()
            .map(|p| *p.ptype.range().start())
            .collect();
        if expand(&probe).is_empty() {
            return Err(SkillError::EmptyExpansion(spec.name));
        }
        self.skills
            .insert(spec.name.clone(), Entry { spec, expand });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn spec(&self, name: &str) -> Option<&SkillSpec> {
        self.skills.get(name).map(|e| &e.spec)
    }

    pub fn specs(&self) -> impl Iterator<Item = &SkillSpec> {
        self.skills.values().map(|e| &e.spec)
    }

    /// One `signature — description` line per skill, sorted by name.
    pub fn library_text(&self) -> String {
        self.lines().join("\n")
    }

    pub fn lines(&self) -> Vec<String> {
        self.specs()
            .map(|s| format!("{} — {}", s.signature(), s.description))
            .collect()
    }

    pub fn validate(&self, a: &ActionDecision) -> Result<(), SkillError> {
        let spec = self
            .spec(&a.skill)
            .ok_or_else(|| SkillError::UnknownSkill(a.skill.clone()))?;
        if spec.params.len() != a.args.len() {
            return Err(SkillError::Arity {
                skill: a.skill.clone(),
                expected: spec.params.len(),
                got: a.args.len(),
            });
        }
        for (p, &v) in spec.params.iter().zip(&a.args) {
            let r = p.ptype.range();
            if !r.contains(&v) {
                return Err(if p.ptype == ParamType::HotbarKey {
                    SkillError::HotbarRange {
                        param: p.name.clone(),
                        value: v,
                    }
                } else {
                    SkillError::OutOfRange {
                        param: p.name.clone(),
                        value: v,
                        min: *r.start(),
                        max: *r.end(),
                    }
                });
            }
        }
        Ok(())
    }

    pub fn expand(&self, a: &ActionDecision) -> Result<Vec<InputEvent>, SkillError> {
        self.validate(a)?;
        Ok((self.skills[&a.skill].expand)(&a.args))
    }

    pub fn execute(
        &self,
        a: &ActionDecision,
        backend: &mut dyn InputBackend,
    ) -> Result<ExecutionReport, SkillError> {
        let events = self.expand(a)?;
        let mut report = ExecutionReport {
            events: events.len(),
            ..Default::default()
        };
        for (index, ev) in events.iter().enumerate() {
            let ack = backend
                .deliver(ev)
                .map_err(|source| SkillError::Backend { index, source })?;
            if let InputEvent::Wait { ms } = ev {
                report.duration_ms += ms;
            }
            if let Some(n) = ack.note.filter(|n| !n.is_empty()) {
                report.notes.push(n);
            }
        }
        Ok(report)
    }
}

pub fn format_action(a: &ActionDecision) -> String {
    let args: Vec<String> = a.args.iter().map(i64::to_string).collect();
    format!("Action: {}({})", a.skill, args.join(", "))
}

/// Parse the last `Action:` call in free-form policy output and validate it.
pub fn parse_action(raw: &str, library: &SkillLibrary) -> Result<ActionDecision, SkillError> {
    let a = parse_action_syntax(raw)?;
    library.validate(&a)?;
    Ok(a)
}

pub fn parse_action_syntax(raw: &str) -> Result<ActionDecision, SkillError> {
    const MARKER: &str = "Action:";
    let start = raw.rfind(MARKER).ok_or(SkillError::NoMarker)? + MARKER.len();
    let rest = raw[start..].trim_start();
    let name_len = rest
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'))
        .map_or(rest.len(), |(i, _)| i);
    let name = &rest[..name_len];
    if !is_identifier(name) {
        return Err(SkillError::Malformed("missing skill name".into()));
    }
    let rest = rest[name_len..].trim_start();
    let body = rest
        .strip_prefix('(')
        .ok_or_else(|| SkillError::Malformed(format!("expected `(` after `{name}`")))?;
    let close = body
        .find(')')
        .ok_or_else(|| SkillError::Malformed("unclosed argument list".into()))?;
    let inner = body[..close].trim();
    let args = if inner.is_empty() {
        Vec::new()
    } else {
        inner
            .split(',')
            .map(|t| {
                let t = t.trim();
                let digits = t.strip_prefix(['-', '+']).unwrap_or(t);
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(SkillError::Malformed(format!(
                        "argument `{t}` is not an integer"
                    )));
                }
                t.parse::<i64>()
                    .map_err(|_| SkillError::Malformed(format!("argument `{t}` out of range")))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok(ActionDecision {
        skill: name.to_string(),
        args,
    })
}

/// Screen-space layout of the inventory screen, shared with the simulator.
pub mod gui {
    pub const CURSOR_HOME: (i64, i64) = (960, 540);
    pub const SLOT_TOLERANCE: i64 = 36;
    pub const GRID_ORIGIN: (i64, i64) = (880, 240);
    pub const GRID_SPACING: i64 = 80;
    pub const CRAFT_OUTPUT: (i64, i64) = (1160, 320);
    pub const FURNACE_INPUT: (i64, i64) = (560, 240);
    pub const FURNACE_FUEL: (i64, i64) = (560, 400);
    pub const FURNACE_OUTPUT: (i64, i64) = (680, 320);
    pub const HOTBAR_Y: i64 = 1040;
    pub const PANEL_ORIGIN: (i64, i64) = (640, 700);
    pub const SLOT_SPACING: i64 = 80;
    pub const PANEL_ROWS: usize = 3;
    pub const HOTBAR_SLOTS: usize = 9;

    /// Center of crafting-grid cell (row, col), both 0..3.
    pub fn grid_cell(row: usize, col: usize) -> (i64, i64) {
        (
            GRID_ORIGIN.0 + GRID_SPACING * col as i64,
            GRID_ORIGIN.1 + GRID_SPACING * row as i64,
        )
    }

    pub fn hotbar_slot(index: usize) -> (i64, i64) {
        (PANEL_ORIGIN.0 + SLOT_SPACING * index as i64, HOTBAR_Y)
    }

    pub fn panel_slot(row: usize, col: usize) -> (i64, i64) {
        (
            PANEL_ORIGIN.0 + SLOT_SPACING * col as i64,
            PANEL_ORIGIN.1 + SLOT_SPACING * row as i64,
        )
    }

    pub fn hits(point: (i64, i64), slot: (i64, i64)) -> bool {
        (point.0 - slot.0).abs() <= SLOT_TOLERANCE && (point.1 - slot.1).abs() <= SLOT_TOLERANCE
    }
}

/// Look-down/look-up mouse travel; large enough to hit the pitch clamp.
pub const LOOK_VERTICAL_PX: i64 = 600;

/// Event script builder; tracks the GUI cursor so absolute targets become relative moves.
struct Script {
    events: Vec<InputEvent>,
    cursor: (i64, i64),
}

impl Script {
    fn new() -> Self {
        Self {
            events: Vec::new(),
            cursor: gui::CURSOR_HOME,
        }
    }

    fn tap(mut self, key: Key) -> Self {
        self.events.push(InputEvent::KeyPress { key });
        self.events.push(InputEvent::KeyRelease { key });
        self
    }

    fn hold_key(mut self, key: Key, ms: i64) -> Self {
        self.events.push(InputEvent::KeyPress { key });
        self.events.push(InputEvent::Wait { ms: ms as u64 });
        self.events.push(InputEvent::KeyRelease { key });
        self
    }

    fn hold_button(mut self, button: Button, ms: i64) -> Self {
        self.events.push(InputEvent::MouseButtonPress { button });
        self.events.push(InputEvent::Wait { ms: ms as u64 });
        self.events.push(InputEvent::MouseButtonRelease { button });
        self
    }

    fn click(mut self, button: Button) -> Self {
        self.events.push(InputEvent::MouseButtonPress { button });
        self.events.push(InputEvent::MouseButtonRelease { button });
        self
    }

    fn look(mut self, dx: i64, dy: i64) -> Self {
        self.events.push(InputEvent::MouseMove { dx, dy });
        self
    }

    fn wait(mut self, ms: u64) -> Self {
        self.events.push(InputEvent::Wait { ms });
        self
    }

    fn open_gui(mut self) -> Self {
        self.cursor = gui::CURSOR_HOME;
        self.tap(Key::Inventory)
    }

    fn close_gui(self) -> Self {
        self.tap(Key::Inventory)
    }

    fn point(mut self, to: (i64, i64)) -> Self {
        let (dx, dy) = (to.0 - self.cursor.0, to.1 - self.cursor.1);
        self.cursor = to;
        self.look(dx, dy)
    }

    fn click_at(self, to: (i64, i64), button: Button) -> Self {
        self.point(to).click(button)
    }

    /// Pick up the stack at `from`, drop one item into each cell, return the rest.
    fn spread(mut self, from: (i64, i64), cells: &[(usize, usize)]) -> Self {
        self = self.click_at(from, Button::Left);
        for &(r, c) in cells {
            self = self.click_at(gui::grid_cell(r, c), Button::Right);
        }
        self.click_at(from, Button::Left)
    }

    fn take_output(self) -> Self {
        self.click_at(gui::CRAFT_OUTPUT, Button::Left)
    }

    fn done(self) -> Vec<InputEvent> {
        self.events
    }
}

fn xy(args: &[i64], i: usize) -> (i64, i64) {
    (args[i], args[i + 1])
}

const TOP_ROW: [(usize, usize); 3] = [(0, 0), (0, 1), (0, 2)];
const HANDLE: [(usize, usize); 2] = [(1, 1), (2, 1)];

fn pickaxe(args: &[i64]) -> Vec<InputEvent> {
    Script::new()
        .open_gui()
        .spread(xy(args, 0), &TOP_ROW)
        .spread(xy(args, 2), &HANDLE)
        .take_output()
        .close_gui()
        .done()
}

fn coord(name: &str, what: &str) -> ParamSpec {
    ParamSpec::new(name, ParamType::PixelCoord, what)
}

fn key(name: &str, what: &str) -> ParamSpec {
    ParamSpec::new(name, ParamType::HotbarKey, what)
}

fn dur(name: &str, what: &str) -> ParamSpec {
    ParamSpec::new(name, ParamType::DurationMs, what)
}

fn offset(name: &str, what: &str) -> ParamSpec {
    ParamSpec::new(name, ParamType::SignedOffset, what)
}

fn skill(name: &str, params: Vec<ParamSpec>, description: &str) -> SkillSpec {
    SkillSpec {
        name: name.into(),
        params,
        description: description.into(),
    }
}

fn standard_entries() -> Vec<(SkillSpec, Expansion)> {
    vec![
        (
            skill(
                "craft_furnace",
                vec![coord("c_x", "cobblestone x"), coord("c_y", "cobblestone y")],
                "craft a furnace from eight cobblestone; (c_x, c_y) is where the cobblestone sits in the inventory; needs a placed crafting table",
            ),
            Box::new(|a| {
                let ring = [(0, 0), (0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1), (2, 2)];
                Script::new().open_gui().spread(xy(a, 0), &ring).take_output().close_gui().done()
            }),
        ),
        (
            skill(
                "craft_iron_pickaxe",
                vec![
                    coord("i_x", "iron ingot x"),
                    coord("i_y", "iron ingot y"),
                    coord("s_x", "stick x"),
                    coord("s_y", "stick y"),
                ],
                "craft an iron pickaxe from three iron ingots at (i_x, i_y) and two sticks at (s_x, s_y); needs a placed crafting table",
            ),
            Box::new(pickaxe),
        ),
        (
            skill(
                "craft_plank",
                vec![coord("l_x", "log x"), coord("l_y", "log y")],
                "turn one log at inventory position (l_x, l_y) into four planks",
            ),
            Box::new(|a| Script::new().open_gui().spread(xy(a, 0), &[(0, 0)]).take_output().close_gui().done()),
        ),
        (
            skill(
                "craft_stick",
                vec![coord("p_x", "plank x"), coord("p_y", "plank y")],
                "turn two planks at inventory position (p_x, p_y) into four sticks",
            ),
            Box::new(|a| {
                Script::new().open_gui().spread(xy(a, 0), &[(0, 1), (1, 1)]).take_output().close_gui().done()
            }),
        ),
        (
            skill(
                "craft_stone_pickaxe",
                vec![
                    coord("c_x", "cobblestone x"),
                    coord("c_y", "cobblestone y"),
                    coord("s_x", "stick x"),
                    coord("s_y", "stick y"),
                ],
                "craft a stone pickaxe from three cobblestone at (c_x, c_y) and two sticks at (s_x, s_y); needs a placed crafting table",
            ),
            Box::new(pickaxe),
        ),
        (
            skill(
                "craft_wood_pickaxe",
                vec![
                    coord("p_x", "plank x"),
                    coord("p_y", "plank y"),
                    coord("s_x", "stick x"),
                    coord("s_y", "stick y"),
                ],
                "craft a wooden pickaxe from three planks at (p_x, p_y) and two sticks at (s_x, s_y); needs a placed crafting table",
            ),
            Box::new(pickaxe),
        ),
        (
            skill(
                "dig_horizontal_mine_tunnels",
                vec![key("k", "hotbar key holding a pickaxe")],
                "level the view and tunnel forward through stone with the pickaxe on key k, collecting cobblestone",
            ),
            Box::new(|a| {
                Script::new()
                    .tap(Key::Hotbar(a[0] as u8))
                    .look(0, -LOOK_VERTICAL_PX)
                    .look(0, LOOK_VERTICAL_PX)
                    .hold_button(Button::Left, 1600)
                    .hold_key(Key::Forward, 250)
                    .done()
            }),
        ),
        (
            skill(
                "dig_vertical_mine_tunnels",
                vec![key("k", "hotbar key holding a pickaxe"), dur("d", "mouse hold time")],
                "look straight down and dig for d ms with the pickaxe on key k to go deeper underground",
            ),
            Box::new(|a| {
                Script::new()
                    .tap(Key::Hotbar(a[0] as u8))
                    .look(0, LOOK_VERTICAL_PX)
                    .hold_button(Button::Left, a[1])
                    .look(0, -LOOK_VERTICAL_PX)
                    .done()
            }),
        ),
        (
            skill(
                "mine_diamond_ore",
                vec![key("k", "hotbar key of the iron pickaxe"), dur("d", "mouse hold time")],
                "break the diamond ore under the crosshair (must be in reach and aligned) with the pickaxe on key k",
            ),
            Box::new(|a| Script::new().tap(Key::Hotbar(a[0] as u8)).hold_button(Button::Left, a[1]).done()),
        ),
        (
            skill(
                "mine_iron_ore",
                vec![key("k", "hotbar key of the stone pickaxe"), dur("d", "mouse hold time")],
                "break the iron ore under the crosshair (must be in reach and aligned) with the pickaxe on key k",
            ),
            Box::new(|a| Script::new().tap(Key::Hotbar(a[0] as u8)).hold_button(Button::Left, a[1]).done()),
        ),
        (
            skill(
                "mine_log",
                vec![dur("d", "mouse hold time")],
                "chop the tree trunk under the crosshair (must be in reach and aligned) by holding the left button for d ms",
            ),
            Box::new(|a| Script::new().hold_button(Button::Left, a[0]).done()),
        ),
        (
            skill("move_forward", vec![dur("d", "time to hold w")], "walk forward for d ms"),
            Box::new(|a| Script::new().hold_key(Key::Forward, a[0]).done()),
        ),
        (
            skill(
                "move_item_to_hotbar",
                vec![coord("t_x", "item x"), coord("t_y", "item y")],
                "shift-click the inventory item at (t_x, t_y) into a free hotbar slot",
            ),
            Box::new(|a| {
                let mut s = Script::new().open_gui().point(xy(a, 0));
                s.events.push(InputEvent::KeyPress { key: Key::Shift });
                s = s.click(Button::Left);
                s.events.push(InputEvent::KeyRelease { key: Key::Shift });
                s.close_gui().done()
            }),
        ),
        (
            skill(
                "place_blocks_underfoot",
                vec![key("k", "hotbar key holding cobblestone"), ParamSpec::new("n", ParamType::Integer, "blocks to place")],
                "jump and place n cobblestone from key k beneath the player to climb up one block each",
            ),
            Box::new(|a| {
                let mut s = Script::new().tap(Key::Hotbar(a[0] as u8)).look(0, LOOK_VERTICAL_PX);
                for _ in 0..a[1] {
                    s.events.push(InputEvent::KeyPress { key: Key::Jump });
                    s = s.click(Button::Right);
                    s.events.push(InputEvent::KeyRelease { key: Key::Jump });
                }
                s.look(0, -LOOK_VERTICAL_PX).done()
            }),
        ),
        (
            skill(
                "put_functional_block",
                vec![key("k", "hotbar key of the block"), dur("d", "mouse hold time")],
                "place the crafting table or furnace held on key k onto the ground",
            ),
            Box::new(|a| Script::new().tap(Key::Hotbar(a[0] as u8)).hold_button(Button::Right, a[1]).done()),
        ),
        (
            skill(
                "smelt_iron_ore",
                vec![
                    coord("i_o_x", "iron ore x"),
                    coord("i_o_y", "iron ore y"),
                    coord("p_x", "plank x"),
                    coord("p_y", "plank y"),
                ],
                "smelt the iron ore at (i_o_x, i_o_y) into iron ingots in a placed furnace, burning planks from (p_x, p_y)",
            ),
            Box::new(|a| {
                Script::new()
                    .open_gui()
                    .click_at(xy(a, 0), Button::Left)
                    .click_at(gui::FURNACE_INPUT, Button::Left)
                    .click_at(xy(a, 2), Button::Left)
                    .click_at(gui::FURNACE_FUEL, Button::Right)
                    .click(Button::Right)
                    .click_at(xy(a, 2), Button::Left)
                    .wait(4000)
                    .click_at(gui::FURNACE_OUTPUT, Button::Left)
                    .close_gui()
                    .done()
            }),
        ),
        (
            skill(
                "turn",
                vec![offset("x", "horizontal pixel offset"), offset("y", "vertical pixel offset")],
                "rotate the view so the crosshair moves by (x, y) pixels toward a target; values may be negative",
            ),
            Box::new(|a| Script::new().look(a[0], a[1]).done()),
        ),
        (
            skill(
                "turn_and_move_forward",
                vec![
                    dur("d", "time to hold w"),
                    offset("x", "horizontal pixel offset"),
                    offset("y", "vertical pixel offset"),
                ],
                "rotate the view by (x, y) pixels toward a target, then walk forward for d ms",
            ),
            Box::new(|a| Script::new().look(a[1], a[2]).hold_key(Key::Forward, a[0]).done()),
        ),
    ]
}

/// The eighteen base skills.
pub fn standard_library() -> SkillLibrary {
    let mut lib = SkillLibrary::default();
    for (spec, expand) in standard_entries() {
        lib.register_skill(spec, expand)
            .expect("built-in skills are valid");
    }
    lib
}

/// Base skills plus crafting-table crafting, which the tool progression needs.
pub fn agent_library() -> SkillLibrary {
    let mut lib = standard_library();
    lib.register_skill(
        skill(
            "craft_crafting_table",
            vec![coord("p_x", "plank x"), coord("p_y", "plank y")],
            "turn four planks at inventory position (p_x, p_y) into a crafting table",
        ),
        Box::new(|a| {
            Script::new()
                .open_gui()
                .spread(xy(a, 0), &[(0, 0), (0, 1), (1, 0), (1, 1)])
                .take_output()
                .close_gui()
                .done()
        }),
    )
    .expect("crafting table skill is valid");
    lib
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib() -> SkillLibrary {
        standard_library()
    }

    #[test]
    fn register_and_reject() {
        let mut l = SkillLibrary::default();
        let turn = || skill("turn", vec![offset("x", ""), offset("y", "")], "rotate");
        l.register_skill(
            turn(),
            Box::new(|a| vec![InputEvent::MouseMove { dx: a[0], dy: a[1] }]),
        )
        .unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.library_text().lines().count(), 1);
        assert_eq!(
            l.register_skill(turn(), Box::new(|_| vec![InputEvent::Wait { ms: 1 }])),
            Err(SkillError::Duplicate("turn".into()))
        );
        assert_eq!(
            l.register_skill(skill("noop", vec![], ""), Box::new(|_| vec![])),
            Err(SkillError::EmptyExpansion("noop".into()))
        );
    }

    #[test]
    fn standard_library_listing() {
        let text = lib().library_text();
        assert_eq!(text.lines().count(), 18);
        assert!(text.contains("craft_plank(l_x: pixel_coord, l_y: pixel_coord) — "));
        assert_eq!(text, lib().library_text());
        let names: Vec<&str> = text.lines().map(|l| l.split('(').next().unwrap()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert_eq!(agent_library().len(), 19);
    }

    #[test]
    fn format_examples() {
        assert_eq!(
            format_action(&ActionDecision::new("craft_plank", [712, 431])),
            "Action: craft_plank(712, 431)"
        );
        assert_eq!(
            format_action(&ActionDecision::new("turn", [-120, 35])),
            "Action: turn(-120, 35)"
        );
        assert_eq!(
            format_action(&ActionDecision::new("dig_vertical_mine_tunnels", [2, 900])),
            "Action: dig_vertical_mine_tunnels(2, 900)"
        );
    }

    #[test]
    fn parse_examples() {
        let l = lib();
        assert_eq!(
            parse_action("thinking... Action: mine_log(1200)", &l),
            Ok(ActionDecision::new("mine_log", [1200]))
        );
        assert_eq!(
            parse_action("Action: craft_stick(640,420) Action: turn(5,5)", &l),
            Ok(ActionDecision::new("turn", [5, 5]))
        );
        assert_eq!(
            parse_action("I will chop wood.", &l),
            Err(SkillError::NoMarker)
        );
        assert_eq!(
            parse_action("Action: place_blocks_underfoot(10, 3)", &l),
            Err(SkillError::HotbarRange {
                param: "k".into(),
                value: 10
            })
        );
        assert!(matches!(
            parse_action("Action: fly(1)", &l),
            Err(SkillError::UnknownSkill(_))
        ));
        assert!(matches!(
            parse_action("Action: turn(1)", &l),
            Err(SkillError::Arity { .. })
        ));
        assert!(matches!(
            parse_action("Action: turn(1, x)", &l),
            Err(SkillError::Malformed(_))
        ));
        assert!(matches!(
            parse_action("Action: turn(1, 2", &l),
            Err(SkillError::Malformed(_))
        ));
        assert!(matches!(
            parse_action("Action: turn(99999999999999999999, 2)", &l),
            Err(SkillError::Malformed(_))
        ));
        assert_eq!(
            parse_action("Action:turn( -3 ,+4 )", &l),
            Ok(ActionDecision::new("turn", [-3, 4]))
        );
    }

    #[test]
    fn expansion_examples() {
        let l = lib();
        assert_eq!(
            l.expand(&ActionDecision::new("turn", [-120, 35])).unwrap(),
            vec![InputEvent::MouseMove { dx: -120, dy: 35 }]
        );
        assert_eq!(
            l.expand(&ActionDecision::new("move_forward", [500]))
                .unwrap(),
            vec![
                InputEvent::KeyPress { key: Key::Forward },
                InputEvent::Wait { ms: 500 },
                InputEvent::KeyRelease { key: Key::Forward },
            ]
        );
        assert_eq!(
            l.expand(&ActionDecision::new("mine_log", [1200])).unwrap(),
            vec![
                InputEvent::MouseButtonPress {
                    button: Button::Left
                },
                InputEvent::Wait { ms: 1200 },
                InputEvent::MouseButtonRelease {
                    button: Button::Left
                },
            ]
        );
    }

    #[test]
    fn gui_scripts_return_cursor_moves_to_absolute_slots() {
        let events = lib()
            .expand(&ActionDecision::new("craft_plank", [640, 1040]))
            .unwrap();
        let mut cursor = gui::CURSOR_HOME;
        let mut clicks = Vec::new();
        for ev in &events {
            match ev {
                InputEvent::MouseMove { dx, dy } => cursor = (cursor.0 + dx, cursor.1 + dy),
                InputEvent::MouseButtonPress { button } => clicks.push((cursor, *button)),
                _ => {}
            }
        }
        assert_eq!(
            clicks,
            vec![
                ((640, 1040), Button::Left),
                (gui::grid_cell(0, 0), Button::Right),
                ((640, 1040), Button::Left),
                (gui::CRAFT_OUTPUT, Button::Left),
            ]
        );
    }

    #[test]
    fn all_expansions_balanced() {
        let l = agent_library();
        for spec in l.specs() {
            let args: Vec<i64> = spec.params.iter().map(|p| *p.ptype.range().end()).collect();
            let events = l
                .expand(&ActionDecision {
                    skill: spec.name.clone(),
                    args,
                })
                .unwrap();
            assert!(balanced(&events), "{}", spec.name);
        }
    }

    #[test]
    fn execute_reports_and_records() {
        let l = lib();
        let mut backend = RecordingBackend::new(Vec::new());
        let report = l
            .execute(&ActionDecision::new("move_forward", [500]), &mut backend)
            .unwrap();
        assert_eq!(report.events, 3);
        assert_eq!(report.duration_ms, 500);
        let text = String::from_utf8(backend.into_inner()).unwrap();
        assert_eq!(
            text.lines().next(),
            Some(r#"{"kind":"key_press","key":"w"}"#)
        );
    }

    #[test]
    fn backend_rejection_propagates() {
        struct Refuse;
        impl InputBackend for Refuse {
            fn deliver(&mut self, _: &InputEvent) -> Result<Ack, BackendError> {
                Err(BackendError("offline".into()))
            }
        }
        let err = lib()
            .execute(&ActionDecision::new("turn", [1, 1]), &mut Refuse)
            .unwrap_err();
        assert_eq!(
            err,
            SkillError::Backend {
                index: 0,
                source: BackendError("offline".into())
            }
        );
    }

    #[test]
    fn key_serde_round_trip() {
        for k in [
            Key::Forward,
            Key::Inventory,
            Key::Jump,
            Key::Shift,
            Key::Hotbar(3),
        ] {
            let s = serde_json::to_string(&k).unwrap();
            assert_eq!(serde_json::from_str::<Key>(&s).unwrap(), k);
        }
        assert!(serde_json::from_str::<Key>("\"0\"").is_err());
    }
}
