//! Deterministic 2.5-D blockworld that consumes input events and emits detections.
//!
//! The world is a horizontal (x, z) plane plus discrete depth levels reached by
//! digging straight down. Entities are points with a block-sized box; the
//! camera projects them with a linear angular model so that a mouse move of
//! `dx` pixels shifts an entity's screen position by exactly `dx`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::perception::{DetectionRecord, Screen};
use crate::skills::{gui, Ack, BackendError, Button, InputBackend, InputEvent, Key};

/// Block entities the world may contain; matches the graph's environmental nodes.
pub const ENV_VOCABULARY: [&str; 8] = [
    "bedrock",
    "coal_ore",
    "diamond_ore",
    "iron_ore",
    "lava",
    "stone",
    "trunk",
    "water",
];

/// Items whose first acquisition counts as a milestone, in progression order.
pub const MILESTONE_ITEMS: [&str; 12] = [
    "log",
    "plank",
    "stick",
    "crafting_table",
    "wood_pickaxe",
    "cobblestone",
    "stone_pickaxe",
    "iron_ore",
    "furnace",
    "iron_ingot",
    "iron_pickaxe",
    "diamond",
];

pub fn milestone_id(item: &str) -> String {
    format!("obtain_{item}")
}

pub const MAX_STACK: u32 = 64;
const SLOTS: usize = 36;

/// Detector label for an inventory item.
pub fn icon_label(item: &str) -> String {
    match item {
        "iron_ingot" => "iron_icon".into(),
        other => format!("{other}_icon"),
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("invalid recipe table: {0}")]
    Recipes(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityShape {
    /// Box width and height in blocks.
    pub bw: f64,
    pub bh: f64,
    /// Height of the box center above the floor, in blocks.
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub focal: f64,
    pub screen: Screen,
    pub deg_per_px: f64,
    pub half_fov_deg: f64,
    pub max_distance: f64,
    pub eye_height: f64,
    pub shapes: BTreeMap<String, EntityShape>,
}

impl Default for CameraModel {
    fn default() -> Self {
        let block = EntityShape {
            bw: 1.0,
            bh: 1.0,
            center: 0.5,
        };
        let flat = EntityShape {
            bw: 1.0,
            bh: 0.5,
            center: 0.0,
        };
        let mut shapes = BTreeMap::new();
        shapes.insert(
            "trunk".to_string(),
            EntityShape {
                bw: 1.0,
                bh: 2.0,
                center: 1.0,
            },
        );
        for name in ["coal_ore", "iron_ore", "diamond_ore", "stone", "bedrock"] {
            shapes.insert(name.to_string(), block);
        }
        for name in ["water", "lava"] {
            shapes.insert(name.to_string(), flat);
        }
        Self {
            focal: 600.0,
            screen: Screen::default(),
            deg_per_px: 0.15,
            half_fov_deg: 45.0,
            max_distance: 64.0,
            eye_height: 1.62,
            shapes,
        }
    }
}

impl CameraModel {
    pub fn shape(&self, name: &str) -> EntityShape {
        self.shapes.get(name).copied().unwrap_or(EntityShape {
            bw: 1.0,
            bh: 1.0,
            center: 0.5,
        })
    }

    /// Unclamped projected box size at horizontal distance `d`.
    pub fn box_size(&self, name: &str, d: f64) -> (f64, f64) {
        let s = self.shape(name);
        (s.bw * self.focal / d, s.bh * self.focal / d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Kinematics {
    pub walk_speed: f64,
    /// Crosshair alignment tolerance for mining, in pixels.
    pub align_px: f64,
    /// Minimum downward pitch for digging or building underfoot.
    pub dig_pitch_deg: f64,
    /// Reach thresholds on the projected box, same rule as range estimation.
    pub reach_w: f64,
    pub reach_h: f64,
}

impl Default for Kinematics {
    fn default() -> Self {
        Self {
            walk_speed: 4.3,
            align_px: 40.0,
            dig_pitch_deg: 60.0,
            reach_w: 110.0,
            reach_h: 275.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub entity: String,
    pub count: i64,
    pub min_dist: f64,
    pub max_dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBand {
    pub entity: String,
    pub min_level: u32,
    pub per_level: i64,
    pub min_dist: f64,
    pub max_dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedEntity {
    pub entity: String,
    pub x: f64,
    pub z: f64,
    #[serde(default)]
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningRule {
    #[serde(default)]
    pub drop: Option<String>,
    /// Break time per tool; the key `any` matches every held item, including none.
    pub times: BTreeMap<String, u64>,
    /// Break time with an unlisted tool; such breaks drop nothing.
    pub wrong_tool_ms: u64,
}

impl MiningRule {
    fn time_for(&self, tool: &str) -> Option<u64> {
        self.times
            .get(tool)
            .or_else(|| self.times.get("any"))
            .copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_max_depth")]
    pub max_depth: u32,
    #[serde(default)]
    pub min_separation: f64,
    #[serde(default)]
    pub surface: Vec<Placement>,
    #[serde(default)]
    pub underground: Vec<DepthBand>,
    #[serde(default)]
    pub fixed: Vec<FixedEntity>,
    pub mining: BTreeMap<String, MiningRule>,
    /// Recipe table file; the built-in table is used when absent.
    #[serde(default)]
    pub recipes: Option<String>,
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub kinematics: Kinematics,
}

fn default_max_depth() -> u32 {
    5
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn plains_default() -> Self {
        Self::from_json(crate::assets::PLAINS_DEFAULT).expect("shipped scenario is valid")
    }

    pub fn check(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        let known = |e: &str| ENV_VOCABULARY.contains(&e);
        for p in &self.surface {
            if p.count < 0 {
                return bad(format!("negative count {} for {}", p.count, p.entity));
            }
            if !known(&p.entity) {
                return bad(format!("unknown entity `{}`", p.entity));
            }
            if !(0.0 <= p.min_dist && p.min_dist <= p.max_dist) {
                return bad(format!("bad distance band for {}", p.entity));
            }
        }
        for b in &self.underground {
            if b.per_level < 0 {
                return bad(format!("negative count {} for {}", b.per_level, b.entity));
            }
            if !known(&b.entity) {
                return bad(format!("unknown entity `{}`", b.entity));
            }
            if !(0.0 <= b.min_dist && b.min_dist <= b.max_dist) {
                return bad(format!("bad distance band for {}", b.entity));
            }
        }
        for f in &self.fixed {
            if !known(&f.entity) {
                return bad(format!("unknown entity `{}`", f.entity));
            }
            if f.level > self.max_depth {
                return bad(format!("{} placed below max depth", f.entity));
            }
        }
        if self.camera.focal <= 0.0 || self.camera.deg_per_px <= 0.0 {
            return bad("camera focal and sensitivity must be positive".into());
        }
        if self.min_separation < 0.0 {
            return bad("negative separation".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Station {
    None,
    CraftingTable,
    Furnace,
}

impl Station {
    fn item(self) -> Option<&'static str> {
        match self {
            Station::None => None,
            Station::CraftingTable => Some("crafting_table"),
            Station::Furnace => Some("furnace"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub product: String,
    pub count: u32,
    pub inputs: BTreeMap<String, u32>,
    pub station: Station,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeTable {
    pub recipes: Vec<Recipe>,
    /// Items smelted per unit of each fuel.
    pub fuels: BTreeMap<String, u32>,
}

impl RecipeTable {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let t: Self = serde_json::from_str(text)?;
        t.check()?;
        Ok(t)
    }

    pub fn builtin() -> Self {
        Self::from_json(crate::assets::RECIPES).expect("shipped recipes are valid")
    }

    /// Rejects empty recipes, furnace recipes with more than one input, and cycles.
    pub fn check(&self) -> Result<(), SimError> {
        for r in &self.recipes {
            if r.count == 0 || r.inputs.is_empty() || r.inputs.values().any(|&n| n == 0) {
                return Err(SimError::Recipes(format!(
                    "recipe for {} is empty",
                    r.product
                )));
            }
            if r.station == Station::Furnace && r.inputs.values().sum::<u32>() != 1 {
                return Err(SimError::Recipes(format!(
                    "furnace recipe for {} needs one input",
                    r.product
                )));
            }
        }
        // Depth-first cycle check over product -> input dependencies.
        fn visit<'a>(
            item: &'a str,
            deps: &BTreeMap<&'a str, Vec<&'a str>>,
            state: &mut BTreeMap<&'a str, bool>,
        ) -> bool {
            match state.get(item) {
                Some(true) => return true,
                Some(false) => return false,
                None => {}
            }
            state.insert(item, false);
            for d in deps.get(item).into_iter().flatten() {
                if !visit(d, deps, state) {
                    return false;
                }
            }
            state.insert(item, true);
            true
        }
        let mut deps: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for r in &self.recipes {
            let e = deps.entry(r.product.as_str()).or_default();
            e.extend(r.inputs.keys().map(String::as_str));
            e.extend(r.station.item());
        }
        let mut state = BTreeMap::new();
        for item in deps.keys() {
            if !visit(item, &deps, &mut state) {
                return Err(SimError::Recipes(format!(
                    "dependency cycle through {item}"
                )));
            }
        }
        Ok(())
    }

    fn craft_match(&self, grid: &BTreeMap<String, u32>) -> Option<&Recipe> {
        self.recipes
            .iter()
            .find(|r| r.station != Station::Furnace && &r.inputs == grid)
    }

    fn smelt_for(&self, input: &str) -> Option<&Recipe> {
        self.recipes
            .iter()
            .find(|r| r.station == Station::Furnace && r.inputs.contains_key(input))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stack {
    pub item: String,
    pub count: u32,
}

impl Stack {
    pub fn new(item: &str, count: u32) -> Self {
        Self {
            item: item.into(),
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: usize,
    pub name: String,
    pub x: f64,
    pub z: f64,
    pub level: u32,
    pub mined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub z: f64,
    pub level: u32,
    /// Degrees clockwise from +z; forward is (sin yaw, cos yaw).
    pub yaw: f64,
    /// Degrees, positive looking down.
    pub pitch: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GuiState {
    pub cursor: (i64, i64),
    pub held: Option<Stack>,
    pub grid: Vec<Option<Stack>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FurnaceState {
    pub input: Option<Stack>,
    pub fuel: Option<Stack>,
    pub output: Option<Stack>,
    pub burn_left: u32,
    pub progress_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub seed: u64,
    pub pose: Pose,
    pub entities: Vec<Entity>,
    pub generated_levels: BTreeSet<u32>,
    /// Slots 0..9 are the hotbar, 9..36 the panel rows.
    pub slots: Vec<Option<Stack>>,
    /// Selected hotbar key, 1..=9.
    pub selected: u8,
    pub gui: Option<GuiState>,
    pub keys_held: BTreeSet<Key>,
    pub buttons_held: BTreeMap<Button, u64>,
    pub stations: BTreeSet<String>,
    pub furnace: FurnaceState,
    pub clock_ms: u64,
    pub ever_obtained: BTreeSet<String>,
}

impl WorldState {
    pub fn count(&self, item: &str) -> u32 {
        self.slots
            .iter()
            .flatten()
            .filter(|s| s.item == item)
            .map(|s| s.count)
            .sum()
    }

    pub fn inventory(&self) -> BTreeMap<String, u32> {
        let mut m = BTreeMap::new();
        for s in self.slots.iter().flatten() {
            *m.entry(s.item.clone()).or_insert(0) += s.count;
        }
        m
    }

    pub fn inventory_open(&self) -> bool {
        self.gui.is_some()
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("world serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn milestones(&self) -> BTreeSet<String> {
        MILESTONE_ITEMS
            .iter()
            .filter(|i| self.ever_obtained.contains(**i))
            .map(|i| milestone_id(i))
            .collect()
    }
}

/// Where a GUI click landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Inv(usize),
    Grid(usize),
    Output,
    FurnaceIn,
    FurnaceFuel,
    FurnaceOut,
}

fn slot_point(i: usize) -> (i64, i64) {
    if i < gui::HOTBAR_SLOTS {
        gui::hotbar_slot(i)
    } else {
        let p = i - gui::HOTBAR_SLOTS;
        gui::panel_slot(p / 9, p % 9)
    }
}

fn norm_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Projected view of one entity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub distance: f64,
    pub screen_x: f64,
    pub screen_y: f64,
    pub w: f64,
    pub h: f64,
}

/// Which items a GUI slot takes.
type Acceptor<'a> = Box<dyn Fn(&str) -> bool + 'a>;

pub struct Simulator {
    pub scenario: ScenarioConfig,
    pub recipes: RecipeTable,
    pub world: WorldState,
    /// Every event applied since reset, for replay.
    pub event_log: Vec<InputEvent>,
}

impl fmt::Debug for Simulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulator")
            .field("scenario", &self.scenario.name)
            .field("seed", &self.world.seed)
            .finish()
    }
}

impl Simulator {
    pub fn reset(
        seed: u64,
        scenario: ScenarioConfig,
        recipes: RecipeTable,
    ) -> Result<Self, SimError> {
        scenario.check()?;
        recipes.check()?;
        let world = WorldState {
            seed,
            pose: Pose {
                x: 0.0,
                z: 0.0,
                level: 0,
                yaw: 0.0,
                pitch: 0.0,
            },
            entities: Vec::new(),
            generated_levels: BTreeSet::new(),
            slots: vec![None; SLOTS],
            selected: 1,
            gui: None,
            keys_held: BTreeSet::new(),
            buttons_held: BTreeMap::new(),
            stations: BTreeSet::new(),
            furnace: FurnaceState::default(),
            clock_ms: 0,
            ever_obtained: BTreeSet::new(),
        };
        let mut sim = Self {
            scenario,
            recipes,
            world,
            event_log: Vec::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let surface = sim.scenario.surface.clone();
        for p in &surface {
            for _ in 0..p.count {
                sim.scatter(&mut rng, &p.entity, 0, (0.0, 0.0), p.min_dist, p.max_dist);
            }
        }
        for f in sim.scenario.fixed.clone() {
            sim.spawn(&f.entity, f.x, f.z, f.level);
        }
        sim.world.generated_levels.insert(0);
        Ok(sim)
    }

    fn spawn(&mut self, name: &str, x: f64, z: f64, level: u32) {
        let id = self.world.entities.len();
        self.world.entities.push(Entity {
            id,
            name: name.into(),
            x,
            z,
            level,
            mined: false,
        });
    }

    /// Place one entity in an annulus around `center`, keeping the configured separation.
    fn scatter(
        &mut self,
        rng: &mut ChaCha8Rng,
        name: &str,
        level: u32,
        center: (f64, f64),
        lo: f64,
        hi: f64,
    ) {
        let mut pos = center;
        for _ in 0..64 {
            let r = if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            };
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            pos = (center.0 + r * theta.sin(), center.1 + r * theta.cos());
            let clear = self
                .world
                .entities
                .iter()
                .filter(|e| e.level == level)
                .all(|e| (e.x - pos.0).hypot(e.z - pos.1) >= self.scenario.min_separation);
            if clear {
                break;
            }
        }
        self.spawn(name, pos.0, pos.1, level);
    }

    /// Ores for a level are laid out when the agent first reaches it, around its position.
    fn generate_level(&mut self, level: u32) {
        if !self.world.generated_levels.insert(level) {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.world.seed ^ u64::from(level).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let center = (self.world.pose.x, self.world.pose.z);
        for band in self.scenario.underground.clone() {
            if level >= band.min_level {
                for _ in 0..band.per_level {
                    self.scatter(
                        &mut rng,
                        &band.entity,
                        level,
                        center,
                        band.min_dist,
                        band.max_dist,
                    );
                }
            }
        }
    }

    pub fn project(&self, e: &Entity) -> Option<Projection> {
        let cam = &self.scenario.camera;
        let pose = &self.world.pose;
        let (dx, dz) = (e.x - pose.x, e.z - pose.z);
        let d = dx.hypot(dz);
        if d < 0.05 || d > cam.max_distance {
            return None;
        }
        let rel = norm_deg(dx.atan2(dz).to_degrees() - pose.yaw);
        if rel.abs() > cam.half_fov_deg {
            return None;
        }
        let shape = cam.shape(&e.name);
        let elevation = (shape.center - cam.eye_height).atan2(d).to_degrees();
        let (cx, cy) = cam.screen.center();
        let screen_x = f64::from(cx) + rel / cam.deg_per_px;
        let screen_y = f64::from(cy) - (elevation + pose.pitch) / cam.deg_per_px;
        if screen_x < 0.0
            || screen_y < 0.0
            || screen_x >= f64::from(cam.screen.width)
            || screen_y >= f64::from(cam.screen.height)
        {
            return None;
        }
        let (w, h) = cam.box_size(&e.name, d);
        Some(Projection {
            distance: d,
            screen_x,
            screen_y,
            w,
            h,
        })
    }

    /// Detector output for the current view. Confidence is always 1.
    pub fn observe(&self, timestep: u64) -> Vec<DetectionRecord> {
        let cam = &self.scenario.camera;
        let mut out = Vec::new();
        for e in self.visible_entities() {
            let p = self.project(e).expect("visible entities project");
            let w = p.w.round().clamp(1.0, f64::from(cam.screen.width)) as i32;
            let h = p.h.round().clamp(1.0, f64::from(cam.screen.height)) as i32;
            out.push(DetectionRecord::env(
                timestep,
                &e.name,
                p.screen_x.round() as i32,
                p.screen_y.round() as i32,
                w,
                h,
                1.0,
            ));
        }
        let shown = if self.world.inventory_open() {
            SLOTS
        } else {
            gui::HOTBAR_SLOTS
        };
        for (i, s) in self.world.slots.iter().enumerate().take(shown) {
            if let Some(s) = s {
                let (x, y) = slot_point(i);
                out.push(DetectionRecord::inv(
                    timestep,
                    &icon_label(&s.item),
                    x as i32,
                    y as i32,
                    Some(s.count),
                ));
            }
        }
        out
    }

    fn visible_entities(&self) -> impl Iterator<Item = &Entity> {
        let level = self.world.pose.level;
        self.world
            .entities
            .iter()
            .filter(move |e| !e.mined && e.level == level)
            .filter(|e| self.project(e).is_some())
    }

    /// Nearest in-reach entity whose center is within the alignment tolerance.
    fn aimed_entity(&self) -> Option<usize> {
        let k = &self.scenario.kinematics;
        let (cx, cy) = self.scenario.camera.screen.center();
        self.visible_entities()
            .filter_map(|e| {
                let p = self.project(e)?;
                let off = (p.screen_x - f64::from(cx)).hypot(p.screen_y - f64::from(cy));
                // Judge reach on the sizes the detector reports, so perception and world agree.
                let reach = p.w.round() >= k.reach_w || p.h.round() >= k.reach_h;
                (reach && off <= k.align_px).then_some((p.distance, e.id))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, id)| id)
    }

    pub fn milestones(&self) -> BTreeSet<String> {
        self.world.milestones()
    }

    pub fn hash(&self) -> String {
        self.world.hash()
    }

    pub fn apply_events(&mut self, events: &[InputEvent]) -> Vec<String> {
        events.iter().filter_map(|e| self.apply_event(e)).collect()
    }

    /// Apply one event; returns a short note when the event had (or failed to have) an effect.
    pub fn apply_event(&mut self, ev: &InputEvent) -> Option<String> {
        self.event_log.push(*ev);
        match *ev {
            InputEvent::KeyPress {
                key: Key::Inventory,
            } => {
                if self.world.gui.is_some() {
                    self.close_gui();
                } else {
                    self.world.gui = Some(GuiState {
                        cursor: gui::CURSOR_HOME,
                        held: None,
                        grid: vec![None; 9],
                    });
                }
                None
            }
            InputEvent::KeyPress {
                key: Key::Hotbar(k),
            } => {
                self.world.selected = k;
                None
            }
            InputEvent::KeyPress { key } => {
                self.world.keys_held.insert(key);
                None
            }
            InputEvent::KeyRelease { key } => {
                self.world.keys_held.remove(&key);
                None
            }
            InputEvent::MouseMove { dx, dy } => {
                match &mut self.world.gui {
                    Some(g) => {
                        let s = self.scenario.camera.screen;
                        g.cursor.0 = (g.cursor.0 + dx).clamp(0, i64::from(s.width) - 1);
                        g.cursor.1 = (g.cursor.1 + dy).clamp(0, i64::from(s.height) - 1);
                    }
                    None => {
                        let k = self.scenario.camera.deg_per_px;
                        let pose = &mut self.world.pose;
                        pose.yaw = (pose.yaw + dx as f64 * k).rem_euclid(360.0);
                        pose.pitch = (pose.pitch + dy as f64 * k).clamp(-90.0, 90.0);
                    }
                }
                None
            }
            InputEvent::MouseButtonPress { button } => {
                if self.world.gui.is_some() {
                    Some(self.click(button))
                } else {
                    match button {
                        Button::Left => {
                            self.world.buttons_held.insert(button, 0);
                            None
                        }
                        Button::Right => {
                            self.world.buttons_held.insert(button, 0);
                            Some(self.use_item())
                        }
                    }
                }
            }
            InputEvent::MouseButtonRelease { button } => {
                let held = self.world.buttons_held.remove(&button);
                match (button, held) {
                    (Button::Left, Some(ms)) if self.world.gui.is_none() => Some(self.mine(ms)),
                    _ => None,
                }
            }
            InputEvent::Wait { ms } => {
                self.world.clock_ms += ms;
                for v in self.world.buttons_held.values_mut() {
                    *v += ms;
                }
                if self.world.gui.is_none() && self.world.keys_held.contains(&Key::Forward) {
                    let dist = self.scenario.kinematics.walk_speed * ms as f64 / 1000.0;
                    let yaw = self.world.pose.yaw.to_radians();
                    self.world.pose.x += dist * yaw.sin();
                    self.world.pose.z += dist * yaw.cos();
                }
                self.tick_furnace(ms)
            }
        }
    }

    fn selected_item(&self) -> Option<&Stack> {
        self.world.slots[usize::from(self.world.selected) - 1].as_ref()
    }

    fn tool(&self) -> String {
        self.selected_item()
            .map_or_else(|| "hand".into(), |s| s.item.clone())
    }

    fn mine(&mut self, held_ms: u64) -> String {
        let tool = self.tool();
        if let Some(id) = self.aimed_entity() {
            let name = self.world.entities[id].name.clone();
            let label = name.replace('_', " ");
            let Some(rule) = self.scenario.mining.get(&name).cloned() else {
                return format!("{label} cannot be mined");
            };
            let (need, drop) = match rule.time_for(&tool) {
                Some(t) => (t, rule.drop.clone()),
                None => (rule.wrong_tool_ms, None),
            };
            if held_ms < need {
                return format!("mining {label} interrupted after {held_ms} of {need} ms");
            }
            self.world.entities[id].mined = true;
            return match drop {
                Some(item) => {
                    let kept = self.add_item(&item, 1);
                    format!("mined {label}: +{kept} {}", item.replace('_', " "))
                }
                None => format!(
                    "broke {label} with {} and got nothing",
                    tool.replace('_', " ")
                ),
            };
        }

        let pitch = self.world.pose.pitch;
        let Some(stone) = self.scenario.mining.get("stone").cloned() else {
            return "nothing to mine".into();
        };
        let dig = |need: Option<u64>| need.map(|t| held_ms / t.max(1));
        if pitch >= self.scenario.kinematics.dig_pitch_deg {
            let Some(blocks) = dig(stone.times.get(&tool).copied()) else {
                return "digging down needs a pickaxe".into();
            };
            let level = self.world.pose.level;
            let levels = (blocks as u32).min(self.scenario.max_depth - level);
            if levels == 0 {
                return if level >= self.scenario.max_depth {
                    "bedrock below, cannot dig deeper".into()
                } else {
                    "dig interrupted before breaking a block".into()
                };
            }
            for l in level + 1..=level + levels {
                self.world.pose.level = l;
                self.generate_level(l);
            }
            let kept = match &stone.drop {
                Some(item) => self.add_item(item, levels),
                None => 0,
            };
            return format!(
                "dug down to depth {}: +{kept} cobblestone",
                self.world.pose.level
            );
        }
        if self.world.pose.level >= 1 && pitch.abs() <= 30.0 {
            let Some(blocks) = dig(stone.times.get(&tool).copied()) else {
                return "tunnelling needs a pickaxe".into();
            };
            let blocks = blocks.min(2) as u32;
            let kept = match (&stone.drop, blocks) {
                (_, 0) => return "tunnel dig interrupted before breaking a block".into(),
                (Some(item), n) => self.add_item(item, n),
                (None, _) => 0,
            };
            return format!("tunnelled through stone: +{kept} cobblestone");
        }
        "nothing to mine".into()
    }

    fn use_item(&mut self) -> String {
        let Some(stack) = self.selected_item().cloned() else {
            return "nothing in hand to use".into();
        };
        let idx = usize::from(self.world.selected) - 1;
        let label = stack.item.replace('_', " ");
        if stack.item == "crafting_table" || stack.item == "furnace" {
            self.take_from_slot(idx, 1);
            self.world.stations.insert(stack.item.clone());
            return format!("placed {label}");
        }
        if stack.item == "cobblestone"
            && self.world.keys_held.contains(&Key::Jump)
            && self.world.pose.pitch >= self.scenario.kinematics.dig_pitch_deg
        {
            if self.world.pose.level == 0 {
                return "already at the surface".into();
            }
            self.take_from_slot(idx, 1);
            self.world.pose.level -= 1;
            return format!("climbed to depth {}", self.world.pose.level);
        }
        format!("{label} has no use here")
    }

    fn take_from_slot(&mut self, idx: usize, n: u32) {
        if let Some(s) = &mut self.world.slots[idx] {
            s.count -= n.min(s.count);
            if s.count == 0 {
                self.world.slots[idx] = None;
            }
        }
    }

    /// Add items, merging into stacks first, then the first free hotbar/panel slot.
    /// Returns how many fit; the rest are lost.
    fn add_item(&mut self, item: &str, n: u32) -> u32 {
        if n == 0 {
            return 0;
        }
        self.world.ever_obtained.insert(item.to_string());
        let mut left = n;
        for s in self.world.slots.iter_mut().flatten() {
            if s.item == item && s.count < MAX_STACK {
                let take = left.min(MAX_STACK - s.count);
                s.count += take;
                left -= take;
                if left == 0 {
                    return n;
                }
            }
        }
        for slot in self.world.slots.iter_mut() {
            if slot.is_none() {
                let take = left.min(MAX_STACK);
                *slot = Some(Stack::new(item, take));
                left -= take;
                if left == 0 {
                    return n;
                }
            }
        }
        n - left
    }

    fn close_gui(&mut self) {
        if let Some(g) = self.world.gui.take() {
            for s in g.grid.into_iter().flatten().chain(g.held) {
                self.add_item(&s.item, s.count);
            }
        }
    }

    fn slot_at(&self, p: (i64, i64)) -> Option<Slot> {
        if let Some(i) = (0..SLOTS).find(|&i| gui::hits(p, slot_point(i))) {
            return Some(Slot::Inv(i));
        }
        if let Some(i) = (0..9).find(|&i| gui::hits(p, gui::grid_cell(i / 3, i % 3))) {
            return Some(Slot::Grid(i));
        }
        if gui::hits(p, gui::CRAFT_OUTPUT) {
            return Some(Slot::Output);
        }
        if self.world.stations.contains("furnace") {
            for (pt, slot) in [
                (gui::FURNACE_INPUT, Slot::FurnaceIn),
                (gui::FURNACE_FUEL, Slot::FurnaceFuel),
                (gui::FURNACE_OUTPUT, Slot::FurnaceOut),
            ] {
                if gui::hits(p, pt) {
                    return Some(slot);
                }
            }
        }
        None
    }

    fn click(&mut self, button: Button) -> String {
        let g = self.world.gui.as_ref().expect("gui open");
        let Some(slot) = self.slot_at(g.cursor) else {
            return format!("clicked empty space at ({}, {})", g.cursor.0, g.cursor.1);
        };
        let shift = self.world.keys_held.contains(&Key::Shift);
        match slot {
            Slot::Output => {
                if button == Button::Left {
                    self.craft()
                } else {
                    "right-click on the output does nothing".into()
                }
            }
            Slot::FurnaceOut => {
                let Some(out) = self.world.furnace.output.take() else {
                    return "furnace output is empty".into();
                };
                let kept = self.add_item(&out.item, out.count);
                format!("collected {kept} {}", out.item.replace('_', " "))
            }
            Slot::Inv(i) if shift && button == Button::Left => self.quick_move(i),
            _ => {
                let fuels = self.recipes.fuels.clone();
                let smeltable: BTreeSet<String> = self
                    .recipes
                    .recipes
                    .iter()
                    .filter(|r| r.station == Station::Furnace)
                    .flat_map(|r| r.inputs.keys().cloned())
                    .collect();
                let w = &mut self.world;
                let gui = w.gui.as_mut().expect("gui open");
                let (cell, accepts): (&mut Option<Stack>, Acceptor) = match slot {
                    Slot::Inv(i) => (&mut w.slots[i], Box::new(|_| true)),
                    Slot::Grid(i) => (&mut gui.grid[i], Box::new(|_| true)),
                    Slot::FurnaceIn => (
                        &mut w.furnace.input,
                        Box::new(move |it| smeltable.contains(it)),
                    ),
                    Slot::FurnaceFuel => (
                        &mut w.furnace.fuel,
                        Box::new(move |it| fuels.contains_key(it)),
                    ),
                    _ => unreachable!(),
                };
                transfer(cell, &mut gui.held, button, &*accepts)
            }
        }
    }

    fn quick_move(&mut self, i: usize) -> String {
        let Some(stack) = self.world.slots[i].take() else {
            return "nothing to move".into();
        };
        let target: Vec<usize> = if i < gui::HOTBAR_SLOTS {
            (gui::HOTBAR_SLOTS..SLOTS).collect()
        } else {
            (0..gui::HOTBAR_SLOTS).collect()
        };
        let mut left = stack.count;
        for &j in &target {
            if let Some(s) = &mut self.world.slots[j] {
                if s.item == stack.item && s.count < MAX_STACK {
                    let take = left.min(MAX_STACK - s.count);
                    s.count += take;
                    left -= take;
                }
            }
        }
        for &j in &target {
            if left > 0 && self.world.slots[j].is_none() {
                self.world.slots[j] = Some(Stack::new(&stack.item, left));
                left = 0;
            }
        }
        if left > 0 {
            self.world.slots[i] = Some(Stack::new(&stack.item, left));
            return format!("no room to move {}", stack.item.replace('_', " "));
        }
        format!("moved {} {}", stack.count, stack.item.replace('_', " "))
    }

    fn craft(&mut self) -> String {
        let gui = self.world.gui.as_ref().expect("gui open");
        let mut grid: BTreeMap<String, u32> = BTreeMap::new();
        for s in gui.grid.iter().flatten() {
            *grid.entry(s.item.clone()).or_insert(0) += 1;
        }
        if grid.is_empty() {
            return "missing input".into();
        }
        let Some(recipe) = self.recipes.craft_match(&grid).cloned() else {
            return "no recipe matches the grid".into();
        };
        if let Some(station) = recipe.station.item() {
            if !self.world.stations.contains(station) {
                return format!(
                    "{} needs a placed {}",
                    recipe.product.replace('_', " "),
                    station.replace('_', " ")
                );
            }
        }
        let gui = self.world.gui.as_mut().expect("gui open");
        for cell in gui.grid.iter_mut() {
            if let Some(s) = cell {
                s.count -= 1;
                if s.count == 0 {
                    *cell = None;
                }
            }
        }
        let kept = self.add_item(&recipe.product, recipe.count);
        format!("crafted {kept} {}", recipe.product.replace('_', " "))
    }

    fn tick_furnace(&mut self, ms: u64) -> Option<String> {
        let mut made = 0;
        let mut product = String::new();
        let f = &mut self.world.furnace;
        let can_smelt = |f: &FurnaceState, recipes: &RecipeTable| -> Option<Recipe> {
            let input = f.input.as_ref()?;
            let r = recipes.smelt_for(&input.item)?;
            let room = f
                .output
                .as_ref()
                .is_none_or(|o| o.item == r.product && o.count + r.count <= MAX_STACK);
            let fuel = f.burn_left > 0
                || f.fuel
                    .as_ref()
                    .is_some_and(|s| recipes.fuels.contains_key(&s.item));
            (room && fuel).then(|| r.clone())
        };
        if !self.world.stations.contains("furnace") || can_smelt(f, &self.recipes).is_none() {
            f.progress_ms = 0;
            return None;
        }
        f.progress_ms += ms;
        while f.progress_ms >= 1000 {
            let Some(r) = can_smelt(f, &self.recipes) else {
                f.progress_ms = 0;
                break;
            };
            if f.burn_left == 0 {
                let fuel = f.fuel.as_mut().expect("fuel checked");
                f.burn_left += self.recipes.fuels[&fuel.item];
                fuel.count -= 1;
                if fuel.count == 0 {
                    f.fuel = None;
                }
            }
            f.burn_left -= 1;
            let input = f.input.as_mut().expect("input checked");
            input.count -= 1;
            if input.count == 0 {
                f.input = None;
            }
            match &mut f.output {
                Some(o) => o.count += r.count,
                None => f.output = Some(Stack::new(&r.product, r.count)),
            }
            made += r.count;
            product = r.product;
            f.progress_ms -= 1000;
        }
        (made > 0).then(|| format!("furnace produced {made} {}", product.replace('_', " ")))
    }
}

/// Left: pick up, drop, merge or swap the whole stack. Right: drop one, or pick up half.
fn transfer(
    cell: &mut Option<Stack>,
    held: &mut Option<Stack>,
    button: Button,
    accepts: &dyn Fn(&str) -> bool,
) -> String {
    match (button, cell.as_mut(), held.as_mut()) {
        (_, None, None) => "nothing to pick up".into(),
        (_, _, Some(h)) if !accepts(&h.item) => {
            format!("slot does not accept {}", h.item.replace('_', " "))
        }
        (Button::Left, Some(_), None) => {
            let s = cell.take().expect("present");
            let msg = format!("picked up {} {}", s.count, s.item.replace('_', " "));
            *held = Some(s);
            msg
        }
        (Button::Left, None, Some(_)) => {
            let h = held.take().expect("present");
            let msg = format!("placed {} {}", h.count, h.item.replace('_', " "));
            *cell = Some(h);
            msg
        }
        (Button::Left, Some(c), Some(h)) if c.item == h.item => {
            let take = h.count.min(MAX_STACK - c.count);
            c.count += take;
            h.count -= take;
            let msg = format!("merged {take} {}", c.item.replace('_', " "));
            if h.count == 0 {
                *held = None;
            }
            msg
        }
        (Button::Left, Some(_), Some(_)) => {
            std::mem::swap(cell, held);
            "swapped stacks".into()
        }
        (Button::Right, Some(c), None) => {
            let take = c.count.div_ceil(2);
            c.count -= take;
            let item = c.item.clone();
            if c.count == 0 {
                *cell = None;
            }
            *held = Some(Stack::new(&item, take));
            format!("picked up {take} {}", item.replace('_', " "))
        }
        (Button::Right, slot, Some(h)) => {
            match slot {
                Some(c) if c.item != h.item || c.count >= MAX_STACK => {
                    return "slot is occupied".into();
                }
                Some(c) => c.count += 1,
                None => *cell = Some(Stack::new(&h.item, 1)),
            }
            h.count -= 1;
            let item = h.item.clone();
            if h.count == 0 {
                *held = None;
            }
            format!("placed 1 {}", item.replace('_', " "))
        }
    }
}

impl InputBackend for Simulator {
    fn deliver(&mut self, event: &InputEvent) -> Result<Ack, BackendError> {
        Ok(Ack {
            note: self.apply_event(event),
        })
    }
}

/// Rebuild a world from its seed, scenario and full event log.
pub fn replay(
    seed: u64,
    scenario: ScenarioConfig,
    recipes: RecipeTable,
    events: &[InputEvent],
) -> Result<Simulator, SimError> {
    let mut sim = Simulator::reset(seed, scenario, recipes)?;
    sim.apply_events(events);
    Ok(sim)
}
