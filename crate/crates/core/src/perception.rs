//! Detection records, interaction-range classification and per-timestep frames.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalize_name, CrossModalGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Environment,
    Inventory,
}

impl Space {
    pub fn as_str(self) -> &'static str {
        match self {
            Space::Environment => "environment",
            Space::Inventory => "inventory",
        }
    }
}

/// One detector output. Environment records carry a box; inventory records only a center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    #[serde(rename = "ts")]
    pub timestep: u64,
    pub label: String,
    pub space: Space,
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
    pub confidence: f64,
    /// Stack size read from the inventory icon overlay, when the detector provides one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
}

impl DetectionRecord {
    pub fn env(
        timestep: u64,
        label: &str,
        x: i32,
        y: i32,
        w: i32,
        h: i32,
        confidence: f64,
    ) -> Self {
        Self {
            timestep,
            label: label.to_string(),
            space: Space::Environment,
            x,
            y,
            w,
            h,
            confidence,
            count: None,
        }
    }

    pub fn inv(timestep: u64, label: &str, x: i32, y: i32, count: Option<u32>) -> Self {
        Self {
            timestep,
            label: label.to_string(),
            space: Space::Inventory,
            x,
            y,
            w: 0,
            h: 0,
            confidence: 1.0,
            count,
        }
    }

    pub fn check(&self, screen: Screen) -> Result<(), String> {
        if self.x < 0 || self.x >= screen.width || self.y < 0 || self.y >= screen.height {
            return Err(format!(
                "center ({}, {}) outside the screen",
                self.x, self.y
            ));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0, 1]", self.confidence));
        }
        match self.space {
            Space::Environment if self.w <= 0 || self.h <= 0 => {
                Err("environment record needs a positive box".into())
            }
            Space::Inventory if self.w != 0 || self.h != 0 => {
                Err("inventory record must have zero box extents".into())
            }
            _ => Ok(()),
        }
    }

    /// Whitespace-separated line form: `ts label space x y w h confidence [count]`.
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "{} {} {} {} {} {} {} {}",
            self.timestep,
            self.label,
            self.space.as_str(),
            self.x,
            self.y,
            self.w,
            self.h,
            self.confidence
        );
        if let Some(c) = self.count {
            line.push_str(&format!(" {c}"));
        }
        line
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screen {
    pub width: i32,
    pub height: i32,
}

impl Default for Screen {
    fn default() -> Self {
        Self {
            width: 1920,
            height: 1080,
        }
    }
}

impl Screen {
    pub fn center(self) -> (i32, i32) {
        (self.width / 2, self.height / 2)
    }
}

/// Coarse proximity class. Ordered `Beyond < Near < Within`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeEstimate {
    Beyond,
    Near,
    Within,
}

impl RangeEstimate {
    /// Comparison phrase used by the prompt's range sentence.
    pub fn phrase(self) -> &'static str {
        match self {
            RangeEstimate::Beyond => "greater than",
            RangeEstimate::Near => "close to",
            RangeEstimate::Within => "less than",
        }
    }

    pub fn word(self) -> &'static str {
        match self {
            RangeEstimate::Beyond => "beyond",
            RangeEstimate::Near => "near",
            RangeEstimate::Within => "within",
        }
    }

    pub fn from_word(w: &str) -> Option<Self> {
        match w {
            "beyond" => Some(RangeEstimate::Beyond),
            "near" => Some(RangeEstimate::Near),
            "within" => Some(RangeEstimate::Within),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeConfig {
    pub k_w: f64,
    pub k_h: f64,
    pub near_band: f64,
}

impl Default for RangeConfig {
    fn default() -> Self {
        Self {
            k_w: 110.0,
            k_h: 275.0,
            near_band: 0.8,
        }
    }
}

impl RangeConfig {
    pub fn check(&self) -> Result<(), String> {
        if !(self.k_w > 0.0 && self.k_h > 0.0) {
            return Err("range thresholds must be positive".into());
        }
        if !(self.near_band > 0.0 && self.near_band < 1.0) {
            return Err("near_band must lie strictly between 0 and 1".into());
        }
        Ok(())
    }
}

/// Either dimension reaching its threshold counts as within range; boundaries inclusive.
pub fn estimate_range(w: f64, h: f64, cfg: &RangeConfig) -> RangeEstimate {
    if w >= cfg.k_w || h >= cfg.k_h {
        RangeEstimate::Within
    } else if w >= cfg.near_band * cfg.k_w || h >= cfg.near_band * cfg.k_h {
        RangeEstimate::Near
    } else {
        RangeEstimate::Beyond
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvEntityInfo {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
    pub range: RangeEstimate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvEntityInfo {
    pub x: i32,
    pub y: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
}

/// Screen geometry of the always-visible hotbar strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotbarLayout {
    pub y: i32,
    pub first_x: i32,
    pub spacing: i32,
    pub half_slot: i32,
}

impl Default for HotbarLayout {
    fn default() -> Self {
        Self {
            y: 1040,
            first_x: 640,
            spacing: 80,
            half_slot: 36,
        }
    }
}

impl HotbarLayout {
    pub fn slot_center(&self, key: u8) -> (i32, i32) {
        (self.first_x + (i32::from(key) - 1) * self.spacing, self.y)
    }

    /// Hotbar key (1–9) whose slot contains the point, if any.
    pub fn key_at(&self, x: i32, y: i32) -> Option<u8> {
        if (y - self.y).abs() > self.half_slot {
            return None;
        }
        (1..=9u8).find(|&k| (x - self.slot_center(k).0).abs() <= self.half_slot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PerceptionConfig {
    #[serde(default)]
    pub range: RangeConfig,
    /// Per-class threshold overrides keyed by node name. Empty unless configured.
    #[serde(default)]
    pub class_ranges: BTreeMap<String, RangeConfig>,
    #[serde(default)]
    pub screen: Screen,
    #[serde(default)]
    pub crosshair: Option<(i32, i32)>,
}

impl PerceptionConfig {
    pub fn crosshair(&self) -> (i32, i32) {
        self.crosshair.unwrap_or_else(|| self.screen.center())
    }

    pub fn range_for(&self, name: &str) -> &RangeConfig {
        self.class_ranges.get(name).unwrap_or(&self.range)
    }
}

/// One timestep's perceived entities, keyed by node name (or normalized label when unresolved).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationFrame {
    pub timestep: u64,
    pub env: BTreeMap<String, EnvEntityInfo>,
    pub inv: BTreeMap<String, InvEntityInfo>,
    pub crosshair: (i32, i32),
}

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("record {index} rejected: {reason}")]
    InvalidRecord { index: usize, reason: String },
    #[error("record {index} has timestep {found}, expected {expected}")]
    MixedTimesteps {
        index: usize,
        expected: u64,
        found: u64,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Total order used to pick the surviving record per label: confidence, then box
/// area, then closeness to the crosshair, then position.
fn preference(a: &DetectionRecord, b: &DetectionRecord, crosshair: (i32, i32)) -> Ordering {
    let area = |r: &DetectionRecord| i64::from(r.w) * i64::from(r.h);
    let dist = |r: &DetectionRecord| {
        let dx = i64::from(r.x - crosshair.0);
        let dy = i64::from(r.y - crosshair.1);
        dx * dx + dy * dy
    };
    a.confidence
        .total_cmp(&b.confidence)
        .then(area(a).cmp(&area(b)))
        .then(dist(b).cmp(&dist(a)))
        .then((b.x, b.y).cmp(&(a.x, a.y)))
        .then(b.count.cmp(&a.count))
}

pub fn partition_observations(
    records: &[DetectionRecord],
    graph: &CrossModalGraph,
    cfg: &PerceptionConfig,
) -> Result<ObservationFrame, PerceptionError> {
    let crosshair = cfg.crosshair();
    let timestep = records.first().map_or(0, |r| r.timestep);
    let mut env_best: BTreeMap<String, &DetectionRecord> = BTreeMap::new();
    let mut inv_best: BTreeMap<String, &DetectionRecord> = BTreeMap::new();

    for (index, rec) in records.iter().enumerate() {
        rec.check(cfg.screen)
            .map_err(|reason| PerceptionError::InvalidRecord { index, reason })?;
        if rec.timestep != timestep {
            return Err(PerceptionError::MixedTimesteps {
                index,
                expected: timestep,
                found: rec.timestep,
            });
        }
        let key = graph
            .resolve_label(&rec.label)
            .unwrap_or_else(|| normalize_name(&rec.label));
        let slot = match rec.space {
            Space::Environment => &mut env_best,
            Space::Inventory => &mut inv_best,
        };
        match slot.get(&key) {
            Some(cur) if preference(rec, cur, crosshair) != Ordering::Greater => {}
            _ => {
                slot.insert(key, rec);
            }
        }
    }

    let env = env_best
        .into_iter()
        .map(|(name, r)| {
            let range = estimate_range(f64::from(r.w), f64::from(r.h), cfg.range_for(&name));
            (
                name,
                EnvEntityInfo {
                    x: r.x,
                    y: r.y,
                    w: r.w,
                    h: r.h,
                    range,
                },
            )
        })
        .collect();
    let inv = inv_best
        .into_iter()
        .map(|(name, r)| {
            (
                name,
                InvEntityInfo {
                    x: r.x,
                    y: r.y,
                    count: r.count,
                },
            )
        })
        .collect();
    Ok(ObservationFrame {
        timestep,
        env,
        inv,
        crosshair,
    })
}

/// Parse a detection stream, either whitespace lines or JSON lines (auto-detected per line).
pub fn parse_detections(text: &str) -> Result<Vec<DetectionRecord>, PerceptionError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if t.starts_with('{') {
            let rec: DetectionRecord =
                serde_json::from_str(t).map_err(|e| PerceptionError::Parse {
                    line,
                    message: e.to_string(),
                })?;
            out.push(rec);
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        if !(8..=9).contains(&f.len()) {
            return Err(PerceptionError::Parse {
                line,
                message: format!("expected 8 or 9 fields, found {}", f.len()),
            });
        }
        let bad = |what: &str| PerceptionError::Parse {
            line,
            message: format!("bad {what}"),
        };
        let space = match f[2] {
            "environment" | "env" => Space::Environment,
            "inventory" | "inv" => Space::Inventory,
            _ => return Err(bad("space")),
        };
        out.push(DetectionRecord {
            timestep: f[0].parse().map_err(|_| bad("timestep"))?,
            label: f[1].to_string(),
            space,
            x: f[3].parse().map_err(|_| bad("x"))?,
            y: f[4].parse().map_err(|_| bad("y"))?,
            w: f[5].parse().map_err(|_| bad("w"))?,
            h: f[6].parse().map_err(|_| bad("h"))?,
            confidence: f[7].parse().map_err(|_| bad("confidence"))?,
            count: f
                .get(8)
                .map(|c| c.parse())
                .transpose()
                .map_err(|_| bad("count"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kg() -> CrossModalGraph {
        CrossModalGraph::load(crate::assets::MINECRAFT_KG).unwrap()
    }

    #[test]
    fn range_examples() {
        let cfg = RangeConfig::default();
        assert_eq!(estimate_range(120.0, 200.0, &cfg), RangeEstimate::Within);
        assert_eq!(estimate_range(109.0, 275.0, &cfg), RangeEstimate::Within);
        assert_eq!(estimate_range(50.0, 80.0, &cfg), RangeEstimate::Beyond);
        assert_eq!(estimate_range(95.0, 100.0, &cfg), RangeEstimate::Near);
    }

    #[test]
    fn partition_single_trunk() {
        let recs = [DetectionRecord::env(0, "trunk", 900, 500, 120, 300, 0.9)];
        let f = partition_observations(&recs, &kg(), &PerceptionConfig::default()).unwrap();
        assert_eq!(f.env["trunk"].range, RangeEstimate::Within);
        assert!(f.inv.is_empty());
    }

    #[test]
    fn partition_keeps_highest_confidence() {
        let recs = [
            DetectionRecord::env(0, "iron_ore", 100, 100, 40, 40, 0.6),
            DetectionRecord::env(0, "iron_ore", 700, 300, 30, 30, 0.9),
        ];
        let f = partition_observations(&recs, &kg(), &PerceptionConfig::default()).unwrap();
        assert_eq!(f.env.len(), 1);
        assert_eq!((f.env["iron ore"].x, f.env["iron ore"].y), (700, 300));
    }

    #[test]
    fn partition_icon_label() {
        let recs = [DetectionRecord::inv(0, "log_icon", 640, 420, None)];
        let f = partition_observations(&recs, &kg(), &PerceptionConfig::default()).unwrap();
        assert_eq!(
            f.inv["log"],
            InvEntityInfo {
                x: 640,
                y: 420,
                count: None
            }
        );
    }

    #[test]
    fn partition_rejects_bad_record_with_index() {
        let recs = [
            DetectionRecord::env(0, "trunk", 900, 500, 120, 300, 0.9),
            DetectionRecord::env(0, "trunk", 2000, 500, 120, 300, 0.9),
        ];
        let err = partition_observations(&recs, &kg(), &PerceptionConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            PerceptionError::InvalidRecord { index: 1, .. }
        ));
        let mut inv = DetectionRecord::inv(0, "log_icon", 10, 10, None);
        inv.w = 3;
        assert!(partition_observations(&[inv], &kg(), &PerceptionConfig::default()).is_err());
    }

    #[test]
    fn hotbar_keys() {
        let h = HotbarLayout::default();
        assert_eq!(h.key_at(640, 1040), Some(1));
        assert_eq!(h.key_at(1280, 1030), Some(9));
        assert_eq!(h.key_at(680, 1040), None);
        assert_eq!(h.key_at(640, 900), None);
    }

    #[test]
    fn parses_both_stream_forms() {
        let text = "0 trunk environment 900 500 120 300 0.9\n\
                    0 log_icon inventory 640 1040 0 0 1 3\n\
                    {\"ts\":0,\"label\":\"stick_icon\",\"space\":\"inventory\",\"x\":720,\"y\":1040,\"w\":0,\"h\":0,\"confidence\":1.0}\n";
        let recs = parse_detections(text).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1].count, Some(3));
        assert_eq!(parse_detections(&recs[0].to_line()).unwrap()[0], recs[0]);
        assert!(parse_detections("0 trunk sky 1 1 1 1 1").is_err());
    }

    fn arb_env_record() -> impl Strategy<Value = DetectionRecord> {
        (
            prop::sample::select(vec!["trunk", "iron_ore", "diamond_ore", "zombie"]),
            0..1920i32,
            0..1080i32,
            1..400i32,
            1..400i32,
            0u8..=4,
        )
            .prop_map(|(l, x, y, w, h, c)| {
                DetectionRecord::env(3, l, x, y, w, h, f64::from(c) / 4.0)
            })
    }

    proptest! {
        #[test]
        fn range_is_monotone(w in 0.0..400.0f64, h in 0.0..600.0f64, dw in 0.0..100.0f64, dh in 0.0..100.0f64) {
            let cfg = RangeConfig::default();
            prop_assert!(estimate_range(w + dw, h + dh, &cfg) >= estimate_range(w, h, &cfg));
        }

        #[test]
        fn partition_is_order_independent(
            recs in prop::collection::vec(arb_env_record(), 0..12),
            seed in any::<u64>(),
        ) {
            let g = kg();
            let cfg = PerceptionConfig::default();
            let a = partition_observations(&recs, &g, &cfg).unwrap();
            let mut shuffled = recs.clone();
            let n = shuffled.len();
            if n > 1 {
                for i in 0..n {
                    let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % n as u64) as usize;
                    shuffled.swap(i, j);
                }
            }
            let b = partition_observations(&shuffled, &g, &cfg).unwrap();
            prop_assert_eq!(&a, &b);
            // each surviving entry traces to exactly one input record
            for (label, info) in &a.env {
                let sources = recs.iter().filter(|r| {
                    g.resolve_label(&r.label).unwrap_or_else(|| normalize_name(&r.label)) == *label
                        && (r.x, r.y, r.w, r.h) == (info.x, info.y, info.w, info.h)
                }).count();
                prop_assert!(sources >= 1);
            }
        }
    }
}
