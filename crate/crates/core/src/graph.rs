//! Text-modal knowledge graph with per-timestep visual attributes.
//!
//! The graph is loaded from a line-oriented document:
//!
//! ```text
//! # comment
//! node player abstract
//! node iron_ingot conditional "Smelted from raw iron in a furnace."
//! alias iron_icon iron_ingot
//! edge iron_ingot "is used to craft" iron_pickaxe
//! ```
//!
//! Lines are order-insensitive. Names are normalized (case-folded, `_`/`-`
//! mapped to spaces), so `Iron Ingot` and `iron_ingot` are the same node.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::{EnvEntityInfo, InvEntityInfo, ObservationFrame};

pub const PLAYER: &str = "player";

/// Canonical form of an entity name: lowercase words joined by single spaces.
pub fn normalize_name(raw: &str) -> String {
    raw.split(|c: char| c.is_whitespace() || c == '_' || c == '-')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn file_name(name: &str) -> String {
    name.replace(' ', "_")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Environmental,
    Conditional,
    Abstract,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Environmental => "environmental",
            EntityKind::Conditional => "conditional",
            EntityKind::Abstract => "abstract",
        }
    }
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "environmental" => Ok(EntityKind::Environmental),
            "conditional" => Ok(EntityKind::Conditional),
            "abstract" => Ok(EntityKind::Abstract),
            other => Err(other.to_string()),
        }
    }
}

/// The closed set of relation categories an edge may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "can use")]
    CanUse,
    #[serde(rename = "can mine")]
    CanMine,
    #[serde(rename = "is used to craft")]
    IsUsedToCraft,
    #[serde(rename = "is used to produce")]
    IsUsedToProduce,
    #[serde(rename = "can be put in/on")]
    CanBePutInOn,
    #[serde(rename = "is the fuel of")]
    IsTheFuelOf,
    #[serde(rename = "includes")]
    Includes,
    #[serde(rename = "can be used to mine")]
    CanBeUsedToMine,
    #[serde(rename = "outputs")]
    Outputs,
}

impl Relation {
    pub const ALL: [Relation; 9] = [
        Relation::CanUse,
        Relation::CanMine,
        Relation::IsUsedToCraft,
        Relation::IsUsedToProduce,
        Relation::CanBePutInOn,
        Relation::IsTheFuelOf,
        Relation::Includes,
        Relation::CanBeUsedToMine,
        Relation::Outputs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::CanUse => "can use",
            Relation::CanMine => "can mine",
            Relation::IsUsedToCraft => "is used to craft",
            Relation::IsUsedToProduce => "is used to produce",
            Relation::CanBePutInOn => "can be put in/on",
            Relation::IsTheFuelOf => "is the fuel of",
            Relation::Includes => "includes",
            Relation::CanBeUsedToMine => "can be used to mine",
            Relation::Outputs => "outputs",
        }
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityNode {
    pub name: String,
    pub kind: EntityKind,
    /// Background prose, only used by full-attribute textualization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_attr: Option<EnvEntityInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inv_attr: Option<InvEntityInfo>,
}

impl EntityNode {
    pub fn new(name: &str, kind: EntityKind) -> Self {
        Self {
            name: normalize_name(name),
            kind,
            description: None,
            env_attr: None,
            inv_attr: None,
        }
    }

    pub fn is_attributed(&self) -> bool {
        self.env_attr.is_some() || self.inv_attr.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationEdge {
    pub source: String,
    pub relation: Relation,
    pub target: String,
}

impl RelationEdge {
    pub fn new(source: &str, relation: Relation, target: &str) -> Self {
        Self {
            source: normalize_name(source),
            relation,
            target: normalize_name(target),
        }
    }

    pub fn touches(&self, name: &str) -> bool {
        self.source == name || self.target == name
    }
}

impl fmt::Display for RelationEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} --{}--> {}", self.source, self.relation, self.target)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate node name `{name}`")]
    DuplicateNode { line: usize, name: String },
    #[error("line {line}: unknown node kind `{kind}`")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: unknown relation category `{relation}`")]
    UnknownRelation { line: usize, relation: String },
    #[error("edge endpoint `{name}` does not name a node")]
    DanglingEndpoint { name: String },
    #[error("graph has no `player` node")]
    MissingPlayer,
    #[error("graph failed validation: {0:?}")]
    Invalid(Vec<Finding>),
}

/// One violated invariant, reported by [`CrossModalGraph::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum Finding {
    NoPlayerNode,
    DanglingEndpoint { edge: String, missing: String },
    SelfLoop { node: String },
    NameNotCanonical { name: String },
    AttributedAbstract { node: String },
    BothAttributes { node: String },
    DanglingAlias { label: String, node: String },
}

/// Outcome of [`CrossModalGraph::embed_visual_attributes`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbedReport {
    pub embedded: usize,
    /// Frame entries that matched no node, or matched a node of the wrong kind.
    pub skipped: usize,
    pub skipped_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CrossModalGraph {
    nodes: BTreeMap<String, EntityNode>,
    edges: BTreeSet<RelationEdge>,
    /// Detector label → node name, for labels that `_icon` stripping cannot resolve.
    aliases: BTreeMap<String, String>,
    timestep_tag: Option<u64>,
}

impl CrossModalGraph {
    /// Assemble a graph without checking invariants. Pair with [`validate`](Self::validate).
    pub fn from_parts(
        nodes: impl IntoIterator<Item = EntityNode>,
        edges: impl IntoIterator<Item = RelationEdge>,
    ) -> Self {
        Self {
            nodes: nodes.into_iter().map(|n| (n.name.clone(), n)).collect(),
            edges: edges.into_iter().collect(),
            aliases: BTreeMap::new(),
            timestep_tag: None,
        }
    }

    pub fn with_alias(mut self, label: &str, node: &str) -> Self {
        self.aliases
            .insert(normalize_name(label), normalize_name(node));
        self
    }

    pub fn load(doc: &str) -> Result<Self, GraphError> {
        let mut nodes: BTreeMap<String, EntityNode> = BTreeMap::new();
        let mut edges = Vec::new();
        let mut aliases = BTreeMap::new();

        for (idx, raw) in doc.lines().enumerate() {
            let line = idx + 1;
            let text = strip_comment(raw).trim();
            if text.is_empty() {
                continue;
            }
            let fields =
                split_fields(text).map_err(|message| GraphError::Syntax { line, message })?;
            match fields.first().map(String::as_str) {
                Some("node") => {
                    if !(3..=4).contains(&fields.len()) {
                        return Err(GraphError::Syntax {
                            line,
                            message: "expected `node <name> <kind> [\"description\"]`".into(),
                        });
                    }
                    let kind: EntityKind = fields[2]
                        .parse()
                        .map_err(|kind| GraphError::UnknownKind { line, kind })?;
                    let mut node = EntityNode::new(&fields[1], kind);
                    node.description = fields.get(3).cloned();
                    if nodes.contains_key(&node.name) {
                        return Err(GraphError::DuplicateNode {
                            line,
                            name: node.name,
                        });
                    }
                    nodes.insert(node.name.clone(), node);
                }
                Some("edge") => {
                    if fields.len() != 4 {
                        return Err(GraphError::Syntax {
                            line,
                            message: "expected `edge <source> \"<relation>\" <target>`".into(),
                        });
                    }
                    let relation: Relation = fields[2]
                        .parse()
                        .map_err(|relation| GraphError::UnknownRelation { line, relation })?;
                    edges.push((line, RelationEdge::new(&fields[1], relation, &fields[3])));
                }
                Some("alias") => {
                    if fields.len() != 3 {
                        return Err(GraphError::Syntax {
                            line,
                            message: "expected `alias <detector_label> <node>`".into(),
                        });
                    }
                    aliases.insert(normalize_name(&fields[1]), normalize_name(&fields[2]));
                }
                Some(other) => {
                    return Err(GraphError::Syntax {
                        line,
                        message: format!("unknown directive `{other}`"),
                    })
                }
                None => unreachable!("empty lines are skipped"),
            }
        }

        for (line, edge) in &edges {
            for end in [&edge.source, &edge.target] {
                if !nodes.contains_key(end) {
                    return Err(GraphError::DanglingEndpoint { name: end.clone() });
                }
            }
            if edge.source == edge.target {
                return Err(GraphError::Syntax {
                    line: *line,
                    message: format!("self-loop on `{}`", edge.source),
                });
            }
        }
        if !nodes.contains_key(PLAYER) {
            return Err(GraphError::MissingPlayer);
        }

        let graph = Self {
            nodes,
            edges: edges.into_iter().map(|(_, e)| e).collect(),
            aliases,
            timestep_tag: None,
        };
        let findings = graph.validate();
        if findings.is_empty() {
            Ok(graph)
        } else {
            Err(GraphError::Invalid(findings))
        }
    }

    /// Emit the document form: nodes, then aliases, then edges, each sorted.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        let mut node_lines: Vec<String> = self
            .nodes
            .values()
            .map(|n| match &n.description {
                Some(d) => format!(
                    "node {} {} {}",
                    file_name(&n.name),
                    n.kind.as_str(),
                    quote(d)
                ),
                None => format!("node {} {}", file_name(&n.name), n.kind.as_str()),
            })
            .collect();
        node_lines.sort();
        let mut alias_lines: Vec<String> = self
            .aliases
            .iter()
            .map(|(l, n)| format!("alias {} {}", file_name(l), file_name(n)))
            .collect();
        alias_lines.sort();
        let mut edge_lines: Vec<String> = self
            .edges
            .iter()
            .map(|e| {
                format!(
                    "edge {} \"{}\" {}",
                    file_name(&e.source),
                    e.relation,
                    file_name(&e.target)
                )
            })
            .collect();
        edge_lines.sort();
        for l in node_lines.iter().chain(&alias_lines).chain(&edge_lines) {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    /// List every violated invariant. Never mutates.
    pub fn validate(&self) -> Vec<Finding> {
        let mut findings = Vec::new();
        if !self.nodes.contains_key(PLAYER) {
            findings.push(Finding::NoPlayerNode);
        }
        for (key, node) in &self.nodes {
            if *key != normalize_name(key) || node.name != *key {
                findings.push(Finding::NameNotCanonical { name: key.clone() });
            }
            if node.kind == EntityKind::Abstract && node.is_attributed() {
                findings.push(Finding::AttributedAbstract { node: key.clone() });
            }
            if node.env_attr.is_some() && node.inv_attr.is_some() {
                findings.push(Finding::BothAttributes { node: key.clone() });
            }
        }
        for edge in &self.edges {
            for end in [&edge.source, &edge.target] {
                if !self.nodes.contains_key(end) {
                    findings.push(Finding::DanglingEndpoint {
                        edge: edge.to_string(),
                        missing: end.clone(),
                    });
                }
            }
            if edge.source == edge.target {
                findings.push(Finding::SelfLoop {
                    node: edge.source.clone(),
                });
            }
        }
        for (label, node) in &self.aliases {
            if !self.nodes.contains_key(node) {
                findings.push(Finding::DanglingAlias {
                    label: label.clone(),
                    node: node.clone(),
                });
            }
        }
        findings
    }

    pub fn node(&self, name: &str) -> Option<&EntityNode> {
        self.nodes.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.nodes.contains_key(name)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &EntityNode> {
        self.nodes.values()
    }

    pub fn node_names(&self) -> BTreeSet<String> {
        self.nodes.keys().cloned().collect()
    }

    pub fn edges(&self) -> &BTreeSet<RelationEdge> {
        &self.edges
    }

    pub fn player_node(&self) -> &str {
        PLAYER
    }

    pub fn timestep_tag(&self) -> Option<u64> {
        self.timestep_tag
    }

    pub fn attributed_count(&self) -> usize {
        self.nodes.values().filter(|n| n.is_attributed()).count()
    }

    /// Map a detector label to a node name: alias table, then `_icon` stripping.
    pub fn resolve_label(&self, label: &str) -> Option<String> {
        let norm = normalize_name(label);
        if let Some(target) = self.aliases.get(&norm) {
            return Some(target.clone());
        }
        let base = norm.strip_suffix(" icon").unwrap_or(&norm).to_string();
        self.nodes.contains_key(&base).then_some(base)
    }

    pub fn clear_visual_attributes(&self) -> Self {
        let mut out = self.clone();
        for node in out.nodes.values_mut() {
            node.env_attr = None;
            node.inv_attr = None;
        }
        out
    }

    /// Attach the frame's entities as node attributes, replacing any from earlier frames.
    pub fn embed_visual_attributes(&self, frame: &ObservationFrame) -> (Self, EmbedReport) {
        let mut out = self.clear_visual_attributes();
        let mut report = EmbedReport::default();
        for (label, info) in &frame.env {
            match out.nodes.get_mut(label) {
                Some(node) if node.kind == EntityKind::Environmental => {
                    node.env_attr = Some(info.clone());
                    report.embedded += 1;
                }
                _ => report.skipped_labels.push(label.clone()),
            }
        }
        for (label, info) in &frame.inv {
            match out.nodes.get_mut(label) {
                Some(node) if node.kind == EntityKind::Conditional => {
                    node.inv_attr = Some(info.clone());
                    report.embedded += 1;
                }
                _ => report.skipped_labels.push(label.clone()),
            }
        }
        report.skipped = report.skipped_labels.len();
        out.timestep_tag = Some(frame.timestep);
        (out, report)
    }

    /// Undirected hop distance from `from` to every reachable node.
    pub fn hop_distances(&self, from: &str) -> BTreeMap<String, usize> {
        let mut dist = BTreeMap::new();
        if !self.contains(from) {
            return dist;
        }
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(&e.source).or_default().push(&e.target);
            adj.entry(&e.target).or_default().push(&e.source);
        }
        let mut queue = std::collections::VecDeque::from([from.to_string()]);
        dist.insert(from.to_string(), 0);
        while let Some(cur) = queue.pop_front() {
            let d = dist[&cur];
            for next in adj.get(cur.as_str()).into_iter().flatten() {
                if !dist.contains_key(*next) {
                    dist.insert(next.to_string(), d + 1);
                    queue.push_back(next.to_string());
                }
            }
        }
        dist
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Whitespace-separated fields; double-quoted fields may contain spaces.
fn split_fields(text: &str) -> Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut field = String::new();
        if c == '"' {
            chars.next();
            let mut closed = false;
            while let Some(c) = chars.next() {
                match c {
                    '\\' => match chars.next() {
                        Some(esc) => field.push(esc),
                        None => return Err("dangling escape".into()),
                    },
                    '"' => {
                        closed = true;
                        break;
                    }
                    other => field.push(other),
                }
            }
            if !closed {
                return Err("unterminated quote".into());
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                field.push(c);
                chars.next();
            }
        }
        fields.push(field);
    }
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::RangeEstimate;

    const MINIMAL: &str =
        "node player abstract\nnode tools abstract\nedge player \"includes\" tools\n";

    fn frame(env: &[(&str, EnvEntityInfo)], inv: &[(&str, InvEntityInfo)]) -> ObservationFrame {
        ObservationFrame {
            timestep: 4,
            env: env
                .iter()
                .map(|(l, i)| (l.to_string(), i.clone()))
                .collect(),
            inv: inv
                .iter()
                .map(|(l, i)| (l.to_string(), i.clone()))
                .collect(),
            crosshair: (960, 540),
        }
    }

    fn trunk_info() -> EnvEntityInfo {
        EnvEntityInfo {
            x: 900,
            y: 500,
            w: 120,
            h: 300,
            range: RangeEstimate::Within,
        }
    }

    #[test]
    fn loads_minimal_document() {
        let g = CrossModalGraph::load(MINIMAL).unwrap();
        assert_eq!(g.nodes().count(), 2);
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.attributed_count(), 0);
    }

    #[test]
    fn shipped_graph_has_iron_ingot_edge() {
        let g = CrossModalGraph::load(crate::assets::MINECRAFT_KG).unwrap();
        assert!(g.edges().contains(&RelationEdge::new(
            "iron ingot",
            Relation::IsUsedToCraft,
            "iron pickaxe"
        )));
        assert!(g.validate().is_empty());
    }

    #[test]
    fn duplicate_node_is_rejected() {
        let doc = "node player abstract\nnode trunk environmental\nnode Trunk environmental\n";
        assert_eq!(
            CrossModalGraph::load(doc),
            Err(GraphError::DuplicateNode {
                line: 3,
                name: "trunk".into()
            })
        );
    }

    #[test]
    fn load_errors() {
        let bad_rel = "node player abstract\nnode a conditional\nedge player \"eats\" a\n";
        assert!(matches!(
            CrossModalGraph::load(bad_rel),
            Err(GraphError::UnknownRelation { line: 3, .. })
        ));
        let dangling = "node player abstract\nedge player \"can use\" ghost\n";
        assert_eq!(
            CrossModalGraph::load(dangling),
            Err(GraphError::DanglingEndpoint {
                name: "ghost".into()
            })
        );
        assert_eq!(
            CrossModalGraph::load("node tools abstract\n"),
            Err(GraphError::MissingPlayer)
        );
    }

    #[test]
    fn comments_and_quotes() {
        let doc =
            "# header\nnode player abstract # trailing\nnode log conditional \"Has a # inside\"\n";
        let g = CrossModalGraph::load(doc).unwrap();
        assert_eq!(
            g.node("log").unwrap().description.as_deref(),
            Some("Has a # inside")
        );
    }

    #[test]
    fn validate_reports_findings() {
        let g = CrossModalGraph::load(MINIMAL).unwrap();
        assert!(g.validate().is_empty());

        let dangling = CrossModalGraph::from_parts(
            [EntityNode::new("player", EntityKind::Abstract)],
            [RelationEdge::new("player", Relation::CanUse, "tools")],
        );
        assert_eq!(
            dangling.validate(),
            vec![Finding::DanglingEndpoint {
                edge: "player --can use--> tools".into(),
                missing: "tools".into()
            }]
        );

        let no_player =
            CrossModalGraph::from_parts([EntityNode::new("tools", EntityKind::Abstract)], []);
        assert_eq!(no_player.validate(), vec![Finding::NoPlayerNode]);
    }

    #[test]
    fn names_are_normalized() {
        assert_eq!(normalize_name("Iron Ingot"), "iron ingot");
        assert_eq!(normalize_name("iron_ingot"), "iron ingot");
        assert_eq!(normalize_name("  IRON__ingot "), "iron ingot");
    }

    #[test]
    fn label_resolution() {
        let g = CrossModalGraph::load(crate::assets::MINECRAFT_KG).unwrap();
        assert_eq!(g.resolve_label("log_icon").as_deref(), Some("log"));
        assert_eq!(g.resolve_label("trunk").as_deref(), Some("trunk"));
        assert_eq!(g.resolve_label("iron_icon").as_deref(), Some("iron ingot"));
        assert_eq!(g.resolve_label("zombie"), None);
    }

    #[test]
    fn embedding_sets_attributes() {
        let g = CrossModalGraph::load(crate::assets::MINECRAFT_KG).unwrap();
        let inv = InvEntityInfo {
            x: 640,
            y: 420,
            count: None,
        };
        let (out, report) =
            g.embed_visual_attributes(&frame(&[("trunk", trunk_info())], &[("log", inv.clone())]));
        assert_eq!(out.node("trunk").unwrap().env_attr, Some(trunk_info()));
        assert_eq!(out.node("log").unwrap().inv_attr, Some(inv));
        assert_eq!(report.skipped, 0);
        assert_eq!(out.timestep_tag(), Some(4));
        assert_eq!(out.node_names(), g.node_names());
        assert_eq!(out.edges(), g.edges());
    }

    #[test]
    fn unknown_label_is_tallied() {
        let g = CrossModalGraph::load(crate::assets::MINECRAFT_KG).unwrap();
        let (out, report) = g.embed_visual_attributes(&frame(&[("zombie", trunk_info())], &[]));
        assert_eq!(report.skipped, 1);
        assert_eq!(report.skipped_labels, vec!["zombie".to_string()]);
        assert_eq!(out.attributed_count(), 0);
    }

    #[test]
    fn clearing_is_idempotent() {
        let g = CrossModalGraph::load(crate::assets::MINECRAFT_KG).unwrap();
        let inv = |x| InvEntityInfo {
            x,
            y: 1040,
            count: Some(1),
        };
        let (attributed, _) = g.embed_visual_attributes(&frame(
            &[("trunk", trunk_info())],
            &[("log", inv(640)), ("plank", inv(720))],
        ));
        assert_eq!(attributed.attributed_count(), 3);
        let once = attributed.clear_visual_attributes();
        assert_eq!(once.attributed_count(), 0);
        assert_eq!(once.clear_visual_attributes(), once);
        let plain = g.clear_visual_attributes();
        assert_eq!(plain, g);
    }

    #[test]
    fn document_round_trip() {
        let g = CrossModalGraph::load(crate::assets::MINECRAFT_KG).unwrap();
        let doc = g.to_document();
        assert_eq!(CrossModalGraph::load(&doc).unwrap(), g);
        assert_eq!(CrossModalGraph::load(&doc).unwrap().to_document(), doc);
    }
}
