//! Retrieval-based pooling over the cross-modal graph.
//!
//! Path-search pooling keeps every node and edge lying on some simple path
//! between the player and the task target, with edges traversable in either
//! direction. Rather than enumerate paths (exponential), the union is read off
//! the block-cut tree: an element lies on a simple `s`–`t` path exactly when
//! its biconnected block sits on the tree path from `s` to `t`.
//!
//! Entity-match pooling then filters that pool down to nodes named in the
//! prompt, nodes carrying a visual attribute, and the two anchors.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalize_name, CrossModalGraph, RelationEdge, PLAYER};
use crate::perception::HotbarLayout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub target: String,
    pub description: String,
    #[serde(default)]
    pub cot_questions: Vec<String>,
    /// Milestone goals that complete the task, in achievement order.
    #[serde(default)]
    pub goals: Vec<String>,
}

impl TaskSpec {
    pub fn target_name(&self) -> String {
        normalize_name(&self.target)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("task description is empty")]
    EmptyDescription,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalPool {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeSet<RelationEdge>,
}

impl GlobalPool {
    pub fn whole_graph(graph: &CrossModalGraph) -> Self {
        Self {
            nodes: graph.node_names(),
            edges: graph.edges().clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    PspEmp,
    Similarity,
    EmpOnly,
    PspOnly,
    EmpPsp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PooledSubgraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeSet<RelationEdge>,
    pub provenance: Provenance,
    /// Set when no player–target path exists in the searched graph.
    #[serde(default)]
    pub no_path: bool,
}

impl PooledSubgraph {
    pub fn from_pool(pool: GlobalPool, provenance: Provenance) -> Self {
        let no_path = pool.nodes.is_empty();
        Self {
            nodes: pool.nodes,
            edges: pool.edges,
            provenance,
            no_path,
        }
    }

    pub fn as_pool(&self) -> GlobalPool {
        GlobalPool {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        }
    }

    /// Whether `a` and `b` are joined by edges of this subgraph (direction ignored).
    pub fn connects(&self, a: &str, b: &str) -> bool {
        if !self.nodes.contains(a) || !self.nodes.contains(b) {
            return false;
        }
        let mut seen = BTreeSet::from([a.to_string()]);
        let mut queue = VecDeque::from([a.to_string()]);
        while let Some(cur) = queue.pop_front() {
            if cur == b {
                return true;
            }
            for e in &self.edges {
                let next = if e.source == cur {
                    &e.target
                } else if e.target == cur {
                    &e.source
                } else {
                    continue;
                };
                if seen.insert(next.clone()) {
                    queue.push_back(next.clone());
                }
            }
        }
        false
    }
}

/// Union of nodes and edges over all simple `source`–`target` paths, edges undirected.
pub fn simple_path_union(
    nodes: &BTreeSet<String>,
    edges: &BTreeSet<RelationEdge>,
    source: &str,
    target: &str,
) -> GlobalPool {
    if !nodes.contains(source) || !nodes.contains(target) {
        return GlobalPool::default();
    }
    if source == target {
        return GlobalPool {
            nodes: BTreeSet::from([source.to_string()]),
            edges: BTreeSet::new(),
        };
    }

    let index: BTreeMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let edge_list: Vec<&RelationEdge> = edges
        .iter()
        .filter(|e| {
            e.source != e.target
                && index.contains_key(e.source.as_str())
                && index.contains_key(e.target.as_str())
        })
        .collect();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes.len()];
    for (eid, e) in edge_list.iter().enumerate() {
        let (u, v) = (index[e.source.as_str()], index[e.target.as_str()]);
        adj[u].push((v, eid));
        adj[v].push((u, eid));
    }

    let blocks = BlockFinder::new(&adj).run(index[source]);
    let s = index[source];
    let t = index[target];

    // Vertex–block incidence forms a tree over the source's component; walk it.
    let block_vertices: Vec<BTreeSet<usize>> = blocks
        .iter()
        .map(|b| {
            b.iter()
                .flat_map(|&eid| {
                    let e = edge_list[eid];
                    [index[e.source.as_str()], index[e.target.as_str()]]
                })
                .collect()
        })
        .collect();
    let mut vertex_blocks: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (bid, vs) in block_vertices.iter().enumerate() {
        for &v in vs {
            vertex_blocks[v].push(bid);
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Tree {
        Vertex(usize),
        Block(usize),
    }
    let mut prev_v: Vec<Option<Tree>> = vec![None; nodes.len()];
    let mut prev_b: Vec<Option<Tree>> = vec![None; blocks.len()];
    let mut seen_v = vec![false; nodes.len()];
    let mut seen_b = vec![false; blocks.len()];
    seen_v[s] = true;
    let mut queue = VecDeque::from([Tree::Vertex(s)]);
    while let Some(cur) = queue.pop_front() {
        match cur {
            Tree::Vertex(v) => {
                if v == t {
                    break;
                }
                for &b in &vertex_blocks[v] {
                    if !seen_b[b] {
                        seen_b[b] = true;
                        prev_b[b] = Some(cur);
                        queue.push_back(Tree::Block(b));
                    }
                }
            }
            Tree::Block(b) => {
                for &v in &block_vertices[b] {
                    if !seen_v[v] {
                        seen_v[v] = true;
                        prev_v[v] = Some(cur);
                        queue.push_back(Tree::Vertex(v));
                    }
                }
            }
        }
    }
    if !seen_v[t] {
        return GlobalPool::default();
    }

    let names: Vec<&String> = nodes.iter().collect();
    let mut pool = GlobalPool::default();
    let mut cur = Tree::Vertex(t);
    loop {
        match cur {
            Tree::Vertex(v) => {
                if v == s {
                    break;
                }
                cur = prev_v[v].expect("path back to source");
            }
            Tree::Block(b) => {
                for &eid in &blocks[b] {
                    pool.edges.insert(edge_list[eid].clone());
                }
                for &v in &block_vertices[b] {
                    pool.nodes.insert(names[v].clone());
                }
                cur = prev_b[b].expect("path back to source");
            }
        }
    }
    pool
}

/// Tarjan's biconnected components over an edge-indexed multigraph.
struct BlockFinder<'a> {
    adj: &'a [Vec<(usize, usize)>],
    disc: Vec<Option<usize>>,
    low: Vec<usize>,
    clock: usize,
    stack: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl<'a> BlockFinder<'a> {
    fn new(adj: &'a [Vec<(usize, usize)>]) -> Self {
        Self {
            adj,
            disc: vec![None; adj.len()],
            low: vec![0; adj.len()],
            clock: 0,
            stack: Vec::new(),
            blocks: Vec::new(),
        }
    }

    fn run(mut self, root: usize) -> Vec<Vec<usize>> {
        self.visit(root, None);
        self.blocks
    }

    fn visit(&mut self, u: usize, parent_edge: Option<usize>) {
        self.disc[u] = Some(self.clock);
        self.low[u] = self.clock;
        self.clock += 1;
        for &(v, eid) in &self.adj[u] {
            if Some(eid) == parent_edge {
                continue;
            }
            match self.disc[v] {
                None => {
                    self.stack.push(eid);
                    self.visit(v, Some(eid));
                    self.low[u] = self.low[u].min(self.low[v]);
                    if self.low[v] >= self.disc[u].unwrap() {
                        let mut block = Vec::new();
                        while let Some(top) = self.stack.pop() {
                            block.push(top);
                            if top == eid {
                                break;
                            }
                        }
                        self.blocks.push(block);
                    }
                }
                Some(dv) if dv < self.disc[u].unwrap() => {
                    self.stack.push(eid);
                    self.low[u] = self.low[u].min(dv);
                }
                Some(_) => {}
            }
        }
    }
}

pub fn path_search_pool(
    graph: &CrossModalGraph,
    task: &TaskSpec,
) -> Result<GlobalPool, RetrievalError> {
    let target = task.target_name();
    if !graph.contains(&target) {
        return Err(RetrievalError::UnknownTarget(task.target.clone()));
    }
    Ok(simple_path_union(
        &graph.node_names(),
        graph.edges(),
        PLAYER,
        &target,
    ))
}

/// Case-folded word tokens with a naive plural `s` stripped, for phrase matching.
pub fn match_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let t = t.to_lowercase();
            if t.len() > 3 && t.ends_with('s') && !t.ends_with("ss") {
                t[..t.len() - 1].to_string()
            } else {
                t
            }
        })
        .collect()
}

fn contains_phrase(haystack: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && haystack.windows(phrase.len()).any(|w| w == phrase)
}

/// Whether `name` occurs as a whole-token phrase in the prompt tokens.
pub fn mentions(prompt_tokens: &[String], name: &str) -> bool {
    contains_phrase(prompt_tokens, &match_tokens(name))
}

pub fn entity_match_pool(
    pool: &GlobalPool,
    prompt_text: &str,
    graph: &CrossModalGraph,
    task: &TaskSpec,
) -> PooledSubgraph {
    let tokens = match_tokens(prompt_text);
    let target = task.target_name();
    let nodes: BTreeSet<String> = pool
        .nodes
        .iter()
        .filter(|n| {
            n.as_str() == PLAYER
                || **n == target
                || graph.node(n).is_some_and(|node| node.is_attributed())
                || mentions(&tokens, n)
        })
        .cloned()
        .collect();
    let edges = pool
        .edges
        .iter()
        .filter(|e| nodes.contains(&e.source) && nodes.contains(&e.target))
        .cloned()
        .collect();
    PooledSubgraph {
        nodes,
        edges,
        provenance: Provenance::EmpOnly,
        no_path: false,
    }
}

/// Path-search pooling followed by entity-match pooling.
pub fn retrieve(
    graph: &CrossModalGraph,
    task: &TaskSpec,
    prompt_text: &str,
) -> Result<PooledSubgraph, RetrievalError> {
    let pool = path_search_pool(graph, task)?;
    let no_path = pool.is_empty();
    let mut sub = entity_match_pool(&pool, prompt_text, graph, task);
    sub.provenance = Provenance::PspEmp;
    sub.no_path = no_path;
    Ok(sub)
}

/// The reverse order: entity matching over the whole graph, then path search inside it.
pub fn retrieve_emp_then_psp(
    graph: &CrossModalGraph,
    task: &TaskSpec,
    prompt_text: &str,
) -> Result<PooledSubgraph, RetrievalError> {
    let target = task.target_name();
    if !graph.contains(&target) {
        return Err(RetrievalError::UnknownTarget(task.target.clone()));
    }
    let matched = entity_match_pool(&GlobalPool::whole_graph(graph), prompt_text, graph, task);
    let pool = simple_path_union(&matched.nodes, &matched.edges, PLAYER, &target);
    Ok(PooledSubgraph::from_pool(pool, Provenance::EmpPsp))
}

pub trait SimilarityProvider {
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// Cosine similarity over case-folded word multisets.
#[derive(Debug, Clone, Copy, Default)]
pub struct BagOfWords;

impl BagOfWords {
    fn counts(text: &str) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for tok in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            *m.entry(tok.to_lowercase()).or_insert(0.0) += 1.0;
        }
        m
    }
}

impl SimilarityProvider for BagOfWords {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        let (va, vb) = (Self::counts(a), Self::counts(b));
        let dot: f64 = va
            .iter()
            .filter_map(|(k, x)| vb.get(k).map(|y| x * y))
            .sum();
        let sq = |v: &BTreeMap<String, f64>| v.values().map(|x| x * x).sum::<f64>();
        let denom = (sq(&va) * sq(&vb)).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            dot / denom
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SimilaritySelection {
    Cutoff { threshold: f64 },
    TopK { k: usize },
}

impl Default for SimilaritySelection {
    fn default() -> Self {
        SimilaritySelection::Cutoff { threshold: 0.5 }
    }
}

pub fn similarity_retrieve(
    graph: &CrossModalGraph,
    prompt_text: &str,
    provider: &dyn SimilarityProvider,
    selection: SimilaritySelection,
) -> PooledSubgraph {
    let mut scored: Vec<(f64, String)> = graph
        .nodes()
        .map(|n| (provider.similarity(&n.name, prompt_text), n.name.clone()))
        .collect();
    let nodes: BTreeSet<String> = match selection {
        SimilaritySelection::Cutoff { threshold } => scored
            .into_iter()
            .filter(|(s, _)| *s >= threshold)
            .map(|(_, n)| n)
            .collect(),
        SimilaritySelection::TopK { k } => {
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            scored.into_iter().take(k).map(|(_, n)| n).collect()
        }
    };
    let edges = graph
        .edges()
        .iter()
        .filter(|e| nodes.contains(&e.source) && nodes.contains(&e.target))
        .cloned()
        .collect();
    PooledSubgraph {
        nodes,
        edges,
        provenance: Provenance::Similarity,
        no_path: false,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMode {
    #[default]
    NamesOnly,
    FullAttributes,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TextOptions {
    pub mode: TextMode,
    /// When set, inventory lines name the hotbar key under the icon.
    pub hotbar: Option<HotbarLayout>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Textualized {
    pub edges: Vec<String>,
    pub environment: Vec<String>,
    pub inventory: Vec<String>,
    pub descriptions: Vec<String>,
}

impl Textualized {
    /// Edge lines first, then attributed nodes by name, then any descriptions.
    pub fn text(&self) -> String {
        let mut attr: Vec<&String> = self.environment.iter().chain(&self.inventory).collect();
        attr.sort();
        let mut lines: Vec<&String> = self.edges.iter().collect();
        lines.extend(attr);
        lines.extend(&self.descriptions);
        lines.iter().map(|l| format!("{l}\n")).collect()
    }

    /// Knowledge slot content: edges plus, in full-attribute mode, node descriptions.
    pub fn knowledge(&self) -> Vec<String> {
        self.edges
            .iter()
            .chain(&self.descriptions)
            .cloned()
            .collect()
    }
}

pub fn textualize(
    sub: &PooledSubgraph,
    graph: &CrossModalGraph,
    opts: &TextOptions,
) -> Textualized {
    let mut out = Textualized {
        edges: sub.edges.iter().map(ToString::to_string).collect(),
        ..Default::default()
    };
    out.edges.sort();
    for name in &sub.nodes {
        let Some(node) = graph.node(name) else {
            continue;
        };
        if let Some(e) = &node.env_attr {
            out.environment.push(format!(
                "{name}: env at ({},{}) size ({},{}), {} interaction range",
                e.x,
                e.y,
                e.w,
                e.h,
                e.range.word()
            ));
        }
        if let Some(i) = &node.inv_attr {
            let mut line = format!("{name}: inv at ({},{})", i.x, i.y);
            if let Some(c) = i.count {
                line.push_str(&format!(", count {c}"));
            }
            if let Some(k) = opts.hotbar.and_then(|h| h.key_at(i.x, i.y)) {
                line.push_str(&format!(", hotbar key {k}"));
            }
            out.inventory.push(line);
        }
        if opts.mode == TextMode::FullAttributes {
            if let Some(d) = &node.description {
                out.descriptions.push(format!("{name}: {d}"));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub fpr: f64,
    pub fnr: f64,
}

pub fn fpr_fnr(retrieved: &BTreeSet<String>, oracle: &BTreeSet<String>) -> RetrievalMetrics {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    RetrievalMetrics {
        fpr: ratio(retrieved.difference(oracle).count(), retrieved.len()),
        fnr: ratio(oracle.difference(retrieved).count(), oracle.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EntityKind, EntityNode, Relation};
    use crate::perception::{EnvEntityInfo, InvEntityInfo, ObservationFrame, RangeEstimate};

    fn kg() -> CrossModalGraph {
        CrossModalGraph::load(crate::assets::MINECRAFT_KG).unwrap()
    }

    fn task(target: &str) -> TaskSpec {
        TaskSpec {
            id: "t".into(),
            target: target.into(),
            description: "d".into(),
            cot_questions: vec![],
            goals: vec![],
        }
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn diamond_pool_contains_the_tool_chain() {
        let pool = path_search_pool(&kg(), &task("diamond")).unwrap();
        for n in ["player", "tools", "iron pickaxe", "diamond ore", "diamond"] {
            assert!(pool.nodes.contains(n), "{n}");
        }
        // Dead-end leaves and other components never lie on a player–diamond path.
        for n in ["dirt", "charcoal", "water", "lava", "bedrock"] {
            assert!(!pool.nodes.contains(n), "{n}");
        }
    }

    #[test]
    fn diamond_pool_matches_enumerated_fixture() {
        // Frozen from exhaustive simple-path enumeration (networkx, undirected multigraph).
        let expected = set(&[
            "coal",
            "coal ore",
            "cobblestone",
            "crafting table",
            "diamond",
            "diamond ore",
            "diamond pickaxe",
            "furnace",
            "iron ingot",
            "iron ore",
            "iron pickaxe",
            "log",
            "plank",
            "player",
            "raw iron",
            "stick",
            "stone",
            "stone pickaxe",
            "tools",
            "trunk",
            "wood pickaxe",
        ]);
        let pool = path_search_pool(&kg(), &task("diamond")).unwrap();
        assert_eq!(pool.nodes, expected);
        assert_eq!(pool.edges.len(), 37);
    }

    #[test]
    fn player_target_is_single_node() {
        let pool = path_search_pool(&kg(), &task("player")).unwrap();
        assert_eq!(pool.nodes, set(&["player"]));
        assert!(pool.edges.is_empty());
    }

    #[test]
    fn disconnected_target_is_empty() {
        let pool = path_search_pool(&kg(), &task("lava")).unwrap();
        assert!(pool.nodes.is_empty() && pool.edges.is_empty());
        let sub = retrieve(&kg(), &task("bedrock"), "").unwrap();
        assert!(sub.no_path && sub.nodes.is_empty());
    }

    #[test]
    fn unknown_target_errors() {
        assert_eq!(
            path_search_pool(&kg(), &task("netherite")),
            Err(RetrievalError::UnknownTarget("netherite".into()))
        );
    }

    #[test]
    fn edges_keep_stored_direction() {
        let pool = path_search_pool(&kg(), &task("diamond")).unwrap();
        assert!(pool
            .edges
            .contains(&RelationEdge::new("trunk", Relation::Outputs, "log")));
    }

    #[test]
    fn plural_phrase_matching() {
        let toks = match_tokens("Collect more LOGS and iron_ingots; glass.");
        assert!(mentions(&toks, "log"));
        assert!(mentions(&toks, "iron ingot"));
        assert!(mentions(&toks, "glass"));
        assert!(!mentions(&toks, "ore"));
        assert!(!mentions(&toks, "iron ore"));
    }

    #[test]
    fn emp_anchor_rule_on_empty_prompt() {
        let g = kg();
        let pool = path_search_pool(&g, &task("log")).unwrap();
        let sub = entity_match_pool(&pool, "", &g, &task("log"));
        assert_eq!(sub.nodes, set(&["player", "log"]));
        assert!(sub.edges.is_empty());

        let pool = path_search_pool(&g, &task("trunk")).unwrap();
        let sub = entity_match_pool(&pool, "", &g, &task("trunk"));
        assert_eq!(sub.nodes, set(&["player", "trunk"]));
        assert_eq!(sub.edges.len(), 1);
    }

    #[test]
    fn emp_keeps_mentioned_and_attributed() {
        let g = kg();
        let frame = ObservationFrame {
            timestep: 1,
            env: BTreeMap::new(),
            inv: [(
                "log".to_string(),
                InvEntityInfo {
                    x: 640,
                    y: 1040,
                    count: Some(2),
                },
            )]
            .into(),
            crosshair: (960, 540),
        };
        let (g, _) = g.embed_visual_attributes(&frame);
        let pool = path_search_pool(&g, &task("diamond")).unwrap();
        let sub = entity_match_pool(&pool, "craft sticks from planks", &g, &task("diamond"));
        assert_eq!(
            sub.nodes,
            set(&["diamond", "log", "plank", "player", "stick"])
        );
    }

    #[test]
    fn emp_identity_when_everything_is_named() {
        let g = kg();
        let pool = path_search_pool(&g, &task("diamond")).unwrap();
        let prompt: Vec<String> = pool.nodes.iter().cloned().collect();
        let sub = entity_match_pool(&pool, &prompt.join(". "), &g, &task("diamond"));
        assert_eq!(sub.as_pool(), pool);
    }

    #[test]
    fn retrieve_mid_game_keeps_pickaxe_edge() {
        let g = kg();
        let frame = ObservationFrame {
            timestep: 7,
            env: [(
                "diamond ore".to_string(),
                EnvEntityInfo {
                    x: 900,
                    y: 600,
                    w: 60,
                    h: 60,
                    range: RangeEstimate::Beyond,
                },
            )]
            .into(),
            inv: [(
                "iron pickaxe".to_string(),
                InvEntityInfo {
                    x: 720,
                    y: 1040,
                    count: Some(1),
                },
            )]
            .into(),
            crosshair: (960, 540),
        };
        let (g, _) = g.embed_visual_attributes(&frame);
        let sub = retrieve(&g, &task("diamond"), "").unwrap();
        assert_eq!(sub.provenance, Provenance::PspEmp);
        assert!(sub.edges.contains(&RelationEdge::new(
            "iron pickaxe",
            Relation::CanBeUsedToMine,
            "diamond ore"
        )));
    }

    #[test]
    fn bag_of_words_examples() {
        let p = BagOfWords;
        assert!((p.similarity("trunk", "trunk") - 1.0).abs() < 1e-12);
        assert_eq!(p.similarity("lava", "chop the tree"), 0.0);
        assert!((p.similarity("iron ore", "iron pickaxe") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn similarity_threshold() {
        let g = kg();
        let at = |t| {
            similarity_retrieve(
                &g,
                "iron pickaxe",
                &BagOfWords,
                SimilaritySelection::Cutoff { threshold: t },
            )
        };
        assert!(at(0.5).nodes.contains("iron ore"));
        assert!(!at(0.51).nodes.contains("iron ore"));
        assert!(at(1.0).nodes.contains("iron pickaxe"));
        assert!(!at(0.01).nodes.contains("lava"));
        let top = similarity_retrieve(
            &g,
            "iron pickaxe",
            &BagOfWords,
            SimilaritySelection::TopK { k: 1 },
        );
        assert_eq!(top.nodes, set(&["iron pickaxe"]));
    }

    #[test]
    fn textualize_formats() {
        let g = CrossModalGraph::load(
            "node player abstract\nnode tools abstract\nedge player \"includes\" tools\n",
        )
        .unwrap();
        let sub = PooledSubgraph::from_pool(GlobalPool::whole_graph(&g), Provenance::PspEmp);
        let t = textualize(&sub, &g, &TextOptions::default());
        assert_eq!(t.text(), "player --includes--> tools\n");

        let g = kg();
        let frame = ObservationFrame {
            timestep: 0,
            env: [(
                "trunk".to_string(),
                EnvEntityInfo {
                    x: 900,
                    y: 500,
                    w: 120,
                    h: 300,
                    range: RangeEstimate::Within,
                },
            )]
            .into(),
            inv: BTreeMap::new(),
            crosshair: (960, 540),
        };
        let (g, _) = g.embed_visual_attributes(&frame);
        let sub = retrieve(&g, &task("log"), "").unwrap();
        let t = textualize(&sub, &g, &TextOptions::default());
        assert_eq!(
            t.environment,
            vec!["trunk: env at (900,500) size (120,300), within interaction range".to_string()]
        );
        assert_eq!(
            t.text(),
            textualize(&sub, &g, &TextOptions::default()).text()
        );
    }

    #[test]
    fn full_attributes_add_descriptions() {
        let g = kg();
        let sub = retrieve(&g, &task("log"), "").unwrap();
        let names = textualize(&sub, &g, &TextOptions::default());
        let full = textualize(
            &sub,
            &g,
            &TextOptions {
                mode: TextMode::FullAttributes,
                hotbar: None,
            },
        );
        assert!(names.descriptions.is_empty());
        assert_eq!(full.descriptions.len(), 2);
        assert!(full.text().len() > names.text().len());
    }

    #[test]
    fn metrics_examples() {
        let m = fpr_fnr(&set(&["a", "b"]), &set(&["a", "b"]));
        assert_eq!((m.fpr, m.fnr), (0.0, 0.0));
        let m = fpr_fnr(&set(&["a", "b", "c", "d"]), &set(&["a", "b"]));
        assert_eq!((m.fpr, m.fnr), (0.5, 0.0));
        let m = fpr_fnr(&set(&["a"]), &set(&["a", "b", "c", "d"]));
        assert_eq!((m.fpr, m.fnr), (0.0, 0.75));
        let m = fpr_fnr(&set(&[]), &set(&[]));
        assert_eq!((m.fpr, m.fnr), (0.0, 0.0));
    }

    #[test]
    fn parallel_edges_form_a_block() {
        let g = CrossModalGraph::from_parts(
            ["player", "a", "b", "c"].map(|n| EntityNode::new(n, EntityKind::Conditional)),
            [
                RelationEdge::new("player", Relation::CanUse, "a"),
                RelationEdge::new("a", Relation::Outputs, "player"),
                RelationEdge::new("a", Relation::Outputs, "b"),
                RelationEdge::new("b", Relation::Outputs, "c"),
            ],
        );
        let pool = path_search_pool(&g, &task("b")).unwrap();
        assert_eq!(pool.nodes, set(&["a", "b", "player"]));
        assert_eq!(pool.edges.len(), 3);
    }
}
