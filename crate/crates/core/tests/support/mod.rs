//! Brute-force reference implementations and random inputs shared by test targets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use kgagent::graph::{CrossModalGraph, EntityKind, EntityNode, Relation, RelationEdge, PLAYER};
use kgagent::perception::{EnvEntityInfo, InvEntityInfo, RangeEstimate};
use kgagent::retrieval::{GlobalPool, TaskSpec};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Union of all simple source–target paths, found by exhaustive DFS over edge indices.
pub fn brute_simple_paths(
    nodes: &BTreeSet<String>,
    edges: &BTreeSet<RelationEdge>,
    s: &str,
    t: &str,
) -> GlobalPool {
    if !nodes.contains(s) || !nodes.contains(t) {
        return GlobalPool::default();
    }
    if s == t {
        return GlobalPool {
            nodes: BTreeSet::from([s.to_string()]),
            edges: BTreeSet::new(),
        };
    }
    let edges: Vec<&RelationEdge> = edges
        .iter()
        .filter(|e| nodes.contains(&e.source) && nodes.contains(&e.target))
        .collect();
    let mut out = GlobalPool::default();
    let mut path_nodes = vec![s.to_string()];
    let mut path_edges: Vec<usize> = Vec::new();
    fn dfs(
        edges: &[&RelationEdge],
        t: &str,
        path_nodes: &mut Vec<String>,
        path_edges: &mut Vec<usize>,
        out: &mut GlobalPool,
    ) {
        let cur = path_nodes.last().unwrap().clone();
        if cur == t {
            out.nodes.extend(path_nodes.iter().cloned());
            out.edges
                .extend(path_edges.iter().map(|&i| edges[i].clone()));
            return;
        }
        for (i, e) in edges.iter().enumerate() {
            let next = if e.source == cur {
                &e.target
            } else if e.target == cur {
                &e.source
            } else {
                continue;
            };
            if path_nodes.contains(next) {
                continue;
            }
            path_nodes.push(next.clone());
            path_edges.push(i);
            dfs(edges, t, path_nodes, path_edges, out);
            path_nodes.pop();
            path_edges.pop();
        }
    }
    dfs(&edges, t, &mut path_nodes, &mut path_edges, &mut out);
    out
}

/// Lowercase alphanumeric words with one trailing `s` dropped from words longer than three
/// letters (but not from `ss` endings).
pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            let w = std::mem::take(&mut cur);
            let n = w.chars().count();
            if n > 3 && w.ends_with('s') && !w.ends_with("ss") {
                out.push(w[..w.len() - 1].to_string());
            } else {
                out.push(w);
            }
        }
    }
    out
}

/// Whether `name` occurs in `prompt` as a contiguous run of whole words.
pub fn named_in(prompt: &str, name: &str) -> bool {
    let (p, n) = (words(prompt), words(name));
    !n.is_empty() && p.windows(n.len()).any(|w| w == n.as_slice())
}

/// The retained node set of entity matching, stated directly.
pub fn emp_expected(
    pool: &GlobalPool,
    prompt: &str,
    graph: &CrossModalGraph,
    task: &TaskSpec,
) -> BTreeSet<String> {
    let target = task.target_name();
    pool.nodes
        .iter()
        .filter(|n| {
            *n == PLAYER
                || **n == target
                || graph
                    .node(n)
                    .is_some_and(|x| x.env_attr.is_some() || x.inv_attr.is_some())
                || named_in(prompt, n)
        })
        .cloned()
        .collect()
}

pub const NAME_POOL: [&str; 16] = [
    "log",
    "iron",
    "iron ore",
    "ore",
    "glass",
    "stone pickaxe",
    "pickaxe",
    "crafting table",
    "table",
    "bus",
    "diamond",
    "diamond ore",
    "coal",
    "plank",
    "grass block",
    "stick",
];

pub fn task_for(target: &str) -> TaskSpec {
    TaskSpec {
        id: "random".into(),
        target: target.into(),
        description: format!("get {target}"),
        cot_questions: vec![],
        goals: vec![],
    }
}

/// Random multigraph on at most `max_nodes` nodes (player first) and `max_edges` edges,
/// self-loops and parallel relations included.
pub fn random_graph(rng: &mut impl Rng, max_nodes: usize, max_edges: usize) -> CrossModalGraph {
    let n = rng.random_range(1..=max_nodes);
    let mut names: Vec<String> = vec![PLAYER.to_string()];
    names.extend((1..n).map(|i| format!("n{i}")));
    let m = rng.random_range(0..=max_edges);
    let edges: Vec<RelationEdge> = (0..m)
        .map(|_| {
            let a = names.choose(rng).unwrap();
            let b = names.choose(rng).unwrap();
            let r = *Relation::ALL.choose(rng).unwrap();
            RelationEdge::new(a, r, b)
        })
        .collect();
    let nodes = names
        .iter()
        .map(|s| EntityNode::new(s, EntityKind::Conditional));
    CrossModalGraph::from_parts(nodes, edges)
}

/// Random graph over words from [`NAME_POOL`], with random visual attributes.
pub fn random_named_graph(rng: &mut impl Rng) -> CrossModalGraph {
    let mut names: Vec<&str> = NAME_POOL
        .iter()
        .copied()
        .filter(|_| rng.random_bool(0.6))
        .collect();
    names.insert(0, PLAYER);
    let nodes: Vec<EntityNode> = names
        .iter()
        .map(|s| {
            let kind = if *s == PLAYER {
                EntityKind::Abstract
            } else if rng.random_bool(0.5) {
                EntityKind::Environmental
            } else {
                EntityKind::Conditional
            };
            let mut node = EntityNode::new(s, kind);
            if rng.random_bool(0.2) {
                match kind {
                    EntityKind::Environmental => {
                        node.env_attr = Some(EnvEntityInfo {
                            x: 1,
                            y: 1,
                            w: 10,
                            h: 10,
                            range: RangeEstimate::Beyond,
                        })
                    }
                    EntityKind::Conditional => {
                        node.inv_attr = Some(InvEntityInfo {
                            x: 1,
                            y: 1,
                            count: None,
                        })
                    }
                    EntityKind::Abstract => {}
                }
            }
            node
        })
        .collect();
    let m = rng.random_range(0..=24);
    let edges: Vec<RelationEdge> = (0..m)
        .map(|_| {
            RelationEdge::new(
                names.choose(rng).unwrap(),
                *Relation::ALL.choose(rng).unwrap(),
                names.choose(rng).unwrap(),
            )
        })
        .collect();
    CrossModalGraph::from_parts(nodes, edges)
}

const FILLER: [&str; 12] = [
    "the",
    "get",
    "with",
    "a",
    "and",
    "ores",
    "sticks",
    "pickaxes",
    "glasses",
    "bus",
    "busses",
    "table-top",
];

/// Prompt mixing graph names (some pluralised or split), filler words and punctuation.
pub fn random_prompt(rng: &mut impl Rng) -> String {
    let k = rng.random_range(0..12);
    let mut parts = Vec::new();
    for _ in 0..k {
        let piece = if rng.random_bool(0.5) {
            let name = *NAME_POOL.choose(rng).unwrap();
            match rng.random_range(0..4) {
                0 => format!("{name}s"),
                1 => name.to_uppercase(),
                2 => name.replace(' ', "_"),
                _ => name.to_string(),
            }
        } else {
            FILLER.choose(rng).unwrap().to_string()
        };
        parts.push(piece);
        parts.push(
            [" ", ", ", ". ", " (", ") "]
                .choose(rng)
                .unwrap()
                .to_string(),
        );
    }
    parts.concat()
}

/// A random sub-pool: a subset of nodes (player kept) and the edges among them.
pub fn random_pool(rng: &mut impl Rng, graph: &CrossModalGraph) -> GlobalPool {
    let nodes: BTreeSet<String> = graph
        .node_names()
        .into_iter()
        .filter(|n| n == PLAYER || rng.random_bool(0.7))
        .collect();
    let edges = graph
        .edges()
        .iter()
        .filter(|e| nodes.contains(&e.source) && nodes.contains(&e.target))
        .cloned()
        .collect();
    GlobalPool { nodes, edges }
}
