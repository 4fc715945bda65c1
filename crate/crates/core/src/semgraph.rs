//! Semantic graph construction from one hypothesis AMR and the evidence-pool
//! AMRs.
//!
//! Node rules: over-general concepts carrying a constant are replaced by the
//! constant; the hypothesis nodes are split into question nodes (labels shared
//! by every choice's hypothesis) and answer nodes (the rest). Edge rules: every
//! AMR edge is kept except hypothesis edges joining a question node to an
//! answer node. Nodes with equal labels (case-insensitive) are unified unless
//! one of them is the root of its AMR.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amr::{AmrGraph, AmrNode};
use crate::corpus::FactId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemGraphError {
    #[error("every hypothesis shares all labels with choice {choice}; no answer nodes")]
    DegenerateSplit { choice: usize },
    #[error("need at least two hypothesis graphs, got {0}")]
    TooFewChoices(usize),
    #[error("choice index {choice} out of range for {count} hypotheses")]
    ChoiceOutOfRange { choice: usize, count: usize },
}

/// Where a node or AMR came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Origin {
    Hypothesis,
    Fact(FactId),
}

impl Origin {
    pub fn fact(&self) -> Option<&FactId> {
        match self {
            Origin::Fact(f) => Some(f),
            Origin::Hypothesis => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Question,
    Answer,
    Evidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemNode {
    /// Display label: the concept, or the substituted constant.
    pub label: String,
    pub kind: NodeKind,
    pub sources: BTreeSet<Origin>,
    pub merged_from: BTreeSet<(Origin, String)>,
    /// True when this node is the root of the AMR it came from. Root nodes
    /// are never unified.
    pub is_root: bool,
}

impl SemNode {
    pub fn key(&self) -> String {
        label_key(&self.label)
    }

    pub fn fact_sources(&self) -> impl Iterator<Item = &FactId> {
        self.sources.iter().filter_map(Origin::fact)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeOrigin {
    /// An AMR edge between nodes that each belong to a single AMR.
    Inner,
    /// An AMR edge touching a node unified across AMRs.
    Inter,
}

/// Undirected edge with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemEdge {
    pub a: usize,
    pub b: usize,
    pub origin: EdgeOrigin,
    /// Evidence facts whose AMR contributed this edge.
    pub facts: BTreeSet<FactId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemanticGraph {
    nodes: Vec<SemNode>,
    edges: Vec<SemEdge>,
    qnodes: BTreeSet<usize>,
    anodes: BTreeSet<usize>,
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
    #[serde(skip)]
    edge_index: HashMap<(usize, usize), usize>,
}

impl SemanticGraph {
    /// Assembles a graph from parts. Edges are normalised to `a < b`,
    /// self-loops are dropped and parallel edges merged (their fact sets are
    /// unioned; `Inter` wins over `Inner`).
    ///
    /// # Panics
    /// If an edge refers to a node index out of range.
    pub fn from_parts(nodes: Vec<SemNode>, edges: Vec<SemEdge>) -> Self {
        let n = nodes.len();
        let mut merged: Vec<SemEdge> = Vec::new();
        let mut edge_index = HashMap::new();
        for mut e in edges {
            assert!(e.a < n && e.b < n, "edge endpoint out of range");
            if e.a == e.b {
                continue;
            }
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
            match edge_index.get(&(e.a, e.b)) {
                Some(&i) => {
                    let existing: &mut SemEdge = &mut merged[i];
                    existing.facts.extend(e.facts);
                    if e.origin == EdgeOrigin::Inter {
                        existing.origin = EdgeOrigin::Inter;
                    }
                }
                None => {
                    edge_index.insert((e.a, e.b), merged.len());
                    merged.push(e);
                }
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &merged {
            adjacency[e.a].push(e.b);
            adjacency[e.b].push(e.a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let qnodes = (0..n).filter(|&i| nodes[i].kind == NodeKind::Question).collect();
        let anodes = (0..n).filter(|&i| nodes[i].kind == NodeKind::Answer).collect();
        SemanticGraph {
            nodes,
            edges: merged,
            qnodes,
            anodes,
            adjacency,
            edge_index,
        }
    }

    pub fn nodes(&self) -> &[SemNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &SemNode {
        &self.nodes[id]
    }

    pub fn edges(&self) -> &[SemEdge] {
        &self.edges
    }

    pub fn qnodes(&self) -> &BTreeSet<usize> {
        &self.qnodes
    }

    pub fn anodes(&self) -> &BTreeSet<usize> {
        &self.anodes
    }

    /// Neighbours in ascending id order.
    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.adjacency[id]
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<&SemEdge> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edge_index.get(&key).map(|&i| &self.edges[i])
    }

    /// True when the graph holds no evidence-derived node.
    pub fn is_hypothesis_only(&self) -> bool {
        self.nodes.iter().all(|n| n.fact_sources().next().is_none())
    }
}

/// Case-insensitive comparison key for labels.
pub fn label_key(label: &str) -> String {
    label.to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Concepts replaced by their first attribute value when they carry one.
    pub overgeneral: BTreeSet<String>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            overgeneral: ["name", "thing", "person", "amr-unknown", "multi-sentence"]
                .into_iter()
                .map(String::from)
                .collect(),
        }
    }
}

/// The label a node contributes to the semantic graph.
pub fn substitute_overgeneral(node: &AmrNode, cfg: &GraphConfig) -> String {
    match node.attributes.first() {
        Some((_, value)) if cfg.overgeneral.contains(&node.concept) => value.clone(),
        _ => node.concept.clone(),
    }
}

fn label_keys(g: &AmrGraph, cfg: &GraphConfig) -> BTreeSet<String> {
    g.nodes()
        .iter()
        .map(|n| label_key(&substitute_overgeneral(n, cfg)))
        .collect()
}

/// Splits choice `choice`'s hypothesis labels into question labels (present
/// in every hypothesis) and answer labels (the remainder). Labels are returned
/// as case-folded keys.
pub fn split_qa_nodes(
    hyps: &[AmrGraph],
    choice: usize,
    cfg: &GraphConfig,
) -> Result<(BTreeSet<String>, BTreeSet<String>), SemGraphError> {
    if hyps.len() < 2 {
        return Err(SemGraphError::TooFewChoices(hyps.len()));
    }
    if choice >= hyps.len() {
        return Err(SemGraphError::ChoiceOutOfRange {
            choice,
            count: hyps.len(),
        });
    }
    let sets: Vec<BTreeSet<String>> = hyps.iter().map(|g| label_keys(g, cfg)).collect();
    let q: BTreeSet<String> = sets[0]
        .iter()
        .filter(|l| sets[1..].iter().all(|s| s.contains(*l)))
        .cloned()
        .collect();
    let a: BTreeSet<String> = sets[choice].difference(&q).cloned().collect();
    if a.is_empty() {
        return Err(SemGraphError::DegenerateSplit { choice });
    }
    Ok((q, a))
}

struct Builder {
    nodes: Vec<SemNode>,
    mergeable: HashMap<String, usize>,
    edges: Vec<(usize, usize, Option<FactId>)>,
}

impl Builder {
    fn add_graph(
        &mut self,
        origin: &Origin,
        g: &AmrGraph,
        cfg: &GraphConfig,
        kind_of: impl Fn(&str) -> NodeKind,
    ) -> HashMap<String, usize> {
        let mut local = HashMap::new();
        for n in g.nodes() {
            let label = substitute_overgeneral(n, cfg);
            let key = label_key(&label);
            let is_root = g.is_root(&n.var);
            let existing = if is_root { None } else { self.mergeable.get(&key).copied() };
            let id = match existing {
                Some(id) => id,
                None => {
                    let id = self.nodes.len();
                    self.nodes.push(SemNode {
                        label,
                        kind: kind_of(&key),
                        sources: BTreeSet::new(),
                        merged_from: BTreeSet::new(),
                        is_root,
                    });
                    if !is_root {
                        self.mergeable.insert(key, id);
                    }
                    id
                }
            };
            let node = &mut self.nodes[id];
            node.sources.insert(origin.clone());
            node.merged_from.insert((origin.clone(), n.var.clone()));
            local.insert(n.var.clone(), id);
        }
        local
    }
}

/// Builds the semantic graph for hypothesis `choice` of `hyps` against the
/// evidence-pool AMRs.
///
/// An empty pool is not an error: the result holds only the hypothesis nodes
/// and edges, and chain generation on it yields nothing.
pub fn build_graph(
    hyps: &[AmrGraph],
    choice: usize,
    pool: &[(FactId, &AmrGraph)],
    cfg: &GraphConfig,
) -> Result<SemanticGraph, SemGraphError> {
    let hyp = hyps.get(choice).ok_or(SemGraphError::ChoiceOutOfRange {
        choice,
        count: hyps.len(),
    })?;
    let (qlabels, alabels) = match split_qa_nodes(hyps, choice, cfg) {
        Ok(split) => split,
        Err(SemGraphError::DegenerateSplit { .. }) => {
            let root = hyp.node(hyp.root()).expect("root exists");
            let root_key = label_key(&substitute_overgeneral(root, cfg));
            let mut q = label_keys(hyp, cfg);
            q.remove(&root_key);
            (q, BTreeSet::from([root_key]))
        }
        Err(e) => return Err(e),
    };

    let mut b = Builder {
        nodes: Vec::new(),
        mergeable: HashMap::new(),
        edges: Vec::new(),
    };
    let hyp_local = b.add_graph(&Origin::Hypothesis, hyp, cfg, |key| {
        if qlabels.contains(key) {
            NodeKind::Question
        } else {
            debug_assert!(alabels.contains(key));
            NodeKind::Answer
        }
    });
    for e in hyp.edges() {
        let (x, y) = (hyp_local[&e.src], hyp_local[&e.dst]);
        let kinds = (b.nodes[x].kind, b.nodes[y].kind);
        let crosses = matches!(
            kinds,
            (NodeKind::Question, NodeKind::Answer) | (NodeKind::Answer, NodeKind::Question)
        );
        if !crosses {
            b.edges.push((x, y, None));
        }
    }
    for (fact, g) in pool {
        let origin = Origin::Fact(fact.clone());
        let local = b.add_graph(&origin, g, cfg, |_| NodeKind::Evidence);
        for e in g.edges() {
            b.edges.push((local[&e.src], local[&e.dst], Some(fact.clone())));
        }
    }

    let cross_graph: Vec<bool> = b
        .nodes
        .iter()
        .map(|n| n.merged_from.iter().map(|(o, _)| o).collect::<BTreeSet<_>>().len() > 1)
        .collect();
    let mut grouped: BTreeMap<(usize, usize), SemEdge> = BTreeMap::new();
    let mut order = Vec::new();
    for (x, y, fact) in b.edges {
        if x == y {
            continue;
        }
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        let origin = if cross_graph[lo] || cross_graph[hi] {
            EdgeOrigin::Inter
        } else {
            EdgeOrigin::Inner
        };
        let entry = grouped.entry((lo, hi)).or_insert_with(|| {
            order.push((lo, hi));
            SemEdge {
                a: lo,
                b: hi,
                origin,
                facts: BTreeSet::new(),
            }
        });
        if let Some(f) = fact {
            entry.facts.insert(f);
        }
    }
    let edges = order.into_iter().map(|k| grouped.remove(&k).unwrap()).collect();
    Ok(SemanticGraph::from_parts(b.nodes, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amr::parse_penman;

    fn p(s: &str) -> AmrGraph {
        parse_penman(s).unwrap()
    }

    fn keys(g: &SemanticGraph, ids: &BTreeSet<usize>) -> BTreeSet<String> {
        ids.iter().map(|&i| g.node(i).key()).collect()
    }

    #[test]
    fn substitution() {
        let cfg = GraphConfig::default();
        let g = p("(p / planet :name (n / name :op1 \"Earth\"))");
        assert_eq!(substitute_overgeneral(g.node("n").unwrap(), &cfg), "Earth");
        assert_eq!(substitute_overgeneral(g.node("p").unwrap(), &cfg), "planet");
        let bare = p("(n / name)");
        assert_eq!(substitute_overgeneral(bare.node("n").unwrap(), &cfg), "name");
    }

    #[test]
    fn split_two_choices() {
        let cfg = GraphConfig::default();
        let hyps = [
            p("(r / require-01 :ARG0 (w / weasel) :ARG1 (e / energy) :purpose (m / move-01 :ARG0 w))"),
            p("(r / require-01 :ARG0 (w / willow) :ARG1 (e / energy) :purpose (m / move-01 :ARG0 w))"),
        ];
        let (q, a) = split_qa_nodes(&hyps, 0, &cfg).unwrap();
        let want_q: BTreeSet<String> = ["energy", "move-01", "require-01"].iter().map(|s| s.to_string()).collect();
        assert_eq!(q, want_q);
        assert_eq!(a, BTreeSet::from(["weasel".to_string()]));
    }

    #[test]
    fn split_degenerate() {
        let cfg = GraphConfig::default();
        let hyps = [p("(a / b :ARG0 (c / d))"), p("(x / b :ARG0 (y / D))")];
        assert_eq!(
            split_qa_nodes(&hyps, 1, &cfg),
            Err(SemGraphError::DegenerateSplit { choice: 1 })
        );
    }

    #[test]
    fn degenerate_split_falls_back_to_root_answer() {
        let cfg = GraphConfig::default();
        let hyps = [p("(a / b :ARG0 (c / d))"), p("(x / b :ARG0 (y / d))")];
        let g = build_graph(&hyps, 0, &[], &cfg).unwrap();
        assert_eq!(keys(&g, g.anodes()), BTreeSet::from(["b".to_string()]));
        assert_eq!(keys(&g, g.qnodes()), BTreeSet::from(["d".to_string()]));
        // the only hypothesis edge crosses question/answer and is dropped
        assert!(g.edges().is_empty());
    }

    #[test]
    fn empty_pool_gives_hypothesis_only_graph() {
        let cfg = GraphConfig::default();
        let hyps = [
            p("(r / require-01 :ARG0 (w / weasel) :ARG1 (e / energy))"),
            p("(r / require-01 :ARG0 (w / willow) :ARG1 (e / energy))"),
        ];
        let g = build_graph(&hyps, 0, &[], &cfg).unwrap();
        assert_eq!(g.nodes().len(), 3);
        assert!(g.is_hypothesis_only());
        // require-01 -- weasel crosses question/answer; require-01 -- energy survives
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn roots_do_not_unify_and_concepts_do() {
        let cfg = GraphConfig::default();
        let hyps = [
            p("(i / install-01 :ARG1 (p / panel))"),
            p("(i / install-01 :ARG1 (b / bee))"),
        ];
        let f1 = p("(h / have-03 :ARG0 (p / panel) :ARG1 (x / sunlight))");
        let f2 = p("(h / have-03 :ARG0 (p / Panel) :ARG1 (e / energy))");
        let pool = [(FactId::from("1"), &f1), (FactId::from("2"), &f2)];
        let g = build_graph(&hyps, 0, &pool, &cfg).unwrap();
        let have: Vec<_> = g.nodes().iter().filter(|n| n.key() == "have-03").collect();
        assert_eq!(have.len(), 2);
        let panel: Vec<_> = g.nodes().iter().filter(|n| n.key() == "panel").collect();
        assert_eq!(panel.len(), 1);
        assert_eq!(panel[0].kind, NodeKind::Answer);
        assert_eq!(panel[0].sources.len(), 3);
        // the hypothesis root install-01 is a question node and stays single
        assert_eq!(g.nodes().iter().filter(|n| n.key() == "install-01").count(), 1);
    }

    #[test]
    fn hypothesis_qa_edge_dropped_but_evidence_edge_kept() {
        let cfg = GraphConfig::default();
        let hyps = [
            p("(r / root :ARG0 (q / qc :mod (a / ans1)))"),
            p("(r / root :ARG0 (q / qc :mod (a / ans2)))"),
        ];
        let f = p("(x / rel :ARG0 (q / qc :mod (a / ans1)))");
        let g = build_graph(&hyps, 0, &[(FactId::from("f"), &f)], &cfg).unwrap();
        let q = g.nodes().iter().position(|n| n.key() == "qc").unwrap();
        let a = g.nodes().iter().position(|n| n.key() == "ans1").unwrap();
        let e = g.edge(q, a).expect("evidence edge survives");
        assert_eq!(e.origin, EdgeOrigin::Inter);
        assert_eq!(e.facts, BTreeSet::from([FactId::from("f")]));
        for e in g.edges() {
            let kinds = (g.node(e.a).kind, g.node(e.b).kind);
            if matches!(kinds, (NodeKind::Question, NodeKind::Answer) | (NodeKind::Answer, NodeKind::Question)) {
                assert_eq!(e.origin, EdgeOrigin::Inter);
            }
        }
    }

    #[test]
    fn self_loops_from_unification_are_dropped() {
        let cfg = GraphConfig::default();
        let hyps = [p("(r / x :ARG0 (a / y))"), p("(r / x :ARG0 (a / z))")];
        let f = p("(r / rel :ARG0 (a / thing2 :ARG1 (b / thing2)))");
        let g = build_graph(&hyps, 0, &[(FactId::from("f"), &f)], &cfg).unwrap();
        assert!(g.edges().iter().all(|e| e.a != e.b));
        assert_eq!(g.nodes().iter().filter(|n| n.key() == "thing2").count(), 1);
    }
}
