#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cgr::amr::{AmrEdge, AmrGraph, AmrNode};
use cgr::chains::ChainConfig;
use cgr::corpus::FactId;
use cgr::retriever::{HashingEncoder, QueryEncoder, RetrievalError, VectorIndex};
use cgr::semgraph::{EdgeOrigin, NodeKind, Origin, SemEdge, SemNode, SemanticGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PENMAN20: &str = include_str!("../data/penman20.txt");

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fid(s: &str) -> FactId {
    FactId::from(s)
}

/// Prints a criterion verdict straight to stderr so it shows up even when
/// the harness captures test output.
pub fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    use std::io::Write;
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance criterion {criterion:>2} [{name}]: {verdict} ({detail})");
}

// ---------------------------------------------------------------- AMR

pub const CONCEPTS: &[&str] = &[
    "sun", "panel", "want-01", "go-02", "boy", "girl", "energy", "renew-01", "heat-01", "plant", "water", "grow-01",
    "name", "person", "city", "cloud", "rain-01", "and", "thing", "light",
];
const ROLES: &[&str] = &[":ARG0", ":ARG1", ":ARG2", ":mod", ":poss", ":location", ":ARG0-of", ":op1", ":time"];
const VALUES: &[&str] = &["Earth", "New York", "42", "-", "3.5", "+", "imperative", "say \"hi\"", "-7", "x1"];

/// A random rooted AMR: a tree of depth at most `max_depth` and at most
/// `max_nodes` nodes, plus a few re-entrant edges and constant attributes.
pub fn random_amr(r: &mut impl Rng, concepts: &[&str], max_depth: usize, max_nodes: usize, reentrancies: usize) -> AmrGraph {
    let target = r.gen_range(1..=max_nodes);
    let mut nodes: Vec<AmrNode> = Vec::new();
    let mut depth: Vec<usize> = Vec::new();
    let mut edges: Vec<AmrEdge> = Vec::new();
    let mk = |r: &mut dyn rand::RngCore, i: usize| AmrNode {
        var: format!("v{i}"),
        concept: concepts[r.gen_range(0..concepts.len())].to_string(),
        attributes: Vec::new(),
    };
    nodes.push(mk(r, 0));
    depth.push(0);
    while nodes.len() < target {
        let parents: Vec<usize> = (0..nodes.len()).filter(|&i| depth[i] < max_depth).collect();
        let Some(&p) = parents.choose(r) else { break };
        let i = nodes.len();
        nodes.push(mk(r, i));
        depth.push(depth[p] + 1);
        edges.push(AmrEdge {
            src: format!("v{p}"),
            role: ROLES[r.gen_range(0..ROLES.len())].to_string(),
            dst: format!("v{i}"),
        });
    }
    for _ in 0..reentrancies {
        let a = r.gen_range(0..nodes.len());
        let b = r.gen_range(0..nodes.len());
        edges.push(AmrEdge {
            src: format!("v{a}"),
            role: ROLES[r.gen_range(0..ROLES.len())].to_string(),
            dst: format!("v{b}"),
        });
    }
    for n in &mut nodes {
        while r.gen_bool(0.25) {
            let role = format!(":op{}", r.gen_range(1..4));
            n.attributes.push((role, VALUES[r.gen_range(0..VALUES.len())].to_string()));
        }
    }
    AmrGraph::new(nodes, edges, "v0").expect("generated AMR is valid")
}

// ---------------------------------------------------------------- semantic graphs

/// A random semantic graph of 3..=`max_nodes` nodes with at least one
/// question and one answer node, evidence nodes from up to four facts and
/// edges carrying subsets of their endpoints' facts.
pub fn random_semantic_graph(r: &mut impl Rng, max_nodes: usize, edge_p: f64) -> SemanticGraph {
    let n = r.gen_range(3..=max_nodes);
    let facts: Vec<FactId> = (0..4).map(|i| FactId::new(format!("f{i}"))).collect();
    let nq = r.gen_range(1..=2.min(n - 2));
    let na = r.gen_range(1..=2.min(n - nq - 1).max(1));
    let mut kinds: Vec<NodeKind> = (0..n)
        .map(|i| {
            if i < nq {
                NodeKind::Question
            } else if i < nq + na {
                NodeKind::Answer
            } else {
                NodeKind::Evidence
            }
        })
        .collect();
    kinds.shuffle(r);
    let nodes: Vec<SemNode> = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let mut sources = BTreeSet::new();
            if kind == NodeKind::Evidence {
                for _ in 0..r.gen_range(1..=2) {
                    sources.insert(Origin::Fact(facts.choose(r).unwrap().clone()));
                }
            } else {
                sources.insert(Origin::Hypothesis);
                if r.gen_bool(0.4) {
                    sources.insert(Origin::Fact(facts.choose(r).unwrap().clone()));
                }
            }
            SemNode {
                label: format!("c{i}"),
                kind,
                merged_from: sources.iter().map(|o| (o.clone(), format!("x{i}"))).collect(),
                sources,
                is_root: false,
            }
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if !r.gen_bool(edge_p) {
                continue;
            }
            let shared: Vec<FactId> = nodes[a]
                .fact_sources()
                .filter(|f| nodes[b].fact_sources().any(|g| g == *f))
                .cloned()
                .collect();
            let mut fs = BTreeSet::new();
            if !shared.is_empty() && r.gen_bool(0.85) {
                fs.insert(shared.choose(r).unwrap().clone());
            } else if r.gen_bool(0.2) {
                fs.insert(facts.choose(r).unwrap().clone());
            }
            edges.push(SemEdge {
                a,
                b,
                origin: if r.gen_bool(0.5) { EdgeOrigin::Inner } else { EdgeOrigin::Inter },
                facts: fs,
            });
        }
    }
    SemanticGraph::from_parts(nodes, edges)
}

fn edge_facts(g: &SemanticGraph, a: usize, b: usize) -> Option<BTreeSet<FactId>> {
    let (lo, hi) = (a.min(b), a.max(b));
    g.edges().iter().find(|e| e.a == lo && e.b == hi).map(|e| e.facts.clone())
}

/// Every simple path starting at a question node with at most `max_len`
/// nodes, enumerated with an explicit stack and no pruning by node kind.
pub fn simple_paths_from_questions(g: &SemanticGraph, max_len: usize) -> Vec<Vec<usize>> {
    let n = g.nodes().len();
    let mut adj = vec![BTreeSet::new(); n];
    for e in g.edges() {
        adj[e.a].insert(e.b);
        adj[e.b].insert(e.a);
    }
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = (0..n)
        .filter(|&i| g.node(i).kind == NodeKind::Question)
        .map(|i| vec![i])
        .collect();
    while let Some(path) = stack.pop() {
        if path.len() < max_len {
            for &next in &adj[*path.last().unwrap()] {
                if !path.contains(&next) {
                    let mut p = path.clone();
                    p.push(next);
                    stack.push(p);
                }
            }
        }
        out.push(path);
    }
    out
}

/// Question node first, answer node last, evidence in between (at least one).
pub fn is_chain_path(g: &SemanticGraph, path: &[usize]) -> bool {
    path.len() >= 3
        && g.node(path[0]).kind == NodeKind::Question
        && g.node(*path.last().unwrap()).kind == NodeKind::Answer
        && path[1..path.len() - 1].iter().all(|&i| g.node(i).kind == NodeKind::Evidence)
}

/// Fact sequences a node path reads as, straight from the definition: each
/// node takes one of its facts that also labels an adjacent path edge
/// (interior nodes with no such fact may take any of theirs), every
/// fact-labelled path edge must be explained by one of its endpoints' facts,
/// consecutive repeats collapse and revisits are rejected. Sorted by
/// (length, ids), first `cap` kept.
pub fn oracle_map(path: &[usize], g: &SemanticGraph, cap: usize) -> Vec<Vec<FactId>> {
    let last = path.len() - 1;
    let mut options: Vec<Vec<Option<FactId>>> = Vec::new();
    for (i, &v) in path.iter().enumerate() {
        let own: BTreeSet<FactId> = g.node(v).fact_sources().cloned().collect();
        let mut touching = BTreeSet::new();
        if i > 0 {
            touching.extend(edge_facts(g, path[i - 1], v).unwrap());
        }
        if i < last {
            touching.extend(edge_facts(g, v, path[i + 1]).unwrap());
        }
        let both: Vec<Option<FactId>> = own.intersection(&touching).cloned().map(Some).collect();
        options.push(if !both.is_empty() {
            both
        } else if i == 0 || i == last || own.is_empty() {
            vec![None]
        } else {
            own.into_iter().map(Some).collect()
        });
    }
    let mut seqs: BTreeSet<(usize, Vec<FactId>)> = BTreeSet::new();
    let mut chosen: Vec<Option<FactId>> = Vec::new();
    fn rec(
        i: usize,
        options: &[Vec<Option<FactId>>],
        chosen: &mut Vec<Option<FactId>>,
        path: &[usize],
        g: &SemanticGraph,
        seqs: &mut BTreeSet<(usize, Vec<FactId>)>,
    ) {
        if i == options.len() {
            for k in 0..path.len() - 1 {
                let ef = edge_facts(g, path[k], path[k + 1]).unwrap();
                if ef.is_empty() {
                    continue;
                }
                let ok = [&chosen[k], &chosen[k + 1]]
                    .iter()
                    .any(|c| c.as_ref().is_some_and(|f| ef.contains(f)));
                if !ok {
                    return;
                }
            }
            let mut seq: Vec<FactId> = Vec::new();
            for f in chosen.iter().flatten() {
                if seq.last() == Some(f) {
                    continue;
                }
                if seq.contains(f) {
                    return;
                }
                seq.push(f.clone());
            }
            if !seq.is_empty() {
                seqs.insert((seq.len(), seq));
            }
            return;
        }
        for o in &options[i] {
            chosen.push(o.clone());
            rec(i + 1, options, chosen, path, g, seqs);
            chosen.pop();
        }
    }
    rec(0, &options, &mut chosen, path, g, &mut seqs);
    seqs.into_iter().take(cap).map(|(_, s)| s).collect()
}

/// All chain fact sequences of `g`, deduplicated and sorted by (length, ids).
pub fn oracle_chains(g: &SemanticGraph, cfg: &ChainConfig) -> Vec<Vec<FactId>> {
    let mut all: BTreeSet<(usize, Vec<FactId>)> = BTreeSet::new();
    for p in simple_paths_from_questions(g, cfg.max_path_len) {
        if is_chain_path(g, &p) {
            for s in oracle_map(&p, g, cfg.max_expansions) {
                all.insert((s.len(), s));
            }
        }
    }
    all.into_iter().map(|(_, s)| s).collect()
}

// ---------------------------------------------------------------- retrieval

fn fnv(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Small-integer query vectors derived from a hash of the whole text, so
/// every score is an exact integer and ties are common.
pub struct IntEncoder {
    pub dim: usize,
}

impl IntEncoder {
    pub fn vector(&self, text: &str) -> Vec<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(fnv(text));
        (0..self.dim).map(|_| r.gen_range(-2..=2) as f64).collect()
    }
}

impl QueryEncoder for IntEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        Ok(self.vector(text))
    }
}

/// `n` facts with small-integer vectors; ids `{prefix}00`, `{prefix}01`, ...
pub fn random_int_index(r: &mut impl Rng, n: usize, dim: usize, prefix: &str) -> VectorIndex {
    VectorIndex::build(
        dim,
        (0..n).map(|i| {
            let v: Vec<f64> = (0..dim).map(|_| r.gen_range(-2..=2) as f64).collect();
            (FactId::new(format!("{prefix}{i:02}")), v, format!("{prefix} fact {i} w{}", r.gen_range(0..5)))
        }),
    )
    .unwrap()
}

fn naive_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBeam {
    pub picked: Vec<FactId>,
    pub text: String,
    pub score: f64,
}

/// Beam search by exhaustive enumeration: every surviving beam is extended
/// by every fact it has not picked, all extensions are ranked by (cumulative
/// score desc, picked sequence asc) and the best `k` survive. The pool is
/// the union of each beam's own `k` best extensions (a full sort per beam).
/// The extra index only competes at the first step.
pub fn oracle_retrieve(
    h: &str,
    index: &VectorIndex,
    extra: Option<&VectorIndex>,
    enc: &IntEncoder,
    k: usize,
    t_max: usize,
) -> (Vec<OracleBeam>, BTreeSet<FactId>) {
    let rank = |v: &mut Vec<OracleBeam>| {
        v.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then_with(|| a.picked.cmp(&b.picked)));
    };
    let own_best = |beam: &OracleBeam, idx: &VectorIndex| -> Vec<OracleBeam> {
        let q = enc.vector(&beam.text);
        let mut ext: Vec<OracleBeam> = idx
            .ids()
            .iter()
            .filter(|f| !beam.picked.contains(f))
            .map(|f| {
                let mut picked = beam.picked.clone();
                picked.push(f.clone());
                OracleBeam {
                    picked,
                    text: format!("{} [SEP] {}", beam.text, idx.text(f).unwrap()),
                    score: beam.score + naive_dot(&q, idx.vector(f).unwrap()),
                }
            })
            .collect();
        rank(&mut ext);
        ext
    };
    let start = OracleBeam {
        picked: Vec::new(),
        text: h.to_string(),
        score: 0.0,
    };
    let mut pool = BTreeSet::new();
    let mut all = own_best(&start, index);
    pool.extend(all.iter().take(k).map(|b| b.picked[0].clone()));
    if let Some(x) = extra {
        let ext = own_best(&start, x);
        pool.extend(ext.iter().take(k).map(|b| b.picked[0].clone()));
        all.truncate(k);
        all.extend(ext.into_iter().take(k));
    }
    rank(&mut all);
    all.truncate(k);
    let mut beams = all;
    for _ in 1..t_max {
        let mut children = Vec::new();
        for b in &beams {
            let ext = own_best(b, index);
            pool.extend(ext.iter().take(k).map(|c| c.picked.last().unwrap().clone()));
            children.extend(ext);
        }
        if children.is_empty() {
            break;
        }
        rank(&mut children);
        children.truncate(k);
        beams = children;
    }
    (beams, pool)
}

// ---------------------------------------------------------------- losses

/// Query embedding computed directly from the token bag and encoder rows.
pub fn oracle_embed(enc: &HashingEncoder, text: &str) -> Vec<f64> {
    let bag = enc.bag(text);
    let dim = enc.weights().len() / enc.buckets();
    let mut out = vec![0.0; dim];
    for &(b, w) in bag.entries() {
        for (o, x) in out.iter_mut().zip(enc.row(b)) {
            *o += w * x;
        }
    }
    out
}

/// `Σ_t log( e^{s⁺_t} / (e^{s⁺_t} + Σ_neg e^{s⁻}) )` with the query growing by
/// `[SEP] fact text` after each step, traversing `chain` in the given order.
pub fn oracle_chain_log_prob(
    enc: &HashingEncoder,
    index: &VectorIndex,
    h: &str,
    chain: &[FactId],
    negatives: &[Vec<FactId>],
) -> f64 {
    let mut query = h.to_string();
    let mut total = 0.0;
    for (t, f) in chain.iter().enumerate() {
        let q = oracle_embed(enc, &query);
        let pos = naive_dot(&q, index.vector(f).unwrap()).exp();
        let neg: f64 = negatives[t].iter().map(|n| naive_dot(&q, index.vector(n).unwrap()).exp()).sum();
        total += (pos / (pos + neg)).ln();
        query = format!("{query} [SEP] {}", index.text(f).unwrap());
    }
    total
}

/// `−log( ψ⁺ / (ψ⁺ + Σ_j ψ_j) )` with `ψ = exp(mean fact score)`; empty
/// negative pools are skipped.
pub fn oracle_global(
    enc: &HashingEncoder,
    index: &VectorIndex,
    h: &str,
    active: &BTreeSet<FactId>,
    pools: &[BTreeSet<FactId>],
) -> f64 {
    let q = oracle_embed(enc, h);
    let psi = |s: &BTreeSet<FactId>| {
        let m: f64 = s.iter().map(|f| naive_dot(&q, index.vector(f).unwrap())).sum::<f64>() / s.len() as f64;
        m.exp()
    };
    let pos = psi(active);
    let neg: f64 = pools.iter().filter(|p| !p.is_empty()).map(psi).sum();
    -(pos / (pos + neg)).ln()
}

/// An index whose fact texts share a small vocabulary with the hypotheses.
pub fn random_float_index(r: &mut impl Rng, n: usize, dim: usize) -> VectorIndex {
    const WORDS: &[&str] = &["sun", "heat", "light", "water", "plant", "grow", "panel", "energy", "cloud", "rain"];
    VectorIndex::build(
        dim,
        (0..n).map(|i| {
            let v: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
            let len = r.gen_range(2..5);
            let text: Vec<&str> = (0..len).map(|_| WORDS[r.gen_range(0..WORDS.len())]).collect();
            (FactId::new(format!("e{i:02}")), v, text.join(" "))
        }),
    )
    .unwrap()
}

/// A random chain of 1..=3 distinct facts with, per step, up to four
/// negatives that are not on the chain.
pub fn random_chain(r: &mut impl Rng, ids: &[FactId]) -> (Vec<FactId>, Vec<Vec<FactId>>) {
    let len = r.gen_range(1..=3);
    let chain: Vec<FactId> = ids.choose_multiple(r, len).cloned().collect();
    let rest: Vec<FactId> = ids.iter().filter(|f| !chain.contains(f)).cloned().collect();
    let negs = (0..len)
        .map(|_| {
            let m = r.gen_range(0..=4);
            rest.choose_multiple(r, m).cloned().collect()
        })
        .collect();
    (chain, negs)
}

pub fn random_subset(r: &mut impl Rng, ids: &[FactId], max: usize) -> BTreeSet<FactId> {
    let m = r.gen_range(0..=max);
    ids.choose_multiple(r, m).cloned().collect()
}

/// Central differences of `f` at `coords` of `params`.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> f64, params: &mut [f64], coords: &[usize], eps: f64) -> Vec<f64> {
    coords
        .iter()
        .map(|&i| {
            let orig = params[i];
            params[i] = orig + eps;
            let up = f(params);
            params[i] = orig - eps;
            let down = f(params);
            params[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Label counts used by graph-construction oracles.
pub fn count_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for l in labels {
        *m.entry(l.to_lowercase()).or_insert(0) += 1;
    }
    m
}

// ---------------------------------------------------------------- graph construction

fn oracle_label(n: &AmrNode) -> String {
    const OVERGENERAL: &[&str] = &["name", "thing", "person", "amr-unknown", "multi-sentence"];
    match n.attributes.first() {
        Some((_, v)) if OVERGENERAL.contains(&n.concept.as_str()) => v.to_lowercase(),
        _ => n.concept.to_lowercase(),
    }
}

/// Checks a graph built from `hyps[choice]` and `pool` against the
/// construction rules, recomputing everything from the input AMRs:
/// node count, question/answer split, no question-answer edges from the
/// hypothesis, roots never unified, and provenance closure for nodes and
/// edges.
pub fn check_graph(hyps: &[AmrGraph], choice: usize, pool: &[(FactId, &AmrGraph)], g: &SemanticGraph) -> Result<(), String> {
    let hyp = &hyps[choice];
    let keys = |a: &AmrGraph| -> BTreeSet<String> { a.nodes().iter().map(oracle_label).collect() };
    let all_keys: Vec<BTreeSet<String>> = hyps.iter().map(keys).collect();
    let mut q: BTreeSet<String> = all_keys[0].iter().filter(|k| all_keys.iter().all(|s| s.contains(*k))).cloned().collect();
    let mut a: BTreeSet<String> = all_keys[choice].difference(&q).cloned().collect();
    if a.is_empty() {
        let root_key = oracle_label(hyp.node(hyp.root()).unwrap());
        q = all_keys[choice].clone();
        q.remove(&root_key);
        a = BTreeSet::from([root_key]);
    }

    let sources: Vec<(Origin, &AmrGraph)> = std::iter::once((Origin::Hypothesis, hyp))
        .chain(pool.iter().map(|(f, x)| (Origin::Fact(f.clone()), *x)))
        .collect();

    // node count: one node per AMR root plus one per distinct non-root label
    let mut nonroot = BTreeSet::new();
    for (_, x) in &sources {
        for n in x.nodes() {
            if n.var != x.root() {
                nonroot.insert(oracle_label(n));
            }
        }
    }
    let expected = sources.len() + nonroot.len();
    if g.nodes().len() != expected {
        return Err(format!("{} nodes, expected {expected}", g.nodes().len()));
    }

    // where each AMR node went
    let mut home: BTreeMap<(Origin, String), usize> = BTreeMap::new();
    for (i, n) in g.nodes().iter().enumerate() {
        let from: BTreeSet<Origin> = n.merged_from.iter().map(|(o, _)| o.clone()).collect();
        if from != n.sources {
            return Err(format!("node {i} sources differ from merged_from"));
        }
        for (o, v) in &n.merged_from {
            if home.insert((o.clone(), v.clone()), i).is_some() {
                return Err(format!("AMR node {o:?}/{v} appears twice"));
            }
        }
        if n.is_root && n.merged_from.len() != 1 {
            return Err(format!("root node {i} was unified"));
        }
        let want = if n.sources.contains(&Origin::Hypothesis) {
            if q.contains(&n.key()) {
                NodeKind::Question
            } else if a.contains(&n.key()) {
                NodeKind::Answer
            } else {
                return Err(format!("hypothesis node {i} in neither split"));
            }
        } else {
            NodeKind::Evidence
        };
        if n.kind != want {
            return Err(format!("node {i} has kind {:?}, expected {want:?}", n.kind));
        }
    }
    let roots = g.nodes().iter().filter(|n| n.is_root).count();
    if roots != sources.len() {
        return Err(format!("{roots} root nodes for {} AMRs", sources.len()));
    }
    for (o, x) in &sources {
        for n in x.nodes() {
            let Some(&i) = home.get(&(o.clone(), n.var.clone())) else {
                return Err(format!("AMR node {o:?}/{} missing", n.var));
            };
            if g.node(i).key() != oracle_label(n) {
                return Err(format!("node {i} label {} differs from its AMR", g.node(i).label));
            }
            if (n.var == x.root()) != g.node(i).is_root {
                return Err(format!("node {i} root flag wrong"));
            }
        }
    }

    // edges
    let mut want_edges: BTreeMap<(usize, usize), BTreeSet<FactId>> = BTreeMap::new();
    for (o, x) in &sources {
        for e in x.edges() {
            let s = home[&(o.clone(), e.src.clone())];
            let d = home[&(o.clone(), e.dst.clone())];
            if s == d {
                continue;
            }
            let ks = (g.node(s).kind, g.node(d).kind);
            let crossing = matches!(ks, (NodeKind::Question, NodeKind::Answer) | (NodeKind::Answer, NodeKind::Question));
            if *o == Origin::Hypothesis && crossing {
                continue;
            }
            let set = want_edges.entry((s.min(d), s.max(d))).or_default();
            if let Origin::Fact(f) = o {
                set.insert(f.clone());
            }
        }
    }
    if g.edges().len() != want_edges.len() {
        return Err(format!("{} edges, expected {}", g.edges().len(), want_edges.len()));
    }
    for e in g.edges() {
        let Some(facts) = want_edges.get(&(e.a, e.b)) else {
            return Err(format!("unexpected edge {}-{}", e.a, e.b));
        };
        if &e.facts != facts {
            return Err(format!("edge {}-{} facts {:?}, expected {facts:?}", e.a, e.b, e.facts));
        }
        for end in [e.a, e.b] {
            if !e.facts.iter().all(|f| g.node(end).sources.contains(&Origin::Fact(f.clone()))) {
                return Err(format!("edge {}-{} cites a fact its endpoint lacks", e.a, e.b));
            }
        }
        let ks = (g.node(e.a).kind, g.node(e.b).kind);
        let qa = matches!(ks, (NodeKind::Question, NodeKind::Answer) | (NodeKind::Answer, NodeKind::Question));
        if qa && (e.origin == EdgeOrigin::Inner || e.facts.is_empty()) {
            return Err(format!("question-answer edge {}-{} from the hypothesis", e.a, e.b));
        }
        let cross = |i: usize| g.node(i).sources.len() > 1;
        let want_origin = if cross(e.a) || cross(e.b) { EdgeOrigin::Inter } else { EdgeOrigin::Inner };
        if e.origin != want_origin {
            return Err(format!("edge {}-{} origin {:?}", e.a, e.b, e.origin));
        }
    }
    Ok(())
}

/// Four random hypothesis AMRs over a shared vocabulary and a pool of up to
/// five random fact AMRs.
pub fn random_construction(r: &mut impl Rng) -> (Vec<AmrGraph>, usize, Vec<(FactId, AmrGraph)>) {
    let vocab = &CONCEPTS[..r.gen_range(6..CONCEPTS.len())];
    let hyps: Vec<AmrGraph> = (0..4)
        .map(|_| {
            let re = r.gen_range(0..2);
            random_amr(r, vocab, 3, 8, re)
        })
        .collect();
    let pool = (0..r.gen_range(0..=5))
        .map(|i| {
            let re = r.gen_range(0..2);
            (FactId::new(format!("p{i}")), random_amr(r, vocab, 3, 8, re))
        })
        .collect();
    (hyps, r.gen_range(0..4), pool)
}
