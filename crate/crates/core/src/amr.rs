//! PENMAN reading and writing for AMR graphs.
//!
//! A graph is a set of concept nodes keyed by variable, a list of role-labelled
//! edges and a designated root. Constants (quoted strings, numbers, `-` and any
//! other bare symbol that is not a variable) are kept as ordered attributes on
//! the node that carries them. A bare variable in child position is a
//! re-entrancy and only produces an edge.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmrError {
    #[error("syntax error at byte {position}: {reason}")]
    Syntax { position: usize, reason: String },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
}

impl AmrError {
    fn syntax(position: usize, reason: impl Into<String>) -> Self {
        AmrError::Syntax {
            position,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmrNode {
    pub var: String,
    pub concept: String,
    /// Non-node constants in source order, e.g. `(":op1", "Earth")`.
    pub attributes: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AmrEdge {
    pub src: String,
    pub role: String,
    pub dst: String,
}

/// A parsed AMR graph.
///
/// Equality is structural: two graphs are equal when they have the same
/// variables with the same concepts and attribute lists, the same multiset of
/// edges and the same root. Node and edge storage order is ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmrGraph {
    nodes: Vec<AmrNode>,
    edges: Vec<AmrEdge>,
    root: String,
}

impl AmrGraph {
    /// Builds a graph after checking that variables are unique, concepts are
    /// non-empty, every edge endpoint exists and every node is reachable from
    /// the root along edges.
    pub fn new(nodes: Vec<AmrNode>, edges: Vec<AmrEdge>, root: impl Into<String>) -> Result<Self, AmrError> {
        let root = root.into();
        let mut seen = HashSet::new();
        for n in &nodes {
            if !is_symbol(&n.var) {
                return Err(AmrError::InvalidGraph(format!("bad variable {:?}", n.var)));
            }
            if !is_symbol(&n.concept) {
                return Err(AmrError::InvalidGraph(format!("bad concept {:?} for {}", n.concept, n.var)));
            }
            if !seen.insert(n.var.as_str()) {
                return Err(AmrError::InvalidGraph(format!("duplicate variable {}", n.var)));
            }
            for (role, _) in &n.attributes {
                if !is_role(role) {
                    return Err(AmrError::InvalidGraph(format!("bad role {role:?}")));
                }
            }
        }
        if !seen.contains(root.as_str()) {
            return Err(AmrError::InvalidGraph(format!("root {root} is not a node")));
        }
        for e in &edges {
            if !seen.contains(e.src.as_str()) || !seen.contains(e.dst.as_str()) {
                return Err(AmrError::InvalidGraph(format!(
                    "edge {} {} {} has a dangling endpoint",
                    e.src, e.role, e.dst
                )));
            }
            if !is_role(&e.role) {
                return Err(AmrError::InvalidGraph(format!("bad role {:?}", e.role)));
            }
        }
        let g = AmrGraph { nodes, edges, root };
        let reached = g.reachable_from_root();
        if reached.len() != g.nodes.len() {
            return Err(AmrError::InvalidGraph("graph is not rooted-connected".into()));
        }
        Ok(g)
    }

    pub fn nodes(&self) -> &[AmrNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[AmrEdge] {
        &self.edges
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn node(&self, var: &str) -> Option<&AmrNode> {
        self.nodes.iter().find(|n| n.var == var)
    }

    pub fn is_root(&self, var: &str) -> bool {
        self.root == var
    }

    fn reachable_from_root(&self) -> HashSet<&str> {
        let mut out: HashMap<&str, Vec<&str>> = HashMap::new();
        for e in &self.edges {
            out.entry(e.src.as_str()).or_default().push(e.dst.as_str());
        }
        let mut seen = HashSet::new();
        let mut stack = vec![self.root.as_str()];
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                if let Some(next) = out.get(v) {
                    stack.extend(next.iter().copied());
                }
            }
        }
        seen
    }

    fn canonical(&self) -> Canonical<'_> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| (n.var.as_str(), (n.concept.as_str(), n.attributes.as_slice())))
            .collect();
        let mut edges: Vec<&AmrEdge> = self.edges.iter().collect();
        edges.sort();
        (nodes, edges, self.root.as_str())
    }
}

/// Variables with their concept and attributes, sorted edges, root.
type Canonical<'a> = (BTreeMap<&'a str, (&'a str, &'a [(String, String)])>, Vec<&'a AmrEdge>, &'a str);

impl PartialEq for AmrGraph {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Eq for AmrGraph {}

/// Returns the variable of the outermost node.
pub fn root_var(g: &AmrGraph) -> &str {
    g.root()
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Slash,
    Role(String),
    Str(String),
    Sym(String),
}

fn is_delim(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '/' | ':' | '"')
}

fn is_symbol(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(is_delim)
}

fn is_role(s: &str) -> bool {
    s.len() > 1 && s.starts_with(':') && is_symbol(&s[1..])
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, AmrError> {
    let mut toks = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(pos, c)) = it.peek() {
        match c {
            c if c.is_whitespace() => {
                it.next();
            }
            '(' => {
                it.next();
                toks.push((pos, Tok::Open));
            }
            ')' => {
                it.next();
                toks.push((pos, Tok::Close));
            }
            '/' => {
                it.next();
                toks.push((pos, Tok::Slash));
            }
            '"' => {
                it.next();
                let mut s = String::new();
                let mut closed = false;
                while let Some((_, c)) = it.next() {
                    match c {
                        '\\' => match it.next() {
                            Some((_, e)) => s.push(e),
                            None => break,
                        },
                        '"' => {
                            closed = true;
                            break;
                        }
                        c => s.push(c),
                    }
                }
                if !closed {
                    return Err(AmrError::syntax(pos, "unterminated string literal"));
                }
                toks.push((pos, Tok::Str(s)));
            }
            ':' => {
                it.next();
                let mut s = String::from(":");
                while let Some(&(_, c)) = it.peek() {
                    if is_delim(c) {
                        break;
                    }
                    s.push(c);
                    it.next();
                }
                if s.len() == 1 {
                    return Err(AmrError::syntax(pos, "empty role name"));
                }
                toks.push((pos, Tok::Role(s)));
            }
            _ => {
                let mut s = String::new();
                while let Some(&(_, c)) = it.peek() {
                    if is_delim(c) {
                        break;
                    }
                    s.push(c);
                    it.next();
                }
                toks.push((pos, Tok::Sym(s)));
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser

enum Child {
    Node(String),
    Str(String),
    Sym(String),
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
    nodes: Vec<AmrNode>,
    index: HashMap<String, usize>,
    // (parent var, role, child) in source order; resolved after all variables are known.
    pending: Vec<(String, String, Child)>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a (usize, Tok)> {
        self.toks.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map(|t| t.0).unwrap_or(self.end)
    }

    fn expect_open(&mut self) -> Result<(), AmrError> {
        match self.peek() {
            Some((_, Tok::Open)) => {
                self.pos += 1;
                Ok(())
            }
            Some((p, Tok::Close)) => Err(AmrError::syntax(*p, "unbalanced parentheses: unexpected ')'")),
            Some((p, _)) => Err(AmrError::syntax(*p, "expected '('")),
            None => Err(AmrError::syntax(self.end, "empty input")),
        }
    }

    fn node(&mut self) -> Result<String, AmrError> {
        let open_at = self.offset();
        self.expect_open()?;
        let var = match self.peek() {
            Some((_, Tok::Sym(s))) => {
                self.pos += 1;
                s.clone()
            }
            Some((p, _)) => return Err(AmrError::syntax(*p, "expected a variable after '('")),
            None => return Err(AmrError::syntax(self.end, "unbalanced parentheses: missing ')'")),
        };
        match self.peek() {
            Some((_, Tok::Slash)) => self.pos += 1,
            Some((p, _)) => {
                return Err(AmrError::syntax(*p, format!("missing '/' after variable {var}")))
            }
            None => return Err(AmrError::syntax(self.end, "unbalanced parentheses: missing ')'")),
        }
        let concept = match self.peek() {
            Some((_, Tok::Sym(s))) => {
                self.pos += 1;
                s.clone()
            }
            Some((_, Tok::Str(s))) if !s.is_empty() && is_symbol(s) => {
                self.pos += 1;
                s.clone()
            }
            Some((p, _)) => return Err(AmrError::syntax(*p, format!("missing concept for {var}"))),
            None => return Err(AmrError::syntax(self.end, "unbalanced parentheses: missing ')'")),
        };
        if self.index.contains_key(&var) {
            return Err(AmrError::syntax(open_at, format!("duplicate variable {var}")));
        }
        self.index.insert(var.clone(), self.nodes.len());
        self.nodes.push(AmrNode {
            var: var.clone(),
            concept,
            attributes: Vec::new(),
        });
        loop {
            match self.peek() {
                Some((_, Tok::Close)) => {
                    self.pos += 1;
                    return Ok(var);
                }
                Some((_, Tok::Role(role))) => {
                    self.pos += 1;
                    let child = match self.peek() {
                        Some((_, Tok::Open)) => Child::Node(self.node()?),
                        Some((_, Tok::Str(s))) => {
                            self.pos += 1;
                            Child::Str(s.clone())
                        }
                        Some((_, Tok::Sym(s))) => {
                            self.pos += 1;
                            Child::Sym(s.clone())
                        }
                        Some((p, _)) => {
                            return Err(AmrError::syntax(*p, format!("missing value for role {role}")))
                        }
                        None => {
                            return Err(AmrError::syntax(self.end, "unbalanced parentheses: missing ')'"))
                        }
                    };
                    self.pending.push((var.clone(), role.clone(), child));
                }
                Some((p, Tok::Slash)) => return Err(AmrError::syntax(*p, "unexpected '/'")),
                Some((p, _)) => return Err(AmrError::syntax(*p, "expected a role or ')'")),
                None => return Err(AmrError::syntax(self.end, "unbalanced parentheses: missing ')'")),
            }
        }
    }
}

/// Parses one PENMAN s-expression.
pub fn parse_penman(text: &str) -> Result<AmrGraph, AmrError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: text.len(),
        nodes: Vec::new(),
        index: HashMap::new(),
        pending: Vec::new(),
    };
    let root = p.node()?;
    if let Some((pos, tok)) = p.peek() {
        let reason = if *tok == Tok::Close {
            "unbalanced parentheses: unexpected ')'"
        } else {
            "trailing input after graph"
        };
        return Err(AmrError::syntax(*pos, reason));
    }
    let Parser {
        mut nodes,
        index,
        pending,
        ..
    } = p;
    let mut edges = Vec::new();
    for (src, role, child) in pending {
        match child {
            Child::Node(dst) => edges.push(AmrEdge { src, role, dst }),
            Child::Sym(s) if index.contains_key(&s) => edges.push(AmrEdge { src, role, dst: s }),
            Child::Sym(s) | Child::Str(s) => nodes[index[&src]].attributes.push((role, s)),
        }
    }
    Ok(AmrGraph { nodes, edges, root })
}

/// Parses a document of blank-line separated graphs. Lines starting with `#`
/// are comments.
pub fn parse_penman_blocks(text: &str) -> Result<Vec<AmrGraph>, AmrError> {
    let mut graphs = Vec::new();
    let mut block = String::new();
    for line in text.lines().chain(std::iter::once("")) {
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.is_empty() {
            if !block.trim().is_empty() {
                graphs.push(parse_penman(&block)?);
            }
            block.clear();
        } else {
            block.push_str(line);
            block.push('\n');
        }
    }
    Ok(graphs)
}

// ---------------------------------------------------------------------------
// Serializer

fn write_value(out: &mut String, value: &str, vars: &HashSet<&str>) {
    let bare = is_symbol(value)
        && !vars.contains(value)
        && (value == "-" || value == "+" || value.parse::<f64>().is_ok());
    if bare {
        out.push_str(value);
    } else {
        out.push('"');
        for c in value.chars() {
            if c == '"' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('"');
    }
}

/// Writes the graph as single-line PENMAN. Variable names are preserved; a
/// node is expanded at its first occurrence in a depth-first walk from the
/// root and referenced by variable afterwards.
pub fn serialize(g: &AmrGraph) -> String {
    let vars: HashSet<&str> = g.nodes.iter().map(|n| n.var.as_str()).collect();
    let by_var: HashMap<&str, &AmrNode> = g.nodes.iter().map(|n| (n.var.as_str(), n)).collect();
    let mut out_edges: HashMap<&str, Vec<&AmrEdge>> = HashMap::new();
    for e in &g.edges {
        out_edges.entry(e.src.as_str()).or_default().push(e);
    }
    let mut placed: HashSet<&str> = HashSet::new();
    let mut out = String::new();

    fn emit<'g>(
        var: &'g str,
        out: &mut String,
        by_var: &HashMap<&'g str, &'g AmrNode>,
        out_edges: &HashMap<&'g str, Vec<&'g AmrEdge>>,
        placed: &mut HashSet<&'g str>,
        vars: &HashSet<&str>,
    ) {
        placed.insert(var);
        let node = by_var[var];
        let _ = write!(out, "({} / {}", node.var, node.concept);
        for (role, value) in &node.attributes {
            let _ = write!(out, " {role} ");
            write_value(out, value, vars);
        }
        for e in out_edges.get(var).map(Vec::as_slice).unwrap_or(&[]) {
            let _ = write!(out, " {} ", e.role);
            if placed.contains(e.dst.as_str()) {
                out.push_str(&e.dst);
            } else {
                emit(e.dst.as_str(), out, by_var, out_edges, placed, vars);
            }
        }
        out.push(')');
    }

    emit(g.root.as_str(), &mut out, &by_var, &out_edges, &mut placed, &vars);
    out
}
