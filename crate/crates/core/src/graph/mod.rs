//! AMR graph data model and structural predicates.

mod penman;

pub use penman::{parse_penman, serialize_penman, PenmanError};

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// AMR keywords that are neither words nor PropBank frames.
const KEYWORDS: &[&str] = &[
    "name",
    "date-entity",
    "date-interval",
    "person",
    "thing",
    "and",
    "or",
    "multi-sentence",
    "organization",
    "country",
    "city",
    "temporal-quantity",
    "monetary-quantity",
    "distance-quantity",
    "percentage-entity",
    "url-entity",
    "imperative",
    "interrogative",
    "expressive",
];

/// Label of a concept node, or the null concept used as a prediction action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConceptLabel {
    Frame { frame: String, sense: String },
    Word(String),
    Keyword(String),
    Null,
}

impl ConceptLabel {
    pub const NULL_SURFACE: &'static str = "NULL";

    /// Classify a surface string. `NULL` maps to [`ConceptLabel::Null`], a
    /// trailing two-digit `-NN` suffix makes a frame.
    pub fn parse(surface: &str) -> ConceptLabel {
        if surface == Self::NULL_SURFACE {
            return ConceptLabel::Null;
        }
        if let Some((frame, sense)) = surface.rsplit_once('-') {
            if !frame.is_empty() && sense.len() == 2 && sense.bytes().all(|b| b.is_ascii_digit())
            {
                return ConceptLabel::Frame {
                    frame: frame.to_owned(),
                    sense: sense.to_owned(),
                };
            }
        }
        if KEYWORDS.contains(&surface) {
            ConceptLabel::Keyword(surface.to_owned())
        } else {
            ConceptLabel::Word(surface.to_owned())
        }
    }

    pub fn surface(&self) -> String {
        match self {
            ConceptLabel::Frame { frame, sense } => format!("{}-{}", frame, sense),
            ConceptLabel::Word(w) | ConceptLabel::Keyword(w) => w.clone(),
            ConceptLabel::Null => Self::NULL_SURFACE.to_owned(),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, ConceptLabel::Null)
    }

    pub fn frame_sense(&self) -> Option<(&str, &str)> {
        match self {
            ConceptLabel::Frame { frame, sense } => Some((frame, sense)),
            _ => None,
        }
    }
}

impl fmt::Display for ConceptLabel {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(&self.surface())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub var: String,
    pub label: ConceptLabel,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: String,
    pub relation: String,
    pub target: String,
}

/// Non-variable leaf such as a quoted name or a number. `value` keeps the
/// token as written, quotes included.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constant {
    pub source: String,
    pub relation: String,
    pub value: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("null concept cannot be stored as node `{0}`")]
    NullLabel(String),
    #[error("graph has no root")]
    NoRoot,
    #[error("graph is disconnected; component roots: {}", .0.join(", "))]
    Disconnected(Vec<String>),
    #[error("invalid fragment: {0}")]
    InvalidFragment(&'static str),
}

/// Rooted, directed, labeled concept graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AmrGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    constants: Vec<Constant>,
    root: Option<String>,
    index: HashMap<String, usize>,
}

impl AmrGraph {
    pub fn new() -> Self {
        AmrGraph::default()
    }

    pub fn add_node(&mut self, var: &str, label: ConceptLabel) -> Result<(), GraphError> {
        if label.is_null() {
            return Err(GraphError::NullLabel(var.to_owned()));
        }
        if self.index.contains_key(var) {
            return Err(GraphError::DuplicateVariable(var.to_owned()));
        }
        self.index.insert(var.to_owned(), self.nodes.len());
        self.nodes.push(Node {
            var: var.to_owned(),
            label,
        });
        if self.root.is_none() {
            self.root = Some(var.to_owned());
        }
        Ok(())
    }

    pub fn add_edge(&mut self, source: &str, relation: &str, target: &str) -> Result<(), GraphError> {
        for v in [source, target] {
            if !self.index.contains_key(v) {
                return Err(GraphError::UndeclaredVariable(v.to_owned()));
            }
        }
        self.edges.push(Edge {
            source: source.to_owned(),
            relation: relation.to_owned(),
            target: target.to_owned(),
        });
        Ok(())
    }

    pub fn add_constant(&mut self, source: &str, relation: &str, value: &str) -> Result<(), GraphError> {
        if !self.index.contains_key(source) {
            return Err(GraphError::UndeclaredVariable(source.to_owned()));
        }
        self.constants.push(Constant {
            source: source.to_owned(),
            relation: relation.to_owned(),
            value: value.to_owned(),
        });
        Ok(())
    }

    pub fn set_root(&mut self, var: &str) -> Result<(), GraphError> {
        if !self.index.contains_key(var) {
            return Err(GraphError::UndeclaredVariable(var.to_owned()));
        }
        self.root = Some(var.to_owned());
        Ok(())
    }

    /// Removes the edge at `idx` (insertion order) and returns it.
    pub fn remove_edge(&mut self, idx: usize) -> Edge {
        self.edges.remove(idx)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn constants(&self) -> &[Constant] {
        &self.constants
    }

    pub fn root(&self) -> Option<&str> {
        self.root.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, var: &str) -> bool {
        self.index.contains_key(var)
    }

    pub fn node_index(&self, var: &str) -> Option<usize> {
        self.index.get(var).copied()
    }

    pub fn label(&self, var: &str) -> Option<&ConceptLabel> {
        self.index.get(var).map(|&i| &self.nodes[i].label)
    }

    /// Undirected adjacency over node indices.
    pub(crate) fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let (s, t) = (self.index[&e.source], self.index[&e.target]);
            adj[s].push(t);
            adj[t].push(s);
        }
        adj
    }

    /// Directed adjacency: for each node, the (edge index, target) pairs
    /// in edge insertion order.
    pub(crate) fn out_adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (ei, e) in self.edges.iter().enumerate() {
            adj[self.index[&e.source]].push((ei, self.index[&e.target]));
        }
        adj
    }

    /// Weakly connected components as lists of node indices, each sorted,
    /// ordered by their lowest node index.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let adj = self.undirected_adjacency();
        let mut seen = vec![false; self.nodes.len()];
        let mut comps = Vec::new();
        for start in 0..self.nodes.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// True iff all nodes are in one weak component. The empty graph is
    /// connected.
    pub fn is_connected(&self) -> bool {
        self.weak_components().len() <= 1
    }

    /// One directed cycle as a sequence of variables, found by depth-first
    /// search in node order with edges in insertion order.
    pub fn find_cycle(&self) -> Option<Vec<String>> {
        self.find_cycle_edges().map(|edges| {
            edges
                .iter()
                .map(|&ei| self.edges[ei].source.clone())
                .collect()
        })
    }

    /// Like [`find_cycle`](Self::find_cycle) but returns the edge indices
    /// along the cycle, in cycle order.
    pub fn find_cycle_edges(&self) -> Option<Vec<usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Grey,
            Black,
        }

        let adj = self.out_adjacency();
        let n = self.nodes.len();
        let mut color = vec![Color::White; n];
        // Edge used to enter each node on the current DFS path.
        let mut via: Vec<Option<usize>> = vec![None; n];

        for start in 0..n {
            if color[start] != Color::White {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            color[start] = Color::Grey;
            while let Some(&mut (u, ref mut next)) = stack.last_mut() {
                if *next < adj[u].len() {
                    let (ei, v) = adj[u][*next];
                    *next += 1;
                    match color[v] {
                        Color::White => {
                            color[v] = Color::Grey;
                            via[v] = Some(ei);
                            stack.push((v, 0));
                        }
                        Color::Grey => {
                            // Walk back from u to v along the DFS path.
                            let mut cycle = vec![ei];
                            let mut cur = u;
                            while cur != v {
                                let e = via[cur].expect("grey node off the DFS path");
                                cycle.push(e);
                                cur = self.index[&self.edges[e].source];
                            }
                            cycle.reverse();
                            return Some(cycle);
                        }
                        Color::Black => {}
                    }
                } else {
                    color[u] = Color::Black;
                    stack.pop();
                }
            }
        }
        None
    }

    pub fn is_acyclic(&self) -> bool {
        self.find_cycle_edges().is_none()
    }

    /// For each weak component, its nodes without incoming edges. A component
    /// with no such node (every node on or below a cycle) reports its
    /// lowest-ordered node instead.
    pub fn component_roots(&self) -> Vec<String> {
        let mut indegree = vec![0usize; self.nodes.len()];
        for e in &self.edges {
            indegree[self.index[&e.target]] += 1;
        }
        let mut roots = Vec::new();
        for comp in self.weak_components() {
            let sources: Vec<usize> = comp.iter().copied().filter(|&i| indegree[i] == 0).collect();
            if sources.is_empty() {
                roots.push(self.nodes[comp[0]].var.clone());
            } else {
                roots.extend(sources.into_iter().map(|i| self.nodes[i].var.clone()));
            }
        }
        roots
    }

    /// Variables reachable from `start` following edge direction.
    pub fn reachable_from(&self, start: &str) -> HashSet<String> {
        let mut seen = HashSet::new();
        let Some(&s) = self.index.get(start) else {
            return seen;
        };
        let adj = self.out_adjacency();
        let mut mark = vec![false; self.nodes.len()];
        mark[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &(_, v) in &adj[u] {
                if !mark[v] {
                    mark[v] = true;
                    queue.push_back(v);
                }
            }
        }
        for (i, m) in mark.into_iter().enumerate() {
            if m {
                seen.insert(self.nodes[i].var.clone());
            }
        }
        seen
    }

    /// Undirected shortest-path distances (in edges) from `start`; `None` for
    /// unreachable nodes. Indexed like [`nodes`](Self::nodes).
    pub fn undirected_distances(&self, start: &str) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.nodes.len()];
        let Some(&s) = self.index.get(start) else {
            return dist;
        };
        let adj = self.undirected_adjacency();
        dist[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// A fresh variable name derived from the first letter of `label`.
    pub fn fresh_var(&self, label: &ConceptLabel) -> String {
        let stem = label
            .surface()
            .chars()
            .find(|c| c.is_ascii_alphabetic())
            .map(|c| c.to_ascii_lowercase())
            .unwrap_or('x');
        let mut candidate = stem.to_string();
        let mut n = 2;
        while self.index.contains_key(&candidate) {
            candidate = format!("{}{}", stem, n);
            n += 1;
        }
        candidate
    }
}

/// A subgraph produced as a single concept action, e.g. a named entity or a
/// date. `graph.root()` is the fragment root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphFragment {
    graph: AmrGraph,
}

impl GraphFragment {
    /// Builds a fragment, checking it is connected, acyclic and that its root
    /// has no incoming edge.
    pub fn new(graph: AmrGraph) -> Result<Self, GraphError> {
        let root = graph.root().ok_or(GraphError::NoRoot)?.to_owned();
        if !graph.is_connected() {
            return Err(GraphError::Disconnected(graph.component_roots()));
        }
        if !graph.is_acyclic() {
            return Err(GraphError::InvalidFragment("cyclic"));
        }
        if graph.edges().iter().any(|e| e.target == root) {
            return Err(GraphError::InvalidFragment("root has an incoming edge"));
        }
        Ok(GraphFragment { graph })
    }

    pub fn graph(&self) -> &AmrGraph {
        &self.graph
    }

    pub fn root_label(&self) -> &ConceptLabel {
        self.graph.label(self.graph.root().unwrap()).unwrap()
    }

    /// Variable-independent structural rendering, e.g.
    /// `(name :op1 "John" :op2 "Smith")`.
    pub fn canonical(&self) -> String {
        fn render(g: &AmrGraph, var: &str, out: &mut String) {
            out.push('(');
            out.push_str(&g.label(var).unwrap().surface());
            for e in g.edges().iter().filter(|e| e.source == var) {
                out.push_str(" :");
                out.push_str(&e.relation);
                out.push(' ');
                render(g, &e.target, out);
            }
            for c in g.constants().iter().filter(|c| c.source == var) {
                out.push_str(" :");
                out.push_str(&c.relation);
                out.push(' ');
                out.push_str(&c.value);
            }
            out.push(')');
        }
        let mut out = String::new();
        render(&self.graph, self.graph.root().unwrap(), &mut out);
        out
    }

    /// Table key: root label plus a stable hash of the fragment shape.
    pub fn surface(&self) -> String {
        format!(
            "{}#{:08x}",
            self.root_label().surface(),
            crate::features::stable_hash(self.canonical().as_bytes()) as u32
        )
    }
}

/// A concept prediction action: one node, a whole fragment, or the null
/// concept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConceptAction {
    Single(ConceptLabel),
    Fragment(GraphFragment),
}

impl ConceptAction {
    pub fn null() -> Self {
        ConceptAction::Single(ConceptLabel::Null)
    }

    pub fn is_null(&self) -> bool {
        matches!(self, ConceptAction::Single(ConceptLabel::Null))
    }

    pub fn surface(&self) -> String {
        match self {
            ConceptAction::Single(l) => l.surface(),
            ConceptAction::Fragment(f) => f.surface(),
        }
    }

    /// Label of the node that takes part in relations (the fragment root for
    /// fragments).
    pub fn head_label(&self) -> &ConceptLabel {
        match self {
            ConceptAction::Single(l) => l,
            ConceptAction::Fragment(f) => f.root_label(),
        }
    }
}
