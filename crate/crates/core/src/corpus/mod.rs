//! Sentences with sidecar annotations, gold graphs and alignments.

mod align;
mod io;
mod spans;

pub use align::force_align;
pub use io::{
    load_corpus, read_alignments, read_annotations, read_corpus_blocks, write_alignments,
    CorpusBlock, RawAlignment,
};
pub use spans::{identify_spans, DatePatterns};

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::graph::{AmrGraph, ConceptAction, GraphError, GraphFragment, PenmanError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("example {id}: {source}")]
    Penman {
        id: String,
        #[source]
        source: PenmanError,
    },
    #[error("example {id}: not found in {file}")]
    MissingId { id: String, file: &'static str },
    #[error("example {id}: annotation has {found} tokens, sentence has {expected}")]
    TokenCount {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("example {id}: {msg}")]
    Invalid { id: String, msg: String },
}

/// Half-open token range `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        assert!(start < end, "empty span {}-{}", start, end);
        Span { start, end }
    }

    pub fn single(i: usize) -> Span {
        Span::new(i, i + 1)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub lemma: String,
    pub pos: String,
    pub ne: String,
}

/// Dependency arc from `head` to `dependent`; `head == None` is the
/// synthetic root arc.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepEdge {
    pub head: Option<usize>,
    pub dependent: usize,
    pub label: String,
}

/// Tokens with lemma/POS/NE/dependency annotations and a span segmentation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub tokens: Vec<Token>,
    pub deps: Vec<DepEdge>,
    pub spans: Vec<Span>,
    heads: Vec<Option<usize>>,
}

impl AnnotatedSentence {
    /// Validates that `deps` form a tree over the tokens (one head per token,
    /// exactly one root, no cycles). Spans start out as singletons.
    pub fn new(tokens: Vec<Token>, deps: Vec<DepEdge>) -> Result<Self, String> {
        let n = tokens.len();
        let mut heads: Vec<Option<Option<usize>>> = vec![None; n];
        for d in &deps {
            if d.dependent >= n || d.head.is_some_and(|h| h >= n) {
                return Err(format!("dependency arc out of range: {:?}", d));
            }
            if heads[d.dependent].is_some() {
                return Err(format!("token {} has two heads", d.dependent));
            }
            heads[d.dependent] = Some(d.head);
        }
        let heads: Vec<Option<usize>> = heads
            .into_iter()
            .enumerate()
            .map(|(i, h)| h.ok_or_else(|| format!("token {} has no head", i)))
            .collect::<Result<_, _>>()?;
        if n > 0 && heads.iter().filter(|h| h.is_none()).count() != 1 {
            return Err("dependency tree must have exactly one root".into());
        }
        for start in 0..n {
            let mut cur = start;
            for _ in 0..=n {
                match heads[cur] {
                    Some(h) => cur = h,
                    None => break,
                }
            }
            if heads[cur].is_some() {
                return Err(format!("dependency cycle through token {}", start));
            }
        }
        let spans = (0..n).map(Span::single).collect();
        Ok(AnnotatedSentence {
            tokens,
            deps,
            spans,
            heads,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn head(&self, token: usize) -> Option<usize> {
        self.heads[token]
    }

    pub fn dep_root(&self) -> Option<usize> {
        self.heads.iter().position(|h| h.is_none())
    }

    pub fn forms(&self, span: Span) -> impl Iterator<Item = &str> {
        self.tokens[span.tokens()].iter().map(|t| t.form.as_str())
    }

    /// Table key for a span: case-folded forms joined by single spaces.
    pub fn span_key(&self, span: Span) -> String {
        self.forms(span)
            .map(|f| f.to_lowercase())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Undirected distances over the dependency tree from `token`.
    pub fn tree_distances(&self, token: usize) -> Vec<usize> {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for (d, h) in self.heads.iter().enumerate() {
            if let Some(h) = *h {
                adj[d].push(h);
                adj[h].push(d);
            }
        }
        let mut dist = vec![usize::MAX; n];
        dist[token] = 0;
        let mut queue = VecDeque::from([token]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Checks `spans` are sorted, disjoint and cover every token.
    pub fn is_partition(&self, spans: &[Span]) -> bool {
        let mut next = 0;
        for s in spans {
            if s.start != next || s.end <= s.start {
                return false;
            }
            next = s.end;
        }
        next == self.len()
    }
}

/// What a span is aligned to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlignTarget {
    Node(String),
    /// Several nodes; `root` is the member without an incoming edge from the
    /// other members.
    Fragment { root: String, members: Vec<String> },
    Null,
}

impl AlignTarget {
    pub fn is_null(&self) -> bool {
        matches!(self, AlignTarget::Null)
    }

    pub fn members(&self) -> Vec<&str> {
        match self {
            AlignTarget::Node(v) => vec![v.as_str()],
            AlignTarget::Fragment { members, .. } => members.iter().map(String::as_str).collect(),
            AlignTarget::Null => Vec::new(),
        }
    }

    /// Node that represents the span in relations.
    pub fn head(&self) -> Option<&str> {
        match self {
            AlignTarget::Node(v) => Some(v),
            AlignTarget::Fragment { root, .. } => Some(root),
            AlignTarget::Null => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(Span, AlignTarget)>,
}

impl Alignment {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Variables covered by a non-null target.
    pub fn aligned_vars(&self) -> HashSet<&str> {
        self.pairs.iter().flat_map(|(_, t)| t.members()).collect()
    }

    /// Tokens covered by a non-null target.
    pub fn aligned_tokens(&self) -> HashSet<usize> {
        self.pairs
            .iter()
            .filter(|(_, t)| !t.is_null())
            .flat_map(|(s, _)| s.tokens())
            .collect()
    }

    pub fn target_of(&self, span: Span) -> Option<&AlignTarget> {
        self.pairs.iter().find(|(s, _)| *s == span).map(|(_, t)| t)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusExample {
    pub id: String,
    /// Raw sentence as given by `# ::snt`.
    pub text: String,
    pub sentence: AnnotatedSentence,
    /// Absent for raw (unannotated) input.
    pub gold: Option<AmrGraph>,
    pub alignment: Alignment,
}

impl CorpusExample {
    fn invalid(&self, msg: impl Into<String>) -> CorpusError {
        CorpusError::Invalid {
            id: self.id.clone(),
            msg: msg.into(),
        }
    }

    /// Concept action a gold target corresponds to. Single nodes carrying
    /// constants become one-node fragments so the constants survive.
    pub fn gold_action(&self, target: &AlignTarget) -> Result<ConceptAction, CorpusError> {
        let gold = self
            .gold
            .as_ref()
            .ok_or_else(|| self.invalid("no gold graph"))?;
        let (root, members) = match target {
            AlignTarget::Null => return Ok(ConceptAction::null()),
            AlignTarget::Node(v) => (v.as_str(), vec![v.as_str()]),
            AlignTarget::Fragment { root, members } => {
                (root.as_str(), members.iter().map(String::as_str).collect())
            }
        };
        let label = gold
            .label(root)
            .ok_or_else(|| self.invalid(format!("unknown variable `{}`", root)))?;
        if members.len() == 1 && !gold.constants().iter().any(|c| c.source == root) {
            return Ok(ConceptAction::Single(label.clone()));
        }
        induced_fragment(gold, root, &members)
            .map(ConceptAction::Fragment)
            .map_err(|e| self.invalid(e.to_string()))
    }

    /// Training-time segmentation: aligned spans verbatim, every other token
    /// as a null-aligned singleton.
    pub fn gold_segmentation(&self) -> Result<Vec<(Span, AlignTarget)>, CorpusError> {
        let mut pairs = self.alignment.pairs.clone();
        pairs.sort_by_key(|(s, _)| *s);
        for w in pairs.windows(2) {
            if w[0].0.overlaps(&w[1].0) {
                return Err(self.invalid(format!("overlapping aligned spans {} and {}", w[0].0, w[1].0)));
            }
        }
        if let Some((last, _)) = pairs.last() {
            if last.end > self.sentence.len() {
                return Err(self.invalid(format!("span {} out of range", last)));
            }
        }
        let mut out = Vec::with_capacity(self.sentence.len());
        let mut next = 0;
        for (span, target) in pairs {
            out.extend((next..span.start).map(|i| (Span::single(i), AlignTarget::Null)));
            next = span.end;
            out.push((span, target));
        }
        out.extend((next..self.sentence.len()).map(|i| (Span::single(i), AlignTarget::Null)));
        Ok(out)
    }
}

/// Training-time spans derived from the alignment.
pub fn gold_spans_from_alignment(example: &CorpusExample) -> Result<Vec<Span>, CorpusError> {
    Ok(example
        .gold_segmentation()?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

/// Subgraph of `gold` induced by `members`, rooted at `root`.
pub(crate) fn induced_fragment(
    gold: &AmrGraph,
    root: &str,
    members: &[&str],
) -> Result<GraphFragment, GraphError> {
    let set: HashSet<&str> = members.iter().copied().collect();
    let mut g = AmrGraph::new();
    g.add_node(root, gold.label(root).ok_or(GraphError::UndeclaredVariable(root.into()))?.clone())?;
    for n in gold.nodes() {
        if n.var != root && set.contains(n.var.as_str()) {
            g.add_node(&n.var, n.label.clone())?;
        }
    }
    for e in gold.edges() {
        if set.contains(e.source.as_str()) && set.contains(e.target.as_str()) {
            g.add_edge(&e.source, &e.relation, &e.target)?;
        }
    }
    for c in gold.constants() {
        if set.contains(c.source.as_str()) {
            g.add_constant(&c.source, &c.relation, &c.value)?;
        }
    }
    GraphFragment::new(g)
}
