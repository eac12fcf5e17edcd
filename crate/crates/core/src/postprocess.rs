//! Repairs decoded graphs into rooted, connected, acyclic AMRs.

use std::collections::HashSet;

use crate::candidates::{lemmatized_span, one_best_concept, relation_candidates, ConceptTable, RelationTables, FALLBACK_RELATION};
use crate::corpus::{AnnotatedSentence, Span};
use crate::graph::{AmrGraph, ConceptAction, ConceptLabel};

/// Attaches every weak component that does not contain `root` by an edge
/// from `root` to the component's first source node. The label is the
/// top relation candidate for the two concepts, or `mod` when there is
/// none.
pub fn connect(g: &AmrGraph, root: &str, tables: &RelationTables) -> AmrGraph {
    let mut out = g.clone();
    let Some(root_idx) = g.node_index(root) else {
        return out;
    };
    let mut indegree = vec![0usize; g.nodes().len()];
    for e in g.edges() {
        indegree[g.node_index(&e.target).unwrap()] += 1;
    }
    let root_label = g.nodes()[root_idx].label.surface();
    for comp in g.weak_components() {
        if comp.contains(&root_idx) {
            continue;
        }
        let head = comp.iter().copied().find(|&i| indegree[i] == 0).unwrap_or(comp[0]);
        let node = &g.nodes()[head];
        let rel = relation_candidates(tables, &root_label, &node.label.surface())
            .into_iter()
            .find(|r| !r.is_no_edge())
            .map_or_else(|| FALLBACK_RELATION.to_owned(), |r| r.surface().to_owned());
        out.add_edge(root, &rel, &node.var).expect("existing nodes");
    }
    out
}

/// Removes one edge per directed cycle until none is left. On a two-node
/// cycle the edge whose label is rarer in training goes; on longer cycles
/// the edge entering the node furthest from the root goes. Ties remove the
/// later edge.
pub fn break_cycles(g: &AmrGraph, tables: &RelationTables) -> AmrGraph {
    break_cycles_protecting(g, tables, &HashSet::new())
}

/// [`break_cycles`], avoiding `protected` (source, target) edges whenever
/// the cycle has another edge to remove.
pub fn break_cycles_protecting(
    g: &AmrGraph,
    tables: &RelationTables,
    protected: &HashSet<(String, String)>,
) -> AmrGraph {
    let mut out = g.clone();
    while let Some(cycle) = out.find_cycle_edges() {
        let is_protected = |ei: usize| {
            let e = &out.edges()[ei];
            protected.contains(&(e.source.clone(), e.target.clone()))
        };
        let mut pool: Vec<usize> = cycle.iter().copied().filter(|&e| !is_protected(e)).collect();
        if pool.is_empty() {
            pool = cycle.clone();
        }
        let victim = if cycle.len() == 2 {
            *pool
                .iter()
                .min_by_key(|&&ei| (tables.frequency(&out.edges()[ei].relation), std::cmp::Reverse(ei)))
                .unwrap()
        } else {
            let dist = match out.root() {
                Some(r) => out.undirected_distances(r),
                None => vec![None; out.nodes().len()],
            };
            *pool
                .iter()
                .max_by_key(|&&ei| {
                    let t = out.node_index(&out.edges()[ei].target).unwrap();
                    (dist[t].unwrap_or(0), ei)
                })
                .unwrap()
        };
        out.remove_edge(victim);
    }
    out
}

/// Stand-in graph for a sentence where every span was NULL: one node with
/// the first span's most frequent concept, or its lemma.
pub fn placeholder(sentence: &AnnotatedSentence, spans: &[Span], table: &ConceptTable) -> AmrGraph {
    let label = spans
        .first()
        .map(|&s| match one_best_concept(table, sentence, s) {
            ConceptAction::Single(l) if !l.is_null() => l,
            ConceptAction::Fragment(f) => f.root_label().clone(),
            _ => ConceptLabel::Word(lemmatized_span(sentence, s)),
        })
        .unwrap_or_else(|| ConceptLabel::Word("thing".into()));
    let mut g = AmrGraph::new();
    let v = g.fresh_var(&label);
    g.add_node(&v, label).expect("empty graph");
    g
}
