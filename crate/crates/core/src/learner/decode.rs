use std::collections::{HashMap, HashSet};

use crate::candidates::{
    concept_candidates, one_best_concept, relation_candidates, ConceptTable, FrameLexicon, RelationAction,
    RelationTables, FALLBACK_RELATION,
};
use crate::corpus::{AlignTarget, AnnotatedSentence, CorpusExample, Span};
use crate::features::{
    concept_features, relation_features, root_features, ConceptState, FeatureContext, PlacedConcept, SparseVector,
    Stopwords,
};
use crate::graph::{AmrGraph, ConceptAction};

use super::LearnerError;

/// How concepts are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConceptMode {
    /// The concept aligned to each span in the gold data.
    Oracle,
    /// The concept most often aligned to the span in training.
    OneBest,
    /// The policy.
    Learned,
}

/// Which prediction a decision belongs to. Indices are span positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Concept(usize),
    Root,
    Relation { source: usize, target: usize },
}

/// One prediction in the decoding sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub stage: Stage,
    /// Surface forms of the candidate actions.
    pub candidates: Vec<String>,
    pub features: Vec<SparseVector>,
    pub chosen: usize,
    /// The oracle's choice, when gold data was supplied.
    pub oracle: Option<usize>,
}

/// Chooses an action at each decision.
pub trait Policy {
    fn choose(&mut self, stage: Stage, features: &[SparseVector], oracle: Option<usize>) -> usize;
}

/// Always takes the oracle action.
#[derive(Clone, Copy, Debug, Default)]
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn choose(&mut self, _: Stage, _: &[SparseVector], oracle: Option<usize>) -> usize {
        oracle.expect("oracle policy needs gold data")
    }
}

/// Frozen data decoding needs.
#[derive(Clone, Copy, Debug)]
pub struct DecodeContext<'a> {
    pub concepts: &'a ConceptTable,
    pub relations: &'a RelationTables,
    pub lexicon: &'a FrameLexicon,
    pub stopwords: &'a Stopwords,
    pub bits: u8,
    pub dep_cutoff: Option<usize>,
}

/// Result of decoding one sentence.
#[derive(Clone, Debug)]
pub struct Decoded {
    /// Possibly disconnected; empty when every span got NULL.
    pub graph: AmrGraph,
    pub spans: Vec<Span>,
    /// Chosen concept per span.
    pub concepts: Vec<ConceptAction>,
    /// Graph variable heading each span's concept.
    pub heads: Vec<Option<String>>,
    /// Edges added for forced pairs, as (source var, target var).
    pub forced_edges: HashSet<(String, String)>,
    pub decisions: Vec<Decision>,
}

impl Decoded {
    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }
}

/// Token-level distances in the undirected dependency tree.
fn token_distances(sentence: &AnnotatedSentence) -> Vec<Vec<usize>> {
    (0..sentence.len()).map(|t| sentence.tree_distances(t)).collect()
}

fn span_distance(d: &[Vec<usize>], a: Span, b: Span) -> usize {
    a.tokens()
        .flat_map(|x| b.tokens().map(move |y| d[x][y]))
        .min()
        .unwrap_or(usize::MAX)
}

/// Ordered pairs (i, j) of positions in `spans` where a token of span i
/// heads a token of span j.
pub fn forced_pairs(sentence: &AnnotatedSentence, spans: &[Span]) -> HashSet<(usize, usize)> {
    let mut owner = vec![None; sentence.len()];
    for (k, s) in spans.iter().enumerate() {
        for t in s.tokens() {
            owner[t] = Some(k);
        }
    }
    let mut out = HashSet::new();
    for d in &sentence.deps {
        if let (Some(h), Some(j)) = (d.head, owner[d.dependent]) {
            if let Some(i) = owner[h] {
                if i != j {
                    out.insert((i, j));
                }
            }
        }
    }
    out
}

/// Unordered pairs (i < j) of positions in `spans` whose closest tokens are
/// more than `cutoff` dependency arcs apart. Pairs joined by a dependency arc
/// are never pruned.
pub fn prune_pairs(sentence: &AnnotatedSentence, spans: &[Span], cutoff: usize) -> HashSet<(usize, usize)> {
    let d = token_distances(sentence);
    let forced = forced_pairs(sentence, spans);
    let mut out = HashSet::new();
    for i in 0..spans.len() {
        for j in i + 1..spans.len() {
            if forced.contains(&(i, j)) || forced.contains(&(j, i)) {
                continue;
            }
            if span_distance(&d, spans[i], spans[j]) > cutoff {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Gold-side view of one example for oracle decisions.
struct Gold<'a> {
    example: &'a CorpusExample,
    /// span -> gold target, for spans of the decoded segmentation
    targets: HashMap<Span, AlignTarget>,
}

impl<'a> Gold<'a> {
    fn new(example: &'a CorpusExample) -> Result<Self, LearnerError> {
        let targets = example.gold_segmentation()?.into_iter().collect();
        Ok(Gold { example, targets })
    }

    fn target(&self, span: Span) -> AlignTarget {
        self.targets.get(&span).cloned().unwrap_or(AlignTarget::Null)
    }

    fn action(&self, span: Span) -> Result<ConceptAction, LearnerError> {
        Ok(self.example.gold_action(&self.target(span))?)
    }

    fn head(&self, span: Span) -> Option<String> {
        self.targets.get(&span).and_then(|t| t.head()).map(str::to_owned)
    }

    fn graph(&self) -> &AmrGraph {
        self.example.gold.as_ref().expect("gold graph")
    }

    fn relation(&self, source: Span, target: Span) -> Option<String> {
        let (s, t) = (self.head(source)?, self.head(target)?);
        self.graph()
            .edges()
            .iter()
            .find(|e| e.source == s && e.target == t)
            .map(|e| e.relation.clone())
    }

    /// Position in `placed` of the gold root, or of the placed concept whose
    /// gold node is nearest to it (ties: leftmost).
    fn root(&self, placed: &[(usize, Span)]) -> usize {
        let g = self.graph();
        let Some(root) = g.root() else { return 0 };
        let dist = g.undirected_distances(root);
        placed
            .iter()
            .enumerate()
            .filter_map(|(k, (_, span))| {
                let d = dist[g.node_index(&self.head(*span)?)?]?;
                Some((d, k))
            })
            .min()
            .map_or(0, |(_, k)| k)
    }
}

/// Adds the nodes of a concept action under fresh variables; returns the
/// head variable, or `None` for NULL.
fn place(graph: &mut AmrGraph, action: &ConceptAction) -> Option<String> {
    match action {
        ConceptAction::Single(l) if l.is_null() => None,
        ConceptAction::Single(l) => {
            let v = graph.fresh_var(l);
            graph.add_node(&v, l.clone()).expect("fresh variable");
            Some(v)
        }
        ConceptAction::Fragment(f) => {
            let fg = f.graph();
            let mut rename = HashMap::new();
            for n in fg.nodes() {
                let v = graph.fresh_var(&n.label);
                graph.add_node(&v, n.label.clone()).expect("fresh variable");
                rename.insert(n.var.clone(), v);
            }
            for e in fg.edges() {
                graph
                    .add_edge(&rename[&e.source], &e.relation, &rename[&e.target])
                    .expect("fragment edge");
            }
            for c in fg.constants() {
                graph
                    .add_constant(&rename[&c.source], &c.relation, &c.value)
                    .expect("fragment constant");
            }
            Some(rename[fg.root().expect("fragment root")].clone())
        }
    }
}

/// Greedy decoding: a concept per span left to right, then the root, then a
/// relation for each ordered concept pair, i ascending, j < i ascending,
/// (i, j) before (j, i).
///
/// Relations into the root are restricted to NO-EDGE; pairs joined by a
/// dependency arc may not take NO-EDGE; pairs too far apart in the
/// dependency tree get no decision at all.
pub fn decode(
    ctx: &DecodeContext,
    sentence: &AnnotatedSentence,
    spans: &[Span],
    mode: ConceptMode,
    policy: &mut dyn Policy,
    gold: Option<&CorpusExample>,
) -> Result<Decoded, LearnerError> {
    let gold = gold.map(Gold::new).transpose()?;
    if mode == ConceptMode::Oracle && gold.is_none() {
        return Err(LearnerError::NeedsGold);
    }
    let fctx = FeatureContext {
        table: ctx.concepts,
        stopwords: ctx.stopwords,
        bits: ctx.bits,
    };
    let mut decisions = Vec::new();
    let mut graph = AmrGraph::new();
    let mut concepts = Vec::with_capacity(spans.len());
    let mut heads = Vec::with_capacity(spans.len());
    let mut previous: Vec<String> = Vec::with_capacity(spans.len());

    for (i, &span) in spans.iter().enumerate() {
        let mut cands = concept_candidates(ctx.concepts, ctx.lexicon, sentence, span);
        let gold_action = gold.as_ref().map(|g| g.action(span)).transpose()?;
        if mode == ConceptMode::Oracle {
            let g = gold_action.as_ref().unwrap();
            if !cands.iter().any(|c| c.surface() == g.surface()) {
                cands.insert(0, g.clone());
            }
        }
        let surfaces: Vec<String> = cands.iter().map(ConceptAction::surface).collect();
        let oracle = gold_action.map(|g| {
            let s = g.surface();
            surfaces
                .iter()
                .position(|c| *c == s)
                .or_else(|| surfaces.iter().position(|c| c == crate::graph::ConceptLabel::NULL_SURFACE))
                .unwrap_or(0)
        });
        let state = ConceptState {
            sentence,
            spans,
            index: i,
            previous: &previous,
        };
        let features: Vec<SparseVector> = cands.iter().map(|a| concept_features(&fctx, &state, a)).collect();
        let chosen = match mode {
            ConceptMode::Oracle => oracle.unwrap(),
            ConceptMode::OneBest => {
                let best = one_best_concept(ctx.concepts, sentence, span).surface();
                surfaces.iter().position(|c| *c == best).unwrap_or(0)
            }
            ConceptMode::Learned => policy.choose(Stage::Concept(i), &features, oracle),
        };
        let action = cands.swap_remove(chosen);
        previous.push(action.surface());
        heads.push(place(&mut graph, &action));
        concepts.push(action);
        decisions.push(Decision {
            stage: Stage::Concept(i),
            candidates: surfaces,
            features,
            chosen,
            oracle,
        });
    }

    // (span position, span) of every concept-bearing span.
    let placed: Vec<(usize, Span)> = heads
        .iter()
        .enumerate()
        .filter(|(_, h)| h.is_some())
        .map(|(k, _)| (k, spans[k]))
        .collect();
    if placed.is_empty() {
        return Ok(Decoded {
            graph,
            spans: spans.to_vec(),
            concepts,
            heads,
            forced_edges: HashSet::new(),
            decisions,
        });
    }
    let label_of = |k: usize| concepts[k].head_label();
    let pc = |p: usize| PlacedConcept {
        index: placed[p].0,
        span: placed[p].1,
        label: label_of(placed[p].0),
    };

    let features: Vec<SparseVector> = (0..placed.len())
        .map(|p| root_features(ctx.bits, sentence, &pc(p)))
        .collect();
    let oracle = gold.as_ref().map(|g| g.root(&placed));
    let root = policy.choose(Stage::Root, &features, oracle);
    let root_var = heads[placed[root].0].clone().unwrap();
    graph.set_root(&root_var).expect("placed root");
    decisions.push(Decision {
        stage: Stage::Root,
        candidates: placed.iter().map(|&(k, _)| concepts[k].surface()).collect(),
        features,
        chosen: root,
        oracle,
    });

    let placed_spans: Vec<Span> = placed.iter().map(|p| p.1).collect();
    let forced: HashSet<(usize, usize)> = forced_pairs(sentence, &placed_spans)
        .into_iter()
        .filter(|&(_, j)| j != root)
        .collect();
    let pruned = match ctx.dep_cutoff {
        Some(c) => prune_pairs(sentence, &placed_spans, c),
        None => HashSet::new(),
    };
    let mut forced_edges = HashSet::new();

    for a in 0..placed.len() {
        for b in 0..a {
            if pruned.contains(&(b, a)) {
                continue;
            }
            for (s, t) in [(a, b), (b, a)] {
                let mut cands = if t == root {
                    vec![RelationAction::NoEdge]
                } else {
                    relation_candidates(ctx.relations, &label_of(placed[s].0).surface(), &label_of(placed[t].0).surface())
                };
                let is_forced = forced.contains(&(s, t));
                if is_forced {
                    cands.retain(|r| !r.is_no_edge());
                    if cands.is_empty() {
                        cands.push(RelationAction::Label(FALLBACK_RELATION.to_owned()));
                    }
                }
                let stage = Stage::Relation {
                    source: placed[s].0,
                    target: placed[t].0,
                };
                let oracle = gold.as_ref().map(|g| {
                    let want = g
                        .relation(placed[s].1, placed[t].1)
                        .map_or(RelationAction::NoEdge, RelationAction::Label);
                    cands
                        .iter()
                        .position(|r| *r == want)
                        .or_else(|| cands.iter().position(RelationAction::is_no_edge))
                        .unwrap_or(0)
                });
                let (ci, cj) = (pc(s), pc(t));
                let features: Vec<SparseVector> = cands
                    .iter()
                    .map(|r| relation_features(ctx.bits, sentence, &ci, &cj, r))
                    .collect();
                let chosen = policy.choose(stage, &features, oracle);
                if let RelationAction::Label(rel) = &cands[chosen] {
                    let sv = heads[placed[s].0].clone().unwrap();
                    let tv = heads[placed[t].0].clone().unwrap();
                    graph.add_edge(&sv, rel, &tv).expect("placed nodes");
                    if is_forced {
                        forced_edges.insert((sv, tv));
                    }
                }
                decisions.push(Decision {
                    stage,
                    candidates: cands.iter().map(|r| r.surface().to_owned()).collect(),
                    features,
                    chosen,
                    oracle,
                });
            }
        }
    }

    Ok(Decoded {
        graph,
        spans: spans.to_vec(),
        concepts,
        heads,
        forced_edges,
        decisions,
    })
}
