//! Smatch and concept precision/recall.

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusError, CorpusExample, Span};
use crate::graph::AmrGraph;

/// Largest smaller-side variable count [`smatch_exhaustive`] accepts.
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Roles whose `-of` suffix is part of the name, not an inversion.
const NON_INVERTED: [&str; 3] = ["consist-of", "prep-out-of", "prep-on-behalf-of"];

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("exhaustive Smatch limited to {EXHAUSTIVE_LIMIT} variables on the smaller side, got {0}")]
    TooLarge(usize),
    #[error("{id}: {predicted} predicted concepts for {spans} spans")]
    Segmentation { id: String, predicted: usize, spans: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Precision, recall and F1 with the counts behind them.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl EvalReport {
    /// Scores from counts; an empty side scores 0.
    pub fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (p, r) = (ratio(matched, predicted), ratio(matched, gold));
        EvalReport {
            precision: p,
            recall: r,
            f1: if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) },
            matched,
            predicted,
            gold,
        }
    }

    /// Scores from counts summed over `reports`.
    pub fn micro(reports: &[EvalReport]) -> Self {
        let sum = |f: fn(&EvalReport) -> usize| reports.iter().map(f).sum();
        Self::from_counts(sum(|r| r.matched), sum(|r| r.predicted), sum(|r| r.gold))
    }

    /// Mean precision, recall and F1, with summed counts.
    pub fn macro_average(reports: &[EvalReport]) -> Self {
        let n = reports.len().max(1) as f64;
        let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        EvalReport {
            precision: mean(|r| r.precision),
            recall: mean(|r| r.recall),
            f1: mean(|r| r.f1),
            ..Self::micro(reports)
        }
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(
            f,
            "{:.4} {:.4} {:.4} {} {} {}",
            self.precision, self.recall, self.f1, self.matched, self.predicted, self.gold
        )
    }
}

/// A graph as Smatch triples over variable indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripleSet {
    pub vars: Vec<String>,
    /// (variable, concept)
    pub instances: Vec<(usize, String)>,
    /// (relation, source, target), with `-of` roles turned around.
    pub relations: Vec<(String, usize, usize)>,
    /// (relation, variable, value), including ("TOP", root, "top").
    pub attributes: Vec<(String, usize, String)>,
}

impl TripleSet {
    pub fn from_graph(g: &AmrGraph) -> Self {
        let vars: Vec<String> = g.nodes().iter().map(|n| n.var.clone()).collect();
        let idx = |v: &str| g.node_index(v).unwrap();
        let instances = g
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| (i, n.label.surface()))
            .collect();
        let relations = g
            .edges()
            .iter()
            .map(|e| {
                let (s, t) = (idx(&e.source), idx(&e.target));
                match e.relation.strip_suffix("-of") {
                    Some(base) if !NON_INVERTED.contains(&e.relation.as_str()) => (base.to_owned(), t, s),
                    _ => (e.relation.clone(), s, t),
                }
            })
            .collect();
        let mut attributes: Vec<(String, usize, String)> = Vec::new();
        if let Some(r) = g.root() {
            attributes.push(("TOP".into(), idx(r), "top".into()));
        }
        for c in g.constants() {
            let v = c.value.trim_matches('"').to_owned();
            attributes.push((c.relation.clone(), idx(&c.source), v));
        }
        TripleSet {
            vars,
            instances,
            relations,
            attributes,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len() + self.relations.len() + self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn multiset_overlap<K: std::hash::Hash + Eq>(a: impl Iterator<Item = K>, b: impl Iterator<Item = K>) -> usize {
    let mut counts: HashMap<K, isize> = HashMap::new();
    for k in a {
        *counts.entry(k).or_insert(0) += 1;
    }
    let mut m = 0;
    for k in b {
        if let Some(c) = counts.get_mut(&k) {
            if *c > 0 {
                *c -= 1;
                m += 1;
            }
        }
    }
    m
}

/// Precomputed scoring tables for one (pred, gold) pair.
struct Scorer {
    /// unary[i][j]: instance and attribute triples of pred var i that match
    /// gold var j.
    unary: Vec<Vec<usize>>,
    pred_rel: Vec<(usize, usize, usize)>,
    gold_rel: Vec<(usize, usize, usize)>,
    n_gold: usize,
}

impl Scorer {
    fn new(p: &TripleSet, g: &TripleSet) -> Self {
        let mut rel_ids: HashMap<String, usize> = HashMap::new();
        let mut rid = |r: &String| {
            let n = rel_ids.len();
            *rel_ids.entry(r.clone()).or_insert(n)
        };
        let pred_rel = p.relations.iter().map(|(r, s, t)| (rid(r), *s, *t)).collect();
        let gold_rel = g.relations.iter().map(|(r, s, t)| (rid(r), *s, *t)).collect();
        let unary_of = |t: &TripleSet, v: usize| -> Vec<(String, String)> {
            let mut u: Vec<(String, String)> = t
                .instances
                .iter()
                .filter(|x| x.0 == v)
                .map(|x| ("instance".to_owned(), x.1.clone()))
                .collect();
            u.extend(t.attributes.iter().filter(|x| x.1 == v).map(|x| (x.0.clone(), x.2.clone())));
            u
        };
        let gu: Vec<Vec<(String, String)>> = (0..g.vars.len()).map(|j| unary_of(g, j)).collect();
        let unary = (0..p.vars.len())
            .map(|i| {
                let pu = unary_of(p, i);
                gu.iter()
                    .map(|gj| multiset_overlap(pu.iter(), gj.iter()))
                    .collect()
            })
            .collect();
        Scorer {
            unary,
            pred_rel,
            gold_rel,
            n_gold: g.vars.len(),
        }
    }

    fn score(&self, map: &[Option<usize>]) -> usize {
        let unary: usize = map
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.map(|j| self.unary[i][j]))
            .sum();
        let mapped = self
            .pred_rel
            .iter()
            .filter_map(|&(r, s, t)| Some((r, map[s]?, map[t]?)));
        unary + multiset_overlap(mapped, self.gold_rel.iter().copied())
    }

    /// Best-improvement hill climbing over reassignments and swaps.
    fn climb(&self, map: &mut [Option<usize>]) -> usize {
        let mut best = self.score(map);
        loop {
            let mut used = vec![false; self.n_gold];
            for j in map.iter().flatten() {
                used[*j] = true;
            }
            let mut top: Option<(usize, Vec<Option<usize>>)> = None;
            let consider = |cand: Vec<Option<usize>>, top: &mut Option<(usize, Vec<Option<usize>>)>| {
                let s = self.score(&cand);
                if s > top.as_ref().map_or(best, |t| t.0) {
                    *top = Some((s, cand));
                }
            };
            for i in 0..map.len() {
                for j in (0..self.n_gold).filter(|&j| !used[j]) {
                    let mut c = map.to_vec();
                    c[i] = Some(j);
                    consider(c, &mut top);
                }
                if map[i].is_some() {
                    let mut c = map.to_vec();
                    c[i] = None;
                    consider(c, &mut top);
                }
                for k in i + 1..map.len() {
                    if map[i] != map[k] {
                        let mut c = map.to_vec();
                        c.swap(i, k);
                        consider(c, &mut top);
                    }
                }
            }
            match top {
                Some((s, c)) => {
                    best = s;
                    map.copy_from_slice(&c);
                }
                None => return best,
            }
        }
    }
}

/// Start mapping that pairs variables with equal concepts, left to right.
fn label_start(p: &TripleSet, g: &TripleSet) -> Vec<Option<usize>> {
    let mut used = vec![false; g.vars.len()];
    p.instances
        .iter()
        .map(|(_, label)| {
            let j = g
                .instances
                .iter()
                .find(|(j, l)| !used[*j] && l == label)
                .map(|(j, _)| *j)?;
            used[j] = true;
            Some(j)
        })
        .collect()
}

fn random_start(n_pred: usize, n_gold: usize, rng: &mut ChaCha8Rng) -> Vec<Option<usize>> {
    let mut slots: Vec<Option<usize>> = (0..n_gold).map(Some).collect();
    slots.extend(std::iter::repeat_n(None, n_pred.saturating_sub(n_gold)));
    slots.shuffle(rng);
    slots.truncate(n_pred);
    slots
}

/// Smatch by hill climbing from a concept-matching start plus `restarts`
/// random starts.
pub fn smatch(pred: &AmrGraph, gold: &AmrGraph, restarts: usize, seed: u64) -> EvalReport {
    let (p, g) = (TripleSet::from_graph(pred), TripleSet::from_graph(gold));
    let scorer = Scorer::new(&p, &g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = label_start(&p, &g);
    let mut best = scorer.climb(&mut map);
    for _ in 0..restarts {
        let mut map = random_start(p.vars.len(), g.vars.len(), &mut rng);
        best = best.max(scorer.climb(&mut map));
    }
    EvalReport::from_counts(best, p.len(), g.len())
}

/// Triples of `p` under `map` that also occur in `g`, counted directly.
fn direct_count(p: &TripleSet, g: &TripleSet, map: &[Option<usize>]) -> usize {
    let inst = p
        .instances
        .iter()
        .filter_map(|(v, l)| Some(("instance".to_owned(), map[*v]?, usize::MAX, l.clone())));
    let rel = p
        .relations
        .iter()
        .filter_map(|(r, s, t)| Some((r.clone(), map[*s]?, map[*t]?, String::new())));
    let attr = p
        .attributes
        .iter()
        .filter_map(|(r, v, x)| Some((r.clone(), map[*v]?, usize::MAX, x.clone())));
    let gold = g
        .instances
        .iter()
        .map(|(v, l)| ("instance".to_owned(), *v, usize::MAX, l.clone()))
        .chain(g.relations.iter().map(|(r, s, t)| (r.clone(), *s, *t, String::new())))
        .chain(g.attributes.iter().map(|(r, v, x)| (r.clone(), *v, usize::MAX, x.clone())));
    multiset_overlap(inst.chain(rel).chain(attr), gold)
}

/// All injections of `0..k` into `0..n`.
fn for_each_injection(k: usize, n: usize, f: &mut dyn FnMut(&[usize])) {
    fn go(cur: &mut Vec<usize>, used: &mut [bool], k: usize, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                go(cur, used, k, f);
                cur.pop();
                used[j] = false;
            }
        }
    }
    go(&mut Vec::with_capacity(k), &mut vec![false; n], k, f);
}

/// Exact Smatch by enumerating every injective mapping of the smaller
/// graph's variables.
pub fn smatch_exhaustive(pred: &AmrGraph, gold: &AmrGraph) -> Result<EvalReport, EvalError> {
    let (p, g) = (TripleSet::from_graph(pred), TripleSet::from_graph(gold));
    let (np, ng) = (p.vars.len(), g.vars.len());
    if np.min(ng) > EXHAUSTIVE_LIMIT {
        return Err(EvalError::TooLarge(np.min(ng)));
    }
    let mut best = 0;
    if np <= ng {
        for_each_injection(np, ng, &mut |inj| {
            let map: Vec<Option<usize>> = inj.iter().map(|&j| Some(j)).collect();
            best = best.max(direct_count(&p, &g, &map));
        });
    } else {
        for_each_injection(ng, np, &mut |inj| {
            let mut map = vec![None; np];
            for (j, &i) in inj.iter().enumerate() {
                map[i] = Some(j);
            }
            best = best.max(direct_count(&p, &g, &map));
        });
    }
    Ok(EvalReport::from_counts(best, p.len(), g.len()))
}

/// Concept precision and recall over an induced segmentation. The gold
/// concept of a span is whatever the alignment puts on exactly that span,
/// NULL otherwise; NULL predictions and NULL gold concepts are not counted.
pub fn concept_eval(spans: &[Span], predicted: &[String], gold: &CorpusExample) -> Result<EvalReport, EvalError> {
    if spans.len() != predicted.len() || !gold.sentence.is_partition(spans) {
        return Err(EvalError::Segmentation {
            id: gold.id.clone(),
            predicted: predicted.len(),
            spans: spans.len(),
        });
    }
    let null = crate::graph::ConceptLabel::NULL_SURFACE;
    let (mut matched, mut n_pred, mut n_gold) = (0, 0, 0);
    for (span, p) in spans.iter().zip(predicted) {
        let g = match gold.alignment.target_of(*span) {
            Some(t) => gold.gold_action(t)?.surface(),
            None => null.to_owned(),
        };
        n_pred += usize::from(p != null);
        n_gold += usize::from(g != null);
        matched += usize::from(p != null && *p == g);
    }
    Ok(EvalReport::from_counts(matched, n_pred, n_gold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::book_sentence;
    use crate::graph::parse_penman;

    fn g(s: &str) -> AmrGraph {
        parse_penman(s).unwrap()
    }

    #[test]
    fn identical_graphs_score_one() {
        let a = g("(r / read-01 :ARG0 (i / i) :ARG1 (b / book :mod (r2 / red)))");
        let rep = smatch(&a, &a, 4, 1);
        assert_eq!((rep.precision, rep.recall, rep.f1), (1.0, 1.0, 1.0));
        assert_eq!(smatch_exhaustive(&a, &a).unwrap().f1, 1.0);
        let one = g("(x / thing)");
        assert_eq!(smatch_exhaustive(&one, &one).unwrap().f1, 1.0);
    }

    #[test]
    fn worked_pair() {
        let p = g("(r / read-01 :ARG0 (i / i))");
        let q = g("(r / read-01 :ARG0 (i / i) :ARG1 (b / book))");
        for rep in [smatch(&p, &q, 4, 0), smatch_exhaustive(&p, &q).unwrap()] {
            assert_eq!((rep.matched, rep.predicted, rep.gold), (4, 4, 6));
            assert_eq!(rep.precision, 1.0);
            assert!((rep.recall - 2.0 / 3.0).abs() < 1e-12);
            assert!((rep.f1 - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_roles_and_quoted_constants_normalise() {
        let a = g("(b / boy :ARG0-of (g / go-01) :name (n / name :op1 \"Al\"))");
        let b = g("(b / boy :name (n / name :op1 \"Al\") :ARG0-of (g / go-01))");
        let q1 = g("(b / boy :quant 3)");
        let q2 = g("(b / boy :quant \"3\")");
        assert_eq!(smatch_exhaustive(&q1, &q2).unwrap().f1, 1.0);
        assert_eq!(smatch_exhaustive(&a, &b).unwrap().f1, 1.0);
        let t = TripleSet::from_graph(&a);
        assert!(t.relations.contains(&("ARG0".into(), 1, 0)));
        let c = g("(x / x :consist-of (y / y))");
        assert_eq!(TripleSet::from_graph(&c).relations[0].0, "consist-of");
    }

    #[test]
    fn disjoint_labels_only_match_structure() {
        let a = g("(a / alpha :r (b / beta))");
        let b = g("(x / gamma :r (y / delta))");
        let rep = smatch_exhaustive(&a, &b).unwrap();
        // TOP and the relation still line up.
        assert_eq!(rep.matched, 2);
        assert_eq!(smatch(&a, &b, 4, 3).matched, 2);
    }

    #[test]
    fn exhaustive_size_limit() {
        let big = |n: usize| {
            let mut s = String::from("(v0 / c");
            for i in 1..n {
                s.push_str(&format!(" :r (v{} / c)", i));
            }
            s.push(')');
            g(&s)
        };
        assert!(matches!(smatch_exhaustive(&big(9), &big(9)), Err(EvalError::TooLarge(9))));
        assert!(smatch_exhaustive(&big(3), &big(9)).is_ok());
    }

    #[test]
    fn report_conventions() {
        let r = EvalReport::from_counts(0, 0, 5);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let a = EvalReport::from_counts(1, 1, 1);
        let b = EvalReport::from_counts(0, 1, 3);
        let m = EvalReport::micro(&[a, b]);
        assert_eq!((m.matched, m.predicted, m.gold), (1, 2, 4));
        assert_eq!(EvalReport::macro_average(&[a, b]).precision, 0.5);
    }

    #[test]
    fn concept_scores() {
        let ex = book_sentence();
        let spans = crate::corpus::gold_spans_from_alignment(&ex).unwrap();
        let gold: Vec<String> = spans
            .iter()
            .map(|s| match ex.alignment.target_of(*s) {
                Some(t) => ex.gold_action(t).unwrap().surface(),
                None => "NULL".into(),
            })
            .collect();
        let r = concept_eval(&spans, &gold, &ex).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));

        let nulls = vec!["NULL".to_string(); spans.len()];
        let r = concept_eval(&spans, &nulls, &ex).unwrap();
        assert_eq!((r.precision, r.recall, r.gold), (0.0, 0.0, 5));

        assert!(concept_eval(&spans[1..], &gold[1..], &ex).is_err());
        assert!(concept_eval(&spans, &gold[1..], &ex).is_err());
    }

    fn toy_example() -> CorpusExample {
        use crate::corpus::tests::tok;
        use crate::corpus::{AlignTarget, Alignment, AnnotatedSentence, DepEdge};
        let words = ["a", "b", "c", "d"];
        let tokens = words.iter().map(|w| tok(w, w, "NN", "O")).collect();
        let deps = (0..4)
            .map(|i| DepEdge { head: if i == 0 { None } else { Some(0) }, dependent: i, label: "dep".into() })
            .collect();
        CorpusExample {
            id: "toy".into(),
            text: "a b c d".into(),
            sentence: AnnotatedSentence::new(tokens, deps).unwrap(),
            gold: Some(g("(a / a :r (b / b) :s (c / c))")),
            alignment: Alignment {
                pairs: ["a", "b", "c"]
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (Span::single(i), AlignTarget::Node(v.to_string())))
                    .collect(),
            },
        }
    }

    #[test]
    fn concept_scores_hand_counted() {
        // Three-token toy: gold {a, b, c}; predicted {a, b, x} plus one
        // spurious concept on a NULL span.
        let ex = toy_example();
        let spans: Vec<Span> = (0..4).map(Span::single).collect();
        let pred: Vec<String> = ["a", "b", "x", "y"].iter().map(|s| s.to_string()).collect();
        let r = concept_eval(&spans, &pred, &ex).unwrap();
        assert_eq!((r.matched, r.predicted, r.gold), (2, 4, 3));
        let pred: Vec<String> = ["a", "b", "x", "NULL"].iter().map(|s| s.to_string()).collect();
        let r = concept_eval(&spans, &pred, &ex).unwrap();
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12 && (r.recall - 2.0 / 3.0).abs() < 1e-12);
    }
}
