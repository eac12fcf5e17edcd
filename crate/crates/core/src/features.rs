//! Hashed sparse features for concept, relation and root decisions.

use std::collections::HashSet;
use std::hash::Hasher;

use fnv::FnvHasher;

use crate::candidates::{one_best_concept, ConceptTable, RelationAction};
use crate::corpus::{AnnotatedSentence, Span};
use crate::graph::{ConceptAction, ConceptLabel};

pub const DEFAULT_HASH_BITS: u8 = 22;

const BOS: &str = "<s>";
const EOS: &str = "</s>";

/// 64-bit FNV-1a.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Feature templates. The discriminant is the namespace byte hashed in
/// front of the feature string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Template {
    WordM2 = 1,
    WordM1,
    WordTok,
    WordSpan,
    WordP1,
    WordP2,
    PosM2,
    PosM1,
    PosTok,
    PosSpan,
    PosP1,
    PosP2,
    Ne,
    Stop,
    Dep,
    BestConcept,
    PrevM2,
    PrevM1,
    Label,
    Frame,
    Sense,
    Ci,
    Cj,
    CiCj,
    WordI,
    WordJ,
    WordIJ,
    PosI,
    PosJ,
    PosIJ,
    DepIJ,
    Dir,
    Relation,
    DepRoot,
}

impl Template {
    fn name(self) -> &'static str {
        use Template::*;
        match self {
            WordM2 => "w-2",
            WordM1 => "w-1",
            WordTok => "w",
            WordSpan => "ws",
            WordP1 => "w+1",
            WordP2 => "w+2",
            PosM2 => "p-2",
            PosM1 => "p-1",
            PosTok => "p",
            PosSpan => "ps",
            PosP1 => "p+1",
            PosP2 => "p+2",
            Ne => "ne",
            Stop => "stop",
            Dep => "dep",
            BestConcept => "bc",
            PrevM2 => "c-2",
            PrevM1 => "c-1",
            Label => "c",
            Frame => "frame",
            Sense => "sense",
            Ci => "ci",
            Cj => "cj",
            CiCj => "ci^cj",
            WordI => "wi",
            WordJ => "wj",
            WordIJ => "wi^wj",
            PosI => "pi",
            PosJ => "pj",
            PosIJ => "pi^pj",
            DepIJ => "depij",
            Dir => "dir",
            Relation => "r",
            DepRoot => "is_dep_root",
        }
    }

    /// Templates that describe the action itself rather than the state.
    pub fn is_label(self) -> bool {
        matches!(self, Template::Label | Template::Frame | Template::Sense | Template::Relation)
    }
}

/// A named feature before hashing.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RawFeature {
    Plain(Template, String),
    /// A state feature conjoined with the action label.
    Conj(Template, String, String),
}

impl RawFeature {
    fn plain(t: Template, v: impl Into<String>) -> Self {
        RawFeature::Plain(t, v.into())
    }

    pub fn template(&self) -> Template {
        match self {
            RawFeature::Plain(t, _) | RawFeature::Conj(t, _, _) => *t,
        }
    }

    pub fn is_conjunction(&self) -> bool {
        matches!(self, RawFeature::Conj(..))
    }

    fn key(&self) -> Vec<u8> {
        match self {
            RawFeature::Plain(t, v) => {
                let mut k = vec![*t as u8];
                k.extend_from_slice(format!("{}={}", t.name(), v).as_bytes());
                k
            }
            RawFeature::Conj(t, v, label) => {
                let mut k = vec![0x80 | *t as u8];
                k.extend_from_slice(format!("{}={}^{}", t.name(), v, label).as_bytes());
                k
            }
        }
    }

    pub fn index(&self, bits: u8) -> u32 {
        (stable_hash(&self.key()) & ((1u64 << bits) - 1)) as u32
    }
}

/// Sorted, deduplicated hashed feature vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    bits: u8,
    entries: Vec<(u32, f32)>,
}

impl SparseVector {
    pub fn from_raw(bits: u8, raw: &[RawFeature]) -> Self {
        let mut entries: Vec<(u32, f32)> = raw.iter().map(|f| (f.index(bits), 1.0)).collect();
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(u32, f32)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        SparseVector { bits, entries: merged }
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn entries(&self) -> &[(u32, f32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| f64::from(v) * f64::from(v)).sum()
    }
}

/// Lowercased stopword list.
#[derive(Clone, Debug, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub const BUNDLED: &'static str = include_str!("../data/stopwords.txt");

    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn bundled() -> Self {
        Self::parse(Self::BUNDLED)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(&word.to_lowercase())
    }
}

/// Everything feature extraction needs besides the state.
#[derive(Clone, Copy, Debug)]
pub struct FeatureContext<'a> {
    pub table: &'a ConceptTable,
    pub stopwords: &'a Stopwords,
    pub bits: u8,
}

/// Concept decision state: span `index` of `spans`, with the concepts
/// already predicted for the spans before it.
#[derive(Clone, Copy, Debug)]
pub struct ConceptState<'a> {
    pub sentence: &'a AnnotatedSentence,
    pub spans: &'a [Span],
    pub index: usize,
    /// Surfaces of the predictions for spans `0..index`.
    pub previous: &'a [String],
}

fn span_pos(sentence: &AnnotatedSentence, span: Span) -> String {
    sentence.tokens[span.tokens()]
        .iter()
        .map(|t| t.pos.as_str())
        .collect::<Vec<_>>()
        .join("_")
}

fn push_words(out: &mut Vec<RawFeature>, tok: Template, joined: Template, s: &AnnotatedSentence, span: Span) {
    for t in &s.tokens[span.tokens()] {
        out.push(RawFeature::plain(tok, t.form.to_lowercase()));
    }
    out.push(RawFeature::plain(joined, s.span_key(span)));
}

fn push_label(out: &mut Vec<RawFeature>, label: &ConceptLabel, surface: &str) {
    out.push(RawFeature::plain(Template::Label, surface));
    if let Some((frame, sense)) = label.frame_sense() {
        out.push(RawFeature::plain(Template::Frame, frame));
        out.push(RawFeature::plain(Template::Sense, sense));
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Named features for a concept decision (see [`concept_features`]).
pub fn concept_raw_features(ctx: &FeatureContext, state: &ConceptState, action: &ConceptAction) -> Vec<RawFeature> {
    use Template::*;
    let s = state.sentence;
    let i = state.index;
    let span = state.spans[i];
    debug_assert_eq!(state.previous.len(), i);
    let n = state.spans.len() as isize;
    let at = |off: isize| -> Option<Span> {
        let k = i as isize + off;
        (0..n).contains(&k).then(|| state.spans[k as usize])
    };
    let sentinel = |off: isize| if off < 0 { BOS } else { EOS };

    let mut out = Vec::with_capacity(48);
    for (off, wt, pt) in [(-2, WordM2, PosM2), (-1, WordM1, PosM1), (1, WordP1, PosP1), (2, WordP2, PosP2)] {
        match at(off) {
            Some(sp) => {
                out.push(RawFeature::plain(wt, s.span_key(sp)));
                out.push(RawFeature::plain(pt, span_pos(s, sp)));
            }
            None => {
                out.push(RawFeature::plain(wt, sentinel(off)));
                out.push(RawFeature::plain(pt, sentinel(off)));
            }
        }
    }
    push_words(&mut out, WordTok, WordSpan, s, span);
    for t in &s.tokens[span.tokens()] {
        out.push(RawFeature::plain(PosTok, t.pos.as_str()));
    }
    out.push(RawFeature::plain(PosSpan, span_pos(s, span)));
    for t in &s.tokens[span.tokens()] {
        out.push(RawFeature::plain(Ne, t.ne.as_str()));
    }
    let stop = s.tokens[span.tokens()]
        .iter()
        .all(|t| ctx.stopwords.contains(&t.form));
    out.push(RawFeature::plain(Stop, yes_no(stop)));
    for d in &s.deps {
        if d.head.is_some_and(|h| span.tokens().contains(&h)) {
            out.push(RawFeature::plain(Dep, d.label.as_str()));
        }
    }
    let surface = action.surface();
    let best = one_best_concept(ctx.table, s, span).surface() == surface;
    out.push(RawFeature::plain(BestConcept, yes_no(best)));
    let prev = |k: usize| {
        if i >= k {
            state.previous[i - k].clone()
        } else {
            BOS.to_owned()
        }
    };
    out.push(RawFeature::plain(PrevM2, prev(2)));
    out.push(RawFeature::plain(PrevM1, prev(1)));

    let conj: Vec<RawFeature> = out
        .iter()
        .map(|f| match f {
            RawFeature::Plain(t, v) => RawFeature::Conj(*t, v.clone(), surface.clone()),
            RawFeature::Conj(..) => unreachable!(),
        })
        .collect();
    push_label(&mut out, action.head_label(), &surface);
    out.extend(conj);
    out
}

/// Feature vector for choosing `action` at a concept decision.
pub fn concept_features(ctx: &FeatureContext, state: &ConceptState, action: &ConceptAction) -> SparseVector {
    SparseVector::from_raw(ctx.bits, &concept_raw_features(ctx, state, action))
}

/// A predicted concept together with the span index it came from.
#[derive(Clone, Copy, Debug)]
pub struct PlacedConcept<'a> {
    pub index: usize,
    pub span: Span,
    pub label: &'a ConceptLabel,
}

/// Named features for a relation decision from `ci` to `cj`.
pub fn relation_raw_features(
    sentence: &AnnotatedSentence,
    ci: &PlacedConcept,
    cj: &PlacedConcept,
    action: &RelationAction,
) -> Vec<RawFeature> {
    use Template::*;
    let s = sentence;
    let (li, lj) = (ci.label.surface(), cj.label.surface());
    let (wi, wj) = (s.span_key(ci.span), s.span_key(cj.span));
    let (pi, pj) = (span_pos(s, ci.span), span_pos(s, cj.span));
    let mut out = Vec::with_capacity(40);
    out.push(RawFeature::plain(Ci, li.clone()));
    out.push(RawFeature::plain(Cj, lj.clone()));
    out.push(RawFeature::plain(CiCj, format!("{}|{}", li, lj)));
    push_words(&mut out, WordI, WordI, s, ci.span);
    push_words(&mut out, WordJ, WordJ, s, cj.span);
    out.push(RawFeature::plain(WordIJ, format!("{}|{}", wi, wj)));
    out.push(RawFeature::plain(PosI, pi.clone()));
    out.push(RawFeature::plain(PosJ, pj.clone()));
    out.push(RawFeature::plain(PosIJ, format!("{}|{}", pi, pj)));
    for d in &s.deps {
        if d.head.is_some_and(|h| ci.span.tokens().contains(&h)) && cj.span.tokens().contains(&d.dependent) {
            out.push(RawFeature::plain(DepIJ, d.label.as_str()));
        }
    }
    out.push(RawFeature::plain(Dir, yes_no(ci.index < cj.index)));

    let r = action.surface().to_owned();
    let conj: Vec<RawFeature> = out
        .iter()
        .map(|f| match f {
            RawFeature::Plain(t, v) => RawFeature::Conj(*t, v.clone(), r.clone()),
            RawFeature::Conj(..) => unreachable!(),
        })
        .collect();
    out.push(RawFeature::plain(Relation, r));
    out.extend(conj);
    out
}

/// Feature vector for labelling the pair (`ci` -> `cj`) with `action`.
pub fn relation_features(
    bits: u8,
    sentence: &AnnotatedSentence,
    ci: &PlacedConcept,
    cj: &PlacedConcept,
    action: &RelationAction,
) -> SparseVector {
    SparseVector::from_raw(bits, &relation_raw_features(sentence, ci, cj, action))
}

/// Named features for choosing `c` as the root.
pub fn root_raw_features(sentence: &AnnotatedSentence, c: &PlacedConcept) -> Vec<RawFeature> {
    use Template::*;
    let s = sentence;
    let mut out = Vec::with_capacity(12);
    push_label(&mut out, c.label, &c.label.surface());
    push_words(&mut out, WordTok, WordSpan, s, c.span);
    for t in &s.tokens[c.span.tokens()] {
        out.push(RawFeature::plain(PosTok, t.pos.as_str()));
    }
    let is_root = s.dep_root().is_some_and(|r| c.span.tokens().contains(&r));
    out.push(RawFeature::plain(DepRoot, yes_no(is_root)));
    out
}

pub fn root_features(bits: u8, sentence: &AnnotatedSentence, c: &PlacedConcept) -> SparseVector {
    SparseVector::from_raw(bits, &root_raw_features(sentence, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::build_tables;
    use crate::corpus::tests::book_sentence;
    use proptest::prelude::*;

    fn has(raw: &[RawFeature], t: Template, v: &str) -> bool {
        raw.contains(&RawFeature::Plain(t, v.to_owned()))
    }

    fn has_conj(raw: &[RawFeature], t: Template, v: &str, label: &str) -> bool {
        raw.contains(&RawFeature::Conj(t, v.to_owned(), label.to_owned()))
    }

    #[test]
    fn frame_action_splits_frame_and_sense() {
        let ex = book_sentence();
        let (table, _) = build_tables(std::slice::from_ref(&ex)).unwrap();
        let stop = Stopwords::bundled();
        let ctx = FeatureContext { table: &table, stopwords: &stop, bits: 22 };
        let spans: Vec<Span> = (0..ex.sentence.len()).map(Span::single).collect();
        let prev = vec!["i".to_string()];
        let st = ConceptState { sentence: &ex.sentence, spans: &spans, index: 1, previous: &prev };
        let action = ConceptAction::Single(ConceptLabel::parse("read-01"));
        let raw = concept_raw_features(&ctx, &st, &action);
        assert!(has(&raw, Template::Frame, "read"));
        assert!(has(&raw, Template::Sense, "01"));
        assert!(has_conj(&raw, Template::WordTok, "read", "read-01"));
        assert!(has(&raw, Template::PrevM1, "i"));
        assert!(has(&raw, Template::PrevM2, BOS));
        assert!(has(&raw, Template::BestConcept, "1"));
    }

    #[test]
    fn first_span_uses_sentinels() {
        let ex = book_sentence();
        let table = ConceptTable::default();
        let stop = Stopwords::bundled();
        let ctx = FeatureContext { table: &table, stopwords: &stop, bits: 22 };
        let spans: Vec<Span> = (0..ex.sentence.len()).map(Span::single).collect();
        let st = ConceptState { sentence: &ex.sentence, spans: &spans, index: 0, previous: &[] };
        let raw = concept_raw_features(&ctx, &st, &ConceptAction::null());
        assert!(has(&raw, Template::PrevM1, BOS));
        assert!(has(&raw, Template::PrevM2, BOS));
        assert!(has(&raw, Template::WordM1, BOS));
        assert!(has(&raw, Template::PosM2, BOS));
    }

    #[test]
    fn null_on_stopword_conjoins_indicator() {
        let ex = book_sentence();
        let (table, _) = build_tables(std::slice::from_ref(&ex)).unwrap();
        let stop = Stopwords::bundled();
        let ctx = FeatureContext { table: &table, stopwords: &stop, bits: 22 };
        let spans: Vec<Span> = (0..ex.sentence.len()).map(Span::single).collect();
        let prev = vec!["i".to_string(), "read-01".to_string()];
        // Token 2 is "a".
        let st = ConceptState { sentence: &ex.sentence, spans: &spans, index: 2, previous: &prev };
        let raw = concept_raw_features(&ctx, &st, &ConceptAction::null());
        assert!(has(&raw, Template::Stop, "1"));
        assert!(has_conj(&raw, Template::Stop, "1", "NULL"));
    }

    #[test]
    fn relation_direction_and_conjunctions() {
        let ex = book_sentence();
        let read = ConceptLabel::parse("read-01");
        let i = ConceptLabel::parse("i");
        let ci = PlacedConcept { index: 2, span: Span::single(1), label: &read };
        let cj = PlacedConcept { index: 1, span: Span::single(0), label: &i };
        let r = RelationAction::Label("ARG0".into());
        let raw = relation_raw_features(&ex.sentence, &ci, &cj, &r);
        assert!(has(&raw, Template::Dir, "0"));
        assert!(has_conj(&raw, Template::CiCj, "read-01|i", "ARG0"));
        // "read" governs "I" in the fixture tree.
        assert!(raw.iter().any(|f| f.template() == Template::DepIJ));
        let raw = relation_raw_features(&ex.sentence, &cj, &ci, &RelationAction::NoEdge);
        assert!(!raw.iter().any(|f| f.template() == Template::DepIJ));
        assert!(has(&raw, Template::Relation, "NO-EDGE"));
        assert!(has_conj(&raw, Template::Dir, "1", "NO-EDGE"));
    }

    #[test]
    fn root_features_flag_dependency_root() {
        let ex = book_sentence();
        let read = ConceptLabel::parse("read-01");
        let book = ConceptLabel::parse("book");
        let root = ex.sentence.dep_root().unwrap();
        let c = PlacedConcept { index: 1, span: Span::single(root), label: &read };
        let raw = root_raw_features(&ex.sentence, &c);
        assert!(has(&raw, Template::DepRoot, "1"));
        assert!(has(&raw, Template::Frame, "read"));
        let c = PlacedConcept { index: 3, span: Span::single(3), label: &book };
        assert!(has(&root_raw_features(&ex.sentence, &c), Template::DepRoot, "0"));
        let call = ConceptLabel::parse("call-01");
        let c = PlacedConcept { index: 5, span: Span::single(5), label: &call };
        let raw = root_raw_features(&ex.sentence, &c);
        assert!(has(&raw, Template::Frame, "call") && has(&raw, Template::Sense, "01"));
    }

    #[test]
    fn sparse_vector_merges_duplicates() {
        let raw = vec![
            RawFeature::plain(Template::WordTok, "x"),
            RawFeature::plain(Template::WordTok, "x"),
            RawFeature::plain(Template::WordSpan, "x"),
        ];
        let v = SparseVector::from_raw(22, &raw);
        assert_eq!(v.len(), 2);
        assert_eq!(v.entries().iter().map(|e| e.1).sum::<f32>(), 3.0);
        assert!(v.entries().windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn namespaces_separate_identical_values() {
        let a = RawFeature::plain(Template::WordM1, "x").index(22);
        let b = RawFeature::plain(Template::WordP1, "x").index(22);
        assert_ne!(a, b);
    }

    proptest! {
        #[test]
        fn conjunctions_match_state_features(idx in 0usize..14, label in "[a-z]{1,6}(-0[1-9])?", bits in 4u8..24) {
            let ex = book_sentence();
            let table = ConceptTable::default();
            let stop = Stopwords::bundled();
            let ctx = FeatureContext { table: &table, stopwords: &stop, bits };
            let spans: Vec<Span> = (0..ex.sentence.len()).map(Span::single).collect();
            let prev: Vec<String> = (0..idx).map(|k| format!("c{}", k)).collect();
            let st = ConceptState { sentence: &ex.sentence, spans: &spans, index: idx, previous: &prev };
            let action = ConceptAction::Single(ConceptLabel::parse(&label));
            let raw = concept_raw_features(&ctx, &st, &action);
            let conj = raw.iter().filter(|f| f.is_conjunction()).count();
            let state = raw.iter().filter(|f| !f.is_conjunction() && !f.template().is_label()).count();
            prop_assert_eq!(conj, state);
            let v = concept_features(&ctx, &st, &action);
            prop_assert_eq!(&v, &concept_features(&ctx, &st, &action));
            prop_assert!(v.entries().iter().all(|e| u64::from(e.0) < (1u64 << bits)));
            prop_assert!(v.entries().windows(2).all(|w| w[0].0 < w[1].0));
        }
    }
}
