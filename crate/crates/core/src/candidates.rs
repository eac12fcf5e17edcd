//! Candidate action lists for concept and relation prediction, mined from
//! the training corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Read, Write};

use crate::binio::*;
use crate::corpus::{AnnotatedSentence, CorpusError, CorpusExample, Span};
use crate::graph::{parse_penman, serialize_penman, ConceptAction, ConceptLabel, GraphFragment};

/// Relation label used when no relation is in the candidate list.
pub const FALLBACK_RELATION: &str = "mod";

/// A relation prediction action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationAction {
    Label(String),
    NoEdge,
}

impl RelationAction {
    pub fn surface(&self) -> &str {
        match self {
            RelationAction::Label(l) => l,
            RelationAction::NoEdge => "NO-EDGE",
        }
    }

    pub fn is_no_edge(&self) -> bool {
        matches!(self, RelationAction::NoEdge)
    }
}

impl fmt::Display for RelationAction {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.surface())
    }
}

/// Multiset of strings with deterministic iteration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counts(BTreeMap<String, u32>);

impl Counts {
    pub fn add(&mut self, key: &str) {
        *self.0.entry(key.to_owned()).or_insert(0) += 1;
    }

    pub fn get(&self, key: &str) -> u32 {
        self.0.get(key).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Keys by descending count, ties lexicographic.
    pub fn ranked(&self) -> Vec<&str> {
        let mut v: Vec<(&str, u32)> = self.iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v.into_iter().map(|(k, _)| k).collect()
    }

    fn write<W: Write>(&self, w: &mut W) -> io::Result<()> {
        put_len(w, self.0.len())?;
        for (k, v) in &self.0 {
            put_str(w, k)?;
            put_u32(w, *v)?;
        }
        Ok(())
    }

    fn read<R: Read>(r: &mut R) -> io::Result<Self> {
        let n = get_len(r, 1 << 24)?;
        let mut m = BTreeMap::new();
        for _ in 0..n {
            let k = get_str(r)?;
            m.insert(k, get_u32(r)?);
        }
        Ok(Counts(m))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct SpanEntry {
    total: u32,
    /// action surface -> (action, count)
    actions: BTreeMap<String, (ConceptAction, u32)>,
}

/// Span surface -> counted concept actions (including NULL).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConceptTable {
    entries: BTreeMap<String, SpanEntry>,
}

impl ConceptTable {
    pub fn add(&mut self, span_key: &str, action: ConceptAction) {
        let e = self.entries.entry(span_key.to_owned()).or_default();
        e.total += 1;
        e.actions
            .entry(action.surface())
            .or_insert_with(|| (action, 0))
            .1 += 1;
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn total(&self, span_key: &str) -> u32 {
        self.entries.get(span_key).map_or(0, |e| e.total)
    }

    pub fn count(&self, span_key: &str, action_surface: &str) -> u32 {
        self.entries
            .get(span_key)
            .and_then(|e| e.actions.get(action_surface))
            .map_or(0, |a| a.1)
    }

    /// Actions seen for `span_key`, by descending count (ties: surface).
    pub fn ranked(&self, span_key: &str) -> Option<Vec<&ConceptAction>> {
        let e = self.entries.get(span_key)?;
        let mut v: Vec<(&String, &(ConceptAction, u32))> = e.actions.iter().collect();
        v.sort_by(|a, b| b.1 .1.cmp(&a.1 .1).then(a.0.cmp(b.0)));
        Some(v.into_iter().map(|(_, (a, _))| a).collect())
    }

    pub(crate) fn write<W: Write>(&self, w: &mut W) -> io::Result<()> {
        put_len(w, self.entries.len())?;
        for (key, e) in &self.entries {
            put_str(w, key)?;
            put_u32(w, e.total)?;
            put_len(w, e.actions.len())?;
            for (a, c) in e.actions.values() {
                match a {
                    ConceptAction::Single(l) => {
                        put_u8(w, 0)?;
                        put_str(w, &l.surface())?;
                    }
                    ConceptAction::Fragment(f) => {
                        put_u8(w, 1)?;
                        let text = serialize_penman(f.graph()).map_err(|e| invalid(e.to_string()))?;
                        put_str(w, &text)?;
                    }
                }
                put_u32(w, *c)?;
            }
        }
        Ok(())
    }

    pub(crate) fn read<R: Read>(r: &mut R) -> io::Result<Self> {
        let n = get_len(r, 1 << 24)?;
        let mut entries = BTreeMap::new();
        for _ in 0..n {
            let key = get_str(r)?;
            let total = get_u32(r)?;
            let k = get_len(r, 1 << 24)?;
            let mut actions = BTreeMap::new();
            for _ in 0..k {
                let action = match get_u8(r)? {
                    0 => ConceptAction::Single(ConceptLabel::parse(&get_str(r)?)),
                    1 => {
                        let g = parse_penman(&get_str(r)?).map_err(|e| invalid(e.to_string()))?;
                        ConceptAction::Fragment(GraphFragment::new(g).map_err(|e| invalid(e.to_string()))?)
                    }
                    _ => return Err(invalid("bad concept action tag")),
                };
                let c = get_u32(r)?;
                actions.insert(action.surface(), (action, c));
            }
            entries.insert(key, SpanEntry { total, actions });
        }
        Ok(ConceptTable { entries })
    }
}

/// Relation counts keyed by concept surface forms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelationTables {
    pub pairwise: BTreeMap<(String, String), Counts>,
    pub outgoing: BTreeMap<String, Counts>,
    pub incoming: BTreeMap<String, Counts>,
    pub all_relations: Counts,
}

impl RelationTables {
    pub fn add(&mut self, source: &str, relation: &str, target: &str) {
        self.pairwise
            .entry((source.to_owned(), target.to_owned()))
            .or_default()
            .add(relation);
        self.outgoing.entry(source.to_owned()).or_default().add(relation);
        self.incoming.entry(target.to_owned()).or_default().add(relation);
        self.all_relations.add(relation);
    }

    fn seen(&self, concept: &str) -> bool {
        self.outgoing.contains_key(concept) || self.incoming.contains_key(concept)
    }

    /// How often `relation` was seen anywhere in training.
    pub fn frequency(&self, relation: &str) -> u32 {
        self.all_relations.get(relation)
    }

    pub(crate) fn write<W: Write>(&self, w: &mut W) -> io::Result<()> {
        put_len(w, self.pairwise.len())?;
        for ((s, t), c) in &self.pairwise {
            put_str(w, s)?;
            put_str(w, t)?;
            c.write(w)?;
        }
        for map in [&self.outgoing, &self.incoming] {
            put_len(w, map.len())?;
            for (k, c) in map {
                put_str(w, k)?;
                c.write(w)?;
            }
        }
        self.all_relations.write(w)
    }

    pub(crate) fn read<R: Read>(r: &mut R) -> io::Result<Self> {
        let mut t = RelationTables::default();
        let n = get_len(r, 1 << 24)?;
        for _ in 0..n {
            let s = get_str(r)?;
            let d = get_str(r)?;
            t.pairwise.insert((s, d), Counts::read(r)?);
        }
        for map in [&mut t.outgoing, &mut t.incoming] {
            let n = get_len(r, 1 << 24)?;
            for _ in 0..n {
                let k = get_str(r)?;
                map.insert(k, Counts::read(r)?);
            }
        }
        t.all_relations = Counts::read(r)?;
        Ok(t)
    }
}

/// Lemma -> PropBank frames.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrameLexicon {
    frames: BTreeMap<String, Vec<ConceptLabel>>,
}

impl FrameLexicon {
    pub const BUNDLED: &'static str = include_str!("../data/frames.txt");

    /// Parses `lemma<TAB>frame-sense` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut frames: BTreeMap<String, Vec<ConceptLabel>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (lemma, frame) = line
                .split_once('\t')
                .ok_or_else(|| format!("line {}: expected lemma<TAB>frame", i + 1))?;
            let label = ConceptLabel::parse(frame.trim());
            if label.frame_sense().is_none() {
                return Err(format!("line {}: `{}` has no sense suffix", i + 1, frame));
            }
            let list = frames.entry(lemma.trim().to_lowercase()).or_default();
            if !list.contains(&label) {
                list.push(label);
            }
        }
        Ok(FrameLexicon { frames })
    }

    pub fn bundled() -> Self {
        Self::parse(Self::BUNDLED).expect("bundled frame lexicon parses")
    }

    pub fn frames(&self, lemma: &str) -> &[ConceptLabel] {
        self.frames.get(lemma).map_or(&[], Vec::as_slice)
    }
}

/// Counts concept alignments per span surface and gold relations per
/// concept pair.
pub fn build_tables(examples: &[CorpusExample]) -> Result<(ConceptTable, RelationTables), CorpusError> {
    let mut concepts = ConceptTable::default();
    let mut relations = RelationTables::default();
    for ex in examples {
        let Some(gold) = ex.gold.as_ref() else {
            continue;
        };
        for (span, target) in ex.gold_segmentation()? {
            concepts.add(&ex.sentence.span_key(span), ex.gold_action(&target)?);
        }
        for e in gold.edges() {
            relations.add(
                &gold.label(&e.source).unwrap().surface(),
                &e.relation,
                &gold.label(&e.target).unwrap().surface(),
            );
        }
    }
    Ok((concepts, relations))
}

/// Lowercased lemma of a span; multi-token spans are joined by `_`.
/// Characters that would break PENMAN are replaced.
pub fn lemmatized_span(sentence: &AnnotatedSentence, span: Span) -> String {
    let s = sentence.tokens[span.tokens()]
        .iter()
        .map(|t| {
            if t.lemma.is_empty() || t.lemma == "_" {
                t.form.to_lowercase()
            } else {
                t.lemma.to_lowercase()
            }
        })
        .collect::<Vec<_>>()
        .join("_");
    let s: String = s
        .chars()
        .map(|c| {
            if c.is_whitespace() || "():/\"~".contains(c) {
                '_'
            } else {
                c
            }
        })
        .collect();
    if s.is_empty() || s == ConceptLabel::NULL_SURFACE {
        "_".to_owned()
    } else {
        s
    }
}

fn lemma_concept(sentence: &AnnotatedSentence, span: Span) -> ConceptAction {
    // Keep fallback words out of the frame namespace: `x-01` from a lemma
    // would otherwise read as a frame.
    let lemma = lemmatized_span(sentence, span);
    match ConceptLabel::parse(&lemma) {
        ConceptLabel::Frame { .. } | ConceptLabel::Null => {
            ConceptAction::Single(ConceptLabel::Word(lemma))
        }
        l => ConceptAction::Single(l),
    }
}

/// Concept actions for `span`: everything aligned to it in training (most
/// frequent first), or for unseen spans the lemma, lexicon frames when the
/// span is verbal, and NULL.
pub fn concept_candidates(
    table: &ConceptTable,
    lexicon: &FrameLexicon,
    sentence: &AnnotatedSentence,
    span: Span,
) -> Vec<ConceptAction> {
    if let Some(seen) = table.ranked(&sentence.span_key(span)) {
        return seen.into_iter().cloned().collect();
    }
    let mut out = vec![lemma_concept(sentence, span)];
    let verbal = sentence.tokens[span.tokens()]
        .iter()
        .any(|t| t.pos.starts_with("VB"));
    if verbal {
        out.extend(
            lexicon
                .frames(&lemmatized_span(sentence, span))
                .iter()
                .cloned()
                .map(ConceptAction::Single),
        );
    }
    out.push(ConceptAction::null());
    out
}

/// The action most often aligned to `span` in training, or the lemma for
/// unseen spans.
pub fn one_best_concept(table: &ConceptTable, sentence: &AnnotatedSentence, span: Span) -> ConceptAction {
    match table.ranked(&sentence.span_key(span)) {
        Some(seen) => seen[0].clone(),
        None => lemma_concept(sentence, span),
    }
}

/// Relation actions from concept `source` to concept `target` (surface
/// forms): the union of pairwise, outgoing and incoming counts ranked by
/// summed count, or every relation when neither concept was seen. NO-EDGE is
/// always last.
pub fn relation_candidates(tables: &RelationTables, source: &str, target: &str) -> Vec<RelationAction> {
    let mut out: Vec<RelationAction> = if !tables.seen(source) && !tables.seen(target) {
        tables
            .all_relations
            .ranked()
            .into_iter()
            .map(|r| RelationAction::Label(r.to_owned()))
            .collect()
    } else {
        let mut sum = Counts::default();
        let empty = Counts::default();
        let parts = [
            tables
                .pairwise
                .get(&(source.to_owned(), target.to_owned()))
                .unwrap_or(&empty),
            tables.outgoing.get(source).unwrap_or(&empty),
            tables.incoming.get(target).unwrap_or(&empty),
        ];
        for part in parts {
            for (k, c) in part.iter() {
                *sum.0.entry(k.to_owned()).or_insert(0) += c;
            }
        }
        sum.ranked()
            .into_iter()
            .map(|r| RelationAction::Label(r.to_owned()))
            .collect()
    };
    out.push(RelationAction::NoEdge);
    out
}
