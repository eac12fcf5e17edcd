//! Synthetic corpora for the integration tests.
//!
//! The templated corpus follows a handful of sentence shapes whose
//! dependency trees mirror the gold graphs: every arc between two content
//! words is a gold edge in the same direction and every gold edge joins
//! spans at most two arcs apart.
#![allow(dead_code)]

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use amrsearn::corpus::{AlignTarget, Alignment, AnnotatedSentence, CorpusExample, DepEdge, Span, Token};
use amrsearn::graph::{AmrGraph, ConceptLabel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Corpus, annotation and alignment file contents.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Files {
    pub corpus: String,
    pub annotations: String,
    pub alignments: String,
}

pub struct Paths {
    pub corpus: PathBuf,
    pub annotations: PathBuf,
    pub alignments: PathBuf,
}

impl Files {
    pub fn write(&self, dir: &Path, stem: &str) -> Paths {
        let p = Paths {
            corpus: dir.join(format!("{stem}.amr")),
            annotations: dir.join(format!("{stem}.ann")),
            alignments: dir.join(format!("{stem}.align")),
        };
        fs::write(&p.corpus, &self.corpus).unwrap();
        fs::write(&p.annotations, &self.annotations).unwrap();
        fs::write(&p.alignments, &self.alignments).unwrap();
        p
    }
}

pub fn bundled(stem: &str) -> Paths {
    let d = fixtures_dir();
    Paths {
        corpus: d.join(format!("{stem}.amr")),
        annotations: d.join(format!("{stem}.ann")),
        alignments: d.join(format!("{stem}.align")),
    }
}

struct Tok {
    form: String,
    lemma: String,
    pos: &'static str,
    ne: &'static str,
    head: Option<usize>,
    label: &'static str,
}

#[derive(Default)]
struct Sentence {
    toks: Vec<Tok>,
    amr: String,
    align: Vec<(usize, usize, String)>,
}

impl Sentence {
    fn push(&mut self, form: &str, lemma: &str, pos: &'static str, ne: &'static str) -> usize {
        self.toks.push(Tok {
            form: form.into(),
            lemma: lemma.into(),
            pos,
            ne,
            head: None,
            label: "",
        });
        self.toks.len() - 1
    }

    fn attach(&mut self, dep: usize, head: usize, label: &'static str) {
        self.toks[dep].head = Some(head);
        self.toks[dep].label = label;
    }

    fn render(&self, id: &str, out: &mut Files) {
        let snt: Vec<&str> = self.toks.iter().map(|t| t.form.as_str()).collect();
        let _ = writeln!(out.corpus, "# ::id {id}\n# ::snt {}\n{}\n", snt.join(" "), self.amr);
        let _ = writeln!(out.annotations, "# ::id {id}");
        for (i, t) in self.toks.iter().enumerate() {
            let (head, label) = match t.head {
                Some(h) => (h + 1, t.label),
                None => (0, "root"),
            };
            let _ = writeln!(
                out.annotations,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                i + 1,
                t.form,
                t.lemma,
                t.pos,
                t.ne,
                head,
                label
            );
        }
        out.annotations.push('\n');
        let _ = writeln!(out.alignments, "# ::id {id}");
        for (s, e, v) in &self.align {
            let _ = writeln!(out.alignments, "{s}-{e}\t{v}");
        }
        out.alignments.push('\n');
    }
}

const NAMES: &[&[&str]] = &[&["John"], &["Mary"], &["Anna", "Berg"], &["Paul", "Klein"]];
const PRONOUNS: &[&str] = &["I", "he", "she", "we"];
/// (past, base, lemma, frame)
const VERBS: &[(&str, &str, &str, &str)] = &[
    ("read", "read", "read", "read-01"),
    ("bought", "buy", "buy", "buy-01"),
    ("saw", "see", "see", "see-01"),
    ("found", "find", "find", "find-01"),
    ("sold", "sell", "sell", "sell-01"),
];
const NOUNS: &[&str] = &["book", "letter", "car", "house", "dog"];
const ADJS: &[&str] = &["old", "red", "big", "new"];
const PLACES: &[&str] = &["forest", "city", "park", "garden"];
const DATES: &[(&str, u32, u32)] = &[("January", 1, 5), ("March", 3, 12)];

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Choice {
    name: Option<usize>,
    pronoun: usize,
    want: bool,
    verb: usize,
    the: bool,
    adj: Option<usize>,
    noun: usize,
    place: Option<usize>,
    time: u8,
}

fn choose(rng: &mut ChaCha8Rng) -> Choice {
    let name = rng.gen_bool(0.5).then(|| rng.gen_range(0..NAMES.len()));
    let pronoun = rng.gen_range(0..PRONOUNS.len());
    Choice {
        name,
        pronoun: if name.is_some() { 0 } else { pronoun },
        want: rng.gen_bool(0.3),
        verb: rng.gen_range(0..VERBS.len()),
        the: rng.gen_bool(0.5),
        adj: rng.gen_bool(0.5).then(|| rng.gen_range(0..ADJS.len())),
        noun: rng.gen_range(0..NOUNS.len()),
        place: rng.gen_bool(0.4).then(|| rng.gen_range(0..PLACES.len())),
        time: rng.gen_range(0..4),
    }
}

fn build(c: Choice) -> Sentence {
    let mut s = Sentence::default();
    let mut var = 0;
    let mut fresh = || {
        var += 1;
        format!("v{var}")
    };

    // Subject.
    let (subj_tok, subj_var, subj_amr) = match c.name {
        Some(k) => {
            let parts = NAMES[k];
            let first = s.toks.len();
            for (i, w) in parts.iter().enumerate() {
                s.push(w, w, "NNP", if i == 0 { "B-PER" } else { "I-PER" });
            }
            let last = s.toks.len() - 1;
            for t in first..last {
                s.attach(t, last, "nn");
            }
            let (p, n) = (fresh(), fresh());
            let ops: String = parts
                .iter()
                .enumerate()
                .map(|(i, w)| format!(" :op{} \"{}\"", i + 1, w))
                .collect();
            s.align.push((first, last + 1, format!("{p}+{n}")));
            (last, p.clone(), format!("({p} / person :name ({n} / name{ops}))"))
        }
        None => {
            let w = PRONOUNS[c.pronoun];
            let t = s.push(w, &w.to_lowercase(), "PRP", "O");
            let v = fresh();
            s.align.push((t, t + 1, v.clone()));
            (t, v.clone(), format!("({v} / {})", w.to_lowercase()))
        }
    };

    let (past, base, lemma, frame) = VERBS[c.verb];
    let (top, verb_tok, want_var) = if c.want {
        let plural = c.name.is_none() && matches!(PRONOUNS[c.pronoun], "I" | "we");
        let w = s.push(if plural { "want" } else { "wants" }, "want", if plural { "VBP" } else { "VBZ" }, "O");
        let to = s.push("to", "to", "TO", "O");
        let v = s.push(base, lemma, "VB", "O");
        s.attach(to, v, "aux");
        s.attach(v, w, "xcomp");
        let wv = fresh();
        s.align.push((w, w + 1, wv.clone()));
        (w, v, Some(wv))
    } else {
        let v = s.push(past, lemma, "VBD", "O");
        (v, v, None)
    };
    s.attach(subj_tok, top, "nsubj");
    let vv = fresh();
    s.align.push((verb_tok, verb_tok + 1, vv.clone()));

    let det = s.push(if c.the { "the" } else { "a" }, if c.the { "the" } else { "a" }, "DT", "O");
    let adj = c.adj.map(|k| (s.push(ADJS[k], ADJS[k], "JJ", "O"), ADJS[k]));
    let noun = s.push(NOUNS[c.noun], NOUNS[c.noun], "NN", "O");
    s.attach(det, noun, "det");
    s.attach(noun, verb_tok, "dobj");
    let ov = fresh();
    s.align.push((noun, noun + 1, ov.clone()));
    let obj_amr = match adj {
        Some((t, a)) => {
            s.attach(t, noun, "amod");
            let av = fresh();
            s.align.push((t, t + 1, av.clone()));
            format!("({ov} / {} :mod ({av} / {a}))", NOUNS[c.noun])
        }
        None => format!("({ov} / {})", NOUNS[c.noun]),
    };

    let mut extra = String::new();
    if let Some(k) = c.place {
        let inn = s.push("in", "in", "IN", "O");
        let the = s.push("the", "the", "DT", "O");
        let p = s.push(PLACES[k], PLACES[k], "NN", "O");
        s.attach(inn, verb_tok, "prep");
        s.attach(the, p, "det");
        s.attach(p, inn, "pobj");
        let pv = fresh();
        s.align.push((p, p + 1, pv.clone()));
        let _ = write!(extra, " :location ({pv} / {})", PLACES[k]);
    }
    match c.time {
        1 => {
            let y = s.push("yesterday", "yesterday", "NN", "O");
            s.attach(y, verb_tok, "tmod");
            let yv = fresh();
            s.align.push((y, y + 1, yv.clone()));
            let _ = write!(extra, " :time ({yv} / yesterday)");
        }
        2 | 3 => {
            let (month, m, d) = DATES[usize::from(c.time - 2)];
            let on = s.push("on", "on", "IN", "O");
            let mt = s.push(month, month, "NNP", "O");
            let dt = s.push(&d.to_string(), &d.to_string(), "CD", "O");
            s.attach(on, verb_tok, "prep");
            s.attach(mt, on, "pobj");
            s.attach(dt, mt, "num");
            let dv = fresh();
            s.align.push((mt, dt + 1, dv.clone()));
            let _ = write!(extra, " :time ({dv} / date-entity :month {m} :day {d})");
        }
        _ => {}
    }
    let stop = s.push(".", ".", ".", "O");
    s.attach(stop, top, "punct");

    s.amr = match want_var {
        Some(wv) => format!(
            "({wv} / want-01 :ARG0 {subj_amr} :ARG1 ({vv} / {frame} :ARG0 {subj_var} :ARG1 {obj_amr}{extra}))"
        ),
        None => format!("({vv} / {frame} :ARG0 {subj_amr} :ARG1 {obj_amr}{extra})"),
    };
    s.align.sort();
    s
}

/// The templated corpus: `train` training sentences followed by `heldout`
/// sentences that share no choice of template slots with them.
pub fn templated(train: usize, heldout: usize, seed: u64) -> (Files, Files) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = (Files::default(), Files::default());
    let mut k = 0;
    while k < train + heldout {
        let c = choose(&mut rng);
        if !seen.insert(c) {
            continue;
        }
        let (files, id) = if k < train {
            (&mut out.0, format!("train.{}", k + 1))
        } else {
            (&mut out.1, format!("heldout.{}", k - train + 1))
        };
        build(c).render(&id, files);
        k += 1;
    }
    out
}

pub fn bundled_corpus() -> (Files, Files) {
    templated(30, 10, 2015)
}

pub const CONFIG: &str = "\
# Overfitting run on the templated corpus.
C = 16
iterations = 5
beta = 0.5
seed = 11
hash_bits = 18
dep_cutoff = 2
passes = 3
";

/// Random dependency tree over `n` tokens as head indices.
pub fn random_tree(rng: &mut impl Rng, n: usize) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut heads = vec![None; n];
    for k in 1..n {
        heads[order[k]] = Some(order[rng.gen_range(0..k)]);
    }
    heads
}

const POOL: &[(&str, &str, &str)] = &[
    ("John", "John", "NNP"),
    ("read", "read", "VBD"),
    ("the", "the", "DT"),
    ("book", "book", "NN"),
    ("old", "old", "JJ"),
    ("in", "in", "IN"),
    ("forest", "forest", "NN"),
    ("wants", "want", "VBZ"),
    ("to", "to", "TO"),
    ("sold", "sell", "VBD"),
    ("she", "she", "PRP"),
    ("yesterday", "yesterday", "NN"),
    ("January", "January", "NNP"),
    ("5", "5", "CD"),
    ("zorp", "zorp", "NN"),
    ("quickly", "quickly", "RB"),
    (".", ".", "."),
];

fn random_tokens(rng: &mut impl Rng, n: usize) -> Vec<Token> {
    let mut prev_ne = false;
    (0..n)
        .map(|_| {
            let (f, l, p) = POOL[rng.gen_range(0..POOL.len())];
            let ne = if p == "NNP" && rng.gen_bool(0.7) {
                if prev_ne && rng.gen_bool(0.5) {
                    "I-PER"
                } else {
                    "B-PER"
                }
            } else {
                "O"
            };
            prev_ne = ne != "O";
            Token {
                form: f.into(),
                lemma: l.into(),
                pos: p.into(),
                ne: ne.into(),
            }
        })
        .collect()
}

fn deps_of(heads: &[Option<usize>]) -> Vec<DepEdge> {
    heads
        .iter()
        .enumerate()
        .map(|(i, &h)| DepEdge {
            head: h,
            dependent: i,
            label: if h.is_some() { "dep".into() } else { "root".into() },
        })
        .collect()
}

pub fn random_sentence(rng: &mut impl Rng, n: usize) -> AnnotatedSentence {
    let heads = random_tree(rng, n);
    AnnotatedSentence::new(random_tokens(rng, n), deps_of(&heads)).unwrap()
}

/// Raw sentences without graphs or alignments, for parsing.
pub fn random_raw(count: usize, max_len: usize, seed: u64) -> Files {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Files::default();
    for k in 0..count {
        let n = rng.gen_range(1..=max_len);
        let s = random_sentence(&mut rng, n);
        let id = format!("rand.{}", k + 1);
        let forms: Vec<&str> = s.tokens.iter().map(|t| t.form.as_str()).collect();
        let _ = writeln!(out.corpus, "# ::id {id}\n# ::snt {}\n", forms.join(" "));
        let _ = writeln!(out.annotations, "# ::id {id}");
        for (i, t) in s.tokens.iter().enumerate() {
            let h = s.head(i).map_or(0, |h| h + 1);
            let _ = writeln!(
                out.annotations,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                i + 1,
                t.form,
                t.lemma,
                t.pos,
                t.ne,
                h,
                if h == 0 { "root" } else { "dep" }
            );
        }
        out.annotations.push('\n');
    }
    out
}

/// Random segmentation of `0..n` into contiguous spans.
pub fn random_spans(rng: &mut impl Rng, n: usize) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || rng.gen_bool(0.6) {
            spans.push(Span::new(start, i));
            start = i;
        }
    }
    spans
}

const LABELS: &[&str] = &["read-01", "book", "i", "forest", "old", "want-01", "thing", "see-01"];
const RELATIONS: &[&str] = &["ARG0", "ARG1", "mod", "location", "time"];

/// Example whose every span is aligned to its own gold node; gold edges
/// form a random tree over the nodes plus a few extra arcs.
pub fn random_aligned(rng: &mut impl Rng, id: &str, n: usize) -> CorpusExample {
    let sentence = random_sentence(rng, n);
    let spans = random_spans(rng, n);
    let mut gold = AmrGraph::new();
    let vars: Vec<String> = (0..spans.len()).map(|k| format!("x{k}")).collect();
    for v in &vars {
        gold.add_node(v, ConceptLabel::parse(LABELS[rng.gen_range(0..LABELS.len())])).unwrap();
    }
    for k in 1..vars.len() {
        let p = rng.gen_range(0..k);
        gold.add_edge(&vars[p], RELATIONS[rng.gen_range(0..RELATIONS.len())], &vars[k]).unwrap();
    }
    for _ in 0..rng.gen_range(0..=2) {
        let (a, b) = (rng.gen_range(0..vars.len()), rng.gen_range(0..vars.len()));
        if a < b {
            gold.add_edge(&vars[a], RELATIONS[rng.gen_range(0..RELATIONS.len())], &vars[b]).unwrap();
        }
    }
    let forms: Vec<&str> = sentence.tokens.iter().map(|t| t.form.as_str()).collect();
    CorpusExample {
        id: id.into(),
        text: forms.join(" "),
        alignment: Alignment {
            pairs: spans.iter().zip(&vars).map(|(&s, v)| (s, AlignTarget::Node(v.clone()))).collect(),
        },
        sentence,
        gold: Some(gold),
    }
}

/// Random rooted graph with at most `max_vars` variables over a small label
/// alphabet, so that many variable mappings tie.
pub fn random_graph(rng: &mut impl Rng, max_vars: usize) -> AmrGraph {
    let labels = ["a", "b", "c"];
    let rels = ["r", "s"];
    let n = rng.gen_range(1..=max_vars);
    let mut g = AmrGraph::new();
    for k in 0..n {
        g.add_node(&format!("n{k}"), ConceptLabel::parse(labels[rng.gen_range(0..labels.len())]))
            .unwrap();
    }
    for k in 1..n {
        let p = rng.gen_range(0..k);
        g.add_edge(&format!("n{p}"), rels[rng.gen_range(0..rels.len())], &format!("n{k}")).unwrap();
    }
    for _ in 0..rng.gen_range(0..=n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            let _ = g.add_edge(&format!("n{a}"), rels[rng.gen_range(0..rels.len())], &format!("n{b}"));
        }
    }
    if rng.gen_bool(0.3) {
        let k = rng.gen_range(0..n);
        g.add_constant(&format!("n{k}"), "quant", &rng.gen_range(1..3).to_string()).unwrap();
    }
    g
}

/// Token-to-token distances in the dependency tree, by breadth-first search.
pub fn bfs_distances(sentence: &AnnotatedSentence) -> Vec<Vec<usize>> {
    let n = sentence.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        if let Some(h) = sentence.head(i) {
            adj[i].push(h);
            adj[h].push(i);
        }
    }
    (0..n)
        .map(|s| {
            let mut d = vec![usize::MAX; n];
            d[s] = 0;
            let mut q = std::collections::VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if d[v] == usize::MAX {
                        d[v] = d[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            d
        })
        .collect()
}
