use std::collections::{HashMap, HashSet};

use super::{AlignTarget, CorpusExample, Span};

/// Unaligned concept nodes (variable, label surface) and unaligned tokens
/// (index, form) of one example. Tokens aligned to NULL count as unaligned.
#[allow(clippy::type_complexity)]
fn leftovers(ex: &CorpusExample) -> (Vec<(String, String)>, Vec<(usize, String)>) {
    let Some(gold) = ex.gold.as_ref() else {
        return (Vec::new(), Vec::new());
    };
    let aligned_vars = ex.alignment.aligned_vars();
    let concepts = gold
        .nodes()
        .iter()
        .filter(|n| !aligned_vars.contains(n.var.as_str()))
        .map(|n| (n.var.clone(), n.label.surface()))
        .collect();
    let aligned_tokens = ex.alignment.aligned_tokens();
    let words = ex
        .sentence
        .tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| !aligned_tokens.contains(i))
        .map(|(i, t)| (i, t.form.clone()))
        .collect();
    (concepts, words)
}

/// Completes partial alignments by co-occurrence counting.
///
/// A first pass counts, over all examples, the sentences in which an
/// unaligned word form appears together with an unaligned concept label. A
/// second pass aligns, per sentence, each leftover concept to the unaligned
/// word it co-occurred with most, taking (concept, word) pairs in descending
/// count order (ties: leftmost word, then concept order) and using each word
/// at most once. Existing non-null pairs are never touched; a null pair on a
/// word that gets aligned is replaced.
pub fn force_align(examples: Vec<CorpusExample>) -> Vec<CorpusExample> {
    let mut counts: HashMap<(String, String), usize> = HashMap::new();
    for ex in &examples {
        let (concepts, words) = leftovers(ex);
        let labels: HashSet<&String> = concepts.iter().map(|(_, l)| l).collect();
        let forms: HashSet<&String> = words.iter().map(|(_, f)| f).collect();
        for l in &labels {
            for f in &forms {
                *counts.entry(((*f).clone(), (*l).clone())).or_default() += 1;
            }
        }
    }

    examples
        .into_iter()
        .map(|mut ex| {
            let (concepts, words) = leftovers(&ex);
            let mut cands: Vec<(usize, usize, usize)> = Vec::new();
            for (ci, (_, label)) in concepts.iter().enumerate() {
                for (wi, (_, form)) in words.iter().enumerate() {
                    let c = counts
                        .get(&(form.clone(), label.clone()))
                        .copied()
                        .unwrap_or(0);
                    if c > 0 {
                        cands.push((c, wi, ci));
                    }
                }
            }
            // Words are listed left to right, so a smaller word slot is the
            // leftmost token.
            cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut used_words = HashSet::new();
            let mut used_concepts = HashSet::new();
            for (_, wi, ci) in cands {
                if used_words.contains(&wi) || used_concepts.contains(&ci) {
                    continue;
                }
                used_words.insert(wi);
                used_concepts.insert(ci);
                let span = Span::single(words[wi].0);
                ex.alignment
                    .pairs
                    .retain(|(s, t)| !(t.is_null() && *s == span));
                ex.alignment
                    .pairs
                    .push((span, AlignTarget::Node(concepts[ci].0.clone())));
            }
            ex
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::tok;
    use crate::corpus::{Alignment, AnnotatedSentence, DepEdge};
    use crate::graph::parse_penman;

    fn example(id: &str, words: &[&str], graph: &str, aligned: &[(usize, &str)]) -> CorpusExample {
        let tokens = words.iter().map(|w| tok(w, w, "NN", "O")).collect();
        let deps = (0..words.len())
            .map(|i| DepEdge {
                head: if i == 0 { None } else { Some(0) },
                dependent: i,
                label: "dep".into(),
            })
            .collect();
        CorpusExample {
            id: id.into(),
            text: words.join(" "),
            sentence: AnnotatedSentence::new(tokens, deps).unwrap(),
            gold: Some(parse_penman(graph).unwrap()),
            alignment: Alignment {
                pairs: aligned
                    .iter()
                    .map(|&(i, v)| (Span::single(i), AlignTarget::Node(v.into())))
                    .collect(),
            },
        }
    }

    fn target_form(ex: &CorpusExample, var: &str) -> Option<String> {
        ex.alignment
            .pairs
            .iter()
            .find(|(_, t)| *t == AlignTarget::Node(var.into()))
            .map(|(s, _)| ex.sentence.tokens[s.start].form.clone())
    }

    /// Counts how many sentences each (unaligned form, unaligned label) pair
    /// shares, straight from the toy data.
    fn brute_counts(exs: &[CorpusExample]) -> HashMap<(String, String), usize> {
        let mut m = HashMap::new();
        for ex in exs {
            let (c, w) = leftovers(ex);
            let mut seen = HashSet::new();
            for (_, l) in &c {
                for (_, f) in &w {
                    if seen.insert((f.clone(), l.clone())) {
                        *m.entry((f.clone(), l.clone())).or_insert(0) += 1;
                    }
                }
            }
        }
        m
    }

    #[test]
    fn majority_word_wins() {
        // `x` is unaligned in three sentences; "foo" co-occurs in two, "bar"
        // in one.
        let exs = vec![
            example("1", &["go", "foo"], "(g / go-01 :ARG1 (x / x))", &[(0, "g")]),
            example("2", &["go", "bar", "foo"], "(g / go-01 :ARG1 (x / x))", &[(0, "g")]),
            example("3", &["go", "zap"], "(g / go-01 :ARG1 (x / x))", &[(0, "g")]),
        ];
        let counts = brute_counts(&exs);
        assert_eq!(counts[&("foo".to_string(), "x".to_string())], 2);
        assert_eq!(counts[&("bar".to_string(), "x".to_string())], 1);
        let out = force_align(exs);
        assert_eq!(target_form(&out[0], "x").as_deref(), Some("foo"));
        assert_eq!(target_form(&out[1], "x").as_deref(), Some("foo"));
        assert_eq!(target_form(&out[2], "x").as_deref(), Some("zap"));
    }

    #[test]
    fn ties_go_to_the_leftmost_word() {
        let exs = vec![
            example("1", &["go", "foo"], "(g / go-01 :ARG1 (x / x))", &[(0, "g")]),
            example("2", &["go", "bar", "foo"], "(g / go-01 :ARG1 (x / x))", &[(0, "g")]),
            example("3", &["go", "bar"], "(g / go-01 :ARG1 (x / x))", &[(0, "g")]),
        ];
        let counts = brute_counts(&exs);
        assert_eq!(counts[&("foo".to_string(), "x".to_string())], 2);
        assert_eq!(counts[&("bar".to_string(), "x".to_string())], 2);
        let out = force_align(exs);
        assert_eq!(target_form(&out[1], "x").as_deref(), Some("bar"));
    }

    #[test]
    fn strict_majority_overrides_position() {
        let exs = vec![
            example("1", &["go", "foo"], "(g / go-01 :ARG1 (x / x))", &[(0, "g")]),
            example("2", &["go", "foo"], "(g / go-01 :ARG1 (x / x))", &[(0, "g")]),
            example("3", &["go", "bar", "foo"], "(g / go-01 :ARG1 (x / x))", &[(0, "g")]),
        ];
        let counts = brute_counts(&exs);
        assert_eq!(counts[&("foo".to_string(), "x".to_string())], 3);
        assert_eq!(counts[&("bar".to_string(), "x".to_string())], 1);
        let out = force_align(exs);
        assert_eq!(target_form(&out[2], "x").as_deref(), Some("foo"));
    }

    #[test]
    fn complete_example_is_unchanged() {
        let exs = vec![example("1", &["go", "x"], "(g / go-01 :ARG1 (x / x))", &[(0, "g"), (1, "x")])];
        let out = force_align(exs.clone());
        assert_eq!(out, exs);
    }

    #[test]
    fn single_leftover_pair_aligns() {
        let exs = vec![example("1", &["go", "yonder"], "(g / go-01 :ARG1 (x / x))", &[(0, "g")])];
        let out = force_align(exs);
        assert_eq!(target_form(&out[0], "x").as_deref(), Some("yonder"));
    }

    #[test]
    fn words_are_consumed_once() {
        let exs = vec![example(
            "1",
            &["go", "w"],
            "(g / go-01 :ARG1 (x / x) :ARG2 (y / y))",
            &[(0, "g")],
        )];
        let out = force_align(exs);
        let added: Vec<_> = out[0].alignment.pairs.iter().skip(1).collect();
        assert_eq!(added.len(), 1);
        assert_eq!(added[0].1, AlignTarget::Node("x".into()));
    }

    #[test]
    fn null_pair_is_upgraded_and_others_kept() {
        let mut ex = example("1", &["go", "w"], "(g / go-01 :ARG1 (x / x))", &[(0, "g")]);
        ex.alignment.pairs.push((Span::single(1), AlignTarget::Null));
        let out = force_align(vec![ex]);
        assert_eq!(
            out[0].alignment.pairs,
            vec![
                (Span::single(0), AlignTarget::Node("g".into())),
                (Span::single(1), AlignTarget::Node("x".into()))
            ]
        );
    }
}
