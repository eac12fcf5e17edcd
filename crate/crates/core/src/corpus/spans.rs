use regex::Regex;

use super::{AnnotatedSentence, Span};

/// Longest token window a date/time pattern is tried against.
const MAX_PATTERN_TOKENS: usize = 8;

/// Date and time expressions, one regular expression per line, matched
/// against space-joined token windows. Blank lines and `#` comments are
/// skipped.
#[derive(Clone, Debug)]
pub struct DatePatterns {
    patterns: Vec<Regex>,
}

impl DatePatterns {
    pub const BUNDLED: &'static str = include_str!("../../data/date_patterns.txt");

    pub fn parse(text: &str) -> Result<Self, regex::Error> {
        let patterns = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| Regex::new(&format!("^(?:{})$", l)))
            .collect::<Result<_, _>>()?;
        Ok(DatePatterns { patterns })
    }

    pub fn bundled() -> Self {
        Self::parse(Self::BUNDLED).expect("bundled date patterns compile")
    }

    pub fn empty() -> Self {
        DatePatterns { patterns: Vec::new() }
    }

    pub fn matches(&self, text: &str) -> bool {
        self.patterns.iter().any(|p| p.is_match(text))
    }
}

/// Entity type of an NE tag with any `B-`/`I-` style prefix removed; `None`
/// for outside tags.
fn ne_type(tag: &str) -> Option<&str> {
    if tag.is_empty() || tag == "O" {
        return None;
    }
    Some(match tag.split_once('-') {
        Some(("B" | "I" | "E" | "S", t)) => t,
        _ => tag,
    })
}

fn starts_entity(tag: &str) -> bool {
    tag.starts_with("B-") || tag.starts_with("S-")
}

/// Test-time segmentation: named-entity runs, then date/time matches
/// (longest first, left to right), everything else as singletons.
pub fn identify_spans(sentence: &AnnotatedSentence, patterns: &DatePatterns) -> Vec<Span> {
    let toks = &sentence.tokens;
    let n = toks.len();
    let mut in_ne = vec![false; n];
    let mut ne_spans = Vec::new();
    let mut i = 0;
    while i < n {
        match ne_type(&toks[i].ne) {
            None => i += 1,
            Some(t) => {
                let mut j = i + 1;
                while j < n && ne_type(&toks[j].ne) == Some(t) && !starts_entity(&toks[j].ne) {
                    j += 1;
                }
                ne_spans.push(Span::new(i, j));
                in_ne[i..j].iter_mut().for_each(|b| *b = true);
                i = j;
            }
        }
    }

    let mut spans = Vec::with_capacity(n);
    let mut ne_iter = ne_spans.into_iter().peekable();
    let mut i = 0;
    while i < n {
        if in_ne[i] {
            let s = ne_iter.next().expect("entity span");
            debug_assert_eq!(s.start, i);
            spans.push(s);
            i = s.end;
            continue;
        }
        let mut best = i + 1;
        let mut j = i + 2;
        while j <= n && j - i <= MAX_PATTERN_TOKENS && !in_ne[j - 1] {
            let window = toks[i..j]
                .iter()
                .map(|t| t.form.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            if patterns.matches(&window) {
                best = j;
            }
            j += 1;
        }
        spans.push(Span::new(i, best));
        i = best;
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{book_sentence, tok};
    use crate::corpus::DepEdge;

    fn sentence(words: &[(&str, &str)]) -> AnnotatedSentence {
        let tokens = words.iter().map(|(w, ne)| tok(w, w, "NN", ne)).collect();
        let deps = (0..words.len())
            .map(|i| DepEdge {
                head: if i == 0 { None } else { Some(0) },
                dependent: i,
                label: "dep".into(),
            })
            .collect();
        AnnotatedSentence::new(tokens, deps).unwrap()
    }

    #[test]
    fn named_entity_run_is_one_span() {
        let ex = book_sentence();
        let spans = identify_spans(&ex.sentence, &DatePatterns::bundled());
        assert!(spans.contains(&Span::new(6, 9)));
        assert_eq!(spans.len(), 12);
        assert!(ex.sentence.is_partition(&spans));
    }

    #[test]
    fn all_outside_tags_give_singletons() {
        let s = sentence(&[("the", "O"), ("cat", "O"), ("sat", "O")]);
        let spans = identify_spans(&s, &DatePatterns::bundled());
        assert_eq!(spans, vec![Span::single(0), Span::single(1), Span::single(2)]);
    }

    #[test]
    fn bundled_date_pattern_groups_full_date() {
        let s = sentence(&[
            ("on", "O"),
            ("January", "O"),
            ("5", "O"),
            (",", "O"),
            ("2012", "O"),
            ("it", "O"),
        ]);
        let spans = identify_spans(&s, &DatePatterns::bundled());
        assert_eq!(
            spans,
            vec![Span::single(0), Span::new(1, 5), Span::single(5)]
        );
    }

    #[test]
    fn adjacent_entities_split_on_begin_tags() {
        let s = sentence(&[("A", "B-PER"), ("B", "I-PER"), ("C", "B-PER"), ("D", "B-LOC")]);
        let spans = identify_spans(&s, &DatePatterns::empty());
        assert_eq!(spans, vec![Span::new(0, 2), Span::single(2), Span::single(3)]);
        // IO-style tags merge on equal type.
        let s = sentence(&[("New", "LOC"), ("York", "LOC"), ("x", "O")]);
        let spans = identify_spans(&s, &DatePatterns::empty());
        assert_eq!(spans, vec![Span::new(0, 2), Span::single(2)]);
    }

    #[test]
    fn date_match_stops_at_entities() {
        let s = sentence(&[("January", "O"), ("5", "B-X")]);
        let spans = identify_spans(&s, &DatePatterns::bundled());
        assert_eq!(spans, vec![Span::single(0), Span::single(1)]);
    }
}
