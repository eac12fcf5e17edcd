use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{
    AlignTarget, Alignment, AnnotatedSentence, CorpusError, CorpusExample, DepEdge, Span, Token,
};
use crate::graph::{parse_penman, AmrGraph};

/// Alignment lines of one sentence: span and the variables it covers.
pub type RawAlignment = Vec<(Span, Vec<String>)>;

fn read_file(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })
}

fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> CorpusError {
    CorpusError::Malformed {
        path: path.to_owned(),
        line,
        msg: msg.into(),
    }
}

/// Splits text into blank-line separated blocks of `(line number, line)`.
fn blocks(text: &str) -> Vec<Vec<(usize, &str)>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push((i + 1, line));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn meta_line(line: &str) -> Option<(&str, &str)> {
    let rest = line.trim_start().strip_prefix("# ::")?;
    Some(match rest.split_once(char::is_whitespace) {
        Some((k, v)) => (k, v.trim()),
        None => (rest.trim(), ""),
    })
}

/// One block of a corpus file: `# ::key value` metadata plus an optional
/// PENMAN graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusBlock {
    pub id: String,
    pub meta: Vec<(String, String)>,
    pub graph_text: String,
    /// 1-based line of the block's first line.
    pub line: usize,
}

impl CorpusBlock {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn parse_graph(&self) -> Result<Option<AmrGraph>, CorpusError> {
        if self.graph_text.trim().is_empty() {
            return Ok(None);
        }
        parse_penman(&self.graph_text)
            .map(Some)
            .map_err(|source| CorpusError::Penman {
                id: self.id.clone(),
                source,
            })
    }
}

/// Reads a corpus file into blocks, in file order. Blocks without an id get
/// their ordinal number as id.
pub fn read_corpus_blocks(path: &Path) -> Result<Vec<CorpusBlock>, CorpusError> {
    let text = read_file(path)?;
    let mut out = Vec::new();
    for block in blocks(&text) {
        let mut meta = Vec::new();
        let mut graph = String::new();
        for &(_, line) in &block {
            if let Some((k, v)) = meta_line(line) {
                meta.push((k.to_owned(), v.to_owned()));
            } else if !line.trim_start().starts_with('#') {
                graph.push_str(line);
                graph.push('\n');
            }
        }
        let id = meta
            .iter()
            .find(|(k, _)| k == "id")
            .map(|(_, v)| v.split_whitespace().next().unwrap_or("").to_owned())
            .unwrap_or_else(|| (out.len() + 1).to_string());
        out.push(CorpusBlock {
            id,
            meta,
            graph_text: graph,
            line: block[0].0,
        });
    }
    Ok(out)
}

/// Reads the tab-separated annotation sidecar:
/// `index form lemma pos ne head label`, 1-based indices, head 0 = root.
pub fn read_annotations(path: &Path) -> Result<Vec<(String, AnnotatedSentence)>, CorpusError> {
    let text = read_file(path)?;
    let mut out = Vec::new();
    for block in blocks(&text) {
        let mut id = None;
        let mut tokens = Vec::new();
        let mut deps = Vec::new();
        for &(lno, line) in &block {
            if let Some((k, v)) = meta_line(line) {
                if k == "id" {
                    id = Some(v.to_owned());
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 7 {
                return Err(malformed(path, lno, format!("expected 7 columns, found {}", cols.len())));
            }
            let index: usize = cols[0]
                .parse()
                .map_err(|_| malformed(path, lno, "bad token index"))?;
            if index != tokens.len() + 1 {
                return Err(malformed(path, lno, format!("token index {} out of sequence", index)));
            }
            let head: usize = cols[5]
                .parse()
                .map_err(|_| malformed(path, lno, "bad head index"))?;
            tokens.push(Token {
                form: cols[1].to_owned(),
                lemma: cols[2].to_owned(),
                pos: cols[3].to_owned(),
                ne: cols[4].to_owned(),
            });
            deps.push(DepEdge {
                head: head.checked_sub(1),
                dependent: index - 1,
                label: cols[6].to_owned(),
            });
        }
        let id = id.ok_or_else(|| malformed(path, block[0].0, "block without `# ::id`"))?;
        let sentence = AnnotatedSentence::new(tokens, deps).map_err(|msg| CorpusError::Invalid {
            id: id.clone(),
            msg,
        })?;
        out.push((id, sentence));
    }
    Ok(out)
}

/// Raw alignment lines per id: `start-end<TAB>target`, where target is
/// `NULL`, a variable, or variables joined by `+` for a fragment.
pub fn read_alignments(path: &Path) -> Result<Vec<(String, RawAlignment)>, CorpusError> {
    let text = read_file(path)?;
    let mut out: Vec<(String, RawAlignment)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some((k, v)) = meta_line(line) {
            if k == "id" {
                out.push((v.to_owned(), Vec::new()));
            }
            continue;
        }
        let (range, target) = line
            .split_once('\t')
            .ok_or_else(|| malformed(path, lno, "expected `start-end<TAB>target`"))?;
        let (s, e) = range
            .split_once('-')
            .ok_or_else(|| malformed(path, lno, "bad span"))?;
        let (s, e): (usize, usize) = match (s.trim().parse(), e.trim().parse()) {
            (Ok(s), Ok(e)) if s < e => (s, e),
            _ => return Err(malformed(path, lno, format!("bad span `{}`", range))),
        };
        let target = target.trim();
        let vars = if target == "NULL" {
            Vec::new()
        } else {
            target.split('+').map(str::to_owned).collect()
        };
        match out.last_mut() {
            Some((_, pairs)) => pairs.push((Span::new(s, e), vars)),
            None => return Err(malformed(path, lno, "alignment line before `# ::id`")),
        }
    }
    Ok(out)
}

fn resolve_target(
    id: &str,
    gold: &AmrGraph,
    vars: Vec<String>,
) -> Result<AlignTarget, CorpusError> {
    let invalid = |msg: String| CorpusError::Invalid {
        id: id.to_owned(),
        msg,
    };
    for v in &vars {
        if !gold.contains(v) {
            return Err(invalid(format!("aligned variable `{}` not in graph", v)));
        }
    }
    match vars.len() {
        0 => Ok(AlignTarget::Null),
        1 => Ok(AlignTarget::Node(vars.into_iter().next().unwrap())),
        _ => {
            let set: HashSet<&str> = vars.iter().map(String::as_str).collect();
            let roots: Vec<&String> = vars
                .iter()
                .filter(|v| {
                    !gold
                        .edges()
                        .iter()
                        .any(|e| e.target == **v && set.contains(e.source.as_str()))
                })
                .collect();
            if roots.len() != 1 {
                return Err(invalid(format!(
                    "fragment {} must have exactly one root",
                    vars.join("+")
                )));
            }
            Ok(AlignTarget::Fragment {
                root: roots[0].clone(),
                members: vars.clone(),
            })
        }
    }
}

/// Loads corpus, annotation and (optionally) alignment files and joins them
/// by id. Examples come back in corpus order.
pub fn load_corpus(
    corpus_path: &Path,
    annotations_path: &Path,
    alignments_path: Option<&Path>,
) -> Result<Vec<CorpusExample>, CorpusError> {
    let blocks = read_corpus_blocks(corpus_path)?;
    let mut annotations: HashMap<String, AnnotatedSentence> =
        read_annotations(annotations_path)?.into_iter().collect();
    let mut alignments: Option<HashMap<String, RawAlignment>> = match alignments_path {
        Some(p) => Some(read_alignments(p)?.into_iter().collect()),
        None => None,
    };

    let mut out = Vec::with_capacity(blocks.len());
    for block in blocks {
        let id = block.id.clone();
        let gold = block.parse_graph()?;
        let sentence = annotations.remove(&id).ok_or_else(|| CorpusError::MissingId {
            id: id.clone(),
            file: "annotations",
        })?;
        let text = block.meta("snt").unwrap_or("").to_owned();
        let expected = text.split_whitespace().count();
        if block.meta("snt").is_some() && expected != sentence.len() {
            return Err(CorpusError::TokenCount {
                id,
                expected,
                found: sentence.len(),
            });
        }

        let mut alignment = Alignment::default();
        if let Some(table) = alignments.as_mut() {
            let raw = table.remove(&id).ok_or_else(|| CorpusError::MissingId {
                id: id.clone(),
                file: "alignments",
            })?;
            let gold = gold.as_ref().ok_or_else(|| CorpusError::Invalid {
                id: id.clone(),
                msg: "alignments given for an example without a graph".into(),
            })?;
            let mut seen_vars = HashSet::new();
            let mut seen_spans = HashSet::new();
            for (span, vars) in raw {
                if span.end > sentence.len() {
                    return Err(CorpusError::Invalid {
                        id,
                        msg: format!("aligned span {} out of range", span),
                    });
                }
                if !seen_spans.insert(span) {
                    return Err(CorpusError::Invalid {
                        id,
                        msg: format!("span {} aligned twice", span),
                    });
                }
                for v in &vars {
                    if !seen_vars.insert(v.clone()) {
                        return Err(CorpusError::Invalid {
                            id,
                            msg: format!("variable `{}` aligned twice", v),
                        });
                    }
                }
                alignment.pairs.push((span, resolve_target(&id, gold, vars)?));
            }
        }

        out.push(CorpusExample {
            id,
            text,
            sentence,
            gold,
            alignment,
        });
    }
    Ok(out)
}

/// Writes alignments in the format read by [`read_alignments`]. Fragment
/// roots are written first.
pub fn write_alignments<W: Write>(out: &mut W, examples: &[CorpusExample]) -> std::io::Result<()> {
    for (k, ex) in examples.iter().enumerate() {
        if k > 0 {
            writeln!(out)?;
        }
        writeln!(out, "# ::id {}", ex.id)?;
        let mut pairs: Vec<&(Span, AlignTarget)> = ex.alignment.pairs.iter().collect();
        pairs.sort_by_key(|(s, _)| *s);
        for (span, target) in pairs {
            let t = match target {
                AlignTarget::Null => "NULL".to_owned(),
                AlignTarget::Node(v) => v.clone(),
                AlignTarget::Fragment { root, members } => std::iter::once(root)
                    .chain(members.iter().filter(|m| *m != root))
                    .cloned()
                    .collect::<Vec<_>>()
                    .join("+"),
            };
            writeln!(out, "{}-{}\t{}", span.start, span.end, t)?;
        }
    }
    Ok(())
}
