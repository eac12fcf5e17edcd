//! PENMAN notation reader and writer.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use super::{AmrGraph, ConceptLabel, GraphError};

/// Unquoted leaf symbols that are constants rather than variable references.
const SYMBOL_CONSTANTS: &[&str] = &["-", "+", "imperative", "interrogative", "expressive"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PenmanError {
    #[error("{pos}: unbalanced parentheses")]
    Unbalanced { pos: Position },
    #[error("{pos}: expected {expected}, found {found}")]
    Unexpected {
        pos: Position,
        expected: &'static str,
        found: String,
    },
    #[error("{pos}: duplicate variable `{var}`")]
    DuplicateVariable { pos: Position, var: String },
    #[error("{pos}: reference to undeclared variable `{var}`")]
    UndeclaredVariable { pos: Position, var: String },
    #[error("{pos}: unterminated string")]
    UnterminatedString { pos: Position },
    #[error("{pos}: invalid concept: {msg}")]
    InvalidConcept { pos: Position, msg: String },
    #[error("empty input")]
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Slash,
    Role(String),
    Str(String),
    Sym(String),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Role(r) => format!("role `:{}`", r),
            Tok::Str(s) => format!("string {}", s),
            Tok::Sym(s) => format!("`{}`", s),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, Position)>, PenmanError> {
    let mut toks = Vec::new();
    for (lno, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let pos = Position {
                line: lno + 1,
                column: i + 1,
            };
            let c = chars[i];
            match c {
                c if c.is_whitespace() => i += 1,
                '(' => {
                    toks.push((Tok::LParen, pos));
                    i += 1;
                }
                ')' => {
                    toks.push((Tok::RParen, pos));
                    i += 1;
                }
                '/' => {
                    toks.push((Tok::Slash, pos));
                    i += 1;
                }
                '"' => {
                    let start = i;
                    i += 1;
                    while i < chars.len() && chars[i] != '"' {
                        if chars[i] == '\\' {
                            i += 1;
                        }
                        i += 1;
                    }
                    if i >= chars.len() {
                        return Err(PenmanError::UnterminatedString { pos });
                    }
                    i += 1;
                    toks.push((Tok::Str(chars[start..i].iter().collect()), pos));
                }
                _ => {
                    let start = i;
                    while i < chars.len() && !chars[i].is_whitespace() && !"()\"".contains(chars[i]) {
                        // `/` only separates when it stands alone or follows a variable
                        if chars[i] == '/' && i > start {
                            break;
                        }
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect();
                    match word.strip_prefix(':') {
                        Some(role) => toks.push((Tok::Role(role.to_owned()), pos)),
                        None => toks.push((Tok::Sym(word), pos)),
                    }
                }
            }
        }
    }
    Ok(toks)
}

enum Item {
    Child {
        source: String,
        relation: String,
        target: String,
    },
    Leaf {
        source: String,
        relation: String,
        value: String,
        quoted: bool,
        pos: Position,
    },
}

struct Parser {
    toks: Vec<(Tok, Position)>,
    at: usize,
    end: Position,
    nodes: Vec<(String, ConceptLabel)>,
    declared: HashSet<String>,
    items: Vec<Item>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Position {
        self.toks.get(self.at).map(|&(_, p)| p).unwrap_or(self.end)
    }

    fn next(&mut self, expected: &'static str) -> Result<(Tok, Position), PenmanError> {
        match self.toks.get(self.at) {
            Some(t) => {
                self.at += 1;
                Ok(t.clone())
            }
            None if expected == "`)`" => Err(PenmanError::Unbalanced { pos: self.end }),
            None => Err(PenmanError::Unexpected {
                pos: self.end,
                expected,
                found: "end of input".into(),
            }),
        }
    }

    fn unexpected(tok: &Tok, pos: Position, expected: &'static str) -> PenmanError {
        if *tok == Tok::RParen && expected != "`)`" {
            return PenmanError::Unbalanced { pos };
        }
        PenmanError::Unexpected {
            pos,
            expected,
            found: tok.describe(),
        }
    }

    /// Parses `( var / concept (:role value)* )` and returns the variable.
    fn node(&mut self) -> Result<String, PenmanError> {
        let (tok, pos) = self.next("`(`")?;
        if tok != Tok::LParen {
            return Err(Self::unexpected(&tok, pos, "`(`"));
        }
        let (tok, var_pos) = self.next("variable")?;
        let var = match tok {
            Tok::Sym(v) => v,
            other => return Err(Self::unexpected(&other, var_pos, "variable")),
        };
        let (tok, pos) = self.next("`/`")?;
        if tok != Tok::Slash {
            return Err(Self::unexpected(&tok, pos, "`/`"));
        }
        let (tok, pos) = self.next("concept")?;
        let label = match tok {
            Tok::Sym(s) | Tok::Str(s) => ConceptLabel::parse(&s),
            other => return Err(Self::unexpected(&other, pos, "concept")),
        };
        if label.is_null() {
            return Err(PenmanError::InvalidConcept {
                pos,
                msg: "NULL is not a node label".into(),
            });
        }
        if !self.declared.insert(var.clone()) {
            return Err(PenmanError::DuplicateVariable { pos: var_pos, var });
        }
        self.nodes.push((var.clone(), label));

        loop {
            match self.peek() {
                Some(Tok::RParen) => {
                    self.at += 1;
                    return Ok(var);
                }
                Some(Tok::Role(_)) => {
                    let (tok, _) = self.next("role")?;
                    let Tok::Role(relation) = tok else { unreachable!() };
                    let vpos = self.pos();
                    match self.peek() {
                        Some(Tok::LParen) => {
                            let target = self.node()?;
                            self.items.push(Item::Child {
                                source: var.clone(),
                                relation,
                                target,
                            });
                        }
                        Some(Tok::Sym(_)) | Some(Tok::Str(_)) => {
                            let (tok, _) = self.next("value")?;
                            let (value, quoted) = match tok {
                                Tok::Sym(s) => (s, false),
                                Tok::Str(s) => (s, true),
                                _ => unreachable!(),
                            };
                            self.items.push(Item::Leaf {
                                source: var.clone(),
                                relation,
                                value,
                                quoted,
                                pos: vpos,
                            });
                        }
                        Some(other) => {
                            let other = other.clone();
                            return Err(Self::unexpected(&other, vpos, "value"));
                        }
                        None => return Err(PenmanError::Unbalanced { pos: self.end }),
                    }
                }
                Some(other) => {
                    let other = other.clone();
                    let pos = self.pos();
                    return Err(Self::unexpected(&other, pos, "role or `)`"));
                }
                None => return Err(PenmanError::Unbalanced { pos: self.end }),
            }
        }
    }
}

fn is_numeric(s: &str) -> bool {
    s.parse::<f64>().is_ok()
}

/// Parses a single PENMAN expression. Lines starting with `#` are ignored.
/// The first declared variable becomes the root; `-of` relations are kept
/// as written.
pub fn parse_penman(text: &str) -> Result<AmrGraph, PenmanError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(PenmanError::Empty);
    }
    let last_line = text.lines().count().max(1);
    let end = Position {
        line: last_line,
        column: text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1),
    };
    let mut p = Parser {
        toks,
        at: 0,
        end,
        nodes: Vec::new(),
        declared: HashSet::new(),
        items: Vec::new(),
    };
    p.node()?;
    if let Some((tok, pos)) = p.toks.get(p.at) {
        return Err(match tok {
            Tok::RParen => PenmanError::Unbalanced { pos: *pos },
            other => PenmanError::Unexpected {
                pos: *pos,
                expected: "end of graph",
                found: other.describe(),
            },
        });
    }

    let mut g = AmrGraph::new();
    for (var, label) in p.nodes {
        g.add_node(&var, label).expect("checked during parsing");
    }
    for item in p.items {
        match item {
            Item::Child {
                source,
                relation,
                target,
            } => g.add_edge(&source, &relation, &target).expect("declared"),
            Item::Leaf {
                source,
                relation,
                value,
                quoted,
                pos,
            } => {
                if !quoted && g.contains(&value) {
                    g.add_edge(&source, &relation, &value).expect("declared");
                } else if quoted || is_numeric(&value) || SYMBOL_CONSTANTS.contains(&value.as_str()) {
                    g.add_constant(&source, &relation, &value).expect("declared");
                } else {
                    return Err(PenmanError::UndeclaredVariable { pos, var: value });
                }
            }
        }
    }
    Ok(g)
}

/// `ARG0` <-> `ARG0-of`.
pub(crate) fn invert_relation(rel: &str) -> String {
    match rel.strip_suffix("-of") {
        Some(base) => base.to_owned(),
        None => format!("{}-of", rel),
    }
}

/// Writes `g` in PENMAN notation, depth-first from the root with edges in
/// insertion order. Re-entrant nodes and back-edges become bare variable
/// references. Nodes only reachable against edge direction are written with
/// an inverted (`-of`) role.
pub fn serialize_penman(g: &AmrGraph) -> Result<String, GraphError> {
    let root = g.root().ok_or(GraphError::NoRoot)?;
    if !g.is_connected() {
        return Err(GraphError::Disconnected(g.component_roots()));
    }
    let n = g.nodes().len();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ei, e) in g.edges().iter().enumerate() {
        let s = g.node_index(&e.source).unwrap();
        let t = g.node_index(&e.target).unwrap();
        incident[s].push(ei);
        if t != s {
            incident[t].push(ei);
        }
    }
    let mut constants: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ci, c) in g.constants().iter().enumerate() {
        constants[g.node_index(&c.source).unwrap()].push(ci);
    }

    struct Writer<'a> {
        g: &'a AmrGraph,
        incident: Vec<Vec<usize>>,
        constants: Vec<Vec<usize>>,
        visited: Vec<bool>,
        forward: Vec<bool>,
        emitted: Vec<bool>,
        out: String,
    }

    impl Writer<'_> {
        fn write(&mut self, u: usize, depth: usize) {
            self.visited[u] = true;
            let node = &self.g.nodes()[u];
            self.out.push('(');
            self.out.push_str(&node.var);
            self.out.push_str(" / ");
            self.out.push_str(&node.label.surface());
            let indent = "    ".repeat(depth + 1);
            for k in 0..self.incident[u].len() {
                let ei = self.incident[u][k];
                if self.emitted[ei] {
                    continue;
                }
                let e = &self.g.edges()[ei];
                let s = self.g.node_index(&e.source).unwrap();
                let t = self.g.node_index(&e.target).unwrap();
                let (relation, other) = if s == u {
                    (e.relation.clone(), t)
                } else if !self.visited[s] && !self.forward[s] {
                    (invert_relation(&e.relation), s)
                } else {
                    // The source is written elsewhere and owns this edge.
                    continue;
                };
                self.emitted[ei] = true;
                self.out.push('\n');
                self.out.push_str(&indent);
                self.out.push(':');
                self.out.push_str(&relation);
                self.out.push(' ');
                if self.visited[other] {
                    self.out.push_str(&self.g.nodes()[other].var);
                } else {
                    self.write(other, depth + 1);
                }
            }
            for k in 0..self.constants[u].len() {
                let c = &self.g.constants()[self.constants[u][k]];
                self.out.push('\n');
                self.out.push_str(&indent);
                self.out.push(':');
                self.out.push_str(&c.relation);
                self.out.push(' ');
                self.out.push_str(&c.value);
            }
            self.out.push(')');
        }
    }

    let mut w = Writer {
        g,
        incident,
        constants,
        visited: vec![false; n],
        forward: {
            let reach = g.reachable_from(root);
            g.nodes().iter().map(|v| reach.contains(&v.var)).collect()
        },
        emitted: vec![false; g.edges().len()],
        out: String::new(),
    };
    w.write(g.node_index(root).unwrap(), 0);
    Ok(w.out)
}
