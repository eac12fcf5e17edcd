//! Command-line front end: `align`, `train`, `parse` and `eval`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::candidates::build_tables;
use crate::corpus::{
    force_align, gold_spans_from_alignment, identify_spans, load_corpus, read_annotations, read_corpus_blocks,
    write_alignments, CorpusError, CorpusExample, Span,
};
use crate::eval::{concept_eval, smatch, EvalError, EvalReport};
use crate::graph::{serialize_penman, AmrGraph, ConceptAction};
use crate::learner::{
    decode, load_model, save_model, searn_train, ConceptMode, DecodeContext, LearnerError, OraclePolicy,
    PolicyModel, Resources, SearnConfig,
};
use crate::postprocess::{break_cycles_protecting, connect, placeholder};

/// Version string; the part after the comma is the model file format.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), ", model format 1");

#[derive(Debug, Parser)]
#[command(name = "amrsearn", version = VERSION, about = "Learning-to-search AMR parser")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Complete partial alignments by co-occurrence counting.
    Align {
        #[command(flatten)]
        input: Input,
        /// Alignments to complete.
        #[arg(long)]
        alignments: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Train a model.
    Train {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        alignments: PathBuf,
        /// key=value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one config key (key=value); repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Parse sentences into PENMAN graphs.
    Parse {
        #[command(flatten)]
        input: Input,
        /// Needed for --oracle.
        #[arg(long)]
        alignments: Option<PathBuf>,
        /// Without a model, --oracle decodes with the oracle throughout.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Reject models trained with a different hash-bit setting.
        #[arg(long)]
        hash_bits: Option<u8>,
        /// Resource paths for model-free oracle parsing.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        mode: ModeFlags,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Score predicted graphs against gold graphs.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Also score concepts against these gold alignments.
        #[arg(long, requires = "annotations")]
        concepts: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct Input {
    /// Corpus file: `# ::id`, `# ::snt` and (optionally) a PENMAN graph per block.
    #[arg(long)]
    corpus: PathBuf,
    /// Token annotations (index, form, lemma, POS, NE, head, label).
    #[arg(long)]
    annotations: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct ModeFlags {
    /// Gold concepts.
    #[arg(long)]
    oracle: bool,
    /// Most frequent training concept per span.
    #[arg(long = "one-best")]
    one_best: bool,
    /// Learned concepts.
    #[arg(long)]
    auto: bool,
}

impl ModeFlags {
    fn mode(&self) -> ConceptMode {
        if self.oracle {
            ConceptMode::Oracle
        } else if self.one_best {
            ConceptMode::OneBest
        } else {
            ConceptMode::Learned
        }
    }
}

/// Failures with their exit codes: 1 for pipeline errors, 2 for usage and
/// I/O errors.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Corpus(CorpusError::Io { .. }) => 2,
            CliError::Learner(LearnerError::Io { .. } | LearnerError::Config(_)) => 2,
            CliError::Learner(LearnerError::Corpus(CorpusError::Io { .. })) => 2,
            CliError::Learner(
                LearnerError::Corrupt { .. } | LearnerError::Version { .. } | LearnerError::HashBits { .. },
            ) => 2,
            _ => 1,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn finish(path: &Path, mut w: impl Write) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Io {
        path: path.to_owned(),
        source: e,
    })
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Align {
            input,
            alignments,
            output,
        } => {
            let examples = load_corpus(&input.corpus, &input.annotations, Some(&alignments))?;
            let added = cmd_align(&examples, &output)?;
            println!("added {} alignments", added);
            Ok(())
        }
        Command::Train {
            input,
            alignments,
            config,
            overrides,
            model,
        } => {
            let mut cfg = match config {
                Some(p) => SearnConfig::load(&p)?,
                None => SearnConfig::default(),
            };
            for o in &overrides {
                let (k, v) = o
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{}`", o)))?;
                cfg.set(k.trim(), v.trim())?;
            }
            cfg.validate()?;
            let examples = load_corpus(&input.corpus, &input.annotations, Some(&alignments))?;
            let m = searn_train(&examples, &cfg)?;
            save_model(&m, &model)?;
            info!("wrote {}", model.display());
            Ok(())
        }
        Command::Parse {
            input,
            alignments,
            model,
            hash_bits,
            config,
            mode,
            output,
        } => {
            let mode = mode.mode();
            if mode == ConceptMode::Oracle && alignments.is_none() {
                return Err(CliError::Usage("--oracle needs --alignments".into()));
            }
            if mode != ConceptMode::Oracle && model.is_none() {
                return Err(CliError::Usage("--one-best and --auto need --model".into()));
            }
            let examples = load_corpus(&input.corpus, &input.annotations, alignments.as_deref())?;
            let model = model.map(|p| load_model(&p, hash_bits)).transpose()?;
            let cfg = match (&model, config) {
                (Some(m), _) => m.config.clone(),
                (None, Some(p)) => SearnConfig::load(&p)?,
                (None, None) => SearnConfig::default(),
            };
            let resources = Resources::load(&cfg)?;
            let parsed = parse_corpus(model.as_ref(), &cfg, &resources, &examples, mode)?;
            let mut w = create(&output)?;
            write_parses(&mut w, &parsed).map_err(|e| CliError::Io {
                path: output.clone(),
                source: e,
            })?;
            finish(&output, w)
        }
        Command::Eval {
            pred,
            gold,
            concepts,
            annotations,
            restarts,
            seed,
        } => {
            let out = cmd_eval(&pred, &gold, concepts.as_deref().zip(annotations.as_deref()), restarts, seed)?;
            print!("{}", out);
            Ok(())
        }
    }
}

/// Completes alignments and writes them; returns how many concepts gained an
/// alignment.
pub fn cmd_align(examples: &[CorpusExample], output: &Path) -> Result<usize, CliError> {
    let count = |exs: &[CorpusExample]| -> usize { exs.iter().map(|e| e.alignment.aligned_vars().len()).sum() };
    let before = count(examples);
    let done = force_align(examples.to_vec());
    let mut w = create(output)?;
    write_alignments(&mut w, &done).map_err(|e| CliError::Io {
        path: output.to_owned(),
        source: e,
    })?;
    finish(output, w)?;
    Ok(count(&done) - before)
}

/// One parsed sentence.
#[derive(Clone, Debug)]
pub struct Parsed {
    pub id: String,
    pub text: String,
    pub graph: AmrGraph,
    pub spans: Vec<Span>,
    /// Predicted concept surface per span.
    pub concepts: Vec<String>,
}

/// Decodes and repairs every example. Without a model only oracle mode is
/// available, with candidate tables taken from `examples` themselves and
/// hash bits and pruning from `config`.
pub fn parse_corpus(
    model: Option<&PolicyModel>,
    config: &SearnConfig,
    resources: &Resources,
    examples: &[CorpusExample],
    mode: ConceptMode,
) -> Result<Vec<Parsed>, CliError> {
    let own_tables = match model {
        Some(_) => None,
        None => {
            if mode != ConceptMode::Oracle {
                return Err(CliError::Usage("only oracle parsing works without a model".into()));
            }
            Some(build_tables(examples)?)
        }
    };
    let mut out = Vec::with_capacity(examples.len());
    for ex in examples {
        let spans = if mode == ConceptMode::Oracle {
            if ex.gold.is_none() {
                return Err(CliError::Usage(format!("{}: --oracle needs a gold graph", ex.id)));
            }
            gold_spans_from_alignment(ex)?
        } else {
            identify_spans(&ex.sentence, &resources.dates)
        };
        let (decoded, relations, concepts) = match (model, &own_tables) {
            (Some(m), _) => (m.parse(resources, ex, &spans, mode)?, &m.relations, &m.concepts),
            (None, Some((ct, rt))) => {
                let ctx = DecodeContext {
                    concepts: ct,
                    relations: rt,
                    lexicon: &resources.lexicon,
                    stopwords: &resources.stopwords,
                    bits: config.hash_bits,
                    dep_cutoff: config.dep_cutoff,
                };
                let d = decode(&ctx, &ex.sentence, &spans, mode, &mut OraclePolicy, Some(ex))?;
                (d, rt, ct)
            }
            (None, None) => unreachable!(),
        };
        let graph = if decoded.is_empty() {
            placeholder(&ex.sentence, &spans, concepts)
        } else {
            let root = decoded.graph.root().expect("decoded root").to_owned();
            let g = connect(&decoded.graph, &root, relations);
            break_cycles_protecting(&g, relations, &decoded.forced_edges)
        };
        if graph.root().is_none() || !graph.is_connected() || !graph.is_acyclic() {
            return Err(CliError::Pipeline(format!("{}: repaired graph is not a rooted DAG", ex.id)));
        }
        out.push(Parsed {
            id: ex.id.clone(),
            text: ex.text.clone(),
            graph,
            spans,
            concepts: decoded.concepts.iter().map(ConceptAction::surface).collect(),
        });
    }
    Ok(out)
}

/// Writes parses as a corpus file; the `concepts` line lists
/// `start-end:concept` per span.
pub fn write_parses<W: Write>(w: &mut W, parsed: &[Parsed]) -> std::io::Result<()> {
    for p in parsed {
        writeln!(w, "# ::id {}", p.id)?;
        writeln!(w, "# ::snt {}", p.text)?;
        let concepts: Vec<String> = p
            .spans
            .iter()
            .zip(&p.concepts)
            .map(|(s, c)| format!("{}:{}", s, c))
            .collect();
        writeln!(w, "# ::concepts {}", concepts.join(" "))?;
        let text = serialize_penman(&p.graph).map_err(|e| std::io::Error::other(e.to_string()))?;
        writeln!(w, "{}\n", text)?;
    }
    Ok(())
}

fn parse_concepts_line(id: &str, line: &str) -> Result<(Vec<Span>, Vec<String>), CliError> {
    let bad = || CliError::Usage(format!("{}: malformed concepts line", id));
    let mut spans = Vec::new();
    let mut concepts = Vec::new();
    for item in line.split_whitespace() {
        let (span, c) = item.split_once(':').ok_or_else(bad)?;
        let (a, b) = span.split_once('-').ok_or_else(bad)?;
        let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        spans.push(Span::new(a, b));
        concepts.push(c.to_owned());
    }
    Ok((spans, concepts))
}

/// Smatch per example and over the corpus; with `concepts` = (alignments,
/// annotations), concept scores as well. Returns the report text.
pub fn cmd_eval(
    pred: &Path,
    gold: &Path,
    concepts: Option<(&Path, &Path)>,
    restarts: usize,
    seed: u64,
) -> Result<String, CliError> {
    let p = read_corpus_blocks(pred)?;
    let g = read_corpus_blocks(gold)?;
    if p.len() != g.len() {
        return Err(CliError::Usage(format!(
            "{} has {} graphs but {} has {}",
            pred.display(),
            p.len(),
            gold.display(),
            g.len()
        )));
    }
    let gold_examples = match concepts {
        Some((align, ann)) => {
            // Annotations must cover the gold ids; read them first so a
            // missing file is reported as such.
            read_annotations(ann)?;
            Some(load_corpus(gold, ann, Some(align))?)
        }
        None => None,
    };
    let mut out = String::new();
    let mut graph_reports = Vec::with_capacity(p.len());
    let mut concept_reports = Vec::new();
    for (k, (pb, gb)) in p.iter().zip(&g).enumerate() {
        if pb.id != gb.id {
            return Err(CliError::Usage(format!("example {}: id {} vs {}", k + 1, pb.id, gb.id)));
        }
        let pg = pb.parse_graph()?.ok_or_else(|| CliError::Usage(format!("{}: no predicted graph", pb.id)))?;
        let gg = gb.parse_graph()?.ok_or_else(|| CliError::Usage(format!("{}: no gold graph", gb.id)))?;
        let r = smatch(&pg, &gg, restarts, seed);
        let _ = writeln!(out, "{} {}", pb.id, r);
        graph_reports.push(r);
        if let Some(exs) = &gold_examples {
            let line = pb
                .meta("concepts")
                .ok_or_else(|| CliError::Usage(format!("{}: no concepts line in predictions", pb.id)))?;
            let (spans, cs) = parse_concepts_line(&pb.id, line)?;
            concept_reports.push(concept_eval(&spans, &cs, &exs[k])?);
        }
    }
    let _ = writeln!(out, "corpus {}", EvalReport::micro(&graph_reports));
    let _ = writeln!(out, "macro {}", EvalReport::macro_average(&graph_reports));
    if gold_examples.is_some() {
        let _ = writeln!(out, "concepts {}", EvalReport::micro(&concept_reports));
        let _ = writeln!(out, "concepts-macro {}", EvalReport::macro_average(&concept_reports));
    }
    Ok(out)
}
