//! SEARN training and greedy decoding.

mod config;
mod decode;
mod train;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::binio::*;
use crate::candidates::{ConceptTable, RelationTables};
use crate::classifier::LinearScorer;
use crate::corpus::{CorpusError, CorpusExample, Span};

pub use config::{Resources, SearnConfig};
pub use decode::{
    decode, forced_pairs, prune_pairs, ConceptMode, Decision, DecodeContext, Decoded, OraclePolicy, Policy, Stage,
};
pub use train::{mixture_weights, searn_train, MixturePolicy};

/// Model file format version.
pub const MODEL_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"AMRSEARN";

#[derive(Debug, thiserror::Error)]
pub enum LearnerError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error("no training example has at most C={max_spans} spans")]
    NoTrainingExamples { max_spans: usize },
    #[error("oracle concepts need gold graphs and alignments")]
    NeedsGold,
    #[error("{path}: not a model file or corrupt: {msg}")]
    Corrupt { path: PathBuf, msg: String },
    #[error("{path}: model format version {found}, expected {expected}")]
    Version { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: model uses {found} hash bits, expected {expected}")]
    HashBits { path: PathBuf, found: u8, expected: u8 },
}

/// Concept, root and relation scorers of one SEARN iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct StageScorers {
    pub concept: LinearScorer,
    pub root: LinearScorer,
    pub relation: LinearScorer,
}

/// A trained parser: candidate tables plus a weighted mixture of
/// per-iteration scorers.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyModel {
    pub config: SearnConfig,
    pub concepts: ConceptTable,
    pub relations: RelationTables,
    /// (mixture weight, scorers), oldest first; weights sum to one.
    pub policies: Vec<(f64, StageScorers)>,
}

impl PolicyModel {
    pub fn context<'a>(&'a self, resources: &'a Resources) -> DecodeContext<'a> {
        DecodeContext {
            concepts: &self.concepts,
            relations: &self.relations,
            lexicon: &resources.lexicon,
            stopwords: &resources.stopwords,
            bits: self.config.hash_bits,
            dep_cutoff: self.config.dep_cutoff,
        }
    }

    /// The learned mixture, seeded per example so parses do not depend on
    /// corpus order.
    pub fn policy(&self, example_id: &str) -> MixturePolicy<'_> {
        MixturePolicy::new(
            self.policies.iter().map(|(w, s)| (*w, Some(s))).collect(),
            train::example_seed(self.config.seed, u64::MAX, example_id),
        )
    }

    /// Decodes one example with the learned policies.
    pub fn parse(
        &self,
        resources: &Resources,
        example: &CorpusExample,
        spans: &[Span],
        mode: ConceptMode,
    ) -> Result<Decoded, LearnerError> {
        let gold = (mode == ConceptMode::Oracle).then_some(example);
        decode(
            &self.context(resources),
            &example.sentence,
            spans,
            mode,
            &mut self.policy(&example.id),
            gold,
        )
    }

    pub fn write<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        put_u32(w, MODEL_VERSION)?;
        put_u8(w, self.config.hash_bits)?;
        put_f64(w, self.config.beta)?;
        put_u32(w, self.config.iterations as u32)?;
        put_u64(w, self.config.seed)?;
        put_str(w, &self.config.to_text())?;
        self.concepts.write(w)?;
        self.relations.write(w)?;
        put_len(w, self.policies.len())?;
        for (weight, s) in &self.policies {
            put_f64(w, *weight)?;
            s.concept.write(w)?;
            s.root.write(w)?;
            s.relation.write(w)?;
        }
        Ok(())
    }

    fn read<R: Read>(r: &mut R, path: &Path, expected_bits: Option<u8>) -> Result<Self, LearnerError> {
        let corrupt = |e: io::Error| LearnerError::Corrupt {
            path: path.to_owned(),
            msg: e.to_string(),
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(corrupt)?;
        if &magic != MAGIC {
            return Err(corrupt(invalid("bad magic")));
        }
        let version = get_u32(r).map_err(corrupt)?;
        if version != MODEL_VERSION {
            return Err(LearnerError::Version {
                path: path.to_owned(),
                found: version,
                expected: MODEL_VERSION,
            });
        }
        let bits = get_u8(r).map_err(corrupt)?;
        if let Some(expected) = expected_bits {
            if bits != expected {
                return Err(LearnerError::HashBits {
                    path: path.to_owned(),
                    found: bits,
                    expected,
                });
            }
        }
        let beta = get_f64(r).map_err(corrupt)?;
        let iterations = get_u32(r).map_err(corrupt)? as usize;
        let seed = get_u64(r).map_err(corrupt)?;
        let config = SearnConfig::parse(&get_str(r).map_err(corrupt)?)?;
        if config.hash_bits != bits || config.beta != beta || config.iterations != iterations || config.seed != seed {
            return Err(corrupt(invalid("header disagrees with stored config")));
        }
        let concepts = ConceptTable::read(r).map_err(corrupt)?;
        let relations = RelationTables::read(r).map_err(corrupt)?;
        let n = get_len(r, 1 << 16).map_err(corrupt)?;
        let mut policies = Vec::with_capacity(n);
        for _ in 0..n {
            let w = get_f64(r).map_err(corrupt)?;
            let mut next = || -> Result<LinearScorer, LearnerError> {
                let s = LinearScorer::read(r).map_err(corrupt)?;
                if s.bits() != bits {
                    return Err(corrupt(invalid("scorer hash bits differ from header")));
                }
                Ok(s)
            };
            let (concept, root, relation) = (next()?, next()?, next()?);
            policies.push((w, StageScorers { concept, root, relation }));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(corrupt)? != 0 {
            return Err(corrupt(invalid("trailing bytes")));
        }
        if policies.is_empty() {
            return Err(corrupt(invalid("no scorers")));
        }
        Ok(PolicyModel {
            config,
            concepts,
            relations,
            policies,
        })
    }
}

pub fn save_model(model: &PolicyModel, path: &Path) -> Result<(), LearnerError> {
    let io_err = |e| LearnerError::Io {
        path: path.to_owned(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    model.write(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Loads a model, optionally insisting on a hash-bit setting.
pub fn load_model(path: &Path, expected_bits: Option<u8>) -> Result<PolicyModel, LearnerError> {
    let f = File::open(path).map_err(|e| LearnerError::Io {
        path: path.to_owned(),
        source: e,
    })?;
    PolicyModel::read(&mut BufReader::new(f), path, expected_bits)
}
