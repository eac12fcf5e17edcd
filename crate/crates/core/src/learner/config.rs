use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::candidates::FrameLexicon;
use crate::classifier::{DEFAULT_DECAY, DEFAULT_ETA0};
use crate::corpus::DatePatterns;
use crate::features::{Stopwords, DEFAULT_HASH_BITS};

use super::LearnerError;

/// Training and decoding settings. Read from a flat `key=value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct SearnConfig {
    /// Longest training sentence, in spans.
    pub max_spans: usize,
    pub iterations: usize,
    pub beta: f64,
    pub seed: u64,
    pub hash_bits: u8,
    /// Pairs further apart than this in the dependency tree get no relation
    /// decision; `None` disables pruning.
    pub dep_cutoff: Option<usize>,
    pub eta0: f64,
    pub decay: f64,
    /// Passes over each iteration's examples when fitting the scorers.
    pub passes: usize,
    /// Random restarts for Smatch.
    pub restarts: usize,
    pub stopwords_path: Option<PathBuf>,
    pub frames_path: Option<PathBuf>,
    pub date_patterns_path: Option<PathBuf>,
}

impl Default for SearnConfig {
    fn default() -> Self {
        SearnConfig {
            max_spans: 10,
            iterations: 5,
            beta: 0.5,
            seed: 0,
            hash_bits: DEFAULT_HASH_BITS,
            dep_cutoff: Some(2),
            eta0: DEFAULT_ETA0,
            decay: DEFAULT_DECAY,
            passes: 1,
            restarts: 4,
            stopwords_path: None,
            frames_path: None,
            date_patterns_path: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, LearnerError> {
    value
        .parse()
        .map_err(|_| LearnerError::Config(format!("bad value `{}` for `{}`", value, key)))
}

impl SearnConfig {
    /// Parses a config file body on top of the defaults. Blank lines and
    /// `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, LearnerError> {
        let mut c = SearnConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LearnerError::Config(format!("line {}: expected key=value", n + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, LearnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| LearnerError::Io {
            path: path.to_owned(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), LearnerError> {
        match key {
            "C" => self.max_spans = parse_num(key, value)?,
            "iterations" => self.iterations = parse_num(key, value)?,
            "beta" => self.beta = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "hash_bits" => self.hash_bits = parse_num(key, value)?,
            "dep_cutoff" => {
                self.dep_cutoff = match value {
                    "off" | "none" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "eta0" => self.eta0 = parse_num(key, value)?,
            "decay" => self.decay = parse_num(key, value)?,
            "passes" => self.passes = parse_num(key, value)?,
            "restarts" => self.restarts = parse_num(key, value)?,
            "stopwords_path" => self.stopwords_path = Some(value.into()),
            "frames_path" => self.frames_path = Some(value.into()),
            "date_patterns_path" => self.date_patterns_path = Some(value.into()),
            _ => return Err(LearnerError::Config(format!("unknown key `{}`", key))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::Config(m.to_owned()));
        if self.max_spans < 1 {
            return bad("C must be at least 1");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("beta must lie in (0, 1]");
        }
        if self.iterations < 1 {
            return bad("iterations must be at least 1");
        }
        if !(1..=30).contains(&self.hash_bits) {
            return bad("hash_bits must lie in 1..=30");
        }
        if self.passes < 1 {
            return bad("passes must be at least 1");
        }
        if self.eta0.is_nan() || self.eta0 <= 0.0 || self.decay.is_nan() || self.decay < 0.0 {
            return bad("eta0 must be positive and decay non-negative");
        }
        Ok(())
    }

    /// The config as a parseable `key=value` listing.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "C={}", self.max_spans);
        let _ = writeln!(s, "iterations={}", self.iterations);
        let _ = writeln!(s, "beta={}", self.beta);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "hash_bits={}", self.hash_bits);
        match self.dep_cutoff {
            Some(d) => {
                let _ = writeln!(s, "dep_cutoff={}", d);
            }
            None => s.push_str("dep_cutoff=off\n"),
        }
        let _ = writeln!(s, "eta0={}", self.eta0);
        let _ = writeln!(s, "decay={}", self.decay);
        let _ = writeln!(s, "passes={}", self.passes);
        let _ = writeln!(s, "restarts={}", self.restarts);
        for (k, p) in [
            ("stopwords_path", &self.stopwords_path),
            ("frames_path", &self.frames_path),
            ("date_patterns_path", &self.date_patterns_path),
        ] {
            if let Some(p) = p {
                let _ = writeln!(s, "{}={}", k, p.display());
            }
        }
        s
    }
}

/// Word lists and patterns named by a config, or the bundled defaults.
#[derive(Clone, Debug)]
pub struct Resources {
    pub stopwords: Stopwords,
    pub lexicon: FrameLexicon,
    pub dates: DatePatterns,
}

impl Resources {
    pub fn bundled() -> Self {
        Resources {
            stopwords: Stopwords::bundled(),
            lexicon: FrameLexicon::bundled(),
            dates: DatePatterns::bundled(),
        }
    }

    pub fn load(config: &SearnConfig) -> Result<Self, LearnerError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| LearnerError::Io {
                path: p.to_owned(),
                source: e,
            })
        };
        let mut r = Resources::bundled();
        if let Some(p) = &config.stopwords_path {
            r.stopwords = Stopwords::parse(&read(p)?);
        }
        if let Some(p) = &config.frames_path {
            r.lexicon = FrameLexicon::parse(&read(p)?).map_err(|m| LearnerError::Config(format!("{}: {}", p.display(), m)))?;
        }
        if let Some(p) = &config.date_patterns_path {
            r.dates = DatePatterns::parse(&read(p)?).map_err(|e| LearnerError::Config(format!("{}: {}", p.display(), e)))?;
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = SearnConfig::parse("# comment\nC=7\nbeta = 0.25\ndep_cutoff=off\n").unwrap();
        assert_eq!(c.max_spans, 7);
        assert_eq!(c.beta, 0.25);
        assert_eq!(c.dep_cutoff, None);
        assert_eq!(c.iterations, 5);
        assert_eq!(c.hash_bits, 22);
    }

    #[test]
    fn text_round_trip() {
        let c = SearnConfig {
            seed: 42,
            frames_path: Some("/tmp/f.txt".into()),
            ..SearnConfig::default()
        };
        assert_eq!(SearnConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SearnConfig::parse("beta=0").is_err());
        assert!(SearnConfig::parse("C=0").is_err());
        assert!(SearnConfig::parse("colour=red").is_err());
        assert!(SearnConfig::parse("seed").is_err());
        assert!(SearnConfig::parse("hash_bits=40").is_err());
    }
}
