use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::candidates::build_tables;
use crate::classifier::{predict_csc, train_csc, CostSensitiveExample, LinearScorer};
use crate::corpus::{gold_spans_from_alignment, CorpusExample, Span};
use crate::features::{stable_hash, SparseVector};

use super::decode::{decode, ConceptMode, DecodeContext, Policy, Stage};
use super::{LearnerError, PolicyModel, Resources, SearnConfig, StageScorers};

/// A stochastic mixture of learned scorers and, optionally, the oracle.
/// Each decision samples one component.
pub struct MixturePolicy<'a> {
    components: Vec<(f64, Option<&'a StageScorers>)>,
    rng: ChaCha8Rng,
}

impl<'a> MixturePolicy<'a> {
    /// `components` pairs a weight with a scorer set; `None` is the oracle.
    /// Weights need not be normalised.
    pub fn new(components: Vec<(f64, Option<&'a StageScorers>)>, seed: u64) -> Self {
        assert!(!components.is_empty());
        MixturePolicy {
            components,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn sample(&mut self) -> Option<&'a StageScorers> {
        if self.components.len() == 1 {
            return self.components[0].1;
        }
        let total: f64 = self.components.iter().map(|c| c.0).sum();
        let mut u = self.rng.gen::<f64>() * total;
        for &(w, s) in &self.components {
            if u < w {
                return s;
            }
            u -= w;
        }
        self.components.last().unwrap().1
    }
}

impl Policy for MixturePolicy<'_> {
    fn choose(&mut self, stage: Stage, features: &[SparseVector], oracle: Option<usize>) -> usize {
        match self.sample() {
            None => oracle.expect("oracle component needs gold data"),
            Some(s) => {
                let scorer = match stage {
                    Stage::Concept(_) => &s.concept,
                    Stage::Root => &s.root,
                    Stage::Relation { .. } => &s.relation,
                };
                predict_csc(scorer, features)
            }
        }
    }
}

/// Weight of the oracle and of each of the `k` learned policies after `k`
/// interpolation steps: the oracle keeps (1-b)^k and policy j gets
/// b(1-b)^(k-j).
pub fn mixture_weights(beta: f64, k: usize) -> (f64, Vec<f64>) {
    let oracle = (1.0 - beta).powi(k as i32);
    let learned = (1..=k).map(|j| beta * (1.0 - beta).powi((k - j) as i32)).collect();
    (oracle, learned)
}

/// Per-example RNG seed so results do not depend on corpus order.
pub(crate) fn example_seed(seed: u64, round: u64, id: &str) -> u64 {
    seed ^ round.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stable_hash(id.as_bytes())
}

fn fit(scorer: &mut LinearScorer, examples: &mut [CostSensitiveExample], passes: usize, rng: &mut ChaCha8Rng) {
    for _ in 0..passes {
        examples.shuffle(rng);
        for ex in examples.iter() {
            train_csc(scorer, ex);
        }
    }
}

/// SEARN: starting from the oracle, roll in with the current mixture, turn
/// every decision into a cost-sensitive example (cost 0 for the oracle
/// action, 1 otherwise), fit fresh scorers and interpolate them into the
/// mixture.
///
/// Candidate tables come from every example; roll-ins only use examples with
/// at most `C` spans.
pub fn searn_train(examples: &[CorpusExample], config: &SearnConfig) -> Result<PolicyModel, LearnerError> {
    config.validate()?;
    let resources = Resources::load(config)?;
    let (concepts, relations) = build_tables(examples)?;

    let mut train: Vec<(&CorpusExample, Vec<Span>)> = Vec::new();
    for ex in examples.iter().filter(|e| e.gold.is_some()) {
        let spans = gold_spans_from_alignment(ex)?;
        if spans.len() <= config.max_spans {
            train.push((ex, spans));
        }
    }
    if train.is_empty() {
        return Err(LearnerError::NoTrainingExamples { max_spans: config.max_spans });
    }
    info!(
        "{} of {} examples have at most {} spans",
        train.len(),
        examples.len(),
        config.max_spans
    );

    let ctx = DecodeContext {
        concepts: &concepts,
        relations: &relations,
        lexicon: &resources.lexicon,
        stopwords: &resources.stopwords,
        bits: config.hash_bits,
        dep_cutoff: config.dep_cutoff,
    };
    let mut learned: Vec<StageScorers> = Vec::new();
    for k in 0..config.iterations {
        let (oracle_w, weights) = mixture_weights(config.beta, k);
        let mut buckets: [Vec<CostSensitiveExample>; 3] = Default::default();
        let (mut decisions, mut mistakes) = (0usize, 0usize);
        for (ex, spans) in &train {
            let mut components: Vec<(f64, Option<&StageScorers>)> = vec![(oracle_w, None)];
            components.extend(weights.iter().copied().zip(learned.iter().map(Some)));
            components.retain(|c| c.0 > 0.0);
            let mut policy = MixturePolicy::new(components, example_seed(config.seed, k as u64, &ex.id));
            let d = decode(&ctx, &ex.sentence, spans, ConceptMode::Learned, &mut policy, Some(ex))?;
            for dec in d.decisions {
                let oracle = dec.oracle.expect("gold supplied");
                decisions += 1;
                mistakes += usize::from(dec.chosen != oracle);
                if dec.candidates.len() < 2 {
                    continue;
                }
                let bucket = match dec.stage {
                    Stage::Concept(_) => 0,
                    Stage::Root => 1,
                    Stage::Relation { .. } => 2,
                };
                buckets[bucket].push(CostSensitiveExample {
                    actions: dec
                        .features
                        .into_iter()
                        .enumerate()
                        .map(|(a, x)| (x, if a == oracle { 0.0 } else { 1.0 }))
                        .collect(),
                });
            }
        }
        info!(
            "iteration {}: {} concept, {} root, {} relation examples; roll-in Hamming loss {}/{}",
            k + 1,
            buckets[0].len(),
            buckets[1].len(),
            buckets[2].len(),
            mistakes,
            decisions
        );
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (k as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
        let new = || LinearScorer::new(config.hash_bits, config.eta0, config.decay);
        let mut scorers = StageScorers {
            concept: new(),
            root: new(),
            relation: new(),
        };
        let [c, r, l] = &mut buckets;
        fit(&mut scorers.concept, c, config.passes, &mut rng);
        fit(&mut scorers.root, r, config.passes, &mut rng);
        fit(&mut scorers.relation, l, config.passes, &mut rng);
        learned.push(scorers);
    }

    let (_, weights) = mixture_weights(config.beta, config.iterations);
    let total: f64 = weights.iter().sum();
    Ok(PolicyModel {
        config: config.clone(),
        concepts,
        relations,
        policies: weights.into_iter().map(|w| w / total).zip(learned).collect(),
    })
}
