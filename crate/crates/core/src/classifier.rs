//! Cost-sensitive multiclass classification reduced to squared-loss
//! regression of each action's cost over one shared weight vector.

use std::io::{self, Read, Write};

use crate::binio::*;
use crate::features::SparseVector;

pub const DEFAULT_ETA0: f64 = 0.5;
pub const DEFAULT_DECAY: f64 = 1e-6;

/// One decision: every candidate action with its own feature vector and cost.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostSensitiveExample {
    pub actions: Vec<(SparseVector, f32)>,
}

/// Dense linear cost regressor over hashed features.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearScorer {
    bits: u8,
    weights: Vec<f32>,
    updates: u64,
    eta0: f64,
    decay: f64,
}

impl LinearScorer {
    pub fn new(bits: u8, eta0: f64, decay: f64) -> Self {
        assert!((1..=30).contains(&bits), "hash bits out of range");
        LinearScorer {
            bits,
            weights: vec![0.0; 1 << bits],
            updates: 0,
            eta0,
            decay,
        }
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    /// Predicted cost of an action.
    pub fn score(&self, x: &SparseVector) -> f64 {
        debug_assert_eq!(x.bits(), self.bits);
        x.entries()
            .iter()
            .map(|&(i, v)| f64::from(self.weights[i as usize]) * f64::from(v))
            .sum()
    }

    fn learning_rate(&self) -> f64 {
        self.eta0 / (1.0 + self.decay * self.updates as f64)
    }

    /// One normalised squared-loss step of `x`'s prediction toward `target`.
    /// The step is divided by the squared norm of `x` so the learning rate is
    /// independent of how many features fire.
    fn regress(&mut self, x: &SparseVector, target: f64) {
        let norm = x.norm_sq();
        if norm == 0.0 {
            return;
        }
        let err = self.score(x) - target;
        let step = self.learning_rate() * err / norm;
        for &(i, v) in x.entries() {
            self.weights[i as usize] -= (step * f64::from(v)) as f32;
        }
        self.updates += 1;
    }

    pub(crate) fn write<W: Write>(&self, w: &mut W) -> io::Result<()> {
        put_u8(w, self.bits)?;
        put_u64(w, self.weights.len() as u64)?;
        put_u64(w, self.updates)?;
        put_f64(w, self.eta0)?;
        put_f64(w, self.decay)?;
        let mut buf = Vec::with_capacity(4 * 4096);
        for chunk in self.weights.chunks(4096) {
            buf.clear();
            for x in chunk {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub(crate) fn read<R: Read>(r: &mut R) -> io::Result<Self> {
        let bits = get_u8(r)?;
        if !(1..=30).contains(&bits) {
            return Err(invalid("hash bits out of range"));
        }
        let count = get_u64(r)?;
        if count != 1u64 << bits {
            return Err(invalid("weight count does not match hash bits"));
        }
        let updates = get_u64(r)?;
        let eta0 = get_f64(r)?;
        let decay = get_f64(r)?;
        let mut raw = vec![0u8; 4 * count as usize];
        r.read_exact(&mut raw)?;
        let weights = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(LinearScorer {
            bits,
            weights,
            updates,
            eta0,
            decay,
        })
    }
}

/// One regression update per action toward that action's cost.
pub fn train_csc(scorer: &mut LinearScorer, example: &CostSensitiveExample) {
    for (x, cost) in &example.actions {
        scorer.regress(x, f64::from(*cost));
    }
}

/// Index of the action with the lowest predicted cost; ties go to the
/// lowest index.
pub fn predict_csc(scorer: &LinearScorer, actions: &[SparseVector]) -> usize {
    assert!(!actions.is_empty(), "no actions to choose from");
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (i, x) in actions.iter().enumerate() {
        let s = scorer.score(x);
        if s < best_score {
            best = i;
            best_score = s;
        }
    }
    best
}
