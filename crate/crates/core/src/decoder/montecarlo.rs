use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::chain::{DecodeOutcome, SequentialDecoder};
use crate::codebook::Codebook;

/// Counts of trial outcomes; the sent message is uniform over the codebook.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TrialStats {
    pub trials: u64,
    pub correct: u64,
    pub misdecoded: u64,
    pub abort_atypical: u64,
    pub abort_exhausted: u64,
}

impl TrialStats {
    fn record(mut self, sent: usize, outcome: DecodeOutcome) -> Self {
        self.trials += 1;
        match outcome {
            DecodeOutcome::Decoded(s) if s == sent => self.correct += 1,
            DecodeOutcome::Decoded(_) => self.misdecoded += 1,
            DecodeOutcome::AbortAtypical => self.abort_atypical += 1,
            DecodeOutcome::AbortExhausted => self.abort_exhausted += 1,
        }
        self
    }

    fn merge(self, o: TrialStats) -> Self {
        TrialStats {
            trials: self.trials + o.trials,
            correct: self.correct + o.correct,
            misdecoded: self.misdecoded + o.misdecoded,
            abort_atypical: self.abort_atypical + o.abort_atypical,
            abort_exhausted: self.abort_exhausted + o.abort_exhausted,
        }
    }

    pub fn errors(&self) -> u64 {
        self.trials - self.correct
    }

    pub fn error_rate(&self) -> f64 {
        self.errors() as f64 / self.trials.max(1) as f64
    }

    pub fn abort_fraction(&self) -> f64 {
        (self.abort_atypical + self.abort_exhausted) as f64 / self.trials.max(1) as f64
    }

    pub fn misdecode_fraction(&self) -> f64 {
        self.misdecoded as f64 / self.trials.max(1) as f64
    }

    /// Wilson score interval for the error rate at `z` standard deviations.
    pub fn wilson_interval(&self, z: f64) -> (f64, f64) {
        let n = self.trials as f64;
        if n == 0.0 {
            return (0.0, 1.0);
        }
        let p = self.error_rate();
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        ((center - half).max(0.0), (center + half).min(1.0))
    }

    /// `|empirical - p| <= sigmas * sqrt(p (1 - p) / trials)` for a reference
    /// error probability `p`.
    pub fn consistent_with(&self, p: f64, sigmas: f64) -> bool {
        let sd = (p * (1.0 - p) / self.trials as f64).max(0.0).sqrt();
        (self.error_rate() - p).abs() <= sigmas * sd + 1e-12
    }
}

/// Runs `trials` independent decoding trials in parallel. Trial `t` draws
/// from its own ChaCha stream `t` under `seed`, so results do not depend on
/// thread scheduling.
pub fn run_trials(
    decoder: &SequentialDecoder<'_>,
    codebook: &Codebook,
    trials: u64,
    seed: u64,
) -> TrialStats {
    run_trials_with(codebook.len(), trials, seed, |sent, rng| {
        decoder.simulate_outcome(codebook, sent, rng)
    })
}

/// As [`run_trials`] with the decoder chosen per message, e.g. one
/// worst-case plan per sent codeword.
pub fn run_trials_with<F>(messages: usize, trials: u64, seed: u64, decode: F) -> TrialStats
where
    F: Fn(usize, &mut ChaCha8Rng) -> DecodeOutcome + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let sent = rng.random_range(0..messages);
            TrialStats::default().record(sent, decode(sent, &mut rng))
        })
        .reduce(TrialStats::default, TrialStats::merge)
}
