//! Born-rule propagation of the measurement chain.
//!
//! After the opening typicality check the state always lies in `H`, so the
//! chain runs on `dim H` coordinates: for a test projector `Q` spanned by
//! orthonormal `v`, `<v|psi> = <Pv|psi>` and `P(1 - Q)psi = psi - sum_v <v|psi> Pv`.

use rand::Rng;
use serde::Serialize;

use super::DecoderPlan;
use crate::budget::Budget;
use crate::channel::CqChannel;
use crate::codebook::{sample_index, Codebook};
use crate::error::{Error, Result};
use crate::linalg::{expand, product_inner_unchecked, ProductVector, C64, ZERO};
use crate::typicality::{label_probability, product_eigenvector, TypicalModel};

/// Branches whose post-measurement squared norm falls below this are
/// treated as having probability zero.
pub const BRANCH_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeOutcome {
    Decoded(usize),
    AbortAtypical,
    AbortExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainEvent {
    Typicality { passed: bool },
    Test { test: usize, yes: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transcript {
    pub sent: usize,
    /// Eigenlabels of the sampled channel output `|k>_j`.
    pub labels: Vec<usize>,
    pub events: Vec<ChainEvent>,
    pub outcome: DecodeOutcome,
}

impl Transcript {
    pub fn is_success(&self) -> bool {
        self.outcome == DecodeOutcome::Decoded(self.sent)
    }
}

/// Exact probabilities of every terminal branch of the chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    /// Probability of the first "yes" occurring at each test.
    pub per_test: Vec<f64>,
    pub abort_atypical: f64,
    pub abort_exhausted: f64,
}

impl OutcomeDistribution {
    fn zeros(tests: usize) -> Self {
        OutcomeDistribution {
            per_test: vec![0.0; tests],
            abort_atypical: 0.0,
            abort_exhausted: 0.0,
        }
    }

    fn add_scaled(&mut self, other: &OutcomeDistribution, w: f64) {
        for (a, b) in self.per_test.iter_mut().zip(&other.per_test) {
            *a += w * b;
        }
        self.abort_atypical += w * other.abort_atypical;
        self.abort_exhausted += w * other.abort_exhausted;
    }

    pub fn total(&self) -> f64 {
        self.per_test.iter().sum::<f64>() + self.abort_atypical + self.abort_exhausted
    }

    pub fn abort(&self) -> f64 {
        self.abort_atypical + self.abort_exhausted
    }
}

/// Average error split by cause, over uniformly chosen messages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub error: f64,
    pub abort_mass: f64,
    pub misdecode_mass: f64,
    pub per_codeword_success: Vec<f64>,
}

impl ErrorReport {
    pub(crate) fn from_parts(success: Vec<f64>, abort: Vec<f64>, misdecode: Vec<f64>) -> Self {
        let n = success.len() as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
        ErrorReport {
            error: 1.0 - mean(&success),
            abort_mass: mean(&abort),
            misdecode_mass: mean(&misdecode),
            per_codeword_success: success,
        }
    }
}

/// A plan bound to a channel and typical subspace, ready to run.
#[derive(Debug)]
pub struct SequentialDecoder<'a> {
    plan: &'a DecoderPlan,
    ch: &'a CqChannel,
    model: &'a TypicalModel,
    /// Per test, the `H` coordinates of each spanning vector.
    compressed: Vec<Vec<Vec<C64>>>,
    letter_cdfs: Vec<Vec<f64>>,
}

fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
}

fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

impl<'a> SequentialDecoder<'a> {
    pub fn new(plan: &'a DecoderPlan, ch: &'a CqChannel, model: &'a TypicalModel) -> Result<Self> {
        if plan.n != model.n
            || plan.letter_dim != ch.letter_dim()
            || model.letter_dim != ch.letter_dim()
        {
            return Err(Error::validation(
                "plan, channel and typical model disagree on n or d",
            ));
        }
        let compressed = plan
            .tests
            .iter()
            .map(|t| t.vectors.iter().map(|v| model.compress(v)).collect())
            .collect();
        let letter_cdfs = ch
            .letters()
            .iter()
            .map(|l| {
                let total: f64 = l.weights.iter().sum();
                l.weights
                    .iter()
                    .scan(0.0, |acc, w| {
                        *acc += w / total;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Ok(SequentialDecoder {
            plan,
            ch,
            model,
            compressed,
            letter_cdfs,
        })
    }

    pub fn plan(&self) -> &DecoderPlan {
        self.plan
    }

    /// Samples the channel output for `codebook[sent]` from the full
    /// conditional spectral distribution and runs the chain on it.
    pub fn simulate_trial<R: Rng + ?Sized>(
        &self,
        codebook: &Codebook,
        sent: usize,
        rng: &mut R,
    ) -> Transcript {
        let word = &codebook.codewords[sent];
        let labels: Vec<usize> = word
            .iter()
            .map(|&j| sample_index(&self.letter_cdfs[j], rng.random()))
            .collect();
        let mut events = Vec::new();
        let outcome = self.run_chain(
            &product_eigenvector(self.ch, word, &labels),
            rng,
            Some(&mut events),
        );
        Transcript {
            sent,
            labels,
            events,
            outcome,
        }
    }

    /// As [`Self::simulate_trial`] without recording the event list.
    pub fn simulate_outcome<R: Rng + ?Sized>(
        &self,
        codebook: &Codebook,
        sent: usize,
        rng: &mut R,
    ) -> DecodeOutcome {
        let word = &codebook.codewords[sent];
        let labels: Vec<usize> = word
            .iter()
            .map(|&j| sample_index(&self.letter_cdfs[j], rng.random()))
            .collect();
        self.run_chain(&product_eigenvector(self.ch, word, &labels), rng, None)
    }

    /// Runs the chain on a given input product state.
    pub fn run_chain<R: Rng + ?Sized>(
        &self,
        input: &ProductVector,
        rng: &mut R,
        mut events: Option<&mut Vec<ChainEvent>>,
    ) -> DecodeOutcome {
        let mut log = |e: ChainEvent| {
            if let Some(ev) = events.as_deref_mut() {
                ev.push(e);
            }
        };
        let mut psi = self.model.compress(input);
        let pass = norm_sqr(&psi);
        let passed = pass >= BRANCH_FLOOR && rng.random::<f64>() < pass;
        log(ChainEvent::Typicality { passed });
        if !passed {
            return DecodeOutcome::AbortAtypical;
        }
        let scale = 1.0 / pass.sqrt();
        psi.iter_mut().for_each(|z| *z *= scale);

        for (t, (test, vecs)) in self.plan.tests.iter().zip(&self.compressed).enumerate() {
            let coeffs: Vec<C64> = vecs.iter().map(|v| dot(v, &psi)).collect();
            let p_yes = norm_sqr(&coeffs).clamp(0.0, 1.0);
            let p_no = 1.0 - p_yes;
            let yes = if p_yes < BRANCH_FLOOR {
                false
            } else if p_no < BRANCH_FLOOR {
                true
            } else {
                rng.random::<f64>() < p_yes
            };
            log(ChainEvent::Test { test: t, yes });
            if yes {
                return DecodeOutcome::Decoded(test.codeword);
            }
            for (c, v) in coeffs.iter().zip(vecs) {
                for (x, y) in psi.iter_mut().zip(v) {
                    *x -= c * y;
                }
            }
            let kept = norm_sqr(&psi);
            let passed = kept >= BRANCH_FLOOR && rng.random::<f64>() * p_no < kept;
            log(ChainEvent::Typicality { passed });
            if !passed {
                return DecodeOutcome::AbortAtypical;
            }
            let scale = 1.0 / kept.sqrt();
            psi.iter_mut().for_each(|z| *z *= scale);
        }
        DecodeOutcome::AbortExhausted
    }

    /// Exact branch probabilities for an input product state, without
    /// renormalization: the mass of "first yes at test l" is
    /// `<x|E_l|x>` for the chain POVM.
    pub fn outcome_distribution(&self, input: &ProductVector) -> OutcomeDistribution {
        let mut out = OutcomeDistribution::zeros(self.plan.len());
        let mut psi = self.model.compress(input);
        let mut mass = norm_sqr(&psi);
        out.abort_atypical += (1.0 - mass).max(0.0);
        for (t, vecs) in self.compressed.iter().enumerate() {
            let coeffs: Vec<C64> = vecs.iter().map(|v| dot(v, &psi)).collect();
            let yes = norm_sqr(&coeffs);
            out.per_test[t] = yes;
            for (c, v) in coeffs.iter().zip(vecs) {
                for (x, y) in psi.iter_mut().zip(v) {
                    *x -= c * y;
                }
            }
            let kept = norm_sqr(&psi);
            out.abort_atypical += (mass - yes - kept).max(0.0);
            mass = kept;
        }
        out.abort_exhausted = mass;
        out
    }

    /// Branch probabilities for `codebook[s]`, averaged over every channel
    /// output label sequence with its probability `p_{k|j}`.
    pub fn codeword_outcomes(
        &self,
        codebook: &Codebook,
        s: usize,
        budget: &Budget,
    ) -> Result<OutcomeDistribution> {
        let word = &codebook.codewords[s];
        let ranks: Vec<usize> = word.iter().map(|&j| self.ch.letter(j).rank()).collect();
        let total = ranks.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
        let total = budget.check_enumeration("channel output labels", total)?;
        let mut acc = OutcomeDistribution::zeros(self.plan.len());
        let mut labels = vec![0usize; word.len()];
        for _ in 0..total {
            let p = label_probability(self.ch, word, &labels);
            let dist = self.outcome_distribution(&product_eigenvector(self.ch, word, &labels));
            acc.add_scaled(&dist, p);
            for pos in (0..labels.len()).rev() {
                labels[pos] += 1;
                if labels[pos] < ranks[pos] {
                    break;
                }
                labels[pos] = 0;
            }
        }
        Ok(acc)
    }

    /// Exact average error of the chain over the codebook, from branch
    /// probabilities rather than Monte Carlo.
    pub fn exact_error(&self, codebook: &Codebook, budget: &Budget) -> Result<ErrorReport> {
        if codebook.len() != self.plan.codebook_size || codebook.n != self.plan.n {
            return Err(Error::validation("codebook does not match the plan"));
        }
        let mut success = Vec::with_capacity(codebook.len());
        let mut abort = Vec::with_capacity(codebook.len());
        let mut misdecode = Vec::with_capacity(codebook.len());
        for s in 0..codebook.len() {
            let dist = self.codeword_outcomes(codebook, s, budget)?;
            let ok: f64 = self
                .plan
                .tests
                .iter()
                .zip(&dist.per_test)
                .filter(|(t, _)| t.codeword == s)
                .map(|(_, p)| p)
                .sum();
            let decoded: f64 = dist.per_test.iter().sum();
            success.push(ok);
            abort.push(dist.abort());
            misdecode.push(decoded - ok);
        }
        Ok(ErrorReport::from_parts(success, abort, misdecode))
    }

    /// `<k| P (1 - P_{l_m}) P ... P (1 - P_{l_1}) P |k>` for the input
    /// `|k>_j`, evaluated on the expanded `d^n` state with `P` as a mask and
    /// test overlaps through [`crate::linalg::product_inner`].
    pub fn amplitude_chain(
        &self,
        codeword: &[usize],
        labels: &[usize],
        m: usize,
        budget: &Budget,
    ) -> Result<C64> {
        if m > self.plan.len() {
            return Err(Error::validation(format!(
                "m = {m} exceeds the {} planned tests",
                self.plan.len()
            )));
        }
        if codeword.len() != self.plan.n || labels.len() != self.plan.n {
            return Err(Error::validation("codeword/labels length differs from n"));
        }
        let input = product_eigenvector(self.ch, codeword, labels);
        let mut x = expand(&input, budget)?;
        let apply_mask = |x: &mut crate::linalg::CVector| {
            for (z, &keep) in x.iter_mut().zip(&self.model.mask) {
                if !keep {
                    *z = ZERO;
                }
            }
        };
        apply_mask(&mut x);
        for test in &self.plan.tests[..m] {
            let coeffs: Vec<C64> = test
                .vectors
                .iter()
                .map(|v| product_inner_unchecked(v, x.as_slice()))
                .collect();
            for (c, v) in coeffs.iter().zip(&test.vectors) {
                x -= expand(v, budget)? * *c;
            }
            apply_mask(&mut x);
        }
        Ok(product_inner_unchecked(&input, x.as_slice()))
    }
}
