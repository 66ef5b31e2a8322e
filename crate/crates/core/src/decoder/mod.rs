//! The sequential yes/no decoder.
//!
//! A [`DecoderPlan`] lists binary tests in the order they are performed. Each
//! test projects onto one conditionally typical output `|k>_j` of a codeword
//! (rank-one variant) or onto the span of all of them (subspace variant).
//! Between tests the state is projected back onto the typical subspace `H`;
//! a failed projection aborts.
//!
//! All vectors are expressed in the product eigenbasis of `rho^{(x)n}`.

mod chain;
mod mixture;
mod montecarlo;
mod povm;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use chain::{
    ChainEvent, DecodeOutcome, ErrorReport, OutcomeDistribution, SequentialDecoder, Transcript,
};
pub use mixture::{
    average_amplitude, mixture_sum, spectral_average_amplitude, verify_mixture_identity,
    AmplitudeForms, MAX_BINOMIAL_M,
};
pub use montecarlo::{run_trials, run_trials_with, TrialStats};
pub use povm::{build_povm, exact_error_probability, PovmSet};

use crate::budget::Budget;
use crate::channel::CqChannel;
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::linalg::ProductVector;
use crate::typicality::{
    conditional_typical_outputs, product_eigenvector, sequence_probability, ConditionalTypicalSet,
    TypicalityParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderVariant {
    /// One test per conditionally typical output `|k>_j`.
    RankOne,
    /// One test per codeword, projecting onto its conditional typical subspace.
    Subspace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOrdering {
    /// Codewords in codebook order, labels lexicographic within a codeword.
    Lexicographic,
    /// As lexicographic, but every test of `true_index` is moved to the end.
    WorstCase { true_index: usize },
}

#[derive(Debug, Clone)]
pub struct DecoderTest {
    /// Codebook index that a "yes" decodes to.
    pub codeword: usize,
    /// Eigenlabel sequences of the orthonormal product vectors spanning the
    /// test projector.
    pub labels: Vec<Vec<usize>>,
    pub vectors: Vec<ProductVector>,
    /// `pi = p_j * p_{k|j}`, summed over the spanned labels.
    pub weight: f64,
}

impl DecoderTest {
    pub fn rank(&self) -> usize {
        self.vectors.len()
    }
}

#[derive(Debug, Clone)]
pub struct DecoderPlan {
    pub n: usize,
    pub letter_dim: usize,
    pub codebook_size: usize,
    pub variant: DecoderVariant,
    pub ordering: TestOrdering,
    pub tests: Vec<DecoderTest>,
    /// `log2` of the estimate `2^{nR} 2^{n sum_j p_j S(rho_j)}`.
    pub log2_m_theory: f64,
}

impl DecoderPlan {
    /// `M`, the number of tests.
    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    pub fn m_theory(&self) -> f64 {
        self.log2_m_theory.exp2()
    }

    /// A plan with the given tests, for hand-built schedules.
    pub fn from_tests(
        n: usize,
        letter_dim: usize,
        codebook_size: usize,
        variant: DecoderVariant,
        tests: Vec<DecoderTest>,
    ) -> Result<Self> {
        for t in &tests {
            if t.codeword >= codebook_size {
                return Err(Error::validation(
                    "test refers to a codeword outside the codebook",
                ));
            }
            if t.vectors
                .iter()
                .any(|v| v.letters() != n || v.letter_dim() != letter_dim)
            {
                return Err(Error::validation(
                    "test vector shape does not match the plan",
                ));
            }
        }
        Ok(DecoderPlan {
            n,
            letter_dim,
            codebook_size,
            variant,
            ordering: TestOrdering::Lexicographic,
            tests,
            log2_m_theory: f64::NAN,
        })
    }
}

/// Projector onto the conditional typical subspace of one codeword.
#[derive(Debug, Clone)]
pub struct SubspaceProjector {
    pub codeword: usize,
    pub labels: Vec<Vec<usize>>,
    /// Orthonormal: distinct eigenlabel sequences of one `rho_j`.
    pub vectors: Vec<ProductVector>,
    pub weight: f64,
}

impl SubspaceProjector {
    pub fn rank(&self) -> usize {
        self.vectors.len()
    }
}

fn conditional_sets(
    ch: &CqChannel,
    codebook: &Codebook,
    delta_cond: f64,
    budget: &Budget,
) -> Result<Vec<ConditionalTypicalSet>> {
    let mut cache: HashMap<&[usize], ConditionalTypicalSet> = HashMap::new();
    codebook
        .codewords
        .iter()
        .map(|w| {
            if let Some(cts) = cache.get(w.as_slice()) {
                return Ok(cts.clone());
            }
            let cts = conditional_typical_outputs(ch, w, delta_cond, budget)?;
            cache.insert(w, cts.clone());
            Ok(cts)
        })
        .collect()
}

pub fn subspace_variant_projectors(
    ch: &CqChannel,
    codebook: &Codebook,
    delta_cond: f64,
    budget: &Budget,
) -> Result<Vec<SubspaceProjector>> {
    let sets = conditional_sets(ch, codebook, delta_cond, budget)?;
    Ok(sets
        .into_iter()
        .enumerate()
        .map(|(s, cts)| {
            let p_word = sequence_probability(ch.priors(), &cts.codeword);
            SubspaceProjector {
                codeword: s,
                vectors: cts
                    .labels
                    .iter()
                    .map(|k| product_eigenvector(ch, &cts.codeword, k))
                    .collect(),
                weight: p_word * cts.total_probability(),
                labels: cts.labels,
            }
        })
        .collect())
}

/// Orders the tests of every codeword into a schedule.
pub fn build_plan(
    codebook: &Codebook,
    ch: &CqChannel,
    params: &TypicalityParams,
    ordering: TestOrdering,
    variant: DecoderVariant,
    budget: &Budget,
) -> Result<DecoderPlan> {
    params.validate()?;
    if codebook.n != params.n {
        return Err(Error::validation(format!(
            "codebook has n = {}, parameters have n = {}",
            codebook.n, params.n
        )));
    }
    if let TestOrdering::WorstCase { true_index } = ordering {
        if true_index >= codebook.len() {
            return Err(Error::validation("worst-case index outside the codebook"));
        }
    }
    let per_codeword: Vec<Vec<DecoderTest>> = match variant {
        DecoderVariant::RankOne => {
            let sets = conditional_sets(ch, codebook, params.cond_delta(), budget)?;
            sets.into_iter()
                .enumerate()
                .map(|(s, cts)| {
                    let p_word = sequence_probability(ch.priors(), &cts.codeword);
                    cts.labels
                        .iter()
                        .zip(&cts.probabilities)
                        .map(|(k, &p)| DecoderTest {
                            codeword: s,
                            labels: vec![k.clone()],
                            vectors: vec![product_eigenvector(ch, &cts.codeword, k)],
                            weight: p_word * p,
                        })
                        .collect()
                })
                .collect()
        }
        DecoderVariant::Subspace => {
            subspace_variant_projectors(ch, codebook, params.cond_delta(), budget)?
                .into_iter()
                .map(|sp| {
                    vec![DecoderTest {
                        codeword: sp.codeword,
                        labels: sp.labels,
                        vectors: sp.vectors,
                        weight: sp.weight,
                    }]
                })
                .collect()
        }
    };

    let order: Vec<usize> = match ordering {
        TestOrdering::Lexicographic => (0..codebook.len()).collect(),
        TestOrdering::WorstCase { true_index } => (0..codebook.len())
            .filter(|&s| s != true_index)
            .chain(std::iter::once(true_index))
            .collect(),
    };
    let mut slots: Vec<Option<Vec<DecoderTest>>> = per_codeword.into_iter().map(Some).collect();
    let tests = order
        .into_iter()
        .flat_map(|s| slots[s].take().unwrap_or_default())
        .collect();

    let n = params.n as f64;
    Ok(DecoderPlan {
        n: params.n,
        letter_dim: ch.letter_dim(),
        codebook_size: codebook.len(),
        variant,
        ordering,
        tests,
        log2_m_theory: n * codebook.rate + n * ch.conditional_entropy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::BuiltinChannel;
    use crate::codebook::sample_codebook;
    use crate::linalg::HermitianMatrix;

    fn book(words: Vec<Vec<usize>>, rate: f64) -> Codebook {
        Codebook {
            n: words[0].len(),
            rate,
            delta_source: 1.0,
            seed: 0,
            distinct: false,
            codewords: words,
        }
    }

    #[test]
    fn pure_alphabet_one_test_per_codeword() {
        let ch = CqChannel::builtin(&BuiltinChannel::PurePair { overlap: 0.5 }).unwrap();
        let b = Budget::default();
        let cb = sample_codebook(&ch, 6, 0.4, 0.2, 3, false, &b).unwrap();
        let params = TypicalityParams::new(6, 0.2);
        let plan = build_plan(
            &cb,
            &ch,
            &params,
            TestOrdering::Lexicographic,
            DecoderVariant::RankOne,
            &b,
        )
        .unwrap();
        assert_eq!(plan.len(), cb.len());
        assert!(plan
            .tests
            .iter()
            .enumerate()
            .all(|(i, t)| t.codeword == i && t.rank() == 1));
        // pure outputs: the estimate reduces to 2^{nR}
        assert!((plan.m_theory() - (6.0f64 * 0.4).exp2()).abs() < 1e-9);
    }

    #[test]
    fn counting_and_lexicographic_order() {
        // rho_0 = diag(3/4, 1/4) at n = 2, delta = 1/4 admits labels
        // (0,0), (0,1), (1,0) but not (1,1).
        let mixed = HermitianMatrix::from_diagonal(&[0.75, 0.25]).unwrap();
        let ch = CqChannel::new(vec![1.0], vec![mixed]).unwrap();
        let cb = book(vec![vec![0, 0], vec![0, 0]], 0.5);
        let mut params = TypicalityParams::new(2, 0.0);
        params.delta_cond = Some(0.25);
        let b = Budget::default();
        let cts = conditional_typical_outputs(&ch, &[0, 0], 0.25, &b).unwrap();
        assert_eq!(cts.len(), 3);
        let plan = build_plan(
            &cb,
            &ch,
            &params,
            TestOrdering::Lexicographic,
            DecoderVariant::RankOne,
            &b,
        )
        .unwrap();
        assert_eq!(plan.len(), 6);
        let owners: Vec<usize> = plan.tests.iter().map(|t| t.codeword).collect();
        assert_eq!(owners, vec![0, 0, 0, 1, 1, 1]);
        let labels: Vec<Vec<usize>> = plan.tests[..3]
            .iter()
            .map(|t| t.labels[0].clone())
            .collect();
        assert_eq!(labels, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn worst_case_moves_true_codeword_last() {
        let ch = CqChannel::builtin(&BuiltinChannel::DepolarizedPair {
            overlap: 0.0,
            noise: 0.5,
        })
        .unwrap();
        let b = Budget::default();
        let cb = book(
            vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0], vec![0, 0, 1, 1]],
            0.4,
        );
        let params = TypicalityParams::new(4, 0.3);
        let plan = build_plan(
            &cb,
            &ch,
            &params,
            TestOrdering::WorstCase { true_index: 0 },
            DecoderVariant::RankOne,
            &b,
        )
        .unwrap();
        let owners: Vec<usize> = plan.tests.iter().map(|t| t.codeword).collect();
        let first_zero = owners.iter().position(|&s| s == 0).unwrap();
        assert!(owners[first_zero..].iter().all(|&s| s == 0));
        assert!(owners[..first_zero].iter().all(|&s| s != 0));
        assert!(first_zero > 0);
        assert!(build_plan(
            &cb,
            &ch,
            &params,
            TestOrdering::WorstCase { true_index: 3 },
            DecoderVariant::RankOne,
            &b
        )
        .is_err());
    }

    #[test]
    fn subspace_plan_has_one_test_per_codeword() {
        let ch = CqChannel::builtin(&BuiltinChannel::DepolarizedPair {
            overlap: 0.3,
            noise: 0.4,
        })
        .unwrap();
        let b = Budget::default();
        let cb = book(vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0]], 0.25);
        let params = TypicalityParams::new(4, 0.3);
        let rank_one = build_plan(
            &cb,
            &ch,
            &params,
            TestOrdering::Lexicographic,
            DecoderVariant::RankOne,
            &b,
        )
        .unwrap();
        let sub = build_plan(
            &cb,
            &ch,
            &params,
            TestOrdering::Lexicographic,
            DecoderVariant::Subspace,
            &b,
        )
        .unwrap();
        assert_eq!(sub.len(), 2);
        let total_rank: usize = sub.tests.iter().map(|t| t.rank()).sum();
        assert_eq!(total_rank, rank_one.len());
    }

    #[test]
    fn pure_alphabet_subspace_matches_rank_one() {
        let ch = CqChannel::builtin(&BuiltinChannel::PurePair { overlap: 0.7 }).unwrap();
        let cb = book(vec![vec![0, 1, 1], vec![1, 1, 0]], 1.0 / 3.0);
        let b = Budget::default();
        let projs = subspace_variant_projectors(&ch, &cb, 0.3, &b).unwrap();
        let params = TypicalityParams::new(3, 0.3);
        let plan = build_plan(
            &cb,
            &ch,
            &params,
            TestOrdering::Lexicographic,
            DecoderVariant::RankOne,
            &b,
        )
        .unwrap();
        for (p, t) in projs.iter().zip(&plan.tests) {
            assert_eq!(p.rank(), 1);
            assert_eq!(p.vectors, t.vectors);
        }
    }
}
