use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqdecode::codebook::{sample_codebook, Codebook};
use seqdecode::decoder::{
    build_plan, build_povm, exact_error_probability, run_trials, DecodeOutcome, DecoderPlan,
    DecoderTest, DecoderVariant, SequentialDecoder, TestOrdering,
};
use seqdecode::linalg::{expand, max_abs, CMatrix, CVector, ProductVector, C64};
use seqdecode::typicality::{
    build_typical_model, product_eigenvector, TypicalModel, TypicalityParams,
};
use seqdecode::{Budget, BuiltinChannel, CqChannel};

fn pure_pair() -> CqChannel {
    CqChannel::builtin(&BuiltinChannel::PurePair {
        overlap: std::f64::consts::FRAC_1_SQRT_2,
    })
    .unwrap()
}

fn random_product(rng: &mut ChaCha8Rng, d: usize, n: usize) -> ProductVector {
    let factors = (0..n)
        .map(|_| {
            let v = CVector::from_fn(d, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let norm = v.norm();
            v / C64::new(norm, 0.0)
        })
        .collect();
    ProductVector::new(factors).unwrap()
}

fn mask_matrix(model: &TypicalModel) -> CMatrix {
    let dim = model.full_dim();
    CMatrix::from_fn(dim, dim, |r, c| {
        if r == c && model.mask[r] {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn projector(test: &DecoderTest, budget: &Budget) -> CMatrix {
    let first = expand(&test.vectors[0], budget).unwrap();
    let dim = first.len();
    let mut q = CMatrix::zeros(dim, dim);
    for v in &test.vectors {
        let e = expand(v, budget).unwrap();
        q += &e * e.adjoint();
    }
    q
}

struct Setup {
    ch: CqChannel,
    codebook: Codebook,
    model: TypicalModel,
    plan: DecoderPlan,
}

fn setup(
    ch: CqChannel,
    n: usize,
    delta: f64,
    rate: f64,
    seed: u64,
    variant: DecoderVariant,
) -> Setup {
    let budget = Budget::default();
    let params = TypicalityParams::new(n, delta);
    let codebook = sample_codebook(&ch, n, rate, delta, seed, false, &budget).unwrap();
    let model = build_typical_model(&ch, &params, &budget).unwrap();
    let plan = build_plan(
        &codebook,
        &ch,
        &params,
        TestOrdering::Lexicographic,
        variant,
        &budget,
    )
    .unwrap();
    Setup {
        ch,
        codebook,
        model,
        plan,
    }
}

#[test]
fn chain_probabilities_match_povm_elements() {
    let budget = Budget::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (ch, n, delta, variant) in [
        (pure_pair(), 4, 0.3, DecoderVariant::RankOne),
        (pure_pair(), 3, 0.4, DecoderVariant::RankOne),
        (
            CqChannel::builtin(&BuiltinChannel::DepolarizedPair {
                overlap: 0.0,
                noise: 0.5,
            })
            .unwrap(),
            4,
            0.3,
            DecoderVariant::Subspace,
        ),
    ] {
        let s = setup(ch, n, delta, 0.5, 3, variant);
        assert!(!s.model.is_empty());
        let decoder = SequentialDecoder::new(&s.plan, &s.ch, &s.model).unwrap();
        let povm = build_povm(&s.plan, &s.model, &budget).unwrap();
        let mut inputs: Vec<ProductVector> =
            (0..4).map(|_| random_product(&mut rng, 2, n)).collect();
        inputs.push(product_eigenvector(
            &s.ch,
            &s.codebook.codewords[0],
            &vec![0; n],
        ));
        for x in &inputs {
            let dist = decoder.outcome_distribution(x);
            let xv = expand(x, &budget).unwrap();
            for (p, e) in dist.per_test.iter().zip(&povm.elements) {
                let oracle = (xv.adjoint() * e * &xv)[(0, 0)].re;
                assert!((p - oracle).abs() < 1e-9, "{p} vs {oracle}");
            }
            let abort = (xv.adjoint() * &povm.abort * &xv)[(0, 0)].re;
            assert!((dist.abort() - abort).abs() < 1e-9);
            assert!((dist.total() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn exact_error_from_chains_equals_povm_oracle() {
    let budget = Budget::default();
    for variant in [DecoderVariant::RankOne, DecoderVariant::Subspace] {
        let s = setup(pure_pair(), 4, 0.3, 0.25, 7, variant);
        let decoder = SequentialDecoder::new(&s.plan, &s.ch, &s.model).unwrap();
        let chains = decoder.exact_error(&s.codebook, &budget).unwrap();
        let povm = build_povm(&s.plan, &s.model, &budget).unwrap();
        let dense = exact_error_probability(&povm, &s.ch, &s.codebook).unwrap();
        assert!((chains.error - dense.error).abs() < 1e-9);
        assert!((chains.abort_mass - dense.abort_mass).abs() < 1e-9);
        assert!((chains.misdecode_mass - dense.misdecode_mass).abs() < 1e-9);
    }
}

#[test]
fn povm_is_complete_and_positive() {
    let budget = Budget::default();
    for (n, rate) in [(2, 1.0), (3, 0.7), (4, 0.5), (4, 1.0)] {
        let s = setup(pure_pair(), n, 0.45, rate, 5, DecoderVariant::RankOne);
        let povm = build_povm(&s.plan, &s.model, &budget).unwrap();
        assert!(povm.completeness_error() < 1e-9);
        assert!(povm.min_eigenvalue() > -1e-10);
    }
}

#[test]
fn single_test_povm() {
    let budget = Budget::default();
    let s = setup(pure_pair(), 2, 0.45, 0.0, 1, DecoderVariant::RankOne);
    assert_eq!(s.plan.len(), 1);
    let povm = build_povm(&s.plan, &s.model, &budget).unwrap();
    let p = mask_matrix(&s.model);
    let e1 = &p * projector(&s.plan.tests[0], &budget) * &p;
    assert!(max_abs(&(&povm.elements[0] - &e1)) < 1e-12);
    let dim = p.nrows();
    assert!(max_abs(&(&povm.abort - (CMatrix::identity(dim, dim) - e1))) < 1e-12);
}

#[test]
fn amplitude_chain_matches_dense_evaluation() {
    let budget = Budget::default();
    let s = setup(pure_pair(), 3, 0.4, 1.0, 9, DecoderVariant::RankOne);
    let decoder = SequentialDecoder::new(&s.plan, &s.ch, &s.model).unwrap();
    let p = mask_matrix(&s.model);
    let dim = p.nrows();
    let identity = CMatrix::identity(dim, dim);
    for (word, labels) in [
        (&s.codebook.codewords[0], vec![0, 0, 0]),
        (&s.codebook.codewords[1], vec![0, 0, 0]),
    ] {
        let k = expand(&product_eigenvector(&s.ch, word, &labels), &budget).unwrap();
        let mut op = p.clone();
        for m in 0..=s.plan.len() {
            let oracle = (k.adjoint() * &op * &k)[(0, 0)];
            let fast = decoder.amplitude_chain(word, &labels, m, &budget).unwrap();
            assert!((fast - oracle).norm() < 1e-10);
            if m < s.plan.len() {
                op = &p * (&identity - projector(&s.plan.tests[m], &budget)) * op;
            }
        }
    }
}

#[test]
fn amplitude_of_empty_chain_is_typical_overlap() {
    let budget = Budget::default();
    let s = setup(pure_pair(), 4, 0.3, 0.25, 7, DecoderVariant::RankOne);
    let decoder = SequentialDecoder::new(&s.plan, &s.ch, &s.model).unwrap();
    let word = &s.codebook.codewords[0];
    let x = product_eigenvector(&s.ch, word, &[0, 0, 0, 0]);
    let inside: f64 = s.model.compress(&x).iter().map(|z| z.norm_sqr()).sum();
    let a0 = decoder
        .amplitude_chain(word, &[0, 0, 0, 0], 0, &budget)
        .unwrap();
    assert!((a0.re - inside).abs() < 1e-12 && a0.im.abs() < 1e-12);
}

#[test]
fn amplitude_vanishes_after_own_projector() {
    let budget = Budget::default();
    let s = setup(pure_pair(), 3, 3.0, 1.0, 9, DecoderVariant::RankOne);
    assert_eq!(s.model.dim_h, 8);
    let decoder = SequentialDecoder::new(&s.plan, &s.ch, &s.model).unwrap();
    let labels = vec![0, 0, 0];
    let word = &s.codebook.codewords[0];
    let x = product_eigenvector(&s.ch, word, &labels);
    let inside: f64 = s.model.compress(&x).iter().map(|z| z.norm_sqr()).sum();
    assert!((inside - 1.0).abs() < 1e-12, "test state should lie in H");
    let first = s.plan.tests.iter().position(|t| t.codeword == 0).unwrap();
    let a = decoder
        .amplitude_chain(word, &labels, first + 1, &budget)
        .unwrap();
    assert!(a.norm() < 1e-12);
}

// |<k|K_m|k>| itself can grow when a later test rotates the state back
// towards |k>; the chain state's norm cannot.
#[test]
fn chain_state_norm_never_increases() {
    let budget = Budget::default();
    let mut grew = false;
    for seed in 0..4 {
        let s = setup(pure_pair(), 4, 0.3, 1.0, seed, DecoderVariant::RankOne);
        let decoder = SequentialDecoder::new(&s.plan, &s.ch, &s.model).unwrap();
        let word = &s.codebook.codewords[s.codebook.len() - 1];
        let k = expand(&product_eigenvector(&s.ch, word, &[0, 0, 0, 0]), &budget).unwrap();
        let p = mask_matrix(&s.model);
        let dim = p.nrows();
        let mut state = &p * &k;
        let (mut last_norm, mut last_amp) = (f64::INFINITY, f64::INFINITY);
        for m in 0..=s.plan.len() {
            let amp = decoder
                .amplitude_chain(word, &[0, 0, 0, 0], m, &budget)
                .unwrap()
                .norm();
            let norm = state.norm();
            assert!(norm <= last_norm + 1e-12);
            assert!(amp <= norm + 1e-12);
            grew |= amp > last_amp + 1e-12;
            (last_norm, last_amp) = (norm, amp);
            if m < s.plan.len() {
                state = &p
                    * (CMatrix::identity(dim, dim) - projector(&s.plan.tests[m], &budget))
                    * state;
            }
        }
    }
    assert!(
        grew,
        "fixture no longer exhibits a growing diagonal amplitude"
    );
}

#[test]
fn empty_plan_always_exhausts() {
    let s = setup(pure_pair(), 4, 0.3, 0.25, 7, DecoderVariant::RankOne);
    let plan = DecoderPlan::from_tests(4, 2, s.codebook.len(), DecoderVariant::RankOne, Vec::new())
        .unwrap();
    let decoder = SequentialDecoder::new(&plan, &s.ch, &s.model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..200 {
        let t = decoder.simulate_trial(&s.codebook, 0, &mut rng);
        assert!(matches!(
            t.outcome,
            DecodeOutcome::AbortExhausted | DecodeOutcome::AbortAtypical
        ));
    }
    let all_typical = setup(pure_pair(), 2, 3.0, 0.0, 0, DecoderVariant::RankOne);
    let plan = DecoderPlan::from_tests(2, 2, 1, DecoderVariant::RankOne, Vec::new()).unwrap();
    let decoder = SequentialDecoder::new(&plan, &all_typical.ch, &all_typical.model).unwrap();
    for _ in 0..50 {
        let t = decoder.simulate_trial(&all_typical.codebook, 0, &mut rng);
        assert_eq!(t.outcome, DecodeOutcome::AbortExhausted);
    }
}

#[test]
fn transcripts_stop_at_first_yes() {
    let s = setup(pure_pair(), 4, 0.3, 0.5, 2, DecoderVariant::RankOne);
    let decoder = SequentialDecoder::new(&s.plan, &s.ch, &s.model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..500 {
        let sent = trial % s.codebook.len();
        let t = decoder.simulate_trial(&s.codebook, sent, &mut rng);
        let yes = t
            .events
            .iter()
            .filter(|e| matches!(e, seqdecode::decoder::ChainEvent::Test { yes: true, .. }))
            .count();
        assert!(yes <= 1);
        if yes == 1 {
            assert!(matches!(
                t.events.last(),
                Some(seqdecode::decoder::ChainEvent::Test { yes: true, .. })
            ));
            assert!(matches!(t.outcome, DecodeOutcome::Decoded(_)));
        }
    }
}

#[test]
fn classical_bit_decodes_without_error() {
    let budget = Budget::default();
    let ch = CqChannel::builtin(&BuiltinChannel::ClassicalBit { flip: 0.0 }).unwrap();
    let params = TypicalityParams::new(4, 1.0);
    let codebook = sample_codebook(&ch, 4, 0.75, 1.0, 21, true, &budget).unwrap();
    let model = build_typical_model(&ch, &params, &budget).unwrap();
    assert_eq!(model.dim_h, 16);
    let plan = build_plan(
        &codebook,
        &ch,
        &params,
        TestOrdering::Lexicographic,
        DecoderVariant::RankOne,
        &budget,
    )
    .unwrap();
    let povm = build_povm(&plan, &model, &budget).unwrap();
    let report = exact_error_probability(&povm, &ch, &codebook).unwrap();
    assert!(report.error.abs() < 1e-12);
    for p in &report.per_codeword_success {
        assert!((p - 1.0).abs() < 1e-12);
    }
    let decoder = SequentialDecoder::new(&plan, &ch, &model).unwrap();
    let stats = run_trials(&decoder, &codebook, 2000, 5);
    assert_eq!(stats.correct, 2000);
}

#[test]
fn single_codeword_errors_are_aborts() {
    let budget = Budget::default();
    let s = setup(pure_pair(), 4, 0.3, 0.0, 7, DecoderVariant::RankOne);
    assert_eq!(s.codebook.len(), 1);
    let povm = build_povm(&s.plan, &s.model, &budget).unwrap();
    let report = exact_error_probability(&povm, &s.ch, &s.codebook).unwrap();
    assert!(report.misdecode_mass.abs() < 1e-15);
    assert!((report.error - report.abort_mass).abs() < 1e-12);
}

#[test]
fn monte_carlo_within_three_sigma_of_exact() {
    let budget = Budget::default();
    let s = setup(pure_pair(), 4, 0.3, 0.25, 7, DecoderVariant::RankOne);
    let decoder = SequentialDecoder::new(&s.plan, &s.ch, &s.model).unwrap();
    let exact = decoder.exact_error(&s.codebook, &budget).unwrap();
    let stats = run_trials(&decoder, &s.codebook, 10_000, 99);
    assert!(
        stats.consistent_with(exact.error, 3.0),
        "{} vs {}",
        stats.error_rate(),
        exact.error
    );
    assert_eq!(stats, run_trials(&decoder, &s.codebook, 10_000, 99));
}

#[test]
fn frozen_regression_value() {
    let budget = Budget::default();
    let s = setup(pure_pair(), 4, 0.3, 0.25, 7, DecoderVariant::RankOne);
    let povm = build_povm(&s.plan, &s.model, &budget).unwrap();
    let report = exact_error_probability(&povm, &s.ch, &s.codebook).unwrap();
    assert!(
        (report.error - FROZEN_ERROR).abs() < 1e-9,
        "{}",
        report.error
    );
}

const FROZEN_ERROR: f64 = 0.867_302_489_263_761_3;
