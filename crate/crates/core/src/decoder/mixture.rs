//! The codebook-averaged chain: `rho_tilde` as a mixture of projected test
//! projectors, and the average amplitude `Tr[(P - rho_tilde)^m rho_tilde]`.

use serde::Serialize;

use crate::budget::Budget;
use crate::channel::CqChannel;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, CMatrix, C64};
use crate::typicality::{
    build_rho_tilde, build_typical_model, classical_typical_set, conditional_typical_outputs,
    product_eigenvector, sequence_probability, MaskedOperator, RhoTilde, TypicalModel,
    TypicalityParams,
};

/// Alternating binomial sums lose about `log10 C(m, m/2)` digits; beyond
/// this the binomial form is refused.
pub const MAX_BINOMIAL_M: usize = 64;

/// `sum over typical (j, k) of pi * P |k>_j<k| P` on `H`, accumulated term by
/// term from the product vectors.
pub fn mixture_sum(
    ch: &CqChannel,
    params: &TypicalityParams,
    model: &TypicalModel,
    budget: &Budget,
) -> Result<CMatrix> {
    let dim = model.dim_h;
    if dim > budget.max_dim / 2 {
        return Err(Error::resource(format!(
            "mixture sum on a {dim}-dimensional typical subspace"
        )));
    }
    let sources = classical_typical_set(ch.priors(), params.n, params.source_delta(), budget)?;
    let mut acc = CMatrix::zeros(dim, dim);
    for word in &sources.sequences {
        let p_word = sequence_probability(ch.priors(), word);
        let cts = conditional_typical_outputs(ch, word, params.cond_delta(), budget)?;
        for (k, &p) in cts.labels.iter().zip(&cts.probabilities) {
            let v = model.compress(&product_eigenvector(ch, word, k));
            let w = p_word * p;
            for c in 0..dim {
                let vc = v[c].conj() * w;
                if vc == C64::new(0.0, 0.0) {
                    continue;
                }
                for r in 0..dim {
                    acc[(r, c)] += v[r] * vc;
                }
            }
        }
    }
    Ok(acc)
}

/// `max |sum_l pi_l P P_l P - rho_tilde|` with both sides built
/// independently: the left term by term, the right by [`build_rho_tilde`].
pub fn verify_mixture_identity(
    ch: &CqChannel,
    params: &TypicalityParams,
    budget: &Budget,
) -> Result<f64> {
    let model = build_typical_model(ch, params, budget)?;
    let tilde = build_rho_tilde(ch, params, &model, budget)?;
    let lhs = mixture_sum(ch, params, &model, budget)?;
    Ok(max_abs(&(lhs - tilde.to_dense())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeForms {
    pub m: usize,
    /// `Tr[(P - rho_tilde)^m rho_tilde]` by repeated multiplication.
    pub trace_form: f64,
    /// `sum_k C(m, k) (-1)^k Tr[rho_tilde^{k+1}]`.
    pub binomial_form: f64,
}

impl AmplitudeForms {
    pub fn discrepancy(&self) -> f64 {
        (self.trace_form - self.binomial_form).abs()
    }
}

pub fn average_amplitude(
    rho_tilde: &RhoTilde,
    model: &TypicalModel,
    m: usize,
) -> Result<AmplitudeForms> {
    if rho_tilde.support() != model.support.as_slice() {
        return Err(Error::validation(
            "rho_tilde and typical model have different supports",
        ));
    }
    if m > MAX_BINOMIAL_M {
        return Err(Error::validation(format!(
            "m = {m} exceeds {MAX_BINOMIAL_M} for the alternating binomial form"
        )));
    }
    // On H the projector P is the identity.
    let trace_form = match rho_tilde.operator() {
        MaskedOperator::Diagonal(v) => v
            .iter()
            .map(|&l| (0..m).fold(l, |acc, _| acc - l * acc))
            .sum(),
        MaskedOperator::Dense(t) => {
            let mut b = t.clone();
            for _ in 0..m {
                b = &b - t * &b;
            }
            b.diagonal().iter().map(|z| z.re).sum()
        }
    };

    let mut sum = NeumaierSum::default();
    let mut binom = 1.0f64;
    for k in 0..=m {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum.add(sign * binom * rho_tilde.trace_power(k as u32 + 1));
        binom = binom * (m - k) as f64 / (k + 1) as f64;
    }
    Ok(AmplitudeForms {
        m,
        trace_form,
        binomial_form: sum.total(),
    })
}

/// `sum_i lambda_i (1 - lambda_i)^m` from the spectrum of `rho_tilde`; valid
/// for any `m`.
pub fn spectral_average_amplitude(rho_tilde: &RhoTilde, m: f64) -> f64 {
    rho_tilde
        .eigenvalues()
        .iter()
        .map(|&l| {
            let l = l.clamp(0.0, 1.0);
            l * (m * (-l).ln_1p()).exp()
        })
        .sum()
}

#[derive(Debug, Default, Clone, Copy)]
struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
