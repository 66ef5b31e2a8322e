//! Dense POVM of the whole chain, used as an exact oracle at small `n`.

use nalgebra::SymmetricEigen;

use super::chain::ErrorReport;
use super::DecoderPlan;
use crate::budget::Budget;
use crate::channel::CqChannel;
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::linalg::{expand_unchecked, kron_all, max_abs, CMatrix, C64};
use crate::typicality::TypicalModel;

/// Elements `E_l = K_l^dagger Q_l K_l` with `K_l = P (1 - Q_{l-1}) P ... P (1 - Q_1) P`,
/// and the abort element `E_0 = 1 - sum_l E_l`.
#[derive(Debug, Clone)]
pub struct PovmSet {
    pub elements: Vec<CMatrix>,
    pub abort: CMatrix,
    /// Codeword decoded by each element.
    pub owners: Vec<usize>,
    pub codebook_size: usize,
}

impl PovmSet {
    pub fn dim(&self) -> usize {
        self.abort.nrows()
    }

    /// `max |sum_l E_l + E_0 - 1|`.
    pub fn completeness_error(&self) -> f64 {
        let dim = self.dim();
        let mut acc = self.abort.clone();
        for e in &self.elements {
            acc += e;
        }
        max_abs(&(acc - CMatrix::identity(dim, dim)))
    }

    /// Smallest eigenvalue over every element including `E_0`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.elements
            .iter()
            .chain(std::iter::once(&self.abort))
            .map(|e| {
                let h = (e + e.adjoint()).scale(0.5);
                SymmetricEigen::new(h)
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn build_povm(plan: &DecoderPlan, model: &TypicalModel, budget: &Budget) -> Result<PovmSet> {
    if plan.n != model.n || plan.letter_dim != model.letter_dim {
        return Err(Error::validation(
            "plan and typical model disagree on n or d",
        ));
    }
    let dim = budget.check_dense_dim(plan.letter_dim, plan.n)?;
    let mask = CMatrix::from_diagonal(&crate::linalg::CVector::from_iterator(
        dim,
        model.mask.iter().map(|&m| {
            if m {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }),
    ));
    let identity = CMatrix::identity(dim, dim);
    let mut chain = mask.clone();
    let mut elements = Vec::with_capacity(plan.len());
    for test in &plan.tests {
        let mut q = CMatrix::zeros(dim, dim);
        for v in &test.vectors {
            let e = expand_unchecked(v);
            q += &e * e.adjoint();
        }
        let e = chain.adjoint() * &q * &chain;
        elements.push((&e + e.adjoint()).scale(0.5));
        chain = &mask * (&identity - &q) * chain;
    }
    let mut abort = identity;
    for e in &elements {
        abort -= e;
    }
    Ok(PovmSet {
        elements,
        abort,
        owners: plan.tests.iter().map(|t| t.codeword).collect(),
        codebook_size: plan.codebook_size,
    })
}

/// Average error `1 - (1/N) sum_s sum_{l owned by s} Tr[E_l rho_{j_s}]` with
/// the exact product output states.
pub fn exact_error_probability(
    povm: &PovmSet,
    ch: &CqChannel,
    codebook: &Codebook,
) -> Result<ErrorReport> {
    if povm.codebook_size != codebook.len() {
        return Err(Error::validation(format!(
            "POVM built for {} codewords, codebook has {}",
            povm.codebook_size,
            codebook.len()
        )));
    }
    let d = ch.letter_dim();
    if crate::budget::checked_pow(d, codebook.n) != Some(povm.dim()) {
        return Err(Error::validation(
            "POVM dimension does not match the codebook's d^n",
        ));
    }
    let letter_states: Vec<CMatrix> = (0..ch.alphabet_size())
        .map(|j| ch.output_avg_basis(j))
        .collect();
    let tr = |a: &CMatrix, b: &CMatrix| -> f64 {
        // Tr[A B] for Hermitian A, B.
        a.iter()
            .zip(b.transpose().iter())
            .map(|(x, y)| (x * y).re)
            .sum()
    };
    let mut success = Vec::with_capacity(codebook.len());
    let mut abort = Vec::with_capacity(codebook.len());
    let mut misdecode = Vec::with_capacity(codebook.len());
    for (s, word) in codebook.codewords.iter().enumerate() {
        let rho = kron_all(word.iter().map(|&j| &letter_states[j]));
        let mut ok = 0.0;
        let mut wrong = 0.0;
        for (e, &owner) in povm.elements.iter().zip(&povm.owners) {
            let p = tr(e, &rho);
            if owner == s {
                ok += p;
            } else {
                wrong += p;
            }
        }
        success.push(ok);
        misdecode.push(wrong);
        abort.push(tr(&povm.abort, &rho));
    }
    Ok(ErrorReport::from_parts(success, abort, misdecode))
}
