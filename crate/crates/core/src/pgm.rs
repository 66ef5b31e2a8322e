//! Pretty-good (square-root) measurement over codeword output states.

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::budget::Budget;
use crate::channel::CqChannel;
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::linalg::{kron_all, max_abs, CMatrix, C64, ZERO};

/// Eigenvalues below this fraction of the largest are treated as kernel.
pub const PSEUDO_INVERSE_CUTOFF: f64 = 1e-12;

/// `G_s = S^{-1/2} q rho_s S^{-1/2}` with `S = sum_s q rho_s` and `q = 1/N`,
/// plus the residual `1 - sum_s G_s` on the kernel of `S`.
#[derive(Debug, Clone)]
pub struct PgmSet {
    pub elements: Vec<CMatrix>,
    pub residual: CMatrix,
}

impl PgmSet {
    pub fn completeness_error(&self) -> f64 {
        let dim = self.residual.nrows();
        let mut acc = self.residual.clone();
        for g in &self.elements {
            acc += g;
        }
        max_abs(&(acc - CMatrix::identity(dim, dim)))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.elements
            .iter()
            .chain(std::iter::once(&self.residual))
            .map(min_eig)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PgmRoute {
    Dense,
    Gram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PgmReport {
    pub error: f64,
    pub route: PgmRoute,
    pub per_codeword_success: Vec<f64>,
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn min_eig(m: &CMatrix) -> f64 {
    SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `f(A)` for Hermitian PSD `A`, applied to eigenvalues above the relative
/// cutoff and zero elsewhere.
fn spectral_map(a: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let dim = a.nrows();
    let mut out = CMatrix::zeros(dim, dim);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= PSEUDO_INVERSE_CUTOFF * top {
            continue;
        }
        let v = eig.eigenvectors.column(i);
        out += (v * v.adjoint()).scale(f(l));
    }
    out
}

fn codeword_states(ch: &CqChannel, codebook: &Codebook) -> Vec<CMatrix> {
    let letters: Vec<CMatrix> = ch.outputs().iter().map(|h| h.matrix().clone()).collect();
    codebook
        .codewords
        .iter()
        .map(|w| kron_all(w.iter().map(|&j| &letters[j])))
        .collect()
}

pub fn build_pgm(ch: &CqChannel, codebook: &Codebook, budget: &Budget) -> Result<PgmSet> {
    codebook.check_against(ch)?;
    let dim = budget.check_dense_dim(ch.letter_dim(), codebook.n)?;
    let q = 1.0 / codebook.len() as f64;
    let states = codeword_states(ch, codebook);
    let mut sigma = CMatrix::zeros(dim, dim);
    for rho in &states {
        sigma += rho.scale(q);
    }
    let inv_sqrt = spectral_map(&sigma, |l| 1.0 / l.sqrt());
    let elements: Vec<CMatrix> = states
        .iter()
        .map(|rho| hermitian_part(&(&inv_sqrt * rho.scale(q) * &inv_sqrt)))
        .collect();
    let mut residual = CMatrix::identity(dim, dim);
    for g in &elements {
        residual -= g;
    }
    Ok(PgmSet { elements, residual })
}

/// `1 - (1/N) sum_s Tr[G_s rho_s]` from the dense measurement.
pub fn pgm_error_dense(ch: &CqChannel, codebook: &Codebook, budget: &Budget) -> Result<PgmReport> {
    let pgm = build_pgm(ch, codebook, budget)?;
    let states = codeword_states(ch, codebook);
    let success: Vec<f64> = pgm
        .elements
        .iter()
        .zip(&states)
        .map(|(g, rho)| (g * rho).trace().re)
        .collect();
    Ok(report(success, PgmRoute::Dense))
}

/// Same quantity from the Gram matrix of the weighted product eigenvectors
/// `sqrt(q p_{k|s}) |k>_s`: success is `sum_s sum_{a, b in s} |sqrt(G)_{ab}|^2`.
/// Cost depends on the number of vectors, not on `d^n`.
pub fn pgm_error_gram(ch: &CqChannel, codebook: &Codebook, budget: &Budget) -> Result<PgmReport> {
    codebook.check_against(ch)?;
    let q = 1.0 / codebook.len() as f64;
    let per_word = codebook.codewords.iter().try_fold(0usize, |acc, w| {
        w.iter()
            .try_fold(1usize, |r, &j| r.checked_mul(ch.letter(j).rank()))
            .and_then(|r| acc.checked_add(r))
    });
    let total = budget.check_enumeration("PGM Gram vectors", per_word)?;
    if total > budget.max_dense_dim {
        return Err(Error::resource(format!(
            "Gram matrix of {total} vectors exceeds max_dense_dim = {}",
            budget.max_dense_dim
        )));
    }

    // Letter overlaps <k|_i |k'>_j for all letters and labels.
    let overlap = |i: usize, k: usize, j: usize, kp: usize| -> C64 {
        let a = &ch.letter(i).vectors[k];
        let b = &ch.letter(j).vectors[kp];
        a.dotc(b)
    };

    struct Entry {
        owner: usize,
        labels: Vec<usize>,
        weight: f64,
    }
    let mut entries = Vec::with_capacity(total);
    for (s, w) in codebook.codewords.iter().enumerate() {
        let ranks: Vec<usize> = w.iter().map(|&j| ch.letter(j).rank()).collect();
        let count: usize = ranks.iter().product();
        let mut labels = vec![0usize; w.len()];
        for _ in 0..count {
            let p: f64 = w
                .iter()
                .zip(&labels)
                .map(|(&j, &k)| ch.letter(j).weights[k])
                .product();
            entries.push(Entry {
                owner: s,
                labels: labels.clone(),
                weight: q * p,
            });
            for pos in (0..labels.len()).rev() {
                labels[pos] += 1;
                if labels[pos] < ranks[pos] {
                    break;
                }
                labels[pos] = 0;
            }
        }
    }

    let words = &codebook.codewords;
    let gram = CMatrix::from_fn(total, total, |a, b| {
        let (ea, eb) = (&entries[a], &entries[b]);
        let mut z = C64::new((ea.weight * eb.weight).sqrt(), 0.0);
        for pos in 0..codebook.n {
            z *= overlap(
                words[ea.owner][pos],
                ea.labels[pos],
                words[eb.owner][pos],
                eb.labels[pos],
            );
            if z == ZERO {
                break;
            }
        }
        z
    });
    let root = spectral_map(&gram, f64::sqrt);
    let mut success = vec![0.0; codebook.len()];
    for a in 0..total {
        for b in 0..total {
            if entries[a].owner == entries[b].owner {
                success[entries[a].owner] += root[(a, b)].norm_sqr();
            }
        }
    }
    // Per-codeword success is Tr[G_s rho_s] = N * sum_{a,b in s} |sqrt(G)_ab|^2.
    let n = codebook.len() as f64;
    success.iter_mut().for_each(|p| *p *= n);
    Ok(report(success, PgmRoute::Gram))
}

/// Gram route when it fits, dense otherwise.
pub fn pgm_error_probability(
    ch: &CqChannel,
    codebook: &Codebook,
    budget: &Budget,
) -> Result<PgmReport> {
    match pgm_error_gram(ch, codebook, budget) {
        Err(Error::Resource(_)) => pgm_error_dense(ch, codebook, budget),
        other => other,
    }
}

fn report(success: Vec<f64>, route: PgmRoute) -> PgmReport {
    let mean = success.iter().sum::<f64>() / success.len() as f64;
    PgmReport {
        error: 1.0 - mean,
        route,
        per_codeword_success: success,
    }
}
