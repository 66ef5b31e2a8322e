//! Typical sequences, conditionally typical outputs, the typical-subspace
//! projector `P`, and the operators `rho_bar` and `rho_tilde`.
//!
//! Everything `n`-fold lives in the product eigenbasis of `rho^{(x)n}`, where
//! `P` is a 0/1 mask over composite indices and `rho_bar` is diagonal. The
//! classical and conditional sets use frequency typicality; the output
//! projector uses an entropy window on eigenvalue products.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::budget::{checked_pow, Budget};
use crate::channel::CqChannel;
use crate::error::{Error, Result};
use crate::linalg::{index_to_digits, CMatrix, CVector, ProductVector, C64, ZERO};

/// Every typicality window is a closed interval widened by this amount so a
/// boundary never splits a degenerate cluster.
pub const WINDOW_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypicalityParams {
    pub n: usize,
    pub delta: f64,
    pub delta_source: Option<f64>,
    pub delta_cond: Option<f64>,
    pub epsilon_target: f64,
}

impl TypicalityParams {
    pub fn new(n: usize, delta: f64) -> Self {
        TypicalityParams {
            n,
            delta,
            delta_source: None,
            delta_cond: None,
            epsilon_target: 0.1,
        }
    }

    pub fn source_delta(&self) -> f64 {
        self.delta_source.unwrap_or(self.delta)
    }

    pub fn cond_delta(&self) -> f64 {
        self.delta_cond.unwrap_or(self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("n must be at least 1"));
        }
        for (name, v) in [
            ("delta", Some(self.delta)),
            ("delta_source", self.delta_source),
            ("delta_cond", self.delta_cond),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::validation(format!(
                        "{name} = {v} must be finite and >= 0"
                    )));
                }
            }
        }
        if !(self.epsilon_target > 0.0 && self.epsilon_target < 1.0) {
            return Err(Error::validation(format!(
                "epsilon_target = {} must lie in (0, 1)",
                self.epsilon_target
            )));
        }
        Ok(())
    }
}

fn within(freq: f64, target: f64, delta: f64) -> bool {
    (freq - target).abs() <= delta + WINDOW_SLACK
}

/// `|count_j / n - p_j| <= delta` for every letter `j`.
pub fn is_frequency_typical(seq: &[usize], p: &[f64], delta: f64) -> bool {
    let n = seq.len() as f64;
    let mut counts = vec![0usize; p.len()];
    for &j in seq {
        if j >= p.len() {
            return false;
        }
        counts[j] += 1;
    }
    counts
        .iter()
        .zip(p)
        .all(|(&c, &pj)| within(c as f64 / n, pj, delta))
}

/// Whether any sequence of length `n` is frequency typical, decided from the
/// per-letter integer count windows without enumeration.
pub fn typical_set_nonempty(p: &[f64], n: usize, delta: f64) -> bool {
    let nf = n as f64;
    let mut lo_sum = 0usize;
    let mut hi_sum = 0usize;
    for &pj in p {
        let lo = (0..=n).find(|&c| within(c as f64 / nf, pj, delta));
        let hi = (0..=n).rev().find(|&c| within(c as f64 / nf, pj, delta));
        match (lo, hi) {
            (Some(lo), Some(hi)) => {
                lo_sum += lo;
                hi_sum += hi;
            }
            _ => return false,
        }
    }
    lo_sum <= n && n <= hi_sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypicalSet {
    pub n: usize,
    pub delta: f64,
    /// Members in lexicographic order, letter 1 most significant.
    pub sequences: Vec<Vec<usize>>,
}

impl TypicalSet {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

/// Enumerates the frequency-typical sequences of length `n`.
pub fn classical_typical_set(
    p: &[f64],
    n: usize,
    delta: f64,
    budget: &Budget,
) -> Result<TypicalSet> {
    crate::linalg::check_distribution(p)?;
    let a = p.len();
    let total = budget.check_enumeration("classical typical set", checked_pow(a, n))?;
    let sequences = (0..total)
        .map(|i| index_to_digits(i, a, n))
        .filter(|seq| is_frequency_typical(seq, p, delta))
        .collect();
    Ok(TypicalSet {
        n,
        delta,
        sequences,
    })
}

/// Conditionally typical eigenlabel sequences `k` for one input sequence `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTypicalSet {
    pub codeword: Vec<usize>,
    pub labels: Vec<Vec<usize>>,
    /// `p_{k|j} = prod_i p_{k_i | j_i}` aligned with `labels`.
    pub probabilities: Vec<f64>,
}

impl ConditionalTypicalSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// `|m_{jk} / n - p_j p_{k|j}| <= delta` for every letter `j` and retained
/// eigenlabel `k`, where `m_{jk}` counts positions carrying letter `j` and
/// label `k`.
pub fn is_conditionally_typical(
    ch: &CqChannel,
    codeword: &[usize],
    labels: &[usize],
    delta: f64,
) -> bool {
    let n = codeword.len() as f64;
    let mut counts: Vec<Vec<usize>> = ch.letters().iter().map(|l| vec![0; l.rank()]).collect();
    for (&j, &k) in codeword.iter().zip(labels) {
        counts[j][k] += 1;
    }
    ch.letters().iter().enumerate().all(|(j, l)| {
        l.weights
            .iter()
            .zip(&counts[j])
            .all(|(&w, &m)| within(m as f64 / n, ch.priors()[j] * w, delta))
    })
}

pub fn conditional_typical_outputs(
    ch: &CqChannel,
    codeword: &[usize],
    delta_cond: f64,
    budget: &Budget,
) -> Result<ConditionalTypicalSet> {
    if codeword.iter().any(|&j| j >= ch.alphabet_size()) {
        return Err(Error::validation("codeword letter outside the alphabet"));
    }
    let ranks: Vec<usize> = codeword.iter().map(|&j| ch.letter(j).rank()).collect();
    let total = ranks.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
    let total = budget.check_enumeration("conditional typical set", total)?;

    let mut labels = Vec::new();
    let mut probabilities = Vec::new();
    let mut digits = vec![0usize; codeword.len()];
    for _ in 0..total {
        if is_conditionally_typical(ch, codeword, &digits, delta_cond) {
            probabilities.push(label_probability(ch, codeword, &digits));
            labels.push(digits.clone());
        }
        // Odometer increment, last letter fastest.
        for pos in (0..digits.len()).rev() {
            digits[pos] += 1;
            if digits[pos] < ranks[pos] {
                break;
            }
            digits[pos] = 0;
        }
    }
    Ok(ConditionalTypicalSet {
        codeword: codeword.to_vec(),
        labels,
        probabilities,
    })
}

pub fn label_probability(ch: &CqChannel, codeword: &[usize], labels: &[usize]) -> f64 {
    codeword
        .iter()
        .zip(labels)
        .map(|(&j, &k)| ch.letter(j).weights[k])
        .product()
}

pub fn sequence_probability(p: &[f64], seq: &[usize]) -> f64 {
    seq.iter().map(|&j| p[j]).product()
}

/// `|k>_j` for a codeword, in the eigenbasis of the average output.
pub fn product_eigenvector(ch: &CqChannel, codeword: &[usize], labels: &[usize]) -> ProductVector {
    ProductVector::from_unit_factors(
        codeword
            .iter()
            .zip(labels)
            .map(|(&j, &k)| ch.letter(j).vectors_avg_basis[k].clone())
            .collect(),
    )
}

/// The typical subspace `H` of `rho^{(x)n}` and the projected state
/// `rho_bar = P rho^{(x)n} P`.
#[derive(Debug, Clone, Serialize)]
pub struct TypicalModel {
    pub n: usize,
    pub letter_dim: usize,
    pub delta: f64,
    pub epsilon_target: f64,
    /// `S(rho)` in bits.
    pub entropy: f64,
    #[serde(skip)]
    pub mask: Vec<bool>,
    /// Composite indices of the basis vectors spanning `H`, ascending.
    #[serde(skip)]
    pub support: Vec<usize>,
    /// Diagonal of `rho_bar` on `support`.
    #[serde(skip)]
    pub rho_bar: Vec<f64>,
    pub trace_bar: f64,
    pub dim_h: usize,
}

impl TypicalModel {
    pub fn full_dim(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `Tr rho_bar > 1 - epsilon_target`.
    pub fn achieves_epsilon(&self) -> bool {
        self.trace_bar > 1.0 - self.epsilon_target
    }

    /// `2^{-n(S - delta)}`, the ceiling on eigenvalues of `rho_bar`.
    pub fn eigenvalue_bound(&self) -> f64 {
        (-(self.n as f64) * (self.entropy - self.delta)).exp2()
    }

    /// `2^{n(S + delta)}`, the ceiling on `dim H`.
    pub fn dimension_bound(&self) -> f64 {
        (self.n as f64 * (self.entropy + self.delta)).exp2()
    }

    /// Position of a composite index inside `support`, if it lies in `H`.
    pub fn support_position(&self, index: usize) -> Option<usize> {
        self.support.binary_search(&index).ok()
    }

    /// Amplitudes `<a|x>` for every `a` in `H`, from the product structure
    /// of `x` (both in the eigenbasis of `rho`).
    pub fn compress(&self, x: &ProductVector) -> Vec<C64> {
        self.support
            .iter()
            .map(|&a| x.component(&index_to_digits(a, self.letter_dim, self.n)))
            .collect()
    }
}

pub fn build_typical_model(
    ch: &CqChannel,
    params: &TypicalityParams,
    budget: &Budget,
) -> Result<TypicalModel> {
    params.validate()?;
    let d = ch.letter_dim();
    let n = params.n;
    let full = budget.check_dim(d, n)?;
    let eig = &ch.average_spectrum().eigenvalues;
    let log_eig: Vec<f64> = eig
        .iter()
        .map(|&p| if p > 0.0 { p.log2() } else { f64::NEG_INFINITY })
        .collect();
    let entropy = ch.average_entropy();
    let lo = entropy - params.delta - WINDOW_SLACK;
    let hi = entropy + params.delta + WINDOW_SLACK;

    let mut mask = vec![false; full];
    let mut support = Vec::new();
    let mut rho_bar = Vec::new();
    for (index, slot) in mask.iter_mut().enumerate() {
        let digits = index_to_digits(index, d, n);
        let log_p: f64 = digits.iter().map(|&k| log_eig[k]).sum();
        let rate = -log_p / n as f64;
        if rate.is_finite() && rate >= lo && rate <= hi {
            *slot = true;
            support.push(index);
            rho_bar.push(digits.iter().map(|&k| eig[k]).product());
        }
    }
    let trace_bar = rho_bar.iter().sum();
    Ok(TypicalModel {
        n,
        letter_dim: d,
        delta: params.delta,
        epsilon_target: params.epsilon_target,
        entropy,
        dim_h: support.len(),
        mask,
        support,
        rho_bar,
        trace_bar,
    })
}

/// A Hermitian operator supported on `H`, stored in the coordinates of the
/// basis vectors listed in `TypicalModel::support`.
#[derive(Debug, Clone)]
pub enum MaskedOperator {
    Diagonal(Vec<f64>),
    Dense(CMatrix),
}

/// `rho_tilde = P (sum over typical j, k of p_j p_{k|j} |k>_j<k|) P`.
#[derive(Debug)]
pub struct RhoTilde {
    support: Vec<usize>,
    op: MaskedOperator,
    spectrum: OnceLock<Vec<f64>>,
}

impl RhoTilde {
    pub fn from_parts(support: Vec<usize>, op: MaskedOperator) -> Self {
        RhoTilde {
            support,
            op,
            spectrum: OnceLock::new(),
        }
    }

    pub fn operator(&self) -> &MaskedOperator {
        &self.op
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn dim_h(&self) -> usize {
        self.support.len()
    }

    pub fn trace(&self) -> f64 {
        match &self.op {
            MaskedOperator::Diagonal(v) => v.iter().sum(),
            MaskedOperator::Dense(m) => m.diagonal().iter().map(|z| z.re).sum(),
        }
    }

    /// Restriction to `H` as a dense `dim_H x dim_H` matrix.
    pub fn to_dense(&self) -> CMatrix {
        match &self.op {
            MaskedOperator::Diagonal(v) => CMatrix::from_diagonal(&CVector::from_iterator(
                v.len(),
                v.iter().map(|&x| C64::new(x, 0.0)),
            )),
            MaskedOperator::Dense(m) => m.clone(),
        }
    }

    /// Embedding into the full `d^n x d^n` space (eigenbasis of `rho^{(x)n}`).
    pub fn embed(&self, full_dim: usize) -> CMatrix {
        let h = self.to_dense();
        let mut out = CMatrix::zeros(full_dim, full_dim);
        for (r, &a) in self.support.iter().enumerate() {
            for (c, &b) in self.support.iter().enumerate() {
                out[(a, b)] = h[(r, c)];
            }
        }
        out
    }

    /// Eigenvalues on `H`, descending; cached after the first call.
    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.get_or_init(|| {
            let mut ev: Vec<f64> = match &self.op {
                MaskedOperator::Diagonal(v) => v.clone(),
                MaskedOperator::Dense(m) if m.nrows() == 0 => Vec::new(),
                MaskedOperator::Dense(m) => SymmetricEigen::new(m.clone())
                    .eigenvalues
                    .iter()
                    .copied()
                    .collect(),
            };
            ev.sort_by(|a, b| b.total_cmp(a));
            ev
        })
    }

    /// `Tr rho_tilde^j` from the spectrum.
    pub fn trace_power(&self, j: u32) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|&l| l.max(0.0).powi(j as i32))
            .sum()
    }

    /// Largest eigenvalue of `rho_tilde - rho_bar`; non-positive up to
    /// roundoff when `rho_tilde <= rho_bar`.
    pub fn max_excess_over(&self, model: &TypicalModel) -> f64 {
        match &self.op {
            MaskedOperator::Diagonal(v) => v
                .iter()
                .zip(&model.rho_bar)
                .map(|(t, b)| t - b)
                .fold(f64::NEG_INFINITY, f64::max),
            MaskedOperator::Dense(m) if m.nrows() == 0 => f64::NEG_INFINITY,
            MaskedOperator::Dense(m) => {
                let mut diff = m.clone();
                for (i, b) in model.rho_bar.iter().enumerate() {
                    diff[(i, i)] -= C64::new(*b, 0.0);
                }
                SymmetricEigen::new(diff)
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }
}

/// Builds `rho_tilde` restricted to `H`.
///
/// Every matrix element `<a|X|b>` of the unprojected sum is invariant under
/// simultaneous permutation of the letters of `a`, `b` and the summed
/// sequences, so it depends only on the joint type of `(a_i, b_i)`. Each joint
/// type is evaluated once by a dynamic program over letter positions whose
/// state is the running count of every (letter, eigenlabel) pair; the count
/// constraints of both typicality rules are applied to the final state.
pub fn build_rho_tilde(
    ch: &CqChannel,
    params: &TypicalityParams,
    model: &TypicalModel,
    budget: &Budget,
) -> Result<RhoTilde> {
    params.validate()?;
    if model.n != params.n || model.letter_dim != ch.letter_dim() {
        return Err(Error::validation(
            "typical model does not match channel/parameters",
        ));
    }
    let d = ch.letter_dim();
    let n = params.n;
    let dp = PairTypeSum::new(ch, params)?;
    let digits: Vec<Vec<usize>> = model
        .support
        .iter()
        .map(|&a| index_to_digits(a, d, n))
        .collect();
    let mut cache: HashMap<u64, C64> = HashMap::new();
    let mut entry = |a: &[usize], b: &[usize]| -> C64 {
        let key = joint_type_key(a, b, d, n);
        *cache.entry(key).or_insert_with(|| dp.evaluate(a, b))
    };

    let op = if ch.is_jointly_diagonal() {
        MaskedOperator::Diagonal(digits.iter().map(|a| entry(a, a).re).collect())
    } else {
        let dim = digits.len();
        if dim > budget.max_dim / 2 {
            return Err(Error::resource(format!(
                "dense rho_tilde on a {dim}-dimensional typical subspace exceeds max_dim / 2 = {}",
                budget.max_dim / 2
            )));
        }
        let mut m = CMatrix::zeros(dim, dim);
        for r in 0..dim {
            m[(r, r)] = C64::new(entry(&digits[r], &digits[r]).re, 0.0);
            for c in r + 1..dim {
                let z = entry(&digits[r], &digits[c]);
                m[(r, c)] = z;
                m[(c, r)] = z.conj();
            }
        }
        MaskedOperator::Dense(m)
    };
    Ok(RhoTilde::from_parts(model.support.clone(), op))
}

fn joint_type_key(a: &[usize], b: &[usize], d: usize, n: usize) -> u64 {
    let mut counts = vec![0u64; d * d];
    for (&x, &y) in a.iter().zip(b) {
        counts[x * d + y] += 1;
    }
    let radix = n as u64 + 1;
    counts
        .iter()
        .fold(0u64, |acc, &c| acc.wrapping_mul(radix).wrapping_add(c))
}

/// Sum over typical (letter, eigenlabel) sequences of a product of
/// per-position factors, organized by pair-count states.
struct PairTypeSum {
    n: usize,
    /// Per pair `u = (j, k)`: letter index, weight `p_j p_{k|j}`, vector.
    pair_letter: Vec<usize>,
    pair_weight: Vec<f64>,
    pair_vec: Vec<CVector>,
    priors: Vec<f64>,
    delta_source: f64,
    delta_cond: f64,
    radix_pows: Vec<usize>,
    states: usize,
}

impl PairTypeSum {
    fn new(ch: &CqChannel, params: &TypicalityParams) -> Result<Self> {
        let mut pair_letter = Vec::new();
        let mut pair_weight = Vec::new();
        let mut pair_vec = Vec::new();
        for (j, l) in ch.letters().iter().enumerate() {
            for (w, v) in l.weights.iter().zip(&l.vectors_avg_basis) {
                pair_letter.push(j);
                pair_weight.push(ch.priors()[j] * w);
                pair_vec.push(v.clone());
            }
        }
        let radix = params.n + 1;
        let mut radix_pows = Vec::with_capacity(pair_letter.len());
        let mut states = 1usize;
        for _ in &pair_letter {
            radix_pows.push(states);
            states = states
                .checked_mul(radix)
                .filter(|&s| s <= 1 << 24)
                .ok_or_else(|| {
                    Error::resource("too many (letter, eigenlabel) count states for rho_tilde")
                })?;
        }
        Ok(PairTypeSum {
            n: params.n,
            pair_letter,
            pair_weight,
            pair_vec,
            priors: ch.priors().to_vec(),
            delta_source: params.source_delta(),
            delta_cond: params.cond_delta(),
            radix_pows,
            states,
        })
    }

    fn count(&self, state: usize, u: usize) -> usize {
        (state / self.radix_pows[u]) % (self.n + 1)
    }

    /// Upper-window pruning: a count can only grow along the DP.
    fn may_extend(&self, state: usize) -> bool {
        let nf = self.n as f64;
        let mut letter_counts = vec![0usize; self.priors.len()];
        for u in 0..self.pair_letter.len() {
            let c = self.count(state, u);
            if c as f64 / nf - self.pair_weight[u] > self.delta_cond + WINDOW_SLACK {
                return false;
            }
            letter_counts[self.pair_letter[u]] += c;
        }
        letter_counts
            .iter()
            .zip(&self.priors)
            .all(|(&c, &p)| c as f64 / nf - p <= self.delta_source + WINDOW_SLACK)
    }

    fn accepts(&self, state: usize) -> bool {
        let nf = self.n as f64;
        let mut letter_counts = vec![0usize; self.priors.len()];
        for u in 0..self.pair_letter.len() {
            let c = self.count(state, u);
            if !within(c as f64 / nf, self.pair_weight[u], self.delta_cond) {
                return false;
            }
            letter_counts[self.pair_letter[u]] += c;
        }
        letter_counts
            .iter()
            .zip(&self.priors)
            .all(|(&c, &p)| within(c as f64 / nf, p, self.delta_source))
    }

    /// `sum over accepted pair sequences u of prod_i w_{u_i} <a_i|phi_{u_i}><phi_{u_i}|b_i>`.
    fn evaluate(&self, a: &[usize], b: &[usize]) -> C64 {
        let pairs = self.pair_letter.len();
        let mut cur: HashMap<usize, C64> = HashMap::new();
        cur.insert(0, C64::new(1.0, 0.0));
        for (&x, &y) in a.iter().zip(b) {
            let factors: Vec<C64> = (0..pairs)
                .map(|u| self.pair_vec[u][x] * self.pair_vec[u][y].conj() * self.pair_weight[u])
                .collect();
            let mut next: HashMap<usize, C64> = HashMap::with_capacity(cur.len() * 2);
            for (&state, &val) in &cur {
                for (u, &f) in factors.iter().enumerate() {
                    if f == ZERO {
                        continue;
                    }
                    let s = state + self.radix_pows[u];
                    if !self.may_extend(s) {
                        continue;
                    }
                    *next.entry(s).or_insert(ZERO) += val * f;
                }
            }
            cur = next;
        }
        debug_assert!(cur.keys().all(|&s| s < self.states));
        cur.iter()
            .filter(|(&s, _)| self.accepts(s))
            .fold(ZERO, |acc, (_, &v)| acc + v)
    }
}
