//! The analytic bounds of the error analysis, evaluated at finite `n`.
//!
//! Every check records both sides and a flag; nothing here fails on a
//! violated inequality, only on inputs outside a formula's domain.

use serde::Serialize;

use crate::budget::Budget;
use crate::channel::{holevo_chi, CqChannel};
use crate::decoder::spectral_average_amplitude;
use crate::error::{Error, Result};
use crate::typicality::{
    build_rho_tilde, build_typical_model, RhoTilde, TypicalModel, TypicalityParams,
};

/// Absolute slack allowed on every inequality.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePowerCheck {
    pub j: u32,
    pub trace_power: f64,
    /// `2^{n[S(1 - j) + delta(1 + j)]}`.
    pub bound: f64,
    pub holds: bool,
}

/// `2^{n[S(1 - j) + delta(1 + j)]}`.
pub fn trace_power_bound(n: usize, delta: f64, s_rho: f64, j: u32) -> f64 {
    let j = j as f64;
    (n as f64 * (s_rho * (1.0 - j) + delta * (1.0 + j))).exp2()
}

/// `Tr rho_tilde^j <= 2^{n[S(1 - j) + delta(1 + j)]}` for `j = 1..=j_max`.
pub fn check_trace_power_bounds(
    rho_tilde: &RhoTilde,
    model: &TypicalModel,
    j_max: u32,
) -> Vec<TracePowerCheck> {
    (1..=j_max)
        .map(|j| {
            let trace_power = rho_tilde.trace_power(j);
            let bound = trace_power_bound(model.n, model.delta, model.entropy, j);
            TracePowerCheck {
                j,
                trace_power,
                bound,
                holds: trace_power <= bound + BOUND_SLACK,
            }
        })
        .collect()
}

/// Eigenvalue ceiling, dimension ceiling and `rho_tilde <= rho_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubspaceCheck {
    pub max_eigenvalue_bar: f64,
    pub max_eigenvalue_tilde: f64,
    pub eigenvalue_bound: f64,
    pub dim_h: usize,
    pub dimension_bound: f64,
    /// Largest eigenvalue of `rho_tilde - rho_bar`.
    pub dominance_excess: f64,
    pub holds: bool,
}

pub fn check_subspace_bounds(rho_tilde: &RhoTilde, model: &TypicalModel) -> SubspaceCheck {
    let max_bar = model.rho_bar.iter().copied().fold(0.0, f64::max);
    let max_tilde = rho_tilde.eigenvalues().first().copied().unwrap_or(0.0);
    let excess = if model.is_empty() {
        0.0
    } else {
        rho_tilde.max_excess_over(model)
    };
    let eigenvalue_bound = model.eigenvalue_bound();
    let dimension_bound = model.dimension_bound();
    let rel = |bound: f64| bound * (1.0 + 1e-12);
    SubspaceCheck {
        max_eigenvalue_bar: max_bar,
        max_eigenvalue_tilde: max_tilde,
        eigenvalue_bound,
        dim_h: model.dim_h,
        dimension_bound,
        dominance_excess: excess,
        holds: max_bar <= rel(eigenvalue_bound)
            && max_tilde <= rel(eigenvalue_bound) + 1e-10
            && model.dim_h as f64 <= rel(dimension_bound)
            && excess <= 1e-10,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaBound {
    pub zeta: f64,
    /// `2^{2n delta} [(1 + zeta)^m - 1]`.
    pub gamma: f64,
    /// `m zeta 2^{2n delta}`.
    pub gamma_first_order: f64,
    /// `1 - epsilon - gamma`.
    pub lower_bound: f64,
}

/// `gamma` for `m` tests and the resulting floor on the average amplitude.
pub fn gamma_lower_bound(
    n: usize,
    delta: f64,
    epsilon: f64,
    s_rho: f64,
    m: f64,
) -> Result<GammaBound> {
    if s_rho <= delta {
        return Err(Error::validation(format!(
            "S(rho) = {s_rho} does not exceed delta = {delta}"
        )));
    }
    if m.is_nan() || m < 0.0 {
        return Err(Error::validation(format!("m = {m} must be non-negative")));
    }
    let nf = n as f64;
    let log2_zeta = nf * (delta - s_rho);
    let zeta = log2_zeta.exp2();
    let scale = (2.0 * nf * delta).exp2();
    let gamma = scale * (m * zeta.ln_1p()).exp_m1();
    let gamma_first_order = (log2_zeta + 2.0 * nf * delta + m.log2()).exp2();
    Ok(GammaBound {
        zeta,
        gamma,
        gamma_first_order,
        lower_bound: 1.0 - epsilon - gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeCheck {
    pub m: u64,
    /// `Tr[(P - rho_tilde)^m rho_tilde]`.
    pub amplitude: f64,
    pub gamma: f64,
    pub gamma_first_order: f64,
    /// `1 - epsilon_tilde - gamma`.
    pub lower_bound: f64,
    pub holds: bool,
    /// Same inequality with `epsilon = 1 - Tr rho_bar`.
    pub holds_with_bar_epsilon: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementBudget {
    pub log2_m_theory: f64,
    pub m_theory: f64,
    pub log2_m_cap: f64,
    pub m_cap: f64,
    pub within_cap: bool,
}

/// `M_theory = 2^{nR + n sum_j p_j S(rho_j)}` against `m_cap = 2^{n(S - delta)}`.
pub fn measurement_budget(n: usize, rate: f64, ch: &CqChannel, delta: f64) -> MeasurementBudget {
    let nf = n as f64;
    let log2_m_theory = nf * (rate + ch.conditional_entropy());
    let log2_m_cap = nf * (ch.average_entropy() - delta);
    MeasurementBudget {
        log2_m_theory,
        m_theory: log2_m_theory.exp2(),
        log2_m_cap,
        m_cap: log2_m_cap.exp2(),
        within_cap: log2_m_theory <= log2_m_cap + 1e-12,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginSign {
    Positive,
    Boundary,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCondition {
    pub chi: f64,
    /// `chi - delta - R`.
    pub margin: f64,
    pub sign: MarginSign,
}

pub fn rate_condition(ch: &CqChannel, rate: f64, delta: f64) -> RateCondition {
    let chi = holevo_chi(ch);
    let margin = chi - delta - rate;
    let sign = if margin.abs() <= 1e-12 {
        MarginSign::Boundary
    } else if margin > 0.0 {
        MarginSign::Positive
    } else {
        MarginSign::Negative
    };
    RateCondition { chi, margin, sign }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub delta: f64,
    pub entropy: f64,
    /// `1 - Tr rho_bar`.
    pub epsilon_achieved: f64,
    /// `1 - Tr rho_tilde`, the quantity the amplitude bound needs.
    pub epsilon_tilde: f64,
    pub subspace: SubspaceCheck,
    pub trace_powers: Vec<TracePowerCheck>,
    pub amplitudes: Vec<AmplitudeCheck>,
    pub violated: bool,
}

/// Builds `H` and `rho_tilde`, then checks the subspace bounds, the trace
/// power bounds up to `j_max` and the amplitude floor at every `m` in
/// `m_grid`.
pub fn check_amplitude_lower_bound(
    ch: &CqChannel,
    params: &TypicalityParams,
    m_grid: &[u64],
    j_max: u32,
    budget: &Budget,
) -> Result<BoundReport> {
    let model = build_typical_model(ch, params, budget)?;
    let rho_tilde = build_rho_tilde(ch, params, &model, budget)?;
    bound_report(&model, &rho_tilde, m_grid, j_max)
}

/// As [`check_amplitude_lower_bound`] with `H` and `rho_tilde` supplied.
pub fn bound_report(
    model: &TypicalModel,
    rho_tilde: &RhoTilde,
    m_grid: &[u64],
    j_max: u32,
) -> Result<BoundReport> {
    let epsilon_achieved = 1.0 - model.trace_bar;
    let epsilon_tilde = 1.0 - rho_tilde.trace();
    let amplitudes = m_grid
        .iter()
        .map(|&m| {
            let g =
                gamma_lower_bound(model.n, model.delta, epsilon_tilde, model.entropy, m as f64)?;
            let amplitude = spectral_average_amplitude(rho_tilde, m as f64);
            Ok(AmplitudeCheck {
                m,
                amplitude,
                gamma: g.gamma,
                gamma_first_order: g.gamma_first_order,
                lower_bound: g.lower_bound,
                holds: amplitude >= g.lower_bound - BOUND_SLACK,
                holds_with_bar_epsilon: amplitude >= 1.0 - epsilon_achieved - g.gamma - BOUND_SLACK,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let subspace = check_subspace_bounds(rho_tilde, model);
    let trace_powers = check_trace_power_bounds(rho_tilde, model, j_max);
    let violated = !subspace.holds
        || trace_powers.iter().any(|c| !c.holds)
        || amplitudes.iter().any(|c| !c.holds);
    Ok(BoundReport {
        n: model.n,
        delta: model.delta,
        entropy: model.entropy,
        epsilon_achieved,
        epsilon_tilde,
        subspace,
        trace_powers,
        amplitudes,
        violated,
    })
}
