//! The four batch commands behind the CLI: capacity, verify, simulate and
//! compare. Each returns rows in a fixed, sorted order; grid points that
//! cannot run are kept as skipped rows with a reason.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{bound_report, check_subspace_bounds};
use crate::budget::Budget;
use crate::channel::{holevo_chi, CqChannel};
use crate::codebook::{sample_codebook, Codebook};
use crate::config::{ExactMode, ExperimentConfig, Method, OrderingMode, OutputFormat};
use crate::decoder::{
    average_amplitude, build_plan, build_povm, mixture_sum, run_trials_with, DecoderPlan,
    DecoderVariant, ErrorReport, SequentialDecoder, TestOrdering, TrialStats,
};
use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::pgm::pgm_error_probability;
use crate::typicality::{
    build_rho_tilde, build_typical_model, MaskedOperator, RhoTilde, TypicalModel, TypicalityParams,
};

/// Estimated multiply-adds above which `exact = "auto"` skips an oracle.
pub const EXACT_WORK_LIMIT: f64 = 5e8;

/// Largest `m` used for the two-form amplitude cross-check.
pub const AMPLITUDE_FORM_M: u64 = 20;

/// `z` of the reported binomial confidence interval.
pub const CI_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Pass,
    Fail,
    Info,
    Skipped,
}

/// Seed for grid point `index`: stream `index` of a ChaCha generator keyed by
/// the master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.random()
}

fn skip_reason(e: &Error) -> String {
    match e {
        Error::Resource(m) => format!("budget: {m}"),
        other => other.to_string(),
    }
}

fn opt_variant(m: Method) -> Option<DecoderVariant> {
    match m {
        Method::RankOne => Some(DecoderVariant::RankOne),
        Method::Subspace => Some(DecoderVariant::Subspace),
        Method::Pgm => None,
    }
}

// ---------------------------------------------------------------- capacity

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityRow {
    pub channel: String,
    pub letter_dim: usize,
    pub alphabet: usize,
    pub chi: f64,
    pub entropy: f64,
    pub conditional_entropy: f64,
}

pub fn cmd_capacity(cfg: &ExperimentConfig) -> Result<Vec<CapacityRow>> {
    Ok(cfg
        .load_channels()?
        .iter()
        .map(|ch| CapacityRow {
            channel: ch.name().to_string(),
            letter_dim: ch.letter_dim(),
            alphabet: ch.alphabet_size(),
            chi: holevo_chi(ch),
            entropy: ch.average_entropy(),
            conditional_entropy: ch.conditional_entropy(),
        })
        .collect())
}

// ------------------------------------------------------------------ verify

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub point: u64,
    pub channel: String,
    pub n: usize,
    pub delta: f64,
    pub rate: Option<f64>,
    pub check: &'static str,
    pub status: Status,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

struct VerifyPoint<'a> {
    index: u64,
    channel: &'a CqChannel,
    n: usize,
    delta: f64,
}

impl VerifyPoint<'_> {
    fn row(&self, check: &'static str, status: Status) -> VerifyRow {
        VerifyRow {
            point: self.index,
            channel: self.channel.name().to_string(),
            n: self.n,
            delta: self.delta,
            rate: None,
            check,
            status,
            value: None,
            threshold: None,
            detail: String::new(),
        }
    }

    fn measured(
        &self,
        check: &'static str,
        value: f64,
        threshold: f64,
        ok: bool,
        detail: String,
    ) -> VerifyRow {
        VerifyRow {
            value: Some(value),
            threshold: Some(threshold),
            detail,
            ..self.row(check, if ok { Status::Pass } else { Status::Fail })
        }
    }

    fn skipped(&self, check: &'static str, reason: String) -> VerifyRow {
        VerifyRow {
            detail: reason,
            ..self.row(check, Status::Skipped)
        }
    }
}

const VERIFY_CHECKS: [&str; 6] = [
    "subspace_bounds",
    "mixture_identity",
    "amplitude_forms",
    "trace_power_bounds",
    "amplitude_lower_bound",
    "povm",
];

fn mixture_work(ch: &CqChannel, model: &TypicalModel) -> f64 {
    let r = ch.letters().iter().map(|l| l.rank()).max().unwrap_or(1) as f64;
    let terms = (ch.alphabet_size() as f64 * r).powi(model.n as i32);
    terms * (model.dim_h as f64).powi(2)
}

fn amplitude_form_work(tilde: &RhoTilde) -> f64 {
    match tilde.operator() {
        MaskedOperator::Diagonal(v) => v.len() as f64 * AMPLITUDE_FORM_M as f64,
        MaskedOperator::Dense(m) => (m.nrows() as f64).powi(3) * AMPLITUDE_FORM_M as f64,
    }
}

fn verify_point(cfg: &ExperimentConfig, budget: &Budget, p: &VerifyPoint<'_>) -> Vec<VerifyRow> {
    let ch = p.channel;
    let params = point_params(cfg, p.n, p.delta);
    let skip_all = |reason: String| -> Vec<VerifyRow> {
        std::iter::once(p.skipped("typical_model", reason.clone()))
            .chain(VERIFY_CHECKS.iter().map(|c| p.skipped(c, reason.clone())))
            .collect()
    };
    let model = match build_typical_model(ch, &params, budget) {
        Ok(m) => m,
        Err(e) => return skip_all(skip_reason(&e)),
    };
    if model.is_empty() {
        return skip_all("empty_window".into());
    }
    let tilde = match build_rho_tilde(ch, &params, &model, budget) {
        Ok(t) => t,
        Err(e) => return skip_all(skip_reason(&e)),
    };
    let mut rows = vec![VerifyRow {
        value: Some(model.trace_bar),
        threshold: Some(1.0 - cfg.epsilon_target),
        detail: format!(
            "dim_h={} trace_tilde={} achieves_epsilon={}",
            model.dim_h,
            tilde.trace(),
            model.achieves_epsilon()
        ),
        ..p.row("typical_model", Status::Info)
    }];

    let sub = check_subspace_bounds(&tilde, &model);
    rows.push(p.measured(
        "subspace_bounds",
        sub.dominance_excess,
        1e-10,
        sub.holds,
        format!(
            "max_eig_bar={} max_eig_tilde={} eig_bound={} dim_h={} dim_bound={}",
            sub.max_eigenvalue_bar,
            sub.max_eigenvalue_tilde,
            sub.eigenvalue_bound,
            sub.dim_h,
            sub.dimension_bound
        ),
    ));

    let auto = cfg.exact == ExactMode::Auto;
    if cfg.exact == ExactMode::Never || (auto && mixture_work(ch, &model) > EXACT_WORK_LIMIT) {
        rows.push(p.skipped("mixture_identity", "work_limit".into()));
    } else {
        match mixture_sum(ch, &params, &model, budget) {
            Ok(lhs) => {
                let err = max_abs(&(lhs - tilde.to_dense()));
                rows.push(p.measured("mixture_identity", err, 1e-10, err <= 1e-10, String::new()));
            }
            Err(e) => rows.push(p.skipped("mixture_identity", skip_reason(&e))),
        }
    }

    if auto && amplitude_form_work(&tilde) > EXACT_WORK_LIMIT {
        rows.push(p.skipped("amplitude_forms", "work_limit".into()));
    } else {
        let m_top = AMPLITUDE_FORM_M.min(cfg.m_max) as usize;
        let worst = (0..=m_top)
            .map(|m| average_amplitude(&tilde, &model, m).map(|f| f.discrepancy()))
            .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)));
        match worst {
            Ok(d) => {
                rows.push(p.measured("amplitude_forms", d, 1e-9, d <= 1e-9, format!("m<={m_top}")))
            }
            Err(e) => rows.push(p.skipped("amplitude_forms", skip_reason(&e))),
        }
    }

    let grid: Vec<u64> = (0..=cfg.m_max).collect();
    if model.entropy <= p.delta {
        rows.push(p.skipped("trace_power_bounds", "entropy_not_above_delta".into()));
        rows.push(p.skipped("amplitude_lower_bound", "entropy_not_above_delta".into()));
    } else {
        match bound_report(&model, &tilde, &grid, cfg.j_max) {
            Ok(report) => {
                let ratio = report
                    .trace_powers
                    .iter()
                    .map(|c| c.trace_power / c.bound)
                    .fold(0.0, f64::max);
                let tp_ok = report.trace_powers.iter().all(|c| c.holds);
                rows.push(p.measured(
                    "trace_power_bounds",
                    ratio,
                    1.0,
                    tp_ok,
                    format!("j<={}", cfg.j_max),
                ));
                let slack = report
                    .amplitudes
                    .iter()
                    .map(|a| a.amplitude - a.lower_bound)
                    .fold(f64::INFINITY, f64::min);
                let am_ok = report.amplitudes.iter().all(|a| a.holds);
                rows.push(p.measured(
                    "amplitude_lower_bound",
                    slack,
                    -1e-9,
                    am_ok,
                    format!(
                        "m<={} epsilon_tilde={} epsilon_bar={}",
                        cfg.m_max, report.epsilon_tilde, report.epsilon_achieved
                    ),
                ));
            }
            Err(e) => {
                rows.push(p.skipped("trace_power_bounds", skip_reason(&e)));
                rows.push(p.skipped("amplitude_lower_bound", skip_reason(&e)));
            }
        }
    }

    for (ri, &rate) in cfg.rates.iter().enumerate() {
        let seed = derive_seed(cfg.seed, p.index * 1024 + ri as u64);
        let with_rate = |mut r: VerifyRow| {
            r.rate = Some(rate);
            r
        };
        let povm = sample_codebook(ch, p.n, rate, p.delta, seed, cfg.distinct_codewords, budget)
            .and_then(|cb| {
                let plan = build_plan(
                    &cb,
                    ch,
                    &params,
                    TestOrdering::Lexicographic,
                    DecoderVariant::RankOne,
                    budget,
                )?;
                build_povm(&plan, &model, budget)
            });
        match povm {
            Ok(povm) => {
                let comp = povm.completeness_error();
                let min_eig = povm.min_eigenvalue();
                let ok = comp <= 1e-9 && min_eig >= -1e-10;
                rows.push(with_rate(p.measured(
                    "povm",
                    comp,
                    1e-9,
                    ok,
                    format!(
                        "tests={} min_eigenvalue={min_eig} seed={seed}",
                        povm.elements.len()
                    ),
                )));
            }
            Err(e) => rows.push(with_rate(p.skipped("povm", skip_reason(&e)))),
        }
    }
    rows
}

pub fn cmd_verify(cfg: &ExperimentConfig, budget: &Budget) -> Result<Vec<VerifyRow>> {
    let channels = cfg.load_channels()?;
    let mut points = Vec::new();
    for ch in &channels {
        for &n in &cfg.n {
            for &delta in &cfg.deltas {
                points.push(VerifyPoint {
                    index: points.len() as u64,
                    channel: ch,
                    n,
                    delta,
                });
            }
        }
    }
    let mut rows: Vec<VerifyRow> = points
        .par_iter()
        .flat_map_iter(|p| verify_point(cfg, budget, p))
        .collect();
    rows.sort_by_key(|r| r.point);
    Ok(rows)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateRow {
    pub point: u64,
    pub channel: String,
    pub n: usize,
    pub rate: f64,
    pub delta: f64,
    pub method: &'static str,
    pub seed: u64,
    pub codebook_size: Option<usize>,
    pub tests: Option<usize>,
    pub m_theory: Option<f64>,
    pub trials: u64,
    pub err: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub abort_fraction: Option<f64>,
    pub misdecode_fraction: Option<f64>,
    pub exact_err: Option<f64>,
    pub status: Status,
    pub reason: String,
}

/// One (channel, n, R, delta) grid point with its derived seed.
#[derive(Debug, Clone)]
pub struct GridPoint<'a> {
    pub index: u64,
    pub channel: &'a CqChannel,
    pub n: usize,
    pub rate: f64,
    pub delta: f64,
    pub seed: u64,
}

pub fn grid_points<'a>(cfg: &ExperimentConfig, channels: &'a [CqChannel]) -> Vec<GridPoint<'a>> {
    let mut points = Vec::new();
    for ch in channels {
        for &n in &cfg.n {
            for &rate in &cfg.rates {
                for &delta in &cfg.deltas {
                    let index = points.len() as u64;
                    points.push(GridPoint {
                        index,
                        channel: ch,
                        n,
                        rate,
                        delta,
                        seed: derive_seed(cfg.seed, index),
                    });
                }
            }
        }
    }
    points
}

/// Outcome of one sequential decoder variant at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentialResult {
    pub tests: usize,
    pub m_theory: f64,
    pub stats: Option<TrialStats>,
    pub exact: Option<ErrorReport>,
}

fn point_params(cfg: &ExperimentConfig, n: usize, delta: f64) -> TypicalityParams {
    TypicalityParams {
        epsilon_target: cfg.epsilon_target,
        ..TypicalityParams::new(n, delta)
    }
}

/// Codebook and typical subspace shared by every method at a grid point.
fn prepare(
    cfg: &ExperimentConfig,
    budget: &Budget,
    point: &GridPoint<'_>,
) -> Result<(Codebook, TypicalModel)> {
    let params = point_params(cfg, point.n, point.delta);
    let codebook = sample_codebook(
        point.channel,
        point.n,
        point.rate,
        point.delta,
        point.seed,
        cfg.distinct_codewords,
        budget,
    )?;
    let model = build_typical_model(point.channel, &params, budget)?;
    Ok((codebook, model))
}

fn trial_seed(point_seed: u64) -> u64 {
    derive_seed(point_seed, 1)
}

/// Rough multiply-add count of the exact chain oracle.
fn exact_work(
    ch: &CqChannel,
    codebook: &Codebook,
    model: &TypicalModel,
    plan: &DecoderPlan,
) -> f64 {
    let r = ch.letters().iter().map(|l| l.rank()).max().unwrap_or(1) as f64;
    let vectors = plan.tests.iter().map(|t| t.rank()).sum::<usize>().max(1) as f64;
    codebook.len() as f64 * r.powi(codebook.n as i32) * vectors * model.dim_h.max(1) as f64
}

/// Runs one sequential variant: Monte Carlo when `trials > 0`, and the
/// exact chain oracle when `exact` allows it.
pub fn run_sequential(
    cfg: &ExperimentConfig,
    budget: &Budget,
    point: &GridPoint<'_>,
    codebook: &Codebook,
    model: &TypicalModel,
    variant: DecoderVariant,
) -> Result<SequentialResult> {
    let ch = point.channel;
    let params = point_params(cfg, point.n, point.delta);
    let orderings: Vec<TestOrdering> = match cfg.ordering {
        OrderingMode::Lexicographic => vec![TestOrdering::Lexicographic],
        OrderingMode::WorstCase => (0..codebook.len())
            .map(|s| TestOrdering::WorstCase { true_index: s })
            .collect(),
    };
    let plans = orderings
        .into_iter()
        .map(|o| build_plan(codebook, ch, &params, o, variant, budget))
        .collect::<Result<Vec<_>>>()?;
    let decoders = plans
        .iter()
        .map(|p| SequentialDecoder::new(p, ch, model))
        .collect::<Result<Vec<_>>>()?;
    let pick = |sent: usize| &decoders[if decoders.len() == 1 { 0 } else { sent }];

    let stats = (cfg.trials > 0).then(|| {
        run_trials_with(
            codebook.len(),
            cfg.trials,
            trial_seed(point.seed),
            |sent, rng| pick(sent).simulate_outcome(codebook, sent, rng),
        )
    });

    let work = plans
        .iter()
        .map(|p| exact_work(ch, codebook, model, p))
        .sum::<f64>()
        / plans.len() as f64;
    let want_exact = match cfg.exact {
        ExactMode::Never => false,
        ExactMode::Always => true,
        ExactMode::Auto => work <= EXACT_WORK_LIMIT,
    };
    let exact = if !want_exact {
        None
    } else if decoders.len() == 1 {
        Some(decoders[0].exact_error(codebook, budget)?)
    } else {
        let mut success = Vec::with_capacity(codebook.len());
        let mut abort = Vec::with_capacity(codebook.len());
        let mut misdecode = Vec::with_capacity(codebook.len());
        for (s, (dec, plan)) in decoders.iter().zip(&plans).enumerate() {
            let dist = dec.codeword_outcomes(codebook, s, budget)?;
            let ok: f64 = plan
                .tests
                .iter()
                .zip(&dist.per_test)
                .filter(|(t, _)| t.codeword == s)
                .map(|(_, p)| p)
                .sum();
            success.push(ok);
            abort.push(dist.abort());
            misdecode.push(dist.per_test.iter().sum::<f64>() - ok);
        }
        Some(ErrorReport::from_parts(success, abort, misdecode))
    };
    Ok(SequentialResult {
        tests: plans[0].len(),
        m_theory: plans[0].m_theory(),
        stats,
        exact,
    })
}

fn simulate_point(
    cfg: &ExperimentConfig,
    budget: &Budget,
    point: &GridPoint<'_>,
) -> Vec<SimulateRow> {
    let base = |method: Method| SimulateRow {
        point: point.index,
        channel: point.channel.name().to_string(),
        n: point.n,
        rate: point.rate,
        delta: point.delta,
        method: method.as_str(),
        seed: point.seed,
        codebook_size: None,
        tests: None,
        m_theory: None,
        trials: 0,
        err: None,
        ci_low: None,
        ci_high: None,
        abort_fraction: None,
        misdecode_fraction: None,
        exact_err: None,
        status: Status::Ok,
        reason: String::new(),
    };
    let skipped = |method: Method, e: &Error| SimulateRow {
        status: Status::Skipped,
        reason: skip_reason(e),
        ..base(method)
    };
    let (codebook, model) = match prepare(cfg, budget, point) {
        Ok(c) => c,
        Err(e) => return cfg.methods.iter().map(|&m| skipped(m, &e)).collect(),
    };
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        let mut row = SimulateRow {
            codebook_size: Some(codebook.len()),
            ..base(method)
        };
        match opt_variant(method) {
            Some(variant) => match run_sequential(cfg, budget, point, &codebook, &model, variant) {
                Ok(res) => {
                    row.tests = Some(res.tests);
                    row.m_theory = Some(res.m_theory);
                    if let Some(s) = res.stats {
                        let (lo, hi) = s.wilson_interval(CI_Z);
                        row.trials = s.trials;
                        row.err = Some(s.error_rate());
                        row.ci_low = Some(lo);
                        row.ci_high = Some(hi);
                        row.abort_fraction = Some(s.abort_fraction());
                        row.misdecode_fraction = Some(s.misdecode_fraction());
                    }
                    row.exact_err = res.exact.map(|r| r.error);
                    if res.stats.is_none() {
                        if let Some(x) = row.exact_err {
                            row.err = Some(x);
                        }
                    }
                }
                Err(e) => row = skipped(method, &e),
            },
            None => match pgm_error_probability(point.channel, &codebook, budget) {
                Ok(r) => {
                    row.err = Some(r.error);
                    row.exact_err = Some(r.error);
                }
                Err(e) => row = skipped(method, &e),
            },
        }
        rows.push(row);
    }
    rows
}

pub fn cmd_simulate(cfg: &ExperimentConfig, budget: &Budget) -> Result<Vec<SimulateRow>> {
    let channels = cfg.load_channels()?;
    let points = grid_points(cfg, &channels);
    let mut rows: Vec<SimulateRow> = points
        .par_iter()
        .flat_map_iter(|p| simulate_point(cfg, budget, p))
        .collect();
    rows.sort_by_key(|r| r.point);
    Ok(rows)
}

// ----------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub point: u64,
    pub channel: String,
    pub n: usize,
    pub rate: f64,
    pub delta: f64,
    pub seed: u64,
    pub codebook_size: Option<usize>,
    pub rank_one_exact: Option<f64>,
    pub rank_one_mc: Option<f64>,
    pub subspace_exact: Option<f64>,
    pub subspace_mc: Option<f64>,
    pub pgm: Option<f64>,
    pub status: Status,
    pub reason: String,
}

fn compare_point(cfg: &ExperimentConfig, budget: &Budget, point: &GridPoint<'_>) -> CompareRow {
    let mut row = CompareRow {
        point: point.index,
        channel: point.channel.name().to_string(),
        n: point.n,
        rate: point.rate,
        delta: point.delta,
        seed: point.seed,
        codebook_size: None,
        rank_one_exact: None,
        rank_one_mc: None,
        subspace_exact: None,
        subspace_mc: None,
        pgm: None,
        status: Status::Ok,
        reason: String::new(),
    };
    let (codebook, model) = match prepare(cfg, budget, point) {
        Ok(c) => c,
        Err(e) => {
            row.status = Status::Skipped;
            row.reason = skip_reason(&e);
            return row;
        }
    };
    row.codebook_size = Some(codebook.len());
    let mut reasons = Vec::new();
    for variant in [DecoderVariant::RankOne, DecoderVariant::Subspace] {
        match run_sequential(cfg, budget, point, &codebook, &model, variant) {
            Ok(res) => {
                let exact = res.exact.map(|r| r.error);
                let mc = res.stats.map(|s| s.error_rate());
                match variant {
                    DecoderVariant::RankOne => (row.rank_one_exact, row.rank_one_mc) = (exact, mc),
                    DecoderVariant::Subspace => (row.subspace_exact, row.subspace_mc) = (exact, mc),
                }
            }
            Err(e) => reasons.push(format!("{variant:?}: {}", skip_reason(&e))),
        }
    }
    match pgm_error_probability(point.channel, &codebook, budget) {
        Ok(r) => row.pgm = Some(r.error),
        Err(e) => reasons.push(format!("pgm: {}", skip_reason(&e))),
    }
    row.reason = reasons.join("; ");
    row
}

pub fn cmd_compare(cfg: &ExperimentConfig, budget: &Budget) -> Result<Vec<CompareRow>> {
    let channels = cfg.load_channels()?;
    let points = grid_points(cfg, &channels);
    let mut rows: Vec<CompareRow> = points
        .par_iter()
        .map(|p| compare_point(cfg, budget, p))
        .collect();
    rows.sort_by_key(|r| r.point);
    Ok(rows)
}

// ------------------------------------------------------------------ output

pub fn write_csv<R: Serialize, W: Write>(rows: &[R], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Report<'a, R> {
    command: &'a str,
    config: &'a ExperimentConfig,
    rows: &'a [R],
}

/// Pretty JSON document with the config echoed next to the rows.
pub fn write_report<R: Serialize, W: Write>(
    command: &str,
    cfg: &ExperimentConfig,
    rows: &[R],
    mut out: W,
) -> Result<()> {
    let doc = Report {
        command,
        config: cfg,
        rows,
    };
    serde_json::to_writer_pretty(&mut out, &doc)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(out)?;
    Ok(())
}

pub fn write_rows<R: Serialize, W: Write>(
    command: &str,
    cfg: &ExperimentConfig,
    format: OutputFormat,
    rows: &[R],
    out: W,
) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(rows, out),
        OutputFormat::Report => write_report(command, cfg, rows, out),
    }
}
