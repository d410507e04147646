//! Closed-form success probabilities and rates for the Fixed variant, the
//! failure-probability batch size, and the batch-size optimizer.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{SetupConfig, Variant};
use crate::error::{domain, Result};
use crate::loss::SurvivalTable;

/// A success probability together with the rate it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    pub success_prob: f64,
    /// Expected successes per time bin.
    pub rate_per_bin: f64,
    pub rate_hz: f64,
    pub m_used: usize,
    /// Standard error of `rate_per_bin`; zero for closed-form results.
    pub stderr: f64,
}

impl RateResult {
    /// Builds a result from a success probability and the scheme length in bins.
    pub fn from_success(success_prob: f64, total_bins: usize, t_bin: f64, m_used: usize) -> Self {
        let rate_per_bin = success_prob / total_bins as f64;
        Self {
            success_prob,
            rate_per_bin,
            rate_hz: rate_per_bin / t_bin,
            m_used,
            stderr: 0.0,
        }
    }
}

/// Which success probability the batch-size scan maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    Lossless,
    Lossy,
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("p must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn require_fixed(config: &SetupConfig) -> Result<()> {
    config.validate()?;
    if config.variant != Variant::Fixed {
        return Err(domain("closed-form rates only exist for the fixed variant"));
    }
    Ok(())
}

/// Probability that every one of `n` batches of `m` bins holds a photon.
pub fn lossless_success(p: f64, m: usize, n: usize) -> Result<f64> {
    check_p(p)?;
    if m == 0 {
        return Err(domain("m must be at least 1"));
    }
    let per_batch = 1.0 - (1.0 - p).powi(m as i32);
    Ok(per_batch.powi(n as i32))
}

/// Lossless rate for the config's `p`, `m` and `n`.
pub fn lossless_rate(config: &SetupConfig) -> Result<RateResult> {
    require_fixed(config)?;
    let success = lossless_success(config.p, config.m, config.n)?;
    Ok(RateResult::from_success(
        success,
        config.total_bins(),
        config.t_bin,
        config.m,
    ))
}

fn check_epsilon_args(p: f64, n: usize, epsilon: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!(
            "p must lie strictly between 0 and 1, got {p}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain(format!(
            "epsilon must lie strictly between 0 and 1, got {epsilon}"
        )));
    }
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    Ok(())
}

/// `log_{1/(1-p)}(n/epsilon)`, the real-valued batch size.
fn epsilon_log(p: f64, n: usize, epsilon: f64) -> f64 {
    (n as f64 / epsilon).ln() / -(1.0 - p).ln()
}

/// Smallest integer batch size of the form `ceil(log_{1/(1-p)}(n/epsilon))`.
///
/// The lossless success probability at the returned `m` is at least `1 - epsilon`.
pub fn epsilon_m(p: f64, n: usize, epsilon: f64) -> Result<usize> {
    check_epsilon_args(p, n, epsilon)?;
    let m = epsilon_log(p, n, epsilon).ceil().max(1.0) as usize;
    Ok(m)
}

/// Achievable rate `(1 - epsilon) / (n * log_{1/(1-p)}(n/epsilon))`.
///
/// Uses the unrounded logarithm; `m_used` reports the rounded batch size.
pub fn epsilon_rate(p: f64, n: usize, epsilon: f64, t_bin: f64) -> Result<RateResult> {
    check_epsilon_args(p, n, epsilon)?;
    let success = 1.0 - epsilon;
    let rate_per_bin = success / (n as f64 * epsilon_log(p, n, epsilon));
    Ok(RateResult {
        success_prob: success,
        rate_per_bin,
        rate_hz: rate_per_bin / t_bin,
        m_used: epsilon_m(p, n, epsilon)?,
        stderr: 0.0,
    })
}

/// Per-batch success with loss: `sum_tau p (1-p)^tau P(batch, tau)`.
pub fn batch_lossy_success(p: f64, survival: &[f64]) -> f64 {
    let q = 1.0 - p;
    let mut weight = p;
    let mut total = 0.0;
    for &s in survival {
        total += weight * s;
        weight *= q;
    }
    total
}

fn lossy_success_with(config: &SetupConfig, table: &SurvivalTable) -> f64 {
    (0..config.n)
        .map(|batch| batch_lossy_success(config.p, &table.batch(batch)[..config.m]))
        .product()
}

/// Probability that all `n` batches deliver a photon and none is lost.
pub fn lossy_success(config: &SetupConfig) -> Result<f64> {
    require_fixed(config)?;
    if config.loss_table.is_lossless() {
        // Same value as the sum below, without its rounding.
        return lossless_success(config.p, config.m, config.n);
    }
    let table = SurvivalTable::new(config)?;
    Ok(lossy_success_with(config, &table))
}

pub fn lossy_rate(config: &SetupConfig) -> Result<RateResult> {
    let success = lossy_success(config)?;
    Ok(RateResult::from_success(
        success,
        config.total_bins(),
        config.t_bin,
        config.m,
    ))
}

fn rate_at(config: &SetupConfig, objective: Objective) -> Result<RateResult> {
    match objective {
        Objective::Lossless => lossless_rate(config),
        Objective::Lossy => lossy_rate(config),
    }
}

/// Index of the largest rate; the earliest wins ties.
pub fn argmax_rate(rates: &[RateResult]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in rates.iter().enumerate() {
        match best {
            Some(b) if rates[b].rate_per_bin >= r.rate_per_bin => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Rates for every batch size in `1..=m_max`, in order of `m`.
pub fn rate_curve(
    config: &SetupConfig,
    m_max: usize,
    objective: Objective,
) -> Result<Vec<RateResult>> {
    if m_max == 0 {
        return Err(domain("m_max must be at least 1"));
    }
    require_fixed(config)?;
    (1..=m_max)
        .into_par_iter()
        .map(|m| rate_at(&config.clone().with_m(m), objective))
        .collect()
}

/// Exhaustive scan of `m` in `1..=m_max` for the highest rate.
///
/// The config's own `m` is ignored. Ties go to the smaller `m`.
pub fn optimal_m(
    config: &SetupConfig,
    m_max: usize,
    objective: Objective,
) -> Result<(usize, RateResult)> {
    let curve = rate_curve(config, m_max, objective)?;
    let best = argmax_rate(&curve).expect("m_max >= 1");
    Ok((best + 1, curve[best]))
}

/// Optimized lossy rate divided by the unmultiplexed rate `p^n`.
pub fn improvement_ratio(config: &SetupConfig, m_max: usize) -> Result<f64> {
    if config.p.is_nan() || config.p <= 0.0 {
        return Err(domain("improvement ratio is undefined for p = 0"));
    }
    let (_, best) = optimal_m(config, m_max, Objective::Lossy)?;
    Ok(best.rate_per_bin / no_multiplexing_rate(config.p, config.n))
}

/// Rate without multiplexing: all `n` photons in one time bin.
pub fn no_multiplexing_rate(p: f64, n: usize) -> f64 {
    p.powi(n as i32)
}
