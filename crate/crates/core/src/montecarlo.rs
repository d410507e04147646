//! Sampling estimates of success probabilities and rates.
//!
//! For each sample only the photons that can matter are drawn: walking back
//! from the end of a batch, the gap to the next photon of that batch's
//! frequency is geometric. This has the same distribution as scanning a full
//! Bernoulli grid (see [`crate::schedule::sample_grid`]) but costs a handful of
//! draws per batch instead of one per cell.
//!
//! Samples are grouped into fixed-size chunks whose partial sums are combined
//! in chunk order, so results do not depend on the number of worker threads.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{SetupConfig, Variant};
use crate::error::{domain, Result};
use crate::rates::{argmax_rate, RateResult};
use crate::schedule::{Candidates, PartialModel, SelectScratch};
use crate::stream::{CounterRng, StreamKey};

/// Default number of samples per estimate.
pub const DEFAULT_SAMPLES: u64 = 1_000_000;

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool. Never affects the result.
    pub workers: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            workers: 0,
        }
    }
}

impl McSettings {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Estimated success with and without loss. `stderr` fields are standard
/// errors of the per-bin rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub lossless: RateResult,
    pub lossy: RateResult,
    pub total_bins: usize,
    pub samples: u64,
}

impl McEstimate {
    pub fn lossless_success_stderr(&self) -> f64 {
        self.lossless.stderr * self.total_bins as f64
    }

    pub fn lossy_success_stderr(&self) -> f64 {
        self.lossy.stderr * self.total_bins as f64
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    lossless: KahanSum,
    lossy: KahanSum,
    lossy_sq: KahanSum,
}

impl Moments {
    fn merge(&mut self, other: Moments) {
        self.lossless.merge(other.lossless);
        self.lossy.merge(other.lossy);
        self.lossy_sq.merge(other.lossy_sq);
    }
}

/// Draws gaps between consecutive photons of one frequency, walking
/// backwards in time.
struct GapSampler {
    p: f64,
    inv_log_q: f64,
}

impl GapSampler {
    fn new(p: f64) -> Self {
        Self {
            p,
            inv_log_q: 1.0 / (1.0 - p).ln(),
        }
    }

    /// Number of empty bins before the next photon, or `None` if it exceeds `limit`.
    #[inline]
    fn gap(&self, rng: &mut CounterRng, limit: usize) -> Option<usize> {
        if self.p >= 1.0 {
            return Some(0);
        }
        if self.p <= 0.0 {
            return None;
        }
        let u = 1.0 - rng.random::<f64>();
        let g = (u.ln() * self.inv_log_q).floor();
        (g <= limit as f64).then_some(g as usize)
    }
}

/// Per-chunk evaluation of one sample.
struct SampleEval<'a> {
    config: &'a SetupConfig,
    gaps: GapSampler,
    kind: EvalKind<'a>,
}

enum EvalKind<'a> {
    Fixed { survival: &'a [Vec<f64>] },
    Partial { model: &'a PartialModel },
}

impl SampleEval<'_> {
    /// Returns `(schedule exists, survival of the chosen schedule)`.
    fn run(&self, rng: &mut CounterRng, scratch: &mut Scratch) -> (bool, f64) {
        match &self.kind {
            EvalKind::Fixed { survival } => {
                let mut product = 1.0;
                for row in survival.iter() {
                    match self.gaps.gap(rng, self.config.m - 1) {
                        Some(delay) => product *= row[delay],
                        None => return (false, 0.0),
                    }
                }
                (true, product)
            }
            EvalKind::Partial { model } => {
                let cands = &mut scratch.cands;
                cands.clear();
                for batch in 0..model.batch_count() {
                    let max_delay = self.config.max_delay(batch);
                    let mut next = 0;
                    while next <= max_delay && cands.wants_more(model, batch, next) {
                        match self.gaps.gap(rng, max_delay - next) {
                            Some(g) => {
                                cands.offer(model, batch, next + g);
                                next += g + 1;
                            }
                            None => break,
                        }
                    }
                }
                match model.select(cands, &mut scratch.select) {
                    Some(sel) => (true, sel.survival),
                    None => (false, 0.0),
                }
            }
        }
    }
}

struct Scratch {
    cands: Candidates,
    select: SelectScratch,
}

fn run_chunk(eval: &SampleEval<'_>, key: StreamKey, range: std::ops::Range<u64>) -> Moments {
    let mut scratch = Scratch {
        cands: Candidates::new(eval.config.batch_count()),
        select: SelectScratch::default(),
    };
    let mut m = Moments::default();
    for index in range {
        let mut rng = key.rng(index);
        let (ok, survival) = eval.run(&mut rng, &mut scratch);
        if ok {
            m.lossless.add(1.0);
            m.lossy.add(survival);
            m.lossy_sq.add(survival * survival);
        }
    }
    m
}

fn estimate_with_key(
    config: &SetupConfig,
    settings: &McSettings,
    key: StreamKey,
) -> Result<McEstimate> {
    config.validate()?;
    if settings.samples == 0 {
        return Err(domain("at least one sample is required"));
    }
    let survival_rows: Vec<Vec<f64>>;
    let model;
    let kind = match config.variant {
        Variant::Fixed => {
            let table = crate::loss::SurvivalTable::new(config)?;
            survival_rows = (0..config.n).map(|b| table.batch(b).to_vec()).collect();
            EvalKind::Fixed {
                survival: &survival_rows,
            }
        }
        Variant::Partial => {
            model = PartialModel::new(config)?;
            EvalKind::Partial { model: &model }
        }
    };
    let eval = SampleEval {
        config,
        gaps: GapSampler::new(config.p),
        kind,
    };

    let chunks = settings.samples.div_ceil(CHUNK);
    let partials: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            run_chunk(&eval, key, start..(start + CHUNK).min(settings.samples))
        })
        .collect();
    let mut total = Moments::default();
    for part in partials {
        total.merge(part);
    }

    let n = settings.samples as f64;
    let bins = config.total_bins();
    let make = |sum: f64, sum_sq: f64| {
        let mean = sum / n;
        let var = if settings.samples > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let mut r = RateResult::from_success(mean, bins, config.t_bin, config.m);
        r.stderr = (var / n).sqrt() / bins as f64;
        r
    };
    // lossless contributions are 0/1, so the sum of squares equals the sum
    let hits = total.lossless.value();
    Ok(McEstimate {
        lossless: make(hits, hits),
        lossy: make(total.lossy.value(), total.lossy_sq.value()),
        total_bins: bins,
        samples: settings.samples,
    })
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| domain(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn base_key(seed: u64) -> StreamKey {
    StreamKey::new(seed, "mc-estimate")
}

/// Monte Carlo success probabilities and rates for `config`.
pub fn mc_estimate(config: &SetupConfig, settings: &McSettings) -> Result<McEstimate> {
    let key = base_key(settings.seed).substream(config.m as u64);
    in_pool(settings.workers, || {
        estimate_with_key(config, settings, key)
    })?
}

/// Estimates every `m` in `1..=m_max` and returns the one with the highest
/// lossy rate, ties going to the smaller `m`.
pub fn mc_optimal_m(
    config: &SetupConfig,
    settings: &McSettings,
    m_max: usize,
) -> Result<(usize, McEstimate)> {
    let curve = mc_rate_curve(config, settings, m_max)?;
    let lossy: Vec<RateResult> = curve.iter().map(|e| e.lossy).collect();
    let best = argmax_rate(&lossy).expect("m_max >= 1");
    Ok((best + 1, curve[best]))
}

/// Estimates for every `m` in `1..=m_max`, in order.
pub fn mc_rate_curve(
    config: &SetupConfig,
    settings: &McSettings,
    m_max: usize,
) -> Result<Vec<McEstimate>> {
    if m_max == 0 {
        return Err(domain("m_max must be at least 1"));
    }
    (1..=m_max)
        .map(|m| mc_estimate(&config.clone().with_m(m), settings))
        .collect()
}
