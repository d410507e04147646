//! Per-photon survival through memory loops, the grating array, fiber and
//! circulator, computed by summing component losses in dB.

use crate::config::SetupConfig;
use crate::error::{domain, Result};

/// Converts a loss in dB to the fraction of light that survives.
pub fn db_to_survival(loss_db: f64) -> Result<f64> {
    if loss_db.is_nan() || loss_db < 0.0 || loss_db.is_infinite() {
        return Err(domain(format!(
            "loss must be a finite non-negative dB value, got {loss_db}"
        )));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Loss fraction in percent for a dB value.
pub fn db_to_loss_percent(loss_db: f64) -> Result<f64> {
    Ok(100.0 * (1.0 - db_to_survival(loss_db)?))
}

/// Splits `delay` into pass counts through each loop, largest loop first.
///
/// `loop_lengths` must be strictly decreasing and end in 1; the returned
/// counts are aligned with it.
pub fn decompose_delay(delay: usize, loop_lengths: &[usize]) -> Vec<usize> {
    let mut rest = delay;
    loop_lengths
        .iter()
        .map(|&len| {
            let count = rest / len;
            rest %= len;
            count
        })
        .collect()
}

/// Where one photon comes from and what it has to go through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayAssignment {
    /// Batch index in emission order, equal to the photon's frequency bin.
    pub batch: usize,
    /// Timesteps spent in memory.
    pub delay: usize,
    /// Gratings transmitted before the reflecting one.
    pub fbg_depth: usize,
    /// `(loop length, pass count)` pairs.
    pub loop_passes: Vec<(usize, usize)>,
}

impl DelayAssignment {
    pub fn new(config: &SetupConfig, batch: usize, delay: usize) -> Result<Self> {
        check_range(config, batch, delay)?;
        let counts = decompose_delay(delay, &config.loop_lengths);
        Ok(Self {
            batch,
            delay,
            fbg_depth: config.fbg_depth(batch),
            loop_passes: config.loop_lengths.iter().copied().zip(counts).collect(),
        })
    }

    /// Global time bin the photon was heralded in.
    pub fn source_bin(&self, config: &SetupConfig) -> usize {
        config.batch_end(self.batch) - self.delay
    }
}

fn check_range(config: &SetupConfig, batch: usize, delay: usize) -> Result<()> {
    if batch >= config.batch_count() {
        return Err(domain(format!(
            "batch {batch} out of range for {} batches",
            config.batch_count()
        )));
    }
    if delay > config.max_delay(batch) {
        return Err(domain(format!(
            "delay {delay} exceeds the maximum {} for batch {batch}",
            config.max_delay(batch)
        )));
    }
    Ok(())
}

fn loop_pass_db(config: &SetupConfig, len: usize) -> f64 {
    config
        .loss_table
        .loop_pass
        .get(&len)
        .copied()
        .unwrap_or(0.0)
}

/// Total loss along the path described by `assignment`.
pub fn path_loss_db(config: &SetupConfig, assignment: &DelayAssignment) -> Result<f64> {
    check_range(config, assignment.batch, assignment.delay)?;
    if assignment.fbg_depth != config.fbg_depth(assignment.batch) {
        return Err(domain(format!(
            "batch {} reflects at depth {}, assignment says {}",
            assignment.batch,
            config.fbg_depth(assignment.batch),
            assignment.fbg_depth
        )));
    }
    let stored: usize = assignment.loop_passes.iter().map(|(len, c)| len * c).sum();
    if stored != assignment.delay {
        return Err(domain(format!(
            "loop passes store {stored} timesteps but the delay is {}",
            assignment.delay
        )));
    }
    if let Some((len, _)) = assignment
        .loop_passes
        .iter()
        .find(|(len, _)| !config.loop_lengths.contains(len))
    {
        return Err(domain(format!("no {len}-timestep loop in this setup")));
    }
    let loops: f64 = assignment
        .loop_passes
        .iter()
        .map(|&(len, count)| count as f64 * loop_pass_db(config, len))
        .sum();
    Ok(fixed_path_db(config, assignment.fbg_depth) + loops)
}

/// Everything but the memory: mandatory optics, two circulator passes, the
/// grating round trip and the fiber between gratings.
fn fixed_path_db(config: &SetupConfig, depth: usize) -> f64 {
    let t = &config.loss_table;
    let depth = depth as f64;
    config.loop_misc_db()
        + 2.0 * t.circulator_pass
        + 2.0 * depth * t.fbg_transmission
        + t.fbg_reflection
        + depth * config.m as f64 * t.fiber_per_timestep
}

/// Probability that a photon of `batch` delayed by `delay` timesteps leaves
/// the setup.
pub fn survival_prob(config: &SetupConfig, batch: usize, delay: usize) -> Result<f64> {
    let assignment = DelayAssignment::new(config, batch, delay)?;
    db_to_survival(path_loss_db(config, &assignment)?)
}

/// Survival probabilities for every reachable `(batch, delay)` pair.
#[derive(Debug, Clone)]
pub struct SurvivalTable {
    rows: Vec<Vec<f64>>,
}

impl SurvivalTable {
    pub fn new(config: &SetupConfig) -> Result<Self> {
        config.validate()?;
        let pass_db: Vec<f64> = config
            .loop_lengths
            .iter()
            .map(|&len| loop_pass_db(config, len))
            .collect();
        let rows = (0..config.batch_count())
            .map(|batch| {
                let base = fixed_path_db(config, config.fbg_depth(batch));
                (0..=config.max_delay(batch))
                    .map(|delay| {
                        let loops: f64 = decompose_delay(delay, &config.loop_lengths)
                            .iter()
                            .zip(&pass_db)
                            .map(|(&c, db)| c as f64 * db)
                            .sum();
                        10f64.powf(-(base + loops) / 10.0)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { rows })
    }

    /// Panics if `(batch, delay)` is out of range for the config.
    #[inline]
    pub fn get(&self, batch: usize, delay: usize) -> f64 {
        self.rows[batch][delay]
    }

    pub fn batch(&self, batch: usize) -> &[f64] {
        &self.rows[batch]
    }
}
