//! Photon grids and memory switching schedules.
//!
//! Batch `b` always collects frequency bin `b`: the grating array is passive,
//! so only the choice of source photon is free. In the Fixed variant the last
//! photon of the right frequency inside the batch is delayed to the batch's
//! final bin. In the Partial variant any earlier photon of that frequency may
//! be used, and exactly `n` of the `2n` batches are filled.

use std::fmt::Write as _;

use rand::Rng;

use crate::config::{Occupancy, SetupConfig, Variant};
use crate::error::{domain, Error, Result};
use crate::loss::{DelayAssignment, SurvivalTable};

/// Largest grid [`brute_force_success`] will enumerate.
pub const MAX_ENUMERATION_CELLS: usize = 16;

/// Heralded photons over frequency bins (rows) and time bins (columns).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhotonGrid {
    freq_bins: usize,
    time_bins: usize,
    cells: Vec<bool>,
}

impl PhotonGrid {
    pub fn empty(freq_bins: usize, time_bins: usize) -> Self {
        Self {
            freq_bins,
            time_bins,
            cells: vec![false; freq_bins * time_bins],
        }
    }

    /// An empty grid shaped for `config`.
    pub fn for_config(config: &SetupConfig) -> Self {
        Self::empty(config.batch_count(), config.total_bins())
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let time_bins = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != time_bins) {
            return Err(domain("grid rows have different lengths"));
        }
        Ok(Self {
            freq_bins: rows.len(),
            time_bins,
            cells: rows.concat(),
        })
    }

    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    pub fn time_bins(&self) -> usize {
        self.time_bins
    }

    #[inline]
    pub fn get(&self, freq: usize, time: usize) -> bool {
        self.cells[freq * self.time_bins + time]
    }

    pub fn set(&mut self, freq: usize, time: usize, occupied: bool) {
        self.cells[freq * self.time_bins + time] = occupied;
    }

    pub fn photon_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// One line per frequency bin, `0`/`1` per time bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.cells.len() * 2);
        for row in self
            .cells
            .chunks(self.time_bins.max(1))
            .take(self.freq_bins)
        {
            let line: Vec<&str> = row.iter().map(|&c| if c { "1" } else { "0" }).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|line| {
                line.split(',')
                    .map(|cell| match cell.trim() {
                        "0" => Ok(false),
                        "1" => Ok(true),
                        other => Err(domain(format!("grid cell must be 0 or 1, got `{other}`"))),
                    })
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(&rows)
    }

    fn check_shape(&self, config: &SetupConfig) -> Result<()> {
        if self.freq_bins != config.batch_count() || self.time_bins != config.total_bins() {
            return Err(domain(format!(
                "grid is {}x{}, config expects {}x{}",
                self.freq_bins,
                self.time_bins,
                config.batch_count(),
                config.total_bins()
            )));
        }
        Ok(())
    }
}

/// Draws a grid with every cell independently occupied with probability `p`.
pub fn sample_grid<R: Rng + ?Sized>(config: &SetupConfig, rng: &mut R) -> PhotonGrid {
    let mut grid = PhotonGrid::for_config(config);
    for cell in grid.cells.iter_mut() {
        *cell = rng.random_bool(config.p);
    }
    grid
}

/// Photons routed to the end of their batches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    /// One assignment per filled batch, ordered by batch.
    pub fills: Vec<DelayAssignment>,
    pub unfilled: Vec<usize>,
}

impl Schedule {
    fn from_picks(config: &SetupConfig, picks: &[(usize, usize)]) -> Result<Self> {
        let fills = picks
            .iter()
            .map(|&(batch, delay)| DelayAssignment::new(config, batch, delay))
            .collect::<Result<Vec<_>>>()?;
        let unfilled = (0..config.batch_count())
            .filter(|b| !picks.iter().any(|(pb, _)| pb == b))
            .collect();
        Ok(Self { fills, unfilled })
    }

    /// Memory occupation `[source, batch end)` of each fill, in time bins.
    pub fn storage_intervals(&self, config: &SetupConfig) -> Vec<(usize, usize)> {
        self.fills
            .iter()
            .map(|f| (f.source_bin(config), config.batch_end(f.batch)))
            .collect()
    }
}

/// Fixed variant: delay the last photon of each batch's frequency to the end
/// of the batch. `None` if some batch has no such photon.
pub fn schedule_fixed(grid: &PhotonGrid, config: &SetupConfig) -> Result<Option<Schedule>> {
    if config.variant != Variant::Fixed {
        return Err(domain("schedule_fixed needs the fixed variant"));
    }
    grid.check_shape(config)?;
    let mut picks = Vec::with_capacity(config.n);
    for batch in 0..config.n {
        let end = config.batch_end(batch);
        let start = batch * config.m;
        match (start..=end).rev().find(|&t| grid.get(batch, t)) {
            Some(t) => picks.push((batch, end - t)),
            None => return Ok(None),
        }
    }
    Schedule::from_picks(config, &picks).map(Some)
}

/// Partial variant: fill exactly `n` of the `2n` batches, maximizing the
/// product of survival probabilities. `None` if no valid schedule exists.
pub fn schedule_partial(grid: &PhotonGrid, config: &SetupConfig) -> Result<Option<Schedule>> {
    if config.variant != Variant::Partial {
        return Err(domain("schedule_partial needs the partial variant"));
    }
    grid.check_shape(config)?;
    let model = PartialModel::new(config)?;
    let mut cands = Candidates::new(config.batch_count());
    for batch in 0..config.batch_count() {
        let end = config.batch_end(batch);
        for t in (0..=end).rev() {
            if !cands.wants_more(&model, batch, end - t) {
                break;
            }
            if grid.get(batch, t) {
                cands.offer(&model, batch, end - t);
            }
        }
    }
    match model.select(&cands, &mut SelectScratch::default()) {
        Some(sel) => Schedule::from_picks(config, &sel.picks).map(Some),
        None => Ok(None),
    }
}

/// Dispatches on the config's variant.
pub fn schedule(grid: &PhotonGrid, config: &SetupConfig) -> Result<Option<Schedule>> {
    match config.variant {
        Variant::Fixed => schedule_fixed(grid, config),
        Variant::Partial => schedule_partial(grid, config),
    }
}

/// Probability that every scheduled photon survives.
pub fn schedule_survival(schedule: &Schedule, config: &SetupConfig) -> Result<f64> {
    let table = SurvivalTable::new(config)?;
    schedule.fills.iter().try_fold(1.0, |acc, fill| {
        if fill.batch >= config.batch_count() || fill.delay > config.max_delay(fill.batch) {
            return Err(domain(format!("fill {fill:?} does not fit this config")));
        }
        Ok(acc * table.get(fill.batch, fill.delay))
    })
}

/// Exact success probabilities from enumerating every grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSuccess {
    pub p_lossless: f64,
    pub p_lossy: f64,
}

/// Weights every possible grid by `p^k (1-p)^(cells-k)` and averages schedule
/// existence and schedule survival over them.
pub fn brute_force_success(config: &SetupConfig) -> Result<ExactSuccess> {
    config.validate()?;
    let cells = config.batch_count() * config.total_bins();
    if cells > MAX_ENUMERATION_CELLS {
        return Err(Error::GridTooLarge {
            cells,
            limit: MAX_ENUMERATION_CELLS,
        });
    }
    let table = SurvivalTable::new(config)?;
    let (freq_bins, time_bins) = (config.batch_count(), config.total_bins());
    let mut exact = ExactSuccess {
        p_lossless: 0.0,
        p_lossy: 0.0,
    };
    for mask in 0u32..(1u32 << cells) {
        let mut grid = PhotonGrid::empty(freq_bins, time_bins);
        for (i, cell) in grid.cells.iter_mut().enumerate() {
            *cell = mask >> i & 1 == 1;
        }
        let k = mask.count_ones() as i32;
        let weight = config.p.powi(k) * (1.0 - config.p).powi(cells as i32 - k);
        if let Some(s) = schedule(&grid, config)? {
            exact.p_lossless += weight;
            let survival: f64 = s
                .fills
                .iter()
                .map(|f| table.get(f.batch, f.delay))
                .product();
            exact.p_lossy += weight * survival;
        }
    }
    Ok(exact)
}

/// Survival lookups plus, per batch, the best survival reachable at or beyond
/// each delay. The latter bounds what a longer-stored photon could add.
#[derive(Debug, Clone)]
pub(crate) struct PartialModel {
    n: usize,
    occupancy: Occupancy,
    batch_ends: Vec<usize>,
    pub(crate) table: SurvivalTable,
    suffix_best: Vec<Vec<f64>>,
}

impl PartialModel {
    pub(crate) fn new(config: &SetupConfig) -> Result<Self> {
        let table = SurvivalTable::new(config)?;
        let suffix_best = (0..config.batch_count())
            .map(|b| {
                let row = table.batch(b);
                let mut best = vec![0.0f64; row.len() + 1];
                for d in (0..row.len()).rev() {
                    best[d] = best[d + 1].max(row[d]);
                }
                best
            })
            .collect();
        Ok(Self {
            n: config.n,
            occupancy: config.occupancy,
            batch_ends: (0..config.batch_count())
                .map(|b| config.batch_end(b))
                .collect(),
            table,
            suffix_best,
        })
    }

    pub(crate) fn batch_count(&self) -> usize {
        self.batch_ends.len()
    }

    /// Picks `n` batches and one candidate each, maximizing joint survival.
    pub(crate) fn select(
        &self,
        cands: &Candidates,
        scratch: &mut SelectScratch,
    ) -> Option<Selection> {
        match self.occupancy {
            Occupancy::Unlimited => self.select_unlimited(cands, scratch),
            Occupancy::Single => self.select_single(cands, scratch),
        }
    }

    /// Without memory conflicts the best candidate per batch is independent of
    /// the others, so take the `n` batches with the highest survival.
    fn select_unlimited(
        &self,
        cands: &Candidates,
        scratch: &mut SelectScratch,
    ) -> Option<Selection> {
        let order = &mut scratch.order;
        order.clear();
        order.extend((0..self.batch_count()).filter(|&b| !cands.fronts[b].is_empty()));
        if order.len() < self.n {
            return None;
        }
        order.sort_by(|&a, &b| cands.best[b].total_cmp(&cands.best[a]).then(a.cmp(&b)));
        order.truncate(self.n);
        order.sort_unstable();
        let picks: Vec<(usize, usize)> = order
            .iter()
            .map(|&b| (b, *cands.fronts[b].last().expect("non-empty front")))
            .collect();
        let survival = order.iter().map(|&b| cands.best[b]).product();
        Some(Selection { picks, survival })
    }

    /// Batches end in increasing time order, so a set of storage intervals
    /// `[end - delay, end)` is disjoint iff each non-empty interval starts no
    /// earlier than the end of the previous non-empty one. Dynamic program over
    /// (fills so far, last batch holding the memory).
    fn select_single(&self, cands: &Candidates, scratch: &mut SelectScratch) -> Option<Selection> {
        let batches = self.batch_count();
        let width = batches + 1;
        let states = (self.n + 1) * width;
        let idx = |k: usize, last: usize| k * width + last;

        scratch.layers.clear();
        let mut cur = vec![DpCell::UNREACHED; states];
        cur[idx(0, 0)] = DpCell {
            value: 1.0,
            prev: usize::MAX,
            delay: None,
        };
        for batch in 0..batches {
            let mut next = vec![DpCell::UNREACHED; states];
            for k in 0..=self.n {
                for last in 0..width {
                    let here = cur[idx(k, last)];
                    if here.value < 0.0 {
                        continue;
                    }
                    relax(&mut next[idx(k, last)], here.value, idx(k, last), None);
                    if k == self.n {
                        continue;
                    }
                    let busy_until = if last == 0 {
                        0
                    } else {
                        self.batch_ends[last - 1]
                    };
                    let end = self.batch_ends[batch];
                    for &delay in &cands.fronts[batch] {
                        let next_last = if delay == 0 {
                            last
                        } else if end - delay >= busy_until {
                            batch + 1
                        } else {
                            continue;
                        };
                        let value = here.value * self.table.get(batch, delay);
                        relax(
                            &mut next[idx(k + 1, next_last)],
                            value,
                            idx(k, last),
                            Some(delay),
                        );
                    }
                }
            }
            scratch.layers.push(cur);
            cur = next;
        }

        let best = (0..width)
            .map(|last| cur[idx(self.n, last)])
            .filter(|c| c.value >= 0.0)
            .fold(None::<DpCell>, |acc, x| match acc {
                Some(a) if a.value >= x.value => Some(a),
                _ => Some(x),
            })?;
        let survival = best.value;
        let mut picks = Vec::with_capacity(self.n);
        let mut cell = best;
        for batch in (0..batches).rev() {
            if let Some(delay) = cell.delay {
                picks.push((batch, delay));
            }
            cell = scratch.layers[batch][cell.prev];
        }
        picks.reverse();
        Some(Selection { picks, survival })
    }
}

#[derive(Debug, Clone, Copy)]
struct DpCell {
    value: f64,
    prev: usize,
    delay: Option<usize>,
}

impl DpCell {
    const UNREACHED: DpCell = DpCell {
        value: -1.0,
        prev: usize::MAX,
        delay: None,
    };
}

fn relax(cell: &mut DpCell, value: f64, prev: usize, delay: Option<usize>) {
    if value > cell.value {
        *cell = DpCell { value, prev, delay };
    }
}

#[derive(Debug, Default)]
pub(crate) struct SelectScratch {
    order: Vec<usize>,
    layers: Vec<Vec<DpCell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Selection {
    /// `(batch, delay)` pairs ordered by batch.
    pub(crate) picks: Vec<(usize, usize)>,
    pub(crate) survival: f64,
}

/// Useful source photons per batch, offered in increasing delay order.
///
/// A photon stored longer is only worth keeping if it survives strictly
/// better than every shorter-stored one: a shorter storage interval is never
/// harder to fit into the memory.
#[derive(Debug, Clone)]
pub(crate) struct Candidates {
    pub(crate) fronts: Vec<Vec<usize>>,
    pub(crate) best: Vec<f64>,
}

impl Candidates {
    pub(crate) fn new(batches: usize) -> Self {
        Self {
            fronts: vec![Vec::new(); batches],
            best: vec![0.0; batches],
        }
    }

    pub(crate) fn clear(&mut self) {
        self.fronts.iter_mut().for_each(Vec::clear);
        self.best.iter_mut().for_each(|b| *b = 0.0);
    }

    /// Whether a photon at `delay` or later could still join the front.
    #[inline]
    pub(crate) fn wants_more(&self, model: &PartialModel, batch: usize, delay: usize) -> bool {
        let bound = &model.suffix_best[batch];
        delay + 1 < bound.len() && bound[delay] > self.best[batch]
    }

    #[inline]
    pub(crate) fn offer(&mut self, model: &PartialModel, batch: usize, delay: usize) {
        let s = model.table.get(batch, delay);
        if s > self.best[batch] {
            self.best[batch] = s;
            self.fronts[batch].push(delay);
        }
    }
}
