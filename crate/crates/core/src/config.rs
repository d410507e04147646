//! Experiment description shared by every other module.
//!
//! A [`SetupConfig`] fixes the heralding probability, batch geometry, memory
//! loops and the per-component loss budget. Loss values stay in dB until a
//! survival fraction is actually needed, since dB figures add along a path.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default time-bin length: 10 ns.
pub const DEFAULT_T_BIN: f64 = 1.0e-8;
/// Default heralding probability per frequency-time bin.
pub const DEFAULT_P: f64 = 0.1;
/// Default upper bound for batch-size sweeps.
pub const DEFAULT_M_MAX: usize = 300;

/// Reference component losses: label, dB value and the loss percentage the
/// dB value is quoted with.
pub const REFERENCE_LOSSES: [(&str, f64, f64); 10] = [
    ("loop_1", 0.106, 2.41),
    ("loop_10", 0.110, 2.50),
    ("loop_100", 0.149, 3.37),
    ("fbg_transmission", 0.0436, 1.00),
    ("fbg_reflection", 0.0436, 1.00),
    ("fiber_per_timestep", 0.00102, 0.0235),
    ("circulator", 0.500, 10.9),
    ("misc_1_loop", 0.510, 11.1),
    ("misc_2_loops", 0.720, 15.3),
    ("misc_3_loops", 0.931, 19.3),
];

/// Which frequency bins the output photons must occupy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// n photons in n fixed frequency bins.
    #[default]
    Fixed,
    /// n photons in any n of 2n frequency bins.
    Partial,
}

/// How many photons the memory may hold at once (Partial variant only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Occupancy {
    #[default]
    Unlimited,
    /// At most one stored photon; injection may coincide with an ejection.
    Single,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Fixed => "fixed",
            Variant::Partial => "partial",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Variant::Fixed),
            "partial" => Ok(Variant::Partial),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

impl fmt::Display for Occupancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Occupancy::Unlimited => "unlimited",
            Occupancy::Single => "single",
        })
    }
}

impl FromStr for Occupancy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unlimited" => Ok(Occupancy::Unlimited),
            "single" => Ok(Occupancy::Single),
            other => Err(Error::InvalidConfig(format!("unknown occupancy `{other}`"))),
        }
    }
}

/// Per-component losses in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossTable {
    /// Loss of one pass through a memory loop, keyed by loop length in timesteps.
    pub loop_pass: BTreeMap<usize, f64>,
    pub fbg_transmission: f64,
    pub fbg_reflection: f64,
    /// Fiber loss per timestep of propagation.
    pub fiber_per_timestep: f64,
    /// Loss of a single circulator pass; photons pass twice.
    pub circulator_pass: f64,
    /// Mandatory-path losses, keyed by the number of memory loops installed.
    pub misc: BTreeMap<usize, f64>,
}

impl LossTable {
    /// Component losses for commercially available parts.
    pub fn reference() -> Self {
        Self {
            loop_pass: BTreeMap::from([(1, 0.106), (10, 0.110), (100, 0.149)]),
            fbg_transmission: 0.0436,
            fbg_reflection: 0.0436,
            fiber_per_timestep: 0.00102,
            circulator_pass: 0.500,
            misc: BTreeMap::from([(1, 0.510), (2, 0.720), (3, 0.931)]),
        }
    }

    /// Same components as [`LossTable::reference`], every entry 0 dB.
    pub fn lossless() -> Self {
        let mut table = Self::reference();
        table.loop_pass.values_mut().for_each(|v| *v = 0.0);
        table.misc.values_mut().for_each(|v| *v = 0.0);
        table.fbg_transmission = 0.0;
        table.fbg_reflection = 0.0;
        table.fiber_per_timestep = 0.0;
        table.circulator_pass = 0.0;
        table
    }

    /// Every entry as a `(label, dB)` pair, in a stable order.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .loop_pass
            .iter()
            .map(|(len, db)| (format!("loop_{len}"), *db))
            .collect();
        out.push(("fbg_transmission".into(), self.fbg_transmission));
        out.push(("fbg_reflection".into(), self.fbg_reflection));
        out.push(("fiber_per_timestep".into(), self.fiber_per_timestep));
        out.push(("circulator".into(), self.circulator_pass));
        out.extend(self.misc.iter().map(|(k, db)| {
            let label = if *k == 1 {
                "misc_1_loop".to_string()
            } else {
                format!("misc_{k}_loops")
            };
            (label, *db)
        }));
        out
    }

    pub fn is_lossless(&self) -> bool {
        self.entries().iter().all(|(_, db)| *db == 0.0)
    }

    pub fn misc_for(&self, loop_count: usize) -> Option<f64> {
        self.misc.get(&loop_count).copied()
    }

    pub fn validate(&self) -> Result<()> {
        for (label, db) in self.entries() {
            if !db.is_finite() || db < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "loss `{label}` must be a non-negative number of dB, got {db}"
                )));
            }
        }
        Ok(())
    }
}

/// Named starting points for a [`SetupConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// A single 1-timestep switchable delay loop with reference losses.
    OneLoopDefault,
    /// 100-, 10- and 1-timestep loops with reference losses.
    ThreeLoopDefault,
    /// One loop, all losses zero.
    Lossless,
}

impl Preset {
    pub const ALL: [Preset; 3] = [
        Preset::OneLoopDefault,
        Preset::ThreeLoopDefault,
        Preset::Lossless,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::OneLoopDefault => "one-loop",
            Preset::ThreeLoopDefault => "three-loop",
            Preset::Lossless => "lossless",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "oneloop" | "oneloopdefault" => Ok(Preset::OneLoopDefault),
            "threeloop" | "threeloopdefault" => Ok(Preset::ThreeLoopDefault),
            "lossless" => Ok(Preset::Lossless),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

fn default_t_bin() -> f64 {
    DEFAULT_T_BIN
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupConfig {
    /// Heralding probability per frequency-time bin.
    pub p: f64,
    /// Time bins per batch.
    pub m: usize,
    /// Output photons, equal to the number of target frequency bins.
    pub n: usize,
    /// Time-bin duration in seconds.
    #[serde(default = "default_t_bin")]
    pub t_bin: f64,
    #[serde(default)]
    pub variant: Variant,
    /// Memory loop lengths in timesteps, strictly decreasing and ending in 1.
    pub loop_lengths: Vec<usize>,
    #[serde(default)]
    pub occupancy: Occupancy,
    pub loss_table: LossTable,
}

impl SetupConfig {
    pub fn preset(preset: Preset) -> Self {
        let (loop_lengths, loss_table) = match preset {
            Preset::OneLoopDefault => (vec![1], LossTable::reference()),
            Preset::ThreeLoopDefault => (vec![100, 10, 1], LossTable::reference()),
            Preset::Lossless => (vec![1], LossTable::lossless()),
        };
        Self {
            p: DEFAULT_P,
            m: 1,
            n: 1,
            t_bin: DEFAULT_T_BIN,
            variant: Variant::Fixed,
            loop_lengths,
            occupancy: Occupancy::Unlimited,
            loss_table,
        }
    }

    /// Looks a preset up by name, e.g. `"one-loop"` or `"ThreeLoopDefault"`.
    pub fn preset_named(name: &str) -> Result<Self> {
        Ok(Self::preset(name.parse()?))
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_occupancy(mut self, occupancy: Occupancy) -> Self {
        self.occupancy = occupancy;
        self
    }

    pub fn with_t_bin(mut self, t_bin: f64) -> Self {
        self.t_bin = t_bin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p must lie in [0, 1], got {}", self.p));
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(self.t_bin.is_finite() && self.t_bin > 0.0) {
            return bad(format!("t_bin must be positive, got {}", self.t_bin));
        }
        match self.loop_lengths.last() {
            None => return bad("loop_lengths must not be empty".into()),
            Some(&last) if last != 1 => {
                return bad(format!(
                    "loop_lengths must end in 1, got {:?}",
                    self.loop_lengths
                ))
            }
            _ => {}
        }
        if self.loop_lengths.windows(2).any(|w| w[0] <= w[1]) {
            return bad(format!(
                "loop_lengths must be strictly decreasing, got {:?}",
                self.loop_lengths
            ));
        }
        self.loss_table.validate()?;
        for len in &self.loop_lengths {
            if !self.loss_table.loop_pass.contains_key(len) {
                return bad(format!(
                    "loss_table has no loop_pass entry for length {len}"
                ));
            }
        }
        if self.loss_table.misc_for(self.loop_lengths.len()).is_none() {
            return bad(format!(
                "loss_table has no misc entry for {} loop(s)",
                self.loop_lengths.len()
            ));
        }
        Ok(())
    }

    /// Number of batches, which equals the number of frequency bins.
    pub fn batch_count(&self) -> usize {
        match self.variant {
            Variant::Fixed => self.n,
            Variant::Partial => 2 * self.n,
        }
    }

    /// Length of the whole scheme in time bins.
    pub fn total_bins(&self) -> usize {
        self.batch_count() * self.m
    }

    pub fn batch_duration_s(&self) -> f64 {
        self.m as f64 * self.t_bin
    }

    /// Spacing between neighbouring gratings, half a batch.
    pub fn fbg_pitch_s(&self) -> f64 {
        self.batch_duration_s() / 2.0
    }

    pub fn total_duration_s(&self) -> f64 {
        self.total_bins() as f64 * self.t_bin
    }

    /// Global index of the last time bin of batch `batch`.
    pub fn batch_end(&self, batch: usize) -> usize {
        (batch + 1) * self.m - 1
    }

    /// Number of gratings a photon of batch `batch` transmits through before
    /// reflecting. The earliest batch travels deepest.
    pub fn fbg_depth(&self, batch: usize) -> usize {
        self.batch_count() - 1 - batch
    }

    /// Largest delay a photon may need to reach the end of `batch`.
    ///
    /// Fixed batches only draw from their own `m` bins; Partial batches may
    /// take a photon from any earlier bin.
    pub fn max_delay(&self, batch: usize) -> usize {
        match self.variant {
            Variant::Fixed => self.m - 1,
            Variant::Partial => self.batch_end(batch),
        }
    }

    pub fn loop_misc_db(&self) -> f64 {
        self.loss_table
            .misc_for(self.loop_lengths.len())
            .unwrap_or(0.0)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }
}
