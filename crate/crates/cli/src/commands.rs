//! Table-producing commands. Each takes a resolved [`Setup`] and returns the
//! rows the binary writes out.

use std::fmt::Write as _;

use ftmux_core::config::REFERENCE_LOSSES;
use ftmux_core::loss::db_to_loss_percent;
use ftmux_core::rates::{no_multiplexing_rate, rate_curve};
use ftmux_core::stream::StreamKey;
use ftmux_core::{
    epsilon_m, epsilon_rate, improvement_ratio, lossless_success, mc_optimal_m, optimal_m,
    sample_grid, McSettings, Objective, Preset, SetupConfig, Variant,
};

use crate::error::{usage, CliResult};
use crate::table::{Table, Value};

/// Allowed deviation between a derived loss percentage and the reference one.
pub const PERCENT_TOLERANCE: f64 = 0.05;

/// The effective configuration and where it came from.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: SetupConfig,
    /// Set when the loss table came from a named preset.
    pub preset: Option<Preset>,
    pub source: String,
}

impl Setup {
    pub fn from_preset(preset: Preset) -> Self {
        Self {
            config: SetupConfig::preset(preset),
            preset: Some(preset),
            source: format!("preset {preset}"),
        }
    }

    fn describe(&self, table: &mut Table) {
        table.comment(format!("source: {}", self.source));
        let json = serde_json::to_string(&self.config).expect("config serializes");
        table.comment(format!("config: {json}"));
    }

    fn require_fixed(&self, command: &str) -> CliResult<()> {
        if self.config.variant != Variant::Fixed {
            return Err(usage(format!(
                "{command} evaluates closed forms and needs --variant fixed"
            )));
        }
        Ok(())
    }
}

/// Formats with three significant figures, the precision loss values are quoted with.
pub fn sig3(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let decimals = (2 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Component table with derived loss percentages. The boolean is false if a
/// default preset is active and any percentage strays from its reference.
pub fn losses_validate(setup: &Setup) -> CliResult<(String, bool)> {
    let mut report = String::new();
    let _ = writeln!(report, "loss table ({})", setup.source);
    let check = matches!(
        setup.preset,
        Some(Preset::OneLoopDefault | Preset::ThreeLoopDefault)
    );
    let mut ok = true;
    for (label, db) in setup.config.loss_table.entries() {
        let percent = db_to_loss_percent(db)?;
        let mut line = format!("{label:<20} {} dB / {} %", sig3(db), sig3(percent));
        if check {
            if let Some(&(_, _, reference)) = REFERENCE_LOSSES.iter().find(|(l, _, _)| *l == label)
            {
                let dev = (percent - reference).abs();
                let pass = dev <= PERCENT_TOLERANCE;
                ok &= pass;
                let _ = write!(
                    line,
                    "   reference {} %  {}",
                    sig3(reference),
                    if pass { "ok" } else { "MISMATCH" }
                );
            }
        }
        let _ = writeln!(report, "{line}");
    }
    let active = setup.config.loop_lengths.len();
    let _ = writeln!(
        report,
        "active: {active} loop(s) {:?}, misc {} dB",
        setup.config.loop_lengths,
        sig3(setup.config.loop_misc_db())
    );
    if check {
        let _ = writeln!(
            report,
            "{}",
            if ok {
                format!("PASS: all percentages within {PERCENT_TOLERANCE} points")
            } else {
                "FAIL: derived percentages disagree with the reference table".to_string()
            }
        );
    }
    Ok((report, ok))
}

pub fn rate_sweep(setup: &Setup, ns: &[usize], m_max: usize) -> CliResult<Table> {
    setup.require_fixed("rate-sweep")?;
    let mut table = Table::new(
        "rate-sweep",
        &[
            "n",
            "m",
            "rate_lossless_per_bin",
            "rate_lossy_per_bin",
            "rate_lossless_hz",
            "rate_lossy_hz",
            "no_multiplexing_per_bin",
        ],
    );
    setup.describe(&mut table);
    table.comment(format!(
        "m in 1..={m_max}; n and m in the config are overridden per row"
    ));
    table.comment("units: *_per_bin are events per time bin; *_hz use t_bin from the config");
    for &n in ns {
        let cfg = setup.config.clone().with_n(n);
        let lossless = rate_curve(&cfg, m_max, Objective::Lossless)?;
        let lossy = rate_curve(&cfg, m_max, Objective::Lossy)?;
        let baseline = no_multiplexing_rate(cfg.p, n);
        for (i, (a, b)) in lossless.iter().zip(&lossy).enumerate() {
            table.push(vec![
                n.into(),
                (i + 1).into(),
                a.rate_per_bin.into(),
                b.rate_per_bin.into(),
                a.rate_hz.into(),
                b.rate_hz.into(),
                baseline.into(),
            ]);
        }
    }
    Ok(table)
}

pub fn max_rate(setup: &Setup, ns: &[usize], m_max: usize) -> CliResult<Table> {
    setup.require_fixed("max-rate")?;
    let mut table = Table::new(
        "max-rate",
        &[
            "n",
            "m_star",
            "max_rate_lossless",
            "max_rate_lossy",
            "no_multiplexing",
            "m_star_lossless",
            "max_rate_lossy_hz",
        ],
    );
    setup.describe(&mut table);
    table.comment(format!(
        "m scanned over 1..={m_max}; m_star maximizes the lossy rate, m_star_lossless the lossless one"
    ));
    table.comment("units: rates per time bin except *_hz");
    for &n in ns {
        let cfg = setup.config.clone().with_n(n);
        let (m_lossless, lossless) = optimal_m(&cfg, m_max, Objective::Lossless)?;
        let (m_lossy, lossy) = optimal_m(&cfg, m_max, Objective::Lossy)?;
        table.push(vec![
            n.into(),
            m_lossy.into(),
            lossless.rate_per_bin.into(),
            lossy.rate_per_bin.into(),
            no_multiplexing_rate(cfg.p, n).into(),
            m_lossless.into(),
            lossy.rate_hz.into(),
        ]);
    }
    Ok(table)
}

pub fn ratio_sweep(setup: &Setup, ns: &[usize], ps: &[f64], m_max: usize) -> CliResult<Table> {
    setup.require_fixed("ratio-sweep")?;
    if let Some(p) = ps.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(usage(format!(
            "every p in the grid must lie in (0, 1], got {p}"
        )));
    }
    let mut table = Table::new("ratio-sweep", &["n", "p", "ratio", "m_star"]);
    setup.describe(&mut table);
    table.comment(format!(
        "ratio = best lossy rate over m in 1..={m_max} divided by p^n; p in the config is overridden per row"
    ));
    for &n in ns {
        for &p in ps {
            let cfg = setup.config.clone().with_n(n).with_p(p);
            let ratio = improvement_ratio(&cfg, m_max)?;
            let (m_star, _) = optimal_m(&cfg, m_max, Objective::Lossy)?;
            table.push(vec![n.into(), p.into(), ratio.into(), m_star.into()]);
        }
    }
    Ok(table)
}

pub fn epsilon_table(setup: &Setup, ns: &[usize], epsilons: &[f64]) -> CliResult<Table> {
    let mut table = Table::new(
        "epsilon",
        &[
            "n",
            "p",
            "epsilon",
            "m_epsilon",
            "rate_epsilon_per_bin",
            "success_at_m_epsilon",
        ],
    );
    setup.describe(&mut table);
    table.comment("rate_epsilon uses the unrounded logarithm; m_epsilon rounds it up");
    let p = setup.config.p;
    for &n in ns {
        for &eps in epsilons {
            let m = epsilon_m(p, n, eps)?;
            let rate = epsilon_rate(p, n, eps, setup.config.t_bin)?;
            table.push(vec![
                n.into(),
                p.into(),
                eps.into(),
                m.into(),
                rate.rate_per_bin.into(),
                lossless_success(p, m, n)?.into(),
            ]);
        }
    }
    Ok(table)
}

pub fn mc_partial(
    setup: &Setup,
    ns: &[usize],
    m_max: usize,
    settings: &McSettings,
) -> CliResult<Table> {
    let mut table = Table::new(
        "mc-partial",
        &[
            "n",
            "m_star",
            "rate_partial",
            "stderr",
            "rate_fixed",
            "occupancy_model",
            "rate_partial_lossless",
        ],
    );
    let mut partial = setup.clone();
    partial.config.variant = Variant::Partial;
    partial.describe(&mut table);
    table.comment(format!(
        "samples {} per m, seed {}, m in 1..={m_max}",
        settings.samples, settings.seed
    ));
    table
        .comment("rate_partial: lossy Monte Carlo rate of n photons in any n of 2n bins at m_star");
    table.comment("rate_fixed: closed-form lossy optimum with n photons in n fixed bins");
    table.comment("units: events per time bin; stderr is the standard error of rate_partial");
    for &n in ns {
        let cfg = partial.config.clone().with_n(n);
        let (m_star, est) = mc_optimal_m(&cfg, settings, m_max)?;
        let fixed = cfg.clone().with_variant(Variant::Fixed);
        let (_, best_fixed) = optimal_m(&fixed, m_max, Objective::Lossy)?;
        table.push(vec![
            n.into(),
            m_star.into(),
            est.lossy.rate_per_bin.into(),
            est.lossy.stderr.into(),
            best_fixed.rate_per_bin.into(),
            Value::Text(cfg.occupancy.to_string()),
            est.lossless.rate_per_bin.into(),
        ]);
    }
    Ok(table)
}

/// One sampled grid as CSV, with its schedule summarized in comments.
pub fn grid_snapshot(setup: &Setup, seed: u64) -> CliResult<String> {
    let cfg = &setup.config;
    cfg.validate()?;
    let grid = sample_grid(cfg, &mut StreamKey::new(seed, "grid-snapshot").rng(0));
    let mut out = String::new();
    let _ = writeln!(out, "# ftmux grid");
    let _ = writeln!(out, "# source: {}", setup.source);
    let _ = writeln!(
        out,
        "# config: {}",
        serde_json::to_string(cfg).expect("config serializes")
    );
    let _ = writeln!(
        out,
        "# seed: {seed}; rows are frequency bins, columns are time bins"
    );
    match ftmux_core::schedule::schedule(&grid, cfg)? {
        Some(s) => {
            for f in &s.fills {
                let _ = writeln!(
                    out,
                    "# fill batch {} from bin {} delay {} depth {}",
                    f.batch,
                    f.source_bin(cfg),
                    f.delay,
                    f.fbg_depth
                );
            }
        }
        None => {
            let _ = writeln!(out, "# no valid schedule");
        }
    }
    out.push_str(&grid.to_csv());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_significant_figures() {
        assert_eq!(sig3(0.5), "0.500");
        assert_eq!(sig3(10.87), "10.9");
        assert_eq!(sig3(0.00102), "0.00102");
        assert_eq!(sig3(0.0235), "0.0235");
        assert_eq!(sig3(0.0), "0");
    }

    #[test]
    fn validate_reference_presets() {
        for preset in [Preset::OneLoopDefault, Preset::ThreeLoopDefault] {
            let (report, ok) = losses_validate(&Setup::from_preset(preset)).unwrap();
            assert!(ok, "{report}");
            assert!(
                report.contains("circulator           0.500 dB / 10.9 %"),
                "{report}"
            );
            assert!(report.contains("PASS"));
        }
        let (report, ok) = losses_validate(&Setup::from_preset(Preset::Lossless)).unwrap();
        assert!(ok);
        assert!(report
            .lines()
            .filter(|l| l.contains(" dB / "))
            .all(|l| l.contains("0 dB / 0 %")));
    }

    #[test]
    fn validate_flags_mismatch() {
        let mut setup = Setup::from_preset(Preset::OneLoopDefault);
        setup.config.loss_table.circulator_pass = 0.6;
        let (report, ok) = losses_validate(&setup).unwrap();
        assert!(!ok);
        assert!(report.contains("MISMATCH"));
    }

    #[test]
    fn sweeps_need_fixed_variant() {
        let mut setup = Setup::from_preset(Preset::Lossless);
        setup.config.variant = Variant::Partial;
        assert!(rate_sweep(&setup, &[2], 3).is_err());
        assert!(max_rate(&setup, &[2], 3).is_err());
    }

    #[test]
    fn ratio_rejects_zero_p() {
        let setup = Setup::from_preset(Preset::ThreeLoopDefault);
        assert!(ratio_sweep(&setup, &[4], &[0.0, 0.1], 10).is_err());
    }
}
