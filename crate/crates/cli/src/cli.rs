//! Argument parsing and dispatch for the `ftmux` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ftmux_core::config::DEFAULT_M_MAX;
use ftmux_core::montecarlo::DEFAULT_SAMPLES;
use ftmux_core::{McSettings, Occupancy, Preset, SetupConfig, Variant};

use crate::commands::{self, Setup};
use crate::error::{usage, CliError, CliResult};
use crate::plot;
use crate::table::{Format, Table};

#[derive(Debug, Parser)]
#[command(
    name = "ftmux",
    version,
    about = "Frequency-time multiplexed photon source rates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Loss-table checks.
    Losses {
        #[command(subcommand)]
        action: LossesAction,
    },
    /// Closed-form rates over a range of m for each n.
    RateSweep {
        #[command(flatten)]
        setup: SetupArgs,
        /// Photon counts, e.g. `4,6,8` or `1..10` (inclusive).
        #[arg(long, default_value = "4,6,8")]
        n: String,
        #[arg(long, default_value_t = DEFAULT_M_MAX)]
        m_max: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rate-maximizing m for each n, with and without loss.
    MaxRate {
        #[command(flatten)]
        setup: SetupArgs,
        #[arg(long, default_value = "1..10")]
        n: String,
        #[arg(long, default_value_t = DEFAULT_M_MAX)]
        m_max: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Improvement over p^n across a grid of p. Defaults to the three-loop preset.
    RatioSweep {
        #[command(flatten)]
        setup: SetupArgs,
        #[arg(long, default_value = "4,6,8")]
        n: String,
        /// `lo:hi:count` for a log grid, or a comma list. Overrides --p.
        #[arg(long)]
        p_grid: Option<String>,
        #[arg(long, default_value_t = DEFAULT_M_MAX)]
        m_max: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Batch size that keeps the lossless failure probability under epsilon.
    Epsilon {
        #[command(flatten)]
        setup: SetupArgs,
        #[arg(long, default_value = "4,6,8")]
        n: String,
        /// Comma list of target failure probabilities.
        #[arg(long, default_value = "0.1,0.01,0.001")]
        epsilon: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo rate with 2n frequency bins, next to the n-bin optimum.
    McPartial {
        #[command(flatten)]
        setup: SetupArgs,
        #[arg(long, default_value = "2,3,4")]
        n: String,
        #[arg(long, default_value_t = 40)]
        m_max: usize,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sample one photon grid and print it with its schedule.
    Grid {
        #[command(flatten)]
        setup: SetupArgs,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a sweep CSV as SVG.
    Plot {
        /// CSV written by rate-sweep, max-rate, ratio-sweep or mc-partial.
        csv: PathBuf,
        /// SVG destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LossesAction {
    /// Print each component's loss and compare with the reference table.
    Validate {
        #[command(flatten)]
        setup: SetupArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SetupArgs {
    /// one-loop, three-loop or lossless.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<Preset>,
    /// JSON setup file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Time-bin duration in seconds.
    #[arg(long)]
    pub t_bin: Option<f64>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub occupancy: Option<Occupancy>,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: Format,
}

impl SetupArgs {
    /// Loads the preset or config file, then applies flag overrides.
    pub fn resolve(&self, default: Preset) -> CliResult<Setup> {
        let mut setup = match &self.config {
            Some(path) => Setup {
                config: SetupConfig::from_path(path)
                    .map_err(|e| usage(format!("config {}: {e}", path.display())))?,
                preset: None,
                source: format!("config {}", path.display()),
            },
            None => Setup::from_preset(self.preset.unwrap_or(default)),
        };
        let cfg = &mut setup.config;
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(t) = self.t_bin {
            cfg.t_bin = t;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(o) = self.occupancy {
            cfg.occupancy = o;
        }
        cfg.validate()?;
        Ok(setup)
    }
}

/// Parses `4,6,8`, `1..10` or a mix such as `1..3,8`. Ranges are inclusive.
pub fn parse_n_list(text: &str) -> CliResult<Vec<usize>> {
    let bad = || usage(format!("invalid n list `{text}`"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b
                .trim_start_matches('=')
                .trim()
                .parse()
                .map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(usage(format!(
            "n list `{text}` must contain positive integers"
        )));
    }
    Ok(out)
}

pub fn parse_f64_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    let out = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| usage(format!("invalid {what} list `{text}`")))?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(usage(format!("{what} values must be finite")));
    }
    Ok(out)
}

/// `lo:hi:count` gives `count` log-spaced points from `lo` to `hi`; anything
/// else is read as a comma list.
pub fn parse_p_grid(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return parse_f64_list(text, "p");
    }
    let bad = || usage(format!("invalid p grid `{text}` (expected lo:hi:count)"));
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo && count >= 1) {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi / lo).ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                lo * (step * i as f64).exp()
            }
        })
        .collect())
}

pub const DEFAULT_P_GRID: &str = "0.001:0.3:25";

fn check_m_max(m_max: usize) -> CliResult<()> {
    if m_max == 0 {
        return Err(usage("--m-max must be at least 1"));
    }
    Ok(())
}

fn emit(table: &Table, output: &OutputArgs) -> CliResult<()> {
    table.write(output.out.as_deref(), output.format)
}

fn emit_text(text: &str, out: Option<&Path>) -> CliResult<()> {
    use std::io::Write;
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Losses {
            action: LossesAction::Validate { setup },
        } => {
            let setup = setup.resolve(Preset::OneLoopDefault)?;
            let (report, ok) = commands::losses_validate(&setup)?;
            print!("{report}");
            if !ok {
                return Err(CliError::Threshold(
                    "loss percentages disagree with the reference table".into(),
                ));
            }
            Ok(())
        }
        Command::RateSweep {
            setup,
            n,
            m_max,
            output,
        } => {
            check_m_max(m_max)?;
            let setup = setup.resolve(Preset::OneLoopDefault)?;
            emit(
                &commands::rate_sweep(&setup, &parse_n_list(&n)?, m_max)?,
                &output,
            )
        }
        Command::MaxRate {
            setup,
            n,
            m_max,
            output,
        } => {
            check_m_max(m_max)?;
            let setup = setup.resolve(Preset::OneLoopDefault)?;
            emit(
                &commands::max_rate(&setup, &parse_n_list(&n)?, m_max)?,
                &output,
            )
        }
        Command::RatioSweep {
            setup,
            n,
            p_grid,
            m_max,
            output,
        } => {
            check_m_max(m_max)?;
            let ps = match (&p_grid, setup.p) {
                (Some(grid), _) => parse_p_grid(grid)?,
                (None, Some(p)) => vec![p],
                (None, None) => parse_p_grid(DEFAULT_P_GRID)?,
            };
            let resolved = setup.resolve(Preset::ThreeLoopDefault)?;
            emit(
                &commands::ratio_sweep(&resolved, &parse_n_list(&n)?, &ps, m_max)?,
                &output,
            )
        }
        Command::Epsilon {
            setup,
            n,
            epsilon,
            output,
        } => {
            let setup = setup.resolve(Preset::OneLoopDefault)?;
            let eps = parse_f64_list(&epsilon, "epsilon")?;
            emit(
                &commands::epsilon_table(&setup, &parse_n_list(&n)?, &eps)?,
                &output,
            )
        }
        Command::McPartial {
            setup,
            n,
            m_max,
            mc,
            output,
        } => {
            check_m_max(m_max)?;
            if mc.samples == 0 {
                return Err(usage("--samples must be at least 1"));
            }
            let setup = setup.resolve(Preset::OneLoopDefault)?;
            let settings = McSettings::new(mc.samples, mc.seed).with_workers(mc.workers);
            emit(
                &commands::mc_partial(&setup, &parse_n_list(&n)?, m_max, &settings)?,
                &output,
            )
        }
        Command::Grid {
            setup,
            n,
            m,
            seed,
            out,
        } => {
            let mut resolved = setup.resolve(Preset::OneLoopDefault)?;
            resolved.config = resolved.config.with_n(n).with_m(m);
            emit_text(&commands::grid_snapshot(&resolved, seed)?, out.as_deref())
        }
        Command::Plot { csv, out } => {
            let text = std::fs::read_to_string(&csv)
                .map_err(|e| usage(format!("cannot read {}: {e}", csv.display())))?;
            emit_text(&plot::plot_csv(&text)?, out.as_deref())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_lists() {
        assert_eq!(parse_n_list("4,6,8").unwrap(), vec![4, 6, 8]);
        assert_eq!(parse_n_list("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_n_list("1..=2, 7").unwrap(), vec![1, 2, 7]);
        assert!(parse_n_list("0,1").is_err());
        assert!(parse_n_list("5..2").is_err());
        assert!(parse_n_list("four").is_err());
    }

    #[test]
    fn p_grids() {
        let g = parse_p_grid("0.001:0.1:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 0.01).abs() < 1e-12);
        assert_eq!(g[2], 0.1);
        assert_eq!(parse_p_grid("0.02,0.1").unwrap(), vec![0.02, 0.1]);
        assert!(parse_p_grid("0:0.1:3").is_err());
        let default = parse_p_grid(DEFAULT_P_GRID).unwrap();
        assert_eq!((default[0], default[24]), (0.001, 0.3));
    }

    #[test]
    fn ratio_sweep_defaults_to_three_loops() {
        let cli = Cli::try_parse_from(["ftmux", "ratio-sweep"]).unwrap();
        let Command::RatioSweep { setup, .. } = cli.command else {
            panic!()
        };
        assert_eq!(
            setup
                .resolve(Preset::ThreeLoopDefault)
                .unwrap()
                .config
                .loop_lengths,
            vec![100, 10, 1]
        );
    }

    #[test]
    fn preset_and_config_conflict() {
        assert!(Cli::try_parse_from([
            "ftmux", "max-rate", "--preset", "lossless", "--config", "x.json"
        ])
        .is_err());
    }

    #[test]
    fn overrides_are_validated() {
        let cli = Cli::try_parse_from(["ftmux", "max-rate", "--p", "1.5"]).unwrap();
        let Command::MaxRate { setup, .. } = cli.command else {
            panic!()
        };
        assert!(setup.resolve(Preset::OneLoopDefault).is_err());
    }
}
