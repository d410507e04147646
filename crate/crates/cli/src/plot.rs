//! Minimal SVG line plots for the sweep CSVs. The chart type is picked from
//! the CSV's header row; output contains no timestamps or random ids.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{usage, CliResult};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dash {
    Solid,
    Dashed,
    Dotted,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: usize,
    pub dash: Dash,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

struct Csv {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn parse(text: &str) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { columns, rows })
    }

    fn has(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }

    fn col(&self, name: &str) -> CliResult<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| usage(format!("column `{name}` missing")))
    }

    fn num(&self, row: &[String], col: usize) -> CliResult<f64> {
        row[col]
            .parse()
            .map_err(|_| usage(format!("`{}` is not a number", row[col])))
    }

    /// Groups rows by the value in `key`, in order of first appearance of each
    /// numeric key.
    fn group(&self, key: &str, x: &str, y: &str) -> CliResult<BTreeMap<u64, Vec<(f64, f64)>>> {
        let (k, xi, yi) = (self.col(key)?, self.col(x)?, self.col(y)?);
        let mut groups: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
        for row in &self.rows {
            let id = self.num(row, k)? as u64;
            groups
                .entry(id)
                .or_default()
                .push((self.num(row, xi)?, self.num(row, yi)?));
        }
        Ok(groups)
    }

    fn column_series(&self, x: &str, y: &str) -> CliResult<Vec<(f64, f64)>> {
        let (xi, yi) = (self.col(x)?, self.col(y)?);
        self.rows
            .iter()
            .map(|r| Ok((self.num(r, xi)?, self.num(r, yi)?)))
            .collect()
    }
}

/// Builds a chart from CSV text produced by one of the sweep commands.
pub fn chart_from_csv(text: &str) -> CliResult<Chart> {
    let csv = Csv::parse(text).map_err(|e| usage(format!("unreadable CSV: {e}")))?;
    if csv.rows.is_empty() {
        return Err(usage("CSV has no data rows"));
    }
    if csv.has("rate_lossless_per_bin") && csv.has("m") {
        let mut series = Vec::new();
        let lossless = csv.group("n", "m", "rate_lossless_per_bin")?;
        let lossy = csv.group("n", "m", "rate_lossy_per_bin")?;
        let baseline = if csv.has("no_multiplexing_per_bin") {
            Some(csv.group("n", "m", "no_multiplexing_per_bin")?)
        } else {
            None
        };
        for (i, (n, pts)) in lossless.into_iter().enumerate() {
            series.push(Series {
                label: format!("n={n} lossless"),
                color: i,
                dash: Dash::Solid,
                points: pts,
            });
            series.push(Series {
                label: format!("n={n} lossy"),
                color: i,
                dash: Dash::Dashed,
                points: lossy[&n].clone(),
            });
            if let Some(b) = &baseline {
                series.push(Series {
                    label: format!("n={n} no mux"),
                    color: i,
                    dash: Dash::Dotted,
                    points: b[&n].clone(),
                });
            }
        }
        return Ok(Chart {
            title: "n-photon generation rate".into(),
            x_label: "time bins per batch m".into(),
            y_label: "rate per time bin".into(),
            log_x: false,
            log_y: true,
            series,
        });
    }
    if csv.has("max_rate_lossless") {
        let series = vec![
            Series {
                label: "lossless".into(),
                color: 0,
                dash: Dash::Solid,
                points: csv.column_series("n", "max_rate_lossless")?,
            },
            Series {
                label: "lossy".into(),
                color: 1,
                dash: Dash::Dashed,
                points: csv.column_series("n", "max_rate_lossy")?,
            },
            Series {
                label: "no multiplexing".into(),
                color: 2,
                dash: Dash::Dotted,
                points: csv.column_series("n", "no_multiplexing")?,
            },
        ];
        return Ok(Chart {
            title: "maximum n-photon generation rate".into(),
            x_label: "photons n".into(),
            y_label: "rate per time bin".into(),
            log_x: false,
            log_y: true,
            series,
        });
    }
    if csv.has("ratio") && csv.has("p") {
        let series = csv
            .group("n", "p", "ratio")?
            .into_iter()
            .enumerate()
            .map(|(i, (n, points))| Series {
                label: format!("n={n}"),
                color: i,
                dash: Dash::Solid,
                points,
            })
            .collect();
        return Ok(Chart {
            title: "rate with multiplexing / rate without".into(),
            x_label: "photon probability per bin p".into(),
            y_label: "improvement ratio".into(),
            log_x: true,
            log_y: true,
            series,
        });
    }
    if csv.has("rate_partial") {
        let series = vec![
            Series {
                label: "n of 2n bins".into(),
                color: 0,
                dash: Dash::Solid,
                points: csv.column_series("n", "rate_partial")?,
            },
            Series {
                label: "n of n bins".into(),
                color: 1,
                dash: Dash::Dashed,
                points: csv.column_series("n", "rate_fixed")?,
            },
        ];
        return Ok(Chart {
            title: "n-photon rate, 2n vs n frequency bins".into(),
            x_label: "photons n".into(),
            y_label: "rate per time bin".into(),
            log_x: false,
            log_y: true,
            series,
        });
    }
    Err(usage(format!("unrecognized CSV columns {:?}", csv.columns)))
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        if log {
            let (mut a, mut b) = (lo.log10().floor(), hi.log10().ceil());
            if a == b {
                a -= 1.0;
                b += 1.0;
            }
            Some(Self { lo: a, hi: b, log })
        } else {
            if lo == hi {
                lo -= 1.0;
                hi += 1.0;
            }
            let step = nice_step((hi - lo) / 5.0);
            Some(Self {
                lo: (lo / step).floor() * step,
                hi: (hi / step).ceil() * step,
                log,
            })
        }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let stride = ((self.hi - self.lo) / 8.0).ceil().max(1.0) as i64;
            (self.lo as i64..=self.hi as i64)
                .filter(|k| (k - self.lo as i64) % stride == 0)
                .map(|k| (10f64.powi(k as i32), format!("1e{k}")))
                .collect()
        } else {
            let step = nice_step((self.hi - self.lo) / 5.0);
            let count = ((self.hi - self.lo) / step).round() as i64;
            (0..=count)
                .map(|i| {
                    let v = self.lo + i as f64 * step;
                    (v, format!("{}", (v * 1e6).round() / 1e6))
                })
                .collect()
        }
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn usable(v: f64, log: bool) -> bool {
    v.is_finite() && (!log || v > 0.0)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render_svg(chart: &Chart) -> CliResult<String> {
    let pts = || {
        chart
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|&(x, y)| usable(x, chart.log_x) && usable(y, chart.log_y))
    };
    let x_axis =
        Axis::fit(pts().map(|p| p.0), chart.log_x).ok_or_else(|| usage("nothing to plot"))?;
    let y_axis =
        Axis::fit(pts().map(|p| p.1), chart.log_y).ok_or_else(|| usage("nothing to plot"))?;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x_axis.frac(x) * plot_w;
    let sy = |y: f64| TOP + (1.0 - y_axis.frac(y)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&chart.title)
    );

    for (v, label) in x_axis.ticks() {
        let x = sx(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
            TOP + plot_h
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            TOP + plot_h + 18.0
        );
    }
    for (v, label) in y_axis.ticks() {
        let y = sy(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(&chart.y_label)
    );

    for (i, s) in chart.series.iter().enumerate() {
        let color = PALETTE[s.color % PALETTE.len()];
        let dash = match s.dash {
            Dash::Solid => "",
            Dash::Dashed => r#" stroke-dasharray="6 4""#,
            Dash::Dotted => r#" stroke-dasharray="2 3""#,
        };
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|&&(x, y)| usable(x, chart.log_x) && usable(y, chart.log_y))
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !coords.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.8"{dash} points="{}"/>"#,
                coords.join(" ")
            );
        }
        let ly = TOP + 10.0 + i as f64 * 18.0;
        let lx = WIDTH - RIGHT + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.8"{dash}/>"#,
            lx + 28.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 34.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn plot_csv(text: &str) -> CliResult<String> {
    render_svg(&chart_from_csv(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RATE: &str = "# ftmux rate-sweep\nn,m,rate_lossless_per_bin,rate_lossy_per_bin,rate_lossless_hz,rate_lossy_hz,no_multiplexing_per_bin\n\
        4,1,2.5e-5,1e-5,2500,1000,1e-4\n4,2,1e-4,5e-5,1e4,5e3,1e-4\n6,1,1e-7,1e-8,10,1,1e-6\n6,2,1e-6,1e-7,100,10,1e-6\n";

    #[test]
    fn rate_sweep_curves() {
        let chart = chart_from_csv(RATE).unwrap();
        assert_eq!(chart.series.len(), 6);
        assert_eq!(chart.series[0].label, "n=4 lossless");
        assert_eq!(chart.series[1].dash, Dash::Dashed);
        assert!(chart.log_y && !chart.log_x);
    }

    #[test]
    fn ratio_is_log_log() {
        let text = "n,p,ratio,m_star\n4,0.01,100,50\n4,0.1,7,22\n8,0.01,1e9,60\n8,0.1,2000,24\n";
        let chart = chart_from_csv(text).unwrap();
        assert!(chart.log_x && chart.log_y);
        assert_eq!(chart.series.len(), 2);
    }

    #[test]
    fn svg_is_deterministic() {
        let a = plot_csv(RATE).unwrap();
        assert_eq!(a, plot_csv(RATE).unwrap());
        assert!(a.starts_with("<svg"));
        assert_eq!(a.matches("<polyline").count(), 6);
        assert!(a.contains("1e-8"));
    }

    #[test]
    fn rejects_empty_and_unknown() {
        assert!(chart_from_csv("").is_err());
        assert!(
            chart_from_csv("# only a comment\nn,m,rate_lossless_per_bin,rate_lossy_per_bin\n")
                .is_err()
        );
        assert!(chart_from_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn log_axis_drops_zero_rates() {
        let text = "n,m_star,max_rate_lossless,max_rate_lossy,no_multiplexing\n1,1,0,0,0\n2,5,1e-3,1e-4,1e-2\n";
        let svg = plot_csv(text).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        let all_zero = "n,m_star,max_rate_lossless,max_rate_lossy,no_multiplexing\n1,1,0,0,0\n";
        assert!(plot_csv(all_zero).is_err());
    }
}
