//! Self-contained SVG line charts of sweep rows.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SweepRow;
use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    ConditionRates,
    RecoveryRates,
    Margins,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "condition_rates" => Ok(PlotKind::ConditionRates),
            "recovery_rates" => Ok(PlotKind::RecoveryRates),
            "margins" => Ok(PlotKind::Margins),
            other => Err(Error::InvalidParameter(format!(
                "plot kind `{other}` is not one of condition_rates, recovery_rates, margins"
            ))),
        }
    }
}

impl PlotKind {
    fn title(self) -> &'static str {
        match self {
            PlotKind::ConditionRates => "fraction of evaluations where the condition holds",
            PlotKind::RecoveryRates => "subspace-preserving recovery rate",
            PlotKind::Margins => "mean margin",
        }
    }

    fn is_rate(self) -> bool {
        self != PlotKind::Margins
    }
}

/// A named sequence of y-values, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

fn cell_label(r: &SweepRow) -> String {
    let c = &r.cell;
    format!("{}/{}/{}/{}/{}", c.ambient_dim, c.subspace_dim, c.num_inside, c.num_outside, c.angle)
}

fn series_for(rows: &[SweepRow], kind: PlotKind) -> Result<Vec<Series>> {
    let mut out = Vec::new();
    match kind {
        PlotKind::RecoveryRates => {
            out.push(Series {
                name: "BP".into(),
                values: rows.iter().map(|r| r.bp_recovery_rate).collect(),
            });
            out.push(Series {
                name: "OMP".into(),
                values: rows.iter().map(|r| r.omp_recovery_rate).collect(),
            });
        }
        PlotKind::ConditionRates | PlotKind::Margins => {
            for (id, _) in &rows[0].counts {
                let values = rows
                    .iter()
                    .map(|r| {
                        let c = r.counts_for(*id).ok_or_else(|| {
                            Error::InvalidParameter(format!("row {} lacks condition {id}", cell_label(r)))
                        })?;
                        Ok(if kind == PlotKind::Margins { c.mean_margin } else { c.hold_rate() })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if kind == PlotKind::Margins && values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "mean margins are only stored in the JSON sweep output".into(),
                    ));
                }
                out.push(Series {
                    name: id.to_string(),
                    values,
                });
            }
        }
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders series over a shared categorical x-axis. Rates are clamped to `[0, 1]`.
pub fn render_svg(title: &str, labels: &[String], series: &[Series], rates: bool) -> Result<String> {
    let n = labels.len();
    if n == 0 || series.is_empty() {
        return Err(Error::InvalidParameter("nothing to plot".into()));
    }
    let (lo, hi) = if rates {
        (0.0, 1.0)
    } else {
        let all = series.iter().flat_map(|s| s.values.iter().copied());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |i: usize| {
        if n == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (n - 1) as f64
        }
    };
    let y = |v: f64| {
        let v = if rates { v.clamp(0.0, 1.0) } else { v };
        TOP + plot_h * (1.0 - (v - lo) / (hi - lo))
    };

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(w, r#"<text x="{LEFT}" y="18" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(
        w,
        r##"<rect class="frame" x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let yy = y(v);
        let _ = writeln!(
            w,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            yy + 4.0
        );
    }
    for (i, label) in labels.iter().enumerate() {
        let xx = x(i);
        let _ = writeln!(
            w,
            r#"<text x="{xx:.2}" y="{:.2}" text-anchor="end" transform="rotate(-35 {xx:.2} {:.2})">{}</text>"#,
            TOP + plot_h + 14.0,
            TOP + plot_h + 14.0,
            escape(label)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">cell (D/d0/N0/N-/angle)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 6.0
    );
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ser
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.2},{:.2}", x(i), y(*v)))
            .collect();
        let name = escape(&ser.name);
        let _ = writeln!(
            w,
            r#"<polyline class="series" data-name="{name}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        for p in &pts {
            let (px, py) = p.split_once(',').expect("formatted above");
            let _ = writeln!(w, r#"<circle cx="{px}" cy="{py}" r="2.5" fill="{color}"/>"#);
        }
        let ly = TOP + 14.0 * k as f64 + 6.0;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Long-format CSV `series,cell,x,y` matching the chart.
fn plot_csv(labels: &[String], series: &[Series]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidParameter(e.to_string());
    w.write_record(["series", "cell", "x", "y"]).map_err(io)?;
    for s in series {
        for (i, v) in s.values.iter().enumerate() {
            w.write_record([s.name.clone(), labels[i].clone(), i.to_string(), v.to_string()])
                .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes the chart of `kind` to `svg_path` and its data to `csv_path`.
pub fn emit_plot_data(rows: &[SweepRow], kind: PlotKind, svg_path: &Path, csv_path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no sweep rows to plot".into()));
    }
    let labels: Vec<String> = rows.iter().map(cell_label).collect();
    let series = series_for(rows, kind)?;
    std::fs::write(svg_path, render_svg(kind.title(), &labels, &series, kind.is_rate())?)?;
    std::fs::write(csv_path, plot_csv(&labels, &series)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polyline_ys(svg: &str) -> Vec<Vec<f64>> {
        svg.lines()
            .filter(|l| l.starts_with("<polyline"))
            .map(|l| {
                let pts = l.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
                pts.split(' ')
                    .map(|p| p.split(',').nth(1).unwrap().parse().unwrap())
                    .collect()
            })
            .collect()
    }

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn single_point_chart() {
        let svg = render_svg("t", &labels(1), &[Series { name: "a".into(), values: vec![0.5] }], true).unwrap();
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(polyline_ys(&svg), vec![vec![TOP + (HEIGHT - TOP - BOTTOM) / 2.0]]);
    }

    #[test]
    fn increasing_rates_climb_the_chart() {
        let values = vec![0.0, 0.2, 0.2, 0.7, 1.0];
        let svg = render_svg("t", &labels(5), &[Series { name: "a".into(), values }], true).unwrap();
        let ys = &polyline_ys(&svg)[0];
        assert!(ys.windows(2).all(|w| w[1] <= w[0]), "{ys:?}");
    }

    #[test]
    fn rates_stay_inside_the_frame() {
        let values = vec![-0.3, 0.0, 1.0, 1.4];
        let svg = render_svg("t", &labels(4), &[Series { name: "a".into(), values }], true).unwrap();
        for y in &polyline_ys(&svg)[0] {
            assert!((TOP..=HEIGHT - BOTTOM).contains(y), "{y}");
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(render_svg("t", &[], &[], true).is_err());
        let dir = tempfile::tempdir().unwrap();
        let r = emit_plot_data(&[], PlotKind::Margins, &dir.path().join("a.svg"), &dir.path().join("a.csv"));
        assert!(r.is_err());
        assert!("bars".parse::<PlotKind>().is_err());
    }
}
