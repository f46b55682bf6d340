//! Tables and static SVG charts from sweep summaries and curves.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::harness::{AlgorithmCurves, SummaryRow};
use crate::learners::Algorithm;
use crate::metrics::{CurveKind, CurvePoint};

/// Window sizes shown in the published F1 grid.
pub const GRID_WINDOWS: [usize; 9] = [1, 10, 20, 30, 40, 41, 47, 48, 50];

/// Mean F1 per algorithm (rows) and window size (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct F1Grid {
    pub windows: Vec<usize>,
    pub rows: Vec<(Algorithm, Vec<Option<f64>>)>,
}

impl F1Grid {
    /// Builds the grid for `windows`; cells absent from `summary` are `None`.
    /// Rows follow the order algorithms first appear in `summary`.
    pub fn new(summary: &[SummaryRow], windows: &[usize]) -> Self {
        let mut algorithms: Vec<Algorithm> = Vec::new();
        for r in summary {
            if !algorithms.contains(&r.algorithm) {
                algorithms.push(r.algorithm);
            }
        }
        let rows = algorithms
            .into_iter()
            .map(|alg| {
                let cells = windows
                    .iter()
                    .map(|&w| {
                        summary
                            .iter()
                            .find(|r| r.algorithm == alg && r.window_size == w)
                            .map(|r| r.f1)
                    })
                    .collect();
                (alg, cells)
            })
            .collect();
        Self {
            windows: windows.to_vec(),
            rows,
        }
    }

    /// Column index of the highest F1 in each row (first on ties).
    pub fn best_columns(&self) -> Vec<Option<usize>> {
        self.rows
            .iter()
            .map(|(_, cells)| {
                let mut best: Option<(usize, f64)> = None;
                for (j, c) in cells.iter().enumerate() {
                    if let Some(v) = *c {
                        if best.is_none_or(|(_, b)| v > b) {
                            best = Some((j, v));
                        }
                    }
                }
                best.map(|(j, _)| j)
            })
            .collect()
    }

    /// Markdown table with the best window of each row in bold.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Algorithm |");
        for w in &self.windows {
            let _ = write!(out, " {w} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.windows.len()));
        out.push('\n');
        for ((alg, cells), best) in self.rows.iter().zip(self.best_columns()) {
            let _ = write!(out, "| {} |", alg.display_name());
            for (j, c) in cells.iter().enumerate() {
                match c {
                    Some(v) if best == Some(j) => {
                        let _ = write!(out, " **{v:.2}** |");
                    }
                    Some(v) => {
                        let _ = write!(out, " {v:.2} |");
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Validation(format!("writing F1 grid CSV: {e}"));
        let mut header = vec!["algorithm".to_owned()];
        header.extend(self.windows.iter().map(|w| w.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for (alg, cells) in &self.rows {
            let mut rec = vec![alg.as_str().to_owned()];
            rec.extend(cells.iter().map(|c| c.map(|v| format!("{v:.6}")).unwrap_or_default()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::Validation(format!("writing F1 grid CSV: {e}")))
    }
}

/// Markdown table of window-parameterized ROC and PR AUCs.
pub fn auc_markdown(curves: &[AlgorithmCurves]) -> String {
    let mut out = String::from("| Algorithm | ROC-AUC | PR-AUC |\n|---|---:|---:|\n");
    for c in curves {
        let _ = writeln!(out, "| {} | {:.2} | {:.2} |", c.algorithm.display_name(), c.roc_auc, c.pr_auc);
    }
    out
}

/// Mean F1 across the learning algorithms (the random baseline excluded) at
/// each window size present for all of them.
pub fn average_f1_curve(summary: &[SummaryRow]) -> Vec<(usize, f64)> {
    let learners: Vec<&SummaryRow> = summary
        .iter()
        .filter(|r| r.algorithm != Algorithm::RandomBaseline)
        .collect();
    let mut windows: Vec<usize> = learners.iter().map(|r| r.window_size).collect();
    windows.sort_unstable();
    windows.dedup();
    windows
        .into_iter()
        .map(|w| {
            let f1s: Vec<f64> = learners.iter().filter(|r| r.window_size == w).map(|r| r.f1).collect();
            (w, f1s.iter().sum::<f64>() / f1s.len() as f64)
        })
        .collect()
}

const PALETTE: [&str; 7] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#7f7f7f", "#000000"];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

struct Plot {
    svg: String,
    x_range: (f64, f64),
    y_range: (f64, f64),
    legend_rows: usize,
}

impl Plot {
    fn new(title: &str, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
            escape(title)
        );
        let mut plot = Self {
            svg,
            x_range,
            y_range,
            legend_rows: 0,
        };
        plot.axes(x_label, y_label);
        plot
    }

    fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        MARGIN_LEFT + (x - lo) / (hi - lo) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        HEIGHT - MARGIN_BOTTOM - (y - lo) / (hi - lo) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        let (x0, x1) = (self.px(self.x_range.0), self.px(self.x_range.1));
        let (y0, y1) = (self.py(self.y_range.0), self.py(self.y_range.1));
        let _ = writeln!(
            self.svg,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for k in 0..=5 {
            let fx = self.x_range.0 + (self.x_range.1 - self.x_range.0) * f64::from(k) / 5.0;
            let fy = self.y_range.0 + (self.y_range.1 - self.y_range.0) * f64::from(k) / 5.0;
            let (tx, ty) = (self.px(fx), self.py(fy));
            let _ = writeln!(
                self.svg,
                r#"<line x1="{tx:.2}" y1="{y0:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                y0 + 5.0,
                y0 + 18.0,
                tick_label(fx)
            );
            let _ = writeln!(
                self.svg,
                r#"<line x1="{:.2}" y1="{ty:.2}" x2="{x0:.2}" y2="{ty:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 5.0,
                x0 - 8.0,
                ty + 4.0,
                tick_label(fy)
            );
        }
        let _ = writeln!(
            self.svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0,
            escape(x_label)
        );
        let _ = writeln!(
            self.svg,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }

    fn series(&mut self, label: &str, points: &[(f64, f64)], color: &str, dashed: bool, markers: bool) {
        if points.is_empty() {
            return;
        }
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            self.svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            path.join(" ")
        );
        if markers {
            for &(x, y) in points {
                let _ = writeln!(
                    self.svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                    self.px(x),
                    self.py(y)
                );
            }
        }
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let ly = MARGIN_TOP + 10.0 + 18.0 * self.legend_rows as f64;
        let _ = writeln!(
            self.svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(label)
        );
        self.legend_rows += 1;
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn tick_label(v: f64) -> String {
    if v.fract().abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.1}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// F1 against window size for every algorithm plus the learner average.
pub fn f1_chart_svg(summary: &[SummaryRow]) -> String {
    let max_w = summary.iter().map(|r| r.window_size).max().unwrap_or(1).max(2) as f64;
    let mut plot = Plot::new("Mean F1 by window size", "window size", "F1", (0.0, max_w), (0.0, 1.0));
    let mut algorithms: Vec<Algorithm> = Vec::new();
    for r in summary {
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm);
        }
    }
    for (k, alg) in algorithms.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = summary
            .iter()
            .filter(|r| r.algorithm == *alg)
            .map(|r| (r.window_size as f64, r.f1))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        plot.series(alg.display_name(), &pts, PALETTE[k % (PALETTE.len() - 1)], false, true);
    }
    let avg: Vec<(f64, f64)> = average_f1_curve(summary)
        .into_iter()
        .map(|(w, f)| (w as f64, f))
        .collect();
    plot.series("average", &avg, PALETTE[PALETTE.len() - 1], true, false);
    plot.finish()
}

/// Window-parameterized ROC or PR curves, one line per algorithm.
pub fn curve_chart_svg(curves: &[AlgorithmCurves], kind: CurveKind) -> String {
    let (title, xl, yl) = match kind {
        CurveKind::Roc => ("ROC over window sizes", "false positive rate", "true positive rate"),
        CurveKind::Pr => ("Precision-recall over window sizes", "recall", "precision"),
    };
    let mut plot = Plot::new(title, xl, yl, (0.0, 1.0), (0.0, 1.0));
    if kind == CurveKind::Roc {
        plot.series("chance", &[(0.0, 0.0), (1.0, 1.0)], "#bbbbbb", true, false);
    }
    for (k, c) in curves.iter().enumerate() {
        let (points, area): (&[CurvePoint], f64) = match kind {
            CurveKind::Roc => (&c.roc, c.roc_auc),
            CurveKind::Pr => (&c.pr, c.pr_auc),
        };
        let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let label = format!("{} ({area:.2})", c.algorithm.display_name());
        plot.series(&label, &pts, PALETTE[k % (PALETTE.len() - 1)], false, true);
    }
    plot.finish()
}
