//! Boxplots of experiment results as standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write;

use transl2e::simulate::ResultRow;

const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const LEGEND_H: f64 = 30.0;
const COLORS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

struct BoxStats {
    lo: f64,
    q1: f64,
    median: f64,
    q3: f64,
    hi: f64,
    outliers: Vec<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let fence = 1.5 * (q3 - q1);
    let inside: Vec<f64> = v.iter().copied().filter(|&x| x >= q1 - fence && x <= q3 + fence).collect();
    Some(BoxStats {
        lo: inside.first().copied().unwrap_or(q1),
        q1,
        median,
        q3,
        hi: inside.last().copied().unwrap_or(q3),
        outliers: v.into_iter().filter(|&x| x < q1 - fence || x > q3 + fence).collect(),
    })
}

fn nice_max(x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return 1.0;
    }
    let mag = 10f64.powf(x.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|&m| m >= x).unwrap_or(10.0 * mag)
}

/// Cells of one metric: grid value (in first-seen order) to method to values.
type Cells = Vec<(f64, BTreeMap<usize, Vec<f64>>)>;

fn panel(svg: &mut String, x0: f64, title: &str, cells: &Cells, n_methods: usize) {
    let (w, h) = (PANEL_W - MARGIN_L - 20.0, PANEL_H - MARGIN_T - MARGIN_B);
    let (left, top) = (x0 + MARGIN_L, MARGIN_T);
    let ymax = nice_max(cells.iter().flat_map(|(_, m)| m.values().flatten()).fold(0.0f64, |a, &b| a.max(b)));
    let y = |v: f64| top + h * (1.0 - v / ymax);

    let _ = writeln!(svg, r#"<text x="{:.1}" y="22" font-size="14" text-anchor="middle">{title}</text>"#, left + w / 2.0);
    let _ = writeln!(svg, r##"<rect x="{left:.1}" y="{top:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#444"/>"##);
    for i in 0..=4 {
        let v = ymax * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" x2="{left:.1}" y1="{yy:.1}" y2="{yy:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{v}</text>"##,
            left - 4.0,
            left - 7.0,
            y(v) + 4.0,
            yy = y(v),
        );
    }

    let slot = w / cells.len().max(1) as f64;
    let bw = (slot * 0.8 / n_methods.max(1) as f64).min(30.0);
    for (g, (grid, by_method)) in cells.iter().enumerate() {
        let center = left + slot * (g as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<text x="{center:.1}" y="{:.1}" font-size="11" text-anchor="middle">{grid}</text>"#,
            top + h + 16.0
        );
        for (&m, values) in by_method {
            let Some(b) = box_stats(values) else { continue };
            let cx = center + (m as f64 - (n_methods as f64 - 1.0) / 2.0) * bw;
            let color = COLORS[m % COLORS.len()];
            let (l, r) = (cx - bw * 0.4, cx + bw * 0.4);
            let _ = writeln!(
                svg,
                r#"<line x1="{cx:.1}" x2="{cx:.1}" y1="{:.1}" y2="{:.1}" stroke="{color}"/>"#,
                y(b.lo),
                y(b.hi)
            );
            let _ = writeln!(
                svg,
                r#"<rect x="{l:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}" fill-opacity="0.35" stroke="{color}"/>"#,
                y(b.q3),
                r - l,
                (y(b.q1) - y(b.q3)).max(0.5)
            );
            let _ = writeln!(
                svg,
                r#"<line x1="{l:.1}" x2="{r:.1}" y1="{my:.1}" y2="{my:.1}" stroke="{color}" stroke-width="2"/>"#,
                my = y(b.median)
            );
            for o in &b.outliers {
                let _ = writeln!(svg, r#"<circle cx="{cx:.1}" cy="{:.1}" r="2" fill="none" stroke="{color}"/>"#, y(*o));
            }
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">grid value</text>"#,
        left + w / 2.0,
        top + h + 34.0
    );
}

/// One SVG document per experiment in `rows`, keyed by experiment name.
pub fn render(rows: &[ResultRow]) -> Vec<(String, String)> {
    let mut experiments: Vec<&str> = Vec::new();
    for r in rows {
        if !experiments.contains(&r.experiment.as_str()) {
            experiments.push(&r.experiment);
        }
    }
    experiments
        .into_iter()
        .map(|name| {
            let subset: Vec<&ResultRow> = rows.iter().filter(|r| r.experiment == name).collect();
            let mut methods: Vec<&str> = Vec::new();
            for r in &subset {
                if !methods.contains(&r.method.as_str()) {
                    methods.push(&r.method);
                }
            }
            let cells = |metric: fn(&ResultRow) -> f64| {
                let mut out: Cells = Vec::new();
                for r in &subset {
                    let m = methods.iter().position(|&x| x == r.method).unwrap_or(0);
                    let idx = match out.iter().position(|(g, _)| *g == r.grid_value) {
                        Some(i) => i,
                        None => {
                            out.push((r.grid_value, BTreeMap::new()));
                            out.len() - 1
                        }
                    };
                    out[idx].1.entry(m).or_default().push(metric(r));
                }
                out
            };

            let (width, height) = (2.0 * PANEL_W, PANEL_H + LEGEND_H);
            let mut svg = String::new();
            let _ = writeln!(
                svg,
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
            );
            let _ = writeln!(svg, "<title>{name}</title>");
            let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
            panel(&mut svg, 0.0, "relative estimation error", &cells(|r| r.rel_err), methods.len());
            panel(&mut svg, PANEL_W, "F1 score", &cells(|r| r.f1), methods.len());
            for (m, method) in methods.iter().enumerate() {
                let x = MARGIN_L + 150.0 * m as f64;
                let _ = writeln!(
                    svg,
                    r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}" font-size="12">{method}</text>"#,
                    PANEL_H + 4.0,
                    COLORS[m % COLORS.len()],
                    x + 16.0,
                    PANEL_H + 14.0
                );
            }
            svg.push_str("</svg>\n");
            (name.to_string(), svg)
        })
        .collect()
}
