//! Text and SVG rendering: fixed-precision number formatting, step-curve plots,
//! power-versus-sample-size charts and bar charts.

use std::fmt::Write as _;

use thiserror::Error;

use crate::power::PowerGrid;
use crate::stats::{LogrankResult, TestMethod, WeightedCurve};

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("plot has no series")]
    EmptySeries,
}

pub fn fmt_p(p: f64) -> String {
    format!("{p:.4}")
}

/// `0.9130 (NS)` or `0.0140 (significant)`.
pub fn fmt_p_flagged(p: f64, alpha: f64) -> String {
    let flag = if p < alpha { "significant" } else { "NS" };
    format!("{} ({flag})", fmt_p(p))
}

pub fn fmt_power(x: f64) -> String {
    format!("{x:.3}")
}

/// Plot annotation, e.g. `p = 0.0140 (permutation, exact)`.
pub fn p_annotation(r: &LogrankResult) -> String {
    let method = match (r.method, r.exhaustive) {
        (TestMethod::Normal, _) => "normal",
        (TestMethod::Permutation, true) => "permutation, exact",
        (TestMethod::Permutation, false) => "permutation",
    };
    format!("p = {} ({method})", fmt_p(r.p_two_sided))
}

/// `endpoint,hr_eff,hr_tox,ss,reps,power,se`.
pub fn power_grid_csv(grid: &PowerGrid) -> String {
    let mut s = String::from("endpoint,hr_eff,hr_tox,ss,reps,power,se\n");
    for p in &grid.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.endpoint.label(),
            p.hr_efficacy,
            p.hr_toxicity,
            p.sample_size,
            p.replications,
            fmt_power(p.power),
            fmt_power(p.se)
        );
    }
    s
}

/// `endpoint,hr_eff,hr_tox,target_power,ss` with an empty `ss` when the grid never reaches the target.
pub fn ss_table_csv(grid: &PowerGrid) -> String {
    let mut s = String::from("endpoint,hr_eff,hr_tox,target_power,ss\n");
    for r in &grid.ss_at_target {
        let ss = r.sample_size.map(|x| format!("{x:.1}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{ss}",
            r.endpoint.label(),
            r.hr_efficacy,
            r.hr_toxicity,
            r.target_power
        );
    }
    s
}

const W: f64 = 720.0;
const H: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Trims float noise so identical input gives identical bytes.
fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

struct Frame {
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + x / self.x_max * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        TOP + (self.y_max - y) / (self.y_max - self.y_min) * (H - TOP - BOTTOM)
    }
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag)
}

fn open_svg(s: &mut String, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        num((W - RIGHT + LEFT) / 2.0),
        esc(title)
    );
}

fn axes(s: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path d="M{} {} V{} H{}" fill="none" stroke="black"/>"#,
        num(x0),
        num(y0),
        num(y1),
        num(x1)
    );
    let xs = nice_step(f.x_max);
    let mut x = 0.0;
    while x <= f.x_max + 1e-9 {
        let px = f.px(x);
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"#,
            num(px),
            num(y1),
            num(y1 + 5.0),
            num(y1 + 18.0),
            num(x)
        );
        x += xs;
    }
    let ys = nice_step(f.y_max - f.y_min);
    let mut y = (f.y_min / ys).ceil() * ys;
    while y <= f.y_max + 1e-9 {
        let py = f.py(y);
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"#,
            num(x0 - 5.0),
            num(py),
            num(x0),
            num(x0 - 8.0),
            num(py + 4.0),
            num(y)
        );
        y += ys;
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num((x0 + x1) / 2.0),
        num(H - 18.0),
        esc(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        num((y0 + y1) / 2.0),
        esc(y_label)
    );
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let x = W - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{2}" x2="{1}" y2="{2}" stroke="{3}" stroke-width="2"/><text x="{4}" y="{5}">{6}</text>"#,
            num(x),
            num(x + 24.0),
            num(y),
            PALETTE[i % PALETTE.len()],
            num(x + 30.0),
            num(y + 4.0),
            esc(name)
        );
    }
}

/// Input for [`render_step_svg`].
#[derive(Debug, Clone)]
pub struct CurvePlotSpec {
    pub title: String,
    pub series: Vec<WeightedCurve>,
    pub x_label: String,
    pub y_label: String,
    pub annotation: Option<String>,
}

impl CurvePlotSpec {
    pub fn new(title: &str, series: Vec<WeightedCurve>, x_label: &str) -> Self {
        Self {
            title: title.into(),
            series,
            x_label: x_label.into(),
            y_label: "Weighted Health Status".into(),
            annotation: None,
        }
    }

    pub fn with_annotation(mut self, text: String) -> Self {
        self.annotation = Some(text);
        self
    }
}

/// Step curves: horizontal to each event time, then vertical to the new value.
pub fn render_step_svg(spec: &CurvePlotSpec) -> Result<String, ReportError> {
    if spec.series.is_empty() {
        return Err(ReportError::EmptySeries);
    }
    let x_max = spec
        .series
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.0).chain([c.end_time]))
        .fold(0.0, f64::max);
    let (lo, hi) = spec
        .series
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.1))
        .fold((1.0f64, 1.0f64), |(a, b), v| (a.min(v), b.max(v)));
    let f = Frame {
        x_max: if x_max > 0.0 { x_max } else { 1.0 },
        y_min: lo.min(0.0),
        y_max: if hi > 1.0 { hi * 1.05 } else { 1.05 },
    };

    let mut s = String::new();
    open_svg(&mut s, &spec.title);
    axes(&mut s, &f, &spec.x_label, &spec.y_label);
    for (i, c) in spec.series.iter().enumerate() {
        let mut pts = Vec::with_capacity(2 * c.points.len() + 1);
        let mut prev = 1.0;
        for &(t, v) in &c.points {
            pts.push((t, prev));
            pts.push((t, v));
            prev = v;
        }
        let tail = c.end_time.max(c.points.last().map_or(0.0, |p| p.0));
        pts.push((tail, prev));
        pts.dedup();
        let coords: Vec<String> = pts
            .iter()
            .map(|&(t, v)| format!("{},{}", num(f.px(t)), num(f.py(v))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            coords.join(" ")
        );
    }
    let names: Vec<&str> = spec.series.iter().map(|c| c.group.as_str()).collect();
    legend(&mut s, &names);
    if let Some(a) = &spec.annotation {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            num(W - RIGHT - 10.0),
            num(TOP + 16.0),
            esc(a)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// One line per named series of `(sample size, power)` points, with a
/// dashed reference line at `target`.
pub fn render_power_svg(
    title: &str,
    series: &[(String, Vec<(f64, f64)>)],
    target: f64,
) -> Result<String, ReportError> {
    if series.is_empty() {
        return Err(ReportError::EmptySeries);
    }
    let x_max = series
        .iter()
        .flat_map(|(_, p)| p.iter().map(|q| q.0))
        .fold(0.0, f64::max);
    let f = Frame {
        x_max: if x_max > 0.0 { x_max } else { 1.0 },
        y_min: 0.0,
        y_max: 1.0,
    };
    let mut s = String::new();
    open_svg(&mut s, title);
    axes(&mut s, &f, "Sample size", "Power");
    reference_line(&mut s, &f, target);
    for (i, (_, pts)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{},{}", num(f.px(x)), num(f.py(y))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="3" fill="{colour}"/>"#,
                num(f.px(x)),
                num(f.py(y))
            );
        }
    }
    let names: Vec<&str> = series.iter().map(|(n, _)| n.as_str()).collect();
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    Ok(s)
}

fn reference_line(s: &mut String, f: &Frame, target: f64) {
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{2}" x2="{}" y2="{2}" stroke="gray" stroke-dasharray="6 4"/>"#,
        num(LEFT),
        num(W - RIGHT),
        num(f.py(target))
    );
}

/// Vertical bars of power per labelled case with a dashed reference line.
pub fn render_bar_svg(
    title: &str,
    bars: &[(String, f64)],
    target: f64,
) -> Result<String, ReportError> {
    if bars.is_empty() {
        return Err(ReportError::EmptySeries);
    }
    let f = Frame {
        x_max: bars.len() as f64,
        y_min: 0.0,
        y_max: 1.0,
    };
    let mut s = String::new();
    open_svg(&mut s, title);
    let (y0, y1) = (TOP, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path d="M{} {} V{} H{}" fill="none" stroke="black"/>"#,
        num(LEFT),
        num(y0),
        num(y1),
        num(W - RIGHT)
    );
    for k in 0..=5 {
        let y = k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            num(LEFT - 8.0),
            num(f.py(y) + 4.0),
            num(y)
        );
    }
    let slot = (W - LEFT - RIGHT) / bars.len() as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let x = LEFT + slot * (i as f64 + 0.2);
        let top = f.py(v.clamp(0.0, 1.0));
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
            num(x),
            num(top),
            num(slot * 0.6),
            num(y1 - top),
            PALETTE[0]
        );
        let cx = num(x + slot * 0.3);
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{}" text-anchor="middle">{}</text>"#,
            num(y1 + 18.0),
            esc(label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{}" text-anchor="middle">{}</text>"#,
            num(top - 5.0),
            fmt_power(*v)
        );
    }
    reference_line(&mut s, &f, target);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">Power</text>"#,
        num((y0 + y1) / 2.0)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(name: &str, points: Vec<(f64, f64)>, end: f64) -> WeightedCurve {
        WeightedCurve {
            group: name.into(),
            points,
            end_time: end,
        }
    }

    #[test]
    fn number_formats() {
        assert_eq!(fmt_p(0.014), "0.0140");
        assert_eq!(fmt_p_flagged(0.913, 0.05), "0.9130 (NS)");
        assert_eq!(fmt_p_flagged(0.013, 0.05), "0.0130 (significant)");
        assert_eq!(fmt_p_flagged(0.05, 0.05), "0.0500 (NS)");
        assert_eq!(fmt_power(0.8), "0.800");
    }

    #[test]
    fn flat_curve_is_one_horizontal_polyline() {
        let spec = CurvePlotSpec::new("flat", vec![curve("a", vec![(0.0, 1.0)], 10.0)], "Weeks");
        let svg = render_step_svg(&spec).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        let ys: Vec<&str> = pts
            .split(' ')
            .map(|p| p.split(',').nth(1).unwrap())
            .collect();
        assert_eq!(ys.len(), 2);
        assert_eq!(ys[0], ys[1]);
    }

    #[test]
    fn annotation_and_determinism() {
        let a = curve(
            "RBA experimental",
            vec![(0.0, 1.0), (2.0, 0.8), (5.0, 0.6)],
            8.0,
        );
        let b = curve("control", vec![(0.0, 1.0), (3.0, 0.5)], 7.0);
        let spec = CurvePlotSpec::new("two", vec![a, b], "Weeks")
            .with_annotation(format!("p = {}", fmt_p(0.014)));
        let s1 = render_step_svg(&spec).unwrap();
        let s2 = render_step_svg(&spec).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.contains("p = 0.014"));
        assert!(s1.contains("RBA experimental"));
        assert!(s1.contains("Weighted Health Status"));
        assert_eq!(s1.matches("<polyline").count(), 2);
        assert!(s1.starts_with("<svg") && s1.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn steps_go_horizontal_then_vertical() {
        let spec = CurvePlotSpec::new(
            "s",
            vec![curve("a", vec![(0.0, 1.0), (5.0, 0.5)], 10.0)],
            "Days",
        );
        let svg = render_step_svg(&spec).unwrap();
        let pts = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        let xy: Vec<(f64, f64)> = pts
            .split(' ')
            .map(|p| {
                let mut it = p.split(',').map(|v| v.parse::<f64>().unwrap());
                (it.next().unwrap(), it.next().unwrap())
            })
            .collect();
        assert_eq!(xy.len(), 4);
        assert_eq!(xy[0].1, xy[1].1);
        assert_eq!(xy[1].0, xy[2].0);
        assert_eq!(xy[2].1, xy[3].1);
    }

    #[test]
    fn empty_inputs_fail() {
        let spec = CurvePlotSpec::new("e", vec![], "Weeks");
        assert_eq!(render_step_svg(&spec), Err(ReportError::EmptySeries));
        assert_eq!(
            render_power_svg("e", &[], 0.8),
            Err(ReportError::EmptySeries)
        );
        assert_eq!(render_bar_svg("e", &[], 0.8), Err(ReportError::EmptySeries));
    }

    #[test]
    fn text_is_escaped() {
        let spec = CurvePlotSpec::new(
            "a < b & c",
            vec![curve("x\"y", vec![(0.0, 1.0)], 1.0)],
            "Weeks",
        );
        let svg = render_step_svg(&spec).unwrap();
        assert!(svg.contains("a &lt; b &amp; c"));
        assert!(svg.contains("x&quot;y"));
    }

    #[test]
    fn bar_chart_labels_and_reference() {
        let bars: Vec<(String, f64)> = vec![("i".into(), 0.64), ("iii".into(), 0.99)];
        let svg = render_bar_svg("scenarios", &bars, 0.8).unwrap();
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(svg.contains(">0.990<"));
        assert!(svg.contains("stroke-dasharray"));
    }
}
