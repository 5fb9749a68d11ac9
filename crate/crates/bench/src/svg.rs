//! Minimal static SVG line and scatter plots with optional log axes and a
//! secondary y axis. Output depends only on the data.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 80.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YAxis {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Points,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub axis: YAxis,
    pub style: Style,
}

impl Series {
    pub fn line(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { name: name.into(), points, axis: YAxis::Left, style: Style::Line }
    }

    pub fn points(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { name: name.into(), points, axis: YAxis::Left, style: Style::Points }
    }

    pub fn on_right(mut self) -> Self {
        self.axis = YAxis::Right;
        self
    }
}

#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Label of the secondary axis; series on the right axis need it.
    pub y2_label: Option<String>,
    pub log_x: bool,
    pub log_y: bool,
    pub log_y2: bool,
    pub series: Vec<Series>,
    /// Horizontal dashed reference lines on the left axis.
    pub reference_lines: Vec<(f64, String)>,
    /// Replaces the tick label at an x value (e.g. a zero placed on a log axis).
    pub x_tick_override: Option<(f64, String)>,
}

#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let vals: Vec<f64> = values.filter(|v| v.is_finite() && (!log || *v > 0.0)).collect();
        if vals.is_empty() {
            return if log { Axis { lo: 0.1, hi: 10.0, log } } else { Axis { lo: 0.0, hi: 1.0, log } };
        }
        let (mut lo, mut hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if log {
            lo = 10f64.powf(lo.log10().floor());
            hi = 10f64.powf(hi.log10().ceil());
            if hi <= lo {
                hi = lo * 10.0;
            }
        } else {
            if hi <= lo {
                let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
                lo -= pad;
                hi += pad;
            }
            let step = nice_step((hi - lo) / 5.0);
            lo = (lo / step).floor() * step;
            hi = (hi / step).ceil() * step;
        }
        Axis { lo, hi, log }
    }

    fn unit(&self, v: f64) -> f64 {
        if self.log {
            (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.log10().round() as i32, self.hi.log10().round() as i32);
            let stride = ((b - a) as usize / 8).max(1);
            (a..=b).step_by(stride).map(|e| 10f64.powi(e)).collect()
        } else {
            let step = nice_step((self.hi - self.lo) / 5.0);
            let n = ((self.hi - self.lo) / step).round() as usize;
            (0..=n).map(|i| self.lo + i as f64 * step).collect()
        }
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        let s = format!("{v:.0e}");
        return s;
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Plot {
    pub fn render(&self) -> String {
        let left_vals = self.series.iter().filter(|s| s.axis == YAxis::Left).flat_map(|s| s.points.iter().map(|p| p.1));
        let refs = self.reference_lines.iter().map(|r| r.0);
        let x = Axis::fit(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), self.log_x);
        let y = Axis::fit(left_vals.chain(refs), self.log_y);
        let has_right = self.series.iter().any(|s| s.axis == YAxis::Right);
        let y2 = Axis::fit(
            self.series.iter().filter(|s| s.axis == YAxis::Right).flat_map(|s| s.points.iter().map(|p| p.1)),
            self.log_y2,
        );
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let px = |v: f64| LEFT + x.unit(v) * pw;
        let py = |a: &Axis, v: f64| TOP + (1.0 - a.unit(v)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for t in x.ticks() {
            let xx = px(t);
            let text = match &self.x_tick_override {
                Some((v, l)) if (*v - t).abs() <= 1e-12 * v.abs().max(1e-300) => l.clone(),
                _ => label(t),
            };
            let _ = writeln!(
                s,
                r##"<line x1="{xx:.2}" y1="{:.2}" x2="{xx:.2}" y2="{TOP}" stroke="#ddd"/><text x="{xx:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 16.0,
                escape(&text)
            );
        }
        for t in y.ticks() {
            let yy = py(&y, t);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                yy + 4.0,
                label(t)
            );
        }
        if has_right {
            for t in y2.ticks() {
                let yy = py(&y2, t);
                let _ = writeln!(
                    s,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="start">{}</text>"#,
                    LEFT + pw + 6.0,
                    yy + 4.0,
                    label(t)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        if let (true, Some(l2)) = (has_right, &self.y2_label) {
            let xr = WIDTH - 18.0;
            let _ = writeln!(
                s,
                r#"<text x="{xr:.1}" y="{:.1}" text-anchor="middle" transform="rotate(90 {xr:.1} {:.1})">{}</text>"#,
                TOP + ph / 2.0,
                TOP + ph / 2.0,
                escape(l2)
            );
        }
        for (v, name) in &self.reference_lines {
            if self.log_y && *v <= 0.0 {
                continue;
            }
            let yy = py(&y, *v);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#555" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}" text-anchor="end" fill="#555">{}</text>"##,
                LEFT + pw,
                LEFT + pw - 4.0,
                yy - 4.0,
                escape(name)
            );
        }
        for (i, ser) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let axis = if ser.axis == YAxis::Right { &y2 } else { &y };
            let pts: Vec<(f64, f64)> = ser
                .points
                .iter()
                .filter(|(a, b)| a.is_finite() && b.is_finite() && (!x.log || *a > 0.0) && (!axis.log || *b > 0.0))
                .map(|&(a, b)| (px(a), py(axis, b)))
                .collect();
            match ser.style {
                Style::Line if pts.len() > 1 => {
                    let d: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                        d.join(" ")
                    );
                }
                _ => {}
            }
            for (a, b) in &pts {
                let _ = writeln!(s, r#"<circle cx="{a:.2}" cy="{b:.2}" r="3" fill="{color}"/>"#);
            }
            let ly = TOP + 14.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                LEFT + 10.0,
                ly - 9.0,
                LEFT + 24.0,
                ly,
                escape(&ser.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
