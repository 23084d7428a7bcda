//! Minimal line and scatter plots. Every mark is drawn from the rows that
//! also go to CSV; nothing is computed here beyond the axis mapping.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Line,
    Scatter,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub mark: Mark,
    pub points: Vec<(f64, f64)>,
    /// Half-height of an error bar per point.
    pub errors: Option<Vec<f64>>,
}

impl Series {
    pub fn line(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            mark: Mark::Line,
            points,
            errors: None,
        }
    }

    pub fn scatter(name: impl Into<String>, points: Vec<(f64, f64)>, errors: Option<Vec<f64>>) -> Self {
        Self {
            name: name.into(),
            mark: Mark::Scatter,
            points,
            errors,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { lo, hi, log }
    }

    fn fraction(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (lo, hi) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            let step = ((hi - lo) / 6).max(1);
            return (lo..=hi)
                .step_by(step as usize)
                .map(|e| 10f64.powi(e))
                .filter(|&t| self.fraction(t).is_some_and(|f| (-1e-9..=1.0 + 1e-9).contains(&f)))
                .collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let magnitude = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * magnitude)
            .find(|&s| s >= raw)
            .unwrap_or(raw);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + step * 1e-9 {
            out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
            t += step;
        }
        out
    }
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e5) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(plot: &Plot) -> String {
    let xs = Axis::fit(plot.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), false);
    let ys = Axis::fit(
        plot.series.iter().flat_map(|s| {
            s.points.iter().enumerate().flat_map(move |(i, &(_, y))| {
                let e = s.errors.as_ref().map_or(0.0, |e| e[i]);
                [y - e, y + e, y]
            })
        }),
        plot.log_y,
    );
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + xs.fraction(x).unwrap_or(0.0) * pw;
    let py = |y: f64| ys.fraction(y).map(|f| TOP + (1.0 - f) * ph);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );

    for t in xs.ticks() {
        let x = px(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#444"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0,
            label(t)
        );
    }
    for t in ys.ticks() {
        if let Some(y) = py(t) {
            let _ = writeln!(
                svg,
                r##"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#444"/><line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#eee"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT - 5.0,
                LEFT + pw,
                LEFT - 8.0,
                y + 4.0,
                label(t)
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );

    for (index, series) in plot.series.iter().enumerate() {
        let color = PALETTE[index % PALETTE.len()];
        match series.mark {
            Mark::Line => {
                let path: Vec<String> = series
                    .points
                    .iter()
                    .filter_map(|&(x, y)| py(y).map(|y| format!("{:.2},{y:.2}", px(x))))
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            }
            Mark::Scatter => {
                for (i, &(x, y)) in series.points.iter().enumerate() {
                    let cx = px(x);
                    if let Some(e) = series.errors.as_ref().map(|e| e[i]) {
                        if let (Some(top), Some(bottom)) = (py(y + e), py((y - e).max(f64::MIN_POSITIVE))) {
                            let _ = writeln!(
                                svg,
                                r#"<line x1="{cx:.2}" y1="{top:.2}" x2="{cx:.2}" y2="{bottom:.2}" stroke="{color}"/>"#
                            );
                        }
                    }
                    if let Some(cy) = py(y) {
                        let _ = writeln!(svg, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5" fill="{color}"/>"#);
                    }
                }
            }
        }
        let ly = TOP + 14.0 + 18.0 * index as f64;
        let lx = LEFT + pw + 12.0;
        let swatch = match series.mark {
            Mark::Line => format!(
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                lx + 18.0
            ),
            Mark::Scatter => format!(r#"<circle cx="{}" cy="{ly}" r="3" fill="{color}"/>"#, lx + 9.0),
        };
        let _ = writeln!(
            svg,
            r#"{swatch}<text x="{}" y="{}">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&series.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_point() {
        let plot = Plot {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: true,
            series: vec![
                Series::line("a", vec![(1.0, 1.0), (2.0, 0.1), (3.0, 0.01)]),
                Series::scatter("b", vec![(1.0, 0.9), (2.0, 0.2)], Some(vec![0.1, 0.05])),
            ],
        };
        let svg = render(&plot);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2 + 1);
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn linear_ticks_are_round() {
        let axis = Axis::fit([0.0, 23.0].into_iter(), false);
        assert_eq!(axis.ticks(), vec![0.0, 5.0, 10.0, 15.0, 20.0]);
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & c"), "a&lt;b &amp; c");
    }
}
