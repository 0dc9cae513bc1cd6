use std::fmt::Write as _;
use std::str::FromStr;

use super::{ReportError, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Percentage of bus trips matched.
    Pct,
    /// Mean time saved per matched trip, minutes.
    AvgTime,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Pct => "pct",
            Metric::AvgTime => "avgtime",
        }
    }

    fn axis_label(self) -> &'static str {
        match self {
            Metric::Pct => "Matched bus trips (%)",
            Metric::AvgTime => "Mean time saved (min)",
        }
    }
}

impl FromStr for Metric {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pct" => Ok(Metric::Pct),
            "avgtime" => Ok(Metric::AvgTime),
            other => Err(ReportError::UnknownMetric(other.to_string())),
        }
    }
}

/// Chart geometry in SVG user units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotLayout {
    pub width: f64,
    pub height: f64,
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
    pub first_hour: u32,
    pub last_hour: u32,
}

impl Default for PlotLayout {
    fn default() -> Self {
        PlotLayout {
            width: 640.0,
            height: 400.0,
            left: 64.0,
            right: 140.0,
            top: 40.0,
            bottom: 56.0,
            first_hour: 6,
            last_hour: 22,
        }
    }
}

impl PlotLayout {
    pub fn x(&self, hour: f64) -> f64 {
        let span = (self.last_hour - self.first_hour) as f64;
        self.left + (hour - self.first_hour as f64) / span * (self.width - self.left - self.right)
    }

    pub fn y(&self, value: f64, y_max: f64) -> f64 {
        let inner = self.height - self.top - self.bottom;
        self.height - self.bottom - value / y_max * inner
    }

    /// Inverse of [`PlotLayout::y`].
    pub fn value_at(&self, y: f64, y_max: f64) -> f64 {
        let inner = self.height - self.top - self.bottom;
        (self.height - self.bottom - y) / inner * y_max
    }
}

/// Smallest 1, 2 or 5 times a power of ten that is at least `v`.
fn nice_max(v: f64) -> f64 {
    if !(v > 0.0) {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&c| c >= v).unwrap_or(10.0 * mag)
}

const COLORS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// One line chart of `metric` over the plotted hours for a (day, t_B) pair,
/// one series per spatial buffer. Hours without a value break the line.
pub fn render_plot(results: &SweepResult, day: &str, tb_s: f64, metric: Metric) -> Result<String, ReportError> {
    let layout = PlotLayout::default();
    let mut series: Vec<(f64, Vec<(u32, Option<f64>)>)> = Vec::new();
    for d_m in results.d_values() {
        let cell = results.cell(day, d_m, tb_s)?;
        let points = cell
            .stats
            .iter()
            .filter(|s| (layout.first_hour..=layout.last_hour).contains(&s.hour))
            .map(|s| {
                let v = match metric {
                    Metric::Pct => Some(s.pct_matched),
                    Metric::AvgTime => s.mean_tau_min,
                };
                (s.hour, v)
            })
            .collect();
        series.push((d_m, points));
    }
    if series.is_empty() {
        return Err(ReportError::MissingCell { day: day.to_string(), d_m: f64::NAN, tb_s });
    }
    let peak = series.iter().flat_map(|(_, p)| p.iter().filter_map(|(_, v)| *v)).fold(0.0, f64::max);
    let y_max = nice_max(peak);

    let mut s = String::new();
    let (w, h) = (layout.width, layout.height);
    let x0 = layout.left;
    let x1 = w - layout.right;
    let y0 = h - layout.bottom;
    let y1 = layout.top;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" data-y-max="{y_max}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{day}, t_B = {tb_s} s</text>"#,
        (x0 + x1) / 2.0
    );
    let _ = writeln!(s, r#"<path class="axis" d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#);
    for hour in (layout.first_hour..=layout.last_hour).step_by(2) {
        let x = layout.x(hour as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.3}" y1="{y0}" x2="{x:.3}" y2="{}" stroke="black"/><text x="{x:.3}" y="{}" text-anchor="middle">{hour}</text>"#,
            y0 + 4.0,
            y0 + 18.0
        );
    }
    for i in 0..=5 {
        let v = y_max * i as f64 / 5.0;
        let y = layout.y(v, y_max);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y:.3}" x2="{x1}" y2="{y:.3}" stroke="#dddddd"/><text x="{}" y="{:.3}" text-anchor="end">{}</text>"##,
            x0,
            x0 - 6.0,
            y + 4.0,
            format_tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{}" y="{}" text-anchor="middle">Hour of day</text>"#,
        (x0 + x1) / 2.0,
        h - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        metric.axis_label()
    );
    for (i, (d_m, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (hour, v) in points {
            match v {
                Some(v) => {
                    let cmd = if pen_down { 'L' } else { 'M' };
                    if !d.is_empty() {
                        d.push(' ');
                    }
                    let _ = write!(d, "{cmd}{:.3} {:.3}", layout.x(*hour as f64), layout.y(*v, y_max));
                    pen_down = true;
                }
                None => pen_down = false,
            }
        }
        let _ = writeln!(
            s,
            r#"<path class="series" data-d-m="{d_m}" d="{d}" stroke="{color}" stroke-width="2" fill="none"/>"#
        );
        let ly = y1 + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<g class="legend"><line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">d = {d_m} m</text></g>"#,
            x1 + 16.0,
            x1 + 40.0,
            x1 + 46.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn format_tick(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    format!("{r}")
}
