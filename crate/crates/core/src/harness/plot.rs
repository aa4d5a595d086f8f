use std::collections::BTreeMap;
use std::fmt::Write;

use super::metrics::{parse_metrics, sliding_window};
use super::HarnessError;

/// Sliding-window learning curve aggregated across seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    pub window: usize,
    pub seeds: Vec<u64>,
    pub episodes: Vec<usize>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Malformed metrics lines that were ignored.
    pub skipped: usize,
}

impl PlotSeries {
    pub fn has_band(&self) -> bool {
        self.seeds.len() > 1
    }
}

/// Builds the curve from metrics text. Each seed's returns are windowed in
/// episode order; the mean and min-max band use the seeds present at each
/// episode.
pub fn plot_metrics(text: &str, window: usize) -> Result<PlotSeries, HarnessError> {
    if window == 0 {
        return Err(HarnessError::Config("window must be at least 1".into()));
    }
    let (rows, skipped) = parse_metrics(text);
    let mut per_seed: BTreeMap<u64, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in &rows {
        per_seed
            .entry(r.seed)
            .or_default()
            .insert(r.episode, r.episode_return);
    }
    if per_seed.is_empty() {
        return Err(HarnessError::Config(format!(
            "no valid metrics rows ({skipped} malformed)"
        )));
    }
    let mut at: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for eps in per_seed.values() {
        let returns: Vec<f64> = eps.values().copied().collect();
        for (ep, v) in eps.keys().zip(sliding_window(&returns, window)) {
            at.entry(*ep).or_default().push(v);
        }
    }
    let mut s = PlotSeries {
        window,
        seeds: per_seed.keys().copied().collect(),
        episodes: Vec::new(),
        mean: Vec::new(),
        min: Vec::new(),
        max: Vec::new(),
        skipped,
    };
    for (ep, vals) in at {
        s.episodes.push(ep);
        s.mean.push(vals.iter().sum::<f64>() / vals.len() as f64);
        s.min.push(vals.iter().copied().fold(f64::INFINITY, f64::min));
        s.max.push(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(s)
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

/// Self-contained SVG of the curve.
pub fn render_svg(s: &PlotSeries) -> String {
    let finite = |v: &&f64| v.is_finite();
    let lo = s.min.iter().filter(finite).copied().fold(f64::INFINITY, f64::min);
    let hi = s.max.iter().filter(finite).copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let e0 = *s.episodes.first().unwrap_or(&0) as f64;
    let e1 = (*s.episodes.last().unwrap_or(&0) as f64).max(e0 + 1.0);
    let x = |e: usize| PAD + (e as f64 - e0) / (e1 - e0) * (W - 2.0 * PAD);
    let y = |v: f64| H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">episode</text>"#,
        W / 2.0,
        H - 16.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" font-size="12" transform="rotate(-90 16 {})" text-anchor="middle">return (window {})</text>"#,
        H / 2.0,
        H / 2.0,
        s.window
    );
    for (v, label) in [(lo, lo), (hi, hi)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" font-size="10" text-anchor="end">{:.3}</text>"#,
            PAD - 4.0,
            y(v) + 3.0,
            label
        );
    }
    for e in [e0 as usize, e1 as usize] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" font-size="10" text-anchor="middle">{e}</text>"#,
            x(e),
            H - PAD + 14.0
        );
    }
    if s.has_band() {
        let mut d = String::new();
        for (i, (&e, &v)) in s.episodes.iter().zip(&s.max).enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, x(e), y(v));
        }
        for (&e, &v) in s.episodes.iter().zip(&s.min).rev() {
            let _ = write!(d, "L{:.2} {:.2} ", x(e), y(v));
        }
        let _ = writeln!(
            out,
            r##"<path class="band" d="{}Z" fill="#4c72b0" fill-opacity="0.25" stroke="none"/>"##,
            d
        );
    }
    let pts: Vec<String> = s
        .episodes
        .iter()
        .zip(&s.mean)
        .filter(|(_, v)| v.is_finite())
        .map(|(&e, &v)| format!("{:.2},{:.2}", x(e), y(v)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline class="mean" points="{}" fill="none" stroke="#4c72b0" stroke-width="2"/>"##,
        pts.join(" ")
    );
    let _ = writeln!(out, "</svg>");
    out
}
