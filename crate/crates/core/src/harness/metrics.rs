use std::io::Write;

use crate::worldmodel::fmt_num;

pub const METRICS_HEADER: &str = "seed,episode,episode_return,success,window_mean_return,\
mean_info_gain,mean_extrinsic,val_mse,wall_clock_s,status";

const COLUMNS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// Model fitting produced non-finite values; the seed stopped here.
    Diverged,
}

impl RowStatus {
    fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Diverged => "diverged",
        }
    }
}

/// One line of the metrics file.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub episode: usize,
    pub episode_return: f64,
    pub success: bool,
    /// Mean return over this and up to `window - 1` preceding episodes.
    pub window_mean_return: f64,
    /// Per-step mean of `beta * info_gain` of the chosen plans (0 for random
    /// steps).
    pub mean_info_gain: f64,
    /// Per-step mean of the chosen plans' extrinsic value.
    pub mean_extrinsic: f64,
    /// Validation MSE of the fit after this episode (NaN if no fit ran).
    pub val_mse: f64,
    pub wall_clock_s: f64,
    pub status: RowStatus,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.episode,
            fmt_num(self.episode_return),
            u8::from(self.success),
            fmt_num(self.window_mean_return),
            fmt_num(self.mean_info_gain),
            fmt_num(self.mean_extrinsic),
            fmt_num(self.val_mse),
            fmt_num(self.wall_clock_s),
            self.status.as_str()
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != COLUMNS {
            return None;
        }
        let num = |s: &str| s.parse::<f64>().ok();
        Some(Self {
            seed: f[0].parse().ok()?,
            episode: f[1].parse().ok()?,
            episode_return: num(f[2])?,
            success: match f[3] {
                "0" => false,
                "1" => true,
                _ => return None,
            },
            window_mean_return: num(f[4])?,
            mean_info_gain: num(f[5])?,
            mean_extrinsic: num(f[6])?,
            val_mse: num(f[7])?,
            wall_clock_s: num(f[8])?,
            status: match f[9] {
                "ok" => RowStatus::Ok,
                "diverged" => RowStatus::Diverged,
                _ => return None,
            },
        })
    }
}

/// Trailing mean over the last `window` values (fewer at the start).
pub fn sliding_window(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let s = &values[lo..=i];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}

/// Parses a metrics file; returns the rows and the number of malformed
/// lines skipped (the header is not counted).
pub fn parse_metrics(text: &str) -> (Vec<MetricsRow>, usize) {
    let mut rows = Vec::new();
    let mut skipped = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && line.trim() == METRICS_HEADER) {
            continue;
        }
        match MetricsRow::parse(line) {
            Some(r) => rows.push(r),
            None => skipped += 1,
        }
    }
    (rows, skipped)
}

pub fn write_header<W: Write>(mut out: W) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")
}
