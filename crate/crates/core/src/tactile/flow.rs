use std::io::Write;

use super::{Image, TactileError};

/// Smallest structure-tensor eigenvalue (per window pixel) accepted by
/// `lucas_kanade`.
pub const EIGEN_THRESHOLD: f64 = 1e-4;
pub const ENTROPY_BINS: usize = 21;
pub const ENTROPY_RANGE: (f64, f64) = (-3.0, 3.0);

const LK_MAX_ITERS: usize = 20;
const LK_STOP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Valid,
    /// Structure tensor too close to singular (aperture problem).
    Degenerate,
    /// Window does not fit inside the image.
    Border,
}

/// Sparse displacement field. Invalid points carry no vector.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    points: Vec<(f64, f64)>,
    vectors: Vec<Option<(f64, f64)>>,
    status: Vec<FlowStatus>,
}

impl FlowField {
    pub fn new(
        points: Vec<(f64, f64)>,
        vectors: Vec<Option<(f64, f64)>>,
        status: Vec<FlowStatus>,
    ) -> Result<Self, TactileError> {
        if points.len() != vectors.len() || points.len() != status.len() {
            return Err(TactileError::InvalidArgument(
                "points, vectors and status differ in length".into(),
            ));
        }
        for (v, s) in vectors.iter().zip(&status) {
            if v.is_some() != (*s == FlowStatus::Valid) {
                return Err(TactileError::InvalidArgument(
                    "vector presence disagrees with status".into(),
                ));
            }
            if let Some((dx, dy)) = v {
                if !(dx.is_finite() && dy.is_finite()) {
                    return Err(TactileError::NonFinite);
                }
            }
        }
        Ok(Self {
            points,
            vectors,
            status,
        })
    }

    /// All points valid.
    pub fn from_vectors(points: Vec<(f64, f64)>, vectors: Vec<(f64, f64)>) -> Result<Self, TactileError> {
        let n = vectors.len();
        Self::new(
            points,
            vectors.into_iter().map(Some).collect(),
            vec![FlowStatus::Valid; n],
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn vectors(&self) -> &[Option<(f64, f64)>] {
        &self.vectors
    }

    pub fn status(&self) -> &[FlowStatus] {
        &self.status
    }

    pub fn valid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.vectors.iter().flatten().copied()
    }
}

/// Central differences inside, one-sided at the edges.
fn gradients(img: &Image) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = (img.height(), img.width());
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            gx[i] = match x {
                0 => img.at(1, y) - img.at(0, y),
                _ if x == w - 1 => img.at(x, y) - img.at(x - 1, y),
                _ => 0.5 * (img.at(x + 1, y) - img.at(x - 1, y)),
            };
            gy[i] = match y {
                0 => img.at(x, 1) - img.at(x, 0),
                _ if y == h - 1 => img.at(x, y) - img.at(x, y - 1),
                _ => 0.5 * (img.at(x, y + 1) - img.at(x, y - 1)),
            };
        }
    }
    (gx, gy)
}

/// Single-level iterative Lucas-Kanade at each point (pixel coordinates,
/// rounded to the nearest pixel for the window center).
pub fn lucas_kanade(
    prev: &Image,
    next: &Image,
    points: &[(f64, f64)],
    window: usize,
) -> Result<FlowField, TactileError> {
    if prev.height() != next.height() || prev.width() != next.width() {
        return Err(TactileError::Shape {
            expected: prev.height() * prev.width(),
            got: next.height() * next.width(),
        });
    }
    if window < 3 || window % 2 == 0 {
        return Err(TactileError::InvalidArgument(
            "window must be odd and at least 3".into(),
        ));
    }
    let (h, w) = (prev.height() as i64, prev.width() as i64);
    let r = (window / 2) as i64;
    let (gx, gy) = gradients(prev);
    let npix = (window * window) as f64;

    let mut vectors = Vec::with_capacity(points.len());
    let mut status = Vec::with_capacity(points.len());
    for &(px, py) in points {
        let (cx, cy) = (px.round() as i64, py.round() as i64);
        if !(px.is_finite() && py.is_finite()) || cx - r < 0 || cy - r < 0 || cx + r >= w || cy + r >= h
        {
            vectors.push(None);
            status.push(FlowStatus::Border);
            continue;
        }
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                let i = (y * w + x) as usize;
                gxx += gx[i] * gx[i];
                gxy += gx[i] * gy[i];
                gyy += gy[i] * gy[i];
            }
        }
        let tr = gxx + gyy;
        let det = gxx * gyy - gxy * gxy;
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        let lambda_min = 0.5 * tr - disc;
        if lambda_min / npix < EIGEN_THRESHOLD {
            vectors.push(None);
            status.push(FlowStatus::Degenerate);
            continue;
        }
        let (mut dx, mut dy) = (0.0, 0.0);
        for _ in 0..LK_MAX_ITERS {
            let (mut bx, mut by) = (0.0, 0.0);
            for y in cy - r..=cy + r {
                for x in cx - r..=cx + r {
                    let i = (y * w + x) as usize;
                    let it = next.sample(x as f64 + dx, y as f64 + dy) - prev.data()[i];
                    bx -= gx[i] * it;
                    by -= gy[i] * it;
                }
            }
            let ux = (gyy * bx - gxy * by) / det;
            let uy = (gxx * by - gxy * bx) / det;
            dx += ux;
            dy += uy;
            if ux.hypot(uy) < LK_STOP {
                break;
            }
        }
        vectors.push(Some((dx, dy)));
        status.push(FlowStatus::Valid);
    }
    FlowField::new(points.to_vec(), vectors, status)
}

fn histogram_entropy(values: impl Iterator<Item = f64>, bins: usize, lo: f64, hi: f64) -> f64 {
    let mut counts = vec![0usize; bins];
    let mut n = 0usize;
    let width = (hi - lo) / bins as f64;
    for v in values {
        let b = ((v.clamp(lo, hi) - lo) / width).floor();
        counts[(b.max(0.0) as usize).min(bins - 1)] += 1;
        n += 1;
    }
    let n = n as f64;
    let h: f64 = counts
        .iter()
        .filter(|c| **c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

/// Shannon entropies (nats) of the histogrammed x and y flow components.
/// Values outside `range` land in the end bins.
pub fn flow_entropy(
    f: &FlowField,
    bins: usize,
    range: (f64, f64),
) -> Result<(f64, f64), TactileError> {
    let (lo, hi) = range;
    if bins < 2 {
        return Err(TactileError::InvalidArgument("bins must be at least 2".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(TactileError::InvalidArgument("empty histogram range".into()));
    }
    if f.valid().next().is_none() {
        return Err(TactileError::NoValidVectors);
    }
    Ok((
        histogram_entropy(f.valid().map(|v| v.0), bins, lo, hi),
        histogram_entropy(f.valid().map(|v| v.1), bins, lo, hi),
    ))
}

/// Whitespace-separated table `x y dx dy valid`, one row per point.
pub fn write_flow_table<W: Write>(f: &FlowField, mut out: W) -> std::io::Result<()> {
    writeln!(out, "x y dx dy valid")?;
    for ((p, v), s) in f.points.iter().zip(&f.vectors).zip(&f.status) {
        let (dx, dy) = v.unwrap_or((0.0, 0.0));
        writeln!(
            out,
            "{:.6} {:.6} {:.6} {:.6} {}",
            p.0,
            p.1,
            dx,
            dy,
            u8::from(*s == FlowStatus::Valid)
        )?;
    }
    Ok(())
}
