use serde::{Deserialize, Serialize};

/// Standard deviations below this are treated as this value when scaling.
pub const STD_FLOOR: f64 = 1e-6;
/// Variances at or below this are considered degenerate (constant data).
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Running per-dimension mean and variance (Welford).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// At least two samples have been observed.
    pub fn is_ready(&self) -> bool {
        self.count >= 2
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance per dimension.
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.dim()];
        }
        self.m2.iter().map(|s| s / self.count as f64).collect()
    }

    /// Scale used by [`normalize`](Self::normalize): the standard deviation,
    /// floored at [`STD_FLOOR`].
    pub fn scale(&self) -> Vec<f64> {
        self.variance()
            .into_iter()
            .map(|v| v.sqrt().max(STD_FLOOR))
            .collect()
    }

    /// True when every dimension has (numerically) zero variance.
    pub fn is_degenerate(&self) -> bool {
        self.variance().iter().all(|v| *v <= DEGENERATE_VARIANCE)
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let scale = self.scale();
        x.iter()
            .zip(&self.mean)
            .zip(&scale)
            .map(|((v, m), s)| (v - m) * (1.0 / s))
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        let scale = self.scale();
        z.iter()
            .zip(&self.mean)
            .zip(&scale)
            .map(|((v, m), s)| m + v * s)
            .collect()
    }
}

/// Cached affine transform of a [`Normalizer`] for hot loops.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Affine {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub inv_scale: Vec<f64>,
    pub ln_scale: Vec<f64>,
}

impl From<&Normalizer> for Affine {
    fn from(n: &Normalizer) -> Self {
        let scale = n.scale();
        Self {
            mean: n.mean().to_vec(),
            inv_scale: scale.iter().map(|s| 1.0 / s).collect(),
            ln_scale: scale.iter().map(|s| s.ln()).collect(),
            scale,
        }
    }
}
