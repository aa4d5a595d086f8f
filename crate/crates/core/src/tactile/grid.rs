use super::TactileError;

fn check_shape(height: usize, width: usize, len: usize) -> Result<(), TactileError> {
    if height < 2 || width < 2 || len != height * width {
        return Err(TactileError::Shape {
            expected: height.max(2) * width.max(2),
            got: len,
        });
    }
    Ok(())
}

/// Gel indentation in millimeters, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl DepthGrid {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, TactileError> {
        check_shape(height, width, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TactileError::NonFinite);
        }
        if data.iter().any(|v| *v < 0.0) {
            return Err(TactileError::NegativeDepth);
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self, TactileError> {
        Self::new(height, width, vec![0.0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Value at column `x`, row `y`.
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Surface slopes `dz/dx` (along columns) and `dz/dy` (along rows).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    height: usize,
    width: usize,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl GradientField {
    pub fn new(
        height: usize,
        width: usize,
        gx: Vec<f64>,
        gy: Vec<f64>,
    ) -> Result<Self, TactileError> {
        check_shape(height, width, gx.len())?;
        check_shape(height, width, gy.len())?;
        if gx.iter().chain(&gy).any(|v| !v.is_finite()) {
            return Err(TactileError::NonFinite);
        }
        Ok(Self {
            height,
            width,
            gx,
            gy,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gx(&self) -> &[f64] {
        &self.gx
    }

    pub fn gy(&self) -> &[f64] {
        &self.gy
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            gx: self.gx.iter().map(|v| v * k).collect(),
            gy: self.gy.iter().map(|v| v * k).collect(),
        }
    }
}

/// Grayscale frame with intensities in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, TactileError> {
        check_shape(height, width, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TactileError::NonFinite);
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(TactileError::Intensity);
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample with coordinates clamped to the image.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let xm = (self.width - 1) as f64;
        let ym = (self.height - 1) as f64;
        let x = x.clamp(0.0, xm);
        let y = y.clamp(0.0, ym);
        let x0 = (x.floor() as usize).min(self.width - 2);
        let y0 = (y.floor() as usize).min(self.height - 2);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let a = self.at(x0, y0);
        let b = self.at(x0 + 1, y0);
        let c = self.at(x0, y0 + 1);
        let d = self.at(x0 + 1, y0 + 1);
        (a * (1.0 - fx) + b * fx) * (1.0 - fy) + (c * (1.0 - fx) + d * fx) * fy
    }
}
