use super::DepthGrid;

/// Zeroth and first raw moments, `m_ij = sum x^i y^j d(x, y)` with `x` the
/// column and `y` the row index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub m00: f64,
    pub m10: f64,
    pub m01: f64,
}

impl Moments {
    pub fn of(d: &DepthGrid) -> Self {
        let mut m = Moments {
            m00: 0.0,
            m10: 0.0,
            m01: 0.0,
        };
        for y in 0..d.height() {
            for x in 0..d.width() {
                let v = d.at(x, y);
                m.m00 += v;
                m.m10 += x as f64 * v;
                m.m01 += y as f64 * v;
            }
        }
        m
    }
}

/// Contact centroid `(m10/m00, m01/m00)` and total indentation `m00`.
/// An empty image reports the image center.
pub fn moments_features(d: &DepthGrid) -> ((f64, f64), f64) {
    let m = Moments::of(d);
    if m.m00 > 0.0 {
        let cx = (m.m10 / m.m00).clamp(0.0, (d.width() - 1) as f64);
        let cy = (m.m01 / m.m00).clamp(0.0, (d.height() - 1) as f64);
        ((cx, cy), m.m00)
    } else {
        (
            (
                (d.width() - 1) as f64 / 2.0,
                (d.height() - 1) as f64 / 2.0,
            ),
            0.0,
        )
    }
}
