use super::Shape;
use crate::tactile::DepthGrid;

/// Square gel pad on the pusher face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorGeometry {
    /// Half side length of the pad in meters; the pad spans the face width.
    pub half_width: f64,
    pub resolution: usize,
    /// Maximum gel indentation in millimeters.
    pub depth_cap_mm: f64,
}

impl SensorGeometry {
    pub fn pixel(&self) -> f64 {
        2.0 * self.half_width / self.resolution as f64
    }

    /// Lateral coordinate of pixel column `i`.
    pub fn u(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.pixel()
    }

    /// Height above the object's mid-plane of pixel row `j` (row 0 on top).
    pub fn v(&self, j: usize) -> f64 {
        self.half_width - (j as f64 + 0.5) * self.pixel()
    }
}

/// Object pose in the sensor frame: `u` along the face, `w` distance of the
/// object center in front of the face (meters), `yaw` relative to the face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactPose {
    pub u: f64,
    pub w: f64,
    pub yaw: f64,
}

/// Box corners in the sensor frame, counter-clockwise.
pub(crate) fn box_corners(pose: &ContactPose, half_size: f64) -> [(f64, f64); 4] {
    let (s, c) = pose.yaw.sin_cos();
    let local = [
        (-half_size, -half_size),
        (half_size, -half_size),
        (half_size, half_size),
        (-half_size, half_size),
    ];
    local.map(|(a, b)| (pose.u + c * a - s * b, pose.w + s * a + c * b))
}

/// Smallest `w` of the polygon boundary along the line at lateral `u`.
pub(crate) fn lower_envelope(corners: &[(f64, f64); 4], u: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for k in 0..4 {
        let (p, q) = (corners[k], corners[(k + 1) % 4]);
        let (lo, hi) = if p.0 <= q.0 { (p, q) } else { (q, p) };
        if u < lo.0 || u > hi.0 {
            continue;
        }
        let w = if hi.0 - lo.0 < 1e-15 {
            lo.1.min(hi.1)
        } else {
            lo.1 + (hi.1 - lo.1) * (u - lo.0) / (hi.0 - lo.0)
        };
        best = Some(best.map_or(w, |b: f64| b.min(w)));
    }
    best
}

/// Analytic gel indentation image for an object pressed against the pad.
///
/// A ball of radius `size` leaves a spherical cap wherever it crosses the
/// pad plane; a box of half side `size` leaves a plateau over its height
/// whose depth follows the box's near edge. Depth is capped at the gel
/// limit; objects behind the pad leave no mark.
pub fn render_contact_depth(
    pose: &ContactPose,
    shape: Shape,
    size: f64,
    sensor: &SensorGeometry,
) -> DepthGrid {
    let n = sensor.resolution;
    let cap = sensor.depth_cap_mm;
    let mut data = vec![0.0; n * n];
    if pose.w <= 0.0 {
        return DepthGrid::new(n, n, data).expect("valid grid");
    }
    match shape {
        Shape::Ball => {
            for j in 0..n {
                let v = sensor.v(j);
                for i in 0..n {
                    let du = sensor.u(i) - pose.u;
                    let h2 = size * size - du * du - v * v;
                    if h2 > 0.0 {
                        let d = (h2.sqrt() - pose.w) * 1000.0;
                        data[j * n + i] = d.clamp(0.0, cap);
                    }
                }
            }
        }
        Shape::Box => {
            let corners = box_corners(pose, size);
            for i in 0..n {
                let Some(w) = lower_envelope(&corners, sensor.u(i)) else {
                    continue;
                };
                let d = (-w * 1000.0).clamp(0.0, cap);
                for j in 0..n {
                    if sensor.v(j).abs() <= size {
                        data[j * n + i] = d;
                    }
                }
            }
        }
    }
    DepthGrid::new(n, n, data).expect("depths are finite and non-negative")
}
