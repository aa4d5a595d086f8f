use super::{DepthGrid, GradientField, TactileError};

#[derive(Clone, Debug, PartialEq)]
pub struct PoissonSolution {
    pub depth: DepthGrid,
    /// Max interior residual `|lap(z) - div(g)|` of the raw solve.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central-difference divergence on interior cells (zero on the boundary).
fn divergence(g: &GradientField) -> Vec<f64> {
    let (h, w) = (g.height(), g.width());
    let (gx, gy) = (g.gx(), g.gy());
    let mut div = vec![0.0; h * w];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            div[i] = 0.5 * (gx[i + 1] - gx[i - 1]) + 0.5 * (gy[i + w] - gy[i - w]);
        }
    }
    div
}

fn max_residual(z: &[f64], div: &[f64], h: usize, w: usize) -> f64 {
    let mut r: f64 = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let lap = z[i - 1] + z[i + 1] + z[i - w] + z[i + w] - 4.0 * z[i];
            r = r.max((lap - div[i]).abs());
        }
    }
    r
}

/// Integrates a gradient field into a depth map.
///
/// Solves the 5-point discrete Poisson equation with zero boundary values by
/// Gauss-Seidel sweeps until the max residual drops to `tol`. The result is
/// negated if its largest excursion is negative and then shifted so its
/// minimum is zero.
pub fn depth_from_gradients(
    g: &GradientField,
    tol: f64,
    max_iters: usize,
) -> Result<PoissonSolution, TactileError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(TactileError::InvalidArgument("tol must be positive".into()));
    }
    let (h, w) = (g.height(), g.width());
    let div = divergence(g);
    let mut z = vec![0.0; h * w];
    let mut residual = max_residual(&z, &div, h, w);
    let mut iterations = 0;
    while residual > tol && iterations < max_iters {
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let i = y * w + x;
                z[i] = 0.25 * (z[i - 1] + z[i + 1] + z[i - w] + z[i + w] - div[i]);
            }
        }
        iterations += 1;
        residual = max_residual(&z, &div, h, w);
    }
    let converged = residual <= tol;

    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.abs() > hi.abs() {
        z.iter_mut().for_each(|v| *v = -*v);
    }
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    z.iter_mut().for_each(|v| *v = (*v - lo).max(0.0));
    Ok(PoissonSolution {
        depth: DepthGrid::new(h, w, z)?,
        residual,
        iterations,
        converged,
    })
}
