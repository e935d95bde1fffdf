//! Local Hölder exponent estimation by oscillation decay.
//!
//! A field with `osc u ≲ r^α` over balls `B_r(x₀)` traces a line of slope
//! α in log-log coordinates. We measure the vertex oscillation over a
//! dyadic ladder of radii and fit that slope by least squares. Radii
//! below four mesh widths are excluded: a piecewise linear field looks
//! Lipschitz under the mesh scale no matter what it approximates, so
//! small-ball slopes say nothing about the underlying function.

use crate::driftsolve::check_ball;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::tol;

/// Oscillation decay fit over one ladder of dyadic balls.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HolderFit {
    pub center: [f64; 2],
    /// Radii actually used, decreasing.
    pub radii: Vec<f64>,
    /// Vertex oscillations per radius, same order.
    pub oscillations: Vec<f64>,
    /// Fitted slope of log oscillation against log radius, clipped at
    /// the Lipschitz cap.
    pub alpha: f64,
    /// Least-squares quality of the uncapped fit.
    pub fit_r2: f64,
    /// `(r_min, r_max)` of the radii used.
    pub window: (f64, f64),
    /// Whether the fit quality clears the reporting threshold.
    pub conclusive: bool,
}

/// Max minus min of `u` over mesh vertices inside `B_r(x₀)`.
pub fn oscillation(u: &ScalarField, x0: [f64; 2], r: f64) -> Result<f64> {
    check_ball(x0, r)?;
    let h = u.mesh.max_edge_len();
    if r < tol::OSC_MIN_RADIUS_FACTOR * h {
        return Err(Error::Window(format!(
            "radius {r} is under {} mesh widths ({h:.5})",
            tol::OSC_MIN_RADIUS_FACTOR
        )));
    }
    let r2 = r * r;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (p, v) in u.mesh.vertices.iter().zip(&u.values) {
        let dx = p[0] - x0[0];
        let dy = p[1] - x0[1];
        if dx * dx + dy * dy <= r2 {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    Ok(hi - lo)
}

/// Fits the oscillation decay exponent over radii `r_max, r_max/2, …`
/// (`n_dyadic` rungs), keeping only radii the mesh can resolve.
pub fn holder_fit(u: &ScalarField, x0: [f64; 2], r_max: f64, n_dyadic: usize) -> Result<HolderFit> {
    if n_dyadic < 3 {
        return Err(Error::Config(format!(
            "dyadic ladder needs at least 3 rungs, got {n_dyadic}"
        )));
    }
    check_ball(x0, r_max)?;

    let floor = tol::OSC_MIN_RADIUS_FACTOR * u.mesh.max_edge_len();
    let mut radii = Vec::new();
    let mut oscillations = Vec::new();
    let mut r = r_max;
    for _ in 0..n_dyadic {
        if r < floor {
            break;
        }
        radii.push(r);
        oscillations.push(oscillation(u, x0, r)?);
        r *= 0.5;
    }
    if radii.len() < 3 {
        return Err(Error::Window(format!(
            "only {} of {n_dyadic} radii clear the {floor:.5} resolution floor under r_max {r_max}",
            radii.len()
        )));
    }
    if oscillations.iter().filter(|o| **o > 0.0).count() < 3 {
        return Err(Error::Window(
            "fewer than 3 radii show positive oscillation; the field is flat here".into(),
        ));
    }

    let points: Vec<(f64, f64)> = radii
        .iter()
        .zip(&oscillations)
        .filter(|(_, o)| **o > 0.0)
        .map(|(r, o)| (r.ln(), o.ln()))
        .collect();
    let (slope, fit_r2) = ols_slope(&points);
    let alpha = slope.min(tol::ALPHA_CAP);

    Ok(HolderFit {
        center: x0,
        window: (*radii.last().unwrap(), radii[0]),
        radii,
        oscillations,
        alpha,
        fit_r2,
        conclusive: fit_r2 >= tol::FIT_R2_MIN,
    })
}

/// Least-squares slope and R² of `y` against `x`.
fn ols_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}

/// Fits every center, skipping ones whose window the mesh cannot
/// support; errors other than window admissibility still abort.
pub fn scan(
    u: &ScalarField,
    centers: &[[f64; 2]],
    r_max: f64,
    n_dyadic: usize,
) -> Result<Vec<HolderFit>> {
    let mut fits = Vec::with_capacity(centers.len());
    for &x0 in centers {
        match holder_fit(u, x0, r_max, n_dyadic) {
            Ok(fit) => fits.push(fit),
            Err(Error::Window(_)) | Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(fits)
}
