use nalgebra::DMatrix;

use crate::age::BoundaryKernel;
use crate::error::invalid;
use crate::linalg::CMat;
use crate::quadrature::trapezoid_weights;
use crate::semigroup::EvolutionFamily;
use crate::{Error, Result, C64};

/// Samples of `g` used to bracket sign changes.
pub const ROOT_SAMPLES: usize = 256;
const MAX_ITER: usize = 200;

fn check(u: &EvolutionFamily, c: &BoundaryKernel) -> Result<()> {
    if c.nodes() != u.grid().len() || c.dim() != u.dim() {
        return Err(invalid("birth kernel is not sampled on the evolution family's age grid"));
    }
    Ok(())
}

/// `K(λ) = ∫_0^c e^{−λa} C(a) U(a,0) da` by trapezoid on the age grid.
pub fn characteristic_matrix(u: &EvolutionFamily, c: &BoundaryKernel, lambda: C64) -> Result<CMat> {
    check(u, c)?;
    let n = u.dim();
    let w = trapezoid_weights(u.grid().steps(), u.da());
    let mut k = CMat::zeros(n, n);
    for (j, wj) in w.iter().enumerate() {
        let cu = c.at(j) * u.from_zero(j);
        let e = (-lambda * u.grid().node(j)).exp() * *wj;
        k += cu.map(|v| C64::new(v, 0.0) * e);
    }
    Ok(k)
}

/// `K(λ)` and `K'(λ)` for real `λ`.
fn real_kernel(u: &EvolutionFamily, c: &BoundaryKernel, lambda: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = u.dim();
    let w = trapezoid_weights(u.grid().steps(), u.da());
    let mut k = DMatrix::zeros(n, n);
    let mut dk = DMatrix::zeros(n, n);
    for (j, wj) in w.iter().enumerate() {
        let a = u.grid().node(j);
        let cu = c.at(j) * u.from_zero(j);
        let e = (-lambda * a).exp() * wj;
        k += &cu * e;
        dk -= cu * (a * e);
    }
    (k, dk)
}

/// `g(λ) = det(I − K(λ))` for real `λ`.
pub fn characteristic(u: &EvolutionFamily, c: &BoundaryKernel, lambda: f64) -> Result<f64> {
    check(u, c)?;
    let n = u.dim();
    let (k, _) = real_kernel(u, c, lambda);
    Ok((DMatrix::identity(n, n) - k).determinant())
}

/// `g(λ)` and `g'(λ) = −tr(adj(I−K) K')`.
fn g_and_slope(u: &EvolutionFamily, c: &BoundaryKernel, lambda: f64) -> (f64, f64) {
    let n = u.dim();
    let (k, dk) = real_kernel(u, c, lambda);
    let m = DMatrix::identity(n, n) - k;
    let g = m.clone().determinant();
    let slope = match m.try_inverse() {
        Some(inv) => -g * (inv * dk).trace(),
        None => f64::NAN,
    };
    (g, slope)
}

/// Real roots of `det(I − K(λ))` in `window`, bracketed by sign changes on
/// a uniform sample and refined by safeguarded Newton steps until
/// `|g| ≤ tol`.
pub fn lotka_roots(u: &EvolutionFamily, c: &BoundaryKernel, window: (f64, f64), tol: f64) -> Result<Vec<f64>> {
    check(u, c)?;
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(format!("root window [{lo}, {hi}] is not a bounded interval")));
    }
    if !(tol > 0.0) {
        return Err(invalid("root tolerance must be positive"));
    }
    let xs: Vec<f64> = (0..=ROOT_SAMPLES)
        .map(|i| lo + (hi - lo) * i as f64 / ROOT_SAMPLES as f64)
        .collect();
    let gs: Vec<f64> = xs.iter().map(|&x| g_and_slope(u, c, x).0).collect();
    let mut roots = Vec::new();
    for i in 0..ROOT_SAMPLES {
        if gs[i] == 0.0 {
            roots.push(xs[i]);
        } else if gs[i].signum() != gs[i + 1].signum() && gs[i + 1] != 0.0 {
            roots.push(refine(u, c, (xs[i], gs[i]), (xs[i + 1], gs[i + 1]), tol));
        }
    }
    if gs[ROOT_SAMPLES] == 0.0 {
        roots.push(hi);
    }
    if roots.is_empty() {
        return Err(Error::NoRootInWindow {
            lo,
            hi,
            g_lo: gs[0],
            g_hi: gs[ROOT_SAMPLES],
        });
    }
    Ok(roots)
}

fn refine(u: &EvolutionFamily, c: &BoundaryKernel, mut a: (f64, f64), mut b: (f64, f64), tol: f64) -> f64 {
    let mut x = 0.5 * (a.0 + b.0);
    for _ in 0..MAX_ITER {
        let (g, slope) = g_and_slope(u, c, x);
        if g.abs() <= tol {
            return x;
        }
        if g.signum() == a.1.signum() {
            a = (x, g);
        } else {
            b = (x, g);
        }
        if (b.0 - a.0).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return x;
        }
        let newton = x - g / slope;
        let inside = newton.is_finite() && newton > a.0.min(b.0) && newton < a.0.max(b.0);
        x = if inside { newton } else { 0.5 * (a.0 + b.0) };
    }
    x
}
