//! Composite trapezoid quadrature with halving refinement, plus the
//! exponentially fitted cell weights used where `e^{-q a}` varies faster
//! than the age grid resolves.

use nalgebra::DMatrix;

use crate::Result;

/// Stop refining once successive results differ by less than this.
pub const REFINE_TOL: f64 = 1e-8;
/// Smallest step the refinement loop will try.
pub const STEP_FLOOR: f64 = 1e-5;

/// Trapezoid weights for `n` intervals of width `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n + 1];
    if n == 0 {
        w[0] = 0.0;
        return w;
    }
    w[0] = 0.5 * h;
    w[n] = 0.5 * h;
    w
}

/// Composite trapezoid of equally spaced samples.
pub fn trapezoid(samples: &[f64], h: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = samples[1..n - 1].iter().sum();
            h * (0.5 * (samples[0] + samples[n - 1]) + inner)
        }
    }
}

/// Outcome of [`refine_trapezoid`].
#[derive(Debug, Clone)]
pub struct Refined {
    pub value: DMatrix<f64>,
    pub intervals: usize,
    /// Difference between the last two refinement levels.
    pub change: f64,
}

/// Integrates a matrix-valued `f` over `[0, t]`, halving the step until two
/// successive composite-trapezoid values differ by less than [`REFINE_TOL`]
/// (max-abs) or the step drops below [`STEP_FLOOR`].
///
/// `f` receives the node count `n` and step `h`, and must return the node
/// values `f(0), f(h), …, f(nh)`; this lets callers reuse semigroup
/// structure when tabulating.
pub fn refine_trapezoid<F>(t: f64, mut samples: F) -> Result<Refined>
where
    F: FnMut(usize, f64) -> Result<Vec<DMatrix<f64>>>,
{
    if t == 0.0 {
        let v = samples(0, 0.0)?;
        return Ok(Refined {
            value: v[0].clone() * 0.0,
            intervals: 0,
            change: 0.0,
        });
    }
    let mut n = 16usize;
    let mut prev: Option<DMatrix<f64>> = None;
    loop {
        let h = t / n as f64;
        let vals = samples(n, h)?;
        let w = trapezoid_weights(n, h);
        let mut acc = vals[0].clone() * w[0];
        for (v, wk) in vals.iter().zip(&w).skip(1) {
            acc += v * *wk;
        }
        if let Some(p) = prev {
            let change = (&acc - &p).amax();
            if change < REFINE_TOL || h / 2.0 < STEP_FLOOR {
                return Ok(Refined {
                    value: acc,
                    intervals: n,
                    change,
                });
            }
        }
        prev = Some(acc);
        n *= 2;
    }
}

/// Weights `(w0, w1)` with `∫_0^h e^{-q s} g(s) ds ≈ w0·g(0) + w1·g(h)` for
/// `g` linear on the cell. Exact for linear `g`, uniformly in `q ≥ 0`.
pub fn exp_fitted_cell(q: f64, h: f64) -> (f64, f64) {
    let x = q * h;
    if x.abs() < 1e-3 {
        let total = h * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
        let w1 = h * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0);
        (total - w1, w1)
    } else {
        let e = (-x).exp();
        let total = -(-x).exp_m1() / q;
        let w1 = (1.0 - e * (1.0 + x)) / (q * x);
        (total - w1, w1)
    }
}

/// `∫_0^{Nh} e^{-q a} g(a) da` for samples `g_k = g(kh)`, with `g`
/// piecewise linear and the exponential integrated exactly on each cell.
pub fn exp_fitted_integral(q: f64, h: f64, g: &[f64]) -> f64 {
    let (w0, w1) = exp_fitted_cell(q, h);
    let mut acc = 0.0;
    for (k, pair) in g.windows(2).enumerate() {
        let scale = (-q * h * k as f64).exp();
        if scale == 0.0 {
            break;
        }
        acc += scale * (w0 * pair[0] + w1 * pair[1]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_exact_for_linear() {
        let h = 0.1;
        let s: Vec<f64> = (0..=10).map(|k| 2.0 * k as f64 * h + 1.0).collect();
        assert!((trapezoid(&s, h) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn refinement_converges_on_exponential() {
        let r = refine_trapezoid(1.0, |n, h| {
            Ok((0..=n)
                .map(|k| DMatrix::from_element(1, 1, (k as f64 * h).exp()))
                .collect())
        })
        .unwrap();
        assert!((r.value[(0, 0)] - (1f64.exp() - 1.0)).abs() < 1e-8);
        assert!(r.change < REFINE_TOL);
    }

    #[test]
    fn exp_fitted_weights_match_closed_form() {
        // g ≡ 1: ∫_0^c e^{-q a} da
        for &q in &[0.0, 1e-6, 0.5, 40.0, 2000.0] {
            let h = 0.05;
            let g = vec![1.0; 101];
            let exact = if q == 0.0 { 5.0 } else { -(-q * 5.0f64).exp_m1() / q };
            let got = exp_fitted_integral(q, h, &g);
            assert!((got - exact).abs() <= 1e-12 * exact.max(1.0), "q={q}: {got} vs {exact}");
        }
    }

    #[test]
    fn exp_fitted_exact_for_linear_g() {
        // ∫_0^1 e^{-q a} a da = (1 - e^{-q}(1+q))/q²
        let q: f64 = 3.0;
        let h = 0.25;
        let g: Vec<f64> = (0..=4).map(|k| k as f64 * h).collect();
        let exact = (1.0 - (-q).exp() * (1.0 + q)) / (q * q);
        assert!((exp_fitted_integral(q, h, &g) - exact).abs() < 1e-14);
    }
}
