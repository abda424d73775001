//! Small dense linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::invalid;
use crate::{Result, C64};

/// Real `n×m` matrix representing a bounded linear map.
pub type LinearMap = DMatrix<f64>;

/// Complex matrix, used only for resolvent values.
pub type CMat = DMatrix<C64>;

pub fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(invalid(format!("{what}: empty matrix")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{what}: non-finite entries")));
    }
    Ok(())
}

pub fn check_square(m: &DMatrix<f64>, what: &str) -> Result<usize> {
    check_finite(m, what)?;
    if m.nrows() != m.ncols() {
        return Err(invalid(format!(
            "{what}: expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.norm();
    }
    m.singular_values().max()
}

pub fn cop_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.norm();
    }
    m.singular_values().max()
}

/// 2-norm condition number of a complex square matrix (infinite when singular).
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

pub fn vec_to_complex(v: &DVector<f64>) -> DVector<C64> {
    v.map(|x| C64::new(x, 0.0))
}

/// Logarithmic 2-norm `λ_max((A + Aᵀ)/2)`; gives `‖e^{tA}‖ ≤ e^{μ t}`.
pub fn log_norm(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

/// Euclidean norm of a slice.
pub fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Row-major `n×n` matrix times vector, written into `out`.
#[inline]
pub(crate) fn matvec_into(m: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * n..(i + 1) * n];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// Row-major flattening of a square matrix.
pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}


/// Norm on the state space `X`.
///
/// For the age model `X = E × L^p((0,c), E)` carries the sum norm
/// `|y| + ‖f‖_{L^p}`, with the `L^p` part computed by trapezoid on the age
/// grid; its closed subspace `X₀ = {0} × L^p` uses the `L^p` part alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateNorm {
    Euclidean,
    /// `(y, f)` stacked as `[y; f(a_0); …; f(a_N)]`.
    AgeAmbient { dim: usize, p: f64, da: f64 },
    /// Profiles only, `[f(a_0); …; f(a_N)]`.
    AgeProfile { dim: usize, p: f64, da: f64 },
}

impl StateNorm {
    pub fn norm(&self, v: &[f64]) -> f64 {
        match *self {
            Self::Euclidean => euclid(v),
            Self::AgeAmbient { dim, p, da } => {
                euclid(&v[..dim]) + crate::semigroup::lp_norm_flat(&v[dim..], dim, p, da)
            }
            Self::AgeProfile { dim, p, da } => crate::semigroup::lp_norm_flat(v, dim, p, da),
        }
    }

    /// Largest column norm of a state-valued matrix.
    pub fn max_column(&self, m: &DMatrix<f64>) -> f64 {
        m.column_iter()
            .map(|c| self.norm(c.as_slice()))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_of_diagonal_is_max_abs() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 2.0]));
        assert!((op_norm(&m) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let m = DMatrix::from_element(2, 2, f64::NAN);
        assert!(check_finite(&m, "m").is_err());
    }

    #[test]
    fn log_norm_bounds_growth() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 3.0, 0.0, -2.0]);
        let mu = log_norm(&a);
        for k in 1..20 {
            let t = 0.1 * k as f64;
            let e = (a.clone() * t).exp();
            assert!(op_norm(&e) <= (mu * t).exp() * (1.0 + 1e-12));
        }
    }
}
