use nalgebra::DMatrix;

use crate::error::invalid;
use crate::linalg::{check_finite, check_square, condition_number, cop_norm, to_complex, CMat, LinearMap};
use crate::{Error, Result, C64};

/// Condition number beyond which `λ` counts as numerically in the spectrum.
pub const PROXIMITY_CONDITION: f64 = 1e8;

/// Evaluates `R(λ, A)` on `X` (with values in `X₀`) and `R(λ, A₀)` on `X₀`.
pub trait ResolventOperator: Sync {
    fn x_dim(&self) -> usize;
    fn x0_dim(&self) -> usize;
    /// `R(λ, A)` as an `x0_dim × x_dim` matrix.
    fn resolvent(&self, lambda: C64) -> Result<CMat>;
    /// `R(λ, A₀)` as an `x0_dim × x0_dim` matrix.
    fn part_resolvent(&self, lambda: C64) -> Result<CMat>;
    /// `‖R(λ, A)‖`; implementors with a cheaper route than the dense matrix
    /// override this.
    fn norm(&self, lambda: C64) -> Result<f64> {
        Ok(cop_norm(&self.resolvent(lambda)?))
    }
}

fn inverse_checked(m: CMat, lambda: C64) -> Result<CMat> {
    let condition = condition_number(&m);
    if !condition.is_finite() || condition > PROXIMITY_CONDITION {
        return Err(Error::SpectrumProximity { lambda, condition });
    }
    m.try_inverse().ok_or(Error::SpectrumProximity {
        lambda,
        condition: f64::INFINITY,
    })
}

/// `R(λ, A) = (λ − A)^{−1}` for a matrix generator (`X₀ = X`).
#[derive(Debug, Clone)]
pub struct MatrixResolvent {
    a: LinearMap,
}

impl MatrixResolvent {
    pub fn new(a: LinearMap) -> Result<Self> {
        check_square(&a, "generator")?;
        Ok(Self { a })
    }

    pub fn generator(&self) -> &LinearMap {
        &self.a
    }
}

impl ResolventOperator for MatrixResolvent {
    fn x_dim(&self) -> usize {
        self.a.nrows()
    }

    fn x0_dim(&self) -> usize {
        self.a.nrows()
    }

    fn resolvent(&self, lambda: C64) -> Result<CMat> {
        let n = self.a.nrows();
        let m = CMat::identity(n, n) * lambda - to_complex(&self.a);
        inverse_checked(m, lambda)
    }

    fn part_resolvent(&self, lambda: C64) -> Result<CMat> {
        self.resolvent(lambda)
    }
}

/// `R(λ, (A+L)₀) = (I − R(λ,A)L)^{−1} R(λ, A₀)`.
pub fn perturbed_resolvent<R: ResolventOperator + ?Sized>(r: &R, l: &LinearMap, lambda: C64) -> Result<CMat> {
    if l.nrows() != r.x_dim() || l.ncols() != r.x0_dim() {
        return Err(invalid(format!(
            "perturbation is {}x{}, expected {}x{}",
            l.nrows(),
            l.ncols(),
            r.x_dim(),
            r.x0_dim()
        )));
    }
    check_finite(l, "perturbation")?;
    let ra = r.resolvent(lambda)?;
    let n0 = r.x0_dim();
    let m = CMat::identity(n0, n0) - ra * to_complex(l);
    let inv = inverse_checked(m, lambda)?;
    Ok(inv * r.part_resolvent(lambda)?)
}

/// The resolvent of `(A+L)₀` viewed as a [`ResolventOperator`] on `X₀`.
pub struct PerturbedResolvent<'a, R: ?Sized> {
    pub base: &'a R,
    pub l: DMatrix<f64>,
}

impl<R: ResolventOperator + ?Sized> ResolventOperator for PerturbedResolvent<'_, R> {
    fn x_dim(&self) -> usize {
        self.base.x0_dim()
    }

    fn x0_dim(&self) -> usize {
        self.base.x0_dim()
    }

    fn resolvent(&self, lambda: C64) -> Result<CMat> {
        perturbed_resolvent(self.base, &self.l, lambda)
    }

    fn part_resolvent(&self, lambda: C64) -> Result<CMat> {
        self.resolvent(lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_perturbation() {
        let r = MatrixResolvent::new(DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0])).unwrap();
        let lam = C64::new(0.5, 1.0);
        let a = perturbed_resolvent(&r, &DMatrix::zeros(2, 2), lam).unwrap();
        assert!((a - r.part_resolvent(lam).unwrap()).camax() < 1e-15);
    }

    #[test]
    fn scalar_geometric_series() {
        let (a, l) = (-0.4, 0.25);
        let r = MatrixResolvent::new(DMatrix::from_element(1, 1, a)).unwrap();
        for lam in [C64::new(1.0, 0.0), C64::new(0.2, 3.0)] {
            let got = perturbed_resolvent(&r, &DMatrix::from_element(1, 1, l), lam).unwrap()[(0, 0)];
            let exact = C64::new(1.0, 0.0) / (lam - a - l);
            assert!((got - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn spectrum_proximity() {
        let r = MatrixResolvent::new(DMatrix::from_element(1, 1, 0.5)).unwrap();
        let err = r.resolvent(C64::new(0.5, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SpectrumProximity { .. }));
        let err = perturbed_resolvent(&r, &DMatrix::from_element(1, 1, 0.5), C64::new(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SpectrumProximity { .. }));
    }
}
