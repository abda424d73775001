use nalgebra::DMatrix;

use crate::error::invalid;
use crate::grid::TimeGrid;
use crate::linalg::{check_square, log_norm, op_norm, LinearMap};
use crate::Result;

/// Exponential bound `‖T(t)‖ ≤ M e^{ω t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpBound {
    pub m: f64,
    pub omega: f64,
}

impl ExpBound {
    pub fn new(m: f64, omega: f64) -> Self {
        Self { m, omega }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.m * (self.omega * t).exp()
    }
}

/// `e^{tA}` by scaling and squaring with a Padé approximant.
pub fn matrix_semigroup(generator: &LinearMap, t: f64) -> Result<LinearMap> {
    check_square(generator, "generator")?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("semigroup time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(DMatrix::identity(generator.nrows(), generator.ncols()));
    }
    let out = (generator * t).exp();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("e^(tA) overflowed at t = {t}")));
    }
    Ok(out)
}

/// A time-indexed family `t ↦ T(t)` of linear maps.
#[derive(Debug, Clone)]
pub enum SemigroupPath {
    /// `T(t) = e^{tA}`.
    Generator { generator: LinearMap, bound: ExpBound },
    /// Values on grid nodes; off-grid times are linearly interpolated.
    Tabulated {
        grid: TimeGrid,
        values: Vec<LinearMap>,
        bound: ExpBound,
    },
}

impl SemigroupPath {
    /// Path of `e^{tA}` with bound `(1, μ₂(A))` from the logarithmic norm.
    pub fn from_generator(generator: LinearMap) -> Result<Self> {
        check_square(&generator, "generator")?;
        let omega = log_norm(&generator);
        Ok(Self::Generator {
            generator,
            bound: ExpBound::new(1.0, omega),
        })
    }

    /// Tabulated path; the bound is fitted to the samples.
    pub fn tabulated(grid: TimeGrid, values: Vec<LinearMap>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let bound = fit_bound(&grid, &values);
        Ok(Self::Tabulated {
            grid,
            values,
            bound,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Generator { generator, .. } => generator.nrows(),
            Self::Tabulated { values, .. } => values[0].nrows(),
        }
    }

    pub fn bound(&self) -> ExpBound {
        match self {
            Self::Generator { bound, .. } | Self::Tabulated { bound, .. } => *bound,
        }
    }

    pub fn eval(&self, t: f64) -> Result<LinearMap> {
        match self {
            Self::Generator { generator, .. } => matrix_semigroup(generator, t),
            Self::Tabulated { grid, values, .. } => {
                if !(t >= 0.0 && t <= grid.t_end() * (1.0 + 1e-12)) {
                    return Err(invalid(format!(
                        "t = {t} outside tabulated range [0, {}]",
                        grid.t_end()
                    )));
                }
                if let Some(k) = grid.index_of(t) {
                    return Ok(values[k].clone());
                }
                let r = t / grid.dt();
                let k = (r.floor() as usize).min(grid.steps() - 1);
                let theta = r - k as f64;
                Ok(&values[k] * (1.0 - theta) + &values[k + 1] * theta)
            }
        }
    }

    /// Values at `0, h, …, n·h`. For a generator path this is built from
    /// powers of `e^{hA}`.
    pub fn sample_uniform(&self, n: usize, h: f64) -> Result<Vec<LinearMap>> {
        match self {
            Self::Generator { generator, .. } => {
                let step = matrix_semigroup(generator, h)?;
                let mut out = Vec::with_capacity(n + 1);
                let mut cur = DMatrix::identity(generator.nrows(), generator.ncols());
                out.push(cur.clone());
                for _ in 0..n {
                    cur = &step * &cur;
                    out.push(cur.clone());
                }
                Ok(out)
            }
            Self::Tabulated { .. } => (0..=n).map(|k| self.eval(k as f64 * h)).collect(),
        }
    }
}

fn fit_bound(grid: &TimeGrid, values: &[LinearMap]) -> ExpBound {
    let norms: Vec<f64> = values.iter().map(op_norm).collect();
    let mut omega = f64::NEG_INFINITY;
    for (k, nrm) in norms.iter().enumerate().skip(1) {
        let t = grid.node(k);
        if t >= 0.5 && *nrm > 0.0 {
            omega = omega.max(nrm.ln() / t);
        }
    }
    if !omega.is_finite() {
        omega = norms
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, n)| **n > 0.0)
            .map(|(k, n)| n.ln() / grid.node(k))
            .fold(0.0, f64::max);
    }
    let m = norms
        .iter()
        .enumerate()
        .map(|(k, n)| n * (-omega * grid.node(k)).exp())
        .fold(1.0, f64::max);
    ExpBound::new(m, omega)
}

/// `max ‖T(t+s) − T(t)T(s)‖` over the given pairs.
pub fn semigroup_law_residual(path: &SemigroupPath, pairs: &[(f64, f64)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &(t, s) in pairs {
        let lhs = path.eval(t + s)?;
        let rhs = path.eval(t)? * path.eval(s)?;
        worst = worst.max(op_norm(&(lhs - rhs)));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Term-by-term Taylor sum; independent of the Padé route.
    fn taylor_exp(a: &DMatrix<f64>, t: f64, terms: usize) -> DMatrix<f64> {
        let n = a.nrows();
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..terms {
            term = &term * a * (t / k as f64);
            sum += &term;
        }
        sum
    }

    #[test]
    fn zero_generator_gives_identity() {
        let a = DMatrix::zeros(3, 3);
        let e = matrix_semigroup(&a, 5.0).unwrap();
        assert_eq!(e, DMatrix::identity(3, 3));
    }

    #[test]
    fn scalar_decay() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let e = matrix_semigroup(&a, 1.0).unwrap();
        assert!((e[(0, 0)] - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn nilpotent_series_truncates() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let oracle = taylor_exp(&a, 2.0, 4);
        assert_eq!(oracle, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]));
        let e = matrix_semigroup(&a, 2.0).unwrap();
        assert!((e - oracle).amax() < 1e-14);
    }

    #[test]
    fn relative_accuracy_against_taylor() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.4, 0.2, 0.3, -2.0, 0.5, 0.0, 0.7, 0.5]);
        for &t in &[0.1, 1.0, 3.0] {
            let oracle = taylor_exp(&a, t, 80);
            let e = matrix_semigroup(&a, t).unwrap();
            assert!(op_norm(&(&e - &oracle)) <= 1e-12 * op_norm(&oracle));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let a = DMatrix::from_element(1, 1, f64::INFINITY);
        assert!(matrix_semigroup(&a, 1.0).is_err());
        let b = DMatrix::from_element(1, 1, 1.0);
        assert!(matrix_semigroup(&b, -1.0).is_err());
    }

    #[test]
    fn semigroup_law_on_lattice() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, -0.2, -1.0]);
        let path = SemigroupPath::from_generator(a).unwrap();
        let pairs: Vec<(f64, f64)> = (0..10)
            .flat_map(|i| (0..10).map(move |j| (0.2 * i as f64, 0.3 * j as f64)))
            .collect();
        assert!(semigroup_law_residual(&path, &pairs).unwrap() <= 1e-9);
    }

    #[test]
    fn generator_bound_holds() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -1.5]);
        let path = SemigroupPath::from_generator(a).unwrap();
        let b = path.bound();
        for k in 0..30 {
            let t = 0.2 * k as f64;
            assert!(op_norm(&path.eval(t).unwrap()) <= b.at(t) * (1.0 + 1e-12));
        }
    }
}
