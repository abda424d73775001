use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::invalid;
use crate::grid::TimeGrid;
use crate::linalg::{check_square, op_norm, row_major, LinearMap};
use crate::semigroup::ExpBound;
use crate::Result;

/// Runge-Kutta substeps per age step.
pub const SUBSTEPS: usize = 4;

/// Coefficient samples with a larger norm are treated as unbounded.
const COEFF_CEILING: f64 = 1e12;

/// Minimal age separation for the growth-bound estimator.
const OMEGA_MIN_GAP: f64 = 0.5;

/// Maximum number of sample nodes used by the growth-bound estimator.
const OMEGA_SAMPLES: usize = 256;

/// Age-indexed coefficient family `a ↦ A(a)`.
#[derive(Clone)]
pub enum AgeCoefficients {
    Constant(LinearMap),
    /// Piecewise-linear interpolation between tabulated ages; constant
    /// extrapolation outside the table.
    Table { ages: Vec<f64>, matrices: Vec<LinearMap> },
    /// `A(a) = b(a)·A₀` with `b` a polynomial (coefficients by increasing
    /// degree).
    ScaledGenerator { generator: LinearMap, scale: Vec<f64> },
    Custom {
        dim: usize,
        f: Arc<dyn Fn(f64) -> LinearMap + Send + Sync>,
    },
}

impl fmt::Debug for AgeCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Self::Table { ages, .. } => f.debug_struct("Table").field("ages", ages).finish(),
            Self::ScaledGenerator { generator, scale } => f
                .debug_struct("ScaledGenerator")
                .field("generator", generator)
                .field("scale", scale)
                .finish(),
            Self::Custom { dim, .. } => f.debug_struct("Custom").field("dim", dim).finish(),
        }
    }
}

impl AgeCoefficients {
    /// `A(a) ≡ −μ I_n`.
    pub fn scalar_mortality(mu: f64, dim: usize) -> Self {
        Self::Constant(DMatrix::identity(dim, dim) * -mu)
    }

    pub fn from_fn(dim: usize, f: impl Fn(f64) -> LinearMap + Send + Sync + 'static) -> Self {
        Self::Custom {
            dim,
            f: Arc::new(f),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Constant(m) => m.nrows(),
            Self::Table { matrices, .. } => matrices.first().map_or(0, |m| m.nrows()),
            Self::ScaledGenerator { generator, .. } => generator.nrows(),
            Self::Custom { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant(m) => check_square(m, "coefficient").map(|_| ()),
            Self::Table { ages, matrices } => {
                if ages.is_empty() || ages.len() != matrices.len() {
                    return Err(invalid("coefficient table: ages and matrices differ in length"));
                }
                if ages.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("coefficient table: ages must be strictly increasing"));
                }
                let n = matrices[0].nrows();
                for m in matrices {
                    if check_square(m, "coefficient table")? != n {
                        return Err(invalid("coefficient table: inconsistent dimensions"));
                    }
                }
                Ok(())
            }
            Self::ScaledGenerator { generator, scale } => {
                check_square(generator, "scaled generator")?;
                if scale.is_empty() || scale.iter().any(|c| !c.is_finite()) {
                    return Err(invalid("scaled generator: bad scale polynomial"));
                }
                Ok(())
            }
            Self::Custom { dim, .. } => {
                if *dim == 0 {
                    Err(invalid("custom coefficients: dimension must be >= 1"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn at(&self, a: f64) -> LinearMap {
        match self {
            Self::Constant(m) => m.clone(),
            Self::Table { ages, matrices } => {
                if a <= ages[0] {
                    return matrices[0].clone();
                }
                let last = ages.len() - 1;
                if a >= ages[last] {
                    return matrices[last].clone();
                }
                let k = ages.partition_point(|&x| x <= a) - 1;
                let theta = (a - ages[k]) / (ages[k + 1] - ages[k]);
                &matrices[k] * (1.0 - theta) + &matrices[k + 1] * theta
            }
            Self::ScaledGenerator { generator, scale } => {
                let b = scale.iter().rev().fold(0.0, |acc, c| acc * a + c);
                generator * b
            }
            Self::Custom { f, .. } => f(a),
        }
    }
}

/// Evolution family `U(a, s)`, `0 ≤ s ≤ a ≤ c`, generated by `dU/da = A(a)U`.
///
/// One-step propagators `U(a_{k+1}, a_k)` are computed once with classical
/// RK4 at substep `da/4` and composed on demand; nothing is ever inverted.
/// `U(a_k, 0)` is cached for every node.
#[derive(Debug, Clone)]
pub struct EvolutionFamily {
    dim: usize,
    grid: TimeGrid,
    coeffs: AgeCoefficients,
    steps: Vec<LinearMap>,
    steps_flat: Vec<Vec<f64>>,
    from_zero: Vec<LinearMap>,
    bound: ExpBound,
}

/// Builds `U` on `[0, c]` with age step `da`.
pub fn build_evolution_family(
    coeffs: &AgeCoefficients,
    c: f64,
    da: f64,
) -> Result<EvolutionFamily> {
    EvolutionFamily::new(coeffs.clone(), c, da)
}

fn rk4_step(coeffs: &AgeCoefficients, a: f64, h: f64, u: &LinearMap) -> LinearMap {
    let a0 = coeffs.at(a);
    let am = coeffs.at(a + 0.5 * h);
    let a1 = coeffs.at(a + h);
    let k1 = &a0 * u;
    let k2 = &am * (u + &k1 * (0.5 * h));
    let k3 = &am * (u + &k2 * (0.5 * h));
    let k4 = &a1 * (u + &k3 * h);
    u + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn check_coeff_sample(m: &LinearMap, a: f64) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) || m.amax() > COEFF_CEILING {
        return Err(invalid(format!("coefficient A({a}) is unbounded or non-finite")));
    }
    Ok(())
}

impl EvolutionFamily {
    pub fn new(coeffs: AgeCoefficients, c: f64, da: f64) -> Result<Self> {
        coeffs.validate()?;
        let grid = TimeGrid::new(c, da)?;
        if grid.steps() == 0 {
            return Err(invalid("maximal age must be at least one age step"));
        }
        let dim = coeffs.dim();
        let h = da / SUBSTEPS as f64;
        let mut steps = Vec::with_capacity(grid.steps());
        for k in 0..grid.steps() {
            let a = grid.node(k);
            for j in 0..=2 * SUBSTEPS {
                let s = a + 0.5 * h * j as f64;
                let m = coeffs.at(s);
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(invalid(format!("coefficient A({s}) has the wrong shape")));
                }
                check_coeff_sample(&m, s)?;
            }
            let mut u = DMatrix::identity(dim, dim);
            for j in 0..SUBSTEPS {
                u = rk4_step(&coeffs, a + h * j as f64, h, &u);
            }
            steps.push(u);
        }
        Self::from_steps(coeffs, grid, steps)
    }

    fn from_steps(coeffs: AgeCoefficients, grid: TimeGrid, steps: Vec<LinearMap>) -> Result<Self> {
        let dim = coeffs.dim();
        let mut from_zero = Vec::with_capacity(grid.len());
        let mut cur = DMatrix::identity(dim, dim);
        from_zero.push(cur.clone());
        for p in &steps {
            cur = p * &cur;
            from_zero.push(cur.clone());
        }
        let steps_flat = steps.iter().map(row_major).collect();
        let mut fam = Self {
            dim,
            grid,
            coeffs,
            steps,
            steps_flat,
            from_zero,
            bound: ExpBound::new(1.0, 0.0),
        };
        fam.bound = fam.estimate_bound();
        Ok(fam)
    }

    /// Copy with the one-step propagator at index `k` scaled by `factor`.
    /// Only useful for exercising failure paths of invariant checks.
    #[doc(hidden)]
    pub fn with_corrupted_step(&self, k: usize, factor: f64) -> Result<Self> {
        let mut steps = self.steps.clone();
        let p = steps
            .get_mut(k)
            .ok_or_else(|| invalid(format!("no step {k}")))?;
        *p *= factor;
        Self::from_steps(self.coeffs.clone(), self.grid, steps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Age grid `0, da, …, c`.
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn da(&self) -> f64 {
        self.grid.dt()
    }

    pub fn max_age(&self) -> f64 {
        self.grid.t_end()
    }

    pub fn coefficients(&self) -> &AgeCoefficients {
        &self.coeffs
    }

    /// Growth metadata `(C, ω)` with `‖U(a,s)‖ ≤ C e^{ω(a−s)}` on the sampled pairs.
    pub fn bound(&self) -> ExpBound {
        self.bound
    }

    pub fn omega(&self) -> f64 {
        self.bound.omega
    }

    /// `U(a_{k+1}, a_k)`.
    pub fn step(&self, k: usize) -> &LinearMap {
        &self.steps[k]
    }

    pub(crate) fn step_flat(&self, k: usize) -> &[f64] {
        &self.steps_flat[k]
    }

    /// `U(a_k, 0)`.
    pub fn from_zero(&self, k: usize) -> &LinearMap {
        &self.from_zero[k]
    }

    /// `U(a_j, a_i)` for node indices `i ≤ j`, by composition.
    pub fn between_nodes(&self, j: usize, i: usize) -> LinearMap {
        assert!(i <= j && j <= self.grid.steps(), "bad node pair ({j}, {i})");
        let mut u = DMatrix::identity(self.dim, self.dim);
        for k in i..j {
            u = &self.steps[k] * u;
        }
        u
    }

    /// `U(a, s)` for `0 ≤ s ≤ a ≤ c`. Grid-aligned pairs use the cached
    /// propagators; partial cells are integrated with RK4 at substep ≤ da/4.
    pub fn eval(&self, a: f64, s: f64) -> Result<LinearMap> {
        let c = self.max_age();
        let tol = 1e-12 * c.max(1.0);
        if !(s >= -tol && s <= a + tol && a <= c + tol) {
            return Err(invalid(format!("U(a, s) needs 0 <= s <= a <= c, got a = {a}, s = {s}")));
        }
        if let (Some(j), Some(i)) = (self.grid.index_of(a), self.grid.index_of(s)) {
            return Ok(self.between_nodes(j, i));
        }
        let da = self.da();
        let first = ((s / da).ceil() as usize).min(self.grid.steps());
        let last = ((a / da).floor() as usize).max(first);
        if self.grid.node(first) >= a {
            return Ok(self.integrate(s, a));
        }
        let head = self.integrate(s, self.grid.node(first));
        let mid = self.between_nodes(last, first);
        let tail = self.integrate(self.grid.node(last), a);
        Ok(tail * mid * head)
    }

    /// Fresh RK4 integration from `s` to `a` (no cache), substep ≤ da/4.
    pub fn integrate(&self, s: f64, a: f64) -> LinearMap {
        let mut u = DMatrix::identity(self.dim, self.dim);
        let len = a - s;
        if len <= 0.0 {
            return u;
        }
        let n = ((len / (self.da() / SUBSTEPS as f64)).ceil() as usize).max(1);
        let h = len / n as f64;
        for j in 0..n {
            u = rk4_step(&self.coeffs, s + h * j as f64, h, &u);
        }
        u
    }

    /// `max ‖U_direct(a,s) − U(a,τ)U(τ,s)‖` over the given triples, where the
    /// left side is integrated afresh and the right side is composed from the
    /// cache.
    pub fn cocycle_residual(&self, triples: &[(f64, f64, f64)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &(a, tau, s) in triples {
            let direct = self.integrate(s, a);
            let composed = self.eval(a, tau)? * self.eval(tau, s)?;
            worst = worst.max(op_norm(&(direct - composed)));
        }
        Ok(worst)
    }

    /// Finite-sample growth bound: `ω = max log‖U(a,s)‖/(a−s)` over sampled
    /// node pairs with `a − s ≥ 0.5`, and `C = max ‖U(a,s)‖e^{−ω(a−s)}`.
    fn estimate_bound(&self) -> ExpBound {
        let n = self.grid.steps();
        let stride = n.div_ceil(OMEGA_SAMPLES).max(1);
        let samples: Vec<usize> = (0..=n).step_by(stride).chain(std::iter::once(n)).collect();
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (ii, &i) in samples.iter().enumerate() {
            let mut u = DMatrix::identity(self.dim, self.dim);
            let mut k = i;
            for &j in &samples[ii + 1..] {
                if j == k {
                    continue;
                }
                while k < j {
                    u = &self.steps[k] * u;
                    k += 1;
                }
                pairs.push((self.grid.node(j) - self.grid.node(i), op_norm(&u)));
            }
        }
        let mut omega = pairs
            .iter()
            .filter(|(gap, nrm)| *gap >= OMEGA_MIN_GAP - 1e-12 && *nrm > 0.0)
            .map(|(gap, nrm)| nrm.ln() / gap)
            .fold(f64::NEG_INFINITY, f64::max);
        if !omega.is_finite() {
            // Horizon shorter than the minimal gap: fall back to per-step rates.
            omega = self
                .steps
                .iter()
                .map(|p| op_norm(p).ln() / self.da())
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let m = pairs
            .iter()
            .map(|(gap, nrm)| nrm * (-omega * gap).exp())
            .fold(1.0, f64::max);
        ExpBound::new(m, omega)
    }
}
