use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::invalid;
use crate::grid::TimeGrid;
use crate::linalg::{check_finite, op_norm, LinearMap};
use crate::quadrature::trapezoid_weights;
use crate::semigroup::{AgeCoefficients, AgeProfile, EvolutionFamily};
use crate::Result;

/// Tail mass below which an infinite age range is cut off.
const TAIL_TOL: f64 = 1e-10;
/// Age range used to measure the growth of `U` before truncating `c = ∞`.
const PROBE_AGE: f64 = 20.0;
const MAX_TRUNCATION: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxAge {
    Finite(f64),
    /// `c = ∞`, computed on `[0, c_num]`. With `None`, `c_num` is chosen so
    /// that the neglected tail of the birth integral is below `1e−10`.
    Infinite { truncate_at: Option<f64> },
}

impl MaxAge {
    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }
}

/// Birth-rate matrices `C(a)`.
#[derive(Clone)]
pub enum BirthRate {
    Constant(LinearMap),
    /// `C(a) = beta` on `[from, to]`, zero elsewhere.
    Window { beta: LinearMap, from: f64, to: f64 },
    /// Piecewise-linear interpolation of a table.
    Table { ages: Vec<f64>, matrices: Vec<LinearMap> },
    Custom(Arc<dyn Fn(f64) -> LinearMap + Send + Sync>),
}

impl fmt::Debug for BirthRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Self::Window { beta, from, to } => f
                .debug_struct("Window")
                .field("beta", beta)
                .field("from", from)
                .field("to", to)
                .finish(),
            Self::Table { ages, .. } => f.debug_struct("Table").field("ages", ages).finish(),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl BirthRate {
    pub fn scalar(beta: f64) -> Self {
        Self::Constant(DMatrix::from_element(1, 1, beta))
    }

    pub fn at(&self, a: f64) -> LinearMap {
        match self {
            Self::Constant(m) => m.clone(),
            Self::Window { beta, from, to } => {
                if a >= *from - 1e-12 && a <= *to + 1e-12 {
                    beta.clone()
                } else {
                    beta * 0.0
                }
            }
            Self::Table { ages, matrices } => {
                // same convention as the coefficient tables
                AgeCoefficients::Table {
                    ages: ages.clone(),
                    matrices: matrices.clone(),
                }
                .at(a)
            }
            Self::Custom(f) => f(a),
        }
    }
}

/// Initial age profile `u₀`.
#[derive(Clone)]
pub enum InitialData {
    Constant(Vec<f64>),
    /// `value` on `[from, to]`, zero elsewhere.
    Window { value: Vec<f64>, from: f64, to: f64 },
    Samples(AgeProfile),
    Custom(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Self::Window { value, from, to } => f
                .debug_struct("Window")
                .field("value", value)
                .field("from", from)
                .field("to", to)
                .finish(),
            Self::Samples(p) => f.debug_struct("Samples").field("nodes", &p.nodes()).finish(),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Sampled birth kernel `C(a_k)` with its dominating profile `γ(a_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryKernel {
    dim: usize,
    da: f64,
    samples: Vec<LinearMap>,
    gamma: Vec<f64>,
}

impl BoundaryKernel {
    /// Samples on an age grid; `γ` defaults to `‖C(a)‖`.
    pub fn new(samples: Vec<LinearMap>, gamma: Option<Vec<f64>>, da: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("birth kernel needs at least one sample"));
        }
        let dim = samples[0].nrows();
        for m in &samples {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(invalid("birth kernel samples must be square of one size"));
            }
            check_finite(m, "birth kernel")?;
        }
        let norms: Vec<f64> = samples.iter().map(op_norm).collect();
        let gamma = gamma.unwrap_or_else(|| norms.clone());
        if gamma.len() != samples.len() {
            return Err(invalid("dominating profile length differs from the kernel"));
        }
        for (k, (g, c)) in gamma.iter().zip(&norms).enumerate() {
            if !(g.is_finite() && *g >= 0.0) {
                return Err(invalid(format!("dominating profile must be finite and >= 0 (node {k})")));
            }
            if *c > g * (1.0 + 1e-12) + 1e-300 {
                return Err(invalid(format!(
                    "|C(a)| = {c} exceeds gamma(a) = {g} at node {k}"
                )));
            }
        }
        Ok(Self {
            dim,
            da,
            samples,
            gamma,
        })
    }

    pub fn sample(rate: &BirthRate, grid: &TimeGrid) -> Result<Self> {
        let samples = grid.nodes().map(|a| rate.at(a)).collect();
        Self::new(samples, None, grid.dt())
    }

    pub fn zero(dim: usize, grid: &TimeGrid) -> Self {
        Self {
            dim,
            da: grid.dt(),
            samples: vec![DMatrix::zeros(dim, dim); grid.len()],
            gamma: vec![0.0; grid.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.samples.len()
    }

    pub fn da(&self) -> f64 {
        self.da
    }

    pub fn at(&self, k: usize) -> &LinearMap {
        &self.samples[k]
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|m| m.iter().all(|v| *v == 0.0))
    }

    /// `‖γ‖_{L^{p'}}` by trapezoid, `p' = p/(p−1)`.
    pub fn gamma_dual_norm(&self, p: f64) -> f64 {
        let w = trapezoid_weights(self.nodes() - 1, self.da);
        if p == 1.0 {
            return self.gamma.iter().fold(0.0, |a: f64, b| a.max(*b));
        }
        let q = p / (p - 1.0);
        self.gamma
            .iter()
            .zip(&w)
            .map(|(g, w)| w * g.powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }

    /// `L` as a map from grid profiles to `E`: `Lφ = Σ w_k C(a_k) φ(a_k)`.
    pub fn boundary_map(&self) -> LinearMap {
        let n = self.dim;
        let nodes = self.nodes();
        let w = trapezoid_weights(nodes - 1, self.da);
        let mut l = DMatrix::zeros(n, n * nodes);
        for k in 0..nodes {
            l.view_mut((0, n * k), (n, n)).copy_from(&(&self.samples[k] * w[k]));
        }
        l
    }

    /// `𝓛` as a map `X₀ → X`, i.e. `φ ↦ (Lφ, 0)`.
    pub fn ambient_map(&self) -> LinearMap {
        let n = self.dim;
        let nodes = self.nodes();
        let mut l = DMatrix::zeros(n * (nodes + 1), n * nodes);
        l.rows_mut(0, n).copy_from(&self.boundary_map());
        l
    }
}

/// Everything needed to pose the age-structured problem.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub max_age: MaxAge,
    pub p: f64,
    pub coefficients: AgeCoefficients,
    pub birth: BirthRate,
    pub initial: InitialData,
    /// Age step; the time step is the same.
    pub da: f64,
    pub t_end: f64,
}

/// A validated model on its grids.
#[derive(Debug, Clone)]
pub struct AgeModelSpec {
    max_age: MaxAge,
    p: f64,
    family: Arc<EvolutionFamily>,
    kernel: BoundaryKernel,
    u0: AgeProfile,
    time: TimeGrid,
    notes: Vec<String>,
}

impl AgeModelSpec {
    pub fn new(inputs: ModelInputs) -> Result<Self> {
        let ModelInputs {
            max_age,
            p,
            coefficients,
            birth,
            initial,
            da,
            t_end,
        } = inputs;
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("exponent p must be finite and >= 1, got {p}")));
        }
        if !(da > 0.0 && da.is_finite()) {
            return Err(invalid(format!("age step must be positive, got {da}")));
        }
        coefficients.validate()?;
        let dim = coefficients.dim();
        let mut notes = Vec::new();
        let c = match max_age {
            MaxAge::Finite(c) => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(invalid(format!("maximal age must be positive and finite, got {c}")));
                }
                c
            }
            MaxAge::Infinite { truncate_at: Some(c) } => {
                notes.push(format!("infinite maximal age truncated at c = {c} (given)"));
                c
            }
            MaxAge::Infinite { truncate_at: None } => {
                let c = auto_truncation(&coefficients, &birth, da)?;
                notes.push(format!("infinite maximal age truncated at c = {c} (tail < {TAIL_TOL:e})"));
                c
            }
        };
        let family = Arc::new(EvolutionFamily::new(coefficients, c, da)?);
        let age = *family.grid();
        let kernel = BoundaryKernel::sample(&birth, &age)?;
        if kernel.dim() != dim {
            return Err(invalid("birth kernel and coefficients differ in dimension"));
        }
        if !kernel.gamma_dual_norm(p).is_finite() {
            return Err(invalid("dominating profile is not in the dual Lebesgue space"));
        }
        let u0 = sample_initial(&initial, &age, dim)?;
        let time = TimeGrid::new(t_end, da)?;
        Ok(Self {
            max_age,
            p,
            family,
            kernel,
            u0,
            time,
            notes,
        })
    }

    /// Assemble from already sampled parts. The kernel and `u0` must live on
    /// the family's age grid.
    pub fn from_parts(
        max_age: MaxAge,
        p: f64,
        family: Arc<EvolutionFamily>,
        kernel: BoundaryKernel,
        u0: AgeProfile,
        t_end: f64,
    ) -> Result<Self> {
        let nodes = family.grid().len();
        if kernel.nodes() != nodes || u0.nodes() != nodes {
            return Err(invalid("kernel and initial profile must be sampled on the age grid"));
        }
        if kernel.dim() != family.dim() || u0.dim() != family.dim() {
            return Err(invalid("dimension mismatch between family, kernel and initial profile"));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("exponent p must be finite and >= 1, got {p}")));
        }
        let time = TimeGrid::new(t_end, family.da())?;
        Ok(Self {
            max_age,
            p,
            family,
            kernel,
            u0,
            time,
            notes: Vec::new(),
        })
    }

    pub fn max_age(&self) -> MaxAge {
        self.max_age
    }

    /// Numeric maximal age (the truncation point when `c = ∞`).
    pub fn c(&self) -> f64 {
        self.family.max_age()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn da(&self) -> f64 {
        self.family.da()
    }

    pub fn family(&self) -> &Arc<EvolutionFamily> {
        &self.family
    }

    pub fn kernel(&self) -> &BoundaryKernel {
        &self.kernel
    }

    pub fn u0(&self) -> &AgeProfile {
        &self.u0
    }

    pub fn age_grid(&self) -> &TimeGrid {
        self.family.grid()
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn with_u0(&self, u0: AgeProfile) -> Result<Self> {
        Self::from_parts(self.max_age, self.p, self.family.clone(), self.kernel.clone(), u0, self.time.t_end())
    }

    pub fn with_kernel(&self, kernel: BoundaryKernel) -> Result<Self> {
        Self::from_parts(self.max_age, self.p, self.family.clone(), kernel, self.u0.clone(), self.time.t_end())
    }
}

fn sample_initial(initial: &InitialData, grid: &TimeGrid, dim: usize) -> Result<AgeProfile> {
    let check = |v: Vec<f64>| -> Result<Vec<f64>> {
        if v.len() != dim {
            return Err(invalid(format!("initial value has {} components, expected {dim}", v.len())));
        }
        Ok(v)
    };
    let profile = match initial {
        InitialData::Constant(v) => AgeProfile::constant(&check(v.clone())?, grid.len()),
        InitialData::Window { value, from, to } => {
            let v = check(value.clone())?;
            let zero = vec![0.0; dim];
            AgeProfile::from_fn(dim, grid.len(), |k| {
                let a = grid.node(k);
                if a >= *from - 1e-12 && a <= *to + 1e-12 {
                    v.clone()
                } else {
                    zero.clone()
                }
            })?
        }
        InitialData::Samples(p) => {
            if p.nodes() != grid.len() || p.dim() != dim {
                return Err(invalid(format!(
                    "initial samples must have {} nodes of dimension {dim}",
                    grid.len()
                )));
            }
            p.clone()
        }
        InitialData::Custom(f) => {
            let mut vals = Vec::with_capacity(grid.len() * dim);
            for a in grid.nodes() {
                vals.extend(check(f(a))?);
            }
            AgeProfile::from_flat(dim, vals)?
        }
    };
    if !profile.is_finite() {
        return Err(invalid("initial profile must be finite"));
    }
    Ok(profile)
}

/// Smallest multiple of `da` beyond which `C e^{ωa} sup|C|` stays below the
/// tail tolerance.
fn auto_truncation(coeffs: &AgeCoefficients, birth: &BirthRate, da: f64) -> Result<f64> {
    let probe_c = (PROBE_AGE / da).ceil() * da;
    let fam = EvolutionFamily::new(coeffs.clone(), probe_c, da)?;
    let b = fam.bound();
    if b.omega >= 0.0 {
        return Err(invalid(format!(
            "cannot truncate an infinite age range: the evolution family grows at rate {}",
            b.omega
        )));
    }
    let gamma_max = fam
        .grid()
        .nodes()
        .map(|a| op_norm(&birth.at(a)))
        .fold(0.0, f64::max)
        .max(1e-300);
    let c = ((TAIL_TOL / (b.m * gamma_max)).ln() / b.omega).max(da);
    if c > MAX_TRUNCATION {
        return Err(invalid(format!("truncation age {c} is too large")));
    }
    Ok((c / da).ceil() * da)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> ModelInputs {
        ModelInputs {
            max_age: MaxAge::Finite(4.0),
            p: 1.0,
            coefficients: AgeCoefficients::scalar_mortality(0.2, 1),
            birth: BirthRate::scalar(0.5),
            initial: InitialData::Constant(vec![1.0]),
            da: 0.05,
            t_end: 2.0,
        }
    }

    #[test]
    fn builds_grids() {
        let s = AgeModelSpec::new(inputs()).unwrap();
        assert_eq!(s.age_grid().len(), 81);
        assert_eq!(s.time_grid().len(), 41);
        assert_eq!(s.u0().at(80), &[1.0]);
    }

    #[test]
    fn rejects_bad_exponent() {
        let mut i = inputs();
        i.p = 0.5;
        assert!(AgeModelSpec::new(i).is_err());
    }

    #[test]
    fn kernel_must_be_dominated() {
        let samples = vec![DMatrix::from_element(1, 1, 2.0); 3];
        assert!(BoundaryKernel::new(samples, Some(vec![1.0; 3]), 0.5).is_err());
    }

    #[test]
    fn infinite_age_is_truncated() {
        let mut i = inputs();
        i.max_age = MaxAge::Infinite { truncate_at: None };
        i.coefficients = AgeCoefficients::scalar_mortality(1.0, 1);
        let s = AgeModelSpec::new(i).unwrap();
        // e^{-c}·0.5 < 1e-10
        assert!(s.c() >= (0.5e10f64).ln() - 1e-9 && s.c() < 23.0, "{}", s.c());
        assert!(!s.notes().is_empty());
    }

    #[test]
    fn boundary_map_is_trapezoid() {
        let grid = TimeGrid::new(1.0, 0.25).unwrap();
        let k = BoundaryKernel::sample(&BirthRate::scalar(2.0), &grid).unwrap();
        let l = k.boundary_map();
        let ones = nalgebra::DVector::from_element(5, 1.0);
        assert!(((l * ones)[0] - 2.0).abs() < 1e-15);
    }
}
