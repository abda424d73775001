use std::sync::Arc;

use nalgebra::DMatrix;

use crate::dyson::DeltaEstimate;
use crate::error::invalid;
use crate::grid::TimeGrid;
use crate::linalg::{op_norm, LinearMap, StateNorm};
use crate::quadrature::trapezoid_weights;
use crate::semigroup::{EvolutionFamily, SemigroupPath};
use crate::Result;

/// Matrices sampled on every node of a time grid. Vectors are single-column
/// matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePath {
    grid: TimeGrid,
    values: Vec<DMatrix<f64>>,
}

impl TimePath {
    pub fn new(grid: TimeGrid, values: Vec<DMatrix<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "path has {} samples but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let shape = values[0].shape();
        if values.iter().any(|v| v.shape() != shape) {
            return Err(invalid("path samples have inconsistent shapes"));
        }
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(invalid("path samples must be finite"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid, rows: usize, cols: usize) -> Self {
        let values = vec![DMatrix::zeros(rows, cols); grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> DMatrix<f64>) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<DMatrix<f64>> {
        self.values
    }

    pub fn at(&self, k: usize) -> &DMatrix<f64> {
        &self.values[k]
    }

    pub fn rows(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.values[0].ncols()
    }

    /// `t ↦ m·f(t)`.
    pub fn left_mul(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.rows() {
            return Err(invalid(format!(
                "cannot apply a {}x{} map to a path of {} rows",
                m.nrows(),
                m.ncols(),
                self.rows()
            )));
        }
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().map(|v| m * v).collect(),
        })
    }

    /// The first `m` steps.
    pub fn truncated(&self, m: usize) -> Self {
        Self {
            grid: self.grid.truncated(m),
            values: self.values[..=m].to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum KernelForm {
    /// `X₀ = X = E` and `(S_A ⋄ f)(t) = ∫_0^t T(t−s) f(s) ds`.
    Classical(SemigroupPath),
    /// `X = E × L^p`, `X₀ = {0} × L^p`, with `T_{A₀}` the Howland semigroup
    /// of `family`.
    Age { family: Arc<EvolutionFamily>, p: f64 },
}

/// Computes `(S_A ⋄ f)(t)` for one of the two supported operator structures.
///
/// State coordinates: classical vectors live in `E`. In the age form an
/// element of `X` is `[y; f(a_0); …; f(a_N)]` and an element of `X₀` is the
/// profile part alone.
#[derive(Debug, Clone)]
pub struct DiamondKernel {
    form: KernelForm,
    delta: Option<DeltaEstimate>,
}

impl DiamondKernel {
    pub fn classical(path: SemigroupPath) -> Self {
        Self {
            form: KernelForm::Classical(path),
            delta: None,
        }
    }

    pub fn classical_generator(a: LinearMap) -> Result<Self> {
        Ok(Self::classical(SemigroupPath::from_generator(a)?))
    }

    pub fn age_model(family: Arc<EvolutionFamily>, p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("exponent p must be finite and >= 1, got {p}")));
        }
        Ok(Self {
            form: KernelForm::Age { family, p },
            delta: None,
        })
    }

    pub fn with_delta(mut self, delta: DeltaEstimate) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn delta(&self) -> Option<&DeltaEstimate> {
        self.delta.as_ref()
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    pub fn x_dim(&self) -> usize {
        match &self.form {
            KernelForm::Classical(path) => path.dim(),
            KernelForm::Age { family, .. } => family.dim() * (family.grid().len() + 1),
        }
    }

    pub fn x0_dim(&self) -> usize {
        match &self.form {
            KernelForm::Classical(path) => path.dim(),
            KernelForm::Age { family, .. } => family.dim() * family.grid().len(),
        }
    }

    pub fn x_norm(&self) -> StateNorm {
        match &self.form {
            KernelForm::Classical(_) => StateNorm::Euclidean,
            KernelForm::Age { family, p } => StateNorm::AgeAmbient {
                dim: family.dim(),
                p: *p,
                da: family.da(),
            },
        }
    }

    pub fn x0_norm(&self) -> StateNorm {
        match &self.form {
            KernelForm::Classical(_) => StateNorm::Euclidean,
            KernelForm::Age { family, p } => StateNorm::AgeProfile {
                dim: family.dim(),
                p: *p,
                da: family.da(),
            },
        }
    }

    /// Growth exponent of `T_{A₀}` from the kernel metadata.
    pub fn omega(&self) -> f64 {
        match &self.form {
            KernelForm::Classical(path) => path.bound().omega,
            KernelForm::Age { family, .. } => family.omega(),
        }
    }

    pub(crate) fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if let KernelForm::Age { family, .. } = &self.form {
            let da = family.da();
            if (grid.dt() - da).abs() > 1e-12 * da {
                return Err(invalid(format!(
                    "time step {} must equal the age step {da}",
                    grid.dt()
                )));
            }
        }
        Ok(())
    }

    /// `T_{A₀}(t_k)` on every node of `grid`.
    pub fn base_path(&self, grid: &TimeGrid) -> Result<TimePath> {
        self.check_grid(grid)?;
        let values = match &self.form {
            KernelForm::Classical(path) => path.sample_uniform(grid.steps(), grid.dt())?,
            KernelForm::Age { family, .. } => {
                let mut cur = DMatrix::identity(self.x0_dim(), self.x0_dim());
                let mut out = Vec::with_capacity(grid.len());
                out.push(cur.clone());
                for _ in 0..grid.steps() {
                    cur = howland_step_matrix(family, &cur);
                    out.push(cur.clone());
                }
                out
            }
        };
        TimePath::new(*grid, values)
    }

    /// Upper bound for the operator norm of `m`, read as a map from `X₀`
    /// into `X₀` or `X` depending on its row count.
    pub fn map_norm(&self, m: &DMatrix<f64>) -> f64 {
        match &self.form {
            KernelForm::Classical(_) => op_norm(m),
            KernelForm::Age { family, p } => {
                let n = family.dim();
                let w = trapezoid_weights(family.grid().steps(), family.da());
                if m.nrows() == self.x_dim() {
                    functional_bound(&m.rows(0, n).into_owned(), n, &w, *p)
                        + schur_bound(&m.rows(n, m.nrows() - n).into_owned(), n, &w, *p)
                } else {
                    schur_bound(m, n, &w, *p)
                }
            }
        }
    }
}

/// Bound on `‖Σ_j B_j x_j‖` over `‖x‖_{L^p} ≤ 1` by Hölder's inequality.
pub(crate) fn functional_bound(m: &DMatrix<f64>, n: usize, w: &[f64], p: f64) -> f64 {
    let blocks: Vec<f64> = (0..w.len())
        .map(|j| op_norm(&m.columns(n * j, n).into_owned()) / w[j])
        .collect();
    if p == 1.0 {
        return blocks.iter().fold(0.0, |a: f64, b| a.max(*b));
    }
    let q = p / (p - 1.0);
    blocks
        .iter()
        .zip(w)
        .map(|(b, wj)| wj * b.powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// Schur test bound for a profile-to-profile map in the weighted `ℓ^p` norm.
fn schur_bound(m: &DMatrix<f64>, n: usize, w: &[f64], p: f64) -> f64 {
    let nodes = w.len();
    let mut col_sums = vec![0.0; nodes];
    let mut row_sums = vec![0.0; nodes];
    for i in 0..nodes {
        for j in 0..nodes {
            let block = m.view((n * i, n * j), (n, n));
            if block.iter().all(|x| *x == 0.0) {
                continue;
            }
            let b = op_norm(&block.into_owned());
            col_sums[j] += w[i] * b / w[j];
            row_sums[i] += b;
        }
    }
    let one = col_sums.iter().fold(0.0, |a: f64, b| a.max(*b));
    let inf = row_sums.iter().fold(0.0, |a: f64, b| a.max(*b));
    one.powf(1.0 / p) * inf.powf(1.0 - 1.0 / p)
}

/// One grid step of the Howland semigroup applied to every column of `m`.
pub fn howland_step_matrix(u: &EvolutionFamily, m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.dim();
    let nodes = m.nrows() / n;
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for k in 0..nodes - 1 {
        let src = m.rows(n * k, n);
        out.rows_mut(n * (k + 1), n).copy_from(&(u.step(k) * src));
    }
    out
}

/// `(S_A ⋄ f)(t_k)` on every node of `f`'s grid.
///
/// The classical form uses the trapezoid recursion
/// `g_{k+1} = T(h) g_k + h/2 (T(h) f_k + f_{k+1})`; the age form applies the
/// same recursion to the profile part along characteristics and adds
/// `U(a,0) f₁(t−a)` for `a ≤ t`.
pub fn diamond(kernel: &DiamondKernel, f: &TimePath) -> Result<TimePath> {
    if f.rows() != kernel.x_dim() {
        return Err(invalid(format!(
            "input path has {} rows, the ambient space has dimension {}",
            f.rows(),
            kernel.x_dim()
        )));
    }
    kernel.check_grid(f.grid())?;
    let h = f.grid().dt();
    let len = f.grid().len();
    let cols = f.cols();
    let mut out = Vec::with_capacity(len);
    match kernel.form() {
        KernelForm::Classical(path) => {
            let th = path.eval(h)?;
            let mut g = DMatrix::zeros(kernel.x0_dim(), cols);
            out.push(g.clone());
            for k in 0..len - 1 {
                g = &th * (g + f.at(k) * (0.5 * h)) + f.at(k + 1) * (0.5 * h);
                out.push(g.clone());
            }
        }
        KernelForm::Age { family, .. } => {
            let n = family.dim();
            let nodes = family.grid().len();
            let x0 = n * nodes;
            let profile = |k: usize| f.at(k).rows(n, x0);
            let mut g = DMatrix::zeros(x0, cols);
            out.push(boundary_term(family, f, 0, g.clone()));
            for m in 1..len {
                let carried = g + profile(m - 1) * (0.5 * h);
                g = howland_step_matrix(family, &carried) + profile(m) * (0.5 * h);
                g.rows_mut(0, n).fill(0.0);
                out.push(boundary_term(family, f, m, g.clone()));
            }
        }
    }
    TimePath::new(*f.grid(), out)
}

/// Adds `U(a_k,0) f₁(t_m − a_k)` for every node with `a_k < t_m`.
///
/// The profile jumps at `a = t_m`; that node gets half the boundary value,
/// so trapezoid quadrature over the profile sees the mean of both one-sided
/// limits. At `t = 0` the support is empty.
fn boundary_term(u: &EvolutionFamily, f: &TimePath, m: usize, mut g: DMatrix<f64>) -> DMatrix<f64> {
    let n = u.dim();
    let nodes = u.grid().len();
    if m == 0 {
        return g;
    }
    for k in 0..=m.min(nodes - 1) {
        let y = f.at(m - k).rows(0, n);
        let weight = if k == m { 0.5 } else { 1.0 };
        let add = u.from_zero(k) * y * weight;
        let mut block = g.rows_mut(n * k, n);
        block += add;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::{build_evolution_family, AgeCoefficients};

    #[test]
    fn classical_constant_input_integrates() {
        let k = DiamondKernel::classical_generator(DMatrix::zeros(1, 1)).unwrap();
        let grid = TimeGrid::new(2.0, 0.01).unwrap();
        let f = TimePath::from_fn(grid, |_| DMatrix::from_element(1, 1, 1.0)).unwrap();
        let out = diamond(&k, &f).unwrap();
        for (j, t) in grid.nodes().enumerate() {
            assert!((out.at(j)[(0, 0)] - t).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let k = DiamondKernel::classical_generator(DMatrix::from_element(2, 2, -0.3)).unwrap();
        let grid = TimeGrid::new(1.0, 0.1).unwrap();
        let out = diamond(&k, &TimePath::zeros(grid, 2, 3)).unwrap();
        assert!(out.values().iter().all(|v| v.amax() == 0.0));
    }

    #[test]
    fn age_boundary_input_follows_characteristics() {
        let mu = 0.4;
        let da = 0.05;
        let u = Arc::new(build_evolution_family(&AgeCoefficients::scalar_mortality(mu, 1), 2.0, da).unwrap());
        let k = DiamondKernel::age_model(u, 2.0).unwrap();
        let grid = TimeGrid::new(1.0, da).unwrap();
        let f = TimePath::from_fn(grid, |_| {
            let mut v = DMatrix::zeros(k.x_dim(), 1);
            v[(0, 0)] = 1.0;
            v
        })
        .unwrap();
        let out = diamond(&k, &f).unwrap();
        let last = out.at(grid.steps());
        for j in 0..41 {
            let a = j as f64 * da;
            let expect = match j.cmp(&grid.steps()) {
                std::cmp::Ordering::Less => (-mu * a).exp(),
                std::cmp::Ordering::Equal => 0.5 * (-mu * a).exp(),
                std::cmp::Ordering::Greater => 0.0,
            };
            assert!((last[(j, 0)] - expect).abs() < 1e-10, "a = {a}");
        }
    }

    #[test]
    fn age_grid_mismatch_rejected() {
        let u = Arc::new(build_evolution_family(&AgeCoefficients::scalar_mortality(1.0, 1), 1.0, 0.1).unwrap());
        let k = DiamondKernel::age_model(u, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 0.05).unwrap();
        assert!(diamond(&k, &TimePath::zeros(grid, k.x_dim(), 1)).is_err());
    }
}
