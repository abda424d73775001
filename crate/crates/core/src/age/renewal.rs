use nalgebra::{DMatrix, DVector};

use crate::age::AgeModelSpec;
use crate::grid::TimeGrid;
use crate::linalg::matvec_into;
use crate::quadrature::trapezoid_weights;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Characteristics with a trapezoid Volterra solve for the births.
    Renewal,
    /// First-order upwind differences.
    Upwind,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Renewal => "renewal",
            Self::Upwind => "upwind",
        }
    }
}

/// Births `b(t_m) = u(t_m, 0)` on the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthPath {
    dim: usize,
    values: Vec<f64>,
}

impl BirthPath {
    pub fn at(&self, m: usize) -> &[f64] {
        &self.values[m * self.dim..(m + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Solution of the age-structured problem on the (time × age) grid.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub method: SolverKind,
    pub time: TimeGrid,
    pub age: TimeGrid,
    pub dim: usize,
    pub p: f64,
    field: Vec<f64>,
    pub births: BirthPath,
    /// `‖u(t_m, ·)‖_{L^p}`.
    pub norms: Vec<f64>,
}

impl SimulationResult {
    /// `u(t_m, ·)` flattened node-major.
    pub fn profile(&self, m: usize) -> &[f64] {
        let stride = self.dim * self.age.len();
        &self.field[m * stride..(m + 1) * stride]
    }

    /// `u(t_m, a_k)`.
    pub fn value(&self, m: usize, k: usize) -> &[f64] {
        let p = self.profile(m);
        &p[k * self.dim..(k + 1) * self.dim]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.field.iter().all(|v| *v >= 0.0)
    }
}

/// Accumulates a simulation one time level at a time.
pub(crate) struct BirthPathBuilder {
    dim: usize,
    p: f64,
    w: Vec<f64>,
    field: Vec<f64>,
    births: Vec<f64>,
    norms: Vec<f64>,
}

impl BirthPathBuilder {
    pub(crate) fn new(dim: usize, nodes: usize, levels: usize, p: f64, da: f64) -> Self {
        Self {
            dim,
            p,
            w: trapezoid_weights(nodes - 1, da),
            field: Vec::with_capacity(dim * nodes * levels),
            births: Vec::with_capacity(dim * levels),
            norms: Vec::with_capacity(levels),
        }
    }

    pub(crate) fn push(&mut self, profile: &[DVector<f64>], birth: &DVector<f64>) {
        let start = self.field.len();
        for v in profile {
            self.field.extend_from_slice(v.as_slice());
        }
        self.births.extend_from_slice(birth.as_slice());
        let norm = split_norm(&self.field[start..], self.dim, &self.w, self.p, None);
        self.norms.push(norm);
    }

    pub(crate) fn finish(self, method: SolverKind, time: TimeGrid, age: TimeGrid) -> SimulationResult {
        SimulationResult {
            method,
            time,
            age,
            dim: self.dim,
            p: self.p,
            field: self.field,
            births: BirthPath {
                dim: self.dim,
                values: self.births,
            },
            norms: self.norms,
        }
    }
}

/// `u(t,·)` by transport along characteristics, with the births solved from
/// the trapezoid-discretized renewal equation
/// `b(t) = ∫_0^c C(a) u(t,a) da`, implicit in `b(t)` itself.
///
/// On the line `a = t` the field jumps from `U(a,0)b(0)` (below) to
/// `U(a,0)u₀(0)` (above). The stored field carries the upper value; the
/// quadrature uses each one-sided limit on its own cell.
pub fn solve_renewal(spec: &AgeModelSpec) -> Result<SimulationResult> {
    let fam = spec.family();
    let kernel = spec.kernel();
    let n = spec.dim();
    let nodes = spec.age_grid().len();
    let last = nodes - 1;
    let da = spec.da();
    let time = *spec.time_grid();
    let steps = time.steps();
    let stride = n * nodes;
    let w = trapezoid_weights(last, da);
    let birth_solver = BirthSolver::new(kernel.at(0), da)?;

    let mut field = vec![0.0; stride * (steps + 1)];
    field[..stride].copy_from_slice(spec.u0().as_flat());
    let mut births = vec![0.0; n * (steps + 1)];
    let mut norms = Vec::with_capacity(steps + 1);

    // at t = 0 node 0 holds u₀(0), so the sum is explicit
    let mut b0 = weighted_sum(kernel, &w, &field[..stride], n, None);
    let head = kernel.at(0) * DVector::from_column_slice(&field[..n]) * w[0];
    b0.iter_mut().zip(head.iter()).for_each(|(b, h)| *b += h);
    births[..n].copy_from_slice(&b0);
    norms.push(split_norm(&field[..stride], n, &w, spec.p(), None));

    // left limit of the field on the line a = t
    let mut corner = b0;
    let mut tmp = vec![0.0; n];
    for m in 1..=steps {
        let (prev, cur) = field[(m - 1) * stride..(m + 1) * stride].split_at_mut(stride);
        for k in 1..nodes {
            matvec_into(fam.step_flat(k - 1), &prev[(k - 1) * n..k * n], &mut cur[k * n..(k + 1) * n]);
        }
        let split = if m <= last {
            matvec_into(fam.step_flat(m - 1), &corner, &mut tmp);
            corner.copy_from_slice(&tmp);
            Some((m, corner.as_slice()))
        } else {
            None
        };
        let rest = weighted_sum(kernel, &w, cur, n, split);
        let b = birth_solver.solve(&rest, time.node(m))?;
        cur[..n].copy_from_slice(&b);
        births[m * n..(m + 1) * n].copy_from_slice(&b);
        norms.push(split_norm(cur, n, &w, spec.p(), split));
    }
    Ok(SimulationResult {
        method: SolverKind::Renewal,
        time,
        age: *spec.age_grid(),
        dim: n,
        p: spec.p(),
        field,
        births: BirthPath { dim: n, values: births },
        norms,
    })
}

/// `Σ_{k≥1} w_k C(a_k) u_k`, splitting the node `k` of `split` into its
/// left value (given) and right value (from `u`). Node 0 is excluded: it is
/// the implicit unknown.
fn weighted_sum(
    kernel: &crate::age::BoundaryKernel,
    w: &[f64],
    u: &[f64],
    n: usize,
    split: Option<(usize, &[f64])>,
) -> Vec<f64> {
    let nodes = w.len();
    let mut acc = DVector::<f64>::zeros(n);
    for k in 1..nodes {
        let c = kernel.at(k);
        let right = DVector::from_column_slice(&u[k * n..(k + 1) * n]);
        match split {
            Some((j, left)) if j == k => {
                let left = DVector::from_column_slice(left);
                // left cell always present for k ≥ 1; right cell only inside
                acc += c * left * (0.5 * kernel.da());
                if k < nodes - 1 {
                    acc += c * right * (0.5 * kernel.da());
                }
            }
            _ => acc += c * right * w[k],
        }
    }
    acc.as_slice().to_vec()
}

pub(crate) fn split_norm(u: &[f64], n: usize, w: &[f64], p: f64, split: Option<(usize, &[f64])>) -> f64 {
    let nodes = w.len();
    let da = if nodes > 1 { w[1] } else { 0.0 };
    let pow = |v: &[f64]| crate::linalg::euclid(v).powf(p);
    let mut acc = 0.0;
    for k in 0..nodes {
        let right = &u[k * n..(k + 1) * n];
        match split {
            Some((j, left)) if j == k && k > 0 => {
                acc += 0.5 * da * pow(left);
                if k < nodes - 1 {
                    acc += 0.5 * da * pow(right);
                }
            }
            _ => acc += w[k] * pow(right),
        }
    }
    acc.powf(1.0 / p)
}

/// Solves `(I − w₀C(0)) b = rest`.
pub(crate) struct BirthSolver {
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    singular: bool,
}

impl BirthSolver {
    pub(crate) fn new(c0: &DMatrix<f64>, da: f64) -> Result<Self> {
        let n = c0.nrows();
        let m = DMatrix::<f64>::identity(n, n) - c0 * (0.5 * da);
        let cond = crate::linalg::condition_number(&crate::linalg::to_complex(&m));
        let singular = !cond.is_finite() || cond > 1e12;
        Ok(Self {
            lu: if singular { None } else { Some(m.lu()) },
            singular,
        })
    }

    pub(crate) fn solve(&self, rest: &[f64], t: f64) -> Result<Vec<f64>> {
        let fail = || Error::StepFailure {
            t,
            reason: "I - (da/2) C(0) is singular".into(),
        };
        if self.singular {
            return Err(fail());
        }
        let lu = self.lu.as_ref().ok_or_else(fail)?;
        let b = lu.solve(&DVector::from_column_slice(rest)).ok_or_else(fail)?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err(fail());
        }
        Ok(b.as_slice().to_vec())
    }
}

/// `max |u_a(t_m, a_k) − u_b(t_m, a_k)|` over age nodes at least `band`
/// away from every age in `exclude`.
pub fn field_gap(a: &SimulationResult, b: &SimulationResult, m: usize, exclude: &[f64], band: f64) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..a.age.len() {
        let age = a.age.node(k);
        if exclude.iter().any(|e| (age - e).abs() < band) {
            continue;
        }
        let d: Vec<f64> = a.value(m, k).iter().zip(b.value(m, k)).map(|(x, y)| x - y).collect();
        worst = worst.max(d.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())));
    }
    worst
}

/// Ages at time `t_m` of the characteristics that carry a discontinuity:
/// jumps of `u₀` and the corner line `a = t` when `u₀(0) ≠ b(0)`.
pub fn discontinuity_ages(spec: &AgeModelSpec, births0: &[f64], t: f64) -> Vec<f64> {
    let u0 = spec.u0();
    let scale = u0.as_flat().iter().fold(0.0, |a: f64, v| a.max(v.abs())).max(1e-300);
    let mut out = Vec::new();
    let grid = spec.age_grid();
    for k in 0..u0.nodes() - 1 {
        let jump = u0
            .at(k)
            .iter()
            .zip(u0.at(k + 1))
            .fold(0.0, |acc: f64, (x, y)| acc.max((x - y).abs()));
        if jump > 0.05 * scale {
            out.push(0.5 * (grid.node(k) + grid.node(k + 1)) + t);
        }
    }
    let corner = u0
        .at(0)
        .iter()
        .zip(births0)
        .fold(0.0, |acc: f64, (x, y)| acc.max((x - y).abs()));
    if corner > 1e-12 * scale.max(1.0) {
        out.push(t);
    }
    out
}
