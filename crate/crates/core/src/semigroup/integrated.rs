use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::invalid;
use crate::grid::TimeGrid;
use crate::linalg::{condition_number, op_norm, to_complex, CMat, LinearMap, StateNorm};
use crate::quadrature::{refine_trapezoid, trapezoid_weights};
use crate::semigroup::{EvolutionFamily, ExpBound, SemigroupPath};
use crate::{Error, Result, C64};

/// Relative size of the Laplace tail at which integration stops.
const LAPLACE_TAIL: f64 = 1e-12;

/// Anything that can be evaluated as a once-integrated semigroup.
pub trait IntegratedPath {
    /// Dimension of the ambient space `X`.
    fn ambient_dim(&self) -> usize;
    fn eval(&self, t: f64) -> Result<LinearMap>;
    /// `‖S(t)‖ ≤ M e^{ωt}` with `ω ≥ 0`.
    fn bound(&self) -> ExpBound;
    /// Step used when integrating `S` in time.
    fn step(&self) -> f64;
    fn state_norm(&self) -> StateNorm {
        StateNorm::Euclidean
    }
}

#[derive(Debug, Clone)]
enum Kind {
    /// `S(t_k)` tabulated on a uniform grid.
    Classical {
        grid: TimeGrid,
        table: Vec<LinearMap>,
        bound: ExpBound,
    },
    /// `S_𝒜(t)(y, f) = (0, U₀(t)y + ∫_0^t T₀(s)f ds)` on the age grid.
    AgeModel { family: Arc<EvolutionFamily>, p: f64 },
    /// The zero path on a degenerate space.
    Zero { dim: usize },
}

/// Integrated semigroup `t ↦ S(t)` together with an optional sampled
/// convolution bound `δ(t)`.
#[derive(Debug, Clone)]
pub struct IntegratedSemigroupPath {
    kind: Kind,
    delta: Option<(TimeGrid, Vec<f64>)>,
}

impl IntegratedSemigroupPath {
    /// Tabulates `S(t) = μ∫_0^t T(s)R(μ,A) ds − T(t)R(μ,A) + R(μ,A)` on `grid`
    /// with a cumulative trapezoid.
    pub fn classical(path: &SemigroupPath, r_mu: &LinearMap, mu: f64, grid: TimeGrid) -> Result<Self> {
        check_resolvent(r_mu, path.dim())?;
        let h = grid.dt();
        let t_vals = path.sample_uniform(grid.steps(), h)?;
        let tr: Vec<LinearMap> = t_vals.iter().map(|t| t * r_mu).collect();
        let n = path.dim();
        let mut table = Vec::with_capacity(grid.len());
        let mut q = DMatrix::<f64>::zeros(n, n);
        table.push(DMatrix::zeros(n, n));
        for k in 1..grid.len() {
            q += (&tr[k - 1] + &tr[k]) * (0.5 * h);
            table.push(&q * mu - &tr[k] + r_mu);
        }
        let b = path.bound();
        // ‖S(t)‖ ≤ ∫_0^t M e^{ωs} ds ≤ M max(t, 1/ω)·e^{max(ω,0)t}; use ω⁺ and fit M.
        let omega = b.omega.max(0.0) + 1e-12;
        let m = table
            .iter()
            .enumerate()
            .map(|(k, s)| op_norm(s) * (-omega * grid.node(k)).exp())
            .fold(1.0, f64::max);
        Ok(Self {
            kind: Kind::Classical {
                grid,
                table,
                bound: ExpBound::new(m, omega),
            },
            delta: None,
        })
    }

    /// The integrated semigroup of the age-model operator on the grid of `family`.
    pub fn age_model(family: Arc<EvolutionFamily>, p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(invalid(format!("exponent p must be >= 1, got {p}")));
        }
        Ok(Self {
            kind: Kind::AgeModel { family, p },
            delta: None,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            kind: Kind::Zero { dim },
            delta: None,
        }
    }

    /// Attach a sampled `δ(t)`.
    pub fn with_delta(mut self, grid: TimeGrid, delta: Vec<f64>) -> Result<Self> {
        if delta.len() != grid.len() {
            return Err(invalid("delta samples do not match their grid"));
        }
        self.delta = Some((grid, delta));
        Ok(self)
    }

    pub fn delta(&self) -> Option<(&TimeGrid, &[f64])> {
        self.delta.as_ref().map(|(g, d)| (g, d.as_slice()))
    }

    /// `max(‖S(t)x‖ − δ(t)‖x‖)` over the attached δ grid and the given
    /// probe states; nonpositive when the bound holds.
    pub fn delta_violation(&self, probes: &[DVector<f64>]) -> Result<f64> {
        let (grid, delta) = self
            .delta
            .as_ref()
            .ok_or_else(|| invalid("no delta estimate attached"))?;
        let norm = self.state_norm();
        let mut worst = f64::NEG_INFINITY;
        for (k, d) in delta.iter().enumerate() {
            let s = self.eval(grid.node(k))?;
            for x in probes {
                let sx = &s * x;
                worst = worst.max(norm.norm(sx.as_slice()) - d * norm.norm(x.as_slice()));
            }
        }
        Ok(worst)
    }

    /// Probe of non-degeneracy: `S(t)x = 0` at every sampled `t` forces `x = 0`,
    /// checked as full column rank of the stacked samples.
    pub fn is_nondegenerate(&self, times: &[f64]) -> Result<bool> {
        let n = self.ambient_dim();
        if n == 0 {
            return Ok(true);
        }
        let mut stacked = DMatrix::<f64>::zeros(n * times.len(), n);
        for (i, &t) in times.iter().enumerate() {
            stacked.rows_mut(i * n, n).copy_from(&self.eval(t)?);
        }
        let sv = stacked.singular_values();
        let max = sv.max();
        Ok(max > 0.0 && sv.min() > 1e-10 * max)
    }
}

fn check_resolvent(r: &LinearMap, n: usize) -> Result<()> {
    crate::linalg::check_square(r, "resolvent")?;
    if r.nrows() != n {
        return Err(invalid("resolvent dimension does not match the semigroup"));
    }
    if !condition_number(&to_complex(r)).is_finite() || condition_number(&to_complex(r)) > 1e12 {
        return Err(invalid("resolvent input is singular"));
    }
    Ok(())
}

impl IntegratedPath for IntegratedSemigroupPath {
    fn ambient_dim(&self) -> usize {
        match &self.kind {
            Kind::Classical { table, .. } => table[0].nrows(),
            Kind::AgeModel { family, .. } => family.dim() * (family.grid().len() + 1),
            Kind::Zero { dim } => *dim,
        }
    }

    fn eval(&self, t: f64) -> Result<LinearMap> {
        if !(t >= 0.0) {
            return Err(invalid(format!("integrated semigroup needs t >= 0, got {t}")));
        }
        match &self.kind {
            Kind::Zero { dim } => Ok(DMatrix::zeros(*dim, *dim)),
            Kind::Classical { grid, table, .. } => {
                let k = grid
                    .index_of(t)
                    .ok_or_else(|| invalid(format!("t = {t} is not a node of the tabulation")))?;
                Ok(table[k].clone())
            }
            Kind::AgeModel { family, .. } => age_integrated(family, t),
        }
    }

    fn bound(&self) -> ExpBound {
        match &self.kind {
            Kind::Classical { bound, .. } => *bound,
            Kind::AgeModel { family, .. } => {
                // S(t) is constant once t exceeds the maximal age.
                let b = family.bound();
                let omega = b.omega.max(0.0) + 1e-12;
                ExpBound::new(b.m * (family.max_age() + 1.0), omega)
            }
            Kind::Zero { .. } => ExpBound::new(0.0, 0.0),
        }
    }

    fn step(&self) -> f64 {
        match &self.kind {
            Kind::Classical { grid, .. } => grid.dt(),
            Kind::AgeModel { family, .. } => family.da(),
            Kind::Zero { .. } => 1.0,
        }
    }

    fn state_norm(&self) -> StateNorm {
        match &self.kind {
            Kind::AgeModel { family, p } => StateNorm::AgeAmbient {
                dim: family.dim(),
                p: *p,
                da: family.da(),
            },
            _ => StateNorm::Euclidean,
        }
    }
}

/// Matrix of `S_𝒜(t)` on `X = E × grid profiles`, for `t` a multiple of `da`.
///
/// `U₀(t)y` jumps at `a = t`; that node carries the midpoint value.
fn age_integrated(family: &EvolutionFamily, t: f64) -> Result<LinearMap> {
    let da = family.da();
    let r = t / da;
    let m = r.round();
    if (r - m).abs() > 1e-9 * r.max(1.0) {
        return Err(invalid(format!("t = {t} is not a multiple of the age step {da}")));
    }
    let m = m as usize;
    let n = family.dim();
    let nodes = family.grid().len();
    let dim = n * (nodes + 1);
    let mut s = DMatrix::<f64>::zeros(dim, dim);
    if m == 0 {
        return Ok(s);
    }
    for k in 0..nodes {
        let weight = match k.cmp(&m) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Greater => 0.0,
        };
        if weight > 0.0 {
            s.view_mut((n * (k + 1), 0), (n, n))
                .copy_from(&(family.from_zero(k) * weight));
        }
    }
    // ∫_0^t (T₀(s)f)(a_k) ds = ∫_0^{min(t, a_k)} U(a_k, a_k − s) f(a_k − s) ds
    for j in 0..nodes {
        let mut prop = DMatrix::<f64>::identity(n, n);
        for k in j..nodes {
            if k > j {
                prop = family.step(k - 1) * prop;
            }
            let len = m.min(k);
            let i = k - j;
            if i > len || len == 0 {
                continue;
            }
            let w = trapezoid_weights(len, da)[i];
            s.view_mut((n * (k + 1), n * (j + 1)), (n, n))
                .copy_from(&(&prop * w));
        }
    }
    Ok(s)
}

/// `S(t) = μ∫_0^t T(s)R(μ,A) ds − T(t)R(μ,A) + R(μ,A)` with the integral
/// refined by step halving.
pub fn integrated_from_semigroup(path: &SemigroupPath, r_mu: &LinearMap, mu: f64, t: f64) -> Result<LinearMap> {
    check_resolvent(r_mu, path.dim())?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(DMatrix::zeros(path.dim(), path.dim()));
    }
    let integral = refine_trapezoid(t, |n, h| {
        Ok(path
            .sample_uniform(n, h)?
            .into_iter()
            .map(|v| v * r_mu)
            .collect())
    })?;
    Ok(integral.value * mu - path.eval(t)? * r_mu + r_mu)
}

/// Laplace-transform resolvent together with the truncation point used.
#[derive(Debug, Clone)]
pub struct LaplaceValue {
    pub value: CMat,
    pub truncated_at: f64,
}

/// `R(λ,A) = λ ∫_0^∞ e^{−λs} S(s) ds`, trapezoid at the path's step,
/// truncated once the majorant of the remaining tail falls below `1e−12`
/// of the accumulated value.
pub fn laplace_resolvent<P: IntegratedPath + ?Sized>(s: &P, lambda: C64) -> Result<LaplaceValue> {
    let b = s.bound();
    let dim = s.ambient_dim();
    if dim == 0 || b.m == 0.0 {
        return Ok(LaplaceValue {
            value: CMat::zeros(dim, dim),
            truncated_at: 0.0,
        });
    }
    if !(lambda.re > b.omega) {
        return Err(Error::ResolventDomain {
            lambda,
            omega: b.omega,
        });
    }
    let h = s.step();
    let decay = lambda.re - b.omega;
    let mut acc = CMat::zeros(dim, dim);
    let mut prev = to_complex(&s.eval(0.0)?);
    let mut k = 0usize;
    loop {
        let t0 = h * k as f64;
        let t1 = h * (k + 1) as f64;
        let next = to_complex(&s.eval(t1)?);
        let e0 = (-lambda * t0).exp();
        let e1 = (-lambda * t1).exp();
        acc += (&prev * e0 + &next * e1) * C64::new(0.5 * h, 0.0);
        k += 1;
        // Majorant of |λ|∫_{t1}^∞ ‖S(s)‖e^{−Re λ s} ds with M refreshed from the
        // current sample.
        let m_eff = b.m.max(op_norm_c(&next) * (-b.omega * t1).exp());
        let tail = lambda.norm() * m_eff * (-decay * t1).exp() / decay;
        let scale = (lambda.norm() * crate::linalg::cop_norm(&acc)).max(f64::MIN_POSITIVE);
        if tail < LAPLACE_TAIL * scale || (tail < f64::MIN_POSITIVE) {
            return Ok(LaplaceValue {
                value: acc * lambda,
                truncated_at: t1,
            });
        }
        if k > 50_000_000 {
            return Err(invalid("Laplace integral did not reach its tail tolerance"));
        }
        prev = next;
    }
}

fn op_norm_c(m: &CMat) -> f64 {
    crate::linalg::cop_norm(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_gives_zero_map() {
        let a = DMatrix::from_element(1, 1, -0.5);
        let path = SemigroupPath::from_generator(a.clone()).unwrap();
        let r = DMatrix::from_element(1, 1, 1.0 / (1.0 + 0.5));
        let s = integrated_from_semigroup(&path, &r, 1.0, 0.0).unwrap();
        assert_eq!(s[(0, 0)], 0.0);
    }

    #[test]
    fn scalar_matches_antiderivative() {
        let a = 0.7;
        let path = SemigroupPath::from_generator(DMatrix::from_element(1, 1, a)).unwrap();
        let mu = 2.0;
        let r = DMatrix::from_element(1, 1, 1.0 / (mu - a));
        // oracle: direct quadrature of ∫_0^t e^{as} ds at fine resolution
        let t = 1.3;
        let n = 200_000;
        let h = t / n as f64;
        let samples: Vec<f64> = (0..=n).map(|k| (a * h * k as f64).exp()).collect();
        let oracle = crate::quadrature::trapezoid(&samples, h);
        let s = integrated_from_semigroup(&path, &r, mu, t).unwrap();
        assert!((s[(0, 0)] - oracle).abs() < 1e-8);
        assert!((s[(0, 0)] - ((a * t).exp() - 1.0) / a).abs() < 1e-8);
    }

    #[test]
    fn independent_of_mu() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.2, -0.3]);
        let path = SemigroupPath::from_generator(a.clone()).unwrap();
        let res = |mu: f64| (DMatrix::identity(2, 2) * mu - &a).try_inverse().unwrap();
        let s1 = integrated_from_semigroup(&path, &res(1.0), 1.0, 2.0).unwrap();
        let s2 = integrated_from_semigroup(&path, &res(5.0), 5.0, 2.0).unwrap();
        assert!((s1 - s2).amax() < 1e-7);
    }

    #[test]
    fn singular_resolvent_rejected() {
        let path = SemigroupPath::from_generator(DMatrix::from_element(1, 1, 0.0)).unwrap();
        let r = DMatrix::from_element(1, 1, 0.0);
        assert!(integrated_from_semigroup(&path, &r, 1.0, 1.0).is_err());
    }

    #[test]
    fn laplace_of_scalar_path() {
        let a = -0.4;
        let path = SemigroupPath::from_generator(DMatrix::from_element(1, 1, a)).unwrap();
        let mu = 1.0;
        let r = DMatrix::from_element(1, 1, 1.0 / (mu - a));
        let grid = TimeGrid::new(60.0, 1e-3).unwrap();
        let s = IntegratedSemigroupPath::classical(&path, &r, mu, grid).unwrap();
        let lambda = C64::new(1.5, 0.0);
        let lv = laplace_resolvent(&s, lambda).unwrap();
        let exact = 1.0 / (lambda.re - a);
        assert!((lv.value[(0, 0)].re - exact).abs() < 1e-6, "{}", lv.value[(0, 0)]);
        assert!(lv.truncated_at > 0.0 && lv.truncated_at < 60.0);
    }

    #[test]
    fn laplace_of_degenerate_space() {
        let s = IntegratedSemigroupPath::zero(0);
        let lv = laplace_resolvent(&s, C64::new(1.0, 0.0)).unwrap();
        assert_eq!(lv.value.len(), 0);
    }

    #[test]
    fn laplace_domain_enforced() {
        let path = SemigroupPath::from_generator(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let r = DMatrix::from_element(1, 1, 1.0);
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let s = IntegratedSemigroupPath::classical(&path, &r, 2.0, grid).unwrap();
        assert!(matches!(
            laplace_resolvent(&s, C64::new(0.5, 0.0)),
            Err(Error::ResolventDomain { .. })
        ));
    }
}
