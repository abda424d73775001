use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::invalid;
use crate::linalg::{op_norm, CMat};
use crate::quadrature::{exp_fitted_integral, trapezoid_weights};
use crate::semigroup::{howland_resolvent, ComplexProfile, EvolutionFamily};
use crate::spectral::ResolventOperator;
use crate::{Error, Result, C64};

/// `φ_n(a) = a^{n−1} e^{−λa} U(a,0) y / (n−1)! + (R(λ,𝓑₀)ⁿ f)(a)`, the
/// profile part of `R(λ,A)ⁿ(y, f)`.
pub fn resolvent_power(
    u: &EvolutionFamily,
    lambda: C64,
    n: usize,
    y: &[C64],
    f: &ComplexProfile,
) -> Result<ComplexProfile> {
    if n == 0 {
        return Err(invalid("resolvent power must be at least 1"));
    }
    let dim = u.dim();
    if y.len() != dim {
        return Err(invalid(format!("boundary value has {} components, expected {dim}", y.len())));
    }
    let mut out = f.clone();
    for _ in 0..n {
        out = howland_resolvent(u, lambda, &out)?;
    }
    let fact: f64 = (1..n).map(|k| k as f64).product();
    for k in 0..u.grid().len() {
        let a = u.grid().node(k);
        let scale = (-lambda * a).exp() * a.powi(n as i32 - 1) / fact;
        let m = u.from_zero(k);
        let slot = out.at_mut(k);
        for i in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..dim {
                acc += y[j] * m[(i, j)];
            }
            slot[i] += acc * scale;
        }
    }
    Ok(out)
}

/// Resolvent of the age-model operator `A(y, f) = (−f(0), −f' + A(·)f)` on
/// `X = E × L^p`, with range in `X₀`.
///
/// [`ResolventOperator::norm`] uses the block split
/// `‖R(λ,A)‖ = max(‖y ↦ e^{−λ·}U(·,0)y‖, ‖R(λ,𝓑₀)‖)` with exponentially
/// fitted quadrature, so it stays accurate for `|λ|·da ≫ 1`. The first block
/// is exact for `p = 2` (Gram matrix) and for scalar `E`; the second is
/// bounded by `∫ e^{−Re λ t} sup_a ‖U(a, a−t)‖ dt`.
#[derive(Debug, Clone)]
pub struct AgeResolvent {
    family: Arc<EvolutionFamily>,
    p: f64,
    gram: Vec<DMatrix<f64>>,
    trace_norms: Vec<f64>,
    shift_norms: Vec<f64>,
}

impl AgeResolvent {
    pub fn new(family: Arc<EvolutionFamily>, p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("exponent p must be finite and >= 1, got {p}")));
        }
        let nodes = family.grid().len();
        let gram = (0..nodes)
            .map(|k| family.from_zero(k).transpose() * family.from_zero(k))
            .collect();
        let trace_norms = (0..nodes).map(|k| op_norm(family.from_zero(k))).collect();
        let shift_norms = shift_norms(&family);
        Ok(Self {
            family,
            p,
            gram,
            trace_norms,
            shift_norms,
        })
    }

    pub fn family(&self) -> &Arc<EvolutionFamily> {
        &self.family
    }

    fn check(&self, lambda: C64) -> Result<()> {
        let omega = self.family.omega();
        if !(lambda.re > omega) {
            return Err(Error::ResolventDomain { lambda, omega });
        }
        Ok(())
    }

    /// `‖y ↦ e^{−λ·}U(·,0)y‖_{E → L^p}`.
    pub fn trace_block_norm(&self, lambda: C64) -> f64 {
        let da = self.family.da();
        let n = self.family.dim();
        if self.p == 2.0 {
            let mut g = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let samples: Vec<f64> = self.gram.iter().map(|m| m[(i, j)]).collect();
                    g[(i, j)] = exp_fitted_integral(2.0 * lambda.re, da, &samples);
                }
            }
            let g = (&g + g.transpose()) * 0.5;
            g.symmetric_eigenvalues().max().max(0.0).sqrt()
        } else {
            let samples: Vec<f64> = self.trace_norms.iter().map(|v| v.powf(self.p)).collect();
            exp_fitted_integral(self.p * lambda.re, da, &samples).powf(1.0 / self.p)
        }
    }

    /// Majorant of `‖R(λ,𝓑₀)‖_{L^p → L^p}`.
    pub fn howland_block_bound(&self, lambda: C64) -> f64 {
        exp_fitted_integral(lambda.re, self.family.da(), &self.shift_norms)
    }
}

/// `sup_k ‖U(a_k, a_k − t_i)‖` for every shift `i`, bounded through the
/// Frobenius norm.
fn shift_norms(u: &EvolutionFamily) -> Vec<f64> {
    let n = u.dim();
    let nodes = u.grid().len();
    let mut out = vec![0.0f64; nodes];
    let steps: Vec<Vec<f64>> = (0..nodes - 1).map(|k| u.step(k).as_slice().to_vec()).collect();
    let mut prop = vec![0.0; n * n];
    let mut next = vec![0.0; n * n];
    for j in 0..nodes {
        prop.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            prop[i * n + i] = 1.0;
        }
        for i in 0..nodes - j {
            let fro = prop.iter().map(|v| v * v).sum::<f64>().sqrt();
            let norm = if n == 1 { prop[0].abs() } else { fro };
            out[i] = out[i].max(norm);
            let k = j + i;
            if k + 1 < nodes {
                // column-major product steps[k] · prop
                let s = &steps[k];
                for c in 0..n {
                    for r in 0..n {
                        let mut acc = 0.0;
                        for l in 0..n {
                            acc += s[l * n + r] * prop[c * n + l];
                        }
                        next[c * n + r] = acc;
                    }
                }
                std::mem::swap(&mut prop, &mut next);
            }
        }
    }
    out
}

impl ResolventOperator for AgeResolvent {
    fn x_dim(&self) -> usize {
        self.family.dim() * (self.family.grid().len() + 1)
    }

    fn x0_dim(&self) -> usize {
        self.family.dim() * self.family.grid().len()
    }

    fn resolvent(&self, lambda: C64) -> Result<CMat> {
        self.check(lambda)?;
        let n = self.family.dim();
        let nodes = self.family.grid().len();
        let da = self.family.da();
        let mut r = CMat::zeros(n * nodes, n * (nodes + 1));
        for k in 0..nodes {
            let a = self.family.grid().node(k);
            let e = (-lambda * a).exp();
            r.view_mut((n * k, 0), (n, n))
                .copy_from(&self.family.from_zero(k).map(|v| e * v));
        }
        for j in 0..nodes {
            let mut prop = DMatrix::<f64>::identity(n, n);
            for k in j..nodes {
                if k > j {
                    prop = self.family.step(k - 1) * prop;
                }
                if k == 0 {
                    continue;
                }
                let w = trapezoid_weights(k, da)[j];
                let e = (-lambda * (da * (k - j) as f64)).exp() * w;
                r.view_mut((n * k, n * (j + 1)), (n, n)).copy_from(&prop.map(|v| e * v));
            }
        }
        Ok(r)
    }

    fn part_resolvent(&self, lambda: C64) -> Result<CMat> {
        let n = self.family.dim();
        let full = self.resolvent(lambda)?;
        Ok(full.columns(n, full.ncols() - n).into_owned())
    }

    fn norm(&self, lambda: C64) -> Result<f64> {
        self.check(lambda)?;
        Ok(self.trace_block_norm(lambda).max(self.howland_block_bound(lambda)))
    }
}
