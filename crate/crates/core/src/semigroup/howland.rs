use crate::error::invalid;
use crate::linalg::matvec_into;
use crate::semigroup::{AgeProfile, ComplexProfile, EvolutionFamily};
use crate::{Error, Result, C64};

/// Result of [`howland_apply`]. `exact` is false when `t` was not a
/// multiple of the age step and the profile was linearly interpolated.
#[derive(Debug, Clone)]
pub struct Transported {
    pub profile: AgeProfile,
    pub exact: bool,
}

fn check_profile(u: &EvolutionFamily, dim: usize, nodes: usize) -> Result<()> {
    if dim != u.dim() || nodes != u.grid().len() {
        return Err(invalid(format!(
            "profile has {nodes} nodes of dimension {dim}, family expects {} of dimension {}",
            u.grid().len(),
            u.dim()
        )));
    }
    Ok(())
}

/// One aligned step of the Howland semigroup: `(T₀(da)φ)(a_{k+1}) =
/// U(a_{k+1}, a_k)φ(a_k)`, zero at `a_0`.
pub fn howland_step(u: &EvolutionFamily, phi: &AgeProfile) -> AgeProfile {
    let n = phi.dim();
    let nodes = phi.nodes();
    let mut out = AgeProfile::zeros(n, nodes);
    for k in 0..nodes - 1 {
        matvec_into(u.step_flat(k), phi.at(k), out.at_mut(k + 1));
    }
    out
}

/// `(T₀(t)φ)(a) = U(a, a−t)φ(a−t)` for `a ≥ t`, zero below.
pub fn howland_apply(u: &EvolutionFamily, phi: &AgeProfile, t: f64) -> Result<Transported> {
    check_profile(u, phi.dim(), phi.nodes())?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("Howland time must be >= 0, got {t}")));
    }
    let grid = u.grid();
    let nodes = grid.len();
    if t > grid.t_end() * (1.0 + 1e-12) {
        return Ok(Transported {
            profile: AgeProfile::zeros(phi.dim(), nodes),
            exact: true,
        });
    }
    if let Some(m) = grid.index_of(t) {
        let mut cur = phi.clone();
        for _ in 0..m {
            cur = howland_step(u, &cur);
        }
        return Ok(Transported {
            profile: cur,
            exact: true,
        });
    }
    // Off-grid shift: interpolate φ at a − t and propagate with U(a, a − t).
    let da = u.da();
    let mut out = AgeProfile::zeros(phi.dim(), nodes);
    for k in 0..nodes {
        let a = grid.node(k);
        if a < t {
            continue;
        }
        let s = a - t;
        let r = s / da;
        let i = (r.floor() as usize).min(nodes - 2);
        let theta = r - i as f64;
        let val: Vec<f64> = phi
            .at(i)
            .iter()
            .zip(phi.at(i + 1))
            .map(|(x, y)| x * (1.0 - theta) + y * theta)
            .collect();
        let prop = u.eval(a, s)?;
        let v = prop * nalgebra::DVector::from_vec(val);
        out.at_mut(k).copy_from_slice(v.as_slice());
    }
    Ok(Transported {
        profile: out,
        exact: false,
    })
}

/// `(R(λ, B₀)f)(a) = ∫_0^a e^{−λ(a−s)} U(a,s) f(s) ds` by composite trapezoid
/// on the age grid, valid for `Re λ > ω(U)`.
///
/// The trapezoid sum is advanced one cell at a time:
/// `I_{k+1} = e^{−λ da} U_k (I_k + (da/2) f_k) + (da/2) f_{k+1}`.
pub fn howland_resolvent(u: &EvolutionFamily, lambda: C64, f: &ComplexProfile) -> Result<ComplexProfile> {
    check_profile(u, f.dim(), f.nodes())?;
    if !(lambda.re > u.omega()) {
        return Err(Error::ResolventDomain {
            lambda,
            omega: u.omega(),
        });
    }
    let n = f.dim();
    let nodes = f.nodes();
    let da = u.da();
    let decay = (-lambda * da).exp();
    let mut out = ComplexProfile::zeros(n, nodes);
    let mut acc = vec![C64::new(0.0, 0.0); n];
    for k in 0..nodes - 1 {
        let carry: Vec<C64> = acc
            .iter()
            .zip(f.at(k))
            .map(|(i, fk)| i + fk * (0.5 * da))
            .collect();
        let p = u.step_flat(k);
        let mut next = vec![C64::new(0.0, 0.0); n];
        for (r, nx) in next.iter_mut().enumerate() {
            let row = &p[r * n..(r + 1) * n];
            let dot: C64 = row.iter().zip(&carry).map(|(m, v)| v * *m).sum();
            *nx = decay * dot + f.at(k + 1)[r] * (0.5 * da);
        }
        out.at_mut(k + 1).copy_from_slice(&next);
        acc = next;
    }
    Ok(out)
}
