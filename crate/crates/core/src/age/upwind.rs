use nalgebra::{DMatrix, DVector};

use crate::age::renewal::BirthPathBuilder;
use crate::age::{AgeModelSpec, SimulationResult, SolverKind};
use crate::error::invalid;
use crate::Result;

/// First-order upwind scheme at CFL 1,
/// `u_k^{m+1} = (I + dt·A(a_{k−1})) u_{k−1}^m`, with the boundary value from
/// the trapezoid birth integral (implicit in the boundary node). The
/// reaction term sits on the upwind node, so a Metzler `A` with
/// `dt·|A_ii| ≤ 1` keeps the scheme positive.
///
/// Coefficients are sampled directly; no evolution family is involved.
pub fn upwind_oracle(spec: &AgeModelSpec) -> Result<SimulationResult> {
    let age = *spec.age_grid();
    let time = *spec.time_grid();
    let (da, dt) = (age.dt(), time.dt());
    if (da - dt).abs() > 1e-12 * da {
        return Err(invalid(format!("upwind scheme needs dt = da (CFL 1), got dt = {dt}, da = {da}")));
    }
    let n = spec.dim();
    let nodes = age.len();
    let coeffs = spec.family().coefficients();
    let a_mats: Vec<DMatrix<f64>> = age.nodes().map(|a| coeffs.at(a)).collect();
    let c_mats: Vec<DMatrix<f64>> = (0..nodes).map(|k| spec.kernel().at(k).clone()).collect();
    let mut wts = vec![da; nodes];
    wts[0] = 0.5 * da;
    wts[nodes - 1] = 0.5 * da;

    let diag = DMatrix::<f64>::identity(n, n) - &c_mats[0] * wts[0];
    let lu = diag.clone().lu();
    let birth = |u: &[DVector<f64>]| -> DVector<f64> {
        let mut acc = DVector::zeros(n);
        for k in 1..nodes {
            acc += &c_mats[k] * &u[k] * wts[k];
        }
        acc
    };

    let mut cur: Vec<DVector<f64>> = (0..nodes)
        .map(|k| DVector::from_column_slice(spec.u0().at(k)))
        .collect();
    let mut out = BirthPathBuilder::new(n, nodes, time.len(), spec.p(), da);
    let b0 = birth(&cur) + &c_mats[0] * &cur[0] * wts[0];
    out.push(&cur, &b0);
    for m in 1..time.len() {
        let mut next = vec![DVector::zeros(n); nodes];
        for k in (1..nodes).rev() {
            next[k] = &cur[k - 1] + &a_mats[k - 1] * &cur[k - 1] * dt;
        }
        let rest = birth(&next);
        let b = lu.solve(&rest).ok_or_else(|| crate::Error::StepFailure {
            t: time.node(m),
            reason: "I - (da/2) C(0) is singular".into(),
        })?;
        next[0] = b.clone();
        out.push(&next, &b);
        cur = next;
    }
    Ok(out.finish(SolverKind::Upwind, time, age))
}
