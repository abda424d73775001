use nalgebra::DMatrix;

use crate::dyson::{diamond, mr_delta_estimate, DeltaEstimate, DiamondKernel, TimePath, DEFAULT_PROBES};
use crate::error::invalid;
use crate::grid::TimeGrid;
use crate::linalg::LinearMap;
use crate::semigroup::SemigroupPath;
use crate::{Error, Result};

/// Safety factor applied to the probe estimate of `δ` when choosing the
/// contraction window.
const DELTA_SAFETY: f64 = 2.0;
const MIN_TERMS: usize = 3;
const MAX_TERMS: usize = 400;

/// Dyson-Phillips term `S_n` on a grid.
#[derive(Debug, Clone)]
pub struct SeriesTerm {
    pub index: usize,
    pub path: TimePath,
}

fn check_perturbation(kernel: &DiamondKernel, l: &LinearMap) -> Result<()> {
    if l.nrows() != kernel.x_dim() || l.ncols() != kernel.x0_dim() {
        return Err(invalid(format!(
            "perturbation is {}x{}, expected {}x{}",
            l.nrows(),
            l.ncols(),
            kernel.x_dim(),
            kernel.x0_dim()
        )));
    }
    crate::linalg::check_finite(l, "perturbation")
}

/// `S_0 = T_{A₀}` and `S_{k+1} = S_A ⋄ (L S_k)`, for `k = 0..=order`.
pub fn dyson_terms(kernel: &DiamondKernel, l: &LinearMap, order: usize, grid: &TimeGrid) -> Result<Vec<SeriesTerm>> {
    check_perturbation(kernel, l)?;
    let mut cur = kernel.base_path(grid)?;
    let mut out = Vec::with_capacity(order + 1);
    for index in 0..=order {
        if index > 0 {
            cur = diamond(kernel, &cur.left_mul(l)?)?;
        }
        out.push(SeriesTerm {
            index,
            path: cur.clone(),
        });
    }
    Ok(out)
}

pub fn dyson_term(kernel: &DiamondKernel, l: &LinearMap, n: usize, grid: &TimeGrid) -> Result<SeriesTerm> {
    Ok(dyson_terms(kernel, l, n, grid)?.pop().expect("at least one term"))
}

/// The perturbed semigroup and the data of its construction.
#[derive(Debug, Clone)]
pub struct Perturbed {
    pub path: SemigroupPath,
    /// Length `δ₀` of the contraction window.
    pub window: f64,
    /// `δ(δ₀)·‖L‖` with the unscaled probe estimate of `δ`.
    pub ratio: f64,
    /// Sup norms over the first window of the series terms `𝓑ⁿ(T_{A₀})`.
    pub term_norms: Vec<f64>,
    pub delta: DeltaEstimate,
}

/// Solves `W = T_{A₀} + S_A ⋄ (L W)` on `grid`.
///
/// The series is summed on a window `[0, δ₀]` where `2·δ(δ₀)·‖L‖ < 1`, and
/// carried across the horizon by restarting from `V(s) = T_{A₀}(s)W(kδ₀)`.
pub fn perturbed_semigroup(kernel: &DiamondKernel, l: &LinearMap, grid: &TimeGrid, tol: f64) -> Result<Perturbed> {
    check_perturbation(kernel, l)?;
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let delta = match kernel.delta() {
        Some(d) if d.grid.dt() <= grid.dt() * (1.0 + 1e-12) => d.clone(),
        _ => mr_delta_estimate(kernel, grid, DEFAULT_PROBES, 0)?,
    };
    let l_norm = kernel.map_norm(l);
    let mut m0 = 0;
    for k in 1..=grid.steps() {
        match delta.at(grid.node(k)) {
            Some(d) if DELTA_SAFETY * d * l_norm < 1.0 => m0 = k,
            _ => break,
        }
    }
    if m0 == 0 {
        let d = delta.at(grid.dt()).unwrap_or(f64::INFINITY);
        return Err(Error::ContractionFailure {
            step: grid.dt(),
            ratio: DELTA_SAFETY * d * l_norm,
        });
    }
    let window = grid.node(m0);
    let ratio = delta.at(window).unwrap_or(0.0) * l_norm;

    let base = kernel.base_path(&grid.truncated(m0))?;
    let (first, term_norms) = fixed_point(kernel, l, base.clone(), tol)?;
    let mut values = first.into_values();
    let mut start = m0;
    while start < grid.steps() {
        let len = m0.min(grid.steps() - start);
        let w_start = values[start].clone();
        let seed_values: Vec<DMatrix<f64>> = base.values()[..=len].iter().map(|t| t * &w_start).collect();
        let seed = TimePath::new(grid.truncated(len), seed_values)?;
        let (piece, _) = fixed_point(kernel, l, seed, tol)?;
        values.extend(piece.into_values().into_iter().skip(1));
        start += len;
    }
    Ok(Perturbed {
        path: SemigroupPath::tabulated(*grid, values)?,
        window,
        ratio,
        term_norms,
        delta,
    })
}

/// Sums `Σ_n 𝓑ⁿ(seed)` with `𝓑(W) = S_A ⋄ (L W)`.
fn fixed_point(kernel: &DiamondKernel, l: &LinearMap, seed: TimePath, tol: f64) -> Result<(TimePath, Vec<f64>)> {
    let sup = |p: &TimePath| p.values().iter().map(|m| kernel.map_norm(m)).fold(0.0, f64::max);
    let mut norms = vec![sup(&seed)];
    let mut sum: Vec<DMatrix<f64>> = seed.values().to_vec();
    let mut term = seed;
    for n in 1..MAX_TERMS {
        term = diamond(kernel, &term.left_mul(l)?)?;
        let size = sup(&term);
        for (s, t) in sum.iter_mut().zip(term.values()) {
            *s += t;
        }
        norms.push(size);
        if n + 1 >= MIN_TERMS && size <= tol {
            return Ok((TimePath::new(*term.grid(), sum)?, norms));
        }
        if !size.is_finite() {
            break;
        }
    }
    Err(Error::ContractionFailure {
        step: term.grid().t_end(),
        ratio: norms[norms.len() - 1] / norms[norms.len() - 2].max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::matrix_semigroup;

    fn scalar(a: f64) -> DiamondKernel {
        DiamondKernel::classical_generator(DMatrix::from_element(1, 1, a)).unwrap()
    }

    #[test]
    fn zeroth_term_is_base() {
        let k = scalar(-0.5);
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let s0 = dyson_term(&k, &DMatrix::from_element(1, 1, 0.3), 0, &grid).unwrap();
        assert_eq!(s0.path, k.base_path(&grid).unwrap());
    }

    #[test]
    fn zero_perturbation_kills_higher_terms() {
        let k = scalar(0.2);
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let s1 = dyson_term(&k, &DMatrix::zeros(1, 1), 1, &grid).unwrap();
        assert!(s1.path.values().iter().all(|m| m.amax() == 0.0));
    }

    #[test]
    fn scalar_terms_match_closed_form() {
        let (a, l) = (-0.7, 0.9);
        let k = scalar(a);
        let grid = TimeGrid::new(2.0, 1e-3).unwrap();
        let terms = dyson_terms(&k, &DMatrix::from_element(1, 1, l), 3, &grid).unwrap();
        let mut fact = 1.0;
        for term in &terms {
            let n = term.index;
            if n > 0 {
                fact *= n as f64;
            }
            for (j, t) in grid.nodes().enumerate().step_by(100) {
                let exact = (l * t).powi(n as i32) * (a * t).exp() / fact;
                assert!((term.path.at(j)[(0, 0)] - exact).abs() < 1e-6, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn zero_perturbation_returns_base() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -0.2]);
        let k = DiamondKernel::classical_generator(a.clone()).unwrap();
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let p = perturbed_semigroup(&k, &DMatrix::zeros(2, 2), &grid, 1e-12).unwrap();
        let diff = p.path.eval(1.0).unwrap() - matrix_semigroup(&a, 1.0).unwrap();
        assert!(diff.amax() < 1e-12);
    }

    #[test]
    fn scalar_fixed_point() {
        let (a, l) = (-1.0, 0.5);
        let k = scalar(a);
        let grid = TimeGrid::new(2.0, 2.5e-4).unwrap();
        let p = perturbed_semigroup(&k, &DMatrix::from_element(1, 1, l), &grid, 1e-12).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let got = p.path.eval(t).unwrap()[(0, 0)];
            assert!((got - ((a + l) * t).exp()).abs() < 1e-8, "t={t}: {got}");
        }
    }

    #[test]
    fn oversized_perturbation_has_no_window() {
        let k = scalar(0.0);
        let grid = TimeGrid::new(1.0, 0.1).unwrap();
        let err = perturbed_semigroup(&k, &DMatrix::from_element(1, 1, 1e3), &grid, 1e-10).unwrap_err();
        assert!(matches!(err, Error::ContractionFailure { .. }));
    }
}
