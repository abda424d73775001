use nalgebra::DMatrix;

use crate::age::AgeModelSpec;
use crate::dyson::TimePath;
use crate::error::invalid;
use crate::grid::TimeGrid;
use crate::quadrature::trapezoid_weights;
use crate::Result;

/// `F(t) = ∫ C(t−a) U(t−a, 0) L T₀(a) da` as maps from grid profiles to `E`.
///
/// The integrand vanishes unless `t − c ≤ a ≤ min(t, c)`, so for `t ≤ c` the
/// range is `[0, t]` and for `t > c` it is `[t − c, c]`.
#[derive(Debug, Clone)]
pub struct FluxKernel {
    pub path: TimePath,
    p: f64,
    da: f64,
    dim: usize,
}

impl FluxKernel {
    /// `max_m ‖F(t_{m+1}) − F(t_m)‖` in the operator norm `L^p → E`, a
    /// discrete modulus of norm continuity.
    pub fn continuity_modulus(&self) -> f64 {
        let w = trapezoid_weights(self.path.cols() / self.dim - 1, self.da);
        self.path
            .values()
            .windows(2)
            .map(|pair| crate::dyson::kernel_functional_bound(&(&pair[1] - &pair[0]), self.dim, &w, self.p))
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        let w = trapezoid_weights(self.path.cols() / self.dim - 1, self.da);
        self.path
            .values()
            .iter()
            .map(|m| crate::dyson::kernel_functional_bound(m, self.dim, &w, self.p))
            .fold(0.0, f64::max)
    }
}

pub fn flux_kernel(spec: &AgeModelSpec, grid: &TimeGrid) -> Result<FluxKernel> {
    let da = spec.da();
    if (grid.dt() - da).abs() > 1e-12 * da {
        return Err(invalid(format!("flux grid step {} must equal the age step {da}", grid.dt())));
    }
    let fam = spec.family();
    let kernel = spec.kernel();
    let n = spec.dim();
    let nodes = spec.age_grid().len();
    let last = nodes - 1;
    let w = trapezoid_weights(last, da);

    // Λ_i = L T₀(a_i): column block j is w_{i+j} C(a_{i+j}) U(a_{i+j}, a_j)
    let mut lam = vec![DMatrix::<f64>::zeros(n, n * nodes); nodes];
    for j in 0..nodes {
        let mut prop = DMatrix::<f64>::identity(n, n);
        for i in 0..nodes - j {
            let k = i + j;
            lam[i]
                .view_mut((0, n * j), (n, n))
                .copy_from(&(kernel.at(k) * &prop * w[k]));
            if k < last {
                prop = fam.step(k) * prop;
            }
        }
    }
    // C(a_k) U(a_k, 0)
    let cu: Vec<DMatrix<f64>> = (0..nodes).map(|k| kernel.at(k) * fam.from_zero(k)).collect();

    let mut values = Vec::with_capacity(grid.len());
    for m in 0..grid.len() {
        let lo = m.saturating_sub(last);
        let hi = m.min(last);
        let mut f = DMatrix::zeros(n, n * nodes);
        if hi > lo {
            let wi = trapezoid_weights(hi - lo, da);
            for i in lo..=hi {
                f += &cu[m - i] * &lam[i] * wi[i - lo];
            }
        }
        values.push(f);
    }
    Ok(FluxKernel {
        path: TimePath::new(*grid, values)?,
        p: spec.p(),
        da,
        dim: n,
    })
}
