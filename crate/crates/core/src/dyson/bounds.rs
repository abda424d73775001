use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dyson::{diamond, DiamondKernel, TimePath};
use crate::error::invalid;
use crate::grid::TimeGrid;
use crate::Result;

pub const DEFAULT_PROBES: usize = 8;

/// Sampled, nondecreasing estimate of `δ(t)` in
/// `‖(S_A ⋄ f)(t)‖ ≤ δ(t) sup_{s≤t} ‖f(s)‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEstimate {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl DeltaEstimate {
    /// Value at the first node at or after `t`, which is an upper estimate
    /// because the samples are nondecreasing. `None` past the horizon.
    pub fn at(&self, t: f64) -> Option<f64> {
        if t < 0.0 {
            return None;
        }
        let r = t / self.grid.dt();
        let k = if (r - r.round()).abs() < 1e-9 { r.round() } else { r.ceil() } as usize;
        self.values.get(k).copied()
    }
}

/// `probes` trigonometric paths in `X` with random coefficients, each scaled
/// to sup norm 1 on the grid. Probe `j` carries frequencies `0..=j`, so the
/// first probe is constant in time.
pub fn probe_paths(kernel: &DiamondKernel, grid: &TimeGrid, probes: usize, seed: u64) -> Result<TimePath> {
    if probes == 0 {
        return Err(invalid("at least one probe is required"));
    }
    let dim = kernel.x_dim();
    let period = grid.t_end().max(grid.dt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = Vec::with_capacity(probes);
    for j in 0..probes {
        let terms: Vec<(Vec<f64>, Vec<f64>)> = (0..=j)
            .map(|_| {
                let a = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                (a, b)
            })
            .collect();
        coeffs.push(terms);
    }
    let norm = kernel.x_norm();
    let mut values: Vec<DMatrix<f64>> = grid
        .nodes()
        .map(|t| {
            let mut m = DMatrix::zeros(dim, probes);
            for (j, terms) in coeffs.iter().enumerate() {
                for (freq, (a, b)) in terms.iter().enumerate() {
                    let w = 2.0 * PI * freq as f64 / period;
                    let (s, c) = (w * t).sin_cos();
                    for i in 0..dim {
                        m[(i, j)] += a[i] * c + if freq > 0 { b[i] * s } else { 0.0 };
                    }
                }
            }
            m
        })
        .collect();
    for j in 0..probes {
        let sup = values
            .iter()
            .map(|m| norm.norm(m.column(j).as_slice()))
            .fold(0.0, f64::max);
        if sup > 0.0 {
            for m in values.iter_mut() {
                m.column_mut(j).scale_mut(1.0 / sup);
            }
        }
    }
    TimePath::new(*grid, values)
}

/// Probe estimate of `δ(t)`: the largest `‖(S_A ⋄ f)(t)‖` over the probe
/// family, made nondecreasing by a running maximum.
pub fn mr_delta_estimate(kernel: &DiamondKernel, grid: &TimeGrid, probes: usize, seed: u64) -> Result<DeltaEstimate> {
    let f = probe_paths(kernel, grid, probes, seed)?;
    let out = diamond(kernel, &f)?;
    let (xn, x0n) = (kernel.x_norm(), kernel.x0_norm());
    let mut in_sup = vec![0.0f64; f.cols()];
    let mut running = 0.0f64;
    let mut values = Vec::with_capacity(grid.len());
    for (fk, m) in f.values().iter().zip(out.values()) {
        for (j, sup) in in_sup.iter_mut().enumerate() {
            *sup = sup.max(xn.norm(fk.column(j).as_slice()));
            if *sup > 0.0 {
                running = running.max(x0n.norm(m.column(j).as_slice()) / *sup);
            }
        }
        values.push(running);
    }
    Ok(DeltaEstimate { grid: *grid, values })
}

/// Outcome of the `p`-quasi Hille-Yosida probe.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiHyReport {
    /// Smallest constant fitting every fit probe.
    pub m_hat: f64,
    pub omega_hat: f64,
    /// Largest excess `ratio − M̂` seen on held-out probes (0 if none).
    pub max_violation: f64,
    /// Index of the fit probe attaining `M̂`.
    pub worst_probe: usize,
}

/// Largest `‖(S_A ⋄ f)(t)‖ / ‖e^{ω(t−·)} f‖_{L^p(0,t;X)}` over grid nodes,
/// one value per column of `f`. Columns with a zero denominator give 0.
pub fn convolution_ratio(kernel: &DiamondKernel, p: f64, omega: f64, f: &TimePath) -> Result<Vec<f64>> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("exponent p must be finite and >= 1, got {p}")));
    }
    let out = diamond(kernel, f)?;
    let grid = f.grid();
    let h = grid.dt();
    let xn = kernel.x_norm();
    let x0n = kernel.x0_norm();
    let mut ratios = vec![0.0f64; f.cols()];
    for (j, ratio) in ratios.iter_mut().enumerate() {
        let input: Vec<f64> = f.values().iter().map(|v| xn.norm(v.column(j).as_slice())).collect();
        // accumulate ∫_0^t e^{pω(t−s)}|f(s)|^p ds with the running weight e^{−pωs}
        let mut acc = 0.0;
        for k in 1..grid.len() {
            let s0 = grid.node(k - 1);
            let s1 = grid.node(k);
            let w0 = (-p * omega * s0).exp() * input[k - 1].powf(p);
            let w1 = (-p * omega * s1).exp() * input[k].powf(p);
            acc += 0.5 * h * (w0 + w1);
            let den = ((p * omega * s1).exp() * acc).powf(1.0 / p);
            let num = x0n.norm(out.at(k).column(j).as_slice());
            if den > 0.0 {
                *ratio = ratio.max(num / den);
            }
        }
    }
    Ok(ratios)
}

/// Fits `M̂` in `‖(S_A ⋄ f)(t)‖ ≤ M̂ ‖e^{ω̂(t−·)} f‖_{L^p(0,t;X)}` on
/// `probes` probes and measures the excess on as many held-out probes.
pub fn quasi_hy_check(
    kernel: &DiamondKernel,
    p: f64,
    grid: &TimeGrid,
    probes: usize,
    seed: u64,
) -> Result<QuasiHyReport> {
    let omega_hat = kernel.omega();
    let fit = convolution_ratio(kernel, p, omega_hat, &probe_paths(kernel, grid, probes, seed)?)?;
    let (worst_probe, m_hat) = fit
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (j, r)| if r > acc.1 { (j, r) } else { acc });
    let held = convolution_ratio(
        kernel,
        p,
        omega_hat,
        &probe_paths(kernel, grid, probes, seed.wrapping_add(0x9e37_79b9))?,
    )?;
    let max_violation = held.iter().map(|r| (r - m_hat).max(0.0)).fold(0.0, f64::max);
    Ok(QuasiHyReport {
        m_hat,
        omega_hat,
        max_violation,
        worst_probe,
    })
}
