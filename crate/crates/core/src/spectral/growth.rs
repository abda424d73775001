use crate::spectral::scan::slope_with_error;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub rate: f64,
    pub intercept: f64,
    /// RMS deviation of `log y` from the fitted line.
    pub residual: f64,
    pub points: usize,
}

/// Exponential rate of `values(times)`: least-squares slope of `log y` over
/// the last `fraction` of the horizon.
pub fn growth_fit(times: &[f64], values: &[f64], fraction: f64) -> Result<GrowthFit> {
    if times.len() != values.len() {
        return Err(Error::FitDomain("times and values differ in length".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::FitDomain(format!("fit fraction {fraction} outside (0, 1]")));
    }
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return Err(Error::FitDomain("empty trajectory".into()));
    };
    let start = t1 - fraction * (t1 - t0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= start - 1e-12 * t1.abs().max(1.0))
        .map(|(t, v)| (*t, *v))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::FitDomain("fewer than two points in the fit window".into()));
    }
    if let Some((t, v)) = xs.iter().zip(&ys).find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::FitDomain(format!("value {v} at t = {t} is not positive")));
    }
    let logs: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (rate, _) = slope_with_error(&xs, &logs);
    let n = xs.len() as f64;
    let intercept = logs.iter().sum::<f64>() / n - rate * xs.iter().sum::<f64>() / n;
    let residual = (xs
        .iter()
        .zip(&logs)
        .map(|(x, y)| (y - intercept - rate * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(GrowthFit {
        rate,
        intercept,
        residual,
        points: xs.len(),
    })
}

/// Constants `M_j` with `f_j(t) ≤ M_j e^{γt}` on every node, for a
/// subconvolutive family `f_j(t+s) ≤ Σ_{k≤j} f_k(t) f_{j−k}(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubconvolutiveCertificate {
    pub m: Vec<f64>,
    pub gamma: f64,
    /// Node time with `f₀(t₀) ≤ e^{γt₀}/2`.
    pub t0: f64,
    /// `min_t (1/t) log f₀(t)` over the grid.
    pub omega_hat: f64,
}

const LATTICE_SLACK: f64 = 1e-12;
/// Lattices larger than this are checked on a strided subset of nodes.
const LATTICE_MAX: usize = 512;

/// `f[j][k] = f_j(k·dt)`.
pub fn subconvolutive_bound(f: &[Vec<f64>], dt: f64, gamma: f64) -> Result<SubconvolutiveCertificate> {
    let pv = |msg: String| Error::PreconditionViolation(msg);
    let Some(f0) = f.first() else {
        return Err(crate::error::invalid("empty family"));
    };
    let len = f0.len();
    if len < 2 || f.iter().any(|fj| fj.len() != len) {
        return Err(crate::error::invalid("family members must share a grid of at least two nodes"));
    }
    if !(dt > 0.0) || !gamma.is_finite() {
        return Err(crate::error::invalid("need dt > 0 and finite gamma"));
    }
    if f.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(crate::error::invalid("family values must be finite and nonnegative"));
    }

    let stride = (len - 1).div_ceil(LATTICE_MAX).max(1);
    for i in (0..len).step_by(stride) {
        for k in (0..len - i).step_by(stride) {
            for (j, fj) in f.iter().enumerate() {
                let rhs: f64 = (0..=j).map(|l| f[l][i] * f[j - l][k]).sum();
                let lhs = fj[i + k];
                if lhs > rhs * (1.0 + LATTICE_SLACK) + f64::MIN_POSITIVE {
                    return Err(pv(format!(
                        "f_{j}({}) = {lhs} exceeds the convolution bound {rhs} at t = {}, s = {}",
                        (i + k) as f64 * dt,
                        i as f64 * dt,
                        k as f64 * dt
                    )));
                }
            }
        }
    }

    let omega_hat = (1..len)
        .map(|k| f0[k].ln() / (k as f64 * dt))
        .fold(f64::INFINITY, f64::min);
    if !(gamma > omega_hat) {
        return Err(pv(format!("gamma = {gamma} does not exceed the growth rate {omega_hat} of f_0")));
    }
    let Some(k0) = (1..len).find(|&k| f0[k] <= 0.5 * (gamma * k as f64 * dt).exp()) else {
        return Err(pv("no node with f_0(t) <= e^(gamma t)/2 on the grid; extend the horizon".to_string()));
    };
    let t0 = k0 as f64 * dt;
    let decay = (-gamma * t0).exp();

    let mut m = Vec::with_capacity(f.len());
    for (j, fj) in f.iter().enumerate() {
        let head = (0..k0)
            .map(|k| fj[k] * (-gamma * k as f64 * dt).exp())
            .fold(0.0, f64::max);
        let carried: f64 = (0..j).map(|l| m[l] * f[j - l][k0] * decay).sum();
        m.push(head + 2.0 * carried);
    }

    for (j, fj) in f.iter().enumerate() {
        for (k, v) in fj.iter().enumerate() {
            let bound = m[j] * (gamma * k as f64 * dt).exp();
            if *v > bound * (1.0 + LATTICE_SLACK) {
                return Err(pv(format!(
                    "certificate fails: f_{j}({}) = {v} > M_{j} e^(gamma t) = {bound}",
                    k as f64 * dt
                )));
            }
        }
    }
    Ok(SubconvolutiveCertificate {
        m,
        gamma,
        t0,
        omega_hat,
    })
}
