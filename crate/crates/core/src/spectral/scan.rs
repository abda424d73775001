use rayon::prelude::*;

use crate::error::invalid;
use crate::spectral::ResolventOperator;
use crate::{Result, C64};

/// Tolerance on `|β̂ − 1|` for the analytic classification.
const ANALYTIC_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanPath {
    /// `λ = shift + iy`.
    Imaginary { shift: f64 },
    /// `λ = r e^{iθ}`; `θ = 0` is the positive real axis.
    Sector { theta: f64 },
    /// Boundary of `{Re λ ≥ c − β log|Im λ|}`: `λ = c − β log y + iy`.
    Region { c: f64, beta: f64 },
}

impl ScanPath {
    pub fn point(&self, s: f64) -> C64 {
        match *self {
            Self::Imaginary { shift } => C64::new(shift, s),
            Self::Sector { theta } => C64::from_polar(s, theta),
            Self::Region { c, beta } => C64::new(c - beta * s.ln(), s),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Imaginary { .. } => "imaginary",
            Self::Sector { .. } => "sector",
            Self::Region { .. } => "region",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayClass {
    /// `‖R‖ ~ |λ|^{−1}`.
    AnalyticType,
    /// `‖R‖ ~ |λ|^{−β}`, `0 < β < 1`.
    CrandallPazy,
    /// Bounded on the region path.
    PazyIley,
    Undetermined,
}

#[derive(Debug, Clone)]
pub struct ResolventScan {
    pub path: ScanPath,
    /// `(λ, ‖R(λ)‖)`.
    pub samples: Vec<(C64, f64)>,
    /// Decay exponent: minus the log-log slope of `‖R‖` against the path
    /// parameter.
    pub beta_hat: f64,
    /// Half-width of the band `β̂ ± 2·SE`.
    pub band: f64,
    pub class: DecayClass,
    /// On the real axis: whether `λ‖R(λ)‖` increases at every sample, the
    /// sampled signature of a resolvent that is not Hille-Yosida bounded.
    pub hille_yosida_failure: Option<bool>,
}

/// Samples `‖R(λ)‖` at `samples` log-spaced parameters in `[lo, hi]` along
/// `path` and fits the decay exponent.
pub fn resolvent_decay_scan<R: ResolventOperator + ?Sized>(
    r: &R,
    path: ScanPath,
    window: (f64, f64),
    samples: usize,
) -> Result<ResolventScan> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(invalid(format!("scan window must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if samples < 3 {
        return Err(invalid("a scan needs at least 3 samples"));
    }
    let params: Vec<f64> = (0..samples)
        .map(|i| lo * (hi / lo).powf(i as f64 / (samples - 1) as f64))
        .collect();
    let norms: Vec<Result<f64>> = params.par_iter().map(|&s| r.norm(path.point(s))).collect();
    let mut out = Vec::with_capacity(samples);
    for (s, nrm) in params.iter().zip(norms) {
        let nrm = nrm?;
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(invalid(format!("resolvent norm {nrm} at parameter {s} is not usable")));
        }
        out.push((path.point(*s), nrm));
    }
    let xs: Vec<f64> = params.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = out.iter().map(|(_, n)| n.ln()).collect();
    let (slope, se) = slope_with_error(&xs, &ys);
    let beta_hat = -slope;
    let band = 2.0 * se;
    let class = match path {
        ScanPath::Region { .. } => {
            if beta_hat >= -band {
                DecayClass::PazyIley
            } else {
                DecayClass::Undetermined
            }
        }
        _ => {
            if (beta_hat - 1.0).abs() <= ANALYTIC_TOL {
                DecayClass::AnalyticType
            } else if beta_hat > 0.0 && beta_hat < 1.0 {
                DecayClass::CrandallPazy
            } else {
                DecayClass::Undetermined
            }
        }
    };
    let hille_yosida_failure = match path {
        ScanPath::Sector { theta } if theta == 0.0 => Some(
            out.windows(2)
                .all(|w| w[1].0.re * w[1].1 > w[0].0.re * w[0].1),
        ),
        _ => None,
    };
    Ok(ResolventScan {
        path,
        samples: out,
        beta_hat,
        band,
        class,
        hille_yosida_failure,
    })
}

/// Least-squares slope and its standard error.
pub(crate) fn slope_with_error(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let se = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, se)
}
