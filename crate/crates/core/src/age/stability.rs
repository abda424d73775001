use crate::age::{solve_renewal, AgeModelSpec, MaxAge};
use crate::spectral::{
    characteristic, classify, growth_fit, lotka_roots, transfer_report, ConsistencyWarning,
    GrowthData, Hypotheses, SpectralReport, TransferMode,
};
use crate::{Error, Result};

/// Allowed gap between the fitted growth rate and the dominant root.
pub const CONSISTENCY_TOL: f64 = 1e-2;
/// Newton tolerance on `det(I − K(λ))`.
const ROOT_TOL: f64 = 1e-12;
/// Fraction of the horizon used for the growth fit.
const FIT_FRACTION: f64 = 0.5;

/// Dominant real characteristic root, a simulated growth rate, the
/// essential-growth transfer and the resulting classification.
pub fn stability_report(spec: &AgeModelSpec) -> Result<SpectralReport> {
    let u = spec.family();
    let kernel = spec.kernel();
    let mut notes: Vec<String> = spec.notes().to_vec();
    let finite = matches!(spec.max_age(), MaxAge::Finite(_));

    let (roots, s_hat) = if kernel.is_zero() {
        notes.push("birth kernel vanishes: det(I - K) = 1, no characteristic roots".into());
        (Vec::new(), Some(f64::NEG_INFINITY))
    } else {
        let window = root_window(spec)?;
        notes.push(format!("root window [{}, {}]", window.0, window.1));
        match lotka_roots(u, kernel, window, ROOT_TOL) {
            Ok(r) => {
                let s = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (r, Some(s))
            }
            Err(Error::NoRootInWindow { lo, hi, .. }) => {
                notes.push(format!("no sign change of det(I - K) on [{lo}, {hi}]"));
                (Vec::new(), None)
            }
            Err(e) => return Err(e),
        }
    };

    let sim = solve_renewal(spec)?;
    let times: Vec<f64> = sim.time.nodes().collect();
    let fitted_rate = match growth_fit(&times, &sim.norms, FIT_FRACTION) {
        Ok(fit) => Some(fit.rate),
        Err(Error::FitDomain(why)) => {
            notes.push(format!("growth fit skipped: {why}"));
            None
        }
        Err(e) => return Err(e),
    };
    let warning = match (fitted_rate, s_hat) {
        (Some(rate), Some(s)) if s.is_finite() && (rate - s).abs() > CONSISTENCY_TOL => Some(ConsistencyWarning {
            fitted_rate: rate,
            s_hat: s,
            tolerance: CONSISTENCY_TOL,
        }),
        _ => None,
    };

    let base = GrowthData {
        omega_u: u.omega(),
        s_hat,
        max_age: finite.then(|| spec.c()),
    };
    // E is finite dimensional, so L has finite rank.
    let hyp = Hypotheses {
        finite_max_age: finite,
        compact_perturbation: true,
        ..Hypotheses::default()
    };
    let transfer = transfer_report(&base, TransferMode::Essential, &hyp);
    let classification = classify(s_hat, &transfer);
    Ok(SpectralReport {
        lotka_roots: roots,
        s_hat,
        omega_u: u.omega(),
        omega_ess_bound: transfer.bound,
        fitted_rate,
        classification,
        transfer,
        warning,
        notes,
    })
}

/// Widens `[−1, 1]` until `det(I − K)` is positive on the right end and
/// negative on the left, as far as `e^{−λc}` stays representable.
fn root_window(spec: &AgeModelSpec) -> Result<(f64, f64)> {
    let u = spec.family();
    let k = spec.kernel();
    let floor = -(600.0 / spec.c()).min(1e3);
    let mut hi = 1.0f64;
    while characteristic(u, k, hi)? <= 0.0 && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = (-1.0f64).max(floor);
    while characteristic(u, k, lo)? >= 0.0 && lo > floor {
        lo = (2.0 * lo).max(floor);
    }
    Ok((lo, hi))
}
