use std::fmt;

/// Which growth bound is transferred from the base semigroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferMode {
    Essential,
    Critical,
}

/// Structural facts about the model supplied by the caller. Nothing here
/// is inferred from data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Hypotheses {
    /// `c < ∞`, so the Howland semigroup vanishes for `t > c`.
    pub finite_max_age: bool,
    /// The perturbation `L` is compact.
    pub compact_perturbation: bool,
    /// `a ↦ U(a,0)` has compact values.
    pub compact_trace: bool,
    /// `L T_{A₀}` is norm continuous on `(0, ∞)`.
    pub norm_continuous: bool,
}

/// Growth data of the unperturbed problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthData {
    /// `ω(U)`, which equals `ω(T₀)`.
    pub omega_u: f64,
    /// Spectral bound `s(A+L)` if known.
    pub s_hat: Option<f64>,
    /// Maximal age; `None` for `c = ∞`.
    pub max_age: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub mode: TransferMode,
    pub lines: Vec<String>,
    /// Upper bound for the essential (or critical) growth bound of the
    /// perturbed semigroup; `−∞` when it vanishes identically.
    pub bound: Option<f64>,
    /// `ω(T_{(A+L)₀})` when it is determined.
    pub omega: Option<f64>,
    pub conclusive: bool,
}

/// Emits the transfer statements that follow from `hyp`, or an
/// inconclusive report when the needed hypotheses are absent.
pub fn transfer_report(base: &GrowthData, mode: TransferMode, hyp: &Hypotheses) -> TransferReport {
    let mut lines = Vec::new();
    let finite = hyp.finite_max_age && base.max_age.is_some();
    let bound = match mode {
        TransferMode::Essential => {
            if finite && hyp.compact_perturbation {
                let c = base.max_age.unwrap_or(f64::NAN);
                lines.push(format!("c = {c} < inf: T0(t) = 0 for t > c"));
                lines.push("omega_ess(T0) = -inf".into());
                lines.push("L compact: omega_ess(T_(A+L)0) = omega_ess(T0) = -inf".into());
                Some(f64::NEG_INFINITY)
            } else if hyp.compact_perturbation {
                lines.push(format!("omega(T0) = s(B0) = omega(U) = {}", base.omega_u));
                lines.push(format!(
                    "L compact: omega_ess(T_(A+L)0) = omega_ess(T0) <= omega(U) = {}",
                    base.omega_u
                ));
                Some(base.omega_u)
            } else {
                None
            }
        }
        TransferMode::Critical => {
            if finite && (hyp.norm_continuous || hyp.compact_perturbation) {
                let c = base.max_age.unwrap_or(f64::NAN);
                lines.push(format!("c = {c} < inf: T0 eventually zero, omega_crit(T0) = -inf"));
                lines.push("omega_crit(T_(A+L)0) = -inf".into());
                Some(f64::NEG_INFINITY)
            } else if hyp.norm_continuous {
                lines.push(format!(
                    "L T0 norm continuous: omega_crit(T_(A+L)0) <= omega_crit(T0) <= omega(U) = {}",
                    base.omega_u
                ));
                Some(base.omega_u)
            } else {
                None
            }
        }
    };
    let Some(b) = bound else {
        lines.push("required hypotheses not supplied: transfer inconclusive".into());
        return TransferReport {
            mode,
            lines,
            bound: None,
            omega: None,
            conclusive: false,
        };
    };
    let omega = match base.s_hat {
        Some(s) if b == f64::NEG_INFINITY => {
            lines.push(format!("omega(T_(A+L)0) = max(s(A+L), bound) = s(A+L) = {s}"));
            Some(s)
        }
        Some(s) if s >= b => {
            lines.push(format!("omega(T_(A+L)0) = max(s(A+L), bound) = s(A+L) = {s}"));
            Some(s)
        }
        Some(s) => {
            lines.push(format!("omega(T_(A+L)0) <= max(s(A+L), bound) = {}", s.max(b)));
            None
        }
        None => None,
    };
    TransferReport {
        mode,
        lines,
        bound: Some(b),
        omega,
        conclusive: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Stable,
    Unstable,
    Inconclusive,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::Inconclusive => "inconclusive",
        })
    }
}

/// Stable when `s < 0` and the transferred bound is negative; unstable when
/// `s > 0` and the transferred bound is negative (so `s` is an isolated
/// eigenvalue of finite multiplicity governing the growth).
pub fn classify(s_hat: Option<f64>, transfer: &TransferReport) -> Classification {
    let (Some(s), Some(b)) = (s_hat, transfer.bound) else {
        return Classification::Inconclusive;
    };
    if !transfer.conclusive {
        return Classification::Inconclusive;
    }
    if s < 0.0 && b < 0.0 {
        Classification::Stable
    } else if s > 0.0 && b < 0.0 {
        Classification::Unstable
    } else {
        Classification::Inconclusive
    }
}

/// Fitted growth rate and spectral bound disagree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyWarning {
    pub fitted_rate: f64,
    pub s_hat: f64,
    pub tolerance: f64,
}

impl fmt::Display for ConsistencyWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fitted growth rate {} differs from the spectral bound {} by more than {}",
            self.fitted_rate, self.s_hat, self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub lotka_roots: Vec<f64>,
    /// Max root; `−∞` when the boundary spectrum is empty.
    pub s_hat: Option<f64>,
    pub omega_u: f64,
    pub omega_ess_bound: Option<f64>,
    pub fitted_rate: Option<f64>,
    pub classification: Classification,
    pub transfer: TransferReport,
    pub warning: Option<ConsistencyWarning>,
    pub notes: Vec<String>,
}

impl fmt::Display for SpectralReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.10e}"));
        writeln!(f, "{:<20} {}", "classification", self.classification)?;
        writeln!(f, "{:<20} {}", "s(A+L)", opt(self.s_hat))?;
        writeln!(f, "{:<20} {:.10e}", "omega(U)", self.omega_u)?;
        writeln!(f, "{:<20} {}", "omega_ess bound", opt(self.omega_ess_bound))?;
        writeln!(f, "{:<20} {}", "fitted rate", opt(self.fitted_rate))?;
        writeln!(f, "{:<20} {}", "roots", self.lotka_roots.len())?;
        for r in &self.lotka_roots {
            writeln!(f, "{:<20} {r:.12e}", "")?;
        }
        for line in &self.transfer.lines {
            writeln!(f, "transfer: {line}")?;
        }
        if let Some(w) = &self.warning {
            writeln!(f, "warning: {w}")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}
