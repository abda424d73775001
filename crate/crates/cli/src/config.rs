//! Scenario files: versioned JSON describing a model, its grids, solver
//! settings and output names.

use std::path::Path;
use std::sync::Arc;

use agepert::age::{AgeModelSpec, BirthRate, InitialData, MaxAge, ModelInputs};
use agepert::semigroup::AgeCoefficients;
use agepert::LinearMap;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "agepert-scenario/1";
/// Relative tolerance used when checking `dt = da`.
const STEP_MATCH_TOL: f64 = 1e-12;

/// Row-major matrix.
pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    pub model: ModelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    /// Finite-dimensional pair `(A, L)` used by `dyson` and `scan` instead
    /// of the age model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Infinity {
    #[serde(rename = "inf")]
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaxAgeConfig {
    Finite(f64),
    Infinite(Infinity),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Maximal age, or `"inf"`.
    pub c: MaxAgeConfig,
    /// Cut-off for `c = "inf"`; chosen automatically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncate_at: Option<f64>,
    pub p: f64,
    pub dim: usize,
    pub coeff: CoeffConfig,
    pub kernel: KernelConfig,
    pub u0: InitialConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoeffConfig {
    Constant { matrix: Rows },
    /// `A(a) = −μ I`.
    ScalarMu { mu: f64 },
    MatrixTable { ages: Vec<f64>, matrices: Vec<Rows> },
    /// `A(a) = (Σ scale_k a^k) · generator`.
    ScaledGenerator { generator: Rows, scale: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    /// `C(a) = β I`.
    ConstantBeta { beta: f64 },
    /// `C(a) = β I` on `[from, to]`, zero elsewhere.
    WindowBeta { beta: f64, from: f64, to: f64 },
    MatrixTable { ages: Vec<f64>, matrices: Vec<Rows> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Constant { value: Vec<f64> },
    Window { value: Vec<f64>, from: f64, to: f64 },
    /// Piecewise-linear, constant outside the table.
    Table { ages: Vec<f64>, values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub da: f64,
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Renewal,
    Upwind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_method() -> Method {
    Method::Renewal
}
fn default_tol() -> f64 {
    1e-10
}
fn default_probes() -> usize {
    agepert::dyson::DEFAULT_PROBES
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: default_method(),
            tol: default_tol(),
            probes: default_probes(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub simulate: String,
    pub field: String,
    pub roots: String,
    pub dyson: String,
    pub dyson_orders: String,
    pub scan: String,
    /// Write every `every`-th time level.
    pub every: usize,
    pub dump_field: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            simulate: "simulate.csv".into(),
            field: "field.csv".into(),
            roots: "roots.csv".into(),
            dyson: "dyson.csv".into(),
            dyson_orders: "dyson_orders.csv".into(),
            scan: "scan.csv".into(),
            every: 1,
            dump_field: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    pub a: Rows,
    pub l: Rows,
}

impl ClassicalConfig {
    pub fn matrices(&self) -> CliResult<(LinearMap, LinearMap)> {
        let n = self.a.len();
        Ok((matrix(&self.a, n, "classical.a")?, matrix(&self.l, n, "classical.l")?))
    }
}

fn matrix(rows: &Rows, n: usize, what: &str) -> CliResult<LinearMap> {
    if n == 0 {
        return Err(CliError::config(format!("{what}: empty matrix")));
    }
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::config(format!("{what}: expected a {n}x{n} matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::config(format!("{what}: entries must be finite")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_table(ages: &[f64], len: usize, what: &str) -> CliResult<()> {
    if ages.is_empty() {
        return Err(CliError::config(format!("{what}: table is empty")));
    }
    if ages.len() != len {
        return Err(CliError::config(format!(
            "{what}: {} ages but {len} entries",
            ages.len()
        )));
    }
    if ages.iter().any(|a| !a.is_finite()) || ages.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config(format!("{what}: ages must be finite and strictly increasing")));
    }
    Ok(())
}

fn check_vector(v: &[f64], n: usize, what: &str) -> CliResult<()> {
    if v.len() != n {
        return Err(CliError::config(format!("{what}: expected {n} components, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::config(format!("{what}: entries must be finite")));
    }
    Ok(())
}

impl ScenarioConfig {
    /// Parses and validates.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(CliError::config)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// A path to a JSON file, or `builtin:NAME`.
    pub fn load(source: &str) -> CliResult<Self> {
        match source.strip_prefix("builtin:") {
            Some(name) => builtin(name),
            None => Self::from_path(Path::new(source)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema != SCHEMA {
            return Err(CliError::config(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        let g = &self.grid;
        if !(g.da > 0.0 && g.da.is_finite()) {
            return Err(CliError::config(format!("grid.da must be positive, got {}", g.da)));
        }
        if (g.dt - g.da).abs() > STEP_MATCH_TOL * g.da {
            return Err(CliError::config(format!(
                "grid.dt = {} must equal grid.da = {}",
                g.dt, g.da
            )));
        }
        if !(g.t_end > 0.0 && g.t_end.is_finite()) {
            return Err(CliError::config(format!("grid.t_end must be positive, got {}", g.t_end)));
        }
        let m = &self.model;
        if m.dim == 0 {
            return Err(CliError::config("model.dim must be >= 1"));
        }
        if !(m.p >= 1.0 && m.p.is_finite()) {
            return Err(CliError::config(format!("model.p must be finite and >= 1, got {}", m.p)));
        }
        match m.c {
            MaxAgeConfig::Finite(c) if !(c > 0.0 && c.is_finite()) => {
                return Err(CliError::config(format!("model.c must be positive, got {c}")));
            }
            MaxAgeConfig::Finite(_) if m.truncate_at.is_some() => {
                return Err(CliError::config("model.truncate_at only applies to c = \"inf\""));
            }
            _ => {}
        }
        if let Some(t) = m.truncate_at {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::config(format!("model.truncate_at must be positive, got {t}")));
            }
        }
        self.coefficients()?;
        self.birth()?;
        self.initial()?;
        if self.solver.tol <= 0.0 || self.solver.probes == 0 {
            return Err(CliError::config("solver.tol must be positive and solver.probes >= 1"));
        }
        if self.outputs.every == 0 {
            return Err(CliError::config("outputs.every must be >= 1"));
        }
        if let Some(c) = &self.classical {
            c.matrices()?;
        }
        Ok(())
    }

    fn coefficients(&self) -> CliResult<AgeCoefficients> {
        let n = self.model.dim;
        Ok(match &self.model.coeff {
            CoeffConfig::Constant { matrix: rows } => AgeCoefficients::Constant(matrix(rows, n, "coeff.matrix")?),
            CoeffConfig::ScalarMu { mu } => {
                if !mu.is_finite() {
                    return Err(CliError::config("coeff.mu must be finite"));
                }
                AgeCoefficients::scalar_mortality(*mu, n)
            }
            CoeffConfig::MatrixTable { ages, matrices } => {
                check_table(ages, matrices.len(), "coeff")?;
                AgeCoefficients::Table {
                    ages: ages.clone(),
                    matrices: matrices
                        .iter()
                        .map(|r| matrix(r, n, "coeff.matrices"))
                        .collect::<CliResult<_>>()?,
                }
            }
            CoeffConfig::ScaledGenerator { generator, scale } => {
                if scale.is_empty() || scale.iter().any(|c| !c.is_finite()) {
                    return Err(CliError::config("coeff.scale must be a nonempty list of finite numbers"));
                }
                AgeCoefficients::ScaledGenerator {
                    generator: matrix(generator, n, "coeff.generator")?,
                    scale: scale.clone(),
                }
            }
        })
    }

    fn birth(&self) -> CliResult<BirthRate> {
        let n = self.model.dim;
        let id = DMatrix::<f64>::identity(n, n);
        Ok(match &self.model.kernel {
            KernelConfig::ConstantBeta { beta } => {
                if !beta.is_finite() {
                    return Err(CliError::config("kernel.beta must be finite"));
                }
                BirthRate::Constant(id * *beta)
            }
            KernelConfig::WindowBeta { beta, from, to } => {
                if !(beta.is_finite() && from.is_finite() && to.is_finite() && from <= to) {
                    return Err(CliError::config("kernel window needs finite beta and from <= to"));
                }
                BirthRate::Window {
                    beta: id * *beta,
                    from: *from,
                    to: *to,
                }
            }
            KernelConfig::MatrixTable { ages, matrices } => {
                check_table(ages, matrices.len(), "kernel")?;
                BirthRate::Table {
                    ages: ages.clone(),
                    matrices: matrices
                        .iter()
                        .map(|r| matrix(r, n, "kernel.matrices"))
                        .collect::<CliResult<_>>()?,
                }
            }
        })
    }

    fn initial(&self) -> CliResult<InitialData> {
        let n = self.model.dim;
        Ok(match &self.model.u0 {
            InitialConfig::Constant { value } => {
                check_vector(value, n, "u0.value")?;
                InitialData::Constant(value.clone())
            }
            InitialConfig::Window { value, from, to } => {
                check_vector(value, n, "u0.value")?;
                if !(from.is_finite() && to.is_finite() && from <= to) {
                    return Err(CliError::config("u0 window needs from <= to"));
                }
                InitialData::Window {
                    value: value.clone(),
                    from: *from,
                    to: *to,
                }
            }
            InitialConfig::Table { ages, values } => {
                check_table(ages, values.len(), "u0")?;
                for v in values {
                    check_vector(v, n, "u0.values")?;
                }
                let ages = ages.clone();
                let values = values.clone();
                InitialData::Custom(Arc::new(move |a| interpolate(&ages, &values, a)))
            }
        })
    }

    pub fn max_age(&self) -> MaxAge {
        match self.model.c {
            MaxAgeConfig::Finite(c) => MaxAge::Finite(c),
            MaxAgeConfig::Infinite(_) => MaxAge::Infinite {
                truncate_at: self.model.truncate_at,
            },
        }
    }

    /// The validated age model on its grids.
    pub fn to_spec(&self) -> CliResult<AgeModelSpec> {
        let inputs = ModelInputs {
            max_age: self.max_age(),
            p: self.model.p,
            coefficients: self.coefficients()?,
            birth: self.birth()?,
            initial: self.initial()?,
            da: self.grid.da,
            t_end: self.grid.t_end,
        };
        AgeModelSpec::new(inputs).map_err(|e| match e {
            agepert::Error::InvalidInput(msg) => CliError::Config(msg),
            other => CliError::Solver(other),
        })
    }
}

fn interpolate(ages: &[f64], values: &[Vec<f64>], a: f64) -> Vec<f64> {
    let last = ages.len() - 1;
    if a <= ages[0] {
        return values[0].clone();
    }
    if a >= ages[last] {
        return values[last].clone();
    }
    let k = ages.partition_point(|&x| x <= a) - 1;
    let theta = (a - ages[k]) / (ages[k + 1] - ages[k]);
    values[k]
        .iter()
        .zip(&values[k + 1])
        .map(|(x, y)| x * (1.0 - theta) + y * theta)
        .collect()
}

pub const BUILTINS: [&str; 4] = ["example-a", "benchmark", "classical-scalar", "classical-diag"];

fn scalar_model(c: f64, mu: f64, beta: f64, p: f64) -> ModelConfig {
    ModelConfig {
        c: MaxAgeConfig::Finite(c),
        truncate_at: None,
        p,
        dim: 1,
        coeff: CoeffConfig::ScalarMu { mu },
        kernel: KernelConfig::ConstantBeta { beta },
        u0: InitialConfig::Constant { value: vec![1.0] },
    }
}

/// Built-in scenarios.
pub fn builtin(name: &str) -> CliResult<ScenarioConfig> {
    let base = |name: &str, model: ModelConfig, da: f64, t_end: f64| ScenarioConfig {
        schema: SCHEMA.into(),
        name: name.into(),
        model,
        grid: GridConfig { da, dt: da, t_end },
        solver: SolverConfig::default(),
        outputs: OutputConfig::default(),
        classical: None,
    };
    let cfg = match name {
        // pure mortality: U(t,s) = e^{−μ(t−s)} I and no births
        "example-a" => base(name, scalar_model(4.0, 0.5, 0.0, 1.0), 0.01, 8.0),
        "benchmark" => base(name, scalar_model(4.0, 0.2, 0.5, 1.0), 1.0 / 200.0, 40.0),
        "classical-scalar" => ScenarioConfig {
            classical: Some(ClassicalConfig {
                a: vec![vec![-1.0]],
                l: vec![vec![0.5]],
            }),
            ..base(name, scalar_model(2.0, 1.0, 0.0, 1.0), 1e-3, 1.0)
        },
        "classical-diag" => ScenarioConfig {
            classical: Some(ClassicalConfig {
                a: vec![vec![-1.0, 0.0], vec![0.0, -2.0]],
                l: vec![vec![0.2, -0.1], vec![0.1, 0.3]],
            }),
            ..base(name, scalar_model(2.0, 1.0, 0.0, 1.0), 1e-3, 1.0)
        },
        other => {
            return Err(CliError::config(format!(
                "unknown builtin scenario {other:?}; available: {}",
                BUILTINS.join(", ")
            )))
        }
    };
    Ok(cfg)
}
