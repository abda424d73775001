use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use agepert::age::{solve_renewal, stability_report, upwind_oracle, AgeResolvent, SimulationResult};
use agepert::dyson::{dyson_terms, mr_delta_estimate, perturbed_semigroup, DiamondKernel};
use agepert::semigroup::SemigroupPath;
use agepert::spectral::{
    growth_fit, resolvent_decay_scan, DecayClass, MatrixResolvent, ResolventOperator, ResolventScan, ScanPath,
    SpectralReport,
};
use agepert::{LinearMap, TimeGrid};
use nalgebra::DMatrix;

use crate::config::{Method, ScenarioConfig};
use crate::error::{CliError, CliResult};

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer(dir: &Path, name: &str) -> CliResult<(csv::Writer<File>, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(&path)?;
    Ok((w, path))
}

fn write_rows(dir: &Path, name: &str, header: &[String], rows: &[Vec<f64>]) -> CliResult<PathBuf> {
    let (mut w, path) = csv_writer(dir, name)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(path)
}

pub struct SimulateOutput {
    pub result: SimulationResult,
    pub files: Vec<PathBuf>,
}

pub fn simulate(cfg: &ScenarioConfig, out: &Path, dump_field: bool) -> CliResult<SimulateOutput> {
    let spec = cfg.to_spec()?;
    let result = match cfg.solver.method {
        Method::Renewal => solve_renewal(&spec)?,
        Method::Upwind => upwind_oracle(&spec)?,
    };
    let n = result.dim;
    let every = cfg.outputs.every;
    let levels: Vec<usize> = (0..result.time.len()).step_by(every).collect();

    let mut header = vec!["t".to_string(), "norm".to_string()];
    header.extend((0..n).map(|i| format!("b{i}")));
    let rows: Vec<Vec<f64>> = levels
        .iter()
        .map(|&m| {
            let mut row = vec![result.time.node(m), result.norms[m]];
            row.extend_from_slice(result.births.at(m));
            row
        })
        .collect();
    let mut files = vec![write_rows(out, &cfg.outputs.simulate, &header, &rows)?];

    if dump_field || cfg.outputs.dump_field {
        let (mut w, path) = csv_writer(out, &cfg.outputs.field)?;
        let mut header = vec!["t".to_string(), "a".to_string()];
        header.extend((0..n).map(|i| format!("u{i}")));
        w.write_record(&header)?;
        for &m in &levels {
            let t = fmt_f64(result.time.node(m));
            for k in 0..result.age.len() {
                let mut rec = vec![t.clone(), fmt_f64(result.age.node(k))];
                rec.extend(result.value(m, k).iter().map(|v| fmt_f64(*v)));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        files.push(path);
    }
    Ok(SimulateOutput { result, files })
}

pub struct SpectrumOutput {
    pub report: SpectralReport,
    pub files: Vec<PathBuf>,
}

pub fn spectrum(cfg: &ScenarioConfig, out: &Path) -> CliResult<SpectrumOutput> {
    let spec = cfg.to_spec()?;
    let report = stability_report(&spec)?;
    let rows: Vec<Vec<f64>> = report
        .lotka_roots
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i as f64, *r])
        .collect();
    let (mut w, path) = csv_writer(out, &cfg.outputs.roots)?;
    w.write_record(["index", "root"])?;
    for row in &rows {
        w.write_record([format!("{}", row[0] as usize), fmt_f64(row[1])])?;
    }
    w.flush()?;
    Ok(SpectrumOutput {
        report,
        files: vec![path],
    })
}

pub struct DysonOutput {
    /// `sup_t ‖S_n(t)‖` for `n = 0..=order`.
    pub term_sup: Vec<f64>,
    /// `sup_t ‖W(t) − Σ_{k≤n} S_k(t)‖` for `n = 0..=order`.
    pub residual_sup: Vec<f64>,
    /// Fitted per-order ratio of the residual, when it is defined.
    pub residual_ratio: Option<f64>,
    pub files: Vec<PathBuf>,
}

fn dyson_setup(cfg: &ScenarioConfig, grid: &TimeGrid) -> CliResult<(DiamondKernel, LinearMap, Vec<DMatrix<f64>>)> {
    match &cfg.classical {
        Some(c) => {
            let (a, l) = c.matrices()?;
            let kernel = DiamondKernel::classical_generator(a.clone())?;
            let exact = SemigroupPath::from_generator(&a + &l)?.sample_uniform(grid.steps(), grid.dt())?;
            Ok((kernel, l, exact))
        }
        None => {
            let spec = cfg.to_spec()?;
            let kernel = DiamondKernel::age_model(spec.family().clone(), spec.p())?;
            let delta = mr_delta_estimate(&kernel, grid, cfg.solver.probes, cfg.solver.seed)?;
            let kernel = kernel.with_delta(delta);
            let l = spec.kernel().ambient_map();
            let w = perturbed_semigroup(&kernel, &l, grid, cfg.solver.tol)?;
            let values = w.path.sample_uniform(grid.steps(), grid.dt())?;
            Ok((kernel, l, values))
        }
    }
}

pub fn dyson(cfg: &ScenarioConfig, order: usize, horizon: Option<f64>, out: &Path) -> CliResult<DysonOutput> {
    let horizon = horizon.unwrap_or(cfg.grid.t_end);
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(CliError::config(format!("horizon must be positive, got {horizon}")));
    }
    let grid = TimeGrid::new(horizon, cfg.grid.dt).map_err(CliError::config)?;
    let (kernel, l, w) = dyson_setup(cfg, &grid)?;
    let terms = dyson_terms(&kernel, &l, order, &grid)?;

    let mut term_sup = vec![0.0f64; order + 1];
    let mut residual_sup = vec![0.0f64; order + 1];
    let mut rows = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let mut row = vec![grid.node(k)];
        let mut partial = DMatrix::zeros(w[k].nrows(), w[k].ncols());
        for (n, term) in terms.iter().enumerate() {
            let s = term.path.at(k);
            let nrm = kernel.map_norm(s);
            term_sup[n] = term_sup[n].max(nrm);
            partial += s;
            residual_sup[n] = residual_sup[n].max(kernel.map_norm(&(&w[k] - &partial)));
            row.push(nrm);
        }
        row.push(kernel.map_norm(&(&w[k] - &partial)));
        rows.push(row);
    }
    let mut header = vec!["t".to_string()];
    header.extend((0..=order).map(|n| format!("s{n}")));
    header.push("residual".into());
    let main = write_rows(out, &cfg.outputs.dyson, &header, &rows)?;

    let order_rows: Vec<Vec<f64>> = (0..=order)
        .map(|n| vec![n as f64, term_sup[n], residual_sup[n]])
        .collect();
    let (mut wtr, orders) = csv_writer(out, &cfg.outputs.dyson_orders)?;
    wtr.write_record(["order", "term_sup", "residual_sup"])?;
    for r in &order_rows {
        wtr.write_record([format!("{}", r[0] as usize), fmt_f64(r[1]), fmt_f64(r[2])])?;
    }
    wtr.flush()?;

    let idx: Vec<f64> = (0..=order).map(|n| n as f64).collect();
    let residual_ratio = if order >= 2 {
        growth_fit(&idx, &residual_sup, 1.0).ok().map(|f| f.rate.exp())
    } else {
        None
    };
    Ok(DysonOutput {
        term_sup,
        residual_sup,
        residual_ratio,
        files: vec![main, orders],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanMode {
    Imaginary,
    Sector,
    Region,
}

impl std::str::FromStr for ScanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "imaginary" => Ok(Self::Imaginary),
            "sector" => Ok(Self::Sector),
            "region" => Ok(Self::Region),
            other => Err(format!("unknown scan mode {other:?} (imaginary|sector|region)")),
        }
    }
}

/// Parses `LO:HI`.
pub fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("window {s:?} is not LO:HI"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("window lower end: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("window upper end: {e}"))?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(format!("window must satisfy 0 < LO < HI, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub mode: ScanMode,
    pub window: (f64, f64),
    pub samples: usize,
    /// Real part of the imaginary-axis path; chosen inside the resolvent
    /// half-plane when absent.
    pub shift: Option<f64>,
    pub theta: f64,
    pub region_c: f64,
    pub region_beta: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            mode: ScanMode::Imaginary,
            window: (10.0, 1e3),
            samples: 30,
            shift: None,
            theta: 0.0,
            region_c: 0.0,
            region_beta: 0.1,
        }
    }
}

pub struct ScanOutput {
    pub scan: ResolventScan,
    pub files: Vec<PathBuf>,
}

pub fn scan(cfg: &ScenarioConfig, opts: &ScanOptions, out: &Path) -> CliResult<ScanOutput> {
    let (op, omega): (Box<dyn ResolventOperator>, f64) = match &cfg.classical {
        Some(c) => {
            let (a, _) = c.matrices()?;
            (Box::new(MatrixResolvent::new(a)?), f64::NEG_INFINITY)
        }
        None => {
            let spec = cfg.to_spec()?;
            let family = Arc::clone(spec.family());
            let omega = family.omega();
            (Box::new(AgeResolvent::new(family, spec.p())?), omega)
        }
    };
    let path = match opts.mode {
        ScanMode::Imaginary => ScanPath::Imaginary {
            shift: opts.shift.unwrap_or(if omega < 0.0 { 0.0 } else { omega + 1.0 }),
        },
        ScanMode::Sector => ScanPath::Sector { theta: opts.theta },
        ScanMode::Region => ScanPath::Region {
            c: opts.region_c,
            beta: opts.region_beta,
        },
    };
    let scan = resolvent_decay_scan(op.as_ref(), path, opts.window, opts.samples)?;
    let rows: Vec<Vec<f64>> = scan.samples.iter().map(|(l, n)| vec![l.re, l.im, *n]).collect();
    let file = write_rows(out, &cfg.outputs.scan, &["re".into(), "im".into(), "norm".into()], &rows)?;
    Ok(ScanOutput {
        scan,
        files: vec![file],
    })
}

pub fn describe_scan(scan: &ResolventScan, w: &mut impl Write) -> std::io::Result<()> {
    let class = match scan.class {
        DecayClass::AnalyticType => "analytic-type",
        DecayClass::CrandallPazy => "crandall-pazy",
        DecayClass::PazyIley => "pazy-iley",
        DecayClass::Undetermined => "undetermined",
    };
    writeln!(w, "{:<22} {}", "path", scan.path.name())?;
    writeln!(w, "{:<22} {}", "samples", scan.samples.len())?;
    writeln!(w, "{:<22} {}", "beta_hat", fmt_f64(scan.beta_hat))?;
    writeln!(w, "{:<22} {}", "band (2 se)", fmt_f64(scan.band))?;
    writeln!(w, "{:<22} {class}", "class")?;
    if let Some(hy) = scan.hille_yosida_failure {
        writeln!(w, "{:<22} {hy}", "hille-yosida failure")?;
    }
    Ok(())
}
