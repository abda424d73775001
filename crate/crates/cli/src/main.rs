use std::io::{self, Write};
use std::path::PathBuf;
use std::process;

use agepert_cli::commands::{self, ScanMode, ScanOptions};
use agepert_cli::config::{self, ScenarioConfig};
use agepert_cli::verify::{self, VerifyOptions};
use agepert_cli::{CliError, CliResult, ExitCode};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "agepert", version, about = "Perturbation diagnostics for age-structured population models")]
struct Cli {
    /// Scenario file, or builtin:NAME (example-a, benchmark, classical-scalar, classical-diag).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Directory for CSV output.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides solver.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the model and write t, norm and births per time step.
    Simulate {
        /// Also write the full (t, a) field.
        #[arg(long)]
        dump_field: bool,
    },
    /// Characteristic roots, growth-bound transfer and stability classification.
    Spectrum,
    /// Norms of the Dyson-Phillips terms and the truncation residual.
    Dyson {
        #[arg(long, default_value_t = 5)]
        order: usize,
        /// Time horizon; defaults to grid.t_end.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Resolvent norms along a path and the fitted decay exponent.
    Scan {
        #[arg(long, default_value = "imaginary")]
        mode: ScanMode,
        /// Path parameter range LO:HI.
        #[arg(long, default_value = "10:1000", value_parser = commands::parse_window)]
        window: (f64, f64),
        #[arg(long, default_value_t = 30)]
        samples: usize,
        /// Real part of the imaginary-axis path.
        #[arg(long, allow_hyphen_values = true)]
        shift: Option<f64>,
        /// Angle of the sector ray.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        region_c: f64,
        #[arg(long, default_value_t = 0.1)]
        region_beta: f64,
    },
    /// Run the invariant suite.
    Verify {
        /// Corrupt one propagator step so the cocycle check fails.
        #[arg(long)]
        break_cocycle: bool,
    },
}

fn load(cli: &Cli, default: &str) -> CliResult<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(src) => ScenarioConfig::load(src)?,
        None => config::builtin(default)?,
    };
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Simulate { dump_field } => {
            let cfg = load(&cli, "example-a")?;
            let res = commands::simulate(&cfg, &cli.out, *dump_field)?;
            for f in &res.files {
                writeln!(out, "wrote {}", f.display())?;
            }
        }
        Command::Spectrum => {
            let cfg = load(&cli, "benchmark")?;
            let res = commands::spectrum(&cfg, &cli.out)?;
            write!(out, "{}", res.report)?;
            for f in &res.files {
                writeln!(out, "wrote {}", f.display())?;
            }
        }
        Command::Dyson { order, horizon } => {
            let cfg = load(&cli, "classical-scalar")?;
            let res = commands::dyson(&cfg, *order, *horizon, &cli.out)?;
            writeln!(out, "{:<8} {:>24} {:>24}", "order", "sup |S_n|", "sup residual")?;
            for (n, (s, r)) in res.term_sup.iter().zip(&res.residual_sup).enumerate() {
                writeln!(out, "{n:<8} {:>24} {:>24}", commands::fmt_f64(*s), commands::fmt_f64(*r))?;
            }
            if let Some(q) = res.residual_ratio {
                writeln!(out, "residual ratio per order: {}", commands::fmt_f64(q))?;
            }
            for f in &res.files {
                writeln!(out, "wrote {}", f.display())?;
            }
        }
        Command::Scan {
            mode,
            window,
            samples,
            shift,
            theta,
            region_c,
            region_beta,
        } => {
            let cfg = load(&cli, "classical-diag")?;
            let opts = ScanOptions {
                mode: *mode,
                window: *window,
                samples: *samples,
                shift: *shift,
                theta: *theta,
                region_c: *region_c,
                region_beta: *region_beta,
            };
            let res = commands::scan(&cfg, &opts, &cli.out)?;
            commands::describe_scan(&res.scan, &mut out)?;
            for f in &res.files {
                writeln!(out, "wrote {}", f.display())?;
            }
        }
        Command::Verify { break_cocycle } => {
            let scenario = match &cli.config {
                Some(src) => Some(ScenarioConfig::load(src)?),
                None => None,
            };
            let opts = VerifyOptions {
                seed: cli.seed.or(scenario.as_ref().map(|c| c.solver.seed)).unwrap_or(0),
                break_cocycle: *break_cocycle,
                scenario,
            };
            let results = verify::run(&opts, &mut out)?;
            out.flush()?;
            let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(CliError::Verification(failed.join(", ")));
            }
        }
    }
    out.flush()?;
    Ok(ExitCode::Ok)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::ConfigError.code() } else { 0 };
            let _ = e.print();
            process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("agepert: {e}");
            e.exit_code()
        }
    };
    process::exit(code.code());
}
