//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use agepert::age::{
    discontinuity_ages, field_gap, solve_renewal, stability_report, upwind_oracle, AgeModelSpec, AgeResolvent,
    BirthRate, InitialData, MaxAge, ModelInputs,
};
use agepert::dyson::{dyson_terms, perturbed_semigroup, DiamondKernel};
use agepert::linalg::op_norm;
use agepert::semigroup::{build_evolution_family, matrix_semigroup, AgeCoefficients};
use agepert::spectral::{
    characteristic, growth_fit, resolvent_decay_scan, subconvolutive_bound, Classification, MatrixResolvent,
    ScanPath,
};
use agepert::TimeGrid;
use agepert_cli::verify::{self, bisect_lotka_root, random_contraction, VerifyOptions};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scalar(mu: f64, beta: f64, c: f64, da: f64, t_end: f64) -> AgeModelSpec {
    AgeModelSpec::new(ModelInputs {
        max_age: MaxAge::Finite(c),
        p: 1.0,
        coefficients: AgeCoefficients::scalar_mortality(mu, 1),
        birth: BirthRate::scalar(beta),
        initial: InitialData::Constant(vec![1.0]),
        da,
        t_end,
    })
    .expect("valid scalar model")
}

fn fitted(spec: &AgeModelSpec) -> f64 {
    let sim = solve_renewal(spec).expect("renewal solve");
    let times: Vec<f64> = sim.time.nodes().collect();
    growth_fit(&times, &sim.norms, 0.5).expect("growth fit").rate
}

fn benchmark() -> Outcome {
    let start = Instant::now();
    let spec = scalar(0.2, 0.5, 4.0, 1.0 / 200.0, 40.0);
    let rate = fitted(&spec);
    let elapsed = start.elapsed();
    let oracle = bisect_lotka_root(0.2, 0.5, 4.0);
    let gap = (rate - oracle).abs();
    outcome(
        gap <= 5e-3 && elapsed <= Duration::from_secs(10),
        format!(
            "fitted {rate:.6} vs root {oracle:.6}, |gap| = {gap:.2e} <= 5e-3, runtime {:.2}s <= 10s",
            elapsed.as_secs_f64()
        ),
    )
}

fn neutral() -> Outcome {
    // βc = 1 with μ = 0
    let rate = fitted(&scalar(0.0, 0.25, 4.0, 1.0 / 200.0, 40.0));
    outcome(rate.abs() <= 1e-3, format!("|fitted| = {:.2e} <= 1e-3", rate.abs()))
}

fn classification() -> Outcome {
    let c = 4.0;
    let stable_spec = scalar(1.0, 0.1, c, 0.01, 20.0);
    let stable = stability_report(&stable_spec).expect("report");
    let sim = solve_renewal(&stable_spec).expect("renewal");
    let monotone = sim
        .time
        .nodes()
        .enumerate()
        .skip(1)
        .filter(|(_, t)| *t > c)
        .all(|(m, _)| sim.norms[m] < sim.norms[m - 1]);

    let unstable_spec = scalar(0.1, 2.0, c, 0.01, 10.0);
    let unstable = stability_report(&unstable_spec).expect("report");
    let oracle = bisect_lotka_root(0.1, 2.0, c);
    // sign checks of the characteristic function on both sides of the root
    let g = |l: f64| characteristic(unstable_spec.family(), unstable_spec.kernel(), l).expect("characteristic");
    let brackets = g(0.0) * g(2.0 * oracle) < 0.0;
    let s = unstable.s_hat.unwrap_or(f64::NAN);
    let pass = stable.classification == Classification::Stable
        && monotone
        && unstable.classification == Classification::Unstable
        && s > 0.0
        && oracle > 0.0
        && brackets;
    outcome(
        pass,
        format!(
            "mu=1,beta=0.1: {} (monotone after c: {monotone}); mu=0.1,beta=2: {} with root {s:.6} (bisection {oracle:.6})",
            stable.classification, unstable.classification
        ),
    )
}

fn dyson_fixed_point() -> Outcome {
    let grid = TimeGrid::new(1.0, 2.5e-4).expect("grid");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let a = random_contraction(&mut rng);
        let l = random_contraction(&mut rng);
        let kernel = DiamondKernel::classical_generator(a.clone()).expect("kernel");
        let w = perturbed_semigroup(&kernel, &l, &grid, 1e-12).expect("fixed point");
        let exact = matrix_semigroup(&(&a + &l), 1.0).expect("exp");
        worst = worst.max(op_norm(&(w.path.eval(1.0).expect("eval") - exact)));
    }
    let (a, l) = (-1.0f64, 0.5f64);
    let grid = TimeGrid::new(1.0, 1e-3).expect("grid");
    let kernel = DiamondKernel::classical_generator(DMatrix::from_element(1, 1, a)).expect("kernel");
    let terms = dyson_terms(&kernel, &DMatrix::from_element(1, 1, l), 9, &grid).expect("terms");
    let mut trunc: f64 = 0.0;
    for (k, t) in grid.nodes().enumerate() {
        let sum: f64 = terms.iter().map(|s| s.path.at(k)[(0, 0)]).sum();
        trunc = trunc.max((sum - ((a + l) * t).exp()).abs());
    }
    outcome(
        worst <= 1e-7 && trunc <= 1e-7,
        format!("random 2x2: {worst:.2e} <= 1e-7; scalar, 10 terms: {trunc:.2e} <= 1e-7"),
    )
}

fn identity_suites() -> Outcome {
    let results = verify::evaluate(&VerifyOptions::default());
    let wanted = [
        "semigroup law on a 10x10 lattice",
        "integrated semigroup composition identity",
        "T(t)S(s) = S(t+s) - S(t)",
        "Dyson-Phillips convolution identity, n <= 3",
        "Laplace transform of the series terms, n <= 2",
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for name in wanted {
        match results.iter().find(|r| r.name == name) {
            Some(r) => {
                pass &= r.pass;
                parts.push(format!("{name}: {}", r.detail));
            }
            None => {
                pass = false;
                parts.push(format!("{name}: missing"));
            }
        }
    }
    // cocycle against the closed form e^{−(a−s)} I
    let fam = build_evolution_family(&AgeCoefficients::scalar_mortality(1.0, 2), 4.0, 0.01).expect("family");
    let triples: Vec<(f64, f64, f64)> = (0..8).map(|i| (0.1 * i as f64 + 2.3, 0.1 * i as f64 + 1.05, 0.1 * i as f64)).collect();
    let mut cocycle = fam.cocycle_residual(&triples).expect("cocycle");
    for &(a, _, s) in &triples {
        let exact = DMatrix::<f64>::identity(2, 2) * (-(a - s)).exp();
        cocycle = cocycle.max(op_norm(&(fam.eval(a, s).expect("eval") - exact)));
    }
    pass &= cocycle <= 1e-9;
    parts.push(format!("cocycle law: {cocycle:.2e} <= 1e-9"));
    outcome(pass, parts.join("; "))
}

fn renewal_upwind() -> Outcome {
    let mut gaps = Vec::new();
    for da in [0.04, 0.02, 0.01, 0.005] {
        let spec = scalar(0.2, 0.5, 4.0, da, 8.0);
        let a = solve_renewal(&spec).expect("renewal");
        let b = upwind_oracle(&spec).expect("upwind");
        let jumps = discontinuity_ages(&spec, a.births.at(0), 8.0);
        gaps.push(field_gap(&a, &b, a.time.steps(), &jumps, 4.0 * da));
    }
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    outcome(
        ratios.iter().all(|r| (1.6..=2.4).contains(r)),
        format!("error ratios {ratios:.3?} in [1.6, 2.4]"),
    )
}

fn hille_yosida() -> Outcome {
    let family = Arc::new(build_evolution_family(&AgeCoefficients::scalar_mortality(1.0, 1), 50.0, 0.01).expect("family"));
    let r = AgeResolvent::new(family, 2.0).expect("resolvent");
    let scan = resolvent_decay_scan(&r, ScanPath::Sector { theta: 0.0 }, (10.0, 1e3), 30).expect("scan");
    let slope = -scan.beta_hat;
    let increasing = scan.samples.windows(2).all(|w| w[1].0.re * w[1].1 > w[0].0.re * w[0].1);
    outcome(
        (slope + 0.5).abs() <= 0.05 && increasing && scan.hille_yosida_failure == Some(true),
        format!("slope {slope:.4} = -0.5 +- 0.05, lambda*|R| increasing: {increasing}"),
    )
}

fn decay_scan() -> Outcome {
    let r = MatrixResolvent::new(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]))).expect("resolvent");
    let scan = resolvent_decay_scan(&r, ScanPath::Imaginary { shift: 0.0 }, (10.0, 1e3), 40).expect("scan");
    outcome(
        (scan.beta_hat - 1.0).abs() <= 0.02,
        format!("beta_hat {:.4} = 1 +- 0.02", scan.beta_hat),
    )
}

fn certificates() -> Outcome {
    // scalar a = ω, l = 1: the Dyson terms are t^j e^{ωt}/j!
    let omega = -0.5;
    let gamma = omega + 0.1;
    let grid = TimeGrid::new(20.0, 0.01).expect("grid");
    let kernel = DiamondKernel::classical_generator(DMatrix::from_element(1, 1, omega)).expect("kernel");
    let terms = dyson_terms(&kernel, &DMatrix::from_element(1, 1, 1.0), 4, &grid).expect("terms");
    let profiles: Vec<Vec<f64>> = terms
        .iter()
        .map(|s| s.path.values().iter().map(|m| m[(0, 0)].abs()).collect())
        .collect();
    let cert = match subconvolutive_bound(&profiles, grid.dt(), gamma) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("certificate failed: {e}")),
    };
    let mut ok = cert.m.iter().all(|m| m.is_finite());
    for (j, f) in profiles.iter().enumerate() {
        for (k, t) in grid.nodes().enumerate() {
            ok &= f[k] <= cert.m[j] * (gamma * t).exp() * (1.0 + 1e-12);
        }
    }
    outcome(ok, format!("M_j = {:.4?}, re-check at {} nodes", cert.m, grid.len()))
}

fn verify_command() -> Outcome {
    let run = || {
        let start = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_agepert"))
            .args(["verify", "--seed", "11"])
            .output()
            .expect("run agepert verify");
        (out, start.elapsed())
    };
    let (a, ta) = run();
    let (b, tb) = run();
    let green = a.status.code() == Some(0) && b.status.code() == Some(0);
    let same = a.stdout == b.stdout;
    let slowest = ta.max(tb);
    outcome(
        green && same && slowest <= Duration::from_secs(60),
        format!(
            "exit codes {:?}/{:?}, identical output: {same}, runtime {:.2}s <= 60s",
            a.status.code(),
            b.status.code(),
            slowest.as_secs_f64()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("scalar benchmark growth rate", benchmark),
        ("neutral case", neutral),
        ("stability classification", classification),
        ("Dyson fixed point", dyson_fixed_point),
        ("identity suites", identity_suites),
        ("renewal/upwind convergence", renewal_upwind),
        ("Hille-Yosida failure diagnostic", hille_yosida),
        ("resolvent decay scan", decay_scan),
        ("subconvolutive certificates", certificates),
        ("verify command", verify_command),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
