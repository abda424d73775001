//! The invariant suite behind `agepert verify`, reported as TAP lines.

use std::io::Write;
use std::sync::Arc;

use agepert::age::{
    discontinuity_ages, field_gap, solve_renewal, upwind_oracle, AgeModelSpec, BirthRate, InitialData, MaxAge,
    ModelInputs,
};
use agepert::dyson::{diamond, dyson_terms, perturbed_semigroup, DiamondKernel, TimePath};
use agepert::linalg::{cop_norm, log_norm, op_norm, to_complex};
use agepert::semigroup::{
    build_evolution_family, matrix_semigroup, semigroup_law_residual, AgeCoefficients, IntegratedPath, IntegratedSemigroupPath,
    SemigroupPath,
};
use agepert::spectral::{
    characteristic, classify, growth_fit, lotka_roots, perturbed_resolvent, resolvent_decay_scan,
    subconvolutive_bound, transfer_report, GrowthData, Hypotheses, MatrixResolvent, ResolventOperator, ScanPath,
    TransferMode,
};
use agepert::{CMat, TimeGrid, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ScenarioConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Corrupt one step of the evolution family used by the cocycle check.
    pub break_cocycle: bool,
    pub scenario: Option<ScenarioConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

type CheckFn = Box<dyn Fn() -> agepert::Result<(bool, String)>>;

fn bound(value: f64, limit: f64) -> (bool, String) {
    (value <= limit, format!("{value:.3e} <= {limit:.0e}"))
}

fn within(value: f64, lo: f64, hi: f64, what: &str) -> (bool, String) {
    ((lo..=hi).contains(&value), format!("{what} {value:.4} in [{lo}, {hi}]"))
}

fn all(parts: Vec<(bool, String)>) -> (bool, String) {
    let pass = parts.iter().all(|p| p.0);
    let detail = parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; ");
    (pass, detail)
}

fn generators() -> Vec<DMatrix<f64>> {
    vec![
        DMatrix::from_element(1, 1, -0.7),
        DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, -0.2, -1.0]),
    ]
}

fn pairs() -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
    vec![
        (DMatrix::from_element(1, 1, -1.0), DMatrix::from_element(1, 1, 0.5)),
        (
            DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, -0.2, -1.0]),
            DMatrix::from_row_slice(2, 2, &[0.2, -0.4, 0.1, 0.3]),
        ),
    ]
}

/// Random 2×2 matrix with spectral norm at most 1.
pub fn random_contraction(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
    let n = op_norm(&m);
    if n > 1.0 {
        m / n
    } else {
        m
    }
}

fn scalar_model(mu: f64, beta: f64, c: f64, da: f64, t_end: f64) -> agepert::Result<AgeModelSpec> {
    AgeModelSpec::new(ModelInputs {
        max_age: MaxAge::Finite(c),
        p: 1.0,
        coefficients: AgeCoefficients::scalar_mortality(mu, 1),
        birth: BirthRate::scalar(beta),
        initial: InitialData::Constant(vec![1.0]),
        da,
        t_end,
    })
}

/// Root of `β(1 − e^{−(λ+μ)c})/(λ+μ) = 1` by bisection.
pub fn bisect_lotka_root(mu: f64, beta: f64, c: f64) -> f64 {
    let k = |l: f64| {
        let x = l + mu;
        if x.abs() < 1e-14 {
            beta * c
        } else {
            -beta * (-x * c).exp_m1() / x
        }
    };
    let (mut lo, mut hi) = (-mu - 10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if k(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn integrated(a: &DMatrix<f64>, h: f64, t_end: f64) -> agepert::Result<IntegratedSemigroupPath> {
    let n = a.nrows();
    let mu = 2.0;
    let r_mu = (DMatrix::identity(n, n) * mu - a)
        .try_inverse()
        .expect("2 is in the resolvent set of the test generators");
    let path = SemigroupPath::from_generator(a.clone())?;
    IntegratedSemigroupPath::classical(&path, &r_mu, mu, TimeGrid::new(t_end, h)?)
}

fn checks(opts: &VerifyOptions) -> Vec<(String, CheckFn)> {
    let seed = opts.seed;
    let break_cocycle = opts.break_cocycle;
    let mut list: Vec<(String, CheckFn)> = vec![
        (
            "semigroup law on a 10x10 lattice".into(),
            Box::new(|| {
                let mut worst: f64 = 0.0;
                let lattice: Vec<(f64, f64)> = (0..10)
                    .flat_map(|i| (0..10).map(move |j| (0.17 * i as f64, 0.23 * j as f64)))
                    .collect();
                for a in generators() {
                    worst = worst.max(semigroup_law_residual(&SemigroupPath::from_generator(a)?, &lattice)?);
                }
                Ok(bound(worst, 1e-9))
            }),
        ),
        (
            "cocycle law (constant coefficients)".into(),
            Box::new(move || {
                let mut fam = build_evolution_family(&AgeCoefficients::scalar_mortality(1.0, 2), 4.0, 0.01)?;
                if break_cocycle {
                    fam = fam.with_corrupted_step(137, 1.0 + 1e-3)?;
                }
                let triples: Vec<(f64, f64, f64)> = (0..8)
                    .map(|i| {
                        let s = 0.1 * i as f64;
                        (s + 2.3, s + 1.05, s)
                    })
                    .collect();
                Ok(bound(fam.cocycle_residual(&triples)?, 1e-8))
            }),
        ),
        (
            "cocycle law (integrated family)".into(),
            Box::new(|| {
                let fam = build_evolution_family(
                    &AgeCoefficients::from_fn(1, |a| DMatrix::from_element(1, 1, -a)),
                    3.0,
                    0.01,
                )?;
                let triples: Vec<(f64, f64, f64)> =
                    (0..5).map(|i| (0.1 * i as f64 + 2.3, 0.1 * i as f64 + 1.05, 0.1 * i as f64)).collect();
                let mut closed: f64 = 0.0;
                for &(a, _, s) in &triples {
                    closed = closed.max((fam.eval(a, s)?[(0, 0)] - (-(a * a - s * s) / 2.0).exp()).abs());
                }
                Ok(all(vec![bound(fam.cocycle_residual(&triples)?, 1e-6), bound(closed, 1e-6)]))
            }),
        ),
        (
            "integrated semigroup composition identity".into(),
            Box::new(|| {
                let h = 1e-3;
                let mut worst: f64 = 0.0;
                for a in generators() {
                    let s = integrated(&a, h, 2.0)?;
                    for i in [250usize, 500, 1000] {
                        for j in [250usize, 750, 1000] {
                            let samples: Vec<DMatrix<f64>> = (0..=i)
                                .map(|r| Ok(s.eval((r + j) as f64 * h)? - s.eval(r as f64 * h)?))
                                .collect::<agepert::Result<_>>()?;
                            let mut integral = (&samples[0] + &samples[i]) * (0.5 * h);
                            for m in &samples[1..i] {
                                integral += m * h;
                            }
                            let lhs = s.eval(i as f64 * h)? * s.eval(j as f64 * h)?;
                            worst = worst.max(op_norm(&(lhs - integral)));
                        }
                    }
                }
                Ok(bound(worst, 1e-6))
            }),
        ),
        (
            "T(t)S(s) = S(t+s) - S(t)".into(),
            Box::new(|| {
                let h = 1e-3;
                let mut worst: f64 = 0.0;
                for a in generators() {
                    let s = integrated(&a, h, 2.0)?;
                    let path = SemigroupPath::from_generator(a.clone())?;
                    for i in (1..=4).map(|k| k * 250) {
                        for j in (1..=4).map(|k| k * 250) {
                            let (t, r) = (i as f64 * h, j as f64 * h);
                            let lhs = path.eval(t)? * s.eval(r)?;
                            let rhs = s.eval(t + r)? - s.eval(t)?;
                            worst = worst.max(op_norm(&(lhs - rhs)));
                        }
                    }
                }
                Ok(bound(worst, 1e-6))
            }),
        ),
        (
            "resolvent identity".into(),
            Box::new(|| {
                let mut worst: f64 = 0.0;
                let lams = [C64::new(0.5, 1.0), C64::new(2.0, -3.0), C64::new(0.1, 0.0)];
                for a in generators() {
                    let r = MatrixResolvent::new(a)?;
                    for l in lams {
                        for m in lams {
                            let rl = r.resolvent(l)?;
                            let rm = r.resolvent(m)?;
                            worst = worst.max(cop_norm(&(&rl - &rm - (&rl * &rm) * (m - l))));
                        }
                    }
                }
                Ok(bound(worst, 1e-7))
            }),
        ),
        (
            "Dyson-Phillips convolution identity, n <= 3".into(),
            Box::new(|| {
                let grid = TimeGrid::new(2.0, 1e-3)?;
                let mut worst: f64 = 0.0;
                for (a, l) in pairs() {
                    let terms = dyson_terms(&DiamondKernel::classical_generator(a)?, &l, 3, &grid)?;
                    for n in 0..=3 {
                        for i in (0..=1000).step_by(250) {
                            for j in (0..=1000).step_by(250) {
                                let lhs = terms[n].path.at(i + j);
                                let mut rhs = DMatrix::zeros(lhs.nrows(), lhs.ncols());
                                for k in 0..=n {
                                    rhs += terms[k].path.at(i) * terms[n - k].path.at(j);
                                }
                                worst = worst.max(op_norm(&(lhs - rhs)));
                            }
                        }
                    }
                }
                Ok(bound(worst, 1e-6))
            }),
        ),
        (
            "perturbed semigroup fixed equation".into(),
            Box::new(|| {
                let tol = 1e-10;
                let grid = TimeGrid::new(2.0, 1e-3)?;
                let mut worst: f64 = 0.0;
                for (a, l) in pairs() {
                    let kernel = DiamondKernel::classical_generator(a)?;
                    let w = perturbed_semigroup(&kernel, &l, &grid, tol)?;
                    let wp = TimePath::new(grid, w.path.sample_uniform(grid.steps(), grid.dt())?)?;
                    let conv = diamond(&kernel, &wp.left_mul(&l)?)?;
                    let base = kernel.base_path(&grid)?;
                    for k in 0..grid.len() {
                        worst = worst.max(op_norm(&(wp.at(k) - base.at(k) - conv.at(k))));
                    }
                }
                Ok(bound(worst, 10.0 * tol + 1e-12))
            }),
        ),
        (
            "perturbed semigroup equals exp(t(A+L)) for random A, L".into(),
            Box::new(move || {
                let grid = TimeGrid::new(1.0, 2.5e-4)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut worst: f64 = 0.0;
                for _ in 0..2 {
                    let a = random_contraction(&mut rng);
                    let l = random_contraction(&mut rng);
                    let w = perturbed_semigroup(&DiamondKernel::classical_generator(a.clone())?, &l, &grid, 1e-12)?;
                    worst = worst.max(op_norm(&(w.path.eval(1.0)? - matrix_semigroup(&(&a + &l), 1.0)?)));
                }
                Ok(bound(worst, 1e-7))
            }),
        ),
        (
            "diamond splitting at intermediate times".into(),
            Box::new(|| {
                let dt = 1e-3;
                let grid = TimeGrid::new(2.0, dt)?;
                let a = DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, -0.2, -1.0]);
                let path = SemigroupPath::from_generator(a.clone())?;
                let kernel = DiamondKernel::classical_generator(a)?;
                let f = TimePath::from_fn(grid, |t| DMatrix::from_column_slice(2, 1, &[t.sin(), (2.0 * t).cos()]))?;
                let whole = diamond(&kernel, &f)?;
                let mut worst: f64 = 0.0;
                for s_idx in [300usize, 800, 1200] {
                    let tail_len = grid.steps() - s_idx;
                    let shifted = TimePath::new(grid.truncated(tail_len), f.values()[s_idx..].to_vec())?;
                    let tail = diamond(&kernel, &shifted)?;
                    for r in (0..=tail_len).step_by(100) {
                        let rhs = path.eval(r as f64 * dt)? * whole.at(s_idx) + tail.at(r);
                        worst = worst.max(op_norm(&(whole.at(s_idx + r) - rhs)));
                    }
                }
                Ok(bound(worst, 1e-6))
            }),
        ),
        (
            "Laplace transform of the series terms, n <= 2".into(),
            Box::new(|| {
                let dt = 2e-3;
                let grid = TimeGrid::new(40.0, dt)?;
                let mut worst: f64 = 0.0;
                for (a, l) in pairs() {
                    let r = MatrixResolvent::new(a.clone())?;
                    let terms = dyson_terms(&DiamondKernel::classical_generator(a.clone())?, &l, 2, &grid)?;
                    let lam = log_norm(&(&a + &l)).max(log_norm(&a)) + 1.5;
                    let rl = r.resolvent(C64::new(lam, 0.0))?;
                    let lc = to_complex(&l);
                    let mut expected: CMat = rl.clone();
                    for term in &terms {
                        let mut lap = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
                        for (k, t) in grid.nodes().enumerate() {
                            let w = if k == 0 || k == grid.steps() { 0.5 * dt } else { dt };
                            lap += term.path.at(k) * (w * (-lam * t).exp());
                        }
                        worst = worst.max(cop_norm(&(to_complex(&lap) - &expected)));
                        expected = &rl * &lc * expected;
                    }
                }
                Ok(bound(worst, 1e-5))
            }),
        ),
        (
            "series terms decay geometrically on the contraction window".into(),
            Box::new(|| {
                let mut parts = Vec::new();
                for (a, l) in pairs() {
                    let grid = TimeGrid::new(2.0, 1e-3)?;
                    let w = perturbed_semigroup(&DiamondKernel::classical_generator(a)?, &(l * 6.0), &grid, 1e-12)?;
                    let norms: Vec<f64> = w.term_norms.iter().copied().skip(1).filter(|v| *v > 1e-300).collect();
                    let idx: Vec<f64> = (0..norms.len()).map(|i| i as f64).collect();
                    let fitted = growth_fit(&idx, &norms, 1.0)?.rate.exp();
                    parts.push((fitted <= 1.15 * w.ratio, format!("ratio {fitted:.4} vs r {:.4}", w.ratio)));
                }
                Ok(all(parts))
            }),
        ),
        (
            "perturbed resolvent agrees with direct inversion".into(),
            Box::new(|| {
                let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.4, 0.0, -2.0]);
                let l = DMatrix::from_row_slice(2, 2, &[0.2, 0.1, -0.3, 0.1]);
                let r = MatrixResolvent::new(a.clone())?;
                let direct = MatrixResolvent::new(&a + &l)?;
                let mut worst: f64 = 0.0;
                for lam in [C64::new(1.0, 0.0), C64::new(0.5, 3.0), C64::new(2.0, -1.0)] {
                    worst = worst.max(cop_norm(&(perturbed_resolvent(&r, &l, lam)? - direct.resolvent(lam)?)));
                }
                let lam = C64::new(1.0, 0.7);
                let s = MatrixResolvent::new(DMatrix::from_element(1, 1, -0.5))?;
                let got = perturbed_resolvent(&s, &DMatrix::from_element(1, 1, 0.25), lam)?;
                worst = worst.max((got[(0, 0)] - 1.0 / (lam + 0.5 - 0.25)).norm());
                Ok(bound(worst, 1e-9))
            }),
        ),
        (
            "characteristic roots: residual and second-order refinement".into(),
            Box::new(|| {
                let mut roots = Vec::new();
                let mut residual: f64 = 0.0;
                for da in [0.08, 0.04, 0.02, 0.01] {
                    let spec = scalar_model(0.2, 0.5, 4.0, da, 4.0)?;
                    let r = lotka_roots(spec.family(), spec.kernel(), (-1.0, 1.0), 1e-13)?;
                    residual = residual.max(characteristic(spec.family(), spec.kernel(), r[0])?.abs());
                    roots.push(r[0]);
                }
                let moves: Vec<f64> = roots.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
                let mut parts = vec![bound(residual, 1e-13)];
                for p in moves.windows(2) {
                    parts.push(within(p[0] / p[1], 3.2, 4.8, "movement ratio"));
                }
                Ok(all(parts))
            }),
        ),
        (
            "resolvent scan of diag(-1, -2)".into(),
            Box::new(|| {
                let r = MatrixResolvent::new(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0])))?;
                let scan = resolvent_decay_scan(&r, ScanPath::Imaginary { shift: 0.0 }, (10.0, 1e3), 40)?;
                Ok(within(scan.beta_hat, 0.98, 1.02, "beta_hat"))
            }),
        ),
        (
            "subconvolutive certificates re-check at every node".into(),
            Box::new(|| {
                let (omega, dt) = (-0.5, 0.02);
                let gamma = omega + 0.1;
                let mut fact = 1.0;
                let f: Vec<Vec<f64>> = (0..4)
                    .map(|j| {
                        if j > 0 {
                            fact *= j as f64;
                        }
                        let fj = fact;
                        (0..=1000)
                            .map(|k| {
                                let t = k as f64 * dt;
                                t.powi(j) * (omega * t).exp() / fj
                            })
                            .collect()
                    })
                    .collect();
                let cert = subconvolutive_bound(&f, dt, gamma)?;
                let mut ok = cert.m.iter().all(|m| m.is_finite());
                for (j, fj) in f.iter().enumerate() {
                    for (k, v) in fj.iter().enumerate() {
                        ok &= *v <= cert.m[j] * (gamma * k as f64 * dt).exp() * (1.0 + 1e-12);
                    }
                }
                Ok((ok, format!("M = {:?}", cert.m.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>())))
            }),
        ),
        (
            "classification is a pure function of its inputs".into(),
            Box::new(|| {
                let mut ok = true;
                for (s, finite, compact) in [
                    (Some(-0.1), true, true),
                    (Some(0.2), true, true),
                    (Some(-0.1), false, true),
                    (None, false, false),
                ] {
                    let data = GrowthData {
                        omega_u: -0.3,
                        s_hat: s,
                        max_age: finite.then_some(2.0),
                    };
                    let hyp = Hypotheses {
                        finite_max_age: finite,
                        compact_perturbation: compact,
                        ..Hypotheses::default()
                    };
                    let a = transfer_report(&data, TransferMode::Essential, &hyp);
                    let b = transfer_report(&data, TransferMode::Essential, &hyp);
                    ok &= a == b && classify(s, &a) == classify(s, &b);
                }
                Ok((ok, "4 input sets".into()))
            }),
        ),
        (
            "mild solution is transported initial data above the diagonal".into(),
            Box::new(|| {
                let spec = AgeModelSpec::new(ModelInputs {
                    max_age: MaxAge::Finite(3.0),
                    p: 1.0,
                    coefficients: AgeCoefficients::from_fn(1, |a| DMatrix::from_element(1, 1, -0.2 - 0.1 * a)),
                    birth: BirthRate::scalar(0.7),
                    initial: InitialData::Custom(Arc::new(|a: f64| vec![1.0 + a.sin()])),
                    da: 0.01,
                    t_end: 2.0,
                })?;
                Ok(bound(transport_gap(&spec)?, 1e-14))
            }),
        ),
        (
            "renewal and upwind agree at first order".into(),
            Box::new(|| {
                let mut gaps = Vec::new();
                for da in [0.04, 0.02, 0.01, 0.005] {
                    let spec = scalar_model(0.2, 0.5, 4.0, da, 8.0)?;
                    let a = solve_renewal(&spec)?;
                    let b = upwind_oracle(&spec)?;
                    let jumps = discontinuity_ages(&spec, a.births.at(0), 8.0);
                    gaps.push(field_gap(&a, &b, a.time.steps(), &jumps, 4.0 * da));
                }
                Ok(all(gaps.windows(2).map(|p| within(p[0] / p[1], 1.6, 2.4, "error ratio")).collect()))
            }),
        ),
        (
            "growth rate matches the dominant root (benchmark)".into(),
            Box::new(|| {
                let spec = scalar_model(0.2, 0.5, 4.0, 1.0 / 200.0, 40.0)?;
                let sim = solve_renewal(&spec)?;
                let times: Vec<f64> = sim.time.nodes().collect();
                let rate = growth_fit(&times, &sim.norms, 0.5)?.rate;
                Ok(bound((rate - bisect_lotka_root(0.2, 0.5, 4.0)).abs(), 5e-3))
            }),
        ),
        (
            "positivity for Metzler coefficients".into(),
            Box::new(|| {
                let spec = AgeModelSpec::new(ModelInputs {
                    max_age: MaxAge::Finite(3.0),
                    p: 1.0,
                    coefficients: AgeCoefficients::from_fn(2, |a| {
                        DMatrix::from_row_slice(2, 2, &[-0.5 - 0.1 * a, 0.2, 0.1, -0.3])
                    }),
                    birth: BirthRate::Window {
                        beta: DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.2, 0.4]),
                        from: 0.5,
                        to: 2.5,
                    },
                    initial: InitialData::Window {
                        value: vec![1.0, 0.5],
                        from: 0.0,
                        to: 1.0,
                    },
                    da: 0.02,
                    t_end: 10.0,
                })?;
                let ok = solve_renewal(&spec)?.is_nonnegative() && upwind_oracle(&spec)?.is_nonnegative();
                Ok((ok, "renewal and upwind fields nonnegative".into()))
            }),
        ),
        (
            "finite maximal age: no births means extinction after c".into(),
            Box::new(|| {
                let c = 2.0;
                let sim = solve_renewal(&scalar_model(0.3, 0.0, c, 0.01, 4.0)?)?;
                let late = sim
                    .time
                    .nodes()
                    .zip(&sim.norms)
                    .filter(|(t, _)| *t > c + 1e-12)
                    .map(|(_, n)| *n)
                    .fold(0.0, f64::max);
                Ok((late == 0.0, format!("max norm after c = {late:e}")))
            }),
        ),
    ];
    if let Some(cfg) = &opts.scenario {
        let cfg = cfg.clone();
        list.push((
            format!("scenario {:?}: transport above the diagonal", cfg.name),
            Box::new(move || {
                let spec = match cfg.to_spec() {
                    Ok(s) => s,
                    Err(e) => return Ok((false, e.to_string())),
                };
                Ok(bound(transport_gap(&spec)?, 1e-12))
            }),
        ));
    }
    list
}

/// Largest relative gap between the renewal field and `U(a, a−t)u₀(a−t)`
/// on `a ≥ t`.
fn transport_gap(spec: &AgeModelSpec) -> agepert::Result<f64> {
    let sim = solve_renewal(spec)?;
    let fam = spec.family();
    let u0 = spec.u0();
    let nodes = fam.grid().len();
    let mut worst: f64 = 0.0;
    let levels = sim.time.len().min(nodes);
    for m in (1..levels).step_by((levels / 4).max(1)) {
        for k in (m..nodes).step_by(7) {
            let expect = fam.between_nodes(k, k - m) * DVector::from_column_slice(u0.at(k - m));
            for (got, e) in sim.value(m, k).iter().zip(expect.iter()) {
                worst = worst.max((got - e).abs() / e.abs().max(1.0));
            }
        }
    }
    Ok(worst)
}

/// Runs every check in order.
pub fn evaluate(opts: &VerifyOptions) -> Vec<CheckResult> {
    checks(opts)
        .into_iter()
        .map(|(name, check)| {
            let (pass, detail) = match check() {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult { name, pass, detail }
        })
        .collect()
}

/// Runs every check and writes TAP lines to `out`.
pub fn run(opts: &VerifyOptions, out: &mut impl Write) -> CliResult<Vec<CheckResult>> {
    let results = evaluate(opts);
    writeln!(out, "TAP version 13")?;
    writeln!(out, "1..{}", results.len())?;
    for (i, r) in results.iter().enumerate() {
        let status = if r.pass { "ok" } else { "not ok" };
        writeln!(out, "{status} {} - {} # {}", i + 1, r.name, r.detail)?;
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    writeln!(out, "# {} passed, {failed} failed", results.len() - failed)?;
    Ok(results)
}
