use std::sync::Arc;

use agepert::age::{solve_renewal, AgeModelSpec, BirthRate, InitialData, MaxAge, ModelInputs};
use agepert::dyson::*;
use agepert::linalg::{cop_norm, op_norm, to_complex};
use agepert::semigroup::{build_evolution_family, matrix_semigroup, AgeCoefficients};
use agepert::spectral::{growth_fit, MatrixResolvent, ResolventOperator};
use agepert::{CMat, TimeGrid, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pair(seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let m = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let n = op_norm(&m);
        if n > 1.0 {
            m / n
        } else {
            m
        }
    };
    (draw(), draw())
}

fn cases() -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
    vec![
        (DMatrix::from_element(1, 1, -1.0), DMatrix::from_element(1, 1, 0.5)),
        (
            DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, -0.2, -1.0]),
            DMatrix::from_row_slice(2, 2, &[0.2, -0.4, 0.1, 0.3]),
        ),
    ]
}

#[test]
fn convolution_identity_up_to_third_order() {
    let dt = 1e-3;
    let grid = TimeGrid::new(2.0, dt).unwrap();
    for (a, l) in cases() {
        let kernel = DiamondKernel::classical_generator(a).unwrap();
        let terms = dyson_terms(&kernel, &l, 3, &grid).unwrap();
        for n in 0..=3 {
            for i in (0..=1000).step_by(125) {
                for j in (0..=1000).step_by(125) {
                    let lhs = terms[n].path.at(i + j);
                    let mut rhs = DMatrix::zeros(lhs.nrows(), lhs.ncols());
                    for k in 0..=n {
                        rhs += terms[k].path.at(i) * terms[n - k].path.at(j);
                    }
                    let gap = op_norm(&(lhs - rhs));
                    assert!(gap <= 1e-6, "n={n} t={} s={}: {gap}", i as f64 * dt, j as f64 * dt);
                }
            }
        }
    }
}

#[test]
fn scalar_terms_match_closed_form() {
    let (a, l) = (-1.0f64, 0.5f64);
    let grid = TimeGrid::new(1.0, 1e-3).unwrap();
    let kernel = DiamondKernel::classical_generator(DMatrix::from_element(1, 1, a)).unwrap();
    let terms = dyson_terms(&kernel, &DMatrix::from_element(1, 1, l), 10, &grid).unwrap();
    let mut fact = 1.0;
    for (n, term) in terms.iter().enumerate() {
        if n > 0 {
            fact *= n as f64;
        }
        for (k, t) in grid.nodes().enumerate() {
            let exact = (l * t).powi(n as i32) * (a * t).exp() / fact;
            assert!((term.path.at(k)[(0, 0)] - exact).abs() <= 1e-7, "n={n} t={t}");
        }
    }
    for (k, t) in grid.nodes().enumerate() {
        let sum: f64 = terms.iter().map(|s| s.path.at(k)[(0, 0)]).sum();
        assert!((sum - ((a + l) * t).exp()).abs() <= 1e-7);
    }
}

#[test]
fn first_term_vanishes_without_perturbation() {
    let grid = TimeGrid::new(1.0, 0.01).unwrap();
    let kernel = DiamondKernel::classical_generator(DMatrix::from_element(2, 2, -0.3)).unwrap();
    let s1 = dyson_term(&kernel, &DMatrix::zeros(2, 2), 1, &grid).unwrap();
    assert!(s1.path.values().iter().all(|m| m.amax() == 0.0));
}

#[test]
fn diamond_splits_at_intermediate_times() {
    let dt = 1e-3;
    let grid = TimeGrid::new(2.0, dt).unwrap();
    let a = DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, -0.2, -1.0]);
    let path = agepert::semigroup::SemigroupPath::from_generator(a.clone()).unwrap();
    let kernel = DiamondKernel::classical_generator(a).unwrap();
    let f = TimePath::from_fn(grid, |t| DMatrix::from_column_slice(2, 1, &[t.sin(), (2.0 * t).cos()])).unwrap();
    let whole = diamond(&kernel, &f).unwrap();
    for s_idx in [300usize, 800, 1200] {
        let tail_len = grid.steps() - s_idx;
        let shifted = TimePath::new(grid.truncated(tail_len), f.values()[s_idx..].to_vec()).unwrap();
        let tail = diamond(&kernel, &shifted).unwrap();
        for r in (0..=tail_len).step_by(100) {
            let t_minus_s = r as f64 * dt;
            let lhs = whole.at(s_idx + r);
            let rhs = path.eval(t_minus_s).unwrap() * whole.at(s_idx) + tail.at(r);
            assert!(op_norm(&(lhs - rhs)) <= 1e-6);
        }
    }
}

#[test]
fn perturbed_semigroup_matches_exponential_of_sum() {
    let grid = TimeGrid::new(1.0, 2.5e-4).unwrap();
    for seed in 0..3 {
        let (a, l) = random_pair(seed);
        let kernel = DiamondKernel::classical_generator(a.clone()).unwrap();
        let w = perturbed_semigroup(&kernel, &l, &grid, 1e-12).unwrap();
        let exact = matrix_semigroup(&(&a + &l), 1.0).unwrap();
        let gap = op_norm(&(w.path.eval(1.0).unwrap() - exact));
        assert!(gap <= 1e-7, "seed {seed}: {gap}");
    }
}

#[test]
fn fixed_equation_holds_on_the_grid() {
    let tol = 1e-10;
    let grid = TimeGrid::new(2.0, 1e-3).unwrap();
    for (a, l) in cases() {
        let kernel = DiamondKernel::classical_generator(a).unwrap();
        let w = perturbed_semigroup(&kernel, &l, &grid, tol).unwrap();
        let wp = TimePath::new(grid, w.path.sample_uniform(grid.steps(), grid.dt()).unwrap()).unwrap();
        let conv = diamond(&kernel, &wp.left_mul(&l).unwrap()).unwrap();
        let base = kernel.base_path(&grid).unwrap();
        for k in 0..grid.len() {
            let r = wp.at(k) - base.at(k) - conv.at(k);
            assert!(op_norm(&r) <= 10.0 * tol + 1e-12, "t = {}: {}", grid.node(k), op_norm(&r));
        }
    }
}

#[test]
fn laplace_identity_for_series_terms() {
    let dt = 2e-3;
    let grid = TimeGrid::new(40.0, dt).unwrap();
    for (a, l) in cases() {
        let r = MatrixResolvent::new(a.clone()).unwrap();
        let kernel = DiamondKernel::classical_generator(a.clone()).unwrap();
        let terms = dyson_terms(&kernel, &l, 2, &grid).unwrap();
        let omega = agepert::linalg::log_norm(&(&a + &l)).max(agepert::linalg::log_norm(&a));
        let lam = omega + 1.5;
        let weights: Vec<f64> = grid
            .nodes()
            .enumerate()
            .map(|(k, t)| {
                let w = if k == 0 || k == grid.steps() { 0.5 * dt } else { dt };
                w * (-lam * t).exp()
            })
            .collect();
        let rl = r.resolvent(C64::new(lam, 0.0)).unwrap();
        let lc = to_complex(&l);
        let mut expected = rl.clone();
        for (n, term) in terms.iter().enumerate() {
            let mut lap = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
            for (k, w) in weights.iter().enumerate() {
                lap += term.path.at(k) * *w;
            }
            let gap: CMat = to_complex(&lap) - &expected;
            assert!(cop_norm(&gap) <= 1e-5, "n={n}: {}", cop_norm(&gap));
            expected = &rl * &lc * expected;
        }
    }
}

#[test]
fn series_terms_decay_geometrically_in_the_window() {
    for (a, l) in cases() {
        let kernel = DiamondKernel::classical_generator(a).unwrap();
        // a perturbation large enough that the window is shorter than the horizon
        let l = l * 6.0;
        let grid = TimeGrid::new(2.0, 1e-3).unwrap();
        let w = perturbed_semigroup(&kernel, &l, &grid, 1e-12).unwrap();
        assert!(w.window < 2.0 && w.ratio < 0.5);
        let norms: Vec<f64> = w.term_norms.iter().copied().skip(1).filter(|v| *v > 1e-300).collect();
        let idx: Vec<f64> = (0..norms.len()).map(|i| i as f64).collect();
        let fit = growth_fit(&idx, &norms, 1.0).unwrap();
        assert!(fit.rate.exp() <= 1.15 * w.ratio, "fitted {} vs r {}", fit.rate.exp(), w.ratio);
        let c = norms[0] / w.ratio;
        for (n, v) in norms.iter().enumerate() {
            assert!(*v <= c * w.ratio.powi(n as i32 + 1) * (1.0 + 1e-9));
        }
    }
}

#[test]
fn delta_estimate_respects_triangle_bound() {
    let a = DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, -0.2, -1.0]);
    let kernel = DiamondKernel::classical_generator(a).unwrap();
    let grid = TimeGrid::new(3.0, 0.01).unwrap();
    let d = mr_delta_estimate(&kernel, &grid, DEFAULT_PROBES, 7).unwrap();
    let b = match kernel.form() {
        KernelForm::Classical(p) => p.bound(),
        _ => unreachable!(),
    };
    assert_eq!(d.values[0], 0.0);
    for (k, t) in grid.nodes().enumerate() {
        let bound = if b.omega.abs() < 1e-12 { b.m * t } else { b.m * ((b.omega * t).exp() - 1.0) / b.omega };
        assert!(d.values[k] <= bound * (1.0 + 1e-6) + 1e-12);
        if k > 0 {
            assert!(d.values[k] >= d.values[k - 1]);
        }
    }
}

#[test]
fn age_delta_estimate_vanishes_at_zero() {
    let family = Arc::new(build_evolution_family(&AgeCoefficients::scalar_mortality(0.5, 1), 2.0, 0.02).unwrap());
    let kernel = DiamondKernel::age_model(family, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 0.02).unwrap();
    let d = mr_delta_estimate(&kernel, &grid, DEFAULT_PROBES, 0).unwrap();
    assert_eq!(d.values[0], 0.0);
    assert!(d.values[1] < d.values[grid.steps()]);
    assert!(d.values[1] < 0.1);
}

#[test]
fn age_quasi_hille_yosida_constant_is_stable_under_refinement() {
    let mut m = Vec::new();
    for da in [0.04, 0.02, 0.01] {
        let family = Arc::new(build_evolution_family(&AgeCoefficients::scalar_mortality(0.5, 1), 2.0, da).unwrap());
        let kernel = DiamondKernel::age_model(family, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, da).unwrap();
        let r = quasi_hy_check(&kernel, 1.0, &grid, DEFAULT_PROBES, 3).unwrap();
        assert!(r.m_hat.is_finite() && r.m_hat > 0.0);
        m.push(r.m_hat);
    }
    for pair in m.windows(2) {
        assert!((pair[0] / pair[1] - 1.0).abs() < 0.1, "{m:?}");
    }
}

/// The fixed point of the age-model diamond equation and the renewal solver
/// discretize the same mild solution differently: the Howland node carrying
/// the jump at `a = t` is weighted as an interior node, so the two agree to
/// first order in `da`.
#[test]
fn age_perturbed_semigroup_reproduces_renewal_solution() {
    let mut gaps = Vec::new();
    for da in [0.04, 0.02, 0.01] {
        let spec = AgeModelSpec::new(ModelInputs {
            max_age: MaxAge::Finite(2.0),
            p: 1.0,
            coefficients: AgeCoefficients::scalar_mortality(0.3, 1),
            birth: BirthRate::scalar(0.4),
            initial: InitialData::Custom(Arc::new(|a: f64| vec![(-a).exp()])),
            da,
            t_end: 1.0,
        })
        .unwrap();
        let kernel = DiamondKernel::age_model(spec.family().clone(), spec.p()).unwrap();
        let l = spec.kernel().ambient_map();
        let w = perturbed_semigroup(&kernel, &l, spec.time_grid(), 1e-12).unwrap();
        let sim = solve_renewal(&spec).unwrap();
        let u0 = nalgebra::DVector::from_column_slice(spec.u0().as_flat());
        let m = spec.time_grid().steps();
        let profile = w.path.eval(1.0).unwrap() * &u0;
        let gap = profile
            .iter()
            .zip(sim.profile(m))
            .enumerate()
            .filter(|(k, _)| *k != m)
            .map(|(_, (x, y))| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(gap <= 0.25 * da, "da {da}: {gap}");
        gaps.push(gap);
    }
    for pair in gaps.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((1.8..=2.2).contains(&ratio), "{gaps:?}");
    }
}
