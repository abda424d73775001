use std::sync::Arc;

use agepert::linalg::{cop_norm, op_norm, to_complex};
use agepert::semigroup::*;
use agepert::spectral::{MatrixResolvent, ResolventOperator};
use agepert::age::{resolvent_power, AgeResolvent};
use agepert::{TimeGrid, C64};
use nalgebra::DMatrix;

const H: f64 = 1e-3;

fn generators() -> Vec<DMatrix<f64>> {
    vec![
        DMatrix::from_element(1, 1, -0.7),
        DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, -0.2, -1.0]),
    ]
}

fn integrated(a: &DMatrix<f64>, t_end: f64) -> IntegratedSemigroupPath {
    let n = a.nrows();
    let mu = 2.0;
    let r_mu = (DMatrix::identity(n, n) * mu - a).try_inverse().unwrap();
    let path = SemigroupPath::from_generator(a.clone()).unwrap();
    IntegratedSemigroupPath::classical(&path, &r_mu, mu, TimeGrid::new(t_end, H).unwrap()).unwrap()
}

fn lattice() -> Vec<(usize, usize)> {
    // node indices at spacing 0.25 on [0, 1]
    (1..=4).flat_map(|i| (1..=4).map(move |j| (i * 250, j * 250))).collect()
}

#[test]
fn semigroup_law_for_closed_forms() {
    for a in generators() {
        let path = SemigroupPath::from_generator(a).unwrap();
        let pairs: Vec<(f64, f64)> = (0..10)
            .flat_map(|i| (0..10).map(move |j| (0.17 * i as f64, 0.23 * j as f64)))
            .collect();
        assert!(semigroup_law_residual(&path, &pairs).unwrap() <= 1e-9);
    }
}

#[test]
fn cocycle_law_constant_and_varying_coefficients() {
    let constant = build_evolution_family(&AgeCoefficients::scalar_mortality(1.0, 2), 4.0, 0.01).unwrap();
    let triples: Vec<(f64, f64, f64)> = (0..8)
        .map(|i| {
            let s = 0.1 * i as f64;
            (s + 2.3, s + 1.05, s)
        })
        .collect();
    assert!(constant.cocycle_residual(&triples).unwrap() <= 1e-9);
    for &(a, _, s) in &triples {
        let exact = DMatrix::<f64>::identity(2, 2) * (-(a - s)).exp();
        assert!(op_norm(&(constant.eval(a, s).unwrap() - exact)) <= 1e-9);
    }
    // A(a) = a·(−I): U(a,s) = e^{−(a²−s²)/2} I
    let varying = build_evolution_family(
        &AgeCoefficients::from_fn(1, |a| DMatrix::from_element(1, 1, -a)),
        3.0,
        0.01,
    )
    .unwrap();
    assert!(varying.cocycle_residual(&triples[..5]).unwrap() <= 1e-6);
    for &(a, _, s) in &triples[..5] {
        let exact = (-(a * a - s * s) / 2.0).exp();
        assert!((varying.eval(a, s).unwrap()[(0, 0)] - exact).abs() <= 1e-8);
    }
}

#[test]
fn integrated_composition_identity() {
    for a in generators() {
        let s_path = integrated(&a, 2.0);
        for (i, j) in lattice() {
            let s_t = s_path.eval(i as f64 * H).unwrap();
            let s_s = s_path.eval(j as f64 * H).unwrap();
            let samples: Vec<DMatrix<f64>> = (0..=i)
                .map(|r| s_path.eval((r + j) as f64 * H).unwrap() - s_path.eval(r as f64 * H).unwrap())
                .collect();
            let mut integral = (&samples[0] + &samples[i]) * (0.5 * H);
            for m in &samples[1..i] {
                integral += m * H;
            }
            let gap = op_norm(&(&s_t * &s_s - integral));
            assert!(gap <= 1e-6, "t={} s={}: {gap}", i as f64 * H, j as f64 * H);
        }
    }
}

#[test]
fn semigroup_acts_on_integrated_semigroup() {
    for a in generators() {
        let s_path = integrated(&a, 2.0);
        let path = SemigroupPath::from_generator(a.clone()).unwrap();
        for (i, j) in lattice() {
            let (t, s) = (i as f64 * H, j as f64 * H);
            let lhs = path.eval(t).unwrap() * s_path.eval(s).unwrap();
            let rhs = s_path.eval(t + s).unwrap() - s_path.eval(t).unwrap();
            assert!(op_norm(&(lhs - rhs)) <= 1e-6);
        }
    }
}

#[test]
fn integrated_semigroup_is_mu_independent_and_matches_antiderivative() {
    let a = -0.8;
    let gen = DMatrix::from_element(1, 1, a);
    let path = SemigroupPath::from_generator(gen).unwrap();
    for &t in &[0.0, 0.5, 1.7] {
        let vals: Vec<f64> = [1.5, 4.0]
            .iter()
            .map(|&mu| {
                let r = DMatrix::from_element(1, 1, 1.0 / (mu - a));
                integrated_from_semigroup(&path, &r, mu, t).unwrap()[(0, 0)]
            })
            .collect();
        let exact = ((a * t).exp() - 1.0) / a;
        assert!((vals[0] - vals[1]).abs() <= 1e-7);
        assert!((vals[0] - exact).abs() <= 1e-7);
    }
}

#[test]
fn integrated_path_is_nondegenerate_and_starts_at_zero() {
    for a in generators() {
        let s = integrated(&a, 1.0);
        assert_eq!(op_norm(&s.eval(0.0).unwrap()), 0.0);
        assert!(s.is_nondegenerate(&[0.25, 0.5, 1.0]).unwrap());
    }
    let zero = IntegratedSemigroupPath::zero(0);
    assert!(laplace_resolvent(&zero, C64::new(1.0, 0.0)).unwrap().value.is_empty());
}

#[test]
fn resolvent_identity() {
    for a in generators() {
        let r = MatrixResolvent::new(a).unwrap();
        let lams = [C64::new(0.5, 1.0), C64::new(2.0, -3.0), C64::new(0.1, 0.0)];
        for l in lams {
            for m in lams {
                let rl = r.resolvent(l).unwrap();
                let rm = r.resolvent(m).unwrap();
                let gap = &rl - &rm - (&rl * &rm) * (m - l);
                assert!(cop_norm(&gap) <= 1e-7);
            }
        }
    }
}

#[test]
fn laplace_transform_recovers_scalar_resolvent() {
    let a = -0.5;
    let s = integrated(&DMatrix::from_element(1, 1, a), 60.0);
    let lam = C64::new(1.0, 0.5);
    let v = laplace_resolvent(&s, lam).unwrap();
    assert!((v.value[(0, 0)] - 1.0 / (lam - a)).norm() < 1e-6);
    assert!(v.truncated_at > 0.0 && v.truncated_at < 60.0);
}

#[test]
fn howland_resolvent_is_laplace_of_howland_semigroup() {
    let u = build_evolution_family(&AgeCoefficients::scalar_mortality(0.4, 1), 3.0, 0.01).unwrap();
    let nodes = u.grid().len();
    let phi = AgeProfile::from_fn(1, nodes, |k| vec![(1.0 + 0.01 * k as f64).sin()]).unwrap();
    let lam = C64::new(1.5, 2.0);
    let direct = howland_resolvent(&u, lam, &phi.to_complex()).unwrap();
    // ∫_0^a e^{−λt} (T₀(t)φ)(a) dt: the integrand is supported on t ≤ a, so
    // node a_k gets the trapezoid rule on [0, a_k]
    let da = u.da();
    let mut acc = vec![C64::new(0.0, 0.0); nodes];
    for m in 0..nodes {
        let t = m as f64 * da;
        let shifted = howland_apply(&u, &phi, t).unwrap();
        assert!(shifted.exact);
        for (k, slot) in acc.iter_mut().enumerate().skip(m.max(1)) {
            let w = if m == 0 || m == k { 0.5 * da } else { da };
            *slot += (-lam * t).exp() * shifted.profile.at(k)[0] * w;
        }
    }
    for k in 0..nodes {
        let gap = (acc[k] - direct.at(k)[0]).norm();
        assert!(gap < 1e-12, "node {k}: {gap}");
    }
}

#[test]
fn age_laplace_resolvent_matches_resolvent_power() {
    let family = Arc::new(build_evolution_family(&AgeCoefficients::scalar_mortality(0.5, 1), 1.0, 0.02).unwrap());
    let s = IntegratedSemigroupPath::age_model(family.clone(), 1.0).unwrap();
    let lam = C64::new(2.0, 0.0);
    let lap = laplace_resolvent(&s, lam).unwrap().value;
    let nodes = family.grid().len();
    let y = [C64::new(0.7, 0.0)];
    let f = ComplexProfile::from_fn(1, nodes, |k| vec![C64::new(1.0 + (0.02 * k as f64).cos(), 0.0)]).unwrap();
    let phi = resolvent_power(&family, lam, 1, &y, &f).unwrap();
    let mut x = nalgebra::DVector::<C64>::zeros(nodes + 1);
    x[0] = y[0];
    for k in 0..nodes {
        x[k + 1] = f.at(k)[0];
    }
    let image = &lap * &x;
    assert!(image[0].norm() < 1e-12, "E component must vanish");
    // interior nodes; the corner a = 0 carries the midpoint convention of S(t)
    let scale = phi.max_abs();
    for k in 1..nodes {
        let gap = (image[k + 1] - phi.at(k)[0]).norm();
        assert!(gap <= 1e-3 * scale, "node {k}: {gap}");
    }
    let dense = AgeResolvent::new(family, 1.0).unwrap().resolvent(lam).unwrap() * &x;
    for k in 0..nodes {
        assert!((dense[k] - phi.at(k)[0]).norm() <= 1e-12 * scale.max(1.0));
    }
    let _ = to_complex(&DMatrix::<f64>::zeros(1, 1));
}
