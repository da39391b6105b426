//! Library results against oracles that share no code with it: explicit
//! formulas for `G`, a fixed-step RK4 orbit integrator, and a midpoint rule
//! in the angle variable `x = mid - half * cos(theta)`.

use std::f64::consts::{PI, SQRT_2};

use critperiod::critical::{
    build_h_grid, detect_critical_points, sample_curve, sample_system, system_grid, tail_exponent, DetectOptions,
    ExtremumKind, GridParams,
};
use critperiod::energy::collect_energies;
use critperiod::orbit::{
    linearized_period, period_quadrature_potential, period_return_time, trace_orbit, HamiltonianSystem,
};
use critperiod::poly::rational;
use critperiod::system::{build_potential, build_separable, example_family, Parity, SystemSpec};

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == (f(lo) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `T = sqrt(2) int_0^pi sqrt((x - x1)(x2 - x) / (h - G(x))) dtheta`.
fn angle_quadrature(g: impl Fn(f64) -> f64, h: f64, x1: f64, x2: f64, n: usize) -> f64 {
    let (mid, half) = (0.5 * (x1 + x2), 0.5 * (x2 - x1));
    let mut sum = 0.0;
    for j in 0..n {
        let th = (j as f64 + 0.5) * PI / n as f64;
        let x = mid - half * th.cos();
        sum += ((x - x1) * (x2 - x) / (h - g(x))).sqrt();
    }
    SQRT_2 * sum * PI / n as f64
}

/// Classical RK4 from `(x0, 0)` until `y` returns to zero from above with
/// `x > 0`; the last partial step is found by bisection on the step size.
fn rk4_period(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, x0: f64, dt: f64) -> f64 {
    let rhs = |s: [f64; 2]| [f(s[1]), -g(s[0])];
    let step = |s: [f64; 2], h: f64| {
        let k1 = rhs(s);
        let k2 = rhs([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
        let k3 = rhs([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
        let k4 = rhs([s[0] + h * k3[0], s[1] + h * k3[1]]);
        [
            s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    };
    let mut s = [x0, 0.0];
    let mut t = 0.0;
    loop {
        let next = step(s, dt);
        if s[1] > 0.0 && next[1] <= 0.0 && next[0] > 0.0 {
            let tau = bisect(|tau| step(s, tau)[1], 0.0, dt);
            return t + tau;
        }
        s = next;
        t += dt;
    }
}

/// `G(x) = x^4/4 - 2x^3/3 + (1 + eps) x^2 / 2`, the antiderivative of `x((x-1)^2 + eps)`.
fn g_beta1(x: f64, eps: f64) -> f64 {
    x.powi(4) / 4.0 - 2.0 * x.powi(3) / 3.0 + (1.0 + eps) * x * x / 2.0
}

#[test]
fn harmonic_period_is_two_pi() {
    let sys = HamiltonianSystem::new(&SystemSpec::harmonic()).unwrap();
    for h in [1e-4, 0.5, 3.0, 1e3] {
        assert!((period_return_time(&sys, h).unwrap().period - 2.0 * PI).abs() < 1e-9);
        assert!((period_quadrature_potential(&sys, h).unwrap().period - 2.0 * PI).abs() < 1e-10);
    }
}

#[test]
fn single_cusp_against_angle_quadrature() {
    for eps in [0.0, 1e-3] {
        let (spec, _) = build_potential(&[1.0], eps, None).unwrap();
        let sys = HamiltonianSystem::new(&spec).unwrap();
        let hc = g_beta1(1.0, eps);
        for h in [1e-4, 0.02, 0.07, 0.09, 0.5, 4.0] {
            if (h - hc).abs() < 1e-3 {
                continue;
            }
            let g = |x: f64| g_beta1(x, eps);
            let x1 = bisect(|x| g(x) - h, -10.0, 0.0);
            // at eps = 0 and h < 1/12 the orbit stays left of the cusp
            let right = if eps == 0.0 && h < hc { 1.0 } else { 10.0 };
            let x2 = bisect(|x| g(x) - h, 0.0, right);
            let oracle = angle_quadrature(g, h, x1, x2, 200_000);
            let rt = period_return_time(&sys, h).unwrap().period;
            let q = period_quadrature_potential(&sys, h).unwrap().period;
            assert!((rt - oracle).abs() < 1e-7 * oracle, "h {h}: {rt} vs {oracle}");
            assert!((q - oracle).abs() < 1e-7 * oracle, "h {h}: {q} vs {oracle}");
        }
    }
}

#[test]
fn separable_against_rk4() {
    // f(y) = y ((y - 4)^2 + eps), g(x) = x ((x - 2)^2 + eps)
    for eps in [0.0, 1e-2] {
        let (spec, _) = build_separable(&[4.0], &[2.0], eps, None).unwrap();
        let sys = HamiltonianSystem::new(&spec).unwrap();
        let f = |y: f64| y * ((y - 4.0).powi(2) + eps);
        let g = |x: f64| x * ((x - 2.0).powi(2) + eps);
        let gg = |x: f64| x.powi(4) / 4.0 - 4.0 * x.powi(3) / 3.0 + (4.0 + eps) * x * x / 2.0;
        for h in [0.05, 0.8, 5.0, 30.0] {
            let right = if eps == 0.0 && h < 4.0 / 3.0 { 2.0 } else { 20.0 };
            let x0 = bisect(|x| gg(x) - h, 0.0, right);
            let oracle = rk4_period(f, g, x0, 2e-5);
            let rt = period_return_time(&sys, h).unwrap().period;
            assert!((rt - oracle).abs() < 1e-8 * oracle, "h {h}: {rt} vs {oracle}");
        }
    }
}

#[test]
fn even_family_against_rk4() {
    // g(x) = x ((x - 1)^2) (4 - x), G(1) = 3/10, G(4) = 96/5
    let (spec, _) = build_potential(&[1.0], 0.0, Some(4.0)).unwrap();
    let sys = HamiltonianSystem::new(&spec).unwrap();
    let g = |x: f64| x * (x - 1.0).powi(2) * (4.0 - x);
    let gg = |x: f64| -x.powi(5) / 5.0 + 1.5 * x.powi(4) - 3.0 * x.powi(3) + 2.0 * x * x;
    assert!((gg(1.0) - 0.3).abs() < 1e-15);
    assert!((gg(4.0) - 19.2).abs() < 1e-12);
    for h in [0.1, 1.0, 10.0, 19.0] {
        let x0 = bisect(|x| gg(x) - h, if h < 0.3 { 0.0 } else { 1.0 }, if h < 0.3 { 1.0 } else { 4.0 });
        let oracle = rk4_period(|y| y, g, x0, 1e-5);
        let rt = period_return_time(&sys, h).unwrap().period;
        assert!((rt - oracle).abs() < 1e-8 * oracle, "h {h}: {rt} vs {oracle}");
    }
}

#[test]
fn exact_critical_energies() {
    let (spec, _) = build_potential(&[1.0], 0.0, None).unwrap();
    let pair = spec.hamiltonian().unwrap();
    let g = &pair.g.exact.as_ref().unwrap().potential;
    assert_eq!(g.eval(&rational(1, 1)), rational(1, 12));
    assert_eq!(g.eval(&rational(1, 2)), rational(11, 192));

    let (spec, _) = build_potential(&[1.0], 0.0, Some(4.0)).unwrap();
    let ledger = collect_energies(&spec).unwrap();
    assert_eq!(ledger.entries[1].h_exact(), Some(&rational(3, 10)));
    assert_eq!(ledger.upper.as_ref().unwrap().h_exact(), Some(&rational(96, 5)));

    // second example family, k = 2: G_u(1) = 3/10, G_u(4) = 96/5 in units of e^5
    let spec = example_family(2, Parity::Even, 0.0).unwrap();
    let pair = spec.hamiltonian().unwrap();
    let unit = &pair.g.e_scaled.as_ref().unwrap().unit_potential;
    assert_eq!(unit.eval(&rational(1, 1)), rational(3, 10));
    assert_eq!(unit.eval(&rational(4, 1)), rational(96, 5));
}

#[test]
fn linearized_periods() {
    // 2 pi / sqrt(f'(0) g'(0)) with g'(0) = prod(beta^2 + eps)
    let (_, pair) = build_potential(&[1.0, 2.0, 3.0], 0.0, None).unwrap();
    assert!((linearized_period(&pair) - PI / 3.0).abs() < 1e-15);
    let (_, pair) = build_separable(&[4.0], &[2.0], 0.0, None).unwrap();
    assert!((linearized_period(&pair) - PI / 4.0).abs() < 1e-15);
}

#[test]
fn perturbed_single_cusp_has_one_maximum() {
    let eps = 1e-3;
    let sys = HamiltonianSystem::new(&build_potential(&[1.0], eps, None).unwrap().0).unwrap();
    let curve = sample_system(&sys, GridParams::default()).unwrap();
    let det = detect_critical_points(&sys, &curve, DetectOptions::default()).unwrap();
    assert_eq!(det.points.len(), 1, "{:?}", det.points);
    let p = det.points[0];
    assert_eq!(p.kind, ExtremumKind::Maximum);
    let h_ghost = 1.0 / 12.0 + eps / 2.0;
    assert!((p.h_star - h_ghost).abs() < 1e-3 * h_ghost, "{}", p.h_star);
    assert!(p.refined_width <= 1e-6 * p.h_star);
    assert!(p.bracket.0 < p.h_star && p.h_star < p.bracket.1);
}

/// At least one extremum strictly inside every bounded annulus interval.
fn assert_interval_extrema(spec: &SystemSpec, only_minima: bool) {
    let sys = HamiltonianSystem::new(spec).unwrap();
    let curve = sample_system(&sys, GridParams::default()).unwrap();
    let det = detect_critical_points(&sys, &curve, DetectOptions::default()).unwrap();
    let hs = sys.skeleton.energies();
    for w in hs[1..].windows(2) {
        let inside = det.points.iter().filter(|p| p.h_star > w[0] && p.h_star < w[1]);
        let n = inside.filter(|p| !only_minima || p.kind == ExtremumKind::Minimum).count();
        assert!(n >= 1, "nothing in ({}, {}): {:?}", w[0], w[1], det.points);
    }
}

#[test]
fn unperturbed_interval_minima() {
    assert_interval_extrema(&build_potential(&[1.0, 2.0], 0.0, None).unwrap().0, true);
    assert_interval_extrema(&build_potential(&[1.0, -2.0], 0.0, None).unwrap().0, true);
    assert_interval_extrema(&build_separable(&[4.0], &[2.0], 0.0, None).unwrap().0, false);
    assert_interval_extrema(&example_family(1, Parity::Odd, 0.0).unwrap(), false);
}

#[test]
fn tail_exponents() {
    // potential: T ~ h^(-k/(2k+2)); separable: T ~ h^(-k/(k+1))
    for (betas, k) in [(vec![1.0], 1.0), (vec![1.0, 2.0], 2.0)] {
        let s = tail_exponent(&build_potential(&betas, 0.0, None).unwrap().0, 4).unwrap();
        let expect = -k / (2.0 * k + 2.0);
        assert!((s - expect).abs() <= 0.05 * expect.abs(), "k {k}: {s}");
    }
    let s = tail_exponent(&build_separable(&[4.0], &[2.0], 0.0, None).unwrap().0, 4).unwrap();
    assert!((s + 0.5).abs() <= 0.025, "{s}");
    let s = tail_exponent(&SystemSpec::harmonic(), 4).unwrap();
    assert!(s.abs() < 1e-8, "{s}");
}

#[test]
fn trace_is_mirror_symmetric() {
    let sys = HamiltonianSystem::new(&build_potential(&[1.0, 2.0], 1e-3, None).unwrap().0).unwrap();
    let n = 64;
    let tr = trace_orbit(&sys, 0.4, n).unwrap();
    for i in 0..=n {
        let (a, b) = (tr.points[i], tr.points[n - i]);
        assert!((a.0 - b.0).abs() < 1e-7 && (a.1 + b.1).abs() < 1e-7, "{i}: {a:?} {b:?}");
    }
    assert!(tr.max_energy_error <= 1e-9);
}

#[test]
fn grid_respects_the_annulus() {
    let (spec, _) = build_potential(&[1.0], 0.0, Some(4.0)).unwrap();
    let ledger = collect_energies(&spec).unwrap();
    let top = ledger.upper_h().unwrap();
    assert!(build_h_grid(&ledger, GridParams::default()).iter().all(|&h| h < top));
    let sys = HamiltonianSystem::new(&spec.with_epsilon(1e-2)).unwrap();
    let (grid, _) = system_grid(&sys, GridParams::default());
    let curve = sample_curve(&sys, &grid).unwrap();
    let det = detect_critical_points(&sys, &curve, DetectOptions::default()).unwrap();
    assert!(det.points.iter().all(|p| p.h_star > 0.0 && p.h_star < sys.annulus_top.unwrap()));
}

#[test]
fn unperturbed_curve_splits_at_the_cusp() {
    let sys = HamiltonianSystem::new(&build_potential(&[1.0], 0.0, None).unwrap().0).unwrap();
    let curve = sample_system(&sys, GridParams::default()).unwrap();
    let hc = 1.0 / 12.0;
    let below = curve.samples.iter().filter(|s| s.h < hc).last().unwrap();
    let above = curve.samples.iter().find(|s| s.h > hc).unwrap();
    let typical = curve.samples[curve.samples.len() / 2].period;
    assert!(below.period > 3.0 * typical && above.period > 3.0 * typical);
    // monotone on each side: no critical points at all
    let det = detect_critical_points(&sys, &curve, DetectOptions::default()).unwrap();
    assert!(det.points.is_empty(), "{:?}", det.points);
}
