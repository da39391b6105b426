//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! non-zero if any of them fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use critperiod::critical::{
    alternates, peak_growth_probe, sample_system, tail_exponent, verify_bound, BoundReport, GridParams, VerifyOptions,
};
use critperiod::energy::{certify_example_family, collect_energies};
use critperiod::orbit::{period_quadrature_potential, period_return_time, HamiltonianSystem};
use critperiod::poly::{rational, Rational};
use critperiod::system::{build_potential, build_separable, example_family, Parity, SystemSpec};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: impl Into<String>, bad: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(bad.into())
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn potential(betas: &[f64], eps: f64) -> SystemSpec {
    build_potential(betas, eps, None).unwrap().0
}

fn potential_even() -> SystemSpec {
    build_potential(&[1.0], 0.0, Some(4.0)).unwrap().0
}

fn separable_4_2() -> SystemSpec {
    build_separable(&[4.0], &[2.0], 0.0, None).unwrap().0
}

fn period(sys: &HamiltonianSystem, h: f64) -> f64 {
    period_return_time(sys, h).unwrap_or_else(|e| panic!("T({h}): {e}")).period
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s as f64 {
        Ok(())
    } else {
        Err(format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()))
    }
}

/// Linear extrapolation of `T(h)` to `h = 0` from `h0` and `h0 / 2`.
fn extrapolated_t0(spec: &SystemSpec) -> f64 {
    let sys = HamiltonianSystem::new(spec).unwrap();
    let h1 = sys.skeleton.interior()[0].h;
    let h0 = 1e-6 * h1;
    2.0 * period(&sys, h0 / 2.0) - period(&sys, h0)
}

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    for (name, spec, expect) in
        [("betas 1,2,3", potential(&[1.0, 2.0, 3.0], 0.0), PI / 3.0), ("alpha 4, beta 2", separable_4_2(), PI / 4.0)]
    {
        let start = Instant::now();
        let t0 = extrapolated_t0(&spec);
        within(start.elapsed(), 10)?;
        let rel = (t0 - expect).abs() / expect;
        if rel > 1e-6 {
            return Err(format!("{name}: T(0+) = {t0:.12}, expected {expect:.12} (rel {rel:.1e})"));
        }
        notes.push(format!("{name} rel {rel:.1e}"));
    }
    Ok(notes.join(", "))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let ledger = collect_energies(&separable_4_2()).map_err(|e| e.to_string())?;
    let got: Vec<Option<Rational>> = ledger.entries.iter().map(|e| e.h_exact().cloned()).collect();
    let want: Vec<Option<Rational>> =
        [rational(0, 1), rational(4, 3), rational(64, 3), rational(68, 3)].into_iter().map(Some).collect();
    if got != want {
        return Err(format!("fig-4 ledger {got:?}"));
    }
    for k in 1..=3 {
        for parity in [Parity::Odd, Parity::Even] {
            let v = certify_example_family(k, parity).map_err(|e| e.to_string())?;
            if !v.distinct || v.dominance_ok == Some(false) {
                return Err(format!("certification failed for k = {k}, {parity:?}"));
            }
        }
    }
    within(start.elapsed(), 5)?;
    Ok("alpha 4 beta 2 ledger exact, example families certified for k = 1..3".into())
}

fn run_verify(spec: &SystemSpec) -> Result<BoundReport, String> {
    verify_bound(spec, &VerifyOptions::default()).map_err(|e| e.to_string())
}

fn bound_line(name: &str, r: &BoundReport) -> String {
    format!("{name}: {}/{} at eps {:e}", r.found, r.required, r.epsilon_used)
}

fn bound_cases(cases: Vec<(&str, SystemSpec, usize)>, each_s: u64, limit_s: u64) -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut failed = Vec::new();
    for (name, spec, at_least) in cases {
        let case_start = Instant::now();
        let r = run_verify(&spec)?;
        within(case_start.elapsed(), each_s)?;
        let line = bound_line(name, &r);
        if r.found < at_least || !r.pass {
            failed.push(line.clone());
        }
        notes.push(line);
    }
    within(start.elapsed(), limit_s)?;
    check(failed.is_empty(), notes.join(", "), failed.join(", "))
}

fn criterion_3() -> Outcome {
    bound_cases(
        vec![
            ("k=1", potential(&[1.0], 0.0), 1),
            ("k=2", potential(&[1.0, 2.0], 0.0), 3),
            ("k=3", potential(&[1.0, 2.0, 3.0], 0.0), 5),
        ],
        900,
        900,
    )
}

fn criterion_4() -> Outcome {
    bound_cases(
        vec![
            ("alpha 4 beta 2", separable_4_2(), 5),
            ("example 1 k=1", example_family(1, Parity::Odd, 0.0).unwrap(), 5),
        ],
        900,
        1800,
    )
}

fn criterion_5() -> Outcome {
    bound_cases(
        vec![
            ("potential-even k=2", potential_even(), 2),
            ("example 2 k=2", example_family(2, Parity::Even, 0.0).unwrap(), 6),
        ],
        1800,
        1800,
    )
}

/// 50 energies per annulus at `eps = 0`, 50 over the global range at `eps = 1e-3`.
fn oracle_energies(sys: &HamiltonianSystem) -> Vec<f64> {
    let mut edges: Vec<f64> = sys.skeleton.energies();
    let last = *edges.last().unwrap();
    edges.push(match sys.annulus_top {
        Some(t) => t,
        None => 100.0 * last,
    });
    if sys.spec.epsilon == 0.0 {
        edges
            .windows(2)
            .flat_map(|w| {
                let lo = if w[0] == 0.0 { 1e-6 * w[1] } else { w[0] * (1.0 + 1e-3) };
                log_space(lo, w[1] * (1.0 - 1e-3), 50)
            })
            .collect()
    } else {
        let top = sys.annulus_top.map_or(1e3 * last, |t| 0.999 * t);
        log_space(1e-6 * edges[1], top, 50)
    }
}

fn criterion_6() -> Outcome {
    let specs = [
        ("betas 1", vec![1.0], None),
        ("betas 1,2", vec![1.0, 2.0], None),
        ("betas 1,2,3", vec![1.0, 2.0, 3.0], None),
        ("even betas 1 saddle 4", vec![1.0], Some(4.0)),
    ];
    let mut worst = 0.0f64;
    let mut count = 0;
    for (name, betas, saddle) in specs {
        for eps in [0.0, 1e-3] {
            let spec = build_potential(&betas, eps, saddle).unwrap().0;
            let sys = HamiltonianSystem::new(&spec).unwrap();
            for h in oracle_energies(&sys) {
                let a = period(&sys, h);
                let b = period_quadrature_potential(&sys, h).map_err(|e| format!("{name} quadrature at {h}: {e}"))?;
                let rel = (a - b.period).abs() / b.period;
                if rel > 1e-6 {
                    return Err(format!("{name}, eps {eps}: h = {h}, rel diff {rel:.2e}"));
                }
                worst = worst.max(rel);
                count += 1;
            }
        }
    }
    Ok(format!("{count} energies, worst rel diff {worst:.1e}"))
}

fn criterion_7() -> Outcome {
    for betas in [vec![1.0], vec![1.0, 2.0], vec![1.0, 2.0, 3.0]] {
        let sys = HamiltonianSystem::new(&potential(&betas, 0.0)).unwrap();
        let h1 = sys.skeleton.interior()[0].h;
        let hk = sys.skeleton.interior().last().unwrap().h;
        let low: Vec<f64> = log_space(1e-6 * h1, h1 * (1.0 - 1e-6), 64).iter().map(|&h| period(&sys, h)).collect();
        if !low.windows(2).all(|w| w[0] < w[1]) {
            return Err(format!("k = {}: T not increasing on (0, h1)", betas.len()));
        }
        let high: Vec<f64> = log_space(hk * (1.0 + 1e-6), 100.0 * hk, 64).iter().map(|&h| period(&sys, h)).collect();
        if !high.windows(2).all(|w| w[0] > w[1]) {
            return Err(format!("k = {}: T not decreasing on (h_k, 100 h_k)", betas.len()));
        }
    }
    Ok("k = 1, 2, 3 monotone at both ends".into())
}

fn criterion_8() -> Outcome {
    let specs =
        [potential(&[1.0], 0.0), potential(&[1.0, 2.0], 0.0), potential(&[1.0, 2.0, 3.0], 0.0), separable_4_2()];
    let mut probes = 0;
    for spec in &specs {
        let sys = HamiltonianSystem::new(spec).unwrap();
        for e in sys.skeleton.interior() {
            let ts: Vec<f64> = (3..=6).map(|j| period(&sys, e.h * (1.0 - 10f64.powi(-j)))).collect();
            if !ts.windows(2).all(|w| w[0] < w[1]) {
                return Err(format!("no divergence below h = {}: {ts:?}", e.h));
            }
            probes += 1;
        }
    }
    let mut peaks = 0;
    for spec in [potential(&[1.0], 0.0), separable_4_2()] {
        let probe = peak_growth_probe(&spec, &[1e-2, 1e-3, 1e-4], GridParams::default()).map_err(|e| e.to_string())?;
        for i in 0..probe[0].peaks.len() {
            let heights: Vec<f64> = probe.iter().map(|p| p.peaks[i].period_peak).collect();
            if !heights.windows(2).all(|w| w[0] < w[1]) {
                return Err(format!("peak near h = {} does not grow: {heights:?}", probe[0].peaks[i].h_skeleton));
            }
            peaks += 1;
        }
    }
    Ok(format!("{probes} cusp sequences diverge, {peaks} peaks grow"))
}

fn criterion_9() -> Outcome {
    let cases = [
        ("potential k=1", potential(&[1.0], 0.0), 1.0),
        ("potential k=2", potential(&[1.0, 2.0], 0.0), 2.0),
        ("separable k=1", separable_4_2(), 1.0),
    ];
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, spec, k) in cases {
        let slope = tail_exponent(&spec, 4).map_err(|e| e.to_string())?;
        let expect = -k / (k + 1.0);
        let rel = (slope - expect).abs() / expect.abs();
        ok &= rel <= 0.05;
        notes.push(format!("{name} slope {slope:.4} vs {expect:.4}"));
    }
    check(ok, notes.join(", "), notes.join(", "))
}

fn criterion_10() -> Outcome {
    // energy drift on every accepted sample
    let mut curves = 0;
    for spec in [potential(&[1.0, 2.0], 1e-3), separable_4_2().with_epsilon(1e-3), potential_even().with_epsilon(1e-3)]
    {
        let sys = HamiltonianSystem::new(&spec).unwrap();
        let curve = sample_system(&sys, GridParams::default()).map_err(|e| e.to_string())?;
        if curve.max_drift_ratio() > 1e-9 {
            return Err(format!("drift {:.2e} exceeds bound", curve.max_drift_ratio()));
        }
        curves += 1;
    }

    // scaling law with lambda = 2
    let lambda: f64 = 2.0;
    for (betas, k) in [(vec![1.0], 1), (vec![1.0, 2.0], 2)] {
        for eps in [0.0, 1e-3] {
            let base = HamiltonianSystem::new(&potential(&betas, eps)).unwrap();
            let scaled_betas: Vec<f64> = betas.iter().map(|b| lambda * b).collect();
            let scaled = HamiltonianSystem::new(&potential(&scaled_betas, lambda * lambda * eps)).unwrap();
            for h in [0.01, 0.05, 0.3, 2.0] {
                let lhs = period(&scaled, lambda.powi(2 * k + 2) * h);
                let rhs = lambda.powi(-k) * period(&base, h);
                let rel = (lhs - rhs).abs() / rhs;
                if rel > 1e-8 {
                    return Err(format!("scaling law off by {rel:.2e} at k = {k}, eps = {eps}, h = {h}"));
                }
            }
        }
    }

    // alternation and determinism of passing odd-potential reports
    for betas in [vec![1.0], vec![1.0, 2.0], vec![1.0, 2.0, 3.0]] {
        let spec = potential(&betas, 0.0);
        let a = run_verify(&spec)?;
        if a.pass && !alternates(&a.critical_points) {
            return Err(format!("k = {}: extrema do not alternate", betas.len()));
        }
        let b = run_verify(&spec)?;
        if a.to_json() != b.to_json() {
            return Err(format!("k = {}: reports differ between runs", betas.len()));
        }
    }
    Ok(format!("drift within bound on {curves} curves, scaling law holds, reports alternate and repeat"))
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failures = 0;
    for (n, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(note) => println!("criterion {n}: PASS ({secs:.1}s) {note}"),
            Err(note) => {
                failures += 1;
                println!("criterion {n}: FAIL ({secs:.1}s) {note}");
            }
        }
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
