//! CSV renderings. Reals are written with 17 significant digits so they
//! round-trip exactly.

use std::fmt::Write;

use crate::critical::PeriodCurve;
use crate::orbit::{OrbitTrace, PeriodSample};

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns `h,T,method,err,drift`; `drift` is empty for quadrature rows.
pub fn samples_csv(samples: &[PeriodSample]) -> String {
    let mut out = String::from("h,T,method,err,drift\n");
    for s in samples {
        let drift = s.energy_drift.map(fmt_real).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_real(s.h),
            fmt_real(s.period),
            s.method.as_str(),
            fmt_real(s.err_estimate),
            drift
        );
    }
    out
}

pub fn curve_csv(curve: &PeriodCurve) -> String {
    samples_csv(&curve.samples)
}

/// Columns `x,y`.
pub fn trace_csv(trace: &OrbitTrace) -> String {
    let mut out = String::from("x,y\n");
    for (x, y) in &trace.points {
        let _ = writeln!(out, "{},{}", fmt_real(*x), fmt_real(*y));
    }
    out
}
