//! Period quadrature for potential systems.
//!
//! With turning points `x1 < 0 < x2`, the polynomial `h - G(x)` factors as
//! `(x - x1)(x2 - x) R(x)` where `R` is obtained by two synthetic divisions
//! and stays positive on `[x1, x2]`. Then
//!
//! `T = sqrt(2) * int_{x1}^{x2} dx / sqrt((x - x1)(x2 - x)) / sqrt(R(x))`,
//!
//! whose weight is exactly the Chebyshev one, so Gauss-Chebyshev nodes
//! integrate the endpoint singularities without loss. Deflating the
//! turning points out of the polynomial also avoids the cancellation in
//! `h - G(x)` next to the endpoints.

use std::f64::consts::{PI, SQRT_2};

use super::{turning_point, HamiltonianSystem, PeriodMethod, PeriodSample, Side};
use crate::error::{Error, Result};
use crate::poly::FloatPoly;

const START_NODES: usize = 64;
const MAX_NODES: usize = 4096;
const REL_TOL: f64 = 1e-9;

fn chebyshev_sum(r: &FloatPoly, mid: f64, half: f64, n: usize) -> Option<f64> {
    let mut sum = 0.0;
    for j in 0..n {
        let t = ((2 * j + 1) as f64 * PI / (2 * n) as f64).cos();
        let v = r.eval(mid + half * t);
        if v <= 0.0 {
            return None;
        }
        sum += 1.0 / v.sqrt();
    }
    Some(SQRT_2 * PI / n as f64 * sum)
}

pub fn period_quadrature_potential(sys: &HamiltonianSystem, h: f64) -> Result<PeriodSample> {
    if sys.spec.family.is_separable() {
        return Err(Error::Validation("quadrature is implemented for potential families only".into()));
    }
    sys.admissible(h)?;
    let g = &sys.pair.g;
    let x1 = turning_point(g, h, Side::Negative, None)?;
    let x2 = turning_point(g, h, Side::Positive, sys.spec.saddle_value())?;

    // G(x) - h = (x - x1)(x - x2) Q(x), and h - G = (x - x1)(x2 - x) Q.
    let shifted = g.potential.shift_constant(h);
    let (q, _) = shifted.deflate(x2);
    let (r, _) = q.deflate(x1);
    let mid = 0.5 * (x1 + x2);
    let half = 0.5 * (x2 - x1);

    let mut n = START_NODES;
    let mut t_n = chebyshev_sum(&r, mid, half, n).ok_or(Error::NearSeparatrix { h })?;
    loop {
        let t_2n = chebyshev_sum(&r, mid, half, 2 * n).ok_or(Error::NearSeparatrix { h })?;
        let err = (t_2n - t_n).abs();
        n *= 2;
        if err <= REL_TOL * t_2n || n >= MAX_NODES {
            return Ok(PeriodSample {
                h,
                period: t_2n,
                method: PeriodMethod::Quadrature,
                err_estimate: err,
                energy_drift: None,
            });
        }
        t_n = t_2n;
    }
}
