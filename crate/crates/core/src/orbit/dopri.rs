//! Dormand-Prince 5(4) with FSAL and standard step-size control, on
//! fixed-size states.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-11, atol: 1e-13 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepError {
    /// Step size fell below the resolution of the independent variable.
    Underflow,
    /// The caller's step budget is exhausted.
    Budget,
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Integrator state; `t` is whatever independent variable the field uses.
pub struct Dopri5<F, const N: usize>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    field: F,
    pub tol: Tolerances,
    pub t: f64,
    pub y: [f64; N],
    k1: [f64; N],
    /// Proposed size of the next step (signed).
    pub h: f64,
    pub steps: usize,
    pub max_steps: usize,
}

impl<F, const N: usize> Dopri5<F, N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(field: F, t0: f64, y0: [f64; N], h0: f64, tol: Tolerances, max_steps: usize) -> Self {
        let k1 = field(t0, &y0);
        Self { field, tol, t: t0, y: y0, k1, h: h0, steps: 0, max_steps }
    }

    /// Attempts a single step of size `h`; returns the new state, its
    /// derivative and the scaled error norm.
    fn attempt(&self, h: f64) -> ([f64; N], [f64; N], f64) {
        let f = &self.field;
        let (t, y, k1) = (self.t, &self.y, &self.k1);
        let k2 = f(t + C2 * h, &axpy(y, &[(A21, k1)], h));
        let k3 = f(t + C3 * h, &axpy(y, &[(A31, k1), (A32, &k2)], h));
        let k4 = f(t + C4 * h, &axpy(y, &[(A41, k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(t + C5 * h, &axpy(y, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(t + h, &axpy(y, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let y_new = axpy(y, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
        let k7 = f(t + h, &y_new);
        let mut sum = 0.0;
        for i in 0..N {
            let err = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = self.tol.atol + self.tol.rtol * y[i].abs().max(y_new[i].abs());
            sum += (err / scale).powi(2);
        }
        (y_new, k7, (sum / N as f64).sqrt())
    }

    /// Takes one accepted step of at most `self.h` and at most up to `limit`
    /// (when given). Returns the size of the step taken.
    pub fn advance(&mut self, limit: Option<f64>) -> Result<f64, StepError> {
        loop {
            if self.steps >= self.max_steps {
                return Err(StepError::Budget);
            }
            let mut h = self.h;
            let mut clipped = false;
            if let Some(end) = limit {
                let remaining = end - self.t;
                if remaining.abs() <= h.abs() {
                    h = remaining;
                    clipped = true;
                }
            }
            if h.abs() <= 1e-15 * self.t.abs().max(1e-300) && !clipped {
                return Err(StepError::Underflow);
            }
            self.steps += 1;
            let (y_new, k7, err) = self.attempt(h);
            if err <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
                let fac = if err == 0.0 { FAC_MAX } else { (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX) };
                self.t = if clipped { limit.unwrap() } else { self.t + h };
                self.y = y_new;
                self.k1 = k7;
                // a step shortened to land on `limit` says nothing about the next one
                if !clipped {
                    self.h = h * fac;
                }
                return Ok(h);
            }
            let fac = if err.is_finite() { (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0) } else { FAC_MIN };
            self.h = h * fac;
        }
    }

    /// Integrates exactly to `t_end`.
    pub fn integrate_to(&mut self, t_end: f64) -> Result<(), StepError> {
        if (t_end - self.t) * self.h < 0.0 {
            self.h = -self.h;
        }
        while self.t != t_end {
            self.advance(Some(t_end))?;
        }
        Ok(())
    }

    pub fn derivative(&self) -> &[f64; N] {
        &self.k1
    }
}
