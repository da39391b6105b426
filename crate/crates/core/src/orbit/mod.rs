//! Closed orbits and the period function.
//!
//! The period at energy `h` is computed two independent ways:
//!
//! * [`period_return_time`] integrates the flow from `(x_+(h), 0)` around the
//!   center back to the section `{y = 0, x > 0}`, landing on the section
//!   exactly by switching the independent variable from `t` to `y` for the
//!   last stretch;
//! * [`period_quadrature_potential`] evaluates the period integral
//!   `sqrt(2) * int dx / sqrt(h - G(x))` with Chebyshev-weighted Gauss nodes
//!   (potential families only).

mod dopri;
mod quadrature;

use serde::{Deserialize, Serialize};

pub use dopri::{Dopri5, StepError, Tolerances};
pub use quadrature::period_quadrature_potential;

use crate::energy::{collect_energies, EnergyLedger};
use crate::error::{Error, Result};
use crate::system::{AxisPotential, HamiltonianPair, SystemSpec};

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Positive => 1.0,
            Side::Negative => -1.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Side::Positive => "positive",
            Side::Negative => "negative",
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodMethod {
    ReturnTime,
    Quadrature,
}

impl PeriodMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PeriodMethod::ReturnTime => "return-time",
            PeriodMethod::Quadrature => "quadrature",
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct PeriodSample {
    pub h: f64,
    #[serde(rename = "T")]
    pub period: f64,
    pub method: PeriodMethod,
    pub err_estimate: f64,
    /// Largest `|H - h|` seen along the orbit (return time only).
    pub energy_drift: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TurningPoints {
    pub x_minus: f64,
    pub x_plus: f64,
    pub y_minus: f64,
    pub y_plus: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitTrace {
    /// One revolution; the last point returns to the first.
    pub points: Vec<(f64, f64)>,
    pub h: f64,
    pub period: f64,
    pub max_energy_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitOptions {
    pub tol: Tolerances,
    pub max_steps: usize,
    /// Relative distance to an unperturbed critical energy below which a
    /// sample is refused.
    pub separatrix_guard: f64,
    /// Admissible drift is `drift_bound * max(1, |h|)`.
    pub drift_bound: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self { tol: Tolerances::default(), max_steps: 5_000_000, separatrix_guard: 1e-12, drift_bound: 1e-9 }
    }
}

/// A spec together with its polynomials and skeleton energies, ready for
/// repeated period evaluations.
#[derive(Clone, Debug)]
pub struct HamiltonianSystem {
    pub spec: SystemSpec,
    pub pair: HamiltonianPair,
    /// Critical energies of the `eps = 0` skeleton.
    pub skeleton: EnergyLedger,
    /// `H(saddle, 0, eps)`, the top of the annulus for even families.
    pub annulus_top: Option<f64>,
    pub options: OrbitOptions,
}

impl HamiltonianSystem {
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        let pair = spec.hamiltonian()?;
        let skeleton = collect_energies(spec)?;
        let annulus_top = spec.saddle_value().map(|s| pair.g.potential.eval(s));
        Ok(Self { spec: spec.clone(), pair, skeleton, annulus_top, options: OrbitOptions::default() })
    }

    pub fn with_options(mut self, options: OrbitOptions) -> Self {
        self.options = options;
        self
    }

    pub fn hamiltonian(&self, x: f64, y: f64) -> f64 {
        self.pair.value(x, y)
    }

    fn positive_limit(&self) -> Option<f64> {
        self.spec.saddle_value()
    }

    /// Checks that `h` labels a closed orbit we are willing to integrate.
    pub fn admissible(&self, h: f64) -> Result<()> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Validation(format!("energy must be positive and finite, got {h}")));
        }
        if let Some(top) = self.annulus_top {
            if h >= top * (1.0 - self.options.separatrix_guard) {
                return Err(Error::Range { h, side: "positive", limit: top });
            }
        }
        if self.spec.epsilon == 0.0 {
            let guard = self.options.separatrix_guard;
            if self.skeleton.interior().iter().any(|e| (h - e.h).abs() <= guard * e.h.abs()) {
                return Err(Error::NearSeparatrix { h });
            }
        }
        Ok(())
    }

    pub fn turning_points(&self, h: f64) -> Result<TurningPoints> {
        Ok(TurningPoints {
            x_minus: turning_point(&self.pair.g, h, Side::Negative, None)?,
            x_plus: turning_point(&self.pair.g, h, Side::Positive, self.positive_limit())?,
            y_minus: turning_point(&self.pair.f, h, Side::Negative, None)?,
            y_plus: turning_point(&self.pair.f, h, Side::Positive, None)?,
        })
    }

    fn drift_bound(&self, h: f64) -> f64 {
        self.options.drift_bound * h.abs().max(1.0)
    }
}

/// Solves `potential(x) = h` on one side of the origin, where the potential
/// increases monotonically away from 0 (up to `limit` when given).
///
/// Bisection shrinks a doubling bracket to a safe width, then guarded Newton
/// steps finish to near machine precision.
pub fn turning_point(axis: &AxisPotential, h: f64, side: Side, limit: Option<f64>) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Validation(format!("turning point needs h > 0, got {h}")));
    }
    let s = side.sign();
    let phi = |t: f64| axis.potential.eval(s * t) - h;
    let dphi = |t: f64| s * axis.force.eval(s * t);

    let limit = limit.map(f64::abs);
    if let Some(l) = limit {
        if phi(l) <= 0.0 {
            return Err(Error::Range { h, side: side.name(), limit: axis.potential.eval(s * l) });
        }
    }
    let stiff = axis.stiffness();
    let mut hi = if stiff > 0.0 { (2.0 * h / stiff).sqrt() } else { 1.0 };
    if let Some(l) = limit {
        hi = hi.min(l);
    }
    let mut lo = 0.0;
    let mut expansions = 0;
    while phi(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if let Some(l) = limit {
            hi = hi.min(l);
        }
        expansions += 1;
        if !hi.is_finite() || expansions > 2000 {
            return Err(Error::Range { h, side: side.name(), limit: f64::INFINITY });
        }
    }

    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = phi(x);
        if fx == 0.0 {
            return Ok(s * x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dphi(x);
        let mut next = x - fx / d;
        if !(d > 0.0 && next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 1e-15 * x || hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(s * x)
}

/// `2 pi / sqrt(f'(0) g'(0))`, the limit of the period at the center.
pub fn linearized_period(pair: &HamiltonianPair) -> f64 {
    2.0 * std::f64::consts::PI / (pair.f.stiffness() * pair.g.stiffness()).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    /// `{y = 0, x > 0}` reached from `y > 0`: one full revolution.
    PositiveX,
    /// `{y = 0, x < 0}` reached from `y < 0`: half a revolution.
    NegativeX,
}

struct SectionHit {
    time: f64,
    x: f64,
    max_drift: f64,
}

fn map_step_error(e: StepError, h: f64, steps: usize) -> Error {
    match e {
        StepError::Underflow => Error::NearSeparatrix { h },
        StepError::Budget => Error::IntegrationBudget { h, steps },
    }
}

/// Integrates from `(x0, 0)` until the requested section crossing, then
/// exchanges `t` for `y` as independent variable to land on `y = 0`.
fn run_to_section(sys: &HamiltonianSystem, h: f64, x0: f64, section: Section) -> Result<SectionHit> {
    let f = &sys.pair.f;
    let g = &sys.pair.g;
    let opts = sys.options;
    let field = |_t: f64, s: &[f64; 2]| [f.force.eval(s[1]), -g.force.eval(s[0])];

    let t0 = linearized_period(&sys.pair);
    let local = (x0.abs() / g.force.eval(x0).abs().max(1e-300)).sqrt();
    let dt0 = 1e-3 * t0.min(local);
    let mut stepper = Dopri5::new(field, 0.0, [x0, 0.0], dt0, opts.tol, opts.max_steps);
    let mut max_drift = 0.0f64;
    let mut prev_y = 0.0;
    loop {
        stepper.advance(None).map_err(|e| map_step_error(e, h, stepper.steps))?;
        let [x, y] = stepper.y;
        max_drift = max_drift.max((sys.hamiltonian(x, y) - h).abs());
        let crossed = match section {
            Section::PositiveX => prev_y > 0.0 && y <= 0.0 && x > 0.0,
            Section::NegativeX => prev_y < 0.0 && y >= 0.0 && x < 0.0,
        };
        if crossed {
            break;
        }
        prev_y = y;
    }
    let [x_over, y_over] = stepper.y;
    let t_over = stepper.t;
    if y_over == 0.0 {
        return Ok(SectionHit { time: t_over, x: x_over, max_drift });
    }

    // d(x, t)/dy along the orbit; -g(x) stays away from zero at a transversal section.
    let exchanged = |y: f64, s: &[f64; 2]| {
        let gy = -g.force.eval(s[0]);
        [f.force.eval(y) / gy, 1.0 / gy]
    };
    let mut end = Dopri5::new(exchanged, y_over, [x_over, t_over], -y_over, opts.tol, 10_000);
    end.integrate_to(0.0).map_err(|e| map_step_error(e, h, end.steps))?;
    let [x_end, t_end] = end.y;
    max_drift = max_drift.max((sys.hamiltonian(x_end, 0.0) - h).abs());
    Ok(SectionHit { time: t_end, x: x_end, max_drift })
}

/// Period by return time to `{y = 0, x > 0}` starting at `(x_+(h), 0)`.
pub fn period_return_time(sys: &HamiltonianSystem, h: f64) -> Result<PeriodSample> {
    sys.admissible(h)?;
    let x_plus = turning_point(&sys.pair.g, h, Side::Positive, sys.positive_limit())?;
    let hit = run_to_section(sys, h, x_plus, Section::PositiveX)?;
    let bound = sys.drift_bound(h);
    if hit.max_drift > bound {
        return Err(Error::EnergyDrift { h, drift: hit.max_drift, bound });
    }
    let closure = (hit.x - x_plus).abs() / x_plus.abs();
    Ok(PeriodSample {
        h,
        period: hit.time,
        method: PeriodMethod::ReturnTime,
        err_estimate: hit.time * closure.max(sys.options.tol.rtol),
        energy_drift: Some(hit.max_drift),
    })
}

/// Time from `(x_+, 0)` to `(x_-, 0)`; twice this is the period whenever
/// the orbit is symmetric about the `x`-axis.
pub fn half_period_return_time(sys: &HamiltonianSystem, h: f64) -> Result<f64> {
    sys.admissible(h)?;
    let x_plus = turning_point(&sys.pair.g, h, Side::Positive, sys.positive_limit())?;
    Ok(run_to_section(sys, h, x_plus, Section::NegativeX)?.time)
}

/// `n_points` states equally spaced in time along one revolution, followed
/// by the closing point.
pub fn trace_orbit(sys: &HamiltonianSystem, h: f64, n_points: usize) -> Result<OrbitTrace> {
    if n_points == 0 {
        return Err(Error::Validation("trace needs at least one point".into()));
    }
    let sample = period_return_time(sys, h)?;
    let period = sample.period;
    let x_plus = turning_point(&sys.pair.g, h, Side::Positive, sys.positive_limit())?;
    let f = &sys.pair.f;
    let g = &sys.pair.g;
    let field = |_t: f64, s: &[f64; 2]| [f.force.eval(s[1]), -g.force.eval(s[0])];
    let dt0 = 1e-3 * period;
    let mut stepper = Dopri5::new(field, 0.0, [x_plus, 0.0], dt0, sys.options.tol, sys.options.max_steps);
    let mut points = Vec::with_capacity(n_points + 1);
    points.push((x_plus, 0.0));
    let mut max_err = 0.0f64;
    for i in 1..=n_points {
        let t = period * i as f64 / n_points as f64;
        stepper.integrate_to(t).map_err(|e| map_step_error(e, h, stepper.steps))?;
        let [x, y] = stepper.y;
        max_err = max_err.max((sys.hamiltonian(x, y) - h).abs());
        points.push((x, y));
    }
    let bound = sys.drift_bound(h);
    if max_err > bound {
        return Err(Error::EnergyDrift { h, drift: max_err, bound });
    }
    Ok(OrbitTrace { points, h, period, max_energy_error: max_err })
}
