//! The polynomial Hamiltonian families and their construction.
//!
//! Every family member is `x' = f(y, eps)`, `y' = -g(x, eps)` with first
//! integral `H = F(y) + G(x)`, where
//!
//! * `g(x, eps) = x * prod((x - b_i)^2 + eps)`, times `(s - x)` for the
//!   even-degree families with saddle abscissa `s`;
//! * `f(y, eps) = y * prod((y - a_j)^2 + eps)` (same shape, no saddle factor)
//!   for separable families and `f(y) = y` for potential ones.
//!
//! `F` and `G` are the primitives vanishing at zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{rational_from_f64, rational_int, FloatPoly, Rational, RationalPoly};

/// Largest `k` accepted for separable families.
pub const MAX_K_SEPARABLE: usize = 4;
/// Largest `k` accepted for potential families.
pub const MAX_K_POTENTIAL: usize = 6;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    PotentialOdd,
    PotentialEven,
    SeparableOdd,
    SeparableEven,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Parity {
    Odd,
    Even,
}

impl Family {
    pub fn is_even(self) -> bool {
        matches!(self, Family::PotentialEven | Family::SeparableEven)
    }

    pub fn is_separable(self) -> bool {
        matches!(self, Family::SeparableOdd | Family::SeparableEven)
    }

    pub fn parity(self) -> Parity {
        if self.is_even() {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn from_parts(separable: bool, parity: Parity) -> Self {
        match (separable, parity) {
            (false, Parity::Odd) => Family::PotentialOdd,
            (false, Parity::Even) => Family::PotentialEven,
            (true, Parity::Odd) => Family::SeparableOdd,
            (true, Parity::Even) => Family::SeparableEven,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::PotentialOdd => "potential-odd",
            Family::PotentialEven => "potential-even",
            Family::SeparableOdd => "separable-odd",
            Family::SeparableEven => "separable-even",
        }
    }

    /// Lower bound on the number of critical periods for small `eps`.
    pub fn required_critical_points(self, k: usize) -> usize {
        let k = k as i64;
        let n = match self {
            Family::PotentialOdd => 2 * k - 1,
            Family::PotentialEven => 2 * k - 2,
            Family::SeparableOdd => 2 * k * k + 4 * k - 1,
            Family::SeparableEven => 2 * k * k - 2,
        };
        n.max(0) as usize
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "potential" | "potential-odd" => Ok(Family::PotentialOdd),
            "potential-even" => Ok(Family::PotentialEven),
            "separable" | "separable-odd" => Ok(Family::SeparableOdd),
            "separable-even" => Ok(Family::SeparableEven),
            other => Err(Error::Validation(format!("unknown family '{other}'"))),
        }
    }
}

/// Full parameterization of one family member.
///
/// When `e_scaled` is set, `betas` and `saddle_beta` are multipliers of Euler's
/// number: the abscissae actually used are `e * b`.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub family: Family,
    #[serde(default)]
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub saddle_beta: Option<f64>,
    #[serde(default)]
    pub e_scaled: bool,
}

fn check_distinct_nonzero(name: &str, vals: &[f64]) -> Result<()> {
    for (i, &v) in vals.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Validation(format!("{name}[{i}] is not finite")));
        }
        if v == 0.0 {
            return Err(Error::Validation(format!("{name}[{i}] is zero")));
        }
        if vals[..i].contains(&v) {
            return Err(Error::Validation(format!("duplicate value {v} in {name}")));
        }
    }
    Ok(())
}

impl SystemSpec {
    pub fn new(family: Family, alphas: Vec<f64>, betas: Vec<f64>, epsilon: f64, saddle_beta: Option<f64>) -> Self {
        Self { family, alphas, betas, epsilon, saddle_beta, e_scaled: false }
    }

    /// Degree parameter: `n = 2k + 1` for odd families and `n = 2k` for even.
    pub fn k(&self) -> usize {
        if self.family.is_even() {
            self.betas.len() + 1
        } else {
            self.betas.len()
        }
    }

    /// Degree of the vector field.
    pub fn degree(&self) -> usize {
        let k = self.k();
        if self.family.is_even() {
            2 * k
        } else {
            2 * k + 1
        }
    }

    pub fn required_critical_points(&self) -> usize {
        self.family.required_critical_points(self.k())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::Validation(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        check_distinct_nonzero("betas", &self.betas)?;
        check_distinct_nonzero("alphas", &self.alphas)?;
        let k = self.k();
        if self.family.is_separable() {
            if self.family == Family::SeparableOdd && self.alphas.is_empty() {
                return Err(Error::Validation("separable family requires k >= 1 alphas".into()));
            }
            if self.alphas.len() != self.betas.len() {
                return Err(Error::Validation(format!(
                    "separable family needs as many alphas as betas ({} vs {})",
                    self.alphas.len(),
                    self.betas.len()
                )));
            }
            if k > MAX_K_SEPARABLE {
                return Err(Error::Validation(format!(
                    "k = {k} exceeds the supported range k <= {MAX_K_SEPARABLE} for separable families"
                )));
            }
        } else {
            if !self.alphas.is_empty() {
                return Err(Error::Validation("potential families take no alphas".into()));
            }
            if k > MAX_K_POTENTIAL {
                return Err(Error::Validation(format!(
                    "k = {k} exceeds the supported range k <= {MAX_K_POTENTIAL} for potential families"
                )));
            }
        }
        match (self.family.is_even(), self.saddle_beta) {
            (true, None) => return Err(Error::Validation("even-degree family requires saddle_beta".into())),
            (true, Some(s)) => {
                if !s.is_finite() || s <= 0.0 {
                    return Err(Error::Validation(format!("saddle_beta must be positive, got {s}")));
                }
                if let Some(b) = self.betas.iter().find(|b| b.abs() >= s) {
                    return Err(Error::Validation(format!(
                        "saddle_beta {s} must exceed every |beta| in magnitude (found {b})"
                    )));
                }
            }
            (false, Some(_)) => {
                return Err(Error::Validation("odd-degree family takes no saddle_beta".into()));
            }
            (false, None) => {}
        }
        Ok(())
    }

    /// Abscissae of the cusps, with the `e` scaling applied.
    pub fn beta_values(&self) -> Vec<f64> {
        let s = if self.e_scaled { std::f64::consts::E } else { 1.0 };
        self.betas.iter().map(|b| b * s).collect()
    }

    pub fn saddle_value(&self) -> Option<f64> {
        let s = if self.e_scaled { std::f64::consts::E } else { 1.0 };
        self.saddle_beta.map(|b| b * s)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    pub fn unperturbed(&self) -> Self {
        self.with_epsilon(0.0)
    }

    /// The harmonic oscillator `x' = y, y' = -x`, i.e. the potential family
    /// with empty products.
    pub fn harmonic() -> Self {
        Self::new(Family::PotentialOdd, vec![], vec![], 0.0, None)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SystemSpec =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("bad spec JSON: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianPair> {
        self.validate()?;
        let g = if self.e_scaled {
            AxisPotential::e_scaled(&self.betas, self.saddle_beta, self.epsilon)?
        } else {
            AxisPotential::rational(&self.betas, self.saddle_beta, self.epsilon)?
        };
        let f = if self.family.is_separable() {
            AxisPotential::rational(&self.alphas, None, self.epsilon)?
        } else {
            AxisPotential::identity()
        };
        let exactness_flag = g.exact.is_some() && f.exact.is_some();
        Ok(HamiltonianPair { g, f, exactness_flag })
    }
}

/// Exact force and potential on one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactAxis {
    pub force: RationalPoly,
    pub potential: RationalPoly,
}

/// Structure of an `e`-scaled axis at `eps = 0`:
/// `potential(x) = e^power * unit_potential(x / e)`, where `unit_potential`
/// has rational coefficients built from the integer multipliers.
#[derive(Clone, Debug, PartialEq)]
pub struct EScaledAxis {
    pub unit_force: RationalPoly,
    pub unit_potential: RationalPoly,
    pub power: u32,
}

/// Force `g` (or `f`) and its primitive `G` (or `F`) on one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisPotential {
    pub force: FloatPoly,
    pub potential: FloatPoly,
    pub exact: Option<ExactAxis>,
    pub e_scaled: Option<EScaledAxis>,
}

/// `x * prod((x - r)^2 + eps) * (s - x)?` over the rationals.
fn rational_force(roots: &[Rational], saddle: Option<&Rational>, eps: &Rational) -> RationalPoly {
    let mut p = RationalPoly::x();
    for r in roots {
        let two_r = r * rational_int(2);
        let quad = RationalPoly::new(vec![r * r + eps, -two_r, rational_int(1)]);
        p = &p * &quad;
    }
    if let Some(s) = saddle {
        p = &p * &RationalPoly::new(vec![s.clone(), rational_int(-1)]);
    }
    p
}

impl AxisPotential {
    /// `f(y) = y`, `F(y) = y^2 / 2`.
    pub fn identity() -> Self {
        let force = RationalPoly::x();
        let potential = force.antiderivative();
        Self {
            force: force.to_float(),
            potential: potential.to_float(),
            exact: Some(ExactAxis { force, potential }),
            e_scaled: None,
        }
    }

    fn rational(roots: &[f64], saddle: Option<f64>, eps: f64) -> Result<Self> {
        let roots: Vec<Rational> = roots.iter().map(|&r| rational_from_f64(r)).collect::<Result<_>>()?;
        let saddle = saddle.map(rational_from_f64).transpose()?;
        let eps = rational_from_f64(eps)?;
        let force = rational_force(&roots, saddle.as_ref(), &eps);
        let potential = force.antiderivative();
        Ok(Self {
            force: force.to_float(),
            potential: potential.to_float(),
            exact: Some(ExactAxis { force, potential }),
            e_scaled: None,
        })
    }

    fn e_scaled(multipliers: &[f64], saddle: Option<f64>, eps: f64) -> Result<Self> {
        let e = std::f64::consts::E;
        let unit_roots: Vec<Rational> = multipliers.iter().map(|&r| rational_from_f64(r)).collect::<Result<_>>()?;
        let unit_saddle = saddle.map(rational_from_f64).transpose()?;
        let unit_force = rational_force(&unit_roots, unit_saddle.as_ref(), &rational_int(0));
        let unit_potential = unit_force.antiderivative();
        let power = unit_potential.degree().unwrap_or(0) as u32;

        let mut force = FloatPoly::new(vec![0.0, 1.0]);
        for &m in multipliers {
            let r = e * m;
            force = force.mul(&FloatPoly::new(vec![r * r + eps, -2.0 * r, 1.0]));
        }
        if let Some(s) = saddle {
            force = force.mul(&FloatPoly::new(vec![e * s, -1.0]));
        }
        let potential = force.antiderivative();
        Ok(Self { force, potential, exact: None, e_scaled: Some(EScaledAxis { unit_force, unit_potential, power }) })
    }

    /// Slope of the force at the origin.
    pub fn stiffness(&self) -> f64 {
        self.force.coeff(1)
    }
}

/// The separable Hamiltonian `H = F(y) + G(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianPair {
    /// `g` and `G`, acting along `x`.
    pub g: AxisPotential,
    /// `f` and `F`, acting along `y`.
    pub f: AxisPotential,
    pub exactness_flag: bool,
}

impl HamiltonianPair {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.f.potential.eval(y) + self.g.potential.eval(x)
    }

    /// Exact `H(x, y)` when both axes carry rational coefficients.
    pub fn value_exact(&self, x: &Rational, y: &Rational) -> Option<Rational> {
        let g = self.g.exact.as_ref()?;
        let f = self.f.exact.as_ref()?;
        Some(f.potential.eval(y) + g.potential.eval(x))
    }
}

pub fn hamiltonian_value(pair: &HamiltonianPair, x: f64, y: f64) -> f64 {
    pair.value(x, y)
}

pub fn build_potential(betas: &[f64], epsilon: f64, saddle_beta: Option<f64>) -> Result<(SystemSpec, HamiltonianPair)> {
    let family = if saddle_beta.is_some() { Family::PotentialEven } else { Family::PotentialOdd };
    let spec = SystemSpec::new(family, vec![], betas.to_vec(), epsilon, saddle_beta);
    let pair = spec.hamiltonian()?;
    Ok((spec, pair))
}

pub fn build_separable(
    alphas: &[f64],
    betas: &[f64],
    epsilon: f64,
    saddle_beta: Option<f64>,
) -> Result<(SystemSpec, HamiltonianPair)> {
    let family = if saddle_beta.is_some() { Family::SeparableEven } else { Family::SeparableOdd };
    let spec = SystemSpec::new(family, alphas.to_vec(), betas.to_vec(), epsilon, saddle_beta);
    let pair = spec.hamiltonian()?;
    Ok((spec, pair))
}

/// The `e`-scaled example families: for odd parity `alphas = 1..=k`,
/// `betas = e * (1..=k)`; for even parity `alphas = 1..k`, `betas = e * (1..k)`
/// and saddle at `e * k^2`.
pub fn example_family(k: usize, parity: Parity, epsilon: f64) -> Result<SystemSpec> {
    let (m, saddle, family) = match parity {
        Parity::Odd => (k, None, Family::SeparableOdd),
        Parity::Even => {
            if k == 0 {
                return Err(Error::Validation("even example family needs k >= 1".into()));
            }
            (k - 1, Some((k * k) as f64), Family::SeparableEven)
        }
    };
    let idx: Vec<f64> = (1..=m).map(|i| i as f64).collect();
    let spec = SystemSpec { family, alphas: idx.clone(), betas: idx, epsilon, saddle_beta: saddle, e_scaled: true };
    spec.validate()?;
    Ok(spec)
}
