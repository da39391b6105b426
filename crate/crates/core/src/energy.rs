//! Singular points, the sorted ledger of critical energies, and the
//! distinctness hypothesis on those energies.
//!
//! At `eps = 0` the equilibria sit on the grid `{0, b_1, ..} x {0, a_1, ..}`.
//! Their energies `H(b_i, a_j)` split the energy axis into period annuli; the
//! whole construction needs them pairwise distinct. For rational parameters
//! the check is exact. For the `e`-scaled families every energy has the form
//! `r + c * e^n` with rational `r`, `c`, and distinctness is certified from
//! the rational parts alone plus the irrationality of `e^n`.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::poly::{format_rational, rational_from_f64, rational_to_f64, Rational};
use crate::system::{example_family, Parity, SystemSpec};

/// Default relative tolerance of the numeric gap check.
pub const DEFAULT_GAP_TOL: f64 = 1e-9;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SingularityKind {
    Center,
    Cusp,
    Saddle,
    Degenerate,
}

/// Exact form of an energy value.
#[derive(Clone, Debug, PartialEq)]
pub enum ExactEnergy {
    Rational(Rational),
    /// `rational + e_coefficient * e^power`
    EScaled {
        rational: Rational,
        e_coefficient: Rational,
        power: u32,
    },
}

impl ExactEnergy {
    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            ExactEnergy::Rational(r) => Some(r),
            ExactEnergy::EScaled { .. } => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExactEnergy::Rational(r) => rational_to_f64(r),
            ExactEnergy::EScaled { rational, e_coefficient, power } => {
                rational_to_f64(rational) + rational_to_f64(e_coefficient) * std::f64::consts::E.powi(*power as i32)
            }
        }
    }
}

impl std::fmt::Display for ExactEnergy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExactEnergy::Rational(r) => write!(f, "{}", format_rational(r)),
            ExactEnergy::EScaled { rational, e_coefficient, power } => {
                write!(f, "{} + ({})e^{}", format_rational(rational), format_rational(e_coefficient), power)
            }
        }
    }
}

#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct Singularity {
    pub x: f64,
    pub y: f64,
    pub kind: SingularityKind,
    pub energy: f64,
    #[serde(skip)]
    pub energy_exact: Option<ExactEnergy>,
    /// Grid position `(i, j)` of `(b_i, a_j)`, with index 0 the origin axis.
    #[serde(skip)]
    pub grid: (usize, usize),
}

/// Rational enclosure `lo < e < hi` from the Taylor series with `terms`
/// terms and the usual `1 / (N! N)` tail bound.
pub fn e_enclosure(terms: u32) -> (Rational, Rational) {
    let mut sum = Rational::zero();
    let mut fact = BigInt::one();
    for n in 0..=terms {
        if n > 0 {
            fact *= BigInt::from(n);
        }
        sum += Rational::new(BigInt::one(), fact.clone());
    }
    let tail = Rational::new(BigInt::one(), fact * BigInt::from(terms.max(1)));
    (sum.clone(), sum + tail)
}

fn e_power_enclosure(power: u32) -> (Rational, Rational) {
    let (lo, hi) = e_enclosure(40);
    (num_traits::pow(lo, power as usize), num_traits::pow(hi, power as usize))
}

/// Exact comparison of two energies of the same system.
pub fn compare_exact(a: &ExactEnergy, b: &ExactEnergy) -> Option<Ordering> {
    match (a, b) {
        (ExactEnergy::Rational(x), ExactEnergy::Rational(y)) => Some(x.cmp(y)),
        (
            ExactEnergy::EScaled { rational: ra, e_coefficient: ca, power: pa },
            ExactEnergy::EScaled { rational: rb, e_coefficient: cb, power: pb },
        ) if pa == pb => {
            let dr = ra - rb;
            let dc = ca - cb;
            if dc.is_zero() {
                return Some(dr.cmp(&Rational::zero()));
            }
            // dr + dc * e^n with e^n irrational: never zero, sign from the enclosure.
            let (lo, hi) = e_power_enclosure(*pa);
            let (vlo, vhi) =
                if dc.is_positive() { (&dr + &dc * &lo, &dr + &dc * &hi) } else { (&dr + &dc * &hi, &dr + &dc * &lo) };
            if vlo.is_positive() {
                Some(Ordering::Greater)
            } else if vhi.is_negative() {
                Some(Ordering::Less)
            } else {
                None
            }
        }
        _ => None,
    }
}

fn axis_coords(values: &[f64], e_scaled: bool) -> Result<Vec<(f64, Rational)>> {
    let scale = if e_scaled { std::f64::consts::E } else { 1.0 };
    let mut out = vec![(0.0, Rational::zero())];
    for &v in values {
        out.push((v * scale, rational_from_f64(v)?));
    }
    Ok(out)
}

/// Equilibria of the unperturbed system, kinds assigned by grid pattern.
pub fn singular_points(spec: &SystemSpec) -> Result<Vec<Singularity>> {
    if spec.epsilon > 0.0 {
        return Err(Error::Validation(
            "perturbed system has a unique equilibrium (a global center at the origin)".into(),
        ));
    }
    let pair = spec.hamiltonian()?;
    let mut xs = axis_coords(&spec.betas, spec.e_scaled)?;
    let saddle_index = spec.saddle_beta.map(|s| -> Result<usize> {
        xs.push((if spec.e_scaled { s * std::f64::consts::E } else { s }, rational_from_f64(s)?));
        Ok(xs.len() - 1)
    });
    let saddle_index = saddle_index.transpose()?;
    let ys = axis_coords(&spec.alphas, false)?;

    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for (i, (x, xr)) in xs.iter().enumerate() {
        for (j, (y, yr)) in ys.iter().enumerate() {
            let kind = match (i, j) {
                (0, 0) => SingularityKind::Center,
                (i, 0) if Some(i) == saddle_index => SingularityKind::Saddle,
                (_, 0) | (0, _) => SingularityKind::Cusp,
                _ => SingularityKind::Degenerate,
            };
            let exact = if let (Some(g), Some(f)) = (&pair.g.exact, &pair.f.exact) {
                Some(ExactEnergy::Rational(f.potential.eval(yr) + g.potential.eval(xr)))
            } else if let (Some(g), Some(f)) = (&pair.g.e_scaled, &pair.f.exact) {
                // xr holds the multiplier of e.
                Some(ExactEnergy::EScaled {
                    rational: f.potential.eval(yr),
                    e_coefficient: g.unit_potential.eval(xr),
                    power: g.power,
                })
            } else {
                None
            };
            let energy = match &exact {
                Some(e) => e.to_f64(),
                None => pair.value(*x, *y),
            };
            out.push(Singularity { x: *x, y: *y, kind, energy, energy_exact: exact, grid: (i, j) });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerEntry {
    pub h: f64,
    pub source: Singularity,
}

impl LedgerEntry {
    pub fn h_exact(&self) -> Option<&Rational> {
        self.source.energy_exact.as_ref().and_then(|e| e.as_rational())
    }
}

impl Serialize for LedgerEntry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Source {
            x: f64,
            y: f64,
            kind: SingularityKind,
        }
        #[derive(Serialize)]
        struct Row {
            h: f64,
            h_exact: Option<String>,
            source: Source,
        }
        Row {
            h: self.h,
            h_exact: self.h_exact().map(format_rational),
            source: Source { x: self.source.x, y: self.source.y, kind: self.source.kind },
        }
        .serialize(s)
    }
}

/// Sorted critical energies of the unperturbed skeleton.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger {
    /// Ascending; `entries[0]` is the center with `h = 0`.
    pub entries: Vec<LedgerEntry>,
    /// Saddle energy bounding the annulus of even-degree families.
    pub upper: Option<LedgerEntry>,
    /// Smallest gap between consecutive entries, `None` for a single entry.
    pub min_gap: Option<f64>,
    min_gap_at: Option<usize>,
}

fn order_entries(a: &LedgerEntry, b: &LedgerEntry) -> Ordering {
    match (&a.source.energy_exact, &b.source.energy_exact) {
        (Some(x), Some(y)) => compare_exact(x, y).unwrap_or_else(|| a.h.total_cmp(&b.h)),
        _ => a.h.total_cmp(&b.h),
    }
}

fn gap(a: &LedgerEntry, b: &LedgerEntry) -> f64 {
    match (a.h_exact(), b.h_exact()) {
        (Some(x), Some(y)) => rational_to_f64(&(y - x)),
        _ => b.h - a.h,
    }
}

impl EnergyLedger {
    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.h).collect()
    }

    /// Interior critical energies (everything but the center).
    pub fn interior(&self) -> &[LedgerEntry] {
        &self.entries[1..]
    }

    pub fn upper_h(&self) -> Option<f64> {
        self.upper.as_ref().map(|u| u.h)
    }

    /// Consecutive open annulus intervals; the last one ends at the saddle
    /// energy or `+inf`.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.entries.windows(2).map(|w| (w[0].h, w[1].h)).collect();
        let last = self.entries.last().map_or(0.0, |e| e.h);
        out.push((last, self.upper_h().unwrap_or(f64::INFINITY)));
        out
    }

    fn witness(&self) -> Option<(Singularity, Singularity)> {
        self.min_gap_at.map(|i| (self.entries[i].source.clone(), self.entries[i + 1].source.clone()))
    }

    /// Exact collision if one can be decided; `None` otherwise.
    fn exact_collision(&self) -> Option<usize> {
        self.entries.windows(2).position(|w| {
            matches!(
                (&w[0].source.energy_exact, &w[1].source.energy_exact),
                (Some(a), Some(b)) if compare_exact(a, b) == Some(Ordering::Equal)
            )
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut rows: Vec<&LedgerEntry> = self.entries.iter().collect();
        if let Some(u) = &self.upper {
            rows.push(u);
        }
        serde_json::to_value(rows).expect("ledger serializes")
    }
}

/// Builds the ledger without rejecting collisions.
pub fn collect_energies(spec: &SystemSpec) -> Result<EnergyLedger> {
    let points = singular_points(&spec.unperturbed())?;
    let saddle_x = spec.saddle_value();
    let mut entries = Vec::new();
    let mut upper = None;
    for p in points {
        let on_saddle_line = saddle_x.is_some_and(|s| p.x == s);
        if p.kind == SingularityKind::Saddle {
            upper = Some(LedgerEntry { h: p.energy, source: p });
        } else if !on_saddle_line {
            entries.push(LedgerEntry { h: p.energy, source: p });
        }
    }
    entries.sort_by(order_entries);
    let mut min_gap: Option<f64> = None;
    let mut min_gap_at = None;
    for (i, w) in entries.windows(2).enumerate() {
        let g = gap(&w[0], &w[1]);
        if min_gap.is_none_or(|m| g < m) {
            min_gap = Some(g);
            min_gap_at = Some(i);
        }
    }
    Ok(EnergyLedger { entries, upper, min_gap, min_gap_at })
}

/// The ledger, refusing specs whose critical energies collide.
pub fn critical_energy_ledger(spec: &SystemSpec) -> Result<EnergyLedger> {
    let ledger = collect_energies(spec)?;
    if let Some(i) = ledger.exact_collision() {
        let (a, b) = (&ledger.entries[i].source, &ledger.entries[i + 1].source);
        return Err(Error::HypothesisViolation {
            message: format!("H({}, {}) = H({}, {}) exactly", a.x, a.y, b.x, b.y),
            witness: Some(Box::new((a.clone(), b.clone()))),
        });
    }
    let all_exact = ledger.entries.iter().all(|e| e.source.energy_exact.is_some());
    if !all_exact {
        let verdict = check_hypothesis_numeric(&ledger, DEFAULT_GAP_TOL);
        if !verdict.distinct {
            return Err(Error::HypothesisViolation {
                message: format!("critical energies collide within tolerance (gap {:?})", verdict.min_gap),
                witness: verdict.witness,
            });
        }
    }
    Ok(ledger)
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictMethod {
    NumericGap,
    ExactRationalPairs,
}

#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct HypothesisVerdict {
    pub distinct: bool,
    pub method: VerdictMethod,
    pub min_gap: Option<f64>,
    pub witness: Option<Box<(Singularity, Singularity)>>,
    /// Even-degree families only: saddle energy dominates every interior one.
    pub dominance_ok: Option<bool>,
    /// Tolerance used by the numeric gap check.
    pub tolerance: Option<f64>,
}

/// Distinct iff the smallest gap exceeds `tol * max(1, |h_max|)`.
pub fn check_hypothesis_numeric(ledger: &EnergyLedger, tol: f64) -> HypothesisVerdict {
    let h_max = ledger.entries.iter().map(|e| e.h.abs()).fold(0.0, f64::max);
    let distinct = ledger.min_gap.is_none_or(|g| g > tol * h_max.max(1.0));
    let dominance_ok = ledger.upper.as_ref().map(|u| u.h.abs() > h_max);
    HypothesisVerdict {
        distinct,
        method: VerdictMethod::NumericGap,
        min_gap: ledger.min_gap,
        witness: if distinct { None } else { ledger.witness().map(Box::new) },
        dominance_ok,
        tolerance: Some(tol),
    }
}

/// Distinctness in the form "the values `H(b_i, 0)` are nonzero and pairwise
/// distinct" (plus saddle dominance for the even family), evaluated exactly.
/// For potential systems this is the same statement as the ledger check.
pub fn generalized_distinctness(spec: &SystemSpec) -> Result<bool> {
    let pair = spec.unperturbed().hamiltonian()?;
    let Some(g) = &pair.g.exact else {
        return Err(Error::NotEScaled("generalized check needs rational parameters".into()));
    };
    let vals: Vec<Rational> =
        spec.betas.iter().map(|&b| rational_from_f64(b).map(|r| g.potential.eval(&r))).collect::<Result<_>>()?;
    let mut ok = vals.iter().all(|v| !v.is_zero());
    for (i, v) in vals.iter().enumerate() {
        ok &= !vals[..i].contains(v);
    }
    if let Some(s) = spec.saddle_beta {
        let hs = g.potential.eval(&rational_from_f64(s)?).abs();
        ok &= vals.iter().all(|v| hs > v.abs());
    }
    Ok(ok)
}

/// Exact certification for an `e`-scaled spec.
///
/// Energies are `F(a_j) + e^n G_u(b_i)` with `F`, `G_u` rational. Two of them
/// with equal `i` differ iff the `F` values differ; with different `i` they
/// could only agree if `e^n` were the rational `dF / dG_u`. So pairwise
/// distinct `F(a_j)` and pairwise distinct `G_u(b_i)` certify the whole grid.
pub fn certify_e_scaled(spec: &SystemSpec) -> Result<HypothesisVerdict> {
    if !spec.e_scaled {
        return Err(Error::NotEScaled("spec is not e-scaled; use check_hypothesis_numeric on its ledger".into()));
    }
    let pair = spec.unperturbed().hamiltonian()?;
    let (Some(f), Some(g)) = (&pair.f.exact, &pair.g.e_scaled) else {
        return Err(Error::NotEScaled("e-scaled spec without rational y-axis".into()));
    };
    let mut f_vals = vec![Rational::zero()];
    for &a in &spec.alphas {
        f_vals.push(f.potential.eval(&rational_from_f64(a)?));
    }
    let mut g_vals = vec![Rational::zero()];
    for &b in &spec.betas {
        g_vals.push(g.unit_potential.eval(&rational_from_f64(b)?));
    }
    let pairwise_distinct = |v: &[Rational]| {
        let mut s = v.to_vec();
        s.sort();
        s.windows(2).all(|w| w[0] != w[1])
    };
    let distinct = pairwise_distinct(&f_vals) && pairwise_distinct(&g_vals);

    let dominance_ok = match spec.saddle_beta {
        None => None,
        Some(s) => {
            let gs = g.unit_potential.eval(&rational_from_f64(s)?);
            let (lo, _) = e_power_enclosure(g.power);
            // e^n (G_u(s) - G_u(b_i)) > F(a_j) for every grid point.
            let ok = g_vals.iter().all(|gi| {
                let d = &gs - gi;
                d.is_positive() && f_vals.iter().all(|fj| &lo * &d > *fj)
            });
            Some(ok)
        }
    };

    let ledger = collect_energies(spec)?;
    Ok(HypothesisVerdict {
        distinct,
        method: VerdictMethod::ExactRationalPairs,
        min_gap: ledger.min_gap,
        witness: if distinct { None } else { ledger.witness().map(Box::new) },
        dominance_ok,
        tolerance: None,
    })
}

/// Certification of the two `e`-scaled example families.
pub fn certify_example_family(k: usize, parity: Parity) -> Result<HypothesisVerdict> {
    certify_e_scaled(&example_family(k, parity, 0.0)?)
}

/// Exact when possible: certification for `e`-scaled specs, numeric gap check
/// on the ledger otherwise.
pub fn hypothesis_verdict(spec: &SystemSpec, tol: f64) -> Result<HypothesisVerdict> {
    if spec.e_scaled {
        certify_e_scaled(spec)
    } else {
        Ok(check_hypothesis_numeric(&collect_energies(spec)?, tol))
    }
}
