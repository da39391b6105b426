//! Sampling the period curve, locating its extrema, and checking lower
//! bounds on their number under a shrinking perturbation.

mod golden;

use rayon::prelude::*;
use serde::Serialize;

pub use golden::{golden_refine, ExtremumKind, Triplet};

use crate::energy::{hypothesis_verdict, DEFAULT_GAP_TOL};
use crate::error::{Error, Result};
use crate::orbit::{period_return_time, HamiltonianSystem, PeriodSample};
use crate::system::SystemSpec;

#[derive(Serialize, Clone, Copy, Debug, PartialEq)]
pub struct GridParams {
    pub global_points: usize,
    /// Per side of each cluster center.
    pub cluster_points: usize,
    pub cluster_decades: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { global_points: 256, cluster_points: 64, cluster_decades: 8 }
    }
}

/// Smallest relative offset of a cluster point from its center.
pub const CLUSTER_FLOOR: f64 = 1e-10;

#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct GridMeta {
    pub params: GridParams,
    pub h_floor: f64,
    pub h_roof: f64,
    pub cluster_centers: Vec<f64>,
    pub points: usize,
}

fn log_space(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let last = n.saturating_sub(1).max(1) as f64;
    (0..n).map(move |i| (a + (b - a) * i as f64 / last).exp())
}

fn assemble_grid(
    floor: f64,
    roof: f64,
    centers: &[f64],
    midpoints: &[f64],
    params: GridParams,
) -> (Vec<f64>, GridMeta) {
    let mut hs: Vec<f64> = log_space(floor, roof, params.global_points).collect();
    let top = CLUSTER_FLOOR * 10f64.powi(params.cluster_decades as i32);
    for &c in centers {
        for d in log_space(CLUSTER_FLOOR, top, params.cluster_points) {
            hs.push(c * (1.0 - d));
            hs.push(c * (1.0 + d));
        }
    }
    hs.extend_from_slice(midpoints);
    hs.retain(|&h| h > 0.0 && h.is_finite() && h <= roof);
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    let meta = GridMeta { params, h_floor: floor, h_roof: roof, cluster_centers: centers.to_vec(), points: hs.len() };
    (hs, meta)
}

fn dedup_centers(mut centers: Vec<f64>) -> Vec<f64> {
    centers.sort_by(f64::total_cmp);
    centers.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    centers
}

/// Energy grid from a ledger: a log-uniform global grid, two-sided
/// geometric clusters around each interior critical energy, and interval
/// midpoints.
pub fn build_h_grid(ledger: &crate::energy::EnergyLedger, params: GridParams) -> Vec<f64> {
    let interior: Vec<f64> = ledger.interior().iter().map(|e| e.h).collect();
    let (floor, roof) = grid_bounds(&interior, ledger.upper_h());
    let mids = midpoints(&ledger.intervals());
    assemble_grid(floor, roof, &dedup_centers(interior), &mids, params).0
}

fn grid_bounds(interior: &[f64], top: Option<f64>) -> (f64, f64) {
    let h1 = interior.first().copied().unwrap_or(1.0);
    let h_last = interior.last().copied().unwrap_or(1.0);
    let floor = 1e-6 * h1;
    let roof = match top {
        Some(t) => 0.999 * t,
        None => 1e3 * h_last,
    };
    (floor, roof)
}

fn midpoints(intervals: &[(f64, f64)]) -> Vec<f64> {
    intervals.iter().filter(|(_, b)| b.is_finite()).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// Grid for a concrete system. Besides the skeleton energies, clusters are
/// centered on the perturbed values `H(x_s, y_s, eps)` at the skeleton's
/// singular points, which is where the perturbed peaks sit.
pub fn system_grid(sys: &HamiltonianSystem, params: GridParams) -> (Vec<f64>, GridMeta) {
    let interior = sys.skeleton.interior();
    let mut centers: Vec<f64> = interior.iter().map(|e| e.h).collect();
    if sys.spec.epsilon > 0.0 {
        centers.extend(interior.iter().map(|e| sys.hamiltonian(e.source.x, e.source.y)));
    }
    let centers = dedup_centers(centers);
    let skeleton: Vec<f64> = interior.iter().map(|e| e.h).collect();
    let (floor, roof) = grid_bounds(&skeleton, sys.annulus_top);
    let mut edges = vec![0.0];
    edges.extend(centers.iter().copied());
    if let Some(t) = sys.annulus_top {
        edges.push(t);
    }
    let mids: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    assemble_grid(floor, roof, &centers, &mids, params)
}

#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct FailedSample {
    pub h: f64,
    pub reason: String,
}

#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct PeriodCurve {
    pub samples: Vec<PeriodSample>,
    pub grid_meta: Option<GridMeta>,
    pub failures: Vec<FailedSample>,
}

impl PeriodCurve {
    pub fn hs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.h).collect()
    }

    pub fn periods(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.period).collect()
    }

    /// Largest energy drift over all samples that report one.
    pub fn max_drift_ratio(&self) -> f64 {
        self.samples.iter().filter_map(|s| s.energy_drift.map(|d| d / s.h.abs().max(1.0))).fold(0.0, f64::max)
    }
}

/// Return-time periods over `grid`, evaluated in parallel. Individual
/// failures are logged; more than 10% of them fail the whole curve.
pub fn sample_curve(sys: &HamiltonianSystem, grid: &[f64]) -> Result<PeriodCurve> {
    let results: Vec<(f64, Result<PeriodSample>)> = grid.par_iter().map(|&h| (h, period_return_time(sys, h))).collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (h, r) in results {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => failures.push(FailedSample { h, reason: e.to_string() }),
        }
    }
    if failures.len() * 10 > grid.len() {
        return Err(Error::CurveQuality { failed: failures.len(), total: grid.len() });
    }
    Ok(PeriodCurve { samples, grid_meta: None, failures })
}

pub fn sample_system(sys: &HamiltonianSystem, params: GridParams) -> Result<PeriodCurve> {
    let (grid, meta) = system_grid(sys, params);
    let mut curve = sample_curve(sys, &grid)?;
    curve.grid_meta = Some(meta);
    Ok(curve)
}

#[derive(Serialize, Clone, Copy, Debug, PartialEq)]
pub struct CriticalPoint {
    pub h_star: f64,
    #[serde(rename = "T_star")]
    pub period_star: f64,
    pub kind: ExtremumKind,
    pub bracket: (f64, f64),
    pub refined_width: f64,
}

#[derive(Serialize, Clone, Copy, Debug, PartialEq)]
pub struct DetectOptions {
    /// Extremum pairs whose period difference is below `noise_rel * T` are
    /// treated as sampling noise.
    pub noise_rel: f64,
    pub refine_rel_width: f64,
    pub merge_rel: f64,
    pub max_refine_iter: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self { noise_rel: 1e-7, refine_rel_width: 1e-6, merge_rel: 1e-4, max_refine_iter: 400 }
    }
}

#[derive(Serialize, Clone, Debug, PartialEq, Default)]
pub struct Detection {
    pub points: Vec<CriticalPoint>,
    /// Brackets dropped because refinement failed.
    pub excluded: Vec<FailedSample>,
}

/// Turning values of a sequence: indices of the first and last samples,
/// and of every strict local extremum, after collapsing runs of equal
/// values. Consecutive interior entries alternate in kind.
fn turning_indices(t: &[f64]) -> Vec<usize> {
    let mut runs: Vec<usize> = Vec::with_capacity(t.len());
    for (i, v) in t.iter().enumerate() {
        if runs.last().is_none_or(|&j| t[j] != *v) {
            runs.push(i);
        }
    }
    let mut out = vec![runs[0]];
    for w in runs.windows(3) {
        let (a, b, c) = (t[w[0]], t[w[1]], t[w[2]]);
        if (b > a && b > c) || (b < a && b < c) {
            out.push(w[1]);
        }
    }
    let last = *runs.last().unwrap();
    if last != out[0] {
        out.push(last);
    }
    out
}

/// Removes wiggles whose amplitude is below `thr(value)`. Interior pairs
/// go together so alternation is kept; an extremum next to an end goes
/// alone.
fn filter_noise(t: &[f64], mut idx: Vec<usize>, noise_rel: f64) -> Vec<usize> {
    loop {
        let n = idx.len();
        if n <= 2 {
            return idx;
        }
        let mut best: Option<(f64, usize, bool)> = None;
        for i in 0..n - 1 {
            let (a, b) = (t[idx[i]], t[idx[i + 1]]);
            let d = (a - b).abs() / (noise_rel * a.abs().max(b.abs()));
            let at_end = i == 0 || i + 1 == n - 1;
            if d < 1.0 && best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, i, at_end));
            }
        }
        let Some((_, i, at_end)) = best else { return idx };
        if at_end {
            // drop the interior member of the pair
            idx.remove(if i == 0 { 1 } else { i });
        } else {
            idx.drain(i..i + 2);
        }
    }
}

/// Segments of the curve that lie in a single annulus: at `eps = 0` the
/// period is not continuous across skeleton critical energies.
fn segments(sys: &HamiltonianSystem, hs: &[f64]) -> Vec<std::ops::Range<usize>> {
    let cuts: Vec<f64> =
        if sys.spec.epsilon == 0.0 { sys.skeleton.interior().iter().map(|e| e.h).collect() } else { Vec::new() };
    let mut out = Vec::new();
    let mut start = 0;
    for c in cuts {
        let end = hs.partition_point(|&h| h < c);
        if end > start {
            out.push(start..end);
        }
        start = end.max(start);
    }
    if start < hs.len() {
        out.push(start..hs.len());
    }
    out
}

/// Seeds one bracket per strict extremum surviving the noise filter,
/// refines each by golden-section search on fresh evaluations, and merges
/// same-kind points that land within `merge_rel` of each other.
pub fn detect_critical_points(sys: &HamiltonianSystem, curve: &PeriodCurve, opts: DetectOptions) -> Result<Detection> {
    if curve.samples.len() < 3 {
        return Err(Error::InsufficientSamples(format!("{} samples, need at least 3", curve.samples.len())));
    }
    let hs = curve.hs();
    let ts = curve.periods();
    let mut seeds: Vec<(Triplet, ExtremumKind)> = Vec::new();
    for seg in segments(sys, &hs) {
        if seg.len() < 3 {
            continue;
        }
        let (h, t) = (&hs[seg.clone()], &ts[seg.clone()]);
        let turns = filter_noise(t, turning_indices(t), opts.noise_rel);
        for w in turns.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let kind = if t[b] > t[a] { ExtremumKind::Maximum } else { ExtremumKind::Minimum };
            // narrowest strictly bracketing neighbours of b
            let lo = (a..b).rev().find(|&i| strictly_beyond(t[i], t[b], kind)).unwrap_or(a);
            let hi = (b + 1..=c).find(|&i| strictly_beyond(t[i], t[b], kind)).unwrap_or(c);
            seeds.push((Triplet { a: (h[lo], t[lo]), b: (h[b], t[b]), c: (h[hi], t[hi]) }, kind));
        }
    }

    let refined: Vec<std::result::Result<CriticalPoint, FailedSample>> = seeds
        .par_iter()
        .map(|&(trip, kind)| {
            let eval = |h: f64| period_return_time(sys, h).map(|s| s.period);
            match golden_refine(eval, trip, kind, opts.refine_rel_width, opts.max_refine_iter) {
                Ok(r) => Ok(CriticalPoint {
                    h_star: r.b.0,
                    period_star: r.b.1,
                    kind,
                    bracket: (r.a.0, r.c.0),
                    refined_width: r.width(),
                }),
                Err(e) => Err(FailedSample {
                    h: trip.b.0,
                    reason: e.map_or_else(|| "refinement did not converge".to_string(), |e| e.to_string()),
                }),
            }
        })
        .collect();

    let mut det = Detection::default();
    for r in refined {
        match r {
            Ok(p) => det.points.push(p),
            Err(f) => det.excluded.push(f),
        }
    }
    det.points.sort_by(|a, b| a.h_star.total_cmp(&b.h_star));
    det.points = merge_points(det.points, opts.merge_rel);
    Ok(det)
}

fn strictly_beyond(v: f64, pivot: f64, kind: ExtremumKind) -> bool {
    match kind {
        ExtremumKind::Maximum => v < pivot,
        ExtremumKind::Minimum => v > pivot,
    }
}

fn merge_points(points: Vec<CriticalPoint>, merge_rel: f64) -> Vec<CriticalPoint> {
    let mut out: Vec<CriticalPoint> = Vec::with_capacity(points.len());
    for p in points {
        if let Some(q) = out.last_mut() {
            if q.kind == p.kind && (p.h_star - q.h_star).abs() <= merge_rel * p.h_star.abs().max(q.h_star.abs()) {
                let p_wins = match p.kind {
                    ExtremumKind::Maximum => p.period_star > q.period_star,
                    ExtremumKind::Minimum => p.period_star < q.period_star,
                };
                if p_wins {
                    *q = p;
                }
                continue;
            }
        }
        out.push(p);
    }
    out
}

/// True when kinds alternate along `points` (assumed sorted by `h_star`).
pub fn alternates(points: &[CriticalPoint]) -> bool {
    points.windows(2).all(|w| w[0].kind != w[1].kind)
}

#[derive(Serialize, Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub epsilon_start: f64,
    pub max_halvings: usize,
    pub grid: GridParams,
    pub detect: DetectOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { epsilon_start: 1e-2, max_halvings: 12, grid: GridParams::default(), detect: DetectOptions::default() }
    }
}

#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct ScheduleEntry {
    pub epsilon: f64,
    pub samples: usize,
    pub failed_samples: usize,
    pub excluded_brackets: usize,
    pub found: usize,
    pub pass: bool,
}

#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub family_tag: String,
    pub k: usize,
    pub epsilon_used: f64,
    pub required: usize,
    pub found: usize,
    pub pass: bool,
    pub critical_points: Vec<CriticalPoint>,
    pub epsilon_schedule_log: Vec<ScheduleEntry>,
}

impl BoundReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Counts critical periods of `base` perturbed by `eps = epsilon_start`,
/// halving `eps` until the family's lower bound is met or the schedule is
/// exhausted. `base.epsilon` is ignored.
pub fn verify_bound(base: &SystemSpec, opts: &VerifyOptions) -> Result<BoundReport> {
    base.validate()?;
    let skeleton = base.unperturbed();
    let verdict = hypothesis_verdict(&skeleton, DEFAULT_GAP_TOL)?;
    if !verdict.distinct || verdict.dominance_ok == Some(false) {
        return Err(Error::HypothesisViolation {
            message: if verdict.distinct {
                "saddle energy does not dominate the interior critical energies".into()
            } else {
                "critical energies are not pairwise distinct".into()
            },
            witness: verdict.witness,
        });
    }
    if !(opts.epsilon_start > 0.0) {
        return Err(Error::Validation("epsilon_start must be positive".into()));
    }
    let required = base.required_critical_points();
    let mut log = Vec::new();
    let mut eps = opts.epsilon_start;
    let mut last: Option<(f64, Detection)> = None;
    for _ in 0..=opts.max_halvings {
        let sys = HamiltonianSystem::new(&base.with_epsilon(eps))?;
        let curve = sample_system(&sys, opts.grid)?;
        let det = detect_critical_points(&sys, &curve, opts.detect)?;
        let found = det.points.len();
        let pass = found >= required;
        log.push(ScheduleEntry {
            epsilon: eps,
            samples: curve.samples.len(),
            failed_samples: curve.failures.len(),
            excluded_brackets: det.excluded.len(),
            found,
            pass,
        });
        last = Some((eps, det));
        if pass {
            break;
        }
        eps *= 0.5;
    }
    let (epsilon_used, det) = last.expect("schedule runs at least once");
    let found = det.points.len();
    Ok(BoundReport {
        family_tag: base.family.as_str().to_string(),
        k: base.k(),
        epsilon_used,
        required,
        found,
        pass: found >= required,
        critical_points: det.points,
        epsilon_schedule_log: log,
    })
}

/// Least-squares slope of `log T` against `log h` over `decades` decades
/// starting at `100 * h_last`.
pub fn tail_exponent(spec: &SystemSpec, decades: usize) -> Result<f64> {
    if spec.family.is_even() {
        return Err(Error::Validation("even-degree annuli are bounded; there is no tail".into()));
    }
    if decades == 0 {
        return Err(Error::InsufficientSamples("need at least one decade".into()));
    }
    let sys = HamiltonianSystem::new(spec)?;
    let h_last = sys.skeleton.entries.last().map(|e| e.h).filter(|&h| h > 0.0).unwrap_or(1.0);
    let start = 1e2 * h_last;
    let n = 8 * decades + 1;
    let grid: Vec<f64> = log_space(start, start * 10f64.powi(decades as i32), n).collect();
    let pts: Vec<(f64, f64)> =
        grid.par_iter().filter_map(|&h| period_return_time(&sys, h).ok().map(|s| (h.ln(), s.period.ln()))).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientSamples(format!("{} usable tail samples", pts.len())));
    }
    Ok(least_squares_slope(&pts))
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct PeakMeasurement {
    /// Skeleton critical energy the cluster belongs to.
    pub h_skeleton: f64,
    pub h_peak: f64,
    #[serde(rename = "T_peak")]
    pub period_peak: f64,
}

#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct PeakProbe {
    pub epsilon: f64,
    pub peaks: Vec<PeakMeasurement>,
}

/// For each `eps`, the tallest period found in a cluster around every
/// interior critical energy, sharpened by golden-section search.
pub fn peak_growth_probe(base: &SystemSpec, eps_list: &[f64], params: GridParams) -> Result<Vec<PeakProbe>> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Validation("eps_list must be positive and strictly decreasing".into()));
    }
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let sys = HamiltonianSystem::new(&base.with_epsilon(eps))?;
        let top = CLUSTER_FLOOR * 10f64.powi(params.cluster_decades as i32);
        let mut peaks = Vec::new();
        for entry in sys.skeleton.interior() {
            let center = sys.hamiltonian(entry.source.x, entry.source.y);
            let mut grid: Vec<f64> = vec![center];
            for d in log_space(CLUSTER_FLOOR, top, params.cluster_points) {
                grid.push(center * (1.0 - d));
                grid.push(center * (1.0 + d));
            }
            grid.sort_by(f64::total_cmp);
            if let Some(t) = sys.annulus_top {
                grid.retain(|&h| h < 0.999 * t);
            }
            let curve = sample_curve(&sys, &grid)?;
            let (hs, ts) = (curve.hs(), curve.periods());
            let i = (0..ts.len())
                .max_by(|&a, &b| ts[a].total_cmp(&ts[b]))
                .ok_or_else(|| Error::InsufficientSamples(format!("no samples near h = {}", entry.h)))?;
            let mut best = (hs[i], ts[i]);
            if i > 0 && i + 1 < ts.len() {
                let trip = Triplet { a: (hs[i - 1], ts[i - 1]), b: best, c: (hs[i + 1], ts[i + 1]) };
                let eval = |h: f64| period_return_time(&sys, h).map(|s| s.period);
                if let Ok(r) = golden_refine(eval, trip, ExtremumKind::Maximum, 1e-9, 400) {
                    best = r.b;
                }
            }
            peaks.push(PeakMeasurement { h_skeleton: entry.h, h_peak: best.0, period_peak: best.1 });
        }
        out.push(PeakProbe { epsilon: eps, peaks });
    }
    Ok(out)
}
