mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use critperiod::critical::{
    alternates, detect_critical_points, sample_curve, sample_system, system_grid, verify_bound, BoundReport,
    FailedSample,
};
use critperiod::energy::{
    certify_e_scaled, collect_energies, hypothesis_verdict, singular_points, HypothesisVerdict, DEFAULT_GAP_TOL,
};
use critperiod::export::{curve_csv, samples_csv, trace_csv};
use critperiod::orbit::{
    linearized_period, period_quadrature_potential, trace_orbit, HamiltonianSystem, OrbitOptions, PeriodSample,
};
use critperiod::system::SystemSpec;
use critperiod::Error;

use config::{resolve, DetectArgs, GridArgs, MethodChoice, Preset, RunConfig, SystemArgs, UsageError, VerifyArgs};

/// `println!` that tolerates a closed stdout (e.g. piping into `head`).
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

const EXIT_FAIL: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Parser, Debug)]
#[command(
    name = "critperiod",
    version,
    about = "Period functions and critical periods of polynomial Hamiltonian centers"
)]
struct Cli {
    /// Directory receiving reports, curves and the run manifest.
    #[arg(long, global = true, default_value = "critperiod-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Singular points, critical-energy ledger, hypothesis verdict and T(0).
    Analyze {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Sample the period function and write it as CSV.
    PeriodCurve {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum)]
        method: Option<MethodChoice>,
        /// Explicit energies instead of the adaptive grid.
        #[arg(long, value_delimiter = ',')]
        energies: Option<Vec<f64>>,
    },
    /// Locate and refine the extrema of the period function.
    CriticalPoints {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        detect: DetectArgs,
    },
    /// Check the lower bound on the number of critical periods.
    Verify {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        detect: DetectArgs,
        #[command(flatten)]
        verify: VerifyArgs,
    },
    /// Check that the critical energies are pairwise distinct.
    Hypothesis {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Write closed orbits at the given energies as CSV.
    Trace {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long = "h", value_delimiter = ',', allow_hyphen_values = true)]
        energies: Option<Vec<f64>>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Rebuild one of the bundled examples end to end.
    Reproduce {
        #[arg(value_enum)]
        preset: Preset,
        #[arg(long)]
        k: Option<usize>,
    },
}

/// Output directory plus the bookkeeping that ends up in the manifest.
struct Run {
    dir: PathBuf,
    command: &'static str,
    outputs: Vec<String>,
    timings_ms: BTreeMap<String, f64>,
    config: Option<RunConfig>,
}

impl Run {
    fn new(dir: PathBuf, command: &'static str) -> Self {
        Self { dir, command, outputs: Vec::new(), timings_ms: BTreeMap::new(), config: None }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings_ms.insert(label.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }

    fn finish(&mut self, exit_code: u8, error: Option<String>) -> Result<()> {
        let manifest = json!({
            "tool": "critperiod",
            "cli_version": env!("CARGO_PKG_VERSION"),
            "library_version": critperiod::VERSION,
            "command": self.command,
            "config": self.config,
            "effective": self.config.as_ref().map(effective_settings),
            "outputs": self.outputs,
            "timings_ms": self.timings_ms,
            "exit_code": exit_code,
            "error": error,
        });
        self.write_json("manifest.json", &manifest)
    }
}

/// Every tolerance the run actually used, defaults included.
fn effective_settings(cfg: &RunConfig) -> serde_json::Value {
    let orbit = OrbitOptions::default();
    json!({
        "verify": cfg.verify_options(),
        "orbit": {
            "rtol": orbit.tol.rtol,
            "atol": orbit.tol.atol,
            "max_steps": orbit.max_steps,
            "separatrix_guard": orbit.separatrix_guard,
            "drift_bound": orbit.drift_bound,
        },
        "hypothesis_tol": cfg.hypothesis_tol.unwrap_or(DEFAULT_GAP_TOL),
    })
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::HypothesisViolation { .. } => EXIT_FAIL,
            Error::Validation(_) | Error::NotEScaled(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_IO;
    }
    EXIT_NUMERICAL
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let mut run = Run::new(cli.out.clone(), command_name(&cli.command));
    let result = dispatch(&mut run, cli.command);
    let (code, message) = match &result {
        Ok(true) => (0, None),
        Ok(false) => (EXIT_FAIL, None),
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(Error::HypothesisViolation { witness: Some(w), .. }) = e.downcast_ref::<Error>() {
                eprintln!("witness: {} and {}", describe(&w.0), describe(&w.1));
            }
            (exit_code_for(e), Some(format!("{e:#}")))
        }
    };
    if code != EXIT_USAGE {
        if let Err(e) = run.finish(code, message) {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_IO);
        }
    }
    ExitCode::from(code)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Analyze { .. } => "analyze",
        Command::PeriodCurve { .. } => "period-curve",
        Command::CriticalPoints { .. } => "critical-points",
        Command::Verify { .. } => "verify",
        Command::Hypothesis { .. } => "hypothesis",
        Command::Trace { .. } => "trace",
        Command::Reproduce { .. } => "reproduce",
    }
}

fn describe(s: &critperiod::energy::Singularity) -> String {
    let h = s.energy_exact.as_ref().map_or_else(|| s.energy.to_string(), |e| e.to_string());
    format!("({}, {}) [{:?}, H = {h}]", s.x, s.y, s.kind)
}

/// `Ok(true)` on success, `Ok(false)` when a bound or hypothesis check fails.
fn dispatch(run: &mut Run, command: Command) -> Result<bool> {
    match command {
        Command::Analyze { system, tol } => {
            let mut cfg = resolve(&system, None, None, None)?;
            cfg.hypothesis_tol = tol.or(cfg.hypothesis_tol);
            run.config = Some(cfg.clone());
            let spec = cfg.system()?.clone();
            let verdict = analyze(run, &spec, cfg.hypothesis_tol.unwrap_or(DEFAULT_GAP_TOL))?;
            Ok(verdict_ok(&verdict))
        }
        Command::Hypothesis { system, tol } => {
            let mut cfg = resolve(&system, None, None, None)?;
            cfg.hypothesis_tol = tol.or(cfg.hypothesis_tol);
            run.config = Some(cfg.clone());
            let spec = cfg.system()?;
            let verdict = hypothesis_verdict(spec, cfg.hypothesis_tol.unwrap_or(DEFAULT_GAP_TOL))?;
            print_verdict(&verdict);
            run.write_json("hypothesis.json", &json!({ "spec": spec, "verdict": verdict }))?;
            Ok(verdict_ok(&verdict))
        }
        Command::PeriodCurve { system, grid, method, energies } => {
            let mut cfg = resolve(&system, Some(&grid), None, None)?;
            cfg.method = method.or(cfg.method);
            cfg.energies = energies.or(cfg.energies.take());
            run.config = Some(cfg.clone());
            period_curve(run, &cfg)?;
            Ok(true)
        }
        Command::CriticalPoints { system, grid, detect } => {
            let cfg = resolve(&system, Some(&grid), Some(&detect), None)?;
            run.config = Some(cfg.clone());
            let sys = HamiltonianSystem::new(cfg.system()?)?;
            let curve = run.timed("sample", || sample_system(&sys, cfg.grid_params()))?;
            let det = run.timed("detect", || detect_critical_points(&sys, &curve, cfg.detect_options()))?;
            say!("{} critical period(s)", det.points.len());
            for p in &det.points {
                say!("  {:<7} h = {:.12e}  T = {:.12e}", p.kind.as_str(), p.h_star, p.period_star);
            }
            run.write("curve.csv", &curve_csv(&curve))?;
            run.write_json(
                "critical_points.json",
                &json!({
                    "spec": cfg.system()?,
                    "critical_points": det.points,
                    "excluded": det.excluded,
                    "failed_samples": curve.failures,
                    "alternating": alternates(&det.points),
                }),
            )?;
            Ok(true)
        }
        Command::Verify { system, grid, detect, verify } => {
            let cfg = resolve(&system, Some(&grid), Some(&detect), Some(&verify))?;
            run.config = Some(cfg.clone());
            let spec = cfg.system()?.clone();
            let report = run.timed("verify", || verify_bound(&spec, &cfg.verify_options()))?;
            print_report(&report);
            run.write("bound_report.json", &(report.to_json() + "\n"))?;
            Ok(report.pass)
        }
        Command::Trace { system, energies, points } => {
            let mut cfg = resolve(&system, None, None, None)?;
            cfg.energies = energies.or(cfg.energies.take());
            cfg.trace_points = points.or(cfg.trace_points);
            run.config = Some(cfg.clone());
            let hs = cfg.energies.clone().ok_or_else(|| UsageError("trace needs --h".into()))?;
            let sys = HamiltonianSystem::new(cfg.system()?)?;
            for (i, h) in hs.iter().enumerate() {
                let tr = trace_orbit(&sys, *h, cfg.trace_points.unwrap_or(512))?;
                say!("h = {h}: T = {:.12e}, max |H - h| = {:.2e}", tr.period, tr.max_energy_error);
                run.write(&format!("trace_{i}.csv"), &trace_csv(&tr))?;
            }
            Ok(true)
        }
        Command::Reproduce { preset, k } => reproduce(run, preset, k),
    }
}

fn verdict_ok(v: &HypothesisVerdict) -> bool {
    v.distinct && v.dominance_ok != Some(false)
}

fn print_verdict(v: &HypothesisVerdict) {
    let method = match v.method {
        critperiod::energy::VerdictMethod::NumericGap => "numeric gap",
        critperiod::energy::VerdictMethod::ExactRationalPairs => "exact",
    };
    say!("critical energies distinct: {} ({method})", v.distinct);
    if let Some(g) = v.min_gap {
        say!("smallest gap: {g:e}");
    }
    if let Some(d) = v.dominance_ok {
        say!("saddle energy dominates: {d}");
    }
    if let Some(w) = &v.witness {
        say!("witness: {} and {}", describe(&w.0), describe(&w.1));
    }
}

fn print_report(r: &BoundReport) {
    say!(
        "{} k = {}: found {} of {} required at eps = {:e} -> {}",
        r.family_tag,
        r.k,
        r.found,
        r.required,
        r.epsilon_used,
        if r.pass { "pass" } else { "FAIL" }
    );
    for p in &r.critical_points {
        say!("  {:<7} h = {:.12e}  T = {:.12e}", p.kind.as_str(), p.h_star, p.period_star);
    }
}

fn analyze(run: &mut Run, spec: &SystemSpec, tol: f64) -> Result<HypothesisVerdict> {
    let skeleton = spec.unperturbed();
    let points = singular_points(&skeleton)?;
    let ledger = collect_energies(spec)?;
    let verdict = hypothesis_verdict(spec, tol)?;
    let pair = spec.hamiltonian()?;
    let t0 = linearized_period(&pair);

    say!("{} k = {} (degree {})", spec.family.as_str(), spec.k(), spec.degree());
    say!("singular points at eps = 0:");
    for p in &points {
        say!("  {}", describe(p));
    }
    let hs: Vec<String> = ledger
        .entries
        .iter()
        .map(|e| e.source.energy_exact.as_ref().map_or_else(|| e.h.to_string(), |x| x.to_string()))
        .collect();
    say!("critical energies: {}", hs.join(", "));
    if let Some(u) = ledger.upper_h() {
        say!("annulus ends at the saddle energy {u}");
    }
    print_verdict(&verdict);
    say!("T(0) = {t0:.16}");

    run.write_json(
        "analysis.json",
        &json!({
            "spec": spec,
            "singular_points": points,
            "ledger": ledger.to_json(),
            "hypothesis": verdict,
            "linearized_period": t0,
        }),
    )?;
    Ok(verdict)
}

fn period_curve(run: &mut Run, cfg: &RunConfig) -> Result<()> {
    let sys = HamiltonianSystem::new(cfg.system()?)?;
    let grid = match &cfg.energies {
        Some(e) => {
            let mut g = e.clone();
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        }
        None => system_grid(&sys, cfg.grid_params()).0,
    };
    let method = cfg.method.unwrap_or(MethodChoice::ReturnTime);
    let mut samples: Vec<PeriodSample> = Vec::new();
    let mut failures = Vec::new();
    if method != MethodChoice::Quadrature {
        let curve = run.timed("return_time", || sample_curve(&sys, &grid))?;
        samples.extend(curve.samples);
        failures.extend(curve.failures);
    }
    if method != MethodChoice::ReturnTime {
        if sys.spec.family.is_separable() {
            return Err(UsageError("quadrature is available for potential families only".into()).into());
        }
        let (ok, failed) = run.timed("quadrature", || quadrature_samples(&sys, &grid));
        samples.extend(ok);
        failures.extend(failed);
    }
    samples.sort_by(|a, b| a.h.total_cmp(&b.h).then(a.method.as_str().cmp(b.method.as_str())));
    say!("{} samples, {} failed", samples.len(), failures.len());
    run.write("curve.csv", &samples_csv(&samples))?;
    run.write_json(
        "curve_meta.json",
        &json!({ "spec": cfg.system()?, "grid_points": grid.len(), "failed_samples": failures }),
    )?;
    Ok(())
}

fn reproduce(run: &mut Run, preset: Preset, k: Option<usize>) -> Result<bool> {
    let spec = preset.spec(k, 0.0)?;
    run.config =
        Some(RunConfig { spec: Some(spec.clone()), preset: Some(preset), k: Some(spec.k()), ..Default::default() });
    let verdict = analyze(run, &spec, DEFAULT_GAP_TOL)?;
    if spec.e_scaled {
        let cert = certify_e_scaled(&spec)?;
        run.write_json("certification.json", &json!(cert))?;
        if !verdict_ok(&cert) {
            return Ok(false);
        }
    } else if !verdict_ok(&verdict) {
        return Ok(false);
    }

    let sys = HamiltonianSystem::new(&spec)?;
    if preset == Preset::Fig2 {
        let hs: Vec<f64> = sys.skeleton.energies();
        let mut levels: Vec<f64> = hs.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        levels.push(2.0 * hs.last().copied().unwrap_or(1.0));
        for (i, h) in levels.iter().enumerate() {
            let tr = run.timed(&format!("trace_{i}"), || trace_orbit(&sys, *h, 512))?;
            run.write(&format!("trace_annulus_{i}.csv"), &trace_csv(&tr))?;
        }
    }
    let skeleton_curve = run.timed("curve_eps0", || sample_system(&sys, Default::default()))?;
    run.write("curve_eps0.csv", &curve_csv(&skeleton_curve))?;

    let report = run.timed("verify", || verify_bound(&spec, &Default::default()))?;
    print_report(&report);
    run.write("bound_report.json", &(report.to_json() + "\n"))?;
    let perturbed = HamiltonianSystem::new(&spec.with_epsilon(report.epsilon_used))?;
    let curve = run.timed("curve", || sample_system(&perturbed, Default::default()))?;
    run.write("curve.csv", &curve_csv(&curve))?;
    Ok(report.pass)
}

/// Quadrature samples over a grid, split into successes and failures.
fn quadrature_samples(sys: &HamiltonianSystem, grid: &[f64]) -> (Vec<PeriodSample>, Vec<FailedSample>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for &h in grid {
        match period_quadrature_potential(sys, h) {
            Ok(s) => ok.push(s),
            Err(e) => failed.push(FailedSample { h, reason: e.to_string() }),
        }
    }
    (ok, failed)
}
