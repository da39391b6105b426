use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use critperiod::critical::{DetectOptions, GridParams, VerifyOptions};
use critperiod::system::{example_family, Family, Parity, SystemSpec};

/// Bad invocation or configuration; maps to exit code 64.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Separable odd family with `alphas = 1..k`, `betas = e * (1..k)`.
    Example1,
    /// Separable even family with a saddle at `e * k^2`.
    Example2,
    /// Potential system with `betas = 1, 2, 3`.
    Fig2,
    /// Separable system with `alpha = 4`, `beta = 2`.
    Fig4,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
            Preset::Fig2 => "fig2",
            Preset::Fig4 => "fig4",
        }
    }

    pub fn spec(self, k: Option<usize>, epsilon: f64) -> Result<SystemSpec> {
        let spec = match self {
            Preset::Example1 => example_family(k.unwrap_or(1), Parity::Odd, epsilon)?,
            Preset::Example2 => example_family(k.unwrap_or(2), Parity::Even, epsilon)?,
            Preset::Fig2 => SystemSpec::new(Family::PotentialOdd, vec![], vec![1.0, 2.0, 3.0], epsilon, None),
            Preset::Fig4 => SystemSpec::new(Family::SeparableOdd, vec![4.0], vec![2.0], epsilon, None),
        };
        if let Some(k) = k {
            if spec.k() != k {
                return Err(usage(format!("preset {} has k = {}, not {k}", self.as_str(), spec.k())));
            }
        }
        Ok(spec)
    }
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    ReturnTime,
    Quadrature,
    Both,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub global_points: Option<usize>,
    pub cluster_points: Option<usize>,
    pub cluster_decades: Option<usize>,
}

/// Contents of a `--config` file. Every key is optional; unknown keys are
/// rejected.
#[derive(Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub spec: Option<SystemSpec>,
    pub preset: Option<Preset>,
    pub k: Option<usize>,
    pub grid: GridConfig,
    pub epsilon_start: Option<f64>,
    pub max_halvings: Option<usize>,
    pub noise_rel: Option<f64>,
    pub hypothesis_tol: Option<f64>,
    pub method: Option<MethodChoice>,
    pub energies: Option<Vec<f64>>,
    pub trace_points: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    pub fn grid_params(&self) -> GridParams {
        let d = GridParams::default();
        GridParams {
            global_points: self.grid.global_points.unwrap_or(d.global_points),
            cluster_points: self.grid.cluster_points.unwrap_or(d.cluster_points),
            cluster_decades: self.grid.cluster_decades.unwrap_or(d.cluster_decades),
        }
    }

    pub fn detect_options(&self) -> DetectOptions {
        let d = DetectOptions::default();
        DetectOptions { noise_rel: self.noise_rel.unwrap_or(d.noise_rel), ..d }
    }

    pub fn verify_options(&self) -> VerifyOptions {
        let d = VerifyOptions::default();
        VerifyOptions {
            epsilon_start: self.epsilon_start.unwrap_or(d.epsilon_start),
            max_halvings: self.max_halvings.unwrap_or(d.max_halvings),
            grid: self.grid_params(),
            detect: self.detect_options(),
        }
    }

    /// The resolved system; fails when none was described.
    pub fn system(&self) -> Result<&SystemSpec> {
        self.spec.as_ref().ok_or_else(|| usage("no system given: use --config, --preset or --family/--betas"))
    }

    fn check_grid(&self) -> Result<()> {
        let g = self.grid_params();
        if g.global_points < 2 || g.cluster_decades == 0 || g.cluster_decades > 10 {
            return Err(usage("grid needs global_points >= 2 and 1 <= cluster_decades <= 10"));
        }
        Ok(())
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct SystemArgs {
    /// JSON run configuration; flags take precedence over its keys.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// potential, potential-even, separable or separable-even.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Saddle abscissa of even-degree families.
    #[arg(long)]
    pub saddle: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GridArgs {
    #[arg(long)]
    pub global_points: Option<usize>,
    /// Points per side of each cluster.
    #[arg(long)]
    pub cluster_points: Option<usize>,
    #[arg(long)]
    pub cluster_decades: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DetectArgs {
    /// Relative period difference below which an extremum pair is noise.
    #[arg(long)]
    pub noise_rel: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct VerifyArgs {
    #[arg(long)]
    pub epsilon_start: Option<f64>,
    #[arg(long)]
    pub max_halvings: Option<usize>,
}

/// Reads the config file (if any) and applies flag overrides.
pub fn resolve(
    sys: &SystemArgs,
    grid: Option<&GridArgs>,
    detect: Option<&DetectArgs>,
    verify: Option<&VerifyArgs>,
) -> Result<RunConfig> {
    let mut cfg = match &sys.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(g) = grid {
        cfg.grid.global_points = g.global_points.or(cfg.grid.global_points);
        cfg.grid.cluster_points = g.cluster_points.or(cfg.grid.cluster_points);
        cfg.grid.cluster_decades = g.cluster_decades.or(cfg.grid.cluster_decades);
    }
    if let Some(d) = detect {
        cfg.noise_rel = d.noise_rel.or(cfg.noise_rel);
    }
    if let Some(v) = verify {
        cfg.epsilon_start = v.epsilon_start.or(cfg.epsilon_start);
        cfg.max_halvings = v.max_halvings.or(cfg.max_halvings);
    }
    cfg.check_grid()?;
    cfg.preset = sys.preset.or(cfg.preset);
    cfg.k = sys.k.or(cfg.k);
    let family = sys.family.as_deref().map(str::parse::<Family>).transpose().map_err(|e| usage(e.to_string()))?;

    if let Some(preset) = cfg.preset {
        if cfg.spec.is_some() && sys.preset.is_none() {
            return Err(usage("config gives both a preset and a spec"));
        }
        if sys.alphas.is_some() || sys.betas.is_some() || sys.saddle.is_some() {
            return Err(usage("--alphas/--betas/--saddle cannot be combined with a preset"));
        }
        let eps = sys.epsilon.unwrap_or(0.0);
        let spec = preset.spec(cfg.k, eps)?;
        if let Some(f) = family {
            if f != spec.family {
                return Err(usage(format!(
                    "preset {} is {}, not {}",
                    preset.as_str(),
                    spec.family.as_str(),
                    f.as_str()
                )));
            }
        }
        cfg.spec = Some(spec);
    } else {
        let touched = family.is_some()
            || sys.alphas.is_some()
            || sys.betas.is_some()
            || sys.epsilon.is_some()
            || sys.saddle.is_some();
        if touched {
            let mut spec = cfg
                .spec
                .take()
                .unwrap_or_else(|| SystemSpec::new(family.unwrap_or(Family::PotentialOdd), vec![], vec![], 0.0, None));
            if let Some(f) = family {
                spec.family = f;
            }
            if let Some(a) = &sys.alphas {
                spec.alphas = a.clone();
            }
            if let Some(b) = &sys.betas {
                spec.betas = b.clone();
            }
            if let Some(e) = sys.epsilon {
                spec.epsilon = e;
            }
            if sys.saddle.is_some() {
                spec.saddle_beta = sys.saddle;
            }
            cfg.spec = Some(spec);
        }
        if let (Some(k), Some(spec)) = (cfg.k, &cfg.spec) {
            if spec.k() != k {
                return Err(usage(format!("--k {k} does not match the given parameters (k = {})", spec.k())));
            }
        }
    }
    if let Some(spec) = &cfg.spec {
        spec.validate().map_err(|e| usage(e.to_string()))?;
    }
    Ok(cfg)
}
