//! Run configuration: flat `key = value` text with dotted keys.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crate::output::num;
use lrnn_core::assembly::{AssemblyConfig, Weights};
use lrnn_core::calculus::FdConfig;
use lrnn_core::linsolve::{SolverConfig, SolverMethod};
use lrnn_core::problems::{example, ExampleOptions, ExampleSettings, ExampleSpec, InitRange};
use lrnn_core::quadrature::QuadratureRule;
use lrnn_core::sampling::{InterfaceMeasure, Region, SamplingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorRuleKind {
    GaussLegendre,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub example: usize,
    pub mixed: bool,
    pub dim: Option<usize>,
    pub m: Option<usize>,
    pub n_points: Option<usize>,
    pub beta: Option<Vec<f64>>,
    /// Initialisation ranges, see [`resolve_ranges`].
    pub ranges: Option<Vec<f64>>,
    pub gamma: f64,
    pub gamma_jump: Option<f64>,
    pub gamma_flux_jump: Option<f64>,
    pub gamma_dirichlet: Option<f64>,
    pub gamma_initial: Option<f64>,
    pub fd: FdConfig,
    pub solver: SolverConfig,
    pub error_rule: Option<ErrorRuleKind>,
    pub error_nodes: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub parallel_trials: bool,
    pub flux_beta: bool,
    pub dump_system: Option<PathBuf>,
    /// Points per axis of the plotting grid; 0 disables grid output.
    pub grid_resolution: usize,
    pub interface_measure: InterfaceMeasure,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            example: 1,
            mixed: false,
            dim: None,
            m: None,
            n_points: None,
            beta: None,
            ranges: None,
            gamma: 50.0,
            gamma_jump: None,
            gamma_flux_jump: None,
            gamma_dirichlet: None,
            gamma_initial: None,
            fd: FdConfig::default(),
            solver: SolverConfig::default(),
            error_rule: None,
            error_nodes: 20,
            mc_samples: 10_000,
            seed: 0,
            trials: None,
            out: None,
            parallel_trials: false,
            flux_beta: true,
            dump_system: None,
            grid_resolution: 0,
            interface_measure: InterfaceMeasure::Parameter,
        }
    }
}

fn parse_list(value: &str) -> Result<Vec<f64>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("`{s}` is not a number")))
        .collect()
}

fn parse_bool(value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "on" | "yes" => Ok(true),
        "0" | "false" | "off" | "no" => Ok(false),
        other => bail!("`{other}` is not a boolean"),
    }
}

fn parse_positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().with_context(|| format!("{key}: `{value}` is not a number"))?;
    if !(v > 0.0 && v.is_finite()) {
        bail!("{key} must be positive, got {v}");
    }
    Ok(v)
}

fn parse_count(key: &str, value: &str) -> Result<usize> {
    let v: usize = value.parse().with_context(|| format!("{key}: `{value}` is not a count"))?;
    if v == 0 {
        bail!("{key} must be at least 1");
    }
    Ok(v)
}

fn parse_weight(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().with_context(|| format!("{key}: `{value}` is not a number"))?;
    if !(v >= 0.0 && v.is_finite()) {
        bail!("{key} must be non-negative, got {v}");
    }
    Ok(v)
}

impl RunConfig {
    /// Applies one `key = value` setting. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "example" => self.example = parse_count(key, value)?,
            "formulation" => {
                self.mixed = match value {
                    "strong" => false,
                    "mixed" => true,
                    other => bail!("formulation must be `strong` or `mixed`, got `{other}`"),
                }
            }
            "dim" | "problem.dim" => self.dim = Some(parse_count(key, value)?),
            "m" | "network.m" => self.m = Some(parse_count(key, value)?),
            "N" | "n_points" | "n-points" | "sampling.N" => self.n_points = Some(parse_count(key, value)?),
            "beta" | "problem.beta" => self.beta = Some(parse_list(value)?),
            "r" | "network.r" => self.ranges = Some(parse_list(value)?),
            "gamma" => self.gamma = parse_weight(key, value)?,
            "gamma.jump" => self.gamma_jump = Some(parse_weight(key, value)?),
            "gamma.flux_jump" => self.gamma_flux_jump = Some(parse_weight(key, value)?),
            "gamma.dirichlet" => self.gamma_dirichlet = Some(parse_weight(key, value)?),
            "gamma.initial" => self.gamma_initial = Some(parse_weight(key, value)?),
            "fd.h1" => self.fd = FdConfig::new(parse_positive(key, value)?, self.fd.h2)?,
            "fd.h2" => self.fd = FdConfig::new(self.fd.h1, parse_positive(key, value)?)?,
            "solver" | "solver.method" => self.solver.method = value.parse::<SolverMethod>()?,
            "solver.rcond" => self.solver = SolverConfig::new(self.solver.method, parse_positive(key, value)?)?,
            "error.rule" => {
                self.error_rule = Some(match value {
                    "gl" | "gauss" | "gauss-legendre" => ErrorRuleKind::GaussLegendre,
                    "mc" | "monte-carlo" => ErrorRuleKind::MonteCarlo,
                    other => bail!("error.rule must be `gl` or `mc`, got `{other}`"),
                })
            }
            "error.nodes" => self.error_nodes = parse_count(key, value)?,
            "error.mc_samples" => self.mc_samples = parse_count(key, value)?,
            "seed" => self.seed = value.parse().with_context(|| format!("seed: `{value}`"))?,
            "trials" => self.trials = Some(parse_count(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "parallel_trials" | "parallel-trials" => self.parallel_trials = parse_bool(value)?,
            "assembly.flux_beta" => self.flux_beta = parse_bool(value)?,
            "dump.system" => self.dump_system = Some(PathBuf::from(value)),
            "sampling.interface_measure" => {
                self.interface_measure = match value {
                    "parameter" => InterfaceMeasure::Parameter,
                    "arclength" | "area" => InterfaceMeasure::Arclength,
                    other => bail!("sampling.interface_measure must be `parameter` or `arclength`, got `{other}`"),
                }
            }
            "grid.resolution" | "grid" => {
                let n: usize = value.parse().with_context(|| format!("grid.resolution: `{value}`"))?;
                if n == 1 {
                    bail!("grid.resolution must be 0 (off) or at least 2");
                }
                self.grid_resolution = n;
            }
            other => bail!("unknown configuration key `{other}`"),
        }
        Ok(())
    }

    /// Parses a config file body. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').with_context(|| format!("line {}: expected `key = value`", lineno + 1))?;
            self.set(key, value).with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Fills example defaults and applies the overrides.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let opts = ExampleOptions { beta: self.beta.clone(), dim: self.dim, mixed: self.mixed };
        let mut spec = example(self.example, &opts)?;
        let n_sub = spec.problem.geom.n_subdomains();
        let s = &mut spec.settings;
        if let Some(m) = self.m {
            s.m = m;
        }
        if let Some(n) = self.n_points {
            s.sampling = if s.sampling.is_absolute() {
                SamplingPlan::from_ratios(n, s.sampling.weights().to_vec(), 0)
            } else {
                s.sampling.clone().with_total(n)
            };
        }
        s.sampling = s.sampling.clone().with_interface_measure(self.interface_measure);
        if let Some(r) = &self.ranges {
            let (u, p) = resolve_ranges(r, n_sub, s.mixed)?;
            s.u_ranges = u;
            if let Some(p) = p {
                s.p_ranges = p;
            }
        }
        if let Some(t) = self.trials {
            s.trials = t;
        }
        match self.error_rule {
            Some(ErrorRuleKind::GaussLegendre) => {
                s.error_rule = QuadratureRule::GaussLegendre { nodes_per_axis: self.error_nodes }
            }
            Some(ErrorRuleKind::MonteCarlo) => {
                s.error_rule = QuadratureRule::MonteCarlo { samples: self.mc_samples, seed: self.seed }
            }
            None => {
                s.error_rule = match s.error_rule {
                    QuadratureRule::GaussLegendre { .. } => {
                        QuadratureRule::GaussLegendre { nodes_per_axis: self.error_nodes }
                    }
                    QuadratureRule::MonteCarlo { .. } => {
                        QuadratureRule::MonteCarlo { samples: self.mc_samples, seed: self.seed }
                    }
                }
            }
        }
        let weights = Weights {
            jump: self.gamma_jump.unwrap_or(self.gamma),
            flux_jump: self.gamma_flux_jump.unwrap_or(self.gamma),
            dirichlet: self.gamma_dirichlet.unwrap_or(self.gamma),
            initial: self.gamma_initial.unwrap_or(self.gamma),
        };
        Ok(ResolvedRun {
            spec,
            assembly: AssemblyConfig { fd: self.fd, weights, flux_beta: self.flux_beta },
            solver: self.solver,
            base_seed: self.seed,
        })
    }
}

/// Ranges given as a list:
/// * one value `r`: weights and biases in `(-r, r)` for every network;
/// * two values `(r1, r2)`: weight and bias ranges shared by all solution networks;
/// * four values in the mixed form: `(r1, r2)` for the solution, `(r3, r4)` for the flux;
/// * one value per subdomain: network `s` uses `(r_s, r_s)`.
pub fn resolve_ranges(r: &[f64], n_sub: usize, mixed: bool) -> Result<(Vec<InitRange>, Option<Vec<InitRange>>)> {
    if let Some(v) = r.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        bail!("initialisation ranges must be positive, got {v}");
    }
    Ok(match r.len() {
        4 if mixed => (vec![(r[0], r[1]); n_sub], Some(vec![(r[2], r[3]); n_sub])),
        1 => (vec![(r[0], r[0]); n_sub], Some(vec![(r[0], r[0]); n_sub])),
        2 => (vec![(r[0], r[1]); n_sub], None),
        k if k == n_sub => (r.iter().map(|v| (*v, *v)).collect(), None),
        k => bail!("cannot interpret {k} initialisation ranges for {n_sub} subdomains"),
    })
}

/// A configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub spec: ExampleSpec,
    pub assembly: AssemblyConfig,
    pub solver: SolverConfig,
    pub base_seed: u64,
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}

fn fmt_ranges(v: &[InitRange]) -> String {
    v.iter().map(|(a, b)| format!("({a},{b})")).collect::<Vec<_>>().join(",")
}

fn fmt_plan(plan: &SamplingPlan) -> String {
    let parts: Vec<String> = plan
        .weights()
        .iter()
        .map(|(r, w)| match r {
            Region::Interior => format!("interior:{w}"),
            other => format!("{other}:{w}"),
        })
        .collect();
    format!("{}{}", if plan.is_absolute() { "counts " } else { "ratio " }, parts.join(" "))
}

impl ResolvedRun {
    pub fn settings(&self) -> &ExampleSettings {
        &self.spec.settings
    }

    /// Resolved settings as ordered `(key, value)` pairs.
    pub fn echo(&self) -> Vec<(String, String)> {
        let s = &self.spec.settings;
        let w = &self.assembly.weights;
        let rule = match s.error_rule {
            QuadratureRule::GaussLegendre { nodes_per_axis } => format!("gauss-legendre {nodes_per_axis}/axis"),
            QuadratureRule::MonteCarlo { samples, seed } => format!("monte-carlo {samples} (seed {seed})"),
        };
        let mut out = vec![
            ("example".into(), self.spec.id.to_string()),
            ("title".into(), self.spec.title.to_string()),
            ("formulation".into(), if s.mixed { "mixed" } else { "strong" }.to_string()),
            ("dim".into(), self.spec.problem.geom.dim().to_string()),
            ("time_horizon".into(), self.spec.problem.geom.time_horizon().map_or("none".into(), |t| t.to_string())),
            ("network.m".into(), s.m.to_string()),
            ("sampling.N".into(), s.n_points().to_string()),
            ("sampling.plan".into(), fmt_plan(&s.sampling)),
            ("sampling.interface_measure".into(), format!("{:?}", s.sampling.interface_measure).to_lowercase()),
            ("problem.beta".into(), fmt_list(&self.spec.problem.beta)),
            ("network.u_ranges".into(), fmt_ranges(&s.u_ranges)),
        ];
        if s.mixed {
            out.push(("network.p_ranges".into(), fmt_ranges(&s.p_ranges)));
        }
        let mut gamma = String::new();
        let _ = write!(gamma, "jump={} flux_jump={} dirichlet={} initial={}", w.jump, w.flux_jump, w.dirichlet, w.initial);
        out.extend([
            ("gamma".into(), gamma),
            ("assembly.flux_beta".into(), self.assembly.flux_beta.to_string()),
            ("fd.h1".into(), num(self.assembly.fd.h1)),
            ("fd.h2".into(), num(self.assembly.fd.h2)),
            ("solver.method".into(), self.solver.method.to_string()),
            ("solver.rcond".into(), num(self.solver.rcond)),
            ("error.rule".into(), rule),
            ("seed".into(), self.base_seed.to_string()),
            ("trials".into(), s.trials.to_string()),
        ]);
        out
    }
}
