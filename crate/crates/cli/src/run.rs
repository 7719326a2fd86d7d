//! Multi-trial execution.

use std::time::Instant;

use anyhow::{Context, Result};
use lrnn_core::assembly::{assemble, residual, solve_system, RowTag, Solution};
use lrnn_core::linsolve::SolveDiagnostics;
use lrnn_core::par;
use lrnn_core::problems::build_bases;
use lrnn_core::quadrature::{
    quadrature_nodes, relative_l2_error, relative_l2_error_flux, slice_nodes, QuadNode, QuadratureRule,
};
use lrnn_core::randnet::points_matrix;
use lrnn_core::sampling::{sample_collocation, Region, SamplingPlan};

use crate::config::{ResolvedRun, RunConfig};

/// Time slices reported for space-time problems (as fractions of the horizon).
pub const SLICE_FRACTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    pub sample: f64,
    pub assemble: f64,
    pub solve: f64,
    pub evaluate: f64,
}

impl PhaseTimes {
    pub fn total(&self) -> f64 {
        self.sample + self.assemble + self.solve + self.evaluate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub error: f64,
    pub flux_error: Option<f64>,
    /// `(t, relative error on that slice)`; space-time problems only.
    pub slice_errors: Vec<(f64, f64)>,
    pub rows: usize,
    pub cols: usize,
    pub diagnostics: SolveDiagnostics,
    pub residuals: Vec<(RowTag, f64)>,
    pub times: PhaseTimes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: Vec<(String, String)>,
    pub trials: Vec<TrialResult>,
    pub mean_error: f64,
    pub mean_flux_error: Option<f64>,
    pub mean_slice_errors: Vec<(f64, f64)>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

impl RunManifest {
    fn from_trials(config: Vec<(String, String)>, trials: Vec<TrialResult>) -> Self {
        let mean_error = mean(trials.iter().map(|t| t.error));
        let mean_flux_error =
            trials.iter().all(|t| t.flux_error.is_some()).then(|| mean(trials.iter().filter_map(|t| t.flux_error)));
        let n_slices = trials.first().map_or(0, |t| t.slice_errors.len());
        let mean_slice_errors = (0..n_slices)
            .map(|k| (trials[0].slice_errors[k].0, mean(trials.iter().map(|t| t.slice_errors[k].1))))
            .collect();
        Self { config, trials, mean_error, mean_flux_error, mean_slice_errors }
    }
}

/// Evaluation nodes shared by all trials of a run.
pub struct Evaluator {
    pub nodes: Vec<QuadNode>,
    pub slices: Vec<(f64, Vec<QuadNode>)>,
}

impl Evaluator {
    pub fn new(run: &ResolvedRun) -> Result<Self> {
        let geom = &run.spec.problem.geom;
        let rule = run.settings().error_rule;
        let nodes = quadrature_nodes(geom, &rule)?;
        let slices = match (geom.time_horizon(), rule) {
            (Some(horizon), QuadratureRule::GaussLegendre { nodes_per_axis }) => SLICE_FRACTIONS
                .iter()
                .map(|f| Ok((f * horizon, slice_nodes(geom, nodes_per_axis, f * horizon)?)))
                .collect::<Result<Vec<_>>>()?,
            _ => Vec::new(),
        };
        Ok(Self { nodes, slices })
    }
}

/// One complete solve: sample, build bases, assemble, solve, evaluate.
pub fn execute_trial(run: &ResolvedRun, eval: &Evaluator, trial: usize) -> Result<(TrialResult, Solution)> {
    let seed = run.base_seed.wrapping_add(trial as u64);
    let prob = &run.spec.problem;
    let settings = run.settings();
    let exact = run.spec.exact.as_ref();
    let mut times = PhaseTimes::default();

    let clock = Instant::now();
    let pts = sample_collocation(&prob.geom, &settings.sampling.clone().with_seed(seed))?;
    let bases = build_bases(&prob.geom, settings, seed)?;
    times.sample = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let sys = assemble(prob, &bases, &pts, &run.assembly)?;
    times.assemble = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let (solution, diagnostics) = solve_system(&sys, &bases, &run.solver)?;
    times.solve = clock.elapsed().as_secs_f64();
    let residuals = residual(&sys, solution.coefficients().view())?;
    let (rows, cols) = (sys.rows(), sys.cols());
    drop(sys);

    let clock = Instant::now();
    let error = relative_l2_error(&solution, exact, &eval.nodes)?;
    let flux_error = if settings.mixed {
        Some(relative_l2_error_flux(&solution, exact, &prob.beta, &eval.nodes)?)
    } else {
        None
    };
    let slice_errors = eval
        .slices
        .iter()
        .map(|(t, nodes)| Ok((*t, relative_l2_error(&solution, exact, nodes)?)))
        .collect::<Result<Vec<_>>>()?;
    times.evaluate = clock.elapsed().as_secs_f64();

    let result =
        TrialResult { trial, seed, error, flux_error, slice_errors, rows, cols, diagnostics, residuals, times };
    Ok((result, solution))
}

/// Runs every trial and returns the manifest together with the first trial's solution.
pub fn run_resolved(run: &ResolvedRun, parallel_trials: bool) -> Result<(RunManifest, Solution)> {
    let eval = Evaluator::new(run)?;
    let n = run.settings().trials;
    let task = |k: usize| execute_trial(run, &eval, k).with_context(|| format!("trial {k}"));
    let outcomes: Vec<Result<(TrialResult, Solution)>> =
        if parallel_trials { par::map_range(n, task) } else { (0..n).map(task).collect() };
    let mut trials = Vec::with_capacity(n);
    let mut first = None;
    for outcome in outcomes {
        let (result, solution) = outcome?;
        if first.is_none() {
            first = Some(solution);
        }
        trials.push(result);
    }
    let manifest = RunManifest::from_trials(run.echo(), trials);
    Ok((manifest, first.expect("at least one trial")))
}

pub fn run(cfg: &RunConfig) -> Result<RunManifest> {
    let resolved = cfg.resolve()?;
    let (manifest, solution) = run_resolved(&resolved, cfg.parallel_trials)?;
    if let Some(dir) = &cfg.out {
        crate::output::write_outputs(dir, &manifest)?;
        if cfg.grid_resolution >= 2 {
            crate::output::write_grids(dir, &resolved, &solution, cfg.grid_resolution)?;
        }
    }
    if let Some(path) = &cfg.dump_system {
        crate::output::dump_system(path, &resolved)?;
    }
    Ok(manifest)
}

/// RMS of `u_rho - g_D` on `n` fresh boundary points (seeded apart from the
/// collocation points).
pub fn held_out_boundary_rms(run: &ResolvedRun, solution: &Solution, n: usize, seed: u64) -> Result<f64> {
    let prob = &run.spec.problem;
    let plan = SamplingPlan::absolute(
        std::iter::once((Region::Interior, 1))
            .chain((0..prob.geom.interfaces().len()).map(|i| (Region::Interface(i), 1)))
            .chain(std::iter::once((Region::Boundary, n)))
            .collect(),
        seed ^ 0x00B0_0D1E,
    );
    let pts = sample_collocation(&prob.geom, &plan)?;
    let inputs: Vec<Vec<f64>> = pts.boundary.iter().map(|p| p.input()).collect();
    let width = inputs[0].len();
    let subs: Vec<usize> = pts.boundary.iter().map(|p| p.subdomain).collect();
    let u = solution.eval(&subs, points_matrix(inputs.iter().map(|r| r.as_slice()), width).view())?;
    let ss: f64 = pts
        .boundary
        .iter()
        .zip(&u)
        .map(|(p, v)| (v - (prob.dirichlet)(p.subdomain, &p.x, p.t)).powi(2))
        .sum();
    Ok((ss / n as f64).sqrt())
}

/// One cell of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub n_points: usize,
    pub m: usize,
    pub mean_error: f64,
    pub seconds: f64,
}

/// Mean error for every `(N, m)` pair, N-major.
pub fn sweep(cfg: &RunConfig, ns: &[usize], ms: &[usize]) -> Result<Vec<SweepCell>> {
    anyhow::ensure!(!ns.is_empty() && !ms.is_empty(), "sweep grids must be nonempty");
    let mut cells = Vec::with_capacity(ns.len() * ms.len());
    for &n in ns {
        for &m in ms {
            let cell_cfg = RunConfig { n_points: Some(n), m: Some(m), out: None, dump_system: None, ..cfg.clone() };
            let clock = Instant::now();
            let (manifest, _) = run_resolved(&cell_cfg.resolve()?, cfg.parallel_trials)?;
            cells.push(SweepCell { n_points: n, m, mean_error: manifest.mean_error, seconds: clock.elapsed().as_secs_f64() });
        }
    }
    Ok(cells)
}
