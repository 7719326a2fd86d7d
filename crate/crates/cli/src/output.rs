//! Files written by a run.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use lrnn_core::assembly::{assemble, Solution};
use lrnn_core::problems::build_bases;
use lrnn_core::randnet::points_matrix;
use lrnn_core::sampling::{network_input, sample_collocation};

use crate::config::ResolvedRun;
use crate::run::{RunManifest, SweepCell, SLICE_FRACTIONS};

/// Shortest round-trip text; exponent form outside `[1e-3, 1e7)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-3..1e7).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Writes `manifest.txt` and `errors.csv` into `dir`.
pub fn write_outputs(dir: &Path, manifest: &RunManifest) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut text = String::new();
    for (k, v) in &manifest.config {
        text.push_str(&format!("{k} = {v}\n"));
    }
    text.push_str(&format!("result.mean_error = {}\n", num(manifest.mean_error)));
    if let Some(f) = manifest.mean_flux_error {
        text.push_str(&format!("result.mean_flux_error = {}\n", num(f)));
    }
    for (t, e) in &manifest.mean_slice_errors {
        text.push_str(&format!("result.mean_error_t{t} = {}\n", num(*e)));
    }
    if let Some(first) = manifest.trials.first() {
        for (tag, rms) in &first.residuals {
            text.push_str(&format!("trial0.residual_rms.{tag} = {}\n", num(*rms)));
        }
        let d = &first.diagnostics;
        text.push_str(&format!(
            "trial0.solver = rank {} sigma_max {} sigma_min_kept {}\n",
            d.rank,
            num(d.sigma_max),
            num(d.sigma_min_kept)
        ));
    }
    let secs: f64 = manifest.trials.iter().map(|t| t.times.total()).sum();
    text.push_str(&format!("result.total_seconds = {secs:.3}\n"));
    fs::write(dir.join("manifest.txt"), text)?;
    write_errors_csv(&dir.join("errors.csv"), manifest)
}

pub fn write_errors_csv(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header: Vec<String> = [
        "trial", "seed", "error", "flux_error", "rows", "cols", "rank", "residual_norm", "t_sample", "t_assemble",
        "t_solve", "t_evaluate",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if let Some(first) = manifest.trials.first() {
        header.extend(first.slice_errors.iter().map(|(t, _)| format!("error_t{t}")));
    }
    w.write_record(&header)?;
    for t in &manifest.trials {
        let mut rec = vec![
            t.trial.to_string(),
            t.seed.to_string(),
            num(t.error),
            t.flux_error.map_or(String::new(), num),
            t.rows.to_string(),
            t.cols.to_string(),
            t.diagnostics.rank.to_string(),
            num(t.diagnostics.residual_norm),
            t.times.sample.to_string(),
            t.times.assemble.to_string(),
            t.times.solve.to_string(),
            t.times.evaluate.to_string(),
        ];
        rec.extend(t.slice_errors.iter().map(|(_, e)| num(*e)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `(trial, seed, error)` triples read back from `errors.csv`.
pub fn read_errors_csv(path: &Path) -> Result<Vec<(usize, u64, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok((rec[0].parse()?, rec[1].parse()?, rec[2].parse()?))
        })
        .collect()
}

/// One row of a plotting grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub x: Vec<f64>,
    pub u_rho: f64,
    pub u_exact: f64,
    pub subdomain: usize,
}

/// Uniform tensor grid with `resolution` points per spatial axis, endpoints
/// included, evaluated at time `t`.
pub fn grid_values(run: &ResolvedRun, solution: &Solution, resolution: usize, t: Option<f64>) -> Result<Vec<GridRow>> {
    let geom = &run.spec.problem.geom;
    let d = geom.dim();
    if d > 3 {
        bail!("grid output supports at most three spatial dimensions, problem has {d}");
    }
    if resolution < 2 {
        bail!("grid resolution must be at least 2");
    }
    let (lo, hi) = (geom.domain().lo(), geom.domain().hi());
    let total = resolution.pow(d as u32);
    let mut xs = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut x = vec![0.0; d];
        // last axis fastest
        for k in (0..d).rev() {
            let i = rem % resolution;
            rem /= resolution;
            x[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (resolution - 1) as f64;
        }
        xs.push(x);
    }
    let subs = xs.iter().map(|x| geom.classify_nudged(x, t)).collect::<lrnn_core::Result<Vec<_>>>()?;
    let inputs: Vec<Vec<f64>> = xs.iter().map(|x| network_input(x, t)).collect();
    let width = d + usize::from(t.is_some());
    let u = solution.eval(&subs, points_matrix(inputs.iter().map(|r| r.as_slice()), width).view())?;
    let exact = run.spec.exact.as_ref();
    Ok(xs
        .into_iter()
        .zip(subs)
        .zip(u)
        .map(|((x, s), u_rho)| GridRow { u_exact: exact.value(s, &x, t), x, u_rho, subdomain: s })
        .collect())
}

fn write_grid(path: &Path, rows: &[GridRow], t: Option<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let d = rows.first().map_or(0, |r| r.x.len());
    let mut header: Vec<&str> = ["x", "y", "z"][..d].to_vec();
    if t.is_some() {
        header.push("t");
    }
    header.extend(["u_rho", "u_exact", "abs_error", "subdomain"]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.x.iter().map(|v| num(*v)).collect();
        if let Some(t) = t {
            rec.push(t.to_string());
        }
        rec.extend([
            num(r.u_rho),
            num(r.u_exact),
            num((r.u_rho - r.u_exact).abs()),
            r.subdomain.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `grid.csv` for stationary problems; `grid_t<t>.csv` per reported slice otherwise.
pub fn write_grids(dir: &Path, run: &ResolvedRun, solution: &Solution, resolution: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    match run.spec.problem.geom.time_horizon() {
        None => write_grid(&dir.join("grid.csv"), &grid_values(run, solution, resolution, None)?, None),
        Some(horizon) => {
            for f in SLICE_FRACTIONS {
                let t = f * horizon;
                let rows = grid_values(run, solution, resolution, Some(t))?;
                write_grid(&dir.join(format!("grid_t{t}.csv")), &rows, Some(t))?;
            }
            Ok(())
        }
    }
}

/// Re-assembles the first trial's system and writes it in the raw matrix format.
pub fn dump_system(path: &Path, run: &ResolvedRun) -> Result<()> {
    let prob = &run.spec.problem;
    let settings = run.settings();
    let seed = run.base_seed;
    let pts = sample_collocation(&prob.geom, &settings.sampling.clone().with_seed(seed))?;
    let bases = build_bases(&prob.geom, settings, seed)?;
    let sys = assemble(prob, &bases, &pts, &run.assembly)?;
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    sys.write_matrix(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Sweep table: one row per N, one column per m.
pub fn write_sweep(path: &Path, cells: &[SweepCell]) -> Result<()> {
    let mut ms: Vec<usize> = cells.iter().map(|c| c.m).collect();
    ms.dedup();
    ms.sort_unstable();
    ms.dedup();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["N".to_string()];
    header.extend(ms.iter().map(|m| format!("m{m}")));
    w.write_record(&header)?;
    for row in cells.chunks(ms.len()) {
        let mut rec = vec![row[0].n_points.to_string()];
        rec.extend(row.iter().map(|c| num(c.mean_error)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
