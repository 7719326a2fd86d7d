use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lrnn_cli::config::RunConfig;
use lrnn_cli::output::write_sweep;
use lrnn_cli::run::{run, sweep};

#[derive(Parser)]
#[command(name = "lrnn", version, about = "Randomized-network collocation solver for interface problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trials of one example.
    Run(Common),
    /// Mean error over a grid of N and m values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated point counts.
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        /// Comma-separated network widths.
        #[arg(long, value_delimiter = ',', required = true)]
        ms: Vec<usize>,
        /// CSV table path.
        #[arg(long, default_value = "sweep.csv")]
        table: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    example: Option<usize>,
    /// strong | mixed
    #[arg(long)]
    formulation: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "n-points", short = 'N')]
    n_points: Option<usize>,
    /// Comma-separated coefficients, innermost subdomain first.
    #[arg(long)]
    beta: Option<String>,
    /// Comma-separated initialisation ranges.
    #[arg(long)]
    r: Option<String>,
    /// Weight range of the solution networks.
    #[arg(long, conflicts_with = "r")]
    r1: Option<f64>,
    /// Bias range of the solution networks.
    #[arg(long, requires = "r1")]
    r2: Option<f64>,
    /// Weight range of the flux networks (mixed form).
    #[arg(long, requires = "r2")]
    r3: Option<f64>,
    #[arg(long, requires = "r3")]
    r4: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// svd | qr | normal
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Points per axis of the plotting grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Run trials concurrently.
    #[arg(long)]
    parallel_trials: bool,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let split: Vec<String> = [self.r1, self.r2, self.r3, self.r4].iter().flatten().map(|v| v.to_string()).collect();
        let ranges = match split.len() {
            0 => self.r.clone(),
            1 | 3 => anyhow::bail!("--r1..--r4 come in (weight, bias) pairs"),
            _ => Some(split.join(",")),
        };
        let pairs: [(&str, Option<String>); 14] = [
            ("example", self.example.map(|v| v.to_string())),
            ("formulation", self.formulation.clone()),
            ("dim", self.dim.map(|v| v.to_string())),
            ("m", self.m.map(|v| v.to_string())),
            ("N", self.n_points.map(|v| v.to_string())),
            ("beta", self.beta.clone()),
            ("r", ranges),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("trials", self.trials.map(|v| v.to_string())),
            ("solver", self.solver.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("grid", self.grid.map(|v| v.to_string())),
            ("parallel_trials", self.parallel_trials.then(|| "true".to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects key=value, got `{kv}`"))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(common) => {
            let cfg = common.config()?;
            let manifest = run(&cfg)?;
            for t in &manifest.trials {
                println!(
                    "trial {:>2}  seed {:>6}  error {:.4e}  {}x{}  {:.2}s",
                    t.trial,
                    t.seed,
                    t.error,
                    t.rows,
                    t.cols,
                    t.times.total()
                );
            }
            println!("mean relative L2 error: {:.4e}", manifest.mean_error);
            if let Some(f) = manifest.mean_flux_error {
                println!("mean relative flux error: {f:.4e}");
            }
            for (t, e) in &manifest.mean_slice_errors {
                println!("  t = {t}: {e:.4e}");
            }
        }
        Command::Sweep { common, ns, ms, table } => {
            let cfg = common.config()?;
            let cells = sweep(&cfg, &ns, &ms)?;
            for c in &cells {
                println!("N {:>6}  m {:>5}  error {:.4e}  {:.1}s", c.n_points, c.m, c.mean_error, c.seconds);
            }
            write_sweep(&table, &cells)?;
        }
    }
    Ok(())
}
