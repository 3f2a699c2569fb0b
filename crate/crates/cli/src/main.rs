use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use varfrac_cli::config::{Command, ExperimentConfig};
use varfrac_cli::run::run;

/// Variable-exponent fractional solvers: kernels, subdiffusion, Abel equations
/// and a two-sided space-fractional BVP. Every subcommand writes CSV files whose
/// first line is a `#` metadata echo of the configuration and seed.
///
/// Exit status: 0 when all embedded checks pass, 2 when a check fails, 1 on error.
#[derive(Parser, Debug)]
#[command(name = "varfrac", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Configuration file of `key = value` lines (`#` starts a comment).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "VARFRAC_OUT",
        default_value = "varfrac-out"
    )]
    out: PathBuf,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Named preset: fig-left, fig-right, abel-roundtrip, bvp-manufactured, invert.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Override one key, e.g. `--set N=64,128`. Applied after the preset and the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Tabulate k, g, g′ and g̃ at `points` times in (0, T].
    ///
    /// Keys: alpha0 (list, [0,1]; 0.6), exponent (sine|linear|constant; sine), amp (0.1), T (1), points (50).
    /// CSV kernel_a<alpha0>.csv: t, k, g, g_prime, g_tilde.
    Kernel,
    /// Solve the subdiffusion model on (0,1)² and record the solution at a probe point.
    ///
    /// Keys: alpha0 (list, (0,1); 0.6), exponent (sine), amp (0.1), T (1), M (list; 64),
    /// N (list; 32,64,128,256), lambda (20/T), problem (manufactured|probe), probe_x, probe_y (0.5).
    /// CSV subdiffusion_a<alpha0>_M<M>_N<N>.csv: n, t_n, error_L2, probe_value.
    /// With problem = probe, subdiffusion_probe_summary.csv holds the early-time slopes and
    /// the run checks that the slopes increase with alpha0.
    Subdiffusion,
    /// Solve the Abel integral equation (k * u)(t) = f(t).
    ///
    /// Keys: alpha0 (list, [0,1]; 0.6), exponent (linear), amp (0.1), T (1), N (list; 64,128,256),
    /// solution (quadratic|exp|cos|unit-data), threshold (1e-3).
    /// CSV abel_a<alpha0>_N<N>.csv: t, u_num, u_exact, residual; abel_summary.csv: alpha0, N, l1_error, max_residual.
    Abel,
    /// Solve the two-sided space-fractional BVP with exact solution x²(1−x)².
    ///
    /// Keys: alpha0 (list, (1,2); 1.4), exponent (linear), amp (0.2), r (0.5), b (1), c (2), cells (16,32,64,128).
    /// CSV bvp.csv: alpha0, n_cells, h, L2_error, coercivity_indicator.
    Bvp,
    /// Recover alpha0 from the early-time behaviour of the solution with f = 0.
    ///
    /// Keys: alpha0 (list; 0.4,0.6,0.8), exponent (linear), amp (0.1), T (1e-6), M (16), N (1024),
    /// lambda, levels (6), tolerance (0.05).
    /// CSV invert_alpha0.csv: alpha0, estimate, abs_error; invert_alpha0_samples.csv: alpha0, t, ratio.
    InvertAlpha0,
    /// Temporal or spatial convergence study for u = (1 + t^alpha0) sin πx sin πy.
    ///
    /// Keys: alpha0 (list; 0.6), exponent (sine), amp (0.1), T (1), M (list; 64), N (list; 32,64,128,256),
    /// lambda, axis (time|space), order_tolerance (0.2).
    /// CSV convergence.csv: alpha0, M, N, tau, error, fitted_order.
    Convergence,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Kernel => Command::Kernel,
            Sub::Subdiffusion => Command::Subdiffusion,
            Sub::Abel => Command::Abel,
            Sub::Bvp => Command::Bvp,
            Sub::InvertAlpha0 => Command::InvertAlpha0,
            Sub::Convergence => Command::Convergence,
        }
    }
}

fn configure(cli: &Cli) -> Result<ExperimentConfig> {
    let command = Command::from(cli.command);
    let mut cfg = match &cli.preset {
        Some(p) => ExperimentConfig::preset(command, p)?,
        None => ExperimentConfig::defaults(command),
    };
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for kv in &cli.set {
        cfg.apply_override(kv)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = configure(&cli).and_then(|cfg| run(&cfg, &cli.out, cli.seed));
    match outcome {
        Ok(o) => {
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            for line in &o.report {
                println!("{line}");
            }
            if o.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
