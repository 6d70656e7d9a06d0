//! Command-line front end: simulation, fitting, bootstrap, kriging,
//! validity checks and preprocessing for the six-variable wind-field model.
//!
//! Exit codes: 0 success, 2 usage or input-format error, 3 numeric/model
//! error. Every command is deterministic given --seed, independent of
//! --threads.

use clap::{Args, Parser, Subcommand};
use hgrf::error::HgrfError;
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;

#[derive(Parser)]
#[command(
    name = "hgrf",
    about = "Helmholtz-coupled Gaussian random fields for 2-D wind",
    version
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores). Results
    /// do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Grid geometry flags shared by several commands.
#[derive(Args, Debug, Clone)]
struct GridArgs {
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    ny: usize,
    #[arg(long, default_value_t = 1.0)]
    dx: f64,
    #[arg(long, default_value_t = 1.0)]
    dy: f64,
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
    #[arg(long, default_value_t = 0.0)]
    y0: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate realizations of the field on a grid (circulant embedding).
    Simulate {
        /// Parameter file (key=value; see README).
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Comma-separated components: psi,chi,u,v,zeta,div.
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of realizations.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Output prefix; files are written as <out>_<k>.hgrf.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit model parameters to a (u, v) field by composite likelihood.
    Fit {
        /// Input grid field with exactly the u and v components.
        #[arg(long)]
        input: PathBuf,
        /// Side length of the square lag neighborhood (odd, e.g. 41).
        #[arg(long, default_value_t = 41)]
        neighborhood: usize,
        #[arg(long, default_value_t = 50)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output fit file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Parametric bootstrap: simulate from a model, refit each replicate.
    Bootstrap {
        /// Truth parameter file (or a previous fit file via --fit).
        #[arg(long, conflicts_with = "fit")]
        params: Option<PathBuf>,
        /// Take the truth from a previous fit output.
        #[arg(long)]
        fit: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 41)]
        neighborhood: usize,
        #[arg(long, default_value_t = 100)]
        nrep: usize,
        #[arg(long, default_value_t = 10)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix: <out>_rep<k>.txt per replicate, <out>_summary.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simple kriging (and optional conditional simulation) from scattered
    /// observations.
    Krige {
        #[arg(long)]
        params: PathBuf,
        /// Observation CSV: var,x,y,value,noise_sd.
        #[arg(long)]
        obs: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Target components to predict.
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
        /// Also write this many conditional realizations.
        #[arg(long, default_value_t = 0)]
        conditional: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix: <out>_mean.hgrf, <out>_sd.hgrf, <out>_cond<k>.hgrf.
        #[arg(long)]
        out: PathBuf,
    },
    /// Positive-definiteness checks.
    Validate {
        /// Check the Gaussian-kernel potential model with scale a and
        /// cross-coefficient lambda (closed form plus spectral check).
        #[arg(long, requires = "a", requires = "lambda")]
        daley: bool,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Check the Matern model from a parameter file on a spectral grid.
        #[arg(long, conflicts_with = "daley")]
        params: Option<PathBuf>,
    },
    /// Variance-stabilizing transform of a wind field plus marginal
    /// diagnostics.
    Transform {
        /// Input grid field containing at least u and v.
        #[arg(long)]
        input: PathBuf,
        /// Smoother bandwidth in length units.
        #[arg(long)]
        bandwidth: f64,
        /// Offset constant of the transform.
        #[arg(long, default_value_t = 1.0 / 3.0)]
        c: f64,
        /// Transformed field output.
        #[arg(long)]
        out: PathBuf,
        /// Optional plot-ready dump of the smoothed energy surface.
        #[arg(long)]
        ghat_out: Option<PathBuf>,
        /// Optional two-column QQ data prefix (<prefix>_<var>.txt).
        #[arg(long)]
        qq_out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure thread pool: {e}");
            return ExitCode::from(3);
        }
    }

    let outcome = match cli.command {
        Command::Simulate {
            params,
            grid,
            vars,
            seed,
            n,
            out,
        } => commands::simulate(&params, &grid, &vars, seed, n, &out),
        Command::Fit {
            input,
            neighborhood,
            starts,
            seed,
            out,
        } => commands::fit(&input, neighborhood, starts, seed, &out),
        Command::Bootstrap {
            params,
            fit,
            grid,
            neighborhood,
            nrep,
            starts,
            seed,
            out,
        } => commands::bootstrap(
            params.as_deref(),
            fit.as_deref(),
            &grid,
            neighborhood,
            nrep,
            starts,
            seed,
            &out,
        ),
        Command::Krige {
            params,
            obs,
            grid,
            vars,
            conditional,
            seed,
            out,
        } => commands::krige(&params, &obs, &grid, &vars, conditional, seed, &out),
        Command::Validate {
            daley,
            a,
            lambda,
            params,
        } => commands::validate(daley, a, lambda, params.as_deref()),
        Command::Transform {
            input,
            bandwidth,
            c,
            out,
            ghat_out,
            qq_out,
        } => commands::transform(
            &input,
            bandwidth,
            c,
            &out,
            ghat_out.as_deref(),
            qq_out.as_deref(),
        ),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// 2 for malformed inputs and bad requests, 3 for numeric/model failures.
fn exit_code_for(e: &HgrfError) -> u8 {
    match e {
        HgrfError::Parse { .. } | HgrfError::Io(_) | HgrfError::Domain(_) => 2,
        _ => 3,
    }
}
