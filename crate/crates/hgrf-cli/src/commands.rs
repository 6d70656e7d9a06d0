//! Implementations of the CLI subcommands.

use crate::GridArgs;
use hgrf::error::{HgrfError, Result};
use hgrf::fit::FitOptions;
use hgrf::io;
use hgrf::preprocess::{self, SmootherSpec};
use hgrf::validity::{
    daley_valid, default_frequency_grid, spectral_valid, DaleyGaussianSpectrum, DaleyParams,
    MaternSpectrum,
};
use hgrf::{GridSpec, NeighborhoodSet, Simulator, VariableId};
use std::fmt::Write as _;
use std::path::Path;

impl GridArgs {
    fn to_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.nx, self.ny, self.dx, self.dy, self.x0, self.y0)
    }
}

fn parse_vars(names: &[String]) -> Result<Vec<VariableId>> {
    if names.is_empty() {
        return Err(HgrfError::Domain(
            "at least one component must be requested via --vars".to_string(),
        ));
    }
    names.iter().map(|s| VariableId::parse(s)).collect()
}

fn neighborhood_from_side(side: usize) -> Result<NeighborhoodSet> {
    if side < 3 || side.is_multiple_of(2) {
        return Err(HgrfError::Domain(format!(
            "neighborhood side must be an odd number >= 3, got {side}"
        )));
    }
    Ok(NeighborhoodSet::square((side - 1) / 2))
}

fn out_with_suffix(prefix: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    prefix.with_file_name(name)
}

pub fn simulate(
    params_path: &Path,
    grid: &GridArgs,
    vars: &[String],
    seed: Option<u64>,
    n: usize,
    out: &Path,
) -> Result<()> {
    let pf = io::read_params(params_path)?;
    let spec = grid.to_spec()?;
    let vars = parse_vars(vars)?;
    let seed = seed.or(pf.seed).unwrap_or(0);
    if n == 0 {
        return Ok(());
    }
    let sim = Simulator::new(&pf.params, &spec, &vars)?;
    if sim.clipped_magnitude() > 0.0 {
        eprintln!(
            "warning: approximate embedding (pad {}x): clipped negative torus eigenvalues up to {:e}",
            sim.pad(),
            sim.clipped_magnitude()
        );
    }
    for k in 0..n {
        let field = sim.realization(seed, k as u64)?;
        let path = out_with_suffix(out, &format!("_{k}.hgrf"));
        io::write_grid(&path, &field)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn fit(input: &Path, neighborhood: usize, starts: usize, seed: u64, out: &Path) -> Result<()> {
    let field = io::read_grid(input)?;
    let n = neighborhood_from_side(neighborhood)?;
    let opts = FitOptions {
        n_starts: starts,
        seed,
        ..FitOptions::default()
    };
    let result = hgrf::fit(&field, &n, &opts)?;
    io::write_fit(out, &result)?;
    println!(
        "cl={} lambda={} rho={} nu={} r1={} r2={} theta={} converged={}",
        result.cl_value,
        result.params.lambda(),
        result.params.rho(),
        result.params.nu(),
        result.params.r1(),
        result.params.r2(),
        result.params.theta(),
        result.converged
    );
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn bootstrap(
    params_path: Option<&Path>,
    fit_path: Option<&Path>,
    grid: &GridArgs,
    neighborhood: usize,
    nrep: usize,
    starts: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let truth = match (params_path, fit_path) {
        (Some(p), None) => io::read_params(p)?.params,
        (None, Some(f)) => io::read_fit(f)?.params,
        _ => {
            return Err(HgrfError::Domain(
                "bootstrap needs exactly one of --params or --fit".to_string(),
            ))
        }
    };
    let spec = grid.to_spec()?;
    let n = neighborhood_from_side(neighborhood)?;
    let fit_opts = FitOptions {
        n_starts: starts,
        seed,
        ..FitOptions::default()
    };
    let ensemble = hgrf::bootstrap(&truth, &spec, &n, nrep, seed, &fit_opts)?;

    for (k, rep) in ensemble.replicates.iter().enumerate() {
        io::write_fit(&out_with_suffix(out, &format!("_rep{k}.txt")), rep)?;
    }

    // Box-whisker table per free parameter, plus the truth row.
    let mut table = String::from("param truth min q1 median q3 max\n");
    let truth_vals = [
        truth.lambda(),
        truth.rho(),
        truth.nu(),
        truth.r1(),
        truth.r2(),
        truth.theta(),
    ];
    for ((name, stats), t) in ensemble.summaries()?.iter().zip(truth_vals) {
        let _ = writeln!(
            table,
            "{name} {t} {} {} {} {} {}",
            stats.min, stats.q1, stats.median, stats.q3, stats.max
        );
    }
    if ensemble.n_failed > 0 {
        let _ = writeln!(table, "# {} replicate(s) failed to refit", ensemble.n_failed);
    }
    let summary_path = out_with_suffix(out, "_summary.txt");
    std::fs::write(&summary_path, table)?;
    println!(
        "wrote {} replicates and {}",
        ensemble.replicates.len(),
        summary_path.display()
    );
    Ok(())
}

pub fn krige(
    params_path: &Path,
    obs_path: &Path,
    grid: &GridArgs,
    vars: &[String],
    conditional: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let pf = io::read_params(params_path)?;
    let obs = io::read_observations(obs_path)?;
    let spec = grid.to_spec()?;
    let targets = parse_vars(vars)?;

    let result = hgrf::krige(&pf.params, &obs, &spec, &targets)?;
    let mean_path = out_with_suffix(out, "_mean.hgrf");
    let sd_path = out_with_suffix(out, "_sd.hgrf");
    io::write_grid(&mean_path, &result.mean)?;
    io::write_grid(&sd_path, &result.sd)?;
    println!("wrote {} and {}", mean_path.display(), sd_path.display());

    if conditional > 0 {
        let fields =
            hgrf::conditional_simulate(&pf.params, &obs, &spec, &targets, seed, conditional)?;
        for (k, f) in fields.iter().enumerate() {
            let path = out_with_suffix(out, &format!("_cond{k}.hgrf"));
            io::write_grid(&path, f)?;
        }
        println!("wrote {conditional} conditional realization(s)");
    }
    Ok(())
}

pub fn validate(
    daley: bool,
    a: Option<f64>,
    lambda: Option<f64>,
    params_path: Option<&Path>,
) -> Result<()> {
    if daley {
        let q = DaleyParams::new(
            a.expect("clap enforces --a"),
            lambda.expect("clap enforces --lambda"),
        )?;
        let decision = daley_valid(&q);
        let spectral = spectral_valid(&DaleyGaussianSpectrum(q), &default_frequency_grid())?;
        println!(
            "{}: {}",
            if decision.valid { "valid" } else { "invalid" },
            decision.reason
        );
        println!(
            "spectral check: {} (min normalized det {:e} at frequency {:e})",
            if spectral.valid { "valid" } else { "invalid" },
            spectral.min_det,
            spectral.argmin_freq
        );
        return Ok(());
    }
    let Some(path) = params_path else {
        return Err(HgrfError::Domain(
            "validate needs either --daley with --a/--lambda, or --params".to_string(),
        ));
    };
    let pf = io::read_params(path)?;
    let report = spectral_valid(&MaternSpectrum(pf.params), &default_frequency_grid())?;
    println!(
        "{}: min normalized det {:e}, min diagonal {:e} (at frequency {:e})",
        if report.valid { "valid" } else { "invalid" },
        report.min_det,
        report.min_diag,
        report.argmin_freq
    );
    Ok(())
}

pub fn transform(
    input: &Path,
    bandwidth: f64,
    c: f64,
    out: &Path,
    ghat_out: Option<&Path>,
    qq_out: Option<&Path>,
) -> Result<()> {
    let field = io::read_grid(input)?;
    let spec = SmootherSpec::new(bandwidth, c)?;
    if spec.is_degenerate_for(field.spec()) {
        eprintln!(
            "warning: bandwidth {bandwidth} is below the grid spacing; smoothing is degenerate"
        );
    }
    let ghat = preprocess::energy_smooth(&field, &spec)?;
    let transformed = preprocess::transform(&field, &ghat, c)?;
    io::write_grid(out, &transformed)?;
    println!("wrote {}", out.display());

    if let Some(path) = ghat_out {
        let g = field.spec();
        let mut s = format!(
            "# energy surface: nx={} ny={} dx={} dy={} x0={} y0={}\n",
            g.nx(),
            g.ny(),
            g.dx(),
            g.dy(),
            g.x0(),
            g.y0()
        );
        for iy in 0..g.ny() {
            let row: Vec<String> = (0..g.nx())
                .map(|ix| ghat.values()[iy * g.nx() + ix].to_string())
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        std::fs::write(path, s)?;
        println!("wrote {}", path.display());
    }

    for d in preprocess::marginal_diagnostics(&transformed)? {
        println!("kurtosis[{}] = {}", d.var, d.kurtosis);
        if let Some(prefix) = qq_out {
            let mut s = String::new();
            for (t, q) in &d.qq {
                let _ = writeln!(s, "{t} {q}");
            }
            let path = out_with_suffix(prefix, &format!("_{}.txt", d.var));
            std::fs::write(&path, s)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
