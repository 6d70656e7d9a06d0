//! Simple kriging and conditional simulation across the six variables.
//!
//! Any subset of the variables can be observed at scattered locations and
//! any subset predicted on a grid: the conditional expectation of, say, the
//! potentials given wind observations is a stochastically grounded solve of
//! the underlying differential relations, with pointwise error bands.

use crate::cov::aniso_block;
use crate::error::{HgrfError, Result};
use crate::grid::{GridField, GridSpec};
use crate::params::{Lag, ModelParams, VariableId};
use crate::simulate::Simulator;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Scattered observation of one variable, with independent Gaussian noise
/// (noise_sd = 0 means exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub var: VariableId,
    pub location: [f64; 2],
    pub value: f64,
    pub noise_sd: f64,
}

impl Observation {
    pub fn new(var: VariableId, location: [f64; 2], value: f64, noise_sd: f64) -> Result<Self> {
        if !(location[0].is_finite() && location[1].is_finite() && value.is_finite()) {
            return Err(HgrfError::Domain(
                "observation location and value must be finite".to_string(),
            ));
        }
        if !noise_sd.is_finite() || noise_sd < 0.0 {
            return Err(HgrfError::Domain(format!(
                "noise_sd must be nonnegative, got {noise_sd}"
            )));
        }
        Ok(Self {
            var,
            location,
            value,
            noise_sd,
        })
    }
}

/// Kriging output: predicted mean surface and pointwise prediction
/// standard deviation, in the same grid layout.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigeResult {
    pub mean: GridField,
    pub sd: GridField,
}

/// Dense factorizations are refused above this observation count.
pub const MAX_OBSERVATIONS: usize = 5000;

struct ObsSystem {
    chol: Option<Cholesky<f64, Dyn>>,
    weights: DVector<f64>,
}

fn observation_system(p: &ModelParams, obs: &[Observation]) -> Result<ObsSystem> {
    if obs.is_empty() {
        return Ok(ObsSystem {
            chol: None,
            weights: DVector::zeros(0),
        });
    }
    if obs.len() > MAX_OBSERVATIONS {
        return Err(HgrfError::Conditioning(format!(
            "{} observations exceed the dense-solver limit of {MAX_OBSERVATIONS}",
            obs.len()
        )));
    }
    // Two exact observations of the same variable at the same spot make the
    // system singular up to the ridge; refuse them outright.
    for i in 0..obs.len() {
        for j in (i + 1)..obs.len() {
            let (a, b) = (&obs[i], &obs[j]);
            if a.var == b.var
                && a.noise_sd == 0.0
                && b.noise_sd == 0.0
                && (a.location[0] - b.location[0]).powi(2)
                    + (a.location[1] - b.location[1]).powi(2)
                    < 1e-20
            {
                return Err(HgrfError::Conditioning(format!(
                    "observation covariance is singular beyond ridge; near-duplicates: {}",
                    near_duplicates(obs)
                )));
            }
        }
    }
    let items: Vec<(VariableId, [f64; 2])> = obs.iter().map(|o| (o.var, o.location)).collect();
    let mut k = crate::cov::joint_matrix(p, &items)?;
    for (i, o) in obs.iter().enumerate() {
        k[(i, i)] += o.noise_sd * o.noise_sd;
    }
    let ridge = 1e-10 * k.trace() / obs.len() as f64;
    for i in 0..obs.len() {
        k[(i, i)] += ridge;
    }
    let chol = Cholesky::new(k).ok_or_else(|| {
        HgrfError::Conditioning(format!(
            "observation covariance is singular beyond ridge; near-duplicates: {}",
            near_duplicates(obs)
        ))
    })?;
    let values = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.value));
    let weights = chol.solve(&values);
    Ok(ObsSystem {
        chol: Some(chol),
        weights,
    })
}

fn near_duplicates(obs: &[Observation]) -> String {
    let mut found = Vec::new();
    for i in 0..obs.len() {
        for j in (i + 1)..obs.len() {
            let (a, b) = (&obs[i], &obs[j]);
            let d2 = (a.location[0] - b.location[0]).powi(2)
                + (a.location[1] - b.location[1]).powi(2);
            if a.var == b.var && d2 < 1e-20 {
                found.push(format!("({i}, {j})"));
                if found.len() >= 5 {
                    return found.join(", ") + ", ...";
                }
            }
        }
    }
    if found.is_empty() {
        "none detected".to_string()
    } else {
        found.join(", ")
    }
}

/// Simple-kriging predictor (known zero mean) of `targets` on `grid`.
///
/// Mean is K_to^T (K_oo + noise)^{-1} y, variance is the prior variance
/// minus the explained part, clamped at zero.
pub fn krige(
    p: &ModelParams,
    obs: &[Observation],
    grid: &GridSpec,
    targets: &[VariableId],
) -> Result<KrigeResult> {
    if targets.is_empty() {
        return Err(HgrfError::Domain("no target components".to_string()));
    }
    let system = observation_system(p, obs)?;

    let n_nodes = grid.n_points();
    let mut mean_vals = vec![vec![0.0; n_nodes]; targets.len()];
    let mut sd_vals = vec![vec![0.0; n_nodes]; targets.len()];

    for (t_idx, tv) in targets.iter().enumerate() {
        let prior = aniso_block(p, *tv, *tv, Lag::zero())?;
        let results: Vec<(f64, f64)> = (0..n_nodes)
            .into_par_iter()
            .map(|node| -> Result<(f64, f64)> {
                let loc = grid.location(node % grid.nx(), node / grid.nx());
                if obs.is_empty() {
                    return Ok((0.0, prior.sqrt()));
                }
                let mut k = DVector::zeros(obs.len());
                for (i, o) in obs.iter().enumerate() {
                    k[i] = aniso_block(
                        p,
                        o.var,
                        *tv,
                        Lag::new(loc[0] - o.location[0], loc[1] - o.location[1]),
                    )?;
                }
                let mean = k.dot(&system.weights);
                let solved = system.chol.as_ref().unwrap().solve(&k);
                let var = (prior - k.dot(&solved)).max(0.0);
                Ok((mean, var.sqrt()))
            })
            .collect::<Result<_>>()?;
        for (node, (m, s)) in results.into_iter().enumerate() {
            mean_vals[t_idx][node] = m;
            sd_vals[t_idx][node] = s;
        }
    }

    Ok(KrigeResult {
        mean: GridField::new(*grid, targets.to_vec(), mean_vals)?,
        sd: GridField::new(*grid, targets.to_vec(), sd_vals)?,
    })
}

/// Conditioning-by-kriging simulation: unconditional realization plus the
/// kriged correction of the observation residuals.
///
/// Observations must coincide with grid nodes (the unconditional field is
/// only realized there); noisy observations get an independent noise draw
/// per realization.
pub fn conditional_simulate(
    p: &ModelParams,
    obs: &[Observation],
    grid: &GridSpec,
    targets: &[VariableId],
    seed: u64,
    n_realizations: usize,
) -> Result<Vec<GridField>> {
    if targets.is_empty() {
        return Err(HgrfError::Domain("no target components".to_string()));
    }
    // Simulate the union of target and observed variables jointly.
    let mut union = targets.to_vec();
    for o in obs {
        if !union.contains(&o.var) {
            union.push(o.var);
        }
    }
    let sim = Simulator::new(p, grid, &union)?;

    let snap_tol = 1e-12 * (grid.dx() * grid.dx() + grid.dy() * grid.dy());
    let obs_nodes: Vec<(usize, usize)> = obs
        .iter()
        .map(|o| {
            let (ix, iy, d2) = grid.nearest_node(o.location[0], o.location[1]);
            if d2 > snap_tol {
                return Err(HgrfError::Domain(format!(
                    "conditional simulation requires observations on grid nodes; ({}, {}) is off-grid",
                    o.location[0], o.location[1]
                )));
            }
            Ok((ix, iy))
        })
        .collect::<Result<_>>()?;

    let system = observation_system(p, obs)?;

    // Cross-covariance of every observation with every target node, built
    // once and reused across realizations.
    let n_nodes = grid.n_points();
    let cross: Vec<DMatrix<f64>> = targets
        .iter()
        .map(|tv| -> Result<DMatrix<f64>> {
            let mut m = DMatrix::zeros(n_nodes, obs.len());
            for node in 0..n_nodes {
                let loc = grid.location(node % grid.nx(), node / grid.nx());
                for (i, o) in obs.iter().enumerate() {
                    m[(node, i)] = aniso_block(
                        p,
                        o.var,
                        *tv,
                        Lag::new(loc[0] - o.location[0], loc[1] - o.location[1]),
                    )?;
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;

    (0..n_realizations as u64)
        .into_par_iter()
        .map(|k| -> Result<GridField> {
            let z = sim.realization(seed, k)?;
            let mut out_vals: Vec<Vec<f64>> = targets
                .iter()
                .map(|tv| z.component(*tv).unwrap().to_vec())
                .collect();

            if !obs.is_empty() {
                // Residual y - (z_obs + noise draw), kriged back onto targets.
                // The noise stream is salted apart from the field stream.
                let mut noise_rng = ChaCha12Rng::seed_from_u64(seed ^ 0xADD0_B5C0_FFEE);
                noise_rng.set_stream(k.wrapping_add(1));
                let mut residual = DVector::zeros(obs.len());
                for (i, (o, &(ix, iy))) in obs.iter().zip(&obs_nodes).enumerate() {
                    let comp = z.component(o.var).unwrap();
                    let mut z_obs = comp[grid.index(ix, iy)];
                    if o.noise_sd > 0.0 {
                        let e: f64 = noise_rng.sample(StandardNormal);
                        z_obs += o.noise_sd * e;
                    }
                    residual[i] = o.value - z_obs;
                }
                let alpha = system.chol.as_ref().unwrap().solve(&residual);
                for (t_idx, m) in cross.iter().enumerate() {
                    let correction = m * &alpha;
                    for (v, c) in out_vals[t_idx].iter_mut().zip(correction.iter()) {
                        *v += c;
                    }
                }
            }
            GridField::new(*grid, targets.to_vec(), out_vals)
        })
        .collect()
}
