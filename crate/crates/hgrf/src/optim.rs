//! Nelder-Mead simplex minimizer (derivative-free, deterministic).

/// Convergence and budget knobs.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NmOptions {
    pub max_iters: usize,
    /// Relative spread of simplex function values that counts as converged.
    pub f_tol: f64,
    /// Absolute spread of simplex vertices that counts as converged.
    pub x_tol: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            max_iters: 4000,
            f_tol: 1e-10,
            x_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NmOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

/// Minimize `f` starting from `x0` with per-coordinate initial steps.
pub(crate) fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    opts: NmOptions,
) -> NmOutcome {
    let dim = x0.len();
    assert_eq!(steps.len(), dim);
    let mut eval = |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Initial simplex: x0 plus one step along each axis.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = eval(x0);
    simplex.push((x0.to_vec(), v0));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = eval(&x);
        simplex.push((x, v));
    }

    let (alpha, gamma, beta, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;

    for _ in 0..opts.max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let f_spread = (worst - best).abs();
        let x_spread = (0..dim)
            .map(|i| {
                simplex
                    .iter()
                    .map(|(x, _)| (x[i] - simplex[0].0[i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if f_spread <= opts.f_tol * (best.abs() + 1.0) && x_spread <= opts.x_tol {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for (x, _) in simplex.iter().take(dim) {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }

        let point_at = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = point_at(alpha);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = point_at(gamma);
            let fe = eval(&expanded);
            simplex[dim] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[dim].1 {
                point_at(beta)
            } else {
                point_at(-beta)
            };
            let fc = eval(&contracted);
            if fc < simplex[dim].1.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                // Shrink toward the best vertex.
                let best_x = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&best_x) {
                        *xi = bi + sigma * (*xi - bi);
                    }
                    *v = eval(x);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NmOutcome {
        x: simplex[0].0.clone(),
        value: simplex[0].1,
        converged,
    }
}
