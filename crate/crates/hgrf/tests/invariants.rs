//! Cross-module statistical invariants that need simulation at scale.

use hgrf::fit::FitOptions;
use hgrf::*;
use rayon::prelude::*;

/// Widening the lag neighborhood adds pairwise information, so the median
/// absolute error of the smoothness estimate must not increase along
/// 11x11 -> 21x21 -> 41x41 (one ordering violation tolerated, the
/// comparison is a statistical trend).
#[test]
fn wider_neighborhoods_do_not_lose_information() {
    let truth = ModelParams::new(1.0, 0.6, 0.0, 1.6, 1.0, 1.0, 0.0).unwrap();
    let g = GridSpec::new(64, 64, 1.0, 1.0, 0.0, 0.0).unwrap();
    let sim = Simulator::new(&truth, &g, &[VariableId::U, VariableId::V]).unwrap();

    let halves = [5usize, 10, 20];
    let n_rep = 20u64;
    let errors: Vec<Vec<f64>> = (0..n_rep)
        .into_par_iter()
        .map(|k| {
            let field = sim.realization(4242, k).unwrap();
            halves
                .iter()
                .map(|&half| {
                    let n = NeighborhoodSet::square(half);
                    let opts = FitOptions {
                        n_starts: 2,
                        seed: 1000 + k,
                        nm_max_iters: 300,
                    };
                    let fit = hgrf::fit(&field, &n, &opts).unwrap();
                    (fit.params.nu() - truth.nu()).abs()
                })
                .collect()
        })
        .collect();

    let median = |mut xs: Vec<f64>| -> f64 {
        xs.sort_by(|a, b| a.total_cmp(b));
        xs[xs.len() / 2]
    };
    let medians: Vec<f64> = (0..halves.len())
        .map(|i| median(errors.iter().map(|e| e[i]).collect()))
        .collect();

    let violations = medians.windows(2).filter(|w| w[1] > w[0]).count();
    println!(
        "median |nu_hat - nu| by neighborhood 11/21/41: {:.4} / {:.4} / {:.4}",
        medians[0], medians[1], medians[2]
    );
    assert!(
        violations <= 1,
        "information trend violated {violations} times: {medians:?}"
    );
}
