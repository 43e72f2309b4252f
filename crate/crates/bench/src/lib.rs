//! Shared fixtures for the benchmark suite: one regression dataset at the
//! default experiment scale and one classification instance sized for the
//! iterative solver.

use causalfair_core::data::{Dataset, Task};
use causalfair_core::synthetic::{generate, preset, Case, SyntheticConfig};

/// Default-preset regression dataset (N = 2000, d = 14).
pub fn regression_fixture() -> Dataset {
    let mut config = preset(Case::Default);
    config.seed = 9;
    generate(&config).unwrap().0
}

/// Median-thresholded classification instance (N = 500, d = 10).
pub fn classification_fixture() -> Dataset {
    let config = SyntheticConfig {
        n: 500,
        d: 10,
        d_e: 3,
        r: 0.5,
        mu_e_plus: vec![1.0; 3],
        mu_e_minus: vec![0.0; 3],
        mu_n_plus: vec![0.5; 7],
        mu_n_minus: vec![0.0; 7],
        w_e: vec![1.0; 3],
        w_n: vec![1.0; 7],
        w_s: 1.0,
        noise_sd: 1.0,
        seed: 9,
    };
    let data = generate(&config).unwrap().0;
    let mut sorted: Vec<f64> = data.y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let y01 = data.y.mapv(|v| if v > median { 1.0 } else { 0.0 });
    Dataset::new(
        data.x.clone(),
        data.s.clone(),
        y01,
        data.explanatory_idx.clone(),
        Task::Classification,
        data.feature_names.clone(),
        data.has_intercept,
    )
    .unwrap()
}
