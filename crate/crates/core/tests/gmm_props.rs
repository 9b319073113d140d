//! Mixture-fit guarantees on randomized 2-D datasets: per-iteration
//! log-likelihood monotonicity and exact weight normalization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use semc_ad::clustering::{gmm_fit, GmmParams};
use semc_ad::mat::Mat;

fn random_dataset(rng: &mut ChaCha8Rng) -> Mat<f64> {
    let m = rng.gen_range(50..=2000);
    let sources = rng.gen_range(1..=4);
    let centers: Vec<(f64, f64)> = (0..sources)
        .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
        .collect();
    let spreads: Vec<f64> = (0..sources).map(|_| rng.gen_range(0.3..2.0)).collect();
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut data = Mat::zeros(m, 2);
    for i in 0..m {
        let s = rng.gen_range(0..sources);
        data[(i, 0)] = centers[s].0 + spreads[s] * unit.sample(rng);
        data[(i, 1)] = centers[s].1 + spreads[s] * unit.sample(rng);
    }
    data
}

#[test]
fn em_is_monotone_and_weights_normalized_on_100_datasets() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a11_bad5);
    for round in 0..100 {
        let data = random_dataset(&mut rng);
        let k = rng.gen_range(2..=6);
        let params = GmmParams {
            k,
            seed: round,
            ..GmmParams::default()
        };
        let model = gmm_fit(&data, &params).unwrap();

        for w in model.loglik_trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-9,
                "round {round} (k={k}, m={}): log-likelihood fell {} -> {}",
                data.rows(),
                w[0],
                w[1]
            );
        }

        let weight_sum: f64 = model.weights.iter().sum();
        assert!(
            (weight_sum - 1.0).abs() <= 1e-12,
            "round {round}: weights sum to {weight_sum}"
        );
        assert!(model.weights.iter().all(|&w| w >= 0.0));
    }
}
