use rand_distr::{Distribution, Normal};

use crate::mode::TravelMode;
use crate::nn::Matrix;
use crate::seed;
use crate::trainer::Dataset;

/// Three Gaussian blobs in 15-d feature space, `per_class` rows each.
pub fn blobs(per_class: usize, seed: u64) -> Dataset {
    blobs_with_noise(per_class, 0.3, seed)
}

pub fn blobs_with_noise(per_class: usize, sd: f64, seed: u64) -> Dataset {
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for mode in TravelMode::ALL {
        let c = mode.index() as f64 * 3.0;
        for _ in 0..per_class {
            rows.extend((0..15).map(|j| if j % 3 == mode.index() { c + 1.0 } else { 0.0 } + noise.sample(&mut rng)));
            labels.push(mode);
        }
    }
    Dataset::new(Matrix::from_vec(labels.len(), 15, rows).unwrap(), labels).unwrap()
}
