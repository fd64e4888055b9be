#![allow(dead_code)]

pub mod fd;
pub mod oracle;
pub mod pipeline;
pub mod tables;
pub mod tracks;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use siamese_reid::tensor::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(lo..hi))
}
