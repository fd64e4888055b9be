//! Wall time of one training step per pair for the two-stream model
//! (96×96 shape and 96×48 plate patches) against a one-stream model fed
//! 224×224 patches.
//!
//! cargo run --example epoch_cost -- [pairs]

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use siamese_reid::backbone::BackboneKind;
use siamese_reid::optim::SgdMomentum;
use siamese_reid::siamese::{
    train_step, MatchLabel, Modality, PairSample, SiameseModel, StreamConfig, PLATE_INPUT, SHAPE_INPUT,
};
use siamese_reid::tensor::Tensor;

fn patch(shape: [usize; 3], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| rng.random::<f64>())
}

fn seconds_per_pair(mut model: SiameseModel, batch: &[PairSample]) -> siamese_reid::Result<f64> {
    let mut opt = SgdMomentum::new(0.01, 0.9)?;
    let started = Instant::now();
    for pair in batch {
        train_step(&mut model, std::slice::from_ref(pair), &mut opt, &mut ChaCha8Rng::seed_from_u64(0))?;
    }
    Ok(started.elapsed().as_secs_f64() / batch.len() as f64)
}

fn main() -> siamese_reid::Result<()> {
    let pairs = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(4);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let wide = [3, 224, 224];

    let two: Vec<PairSample> = (0..pairs)
        .map(|_| {
            PairSample::new(
                patch(SHAPE_INPUT, &mut rng),
                patch(PLATE_INPUT, &mut rng),
                patch(SHAPE_INPUT, &mut rng),
                patch(PLATE_INPUT, &mut rng),
                MatchLabel::Matching,
            )
        })
        .collect();
    let one: Vec<PairSample> = (0..pairs)
        .map(|_| PairSample {
            shape: Some([patch(wide, &mut rng), patch(wide, &mut rng)]),
            plate: None,
            label: MatchLabel::Matching,
        })
        .collect();

    for backbone in BackboneKind::ALL {
        let t2 = seconds_per_pair(SiameseModel::two_stream(backbone, &mut rng)?, &two)?;
        let config = StreamConfig {
            backbone,
            input_shape: wide,
            modality: Modality::Shape,
        };
        let t1 = seconds_per_pair(SiameseModel::one_stream_with(config, &mut rng)?, &one)?;
        println!(
            "{backbone}: two-stream {:.3}s/pair, one-stream 224x224 {:.3}s/pair ({:.2}x)",
            t2,
            t1,
            t1 / t2
        );
    }
    Ok(())
}
