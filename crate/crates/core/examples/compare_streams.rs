//! Shape-only, plate-only and two-stream models trained with the same budget
//! on a corpus where many vehicles share a body shape and plates are noisy.
//! Takes a few minutes per seed.
//!
//! cargo run --example compare_streams -- [seed]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use siamese_reid::backbone::BackboneKind;
use siamese_reid::eval::{compare, evaluate, MetricsReport};
use siamese_reid::manifest::stats;
use siamese_reid::pairgen::{pair_set, set_rng, Split, TrackIndex};
use siamese_reid::patches::PatchStore;
use siamese_reid::siamese::{ModelKind, SiameseModel};
use siamese_reid::synth::{generate, SynthSpec};
use siamese_reid::trainer::{train, TrainConfig};

fn main() -> siamese_reid::Result<()> {
    let seed = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(0);
    let spec = SynthSpec {
        n_vehicles: 200,
        match_fraction: 0.8,
        shape_classes: 4,
        noise_std: 0.03,
        illumination_range: 0.1,
        plate_occlusion: 0.15,
        seed,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec, &std::env::temp_dir().join(format!("siamese-reid-compare-{seed}")))?;
    println!("{}\n", stats(&corpus));

    let split = Split::random(&corpus.vehicle_ids(), 0.4, seed)?;
    let fit = split.carve(0.2, seed)?;
    let index = TrackIndex::new(corpus.tracks())?;
    let (n, lambda) = (3, 5);
    let train_pairs = pair_set(&index, &fit.train, n, 1, &mut set_rng(seed, 1))?;
    let val_pairs = pair_set(&index, &fit.test, n, lambda, &mut set_rng(seed, 3))?;
    let test_pairs = pair_set(&index, &split.test, n, lambda, &mut set_rng(seed, 2))?;

    let mut store = PatchStore::new(corpus.root());
    let config = TrainConfig {
        epochs: 6,
        patience: 6,
        seed,
        ..TrainConfig::default()
    };
    let mut reports = Vec::new();
    for kind in [ModelKind::OneStreamShape, ModelKind::OneStreamPlate, ModelKind::TwoStream] {
        let model = SiameseModel::build(kind, BackboneKind::Lenet5Like, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let outcome = train(model, &store.samples(&train_pairs, kind)?, &store.samples(&val_pairs, kind)?, &config)?;
        let confusion = evaluate(&outcome.model, &store.samples(&test_pairs, kind)?)?;
        eprintln!("{kind}: best epoch {}", outcome.best_epoch);
        reports.push(MetricsReport::new(kind.short_name(), n, lambda, confusion));
    }
    print!("{}", compare(&reports)?.text);
    Ok(())
}
