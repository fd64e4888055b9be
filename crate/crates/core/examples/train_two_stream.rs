//! Train a two-stream model on a synthetic corpus, keep the best validation
//! checkpoint and score it on held-out vehicles.
//!
//! cargo run --example train_two_stream -- [lenet5|small-vgg] [epochs]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use siamese_reid::backbone::BackboneKind;
use siamese_reid::eval::{evaluate, metrics};
use siamese_reid::pairgen::{pair_set, set_rng, Split, TrackIndex};
use siamese_reid::patches::PatchStore;
use siamese_reid::siamese::{ModelKind, SiameseModel};
use siamese_reid::synth::{generate, SynthSpec};
use siamese_reid::trainer::{train, TrainConfig};

fn main() -> siamese_reid::Result<()> {
    let mut args = std::env::args().skip(1);
    let backbone: BackboneKind = args.next().unwrap_or_else(|| "lenet5".into()).parse()?;
    let epochs = args.next().and_then(|v| v.parse().ok()).unwrap_or(4);
    let out = std::env::temp_dir().join("siamese-reid-train-two-stream");

    let corpus = generate(
        &SynthSpec {
            n_vehicles: 80,
            match_fraction: 0.8,
            shape_classes: 4,
            ..SynthSpec::default()
        },
        &out.join("corpus"),
    )?;
    let split = Split::random(&corpus.vehicle_ids(), 0.4, 0)?;
    let fit = split.carve(0.2, 0)?;
    let index = TrackIndex::new(corpus.tracks())?;
    let (n, lambda) = (3, 5);
    let train_pairs = pair_set(&index, &fit.train, n, 1, &mut set_rng(0, 1))?;
    let val_pairs = pair_set(&index, &fit.test, n, lambda, &mut set_rng(0, 3))?;
    let test_pairs = pair_set(&index, &split.test, n, lambda, &mut set_rng(0, 2))?;
    println!("pairs: {} train, {} val, {} test", train_pairs.len(), val_pairs.len(), test_pairs.len());

    let kind = ModelKind::TwoStream;
    let mut store = PatchStore::new(corpus.root());
    let (tr, va, te) = (
        store.samples(&train_pairs, kind)?,
        store.samples(&val_pairs, kind)?,
        store.samples(&test_pairs, kind)?,
    );
    let model = SiameseModel::build(kind, backbone, &mut ChaCha8Rng::seed_from_u64(0))?;
    println!("{} with {} parameters", model.display_name(), model.param_count());
    let config = TrainConfig {
        epochs,
        checkpoint_dir: Some(out.clone()),
        ..TrainConfig::default()
    };
    let outcome = train(model, &tr, &va, &config)?;
    print!("{}", outcome.log.to_csv(true));

    let m = metrics(&evaluate(&outcome.model, &te)?);
    println!(
        "best epoch {}: test P {} R {} F {} A {}",
        outcome.best_epoch, m.precision, m.recall, m.f_measure, m.accuracy
    );
    if let Some(path) = outcome.checkpoint {
        println!("checkpoint {}", path.display());
    }
    Ok(())
}
