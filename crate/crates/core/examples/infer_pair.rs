//! Classify cross-camera patch pairs with a two-stream model and show that
//! swapping the cameras leaves the probabilities unchanged. Pass a
//! checkpoint to use trained weights; otherwise a fresh model is built.
//!
//! cargo run --example infer_pair -- [checkpoint.siam]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use siamese_reid::backbone::BackboneKind;
use siamese_reid::pairgen::{pair_set, set_rng, TrackIndex};
use siamese_reid::patches::PatchStore;
use siamese_reid::siamese::{ModelKind, SiameseModel};
use siamese_reid::synth::{generate, SynthSpec};

fn main() -> siamese_reid::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => SiameseModel::load_expecting(path.as_ref(), ModelKind::TwoStream)?,
        None => SiameseModel::two_stream(BackboneKind::Lenet5Like, &mut ChaCha8Rng::seed_from_u64(0))?,
    };
    let corpus = generate(
        &SynthSpec {
            n_vehicles: 10,
            match_fraction: 1.0,
            ..SynthSpec::default()
        },
        &std::env::temp_dir().join("siamese-reid-infer-pair"),
    )?;
    let index = TrackIndex::new(corpus.tracks())?;
    let ids = corpus.vehicle_ids().into_iter().collect();
    let pairs = pair_set(&index, &ids, 1, 1, &mut set_rng(0, 0))?;

    let mut store = PatchStore::new(corpus.root());
    for pair in pairs.iter().step_by(4) {
        let sample = store.sample(pair, ModelKind::TwoStream)?;
        let d = model.predict(&sample)?;
        let swapped = model.predict(&sample.swapped())?;
        println!(
            "{} / {}  truth {:?}  p_match {:.4}  verdict {:?}  swap-identical {}",
            pair.vehicle1,
            pair.vehicle2,
            pair.label,
            d.probs[1],
            d.label,
            d.probs == swapped.probs
        );
    }
    Ok(())
}
