//! How the pair sets grow with N (occurrences per track) and λ (negatives
//! per positive) on one synthetic corpus.
//!
//! cargo run --example pair_augmentation

use siamese_reid::pairgen::{build_sets, PairSetSpec, Split};
use siamese_reid::synth::{generate, SynthSpec};

fn main() -> siamese_reid::Result<()> {
    let out = std::env::temp_dir().join("siamese-reid-pair-augmentation");
    let spec = SynthSpec {
        n_vehicles: 120,
        occurrences_per_camera: 6,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec, &out)?;
    let split = Split::random(&corpus.vehicle_ids(), 0.5, 7)?;
    println!("split {} ({} train / {} test vehicles)\n", split.hash(), split.train.len(), split.test.len());

    for (n, lambda) in [(1, 1), (3, 5), (6, 10)] {
        let sets = build_sets(
            &PairSetSpec {
                n,
                lambda,
                split: split.clone(),
                seed: 7,
            },
            corpus.tracks(),
        )?;
        println!("{}\n", sets.report);
        let p = &sets.test[0];
        println!(
            "first test pair: {} f{} / {} f{} -> {:?}\n",
            p.vehicle1, p.frame1, p.vehicle2, p.frame2, p.label
        );
    }
    Ok(())
}
