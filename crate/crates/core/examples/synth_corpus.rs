//! Render a synthetic two-camera corpus, reload it with full verification
//! and print its per-camera counts.
//!
//! cargo run --example synth_corpus -- [out_dir] [vehicles] [seed]

use std::path::PathBuf;

use siamese_reid::manifest::{load_manifest, stats};
use siamese_reid::synth::{generate, SynthSpec, MANIFEST_FILE};

fn main() -> siamese_reid::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/examples/synth_corpus".into()));
    let vehicles = args.next().and_then(|v| v.parse().ok()).unwrap_or(50);
    let seed = args.next().and_then(|v| v.parse().ok()).unwrap_or(0);

    let spec = SynthSpec {
        n_vehicles: vehicles,
        seed,
        ..SynthSpec::default()
    };
    generate(&spec, &out)?;
    let manifest = load_manifest(&out.join(MANIFEST_FILE))?;
    println!("{}", stats(&manifest));
    let first = &manifest.tracks()[0];
    println!(
        "\n{} on {} seen in frames {:?}",
        first.vehicle_id,
        first.camera,
        first.occurrences.iter().map(|o| o.frame).collect::<Vec<_>>()
    );
    println!("wrote {}", out.display());
    Ok(())
}
