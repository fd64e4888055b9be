//! Reference P/R/F/A rows and a large skeleton corpus.

use std::path::PathBuf;

use siamese_reid::eval::{Confusion, Percent};
use siamese_reid::manifest::{Camera, CorpusManifest, Occurrence, VehicleTrack};

/// `(row, N, λ, P, R, F, A)` in tenths of a percent.
pub const STREAM_ROWS: [(&str, usize, usize, u32, u32, u32, u32); 6] = [
    ("car", 3, 5, 858, 931, 893, 963),
    ("plate", 3, 5, 759, 818, 788, 926),
    ("two-stream", 3, 5, 927, 930, 929, 976),
    ("car", 10, 10, 924, 835, 878, 979),
    ("plate", 10, 10, 868, 595, 706, 955),
    ("two-stream", 10, 10, 947, 906, 926, 987),
];

pub const BACKBONE_ROWS: [(&str, usize, usize, u32, u32, u32, u32); 6] = [
    ("lenet5", 10, 10, 896, 852, 873, 978),
    ("matchnet", 10, 10, 945, 871, 907, 984),
    ("mc-cnn", 10, 10, 890, 901, 896, 981),
    ("googlenet", 10, 10, 888, 818, 851, 974),
    ("alexnet", 10, 10, 913, 865, 888, 980),
    ("small-vgg", 10, 10, 947, 906, 926, 987),
];

/// Smallest confusion (by tp) whose rounded precision and recall are the
/// given tenths; `tn` is chosen so accuracy also rounds to `a` when possible.
pub fn confusion_for(p: u32, r: u32, a: u32) -> Confusion {
    for tp in 1u64..100_000 {
        let partner = |target: u32| {
            let guess = (tp as f64 * (1000.0 / target as f64 - 1.0)).round() as u64;
            (guess.saturating_sub(2)..=guess + 2).find(|&x| Percent::ratio(tp, tp + x).tenths == target)
        };
        if let (Some(fp), Some(fn_)) = (partner(p), partner(r)) {
            let errors = fp + fn_;
            let total = ((errors as f64) / (1.0 - a as f64 / 1000.0)).round() as u64;
            let tn = (total.saturating_sub(tp + errors).saturating_sub(3)..total.saturating_sub(tp + errors) + 3)
                .find(|&tn| Percent::ratio(tp + tn, tp + errors + tn).tenths == a)
                .unwrap_or(total.saturating_sub(tp + errors));
            return Confusion { tp, fp, fn_, tn };
        }
    }
    unreachable!("no confusion realizes P={p} R={r}")
}

/// Single-occurrence tracks with fixed per-camera totals.
pub fn large_corpus_skeleton() -> CorpusManifest {
    let (matched, cam1, cam1_plates, cam2, cam2_plates) = (869, 1704, 1500, 1278, 1110);
    let mut tracks = Vec::new();
    let mut add = |camera: Camera, count: usize, visible: usize, prefix: &str| {
        for i in 0..count {
            let id = if i < matched { format!("m{i:04}") } else { format!("{prefix}{i:04}") };
            tracks.push(VehicleTrack {
                camera,
                vehicle_id: id.clone(),
                plate_visible: i < visible,
                occurrences: vec![Occurrence {
                    frame: 1,
                    shape: PathBuf::from(format!("{}/{id}_shape.png", camera.dir_name())),
                    plate: PathBuf::from(format!("{}/{id}_plate.png", camera.dir_name())),
                }],
            });
        }
    };
    add(Camera::One, cam1, cam1_plates, "a");
    add(Camera::Two, cam2, cam2_plates, "b");
    CorpusManifest::new("skeleton", tracks).expect("valid skeleton")
}
