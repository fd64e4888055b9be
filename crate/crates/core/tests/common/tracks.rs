//! In-memory track fixtures and an exhaustive pair enumeration.

use std::collections::BTreeSet;
use std::path::PathBuf;

use siamese_reid::pairgen::{Camera, Occurrence, PatchPair, VehicleTrack};

pub fn track(camera: Camera, id: &str, len: usize) -> VehicleTrack {
    VehicleTrack {
        camera,
        vehicle_id: id.to_string(),
        plate_visible: true,
        occurrences: (0..len as u64)
            .map(|f| Occurrence {
                frame: 10 * f + 1,
                shape: PathBuf::from(format!("{}/{id}_f{f}_shape.png", camera.dir_name())),
                plate: PathBuf::from(format!("{}/{id}_f{f}_plate.png", camera.dir_name())),
            })
            .collect(),
    }
}

/// `(id, cam1 length, cam2 length)`; a zero length means no track.
pub fn corpus(spec: &[(String, usize, usize)]) -> Vec<VehicleTrack> {
    let mut out = Vec::new();
    for (id, l1, l2) in spec {
        if *l1 > 0 {
            out.push(track(Camera::One, id, *l1));
        }
        if *l2 > 0 {
            out.push(track(Camera::Two, id, *l2));
        }
    }
    out
}

pub type Key = (String, u64, String, u64);

pub fn key(p: &PatchPair) -> Key {
    (p.vehicle1.clone(), p.frame1, p.vehicle2.clone(), p.frame2)
}

/// Every cross-camera occurrence pair among the first `n` of each track.
pub fn enumerate(tracks: &[VehicleTrack], n: usize) -> (BTreeSet<Key>, BTreeSet<Key>) {
    let (mut pos, mut neg) = (BTreeSet::new(), BTreeSet::new());
    for a in tracks.iter().filter(|t| t.camera == Camera::One) {
        for b in tracks.iter().filter(|t| t.camera == Camera::Two) {
            for oa in a.occurrences.iter().take(n) {
                for ob in b.occurrences.iter().take(n) {
                    let k = (a.vehicle_id.clone(), oa.frame, b.vehicle_id.clone(), ob.frame);
                    if a.vehicle_id == b.vehicle_id {
                        pos.insert(k);
                    } else {
                        neg.insert(k);
                    }
                }
            }
        }
    }
    (pos, neg)
}
