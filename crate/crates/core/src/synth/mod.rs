//! Procedural stand-in corpus: rear-view vehicle silhouettes and two-line
//! plates rendered per identity, written as PNG patches plus a manifest.
//!
//! Identities sharing an archetype have identical silhouettes and paint, so
//! only their plates tell them apart; occluded plates remove that cue.

mod font;
mod render;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use render::Canvas;
use render::Rgb;

use crate::error::{Error, Result};
use crate::manifest::{Camera, CorpusManifest, Occurrence, VehicleTrack};
use crate::siamese::{PLATE_INPUT, SHAPE_INPUT};

pub const MANIFEST_FILE: &str = "manifest.txt";

const STREAM_STRUCTURE: u64 = 0;
const STREAM_ARCHETYPE: u64 = 1 << 48;
const STREAM_OCCLUSION: u64 = 2 << 48;
const STREAM_OCCURRENCE: u64 = 3 << 48;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_vehicles: usize,
    /// Fraction of identities seen by both cameras (rounded half away from zero).
    pub match_fraction: f64,
    pub occurrences_per_camera: usize,
    pub shape_classes: usize,
    pub plate_alphabet: String,
    pub plate_length: usize,
    pub noise_std: f64,
    /// Width of the per-occurrence brightness window centred on 1.
    pub illumination_range: f64,
    /// Probability that a track's plate is occluded.
    pub plate_occlusion: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_vehicles: 50,
            match_fraction: 0.6,
            occurrences_per_camera: 3,
            shape_classes: 10,
            plate_alphabet: "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789".into(),
            plate_length: 7,
            noise_std: 0.03,
            illumination_range: 0.3,
            plate_occlusion: 0.1,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Collision-free, noise-free variant: every identity gets its own
    /// archetype and every plate is readable.
    pub fn separable(n_vehicles: usize, seed: u64) -> Self {
        SynthSpec {
            n_vehicles,
            shape_classes: n_vehicles,
            noise_std: 0.0,
            illumination_range: 0.0,
            plate_occlusion: 0.0,
            seed,
            ..SynthSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_vehicles == 0 {
            problems.push("n_vehicles must be positive".to_string());
        }
        if self.occurrences_per_camera == 0 {
            problems.push("occurrences_per_camera must be positive".to_string());
        }
        if self.shape_classes == 0 {
            problems.push("shape_classes must be positive".to_string());
        }
        if !(0.0..=1.0).contains(&self.match_fraction) {
            problems.push(format!("match_fraction {} outside [0, 1]", self.match_fraction));
        }
        if !(0.0..=1.0).contains(&self.plate_occlusion) {
            problems.push(format!("plate_occlusion {} outside [0, 1]", self.plate_occlusion));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            problems.push(format!("noise_std must be finite and non-negative, got {}", self.noise_std));
        }
        if !(0.0..=1.0).contains(&self.illumination_range) {
            problems.push(format!("illumination_range {} outside [0, 1]", self.illumination_range));
        }
        if !(1..=8).contains(&self.plate_length) {
            problems.push(format!("plate_length {} outside 1..=8", self.plate_length));
        }
        let symbols = self.symbols();
        if symbols.is_empty() {
            problems.push("plate_alphabet is empty".to_string());
        }
        if let Some(bad) = symbols.iter().find(|c| font::glyph(**c).is_none()) {
            problems.push(format!("plate_alphabet symbol {bad:?} has no glyph"));
        }
        let capacity = (symbols.len() as f64).powi(self.plate_length as i32);
        if capacity < 2.0 * self.n_vehicles as f64 {
            problems.push(format!(
                "plate space of {capacity} strings is too small for {} unique plates",
                self.n_vehicles
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn matched_count(&self) -> usize {
        (self.match_fraction * self.n_vehicles as f64).round() as usize
    }

    fn symbols(&self) -> Vec<char> {
        let mut seen = HashSet::new();
        self.plate_alphabet
            .chars()
            .map(|c| c.to_ascii_uppercase())
            .filter(|c| !c.is_whitespace() && seen.insert(*c))
            .collect()
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackPlan {
    pub camera: Camera,
    pub plate_visible: bool,
    pub frames: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityPlan {
    pub index: usize,
    pub vehicle_id: String,
    pub archetype: usize,
    pub plate: String,
    pub tracks: Vec<TrackPlan>,
}

/// Everything about the corpus except pixels. Depends on the seed and the
/// structural knobs only, never on noise or illumination.
pub fn plan(spec: &SynthSpec) -> Result<Vec<IdentityPlan>> {
    spec.validate()?;
    let n = spec.n_vehicles;
    let mut rng = spec.rng(STREAM_STRUCTURE);

    let mut archetypes: Vec<usize> = (0..n).map(|i| i % spec.shape_classes).collect();
    archetypes.shuffle(&mut rng);

    let symbols = spec.symbols();
    let mut used = HashSet::new();
    let mut plates = Vec::with_capacity(n);
    while plates.len() < n {
        let p: String = (0..spec.plate_length)
            .map(|_| symbols[rng.random_range(0..symbols.len())])
            .collect();
        if used.insert(p.clone()) {
            plates.push(p);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut cameras: Vec<Vec<Camera>> = vec![Vec::new(); n];
    let matched = spec.matched_count();
    for (rank, &i) in order.iter().enumerate() {
        cameras[i] = if rank < matched {
            Camera::BOTH.to_vec()
        } else if (rank - matched) % 2 == 0 {
            vec![Camera::One]
        } else {
            vec![Camera::Two]
        };
    }

    let mut identities: Vec<IdentityPlan> = (0..n)
        .map(|i| IdentityPlan {
            index: i,
            vehicle_id: format!("v{:05}", i + 1),
            archetype: archetypes[i],
            plate: plates[i].clone(),
            tracks: Vec::new(),
        })
        .collect();

    // each camera sees vehicles in its own random order along one timeline
    for camera in Camera::BOTH {
        let mut seen: Vec<usize> = (0..n).filter(|&i| cameras[i].contains(&camera)).collect();
        seen.shuffle(&mut rng);
        let mut clock = 0u64;
        for i in seen {
            clock += rng.random_range(1..=25);
            let frames: Vec<u64> = (0..spec.occurrences_per_camera as u64).map(|k| clock + k).collect();
            clock += spec.occurrences_per_camera as u64;
            let plate_visible = !rng.random_bool(spec.plate_occlusion);
            identities[i].tracks.push(TrackPlan {
                camera,
                plate_visible,
                frames,
            });
        }
    }
    for id in &mut identities {
        id.tracks.sort_by_key(|t| t.camera);
    }
    Ok(identities)
}

#[derive(Clone, Debug)]
struct Archetype {
    body: Rgb,
    cabin: Rgb,
    glass: Rgb,
    light: Rgb,
    body_w: i64,
    body_h: i64,
    cabin_h: i64,
    cabin_top: f64,
    light_w: i64,
    light_h: i64,
    light_drop: i64,
    bumper_h: i64,
    wheel_w: i64,
}

impl Archetype {
    fn draw(spec: &SynthSpec, index: usize) -> Self {
        let mut rng = spec.rng(STREAM_ARCHETYPE + index as u64);
        let body = [rng.random_range(0.08..0.95), rng.random_range(0.08..0.95), rng.random_range(0.08..0.95)];
        let shade = rng.random_range(0.7..0.95);
        Archetype {
            body,
            cabin: body.map(|c| c * shade),
            glass: [rng.random_range(0.08..0.2), rng.random_range(0.1..0.25), rng.random_range(0.15..0.35)],
            light: [rng.random_range(0.75..1.0), rng.random_range(0.05..0.45), rng.random_range(0.0..0.2)],
            body_w: rng.random_range(25..=42) * 2,
            body_h: rng.random_range(20..=36),
            cabin_h: rng.random_range(12..=24),
            cabin_top: rng.random_range(0.5..0.85),
            light_w: rng.random_range(5..=14),
            light_h: rng.random_range(4..=10),
            light_drop: rng.random_range(2..=8),
            bumper_h: rng.random_range(3..=7),
            wheel_w: rng.random_range(8..=14),
        }
    }
}

const ROAD: Rgb = [0.42, 0.42, 0.44];
const PLATE_BG: Rgb = [0.93, 0.93, 0.88];
const INK: Rgb = [0.07, 0.07, 0.09];
const MUD: Rgb = [0.32, 0.26, 0.2];

/// Noise-free rear view of an archetype.
pub fn shape_canvas(spec: &SynthSpec, archetype: usize) -> Canvas {
    let a = Archetype::draw(spec, archetype);
    let (h, w) = (SHAPE_INPUT[1], SHAPE_INPUT[2]);
    let mut c = Canvas::new(h, w, ROAD);
    // lane marks
    c.fill_rect(0, h as i64, 4, 6, [0.85, 0.85, 0.8]);
    c.fill_rect(0, h as i64, w as i64 - 6, w as i64 - 4, [0.85, 0.85, 0.8]);

    let cx = w as f64 / 2.0;
    let bottom = 82;
    let body_top = bottom - a.body_h;
    let half = a.body_w / 2;
    let left = cx as i64 - half;
    let right = cx as i64 + half;
    // wheels peek out below the body
    c.fill_rect(bottom - 2, bottom + 7, left + 2, left + 2 + a.wheel_w, [0.05, 0.05, 0.05]);
    c.fill_rect(bottom - 2, bottom + 7, right - 2 - a.wheel_w, right - 2, [0.05, 0.05, 0.05]);
    c.fill_rect(body_top, bottom, left, right, a.body);
    c.fill_trapezoid(
        body_top - a.cabin_h,
        body_top,
        cx,
        half as f64 * a.cabin_top,
        half as f64 - 2.0,
        a.cabin,
    );
    c.fill_trapezoid(
        body_top - a.cabin_h + 3,
        body_top - 2,
        cx,
        half as f64 * a.cabin_top - 4.0,
        half as f64 - 7.0,
        a.glass,
    );
    let ly = body_top + a.light_drop;
    c.fill_rect(ly, ly + a.light_h, left + 2, left + 2 + a.light_w, a.light);
    c.fill_rect(ly, ly + a.light_h, right - 2 - a.light_w, right - 2, a.light);
    c.fill_rect(bottom - a.bumper_h, bottom, left, right, [0.15, 0.15, 0.16]);
    // blank plate holder; plate text lives only in the plate patch
    let py = bottom - a.bumper_h - 8;
    c.fill_rect(py, py + 6, cx as i64 - 9, cx as i64 + 9, PLATE_BG);
    c
}

/// Noise-free plate patch: the string split over two lines. `occlusion`
/// gives the covered row band, if any.
pub fn plate_canvas(plate: &str, occlusion: Option<(i64, i64)>) -> Canvas {
    let (h, w) = (PLATE_INPUT[1], PLATE_INPUT[2]);
    let mut c = Canvas::new(h, w, [0.3, 0.3, 0.32]);
    c.fill_rect(16, 80, 0, w as i64, PLATE_BG);
    c.fill_rect(16, 18, 0, w as i64, INK);
    c.fill_rect(78, 80, 0, w as i64, INK);
    let chars: Vec<char> = plate.chars().collect();
    let first = chars.len() / 2;
    let (sx, sy, gap) = (2, 3, 2);
    for (row, line) in [&chars[..first], &chars[first..]].into_iter().enumerate() {
        let text: String = line.iter().collect();
        let width = line.len() as i64 * (font::GLYPH_WIDTH as i64 * sx + gap) - gap;
        let left = (w as i64 - width) / 2;
        c.draw_text(&text, 22 + row as i64 * 28, left, sx, sy, gap, INK);
    }
    if let Some((y0, y1)) = occlusion {
        c.fill_rect(y0, y1, 0, w as i64, MUD);
    }
    c
}

/// Render all patches, write them under `out_dir/camN/` and write the
/// manifest to `out_dir/manifest.txt`.
pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<CorpusManifest> {
    let identities = plan(spec)?;
    for camera in Camera::BOTH {
        let dir = out_dir.join(camera.dir_name());
        std::fs::create_dir_all(&dir).map_err(|e| Error::storage(&dir, e))?;
    }
    let shapes: Vec<Canvas> = (0..spec.shape_classes.min(spec.n_vehicles))
        .map(|a| shape_canvas(spec, a))
        .collect();

    let mut tracks = Vec::new();
    for id in &identities {
        for t in &id.tracks {
            let cam = t.camera.number() as u64;
            let occlusion = (!t.plate_visible).then(|| {
                let mut rng = spec.rng(STREAM_OCCLUSION + ((id.index as u64) << 2 | cam));
                let top = rng.random_range(14..=26);
                (top, top + rng.random_range(44..=58))
            });
            let plate = plate_canvas(&id.plate, occlusion);
            let mut occurrences = Vec::with_capacity(t.frames.len());
            for (k, &frame) in t.frames.iter().enumerate() {
                let mut rng = spec.rng(STREAM_OCCURRENCE + ((id.index as u64) << 18 | cam << 16 | k as u64));
                let r = spec.illumination_range;
                let illumination = if r > 0.0 { rng.random_range(1.0 - r / 2.0..=1.0 + r / 2.0) } else { 1.0 };
                let stem = format!("{}/{}_f{:07}", t.camera.dir_name(), id.vehicle_id, frame);
                let shape_rel = PathBuf::from(format!("{stem}_shape.png"));
                let plate_rel = PathBuf::from(format!("{stem}_plate.png"));
                write_png(
                    &out_dir.join(&shape_rel),
                    &shapes[id.archetype],
                    illumination,
                    spec.noise_std,
                    &mut rng,
                )?;
                write_png(&out_dir.join(&plate_rel), &plate, illumination, spec.noise_std, &mut rng)?;
                occurrences.push(Occurrence {
                    frame,
                    shape: shape_rel,
                    plate: plate_rel,
                });
            }
            tracks.push(VehicleTrack {
                camera: t.camera,
                vehicle_id: id.vehicle_id.clone(),
                plate_visible: t.plate_visible,
                occurrences,
            });
        }
    }
    tracks.sort_by(|a, b| (a.camera, &a.vehicle_id).cmp(&(b.camera, &b.vehicle_id)));
    let manifest = CorpusManifest::new(out_dir, tracks)?;
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn write_png(path: &Path, canvas: &Canvas, illumination: f64, noise_std: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    let bytes = canvas.to_rgb8(illumination, noise_std, rng);
    image::save_buffer_with_format(
        path,
        &bytes,
        canvas.width() as u32,
        canvas.height() as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(io) => Error::storage(path, io),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}
