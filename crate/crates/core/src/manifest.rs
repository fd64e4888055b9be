//! Corpus manifests: one line per vehicle track, referencing PNG patches
//! relative to the manifest's directory.
//!
//! ```text
//! # corpus-manifest v1
//! # cam1_vehicles=3 cam1_plates=2 cam2_vehicles=2 cam2_plates=2 matchings=1
//! camera,vehicle_id,plate_visible,frames,shape_paths,plate_paths
//! 1,v0001,1,10;11;12,cam1/a.png;cam1/b.png;cam1/c.png,cam1/d.png;cam1/e.png;cam1/f.png
//! ```
//!
//! The body is RFC 4180 CSV (fields containing commas or quotes are quoted,
//! quotes doubled). Lists inside a field are `;`-separated, so paths may not
//! contain `;`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::siamese::{PLATE_INPUT, SHAPE_INPUT};

const MAGIC: &str = "# corpus-manifest v1";
const COLUMNS: [&str; 6] = ["camera", "vehicle_id", "plate_visible", "frames", "shape_paths", "plate_paths"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Camera {
    One,
    Two,
}

impl Camera {
    pub const BOTH: [Camera; 2] = [Camera::One, Camera::Two];

    pub fn number(self) -> u8 {
        match self {
            Camera::One => 1,
            Camera::Two => 2,
        }
    }

    pub fn dir_name(self) -> &'static str {
        match self {
            Camera::One => "cam1",
            Camera::Two => "cam2",
        }
    }
}

impl FromStr for Camera {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(Camera::One),
            "2" => Ok(Camera::Two),
            other => Err(Error::Format(format!("camera must be 1 or 2, got {other:?}"))),
        }
    }
}

impl fmt::Display for Camera {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

/// One tracked detection: frame index plus the two patch files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occurrence {
    pub frame: u64,
    pub shape: PathBuf,
    pub plate: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VehicleTrack {
    pub camera: Camera,
    pub vehicle_id: String,
    pub plate_visible: bool,
    pub occurrences: Vec<Occurrence>,
}

impl VehicleTrack {
    pub fn check(&self) -> Result<()> {
        if self.occurrences.is_empty() {
            return Err(Error::Validation(vec![format!(
                "{} track {} has no occurrences",
                self.camera, self.vehicle_id
            )]));
        }
        if self.occurrences.windows(2).any(|w| w[0].frame >= w[1].frame) {
            return Err(Error::Validation(vec![format!(
                "{} track {} frames are not strictly increasing",
                self.camera, self.vehicle_id
            )]));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Summary {
    pub cam1_vehicles: usize,
    pub cam1_plates: usize,
    pub cam2_vehicles: usize,
    pub cam2_plates: usize,
    pub matchings: usize,
}

impl Summary {
    pub fn from_tracks(tracks: &[VehicleTrack]) -> Self {
        let mut s = Summary::default();
        let mut ids: [BTreeSet<&str>; 2] = Default::default();
        for t in tracks {
            let (vehicles, plates) = match t.camera {
                Camera::One => (&mut s.cam1_vehicles, &mut s.cam1_plates),
                Camera::Two => (&mut s.cam2_vehicles, &mut s.cam2_plates),
            };
            *vehicles += 1;
            *plates += t.plate_visible as usize;
            ids[(t.camera.number() - 1) as usize].insert(&t.vehicle_id);
        }
        s.matchings = ids[0].intersection(&ids[1]).count();
        s
    }

    fn to_header(self) -> String {
        format!(
            "# cam1_vehicles={} cam1_plates={} cam2_vehicles={} cam2_plates={} matchings={}",
            self.cam1_vehicles, self.cam1_plates, self.cam2_vehicles, self.cam2_plates, self.matchings
        )
    }

    fn from_header(line: &str) -> Result<Self> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::Format("missing summary line".into()))?;
        let mut fields = BTreeMap::new();
        for kv in body.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad summary field {kv:?}")))?;
            let v: usize = v
                .parse()
                .map_err(|_| Error::Format(format!("bad summary count {kv:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Format(format!("summary is missing {k}")))
        };
        Ok(Summary {
            cam1_vehicles: get("cam1_vehicles")?,
            cam1_plates: get("cam1_plates")?,
            cam2_vehicles: get("cam2_vehicles")?,
            cam2_plates: get("cam2_plates")?,
            matchings: get("matchings")?,
        })
    }

    fn mismatches(&self, actual: &Summary) -> Vec<String> {
        let pairs = [
            ("cam1_vehicles", self.cam1_vehicles, actual.cam1_vehicles),
            ("cam1_plates", self.cam1_plates, actual.cam1_plates),
            ("cam2_vehicles", self.cam2_vehicles, actual.cam2_vehicles),
            ("cam2_plates", self.cam2_plates, actual.cam2_plates),
            ("matchings", self.matchings, actual.matchings),
        ];
        pairs
            .iter()
            .filter(|(_, declared, got)| declared != got)
            .map(|(k, declared, got)| format!("count mismatch: {k} declared {declared}, recomputed {got}"))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusManifest {
    root: PathBuf,
    tracks: Vec<VehicleTrack>,
    summary: Summary,
}

impl CorpusManifest {
    /// Build from tracks; patch paths are resolved against `root`.
    /// Checks per-track invariants and `(camera, vehicle)` uniqueness.
    pub fn new(root: impl Into<PathBuf>, tracks: Vec<VehicleTrack>) -> Result<Self> {
        let mut problems = Vec::new();
        let mut seen = BTreeSet::new();
        for t in &tracks {
            if let Err(Error::Validation(mut p)) = t.check() {
                problems.append(&mut p);
            }
            if !seen.insert((t.camera, t.vehicle_id.as_str())) {
                problems.push(format!("duplicate track {} {}", t.camera, t.vehicle_id));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let summary = Summary::from_tracks(&tracks);
        Ok(CorpusManifest {
            root: root.into(),
            tracks,
            summary,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn tracks(&self) -> &[VehicleTrack] {
        &self.tracks
    }

    pub fn camera_tracks(&self, camera: Camera) -> impl Iterator<Item = &VehicleTrack> {
        self.tracks.iter().filter(move |t| t.camera == camera)
    }

    pub fn summary(&self) -> Summary {
        self.summary
    }

    /// Vehicle ids seen on either camera, sorted.
    pub fn vehicle_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self.tracks.iter().map(|t| t.vehicle_id.as_str()).collect();
        ids.into_iter().map(str::to_owned).collect()
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn to_text(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(COLUMNS).map_err(csv_err)?;
        for t in &self.tracks {
            let frames = join(t.occurrences.iter().map(|o| o.frame.to_string()));
            let shapes = join_paths(t.occurrences.iter().map(|o| &o.shape))?;
            let plates = join_paths(t.occurrences.iter().map(|o| &o.plate))?;
            let camera = t.camera.number().to_string();
            let visible = if t.plate_visible { "1" } else { "0" };
            w.write_record([camera.as_str(), &t.vehicle_id, visible, &frames, &shapes, &plates])
                .map_err(csv_err)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
            .expect("csv output of utf-8 input");
        Ok(format!("{MAGIC}\n{}\n{body}", self.summary.to_header()))
    }

    /// Parse manifest text. The declared summary must agree with the
    /// entries; patch files are not touched (see [`load_manifest`]).
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut lines = text.splitn(3, '\n');
        let magic = lines.next().unwrap_or_default().trim_end();
        if magic != MAGIC {
            return Err(Error::Format(format!("unrecognized manifest header {magic:?}")));
        }
        let declared = Summary::from_header(lines.next().unwrap_or_default().trim_end())?;
        let body = lines.next().unwrap_or_default();
        let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let header = reader.headers().map_err(csv_err)?.clone();
        if header.iter().ne(COLUMNS) {
            return Err(Error::Format(format!("unexpected manifest columns {header:?}")));
        }
        let mut tracks = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            tracks.push(parse_track(&rec).map_err(|e| Error::Format(format!("track line {}: {e}", i + 1)))?);
        }
        let manifest = CorpusManifest::new(root, tracks)?;
        let problems = declared.mismatches(&manifest.summary);
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).map_err(|e| Error::storage(path, e))
    }

    /// Check that every referenced patch exists and decodes to the fixed
    /// patch geometry. All offenders are reported together.
    pub fn verify_patches(&self) -> Result<()> {
        let mut problems = Vec::new();
        for t in &self.tracks {
            for o in &t.occurrences {
                for (rel, dims) in [(&o.shape, SHAPE_INPUT), (&o.plate, PLATE_INPUT)] {
                    let path = self.resolve(rel);
                    match image::image_dimensions(&path) {
                        Ok((w, h)) if (h as usize, w as usize) == (dims[1], dims[2]) => {}
                        Ok((w, h)) => problems.push(format!(
                            "{}: geometry {h}x{w}, expected {}x{}",
                            path.display(),
                            dims[1],
                            dims[2]
                        )),
                        Err(e) => problems.push(format!("{}: {e}", path.display())),
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Read a manifest, check its summary and verify every patch file.
pub fn load_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::storage(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = CorpusManifest::parse(&text, root)?;
    manifest.verify_patches()?;
    Ok(manifest)
}

fn parse_track(rec: &csv::StringRecord) -> Result<VehicleTrack> {
    if rec.len() != COLUMNS.len() {
        return Err(Error::Format(format!("expected {} fields, got {}", COLUMNS.len(), rec.len())));
    }
    let camera: Camera = rec[0].parse()?;
    let vehicle_id = rec[1].trim().to_owned();
    if vehicle_id.is_empty() {
        return Err(Error::Format("empty vehicle id".into()));
    }
    let plate_visible = match rec[2].trim() {
        "1" => true,
        "0" => false,
        other => return Err(Error::Format(format!("plate_visible must be 0 or 1, got {other:?}"))),
    };
    let frames = split(&rec[3])
        .map(|f| f.parse::<u64>().map_err(|_| Error::Format(format!("bad frame index {f:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let shapes: Vec<&str> = split(&rec[4]).collect();
    let plates: Vec<&str> = split(&rec[5]).collect();
    if shapes.len() != frames.len() || plates.len() != frames.len() {
        return Err(Error::Format(format!(
            "{} frames but {} shape and {} plate paths",
            frames.len(),
            shapes.len(),
            plates.len()
        )));
    }
    let occurrences = frames
        .into_iter()
        .zip(shapes.into_iter().zip(plates))
        .map(|(frame, (s, p))| Occurrence {
            frame,
            shape: s.into(),
            plate: p.into(),
        })
        .collect();
    Ok(VehicleTrack {
        camera,
        vehicle_id,
        plate_visible,
        occurrences,
    })
}

fn split(field: &str) -> impl Iterator<Item = &str> {
    field.split(';').map(str::trim).filter(|s| !s.is_empty())
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(";")
}

fn join_paths<'a>(paths: impl Iterator<Item = &'a PathBuf>) -> Result<String> {
    let mut out = Vec::new();
    for p in paths {
        let s = p
            .to_str()
            .ok_or_else(|| Error::Format(format!("non-UTF-8 path {}", p.display())))?;
        if s.contains(';') || s.is_empty() {
            return Err(Error::Format(format!("path {s:?} cannot be stored in a manifest")));
        }
        out.push(s.replace('\\', "/"));
    }
    Ok(out.join(";"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Per-camera vehicle and plate counts plus cross-camera matchings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusStats {
    pub summary: Summary,
}

pub fn stats(manifest: &CorpusManifest) -> CorpusStats {
    CorpusStats {
        summary: Summary::from_tracks(manifest.tracks()),
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.summary;
        writeln!(f, "{:<8}{:>10}{:>10}{:>12}", "camera", "#vehicles", "#plates", "#matchings")?;
        writeln!(f, "{:<8}{:>10}{:>10}{:>12}", "cam1", s.cam1_vehicles, s.cam1_plates, "")?;
        writeln!(f, "{:<8}{:>10}{:>10}{:>12}", "cam2", s.cam2_vehicles, s.cam2_plates, "")?;
        write!(
            f,
            "{:<8}{:>10}{:>10}{:>12}",
            "total",
            s.cam1_vehicles + s.cam2_vehicles,
            s.cam1_plates + s.cam2_plates,
            s.matchings
        )
    }
}
