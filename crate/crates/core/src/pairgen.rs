//! Cross-camera pair construction. Every matched vehicle contributes the
//! full product of its first `N` occurrences on each camera; negatives are
//! drawn uniformly without replacement from cross-vehicle occurrence pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Component, Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use crate::manifest::{Camera, Occurrence, VehicleTrack};

use crate::error::{Error, Result};
use crate::siamese::MatchLabel;

/// Patch files of one occurrence, relative to the corpus root.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PatchRef {
    pub shape: PathBuf,
    pub plate: PathBuf,
}

impl From<&Occurrence> for PatchRef {
    fn from(o: &Occurrence) -> Self {
        PatchRef {
            shape: o.shape.clone(),
            plate: o.plate.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PatchPair {
    pub cam1: PatchRef,
    pub cam2: PatchRef,
    pub label: MatchLabel,
    pub vehicle1: String,
    pub frame1: u64,
    pub vehicle2: String,
    pub frame2: u64,
}

impl PatchPair {
    fn new(v1: &str, o1: &Occurrence, v2: &str, o2: &Occurrence) -> Self {
        PatchPair {
            cam1: o1.into(),
            cam2: o2.into(),
            label: if v1 == v2 { MatchLabel::Matching } else { MatchLabel::NonMatching },
            vehicle1: v1.to_owned(),
            frame1: o1.frame,
            vehicle2: v2.to_owned(),
            frame2: o2.frame,
        }
    }
}

/// The first occurrences of a track, flagged when fewer than requested.
#[derive(Clone, Copy, Debug)]
pub struct FirstN<'a> {
    pub occurrences: &'a [Occurrence],
    pub short: bool,
}

pub fn first_n(track: &VehicleTrack, n: usize) -> FirstN<'_> {
    let take = n.min(track.occurrences.len());
    FirstN {
        occurrences: &track.occurrences[..take],
        short: take < n,
    }
}

/// Tracks keyed by camera and vehicle id.
#[derive(Clone, Debug, Default)]
pub struct TrackIndex<'a> {
    cam1: BTreeMap<&'a str, &'a VehicleTrack>,
    cam2: BTreeMap<&'a str, &'a VehicleTrack>,
}

impl<'a> TrackIndex<'a> {
    pub fn new(tracks: &'a [VehicleTrack]) -> Result<Self> {
        let mut index = TrackIndex::default();
        for t in tracks {
            t.check()?;
            let map = index.camera_mut(t.camera);
            if map.insert(&t.vehicle_id, t).is_some() {
                return Err(Error::Validation(vec![format!("duplicate track {} {}", t.camera, t.vehicle_id)]));
            }
        }
        Ok(index)
    }

    fn camera_mut(&mut self, camera: Camera) -> &mut BTreeMap<&'a str, &'a VehicleTrack> {
        match camera {
            Camera::One => &mut self.cam1,
            Camera::Two => &mut self.cam2,
        }
    }

    pub fn get(&self, camera: Camera, vehicle: &str) -> Option<&'a VehicleTrack> {
        match camera {
            Camera::One => self.cam1.get(vehicle).copied(),
            Camera::Two => self.cam2.get(vehicle).copied(),
        }
    }

    /// Vehicle ids present on both cameras, sorted.
    pub fn match_keys(&self) -> Vec<String> {
        self.cam1
            .keys()
            .filter(|k| self.cam2.contains_key(*k))
            .map(|k| k.to_string())
            .collect()
    }

    /// All vehicle ids, sorted.
    pub fn vehicle_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self.cam1.keys().chain(self.cam2.keys()).copied().collect();
        ids.into_iter().map(str::to_owned).collect()
    }

    /// Restrict to the given vehicle ids.
    pub fn subset(&self, ids: &BTreeSet<String>) -> TrackIndex<'a> {
        let keep = |m: &BTreeMap<&'a str, &'a VehicleTrack>| {
            m.iter()
                .filter(|(k, _)| ids.contains(**k))
                .map(|(k, v)| (*k, *v))
                .collect()
        };
        TrackIndex {
            cam1: keep(&self.cam1),
            cam2: keep(&self.cam2),
        }
    }

    /// Tracks shorter than `n` occurrences, counted over both cameras.
    pub fn short_tracks(&self, n: usize) -> usize {
        self.cam1
            .values()
            .chain(self.cam2.values())
            .filter(|t| first_n(t, n).short)
            .count()
    }
}

pub fn positive_pairs(matches: &[String], index: &TrackIndex<'_>, n: usize) -> Result<Vec<PatchPair>> {
    let mut out = Vec::new();
    for key in matches {
        let lookup = |camera| {
            index
                .get(camera, key)
                .ok_or_else(|| Error::Consistency(format!("match key {key} has no track on {camera}")))
        };
        let (t1, t2) = (lookup(Camera::One)?, lookup(Camera::Two)?);
        for o1 in first_n(t1, n).occurrences {
            for o2 in first_n(t2, n).occurrences {
                out.push(PatchPair::new(key, o1, key, o2));
            }
        }
    }
    Ok(out)
}

/// Cross-vehicle occurrence pairs, indexed without materializing the pool.
/// Cam2 occurrences are grouped by vehicle so each cam1 occurrence excludes
/// one contiguous block.
struct NegativePool<'a> {
    cam1: Vec<(&'a str, &'a Occurrence)>,
    cam2: Vec<(&'a str, &'a Occurrence)>,
    /// Per cam1 occurrence: start and length of its own vehicle in `cam2`.
    excluded: Vec<(usize, usize)>,
    /// Prefix sums of valid partners per cam1 occurrence.
    cumulative: Vec<u64>,
}

impl<'a> NegativePool<'a> {
    fn new(index: &TrackIndex<'a>, n: usize) -> Self {
        let flatten = |m: &BTreeMap<&'a str, &'a VehicleTrack>| {
            m.iter()
                .flat_map(|(k, t)| first_n(t, n).occurrences.iter().map(move |o| (*k, o)))
                .collect::<Vec<_>>()
        };
        let cam1 = flatten(&index.cam1);
        let cam2 = flatten(&index.cam2);
        let mut blocks: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (i, (v, _)) in cam2.iter().enumerate() {
            blocks.entry(v).or_insert((i, 0)).1 += 1;
        }
        let excluded: Vec<(usize, usize)> = cam1
            .iter()
            .map(|(v, _)| blocks.get(v).copied().unwrap_or((0, 0)))
            .collect();
        let mut cumulative = Vec::with_capacity(cam1.len());
        let mut total = 0u64;
        for &(_, len) in &excluded {
            total += (cam2.len() - len) as u64;
            cumulative.push(total);
        }
        NegativePool {
            cam1,
            cam2,
            excluded,
            cumulative,
        }
    }

    fn size(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    fn get(&self, k: u64) -> PatchPair {
        let i = self.cumulative.partition_point(|&c| c <= k);
        let before = if i == 0 { 0 } else { self.cumulative[i - 1] };
        let mut j = (k - before) as usize;
        let (start, len) = self.excluded[i];
        if j >= start {
            j += len;
        }
        let (v1, o1) = self.cam1[i];
        let (v2, o2) = self.cam2[j];
        PatchPair::new(v1, o1, v2, o2)
    }
}

/// Number of distinct cross-vehicle pairs available.
pub fn negative_pool_size(index: &TrackIndex<'_>, n: usize) -> u64 {
    NegativePool::new(index, n).size()
}

pub fn negative_pairs(index: &TrackIndex<'_>, n: usize, count: usize, rng: &mut impl Rng) -> Result<Vec<PatchPair>> {
    let pool = NegativePool::new(index, n);
    let size = pool.size();
    if count as u64 > size {
        return Err(Error::Parameter(format!(
            "requested {count} negative pairs but the pool holds only {size}"
        )));
    }
    let size = usize::try_from(size).map_err(|_| Error::Parameter(format!("negative pool of {size} is too large")))?;
    Ok(rand::seq::index::sample(rng, size, count)
        .into_iter()
        .map(|k| pool.get(k as u64))
        .collect())
}

/// Disjoint assignment of vehicle ids to training and testing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

impl Split {
    pub fn new(train: BTreeSet<String>, test: BTreeSet<String>) -> Result<Self> {
        if let Some(v) = train.intersection(&test).next() {
            return Err(Error::Validation(vec![format!("vehicle {v} is in both train and test")]));
        }
        Ok(Split { train, test })
    }

    /// Seeded shuffle of the sorted ids; the first `round(fraction·n)` go
    /// to test.
    pub fn random(ids: &[String], test_fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&test_fraction) {
            return Err(Error::Parameter(format!("test fraction {test_fraction} outside [0, 1]")));
        }
        let mut ids: Vec<String> = ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = (test_fraction * ids.len() as f64).round() as usize;
        let test = ids[..cut].iter().cloned().collect();
        let train = ids[cut..].iter().cloned().collect();
        Ok(Split { train, test })
    }

    /// Split the training ids again, e.g. to hold out validation vehicles.
    pub fn carve(&self, fraction: f64, seed: u64) -> Result<Split> {
        let ids: Vec<String> = self.train.iter().cloned().collect();
        Split::random(&ids, fraction, seed)
    }

    /// Short hex digest identifying the assignment.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (tag, set) in [("train", &self.train), ("test", &self.test)] {
            h.update(tag.as_bytes());
            for id in set {
                h.update(b"\n");
                h.update(id.as_bytes());
            }
            h.update(b"\0");
        }
        hex::encode(&h.finalize()[..8])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairSetSpec {
    pub n: usize,
    pub lambda: usize,
    pub split: Split,
    pub seed: u64,
}

impl PairSetSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n == 0 {
            problems.push("N must be at least 1".to_string());
        }
        if self.lambda == 0 {
            problems.push("lambda must be at least 1".to_string());
        }
        if let Some(v) = self.split.train.intersection(&self.split.test).next() {
            problems.push(format!("vehicle {v} is in both train and test"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Positive and negative counts of one pair set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SetCounts {
    pub positives: usize,
    pub negatives: usize,
}

/// Pair counts in the layout of a parameter-settings table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SettingsReport {
    pub n: usize,
    pub lambda: usize,
    pub train: SetCounts,
    pub test: SetCounts,
    pub short_tracks: usize,
}

impl fmt::Display for SettingsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>4}{:>4}  {:^21}  {:^21}", "", "", "training set", "testing set")?;
        writeln!(f, "{:>4}{:>4}  {:>10} {:>10}  {:>10} {:>10}", "N", "λ", "positives", "negatives", "positives", "negatives")?;
        write!(
            f,
            "{:>4}{:>4}  {:>10} {:>10}  {:>10} {:>10}",
            self.n, self.lambda, self.train.positives, self.train.negatives, self.test.positives, self.test.negatives
        )?;
        if self.short_tracks > 0 {
            write!(f, "\n{} track(s) shorter than N", self.short_tracks)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PairSets {
    pub train: Vec<PatchPair>,
    pub test: Vec<PatchPair>,
    pub report: SettingsReport,
}

/// Positives of every matched vehicle in `ids` plus `ratio ×` as many
/// negatives drawn among the same vehicles.
pub fn pair_set(index: &TrackIndex<'_>, ids: &BTreeSet<String>, n: usize, ratio: usize, rng: &mut impl Rng) -> Result<Vec<PatchPair>> {
    let sub = index.subset(ids);
    let mut pairs = positive_pairs(&sub.match_keys(), &sub, n)?;
    let negatives = negative_pairs(&sub, n, pairs.len() * ratio, rng)?;
    pairs.extend(negatives);
    Ok(pairs)
}

/// Balanced training pairs and `λ`-weighted testing pairs over disjoint
/// vehicle sets.
pub fn build_sets(spec: &PairSetSpec, tracks: &[VehicleTrack]) -> Result<PairSets> {
    spec.validate()?;
    let index = TrackIndex::new(tracks)?;
    let missing: Vec<String> = index
        .vehicle_ids()
        .into_iter()
        .filter(|v| !spec.split.train.contains(v) && !spec.split.test.contains(v))
        .map(|v| format!("vehicle {v} is not assigned by the split"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(missing));
    }
    let train = pair_set(&index, &spec.split.train, spec.n, 1, &mut set_rng(spec.seed, 1))?;
    let test = pair_set(&index, &spec.split.test, spec.n, spec.lambda, &mut set_rng(spec.seed, 2))?;
    let counts = |pairs: &[PatchPair]| {
        let positives = pairs.iter().filter(|p| p.label == MatchLabel::Matching).count();
        SetCounts {
            positives,
            negatives: pairs.len() - positives,
        }
    };
    let report = SettingsReport {
        n: spec.n,
        lambda: spec.lambda,
        train: counts(&train),
        test: counts(&test),
        short_tracks: index.short_tracks(spec.n),
    };
    Ok(PairSets { train, test, report })
}

/// RNG for one pair set: the seed with a per-set stream.
pub fn set_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const PAIR_MAGIC: &str = "# pair-manifest v1";
const PAIR_COLUMNS: [&str; 9] = [
    "label",
    "cam1_vehicle",
    "cam1_frame",
    "cam2_vehicle",
    "cam2_frame",
    "shape1_path",
    "plate1_path",
    "shape2_path",
    "plate2_path",
];

/// A pair list on disk. Layout:
///
/// ```text
/// # pair-manifest v1
/// # set=test n=3 lambda=5 seed=7 split=0123456789abcdef
/// # corpus=../corpus
/// label,cam1_vehicle,cam1_frame,cam2_vehicle,cam2_frame,shape1_path,plate1_path,shape2_path,plate2_path
/// 1,v00001,37,v00001,112,cam1/...,cam1/...,cam2/...,cam2/...
/// ```
///
/// Records are RFC 4180 CSV. `corpus` is relative to the manifest's own
/// directory when possible; patch paths are relative to the corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct PairManifest {
    pub set: String,
    pub n: usize,
    pub lambda: usize,
    pub seed: u64,
    pub split_hash: String,
    pub corpus_root: PathBuf,
    pub pairs: Vec<PatchPair>,
}

impl PairManifest {
    /// Text form; `corpus_root` is written relative to `base_dir`.
    pub fn to_text(&self, base_dir: &Path) -> Result<String> {
        let corpus = relative_to(&self.corpus_root, base_dir);
        let corpus = corpus
            .to_str()
            .ok_or_else(|| Error::Format("corpus path is not UTF-8".into()))?
            .replace('\\', "/");
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let fmt_err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(PAIR_COLUMNS).map_err(fmt_err)?;
        for p in &self.pairs {
            let path = |p: &Path| {
                p.to_str()
                    .map(|s| s.replace('\\', "/"))
                    .ok_or_else(|| Error::Format(format!("non-UTF-8 path {}", p.display())))
            };
            w.write_record([
                (p.label as u8).to_string(),
                p.vehicle1.clone(),
                p.frame1.to_string(),
                p.vehicle2.clone(),
                p.frame2.to_string(),
                path(&p.cam1.shape)?,
                path(&p.cam1.plate)?,
                path(&p.cam2.shape)?,
                path(&p.cam2.plate)?,
            ])
            .map_err(fmt_err)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
            .expect("csv output of utf-8 input");
        Ok(format!(
            "{PAIR_MAGIC}\n# set={} n={} lambda={} seed={} split={}\n# corpus={corpus}\n{body}",
            self.set, self.n, self.lambda, self.seed, self.split_hash
        ))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new("."));
        std::fs::write(path, self.to_text(base)?).map_err(|e| Error::storage(path, e))
    }

    /// Parse text written by [`PairManifest::to_text`]; the corpus path is
    /// resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut lines = text.splitn(4, '\n');
        if lines.next().map(str::trim_end) != Some(PAIR_MAGIC) {
            return Err(Error::Format("not a pair manifest".into()));
        }
        let spec_line = lines.next().unwrap_or_default();
        let fields: BTreeMap<&str, &str> = spec_line
            .trim_start_matches('#')
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let field = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Format(format!("pair manifest header lacks {k}")))
        };
        let number = |k: &str| -> Result<u64> {
            field(k)?
                .parse()
                .map_err(|_| Error::Format(format!("pair manifest header has a bad {k}")))
        };
        let corpus = lines
            .next()
            .and_then(|l| l.trim_end().strip_prefix("# corpus="))
            .ok_or_else(|| Error::Format("pair manifest lacks a corpus line".into()))?;
        let mut reader = csv::ReaderBuilder::new().from_reader(lines.next().unwrap_or_default().as_bytes());
        let fmt_err = |e: csv::Error| Error::Format(e.to_string());
        if reader.headers().map_err(fmt_err)?.iter().ne(PAIR_COLUMNS) {
            return Err(Error::Format("unexpected pair manifest columns".into()));
        }
        let mut pairs = Vec::new();
        for rec in reader.records() {
            let r = rec.map_err(fmt_err)?;
            let frame = |s: &str| s.parse::<u64>().map_err(|_| Error::Format(format!("bad frame {s:?}")));
            let label = match &r[0] {
                "1" => MatchLabel::Matching,
                "0" => MatchLabel::NonMatching,
                other => return Err(Error::Format(format!("bad label {other:?}"))),
            };
            let pair = PatchPair {
                cam1: PatchRef {
                    shape: r[5].into(),
                    plate: r[6].into(),
                },
                cam2: PatchRef {
                    shape: r[7].into(),
                    plate: r[8].into(),
                },
                label,
                vehicle1: r[1].to_owned(),
                frame1: frame(&r[2])?,
                vehicle2: r[3].to_owned(),
                frame2: frame(&r[4])?,
            };
            if (pair.vehicle1 == pair.vehicle2) != (label == MatchLabel::Matching) {
                return Err(Error::Format(format!(
                    "label {} contradicts vehicles {} / {}",
                    &r[0], pair.vehicle1, pair.vehicle2
                )));
            }
            pairs.push(pair);
        }
        Ok(PairManifest {
            set: field("set")?.to_owned(),
            n: number("n")? as usize,
            lambda: number("lambda")? as usize,
            seed: number("seed")?,
            split_hash: field("split")?.to_owned(),
            corpus_root: base_dir.join(corpus),
            pairs,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::storage(path, e))?;
        PairManifest::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Vehicle ids touched by any pair.
    pub fn vehicle_ids(&self) -> BTreeSet<String> {
        self.pairs
            .iter()
            .flat_map(|p| [p.vehicle1.clone(), p.vehicle2.clone()])
            .collect()
    }
}

/// `target` expressed relative to `base` when both are absolute or both
/// relative; otherwise `target` unchanged.
fn relative_to(target: &Path, base: &Path) -> PathBuf {
    let canon = |p: &Path| std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let (t, b) = (canon(target), canon(base));
    if t.is_absolute() != b.is_absolute() {
        return target.to_path_buf();
    }
    let tc: Vec<Component> = t.components().collect();
    let bc: Vec<Component> = b.components().collect();
    let common = tc.iter().zip(&bc).take_while(|(x, y)| x == y).count();
    let mut out = PathBuf::new();
    for _ in common..bc.len() {
        out.push("..");
    }
    for c in &tc[common..] {
        out.push(c);
    }
    if out.as_os_str().is_empty() {
        out.push(".");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(camera: Camera, id: &str, frames: &[u64]) -> VehicleTrack {
        VehicleTrack {
            camera,
            vehicle_id: id.into(),
            plate_visible: true,
            occurrences: frames
                .iter()
                .map(|f| Occurrence {
                    frame: *f,
                    shape: format!("{camera}/{id}_{f}_s.png").into(),
                    plate: format!("{camera}/{id}_{f}_p.png").into(),
                })
                .collect(),
        }
    }

    #[test]
    fn first_n_truncates_and_flags() {
        let t = track(Camera::One, "a", &(0..10).collect::<Vec<_>>());
        let f = first_n(&t, 3);
        assert_eq!(f.occurrences.iter().map(|o| o.frame).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(!f.short);
        let t = track(Camera::One, "a", &[4, 9]);
        let f = first_n(&t, 3);
        assert_eq!(f.occurrences.len(), 2);
        assert!(f.short);
    }

    #[test]
    fn positives_are_cartesian_products() {
        let tracks = vec![
            track(Camera::One, "a", &[1, 2, 3, 4]),
            track(Camera::Two, "a", &[5, 6, 7]),
            track(Camera::One, "b", &[1, 2]),
            track(Camera::Two, "b", &[8, 9, 10]),
        ];
        let index = TrackIndex::new(&tracks).unwrap();
        let pairs = positive_pairs(&index.match_keys(), &index, 3).unwrap();
        assert_eq!(pairs.len(), 9 + 6);
        assert!(pairs.iter().all(|p| p.label == MatchLabel::Matching && p.vehicle1 == p.vehicle2));
        assert_eq!(index.short_tracks(3), 1);
    }

    #[test]
    fn missing_match_is_a_consistency_error() {
        let tracks = vec![track(Camera::One, "a", &[1])];
        let index = TrackIndex::new(&tracks).unwrap();
        assert!(matches!(
            positive_pairs(&["a".to_string()], &index, 1),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn two_vehicle_pool_has_two_pairs() {
        let tracks = vec![
            track(Camera::One, "a", &[1]),
            track(Camera::One, "b", &[2]),
            track(Camera::Two, "a", &[3]),
            track(Camera::Two, "b", &[4]),
        ];
        let index = TrackIndex::new(&tracks).unwrap();
        assert_eq!(negative_pool_size(&index, 1), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let all = negative_pairs(&index, 1, 2, &mut rng).unwrap();
        let mut got: Vec<(String, String)> = all.iter().map(|p| (p.vehicle1.clone(), p.vehicle2.clone())).collect();
        got.sort();
        assert_eq!(got, vec![("a".into(), "b".into()), ("b".into(), "a".into())]);
        match negative_pairs(&index, 1, 3, &mut rng) {
            Err(Error::Parameter(m)) => assert!(m.contains("only 2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_split_is_disjoint_and_seeded() {
        let ids: Vec<String> = (0..20).map(|i| format!("v{i}")).collect();
        let a = Split::random(&ids, 0.25, 3).unwrap();
        assert_eq!(a.test.len(), 5);
        assert!(a.train.is_disjoint(&a.test));
        assert_eq!(a, Split::random(&ids, 0.25, 3).unwrap());
        assert_ne!(a.hash(), Split::random(&ids, 0.25, 4).unwrap().hash());
        let val = a.carve(0.2, 1).unwrap();
        assert_eq!(val.test.len(), 3);
        assert!(val.test.is_subset(&a.train));
    }

    #[test]
    fn relative_paths() {
        assert_eq!(relative_to(Path::new("/a/b/c"), Path::new("/a/d")), PathBuf::from("../b/c"));
        assert_eq!(relative_to(Path::new("/a"), Path::new("/a")), PathBuf::from("."));
    }

    #[test]
    fn settings_report_layout() {
        let r = SettingsReport {
            n: 3,
            lambda: 5,
            train: SetCounts {
                positives: 3867,
                negatives: 3867,
            },
            test: SetCounts {
                positives: 3903,
                negatives: 19515,
            },
            short_tracks: 0,
        };
        let text = r.to_string();
        assert!(text.lines().last().unwrap().split_whitespace().eq(["3", "5", "3867", "3867", "3903", "19515"]));
    }
}
