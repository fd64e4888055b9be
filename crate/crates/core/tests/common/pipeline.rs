//! End-to-end runs through the `reid` binary: synth, pairs, train, eval and
//! compare, each writing into one experiment directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use siamese_reid::cli::{TEST_PAIRS, TIMED_LOG, TRAIN_PAIRS, VAL_PAIRS};
use siamese_reid::eval::{parse_records, MetricsReport};
use siamese_reid::siamese::ModelKind;

pub const BIN: &str = env!("CARGO_BIN_EXE_reid");

/// Run the binary and return stdout; panics with stderr on failure.
pub fn reid<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> String {
    let out = Command::new(BIN).args(args).output().expect("spawn reid");
    if !out.status.success() {
        panic!(
            "reid {:?} exited with {}:\n{}",
            args.iter().map(|a| a.as_ref().to_string_lossy().into_owned()).collect::<Vec<_>>(),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        );
    }
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

/// Corpus and training knobs of one experiment.
#[derive(Clone, Debug)]
pub struct Recipe {
    pub vehicles: usize,
    pub match_fraction: f64,
    pub shape_classes: usize,
    pub noise_std: f64,
    pub illumination_range: f64,
    pub plate_occlusion: f64,
    pub n: usize,
    pub lambda: usize,
    pub test_fraction: f64,
    pub val_fraction: f64,
    pub backbone: &'static str,
    pub epochs: usize,
    pub patience: usize,
}

impl Recipe {
    /// Few shape archetypes shared by many vehicles, with noisy, dimmed and
    /// partly occluded plates.
    pub fn ambiguous() -> Self {
        Recipe {
            vehicles: 200,
            match_fraction: 0.8,
            shape_classes: 4,
            noise_std: 0.03,
            illumination_range: 0.1,
            plate_occlusion: 0.15,
            n: 3,
            lambda: 5,
            test_fraction: 0.4,
            val_fraction: 0.2,
            backbone: "lenet5",
            epochs: 6,
            patience: 6,
        }
    }

    /// One archetype per vehicle, no noise, no illumination change, no
    /// occlusion.
    pub fn separable() -> Self {
        Recipe {
            vehicles: 60,
            match_fraction: 0.6,
            shape_classes: 60,
            noise_std: 0.0,
            illumination_range: 0.0,
            plate_occlusion: 0.0,
            epochs: 10,
            patience: 2,
            ..Recipe::ambiguous()
        }
    }
}

/// Test-set reports of one experiment, keyed by model kind.
pub struct Outcome {
    pub dir: PathBuf,
    pub reports: BTreeMap<&'static str, MetricsReport>,
}

impl Outcome {
    pub fn f(&self, kind: ModelKind) -> f64 {
        self.reports[kind.short_name()].metrics.f_measure.value()
    }
}

pub fn corpus(recipe: &Recipe, seed: u64, dir: &Path) -> PathBuf {
    let out = dir.join("corpus");
    let s = |v: &dyn ToString| v.to_string();
    reid(&[
        "synth".into(),
        "--out".into(),
        out.display().to_string(),
        "--vehicles".into(),
        s(&recipe.vehicles),
        "--match-fraction".into(),
        s(&recipe.match_fraction),
        "--shape-classes".into(),
        s(&recipe.shape_classes),
        "--noise-std".into(),
        s(&recipe.noise_std),
        "--illumination-range".into(),
        s(&recipe.illumination_range),
        "--plate-occlusion".into(),
        s(&recipe.plate_occlusion),
        "--seed".into(),
        s(&seed),
    ]);
    out.join(siamese_reid::synth::MANIFEST_FILE)
}

pub fn pairs(recipe: &Recipe, seed: u64, manifest: &Path, dir: &Path) -> PathBuf {
    let out = dir.join("pairs");
    reid(&[
        "pairs".into(),
        "--manifest".into(),
        manifest.display().to_string(),
        "--n".into(),
        recipe.n.to_string(),
        "--lambda".into(),
        recipe.lambda.to_string(),
        "--test-fraction".into(),
        recipe.test_fraction.to_string(),
        "--val-fraction".into(),
        recipe.val_fraction.to_string(),
        "--seed".into(),
        seed.to_string(),
        "--out".into(),
        out.display().to_string(),
    ]);
    out
}

/// Full run for every model kind in `dir`.
pub fn run(recipe: &Recipe, seed: u64, dir: &Path) -> Outcome {
    let manifest = corpus(recipe, seed, dir);
    let pairs_dir = pairs(recipe, seed, &manifest, dir);
    let mut reports = BTreeMap::new();
    let mut report_files = Vec::new();
    for kind in ModelKind::ALL {
        let name = kind.short_name();
        let out = dir.join(name);
        reid(&[
            "train".into(),
            "--train".into(),
            pairs_dir.join(TRAIN_PAIRS).display().to_string(),
            "--val".into(),
            pairs_dir.join(VAL_PAIRS).display().to_string(),
            "--model".into(),
            name.to_string(),
            "--backbone".into(),
            recipe.backbone.to_string(),
            "--epochs".into(),
            recipe.epochs.to_string(),
            "--patience".into(),
            recipe.patience.to_string(),
            "--seed".into(),
            seed.to_string(),
            "--out".into(),
            out.display().to_string(),
        ]);
        let report = out.join("report.csv");
        reid(&[
            "eval".into(),
            "--checkpoint".into(),
            out.join(siamese_reid::trainer::BEST_CHECKPOINT).display().to_string(),
            "--pairs".into(),
            pairs_dir.join(TEST_PAIRS).display().to_string(),
            "--name".into(),
            name.to_string(),
            "--out".into(),
            report.display().to_string(),
        ]);
        let text = std::fs::read_to_string(&report).expect("report written");
        let parsed = parse_records(&text).expect("report parses").remove(0);
        reports.insert(name, parsed);
        report_files.push(report.display().to_string());
    }
    let mut args = vec!["compare".to_string()];
    args.extend(report_files);
    args.extend(["--out".to_string(), dir.join("comparison.csv").display().to_string()]);
    reid(&args);
    Outcome {
        dir: dir.to_path_buf(),
        reports,
    }
}

/// Every file below `dir` except wall-clock logs, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != TIMED_LOG) {
                let rel = path.strip_prefix(dir).expect("below root").to_path_buf();
                out.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}

/// Relative paths whose bytes differ, or that exist on one side only.
pub fn differences(a: &Path, b: &Path) -> Vec<PathBuf> {
    let (sa, sb) = (snapshot(a), snapshot(b));
    let mut keys: Vec<&PathBuf> = sa.keys().chain(sb.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter().filter(|k| sa.get(*k) != sb.get(*k)).cloned().collect()
}
