//! `reid` command line: corpus synthesis, pair construction, training,
//! evaluation and single-pair inference.
//!
//! Every subcommand also reads `--config FILE`, a list of `key = value`
//! lines whose keys are long flag names. Flags given on the command line
//! win over the file.
//!
//! Exit codes: 0 success, 1 usage, 2 validation or format, 3 runtime
//! (I/O, divergence).

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::backbone::BackboneKind;
use crate::error::Error;
use crate::eval::{compare, evaluate, parse_records, report_records, MetricsReport};
use crate::manifest::{load_manifest, stats, VehicleTrack};
use crate::pairgen::{build_sets, pair_set, set_rng, PairManifest, PairSetSpec, PatchPair, Split, TrackIndex};
use crate::patches::{read_patch, PatchStore};
use crate::siamese::{ModelKind, PairSample, SiameseModel, PLATE_INPUT, SHAPE_INPUT};
use crate::synth::{generate, SynthSpec, MANIFEST_FILE};
use crate::trainer::{train, TrainConfig, BEST_CHECKPOINT};

pub const TRAIN_PAIRS: &str = "train.csv";
pub const VAL_PAIRS: &str = "val.csv";
pub const TEST_PAIRS: &str = "test.csv";
pub const TRAIN_LOG: &str = "train_log.csv";
/// Same records as [`TRAIN_LOG`] plus wall-clock seconds per epoch.
pub const TIMED_LOG: &str = "train_log_timed.csv";

#[derive(Parser, Debug)]
#[command(name = "reid", version, about = "Siamese vehicle re-identification pipeline", args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic two-camera corpus.
    Synth(SynthArgs),
    /// Build train, validation and test pair manifests from a corpus.
    Pairs(PairsArgs),
    /// Train a model on pair manifests.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a pair manifest.
    Eval(EvalArgs),
    /// Tabulate report files side by side.
    Compare(CompareArgs),
    /// Classify a single pair of patches.
    Infer(InferArgs),
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// `key = value` file with defaults for the long flags.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SynthSpec::default().n_vehicles)]
    vehicles: usize,
    #[arg(long, default_value_t = SynthSpec::default().match_fraction)]
    match_fraction: f64,
    #[arg(long, default_value_t = SynthSpec::default().occurrences_per_camera)]
    occurrences: usize,
    #[arg(long, default_value_t = SynthSpec::default().shape_classes)]
    shape_classes: usize,
    #[arg(long, default_value_t = SynthSpec::default().plate_alphabet)]
    plate_alphabet: String,
    #[arg(long, default_value_t = SynthSpec::default().plate_length)]
    plate_length: usize,
    #[arg(long, default_value_t = SynthSpec::default().noise_std)]
    noise_std: f64,
    #[arg(long, default_value_t = SynthSpec::default().illumination_range)]
    illumination_range: f64,
    #[arg(long, default_value_t = SynthSpec::default().plate_occlusion)]
    plate_occlusion: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args, Debug)]
struct PairsArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Occurrences per track used for pairing.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Negatives per positive in the validation and test sets.
    #[arg(long, default_value_t = 5)]
    lambda: usize,
    #[arg(long, default_value_t = 0.5)]
    test_fraction: f64,
    /// Share of the training vehicles held out for validation.
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    /// car, plate or two-stream
    #[arg(long, value_parser = parse_kind)]
    model: ModelKind,
    /// small-vgg or lenet5
    #[arg(long, value_parser = parse_backbone, default_value = "small-vgg")]
    backbone: BackboneKind,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().momentum)]
    momentum: f64,
    #[arg(long, default_value_t = TrainConfig::default().lr_decay_factor)]
    lr_decay: f64,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving the best checkpoint and the training log.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    /// Row label; defaults to the model's kind and backbone.
    #[arg(long)]
    name: Option<String>,
    /// Report file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    shape1: Option<PathBuf>,
    #[arg(long)]
    plate1: Option<PathBuf>,
    #[arg(long)]
    shape2: Option<PathBuf>,
    #[arg(long)]
    plate2: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_backbone(s: &str) -> Result<BackboneKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<(), Failure>;

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Storage { .. } | Error::Diverged { .. } => 3,
        _ => 2,
    }
}

/// Run the command line and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match with_config(args) {
        Ok(a) => a,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            return 1;
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    eprintln!("resolved config: {:#?}", cli.command);
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Pairs(a) => cmd_pairs(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Infer(a) => cmd_infer(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            1
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Splice `key = value` lines from `--config` in front of the explicit
/// flags, right after the subcommand name.
fn with_config(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = Some(PathBuf::from(
                args.get(i + 1)
                    .ok_or_else(|| Failure::Usage("--config needs a file".into()))?,
            ));
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::storage(&path, e))?;
    let mut extra = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Failure::Lib(Error::Format(format!(
                "{} line {}: expected `key = value`",
                path.display(),
                no + 1
            )))
        })?;
        let key = k.trim().replace('_', "-");
        if key == "config" {
            continue;
        }
        extra.push(OsString::from(format!("--{key}")));
        extra.push(OsString::from(v.trim()));
    }
    let sub = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(args.len());
    let mut out = args[..sub].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[sub..]);
    Ok(out)
}

fn file_digest(path: &Path) -> Result<String, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::storage(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn cmd_synth(a: SynthArgs) -> Outcome {
    let spec = SynthSpec {
        n_vehicles: a.vehicles,
        match_fraction: a.match_fraction,
        occurrences_per_camera: a.occurrences,
        shape_classes: a.shape_classes,
        plate_alphabet: a.plate_alphabet,
        plate_length: a.plate_length,
        noise_std: a.noise_std,
        illumination_range: a.illumination_range,
        plate_occlusion: a.plate_occlusion,
        seed: a.seed,
    };
    let manifest = generate(&spec, &a.out)?;
    let path = a.out.join(MANIFEST_FILE);
    println!("{}", stats(&manifest));
    println!("manifest {} sha256 {}", path.display(), file_digest(&path)?);
    Ok(())
}

fn cmd_pairs(a: PairsArgs) -> Outcome {
    let manifest = load_manifest(&a.manifest)?;
    let split = Split::random(&manifest.vehicle_ids(), a.test_fraction, a.seed)?;
    let held = split.carve(a.val_fraction, a.seed)?;
    let (fit_ids, val_ids) = (held.train, held.test);
    let fit_split = Split::new(fit_ids, split.test.clone())?;
    let val_split = Split::new(fit_split.train.clone(), val_ids.clone())?;

    let keep = |ids: &BTreeSet<String>| -> Vec<VehicleTrack> {
        manifest
            .tracks()
            .iter()
            .filter(|t| ids.contains(&t.vehicle_id))
            .cloned()
            .collect()
    };
    let assigned: BTreeSet<String> = fit_split.train.union(&fit_split.test).cloned().collect();
    let spec = PairSetSpec {
        n: a.n,
        lambda: a.lambda,
        split: fit_split.clone(),
        seed: a.seed,
    };
    let sets = build_sets(&spec, &keep(&assigned))?;
    let val_tracks = keep(&val_ids);
    let val_index = TrackIndex::new(&val_tracks)?;
    let val = pair_set(&val_index, &val_ids, a.n, a.lambda, &mut set_rng(a.seed, 3))?;

    std::fs::create_dir_all(&a.out).map_err(|e| Error::storage(&a.out, e))?;
    let write = |set: &str, file: &str, pairs: Vec<PatchPair>, hash: String| -> Result<PathBuf, Error> {
        let path = a.out.join(file);
        PairManifest {
            set: set.into(),
            n: a.n,
            lambda: a.lambda,
            seed: a.seed,
            split_hash: hash,
            corpus_root: manifest.root().to_path_buf(),
            pairs,
        }
        .write(&path)?;
        Ok(path)
    };
    let val_count = val.len();
    let val_pos = val.iter().filter(|p| p.label.is_matching()).count();
    write("train", TRAIN_PAIRS, sets.train, fit_split.hash())?;
    write("test", TEST_PAIRS, sets.test, fit_split.hash())?;
    write("val", VAL_PAIRS, val, val_split.hash())?;
    println!("{}", sets.report);
    println!(
        "validation: {} positives, {} negatives ({} vehicles)",
        val_pos,
        val_count - val_pos,
        val_ids.len()
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

fn load_pairs(path: &Path, kind: ModelKind) -> Result<(PairManifest, Vec<PairSample>), Error> {
    let m = PairManifest::read(path)?;
    let samples = PatchStore::new(&m.corpus_root).samples(&m.pairs, kind)?;
    Ok((m, samples))
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let (train_m, train_s) = load_pairs(&a.train, a.model)?;
    let (val_m, val_s) = load_pairs(&a.val, a.model)?;
    let shared: Vec<String> = train_m.vehicle_ids().intersection(&val_m.vehicle_ids()).cloned().collect();
    if !shared.is_empty() {
        return Err(Error::Validation(
            shared
                .iter()
                .map(|v| format!("vehicle {v} appears in both training and validation pairs"))
                .collect(),
        )
        .into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let model = SiameseModel::build(a.model, a.backbone, &mut rng)?;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        momentum: a.momentum,
        lr_decay_factor: a.lr_decay,
        patience: a.patience,
        seed: a.seed,
        checkpoint_dir: Some(a.out.clone()),
    };
    let outcome = train(model, &train_s, &val_s, &config)?;
    let log_path = a.out.join(TRAIN_LOG);
    std::fs::write(&log_path, outcome.log.to_csv(false)).map_err(|e| Error::storage(&log_path, e))?;
    let timed_path = a.out.join(TIMED_LOG);
    std::fs::write(&timed_path, outcome.log.to_csv(true)).map_err(|e| Error::storage(&timed_path, e))?;
    for r in &outcome.log.records {
        let m = r.metrics();
        eprintln!(
            "epoch {:>3}  loss {:.5}  val P {} R {} F {} A {}  {:.1}s",
            r.epoch, r.train_loss, m.precision, m.recall, m.f_measure, m.accuracy, r.seconds
        );
    }
    println!(
        "best epoch {} checkpoint {} log {}",
        outcome.best_epoch,
        a.out.join(BEST_CHECKPOINT).display(),
        log_path.display()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let model = SiameseModel::load(&a.checkpoint)?;
    let (m, samples) = load_pairs(&a.pairs, model.kind())?;
    let confusion = evaluate(&model, &samples)?;
    let name = a.name.unwrap_or_else(|| model.display_name());
    let report = MetricsReport::new(name, m.n, m.lambda, confusion);
    let records = report_records(std::slice::from_ref(&report));
    if let Some(out) = &a.out {
        std::fs::write(out, &records).map_err(|e| Error::storage(out, e))?;
    }
    print!("{records}");
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Outcome {
    let mut reports = Vec::new();
    for path in &a.reports {
        let text = std::fs::read_to_string(path).map_err(|e| Error::storage(path, e))?;
        reports.extend(parse_records(&text)?);
    }
    let cmp = compare(&reports)?;
    if let Some(out) = &a.out {
        std::fs::write(out, &cmp.records).map_err(|e| Error::storage(out, e))?;
    }
    print!("{}", cmp.text);
    Ok(())
}

fn cmd_infer(a: InferArgs) -> Outcome {
    let model = SiameseModel::load(&a.checkpoint)?;
    let kind = model.kind();
    let (need_shape, need_plate) = (kind.uses_shape(), kind.uses_plate());
    let has_shape = [a.shape1.is_some(), a.shape2.is_some()];
    let has_plate = [a.plate1.is_some(), a.plate2.is_some()];
    if has_shape != [need_shape; 2] || has_plate != [need_plate; 2] {
        let required = match (need_shape, need_plate) {
            (true, true) => "--shape1 --plate1 --shape2 --plate2",
            (true, false) => "--shape1 --shape2",
            _ => "--plate1 --plate2",
        };
        return Err(Failure::Usage(format!("a {kind} checkpoint takes exactly {required}")));
    }
    let load = |p: &Option<PathBuf>, dims: [usize; 3]| -> Result<Option<crate::tensor::Tensor>, Error> {
        let Some(p) = p else { return Ok(None) };
        let t = read_patch(p)?;
        if t.shape() != dims {
            return Err(Error::Validation(vec![format!(
                "{}: geometry {:?}, expected {:?}",
                p.display(),
                t.shape(),
                dims
            )]));
        }
        Ok(Some(t))
    };
    let pair = |x: Option<_>, y: Option<_>| x.zip(y).map(|(x, y)| [x, y]);
    let sample = PairSample {
        shape: pair(load(&a.shape1, SHAPE_INPUT)?, load(&a.shape2, SHAPE_INPUT)?),
        plate: pair(load(&a.plate1, PLATE_INPUT)?, load(&a.plate2, PLATE_INPUT)?),
        label: crate::siamese::MatchLabel::NonMatching,
    };
    let d = model.predict(&sample)?;
    let verdict = if d.label.is_matching() { "matching" } else { "non-matching" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "p_match={:.6} p_non_match={:.6} verdict={verdict}", d.probs[1], d.probs[0])
        .map_err(|e| Error::storage("<stdout>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_lines_precede_explicit_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.txt");
        std::fs::write(&cfg, "# comment\nn = 10\nlambda=10\ntest_fraction = 0.3\n").unwrap();
        let cfg_s = cfg.to_str().unwrap();
        let merged = with_config(os(&["reid", "pairs", "--config", cfg_s, "--manifest", "m", "--out", "o", "--n", "4"])).unwrap();
        let cli = Cli::try_parse_from(merged).unwrap();
        match cli.command {
            Command::Pairs(p) => {
                assert_eq!(p.n, 4);
                assert_eq!(p.lambda, 10);
                assert_eq!(p.test_fraction, 0.3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_config_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.txt");
        std::fs::write(&cfg, "just words\n").unwrap();
        let r = with_config(os(&["reid", "pairs", "--config", cfg.to_str().unwrap()]));
        assert!(matches!(r, Err(Failure::Lib(Error::Format(_)))));
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run(["reid", "frobnicate"]), 1);
        assert_eq!(run(["reid", "train", "--train", "a", "--val", "b", "--model", "car", "--backbone", "resnet", "--out", "x"]), 1);
        assert_eq!(run(["reid", "--help"]), 0);
    }
}
