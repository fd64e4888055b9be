use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{evaluate, metrics, Confusion, Metrics};
use crate::optim::SgdMomentum;
use crate::siamese::{train_step, PairSample, SiameseModel};

pub const BEST_CHECKPOINT: &str = "best.siam";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Multiplies the learning rate after every epoch without improvement.
    pub lr_decay_factor: f64,
    /// Stale epochs tolerated before stopping; 0 disables early stopping.
    pub patience: usize,
    pub seed: u64,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            learning_rate: 0.01,
            momentum: 0.9,
            lr_decay_factor: 0.5,
            patience: 3,
            seed: 0,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.epochs == 0 {
            problems.push("epochs must be at least 1".to_string());
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            problems.push(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            problems.push(format!("lr_decay_factor must lie in (0, 1], got {}", self.lr_decay_factor));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub learning_rate: f64,
    pub val: Confusion,
    pub seconds: f64,
}

impl EpochRecord {
    pub fn metrics(&self) -> Metrics {
        metrics(&self.val)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

const LOG_COLUMNS: [&str; 11] = ["epoch", "train_loss", "lr", "tp", "fp", "fn", "tn", "P", "R", "F", "A"];

impl TrainLog {
    /// CSV records, one per epoch. Wall-clock seconds are appended only
    /// when `with_timing` is set since they differ between runs.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = LOG_COLUMNS.to_vec();
        if with_timing {
            header.push("seconds");
        }
        w.write_record(&header).expect("in-memory write");
        for r in &self.records {
            let m = r.metrics();
            let mut row = vec![
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.learning_rate.to_string(),
                r.val.tp.to_string(),
                r.val.fp.to_string(),
                r.val.fn_.to_string(),
                r.val.tn.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f_measure.to_string(),
                m.accuracy.to_string(),
            ];
            if with_timing {
                row.push(format!("{:.3}", r.seconds));
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 records")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let fmt_err = |e: csv::Error| Error::Format(e.to_string());
        let header = reader.headers().map_err(fmt_err)?.clone();
        let with_timing = header.len() == LOG_COLUMNS.len() + 1;
        if header.iter().take(LOG_COLUMNS.len()).ne(LOG_COLUMNS) {
            return Err(Error::Format("unexpected training log columns".into()));
        }
        let mut records = Vec::new();
        for rec in reader.records() {
            let r = rec.map_err(fmt_err)?;
            let bad = |i: usize| Error::Format(format!("bad {} value {:?}", header.get(i).unwrap_or("?"), &r[i]));
            let int = |i: usize| r[i].parse::<u64>().map_err(|_| bad(i));
            let float = |i: usize| r[i].parse::<f64>().map_err(|_| bad(i));
            records.push(EpochRecord {
                epoch: int(0)? as usize,
                train_loss: float(1)?,
                learning_rate: float(2)?,
                val: Confusion {
                    tp: int(3)?,
                    fp: int(4)?,
                    fn_: int(5)?,
                    tn: int(6)?,
                },
                seconds: if with_timing { float(11)? } else { 0.0 },
            });
        }
        Ok(TrainLog { records })
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation F.
    pub model: SiameseModel,
    pub log: TrainLog,
    pub best_epoch: usize,
    pub checkpoint: Option<PathBuf>,
}

/// Minibatch SGD with per-epoch validation. `val` must not share vehicles
/// with `train`.
pub fn train(mut model: SiameseModel, train: &[PairSample], val: &[PairSample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Parameter("training and validation sets must be non-empty".into()));
    }
    let checkpoint = match &config.checkpoint_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::storage(dir, e))?;
            Some(dir.join(BEST_CHECKPOINT))
        }
        None => None,
    };
    let mut saved: Option<PathBuf> = None;
    let mut optimizer = SgdMomentum::new(config.learning_rate, config.momentum)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainLog::default();
    let mut best: Option<(u32, usize, SiameseModel)> = None;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let lr = optimizer.learning_rate;
        let mut loss_sum = 0.0;
        let mut batch = Vec::with_capacity(config.batch_size);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let loss = train_step(&mut model, &batch, &mut optimizer, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    checkpoint: saved,
                });
            }
            loss_sum += loss * chunk.len() as f64;
        }
        let val_confusion = evaluate(&model, val)?;
        let f = metrics(&val_confusion).f_measure.tenths;
        log.records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            learning_rate: lr,
            val: val_confusion,
            seconds: started.elapsed().as_secs_f64(),
        });

        if best.as_ref().is_none_or(|(best_f, _, _)| f > *best_f) {
            if let Some(path) = &checkpoint {
                model.save(path)?;
                saved = Some(path.clone());
            }
            best = Some((f, epoch, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            optimizer.learning_rate *= config.lr_decay_factor;
            if config.patience > 0 && stale >= config.patience {
                break;
            }
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        checkpoint: saved,
    })
}

/// Save then reload, checking the model kind on the way back.
pub fn checkpoint_roundtrip(model: &SiameseModel, path: &Path) -> Result<SiameseModel> {
    model.save(path)?;
    SiameseModel::load_expecting(path, model.kind())
}
