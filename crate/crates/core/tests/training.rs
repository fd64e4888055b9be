mod common;

use common::{rng, uniform};
use siamese_reid::backbone::BackboneKind;
use siamese_reid::optim::SgdMomentum;
use siamese_reid::siamese::{train_step, MatchLabel, Modality, ModelKind, PairSample, SiameseModel, PLATE_INPUT, SHAPE_INPUT};
use siamese_reid::trainer::{checkpoint_roundtrip, train, TrainConfig};
use siamese_reid::Error;

fn pair(seed: u64, label: MatchLabel) -> PairSample {
    let mut r = rng(seed);
    let shape = uniform(&SHAPE_INPUT, 0.0, 1.0, &mut r);
    let plate = uniform(&PLATE_INPUT, 0.0, 1.0, &mut r);
    match label {
        MatchLabel::Matching => PairSample::new(shape.clone(), plate.clone(), shape, plate, label),
        MatchLabel::NonMatching => PairSample::new(
            shape,
            plate,
            uniform(&SHAPE_INPUT, 0.0, 1.0, &mut r),
            uniform(&PLATE_INPUT, 0.0, 1.0, &mut r),
            label,
        ),
    }
}

#[test]
fn one_batch_can_be_memorized() {
    let mut model = SiameseModel::two_stream(BackboneKind::Lenet5Like, &mut rng(1)).unwrap();
    let batch = [pair(2, MatchLabel::Matching), pair(3, MatchLabel::NonMatching)];
    let mut opt = SgdMomentum::new(0.01, 0.9).unwrap();
    let mut r = rng(4);
    let mut steps = 0;
    let mut loss = f64::INFINITY;
    while steps < 500 && loss >= 0.05 {
        loss = train_step(&mut model, &batch, &mut opt, &mut r).unwrap();
        steps += 1;
    }
    assert!(loss < 0.05, "loss {loss} after {steps} steps");
}

#[test]
fn checkpoint_reproduces_probabilities_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.siam");
    let model = SiameseModel::two_stream(BackboneKind::Lenet5Like, &mut rng(5)).unwrap();
    let back = checkpoint_roundtrip(&model, &path).unwrap();
    for i in 0..100 {
        let s = pair(100 + i, if i % 2 == 0 { MatchLabel::Matching } else { MatchLabel::NonMatching });
        assert_eq!(model.predict(&s).unwrap(), back.predict(&s).unwrap());
    }
    assert!(matches!(
        SiameseModel::load_expecting(&path, ModelKind::OneStreamPlate),
        Err(Error::Format(_))
    ));
}

#[test]
fn truncated_checkpoint_is_rejected_and_left_alone() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.siam");
    SiameseModel::one_stream(Modality::Plate, BackboneKind::Lenet5Like, &mut rng(6))
        .unwrap()
        .save(&path)
        .unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let cut = &bytes[..bytes.len() - 100];
    std::fs::write(&path, cut).unwrap();
    assert!(matches!(SiameseModel::load(&path), Err(Error::Format(_))));
    assert_eq!(std::fs::read(&path).unwrap(), cut);
}

#[test]
fn same_seed_gives_same_log() {
    let samples: Vec<PairSample> = (0..12)
        .map(|i| pair(200 + i, if i % 3 == 0 { MatchLabel::Matching } else { MatchLabel::NonMatching }))
        .map(|s| PairSample { shape: None, ..s })
        .collect();
    let (tr, val) = samples.split_at(8);
    let config = TrainConfig {
        epochs: 2,
        batch_size: 3,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        let model = SiameseModel::one_stream(Modality::Plate, BackboneKind::Lenet5Like, &mut rng(8)).unwrap();
        train(model, tr, val, &config).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.log.to_csv(false), b.log.to_csv(false));
    assert_eq!(a.model, b.model);
}
