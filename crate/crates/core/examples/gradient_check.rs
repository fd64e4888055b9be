//! Compare backpropagated gradients of a one-stream model with central
//! differences on a few parameter coordinates.
//!
//! cargo run --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use siamese_reid::backbone::BackboneKind;
use siamese_reid::siamese::{MatchLabel, Modality, PairSample, SiameseModel, PLATE_INPUT};
use siamese_reid::tensor::Tensor;

const STEP: f64 = 1e-4;

fn main() -> siamese_reid::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut model = SiameseModel::one_stream(Modality::Plate, BackboneKind::Lenet5Like, &mut rng)?;
    let mut patch = || Tensor::from_fn(PLATE_INPUT.to_vec(), |_| rng.random::<f64>());
    let sample = PairSample {
        shape: None,
        plate: Some([patch(), patch()]),
        label: MatchLabel::Matching,
    };
    let (loss, grads) = model.loss_and_gradients(&sample, false, &mut ChaCha8Rng::seed_from_u64(0))?;
    println!("loss {loss:.6}, {} parameters\n", model.param_count());
    println!("{:<28}{:>8}{:>16}{:>16}", "parameter", "index", "backprop", "numeric");

    let mut pick = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..8 {
        let p = pick.random_range(0..grads.len());
        let j = pick.random_range(0..grads[p].len());
        let name = model.params().nth(p).expect("index in range").name.clone();
        let orig = model.params().nth(p).expect("index in range").value.values()[j];
        let mut at = |v: f64| -> siamese_reid::Result<f64> {
            model.params_mut().nth(p).expect("index in range").value.values_mut()[j] = v;
            model.loss(&sample)
        };
        let numeric = (at(orig + STEP)? - at(orig - STEP)?) / (2.0 * STEP);
        at(orig)?;
        println!("{name:<28}{j:>8}{:>16.8e}{numeric:>16.8e}", grads[p][j]);
    }
    Ok(())
}
