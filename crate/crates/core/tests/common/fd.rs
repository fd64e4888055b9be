//! Central-difference gradient checks.

use rand::Rng;
use siamese_reid::siamese::{PairSample, SiameseModel};
use siamese_reid::tensor::{Tape, Tensor, Var};
use siamese_reid::Result;

use super::{rng, uniform};

pub const STEP: f64 = 1e-4;
pub const OP_TOL: f64 = 1e-4;
pub const MODEL_TOL: f64 = 1e-3;
pub const MODEL_COORDS: usize = 20;

/// Relative error with a floor so that two near-zero values compare equal.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Reduce any tensor to a scalar through fixed random weights so every
/// output element reaches the loss with a distinct coefficient.
pub fn project(tape: &mut Tape, v: Var, seed: u64) -> Result<Var> {
    let n = tape.value(v).len();
    let flat = tape.flatten(v)?;
    let w = tape.constant(uniform(&[1, n], -1.0, 1.0, &mut rng(seed)));
    let b = tape.constant(Tensor::zeros(vec![1]));
    let y = tape.linear(flat, w, b)?;
    Ok(tape.sum(y))
}

/// Compare tape gradients against central differences for every coordinate
/// of every input. Returns the largest relative error.
pub fn check_op(inputs: &[Tensor], build: impl Fn(&mut Tape, &[Var]) -> Result<Var>) -> Result<f64> {
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.param(x.clone())).collect();
        let loss = build(&mut tape, &vars)?;
        tape.value(loss).item()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.param(x.clone())).collect();
    let loss = build(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    let mut worst = 0.0f64;
    for (i, var) in vars.iter().enumerate() {
        let zeros = vec![0.0; inputs[i].len()];
        let analytic = grads.get(*var).unwrap_or(&zeros);
        for j in 0..inputs[i].len() {
            let mut xs = inputs.to_vec();
            xs[i].values_mut()[j] += STEP;
            let up = eval(&xs)?;
            xs[i].values_mut()[j] -= 2.0 * STEP;
            let down = eval(&xs)?;
            worst = worst.max(rel_err(analytic[j], (up - down) / (2.0 * STEP)));
        }
    }
    Ok(worst)
}

/// Values in `[lo, hi]` whose absolute value stays at least `gap` away from
/// zero, so that ReLU and |·| kinks are never crossed by a step.
pub fn away_from_zero(shape: &[usize], gap: f64, seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::from_fn(shape.to_vec(), |_| {
        let m = r.random_range(gap..1.0);
        if r.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// A permutation of evenly spaced values: every 2×2 window has a unique
/// maximum with a margin far larger than the step.
pub fn distinct(shape: &[usize], seed: u64) -> Tensor {
    let n: usize = shape.iter().product();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng(seed);
    for i in (1..n).rev() {
        idx.swap(i, r.random_range(0..=i));
    }
    Tensor::new(shape.to_vec(), idx.iter().map(|&k| k as f64 * 0.01 - 0.3).collect()).unwrap()
}

/// Every tape operation paired with its worst relative error.
pub fn op_suite() -> Result<Vec<(&'static str, f64)>> {
    let mut out = Vec::new();
    let mut r = rng(11);
    out.push((
        "conv2d",
        check_op(
            &[
                uniform(&[2, 5, 4], -1.0, 1.0, &mut r),
                uniform(&[3, 2, 3, 3], -1.0, 1.0, &mut r),
                uniform(&[3], -1.0, 1.0, &mut r),
            ],
            |t, v| {
                let y = t.conv2d(v[0], v[1], v[2])?;
                project(t, y, 1)
            },
        )?,
    ));
    out.push((
        "maxpool2x2",
        check_op(&[distinct(&[2, 5, 7], 2)], |t, v| {
            let y = t.maxpool2x2(v[0])?;
            project(t, y, 2)
        })?,
    ));
    out.push((
        "relu",
        check_op(&[away_from_zero(&[3, 4], 0.01, 3)], |t, v| {
            let y = t.relu(v[0]);
            project(t, y, 3)
        })?,
    ));
    out.push((
        "linear",
        check_op(
            &[
                uniform(&[6], -1.0, 1.0, &mut r),
                uniform(&[4, 6], -1.0, 1.0, &mut r),
                uniform(&[4], -1.0, 1.0, &mut r),
            ],
            |t, v| {
                let y = t.linear(v[0], v[1], v[2])?;
                project(t, y, 4)
            },
        )?,
    ));
    let a = uniform(&[8], -1.0, 1.0, &mut r);
    let b = Tensor::from_fn(vec![8], |i| a.values()[i] + [0.3, -0.3][i % 2]);
    out.push((
        "l1_distance",
        check_op(&[a, b], |t, v| {
            let y = t.l1_distance(v[0], v[1])?;
            project(t, y, 5)
        })?,
    ));
    out.push((
        "concat",
        check_op(&[uniform(&[3], -1.0, 1.0, &mut r), uniform(&[5], -1.0, 1.0, &mut r)], |t, v| {
            let y = t.concat(v[0], v[1])?;
            project(t, y, 6)
        })?,
    ));
    out.push((
        "dropout",
        check_op(&[uniform(&[20], -1.0, 1.0, &mut r)], |t, v| {
            let y = t.dropout(v[0], 0.4, true, &mut rng(7))?;
            project(t, y, 7)
        })?,
    ));
    out.push((
        "reshape",
        check_op(&[uniform(&[2, 3, 2], -1.0, 1.0, &mut r)], |t, v| {
            let y = t.reshape(v[0], vec![3, 4])?;
            project(t, y, 8)
        })?,
    ));
    out.push((
        "softmax_cross_entropy",
        check_op(&[uniform(&[4], -2.0, 2.0, &mut r)], |t, v| Ok(t.softmax_cross_entropy(v[0], 2)?.0))?,
    ));
    out.push((
        "add_scale_sum",
        check_op(&[uniform(&[5], -1.0, 1.0, &mut r), uniform(&[5], -1.0, 1.0, &mut r)], |t, v| {
            let s = t.add(v[0], v[1])?;
            let y = t.scale(s, -2.5);
            let p = project(t, y, 9)?;
            let q = t.sum(v[0]);
            t.add(p, q)
        })?,
    ));
    Ok(out)
}

/// The two one-sided differences of a smooth function agree to O(step);
/// a ReLU, max or |·| kink inside the stencil makes them disagree by the
/// jump in slope, and the central difference is then meaningless.
pub fn straddles_kink(up: f64, mid: f64, down: f64) -> bool {
    let (fwd, bwd) = ((up - mid) / STEP, (mid - down) / STEP);
    (fwd - bwd).abs() > 1e-3 * fwd.abs().max(bwd.abs()).max(1e-6)
}

/// Check `MODEL_COORDS` parameter coordinates of a whole model's loss.
/// Coordinates are drawn one parameter tensor at a time so small layers are
/// covered as often as large ones. Coordinates with an exactly zero analytic
/// gradient (dead units) or whose stencil straddles a kink are redrawn.
pub fn model_check(model: &mut SiameseModel, sample: &PairSample, seed: u64) -> Result<f64> {
    let (_, grads) = model.loss_and_gradients(sample, false, &mut rng(0))?;
    let mid = model.loss(sample)?;
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..50 * MODEL_COORDS {
        if checked == MODEL_COORDS {
            break;
        }
        let p = r.random_range(0..grads.len());
        let j = r.random_range(0..grads[p].len());
        if grads[p][j] == 0.0 {
            continue;
        }
        let set = |m: &mut SiameseModel, v: f64| {
            m.params_mut().nth(p).expect("parameter index").value.values_mut()[j] = v;
        };
        let orig = model.params().nth(p).expect("parameter index").value.values()[j];
        set(model, orig + STEP);
        let up = model.loss(sample)?;
        set(model, orig - STEP);
        let down = model.loss(sample)?;
        set(model, orig);
        if straddles_kink(up, mid, down) {
            continue;
        }
        checked += 1;
        worst = worst.max(rel_err(grads[p][j], (up - down) / (2.0 * STEP)));
    }
    if checked < MODEL_COORDS {
        return Err(siamese_reid::Error::Parameter(format!(
            "only {checked} differentiable coordinates found"
        )));
    }
    Ok(worst)
}
