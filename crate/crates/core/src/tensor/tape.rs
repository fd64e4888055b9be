use rand::Rng;

use super::kernels::{
    col2im_3x3, gemm, im2col_3x3, matvec_acc, matvec_t_acc, maxpool_2x2, outer_acc, softmax,
};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        kernels: Var,
        bias: Var,
        /// im2col buffer, kept only when the kernel gradient is needed.
        cols: Option<Vec<f64>>,
    },
    MaxPool {
        input: Var,
        argmax: Vec<u32>,
    },
    Relu {
        input: Var,
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
    },
    L1 {
        a: Var,
        b: Var,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Dropout {
        input: Var,
        mask: Vec<f64>,
    },
    Reshape {
        input: Var,
    },
    SoftmaxCe {
        logits: Var,
        probs: Vec<f64>,
        label: usize,
    },
    Sum {
        input: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        input: Var,
        factor: f64,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Ordered record of operations. Nodes are appended as operations execute,
/// so every node's inputs precede it and reverse iteration is a valid
/// backward schedule.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`, if it requires one and is
    /// reachable from the loss.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn dim_err<T>(msg: String) -> Result<T> {
    Err(Error::Dimension(msg))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Record a constant input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, false, Op::Leaf)
    }

    /// Record a trainable leaf whose gradient will be reported.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, true, Op::Leaf)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// 3×3 cross-correlation, stride 1, zero padding 1, plus per-channel bias.
    /// `input` is `[c_in, h, w]`, `kernels` `[c_out, c_in, 3, 3]`, `bias` `[c_out]`.
    pub fn conv2d(&mut self, input: Var, kernels: Var, bias: Var) -> Result<Var> {
        let (xs, ks, bs) = (
            self.value(input).shape(),
            self.value(kernels).shape(),
            self.value(bias).shape(),
        );
        if xs.len() != 3 {
            return dim_err(format!("conv2d input must be [c, h, w], got {xs:?}"));
        }
        if ks.len() != 4 || ks[2] != 3 || ks[3] != 3 {
            return dim_err(format!("conv2d kernels must be [c_out, c_in, 3, 3], got {ks:?}"));
        }
        if ks[1] != xs[0] {
            return dim_err(format!(
                "conv2d channel mismatch: input has {} channels, kernels expect {}",
                xs[0], ks[1]
            ));
        }
        if bs != [ks[0]] {
            return dim_err(format!("conv2d bias must be [{}], got {bs:?}", ks[0]));
        }
        let (c_in, h, w, c_out) = (xs[0], xs[1], xs[2], ks[0]);
        let hw = h * w;
        let cols = im2col_3x3(self.value(input).values(), c_in, h, w);
        let mut out = Vec::with_capacity(c_out * hw);
        for &b in self.value(bias).values() {
            out.extend(std::iter::repeat_n(b, hw));
        }
        gemm(
            c_out,
            c_in * 9,
            hw,
            1.0,
            self.value(kernels).values(),
            false,
            &cols,
            false,
            1.0,
            &mut out,
        );
        let requires_grad = self.any_grad(&[input, kernels, bias]);
        let keep_cols = self.requires_grad(kernels);
        let value = Tensor::from_parts(vec![c_out, h, w], out);
        Ok(self.push(
            value,
            requires_grad,
            Op::Conv2d {
                input,
                kernels,
                bias,
                cols: keep_cols.then_some(cols),
            },
        ))
    }

    /// 2×2 max-pool, stride 2; an odd trailing row or column is dropped.
    pub fn maxpool2x2(&mut self, input: Var) -> Result<Var> {
        let xs = self.value(input).shape();
        if xs.len() != 3 {
            return dim_err(format!("maxpool input must be [c, h, w], got {xs:?}"));
        }
        let (c, h, w) = (xs[0], xs[1], xs[2]);
        if h < 2 || w < 2 {
            return dim_err(format!("maxpool needs h, w >= 2, got {h}x{w}"));
        }
        let (out, argmax) = maxpool_2x2(self.value(input).values(), c, h, w);
        let value = Tensor::from_parts(vec![c, h / 2, w / 2], out);
        let rg = self.any_grad(&[input]);
        Ok(self.push(value, rg, Op::MaxPool { input, argmax }))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let x = self.value(input);
        // NaN passes through so a poisoned input still poisons the loss
        let out: Vec<f64> = x.values().iter().map(|&v| if v < 0.0 { 0.0 } else { v }).collect();
        let value = Tensor::from_parts(x.shape().to_vec(), out);
        let rg = self.any_grad(&[input]);
        self.push(value, rg, Op::Relu { input })
    }

    /// `weight · input + bias` with `weight` `[m, n]`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (xs, ws, bs) = (
            self.value(input).shape(),
            self.value(weight).shape(),
            self.value(bias).shape(),
        );
        if xs.len() != 1 || ws.len() != 2 || ws[1] != xs[0] || bs != [ws[0]] {
            return dim_err(format!(
                "linear expects input [n], weight [m, n], bias [m]; got {xs:?}, {ws:?}, {bs:?}"
            ));
        }
        let (m, n) = (ws[0], ws[1]);
        let mut out = self.value(bias).values().to_vec();
        matvec_acc(
            self.value(weight).values(),
            n,
            self.value(input).values(),
            &mut out,
        );
        let rg = self.any_grad(&[input, weight, bias]);
        Ok(self.push(
            Tensor::from_parts(vec![m], out),
            rg,
            Op::Linear {
                input,
                weight,
                bias,
            },
        ))
    }

    /// Elementwise `|a - b|`.
    pub fn l1_distance(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return dim_err(format!(
                "l1_distance shape mismatch: {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            ));
        }
        let out = ta
            .values()
            .iter()
            .zip(tb.values())
            .map(|(x, y)| (x - y).abs())
            .collect();
        let value = Tensor::from_parts(ta.shape().to_vec(), out);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, rg, Op::L1 { a, b }))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 1 || tb.rank() != 1 {
            return dim_err(format!(
                "concat expects rank-1 tensors, got {:?} and {:?}",
                ta.shape(),
                tb.shape()
            ));
        }
        let mut out = Vec::with_capacity(ta.len() + tb.len());
        out.extend_from_slice(ta.values());
        out.extend_from_slice(tb.values());
        let value = Tensor::from_parts(vec![out.len()], out);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, rg, Op::Concat { a, b }))
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `rate` and survivors are scaled by `1 / (1 - rate)`.
    /// Outside training mode the input passes through unchanged.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        input: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Parameter(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(input);
        }
        let keep = 1.0 / (1.0 - rate);
        let x = self.value(input);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let out = x.values().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::from_parts(x.shape().to_vec(), out);
        let rg = self.any_grad(&[input]);
        Ok(self.push(value, rg, Op::Dropout { input, mask }))
    }

    pub fn reshape(&mut self, input: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let value = self.value(input).reshape(shape)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(value, rg, Op::Reshape { input }))
    }

    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let n = self.value(input).len();
        self.reshape(input, vec![n])
    }

    /// Softmax over `logits` followed by `-ln p[label]`. Returns the scalar
    /// loss and the probability vector.
    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Result<(Var, Vec<f64>)> {
        let z = self.value(logits);
        if z.rank() != 1 || z.len() < 2 {
            return dim_err(format!(
                "softmax_cross_entropy expects [k] logits with k >= 2, got {:?}",
                z.shape()
            ));
        }
        if label >= z.len() {
            return Err(Error::Parameter(format!(
                "label {label} out of range for {} classes",
                z.len()
            )));
        }
        let probs = softmax(z.values());
        // log-sum-exp form keeps the loss finite when probs[label] underflows
        let max = z.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.values().iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - z.values()[label];
        let rg = self.any_grad(&[logits]);
        let var = self.push(
            Tensor::scalar(loss),
            rg,
            Op::SoftmaxCe {
                logits,
                probs: probs.clone(),
                label,
            },
        );
        Ok((var, probs))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let total = self.value(input).values().iter().sum();
        let rg = self.any_grad(&[input]);
        self.push(Tensor::scalar(total), rg, Op::Sum { input })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return dim_err(format!(
                "add shape mismatch: {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            ));
        }
        let out = ta.values().iter().zip(tb.values()).map(|(x, y)| x + y).collect();
        let value = Tensor::from_parts(ta.shape().to_vec(), out);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, rg, Op::Add { a, b }))
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Var {
        let x = self.value(input);
        let out = x.values().iter().map(|v| v * factor).collect();
        let value = Tensor::from_parts(x.shape().to_vec(), out);
        let rg = self.any_grad(&[input]);
        self.push(value, rg, Op::Scale { input, factor })
    }

    /// Reverse sweep from a scalar `loss`. Each recorded operation is visited
    /// once, newest first; gradients reaching a value along several paths
    /// are summed.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.backward_seeded(loss, 1.0, Vec::new())
    }

    /// Like [`Tape::backward`] but starting from `d loss = seed` and adding
    /// into caller-owned buffers for the given leaves, which come back in
    /// the returned [`Gradients`]. Lets a caller sum scaled gradients over
    /// many tapes without reallocating.
    pub fn backward_seeded(&self, loss: Var, seed: f64, buffers: Vec<(Var, Vec<f64>)>) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return dim_err(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(self.nodes.len(), || None);
        for (var, buf) in buffers {
            let node = &self.nodes[var.0];
            if !matches!(node.op, Op::Leaf) || buf.len() != node.value.len() {
                return Err(Error::Parameter(format!(
                    "gradient buffer for node {} must be a leaf buffer of length {}",
                    var.0,
                    node.value.len()
                )));
            }
            grads[var.0] = Some(buf);
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(vec![seed]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], var: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        let slot = grads[var.0].get_or_insert_with(|| vec![0.0; self.nodes[var.0].value.len()]);
        f(slot);
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                kernels,
                bias,
                cols,
            } => {
                let xs = self.value(*input).shape();
                let (c_in, h, w) = (xs[0], xs[1], xs[2]);
                let c_out = self.value(*kernels).shape()[0];
                let hw = h * w;
                self.accumulate(grads, *bias, |gb| {
                    for (o, slot) in gb.iter_mut().enumerate() {
                        *slot += g[o * hw..(o + 1) * hw].iter().sum::<f64>();
                    }
                });
                if let Some(cols) = cols {
                    self.accumulate(grads, *kernels, |gk| {
                        gemm(c_out, hw, c_in * 9, 1.0, g, false, cols, true, 1.0, gk);
                    });
                }
                if self.requires_grad(*input) {
                    let mut dcols = vec![0.0; c_in * 9 * hw];
                    gemm(
                        c_in * 9,
                        c_out,
                        hw,
                        1.0,
                        self.value(*kernels).values(),
                        true,
                        g,
                        false,
                        0.0,
                        &mut dcols,
                    );
                    let dx = col2im_3x3(&dcols, c_in, h, w);
                    self.accumulate(grads, *input, |gx| add_assign(gx, &dx));
                }
            }
            Op::MaxPool { input, argmax } => {
                self.accumulate(grads, *input, |gx| {
                    for (&src, &gv) in argmax.iter().zip(g) {
                        gx[src as usize] += gv;
                    }
                });
            }
            Op::Relu { input } => {
                let x = self.value(*input).values();
                self.accumulate(grads, *input, |gx| {
                    for ((slot, &xv), &gv) in gx.iter_mut().zip(x).zip(g) {
                        if xv > 0.0 {
                            *slot += gv;
                        }
                    }
                });
            }
            Op::Linear {
                input,
                weight,
                bias,
            } => {
                let n = self.value(*weight).shape()[1];
                self.accumulate(grads, *bias, |gb| add_assign(gb, g));
                let x = self.value(*input).values();
                self.accumulate(grads, *weight, |gw| outer_acc(gw, g, x));
                let wv = self.value(*weight).values();
                self.accumulate(grads, *input, |gx| matvec_t_acc(wv, n, g, gx));
            }
            Op::L1 { a, b } => {
                let (av, bv) = (self.value(*a).values(), self.value(*b).values());
                let sign = |i: usize| {
                    let d = av[i] - bv[i];
                    if d > 0.0 {
                        1.0
                    } else if d < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                };
                self.accumulate(grads, *a, |ga| {
                    for (i, slot) in ga.iter_mut().enumerate() {
                        *slot += sign(i) * g[i];
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for (i, slot) in gb.iter_mut().enumerate() {
                        *slot -= sign(i) * g[i];
                    }
                });
            }
            Op::Concat { a, b } => {
                let split = self.value(*a).len();
                self.accumulate(grads, *a, |ga| add_assign(ga, &g[..split]));
                self.accumulate(grads, *b, |gb| add_assign(gb, &g[split..]));
            }
            Op::Dropout { input, mask } => {
                self.accumulate(grads, *input, |gx| {
                    for ((slot, &m), &gv) in gx.iter_mut().zip(mask).zip(g) {
                        *slot += m * gv;
                    }
                });
            }
            Op::Reshape { input } => {
                self.accumulate(grads, *input, |gx| add_assign(gx, g));
            }
            Op::SoftmaxCe {
                logits,
                probs,
                label,
            } => {
                let upstream = g[0];
                self.accumulate(grads, *logits, |gz| {
                    for (k, slot) in gz.iter_mut().enumerate() {
                        let onehot = if k == *label { 1.0 } else { 0.0 };
                        *slot += upstream * (probs[k] - onehot);
                    }
                });
            }
            Op::Sum { input } => {
                let upstream = g[0];
                self.accumulate(grads, *input, |gx| {
                    for slot in gx.iter_mut() {
                        *slot += upstream;
                    }
                });
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, |ga| add_assign(ga, g));
                self.accumulate(grads, *b, |gb| add_assign(gb, g));
            }
            Op::Scale { input, factor } => {
                self.accumulate(grads, *input, |gx| {
                    for (slot, &gv) in gx.iter_mut().zip(g) {
                        *slot += factor * gv;
                    }
                });
            }
        }
    }
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
