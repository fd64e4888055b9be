//! Embedding CNNs and the generic layer-stack [`Network`] they are built on.
//!
//! A network is a flat list of layers plus named parameter tensors. The
//! layer list is a pure function of the [`Architecture`] and input shape, so
//! a model file only has to carry the architecture description and the
//! parameter values.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::serialize::Container;
use crate::tensor::{Tape, Tensor, Var};

/// Which embedding CNN a stream uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackboneKind {
    SmallVgg,
    Lenet5Like,
}

impl BackboneKind {
    pub const ALL: [BackboneKind; 2] = [BackboneKind::SmallVgg, BackboneKind::Lenet5Like];

    pub fn as_str(self) -> &'static str {
        match self {
            BackboneKind::SmallVgg => "small-vgg",
            BackboneKind::Lenet5Like => "lenet5",
        }
    }
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small-vgg" => Ok(BackboneKind::SmallVgg),
            "lenet5" => Ok(BackboneKind::Lenet5Like),
            other => Err(Error::Parameter(format!(
                "unknown backbone '{other}' (expected small-vgg or lenet5)"
            ))),
        }
    }
}

/// Layer plan of an embedding CNN.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackboneSpec {
    pub name: BackboneKind,
    /// Filter count of each 3×3 conv stage, in order.
    pub conv_stages: Vec<usize>,
    pub pool_after_each_stage: bool,
    /// Hidden fully connected widths between the flatten and the embedding.
    pub hidden_fc: Vec<usize>,
    pub embedding_dim: usize,
    /// ReLU on the embedding layer itself.
    pub embedding_relu: bool,
    /// Smallest admissible input height/width.
    pub min_input: usize,
}

impl BackboneSpec {
    pub fn small_vgg() -> Self {
        BackboneSpec {
            name: BackboneKind::SmallVgg,
            conv_stages: vec![64, 128, 128, 256, 512],
            pool_after_each_stage: true,
            hidden_fc: vec![],
            embedding_dim: 512,
            embedding_relu: true,
            min_input: 32,
        }
    }

    pub fn lenet5_like() -> Self {
        BackboneSpec {
            name: BackboneKind::Lenet5Like,
            conv_stages: vec![6, 16],
            pool_after_each_stage: true,
            hidden_fc: vec![120],
            embedding_dim: 512,
            embedding_relu: false,
            min_input: 16,
        }
    }

    pub fn for_kind(kind: BackboneKind) -> Self {
        match kind {
            BackboneKind::SmallVgg => Self::small_vgg(),
            BackboneKind::Lenet5Like => Self::lenet5_like(),
        }
    }

    /// Post-pool spatial sizes for an `(h, w)` input.
    pub fn spatial_trace(&self, h: usize, w: usize) -> Vec<(usize, usize)> {
        let (mut h, mut w) = (h, w);
        self.conv_stages
            .iter()
            .map(|_| {
                if self.pool_after_each_stage {
                    h /= 2;
                    w /= 2;
                }
                (h, w)
            })
            .collect()
    }

    /// Closed-form parameter count for a `(c, h, w)` input.
    pub fn param_count(&self, input: [usize; 3]) -> usize {
        let mut count = 0;
        let mut channels = input[0];
        for &filters in &self.conv_stages {
            count += filters * channels * 9 + filters;
            channels = filters;
        }
        let (h, w) = self
            .spatial_trace(input[1], input[2])
            .last()
            .copied()
            .unwrap_or((input[1], input[2]));
        let mut width = channels * h * w;
        for &hidden in self.hidden_fc.iter().chain(std::iter::once(&self.embedding_dim)) {
            count += hidden * width + hidden;
            width = hidden;
        }
        count
    }

    fn to_header(&self) -> Vec<(String, String)> {
        vec![
            ("backbone".into(), self.name.to_string()),
            ("stages".into(), join_usize(&self.conv_stages)),
            ("pool".into(), self.pool_after_each_stage.to_string()),
            ("hidden_fc".into(), join_usize(&self.hidden_fc)),
            ("embedding".into(), self.embedding_dim.to_string()),
            ("embedding_relu".into(), self.embedding_relu.to_string()),
            ("min_input".into(), self.min_input.to_string()),
        ]
    }

    fn from_header(get: &dyn Fn(&str) -> Result<String>) -> Result<Self> {
        Ok(BackboneSpec {
            name: get("backbone")?.parse()?,
            conv_stages: parse_usize_list(&get("stages")?)?,
            pool_after_each_stage: parse_field(&get("pool")?, "pool")?,
            hidden_fc: parse_usize_list(&get("hidden_fc")?)?,
            embedding_dim: parse_field(&get("embedding")?, "embedding")?,
            embedding_relu: parse_field(&get("embedding_relu")?, "embedding_relu")?,
            min_input: parse_field(&get("min_input")?, "min_input")?,
        })
    }
}

/// Fully connected classification stack: `dims[0] → dims[1] → … → dims[last]`
/// with ReLU and dropout after every hidden layer and raw logits at the end.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadSpec {
    pub dims: Vec<usize>,
    pub dropout: f64,
}

impl HeadSpec {
    fn to_header(&self) -> Vec<(String, String)> {
        vec![
            ("head".into(), join_usize(&self.dims)),
            ("dropout".into(), self.dropout.to_string()),
        ]
    }

    fn from_header(get: &dyn Fn(&str) -> Result<String>) -> Result<Self> {
        Ok(HeadSpec {
            dims: parse_usize_list(&get("head")?)?,
            dropout: parse_field(&get("dropout")?, "dropout")?,
        })
    }
}

/// What a [`Network`] computes.
#[derive(Clone, Debug, PartialEq)]
pub enum Architecture {
    Backbone(BackboneSpec),
    Head(HeadSpec),
}

impl Architecture {
    pub(crate) fn to_header(&self, prefix: &str) -> Vec<(String, String)> {
        let (tag, fields) = match self {
            Architecture::Backbone(spec) => ("backbone", spec.to_header()),
            Architecture::Head(spec) => ("head", spec.to_header()),
        };
        std::iter::once((format!("{prefix}arch"), tag.to_string()))
            .chain(fields.into_iter().map(|(k, v)| (format!("{prefix}{k}"), v)))
            .collect()
    }

    pub(crate) fn from_header(prefix: &str, get: &dyn Fn(&str) -> Result<String>) -> Result<Self> {
        let scoped = |key: &str| get(&format!("{prefix}{key}"));
        match scoped("arch")?.as_str() {
            "backbone" => Ok(Architecture::Backbone(BackboneSpec::from_header(&scoped)?)),
            "head" => Ok(Architecture::Head(HeadSpec::from_header(&scoped)?)),
            other => Err(Error::Format(format!("unknown architecture tag '{other}'"))),
        }
    }
}

/// A named trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Layer {
    Conv { weight: usize, bias: usize },
    Relu,
    Pool,
    Flatten,
    Linear { weight: usize, bias: usize },
    Dropout(f64),
}

/// A parameterized layer stack: an embedding backbone or a classifier head.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    arch: Architecture,
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    params: Vec<Param>,
}

struct Builder<'r, R: Rng + ?Sized> {
    shape: Vec<usize>,
    layers: Vec<Layer>,
    params: Vec<Param>,
    rng: &'r mut R,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    /// He-uniform weights (bound `sqrt(6 / fan_in)`), zero bias.
    fn he_uniform(&mut self, shape: Vec<usize>, fan_in: usize) -> Tensor {
        let bound = (6.0 / fan_in as f64).sqrt();
        Tensor::from_fn(shape, |_| self.rng.random_range(-bound..bound))
    }

    fn add_param(&mut self, name: String, value: Tensor) -> usize {
        self.params.push(Param { name, value });
        self.params.len() - 1
    }

    fn conv(&mut self, name: &str, filters: usize) {
        let c_in = self.shape[0];
        let w = self.he_uniform(vec![filters, c_in, 3, 3], c_in * 9);
        let weight = self.add_param(format!("{name}.weight"), w);
        let bias = self.add_param(format!("{name}.bias"), Tensor::zeros(vec![filters]));
        self.layers.push(Layer::Conv { weight, bias });
        self.shape[0] = filters;
    }

    fn pool(&mut self) {
        self.layers.push(Layer::Pool);
        self.shape[1] /= 2;
        self.shape[2] /= 2;
    }

    fn flatten(&mut self) {
        self.layers.push(Layer::Flatten);
        self.shape = vec![self.shape.iter().product()];
    }

    fn linear(&mut self, name: &str, out: usize) {
        let fan_in = self.shape[0];
        let w = self.he_uniform(vec![out, fan_in], fan_in);
        let weight = self.add_param(format!("{name}.weight"), w);
        let bias = self.add_param(format!("{name}.bias"), Tensor::zeros(vec![out]));
        self.layers.push(Layer::Linear { weight, bias });
        self.shape = vec![out];
    }
}

impl Network {
    /// Build a network for `arch`, drawing initial weights from `rng`.
    pub fn build<R: Rng + ?Sized>(
        arch: Architecture,
        input_shape: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let mut b = Builder {
            shape: input_shape.to_vec(),
            layers: Vec::new(),
            params: Vec::new(),
            rng,
        };
        match &arch {
            Architecture::Backbone(spec) => {
                if input_shape.len() != 3 || input_shape[0] == 0 {
                    return Err(Error::Parameter(format!(
                        "backbone input must be (c, h, w), got {input_shape:?}"
                    )));
                }
                let (h, w) = (input_shape[1], input_shape[2]);
                if h < spec.min_input || w < spec.min_input {
                    return Err(Error::Parameter(format!(
                        "{} needs inputs of at least {m}x{m}, got {h}x{w}",
                        spec.name,
                        m = spec.min_input
                    )));
                }
                for (i, &filters) in spec.conv_stages.iter().enumerate() {
                    b.conv(&format!("conv{}", i + 1), filters);
                    b.layers.push(Layer::Relu);
                    if spec.pool_after_each_stage {
                        b.pool();
                    }
                }
                b.flatten();
                for (i, &hidden) in spec.hidden_fc.iter().enumerate() {
                    b.linear(&format!("fc{}", i + 1), hidden);
                    b.layers.push(Layer::Relu);
                }
                b.linear("embed", spec.embedding_dim);
                if spec.embedding_relu {
                    b.layers.push(Layer::Relu);
                }
            }
            Architecture::Head(spec) => {
                if spec.dims.len() < 2 || input_shape != [spec.dims[0]] {
                    return Err(Error::Parameter(format!(
                        "head dims {:?} do not fit input {input_shape:?}",
                        spec.dims
                    )));
                }
                if !(0.0..1.0).contains(&spec.dropout) {
                    return Err(Error::Parameter(format!(
                        "dropout rate must lie in [0, 1), got {}",
                        spec.dropout
                    )));
                }
                let last = spec.dims.len() - 1;
                for (i, &out) in spec.dims[1..].iter().enumerate() {
                    b.linear(&format!("fc{}", i + 1), out);
                    if i + 1 < last {
                        b.layers.push(Layer::Relu);
                        b.layers.push(Layer::Dropout(spec.dropout));
                    }
                }
            }
        }
        Ok(Network {
            arch,
            input_shape: input_shape.to_vec(),
            layers: b.layers,
            params: b.params,
        })
    }

    /// Rebuild a network from its architecture and stored parameters.
    pub fn from_params(arch: Architecture, input_shape: &[usize], params: Vec<Param>) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Self::build(arch, input_shape, &mut rng)?;
        if params.len() != net.params.len() {
            return Err(Error::Format(format!(
                "expected {} parameter tensors, found {}",
                net.params.len(),
                params.len()
            )));
        }
        for (slot, p) in net.params.iter_mut().zip(params) {
            if slot.name != p.name || slot.value.shape() != p.value.shape() {
                return Err(Error::Format(format!(
                    "parameter {} {:?} does not match expected {} {:?}",
                    p.name,
                    p.value.shape(),
                    slot.name,
                    slot.value.shape()
                )));
            }
            *slot = p;
        }
        Ok(net)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn backbone_spec(&self) -> Option<&BackboneSpec> {
        match &self.arch {
            Architecture::Backbone(spec) => Some(spec),
            Architecture::Head(_) => None,
        }
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_dim(&self) -> usize {
        match &self.arch {
            Architecture::Backbone(spec) => spec.embedding_dim,
            Architecture::Head(spec) => *spec.dims.last().unwrap_or(&0),
        }
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Record this network's parameters on `tape`. Trainable bindings report
    /// gradients; the returned handles are reused for every branch that shares
    /// the weights, so shared gradients accumulate on the tape.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    tape.param(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                }
            })
            .collect()
    }

    /// Run the layer stack on `input` with previously bound parameters.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        input: Var,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if tape.value(input).shape() != self.input_shape.as_slice() {
            return Err(Error::Dimension(format!(
                "network expects input {:?}, got {:?}",
                self.input_shape,
                tape.value(input).shape()
            )));
        }
        let mut x = input;
        for layer in &self.layers {
            x = match *layer {
                Layer::Conv { weight, bias } => tape.conv2d(x, bound[weight], bound[bias])?,
                Layer::Relu => tape.relu(x),
                Layer::Pool => tape.maxpool2x2(x)?,
                Layer::Flatten => tape.flatten(x)?,
                Layer::Linear { weight, bias } => tape.linear(x, bound[weight], bound[bias])?,
                Layer::Dropout(rate) => tape.dropout(x, rate, training, rng)?,
            };
        }
        Ok(x)
    }

    /// Inference-mode forward pass on a standalone input.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let x = tape.constant(input.clone());
        let mut no_rng = ChaCha8Rng::seed_from_u64(0);
        let y = self.forward(&mut tape, &bound, x, false, &mut no_rng)?;
        Ok(tape.value(y).clone())
    }

    /// Post-pool spatial sizes of a backbone for its input shape.
    pub fn spatial_trace(&self) -> Vec<(usize, usize)> {
        match &self.arch {
            Architecture::Backbone(spec) => {
                spec.spatial_trace(self.input_shape[1], self.input_shape[2])
            }
            Architecture::Head(_) => Vec::new(),
        }
    }
}

impl Network {
    pub(crate) fn write_into(&self, prefix: &str, container: &mut Container) {
        container.header.push((
            format!("{prefix}input"),
            self.input_shape
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join("x"),
        ));
        container.header.extend(self.arch.to_header(prefix));
        container.records.extend(
            self.params
                .iter()
                .map(|p| (format!("{prefix}{}", p.name), p.value.clone())),
        );
    }

    pub(crate) fn read_from(prefix: &str, container: &Container) -> Result<Self> {
        let get = |key: &str| container.header_value(key);
        let input_shape = get(&format!("{prefix}input"))?
            .split('x')
            .map(|d| parse_field(d, "input shape"))
            .collect::<Result<Vec<usize>>>()?;
        let arch = Architecture::from_header(prefix, &get)?;
        let params = container
            .records
            .iter()
            .filter_map(|(name, value)| {
                name.strip_prefix(prefix).map(|n| Param {
                    name: n.to_string(),
                    value: value.clone(),
                })
            })
            .collect();
        Self::from_params(arch, &input_shape, params)
    }

    /// Save a standalone network (`kind=network`) in the model container format.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut c = Container {
            header: vec![("kind".into(), "network".into())],
            records: Vec::new(),
        };
        self.write_into("net.", &mut c);
        c.write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c = Container::read(path)?;
        if c.header_value("kind")? != "network" {
            return Err(Error::Format(format!(
                "{} does not hold a standalone network",
                path.display()
            )));
        }
        Self::read_from("net.", &c)
    }
}

/// Small-VGG: five `conv3×3 → ReLU → maxpool2×2` stages with
/// 64/128/128/256/512 filters, then a 512-unit fully connected embedding.
pub fn build_small_vgg<R: Rng + ?Sized>(input_shape: [usize; 3], rng: &mut R) -> Result<Network> {
    Network::build(
        Architecture::Backbone(BackboneSpec::small_vgg()),
        &input_shape,
        rng,
    )
}

/// LeNet-style alternative: two conv stages (6, 16 filters), FC 120, FC 512.
pub fn build_lenet5_like<R: Rng + ?Sized>(input_shape: [usize; 3], rng: &mut R) -> Result<Network> {
    Network::build(
        Architecture::Backbone(BackboneSpec::lenet5_like()),
        &input_shape,
        rng,
    )
}

pub fn build_backbone<R: Rng + ?Sized>(
    kind: BackboneKind,
    input_shape: [usize; 3],
    rng: &mut R,
) -> Result<Network> {
    Network::build(
        Architecture::Backbone(BackboneSpec::for_kind(kind)),
        &input_shape,
        rng,
    )
}

/// Map a `[3, h, w]` patch to its embedding vector.
pub fn embed(net: &Network, patch: &Tensor) -> Result<Tensor> {
    if net.backbone_spec().is_none() {
        return Err(Error::Parameter("embed needs a backbone network".into()));
    }
    net.infer(patch)
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|v| parse_field(v, "list")).collect()
}

pub(crate) fn parse_field<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("bad value '{s}' for {what}")))
}
