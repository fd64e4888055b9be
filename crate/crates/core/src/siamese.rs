//! One-stream and two-stream Siamese classifiers.
//!
//! Each stream is a single backbone applied to the camera-1 and camera-2
//! patches; the two embeddings are compared by an elementwise L1 distance.
//! The two-stream model concatenates the shape and plate distance vectors
//! (512 + 512) and classifies the 1024-vector with a fully connected head
//! `1024 → 1024 → 512 → 256 → 2`. One-stream baselines use `512 → 512 → 256 → 2`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::backbone::{build_backbone, Architecture, BackboneKind, HeadSpec, Network, Param};
use crate::error::{Error, Result};
use crate::optim::SgdMomentum;
use crate::serialize::Container;
use crate::tensor::{softmax, Tape, Tensor, Var};

pub const SHAPE_INPUT: [usize; 3] = [3, 96, 96];
pub const PLATE_INPUT: [usize; 3] = [3, 96, 48];
pub const HEAD_DROPOUT: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Modality {
    Shape,
    Plate,
}

impl Modality {
    pub fn standard_input(self) -> [usize; 3] {
        match self {
            Modality::Shape => SHAPE_INPUT,
            Modality::Plate => PLATE_INPUT,
        }
    }
}

/// Backbone and input geometry of one stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamConfig {
    pub backbone: BackboneKind,
    pub input_shape: [usize; 3],
    pub modality: Modality,
}

impl StreamConfig {
    /// Shape streams see 96×96 patches, plate streams 96×48.
    pub fn standard(backbone: BackboneKind, modality: Modality) -> Self {
        StreamConfig {
            backbone,
            input_shape: modality.standard_input(),
            modality,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_shape != self.modality.standard_input() {
            return Err(Error::Parameter(format!(
                "{:?} stream expects input {:?}, got {:?}",
                self.modality,
                self.modality.standard_input(),
                self.input_shape
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    OneStreamShape,
    OneStreamPlate,
    TwoStream,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::OneStreamShape,
        ModelKind::OneStreamPlate,
        ModelKind::TwoStream,
    ];

    /// Tag stored in model files.
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::OneStreamShape => "one-stream-shape",
            ModelKind::OneStreamPlate => "one-stream-plate",
            ModelKind::TwoStream => "two-stream",
        }
    }

    /// Short name used on the command line and in reports.
    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::OneStreamShape => "car",
            ModelKind::OneStreamPlate => "plate",
            ModelKind::TwoStream => "two-stream",
        }
    }

    pub fn uses_shape(self) -> bool {
        self != ModelKind::OneStreamPlate
    }

    pub fn uses_plate(self) -> bool {
        self != ModelKind::OneStreamShape
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-stream-shape" | "car" => Ok(ModelKind::OneStreamShape),
            "one-stream-plate" | "plate" => Ok(ModelKind::OneStreamPlate),
            "two-stream" => Ok(ModelKind::TwoStream),
            other => Err(Error::Parameter(format!(
                "unknown model kind '{other}' (expected car, plate or two-stream)"
            ))),
        }
    }
}

/// Class index 0 is non-matching, 1 is matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatchLabel {
    NonMatching = 0,
    Matching = 1,
}

impl MatchLabel {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_bool(matching: bool) -> Self {
        if matching {
            MatchLabel::Matching
        } else {
            MatchLabel::NonMatching
        }
    }

    pub fn is_matching(self) -> bool {
        self == MatchLabel::Matching
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchDecision {
    pub probs: [f64; 2],
    pub label: MatchLabel,
}

impl MatchDecision {
    /// Argmax with ties resolved to non-matching.
    pub fn from_probs(probs: [f64; 2]) -> Self {
        let label = MatchLabel::from_bool(probs[1] > probs[0]);
        MatchDecision { probs, label }
    }
}

/// Decoded patches of one cross-camera pair. Index 0 is camera 1.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub shape: Option<[Tensor; 2]>,
    pub plate: Option<[Tensor; 2]>,
    pub label: MatchLabel,
}

impl PairSample {
    pub fn new(shape1: Tensor, plate1: Tensor, shape2: Tensor, plate2: Tensor, label: MatchLabel) -> Self {
        PairSample {
            shape: Some([shape1, shape2]),
            plate: Some([plate1, plate2]),
            label,
        }
    }

    /// Same pair with the cameras exchanged.
    pub fn swapped(&self) -> Self {
        let swap = |p: &Option<[Tensor; 2]>| p.as_ref().map(|[a, b]| [b.clone(), a.clone()]);
        PairSample {
            shape: swap(&self.shape),
            plate: swap(&self.plate),
            label: self.label,
        }
    }
}

/// A Siamese classifier: one or two weight-shared streams plus the head.
#[derive(Clone, Debug, PartialEq)]
pub struct SiameseModel {
    kind: ModelKind,
    shape_stream: Option<Network>,
    plate_stream: Option<Network>,
    head: Network,
}

struct Bound {
    shape: Option<Vec<Var>>,
    plate: Option<Vec<Var>>,
    head: Vec<Var>,
}

impl SiameseModel {
    /// Two-stream model over 96×96 shape and 96×48 plate patches.
    pub fn two_stream<R: Rng + ?Sized>(backbone: BackboneKind, rng: &mut R) -> Result<Self> {
        let shape = StreamConfig::standard(backbone, Modality::Shape);
        let plate = StreamConfig::standard(backbone, Modality::Plate);
        let shape_stream = build_backbone(backbone, shape.input_shape, rng)?;
        let plate_stream = build_backbone(backbone, plate.input_shape, rng)?;
        let fused = shape_stream.output_dim() + plate_stream.output_dim();
        let head = build_head(vec![fused, 1024, 512, 256, 2], rng)?;
        Ok(SiameseModel {
            kind: ModelKind::TwoStream,
            shape_stream: Some(shape_stream),
            plate_stream: Some(plate_stream),
            head,
        })
    }

    /// One-stream baseline on the standard geometry of `modality`.
    pub fn one_stream<R: Rng + ?Sized>(
        modality: Modality,
        backbone: BackboneKind,
        rng: &mut R,
    ) -> Result<Self> {
        let config = StreamConfig::standard(backbone, modality);
        config.validate()?;
        Self::one_stream_with(config, rng)
    }

    /// One-stream model on an arbitrary input geometry (e.g. 224×224 patches
    /// carrying both vehicle and plate).
    pub fn one_stream_with<R: Rng + ?Sized>(config: StreamConfig, rng: &mut R) -> Result<Self> {
        let stream = build_backbone(config.backbone, config.input_shape, rng)?;
        let head = build_head(vec![stream.output_dim(), 512, 256, 2], rng)?;
        let (kind, shape_stream, plate_stream) = match config.modality {
            Modality::Shape => (ModelKind::OneStreamShape, Some(stream), None),
            Modality::Plate => (ModelKind::OneStreamPlate, None, Some(stream)),
        };
        Ok(SiameseModel {
            kind,
            shape_stream,
            plate_stream,
            head,
        })
    }

    pub fn build<R: Rng + ?Sized>(kind: ModelKind, backbone: BackboneKind, rng: &mut R) -> Result<Self> {
        match kind {
            ModelKind::TwoStream => Self::two_stream(backbone, rng),
            ModelKind::OneStreamShape => Self::one_stream(Modality::Shape, backbone, rng),
            ModelKind::OneStreamPlate => Self::one_stream(Modality::Plate, backbone, rng),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn shape_stream(&self) -> Option<&Network> {
        self.shape_stream.as_ref()
    }

    pub fn plate_stream(&self) -> Option<&Network> {
        self.plate_stream.as_ref()
    }

    pub fn head(&self) -> &Network {
        &self.head
    }

    pub fn backbone(&self) -> BackboneKind {
        self.streams()
            .next()
            .and_then(|s| s.backbone_spec())
            .map(|s| s.name)
            .expect("a Siamese model always has a backbone stream")
    }

    /// Report name, e.g. `two-stream/small-vgg`.
    pub fn display_name(&self) -> String {
        format!("{}/{}", self.kind.short_name(), self.backbone())
    }

    fn streams(&self) -> impl Iterator<Item = &Network> {
        self.shape_stream.iter().chain(self.plate_stream.iter())
    }

    /// Parameters in a fixed order: shape stream, plate stream, head.
    pub fn params(&self) -> impl Iterator<Item = &Param> {
        self.shape_stream
            .iter()
            .chain(self.plate_stream.iter())
            .chain(std::iter::once(&self.head))
            .flat_map(|n| n.params().iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.shape_stream
            .iter_mut()
            .chain(self.plate_stream.iter_mut())
            .chain(std::iter::once(&mut self.head))
            .flat_map(|n| n.params_mut().iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.params().map(|p| p.value.len()).sum()
    }

    fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        Bound {
            shape: self.shape_stream.as_ref().map(|n| n.bind(tape, trainable)),
            plate: self.plate_stream.as_ref().map(|n| n.bind(tape, trainable)),
            head: self.head.bind(tape, trainable),
        }
    }

    fn bound_vars(&self, bound: &Bound) -> Vec<Var> {
        bound
            .shape
            .iter()
            .chain(bound.plate.iter())
            .chain(std::iter::once(&bound.head))
            .flatten()
            .copied()
            .collect()
    }

    fn stream_distance<R: Rng + ?Sized>(
        tape: &mut Tape,
        net: &Network,
        bound: &[Var],
        patches: Option<&[Tensor; 2]>,
        what: &str,
        rng: &mut R,
    ) -> Result<Var> {
        let [p1, p2] = patches.ok_or_else(|| {
            Error::Parameter(format!("this model needs {what} patches for both cameras"))
        })?;
        let x1 = tape.constant(p1.clone());
        let x2 = tape.constant(p2.clone());
        // same bound weights for both branches
        let e1 = net.forward(tape, bound, x1, false, rng)?;
        let e2 = net.forward(tape, bound, x2, false, rng)?;
        tape.l1_distance(e1, e2)
    }

    fn fused_on_tape<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        sample: &PairSample,
        rng: &mut R,
    ) -> Result<Var> {
        let shape_d = match (&self.shape_stream, &bound.shape) {
            (Some(net), Some(b)) => Some(Self::stream_distance(
                tape,
                net,
                b,
                sample.shape.as_ref(),
                "shape",
                rng,
            )?),
            _ => None,
        };
        let plate_d = match (&self.plate_stream, &bound.plate) {
            (Some(net), Some(b)) => Some(Self::stream_distance(
                tape,
                net,
                b,
                sample.plate.as_ref(),
                "plate",
                rng,
            )?),
            _ => None,
        };
        match (shape_d, plate_d) {
            (Some(s), Some(p)) => tape.concat(s, p),
            (Some(d), None) | (None, Some(d)) => Ok(d),
            (None, None) => unreachable!("model without streams"),
        }
    }

    fn logits_on_tape<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        sample: &PairSample,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let fused = self.fused_on_tape(tape, bound, sample, rng)?;
        self.head.forward(tape, &bound.head, fused, training, rng)
    }

    /// The head input: the L1 distance vector (two-stream: both concatenated).
    pub fn fused_vector(&self, sample: &PairSample) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let mut rng = inert_rng();
        let fused = self.fused_on_tape(&mut tape, &bound, sample, &mut rng)?;
        Ok(tape.value(fused).clone())
    }

    /// Forward pass returning the class probabilities. Dropout is active only
    /// when `training` is set.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        sample: &PairSample,
        training: bool,
        rng: &mut R,
    ) -> Result<MatchDecision> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let logits = self.logits_on_tape(&mut tape, &bound, sample, training, rng)?;
        let probs = softmax(tape.value(logits).values());
        Ok(MatchDecision::from_probs([probs[0], probs[1]]))
    }

    /// Deterministic inference.
    pub fn predict(&self, sample: &PairSample) -> Result<MatchDecision> {
        self.forward(sample, false, &mut inert_rng())
    }

    /// Cross-entropy loss of one pair and its gradient for every parameter,
    /// in [`SiameseModel::params`] order.
    pub fn loss_and_gradients<R: Rng + ?Sized>(
        &self,
        sample: &PairSample,
        training: bool,
        rng: &mut R,
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut grads: Vec<Vec<f64>> = self.params().map(|p| vec![0.0; p.value.len()]).collect();
        let loss = self.accumulate_gradients(sample, training, 1.0, &mut grads, rng)?;
        Ok((loss, grads))
    }

    /// Add `scale ×` the gradient of one pair's loss into `acc` (one buffer
    /// per parameter, [`SiameseModel::params`] order) and return the loss.
    pub fn accumulate_gradients<R: Rng + ?Sized>(
        &self,
        sample: &PairSample,
        training: bool,
        scale: f64,
        acc: &mut [Vec<f64>],
        rng: &mut R,
    ) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, true);
        let logits = self.logits_on_tape(&mut tape, &bound, sample, training, rng)?;
        let (loss, _) = tape.softmax_cross_entropy(logits, sample.label.index())?;
        let loss_value = tape.value(loss).item()?;
        let vars = self.bound_vars(&bound);
        let buffers = vars.iter().zip(acc.iter_mut()).map(|(v, a)| (*v, std::mem::take(a))).collect();
        let mut grads = tape.backward_seeded(loss, scale, buffers)?;
        for (v, a) in vars.into_iter().zip(acc.iter_mut()) {
            *a = grads.take(v).expect("seeded buffers are returned");
        }
        Ok(loss_value)
    }

    /// Loss only, in inference mode; used by finite-difference checks.
    pub fn loss(&self, sample: &PairSample) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let logits = self.logits_on_tape(&mut tape, &bound, sample, false, &mut inert_rng())?;
        let (loss, _) = tape.softmax_cross_entropy(logits, sample.label.index())?;
        tape.value(loss).item()
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container {
            header: vec![("kind".into(), self.kind.tag().into())],
            records: Vec::new(),
        };
        if let Some(n) = &self.shape_stream {
            n.write_into("shape.", &mut c);
        }
        if let Some(n) = &self.plate_stream {
            n.write_into("plate.", &mut c);
        }
        self.head.write_into("head.", &mut c);
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let kind: ModelKind = c
            .header_value("kind")?
            .parse()
            .map_err(|e: Error| Error::Format(e.to_string()))?;
        let shape_stream = kind
            .uses_shape()
            .then(|| Network::read_from("shape.", c))
            .transpose()?;
        let plate_stream = kind
            .uses_plate()
            .then(|| Network::read_from("plate.", c))
            .transpose()?;
        let head = Network::read_from("head.", c)?;
        let expected = shape_stream.iter().chain(plate_stream.iter()).chain([&head]).map(|n| n.params().len()).sum::<usize>();
        if expected != c.records.len() {
            return Err(Error::Format(format!(
                "model file has {} records, {kind} needs {expected}",
                c.records.len()
            )));
        }
        if !matches!(head.architecture(), Architecture::Head(_)) {
            return Err(Error::Format("head section is not a classifier head".into()));
        }
        Ok(SiameseModel {
            kind,
            shape_stream,
            plate_stream,
            head,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }

    /// Load and insist on a particular model kind.
    pub fn load_expecting(path: &Path, kind: ModelKind) -> Result<Self> {
        let model = Self::load(path)?;
        if model.kind != kind {
            return Err(Error::Format(format!(
                "{} holds a {} model, expected {kind}",
                path.display(),
                model.kind
            )));
        }
        Ok(model)
    }
}

fn build_head<R: Rng + ?Sized>(dims: Vec<usize>, rng: &mut R) -> Result<Network> {
    let input = [dims[0]];
    Network::build(
        Architecture::Head(HeadSpec {
            dims,
            dropout: HEAD_DROPOUT,
        }),
        &input,
        rng,
    )
}

/// RNG handed to inference paths where dropout is disabled and no draw happens.
fn inert_rng() -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(0)
}

/// One-stream decision: shared `net` on both patches, L1 distance, `head`.
pub fn one_stream_forward<R: Rng + ?Sized>(
    net: &Network,
    patch1: &Tensor,
    patch2: &Tensor,
    head: &Network,
    training: bool,
    rng: &mut R,
) -> Result<MatchDecision> {
    let mut tape = Tape::new();
    let bound = net.bind(&mut tape, false);
    let head_bound = head.bind(&mut tape, false);
    let d = SiameseModel::stream_distance(
        &mut tape,
        net,
        &bound,
        Some(&[patch1.clone(), patch2.clone()]),
        "stream",
        rng,
    )?;
    let logits = head.forward(&mut tape, &head_bound, d, training, rng)?;
    let probs = softmax(tape.value(logits).values());
    Ok(MatchDecision::from_probs([probs[0], probs[1]]))
}

/// Two-stream decision for shape/plate patches from camera 1 and camera 2.
#[allow(clippy::too_many_arguments)]
pub fn two_stream_forward<R: Rng + ?Sized>(
    model: &SiameseModel,
    shape1: &Tensor,
    plate1: &Tensor,
    shape2: &Tensor,
    plate2: &Tensor,
    training: bool,
    rng: &mut R,
) -> Result<MatchDecision> {
    if model.kind() != ModelKind::TwoStream {
        return Err(Error::Parameter(format!(
            "two_stream_forward needs a two-stream model, got {}",
            model.kind()
        )));
    }
    let sample = PairSample::new(
        shape1.clone(),
        plate1.clone(),
        shape2.clone(),
        plate2.clone(),
        MatchLabel::NonMatching,
    );
    model.forward(&sample, training, rng)
}

/// One optimizer step over `batch`: mean cross-entropy, backpropagated
/// through head and both streams, then an SGD-momentum update. Pairs are
/// processed one tape at a time and their gradients summed in batch order.
/// Returns the mean loss; when it is not finite no update is applied.
pub fn train_step<R: Rng + ?Sized>(
    model: &mut SiameseModel,
    batch: &[PairSample],
    optimizer: &mut SgdMomentum,
    rng: &mut R,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Parameter("train_step needs a non-empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut acc: Vec<Vec<f64>> = model.params().map(|p| vec![0.0; p.value.len()]).collect();
    for sample in batch {
        total += model.accumulate_gradients(sample, true, scale, &mut acc, rng)?;
    }
    let mean = total * scale;
    if mean.is_finite() {
        optimizer.step(model.params_mut(), &acc);
    }
    Ok(mean)
}
