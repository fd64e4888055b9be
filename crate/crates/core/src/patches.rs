use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pairgen::{PairManifest, PatchPair};
use crate::siamese::{ModelKind, PairSample, PLATE_INPUT, SHAPE_INPUT};
use crate::tensor::Tensor;

/// Decode an 8-bit RGB PNG into a `[3, h, w]` tensor scaled to `[0, 1]`.
pub fn read_patch(path: &Path) -> Result<Tensor> {
    let img = image::open(path)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::storage(path, io),
            other => Error::Image {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        })?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    let mut data = vec![0.0; 3 * h * w];
    for (i, px) in raw.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * h * w + i] = px[c] as f64 / 255.0;
        }
    }
    Tensor::new(vec![3, h, w], data)
}

/// Patch loader rooted at a corpus directory. Each file is decoded once and
/// shared between all samples that reference it.
#[derive(Debug)]
pub struct PatchStore {
    root: PathBuf,
    cache: HashMap<PathBuf, Tensor>,
}

impl PatchStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        PatchStore {
            root: root.into(),
            cache: HashMap::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Load `rel` (relative to the root) and require the given geometry.
    pub fn get(&mut self, rel: &Path, expected: [usize; 3]) -> Result<Tensor> {
        let t = match self.cache.get(rel) {
            Some(t) => t.clone(),
            None => {
                let t = read_patch(&self.root.join(rel))?;
                self.cache.insert(rel.to_path_buf(), t.clone());
                t
            }
        };
        if t.shape() != expected {
            return Err(Error::Validation(vec![format!(
                "{}: geometry {:?}, expected {:?}",
                self.root.join(rel).display(),
                t.shape(),
                expected
            )]));
        }
        Ok(t)
    }

    /// Decode the modalities `kind` consumes.
    pub fn sample(&mut self, pair: &PatchPair, kind: ModelKind) -> Result<PairSample> {
        let shape = if kind.uses_shape() {
            Some([self.get(&pair.cam1.shape, SHAPE_INPUT)?, self.get(&pair.cam2.shape, SHAPE_INPUT)?])
        } else {
            None
        };
        let plate = if kind.uses_plate() {
            Some([self.get(&pair.cam1.plate, PLATE_INPUT)?, self.get(&pair.cam2.plate, PLATE_INPUT)?])
        } else {
            None
        };
        Ok(PairSample {
            shape,
            plate,
            label: pair.label,
        })
    }

    pub fn samples(&mut self, pairs: &[PatchPair], kind: ModelKind) -> Result<Vec<PairSample>> {
        pairs.iter().map(|p| self.sample(p, kind)).collect()
    }
}

/// Decode every pair of a manifest for `kind`.
pub fn load_samples(manifest: &PairManifest, kind: ModelKind) -> Result<Vec<PairSample>> {
    PatchStore::new(&manifest.corpus_root).samples(&manifest.pairs, kind)
}
