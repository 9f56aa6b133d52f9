//! Checkpoint container: a magic-tagged binary file holding a JSON header
//! (configs, progress counters, RNG state) followed by named f32 tensors.
//! Round-trips are bit-exact: reading a file and writing it back produces
//! identical bytes.

use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, RunConfig};
use crate::model::{AttnSrModel, ModelConfig};
use crate::nn::Parameter;
use crate::tensor::Tensor;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"ATSR";
const VERSION: u32 = 1;

/// Seeded generator state, enough to continue the data stream exactly where
/// a run left off.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    /// 32-byte generator seed, hex-encoded.
    pub seed_hex: String,
    /// Word position of the patch-sampling stream (decimal u128).
    pub data_word_pos: String,
}

impl RngState {
    pub fn capture(data_rng: &ChaCha8Rng) -> RngState {
        let seed_hex = data_rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        RngState {
            seed_hex,
            data_word_pos: data_rng.get_word_pos().to_string(),
        }
    }

    /// Rebuild the patch-sampling stream at its saved position.
    pub fn data_rng(&self) -> Result<ChaCha8Rng> {
        if self.seed_hex.len() != 64 || !self.seed_hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::invalid("RngState", "seed_hex must be 64 hex digits"));
        }
        let mut seed = [0u8; 32];
        for (i, chunk) in self.seed_hex.as_bytes().chunks(2).enumerate() {
            let hex = std::str::from_utf8(chunk).expect("validated ascii");
            seed[i] = u8::from_str_radix(hex, 16).expect("validated hex");
        }
        let pos: u128 = self
            .data_word_pos
            .parse()
            .map_err(|_| Error::invalid("RngState", "data_word_pos must be a decimal integer"))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(DATA_STREAM);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// Stream indices for the two independent RNG lanes derived from one seed.
pub(crate) const INIT_STREAM: u64 = 0;
pub(crate) const DATA_STREAM: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    /// The run configuration, when the checkpoint came from a training run.
    pub train: Option<RunConfig>,
    /// Completed epochs.
    pub epoch: usize,
    /// Best validation PSNR so far, stored as IEEE-754 bits so the value
    /// (including infinities) survives the JSON round trip exactly.
    pub best_psnr_bits: Option<u64>,
    pub best_epoch: Option<usize>,
    pub adam_t: u64,
    pub rng: RngState,
}

impl CheckpointHeader {
    pub fn best_psnr(&self) -> Option<f64> {
        self.best_psnr_bits.map(f64::from_bits)
    }
}

/// A parsed (or freshly captured) checkpoint.
#[derive(Debug)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    /// The exact serialized header, kept verbatim so write(read(x)) == x.
    header_bytes: Vec<u8>,
    tensors: Vec<(String, Vec<usize>, Vec<f32>)>,
}

impl Checkpoint {
    /// Snapshot the full training state: model parameters, batch-norm
    /// running statistics, and optimizer moments.
    pub fn capture(
        model: &AttnSrModel<f32>,
        train: Option<&RunConfig>,
        epoch: usize,
        best_psnr: Option<f64>,
        best_epoch: Option<usize>,
        adam: &Adam,
        data_rng: &ChaCha8Rng,
    ) -> Checkpoint {
        let header = CheckpointHeader {
            model: model.config().clone(),
            train: train.cloned(),
            epoch,
            best_psnr_bits: best_psnr.map(f64::to_bits),
            best_epoch,
            adam_t: adam.step_count(),
            rng: RngState::capture(data_rng),
        };
        let header_bytes = serde_json::to_vec(&header).expect("header serializes");
        let mut tensors = Vec::new();
        for (name, p) in model.named_params() {
            let t = p.tensor();
            tensors.push((name, t.shape().to_vec(), t.data().to_vec()));
        }
        for (name, bn) in model.named_batchnorms() {
            let c = bn.channels();
            tensors.push((format!("{name}.running_mean"), vec![c], bn.running_mean()));
            tensors.push((format!("{name}.running_var"), vec![c], bn.running_var()));
        }
        for (name, m, v) in adam.named_moments() {
            tensors.push((format!("optim.m.{name}"), m.shape().to_vec(), m.data().to_vec()));
            tensors.push((format!("optim.v.{name}"), v.shape().to_vec(), v.data().to_vec()));
        }
        Checkpoint { header, header_bytes, tensors }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.header_bytes.len() as u32).to_le_bytes());
        buf.extend_from_slice(&self.header_bytes);
        buf.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, shape, data) in &self.tensors {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &e in shape {
                buf.extend_from_slice(&(e as u32).to_le_bytes());
            }
            for &v in data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|source| Error::io(path, source))?;
            }
        }
        let mut file = std::fs::File::create(path).map_err(|source| Error::io(path, source))?;
        file.write_all(&buf).map_err(|source| Error::io(path, source))
    }

    pub fn read(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path).map_err(|source| Error::io(path, source))?;
        let bad = |detail: String| Error::InvalidCheckpoint {
            path: path.to_path_buf(),
            detail,
        };
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(4).ok_or_else(|| bad("truncated magic".into()))? != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)".into()));
        }
        let version = cur.u32().ok_or_else(|| bad("truncated version".into()))?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}, expected {VERSION}")));
        }
        let hlen = cur.u32().ok_or_else(|| bad("truncated header length".into()))? as usize;
        let header_bytes = cur
            .take(hlen)
            .ok_or_else(|| bad("truncated header".into()))?
            .to_vec();
        let header: CheckpointHeader =
            serde_json::from_slice(&header_bytes).map_err(|e| bad(format!("bad header: {e}")))?;
        let count = cur.u32().ok_or_else(|| bad("truncated tensor count".into()))? as usize;
        let mut tensors = Vec::with_capacity(count);
        for i in 0..count {
            let nlen = cur.u32().ok_or_else(|| bad(format!("tensor {i}: truncated name")))? as usize;
            let name = std::str::from_utf8(
                cur.take(nlen).ok_or_else(|| bad(format!("tensor {i}: truncated name")))?,
            )
            .map_err(|_| bad(format!("tensor {i}: name is not utf-8")))?
            .to_string();
            let rank = cur.u32().ok_or_else(|| bad(format!("{name}: truncated rank")))? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let e = cur.u32().ok_or_else(|| bad(format!("{name}: truncated extents")))?;
                shape.push(e as usize);
            }
            let len: usize = shape.iter().product();
            let raw = cur
                .take(len * 4)
                .ok_or_else(|| bad(format!("{name}: truncated data")))?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            tensors.push((name, shape, data));
        }
        if cur.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - cur.pos)));
        }
        Ok(Checkpoint { header, header_bytes, tensors })
    }

    pub fn tensor(&self, name: &str) -> Option<(&[usize], &[f32])> {
        self.tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, s, d)| (s.as_slice(), d.as_slice()))
    }

    /// Rebuild the model this checkpoint describes, loading every parameter
    /// and batch-norm running statistic.
    pub fn restore_model(&self) -> Result<AttnSrModel<f32>> {
        // Weights are overwritten below, so the init generator is arbitrary.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = AttnSrModel::new(self.header.model.clone(), &mut rng)?;
        for (name, p) in model.named_params() {
            let (shape, data) = self.tensor(&name).ok_or_else(|| {
                Error::invalid("restore_model", format!("checkpoint is missing tensor {name}"))
            })?;
            if shape != p.shape().as_slice() {
                return Err(Error::shape(
                    "restore_model",
                    format!("{name}: stored {shape:?} vs model {:?}", p.shape()),
                ));
            }
            p.set(Tensor::new(shape, data.to_vec())?);
        }
        for (name, bn) in model.named_batchnorms() {
            let mean = self
                .tensor(&format!("{name}.running_mean"))
                .ok_or_else(|| {
                    Error::invalid("restore_model", format!("missing {name}.running_mean"))
                })?
                .1
                .to_vec();
            let var = self
                .tensor(&format!("{name}.running_var"))
                .ok_or_else(|| {
                    Error::invalid("restore_model", format!("missing {name}.running_var"))
                })?
                .1
                .to_vec();
            if mean.len() != bn.channels() || var.len() != bn.channels() {
                return Err(Error::shape(
                    "restore_model",
                    format!("{name}: running stats have the wrong channel count"),
                ));
            }
            bn.set_running_stats(mean, var);
        }
        Ok(model)
    }

    /// Rebuild the optimizer state for the given (model-ordered) parameters.
    pub fn restore_adam(&self, params: &[(String, &Parameter<f32>)]) -> Result<Adam> {
        let mut moments = Vec::with_capacity(params.len());
        for (name, p) in params {
            let want = p.shape();
            let mut pair = Vec::with_capacity(2);
            for kind in ["m", "v"] {
                let key = format!("optim.{kind}.{name}");
                let (shape, data) = self.tensor(&key).ok_or_else(|| {
                    Error::invalid("restore_adam", format!("checkpoint is missing {key}"))
                })?;
                if shape != want.as_slice() {
                    return Err(Error::shape(
                        "restore_adam",
                        format!("{key}: stored {shape:?} vs parameter {want:?}"),
                    ));
                }
                pair.push(Tensor::new(shape, data.to_vec())?);
            }
            let v = pair.pop().expect("two moments");
            let m = pair.pop().expect("two moments");
            moments.push((name.clone(), m, v));
        }
        Ok(Adam::from_moments(moments, self.header.adam_t))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.bytes.len() {
            return None;
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        let b = self.take(4)?;
        Some(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
