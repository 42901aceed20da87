//! Binary checkpoint format.
//!
//! ```text
//! "RBM0"                      4 bytes
//! version                     u32
//! n_visible, n_hidden, rank   u32 each
//! b, W (row-major), mu, Q (row-major)          f64
//! adam: t (u64), beta1, beta2, eps, m_b, m_W, v_b, v_W (f64)
//! config: u32 byte length + UTF-8 JSON
//! ```
//!
//! All integers and floats are little-endian. Floats are stored bit-for-bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::data::DataStats;
use crate::error::{RbmError, Result};
use crate::rbm::RbmModel;
use crate::training::{AdamState, TrainConfig};

pub const MAGIC: &[u8; 4] = b"RBM0";
pub const VERSION: u32 = 1;

/// Everything needed to resume training or sample without the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: RbmModel,
    pub stats: DataStats,
    pub adam: AdamState,
    pub config: TrainConfig,
}

fn put_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_f64s<'a>(out: &mut Vec<u8>, xs: impl IntoIterator<Item = &'a f64>) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn dim_u32(what: &str, n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| RbmError::Checkpoint(format!("{what} = {n} does not fit in u32")))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let (n_v, n_h, rank) = (m.n_visible(), m.n_hidden(), self.stats.rank());
        if self.stats.mean.len() != n_v || self.stats.sqrt_cov.nrows() != n_v {
            return Err(RbmError::Checkpoint(
                "statistics do not match the model".into(),
            ));
        }
        if self
            .stats
            .mean
            .iter()
            .zip(m.centering.iter())
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            return Err(RbmError::Checkpoint(
                "model centering differs from the data mean".into(),
            ));
        }
        let a = &self.adam;
        if a.m_bias.len() != n_v
            || a.v_bias.len() != n_v
            || a.m_weights.dim() != (n_v, n_h)
            || a.v_weights.dim() != (n_v, n_h)
        {
            return Err(RbmError::Checkpoint(
                "optimizer state does not match the model".into(),
            ));
        }
        let json = serde_json::to_string(&self.config)
            .map_err(|e| RbmError::Checkpoint(format!("config encoding: {e}")))?;

        let mut out = Vec::with_capacity(32 + 8 * (3 * n_v * n_h + n_v * (rank + 4)) + json.len());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, dim_u32("n_visible", n_v)?);
        put_u32(&mut out, dim_u32("n_hidden", n_h)?);
        put_u32(&mut out, dim_u32("rank", rank)?);
        put_f64s(&mut out, m.visible_bias.iter());
        put_f64s(&mut out, m.weights.iter());
        put_f64s(&mut out, m.centering.iter());
        put_f64s(&mut out, self.stats.sqrt_cov.iter());
        out.extend_from_slice(&a.t.to_le_bytes());
        put_f64s(&mut out, [&a.beta1, &a.beta2, &a.eps]);
        put_f64s(&mut out, a.m_bias.iter());
        put_f64s(&mut out, a.m_weights.iter());
        put_f64s(&mut out, a.v_bias.iter());
        put_f64s(&mut out, a.v_weights.iter());
        put_u32(&mut out, dim_u32("config length", json.len())?);
        out.extend_from_slice(json.as_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(RbmError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(RbmError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let n_v = r.u32()? as usize;
        let n_h = r.u32()? as usize;
        let rank = r.u32()? as usize;
        if rank > n_v {
            return Err(RbmError::Checkpoint(format!(
                "rank {rank} exceeds n_visible {n_v}"
            )));
        }

        let visible_bias = r.vector(n_v)?;
        let weights = r.matrix(n_v, n_h)?;
        let centering = r.vector(n_v)?;
        let sqrt_cov = r.matrix(n_v, rank)?;
        let t = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let beta1 = r.f64()?;
        let beta2 = r.f64()?;
        let eps = r.f64()?;
        let m_bias = r.vector(n_v)?;
        let m_weights = r.matrix(n_v, n_h)?;
        let v_bias = r.vector(n_v)?;
        let v_weights = r.matrix(n_v, n_h)?;
        let json_len = r.u32()? as usize;
        let json = std::str::from_utf8(r.take(json_len)?)
            .map_err(|e| RbmError::Checkpoint(format!("config is not UTF-8: {e}")))?;
        let config: TrainConfig = serde_json::from_str(json)
            .map_err(|e| RbmError::Checkpoint(format!("config decoding: {e}")))?;
        if r.pos != bytes.len() {
            return Err(RbmError::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }

        let model = RbmModel::new(weights, visible_bias, centering.clone())
            .map_err(|e| RbmError::Checkpoint(format!("invalid model: {e}")))?;
        Ok(Checkpoint {
            model,
            stats: DataStats {
                mean: centering,
                sqrt_cov,
            },
            adam: AdamState {
                m_bias,
                m_weights,
                v_bias,
                v_weights,
                t,
                beta1,
                beta2,
                eps,
            },
            config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| RbmError::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                RbmError::Checkpoint(format!("truncated at byte {} (wanted {n} more)", self.pos))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| RbmError::Checkpoint("array size overflows".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn vector(&mut self, n: usize) -> Result<Array1<f64>> {
        Ok(Array1::from(self.floats(n)?))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| RbmError::Checkpoint("matrix size overflows".into()))?;
        Array2::from_shape_vec((rows, cols), self.floats(n)?)
            .map_err(|e| RbmError::Checkpoint(e.to_string()))
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| RbmError::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(RbmError::io(path, e));
    }
    Ok(())
}
