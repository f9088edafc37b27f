//! Versioned binary model files.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "RISM" | version:u16 | n_widths:u32 | widths:u32 × n_widths
//! leaky_slope:f64 | bn_epsilon:f64 | bn_momentum:f64
//! feature_scale:f64 | label_layout_hash:u64
//! per hidden layer: weight (row-major), bias, gamma, beta, running_mean, running_var
//! output weight (row-major), output bias                      (all f64)
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{HiddenLayer, MlpArchitecture, MlpModel, OutputLayer};
use crate::codebook::Codebook;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"RISM";
pub const MODEL_VERSION: u16 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format("model", format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::format("model", "tensor too large"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn array1(&mut self, n: usize) -> Result<Array1<f64>> {
        Ok(Array1::from(self.vec(n)?))
    }

    fn array2(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        Ok(Array2::from_shape_vec((rows, cols), self.vec(rows * cols)?).unwrap())
    }
}

fn put_all<'a>(out: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl MlpModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.parameter_count() * 8);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.arch.layer_widths.len() as u32).to_le_bytes());
        for &w in &self.arch.layer_widths {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        for v in [
            self.arch.leaky_slope,
            self.arch.batchnorm_epsilon,
            self.arch.batchnorm_momentum,
            self.feature_scale,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.label_layout_hash.to_le_bytes());
        for h in &self.hidden {
            put_all(&mut out, h.weight.iter());
            for a in [&h.bias, &h.gamma, &h.beta, &h.running_mean, &h.running_var] {
                put_all(&mut out, a.iter());
            }
        }
        put_all(&mut out, self.output.weight.iter());
        put_all(&mut out, self.output.bias.iter());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::format("model", "bad magic (expected RISM)"));
        }
        let version = r.u16()?;
        if version != MODEL_VERSION {
            return Err(Error::format("model", format!("unsupported version {version}")));
        }
        let n_widths = r.u32()? as usize;
        if !(3..=64).contains(&n_widths) {
            return Err(Error::format("model", format!("implausible layer count {n_widths}")));
        }
        let widths = (0..n_widths).map(|_| r.u32().map(|w| w as usize)).collect::<Result<Vec<_>>>()?;
        let arch = MlpArchitecture {
            layer_widths: widths.clone(),
            leaky_slope: r.f64()?,
            batchnorm_epsilon: r.f64()?,
            batchnorm_momentum: r.f64()?,
        };
        arch.validate().map_err(|e| Error::format("model", e.to_string()))?;
        let feature_scale = r.f64()?;
        let label_layout_hash = r.u64()?;

        let mut hidden = Vec::with_capacity(arch.n_hidden());
        for w in widths.windows(2).take(arch.n_hidden()) {
            hidden.push(HiddenLayer {
                weight: r.array2(w[0], w[1])?,
                bias: r.array1(w[1])?,
                gamma: r.array1(w[1])?,
                beta: r.array1(w[1])?,
                running_mean: r.array1(w[1])?,
                running_var: r.array1(w[1])?,
            });
        }
        let k = widths.len();
        let output = OutputLayer {
            weight: r.array2(widths[k - 2], widths[k - 1])?,
            bias: r.array1(widths[k - 1])?,
        };
        if r.pos != bytes.len() {
            return Err(Error::format("model", format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let model = MlpModel {
            arch,
            hidden,
            output,
            feature_scale,
            label_layout_hash,
        };
        if !model.is_finite() || model.hidden.iter().any(|h| h.running_var.iter().any(|&v| v < 0.0)) {
            return Err(Error::format("model", "non-finite parameters or negative running variance"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Loads a model and checks that its labels refer to `codebook`.
    pub fn load(path: &Path, codebook: &Codebook) -> Result<Self> {
        let model = Self::load_unchecked(path)?;
        model.check_codebook(codebook)?;
        Ok(model)
    }

    pub fn load_unchecked(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn check_codebook(&self, codebook: &Codebook) -> Result<()> {
        if self.arch.n_classes() != codebook.len() {
            return Err(Error::invalid(format!(
                "model predicts {} classes, codebook has {} codewords",
                self.arch.n_classes(),
                codebook.len()
            )));
        }
        if self.label_layout_hash != codebook.layout_hash() {
            return Err(Error::invalid(format!(
                "model label layout {:016x} does not match codebook {:016x} ({} {}x{})",
                self.label_layout_hash,
                codebook.layout_hash(),
                codebook.mode,
                codebook.n_h,
                codebook.n_v
            )));
        }
        Ok(())
    }
}
