//! Labeled sample generation and the `.risd` dataset format.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "RISD" | version:u16 | n_tx:u32 | n_rx:u32 | n_h:u32 | n_v:u32 | mode:u8
//! count:u64 | feature_len:u32 | config_hash:u64
//! count × ( features: f32 × feature_len | label:u32 | es_rate:f32 )
//! ```
//!
//! Features are stored unscaled; the model carries its own input scale.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::channel::sample_channel_pair;
use crate::codebook::{build_codebook, Codebook, CodebookMode};
use crate::error::{Error, Result};
use crate::mlp::TrainingSet;
use crate::precoding::{exhaustive_search, feature_len, feature_matrix, feature_vector};
use crate::rng::SimRng;

pub const DATASET_MAGIC: &[u8; 4] = b"RISD";
pub const DATASET_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 * 4 + 1 + 8 + 4 + 8;
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub n_tx: u32,
    pub n_rx: u32,
    pub n_h: u32,
    pub n_v: u32,
    pub mode: CodebookMode,
    pub feature_len: u32,
    pub config_hash: u64,
}

/// One labeled realization.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub es_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    /// Row-major `len × feature_len`.
    pub features: Vec<f32>,
    pub labels: Vec<u32>,
    pub es_rates: Vec<f32>,
}

/// Draws realization `index` of stream `domain` and labels it by exhaustive search.
pub fn labeled_sample(cfg: &ExperimentConfig, codebook: &Codebook, domain: u64, index: u64) -> Result<LabeledSample> {
    let mut rng = SimRng::substream(cfg.experiment.master_seed, domain, index);
    let pair = sample_channel_pair(&cfg.system, &cfg.geometry_t, &cfg.geometry_r, &mut rng)?;
    let es = exhaustive_search(&pair, codebook, &cfg.system)?;
    Ok(LabeledSample {
        features: feature_vector(&feature_matrix(&pair), 1.0),
        label: es.codeword_index,
        es_rate: es.rate_bps_hz,
    })
}

impl Dataset {
    pub fn empty(cfg: &ExperimentConfig, mode: CodebookMode) -> Self {
        let s = &cfg.system;
        Dataset {
            header: DatasetHeader {
                n_tx: s.n_tx as u32,
                n_rx: s.n_rx as u32,
                n_h: s.n_h as u32,
                n_v: s.n_v as u32,
                mode,
                feature_len: feature_len(s) as u32,
                config_hash: cfg.hash(),
            },
            features: Vec::new(),
            labels: Vec::new(),
            es_rates: Vec::new(),
        }
    }

    /// Generates `n` samples from stream `domain` in parallel.
    ///
    /// Sample `i` depends only on `(master_seed, domain, i)`, and chunks are
    /// appended in index order, so the result is independent of the thread count.
    pub fn generate(cfg: &ExperimentConfig, mode: CodebookMode, domain: u64, n: usize) -> Result<Self> {
        cfg.validate()?;
        let codebook = build_codebook(&cfg.ris_profile(), mode)?;
        let mut ds = Dataset::empty(cfg, mode);
        let width = ds.feature_len();
        ds.features.reserve_exact(n * width);
        ds.labels.reserve_exact(n);
        ds.es_rates.reserve_exact(n);
        for start in (0..n).step_by(CHUNK) {
            let end = (start + CHUNK).min(n);
            let chunk: Vec<LabeledSample> = (start..end)
                .into_par_iter()
                .map(|i| labeled_sample(cfg, &codebook, domain, i as u64))
                .collect::<Result<_>>()?;
            for s in chunk {
                ds.features.extend(s.features.iter().map(|&v| v as f32));
                ds.labels.push(s.label as u32);
                ds.es_rates.push(s.es_rate as f32);
            }
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.header.feature_len as usize
    }

    pub fn features_of(&self, index: usize) -> &[f32] {
        let w = self.feature_len();
        &self.features[index * w..(index + 1) * w]
    }

    pub fn mean_es_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.es_rates.iter().map(|&r| r as f64).sum::<f64>() / self.len() as f64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let w = self.feature_len();
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * (4 * w + 8));
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let h = &self.header;
        out.write_all(DATASET_MAGIC)?;
        out.write_all(&DATASET_VERSION.to_le_bytes())?;
        for v in [h.n_tx, h.n_rx, h.n_h, h.n_v] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&[h.mode.tag()])?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        out.write_all(&h.feature_len.to_le_bytes())?;
        out.write_all(&h.config_hash.to_le_bytes())?;
        let mut record = Vec::with_capacity(4 * self.feature_len() + 8);
        for i in 0..self.len() {
            record.clear();
            for v in self.features_of(i) {
                record.extend_from_slice(&v.to_le_bytes());
            }
            record.extend_from_slice(&self.labels[i].to_le_bytes());
            record.extend_from_slice(&self.es_rates[i].to_le_bytes());
            out.write_all(&record)?;
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: String| Error::format("dataset", reason);
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != DATASET_MAGIC {
            return Err(bad("bad magic (expected RISD)".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != DATASET_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let header = DatasetHeader {
            n_tx: u32_at(6),
            n_rx: u32_at(10),
            n_h: u32_at(14),
            n_v: u32_at(18),
            mode: CodebookMode::from_tag(bytes[22])?,
            feature_len: u32_at(31),
            config_hash: u64_at(35),
        };
        let count = u64_at(23) as usize;
        let w = header.feature_len as usize;
        let expected_w = 2 * (header.n_tx as usize) * (header.n_rx as usize) * (header.n_h as usize) * (header.n_v as usize);
        if w != expected_w {
            return Err(bad(format!("feature length {w} does not match array sizes ({expected_w})")));
        }
        let record = 4 * w + 8;
        let body = &bytes[HEADER_LEN..];
        if Some(body.len()) != count.checked_mul(record) {
            return Err(bad(format!("{count} records need {} bytes, found {}", count.saturating_mul(record), body.len())));
        }
        let n_classes = header.n_h as usize * header.n_v as usize;
        let mut ds = Dataset {
            header,
            features: Vec::with_capacity(count * w),
            labels: Vec::with_capacity(count),
            es_rates: Vec::with_capacity(count),
        };
        for (i, rec) in body.chunks_exact(record).enumerate() {
            ds.features
                .extend(rec[..4 * w].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())));
            let label = u32::from_le_bytes(rec[4 * w..4 * w + 4].try_into().unwrap());
            let rate = f32::from_le_bytes(rec[4 * w + 4..].try_into().unwrap());
            if label as usize >= n_classes || !(rate >= 0.0) {
                return Err(bad(format!("record {i}: label {label} or rate {rate} out of range")));
            }
            ds.labels.push(label);
            ds.es_rates.push(rate);
        }
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

impl TrainingSet for Dataset {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn feature_width(&self) -> usize {
        self.feature_len()
    }

    fn label(&self, index: usize) -> usize {
        self.labels[index] as usize
    }

    fn write_features(&self, index: usize, out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(self.features_of(index)) {
            *o = v as f64;
        }
    }
}
