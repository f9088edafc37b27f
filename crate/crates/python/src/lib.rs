//! Python bindings: channel draws, codebooks, exhaustive search, datasets and trained models.

use std::path::PathBuf;

use ndarray::Array2;
use numpy::{IntoPyArray, PyArray1, PyArray2, PyReadonlyArray1};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ris_beamsel::channel::sample_channel_pair;
use ris_beamsel::codebook::{amplitude_response, build_codebook};
use ris_beamsel::harness::{self, Dataset, ExperimentConfig};
use ris_beamsel::mlp::{predict_codeword, MlpModel};
use ris_beamsel::precoding::{codeword_rates, exhaustive_search, feature_matrix, feature_vector, random_select};
use ris_beamsel::rng::domain;
use ris_beamsel::{ChannelPair, CodebookMode, Complex64, Error, RisProfile, SimRng};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<CodebookMode> {
    mode.parse().map_err(to_py)
}

fn complex_array(m: &nalgebra::DMatrix<Complex64>) -> Array2<Complex64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(r, c)| m[(r, c)])
}

/// Experiment configuration: system, geometry, RIS model, training and sweep settings.
#[pyclass(name = "Config", module = "ris_beamsel_py")]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// Reads a TOML config, or returns the reference scenario when `path` is None.
    #[new]
    #[pyo3(signature = (path=None, seed=None))]
    fn new(path: Option<PathBuf>, seed: Option<u64>) -> PyResult<Self> {
        let mut inner = match path {
            Some(p) => ExperimentConfig::load(&p).map_err(to_py)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = seed {
            inner.experiment.master_seed = s;
        }
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ExperimentConfig::from_toml_str(text)
            .map(|inner| PyConfig { inner })
            .map_err(PyValueError::new_err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    /// Copy with a different horizontal RIS size.
    fn with_n_h(&self, n_h: usize) -> Self {
        PyConfig { inner: self.inner.with_n_h(n_h) }
    }

    #[getter]
    fn n_elements(&self) -> usize {
        self.inner.system.n_elements()
    }

    #[getter]
    fn feature_len(&self) -> usize {
        ris_beamsel::precoding::feature_len(&self.inner.system)
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.experiment.master_seed
    }

    fn __repr__(&self) -> String {
        let s = &self.inner.system;
        format!(
            "Config(n_tx={}, n_rx={}, n_h={}, n_v={}, d_t={}, d_r={}, seed={})",
            s.n_tx, s.n_rx, s.n_h, s.n_v, self.inner.geometry_t.distance_m, self.inner.geometry_r.distance_m,
            self.inner.experiment.master_seed
        )
    }

    /// Draws realization `index` of the `"train"` or `"test"` stream.
    #[pyo3(signature = (index, stream="test"))]
    fn sample_channel(&self, index: u64, stream: &str) -> PyResult<PyChannel> {
        let dom = match stream {
            "train" => domain::TRAIN,
            "test" => domain::TEST,
            other => return Err(PyValueError::new_err(format!("unknown stream {other:?} (train|test)"))),
        };
        let mut rng = SimRng::substream(self.inner.experiment.master_seed, dom, index);
        let c = &self.inner;
        sample_channel_pair(&c.system, &c.geometry_t, &c.geometry_r, &mut rng)
            .map(|inner| PyChannel { inner })
            .map_err(to_py)
    }

    /// Codebook for this config's RIS size and amplitude model.
    #[pyo3(signature = (mode="practical"))]
    fn codebook(&self, mode: &str) -> PyResult<PyCodebook> {
        build_codebook(&self.inner.ris_profile(), parse_mode(mode)?)
            .map(|inner| PyCodebook { inner })
            .map_err(to_py)
    }

    /// ES-labeled samples as `(features[n, L] float32, labels[n] uint32, es_rates[n] float32)`.
    #[pyo3(signature = (n, mode="practical", stream="train"))]
    fn generate_dataset<'py>(
        &self,
        py: Python<'py>,
        n: usize,
        mode: &str,
        stream: &str,
    ) -> PyResult<(Bound<'py, PyArray2<f32>>, Bound<'py, PyArray1<u32>>, Bound<'py, PyArray1<f32>>)> {
        let dom = if stream == "test" { domain::TEST } else { domain::TRAIN };
        let mode = parse_mode(mode)?;
        let cfg = self.inner.clone();
        let ds = py.detach(move || Dataset::generate(&cfg, mode, dom, n)).map_err(to_py)?;
        let w = ds.feature_len();
        let features = Array2::from_shape_vec((ds.len(), w), ds.features).expect("row-major features");
        Ok((features.into_pyarray(py), ds.labels.into_pyarray(py), ds.es_rates.into_pyarray(py)))
    }
}

/// One draw of the transmitter→RIS and RIS→receiver channels.
#[pyclass(name = "Channel", module = "ris_beamsel_py")]
struct PyChannel {
    inner: ChannelPair,
}

#[pymethods]
impl PyChannel {
    /// Transmitter→RIS channel, `N × N_t`.
    fn h_t<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<Complex64>> {
        complex_array(&self.inner.h_t).into_pyarray(py)
    }

    /// Conjugate-transposed RIS→receiver channel, `N_r × N`.
    fn h_r_herm<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<Complex64>> {
        complex_array(&self.inner.h_r_herm).into_pyarray(py)
    }

    /// Classifier input: real then imaginary parts of the composite matrix, column-major.
    fn features<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        feature_vector(&feature_matrix(&self.inner), 1.0).into_pyarray(py)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
}

#[pyclass(name = "Codebook", module = "ris_beamsel_py")]
struct PyCodebook {
    inner: ris_beamsel::Codebook,
}

#[pymethods]
impl PyCodebook {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.as_str()
    }

    #[getter]
    fn layout_hash(&self) -> u64 {
        self.inner.layout_hash()
    }

    /// All codewords as rows, `len × N`.
    fn codewords<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<Complex64>> {
        let n = self.inner.n_elements();
        Array2::from_shape_fn((self.inner.len(), n), |(i, k)| self.inner.codewords[i][k]).into_pyarray(py)
    }

    /// Rate of every codeword on `channel`.
    fn rates<'py>(&self, py: Python<'py>, channel: &PyChannel, config: &PyConfig) -> PyResult<Bound<'py, PyArray1<f64>>> {
        codeword_rates(&channel.inner, &self.inner, &config.inner.system)
            .map(|r| r.into_pyarray(py))
            .map_err(to_py)
    }

    /// Best codeword by exhaustive search: `(index, rate)`.
    fn exhaustive_search(&self, channel: &PyChannel, config: &PyConfig) -> PyResult<(usize, f64)> {
        exhaustive_search(&channel.inner, &self.inner, &config.inner.system)
            .map(|s| (s.codeword_index, s.rate_bps_hz))
            .map_err(to_py)
    }

    /// Uniformly random codeword: `(index, rate)`.
    fn random_select(&self, channel: &PyChannel, config: &PyConfig, seed: u64) -> PyResult<(usize, f64)> {
        random_select(&channel.inner, &self.inner, &config.inner.system, &mut SimRng::from_seed(seed))
            .map(|s| (s.codeword_index, s.rate_bps_hz))
            .map_err(to_py)
    }
}

/// A trained codeword classifier.
#[pyclass(name = "Model", module = "ris_beamsel_py")]
struct PyModel {
    inner: MlpModel,
}

#[pymethods]
impl PyModel {
    /// Loads a model file and checks it against `codebook`.
    #[staticmethod]
    fn load(path: PathBuf, codebook: &PyCodebook) -> PyResult<Self> {
        MlpModel::load(&path, &codebook.inner).map(|inner| PyModel { inner }).map_err(to_py)
    }

    /// Trains on freshly generated samples; `n_train`, epochs etc. come from `config`.
    #[staticmethod]
    #[pyo3(signature = (config, mode="practical"))]
    fn train(py: Python<'_>, config: &PyConfig, mode: &str) -> PyResult<Self> {
        let mode = parse_mode(mode)?;
        let cfg = config.inner.clone();
        py.detach(move || harness::train_classifier(&cfg, mode, |_| {}))
            .map(|(inner, _)| PyModel { inner })
            .map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    fn layer_widths(&self) -> Vec<usize> {
        self.inner.arch.layer_widths.clone()
    }

    /// `(label, probabilities)` for one unscaled feature vector.
    fn predict<'py>(&self, py: Python<'py>, features: PyReadonlyArray1<'py, f64>) -> PyResult<(usize, Bound<'py, PyArray1<f64>>)> {
        let x = features.as_slice().map_err(|e| PyValueError::new_err(e.to_string()))?;
        let (label, probs) = predict_codeword(&self.inner, x).map_err(to_py)?;
        Ok((label, probs.into_pyarray(py)))
    }

    /// Held-out rates: `{"es_rate", "dnn_rate", "random_rate", "accuracy", "count"}`.
    #[pyo3(signature = (config, mode="practical"))]
    fn evaluate(&self, py: Python<'_>, config: &PyConfig, mode: &str) -> PyResult<std::collections::HashMap<&'static str, f64>> {
        let mode = parse_mode(mode)?;
        let cfg = config.inner.clone();
        let s = py.detach(|| harness::evaluate_test_set(&cfg, mode, &self.inner)).map_err(to_py)?;
        Ok([
            ("es_rate", s.es_rate),
            ("dnn_rate", s.dnn_rate),
            ("random_rate", s.random_rate),
            ("accuracy", s.accuracy),
            ("count", s.count as f64),
        ]
        .into_iter()
        .collect())
    }
}

/// Reflection amplitude of a practical RIS element at phase `psi`.
#[pyfunction]
#[pyo3(signature = (psi, beta_min=0.2, alpha=1.6, psi_zero=0.43 * std::f64::consts::PI))]
fn amplitude(psi: f64, beta_min: f64, alpha: f64, psi_zero: f64) -> PyResult<f64> {
    let p = RisProfile { beta_min, alpha, psi_zero, n_h: 1, n_v: 1 };
    p.validate().map_err(to_py)?;
    Ok(amplitude_response(&p, psi))
}

#[pyfunction]
fn steering_vector<'py>(py: Python<'py>, n: usize, theta: f64) -> PyResult<Bound<'py, PyArray1<Complex64>>> {
    ris_beamsel::channel::steering_vector(n, theta)
        .map(|v| v.iter().copied().collect::<Vec<_>>().into_pyarray(py))
        .map_err(to_py)
}

#[pymodule]
fn ris_beamsel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyCodebook>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(steering_vector, m)?)?;
    Ok(())
}
