//! Training, evaluation sweeps and the decision-latency benchmark.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::dataset::Dataset;
use crate::channel::{build_channel_pair, sample_channel_pair, sample_path_angles, ChannelPair, SystemConfig};
use crate::codebook::{build_codebook, Codebook, CodebookMode};
use crate::error::{Error, Result};
use crate::mlp::{self, MlpArchitecture, MlpModel, TrainingLog, TrainingSet};
use crate::precoding::{exhaustive_search, feature_matrix, feature_vector, random_select, rms_feature_scale, select_codeword};
use crate::rng::{domain, stream_seed, SimRng};

pub const ELEMENTS_HEADER: &str = "N,mode,es_rate,dnn_rate,random_rate";
pub const DISTANCE_HEADER: &str = "d_r,mode,es_rate,dnn_rate,random_rate,dnn_over_es";
pub const BENCHMARK_HEADER: &str = "N,es_seconds,dnn_seconds,speedup,dnn_over_es_rate";

/// Where trained models live: `<dir>/model_<mode>_N<N>.rism`.
#[derive(Debug, Clone)]
pub struct ModelStore {
    pub dir: PathBuf,
}

impl ModelStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ModelStore { dir: dir.into() }
    }

    pub fn path(&self, mode: CodebookMode, n_elements: usize) -> PathBuf {
        self.dir.join(format!("model_{mode}_N{n_elements}.rism"))
    }
}

/// Input width and class count follow from the array sizes.
pub fn classifier_architecture(system: &SystemConfig) -> MlpArchitecture {
    MlpArchitecture::codeword_classifier(crate::precoding::feature_len(system), system.n_elements())
}

/// A freshly initialized classifier whose input scale is calibrated on `data`.
pub fn new_classifier<T: TrainingSet + ?Sized>(cfg: &ExperimentConfig, codebook: &Codebook, data: &T) -> Result<MlpModel> {
    let mut rng = SimRng::substream(cfg.experiment.master_seed, domain::TRAINING, 1 + cfg.system.n_elements() as u64);
    let mut model = MlpModel::new(classifier_architecture(&cfg.system), &mut rng)?;
    let n_cal = cfg.experiment.calibration_samples.clamp(1, data.len().max(1)).min(data.len());
    let mut buf = vec![0.0; data.feature_width()];
    let mut values = Vec::with_capacity(n_cal * buf.len());
    for i in 0..n_cal {
        data.write_features(i, &mut buf);
        values.extend_from_slice(&buf);
    }
    model.feature_scale = rms_feature_scale(values)?;
    model.label_layout_hash = codebook.layout_hash();
    Ok(model)
}

/// Generates a training set for `mode` and trains a classifier on it.
pub fn train_classifier(
    cfg: &ExperimentConfig,
    mode: CodebookMode,
    progress: impl FnMut(&mlp::EpochRecord),
) -> Result<(MlpModel, TrainingLog)> {
    let data = Dataset::generate(cfg, mode, domain::TRAIN, cfg.experiment.n_train)?;
    train_on(cfg, mode, &data, progress)
}

pub fn train_on(
    cfg: &ExperimentConfig,
    mode: CodebookMode,
    data: &Dataset,
    progress: impl FnMut(&mlp::EpochRecord),
) -> Result<(MlpModel, TrainingLog)> {
    let codebook = build_codebook(&cfg.ris_profile(), mode)?;
    if data.header.mode != mode || data.feature_len() != crate::precoding::feature_len(&cfg.system) {
        return Err(Error::invalid(format!(
            "dataset ({} codebook, feature length {}) does not match the configured system",
            data.header.mode,
            data.feature_len()
        )));
    }
    let mut model = new_classifier(cfg, &codebook, data)?;
    let log = mlp::train_with_progress(&mut model, data, &cfg.training, progress)?;
    Ok((model, log))
}

/// Loads the model for `(mode, N)`, training and caching it if allowed.
pub fn obtain_model(cfg: &ExperimentConfig, mode: CodebookMode, store: &ModelStore) -> Result<MlpModel> {
    let codebook = build_codebook(&cfg.ris_profile(), mode)?;
    let path = store.path(mode, cfg.system.n_elements());
    if path.exists() {
        return MlpModel::load(&path, &codebook);
    }
    if !cfg.experiment.train_missing_models {
        return Err(Error::Missing(format!(
            "no trained model at {} (run `train` or set train_missing_models = true)",
            path.display()
        )));
    }
    let (model, _) = train_classifier(cfg, mode, |_| {})?;
    fs::create_dir_all(&store.dir).map_err(|e| Error::io(&store.dir, e))?;
    model.save(&path)?;
    Ok(model)
}

/// Rates of the three selection schemes on one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub es_label: usize,
    pub dnn_label: usize,
    pub es_rate: f64,
    pub dnn_rate: f64,
    pub random_rate: f64,
}

pub fn evaluate_realization(
    pair: &ChannelPair,
    codebook: &Codebook,
    model: &MlpModel,
    system: &SystemConfig,
    selection_rng: &mut SimRng,
) -> Result<Outcome> {
    let es = exhaustive_search(pair, codebook, system)?;
    let (dnn_label, _) = mlp::predict_codeword(model, &feature_vector(&feature_matrix(pair), 1.0))?;
    let dnn = select_codeword(pair, codebook, dnn_label, system)?;
    let random = random_select(pair, codebook, system, selection_rng)?;
    if dnn.rate_bps_hz > es.rate_bps_hz || random.rate_bps_hz > es.rate_bps_hz {
        return Err(Error::invalid(format!(
            "exhaustive search beaten on realization {:#x}: es {} dnn {} random {}",
            pair.seed, es.rate_bps_hz, dnn.rate_bps_hz, random.rate_bps_hz
        )));
    }
    Ok(Outcome {
        es_label: es.codeword_index,
        dnn_label,
        es_rate: es.rate_bps_hz,
        dnn_rate: dnn.rate_bps_hz,
        random_rate: random.rate_bps_hz,
    })
}

/// Means over a set of realizations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateSummary {
    pub count: usize,
    pub es_rate: f64,
    pub dnn_rate: f64,
    pub random_rate: f64,
    /// Fraction of realizations where the classifier picked the ES codeword.
    pub accuracy: f64,
}

impl RateSummary {
    pub fn from_outcomes(outcomes: &[Outcome]) -> Self {
        let n = outcomes.len();
        if n == 0 {
            return RateSummary::default();
        }
        let mean = |f: fn(&Outcome) -> f64| outcomes.iter().map(f).sum::<f64>() / n as f64;
        RateSummary {
            count: n,
            es_rate: mean(|o| o.es_rate),
            dnn_rate: mean(|o| o.dnn_rate),
            random_rate: mean(|o| o.random_rate),
            accuracy: outcomes.iter().filter(|o| o.es_label == o.dnn_label).count() as f64 / n as f64,
        }
    }

    pub fn dnn_over_es(&self) -> f64 {
        if self.es_rate > 0.0 {
            self.dnn_rate / self.es_rate
        } else {
            0.0
        }
    }
}

/// Evaluates `n` realizations in parallel; `make_pair(i)` builds realization `i`.
pub fn evaluate_many<F>(
    n: usize,
    codebook: &Codebook,
    model: &MlpModel,
    system: &SystemConfig,
    selection_seed: impl Fn(usize) -> u64 + Sync,
    make_pair: F,
) -> Result<Vec<Outcome>>
where
    F: Fn(usize) -> Result<ChannelPair> + Sync,
{
    model.check_codebook(codebook)?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let pair = make_pair(i)?;
            let mut rng = SimRng::from_seed(selection_seed(i));
            evaluate_realization(&pair, codebook, model, system, &mut rng)
        })
        .collect()
}

/// Held-out evaluation on `n_test` fresh realizations from the test stream.
pub fn evaluate_test_set(cfg: &ExperimentConfig, mode: CodebookMode, model: &MlpModel) -> Result<RateSummary> {
    let codebook = build_codebook(&cfg.ris_profile(), mode)?;
    let master = cfg.experiment.master_seed;
    let outcomes = evaluate_many(
        cfg.experiment.n_test,
        &codebook,
        model,
        &cfg.system,
        |i| stream_seed(master, domain::SELECTION, i as u64),
        |i| {
            let mut rng = SimRng::substream(master, domain::TEST, i as u64);
            sample_channel_pair(&cfg.system, &cfg.geometry_t, &cfg.geometry_r, &mut rng)
        },
    )?;
    Ok(RateSummary::from_outcomes(&outcomes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementsRow {
    pub n_elements: usize,
    pub mode: CodebookMode,
    pub summary: RateSummary,
}

/// Rate against RIS size. Modes share channel draws at each size.
pub fn run_rate_vs_elements(cfg: &ExperimentConfig, store: &ModelStore) -> Result<Vec<ElementsRow>> {
    let e = &cfg.experiment;
    if e.sweep_n_h.is_empty() || e.sweep_modes.is_empty() {
        return Err(Error::invalid("sweep_n_h and sweep_modes must be non-empty"));
    }
    let mut rows = Vec::new();
    for (point, &n_h) in e.sweep_n_h.iter().enumerate() {
        let point_cfg = cfg.with_n_h(n_h);
        point_cfg.validate()?;
        for &mode in &e.sweep_modes {
            let model = obtain_model(&point_cfg, mode, store)?;
            let codebook = build_codebook(&point_cfg.ris_profile(), mode)?;
            let index = |i: usize| ((point as u64) << 32) | i as u64;
            let outcomes = evaluate_many(
                e.sweep_realizations,
                &codebook,
                &model,
                &point_cfg.system,
                |i| stream_seed(e.master_seed, domain::SELECTION, index(i)),
                |i| {
                    let mut rng = SimRng::substream(e.master_seed, domain::SWEEP_ELEMENTS, index(i));
                    sample_channel_pair(&point_cfg.system, &point_cfg.geometry_t, &point_cfg.geometry_r, &mut rng)
                },
            )?;
            rows.push(ElementsRow {
                n_elements: point_cfg.system.n_elements(),
                mode,
                summary: RateSummary::from_outcomes(&outcomes),
            });
        }
    }
    Ok(rows)
}

pub fn elements_csv(rows: &[ElementsRow]) -> String {
    let mut s = format!("{ELEMENTS_HEADER}\n");
    for r in rows {
        let m = &r.summary;
        writeln!(s, "{},{},{:.6},{:.6},{:.6}", r.n_elements, r.mode, m.es_rate, m.dnn_rate, m.random_rate).unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub distance_m: f64,
    pub mode: CodebookMode,
    pub summary: RateSummary,
}

/// Evaluates one model per mode, trained at the configured receiver distance,
/// across the distance sweep. Realization `i` keeps its angles and gains at
/// every distance, so only the path loss changes along a row of the sweep.
pub fn run_rate_vs_distance_with(
    cfg: &ExperimentConfig,
    mode: CodebookMode,
    model: &MlpModel,
) -> Result<Vec<DistanceRow>> {
    let e = &cfg.experiment;
    if e.sweep_distances_m.is_empty() {
        return Err(Error::invalid("sweep_distances_m must be non-empty"));
    }
    let codebook = build_codebook(&cfg.ris_profile(), mode)?;
    let mut rows = Vec::new();
    for &d in &e.sweep_distances_m {
        let mut geom_r = cfg.geometry_r.clone();
        geom_r.distance_m = d;
        let outcomes = evaluate_many(
            e.sweep_realizations,
            &codebook,
            model,
            &cfg.system,
            |i| stream_seed(e.master_seed, domain::SELECTION, i as u64),
            |i| {
                let mut rng = SimRng::substream(e.master_seed, domain::SWEEP_DISTANCE, i as u64);
                let angles_t = sample_path_angles(&mut rng, cfg.geometry_t.n_nlos_paths);
                let angles_r = sample_path_angles(&mut rng, geom_r.n_nlos_paths);
                build_channel_pair(&cfg.system, &cfg.geometry_t, &geom_r, angles_t, angles_r, rng.seed())
            },
        )?;
        rows.push(DistanceRow {
            distance_m: d,
            mode,
            summary: RateSummary::from_outcomes(&outcomes),
        });
    }
    Ok(rows)
}

pub fn run_rate_vs_distance(cfg: &ExperimentConfig, store: &ModelStore) -> Result<Vec<DistanceRow>> {
    if cfg.experiment.sweep_modes.is_empty() {
        return Err(Error::invalid("sweep_modes must be non-empty"));
    }
    let mut rows = Vec::new();
    for &mode in &cfg.experiment.sweep_modes {
        let model = obtain_model(cfg, mode, store)?;
        rows.extend(run_rate_vs_distance_with(cfg, mode, &model)?);
    }
    Ok(rows)
}

pub fn distance_csv(rows: &[DistanceRow]) -> String {
    let mut s = format!("{DISTANCE_HEADER}\n");
    for r in rows {
        let m = &r.summary;
        writeln!(
            s,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            r.distance_m,
            r.mode,
            m.es_rate,
            m.dnn_rate,
            m.random_rate,
            m.dnn_over_es()
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub n_elements: usize,
    pub es_seconds: f64,
    pub dnn_seconds: f64,
    pub dnn_over_es_rate: f64,
}

impl TimingRow {
    pub fn speedup(&self) -> f64 {
        self.es_seconds / self.dnn_seconds
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Median over batches of the mean per-call time of `decide`.
fn time_batches<T>(pairs: &[ChannelPair], warmup: usize, batches: usize, batch: usize, mut decide: impl FnMut(&ChannelPair) -> Result<T>) -> Result<f64> {
    for pair in pairs.iter().cycle().take(warmup) {
        std::hint::black_box(decide(pair)?);
    }
    let mut means = Vec::with_capacity(batches);
    for chunk in pairs.chunks(batch).take(batches) {
        let start = Instant::now();
        for pair in chunk {
            std::hint::black_box(decide(pair)?);
        }
        means.push(start.elapsed().as_secs_f64() / chunk.len() as f64);
    }
    Ok(median(means))
}

/// Per-decision latency of exhaustive search and of the classifier on the
/// same realizations, single-threaded.
///
/// An ES decision evaluates the effective channel and its SVD for every
/// codeword. A classifier decision assembles the feature vector and runs one
/// forward pass.
pub fn time_decisions(cfg: &ExperimentConfig, codebook: &Codebook, model: &MlpModel) -> Result<TimingRow> {
    let e = &cfg.experiment;
    model.check_codebook(codebook)?;
    let n = e.timing_batches * e.timing_batch_size;
    let pairs = (0..n)
        .map(|i| {
            let mut rng = SimRng::substream(e.master_seed, domain::BENCHMARK, i as u64);
            sample_channel_pair(&cfg.system, &cfg.geometry_t, &cfg.geometry_r, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let (batches, size) = (e.timing_batches, e.timing_batch_size);
    let es_seconds = time_batches(&pairs, e.timing_warmup, batches, size, |p| exhaustive_search(p, codebook, &cfg.system))?;
    let dnn_seconds = time_batches(&pairs, e.timing_warmup, batches, size, |p| {
        mlp::predict_codeword(model, &feature_vector(&feature_matrix(p), 1.0))
    })?;

    let (mut es_sum, mut dnn_sum) = (0.0, 0.0);
    for p in &pairs {
        es_sum += exhaustive_search(p, codebook, &cfg.system)?.rate_bps_hz;
        let (label, _) = mlp::predict_codeword(model, &feature_vector(&feature_matrix(p), 1.0))?;
        dnn_sum += select_codeword(p, codebook, label, &cfg.system)?.rate_bps_hz;
    }
    Ok(TimingRow {
        n_elements: cfg.system.n_elements(),
        es_seconds,
        dnn_seconds,
        dnn_over_es_rate: if es_sum > 0.0 { dnn_sum / es_sum } else { 0.0 },
    })
}

pub fn run_timing_benchmark(cfg: &ExperimentConfig, store: &ModelStore) -> Result<Vec<TimingRow>> {
    let mode = cfg.experiment.codebook_mode;
    let mut rows = Vec::new();
    for &n_h in &cfg.experiment.sweep_n_h {
        let point_cfg = cfg.with_n_h(n_h);
        point_cfg.validate()?;
        let model = obtain_model(&point_cfg, mode, store)?;
        let codebook = build_codebook(&point_cfg.ris_profile(), mode)?;
        rows.push(time_decisions(&point_cfg, &codebook, &model)?);
    }
    Ok(rows)
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut s = format!("{BENCHMARK_HEADER}\n");
    for r in rows {
        writeln!(
            s,
            "{},{:.9},{:.9},{:.4},{:.6}",
            r.n_elements,
            r.es_seconds,
            r.dnn_seconds,
            r.speedup(),
            r.dnn_over_es_rate
        )
        .unwrap();
    }
    s
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.system.n_tx = 4;
        cfg.system.n_h = 3;
        cfg.system.n_v = 2;
        cfg.experiment.n_train = 200;
        cfg.experiment.n_test = 40;
        cfg.experiment.sweep_n_h = vec![2, 3];
        cfg.experiment.sweep_distances_m = vec![10.0, 30.0, 50.0];
        cfg.experiment.sweep_realizations = 30;
        cfg.experiment.timing_batches = 3;
        cfg.experiment.timing_batch_size = 4;
        cfg.experiment.timing_warmup = 2;
        cfg.experiment.calibration_samples = 50;
        cfg.training.max_epochs = 2;
        cfg.training.batch_size = 50;
        cfg
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn es_dominates_every_scheme() {
        let cfg = tiny();
        let (model, _) = train_classifier(&cfg, CodebookMode::Practical, |_| {}).unwrap();
        let s = evaluate_test_set(&cfg, CodebookMode::Practical, &model).unwrap();
        assert_eq!(s.count, 40);
        assert!(s.es_rate >= s.dnn_rate && s.es_rate >= s.random_rate);
        assert!((0.0..=1.0).contains(&s.dnn_over_es()));
    }

    #[test]
    fn distance_sweep_rows_and_order() {
        let cfg = tiny();
        let (model, _) = train_classifier(&cfg, CodebookMode::Ideal, |_| {}).unwrap();
        let rows = run_rate_vs_distance_with(&cfg, CodebookMode::Ideal, &model).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.windows(2).all(|w| w[1].summary.es_rate < w[0].summary.es_rate));
        let csv = distance_csv(&rows);
        assert!(csv.starts_with(DISTANCE_HEADER));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn missing_model_is_descriptive_when_training_disabled() {
        let mut cfg = tiny();
        cfg.experiment.train_missing_models = false;
        let dir = tempfile::tempdir().unwrap();
        let err = run_rate_vs_elements(&cfg, &ModelStore::new(dir.path())).unwrap_err();
        assert!(err.to_string().contains("model_ideal_N4.rism"), "{err}");
    }

    #[test]
    fn elements_sweep_trains_and_caches_models() {
        let cfg = tiny();
        let dir = tempfile::tempdir().unwrap();
        let store = ModelStore::new(dir.path());
        let rows = run_rate_vs_elements(&cfg, &store).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(store.path(CodebookMode::Practical, 6).exists());
        let again = run_rate_vs_elements(&cfg, &store).unwrap();
        assert_eq!(elements_csv(&rows), elements_csv(&again));
    }

    #[test]
    fn timing_rows_are_positive() {
        let cfg = tiny();
        let codebook = build_codebook(&cfg.ris_profile(), CodebookMode::Practical).unwrap();
        let mut model = MlpModel::new(classifier_architecture(&cfg.system), &mut SimRng::from_seed(1)).unwrap();
        model.label_layout_hash = codebook.layout_hash();
        let row = time_decisions(&cfg, &codebook, &model).unwrap();
        assert!(row.es_seconds > 0.0 && row.dnn_seconds > 0.0);
        assert!(row.dnn_over_es_rate > 0.0 && row.dnn_over_es_rate <= 1.0);
        assert_eq!(timing_csv(&[row]).lines().next().unwrap(), BENCHMARK_HEADER);
    }
}
