//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DVector;
use ndarray::Array2;
use ris_beamsel::mlp::MlpModel;
use ris_beamsel::{ChannelPair, Complex64, SystemConfig};

/// `H_r^H diag(φ) H_t` by explicit triple loop, as nested rows.
pub fn naive_effective(pair: &ChannelPair, phi: &DVector<Complex64>) -> Vec<Vec<Complex64>> {
    let (n_rx, n_tx, n) = (pair.h_r_herm.nrows(), pair.h_t.ncols(), phi.len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n_tx]; n_rx];
    for (r, row) in out.iter_mut().enumerate() {
        for (m, entry) in row.iter_mut().enumerate() {
            for k in 0..n {
                *entry += pair.h_r_herm[(r, k)] * phi[k] * pair.h_t[(k, m)];
            }
        }
    }
    out
}

/// Eigenvalues of the Gram matrix `H H^H` in closed form (one or two receive antennas).
///
/// The determinant comes from the Cauchy–Binet sum of 2×2 minors, so a
/// rank-one `H` yields a second eigenvalue at rounding level of `λ₁ ε²`
/// rather than `λ₁ ε`.
pub fn gram_eigenvalues(h: &[Vec<Complex64>]) -> Vec<f64> {
    let power = |row: &[Complex64]| row.iter().map(|z| z.norm_sqr()).sum::<f64>();
    match h.len() {
        1 => vec![power(&h[0])],
        2 => {
            let (a, d) = (power(&h[0]), power(&h[1]));
            let b = h[0].iter().zip(&h[1]).map(|(x, y)| x * y.conj()).sum::<Complex64>().norm();
            let mut det = 0.0;
            for i in 0..h[0].len() {
                for j in i + 1..h[0].len() {
                    det += (h[0][i] * h[1][j] - h[0][j] * h[1][i]).norm_sqr();
                }
            }
            let top = 0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt();
            vec![top, if top > 0.0 { det / top } else { 0.0 }]
        }
        n => panic!("closed form covers at most 2 rows, got {n}"),
    }
}

/// Rate with equal power over the streams above the relative rank threshold.
pub fn oracle_rate(h: &[Vec<Complex64>], config: &SystemConfig) -> f64 {
    let eig = gram_eigenvalues(h);
    let top = eig.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    // Singular values above 1e-10 × the largest, i.e. eigenvalues above 1e-20 × the largest.
    let kept: Vec<f64> = eig.into_iter().filter(|&l| l > 1e-20 * top).collect();
    let rho = config.snr_linear() / kept.len() as f64;
    kept.iter().map(|l| (1.0 + rho * l).log2()).sum()
}

/// Mean cross-entropy of a training-mode forward pass, written with plain loops.
pub fn naive_train_loss(model: &MlpModel, x: &Array2<f64>, labels: &[usize]) -> f64 {
    let probs = naive_train_probabilities(model, x);
    let b = x.nrows();
    labels.iter().enumerate().map(|(i, &l)| -probs[i][l].max(1e-12).ln()).sum::<f64>() / b as f64
}

pub fn naive_train_probabilities(model: &MlpModel, x: &Array2<f64>) -> Vec<Vec<f64>> {
    let b = x.nrows();
    let eps = model.arch.batchnorm_epsilon;
    let slope = model.arch.leaky_slope;
    let mut act: Vec<Vec<f64>> = (0..b).map(|i| x.row(i).to_vec()).collect();
    for layer in &model.hidden {
        let (n_in, n_out) = layer.weight.dim();
        let mut z = vec![vec![0.0; n_out]; b];
        for i in 0..b {
            for j in 0..n_out {
                let mut s = layer.bias[j];
                for k in 0..n_in {
                    s += act[i][k] * layer.weight[(k, j)];
                }
                z[i][j] = s;
            }
        }
        for j in 0..n_out {
            let mean = (0..b).map(|i| z[i][j]).sum::<f64>() / b as f64;
            let var = (0..b).map(|i| (z[i][j] - mean).powi(2)).sum::<f64>() / b as f64;
            for row in z.iter_mut() {
                let y = layer.gamma[j] * (row[j] - mean) / (var + eps).sqrt() + layer.beta[j];
                row[j] = if y > 0.0 { y } else { slope * y };
            }
        }
        act = z;
    }
    let (n_in, n_out) = model.output.weight.dim();
    act.iter()
        .map(|a| {
            let logits: Vec<f64> = (0..n_out)
                .map(|j| model.output.bias[j] + (0..n_in).map(|k| a[k] * model.output.weight[(k, j)]).sum::<f64>())
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            logits.iter().map(|l| (l - max).exp() / z).collect()
        })
        .collect()
}

/// Central finite differences of [`naive_train_loss`] for every parameter,
/// in [`MlpModel::parameters_mut`] order.
pub fn finite_difference_gradients(model: &MlpModel, x: &Array2<f64>, labels: &[usize], step: f64) -> Vec<Vec<f64>> {
    let mut probe = model.clone();
    let sizes: Vec<usize> = probe.parameters_mut().iter().map(|t| t.len()).collect();
    let mut grads = Vec::with_capacity(sizes.len());
    for (t, &len) in sizes.iter().enumerate() {
        let mut g = Vec::with_capacity(len);
        for k in 0..len {
            let original = probe.parameters_mut()[t][k];
            probe.parameters_mut()[t][k] = original + step;
            let up = naive_train_loss(&probe, x, labels);
            probe.parameters_mut()[t][k] = original - step;
            let down = naive_train_loss(&probe, x, labels);
            probe.parameters_mut()[t][k] = original;
            g.push((up - down) / (2.0 * step));
        }
        grads.push(g);
    }
    grads
}

/// Largest `|a − n| / max(|a|, |n|, floor)` over all entries.
pub fn max_relative_error(analytic: &[&[f64]], numeric: &[Vec<f64>], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        assert_eq!(a.len(), n.len());
        for (&x, &y) in a.iter().zip(n) {
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(floor));
        }
    }
    worst
}
