//! Rician mmWave channel synthesis for the two RIS hops.
//!
//! The transmitter→RIS matrix `H_t` is `N × N_t` and the RIS→receiver matrix
//! `H_r^H` is `N_r × N`. Each is a sum of a line-of-sight term (path 0) and
//! `L` scattered terms, every term being the outer product of two steering
//! vectors, mixed by the Rician factor and scaled by the link path loss.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Horizontal RIS columns.
    pub n_h: usize,
    /// Vertical RIS rows.
    pub n_v: usize,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub antenna_spacing_over_wavelength: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            n_tx: 10,
            n_rx: 2,
            n_h: 9,
            n_v: 5,
            tx_power_dbm: 20.0,
            noise_power_dbm: -80.0,
            antenna_spacing_over_wavelength: 0.5,
        }
    }
}

impl SystemConfig {
    /// RIS element count `N = N_h · N_v`.
    pub fn n_elements(&self) -> usize {
        self.n_h * self.n_v
    }

    /// Transmit SNR `P/σ²` in linear units.
    pub fn snr_linear(&self) -> f64 {
        10f64.powf((self.tx_power_dbm - self.noise_power_dbm) / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_rx == 0 || self.n_h == 0 || self.n_v == 0 {
            return Err(Error::invalid(format!(
                "antenna counts must be >= 1 (n_tx={}, n_rx={}, n_h={}, n_v={})",
                self.n_tx, self.n_rx, self.n_h, self.n_v
            )));
        }
        if !(self.antenna_spacing_over_wavelength > 0.0) {
            return Err(Error::invalid(
                "antenna_spacing_over_wavelength must be positive",
            ));
        }
        if !self.tx_power_dbm.is_finite() || !self.noise_power_dbm.is_finite() {
            return Err(Error::invalid("power levels must be finite"));
        }
        Ok(())
    }

    /// Converts a physical angle to the steering phase `2π (d/λ) sin(angle)`.
    fn spatial_phase(&self, angle: f64) -> f64 {
        2.0 * PI * self.antenna_spacing_over_wavelength * angle.sin()
    }
}

/// Large-scale parameters of one hop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkGeometry {
    pub rician_k: f64,
    pub n_nlos_paths: usize,
    pub pathloss_exponent: f64,
    pub distance_m: f64,
    pub ref_pathloss_db: f64,
    pub ref_distance_m: f64,
    pub ris_gain_db: f64,
}

impl LinkGeometry {
    /// Transmitter→RIS hop at the reference scenario (10 m, exponent 2).
    pub fn tx_default() -> Self {
        LinkGeometry {
            rician_k: 10.0,
            n_nlos_paths: 2,
            pathloss_exponent: 2.0,
            distance_m: 10.0,
            ref_pathloss_db: -30.0,
            ref_distance_m: 1.0,
            ris_gain_db: 5.0,
        }
    }

    /// RIS→receiver hop at the reference scenario (30 m, exponent 2.8).
    pub fn rx_default() -> Self {
        LinkGeometry {
            pathloss_exponent: 2.8,
            distance_m: 30.0,
            ..Self::tx_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rician_k >= 0.0) {
            return Err(Error::invalid("rician_k must be >= 0"));
        }
        if !(self.distance_m > 0.0) {
            return Err(Error::invalid(format!(
                "distance_m must be positive, got {}",
                self.distance_m
            )));
        }
        if !(self.ref_distance_m > 0.0) {
            return Err(Error::invalid("ref_distance_m must be positive"));
        }
        if !self.pathloss_exponent.is_finite()
            || !self.ref_pathloss_db.is_finite()
            || !self.ris_gain_db.is_finite()
        {
            return Err(Error::invalid("path-loss parameters must be finite"));
        }
        Ok(())
    }
}

impl Default for LinkGeometry {
    fn default() -> Self {
        Self::tx_default()
    }
}

/// Angles and small-scale gains of every path of one hop.
///
/// Index 0 is the line-of-sight path. For the transmit hop `array` holds the
/// departure angle at the transmitter and `ris_azimuth`/`ris_elevation` the
/// arrival angles at the RIS; for the receive hop `array` is the arrival angle
/// at the receiver and the RIS angles are departure angles.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAngles {
    pub array: Vec<f64>,
    pub ris_azimuth: Vec<f64>,
    pub ris_elevation: Vec<f64>,
    /// Complex gains of the scattered paths `1..=L` (length `L`).
    pub nlos_gains: Vec<Complex64>,
}

impl PathAngles {
    pub fn n_nlos(&self) -> usize {
        self.nlos_gains.len()
    }

    fn check(&self, expected_nlos: usize) -> Result<()> {
        let paths = expected_nlos + 1;
        if self.array.len() != paths
            || self.ris_azimuth.len() != paths
            || self.ris_elevation.len() != paths
            || self.nlos_gains.len() != expected_nlos
        {
            return Err(Error::invalid(format!(
                "path angles sized for {} scattered paths, geometry expects {}",
                self.nlos_gains.len(),
                expected_nlos
            )));
        }
        Ok(())
    }
}

/// One realization of both hops.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    /// `N × N_t`
    pub h_t: DMatrix<Complex64>,
    /// `N_r × N`
    pub h_r_herm: DMatrix<Complex64>,
    pub angles_t: PathAngles,
    pub angles_r: PathAngles,
    pub seed: u64,
}

impl ChannelPair {
    pub fn n_elements(&self) -> usize {
        self.h_t.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h_t.ncols()
    }

    pub fn n_rx(&self) -> usize {
        self.h_r_herm.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.h_t.iter().chain(self.h_r_herm.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Multiplies both hops by `factor`.
    pub fn scaled(&self, factor: f64) -> ChannelPair {
        ChannelPair {
            h_t: self.h_t.map(|z| z * factor),
            h_r_herm: self.h_r_herm.map(|z| z * factor),
            ..self.clone()
        }
    }
}

/// `a_n(θ) = [1, e^{-jθ}, …, e^{-j(n-1)θ}]`.
pub fn steering_vector(n: usize, theta: f64) -> Result<DVector<Complex64>> {
    if n == 0 {
        return Err(Error::invalid("steering vector length must be >= 1"));
    }
    Ok(DVector::from_iterator(
        n,
        (0..n).map(|k| Complex64::from_polar(1.0, -(k as f64) * theta)),
    ))
}

/// Linear power gain of one hop, including the RIS gain.
pub fn path_loss_linear(geom: &LinkGeometry) -> Result<f64> {
    if !(geom.distance_m > 0.0) || !(geom.ref_distance_m > 0.0) {
        return Err(Error::invalid(format!(
            "path loss needs positive distances (d={}, D0={})",
            geom.distance_m, geom.ref_distance_m
        )));
    }
    let db = geom.ref_pathloss_db
        - 10.0 * geom.pathloss_exponent * (geom.distance_m / geom.ref_distance_m).log10()
        + geom.ris_gain_db;
    Ok(10f64.powf(db / 10.0))
}

/// Draws `L + 1` angle triples uniform on `[0, π]` and `L` gains from `CN(0, 1/L)`.
pub fn sample_path_angles<R: Rng + ?Sized>(rng: &mut R, n_nlos: usize) -> PathAngles {
    let paths = n_nlos + 1;
    let mut array = Vec::with_capacity(paths);
    let mut ris_azimuth = Vec::with_capacity(paths);
    let mut ris_elevation = Vec::with_capacity(paths);
    for _ in 0..paths {
        array.push(rng.random_range(0.0..=PI));
        ris_azimuth.push(rng.random_range(0.0..=PI));
        ris_elevation.push(rng.random_range(0.0..=PI));
    }
    let nlos_gains = if n_nlos == 0 {
        Vec::new()
    } else {
        let sigma = (0.5 / n_nlos as f64).sqrt();
        (0..n_nlos)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * sigma, im * sigma)
            })
            .collect()
    };
    PathAngles {
        array,
        ris_azimuth,
        ris_elevation,
        nlos_gains,
    }
}

fn kron(a: &DVector<Complex64>, b: &DVector<Complex64>) -> DVector<Complex64> {
    DVector::from_iterator(
        a.len() * b.len(),
        a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)),
    )
}

/// Per-path weights `sqrt(K/(K+1))` for LoS and `sqrt(1/(K+1)) z_ℓ` for the rest.
fn rician_weights(k: f64, gains: &[Complex64]) -> Vec<Complex64> {
    let (los, nlos) = if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    };
    std::iter::once(Complex64::new(los, 0.0))
        .chain(gains.iter().map(|&z| z * nlos))
        .collect()
}

/// Transmitter→RIS channel `H_t` (`N × N_t`).
pub fn tx_channel(
    config: &SystemConfig,
    geom: &LinkGeometry,
    angles: &PathAngles,
) -> Result<DMatrix<Complex64>> {
    config.validate()?;
    angles.check(geom.n_nlos_paths)?;
    let amplitude = path_loss_linear(geom)?.sqrt();
    let weights = rician_weights(geom.rician_k, &angles.nlos_gains);

    let n = config.n_elements();
    let mut h = DMatrix::<Complex64>::zeros(n, config.n_tx);
    for (path, w) in weights.iter().enumerate() {
        let phi_h = config.spatial_phase(angles.ris_azimuth[path]);
        let phi_v = config.spatial_phase(angles.ris_elevation[path]);
        let theta = config.spatial_phase(angles.array[path]);
        // [a_Nh(φh) ⊗ a_Nv(φv)]^H as a column, a_Nt(θ) as a row.
        let ris = kron(&steering_vector(config.n_h, phi_h)?, &steering_vector(config.n_v, phi_v)?)
            .map(|z| z.conj());
        let tx = steering_vector(config.n_tx, theta)?;
        h += (ris * tx.transpose()) * *w;
    }
    Ok(h * Complex64::new(amplitude, 0.0))
}

/// RIS→receiver channel `H_r^H` (`N_r × N`).
///
/// The RIS factor uses the Kronecker order `a_Nv ⊗ a_Nh` and the horizontal
/// phase carries a `cos(elevation)` factor; the transmit side has neither.
pub fn rx_channel(
    config: &SystemConfig,
    geom: &LinkGeometry,
    angles: &PathAngles,
) -> Result<DMatrix<Complex64>> {
    config.validate()?;
    angles.check(geom.n_nlos_paths)?;
    let amplitude = path_loss_linear(geom)?.sqrt();
    let weights = rician_weights(geom.rician_k, &angles.nlos_gains);
    let spacing = config.antenna_spacing_over_wavelength;

    let n = config.n_elements();
    let mut h = DMatrix::<Complex64>::zeros(config.n_rx, n);
    for (path, w) in weights.iter().enumerate() {
        let elevation = angles.ris_elevation[path];
        let phi_v = config.spatial_phase(elevation);
        let phi_h = 2.0 * PI * spacing * elevation.cos() * angles.ris_azimuth[path].sin();
        let theta = config.spatial_phase(angles.array[path]);
        let rx = steering_vector(config.n_rx, theta)?.map(|z| z.conj());
        let ris = kron(&steering_vector(config.n_v, phi_v)?, &steering_vector(config.n_h, phi_h)?);
        h += (rx * ris.transpose()) * *w;
    }
    Ok(h * Complex64::new(amplitude, 0.0))
}

/// Draws both hops from `rng`: transmit-hop angles and gains first, then receive-hop.
pub fn sample_channel_pair(
    config: &SystemConfig,
    geom_t: &LinkGeometry,
    geom_r: &LinkGeometry,
    rng: &mut SimRng,
) -> Result<ChannelPair> {
    let seed = rng.seed();
    let angles_t = sample_path_angles(rng, geom_t.n_nlos_paths);
    let angles_r = sample_path_angles(rng, geom_r.n_nlos_paths);
    build_channel_pair(config, geom_t, geom_r, angles_t, angles_r, seed)
}

/// Builds a pair from given angles, e.g. to re-evaluate one draw at another distance.
pub fn build_channel_pair(
    config: &SystemConfig,
    geom_t: &LinkGeometry,
    geom_r: &LinkGeometry,
    angles_t: PathAngles,
    angles_r: PathAngles,
    seed: u64,
) -> Result<ChannelPair> {
    let h_t = tx_channel(config, geom_t, &angles_t)?;
    let h_r_herm = rx_channel(config, geom_r, &angles_r)?;
    Ok(ChannelPair {
        h_t,
        h_r_herm,
        angles_t,
        angles_r,
        seed,
    })
}
