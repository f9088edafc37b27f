//! RIS amplitude response and DFT-grid codebooks.
//!
//! Codeword `(i, j)` steers the horizontal axis to `i·Q_h` and the vertical
//! axis to `j·Q_v` with `Q_h = 2π/N_h`, `Q_v = 2π/N_v`. Its class label is the
//! row-major flat index `i·N_v + j`, which the classifier relies on.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::steering_vector;
use crate::error::{Error, Result};

/// Phase-dependent reflection amplitude model of a RIS element.
#[derive(Debug, Clone, PartialEq)]
pub struct RisProfile {
    pub beta_min: f64,
    pub alpha: f64,
    pub psi_zero: f64,
    pub n_h: usize,
    pub n_v: usize,
}

impl RisProfile {
    /// Reference practical element: `β_min = 0.2`, `α = 1.6`, `ψ_0 = 0.43π`.
    pub fn practical(n_h: usize, n_v: usize) -> Self {
        RisProfile {
            beta_min: 0.2,
            alpha: 1.6,
            psi_zero: 0.43 * PI,
            n_h,
            n_v,
        }
    }

    pub fn ideal(n_h: usize, n_v: usize) -> Self {
        RisProfile {
            alpha: 0.0,
            ..Self::practical(n_h, n_v)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_min > 0.0 && self.beta_min <= 1.0) {
            return Err(Error::invalid(format!("beta_min must lie in (0, 1], got {}", self.beta_min)));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::invalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !self.psi_zero.is_finite() {
            return Err(Error::invalid("psi_zero must be finite"));
        }
        if self.n_h == 0 || self.n_v == 0 {
            return Err(Error::invalid("RIS must have at least one row and column"));
        }
        Ok(())
    }

    pub fn n_elements(&self) -> usize {
        self.n_h * self.n_v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookMode {
    Ideal,
    Practical,
}

impl CodebookMode {
    pub const ALL: [CodebookMode; 2] = [CodebookMode::Ideal, CodebookMode::Practical];

    pub fn as_str(self) -> &'static str {
        match self {
            CodebookMode::Ideal => "ideal",
            CodebookMode::Practical => "practical",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            CodebookMode::Ideal => 0,
            CodebookMode::Practical => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(CodebookMode::Ideal),
            1 => Ok(CodebookMode::Practical),
            other => Err(Error::format("codebook", format!("unknown mode tag {other}"))),
        }
    }
}

impl fmt::Display for CodebookMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CodebookMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ideal" => Ok(CodebookMode::Ideal),
            "practical" => Ok(CodebookMode::Practical),
            other => Err(Error::invalid(format!("unknown codebook mode '{other}' (ideal|practical)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub mode: CodebookMode,
    pub n_h: usize,
    pub n_v: usize,
    pub codewords: Vec<DVector<Complex64>>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn n_elements(&self) -> usize {
        self.n_h * self.n_v
    }

    /// Horizontal quantization step `2π/N_h`.
    pub fn q_h(&self) -> f64 {
        2.0 * PI / self.n_h as f64
    }

    /// Vertical quantization step `2π/N_v`.
    pub fn q_v(&self) -> f64 {
        2.0 * PI / self.n_v as f64
    }

    /// Class label of the codeword steering to `(i·Q_h, j·Q_v)`, both 0-based.
    pub fn flat_index(&self, i: usize, j: usize) -> usize {
        i * self.n_v + j
    }

    /// Deterministic binary layout: `mode:u8, n_h:u32, n_v:u32`, then every
    /// codeword element as little-endian `f64` real/imag pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + self.len() * self.n_elements() * 16);
        out.push(self.mode.tag());
        out.extend_from_slice(&(self.n_h as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_v as u32).to_le_bytes());
        for cw in &self.codewords {
            for z in cw.iter() {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 9 {
            return Err(Error::format("codebook", "truncated header"));
        }
        let mode = CodebookMode::from_tag(bytes[0])?;
        let n_h = u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize;
        let n_v = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let n = n_h * n_v;
        let body = &bytes[9..];
        if body.len() != n * n * 16 {
            return Err(Error::format(
                "codebook",
                format!("expected {} body bytes for {n_h}x{n_v}, found {}", n * n * 16, body.len()),
            ));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let codewords = (0..n)
            .map(|_| {
                DVector::from_iterator(
                    n,
                    (0..n).map(|_| Complex64::new(values.next().unwrap(), values.next().unwrap())),
                )
            })
            .collect();
        Ok(Codebook { mode, n_h, n_v, codewords })
    }

    /// Hash of the serialized codebook. Models record it so that a class label
    /// is never interpreted against a different codeword layout.
    pub fn layout_hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

/// Principal argument in `(−π, π]`.
pub fn wrap_phase(psi: f64) -> f64 {
    let mut p = psi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    if p <= -PI {
        p += 2.0 * PI;
    }
    p
}

/// `β(ψ) = (1 − β_min)((sin(ψ − ψ_0) + 1)/2)^α + β_min`.
pub fn amplitude_response(profile: &RisProfile, psi: f64) -> f64 {
    if profile.alpha == 0.0 {
        return 1.0;
    }
    let base = ((psi - profile.psi_zero).sin() + 1.0) / 2.0;
    (1.0 - profile.beta_min) * base.max(0.0).powf(profile.alpha) + profile.beta_min
}

pub fn build_ideal_codebook(profile: &RisProfile) -> Result<Codebook> {
    profile.validate()?;
    let (n_h, n_v) = (profile.n_h, profile.n_v);
    let q_h = 2.0 * PI / n_h as f64;
    let q_v = 2.0 * PI / n_v as f64;
    let mut codewords = Vec::with_capacity(n_h * n_v);
    for i in 0..n_h {
        let horizontal = steering_vector(n_h, i as f64 * q_h)?;
        for j in 0..n_v {
            let vertical = steering_vector(n_v, j as f64 * q_v)?;
            codewords.push(DVector::from_iterator(
                n_h * n_v,
                horizontal.iter().flat_map(|&h| vertical.iter().map(move |&v| h * v)),
            ));
        }
    }
    Ok(Codebook {
        mode: CodebookMode::Ideal,
        n_h,
        n_v,
        codewords,
    })
}

/// Ideal codewords scaled element-wise by the amplitude response of their phases.
pub fn build_practical_codebook(profile: &RisProfile) -> Result<Codebook> {
    let ideal = build_ideal_codebook(profile)?;
    let codewords = ideal
        .codewords
        .iter()
        .map(|p| p.map(|z| z * amplitude_response(profile, wrap_phase(z.arg()))))
        .collect();
    Ok(Codebook {
        mode: CodebookMode::Practical,
        codewords,
        ..ideal
    })
}

pub fn build_codebook(profile: &RisProfile, mode: CodebookMode) -> Result<Codebook> {
    match mode {
        CodebookMode::Ideal => build_ideal_codebook(profile),
        CodebookMode::Practical => build_practical_codebook(profile),
    }
}

/// `Ψ = diag(Φ)`.
pub fn ris_response_matrix(codeword: &DVector<Complex64>, n_elements: usize) -> Result<DMatrix<Complex64>> {
    if codeword.len() != n_elements {
        return Err(Error::invalid(format!(
            "codeword has {} elements, RIS has {n_elements}",
            codeword.len()
        )));
    }
    Ok(DMatrix::from_diagonal(codeword))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn amplitude_examples() {
        let mut p = RisProfile::practical(1, 1);
        assert!((amplitude_response(&p, p.psi_zero + PI / 2.0) - 1.0).abs() < 1e-15);
        let at_psi0 = amplitude_response(&p, p.psi_zero);
        assert!((at_psi0 - (0.2 + 0.8 * 2f64.powf(-1.6))).abs() < 1e-15);
        assert!((at_psi0 - 0.4639).abs() < 1e-4);
        assert!((amplitude_response(&p, p.psi_zero - PI / 2.0) - 0.2).abs() < 1e-15);

        p.alpha = 0.0;
        for psi in [-3.0, -1.0, 0.0, 2.0, PI] {
            assert_eq!(amplitude_response(&p, psi), 1.0);
        }
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_phase(-0.5 - 2.0 * PI) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_element_codebook() {
        let cb = build_ideal_codebook(&RisProfile::ideal(1, 1)).unwrap();
        assert_eq!(cb.len(), 1);
        assert!((cb.codewords[0][0] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_element_codebook() {
        let cb = build_ideal_codebook(&RisProfile::ideal(2, 1)).unwrap();
        assert_eq!(cb.len(), 2);
        let expect = [[c(1.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(-1.0, 0.0)]];
        for (cw, e) in cb.codewords.iter().zip(expect) {
            for (z, ez) in cw.iter().zip(e) {
                assert!((z - ez).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn ideal_codewords_are_orthogonal() {
        let cb = build_ideal_codebook(&RisProfile::ideal(9, 5)).unwrap();
        assert_eq!(cb.len(), 45);
        for (a, pa) in cb.codewords.iter().enumerate() {
            assert_eq!(pa.len(), 45);
            assert!(pa.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
            for (b, pb) in cb.codewords.iter().enumerate() {
                let inner: Complex64 = pa.iter().zip(pb.iter()).map(|(x, y)| x.conj() * y).sum();
                let expected = if a == b { 45.0 } else { 0.0 };
                assert!((inner.norm() - expected).abs() < 1e-11, "<{a},{b}> = {inner}");
            }
        }
    }

    #[test]
    fn ideal_codebook_spans_kronecker_dft_columns() {
        // Column (i, j) of DFT_Nh ⊗ DFT_Nv, built with integer exponents.
        let (n_h, n_v) = (4, 3);
        let cb = build_ideal_codebook(&RisProfile::ideal(n_h, n_v)).unwrap();
        for i in 0..n_h {
            for j in 0..n_v {
                let cw = &cb.codewords[cb.flat_index(i, j)];
                for ih in 0..n_h {
                    for iv in 0..n_v {
                        let phase = -2.0 * PI * (((ih * i) % n_h) as f64 / n_h as f64 + ((iv * j) % n_v) as f64 / n_v as f64);
                        let e = Complex64::from_polar(1.0, phase);
                        assert!((cw[ih * n_v + iv] - e).norm() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn practical_matches_ideal_when_alpha_zero() {
        let mut p = RisProfile::practical(9, 5);
        p.alpha = 0.0;
        let ideal = build_ideal_codebook(&p).unwrap();
        let prac = build_practical_codebook(&p).unwrap();
        assert_eq!(prac.mode, CodebookMode::Practical);
        assert_eq!(ideal.codewords, prac.codewords);
    }

    #[test]
    fn practical_two_element_example() {
        let p = RisProfile::practical(2, 1);
        let cb = build_practical_codebook(&p).unwrap();
        // β(0) and β(π) from the amplitude formula by hand.
        let beta0 = 0.8 * ((1.0 - (0.43 * PI).sin()) / 2.0).powf(1.6) + 0.2;
        let beta_pi = 0.8 * (((PI - 0.43 * PI).sin() + 1.0) / 2.0).powf(1.6) + 0.2;
        let cw = &cb.codewords[1];
        assert!((cw[0] - c(beta0, 0.0)).norm() < 1e-14);
        assert!((cw[1] - c(-beta_pi, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn practical_moduli_follow_their_phases() {
        let p = RisProfile::practical(9, 5);
        let cb = build_practical_codebook(&p).unwrap();
        for cw in &cb.codewords {
            for z in cw.iter() {
                let beta = amplitude_response(&p, wrap_phase(z.arg()));
                assert!((z.norm() - beta).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn response_matrix() {
        let v = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let m = ris_response_matrix(&v, 2).unwrap();
        assert_eq!(m[(0, 0)], c(1.0, 0.0));
        assert_eq!(m[(1, 1)], c(0.0, 1.0));
        assert_eq!(m[(0, 1)], c(0.0, 0.0));
        assert_eq!(m[(1, 0)], c(0.0, 0.0));

        let ones = DVector::from_element(4, c(1.0, 0.0));
        assert_eq!(ris_response_matrix(&ones, 4).unwrap(), DMatrix::identity(4, 4));
        assert!(matches!(ris_response_matrix(&ones, 5), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn serialization_round_trip_and_rejects_truncation() {
        let cb = build_practical_codebook(&RisProfile::practical(3, 2)).unwrap();
        let bytes = cb.to_bytes();
        assert_eq!(bytes.len(), 9 + 36 * 16);
        assert_eq!(Codebook::from_bytes(&bytes).unwrap(), cb);
        assert!(Codebook::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert_ne!(cb.layout_hash(), build_ideal_codebook(&RisProfile::ideal(3, 2)).unwrap().layout_hash());
    }

    proptest! {
        #[test]
        fn amplitude_bounded_and_periodic(psi in -10.0f64..10.0, beta_min in 0.01f64..1.0, alpha in 0.0f64..4.0, psi0 in -PI..PI) {
            let p = RisProfile { beta_min, alpha, psi_zero: psi0, n_h: 1, n_v: 1 };
            let b = amplitude_response(&p, psi);
            prop_assert!(b >= beta_min - 1e-15 && b <= 1.0 + 1e-15);
            prop_assert!((b - amplitude_response(&p, psi + 2.0 * PI)).abs() < 1e-12);
        }

        #[test]
        fn response_diagonal_round_trips(vals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..16)) {
            let v = DVector::from_iterator(vals.len(), vals.iter().map(|&(r, i)| c(r, i)));
            let m = ris_response_matrix(&v, vals.len()).unwrap();
            prop_assert_eq!(m.diagonal(), v);
        }
    }
}
