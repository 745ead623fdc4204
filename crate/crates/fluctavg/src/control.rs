//! Deterministic control parameters `ρ`, `Φ` and estimates of `Ψ`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::VarianceMatrix;
use crate::linalg::{inf_norm, SparseLu};
use crate::resolvent::{semicircle_m, ResolventError};
use crate::stats::quantile;

pub const MIN_EMPIRICAL_SAMPLES: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("1 - m^2 S is near-singular (smallest singular value {smallest_singular_value:e})")]
    NearSingular { smallest_singular_value: f64 },
    #[error("no spectral gap: delta_minus = {0:e}")]
    NoSpectralGap(f64),
    #[error("empirical psi needs at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("invalid control parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiSource {
    Ansatz,
    Empirical,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PsiMode {
    Ansatz,
    Empirical,
    User { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub band_size: f64,
    pub z: Complex64,
    pub m: Complex64,
    pub rho: f64,
    pub psi: f64,
    pub psi_source: PsiSource,
    pub phi: f64,
}

impl ControlParams {
    pub fn new(
        s: &VarianceMatrix,
        z: Complex64,
        psi: f64,
        psi_source: PsiSource,
    ) -> Result<Self, ControlError> {
        let m = semicircle_m(z)?;
        let rho = rho(s, z)?;
        let band_size = s.band_size();
        Ok(ControlParams {
            band_size,
            z,
            m,
            rho,
            psi,
            psi_source,
            phi: phi(psi, rho, band_size),
        })
    }

    /// Violated invariants, empty when all hold. `c` is the admissibility exponent.
    pub fn violations(&self, c: f64) -> Vec<String> {
        let mut out = Vec::new();
        let (lo, hi) = psi_window(self.band_size, c);
        let tol = 1e-12;
        if self.psi < lo * (1.0 - tol) || self.psi > hi * (1.0 + tol) {
            out.push(format!("psi={} outside [{lo}, {hi}]", self.psi));
        }
        if self.psi > 2.0 * self.phi * (1.0 + tol) || self.phi > 1.0 {
            out.push(format!("psi <= 2 phi <= 2 fails (psi={}, phi={})", self.psi, self.phi));
        }
        let floor = (Complex64::new(1.0, 0.0) - self.m * self.m).norm().recip();
        if floor > self.rho * (1.0 + tol) || floor < 0.5 * (1.0 - tol) {
            out.push(format!("1/2 <= 1/|1-m^2| <= rho fails (floor={floor}, rho={})", self.rho));
        }
        out
    }
}

fn stability_matrix(s: &VarianceMatrix, m: Complex64) -> DMatrix<Complex64> {
    let m2 = m * m;
    let n = s.n();
    DMatrix::from_fn(n, n, |i, j| {
        let v = -m2 * s.get(i, j);
        if i == j {
            v + 1.0
        } else {
            v
        }
    })
}

fn smallest_singular_value(a: &DMatrix<Complex64>) -> f64 {
    a.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// `(1 - m^2 S)^{-1}` by direct inversion.
pub fn stability_inverse(s: &VarianceMatrix, z: Complex64) -> Result<DMatrix<Complex64>, ControlError> {
    let m = semicircle_m(z)?;
    let a = stability_matrix(s, m);
    let inv = match SparseLu::factor(&a) {
        Ok(lu) => lu.inverse(),
        Err(_) => {
            return Err(ControlError::NearSingular {
                smallest_singular_value: smallest_singular_value(&a),
            })
        }
    };
    if !inv.iter().all(|v| v.re.is_finite() && v.im.is_finite()) || inf_norm(&inv) > 1e12 {
        return Err(ControlError::NearSingular {
            smallest_singular_value: smallest_singular_value(&a),
        });
    }
    Ok(inv)
}

/// `ρ = ||(1 - m^2 S)^{-1}||_{∞→∞}`.
pub fn rho(s: &VarianceMatrix, z: Complex64) -> Result<f64, ControlError> {
    Ok(inf_norm(&stability_inverse(s, z)?))
}

/// `Φ = min{ρ (Ψ + M^{-1/2} / Ψ), 1}`.
pub fn phi(psi: f64, rho: f64, band_size: f64) -> f64 {
    (rho * (psi + band_size.powf(-0.5) / psi)).min(1.0)
}

/// Admissibility window `[M^{-1/2}, M^{-c}]`.
pub fn psi_window(band_size: f64, c: f64) -> (f64, f64) {
    (band_size.powf(-0.5), band_size.powf(-c))
}

fn clamp_window(x: f64, band_size: f64, c: f64) -> f64 {
    let (lo, hi) = psi_window(band_size, c);
    x.max(lo).min(hi)
}

pub fn psi_ansatz(band_size: f64, eta: f64, c: f64) -> f64 {
    clamp_window((1.0 / (band_size * eta)).sqrt(), band_size, c)
}

/// `Ψ` according to `mode`; `lambdas` are sampled values of `Λ`.
pub fn estimate_psi(
    lambdas: &[f64],
    mode: PsiMode,
    q: f64,
    band_size: f64,
    eta: f64,
    c: f64,
) -> Result<(f64, PsiSource), ControlError> {
    if !(0.0 < c && c <= 0.5) {
        return Err(ControlError::Invalid(format!("c must lie in (0, 1/2], got {c}")));
    }
    match mode {
        PsiMode::Ansatz => Ok((psi_ansatz(band_size, eta, c), PsiSource::Ansatz)),
        PsiMode::Empirical => {
            if lambdas.len() < MIN_EMPIRICAL_SAMPLES {
                return Err(ControlError::TooFewSamples {
                    got: lambdas.len(),
                    need: MIN_EMPIRICAL_SAMPLES,
                });
            }
            Ok((clamp_window(quantile(lambdas, q), band_size, c), PsiSource::Empirical))
        }
        PsiMode::User { value } => {
            let (lo, hi) = psi_window(band_size, c);
            if !(value >= lo * (1.0 - 1e-12) && value <= hi * (1.0 + 1e-12)) {
                return Err(ControlError::Invalid(format!(
                    "user psi={value} is not admissible (window [{lo}, {hi}])"
                )));
            }
            Ok((value, PsiSource::User))
        }
    }
}

/// Eigenvalues of `S`, in increasing order. Band profiles use the exact
/// Fourier diagonalisation of the circulant kernel.
pub fn eigenvalues(s: &VarianceMatrix) -> Vec<f64> {
    let mut ev = if s.is_torus() {
        torus_eigenvalues(s)
    } else {
        SymmetricEigen::new(s.matrix().clone()).eigenvalues.iter().cloned().collect()
    };
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

fn torus_eigenvalues(s: &VarianceMatrix) -> Vec<f64> {
    let (side, dim, n) = (s.side(), s.dim(), s.n());
    let coords = |mut idx: usize| {
        let mut x = vec![0usize; dim];
        for c in x.iter_mut() {
            *c = idx % side;
            idx /= side;
        }
        x
    };
    let kernel: Vec<(Vec<usize>, f64)> = s.support(0).iter().map(|&j| (coords(j), s.get(0, j))).collect();
    let two_pi = 2.0 * std::f64::consts::PI / side as f64;
    (0..n)
        .map(|k| {
            let kk = coords(k);
            kernel
                .iter()
                .map(|(x, v)| {
                    let phase: usize = x.iter().zip(&kk).map(|(a, b)| a * b % side).sum();
                    v * (two_pi * (phase % side) as f64).cos()
                })
                .sum()
        })
        .collect()
}

/// `δ_- = 1 + λ_min(S)`.
pub fn spectral_gap(s: &VarianceMatrix) -> Result<f64, ControlError> {
    let delta = 1.0 + eigenvalues(s)[0];
    if delta <= 1e-12 {
        return Err(ControlError::NoSpectralGap(delta));
    }
    Ok(delta)
}

/// `log N / min{δ_-, (Im m)^2}`, the band bound on `ρ` without its constant.
pub fn rho_band_bound(n: usize, delta_minus: f64, m: Complex64) -> f64 {
    (n as f64).ln() / delta_minus.min(m.im * m.im)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoFit {
    /// Envelope constant `max ρ / bound`.
    pub constant: f64,
    pub coefficient_of_variation: f64,
    pub ratios: Vec<f64>,
}

/// Fits `C` in `ρ <= C · bound` from `(ρ, bound)` pairs.
pub fn fit_rho_constant(points: &[(f64, f64)]) -> RhoFit {
    let ratios: Vec<f64> = points.iter().map(|&(r, b)| r / b).collect();
    let constant = ratios.iter().cloned().fold(0.0, f64::max);
    let mu = crate::stats::mean(&ratios);
    RhoFit {
        constant,
        coefficient_of_variation: crate::stats::std_dev(&ratios) / mu,
        ratios,
    }
}

/// Truncated Neumann evaluation of `ρ` with its rigorous tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeumannCheck {
    pub terms: usize,
    pub partial_norm: f64,
    /// Contraction factor `max |1 + m^2 λ| / 2` over the spectrum of `S`.
    pub contraction: f64,
    pub tail_bound: f64,
}

impl NeumannCheck {
    pub fn brackets(&self, rho: f64) -> bool {
        (rho - self.partial_norm).abs() <= self.tail_bound * (1.0 + 1e-9) + 1e-12
    }
}

/// Writes `(1 - m^2 S)^{-1} = (1/2) Σ B^n` with `B = (1 + m^2 S) / 2` and sums
/// `terms` powers.
pub fn rho_neumann(s: &VarianceMatrix, z: Complex64, terms: usize) -> Result<NeumannCheck, ControlError> {
    let m = semicircle_m(z)?;
    let m2 = m * m;
    let n = s.n();
    let b = DMatrix::from_fn(n, n, |i, j| {
        let v = m2 * s.get(i, j) * 0.5;
        if i == j {
            v + 0.5
        } else {
            v
        }
    });
    let mut power = DMatrix::<Complex64>::identity(n, n);
    let mut sum = DMatrix::<Complex64>::zeros(n, n);
    for _ in 0..terms {
        sum += &power;
        power = &b * &power;
    }
    sum *= Complex64::new(0.5, 0.0);
    let contraction = eigenvalues(s)
        .iter()
        .map(|&l| (Complex64::new(1.0, 0.0) + m2 * l).norm() * 0.5)
        .fold(0.0, f64::max);
    let tail_bound = (n as f64).sqrt() * 0.5 * contraction.powi(terms as i32) / (1.0 - contraction);
    Ok(NeumannCheck {
        terms,
        partial_norm: inf_norm(&sum),
        contraction,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_branch() {
        assert_eq!(phi(0.5, 10.0, 100.0), 1.0);
    }

    #[test]
    fn ansatz_window() {
        let m = 256.0;
        assert!((psi_ansatz(m, 1.0 / m, 0.25) - m.powf(-0.25)).abs() < 1e-15);
        assert!((psi_ansatz(m, m.powf(-0.5), 0.25) - m.powf(-0.25)).abs() < 1e-12);
    }

    #[test]
    fn empirical_needs_samples() {
        let r = estimate_psi(&[0.1; 5], PsiMode::Empirical, 0.9, 16.0, 0.1, 0.25);
        assert!(matches!(r, Err(ControlError::TooFewSamples { got: 5, .. })));
    }
}
