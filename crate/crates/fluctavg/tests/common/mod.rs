#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

use fluctavg::ensemble::{
    build_variance_profile, BandProfileSpec, Distribution, Ensemble, MatrixSample, Profile, SymmetryClass,
    VarianceMatrix,
};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `∫ ρ_sc(x) / (x - z) dx` with `x = 2 sin θ`, so the density becomes
/// `(2/π) cos²θ`; the trapezoid rule is spectrally accurate for this
/// periodic integrand.
pub fn m_quadrature(z: Complex64, points: usize) -> Complex64 {
    let h = std::f64::consts::PI / points as f64;
    let mut acc = c(0.0, 0.0);
    for k in 0..points {
        let theta = -std::f64::consts::FRAC_PI_2 + (k as f64 + 0.5) * h;
        let x = 2.0 * theta.sin();
        let density = 2.0 / std::f64::consts::PI * theta.cos().powi(2);
        acc += density / (c(x, 0.0) - z);
    }
    acc * h
}

pub fn band(side: usize, width: usize) -> VarianceMatrix {
    build_variance_profile(&BandProfileSpec::new(1, side, width, Profile::default())).unwrap()
}

/// Band profile without the `L^δ' ≤ W` and `N^δ ≤ M` floors, for tiny sizes.
pub fn small_band(side: usize, width: usize) -> VarianceMatrix {
    build_variance_profile(&BandProfileSpec {
        width_exponent: 0.0,
        band_exponent: 0.0,
        ..BandProfileSpec::new(1, side, width, Profile::default())
    })
    .unwrap()
}

pub fn ensemble(s: VarianceMatrix, class: SymmetryClass, seed: u64) -> Ensemble {
    Ensemble::new(s, class, Distribution::Gaussian, seed).unwrap()
}

pub fn sample(side: usize, width: usize, class: SymmetryClass, seed: u64, index: u64) -> MatrixSample {
    ensemble(small_band(side, width), class, seed).sample(index)
}

/// `(H - z)^{-1}` through nalgebra's dense LU, independent of the crate's solver.
pub fn dense_resolvent(h: &DMatrix<Complex64>, z: Complex64) -> DMatrix<Complex64> {
    let n = h.nrows();
    let a = h - DMatrix::<Complex64>::identity(n, n) * z;
    a.lu().try_inverse().expect("invertible")
}

/// Resolvent of the minor obtained by deleting `removed`, indexed by the
/// retained labels in increasing order.
pub fn dense_minor(h: &DMatrix<Complex64>, z: Complex64, removed: &[usize]) -> (Vec<usize>, DMatrix<Complex64>) {
    let keep: Vec<usize> = (0..h.nrows()).filter(|i| !removed.contains(i)).collect();
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |a, b| h[(keep[a], keep[b])]);
    let g = dense_resolvent(&sub, z);
    (keep, g)
}

pub fn zero_sample(side: usize, width: usize) -> MatrixSample {
    let mut s = sample(side, width, SymmetryClass::ComplexHermitian, 1, 0);
    s.h.fill(c(0.0, 0.0));
    s
}
