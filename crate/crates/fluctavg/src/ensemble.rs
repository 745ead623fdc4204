//! Band-matrix variance profiles and seeded Hermitian samples.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("invalid profile geometry: {0}")]
    Geometry(String),
    #[error("profile vanishes on every lattice point (L={side}, W={width})")]
    ZeroProfile { side: usize, width: usize },
    #[error("variance matrix rejected: {0}")]
    Matrix(String),
    #[error("distribution {dist:?} is not available for the {class:?} class")]
    UnsupportedDistribution {
        dist: Distribution,
        class: SymmetryClass,
    },
    #[error("row index {index} out of range for N={n}")]
    IndexOutOfRange { index: usize, n: usize },
}

/// Bounded symmetric density used to shape the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Profile {
    /// Constant `(2r)^{-1}` on `[-r, r]` per coordinate.
    Step { half_width: f64 },
    /// `(1 - |x|/r)_+ / r` per coordinate.
    Triangular { half_width: f64 },
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Step { half_width: 0.5 }
    }
}

impl Profile {
    fn eval_1d(&self, x: f64) -> f64 {
        match *self {
            Profile::Step { half_width: r } => {
                if x.abs() <= r {
                    0.5 / r
                } else {
                    0.0
                }
            }
            Profile::Triangular { half_width: r } => ((1.0 - x.abs() / r) / r).max(0.0),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| self.eval_1d(xi)).product()
    }

    pub fn sup_norm(&self, dim: usize) -> f64 {
        let one = match *self {
            Profile::Step { half_width: r } => 0.5 / r,
            Profile::Triangular { half_width: r } => 1.0 / r,
        };
        one.powi(dim as i32)
    }

    fn validate(&self) -> Result<(), EnsembleError> {
        let r = match *self {
            Profile::Step { half_width } | Profile::Triangular { half_width } => half_width,
        };
        if !(r.is_finite() && r > 0.0) {
            return Err(EnsembleError::Geometry(format!(
                "profile half width must be positive, got {r}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandProfileSpec {
    pub dim: usize,
    pub side: usize,
    pub width: usize,
    #[serde(default)]
    pub profile: Profile,
    /// Lower bound exponent in `L^δ' <= W`.
    #[serde(default = "default_exponent")]
    pub width_exponent: f64,
    /// Lower bound exponent in `N^δ <= M`.
    #[serde(default = "default_exponent")]
    pub band_exponent: f64,
}

fn default_exponent() -> f64 {
    0.3
}

impl BandProfileSpec {
    pub fn new(dim: usize, side: usize, width: usize, profile: Profile) -> Self {
        BandProfileSpec {
            dim,
            side,
            width,
            profile,
            width_exponent: default_exponent(),
            band_exponent: default_exponent(),
        }
    }

    pub fn size(&self) -> usize {
        self.side.pow(self.dim as u32)
    }
}

/// Canonical representative of `k` in `[-L/2, L/2)`.
pub fn torus_rep(k: i64, side: usize) -> i64 {
    let l = side as i64;
    let h = l / 2;
    (k + h).rem_euclid(l) - h
}

fn lattice_point(mut index: usize, side: usize, dim: usize) -> Vec<i64> {
    let mut x = vec![0; dim];
    for c in x.iter_mut() {
        *c = (index % side) as i64;
        index /= side;
    }
    x
}

/// Doubly stochastic symmetric variance matrix `S` with band geometry.
#[derive(Debug, Clone)]
pub struct VarianceMatrix {
    s: DMatrix<f64>,
    support: Vec<Vec<usize>>,
    band_size: f64,
    side: usize,
    width: usize,
    dim: usize,
    torus: bool,
}

impl VarianceMatrix {
    /// Wraps an arbitrary symmetric, nonnegative, row-stochastic matrix.
    pub fn from_matrix(s: DMatrix<f64>) -> Result<Self, EnsembleError> {
        let n = s.nrows();
        if n == 0 || s.ncols() != n {
            return Err(EnsembleError::Matrix("S must be square and nonempty".into()));
        }
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let v = s[(i, j)];
                if !(v >= 0.0) {
                    return Err(EnsembleError::Matrix(format!("s[{i},{j}] = {v} is negative")));
                }
                if v != s[(j, i)] {
                    return Err(EnsembleError::Matrix(format!("S is not symmetric at ({i},{j})")));
                }
                row += v;
            }
            if (row - 1.0).abs() > 1e-12 {
                return Err(EnsembleError::Matrix(format!("row {i} sums to {row}")));
            }
        }
        let max = s.iter().cloned().fold(0.0, f64::max);
        let support = (0..n)
            .map(|i| (0..n).filter(|&j| s[(i, j)] > 0.0).collect())
            .collect();
        Ok(VarianceMatrix {
            s,
            support,
            band_size: 1.0 / max,
            side: n,
            width: n,
            dim: 1,
            torus: false,
        })
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[(i, j)]
    }

    /// `M = 1 / max s_ij`.
    pub fn band_size(&self) -> f64 {
        self.band_size
    }

    /// Column indices `j` with `s_ij > 0`, in increasing order.
    pub fn support(&self, i: usize) -> &[usize] {
        &self.support[i]
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when `S` was built from a translation-invariant kernel on `(Z/LZ)^d`.
    pub fn is_torus(&self) -> bool {
        self.torus
    }

    pub fn max_row_error(&self) -> f64 {
        (0..self.n())
            .map(|i| (self.s.row(i).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn build_variance_profile(spec: &BandProfileSpec) -> Result<VarianceMatrix, EnsembleError> {
    let BandProfileSpec {
        dim, side, width, ..
    } = *spec;
    if dim == 0 || side == 0 || width == 0 {
        return Err(EnsembleError::Geometry(format!(
            "d, L, W must be positive (d={dim}, L={side}, W={width})"
        )));
    }
    if width > side {
        return Err(EnsembleError::Geometry(format!("W={width} exceeds L={side}")));
    }
    if (width as f64) < (side as f64).powf(spec.width_exponent) {
        return Err(EnsembleError::Geometry(format!(
            "W={width} is below L^{}={:.3}",
            spec.width_exponent,
            (side as f64).powf(spec.width_exponent)
        )));
    }
    spec.profile.validate()?;
    let n = spec.size();
    let w = width as f64;

    // The kernel depends only on the torus displacement, so one row fixes Z_L.
    let kernel: Vec<f64> = (0..n)
        .map(|j| {
            let x: Vec<f64> = lattice_point(j, side, dim)
                .into_iter()
                .map(|c| torus_rep(c, side) as f64 / w)
                .collect();
            spec.profile.eval(&x)
        })
        .collect();
    let z: f64 = kernel.iter().sum();
    if z <= 0.0 {
        return Err(EnsembleError::ZeroProfile { side, width });
    }

    let points: Vec<Vec<i64>> = (0..n).map(|i| lattice_point(i, side, dim)).collect();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut offset = 0usize;
            let mut stride = 1usize;
            for c in 0..dim {
                let d = (points[i][c] - points[j][c]).rem_euclid(side as i64) as usize;
                offset += d * stride;
                stride *= side;
            }
            s[(i, j)] = kernel[offset] / z;
        }
    }
    let max = kernel.iter().cloned().fold(0.0, f64::max) / z;
    let band_size = 1.0 / max;
    if band_size < (n as f64).powf(spec.band_exponent) || band_size > n as f64 * (1.0 + 1e-12) {
        return Err(EnsembleError::Geometry(format!(
            "M={band_size:.3} outside [N^{}, N] for N={n}",
            spec.band_exponent
        )));
    }
    let support = (0..n)
        .map(|i| (0..n).filter(|&j| s[(i, j)] > 0.0).collect())
        .collect();
    Ok(VarianceMatrix {
        s,
        support,
        band_size,
        side,
        width,
        dim,
        torus: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    RealSymmetric,
    ComplexHermitian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    Rademacher,
}

impl Distribution {
    /// `E|ζ|^4` for off-diagonal entries of the given class.
    pub fn fourth_moment(&self, class: SymmetryClass) -> f64 {
        match (self, class) {
            (Distribution::Gaussian, SymmetryClass::RealSymmetric) => 3.0,
            (Distribution::Gaussian, SymmetryClass::ComplexHermitian) => 2.0,
            (Distribution::Rademacher, _) => 1.0,
        }
    }
}

/// Sampling recipe shared by all samples of one ensemble.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub profile: Arc<VarianceMatrix>,
    pub class: SymmetryClass,
    pub dist: Distribution,
    pub base_seed: u64,
}

impl Ensemble {
    pub fn new(
        profile: VarianceMatrix,
        class: SymmetryClass,
        dist: Distribution,
        base_seed: u64,
    ) -> Result<Self, EnsembleError> {
        if dist == Distribution::Rademacher && class == SymmetryClass::ComplexHermitian {
            return Err(EnsembleError::UnsupportedDistribution { dist, class });
        }
        Ok(Ensemble {
            profile: Arc::new(profile),
            class,
            dist,
            base_seed,
        })
    }

    pub fn n(&self) -> usize {
        self.profile.n()
    }

    pub fn sample(&self, index: u64) -> MatrixSample {
        let n = self.n();
        let mut rng = EntryStream::new(self.base_seed, mix(&[index]));
        let mut h = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for &j in self.profile.support(i) {
                if j < i {
                    continue;
                }
                let v = rng.entry(self, i, j);
                h[(i, j)] = v;
                h[(j, i)] = v.conj();
            }
        }
        MatrixSample {
            ensemble: self.clone(),
            index,
            h,
        }
    }

    /// Fresh values `h_{a j}` for every `a` in `rows` and `j` in the support of `a`.
    ///
    /// Entries joining two resampled rows are drawn once, so the result is
    /// Hermitian-consistent. The stream depends only on `(sample, round, rows)`.
    pub fn draw_rows(&self, sample: u64, round: u64, rows: &[usize]) -> Vec<Vec<(usize, Complex64)>> {
        let mut key: Vec<u64> = vec![sample, round.wrapping_add(1)];
        let mut sorted = rows.to_vec();
        sorted.sort_unstable();
        key.extend(sorted.iter().map(|&r| r as u64));
        let mut rng = EntryStream::new(self.base_seed, mix(&key));
        // sequential draws in sorted row order; an entry joining two rows is
        // drawn with the smaller row and reused by the larger one
        let mut by_row: Vec<Vec<(usize, Complex64)>> = Vec::with_capacity(sorted.len());
        for (k, &a) in sorted.iter().enumerate() {
            let row = self
                .profile
                .support(a)
                .iter()
                .map(|&j| match sorted[..k].binary_search(&j) {
                    Ok(p) => {
                        let v = by_row[p].iter().find(|e| e.0 == a).expect("symmetric support").1;
                        (j, v.conj())
                    }
                    Err(_) => (j, rng.next_entry(self, a, j)),
                })
                .collect();
            by_row.push(row);
        }
        rows.iter()
            .map(|a| by_row[sorted.binary_search(a).expect("row present")].clone())
            .collect()
    }
}

/// Splitmix-style fold used to derive independent ChaCha streams.
pub fn mix(words: &[u64]) -> u64 {
    let mut x: u64 = 0x9E37_79B9_7F4A_7C15;
    for &w in words {
        x ^= w.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(x << 6).wrapping_add(x >> 2);
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x = z ^ (z >> 31);
    }
    x
}

const WORDS_PER_ENTRY: u128 = 4;

struct EntryStream {
    rng: ChaCha8Rng,
}

impl EntryStream {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        EntryStream { rng }
    }

    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    /// Draws `h_ij` for `i <= j` from a position fixed by `(i, j)` alone.
    fn entry(&mut self, ens: &Ensemble, i: usize, j: usize) -> Complex64 {
        let n = ens.n() as u128;
        self.rng
            .set_word_pos((i as u128 * n + j as u128) * WORDS_PER_ENTRY);
        self.next_entry(ens, i, j)
    }

    /// Draws `h_ij` from the current stream position.
    fn next_entry(&mut self, ens: &Ensemble, i: usize, j: usize) -> Complex64 {
        let zeta = match ens.dist {
            Distribution::Rademacher => {
                let bit = self.rng.next_u64() & 1;
                Complex64::new(if bit == 0 { 1.0 } else { -1.0 }, 0.0)
            }
            Distribution::Gaussian => {
                let u1 = self.uniform();
                let u2 = self.uniform();
                let r = (-2.0 * u1.ln()).sqrt();
                let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
                match ens.class {
                    SymmetryClass::ComplexHermitian if i != j => {
                        Complex64::new(r * c, r * s) * std::f64::consts::FRAC_1_SQRT_2
                    }
                    _ => Complex64::new(r * c, 0.0),
                }
            }
        };
        zeta * ens.profile.get(i, j).sqrt()
    }
}

/// One draw of `H`, tagged with the ensemble and sample index that produced it.
#[derive(Debug, Clone)]
pub struct MatrixSample {
    pub ensemble: Ensemble,
    pub index: u64,
    pub h: DMatrix<Complex64>,
}

impl MatrixSample {
    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn profile(&self) -> &VarianceMatrix {
        &self.ensemble.profile
    }
}

pub fn sample_matrix(ensemble: &Ensemble, index: u64) -> MatrixSample {
    ensemble.sample(index)
}

/// Copy of `sample` with rows and columns in `indices` redrawn.
pub fn resample_rows(
    sample: &MatrixSample,
    indices: &[usize],
    round: u64,
) -> Result<MatrixSample, EnsembleError> {
    let n = sample.n();
    if let Some(&bad) = indices.iter().find(|&&a| a >= n) {
        return Err(EnsembleError::IndexOutOfRange { index: bad, n });
    }
    let mut h = sample.h.clone();
    let rows = sample.ensemble.draw_rows(sample.index, round, indices);
    for (&a, row) in indices.iter().zip(rows) {
        for (j, v) in row {
            h[(a, j)] = v;
            h[(j, a)] = v.conj();
        }
    }
    Ok(MatrixSample {
        ensemble: sample.ensemble.clone(),
        index: sample.index,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_representatives() {
        assert_eq!(torus_rep(2, 4), -2);
        assert_eq!(torus_rep(-2, 4), -2);
        assert_eq!(torus_rep(3, 4), -1);
        assert_eq!(torus_rep(2, 5), 2);
        assert_eq!(torus_rep(3, 5), -2);
    }

    #[test]
    fn small_torus_is_uniform() {
        let spec = BandProfileSpec::new(1, 4, 4, Profile::default());
        let s = build_variance_profile(&spec).unwrap();
        for v in s.matrix().iter() {
            assert!((v - 0.25).abs() < 1e-15);
        }
        assert!((s.band_size() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rademacher_requires_real_class() {
        let s = build_variance_profile(&BandProfileSpec::new(1, 8, 4, Profile::default())).unwrap();
        let err = Ensemble::new(s, SymmetryClass::ComplexHermitian, Distribution::Rademacher, 1);
        assert!(matches!(err, Err(EnsembleError::UnsupportedDistribution { .. })));
    }

    #[test]
    fn sample_is_hermitian_with_real_diagonal() {
        let s = build_variance_profile(&BandProfileSpec::new(1, 16, 8, Profile::default())).unwrap();
        let e = Ensemble::new(s, SymmetryClass::ComplexHermitian, Distribution::Gaussian, 7).unwrap();
        let h = e.sample(3).h;
        for i in 0..16 {
            assert_eq!(h[(i, i)].im, 0.0);
            for j in 0..16 {
                assert_eq!(h[(i, j)], h[(j, i)].conj());
            }
        }
    }
}
