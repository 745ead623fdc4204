//! Resolvents of `H` and its minors, the semicircle transform, and the
//! algebraic identities relating them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::MatrixSample;
use crate::linalg::{LinalgError, SparseLu};

#[derive(Debug, Error, PartialEq)]
pub enum ResolventError {
    #[error("spectral parameter must have Im z > 0, got {0}")]
    NotInUpperHalfPlane(Complex64),
    #[error("index {index} out of range for N={n}")]
    OutOfRange { index: usize, n: usize },
    #[error("index clash: {0}")]
    IndexClash(String),
    #[error("solver failure: {0}")]
    Solver(#[from] LinalgError),
    #[error("every index is removed by the minor")]
    EmptyMinor,
}

/// Spectral parameter together with the domain it is meant to live in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub energy: f64,
    pub eta: f64,
    /// `η >= M^{-1+γ}` defines the spectral domain.
    pub gamma: f64,
    /// Bulk window `|E| <= 2 - κ`.
    pub kappa: f64,
}

impl SpectralPoint {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.energy, self.eta)
    }

    pub fn in_domain(&self, band_size: f64) -> bool {
        let floor = band_size.powf(-1.0 + self.gamma);
        (-10.0..=10.0).contains(&self.energy) && self.eta >= floor && self.eta <= 10.0
    }

    pub fn in_bulk(&self) -> bool {
        self.energy.abs() <= 2.0 - self.kappa
    }
}

/// Stieltjes transform of the semicircle law: the root of `m^2 + z m + 1 = 0`
/// with positive imaginary part.
pub fn semicircle_m(z: Complex64) -> Result<Complex64, ResolventError> {
    if !(z.im > 0.0) {
        return Err(ResolventError::NotInUpperHalfPlane(z));
    }
    let d = (z * z - 4.0).sqrt();
    let r1 = (-z + d) * 0.5;
    let r2 = (-z - d) * 0.5;
    // The roots multiply to 1; take the larger one directly and invert it to
    // avoid cancellation in the smaller one.
    let big = if r1.norm() >= r2.norm() { r1 } else { r2 };
    let small = big.inv();
    Ok(if big.im > 0.0 { big } else { small })
}

/// Resolvent of a minor `H^{(T)}`, indexed by original labels.
#[derive(Debug, Clone)]
pub struct ResolventTable {
    z: Complex64,
    m: Complex64,
    minor: Vec<usize>,
    retained: Vec<usize>,
    position: Vec<Option<usize>>,
    g: DMatrix<Complex64>,
    lambda: f64,
}

impl ResolventTable {
    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn m(&self) -> Complex64 {
        self.m
    }

    pub fn minor(&self) -> &[usize] {
        &self.minor
    }

    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn contains(&self, i: usize) -> bool {
        self.position.get(i).is_some_and(|p| p.is_some())
    }

    /// `G^{(T)}_ij`; panics if `i` or `j` lies in `T`.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let a = self.position[i].expect("row index removed by the minor");
        let b = self.position[j].expect("column index removed by the minor");
        self.g[(a, b)]
    }

    /// `G_ij - δ_ij m`.
    pub fn deviation(&self, i: usize, j: usize) -> Complex64 {
        let v = self.get(i, j);
        if i == j {
            v - self.m
        } else {
            v
        }
    }

    /// Local matrix over the retained indices, in increasing label order.
    pub fn local(&self) -> &DMatrix<Complex64> {
        &self.g
    }

    /// `Λ^{(T)} = max |G_ij - δ_ij m|`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn max_entry(&self) -> f64 {
        self.g.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |((H^{(T)} - z) G^{(T)} - 1)_ij|` by direct multiplication.
    pub fn residual(&self, h: &DMatrix<Complex64>) -> f64 {
        let a = minor_matrix(h, &self.retained, self.z);
        let prod = a * &self.g;
        let mut worst: f64 = 0.0;
        for i in 0..prod.nrows() {
            for j in 0..prod.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - want).norm());
            }
        }
        worst
    }
}

fn minor_matrix(h: &DMatrix<Complex64>, retained: &[usize], z: Complex64) -> DMatrix<Complex64> {
    let r = retained.len();
    DMatrix::from_fn(r, r, |a, b| {
        let v = h[(retained[a], retained[b])];
        if a == b {
            v - z
        } else {
            v
        }
    })
}

fn check_range(n: usize, indices: &[usize]) -> Result<(), ResolventError> {
    match indices.iter().find(|&&i| i >= n) {
        Some(&index) => Err(ResolventError::OutOfRange { index, n }),
        None => Ok(()),
    }
}

/// `G^{(T)}(z)` by a fresh solve of the minor.
pub fn resolvent(
    h: &DMatrix<Complex64>,
    z: Complex64,
    minor: &[usize],
) -> Result<ResolventTable, ResolventError> {
    let n = h.nrows();
    check_range(n, minor)?;
    let m = semicircle_m(z)?;
    let mut removed = vec![false; n];
    for &t in minor {
        removed[t] = true;
    }
    let retained: Vec<usize> = (0..n).filter(|&i| !removed[i]).collect();
    if retained.is_empty() {
        return Err(ResolventError::EmptyMinor);
    }
    let mut position = vec![None; n];
    for (p, &i) in retained.iter().enumerate() {
        position[i] = Some(p);
    }
    let a = minor_matrix(h, &retained, z);
    let g = SparseLu::factor(&a)?.inverse();
    let mut lambda: f64 = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let v = if i == j { g[(i, j)] - m } else { g[(i, j)] };
            lambda = lambda.max(v.norm());
        }
    }
    let mut minor: Vec<usize> = minor.to_vec();
    minor.sort_unstable();
    minor.dedup();
    Ok(ResolventTable {
        z,
        m,
        minor,
        retained,
        position,
        g,
        lambda,
    })
}

fn with(minor: &[usize], extra: &[usize]) -> Vec<usize> {
    let mut t = minor.to_vec();
    t.extend_from_slice(extra);
    t.sort_unstable();
    t.dedup();
    t
}

/// `|a - b| / max(1, largest term)`.
pub fn relative_residual(lhs: Complex64, rhs: Complex64, terms: &[Complex64]) -> f64 {
    let scale = terms
        .iter()
        .chain([lhs, rhs].iter())
        .map(|t| t.norm())
        .fold(1.0, f64::max);
    (lhs - rhs).norm() / scale
}

fn ensure_outside(minor: &[usize], idx: &[(&str, usize)]) -> Result<(), ResolventError> {
    for &(name, i) in idx {
        if minor.contains(&i) {
            return Err(ResolventError::IndexClash(format!("{name}={i} lies in the minor set")));
        }
    }
    Ok(())
}

/// Residuals of the two single-index expansion identities
/// `G_ij = G^{(k)}_ij + G_ik G_kj / G_kk` and
/// `1/G_ii = 1/G^{(k)}_ii - G_ik G_ki / (G_ii G^{(k)}_ii G_kk)`, relative to
/// the minor `T`.
pub fn verify_family_a(
    sample: &MatrixSample,
    z: Complex64,
    i: usize,
    j: usize,
    k: usize,
    minor: &[usize],
) -> Result<(f64, f64), ResolventError> {
    let h = &sample.h;
    check_range(h.nrows(), &[i, j, k])?;
    ensure_outside(minor, &[("i", i), ("j", j), ("k", k)])?;
    if k == i || k == j {
        return Err(ResolventError::IndexClash(format!("k={k} must differ from i={i} and j={j}")));
    }
    let g = resolvent(h, z, minor)?;
    let gk = resolvent(h, z, &with(minor, &[k]))?;

    let t1 = gk.get(i, j);
    let t2 = g.get(i, k) * g.get(k, j) / g.get(k, k);
    let first = relative_residual(g.get(i, j), t1 + t2, &[t1, t2]);

    let lhs = g.get(i, i).inv();
    let a = gk.get(i, i).inv();
    let b = g.get(i, k) * g.get(k, i) / (g.get(i, i) * gk.get(i, i) * g.get(k, k));
    let second = relative_residual(lhs, a - b, &[a, b]);
    Ok((first, second))
}

/// Residuals of the row-expansion identities (both orientations), the
/// two-sided expansion, and the `1/G_ii` expansion through `Z` and `U`.
pub fn verify_family_b(
    sample: &MatrixSample,
    z: Complex64,
    i: usize,
    j: usize,
    minor: &[usize],
) -> Result<[f64; 3], ResolventError> {
    let h = &sample.h;
    check_range(h.nrows(), &[i, j])?;
    ensure_outside(minor, &[("i", i), ("j", j)])?;
    if i == j {
        return Err(ResolventError::IndexClash(format!("i and j must differ (both {i})")));
    }
    let g = resolvent(h, z, minor)?;
    let gi = resolvent(h, z, &with(minor, &[i]))?;
    let gj = resolvent(h, z, &with(minor, &[j]))?;
    let gij = resolvent(h, z, &with(minor, &[i, j]))?;

    let mut left = Complex64::new(0.0, 0.0);
    for &k in gi.retained() {
        left += h[(i, k)] * gi.get(k, j);
    }
    let left = -g.get(i, i) * left;
    let mut right = Complex64::new(0.0, 0.0);
    for &k in gj.retained() {
        right += gj.get(i, k) * h[(k, j)];
    }
    let right = -g.get(j, j) * right;
    let single = relative_residual(g.get(i, j), left, &[left])
        .max(relative_residual(g.get(i, j), right, &[right]));

    let mut quad = Complex64::new(0.0, 0.0);
    for &k in gij.retained() {
        let hik = h[(i, k)];
        if hik == Complex64::new(0.0, 0.0) {
            continue;
        }
        for &l in gij.retained() {
            quad += hik * gij.get(k, l) * h[(l, j)];
        }
    }
    let pre = g.get(i, i) * gi.get(j, j);
    let double_rhs = pre * (-h[(i, j)] + quad);
    let double = relative_residual(g.get(i, j), double_rhs, &[pre * h[(i, j)], pre * quad]);

    let (zi, ui) = compute_z_u(sample, z, i, minor, &with(minor, &[i]))?;
    let m = g.m();
    let lhs = g.get(i, i).inv();
    let rhs = m.inv() - (-h[(i, i)] + zi + ui);
    let diag = relative_residual(lhs, rhs, &[m.inv(), h[(i, i)], zi, ui]);
    Ok([single, double, diag])
}

/// Residual of `1/G_ii = h_ii - z - sum_{k,l} h_ik G^{(i)}_kl h_li` on the minor `T`.
pub fn verify_schur(
    sample: &MatrixSample,
    z: Complex64,
    i: usize,
    minor: &[usize],
) -> Result<f64, ResolventError> {
    let h = &sample.h;
    check_range(h.nrows(), &[i])?;
    ensure_outside(minor, &[("i", i)])?;
    let g = resolvent(h, z, minor)?;
    let quad = if minor.len() + 1 == h.nrows() {
        Complex64::new(0.0, 0.0)
    } else {
        quadratic_form(h, &resolvent(h, z, &with(minor, &[i]))?, i)
    };
    let rhs = h[(i, i)] - z - quad;
    Ok(relative_residual(g.get(i, i).inv(), rhs, &[h[(i, i)], z, quad]))
}

fn quadratic_form(h: &DMatrix<Complex64>, gi: &ResolventTable, i: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &k in gi.retained() {
        let hik = h[(i, k)];
        if hik == Complex64::new(0.0, 0.0) {
            continue;
        }
        let mut row = Complex64::new(0.0, 0.0);
        for &l in gi.retained() {
            row += gi.get(k, l) * h[(l, i)];
        }
        acc += hik * row;
    }
    acc
}

/// `Z_i^{(T)}` (fluctuating part of the Schur quadratic form) and `U_i^{(S)}`.
pub fn compute_z_u(
    sample: &MatrixSample,
    z: Complex64,
    i: usize,
    minor: &[usize],
    s_set: &[usize],
) -> Result<(Complex64, Complex64), ResolventError> {
    let h = &sample.h;
    let s = sample.profile();
    check_range(h.nrows(), &[i])?;
    check_range(h.nrows(), s_set)?;
    ensure_outside(minor, &[("i", i)])?;
    let m = semicircle_m(z)?;
    let ti = with(minor, &[i]);
    let zi = if ti.len() == h.nrows() {
        Complex64::new(0.0, 0.0)
    } else {
        let gi = resolvent(h, z, &ti)?;
        let mut trace = Complex64::new(0.0, 0.0);
        for &k in gi.retained() {
            trace += gi.get(k, k) * s.get(i, k);
        }
        quadratic_form(h, &gi, i) - trace
    };
    let ui = if with(s_set, &[]).len() == h.nrows() {
        -m
    } else {
        let gs = resolvent(h, z, s_set)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for &k in gs.retained() {
            acc += gs.get(k, k) * s.get(i, k);
        }
        acc - m
    };
    Ok((zi, ui))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_at_two_i() {
        let m = semicircle_m(Complex64::new(0.0, 2.0)).unwrap();
        assert!((m - Complex64::new(0.0, 2f64.sqrt() - 1.0)).norm() < 1e-15);
    }

    #[test]
    fn m_rejects_lower_half_plane() {
        assert!(semicircle_m(Complex64::new(0.3, 0.0)).is_err());
    }

    #[test]
    fn scalar_resolvent() {
        let h = DMatrix::from_element(1, 1, Complex64::new(0.0, 0.0));
        let g = resolvent(&h, Complex64::new(0.0, 1.0), &[]).unwrap();
        assert!((g.get(0, 0) - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }
}
