use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::IdentitySection;
use super::CliError;
use crate::ensemble::{build_variance_profile, mix, BandProfileSpec, Distribution, Ensemble, Profile, SymmetryClass};
use crate::resolvent::{resolvent, verify_family_a, verify_family_b, verify_schur};

/// Worst residuals over the configurations of one size and class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub n: usize,
    pub width: usize,
    pub class: SymmetryClass,
    pub configs: usize,
    pub max_minor: usize,
    pub family_a: f64,
    pub family_b: f64,
    pub schur: f64,
    pub z_u: f64,
    /// `max |h_ij - conj(h_ji)|`, diagonal imaginary parts included.
    pub hermiticity: f64,
    /// Configurations with some `|G_ij| > 1/η`.
    pub bound_breaches: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub tolerance: f64,
    pub rows: Vec<IdentityRow>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

fn hermiticity_defect(h: &nalgebra::DMatrix<Complex64>) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Runs Family A, Family B, the Schur formula and the `Z`/`U` expansion of
/// `1/G_ii` on random configurations: a fresh sample, a bulk `z`, a minor
/// `T` with `|T| ≤ max_minor`, and distinct indices outside `T`.
pub fn run_identity_suite(section: &IdentitySection, profile: Profile, seed: u64) -> Result<IdentityReport, CliError> {
    let mut rows = Vec::new();
    for &n in &section.sizes {
        let width = ((n as f64 * section.width_fraction).round() as usize).clamp(1, n);
        for (ci, class) in [SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian]
            .into_iter()
            .enumerate()
        {
            let s = build_variance_profile(&BandProfileSpec {
                width_exponent: 0.0,
                band_exponent: 0.0,
                ..BandProfileSpec::new(1, n, width, profile)
            })?;
            let ensemble = Ensemble::new(s, class, Distribution::Gaussian, mix(&[seed, n as u64, ci as u64]))?;
            let mut row = IdentityRow {
                n,
                width,
                class,
                configs: section.configs,
                max_minor: section.max_minor,
                family_a: 0.0,
                family_b: 0.0,
                schur: 0.0,
                z_u: 0.0,
                hermiticity: 0.0,
                bound_breaches: 0,
                passed: false,
            };
            for k in 0..section.configs as u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, n as u64, ci as u64, k]));
                let mut sample = ensemble.sample(k);
                if section.corrupt_hermiticity {
                    sample.h[(0, 1)] += Complex64::new(0.5, 0.25);
                }
                let eta = 10f64.powf(rng.random_range(-1.3..0.0));
                let z = Complex64::new(rng.random_range(-1.5..1.5), eta);
                let t = (k as usize) % (section.max_minor + 1);
                let picks = sample_indices(&mut rng, n, t + 3).into_vec();
                let (i, j, l) = (picks[0], picks[1], picks[2]);
                let minor = &picks[3..];

                let (a1, a2) = verify_family_a(&sample, z, i, j, l, minor)?;
                let [single, double, diag] = verify_family_b(&sample, z, i, j, minor)?;
                row.family_a = row.family_a.max(a1).max(a2);
                row.family_b = row.family_b.max(single).max(double);
                row.z_u = row.z_u.max(diag);
                row.schur = row.schur.max(verify_schur(&sample, z, i, minor)?);
                row.hermiticity = row.hermiticity.max(hermiticity_defect(&sample.h));
                let g = resolvent(&sample.h, z, minor)?;
                if g.max_entry() > (1.0 + section.tolerance) / eta {
                    row.bound_breaches += 1;
                }
            }
            row.passed = [row.family_a, row.family_b, row.schur, row.z_u, row.hermiticity]
                .iter()
                .all(|&r| r <= section.tolerance)
                && row.bound_breaches == 0;
            rows.push(row);
        }
    }
    Ok(IdentityReport {
        tolerance: section.tolerance,
        rows,
    })
}
