mod common;

use common::*;
use fluctavg::control::eigenvalues;
use fluctavg::ensemble::*;
use fluctavg::graphs::{evaluate_p_product, parse_monomial};
use fluctavg::resolvent::resolvent;

#[test]
fn uniform_small_torus() {
    let s = build_variance_profile(&BandProfileSpec::new(1, 4, 4, Profile::default())).unwrap();
    for v in s.matrix().iter() {
        assert!((v - 0.25).abs() < 1e-15);
    }
    assert!((s.band_size() - 4.0).abs() < 1e-12);
}

#[test]
fn two_site_profiles_are_doubly_stochastic() {
    for profile in [
        Profile::Step { half_width: 0.5 },
        Profile::Step { half_width: 1.0 },
        Profile::Triangular { half_width: 1.5 },
    ] {
        let s = build_variance_profile(&BandProfileSpec {
            width_exponent: 0.0,
            band_exponent: 0.0,
            ..BandProfileSpec::new(1, 2, 2, profile)
        })
        .unwrap();
        assert!(s.max_row_error() < 1e-15);
        for j in 0..2 {
            let col: f64 = (0..2).map(|i| s.get(i, j)).sum();
            assert!((col - 1.0).abs() < 1e-15);
        }
    }
}

#[test]
fn band_size_matches_width_over_sup_norm() {
    // M = W^d / ||f||_inf + O(1): the unit step gives about W, the step of
    // height 1/2 on [-1, 1] gives about 2W.
    let narrow = build_variance_profile(&BandProfileSpec::new(1, 256, 16, Profile::Step { half_width: 0.5 })).unwrap();
    assert!((narrow.band_size() - 16.0).abs() <= 2.0, "M = {}", narrow.band_size());
    let wide = build_variance_profile(&BandProfileSpec::new(1, 256, 16, Profile::Step { half_width: 1.0 })).unwrap();
    assert!((wide.band_size() - 32.0).abs() <= 2.0, "M = {}", wide.band_size());
}

#[test]
fn profile_invariants_on_a_grid() {
    for (side, width) in [(16, 4), (64, 8), (128, 16), (96, 32)] {
        for profile in [Profile::default(), Profile::Triangular { half_width: 1.0 }] {
            let s = build_variance_profile(&BandProfileSpec::new(1, side, width, profile)).unwrap();
            let n = s.n();
            assert!(s.max_row_error() <= 1e-12);
            let inv_m = 1.0 / s.band_size();
            for i in 0..n {
                for j in 0..n {
                    assert!(s.get(i, j) <= inv_m);
                    assert_eq!(s.get(i, j), s.get(j, i));
                    // translation invariance on the torus
                    assert_eq!(s.get(i, j), s.get((i + 1) % n, (j + 1) % n));
                }
            }
            let ev = eigenvalues(&s);
            assert!(ev[0] > -1.0, "no gap for L={side} W={width}");
            assert!(*ev.last().unwrap() <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn two_dimensional_profile() {
    let s = build_variance_profile(&BandProfileSpec::new(2, 8, 4, Profile::default())).unwrap();
    assert_eq!(s.n(), 64);
    assert!(s.max_row_error() <= 1e-12);
}

#[test]
fn geometry_is_checked() {
    assert!(build_variance_profile(&BandProfileSpec::new(1, 8, 16, Profile::default())).is_err());
    assert!(build_variance_profile(&BandProfileSpec::new(1, 1024, 2, Profile::default())).is_err());
    assert!(build_variance_profile(&BandProfileSpec::new(1, 0, 2, Profile::default())).is_err());
}

#[test]
fn entries_outside_the_band_vanish() {
    let s = band(64, 8);
    let e = ensemble(s.clone(), SymmetryClass::ComplexHermitian, 4);
    let h = e.sample(0).h;
    for i in 0..64 {
        for j in 0..64 {
            if s.get(i, j) == 0.0 {
                assert_eq!(h[(i, j)], c(0.0, 0.0));
            }
        }
    }
}

#[test]
fn samples_are_exactly_hermitian() {
    for class in [SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian] {
        let h = sample(48, 12, class, 9, 3).h;
        for i in 0..48 {
            assert_eq!(h[(i, i)].im, 0.0);
            for j in 0..48 {
                assert_eq!(h[(i, j)], h[(j, i)].conj());
                if class == SymmetryClass::RealSymmetric {
                    assert_eq!(h[(i, j)].im, 0.0);
                }
            }
        }
    }
}

#[test]
fn same_seed_same_matrix() {
    let a = sample(32, 8, SymmetryClass::ComplexHermitian, 11, 5);
    let b = sample(32, 8, SymmetryClass::ComplexHermitian, 11, 5);
    assert_eq!(a.h, b.h);
    let other = sample(32, 8, SymmetryClass::ComplexHermitian, 11, 6);
    assert_ne!(a.h, other.h);
}

#[test]
fn rademacher_entries() {
    let e = Ensemble::new(band(32, 8), SymmetryClass::RealSymmetric, Distribution::Rademacher, 2).unwrap();
    let h = e.sample(0).h;
    let s = e.profile.clone();
    for i in 0..32 {
        for &j in s.support(i) {
            assert!((h[(i, j)].re.abs() - s.get(i, j).sqrt()).abs() < 1e-15);
        }
    }
}

#[test]
fn entry_means_vanish_at_clt_scale() {
    let s = band(64, 8);
    let m = s.band_size();
    let e = ensemble(s, SymmetryClass::ComplexHermitian, 21);
    let k = 10_000;
    let pairs = [(0usize, 0usize), (0, 1), (5, 9), (63, 0)];
    let mut sums = vec![c(0.0, 0.0); pairs.len()];
    let mut squares = vec![c(0.0, 0.0); pairs.len()];
    for idx in 0..k {
        let h = e.sample(idx as u64).h;
        for (p, &(i, j)) in pairs.iter().enumerate() {
            sums[p] += h[(i, j)];
            squares[p] += h[(i, j)] * h[(i, j)];
        }
    }
    let limit = 4.0 / (k as f64 * m).sqrt();
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let mean = sums[p] / k as f64;
        assert!(mean.norm() < limit, "|E h_{i}{j}| = {} >= {limit}", mean.norm());
        if i != j {
            // complex class: E h^2 = 0
            assert!((squares[p] / k as f64).norm() < 6.0 / (k as f64).sqrt() / m);
        }
    }
}

#[test]
fn resampling_nothing_is_identity() {
    let s = sample(32, 8, SymmetryClass::ComplexHermitian, 3, 0);
    let r = resample_rows(&s, &[], 0).unwrap();
    assert_eq!(s.h, r.h);
}

#[test]
fn resampling_one_row_keeps_the_minor() {
    let s = sample(32, 8, SymmetryClass::ComplexHermitian, 3, 0);
    let r = resample_rows(&s, &[7], 0).unwrap();
    let mut changed = 0;
    for i in 0..32 {
        for j in 0..32 {
            if i != 7 && j != 7 {
                assert_eq!(s.h[(i, j)], r.h[(i, j)]);
            } else if s.h[(i, j)] != r.h[(i, j)] {
                changed += 1;
            }
            assert_eq!(r.h[(i, j)], r.h[(j, i)].conj());
        }
    }
    assert!(changed > 0);
    assert!(resample_rows(&s, &[32], 0).is_err());
}

#[test]
fn joint_resampling_is_consistent() {
    let s = sample(24, 8, SymmetryClass::ComplexHermitian, 3, 1);
    let r = resample_rows(&s, &[2, 5], 4).unwrap();
    let again = resample_rows(&s, &[5, 2], 4).unwrap();
    assert_eq!(r.h, again.h);
    assert_eq!(r.h[(2, 5)], r.h[(5, 2)].conj());
}

#[test]
fn partial_expectation_of_diagonal_entry_is_self_consistent() {
    let smp = sample(32, 8, SymmetryClass::ComplexHermitian, 13, 0);
    let z = c(0.3, 0.2);
    let a = 9;
    // direct: resample row a, solve, average G_aa
    let k = 256;
    let direct: Vec<_> = (0..k)
        .map(|r| {
            let h = resample_rows(&smp, &[a], r).unwrap().h;
            dense_resolvent(&h, z)[(a, a)]
        })
        .collect();
    let mean = direct.iter().sum::<num_complex::Complex64>() / k as f64;
    let spread = (direct.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (k - 1) as f64).sqrt();
    let se_direct = spread / (k as f64).sqrt();

    let spec = parse_monomial("sum a; ext; Q: -; w: 1/N; g(a,a)").unwrap();
    let g = resolvent(&smp.h, z, &[]).unwrap();
    let est = evaluate_p_product(&smp, &g, &spec, &[a], k as usize, 1 << 20).unwrap();
    let m = g.m();
    let pooled = (se_direct.powi(2) + est.stderr.powi(2)).sqrt();
    assert!(
        ((mean - m) - est.mean).norm() < 5.0 * pooled,
        "direct {} vs estimator {} (se {pooled})",
        mean - m,
        est.mean
    );
}
