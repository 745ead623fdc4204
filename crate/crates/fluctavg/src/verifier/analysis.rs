use serde::{Deserialize, Serialize};

use super::VerifierError;
use crate::stats::{bootstrap_quantile, ols, Interval, LinearFit};

pub const MIN_DOMINATION_VALUES: usize = 64;
pub const MIN_BOOTSTRAP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }

    /// Worst of two verdicts; a failure dominates inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domination {
    pub verdict: Verdict,
    pub quantile: Interval,
    /// `N^ε · bound`.
    pub threshold: f64,
    /// `ln(threshold / quantile)`; absent when every value is zero.
    pub margin: Option<f64>,
    pub all_zero: bool,
    pub count: usize,
}

/// Empirical `≺`: the `q`-quantile of `values` must not exceed `N^ε bound`.
pub fn domination_test(
    values: &[f64],
    bound: f64,
    epsilon: f64,
    q: f64,
    n: usize,
    bootstrap: usize,
    seed: u64,
) -> Result<Domination, VerifierError> {
    if values.len() < MIN_DOMINATION_VALUES {
        return Err(VerifierError::TooFewValues {
            got: values.len(),
            need: MIN_DOMINATION_VALUES,
        });
    }
    if bootstrap < MIN_BOOTSTRAP {
        return Err(VerifierError::Plan(format!(
            "at least {MIN_BOOTSTRAP} bootstrap resamples are required, got {bootstrap}"
        )));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(VerifierError::Plan("values must be finite and nonnegative".into()));
    }
    let threshold = (n as f64).powf(epsilon) * bound;
    let all_zero = values.iter().all(|&v| v == 0.0);
    let quantile = bootstrap_quantile(values, q, bootstrap, seed);
    let margin = (!all_zero).then(|| (threshold / quantile.estimate).ln());
    let verdict = if all_zero || quantile.estimate <= threshold {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(Domination {
        verdict,
        quantile,
        threshold,
        margin,
        all_zero,
        count: values.len(),
    })
}

/// One row of a scaling fit: an observed quantile with the logarithms of
/// the control parameters at that point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub quantile: f64,
    pub log_psi: f64,
    pub log_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub psi_exp: i64,
    pub phi_exp: i64,
    /// `Φ` exponent of the discriminator, off by one from the prediction.
    pub discriminator_phi_exp: i64,
    pub fit: Option<LinearFit>,
    pub discriminator: Option<LinearFit>,
    pub slope_ok: bool,
    pub detectable: bool,
    pub verdict: Verdict,
    pub note: String,
}

fn log_bound(p: &FitPoint, psi_exp: i64, phi_exp: i64) -> f64 {
    psi_exp as f64 * p.log_psi + phi_exp as f64 * p.log_phi
}

/// Least squares of `ln(quantile)` against `ln(Ψ^a Φ^b)` for the predicted
/// exponents and for the discriminator with one `Φ` less (or more when
/// `b = 0`). Zero quantiles are left out.
pub fn scaling_fit(points: &[FitPoint], psi_exp: i64, phi_exp: i64, window: (f64, f64)) -> Result<ScalingFit, VerifierError> {
    if points.len() < 3 {
        return Err(VerifierError::TooFewValues {
            got: points.len(),
            need: 3,
        });
    }
    let disc = if phi_exp > 0 { phi_exp - 1 } else { phi_exp + 1 };
    let used: Vec<&FitPoint> = points.iter().filter(|p| p.quantile > 0.0).collect();
    let y: Vec<f64> = used.iter().map(|p| p.quantile.ln()).collect();
    let x: Vec<f64> = used.iter().map(|p| log_bound(p, psi_exp, phi_exp)).collect();
    let xd: Vec<f64> = used.iter().map(|p| log_bound(p, psi_exp, disc)).collect();
    let fit = ols(&x, &y);
    let discriminator = ols(&xd, &y);
    let (slope_ok, detectable, verdict, note) = match (fit, discriminator) {
        (Some(f), Some(d)) => {
            let slope_ok = window.0 <= f.slope && f.slope <= window.1;
            let gap = (d.slope - 1.0).abs() - (f.slope - 1.0).abs();
            let noise = 2.0 * (f.slope_stderr.powi(2) + d.slope_stderr.powi(2)).sqrt();
            let detectable = gap > noise;
            let (verdict, note) = match (slope_ok, detectable) {
                (false, _) => (Verdict::Fail, format!("slope {:.3} outside [{}, {}]", f.slope, window.0, window.1)),
                (true, true) => (Verdict::Pass, String::new()),
                (true, false) => (
                    Verdict::Inconclusive,
                    format!("insufficient resolution: discriminator gap {gap:.3} within noise {noise:.3}"),
                ),
            };
            (slope_ok, detectable, verdict, note)
        }
        _ => (
            false,
            false,
            Verdict::Inconclusive,
            "collinear predictor: the ladder does not move the bound".to_string(),
        ),
    };
    Ok(ScalingFit {
        psi_exp,
        phi_exp,
        discriminator_phi_exp: disc,
        fit,
        discriminator,
        slope_ok,
        detectable,
        verdict,
        note,
    })
}
