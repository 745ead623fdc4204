//! Monte Carlo verification of predicted domination exponents.

mod analysis;
mod output;

use std::time::Instant;

use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use analysis::{
    domination_test, scaling_fit, Domination, FitPoint, ScalingFit, Verdict, MIN_BOOTSTRAP, MIN_DOMINATION_VALUES,
};
pub use output::{render_table, write_results, ResultFiles};

use crate::control::{estimate_psi, phi, psi_ansatz, rho, ControlError, PsiMode};
use crate::ensemble::{
    build_variance_profile, mix, BandProfileSpec, Distribution, Ensemble, EnsembleError, Profile, SymmetryClass,
};
use crate::graphs::{
    classify, evaluate_p_product, evaluate_x, parse_monomial, predicted_exponents, AveragingSpec, EstimatorConfig,
    GraphError,
};
use crate::resolvent::{resolvent, ResolventError, SpectralPoint};
use crate::stats::quantile;

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("need at least {need} values, got {got}")]
    TooFewValues { got: usize, need: usize },
    #[error("spec {index}: {source}")]
    Spec { index: usize, source: GraphError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialisation: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderPoint {
    /// `L`.
    pub side: usize,
    /// `W`.
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub dim: usize,
    pub ladder: Vec<LadderPoint>,
    pub profile: Profile,
    pub class: SymmetryClass,
    pub distribution: Distribution,
    pub energies: Vec<f64>,
    pub etas: Vec<f64>,
    /// Spectral domain `η ≥ M^{-1+γ}`; points outside it are skipped.
    pub gamma: f64,
    /// Bulk window `|E| ≤ 2 - κ`.
    pub kappa: f64,
    /// Admissibility exponent `c` of the `Ψ` window.
    pub c: f64,
    pub specs: Vec<String>,
    pub samples: usize,
    pub quantile: f64,
    pub epsilon: f64,
    pub bootstrap: usize,
    pub psi_mode: PsiMode,
    pub estimator: EstimatorConfig,
    /// Also estimate `∏ P_a` at one index tuple for every spec without `Q`.
    pub p_product: bool,
    pub slope_window: (f64, f64),
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    /// Wall-clock budget; the run stops between ladder points once exceeded.
    pub budget_seconds: Option<f64>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            dim: 1,
            ladder: [8, 16, 32, 64]
                .into_iter()
                .map(|w| LadderPoint { side: 8 * w, width: w })
                .collect(),
            profile: Profile::default(),
            class: SymmetryClass::ComplexHermitian,
            distribution: Distribution::Gaussian,
            energies: vec![-0.5, 0.0, 0.5],
            etas: vec![0.02, 0.05, 0.1],
            gamma: 0.1,
            kappa: 0.5,
            c: 0.05,
            specs: Vec::new(),
            samples: 256,
            quantile: 0.99,
            epsilon: 0.1,
            bootstrap: 200,
            psi_mode: PsiMode::Ansatz,
            estimator: EstimatorConfig::default(),
            p_product: true,
            slope_window: (0.7, 1.3),
            seed: 0,
            workers: None,
            budget_seconds: None,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<Vec<AveragingSpec>, VerifierError> {
        if self.ladder.windows(2).any(|w| w[1].width <= w[0].width) {
            return Err(VerifierError::Plan("ladder must be strictly increasing in W".into()));
        }
        for &e in &self.energies {
            if e.abs() > 2.0 - self.kappa {
                return Err(VerifierError::Plan(format!("energy {e} outside the bulk |E| <= {}", 2.0 - self.kappa)));
            }
        }
        if self.etas.iter().any(|&eta| !(eta > 0.0)) {
            return Err(VerifierError::Plan("every eta must be positive".into()));
        }
        if !(0.0 < self.quantile && self.quantile < 1.0) {
            return Err(VerifierError::Plan(format!("quantile {} outside (0, 1)", self.quantile)));
        }
        if !self.specs.is_empty() && self.samples < MIN_DOMINATION_VALUES {
            return Err(VerifierError::TooFewValues {
                got: self.samples,
                need: MIN_DOMINATION_VALUES,
            });
        }
        if self.bootstrap < MIN_BOOTSTRAP {
            return Err(VerifierError::Plan(format!("bootstrap must be at least {MIN_BOOTSTRAP}")));
        }
        self.specs
            .iter()
            .enumerate()
            .map(|(index, text)| {
                let spec = parse_monomial(text).map_err(|source| VerifierError::Spec { index, source })?;
                predicted_exponents(&spec).map_err(|source| VerifierError::Spec { index, source })?;
                Ok(spec)
            })
            .collect()
    }

    /// SHA-256 of the plan's JSON form. The worker count does not change
    /// results and is left out.
    pub fn hash(&self) -> String {
        let plan = ExperimentPlan {
            workers: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&plan).expect("plan serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PProductRecord {
    pub quantile: f64,
    pub psi_empirical: f64,
    pub phi_empirical: f64,
    /// `Ψ̂^{deg} Φ^{|V_c|}` before the `N^ε` factor.
    pub bound: f64,
    pub domination: Domination,
    pub max_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub spec_index: usize,
    pub spec: String,
    pub side: usize,
    pub width: usize,
    pub n: usize,
    pub band_size: f64,
    pub energy: f64,
    pub eta: f64,
    pub psi_ansatz: f64,
    pub psi_empirical: f64,
    pub psi: f64,
    pub rho: f64,
    pub phi: f64,
    pub psi_exp: i64,
    pub phi_exp: i64,
    /// `Ψ^{psi_exp} Φ^{phi_exp}`.
    pub bound: f64,
    pub domination: Domination,
    pub values: Vec<f64>,
    pub p_product: Option<PProductRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub spec_index: usize,
    pub spec: String,
    pub fit: Option<ScalingFit>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub plan_hash: String,
    pub version: String,
    pub points: Vec<PointRecord>,
    pub fits: Vec<FitRecord>,
    pub skipped: Vec<String>,
    pub warnings: Vec<String>,
    pub truncated: bool,
    pub verdict: Verdict,
}

impl ExperimentResult {
    pub fn domination_verdict(&self, spec_index: usize) -> Verdict {
        self.points
            .iter()
            .filter(|p| p.spec_index == spec_index)
            .fold(Verdict::Pass, |v, p| v.and(p.domination.verdict))
    }

    pub fn p_product_verdict(&self) -> Verdict {
        self.points
            .iter()
            .filter_map(|p| p.p_product.as_ref())
            .fold(Verdict::Pass, |v, p| v.and(p.domination.verdict))
    }
}

/// Distinct fixed values for the external vertices followed by the weight
/// parameters, spread evenly over `0..n`.
pub fn fixed_indices(count: usize, n: usize) -> Vec<usize> {
    (0..count).map(|k| (2 * k + 1) * n / (2 * count.max(1))).collect()
}

struct SpecPlan {
    spec: AveragingSpec,
    externals: Vec<usize>,
    params: Vec<usize>,
    with_p: bool,
}

struct SampleOutcome {
    /// Per z: `Λ`, then `|X|` per spec, then `|∏P|` and its stderr per spec.
    lambdas: Vec<f64>,
    x: Vec<Vec<f64>>,
    p: Vec<Vec<Option<(f64, f64)>>>,
}

fn p_tuple(seed: u64, point: &LadderPoint, sample: u64, spec_index: usize, spec: &SpecPlan, n: usize) -> Vec<usize> {
    let k = spec.spec.graph.summation_count();
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, point.side as u64, point.width as u64, sample, spec_index as u64]));
    let free: Vec<usize> = (0..n).filter(|v| !spec.externals.contains(v)).collect();
    let mut values: Vec<usize> = sample_indices(&mut rng, free.len(), k).into_iter().map(|i| free[i]).collect();
    values.extend(&spec.externals);
    values
}

#[allow(clippy::too_many_arguments)]
fn run_sample(
    plan: &ExperimentPlan,
    ensemble: &Ensemble,
    point: &LadderPoint,
    zs: &[Complex64],
    specs: &[SpecPlan],
    sample_index: u64,
) -> Result<SampleOutcome, VerifierError> {
    let sample = ensemble.sample(sample_index);
    let n = sample.n();
    let mut out = SampleOutcome {
        lambdas: Vec::with_capacity(zs.len()),
        x: Vec::with_capacity(zs.len()),
        p: Vec::with_capacity(zs.len()),
    };
    for (zi, &z) in zs.iter().enumerate() {
        let g = resolvent(&sample.h, z, &[])?;
        out.lambdas.push(g.lambda());
        let mut xs = Vec::with_capacity(specs.len());
        let mut ps = Vec::with_capacity(specs.len());
        for (si, sp) in specs.iter().enumerate() {
            let mut cfg = plan.estimator;
            cfg.round_offset = cfg.round_offset.wrapping_add(mix(&[zi as u64, si as u64]));
            let x = evaluate_x(&sample, &g, &sp.spec, &sp.externals, &sp.params, &cfg)
                .map_err(|source| VerifierError::Spec { index: si, source })?;
            xs.push(x.value.norm());
            if sp.with_p {
                let values = p_tuple(plan.seed, point, sample_index, si, sp, n);
                let est = evaluate_p_product(&sample, &g, &sp.spec, &values, plan.estimator.resamples, cfg.round_offset)
                    .map_err(|source| VerifierError::Spec { index: si, source })?;
                ps.push(Some((est.mean.norm(), est.stderr)));
            } else {
                ps.push(None);
            }
        }
        out.x.push(xs);
        out.p.push(ps);
    }
    Ok(out)
}

/// Runs `plan` and aggregates verdicts. Deterministic for a fixed plan:
/// every random stream is keyed by the plan seed, the ladder point and the
/// sample index, and results are gathered in sample order.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult, VerifierError> {
    let specs = plan.validate()?;
    let mut result = ExperimentResult {
        plan_hash: plan.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        points: Vec::new(),
        fits: Vec::new(),
        skipped: Vec::new(),
        warnings: Vec::new(),
        truncated: false,
        verdict: Verdict::Pass,
    };
    if specs.is_empty() {
        return Ok(result);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.unwrap_or(0))
        .build()
        .map_err(|e| VerifierError::Plan(format!("thread pool: {e}")))?;
    let started = Instant::now();

    for (li, point) in plan.ladder.iter().enumerate() {
        if let Some(budget) = plan.budget_seconds {
            if started.elapsed().as_secs_f64() > budget {
                result.truncated = true;
                result
                    .warnings
                    .push(format!("budget of {budget} s exceeded; ladder stopped before W={}", point.width));
                break;
            }
        }
        let profile = build_variance_profile(&BandProfileSpec::new(plan.dim, point.side, point.width, plan.profile))?;
        let n = profile.n();
        let band = profile.band_size();
        let mut spectral = Vec::new();
        for &energy in &plan.energies {
            for &eta in &plan.etas {
                let sp = SpectralPoint {
                    energy,
                    eta,
                    gamma: plan.gamma,
                    kappa: plan.kappa,
                };
                if sp.in_domain(band) {
                    spectral.push(sp);
                } else {
                    result.skipped.push(format!(
                        "W={} E={energy} eta={eta}: below the domain floor M^(-1+gamma)={:.4}",
                        point.width,
                        band.powf(-1.0 + plan.gamma)
                    ));
                }
            }
        }
        if spectral.is_empty() {
            continue;
        }
        let zs: Vec<Complex64> = spectral.iter().map(|s| s.z()).collect();
        let ensemble = Ensemble::new(
            profile,
            plan.class,
            plan.distribution,
            mix(&[plan.seed, li as u64, point.side as u64, point.width as u64]),
        )?;
        let spec_plans: Vec<SpecPlan> = specs
            .iter()
            .map(|spec| {
                let n_ext = spec.graph.externals().len();
                let fixed = fixed_indices(n_ext + spec.params.len(), n);
                SpecPlan {
                    spec: spec.clone(),
                    externals: fixed[..n_ext].to_vec(),
                    params: fixed[n_ext..].to_vec(),
                    with_p: plan.p_product && spec.q_set.is_empty(),
                }
            })
            .collect();
        let outcomes: Vec<SampleOutcome> = pool.install(|| {
            (0..plan.samples as u64)
                .into_par_iter()
                .map(|s| run_sample(plan, &ensemble, point, &zs, &spec_plans, s))
                .collect::<Result<Vec<_>, _>>()
        })?;

        for (zi, sp) in spectral.iter().enumerate() {
            let z = zs[zi];
            let lambdas: Vec<f64> = outcomes.iter().map(|o| o.lambdas[zi]).collect();
            let rho = rho(&ensemble.profile, z)?;
            let ansatz = psi_ansatz(band, sp.eta, plan.c);
            let (empirical, _) = estimate_psi(&lambdas, PsiMode::Empirical, plan.quantile, band, sp.eta, plan.c)?;
            let (psi, _) = estimate_psi(&lambdas, plan.psi_mode, plan.quantile, band, sp.eta, plan.c)?;
            let ratio = ansatz.max(empirical) / ansatz.min(empirical);
            if ratio > 3.0 {
                result.warnings.push(format!(
                    "W={} z={}: ansatz psi {ansatz:.4} and empirical psi {empirical:.4} differ by {ratio:.2}x",
                    point.width, z
                ));
            }
            let phi_value = phi(psi, rho, band);
            let phi_emp = phi(empirical, rho, band);
            for (si, spp) in spec_plans.iter().enumerate() {
                let pred = predicted_exponents(&spp.spec)?;
                let bound = psi.powi(pred.psi as i32) * phi_value.powi(pred.phi as i32);
                let values: Vec<f64> = outcomes.iter().map(|o| o.x[zi][si]).collect();
                let seed = mix(&[plan.seed, li as u64, zi as u64, si as u64, 1]);
                let domination = domination_test(&values, bound, plan.epsilon, plan.quantile, n, plan.bootstrap, seed)?;
                let p_product = if spp.with_p {
                    let ps: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o.p[zi][si]).collect();
                    let pv: Vec<f64> = ps.iter().map(|p| p.0).collect();
                    let deg = spp.spec.graph.deg() as i32;
                    let vc = classify(&spp.spec).charged.len() as i32;
                    let pbound = empirical.powi(deg) * phi_emp.powi(vc);
                    let d = domination_test(&pv, pbound, plan.epsilon, plan.quantile, n, plan.bootstrap, seed ^ 2)?;
                    Some(PProductRecord {
                        quantile: quantile(&pv, plan.quantile),
                        psi_empirical: empirical,
                        phi_empirical: phi_emp,
                        bound: pbound,
                        domination: d,
                        max_stderr: ps.iter().map(|p| p.1).fold(0.0, f64::max),
                    })
                } else {
                    None
                };
                result.points.push(PointRecord {
                    spec_index: si,
                    spec: plan.specs[si].clone(),
                    side: point.side,
                    width: point.width,
                    n,
                    band_size: band,
                    energy: sp.energy,
                    eta: sp.eta,
                    psi_ansatz: ansatz,
                    psi_empirical: empirical,
                    psi,
                    rho,
                    phi: phi_value,
                    psi_exp: pred.psi,
                    phi_exp: pred.phi,
                    bound,
                    domination,
                    values,
                    p_product,
                });
            }
        }
    }

    for (si, spec) in specs.iter().enumerate() {
        let pred = predicted_exponents(spec)?;
        let points: Vec<FitPoint> = result
            .points
            .iter()
            .filter(|p| p.spec_index == si)
            .map(|p| FitPoint {
                quantile: p.domination.quantile.estimate,
                log_psi: p.psi.ln(),
                log_phi: p.phi.ln(),
            })
            .collect();
        let (fit, note) = match scaling_fit(&points, pred.psi, pred.phi, plan.slope_window) {
            Ok(f) => {
                let note = f.note.clone();
                (Some(f), note)
            }
            Err(e) => (None, format!("no fit: {e}")),
        };
        result.fits.push(FitRecord {
            spec_index: si,
            spec: plan.specs[si].clone(),
            fit,
            note,
        });
    }

    let mut verdict = if result.truncated {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    for si in 0..specs.len() {
        verdict = verdict.and(result.domination_verdict(si));
        let fit_verdict = result.fits[si]
            .fit
            .as_ref()
            .map_or(Verdict::Inconclusive, |f| f.verdict);
        verdict = verdict.and(fit_verdict);
    }
    result.verdict = verdict.and(result.p_product_verdict());
    Ok(result)
}

