use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::control::PsiMode;
use crate::ensemble::{Distribution, Profile, SymmetryClass};
use crate::expansion::ExpansionConfig;
use crate::graphs::EstimatorConfig;
use crate::verifier::{ExperimentPlan, LadderPoint};

/// Environment variable naming the config used when `--config` is absent.
pub const CONFIG_ENV: &str = "FLUCTAVG_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub dim: usize,
    pub profile: Profile,
    pub class: SymmetryClass,
    pub distribution: Distribution,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            dim: 1,
            profile: Profile::default(),
            class: SymmetryClass::ComplexHermitian,
            distribution: Distribution::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    /// Admissibility exponent of the `Ψ` window.
    pub c: f64,
    /// Spectral domain `η ≥ M^{-1+γ}`.
    pub gamma: f64,
    /// Bulk window `|E| ≤ 2 - κ`.
    pub kappa: f64,
    pub psi_mode: PsiMode,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            c: 0.05,
            gamma: 0.1,
            kappa: 0.5,
            psi_mode: PsiMode::Ansatz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentitySection {
    pub sizes: Vec<usize>,
    /// Random configurations per size and symmetry class.
    pub configs: usize,
    pub max_minor: usize,
    /// Band width as a fraction of `N`.
    pub width_fraction: f64,
    pub tolerance: f64,
    /// Breaks the symmetry of one entry of every sample; a negative control.
    pub corrupt_hermiticity: bool,
}

impl Default for IdentitySection {
    fn default() -> Self {
        IdentitySection {
            sizes: vec![20, 50, 200],
            configs: 100,
            max_minor: 4,
            width_fraction: 0.25,
            tolerance: 1e-9,
            corrupt_hermiticity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifierSection {
    pub ladder: Vec<LadderPoint>,
    pub energies: Vec<f64>,
    pub etas: Vec<f64>,
    pub samples: usize,
    pub quantile: f64,
    pub epsilon: f64,
    pub bootstrap: usize,
    pub estimator: EstimatorConfig,
    pub p_product: bool,
    pub slope_window: (f64, f64),
    pub budget_seconds: Option<f64>,
}

impl Default for VerifierSection {
    fn default() -> Self {
        let plan = ExperimentPlan::default();
        VerifierSection {
            ladder: plan.ladder,
            energies: plan.energies,
            etas: plan.etas,
            samples: plan.samples,
            quantile: plan.quantile,
            epsilon: plan.epsilon,
            bootstrap: plan.bootstrap,
            estimator: plan.estimator,
            p_product: plan.p_product,
            slope_window: plan.slope_window,
            budget_seconds: plan.budget_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("fluctavg-out"),
        }
    }
}

/// A spec given inline or read from a file relative to the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecEntry {
    Inline(String),
    File { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub workers: Option<usize>,
    pub ensemble: EnsembleSection,
    pub control: ControlSection,
    pub identities: IdentitySection,
    pub specs: Vec<SpecEntry>,
    pub verifier: VerifierSection,
    pub expansion: ExpansionConfig,
    pub output: OutputSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            workers: None,
            ensemble: EnsembleSection::default(),
            control: ControlSection::default(),
            identities: IdentitySection::default(),
            specs: Vec::new(),
            verifier: VerifierSection::default(),
            expansion: ExpansionConfig::default(),
            output: OutputSection::default(),
        }
    }
}

impl Config {
    /// Parses TOML text; unknown keys are errors. File specs are resolved
    /// against `base` and inlined.
    pub fn from_toml(text: &str, base: &Path) -> Result<Config, CliError> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for entry in &mut cfg.specs {
            if let SpecEntry::File { file } = entry {
                let path = base.join(&*file);
                let text = fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("spec file {}: {e}", path.display())))?;
                *entry = SpecEntry::Inline(text.trim().to_string());
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Config::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let id = &self.identities;
        if id.sizes.iter().any(|&n| n < id.max_minor + 3) {
            return Err(CliError::Config(format!(
                "identity sizes must leave room for |T| = {} plus three indices",
                id.max_minor
            )));
        }
        if !(id.width_fraction > 0.0 && id.width_fraction <= 1.0) {
            return Err(CliError::Config("identities.width_fraction must lie in (0, 1]".into()));
        }
        if !(id.tolerance > 0.0) {
            return Err(CliError::Config("identities.tolerance must be positive".into()));
        }
        self.plan().validate()?;
        Ok(())
    }

    pub fn spec_texts(&self) -> Vec<String> {
        self.specs
            .iter()
            .map(|s| match s {
                SpecEntry::Inline(t) => t.clone(),
                SpecEntry::File { file } => file.display().to_string(),
            })
            .collect()
    }

    pub fn plan(&self) -> ExperimentPlan {
        let v = &self.verifier;
        ExperimentPlan {
            dim: self.ensemble.dim,
            ladder: v.ladder.clone(),
            profile: self.ensemble.profile,
            class: self.ensemble.class,
            distribution: self.ensemble.distribution,
            energies: v.energies.clone(),
            etas: v.etas.clone(),
            gamma: self.control.gamma,
            kappa: self.control.kappa,
            c: self.control.c,
            specs: self.spec_texts(),
            samples: v.samples,
            quantile: v.quantile,
            epsilon: v.epsilon,
            bootstrap: v.bootstrap,
            psi_mode: self.control.psi_mode,
            estimator: v.estimator,
            p_product: v.p_product,
            slope_window: v.slope_window,
            seed: self.seed,
            workers: self.workers,
            budget_seconds: v.budget_seconds,
        }
    }

    /// SHA-256 of the config's JSON form, after file specs are inlined and
    /// without the worker count.
    pub fn hash(&self) -> String {
        let cfg = Config {
            workers: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&cfg).expect("config serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
