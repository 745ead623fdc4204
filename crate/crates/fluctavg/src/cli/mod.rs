//! Command-line front end: config loading, the subcommands, and the records
//! they write.

mod config;
mod identities;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub use config::{
    Config, ControlSection, EnsembleSection, IdentitySection, OutputSection, SpecEntry, VerifierSection, CONFIG_ENV,
};
pub use identities::{run_identity_suite, IdentityReport, IdentityRow};

use crate::ensemble::EnsembleError;
use crate::expansion::{run_expansion, ExpansionError, ExpansionReport};
use crate::graphs::{applicable_predictions, classify, parse_monomial, print_monomial, AveragingMode, GraphError};
use crate::resolvent::ResolventError;
use crate::verifier::{
    render_table, run_experiment, write_results, ExperimentResult, FitRecord, PointRecord, Verdict, VerifierError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("spec {index}: {source}")]
    Spec { index: usize, source: GraphError },
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialisation: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report: {0}")]
    Report(String),
}

#[derive(Debug, Parser)]
#[command(name = "fluctavg", version, about = "Fluctuation averaging: predict, expand and verify resolvent bounds")]
pub struct Cli {
    /// TOML config; falls back to the FLUCTAVG_CONFIG variable, then to defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Exit 0 when verdicts are only inconclusive.
    #[arg(long, global = true)]
    pub allow_inconclusive: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the resolvent identities on random configurations.
    CheckIdentities,
    /// Classify vertices and print the predicted exponents.
    Predict {
        /// Spec texts; the config's specs when absent.
        specs: Vec<String>,
    },
    /// Run the symbolic expansion and its structural checks.
    Expand {
        specs: Vec<String>,
        #[arg(long)]
        p: Option<usize>,
    },
    /// Monte Carlo verification of the config's specs.
    Verify,
    /// Re-render the summary of an earlier `verify` run.
    Report,
}

/// Result of one command: its verdict, text for stdout, and the files written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdict: Verdict,
    pub text: String,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self, allow_inconclusive: bool) -> i32 {
        match self.verdict {
            Verdict::Pass => 0,
            Verdict::Inconclusive if allow_inconclusive => 0,
            _ => 1,
        }
    }
}

/// Loaded config plus where records go; `out` is `None` when neither a
/// config file nor `--out` was given.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: Config,
    pub hash: String,
    pub out: Option<PathBuf>,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> Result<Context, CliError> {
        let mut config = match &cli.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if cli.workers.is_some() {
            config.workers = cli.workers;
        }
        let out = cli
            .out
            .clone()
            .or_else(|| cli.config.as_ref().map(|_| config.output.dir.clone()));
        Ok(Context {
            hash: config.hash(),
            config,
            out,
        })
    }

    fn header(&self, command: &str) -> serde_json::Value {
        json!({
            "kind": "header",
            "command": command,
            "config_hash": self.hash,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }

    /// Writes `<out>/<command>.jsonl`: a header line, then one line per record.
    fn write_records<T: Serialize>(&self, command: &str, kind: &str, records: &[T]) -> Result<Vec<PathBuf>, CliError> {
        let Some(dir) = &self.out else {
            return Ok(Vec::new());
        };
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{command}.jsonl"));
        let mut text = serde_json::to_string(&self.header(command))?;
        text.push('\n');
        for r in records {
            let mut v = serde_json::to_value(r)?;
            v["kind"] = json!(kind);
            v["config_hash"] = json!(self.hash);
            text.push_str(&serde_json::to_string(&v)?);
            text.push('\n');
        }
        fs::write(&path, text)?;
        Ok(vec![path])
    }

    fn spec_texts(&self, given: &[String]) -> Vec<String> {
        if given.is_empty() {
            self.config.spec_texts()
        } else {
            given.to_vec()
        }
    }
}

/// `Ψ^a Φ^b` with unit exponents left bare and zero exponents dropped.
pub fn format_bound(psi: i64, phi: i64) -> String {
    let term = |sym: &str, e: i64| match e {
        0 => None,
        1 => Some(sym.to_string()),
        e => Some(format!("{sym}^{e}")),
    };
    let parts: Vec<String> = [term("Ψ", psi), term("Φ", phi)].into_iter().flatten().collect();
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join(" ")
    }
}

fn mode_label(mode: AveragingMode) -> &'static str {
    match mode {
        AveragingMode::QAverage => "q_average",
        AveragingMode::PProduct => "p_product",
        AveragingMode::Chain => "chain",
    }
}

pub fn cmd_check_identities(ctx: &Context) -> Result<Outcome, CliError> {
    let report = run_identity_suite(&ctx.config.identities, ctx.config.ensemble.profile, ctx.config.seed)?;
    let mut text = String::new();
    let _ = writeln!(text, "config {} (version {})", ctx.hash, env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        text,
        "{:>5} {:>4} {:>17} {:>9} {:>9} {:>9} {:>9} {:>9} {:>7} {:>6}",
        "N", "W", "class", "family A", "family B", "Schur", "Z/U", "herm", "|G|>1/η", "result"
    );
    for r in &report.rows {
        let _ = writeln!(
            text,
            "{:>5} {:>4} {:>17} {:>9.2e} {:>9.2e} {:>9.2e} {:>9.2e} {:>9.2e} {:>7} {:>6}",
            r.n,
            r.width,
            format!("{:?}", r.class),
            r.family_a,
            r.family_b,
            r.schur,
            r.z_u,
            r.hermiticity,
            r.bound_breaches,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    let verdict = if report.passed() { Verdict::Pass } else { Verdict::Fail };
    let _ = writeln!(text, "verdict: {}", verdict.label());
    let files = ctx.write_records("check-identities", "identity", &report.rows)?;
    Ok(Outcome { verdict, text, files })
}

#[derive(Debug, Serialize)]
struct PredictionRecord {
    spec: String,
    normalised: String,
    vertices: Vec<serde_json::Value>,
    predictions: Vec<serde_json::Value>,
}

pub fn cmd_predict(ctx: &Context, specs: &[String]) -> Result<Outcome, CliError> {
    let mut text = String::new();
    let mut records = Vec::new();
    for (index, spec_text) in ctx.spec_texts(specs).iter().enumerate() {
        let spec = parse_monomial(spec_text).map_err(|source| CliError::Spec { index, source })?;
        let class = classify(&spec);
        let normalised = print_monomial(&spec);
        let _ = writeln!(text, "spec {index}: {normalised}");
        let mut vertices = Vec::new();
        for v in &class.vertices {
            let name = spec.graph.name(v.vertex);
            let mut tags = Vec::new();
            if v.in_q {
                tags.push("Q");
            }
            if v.charged {
                tags.push("charged");
            }
            if v.chain {
                tags.push("chain");
            }
            let _ = writeln!(text, "  vertex {name}: ν={} ν*={} {}", v.nu, v.nu_star, tags.join(" "));
            vertices.push(json!({
                "name": name,
                "nu": v.nu,
                "nu_star": v.nu_star,
                "in_q": v.in_q,
                "charged": v.charged,
                "chain": v.chain,
            }));
        }
        let mut predictions = Vec::new();
        for (mode, pred) in applicable_predictions(&spec) {
            let bound = format_bound(pred.psi, pred.phi);
            let _ = writeln!(text, "  {}: {bound}", mode_label(mode));
            predictions.push(json!({
                "mode": mode,
                "psi": pred.psi,
                "phi": pred.phi,
                "bound": bound,
            }));
        }
        records.push(PredictionRecord {
            spec: spec_text.clone(),
            normalised,
            vertices,
            predictions,
        });
    }
    let files = ctx.write_records("predict", "prediction", &records)?;
    Ok(Outcome {
        verdict: Verdict::Pass,
        text,
        files,
    })
}

#[derive(Debug, Serialize)]
struct ExpansionRecord<'a> {
    spec: &'a str,
    #[serde(flatten)]
    report: &'a ExpansionReport,
}

fn expansion_verdict(report: &ExpansionReport) -> Verdict {
    match (report.passed(), report.complete()) {
        (false, _) => Verdict::Fail,
        (true, false) => Verdict::Inconclusive,
        (true, true) => Verdict::Pass,
    }
}

pub fn cmd_expand(ctx: &Context, specs: &[String], p: Option<usize>) -> Result<Outcome, CliError> {
    let mut cfg = ctx.config.expansion.clone();
    if let Some(p) = p {
        cfg.p = p;
    }
    let texts = ctx.spec_texts(specs);
    let mut reports = Vec::new();
    let mut text = String::new();
    let mut verdict = Verdict::Pass;
    for (index, spec_text) in texts.iter().enumerate() {
        let spec = parse_monomial(spec_text).map_err(|source| CliError::Spec { index, source })?;
        let r = run_expansion(&spec, &cfg)?;
        let v = expansion_verdict(&r);
        verdict = verdict.and(v);
        let _ = writeln!(text, "spec {index}: {}", print_monomial(&spec));
        let _ = writeln!(
            text,
            "  p={} target Ψ^{} Φ^{} stop_k={}",
            r.p, r.target_psi, r.target_phi, r.stop_k
        );
        let _ = writeln!(
            text,
            "  histories {} (surviving {}), remainders {}, Γ classes {} (surviving {}), min surviving edges {}",
            r.histories,
            r.surviving_histories,
            r.remainders,
            r.gamma_classes,
            r.surviving_classes,
            r.min_surviving_edges.map_or("-".to_string(), |m| m.to_string())
        );
        let _ = writeln!(
            text,
            "  Θ {} (vanishing {}), Υ {}, cases a={} b={} c={}, min Ψ exponent {}",
            r.theta_count,
            r.vanishing_theta,
            r.upsilon_count,
            r.cases.a,
            r.cases.b,
            r.cases.c,
            r.min_psi_effective.map_or("-".to_string(), |m| m.to_string())
        );
        let _ = writeln!(text, "  violations {}", r.violation_count);
        for msg in &r.violations {
            let _ = writeln!(text, "    {msg}");
        }
        for msg in &r.truncated {
            let _ = writeln!(text, "  truncated: {msg}");
        }
        let _ = writeln!(text, "  {}", v.label());
        reports.push(r);
    }
    let records: Vec<ExpansionRecord> = texts
        .iter()
        .zip(&reports)
        .map(|(s, r)| ExpansionRecord { spec: s, report: r })
        .collect();
    let files = ctx.write_records("expand", "expansion", &records)?;
    let _ = writeln!(text, "verdict: {}", verdict.label());
    Ok(Outcome { verdict, text, files })
}

pub fn cmd_verify(ctx: &Context) -> Result<Outcome, CliError> {
    let plan = ctx.config.plan();
    if plan.specs.is_empty() {
        return Err(CliError::Config("verify needs at least one spec".into()));
    }
    let result = run_experiment(&plan)?;
    let text = render_table(&result);
    let files = match &ctx.out {
        Some(dir) => {
            let f = write_results(&plan, &result, dir, &ctx.hash)?;
            vec![f.records, f.table, f.columns]
        }
        None => Vec::new(),
    };
    Ok(Outcome {
        verdict: result.verdict,
        text,
        files,
    })
}

/// Rebuilds an [`ExperimentResult`] from `results.jsonl`.
pub fn read_results(path: &Path) -> Result<ExperimentResult, CliError> {
    let text = fs::read_to_string(path)?;
    let mut result = ExperimentResult {
        plan_hash: String::new(),
        version: String::new(),
        points: Vec::new(),
        fits: Vec::new(),
        skipped: Vec::new(),
        warnings: Vec::new(),
        truncated: false,
        verdict: Verdict::Inconclusive,
    };
    let mut saw_verdict = false;
    for (line_no, line) in text.lines().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line)?;
        match v["kind"].as_str() {
            Some("plan") => {
                result.plan_hash = v["plan_hash"].as_str().unwrap_or_default().to_string();
                result.version = v["version"].as_str().unwrap_or_default().to_string();
            }
            Some("point") => result.points.push(serde_json::from_value::<PointRecord>(v)?),
            Some("fit") => result.fits.push(serde_json::from_value::<FitRecord>(v)?),
            Some("verdict") => {
                result.verdict = serde_json::from_value(v["verdict"].clone())?;
                result.truncated = v["truncated"].as_bool().unwrap_or(false);
                result.warnings = serde_json::from_value(v["warnings"].clone())?;
                result.skipped = serde_json::from_value(v["skipped"].clone())?;
                saw_verdict = true;
            }
            other => {
                return Err(CliError::Report(format!(
                    "line {}: unexpected record kind {other:?}",
                    line_no + 1
                )))
            }
        }
    }
    if !saw_verdict {
        return Err(CliError::Report(format!("{} has no verdict line", path.display())));
    }
    Ok(result)
}

pub fn cmd_report(ctx: &Context) -> Result<Outcome, CliError> {
    let dir = ctx
        .out
        .as_ref()
        .ok_or_else(|| CliError::Config("report needs --out or a config with an output directory".into()))?;
    let result = read_results(&dir.join("results.jsonl"))?;
    let text = render_table(&result);
    Ok(Outcome {
        verdict: result.verdict,
        text,
        files: Vec::new(),
    })
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let ctx = Context::from_cli(cli)?;
    match &cli.command {
        Command::CheckIdentities => cmd_check_identities(&ctx),
        Command::Predict { specs } => cmd_predict(&ctx, specs),
        Command::Expand { specs, p } => cmd_expand(&ctx, specs, *p),
        Command::Verify => cmd_verify(&ctx),
        Command::Report => cmd_report(&ctx),
    }
}
