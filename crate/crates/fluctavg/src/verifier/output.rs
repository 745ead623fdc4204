use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::{ExperimentPlan, ExperimentResult, VerifierError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultFiles {
    pub records: PathBuf,
    pub table: PathBuf,
    pub columns: PathBuf,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("inf".to_string(), |m| format!("{m:+.3}"))
}

/// Human-readable summary: one row per point, then the fits.
pub fn render_table(result: &ExperimentResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "plan {} (version {})", result.plan_hash, result.version);
    let _ = writeln!(
        out,
        "{:>4} {:>5} {:>6} {:>6} {:>6} {:>11} {:>11} {:>8} {:>7} {:>6}",
        "spec", "W", "N", "E", "eta", "quantile", "bound", "margin", "verdict", "P"
    );
    for p in &result.points {
        let pp = p
            .p_product
            .as_ref()
            .map_or("-".to_string(), |pp| pp.domination.verdict.label().to_string());
        let _ = writeln!(
            out,
            "{:>4} {:>5} {:>6} {:>6.2} {:>6.3} {:>11.4e} {:>11.4e} {:>8} {:>7} {:>6}",
            p.spec_index,
            p.width,
            p.n,
            p.energy,
            p.eta,
            p.domination.quantile.estimate,
            p.bound,
            fmt_opt(p.domination.margin),
            p.domination.verdict.label(),
            pp
        );
    }
    for f in &result.fits {
        match &f.fit {
            Some(fit) => {
                let slope = |l: &Option<crate::stats::LinearFit>| {
                    l.map_or("n/a".to_string(), |l| format!("{:.3} ± {:.3}", l.slope, l.slope_stderr))
                };
                let _ = writeln!(
                    out,
                    "fit spec {}: Ψ^{} Φ^{} slope {}; discriminator Φ^{} slope {}; {} {}",
                    f.spec_index,
                    fit.psi_exp,
                    fit.phi_exp,
                    slope(&fit.fit),
                    fit.discriminator_phi_exp,
                    slope(&fit.discriminator),
                    fit.verdict.label(),
                    fit.note
                );
            }
            None => {
                let _ = writeln!(out, "fit spec {}: {}", f.spec_index, f.note);
            }
        }
    }
    for w in &result.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    for s in &result.skipped {
        let _ = writeln!(out, "skipped: {s}");
    }
    if result.truncated {
        let _ = writeln!(out, "TRUNCATED");
    }
    let _ = writeln!(out, "verdict: {}", result.verdict.label());
    out
}

/// Writes `results.jsonl`, `summary.txt` and `columns.tsv` into `dir`, each
/// tagged with `config_hash`. The files depend only on the plan and its seed.
pub fn write_results(
    plan: &ExperimentPlan,
    result: &ExperimentResult,
    dir: &Path,
    config_hash: &str,
) -> Result<ResultFiles, VerifierError> {
    fs::create_dir_all(dir)?;
    let files = ResultFiles {
        records: dir.join("results.jsonl"),
        table: dir.join("summary.txt"),
        columns: dir.join("columns.tsv"),
    };
    let mut records = Vec::new();
    // the worker count changes nothing else, so it is left out of the record
    let plan = ExperimentPlan {
        workers: None,
        ..plan.clone()
    };
    let header = json!({
        "kind": "plan",
        "config_hash": config_hash,
        "plan_hash": result.plan_hash,
        "version": result.version,
        "plan": &plan,
    });
    writeln!(records, "{}", serde_json::to_string(&header)?)?;
    for p in &result.points {
        let mut v = serde_json::to_value(p)?;
        v["kind"] = json!("point");
        v["plan_hash"] = json!(result.plan_hash);
        writeln!(records, "{}", serde_json::to_string(&v)?)?;
    }
    for f in &result.fits {
        let mut v = serde_json::to_value(f)?;
        v["kind"] = json!("fit");
        v["plan_hash"] = json!(result.plan_hash);
        writeln!(records, "{}", serde_json::to_string(&v)?)?;
    }
    let summary = json!({
        "kind": "verdict",
        "config_hash": config_hash,
        "plan_hash": result.plan_hash,
        "version": result.version,
        "verdict": result.verdict,
        "truncated": result.truncated,
        "warnings": result.warnings,
        "skipped": result.skipped,
    });
    writeln!(records, "{}", serde_json::to_string(&summary)?)?;
    fs::write(&files.records, records)?;
    fs::write(&files.table, format!("config {config_hash}\n{}", render_table(result)))?;

    let mut cols = String::new();
    let _ = writeln!(
        cols,
        "# config {config_hash} plan {} version {}",
        result.plan_hash, result.version
    );
    let _ = writeln!(cols, "spec\tW\tN\tM\tE\teta\tquantile\tbound\tpsi\tphi");
    for p in &result.points {
        let _ = writeln!(
            cols,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:e}\t{:e}\t{:e}\t{:e}",
            p.spec_index,
            p.width,
            p.n,
            p.band_size,
            p.energy,
            p.eta,
            p.domination.quantile.estimate,
            p.bound,
            p.psi,
            p.phi
        );
    }
    fs::write(&files.columns, cols)?;
    Ok(files)
}
