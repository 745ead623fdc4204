//! Symbolic expansion of `E|X|^p` into graphs: power graph, maximal
//! expansion by linking, vertex resolution, lumping, and the bound read off
//! each resulting graph.

pub mod canon;
mod expand;
mod graph;
mod marked;
mod resolve;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::{canonical_code, graph_code};
pub use expand::{maximal_expansion, survives, ExpansionOutcome, GammaClass, IndexScope};
pub use graph::{link, power_graph, ExpansionGraph, Stage, Style, VertexKind, XEdge, SHARED};
pub use marked::{
    bound_from_graph, check_gamma, check_upsilon, marked_case, marked_vertices, ExponentContext, GraphBound,
    MarkedCase, MarkedVertices,
};
pub use resolve::{
    build_upsilon, for_each_lumping, fresh_leg, lump, parent_partitions, resolve_vertices, upsilon_sigma, vanishes,
    Leg, Lump, Lumping,
};

use crate::ensemble::SymmetryClass;
use crate::graphs::{AdmissibleGraph, AveragingSpec};

#[derive(Debug, Error)]
pub enum ExpansionError {
    #[error("power p = {0} must be even and positive")]
    OddPower(usize),
    #[error("{0} vertices exceed the supported size")]
    TooManyVertices(usize),
    #[error("illegal linking: {0}")]
    IllegalLink(String),
    #[error("loop at vertex {0}: resolution needs a loop-free graph")]
    LoopInResolution(usize),
    #[error("stop_k = {stop_k} is below p·deg = {minimum}")]
    StopTooSmall { stop_k: usize, minimum: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionConfig {
    pub p: usize,
    /// Largest edge count kept; defaults to `p (deg + |F|)`.
    pub stop_k: Option<usize>,
    /// Graphs kept per stage before truncation.
    pub cap: usize,
    pub scope: IndexScope,
    pub class: SymmetryClass,
    pub merged: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            p: 2,
            stop_k: None,
            cap: 100_000,
            scope: IndexScope::All,
            class: SymmetryClass::ComplexHermitian,
            merged: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub p: usize,
    pub target_psi: usize,
    pub target_phi: usize,
    pub stop_k: usize,
    pub histories: usize,
    pub surviving_histories: usize,
    pub remainders: usize,
    pub gamma_classes: usize,
    pub surviving_classes: usize,
    pub min_surviving_edges: Option<usize>,
    pub theta_count: usize,
    pub vanishing_theta: usize,
    pub upsilon_count: usize,
    pub cases: CaseCounts,
    /// Smallest `ψ + m_half` seen, i.e. the tightest `Ψ` exponent after
    /// trading powers of `M`.
    pub min_psi_effective: Option<usize>,
    pub violation_count: usize,
    pub violations: Vec<String>,
    pub truncated: Vec<String>,
}

impl ExpansionReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0 && self.min_surviving_edges.is_none_or(|m| m >= self.target_psi)
    }

    pub fn complete(&self) -> bool {
        self.truncated.is_empty()
    }
}

const KEPT_VIOLATIONS: usize = 20;

/// Calls `visit(gamma, theta, upsilon)` for every `Υ` of every surviving `Γ`
/// class, stopping early when `visit` returns `false`. Returns the number of
/// `Θ` graphs, of vanishing `Θ`, of `Υ`, and truncation notes.
pub fn visit_upsilons<F>(
    outcome: &ExpansionOutcome,
    class: SymmetryClass,
    cap: usize,
    mut visit: F,
) -> Result<(usize, usize, usize, Vec<String>), ExpansionError>
where
    F: FnMut(&GammaClass, &ExpansionGraph, &ExpansionGraph) -> bool,
{
    let mut thetas = 0;
    let mut vanishing = 0;
    let mut upsilons = 0;
    let mut truncated = Vec::new();
    'outer: for gamma in outcome.surviving() {
        for theta in resolve_vertices(&gamma.graph)? {
            if thetas >= cap {
                truncated.push(format!("theta stage stopped at {cap} graphs"));
                break 'outer;
            }
            thetas += 1;
            if vanishes(&theta, class) {
                vanishing += 1;
                continue;
            }
            let mut stop = false;
            let (n, cut) = for_each_lumping(&theta, class, cap.saturating_sub(upsilons), |l| {
                let upsilon = build_upsilon(&theta, l);
                if !visit(gamma, &theta, &upsilon) {
                    stop = true;
                    return false;
                }
                true
            });
            upsilons += n;
            if cut {
                truncated.push(format!("upsilon stage stopped at {cap} graphs"));
                break 'outer;
            }
            if stop {
                break 'outer;
            }
        }
    }
    Ok((thetas, vanishing, upsilons, truncated))
}

/// Runs the whole expansion for `spec` and checks every structural claim
/// along the way.
pub fn run_expansion(spec: &AveragingSpec, cfg: &ExpansionConfig) -> Result<ExpansionReport, ExpansionError> {
    let mut ctx = ExponentContext::new(spec, cfg.p);
    ctx.merged = cfg.merged;
    let minimum = cfg.p * spec.graph.deg();
    let stop_k = cfg.stop_k.unwrap_or(ctx.target_psi());
    if stop_k < minimum {
        return Err(ExpansionError::StopTooSmall { stop_k, minimum });
    }
    let power = power_graph(&spec.graph, cfg.p)?;
    let outcome = maximal_expansion(&power, &spec.q_set, cfg.scope, stop_k, cfg.cap);

    let mut violations = Vec::new();
    let mut violation_count = 0;
    let mut record = |msg: String| {
        violation_count += 1;
        if violations.len() < KEPT_VIOLATIONS {
            violations.push(msg);
        }
    };
    let mut marked_per_class = Vec::new();
    for (k, gamma) in outcome.classes.iter().enumerate() {
        let marked = marked_vertices(&gamma.graph, spec);
        if gamma.survives {
            for v in check_gamma(&gamma.graph, &marked, &ctx) {
                record(format!("gamma {k}: {v}"));
            }
        }
        marked_per_class.push(marked);
    }

    let mut cases = CaseCounts::default();
    let mut min_psi_effective: Option<usize> = None;
    let mut upsilon_violations = Vec::new();
    let index_of = |g: &GammaClass| {
        outcome
            .classes
            .iter()
            .position(|c| std::ptr::eq(c, g))
            .expect("class from outcome")
    };
    let (theta_count, vanishing_theta, upsilon_count, mut truncated) =
        visit_upsilons(&outcome, cfg.class, cfg.cap, |gamma, _theta, upsilon| {
            let k = index_of(gamma);
            let marked = &marked_per_class[k];
            for &i in &marked.marked {
                match marked_case(upsilon, i) {
                    MarkedCase::A => cases.a += 1,
                    MarkedCase::B => cases.b += 1,
                    MarkedCase::C => cases.c += 1,
                }
            }
            let bound = bound_from_graph(upsilon, &marked.marked, ctx.merged);
            let eff = bound.psi + bound.m_half;
            min_psi_effective = Some(min_psi_effective.map_or(eff, |m| m.min(eff)));
            for v in check_upsilon(&gamma.graph, upsilon, marked, &ctx) {
                upsilon_violations.push(format!("gamma {k}: {v}"));
            }
            true
        })?;
    for v in upsilon_violations {
        record(v);
    }
    if outcome.truncated {
        truncated.insert(0, format!("gamma stage stopped at {} classes", cfg.cap));
    }
    Ok(ExpansionReport {
        p: cfg.p,
        target_psi: ctx.target_psi(),
        target_phi: ctx.target_phi(),
        stop_k,
        histories: outcome.histories,
        surviving_histories: outcome.surviving_histories,
        remainders: outcome.remainders,
        gamma_classes: outcome.classes.len(),
        surviving_classes: outcome.surviving().count(),
        min_surviving_edges: outcome.min_surviving_edges,
        theta_count,
        vanishing_theta,
        upsilon_count,
        cases,
        min_psi_effective,
        violation_count,
        violations,
        truncated,
    })
}

fn vertex_label(g: &ExpansionGraph, delta: &AdmissibleGraph, v: usize) -> String {
    match g.kind(v) {
        VertexKind::External => delta.name(g.projection[v]).to_string(),
        VertexKind::Summation => format!("{}#{}", delta.name(g.projection[v]), g.copy_of(v)),
        VertexKind::Fresh => format!("x{v}"),
    }
}

/// Plain-text dump of an expansion graph, one vertex or edge per line.
pub fn dump_graph(g: &ExpansionGraph, delta: &AdmissibleGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "stage {:?}", g.stage);
    for v in 0..g.vertex_count() {
        let kind = match g.kind(v) {
            VertexKind::External => "external".to_string(),
            VertexKind::Summation => "summation".to_string(),
            VertexKind::Fresh => format!("fresh of {}", vertex_label(g, delta, g.projection[v])),
        };
        let _ = writeln!(out, "vertex {} {kind}", vertex_label(g, delta, v));
    }
    for e in &g.edges {
        let style = match e.style {
            Style::Solid => "solid".to_string(),
            Style::Dashed => "dashed".to_string(),
            Style::Dotted => "dotted".to_string(),
            Style::Wiggly { strokes } => format!("wiggly/{strokes}"),
        };
        let upper: Vec<String> = g
            .summation()
            .filter(|&v| e.upper & g.bit(v) != 0)
            .map(|v| vertex_label(g, delta, v))
            .collect();
        let _ = write!(
            out,
            "edge {} -> {} {style}",
            vertex_label(g, delta, e.source),
            vertex_label(g, delta, e.target)
        );
        if e.style.is_resolvent() && g.stage <= Stage::Gamma {
            let _ = write!(out, " copy {} upper {{{}}}", e.copy, upper.join(","));
        }
        out.push('\n');
    }
    out
}
