use serde::{Deserialize, Serialize};

use super::graph::{ExpansionGraph, Style};
use super::resolve::upsilon_sigma;
use crate::graphs::{classify, AveragingSpec};

/// Quantities of `Δ` and `p` entering the target bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentContext {
    pub p: usize,
    pub deg: usize,
    pub f: usize,
    pub charged: usize,
    /// Index coincidences already paid for by the weight, each worth `M^{-1}`.
    pub merged: usize,
}

impl ExponentContext {
    pub fn new(spec: &AveragingSpec, p: usize) -> Self {
        ExponentContext {
            p,
            deg: spec.graph.deg(),
            f: spec.q_set.len(),
            charged: classify(spec).charged.len(),
            merged: 0,
        }
    }

    /// `p (deg + |F|)`.
    pub fn target_psi(&self) -> usize {
        self.p * (self.deg + self.f)
    }

    /// `p |V_c|`.
    pub fn target_phi(&self) -> usize {
        self.p * self.charged
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedVertices {
    pub charged: Vec<usize>,
    pub marked: Vec<usize>,
}

/// Charged and marked vertices of a maximally expanded graph. A charged
/// vertex is marked when it was never linked to.
pub fn marked_vertices(gamma: &ExpansionGraph, spec: &AveragingSpec) -> MarkedVertices {
    let class = classify(spec);
    let mut charged = Vec::new();
    let mut marked = Vec::new();
    for v in gamma.summation() {
        let base = gamma.projection[v];
        if !class.charged.contains(&base) {
            continue;
        }
        charged.push(v);
        let expected = spec.graph.degree(base) + if spec.in_q(base) { 2 } else { 0 };
        if gamma.degree(v) == expected {
            marked.push(v);
        }
    }
    MarkedVertices { charged, marked }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkedCase {
    /// All blocks at the vertex are pairs.
    A,
    /// Some block at the vertex has three or more members.
    B,
    /// Dotted edges join the vertex to another original vertex.
    C,
}

pub fn marked_case(upsilon: &ExpansionGraph, i: usize) -> MarkedCase {
    let mut paired_only = true;
    for e in &upsilon.edges {
        let Style::Wiggly { strokes } = e.style else {
            continue;
        };
        if e.source != i && e.target != i {
            continue;
        }
        let other = if e.source == i { e.target } else { e.source };
        if upsilon.is_summation(other) {
            return MarkedCase::C;
        }
        if strokes > 0 {
            paired_only = false;
        }
    }
    if paired_only {
        MarkedCase::A
    } else {
        MarkedCase::B
    }
}

/// Exponents of `Ψ`, `Φ` and `M` in the bound read off an `Υ` graph.
/// `m_half` is twice the exponent of `M^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphBound {
    pub psi: usize,
    pub phi: usize,
    pub m_half: usize,
}

impl GraphBound {
    pub fn m_exp(&self) -> f64 {
        self.m_half as f64 / 2.0
    }

    /// Whether `Ψ^psi Φ^phi M^{-m_half/2} ≤ Ψ^{P} Φ^{p|V_c|}` follows from
    /// `M^{-1/2} ≤ ΨΦ` and `Ψ ≤ Φ ≤ 1`.
    pub fn dominated(&self, ctx: &ExponentContext) -> bool {
        let psi = self.psi + self.m_half;
        let phi = self.phi + self.m_half;
        psi >= ctx.target_psi() && psi + phi >= ctx.target_psi() + ctx.target_phi()
    }
}

/// Bound of one `Υ`: a `Ψ` per resolvent edge, a `Φ` per marked vertex in
/// case (a) or (b), and `M^{-1/2}` per dotted edge and per stroke not
/// already spent on a case (b) vertex.
pub fn bound_from_graph(upsilon: &ExpansionGraph, marked: &[usize], merged: usize) -> GraphBound {
    let sigma = upsilon_sigma(upsilon);
    let mut ab = 0;
    let mut b = 0;
    for &i in marked {
        match marked_case(upsilon, i) {
            MarkedCase::A => ab += 1,
            MarkedCase::B => {
                ab += 1;
                b += 1
            }
            MarkedCase::C => {}
        }
    }
    let fresh_strokes: usize = upsilon
        .edges
        .iter()
        .filter(|e| !upsilon.is_summation(e.source) || !upsilon.is_summation(e.target))
        .filter_map(|e| match e.style {
            Style::Wiggly { strokes } => Some(strokes as usize),
            _ => None,
        })
        .sum();
    GraphBound {
        psi: upsilon.resolvent_edge_count(),
        phi: ab,
        m_half: sigma + fresh_strokes.saturating_sub(b) + 2 * merged,
    }
}

/// Violations of the structural facts about a maximally expanded `Γ`.
pub fn check_gamma(gamma: &ExpansionGraph, marked: &MarkedVertices, ctx: &ExponentContext) -> Vec<String> {
    let mut out = Vec::new();
    for &v in &marked.marked {
        let (nu, nu_star) = gamma.legs(v);
        if nu == nu_star {
            out.push(format!("marked vertex {v} has equal legs {nu}"));
        }
    }
    let lower = (ctx.target_psi() + marked.charged.len()).saturating_sub(marked.marked.len());
    if gamma.edges.len() < lower {
        out.push(format!(
            "{} edges, below p(deg+|F|) + |V_c| - |V_m| = {lower}",
            gamma.edges.len()
        ));
    }
    out
}

fn is_chain_child(upsilon: &ExpansionGraph, j: usize) -> bool {
    let at: Vec<_> = upsilon
        .edges
        .iter()
        .filter(|e| e.source == j || e.target == j)
        .collect();
    if at.len() != 3 || at.iter().any(|e| e.source == e.target) {
        return false;
    }
    let wiggly = at
        .iter()
        .filter(|e| e.style == Style::Wiggly { strokes: 0 })
        .count();
    let solid = at.iter().filter(|e| e.style == Style::Solid).count();
    let dashed = at.iter().filter(|e| e.style == Style::Dashed).count();
    wiggly == 1 && (solid == 2 || dashed == 2)
}

/// Violations of edge conservation and of the case structure at marked
/// vertices for one `Υ` of `gamma`, plus a failed domination of the bound.
pub fn check_upsilon(
    gamma: &ExpansionGraph,
    upsilon: &ExpansionGraph,
    marked: &MarkedVertices,
    ctx: &ExponentContext,
) -> Vec<String> {
    let mut out = Vec::new();
    let sigma = upsilon_sigma(upsilon);
    if upsilon.resolvent_edge_count() + sigma != gamma.edges.len() {
        out.push(format!(
            "edge conservation: {} resolvent + {sigma} dotted != {}",
            upsilon.resolvent_edge_count(),
            gamma.edges.len()
        ));
    }
    for &i in &marked.marked {
        let children: Vec<usize> = upsilon.fresh().filter(|&j| upsilon.projection[j] == i).collect();
        match marked_case(upsilon, i) {
            MarkedCase::A => {
                if !children.iter().any(|&j| is_chain_child(upsilon, j)) {
                    out.push(format!("case (a) vertex {i} has no chain child"));
                }
            }
            MarkedCase::B => {
                let crossed = upsilon.edges.iter().any(|e| {
                    matches!(e.style, Style::Wiggly { strokes } if strokes > 0)
                        && (e.source == i || e.target == i)
                });
                if !crossed {
                    out.push(format!("case (b) vertex {i} has no crossed wiggly edge"));
                }
            }
            MarkedCase::C => {
                let joined = upsilon.edges.iter().any(|e| {
                    matches!(e.style, Style::Wiggly { .. })
                        && upsilon.is_summation(e.source)
                        && upsilon.is_summation(e.target)
                        && (e.source == i || e.target == i)
                });
                if !joined {
                    out.push(format!("case (c) vertex {i} has no wiggly edge to an original vertex"));
                }
            }
        }
    }
    let bound = bound_from_graph(upsilon, &marked.marked, ctx.merged);
    if !bound.dominated(ctx) {
        out.push(format!(
            "bound Ψ^{} Φ^{} M^-{} not dominated by Ψ^{} Φ^{}",
            bound.psi,
            bound.phi,
            bound.m_exp(),
            ctx.target_psi(),
            ctx.target_phi()
        ));
    }
    out
}
