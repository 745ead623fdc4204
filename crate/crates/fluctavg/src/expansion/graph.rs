use serde::{Deserialize, Serialize};

use super::ExpansionError;
use crate::graphs::{AdmissibleGraph, Atom, Colour};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    External,
    Summation,
    Fresh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Solid,
    Dashed,
    Dotted,
    Wiggly { strokes: u32 },
}

impl Style {
    pub fn is_resolvent(self) -> bool {
        matches!(self, Style::Solid | Style::Dashed)
    }

    pub fn flipped(self) -> Self {
        match self {
            Style::Solid => Style::Dashed,
            Style::Dashed => Style::Solid,
            other => other,
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            Style::Solid => 1,
            Style::Dashed => 2,
            Style::Dotted => 3,
            Style::Wiggly { strokes } => 4 + strokes as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Power,
    Gamma,
    Theta,
    Upsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct XEdge {
    pub source: usize,
    pub target: usize,
    pub style: Style,
    /// Copy of `Δ` the entry belongs to.
    pub copy: u16,
    /// Upper indices, as a bitmask over summation vertices.
    pub upper: u64,
}

/// Vertices are ordered externals, original summation vertices, fresh vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionGraph {
    pub stage: Stage,
    pub n_ext: usize,
    pub n_sum: usize,
    /// `π` for external and summation vertices (vertex of `Δ`); for fresh
    /// vertices the parent summation vertex.
    pub projection: Vec<usize>,
    /// Copy index of each summation vertex.
    pub copies: Vec<u16>,
    pub edges: Vec<XEdge>,
}

pub const SHARED: u16 = u16::MAX;

impl ExpansionGraph {
    pub fn vertex_count(&self) -> usize {
        self.projection.len()
    }

    pub fn kind(&self, v: usize) -> VertexKind {
        if v < self.n_ext {
            VertexKind::External
        } else if v < self.n_ext + self.n_sum {
            VertexKind::Summation
        } else {
            VertexKind::Fresh
        }
    }

    pub fn summation(&self) -> std::ops::Range<usize> {
        self.n_ext..self.n_ext + self.n_sum
    }

    pub fn fresh(&self) -> std::ops::Range<usize> {
        self.n_ext + self.n_sum..self.vertex_count()
    }

    pub fn is_summation(&self, v: usize) -> bool {
        self.kind(v) == VertexKind::Summation
    }

    pub fn bit(&self, v: usize) -> u64 {
        if self.is_summation(v) {
            1u64 << (v - self.n_ext)
        } else {
            0
        }
    }

    pub fn full_mask(&self) -> u64 {
        if self.n_sum == 64 {
            u64::MAX
        } else {
            (1u64 << self.n_sum) - 1
        }
    }

    /// Parent of a fresh vertex.
    pub fn parent(&self, v: usize) -> Option<usize> {
        (self.kind(v) == VertexKind::Fresh).then(|| self.projection[v])
    }

    pub fn copy_of(&self, v: usize) -> u16 {
        if self.is_summation(v) {
            self.copies[v - self.n_ext]
        } else {
            SHARED
        }
    }

    /// Legs at `v`; loops count twice.
    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|e| (e.source == v) as usize + (e.target == v) as usize)
            .sum()
    }

    /// Resolvent legs of colour `1` and `*` at `v`.
    pub fn legs(&self, v: usize) -> (usize, usize) {
        let mut nu = 0;
        let mut nu_star = 0;
        for e in &self.edges {
            let k = (e.source == v) as usize + (e.target == v) as usize;
            match e.style {
                Style::Solid => nu += k,
                Style::Dashed => nu_star += k,
                _ => {}
            }
        }
        (nu, nu_star)
    }

    pub fn resolvent_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.style.is_resolvent()).count()
    }

    /// Number of dotted edges joining the original summation vertices `i` and `j`.
    pub fn sigma(&self, i: usize, j: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| {
                e.style == Style::Dotted
                    && ((e.source == i && e.target == j) || (e.source == j && e.target == i))
            })
            .count()
    }

    /// Total number of dotted edges between original summation vertices.
    pub fn sigma_total(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| e.style == Style::Dotted && self.is_summation(e.source) && self.is_summation(e.target))
            .count()
    }

    /// `true` when `upper ∪ {u, v}` contains every summation vertex in `scope`.
    pub fn is_maximal(&self, e: &XEdge, scope: u64) -> bool {
        (e.upper | self.bit(e.source) | self.bit(e.target)) & scope == scope
    }

    /// `Δ` itself as a one-copy graph with every edge taken as maximally expanded.
    pub fn from_admissible(delta: &AdmissibleGraph) -> Result<Self, ExpansionError> {
        let mut g = power_graph_copies(delta, 1, 0)?;
        g.stage = Stage::Gamma;
        let full = g.full_mask();
        for e in g.edges.iter_mut() {
            e.upper = full;
        }
        Ok(g)
    }
}

fn atom_style(atom: Atom) -> Style {
    match atom.colour() {
        Colour::Solid => Style::Solid,
        Colour::Dashed => Style::Dashed,
    }
}

fn power_graph_copies(delta: &AdmissibleGraph, copies: usize, inverted_from: usize) -> Result<ExpansionGraph, ExpansionError> {
    let ks = delta.summation_count();
    let n_ext = delta.externals().len();
    let n_sum = ks * copies;
    if n_sum > 64 {
        return Err(ExpansionError::TooManyVertices(n_sum));
    }
    let mut projection: Vec<usize> = delta.externals().collect();
    let mut copy_tags = Vec::with_capacity(n_sum);
    for c in 0..copies {
        for k in 0..ks {
            projection.push(k);
            copy_tags.push(c as u16);
        }
    }
    let map = |v: usize, c: usize| {
        if delta.is_summation(v) {
            n_ext + c * ks + v
        } else {
            v - ks
        }
    };
    let mut edges = Vec::with_capacity(copies * delta.deg());
    for c in 0..copies {
        let inverted = c >= inverted_from;
        for e in delta.edges() {
            let (s, t) = (map(e.source, c), map(e.target, c));
            let style = atom_style(e.atom);
            edges.push(if inverted {
                XEdge {
                    source: t,
                    target: s,
                    style: style.flipped(),
                    copy: c as u16,
                    upper: 0,
                }
            } else {
                XEdge {
                    source: s,
                    target: t,
                    style,
                    copy: c as u16,
                    upper: 0,
                }
            });
        }
    }
    Ok(ExpansionGraph {
        stage: Stage::Power,
        n_ext,
        n_sum,
        projection,
        copies: copy_tags,
        edges,
    })
}

/// `γ^p(Δ)`: `p/2` copies of `Δ` followed by `p/2` conjugated copies, with
/// external vertices shared.
pub fn power_graph(delta: &AdmissibleGraph, p: usize) -> Result<ExpansionGraph, ExpansionError> {
    if p == 0 || p % 2 == 1 {
        return Err(ExpansionError::OddPower(p));
    }
    power_graph_copies(delta, p, p / 2)
}

/// Replaces edge `(i, j)` by `(i, k), (k, j)` of the same colour and copy.
pub fn link(graph: &ExpansionGraph, edge: usize, vertex: usize) -> Result<ExpansionGraph, ExpansionError> {
    let e = *graph
        .edges
        .get(edge)
        .ok_or_else(|| ExpansionError::IllegalLink(format!("no edge {edge}")))?;
    if !graph.is_summation(vertex) {
        return Err(ExpansionError::IllegalLink(format!("vertex {vertex} is not a summation vertex")));
    }
    if !e.style.is_resolvent() {
        return Err(ExpansionError::IllegalLink("only resolvent edges can be linked".into()));
    }
    if (e.upper | graph.bit(e.source) | graph.bit(e.target)) & graph.bit(vertex) != 0 {
        return Err(ExpansionError::IllegalLink(format!(
            "vertex {vertex} is already an endpoint or upper index of edge {edge}"
        )));
    }
    let mut out = graph.clone();
    out.edges[edge] = XEdge { target: vertex, ..e };
    out.edges.insert(edge + 1, XEdge { source: vertex, ..e });
    Ok(out)
}
