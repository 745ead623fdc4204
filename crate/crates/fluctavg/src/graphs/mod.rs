//! Admissible graphs encoding resolvent monomials, their classification and
//! the exponents predicted for their weighted averages.

mod eval;
mod parse;
mod weight;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::EnsembleError;
use crate::resolvent::ResolventError;

pub use eval::{
    evaluate_monomial, evaluate_p_product, evaluate_x, evaluate_x_weighted, EntrySource,
    EstimatorConfig, LocalTable, PEstimate, RowResampler, SumMode, XEstimate,
};
pub use parse::{parse_monomial, print_monomial};
pub use weight::{check_weight, Factor, Weight, WeightIndex, WeightReport};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("chain mode not applicable: {0}")]
    NotAChain(String),
    #[error("index assignment violates the star constraint: {0}")]
    StarConstraint(String),
    #[error("exact star sum limited to {limit} summation vertices, spec has {got}")]
    TooManySummation { got: usize, limit: usize },
    #[error("resampling estimator needs K >= 2, got {0}")]
    TooFewResamples(usize),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colour {
    Solid,
    Dashed,
}

/// Resolvent factor carried by an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    /// `G_xy`, or `G_xx - m` on the diagonal.
    G,
    /// `(G^*)_xy = conj(G_yx)`, diagonal shifted by `conj(m)`.
    GStar,
    /// `1/G_xx - 1/m`; diagonal only.
    GInv,
}

impl Atom {
    pub fn colour(self) -> Colour {
        match self {
            Atom::GStar => Colour::Dashed,
            Atom::G | Atom::GInv => Colour::Solid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub atom: Atom,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.source == self.target
    }
}

/// Directed edge-coloured multigraph. Summation vertices come first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibleGraph {
    names: Vec<String>,
    summation: usize,
    edges: Vec<Edge>,
}

impl AdmissibleGraph {
    pub fn new(
        summation: Vec<String>,
        external: Vec<String>,
        edges: Vec<Edge>,
    ) -> Result<Self, GraphError> {
        let n_sum = summation.len();
        let names: Vec<String> = summation.into_iter().chain(external).collect();
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(GraphError::Invalid(format!("index {a} declared twice")));
            }
        }
        if n_sum == 0 {
            return Err(GraphError::Invalid("no summation vertex".into()));
        }
        if edges.is_empty() {
            return Err(GraphError::Invalid("empty edge list".into()));
        }
        let mut used = vec![false; names.len()];
        for e in &edges {
            if e.source >= names.len() || e.target >= names.len() {
                return Err(GraphError::Invalid("edge endpoint out of range".into()));
            }
            if e.source >= n_sum && e.target >= n_sum {
                return Err(GraphError::Invalid(format!(
                    "edge {}->{} joins two external indices",
                    names[e.source], names[e.target]
                )));
            }
            if e.atom == Atom::GInv && !e.is_loop() {
                return Err(GraphError::Invalid("ginv is diagonal-only".into()));
            }
            used[e.source] = true;
            used[e.target] = true;
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(GraphError::Invalid(format!("index {} is isolated", names[v])));
        }
        Ok(AdmissibleGraph {
            names,
            summation: n_sum,
            edges,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn summation_count(&self) -> usize {
        self.summation
    }

    pub fn summation(&self) -> std::ops::Range<usize> {
        0..self.summation
    }

    pub fn externals(&self) -> std::ops::Range<usize> {
        self.summation..self.names.len()
    }

    pub fn is_summation(&self, v: usize) -> bool {
        v < self.summation
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `deg(Δ) = |E|`.
    pub fn deg(&self) -> usize {
        self.edges.len()
    }

    /// Number of incident legs; loops count twice.
    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|e| (e.source == v) as usize + (e.target == v) as usize)
            .sum()
    }

    /// Legs of colour `1` and `*` at `v`.
    pub fn legs(&self, v: usize) -> (usize, usize) {
        let mut nu = 0;
        let mut nu_star = 0;
        for e in &self.edges {
            let k = (e.source == v) as usize + (e.target == v) as usize;
            match e.atom.colour() {
                Colour::Solid => nu += k,
                Colour::Dashed => nu_star += k,
            }
        }
        (nu, nu_star)
    }

    fn has_loop_at(&self, v: usize) -> bool {
        self.edges.iter().any(|e| e.is_loop() && e.source == v)
    }

    pub fn is_chain_vertex(&self, v: usize) -> bool {
        if !self.is_summation(v) || self.has_loop_at(v) || self.degree(v) != 2 {
            return false;
        }
        let mut colours = self
            .edges
            .iter()
            .filter(|e| e.source == v || e.target == v)
            .map(|e| e.atom.colour());
        let first = colours.next();
        colours.all(|c| Some(c) == first)
    }

    pub fn is_directed_chain_vertex(&self, v: usize) -> bool {
        self.is_chain_vertex(v)
            && self.edges.iter().filter(|e| e.source == v).count() == 1
            && self.edges.iter().filter(|e| e.target == v).count() == 1
    }

    pub fn is_open_chain(&self) -> bool {
        self.summation().all(|v| self.is_chain_vertex(v))
            && self.externals().len() == 2
            && self.externals().all(|v| self.degree(v) == 1)
    }

    pub fn is_closed_chain(&self) -> bool {
        self.summation().all(|v| self.is_chain_vertex(v))
            && self.externals().len() <= 1
            && self.externals().all(|v| self.degree(v) == 2)
    }

    pub fn is_chain(&self) -> bool {
        self.is_open_chain() || self.is_closed_chain()
    }

    /// Colour-flipped, direction-reversed graph; encodes the conjugate monomial.
    pub fn conjugate(&self) -> Self {
        let edges = self
            .edges
            .iter()
            .map(|e| match e.atom {
                Atom::G => Edge {
                    source: e.target,
                    target: e.source,
                    atom: Atom::GStar,
                },
                Atom::GStar => Edge {
                    source: e.target,
                    target: e.source,
                    atom: Atom::G,
                },
                // 1/G_aa - 1/m has no conjugate atom in the grammar; keep it.
                Atom::GInv => *e,
            })
            .collect();
        AdmissibleGraph {
            names: self.names.clone(),
            summation: self.summation,
            edges,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AveragingMode {
    #[default]
    QAverage,
    PProduct,
    Chain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingSpec {
    pub graph: AdmissibleGraph,
    /// Summation vertices carrying a `Q`, sorted.
    pub q_set: Vec<usize>,
    pub weight: Weight,
    /// Weight indices that are neither vertices nor summed dummies.
    pub params: Vec<String>,
    pub mode: AveragingMode,
}

impl AveragingSpec {
    pub fn with_mode(mut self, mode: AveragingMode) -> Result<Self, GraphError> {
        self.mode = mode;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        match self.mode {
            AveragingMode::QAverage => Ok(()),
            AveragingMode::PProduct if !self.q_set.is_empty() => {
                Err(GraphError::Invalid("P-product mode requires an empty Q set".into()))
            }
            AveragingMode::PProduct => Ok(()),
            AveragingMode::Chain => {
                if !self.graph.is_chain() {
                    return Err(GraphError::NotAChain("graph is neither an open nor a closed chain".into()));
                }
                if !self.weight.is_chain_weight(&self.graph) {
                    return Err(GraphError::NotAChain("weight is not of chain form".into()));
                }
                Ok(())
            }
        }
    }

    pub fn in_q(&self, v: usize) -> bool {
        self.q_set.binary_search(&v).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexInfo {
    pub vertex: usize,
    pub nu: usize,
    pub nu_star: usize,
    pub in_q: bool,
    pub charged: bool,
    pub chain: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexClassification {
    pub vertices: Vec<VertexInfo>,
    pub charged: Vec<usize>,
    pub chain_count: usize,
}

pub fn is_charged(nu: usize, nu_star: usize, in_q: bool) -> bool {
    let d = nu.abs_diff(nu_star);
    if in_q {
        d != 2
    } else {
        d != 0
    }
}

pub fn classify(spec: &AveragingSpec) -> VertexClassification {
    let g = &spec.graph;
    let vertices: Vec<VertexInfo> = g
        .summation()
        .map(|v| {
            let (nu, nu_star) = g.legs(v);
            let in_q = spec.in_q(v);
            VertexInfo {
                vertex: v,
                nu,
                nu_star,
                in_q,
                charged: is_charged(nu, nu_star, in_q),
                chain: g.is_chain_vertex(v),
            }
        })
        .collect();
    let charged = vertices.iter().filter(|v| v.charged).map(|v| v.vertex).collect();
    let chain_count = vertices.iter().filter(|v| v.chain).count();
    VertexClassification {
        vertices,
        charged,
        chain_count,
    }
}

/// Exponents of `Ψ` and `Φ` in the predicted bound, and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Prediction {
    pub psi: i64,
    pub phi: i64,
    pub simple: i64,
}

impl Prediction {
    pub fn new(psi: i64, phi: i64) -> Self {
        Prediction {
            psi,
            phi,
            simple: psi + phi,
        }
    }
}

pub fn predicted_exponents(spec: &AveragingSpec) -> Result<Prediction, GraphError> {
    spec.validate()?;
    let class = classify(spec);
    let deg = spec.graph.deg() as i64;
    let f = spec.q_set.len() as i64;
    let vc = class.charged.len() as i64;
    Ok(match spec.mode {
        AveragingMode::QAverage => Prediction::new(deg + f, vc),
        AveragingMode::PProduct => Prediction::new(deg, vc),
        AveragingMode::Chain => Prediction::new(deg + f, class.chain_count as i64 - f),
    })
}

/// Predictions under every mode that applies to `spec`.
pub fn applicable_predictions(spec: &AveragingSpec) -> Vec<(AveragingMode, Prediction)> {
    [AveragingMode::QAverage, AveragingMode::PProduct, AveragingMode::Chain]
        .into_iter()
        .filter_map(|mode| {
            let s = spec.clone().with_mode(mode).ok()?;
            Some((mode, predicted_exponents(&s).ok()?))
        })
        .collect()
}
