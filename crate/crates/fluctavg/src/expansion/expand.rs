use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::canon::graph_code;
use super::graph::{ExpansionGraph, Stage, XEdge};

/// Which summation vertices every entry is expanded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexScope {
    /// Every summation vertex of `γ^p`.
    #[default]
    All,
    /// Only the preimages of the `Q` set.
    QOnly,
}

#[derive(Debug, Clone)]
pub struct GammaClass {
    /// First representative reached in the expansion order.
    pub graph: ExpansionGraph,
    pub multiplicity: usize,
    pub survives: bool,
    pub linkings: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ExpansionOutcome {
    pub classes: Vec<GammaClass>,
    /// Completed expansion histories (terms), before deduplication.
    pub histories: usize,
    pub surviving_histories: usize,
    /// Branches cut off at `stop_k` edges.
    pub remainders: usize,
    pub truncated: bool,
    pub min_surviving_edges: Option<usize>,
}

impl ExpansionOutcome {
    pub fn surviving(&self) -> impl Iterator<Item = &GammaClass> {
        self.classes.iter().filter(|c| c.survives)
    }
}

/// `true` when every vertex of `π^{-1}(F)` is incident to an entry of a
/// different copy.
pub fn survives(g: &ExpansionGraph, f_set: &[usize]) -> bool {
    g.summation().filter(|&v| f_set.contains(&g.projection[v])).all(|v| {
        let own = g.copy_of(v);
        g.edges
            .iter()
            .any(|e| e.copy != own && (e.source == v || e.target == v))
    })
}

struct Expander<'a> {
    scope: u64,
    f_set: &'a [usize],
    stop_k: usize,
    cap: usize,
    base_edges: usize,
    index: HashMap<(bool, Vec<u64>), usize>,
    out: ExpansionOutcome,
}

impl Expander<'_> {
    fn visit(&mut self, g: &mut ExpansionGraph) {
        if self.out.truncated {
            return;
        }
        let next = g.edges.iter().position(|e| !g.is_maximal(e, self.scope));
        let Some(i) = next else {
            self.leaf(g);
            return;
        };
        let e = g.edges[i];
        let missing = self.scope & !(e.upper | g.bit(e.source) | g.bit(e.target));
        let d = g.n_ext + missing.trailing_zeros() as usize;
        let bit = g.bit(d);

        g.edges[i].upper |= bit;
        self.visit(g);
        g.edges[i].upper = e.upper;

        if g.edges.len() + 1 > self.stop_k {
            self.out.remainders += 1;
            return;
        }
        g.edges[i] = XEdge { target: d, ..e };
        g.edges.insert(i + 1, XEdge { source: d, ..e });
        self.visit(g);
        g.edges.remove(i + 1);
        g.edges[i] = e;
    }

    fn leaf(&mut self, g: &ExpansionGraph) {
        let alive = survives(g, self.f_set);
        self.out.histories += 1;
        if alive {
            self.out.surviving_histories += 1;
            let m = g.edges.len();
            self.out.min_surviving_edges = Some(self.out.min_surviving_edges.map_or(m, |x| x.min(m)));
        }
        let key = (alive, graph_code(g, false));
        match self.index.get(&key) {
            Some(&k) => self.out.classes[k].multiplicity += 1,
            None => {
                if self.out.classes.len() >= self.cap {
                    self.out.truncated = true;
                    return;
                }
                self.index.insert(key, self.out.classes.len());
                let mut graph = g.clone();
                graph.stage = Stage::Gamma;
                self.out.classes.push(GammaClass {
                    graph,
                    multiplicity: 1,
                    survives: alive,
                    linkings: g.edges.len() - self.base_edges,
                });
            }
        }
    }
}

/// Maximal expansion of `γ^p` in the summation vertices selected by
/// `scope`. At each step the first non-maximal edge is expanded in its
/// smallest missing vertex; branches that would exceed `stop_k` edges are
/// counted as remainder terms. Leaves are deduplicated up to isomorphism.
pub fn maximal_expansion(
    power: &ExpansionGraph,
    f_set: &[usize],
    scope: IndexScope,
    stop_k: usize,
    cap: usize,
) -> ExpansionOutcome {
    let mask = match scope {
        IndexScope::All => power.full_mask(),
        IndexScope::QOnly => power
            .summation()
            .filter(|&v| f_set.contains(&power.projection[v]))
            .fold(0, |m, v| m | power.bit(v)),
    };
    let mut ex = Expander {
        scope: mask,
        f_set,
        stop_k,
        cap,
        base_edges: power.edges.len(),
        index: HashMap::new(),
        out: ExpansionOutcome::default(),
    };
    let mut g = power.clone();
    ex.visit(&mut g);
    ex.out
}
