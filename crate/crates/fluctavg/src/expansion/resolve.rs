use serde::{Deserialize, Serialize};

use super::graph::{ExpansionGraph, Stage, Style, XEdge};
use super::ExpansionError;
use crate::ensemble::SymmetryClass;

/// Orientation of the dotted edge at a fresh vertex, seen from its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    In,
    Out,
}

fn push_fresh(theta: &mut ExpansionGraph, parent: usize) -> usize {
    theta.projection.push(parent);
    theta.projection.len() - 1
}

fn dotted(source: usize, target: usize) -> XEdge {
    XEdge {
        source,
        target,
        style: Style::Dotted,
        copy: 0,
        upper: 0,
    }
}

/// All `Θ` graphs of a maximally expanded `Γ`: every resolvent entry with a
/// summation endpoint is expanded around it, and an entry joining two
/// summation vertices branches into a dotted edge or a fresh pair.
pub fn resolve_vertices(gamma: &ExpansionGraph) -> Result<Vec<ExpansionGraph>, ExpansionError> {
    if let Some(e) = gamma.edges.iter().find(|e| e.source == e.target) {
        return Err(ExpansionError::LoopInResolution(e.source));
    }
    let inner: Vec<usize> = gamma
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| gamma.is_summation(e.source) && gamma.is_summation(e.target))
        .map(|(i, _)| i)
        .collect();
    if inner.len() > 24 {
        return Err(ExpansionError::TooManyVertices(inner.len()));
    }
    let mut out = Vec::with_capacity(1 << inner.len());
    for choice in 0u32..(1u32 << inner.len()) {
        let mut theta = ExpansionGraph {
            stage: Stage::Theta,
            edges: Vec::with_capacity(gamma.edges.len() * 3),
            ..gamma.clone()
        };
        for (i, e) in gamma.edges.iter().enumerate() {
            let (u, v) = (e.source, e.target);
            let su = gamma.is_summation(u);
            let sv = gamma.is_summation(v);
            let direct = inner
                .iter()
                .position(|&k| k == i)
                .is_some_and(|bit| choice >> bit & 1 == 1);
            let resolvent = |s, t| XEdge {
                source: s,
                target: t,
                upper: 0,
                ..*e
            };
            match (su, sv) {
                (true, true) if direct => theta.edges.push(dotted(u, v)),
                (true, true) => {
                    let x = push_fresh(&mut theta, u);
                    let y = push_fresh(&mut theta, v);
                    theta.edges.push(dotted(u, x));
                    theta.edges.push(resolvent(x, y));
                    theta.edges.push(dotted(y, v));
                }
                (true, false) => {
                    let x = push_fresh(&mut theta, u);
                    theta.edges.push(dotted(u, x));
                    theta.edges.push(resolvent(x, v));
                }
                (false, true) => {
                    let y = push_fresh(&mut theta, v);
                    theta.edges.push(resolvent(u, y));
                    theta.edges.push(dotted(y, v));
                }
                (false, false) => theta.edges.push(*e),
            }
        }
        out.push(theta);
    }
    Ok(out)
}

/// Leg of the fresh vertex `x` at its parent.
pub fn fresh_leg(theta: &ExpansionGraph, x: usize) -> Leg {
    let parent = theta.projection[x];
    if theta
        .edges
        .iter()
        .any(|e| e.style == Style::Dotted && e.source == parent && e.target == x)
    {
        Leg::Out
    } else {
        Leg::In
    }
}

/// `true` when the expectation over the dotted edges between original
/// vertices vanishes: a single `h_ij`, or in the Hermitian class a pair
/// `h_ij h_ij` in the same direction.
pub fn vanishes(theta: &ExpansionGraph, class: SymmetryClass) -> bool {
    let sum: Vec<usize> = theta.summation().collect();
    for (k, &i) in sum.iter().enumerate() {
        for &j in &sum[k + 1..] {
            let forward = theta
                .edges
                .iter()
                .filter(|e| e.style == Style::Dotted && e.source == i && e.target == j)
                .count();
            let backward = theta
                .edges
                .iter()
                .filter(|e| e.style == Style::Dotted && e.source == j && e.target == i)
                .count();
            let sigma = forward + backward;
            if sigma == 1 {
                return true;
            }
            if sigma == 2 && class == SymmetryClass::ComplexHermitian && forward != 1 {
                return true;
            }
        }
    }
    false
}

/// Blocks of fresh vertices of one `Θ`, grouped by parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lumping {
    pub blocks: Vec<Lump>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lump {
    pub parent: usize,
    pub members: Vec<usize>,
}

fn partitions(items: &[(usize, Leg)], class: SymmetryClass, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
    let Some((&(first, first_leg), rest)) = items.split_first() else {
        out.push(cur.clone());
        return;
    };
    let r = rest.len();
    for mask in 1u32..(1u32 << r) {
        let size = mask.count_ones() as usize + 1;
        if size == 2 && class == SymmetryClass::ComplexHermitian {
            let other = rest[mask.trailing_zeros() as usize].1;
            if other == first_leg {
                continue;
            }
        }
        let mut block = vec![first];
        let mut left = Vec::with_capacity(r);
        for (k, &item) in rest.iter().enumerate() {
            if mask >> k & 1 == 1 {
                block.push(item.0);
            } else {
                left.push(item);
            }
        }
        cur.push(block);
        partitions(&left, class, cur, out);
        cur.pop();
    }
}

/// Admissible partitions of the fresh vertices of `parent` into blocks of
/// size at least two.
pub fn parent_partitions(theta: &ExpansionGraph, parent: usize, class: SymmetryClass) -> Vec<Vec<Vec<usize>>> {
    let items: Vec<(usize, Leg)> = theta
        .fresh()
        .filter(|&x| theta.projection[x] == parent)
        .map(|x| (x, fresh_leg(theta, x)))
        .collect();
    let mut out = Vec::new();
    if items.len() > 16 {
        return out;
    }
    partitions(&items, class, &mut Vec::new(), &mut out);
    out
}

/// Calls `visit` for every lumping of `theta` until it returns `false` or
/// `cap` lumpings have been visited. Returns the number visited and whether
/// the enumeration was cut short by the cap.
pub fn for_each_lumping<F>(theta: &ExpansionGraph, class: SymmetryClass, cap: usize, mut visit: F) -> (usize, bool)
where
    F: FnMut(&Lumping) -> bool,
{
    if vanishes(theta, class) {
        return (0, false);
    }
    let parents: Vec<usize> = theta
        .summation()
        .filter(|&i| theta.fresh().any(|x| theta.projection[x] == i))
        .collect();
    let choices: Vec<Vec<Vec<Vec<usize>>>> = parents
        .iter()
        .map(|&i| parent_partitions(theta, i, class))
        .collect();
    if choices.iter().any(|c| c.is_empty()) {
        return (0, false);
    }
    let mut odometer = vec![0usize; parents.len()];
    let mut visited = 0;
    loop {
        if visited >= cap {
            return (visited, true);
        }
        let mut blocks = Vec::new();
        for (k, &i) in parents.iter().enumerate() {
            for b in &choices[k][odometer[k]] {
                blocks.push(Lump {
                    parent: i,
                    members: b.clone(),
                });
            }
        }
        visited += 1;
        if !visit(&Lumping { blocks }) {
            return (visited, false);
        }
        let mut k = 0;
        loop {
            if k == parents.len() {
                return (visited, false);
            }
            odometer[k] += 1;
            if odometer[k] < choices[k].len() {
                break;
            }
            odometer[k] = 0;
            k += 1;
        }
    }
}

/// The `Υ` graph of a lumping: each block becomes one vertex joined to its
/// parent by a wiggly edge with `|block| - 2` strokes, and every bundle of
/// `σ ≥ 2` dotted edges between original vertices becomes a wiggly edge
/// with `σ - 2` strokes.
pub fn build_upsilon(theta: &ExpansionGraph, lumping: &Lumping) -> ExpansionGraph {
    let base = theta.n_ext + theta.n_sum;
    let mut remap: Vec<usize> = (0..theta.vertex_count()).collect();
    let mut projection = theta.projection[..base].to_vec();
    let mut edges = Vec::new();
    for lump in &lumping.blocks {
        let id = projection.len();
        projection.push(lump.parent);
        for &x in &lump.members {
            remap[x] = id;
        }
        edges.push(XEdge {
            source: id,
            target: lump.parent,
            style: Style::Wiggly {
                strokes: (lump.members.len() - 2) as u32,
            },
            copy: 0,
            upper: 0,
        });
    }
    for e in theta.edges.iter().filter(|e| e.style.is_resolvent()) {
        edges.push(XEdge {
            source: remap[e.source],
            target: remap[e.target],
            ..*e
        });
    }
    let sum: Vec<usize> = theta.summation().collect();
    for (k, &i) in sum.iter().enumerate() {
        for &j in &sum[k + 1..] {
            let sigma = theta.sigma(i, j);
            if sigma >= 2 {
                edges.push(XEdge {
                    source: i,
                    target: j,
                    style: Style::Wiggly {
                        strokes: (sigma - 2) as u32,
                    },
                    copy: 0,
                    upper: 0,
                });
            }
        }
    }
    ExpansionGraph {
        stage: Stage::Upsilon,
        n_ext: theta.n_ext,
        n_sum: theta.n_sum,
        projection,
        copies: theta.copies.clone(),
        edges,
    }
}

/// Every `Υ` graph of `theta`.
pub fn lump(theta: &ExpansionGraph, class: SymmetryClass) -> Vec<ExpansionGraph> {
    let mut out = Vec::new();
    for_each_lumping(theta, class, usize::MAX, |l| {
        out.push(build_upsilon(theta, l));
        true
    });
    out
}

/// `σ(i, j)` recovered from the wiggly edges of an `Υ` graph.
pub fn upsilon_sigma(upsilon: &ExpansionGraph) -> usize {
    upsilon
        .edges
        .iter()
        .filter_map(|e| match e.style {
            Style::Wiggly { strokes } if upsilon.is_summation(e.source) && upsilon.is_summation(e.target) => {
                Some(strokes as usize + 2)
            }
            _ => None,
        })
        .sum()
}
