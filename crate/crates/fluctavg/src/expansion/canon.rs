//! Canonical forms of small coloured directed multigraphs.
//!
//! Colour refinement followed by individualisation of the first
//! non-singleton cell; the smallest encoding over all leaves is the form.

use super::graph::ExpansionGraph;

fn rank<T: Ord + Clone>(keys: &[T]) -> Vec<u64> {
    let mut sorted: Vec<T> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present") as u64)
        .collect()
}

fn class_count(colours: &[u64]) -> usize {
    let mut c = colours.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

struct Labelled<'a> {
    labels: &'a [u64],
    edges: &'a [(usize, usize, u64)],
}

impl Labelled<'_> {
    fn refine(&self, mut colours: Vec<u64>) -> Vec<u64> {
        let n = colours.len();
        loop {
            let before = class_count(&colours);
            let mut sigs: Vec<(u64, Vec<(u64, u8, u64)>)> = (0..n).map(|v| (colours[v], Vec::new())).collect();
            for &(s, t, l) in self.edges {
                sigs[s].1.push((l, 0, colours[t]));
                sigs[t].1.push((l, 1, colours[s]));
            }
            for s in sigs.iter_mut() {
                s.1.sort_unstable();
            }
            colours = rank(&sigs);
            if class_count(&colours) == before {
                return colours;
            }
        }
    }

    fn encode(&self, colours: &[u64]) -> Vec<u64> {
        // colours form a permutation here
        let mut code: Vec<u64> = vec![0; colours.len()];
        for (v, &c) in colours.iter().enumerate() {
            code[c as usize] = self.labels[v];
        }
        let mut edges: Vec<(u64, u64, u64)> = self
            .edges
            .iter()
            .map(|&(s, t, l)| (colours[s], colours[t], l))
            .collect();
        edges.sort_unstable();
        code.push(u64::MAX);
        for (s, t, l) in edges {
            code.extend([s, t, l]);
        }
        code
    }

    fn search(&self, colours: Vec<u64>, best: &mut Option<Vec<u64>>) {
        let colours = self.refine(colours);
        let n = colours.len();
        if class_count(&colours) == n {
            let code = self.encode(&colours);
            if best.as_ref().is_none_or(|b| code < *b) {
                *best = Some(code);
            }
            return;
        }
        let mut counts = vec![0usize; n];
        for &c in &colours {
            counts[c as usize] += 1;
        }
        let target = (0..n as u64).find(|&c| counts[c as usize] > 1).expect("non-singleton cell");
        for v in (0..n).filter(|&v| colours[v] == target) {
            let split: Vec<(u64, u8)> = colours
                .iter()
                .enumerate()
                .map(|(u, &c)| (c, (c == target && u != v) as u8))
                .collect();
            self.search(rank(&split), best);
        }
    }
}

/// Canonical code of a graph with vertex labels and labelled directed edges.
/// Isomorphic inputs give equal codes.
pub fn canonical_code(labels: &[u64], edges: &[(usize, usize, u64)]) -> Vec<u64> {
    let g = Labelled { labels, edges };
    let mut best = None;
    g.search(rank(labels), &mut best);
    let mut code = best.unwrap_or_default();
    code.insert(0, labels.len() as u64);
    code
}

/// Canonical code of an expansion graph. Vertices are labelled by kind and
/// projection (fresh vertices by kind only); edges by style and the upper
/// index set when `with_upper` is set. Copy tags are ignored.
pub fn graph_code(g: &ExpansionGraph, with_upper: bool) -> Vec<u64> {
    let labels: Vec<u64> = (0..g.vertex_count())
        .map(|v| match g.kind(v) {
            super::graph::VertexKind::External => (g.projection[v] as u64) << 2,
            super::graph::VertexKind::Summation => ((g.projection[v] as u64) << 2) | 1,
            super::graph::VertexKind::Fresh => 2,
        })
        .collect();
    let mut extra_labels = labels;
    let mut edges: Vec<(usize, usize, u64)> = Vec::with_capacity(g.edges.len());
    for e in &g.edges {
        if with_upper {
            // the edge becomes an auxiliary vertex joined to its upper indices
            let aux = extra_labels.len();
            extra_labels.push(3);
            edges.push((e.source, aux, 1000 + e.style.code()));
            edges.push((aux, e.target, 1000));
            for v in g.summation() {
                if e.upper & g.bit(v) != 0 {
                    edges.push((aux, v, 2000));
                }
            }
        } else {
            edges.push((e.source, e.target, e.style.code()));
        }
    }
    // fresh vertices carry their parent relation as an edge
    for v in g.fresh() {
        edges.push((v, g.projection[v], 3000));
    }
    canonical_code(&extra_labels, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabelled_cycle_has_same_code() {
        let a = canonical_code(&[0, 0, 0], &[(0, 1, 1), (1, 2, 1), (2, 0, 1)]);
        let b = canonical_code(&[0, 0, 0], &[(2, 1, 1), (1, 0, 1), (0, 2, 1)]);
        assert_eq!(a, b);
        let c = canonical_code(&[0, 0, 0], &[(0, 1, 1), (1, 2, 1), (0, 2, 1)]);
        assert_ne!(a, c);
    }
}
