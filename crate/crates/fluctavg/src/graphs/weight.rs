//! Summation weights built from `1/N` and `s(x, y)` factors.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::AdmissibleGraph;
use crate::ensemble::VarianceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightIndex {
    Vertex(usize),
    Dummy(usize),
    Param(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    InvN,
    S(WeightIndex, WeightIndex),
}

/// `sum_{dummies} prod factors`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weight {
    pub dummies: Vec<String>,
    pub factors: Vec<Factor>,
}

impl Weight {
    pub fn inv_n() -> Self {
        Weight {
            dummies: Vec::new(),
            factors: vec![Factor::InvN],
        }
    }

    /// `w(a)` for vertex values `vertices` (indexed by graph vertex) and
    /// parameter values `params`; dummies are summed over `0..N`.
    pub fn eval(&self, s: &VarianceMatrix, vertices: &[usize], params: &[usize]) -> f64 {
        let n = s.n();
        let mut dummies = vec![0usize; self.dummies.len()];
        self.sum_from(0, &mut dummies, s, n, vertices, params)
    }

    fn sum_from(
        &self,
        level: usize,
        dummies: &mut [usize],
        s: &VarianceMatrix,
        n: usize,
        vertices: &[usize],
        params: &[usize],
    ) -> f64 {
        if level == dummies.len() {
            return self.product(dummies, s, n, vertices, params);
        }
        let mut acc = 0.0;
        for d in 0..n {
            dummies[level] = d;
            acc += self.sum_from(level + 1, dummies, s, n, vertices, params);
        }
        acc
    }

    fn product(&self, dummies: &[usize], s: &VarianceMatrix, n: usize, vertices: &[usize], params: &[usize]) -> f64 {
        let value = |ix: WeightIndex| match ix {
            WeightIndex::Vertex(v) => vertices[v],
            WeightIndex::Dummy(d) => dummies[d],
            WeightIndex::Param(p) => params[p],
        };
        let mut acc = 1.0;
        for f in &self.factors {
            acc *= match *f {
                Factor::InvN => 1.0 / n as f64,
                Factor::S(x, y) => s.get(value(x), value(y)),
            };
            if acc == 0.0 {
                break;
            }
        }
        acc
    }

    /// `s(a_1, b_1) ... s(a_n, b_n)` with every summation vertex paired
    /// once with a fixed index.
    pub fn is_chain_weight(&self, graph: &AdmissibleGraph) -> bool {
        if !self.dummies.is_empty() || self.factors.len() != graph.summation_count() {
            return false;
        }
        let fixed = |ix: WeightIndex| match ix {
            WeightIndex::Vertex(v) => !graph.is_summation(v),
            WeightIndex::Param(_) => true,
            WeightIndex::Dummy(_) => false,
        };
        let mut seen = vec![false; graph.summation_count()];
        for f in &self.factors {
            let (x, y) = match *f {
                Factor::S(x, y) => (x, y),
                Factor::InvN => return false,
            };
            let a = match (x, y) {
                (WeightIndex::Vertex(a), other) | (other, WeightIndex::Vertex(a))
                    if graph.is_summation(a) && fixed(other) =>
                {
                    a
                }
                _ => return false,
            };
            if seen[a] {
                return false;
            }
            seen[a] = true;
        }
        seen.iter().all(|&s| s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub total: f64,
    pub max_value: f64,
    /// Largest `lhs / M^{|P| - |V_s|}` over all splits and partitions.
    pub worst_ratio: f64,
    pub worst_case: String,
    pub checked: usize,
}

impl WeightReport {
    pub fn holds(&self) -> bool {
        self.total <= 1.0 + 1e-12 && self.max_value <= 1.0 + 1e-12 && self.worst_ratio <= 1.0 + 1e-12
    }
}

/// Canonical block labels of the partition induced by equal values.
fn partition_labels(values: &[usize]) -> Vec<u8> {
    let mut labels = Vec::with_capacity(values.len());
    let mut firsts: Vec<usize> = Vec::new();
    for &v in values {
        match firsts.iter().position(|&f| f == v) {
            Some(p) => labels.push(p as u8),
            None => {
                labels.push(firsts.len() as u8);
                firsts.push(v);
            }
        }
    }
    labels
}

/// Exhaustive check of the partition inequality over every split
/// `V_s = I ⊔ J` and every partition of `J`.
pub fn check_weight(
    weight: &Weight,
    graph: &AdmissibleGraph,
    s: &VarianceMatrix,
    externals: &[usize],
    params: &[usize],
) -> WeightReport {
    let n = s.n();
    let k = graph.summation_count();
    let mut vertices = vec![0usize; graph.vertex_count()];
    for (slot, &v) in vertices[k..].iter_mut().zip(externals) {
        *slot = v;
    }
    let total_assignments = n.pow(k as u32);
    let mut values = Vec::with_capacity(total_assignments);
    for code in 0..total_assignments {
        let mut c = code;
        for slot in vertices[..k].iter_mut() {
            *slot = c % n;
            c /= n;
        }
        values.push((vertices[..k].to_vec(), weight.eval(s, &vertices, params)));
    }
    let total: f64 = values.iter().map(|(_, w)| w).sum();
    let max_value = values.iter().map(|(_, w)| *w).fold(0.0, f64::max);
    let band = s.band_size();
    let mut worst_ratio = 0.0;
    let mut worst_case = String::new();
    let mut checked = 0;
    for j_mask in 0..(1usize << k) {
        let mut sums: HashMap<(Vec<usize>, Vec<u8>), f64> = HashMap::new();
        for (a, w) in &values {
            let frozen: Vec<usize> = (0..k).filter(|i| j_mask >> i & 1 == 0).map(|i| a[i]).collect();
            let free: Vec<usize> = (0..k).filter(|i| j_mask >> i & 1 == 1).map(|i| a[i]).collect();
            *sums.entry((frozen, partition_labels(&free))).or_insert(0.0) += w;
        }
        let mut by_partition: HashMap<Vec<u8>, f64> = HashMap::new();
        for ((_, p), v) in sums {
            let e = by_partition.entry(p).or_insert(0.0);
            *e = e.max(v);
        }
        let mut parts: Vec<_> = by_partition.into_iter().collect();
        parts.sort_by(|a, b| a.0.cmp(&b.0));
        for (p, lhs) in parts {
            let blocks = p.iter().map(|&b| b as i32 + 1).max().unwrap_or(0);
            let rhs = band.powi(blocks - k as i32);
            let ratio = lhs / rhs;
            checked += 1;
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_case = format!("J mask {j_mask:b}, partition {p:?}");
            }
        }
    }
    WeightReport {
        total,
        max_value,
        worst_ratio,
        worst_case,
        checked,
    }
}
