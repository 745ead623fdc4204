//! Numerical evaluation of monomials, weighted averages and partial
//! expectations on sampled matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AdmissibleGraph, Atom, AveragingSpec, GraphError};
use crate::ensemble::{mix, MatrixSample};
use crate::resolvent::ResolventTable;

/// Anything that can hand out resolvent entries at global labels.
pub trait EntrySource {
    fn entry(&self, i: usize, j: usize) -> Complex64;
    fn m(&self) -> Complex64;
}

impl EntrySource for ResolventTable {
    fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.get(i, j)
    }

    fn m(&self) -> Complex64 {
        ResolventTable::m(self)
    }
}

/// Resolvent entries on a handful of labels.
#[derive(Debug, Clone)]
pub struct LocalTable {
    labels: Vec<usize>,
    g: DMatrix<Complex64>,
    m: Complex64,
}

impl LocalTable {
    pub fn new(labels: Vec<usize>, g: DMatrix<Complex64>, m: Complex64) -> Self {
        LocalTable { labels, g, m }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn pos(&self, i: usize) -> usize {
        self.labels
            .iter()
            .position(|&l| l == i)
            .expect("label missing from local table")
    }
}

impl EntrySource for LocalTable {
    fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.g[(self.pos(i), self.pos(j))]
    }

    fn m(&self) -> Complex64 {
        self.m
    }
}

fn atom_value<S: EntrySource + ?Sized>(src: &S, atom: Atom, x: usize, y: usize) -> Complex64 {
    let m = src.m();
    match atom {
        Atom::G if x == y => src.entry(x, x) - m,
        Atom::G => src.entry(x, y),
        Atom::GStar if x == y => (src.entry(x, x) - m).conj(),
        Atom::GStar => src.entry(y, x).conj(),
        Atom::GInv => src.entry(x, x).inv() - m.inv(),
    }
}

fn monomial<S: EntrySource + ?Sized>(src: &S, graph: &AdmissibleGraph, values: &[usize]) -> Complex64 {
    graph
        .edges()
        .iter()
        .map(|e| atom_value(src, e.atom, values[e.source], values[e.target]))
        .product()
}

fn check_star(graph: &AdmissibleGraph, values: &[usize]) -> Result<(), GraphError> {
    if values.len() != graph.vertex_count() {
        return Err(GraphError::StarConstraint(format!(
            "{} values for {} vertices",
            values.len(),
            graph.vertex_count()
        )));
    }
    for a in graph.summation() {
        for b in 0..graph.vertex_count() {
            if a != b && values[a] == values[b] {
                return Err(GraphError::StarConstraint(format!(
                    "{} and {} both take the value {}",
                    graph.name(a),
                    graph.name(b),
                    values[a]
                )));
            }
        }
    }
    Ok(())
}

/// `∏_e 𝒢^{ξ(e)}` at `values` (indexed by graph vertex).
pub fn evaluate_monomial<S: EntrySource + ?Sized>(
    src: &S,
    spec: &AveragingSpec,
    values: &[usize],
) -> Result<Complex64, GraphError> {
    check_star(&spec.graph, values)?;
    Ok(monomial(src, &spec.graph, values))
}

/// Redraws the rows in `A` and updates the resolvent entries on `A ∪ T`
/// through a Schur complement around the minor `G^{(A)}`.
#[derive(Debug, Clone)]
pub struct RowResampler<'a> {
    sample: &'a MatrixSample,
    z: Complex64,
    m: Complex64,
    rows: Vec<usize>,
    targets: Vec<usize>,
    support: Vec<usize>,
    gss: DMatrix<Complex64>,
    gst: DMatrix<Complex64>,
    gts: DMatrix<Complex64>,
    gtt: DMatrix<Complex64>,
}

impl<'a> RowResampler<'a> {
    /// `g` must be the full resolvent of `sample` at the spectral parameter of interest.
    pub fn new(
        sample: &'a MatrixSample,
        g: &ResolventTable,
        rows: &[usize],
        targets: &[usize],
    ) -> Result<Self, GraphError> {
        if !g.minor().is_empty() {
            return Err(GraphError::Invalid("row resampling needs the full resolvent".into()));
        }
        let n = sample.n();
        for (k, &a) in rows.iter().enumerate() {
            if a >= n || rows[..k].contains(&a) {
                return Err(GraphError::StarConstraint(format!("resampled row {a} repeated or out of range")));
            }
        }
        let mut targets: Vec<usize> = targets.to_vec();
        targets.sort_unstable();
        targets.dedup();
        if let Some(t) = targets.iter().find(|t| rows.contains(t) || **t >= n) {
            return Err(GraphError::StarConstraint(format!("target {t} coincides with a resampled row")));
        }
        let profile = sample.profile();
        let mut support: Vec<usize> = rows
            .iter()
            .flat_map(|&a| profile.support(a).iter().copied())
            .filter(|j| !rows.contains(j))
            .collect();
        support.sort_unstable();
        support.dedup();

        let k = rows.len();
        let gaa = DMatrix::from_fn(k, k, |i, j| g.get(rows[i], rows[j]));
        let gaa_inv = gaa
            .try_inverse()
            .ok_or_else(|| GraphError::Invalid("singular diagonal block of G".into()))?;
        let minor = |xs: &[usize], ys: &[usize]| {
            let gxa = DMatrix::from_fn(xs.len(), k, |i, j| g.get(xs[i], rows[j]));
            let gay = DMatrix::from_fn(k, ys.len(), |i, j| g.get(rows[i], ys[j]));
            let direct = DMatrix::from_fn(xs.len(), ys.len(), |i, j| g.get(xs[i], ys[j]));
            direct - gxa * &gaa_inv * gay
        };
        Ok(RowResampler {
            sample,
            z: g.z(),
            m: g.m(),
            gss: minor(&support, &support),
            gst: minor(&support, &targets),
            gts: minor(&targets, &support),
            gtt: minor(&targets, &targets),
            rows: rows.to_vec(),
            targets,
            support,
        })
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Entries on `A ∪ T` after resampling round `round`.
    pub fn draw(&self, round: u64) -> Result<LocalTable, GraphError> {
        let k = self.rows.len();
        let s = self.support.len();
        let drawn = self.sample.ensemble.draw_rows(self.sample.index, round, &self.rows);
        let mut d = DMatrix::<Complex64>::zeros(k, k);
        let mut b = DMatrix::<Complex64>::zeros(k, s);
        for (i, row) in drawn.iter().enumerate() {
            for &(j, v) in row {
                if let Some(p) = self.rows.iter().position(|&r| r == j) {
                    d[(i, p)] = v;
                } else if let Ok(p) = self.support.binary_search(&j) {
                    b[(i, p)] = v;
                }
            }
        }
        // b G^{(A)}_{SS} b^*, b G_{ST} and G_{TS} b^* by direct loops; the
        // generic complex product is far slower at these shapes
        let t = self.targets.len();
        let mut kmat = d;
        let mut w = vec![Complex64::new(0.0, 0.0); s];
        let gss = self.gss.as_slice();
        for r2 in 0..k {
            w.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            for j in 0..s {
                let bj = b[(r2, j)].conj();
                if bj == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let (re, im) = (bj.re, bj.im);
                for (wi, gij) in w.iter_mut().zip(&gss[j * s..(j + 1) * s]) {
                    wi.re += gij.re * re - gij.im * im;
                    wi.im += gij.re * im + gij.im * re;
                }
            }
            for r1 in 0..k {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, wi) in w.iter().enumerate() {
                    acc += b[(r1, i)] * wi;
                }
                kmat[(r1, r2)] -= acc;
            }
        }
        for i in 0..k {
            kmat[(i, i)] -= self.z;
        }
        let gaa = kmat
            .try_inverse()
            .ok_or_else(|| GraphError::Invalid("singular Schur complement after resampling".into()))?;
        let mut left = DMatrix::<Complex64>::zeros(t, k);
        let mut right = DMatrix::<Complex64>::zeros(k, t);
        for r in 0..k {
            for c in 0..t {
                let mut l = Complex64::new(0.0, 0.0);
                let mut rt = Complex64::new(0.0, 0.0);
                for j in 0..s {
                    l += self.gts[(c, j)] * b[(r, j)].conj();
                    rt += b[(r, j)] * self.gst[(j, c)];
                }
                left[(c, r)] = l;
                right[(r, c)] = rt;
            }
        }
        let gta = -(&left * &gaa);
        let gat = -(&gaa * &right);
        let gtt = &self.gtt + &left * &gaa * &right;

        let t = self.targets.len();
        let mut g = DMatrix::<Complex64>::zeros(k + t, k + t);
        g.view_mut((0, 0), (k, k)).copy_from(&gaa);
        g.view_mut((0, k), (k, t)).copy_from(&gat);
        g.view_mut((k, 0), (t, k)).copy_from(&gta);
        g.view_mut((k, k), (t, t)).copy_from(&gtt);
        let labels = self.rows.iter().chain(&self.targets).copied().collect();
        Ok(LocalTable::new(labels, g, self.m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// `K`, resamplings per partial expectation.
    pub resamples: usize,
    /// Largest `|V_s|` summed exactly.
    pub max_exact_summation: usize,
    /// Largest `N` summed exactly.
    pub max_exact_n: usize,
    /// Index draws used when the star sum is subsampled.
    pub subsample_draws: usize,
    /// Offset added to every resampling round; distinct offsets give
    /// independent estimates.
    pub round_offset: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            resamples: 64,
            max_exact_summation: 3,
            max_exact_n: 512,
            subsample_draws: 4096,
            round_offset: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumMode {
    Exact,
    Subsampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XEstimate {
    pub value: Complex64,
    pub mode: SumMode,
    pub terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PEstimate {
    pub mean: Complex64,
    pub stderr: f64,
    pub resamples: usize,
}

fn average_over_draws(
    resampler: &RowResampler,
    graph: &AdmissibleGraph,
    values: &[usize],
    resamples: usize,
    round_offset: u64,
) -> Result<PEstimate, GraphError> {
    let mut draws = Vec::with_capacity(resamples);
    for r in 0..resamples as u64 {
        let table = resampler.draw(round_offset + r)?;
        draws.push(monomial(&table, graph, values));
    }
    let mean: Complex64 = draws.iter().sum::<Complex64>() / resamples as f64;
    let var = if resamples > 1 {
        draws.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (resamples - 1) as f64
    } else {
        0.0
    };
    Ok(PEstimate {
        mean,
        stderr: (var / resamples as f64).sqrt(),
        resamples,
    })
}

/// `∏_{a ∈ 𝐚} P_a 𝒵_𝐚` estimated from `K` joint resamplings of the rows `𝐚`.
pub fn evaluate_p_product(
    sample: &MatrixSample,
    g: &ResolventTable,
    spec: &AveragingSpec,
    values: &[usize],
    resamples: usize,
    round_offset: u64,
) -> Result<PEstimate, GraphError> {
    if !spec.q_set.is_empty() {
        return Err(GraphError::Invalid("P-product mode requires an empty Q set".into()));
    }
    if resamples < 2 {
        return Err(GraphError::TooFewResamples(resamples));
    }
    let graph = &spec.graph;
    check_star(graph, values)?;
    for a in graph.externals() {
        if graph.externals().any(|b| b != a && values[a] == values[b]) {
            return Err(GraphError::StarConstraint("external indices coincide".into()));
        }
    }
    let rows: Vec<usize> = graph.summation().map(|v| values[v]).collect();
    let targets: Vec<usize> = graph.externals().map(|v| values[v]).collect();
    let resampler = RowResampler::new(sample, g, &rows, &targets)?;
    average_over_draws(&resampler, graph, values, resamples, round_offset)
}

/// `[∏_{i ∈ F} Q_{a_i}] 𝒵_𝐚`, expanding the product into signed joint
/// partial expectations.
fn q_term(
    sample: &MatrixSample,
    g: &ResolventTable,
    spec: &AveragingSpec,
    values: &[usize],
    cfg: &EstimatorConfig,
) -> Result<Complex64, GraphError> {
    let graph = &spec.graph;
    let mut acc = monomial(g, graph, values);
    let f = spec.q_set.len();
    for mask in 1usize..(1 << f) {
        let chosen: Vec<usize> = (0..f).filter(|i| mask >> i & 1 == 1).map(|i| spec.q_set[i]).collect();
        let rows: Vec<usize> = chosen.iter().map(|&v| values[v]).collect();
        let targets: Vec<usize> = (0..graph.vertex_count())
            .filter(|v| !chosen.contains(v))
            .map(|v| values[v])
            .collect();
        let resampler = RowResampler::new(sample, g, &rows, &targets)?;
        let p = average_over_draws(&resampler, graph, values, cfg.resamples, cfg.round_offset)?;
        if chosen.len() % 2 == 1 {
            acc -= p.mean;
        } else {
            acc += p.mean;
        }
    }
    Ok(acc)
}

fn for_each_star(
    n: usize,
    k: usize,
    forbidden: &[usize],
    prefix: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]) -> Result<(), GraphError>,
) -> Result<(), GraphError> {
    if prefix.len() == k {
        return f(prefix);
    }
    for v in 0..n {
        if forbidden.contains(&v) || prefix.contains(&v) {
            continue;
        }
        prefix.push(v);
        for_each_star(n, k, forbidden, prefix, f)?;
        prefix.pop();
    }
    Ok(())
}

/// `X = Σ*_𝐚 w(𝐚) [∏_{i ∈ F} Q_{a_i}] 𝒵_𝐚` with the weight of `spec`.
pub fn evaluate_x(
    sample: &MatrixSample,
    g: &ResolventTable,
    spec: &AveragingSpec,
    externals: &[usize],
    params: &[usize],
    cfg: &EstimatorConfig,
) -> Result<XEstimate, GraphError> {
    if params.len() != spec.params.len() {
        return Err(GraphError::Invalid(format!(
            "spec has {} weight parameters, {} values given",
            spec.params.len(),
            params.len()
        )));
    }
    let s = sample.profile();
    evaluate_x_weighted(sample, g, spec, externals, cfg, &|values| {
        spec.weight.eval(s, values, params)
    })
}

/// As [`evaluate_x`] with an arbitrary weight on full vertex assignments.
pub fn evaluate_x_weighted(
    sample: &MatrixSample,
    g: &ResolventTable,
    spec: &AveragingSpec,
    externals: &[usize],
    cfg: &EstimatorConfig,
    weight: &dyn Fn(&[usize]) -> f64,
) -> Result<XEstimate, GraphError> {
    let graph = &spec.graph;
    let n = sample.n();
    let k = graph.summation_count();
    if externals.len() != graph.externals().len() {
        return Err(GraphError::Invalid(format!(
            "{} external values for {} external indices",
            externals.len(),
            graph.externals().len()
        )));
    }
    if let Some(&bad) = externals.iter().find(|&&v| v >= n) {
        return Err(GraphError::StarConstraint(format!("external value {bad} out of range")));
    }
    if !spec.q_set.is_empty() && cfg.resamples < 2 {
        return Err(GraphError::TooFewResamples(cfg.resamples));
    }
    let mut values = vec![0usize; graph.vertex_count()];
    values[k..].copy_from_slice(externals);
    let mut forbidden = externals.to_vec();
    forbidden.sort_unstable();
    forbidden.dedup();
    if n < forbidden.len() + k {
        return Ok(XEstimate {
            value: Complex64::new(0.0, 0.0),
            mode: SumMode::Exact,
            terms: 0,
        });
    }

    let mut total = Complex64::new(0.0, 0.0);
    let mut terms = 0usize;
    let exact = k <= cfg.max_exact_summation && n <= cfg.max_exact_n;
    let mut visit = |a: &[usize]| -> Result<(), GraphError> {
        values[..k].copy_from_slice(a);
        let w = weight(&values);
        if w != 0.0 {
            total += q_term(sample, g, spec, &values, cfg)? * w;
            terms += 1;
        }
        Ok(())
    };
    if exact {
        for_each_star(n, k, &forbidden, &mut Vec::with_capacity(k), &mut visit)?;
        return Ok(XEstimate {
            value: total,
            mode: SumMode::Exact,
            terms,
        });
    }
    if k > 8 {
        return Err(GraphError::TooManySummation { got: k, limit: 8 });
    }
    if cfg.subsample_draws == 0 {
        return Err(GraphError::Invalid("subsampled star sum needs at least one draw".into()));
    }
    let free = n - forbidden.len();
    let count: f64 = (0..k).map(|i| (free - i) as f64).product();
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[sample.ensemble.base_seed, sample.index, 0x5ab5]));
    let mut a = Vec::with_capacity(k);
    for _ in 0..cfg.subsample_draws {
        a.clear();
        while a.len() < k {
            let v = rng.random_range(0..n);
            if !forbidden.contains(&v) && !a.contains(&v) {
                a.push(v);
            }
        }
        visit(&a)?;
    }
    Ok(XEstimate {
        value: total * (count / cfg.subsample_draws as f64),
        mode: SumMode::Subsampled,
        terms,
    })
}
