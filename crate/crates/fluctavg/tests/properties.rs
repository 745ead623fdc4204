mod common;

use common::*;
use proptest::prelude::*;

use fluctavg::ensemble::{build_variance_profile, BandProfileSpec, Profile, SymmetryClass};
use fluctavg::expansion::{link, power_graph, resolve_vertices};
use fluctavg::graphs::{parse_monomial, predicted_exponents, print_monomial};
use fluctavg::resolvent::{resolvent, verify_family_a, verify_family_b, verify_schur};

/// A random monomial: up to three summation vertices, up to two externals,
/// every edge touching a summation vertex. Names come from `names`.
#[derive(Debug, Clone)]
struct Monomial {
    edges: Vec<(usize, usize, bool)>,
    q: Vec<bool>,
}

const SUM: usize = 3;
const EXT: usize = 2;

fn monomial() -> impl Strategy<Value = Monomial> {
    let edge = (0..SUM, 0..SUM + EXT, any::<bool>(), any::<bool>()).prop_map(|(s, other, flip, star)| {
        if flip {
            (other, s, star)
        } else {
            (s, other, star)
        }
    });
    (prop::collection::vec(edge, 1..6), prop::collection::vec(any::<bool>(), SUM))
        .prop_map(|(edges, q)| Monomial { edges, q })
}

impl Monomial {
    fn used(&self, v: usize) -> bool {
        self.edges.iter().any(|&(s, t, _)| s == v || t == v)
    }

    fn text(&self, names: [&str; SUM + EXT]) -> String {
        let sum: Vec<&str> = (0..SUM).filter(|&v| self.used(v)).map(|v| names[v]).collect();
        let ext: Vec<&str> = (SUM..SUM + EXT).filter(|&v| self.used(v)).map(|v| names[v]).collect();
        let q: Vec<&str> = (0..SUM).filter(|&v| self.used(v) && self.q[v]).map(|v| names[v]).collect();
        let edges: Vec<String> = self
            .edges
            .iter()
            .map(|&(s, t, star)| format!("g{}({},{})", if star { "*" } else { "" }, names[s], names[t]))
            .collect();
        format!(
            "sum {}; ext {}; Q: {}; w: 1/N; {}",
            sum.join(" "),
            ext.join(" "),
            if q.is_empty() { "-".to_string() } else { q.join(" ") },
            edges.join(" ")
        )
    }
}

const NAMES: [&str; 5] = ["a", "b", "c", "mu", "nu"];
const RENAMED: [&str; 5] = ["x", "y", "w", "p", "t"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profiles_are_doubly_stochastic(
        side in 8usize..48,
        frac in 0.05f64..0.5,
        half_width in 0.3f64..1.5,
        triangular in any::<bool>(),
    ) {
        let width = ((side as f64 * frac) as usize).max(1);
        let profile = if triangular { Profile::Triangular { half_width } } else { Profile::Step { half_width } };
        let s = build_variance_profile(&BandProfileSpec {
            width_exponent: 0.0,
            band_exponent: 0.0,
            ..BandProfileSpec::new(1, side, width, profile)
        });
        // narrow triangular bands may have no lattice support
        prop_assume!(s.is_ok());
        let s = s.unwrap();
        for i in 0..side {
            let row: f64 = (0..side).map(|j| s.get(i, j)).sum();
            prop_assert!((row - 1.0).abs() < 1e-12);
            for j in 0..side {
                prop_assert!(s.get(i, j) >= 0.0);
                prop_assert_eq!(s.get(i, j), s.get(j, i));
            }
        }
    }

    #[test]
    fn samples_are_hermitian(seed in any::<u64>(), index in 0u64..1000, real in any::<bool>()) {
        let class = if real { SymmetryClass::RealSymmetric } else { SymmetryClass::ComplexHermitian };
        let s = sample(16, 4, class, seed, index);
        prop_assert_eq!(&s.h, &s.h.adjoint());
        if real {
            prop_assert!(s.h.iter().all(|x| x.im == 0.0));
        }
    }

    #[test]
    fn identities_hold(
        seed in any::<u64>(),
        e in -1.5f64..1.5,
        log_eta in -1.5f64..0.5,
        picks in prop::sample::subsequence((0..24).collect::<Vec<usize>>(), 5..=7),
        shuffle in any::<u64>(),
    ) {
        let s = sample(24, 6, SymmetryClass::ComplexHermitian, seed, 0);
        let z = c(e, 10f64.powf(log_eta));
        // rotate the picked indices so (i, j, k) are not always the smallest
        let r = (shuffle % picks.len() as u64) as usize;
        let picks: Vec<usize> = picks[r..].iter().chain(&picks[..r]).copied().collect();
        let (i, j, k) = (picks[0], picks[1], picks[2]);
        let minor = &picks[3..];
        let (a1, a2) = verify_family_a(&s, z, i, j, k, minor).unwrap();
        prop_assert!(a1 <= 1e-9 && a2 <= 1e-9);
        let b = verify_family_b(&s, z, i, j, minor).unwrap();
        prop_assert!(b.iter().all(|&x| x <= 1e-9), "{:?}", b);
        prop_assert!(verify_schur(&s, z, i, minor).unwrap() <= 1e-9);
        let g = resolvent(&s.h, z, minor).unwrap();
        prop_assert!(g.max_entry() <= (1.0 + 1e-12) / z.im);
    }

    #[test]
    fn print_parse_round_trip(m in monomial()) {
        let spec = parse_monomial(&m.text(NAMES)).unwrap();
        let printed = print_monomial(&spec);
        let again = parse_monomial(&printed).unwrap();
        prop_assert_eq!(&spec, &again);
        prop_assert_eq!(print_monomial(&again), printed);
    }

    #[test]
    fn degree_is_half_the_degree_sum(m in monomial()) {
        let spec = parse_monomial(&m.text(NAMES)).unwrap();
        let g = &spec.graph;
        let total: usize = (0..g.vertex_count()).map(|v| g.degree(v)).sum();
        prop_assert_eq!(2 * g.deg(), total);
        prop_assert_eq!(g.deg(), m.edges.len());
    }

    #[test]
    fn prediction_ignores_names(m in monomial()) {
        let a = parse_monomial(&m.text(NAMES)).unwrap();
        let b = parse_monomial(&m.text(RENAMED)).unwrap();
        let (pa, pb) = (predicted_exponents(&a), predicted_exponents(&b));
        prop_assert_eq!(pa.is_ok(), pb.is_ok());
        if let (Ok(pa), Ok(pb)) = (pa, pb) {
            prop_assert_eq!(pa, pb);
        }
    }

    #[test]
    fn power_graph_edge_count(m in monomial(), half in 1usize..3) {
        let spec = parse_monomial(&m.text(NAMES)).unwrap();
        let p = 2 * half;
        let g = power_graph(&spec.graph, p).unwrap();
        prop_assert_eq!(g.edges.len(), p * spec.graph.deg());
        prop_assert_eq!(g.n_sum, p * spec.graph.summation_count());
    }

    #[test]
    fn linking_adds_one_edge_and_conserves_under_resolution(
        m in monomial(),
        choices in prop::collection::vec(any::<prop::sample::Index>(), 0..4),
    ) {
        let spec = parse_monomial(&m.text(NAMES)).unwrap();
        let mut g = power_graph(&spec.graph, 2).unwrap();
        for choice in choices {
            let legal: Vec<(usize, usize)> = (0..g.edges.len())
                .flat_map(|e| g.summation().map(move |v| (e, v)))
                .filter(|&(e, v)| link(&g, e, v).is_ok())
                .collect();
            if legal.is_empty() {
                break;
            }
            let (e, v) = *choice.get(&legal);
            let next = link(&g, e, v).unwrap();
            prop_assert_eq!(next.edges.len(), g.edges.len() + 1);
            g = next;
        }
        // loops cannot be resolved; every other graph conserves its edges
        if let Ok(thetas) = resolve_vertices(&g) {
            for theta in thetas {
                prop_assert_eq!(theta.resolvent_edge_count() + theta.sigma_total(), g.edges.len());
            }
        }
    }
}
