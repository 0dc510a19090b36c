use super::*;
use crate::rng::stream;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn erdos_renyi_zero_p_has_no_edges() {
    let g = RootedGraph::erdos_renyi(10, 0.0, &mut stream(1)).unwrap();
    assert_eq!(g.len(), 10);
    assert_eq!(g.edge_count(), 0);
}

#[test]
fn erdos_renyi_p_one_is_complete() {
    let g = RootedGraph::erdos_renyi(5, 1.0, &mut stream(1)).unwrap();
    assert_eq!(g.edge_count(), 10);
}

#[test]
fn erdos_renyi_mean_degree_matches_binomial() {
    // (n-1)p with n=1000, p=2/1000 gives 1.998
    let mut total = 0.0;
    let seeds = 20;
    for s in 0..seeds {
        let g = RootedGraph::erdos_renyi(1000, 2.0 / 1000.0, &mut stream(s)).unwrap();
        total += 2.0 * g.edge_count() as f64 / g.len() as f64;
    }
    let mean_deg = total / seeds as f64;
    assert!((1.7..=2.3).contains(&mean_deg), "mean degree {mean_deg}");
}

#[test]
fn regular_tree_counts() {
    let g = RootedGraph::regular_tree(3, 1).unwrap();
    assert_eq!(g.len(), 4);
    assert_eq!(g.degree(0), 3);

    // 1 + 3·(2^9 − 1) = 1534 vertices for κ=3 depth 9
    let g = RootedGraph::regular_tree(3, 9).unwrap();
    assert_eq!(g.len(), 1534);
    assert_eq!(g.root(), Some(0));
}

#[test]
fn cycle_is_two_regular() {
    let g = RootedGraph::cycle(12).unwrap();
    assert!((0..12).all(|v| g.degree(v) == 2));
}

#[test]
fn hat_rho_fixes_poisson() {
    for &c in &[0.5, 1.0, 2.0] {
        let rho = OffspringDistribution::poisson(c, 40).unwrap();
        let hat = rho.hat().unwrap();
        for (k, (&a, &b)) in rho.probs().iter().zip(hat.probs()).enumerate() {
            assert!((a - b).abs() <= 1e-9, "c={c} k={k}: {a} vs {b}");
        }
    }
}

#[test]
fn hat_rho_shifts_point_mass() {
    let hat = OffspringDistribution::delta(3).hat().unwrap();
    assert_eq!(hat.probs(), OffspringDistribution::delta(2).probs());
}

#[test]
fn hat_rho_hand_example() {
    // ρ = {1: 0.5, 2: 0.5}, mean 1.5 → ρ̂ = {0: 1/3, 1: 2/3}
    let rho = OffspringDistribution::new(vec![0.0, 0.5, 0.5]).unwrap();
    let hat = rho.hat().unwrap();
    assert!((hat.probs()[0] - 1.0 / 3.0).abs() < 1e-12);
    assert!((hat.probs()[1] - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn hat_rho_zero_mean_rejected() {
    assert!(OffspringDistribution::delta(0).hat().is_err());
}

#[test]
fn ugw_delta_zero_is_isolated_root() {
    let s = sample_ugw(
        &OffspringDistribution::delta(0),
        UgwTruncation::default(),
        &mut stream(3),
    )
    .unwrap();
    assert_eq!(s.graph.len(), 1);
    assert!(!s.truncated);
}

#[test]
fn ugw_delta_kappa_is_regular_tree() {
    let trunc = UgwTruncation {
        max_depth: 5,
        max_vertices: 1_000_000,
    };
    let s = sample_ugw(&OffspringDistribution::delta(3), trunc, &mut stream(3)).unwrap();
    let t = RootedGraph::regular_tree(3, 5).unwrap();
    assert_eq!(
        canonical_code(&s.graph).unwrap(),
        canonical_code(&t).unwrap()
    );
    assert!(s.truncated);
}

#[test]
fn subcritical_ugw_dies_out() {
    let rho = OffspringDistribution::poisson(0.5, 30).unwrap();
    let trunc = UgwTruncation {
        max_depth: 30,
        max_vertices: 10_000_000,
    };
    let mut rng = stream(11);
    let n = 10_000;
    let died = (0..n)
        .filter(|_| !sample_ugw(&rho, trunc, &mut rng).unwrap().truncated)
        .count();
    assert!(
        died as f64 / n as f64 >= 0.99,
        "only {died}/{n} extinct before depth 30"
    );
}

#[test]
fn ball_radius_zero_is_single_vertex() {
    let g = RootedGraph::cycle(12).unwrap();
    let b = g.ball(4, 0).unwrap();
    assert_eq!(b.len(), 1);
    assert_eq!(b.root(), Some(0));
}

#[test]
fn ball_on_cycle_is_center_rooted_path() {
    let g = RootedGraph::cycle(12).unwrap();
    let b = g.ball(7, 2).unwrap();
    assert_eq!(b.len(), 5);
    assert_eq!(b.edge_count(), 4);
    // path rooted at its center
    let path = RootedGraph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)], Some(2)).unwrap();
    assert_eq!(canonical_code(&b).unwrap(), canonical_code(&path).unwrap());
}

#[test]
fn ball_radius_one_on_clique_is_everything() {
    let g = RootedGraph::complete(5).unwrap();
    let b = g.ball(2, 1).unwrap();
    assert_eq!(b.len(), 5);
    assert_eq!(b.edge_count(), 10);
}

#[test]
fn local_nbhd_distribution_cycle_single_class() {
    let g = RootedGraph::cycle(12).unwrap();
    let d = local_nbhd_distribution(&g, 2).unwrap();
    assert_eq!(d.len(), 1);
    assert!((d.values().next().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn local_nbhd_distribution_clique_single_class() {
    let g = RootedGraph::complete(4).unwrap();
    let d = local_nbhd_distribution(&g, 1).unwrap();
    assert_eq!(d.len(), 1);
}

#[test]
fn er_root_degree_approaches_poisson() {
    // total variation between root-degree frequencies and Poisson(2)
    // shrinks from n=100 to n=5000, averaged over 10 seeds
    let pois = OffspringDistribution::poisson(2.0, 30).unwrap();
    let tv_for = |n: usize| -> f64 {
        let mut acc = 0.0;
        for s in 0..10u64 {
            let g = RootedGraph::erdos_renyi(n, 2.0 / n as f64, &mut stream(100 + s)).unwrap();
            let mut freq = vec![0.0; 31];
            for v in 0..g.len() {
                freq[g.degree(v).min(30)] += 1.0 / g.len() as f64;
            }
            acc += 0.5
                * freq
                    .iter()
                    .zip(pois.probs())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>();
        }
        acc / 10.0
    };
    let (small, large) = (tv_for(100), tv_for(5000));
    assert!(large < small, "TV did not shrink: {small} -> {large}");
}

#[test]
fn component_of_uniform_root_size_bias() {
    // components of sizes 1 and 9: the big one is hit with probability 0.9
    let edges: Vec<(u32, u32)> = (1..9).map(|v| (1u32, v + 1)).collect();
    let g = RootedGraph::from_edges(10, &edges, None).unwrap();
    let mut rng = stream(5);
    let n = 10_000;
    let big = (0..n)
        .filter(|_| g.component_of_uniform_root(&mut rng).unwrap().len() == 9)
        .count();
    let frac = big as f64 / n as f64;
    assert!((frac - 0.9).abs() <= 0.03, "frac {frac}");
}

#[test]
fn component_of_connected_graph_is_everything() {
    let g = RootedGraph::cycle(7).unwrap();
    let c = g.component_of_uniform_root(&mut stream(2)).unwrap();
    assert_eq!(c.len(), 7);
}

#[test]
fn component_of_edgeless_graph_is_single_vertex() {
    let g = RootedGraph::from_edges(6, &[], None).unwrap();
    let c = g.component_of_uniform_root(&mut stream(2)).unwrap();
    assert_eq!(c.len(), 1);
}

#[test]
fn edge_list_round_trip() {
    let g = RootedGraph::erdos_renyi(40, 0.1, &mut stream(9)).unwrap();
    let mut buf = Vec::new();
    g.write_edge_list(&mut buf).unwrap();
    let h = RootedGraph::read_edge_list(buf.as_slice()).unwrap();
    assert_eq!(g, h);
}

#[test]
fn edge_list_header_format() {
    let g = RootedGraph::from_edges(3, &[(0, 2)], Some(1)).unwrap();
    let mut buf = Vec::new();
    g.write_edge_list(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "n 3 root 1\n0 2\n");
}

#[test]
fn simple_graph_invariants_rejected() {
    assert!(RootedGraph::from_edges(3, &[(1, 1)], None).is_err());
    assert!(RootedGraph::from_edges(3, &[(0, 1), (1, 0)], None).is_err());
    assert!(RootedGraph::from_edges(3, &[(0, 3)], None).is_err());
    assert!(RootedGraph::from_edges(3, &[], Some(3)).is_err());
}

/// Random tree on `n` vertices via a uniform attachment sequence.
fn random_tree(n: usize, seed: u64) -> RootedGraph {
    let mut rng = stream(seed);
    let mut edges = Vec::new();
    for v in 1..n as u32 {
        let parent = rng.gen_range(0..v);
        edges.push((parent, v));
    }
    let root = rng.gen_range(0..n as u32);
    RootedGraph::from_edges(n, &edges, Some(root)).unwrap()
}

/// Relabel by a random permutation, keeping the root's image.
fn relabel(g: &RootedGraph, seed: u64) -> RootedGraph {
    let mut rng = stream(seed);
    let n = g.len();
    let mut perm: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for &v in g.neighbors(u) {
            if (u as u32) < v {
                edges.push((perm[u], perm[v as usize]));
            }
        }
    }
    RootedGraph::from_edges(n, &edges, Some(perm[g.root().unwrap()])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn canonical_code_relabeling_invariant(n in 2usize..64, s1 in 0u64..1000, s2 in 0u64..1000) {
        let g = random_tree(n, s1);
        let h = relabel(&g, s2.wrapping_add(7919));
        prop_assert_eq!(canonical_code(&g).unwrap(), canonical_code(&h).unwrap());
    }

    #[test]
    fn ball_monotone_and_stabilizes(n in 1usize..40, p in 0.0f64..0.3, s in 0u64..1000, v in 0usize..40) {
        let g = RootedGraph::erdos_renyi(n, p, &mut stream(s)).unwrap();
        let v = v % n;
        let mut prev = 0usize;
        for r in 0..n + 2 {
            let b = g.ball(v, r).unwrap();
            prop_assert!(b.len() >= prev);
            prev = b.len();
        }
        let comp = g.ball(v, n + 2).unwrap();
        prop_assert_eq!(prev, comp.len());
        prop_assert!(comp.is_connected());
    }

    #[test]
    fn nbhd_distribution_sums_to_one(n in 1usize..30, p in 0.0f64..0.4, s in 0u64..1000) {
        let g = RootedGraph::erdos_renyi(n, p, &mut stream(s)).unwrap();
        let d = local_nbhd_distribution(&g, 1).unwrap();
        let total: f64 = d.values().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }
}
