use mpc_oracles::kmedian::{assignment_dp, exhaustive, Cost};
use mpc_oracles::{brute, geo, solve, tree_dp, OracleError, Rooted};
use mpc_treedp::geo::Edge;
use mpc_treedp::tree::{gen_points, gen_tree, Tree, TreeKind, WeightDist};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rooted(t: &Tree) -> Rooted {
    Rooted::new(t).unwrap()
}

fn unit_path(n: usize) -> Tree {
    let parents: Vec<u64> = (0..n as u64).collect();
    Tree::from_parents(&parents, None).unwrap()
}

fn random_trees(seed: u64, count: usize, max_n: usize) -> Vec<Tree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let kind = TreeKind::ALL[rng.gen_range(0..TreeKind::ALL.len())];
            let n = rng.gen_range(1..=max_n);
            gen_tree(kind, n, rng.gen(), WeightDist::Uniform { lo: 1, hi: 9 })
        })
        .collect()
}

#[test]
fn hand_checked_values() {
    assert_eq!(tree_dp::min_bisection(&rooted(&unit_path(4))), 1);
    let edge = gen_tree(TreeKind::Path, 2, 0, WeightDist::Uniform { lo: 7, hi: 7 });
    assert_eq!(tree_dp::max_weight_matching(&rooted(&edge)), 7);
    assert_eq!(solve("kmedian", &unit_path(3), 1).unwrap().value, 2);
    assert_eq!(solve("kcenter", &unit_path(3), 1).unwrap().value, 1);
    assert!(matches!(solve("nope", &unit_path(3), 1), Err(OracleError::UnknownProblem(_))));
}

#[test]
fn brute_force_refuses_large_trees() {
    let t = rooted(&unit_path(brute::LIMIT + 1));
    assert!(matches!(brute::min_vertex_cover(&t), Err(OracleError::TooLarge { .. })));
}

#[test]
fn tree_dps_equal_brute_force() {
    for t in random_trees(1, 300, 14) {
        let r = rooted(&t);
        let n = r.len();
        assert_eq!(tree_dp::max_weight_matching(&r), brute::max_weight_matching(&r).unwrap());
        assert_eq!(tree_dp::max_independent_set(&r), brute::max_independent_set(&r).unwrap());
        assert_eq!(tree_dp::min_vertex_cover(&r), brute::min_vertex_cover(&r).unwrap());
        assert_eq!(tree_dp::min_dominating_set(&r), brute::min_dominating_set(&r).unwrap());
        assert_eq!(tree_dp::longest_path(&r), brute::longest_path(&r).unwrap());
        assert_eq!(tree_dp::min_bisection(&r), brute::min_bisection(&r).unwrap());
        for k in 0..=n {
            assert_eq!(tree_dp::max_k_subtree(&r, k).unwrap(), brute::max_k_subtree(&r, k).unwrap());
        }
        assert!(tree_dp::max_k_subtree(&r, n + 1).is_err());
    }
}

#[test]
fn kmedian_dp_equals_enumeration() {
    for t in random_trees(2, 150, 12) {
        let r = rooted(&t);
        for k in 1..=3 {
            for cost in [Cost::Sum, Cost::Max] {
                assert_eq!(assignment_dp(&r, k, cost).unwrap(), exhaustive(&r, k, cost).unwrap());
            }
        }
    }
}

#[test]
fn kruskal_and_scan_on_small_inputs() {
    let e = |u, v, w, id| Edge { u, v, weight: w, id };
    let cycle = [e(0, 1, 1, 0), e(1, 2, 2, 1), e(2, 3, 3, 2), e(3, 0, 4, 3)];
    assert_eq!(geo::kruskal(4, &cycle).len(), 3);
    let p = gen_points(40, 2, 100, 3);
    let sq = |a: &[i64], b: &[i64]| a.iter().zip(b).map(|(x, y)| ((x - y) * (x - y)) as u64).sum::<u64>();
    let (u, v, d) = geo::closest_pair(&p, sq).unwrap();
    assert!(u < v);
    assert!(geo::complete_graph(&p, sq).iter().all(|x| x.weight >= d));
    assert_eq!(geo::complete_graph_mst(&p, sq).len(), 39);
}

#[test]
fn solve_is_deterministic() {
    let t = gen_tree(TreeKind::RandomRecursive, 60, 4, WeightDist::Uniform { lo: 1, hi: 5 });
    let a = solve("bisection", &t, 0).unwrap();
    let b = solve("bisection", &t, 0).unwrap();
    assert_eq!((a.value, a.digest), (b.value, b.digest));
}
