use proptest::prelude::*;
use treg_core::descent::{optimize, OptimConfig};
use treg_core::regularizers::{loss_mse, loss_s, loss_treg, LossWeights};
use treg_core::uniformity::u_treg;
use treg_core::{brute_force_mst, kruskal_mst, mst_length_gradient, pairwise_distances, prim_mst, PointCloud};

fn cloud(max_n: usize, max_d: usize) -> impl Strategy<Value = PointCloud> {
    (1..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(-10.0f64..10.0, n * d).prop_map(move |v| PointCloud::from_flat(n, d, v).unwrap())
    })
}

/// Clouds on a coarse integer grid, so equal-length edges are common.
fn tied_cloud() -> impl Strategy<Value = PointCloud> {
    (2usize..=7, 1usize..=3).prop_flat_map(|(n, d)| {
        prop::collection::vec(-2i32..=2, n * d)
            .prop_map(move |v| PointCloud::from_flat(n, d, v.into_iter().map(f64::from).collect()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn three_algorithms_agree(c in cloud(7, 4)) {
        let dist = pairwise_distances(&c);
        let k = kruskal_mst(&dist);
        let p = prim_mst(&c);
        let b = brute_force_mst(&dist).unwrap();
        prop_assert_eq!(&k.edges, &p.edges);
        prop_assert!((k.total_length - b.total_length).abs() <= 1e-12 * b.total_length.max(1.0));
    }

    #[test]
    fn ties_resolve_to_the_same_tree(c in tied_cloud()) {
        let dist = pairwise_distances(&c);
        let k = kruskal_mst(&dist);
        prop_assert_eq!(&k.edges, &prim_mst(&c).edges);
        prop_assert_eq!(&k.edges, &brute_force_mst(&dist).unwrap().edges);
    }

    #[test]
    fn tree_shape(c in cloud(40, 5)) {
        let m = prim_mst(&c);
        prop_assert_eq!(m.edges.len(), c.n() - 1);
        prop_assert!(m.edges.iter().all(|e| e.i < e.j && e.j < c.n() && e.length >= 0.0));
        prop_assert!(m.edges.windows(2).all(|w| w[0].length <= w[1].length));
    }

    #[test]
    fn length_bounded_by_scaled_pair_sum(c in cloud(40, 8)) {
        prop_assume!(c.n() >= 2);
        let dist = pairwise_distances(&c);
        prop_assert!(kruskal_mst(&dist).total_length <= 2.0 / c.n() as f64 * dist.pair_sum());
    }

    #[test]
    fn length_ignores_translation_and_order(c in cloud(30, 4), shift in -100.0f64..100.0, seed in any::<u64>()) {
        let base = prim_mst(&c).total_length;
        let moved = prim_mst(&c.translated(&vec![shift; c.dim()])).total_length;
        prop_assert!((moved - base).abs() <= 1e-9 * base.max(1.0));
        let mut perm: Vec<usize> = (0..c.n()).collect();
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(prim_mst(&c.permuted(&perm)).total_length, base);
    }

    #[test]
    fn length_is_positively_homogeneous(c in cloud(30, 4), s in 0.01f64..100.0) {
        let base = prim_mst(&c).total_length;
        prop_assert!((prim_mst(&c.scaled(s)).total_length - s * base).abs() <= 1e-12 * s * base.max(1.0));
    }

    #[test]
    fn gradient_rows_cancel(c in cloud(30, 6)) {
        let g = mst_length_gradient(&c, &prim_mst(&c)).grads;
        let tol = 1e-9 * g.max_row_norm().max(1e-300);
        prop_assert!(g.column_sums().iter().all(|s| s.abs() <= tol));
    }

    #[test]
    fn score_is_non_positive(c in cloud(30, 6)) {
        prop_assume!(c.n() >= 2);
        let u = u_treg(&c).unwrap();
        prop_assert!(u.value <= 0.0);
        prop_assert!((u.value + u.raw_mst_length / u.normalizer).abs() <= 1e-15 * u.raw_mst_length);
    }

    #[test]
    fn sphere_and_mse_losses(a in cloud(20, 4)) {
        let (ls, _) = loss_s(&a);
        prop_assert!(ls >= 0.0);
        let b = a.scaled(0.5);
        let (ab, ga, gb) = loss_mse(&a, &b).unwrap();
        let (ba, _, _) = loss_mse(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ga.as_slice().iter().zip(gb.as_slice()).all(|(x, y)| x == &-y));
    }

    #[test]
    fn treg_total_recombines(c in cloud(20, 4), gamma in 0.0f64..5.0, lambda in 0.0f64..5.0) {
        prop_assume!(c.n() >= 2);
        let e = loss_treg(&c, &LossWeights::treg(gamma, lambda)).unwrap();
        let r = e.report;
        prop_assert!((r.total - (gamma * r.l_e + lambda * r.l_s)).abs() <= 1e-12 * r.total.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn optimization_is_deterministic(c in cloud(12, 4), seed in any::<u64>()) {
        prop_assume!(c.n() >= 2);
        let cfg = OptimConfig { steps: 30, seed, record_every: 7, ..Default::default() };
        let a = optimize(&c, &cfg).unwrap();
        let b = optimize(&c, &cfg).unwrap();
        prop_assert_eq!(a.final_cloud, b.final_cloud);
        prop_assert_eq!(a.history, b.history);
    }
}
