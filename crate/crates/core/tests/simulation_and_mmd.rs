//! Sampling identities for the count generators, cluster invariants on
//! random trees, and the MMD statistic against explicit feature means.

use nalgebra::DMatrix;
use phylokern::bioio::{cophenetic, parse_newick};
use phylokern::mmdtest::{mmd2, permutation_test, stacked_labels, Estimator};
use phylokern::rng;
use phylokern::simgen::{
    fit_dmn_ml, log10_perm_space, max_within_cluster_distance, phylo_clusters, random_label_clusters,
    sample_dmn, sample_reads, within_cluster_permutation, NbReadModel,
};
use proptest::prelude::*;
use rand::Rng;

fn ids(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("OTU_{j}")).collect()
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn dmn_fit_recovers_proportions() {
    let mut g = rng::stream(1, &[]);
    let table = sample_dmn(&[5.0, 5.0], &vec![1000; 500], &ids(2), "S", &mut g).unwrap();
    let fit = fit_dmn_ml(&table).unwrap();
    let total: f64 = fit.alpha.iter().sum();
    for a in &fit.alpha {
        assert!((a / total - 0.5).abs() <= 0.05, "{:?}", fit.alpha);
    }
    // the precision is identifiable too: Σα = 10
    assert!((total - 10.0).abs() < 3.0, "Σα = {total}");
}

#[test]
fn dmn_marginal_mean() {
    let mut g = rng::stream(2, &[]);
    let n = 10_000;
    let table = sample_dmn(&[1.0, 1.0], &vec![1000; n], &ids(2), "S", &mut g).unwrap();
    let first: Vec<f64> = table.rows().map(|r| r[0] as f64).collect();
    assert!(table.rows().all(|r| r.iter().sum::<u64>() == 1000));
    let (m, v) = mean_var(&first);
    let se = (v / n as f64).sqrt();
    assert!((m - 500.0).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn negative_binomial_moments() {
    let mut g = rng::stream(3, &[]);
    let reads: Vec<f64> = sample_reads(NbReadModel { a: 1e5, b: 10.0 }, 100_000, &mut g)
        .unwrap()
        .into_iter()
        .map(|r| r as f64)
        .collect();
    let (m, v) = mean_var(&reads);
    let sd = (1e5f64 + 1e10 / 10.0).sqrt();
    assert!((v.sqrt() / sd - 1.0).abs() <= 0.05, "sd {} vs {sd}", v.sqrt());
    assert!((m / 1e5 - 1.0).abs() <= 0.01);

    let reads: Vec<f64> = sample_reads(NbReadModel { a: 50.0, b: 1e9 }, 100_000, &mut g)
        .unwrap()
        .into_iter()
        .map(|r| r as f64)
        .collect();
    let (m, v) = mean_var(&reads);
    assert!((v / m - 1.0).abs() <= 0.1, "variance {v}, mean {m}");
}

fn random_tree(n: usize, seed: u64) -> String {
    let mut g = rng::stream(seed, &[]);
    let mut parts: Vec<String> = (0..n).map(|i| format!("L{i}")).collect();
    while parts.len() > 1 {
        let a = parts.swap_remove(g.random_range(0..parts.len()));
        let b = parts.swap_remove(g.random_range(0..parts.len()));
        parts.push(format!("({a}:{},{b}:{})", g.random_range(0.01..1.0), g.random_range(0.01..1.0)));
    }
    format!("{};", parts[0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phylo_clusters_respect_threshold_and_nest(n in 2usize..40, seed in any::<u64>(), e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
        let tree = parse_newick(&random_tree(n, seed)).unwrap();
        let leaves: Vec<String> = tree.leaf_labels().into_iter().map(String::from).collect();
        let coph = cophenetic(&tree, &leaves).unwrap();
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let fine = phylo_clusters(&coph, lo).unwrap();
        let coarse = phylo_clusters(&coph, hi).unwrap();
        for c in [&fine, &coarse] {
            prop_assert!(max_within_cluster_distance(&coph, c) <= c.threshold.unwrap() * (1.0 + 1e-12));
            prop_assert_eq!(c.n_otus(), n);
        }
        // a larger scale only merges clusters
        for i in 0..n {
            for j in 0..n {
                if fine.labels[i] == fine.labels[j] {
                    prop_assert_eq!(coarse.labels[i], coarse.labels[j]);
                }
            }
        }
        prop_assert_eq!(phylo_clusters(&coph, 1.0).unwrap().n_clusters(), 1);
        prop_assert!(log10_perm_space(&fine) <= log10_perm_space(&coarse) + 1e-12);
    }

    #[test]
    fn permutation_only_moves_values_within_clusters(n in 2usize..40, seed in any::<u64>(), eps in 0.0f64..1.0) {
        let tree = parse_newick(&random_tree(n, seed)).unwrap();
        let leaves: Vec<String> = tree.leaf_labels().into_iter().map(String::from).collect();
        let clusters = phylo_clusters(&cophenetic(&tree, &leaves).unwrap(), eps).unwrap();
        let alpha: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let permuted = within_cluster_permutation(&alpha, &clusters, &mut rng::stream(seed, &[1])).unwrap();
        for members in clusters.clusters() {
            let mut a: Vec<f64> = members.iter().map(|&i| alpha[i]).collect();
            let mut b: Vec<f64> = members.iter().map(|&i| permuted[i]).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
        let random = random_label_clusters(&clusters.sizes(), n, &mut rng::stream(seed, &[2])).unwrap();
        prop_assert_eq!(random.sizes(), clusters.sizes());
    }

    #[test]
    fn mmd_equals_squared_distance_of_feature_means(nx in 1usize..12, ny in 1usize..12, d in 1usize..5, seed in any::<u64>()) {
        let mut g = rng::stream(seed, &[]);
        let x = DMatrix::from_fn(nx + ny, d, |_, _| g.random_range(-2.0..2.0));
        let k = &x * x.transpose();
        let labels = stacked_labels(nx, ny);
        let mx = x.rows(0, nx).row_mean();
        let my = x.rows(nx, ny).row_mean();
        let want = (mx - my).norm_squared();
        let got = mmd2(&k, &labels, Estimator::BlockMeans).unwrap();
        prop_assert!((got - want).abs() <= 1e-10 * (1.0 + want));

        if nx >= 2 && ny >= 2 {
            // U-statistic by direct double loops
            let mut xx = 0.0;
            let mut yy = 0.0;
            let mut xy = 0.0;
            for i in 0..nx + ny {
                for j in 0..nx + ny {
                    match (i < nx, j < nx) {
                        (true, true) if i != j => xx += k[(i, j)],
                        (false, false) if i != j => yy += k[(i, j)],
                        (true, false) => xy += k[(i, j)],
                        _ => {}
                    }
                }
            }
            let (fx, fy) = (nx as f64, ny as f64);
            let want = xx / (fx * (fx - 1.0)) + yy / (fy * (fy - 1.0)) - 2.0 * xy / (fx * fy);
            let got = mmd2(&k, &labels, Estimator::Unbiased).unwrap();
            prop_assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }
}

#[test]
fn p_values_are_floored_and_never_zero() {
    let n_perm = 99;
    // two well-separated groups: no permutation reaches the observed value
    let x: Vec<f64> = (0..40).map(|i| if i < 20 { i as f64 * 0.01 } else { 100.0 + i as f64 * 0.01 }).collect();
    let k = DMatrix::from_fn(40, 40, |i, j| x[i] * x[j]);
    let r = permutation_test(&k, &stacked_labels(20, 20), n_perm, 4, Estimator::BlockMeans).unwrap();
    assert_eq!(r.p_value, 1.0 / (n_perm as f64 + 1.0));

    let mut g = rng::stream(5, &[]);
    for seed in 0..20 {
        let x: Vec<f64> = (0..20).map(|_| g.random_range(0.0..1.0)).collect();
        let k = DMatrix::from_fn(20, 20, |i, j| (-(x[i] - x[j]).powi(2)).exp());
        let r = permutation_test(&k, &stacked_labels(10, 10), n_perm, seed, Estimator::Unbiased).unwrap();
        assert!(r.p_value >= 1.0 / (n_perm as f64 + 1.0) && r.p_value <= 1.0);
    }
}
