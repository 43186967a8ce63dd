use std::collections::BTreeMap;

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};
use smote_privacy::data::{make_fixture, FixtureSpec};
use smote_privacy::knn::build_knn_graph;
use smote_privacy::smote::{augment, segment_usage_counts, smote_oversample, SmoteConfig};
use smote_privacy::Origin;

#[test]
fn rows_lie_on_their_segments() {
    for (n0, n1, d, seed) in [(500, 50, 3, 1u64), (260, 20, 8, 2), (1200, 100, 2, 3)] {
        let real = make_fixture(&FixtureSpec::new(n0, n1, d, seed)).unwrap();
        let (syn, prov) = smote_oversample(&real, &SmoteConfig::new(5, seed + 7)).unwrap();
        assert_eq!(syn.len(), n0 - n1);
        assert_eq!(prov.len(), n0 - n1);
        assert!(syn.labels().iter().all(|&l| l == 1));
        assert!(syn.origin().unwrap().iter().all(|&o| o == Origin::Synthetic));
        let minority = real.minority_features();
        let graph = build_knn_graph(&minority, 5).unwrap();
        for (r, p) in prov.rows.iter().enumerate() {
            assert!(p.u > 0.0 && p.u < 1.0);
            assert!(graph.has_edge(p.i, p.j));
            let (a, b) = (minority.row(p.i), minority.row(p.j));
            for ((x, y), s) in a.iter().zip(b).zip(syn.features().row(r)) {
                let expect = x + p.u * (y - x);
                assert!((s - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
        let aug = augment(&real, &syn).unwrap();
        assert_eq!(aug.len(), 2 * n0);
        assert_eq!(aug.stats().n1, n0);
    }
}

#[test]
fn explicit_target_count_and_small_minority() {
    let real = make_fixture(&FixtureSpec::new(100, 10, 2, 4)).unwrap();
    let mut cfg = SmoteConfig::new(5, 1);
    cfg.target_synth_count = Some(7);
    assert_eq!(smote_oversample(&real, &cfg).unwrap().0.len(), 7);
    assert!(smote_oversample(&real, &SmoteConfig::new(10, 1)).is_err());
}

#[test]
fn same_seed_same_output() {
    let real = make_fixture(&FixtureSpec::new(300, 30, 4, 5)).unwrap();
    let a = smote_oversample(&real, &SmoteConfig::new(5, 9)).unwrap();
    let b = smote_oversample(&real, &SmoteConfig::new(5, 9)).unwrap();
    assert_eq!(a, b);
    let c = smote_oversample(&real, &SmoteConfig::new(5, 10)).unwrap();
    assert_ne!(a.1, c.1);
}

#[test]
fn directed_segments_are_chosen_uniformly() {
    let (n1, k, draws) = (10usize, 5usize, 100_000usize);
    let real = make_fixture(&FixtureSpec::new(n1 + 1, n1, 3, 6)).unwrap();
    let mut cfg = SmoteConfig::new(k, 77);
    cfg.target_synth_count = Some(draws);
    let (_, prov) = smote_oversample(&real, &cfg).unwrap();
    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for p in &prov.rows {
        *directed.entry((p.i, p.j)).or_default() += 1;
    }
    assert_eq!(directed.len(), n1 * k);
    let p = 1.0 / (n1 * k) as f64;
    let mean = draws as f64 * p;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for (seg, &c) in &directed {
        let z = (c as f64 - mean) / sigma;
        assert!(z.abs() <= 3.0, "segment {seg:?}: count {c}, z = {z:.2}");
    }
}

/// Per-segment counts follow Binomial(n0 - n1, 1/(n1 k)) for one-way neighbor
/// pairs and Binomial(n0 - n1, 2/(n1 k)) for mutual pairs.
#[test]
fn segment_counts_follow_binomial_mixture() {
    let (n1, k, r) = (20usize, 5usize, 26usize);
    let n0 = r * n1;
    let trials = (n0 - n1) as u64;
    let q = 1.0 / (n1 * k) as f64;
    let bins = 13usize;
    let mut observed = vec![0.0; bins];
    let mut expected = vec![0.0; bins];
    for seed in 0..200u64 {
        let real = make_fixture(&FixtureSpec::new(n0, n1, 4, seed)).unwrap();
        let graph = build_knn_graph(&real.minority_features(), k).unwrap();
        let (_, prov) = smote_oversample(&real, &SmoteConfig::new(k, 5000 + seed)).unwrap();
        let counts = segment_usage_counts(&prov);
        for (from, to, mutual) in graph.edges() {
            if mutual && from > to {
                continue;
            }
            let key = (from.min(to), from.max(to));
            let c = counts.get(&key).copied().unwrap_or(0);
            observed[c.min(bins - 1)] += 1.0;
            let law = Binomial::new(if mutual { 2.0 * q } else { q }, trials).unwrap();
            let head: f64 = (0..bins as u64 - 1).map(|x| law.pmf(x)).sum();
            for (x, e) in expected.iter_mut().enumerate().take(bins - 1) {
                *e += law.pmf(x as u64);
            }
            expected[bins - 1] += 1.0 - head;
        }
    }
    let stat: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat:.2} >= {critical:.2}");
}
