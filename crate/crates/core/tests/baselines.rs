use rand_distr::{Distribution, StandardNormal};
use smote_privacy::baselines::{
    auc, dcr, linkability, mia_game, naive_distinguish, FeatureSplit, LearnerConfig, MiaConfig, MiaMode,
};
use smote_privacy::data::{make_fixture, FixtureSpec};
use smote_privacy::smote::{augment, smote_oversample, SmoteConfig};
use smote_privacy::{seed, LabeledDataset, Matrix, Origin};

fn gaussian(n: usize, d: usize, s: u64) -> LabeledDataset {
    let mut rng = seed::rng(s);
    let data: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    LabeledDataset::new(Matrix::from_vec(n, d, data).unwrap(), vec![1; n]).unwrap()
}

fn smote_fixture(r: usize, n1: usize, d: usize, s: u64) -> (LabeledDataset, LabeledDataset) {
    let real = make_fixture(&FixtureSpec::new(r * n1, n1, d, s)).unwrap();
    let (syn, _) = smote_oversample(&real, &SmoteConfig::new(5, 1000 + s)).unwrap();
    (real, syn)
}

#[test]
fn naive_classifier_cannot_separate_smote_rows() {
    let (mut p, mut r) = (0.0, 0.0);
    for s in 0..10 {
        let (real, syn) = smote_fixture(12, 50, 4, s);
        let aug = augment(&real, &syn).unwrap();
        let score = naive_distinguish(&aug, &LearnerConfig::tree_ensemble(s), s).unwrap();
        p += score.precision / 10.0;
        r += score.recall / 10.0;
    }
    assert!(p <= 0.2 && r <= 0.2, "precision {p}, recall {r}");
}

#[test]
fn naive_classifier_separates_shifted_rows() {
    let (real, syn) = smote_fixture(10, 50, 4, 1);
    let shifted: Vec<Vec<f64>> = syn.features().rows_iter().map(|r| r.iter().map(|x| x + 10.0).collect()).collect();
    let n = shifted.len();
    let syn = LabeledDataset::new(Matrix::from_rows(&shifted).unwrap(), vec![1; n])
        .unwrap()
        .with_origin(vec![Origin::Synthetic; n])
        .unwrap();
    let aug = augment(&real, &syn).unwrap();
    let score = naive_distinguish(&aug, &LearnerConfig::tree_ensemble(1), 1).unwrap();
    assert!(score.precision >= 0.9 && score.recall >= 0.9, "{score:?}");
}

#[test]
fn linkability_on_independent_data_is_chance() {
    let (n_syn, reps) = (20usize, 10_000u64);
    let split = FeatureSplit { a: vec![0, 1], b: vec![2, 3] };
    let mut hits = 0.0;
    for r in 0..reps {
        let syn = gaussian(n_syn, 4, 2 * r);
        let real = gaussian(1, 4, 2 * r + 1);
        hits += linkability(&syn, &real, &split).unwrap();
    }
    let p = 1.0 / n_syn as f64;
    let mean = hits / reps as f64;
    let sigma = (p * (1.0 - p) / reps as f64).sqrt();
    assert!((mean - p).abs() <= 3.0 * sigma, "linkability {mean} vs {p} (sigma {sigma})");
}

#[test]
fn release_of_real_rows_has_zero_dcr_and_full_linkage() {
    let real = gaussian(40, 4, 3);
    assert_eq!(dcr(&real, &real).unwrap(), 0.0);
    let split = FeatureSplit::random(4, 2).unwrap();
    assert_eq!(linkability(&real, &real, &split).unwrap(), 1.0);
    let (r, syn) = smote_fixture(10, 30, 3, 2);
    assert!(dcr(&syn, &r).unwrap() > 0.0);
}

#[test]
fn auc_of_perfect_and_inverted_rankings() {
    assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
    assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1]).unwrap(), 0.0);
    assert!(auc(&[0.5, 0.5], &[1, 1]).is_err());
}

#[test]
fn mia_game_runs_in_every_mode() {
    let mut spec = FixtureSpec::new(200, 20, 2, 9);
    spec.planted_outlier = true;
    let real = make_fixture(&spec).unwrap();
    for mode in [MiaMode::SyntheticFeatures, MiaMode::AugmentedClassifier, MiaMode::RealClassifier] {
        let mut cfg = MiaConfig::new(mode, 4);
        cfg.worlds_train = 10;
        cfg.worlds_test = 10;
        let res = mia_game(&real, &cfg).unwrap();
        assert_eq!(res.target, real.len() - 1);
        assert_eq!(res.scores.len(), 20);
        assert_eq!(res.members.iter().filter(|&&m| m == 1).count(), 10);
        assert!((0.0..=1.0).contains(&res.auc));
    }
}
