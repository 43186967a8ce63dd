//! Acceptance criteria. Runs with a plain `main` so that the per-criterion
//! verdicts are always printed; exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use smote_privacy::baselines::{dcr, linkability, mia_game, FeatureSplit, MiaConfig, MiaMode};
use smote_privacy::bounds::{approx_recall_bound, binom_tail_ge3, exact_recall_bound, BoundInputs};
use smote_privacy::data::{make_fixture, standardize, FixtureSpec};
use smote_privacy::smote::{segment_usage_counts, smote_oversample, SmoteConfig};
use smote_privacy::{seed, LabeledDataset, Matrix};
use smote_privacy_cli::config::{parse_dataset, ExperimentConfig, Method};
use smote_privacy_cli::experiment::{run_experiment, CellOutcome, ExperimentOutput, ReportRow};

/// (r, d, n1) of the fixture grid.
const GRID: [(usize, usize, usize); 8] = [
    (9, 2, 100),
    (12, 6, 100),
    (19, 8, 20),
    (26, 21, 20),
    (42, 2, 20),
    (130, 6, 20),
    (26, 8, 100),
    (12, 21, 20),
];
const SEEDS: u64 = 25;
const K: usize = 5;
const FIXTURE_SEED: u64 = 1;
const SWEEP: [usize; 7] = [5, 10, 20, 25, 50, 75, 100];

struct Verdict {
    id: u32,
    title: &'static str,
    checks: Vec<(String, bool)>,
    seconds: f64,
}

impl Verdict {
    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

fn grid_name(r: usize, d: usize, n1: usize) -> String {
    format!("r{r}_d{d}_n{n1}")
}

fn grid_config(entries: &[(usize, usize, usize)], methods: &[Method], seeds: u64) -> ExperimentConfig {
    let base = Path::new(".");
    ExperimentConfig {
        datasets: entries
            .iter()
            .map(|&(r, d, n1)| {
                let spec = format!("{}:fixture:n1={n1},r={r},d={d},seed={FIXTURE_SEED}", grid_name(r, d, n1));
                parse_dataset(&spec, base).unwrap()
            })
            .collect(),
        seeds: (0..seeds).collect(),
        master_seed: 2024,
        k: K,
        methods: methods.iter().copied().collect(),
        ..ExperimentConfig::default()
    }
}

fn metric(c: &CellOutcome, method: Method, name: &str) -> Option<f64> {
    c.metrics.get(method.label()).and_then(|m| m.get(name)).copied()
}

fn row<'a>(out: &'a ExperimentOutput, dataset: &str, method: Method, name: &str) -> Option<&'a ReportRow> {
    out.rows
        .iter()
        .find(|r| r.dataset == dataset && r.method == method.label() && r.metric == name)
}

fn healthy(out: &ExperimentOutput) -> (String, bool) {
    let ok = out.exit_code() == 0;
    (
        format!("all cells ran ({} failed, {} dataset errors)", out.failed_cells(), out.dataset_errors.len()),
        ok,
    )
}

fn criterion_1(distin: &ExperimentOutput, seconds: f64) -> Verdict {
    let mut checks = vec![healthy(distin)];
    for &(r, d, n1) in &GRID {
        let name = grid_name(r, d, n1);
        let cells: Vec<&CellOutcome> = distin.cells.iter().filter(|c| c.dataset == name).collect();
        let exact = cells.iter().filter(|c| {
            metric(c, Method::Distinguish, "precision") == Some(1.0) && metric(c, Method::Distinguish, "recall") == Some(1.0)
        });
        let n = exact.count();
        checks.push((format!("{name}: precision = recall = 1 in {n}/{} seeds", cells.len()), n == SEEDS as usize));
    }
    checks.push((format!("distinguishing grid took {seconds:.1}s (< 180s)"), seconds < 180.0));
    Verdict {
        id: 1,
        title: "real/synthetic separation is exact on the fixture grid",
        checks,
        seconds,
    }
}

fn criterion_2(recon: &ExperimentOutput, seconds: f64) -> Verdict {
    let mut checks = vec![healthy(recon)];
    for &(r, d, n1) in &GRID {
        let name = grid_name(r, d, n1);
        let cells: Vec<&CellOutcome> = recon.cells.iter().filter(|c| c.dataset == name).collect();
        let n = cells
            .iter()
            .filter(|c| metric(c, Method::Reconstruct, "precision") == Some(1.0))
            .count();
        checks.push((format!("{name}: reconstruction precision = 1 in {n}/{} seeds", cells.len()), n == SEEDS as usize));
    }
    Verdict {
        id: 2,
        title: "reconstruction precision is 1 at matching radius 1e-6",
        checks,
        seconds,
    }
}

/// Expected share of minority points touching at least three segments that
/// carry three or more synthetic rows, over 2000 SMOTE draws.
fn recall_ceiling(r: usize, d: usize, n1: usize) -> f64 {
    let real = make_fixture(&FixtureSpec::new(r * n1, n1, d, FIXTURE_SEED)).unwrap();
    let reps = 2000u64;
    let total: usize = (0..reps)
        .map(|s| {
            let (_, prov) = smote_oversample(&real, &SmoteConfig::new(K, s)).unwrap();
            let mut incident = vec![0usize; n1];
            for (&(i, j), &c) in &segment_usage_counts(&prov) {
                if c >= 3 {
                    incident[i] += 1;
                    incident[j] += 1;
                }
            }
            incident.iter().filter(|&&c| c >= 3).count()
        })
        .sum();
    total as f64 / (reps as usize * n1) as f64
}

fn recall_checks(out: &ExperimentOutput, (r, d, n1): (usize, usize, usize), checks: &mut Vec<(String, bool)>) -> Option<f64> {
    let name = &grid_name(r, d, n1);
    let Some(rec) = row(out, name, Method::Reconstruct, "recall") else {
        checks.push((format!("{name}: no recall row"), false));
        return None;
    };
    let (a, l) = (rec.a_id.unwrap_or(f64::NAN), rec.l_id.unwrap_or(f64::NAN));
    checks.push((
        format!("{name}: mean recall {:.4} >= L_id {l:.4} and >= A_id {a:.4}", rec.mean),
        rec.mean >= l && rec.mean >= a,
    ));
    if r >= 20 {
        checks.push((
            format!(
                "{name}: mean recall {:.4} >= 0.99 (r >= 20; reachable fraction {:.4})",
                rec.mean,
                recall_ceiling(r, d, n1)
            ),
            rec.mean >= 0.99,
        ));
    }
    Some(rec.mean)
}

fn criterion_3(recon: &ExperimentOutput, sweep: &ExperimentOutput, seconds: f64) -> Verdict {
    let mut checks = vec![healthy(sweep)];
    for &(r, d, n1) in &GRID {
        recall_checks(recon, (r, d, n1), &mut checks);
    }
    let means: Vec<f64> = SWEEP
        .iter()
        .filter_map(|&r| recall_checks(sweep, (r, 8, 20), &mut checks))
        .collect();
    let drops: Vec<f64> = means.windows(2).map(|w| w[0] - w[1]).filter(|&x| x > 0.0).collect();
    let trend_ok = means.len() == SWEEP.len() && drops.len() <= 1 && drops.iter().all(|&x| x <= 0.02);
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.4}")).collect();
    checks.push((
        format!("recall over r = {SWEEP:?}: [{}] ({} inversions)", shown.join(", "), drops.len()),
        trend_ok,
    ));
    Verdict {
        id: 3,
        title: "reconstruction recall meets the lower bounds and grows with r",
        checks,
        seconds,
    }
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut checks = Vec::new();
    // 50-digit reference evaluation of the Poisson tail at lambda = 5.
    let reference = 0.792_246_634_194_864_8;
    let got = approx_recall_bound(&BoundInputs::from_ratio(26.0, 100, 5, 0.0)).unwrap().bound;
    checks.push((
        format!("approx bound (r=26, k=5, n1=100) = {got:.6} vs reference {reference:.6}"),
        (got - reference).abs() <= 1e-4,
    ));
    let tail = binom_tail_ge3(4, 0.5);
    checks.push((format!("binom_tail_ge3(4, 0.5) = {tail}"), tail == 0.3125));

    let (mut cells, mut bad, mut worst_rel, mut worst_abs) = (0usize, Vec::new(), 0.0f64, 0.0f64);
    for n1 in [20usize, 34, 50, 100, 200] {
        for k in [3usize, 5, 7, 10] {
            if n1 * k < 100 {
                continue;
            }
            for n0 in (n1 + 1)..=(n1 + 20 * n1 * k) {
                let inputs = BoundInputs::new(n0, n1, k, 0.0);
                let a = approx_recall_bound(&inputs).unwrap().bound;
                let e = exact_recall_bound(&inputs).unwrap().bound;
                if a == 0.0 && e == 0.0 {
                    continue;
                }
                cells += 1;
                let diff = (e - a).abs();
                worst_abs = worst_abs.max(diff);
                let rel = if a > 0.0 { diff / a } else { f64::INFINITY };
                if rel > 0.01 {
                    worst_rel = worst_rel.max(rel);
                    bad.push((n1, k, inputs.lambda()));
                }
            }
        }
    }
    let mut bands: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for &(n1, k, l) in &bad {
        let e = bands.entry((n1, k)).or_insert((l, l));
        e.0 = e.0.min(l);
        e.1 = e.1.max(l);
    }
    let band_text: Vec<String> = bands
        .iter()
        .map(|((n1, k), (lo, hi))| format!("n1={n1},k={k}: lambda {lo:.3}..{hi:.3}"))
        .collect();
    checks.push((
        format!(
            "exact (alpha=0) within 1% of approx for n1*k >= 100, lambda <= 20: {} of {cells} cells outside \
             (worst relative gap {worst_rel:.3}, largest absolute gap {worst_abs:.4}){}{}",
            bad.len(),
            if band_text.is_empty() { "" } else { "; violations at " },
            band_text.join("; ")
        ),
        bad.is_empty(),
    ));

    let mut monotone = true;
    for n1 in [20usize, 100] {
        for k in [3usize, 5, 10] {
            for r in [2.0, 5.0, 9.0, 12.0, 26.0, 50.0, 100.0] {
                let vals: Vec<f64> = (0..=20)
                    .map(|i| exact_recall_bound(&BoundInputs::from_ratio(r, n1, k, i as f64 / 20.0)).unwrap().bound)
                    .collect();
                monotone &= vals.windows(2).all(|w| w[1] >= w[0]);
            }
        }
    }
    checks.push(("exact bound nondecreasing in alpha on a 21-point grid".into(), monotone));
    Verdict {
        id: 4,
        title: "bound calculator",
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let mut checks = Vec::new();
    let (mut datasets, mut rows, mut bad_rows, mut bad_count) = (0, 0usize, 0usize, 0usize);
    for &(r, d, n1) in &GRID {
        let real = standardize(&make_fixture(&FixtureSpec::new(r * n1, n1, d, FIXTURE_SEED)).unwrap())
            .unwrap()
            .0;
        let minority = real.minority_features();
        for s in 0..SEEDS {
            let (syn, prov) = smote_oversample(&real, &SmoteConfig::new(K, seed::derive(s, 0))).unwrap();
            datasets += 1;
            bad_count += usize::from(syn.len() != (r - 1) * n1);
            for (i, p) in prov.rows.iter().enumerate() {
                rows += 1;
                let (a, b) = (minority.row(p.i), minority.row(p.j));
                let on_segment = a.iter().zip(b).zip(syn.features().row(i)).all(|((x, y), v)| {
                    let want = x + p.u * (y - x);
                    (v - want).abs() <= 1e-12 * (1.0 + want.abs())
                });
                bad_rows += usize::from(!(on_segment && p.u > 0.0 && p.u < 1.0));
            }
        }
    }
    checks.push((format!("|D_syn| = n0 - n1 in {}/{datasets} generated sets", datasets - bad_count), bad_count == 0));
    checks.push((
        format!("{}/{rows} synthetic rows on their segment (1e-12) with u in (0,1)", rows - bad_rows),
        bad_rows == 0,
    ));

    let (n1, k, draws) = (10usize, 5usize, 100_000usize);
    let real = make_fixture(&FixtureSpec::new(n1 + 1, n1, 3, 6)).unwrap();
    let cfg = SmoteConfig {
        target_synth_count: Some(draws),
        ..SmoteConfig::new(k, 77)
    };
    let (_, prov) = smote_oversample(&real, &cfg).unwrap();
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for p in &prov.rows {
        *counts.entry((p.i, p.j)).or_default() += 1;
    }
    let p = 1.0 / (n1 * k) as f64;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    let worst = counts
        .values()
        .map(|&c| ((c as f64 - draws as f64 * p) / sigma).abs())
        .fold(0.0, f64::max);
    checks.push((
        format!("{} directed segments over 1e5 draws, max |z| = {worst:.2} (<= 3)", counts.len()),
        counts.len() == n1 * k && worst <= 3.0,
    ));
    Verdict {
        id: 5,
        title: "SMOTE output contract",
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn gaussian(n: usize, d: usize, s: u64) -> LabeledDataset {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = seed::rng(s);
    let data: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    LabeledDataset::new(Matrix::from_vec(n, d, data).unwrap(), vec![1; n]).unwrap()
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let cfg = grid_config(&GRID, &[Method::Naive], 10);
    let out = run_experiment(&cfg).unwrap();
    let mut checks = vec![healthy(&out)];
    for &(r, d, n1) in &GRID {
        let name = grid_name(r, d, n1);
        let p = row(&out, &name, Method::Naive, "precision").map_or(f64::NAN, |x| x.mean);
        let rc = row(&out, &name, Method::Naive, "recall").map_or(f64::NAN, |x| x.mean);
        checks.push((
            format!("{name}: naive classifier mean precision {p:.3}, recall {rc:.3} (<= 0.2)"),
            p <= 0.2 && rc <= 0.2,
        ));
    }

    let (n_syn, reps) = (20usize, 10_000u64);
    let split = FeatureSplit { a: vec![0, 1], b: vec![2, 3] };
    let hits: f64 = (0..reps)
        .map(|i| linkability(&gaussian(n_syn, 4, 2 * i), &gaussian(1, 4, 2 * i + 1), &split).unwrap())
        .sum();
    let p = 1.0 / n_syn as f64;
    let mean = hits / reps as f64;
    let sigma = (p * (1.0 - p) / reps as f64).sqrt();
    checks.push((
        format!("linkability on independent data {mean:.4} vs 1/|syn| = {p:.4} (3 sigma = {:.4})", 3.0 * sigma),
        (mean - p).abs() <= 3.0 * sigma,
    ));

    let zero = GRID.iter().all(|&(r, d, n1)| {
        let real = make_fixture(&FixtureSpec::new(r * n1, n1, d, FIXTURE_SEED)).unwrap();
        dcr(&real, &real).unwrap() == 0.0
    });
    checks.push(("dcr(real, real) = 0 on every grid fixture".into(), zero));
    Verdict {
        id: 6,
        title: "conventional metrics underestimate the leak",
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let mut checks = Vec::new();
    let spec = FixtureSpec {
        planted_outlier: true,
        ..FixtureSpec::new(600, 20, 2, 7)
    };
    let real = make_fixture(&spec).unwrap();

    let shuffled: Vec<f64> = (0..30u64)
        .map(|s| {
            let cfg = MiaConfig {
                shuffle_labels: true,
                ..MiaConfig::new(MiaMode::SyntheticFeatures, 100 + s)
            };
            mia_game(&real, &cfg).unwrap().auc
        })
        .collect();
    let lo = shuffled.iter().copied().fold(1.0, f64::min);
    let hi = shuffled.iter().copied().fold(0.0, f64::max);
    checks.push((
        format!("shuffled-label AUC over 30 repetitions in [{lo:.3}, {hi:.3}] (within [0.35, 0.65])"),
        lo >= 0.35 && hi <= 0.65,
    ));

    let auc = mia_game(&real, &MiaConfig::new(MiaMode::SyntheticFeatures, 1)).unwrap().auc;
    checks.push((format!("planted outlier, synthetic-features mode, r=30, 100/50 worlds: AUC {auc:.3} (>= 0.7)"), auc >= 0.7));

    let (mut aug, mut plain) = (0.0, 0.0);
    for s in 0..10u64 {
        aug += mia_game(&real, &MiaConfig::new(MiaMode::AugmentedClassifier, 200 + s)).unwrap().auc / 10.0;
        plain += mia_game(&real, &MiaConfig::new(MiaMode::RealClassifier, 200 + s)).unwrap().auc / 10.0;
    }
    checks.push((
        format!("mean AUC over 10 seeds: augmented-data classifier {aug:.4} >= real-data classifier {plain:.4}"),
        aug >= plain,
    ));
    Verdict {
        id: 7,
        title: "membership inference properties",
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("experiment.txt");
    std::fs::write(
        &cfg,
        "seeds = 0..4\nmaster_seed = 11\nmethods = distinguish, reconstruct, dcr, linkability, naive\n\
         dataset = a:fixture:n1=30,r=12,d=3,seed=2\ndataset = b:fixture:n1=20,r=20,d=5,layout=two,seed=3\n",
    )
    .unwrap();
    let reports: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let out = dir.path().join(format!("run{i}"));
            let status = Command::new(env!("CARGO_BIN_EXE_smote-privacy"))
                .args(["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
                .output()
                .unwrap();
            assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
            std::fs::read(out.join("report.csv")).unwrap()
        })
        .collect();
    Verdict {
        id: 8,
        title: "experiment reruns are byte-identical",
        checks: vec![(
            format!("report.csv of two runs: {} bytes each, identical", reports[0].len()),
            !reports[0].is_empty() && reports[0] == reports[1],
        )],
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn report(v: &Verdict) {
    println!(
        "criterion {} [{}] {} ({:.1}s)",
        v.id,
        if v.passed() { "PASS" } else { "FAIL" },
        v.title,
        v.seconds
    );
    for (text, ok) in &v.checks {
        println!("    {} {text}", if *ok { "ok  " } else { "FAIL" });
    }
}

fn main() {
    let mut verdicts = Vec::new();

    let t = Instant::now();
    let distin = run_experiment(&grid_config(&GRID, &[Method::Distinguish], SEEDS)).unwrap();
    let distin_secs = t.elapsed().as_secs_f64();
    verdicts.push(criterion_1(&distin, distin_secs));
    report(verdicts.last().unwrap());

    let t = Instant::now();
    let recon = run_experiment(&grid_config(&GRID, &[Method::Reconstruct], SEEDS)).unwrap();
    let recon_secs = t.elapsed().as_secs_f64();
    verdicts.push(criterion_2(&recon, recon_secs));
    report(verdicts.last().unwrap());

    let t = Instant::now();
    let sweep_grid: Vec<(usize, usize, usize)> = SWEEP.iter().map(|&r| (r, 8, 20)).collect();
    let sweep = run_experiment(&grid_config(&sweep_grid, &[Method::Reconstruct], SEEDS)).unwrap();
    verdicts.push(criterion_3(&recon, &sweep, t.elapsed().as_secs_f64()));
    report(verdicts.last().unwrap());

    for f in [criterion_4, criterion_5, criterion_6, criterion_7, criterion_8] {
        verdicts.push(f());
        report(verdicts.last().unwrap());
    }

    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.passed()).map(|v| v.id).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        verdicts.len() - failed.len(),
        verdicts.len(),
        if failed.is_empty() { String::new() } else { format!("; failed: {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
