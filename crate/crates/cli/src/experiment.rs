//! Runs (dataset x seed) cells and aggregates them into a report.
//!
//! Each dataset is standardized once; SMOTE, the attacks and the baselines
//! all operate in that space. A cell's randomness depends only on the master
//! seed, the dataset name and the seed value.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use smote_privacy::attacks::{distin_smote, match_ids, match_points, recon_smote, AttackConfig};
use smote_privacy::baselines::{dcr, linkability_mean, mia_game, naive_distinguish, LearnerConfig, MiaConfig};
use smote_privacy::bounds::{approx_recall_bound, exact_recall_bound, BoundInputs};
use smote_privacy::data::{load_csv, make_fixture, standardize};
use smote_privacy::knn::{build_knn_graph, mutuality_fraction};
use smote_privacy::seed;
use smote_privacy::smote::{augment, smote_oversample, SmoteConfig};
use smote_privacy::LabeledDataset;

use crate::assumptions::{validate_assumptions, AssumptionReport};
use crate::config::{DatasetEntry, DatasetSource, ExperimentConfig, Method};

pub const REPORT_HEADER: [&str; 9] = ["dataset", "r", "method", "metric", "mean", "std", "seeds", "a_id", "l_id"];

/// Seed of one cell; independent of the other datasets and seeds.
pub fn cell_seed(master: u64, dataset: &str, seed: u64) -> u64 {
    seed::derive(master, seed::name_stream(dataset) ^ seed)
}

/// A loaded and standardized dataset with its precomputed context.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub name: String,
    pub real: LabeledDataset,
    pub assumptions: AssumptionReport,
    /// Fraction of mutual edges in the minority neighbor graph.
    pub alpha_hat: f64,
    pub a_id: f64,
    pub l_id: f64,
}

pub fn load_dataset(entry: &DatasetEntry) -> Result<LabeledDataset> {
    let ds = match &entry.source {
        DatasetSource::Fixture(spec) => make_fixture(spec)?,
        DatasetSource::Csv { path, label, minority } => load_csv(path, label, minority)?,
    };
    ds.require_both_classes()?;
    Ok(ds)
}

pub fn prepare(entry: &DatasetEntry, cfg: &ExperimentConfig) -> Result<PreparedDataset> {
    let raw = load_dataset(entry).with_context(|| format!("dataset `{}`", entry.name))?;
    let (real, _) = standardize(&raw)?;
    let assumptions = validate_assumptions(&real, &cfg.geometry, seed::derive(cfg.master_seed, seed::name_stream(&entry.name)));
    let s = real.stats();
    let graph = build_knn_graph(&real.minority_features(), cfg.k)?;
    let alpha_hat = mutuality_fraction(&graph);
    let a_id = approx_recall_bound(&BoundInputs::new(s.n0, s.n1, cfg.k, alpha_hat))?.bound;
    let l_id = exact_recall_bound(&BoundInputs::new(s.n0, s.n1, cfg.k, alpha_hat))?.bound;
    Ok(PreparedDataset {
        name: entry.name.clone(),
        real,
        assumptions,
        alpha_hat,
        a_id,
        l_id,
    })
}

/// Per-seed outcome, also written as a JSON artifact.
#[derive(Debug, Clone, Serialize)]
pub struct CellOutcome {
    pub dataset: String,
    pub seed: u64,
    pub cell_seed: u64,
    /// method -> metric -> value
    pub metrics: BTreeMap<String, BTreeMap<String, f64>>,
    /// Whether the distinguishing attack reported a degenerate input.
    pub degenerate: Option<bool>,
    pub wall_clock_seconds: f64,
    pub error: Option<String>,
}

fn run_cell(data: &PreparedDataset, seed_value: u64, cfg: &ExperimentConfig) -> CellOutcome {
    let start = Instant::now();
    let cs = cell_seed(cfg.master_seed, &data.name, seed_value);
    let mut metrics = BTreeMap::new();
    let mut degenerate = None;
    let result = cell_metrics(data, cs, cfg, &mut metrics, &mut degenerate);
    CellOutcome {
        dataset: data.name.clone(),
        seed: seed_value,
        cell_seed: cs,
        metrics,
        degenerate,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        error: result.err().map(|e| format!("{e:#}")),
    }
}

fn cell_metrics(
    data: &PreparedDataset,
    cs: u64,
    cfg: &ExperimentConfig,
    out: &mut BTreeMap<String, BTreeMap<String, f64>>,
    degenerate: &mut Option<bool>,
) -> Result<()> {
    let real = &data.real;
    let stats = real.stats();
    let (syn, _) = smote_oversample(real, &SmoteConfig::new(cfg.k, seed::derive(cs, 0)))?;
    let aug = augment(real, &syn)?;
    let attack = AttackConfig {
        geometry: cfg.geometry,
        ..AttackConfig::new(cfg.k, stats.r)
    };
    let mut put = |m: Method, pairs: &[(&str, f64)]| {
        let entry = out.entry(m.label().to_string()).or_default();
        for (k, v) in pairs {
            entry.insert((*k).to_string(), *v);
        }
    };
    for &method in &cfg.methods {
        match method {
            Method::Distinguish => {
                let res = distin_smote(&aug, &attack)?;
                *degenerate = Some(!res.degeneracy.is_clean());
                let m = match_ids(&res.detected_real, &real.minority_ids());
                put(method, &[("precision", m.precision), ("recall", m.recall)]);
            }
            Method::Reconstruct => {
                let res = recon_smote(&syn, &attack)?;
                let m = match_points(&res.accepted_points(), &real.minority_features(), cfg.match_tol)?;
                put(method, &[("precision", m.precision), ("recall", m.recall)]);
            }
            Method::Dcr => put(method, &[("dcr", dcr(&syn, real)?)]),
            Method::Linkability => {
                let acc = linkability_mean(&syn, real, cfg.linkability_splits, seed::derive(cs, 2))?;
                put(method, &[("accuracy", acc)]);
            }
            Method::Naive => {
                let s = naive_distinguish(&aug, &LearnerConfig::tree_ensemble(seed::derive(cs, 3)), seed::derive(cs, 3))?;
                put(method, &[("precision", s.precision), ("recall", s.recall)]);
            }
            Method::Mia => {
                let mia = MiaConfig {
                    worlds_train: cfg.mia_worlds_train,
                    worlds_test: cfg.mia_worlds_test,
                    smote_k: cfg.k,
                    ..MiaConfig::new(cfg.mia_mode, seed::derive(cs, 4))
                };
                put(method, &[("auc", mia_game(real, &mia)?.auc)]);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub dataset: String,
    pub r: f64,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation (0 for a single seed).
    pub std: f64,
    pub seeds: usize,
    pub a_id: Option<f64>,
    pub l_id: Option<f64>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregates successful cells per (dataset, method, metric). Rows follow the
/// dataset order of the config, then method and metric names; values are
/// combined in seed order.
pub fn aggregate(datasets: &[PreparedDataset], cells: &[CellOutcome], overlay: bool) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for data in datasets {
        let mut mine: Vec<&CellOutcome> = cells
            .iter()
            .filter(|c| c.dataset == data.name && c.error.is_none())
            .collect();
        mine.sort_by_key(|c| c.seed);
        let mut values: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
        for c in &mine {
            for (method, ms) in &c.metrics {
                for (metric, v) in ms {
                    values.entry((method, metric)).or_default().push(*v);
                }
            }
        }
        for ((method, metric), vs) in values {
            let (mean, std) = mean_std(&vs);
            let bounds = overlay && method == Method::Reconstruct.label();
            rows.push(ReportRow {
                dataset: data.name.clone(),
                r: data.real.stats().r,
                method: method.to_string(),
                metric: metric.to_string(),
                mean,
                std,
                seeds: vs.len(),
                a_id: bounds.then_some(data.a_id),
                l_id: bounds.then_some(data.l_id),
            });
        }
    }
    rows
}

pub fn write_report(rows: &[ReportRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{}", REPORT_HEADER.join(","))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.dataset,
            r.r,
            r.method,
            r.metric,
            r.mean,
            r.std,
            r.seeds,
            opt(r.a_id),
            opt(r.l_id)
        )?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub datasets: Vec<PreparedDataset>,
    pub cells: Vec<CellOutcome>,
    pub rows: Vec<ReportRow>,
    /// Datasets that could not be loaded, with the error.
    pub dataset_errors: Vec<(String, String)>,
}

impl ExperimentOutput {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    /// 0 on success, 2 if any dataset or cell failed.
    pub fn exit_code(&self) -> i32 {
        if self.failed_cells() > 0 || !self.dataset_errors.is_empty() {
            2
        } else {
            0
        }
    }
}

/// Runs every cell on a bounded pool and aggregates the results.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().context("building worker pool")?;
    pool.install(|| {
        let prepared: Vec<std::result::Result<PreparedDataset, String>> = cfg
            .datasets
            .par_iter()
            .map(|e| prepare(e, cfg).map_err(|err| format!("{err:#}")))
            .collect();
        let mut datasets = Vec::new();
        let mut dataset_errors = Vec::new();
        for (entry, p) in cfg.datasets.iter().zip(prepared) {
            match p {
                Ok(d) => datasets.push(d),
                Err(e) => dataset_errors.push((entry.name.clone(), e)),
            }
        }
        let jobs: Vec<(usize, u64)> = (0..datasets.len())
            .flat_map(|d| cfg.seeds.iter().map(move |&s| (d, s)))
            .collect();
        let cells: Vec<CellOutcome> = jobs
            .par_iter()
            .map(|&(d, s)| run_cell(&datasets[d], s, cfg))
            .collect();
        let rows = aggregate(&datasets, &cells, cfg.bounds_overlay);
        Ok(ExperimentOutput {
            datasets,
            cells,
            rows,
            dataset_errors,
        })
    })
}

#[derive(Serialize)]
struct DatasetMeta<'a> {
    name: &'a str,
    n: usize,
    d: usize,
    n0: usize,
    n1: usize,
    r: f64,
    alpha_hat: f64,
    a_id: f64,
    l_id: f64,
    assumptions: &'a AssumptionReport,
}

#[derive(Serialize)]
struct Metadata<'a> {
    config: &'a ExperimentConfig,
    datasets: Vec<DatasetMeta<'a>>,
    dataset_errors: &'a [(String, String)],
    failed_cells: usize,
}

/// Writes `report.csv`, `runs/<dataset>_seed<seed>.json`, `timings.csv` and
/// `metadata.json` under `dir`. Timings stay out of the report so that the
/// report is reproducible byte for byte.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, result: &ExperimentOutput) -> Result<()> {
    let runs = dir.join("runs");
    fs::create_dir_all(&runs).with_context(|| format!("creating {}", runs.display()))?;
    let mut report = Vec::new();
    write_report(&result.rows, &mut report)?;
    fs::write(dir.join("report.csv"), report)?;
    let mut timings = String::from("dataset,seed,seconds\n");
    for c in &result.cells {
        let path = runs.join(format!("{}_seed{}.json", c.dataset, c.seed));
        fs::write(&path, serde_json::to_string_pretty(c)?)?;
        timings.push_str(&format!("{},{},{}\n", c.dataset, c.seed, c.wall_clock_seconds));
    }
    fs::write(dir.join("timings.csv"), timings)?;
    let meta = Metadata {
        config: cfg,
        datasets: result
            .datasets
            .iter()
            .map(|d| {
                let s = d.real.stats();
                DatasetMeta {
                    name: &d.name,
                    n: s.n,
                    d: s.d,
                    n0: s.n0,
                    n1: s.n1,
                    r: s.r,
                    alpha_hat: d.alpha_hat,
                    a_id: d.a_id,
                    l_id: d.l_id,
                    assumptions: &d.assumptions,
                }
            })
            .collect(),
        dataset_errors: &result.dataset_errors,
        failed_cells: result.failed_cells(),
    };
    fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}
