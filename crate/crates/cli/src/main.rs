use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use smote_privacy::attacks::{distin_smote, match_ids, match_points, recon_smote, AttackConfig};
use smote_privacy::baselines::{
    dcr, linkability_mean, mia_game, naive_distinguish, LearnerConfig, MiaConfig, TargetSelection,
};
use smote_privacy::bounds::{
    ratio_sweep, recall_bound, sweep, write_ratio_csv, write_sweep_csv, BoundInputs, BoundKind, SweepGrid,
};
use smote_privacy::data::{load_csv, make_fixture, save_csv, standardize};
use smote_privacy::geometry::GeometryConfig;
use smote_privacy::knn::{build_knn_graph, mutuality_fraction};
use smote_privacy::smote::{augment, smote_oversample, SmoteConfig};
use smote_privacy::LabeledDataset;
use smote_privacy_cli::assumptions::validate_assumptions;
use smote_privacy_cli::config::{parse_fixture, parse_mia_mode, ExperimentConfig};
use smote_privacy_cli::experiment::{run_experiment, write_outputs};

#[derive(Parser)]
#[command(name = "smote-privacy", version, about = "SMOTE oversampling, geometric attacks on its output and recall bounds")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (or directory for `experiment`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, conflicts_with = "fixture")]
    input: Option<PathBuf>,
    /// Label column name.
    #[arg(long, default_value = "label")]
    label: String,
    /// Label value of the minority class.
    #[arg(long, default_value = "1")]
    minority: String,
    /// Synthetic fixture, e.g. `n0=1200,n1=100,d=2,seed=3`.
    #[arg(long)]
    fixture: Option<String>,
}

impl DataArgs {
    fn load(&self) -> Result<LabeledDataset> {
        match (&self.input, &self.fixture) {
            (Some(path), None) => load_csv(path, &self.label, &self.minority)
                .with_context(|| format!("loading {}", path.display())),
            (None, Some(spec)) => Ok(make_fixture(&parse_fixture(spec)?)?),
            _ => bail!("give exactly one of --input and --fixture"),
        }
    }
}

#[derive(Args, Clone)]
struct AttackArgs {
    #[command(flatten)]
    data: DataArgs,
    /// SMOTE neighbor count.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Imbalance ratio n0/n1 of the real data.
    #[arg(long)]
    ratio: f64,
    /// Geometry tolerances, e.g. `eps_col=1e-9,eps_merge=1e-6`.
    #[arg(long)]
    tolerances: Option<String>,
    /// Metrics CSV (one row) destination.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

impl AttackArgs {
    fn config(&self) -> Result<AttackConfig> {
        let mut geo = GeometryConfig::default();
        for pair in self.tolerances.iter().flat_map(|t| t.split(',')).filter(|p| !p.trim().is_empty()) {
            let (k, v) = pair.split_once('=').context("tolerances are key=value pairs")?;
            let v: f64 = v.trim().parse().with_context(|| format!("tolerance `{}`", k.trim()))?;
            match k.trim() {
                "eps_col" => geo.eps_col = v,
                "eps_int" => geo.eps_int = v,
                "eps_merge" => geo.eps_merge = v,
                "eps_par" => geo.eps_par = v,
                other => bail!("unknown tolerance `{other}`"),
            }
        }
        Ok(AttackConfig {
            geometry: geo,
            ..AttackConfig::new(self.k, self.ratio)
        })
    }
}

#[derive(Subcommand)]
enum AttackCommand {
    /// Label the minority rows of an augmented dataset as real or synthetic.
    Distinguish(AttackArgs),
    /// Recover real minority rows from a synthetic release.
    Reconstruct {
        #[command(flatten)]
        attack: AttackArgs,
        /// Real dataset to score the reconstruction against.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Matching distance for scoring.
        #[arg(long, default_value_t = 1e-6)]
        match_tol: f64,
    },
}

#[derive(Subcommand)]
enum BaselineCommand {
    /// Mean distance from synthetic rows to the closest real row.
    Dcr {
        #[arg(long)]
        syn: PathBuf,
        #[arg(long)]
        real: PathBuf,
        #[arg(long, default_value = "label")]
        label: String,
        #[arg(long, default_value = "1")]
        minority: String,
    },
    /// Same-row nearest neighbors across random feature halves.
    Linkability {
        #[arg(long)]
        syn: PathBuf,
        #[arg(long)]
        real: PathBuf,
        #[arg(long, default_value = "label")]
        label: String,
        #[arg(long, default_value = "1")]
        minority: String,
        #[arg(long, default_value_t = 5)]
        splits: usize,
    },
    /// Classifier separating real from synthetic minority rows.
    Distinguish {
        #[command(flatten)]
        data: DataArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Approx,
    Exact,
}

impl From<KindArg> for BoundKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Approx => BoundKind::Approx,
            KindArg::Exact => BoundKind::Exact,
        }
    }
}

fn list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| anyhow::anyhow!("cannot parse `{}`", x.trim())))
        .collect()
}

#[derive(Subcommand)]
enum Command {
    /// Oversample a dataset with SMOTE.
    Generate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Number of synthetic rows (default n0 - n1).
        #[arg(long)]
        count: Option<usize>,
        /// Write real plus synthetic rows with an origin column.
        #[arg(long)]
        augmented: bool,
        /// Standardize the real data before oversampling.
        #[arg(long)]
        standardize: bool,
        /// Provenance sidecar CSV (row, i, j, u).
        #[arg(long)]
        provenance: Option<PathBuf>,
        /// Also write the (possibly standardized) real data here.
        #[arg(long)]
        real_out: Option<PathBuf>,
    },
    /// Run an attack.
    #[command(subcommand)]
    Attack(AttackCommand),
    /// Recall lower bounds, single point or grid.
    Bounds {
        #[arg(long)]
        n0: Option<usize>,
        #[arg(long)]
        n1: Option<usize>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Estimate alpha from the minority neighbor graph of a CSV.
        #[arg(long)]
        alpha_from: Option<PathBuf>,
        #[arg(long, default_value = "label")]
        label: String,
        #[arg(long, default_value = "1")]
        minority: String,
        #[arg(long, value_enum, default_value = "exact")]
        kind: KindArg,
        /// Grid over --ratios x --ks x --alphas x --n1s.
        #[arg(long)]
        sweep: bool,
        /// Grid with exact and approximate bounds side by side.
        #[arg(long)]
        compare: bool,
        #[arg(long, default_value = "2,5,10,20,30,50,75,100")]
        ratios: String,
        #[arg(long, default_value = "3,5,7,10")]
        ks: String,
        #[arg(long, default_value = "0.5")]
        alphas: String,
        #[arg(long, default_value = "100")]
        n1s: String,
    },
    /// Conventional privacy metrics.
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// Membership inference game on one target row.
    Mia {
        #[command(flatten)]
        data: DataArgs,
        /// Test worlds per side.
        #[arg(long, default_value_t = 50)]
        worlds: usize,
        /// Training worlds per side (synthetic-features mode).
        #[arg(long, default_value_t = 100)]
        worlds_train: usize,
        /// synthetic-features, augmented-classifier or real-classifier.
        #[arg(long, default_value = "synthetic-features")]
        mode: String,
        /// `outlier` or a minority row id.
        #[arg(long, default_value = "outlier")]
        target: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Permute membership labels (null control).
        #[arg(long)]
        shuffle: bool,
    },
    /// Run an experiment grid from --config.
    Experiment,
    /// Check duplicate rows and collinear minority triples.
    Validate {
        #[command(flatten)]
        data: DataArgs,
    },
}

fn emit_json(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    emit_text(text.as_bytes(), out)
}

fn emit_text(text: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => match std::io::stdout().write_all(text) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        },
    }
    Ok(())
}

fn write_metrics(path: Option<&Path>, method: &str, precision: f64, recall: f64) -> Result<()> {
    if let Some(p) = path {
        fs::write(p, format!("method,precision,recall\n{method},{precision},{recall}\n"))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Generate {
            data,
            k,
            count,
            augmented,
            standardize: scale,
            provenance,
            real_out,
        } => {
            let out = out.context("generate needs --out")?;
            let mut real = data.load()?;
            if scale {
                real = standardize(&real)?.0;
            }
            let cfg = SmoteConfig {
                target_synth_count: count,
                ..SmoteConfig::new(k, seed)
            };
            let (syn, prov) = smote_oversample(&real, &cfg)?;
            if augmented {
                save_csv(&augment(&real, &syn)?, out)?;
            } else {
                save_csv(&syn, out)?;
            }
            if let Some(p) = provenance {
                prov.save_csv(p)?;
            }
            if let Some(p) = real_out {
                save_csv(&real, p)?;
            }
            eprintln!("wrote {} synthetic rows", syn.len());
        }
        Command::Attack(AttackCommand::Distinguish(args)) => {
            let aug = args.data.load()?;
            let res = distin_smote(&aug, &args.config()?)?;
            let scored = aug.origin().map(|origin| {
                let truth: Vec<usize> = aug
                    .minority_ids()
                    .into_iter()
                    .filter(|&i| origin[i] == smote_privacy::Origin::Real)
                    .collect();
                match_ids(&res.detected_real, &truth)
            });
            if let Some(m) = &scored {
                write_metrics(args.metrics.as_deref(), "distin_smote", m.precision, m.recall)?;
                eprintln!("precision {} recall {}", m.precision, m.recall);
            }
            emit_json(
                &json!({
                    "detected_real": res.detected_real,
                    "pruned_synthetic": res.pruned_synthetic,
                    "degeneracy": res.degeneracy,
                    "precision": scored.as_ref().map(|m| m.precision),
                    "recall": scored.as_ref().map(|m| m.recall),
                }),
                out,
            )?;
        }
        Command::Attack(AttackCommand::Reconstruct { attack, truth, match_tol }) => {
            let syn = attack.data.load()?;
            let res = recon_smote(&syn, &attack.config()?)?;
            let points = res.accepted_points();
            let scored = match truth {
                Some(p) => {
                    let real = load_csv(&p, &attack.data.label, &attack.data.minority)?;
                    Some(match_points(&points, &real.minority_features(), match_tol)?)
                }
                None => None,
            };
            if let Some(m) = &scored {
                write_metrics(attack.metrics.as_deref(), "recon_smote", m.precision, m.recall)?;
                eprintln!("precision {} recall {}", m.precision, m.recall);
            }
            let supports: Vec<Vec<usize>> = res.accepted.iter().map(|c| c.support.iter().copied().collect()).collect();
            emit_json(
                &json!({
                    "points": points,
                    "supports": supports,
                    "lines": res.lines.len(),
                    "candidates": res.candidates.len(),
                    "precision": scored.as_ref().map(|m| m.precision),
                    "recall": scored.as_ref().map(|m| m.recall),
                }),
                out,
            )?;
        }
        Command::Bounds {
            n0,
            n1,
            ratio,
            k,
            alpha,
            alpha_from,
            label,
            minority,
            kind,
            sweep: grid_mode,
            compare,
            ratios,
            ks,
            alphas,
            n1s,
        } => {
            let mut buf = Vec::new();
            if grid_mode || compare {
                let grid = SweepGrid {
                    ratios: list(&ratios)?,
                    ks: list(&ks)?,
                    alphas: list(&alphas)?,
                    n1s: list(&n1s)?,
                };
                if compare {
                    write_ratio_csv(&ratio_sweep(&grid)?, &mut buf)?;
                } else {
                    write_sweep_csv(&sweep(&grid, kind.into())?, &mut buf)?;
                }
            } else {
                let alpha = match alpha_from {
                    Some(p) => {
                        let ds = standardize(&load_csv(&p, &label, &minority)?)?.0;
                        mutuality_fraction(&build_knn_graph(&ds.minority_features(), k)?)
                    }
                    None => alpha,
                };
                let n1 = n1.context("bounds needs --n1")?;
                let inputs = match (n0, ratio) {
                    (Some(n0), None) => BoundInputs::new(n0, n1, k, alpha),
                    (None, Some(r)) => BoundInputs::from_ratio(r, n1, k, alpha),
                    _ => bail!("give exactly one of --n0 and --ratio"),
                };
                write_sweep_csv(&[recall_bound(&inputs, kind.into())?], &mut buf)?;
            }
            emit_text(&buf, out)?;
        }
        Command::Baseline(BaselineCommand::Dcr { syn, real, label, minority }) => {
            let s = load_csv(&syn, &label, &minority)?;
            let r = load_csv(&real, &label, &minority)?;
            emit_json(&json!({ "dcr": dcr(&s, &r)? }), out)?;
        }
        Command::Baseline(BaselineCommand::Linkability { syn, real, label, minority, splits }) => {
            let s = load_csv(&syn, &label, &minority)?;
            let r = load_csv(&real, &label, &minority)?;
            emit_json(&json!({ "linkability": linkability_mean(&s, &r, splits, seed)?, "splits": splits }), out)?;
        }
        Command::Baseline(BaselineCommand::Distinguish { data }) => {
            let aug = data.load()?;
            let score = naive_distinguish(&aug, &LearnerConfig::tree_ensemble(seed), seed)?;
            emit_json(&score, out)?;
        }
        Command::Mia {
            data,
            worlds,
            worlds_train,
            mode,
            target,
            k,
            shuffle,
        } => {
            let real = data.load()?;
            let target = match target.as_str() {
                "outlier" => TargetSelection::PlantedOutlier,
                id => TargetSelection::Id(id.parse().with_context(|| format!("target `{id}`"))?),
            };
            let cfg = MiaConfig {
                target,
                worlds_train,
                worlds_test: worlds,
                smote_k: k,
                shuffle_labels: shuffle,
                ..MiaConfig::new(parse_mia_mode(&mode)?, seed)
            };
            emit_json(&mia_game(&real, &cfg)?, out)?;
        }
        Command::Experiment => {
            let path = cli.config.as_deref().context("experiment needs --config")?;
            let mut cfg = ExperimentConfig::load(path)?;
            cfg.override_with(cli.seed, cli.out.clone(), cli.threads);
            let result = run_experiment(&cfg)?;
            write_outputs(&cfg.out, &cfg, &result)?;
            for (name, err) in &result.dataset_errors {
                eprintln!("dataset {name} failed: {err}");
            }
            for c in result.cells.iter().filter(|c| c.error.is_some()) {
                eprintln!("{} seed {} failed: {}", c.dataset, c.seed, c.error.as_deref().unwrap_or(""));
            }
            eprintln!("report written to {}", cfg.out.join("report.csv").display());
            return Ok(result.exit_code() as u8);
        }
        Command::Validate { data } => {
            let ds = data.load()?;
            emit_json(&validate_assumptions(&ds, &GeometryConfig::default(), seed), out)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
