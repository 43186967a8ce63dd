//! Experiment configuration: a flat `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! seeds = 0..25
//! master_seed = 7
//! k = 5
//! methods = distinguish, reconstruct
//! bounds_overlay = true
//! dataset = small:fixture:n0=1200,n1=100,d=2,seed=3
//! dataset = credit:csv:path=credit.csv,label=class,minority=1
//! ```
//!
//! `dataset` may repeat; every other key may appear once. Relative CSV paths
//! resolve against the directory of the config file.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use smote_privacy::baselines::MiaMode;
use smote_privacy::data::{ClusterLayout, FixtureSpec};
use smote_privacy::geometry::GeometryConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Fixture(FixtureSpec),
    Csv {
        path: PathBuf,
        label: String,
        minority: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetEntry {
    pub name: String,
    pub source: DatasetSource,
}

fn parse_bool(v: &str) -> Result<bool, ConfigError> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(invalid(format!("expected a boolean, got `{other}`"))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim()
        .parse()
        .map_err(|_| invalid(format!("`{key}`: cannot parse `{}`", v.trim())))
}

fn pairs(body: &str) -> Result<Vec<(&str, &str)>, ConfigError> {
    body.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| invalid(format!("expected key=value, got `{}`", p.trim())))
        })
        .collect()
}

/// Parses `n0=..,n1=..,d=..[,r=..][,layout=..][,outlier=..][,seed=..]`.
/// `r` may replace `n0` (`n0 = round(r * n1)`).
pub fn parse_fixture(body: &str) -> Result<FixtureSpec, ConfigError> {
    let (mut n0, mut n1, mut d, mut r) = (None, None, None, None);
    let mut spec = FixtureSpec::new(0, 0, 0, 0);
    for (k, v) in pairs(body)? {
        match k {
            "n0" => n0 = Some(parse_num::<usize>(k, v)?),
            "n1" => n1 = Some(parse_num::<usize>(k, v)?),
            "d" => d = Some(parse_num::<usize>(k, v)?),
            "r" => r = Some(parse_num::<f64>(k, v)?),
            "seed" => spec.seed = parse_num(k, v)?,
            "outlier" => spec.planted_outlier = parse_bool(v)?,
            "layout" => {
                spec.layout = match v {
                    "single" | "single-gaussian" => ClusterLayout::SingleGaussian,
                    "two" | "two-gaussian" => ClusterLayout::TwoGaussian,
                    _ => return Err(invalid(format!("unknown layout `{v}`"))),
                }
            }
            _ => return Err(invalid(format!("unknown fixture key `{k}`"))),
        }
    }
    spec.n1 = n1.ok_or_else(|| invalid("fixture needs n1"))?;
    spec.d = d.ok_or_else(|| invalid("fixture needs d"))?;
    spec.n0 = match (n0, r) {
        (Some(n0), None) => n0,
        (None, Some(r)) => (r * spec.n1 as f64).round() as usize,
        _ => return Err(invalid("fixture needs exactly one of n0 and r")),
    };
    spec.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(spec)
}

/// Parses `name:fixture:<fixture keys>` or `name:csv:path=..,label=..,minority=..`.
pub fn parse_dataset(s: &str, base: &Path) -> Result<DatasetEntry, ConfigError> {
    let mut parts = s.trim().splitn(3, ':');
    let name = parts.next().unwrap_or("").trim();
    let kind = parts.next().map(str::trim);
    let body = parts.next().unwrap_or("");
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(invalid(format!("dataset name `{name}` must be nonempty [A-Za-z0-9_-]")));
    }
    let source = match kind {
        Some("fixture") => DatasetSource::Fixture(parse_fixture(body)?),
        Some("csv") => {
            let (mut path, mut label, mut minority) = (None, "label".to_string(), "1".to_string());
            for (k, v) in pairs(body)? {
                match k {
                    "path" => path = Some(base.join(v)),
                    "label" => label = v.to_string(),
                    "minority" => minority = v.to_string(),
                    _ => return Err(invalid(format!("unknown csv key `{k}`"))),
                }
            }
            DatasetSource::Csv {
                path: path.ok_or_else(|| invalid("csv dataset needs path"))?,
                label,
                minority,
            }
        }
        _ => return Err(invalid(format!("dataset `{name}`: kind must be `fixture` or `csv`"))),
    };
    Ok(DatasetEntry {
        name: name.to_string(),
        source,
    })
}

/// `a..b`, `a..=b` or a comma list.
pub fn parse_seeds(v: &str) -> Result<Vec<u64>, ConfigError> {
    let v = v.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = v.split_once("..=") {
        (parse_num::<u64>("seeds", a)?..=parse_num::<u64>("seeds", b)?).collect()
    } else if let Some((a, b)) = v.split_once("..") {
        (parse_num::<u64>("seeds", a)?..parse_num::<u64>("seeds", b)?).collect()
    } else {
        v.split(',').map(|s| parse_num("seeds", s)).collect::<Result<_, _>>()?
    };
    Ok(seeds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Distinguish,
    Reconstruct,
    Dcr,
    Linkability,
    Naive,
    Mia,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Distinguish,
        Method::Reconstruct,
        Method::Dcr,
        Method::Linkability,
        Method::Naive,
        Method::Mia,
    ];

    /// Name used in the report.
    pub fn label(self) -> &'static str {
        match self {
            Method::Distinguish => "distin_smote",
            Method::Reconstruct => "recon_smote",
            Method::Dcr => "dcr",
            Method::Linkability => "linkability",
            Method::Naive => "naive_distinguish",
            Method::Mia => "mia",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Ok(match s.trim() {
            "distinguish" | "distin_smote" => Method::Distinguish,
            "reconstruct" | "recon_smote" => Method::Reconstruct,
            "dcr" => Method::Dcr,
            "linkability" => Method::Linkability,
            "naive" | "naive_distinguish" => Method::Naive,
            "mia" => Method::Mia,
            other => return Err(invalid(format!("unknown method `{other}`"))),
        })
    }
}

pub fn parse_mia_mode(s: &str) -> Result<MiaMode, ConfigError> {
    Ok(match s.trim() {
        "synthetic-features" => MiaMode::SyntheticFeatures,
        "augmented-classifier" => MiaMode::AugmentedClassifier,
        "real-classifier" => MiaMode::RealClassifier,
        other => return Err(invalid(format!("unknown mia mode `{other}`"))),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetEntry>,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub k: usize,
    pub methods: BTreeSet<Method>,
    /// Join reconstruct rows with the approximate and exact recall bounds.
    pub bounds_overlay: bool,
    /// Distance at which a reconstructed point matches a real one
    /// (standardized units).
    pub match_tol: f64,
    pub geometry: GeometryConfig,
    pub linkability_splits: usize,
    pub mia_mode: MiaMode,
    pub mia_worlds_train: usize,
    pub mia_worlds_test: usize,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            seeds: Vec::new(),
            master_seed: 0,
            k: 5,
            methods: [Method::Distinguish, Method::Reconstruct].into(),
            bounds_overlay: true,
            match_tol: 1e-6,
            geometry: GeometryConfig::default(),
            linkability_splits: 5,
            mia_mode: MiaMode::SyntheticFeatures,
            mia_worlds_train: 100,
            mia_worlds_test: 50,
            threads: None,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        let mut have_seeds = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key != "dataset" && !seen.insert(key.to_string()) {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            cfg.set(key, value, base).map_err(|e| ConfigError::Syntax {
                line,
                msg: e.to_string(),
            })?;
            have_seeds |= key == "seeds";
        }
        if !have_seeds {
            return Err(ConfigError::Missing("seeds"));
        }
        if cfg.datasets.is_empty() {
            return Err(ConfigError::Missing("dataset"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<(), ConfigError> {
        match key {
            "dataset" => self.datasets.push(parse_dataset(v, base)?),
            "seeds" => self.seeds = parse_seeds(v)?,
            "master_seed" => self.master_seed = parse_num(key, v)?,
            "k" => self.k = parse_num(key, v)?,
            "methods" => {
                self.methods = v
                    .split(',')
                    .filter(|m| !m.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_, _>>()?
            }
            "bounds_overlay" => self.bounds_overlay = parse_bool(v)?,
            "match_tol" => self.match_tol = parse_num(key, v)?,
            "eps_col" => self.geometry.eps_col = parse_num(key, v)?,
            "eps_int" => self.geometry.eps_int = parse_num(key, v)?,
            "eps_merge" => self.geometry.eps_merge = parse_num(key, v)?,
            "eps_par" => self.geometry.eps_par = parse_num(key, v)?,
            "linkability_splits" => self.linkability_splits = parse_num(key, v)?,
            "mia_mode" => self.mia_mode = parse_mia_mode(v)?,
            "mia_worlds_train" => self.mia_worlds_train = parse_num(key, v)?,
            "mia_worlds_test" => self.mia_worlds_test = parse_num(key, v)?,
            "threads" => self.threads = Some(parse_num(key, v)?),
            "out" => self.out = base.join(v),
            _ => return Err(invalid(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        let unique: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if unique.len() != self.seeds.len() {
            return Err(invalid("seeds must be distinct"));
        }
        if self.k < 3 {
            return Err(invalid(format!("k must be >= 3, got {}", self.k)));
        }
        if self.methods.is_empty() {
            return Err(invalid("no methods enabled"));
        }
        if !(self.match_tol.is_finite() && self.match_tol > 0.0) {
            return Err(invalid("match_tol must be > 0"));
        }
        if self.linkability_splits == 0 {
            return Err(invalid("linkability_splits must be >= 1"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads must be >= 1"));
        }
        self.geometry.validate().map_err(|e| invalid(e.to_string()))?;
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(d.name.as_str()) {
                return Err(invalid(format!("duplicate dataset name `{}`", d.name)));
            }
            if let DatasetSource::Csv { path, .. } = &d.source {
                if !path.is_file() {
                    return Err(invalid(format!("dataset `{}`: {} not found", d.name, path.display())));
                }
            }
        }
        Ok(())
    }

    /// Applies command-line overrides.
    pub fn override_with(&mut self, seed: Option<u64>, out: Option<PathBuf>, threads: Option<usize>) {
        if let Some(s) = seed {
            self.master_seed = s;
        }
        if let Some(o) = out {
            self.out = o;
        }
        if threads.is_some() {
            self.threads = threads;
        }
    }
}
