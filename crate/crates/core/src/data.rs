//! Labeled datasets, CSV ingestion, standardization and synthetic fixtures.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, GeometryConfig};
use crate::matrix::Matrix;
use crate::seed;

/// Whether a row came from the real data or was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Real,
    Synthetic,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Real => "real",
            Origin::Synthetic => "synthetic",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "real" => Some(Origin::Real),
            "synthetic" => Some(Origin::Synthetic),
            _ => None,
        }
    }
}

/// Name of the optional provenance column in CSV files.
pub const ORIGIN_COLUMN: &str = "origin";

/// Feature matrix with binary labels (1 = minority) and optional origin flags.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<u8>,
    origin: Option<Vec<Origin>>,
    feature_names: Vec<String>,
    label_name: String,
    warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n: usize,
    pub d: usize,
    pub n0: usize,
    pub n1: usize,
    /// Imbalance ratio `n0 / n1` (infinite when `n1 == 0`).
    pub r: f64,
}

impl LabeledDataset {
    /// Builds a dataset; features must be finite and labels binary.
    ///
    /// Class counts are not checked here: a synthetic-only release legitimately
    /// has no majority rows. Use [`LabeledDataset::require_both_classes`] where
    /// both are needed.
    pub fn new(features: Matrix, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if let Some(pos) = labels.iter().position(|&l| l > 1) {
            return Err(Error::InvalidParameter(format!(
                "label at row {pos} is {}, expected 0 or 1",
                labels[pos]
            )));
        }
        for i in 0..features.nrows() {
            if let Some(j) = features.row(i).iter().position(|x| !x.is_finite()) {
                return Err(Error::BadCell {
                    row: i,
                    column: format!("x{j}"),
                    value: features.get(i, j).to_string(),
                });
            }
        }
        let feature_names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        Ok(Self {
            features,
            labels,
            origin: None,
            feature_names,
            label_name: "label".into(),
            warnings: Vec::new(),
        })
    }

    pub fn with_origin(mut self, origin: Vec<Origin>) -> Result<Self> {
        if origin.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: origin.len(),
            });
        }
        self.origin = Some(origin);
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn origin(&self) -> Option<&[Origin]> {
        self.origin.as_deref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn stats(&self) -> DatasetStats {
        let n1 = self.labels.iter().filter(|&&l| l == 1).count();
        let n0 = self.len() - n1;
        DatasetStats {
            n: self.len(),
            d: self.dim(),
            n0,
            n1,
            r: if n1 == 0 { f64::INFINITY } else { n0 as f64 / n1 as f64 },
        }
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let s = self.stats();
        if s.n1 == 0 {
            return Err(Error::EmptyMinority);
        }
        if s.n0 == 0 {
            return Err(Error::EmptyMajority);
        }
        Ok(())
    }

    pub fn minority_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == 1).collect()
    }

    pub fn minority_features(&self) -> Matrix {
        self.features.select_rows(&self.minority_ids())
    }

    /// Rows with the given ids, keeping labels, origin and names.
    pub fn subset(&self, ids: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(ids),
            labels: ids.iter().map(|&i| self.labels[i]).collect(),
            origin: self.origin.as_ref().map(|o| ids.iter().map(|&i| o[i]).collect()),
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
            warnings: Vec::new(),
        }
    }

    /// Same data without origin flags; this is what attacks are given.
    pub fn without_origin(&self) -> Self {
        Self {
            origin: None,
            ..self.clone()
        }
    }

    pub(crate) fn replace_features(&self, features: Matrix) -> Self {
        Self {
            features,
            ..self.clone()
        }
    }

    /// Ids of rows that duplicate an earlier row (exact bit equality), paired
    /// with the id of the first occurrence.
    pub fn duplicate_rows(&self, ids: &[usize]) -> Vec<(usize, usize)> {
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut dups = Vec::new();
        for &i in ids {
            let key: Vec<u64> = self.features.row(i).iter().map(|x| x.to_bits()).collect();
            match seen.get(&key) {
                Some(&first) => dups.push((i, first)),
                None => {
                    seen.insert(key, i);
                }
            }
        }
        dups
    }
}

/// Reads a CSV with a header row. The label column is matched by name; a
/// column named `origin` (if present and not the label) is read as
/// provenance flags.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, minority_label: &str) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
    let origin_idx = header
        .iter()
        .position(|h| h == ORIGIN_COLUMN)
        .filter(|&i| i != label_idx);
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&j| j != label_idx && Some(j) != origin_idx)
        .collect();

    let mut features = Matrix::empty(feature_cols.len());
    let mut labels = Vec::new();
    let mut origin = Vec::new();
    let mut row = Vec::with_capacity(feature_cols.len());
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        row.clear();
        for &j in &feature_cols {
            let cell = record.get(j).unwrap_or("");
            let value = cell
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::BadCell {
                    row: r,
                    column: header[j].clone(),
                    value: cell.to_string(),
                })?;
            row.push(value);
        }
        features.push_row(&row)?;
        let label = record.get(label_idx).unwrap_or("").trim();
        labels.push(u8::from(label == minority_label));
        if let Some(oi) = origin_idx {
            let tok = record.get(oi).unwrap_or("");
            origin.push(Origin::parse(tok).ok_or_else(|| Error::BadOrigin {
                row: r,
                value: tok.to_string(),
            })?);
        }
    }
    if !labels.contains(&1) {
        return Err(Error::EmptyMinority);
    }

    let mut ds = LabeledDataset::new(features, labels)?
        .with_feature_names(feature_cols.iter().map(|&j| header[j].clone()).collect())?;
    ds.label_name = label_column.to_string();
    if origin_idx.is_some() {
        ds = ds.with_origin(origin)?;
    }
    let all: Vec<usize> = (0..ds.len()).collect();
    let dups = ds.duplicate_rows(&all);
    if !dups.is_empty() {
        ds.warnings.push(format!(
            "{} duplicate row(s); first: row {} repeats row {}",
            dups.len(),
            dups[0].0,
            dups[0].1
        ));
    }
    Ok(ds)
}

/// Writes the dataset as CSV: feature columns, the label column (1/0) and,
/// when present, the `origin` column. Reals use the shortest representation
/// that parses back to the same `f64`.
pub fn save_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = ds.feature_names.clone();
    header.push(ds.label_name.clone());
    if ds.origin.is_some() {
        header.push(ORIGIN_COLUMN.into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.features.row(i).iter().map(|x| x.to_string()).collect();
        rec.push(ds.labels[i].to_string());
        if let Some(o) = &ds.origin {
            rec.push(o[i].as_str().into());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-column affine map `x -> (x - shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ScalingParams {
    pub fn identity(d: usize) -> Self {
        Self {
            shift: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn invert_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        map_rows(m, |r| self.apply_row(r))
    }

    pub fn invert(&self, m: &Matrix) -> Matrix {
        map_rows(m, |r| self.invert_row(r))
    }
}

fn map_rows(m: &Matrix, f: impl Fn(&[f64]) -> Vec<f64>) -> Matrix {
    let mut out = Matrix::empty(m.ncols());
    for r in m.rows_iter() {
        out.push_row(&f(r)).expect("row width preserved");
    }
    out
}

/// Fits per-column mean and population standard deviation.
pub fn fit_scaling(m: &Matrix) -> ScalingParams {
    let n = m.nrows() as f64;
    let d = m.ncols();
    let mut shift = vec![0.0; d];
    let mut scale = vec![1.0; d];
    for j in 0..d {
        let col = m.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        shift[j] = mean;
        // Constant columns: shift only.
        if var > 0.0 && var.sqrt() > f64::EPSILON * mean.abs() {
            scale[j] = var.sqrt();
        }
    }
    ScalingParams { shift, scale }
}

/// Standardizes every column to mean 0 and unit population variance.
pub fn standardize(ds: &LabeledDataset) -> Result<(LabeledDataset, ScalingParams)> {
    if ds.len() < 2 {
        return Err(Error::InvalidParameter(
            "standardize needs at least 2 rows".into(),
        ));
    }
    let params = fit_scaling(&ds.features);
    Ok((ds.replace_features(params.apply(&ds.features)), params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterLayout {
    SingleGaussian,
    TwoGaussian,
}

/// Parameters of a synthetic imbalanced dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub n0: usize,
    pub n1: usize,
    pub d: usize,
    pub layout: ClusterLayout,
    pub planted_outlier: bool,
    pub seed: u64,
}

impl FixtureSpec {
    pub fn new(n0: usize, n1: usize, d: usize, seed: u64) -> Self {
        Self {
            n0,
            n1,
            d,
            layout: ClusterLayout::SingleGaussian,
            planted_outlier: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n0 > self.n1 && self.n1 >= 4) {
            return Err(Error::InvalidParameter(format!(
                "fixture needs n0 > n1 >= 4 (got n0={}, n1={})",
                self.n0, self.n1
            )));
        }
        if self.d < 2 {
            return Err(Error::InvalidParameter("fixture needs d >= 2".into()));
        }
        Ok(())
    }
}

/// Distance of the planted outlier from the minority cluster mean, in units
/// of the (unit) cluster standard deviation.
pub const OUTLIER_OFFSET: f64 = 10.0;
const FIXTURE_RETRIES: usize = 100;
/// Above this minority size the collinearity check samples triples.
pub const EXHAUSTIVE_TRIPLE_LIMIT: usize = 500;
/// Triples drawn when the exhaustive scan is too expensive.
pub const SAMPLED_TRIPLES: usize = 100_000;

fn gaussian_row(rng: &mut impl Rng, mean: &[f64]) -> Vec<f64> {
    mean.iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(rng);
            m + z
        })
        .collect()
}

/// Generates an imbalanced dataset: majority rows first, then minority rows.
///
/// Majority ~ N(0, I). Minority ~ N(2 e0, I) for the single layout, or an
/// even mixture of N(-3 e0, I) and N(3 e0, I) for the two-cluster layout.
/// With `planted_outlier`, the last minority row sits [`OUTLIER_OFFSET`]
/// units from the minority mean along a random direction. The minority set is
/// checked for duplicate rows and collinear triples and regenerated with a
/// derived seed on violation.
pub fn make_fixture(spec: &FixtureSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let cfg = GeometryConfig::default();
    let mut last_reason = String::new();
    for attempt in 0..FIXTURE_RETRIES {
        let mut rng = seed::rng(seed::derive(spec.seed, attempt as u64));
        let ds = draw_fixture(spec, &mut rng)?;
        let minority = ds.minority_features();
        let ids: Vec<usize> = (0..minority.nrows()).collect();
        let dups = ds.subset(&ds.minority_ids()).duplicate_rows(&ids);
        if !dups.is_empty() {
            last_reason = format!("duplicate minority rows {:?}", dups[0]);
            continue;
        }
        let triples = if spec.n1 <= EXHAUSTIVE_TRIPLE_LIMIT {
            geometry::collinear_triples(&minority, &cfg, 1)
        } else {
            geometry::sampled_collinear_triples(&minority, &cfg, SAMPLED_TRIPLES, spec.seed)
        };
        if let Some(t) = triples.first() {
            last_reason = format!("collinear minority triple {t:?}");
            continue;
        }
        return Ok(ds);
    }
    Err(Error::AssumptionViolation {
        retries: FIXTURE_RETRIES,
        reason: last_reason,
    })
}

fn draw_fixture(spec: &FixtureSpec, rng: &mut impl Rng) -> Result<LabeledDataset> {
    let d = spec.d;
    let mut features = Matrix::empty(d);
    let origin_mean = vec![0.0; d];
    for _ in 0..spec.n0 {
        features.push_row(&gaussian_row(rng, &origin_mean))?;
    }
    let axis = |c: f64| {
        let mut m = vec![0.0; d];
        m[0] = c;
        m
    };
    let means = match spec.layout {
        ClusterLayout::SingleGaussian => vec![axis(2.0)],
        ClusterLayout::TwoGaussian => vec![axis(-3.0), axis(3.0)],
    };
    let regular = if spec.planted_outlier { spec.n1 - 1 } else { spec.n1 };
    for i in 0..regular {
        features.push_row(&gaussian_row(rng, &means[i % means.len()]))?;
    }
    if spec.planted_outlier {
        let center: Vec<f64> = (0..d)
            .map(|j| means.iter().map(|m| m[j]).sum::<f64>() / means.len() as f64)
            .collect();
        let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = crate::matrix::norm(&dir);
        dir.iter_mut().for_each(|x| *x /= n);
        let row: Vec<f64> = center.iter().zip(&dir).map(|(c, u)| c + OUTLIER_OFFSET * u).collect();
        features.push_row(&row)?;
    }
    let mut labels = vec![0u8; spec.n0];
    labels.resize(spec.n0 + spec.n1, 1);
    LabeledDataset::new(features, labels)?.with_origin(vec![Origin::Real; spec.n0 + spec.n1])
}
