//! SMOTE oversampling with per-row provenance.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, Origin};
use crate::error::{Error, Result};
use crate::knn::{build_knn_graph, KnnGraph};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k: usize,
    /// Number of rows to generate; `None` balances the classes (`n0 - n1`).
    pub target_synth_count: Option<usize>,
    pub seed: u64,
}

impl SmoteConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            target_synth_count: None,
            seed,
        }
    }
}

/// Source of one synthetic row: `x_i + u * (x_j - x_i)`, with `i`, `j`
/// indexing the minority rows of the input in order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRow {
    pub i: usize,
    pub j: usize,
    pub u: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthProvenance {
    pub rows: Vec<ProvenanceRow>,
}

impl SynthProvenance {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sidecar CSV with columns `row,i,j,u`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["row", "i", "j", "u"]).map_err(csv_err)?;
        for (r, p) in self.rows.iter().enumerate() {
            w.write_record([r.to_string(), p.i.to_string(), p.j.to_string(), p.u.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Open-interval uniform draw; 0 is rejected and `random` never yields 1.
fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub fn interpolate(a: &[f64], b: &[f64], u: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + u * (y - x)).collect()
}

/// Generates synthetic minority rows. Returns the synthetic dataset (all
/// minority, origin = synthetic) and its provenance.
pub fn smote_oversample(ds: &LabeledDataset, cfg: &SmoteConfig) -> Result<(LabeledDataset, SynthProvenance)> {
    let minority = ds.minority_features();
    let stats = ds.stats();
    if stats.n1 == 0 {
        return Err(Error::EmptyMinority);
    }
    if stats.n1 <= cfg.k {
        return Err(Error::TooFewMinority { n: stats.n1, k: cfg.k });
    }
    let graph = build_knn_graph(&minority, cfg.k)?;
    let target = cfg
        .target_synth_count
        .unwrap_or(stats.n0.saturating_sub(stats.n1));
    let (features, prov) = generate(&minority, &graph, target, cfg.seed);
    let synth = LabeledDataset::new(features, vec![1; target])?
        .with_feature_names(ds.feature_names().to_vec())?
        .with_origin(vec![Origin::Synthetic; target])?;
    Ok((synth, prov))
}

fn generate(minority: &Matrix, graph: &KnnGraph, target: usize, seed: u64) -> (Matrix, SynthProvenance) {
    let mut rng = seed::rng(seed);
    let n1 = minority.nrows();
    let k = graph.k();
    let mut out = Matrix::empty(minority.ncols());
    let mut rows = Vec::with_capacity(target);
    while rows.len() < target {
        let i = rng.random_range(0..n1);
        let j = graph.neighbors(i)[rng.random_range(0..k)];
        let u = open_unit(&mut rng);
        out.push_row(&interpolate(minority.row(i), minority.row(j), u))
            .expect("same width");
        rows.push(ProvenanceRow { i, j, u });
    }
    (out, SynthProvenance { rows })
}

/// `D_real` followed by the synthetic rows, with origin flags. Rows of the
/// real dataset without flags are marked real.
pub fn augment(ds: &LabeledDataset, synth: &LabeledDataset) -> Result<LabeledDataset> {
    if !synth.is_empty() && synth.dim() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            got: synth.dim(),
        });
    }
    let features = ds.features().vstack(synth.features())?;
    let mut labels = ds.labels().to_vec();
    labels.extend_from_slice(synth.labels());
    let mut origin = ds
        .origin()
        .map(<[Origin]>::to_vec)
        .unwrap_or_else(|| vec![Origin::Real; ds.len()]);
    match synth.origin() {
        Some(o) => origin.extend_from_slice(o),
        None => origin.extend(std::iter::repeat_n(Origin::Synthetic, synth.len())),
    }
    LabeledDataset::new(features, labels)?
        .with_feature_names(ds.feature_names().to_vec())?
        .with_origin(origin)
}

/// Number of synthetic rows per unordered minority pair.
pub fn segment_usage_counts(prov: &SynthProvenance) -> BTreeMap<(usize, usize), usize> {
    let mut counts = BTreeMap::new();
    for p in &prov.rows {
        let key = (p.i.min(p.j), p.i.max(p.j));
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_fixture, FixtureSpec};

    fn fixture() -> LabeledDataset {
        make_fixture(&FixtureSpec::new(90, 10, 2, 7)).unwrap()
    }

    #[test]
    fn balances_by_default() {
        let (syn, prov) = smote_oversample(&fixture(), &SmoteConfig::new(5, 1)).unwrap();
        assert_eq!(syn.len(), 80);
        assert_eq!(prov.len(), 80);
        assert!(syn.labels().iter().all(|&l| l == 1));
        assert!(syn.origin().unwrap().iter().all(|&o| o == Origin::Synthetic));
    }

    #[test]
    fn interpolation_formula() {
        assert_eq!(interpolate(&[0.0, 0.0], &[1.0, 0.0], 0.5), vec![0.5, 0.0]);
    }

    #[test]
    fn seeded_determinism() {
        let ds = fixture();
        let a = smote_oversample(&ds, &SmoteConfig::new(5, 3)).unwrap();
        let b = smote_oversample(&ds, &SmoteConfig::new(5, 3)).unwrap();
        assert_eq!(a, b);
        let c = smote_oversample(&ds, &SmoteConfig::new(5, 4)).unwrap();
        let us = |p: &SynthProvenance| p.rows.iter().map(|r| r.u).collect::<Vec<_>>();
        assert_ne!(us(&a.1), us(&c.1));
    }

    #[test]
    fn too_few_minority() {
        let ds = fixture();
        assert!(matches!(
            smote_oversample(&ds, &SmoteConfig::new(10, 1)),
            Err(Error::TooFewMinority { n: 10, k: 10 })
        ));
    }

    #[test]
    fn augment_concatenates_with_flags() {
        let ds = make_fixture(&FixtureSpec::new(90, 10, 3, 2)).unwrap();
        let (syn, _) = smote_oversample(&ds, &SmoteConfig::new(3, 9)).unwrap();
        let aug = augment(&ds, &syn).unwrap();
        assert_eq!(aug.len(), 180);
        let o = aug.origin().unwrap();
        assert!(o[..100].iter().all(|&x| x == Origin::Real));
        assert!(o[100..].iter().all(|&x| x == Origin::Synthetic));
        for i in 0..100 {
            assert_eq!(aug.features().row(i), ds.features().row(i));
        }
        let empty = syn.subset(&[]);
        assert_eq!(augment(&ds, &empty).unwrap(), ds);
    }

    #[test]
    fn augment_dimension_mismatch() {
        let a = fixture();
        let b = make_fixture(&FixtureSpec::new(90, 10, 3, 2)).unwrap();
        assert!(augment(&a, &b).is_err());
    }

    #[test]
    fn usage_counts_group_unordered_pairs() {
        assert!(segment_usage_counts(&SynthProvenance::default()).is_empty());
        let prov = SynthProvenance {
            rows: vec![
                ProvenanceRow { i: 0, j: 1, u: 0.2 },
                ProvenanceRow { i: 1, j: 0, u: 0.4 },
                ProvenanceRow { i: 0, j: 2, u: 0.6 },
            ],
        };
        let c = segment_usage_counts(&prov);
        assert_eq!(c.len(), 2);
        assert_eq!(c[&(0, 1)], 2);
        assert_eq!(c[&(0, 2)], 1);
    }
}
