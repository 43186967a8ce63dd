//! Checks of the conditions under which the attack guarantees hold.

use serde::Serialize;
use smote_privacy::data::{EXHAUSTIVE_TRIPLE_LIMIT, SAMPLED_TRIPLES};
use smote_privacy::geometry::{collinear_triples, sampled_collinear_triples, GeometryConfig};
use smote_privacy::LabeledDataset;

/// Collinear triples listed at most.
const TRIPLE_REPORT_LIMIT: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// Columns whose values are all integers (informational).
    pub integer_only_columns: Vec<String>,
    /// `(duplicate, first occurrence)` row ids among minority rows.
    pub duplicate_minority: Vec<(usize, usize)>,
    /// Collinear minority triples, as dataset row ids.
    pub collinear_triples: Vec<[usize; 3]>,
    /// Whether the triple scan sampled instead of enumerating.
    pub sampled: bool,
    pub passed: bool,
}

pub fn validate_assumptions(ds: &LabeledDataset, geometry: &GeometryConfig, seed: u64) -> AssumptionReport {
    let integer_only_columns = (0..ds.dim())
        .filter(|&j| ds.features().rows_iter().all(|r| r[j].fract() == 0.0))
        .map(|j| ds.feature_names()[j].clone())
        .collect();
    let ids = ds.minority_ids();
    let duplicate_minority = ds.duplicate_rows(&ids);
    let minority = ds.minority_features();
    let sampled = ids.len() > EXHAUSTIVE_TRIPLE_LIMIT;
    let local = if sampled {
        sampled_collinear_triples(&minority, geometry, SAMPLED_TRIPLES, seed)
    } else {
        collinear_triples(&minority, geometry, TRIPLE_REPORT_LIMIT)
    };
    let collinear_triples: Vec<[usize; 3]> = local
        .iter()
        .take(TRIPLE_REPORT_LIMIT)
        .map(|t| [ids[t[0]], ids[t[1]], ids[t[2]]])
        .collect();
    let passed = duplicate_minority.is_empty() && collinear_triples.is_empty();
    AssumptionReport {
        integer_only_columns,
        duplicate_minority,
        collinear_triples,
        sampled,
        passed,
    }
}
