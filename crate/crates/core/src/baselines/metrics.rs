//! Distance, linkage, distinguishing and ranking metrics.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::learner::{train_learner, LearnerConfig};
use crate::data::{LabeledDataset, Origin};
use crate::error::{Error, Result};
use crate::knn::{NeighborIndex, Query};
use crate::matrix::{dist, Matrix};
use crate::seed;

fn check_dims(a: &LabeledDataset, b: &LabeledDataset) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            got: a.dim(),
        });
    }
    Ok(())
}

/// Mean distance from each synthetic row to its closest real row.
pub fn dcr(syn: &LabeledDataset, real: &LabeledDataset) -> Result<f64> {
    check_dims(syn, real)?;
    if real.is_empty() {
        return Err(Error::InvalidParameter("distance to closest record needs real rows".into()));
    }
    if syn.is_empty() {
        return Ok(0.0);
    }
    let index = NeighborIndex::auto(real.features());
    let mut total = 0.0;
    for row in syn.features().rows_iter() {
        let nearest = index.k_nearest(Query::Point(row), 1, false)?[0];
        total += dist(row, real.features().row(nearest));
    }
    Ok(total / syn.len() as f64)
}

/// A partition of the attack columns into two disjoint halves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSplit {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl FeatureSplit {
    /// Random equal-size split of `0..d` (the first half gets the extra column).
    pub fn random(d: usize, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter("linkability needs at least 2 features".into()));
        }
        let mut cols: Vec<usize> = (0..d).collect();
        cols.shuffle(&mut seed::rng(seed));
        let mut a = cols[..d.div_ceil(2)].to_vec();
        let mut b = cols[d.div_ceil(2)..].to_vec();
        a.sort_unstable();
        b.sort_unstable();
        Ok(Self { a, b })
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.a.is_empty() || self.b.is_empty() {
            return Err(Error::InvalidParameter("feature split halves must be nonempty".into()));
        }
        if let Some(&c) = self.a.iter().chain(&self.b).find(|&&c| c >= d) {
            return Err(Error::InvalidParameter(format!("feature {c} out of range for d = {d}")));
        }
        if self.a.iter().any(|c| self.b.contains(c)) {
            return Err(Error::InvalidParameter("feature split halves overlap".into()));
        }
        Ok(())
    }
}

fn is_degenerate(m: &Matrix) -> bool {
    (0..m.ncols()).all(|j| {
        let first = m.get(0, j);
        m.rows_iter().all(|r| r[j] == first)
    })
}

/// Fraction of real rows whose nearest synthetic row is the same in both
/// feature halves.
pub fn linkability(syn: &LabeledDataset, real: &LabeledDataset, split: &FeatureSplit) -> Result<f64> {
    check_dims(syn, real)?;
    split.validate(real.dim())?;
    if syn.is_empty() || real.is_empty() {
        return Err(Error::InvalidParameter("linkability needs synthetic and real rows".into()));
    }
    let (sa, sb) = (syn.features().select_cols(&split.a), syn.features().select_cols(&split.b));
    if is_degenerate(&sa) || is_degenerate(&sb) {
        return Err(Error::InvalidParameter("feature half is constant over the synthetic rows".into()));
    }
    let (ra, rb) = (real.features().select_cols(&split.a), real.features().select_cols(&split.b));
    let (ia, ib) = (NeighborIndex::auto(&sa), NeighborIndex::auto(&sb));
    let mut hits = 0;
    for i in 0..real.len() {
        let na = ia.k_nearest(Query::Point(ra.row(i)), 1, false)?[0];
        let nb = ib.k_nearest(Query::Point(rb.row(i)), 1, false)?[0];
        hits += usize::from(na == nb);
    }
    Ok(hits as f64 / real.len() as f64)
}

/// Mean linkability over `repeats` random equal splits.
pub fn linkability_mean(syn: &LabeledDataset, real: &LabeledDataset, repeats: usize, seed: u64) -> Result<f64> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("need at least one split".into()));
    }
    let mut total = 0.0;
    for t in 0..repeats {
        let split = FeatureSplit::random(real.dim(), seed::derive(seed, t as u64))?;
        total += linkability(syn, real, &split)?;
    }
    Ok(total / repeats as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistinguishScore {
    pub precision: f64,
    pub recall: f64,
}

/// Trains a classifier to tell real minority rows from synthetic ones on a
/// stratified half of the minority class and scores the other half. The
/// positive class is "real"; precision is 0 when nothing is predicted real.
pub fn naive_distinguish(aug: &LabeledDataset, learner: &LearnerConfig, seed: u64) -> Result<DistinguishScore> {
    let origin = aug
        .origin()
        .ok_or_else(|| Error::InvalidParameter("distinguishing needs origin flags".into()))?;
    let ids = aug.minority_ids();
    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for kind in [Origin::Real, Origin::Synthetic] {
        let mut group: Vec<usize> = ids.iter().copied().filter(|&i| origin[i] == kind).collect();
        if group.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 {} minority rows to split, have {}",
                kind.as_str(),
                group.len()
            )));
        }
        group.shuffle(&mut rng);
        let half = group.len() / 2;
        train.extend_from_slice(&group[..half]);
        test.extend_from_slice(&group[half..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    let is_real = |i: usize| u8::from(origin[i] == Origin::Real);
    let x = aug.features().select_rows(&train);
    let y: Vec<u8> = train.iter().map(|&i| is_real(i)).collect();
    let clf = train_learner(&x, &y, &LearnerConfig { seed: seed::derive(seed, 1), ..*learner })?;
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for &i in &test {
        match (clf.predict(aug.features().row(i)), is_real(i)) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fneg += 1,
            _ => {}
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(DistinguishScore {
        precision: frac(tp, tp + fp),
        recall: frac(tp, tp + fneg),
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Column-wise min, mean, median and max, followed by the upper-triangle
/// Pearson correlations (0 for any pair involving a constant column).
pub fn groundhog_features(x: &Matrix) -> Result<Vec<f64>> {
    let (n, d) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(Error::InvalidParameter("summary features need at least 2 rows".into()));
    }
    let cols: Vec<Vec<f64>> = (0..d).map(|j| x.column(j)).collect();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let mut mins = Vec::with_capacity(d);
    let mut medians = Vec::with_capacity(d);
    let mut maxs = Vec::with_capacity(d);
    for c in &cols {
        let mut s = c.clone();
        s.sort_by(f64::total_cmp);
        mins.push(s[0]);
        medians.push(median(&s));
        maxs.push(s[n - 1]);
    }
    let centered: Vec<Vec<f64>> = cols
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    let ss: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let mut out = Vec::with_capacity(4 * d + d * (d.saturating_sub(1)) / 2);
    out.extend(mins);
    out.extend(means);
    out.extend(medians);
    out.extend(maxs);
    for a in 0..d {
        for b in a + 1..d {
            let r = if ss[a] > 0.0 && ss[b] > 0.0 {
                let cross: f64 = centered[a].iter().zip(&centered[b]).map(|(u, v)| u * v).sum();
                (cross / (ss[a].sqrt() * ss[b].sqrt())).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            out.push(r);
        }
    }
    Ok(out)
}

/// Area under the ROC curve via the Mann–Whitney statistic with midranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut s = 0;
    while s < order.len() {
        let mut e = s;
        while e + 1 < order.len() && scores[order[e + 1]] == scores[order[s]] {
            e += 1;
        }
        let midrank = (s + e) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[s..=e].iter().filter(|&&i| labels[i] == 1).count() as f64;
        s = e + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}
