//! Geometric attacks on SMOTE output.
//!
//! SMOTE places every synthetic point strictly inside a segment between two
//! real minority points. If no three real minority points are collinear, then
//! among any three collinear minority points the middle one is synthetic
//! ([`distin_smote`]), and lines through synthetic points meet at the real
//! points they were interpolated from ([`recon_smote`]).

use std::collections::{BTreeSet, VecDeque};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{self, LabeledDataset};
use crate::error::{Error, Result};
use crate::geometry::{self, is_collinear, middle_of_three, Candidate, GeometryConfig, Line};
use crate::knn::{NeighborIndex, Query};
use crate::matrix::{dist, dot, Matrix};
use crate::seed;

/// Where the distinguishing traversal starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedMode {
    /// Every minority point is queued up front.
    AllPoints,
    /// Only the per-axis minimum and maximum points are queued.
    HullExtrema,
}

/// Adversary knowledge and numeric settings shared by both attacks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// SMOTE neighbor count.
    pub k: usize,
    /// Imbalance ratio of the real data.
    pub r: f64,
    pub seed_mode: SeedMode,
    /// After the traversal, prune the middle of every collinear triple made of
    /// surviving points. Catches synthetic points whose endpoints fall outside
    /// the neighbor budget (common when d is large relative to n).
    pub sweep_survivors: bool,
    pub geometry: GeometryConfig,
}

impl AttackConfig {
    pub fn new(k: usize, r: f64) -> Self {
        Self {
            k,
            r,
            seed_mode: SeedMode::AllPoints,
            sweep_survivors: true,
            geometry: GeometryConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::KTooSmall(self.k));
        }
        if !(self.r.is_finite() && self.r > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "imbalance ratio must be > 1, got {}",
                self.r
            )));
        }
        self.geometry.validate()
    }

    /// `ceil(2 k r)`, capped at `n_minority - 1`.
    pub fn neighbor_budget(&self, n_minority: usize) -> usize {
        let wanted = (2.0 * self.k as f64 * self.r).ceil() as usize;
        wanted.min(n_minority.saturating_sub(1))
    }
}

/// Input conditions under which the attack guarantees do not apply.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    /// `(duplicate, first occurrence)` row ids among minority rows.
    pub duplicate_rows: Vec<(usize, usize)>,
    /// Collinear triples (row ids) among the rows finally labeled real.
    pub collinear_real: Vec<[usize; 3]>,
    /// Whether `collinear_real` comes from a sampled rather than exhaustive scan.
    pub sampled_scan: bool,
}

impl DegeneracyReport {
    pub fn is_clean(&self) -> bool {
        self.duplicate_rows.is_empty() && self.collinear_real.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishResult {
    /// Row ids (into the attacked dataset) labeled real.
    pub detected_real: Vec<usize>,
    /// Row ids pruned as synthetic.
    pub pruned_synthetic: Vec<usize>,
    pub degeneracy: DegeneracyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    /// Merged intersection points with their supporting line ids.
    pub candidates: Vec<Candidate>,
    /// Candidates supported by at least three distinct lines.
    pub accepted: Vec<Candidate>,
    pub lines: Vec<Line>,
}

impl ReconstructionResult {
    pub fn accepted_points(&self) -> Vec<Vec<f64>> {
        self.accepted.iter().map(|c| c.point.clone()).collect()
    }
}

/// Relative tolerance on unit directions used to shortlist collinear pairs
/// before the exact predicate runs. The predicate implies a direction gap of
/// at most `2 * eps_col`, far below this.
const DIRECTION_SHORTLIST: f64 = 1e-6;

/// Finds the neighbor pairs `(a, b)` (positions into `nbrs`, `a < b`) that
/// are collinear with `center`, without scanning all pairs.
///
/// Directions from the center are compared up to sign by sorting their
/// projections on a fixed generic axis. Neighbors that nearly coincide with
/// the center have no stable direction and are paired with everyone.
struct PairFinder {
    axis: Vec<f64>,
}

impl PairFinder {
    fn new(d: usize) -> Self {
        let mut rng = seed::rng(0x51DE_11AE);
        let mut axis: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = crate::matrix::norm(&axis);
        axis.iter_mut().for_each(|x| *x /= n);
        Self { axis }
    }

    fn pairs(&self, center: usize, nbrs: &[usize], pts: &Matrix, cfg: &GeometryConfig) -> Vec<(usize, usize)> {
        let c = pts.row(center);
        let dists: Vec<f64> = nbrs.iter().map(|&j| dist(c, pts.row(j))).collect();
        let reach = dists.iter().copied().fold(0.0, f64::max);
        let near_cut = 4.0 * cfg.eps_col * reach;

        let mut near = Vec::new();
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(nbrs.len());
        // (key, position, sign)
        let mut keyed: Vec<(f64, usize, bool)> = Vec::with_capacity(2 * nbrs.len());
        for (pos, &j) in nbrs.iter().enumerate() {
            if dists[pos] <= near_cut {
                near.push(pos);
                dirs.push(Vec::new());
                continue;
            }
            let u: Vec<f64> = pts.row(j).iter().zip(c).map(|(x, o)| (x - o) / dists[pos]).collect();
            let key = dot(&u, &self.axis);
            keyed.push((key, pos, true));
            keyed.push((-key, pos, false));
            dirs.push(u);
        }
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut shortlist = BTreeSet::new();
        for (s, &(key, p, sp)) in keyed.iter().enumerate() {
            for &(key2, q, sq) in &keyed[s + 1..] {
                if key2 - key > DIRECTION_SHORTLIST {
                    break;
                }
                if p == q {
                    continue;
                }
                let sign = if sp == sq { 1.0 } else { -1.0 };
                let gap = dirs[p]
                    .iter()
                    .zip(&dirs[q])
                    .map(|(a, b)| (a - sign * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if gap <= DIRECTION_SHORTLIST {
                    shortlist.insert((p.min(q), p.max(q)));
                }
            }
        }
        for &p in &near {
            for q in 0..nbrs.len() {
                if q != p {
                    shortlist.insert((p.min(q), p.max(q)));
                }
            }
        }
        shortlist
            .into_iter()
            .filter(|&(a, b)| is_collinear(c, pts.row(nbrs[a]), pts.row(nbrs[b]), cfg))
            .collect()
    }
}

fn hull_extrema(pts: &Matrix) -> Vec<usize> {
    let mut seeds = BTreeSet::new();
    for j in 0..pts.ncols() {
        let col = pts.column(j);
        let argmin = (0..col.len()).min_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        let argmax = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b]).then(b.cmp(&a)));
        seeds.extend(argmin);
        seeds.extend(argmax);
    }
    seeds.into_iter().collect()
}

fn collinear_scan(pts: &Matrix, cfg: &GeometryConfig, seed: u64) -> (Vec<[usize; 3]>, bool) {
    const REPORT_LIMIT: usize = 100;
    if pts.nrows() <= data::EXHAUSTIVE_TRIPLE_LIMIT {
        (geometry::collinear_triples(pts, cfg, REPORT_LIMIT), false)
    } else {
        let mut t = geometry::sampled_collinear_triples(pts, cfg, data::SAMPLED_TRIPLES, seed);
        t.truncate(REPORT_LIMIT);
        (t, true)
    }
}

/// Labels each minority row of an augmented dataset as real or synthetic.
///
/// Work-queue traversal: each unvisited surviving candidate looks at its
/// `neighbor_budget` nearest minority neighbors; whenever it forms a
/// collinear triple with two of them, the middle point is pruned and the
/// pruned point's surviving neighbors are queued. Origin flags are stripped
/// before the attack runs.
pub fn distin_smote(aug: &LabeledDataset, cfg: &AttackConfig) -> Result<DistinguishResult> {
    cfg.validate()?;
    let aug = aug.without_origin();
    let ids = aug.minority_ids();
    let n = ids.len();
    if n < cfg.k + 1 {
        return Err(Error::TooFewMinority { n, k: cfg.k });
    }
    let pts = aug.features().select_rows(&ids);
    let budget = cfg.neighbor_budget(n);
    let index = NeighborIndex::auto(&pts);
    let finder = PairFinder::new(pts.ncols());
    let geo = &cfg.geometry;

    let mut candidate = vec![true; n];
    let mut visited = vec![false; n];
    let mut queue: VecDeque<usize> = match cfg.seed_mode {
        SeedMode::AllPoints => (0..n).collect(),
        SeedMode::HullExtrema => hull_extrema(&pts).into(),
    };
    while let Some(i) = queue.pop_front() {
        if visited[i] || !candidate[i] {
            continue;
        }
        visited[i] = true;
        let nbrs = index.k_nearest(Query::Member(i), budget, true)?;
        for (a, b) in finder.pairs(i, &nbrs, &pts, geo) {
            let triple = [i, nbrs[a], nbrs[b]];
            let m = triple[middle_of_three(pts.row(triple[0]), pts.row(triple[1]), pts.row(triple[2]))];
            if !candidate[m] {
                continue;
            }
            candidate[m] = false;
            visited[m] = true;
            let around = index.k_nearest(Query::Member(m), budget, true)?;
            queue.extend(around.into_iter().filter(|&x| candidate[x]));
        }
    }

    if cfg.sweep_survivors {
        let survivors: Vec<usize> = (0..n).filter(|&i| candidate[i]).collect();
        for (pos, &i) in survivors.iter().enumerate() {
            let others: Vec<usize> = survivors[..pos].iter().chain(&survivors[pos + 1..]).copied().collect();
            for (a, b) in finder.pairs(i, &others, &pts, geo) {
                let triple = [i, others[a], others[b]];
                let m = triple[middle_of_three(pts.row(triple[0]), pts.row(triple[1]), pts.row(triple[2]))];
                candidate[m] = false;
            }
        }
    }

    let detected_local: Vec<usize> = (0..n).filter(|&i| candidate[i]).collect();
    let detected_real: Vec<usize> = detected_local.iter().map(|&i| ids[i]).collect();
    let pruned_synthetic: Vec<usize> = (0..n).filter(|&i| !candidate[i]).map(|i| ids[i]).collect();

    let (triples, sampled_scan) = collinear_scan(&pts.select_rows(&detected_local), geo, 0);
    let degeneracy = DegeneracyReport {
        duplicate_rows: aug.duplicate_rows(&ids),
        collinear_real: triples
            .into_iter()
            .map(|t| t.map(|x| detected_real[x]))
            .collect(),
        sampled_scan,
    };
    Ok(DistinguishResult {
        detected_real,
        pruned_synthetic,
        degeneracy,
    })
}

/// Detects lines through the synthetic points: each unvisited point seeds a
/// line from every collinear pair among its nearest neighbors, grown with the
/// remaining collinear neighbors.
fn detect_lines(pts: &Matrix, budget: usize, geo: &GeometryConfig) -> Result<Vec<Line>> {
    let n = pts.nrows();
    let index = NeighborIndex::auto(pts);
    let finder = PairFinder::new(pts.ncols());
    let mut visited = vec![false; n];
    let mut lines = Vec::new();
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let nbrs = index.k_nearest(Query::Member(i), budget, true)?;
        let mut claimed: BTreeSet<usize> = BTreeSet::new();
        for (a, b) in finder.pairs(i, &nbrs, pts, geo) {
            let (j, l) = (nbrs[a], nbrs[b]);
            // Two distinct lines through x_i share no other point.
            if claimed.contains(&j) || claimed.contains(&l) {
                continue;
            }
            let line = geometry::grow_line([i, j, l], &nbrs, pts, geo);
            for &m in &line.members {
                visited[m] = true;
                if m != i {
                    claimed.insert(m);
                }
            }
            lines.push(line);
        }
    }
    Ok(lines)
}

/// Merges lines that lie on the same infinite line (the same segment found
/// from several seeds) and refits them.
fn dedup_lines(pts: &Matrix, lines: Vec<Line>, geo: &GeometryConfig) -> Vec<Line> {
    let n = lines.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let ends = |l: &Line| -> [Vec<f64>; 2] {
        let at = |t: f64| l.anchor.iter().zip(&l.direction).map(|(a, e)| a + t * e).collect();
        [at(l.extent.0), at(l.extent.1)]
    };
    let endpoints: Vec<[Vec<f64>; 2]> = lines.iter().map(ends).collect();
    for p in 0..n {
        for q in p + 1..n {
            let (lp, lq) = (&lines[p], &lines[q]);
            if dot(&lp.direction, &lq.direction).abs() < 0.5 {
                continue;
            }
            let span = [&endpoints[p][0], &endpoints[p][1], &endpoints[q][0], &endpoints[q][1]]
                .iter()
                .map(|e| lp.project(e))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)));
            let tol = geo.eps_col * (span.1 - span.0).max(lp.length()).max(lq.length());
            let on_p = endpoints[q].iter().all(|e| lp.residual(e) <= tol);
            let on_q = endpoints[p].iter().all(|e| lq.residual(e) <= tol);
            if on_p && on_q {
                let (rp, rq) = (find(&mut parent, p), find(&mut parent, q));
                if rp != rq {
                    parent[rp.max(rq)] = rp.min(rq);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        let r = find(&mut parent, p);
        groups[r].push(p);
    }
    groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            if g.len() == 1 {
                return lines[g[0]].clone();
            }
            let members: BTreeSet<usize> = g.iter().flat_map(|&p| lines[p].members.iter().copied()).collect();
            Line::fit(pts, members.into_iter().collect(), &lines[g[0]].direction)
        })
        .collect()
}

/// True when `x` lies beyond the member span of `line` (within `slack`).
/// Real endpoints sit outside the span of every segment they anchor.
fn beyond_span(line: &Line, x: &[f64], slack: f64) -> bool {
    let t = line.project(x);
    t <= line.extent.0 + slack || t >= line.extent.1 - slack
}

/// Coordinate-wise median; robust to the odd ill-conditioned intersection.
fn coordinate_median<'p>(points: impl Iterator<Item = &'p [f64]>) -> Vec<f64> {
    let points: Vec<&[f64]> = points.collect();
    (0..points[0].len())
        .map(|j| {
            let mut col: Vec<f64> = points.iter().map(|p| p[j]).collect();
            col.sort_by(f64::total_cmp);
            let n = col.len();
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect()
}

/// Members with the smallest and largest projection on the line.
fn extreme_members(line: &Line, pts: &Matrix) -> (usize, usize) {
    let t = |m: usize| line.project(pts.row(m));
    let lo = line.members.iter().copied().min_by(|&a, &b| t(a).total_cmp(&t(b))).expect("line has members");
    let hi = line.members.iter().copied().max_by(|&a, &b| t(a).total_cmp(&t(b))).expect("line has members");
    (lo, hi)
}

/// Reconstructs real minority points from a synthetic-only release.
///
/// Pairwise line intersections are merged and each cluster is located at the
/// coordinate-wise median of its intersections. A line then counts as support
/// only if that point is collinear with the line's extreme members, which
/// rejects lines that merely pass near each other.
pub fn recon_smote(syn: &LabeledDataset, cfg: &AttackConfig) -> Result<ReconstructionResult> {
    cfg.validate()?;
    let ids = syn.minority_ids();
    let pts = syn.features().select_rows(&ids);
    let geo = &cfg.geometry;
    if pts.nrows() < 3 {
        return Ok(ReconstructionResult {
            candidates: Vec::new(),
            accepted: Vec::new(),
            lines: Vec::new(),
        });
    }
    let budget = cfg.neighbor_budget(pts.nrows());
    let lines = dedup_lines(&pts, detect_lines(&pts, budget, geo)?, geo);

    let mut raw = Vec::new();
    for p in 0..lines.len() {
        for q in p + 1..lines.len() {
            if let Some(x) = geometry::intersect_lines(&lines[p], &lines[q], geo) {
                if beyond_span(&lines[p], &x, geo.eps_merge) && beyond_span(&lines[q], &x, geo.eps_merge) {
                    raw.push(Candidate {
                        point: x,
                        support: [p, q].into(),
                    });
                }
            }
        }
    }
    let ends: Vec<(usize, usize)> = lines.iter().map(|l| extreme_members(l, &pts)).collect();
    let candidates: Vec<Candidate> = geometry::merge_candidate_groups(raw.clone(), geo)
        .into_iter()
        .filter_map(|(mut c, members)| {
            c.point = coordinate_median(members.iter().map(|&i| raw[i].point.as_slice()));
            c.support.retain(|&l| {
                let (a, b) = ends[l];
                is_collinear(pts.row(a), pts.row(b), &c.point, geo)
            });
            (!c.support.is_empty()).then_some(c)
        })
        .collect();
    let accepted = candidates.iter().filter(|c| c.support.len() >= 3).cloned().collect();
    Ok(ReconstructionResult {
        candidates,
        accepted,
        lines,
    })
}

/// Precision, recall and the matched `(predicted, truth)` index pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub precision: f64,
    pub recall: f64,
    pub matched: Vec<(usize, usize)>,
}

fn ratios(matched: usize, predicted: usize, truth: usize) -> (f64, f64) {
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (frac(matched, predicted), frac(matched, truth))
}

/// Exact set comparison of predicted and true ids. `matched` holds positions
/// into the two (deduplicated, sorted) id sets.
pub fn match_ids(predicted: &[usize], truth: &[usize]) -> MatchResult {
    let p: BTreeSet<usize> = predicted.iter().copied().collect();
    let t: BTreeSet<usize> = truth.iter().copied().collect();
    let tv: Vec<usize> = t.iter().copied().collect();
    let matched: Vec<(usize, usize)> = p
        .iter()
        .enumerate()
        .filter_map(|(pi, id)| tv.binary_search(id).ok().map(|ti| (pi, ti)))
        .collect();
    let (precision, recall) = ratios(matched.len(), p.len(), t.len());
    MatchResult {
        precision,
        recall,
        matched,
    }
}

/// Greedy one-to-one matching in ascending distance; a pair matches iff its
/// distance is at most `tol`.
pub fn match_points(predicted: &[Vec<f64>], truth: &Matrix, tol: f64) -> Result<MatchResult> {
    let d = truth.ncols();
    if let Some(p) = predicted.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.len(),
        });
    }
    let mut close: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, p) in predicted.iter().enumerate() {
        for ti in 0..truth.nrows() {
            let dd = dist(p, truth.row(ti));
            if dd <= tol {
                close.push((dd, pi, ti));
            }
        }
    }
    close.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; predicted.len()];
    let mut used_t = vec![false; truth.nrows()];
    let mut matched = Vec::new();
    for (_, pi, ti) in close {
        if !used_p[pi] && !used_t[ti] {
            used_p[pi] = true;
            used_t[ti] = true;
            matched.push((pi, ti));
        }
    }
    let (precision, recall) = ratios(matched.len(), predicted.len(), truth.nrows());
    Ok(MatchResult {
        precision,
        recall,
        matched,
    })
}
