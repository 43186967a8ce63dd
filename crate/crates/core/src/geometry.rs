//! Collinearity tests, line fitting and line intersection.
//!
//! Every predicate here is scale-invariant: residuals are compared against a
//! tolerance multiplied by the spread of the points involved, so one set of
//! tolerances works for any standardized dataset.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dist, dot, norm, Matrix};
use crate::seed;

/// Numeric tolerances for the geometric predicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    /// Relative collinearity tolerance.
    pub eps_col: f64,
    /// Relative closest-approach gap accepted as an intersection.
    pub eps_int: f64,
    /// Radius below which intersection candidates are merged.
    pub eps_merge: f64,
    /// Lines with `|cos angle| > 1 - eps_par` are treated as parallel.
    pub eps_par: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            eps_col: 1e-9,
            eps_int: 1e-7,
            eps_merge: 1e-6,
            eps_par: 1e-12,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.eps_col, self.eps_int, self.eps_merge, self.eps_par];
        if all.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidParameter(
                "geometry tolerances must be finite and > 0".into(),
            ));
        }
        if self.eps_merge < self.eps_int {
            return Err(Error::InvalidParameter(
                "eps_merge must be >= eps_int".into(),
            ));
        }
        Ok(())
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Permutation placing the three points in lexicographic order, so that all
/// downstream arithmetic is independent of argument order.
fn canonical_order(pts: [&[f64]; 3]) -> [usize; 3] {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| lex_cmp(pts[i], pts[j]).then(i.cmp(&j)));
    idx
}

/// Orthogonal distance from `point` to the line through `origin` with unit
/// direction `dir`.
pub fn line_residual(point: &[f64], origin: &[f64], dir: &[f64]) -> f64 {
    let t: f64 = point
        .iter()
        .zip(origin)
        .zip(dir)
        .map(|((p, o), e)| (p - o) * e)
        .sum();
    point
        .iter()
        .zip(origin)
        .zip(dir)
        .map(|((p, o), e)| {
            let r = (p - o) - t * e;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

fn unit(from: &[f64], to: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = to.iter().zip(from).map(|(b, a)| b - a).collect();
    let n = norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Layout of a triangle in canonical order: longest pair `(p, q)` and the
/// remaining vertex, plus the longest and shortest side lengths.
struct Triangle {
    p: usize,
    q: usize,
    t: usize,
    longest: f64,
    shortest: f64,
}

fn triangle(pts: [&[f64]; 3]) -> Triangle {
    let ord = canonical_order(pts);
    let pairs = [(ord[0], ord[1], ord[2]), (ord[0], ord[2], ord[1]), (ord[1], ord[2], ord[0])];
    let lens = pairs.map(|(i, j, _)| dist(pts[i], pts[j]));
    let mut best = 0;
    for s in 1..3 {
        if lens[s] > lens[best] {
            best = s;
        }
    }
    let shortest = lens.iter().copied().fold(f64::INFINITY, f64::min);
    let (p, q, t) = pairs[best];
    Triangle {
        p,
        q,
        t,
        longest: lens[best],
        shortest,
    }
}

/// Collinearity predicate without the dimension check.
///
/// The residual of the most-offset vertex (the one opposite the shortest
/// side) equals `h * longest / shortest`, where `h` is the well-conditioned
/// residual of the vertex opposite the longest side.
pub fn is_collinear(a: &[f64], b: &[f64], c: &[f64], cfg: &GeometryConfig) -> bool {
    let pts = [a, b, c];
    let tri = triangle(pts);
    if tri.longest == 0.0 || tri.shortest <= cfg.eps_col * tri.longest {
        return true;
    }
    let dir = unit(pts[tri.p], pts[tri.q]);
    let h = line_residual(pts[tri.t], pts[tri.p], &dir);
    h * tri.longest / tri.shortest <= cfg.eps_col * tri.longest
}

/// True iff the three points lie on a common line within tolerance.
pub fn collinear(a: &[f64], b: &[f64], c: &[f64], cfg: &GeometryConfig) -> Result<bool> {
    let d = a.len();
    for p in [b, c] {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
    }
    if d < 2 {
        return Err(Error::InvalidParameter(
            "collinearity needs dimension >= 2".into(),
        ));
    }
    Ok(is_collinear(a, b, c, cfg))
}

/// Index (0, 1 or 2) of the argument whose projection on the common line is
/// the median. Only meaningful for collinear triples.
pub fn middle_of_three(a: &[f64], b: &[f64], c: &[f64]) -> usize {
    let pts = [a, b, c];
    let tri = triangle(pts);
    if tri.longest == 0.0 {
        return canonical_order(pts)[1];
    }
    let dir = unit(pts[tri.p], pts[tri.q]);
    let origin = pts[tri.p];
    let proj = |i: usize| -> f64 {
        pts[i]
            .iter()
            .zip(origin)
            .zip(&dir)
            .map(|((x, o), e)| (x - o) * e)
            .sum()
    };
    let ord = canonical_order(pts);
    let mut by_proj = ord.map(|i| (proj(i), i));
    by_proj.sort_by(|x, y| x.0.total_cmp(&y.0));
    by_proj[1].1
}

/// A detected line: member points plus a fitted anchor and unit direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    /// Mean of the member points.
    pub anchor: Vec<f64>,
    pub direction: Vec<f64>,
    pub members: Vec<usize>,
    /// Min and max projection of the members onto `direction`, relative to `anchor`.
    pub extent: (f64, f64),
}

impl Line {
    /// Fits a line to the given member rows: direction through the two
    /// members with extreme projections on `hint`, anchor at the member mean.
    pub fn fit(points: &Matrix, members: Vec<usize>, hint: &[f64]) -> Self {
        let d = points.ncols();
        let first = points.row(members[0]);
        let mut lo = (f64::INFINITY, members[0]);
        let mut hi = (f64::NEG_INFINITY, members[0]);
        for &m in &members {
            let t: f64 = points
                .row(m)
                .iter()
                .zip(first)
                .zip(hint)
                .map(|((x, o), e)| (x - o) * e)
                .sum();
            if t < lo.0 {
                lo = (t, m);
            }
            if t > hi.0 {
                hi = (t, m);
            }
        }
        let direction = unit(points.row(lo.1), points.row(hi.1));
        let mut anchor = vec![0.0; d];
        for &m in &members {
            for (a, x) in anchor.iter_mut().zip(points.row(m)) {
                *a += x;
            }
        }
        let cnt = members.len() as f64;
        anchor.iter_mut().for_each(|a| *a /= cnt);
        let mut extent = (f64::INFINITY, f64::NEG_INFINITY);
        for &m in &members {
            let t = Self::project_onto(points.row(m), &anchor, &direction);
            extent.0 = extent.0.min(t);
            extent.1 = extent.1.max(t);
        }
        Self {
            anchor,
            direction,
            members,
            extent,
        }
    }

    fn project_onto(x: &[f64], anchor: &[f64], dir: &[f64]) -> f64 {
        x.iter()
            .zip(anchor)
            .zip(dir)
            .map(|((x, a), e)| (x - a) * e)
            .sum()
    }

    /// Signed coordinate of `x` along the line, relative to the anchor.
    pub fn project(&self, x: &[f64]) -> f64 {
        Self::project_onto(x, &self.anchor, &self.direction)
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        line_residual(x, &self.anchor, &self.direction)
    }

    pub fn length(&self) -> f64 {
        self.extent.1 - self.extent.0
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }
}

/// Grows a collinear seed triple into a line by absorbing every candidate
/// whose residual to the seed line is within tolerance.
pub fn grow_line(seed: [usize; 3], candidates: &[usize], points: &Matrix, cfg: &GeometryConfig) -> Line {
    let pts = seed.map(|i| points.row(i));
    let tri = triangle(pts);
    let origin = pts[tri.p];
    let dir = unit(pts[tri.p], pts[tri.q]);
    let seed_len = tri.longest;

    let mut members: BTreeSet<usize> = seed.iter().copied().collect();
    for &c in candidates {
        if members.contains(&c) {
            continue;
        }
        let x = points.row(c);
        let t: f64 = x
            .iter()
            .zip(origin)
            .zip(&dir)
            .map(|((x, o), e)| (x - o) * e)
            .sum();
        let spread = seed_len.max(t) - t.min(0.0);
        if line_residual(x, origin, &dir) <= cfg.eps_col * spread {
            members.insert(c);
        }
    }
    Line::fit(points, members.into_iter().collect(), &dir)
}

/// Closest-approach intersection of two lines, or `None` when they are
/// near-parallel or pass each other at a gap above tolerance.
pub fn intersect_lines(p: &Line, q: &Line, cfg: &GeometryConfig) -> Option<Vec<f64>> {
    if p.dim() != q.dim() {
        return None;
    }
    let b = dot(&p.direction, &q.direction);
    if b.abs() > 1.0 - cfg.eps_par {
        return None;
    }
    let w0: Vec<f64> = p.anchor.iter().zip(&q.anchor).map(|(x, y)| x - y).collect();
    let dp = dot(&p.direction, &w0);
    let dq = dot(&q.direction, &w0);
    let denom = 1.0 - b * b;
    let s = (b * dq - dp) / denom;
    let t = (dq - b * dp) / denom;
    let on_p: Vec<f64> = p.anchor.iter().zip(&p.direction).map(|(a, e)| a + s * e).collect();
    let on_q: Vec<f64> = q.anchor.iter().zip(&q.direction).map(|(a, e)| a + t * e).collect();
    let gap = dist(&on_p, &on_q);
    let scale = 1.0 + norm(&p.anchor).min(norm(&q.anchor));
    if gap <= cfg.eps_int * scale {
        Some(on_p.iter().zip(&on_q).map(|(a, b)| 0.5 * (a + b)).collect())
    } else {
        None
    }
}

/// An intersection point with the ids of the lines passing through it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: Vec<f64>,
    pub support: BTreeSet<usize>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Single-linkage clustering at radius `eps`; returns groups of input indices.
fn single_linkage(points: &[&[f64]], eps: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex_cmp(points[a], points[b]).then(a.cmp(&b)));
    let mut ds = DisjointSet::new(n);
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if points[j][0] - points[i][0] > eps {
                break;
            }
            if dist(points[i], points[j]) <= eps {
                ds.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = ds.find(i);
        groups[r].push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

/// Merges candidates closer than `eps_merge` into their centroid with the
/// union of supports, repeating until all outputs are separated by more than
/// `eps_merge`. Output is sorted lexicographically by position.
pub fn merge_candidates(candidates: Vec<Candidate>, cfg: &GeometryConfig) -> Vec<Candidate> {
    merge_candidate_groups(candidates, cfg).into_iter().map(|(c, _)| c).collect()
}

/// [`merge_candidates`], also returning the input indices folded into each
/// output.
pub fn merge_candidate_groups(candidates: Vec<Candidate>, cfg: &GeometryConfig) -> Vec<(Candidate, Vec<usize>)> {
    let mut current: Vec<(Candidate, Vec<usize>)> = candidates.into_iter().enumerate().map(|(i, c)| (c, vec![i])).collect();
    if current.is_empty() {
        return current;
    }
    loop {
        let groups = {
            let views: Vec<&[f64]> = current.iter().map(|(c, _)| c.point.as_slice()).collect();
            single_linkage(&views, cfg.eps_merge)
        };
        let changed = groups.len() < current.len();
        let mut next = Vec::with_capacity(groups.len());
        for g in groups {
            let d = current[g[0]].0.point.len();
            let mut sum = vec![0.0; d];
            let mut members = Vec::new();
            let mut support = BTreeSet::new();
            let mut ordered = g.clone();
            ordered.sort_by(|&a, &b| lex_cmp(&current[a].0.point, &current[b].0.point));
            for i in ordered {
                let (c, m) = &current[i];
                // Weighted by folded inputs so repeated passes keep the
                // centroid of the original points.
                for (s, x) in sum.iter_mut().zip(&c.point) {
                    *s += x * m.len() as f64;
                }
                members.extend_from_slice(m);
                support.extend(c.support.iter().copied());
            }
            sum.iter_mut().for_each(|s| *s /= members.len() as f64);
            members.sort_unstable();
            next.push((Candidate { point: sum, support }, members));
        }
        current = next;
        if !changed {
            break;
        }
    }
    current.sort_by(|a, b| lex_cmp(&a.0.point, &b.0.point));
    current
}

/// Every collinear triple (ascending ids) among the rows of `points`, stopping
/// after `limit` hits.
pub fn collinear_triples(points: &Matrix, cfg: &GeometryConfig, limit: usize) -> Vec<[usize; 3]> {
    let n = points.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if is_collinear(points.row(i), points.row(j), points.row(k), cfg) {
                    out.push([i, j, k]);
                    if out.len() >= limit {
                        return out;
                    }
                }
            }
        }
    }
    out
}

/// Collinear triples found among `samples` uniformly drawn distinct triples.
pub fn sampled_collinear_triples(
    points: &Matrix,
    cfg: &GeometryConfig,
    samples: usize,
    seed: u64,
) -> Vec<[usize; 3]> {
    let n = points.nrows();
    if n < 3 {
        return Vec::new();
    }
    let mut rng = seed::rng(seed);
    let mut found = BTreeSet::new();
    for _ in 0..samples {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let mut k = rng.random_range(0..n);
        while k == i || k == j {
            k = rng.random_range(0..n);
        }
        if is_collinear(points.row(i), points.row(j), points.row(k), cfg) {
            let mut t = [i, j, k];
            t.sort_unstable();
            found.insert(t);
        }
    }
    found.into_iter().collect()
}
