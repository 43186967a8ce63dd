//! Lower bounds on the expected recall of line-intersection reconstruction.
//!
//! Each SMOTE step picks one of the `n1 * k` directed minority segments
//! uniformly, so a segment receives `Binomial(n0 - n1, 1 / (n1 k))` points,
//! or `Binomial(n0 - n1, 2 / (n1 k))` when the neighbor relation is mutual.
//! A segment with at least three points is recoverable as a line; a point
//! with three recoverable incident segments is recoverable. Markov-style
//! reasoning on the count `S` of recoverable incident segments gives
//! `P(S >= 3) >= (k p_edge - 2) / (k - 2)`.

use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::KnnGraph;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n0: usize,
    pub n1: usize,
    pub k: usize,
    /// Probability that a nearest-neighbor relation is mutual.
    pub alpha: f64,
}

impl BoundInputs {
    pub fn new(n0: usize, n1: usize, k: usize, alpha: f64) -> Self {
        Self { n0, n1, k, alpha }
    }

    /// Inputs for imbalance ratio `r` at minority size `n1` (`n0 = round(r n1)`).
    pub fn from_ratio(r: f64, n1: usize, k: usize, alpha: f64) -> Self {
        Self::new((r * n1 as f64).round() as usize, n1, k, alpha)
    }

    fn validate(&self, check_alpha: bool) -> Result<()> {
        if self.k < 3 {
            return Err(Error::KTooSmall(self.k));
        }
        if !(self.n0 > self.n1 && self.n1 >= 1) {
            return Err(Error::InvalidParameter(format!(
                "bounds need n0 > n1 >= 1 (got n0={}, n1={})",
                self.n0, self.n1
            )));
        }
        if check_alpha && !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Expected synthetic points per directed segment.
    pub fn lambda(&self) -> f64 {
        (self.n0 - self.n1) as f64 / (self.n1 * self.k) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// Poisson approximation, one-directional counting.
    Approx,
    /// Binomial counts with mutual edges counted in both directions.
    Exact,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Approx => "approx",
            BoundKind::Exact => "exact",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub inputs: BoundInputs,
    pub lambda: f64,
    pub p_edge: f64,
    pub bound: f64,
    pub kind: BoundKind,
}

fn identifiable_bound(k: usize, p_edge: f64) -> f64 {
    let k = k as f64;
    ((k * p_edge - 2.0) / (k - 2.0)).clamp(0.0, 1.0)
}

/// `P(Poisson(lambda) >= 3)`.
pub fn poisson_tail_ge3(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let head = (-lambda).exp() * (1.0 + lambda + 0.5 * lambda * lambda);
    if head < 0.5 {
        return 1.0 - head;
    }
    // Small lambda: sum the upper terms directly to avoid cancellation.
    let mut term = (-lambda).exp() * lambda.powi(3) / 6.0;
    let mut sum = 0.0;
    let mut j = 3.0;
    while term > sum * 1e-17 && term > 0.0 {
        sum += term;
        j += 1.0;
        term *= lambda / j;
    }
    sum
}

/// Poisson-approximation bound; `alpha` is ignored.
pub fn approx_recall_bound(inputs: &BoundInputs) -> Result<BoundResult> {
    inputs.validate(false)?;
    let lambda = inputs.lambda();
    let p_edge = poisson_tail_ge3(lambda);
    Ok(BoundResult {
        inputs: *inputs,
        lambda,
        p_edge,
        bound: identifiable_bound(inputs.k, p_edge),
        kind: BoundKind::Approx,
    })
}

/// `ln C(n, j)` for small `j`.
fn ln_choose(n: f64, j: f64) -> f64 {
    let mut acc = 0.0;
    let mut i = 0.0;
    while i < j {
        acc += (n - i).ln() - (i + 1.0).ln();
        i += 1.0;
    }
    acc
}

/// Below this `n` the terms are formed by direct products (exact for dyadic `p`).
const DIRECT_HEAD_LIMIT: u64 = 64;

/// `P(X >= 3)` for `X ~ Binomial(n, p)`, evaluated from log-space terms.
///
/// When the head `P(0) + P(1) + P(2)` is below one half the complement is
/// well conditioned; otherwise the upper terms are summed directly so tiny
/// tails keep full relative precision.
pub fn binom_tail_ge3(n: u64, p: f64) -> f64 {
    if n < 3 || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let nf = n as f64;
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let ln_term = |j: f64| ln_choose(nf, j) + j * ln_p + (nf - j) * ln_q;
    let head: f64 = if n <= DIRECT_HEAD_LIMIT {
        let q = 1.0 - p;
        let qn2 = q.powi(n as i32 - 2);
        qn2 * q * q + nf * p * qn2 * q + nf * (nf - 1.0) / 2.0 * p * p * qn2
    } else {
        (0..3).map(|j| ln_term(j as f64).exp()).sum()
    };
    if head < 0.5 {
        return (1.0 - head).max(0.0);
    }
    let ratio_base = p / (1.0 - p);
    let mut term = if n <= DIRECT_HEAD_LIMIT {
        nf * (nf - 1.0) * (nf - 2.0) / 6.0 * p.powi(3) * (1.0 - p).powi(n as i32 - 3)
    } else {
        ln_term(3.0).exp()
    };
    let mut sum = 0.0;
    let mut j = 3u64;
    while term > 0.0 && term > sum * 1e-17 && j <= n {
        sum += term;
        term *= (n - j) as f64 / (j + 1) as f64 * ratio_base;
        j += 1;
    }
    sum.min(1.0)
}

/// Edge reconstruction probability mixing exclusive and mutual edges.
pub fn p_edge_exact(inputs: &BoundInputs) -> f64 {
    let trials = (inputs.n0 - inputs.n1) as u64;
    let q = 1.0 / (inputs.n1 * inputs.k) as f64;
    let one_way = binom_tail_ge3(trials, q);
    let two_way = binom_tail_ge3(trials, (2.0 * q).min(1.0));
    (1.0 - inputs.alpha) * one_way + inputs.alpha * two_way
}

/// Binomial, mutuality-aware bound.
pub fn exact_recall_bound(inputs: &BoundInputs) -> Result<BoundResult> {
    inputs.validate(true)?;
    let p_edge = p_edge_exact(inputs);
    Ok(BoundResult {
        inputs: *inputs,
        lambda: inputs.lambda(),
        p_edge,
        bound: identifiable_bound(inputs.k, p_edge),
        kind: BoundKind::Exact,
    })
}

pub fn recall_bound(inputs: &BoundInputs, kind: BoundKind) -> Result<BoundResult> {
    match kind {
        BoundKind::Approx => approx_recall_bound(inputs),
        BoundKind::Exact => exact_recall_bound(inputs),
    }
}

/// Axes of a bound sweep; every combination becomes one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub ratios: Vec<f64>,
    pub ks: Vec<usize>,
    pub alphas: Vec<f64>,
    pub n1s: Vec<usize>,
}

impl SweepGrid {
    fn cells(&self) -> impl Iterator<Item = BoundInputs> + '_ {
        self.n1s.iter().flat_map(move |&n1| {
            self.ks.iter().flat_map(move |&k| {
                self.alphas.iter().flat_map(move |&alpha| {
                    self.ratios
                        .iter()
                        .map(move |&r| BoundInputs::from_ratio(r, n1, k, alpha))
                })
            })
        })
    }

    fn check(&self) -> Result<()> {
        if self.ratios.is_empty() || self.ks.is_empty() || self.alphas.is_empty() || self.n1s.is_empty() {
            return Err(Error::InvalidParameter("sweep grids must be nonempty".into()));
        }
        Ok(())
    }

    /// Grid over the ratio range used for bound-vs-imbalance curves, with
    /// `n1 = 100` and `alpha = 0.5`.
    pub fn default_ratio_curves() -> Self {
        Self {
            ratios: vec![2.0, 5.0, 10.0, 20.0, 30.0, 50.0, 75.0, 100.0],
            ks: vec![3, 5, 7, 10],
            alphas: vec![0.5],
            n1s: vec![100],
        }
    }
}

/// One row per grid cell, ordered by (n1, k, alpha, r).
pub fn sweep(grid: &SweepGrid, kind: BoundKind) -> Result<Vec<BoundResult>> {
    grid.check()?;
    grid.cells().map(|c| recall_bound(&c, kind)).collect()
}

pub const SWEEP_HEADER: [&str; 8] = ["n0", "n1", "k", "alpha", "lambda", "p_edge", "bound", "kind"];

pub fn write_sweep_csv(rows: &[BoundResult], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{}", SWEEP_HEADER.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.inputs.n0, r.inputs.n1, r.inputs.k, r.inputs.alpha, r.lambda, r.p_edge, r.bound, r.kind
        )?;
    }
    Ok(())
}

/// Exact and approximate bounds side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub inputs: BoundInputs,
    pub lambda: f64,
    pub approx: f64,
    pub exact: f64,
    /// `exact / approx`; NaN when the approximate bound is 0.
    pub ratio: f64,
}

pub fn ratio_sweep(grid: &SweepGrid) -> Result<Vec<RatioRow>> {
    grid.check()?;
    grid.cells()
        .map(|c| {
            let a = approx_recall_bound(&c)?;
            let e = exact_recall_bound(&c)?;
            Ok(RatioRow {
                inputs: c,
                lambda: a.lambda,
                approx: a.bound,
                exact: e.bound,
                ratio: if a.bound > 0.0 { e.bound / a.bound } else { f64::NAN },
            })
        })
        .collect()
}

pub const RATIO_HEADER: [&str; 8] = ["n0", "n1", "k", "alpha", "lambda", "approx", "exact", "ratio"];

pub fn write_ratio_csv(rows: &[RatioRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{}", RATIO_HEADER.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.inputs.n0, r.inputs.n1, r.inputs.k, r.inputs.alpha, r.lambda, r.approx, r.exact, r.ratio
        )?;
    }
    Ok(())
}

/// Monte-Carlo recall under the idealized model: `n_synth` draws are spread
/// uniformly over the directed edges of `graph`; a point counts as recovered
/// when at least three of its outgoing edges carry >= 3 points (points on
/// `j -> i` also count for `i -> j`). Returns the mean recall over `trials`.
pub fn simulate_identifiable_recall(graph: &KnnGraph, n_synth: usize, trials: usize, seed: u64) -> f64 {
    let n = graph.node_count();
    let k = graph.k();
    if n == 0 || trials == 0 {
        return 0.0;
    }
    let mut rng = seed::rng(seed);
    let mut total = 0.0;
    let mut counts = vec![0usize; n * k];
    for _ in 0..trials {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n_synth {
            counts[rng.random_range(0..n * k)] += 1;
        }
        let on_segment = |i: usize, s: usize| -> usize {
            let j = graph.neighbors(i)[s];
            let back = graph
                .neighbors(j)
                .iter()
                .position(|&x| x == i)
                .map_or(0, |t| counts[j * k + t]);
            counts[i * k + s] + back
        };
        let recovered = (0..n)
            .filter(|&i| (0..k).filter(|&s| on_segment(i, s) >= 3).count() >= 3)
            .count();
        total += recovered as f64 / n as f64;
    }
    total / trials as f64
}
