//! Exact Euclidean nearest-neighbor search and the directed KNN graph.
//!
//! Results are ordered by `(squared distance, id)`, so exact distance ties
//! resolve to the smaller id. The brute-force and tree strategies compute
//! distances with the same summation order and return identical lists.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    BruteForce,
    KdTree,
}

impl Strategy {
    /// Tree for large, moderate-dimensional sets; brute force otherwise.
    pub fn auto(n: usize, d: usize) -> Self {
        if n >= 2_000 && d <= 32 {
            Strategy::KdTree
        } else {
            Strategy::BruteForce
        }
    }
}

/// What to search around.
#[derive(Debug, Clone, Copy)]
pub enum Query<'q> {
    Point(&'q [f64]),
    /// A row of the indexed set, identified by id.
    Member(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Hit {
    d2: f64,
    id: usize,
}

impl Eq for Hit {}

impl Ord for Hit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Hit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const LEAF_SIZE: usize = 16;

#[derive(Debug)]
enum Node {
    Leaf { ids: Vec<usize> },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug)]
struct KdTree {
    nodes: Vec<Node>,
}

impl KdTree {
    fn build(points: &Matrix) -> Self {
        let mut tree = KdTree { nodes: Vec::new() };
        let ids: Vec<usize> = (0..points.nrows()).collect();
        tree.build_node(points, ids);
        tree
    }

    fn build_node(&mut self, points: &Matrix, mut ids: Vec<usize>) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { ids: Vec::new() });
        if ids.len() <= LEAF_SIZE {
            self.nodes[slot] = Node::Leaf { ids };
            return slot;
        }
        let d = points.ncols();
        let (mut axis, mut widest) = (0, f64::NEG_INFINITY);
        for j in 0..d {
            let (lo, hi) = ids.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let x = points.get(i, j);
                (lo.min(x), hi.max(x))
            });
            if hi - lo > widest {
                widest = hi - lo;
                axis = j;
            }
        }
        if widest <= 0.0 {
            self.nodes[slot] = Node::Leaf { ids };
            return slot;
        }
        let mid = ids.len() / 2;
        ids.select_nth_unstable_by(mid, |&a, &b| {
            points.get(a, axis).total_cmp(&points.get(b, axis)).then(a.cmp(&b))
        });
        let value = points.get(ids[mid], axis);
        // Left: coordinate <= value on the split axis; right: >= value.
        let right_ids = ids.split_off(mid);
        let left = self.build_node(points, ids);
        let right = self.build_node(points, right_ids);
        self.nodes[slot] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        slot
    }

    fn search(&self, points: &Matrix, q: &[f64], m: usize, exclude: Option<usize>, heap: &mut BinaryHeap<Hit>) {
        self.visit(0, points, q, m, exclude, heap);
    }

    fn visit(
        &self,
        node: usize,
        points: &Matrix,
        q: &[f64],
        m: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Hit>,
    ) {
        match &self.nodes[node] {
            Node::Leaf { ids } => {
                for &id in ids {
                    if Some(id) == exclude {
                        continue;
                    }
                    offer(heap, m, Hit { d2: sq_dist(q, points.row(id)), id });
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (*left, *right) } else { (*right, *left) };
                self.visit(near, points, q, m, exclude, heap);
                // Prune only on strict excess: an equal-distance point with a
                // smaller id may still be on the far side.
                let plane = diff * diff;
                if heap.len() < m || plane <= heap.peek().map_or(f64::INFINITY, |h| h.d2) {
                    self.visit(far, points, q, m, exclude, heap);
                }
            }
        }
    }
}

fn offer(heap: &mut BinaryHeap<Hit>, m: usize, hit: Hit) {
    if heap.len() < m {
        heap.push(hit);
    } else if let Some(top) = heap.peek() {
        if hit < *top {
            heap.pop();
            heap.push(hit);
        }
    }
}

/// Exact nearest-neighbor index over the rows of a matrix.
#[derive(Debug)]
pub struct NeighborIndex<'a> {
    points: &'a Matrix,
    strategy: Strategy,
    tree: Option<KdTree>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(points: &'a Matrix, strategy: Strategy) -> Self {
        let tree = match strategy {
            Strategy::KdTree if points.nrows() > 0 => Some(KdTree::build(points)),
            _ => None,
        };
        Self {
            points,
            strategy,
            tree,
        }
    }

    pub fn auto(points: &'a Matrix) -> Self {
        Self::new(points, Strategy::auto(points.nrows(), points.ncols()))
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn points(&self) -> &Matrix {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// The `m` nearest ids ordered by distance, ties by ascending id. With
    /// `exclude_self` and a member query, the member itself is skipped.
    pub fn k_nearest(&self, query: Query<'_>, m: usize, exclude_self: bool) -> Result<Vec<usize>> {
        let (q, exclude) = match query {
            Query::Point(p) => {
                if p.len() != self.points.ncols() {
                    return Err(Error::DimensionMismatch {
                        expected: self.points.ncols(),
                        got: p.len(),
                    });
                }
                (p, None)
            }
            Query::Member(id) => {
                if id >= self.len() {
                    return Err(Error::InvalidParameter(format!(
                        "member id {id} out of range ({} points)",
                        self.len()
                    )));
                }
                (self.points.row(id), exclude_self.then_some(id))
            }
        };
        let available = self.len() - usize::from(exclude.is_some());
        if m > available {
            return Err(Error::TooManyNeighbors {
                requested: m,
                available,
            });
        }
        if m == 0 {
            return Ok(Vec::new());
        }
        let hits = match &self.tree {
            Some(tree) => {
                let mut heap = BinaryHeap::with_capacity(m + 1);
                tree.search(self.points, q, m, exclude, &mut heap);
                heap.into_sorted_vec()
            }
            None => self.brute_force(q, m, exclude),
        };
        Ok(hits.into_iter().map(|h| h.id).collect())
    }

    fn brute_force(&self, q: &[f64], m: usize, exclude: Option<usize>) -> Vec<Hit> {
        let mut all: Vec<Hit> = (0..self.len())
            .filter(|&id| Some(id) != exclude)
            .map(|id| Hit {
                d2: sq_dist(q, self.points.row(id)),
                id,
            })
            .collect();
        if m < all.len() {
            all.select_nth_unstable(m);
            all.truncate(m);
        }
        all.sort_unstable();
        all
    }
}

/// Directed k-nearest-neighbor graph of a point set with mutuality flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnGraph {
    k: usize,
    /// `neighbors[i]` = the k nearest other points of i, nearest first.
    neighbors: Vec<Vec<usize>>,
    /// `mutual[i][s]` is set iff `neighbors[i][s]` also lists i.
    mutual: Vec<Vec<bool>>,
}

impl KnnGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() * self.k
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.neighbors[from].contains(&to)
    }

    /// All directed edges `(i, j, mutual)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        self.neighbors.iter().enumerate().flat_map(move |(i, ns)| {
            ns.iter()
                .zip(&self.mutual[i])
                .map(move |(&j, &b)| (i, j, b))
        })
    }
}

pub fn build_knn_graph(points: &Matrix, k: usize) -> Result<KnnGraph> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let n = points.nrows();
    if n <= k {
        return Err(Error::TooFewMinority { n, k });
    }
    let index = NeighborIndex::auto(points);
    let neighbors = (0..n)
        .map(|i| index.k_nearest(Query::Member(i), k, true))
        .collect::<Result<Vec<_>>>()?;
    let mutual = neighbors
        .iter()
        .enumerate()
        .map(|(i, ns)| ns.iter().map(|&j| neighbors[j].contains(&i)).collect())
        .collect();
    Ok(KnnGraph { k, neighbors, mutual })
}

/// Fraction of directed edges whose reverse edge also exists.
pub fn mutuality_fraction(g: &KnnGraph) -> f64 {
    if g.edge_count() == 0 {
        return 0.0;
    }
    let mutual = g.mutual.iter().flatten().filter(|&&b| b).count();
    mutual as f64 / g.edge_count() as f64
}
