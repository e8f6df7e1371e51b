//! Point clouds, seeded samplers and exact neighbor queries.
//!
//! All randomness goes through [`rng_from_seed`], a ChaCha8 stream seeded
//! from a `u64`, so every sampled cloud is bit-reproducible across builds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// The generator behind every seeded routine in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` points in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be positive"));
        }
        if coords.is_empty() {
            return Err(Error::EmptyInput("point cloud has no points".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::EmptyInput("point cloud has no points".into()))?;
        let dim = first.len();
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Parse {
                    row: i + 1,
                    msg: format!("expected {dim} coordinates, found {}", row.len()),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::new(dim, coords)
    }

    /// A one-dimensional cloud.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Euclidean distance between vertices `i` and `j`.
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        distance(self.point(i), self.point(j))
    }

    /// Largest pairwise distance, by brute force.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| self.dist(i, j)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }
}

/// Euclidean distance. Every neighbor decision in the crate goes through this
/// function so that ties are resolved on identical floating-point values.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Parse a headerless CSV of decimal coordinates, one point per row.
pub fn parse_point_cloud(text: &str) -> Result<PointCloud> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| Error::Parse {
                    row: i + 1,
                    msg: format!("{tok:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first().map(|r: &Vec<f64>| r.len()) {
            if row.len() != first {
                return Err(Error::Parse {
                    row: i + 1,
                    msg: format!("expected {first} columns, found {}", row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("point file contains no rows".into()));
    }
    PointCloud::from_rows(&rows)
}

pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_point_cloud(&fs::read_to_string(path)?)
}

pub fn write_point_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for p in cloud.points() {
        let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// `n` i.i.d. draws from Uniform(0, 1), excluding the endpoint 0.
pub fn sample_uniform_1d(n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::EmptyInput("cannot sample zero points".into()));
    }
    let mut rng = rng_from_seed(seed);
    let xs: Vec<f64> = (0..n)
        .map(|_| loop {
            let x: f64 = rng.random();
            if x > 0.0 {
                break x;
            }
        })
        .collect();
    PointCloud::new(1, xs)
}

/// Isotropic Gaussian blobs, `per_cluster` points around each center, emitted
/// cluster by cluster. Returns the cloud and the generating center of each point.
pub fn sample_gaussian_clusters(
    centers: &[Vec<f64>],
    sigma: f64,
    per_cluster: usize,
    seed: u64,
) -> Result<(PointCloud, Vec<usize>)> {
    let dim = centers
        .first()
        .ok_or_else(|| Error::EmptyInput("no cluster centers".into()))?
        .len();
    if centers.iter().any(|c| c.len() != dim) {
        return Err(Error::invalid("cluster centers differ in dimension"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("cluster spread must be >= 0, got {sigma}")));
    }
    if per_cluster == 0 {
        return Err(Error::EmptyInput("per_cluster must be positive".into()));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(centers.len() * per_cluster * dim);
    let mut classes = Vec::with_capacity(centers.len() * per_cluster);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_cluster {
            coords.extend(center.iter().map(|&m| m + normal.sample(&mut rng)));
            classes.push(c);
        }
    }
    Ok((PointCloud::new(dim, coords)?, classes))
}

/// Hard constraints `u(x_i) = y_i` on a subset of vertices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelConstraints {
    entries: Vec<(usize, f64)>,
}

impl LabelConstraints {
    pub fn new(entries: Vec<(usize, f64)>, n_vertices: usize) -> Result<Self> {
        let mut seen = vec![false; n_vertices];
        for &(i, y) in &entries {
            if i >= n_vertices {
                return Err(Error::IndexOutOfRange { index: i, len: n_vertices });
            }
            if seen[i] {
                return Err(Error::invalid(format!("vertex {i} is labeled twice")));
            }
            if !y.is_finite() {
                return Err(Error::invalid(format!("label of vertex {i} is not finite")));
            }
            seen[i] = true;
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }
}

/// Parse "index,value" rows.
pub fn parse_labels(text: &str, n_vertices: usize) -> Result<LabelConstraints> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (Some(idx), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse { row: i + 1, msg: "expected `index,value`".into() });
        };
        let idx = idx
            .parse::<usize>()
            .map_err(|e| Error::Parse { row: i + 1, msg: format!("index {idx:?}: {e}") })?;
        let val = val
            .parse::<f64>()
            .map_err(|e| Error::Parse { row: i + 1, msg: format!("value {val:?}: {e}") })?;
        entries.push((idx, val));
    }
    if entries.is_empty() {
        return Err(Error::EmptyInput("label file contains no rows".into()));
    }
    LabelConstraints::new(entries, n_vertices)
}

pub fn load_labels(path: impl AsRef<Path>, n_vertices: usize) -> Result<LabelConstraints> {
    parse_labels(&fs::read_to_string(path)?, n_vertices)
}

const LEAF_SIZE: usize = 16;
// Plane pruning slack: `distance` may round a hair below the exact
// single-axis gap, so never prune a node on an equality.
const PRUNE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Exact k-d tree over a borrowed cloud.
#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    cloud: &'a PointCloud,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> NeighborIndex<'a> {
    pub fn new(cloud: &'a PointCloud) -> Self {
        let mut index = Self {
            cloud,
            order: (0..cloud.len()).collect(),
            nodes: Vec::new(),
        };
        let n = cloud.len();
        index.build(0, n);
        index
    }

    pub fn cloud(&self) -> &'a PointCloud {
        self.cloud
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let cloud = self.cloud;
        let slice = &mut self.order[start..end];
        let dim = cloud.dim();
        let (mut axis, mut best) = (0, f64::NEG_INFINITY);
        for a in 0..dim {
            let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = cloud.point(i)[a];
                (lo.min(v), hi.max(v))
            });
            if hi - lo > best {
                best = hi - lo;
                axis = a;
            }
        }
        if best <= 0.0 {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            cloud.point(a)[axis].total_cmp(&cloud.point(b)[axis])
        });
        let value = cloud.point(slice[mid])[axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    fn check(&self, idx: usize) -> Result<()> {
        if idx >= self.len() {
            return Err(Error::IndexOutOfRange { index: idx, len: self.len() });
        }
        Ok(())
    }

    /// All vertices within the closed ball of `radius` around vertex
    /// `center_idx` (itself included), ascending by index.
    pub fn query_ball(&self, center_idx: usize, radius: f64) -> Result<Vec<usize>> {
        self.check(center_idx)?;
        if !(radius >= 0.0) {
            return Err(Error::invalid(format!("radius must be >= 0, got {radius}")));
        }
        let q = self.cloud.point(center_idx);
        let reach = radius * (1.0 + PRUNE_SLACK) + f64::MIN_POSITIVE;
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &j in &self.order[start..end] {
                        if distance(q, self.cloud.point(j)) <= radius {
                            out.push(j);
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    let gap = q[axis] - value;
                    if gap <= reach {
                        stack.push(left);
                    }
                    if -gap <= reach {
                        stack.push(right);
                    }
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// The `k` nearest vertices to `center_idx`: the center first, then the
    /// rest by distance with ties broken toward the smaller index.
    pub fn query_knn(&self, center_idx: usize, k: usize) -> Result<Vec<usize>> {
        self.check(center_idx)?;
        if k == 0 || k > self.len() {
            return Err(Error::invalid(format!(
                "k must lie in [1, {}], got {k}",
                self.len()
            )));
        }
        let q = self.cloud.point(center_idx);
        let want = k - 1;
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(want + 1);
        if want > 0 {
            let mut stack = vec![0usize];
            while let Some(id) = stack.pop() {
                match self.nodes[id] {
                    Node::Leaf { start, end } => {
                        for &j in &self.order[start..end] {
                            if j == center_idx {
                                continue;
                            }
                            let cand = Candidate { dist: distance(q, self.cloud.point(j)), index: j };
                            if heap.len() < want {
                                heap.push(cand);
                            } else if cand < *heap.peek().expect("heap is full") {
                                heap.pop();
                                heap.push(cand);
                            }
                        }
                    }
                    Node::Split { axis, value, left, right } => {
                        let gap = q[axis] - value;
                        let (near, far) = if gap <= 0.0 { (left, right) } else { (right, left) };
                        let bound = if heap.len() < want {
                            f64::INFINITY
                        } else {
                            heap.peek().expect("heap is full").dist * (1.0 + PRUNE_SLACK)
                                + f64::MIN_POSITIVE
                        };
                        // pushed first, popped last
                        if gap.abs() <= bound {
                            stack.push(far);
                        }
                        stack.push(near);
                    }
                }
            }
        }
        let mut rest = heap.into_sorted_vec();
        rest.truncate(want);
        let mut out = Vec::with_capacity(k);
        out.push(center_idx);
        out.extend(rest.into_iter().map(|c| c.index));
        Ok(out)
    }

    /// Distance from `center_idx` to its `k`-th nearest other vertex.
    pub fn kth_neighbor_distance(&self, center_idx: usize, k: usize) -> Result<f64> {
        let nn = self.query_knn(center_idx, k + 1)?;
        Ok(self.cloud.dist(center_idx, nn[k]))
    }

    pub fn all_balls(&self, radius: f64) -> Result<Vec<Vec<usize>>> {
        (0..self.len())
            .into_par_iter()
            .map(|i| self.query_ball(i, radius))
            .collect()
    }

    pub fn all_knn(&self, k: usize) -> Result<Vec<Vec<usize>>> {
        (0..self.len())
            .into_par_iter()
            .map(|i| self.query_knn(i, k))
            .collect()
    }
}
