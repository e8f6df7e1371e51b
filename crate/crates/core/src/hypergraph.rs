//! ε-ball and k-NN hypergraphs, plus the pairwise graph baseline expressed as
//! a hypergraph of two-vertex edges.
//!
//! Every hyperedge stores its members sorted ascending. Pairs inside an edge
//! are enumerated by member position `(a, b)`, `a < b`, which is lexicographic
//! in vertex index; dual vectors and pair weights follow that order.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, PointCloud};

/// Pair weights, written `homogeneous` or `selftuning:K0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightScheme {
    Homogeneous,
    /// `w_ij = exp(-|x_i - x_j|^2 / σ(x_i)^2)` with σ the distance to the
    /// `k0`-th nearest other point.
    SelfTuning { k0: usize },
}

impl std::str::FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad weights {s:?}, expected homogeneous or selftuning:K0"));
        match s.trim().split_once(':') {
            None if s.trim().eq_ignore_ascii_case("homogeneous") => Ok(WeightScheme::Homogeneous),
            Some((kind, k0)) if kind.trim().eq_ignore_ascii_case("selftuning") => {
                let k0: usize = k0.trim().parse().map_err(|_| bad())?;
                if k0 == 0 {
                    return Err(bad());
                }
                Ok(WeightScheme::SelfTuning { k0 })
            }
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightScheme::Homogeneous => f.write_str("homogeneous"),
            WeightScheme::SelfTuning { k0 } => write!(f, "selftuning:{k0}"),
        }
    }
}

impl TryFrom<String> for WeightScheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WeightScheme> for String {
    fn from(w: WeightScheme) -> String {
        w.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum HypergraphKind {
    EpsBall { eps: f64 },
    Knn { k: usize, bar_eps: f64 },
    PairGraph { source: PairSource },
}

/// Neighborhood rule used to build a pairwise graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum PairSource {
    Eps { eps: f64 },
    Knn { k: usize, bar_eps: f64 },
}

impl HypergraphKind {
    pub fn name(&self) -> &'static str {
        match self {
            HypergraphKind::EpsBall { .. } => "eps_ball",
            HypergraphKind::Knn { .. } => "knn",
            HypergraphKind::PairGraph { .. } => "pair_graph",
        }
    }

    /// The radius entering the energy scaling: ε for ε-ball structures and
    /// the effective radius ε̄ for k-NN structures.
    pub fn scale(&self) -> f64 {
        match *self {
            HypergraphKind::EpsBall { eps }
            | HypergraphKind::PairGraph { source: PairSource::Eps { eps } } => eps,
            HypergraphKind::Knn { bar_eps, .. }
            | HypergraphKind::PairGraph { source: PairSource::Knn { bar_eps, .. } } => bar_eps,
        }
    }

    pub fn is_pair_graph(&self) -> bool {
        matches!(self, HypergraphKind::PairGraph { .. })
    }
}

/// Pair weights of one edge.
#[derive(Debug, Clone, PartialEq)]
pub enum PairWeights {
    /// Every pair has weight 1. Large ε-ball edges hold tens of thousands of
    /// pairs, so the homogeneous case is never materialized.
    Uniform,
    /// One weight per pair in the edge's pair order.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperedge {
    centroid: usize,
    members: Vec<usize>,
    weights: PairWeights,
    max_weight: f64,
}

/// Number of unordered pairs among `m` members.
#[inline]
pub fn pair_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

impl Hyperedge {
    /// `members` must be sorted, distinct and contain `centroid`.
    pub fn new(centroid: usize, members: Vec<usize>, weights: PairWeights) -> Result<Self> {
        if !members.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("hyperedge members must be sorted and distinct"));
        }
        if members.binary_search(&centroid).is_err() {
            return Err(Error::invalid(format!("centroid {centroid} is not a member of its edge")));
        }
        let max_weight = match &weights {
            PairWeights::Uniform => 1.0,
            PairWeights::Explicit(w) => {
                if w.len() != pair_count(members.len()) {
                    return Err(Error::ShapeMismatch {
                        expected: pair_count(members.len()),
                        got: w.len(),
                    });
                }
                if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err(Error::invalid("pair weights must be finite and nonnegative"));
                }
                w.iter().copied().fold(0.0, f64::max)
            }
        };
        Ok(Self { centroid, members, weights, max_weight })
    }

    pub fn homogeneous(centroid: usize, members: Vec<usize>) -> Result<Self> {
        Self::new(centroid, members, PairWeights::Uniform)
    }

    pub fn centroid(&self) -> usize {
        self.centroid
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// m_k, the number of rows of this edge's difference operator.
    pub fn pair_count(&self) -> usize {
        pair_count(self.members.len())
    }

    pub fn weights(&self) -> &PairWeights {
        &self.weights
    }

    pub fn max_weight(&self) -> f64 {
        self.max_weight
    }

    /// Weight of the `r`-th pair.
    #[inline]
    pub fn weight(&self, r: usize) -> f64 {
        match &self.weights {
            PairWeights::Uniform => 1.0,
            PairWeights::Explicit(w) => w[r],
        }
    }

    /// Pairs `(i, j, weight)` in edge order, as vertex indices.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let m = &self.members;
        (0..m.len())
            .flat_map(move |a| (a + 1..m.len()).map(move |b| (a, b)))
            .enumerate()
            .map(move |(r, (a, b))| (m[a], m[b], self.weight(r)))
    }

    /// Upper bound on `||A_k||^2` for rows `w_ij^{1/p} (e_i - e_j)`.
    ///
    /// `A^T A` is the Laplacian of the complete graph on the members with
    /// weights `w^{2/p}`, dominated by `max w^{2/p} (m I - 1 1^T)` whose top
    /// eigenvalue is `m`.
    pub fn op_norm_sq(&self, p: f64) -> f64 {
        if self.members.len() < 2 {
            return 0.0;
        }
        self.members.len() as f64 * self.max_weight.powf(2.0 / p)
    }
}

/// Free-function form of [`Hyperedge::op_norm_sq`].
pub fn edge_operator_norm_sq(edge: &Hyperedge, p: f64) -> f64 {
    edge.op_norm_sq(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    n_vertices: usize,
    edges: Vec<Hyperedge>,
    kind: HypergraphKind,
    scheme: WeightScheme,
}

impl Hypergraph {
    pub fn new(
        n_vertices: usize,
        edges: Vec<Hyperedge>,
        kind: HypergraphKind,
        scheme: WeightScheme,
    ) -> Result<Self> {
        for e in &edges {
            if let Some(&last) = e.members.last() {
                if last >= n_vertices {
                    return Err(Error::IndexOutOfRange { index: last, len: n_vertices });
                }
            }
        }
        Ok(Self { n_vertices, edges, kind, scheme })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> &Hyperedge {
        &self.edges[k]
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn kind(&self) -> HypergraphKind {
        self.kind
    }

    pub fn scheme(&self) -> WeightScheme {
        self.scheme
    }

    pub fn scale(&self) -> f64 {
        self.kind.scale()
    }

    pub fn total_pairs(&self) -> usize {
        self.edges.iter().map(Hyperedge::pair_count).sum()
    }

    pub fn max_op_norm_sq(&self, p: f64) -> f64 {
        self.edges.iter().map(|e| e.op_norm_sq(p)).fold(0.0, f64::max)
    }

    pub fn is_connected(&self) -> bool {
        is_connected(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&HypergraphJson::from(self))?)
    }
}

/// Debug/diff serialization: `{n, kind, scale, edges: [{centroid, members, pair_weights}]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HypergraphJson {
    pub n: usize,
    pub kind: String,
    pub scale: f64,
    pub edges: Vec<HyperedgeJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HyperedgeJson {
    pub centroid: usize,
    pub members: Vec<usize>,
    pub pair_weights: Vec<f64>,
}

impl From<&Hypergraph> for HypergraphJson {
    fn from(hg: &Hypergraph) -> Self {
        Self {
            n: hg.n_vertices,
            kind: hg.kind.name().to_string(),
            scale: hg.scale(),
            edges: hg
                .edges
                .iter()
                .map(|e| HyperedgeJson {
                    centroid: e.centroid,
                    members: e.members.clone(),
                    pair_weights: e.pairs().map(|(_, _, w)| w).collect(),
                })
                .collect(),
        }
    }
}

/// Volume of the unit ball in `R^d`, `π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // Γ(d/2 + 1) at integers and half-integers
    let gamma = if d % 2 == 0 {
        (1..=d / 2).map(|i| i as f64).product::<f64>()
    } else {
        let mut g = PI.sqrt() / 2.0; // Γ(3/2)
        let mut x = 1.5;
        while x < d as f64 / 2.0 + 1.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    };
    PI.powf(d as f64 / 2.0) / gamma
}

/// Effective k-NN radius `ε̄ = (k / (α_d n))^{1/d}`.
pub fn bar_epsilon(k: usize, n: usize, d: usize) -> Result<f64> {
    if d == 0 || n == 0 || k == 0 || k > n {
        return Err(Error::invalid(format!("bar_epsilon needs 1 <= k <= n and d >= 1 (k={k}, n={n}, d={d})")));
    }
    Ok((k as f64 / (unit_ball_volume(d) * n as f64)).powf(1.0 / d as f64))
}

/// Connectivity rate of random geometric graphs in dimension `d`.
pub fn delta_n(n: usize, d: usize) -> Result<f64> {
    if n < 3 || d == 0 {
        return Err(Error::invalid(format!("delta_n needs n >= 3 and d >= 1 (n={n}, d={d})")));
    }
    let nf = n as f64;
    let ln = nf.ln();
    Ok(match d {
        1 => (ln.ln() / nf).sqrt(),
        2 => ln.powf(0.75) / nf.sqrt(),
        _ => (ln / nf).powf(1.0 / d as f64),
    })
}

/// Per-vertex scales of the self-tuning weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTuning {
    /// `None` when every other point coincides with the vertex.
    sigma: Vec<Option<f64>>,
}

impl SelfTuning {
    pub fn sigma(&self, i: usize) -> Option<f64> {
        self.sigma[i]
    }

    /// Row-indexed weight `exp(-|x_i - x_j|^2 / σ(x_i)^2)`.
    pub fn weight(&self, cloud: &PointCloud, i: usize, j: usize) -> f64 {
        let d = cloud.dist(i, j);
        match self.sigma[i] {
            Some(s) if d > 0.0 => (-(d * d) / (s * s)).exp(),
            _ => 1.0,
        }
    }

    /// Symmetric weight of an unordered pair: the mean of both row weights, so
    /// an ordered-pair sum over the graph equals twice the unordered sum.
    pub fn pair_weight(&self, cloud: &PointCloud, i: usize, j: usize) -> f64 {
        0.5 * (self.weight(cloud, i, j) + self.weight(cloud, j, i))
    }
}

pub fn self_tuning_weights(cloud: &PointCloud, index: &NeighborIndex<'_>, k0: usize) -> Result<SelfTuning> {
    let n = cloud.len();
    if k0 == 0 || k0 >= n {
        return Err(Error::invalid(format!("self-tuning k0 must lie in [1, {}), got {k0}", n)));
    }
    let sigma = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = index.kth_neighbor_distance(i, k0)?;
            if s > 0.0 {
                return Ok(Some(s));
            }
            // duplicates: smallest positive distance, if any
            let fallback = (0..n)
                .map(|j| cloud.dist(i, j))
                .filter(|&d| d > 0.0)
                .fold(f64::INFINITY, f64::min);
            Ok(fallback.is_finite().then_some(fallback))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SelfTuning { sigma })
}

fn edge_weights(
    cloud: &PointCloud,
    members: &[usize],
    tuning: Option<&SelfTuning>,
) -> PairWeights {
    match tuning {
        None => PairWeights::Uniform,
        Some(t) => {
            let mut w = Vec::with_capacity(pair_count(members.len()));
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    w.push(t.pair_weight(cloud, i, j));
                }
            }
            PairWeights::Explicit(w)
        }
    }
}

fn tuning_for(
    cloud: &PointCloud,
    index: &NeighborIndex<'_>,
    scheme: WeightScheme,
) -> Result<Option<SelfTuning>> {
    match scheme {
        WeightScheme::Homogeneous => Ok(None),
        WeightScheme::SelfTuning { k0 } => self_tuning_weights(cloud, index, k0).map(Some),
    }
}

fn warn_structure(hg: &Hypergraph, d: usize) {
    if !hg.is_connected() {
        warn!(
            "{} hypergraph at scale {} is disconnected",
            hg.kind.name(),
            hg.scale()
        );
    }
    if let Ok(delta) = delta_n(hg.n_vertices, d) {
        if hg.scale() <= delta {
            warn!(
                "scale {} is below the connectivity rate delta_n = {delta}",
                hg.scale()
            );
        }
    }
}

pub fn build_eps_ball(cloud: &PointCloud, eps: f64, scheme: WeightScheme) -> Result<Hypergraph> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let index = NeighborIndex::new(cloud);
    let tuning = tuning_for(cloud, &index, scheme)?;
    let balls = index.all_balls(eps)?;
    let edges = balls
        .into_par_iter()
        .enumerate()
        .map(|(k, members)| {
            let w = edge_weights(cloud, &members, tuning.as_ref());
            Hyperedge::new(k, members, w)
        })
        .collect::<Result<Vec<_>>>()?;
    let hg = Hypergraph::new(cloud.len(), edges, HypergraphKind::EpsBall { eps }, scheme)?;
    warn_structure(&hg, cloud.dim());
    Ok(hg)
}

pub fn build_knn(cloud: &PointCloud, k: usize, scheme: WeightScheme) -> Result<Hypergraph> {
    let n = cloud.len();
    if k < 2 || k > n {
        return Err(Error::invalid(format!("k must lie in [2, {n}], got {k}")));
    }
    let index = NeighborIndex::new(cloud);
    let tuning = tuning_for(cloud, &index, scheme)?;
    let lists = index.all_knn(k)?;
    let edges = lists
        .into_par_iter()
        .enumerate()
        .map(|(c, mut members)| {
            members.sort_unstable();
            let w = edge_weights(cloud, &members, tuning.as_ref());
            Hyperedge::new(c, members, w)
        })
        .collect::<Result<Vec<_>>>()?;
    let bar_eps = bar_epsilon(k, n, cloud.dim())?;
    let hg = Hypergraph::new(n, edges, HypergraphKind::Knn { k, bar_eps }, scheme)?;
    warn_structure(&hg, cloud.dim());
    Ok(hg)
}

/// Neighborhood rule for [`build_pair_graph`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairRule {
    Eps(f64),
    Knn(usize),
}

/// The pairwise graph as size-2 hyperedges, one per unordered neighbor pair.
/// k-NN lists are symmetrized: a pair appears if either endpoint lists the other.
pub fn build_pair_graph(cloud: &PointCloud, rule: PairRule, scheme: WeightScheme) -> Result<Hypergraph> {
    let n = cloud.len();
    let index = NeighborIndex::new(cloud);
    let (lists, source) = match rule {
        PairRule::Eps(eps) => {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::invalid(format!("eps must be positive, got {eps}")));
            }
            (index.all_balls(eps)?, PairSource::Eps { eps })
        }
        PairRule::Knn(k) => {
            if k < 2 || k > n {
                return Err(Error::invalid(format!("k must lie in [2, {n}], got {k}")));
            }
            let bar_eps = bar_epsilon(k, n, cloud.dim())?;
            (index.all_knn(k)?, PairSource::Knn { k, bar_eps })
        }
    };
    let tuning = tuning_for(cloud, &index, scheme)?;
    let mut pairs = BTreeSet::new();
    for (i, list) in lists.iter().enumerate() {
        for &j in list {
            if j != i {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(i, j)| {
            let w = match &tuning {
                None => PairWeights::Uniform,
                Some(t) => PairWeights::Explicit(vec![t.pair_weight(cloud, i, j)]),
            };
            Hyperedge::new(i, vec![i, j], w)
        })
        .collect::<Result<Vec<_>>>()?;
    let hg = Hypergraph::new(n, edges, HypergraphKind::PairGraph { source }, scheme)?;
    warn_structure(&hg, cloud.dim());
    Ok(hg)
}

/// Whether the union of the cliques spanned by all edges connects every vertex.
pub fn is_connected(hg: &Hypergraph) -> bool {
    let n = hg.n_vertices;
    if n <= 1 {
        return true;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for e in &hg.edges {
        for w in e.members.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
    }
    components == 1
}

/// Regularizer family: pairwise graph p-Laplacian or hypergraph p-Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gpl,
    Hpl,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gpl => "gpl",
            Method::Hpl => "hpl",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gpl" => Ok(Method::Gpl),
            "hpl" => Ok(Method::Hpl),
            other => Err(Error::invalid(format!("unknown method {other:?}, expected gpl or hpl"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Neighborhood construction, written `eps:VALUE` or `knn:K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GraphSpec {
    Eps(f64),
    Knn(usize),
}

impl std::str::FromStr for GraphSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad graph spec {s:?}, expected eps:VALUE or knn:K"));
        let (kind, val) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "eps" => {
                let eps: f64 = val.trim().parse().map_err(|_| bad())?;
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(bad());
                }
                Ok(GraphSpec::Eps(eps))
            }
            "knn" => Ok(GraphSpec::Knn(val.trim().parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphSpec::Eps(e) => write!(f, "eps:{e}"),
            GraphSpec::Knn(k) => write!(f, "knn:{k}"),
        }
    }
}

impl TryFrom<String> for GraphSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GraphSpec> for String {
    fn from(g: GraphSpec) -> String {
        g.to_string()
    }
}

impl From<GraphSpec> for PairRule {
    fn from(g: GraphSpec) -> Self {
        match g {
            GraphSpec::Eps(e) => PairRule::Eps(e),
            GraphSpec::Knn(k) => PairRule::Knn(k),
        }
    }
}

/// The structure a method regularizes over: the pair graph for GpL, the
/// ε-ball or k-NN hypergraph for HpL.
pub fn build_structure(
    cloud: &PointCloud,
    method: Method,
    graph: GraphSpec,
    scheme: WeightScheme,
) -> Result<Hypergraph> {
    match (method, graph) {
        (Method::Gpl, g) => build_pair_graph(cloud, g.into(), scheme),
        (Method::Hpl, GraphSpec::Eps(eps)) => build_eps_ball(cloud, eps, scheme),
        (Method::Hpl, GraphSpec::Knn(k)) => build_knn(cloud, k, scheme),
    }
}
