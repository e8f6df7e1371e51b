//! One-dimensional interpolation from a handful of labels, comparing the
//! graph and hypergraph regularizers on the same sampled cloud.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_uniform_1d, LabelConstraints, NeighborIndex, PointCloud};
use crate::hypergraph::{build_structure, is_connected, GraphSpec, Method, WeightScheme};
use crate::solver::{solve, Diagnostics, SolveOptions};

pub const DEFAULT_N: usize = 1280;
pub const DEFAULT_LABEL_COUNT: usize = 6;

/// Six labels at the samples nearest to `x = 1/12, 3/12, …, 11/12`, valued
/// `sin(2π x)` at the chosen sample.
pub fn default_labels(cloud: &PointCloud) -> Result<LabelConstraints> {
    if cloud.dim() != 1 {
        return Err(Error::invalid("default labels need a one-dimensional cloud"));
    }
    let xs = cloud.coords();
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(DEFAULT_LABEL_COUNT);
    for k in 0..DEFAULT_LABEL_COUNT {
        let target = (2 * k + 1) as f64 / (2 * DEFAULT_LABEL_COUNT) as f64;
        let i = (0..xs.len())
            .filter(|i| !entries.iter().any(|&(j, _)| j == *i))
            .min_by(|&a, &b| (xs[a] - target).abs().total_cmp(&(xs[b] - target).abs()))
            .ok_or_else(|| Error::invalid("cloud has fewer points than default labels"))?;
        entries.push((i, (2.0 * PI * xs[i]).sin()));
    }
    LabelConstraints::new(entries, cloud.len())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Largest gap between a labeled value and the median of `u` over the labeled
/// point's neighbors (the 2ε-ball, or its 2k nearest neighbors), itself excluded.
pub fn spike_index(
    cloud: &PointCloud,
    u: &[f64],
    labels: &LabelConstraints,
    graph: GraphSpec,
) -> Result<f64> {
    if u.len() != cloud.len() {
        return Err(Error::ShapeMismatch { expected: cloud.len(), got: u.len() });
    }
    let index = NeighborIndex::new(cloud);
    let mut worst = 0.0f64;
    for &(i, _) in labels.entries() {
        let neighbors = match graph {
            GraphSpec::Eps(eps) => index.query_ball(i, 2.0 * eps)?,
            GraphSpec::Knn(k) => index.query_knn(i, (2 * k + 1).min(cloud.len()))?,
        };
        let mut vals: Vec<f64> = neighbors.into_iter().filter(|&j| j != i).map(|j| u[j]).collect();
        if vals.is_empty() {
            continue;
        }
        worst = worst.max((u[i] - median(&mut vals)).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Interp1dConfig {
    pub n: usize,
    /// Seeds both the sampling and the solver.
    pub seed: u64,
    pub graph: GraphSpec,
    pub solver: SolveOptions,
}

impl Default for Interp1dConfig {
    fn default() -> Self {
        Self { n: DEFAULT_N, seed: 0, graph: GraphSpec::Eps(0.048), solver: SolveOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub u: Vec<f64>,
    pub spike_index: f64,
    pub connected: bool,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interp1dResult {
    pub x: Vec<f64>,
    pub labels: LabelConstraints,
    pub gpl: MethodRun,
    pub hpl: MethodRun,
}

impl Interp1dResult {
    /// `index,x,u_gpl,u_hpl` rows in vertex order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,x,u_gpl,u_hpl\n");
        for (i, x) in self.x.iter().enumerate() {
            let _ = writeln!(out, "{i},{x},{},{}", self.gpl.u[i], self.hpl.u[i]);
        }
        out
    }
}

/// Solve one method on a cloud; also reports whether the structure is connected.
pub fn solve_method(
    cloud: &PointCloud,
    labels: &LabelConstraints,
    method: Method,
    graph: GraphSpec,
    scheme: WeightScheme,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, Diagnostics, bool)> {
    let hg = build_structure(cloud, method, graph, scheme)?;
    let (u, diag) = solve(&hg, labels, opts, None)?;
    Ok((u, diag, is_connected(&hg)))
}

/// Sample the cloud, then solve GpL and HpL with identical labels.
pub fn run_interp1d(cfg: &Interp1dConfig, labels: Option<LabelConstraints>) -> Result<Interp1dResult> {
    let cloud = sample_uniform_1d(cfg.n, cfg.seed)?;
    let labels = match labels {
        Some(l) => l,
        None => default_labels(&cloud)?,
    };
    let opts = SolveOptions { seed: cfg.seed, ..cfg.solver };
    let run_one = |method| -> Result<MethodRun> {
        let (u, diagnostics, connected) =
            solve_method(&cloud, &labels, method, cfg.graph, WeightScheme::Homogeneous, &opts)?;
        let spike = spike_index(&cloud, &u, &labels, cfg.graph)?;
        Ok(MethodRun { u, spike_index: spike, connected, diagnostics })
    };
    let (gpl, hpl) = rayon::join(|| run_one(Method::Gpl), || run_one(Method::Hpl));
    Ok(Interp1dResult { x: cloud.coords().to_vec(), labels, gpl: gpl?, hpl: hpl? })
}
