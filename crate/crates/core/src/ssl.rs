//! One-vs-rest multi-class labeling: one constrained solve per class with
//! one-hot constraints, then a per-vertex argmax.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rng_from_seed, sample_gaussian_clusters, LabelConstraints, PointCloud};
use crate::hypergraph::{build_structure, GraphSpec, Hypergraph, Method, WeightScheme};
use crate::solver::{solve, Diagnostics, SolveOptions};

/// Training labels: the class list and the labeled vertices with their class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabels {
    classes: Vec<usize>,
    assignments: Vec<(usize, usize)>,
}

impl ClassLabels {
    /// `classes` is sorted and deduplicated; every assigned class must be in it.
    pub fn new(classes: Vec<usize>, assignments: Vec<(usize, usize)>, n_vertices: usize) -> Result<Self> {
        let classes: Vec<usize> = classes.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let mut seen = vec![false; n_vertices];
        for &(i, c) in &assignments {
            if i >= n_vertices {
                return Err(Error::IndexOutOfRange { index: i, len: n_vertices });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("vertex {i} is labeled twice")));
            }
            if classes.binary_search(&c).is_err() {
                return Err(Error::invalid(format!("vertex {i} has class {c}, which is not in the class list")));
            }
        }
        Ok(Self { classes, assignments })
    }

    /// Classes are taken from the assignments themselves.
    pub fn from_assignments(assignments: Vec<(usize, usize)>, n_vertices: usize) -> Result<Self> {
        let classes = assignments.iter().map(|&(_, c)| c).collect();
        Self::new(classes, assignments, n_vertices)
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn assignments(&self) -> &[(usize, usize)] {
        &self.assignments
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// One-hot constraints for `class`.
    pub fn indicator(&self, class: usize, n_vertices: usize) -> Result<LabelConstraints> {
        let entries = self
            .assignments
            .iter()
            .map(|&(i, c)| (i, if c == class { 1.0 } else { 0.0 }))
            .collect();
        LabelConstraints::new(entries, n_vertices)
    }
}

/// Parse "index,class" rows.
pub fn parse_class_labels(text: &str, n_vertices: usize) -> Result<ClassLabels> {
    let mut assignments = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse = |s: Option<&str>, what: &str| -> Result<usize> {
            let s = s.ok_or_else(|| Error::Parse { row: row + 1, msg: "expected `index,class`".into() })?;
            s.trim()
                .parse()
                .map_err(|e| Error::Parse { row: row + 1, msg: format!("{what} {s:?}: {e}") })
        };
        let mut parts = line.split(',');
        let i = parse(parts.next(), "index")?;
        let c = parse(parts.next(), "class")?;
        if parts.next().is_some() {
            return Err(Error::Parse { row: row + 1, msg: "expected `index,class`".into() });
        }
        assignments.push((i, c));
    }
    ClassLabels::from_assignments(assignments, n_vertices)
}

pub fn load_class_labels(path: impl AsRef<Path>, n_vertices: usize) -> Result<ClassLabels> {
    parse_class_labels(&fs::read_to_string(path)?, n_vertices)
}

/// `index,class` rows for every vertex.
pub fn predictions_csv(predicted: &[usize]) -> String {
    let mut out = String::from("index,class\n");
    for (i, c) in predicted.iter().enumerate() {
        let _ = writeln!(out, "{i},{c}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsRest {
    pub predicted: Vec<usize>,
    /// Indicator solution per class, in the order of `ClassLabels::classes`.
    pub scores: Vec<Vec<f64>>,
    pub diagnostics: Vec<Diagnostics>,
}

/// Solve one indicator problem per class over `hg` and label each vertex by
/// the argmax; ties go to the smaller class id and training vertices keep
/// their label.
pub fn one_vs_rest(hg: &Hypergraph, labels: &ClassLabels, opts: &SolveOptions) -> Result<OneVsRest> {
    if labels.is_empty() {
        return Err(Error::invalid("one-vs-rest needs at least one labeled vertex"));
    }
    let n = hg.n_vertices();
    for &c in labels.classes() {
        if !labels.assignments().iter().any(|&(_, k)| k == c) {
            warn!("class {c} has no labeled vertex; its indicator is identically zero");
        }
    }
    let solved: Vec<(Vec<f64>, Diagnostics)> = labels
        .classes()
        .par_iter()
        .map(|&c| solve(hg, &labels.indicator(c, n)?, opts, None))
        .collect::<Result<_>>()?;

    let (scores, diagnostics): (Vec<Vec<f64>>, Vec<Diagnostics>) = solved.into_iter().unzip();
    let mut predicted = argmax_classes(labels.classes(), &scores, n);
    for &(i, c) in labels.assignments() {
        predicted[i] = c;
    }
    Ok(OneVsRest { predicted, scores, diagnostics })
}

/// Per-vertex argmax over class scores; `classes` ascending, so the strict
/// comparison keeps the smaller id on ties.
fn argmax_classes(classes: &[usize], scores: &[Vec<f64>], n: usize) -> Vec<usize> {
    (0..n)
        .map(|i| {
            let mut best = (f64::NEG_INFINITY, classes[0]);
            for (&c, u) in classes.iter().zip(scores) {
                if u[i] > best.0 {
                    best = (u[i], c);
                }
            }
            best.1
        })
        .collect()
}

/// Fraction of matching entries, over all vertices or only those without a
/// training label.
pub fn accuracy(predicted: &[usize], truth: &[usize], exclude_training: Option<&ClassLabels>) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch { expected: truth.len(), got: predicted.len() });
    }
    let mut skip = vec![false; truth.len()];
    if let Some(training) = exclude_training {
        for &(i, _) in training.assignments() {
            if i >= skip.len() {
                return Err(Error::IndexOutOfRange { index: i, len: skip.len() });
            }
            skip[i] = true;
        }
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for ((p, t), s) in predicted.iter().zip(truth).zip(&skip) {
        if !s {
            total += 1;
            hits += usize::from(p == t);
        }
    }
    if total == 0 {
        return Err(Error::EmptyInput("no vertices left to evaluate".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no values to summarize".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// Draw `max(round(rate · n), #classes)` training vertices, at least one per
/// class present in `truth`, the rest uniformly among the remaining vertices.
pub fn sample_training_labels(truth: &[usize], rate: f64, seed: u64) -> Result<ClassLabels> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::invalid(format!("labeling rate must lie in (0, 1], got {rate}")));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("no vertices to label".into()));
    }
    let classes: Vec<usize> = truth.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let target = ((rate * truth.len() as f64).round() as usize).max(classes.len());
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.shuffle(&mut rng);
    let mut chosen = vec![false; truth.len()];
    let mut picked = Vec::with_capacity(target);
    for &c in &classes {
        let i = *order.iter().find(|&&i| truth[i] == c).expect("class drawn from truth");
        chosen[i] = true;
        picked.push(i);
    }
    for &i in &order {
        if picked.len() >= target {
            break;
        }
        if !chosen[i] {
            chosen[i] = true;
            picked.push(i);
        }
    }
    picked.sort_unstable();
    let assignments = picked.into_iter().map(|i| (i, truth[i])).collect();
    ClassLabels::new(classes, assignments, truth.len())
}

/// Synthetic clustered data for the SSL comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterTrialConfig {
    pub centers: Vec<Vec<f64>>,
    pub sigma: f64,
    pub per_cluster: usize,
    pub rate: f64,
    pub graph: GraphSpec,
    pub weights: WeightScheme,
    pub solver: SolveOptions,
}

impl Default for ClusterTrialConfig {
    fn default() -> Self {
        Self {
            centers: vec![vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 5.0], vec![5.0, 5.0]],
            sigma: 1.0,
            per_cluster: 500,
            rate: 0.005,
            graph: GraphSpec::Knn(10),
            weights: WeightScheme::SelfTuning { k0: 10 },
            solver: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterTrial {
    pub seed: u64,
    pub n_labeled: usize,
    pub accuracy_gpl: f64,
    pub accuracy_hpl: f64,
}

/// Sample the clusters and labels for `seed`, then score GpL and HpL on the
/// unlabeled vertices.
pub fn run_cluster_trial(cfg: &ClusterTrialConfig, seed: u64) -> Result<ClusterTrial> {
    let (cloud, truth) = sample_gaussian_clusters(&cfg.centers, cfg.sigma, cfg.per_cluster, seed)?;
    let labels = sample_training_labels(&truth, cfg.rate, seed)?;
    let opts = SolveOptions { seed, ..cfg.solver };
    let score = |method| -> Result<f64> {
        let hg = build_structure(&cloud, method, cfg.graph, cfg.weights)?;
        let out = one_vs_rest(&hg, &labels, &opts)?;
        accuracy(&out.predicted, &truth, Some(&labels))
    };
    Ok(ClusterTrial {
        seed,
        n_labeled: labels.len(),
        accuracy_gpl: score(Method::Gpl)?,
        accuracy_hpl: score(Method::Hpl)?,
    })
}

/// Convenience for callers holding a cloud: build the structure and run
/// [`one_vs_rest`].
pub fn classify(
    cloud: &PointCloud,
    labels: &ClassLabels,
    method: Method,
    graph: GraphSpec,
    weights: WeightScheme,
    opts: &SolveOptions,
) -> Result<OneVsRest> {
    let hg = build_structure(cloud, method, graph, weights)?;
    one_vs_rest(&hg, labels, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::build_knn;

    fn two_clusters() -> PointCloud {
        PointCloud::from_scalars(&[0.0, 0.01, 0.02, 1.0, 1.01, 1.02]).unwrap()
    }

    #[test]
    fn separated_clusters() {
        let c = two_clusters();
        let hg = build_knn(&c, 3, WeightScheme::Homogeneous).unwrap();
        let labels = ClassLabels::from_assignments(vec![(0, 0), (4, 1)], 6).unwrap();
        let out = one_vs_rest(&hg, &labels, &SolveOptions::default()).unwrap();
        assert_eq!(out.predicted, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn all_labeled_and_single_class() {
        let c = two_clusters();
        let hg = build_knn(&c, 3, WeightScheme::Homogeneous).unwrap();
        let truth = vec![2, 0, 1, 1, 2, 0];
        let labels = ClassLabels::from_assignments(truth.iter().copied().enumerate().collect(), 6).unwrap();
        assert_eq!(one_vs_rest(&hg, &labels, &SolveOptions::default()).unwrap().predicted, truth);

        let single = ClassLabels::from_assignments(vec![(3, 7)], 6).unwrap();
        assert_eq!(one_vs_rest(&hg, &single, &SolveOptions::default()).unwrap().predicted, vec![7; 6]);

        let empty = ClassLabels::new(vec![0, 1], vec![], 6).unwrap();
        assert!(one_vs_rest(&hg, &empty, &SolveOptions::default()).is_err());
    }

    #[test]
    fn ties_go_to_smaller_id() {
        let scores = vec![vec![0.5, 0.2], vec![0.5, 0.7], vec![0.1, 0.7]];
        assert_eq!(argmax_classes(&[2, 4, 9], &scores, 2), vec![2, 4]);
    }

    #[test]
    fn indicators_stay_in_unit_interval() {
        let c = PointCloud::from_scalars(&[0.0, 0.1, 0.25, 0.3, 0.5, 0.62, 0.7, 0.9, 1.0]).unwrap();
        let hg = build_knn(&c, 3, WeightScheme::Homogeneous).unwrap();
        let labels = ClassLabels::from_assignments(vec![(0, 0), (4, 1), (8, 2)], 9).unwrap();
        let out = one_vs_rest(&hg, &labels, &SolveOptions { tol: 1e-9, epochs: 5000, ..Default::default() }).unwrap();
        for u in &out.scores {
            assert!(u.iter().all(|&v| (-1e-3..=1.0 + 1e-3).contains(&v)), "{u:?}");
        }
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3], None).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 1, 1, 9], &[0, 1, 1, 0, 9], None).unwrap(), 0.8);
        let training = ClassLabels::from_assignments(vec![(4, 9)], 5).unwrap();
        assert_eq!(accuracy(&[0, 1, 1, 1, 9], &[0, 1, 1, 0, 9], Some(&training)).unwrap(), 0.75);
        assert!(accuracy(&[0], &[0, 1], None).is_err());
    }

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[3.0]).unwrap(), (3.0, 0.0));
    }

    #[test]
    fn stratified_sampling() {
        let truth: Vec<usize> = (0..2000).map(|i| i / 500).collect();
        let l = sample_training_labels(&truth, 0.005, 4).unwrap();
        assert_eq!(l.len(), 10);
        for c in 0..4 {
            assert!(l.assignments().iter().any(|&(_, k)| k == c));
        }
        assert!(l.assignments().iter().all(|&(i, c)| truth[i] == c));
        assert_eq!(l, sample_training_labels(&truth, 0.005, 4).unwrap());
        assert_eq!(sample_training_labels(&truth, 0.0001, 1).unwrap().len(), 4);
    }

    #[test]
    fn label_file_round_trip() {
        let l = parse_class_labels("0,1\n3, 0\n\n", 4).unwrap();
        assert_eq!(l.classes(), &[0, 1]);
        assert_eq!(l.assignments(), &[(0, 1), (3, 0)]);
        assert!(parse_class_labels("0,1,2", 4).is_err());
        assert!(parse_class_labels("9,1", 4).is_err());
        assert!(ClassLabels::new(vec![0], vec![(0, 1)], 2).is_err());
        assert_eq!(predictions_csv(&[1, 0]), "index,class\n0,1\n1,0\n");
    }
}
