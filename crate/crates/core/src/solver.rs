//! Stochastic primal-dual hybrid gradient (serial sampling) for
//!
//! ```text
//! min_u  Σ_k g(A_k u) + I_O(u),     g(β) = (max|β|)^p / p,
//! ```
//!
//! where row `(i, j)` of `A_k` is `w_ij^{1/p} (e_i - e_j)` over the pairs of
//! hyperedge `k` and `I_O` pins the labeled vertices.
//!
//! Each iteration takes a full primal step `u ← proj_O(u - τ z)` with
//! `z = Σ_k A_kᵀ ᾱ_k`, updates the dual block of one sampled edge through the
//! exact prox of `σ g*`, and extrapolates that block by `1/p_i`. Only one dual
//! block changes per iteration, so `z` is maintained incrementally and the
//! primal step is applied lazily: a coordinate whose `z` entry has not changed
//! since it was last touched moves by `-τ z_j` per elapsed step, which is
//! settled in closed form when the coordinate is next read or its `z` entry
//! written. An iteration therefore costs `O(m_k)` rather than `O(n + Σ m_k)`.

use log::{info, warn};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::objective;
use crate::error::{Error, Result};
use crate::geometry::{rng_from_seed, LabelConstraints, SeededRng};
use crate::hypergraph::{Hyperedge, Hypergraph, PairWeights};
use crate::prox::{g_conj, prox_threshold, soft_threshold, ProxParams};

pub const DEFAULT_SAFETY: f64 = 0.99;
pub const DEFAULT_EPOCHS: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default `τ/σ` when splitting the admissible step product by hand.
pub const DEFAULT_STEP_RATIO: f64 = 1.0;
/// Numerator of the size-aware split `τ/σ = STEP_BALANCE / n_edges`.
pub const STEP_BALANCE: f64 = 3.0;

/// Rows `w_ij^{1/p} (u_i - u_j)` of `A_k u`, in the edge's pair order.
pub fn apply_edge_op(u: &[f64], edge: &Hyperedge, p: f64) -> Result<Vec<f64>> {
    if let Some(&last) = edge.members().last() {
        if last >= u.len() {
            return Err(Error::ShapeMismatch { expected: last + 1, got: u.len() });
        }
    }
    Ok(edge
        .pairs()
        .map(|(i, j, w)| w.powf(1.0 / p) * (u[i] - u[j]))
        .collect())
}

/// `accumulator += scale * A_kᵀ α`.
pub fn apply_edge_op_adjoint(
    alpha: &[f64],
    edge: &Hyperedge,
    p: f64,
    accumulator: &mut [f64],
    scale: f64,
) -> Result<()> {
    if alpha.len() != edge.pair_count() {
        return Err(Error::ShapeMismatch { expected: edge.pair_count(), got: alpha.len() });
    }
    if let Some(&last) = edge.members().last() {
        if last >= accumulator.len() {
            return Err(Error::ShapeMismatch { expected: last + 1, got: accumulator.len() });
        }
    }
    for ((i, j, w), a) in edge.pairs().zip(alpha) {
        let v = scale * w.powf(1.0 / p) * a;
        accumulator[i] += v;
        accumulator[j] -= v;
    }
    Ok(())
}

/// Constrained problem over a hypergraph.
#[derive(Debug, Clone)]
pub struct SaddleProblem<'a> {
    hypergraph: &'a Hypergraph,
    constraints: LabelConstraints,
    p: f64,
    /// `w^{1/p}` per pair; `None` for homogeneous edges.
    row_scales: Vec<Option<Vec<f64>>>,
    offsets: Vec<usize>,
}

impl<'a> SaddleProblem<'a> {
    pub fn new(hypergraph: &'a Hypergraph, constraints: LabelConstraints, p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!("exponent p must be >= 1, got {p}")));
        }
        if hypergraph.n_vertices() == 0 {
            return Err(Error::EmptyInput("hypergraph has no vertices".into()));
        }
        if let Some(i) = constraints.indices().find(|&i| i >= hypergraph.n_vertices()) {
            return Err(Error::IndexOutOfRange { index: i, len: hypergraph.n_vertices() });
        }
        let row_scales = hypergraph
            .edges()
            .iter()
            .map(|e| match e.weights() {
                PairWeights::Uniform => None,
                PairWeights::Explicit(w) => Some(w.iter().map(|x| x.powf(1.0 / p)).collect()),
            })
            .collect();
        let mut offsets = Vec::with_capacity(hypergraph.n_edges() + 1);
        let mut acc = 0;
        offsets.push(0);
        for e in hypergraph.edges() {
            acc += e.pair_count();
            offsets.push(acc);
        }
        Ok(Self { hypergraph, constraints, p, row_scales, offsets })
    }

    pub fn hypergraph(&self) -> &'a Hypergraph {
        self.hypergraph
    }

    pub fn constraints(&self) -> &LabelConstraints {
        &self.constraints
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n_vertices(&self) -> usize {
        self.hypergraph.n_vertices()
    }

    pub fn n_edges(&self) -> usize {
        self.hypergraph.n_edges()
    }

    fn dual_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    fn total_dual_len(&self) -> usize {
        *self.offsets.last().expect("offsets start with 0")
    }

    /// `out = α + σ A_k u` for edge `k`.
    fn forward_into(&self, k: usize, u: &[f64], sigma: f64, alpha: &[f64], out: &mut [f64]) {
        let m = self.hypergraph.edge(k).members();
        let scales = self.row_scales[k].as_deref();
        let mut start = 0;
        for (a, &ia) in m.iter().enumerate() {
            let ua = u[ia];
            let tail = &m[a + 1..];
            let end = start + tail.len();
            let rows = out[start..end].iter_mut().zip(&alpha[start..end]).zip(tail);
            match scales {
                None => rows.for_each(|((o, &al), &mb)| *o = al + sigma * (ua - u[mb])),
                Some(s) => rows
                    .zip(&s[start..end])
                    .for_each(|(((o, &al), &mb), &w)| *o = al + sigma * w * (ua - u[mb])),
            }
            start = end;
        }
    }

    /// `acc += scale * A_kᵀ v`.
    fn adjoint_into(&self, k: usize, v: &[f64], scale: f64, acc: &mut [f64]) {
        let m = self.hypergraph.edge(k).members();
        let scales = self.row_scales[k].as_deref();
        let mut r = 0;
        for a in 0..m.len() {
            let mut sum_a = 0.0;
            for &mb in &m[a + 1..] {
                let s = scales.map_or(1.0, |s| s[r]);
                let x = scale * s * v[r];
                sum_a += x;
                acc[mb] -= x;
                r += 1;
            }
            acc[m[a]] += sum_a;
        }
    }

    /// `min_i p_i / ‖A_i‖²` over edges with at least one pair.
    fn step_bound(&self, probabilities: &[f64]) -> f64 {
        self.hypergraph
            .edges()
            .iter()
            .zip(probabilities)
            .map(|(e, &pi)| pi / e.op_norm_sq(self.p))
            .filter(|b| b.is_finite())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Step sizes from the sufficient condition `στ <= safety · min_i p_i/‖A_i‖²`
/// with uniform `p_i = 1/n_edges`, split as `τ = ratio · σ`.
pub fn default_steps(hg: &Hypergraph, p: f64, safety: f64, ratio: f64) -> Result<(f64, f64)> {
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::invalid(format!("safety must lie in (0, 1), got {safety}")));
    }
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::invalid(format!("step ratio must be positive, got {ratio}")));
    }
    let norm = hg.max_op_norm_sq(p);
    let product = if norm > 0.0 {
        safety / (hg.n_edges() as f64 * norm)
    } else {
        1.0
    };
    let sigma = (product / ratio).sqrt();
    Ok((ratio * sigma, sigma))
}

/// Size-aware `τ/σ`: uniform sampling picks each edge once per `n_edges`
/// iterations while the primal moves every iteration, so the primal step is
/// shrunk in proportion.
pub fn balanced_ratio(hg: &Hypergraph) -> f64 {
    STEP_BALANCE / hg.n_edges().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tau: f64,
    pub sigma: f64,
    /// Per-edge sampling weights; `None` samples edges uniformly.
    pub probabilities: Option<Vec<f64>>,
    pub safety: f64,
    /// One epoch is `n_edges` dual updates.
    pub epochs: usize,
    /// Stop once the largest coordinate change over an epoch is at most
    /// `tol · (1 + ‖u‖∞)`.
    pub tol: f64,
    pub seed: u64,
}

impl SolverConfig {
    /// Defaults for `hg`: uniform sampling, steps at 0.99 of the bound.
    pub fn for_hypergraph(hg: &Hypergraph, p: f64, ratio: f64) -> Result<Self> {
        let (tau, sigma) = default_steps(hg, p, DEFAULT_SAFETY, ratio)?;
        Ok(Self {
            tau,
            sigma,
            probabilities: None,
            safety: DEFAULT_SAFETY,
            epochs: DEFAULT_EPOCHS,
            tol: DEFAULT_TOL,
            seed: 0,
        })
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Sampling probabilities normalized to sum to one.
    pub fn probabilities(&self, n_edges: usize) -> Result<Vec<f64>> {
        match &self.probabilities {
            None => Ok(vec![1.0 / n_edges as f64; n_edges]),
            Some(w) => {
                if w.len() != n_edges {
                    return Err(Error::ShapeMismatch { expected: n_edges, got: w.len() });
                }
                if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(Error::invalid("sampling probabilities must be strictly positive"));
                }
                let total: f64 = w.iter().sum();
                Ok(w.iter().map(|x| x / total).collect())
            }
        }
    }

    pub fn validate(&self, problem: &SaddleProblem<'_>) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite() && self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "step sizes must be positive (tau={}, sigma={})",
                self.tau, self.sigma
            )));
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(Error::invalid(format!("safety must lie in (0, 1), got {}", self.safety)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid(format!("tolerance must be >= 0, got {}", self.tol)));
        }
        if problem.n_edges() == 0 {
            return Ok(());
        }
        let probs = self.probabilities(problem.n_edges())?;
        let bound = problem.step_bound(&probs);
        let product = self.sigma * self.tau;
        // relative slack absorbs the rounding of sqrt in default_steps
        if product > self.safety * bound * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "sigma*tau = {product:e} exceeds {} * min_i p_i/|A_i|^2 = {:e}",
                self.safety,
                self.safety * bound
            )));
        }
        Ok(())
    }
}

/// One changed row of a dual block: pair row `r` of the block, its vertices,
/// the change, and the row scale `w^{1/p}`.
#[derive(Debug, Clone, Copy)]
struct SparseRow {
    r: usize,
    i: usize,
    j: usize,
    value: f64,
    scale: f64,
}

/// The nonzero rows of a change to one dual block. The prox output is usually
/// sparse, so the change is too, and `z` is updated only where it moves.
#[derive(Debug, Clone, Default)]
struct SparseBlock {
    edge: usize,
    rows: Vec<SparseRow>,
}

/// Primal iterate, dual blocks and the running adjoint `z = Σ_k A_kᵀ ᾱ_k`.
///
/// `ᾱ` differs from `α` only on the block picked in the latest iteration, so
/// it is stored as that one block's offset.
#[derive(Debug, Clone)]
pub struct SaddleState {
    u_base: Vec<f64>,
    synced_at: Vec<u64>,
    time: u64,
    tau: f64,
    fixed: Vec<bool>,
    targets: Vec<(usize, f64)>,
    projected: bool,
    alphas: Vec<f64>,
    z: Vec<f64>,
    /// `ᾱ - α`, nonzero only on the block picked in the latest iteration.
    extra: SparseBlock,
    /// `α_new - α_old` from the latest dual step.
    pending: SparseBlock,
    scratch: Vec<f64>,
    iteration: u64,
}

impl SaddleState {
    /// Zero duals; `u` starts at `initial` (or zero) and is projected onto the
    /// constraints by the first primal step.
    pub fn new(problem: &SaddleProblem<'_>, initial: Option<&[f64]>) -> Result<Self> {
        let n = problem.n_vertices();
        let u = match initial {
            Some(u) if u.len() != n => return Err(Error::ShapeMismatch { expected: n, got: u.len() }),
            Some(u) => u.to_vec(),
            None => vec![0.0; n],
        };
        let mut fixed = vec![false; n];
        for i in problem.constraints.indices() {
            fixed[i] = true;
        }
        Ok(Self {
            u_base: u,
            synced_at: vec![0; n],
            time: 0,
            tau: 0.0,
            fixed,
            targets: problem.constraints.entries().to_vec(),
            projected: false,
            alphas: vec![0.0; problem.total_dual_len()],
            z: vec![0.0; n],
            extra: SparseBlock::default(),
            pending: SparseBlock::default(),
            scratch: Vec::new(),
            iteration: 0,
        })
    }

    #[inline]
    fn sync(&mut self, j: usize) {
        let lag = self.time - self.synced_at[j];
        if lag > 0 {
            if !self.fixed[j] {
                self.u_base[j] -= self.tau * lag as f64 * self.z[j];
            }
            self.synced_at[j] = self.time;
        }
    }

    fn sync_members(&mut self, edge: &Hyperedge) {
        for &j in edge.members() {
            self.sync(j);
        }
    }

    fn sync_all(&mut self) {
        for j in 0..self.u_base.len() {
            self.sync(j);
        }
    }

    /// Current primal iterate.
    pub fn u(&self) -> Vec<f64> {
        (0..self.u_base.len())
            .map(|j| {
                let lag = self.time - self.synced_at[j];
                if lag > 0 && !self.fixed[j] {
                    self.u_base[j] - self.tau * lag as f64 * self.z[j]
                } else {
                    self.u_base[j]
                }
            })
            .collect()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn alpha<'s>(&'s self, problem: &SaddleProblem<'_>, k: usize) -> &'s [f64] {
        &self.alphas[problem.dual_range(k)]
    }

    pub fn alpha_bar(&self, problem: &SaddleProblem<'_>, k: usize) -> Vec<f64> {
        let mut out = self.alpha(problem, k).to_vec();
        if self.extra.edge == k {
            for row in &self.extra.rows {
                out[row.r] += row.value;
            }
        }
        out
    }

    /// `u ← proj_O(u - τ z)`.
    pub fn primal_step(&mut self, tau: f64) {
        if tau != self.tau {
            self.sync_all();
            self.tau = tau;
        }
        self.time += 1;
        if !self.projected {
            for &(i, y) in &self.targets {
                self.u_base[i] = y;
                self.synced_at[i] = self.time;
            }
            self.projected = true;
        }
    }

    /// Prox update of one sampled dual block; returns the edge index.
    pub fn dual_step(
        &mut self,
        problem: &SaddleProblem<'_>,
        sigma: f64,
        picked: usize,
    ) -> Result<usize> {
        let edge = problem.hypergraph.edge(picked);
        let range = problem.dual_range(picked);
        self.pending.edge = picked;
        self.pending.rows.clear();
        if range.is_empty() {
            return Ok(picked);
        }
        self.sync_members(edge);
        let params = ProxParams::new(sigma, problem.p)?;
        let mut beta = std::mem::take(&mut self.scratch);
        beta.resize(range.len(), 0.0);
        problem.forward_into(picked, &self.u_base, sigma, &self.alphas[range.clone()], &mut beta);
        let lambda = prox_threshold(&beta, params);

        let alpha = &mut self.alphas[range];
        let members = edge.members();
        let scales = problem.row_scales[picked].as_deref();
        let mut start = 0;
        for (a, &i) in members.iter().enumerate() {
            let tail = &members[a + 1..];
            let end = start + tail.len();
            let rows = alpha[start..end].iter_mut().zip(&beta[start..end]).zip(tail);
            for (offset, ((old, &x), &j)) in rows.enumerate() {
                // most rows stay at zero, so test that first
                if *old == 0.0 && x.abs() <= lambda {
                    continue;
                }
                let new = soft_threshold(x, lambda);
                let change = new - *old;
                if change != 0.0 {
                    *old = new;
                    let r = start + offset;
                    let scale = scales.map_or(1.0, |s| s[r]);
                    self.pending.rows.push(SparseRow { r, i, j, value: change, scale });
                }
            }
            start = end;
        }
        self.scratch = beta;
        Ok(picked)
    }

    fn add_sparse_adjoint(&mut self, rows: &[SparseRow], factor: f64) {
        for row in rows {
            self.sync(row.i);
            self.sync(row.j);
            let x = factor * row.scale * row.value;
            self.z[row.i] += x;
            self.z[row.j] -= x;
        }
    }

    /// `ᾱ_i ← α_i + (1/p_i)(α_i - α_i^old)` for the picked block and `ᾱ_j ← α_j`
    /// elsewhere, with `z` updated by the change in `ᾱ`.
    pub fn extrapolate(&mut self, _problem: &SaddleProblem<'_>, picked: usize, probability: f64) {
        let mut extra = std::mem::take(&mut self.extra);
        self.add_sparse_adjoint(&extra.rows, -1.0);
        let mut pending = std::mem::take(&mut self.pending);
        debug_assert!(pending.rows.is_empty() || pending.edge == picked);
        let theta = 1.0 / probability;
        self.add_sparse_adjoint(&pending.rows, 1.0 + theta);
        extra.edge = picked;
        extra.rows.clear();
        extra
            .rows
            .extend(pending.rows.iter().map(|row| SparseRow { value: theta * row.value, ..*row }));
        self.extra = extra;
        pending.rows.clear();
        self.pending = pending;
    }

    /// One SPDHG iteration with an externally chosen edge.
    pub fn step(&mut self, problem: &SaddleProblem<'_>, tau: f64, sigma: f64, picked: usize, probability: f64) -> Result<()> {
        self.primal_step(tau);
        self.dual_step(problem, sigma, picked)?;
        self.extrapolate(problem, picked, probability);
        self.iteration += 1;
        Ok(())
    }

    /// Largest deviation of the running `z` from a fresh `Σ_k A_kᵀ ᾱ_k`,
    /// relative to `1 + ‖z‖∞`.
    pub fn audit_z(&self, problem: &SaddleProblem<'_>) -> f64 {
        let mut fresh = vec![0.0; self.z.len()];
        for k in 0..problem.n_edges() {
            let bar = self.alpha_bar(problem, k);
            problem.adjoint_into(k, &bar, 1.0, &mut fresh);
        }
        let zmax = self.z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.z
            .iter()
            .zip(&fresh)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / (1.0 + zmax)
    }

    /// Dual objective `Σ_{j∈O} y_j (Σ_k A_kᵀ α_k)_j - Σ_k g*(α_k)` and the
    /// largest `|(Σ_k A_kᵀ α_k)_j|` over unlabeled `j`, which must vanish for
    /// the dual value to be finite.
    pub fn dual_value(&self, problem: &SaddleProblem<'_>) -> (f64, f64) {
        let mut adj = vec![0.0; self.z.len()];
        let mut conj = 0.0;
        for k in 0..problem.n_edges() {
            let a = self.alpha(problem, k);
            problem.adjoint_into(k, a, 1.0, &mut adj);
            conj += g_conj(a, problem.p);
        }
        let linear: f64 = problem.constraints.entries().iter().map(|&(i, y)| y * adj[i]).sum();
        let infeasibility = adj
            .iter()
            .zip(&self.fixed)
            .filter(|(_, &f)| !f)
            .map(|(a, _)| a.abs())
            .fold(0.0, f64::max);
        (linear - conj, infeasibility)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxEpochs,
    /// Nothing to solve: every minimizer is constant, zero is returned.
    NoConstraints,
    /// No edge has a pair, so the constraints alone determine `u`.
    NoEdges,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub tau: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    /// Objective `(1/p) Σ_k max w|Δu|^p` after each epoch.
    pub objective_history: Vec<f64>,
    pub final_objective: f64,
    pub step_sizes: StepSizes,
}

enum Sampler {
    Uniform(usize),
    Weighted(WeightedIndex<f64>),
}

impl Sampler {
    fn draw(&self, rng: &mut SeededRng) -> usize {
        match self {
            Sampler::Uniform(n) => rng.random_range(0..*n),
            Sampler::Weighted(w) => w.sample(rng),
        }
    }
}

/// Solver settings shared by the experiment pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub p: f64,
    pub epochs: usize,
    pub tol: f64,
    pub seed: u64,
    /// `τ/σ`; `None` uses [`balanced_ratio`].
    pub step_ratio: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { p: 2.0, epochs: DEFAULT_EPOCHS, tol: DEFAULT_TOL, seed: 0, step_ratio: None }
    }
}

impl SolveOptions {
    pub fn config(&self, hg: &Hypergraph) -> Result<SolverConfig> {
        let ratio = self.step_ratio.unwrap_or_else(|| balanced_ratio(hg));
        Ok(SolverConfig::for_hypergraph(hg, self.p, ratio)?
            .with_epochs(self.epochs)
            .with_tol(self.tol)
            .with_seed(self.seed))
    }
}

/// Build the problem for `hg` and solve it, optionally from a warm start.
pub fn solve(
    hg: &Hypergraph,
    labels: &LabelConstraints,
    opts: &SolveOptions,
    initial: Option<&[f64]>,
) -> Result<(Vec<f64>, Diagnostics)> {
    let problem = SaddleProblem::new(hg, labels.clone(), opts.p)?;
    run_from(&problem, &opts.config(hg)?, initial)
}

/// Draw edge indices with the configured probabilities.
pub fn sample_edges(config: &SolverConfig, n_edges: usize, draws: usize) -> Result<Vec<usize>> {
    let sampler = make_sampler(config, n_edges)?;
    let mut rng = rng_from_seed(config.seed);
    Ok((0..draws).map(|_| sampler.draw(&mut rng)).collect())
}

fn make_sampler(config: &SolverConfig, n_edges: usize) -> Result<Sampler> {
    Ok(match &config.probabilities {
        None => Sampler::Uniform(n_edges),
        Some(_) => Sampler::Weighted(
            WeightedIndex::new(config.probabilities(n_edges)?).map_err(|e| Error::invalid(e.to_string()))?,
        ),
    })
}

/// Solve from the default start: labels on `O`, zero elsewhere.
pub fn run(problem: &SaddleProblem<'_>, config: &SolverConfig) -> Result<(Vec<f64>, Diagnostics)> {
    run_from(problem, config, None)
}

/// Solve from a warm start (labels are imposed by the first primal step).
pub fn run_from(
    problem: &SaddleProblem<'_>,
    config: &SolverConfig,
    initial: Option<&[f64]>,
) -> Result<(Vec<f64>, Diagnostics)> {
    config.validate(problem)?;
    let hg = problem.hypergraph;
    let steps = StepSizes { tau: config.tau, sigma: config.sigma };
    let finish = |u: Vec<f64>, reason, history: Vec<f64>, epochs| -> Result<_> {
        let final_objective = objective(&u, hg, problem.p)?;
        Ok((u, Diagnostics { epochs_run: epochs, stop_reason: reason, objective_history: history, final_objective, step_sizes: steps }))
    };

    if problem.constraints.is_empty() {
        warn!("no labeled vertices: every constant minimizes the energy, returning zero");
        return finish(vec![0.0; problem.n_vertices()], StopReason::NoConstraints, Vec::new(), 0);
    }
    let mut state = SaddleState::new(problem, initial)?;
    if problem.total_dual_len() == 0 {
        state.primal_step(config.tau);
        return finish(state.u(), StopReason::NoEdges, Vec::new(), 0);
    }

    let n_edges = problem.n_edges();
    let probs = config.probabilities(n_edges)?;
    let sampler = make_sampler(config, n_edges)?;
    let mut rng = rng_from_seed(config.seed);
    info!(
        "spdhg: {} vertices, {} edges, {} dual entries, tau={:e}, sigma={:e}, bound(min)={:e}, bound(max)={:e}",
        problem.n_vertices(),
        n_edges,
        problem.total_dual_len(),
        config.tau,
        config.sigma,
        problem.step_bound(&probs),
        hg.edges()
            .iter()
            .zip(&probs)
            .map(|(e, &pi)| pi / e.op_norm_sq(problem.p))
            .filter(|b| b.is_finite())
            .fold(0.0, f64::max),
    );

    let mut prev = state.u();
    let mut history = Vec::with_capacity(config.epochs.min(4096));
    let mut reason = StopReason::MaxEpochs;
    let mut epochs = 0;
    for _ in 0..config.epochs {
        for _ in 0..n_edges {
            let i = sampler.draw(&mut rng);
            state.step(problem, config.tau, config.sigma, i, probs[i])?;
        }
        epochs += 1;
        state.sync_all();
        let u = state.u();
        history.push(objective(&u, hg, problem.p)?);
        let scale = 1.0 + u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let change = u.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = u;
        if change <= config.tol * scale {
            reason = StopReason::Converged;
            break;
        }
    }
    finish(prev, reason, history, epochs)
}

/// Solve the same problem from a fresh state on a fixed sequence of picks;
/// used to cross-check against other implementations.
pub fn run_with_picks(
    problem: &SaddleProblem<'_>,
    tau: f64,
    sigma: f64,
    picks: &[usize],
    probabilities: &[f64],
    initial: Option<&[f64]>,
) -> Result<SaddleState> {
    let mut state = SaddleState::new(problem, initial)?;
    for &i in picks {
        state.step(problem, tau, sigma, i, probabilities[i])?;
    }
    state.sync_all();
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointCloud;
    use crate::hypergraph::{build_pair_graph, HypergraphKind, PairRule, WeightScheme};
    use approx::assert_relative_eq;

    fn single_edge(members: Vec<usize>, n: usize, weights: PairWeights) -> Hypergraph {
        let e = Hyperedge::new(members[0], members, weights).unwrap();
        Hypergraph::new(n, vec![e], HypergraphKind::EpsBall { eps: 1.0 }, WeightScheme::Homogeneous).unwrap()
    }

    fn path3() -> Hypergraph {
        let c = PointCloud::from_scalars(&[0.0, 0.5, 1.0]).unwrap();
        build_pair_graph(&c, PairRule::Eps(0.6), WeightScheme::Homogeneous).unwrap()
    }

    #[test]
    fn edge_op_examples() {
        let e = Hyperedge::homogeneous(0, vec![0, 1, 2]).unwrap();
        assert_eq!(apply_edge_op(&[0.0, 1.0, 3.0], &e, 2.0).unwrap(), vec![-1.0, -3.0, -2.0]);
        assert_eq!(apply_edge_op(&[2.0; 3], &e, 2.0).unwrap(), vec![0.0; 3]);
        let e = Hyperedge::new(0, vec![0, 1], PairWeights::Explicit(vec![16.0])).unwrap();
        assert_eq!(apply_edge_op(&[1.0, 0.0], &e, 2.0).unwrap(), vec![4.0]);
        assert!(apply_edge_op(&[1.0], &e, 2.0).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let e = Hyperedge::homogeneous(0, vec![0, 1]).unwrap();
        let mut acc = vec![0.5, 0.5];
        apply_edge_op_adjoint(&[0.0], &e, 2.0, &mut acc, 1.0).unwrap();
        assert_eq!(acc, vec![0.5, 0.5]);
        let mut acc = vec![0.0, 0.0];
        apply_edge_op_adjoint(&[2.0], &e, 2.0, &mut acc, 1.0).unwrap();
        assert_eq!(acc, vec![2.0, -2.0]);
        assert!(apply_edge_op_adjoint(&[1.0, 2.0], &e, 2.0, &mut acc, 1.0).is_err());
    }

    #[test]
    fn primal_projection() {
        let hg = single_edge(vec![0, 1], 2, PairWeights::Uniform);
        let cons = LabelConstraints::new(vec![(0, 1.0)], 2).unwrap();
        let problem = SaddleProblem::new(&hg, cons, 2.0).unwrap();
        let mut st = SaddleState::new(&problem, Some(&[0.2, 0.7])).unwrap();
        st.primal_step(0.1);
        assert_eq!(st.u(), vec![1.0, 0.7]);
    }

    #[test]
    fn primal_gradient_step() {
        let hg = single_edge(vec![0, 1], 2, PairWeights::Uniform);
        let problem = SaddleProblem::new(&hg, LabelConstraints::empty(), 2.0).unwrap();
        let mut st = SaddleState::new(&problem, None).unwrap();
        st.z = vec![1.0, -1.0];
        st.primal_step(0.1);
        let u = st.u();
        assert_relative_eq!(u[0], -0.1);
        assert_relative_eq!(u[1], 0.1);
    }

    #[test]
    fn default_step_arithmetic() {
        let edges = (0..4).map(|k| Hyperedge::homogeneous(k, vec![0, 1, 2].into_iter().map(|x| (x + k) % 4).collect::<std::collections::BTreeSet<_>>().into_iter().collect()).unwrap()).collect();
        let hg = Hypergraph::new(4, edges, HypergraphKind::EpsBall { eps: 1.0 }, WeightScheme::Homogeneous).unwrap();
        let (tau, sigma) = default_steps(&hg, 2.0, 0.99, 1.0).unwrap();
        assert_relative_eq!(tau * sigma, 0.0825, epsilon = 1e-15);
        assert_relative_eq!(tau, 0.287_228_132_326_901_4, epsilon = 1e-12);
        let (t2, s2) = default_steps(&hg, 2.0, 0.99, 2.0).unwrap();
        assert_relative_eq!(t2 / s2, 2.0 * tau / sigma, epsilon = 1e-12);
        assert_relative_eq!(t2 * s2, tau * sigma, epsilon = 1e-15);
        let (t3, s3) = default_steps(&hg, 2.0, 1e-12, 1.0).unwrap();
        assert!(t3 < 1e-6 && s3 < 1e-6);
        assert!(default_steps(&hg, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn config_validation_rejects_large_steps() {
        let hg = path3();
        let problem = SaddleProblem::new(&hg, LabelConstraints::empty(), 2.0).unwrap();
        let mut cfg = SolverConfig::for_hypergraph(&hg, 2.0, 1.0).unwrap();
        cfg.validate(&problem).unwrap();
        cfg.tau *= 1.02;
        assert!(cfg.validate(&problem).is_err());
    }

    #[test]
    fn fully_constrained_pair() {
        let hg = single_edge(vec![0, 1], 2, PairWeights::Uniform);
        let cons = LabelConstraints::new(vec![(0, 0.0), (1, 1.0)], 2).unwrap();
        let problem = SaddleProblem::new(&hg, cons, 2.0).unwrap();
        let cfg = SolverConfig::for_hypergraph(&hg, 2.0, 1.0).unwrap().with_epochs(3);
        let (u, diag) = run(&problem, &cfg).unwrap();
        assert_eq!(u, vec![0.0, 1.0]);
        assert_relative_eq!(diag.final_objective, 0.5);
    }

    #[test]
    fn no_constraints_returns_zero() {
        let hg = path3();
        let problem = SaddleProblem::new(&hg, LabelConstraints::empty(), 2.0).unwrap();
        let cfg = SolverConfig::for_hypergraph(&hg, 2.0, 1.0).unwrap();
        let (u, diag) = run(&problem, &cfg).unwrap();
        assert_eq!(u, vec![0.0; 3]);
        assert_eq!(diag.stop_reason, StopReason::NoConstraints);
    }

    #[test]
    fn zero_dual_stays_zero_at_constant_u() {
        let hg = path3();
        let cons = LabelConstraints::new(vec![(0, 0.3)], 3).unwrap();
        let problem = SaddleProblem::new(&hg, cons, 2.0).unwrap();
        let mut st = SaddleState::new(&problem, Some(&[0.3; 3])).unwrap();
        st.step(&problem, 0.1, 1e-9, 1, 0.5).unwrap();
        assert_eq!(st.alpha(&problem, 1), &[0.0]);
        assert_eq!(st.z(), &[0.0; 3]);
    }

    #[test]
    fn single_edge_dual_matches_prox_example() {
        // β = 0 + σ A u with σ = 0.5, A u = u0 - u1 = 4 on a pair edge
        let hg = single_edge(vec![0, 1], 2, PairWeights::Uniform);
        let cons = LabelConstraints::new(vec![(0, 4.0), (1, 0.0)], 2).unwrap();
        let problem = SaddleProblem::new(&hg, cons, 2.0).unwrap();
        let mut st = SaddleState::new(&problem, None).unwrap();
        st.primal_step(0.1);
        st.dual_step(&problem, 0.5, 0).unwrap();
        // prox of β=2 at σ=0.5, p=2: α = 2 - 0.5 α → 4/3
        assert_relative_eq!(st.alpha(&problem, 0)[0], 4.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn deterministic_extrapolation() {
        let hg = single_edge(vec![0, 1, 2], 3, PairWeights::Uniform);
        let cons = LabelConstraints::new(vec![(0, 0.0), (2, 1.0)], 3).unwrap();
        let problem = SaddleProblem::new(&hg, cons, 2.0).unwrap();
        let mut st = SaddleState::new(&problem, None).unwrap();
        st.step(&problem, 0.2, 0.2, 0, 1.0).unwrap();
        let a1 = st.alpha(&problem, 0).to_vec();
        st.step(&problem, 0.2, 0.2, 0, 1.0).unwrap();
        let a2 = st.alpha(&problem, 0).to_vec();
        let bar = st.alpha_bar(&problem, 0);
        for r in 0..3 {
            assert_relative_eq!(bar[r], 2.0 * a2[r] - a1[r], epsilon = 1e-15);
        }
        assert!(st.audit_z(&problem) < 1e-14);
    }

    #[test]
    fn sampling_frequencies() {
        let hg = {
            let c = PointCloud::from_scalars(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
            build_pair_graph(&c, PairRule::Eps(1.0), WeightScheme::Homogeneous).unwrap()
        };
        assert_eq!(hg.n_edges(), 4);
        let cfg = SolverConfig::for_hypergraph(&hg, 2.0, 1.0).unwrap().with_seed(11);
        let picks = sample_edges(&cfg, 4, 10_000).unwrap();
        let sd = (10_000.0f64 * 0.25 * 0.75).sqrt();
        for k in 0..4 {
            let c = picks.iter().filter(|&&i| i == k).count() as f64;
            assert!((c - 2500.0).abs() <= 3.0 * sd, "edge {k}: {c}");
        }
    }
}
