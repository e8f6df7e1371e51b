//! Proximal operator of `σ g*` where `g(β) = (max|β|)^p / p`.
//!
//! The conjugate is `g*(α) = h*(‖α‖₁)` with `h(t) = |t|^p / p`. For `p = 1`
//! that is the indicator of the unit L1 ball and the prox is a projection. For
//! `p > 1`, `h*(s) = s^{p'} / p'` and the prox is the soft-threshold
//! `α = sign(β) max(|β| - σ‖α‖₁^{p'-1}, 0)`, an implicit equation solved by
//! shrinking an active set and solving one scalar equation per pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxParams {
    sigma: f64,
    p: f64,
}

impl ProxParams {
    pub fn new(sigma: f64, p: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("prox step must be positive, got {sigma}")));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!("exponent p must be >= 1, got {p}")));
        }
        Ok(Self { sigma, p })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent `p / (p - 1)`; infinite at `p = 1`.
    pub fn p_conj(&self) -> f64 {
        if self.p == 1.0 {
            f64::INFINITY
        } else {
            self.p / (self.p - 1.0)
        }
    }
}

/// `h*(s)` for `h(t) = |t|^p / p`.
pub fn h_conj(s: f64, p: f64) -> f64 {
    if p == 1.0 {
        if s.abs() <= 1.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        let q = p / (p - 1.0);
        s.abs().powf(q) / q
    }
}

/// `g*(α) = h*(‖α‖₁)`.
pub fn g_conj(alpha: &[f64], p: f64) -> f64 {
    h_conj(alpha.iter().map(|a| a.abs()).sum(), p)
}

/// Euclidean projection onto `{α : ‖α‖₁ <= radius}` by sorting magnitudes.
pub fn project_l1_ball(beta: &[f64], radius: f64) -> Vec<f64> {
    let mut out = beta.to_vec();
    project_l1_ball_in_place(&mut out, radius);
    out
}

pub fn project_l1_ball_in_place(beta: &mut [f64], radius: f64) {
    let lambda = l1_ball_threshold(beta, radius);
    soft_threshold_in_place(beta, lambda);
}

/// Level `λ` with `proj(β) = sign(β) max(|β| - λ, 0)`; zero inside the ball.
pub fn l1_ball_threshold(beta: &[f64], radius: f64) -> f64 {
    debug_assert!(radius > 0.0);
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    if l1 <= radius {
        return 0.0;
    }
    let mut mags: Vec<f64> = beta.iter().map(|b| b.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut lambda = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - radius) / (j + 1) as f64;
        if m > t {
            lambda = t;
        } else {
            break;
        }
    }
    lambda
}

#[inline]
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    x.signum() * (x.abs() - lambda).max(0.0)
}

fn soft_threshold_in_place(buf: &mut [f64], lambda: f64) {
    for x in buf.iter_mut() {
        *x = soft_threshold(*x, lambda);
    }
}

const MAX_ROOT_STEPS: usize = 200;

/// Root `s >= 0` of `s + b σ s^{p'-1} = t`.
///
/// Closed form at `p = 2`. Otherwise Newton's method safeguarded by a
/// bracket, run to full precision: the soft-threshold level `σ s^{p'-1}` is
/// subtracted from magnitudes close to it, so its relative error is
/// amplified when the result is tiny.
pub fn solve_threshold_root(b: usize, sigma: f64, p: f64, t: f64) -> f64 {
    debug_assert!(b >= 1 && t >= 0.0 && p > 1.0);
    if t <= 0.0 {
        return 0.0;
    }
    let bs = b as f64 * sigma;
    if p == 2.0 {
        return t / (1.0 + bs);
    }
    let e = 1.0 / (p - 1.0); // p' - 1
    let f = |s: f64| s + bs * s.powf(e) - t;
    let df = |s: f64| 1.0 + bs * e * s.powf(e - 1.0);
    // both terms are nonnegative, so each alone bounds the root from above
    let (mut lo, mut hi) = (0.0f64, t.min((t / bs).powf(1.0 / e)));
    let mut x = hi;
    for _ in 0..MAX_ROOT_STEPS {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - fx / df(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next <= lo || next >= hi || (next - x).abs() <= 2.0 * f64::EPSILON * x {
            break;
        }
        x = next;
    }
    if f(lo).abs() < f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// `prox_{σ g*}(β)`.
pub fn prox_g_star(beta: &[f64], params: ProxParams) -> Vec<f64> {
    let mut out = beta.to_vec();
    prox_g_star_in_place(&mut out, params);
    out
}

/// In-place [`prox_g_star`]; `buf` is overwritten with the result.
pub fn prox_g_star_in_place(buf: &mut [f64], params: ProxParams) {
    let lambda = prox_threshold(buf, params);
    soft_threshold_in_place(buf, lambda);
}

/// The prox is a soft threshold of `β`; this returns its level `λ`.
pub fn prox_threshold(beta: &[f64], params: ProxParams) -> f64 {
    if params.p == 1.0 {
        return l1_ball_threshold(beta, 1.0);
    }
    ACTIVE.with(|cell| pruned_threshold(beta, params, &mut cell.borrow_mut()))
}

/// Level `σ s^{p'-1}` with `s` the root for `b` entries summing to `t`.
fn level(b: usize, t: f64, params: ProxParams) -> f64 {
    params.sigma * solve_threshold_root(b, params.sigma, params.p, t).powf(1.0 / (params.p - 1.0))
}

/// Same result as [`threshold`], but the starting active set is pruned first.
///
/// The level computed from any subset of the magnitudes is a lower bound on
/// the final level, so one streaming pass collects the entries that beat a
/// running bound, refreshing the bound as the collection grows. Entries
/// dropped on the way can never be active. The active-set iteration then
/// runs on the survivors only.
fn pruned_threshold(beta: &[f64], params: ProxParams, active: &mut Vec<f64>) -> f64 {
    active.clear();
    let (mut bound, mut t, mut refresh_at) = (0.0f64, 0.0f64, 8usize);
    let closed_form = params.p == 2.0;
    for &x in beta {
        let a = x.abs();
        if a > bound {
            active.push(a);
            t += a;
            if closed_form {
                bound = bound.max(params.sigma * t / (1.0 + active.len() as f64 * params.sigma));
            } else if active.len() >= refresh_at {
                bound = bound.max(level(active.len(), t, params));
                refresh_at *= 2;
            }
        }
    }
    if active.is_empty() {
        return 0.0;
    }
    bound = bound.max(level(active.len(), t, params));
    active.retain(|&a| a > bound);
    let mut lambda = bound;
    let mut passes = 0;
    while !active.is_empty() {
        let t: f64 = active.iter().sum();
        let min_active = active.iter().copied().fold(f64::INFINITY, f64::min);
        lambda = level(active.len(), t, params);
        passes += 1;
        if min_active - lambda >= 0.0 || passes > beta.len() {
            debug_assert!(min_active - lambda >= 0.0, "active set failed to settle");
            break;
        }
        active.retain(|&a| a > lambda);
    }
    lambda
}

thread_local! {
    static ACTIVE: std::cell::RefCell<Vec<f64>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Final level `λ` of the active-set iteration, started from every nonzero
/// entry, and the number of passes it took.
fn threshold(beta: &[f64], params: ProxParams, active: &mut Vec<f64>) -> (f64, usize) {
    active.clear();
    active.extend(beta.iter().map(|x| x.abs()).filter(|&a| a > 0.0));
    let mut lambda = 0.0f64;
    let mut passes = 0;
    while !active.is_empty() {
        let t: f64 = active.iter().sum();
        let min_active = active.iter().copied().fold(f64::INFINITY, f64::min);
        lambda = level(active.len(), t, params);
        passes += 1;
        if min_active - lambda >= 0.0 || passes > beta.len() {
            debug_assert!(min_active - lambda >= 0.0, "active set failed to settle");
            break;
        }
        active.retain(|&a| a > lambda);
    }
    (lambda, passes)
}

/// Number of active-set passes the prox takes on `β`; exposed for tests of
/// the termination bound.
pub fn prox_passes(beta: &[f64], params: ProxParams) -> usize {
    if params.p == 1.0 {
        return 1;
    }
    threshold(beta, params, &mut Vec::new()).1
}

/// `‖α - sign(β) max(|β| - σ‖α‖₁^{p'-1}, 0)‖∞`; zero iff `α` solves the
/// fixed-point equation of the prox.
pub fn verify_fixed_point(alpha: &[f64], beta: &[f64], params: ProxParams) -> Result<f64> {
    if alpha.len() != beta.len() {
        return Err(Error::ShapeMismatch { expected: beta.len(), got: alpha.len() });
    }
    if params.p == 1.0 {
        // no threshold equation; compare against the projection instead
        return Ok(alpha
            .iter()
            .zip(&project_l1_ball(beta, 1.0))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max));
    }
    let l1: f64 = alpha.iter().map(|a| a.abs()).sum();
    let lambda = params.sigma * l1.powf(1.0 / (params.p - 1.0));
    Ok(alpha
        .iter()
        .zip(beta)
        .map(|(a, b)| (a - b.signum() * (b.abs() - lambda).max(0.0)).abs())
        .fold(0.0, f64::max))
}

/// Prox objective `½‖α - β‖² + σ h*(‖α‖₁)`.
pub fn prox_objective(alpha: &[f64], beta: &[f64], params: ProxParams) -> f64 {
    let dist: f64 = alpha.iter().zip(beta).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * dist + params.sigma * g_conj(alpha, params.p)
}

/// Closest point to `β` on the sphere `‖α‖₁ = t`, for `0 <= t <= ‖β‖₁`,
/// found by bisecting the soft-threshold level.
fn shrink_to_l1(beta: &[f64], t: f64) -> Vec<f64> {
    let norm_at = |lam: f64| beta.iter().map(|b| (b.abs() - lam).max(0.0)).sum::<f64>();
    if t >= norm_at(0.0) {
        return beta.to_vec();
    }
    let (mut lo, mut hi) = (0.0, beta.iter().fold(0.0f64, |m, b| m.max(b.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    soft_threshold_vec(beta, 0.5 * (lo + hi))
}

fn soft_threshold_vec(beta: &[f64], lambda: f64) -> Vec<f64> {
    beta.iter().map(|&b| soft_threshold(b, lambda)).collect()
}

/// Brute-force minimum of the prox objective: a grid over `t = ‖α‖₁ ∈ [0, ‖β‖₁]`
/// refined by golden-section search, with the inner problem solved exactly.
/// The outer function is convex in `t`.
pub fn brute_force_prox_objective(beta: &[f64], params: ProxParams) -> f64 {
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let f = |t: f64| prox_objective(&shrink_to_l1(beta, t), beta, params);
    if l1 == 0.0 {
        return f(0.0);
    }
    const GRID: usize = 400;
    let h = l1 / GRID as f64;
    let values: Vec<f64> = (0..=GRID).map(|k| f(k as f64 * h)).collect();
    let best = (0..=GRID).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let (mut a, mut b) = (best.saturating_sub(1) as f64 * h, (best + 1).min(GRID) as f64 * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b)).min(values[best])
}

/// Outcome of [`oracle_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instances: usize,
    pub failures: usize,
    /// Largest fixed-point residual.
    pub max_residual: f64,
    /// Largest `objective(prox) - objective(brute force)`.
    pub max_objective_gap: f64,
}

/// Random instances with `m <= 6`, `p ∈ {1.5, 2, 3, 4}` and log-uniform
/// `σ ∈ [0.01, 10]`; an instance fails when the prox objective exceeds the
/// brute-force minimum by more than 1e-6 or the fixed-point residual exceeds 1e-9.
pub fn oracle_suite(instances: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = rng_from_seed(seed);
    let mut report = OracleReport { instances, failures: 0, max_residual: 0.0, max_objective_gap: f64::NEG_INFINITY };
    for _ in 0..instances {
        let m = rng.random_range(1..=6);
        let beta: Vec<f64> =
            (0..m).map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(-4.0..4.0) }).collect();
        let p = [1.5, 2.0, 3.0, 4.0][rng.random_range(0..4)];
        let sigma = rng.random_range(0.01f64.ln()..10f64.ln()).exp();
        let params = ProxParams::new(sigma, p)?;
        let alpha = prox_g_star(&beta, params);
        let gap = prox_objective(&alpha, &beta, params) - brute_force_prox_objective(&beta, params);
        let residual = verify_fixed_point(&alpha, &beta, params)?;
        report.max_objective_gap = report.max_objective_gap.max(gap);
        report.max_residual = report.max_residual.max(residual);
        if gap > 1e-6 || residual > 1e-9 {
            report.failures += 1;
        }
    }
    if instances == 0 {
        report.max_objective_gap = 0.0;
    }
    Ok(report)
}
