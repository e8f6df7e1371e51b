//! Discrete hypergraph and graph energies, the solver objective, and the
//! numerical discrete-to-continuum checks.

use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::sample_uniform_1d;
use crate::hypergraph::{build_eps_ball, build_knn, delta_n, Hyperedge, Hypergraph, PairWeights, WeightScheme};

fn check_len(u: &[f64], hg: &Hypergraph) -> Result<()> {
    if u.len() != hg.n_vertices() {
        return Err(Error::ShapeMismatch { expected: hg.n_vertices(), got: u.len() });
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("exponent p must be >= 1, got {p}")));
    }
    Ok(())
}

/// `max_{(i,j) in e} w_ij |u_i - u_j|^p`; zero for edges with fewer than two members.
pub fn edge_max_term(u: &[f64], edge: &Hyperedge, p: f64) -> f64 {
    let m = edge.members();
    if m.len() < 2 {
        return 0.0;
    }
    match edge.weights() {
        PairWeights::Uniform => {
            let (lo, hi) = m.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(u[i]), hi.max(u[i]))
            });
            (hi - lo).powf(p)
        }
        PairWeights::Explicit(_) => edge
            .pairs()
            .map(|(i, j, w)| w * (u[i] - u[j]).abs().powf(p))
            .fold(0.0, f64::max),
    }
}

fn sum_of_edge_maxima(u: &[f64], hg: &Hypergraph, p: f64) -> f64 {
    hg.edges().par_iter().map(|e| edge_max_term(u, e, p)).sum()
}

/// `1/(n r^p) Σ_k max_{i,j in e_k} w_ij |u_i - u_j|^p` with `r` the
/// hypergraph's scale (ε or ε̄).
pub fn hyper_energy(u: &[f64], hg: &Hypergraph, p: f64) -> Result<f64> {
    check_len(u, hg)?;
    check_p(p)?;
    let scale = 1.0 / (hg.n_vertices() as f64 * hg.scale().powf(p));
    Ok(scale * sum_of_edge_maxima(u, hg, p))
}

/// `1/(n^2 ε^p) Σ_{i,j} w_ij |u_i - u_j|^p` over ordered pairs of a pair graph.
pub fn graph_energy(u: &[f64], pair_hg: &Hypergraph, p: f64) -> Result<f64> {
    if !pair_hg.kind().is_pair_graph() {
        return Err(Error::Kind(format!(
            "graph energy needs a pair graph, got {}",
            pair_hg.kind().name()
        )));
    }
    check_len(u, pair_hg)?;
    check_p(p)?;
    let n = pair_hg.n_vertices() as f64;
    let sum = sum_of_edge_maxima(u, pair_hg, p);
    Ok(2.0 * sum / (n * n * pair_hg.scale().powf(p)))
}

/// The quantity the solver minimizes: `(1/p) Σ_k max_{i,j in e_k} w_ij |u_i - u_j|^p`.
pub fn objective(u: &[f64], hg: &Hypergraph, p: f64) -> Result<f64> {
    check_len(u, hg)?;
    check_p(p)?;
    Ok(sum_of_edge_maxima(u, hg, p) / p)
}

/// `2^p ∫_0^1 |u'(x)|^p ρ(x) dx` by composite Simpson with at least
/// `quadrature_n` subintervals (rounded up to even).
pub fn continuum_energy_1d(
    grad_fn: impl Fn(f64) -> f64,
    p: f64,
    rho_fn: impl Fn(f64) -> f64,
    quadrature_n: usize,
) -> Result<f64> {
    if quadrature_n < 100 {
        return Err(Error::invalid(format!("quadrature needs >= 100 nodes, got {quadrature_n}")));
    }
    let n = quadrature_n + quadrature_n % 2;
    let h = 1.0 / n as f64;
    let f = |x: f64| grad_fn(x).abs().powf(p) * rho_fn(x);
    let mut acc = f(0.0) + f(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    Ok(2f64.powf(p) * acc * h / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaKind {
    /// schedule parameter is ε
    EpsBall,
    /// schedule parameter is k
    Knn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub n: usize,
    pub param: f64,
    pub discrete: f64,
    pub continuum: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GammaCheckReport {
    pub rows: Vec<GammaRow>,
}

impl GammaCheckReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,param,discrete,continuum,rel_error\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.n, r.param, r.discrete, r.continuum, r.rel_error);
        }
        out
    }

    pub fn rel_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rel_error).collect()
    }
}

pub const QUADRATURE_NODES: usize = 2000;

/// Restrict `u_fn` to uniform samples on (0, 1) and compare the hypergraph
/// energy with the continuum limit `2^p ∫ |u'|^p` (ρ ≡ 1). Each row averages
/// the discrete energy over `seeds`.
pub fn gamma_check(
    u_fn: impl Fn(f64) -> f64 + Sync,
    grad_fn: impl Fn(f64) -> f64,
    p: f64,
    kind: GammaKind,
    schedule: &[(usize, f64)],
    seeds: &[u64],
) -> Result<GammaCheckReport> {
    check_p(p)?;
    if seeds.is_empty() {
        return Err(Error::invalid("gamma check needs at least one seed"));
    }
    let continuum = continuum_energy_1d(grad_fn, p, |_| 1.0, QUADRATURE_NODES)?;
    let mut rows = Vec::with_capacity(schedule.len());
    for &(n, param) in schedule {
        let mut total = 0.0;
        for &seed in seeds {
            let cloud = sample_uniform_1d(n, seed)?;
            let hg = match kind {
                GammaKind::EpsBall => build_eps_ball(&cloud, param, WeightScheme::Homogeneous)?,
                GammaKind::Knn => {
                    if param.fract() != 0.0 || param < 2.0 {
                        return Err(Error::invalid(format!("k must be an integer >= 2, got {param}")));
                    }
                    build_knn(&cloud, param as usize, WeightScheme::Homogeneous)?
                }
            };
            if n >= 3 {
                let delta = delta_n(n, 1)?;
                if hg.scale() <= delta || hg.scale() >= 1.0 {
                    warn!("radius {} at n={n} is outside (delta_n={delta}, 1)", hg.scale());
                }
            }
            let u: Vec<f64> = cloud.coords().iter().map(|&x| u_fn(x)).collect();
            total += hyper_energy(&u, &hg, p)?;
        }
        let discrete = total / seeds.len() as f64;
        let rel_error = if continuum != 0.0 {
            (discrete - continuum).abs() / continuum.abs()
        } else {
            (discrete - continuum).abs()
        };
        rows.push(GammaRow { n, param, discrete, continuum, rel_error });
    }
    Ok(GammaCheckReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointCloud;
    use crate::hypergraph::{build_pair_graph, PairRule};
    use approx::assert_relative_eq;

    fn setup() -> (Hypergraph, Hypergraph) {
        let c = PointCloud::from_scalars(&[0.0, 0.5, 1.0]).unwrap();
        (
            build_eps_ball(&c, 0.6, WeightScheme::Homogeneous).unwrap(),
            build_pair_graph(&c, PairRule::Eps(0.6), WeightScheme::Homogeneous).unwrap(),
        )
    }

    #[test]
    fn three_point_energies() {
        let (hg, pg) = setup();
        let u = [0.0, 1.0, 2.0];
        assert_relative_eq!(hyper_energy(&u, &hg, 2.0).unwrap(), 6.0 / 1.08, epsilon = 1e-12);
        assert_relative_eq!(graph_energy(&u, &pg, 2.0).unwrap(), 4.0 / (9.0 * 0.36), epsilon = 1e-12);
        assert_relative_eq!(objective(&u, &hg, 2.0).unwrap(), 3.0, epsilon = 1e-12);
        // objective = n ε^p / p * hyper_energy
        assert_relative_eq!(
            objective(&u, &hg, 2.0).unwrap(),
            3.0 * 0.36 / 2.0 * hyper_energy(&u, &hg, 2.0).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn constants_have_zero_energy() {
        let (hg, pg) = setup();
        let u = [0.7; 3];
        assert_eq!(hyper_energy(&u, &hg, 3.0).unwrap(), 0.0);
        assert_eq!(graph_energy(&u, &pg, 3.0).unwrap(), 0.0);
        assert_eq!(objective(&u, &hg, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let (hg, pg) = setup();
        assert!(matches!(hyper_energy(&[0.0; 2], &hg, 2.0), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(graph_energy(&[0.0; 3], &hg, 2.0), Err(Error::Kind(_))));
        assert!(graph_energy(&[0.0; 3], &pg, 0.5).is_err());
    }

    #[test]
    fn singleton_edges_contribute_nothing() {
        let c = PointCloud::from_scalars(&[0.0, 0.5, 1.0]).unwrap();
        let hg = build_eps_ball(&c, 0.4, WeightScheme::Homogeneous).unwrap();
        assert_eq!(hyper_energy(&[0.0, 5.0, -1.0], &hg, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn weighted_max_uses_weights_inside() {
        let e = Hyperedge::new(0, vec![0, 1, 2], PairWeights::Explicit(vec![1.0, 0.1, 1.0])).unwrap();
        // pairs (0,1):1*1, (0,2):0.1*9, (1,2):1*4
        assert_relative_eq!(edge_max_term(&[0.0, 1.0, 3.0], &e, 2.0), 4.0);
    }

    #[test]
    fn simpson_quadrature() {
        assert_relative_eq!(continuum_energy_1d(|_| 1.0, 2.0, |_| 1.0, 1000).unwrap(), 4.0, epsilon = 1e-12);
        assert_eq!(continuum_energy_1d(|_| 0.0, 2.0, |_| 1.0, 1000).unwrap(), 0.0);
        assert_relative_eq!(
            continuum_energy_1d(|x| 2.0 * x, 2.0, |_| 1.0, 1000).unwrap(),
            16.0 / 3.0,
            epsilon = 1e-12
        );
        assert!(continuum_energy_1d(|_| 1.0, 2.0, |_| 1.0, 50).is_err());
    }

    #[test]
    fn gamma_rows_and_csv() {
        let r = gamma_check(|_| 1.0, |_| 0.0, 2.0, GammaKind::EpsBall, &[(200, 0.1), (400, 0.08)], &[1]).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|row| row.discrete == 0.0 && row.continuum == 0.0));
        let csv = r.to_csv();
        assert!(csv.starts_with("n,param,discrete,continuum,rel_error\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
