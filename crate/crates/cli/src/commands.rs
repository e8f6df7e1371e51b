use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use hyperlap::energy::{gamma_check, GammaKind};
use hyperlap::geometry::{load_labels, load_point_cloud};
use hyperlap::hypergraph::{build_structure, GraphSpec, Method, WeightScheme};
use hyperlap::inpaint::{
    encode_pgm, gradient_edge_image, inpaint, load_mask, load_pgm, mean_fill, psnr, psnr_for_table, ssim,
    ImageGrid, PatchConfig, PixelMask,
};
use hyperlap::interp::{run_interp1d, Interp1dConfig, MethodRun, DEFAULT_N};
use hyperlap::prox::oracle_suite;
use hyperlap::solver::{SolveOptions, DEFAULT_EPOCHS, DEFAULT_TOL};
use hyperlap::ssl::{accuracy, load_class_labels, one_vs_rest, predictions_csv};

use crate::config::{write_bytes, write_text, RunConfig};
use crate::error::CliError;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Solver flags shared by the solving subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub p: f64,
    pub epochs: usize,
    pub tol: f64,
    /// `τ/σ`; absent means the size-balanced default.
    pub step_ratio: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { p: 2.0, epochs: DEFAULT_EPOCHS, tol: DEFAULT_TOL, step_ratio: None }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(usage(format!("--p must be >= 1, got {}", self.p)));
        }
        if self.epochs == 0 {
            return Err(usage("--epochs must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(usage(format!("--tol must be >= 0, got {}", self.tol)));
        }
        if let Some(r) = self.step_ratio {
            if !(r > 0.0 && r.is_finite()) {
                return Err(usage(format!("--step-ratio must be positive, got {r}")));
            }
        }
        Ok(())
    }

    fn options(&self, seed: u64) -> SolveOptions {
        SolveOptions { p: self.p, epochs: self.epochs, tol: self.tol, seed, step_ratio: self.step_ratio }
    }
}

fn validate_graph(graph: GraphSpec, n: Option<usize>) -> Result<(), CliError> {
    match graph {
        GraphSpec::Eps(e) if !(e > 0.0 && e.is_finite()) => Err(usage(format!("eps must be positive, got {e}"))),
        GraphSpec::Knn(k) if k < 2 => Err(usage(format!("knn needs k >= 2, got {k}"))),
        GraphSpec::Knn(k) if n.is_some_and(|n| k > n) => {
            Err(usage(format!("knn k={k} exceeds the {} points", n.unwrap_or(0))))
        }
        _ => Ok(()),
    }
}

// ------------------------------------------------------------------ interp1d

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Interp1dSettings {
    pub n: usize,
    pub graph: GraphSpec,
    /// `index,value` rows; absent means the six default labels.
    pub labels: Option<PathBuf>,
    pub solver: SolverSettings,
}

impl Default for Interp1dSettings {
    fn default() -> Self {
        Self { n: DEFAULT_N, graph: GraphSpec::Eps(0.048), labels: None, solver: SolverSettings::default() }
    }
}

fn method_json(run: &MethodRun) -> serde_json::Value {
    json!({
        "spike_index": run.spike_index,
        "connected": run.connected,
        "diagnostics": run.diagnostics,
    })
}

pub fn interp1d(cfg: &RunConfig<Interp1dSettings>) -> Result<(), CliError> {
    let s = &cfg.settings;
    if s.n < 2 {
        return Err(usage(format!("--n must be at least 2, got {}", s.n)));
    }
    validate_graph(s.graph, Some(s.n))?;
    s.solver.validate()?;
    let labels = s.labels.as_ref().map(|path| load_labels(path, s.n)).transpose()?;

    let run_cfg = Interp1dConfig { n: s.n, seed: cfg.seed, graph: s.graph, solver: s.solver.options(cfg.seed) };
    let res = run_interp1d(&run_cfg, labels)?;
    let mut warnings = Vec::new();
    for (name, run) in [("gpl", &res.gpl), ("hpl", &res.hpl)] {
        if !run.connected {
            warnings.push(format!("{name} structure at {} is disconnected", s.graph));
        }
    }
    let metrics = json!({
        "n": s.n,
        "seed": cfg.seed,
        "graph": s.graph,
        "p": s.solver.p,
        "labels": res.labels.entries(),
        "gpl": method_json(&res.gpl),
        "hpl": method_json(&res.hpl),
        "warnings": warnings,
    });
    let csv = cfg.out_dir.join("interp1d.csv");
    write_text(&csv, &res.to_csv())?;
    write_json(&cfg.out_dir.join("interp1d_metrics.json"), &metrics)?;
    println!(
        "spike index: GpL {:.6}, HpL {:.6}; wrote {}",
        res.gpl.spike_index,
        res.hpl.spike_index,
        csv.display()
    );
    Ok(())
}

fn write_json(path: &std::path::Path, value: &impl Serialize) -> Result<(), CliError> {
    write_text(path, &(serde_json::to_string_pretty(value).map_err(CliError::runtime)? + "\n"))
}

// ------------------------------------------------------------------ gamma-check

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub n: usize,
    pub param: f64,
}

impl std::str::FromStr for GammaPoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad point {s:?}, expected N:PARAM");
        let (n, param) = s.split_once(':').ok_or_else(bad)?;
        Ok(Self { n: n.trim().parse().map_err(|_| bad())?, param: param.trim().parse().map_err(|_| bad())? })
    }
}

/// Test functions on (0, 1) with their derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    /// u(x) = x
    #[value(alias = "x")]
    #[serde(alias = "x")]
    Linear,
    /// u(x) = 1
    Constant,
    /// u(x) = x²
    Square,
    /// u(x) = sin(2πx)
    #[value(alias = "sin")]
    #[serde(alias = "sin")]
    Sine,
}

impl TestFunction {
    fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::Linear => x,
            TestFunction::Constant => 1.0,
            TestFunction::Square => x * x,
            TestFunction::Sine => (2.0 * std::f64::consts::PI * x).sin(),
        }
    }

    fn grad(self, x: f64) -> f64 {
        match self {
            TestFunction::Linear => 1.0,
            TestFunction::Constant => 0.0,
            TestFunction::Square => 2.0 * x,
            TestFunction::Sine => 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * x).cos(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GammaStructure {
    Eps,
    Knn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GammaSettings {
    pub structure: GammaStructure,
    pub function: TestFunction,
    pub p: f64,
    /// Empty means `n ∈ {500, 1000, 2000, 4000}` with `ε = n^{-1/3}`, or
    /// `k = 100` at `n = 2000` for k-NN.
    pub points: Vec<GammaPoint>,
    /// Seeds `seed, seed+1, …` averaged per row.
    pub seeds: usize,
}

impl Default for GammaSettings {
    fn default() -> Self {
        Self { structure: GammaStructure::Eps, function: TestFunction::Linear, p: 2.0, points: Vec::new(), seeds: 5 }
    }
}

pub fn gamma(cfg: &RunConfig<GammaSettings>) -> Result<(), CliError> {
    let s = &cfg.settings;
    if !(s.p >= 1.0 && s.p.is_finite()) {
        return Err(usage(format!("--p must be >= 1, got {}", s.p)));
    }
    if s.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let points: Vec<GammaPoint> = if s.points.is_empty() {
        match s.structure {
            GammaStructure::Eps => [500usize, 1000, 2000, 4000]
                .iter()
                .map(|&n| GammaPoint { n, param: (n as f64).powf(-1.0 / 3.0) })
                .collect(),
            GammaStructure::Knn => vec![GammaPoint { n: 2000, param: 100.0 }],
        }
    } else {
        s.points.clone()
    };
    for pt in &points {
        if pt.n < 2 {
            return Err(usage(format!("point n={} needs at least 2 samples", pt.n)));
        }
        let ok = match s.structure {
            GammaStructure::Eps => pt.param > 0.0 && pt.param.is_finite(),
            GammaStructure::Knn => pt.param.fract() == 0.0 && pt.param >= 2.0 && pt.param <= pt.n as f64,
        };
        if !ok {
            return Err(usage(format!("point {}:{} has an invalid parameter", pt.n, pt.param)));
        }
    }
    let kind = match s.structure {
        GammaStructure::Eps => GammaKind::EpsBall,
        GammaStructure::Knn => GammaKind::Knn,
    };
    let seeds: Vec<u64> = (0..s.seeds as u64).map(|k| cfg.seed + k).collect();
    let schedule: Vec<(usize, f64)> = points.iter().map(|p| (p.n, p.param)).collect();
    let f = s.function;
    let report = gamma_check(move |x| f.eval(x), move |x| f.grad(x), s.p, kind, &schedule, &seeds)?;
    let path = cfg.out_dir.join("gamma_check.csv");
    write_text(&path, &report.to_csv())?;
    print!("{}", report.to_csv());
    Ok(())
}

// ------------------------------------------------------------------ ssl

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SslSettings {
    pub points: Option<PathBuf>,
    /// `index,class` rows for the training vertices.
    pub labels: Option<PathBuf>,
    /// Optional `index,class` rows for every vertex, used for accuracy.
    pub truth: Option<PathBuf>,
    pub method: Method,
    pub graph: GraphSpec,
    pub weights: WeightScheme,
    pub solver: SolverSettings,
    /// Predictions CSV; defaults to `predictions.csv` in the output directory.
    pub out: Option<PathBuf>,
}

impl Default for SslSettings {
    fn default() -> Self {
        Self {
            points: None,
            labels: None,
            truth: None,
            method: Method::Hpl,
            graph: GraphSpec::Knn(10),
            weights: WeightScheme::SelfTuning { k0: 10 },
            solver: SolverSettings::default(),
            out: None,
        }
    }
}

pub fn ssl(cfg: &RunConfig<SslSettings>) -> Result<(), CliError> {
    let s = &cfg.settings;
    let points = s.points.as_ref().ok_or_else(|| usage("ssl needs --points"))?;
    let labels_path = s.labels.as_ref().ok_or_else(|| usage("ssl needs --labels"))?;
    validate_graph(s.graph, None)?;
    s.solver.validate()?;

    let cloud = load_point_cloud(points)?;
    validate_graph(s.graph, Some(cloud.len()))?;
    if let WeightScheme::SelfTuning { k0 } = s.weights {
        if k0 >= cloud.len() {
            return Err(usage(format!("selftuning k0={k0} needs more than {k0} points")));
        }
    }
    let labels = load_class_labels(labels_path, cloud.len())?;
    let truth = match &s.truth {
        None => None,
        Some(path) => {
            let t = load_class_labels(path, cloud.len())?;
            if t.len() != cloud.len() {
                return Err(usage(format!("truth file covers {} of {} vertices", t.len(), cloud.len())));
            }
            let mut classes = vec![0; cloud.len()];
            for &(i, c) in t.assignments() {
                classes[i] = c;
            }
            Some(classes)
        }
    };

    let hg = build_structure(&cloud, s.method, s.graph, s.weights)?;
    let mut warnings = Vec::new();
    if !hg.is_connected() {
        warnings.push(format!("{} structure at {} is disconnected", s.method, s.graph));
    }
    let out = one_vs_rest(&hg, &labels, &s.solver.options(cfg.seed))?;
    let (acc_all, acc_unlabeled) = match &truth {
        Some(t) => (Some(accuracy(&out.predicted, t, None)?), Some(accuracy(&out.predicted, t, Some(&labels))?)),
        None => (None, None),
    };
    let per_class: Vec<_> = labels
        .classes()
        .iter()
        .zip(&out.diagnostics)
        .map(|(c, d)| json!({"class": c, "epochs_run": d.epochs_run, "stop_reason": d.stop_reason, "final_objective": d.final_objective}))
        .collect();
    let metrics = json!({
        "n": cloud.len(),
        "classes": labels.classes(),
        "n_labeled": labels.len(),
        "method": s.method,
        "graph": s.graph,
        "weights": s.weights,
        "p": s.solver.p,
        "seed": cfg.seed,
        "accuracy": acc_all,
        "accuracy_unlabeled": acc_unlabeled,
        "solves": per_class,
        "warnings": warnings,
    });
    let pred_path = s.out.clone().unwrap_or_else(|| cfg.out_dir.join("predictions.csv"));
    write_text(&pred_path, &predictions_csv(&out.predicted))?;
    write_json(&cfg.out_dir.join("ssl_metrics.json"), &metrics)?;
    match acc_all {
        Some(a) => println!("accuracy {a:.4}; wrote {}", pred_path.display()),
        None => println!("wrote {}", pred_path.display()),
    }
    Ok(())
}

// ------------------------------------------------------------------ inpaint

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InpaintSettings {
    /// 8-bit PGM input; also the reference for the metrics.
    pub image: Option<PathBuf>,
    /// Side length of a generated gradient-and-edge test image, used instead of `image`.
    pub synthetic: Option<usize>,
    pub mask: Option<PathBuf>,
    pub sample_rate: Option<f64>,
    pub method: Method,
    pub s1: usize,
    pub s2: usize,
    pub lambda: f64,
    pub knn: usize,
    /// Outer rounds; absent means 15 for GpL and 3 for HpL.
    pub rounds: Option<usize>,
    pub solver: SolverSettings,
    pub out: Option<PathBuf>,
    pub metrics_out: Option<PathBuf>,
    /// Write ASCII (`P2`) instead of binary (`P5`).
    pub ascii: bool,
}

impl Default for InpaintSettings {
    fn default() -> Self {
        let patch = PatchConfig::default();
        Self {
            image: None,
            synthetic: None,
            mask: None,
            sample_rate: None,
            method: patch.method,
            s1: patch.s1,
            s2: patch.s2,
            lambda: patch.lambda,
            knn: patch.k_n,
            rounds: None,
            solver: SolverSettings::default(),
            out: None,
            metrics_out: None,
            ascii: false,
        }
    }
}

pub fn inpaint_cmd(cfg: &RunConfig<InpaintSettings>) -> Result<(), CliError> {
    let s = &cfg.settings;
    let patch = PatchConfig {
        s1: s.s1,
        s2: s.s2,
        lambda: s.lambda,
        k_n: s.knn,
        outer_iterations: s.rounds,
        method: s.method,
        p: s.solver.p,
    };
    patch.validate()?;
    s.solver.validate()?;
    if s.rounds == Some(0) {
        return Err(usage("--K must be at least 1"));
    }
    match (&s.image, s.synthetic) {
        (Some(_), Some(_)) => return Err(usage("give either --image or --synthetic, not both")),
        (None, None) => return Err(usage("inpaint needs --image or --synthetic")),
        (None, Some(side)) if side < 2 => return Err(usage("--synthetic needs a side of at least 2")),
        _ => {}
    }
    match (&s.mask, s.sample_rate) {
        (Some(_), Some(_)) => return Err(usage("give either --mask or --sample-rate, not both")),
        (None, None) => return Err(usage("inpaint needs --mask or --sample-rate")),
        (None, Some(r)) if !(r > 0.0 && r <= 1.0) => {
            return Err(usage(format!("--sample-rate must lie in (0, 1], got {r}")))
        }
        _ => {}
    }

    let image: ImageGrid = match (&s.image, s.synthetic) {
        (Some(path), _) => load_pgm(path)?,
        (None, Some(side)) => gradient_edge_image(side, side)?,
        (None, None) => unreachable!("checked above"),
    };
    if s.knn > image.len() {
        return Err(usage(format!("--knn {} exceeds the {} pixels", s.knn, image.len())));
    }
    let mask = match (&s.mask, s.sample_rate) {
        (Some(path), _) => load_mask(path, image.height(), image.width())?,
        (None, Some(rate)) => PixelMask::random(image.height(), image.width(), rate, cfg.seed)?,
        (None, None) => unreachable!("checked above"),
    };
    if mask.is_empty() {
        return Err(usage("mask has no observed pixels"));
    }

    let result = inpaint(&image, &mask, &patch, &s.solver.options(cfg.seed), None)?;
    let fill = mean_fill(&image, &mask)?;
    let ssim_of = |img: &ImageGrid| ssim(&image, img).ok();
    let rounds: Vec<_> = result
        .rounds
        .iter()
        .map(|d| json!({"epochs_run": d.epochs_run, "stop_reason": d.stop_reason, "final_objective": d.final_objective}))
        .collect();
    let metrics = json!({
        "height": image.height(),
        "width": image.width(),
        "observed": mask.count(),
        "method": s.method,
        "rounds": patch.rounds(),
        "seed": cfg.seed,
        "psnr": psnr_for_table(psnr(&image, &result.image)?),
        "ssim": ssim_of(&result.image),
        "psnr_mean_fill": psnr_for_table(psnr(&image, &fill)?),
        "ssim_mean_fill": ssim_of(&fill),
        "solves": rounds,
    });
    let out = s.out.clone().unwrap_or_else(|| cfg.out_dir.join("inpainted.pgm"));
    let metrics_out = s.metrics_out.clone().unwrap_or_else(|| cfg.out_dir.join("inpaint_metrics.json"));
    write_bytes(&out, &encode_pgm(&result.image, !s.ascii))?;
    write_text(&cfg.out_dir.join("mask.csv"), &mask.to_csv())?;
    write_json(&metrics_out, &metrics)?;
    println!("PSNR {:.3} dB; wrote {}", psnr_for_table(psnr(&image, &result.image)?), out.display());
    Ok(())
}

// ------------------------------------------------------------------ prox-test

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxTestSettings {
    pub instances: usize,
}

impl Default for ProxTestSettings {
    fn default() -> Self {
        Self { instances: 1000 }
    }
}

pub fn prox_test(cfg: &RunConfig<ProxTestSettings>) -> Result<(), CliError> {
    let report = oracle_suite(cfg.settings.instances, cfg.seed)?;
    let text = serde_json::to_string(&report).map_err(CliError::runtime)?;
    write_text(&cfg.out_dir.join("prox_test.json"), &(text.clone() + "\n"))?;
    println!("{text}");
    if report.failures > 0 {
        return Err(CliError::Runtime(format!("{} of {} prox instances failed", report.failures, report.instances)));
    }
    Ok(())
}
