//! Grayscale inpainting from sparse pixels. Each pixel becomes a point (its
//! patch plus λ-scaled pixel coordinates); the unknown intensities are
//! interpolated over a k-NN structure of those points, and the point cloud
//! is rebuilt from the current estimate for a fixed number of rounds.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::info;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rng_from_seed, LabelConstraints, PointCloud};
use crate::hypergraph::{build_structure, GraphSpec, Method, WeightScheme};
use crate::solver::{solve, Diagnostics, SolveOptions};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    /// Values are clamped into `[0, 1]`; non-finite values are rejected.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyInput("image has a zero dimension".into()));
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch { expected: height * width, got: data.len() });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("pixel ({}, {}) is not finite", k / width, k % width)));
        }
        Ok(Self { height, width, data: data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height * width).map(|k| f(k / width, k % width)).collect();
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn same_shape(&self, other: &ImageGrid) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::invalid(format!(
                "image shapes differ: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }
}

/// Set of observed pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelMask {
    height: usize,
    width: usize,
    observed: Vec<bool>,
}

impl PixelMask {
    pub fn from_pixels(height: usize, width: usize, pixels: &[(usize, usize)]) -> Result<Self> {
        let mut observed = vec![false; height * width];
        for &(i, j) in pixels {
            if i >= height || j >= width {
                return Err(Error::invalid(format!("pixel ({i}, {j}) lies outside {height}x{width}")));
            }
            observed[i * width + j] = true;
        }
        Ok(Self { height, width, observed })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self { height, width, observed: vec![true; height * width] }
    }

    /// `round(rate · N1 · N2)` distinct pixels (at least one), uniformly at random.
    pub fn random(height: usize, width: usize, rate: f64, seed: u64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::invalid(format!("sampling rate must lie in (0, 1], got {rate}")));
        }
        let n = height * width;
        if n == 0 {
            return Err(Error::EmptyInput("image has a zero dimension".into()));
        }
        let count = ((rate * n as f64).round() as usize).clamp(1, n);
        let mut observed = vec![false; n];
        for k in sample(&mut rng_from_seed(seed), n, count) {
            observed[k] = true;
        }
        Ok(Self { height, width, observed })
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.width + j]
    }

    pub fn count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Observed pixels in row-major order.
    pub fn pixels(&self) -> Vec<(usize, usize)> {
        (0..self.observed.len())
            .filter(|&k| self.observed[k])
            .map(|k| (k / self.width, k % self.width))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (i, j) in self.pixels() {
            let _ = writeln!(out, "{i},{j}");
        }
        out
    }
}

/// Parse "i,j" rows.
pub fn parse_mask(text: &str, height: usize, width: usize) -> Result<PixelMask> {
    let mut pixels = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse { row: row + 1, msg };
        let (i, j) = line.split_once(',').ok_or_else(|| bad("expected `i,j`".into()))?;
        let i = i.trim().parse().map_err(|e| bad(format!("row index {i:?}: {e}")))?;
        let j = j.trim().parse().map_err(|e| bad(format!("column index {j:?}: {e}")))?;
        pixels.push((i, j));
    }
    PixelMask::from_pixels(height, width, &pixels)
}

pub fn load_mask(path: impl AsRef<Path>, height: usize, width: usize) -> Result<PixelMask> {
    parse_mask(&fs::read_to_string(path)?, height, width)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchConfig {
    pub s1: usize,
    pub s2: usize,
    pub lambda: f64,
    pub k_n: usize,
    /// Outer rounds; `None` means 15 for GpL and 3 for HpL.
    pub outer_iterations: Option<usize>,
    pub method: Method,
    pub p: f64,
}

pub const DEFAULT_GPL_ROUNDS: usize = 15;
pub const DEFAULT_HPL_ROUNDS: usize = 3;

impl Default for PatchConfig {
    fn default() -> Self {
        Self { s1: 11, s2: 11, lambda: 10.0, k_n: 10, outer_iterations: None, method: Method::Hpl, p: 2.0 }
    }
}

impl PatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s1 % 2 == 0 || self.s2 % 2 == 0 {
            return Err(Error::invalid(format!("patch sizes must be odd, got {}x{}", self.s1, self.s2)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.k_n < 2 {
            return Err(Error::invalid(format!("k_n must be >= 2, got {}", self.k_n)));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::invalid(format!("exponent p must be >= 1, got {}", self.p)));
        }
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.outer_iterations.unwrap_or(match self.method {
            Method::Gpl => DEFAULT_GPL_ROUNDS,
            Method::Hpl => DEFAULT_HPL_ROUNDS,
        })
    }

    pub fn point_dim(&self) -> usize {
        self.s1 * self.s2 + if self.lambda > 0.0 { 2 } else { 0 }
    }
}

/// Reflect `k` into `0..n` without repeating the edge sample.
fn reflect(k: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if k < 0 {
        -k
    } else if k >= n {
        2 * (n - 1) - k
    } else {
        k
    };
    r as usize
}

/// Mirror padding that skips the boundary pixel: `f[-1] = f[1]`.
pub fn mirror_extend(img: &ImageGrid, pad_i: usize, pad_j: usize) -> Result<ImageGrid> {
    if pad_i >= img.height.max(1) || pad_j >= img.width.max(1) {
        return Err(Error::invalid(format!(
            "padding ({pad_i}, {pad_j}) must be smaller than the image ({}x{})",
            img.height, img.width
        )));
    }
    let (h, w) = (img.height + 2 * pad_i, img.width + 2 * pad_j);
    ImageGrid::from_fn(h, w, |i, j| {
        img.get(
            reflect(i as isize - pad_i as isize, img.height),
            reflect(j as isize - pad_j as isize, img.width),
        )
    })
}

/// Vertex `i·N2 + j` for pixel `(i, j)`.
pub fn vertex_of(width: usize, i: usize, j: usize) -> usize {
    i * width + j
}

pub fn pixel_of(width: usize, vertex: usize) -> (usize, usize) {
    (vertex / width, vertex % width)
}

/// One point per pixel in row-major order: the `s1 × s2` patch around the
/// pixel (row-major, from the mirror-extended image), followed by
/// `λ i/N1, λ j/N2` when `λ > 0`.
pub fn extract_patches(img: &ImageGrid, cfg: &PatchConfig) -> Result<PointCloud> {
    cfg.validate()?;
    let (hi, hj) = (cfg.s1 / 2, cfg.s2 / 2);
    let ext = mirror_extend(img, hi, hj)?;
    let dim = cfg.point_dim();
    let (n1, n2) = (img.height, img.width);
    let mut coords = vec![0.0; n1 * n2 * dim];
    coords.par_chunks_mut(dim).enumerate().for_each(|(v, point)| {
        let (i, j) = pixel_of(n2, v);
        let mut k = 0;
        for a in 0..cfg.s1 {
            for b in 0..cfg.s2 {
                point[k] = ext.get(i + a, j + b);
                k += 1;
            }
        }
        if cfg.lambda > 0.0 {
            point[k] = cfg.lambda * i as f64 / n1 as f64;
            point[k + 1] = cfg.lambda * j as f64 / n2 as f64;
        }
    });
    PointCloud::new(dim, coords)
}

/// Observed pixels keep their value, every other pixel gets the observed mean.
pub fn mean_fill(observed: &ImageGrid, mask: &PixelMask) -> Result<ImageGrid> {
    check_mask(observed, mask)?;
    let pixels = mask.pixels();
    let mean = pixels.iter().map(|&(i, j)| observed.get(i, j)).sum::<f64>() / pixels.len() as f64;
    ImageGrid::from_fn(observed.height, observed.width, |i, j| {
        if mask.is_observed(i, j) {
            observed.get(i, j)
        } else {
            mean
        }
    })
}

fn check_mask(img: &ImageGrid, mask: &PixelMask) -> Result<()> {
    if mask.height != img.height || mask.width != img.width {
        return Err(Error::invalid(format!(
            "mask is {}x{} but the image is {}x{}",
            mask.height, mask.width, img.height, img.width
        )));
    }
    if mask.is_empty() {
        return Err(Error::EmptyInput("mask has no observed pixels".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintResult {
    pub image: ImageGrid,
    /// Solver diagnostics per outer round.
    pub rounds: Vec<Diagnostics>,
}

/// Restore the unobserved pixels of `observed`.
///
/// Each round builds the patch cloud of the current estimate, its k-NN
/// structure with self-tuning weights (`k0 = k_n`), and solves with the
/// observed pixels as constraints, warm-started from the current estimate.
/// Without `initial`, GpL starts from the mean fill and HpL from a full GpL
/// run with default rounds.
pub fn inpaint(
    observed: &ImageGrid,
    mask: &PixelMask,
    cfg: &PatchConfig,
    opts: &SolveOptions,
    initial: Option<&ImageGrid>,
) -> Result<InpaintResult> {
    cfg.validate()?;
    check_mask(observed, mask)?;
    let mut estimate = match (initial, cfg.method) {
        (Some(init), _) => {
            observed.same_shape(init)?;
            init.clone()
        }
        (None, Method::Gpl) => mean_fill(observed, mask)?,
        (None, Method::Hpl) => {
            let gpl = PatchConfig { method: Method::Gpl, outer_iterations: None, ..*cfg };
            inpaint(observed, mask, &gpl, opts, None)?.image
        }
    };
    let (n1, n2) = (observed.height, observed.width);
    let pixels = mask.pixels();
    let labels = LabelConstraints::new(
        pixels.iter().map(|&(i, j)| (vertex_of(n2, i, j), observed.get(i, j))).collect(),
        n1 * n2,
    )?;
    let scheme = WeightScheme::SelfTuning { k0: cfg.k_n.min(n1 * n2 - 1).max(1) };
    let solver = SolveOptions { p: cfg.p, ..*opts };
    let mut rounds = Vec::with_capacity(cfg.rounds());
    for round in 0..cfg.rounds() {
        if pixels.len() == n1 * n2 {
            break;
        }
        let cloud = extract_patches(&estimate, cfg)?;
        let k = cfg.k_n.min(n1 * n2);
        let hg = build_structure(&cloud, cfg.method, GraphSpec::Knn(k), scheme)?;
        let (u, diag) = solve(&hg, &labels, &solver, Some(&estimate.data))?;
        info!(
            "inpaint {} round {}: {} epochs, objective {:.6e}",
            cfg.method,
            round + 1,
            diag.epochs_run,
            diag.final_objective
        );
        let mut data: Vec<f64> = u.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        for &(i, j) in &pixels {
            data[vertex_of(n2, i, j)] = observed.get(i, j);
        }
        estimate = ImageGrid::new(n1, n2, data)?;
        rounds.push(diag);
    }
    // a full mask needs no solve; the constraints are the answer
    if pixels.len() == n1 * n2 {
        estimate = observed.clone();
    }
    Ok(InpaintResult { image: estimate, rounds })
}

/// `10 log10(1 / MSE)`; identical images give `+∞`.
pub fn psnr(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    a.same_shape(b)?;
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { 10.0 * (1.0 / mse).log10() })
}

/// Table value for a PSNR: infinite values are reported as 99 dB.
pub fn psnr_for_table(db: f64) -> f64 {
    db.min(99.0)
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Mean local SSIM over every 11×11 window that fits inside the image
/// (Gaussian weights, σ = 1.5, dynamic range 1).
pub fn ssim(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    a.same_shape(b)?;
    if a.height < SSIM_WINDOW || a.width < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {}x{}",
            a.height, a.width
        )));
    }
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|k| (-((k as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = g.iter().sum::<f64>().powi(2);
    let (rows, cols) = (a.height - SSIM_WINDOW + 1, a.width - SSIM_WINDOW + 1);
    let sum: f64 = (0..rows * cols)
        .into_par_iter()
        .map(|k| {
            let (i0, j0) = (k / cols, k % cols);
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (di, gi) in g.iter().enumerate() {
                for (dj, gj) in g.iter().enumerate() {
                    let w = gi * gj / total;
                    let (x, y) = (a.get(i0 + di, j0 + dj), b.get(i0 + di, j0 + dj));
                    mx += w * x;
                    my += w * y;
                    sxx += w * x * x;
                    syy += w * y * y;
                    sxy += w * x * y;
                }
            }
            let (vx, vy, cxy) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
        })
        .sum();
    Ok(sum / (rows * cols) as f64)
}

/// Read an 8-bit PGM (`P2` or `P5`), scaling intensities by `1 / maxval`.
pub fn parse_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let bad = |msg: &str| Error::Parse { row: 0, msg: format!("PGM: {msg}") };
    let mut pos = 0;
    // header tokens, skipping whitespace and comments
    let token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos)?;
    let number = |s: String| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let width = number(token(&mut pos)?)?;
    let height = number(token(&mut pos)?)?;
    let maxval = number(token(&mut pos)?)?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit images (maxval 1..=255) are supported"));
    }
    let n = width * height;
    let raw: Vec<usize> = match magic.as_str() {
        "P5" => {
            // exactly one whitespace byte separates the header from the data
            let start = pos + 1;
            if bytes.len() < start + n {
                return Err(bad("truncated pixel data"));
            }
            bytes[start..start + n].iter().map(|&b| b as usize).collect()
        }
        "P2" => (0..n).map(|_| token(&mut pos).and_then(number)).collect::<Result<_>>()?,
        _ => return Err(bad("expected P2 or P5")),
    };
    if raw.iter().any(|&v| v > maxval) {
        return Err(bad("pixel exceeds maxval"));
    }
    ImageGrid::new(height, width, raw.into_iter().map(|v| v as f64 / maxval as f64).collect())
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ImageGrid> {
    parse_pgm(&fs::read(path)?)
}

/// Encode as 8-bit PGM, binary (`P5`) or ASCII (`P2`).
pub fn encode_pgm(img: &ImageGrid, binary: bool) -> Vec<u8> {
    let levels = img.data.iter().map(|v| (v * 255.0).round() as u8);
    if binary {
        let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
        out.extend(levels);
        out
    } else {
        let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
        for (k, v) in levels.enumerate() {
            out.push_str(&v.to_string());
            out.push(if (k + 1) % img.width == 0 { '\n' } else { ' ' });
        }
        out.into_bytes()
    }
}

pub fn write_pgm(img: &ImageGrid, path: impl AsRef<Path>, binary: bool) -> Result<()> {
    fs::write(path, encode_pgm(img, binary))?;
    Ok(())
}

/// Smooth horizontal ramp with a sharp horizontal edge across the middle row.
pub fn gradient_edge_image(height: usize, width: usize) -> Result<ImageGrid> {
    ImageGrid::from_fn(height, width, |i, j| {
        let ramp = 0.1 + 0.5 * j as f64 / (width.max(2) - 1) as f64;
        if i >= height / 2 {
            ramp + 0.3
        } else {
            ramp
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(vals: &[f64]) -> ImageGrid {
        ImageGrid::new(1, vals.len(), vals.to_vec()).unwrap()
    }

    #[test]
    fn mirror_examples() {
        let img = row(&[0.1, 0.2, 0.3]);
        assert_eq!(mirror_extend(&img, 0, 1).unwrap().data(), &[0.2, 0.1, 0.2, 0.3, 0.2]);
        assert_eq!(mirror_extend(&img, 0, 0).unwrap(), img);
        assert!(mirror_extend(&img, 0, 3).is_err());
        assert!(mirror_extend(&img, 1, 0).is_err());

        let img = gradient_edge_image(6, 7).unwrap();
        let ext = mirror_extend(&img, 2, 3).unwrap();
        for i in 0..6 {
            for j in 0..7 {
                assert_eq!(ext.get(i + 2, j + 3), img.get(i, j));
            }
        }
        assert_eq!(ext.get(0, 3), img.get(2, 0));
    }

    #[test]
    fn patch_examples() {
        let single = ImageGrid::new(1, 1, vec![0.4]).unwrap();
        let cfg = PatchConfig { s1: 1, s2: 1, lambda: 0.0, ..Default::default() };
        assert_eq!(extract_patches(&single, &cfg).unwrap().coords(), &[0.4]);

        let img = ImageGrid::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let cfg = PatchConfig { s1: 1, s2: 1, lambda: 10.0, ..Default::default() };
        let c = extract_patches(&img, &cfg).unwrap();
        assert_eq!(c.dim(), 3);
        assert_eq!(c.point(3), &[0.4, 5.0, 5.0]);
        assert_eq!(c.point(1), &[0.2, 0.0, 5.0]);

        let flat = ImageGrid::new(4, 5, vec![0.6; 20]).unwrap();
        let cfg = PatchConfig { s1: 3, s2: 3, lambda: 0.0, ..Default::default() };
        let c = extract_patches(&flat, &cfg).unwrap();
        assert!(c.coords().iter().all(|&v| v == 0.6));

        assert!(extract_patches(&img, &PatchConfig { s1: 2, ..cfg }).is_err());
    }

    #[test]
    fn patch_center_reads_back_the_pixel() {
        let img = gradient_edge_image(9, 8).unwrap();
        let cfg = PatchConfig { s1: 5, s2: 3, lambda: 2.0, ..Default::default() };
        let c = extract_patches(&img, &cfg).unwrap();
        let center = (cfg.s1 / 2) * cfg.s2 + cfg.s2 / 2;
        for v in 0..c.len() {
            let (i, j) = pixel_of(8, v);
            assert_eq!(vertex_of(8, i, j), v);
            assert_eq!(c.point(v)[center], img.get(i, j));
        }
    }

    #[test]
    fn metrics() {
        let a = gradient_edge_image(16, 16).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert_eq!(psnr_for_table(f64::INFINITY), 99.0);
        let shifted = ImageGrid::from_fn(16, 16, |i, j| a.get(i, j) + 0.1).unwrap();
        assert_relative_eq!(psnr(&a, &shifted).unwrap(), 20.0, epsilon = 1e-9);
        assert_eq!(psnr(&a, &shifted).unwrap(), psnr(&shifted, &a).unwrap());
        assert_relative_eq!(ssim(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        let inv = ImageGrid::from_fn(16, 16, |i, j| 1.0 - a.get(i, j)).unwrap();
        assert!(ssim(&a, &inv).unwrap() < 1.0);
        assert!(ssim(&row(&[0.0; 20]), &row(&[0.0; 20])).is_err());
        assert!(psnr(&a, &row(&[0.0; 3])).is_err());
    }

    #[test]
    fn masks() {
        let m = PixelMask::random(10, 10, 0.2, 3).unwrap();
        assert_eq!(m.count(), 20);
        assert_eq!(m, PixelMask::random(10, 10, 0.2, 3).unwrap());
        let back = parse_mask(&m.to_csv(), 10, 10).unwrap();
        assert_eq!(back, m);
        assert!(parse_mask("10,0", 10, 10).is_err());
        assert!(parse_mask("1;2", 10, 10).is_err());
        assert!(PixelMask::random(10, 10, 0.0, 3).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let img = ImageGrid::from_fn(3, 4, |i, j| ((i * 4 + j) * 20) as f64 / 255.0).unwrap();
        for binary in [true, false] {
            let back = parse_pgm(&encode_pgm(&img, binary)).unwrap();
            assert_eq!(back, img);
        }
        let with_comment = b"P2\n# hi\n2 1\n# there\n4\n0 4\n";
        assert_eq!(parse_pgm(with_comment).unwrap().data(), &[0.0, 1.0]);
        assert!(parse_pgm(b"P6\n1 1\n255\n\0").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\0").is_err());
    }

    #[test]
    fn full_mask_returns_input() {
        let img = gradient_edge_image(8, 8).unwrap();
        let mask = PixelMask::full(8, 8);
        let cfg = PatchConfig { s1: 3, s2: 3, k_n: 5, ..Default::default() };
        let out = inpaint(&img, &mask, &cfg, &SolveOptions::default(), None).unwrap();
        assert_eq!(out.image, img);
    }

    #[test]
    fn constant_image_is_recovered() {
        let img = ImageGrid::new(12, 12, vec![0.37; 144]).unwrap();
        let mask = PixelMask::random(12, 12, 0.2, 1).unwrap();
        let cfg = PatchConfig { s1: 3, s2: 3, k_n: 6, outer_iterations: Some(2), method: Method::Gpl, ..Default::default() };
        let out = inpaint(&img, &mask, &cfg, &SolveOptions::default(), None).unwrap();
        assert!(out.image.data().iter().all(|&v| (v - 0.37).abs() < 1e-9));
    }

    #[test]
    fn rejects_bad_input() {
        let img = gradient_edge_image(8, 8).unwrap();
        let empty = PixelMask::from_pixels(8, 8, &[]).unwrap();
        let cfg = PatchConfig { s1: 3, s2: 3, k_n: 5, ..Default::default() };
        assert!(inpaint(&img, &empty, &cfg, &SolveOptions::default(), None).is_err());
        let wrong = PixelMask::full(4, 4);
        assert!(inpaint(&img, &wrong, &cfg, &SolveOptions::default(), None).is_err());
        assert!(ImageGrid::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert_eq!(ImageGrid::new(1, 2, vec![-1.0, 2.0]).unwrap().data(), &[0.0, 1.0]);
    }
}
