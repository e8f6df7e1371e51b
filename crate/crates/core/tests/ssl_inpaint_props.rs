use std::collections::HashSet;

use hyperlap::geometry::{sample_gaussian_clusters, PointCloud};
use hyperlap::hypergraph::{GraphSpec, Method, WeightScheme};
use hyperlap::inpaint::{
    extract_patches, gradient_edge_image, inpaint, mean_fill, pixel_of, psnr, vertex_of, ImageGrid, PatchConfig,
    PixelMask,
};
use hyperlap::solver::SolveOptions;
use hyperlap::ssl::{classify, ClassLabels};

fn three_clusters() -> PointCloud {
    let centers = [vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]];
    sample_gaussian_clusters(&centers, 0.6, 25, 8).unwrap().0
}

const TRAIN: [(usize, usize); 6] = [(0, 0), (7, 0), (25, 1), (31, 1), (50, 2), (60, 2)];

fn opts() -> SolveOptions {
    SolveOptions { epochs: 400, tol: 1e-8, ..Default::default() }
}

#[test]
fn permuting_class_ids_permutes_predictions() {
    let cloud = three_clusters();
    let perm = [2usize, 0, 1];
    for method in [Method::Gpl, Method::Hpl] {
        let graph = GraphSpec::Knn(6);
        let weights = WeightScheme::SelfTuning { k0: 5 };
        let base = ClassLabels::from_assignments(TRAIN.to_vec(), cloud.len()).unwrap();
        let renamed =
            ClassLabels::from_assignments(TRAIN.iter().map(|&(i, c)| (i, perm[c])).collect(), cloud.len()).unwrap();
        let a = classify(&cloud, &base, method, graph, weights, &opts()).unwrap();
        let b = classify(&cloud, &renamed, method, graph, weights, &opts()).unwrap();
        let mapped: Vec<usize> = a.predicted.iter().map(|&c| perm[c]).collect();
        assert_eq!(mapped, b.predicted, "{method}");
    }
}

#[test]
fn reordering_vertices_reorders_predictions() {
    let cloud = three_clusters();
    let n = cloud.len();
    // a fixed shuffle: multiplication by a unit modulo n
    let order: Vec<usize> = (0..n).map(|i| (i * 31 + 7) % n).collect();
    assert_eq!(order.iter().collect::<HashSet<_>>().len(), n);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| cloud.point(i).to_vec()).collect();
    let shuffled = PointCloud::from_rows(&rows).unwrap();
    let mut position = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    for method in [Method::Gpl, Method::Hpl] {
        let graph = GraphSpec::Knn(6);
        let weights = WeightScheme::SelfTuning { k0: 5 };
        let base = ClassLabels::from_assignments(TRAIN.to_vec(), n).unwrap();
        let moved = ClassLabels::from_assignments(TRAIN.iter().map(|&(i, c)| (position[i], c)).collect(), n).unwrap();
        let a = classify(&cloud, &base, method, graph, weights, &opts()).unwrap();
        let b = classify(&shuffled, &moved, method, graph, weights, &opts()).unwrap();
        for old in 0..n {
            assert_eq!(a.predicted[old], b.predicted[position[old]], "{method} vertex {old}");
        }
    }
}

#[test]
fn vertex_pixel_mapping_is_a_bijection() {
    for (h, w) in [(1, 1), (3, 7), (16, 5)] {
        let mut seen = HashSet::new();
        for i in 0..h {
            for j in 0..w {
                let v = vertex_of(w, i, j);
                assert!(v < h * w);
                assert_eq!(pixel_of(w, v), (i, j));
                assert!(seen.insert(v));
            }
        }
    }
}

#[test]
fn patch_centers_read_back_pixels() {
    let img = ImageGrid::from_fn(13, 11, |i, j| ((i * 7 + j * 3) % 17) as f64 / 16.0).unwrap();
    for (s1, s2) in [(1, 1), (3, 5), (11, 11)] {
        let cfg = PatchConfig { s1, s2, lambda: 10.0, ..Default::default() };
        let cloud = extract_patches(&img, &cfg).unwrap();
        let center = (s1 / 2) * s2 + s2 / 2;
        for v in 0..cloud.len() {
            let (i, j) = pixel_of(11, v);
            assert_eq!(cloud.point(v)[center], img.get(i, j));
        }
    }
}

#[test]
fn observed_pixels_are_exact_after_every_round_and_fill_improves() {
    let img = gradient_edge_image(20, 20).unwrap();
    let mask = PixelMask::random(20, 20, 0.25, 4).unwrap();
    let fill = psnr(&img, &mean_fill(&img, &mask).unwrap()).unwrap();
    let opts = SolveOptions { epochs: 200, ..Default::default() };
    let mut gpl_image = None;
    for method in [Method::Gpl, Method::Hpl] {
        for rounds in 1..=3 {
            let cfg = PatchConfig { s1: 3, s2: 3, k_n: 8, outer_iterations: Some(rounds), method, ..Default::default() };
            let out = inpaint(&img, &mask, &cfg, &opts, gpl_image.as_ref()).unwrap();
            assert_eq!(out.rounds.len(), rounds);
            for (i, j) in mask.pixels() {
                assert_eq!(out.image.get(i, j), img.get(i, j), "{method} after {rounds} rounds");
            }
            assert!(out.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
            let gain = psnr(&img, &out.image).unwrap();
            assert!(gain >= fill, "{method}: {gain} dB after {rounds} rounds vs fill {fill} dB");
            if method == Method::Gpl && rounds == 3 {
                gpl_image = Some(out.image);
            }
        }
    }
}

#[test]
fn hpl_keeps_up_with_gpl_on_a_linear_gradient() {
    let img = ImageGrid::from_fn(64, 64, |_, j| j as f64 / 63.0).unwrap();
    let mask = PixelMask::random(64, 64, 0.2, 0).unwrap();
    let opts = SolveOptions::default();
    let gpl_cfg = PatchConfig {
        s1: 5,
        s2: 5,
        lambda: 10.0,
        k_n: 10,
        outer_iterations: Some(2),
        method: Method::Gpl,
        p: 2.0,
    };
    let gpl = inpaint(&img, &mask, &gpl_cfg, &opts, None).unwrap();
    let hpl_cfg = PatchConfig { method: Method::Hpl, ..gpl_cfg };
    let hpl = inpaint(&img, &mask, &hpl_cfg, &opts, Some(&gpl.image)).unwrap();
    let (g, h) = (psnr(&img, &gpl.image).unwrap(), psnr(&img, &hpl.image).unwrap());
    assert!(h >= g - 0.1, "HpL {h} dB vs GpL {g} dB");
}
