//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use occseg::evaluation::{SynthConfig, SynthImage};
use occseg::imaging::{segment_unsupervised, ImageFeatures, PyramidParams, RasterImage, SegmentMap, HOG_DIM};
use occseg::inference::EnergyMaps;
use occseg::learning::loss;
use occseg::model::{Label, ModelLayout, Position, ViewpointShape};
use occseg::{Features, RunConfig, Weights};

/// Concave sequence of `k + 1` values: random start, random first slope,
/// slopes decreasing by random amounts.
pub fn random_concave(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> Vec<f64> {
    let mut w = vec![rng.gen_range(-scale..scale)];
    let mut slope = rng.gen_range(-scale..scale);
    for _ in 0..k {
        let last = *w.last().unwrap();
        w.push(last + slope);
        slope -= rng.gen_range(0.0..scale);
    }
    w
}

/// Disjoint random cliques over `n` cells, `count` labels drawn per cell.
pub fn random_cliques(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<Vec<usize>> {
    let tags: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=count)).collect();
    (1..=count)
        .map(|c| (0..n).filter(|&i| tags[i] == c).collect::<Vec<_>>())
        .filter(|c| !c.is_empty())
        .collect()
}

pub fn random_maps(rng: &mut ChaCha8Rng, w: usize, h: usize, k: usize) -> EnergyMaps<f64> {
    let n = w * h;
    let gen = |r: &mut ChaCha8Rng| (0..n).map(|_| r.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
    let f = gen(rng);
    let b = gen(rng);
    let r = gen(rng);
    let n_cliques = rng.gen_range(0..=3);
    EnergyMaps {
        shape: ViewpointShape::new(w, h).unwrap(),
        f,
        b,
        r,
        constant: rng.gen_range(-1.0..1.0),
        pairwise: rng.gen_range(0.0..1.0),
        hop: random_concave(rng, k, 1.0),
        cliques: random_cliques(rng, n, n_cliques),
    }
}

/// Clique potential as the minimum of the lines through consecutive weight
/// pairs, evaluated at the count scaled to `K`.
pub fn envelope(hop: &[f64], visible: usize, size: usize) -> f64 {
    let k = hop.len() - 1;
    let t = visible as f64 * k as f64 / size as f64;
    (1..=k)
        .map(|j| hop[j - 1] + (t - (j - 1) as f64) * (hop[j] - hop[j - 1]))
        .fold(f64::INFINITY, f64::min)
}

/// Clique potential as linear interpolation of the weights at the scaled count.
pub fn interpolated(hop: &[f64], visible: usize, size: usize) -> f64 {
    let k = hop.len() - 1;
    let t = visible as f64 * k as f64 / size as f64;
    let lo = (t.floor() as usize).min(k);
    if lo == k {
        return hop[k];
    }
    let frac = t - lo as f64;
    hop[lo] * (1.0 - frac) + hop[lo + 1] * frac
}

fn disagreements(w: usize, h: usize, v: &[bool]) -> usize {
    let mut c = 0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w && v[i] != v[i + 1] {
                c += 1;
            }
            if y + 1 < h && v[i] != v[i + w] {
                c += 1;
            }
        }
    }
    c
}

/// Energy of `v` on explicit maps, clique terms by the line envelope.
pub fn maps_energy(m: &EnergyMaps<f64>, v: &[bool]) -> f64 {
    let mut e = m.constant;
    for i in 0..v.len() {
        e += if v[i] { m.f[i] } else { m.b[i] + m.r[i] };
    }
    e += m.pairwise * disagreements(m.shape.width, m.shape.height, v) as f64;
    for c in &m.cliques {
        let vis = c.iter().filter(|&&i| v[i]).count();
        e += envelope(&m.hop, vis, c.len());
    }
    e
}

pub fn bits(mask: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

/// Minimum energy over every labelling.
pub fn brute_min(m: &EnergyMaps<f64>) -> f64 {
    let n = m.f.len();
    (0..1usize << n)
        .map(|mask| maps_energy(m, &bits(mask, n)))
        .fold(f64::INFINITY, f64::min)
}

/// Energy of `y` computed term by term from the HOG cells, segment ids and
/// weight groups. Clique terms use `clique` (envelope or interpolation).
pub fn label_energy(
    features: &Features,
    w: &Weights,
    y: &Label,
    clique: fn(&[f64], usize, usize) -> f64,
) -> f64 {
    let shape = w.layout().shape(y.viewpoint);
    let b = w.block(y.viewpoint);
    let level = &features.pyramid.levels[y.pos.level];
    let ids = &features.cells[y.pos.level];
    let mut e = b.bias;
    let mut segs: Vec<(u32, usize, usize)> = Vec::new();
    for dy in 0..shape.height {
        for dx in 0..shape.width {
            let i = dy * shape.width + dx;
            let (cx, cy) = (y.pos.x + dx as i64, y.pos.y + dy as i64);
            let vis = y.visibility[i];
            if !vis {
                e += b.prior[i];
            }
            match level.hog.cell_checked(cx, cy) {
                Some(h) => {
                    let wv = if vis { b.visible } else { b.occluded };
                    e += (0..HOG_DIM).map(|d| wv[i * HOG_DIM + d] * h[d]).sum::<f64>();
                    let id = ids.id(cx as usize, cy as usize);
                    match segs.iter_mut().find(|s| s.0 == id) {
                        Some(s) => {
                            s.1 += vis as usize;
                            s.2 += 1;
                        }
                        None => segs.push((id, vis as usize, 1)),
                    }
                }
                None => e += b.truncation,
            }
        }
    }
    e += b.pairwise * disagreements(shape.width, shape.height, &y.visibility) as f64;
    for (_, vis, size) in segs {
        e += clique(b.hop, vis, size);
    }
    e
}

/// Every placement the search should visit: all levels, boxes overhanging
/// the grid by up to half their size.
pub fn all_positions(features: &Features, layout: &ModelLayout) -> Vec<(usize, Position)> {
    let mut out = Vec::new();
    for (level, l) in features.pyramid.levels.iter().enumerate() {
        for (a, s) in layout.shapes().iter().enumerate() {
            let (hw, hh) = ((s.width / 2) as i64, (s.height / 2) as i64);
            let (gw, gh) = (l.hog.grid_w as i64, l.hog.grid_h as i64);
            for y in -hh..=gh - s.height as i64 + hh {
                for x in -hw..=gw - s.width as i64 + hw {
                    out.push((a, Position::new(x, y, level)));
                }
            }
        }
    }
    out
}

/// Exhaustive minimum of energy minus loss against `y_gt`.
pub fn brute_loss_augmented(features: &Features, w: &Weights, y_gt: &Label) -> f64 {
    let layout = w.layout();
    let geometry = features.pyramid.geometry();
    let gt_shape = layout.shape(y_gt.viewpoint);
    let mut best = f64::INFINITY;
    for (a, pos) in all_positions(features, layout) {
        let shape = layout.shape(a);
        let n = shape.cells();
        for mask in 0..1usize << n {
            let y = Label::new(pos, bits(mask, n), a);
            let d = loss(y_gt, gt_shape, &y, shape, &geometry).total;
            best = best.min(label_energy(features, w, &y, envelope) - d);
        }
    }
    best
}

/// Small random image with a few flat rectangles, so its over-segmentation
/// has several segments.
pub fn blocky_image(rng: &mut ChaCha8Rng, width: usize, height: usize) -> RasterImage<f64> {
    let rects: Vec<(usize, usize, usize, usize, [f64; 3])> = (0..5)
        .map(|_| {
            let x0 = rng.gen_range(0..width);
            let y0 = rng.gen_range(0..height);
            let x1 = rng.gen_range(x0 + 1..=width);
            let y1 = rng.gen_range(y0 + 1..=height);
            (x0, y0, x1, y1, [rng.gen(), rng.gen(), rng.gen()])
        })
        .collect();
    let noise: Vec<f64> = (0..width * height * 3).map(|_| rng.gen_range(-0.05..0.05)).collect();
    RasterImage::from_fn(width, height, 3, |x, y, c| {
        let mut v = 0.5;
        for r in &rects {
            if x >= r.0 && x < r.2 && y >= r.1 && y < r.3 {
                v = r.4[c];
            }
        }
        (v + noise[(y * width + x) * 3 + c]).clamp(0.0, 1.0)
    })
    .unwrap()
}

pub fn features_of(img: &RasterImage<f64>, params: &PyramidParams, seg_k: f64, min_size: usize) -> (Features, SegmentMap) {
    let seg = segment_unsupervised(img, seg_k, min_size).unwrap();
    (ImageFeatures::compute(img, &seg, params).unwrap(), seg)
}

/// Features and segments of synthetic images under the default run settings.
pub fn prepare(images: &[SynthImage]) -> Vec<(Features, SegmentMap)> {
    use rayon::prelude::*;
    let run = RunConfig::default();
    images
        .par_iter()
        .map(|d| features_of(&d.image, &run.pyramid(), run.seg_k, run.seg_min_size))
        .collect()
}

pub fn synth(n_images: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        n_images,
        seed,
        ..SynthConfig::default()
    }
}

/// Random weights: HOG groups scaled by `hog_scale`, nonnegative pairwise,
/// concave clique weights when `concave`, arbitrary otherwise.
pub fn random_weights(rng: &mut ChaCha8Rng, layout: ModelLayout, hog_scale: f64, concave: bool) -> Weights {
    let mut w = Weights::zeros(layout.clone());
    for a in 0..layout.num_viewpoints() {
        let b = layout.block(a);
        let o = layout.offset(a);
        let data = w.as_mut_slice();
        for j in b.visible().chain(b.occluded()) {
            data[o + j] = rng.gen_range(-hog_scale..hog_scale);
        }
        for j in b.prior() {
            data[o + j] = rng.gen_range(-0.5..0.5);
        }
        data[o + b.truncation()] = rng.gen_range(-0.5..0.5);
        data[o + b.pairwise()] = rng.gen_range(0.0..0.5);
        data[o + b.bias()] = rng.gen_range(-1.0..1.0);
        let hop = if concave {
            random_concave(rng, layout.k(), 0.5)
        } else {
            (0..=layout.k()).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        for (j, v) in b.hop().zip(hop) {
            data[o + j] = v;
        }
    }
    w
}

/// A margin QP: rows `(sample, g, loss)`, regularizer, weight dimension,
/// and the cone given as `nonneg` coordinates and one concave range.
pub struct TinyQp {
    pub dim: usize,
    pub samples: usize,
    pub c_reg: f64,
    pub rows: Vec<(usize, Vec<f64>, f64)>,
    pub nonneg: Vec<usize>,
    pub concave: Option<std::ops::Range<usize>>,
}

/// Solution of a tiny QP by enumerating active sets of its inequality
/// constraints and keeping the best KKT point. Returns `(w, objective)`.
pub fn qp_by_enumeration(qp: &TinyQp) -> Option<(Vec<f64>, f64)> {
    let (d, n) = (qp.dim, qp.samples);
    let nz = d + n;
    // Constraints a·z ≥ c over z = (w, ξ).
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    for (s, g, l) in &qp.rows {
        let mut a = g.clone();
        a.resize(nz, 0.0);
        a[d + s] = 1.0;
        cons.push((a, *l));
    }
    for s in 0..n {
        let mut a = vec![0.0; nz];
        a[d + s] = 1.0;
        cons.push((a, 0.0));
    }
    for &j in &qp.nonneg {
        let mut a = vec![0.0; nz];
        a[j] = 1.0;
        cons.push((a, 0.0));
    }
    if let Some(r) = &qp.concave {
        for j in r.start..r.end - 2 {
            let mut a = vec![0.0; nz];
            a[j] = -1.0;
            a[j + 1] = 2.0;
            a[j + 2] = -1.0;
            cons.push((a, 0.0));
        }
    }
    let objective = |z: &[f64]| -> f64 {
        0.5 * z[..d].iter().map(|x| x * x).sum::<f64>() + qp.c_reg * z[d..].iter().sum::<f64>()
    };
    let m = cons.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for set in 0..1usize << m {
        let active: Vec<usize> = (0..m).filter(|&j| set >> j & 1 == 1).collect();
        let k = active.len();
        let size = nz + k;
        let mut kkt = DMatrix::<f64>::zeros(size, size);
        let mut rhs = DVector::<f64>::zeros(size);
        for i in 0..d {
            kkt[(i, i)] = 1.0;
        }
        for s in 0..n {
            rhs[d + s] = -qp.c_reg;
        }
        for (col, &j) in active.iter().enumerate() {
            for i in 0..nz {
                kkt[(i, nz + col)] = -cons[j].0[i];
                kkt[(nz + col, i)] = cons[j].0[i];
            }
            rhs[nz + col] = cons[j].1;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let z: Vec<f64> = sol.iter().take(nz).copied().collect();
        let duals_ok = sol.iter().skip(nz).all(|&l| l >= -1e-9);
        let feasible = cons
            .iter()
            .all(|(a, c)| a.iter().zip(&z).map(|(x, y)| x * y).sum::<f64>() >= c - 1e-9);
        if duals_ok && feasible {
            let obj = objective(&z);
            if best.as_ref().is_none_or(|b| obj < b.1) {
                best = Some((z[..d].to_vec(), obj));
            }
        }
    }
    best
}
