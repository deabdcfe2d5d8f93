//! Seeded synthetic scenes: textured rectangular objects on cluttered
//! backgrounds, partly hidden by flat-coloured occluders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluation::PixelMask;
use crate::geometry::{PixelRect, PyramidGeometry};
use crate::imaging::RasterImage;
use crate::model::{Label, Position, ViewpointShape};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_images: usize,
    pub seed: u64,
    pub object_texture_seed: u64,
    /// Distinct objects planted in every image.
    pub n_objects: usize,
    /// Occluders per object.
    pub occluder_count: usize,
    /// Largest fraction of an object's box that occluders may cover.
    pub max_occlusion: f64,
    /// Number of background clutter shapes.
    pub clutter_level: usize,
    pub width: usize,
    pub height: usize,
    pub shape: ViewpointShape,
    pub cell_size: usize,
    pub scale_step: f64,
    /// Objects are placed on pyramid levels `0..=max_level`.
    pub max_level: usize,
    /// Place every object after the first so that it overlaps the first.
    pub force_overlap: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_images: 20,
            seed: 0,
            object_texture_seed: 1,
            n_objects: 1,
            occluder_count: 1,
            max_occlusion: 0.5,
            clutter_level: 12,
            width: 160,
            height: 128,
            shape: ViewpointShape { width: 8, height: 6 },
            cell_size: 8,
            scale_step: 2f64.powf(-0.25),
            max_level: 3,
            force_overlap: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.9).contains(&self.max_occlusion) {
            return Err(Error::argument(format!(
                "max occlusion {} outside [0, 0.9]",
                self.max_occlusion
            )));
        }
        if self.n_objects == 0 {
            return Err(Error::argument("need at least one object per image"));
        }
        if !(self.scale_step > 0.0 && self.scale_step < 1.0) {
            return Err(Error::argument("scale step must lie in (0, 1)"));
        }
        let g = self.geometry();
        for level in 0..=self.max_level {
            let r = g.box_rect(level, 0, 0, self.shape.width, self.shape.height);
            if r.x1 > self.width as i64 || r.y1 > self.height as i64 {
                return Err(Error::argument(format!("object does not fit the image at level {level}")));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> PyramidGeometry {
        PyramidGeometry::from_step(self.width, self.height, self.cell_size, self.scale_step, self.max_level + 1)
    }
}

type Rgb = [f64; 3];

#[derive(Clone, Debug, PartialEq)]
enum Primitive {
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Disc { cx: f64, cy: f64, r: f64 },
    Stripes { angle: f64, period: f64 },
}

/// Appearance of one object in box-normalized coordinates `[0, 1]²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    base: Rgb,
    layers: Vec<(Primitive, Rgb)>,
}

impl Texture {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_color(&mut rng);
        let mut layers = Vec::new();
        layers.push((
            Primitive::Stripes {
                angle: rng.gen_range(0.0..std::f64::consts::PI),
                period: rng.gen_range(0.25..0.45),
            },
            random_color(&mut rng),
        ));
        for _ in 0..4 {
            let (x0, y0) = (rng.gen_range(0.0..0.75), rng.gen_range(0.0..0.75));
            let p = Primitive::Rect {
                x0,
                y0,
                x1: x0 + rng.gen_range(0.12..0.35),
                y1: y0 + rng.gen_range(0.12..0.35),
            };
            layers.push((p, random_color(&mut rng)));
        }
        for _ in 0..2 {
            let p = Primitive::Disc {
                cx: rng.gen_range(0.2..0.8),
                cy: rng.gen_range(0.2..0.8),
                r: rng.gen_range(0.08..0.18),
            };
            layers.push((p, random_color(&mut rng)));
        }
        let border = 0.05;
        for (x0, y0, x1, y1) in [
            (0.0, 0.0, 1.0, border),
            (0.0, 1.0 - border, 1.0, 1.0),
            (0.0, 0.0, border, 1.0),
            (1.0 - border, 0.0, 1.0, 1.0),
        ] {
            layers.push((Primitive::Rect { x0, y0, x1, y1 }, [0.08, 0.08, 0.1]));
        }
        Self { base, layers }
    }

    pub fn color(&self, u: f64, v: f64) -> Rgb {
        let mut c = self.base;
        for (p, col) in &self.layers {
            let hit = match *p {
                Primitive::Rect { x0, y0, x1, y1 } => u >= x0 && u < x1 && v >= y0 && v < y1,
                Primitive::Disc { cx, cy, r } => (u - cx).powi(2) + (v - cy).powi(2) < r * r,
                Primitive::Stripes { angle, period } => {
                    let t = (u * angle.cos() + v * 0.75 * angle.sin()) / period;
                    t - t.floor() < 0.5
                }
            };
            if hit {
                c = *col;
            }
        }
        c
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> Rgb {
    [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)]
}

/// A planted object: its box placement and visible pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthObject {
    pub object: usize,
    pub label: Label,
    pub rect: PixelRect,
    pub mask: PixelMask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthImage {
    pub image: RasterImage<f64>,
    pub objects: Vec<SynthObject>,
}

/// Everything needed to render one image.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub background: (Rgb, Rgb),
    pub clutter: Vec<(PixelRect, bool, Rgb)>,
    /// `(object index, position)` in drawing order.
    pub objects: Vec<(usize, Position)>,
    pub occluders: Vec<(PixelRect, Rgb)>,
    pub noise_seed: u64,
}

/// Renders `scene`; labels get visibility from the final pixel ownership
/// (a cell is visible when more than half of its pixels show the object).
pub fn render_scene(scene: &Scene, textures: &[Texture], shape: ViewpointShape, geometry: &PyramidGeometry) -> SynthImage {
    let (w, h) = (scene.width, scene.height);
    let mut px = vec![[0.0f64; 3]; w * h];
    let mut owner = vec![0usize; w * h];
    for y in 0..h {
        let t = y as f64 / h as f64;
        for x in 0..w {
            let (a, b) = scene.background;
            px[y * w + x] = [0, 1, 2].map(|c| a[c] * (1.0 - t) + b[c] * t);
        }
    }
    for &(r, ellipse, col) in &scene.clutter {
        let c = r.clip(w, h);
        let (cx, cy) = ((r.x0 + r.x1) as f64 / 2.0, (r.y0 + r.y1) as f64 / 2.0);
        let (rx, ry) = (r.width() as f64 / 2.0, r.height() as f64 / 2.0);
        for y in c.y0..c.y1 {
            for x in c.x0..c.x1 {
                let inside = !ellipse || {
                    let (dx, dy) = ((x as f64 + 0.5 - cx) / rx, (y as f64 + 0.5 - cy) / ry);
                    dx * dx + dy * dy <= 1.0
                };
                if inside {
                    px[y as usize * w + x as usize] = col;
                }
            }
        }
    }
    for &(o, pos) in &scene.objects {
        let r = geometry.box_rect(pos.level, pos.x, pos.y, shape.width, shape.height);
        let c = r.clip(w, h);
        for y in c.y0..c.y1 {
            for x in c.x0..c.x1 {
                let u = (x - r.x0) as f64 / r.width() as f64;
                let v = (y - r.y0) as f64 / r.height() as f64;
                let p = y as usize * w + x as usize;
                px[p] = textures[o].color(u, v);
                owner[p] = o + 1;
            }
        }
    }
    for &(r, col) in &scene.occluders {
        let c = r.clip(w, h);
        for y in c.y0..c.y1 {
            for x in c.x0..c.x1 {
                let p = y as usize * w + x as usize;
                px[p] = col;
                owner[p] = 0;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scene.noise_seed);
    let bytes: Vec<u8> = px
        .iter()
        .flat_map(|c| *c)
        .map(|v| ((v + rng.gen_range(-0.012..0.012)).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let image = RasterImage::from_u8(w, h, 3, &bytes).expect("scene dimensions are valid");

    let objects = scene
        .objects
        .iter()
        .map(|&(o, pos)| {
            let rect = geometry.box_rect(pos.level, pos.x, pos.y, shape.width, shape.height);
            let mask = PixelMask::new(w, h, owner.iter().map(|&v| v == o + 1).collect()).unwrap();
            let xs = geometry.edges(pos.level, pos.x, shape.width);
            let ys = geometry.edges(pos.level, pos.y, shape.height);
            let mut vis = Vec::with_capacity(shape.cells());
            for cy in 0..shape.height {
                for cx in 0..shape.width {
                    let cell = PixelRect::new(xs[cx], ys[cy], xs[cx + 1], ys[cy + 1]);
                    let clipped = cell.clip(w, h);
                    let mut seen = 0;
                    for y in clipped.y0..clipped.y1 {
                        for x in clipped.x0..clipped.x1 {
                            seen += (owner[y as usize * w + x as usize] == o + 1) as i64;
                        }
                    }
                    vis.push(2 * seen > cell.area());
                }
            }
            SynthObject {
                object: o,
                label: Label::new(pos, vis, 0),
                rect,
                mask,
            }
        })
        .collect();
    SynthImage { image, objects }
}

/// Fraction of `target` covered by the union of `occluders`.
fn covered_fraction(target: &PixelRect, occluders: &[(PixelRect, Rgb)]) -> f64 {
    let mut covered = 0i64;
    for y in target.y0..target.y1 {
        for x in target.x0..target.x1 {
            covered += occluders.iter().any(|(r, _)| r.contains(x, y)) as i64;
        }
    }
    covered as f64 / target.area() as f64
}

/// Occluders entering `target` from random sides, at least one cell deep
/// and spanning at least 60% of the side they enter from.
fn draw_occluders(rng: &mut ChaCha8Rng, target: &PixelRect, count: usize, max_occlusion: f64, cell: i64) -> Vec<(PixelRect, Rgb)> {
    (0..count)
        .map(|_| {
            let (bw, bh) = (target.width(), target.height());
            let side = rng.gen_range(0..4);
            let span = if side < 2 { bh } else { bw };
            let across = if side < 2 { bw } else { bh };
            let depth_cap = ((max_occlusion * across as f64) as i64).max(cell);
            let depth = rng.gen_range(cell..=depth_cap.max(cell));
            let len = if rng.gen_bool(0.5) {
                span
            } else {
                rng.gen_range((span * 3 / 5).max(1)..=span)
            };
            let start = rng.gen_range(0..=span - len);
            let outside = rng.gen_range(4..24);
            let r = match side {
                0 => PixelRect::new(target.x0 - outside, target.y0 + start, target.x0 + depth, target.y0 + start + len),
                1 => PixelRect::new(target.x1 - depth, target.y0 + start, target.x1 + outside, target.y0 + start + len),
                2 => PixelRect::new(target.x0 + start, target.y0 - outside, target.x0 + start + len, target.y0 + depth),
                _ => PixelRect::new(target.x0 + start, target.y1 - depth, target.x0 + start + len, target.y1 + outside),
            };
            (r, random_color(rng))
        })
        .collect()
}

fn image_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Generates a dataset; identical configs give identical output.
pub fn gen_synthetic(config: &SynthConfig) -> Result<Vec<SynthImage>> {
    config.validate()?;
    let geometry = config.geometry();
    let textures: Vec<Texture> = (0..config.n_objects)
        .map(|o| Texture::from_seed(config.object_texture_seed.wrapping_add(o as u64 * 7919)))
        .collect();
    (0..config.n_images)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(image_seed(config.seed, i));
            let scene = random_scene(&mut rng, config, &geometry)?;
            Ok(render_scene(&scene, &textures, config.shape, &geometry))
        })
        .collect()
}

fn random_scene(rng: &mut ChaCha8Rng, config: &SynthConfig, geometry: &PyramidGeometry) -> Result<Scene> {
    let (w, h) = (config.width as i64, config.height as i64);
    let background = (random_color(rng), random_color(rng));
    let clutter = (0..config.clutter_level)
        .map(|_| {
            let (cw, ch) = (rng.gen_range(6..48), rng.gen_range(6..48));
            let (x, y) = (rng.gen_range(-cw / 2..w), rng.gen_range(-ch / 2..h));
            (PixelRect::new(x, y, x + cw, y + ch), rng.gen_bool(0.5), random_color(rng))
        })
        .collect();
    let shape = config.shape;
    let mut objects: Vec<(usize, Position)> = Vec::new();
    for o in 0..config.n_objects {
        let level = rng.gen_range(0..=config.max_level);
        let s = geometry.scale(level);
        let gw = ((config.width as f64 * s).round() as i64) / config.cell_size as i64;
        let gh = ((config.height as f64 * s).round() as i64) / config.cell_size as i64;
        let (mx, my) = (gw - shape.width as i64, gh - shape.height as i64);
        let mut pos = Position::new(rng.gen_range(0..=mx.max(0)), rng.gen_range(0..=my.max(0)), level);
        if config.force_overlap && o > 0 {
            let first = objects[0].1;
            let dx = rng.gen_range(shape.width as i64 / 4..=shape.width as i64 / 2);
            let dy = rng.gen_range(-(shape.height as i64) / 4..=shape.height as i64 / 4);
            let dir = if rng.gen_bool(0.5) { 1 } else { -1 };
            let fx = first.x as f64 / geometry.scale(first.level) * s;
            let fy = first.y as f64 / geometry.scale(first.level) * s;
            pos.x = (fx.round() as i64 + dir * dx).clamp(0, mx.max(0));
            pos.y = (fy.round() as i64 + dy).clamp(0, my.max(0));
        }
        let r = geometry.box_rect(level, pos.x, pos.y, shape.width, shape.height);
        if r.x1 > w || r.y1 > h {
            return Err(Error::Generation(format!("object does not fit at level {level}")));
        }
        objects.push((o, pos));
    }
    let mut occluders = Vec::new();
    if config.max_occlusion > 0.0 && config.occluder_count > 0 {
        for &(_, pos) in &objects {
            let target = geometry.box_rect(pos.level, pos.x, pos.y, shape.width, shape.height);
            let mut accepted = None;
            for _ in 0..100 {
                let cand = draw_occluders(rng, &target, config.occluder_count, config.max_occlusion, config.cell_size as i64);
                if covered_fraction(&target, &cand) <= config.max_occlusion {
                    accepted = Some(cand);
                    break;
                }
            }
            match accepted {
                Some(c) => occluders.extend(c),
                None => {
                    return Err(Error::Generation(format!(
                        "no occluder placement within occlusion limit {} after 100 attempts",
                        config.max_occlusion
                    )))
                }
            }
        }
    }
    Ok(Scene {
        width: config.width,
        height: config.height,
        background,
        clutter,
        objects,
        occluders,
        noise_seed: rng.gen(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{rasterize_cells, voc_seg_error};

    fn small(n: usize, max_occlusion: f64) -> SynthConfig {
        SynthConfig {
            n_images: n,
            seed: 42,
            max_occlusion,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn no_occlusion_means_all_visible() {
        for img in gen_synthetic(&small(6, 0.0)).unwrap() {
            assert!(img.objects[0].label.visibility.iter().all(|&b| b));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_synthetic(&small(3, 0.5)).unwrap();
        let b = gen_synthetic(&small(3, 0.5)).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic(&SynthConfig { seed: 43, ..small(3, 0.5) }).unwrap();
        assert_ne!(a[0].image, c[0].image);
    }

    #[test]
    fn ground_truth_is_self_consistent() {
        let cfg = small(15, 0.5);
        let g = cfg.geometry();
        for img in gen_synthetic(&cfg).unwrap() {
            let o = &img.objects[0];
            let raster = rasterize_cells(&o.label, cfg.shape, &g);
            let e = voc_seg_error(&raster, &o.mask).unwrap();
            assert!(e.error <= 0.15, "quantization error {}", e.error);
        }
    }

    #[test]
    fn left_half_occluder_hides_majority_occluded_cells() {
        let cfg = small(1, 0.5);
        let g = cfg.geometry();
        let textures = vec![Texture::from_seed(1)];
        let pos = Position::new(2, 3, 1);
        let target = g.box_rect(1, 2, 3, 8, 6);
        // Occluder edge falls inside a cell column so the majority rule decides.
        let edge = target.x0 + (target.width() * 45) / 100;
        let scene = Scene {
            width: cfg.width,
            height: cfg.height,
            background: ([0.2; 3], [0.4; 3]),
            clutter: vec![],
            objects: vec![(0, pos)],
            occluders: vec![(PixelRect::new(0, 0, edge, cfg.height as i64), [0.9, 0.1, 0.1])],
            noise_seed: 0,
        };
        let out = render_scene(&scene, &textures, cfg.shape, &g);
        let xs = g.edges(1, 2, 8);
        for (i, &v) in out.objects[0].label.visibility.iter().enumerate() {
            let cx = i % 8;
            let hidden = (edge.min(xs[cx + 1]) - xs[cx]).max(0);
            let total = xs[cx + 1] - xs[cx];
            assert_eq!(v, 2 * (total - hidden) > total, "cell {i}");
        }
    }

    #[test]
    fn occlusion_limits_are_enforced() {
        assert!(gen_synthetic(&small(1, 1.5)).is_err());
        // A single cell-deep occluder already covers more than 1% of the box.
        assert!(matches!(gen_synthetic(&small(2, 0.01)), Err(Error::Generation(_))));
        for img in gen_synthetic(&small(10, 0.3)).unwrap() {
            let o = &img.objects[0];
            let hidden = o.rect.area() as usize - o.mask.count();
            assert!(hidden as f64 <= 0.3 * o.rect.area() as f64 + 1e-9);
        }
    }

    #[test]
    fn overlapping_objects_share_pixels_only_once() {
        let cfg = SynthConfig {
            n_objects: 2,
            force_overlap: true,
            ..small(5, 0.3)
        };
        for img in gen_synthetic(&cfg).unwrap() {
            let (a, b) = (&img.objects[0], &img.objects[1]);
            assert!(a.rect.iou(&b.rect) > 0.0);
            assert!(a.mask.bits.iter().zip(&b.mask.bits).all(|(&x, &y)| !(x && y)));
        }
    }
}
