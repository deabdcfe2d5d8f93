use crate::error::Result;
use crate::geometry::{PixelRect, PyramidGeometry};
use crate::imaging::ImageFeatures;
use crate::inference::search::{scan, Detection};
use crate::model::{Label, ViewpointShape, WeightVector};
use crate::scalar::Scalar;

/// A label's visibility rasterized over its own box in base pixels, with a
/// summed-area table for rectangle counts of visible pixels.
#[derive(Clone, Debug)]
pub struct ProjectedLabel {
    pub rect: PixelRect,
    stride: usize,
    integral: Vec<i64>,
}

impl ProjectedLabel {
    pub fn new(label: &Label, shape: ViewpointShape, geometry: &PyramidGeometry) -> Self {
        let rect = label.pixel_rect(geometry, shape);
        let (w, h) = (rect.width() as usize, rect.height() as usize);
        let xs = geometry.edges(label.pos.level, label.pos.x, shape.width);
        let ys = geometry.edges(label.pos.level, label.pos.y, shape.height);
        let mut bits = vec![0i64; w * h];
        for cy in 0..shape.height {
            for cx in 0..shape.width {
                if !label.visibility[cy * shape.width + cx] {
                    continue;
                }
                for py in ys[cy]..ys[cy + 1] {
                    let row = (py - rect.y0) as usize * w;
                    for px in xs[cx]..xs[cx + 1] {
                        bits[row + (px - rect.x0) as usize] = 1;
                    }
                }
            }
        }
        let stride = w + 1;
        let mut integral = vec![0i64; stride * (h + 1)];
        for y in 0..h {
            let mut run = 0;
            for x in 0..w {
                run += bits[y * w + x];
                integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + run;
            }
        }
        Self { rect, stride, integral }
    }

    /// Visible pixels of this label inside `r`.
    pub fn count(&self, r: &PixelRect) -> i64 {
        let c = r.intersect(&self.rect);
        if c.is_empty() {
            return 0;
        }
        let (x0, y0) = ((c.x0 - self.rect.x0) as usize, (c.y0 - self.rect.y0) as usize);
        let (x1, y1) = ((c.x1 - self.rect.x0) as usize, (c.y1 - self.rect.y0) as usize);
        let s = self.stride;
        self.integral[y1 * s + x1] - self.integral[y0 * s + x1] - self.integral[y1 * s + x0] + self.integral[y0 * s + x0]
    }

    pub fn total(&self) -> i64 {
        *self.integral.last().unwrap()
    }
}

/// Most violating label: the minimizer of energy minus loss against `y_gt`.
///
/// The loss is split per candidate box: the box term and the part of the
/// pixel disagreement that does not depend on the labelling go into the
/// constant; each cell's disagreement when labelled 1 (its pixels that are 0
/// in the ground truth) or 0 (its pixels that are 1) goes into its unary.
pub fn loss_augmented_detect<T: Scalar>(
    features: &ImageFeatures<T>,
    w: &WeightVector<T>,
    y_gt: &Label,
) -> Result<Detection<T>> {
    w.layout().check_viewpoint(y_gt.viewpoint)?;
    let geometry = features.pyramid.geometry();
    let gt = ProjectedLabel::new(y_gt, w.layout().shape(y_gt.viewpoint), &geometry);
    let g_total = gt.total();
    let dets = scan(features, w, |_, pos, maps| {
        let shape = maps.shape;
        let rect = geometry.box_rect(pos.level, pos.x, pos.y, shape.width, shape.height);
        let inter = rect.intersection_area(&gt.rect);
        if inter == 0 {
            maps.constant -= T::one();
            return;
        }
        let union = rect.union_area(&gt.rect);
        let iou = inter as f64 / union as f64;
        let factor = iou / union as f64;
        let xs = geometry.edges(pos.level, pos.x, shape.width);
        let ys = geometry.edges(pos.level, pos.y, shape.height);
        let mut covered = 0i64;
        for cy in 0..shape.height {
            for cx in 0..shape.width {
                let i = cy * shape.width + cx;
                let cell = PixelRect::new(xs[cx], ys[cy], xs[cx + 1], ys[cy + 1]);
                let g = gt.count(&cell);
                covered += g;
                maps.f[i] -= T::of(factor * (cell.area() - g) as f64);
                maps.b[i] -= T::of(factor * g as f64);
            }
        }
        maps.constant -= T::of((1.0 - iou) + factor * (g_total - covered) as f64);
    })?;
    Ok(dets.into_iter().next().expect("scan visits at least one position"))
}
