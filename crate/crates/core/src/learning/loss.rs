use crate::geometry::{PixelRect, PyramidGeometry};
use crate::model::{Label, ViewpointShape};

/// Structured loss between a ground-truth and a predicted label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    pub iou: f64,
    pub hamming: f64,
    pub total: f64,
}

/// Box overlap loss plus, weighted by the overlap, the pixel disagreement
/// of the two labellings.
pub fn loss(
    y: &Label,
    y_shape: ViewpointShape,
    y_hat: &Label,
    y_hat_shape: ViewpointShape,
    geometry: &PyramidGeometry,
) -> LossValue {
    let a = y.pixel_rect(geometry, y_shape);
    let b = y_hat.pixel_rect(geometry, y_hat_shape);
    let iou = a.iou(&b);
    if iou == 0.0 {
        return LossValue {
            iou,
            hamming: 0.0,
            total: 1.0,
        };
    }
    let hamming = hamming_projected(y, y_shape, y_hat, y_hat_shape, geometry);
    LossValue {
        iou,
        hamming,
        total: (1.0 - iou) + iou * hamming,
    }
}

/// Visibility of base pixel `(px, py)` under `label`; 0 outside its box.
fn pixel_visible(label: &Label, shape: ViewpointShape, geometry: &PyramidGeometry, px: i64, py: i64) -> bool {
    let xs = geometry.edges(label.pos.level, label.pos.x, shape.width);
    let ys = geometry.edges(label.pos.level, label.pos.y, shape.height);
    if px < xs[0] || px >= xs[shape.width] || py < ys[0] || py >= ys[shape.height] {
        return false;
    }
    let cx = xs.partition_point(|&e| e <= px) - 1;
    let cy = ys.partition_point(|&e| e <= py) - 1;
    label.visibility[cy * shape.width + cx]
}

/// Fraction of base pixels in the union of both boxes on which the two
/// rasterized labellings disagree.
pub fn hamming_projected(
    y: &Label,
    y_shape: ViewpointShape,
    y_hat: &Label,
    y_hat_shape: ViewpointShape,
    geometry: &PyramidGeometry,
) -> f64 {
    let a = y.pixel_rect(geometry, y_shape);
    let b = y_hat.pixel_rect(geometry, y_hat_shape);
    let hull = PixelRect::new(a.x0.min(b.x0), a.y0.min(b.y0), a.x1.max(b.x1), a.y1.max(b.y1));
    let (mut union, mut differ) = (0u64, 0u64);
    for py in hull.y0..hull.y1 {
        for px in hull.x0..hull.x1 {
            if !a.contains(px, py) && !b.contains(px, py) {
                continue;
            }
            union += 1;
            if pixel_visible(y, y_shape, geometry, px, py) != pixel_visible(y_hat, y_hat_shape, geometry, px, py) {
                differ += 1;
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        differ as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Position;
    use proptest::prelude::*;

    fn geom() -> PyramidGeometry {
        PyramidGeometry::from_step(128, 128, 8, 0.5, 3)
    }

    fn shape(w: usize, h: usize) -> ViewpointShape {
        ViewpointShape::new(w, h).unwrap()
    }

    #[test]
    fn identical_labels_have_zero_loss() {
        let y = Label::new(Position::new(2, 3, 1), vec![true, false, true, true], 0);
        let l = loss(&y, shape(2, 2), &y, shape(2, 2), &geom());
        assert_eq!(l.total, 0.0);
        assert_eq!(l.iou, 1.0);
    }

    #[test]
    fn complement_on_same_box_is_full_loss() {
        let y = Label::new(Position::new(2, 3, 0), vec![true, false, true, true], 0);
        let mut c = y.clone();
        c.visibility.iter_mut().for_each(|b| *b = !*b);
        let l = loss(&y, shape(2, 2), &c, shape(2, 2), &geom());
        assert_eq!(l.hamming, 1.0);
        assert_eq!(l.total, 1.0);
    }

    #[test]
    fn one_flipped_cell_of_four() {
        let y = Label::new(Position::new(1, 1, 0), vec![true; 4], 0);
        let mut z = y.clone();
        z.visibility[2] = false;
        assert_eq!(hamming_projected(&y, shape(2, 2), &z, shape(2, 2), &geom()), 0.25);
    }

    #[test]
    fn consistent_labels_across_an_octave() {
        // 2x2 box at scale 0.5 covers the same 32x32 pixels as a 4x4 box at scale 1.
        let coarse = Label::new(Position::new(1, 1, 1), vec![true, false, true, true], 0);
        let mut fine_v = vec![false; 16];
        for y in 0..4 {
            for x in 0..4 {
                fine_v[y * 4 + x] = coarse.visibility[(y / 2) * 2 + x / 2];
            }
        }
        let fine = Label::new(Position::new(2, 2, 0), fine_v, 1);
        assert_eq!(hamming_projected(&coarse, shape(2, 2), &fine, shape(4, 4), &geom()), 0.0);
        assert_eq!(loss(&coarse, shape(2, 2), &fine, shape(4, 4), &geom()).total, 0.0);
    }

    proptest! {
        #[test]
        fn loss_is_bounded_and_box_gated(
            x in -3i64..12, y in -3i64..12, level in 0usize..3,
            bits in proptest::collection::vec(any::<bool>(), 6),
            bits2 in proptest::collection::vec(any::<bool>(), 6),
        ) {
            let g = geom();
            let gt = Label::new(Position::new(4, 4, 0), bits, 0);
            let hat = Label::new(Position::new(x, y, level), bits2, 0);
            let l = loss(&gt, shape(3, 2), &hat, shape(3, 2), &g);
            prop_assert!((0.0..=1.0).contains(&l.total));
            if l.iou == 0.0 {
                prop_assert_eq!(l.total, 1.0);
            }
        }
    }
}
