use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::evaluation::PixelMask;
use crate::geometry::PixelRect;

/// One scored box of one image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredBox {
    pub score: f64,
    pub rect: PixelRect,
}

/// Recall as a function of false positives per image.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalCurve {
    /// `(fppi, recall)`, one point per distinct score threshold, starting at `(0, 0)`.
    pub points: Vec<(f64, f64)>,
    /// Area under the curve for fppi in `[0, 1]`.
    pub auc: f64,
}

impl EvalCurve {
    /// Best recall reachable with at most `fppi` false positives per image.
    pub fn recall_at(&self, fppi: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.0 <= fppi)
            .map(|p| p.1)
            .fold(0.0, f64::max)
    }
}

/// Sweeps a score threshold over all detections. Detections are matched in
/// decreasing score order to the unmatched ground-truth box of their image
/// with the highest IoU, if that IoU is at least `iou_match`.
pub fn fppi_recall(dets: &[Vec<ScoredBox>], gts: &[Vec<PixelRect>], iou_match: f64) -> Result<EvalCurve> {
    if dets.len() != gts.len() {
        return Err(Error::argument("detections and ground truth cover different image counts"));
    }
    let total_gt: usize = gts.iter().map(Vec::len).sum();
    if total_gt == 0 {
        return Err(Error::argument("no ground-truth boxes: recall undefined"));
    }
    let n_images = gts.len() as f64;
    let mut order: Vec<(usize, usize)> = dets
        .iter()
        .enumerate()
        .flat_map(|(i, d)| (0..d.len()).map(move |j| (i, j)))
        .collect();
    order.sort_by(|a, b| {
        dets[b.0][b.1]
            .score
            .partial_cmp(&dets[a.0][a.1].score)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    });
    let mut taken: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = vec![(0.0, 0.0)];
    for (k, &(i, j)) in order.iter().enumerate() {
        let d = dets[i][j];
        let best = gts[i]
            .iter()
            .enumerate()
            .filter(|(g, _)| !taken[i][*g])
            .map(|(g, r)| (g, r.iou(&d.rect)))
            .filter(|&(_, iou)| iou >= iou_match)
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)));
        match best {
            Some((g, _)) => {
                taken[i][g] = true;
                tp += 1;
            }
            None => fp += 1,
        }
        let last_of_group = order
            .get(k + 1)
            .is_none_or(|&(i2, j2)| dets[i2][j2].score != d.score);
        if last_of_group {
            points.push((fp as f64 / n_images, tp as f64 / total_gt as f64));
        }
    }
    let auc = area_to_one(&points);
    Ok(EvalCurve { points, auc })
}

/// Trapezoid area over fppi in `[0, 1]`, extending the last recall flat.
fn area_to_one(points: &[(f64, f64)]) -> f64 {
    let mut area = 0.0;
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= 1.0 {
            break;
        }
        if x1 <= 1.0 {
            area += (x1 - x0) * (y0 + y1) / 2.0;
        } else {
            let y = y0 + (y1 - y0) * (1.0 - x0) / (x1 - x0);
            area += (1.0 - x0) * (y0 + y) / 2.0;
        }
    }
    let (lx, ly) = *points.last().unwrap();
    if lx < 1.0 {
        area += (1.0 - lx) * ly;
    }
    area.clamp(0.0, 1.0)
}

/// Segmentation error of a predicted mask.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegError {
    pub error: f64,
    /// Both masks were empty; the error of 0 is vacuous.
    pub vacuous: bool,
}

/// One minus the intersection over union of the object pixels.
pub fn voc_seg_error(pred: &PixelMask, gt: &PixelMask) -> Result<SegError> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::argument("mask dimensions differ"));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in pred.bits.iter().zip(&gt.bits) {
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    if union == 0 {
        return Ok(SegError {
            error: 0.0,
            vacuous: true,
        });
    }
    Ok(SegError {
        error: 1.0 - inter as f64 / union as f64,
        vacuous: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x: i64) -> PixelRect {
        PixelRect::new(x, 0, x + 10, 10)
    }

    fn sb(score: f64, x: i64) -> ScoredBox {
        ScoredBox { score, rect: rect(x) }
    }

    #[test]
    fn perfect_detector() {
        let gts = vec![vec![rect(0)], vec![rect(20)]];
        let dets = vec![vec![sb(2.0, 0)], vec![sb(1.0, 20)]];
        let c = fppi_recall(&dets, &gts, 0.5).unwrap();
        assert_eq!(c.auc, 1.0);
        assert_eq!(c.recall_at(0.0), 1.0);
    }

    #[test]
    fn silent_detector() {
        let gts = vec![vec![rect(0)]];
        let c = fppi_recall(&[vec![]], &gts, 0.5).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0)]);
        assert_eq!(c.auc, 0.0);
    }

    #[test]
    fn hand_built_three_image_curve() {
        // Scores: TP 0.9 (img 0), FP 0.8 (img 1), TP 0.7 (img 2); 3 GT boxes.
        let gts = vec![vec![rect(0)], vec![rect(0)], vec![rect(0)]];
        let dets = vec![vec![sb(0.9, 0)], vec![sb(0.8, 50)], vec![sb(0.7, 1)]];
        let c = fppi_recall(&dets, &gts, 0.5).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(c.points, vec![(0.0, 0.0), (0.0, third), (third, third), (third, 2.0 * third)]);
        // Area: [0,1/3] at 1/3, then trapezoid... (1/3)(1/3) is all in the segment up
        // to x = 1/3 except the vertical jump, then 2/3 flat until 1.
        let expect = third * third + (1.0 - third) * 2.0 * third;
        assert!((c.auc - expect).abs() < 1e-12);
        assert_eq!(c.recall_at(0.2), third);
    }

    #[test]
    fn duplicate_detections_count_as_false_positives() {
        let gts = vec![vec![rect(0)]];
        let dets = vec![vec![sb(0.9, 0), sb(0.8, 0)]];
        let c = fppi_recall(&dets, &gts, 0.5).unwrap();
        assert_eq!(*c.points.last().unwrap(), (1.0, 1.0));
    }

    #[test]
    fn empty_ground_truth_is_an_error() {
        assert!(fppi_recall(&[vec![sb(1.0, 0)]], &[vec![]], 0.5).is_err());
    }

    fn mask(bits: &[u8]) -> PixelMask {
        PixelMask::new(bits.len(), 1, bits.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn segmentation_error_cases() {
        let gt = mask(&[1, 1, 1, 1, 0, 0]);
        assert_eq!(voc_seg_error(&gt, &gt).unwrap().error, 0.0);
        assert_eq!(voc_seg_error(&mask(&[0, 0, 0, 0, 1, 1]), &gt).unwrap().error, 1.0);
        assert_eq!(voc_seg_error(&mask(&[1, 1, 0, 0, 0, 0]), &gt).unwrap().error, 0.5);
        let e = voc_seg_error(&mask(&[0; 6]), &mask(&[0; 6])).unwrap();
        assert!(e.vacuous && e.error == 0.0);
        let a = mask(&[1, 0, 1, 1, 0, 1]);
        assert_eq!(voc_seg_error(&a, &gt).unwrap(), voc_seg_error(&gt, &a).unwrap());
    }
}
