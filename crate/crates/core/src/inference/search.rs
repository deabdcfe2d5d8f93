use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PixelRect;
use crate::imaging::ImageFeatures;
use crate::inference::{build_graph, mincut, EnergyMaps};
use crate::model::{BoxCells, Label, Position, WeightVector};
use crate::scalar::Scalar;

/// A labelled box with its energy; lower energy is a better detection.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection<T> {
    pub label: Label,
    pub energy: T,
    pub score: T,
    /// Box in base-image pixels.
    pub rect: PixelRect,
}

/// Energy maps of viewpoint `viewpoint` placed at `pos`.
pub fn energy_maps<T: Scalar>(
    features: &ImageFeatures<T>,
    w: &WeightVector<T>,
    pos: Position,
    viewpoint: usize,
) -> Result<EnergyMaps<T>> {
    w.layout().check_viewpoint(viewpoint)?;
    let cells = BoxCells::new(features, pos, w.layout().shape(viewpoint))?;
    Ok(EnergyMaps::new(&cells, &w.block(viewpoint)))
}

/// Minimum-energy labelling of `maps` by a single cut.
pub fn solve_maps<T: Scalar>(maps: &EnergyMaps<T>) -> Result<(Vec<bool>, T)> {
    let mut g = build_graph(maps)?;
    let (_, side) = mincut(&mut g);
    let v = side[..maps.num_cells()].to_vec();
    let e = maps.energy(&v);
    Ok((v, e))
}

pub fn min_energy_labelling<T: Scalar>(
    features: &ImageFeatures<T>,
    w: &WeightVector<T>,
    pos: Position,
    viewpoint: usize,
) -> Result<(Vec<bool>, T)> {
    solve_maps(&energy_maps(features, w, pos, viewpoint)?)
}

/// Every `(viewpoint, position)` the search visits: all levels and all cell
/// offsets letting the box overhang the grid by up to half its size.
pub fn candidate_positions<T: Scalar>(features: &ImageFeatures<T>, w: &WeightVector<T>) -> Vec<(usize, Position)> {
    let layout = w.layout();
    let mut out = Vec::new();
    for (level, l) in features.pyramid.levels.iter().enumerate() {
        for (a, shape) in layout.shapes().iter().enumerate() {
            let (bw, bh) = (shape.width as i64, shape.height as i64);
            let (gw, gh) = (l.hog.grid_w as i64, l.hog.grid_h as i64);
            for y in -(bh / 2)..=gh - bh + bh / 2 {
                for x in -(bw / 2)..=gw - bw + bw / 2 {
                    out.push((a, Position::new(x, y, level)));
                }
            }
        }
    }
    out
}

/// Detection order: energy, then level, y, x and viewpoint.
pub fn detection_order<T: Scalar>(a: &Detection<T>, b: &Detection<T>) -> Ordering {
    a.energy
        .partial_cmp(&b.energy)
        .unwrap_or(Ordering::Equal)
        .then(a.label.pos.level.cmp(&b.label.pos.level))
        .then(a.label.pos.y.cmp(&b.label.pos.y))
        .then(a.label.pos.x.cmp(&b.label.pos.x))
        .then(a.label.viewpoint.cmp(&b.label.viewpoint))
}

/// Best labelling at every candidate position after `adjust` has edited
/// each position's energy maps, sorted by [`detection_order`].
pub fn scan<T, F>(features: &ImageFeatures<T>, w: &WeightVector<T>, adjust: F) -> Result<Vec<Detection<T>>>
where
    T: Scalar,
    F: Fn(usize, Position, &mut EnergyMaps<T>) + Sync,
{
    if features.pyramid.levels.is_empty() {
        return Err(Error::argument("empty pyramid"));
    }
    let geometry = features.pyramid.geometry();
    let positions = candidate_positions(features, w);
    let mut dets = positions
        .par_iter()
        .map(|&(a, pos)| {
            let mut maps = energy_maps(features, w, pos, a)?;
            adjust(a, pos, &mut maps);
            let (v, energy) = solve_maps(&maps)?;
            let label = Label::new(pos, v, a);
            let rect = label.pixel_rect(&geometry, w.layout().shape(a));
            Ok(Detection {
                label,
                energy,
                score: -energy,
                rect,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    dets.sort_by(detection_order);
    Ok(dets)
}

/// Greedy suppression: keeps detections in order, dropping any whose box
/// overlaps an already kept one by IoU above `iou_threshold`.
pub fn nms<T: Scalar>(dets: Vec<Detection<T>>, iou_threshold: f64, limit: usize) -> Vec<Detection<T>> {
    let mut kept: Vec<Detection<T>> = Vec::new();
    for d in dets {
        if kept.len() >= limit {
            break;
        }
        if kept.iter().all(|k| k.rect.iou(&d.rect) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept
}

/// Top `top_n` detections after non-maximum suppression.
pub fn detect<T: Scalar>(
    features: &ImageFeatures<T>,
    w: &WeightVector<T>,
    top_n: usize,
    nms_iou: f64,
) -> Result<Vec<Detection<T>>> {
    if !(nms_iou > 0.0 && nms_iou < 1.0) {
        return Err(Error::argument(format!("NMS threshold {nms_iou} outside (0, 1)")));
    }
    if top_n == 0 {
        return Ok(Vec::new());
    }
    let dets = scan(features, w, |_, _, _| {})?;
    Ok(nms(dets, nms_iou, top_n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{PyramidParams, RasterImage, SegmentMap};
    use crate::model::{ModelLayout, ViewpointShape};

    fn det(x0: i64, score: f64) -> Detection<f64> {
        Detection {
            label: Label::new(Position::new(0, 0, 0), vec![true], 0),
            energy: -score,
            score,
            rect: PixelRect::new(x0, 0, x0 + 10, 10),
        }
    }

    #[test]
    fn nms_identical_and_disjoint() {
        let kept = nms(vec![det(0, 2.0), det(0, 1.0)], 0.5, 10);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 2.0);
        assert_eq!(nms(vec![det(0, 2.0), det(50, 1.0)], 0.5, 10).len(), 2);
    }

    #[test]
    fn nms_chain() {
        // IoU(0,2) = 8/12, IoU(2,4) = 8/12, IoU(0,4) = 6/14.
        let kept = nms(vec![det(0, 3.0), det(2, 2.0), det(4, 1.0)], 0.5, 10);
        let xs: Vec<i64> = kept.iter().map(|d| d.rect.x0).collect();
        assert_eq!(xs, vec![0, 4]);
    }

    fn flat_features() -> ImageFeatures<f64> {
        let img = RasterImage::<f64>::filled(40, 32, 1, 0.5).unwrap();
        let seg = SegmentMap::from_raw(40, 32, &vec![0; 40 * 32]).unwrap();
        let params = PyramidParams {
            scale_step: 0.5,
            n_levels: 2,
            cell_size: 8,
        };
        ImageFeatures::compute(&img, &seg, &params).unwrap()
    }

    #[test]
    fn zero_model_picks_first_location() {
        let f = flat_features();
        let layout = ModelLayout::new(vec![ViewpointShape::new(2, 2).unwrap()], 4).unwrap();
        let w = WeightVector::zeros(layout);
        let d = detect(&f, &w, 1, 0.5).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].energy, 0.0);
        assert_eq!(d[0].label.pos, Position::new(-1, -1, 0));
        assert!(detect(&f, &w, 0, 0.5).unwrap().is_empty());
    }

    #[test]
    fn huge_prior_forces_all_visible() {
        let f = flat_features();
        let layout = ModelLayout::new(vec![ViewpointShape::new(2, 2).unwrap()], 4).unwrap();
        let mut w = WeightVector::zeros(layout.clone());
        let b = layout.block(0);
        for r in b.prior() {
            w.as_mut_slice()[r] = 1e6;
        }
        let (v, _) = min_energy_labelling(&f, &w, Position::new(1, 1, 0), 0).unwrap();
        assert_eq!(v, vec![true; 4]);
    }

    #[test]
    fn positions_cover_half_box_overhang() {
        let f = flat_features();
        let layout = ModelLayout::new(vec![ViewpointShape::new(3, 2).unwrap()], 4).unwrap();
        let w = WeightVector::<f64>::zeros(layout);
        let p = candidate_positions(&f, &w);
        // Level 0 grid 5x4: x in -1..=3, y in -1..=3; level 1 grid 2x2: x in -1..=0, y in -1..=1.
        assert_eq!(p.len(), 5 * 5 + 2 * 3);
        assert_eq!(p[0].1, Position::new(-1, -1, 0));
    }
}
