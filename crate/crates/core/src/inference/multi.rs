use crate::error::{Error, Result};
use crate::imaging::ImageFeatures;
use crate::inference::search::{energy_maps, scan, Detection};
use crate::model::Model;
use crate::scalar::Scalar;

/// Result of one sequential pass over several objects.
#[derive(Clone, Debug)]
pub struct MultiDetection<T> {
    /// Best detection of each object, in object order.
    pub detections: Vec<Detection<T>>,
    pub width: usize,
    pub height: usize,
    /// Per base pixel: id (1-based) of the last object that claimed it, 0 if none.
    pub owner: Vec<u32>,
}

/// Detects objects one after another, letting each object see the visible
/// filter responses of the objects before it as its occlusion responses.
///
/// Before an object is searched, every cell whose center pixel is already
/// owned takes the stored response as its occlusion response; after its
/// detection, the cells it labels visible become its own, storing their
/// visible-filter response.
pub fn detect_multi<T: Scalar>(features: &ImageFeatures<T>, models: &[Model<T>]) -> Result<MultiDetection<T>> {
    let cell_size = features.pyramid.cell_size;
    if let Some(m) = models.iter().find(|m| m.cell_size != cell_size) {
        return Err(Error::argument(format!(
            "model cell size {} differs from pyramid cell size {cell_size}",
            m.cell_size
        )));
    }
    let geometry = features.pyramid.geometry();
    let (width, height) = (geometry.width, geometry.height);
    let mut owner = vec![0u32; width * height];
    let mut collected = vec![T::zero(); width * height];
    let mut detections = Vec::with_capacity(models.len());

    for (o, model) in models.iter().enumerate() {
        let w = &model.weights;
        let dets = scan(features, w, |_, pos, maps| {
            let shape = maps.shape;
            let xs = geometry.edges(pos.level, pos.x, shape.width);
            let ys = geometry.edges(pos.level, pos.y, shape.height);
            for cy in 0..shape.height {
                for cx in 0..shape.width {
                    let px = (xs[cx] + xs[cx + 1] - 1).div_euclid(2);
                    let py = (ys[cy] + ys[cy + 1] - 1).div_euclid(2);
                    if px < 0 || py < 0 || px >= width as i64 || py >= height as i64 {
                        continue;
                    }
                    let p = py as usize * width + px as usize;
                    if owner[p] != 0 {
                        maps.b[cy * shape.width + cx] = collected[p];
                    }
                }
            }
        })?;
        let best = dets.into_iter().next().expect("scan visits at least one position");
        let maps = energy_maps(features, w, best.label.pos, best.label.viewpoint)?;
        let pos = best.label.pos;
        let shape = maps.shape;
        let xs = geometry.edges(pos.level, pos.x, shape.width);
        let ys = geometry.edges(pos.level, pos.y, shape.height);
        for cy in 0..shape.height {
            for cx in 0..shape.width {
                let i = cy * shape.width + cx;
                if !best.label.visibility[i] {
                    continue;
                }
                for py in ys[cy].max(0)..ys[cy + 1].min(height as i64) {
                    for px in xs[cx].max(0)..xs[cx + 1].min(width as i64) {
                        let p = py as usize * width + px as usize;
                        owner[p] = o as u32 + 1;
                        collected[p] = maps.f[i];
                    }
                }
            }
        }
        detections.push(best);
    }
    Ok(MultiDetection {
        detections,
        width,
        height,
        owner,
    })
}
