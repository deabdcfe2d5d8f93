use crate::error::{Error, Result};
use crate::imaging::{ImageFeatures, HOG_DIM};
use crate::model::hop::clique_stats;
use crate::model::{Label, ModelLayout, Position, ViewpointShape, WeightVector};
use crate::scalar::{dot, Scalar};

/// The cells of one box placed on a pyramid level.
#[derive(Clone, Debug)]
pub struct BoxCells<'a, T> {
    pub shape: ViewpointShape,
    /// HOG vector of each cell in row-major order, `None` outside the image.
    pub hog: Vec<Option<&'a [T]>>,
    /// In-image cells grouped by segment id, groups ordered by first cell.
    pub cliques: Vec<Vec<usize>>,
    /// Number of box cells outside the image.
    pub truncated: usize,
}

impl<'a, T: Scalar> BoxCells<'a, T> {
    pub fn new(features: &'a ImageFeatures<T>, pos: Position, shape: ViewpointShape) -> Result<Self> {
        let level = features
            .pyramid
            .levels
            .get(pos.level)
            .ok_or_else(|| Error::argument(format!("pyramid has no level {}", pos.level)))?;
        let ids = &features.cells[pos.level];
        let mut hog = Vec::with_capacity(shape.cells());
        let mut cliques: Vec<Vec<usize>> = Vec::new();
        let mut clique_ids: Vec<u32> = Vec::new();
        let mut truncated = 0;
        for dy in 0..shape.height as i64 {
            for dx in 0..shape.width as i64 {
                let i = hog.len();
                let (cx, cy) = (pos.x + dx, pos.y + dy);
                let h = level.hog.cell_checked(cx, cy);
                match h {
                    Some(_) => {
                        let id = ids.id(cx as usize, cy as usize);
                        match clique_ids.iter().position(|&c| c == id) {
                            Some(j) => cliques[j].push(i),
                            None => {
                                clique_ids.push(id);
                                cliques.push(vec![i]);
                            }
                        }
                    }
                    None => truncated += 1,
                }
                hog.push(h);
            }
        }
        Ok(Self {
            shape,
            hog,
            cliques,
            truncated,
        })
    }

    /// 4-connected in-box neighbour pairs: horizontal pairs first, then vertical.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        grid_edges(self.shape)
    }
}

pub fn grid_edges(shape: ViewpointShape) -> Vec<(usize, usize)> {
    let (w, h) = (shape.width, shape.height);
    let mut e = Vec::with_capacity(2 * w * h);
    for y in 0..h {
        for x in 0..w - 1 {
            e.push((y * w + x, y * w + x + 1));
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            e.push((y * w + x, (y + 1) * w + x));
        }
    }
    e
}

/// Joint feature vector; only the block of `viewpoint` is stored since all
/// other blocks are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct JointFeature<T> {
    pub viewpoint: usize,
    /// Offset of the block in the full weight vector.
    pub offset: usize,
    pub block: Vec<T>,
}

impl<T: Scalar> JointFeature<T> {
    pub fn dot(&self, w: &WeightVector<T>) -> T {
        dot(w.block_slice(self.viewpoint), &self.block)
    }

    /// Dense copy of length `total_len`.
    pub fn to_dense(&self, total_len: usize) -> Vec<T> {
        let mut out = vec![T::zero(); total_len];
        out[self.offset..self.offset + self.block.len()].copy_from_slice(&self.block);
        out
    }
}

/// Joint feature vector of label `y` on an image.
pub fn assemble_features<T: Scalar>(
    features: &ImageFeatures<T>,
    layout: &ModelLayout,
    y: &Label,
) -> Result<JointFeature<T>> {
    layout.check_viewpoint(y.viewpoint)?;
    let shape = layout.shape(y.viewpoint);
    if y.visibility.len() != shape.cells() {
        return Err(Error::argument(format!(
            "label has {} visibility bits, viewpoint {} needs {}",
            y.visibility.len(),
            y.viewpoint,
            shape.cells()
        )));
    }
    let cells = BoxCells::new(features, y.pos, shape)?;
    let b = layout.block(y.viewpoint);
    let k = layout.k();
    let mut block = vec![T::zero(); b.len()];
    let v = &y.visibility;
    for (i, h) in cells.hog.iter().enumerate() {
        if let Some(h) = h {
            let base = if v[i] { b.visible().start } else { b.occluded().start } + i * HOG_DIM;
            block[base..base + HOG_DIM].copy_from_slice(h);
        }
        if !v[i] {
            block[b.prior().start + i] = T::one();
        }
    }
    block[b.truncation()] = T::of_usize(cells.truncated);
    let disagreements = cells.edges().iter().filter(|&&(i, j)| v[i] != v[j]).count();
    block[b.pairwise()] = T::of_usize(disagreements);
    let hop = b.hop();
    for clique in &cells.cliques {
        let m = clique.iter().filter(|&&i| v[i]).count();
        for (slot, t) in block[hop.clone()].iter_mut().zip(clique_stats::<T>(m, clique.len(), k)) {
            *slot += t;
        }
    }
    block[b.bias()] = T::one();
    Ok(JointFeature {
        viewpoint: y.viewpoint,
        offset: layout.offset(y.viewpoint),
        block,
    })
}
