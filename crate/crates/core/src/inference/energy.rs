use crate::model::{clique_stats, grid_edges, BlockView, BoxCells, ViewpointShape};
use crate::scalar::{dot, Scalar};

/// Everything the energy of one box placement needs, with the image and
/// filter weights already folded into per-cell responses.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyMaps<T> {
    pub shape: ViewpointShape,
    /// Visible-filter response per cell (cost of label 1).
    pub f: Vec<T>,
    /// Occlusion-filter response per cell.
    pub b: Vec<T>,
    /// Label-0 prior per cell.
    pub r: Vec<T>,
    /// Truncation cost plus bias.
    pub constant: T,
    pub pairwise: T,
    pub hop: Vec<T>,
    pub cliques: Vec<Vec<usize>>,
}

impl<T: Scalar> EnergyMaps<T> {
    pub fn new(cells: &BoxCells<'_, T>, w: &BlockView<'_, T>) -> Self {
        let n = cells.shape.cells();
        let hog_dim = w.visible.len() / n;
        let mut f = vec![T::zero(); n];
        let mut b = vec![T::zero(); n];
        for (i, h) in cells.hog.iter().enumerate() {
            if let Some(h) = h {
                let r = i * hog_dim..(i + 1) * hog_dim;
                f[i] = dot(&w.visible[r.clone()], h);
                b[i] = dot(&w.occluded[r], h);
            }
        }
        Self {
            shape: cells.shape,
            f,
            b,
            r: w.prior.to_vec(),
            constant: w.truncation * T::of_usize(cells.truncated) + w.bias,
            pairwise: w.pairwise,
            hop: w.hop.to_vec(),
            cliques: cells.cliques.clone(),
        }
    }

    pub fn num_cells(&self) -> usize {
        self.f.len()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        grid_edges(self.shape)
    }

    /// Clique term for `visible` of `size` cells: the envelope weights
    /// interpolated at the normalized count. For concave weights this equals
    /// the lower envelope of the clique's lines.
    pub fn clique_term(&self, visible: usize, size: usize) -> T {
        dot(&self.hop, &clique_stats::<T>(visible, size, self.hop.len() - 1))
    }

    /// Energy of labelling `v` (row-major over the box, `true` = visible).
    pub fn energy(&self, v: &[bool]) -> T {
        assert_eq!(v.len(), self.num_cells());
        let mut e = self.constant;
        for i in 0..v.len() {
            e += if v[i] { self.f[i] } else { self.b[i] + self.r[i] };
        }
        let cut = self.edges().iter().filter(|&&(i, j)| v[i] != v[j]).count();
        e += self.pairwise * T::of_usize(cut);
        for c in &self.cliques {
            let m = c.iter().filter(|&&i| v[i]).count();
            e += self.clique_term(m, c.len());
        }
        e
    }
}

/// Energy of labelling `v`.
pub fn energy<T: Scalar>(maps: &EnergyMaps<T>, v: &[bool]) -> T {
    maps.energy(v)
}
