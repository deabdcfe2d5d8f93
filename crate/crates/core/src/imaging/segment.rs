//! Greedy graph-based over-segmentation and its projection onto HOG cells.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PyramidGeometry;
use crate::imaging::RasterImage;
use crate::scalar::Scalar;

/// Per-pixel segment ids at base resolution. Ids are dense in `[0, S)` and
/// numbered in raster order of first appearance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentMap {
    pub width: usize,
    pub height: usize,
    pub pixel_labels: Vec<u32>,
    pub segment_areas: Vec<usize>,
}

/// Segment id of every HOG cell of one pyramid level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelCells {
    pub grid_w: usize,
    pub grid_h: usize,
    pub ids: Vec<u32>,
}

impl LevelCells {
    #[inline]
    pub fn id(&self, cx: usize, cy: usize) -> u32 {
        self.ids[cy * self.grid_w + cx]
    }
}

impl SegmentMap {
    pub fn num_segments(&self) -> usize {
        self.segment_areas.len()
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.pixel_labels[y * self.width + x]
    }

    /// Builds a map from raw labels, renumbering ids densely in raster order.
    pub fn from_raw(width: usize, height: usize, raw: &[u32]) -> Result<Self> {
        if raw.len() != width * height {
            return Err(Error::argument("segment label count does not match dimensions"));
        }
        let mut remap = std::collections::HashMap::new();
        let mut areas = Vec::new();
        let pixel_labels = raw
            .iter()
            .map(|&r| {
                let next = remap.len() as u32;
                let id = *remap.entry(r).or_insert(next);
                if id as usize == areas.len() {
                    areas.push(0);
                }
                areas[id as usize] += 1;
                id
            })
            .collect();
        Ok(Self {
            width,
            height,
            pixel_labels,
            segment_areas: areas,
        })
    }

    /// Writes ids as a 16-bit binary PGM (big-endian samples, maxval 65535).
    pub fn write_pgm16(&self, path: impl AsRef<Path>) -> Result<()> {
        if self.num_segments() > 65536 {
            return Err(Error::format("too many segments for a 16-bit map"));
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "P5\n{} {}\n65535\n", self.width, self.height)?;
        for &id in &self.pixel_labels {
            f.write_all(&(id as u16).to_be_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_pgm16(path: impl AsRef<Path>) -> Result<Self> {
        let img: RasterImage<f64> = crate::imaging::load_image(path)?;
        if img.channels() != 1 {
            return Err(Error::format("segment map must be single-channel"));
        }
        let raw: Vec<u32> = img.data().iter().map(|v| (v * 65535.0).round() as u32).collect();
        Self::from_raw(img.width(), img.height(), &raw)
    }
}

struct Forest {
    parent: Vec<usize>,
    size: Vec<usize>,
    threshold: Vec<f64>,
}

impl Forest {
    fn new(n: usize, k: f64) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            threshold: vec![k; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn join(&mut self, a: usize, b: usize) -> usize {
        let (big, small) = if self.size[a] >= self.size[b] { (a, b) } else { (b, a) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        big
    }
}

/// Segments the image on its 8-connected pixel graph.
///
/// Edges (weight = Euclidean color distance) are visited in increasing
/// order; two regions merge when the edge weight does not exceed either
/// region's internal difference plus `k / area`. Afterwards regions smaller
/// than `min_size` are merged across their cheapest boundary edge.
pub fn segment_unsupervised<T: Scalar>(img: &RasterImage<T>, k: f64, min_size: usize) -> Result<SegmentMap> {
    if !(k > 0.0) {
        return Err(Error::argument(format!("segmentation scale k = {k} must be positive")));
    }
    if min_size == 0 {
        return Err(Error::argument("min_size must be at least 1"));
    }
    let (w, h) = (img.width(), img.height());
    let dist = |a: usize, b: usize| -> f64 {
        let (pa, pb) = (img.pixel(a % w, a / w), img.pixel(b % w, b / w));
        pa.iter()
            .zip(pb)
            .map(|(&x, &y)| {
                let d = (x - y).as_f64();
                d * d
            })
            .sum::<f64>()
            .sqrt()
    };

    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(w * h * 4);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                edges.push((dist(i, i + 1), i, i + 1));
            }
            if y + 1 < h {
                edges.push((dist(i, i + w), i, i + w));
                if x + 1 < w {
                    edges.push((dist(i, i + w + 1), i, i + w + 1));
                }
                if x > 0 {
                    edges.push((dist(i, i + w - 1), i, i + w - 1));
                }
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut forest = Forest::new(w * h, k);
    for &(weight, u, v) in &edges {
        let (a, b) = (forest.find(u), forest.find(v));
        if a != b && weight <= forest.threshold[a] && weight <= forest.threshold[b] {
            let root = forest.join(a, b);
            forest.threshold[root] = weight + k / forest.size[root] as f64;
        }
    }
    for &(_, u, v) in &edges {
        let (a, b) = (forest.find(u), forest.find(v));
        if a != b && (forest.size[a] < min_size || forest.size[b] < min_size) {
            forest.join(a, b);
        }
    }

    let roots: Vec<u32> = (0..w * h).map(|i| forest.find(i) as u32).collect();
    SegmentMap::from_raw(w, h, &roots)
}

/// Assigns every cell of every pyramid level the majority segment id among
/// the base pixels it covers; ties go to the smaller id.
pub fn project_segments(seg: &SegmentMap, geometry: &PyramidGeometry, grids: &[(usize, usize)]) -> Vec<LevelCells> {
    let mut scratch: Vec<u32> = Vec::new();
    grids
        .iter()
        .enumerate()
        .map(|(level, &(gw, gh))| {
            let mut ids = Vec::with_capacity(gw * gh);
            for cy in 0..gh {
                for cx in 0..gw {
                    let r = geometry.cell_rect(level, cx as i64, cy as i64).clip(seg.width, seg.height);
                    scratch.clear();
                    for y in r.y0..r.y1 {
                        for x in r.x0..r.x1 {
                            scratch.push(seg.label(x as usize, y as usize));
                        }
                    }
                    ids.push(majority(&mut scratch));
                }
            }
            LevelCells {
                grid_w: gw,
                grid_h: gh,
                ids,
            }
        })
        .collect()
}

fn majority(ids: &mut [u32]) -> u32 {
    ids.sort_unstable();
    let (mut best, mut best_count) = (0u32, 0usize);
    let mut i = 0;
    while i < ids.len() {
        let mut j = i;
        while j < ids.len() && ids[j] == ids[i] {
            j += 1;
        }
        // Strictly greater keeps the smaller id on ties.
        if j - i > best_count {
            best = ids[i];
            best_count = j - i;
        }
        i = j;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halves(w: usize, h: usize) -> RasterImage<f64> {
        RasterImage::from_fn(w, h, 3, |x, _, c| if x < w / 2 { 0.1 } else if c == 0 { 0.9 } else { 0.2 }).unwrap()
    }

    #[test]
    fn constant_image_is_one_segment() {
        let img = RasterImage::<f64>::filled(12, 9, 3, 0.4).unwrap();
        let seg = segment_unsupervised(&img, 0.5, 1).unwrap();
        assert_eq!(seg.num_segments(), 1);
        assert_eq!(seg.segment_areas, vec![108]);
    }

    #[test]
    fn two_flat_halves_stay_separate() {
        // Boundary weight ~0.8 while each half saturates at k/50 = 0.002.
        let seg = segment_unsupervised(&halves(10, 10), 0.1, 5).unwrap();
        assert_eq!(seg.num_segments(), 2);
        assert_eq!(seg.segment_areas, vec![50, 50]);
        assert_eq!(seg.label(0, 0), 0);
        assert_eq!(seg.label(9, 9), 1);
    }

    #[test]
    fn min_size_of_whole_image_forces_one_segment() {
        let seg = segment_unsupervised(&halves(10, 10), 0.1, 100).unwrap();
        assert_eq!(seg.num_segments(), 1);
    }

    #[test]
    fn areas_partition_the_image() {
        let img = RasterImage::<f64>::from_fn(23, 17, 1, |x, y, _| ((x * 31 + y * 17) % 11) as f64 / 10.0).unwrap();
        let seg = segment_unsupervised(&img, 0.3, 4).unwrap();
        assert_eq!(seg.segment_areas.iter().sum::<usize>(), 23 * 17);
        assert!(seg.pixel_labels.iter().all(|&l| (l as usize) < seg.num_segments()));
        assert!(seg.segment_areas.iter().all(|&a| a >= 4));
    }

    #[test]
    fn rejects_bad_parameters() {
        let img = halves(10, 10);
        assert!(segment_unsupervised(&img, 0.0, 1).is_err());
        assert!(segment_unsupervised(&img, 1.0, 0).is_err());
    }

    #[test]
    fn projection_single_segment() {
        let seg = SegmentMap::from_raw(32, 24, &vec![5; 32 * 24]).unwrap();
        let g = PyramidGeometry::from_step(32, 24, 8, 0.5, 2);
        let cells = project_segments(&seg, &g, &[(4, 3), (2, 1)]);
        assert!(cells.iter().all(|l| l.ids.iter().all(|&id| id == 0)));
        assert_eq!(cells[1].ids.len(), 2);
    }

    #[test]
    fn projection_majority_and_tie_break() {
        // One 10x8 cell: 60% id A on the left, 40% id B on the right.
        let g = PyramidGeometry::new(10, 10, 10, vec![1.0]);
        let raw: Vec<u32> = (0..100).map(|i| if i % 10 < 6 { 3 } else { 7 }).collect();
        let seg = SegmentMap::from_raw(10, 10, &raw).unwrap();
        assert_eq!(project_segments(&seg, &g, &[(1, 1)])[0].ids, vec![0]);

        // 50/50 split where the larger raw id comes first in raster order.
        let raw: Vec<u32> = (0..100).map(|i| if i % 10 < 5 { 5 } else { 2 }).collect();
        let seg = SegmentMap::from_raw(10, 10, &raw).unwrap();
        let flipped: Vec<u32> = (0..100).map(|i| if i % 10 < 5 { 1 } else { 0 }).collect();
        let seg_flipped = SegmentMap { pixel_labels: flipped, ..seg.clone() };
        assert_eq!(project_segments(&seg, &g, &[(1, 1)])[0].ids, vec![0]);
        assert_eq!(project_segments(&seg_flipped, &g, &[(1, 1)])[0].ids, vec![0]);
    }

    #[test]
    fn pgm16_round_trip() {
        let raw: Vec<u32> = (0..48).map(|i| (i / 7) as u32).collect();
        let seg = SegmentMap::from_raw(8, 6, &raw).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seg.pgm");
        seg.write_pgm16(&path).unwrap();
        assert_eq!(SegmentMap::read_pgm16(&path).unwrap(), seg);
    }
}
