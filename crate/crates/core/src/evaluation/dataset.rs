//! On-disk dataset and detection formats.
//!
//! A dataset directory holds `images/NNN.png`, `masks/NNN.png` (8-bit, value
//! `k + 1` where object `k` is visible, 0 elsewhere) and `annotations.jsonl`
//! with one JSON record per object instance.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::synth::SynthImage;
use crate::evaluation::PixelMask;
use crate::imaging::save_png;
use crate::inference::Detection;
use crate::model::{rle_decode, rle_encode, rle_from_str, rle_to_string, Label, Position, ViewpointShape};
use crate::scalar::Scalar;

/// One annotated object instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub image: usize,
    pub object: usize,
    pub viewpoint: usize,
    /// Box size in cells, `[width, height]`.
    pub shape: [usize; 2],
    pub level: usize,
    pub x: i64,
    pub y: i64,
    /// Box in base pixels, `[x0, y0, x1, y1]` half-open.
    #[serde(rename = "box")]
    pub bbox: [i64; 4],
    /// Run-length visibility, starting with a run of zeros.
    pub v: Vec<u32>,
}

impl Annotation {
    pub fn label(&self) -> Label {
        Label::new(Position::new(self.x, self.y, self.level), rle_decode(&self.v), self.viewpoint)
    }

    pub fn shape(&self) -> Result<ViewpointShape> {
        ViewpointShape::new(self.shape[0], self.shape[1])
    }

    pub fn rect(&self) -> crate::geometry::PixelRect {
        let [x0, y0, x1, y1] = self.bbox;
        crate::geometry::PixelRect::new(x0, y0, x1, y1)
    }
}

pub fn image_name(index: usize) -> String {
    format!("{index:03}.png")
}

pub fn image_path(root: &Path, index: usize) -> PathBuf {
    root.join("images").join(image_name(index))
}

pub fn mask_path(root: &Path, index: usize) -> PathBuf {
    root.join("masks").join(image_name(index))
}

/// Writes a generated dataset under `root`.
pub fn write_dataset(root: &Path, images: &[SynthImage], shape: ViewpointShape) -> Result<()> {
    fs::create_dir_all(root.join("images"))?;
    fs::create_dir_all(root.join("masks"))?;
    let mut ann = String::new();
    for (i, img) in images.iter().enumerate() {
        save_png(&img.image, image_path(root, i))?;
        let (w, h) = (img.image.width(), img.image.height());
        let mut mask = GrayImage::new(w as u32, h as u32);
        for o in &img.objects {
            for (p, _) in o.mask.bits.iter().enumerate().filter(|(_, &b)| b) {
                mask.put_pixel((p % w) as u32, (p / w) as u32, Luma([o.object as u8 + 1]));
            }
            let a = Annotation {
                image: i,
                object: o.object,
                viewpoint: o.label.viewpoint,
                shape: [shape.width, shape.height],
                level: o.label.pos.level,
                x: o.label.pos.x,
                y: o.label.pos.y,
                bbox: [o.rect.x0, o.rect.y0, o.rect.x1, o.rect.y1],
                v: rle_encode(&o.label.visibility),
            };
            ann.push_str(&serde_json::to_string(&a).expect("annotation serializes"));
            ann.push('\n');
        }
        mask.save(mask_path(root, i)).map_err(|e| Error::format(e.to_string()))?;
    }
    fs::write(root.join("annotations.jsonl"), ann)?;
    Ok(())
}

/// Reads `annotations.jsonl`; malformed lines are reported with their line number.
pub fn read_annotations(root: &Path) -> Result<Vec<Annotation>> {
    let path = root.join("annotations.jsonl");
    let file = fs::File::open(&path).map_err(|e| Error::Parse {
        file: path.clone(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let a: Annotation = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: path.clone(),
            line: n + 1,
            message: e.to_string(),
        })?;
        let cells = a.shape[0] * a.shape[1];
        if a.shape[0] == 0 || a.shape[1] == 0 || rle_decode(&a.v).len() != cells {
            return Err(Error::Parse {
                file: path.clone(),
                line: n + 1,
                message: format!("visibility does not cover the {}x{} box", a.shape[0], a.shape[1]),
            });
        }
        out.push(a);
    }
    Ok(out)
}

/// Visible pixels of object `object` in a stored mask image.
pub fn read_mask(path: &Path, object: usize) -> Result<PixelMask> {
    let img = image::open(path).map_err(|e| Error::format(format!("{}: {e}", path.display())))?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    PixelMask::new(w, h, img.as_raw().iter().map(|&v| v as usize == object + 1).collect())
}

/// One line of a detections file.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionRecord {
    pub image: usize,
    pub object: usize,
    pub label: Label,
    pub score: f64,
}

impl DetectionRecord {
    pub fn from_detection<T: Scalar>(image: usize, object: usize, d: &Detection<T>) -> Self {
        Self {
            image,
            object,
            label: d.label.clone(),
            score: d.score.as_f64(),
        }
    }
}

/// `image object viewpoint level x y score rle`, one record per line.
pub fn write_detections(mut out: impl Write, records: &[DetectionRecord]) -> Result<()> {
    let mut s = String::new();
    for r in records {
        let p = r.label.pos;
        writeln!(
            s,
            "{} {} {} {} {} {} {:e} {}",
            r.image,
            r.object,
            r.label.viewpoint,
            p.level,
            p.x,
            p.y,
            r.score,
            rle_to_string(&r.label.visibility)
        )
        .unwrap();
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, message: String| Error::Parse {
        file: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 8 {
            return Err(err(n + 1, format!("expected 8 fields, found {}", f.len())));
        }
        let int = |s: &str| s.parse::<i64>().map_err(|e| err(n + 1, format!("{s:?}: {e}")));
        let nat = |s: &str| s.parse::<usize>().map_err(|e| err(n + 1, format!("{s:?}: {e}")));
        let score = f[6].parse::<f64>().map_err(|e| err(n + 1, format!("{:?}: {e}", f[6])))?;
        let v = rle_from_str(f[7]).map_err(|e| err(n + 1, e.to_string()))?;
        out.push(DetectionRecord {
            image: nat(f[0])?,
            object: nat(f[1])?,
            label: Label::new(Position::new(int(f[4])?, int(f[5])?, nat(f[3])?), v, nat(f[2])?),
            score,
        });
    }
    Ok(out)
}
