use std::path::Path;

use image::{DynamicImage, ImageBuffer, Rgb};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major image with 1 or 3 interleaved channels, intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> RasterImage<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::argument(format!("unsupported channel count {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::argument("image has zero extent"));
        }
        if data.len() != width * height * channels {
            return Err(Error::argument(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Interleaved 8-bit samples in `[0, 255]`.
    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, channels, scale_samples(bytes, 255.0))
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height * 3);
        for px in self.data.chunks(self.channels) {
            for c in 0..3 {
                let v = px[c.min(self.channels - 1)].as_f64();
                out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> RasterImage<U> {
        RasterImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Reads a PNG or binary/ASCII PPM/PGM file.
pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<RasterImage<T>> {
    let bytes = std::fs::read(path.as_ref())?;
    decode_image(&bytes)
}

/// Decodes an in-memory PNG or PNM stream. 8-bit samples are scaled by 1/255
/// and 16-bit samples by 1/65535; alpha is dropped.
pub fn decode_image<T: Scalar>(bytes: &[u8]) -> Result<RasterImage<T>> {
    let dynamic = image::load_from_memory(bytes).map_err(|e| Error::format(e.to_string()))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let color = dynamic.color();
    let channels = if color.has_color() { 3 } else { 1 };
    let sixteen = color.bytes_per_pixel() / color.channel_count() == 2;

    let data: Vec<T> = match (channels, sixteen) {
        (1, false) => scale_samples(dynamic.to_luma8().as_raw(), 255.0),
        (3, false) => scale_samples(dynamic.to_rgb8().as_raw(), 255.0),
        (1, true) => scale_samples(dynamic.to_luma16().as_raw(), 65535.0),
        _ => scale_samples(dynamic.to_rgb16().as_raw(), 65535.0),
    };
    RasterImage::new(w, h, channels, data)
}

fn scale_samples<T: Scalar, S: Copy + Into<f64>>(raw: &[S], max: f64) -> Vec<T> {
    raw.iter().map(|&s| T::of(s.into() / max)).collect()
}

/// Writes the image as an 8-bit RGB PNG.
pub fn save_png<T: Scalar>(img: &RasterImage<T>, path: impl AsRef<Path>) -> Result<()> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, img.to_rgb8())
            .ok_or_else(|| Error::format("image buffer size mismatch"))?;
    DynamicImage::ImageRgb8(buf)
        .save_with_format(path.as_ref(), image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::Io(io),
            other => Error::format(other.to_string()),
        })
}
