//! Raster types shared by the pipeline: real-valued fields, normalized
//! grayscale images, binary masks and pixel coordinates.
//!
//! Coordinates follow the point-prompt convention of promptable segmenters:
//! `x` is the column, `y` is the row, the origin is the top-left pixel and
//! every serialized point is written in `(x, y)` order.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// A dense row-major real-valued raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "field data has {} samples, expected {}x{} = {}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Bilinear interpolation at a real-valued position, clamped to the
    /// raster.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rotates the raster a quarter turn counter-clockwise.
    ///
    /// The source pixel `(x, y)` lands at `(y, width - 1 - x)`.
    pub fn rot90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut out = Self::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                out.set(y, w - 1 - x, self.get(x, y));
            }
        }
        out
    }
}

/// A grayscale image, the function being analysed.
///
/// Images produced by [`load_gray`] hold intensities in `[0, 1]`; images
/// built in memory only need finite samples so that intensity-scaled copies
/// remain representable.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    field: Field,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_field(Field::from_vec(width, height, data)?)
    }

    pub fn from_field(field: Field) -> Result<Self> {
        if field.width == 0 || field.height == 0 {
            return Err(Error::InvalidInput("image has zero area".into()));
        }
        if field.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("image contains non-finite samples".into()));
        }
        Ok(Self { field })
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_field(Field::from_fn(width, height, f))
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.field.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.field.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.field.get(x, y)
    }

    pub fn data(&self) -> &[f64] {
        &self.field.data
    }

    pub fn as_field(&self) -> &Field {
        &self.field
    }

    /// Multiplies every intensity by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            field: self.field.map(|v| v * c),
        }
    }

    /// `1 - intensity` everywhere; turns dark valleys into bright ridges.
    pub fn inverted(&self) -> Self {
        Self {
            field: self.field.map(|v| 1.0 - v),
        }
    }

    pub fn rot90(&self) -> Self {
        Self {
            field: self.field.rot90(),
        }
    }

    /// Writes the image as a 16-bit grayscale PNG, clipping to `[0, 1]`.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_fn(self.width() as u32, self.height() as u32, |x, y| {
                let v = self.get(x as usize, y as usize).clamp(0.0, 1.0);
                Luma([(v * 65535.0).round() as u16])
            });
        buf.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// An integer pixel position; serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct PixelPoint {
    pub x: u32,
    pub y: u32,
}

impl PixelPoint {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn in_bounds(&self, width: usize, height: usize) -> bool {
        (self.x as usize) < width && (self.y as usize) < height
    }
}

impl From<[u32; 2]> for PixelPoint {
    fn from([x, y]: [u32; 2]) -> Self {
        Self { x, y }
    }
}

impl From<PixelPoint> for [u32; 2] {
    fn from(p: PixelPoint) -> Self {
        [p.x, p.y]
    }
}

/// A binary segmentation mask with optional segmenter quality metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    /// Segmenter-predicted mask quality in `[0, 1]`.
    pub pred_iou: Option<f64>,
    /// Stability of the mask under binarization-threshold changes, in `[0, 1]`.
    pub stability: Option<f64>,
}

impl BinaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
            pred_iou: None,
            stability: None,
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "mask has {} bits, expected {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
            pred_iou: None,
            stability: None,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
            pred_iou: None,
            stability: None,
        }
    }

    pub fn with_scores(mut self, pred_iou: Option<f64>, stability: Option<f64>) -> Self {
        self.pred_iou = pred_iou;
        self.stability = stability;
        self
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn area_fraction(&self) -> f64 {
        if self.area() == 0 {
            0.0
        } else {
            self.count() as f64 / self.area() as f64
        }
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// In-place logical OR.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        if !self.same_dims(other) {
            return Err(Error::InvalidInput(format!(
                "mask dimensions differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// Writes an 8-bit PNG with values `{0, 255}`.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_fn(self.width as u32, self.height as u32, |x, y| {
                Luma([if self.get(x as usize, y as usize) { 255 } else { 0 }])
            });
        buf.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Loads a mask PNG; any nonzero luminance counts as foreground.
    pub fn load_png(path: &Path) -> Result<Self> {
        let img = open_image(path)?.into_luma16();
        let (w, h) = img.dimensions();
        if w == 0 || h == 0 {
            return Err(Error::InvalidInput(format!("{}: zero-area mask", path.display())));
        }
        let bits = img.pixels().map(|p| p.0[0] != 0).collect();
        Self::from_bits(w as usize, h as usize, bits)
    }
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

fn luminance(r: f64, g: f64, b: f64) -> f64 {
    LUMA_R * r + LUMA_G * g + LUMA_B * b
}

/// Decodes a raster into normalized intensities.
///
/// 8-bit data is divided by 255 and 16-bit data by 65535; color is collapsed
/// to luminance before normalization. Alpha is ignored.
pub fn gray_from_dynamic(img: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::InvalidInput("image has zero area".into()));
    }
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb8(b) => b
            .pixels()
            .map(|p| luminance(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64) / 255.0)
            .collect(),
        DynamicImage::ImageRgba8(b) => b
            .pixels()
            .map(|p| luminance(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64) / 255.0)
            .collect(),
        DynamicImage::ImageRgb16(b) => b
            .pixels()
            .map(|p| luminance(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64) / 65535.0)
            .collect(),
        DynamicImage::ImageRgba16(b) => b
            .pixels()
            .map(|p| luminance(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64) / 65535.0)
            .collect(),
        other => other
            .to_rgb32f()
            .pixels()
            .map(|p| luminance(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
            .collect(),
    };
    let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    GrayImage::new(w, h, data)
}

/// Loads a PNG (8/16-bit gray or RGB) as a normalized grayscale image.
///
/// With `invert`, every intensity `v` becomes `1 - v`, which turns dark
/// valley-like structures into ridges.
pub fn load_gray(path: &Path, invert: bool) -> Result<GrayImage> {
    let img = gray_from_dynamic(&open_image(path)?).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::InvalidInput(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(if invert { img.inverted() } else { img })
}
