//! Display images: strength maps and prompt overlays.

use image::{GrayImage as Luma8Image, Luma, Rgb, RgbImage};

use crate::image::{Field, GrayImage, PixelPoint};

/// Maximum strength over scales, scaled so the strongest pixel is 255.
pub fn strength_png(strengths: &[Field]) -> Luma8Image {
    let Some(first) = strengths.first() else {
        return Luma8Image::new(1, 1);
    };
    let (w, h) = (first.width(), first.height());
    let mut max = Field::zeros(w, h);
    for s in strengths {
        for (m, v) in max.data_mut().iter_mut().zip(s.data()) {
            *m = m.max(*v);
        }
    }
    let top = max.max_value();
    let scale = if top > 0.0 { 255.0 / top } else { 0.0 };
    Luma8Image::from_fn(w as u32, h as u32, |x, y| {
        Luma([(max.get(x as usize, y as usize) * scale).round().clamp(0.0, 255.0) as u8])
    })
}

/// Contrast-stretched image with each prompt drawn as a red cross.
pub fn prompt_overlay(image: &GrayImage, points: &[PixelPoint]) -> RgbImage {
    let data = image.data();
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = (image.width() as u32, image.height() as u32);
    let mut out = RgbImage::from_fn(w, h, |x, y| {
        let v = ((image.get(x as usize, y as usize) - lo) / span * 255.0).round() as u8;
        Rgb([v, v, v])
    });
    for p in points {
        for d in -2i64..=2 {
            for (dx, dy) in [(d, 0), (0, d)] {
                let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
                if x >= 0 && y >= 0 && x < w as i64 && y < h as i64 {
                    out.put_pixel(x as u32, y as u32, Rgb([255, 0, 0]));
                }
            }
        }
    }
    out
}
