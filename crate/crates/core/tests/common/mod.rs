#![allow(dead_code)]

use ridgeprompt::{
    synth_image, BinaryMask, Field, GrayImage, GroundTruth, RidgeCurve, RidgePoint, RidgeVolume, ScaleSpec, SynthSpec,
};

pub const SIDE: usize = 128;
pub const X0: f64 = 64.0;
pub const SIGMAS: [f64; 3] = [1.5, 2.0, 3.0];

/// Full-height vertical Gaussian ridge at column `X0`, amplitude 1.
pub fn vertical_ridge(sigma: f64, noise: f64, seed: u64) -> (GrayImage, GroundTruth) {
    let spec = SynthSpec::new(SIDE, SIDE).with_noise(noise, seed);
    let path = spec.vertical_line(X0);
    synth_image(&spec.with_ridge(path, sigma, 1.0)).unwrap()
}

/// Ladder index nearest `t` in log distance.
pub fn nearest_index(spec: &ScaleSpec, t: f64) -> usize {
    let d = |s: f64| (s.ln() - t.ln()).abs();
    (0..spec.len())
        .min_by(|&a, &b| d(spec.scales()[a]).total_cmp(&d(spec.scales()[b])))
        .unwrap()
}

/// Scale index carrying the largest summed strength among points in column
/// `column`.
pub fn weighted_modal_scale(volume: &RidgeVolume, column: u32) -> Option<usize> {
    let mut mass = vec![0.0; volume.num_scales()];
    for p in volume.points.iter().filter(|p| p.x == column) {
        mass[p.k as usize] += p.strength;
    }
    (0..mass.len())
        .filter(|&k| mass[k] > 0.0)
        .max_by(|&a, &b| mass[a].total_cmp(&mass[b]))
}

pub fn max_rel_diff(a: &Field, b: &Field) -> f64 {
    assert_eq!((a.width(), a.height()), (b.width(), b.height()));
    let scale = a
        .data()
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Field, b: &Field) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Deterministic pseudo-random values in `[0, 1)` (SplitMix64), independent
/// of the library's generator.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut r = SplitMix(seed);
    GrayImage::from_fn(w, h, |_, _| r.unit()).unwrap()
}

pub fn random_mask(w: usize, h: usize, rng: &mut SplitMix) -> BinaryMask {
    let density = rng.unit();
    BinaryMask::from_fn(w, h, |_, _| rng.unit() < density)
}

/// A curve covering the given pixels at scale 1 with uniform strength.
pub fn curve_on(id: usize, pixels: &[(u32, u32)], strength: f64) -> RidgeCurve {
    let points = pixels
        .iter()
        .map(|&(x, y)| RidgePoint { x, y, k: 1, strength })
        .collect();
    RidgeCurve::from_points(id, points)
}
