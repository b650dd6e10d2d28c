//! Gaussian scale-space representation and derivative jets.
//!
//! All filtering is separable. One-dimensional kernels are sampled Gaussians
//! (or their analytic derivatives) truncated at radius `ceil(4 sqrt(t))`, and
//! boundaries use symmetric (edge-repeating) reflection.
//!
//! Kernels are moment-normalized after truncation: the smoothing kernel sums
//! to one, the first-derivative kernel has zero sum and unit first moment,
//! and the second-derivative kernel has zero sum and second moment two. The
//! derivative kernels therefore differentiate polynomials up to degree two
//! exactly (up to rounding) at every scale.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Field, GrayImage};

/// Default ladder: `t_k = 1 * sqrt(2)^k`, `k = 0..9`, i.e. `t` in `[1, 16]`.
pub const DEFAULT_T_MIN: f64 = 1.0;
pub const DEFAULT_RATIO: f64 = std::f64::consts::SQRT_2;
pub const DEFAULT_NUM_SCALES: usize = 9;
/// Normalization exponent tuned to cylindrical ridge width.
pub const DEFAULT_GAMMA: f64 = 0.75;

/// Smallest image side for which a derivative jet is defined.
pub const MIN_JET_SIDE: usize = 3;

/// The scales (variances, in squared pixels) at which the image is analysed,
/// plus the gamma-normalization exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleSpec {
    scales: Vec<f64>,
    gamma: f64,
}

impl ScaleSpec {
    pub fn new(scales: Vec<f64>, gamma: f64) -> Result<Self> {
        if scales.len() < 3 {
            return Err(Error::param(
                "scales",
                format!("need at least 3 scales for a scale maximum, got {}", scales.len()),
            ));
        }
        if let Some(bad) = scales.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::param("scales", format!("scale {bad} is not positive")));
        }
        if scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("scales", "scales must be strictly increasing"));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::param("gamma", format!("{gamma} is outside (0, 1]")));
        }
        Ok(Self { scales, gamma })
    }

    /// `t_k = t_min * ratio^k` for `k = 0..count`.
    pub fn geometric(t_min: f64, ratio: f64, count: usize, gamma: f64) -> Result<Self> {
        if !(t_min.is_finite() && t_min > 0.0) {
            return Err(Error::param("t_min", format!("{t_min} is not positive")));
        }
        if !(ratio.is_finite() && ratio > 1.0) {
            return Err(Error::param("ratio", format!("{ratio} must exceed 1")));
        }
        let scales = (0..count).map(|k| t_min * ratio.powi(k as i32)).collect();
        Self::new(scales, gamma)
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.scales.clone(), gamma)
    }
}

impl Default for ScaleSpec {
    fn default() -> Self {
        Self::geometric(DEFAULT_T_MIN, DEFAULT_RATIO, DEFAULT_NUM_SCALES, DEFAULT_GAMMA)
            .expect("default scale ladder is valid")
    }
}

/// Symmetry of a one-dimensional kernel about its center tap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// A symmetric or antisymmetric 1-D correlation kernel stored by its
/// non-negative half: `taps[i]` is the weight at offset `+i`.
#[derive(Clone, Debug)]
pub struct Kernel1D {
    taps: Vec<f64>,
    parity: Parity,
}

impl Kernel1D {
    pub fn radius(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Weight at signed offset `i`.
    pub fn weight(&self, i: isize) -> f64 {
        let w = self.taps[i.unsigned_abs()];
        match self.parity {
            Parity::Odd if i < 0 => -w,
            _ => w,
        }
    }

    /// Normalized sampled Gaussian of variance `t`.
    pub fn gaussian(t: f64) -> Self {
        let g = sampled_gaussian(t);
        Self {
            taps: g,
            parity: Parity::Even,
        }
    }

    /// First derivative of the Gaussian, scaled so that correlating with a
    /// unit-slope ramp yields exactly one.
    pub fn gaussian_d1(t: f64) -> Self {
        let g = sampled_gaussian(t);
        let mut taps: Vec<f64> = g.iter().enumerate().map(|(i, &gi)| i as f64 / t * gi).collect();
        taps[0] = 0.0;
        // sum over both halves of i * w(i)
        let moment: f64 = 2.0 * taps.iter().enumerate().map(|(i, w)| i as f64 * w).sum::<f64>();
        for w in &mut taps {
            *w /= moment;
        }
        Self {
            taps,
            parity: Parity::Odd,
        }
    }

    /// Second derivative of the Gaussian with zero sum and second moment two.
    pub fn gaussian_d2(t: f64) -> Self {
        let g = sampled_gaussian(t);
        let mut taps: Vec<f64> = g
            .iter()
            .enumerate()
            .map(|(i, &gi)| {
                let x = i as f64;
                (x * x / (t * t) - 1.0 / t) * gi
            })
            .collect();
        let total = full_sum(&taps);
        for (w, gi) in taps.iter_mut().zip(&g) {
            *w -= total * gi;
        }
        let moment: f64 = 2.0 * taps.iter().enumerate().map(|(i, w)| (i * i) as f64 * w).sum::<f64>();
        let scale = 2.0 / moment;
        for w in &mut taps {
            *w *= scale;
        }
        Self {
            taps,
            parity: Parity::Even,
        }
    }
}

/// Truncation radius `ceil(4 sqrt(t))`.
pub fn kernel_radius(t: f64) -> usize {
    ((4.0 * t.sqrt()).ceil() as usize).max(1)
}

fn sampled_gaussian(t: f64) -> Vec<f64> {
    let r = kernel_radius(t);
    let mut half: Vec<f64> = (0..=r)
        .map(|i| {
            let x = i as f64;
            (-x * x / (2.0 * t)).exp()
        })
        .collect();
    let total = full_sum(&half);
    for v in &mut half {
        *v /= total;
    }
    half
}

/// Sum of a symmetric kernel given its non-negative half.
fn full_sum(half: &[f64]) -> f64 {
    half[0] + 2.0 * half[1..].iter().sum::<f64>()
}

/// Symmetric reflection of index `i` into `0..n` (edge sample repeated).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

#[inline]
fn combine(parity: Parity, ahead: f64, behind: f64) -> f64 {
    match parity {
        Parity::Even => ahead + behind,
        Parity::Odd => ahead - behind,
    }
}

/// Correlates every row with `kernel`.
///
/// Taps are accumulated in symmetric pairs so that reversing the row
/// reverses (even kernel) or negates-and-reverses (odd kernel) the output
/// bit for bit.
pub fn filter_rows(src: &Field, kernel: &Kernel1D) -> Field {
    let (w, h) = (src.width(), src.height());
    let r = kernel.radius();
    let mut out = Field::zeros(w, h);
    out.data_mut()
        .par_chunks_mut(w)
        .zip(src.data().par_chunks(w))
        .for_each_init(
            || vec![0.0; w + 2 * r],
            |padded, (dst, row)| {
                for (j, p) in padded.iter_mut().enumerate() {
                    *p = row[reflect(j as isize - r as isize, w)];
                }
                for (x, d) in dst.iter_mut().enumerate() {
                    let c = x + r;
                    let mut acc = kernel.taps[0] * padded[c];
                    for i in 1..=r {
                        acc += kernel.taps[i] * combine(kernel.parity, padded[c + i], padded[c - i]);
                    }
                    *d = acc;
                }
            },
        );
    out
}

/// Correlates every column with `kernel`; same pairing as [`filter_rows`].
pub fn filter_cols(src: &Field, kernel: &Kernel1D) -> Field {
    let (w, h) = (src.width(), src.height());
    let r = kernel.radius() as isize;
    let data = src.data();
    let mut out = Field::zeros(w, h);
    out.data_mut().par_chunks_mut(w).enumerate().for_each(|(y, dst)| {
        let y = y as isize;
        let center = &data[y as usize * w..(y as usize + 1) * w];
        for (d, &c) in dst.iter_mut().zip(center) {
            *d = kernel.taps[0] * c;
        }
        for i in 1..=r {
            let ahead = reflect(y + i, h) * w;
            let behind = reflect(y - i, h) * w;
            let a = &data[ahead..ahead + w];
            let b = &data[behind..behind + w];
            let tap = kernel.taps[i as usize];
            for ((d, &av), &bv) in dst.iter_mut().zip(a).zip(b) {
                *d += tap * combine(kernel.parity, av, bv);
            }
        }
    });
    out
}

fn check_scale(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::param("t", format!("scale {t} must be positive and finite")))
    }
}

/// `L(.; t)`: the image smoothed by a 2-D Gaussian of variance `t`.
pub fn gaussian_smooth(image: &GrayImage, t: f64) -> Result<Field> {
    check_scale(t)?;
    let g = Kernel1D::gaussian(t);
    Ok(filter_cols(&filter_rows(image.as_field(), &g), &g))
}

/// The smoothed image and its first and second partial derivatives at one
/// scale.
#[derive(Clone, Debug)]
pub struct ScaleJet {
    pub t: f64,
    pub l: Field,
    pub lx: Field,
    pub ly: Field,
    pub lxx: Field,
    pub lxy: Field,
    pub lyy: Field,
}

impl ScaleJet {
    pub fn width(&self) -> usize {
        self.l.width()
    }

    pub fn height(&self) -> usize {
        self.l.height()
    }
}

/// Computes the derivative jet at scale `t` by correlating with
/// derivative-of-Gaussian kernels (never by differencing `L`).
pub fn compute_jet(image: &GrayImage, t: f64) -> Result<ScaleJet> {
    check_scale(t)?;
    if image.width() < MIN_JET_SIDE || image.height() < MIN_JET_SIDE {
        return Err(Error::InvalidInput(format!(
            "image is {}x{}, jets need at least {MIN_JET_SIDE}x{MIN_JET_SIDE}",
            image.width(),
            image.height()
        )));
    }
    let g0 = Kernel1D::gaussian(t);
    let g1 = Kernel1D::gaussian_d1(t);
    let g2 = Kernel1D::gaussian_d2(t);
    let f = image.as_field();

    let (r0, (r1, r2)) = rayon::join(
        || filter_rows(f, &g0),
        || rayon::join(|| filter_rows(f, &g1), || filter_rows(f, &g2)),
    );
    let ((l, ly), (lyy, (lx, (lxx, lxy)))) = rayon::join(
        || rayon::join(|| filter_cols(&r0, &g0), || filter_cols(&r0, &g1)),
        || {
            rayon::join(
                || filter_cols(&r0, &g2),
                || {
                    rayon::join(
                        || filter_cols(&r1, &g0),
                        || rayon::join(|| filter_cols(&r2, &g0), || filter_cols(&r1, &g1)),
                    )
                },
            )
        },
    );
    Ok(ScaleJet {
        t,
        l,
        lx,
        ly,
        lxx,
        lxy,
        lyy,
    })
}
