//! Synthetic curvilinear images with exact ground truth.
//!
//! Every ridge has a Gaussian cross-section, `amplitude * exp(-d^2 / (2
//! sigma^2))` with `d` the Euclidean distance to the continuous path, so its
//! scale-space response has a closed form. Ridges superpose additively,
//! Gaussian noise is added, and the result is clipped to `[0, 1]`.

use rand_core::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Field, GrayImage, PixelPoint};

/// Profiles are evaluated out to this many sigmas (`exp(-32) ~ 1e-14`).
const CUTOFF_SIGMAS: f64 = 8.0;
/// Arclength step used to rasterize centerlines and flatten curved paths.
const PATH_STEP: f64 = 0.25;
/// Reference masks cover pixels within this many sigmas of a centerline.
pub const MASK_SIGMAS: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RidgePath {
    /// Straight segment between two points `[x, y]`.
    Line { from: [f64; 2], to: [f64; 2] },
    /// Vertical sinusoid `x = x0 + amplitude sin(2 pi y / period + phase)`
    /// spanning the full image height.
    Sinusoid {
        x0: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Two full-length straight lines through `center` at the given angles
    /// (degrees, measured from the +x axis towards +y).
    Crossing { center: [f64; 2], angles_deg: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeSpec {
    pub path: RidgePath,
    /// Gaussian half-width in pixels; the ridge's natural scale is `sigma^2`.
    pub sigma: f64,
    /// Peak intensity in `(0, 1]`.
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub ridges: Vec<RidgeSpec>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            ridges: Vec::new(),
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn with_ridge(mut self, path: RidgePath, sigma: f64, amplitude: f64) -> Self {
        self.ridges.push(RidgeSpec { path, sigma, amplitude });
        self
    }

    pub fn with_noise(mut self, noise_sigma: f64, seed: u64) -> Self {
        self.noise_sigma = noise_sigma;
        self.seed = seed;
        self
    }

    /// A full-height vertical line at column `x0`.
    pub fn vertical_line(&self, x0: f64) -> RidgePath {
        RidgePath::Line {
            from: [x0, -1.0],
            to: [x0, self.height as f64],
        }
    }

    /// A full-width horizontal line at row `y0`.
    pub fn horizontal_line(&self, y0: f64) -> RidgePath {
        RidgePath::Line {
            from: [-1.0, y0],
            to: [self.width as f64, y0],
        }
    }
}

/// Ground truth for one centerline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeTruth {
    /// In-bounds pixels the continuous path passes through, in path order.
    pub centerline: Vec<PixelPoint>,
    pub sigma: f64,
    /// Natural scale `sigma^2`.
    pub t0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub ridges: Vec<RidgeTruth>,
    /// Pixels within two sigma of any centerline.
    #[serde(skip)]
    pub mask: Option<BinaryMask>,
}

impl GroundTruth {
    /// Distance in pixels (Chebyshev) from `p` to the nearest centerline
    /// pixel of any ridge, or `None` without ridges.
    pub fn chebyshev_distance(&self, x: u32, y: u32) -> Option<u32> {
        self.ridges
            .iter()
            .flat_map(|r| &r.centerline)
            .map(|c| c.x.abs_diff(x).max(c.y.abs_diff(y)))
            .min()
    }

    /// Euclidean distance from `(x, y)` to the nearest centerline pixel.
    pub fn euclidean_distance(&self, x: u32, y: u32) -> Option<f64> {
        self.ridges
            .iter()
            .flat_map(|r| &r.centerline)
            .map(|c| {
                let dx = c.x as f64 - x as f64;
                let dy = c.y as f64 - y as f64;
                (dx * dx + dy * dy).sqrt()
            })
            .min_by(f64::total_cmp)
    }
}

/// A polyline belonging to one ridge profile.
struct Strand {
    vertices: Vec<[f64; 2]>,
    sigma: f64,
    amplitude: f64,
}

fn expand(spec: &SynthSpec, ridge: &RidgeSpec) -> Vec<Strand> {
    let strand = |vertices| Strand {
        vertices,
        sigma: ridge.sigma,
        amplitude: ridge.amplitude,
    };
    let reach = (spec.width + spec.height) as f64;
    match ridge.path {
        RidgePath::Line { from, to } => vec![strand(vec![from, to])],
        RidgePath::Sinusoid {
            x0,
            amplitude,
            period,
            phase,
        } => {
            let margin = CUTOFF_SIGMAS * ridge.sigma;
            let (y0, y1) = (-margin, spec.height as f64 - 1.0 + margin);
            let n = ((y1 - y0) / PATH_STEP).ceil() as usize;
            let verts = (0..=n)
                .map(|i| {
                    let y = y0 + (y1 - y0) * i as f64 / n as f64;
                    let x = x0 + amplitude * (std::f64::consts::TAU * y / period + phase).sin();
                    [x, y]
                })
                .collect();
            vec![strand(verts)]
        }
        RidgePath::Crossing { center, angles_deg } => angles_deg
            .iter()
            .map(|a| {
                let (s, c) = a.to_radians().sin_cos();
                strand(vec![
                    [center[0] - reach * c, center[1] - reach * s],
                    [center[0] + reach * c, center[1] + reach * s],
                ])
            })
            .collect(),
    }
}

fn segment_distance_sq(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len_sq = dx * dx + dy * dy;
    let u = if len_sq > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a[0] + u * dx - p[0], a[1] + u * dy - p[1]);
    ex * ex + ey * ey
}

/// Squared distance to the strand for every pixel within the cutoff,
/// `INFINITY` elsewhere.
fn distance_sq_field(width: usize, height: usize, strand: &Strand) -> Vec<f64> {
    let cutoff = CUTOFF_SIGMAS * strand.sigma;
    let mut d2 = vec![f64::INFINITY; width * height];
    for seg in strand.vertices.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let lo_x = (a[0].min(b[0]) - cutoff).floor().max(0.0);
        let hi_x = (a[0].max(b[0]) + cutoff).ceil().min(width as f64 - 1.0);
        let lo_y = (a[1].min(b[1]) - cutoff).floor().max(0.0);
        let hi_y = (a[1].max(b[1]) + cutoff).ceil().min(height as f64 - 1.0);
        if lo_x > hi_x || lo_y > hi_y {
            continue;
        }
        for y in lo_y as usize..=hi_y as usize {
            for x in lo_x as usize..=hi_x as usize {
                let v = segment_distance_sq([x as f64, y as f64], a, b);
                let slot = &mut d2[y * width + x];
                if v < *slot {
                    *slot = v;
                }
            }
        }
    }
    d2
}

/// In-bounds pixels visited when walking the strand at a fine arclength
/// step, deduplicated in walk order.
fn rasterize(width: usize, height: usize, strand: &Strand) -> Vec<PixelPoint> {
    let mut out: Vec<PixelPoint> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut visit = |x: f64, y: f64| {
        let (px, py) = (x.round(), y.round());
        if px >= 0.0 && py >= 0.0 && (px as usize) < width && (py as usize) < height {
            let p = PixelPoint::new(px as u32, py as u32);
            if seen.insert(p) {
                out.push(p);
            }
        }
    };
    for seg in strand.vertices.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let n = (len / PATH_STEP).ceil().max(1.0) as usize;
        for i in 0..=n {
            let u = i as f64 / n as f64;
            visit(a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]));
        }
    }
    out
}

fn validate(spec: &SynthSpec) -> Result<()> {
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::param("dims", "image must have nonzero width and height"));
    }
    if !(spec.noise_sigma.is_finite() && spec.noise_sigma >= 0.0) {
        return Err(Error::param("noise_sigma", format!("{} is negative", spec.noise_sigma)));
    }
    for r in &spec.ridges {
        if !(r.sigma.is_finite() && r.sigma > 0.0) {
            return Err(Error::param("sigma", format!("{} is not positive", r.sigma)));
        }
        if !(r.amplitude > 0.0 && r.amplitude <= 1.0) {
            return Err(Error::param("amplitude", format!("{} is outside (0, 1]", r.amplitude)));
        }
        if let RidgePath::Sinusoid { period, .. } = r.path {
            if !(period.is_finite() && period > 0.0) {
                return Err(Error::param("period", format!("{period} is not positive")));
            }
        }
    }
    Ok(())
}

/// Renders the synthetic image and its ground truth. Deterministic given
/// `spec.seed`.
pub fn synth_image(spec: &SynthSpec) -> Result<(GrayImage, GroundTruth)> {
    validate(spec)?;
    let (w, h) = (spec.width, spec.height);
    let mut field = Field::zeros(w, h);
    let mut mask = BinaryMask::empty(w, h);
    let mut truths = Vec::new();

    for ridge in &spec.ridges {
        for strand in expand(spec, ridge) {
            let centerline = rasterize(w, h, &strand);
            if centerline.is_empty() {
                return Err(Error::param(
                    "ridges",
                    format!("ridge path {:?} does not pass through the {w}x{h} image", ridge.path),
                ));
            }
            let d2 = distance_sq_field(w, h, &strand);
            let two_var = 2.0 * strand.sigma * strand.sigma;
            let mask_r2 = (MASK_SIGMAS * strand.sigma).powi(2);
            for (i, &d) in d2.iter().enumerate() {
                if d.is_finite() {
                    field.data_mut()[i] += strand.amplitude * (-d / two_var).exp();
                    if d <= mask_r2 {
                        mask.set(i % w, i / w, true);
                    }
                }
            }
            truths.push(RidgeTruth {
                centerline,
                sigma: strand.sigma,
                t0: strand.sigma * strand.sigma,
            });
        }
    }

    if spec.noise_sigma > 0.0 {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma).expect("validated noise level");
        for v in field.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    for v in field.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }

    Ok((
        GrayImage::from_field(field)?,
        GroundTruth {
            ridges: truths,
            mask: Some(mask),
        },
    ))
}
