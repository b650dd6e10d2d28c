//! Scale-space ridge detection.
//!
//! A pixel `(x, y)` at scale index `k` is a ridge point when
//!
//! 1. the Hessian is ridge-like: its most negative eigenvalue `lp` is
//!    negative and dominates the other one in magnitude;
//! 2. the first derivative along the `lp` eigendirection changes sign across
//!    the pixel (sampled bilinearly half a pixel either side);
//! 3. the ridge strength is a maximum over scale at that pixel (interior
//!    scale indices only, one side strictly);
//! 4. the strength clears `rel_threshold` times the largest strength among
//!    points passing 1-3.
//!
//! The result is a sparse volume of `(x, y, k, strength)` records.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Field, GrayImage};
use crate::scale_space::{compute_jet, ScaleJet, ScaleSpec};

/// Default noise floor relative to the strongest candidate.
pub const DEFAULT_REL_THRESHOLD: f64 = 0.01;

/// Relative tolerance below which `|lp| == |lq|` is treated as an umbilic or
/// saddle and rejected.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Which ridge-strength measure to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeMeasure {
    /// `t^(2 gamma) ((Lxx - Lyy)^2 + 4 Lxy^2)`, the squared normalized
    /// principal-curvature difference.
    #[default]
    CurvatureDifference,
    /// `t^(4 gamma) (Lpp^2 - Lqq^2)^2`, the squared normalized difference of
    /// squared principal curvatures.
    SquaredCurvatureDifference,
}

/// Evaluates the ridge-strength measure at every pixel of a jet.
pub fn ridge_strength(jet: &ScaleJet, gamma: f64, measure: RidgeMeasure) -> Field {
    let norm = jet.t.powf(2.0 * gamma);
    let lxx = jet.lxx.data();
    let lxy = jet.lxy.data();
    let lyy = jet.lyy.data();
    let data: Vec<f64> = match measure {
        RidgeMeasure::CurvatureDifference => lxx
            .par_iter()
            .zip(lxy.par_iter())
            .zip(lyy.par_iter())
            .map(|((&a, &b), &c)| {
                let d = a - c;
                norm * (d * d + 4.0 * b * b)
            })
            .collect(),
        RidgeMeasure::SquaredCurvatureDifference => {
            // (lp^2 - lq^2)^2 = (lp + lq)^2 (lp - lq)^2
            let norm = norm * norm;
            lxx.par_iter()
                .zip(lxy.par_iter())
                .zip(lyy.par_iter())
                .map(|((&a, &b), &c)| {
                    let d = a - c;
                    let s = a + c;
                    norm * s * s * (d * d + 4.0 * b * b)
                })
                .collect()
        }
    };
    Field::from_vec(jet.width(), jet.height(), data).expect("jet fields share dimensions")
}

/// Eigen-decomposition of a symmetric 2x2 Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Principal {
    /// Smaller (most negative) eigenvalue.
    pub lp: f64,
    /// Larger eigenvalue.
    pub lq: f64,
    /// Unit eigenvector of `lp`.
    pub dir_p: [f64; 2],
}

impl Principal {
    pub fn of(lxx: f64, lxy: f64, lyy: f64) -> Self {
        let mean = 0.5 * (lxx + lyy);
        let half_diff = 0.5 * (lxx - lyy);
        let rad = (half_diff * half_diff + lxy * lxy).sqrt();
        // half-angle of the lq eigendirection; the lp direction is orthogonal
        let theta = 0.5 * (2.0 * lxy).atan2(lxx - lyy);
        let (s, c) = theta.sin_cos();
        Self {
            lp: mean - rad,
            lq: mean + rad,
            dir_p: [-s, c],
        }
    }

    /// Criterion 1: bright ridge, with `|lp|` strictly dominating `|lq|`.
    pub fn is_ridge_like(&self) -> bool {
        let ap = self.lp.abs();
        self.lp < 0.0 && ap - self.lq.abs() > DEGENERACY_EPS * ap
    }
}

/// A scale-space ridge point; serialized as `[x, y, k, strength]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(u32, u32, u32, f64)", into = "(u32, u32, u32, f64)")]
pub struct RidgePoint {
    pub x: u32,
    pub y: u32,
    pub k: u32,
    pub strength: f64,
}

impl From<(u32, u32, u32, f64)> for RidgePoint {
    fn from((x, y, k, strength): (u32, u32, u32, f64)) -> Self {
        Self { x, y, k, strength }
    }
}

impl From<RidgePoint> for (u32, u32, u32, f64) {
    fn from(p: RidgePoint) -> Self {
        (p.x, p.y, p.k, p.strength)
    }
}

impl RidgePoint {
    /// Lexicographic `(k, y, x)` key, the canonical storage order.
    pub fn key(&self) -> (u32, u32, u32) {
        (self.k, self.y, self.x)
    }
}

/// The sparse `(height, width, scales)` volume of ridge points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeVolume {
    /// `[height, width, number of scales]`.
    pub dims: [usize; 3],
    /// Points in ascending `(k, y, x)` order.
    pub points: Vec<RidgePoint>,
}

impl RidgeVolume {
    pub fn empty(height: usize, width: usize, scales: usize) -> Self {
        Self {
            dims: [height, width, scales],
            points: Vec::new(),
        }
    }

    /// Builds a volume, sorting points and rejecting out-of-range, duplicate
    /// or non-positive entries.
    pub fn new(dims: [usize; 3], mut points: Vec<RidgePoint>) -> Result<Self> {
        let [h, w, k] = dims;
        for p in &points {
            if p.y as usize >= h || p.x as usize >= w || p.k as usize >= k {
                return Err(Error::InvalidInput(format!(
                    "ridge point ({}, {}, {}) lies outside dims {:?}",
                    p.x, p.y, p.k, dims
                )));
            }
            if !(p.strength > 0.0 && p.strength.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "ridge point ({}, {}, {}) has strength {}",
                    p.x, p.y, p.k, p.strength
                )));
            }
        }
        points.sort_by_key(RidgePoint::key);
        if points.windows(2).any(|w| w[0].key() == w[1].key()) {
            return Err(Error::InvalidInput("duplicate ridge point".into()));
        }
        Ok(Self { dims, points })
    }

    pub fn height(&self) -> usize {
        self.dims[0]
    }

    pub fn width(&self) -> usize {
        self.dims[1]
    }

    pub fn num_scales(&self) -> usize {
        self.dims[2]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fraction of the dense volume that is occupied.
    pub fn occupancy(&self) -> f64 {
        let total = self.dims.iter().product::<usize>();
        if total == 0 {
            0.0
        } else {
            self.points.len() as f64 / total as f64
        }
    }
}

/// Detection parameters other than the scale ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub rel_threshold: f64,
    pub measure: RidgeMeasure,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            rel_threshold: DEFAULT_REL_THRESHOLD,
            measure: RidgeMeasure::default(),
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_threshold >= 0.0 && self.rel_threshold < 1.0) {
            return Err(Error::param(
                "rel_threshold",
                format!("{} is outside [0, 1)", self.rel_threshold),
            ));
        }
        Ok(())
    }
}

/// Detection output together with the per-scale strength fields it was
/// derived from.
#[derive(Clone, Debug)]
pub struct RidgeDetection {
    pub volume: RidgeVolume,
    /// One strength field per scale, indexed like the scale ladder.
    pub strengths: Vec<Field>,
}

impl RidgeDetection {
    /// Re-checks the scale-maximum criterion for every emitted point against
    /// the stored strength fields; returns the offending points.
    pub fn audit_scale_maxima(&self) -> Vec<RidgePoint> {
        self.volume
            .points
            .iter()
            .filter(|p| {
                let (x, y, k) = (p.x as usize, p.y as usize, p.k as usize);
                k == 0
                    || k + 1 >= self.strengths.len()
                    || self.strengths[k].get(x, y) != p.strength
                    || !is_scale_maximum(
                        self.strengths[k - 1].get(x, y),
                        p.strength,
                        self.strengths[k + 1].get(x, y),
                    )
            })
            .copied()
            .collect()
    }
}

#[inline]
fn is_scale_maximum(below: f64, here: f64, above: f64) -> bool {
    here >= below && here >= above && (here > below || here > above)
}

/// Criterion 2 at pixel `(x, y)`: the derivative along `dir` has opposite
/// signs (or exactly one vanishes) at `+-0.5 dir`.
fn has_directional_zero_crossing(jet: &ScaleJet, x: usize, y: usize, dir: [f64; 2]) -> bool {
    let (cx, cy) = (x as f64, y as f64);
    let (dx, dy) = (0.5 * dir[0], 0.5 * dir[1]);
    let along = |px: f64, py: f64| jet.lx.sample_bilinear(px, py) * dir[0] + jet.ly.sample_bilinear(px, py) * dir[1];
    let ahead = along(cx + dx, cy + dy);
    let behind = along(cx - dx, cy - dy);
    ahead * behind < 0.0 || ((ahead == 0.0) != (behind == 0.0))
}

/// Strength field and the mask of pixels passing criteria 1 and 2.
fn analyse_scale(image: &GrayImage, t: f64, gamma: f64, measure: RidgeMeasure) -> Result<(Field, Vec<bool>)> {
    let jet = compute_jet(image, t)?;
    let strength = ridge_strength(&jet, gamma, measure);
    let (w, h) = (jet.width(), jet.height());
    let mut candidate = vec![false; w * h];
    candidate.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, c) in row.iter_mut().enumerate() {
            let pr = Principal::of(jet.lxx.get(x, y), jet.lxy.get(x, y), jet.lyy.get(x, y));
            *c = pr.is_ridge_like() && has_directional_zero_crossing(&jet, x, y, pr.dir_p);
        }
    });
    Ok((strength, candidate))
}

/// Runs the full detector and keeps the per-scale strength fields.
pub fn detect_ridges_with_fields(image: &GrayImage, spec: &ScaleSpec, params: &DetectParams) -> Result<RidgeDetection> {
    params.validate()?;
    if spec.len() < 3 {
        return Err(Error::param("scales", "need at least 3 scales"));
    }
    let per_scale: Vec<(Field, Vec<bool>)> = spec
        .scales()
        .par_iter()
        .map(|&t| analyse_scale(image, t, spec.gamma(), params.measure))
        .collect::<Result<_>>()?;

    let (w, h) = (image.width(), image.height());
    let nk = spec.len();
    let mut candidates = Vec::new();
    for k in 1..nk - 1 {
        let (below, here, above) = (&per_scale[k - 1].0, &per_scale[k].0, &per_scale[k + 1].0);
        let mask = &per_scale[k].1;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if !mask[i] {
                    continue;
                }
                let s = here.data()[i];
                if s > 0.0 && is_scale_maximum(below.data()[i], s, above.data()[i]) {
                    candidates.push(RidgePoint {
                        x: x as u32,
                        y: y as u32,
                        k: k as u32,
                        strength: s,
                    });
                }
            }
        }
    }

    let peak = candidates.iter().map(|p| p.strength).fold(0.0, f64::max);
    let floor = params.rel_threshold * peak;
    candidates.retain(|p| p.strength >= floor);

    Ok(RidgeDetection {
        volume: RidgeVolume {
            dims: [h, w, nk],
            points: candidates,
        },
        strengths: per_scale.into_iter().map(|(s, _)| s).collect(),
    })
}

/// Detects scale-space ridge points.
pub fn detect_ridges(image: &GrayImage, spec: &ScaleSpec, params: &DetectParams) -> Result<RidgeVolume> {
    detect_ridges_with_fields(image, spec, params).map(|d| d.volume)
}
