//! Point prompts: salience-proportional ridge prompts plus the uniform-grid
//! and uniform-random baselines.
//!
//! Randomness comes from xoshiro256++ seeded through SplitMix64 (the
//! reference seeding of the xoshiro family). Bounded integers are drawn by
//! rejection (`v % n` after discarding `v < 2^64 mod n`) and subsets by a
//! partial Fisher-Yates shuffle, so a seed reproduces the same prompts on any
//! platform.

use std::collections::{HashMap, HashSet};

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::curves::RidgeCurve;
use crate::error::{Error, Result};
use crate::image::PixelPoint;

/// Foreground label understood by point-prompted segmenters.
pub const FOREGROUND: u8 = 1;

/// Where a prompt came from: a ridge curve id or a baseline generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Curve(usize),
    Grid,
    Random,
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Provenance::Curve(id) => s.serialize_u64(*id as u64),
            Provenance::Grid => s.serialize_str("grid"),
            Provenance::Random => s.serialize_str("random"),
        }
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Provenance;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a curve id or \"grid\" / \"random\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Provenance, E> {
                Ok(Provenance::Curve(v as usize))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Provenance, E> {
                match v {
                    "grid" => Ok(Provenance::Grid),
                    "random" => Ok(Provenance::Random),
                    other => Err(E::unknown_variant(other, &["grid", "random"])),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// An ordered list of foreground point prompts.
///
/// The `points` / `labels` arrays have the shape point-prompted segmenters
/// ingest directly (`[[x, y], ...]` and `[1, ...]`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    pub points: Vec<PixelPoint>,
    pub labels: Vec<u8>,
    pub seed: Option<u64>,
    pub provenance: Vec<Provenance>,
}

impl PromptSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn push(&mut self, p: PixelPoint, prov: Provenance) {
        self.points.push(p);
        self.labels.push(FOREGROUND);
        self.provenance.push(prov);
    }

    /// Checks the structural invariants: parallel arrays, in-bounds points
    /// and no duplicates.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.labels.len() != self.points.len() || self.provenance.len() != self.points.len() {
            return Err(Error::InvalidInput("prompt arrays have different lengths".into()));
        }
        let mut seen = HashSet::with_capacity(self.points.len());
        for p in &self.points {
            if !p.in_bounds(width, height) {
                return Err(Error::InvalidInput(format!(
                    "prompt ({}, {}) outside {width}x{height}",
                    p.x, p.y
                )));
            }
            if !seen.insert(*p) {
                return Err(Error::InvalidInput(format!("duplicate prompt ({}, {})", p.x, p.y)));
            }
        }
        Ok(())
    }
}

/// The prompt generator's random stream.
#[derive(Clone, Debug)]
pub struct PromptRng {
    inner: Xoshiro256PlusPlus,
}

impl PromptRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n`; `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let reject_under = n.wrapping_neg() % n;
        loop {
            let v = self.next_u64();
            if v >= reject_under {
                return v % n;
            }
        }
    }

    /// `m` distinct indices drawn uniformly from `0..n`, in draw order.
    ///
    /// Partial Fisher-Yates over a virtual identity permutation; only
    /// displaced slots are stored.
    pub fn sample_indices(&mut self, n: usize, m: usize) -> Vec<usize> {
        debug_assert!(m <= n);
        let mut displaced: HashMap<usize, usize> = HashMap::new();
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let j = i + self.below((n - i) as u64) as usize;
            let at_j = *displaced.get(&j).unwrap_or(&j);
            let at_i = *displaced.get(&i).unwrap_or(&i);
            displaced.insert(j, at_i);
            out.push(at_j);
        }
        out
    }
}

/// Quota of each curve: `ceil(budget * salience / total salience)`.
pub fn quotas(saliences: &[f64], budget: usize) -> Vec<usize> {
    let total: f64 = saliences.iter().sum();
    saliences
        .iter()
        .map(|&a| {
            if total > 0.0 && a > 0.0 {
                (budget as f64 * a / total).ceil() as usize
            } else {
                0
            }
        })
        .collect()
}

/// Allocates up to `budget` prompts to ridge curves in proportion to their
/// salience.
///
/// Curves are visited from most to least salient (ties by id). Each draws
/// `min(quota, remaining budget, unused projected pixels)` pixels uniformly
/// without replacement. Budget left over by curves shorter than their quota
/// is then spent by one more sweep in the same order, so the output has
/// `min(budget, distinct projected pixels)` points.
pub fn allocate_prompts(curves: &[RidgeCurve], budget: usize, seed: u64) -> Result<PromptSet> {
    if budget == 0 {
        return Err(Error::param("prompt_budget", "must be at least 1"));
    }
    let mut order: Vec<&RidgeCurve> = curves.iter().collect();
    order.sort_by(|a, b| b.salience.total_cmp(&a.salience).then(a.id.cmp(&b.id)));
    let saliences: Vec<f64> = order.iter().map(|c| c.salience).collect();
    let quota = quotas(&saliences, budget);

    let mut rng = PromptRng::new(seed);
    let mut out = PromptSet {
        seed: Some(seed),
        ..Default::default()
    };
    let mut used: HashSet<PixelPoint> = HashSet::new();
    let caps = quota
        .into_iter()
        .map(Some)
        .chain(std::iter::repeat_n(None, order.len()));
    for (curve, cap) in order.iter().cycle().zip(caps) {
        let remaining = budget - out.len();
        if remaining == 0 {
            break;
        }
        // distinct curves may still project onto a shared pixel at
        // non-adjacent scales
        let pool: Vec<PixelPoint> = curve.projected.iter().filter(|p| !used.contains(*p)).copied().collect();
        let take = cap.unwrap_or(usize::MAX).min(remaining).min(pool.len());
        for i in rng.sample_indices(pool.len(), take) {
            used.insert(pool[i]);
            out.push(pool[i], Provenance::Curve(curve.id));
        }
    }
    Ok(out)
}

/// `n x n` prompts at grid-cell centers,
/// `x_i = floor((i + 1/2) width / n)`, `y_j = floor((j + 1/2) height / n)`,
/// in row-major order.
pub fn grid_prompts(width: usize, height: usize, n: usize) -> Result<PromptSet> {
    if n == 0 {
        return Err(Error::param("grid_side", "must be at least 1"));
    }
    if n * n > width * height {
        return Err(Error::param(
            "grid_side",
            format!("{n}x{n} grid exceeds the {width}x{height} pixel count"),
        ));
    }
    if n > width || n > height {
        return Err(Error::param(
            "grid_side",
            format!("{n} cells per side do not fit distinct pixels in {width}x{height}"),
        ));
    }
    let center = |i: usize, extent: usize| ((2 * i + 1) * extent / (2 * n)) as u32;
    let mut out = PromptSet::default();
    for j in 0..n {
        for i in 0..n {
            out.push(PixelPoint::new(center(i, width), center(j, height)), Provenance::Grid);
        }
    }
    Ok(out)
}

/// `budget` distinct pixels drawn uniformly over the image.
pub fn random_prompts(width: usize, height: usize, budget: usize, seed: u64) -> Result<PromptSet> {
    let total = width * height;
    if budget == 0 {
        return Err(Error::param("prompt_budget", "must be at least 1"));
    }
    if budget > total {
        return Err(Error::param(
            "prompt_budget",
            format!("{budget} exceeds the {total} pixels of a {width}x{height} image"),
        ));
    }
    let mut rng = PromptRng::new(seed);
    let mut out = PromptSet {
        seed: Some(seed),
        ..Default::default()
    };
    for idx in rng.sample_indices(total, budget) {
        out.push(
            PixelPoint::new((idx % width) as u32, (idx / width) as u32),
            Provenance::Random,
        );
    }
    Ok(out)
}
