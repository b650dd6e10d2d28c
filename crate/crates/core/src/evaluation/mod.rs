//! Mask quality filtering and pixel-level scoring against reference masks.

mod batch;

pub use batch::{
    evaluate_dirs, load_prediction, read_segmenter_metadata, BatchReport, ImageRow, Prediction, SegmentStats,
    SegmenterRecord, AGGREGATE_ROW, METADATA_FILE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::BinaryMask;
use crate::prompting::PromptSet;

/// Thresholds a candidate mask must clear to be kept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub pred_iou_thresh: f64,
    pub stability_thresh: f64,
    /// Largest admissible mask area as a fraction of the image.
    pub max_area_fraction: f64,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            pred_iou_thresh: 0.6,
            stability_thresh: 0.8,
            max_area_fraction: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    PredIou,
    Stability,
    Area,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::PredIou => "pred_iou",
            RejectReason::Stability => "stability",
            RejectReason::Area => "area",
        }
    }
}

/// Verdict on one mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskDecision {
    pub kept: bool,
    /// First failing criterion, checked in the order pred_iou, stability,
    /// area.
    pub reason: Option<RejectReason>,
    /// The mask carried no predicted-quality score; that criterion passed.
    pub missing_pred_iou: bool,
    /// The mask carried no stability score; that criterion passed.
    pub missing_stability: bool,
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::param(name, format!("{v} is outside [0, 1]")))
            }
        };
        check("pred_iou_thresh", self.pred_iou_thresh)?;
        check("stability_thresh", self.stability_thresh)?;
        check("max_area_fraction", self.max_area_fraction)
    }

    pub fn decide(&self, mask: &BinaryMask) -> MaskDecision {
        let reason = if mask.pred_iou.is_some_and(|p| p < self.pred_iou_thresh) {
            Some(RejectReason::PredIou)
        } else if mask.stability.is_some_and(|s| s < self.stability_thresh) {
            Some(RejectReason::Stability)
        } else if mask.area_fraction() > self.max_area_fraction {
            Some(RejectReason::Area)
        } else {
            None
        };
        MaskDecision {
            kept: reason.is_none(),
            reason,
            missing_pred_iou: mask.pred_iou.is_none(),
            missing_stability: mask.stability.is_none(),
        }
    }
}

/// Result of filtering a list of masks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub decisions: Vec<MaskDecision>,
}

impl FilterOutcome {
    pub fn kept_indices(&self) -> Vec<usize> {
        self.decisions
            .iter()
            .enumerate()
            .filter(|(_, d)| d.kept)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn kept_count(&self) -> usize {
        self.decisions.iter().filter(|d| d.kept).count()
    }
}

/// Applies `policy` to every mask. All masks must share dimensions.
pub fn filter_masks(masks: &[BinaryMask], policy: &FilterPolicy) -> Result<FilterOutcome> {
    if let Some(first) = masks.first() {
        if let Some(bad) = masks.iter().find(|m| !m.same_dims(first)) {
            return Err(Error::InvalidInput(format!(
                "mask dimensions differ: {}x{} vs {}x{}",
                first.width(),
                first.height(),
                bad.width(),
                bad.height()
            )));
        }
    }
    Ok(FilterOutcome {
        decisions: masks.iter().map(|m| policy.decide(m)).collect(),
    })
}

/// Logical OR of the selected masks, or an empty mask of the given size.
pub fn union_masks<'a>(
    width: usize,
    height: usize,
    masks: impl IntoIterator<Item = &'a BinaryMask>,
) -> Result<BinaryMask> {
    let mut out = BinaryMask::empty(width, height);
    for m in masks {
        out.union_with(m)?;
    }
    Ok(out)
}

/// Pixelwise confusion counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn iou(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp + self.fn_)
    }

    /// Fraction of predicted pixels that are reference pixels.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }
}

impl std::ops::Add for Confusion {
    type Output = Confusion;

    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for Confusion {
    fn sum<I: Iterator<Item = Confusion>>(iter: I) -> Confusion {
        iter.fold(Confusion::default(), |a, b| a + b)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Counts plus the derived rates; undefined rates are `None` (JSON `null`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub counts: Confusion,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub iou: Option<f64>,
}

impl From<Confusion> for EvalReport {
    fn from(counts: Confusion) -> Self {
        Self {
            counts,
            tpr: counts.tpr(),
            fpr: counts.fpr(),
            iou: counts.iou(),
        }
    }
}

/// Pixelwise confusion counts of `prediction` against `reference`.
pub fn confusion(prediction: &BinaryMask, reference: &BinaryMask) -> Result<Confusion> {
    if !prediction.same_dims(reference) {
        return Err(Error::InvalidInput(format!(
            "prediction is {}x{}, reference is {}x{}",
            prediction.width(),
            prediction.height(),
            reference.width(),
            reference.height()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &r) in prediction.bits().iter().zip(reference.bits()) {
        match (p, r) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Scores a (union) prediction mask against a reference mask.
pub fn evaluate(prediction: &BinaryMask, reference: &BinaryMask) -> Result<EvalReport> {
    confusion(prediction, reference).map(EvalReport::from)
}

/// Rates from summed counts across images, not the mean of per-image rates.
pub fn aggregate<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> EvalReport {
    reports.into_iter().map(|r| r.counts).sum::<Confusion>().into()
}

/// Fraction of prompts whose candidate mask survives `policy`.
///
/// `masks[i]` is the candidate for prompt `i`; prompts beyond the end of
/// `masks` count as failing. Zero prompts give 0.
pub fn segment_quality_rate(prompts: &PromptSet, masks: &[BinaryMask], policy: &FilterPolicy) -> f64 {
    if prompts.is_empty() {
        return 0.0;
    }
    let kept = masks
        .iter()
        .take(prompts.len())
        .filter(|m| policy.decide(m).kept)
        .count();
    kept as f64 / prompts.len() as f64
}
