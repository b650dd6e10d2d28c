//! Directory-level evaluation.
//!
//! Reference masks are `<ref_dir>/<stem>.png`. For each stem the prediction
//! is either
//!
//! * `<pred_dir>/<stem>/metadata.json`, a segmenter run listing one record
//!   per prompt (`point`, `mask`, `pred_iou`, `stability`, `kept`,
//!   `reject_reason`); the masks are re-filtered with the policy and unioned;
//! * or `<pred_dir>/<stem>.png`, a single mask used as-is.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{aggregate, evaluate, filter_masks, union_masks, EvalReport, FilterPolicy};
use crate::error::{Error, Result};
use crate::image::{BinaryMask, PixelPoint};

pub const METADATA_FILE: &str = "metadata.json";
pub const AGGREGATE_ROW: &str = "aggregate";

/// One prompt's outcome as written by the segmenter adapter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmenterRecord {
    pub point: PixelPoint,
    /// Mask PNG path, relative to the metadata file's directory.
    pub mask: String,
    pub pred_iou: f64,
    pub stability: f64,
    pub kept: bool,
    pub reject_reason: Option<String>,
}

pub fn read_segmenter_metadata(path: &Path) -> Result<Vec<SegmenterRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<SegmenterRecord> = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    for r in &records {
        for (name, v) in [("pred_iou", r.pred_iou), ("stability", r.stability)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "{}: {name} {v} of mask {} is outside [0, 1]",
                    path.display(),
                    r.mask
                )));
            }
        }
    }
    Ok(records)
}

/// Per-image segment counts and the fraction kept by the filter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub segments: usize,
    pub kept: usize,
    pub quality_rate: Option<f64>,
}

impl SegmentStats {
    fn new(segments: usize, kept: usize) -> Self {
        Self {
            segments,
            kept,
            quality_rate: (segments > 0).then(|| kept as f64 / segments as f64),
        }
    }
}

/// A resolved prediction for one image.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub mask: BinaryMask,
    /// Present when the prediction came from segmenter metadata.
    pub segments: Option<SegmentStats>,
}

fn mask_path(pred_dir: &Path, stem: &str) -> PathBuf {
    pred_dir.join(format!("{stem}.png"))
}

/// Resolves and loads the prediction for `stem`, or `None` if there is none.
pub fn load_prediction(
    pred_dir: &Path,
    stem: &str,
    width: usize,
    height: usize,
    policy: &FilterPolicy,
) -> Result<Option<Prediction>> {
    let meta = pred_dir.join(stem).join(METADATA_FILE);
    if meta.is_file() {
        let base = meta.parent().expect("metadata path has a parent");
        let records = read_segmenter_metadata(&meta)?;
        let masks: Vec<BinaryMask> = records
            .iter()
            .map(|r| {
                BinaryMask::load_png(&base.join(&r.mask)).map(|m| m.with_scores(Some(r.pred_iou), Some(r.stability)))
            })
            .collect::<Result<_>>()?;
        let outcome = filter_masks(&masks, policy)?;
        let kept = outcome.kept_indices();
        let mask = union_masks(width, height, kept.iter().map(|&i| &masks[i]))?;
        return Ok(Some(Prediction {
            mask,
            segments: Some(SegmentStats::new(records.len(), kept.len())),
        }));
    }
    let single = mask_path(pred_dir, stem);
    if single.is_file() {
        return Ok(Some(Prediction {
            mask: BinaryMask::load_png(&single)?,
            segments: None,
        }));
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRow {
    pub image: String,
    #[serde(flatten)]
    pub report: EvalReport,
    pub segments: Option<SegmentStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub rows: Vec<ImageRow>,
    pub aggregate: EvalReport,
    pub aggregate_segments: Option<SegmentStats>,
    /// Reference stems without a prediction; skipped.
    pub unmatched: Vec<String>,
}

fn png_stems(dir: &Path) -> Result<Vec<String>> {
    let mut stems = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_owned());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

/// Scores every reference mask in `ref_dir` against its prediction in
/// `pred_dir`.
pub fn evaluate_dirs(pred_dir: &Path, ref_dir: &Path, policy: &FilterPolicy) -> Result<BatchReport> {
    policy.validate()?;
    let stems = png_stems(ref_dir)?;
    if stems.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no reference masks in {}",
            ref_dir.display()
        )));
    }
    let results: Vec<(String, Option<ImageRow>)> = stems
        .into_par_iter()
        .map(|stem| {
            let reference = BinaryMask::load_png(&mask_path(ref_dir, &stem))?;
            let row = load_prediction(pred_dir, &stem, reference.width(), reference.height(), policy)?
                .map(|pred| -> Result<ImageRow> {
                    Ok(ImageRow {
                        image: stem.clone(),
                        report: evaluate(&pred.mask, &reference)?,
                        segments: pred.segments,
                    })
                })
                .transpose()?;
            Ok((stem, row))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut unmatched = Vec::new();
    for (stem, row) in results {
        match row {
            Some(r) => rows.push(r),
            None => {
                log::warn!("no prediction for reference mask `{stem}`; skipped");
                unmatched.push(stem);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "none of the reference masks in {} has a prediction in {}",
            ref_dir.display(),
            pred_dir.display()
        )));
    }
    let aggregate_segments = {
        let with: Vec<&SegmentStats> = rows.iter().filter_map(|r| r.segments.as_ref()).collect();
        (!with.is_empty())
            .then(|| SegmentStats::new(with.iter().map(|s| s.segments).sum(), with.iter().map(|s| s.kept).sum()))
    };
    Ok(BatchReport {
        aggregate: aggregate(rows.iter().map(|r| &r.report)),
        rows,
        aggregate_segments,
        unmatched,
    })
}

impl BatchReport {
    /// One row per image plus a final aggregate row; undefined values are
    /// empty cells.
    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "image",
            "tp",
            "fp",
            "tn",
            "fn",
            "tpr",
            "fpr",
            "iou",
            "segments",
            "kept",
            "quality_rate",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row = |name: &str, r: &EvalReport, s: Option<&SegmentStats>| {
            w.write_record([
                name.to_owned(),
                r.counts.tp.to_string(),
                r.counts.fp.to_string(),
                r.counts.tn.to_string(),
                r.counts.fn_.to_string(),
                opt(r.tpr),
                opt(r.fpr),
                opt(r.iou),
                s.map(|s| s.segments.to_string()).unwrap_or_default(),
                s.map(|s| s.kept.to_string()).unwrap_or_default(),
                opt(s.and_then(|s| s.quality_rate)),
            ])
        };
        for r in &self.rows {
            row(&r.image, &r.report, r.segments.as_ref())?;
        }
        row(AGGREGATE_ROW, &self.aggregate, self.aggregate_segments.as_ref())?;
        w.flush()?;
        Ok(())
    }
}
