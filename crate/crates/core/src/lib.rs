pub mod cli;
pub mod curves;
pub mod error;
pub mod evaluation;
pub mod image;
pub mod pipeline;
pub mod prompting;
pub mod ridge;
pub mod scale_space;
pub mod synth;
pub mod viz;

pub use crate::curves::{extract_curves, salience, RidgeCurve};
pub use crate::error::{Error, Result};
pub use crate::evaluation::{evaluate, filter_masks, segment_quality_rate, EvalReport, FilterPolicy};
pub use crate::image::{load_gray, BinaryMask, Field, GrayImage, PixelPoint};
pub use crate::pipeline::{ridge_prompts, RidgePromptConfig, RidgePrompts};
pub use crate::prompting::{allocate_prompts, grid_prompts, random_prompts, PromptSet, Provenance};
pub use crate::ridge::{
    detect_ridges, detect_ridges_with_fields, ridge_strength, DetectParams, RidgeMeasure, RidgePoint, RidgeVolume,
};
pub use crate::scale_space::{compute_jet, gaussian_smooth, ScaleJet, ScaleSpec};
pub use crate::synth::{synth_image, GroundTruth, RidgePath, SynthSpec};
