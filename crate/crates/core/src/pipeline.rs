//! Image to ridge prompts in one call.

use serde::{Deserialize, Serialize};

use crate::curves::{extract_curves, RidgeCurve};
use crate::error::Result;
use crate::image::GrayImage;
use crate::prompting::{allocate_prompts, PromptSet};
use crate::ridge::{detect_ridges, DetectParams, RidgeVolume};
use crate::scale_space::ScaleSpec;

/// Everything needed to turn an image into ridge prompts.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgePromptConfig {
    pub scales: ScaleSpec,
    pub detect: DetectParams,
    pub prompt_budget: usize,
    pub seed: u64,
}

impl Default for RidgePromptConfig {
    fn default() -> Self {
        Self {
            scales: ScaleSpec::default(),
            detect: DetectParams::default(),
            prompt_budget: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgePrompts {
    pub volume: RidgeVolume,
    pub curves: Vec<RidgeCurve>,
    pub prompts: PromptSet,
}

/// Detects ridges, groups them into curves and allocates prompts.
pub fn ridge_prompts(image: &GrayImage, config: &RidgePromptConfig) -> Result<RidgePrompts> {
    let volume = detect_ridges(image, &config.scales, &config.detect)?;
    let curves = extract_curves(&volume);
    let prompts = allocate_prompts(&curves, config.prompt_budget, config.seed)?;
    Ok(RidgePrompts {
        volume,
        curves,
        prompts,
    })
}
