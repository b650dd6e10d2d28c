//! The `ridgeprompt` command line.
//!
//! Exit codes: 0 on success, 2 for invalid parameters, 3 for I/O or input
//! data failures.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::curves::{extract_curves, RidgeCurve};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_dirs, BatchReport, FilterPolicy};
use crate::image::{load_gray, GrayImage};
use crate::prompting::{allocate_prompts, grid_prompts, random_prompts, PromptSet};
use crate::ridge::{detect_ridges_with_fields, DetectParams, RidgeDetection, RidgeMeasure, RidgeVolume};
use crate::scale_space::{ScaleSpec, DEFAULT_GAMMA, DEFAULT_NUM_SCALES, DEFAULT_RATIO, DEFAULT_T_MIN};
use crate::synth::{synth_image, SynthSpec};
use crate::viz;

pub const EXIT_INVALID_PARAMETER: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ridgeprompt",
    version,
    about = "Multi-scale ridge point prompts for promptable segmenters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect scale-space ridges and connected ridge curves.
    Detect(DetectCmd),
    /// Generate point prompts (ridge, grid or random).
    Prompts(PromptsCmd),
    /// Generate uniform grid prompts.
    Grid(GridCmd),
    /// Render a synthetic ridge image with ground truth.
    Synth(SynthCmd),
    /// Score predicted masks against reference masks.
    Eval(EvalCmd),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Input PNG files or directories of PNGs.
    #[arg(long = "input", short = 'i', required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Images processed in parallel (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Also write display PNGs.
    #[arg(long)]
    pub viz: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// Explicit comma-separated scale ladder (variances, px^2); overrides
    /// --t-min/--scale-ratio/--num-scales.
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_T_MIN)]
    pub t_min: f64,
    #[arg(long, default_value_t = DEFAULT_RATIO)]
    pub scale_ratio: f64,
    #[arg(long, default_value_t = DEFAULT_NUM_SCALES)]
    pub num_scales: usize,
    /// Scale-normalization exponent.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Use the squared difference of squared principal curvatures.
    #[arg(long)]
    pub squared_difference: bool,
    /// Noise floor relative to the strongest ridge point.
    #[arg(long, default_value_t = crate::ridge::DEFAULT_REL_THRESHOLD)]
    pub rel_threshold: f64,
    /// Detect dark valleys instead of bright ridges.
    #[arg(long)]
    pub invert: bool,
}

impl DetectArgs {
    fn scale_spec(&self) -> Result<ScaleSpec> {
        match &self.scales {
            Some(s) => ScaleSpec::new(s.clone(), self.gamma),
            None => ScaleSpec::geometric(self.t_min, self.scale_ratio, self.num_scales, self.gamma),
        }
    }

    fn params(&self) -> DetectParams {
        DetectParams {
            rel_threshold: self.rel_threshold,
            measure: if self.squared_difference {
                RidgeMeasure::SquaredCurvatureDifference
            } else {
                RidgeMeasure::CurvatureDifference
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DetectCmd {
    #[command(flatten)]
    pub io: InputArgs,
    #[command(flatten)]
    pub detect: DetectArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Ridge,
    Grid,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct PromptsCmd {
    #[command(flatten)]
    pub io: InputArgs,
    #[command(flatten)]
    pub detect: DetectArgs,
    #[arg(long, value_enum, default_value_t = PromptMode::Ridge)]
    pub mode: PromptMode,
    /// Number of prompts for ridge and random modes.
    #[arg(long, default_value_t = 64)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cells per side in grid mode.
    #[arg(long, default_value_t = 8)]
    pub grid_side: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GridCmd {
    #[command(flatten)]
    pub io: InputArgs,
    /// Cells per side; the grid has grid_side^2 points.
    #[arg(long, default_value_t = 8)]
    pub grid_side: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SynthCmd {
    /// Synthetic image description (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Base name of the written files.
    #[arg(long, default_value = "synth")]
    pub name: String,
}

#[derive(Debug, Clone, Args)]
pub struct EvalCmd {
    /// Predictions: `<stem>.png` masks or `<stem>/metadata.json` segmenter runs.
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference masks `<stem>.png`.
    #[arg(long = "reference", alias = "ref")]
    pub reference: PathBuf,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.6)]
    pub pred_iou_thresh: f64,
    #[arg(long, default_value_t = 0.8)]
    pub stability_thresh: f64,
    #[arg(long, default_value_t = 0.25)]
    pub max_area_fraction: f64,
}

impl EvalCmd {
    fn policy(&self) -> FilterPolicy {
        FilterPolicy {
            pred_iou_thresh: self.pred_iou_thresh,
            stability_thresh: self.stability_thresh,
            max_area_fraction: self.max_area_fraction,
        }
    }
}

/// Fully resolved settings, echoed into every JSON output.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<RidgeMeasure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invert: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<PromptMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_side: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pred_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl RunConfig {
    fn with_detection(mut self, spec: &ScaleSpec, params: &DetectParams, invert: bool) -> Self {
        self.scales = Some(spec.scales().to_vec());
        self.gamma = Some(spec.gamma());
        self.measure = Some(params.measure);
        self.rel_threshold = Some(params.rel_threshold);
        self.invert = Some(invert);
        self
    }
}

#[derive(Serialize)]
struct RidgeFile<'a> {
    #[serde(flatten)]
    volume: &'a RidgeVolume,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct CurvesFile<'a> {
    curves: &'a [RidgeCurve],
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct PromptFile<'a> {
    #[serde(flatten)]
    prompts: &'a PromptSet,
    width: usize,
    height: usize,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct EvalFile<'a> {
    #[serde(flatten)]
    report: &'a BatchReport,
    config: &'a RunConfig,
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Expands directories into their PNG files (sorted) and checks that output
/// stems are unique.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|e| Error::io(input, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.is_file()
                        && p.extension()
                            .and_then(|e| e.to_str())
                            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::param("input", "no PNG images found"));
    }
    let mut stems = HashSet::new();
    for f in &files {
        if !stems.insert(stem(f)) {
            return Err(Error::param(
                "input",
                format!("two inputs share the file stem `{}`", stem(f)),
            ));
        }
    }
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_owned())
}

/// Runs `job` on every input in a pool of `jobs` threads; returns the first
/// error after all inputs were attempted.
fn for_each_input(io: &InputArgs, job: impl Fn(&Path) -> Result<()> + Sync) -> Result<()> {
    let files = collect_inputs(&io.inputs)?;
    ensure_dir(&io.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(io.jobs)
        .build()
        .map_err(|e| Error::param("jobs", e.to_string()))?;
    let results: Vec<Result<()>> = pool.install(|| files.par_iter().map(|f| job(f)).collect());
    let mut first = None;
    for (file, r) in files.iter().zip(results) {
        if let Err(e) = r {
            log::error!("{}: {e}", file.display());
            first.get_or_insert(e);
        }
    }
    first.map_or(Ok(()), Err)
}

fn detect_one(image: &GrayImage, spec: &ScaleSpec, params: &DetectParams) -> Result<(RidgeDetection, Vec<RidgeCurve>)> {
    let det = detect_ridges_with_fields(image, spec, params)?;
    let curves = extract_curves(&det.volume);
    Ok((det, curves))
}

pub fn cmd_detect(cmd: &DetectCmd) -> Result<()> {
    let spec = cmd.detect.scale_spec()?;
    let params = cmd.detect.params();
    params.validate()?;
    for_each_input(&cmd.io, |path| {
        let image = load_gray(path, cmd.detect.invert)?;
        let (det, curves) = detect_one(&image, &spec, &params)?;
        let config = RunConfig {
            command: "detect",
            input: Some(path.to_path_buf()),
            output_dir: cmd.io.out.clone(),
            ..Default::default()
        }
        .with_detection(&spec, &params, cmd.detect.invert);
        let name = stem(path);
        write_json(
            &cmd.io.out.join(format!("{name}.ridges.json")),
            &RidgeFile {
                volume: &det.volume,
                config: &config,
            },
        )?;
        write_json(
            &cmd.io.out.join(format!("{name}.curves.json")),
            &CurvesFile {
                curves: &curves,
                config: &config,
            },
        )?;
        if cmd.io.viz {
            viz::strength_png(&det.strengths)
                .save(cmd.io.out.join(format!("{name}.strength.png")))
                .map_err(|source| Error::Image {
                    path: cmd.io.out.join(format!("{name}.strength.png")),
                    source,
                })?;
        }
        Ok(())
    })
}

pub fn cmd_prompts(cmd: &PromptsCmd) -> Result<()> {
    let spec = cmd.detect.scale_spec()?;
    let params = cmd.detect.params();
    params.validate()?;
    match cmd.mode {
        PromptMode::Ridge | PromptMode::Random if cmd.budget == 0 => {
            return Err(Error::param("prompt_budget", "must be at least 1"))
        }
        PromptMode::Grid if cmd.grid_side == 0 => return Err(Error::param("grid_side", "must be at least 1")),
        _ => {}
    }
    for_each_input(&cmd.io, |path| {
        let image = load_gray(path, cmd.detect.invert)?;
        let (w, h) = (image.width(), image.height());
        let mut config = RunConfig {
            command: "prompts",
            input: Some(path.to_path_buf()),
            mode: Some(cmd.mode),
            output_dir: cmd.io.out.clone(),
            ..Default::default()
        };
        let prompts = match cmd.mode {
            PromptMode::Ridge => {
                config = config.with_detection(&spec, &params, cmd.detect.invert);
                config.prompt_budget = Some(cmd.budget);
                config.seed = Some(cmd.seed);
                let (_, curves) = detect_one(&image, &spec, &params)?;
                let set = allocate_prompts(&curves, cmd.budget, cmd.seed)?;
                if set.is_empty() {
                    log::warn!("{}: no ridges detected, prompt set is empty", path.display());
                }
                set
            }
            PromptMode::Grid => {
                config.grid_side = Some(cmd.grid_side);
                grid_prompts(w, h, cmd.grid_side)?
            }
            PromptMode::Random => {
                config.prompt_budget = Some(cmd.budget);
                config.seed = Some(cmd.seed);
                random_prompts(w, h, cmd.budget, cmd.seed)?
            }
        };
        write_prompt_outputs(&cmd.io, path, &image, &prompts, &config, "prompts")
    })
}

fn write_prompt_outputs(
    io: &InputArgs,
    path: &Path,
    image: &GrayImage,
    prompts: &PromptSet,
    config: &RunConfig,
    suffix: &str,
) -> Result<()> {
    let name = stem(path);
    write_json(
        &io.out.join(format!("{name}.{suffix}.json")),
        &PromptFile {
            prompts,
            width: image.width(),
            height: image.height(),
            config,
        },
    )?;
    if io.viz {
        let out = io.out.join(format!("{name}.{suffix}.png"));
        viz::prompt_overlay(image, &prompts.points)
            .save(&out)
            .map_err(|source| Error::Image { path: out, source })?;
    }
    Ok(())
}

pub fn cmd_grid(cmd: &GridCmd) -> Result<()> {
    if cmd.grid_side == 0 {
        return Err(Error::param("grid_side", "must be at least 1"));
    }
    for_each_input(&cmd.io, |path| {
        let image = load_gray(path, false)?;
        let prompts = grid_prompts(image.width(), image.height(), cmd.grid_side)?;
        let config = RunConfig {
            command: "grid",
            input: Some(path.to_path_buf()),
            mode: Some(PromptMode::Grid),
            grid_side: Some(cmd.grid_side),
            output_dir: cmd.io.out.clone(),
            ..Default::default()
        };
        write_prompt_outputs(&cmd.io, path, &image, &prompts, &config, "grid")
    })
}

#[derive(Serialize)]
struct TruthFile<'a> {
    width: usize,
    height: usize,
    ridges: &'a [crate::synth::RidgeTruth],
    spec: &'a SynthSpec,
    config: &'a RunConfig,
}

pub fn cmd_synth(cmd: &SynthCmd) -> Result<()> {
    let text = std::fs::read_to_string(&cmd.spec).map_err(|e| Error::io(&cmd.spec, e))?;
    let spec: SynthSpec = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: cmd.spec.clone(),
        source,
    })?;
    let (image, truth) = synth_image(&spec)?;
    ensure_dir(&cmd.out)?;
    image.save_png(&cmd.out.join(format!("{}.png", cmd.name)))?;
    if let Some(mask) = &truth.mask {
        mask.save_png(&cmd.out.join(format!("{}.mask.png", cmd.name)))?;
    }
    let config = RunConfig {
        command: "synth",
        spec: Some(cmd.spec.clone()),
        seed: Some(spec.seed),
        output_dir: cmd.out.clone(),
        ..Default::default()
    };
    write_json(
        &cmd.out.join(format!("{}.truth.json", cmd.name)),
        &TruthFile {
            width: spec.width,
            height: spec.height,
            ridges: &truth.ridges,
            spec: &spec,
            config: &config,
        },
    )
}

pub fn cmd_eval(cmd: &EvalCmd) -> Result<()> {
    let policy = cmd.policy();
    policy.validate()?;
    let report = evaluate_dirs(&cmd.pred, &cmd.reference, &policy)?;
    ensure_dir(&cmd.out)?;
    let config = RunConfig {
        command: "eval",
        filter: Some(policy),
        pred_dir: Some(cmd.pred.clone()),
        reference_dir: Some(cmd.reference.clone()),
        output_dir: cmd.out.clone(),
        ..Default::default()
    };
    write_json(
        &cmd.out.join("report.json"),
        &EvalFile {
            report: &report,
            config: &config,
        },
    )?;
    let mut csv = Vec::new();
    report
        .write_csv(&mut csv)
        .map_err(|e| Error::io(cmd.out.join("report.csv"), std::io::Error::other(e)))?;
    write_atomic(&cmd.out.join("report.csv"), &csv)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Detect(c) => cmd_detect(c),
        Command::Prompts(c) => cmd_prompts(c),
        Command::Grid(c) => cmd_grid(c),
        Command::Synth(c) => cmd_synth(c),
        Command::Eval(c) => cmd_eval(c),
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter { .. } => EXIT_INVALID_PARAMETER,
        _ => EXIT_IO,
    }
}

/// Parses `std::env::args`, runs, and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
