//! TOML run configuration. Relative paths resolve against the directory of
//! the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use pltune_core::harness::GridSpec;
use pltune_core::synth::{DetectorProfile, WorldConfig};
use pltune_core::threshold::{Beta, BetaSettings, SelectionMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Single,
    Dual,
}

impl Mode {
    pub fn selection(self) -> SelectionMode {
        match self {
            Mode::Single => SelectionMode::Single,
            Mode::Dual => SelectionMode::Dual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    PerClass,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorName {
    #[default]
    PseudoQuality,
}

impl EvaluatorName {
    pub fn as_str(self) -> &'static str {
        match self {
            EvaluatorName::PseudoQuality => "pseudo_quality",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationPair {
    /// Annotation of the validation images for the classes being tuned.
    pub gt: String,
    /// Teacher predictions on those images.
    pub detections: String,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub bundle: Option<String>,
    /// Teacher predictions for each bundle dataset, in bundle order.
    #[serde(default)]
    pub detections: Vec<String>,
    #[serde(default)]
    pub validation: Vec<ValidationPair>,
}

fn default_iou() -> f64 {
    0.5
}

fn default_detector() -> String {
    "teacher".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub mode: Option<Mode>,
    pub beta: Option<f64>,
    pub beta_high: Option<f64>,
    pub beta_low: Option<f64>,
    #[serde(default = "default_iou")]
    pub iou_threshold: f64,
    /// Label-ratio table; estimated from the bundle when absent.
    pub ratios: Option<String>,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default)]
    pub emit_background: bool,
    #[serde(default = "default_detector")]
    pub detector: String,
}

impl Default for MethodSection {
    fn default() -> Self {
        Self {
            mode: None,
            beta: None,
            beta_high: None,
            beta_low: None,
            iou_threshold: default_iou(),
            ratios: None,
            scope: Scope::default(),
            emit_background: false,
            detector: default_detector(),
        }
    }
}

impl MethodSection {
    /// Betas for `mode`, standard values where not configured.
    pub fn betas(&self, mode: Mode) -> Result<BetaSettings> {
        let get = |v: Option<f64>, default: Beta, field: &str| match v {
            None => Ok(default),
            Some(b) => Beta::new(b).with_context(|| format!("method.{field}")),
        };
        Ok(match mode {
            Mode::Single => {
                if self.beta_high.is_some() || self.beta_low.is_some() {
                    bail!("method.beta_high: only valid in dual mode");
                }
                BetaSettings::Single(get(self.beta, Beta::ONE, "beta")?)
            }
            Mode::Dual => {
                if self.beta.is_some() {
                    bail!("method.beta: only valid in single mode; use beta_high and beta_low");
                }
                BetaSettings::Dual {
                    high: get(self.beta_high, Beta::HALF, "beta_high")?,
                    low: get(self.beta_low, Beta::TWO, "beta_low")?,
                }
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub mode: Option<Mode>,
    /// Single-mode pool; defaults to 0.2, 0.3, ..., 0.9, 1.
    pub candidates: Option<Vec<f64>>,
    /// Dual-mode pairs `[tau_h, tau_l]`.
    pub pairs: Option<Vec<[f64; 2]>>,
    /// Dual-mode pool expanded to all ordered pairs.
    pub pool: Option<Vec<f64>>,
    #[serde(default)]
    pub evaluator: EvaluatorName,
}

impl GridSection {
    pub fn spec(&self) -> Result<GridSpec> {
        let spec = match self.mode.unwrap_or(Mode::Single) {
            Mode::Single => {
                if self.pairs.is_some() || self.pool.is_some() {
                    bail!("grid.pairs: pairs and pool need mode = \"dual\"");
                }
                match &self.candidates {
                    Some(c) => GridSpec::Single(c.clone()),
                    None => GridSpec::standard_single(),
                }
            }
            Mode::Dual => match (&self.pairs, &self.pool, &self.candidates) {
                (_, _, Some(_)) => bail!("grid.candidates: use pairs or pool in dual mode"),
                (Some(_), Some(_), _) => bail!("grid.pool: give either pairs or pool"),
                (Some(p), None, _) => GridSpec::Dual(p.iter().map(|&[h, l]| (h, l)).collect()),
                (None, Some(pool), _) => GridSpec::dual_from_pool(pool),
                (None, None, _) => GridSpec::standard_dual(),
            },
        };
        spec.validate().context("grid")?;
        Ok(spec)
    }
}

fn default_splits() -> usize {
    2
}

fn default_validation_images() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSection {
    pub n_images: Option<usize>,
    pub n_classes: Option<usize>,
    pub objects_mean: Option<f64>,
    pub objects_dispersion: Option<f64>,
    pub image_width: Option<u32>,
    pub image_height: Option<u32>,
    pub box_min: Option<f64>,
    pub box_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    #[serde(default = "default_splits")]
    pub n_splits: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub recall_rate: Option<f64>,
    pub fp_per_image: Option<f64>,
    pub tp_score: Option<[f64; 2]>,
    pub fp_score: Option<[f64; 2]>,
    pub localization_jitter: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthValidationSection {
    #[serde(default = "default_validation_images")]
    pub n_images: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub world: Option<WorldSection>,
    pub partition: Option<PartitionSection>,
    pub detector: Option<DetectorSection>,
    pub validation: Option<SynthValidationSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<String>,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub method: MethodSection,
    #[serde(default)]
    pub grid: GridSection,
    pub synth: Option<SynthSection>,
}

/// Seed offsets keep the synthetic stages on unrelated random streams.
pub mod seeds {
    pub const WORLD: u64 = 0;
    pub const PARTITION: u64 = 1;
    pub const VALIDATION_WORLD: u64 = 2;
    pub const VALIDATION_DETECTIONS: u64 = 3;
    /// Plus the dataset index.
    pub const DETECTIONS: u64 = 16;
}

/// A parsed config together with its location and raw bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    pub config: RunConfig,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let text = std::str::from_utf8(&bytes)
            .with_context(|| format!("{}: not UTF-8", path.display()))?;
        let config: RunConfig =
            toml::from_str(text).with_context(|| format!("{}: invalid config", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            bytes,
            config,
        })
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.path.parent().unwrap_or(Path::new("")).join(rel)
    }

    pub fn seed(&self, offset: u64) -> u64 {
        self.config.seed.wrapping_add(offset)
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        match (flag, &self.config.output_dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(d)) => self.resolve(d),
            (None, None) => PathBuf::from("."),
        }
    }

    pub fn bundle_path(&self) -> Result<PathBuf> {
        match &self.config.inputs.bundle {
            Some(b) => Ok(self.resolve(b)),
            None => bail!("{}: inputs.bundle: required", self.path.display()),
        }
    }

    pub fn detection_paths(&self) -> Vec<PathBuf> {
        self.config
            .inputs
            .detections
            .iter()
            .map(|d| self.resolve(d))
            .collect()
    }

    fn synth(&self) -> Option<&SynthSection> {
        self.config.synth.as_ref()
    }

    pub fn world_config(&self) -> Result<WorldConfig> {
        let d = WorldConfig::default();
        let w = self.synth().and_then(|s| s.world.as_ref());
        let c = match w {
            None => WorldConfig {
                seed: self.seed(seeds::WORLD),
                ..d
            },
            Some(w) => WorldConfig {
                n_images: w.n_images.unwrap_or(d.n_images),
                n_classes: w.n_classes.unwrap_or(d.n_classes),
                objects_mean: w.objects_mean.unwrap_or(d.objects_mean),
                objects_dispersion: w.objects_dispersion.unwrap_or(d.objects_dispersion),
                image_width: w.image_width.unwrap_or(d.image_width),
                image_height: w.image_height.unwrap_or(d.image_height),
                box_min: w.box_min.unwrap_or(d.box_min),
                box_max: w.box_max.unwrap_or(d.box_max),
                seed: self.seed(seeds::WORLD),
            },
        };
        c.validate().context("synth.world")?;
        Ok(c)
    }

    pub fn n_splits(&self) -> usize {
        self.synth()
            .and_then(|s| s.partition.as_ref())
            .map_or(default_splits(), |p| p.n_splits)
    }

    pub fn validation_images(&self) -> usize {
        self.synth()
            .and_then(|s| s.validation.as_ref())
            .map_or(default_validation_images(), |v| v.n_images)
    }

    pub fn detector_profile(&self) -> Result<DetectorProfile> {
        let d = DetectorProfile::default();
        let p = match self.synth().and_then(|s| s.detector.as_ref()) {
            None => d,
            Some(s) => DetectorProfile {
                recall_rate: s.recall_rate.unwrap_or(d.recall_rate),
                fp_per_image: s.fp_per_image.unwrap_or(d.fp_per_image),
                tp_score: s.tp_score.map_or(d.tp_score, |[a, b]| (a, b)),
                fp_score: s.fp_score.map_or(d.fp_score, |[a, b]| (a, b)),
                localization_jitter: s.localization_jitter.unwrap_or(d.localization_jitter),
            },
        };
        p.validate().context("synth.detector")?;
        Ok(p)
    }

    /// Schema-level checks plus existence of every referenced input file.
    /// Returns one message per problem.
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut push = |r: Result<()>| {
            if let Err(e) = r {
                problems.push(format!("{e:#}"));
            }
        };
        let m = &self.config.method;
        if let Some(mode) = m.mode {
            push(m.betas(mode).map(|_| ()));
        } else if m.beta.is_some() && (m.beta_high.is_some() || m.beta_low.is_some()) {
            push(Err(anyhow::anyhow!(
                "method.beta: cannot be combined with beta_high/beta_low"
            )));
        }
        if !(m.iou_threshold > 0.0 && m.iou_threshold <= 1.0) {
            push(Err(anyhow::anyhow!(
                "method.iou_threshold: must lie in (0, 1]"
            )));
        }
        push(self.config.grid.spec().map(|_| ()));
        if self.config.synth.is_some() {
            push(self.world_config().map(|_| ()));
            push(self.detector_profile().map(|_| ()));
            if self.n_splits() < 2 {
                push(Err(anyhow::anyhow!(
                    "synth.partition.n_splits: must be at least 2"
                )));
            }
        }
        let inputs = &self.config.inputs;
        let mut paths: Vec<(String, &str)> = Vec::new();
        if let Some(b) = &inputs.bundle {
            paths.push(("inputs.bundle".into(), b));
        }
        for (i, d) in inputs.detections.iter().enumerate() {
            paths.push((format!("inputs.detections[{i}]"), d));
        }
        for (i, v) in inputs.validation.iter().enumerate() {
            paths.push((format!("inputs.validation[{i}].gt"), &v.gt));
            paths.push((format!("inputs.validation[{i}].detections"), &v.detections));
        }
        if let Some(r) = &m.ratios {
            paths.push(("method.ratios".into(), r));
        }
        for (field, rel) in paths {
            let p = self.resolve(rel);
            if !p.is_file() {
                problems.push(format!("{field}: file not found: {}", p.display()));
            }
        }
        problems
    }
}
