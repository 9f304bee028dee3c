//! Declarative run configuration (TOML) with environment overrides.
//!
//! Precedence, lowest first: built-in defaults, the config file, `DEVDIET__SECTION__KEY`
//! environment variables, then `section.key=value` overrides from the command line.

use std::path::{Path, PathBuf};

use devdiet_nn::{BackboneKind, EncoderConfig, HeadKind, Preset};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corruptions::{parse_severities, parse_types, CorruptionType};
use crate::error::{Error, Result};
use crate::eval::ProbeConfig;
use crate::schedule::{build_by_name, build_combdiet_plan, BaselineKind, DietSchedule, LearnerKind, TrainingPlan, DIET_NAMES};
use crate::ssl::{Aggregation, TrainConfig};

pub const ENV_PREFIX: &str = "DEVDIET__";

/// Diet names accepted in `diet.name`, besides the single-curriculum ones.
pub const PLAN_NAMES: [&str; 2] = ["combdiet", "std"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DietSection {
    /// `cdiet`, `adiet`, `tdiet`, `catdiet`, `combdiet` or `std`.
    pub name: String,
    /// JSON schedule file; replaces the named curriculum when set.
    pub schedule_file: Option<PathBuf>,
    pub baseline: String,
    /// Temporal positives; defaults to on for tdiet, catdiet and combdiet.
    pub tdiet: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub learner: String,
    pub backbone: String,
    pub preset: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: u32,
    pub batch_size: usize,
    pub frames_per_clip: usize,
    pub window: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_epochs: Option<u32>,
    pub aggregation: String,
    pub checkpoint_every: u32,
    pub fim_batches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Benchmark root written by `devdiet synth`.
    pub root: PathBuf,
    pub resolution: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub corruptions: String,
    pub severities: String,
    pub probe_epochs: usize,
    pub probe_lr: f64,
    /// Error table used for mCE normalization; the bundled reference when unset.
    pub baseline_table: Option<PathBuf>,
    /// Fit a depth probe per stored checkpoint.
    pub depth_curve: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    pub output_root: PathBuf,
    pub diet: DietSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub data: DataSection,
    pub eval: EvalSection,
}

impl Default for DietSection {
    fn default() -> Self {
        Self { name: "catdiet".into(), schedule_file: None, baseline: "none".into(), tdiet: None }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { learner: "contrastive".into(), backbone: "residual_conv".into(), preset: "desk".into() }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            frames_per_clip: 10,
            window: 1,
            lr: 5e-4,
            weight_decay: 1e-4,
            warmup_epochs: None,
            aggregation: "mean_of_logs".into(),
            checkpoint_every: 5,
            fim_batches: 8,
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        Self { root: PathBuf::from("data"), resolution: 64 }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            corruptions: "all".into(),
            severities: "1-5".into(),
            probe_epochs: 50,
            probe_lr: 1e-3,
            baseline_table: None,
            depth_curve: false,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            seed: 0,
            output_root: PathBuf::from("runs"),
            diet: DietSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            data: DataSection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Everything a run needs, resolved from a valid config.
#[derive(Clone, Debug)]
pub struct ResolvedRun {
    pub plan: TrainingPlan,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub probe: ProbeConfig,
    pub corruption_types: Vec<CorruptionType>,
    pub severities: Vec<u8>,
}

fn parse_backbone(s: &str) -> Option<BackboneKind> {
    match s.to_ascii_lowercase().as_str() {
        "residual_conv" | "resnet" => Some(BackboneKind::ResidualConv),
        "patch_attention" | "vit" => Some(BackboneKind::PatchAttention),
        _ => None,
    }
}

fn parse_preset(s: &str) -> Option<Preset> {
    match s.to_ascii_lowercase().as_str() {
        "desk" => Some(Preset::Desk),
        "paper" => Some(Preset::Paper),
        _ => None,
    }
}

fn parse_aggregation(s: &str) -> Option<Aggregation> {
    match s {
        "mean_of_logs" => Some(Aggregation::MeanOfLogs),
        "log_of_mean" => Some(Aggregation::LogOfMean),
        _ => None,
    }
}

/// Converts an override string to the most specific TOML scalar it parses as.
fn scalar(text: &str) -> toml::Value {
    if let Ok(i) = text.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = text.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = text.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(text.to_string())
    }
}

fn set_path(root: &mut toml::Table, path: &[&str], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().ok_or_else(|| Error::Config(vec!["empty override key".into()]))?;
    let mut table = root;
    for p in parents {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(vec![format!("override path `{}` crosses a scalar", path.join("."))]))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses `text` and applies `overrides` (`(dotted.key, value)` pairs).
    pub fn from_toml_with(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        for (key, value) in overrides {
            let path: Vec<&str> = key.split('.').collect();
            set_path(&mut table, &path, scalar(value))?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Reads a config file, then applies environment and command-line overrides.
    pub fn load(path: Option<&Path>, cli_overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        let mut overrides = env_overrides(std::env::vars());
        overrides.extend_from_slice(cli_overrides);
        Self::from_toml_with(&text, &overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hash of every setting that affects results (the name and output root excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.name = String::new();
        c.output_root = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let diet = self.diet.name.to_ascii_lowercase();
        if self.diet.schedule_file.is_none() && !DIET_NAMES.contains(&diet.as_str()) && !PLAN_NAMES.contains(&diet.as_str()) {
            errs.push(format!(
                "diet.name: unknown diet `{}`; valid names: {}, {}",
                self.diet.name,
                DIET_NAMES.join(", "),
                PLAN_NAMES.join(", ")
            ));
        }
        if let Err(e) = self.diet.baseline.parse::<BaselineKind>() {
            errs.push(format!("diet.baseline: {e}"));
        }
        if (diet == "std" || diet == "combdiet") && self.diet.baseline.to_ascii_lowercase() != "none" {
            errs.push(format!("diet.baseline: `{}` cannot be combined with diet `{diet}`", self.diet.baseline));
        }
        if let Err(e) = self.model.learner.parse::<LearnerKind>() {
            errs.push(format!("model.learner: {e}"));
        }
        if parse_backbone(&self.model.backbone).is_none() {
            errs.push(format!("model.backbone: unknown `{}` (expected residual_conv or patch_attention)", self.model.backbone));
        }
        if parse_preset(&self.model.preset).is_none() {
            errs.push(format!("model.preset: unknown `{}` (expected desk or paper)", self.model.preset));
        }
        let t = &self.train;
        if t.epochs == 0 {
            errs.push("train.epochs: must be positive".into());
        }
        if diet == "combdiet" && t.epochs < 10 {
            errs.push(format!("train.epochs: combdiet needs at least 10 epochs, got {}", t.epochs));
        }
        if t.batch_size == 0 {
            errs.push("train.batch_size: must be positive".into());
        }
        if t.frames_per_clip < 1 {
            errs.push("train.frames_per_clip: must be positive".into());
        }
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            errs.push(format!("train.lr: must be a positive number, got {}", t.lr));
        }
        if !(t.weight_decay >= 0.0 && t.weight_decay.is_finite()) {
            errs.push(format!("train.weight_decay: must be non-negative, got {}", t.weight_decay));
        }
        if parse_aggregation(&t.aggregation).is_none() {
            errs.push(format!("train.aggregation: unknown `{}` (expected mean_of_logs or log_of_mean)", t.aggregation));
        }
        if t.checkpoint_every == 0 {
            errs.push("train.checkpoint_every: must be positive".into());
        }
        if t.fim_batches == 0 {
            errs.push("train.fim_batches: must be positive".into());
        }
        if self.data.resolution < 16 {
            errs.push(format!("data.resolution: must be at least 16, got {}", self.data.resolution));
        }
        if let Err(e) = parse_types(&self.eval.corruptions) {
            errs.push(format!("eval.corruptions: {e}"));
        }
        if let Err(e) = parse_severities(&self.eval.severities) {
            errs.push(format!("eval.severities: {e}"));
        }
        if self.eval.probe_epochs == 0 {
            errs.push("eval.probe_epochs: must be positive".into());
        }
        if !(self.eval.probe_lr > 0.0) {
            errs.push("eval.probe_lr: must be positive".into());
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            errs.push(format!("name: `{}` must be a non-empty single path component", self.name));
        }
        if errs.is_empty() { Ok(()) } else { Err(Error::Config(errs)) }
    }

    pub fn learner(&self) -> LearnerKind {
        self.model.learner.parse().expect("validated")
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        let head = match self.learner() {
            LearnerKind::Contrastive => HeadKind::Projection,
            LearnerKind::Distillation => HeadKind::Prototype,
        };
        EncoderConfig::new(parse_backbone(&self.model.backbone).expect("validated"), parse_preset(&self.model.preset).expect("validated"), head)
    }

    fn schedule(&self) -> Result<DietSchedule> {
        let sched = match &self.diet.schedule_file {
            Some(p) => DietSchedule::from_json(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
            None => build_by_name(&self.diet.name, self.train.epochs)?,
        };
        if sched.total_epochs != self.train.epochs {
            return Err(Error::Config(vec![format!(
                "diet.schedule_file: schedule covers {} epochs but train.epochs is {}",
                sched.total_epochs, self.train.epochs
            )]));
        }
        Ok(sched)
    }

    pub fn plan(&self) -> Result<TrainingPlan> {
        let learner = self.learner();
        let diet = self.diet.name.to_ascii_lowercase();
        Ok(match diet.as_str() {
            "std" if self.diet.schedule_file.is_none() => TrainingPlan::standard(self.train.epochs, learner),
            "combdiet" if self.diet.schedule_file.is_none() => {
                let mut p = build_combdiet_plan(self.train.epochs, learner)?;
                p.tdiet_enabled = self.diet.tdiet.unwrap_or(true);
                p
            }
            _ => {
                let tdiet = self.diet.tdiet.unwrap_or(matches!(diet.as_str(), "tdiet" | "catdiet"));
                TrainingPlan::single(self.schedule()?, self.diet.baseline.parse()?, learner, tdiet)
            }
        })
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        self.validate()?;
        let mut train = TrainConfig::desk(self.data.resolution);
        train.batch_frames = self.train.batch_size;
        train.frames_per_clip = self.train.frames_per_clip;
        train.window = self.train.window;
        train.lr = self.train.lr;
        train.weight_decay = self.train.weight_decay;
        train.warmup_epochs = self.train.warmup_epochs;
        train.aggregation = parse_aggregation(&self.train.aggregation).expect("validated");
        train.fim_batches = self.train.fim_batches;
        Ok(ResolvedRun {
            plan: self.plan()?,
            encoder: self.encoder_config(),
            train,
            probe: ProbeConfig { epochs: self.eval.probe_epochs, lr: self.eval.probe_lr, ..ProbeConfig::default() },
            corruption_types: parse_types(&self.eval.corruptions)?,
            severities: parse_severities(&self.eval.severities)?,
        })
    }

    /// Display label in the figure convention, e.g. `CATDiet`, `CAT-SHF`, `STD`.
    pub fn label(&self) -> String {
        let diet = self.diet.name.to_ascii_lowercase();
        let base = match diet.as_str() {
            "cdiet" => "CDiet",
            "adiet" => "ADiet",
            "tdiet" => "TDiet",
            "catdiet" => "CATDiet",
            "combdiet" => "CombDiet",
            "std" => "STD",
            _ => return self.diet.name.clone(),
        };
        let mut label = match self.diet.baseline.to_ascii_lowercase().as_str() {
            "none" => base.to_string(),
            b => format!("{}-{}", base.trim_end_matches("Diet"), b.to_ascii_uppercase()),
        };
        if self.diet.tdiet == Some(false) && matches!(diet.as_str(), "tdiet" | "catdiet" | "combdiet") {
            label.push_str("-NS");
        }
        label
    }
}

/// `DEVDIET__TRAIN__EPOCHS=12` becomes `("train.epochs", "12")`.
pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.split("__").map(str::to_ascii_lowercase).collect::<Vec<_>>().join("."), v)))
        .collect();
    out.sort();
    out
}

/// Splits `key=value`.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    text.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::Config(vec![format!("override `{text}` is not of the form section.key=value")]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_resolve() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let r = c.resolve().unwrap();
        assert_eq!(r.plan.total_epochs(), 30);
        assert!(r.plan.tdiet_enabled);
        assert_eq!(r.corruption_types.len(), 15);
        assert_eq!(c.label(), "CATDiet");
    }

    #[test]
    fn all_errors_reported_together() {
        let text = "[diet]\nname = \"keto\"\nbaseline = \"sideways\"\n[train]\nepochs = 0\nlr = -1.0\n";
        let Err(Error::Config(errs)) = RunConfig::from_toml(text) else { panic!("expected config error") };
        assert_eq!(errs.len(), 4, "{errs:?}");
        assert!(errs[0].contains("cdiet, adiet, tdiet, catdiet, combdiet, std"));
        let Err(Error::Config(one)) = RunConfig::from_toml("[diet]\nname = \"keto\"\n") else { panic!() };
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn overrides_follow_precedence() {
        let env = env_overrides(vec![
            ("DEVDIET__TRAIN__EPOCHS".to_string(), "12".to_string()),
            ("DEVDIET__DIET__BASELINE".to_string(), "shf".to_string()),
            ("HOME".to_string(), "/x".to_string()),
        ]);
        assert_eq!(env.len(), 2);
        let mut all = env.clone();
        all.push(parse_override("train.epochs=14").unwrap());
        let c = RunConfig::from_toml_with("[train]\nepochs = 10\n", &all).unwrap();
        assert_eq!(c.train.epochs, 14);
        assert_eq!(c.label(), "CAT-SHF");
        let c = RunConfig::from_toml_with("[train]\nepochs = 10\n", &env).unwrap();
        assert_eq!(c.train.epochs, 12);
        assert!(RunConfig::from_toml("[train]\nepoch = 3\n").is_err());
    }

    #[test]
    fn plans_by_diet() {
        let with = |diet: &str, base: &str| {
            let mut c = RunConfig::default();
            c.diet.name = diet.into();
            c.diet.baseline = base.into();
            c
        };
        let std = with("std", "none").plan().unwrap();
        assert_eq!((std.phase1_epochs(), std.tdiet_enabled), (0, false));
        let comb = with("combdiet", "none").plan().unwrap();
        assert_eq!(comb.phase1_epochs(), 9);
        assert!(!with("cdiet", "none").plan().unwrap().tdiet_enabled);
        assert_eq!(with("cdiet", "rev").label(), "C-REV");
        assert!(with("std", "rev").validate().is_err());
        assert_ne!(with("cdiet", "rev").hash(), with("cdiet", "none").hash());
        let mut renamed = with("cdiet", "rev");
        renamed.name = "other".into();
        assert_eq!(renamed.hash(), with("cdiet", "rev").hash());
    }
}
