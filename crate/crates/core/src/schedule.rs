//! Staged visual-diet curricula.
//!
//! A [`DietSchedule`] is an ordered list of stages, each pinning a blur strength, a saturation
//! interval and a contrastive temperature for a number of epochs. Builders cover the color,
//! acuity and combined curricula; [`derive_baseline`] produces the reversed, shuffled,
//! first-only and last-only controls; [`TrainingPlan`] adds the optional standard-augmentation
//! second phase.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Width of the saturation interval used for "full color" stages: `(1 - eps, 1]`.
pub const FULL_COLOR_EPS: f64 = 1e-6;

/// Temperature used by standard-augmentation phases and the temporal-only diet.
pub const MATURE_TEMPERATURE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Contrastive,
    Distillation,
}

impl FromStr for LearnerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "contrastive" | "simclr" => Ok(Self::Contrastive),
            "distillation" | "dino" => Ok(Self::Distillation),
            _ => Err(Error::Argument(format!("unknown learner `{s}` (expected contrastive or distillation)"))),
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Contrastive => "contrastive",
            Self::Distillation => "distillation",
        })
    }
}

/// One curriculum stage. Blur parameters are in pixels at 224x224.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    #[serde(rename = "duration")]
    pub duration_epochs: u32,
    #[serde(rename = "sigma")]
    pub blur_sigma: f64,
    #[serde(rename = "kernel")]
    pub kernel_size: u32,
    pub sat_lo: f64,
    pub sat_hi: f64,
    pub temperature: f64,
}

impl StageSpec {
    pub fn saturation_range(&self) -> (f64, f64) {
        (self.sat_lo, self.sat_hi)
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Schedule(format!("stage {}: {msg}", index + 1)));
        if self.duration_epochs == 0 {
            return bad("duration must be at least one epoch".into());
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return bad(format!("blur sigma {} must be finite and non-negative", self.blur_sigma));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return bad(format!("kernel size {} must be odd and positive", self.kernel_size));
        }
        if !(0.0 <= self.sat_lo && self.sat_lo < self.sat_hi && self.sat_hi <= 1.0) {
            return bad(format!("saturation range ({}, {}] must satisfy 0 <= lo < hi <= 1", self.sat_lo, self.sat_hi));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature {} must be positive", self.temperature));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DietSchedule {
    pub name: String,
    pub total_epochs: u32,
    pub stages: Vec<StageSpec>,
}

impl DietSchedule {
    pub fn new(name: impl Into<String>, stages: Vec<StageSpec>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Schedule("a schedule needs at least one stage".into()));
        }
        for (i, s) in stages.iter().enumerate() {
            s.validate(i)?;
        }
        let total_epochs = stages.iter().map(|s| s.duration_epochs).sum();
        Ok(Self { name: name.into(), total_epochs, stages })
    }

    /// Parses the JSON form and re-checks every invariant, including the declared total.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: DietSchedule = serde_json::from_str(text)?;
        let checked = DietSchedule::new(raw.name, raw.stages)?;
        if checked.total_epochs != raw.total_epochs {
            return Err(Error::Schedule(format!(
                "total_epochs is {} but stage durations sum to {}",
                raw.total_epochs, checked.total_epochs
            )));
        }
        Ok(checked)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn durations(&self) -> Vec<u32> {
        self.stages.iter().map(|s| s.duration_epochs).collect()
    }

    /// Exclusive end epoch of each stage.
    pub fn boundaries(&self) -> Vec<u32> {
        self.stages
            .iter()
            .scan(0u32, |acc, s| {
                *acc += s.duration_epochs;
                Some(*acc)
            })
            .collect()
    }

    pub fn stage_index_at(&self, epoch: u32) -> Result<usize> {
        if epoch >= self.total_epochs {
            return Err(Error::EpochOutOfRange { epoch, total: self.total_epochs });
        }
        Ok(self.boundaries().iter().position(|&end| epoch < end).expect("epoch below total"))
    }

    pub fn stage_at(&self, epoch: u32) -> Result<&StageSpec> {
        Ok(&self.stages[self.stage_index_at(epoch)?])
    }

    /// Stage order reversed, durations included.
    pub fn reversed(&self) -> DietSchedule {
        let mut stages = self.stages.clone();
        stages.reverse();
        let name = match self.name.strip_suffix("-rev") {
            Some(base) => base.to_string(),
            None => format!("{}-rev", self.name),
        };
        DietSchedule { name, total_epochs: self.total_epochs, stages }
    }
}

/// Shorthand for [`DietSchedule::stage_at`].
pub fn stage_at(schedule: &DietSchedule, epoch: u32) -> Result<&StageSpec> {
    schedule.stage_at(epoch)
}

/// Largest-remainder apportionment of `total` epochs in proportion to `base`, with every
/// part at least one epoch. Ties in the remainder go to the earlier stage.
pub fn apportion(base: &[u32], total: u32) -> Result<Vec<u32>> {
    let n = base.len() as u32;
    if total < n {
        return Err(Error::Schedule(format!("{total} epochs cannot give each of {n} stages one epoch")));
    }
    let mut parts = largest_remainder(base, total);
    // Lift empty stages to one epoch, taking from the largest stage (earliest on ties).
    while let Some(empty) = parts.iter().position(|&p| p == 0) {
        let donor = (0..parts.len()).rev().max_by_key(|&i| parts[i]).expect("non-empty");
        parts[donor] -= 1;
        parts[empty] = 1;
    }
    Ok(parts)
}

fn largest_remainder(base: &[u32], total: u32) -> Vec<u32> {
    let sum: u64 = base.iter().map(|&b| b as u64).sum();
    let quota: Vec<u64> = base.iter().map(|&b| b as u64 * total as u64).collect();
    let mut parts: Vec<u32> = quota.iter().map(|q| (q / sum) as u32).collect();
    let assigned: u32 = parts.iter().sum();
    let mut order: Vec<usize> = (0..base.len()).collect();
    order.sort_by(|&a, &b| (quota[b] % sum).cmp(&(quota[a] % sum)).then(a.cmp(&b)));
    for &i in order.iter().take((total - assigned) as usize) {
        parts[i] += 1;
    }
    parts
}

const CDIET_DURATIONS: [u32; 5] = [10, 7, 6, 5, 2];
const CDIET_RANGES: [(f64, f64); 5] = [(0.20, 0.36), (0.36, 0.52), (0.52, 0.68), (0.68, 0.84), (0.84, 1.0)];
const FIVE_STAGE_TEMPERATURES: [f64; 5] = [0.5, 0.4, 0.3, 0.2, 0.1];

const ADIET_DURATIONS: [u32; 5] = [10, 6, 6, 3, 5];
const ADIET_SIGMAS: [f64; 5] = [4.0, 3.0, 2.0, 1.0, 0.0];
const ADIET_KERNELS: [u32; 5] = [25, 19, 13, 7, 1];

const CATDIET_DURATIONS: [u32; 8] = [10, 6, 1, 5, 1, 2, 3, 2];
const CATDIET_SIGMAS: [f64; 8] = [4.0, 3.0, 2.0, 2.0, 1.0, 1.0, 0.0, 0.0];
const CATDIET_RANGES: [(f64, f64); 8] = [
    (0.20, 0.36),
    (0.36, 0.52),
    (0.36, 0.52),
    (0.52, 0.68),
    (0.52, 0.68),
    (0.68, 0.84),
    (0.68, 0.84),
    (0.84, 1.0),
];
const CATDIET_TEMPERATURES: [f64; 8] = [0.5, 0.45, 0.4, 0.35, 0.3, 0.2, 0.15, 0.1];

fn kernel_for(sigma: f64) -> u32 {
    (6.0 * sigma).round() as u32 + 1
}

fn assemble(name: &str, durations: &[u32], sigmas: &[f64], ranges: &[(f64, f64)], temps: &[f64]) -> Result<DietSchedule> {
    let stages = durations
        .iter()
        .enumerate()
        .map(|(i, &d)| StageSpec {
            duration_epochs: d,
            blur_sigma: sigmas[i],
            kernel_size: kernel_for(sigmas[i]),
            sat_lo: ranges[i].0,
            sat_hi: ranges[i].1,
            temperature: temps[i],
        })
        .collect();
    DietSchedule::new(name, stages)
}

/// Five-stage grayscale-to-color curriculum.
pub fn build_cdiet(total_epochs: u32) -> Result<DietSchedule> {
    let d = apportion(&CDIET_DURATIONS, total_epochs)?;
    assemble("cdiet", &d, &[0.0; 5], &CDIET_RANGES, &FIVE_STAGE_TEMPERATURES)
}

/// Five-stage blur-to-sharp curriculum at full saturation.
pub fn build_adiet(total_epochs: u32) -> Result<DietSchedule> {
    let d = apportion(&ADIET_DURATIONS, total_epochs)?;
    let full = [(1.0 - FULL_COLOR_EPS, 1.0); 5];
    let s = assemble("adiet", &d, &ADIET_SIGMAS, &full, &FIVE_STAGE_TEMPERATURES)?;
    debug_assert!(s.stages.iter().zip(ADIET_KERNELS).all(|(st, k)| st.kernel_size == k));
    Ok(s)
}

/// Eight-stage interleaving of the color and acuity curricula.
pub fn build_catdiet(total_epochs: u32) -> Result<DietSchedule> {
    let d = apportion(&CATDIET_DURATIONS, total_epochs)?;
    assemble("catdiet", &d, &CATDIET_SIGMAS, &CATDIET_RANGES, &CATDIET_TEMPERATURES)
}

/// Temporal-only diet: one identity stage at the mature temperature.
pub fn build_tdiet(total_epochs: u32) -> Result<DietSchedule> {
    if total_epochs == 0 {
        return Err(Error::Schedule("total_epochs must be positive".into()));
    }
    assemble("tdiet", &[total_epochs], &[0.0], &[(1.0 - FULL_COLOR_EPS, 1.0)], &[MATURE_TEMPERATURE])
}

/// The combined curriculum squeezed into fewer than eight epochs: stages whose
/// apportioned share rounds to zero are dropped.
fn build_catdiet_compressed(total_epochs: u32) -> Result<DietSchedule> {
    if total_epochs >= CATDIET_DURATIONS.len() as u32 {
        return build_catdiet(total_epochs);
    }
    if total_epochs == 0 {
        return Err(Error::Schedule("phase 1 needs at least one epoch".into()));
    }
    let parts = largest_remainder(&CATDIET_DURATIONS, total_epochs);
    let keep: Vec<usize> = (0..parts.len()).filter(|&i| parts[i] > 0).collect();
    let pick = |i: &usize| *i;
    assemble(
        "catdiet",
        &keep.iter().map(|&i| parts[i]).collect::<Vec<_>>(),
        &keep.iter().map(pick).map(|i| CATDIET_SIGMAS[i]).collect::<Vec<_>>(),
        &keep.iter().map(pick).map(|i| CATDIET_RANGES[i]).collect::<Vec<_>>(),
        &keep.iter().map(pick).map(|i| CATDIET_TEMPERATURES[i]).collect::<Vec<_>>(),
    )
}

pub const DIET_NAMES: [&str; 4] = ["cdiet", "adiet", "tdiet", "catdiet"];

pub fn build_by_name(name: &str, total_epochs: u32) -> Result<DietSchedule> {
    match name.to_ascii_lowercase().as_str() {
        "cdiet" => build_cdiet(total_epochs),
        "adiet" => build_adiet(total_epochs),
        "tdiet" => build_tdiet(total_epochs),
        "catdiet" => build_catdiet(total_epochs),
        _ => Err(Error::Argument(format!("unknown diet `{name}`; valid names: {}", DIET_NAMES.join(", ")))),
    }
}

/// Concrete parameters for one augmented image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DietParams {
    pub s: f64,
    pub sigma: f64,
    pub kernel: u32,
}

impl DietParams {
    pub const IDENTITY: DietParams = DietParams { s: 1.0, sigma: 0.0, kernel: 1 };
}

/// Draws `s` uniformly from the stage's `(lo, hi]` interval; blur is copied from the stage.
pub fn sample_stage_params(stage: &StageSpec, rng_seed: u64) -> DietParams {
    let u: f64 = seed::rng(rng_seed).random();
    DietParams { s: stage.sat_hi - u * (stage.sat_hi - stage.sat_lo), sigma: stage.blur_sigma, kernel: stage.kernel_size }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    #[default]
    None,
    Rev,
    Shf,
    Fo,
    Lo,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [Self::None, Self::Rev, Self::Shf, Self::Fo, Self::Lo];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Rev => "rev",
            Self::Shf => "shf",
            Self::Fo => "fo",
            Self::Lo => "lo",
        }
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown baseline `{s}`; valid kinds: none, rev, shf, fo, lo")))
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-sample source of diet parameters for a schedule or one of its baseline variants.
///
/// Temperatures always follow the original schedule's epoch timeline; only the image-side
/// parameters are rearranged by the baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DietSampler {
    pub kind: BaselineKind,
    pub timeline: DietSchedule,
    pub augment: DietSchedule,
}

pub fn derive_baseline(schedule: &DietSchedule, kind: BaselineKind) -> DietSampler {
    let augment = match kind {
        BaselineKind::Rev => schedule.reversed(),
        _ => schedule.clone(),
    };
    DietSampler { kind, timeline: schedule.clone(), augment }
}

impl DietSampler {
    pub fn total_epochs(&self) -> u32 {
        self.timeline.total_epochs
    }

    pub fn temperature_at(&self, epoch: u32) -> Result<f64> {
        Ok(self.timeline.stage_at(epoch)?.temperature)
    }

    /// Stage of the augmentation schedule that supplies parameters for this sample;
    /// `None` for the last-only control, which bypasses the stages entirely.
    pub fn stage_for(&self, epoch: u32, sample_seed: u64) -> Result<Option<usize>> {
        if epoch >= self.total_epochs() {
            return Err(Error::EpochOutOfRange { epoch, total: self.total_epochs() });
        }
        Ok(match self.kind {
            BaselineKind::None | BaselineKind::Rev => Some(self.augment.stage_index_at(epoch)?),
            BaselineKind::Shf => {
                let n = self.augment.stages.len();
                Some(seed::rng_for(sample_seed, &[seed::tag("shf-stage")]).random_range(0..n))
            }
            BaselineKind::Fo => Some(0),
            BaselineKind::Lo => None,
        })
    }

    pub fn draw(&self, epoch: u32, sample_seed: u64) -> Result<(Option<usize>, DietParams)> {
        let stage = self.stage_for(epoch, sample_seed)?;
        let params = match stage {
            Some(i) => sample_stage_params(&self.augment.stages[i], sample_seed),
            None => DietParams::IDENTITY,
        };
        Ok((stage, params))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Diet-driven augmentation.
    One,
    /// Standard augmentation.
    Two,
}

/// A full pretraining timeline: optional diet phase, then standard augmentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub phase1: Option<DietSchedule>,
    pub phase2_epochs: u32,
    pub phase2_temperature: f64,
    pub tdiet_enabled: bool,
    pub baseline_kind: BaselineKind,
    pub learner: LearnerKind,
}

impl TrainingPlan {
    /// A diet-only plan (no standard phase).
    pub fn single(schedule: DietSchedule, baseline_kind: BaselineKind, learner: LearnerKind, tdiet_enabled: bool) -> Self {
        Self {
            phase1: Some(schedule),
            phase2_epochs: 0,
            phase2_temperature: MATURE_TEMPERATURE,
            tdiet_enabled,
            baseline_kind,
            learner,
        }
    }

    /// The conventional recipe: standard augmentation, same-frame positives only.
    pub fn standard(total_epochs: u32, learner: LearnerKind) -> Self {
        Self {
            phase1: None,
            phase2_epochs: total_epochs,
            phase2_temperature: MATURE_TEMPERATURE,
            tdiet_enabled: false,
            baseline_kind: BaselineKind::None,
            learner,
        }
    }

    pub fn phase1_epochs(&self) -> u32 {
        self.phase1.as_ref().map_or(0, |s| s.total_epochs)
    }

    pub fn total_epochs(&self) -> u32 {
        self.phase1_epochs() + self.phase2_epochs
    }

    pub fn sampler(&self) -> Option<DietSampler> {
        self.phase1.as_ref().map(|s| derive_baseline(s, self.baseline_kind))
    }

    pub fn phase_at(&self, epoch: u32) -> Result<Phase> {
        if epoch >= self.total_epochs() {
            return Err(Error::EpochOutOfRange { epoch, total: self.total_epochs() });
        }
        Ok(if epoch < self.phase1_epochs() { Phase::One } else { Phase::Two })
    }

    /// First epoch of the standard phase, if the plan has one.
    pub fn phase2_start(&self) -> Option<u32> {
        (self.phase2_epochs > 0).then(|| self.phase1_epochs())
    }

    pub fn temperature_at(&self, epoch: u32) -> Result<f64> {
        match (self.phase_at(epoch)?, &self.phase1) {
            (Phase::One, Some(s)) => Ok(s.stage_at(epoch)?.temperature),
            _ => Ok(self.phase2_temperature),
        }
    }
}

/// Combined plan: the interleaved curriculum for the first 30% of epochs, then standard
/// augmentation, with the temporal objective on throughout.
pub fn build_combdiet_plan(total_epochs: u32, learner: LearnerKind) -> Result<TrainingPlan> {
    if total_epochs < 10 {
        return Err(Error::Schedule(format!("the combined plan needs at least 10 epochs, got {total_epochs}")));
    }
    let phase1_len = (3 * total_epochs + 5) / 10;
    let mut phase1 = build_catdiet_compressed(phase1_len)?;
    phase1.name = "combdiet".into();
    Ok(TrainingPlan {
        phase1: Some(phase1),
        phase2_epochs: total_epochs - phase1_len,
        phase2_temperature: MATURE_TEMPERATURE,
        tdiet_enabled: true,
        baseline_kind: BaselineKind::None,
        learner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Stage lookup by walking prefix sums, independent of `stage_index_at`.
    fn oracle_stage(durations: &[u32], epoch: u32) -> usize {
        let mut end = 0;
        for (i, d) in durations.iter().enumerate() {
            end += d;
            if epoch < end {
                return i;
            }
        }
        panic!("epoch past end")
    }

    #[test]
    fn cdiet_thirty_epochs() {
        let s = build_cdiet(30).unwrap();
        assert_eq!(s.durations(), vec![10, 7, 6, 5, 2]);
        assert_eq!(s.stage_at(0).unwrap().saturation_range(), (0.20, 0.36));
        assert_eq!(s.stage_index_at(29).unwrap(), 4);
        assert_eq!(s.stage_at(29).unwrap().saturation_range(), (0.84, 1.0));
        assert_eq!(s.stage_index_at(10).unwrap(), oracle_stage(&[10, 7, 6, 5, 2], 10));
        assert!(matches!(s.stage_at(30), Err(Error::EpochOutOfRange { epoch: 30, total: 30 })));
        assert!(s.stages.iter().all(|st| st.blur_sigma == 0.0 && st.kernel_size == 1));
    }

    #[test]
    fn cdiet_minimum_and_too_short() {
        assert_eq!(build_cdiet(5).unwrap().durations(), vec![1; 5]);
        assert!(matches!(build_cdiet(4), Err(Error::Schedule(_))));
        assert!(matches!(build_catdiet(7), Err(Error::Schedule(_))));
    }

    #[test]
    fn adiet_lookups() {
        let s = build_adiet(30).unwrap();
        assert_eq!(s.durations(), vec![10, 6, 6, 3, 5]);
        let at = |e| s.stage_at(e).unwrap();
        assert_eq!((at(0).blur_sigma, at(0).kernel_size), (4.0, 25));
        assert_eq!((at(22).blur_sigma, at(22).kernel_size), (1.0, 7));
        assert_eq!((at(25).blur_sigma, at(25).kernel_size), (0.0, 1));
        assert_eq!(s.boundaries(), vec![10, 16, 22, 25, 30]);
    }

    #[test]
    fn catdiet_lookups() {
        let s = build_catdiet(30).unwrap();
        assert_eq!(s.durations(), vec![10, 6, 1, 5, 1, 2, 3, 2]);
        let first = s.stage_at(0).unwrap();
        assert_eq!((first.blur_sigma, first.saturation_range(), first.temperature), (4.0, (0.20, 0.36), 0.5));
        assert_eq!(s.stage_index_at(17).unwrap(), 3);
        let st = s.stage_at(17).unwrap();
        assert_eq!((st.blur_sigma, st.saturation_range()), (2.0, (0.52, 0.68)));
        assert_eq!(s.total_epochs, 30);
    }

    #[test]
    fn combdiet_plan_split() {
        let p = build_combdiet_plan(100, LearnerKind::Contrastive).unwrap();
        assert_eq!(p.phase1_epochs(), 30);
        assert_eq!(p.phase2_epochs, 70);
        assert_eq!(p.phase_at(29).unwrap(), Phase::One);
        assert_eq!(p.phase_at(30).unwrap(), Phase::Two);
        assert_eq!(p.temperature_at(30).unwrap(), 0.1);
        assert!(p.tdiet_enabled);
        let short = build_combdiet_plan(10, LearnerKind::Contrastive).unwrap();
        assert_eq!(short.phase1_epochs(), 3);
        assert!(build_combdiet_plan(9, LearnerKind::Distillation).is_err());
    }

    #[test]
    fn stage_draws_stay_in_range_and_repeat() {
        let s = build_cdiet(30).unwrap();
        let last = &s.stages[4];
        for k in 0..200 {
            let p = sample_stage_params(last, k);
            assert!(p.s > 0.84 && p.s <= 1.0);
        }
        assert_eq!(sample_stage_params(last, 9), sample_stage_params(last, 9));
        let first = &s.stages[0];
        let mean = (0..10_000u64).map(|k| sample_stage_params(first, k).s).sum::<f64>() / 1e4;
        assert!((mean - 0.28).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn baselines() {
        let c = build_cdiet(30).unwrap();
        let rev = derive_baseline(&c, BaselineKind::Rev);
        assert_eq!(rev.draw(0, 1).unwrap().0, Some(0));
        assert_eq!(rev.augment.stages[0].saturation_range(), (0.84, 1.0));
        assert_eq!(rev.augment.durations(), vec![2, 5, 6, 7, 10]);
        assert_eq!(rev.temperature_at(0).unwrap(), 0.5);

        let lo = derive_baseline(&build_adiet(30).unwrap(), BaselineKind::Lo);
        for e in [0, 12, 29] {
            assert_eq!(lo.draw(e, e as u64).unwrap().1, DietParams::IDENTITY);
        }

        let fo = derive_baseline(&c, BaselineKind::Fo);
        assert_eq!(fo.draw(29, 3).unwrap().0, Some(0));

        let shf = derive_baseline(&c, BaselineKind::Shf);
        let mut counts = [0usize; 5];
        for k in 0..10_000u64 {
            let (stage, p) = shf.draw(0, seed::derive(5, &[k])).unwrap();
            let i = stage.unwrap();
            let (lo, hi) = c.stages[i].saturation_range();
            assert!(p.s > lo && p.s <= hi);
            counts[i] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e4 - 0.2).abs() < 0.02, "{counts:?}");
        }
        assert!("xyz".parse::<BaselineKind>().is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = build_catdiet(30).unwrap();
        let text = s.to_json();
        assert!(text.contains("\"sat_lo\"") && text.contains("\"kernel\"") && text.contains("\"duration\""));
        assert_eq!(DietSchedule::from_json(&text).unwrap(), s);
        let broken = text.replacen("\"total_epochs\": 30", "\"total_epochs\": 31", 1);
        assert!(DietSchedule::from_json(&broken).is_err());
        assert!(build_by_name("bogus", 30).unwrap_err().to_string().contains("catdiet"));
    }

    proptest! {
        #[test]
        fn builders_respect_invariants(total in 8u32..400) {
            for s in [build_cdiet(total).unwrap(), build_adiet(total).unwrap(), build_catdiet(total).unwrap()] {
                prop_assert_eq!(s.durations().iter().sum::<u32>(), total);
                prop_assert!(s.durations().iter().all(|&d| d >= 1));
                for st in &s.stages {
                    prop_assert_eq!(st.kernel_size as f64, 6.0 * st.blur_sigma + 1.0);
                    prop_assert!(st.sat_lo > 0.0 && st.sat_hi <= 1.0);
                }
                let mut pieces = 1;
                for e in 0..total {
                    let i = s.stage_index_at(e).unwrap();
                    prop_assert_eq!(i, oracle_stage(&s.durations(), e));
                    if e > 0 && i != s.stage_index_at(e - 1).unwrap() {
                        pieces += 1;
                    }
                }
                prop_assert_eq!(pieces, s.stages.len());
                prop_assert_eq!(s.reversed().reversed(), s.clone());
            }
        }

        #[test]
        fn combdiet_phase1_is_thirty_percent(total in 10u32..1000) {
            let p = build_combdiet_plan(total, LearnerKind::Contrastive).unwrap();
            prop_assert_eq!(p.phase1_epochs(), (0.3 * total as f64).round() as u32);
            prop_assert_eq!(p.total_epochs(), total);
        }
    }
}
