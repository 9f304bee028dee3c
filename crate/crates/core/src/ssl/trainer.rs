//! Two-phase trainer. All randomness is derived from `(seed, epoch, purpose)`, so an epoch
//! depends only on the state at its start and a restored checkpoint continues bit-for-bit.

use devdiet_nn::{warmup_cosine, AdamW, Tensor};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::contrastive::{contrastive_tdiet_loss, Aggregation};
use super::distill::{distillation_tdiet_loss, ema_update, momentum_at, STUDENT_TEMPERATURE, TEACHER_MOMENTUM, TEACHER_TEMPERATURE};
use super::encoder::{to_input, Encoder};
use super::fim::fim_trace;
use super::EmbeddingBatch;
use crate::augment::{diet_views, sdiet_views, AugmentedViews, ViewConfig, ViewKind, ViewRecord};
use crate::datasets::{make_positive_groups, sample_training_frames, VideoDataset};
use crate::error::{Error, Result};
use crate::schedule::{DietSampler, LearnerKind, Phase, TrainingPlan};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Frames per optimizer step (each contributes all of its views).
    pub batch_frames: usize,
    pub frames_per_clip: usize,
    /// Adjacent sampled frames per positive group beyond the first; forced to 0 when the
    /// plan disables the temporal objective.
    pub window: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// `None`: 10 epochs, or `ceil(0.1 * total)` for runs shorter than 100 epochs.
    pub warmup_epochs: Option<u32>,
    pub views: ViewConfig,
    pub aggregation: Aggregation,
    pub student_temperature: f64,
    pub teacher_temperature: f64,
    pub teacher_momentum: f64,
    pub fim_batches: usize,
    pub fim_batch_frames: usize,
}

impl TrainConfig {
    pub fn desk(resolution: usize) -> Self {
        Self {
            batch_frames: 64,
            frames_per_clip: 10,
            window: 1,
            lr: 5e-4,
            weight_decay: 1e-4,
            warmup_epochs: None,
            views: ViewConfig::for_resolution(resolution),
            aggregation: Aggregation::MeanOfLogs,
            student_temperature: STUDENT_TEMPERATURE,
            teacher_temperature: TEACHER_TEMPERATURE,
            teacher_momentum: TEACHER_MOMENTUM,
            fim_batches: 8,
            fim_batch_frames: 16,
        }
    }

    pub fn warmup(&self, total_epochs: u32) -> u32 {
        self.warmup_epochs.unwrap_or(if total_epochs >= 100 { 10 } else { total_epochs.div_ceil(10) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRef {
    pub clip: usize,
    pub frame: usize,
}

/// One optimizer step's worth of frames, their positive groups and augmented views.
#[derive(Clone, Debug)]
pub struct TrainBatch {
    pub epoch: u32,
    pub phase: Phase,
    pub frames: Vec<FrameRef>,
    /// Group id (within the batch) of each frame.
    pub groups: Vec<usize>,
    pub views: Vec<AugmentedViews>,
}

impl TrainBatch {
    pub fn records(&self) -> impl Iterator<Item = &ViewRecord> {
        self.views.iter().flat_map(|v| v.records.iter())
    }

    /// Frame indices of each group.
    pub fn group_members(&self) -> Vec<Vec<usize>> {
        let n = self.groups.iter().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); n];
        for (i, &g) in self.groups.iter().enumerate() {
            out[g].push(i);
        }
        out
    }
}

/// One line of the per-epoch metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: u32,
    pub phase: Phase,
    /// Stage of the diet timeline; absent in the standard phase.
    pub stage: Option<usize>,
    pub loss: f64,
    pub lr: f64,
    pub temperature: f64,
    pub fim_trace: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
}

/// Trainer state: networks, optimizer moments, teacher center, and history.
#[derive(Clone)]
pub struct Trainer<E: Encoder> {
    pub plan: TrainingPlan,
    pub cfg: TrainConfig,
    pub seed: u64,
    pub student: E,
    pub teacher: Option<E>,
    pub center: Vec<f64>,
    pub optimizer: AdamW,
    /// First epoch not yet trained.
    pub epoch: u32,
    pub history: Vec<MetricsRow>,
    sampler: Option<DietSampler>,
}

type Group = Vec<FrameRef>;

struct StepOutput {
    loss: f64,
    center: Option<Vec<f64>>,
}

impl<E: Encoder> Trainer<E> {
    pub fn new(plan: TrainingPlan, cfg: TrainConfig, student: E, rng_seed: u64) -> Self {
        let teacher = (plan.learner == LearnerKind::Distillation).then(|| student.clone());
        let center = vec![0.0; student.output_dim()];
        let optimizer = AdamW::new(cfg.lr as f32, cfg.weight_decay as f32);
        let sampler = plan.sampler();
        Self { plan, cfg, seed: rng_seed, student, teacher, center, optimizer, epoch: 0, history: Vec::new(), sampler }
    }

    pub fn window(&self) -> usize {
        if self.plan.tdiet_enabled {
            self.cfg.window
        } else {
            0
        }
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.plan.total_epochs()
    }

    /// Positive groups of the sampled frames of every clip, in dataset order.
    pub fn all_groups(&self, data: &VideoDataset) -> Result<Vec<Group>> {
        if data.clips.is_empty() {
            return Err(Error::Data(format!("training set `{}` is empty", data.name)));
        }
        let mut groups = Vec::new();
        for (ci, clip) in data.clips.iter().enumerate() {
            let k = self.cfg.frames_per_clip.min(clip.len());
            let idx = sample_training_frames(clip.len(), k, self.seed)?;
            for g in make_positive_groups(idx.len(), self.window()) {
                groups.push(g.members.iter().map(|&m| FrameRef { clip: ci, frame: idx[m] }).collect());
            }
        }
        Ok(groups)
    }

    fn groups_per_batch(&self) -> usize {
        (self.cfg.batch_frames / (self.window() + 1)).max(1)
    }

    pub fn iterations_per_epoch(&self, data: &VideoDataset) -> Result<usize> {
        Ok(self.all_groups(data)?.len().div_ceil(self.groups_per_batch()))
    }

    /// The epoch's batches as shuffled group lists.
    pub fn epoch_plan(&self, data: &VideoDataset, epoch: u32) -> Result<Vec<Vec<Group>>> {
        let mut groups = self.all_groups(data)?;
        groups.shuffle(&mut seed::rng_for(self.seed, &[seed::tag("order"), epoch as u64]));
        Ok(groups.chunks(self.groups_per_batch()).map(<[Group]>::to_vec).collect())
    }

    /// Augments every frame of `groups` for `epoch`. Views depend only on
    /// `(seed, epoch, clip, frame, salt)`, never on batch composition.
    pub fn build_batch(&self, data: &VideoDataset, epoch: u32, groups: &[Group], salt: u64) -> Result<TrainBatch> {
        let phase = self.plan.phase_at(epoch)?;
        let mut frames = Vec::new();
        let mut gid = Vec::new();
        let mut views = Vec::new();
        for (g, members) in groups.iter().enumerate() {
            for &f in members {
                let clip = &data.clips[f.clip];
                let img = &clip.frames[f.frame];
                let id = format!("{}#{}", clip.id, f.frame);
                let s = seed::derive(self.seed, &[seed::tag("views"), salt, epoch as u64, f.clip as u64, f.frame as u64]);
                let v = match (phase, &self.sampler) {
                    (Phase::One, Some(sampler)) => {
                        diet_views(img, &id, self.plan.learner, &self.cfg.views, s, &|ds| sampler.draw(epoch, ds))?
                    }
                    _ => sdiet_views(img, &id, self.plan.learner, &self.cfg.views, s),
                };
                frames.push(f);
                gid.push(g);
                views.push(v);
            }
        }
        Ok(TrainBatch { epoch, phase, frames, groups: gid, views })
    }

    fn temperature(&self, epoch: u32) -> Result<f64> {
        match self.plan.learner {
            LearnerKind::Contrastive => self.plan.temperature_at(epoch),
            LearnerKind::Distillation => Ok(self.cfg.student_temperature),
        }
    }

    /// Iteration range `[start, end)` of the phase containing `epoch`.
    fn phase_iterations(&self, epoch: u32, per_epoch: usize) -> (u64, u64) {
        let p1 = self.plan.phase1_epochs();
        let (a, b) = if epoch < p1 { (0, p1) } else { (p1, self.plan.total_epochs()) };
        (a as u64 * per_epoch as u64, b as u64 * per_epoch as u64)
    }

    /// Forward, loss, and backward for one batch; gradients accumulate into the student.
    fn accumulate(student: &mut E, teacher: Option<&E>, cfg: &TrainConfig, center: &[f64], batch: &TrainBatch, tau: f64) -> Result<StepOutput> {
        match teacher {
            None => {
                let images: Vec<_> = batch.views.iter().flat_map(|v| v.views.iter()).collect();
                let groups: Vec<usize> =
                    batch.views.iter().zip(&batch.groups).flat_map(|(v, &g)| std::iter::repeat_n(g, v.views.len())).collect();
                let (out, cache) = student.forward(&to_input(&images));
                let emb = EmbeddingBatch::simple(out.row_len(), out.data().iter().map(|&v| v as f64).collect(), groups)?;
                let res = contrastive_tdiet_loss(&emb, tau, cfg.aggregation)?;
                student.backward(&cache, &Tensor::new(out.shape().to_vec(), res.grad.iter().map(|&g| g as f32).collect()));
                Ok(StepOutput { loss: res.loss, center: None })
            }
            Some(teacher) => {
                let (mut gl, mut lo) = (Vec::new(), Vec::new());
                for (fi, v) in batch.views.iter().enumerate() {
                    for (vi, (img, rec)) in v.views.iter().zip(&v.records).enumerate() {
                        let entry = (img, batch.groups[fi], fi * 64 + vi);
                        match rec.kind {
                            ViewKind::Global => gl.push(entry),
                            ViewKind::Local => lo.push(entry),
                        }
                    }
                }
                let (gout, gcache) = student.forward(&to_input(&gl.iter().map(|e| e.0).collect::<Vec<_>>()));
                let local = (!lo.is_empty()).then(|| student.forward(&to_input(&lo.iter().map(|e| e.0).collect::<Vec<_>>())));
                let tout = teacher.forward(&to_input(&gl.iter().map(|e| e.0).collect::<Vec<_>>())).0;
                let k = gout.row_len();
                let mut sdata: Vec<f64> = gout.data().iter().map(|&v| v as f64).collect();
                if let Some((lout, _)) = &local {
                    sdata.extend(lout.data().iter().map(|&v| v as f64));
                }
                let all: Vec<_> = gl.iter().chain(&lo).collect();
                let kinds = (0..all.len()).map(|i| if i < gl.len() { ViewKind::Global } else { ViewKind::Local }).collect();
                let sb = EmbeddingBatch::new(k, sdata, all.iter().map(|e| e.1).collect(), kinds, all.iter().map(|e| e.2).collect())?;
                let tb = EmbeddingBatch::new(
                    k,
                    tout.data().iter().map(|&v| v as f64).collect(),
                    gl.iter().map(|e| e.1).collect(),
                    vec![ViewKind::Global; gl.len()],
                    gl.iter().map(|e| e.2).collect(),
                )?;
                let res = distillation_tdiet_loss(&sb, &tb, tau, cfg.teacher_temperature, center)?;
                let split = gl.len() * k;
                student.backward(&gcache, &Tensor::new(gout.shape().to_vec(), res.grad[..split].iter().map(|&g| g as f32).collect()));
                if let Some((lout, lcache)) = &local {
                    student.backward(lcache, &Tensor::new(lout.shape().to_vec(), res.grad[split..].iter().map(|&g| g as f32).collect()));
                }
                Ok(StepOutput { loss: res.loss, center: Some(res.center) })
            }
        }
    }

    /// Fixed probe batches for the Fisher trace: the same frames and view seeds every
    /// epoch, augmented with that epoch's transform.
    pub fn fim_probe(&self, data: &VideoDataset, epoch: u32) -> Result<Vec<TrainBatch>> {
        let mut groups = self.all_groups(data)?;
        groups.shuffle(&mut seed::rng_for(self.seed, &[seed::tag("fim-probe")]));
        let per = (self.cfg.fim_batch_frames / (self.window() + 1)).max(1);
        groups
            .chunks(per)
            .take(self.cfg.fim_batches)
            .enumerate()
            .map(|(b, g)| self.build_batch(data, epoch, g, seed::tag("fim") ^ b as u64))
            .collect()
    }

    /// Empirical Fisher trace of the active objective on the probe set, without an update.
    pub fn fim(&mut self, data: &VideoDataset, epoch: u32) -> Result<f64> {
        let probes = self.fim_probe(data, epoch)?;
        let tau = self.temperature(epoch)?;
        let (cfg, center, teacher) = (self.cfg.clone(), self.center.clone(), self.teacher.clone());
        fim_trace(&mut self.student, &probes, |m, b| Self::accumulate(m, teacher.as_ref(), &cfg, &center, b, tau).map(|_| ()))
    }

    fn divergence(&self, epoch: u32, detail: String) -> Error {
        Error::Divergence { epoch, detail, checkpoint: None }
    }

    /// Trains epoch `self.epoch` and records its metrics row.
    pub fn train_epoch(&mut self, data: &VideoDataset) -> Result<MetricsRow> {
        let epoch = self.epoch;
        let total = self.plan.total_epochs();
        if epoch >= total {
            return Err(Error::EpochOutOfRange { epoch, total });
        }
        let batches = self.epoch_plan(data, epoch)?;
        let per_epoch = batches.len();
        let total_iters = per_epoch * total as usize;
        let warmup = self.cfg.warmup(total) as usize * per_epoch;
        let tau = self.temperature(epoch)?;
        let (phase_start, phase_end) = self.phase_iterations(epoch, per_epoch);
        let stage = match self.plan.phase_at(epoch)? {
            Phase::One => self.sampler.as_ref().map(|s| s.timeline.stage_index_at(epoch)).transpose()?,
            Phase::Two => None,
        };

        let mut loss_sum = 0.0;
        let mut first_lr = None;
        let mut last_m = None;
        for (bi, groups) in batches.iter().enumerate() {
            let it = epoch as usize * per_epoch + bi;
            let batch = self.build_batch(data, epoch, groups, 0)?;
            self.student.zero_grad();
            let out = Self::accumulate(&mut self.student, self.teacher.as_ref(), &self.cfg, &self.center, &batch, tau)
                .map_err(|e| match e {
                    Error::Numeric(msg) => self.divergence(epoch, msg),
                    other => other,
                })?;
            if !out.loss.is_finite() || !self.student.grad_sq_norm().is_finite() {
                return Err(self.divergence(epoch, format!("non-finite loss or gradient at iteration {it}")));
            }
            let lr = warmup_cosine(self.cfg.lr as f32, it, warmup, total_iters);
            first_lr.get_or_insert(lr as f64);
            self.optimizer.lr = lr;
            self.optimizer.step(self.student.params_mut());
            if let (Some(teacher), Some(center)) = (self.teacher.as_mut(), out.center) {
                self.center = center;
                let m = momentum_at(it as u64 - phase_start, phase_end - phase_start, self.cfg.teacher_momentum);
                ema_update(teacher, &self.student, m)?;
                last_m = Some(m);
            }
            loss_sum += out.loss;
        }
        let fim = self.fim(data, epoch)?;
        if !fim.is_finite() {
            return Err(self.divergence(epoch, "non-finite Fisher trace".into()));
        }
        let row = MetricsRow {
            epoch,
            phase: self.plan.phase_at(epoch)?,
            stage,
            loss: loss_sum / per_epoch as f64,
            lr: first_lr.unwrap_or(0.0),
            temperature: tau,
            fim_trace: fim,
            iterations: per_epoch,
            momentum: last_m,
        };
        log::info!(
            "epoch {epoch}: loss {:.5} lr {:.2e} tau {tau} fim {fim:.4e}{}",
            row.loss,
            row.lr,
            stage.map(|s| format!(" stage {s}")).unwrap_or_default()
        );
        self.history.push(row.clone());
        self.epoch += 1;
        Ok(row)
    }

    /// Trains until the plan ends or `stop_after` epochs have completed, calling
    /// `on_epoch` after each.
    pub fn fit(&mut self, data: &VideoDataset, stop_after: Option<u32>, mut on_epoch: impl FnMut(&Self, &MetricsRow) -> Result<()>) -> Result<()> {
        let end = stop_after.map_or(self.plan.total_epochs(), |s| s.min(self.plan.total_epochs()));
        while self.epoch < end {
            let row = self.train_epoch(data)?;
            on_epoch(self, &row)?;
        }
        Ok(())
    }

    /// Replaces the sampler after a plan is swapped in by a restore.
    pub(crate) fn refresh_sampler(&mut self) {
        self.sampler = self.plan.sampler();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use devdiet_nn::Parameterized;
    use crate::datasets::gen_rotation_videos;
    use crate::schedule::{build_catdiet, build_combdiet_plan, BaselineKind};
    use crate::ssl::encoder::PooledLinear;

    fn data() -> VideoDataset {
        gen_rotation_videos(3, 2, 12, 24, 4).unwrap()
    }

    fn cfg() -> TrainConfig {
        let mut c = TrainConfig::desk(24);
        c.batch_frames = 16;
        c.fim_batches = 2;
        c.fim_batch_frames = 8;
        c
    }

    #[test]
    fn batches_partition_frames_into_groups() {
        let plan = TrainingPlan::single(build_catdiet(10).unwrap(), BaselineKind::None, LearnerKind::Contrastive, true);
        let t = Trainer::new(plan, cfg(), PooledLinear::new(2, 8, 0), 1);
        let d = data();
        let epoch = t.epoch_plan(&d, 0).unwrap();
        let mut seen: Vec<FrameRef> = epoch.iter().flatten().flatten().copied().collect();
        assert_eq!(seen.len(), 6 * 10);
        seen.sort_by_key(|f| (f.clip, f.frame));
        seen.dedup();
        assert_eq!(seen.len(), 60);
        let b = t.build_batch(&d, 0, &epoch[0], 0).unwrap();
        for members in b.group_members() {
            assert_eq!(members.len(), 2);
            let (x, y) = (b.frames[members[0]], b.frames[members[1]]);
            assert_eq!(x.clip, y.clip);
        }
    }

    #[test]
    fn non_smooth_and_standard_use_singletons() {
        let plan = TrainingPlan::single(build_catdiet(10).unwrap(), BaselineKind::None, LearnerKind::Contrastive, false);
        let t = Trainer::new(plan, cfg(), PooledLinear::new(2, 8, 0), 1);
        assert!(t.all_groups(&data()).unwrap().iter().all(|g| g.len() == 1));
        let t = Trainer::new(TrainingPlan::standard(5, LearnerKind::Contrastive), cfg(), PooledLinear::new(2, 8, 0), 1);
        let b = t.build_batch(&data(), 0, &t.epoch_plan(&data(), 0).unwrap()[0], 0).unwrap();
        assert!(b.group_members().iter().all(|m| m.len() == 1));
        assert!(b.records().all(|r| r.diet.is_none()));
    }

    #[test]
    fn phase_two_drops_diet_fields_but_keeps_groups() {
        let plan = build_combdiet_plan(10, LearnerKind::Contrastive).unwrap();
        let t = Trainer::new(plan, cfg(), PooledLinear::new(2, 8, 0), 1);
        let d = data();
        let last1 = t.build_batch(&d, 2, &t.epoch_plan(&d, 2).unwrap()[0], 0).unwrap();
        let first2 = t.build_batch(&d, 3, &t.epoch_plan(&d, 3).unwrap()[0], 0).unwrap();
        assert!(last1.records().all(|r| r.diet.is_some()));
        assert!(first2.records().all(|r| r.diet.is_none()));
        assert!(first2.group_members().iter().all(|m| m.len() == 2));
    }

    #[test]
    fn training_is_deterministic_and_resumable() {
        let d = data();
        let plan = build_combdiet_plan(10, LearnerKind::Contrastive).unwrap();
        let mut a = Trainer::new(plan.clone(), cfg(), PooledLinear::new(2, 8, 0), 3);
        a.fit(&d, None, |_, _| Ok(())).unwrap();
        let mut b = Trainer::new(plan, cfg(), PooledLinear::new(2, 8, 0), 3);
        b.fit(&d, Some(4), |_, _| Ok(())).unwrap();
        let mut c = b.clone();
        c.fit(&d, None, |_, _| Ok(())).unwrap();
        assert_eq!(a.history, c.history);
        assert_eq!(a.student.fingerprint(), c.student.fingerprint());
        assert_eq!(a.history.len(), 10);
        assert!(a.history.iter().all(|r| r.fim_trace >= 0.0 && r.loss.is_finite()));
        assert_eq!(a.history[3].stage, None);
        assert_eq!(a.history[0].temperature, 0.5);
    }

    #[test]
    fn distillation_trains_and_moves_teacher() {
        let d = data();
        let plan = TrainingPlan::single(build_catdiet(8).unwrap(), BaselineKind::None, LearnerKind::Distillation, true);
        let mut t = Trainer::new(plan, cfg(), PooledLinear::new(2, 16, 0), 5);
        let before = t.teacher.as_ref().unwrap().fingerprint();
        t.fit(&d, Some(2), |_, _| Ok(())).unwrap();
        assert_ne!(t.teacher.as_ref().unwrap().fingerprint(), before);
        assert!(t.center.iter().any(|&c| c != 0.0));
        assert_eq!(t.history[1].temperature, STUDENT_TEMPERATURE);
        assert!(t.history[0].momentum.unwrap() >= TEACHER_MOMENTUM);
    }

    #[test]
    fn momentum_resets_at_phase_two() {
        let d = data();
        let plan = build_combdiet_plan(10, LearnerKind::Distillation).unwrap();
        let mut t = Trainer::new(plan, cfg(), PooledLinear::new(2, 16, 0), 5);
        let per = t.iterations_per_epoch(&d).unwrap();
        let (s, e) = t.phase_iterations(3, per);
        assert_eq!(s, 3 * per as u64);
        assert_eq!(momentum_at(0, e - s, TEACHER_MOMENTUM), TEACHER_MOMENTUM);
        t.fit(&d, Some(4), |_, _| Ok(())).unwrap();
        // Last iteration of phase one sits near 1; phase two restarts low.
        assert!(t.history[2].momentum.unwrap() > t.history[3].momentum.unwrap());
    }
}
