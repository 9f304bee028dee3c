//! `pretrain`: run directories, manifests, checkpoint cadence and resumption.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use devdiet_nn::Network;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::corruptions::manifest::sha256_hex;
use crate::corruptions::registry_version;
use crate::datasets::{ingest_image_folder, VideoDataset};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::schedule::{BaselineKind, Phase, TrainingPlan};
use crate::seed;
use crate::ssl::{checkpoint, MetricsRow, Trainer};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.jsonl";

pub fn code_version() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), registry_version())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    /// Epochs completed when the checkpoint was written.
    pub epoch: u32,
    pub path: String,
    pub sha256: String,
}

/// Resolved augmentation for one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub epoch: u32,
    pub phase: Phase,
    /// Stage on the original timeline (sets the temperature).
    pub stage: Option<usize>,
    pub temperature: f64,
    /// `stage`, `shuffled` (stage drawn per view), `identity` or `standard`.
    pub augment: String,
    pub augment_stage: Option<usize>,
    pub saturation: Option<(f64, f64)>,
    pub sigma: Option<f64>,
    pub kernel: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Partial,
    Complete,
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub label: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub code_version: String,
    pub dataset_hashes: BTreeMap<String, String>,
    pub schedule_table: Vec<ScheduleRow>,
    pub checkpoints: Vec<CheckpointEntry>,
    pub metrics_file: String,
    pub status: RunStatus,
    pub epochs_completed: u32,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::ingest(&path, e.to_string()))
    }

    fn save(&self, run_dir: &Path) -> Result<()> {
        write_atomic(&run_dir.join(MANIFEST_FILE), (serde_json::to_string_pretty(self)? + "\n").as_bytes())
    }

    pub fn metrics(&self, run_dir: &Path) -> Result<Vec<MetricsRow>> {
        read_metrics(&run_dir.join(&self.metrics_file))
    }

    pub fn latest_checkpoint(&self) -> Option<&CheckpointEntry> {
        self.checkpoints.last()
    }

    /// Checks that every referenced artifact exists and matches its recorded hash.
    pub fn verify(&self, run_dir: &Path) -> Result<()> {
        for c in &self.checkpoints {
            let path = run_dir.join(&c.path);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if sha256_hex(&bytes) != c.sha256 {
                return Err(Error::Data(format!("{} does not match the hash in the run manifest", path.display())));
            }
        }
        let metrics = run_dir.join(&self.metrics_file);
        if !metrics.exists() {
            return Err(Error::Data(format!("{} is missing", metrics.display())));
        }
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::ingest(path, format!("line {}: {e}", n + 1))))
        .collect()
}

fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Per-epoch augmentation table of a plan.
pub fn schedule_table(plan: &TrainingPlan) -> Result<Vec<ScheduleRow>> {
    let sampler = plan.sampler();
    (0..plan.total_epochs())
        .map(|epoch| {
            let phase = plan.phase_at(epoch)?;
            let temperature = plan.temperature_at(epoch)?;
            let standard = ScheduleRow {
                epoch,
                phase,
                stage: None,
                temperature,
                augment: "standard".into(),
                augment_stage: None,
                saturation: None,
                sigma: None,
                kernel: None,
            };
            let (Phase::One, Some(s)) = (phase, &sampler) else { return Ok(standard) };
            let stage = Some(s.timeline.stage_index_at(epoch)?);
            Ok(match s.kind {
                BaselineKind::Shf => ScheduleRow { stage, augment: "shuffled".into(), ..standard },
                BaselineKind::Lo => ScheduleRow { stage, augment: "identity".into(), ..standard },
                _ => {
                    let a = s.stage_for(epoch, 0)?.expect("ordered baselines resolve a stage");
                    let st = &s.augment.stages[a];
                    ScheduleRow {
                        stage,
                        augment: "stage".into(),
                        augment_stage: Some(a),
                        saturation: Some(st.saturation_range()),
                        sigma: Some(st.blur_sigma),
                        kernel: Some(st.kernel_size),
                        ..standard
                    }
                }
            })
        })
        .collect()
}

/// First free directory among `base`, `base.1`, `base.2`, ...
pub fn fresh_dir(base: &Path) -> Result<PathBuf> {
    let mut candidate = base.to_path_buf();
    let mut n = 0;
    while candidate.exists() {
        n += 1;
        candidate = PathBuf::from(format!("{}.{n}", base.display()));
    }
    std::fs::create_dir_all(&candidate).map_err(|e| Error::io(&candidate, e))?;
    Ok(candidate)
}

#[derive(Clone, Debug, Default)]
pub struct PretrainOptions {
    /// Continue the run in this directory from its latest checkpoint.
    pub resume: Option<PathBuf>,
    /// Stop (with a checkpoint) once this many epochs are complete.
    pub stop_after: Option<u32>,
}

/// Loads the training videos of the benchmark under `cfg.data.root`.
pub fn load_training_videos(cfg: &RunConfig) -> Result<VideoDataset> {
    let dir = cfg.data.root.join("rotation");
    if !dir.join(crate::datasets::ingest::MANIFEST_FILE).exists() {
        return Err(Error::Data(format!(
            "training videos not found under {}; create them with `devdiet synth --out {}`",
            dir.display(),
            cfg.data.root.display()
        )));
    }
    let data = ingest_image_folder(&dir, None)?.videos("train", "rotation");
    if data.clips.is_empty() {
        return Err(Error::Data(format!("{} has no training clips", dir.display())));
    }
    Ok(data)
}

fn video_hash(data: &VideoDataset) -> String {
    let mut bytes = Vec::new();
    for c in &data.clips {
        bytes.extend_from_slice(c.id.as_bytes());
        for f in &c.frames {
            bytes.extend(f.to_rgb8());
        }
    }
    sha256_hex(&bytes)[..16].to_string()
}

pub fn new_encoder(cfg: &RunConfig) -> Network {
    Network::new(&cfg.encoder_config(), seed::derive(cfg.seed, &[seed::tag("init")]))
}

/// Trains `cfg` on the benchmark under `cfg.data.root`.
pub fn run_pretrain(cfg: &RunConfig, opts: &PretrainOptions) -> Result<(PathBuf, RunManifest)> {
    let data = load_training_videos(cfg)?;
    run_pretrain_on(cfg, &data, opts)
}

/// Trains `cfg` on `data`, writing a run directory under `cfg.output_root` (or continuing
/// the one named by `opts.resume`).
pub fn run_pretrain_on(cfg: &RunConfig, data: &VideoDataset, opts: &PretrainOptions) -> Result<(PathBuf, RunManifest)> {
    let (run_dir, cfg, mut manifest) = match &opts.resume {
        Some(dir) => {
            let m = RunManifest::load(dir)?;
            if m.config_hash != cfg.hash() {
                return Err(Error::Config(vec![format!(
                    "resume: {} was created with config {} but the supplied config hashes to {}",
                    dir.display(),
                    m.config_hash,
                    cfg.hash()
                )]));
            }
            m.verify(dir)?;
            (dir.clone(), m.config.clone(), m)
        }
        None => {
            let dir = fresh_dir(&cfg.output_root.join(&cfg.name))?;
            let m = RunManifest {
                name: cfg.name.clone(),
                label: cfg.label(),
                config: cfg.clone(),
                config_hash: cfg.hash(),
                code_version: code_version(),
                dataset_hashes: BTreeMap::from([("train".to_string(), video_hash(data))]),
                schedule_table: schedule_table(&cfg.plan()?)?,
                checkpoints: Vec::new(),
                metrics_file: METRICS_FILE.into(),
                status: RunStatus::Running,
                epochs_completed: 0,
            };
            write_atomic(&dir.join(CONFIG_FILE), cfg.to_toml().as_bytes())?;
            m.save(&dir)?;
            write_metrics(&dir.join(METRICS_FILE), &[])?;
            (dir, cfg.clone(), m)
        }
    };
    if manifest.dataset_hashes.get("train").is_some_and(|h| *h != video_hash(data)) {
        return Err(Error::Data("training data differ from the data this run started with".into()));
    }
    let resolved = cfg.resolve()?;
    let mut trainer = Trainer::new(resolved.plan, resolved.train, new_encoder(&cfg), seed::derive(cfg.seed, &[seed::tag("train")]));
    let hash = manifest.config_hash.clone();
    if let Some(entry) = manifest.latest_checkpoint() {
        checkpoint::restore(&mut trainer, &run_dir.join(&entry.path), &hash)?;
        log::info!("resumed {} at epoch {}", run_dir.display(), trainer.epoch);
    }
    manifest.status = RunStatus::Running;
    manifest.save(&run_dir)?;

    let total = trainer.plan.total_epochs();
    let end = opts.stop_after.map_or(total, |s| s.min(total));
    let every = cfg.train.checkpoint_every;
    let meta = serde_json::json!({ "label": manifest.label, "encoder": cfg.encoder_config() });
    let result = trainer.fit(data, opts.stop_after, |t, _row| {
        write_metrics(&run_dir.join(METRICS_FILE), &t.history)?;
        let done = t.epoch;
        manifest.epochs_completed = done;
        if done % every == 0 || done == end {
            let rel = format!("checkpoints/epoch-{done:04}.ckpt");
            let bytes = checkpoint::encode(t, &hash, meta.clone())?;
            write_atomic(&run_dir.join(&rel), &bytes)?;
            manifest.checkpoints.retain(|c| c.epoch != done);
            manifest.checkpoints.push(CheckpointEntry { epoch: done, path: rel, sha256: sha256_hex(&bytes) });
        }
        manifest.save(&run_dir)
    });
    match result {
        Ok(()) => {
            manifest.status = if trainer.is_finished() { RunStatus::Complete } else { RunStatus::Partial };
            manifest.save(&run_dir)?;
            Ok((run_dir, manifest))
        }
        Err(Error::Divergence { epoch, detail, .. }) => {
            manifest.status = RunStatus::Diverged;
            manifest.save(&run_dir)?;
            let checkpoint = manifest.latest_checkpoint().map(|c| run_dir.join(&c.path));
            Err(Error::Divergence { epoch, detail, checkpoint })
        }
        Err(e) => Err(e),
    }
}

/// Loads the student weights of a checkpoint entry, checking its hash.
pub fn load_encoder(run_dir: &Path, manifest: &RunManifest, entry: &CheckpointEntry) -> Result<Network> {
    let path = run_dir.join(&entry.path);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(Error::Data(format!("{} does not match the hash in the run manifest", path.display())));
    }
    let mut net = new_encoder(&manifest.config);
    checkpoint::load_student(&mut net, &path)?;
    Ok(net)
}
