//! The synthetic benchmark: training videos, held-out test frames with their corrupted
//! copies, depth scenes, cue-conflict and silhouette probes, and the visual-cliff views.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corruptions::{self, build_corrupted_set, corrupt_in_memory, load_corrupted_set, CorruptionRecord, CorruptionType};
use crate::datasets::{
    gen_cliff_views, gen_cue_conflict, gen_depth_dataset, gen_rotation_videos, gen_silhouettes, ingest_image_folder, sample_test_frames,
    write_image_dataset, write_video_dataset, CliffConfig, DepthAnswer, ImageDataset, LabeledImage, VideoDataset, DEPTH_CLASSES,
};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::image::Image;
use crate::seed;

pub const SPEC_FILE: &str = "benchmark.json";
pub const PARTS: [&str; 6] = ["rotation", "depth", "cue_conflict", "silhouettes", "cliff", "corrupted"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub seed: u64,
    pub resolution: usize,
    pub classes: usize,
    pub train_videos_per_class: usize,
    pub test_videos_per_class: usize,
    pub frames_per_video: usize,
    /// Held-out frames drawn per test video.
    pub test_frames_per_clip: usize,
    /// Frames per training video used to fit classification probes.
    pub probe_frames_per_clip: usize,
    pub depth_train: usize,
    pub depth_test: usize,
    pub cue_conflict: usize,
    pub silhouettes: usize,
    pub corruptions: String,
    pub severities: String,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            resolution: 64,
            classes: 5,
            train_videos_per_class: 8,
            test_videos_per_class: 4,
            frames_per_video: 24,
            test_frames_per_clip: 6,
            probe_frames_per_clip: 10,
            depth_train: 2000,
            depth_test: 400,
            cue_conflict: 300,
            silhouettes: 300,
            corruptions: "all".into(),
            severities: "1-5".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub spec: BenchmarkSpec,
    pub train: VideoDataset,
    pub test_videos: VideoDataset,
    /// Sampled frames of the training videos, for probe fitting.
    pub probe_train: Vec<LabeledImage>,
    /// Sampled frames of the held-out videos.
    pub probe_test: Vec<LabeledImage>,
    pub depth_train: ImageDataset,
    pub depth_test: ImageDataset,
    pub cue_conflict: ImageDataset,
    pub silhouettes: ImageDataset,
    pub cliff: Vec<(Image, DepthAnswer)>,
    pub corrupted: Vec<(CorruptionRecord, Image)>,
}

fn quantize_videos(mut v: VideoDataset) -> VideoDataset {
    for c in &mut v.clips {
        c.frames.iter_mut().for_each(|f| *f = f.quantized());
    }
    v
}

fn quantize_images(mut d: ImageDataset) -> ImageDataset {
    d.items.iter_mut().for_each(|i| i.image = i.image.quantized());
    d
}

fn frames_of(videos: &VideoDataset, per_clip: usize, rng_seed: u64) -> Result<Vec<LabeledImage>> {
    let mut out = Vec::new();
    for clip in &videos.clips {
        let label = clip.label.ok_or_else(|| Error::Data(format!("clip `{}` has no label", clip.id)))?;
        let idx = sample_test_frames(clip.len(), per_clip.min(clip.len()), seed::derive(rng_seed, &[seed::tag(&clip.id)]))?;
        out.extend(idx.into_iter().map(|k| LabeledImage {
            id: format!("{}-f{k:03}", clip.id),
            image: clip.frames[k].clone(),
            label,
            texture_label: None,
        }));
    }
    Ok(out)
}

fn missing(root: &Path, part: &str) -> Error {
    Error::Data(format!(
        "benchmark dataset `{part}` not found under {}; create it with `devdiet synth --out {}`",
        root.display(),
        root.display()
    ))
}

impl Benchmark {
    /// Generates everything in memory. Images are 8-bit quantized so a written and
    /// reloaded benchmark is identical.
    pub fn synthesize(spec: &BenchmarkSpec) -> Result<Self> {
        let s = |tag: &str| seed::derive(spec.seed, &[seed::tag(tag)]);
        let r = spec.resolution;
        let train = quantize_videos(gen_rotation_videos(spec.classes, spec.train_videos_per_class, spec.frames_per_video, r, s("train"))?);
        let mut test_videos = quantize_videos(gen_rotation_videos(spec.classes, spec.test_videos_per_class, spec.frames_per_video, r, s("test"))?);
        test_videos.name = "rotation-test".into();
        let classes: Vec<usize> = (0..spec.classes).collect();
        let cliff = gen_cliff_views(&CliffConfig { resolution: r, ..CliffConfig::default() }, s("cliff"))?
            .into_iter()
            .map(|(img, a)| (img.quantized(), a))
            .collect();
        let mut b = Benchmark {
            spec: spec.clone(),
            probe_train: Vec::new(),
            probe_test: Vec::new(),
            depth_train: quantize_images(gen_depth_dataset(spec.depth_train, r, s("depth-train"))?),
            depth_test: quantize_images(gen_depth_dataset(spec.depth_test, r, s("depth-test"))?),
            cue_conflict: quantize_images(gen_cue_conflict(&classes, &classes, spec.cue_conflict, r, s("cue"))?),
            silhouettes: quantize_images(gen_silhouettes(&classes, spec.silhouettes, r, s("silhouettes"))?),
            cliff,
            corrupted: Vec::new(),
            train,
            test_videos,
        };
        b.derive_frames()?;
        let sources: Vec<(String, Image)> = b.probe_test.iter().map(|i| (i.id.clone(), i.image.clone())).collect();
        b.corrupted = corrupt_in_memory(&sources, &b.corruption_types()?, &b.severities()?, s("corrupt"))?;
        Ok(b)
    }

    fn derive_frames(&mut self) -> Result<()> {
        let s = self.spec.seed;
        self.probe_train = frames_of(&self.train, self.spec.probe_frames_per_clip, seed::derive(s, &[seed::tag("probe-frames")]))?;
        self.probe_test = frames_of(&self.test_videos, self.spec.test_frames_per_clip, seed::derive(s, &[seed::tag("test-frames")]))?;
        Ok(())
    }

    pub fn corruption_types(&self) -> Result<Vec<CorruptionType>> {
        corruptions::parse_types(&self.spec.corruptions)
    }

    pub fn severities(&self) -> Result<Vec<u8>> {
        corruptions::parse_severities(&self.spec.severities)
    }

    pub fn class_names(&self) -> &[String] {
        &self.train.class_names
    }

    /// Writes the benchmark under `root`, refusing to overwrite an existing one.
    pub fn write(&self, root: &Path) -> Result<()> {
        if root.join(SPEC_FILE).exists() {
            return Err(Error::Data(format!("{} already holds a benchmark; choose another --out", root.display())));
        }
        write_video_dataset(&root.join("rotation"), &[("train", &self.train), ("test", &self.test_videos)])?;
        write_image_dataset(&root.join("depth"), &[("train", &self.depth_train), ("test", &self.depth_test)])?;
        write_image_dataset(&root.join("cue_conflict"), &[("test", &self.cue_conflict)])?;
        write_image_dataset(&root.join("silhouettes"), &[("test", &self.silhouettes)])?;
        write_image_dataset(&root.join("cliff"), &[("test", &self.cliff_dataset())])?;
        let sources: Vec<(String, Image)> = self.probe_test.iter().map(|i| (i.id.clone(), i.image.clone())).collect();
        let s = seed::derive(self.spec.seed, &[seed::tag("corrupt")]);
        build_corrupted_set("rotation-test", &sources, &self.corruption_types()?, &self.severities()?, s, &root.join("corrupted"))?;
        let record = serde_json::json!({ "spec": self.spec, "hashes": self.hashes() });
        write_atomic(&root.join(SPEC_FILE), serde_json::to_string_pretty(&record)?.as_bytes())
    }

    fn cliff_dataset(&self) -> ImageDataset {
        ImageDataset {
            name: "cliff".into(),
            class_names: DEPTH_CLASSES.iter().map(|s| s.to_string()).collect(),
            items: self
                .cliff
                .iter()
                .enumerate()
                .map(|(i, (img, a))| LabeledImage { id: format!("cliff-view{}", i + 1), image: img.clone(), label: a.index(), texture_label: None })
                .collect(),
        }
    }

    /// Reloads a benchmark written by [`Benchmark::write`].
    pub fn load(root: &Path) -> Result<Self> {
        let spec_path = root.join(SPEC_FILE);
        if !spec_path.exists() {
            return Err(missing(root, "benchmark.json"));
        }
        for part in PARTS {
            if !root.join(part).is_dir() {
                return Err(missing(root, part));
            }
        }
        let record: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?)?;
        let spec: BenchmarkSpec =
            serde_json::from_value(record["spec"].clone()).map_err(|e| Error::ingest(&spec_path, e.to_string()))?;
        let rot = ingest_image_folder(&root.join("rotation"), None)?;
        let depth = ingest_image_folder(&root.join("depth"), None)?;
        let cliff = ingest_image_folder(&root.join("cliff"), None)?.images("test", "cliff");
        let (manifest, images) = load_corrupted_set(&root.join("corrupted"))?;
        let mut test_videos = rot.videos("test", "rotation-test");
        test_videos.name = "rotation-test".into();
        let mut b = Benchmark {
            train: rot.videos("train", "rotation"),
            test_videos,
            probe_train: Vec::new(),
            probe_test: Vec::new(),
            depth_train: depth.images("train", "depth"),
            depth_test: depth.images("test", "depth"),
            cue_conflict: ingest_image_folder(&root.join("cue_conflict"), None)?.images("test", "cue_conflict"),
            silhouettes: ingest_image_folder(&root.join("silhouettes"), None)?.images("test", "silhouettes"),
            cliff: cliff.items.into_iter().map(|i| (i.image, DepthAnswer::from_bool(i.label == DepthAnswer::Yes.index()))).collect(),
            corrupted: manifest.records.into_iter().zip(images).collect(),
            spec,
        };
        b.derive_frames()?;
        if let Some(stored) = record.get("hashes") {
            let now = serde_json::to_value(b.hashes())?;
            if *stored != now {
                return Err(Error::Data(format!("benchmark under {} does not match its recorded hashes", root.display())));
            }
        }
        Ok(b)
    }

    /// Content hash per dataset.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        fn h<'a>(items: impl Iterator<Item = (&'a str, &'a Image, usize)>) -> String {
            let mut d = Sha256::new();
            for (id, img, label) in items {
                d.update(id.as_bytes());
                d.update(label.to_le_bytes());
                d.update(img.to_rgb8());
            }
            hex::encode(&d.finalize()[..8])
        }
        fn vids(v: &VideoDataset) -> Vec<(&str, &Image, usize)> {
            v.clips.iter().flat_map(|c| c.frames.iter().map(move |f| (c.id.as_str(), f, c.label.unwrap_or(usize::MAX)))).collect()
        }
        fn imgs(d: &ImageDataset) -> Vec<(&str, &Image, usize)> {
            d.items.iter().map(|i| (i.id.as_str(), &i.image, i.label)).collect()
        }
        let mut out = BTreeMap::new();
        out.insert("train".into(), h(vids(&self.train).into_iter()));
        out.insert("test".into(), h(vids(&self.test_videos).into_iter()));
        out.insert("depth_train".into(), h(imgs(&self.depth_train).into_iter()));
        out.insert("depth_test".into(), h(imgs(&self.depth_test).into_iter()));
        out.insert("cue_conflict".into(), h(imgs(&self.cue_conflict).into_iter()));
        out.insert("silhouettes".into(), h(imgs(&self.silhouettes).into_iter()));
        out.insert("cliff".into(), h(self.cliff.iter().map(|(i, a)| ("cliff", i, a.index()))));
        out.insert("corrupted".into(), h(self.corrupted.iter().map(|(r, i)| (r.sha256.as_str(), i, r.severity as usize))));
        out
    }

    /// Source-image labels for the corrupted set.
    pub fn test_labels(&self) -> std::collections::HashMap<String, usize> {
        self.probe_test.iter().map(|i| (i.id.clone(), i.label)).collect()
    }
}
