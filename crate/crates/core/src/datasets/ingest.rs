//! On-disk datasets: a JSON-lines manifest of clips or images plus PNG files, and an
//! optional `classes.json` fixing the label order.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ImageDataset, LabeledImage, VideoClip, VideoDataset};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::image::Image;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CLASSES_FILE: &str = "classes.json";

/// One clip (`frame_paths`) or one image (`path`). Paths are relative to the dataset root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRow {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub split: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_paths: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuth: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture_label: Option<String>,
    /// Object instance the row depicts; defaults to `id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct IngestedDataset {
    pub class_names: Vec<String>,
    pub clips: Vec<(String, VideoClip)>,
    pub images: Vec<(String, LabeledImage)>,
}

impl IngestedDataset {
    pub fn is_empty(&self) -> bool {
        self.clips.is_empty() && self.images.is_empty()
    }

    pub fn splits(&self) -> BTreeSet<String> {
        self.clips.iter().map(|c| c.0.clone()).chain(self.images.iter().map(|i| i.0.clone())).collect()
    }

    pub fn videos(&self, split: &str, name: &str) -> VideoDataset {
        VideoDataset {
            name: name.into(),
            class_names: self.class_names.clone(),
            clips: self.clips.iter().filter(|c| c.0 == split).map(|c| c.1.clone()).collect(),
        }
    }

    pub fn images(&self, split: &str, name: &str) -> ImageDataset {
        ImageDataset {
            name: name.into(),
            class_names: self.class_names.clone(),
            items: self.images.iter().filter(|i| i.0 == split).map(|i| i.1.clone()).collect(),
        }
    }
}

fn parse_rows(manifest: &Path) -> Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::ingest(manifest, format!("line {}: {e}", n + 1))))
        .collect()
}

fn load_class_names(root: &Path, rows: &[ManifestRow]) -> Result<Vec<String>> {
    let path = root.join(CLASSES_FILE);
    if path.exists() {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        return serde_json::from_str(&text).map_err(|e| Error::ingest(&path, format!("expected a JSON array of names: {e}")));
    }
    let set: BTreeSet<String> = rows.iter().flat_map(|r| r.label.iter().chain(r.texture_label.iter()).cloned()).collect();
    Ok(set.into_iter().collect())
}

/// Loads a dataset folder. `manifest` defaults to `<root>/manifest.jsonl`. An empty folder
/// yields an empty dataset with a warning.
pub fn ingest_image_folder(root: &Path, manifest: Option<&Path>) -> Result<IngestedDataset> {
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let manifest: PathBuf = manifest.map(Path::to_path_buf).unwrap_or_else(|| root.join(MANIFEST_FILE));
    if !manifest.exists() {
        if entries.count() == 0 {
            log::warn!("{}: empty dataset folder", root.display());
            return Ok(IngestedDataset::default());
        }
        return Err(Error::ingest(&manifest, "manifest not found"));
    }
    let rows = parse_rows(&manifest)?;
    let class_names = load_class_names(root, &rows)?;
    let index: BTreeMap<&str, usize> = class_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let lookup = |name: &Option<String>, line: usize| -> Result<Option<usize>> {
        name.as_ref()
            .map(|n| index.get(n.as_str()).copied().ok_or_else(|| Error::ingest(&manifest, format!("line {line}: unknown label `{n}`"))))
            .transpose()
    };
    let load = |rel: &str, line: usize| -> Result<Image> {
        let p = root.join(rel);
        if !p.is_file() {
            return Err(Error::ingest(&p, format!("missing file referenced by manifest line {line}")));
        }
        Image::load(&p)
    };

    let mut out = IngestedDataset { class_names: class_names.clone(), ..Default::default() };
    let mut instance_split: BTreeMap<String, String> = BTreeMap::new();
    for (n, row) in rows.iter().enumerate() {
        let line = n + 1;
        let instance = row.instance.clone().unwrap_or_else(|| row.id.clone());
        if let Some(prev) = instance_split.insert(instance.clone(), row.split.clone()) {
            if prev != row.split {
                return Err(Error::Data(format!("instance `{instance}` appears in both `{prev}` and `{}` splits", row.split)));
            }
        }
        let label = lookup(&row.label, line)?;
        match (&row.frame_paths, &row.path) {
            (Some(paths), None) => {
                let frames = paths.iter().map(|p| load(p, line)).collect::<Result<Vec<_>>>()?;
                let times = match &row.azimuth {
                    Some(a) if a.len() == frames.len() => a.clone(),
                    Some(a) => {
                        return Err(Error::ingest(&manifest, format!("line {line}: {} azimuths for {} frames", a.len(), frames.len())))
                    }
                    None => (0..frames.len()).map(|i| i as f64).collect(),
                };
                let clip = VideoClip::new(row.id.clone(), label, frames, times)
                    .map_err(|e| Error::ingest(&manifest, format!("line {line}: {e}")))?;
                out.clips.push((row.split.clone(), clip));
            }
            (None, Some(p)) => {
                let label = label.ok_or_else(|| Error::ingest(&manifest, format!("line {line}: image rows need a label")))?;
                let image = load(p, line)?;
                let texture_label = lookup(&row.texture_label, line)?;
                out.images.push((row.split.clone(), LabeledImage { id: row.id.clone(), image, label, texture_label }));
            }
            _ => return Err(Error::ingest(&manifest, format!("line {line}: exactly one of `frame_paths` or `path` is required"))),
        }
    }
    Ok(out)
}

fn finish(root: &Path, class_names: &[String], rows: &[ManifestRow]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    write_atomic(&root.join(CLASSES_FILE), serde_json::to_string(class_names)?.as_bytes())?;
    write_atomic(&root.join(MANIFEST_FILE), text.as_bytes())
}

fn check_classes<'a>(mut names: impl Iterator<Item = &'a [String]>) -> Result<Vec<String>> {
    let first = names.next().map(<[String]>::to_vec).unwrap_or_default();
    if names.any(|n| n != first.as_slice()) {
        return Err(Error::Argument("all splits written to one folder must share class names".into()));
    }
    Ok(first)
}

/// Writes `frames/<clip id>/<k>.png` for each split plus manifest and class list.
pub fn write_video_dataset(root: &Path, splits: &[(&str, &VideoDataset)]) -> Result<()> {
    let classes = check_classes(splits.iter().map(|s| s.1.class_names.as_slice()))?;
    let mut rows = Vec::new();
    for (split, ds) in splits {
        for clip in &ds.clips {
            let mut paths = Vec::with_capacity(clip.len());
            for (k, f) in clip.frames.iter().enumerate() {
                let rel = format!("frames/{}/{k:03}.png", clip.id);
                f.save_png(&root.join(&rel))?;
                paths.push(rel);
            }
            rows.push(ManifestRow {
                id: clip.id.clone(),
                label: clip.label.map(|l| classes[l].clone()),
                split: split.to_string(),
                frame_paths: Some(paths),
                path: None,
                azimuth: Some(clip.times.clone()),
                texture_label: None,
                instance: None,
            });
        }
    }
    finish(root, &classes, &rows)
}

/// Writes `images/<id>.png` for each split plus manifest and class list.
pub fn write_image_dataset(root: &Path, splits: &[(&str, &ImageDataset)]) -> Result<()> {
    let classes = check_classes(splits.iter().map(|s| s.1.class_names.as_slice()))?;
    let mut rows = Vec::new();
    for (split, ds) in splits {
        for item in &ds.items {
            let rel = format!("images/{}.png", item.id);
            item.image.save_png(&root.join(&rel))?;
            rows.push(ManifestRow {
                id: item.id.clone(),
                label: Some(classes[item.label].clone()),
                split: split.to_string(),
                frame_paths: None,
                path: Some(rel),
                azimuth: None,
                texture_label: item.texture_label.map(|t| classes[t].clone()),
                instance: None,
            });
        }
    }
    finish(root, &classes, &rows)
}
