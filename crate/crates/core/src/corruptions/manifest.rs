//! Building, storing, and reloading corrupted copies of a dataset.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{corrupt, registry_version, CorruptionSpec, CorruptionType};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::image::Image;
use crate::seed;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const HEADER_FILE: &str = "corrupted_set.json";

/// One corrupted image, one JSON line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub image_id: String,
    #[serde(rename = "type")]
    pub kind: CorruptionType,
    pub severity: u8,
    pub seed: u64,
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptedDatasetManifest {
    pub source: String,
    pub registry_version: String,
    pub records: Vec<CorruptionRecord>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    source: String,
    registry_version: String,
    rows: usize,
}

/// Seed for one cell; independent of iteration order and worker assignment.
pub fn cell_seed(global: u64, image_id: &str, kind: CorruptionType, severity: u8) -> u64 {
    seed::derive(global, &[seed::tag(image_id), kind.index() as u64, severity as u64])
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

fn cells<'a>(
    images: &'a [(String, Image)],
    types: &'a [CorruptionType],
    severities: &'a [u8],
) -> impl Iterator<Item = (&'a String, &'a Image, CorruptionType, u8)> + 'a {
    images
        .iter()
        .flat_map(move |(id, img)| types.iter().flat_map(move |&t| severities.iter().map(move |&s| (id, img, t, s))))
}

/// Corrupts every `(image, type, severity)` cell in memory, quantized to 8 bits.
pub fn corrupt_in_memory(
    images: &[(String, Image)],
    types: &[CorruptionType],
    severities: &[u8],
    global_seed: u64,
) -> Result<Vec<(CorruptionRecord, Image)>> {
    if images.is_empty() {
        return Err(Error::Data("cannot corrupt an empty dataset".into()));
    }
    cells(images, types, severities)
        .map(|(id, img, t, s)| {
            let spec = CorruptionSpec::new(t, s, cell_seed(global_seed, id, t, s))?;
            let out = corrupt(img, &spec)?.quantized();
            let sha = sha256_hex(&out.encode_png());
            let rec = CorruptionRecord { image_id: id.clone(), kind: t, severity: s, seed: spec.seed, path: String::new(), sha256: sha };
            Ok((rec, out))
        })
        .collect()
}

/// Writes `<type>/<severity>/<id>.png` files plus the JSON-lines manifest under `out_dir`.
pub fn build_corrupted_set(
    source: &str,
    images: &[(String, Image)],
    types: &[CorruptionType],
    severities: &[u8],
    global_seed: u64,
    out_dir: &Path,
) -> Result<CorruptedDatasetManifest> {
    if images.is_empty() {
        return Err(Error::Data(format!("dataset `{source}` is empty; nothing to corrupt")));
    }
    let mut records = Vec::new();
    for (id, img, t, s) in cells(images, types, severities) {
        let spec = CorruptionSpec::new(t, s, cell_seed(global_seed, id, t, s))?;
        let bytes = corrupt(img, &spec)?.encode_png();
        let rel = format!("{}/{}/{}.png", t.name(), s, file_stem(id));
        let path = out_dir.join(&rel);
        std::fs::create_dir_all(path.parent().expect("nested path")).map_err(|e| Error::io(&path, e))?;
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        records.push(CorruptionRecord {
            image_id: id.clone(),
            kind: t,
            severity: s,
            seed: spec.seed,
            path: rel,
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = CorruptedDatasetManifest { source: source.to_string(), registry_version: registry_version(), records };
    let mut lines = Vec::new();
    for r in &manifest.records {
        serde_json::to_writer(&mut lines, r)?;
        lines.push(b'\n');
    }
    write_atomic(&out_dir.join(MANIFEST_FILE), &lines)?;
    let header = Header { source: manifest.source.clone(), registry_version: manifest.registry_version.clone(), rows: manifest.records.len() };
    write_atomic(&out_dir.join(HEADER_FILE), serde_json::to_string_pretty(&header)?.as_bytes())?;
    Ok(manifest)
}

/// Reloads a corrupted set, checking every file against its recorded hash.
pub fn load_corrupted_set(dir: &Path) -> Result<(CorruptedDatasetManifest, Vec<Image>)> {
    let header_path = dir.join(HEADER_FILE);
    let header: Header = serde_json::from_slice(&std::fs::read(&header_path).map_err(|e| Error::io(&header_path, e))?)
        .map_err(|e| Error::ingest(&header_path, e.to_string()))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut records = Vec::new();
    let mut images = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: CorruptionRecord =
            serde_json::from_str(line).map_err(|e| Error::ingest(&manifest_path, format!("line {}: {e}", n + 1)))?;
        let path = dir.join(&rec.path);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if sha256_hex(&bytes) != rec.sha256 {
            return Err(Error::ingest(&path, "content hash does not match the manifest"));
        }
        images.push(Image::decode(&bytes).map_err(|m| Error::ingest(&path, m))?);
        records.push(rec);
    }
    if records.len() != header.rows {
        return Err(Error::ingest(&manifest_path, format!("{} rows, header declares {}", records.len(), header.rows)));
    }
    Ok((CorruptedDatasetManifest { source: header.source, registry_version: header.registry_version, records }, images))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruptions::tests::fixture;

    fn images(n: usize) -> Vec<(String, Image)> {
        (0..n).map(|i| (format!("img{i}"), fixture(24, i as f32 * 0.3))).collect()
    }

    #[test]
    fn product_counts_and_subsets() {
        let imgs = images(10);
        let all = corrupt_in_memory(&imgs, &CorruptionType::ALL, &[1, 2, 3, 4, 5], 1).unwrap();
        assert_eq!(all.len(), 750);
        let mut seen = std::collections::HashSet::new();
        assert!(all.iter().all(|(r, _)| seen.insert((r.image_id.clone(), r.kind, r.severity))));
        assert_eq!(corrupt_in_memory(&imgs, &CorruptionType::ALL, &[1, 3, 5], 1).unwrap().len(), 450);
        assert!(corrupt_in_memory(&[], &CorruptionType::ALL, &[1], 1).is_err());
    }

    #[test]
    fn regeneration_is_identical_and_order_independent() {
        let imgs = images(3);
        let dir = tempfile::tempdir().unwrap();
        let types = [CorruptionType::GaussianNoise, CorruptionType::Fog, CorruptionType::Jpeg];
        let a = build_corrupted_set("fx", &imgs, &types, &[1, 5], 9, &dir.path().join("a")).unwrap();
        let mut rev = imgs.clone();
        rev.reverse();
        let b = build_corrupted_set("fx", &rev, &types, &[1, 5], 9, &dir.path().join("b")).unwrap();
        let key = |m: &CorruptedDatasetManifest| {
            let mut v: Vec<_> = m.records.iter().map(|r| (r.path.clone(), r.sha256.clone(), r.seed)).collect();
            v.sort();
            v
        };
        assert_eq!(key(&a), key(&b));
        let (loaded, imgs_back) = load_corrupted_set(&dir.path().join("a")).unwrap();
        assert_eq!(loaded, a);
        assert_eq!(imgs_back.len(), a.records.len());
        let mem = corrupt_in_memory(&imgs, &types, &[1, 5], 9).unwrap();
        for ((rec, img), disk) in mem.iter().zip(&imgs_back) {
            assert_eq!(img, disk);
            assert_eq!(rec.sha256, a.records.iter().find(|r| r.image_id == rec.image_id && r.kind == rec.kind && r.severity == rec.severity).unwrap().sha256);
        }
    }

    #[test]
    fn tampered_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_corrupted_set("fx", &images(1), &[CorruptionType::Contrast], &[2], 0, dir.path()).unwrap();
        std::fs::write(dir.path().join(&m.records[0].path), b"junk").unwrap();
        let err = load_corrupted_set(dir.path()).unwrap_err();
        assert!(err.to_string().contains("hash"), "{err}");
    }
}
