//! Loading image catalogs, embedding sidecars and caption files.
//!
//! A dataset root is laid out by image role:
//!
//! ```text
//! root/
//! ├── targets/   stylized target images
//! ├── content/   content references
//! └── styles/    style references
//! ```
//!
//! An image's id is its path inside the role directory without the
//! extension, `/`-separated (`targets/ink/0003.png` has id `ink/0003`).
//! Dimensions come from the file header; pixels are never decoded.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::datamodel::{parse_ndjson, read_ndjson, EmbeddingKind, EmbeddingVector, ImageKind, ImageRecord};
use crate::error::{Error, Result};

pub const ROLE_DIRS: [(&str, ImageKind); 3] = [
    ("targets", ImageKind::StylizedTarget),
    ("content", ImageKind::ContentRef),
    ("styles", ImageKind::StyleRef),
];

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "webp", "bmp", "gif"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageCatalog {
    pub records: BTreeMap<String, ImageRecord>,
    /// Cluster id to member target ids, sorted.
    pub clusters: BTreeMap<String, Vec<String>>,
}

impl ImageCatalog {
    /// Builds a catalog from records, deriving clusters from `style_cluster`.
    pub fn from_records(records: impl IntoIterator<Item = ImageRecord>) -> Result<Self> {
        let mut catalog = ImageCatalog::default();
        for record in records {
            if record.width == 0 || record.height == 0 {
                return Err(Error::InvalidDimensions(format!(
                    "image {} is {}x{}",
                    record.id, record.width, record.height
                )));
            }
            if let Some(prev) = catalog.records.get(&record.id) {
                return Err(Error::DuplicateImage {
                    id: record.id.clone(),
                    first: PathBuf::from(&prev.path),
                    second: PathBuf::from(&record.path),
                });
            }
            if let Some(cluster) = &record.style_cluster {
                if record.kind != ImageKind::StylizedTarget {
                    return Err(Error::InvalidConfig(format!(
                        "image {} is clustered but is not a stylized target",
                        record.id
                    )));
                }
                catalog
                    .clusters
                    .entry(cluster.clone())
                    .or_default()
                    .push(record.id.clone());
            }
            catalog.records.insert(record.id.clone(), record);
        }
        for members in catalog.clusters.values_mut() {
            members.sort();
        }
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_records(read_ndjson::<ImageRecord>(path)?)
    }

    /// One record per line, ordered by id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let records: Vec<&ImageRecord> = self.records.values().collect();
        crate::datamodel::write_ndjson(path, &records)
    }

    pub fn ids(&self) -> BTreeSet<String> {
        self.records.keys().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.records.get(id)
    }

    pub fn of_kind(&self, kind: ImageKind) -> impl Iterator<Item = &ImageRecord> {
        self.records.values().filter(move |r| r.kind == kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub images: usize,
    pub clusters: usize,
    pub unclustered_targets: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterAssignment {
    pub image_id: String,
    pub cluster_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedImage {
    pub kind: ImageKind,
    /// Relative to the dataset root.
    pub rel_path: PathBuf,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn rel_slash(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Maps every image under the role directories of `root` to its id.
pub fn index_images(root: &Path) -> Result<BTreeMap<String, IndexedImage>> {
    if !root.is_dir() {
        return Err(Error::MissingFiles {
            paths: vec![root.to_path_buf()],
        });
    }
    let present: Vec<_> = ROLE_DIRS
        .iter()
        .filter(|(dir, _)| root.join(dir).is_dir())
        .collect();
    if present.is_empty() {
        return Err(Error::MissingFiles {
            paths: ROLE_DIRS.iter().map(|(d, _)| root.join(d)).collect(),
        });
    }
    let mut index: BTreeMap<String, IndexedImage> = BTreeMap::new();
    for (dir, kind) in present {
        let base = root.join(dir);
        for entry in WalkDir::new(&base).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| base.clone());
                Error::io(path, e.into())
            })?;
            if !entry.file_type().is_file() || !is_image(entry.path()) {
                continue;
            }
            let within = entry.path().strip_prefix(&base).expect("walk stays under base");
            let id = rel_slash(&within.with_extension(""));
            let rel_path = entry.path().strip_prefix(root).expect("walk stays under root").to_path_buf();
            if let Some(prev) = index.get(&id) {
                return Err(Error::DuplicateImage {
                    id,
                    first: prev.rel_path.clone(),
                    second: rel_path,
                });
            }
            index.insert(id, IndexedImage { kind: *kind, rel_path });
        }
    }
    Ok(index)
}

fn image_dimensions(path: &Path) -> Result<(u32, u32)> {
    let header_err = |message: String| Error::ImageHeader {
        path: path.to_path_buf(),
        message,
    };
    let (w, h) = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .into_dimensions()
        .map_err(|e| header_err(e.to_string()))?;
    if w == 0 || h == 0 {
        return Err(header_err(format!("zero-sized image {w}x{h}")));
    }
    Ok((w, h))
}

/// Scans `root` and assigns stylized targets to clusters from
/// `cluster_index` (one `{image_id, cluster_id}` record per line).
pub fn scan_dataset(root: &Path, cluster_index: &Path) -> Result<(ImageCatalog, ScanReport)> {
    let index = index_images(root)?;
    if !cluster_index.is_file() {
        return Err(Error::MissingFiles {
            paths: vec![cluster_index.to_path_buf()],
        });
    }
    let assignments: Vec<ClusterAssignment> = read_ndjson(cluster_index)?;

    let mut cluster_of: BTreeMap<&str, &str> = BTreeMap::new();
    let mut dangling = BTreeSet::new();
    for a in &assignments {
        match index.get(&a.image_id) {
            None => {
                dangling.insert(a.image_id.clone());
            }
            Some(img) if img.kind != ImageKind::StylizedTarget => {
                return Err(Error::InvalidConfig(format!(
                    "cluster index assigns {} which is not a stylized target",
                    a.image_id
                )));
            }
            Some(_) => {
                if let Some(prev) = cluster_of.insert(&a.image_id, &a.cluster_id) {
                    if prev != a.cluster_id {
                        return Err(Error::InvalidConfig(format!(
                            "image {} assigned to clusters {prev} and {}",
                            a.image_id, a.cluster_id
                        )));
                    }
                }
            }
        }
    }
    if !dangling.is_empty() {
        return Err(Error::DanglingClusterMembers {
            ids: dangling.into_iter().collect(),
        });
    }

    let mut records = Vec::with_capacity(index.len());
    for (id, img) in &index {
        let (width, height) = image_dimensions(&root.join(&img.rel_path))?;
        records.push(ImageRecord {
            id: id.clone(),
            path: rel_slash(&img.rel_path),
            width,
            height,
            kind: img.kind,
            style_cluster: cluster_of.get(id.as_str()).map(|c| c.to_string()),
            caption_id: None,
        });
    }
    let catalog = ImageCatalog::from_records(records)?;

    let mut report = ScanReport {
        images: catalog.records.len(),
        clusters: catalog.clusters.len(),
        ..Default::default()
    };
    report.unclustered_targets = catalog
        .of_kind(ImageKind::StylizedTarget)
        .filter(|r| r.style_cluster.is_none())
        .map(|r| r.id.clone())
        .collect();
    if assignments.is_empty() {
        report.warnings.push(format!("{} is empty; no clusters", cluster_index.display()));
    }
    if !report.unclustered_targets.is_empty() {
        report.warnings.push(format!(
            "{} stylized target(s) are not in any cluster",
            report.unclustered_targets.len()
        ));
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok((catalog, report))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    entries: BTreeMap<(String, EmbeddingKind), EmbeddingVector>,
    dims: BTreeMap<EmbeddingKind, usize>,
    /// Optional sidecar header objects, keyed by file path.
    headers: BTreeMap<String, serde_json::Value>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_expected_dims(dims: BTreeMap<EmbeddingKind, usize>) -> Self {
        Self {
            dims,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self, kind: EmbeddingKind) -> Option<usize> {
        self.dims.get(&kind).copied()
    }

    pub fn headers(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.headers
    }

    pub fn get(&self, owner_id: &str, kind: EmbeddingKind) -> Option<&EmbeddingVector> {
        self.entries.get(&(owner_id.to_string(), kind))
    }

    pub fn iter(&self) -> impl Iterator<Item = &EmbeddingVector> {
        self.entries.values()
    }

    /// Adds a vector, enforcing the per-kind dim and key uniqueness.
    pub fn insert(&mut self, v: EmbeddingVector) -> Result<()> {
        self.insert_at(v, Path::new("<memory>"), 0)
    }

    fn insert_at(&mut self, v: EmbeddingVector, path: &Path, line: usize) -> Result<()> {
        if v.values.len() != v.dim {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("dim is {} but {} values given", v.dim, v.values.len()),
            });
        }
        v.check()?;
        match self.dims.get(&v.kind) {
            Some(&expected) if expected != v.dim => {
                return Err(Error::DimMismatch {
                    path: path.to_path_buf(),
                    line,
                    kind: v.kind,
                    expected,
                    found: v.dim,
                });
            }
            Some(_) => {}
            None => {
                self.dims.insert(v.kind, v.dim);
            }
        }
        let key = (v.owner_id.clone(), v.kind);
        if self.entries.contains_key(&key) {
            return Err(Error::DuplicateEmbedding {
                path: path.to_path_buf(),
                line,
                owner_id: key.0,
                kind: key.1,
            });
        }
        self.entries.insert(key, v);
        Ok(())
    }

    fn load_text(&mut self, text: &str, path: &Path) -> Result<()> {
        let mut first = true;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let value: serde_json::Value = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
            if first {
                first = false;
                if let Some(obj) = value.as_object() {
                    if obj.len() == 1 && obj.contains_key("header") {
                        self.headers.insert(path.display().to_string(), obj["header"].clone());
                        continue;
                    }
                }
            }
            let v: EmbeddingVector = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
            self.insert_at(v, path, i + 1)?;
        }
        Ok(())
    }
}

/// Loads embedding sidecars. `expected` pins the dim per kind; kinds not
/// listed take the dim of their first vector.
pub fn load_embeddings(paths: &[PathBuf], expected: &BTreeMap<EmbeddingKind, usize>) -> Result<EmbeddingStore> {
    let mut store = EmbeddingStore::with_expected_dims(expected.clone());
    for path in paths {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        store.load_text(&text, path)?;
    }
    Ok(store)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caption {
    pub image_id: String,
    pub caption_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaptionReport {
    pub required: usize,
    pub covered: usize,
    pub coverage: f64,
    /// Caption records naming images absent from the catalog.
    pub unknown_images: Vec<String>,
}

pub fn load_captions(path: &Path) -> Result<Vec<Caption>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ndjson(&text, path)
}

/// Sets `caption_id` on catalog records. Every id in `required` (all content
/// references when `None`) must end up captioned.
pub fn attach_caption_records(
    mut catalog: ImageCatalog,
    captions: &[Caption],
    required: Option<&[String]>,
) -> Result<(ImageCatalog, CaptionReport)> {
    let mut seen = BTreeSet::new();
    let mut unknown = Vec::new();
    for c in captions {
        if !seen.insert(c.image_id.as_str()) {
            return Err(Error::DuplicateId(c.image_id.clone()));
        }
        match catalog.records.get_mut(&c.image_id) {
            Some(record) => record.caption_id = Some(c.caption_id.clone()),
            None => unknown.push(c.image_id.clone()),
        }
    }
    let required: Vec<String> = match required {
        Some(ids) => ids.to_vec(),
        None => catalog.of_kind(ImageKind::ContentRef).map(|r| r.id.clone()).collect(),
    };
    let missing: Vec<String> = required
        .iter()
        .filter(|id| {
            catalog
                .records
                .get(id.as_str())
                .and_then(|r| r.caption_id.as_ref())
                .is_none()
        })
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingCaptions { ids: missing });
    }
    for id in &unknown {
        log::warn!("caption for unknown image {id}");
    }
    let report = CaptionReport {
        required: required.len(),
        covered: required.len(),
        coverage: 1.0,
        unknown_images: unknown,
    };
    Ok((catalog, report))
}

pub fn attach_captions(
    catalog: ImageCatalog,
    captions: &Path,
    required: Option<&[String]>,
) -> Result<(ImageCatalog, CaptionReport)> {
    let records = load_captions(captions)?;
    attach_caption_records(catalog, &records, required)
}
