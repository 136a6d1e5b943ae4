use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_ppm, PatchRecord, PipelineError};

/// Class names of the two-class task; label 1 is the positive class.
pub const DEFAULT_CLASSES: [&str; 2] = ["normal", "abnormal"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: usize,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, class_names: Vec<String>) -> Result<Self, PipelineError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.source_id.is_empty() {
                return Err(PipelineError::InvalidInput(format!(
                    "{}: empty source id",
                    e.path.display()
                )));
            }
            if e.label >= class_names.len() {
                return Err(PipelineError::InvalidInput(format!(
                    "{}: label {} but only {} classes",
                    e.path.display(),
                    e.label,
                    class_names.len()
                )));
            }
            if !seen.insert(&e.path) {
                return Err(PipelineError::InvalidInput(format!(
                    "duplicate path {}",
                    e.path.display()
                )));
            }
        }
        Ok(DatasetManifest { entries, class_names })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn default_class_names(count: usize) -> Vec<String> {
    if count <= DEFAULT_CLASSES.len() {
        DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..count).map(|i| format!("class{i}")).collect()
    }
}

/// Parses manifest CSV (`path,label,source_id`, header required). Relative
/// paths are resolved against `base`.
pub fn parse_manifest(bytes: &[u8], base: &Path) -> Result<DatasetManifest, PipelineError> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "label", "source_id"] {
        return Err(PipelineError::Format(format!(
            "manifest header must be path,label,source_id, got {headers:?}"
        )));
    }
    let mut entries = Vec::new();
    for row in rdr.deserialize() {
        let mut e: ManifestEntry = row?;
        if e.path.as_os_str().is_empty() {
            return Err(PipelineError::InvalidInput("empty path in manifest".into()));
        }
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
        entries.push(e);
    }
    let classes = entries.iter().map(|e| e.label + 1).max().unwrap_or(0);
    DatasetManifest::new(entries, default_class_names(classes))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    parse_manifest(&bytes, path.parent().unwrap_or(Path::new("")))
}

/// Writes manifest CSV; paths under `base` are written relative to it.
pub fn write_manifest(manifest: &DatasetManifest, base: &Path) -> Result<Vec<u8>, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in &manifest.entries {
        let path = e.path.strip_prefix(base).unwrap_or(&e.path);
        w.serialize(ManifestEntry {
            path: path.to_path_buf(),
            label: e.label,
            source_id: e.source_id.clone(),
        })?;
    }
    if manifest.entries.is_empty() {
        w.write_record(["path", "label", "source_id"])?;
    }
    w.into_inner().map_err(|e| PipelineError::Format(e.to_string()))
}

/// Source id encoded in a patch file name `<source_id>__<patch-id>.ppm`.
pub fn source_id_from_name(name: &str) -> Option<&str> {
    let stem = name.strip_suffix(".ppm")?;
    let (source, patch) = stem.split_once("__")?;
    (!source.is_empty() && !patch.is_empty()).then_some(source)
}

/// Builds a manifest from `root/<class-name>/<source_id>__<patch-id>.ppm`.
/// Label `i` is `class_names[i]`; files are listed in name order.
pub fn scan_dataset(root: &Path, class_names: &[String]) -> Result<DatasetManifest, PipelineError> {
    let mut entries = Vec::new();
    for (label, class) in class_names.iter().enumerate() {
        let dir = root.join(class);
        let mut names = Vec::new();
        for item in fs::read_dir(&dir).map_err(|e| PipelineError::io(&dir, e))? {
            let item = item.map_err(|e| PipelineError::io(&dir, e))?;
            let name = item.file_name().to_string_lossy().into_owned();
            if name.ends_with(".ppm") {
                names.push(name);
            }
        }
        names.sort();
        for name in names {
            let source = source_id_from_name(&name)
                .ok_or_else(|| PipelineError::Format(format!("{name}: expected <source_id>__<patch-id>.ppm")))?;
            entries.push(ManifestEntry {
                path: dir.join(&name),
                label,
                source_id: source.to_string(),
            });
        }
    }
    DatasetManifest::new(entries, class_names.to_vec())
}

pub fn load_patch(entry: &ManifestEntry) -> Result<PatchRecord, PipelineError> {
    let bytes = fs::read(&entry.path).map_err(|e| PipelineError::io(&entry.path, e))?;
    let image = read_ppm(&bytes).map_err(|e| PipelineError::Format(format!("{}: {e}", entry.path.display())))?;
    Ok(PatchRecord::original(image, entry.label, entry.source_id.clone()))
}
