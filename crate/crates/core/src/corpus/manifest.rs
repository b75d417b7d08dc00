use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    A2c,
    A2cSpatial,
    Sa2c,
    Sa2cFused,
    /// Optical caption awaiting the rewrite stage.
    PairedRaw,
    PairedRewritten,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::A2c => "a2c",
            Method::A2cSpatial => "a2c_spatial",
            Method::Sa2c => "sa2c",
            Method::Sa2cFused => "sa2c_fused",
            Method::PairedRaw => "paired_raw",
            Method::PairedRewritten => "paired_rewritten",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionRecord {
    pub id: String,
    #[serde(rename = "image")]
    pub image_path: String,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_caption: Option<String>,
    pub method: Method,
    #[serde(rename = "source")]
    pub source_dataset: String,
    #[serde(rename = "fallback")]
    pub fallback_used: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub total: usize,
    pub per_source: BTreeMap<String, usize>,
    pub per_method: BTreeMap<String, usize>,
    /// Unix seconds.
    pub created: u64,
    pub pipeline_version: String,
    pub config_sha256: String,
}

/// Header fields that do not depend on the records.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ManifestInfo {
    pub created: u64,
    pub pipeline_version: String,
    pub config_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub header: ManifestHeader,
    pub records: Vec<CaptionRecord>,
}

/// Checks ids and captions and builds the header; record order is kept.
pub fn assemble(
    records: impl IntoIterator<Item = CaptionRecord>,
    info: &ManifestInfo,
) -> Result<CorpusManifest, CorpusError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in records {
        if record.caption.trim().is_empty() {
            return Err(CorpusError::EmptyCaption(record.id));
        }
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        out.push(record);
    }
    Ok(CorpusManifest {
        header: header_for(&out, info),
        records: out,
    })
}

fn header_for(records: &[CaptionRecord], info: &ManifestInfo) -> ManifestHeader {
    let mut per_source = BTreeMap::new();
    let mut per_method = BTreeMap::new();
    for r in records {
        *per_source.entry(r.source_dataset.clone()).or_insert(0) += 1;
        *per_method.entry(r.method.as_str().to_owned()).or_insert(0) += 1;
    }
    ManifestHeader {
        total: records.len(),
        per_source,
        per_method,
        created: info.created,
        pipeline_version: info.pipeline_version.clone(),
        config_sha256: info.config_sha256.clone(),
    }
}

impl CorpusManifest {
    pub fn info(&self) -> ManifestInfo {
        ManifestInfo {
            created: self.header.created,
            pipeline_version: self.header.pipeline_version.clone(),
            config_sha256: self.header.config_sha256.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes `path` (one record per line) and its `.header.json` sidecar.
    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        write_records(path, &self.records)?;
        let sidecar = header_path(path);
        let mut body = serde_json::to_string_pretty(&self.header).expect("header serializes");
        body.push('\n');
        std::fs::write(&sidecar, body).map_err(|source| CorpusError::Io {
            path: sidecar,
            source,
        })
    }
}

/// `dir/manifest.jsonl` pairs with `dir/manifest.header.json`.
pub fn header_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.header.json"))
}

pub fn write_records(path: &Path, records: &[CaptionRecord]) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_records(path: &Path) -> Result<Vec<CaptionRecord>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.to_owned(),
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Reads a manifest and its sidecar, re-checking ids and header counts.
pub fn read_manifest(path: &Path) -> Result<CorpusManifest, CorpusError> {
    let records = read_records(path)?;
    let sidecar = header_path(path);
    let text = std::fs::read_to_string(&sidecar).map_err(|source| CorpusError::Io {
        path: sidecar.clone(),
        source,
    })?;
    let header: ManifestHeader = serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
        path: sidecar.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let manifest = assemble(
        records,
        &ManifestInfo {
            created: header.created,
            pipeline_version: header.pipeline_version.clone(),
            config_sha256: header.config_sha256.clone(),
        },
    )?;
    if manifest.header != header {
        return Err(CorpusError::Parse {
            path: sidecar,
            line: 0,
            message: "header counts disagree with the records".into(),
        });
    }
    Ok(manifest)
}
