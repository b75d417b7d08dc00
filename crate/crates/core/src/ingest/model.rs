//! Canonical sample model shared by every adapter.
//!
//! Samples are exchanged between stages as line-delimited JSON. The record
//! layout is flat (`task` plus optional `detections` / `mask` /
//! `optical_caption` keys) so the files stay greppable; [`AnnotatedSample`]
//! is the typed view of one line.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Axis-aligned box in pixel corner form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BoundingBox {
    /// Builds a box, rejecting empty or inverted extents.
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self, String> {
        if x_min >= x_max || y_min >= y_max {
            return Err(format!(
                "degenerate box [{x_min}, {y_min}, {x_max}, {y_max}]"
            ));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Converts a COCO-style `(x, y, w, h)` box, rounding to whole pixels.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self, String> {
        if !(w > 0.0 && h > 0.0) {
            return Err(format!("non-positive box size w={w} h={h}"));
        }
        if !(x >= 0.0 && y >= 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(format!("negative box origin x={x} y={y}"));
        }
        let x_min = x.round();
        let y_min = y.round();
        let x_max = (x + w).round();
        let y_max = (y + h).round();
        if x_max > f64::from(u32::MAX) || y_max > f64::from(u32::MAX) {
            return Err("box coordinates overflow".into());
        }
        Self::new(x_min as u32, y_min as u32, x_max as u32, y_max as u32)
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.x_max <= width && self.y_max <= height
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionObject {
    /// Lowercase singular class name.
    pub class_label: String,
    pub bbox: BoundingBox,
}

impl DetectionObject {
    pub fn new(class_label: impl Into<String>, bbox: BoundingBox) -> Self {
        Self {
            class_label: class_label.into(),
            bbox,
        }
    }
}

/// Color-triple to category table for segmentation masks.
///
/// Several colors may map to the same category; proportions aggregate by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MappingEntry>", into = "Vec<MappingEntry>")]
pub struct CategoryMapping {
    entries: Vec<([u8; 3], String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingEntry {
    pub color: [u8; 3],
    pub category: String,
}

impl CategoryMapping {
    pub fn new(entries: Vec<([u8; 3], String)>) -> Result<Self, IngestError> {
        if entries.is_empty() {
            return Err(IngestError::InvalidMapping("mapping has no entries".into()));
        }
        for (i, (color, category)) in entries.iter().enumerate() {
            if category.trim().is_empty() {
                return Err(IngestError::InvalidMapping(format!(
                    "entry {i} has an empty category"
                )));
            }
            if entries[..i].iter().any(|(c, _)| c == color) {
                return Err(IngestError::InvalidMapping(format!(
                    "color {color:?} mapped twice"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[([u8; 3], String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct category names in first-appearance order.
    pub fn categories(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (_, name) in &self.entries {
            if !out.contains(&name.as_str()) {
                out.push(name);
            }
        }
        out
    }
}

impl TryFrom<Vec<MappingEntry>> for CategoryMapping {
    type Error = IngestError;

    fn try_from(value: Vec<MappingEntry>) -> Result<Self, Self::Error> {
        Self::new(value.into_iter().map(|e| (e.color, e.category)).collect())
    }
}

impl From<CategoryMapping> for Vec<MappingEntry> {
    fn from(value: CategoryMapping) -> Self {
        value
            .entries
            .into_iter()
            .map(|(color, category)| MappingEntry { color, category })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Detection,
    Segmentation,
    Paired,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Detection => "detection",
            Task::Segmentation => "segmentation",
            Task::Paired => "paired",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Detections(Vec<DetectionObject>),
    /// Segmentation mask, optionally with a caption of the co-registered
    /// optical image used later for fusion.
    Mask {
        path: PathBuf,
        optical_caption: Option<String>,
    },
    Paired {
        optical_caption: String,
    },
}

impl Payload {
    pub fn task(&self) -> Task {
        match self {
            Payload::Detections(_) => Task::Detection,
            Payload::Mask { .. } => Task::Segmentation,
            Payload::Paired { .. } => Task::Paired,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSample {
    pub id: String,
    pub image_path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub source_dataset: String,
    pub payload: Payload,
}

impl AnnotatedSample {
    pub fn task(&self) -> Task {
        self.payload.task()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    id: String,
    image: String,
    width: u32,
    height: u32,
    source: String,
    task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detections: Option<Vec<DetectionRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    optical_caption: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionRecord {
    class: String,
    #[serde(rename = "box")]
    bbox: [u32; 4],
}

impl From<&AnnotatedSample> for SampleRecord {
    fn from(s: &AnnotatedSample) -> Self {
        let mut record = SampleRecord {
            id: s.id.clone(),
            image: s.image_path.to_string_lossy().into_owned(),
            width: s.width,
            height: s.height,
            source: s.source_dataset.clone(),
            task: s.task(),
            detections: None,
            mask: None,
            optical_caption: None,
        };
        match &s.payload {
            Payload::Detections(objects) => {
                record.detections = Some(
                    objects
                        .iter()
                        .map(|o| DetectionRecord {
                            class: o.class_label.clone(),
                            bbox: o.bbox.as_array(),
                        })
                        .collect(),
                );
            }
            Payload::Mask {
                path,
                optical_caption,
            } => {
                record.mask = Some(path.to_string_lossy().into_owned());
                record.optical_caption = optical_caption.clone();
            }
            Payload::Paired { optical_caption } => {
                record.optical_caption = Some(optical_caption.clone());
            }
        }
        record
    }
}

impl TryFrom<SampleRecord> for AnnotatedSample {
    type Error = String;

    fn try_from(r: SampleRecord) -> Result<Self, Self::Error> {
        let payload = match r.task {
            Task::Detection => {
                if r.mask.is_some() || r.optical_caption.is_some() {
                    return Err(format!(
                        "{}: detection record carries foreign payload",
                        r.id
                    ));
                }
                let objects = r
                    .detections
                    .unwrap_or_default()
                    .into_iter()
                    .map(|d| {
                        let [x0, y0, x1, y1] = d.bbox;
                        BoundingBox::new(x0, y0, x1, y1).map(|b| DetectionObject::new(d.class, b))
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| format!("{}: {e}", r.id))?;
                Payload::Detections(objects)
            }
            Task::Segmentation => {
                if r.detections.is_some() {
                    return Err(format!("{}: segmentation record carries detections", r.id));
                }
                let path = r
                    .mask
                    .ok_or_else(|| format!("{}: segmentation record without mask", r.id))?;
                Payload::Mask {
                    path: PathBuf::from(path),
                    optical_caption: r.optical_caption,
                }
            }
            Task::Paired => {
                if r.detections.is_some() || r.mask.is_some() {
                    return Err(format!("{}: paired record carries foreign payload", r.id));
                }
                Payload::Paired {
                    optical_caption: r
                        .optical_caption
                        .ok_or_else(|| format!("{}: paired record without caption", r.id))?,
                }
            }
        };
        Ok(AnnotatedSample {
            id: r.id,
            image_path: PathBuf::from(r.image),
            width: r.width,
            height: r.height,
            source_dataset: r.source,
            payload,
        })
    }
}

/// Serializes one sample as a single JSON line (no trailing newline).
pub fn sample_to_json(sample: &AnnotatedSample) -> String {
    serde_json::to_string(&SampleRecord::from(sample)).expect("sample record serializes")
}

pub fn sample_from_json(line: &str) -> Result<AnnotatedSample, IngestError> {
    let record: SampleRecord =
        serde_json::from_str(line).map_err(|e| IngestError::MalformedDocument {
            path: PathBuf::from("<sample line>"),
            message: e.to_string(),
        })?;
    AnnotatedSample::try_from(record).map_err(|message| IngestError::MalformedDocument {
        path: PathBuf::from("<sample line>"),
        message,
    })
}

pub fn write_samples<W: Write>(mut out: W, samples: &[AnnotatedSample]) -> std::io::Result<()> {
    for sample in samples {
        writeln!(out, "{}", sample_to_json(sample))?;
    }
    Ok(())
}

pub fn read_samples<R: BufRead>(input: R) -> Result<Vec<AnnotatedSample>, IngestError> {
    let mut samples = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io {
            path: PathBuf::from("<samples>"),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = sample_from_json(&line).map_err(|e| match e {
            IngestError::MalformedDocument { message, .. } => IngestError::MalformedDocument {
                path: PathBuf::from(format!("<samples line {}>", lineno + 1)),
                message,
            },
            other => other,
        })?;
        samples.push(sample);
    }
    Ok(samples)
}
