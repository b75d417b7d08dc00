//! COCO-style detection JSON (`images`, `annotations`, `categories`).

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::labels::normalize_label;
use super::model::{AnnotatedSample, BoundingBox, DetectionObject, Payload};
use super::IngestError;

#[derive(Deserialize)]
struct CocoDocument {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
}

#[derive(Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

/// Reads a COCO-style detection file; image paths resolve against the file's
/// directory.
pub fn parse_detection_coco(
    path: &Path,
    source: &str,
) -> Result<Vec<AnnotatedSample>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_detection_coco_str(&text, path, source)
}

pub fn parse_detection_coco_str(
    text: &str,
    path: &Path,
    source: &str,
) -> Result<Vec<AnnotatedSample>, IngestError> {
    let doc: CocoDocument =
        serde_json::from_str(text).map_err(|e| IngestError::MalformedDocument {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));

    let categories: HashMap<u64, String> = doc
        .categories
        .iter()
        .map(|c| (c.id, normalize_label(&c.name)))
        .collect();
    let image_index: HashMap<u64, usize> = doc
        .images
        .iter()
        .enumerate()
        .map(|(i, img)| (img.id, i))
        .collect();

    let mut objects: Vec<Vec<DetectionObject>> = vec![Vec::new(); doc.images.len()];
    for (n, ann) in doc.annotations.iter().enumerate() {
        let &slot =
            image_index
                .get(&ann.image_id)
                .ok_or_else(|| IngestError::DanglingReference {
                    path: path.to_owned(),
                    message: format!(
                        "annotation {n} references unknown image id {}",
                        ann.image_id
                    ),
                })?;
        let label =
            categories
                .get(&ann.category_id)
                .ok_or_else(|| IngestError::DanglingReference {
                    path: path.to_owned(),
                    message: format!(
                        "annotation {n} references unknown category id {}",
                        ann.category_id
                    ),
                })?;
        let image = &doc.images[slot];
        let [x, y, w, h] = ann.bbox;
        let bbox = BoundingBox::from_xywh(x, y, w, h)
            .and_then(|b| clamp_to_image(b, image.width, image.height))
            .map_err(|message| IngestError::InvalidBox {
                path: path.to_owned(),
                message: format!("annotation {n}: {message}"),
            })?;
        objects[slot].push(DetectionObject::new(label.clone(), bbox));
    }

    Ok(doc
        .images
        .into_iter()
        .zip(objects)
        .map(|(image, detections)| {
            let stem = Path::new(&image.file_name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| image.id.to_string());
            AnnotatedSample {
                id: format!("{source}/{stem}"),
                image_path: join_path(base, &image.file_name),
                width: image.width,
                height: image.height,
                source_dataset: source.to_owned(),
                payload: Payload::Detections(detections),
            }
        })
        .collect())
}

/// Boxes that spill past the image border are clipped; a box left empty by
/// clipping is an error.
pub(super) fn clamp_to_image(
    b: BoundingBox,
    width: u32,
    height: u32,
) -> Result<BoundingBox, String> {
    BoundingBox::new(
        b.x_min.min(width),
        b.y_min.min(height),
        b.x_max.min(width),
        b.y_max.min(height),
    )
    .map_err(|e| format!("{e} after clipping to {width}x{height}"))
}

pub(super) fn join_path(base: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}
