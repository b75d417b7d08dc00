//! Pascal-VOC-style per-image XML annotations.

use std::fs;
use std::path::Path;

use roxmltree::{Document, Node};

use super::coco::{clamp_to_image, join_path};
use super::labels::normalize_label;
use super::model::{AnnotatedSample, BoundingBox, DetectionObject, Payload};
use super::IngestError;

pub fn parse_detection_voc(path: &Path, source: &str) -> Result<AnnotatedSample, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_detection_voc_str(&text, path, source)
}

pub fn parse_detection_voc_str(
    text: &str,
    path: &Path,
    source: &str,
) -> Result<AnnotatedSample, IngestError> {
    let malformed = |message: String| IngestError::MalformedDocument {
        path: path.to_owned(),
        message,
    };
    let doc = Document::parse(text).map_err(|e| malformed(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "annotation" {
        return Err(malformed(format!(
            "root element is <{}>, expected <annotation>",
            root.tag_name().name()
        )));
    }

    let size = child(root, "size").ok_or_else(|| malformed("missing <size>".into()))?;
    let width = parse_number(size, "width").map_err(&malformed)?;
    let height = parse_number(size, "height").map_err(&malformed)?;
    let width = to_pixel(width).map_err(&malformed)?;
    let height = to_pixel(height).map_err(&malformed)?;

    let file_name = match child(root, "filename").and_then(|n| n.text()) {
        Some(name) if !name.trim().is_empty() => name.trim().to_owned(),
        _ => format!(
            "{}.png",
            path.file_stem().unwrap_or_default().to_string_lossy()
        ),
    };

    let mut detections = Vec::new();
    for (n, object) in root
        .children()
        .filter(|c| c.has_tag_name("object"))
        .enumerate()
    {
        let name = child(object, "name")
            .and_then(|c| c.text())
            .map(normalize_label)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| malformed(format!("object {n} has no <name>")))?;
        let bndbox = child(object, "bndbox")
            .ok_or_else(|| malformed(format!("object {n} has no <bndbox>")))?;
        let mut corners = [0u32; 4];
        for (slot, tag) in corners.iter_mut().zip(["xmin", "ymin", "xmax", "ymax"]) {
            let value = parse_number(bndbox, tag).map_err(&malformed)?;
            *slot = to_pixel(value).map_err(|message| IngestError::InvalidBox {
                path: path.to_owned(),
                message: format!("object {n}: {message}"),
            })?;
        }
        let [x0, y0, x1, y1] = corners;
        let bbox = BoundingBox::new(x0, y0, x1, y1)
            .and_then(|b| clamp_to_image(b, width, height))
            .map_err(|message| IngestError::InvalidBox {
                path: path.to_owned(),
                message: format!("object {n}: {message}"),
            })?;
        detections.push(DetectionObject::new(name, bbox));
    }

    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let stem = Path::new(&file_name)
        .file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();
    Ok(AnnotatedSample {
        id: format!("{source}/{stem}"),
        image_path: join_path(base, &file_name),
        width,
        height,
        source_dataset: source.to_owned(),
        payload: Payload::Detections(detections),
    })
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(tag))
}

fn parse_number(node: Node<'_, '_>, tag: &str) -> Result<f64, String> {
    let text = child(node, tag)
        .and_then(|c| c.text())
        .ok_or_else(|| format!("missing <{tag}>"))?;
    text.trim()
        .parse::<f64>()
        .map_err(|e| format!("<{tag}> is not a number ({text:?}): {e}"))
}

fn to_pixel(value: f64) -> Result<u32, String> {
    if !value.is_finite() || value < 0.0 || value > f64::from(u32::MAX) {
        return Err(format!("coordinate {value} out of range"));
    }
    Ok(value.round() as u32)
}
