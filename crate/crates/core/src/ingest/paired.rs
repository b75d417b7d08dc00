//! `id<TAB>caption` files for SAR-optical pairs.

use std::fs;
use std::path::Path;

use super::coco::join_path;
use super::model::{AnnotatedSample, Payload};
use super::IngestError;

/// Reads `id<TAB>caption` lines. Blank lines and `#` comments are skipped.
pub fn parse_caption_tsv(path: &Path) -> Result<Vec<(String, String)>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, caption) =
            line.split_once('\t')
                .ok_or_else(|| IngestError::MalformedDocument {
                    path: path.to_owned(),
                    message: format!("line {} has no tab separator", n + 1),
                })?;
        let id = id.trim();
        if id.is_empty() {
            return Err(IngestError::MalformedDocument {
                path: path.to_owned(),
                message: format!("line {} has an empty id", n + 1),
            });
        }
        rows.push((id.to_owned(), caption.trim().to_owned()));
    }
    Ok(rows)
}

/// One paired sample per TSV row. The SAR image is `image_dir/<id>` (with
/// `.png` appended when the id has no extension). Unreadable images get
/// zero dimensions and are dropped by validation.
pub fn parse_paired_tsv(
    path: &Path,
    image_dir: &Path,
    source: &str,
) -> Result<Vec<AnnotatedSample>, IngestError> {
    Ok(parse_caption_tsv(path)?
        .into_iter()
        .map(|(id, caption)| {
            let file = if Path::new(&id).extension().is_some() {
                id.clone()
            } else {
                format!("{id}.png")
            };
            let image_path = join_path(image_dir, &file);
            let (width, height) = image::image_dimensions(&image_path).unwrap_or((0, 0));
            let stem = Path::new(&file)
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            AnnotatedSample {
                id: format!("{source}/{stem}"),
                image_path,
                width,
                height,
                source_dataset: source.to_owned(),
                payload: Payload::Paired {
                    optical_caption: caption,
                },
            }
        })
        .collect())
}
