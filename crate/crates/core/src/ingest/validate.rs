//! Cleaning pass: drop corrupted or annotation-less samples.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::model::{AnnotatedSample, Payload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    CorruptedImage,
    InvalidDimensions,
    MissingAnnotation,
    CorruptedAnnotation,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::CorruptedImage => "corrupted_image",
            DropReason::InvalidDimensions => "invalid_dimensions",
            DropReason::MissingAnnotation => "missing_annotation",
            DropReason::CorruptedAnnotation => "corrupted_annotation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum ValidationVerdict {
    Keep,
    Drop(DropReason),
}

impl ValidationVerdict {
    pub fn is_keep(&self) -> bool {
        matches!(self, ValidationVerdict::Keep)
    }
}

/// Decides keep/drop for one sample. Reads (but never writes) the image and
/// mask files.
pub fn validate_sample(sample: &AnnotatedSample) -> ValidationVerdict {
    let dims = match image::image_dimensions(&sample.image_path) {
        Ok(d) => d,
        Err(_) => return ValidationVerdict::Drop(DropReason::CorruptedImage),
    };
    // a header can parse while the pixel data is truncated
    if image::open(&sample.image_path).is_err() {
        return ValidationVerdict::Drop(DropReason::CorruptedImage);
    }
    if sample.width == 0 || sample.height == 0 || dims.0 == 0 || dims.1 == 0 {
        return ValidationVerdict::Drop(DropReason::InvalidDimensions);
    }
    match &sample.payload {
        Payload::Detections(objects) => {
            if objects.is_empty() {
                return ValidationVerdict::Drop(DropReason::MissingAnnotation);
            }
            if objects.iter().any(|o| {
                o.class_label.is_empty() || !o.bbox.fits_within(sample.width, sample.height)
            }) {
                return ValidationVerdict::Drop(DropReason::CorruptedAnnotation);
            }
        }
        Payload::Mask { path, .. } => match image::open(path) {
            Err(_) => return ValidationVerdict::Drop(DropReason::MissingAnnotation),
            Ok(mask) if mask.width() == 0 || mask.height() == 0 => {
                return ValidationVerdict::Drop(DropReason::CorruptedAnnotation)
            }
            Ok(_) => {}
        },
        Payload::Paired { optical_caption } => {
            if optical_caption.trim().is_empty() {
                return ValidationVerdict::Drop(DropReason::MissingAnnotation);
            }
        }
    }
    ValidationVerdict::Keep
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;

    use super::*;
    use crate::ingest::{BoundingBox, DetectionObject};

    fn sample(image: PathBuf, payload: Payload) -> AnnotatedSample {
        AnnotatedSample {
            id: "s/1".into(),
            image_path: image,
            width: 16,
            height: 16,
            source_dataset: "s".into(),
            payload,
        }
    }

    fn ship() -> Payload {
        Payload::Detections(vec![DetectionObject::new(
            "ship",
            BoundingBox::new(1, 1, 4, 4).unwrap(),
        )])
    }

    #[test]
    fn verdicts() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.png");
        image::GrayImage::new(16, 16).save(&good).unwrap();
        let corrupt = dir.path().join("corrupt.png");
        std::fs::write(&corrupt, b"\x89PNG\r\n\x1a\nbroken").unwrap();

        assert_eq!(
            validate_sample(&sample(good.clone(), ship())),
            ValidationVerdict::Keep
        );
        assert_eq!(
            validate_sample(&sample(corrupt, ship())),
            ValidationVerdict::Drop(DropReason::CorruptedImage)
        );
        assert_eq!(
            validate_sample(&sample(dir.path().join("missing.png"), ship())),
            ValidationVerdict::Drop(DropReason::CorruptedImage)
        );
        assert_eq!(
            validate_sample(&sample(good.clone(), Payload::Detections(vec![]))),
            ValidationVerdict::Drop(DropReason::MissingAnnotation)
        );
        assert_eq!(
            validate_sample(&sample(
                good.clone(),
                Payload::Paired {
                    optical_caption: "  ".into()
                }
            )),
            ValidationVerdict::Drop(DropReason::MissingAnnotation)
        );
        assert_eq!(
            validate_sample(&sample(
                good.clone(),
                Payload::Mask {
                    path: dir.path().join("nomask.png"),
                    optical_caption: None
                }
            )),
            ValidationVerdict::Drop(DropReason::MissingAnnotation)
        );
        let mut zero = sample(good, ship());
        zero.width = 0;
        assert_eq!(
            validate_sample(&zero),
            ValidationVerdict::Drop(DropReason::InvalidDimensions)
        );
    }
}
