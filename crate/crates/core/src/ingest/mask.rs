//! Color-coded segmentation masks decoded into category-index grids.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::model::{AnnotatedSample, CategoryMapping, Payload};
use super::IngestError;

/// Cell value for colors that match no mapping entry.
pub const UNMAPPED: u16 = u16::MAX;

/// Row-major grid of mapping-entry indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryGrid {
    width: u32,
    height: u32,
    cells: Vec<u16>,
}

impl CategoryGrid {
    pub fn new(width: u32, height: u32, cells: Vec<u16>) -> Self {
        assert_eq!(
            cells.len(),
            width as usize * height as usize,
            "grid cell count must equal width * height"
        );
        Self {
            width,
            height,
            cells,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cells(&self) -> &[u16] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.cells[y as usize * self.width as usize + x as usize]
    }

    /// Cell count per mapping entry, plus the unmapped count.
    pub fn entry_counts(&self, entries: usize) -> (Vec<u64>, u64) {
        let mut counts = vec![0u64; entries];
        let mut unmapped = 0u64;
        for &cell in &self.cells {
            match counts.get_mut(cell as usize) {
                Some(c) if cell != UNMAPPED => *c += 1,
                _ => unmapped += 1,
            }
        }
        (counts, unmapped)
    }
}

/// Decodes a PNG (or any supported raster) mask.
///
/// `tolerance` is the largest per-channel difference accepted when matching a
/// pixel to a mapping color; 0 means exact triples only.
pub fn load_mask(
    path: &Path,
    mapping: &CategoryMapping,
    tolerance: u8,
) -> Result<CategoryGrid, IngestError> {
    let img = image::open(path).map_err(|e| IngestError::UnreadableImage {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    if rgb.width() == 0 || rgb.height() == 0 {
        return Err(IngestError::EmptyImage {
            path: path.to_owned(),
        });
    }
    Ok(grid_from_rgb(
        rgb.width(),
        rgb.height(),
        rgb.as_raw(),
        mapping,
        tolerance,
    ))
}

/// Builds a grid from packed RGB bytes (`width * height * 3`).
pub fn grid_from_rgb(
    width: u32,
    height: u32,
    rgb: &[u8],
    mapping: &CategoryMapping,
    tolerance: u8,
) -> CategoryGrid {
    assert_eq!(rgb.len(), width as usize * height as usize * 3);
    let exact: HashMap<[u8; 3], u16> = mapping
        .entries()
        .iter()
        .enumerate()
        .map(|(i, (color, _))| (*color, i as u16))
        .collect();
    let cells = rgb
        .chunks_exact(3)
        .map(|px| {
            let color = [px[0], px[1], px[2]];
            if let Some(&i) = exact.get(&color) {
                return i;
            }
            if tolerance == 0 {
                return UNMAPPED;
            }
            nearest_within(color, mapping, tolerance).unwrap_or(UNMAPPED)
        })
        .collect();
    CategoryGrid::new(width, height, cells)
}

fn nearest_within(color: [u8; 3], mapping: &CategoryMapping, tolerance: u8) -> Option<u16> {
    mapping
        .entries()
        .iter()
        .enumerate()
        .map(|(i, (c, _))| {
            let d = c
                .iter()
                .zip(color)
                .map(|(a, b)| a.abs_diff(b))
                .max()
                .unwrap_or(0);
            (d, i)
        })
        .filter(|(d, _)| *d <= tolerance)
        .min()
        .map(|(_, i)| i as u16)
}

/// One segmentation sample per mask file. The SAR image shares the mask's
/// file stem and lives in `image_dir` as a PNG; `optical_captions` is keyed
/// by that stem. Unreadable images get zero dimensions and are dropped by
/// validation.
pub fn mask_samples(
    masks: &[PathBuf],
    image_dir: &Path,
    optical_captions: &HashMap<String, String>,
    source: &str,
) -> Vec<AnnotatedSample> {
    masks
        .iter()
        .map(|mask| {
            let stem = mask
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let image_path = image_dir.join(format!("{stem}.png"));
            let (width, height) = image::image_dimensions(&image_path).unwrap_or((0, 0));
            AnnotatedSample {
                id: format!("{source}/{stem}"),
                image_path,
                width,
                height,
                source_dataset: source.to_owned(),
                payload: Payload::Mask {
                    path: mask.clone(),
                    optical_caption: optical_captions.get(&stem).cloned(),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn water() -> CategoryMapping {
        CategoryMapping::new(vec![
            ([0, 0, 255], "water".into()),
            ([0, 255, 0], "forest".into()),
        ])
        .unwrap()
    }

    #[test]
    fn uniform_raster_maps_every_cell() {
        let rgb = [0u8, 0, 255].repeat(4);
        let grid = grid_from_rgb(2, 2, &rgb, &water(), 0);
        assert_eq!(grid.cells(), &[0, 0, 0, 0]);
    }

    #[test]
    fn unknown_colors_become_sentinel() {
        let mut rgb = [0u8, 0, 255].repeat(4);
        rgb[3..6].copy_from_slice(&[9, 9, 9]);
        let grid = grid_from_rgb(2, 2, &rgb, &water(), 0);
        assert_eq!(grid.cells(), &[0, UNMAPPED, 0, 0]);
        assert_eq!(grid.entry_counts(2), (vec![3, 0], 1));
    }

    #[test]
    fn tolerance_admits_near_colors() {
        let rgb = [2u8, 1, 250, 0, 250, 3];
        let exact = grid_from_rgb(2, 1, &rgb, &water(), 0);
        assert_eq!(exact.cells(), &[UNMAPPED, UNMAPPED]);
        let loose = grid_from_rgb(2, 1, &rgb, &water(), 5);
        assert_eq!(loose.cells(), &[0, 1]);
    }

    #[test]
    fn load_mask_reads_png_and_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let img = image::RgbImage::from_fn(3, 2, |x, _| {
            if x == 0 {
                image::Rgb([0, 255, 0])
            } else {
                image::Rgb([0, 0, 255])
            }
        });
        img.save(&path).unwrap();
        let grid = load_mask(&path, &water(), 0).unwrap();
        assert_eq!((grid.width(), grid.height()), (3, 2));
        assert_eq!(grid.entry_counts(2), (vec![4, 2], 0));

        let bad = dir.path().join("bad.png");
        std::fs::write(&bad, b"not a png").unwrap();
        assert!(matches!(
            load_mask(&bad, &water(), 0),
            Err(IngestError::UnreadableImage { .. })
        ));
    }
}
