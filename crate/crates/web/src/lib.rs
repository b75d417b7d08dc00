//! WebAssembly bindings for the browser demo.
//!
//! Each export takes and returns JSON strings. The plain `*_json` functions
//! hold the logic so native tests can call them without a JS host.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use sar_narrator::caption::{
    a2c_caption_spatial, category_proportions, sa2c_caption, spatial_phrase,
};
use sar_narrator::eval::{bleu, meteor_simplified, rouge_l, tokenize};
use sar_narrator::ingest::{BoundingBox, CategoryGrid, CategoryMapping, DetectionObject, UNMAPPED};

#[derive(Debug, Deserialize)]
pub struct BoxInput {
    pub label: String,
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

#[derive(Debug, Serialize)]
struct Placement {
    caption: String,
    cells: Vec<&'static str>,
}

/// Spatial caption for `boxes` (a JSON array of labelled pixel boxes) plus
/// the thirds-grid cell of every box.
pub fn place_json(width: u32, height: u32, boxes: &str) -> Result<String, String> {
    if width == 0 || height == 0 {
        return Err("image size must be positive".into());
    }
    let boxes: Vec<BoxInput> = serde_json::from_str(boxes).map_err(|e| e.to_string())?;
    let objects = boxes
        .iter()
        .map(|b| {
            let label = b.label.trim().to_lowercase();
            if label.is_empty() {
                return Err("every box needs a label".to_owned());
            }
            let bbox = BoundingBox::new(b.x_min, b.y_min, b.x_max, b.y_max)?;
            if !bbox.fits_within(width, height) {
                return Err(format!("{label} box lies outside the image"));
            }
            Ok(DetectionObject::new(label, bbox))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let placement = Placement {
        caption: a2c_caption_spatial(&objects, width, height),
        cells: objects
            .iter()
            .map(|o| spatial_phrase(&o.bbox, width, height).name())
            .collect(),
    };
    Ok(serde_json::to_string(&placement).expect("placement serializes"))
}

#[derive(Debug, Deserialize)]
pub struct CategoryInput {
    pub name: String,
    pub color: [u8; 3],
}

#[derive(Debug, Serialize)]
struct Proportion {
    category: String,
    percent: f64,
}

#[derive(Debug, Serialize)]
struct Painting {
    caption: String,
    proportions: Vec<Proportion>,
}

/// SA2C caption of a painted grid. `cells` holds one category index per cell
/// in row-major order; indices past the palette count as unpainted.
pub fn paint_json(
    width: u32,
    height: u32,
    cells: &[u16],
    categories: &str,
    threshold_percent: f64,
) -> Result<String, String> {
    if cells.len() != width as usize * height as usize {
        return Err(format!("{} cells for a {width}x{height} grid", cells.len()));
    }
    let categories: Vec<CategoryInput> =
        serde_json::from_str(categories).map_err(|e| e.to_string())?;
    let mapping = CategoryMapping::new(categories.into_iter().map(|c| (c.color, c.name)).collect())
        .map_err(|e| e.to_string())?;
    let cells = cells
        .iter()
        .map(|&c| {
            if (c as usize) < mapping.len() {
                c
            } else {
                UNMAPPED
            }
        })
        .collect();
    let grid = CategoryGrid::new(width, height, cells);
    let caption = sa2c_caption(&grid, &mapping, threshold_percent).map_err(|e| e.to_string())?;
    let proportions = category_proportions(&grid, &mapping)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|p| Proportion {
            category: p.category,
            percent: p.percent,
        })
        .collect();
    Ok(serde_json::to_string(&Painting {
        caption,
        proportions,
    })
    .expect("painting serializes"))
}

#[derive(Debug, Serialize)]
struct Metrics {
    #[serde(rename = "BLEU-1")]
    bleu1: f64,
    #[serde(rename = "BLEU-2")]
    bleu2: f64,
    #[serde(rename = "BLEU-3")]
    bleu3: f64,
    #[serde(rename = "BLEU-4")]
    bleu4: f64,
    #[serde(rename = "METEOR")]
    meteor: f64,
    #[serde(rename = "ROUGE-L")]
    rouge_l: f64,
}

/// Sentence-level scores of one candidate against newline-separated
/// references. CIDEr is left out: its idf weights need a corpus.
pub fn metrics_json(candidate: &str, references: &str) -> Result<String, String> {
    let cand = tokenize(candidate);
    let refs: Vec<_> = references
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(tokenize)
        .collect();
    if cand.is_empty() {
        return Err("candidate is empty".into());
    }
    if refs.is_empty() {
        return Err("give at least one reference".into());
    }
    let b = |n| bleu(&cand, &refs, n).map_err(|e| e.to_string());
    let metrics = Metrics {
        bleu1: b(1)?,
        bleu2: b(2)?,
        bleu3: b(3)?,
        bleu4: b(4)?,
        meteor: meteor_simplified(&cand, &refs).map_err(|e| e.to_string())?,
        rouge_l: rouge_l(&cand, &refs).map_err(|e| e.to_string())?,
    };
    Ok(serde_json::to_string(&metrics).expect("metrics serialize"))
}

#[wasm_bindgen]
pub fn place(width: u32, height: u32, boxes: &str) -> Result<String, JsError> {
    place_json(width, height, boxes).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn paint(
    width: u32,
    height: u32,
    cells: &[u16],
    categories: &str,
    threshold_percent: f64,
) -> Result<String, JsError> {
    paint_json(width, height, cells, categories, threshold_percent).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn metrics(candidate: &str, references: &str) -> Result<String, JsError> {
    metrics_json(candidate, references).map_err(|e| JsError::new(&e))
}
