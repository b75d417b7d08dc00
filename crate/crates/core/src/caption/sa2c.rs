use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::ingest::{CategoryGrid, CategoryMapping};

use super::CaptionError;

pub const DEFAULT_THRESHOLD_PERCENT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionEntry {
    pub category: String,
    pub percent: f64,
}

/// Share of each mapping category in the grid, in mapping order.
///
/// The denominator is the full pixel count, so unmapped cells dilute every
/// category. Categories that never occur are reported at 0%.
pub fn category_proportions(
    grid: &CategoryGrid,
    mapping: &CategoryMapping,
) -> Result<Vec<ProportionEntry>, CaptionError> {
    if grid.is_empty() {
        return Err(CaptionError::EmptyGrid);
    }
    let total = grid.len() as f64;
    let (entry_counts, _) = grid.entry_counts(mapping.len());
    let names = mapping.categories();
    let mut per_category = vec![0u64; names.len()];
    for ((_, name), count) in mapping.entries().iter().zip(&entry_counts) {
        let slot = names
            .iter()
            .position(|n| n == name)
            .expect("category listed");
        per_category[slot] += count;
    }
    Ok(names
        .into_iter()
        .zip(per_category)
        .map(|(category, count)| ProportionEntry {
            category: category.to_owned(),
            percent: count as f64 / total * 100.0,
        })
        .collect())
}

const NOTHING_SIGNIFICANT: &str = "No significant categories found.";

/// Proportion caption: categories at or above `threshold_percent`, largest
/// first (ties by name), with integer-rounded percentages.
pub fn sa2c_caption(
    grid: &CategoryGrid,
    mapping: &CategoryMapping,
    threshold_percent: f64,
) -> Result<String, CaptionError> {
    if !(threshold_percent > 0.0 && threshold_percent <= 100.0) {
        return Err(CaptionError::InvalidThreshold(threshold_percent));
    }
    let proportions = category_proportions(grid, mapping)?;
    Ok(caption_from_proportions(&proportions, threshold_percent))
}

/// Filtering and sentence assembly, shared with callers that already hold
/// proportions.
pub(crate) fn caption_from_proportions(entries: &[ProportionEntry], threshold: f64) -> String {
    let mut kept: Vec<&ProportionEntry> =
        entries.iter().filter(|e| e.percent >= threshold).collect();
    if kept.is_empty() {
        return NOTHING_SIGNIFICANT.to_owned();
    }
    kept.sort_by(|a, b| {
        b.percent
            .partial_cmp(&a.percent)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.category.cmp(&b.category))
    });
    let names: Vec<&str> = kept.iter().map(|e| e.category.as_str()).collect();
    let clauses: Vec<String> = kept
        .iter()
        .map(|e| format!("{} accounts for {}%", e.category, e.percent.round() as u64))
        .collect();
    format!(
        "This image contains {}. {}.",
        join_series(&names),
        capitalize(&join_series(&clauses))
    )
}

/// "a", "a and b", "a, b, and c".
fn join_series<S: AsRef<str>>(items: &[S]) -> String {
    match items {
        [] => String::new(),
        [one] => one.as_ref().to_owned(),
        [a, b] => format!("{} and {}", a.as_ref(), b.as_ref()),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{}, and {}", head.join(", "), last.as_ref())
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::UNMAPPED;

    fn mapping() -> CategoryMapping {
        CategoryMapping::new(vec![
            ([0, 255, 0], "forest".into()),
            ([0, 0, 255], "water".into()),
            ([255, 255, 0], "farmland".into()),
        ])
        .unwrap()
    }

    fn entries(list: &[(&str, f64)]) -> Vec<ProportionEntry> {
        list.iter()
            .map(|(c, p)| ProportionEntry {
                category: (*c).into(),
                percent: *p,
            })
            .collect()
    }

    #[test]
    fn three_categories_descending() {
        let e = entries(&[("forest", 81.0), ("water", 1.3), ("farmland", 1.1)]);
        assert_eq!(
            caption_from_proportions(&e, 1.0),
            "This image contains forest, water, and farmland. Forest accounts for 81%, \
             water accounts for 1%, and farmland accounts for 1%."
        );
    }

    #[test]
    fn equal_percents_sort_by_name() {
        let e = entries(&[("water", 50.0), ("farmland", 50.0)]);
        assert_eq!(
            caption_from_proportions(&e, 1.0),
            "This image contains farmland and water. Farmland accounts for 50% and water accounts for 50%."
        );
    }

    #[test]
    fn nothing_above_threshold() {
        let e = entries(&[("forest", 0.5), ("water", 0.9)]);
        assert_eq!(
            caption_from_proportions(&e, 1.0),
            "No significant categories found."
        );
    }

    #[test]
    fn uniform_water() {
        let grid = CategoryGrid::new(2, 2, vec![1; 4]);
        assert_eq!(
            sa2c_caption(&grid, &mapping(), 1.0).unwrap(),
            "This image contains water. Water accounts for 100%."
        );
        let p = category_proportions(&grid, &mapping()).unwrap();
        assert_eq!(
            p,
            entries(&[("forest", 0.0), ("water", 100.0), ("farmland", 0.0)])
        );
    }

    #[test]
    fn unmapped_cells_count_in_denominator() {
        let grid = CategoryGrid::new(2, 2, vec![1, UNMAPPED, 1, UNMAPPED]);
        let p = category_proportions(&grid, &mapping()).unwrap();
        assert_eq!(p[1].percent, 50.0);
    }

    #[test]
    fn shared_category_names_aggregate() {
        let m = CategoryMapping::new(vec![
            ([0, 0, 255], "water".into()),
            ([0, 0, 200], "water".into()),
            ([0, 255, 0], "forest".into()),
        ])
        .unwrap();
        let grid = CategoryGrid::new(4, 1, vec![0, 1, 1, 2]);
        let p = category_proportions(&grid, &m).unwrap();
        assert_eq!(p, entries(&[("water", 75.0), ("forest", 25.0)]));
    }

    #[test]
    fn threshold_is_validated() {
        let grid = CategoryGrid::new(1, 1, vec![0]);
        for bad in [0.0, -1.0, 100.5, f64::NAN] {
            assert!(sa2c_caption(&grid, &mapping(), bad).is_err());
        }
        assert!(sa2c_caption(&grid, &mapping(), 100.0).is_ok());
    }
}
