use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::BoundingBox;

/// One cell of the equal-thirds 3x3 image partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialCell {
    TopLeftCorner,
    Top,
    TopRightCorner,
    Left,
    Center,
    Right,
    BottomLeftCorner,
    Bottom,
    BottomRightCorner,
}

impl SpatialCell {
    pub const ALL: [SpatialCell; 9] = [
        SpatialCell::TopLeftCorner,
        SpatialCell::Top,
        SpatialCell::TopRightCorner,
        SpatialCell::Left,
        SpatialCell::Center,
        SpatialCell::Right,
        SpatialCell::BottomLeftCorner,
        SpatialCell::Bottom,
        SpatialCell::BottomRightCorner,
    ];

    /// Cell at `row`, `col` (each 0..3).
    pub fn from_grid(row: usize, col: usize) -> Self {
        Self::ALL[row * 3 + col]
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpatialCell::TopLeftCorner => "top-left corner",
            SpatialCell::Top => "top",
            SpatialCell::TopRightCorner => "top-right corner",
            SpatialCell::Left => "left",
            SpatialCell::Center => "center",
            SpatialCell::Right => "right",
            SpatialCell::BottomLeftCorner => "bottom-left corner",
            SpatialCell::Bottom => "bottom",
            SpatialCell::BottomRightCorner => "bottom-right corner",
        }
    }

    /// Location phrase used inside captions.
    pub fn phrase(&self) -> &'static str {
        match self {
            SpatialCell::TopLeftCorner => "in the top-left corner",
            SpatialCell::Top => "at the top",
            SpatialCell::TopRightCorner => "in the top-right corner",
            SpatialCell::Left => "on the left side",
            SpatialCell::Center => "in the center",
            SpatialCell::Right => "on the right side",
            SpatialCell::BottomLeftCorner => "in the bottom-left corner",
            SpatialCell::Bottom => "at the bottom",
            SpatialCell::BottomRightCorner => "in the bottom-right corner",
        }
    }
}

impl fmt::Display for SpatialCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps the box midpoint onto the thirds grid. A midpoint exactly on a
/// dividing line belongs to the left/top cell.
pub fn spatial_phrase(bbox: &BoundingBox, width: u32, height: u32) -> SpatialCell {
    let col = third(u64::from(bbox.x_min) + u64::from(bbox.x_max), width);
    let row = third(u64::from(bbox.y_min) + u64::from(bbox.y_max), height);
    SpatialCell::from_grid(row, col)
}

// `doubled_center` is twice the midpoint so the comparison stays in integers:
// center <= extent * k / 3  <=>  3 * doubled_center <= 2 * k * extent.
fn third(doubled_center: u64, extent: u32) -> usize {
    let extent = u64::from(extent);
    if 3 * doubled_center <= 2 * extent {
        0
    } else if 3 * doubled_center <= 4 * extent {
        1
    } else {
        2
    }
}
