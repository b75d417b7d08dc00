use crate::ingest::{pluralize, DetectionObject};

use super::spatial::{spatial_phrase, SpatialCell};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCount {
    pub class_label: String,
    pub count: usize,
}

/// Per-class counts in first-appearance order.
pub fn count_objects_by_class(objects: &[DetectionObject]) -> Vec<ClassCount> {
    let mut counts: Vec<ClassCount> = Vec::new();
    for object in objects {
        match counts
            .iter_mut()
            .find(|c| c.class_label == object.class_label)
        {
            Some(c) => c.count += 1,
            None => counts.push(ClassCount {
                class_label: object.class_label.clone(),
                count: 1,
            }),
        }
    }
    counts
}

const EMPTY_CAPTION: &str = "There are no detected objects in this image.";

/// Count-only caption.
///
/// A single class keeps its own `count == 2` branch; multiple classes fold 2
/// into the `<= 10` branch. Both render the same text.
pub fn a2c_caption(objects: &[DetectionObject]) -> String {
    let counts = count_objects_by_class(objects);
    match counts.as_slice() {
        [] => EMPTY_CAPTION.to_owned(),
        [only] => match only.count {
            1 => format!("There is 1 {} in this image.", only.class_label),
            2 => format!(
                "There are 2 {} in this image.",
                pluralize(&only.class_label)
            ),
            n if n <= 10 => format!(
                "There are {n} {} in this image.",
                pluralize(&only.class_label)
            ),
            _ => format!(
                "There are more than ten {} in this image.",
                pluralize(&only.class_label)
            ),
        },
        many => many
            .iter()
            .map(count_sentence)
            .collect::<Vec<_>>()
            .join(" "),
    }
}

fn count_sentence(c: &ClassCount) -> String {
    match c.count {
        1 => format!("There is 1 {} in this image.", c.class_label),
        n if n <= 10 => format!("There are {n} {} in this image.", pluralize(&c.class_label)),
        _ => format!(
            "There are more than ten {} in this image.",
            pluralize(&c.class_label)
        ),
    }
}

/// Largest per-class instance count that still gets location phrases.
const MAX_LOCATED: usize = 3;

/// Count caption with location phrases for classes of at most three
/// instances; busier classes keep the count-only sentence.
pub fn a2c_caption_spatial(objects: &[DetectionObject], width: u32, height: u32) -> String {
    let counts = count_objects_by_class(objects);
    if counts.is_empty() {
        return EMPTY_CAPTION.to_owned();
    }
    if counts.iter().all(|c| c.count > MAX_LOCATED) {
        return a2c_caption(objects);
    }
    counts
        .iter()
        .map(|c| {
            if c.count > MAX_LOCATED {
                return count_sentence(c);
            }
            let cells: Vec<SpatialCell> = objects
                .iter()
                .filter(|o| o.class_label == c.class_label)
                .map(|o| spatial_phrase(&o.bbox, width, height))
                .collect();
            located_sentence(c, &cells)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn located_sentence(c: &ClassCount, cells: &[SpatialCell]) -> String {
    if let [cell] = cells {
        return format!(
            "There is 1 {} {} of the image.",
            c.class_label,
            cell.phrase()
        );
    }
    let mut groups: Vec<(SpatialCell, usize)> = Vec::new();
    for &cell in cells {
        match groups.iter_mut().find(|(g, _)| *g == cell) {
            Some((_, n)) => *n += 1,
            None => groups.push((cell, 1)),
        }
    }
    let parts: Vec<String> = groups
        .iter()
        .map(|(cell, n)| format!("{n} {}", cell.phrase()))
        .collect();
    format!(
        "There are {} {} in this image: {}.",
        c.count,
        pluralize(&c.class_label),
        parts.join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::BoundingBox;

    fn obj(class: &str, x0: u32, y0: u32, x1: u32, y1: u32) -> DetectionObject {
        DetectionObject::new(class, BoundingBox::new(x0, y0, x1, y1).unwrap())
    }

    fn ships(n: usize) -> Vec<DetectionObject> {
        (0..n).map(|_| obj("ship", 0, 0, 10, 10)).collect()
    }

    #[test]
    fn count_branches() {
        assert_eq!(a2c_caption(&ships(1)), "There is 1 ship in this image.");
        assert_eq!(a2c_caption(&ships(2)), "There are 2 ships in this image.");
        assert_eq!(a2c_caption(&ships(10)), "There are 10 ships in this image.");
        assert_eq!(
            a2c_caption(&ships(12)),
            "There are more than ten ships in this image."
        );
        assert_eq!(
            a2c_caption(&[]),
            "There are no detected objects in this image."
        );
    }

    #[test]
    fn multi_class_keeps_first_appearance_order() {
        let mut objects = vec![obj("bridge", 0, 0, 4, 4)];
        objects.extend(ships(3));
        assert_eq!(
            a2c_caption(&objects),
            "There is 1 bridge in this image. There are 3 ships in this image."
        );
    }

    #[test]
    fn irregular_plural() {
        let planes: Vec<_> = (0..4).map(|_| obj("aircraft", 0, 0, 3, 3)).collect();
        assert_eq!(a2c_caption(&planes), "There are 4 aircraft in this image.");
    }

    #[test]
    fn spatial_single_object() {
        let objects = [obj("ship", 400, 20, 460, 60)];
        assert_eq!(
            a2c_caption_spatial(&objects, 512, 512),
            "There is 1 ship in the top-right corner of the image."
        );
        let centered = [obj("ship", 236, 236, 276, 276)];
        assert_eq!(
            a2c_caption_spatial(&centered, 512, 512),
            "There is 1 ship in the center of the image."
        );
    }

    #[test]
    fn spatial_two_objects_list_locations() {
        let objects = [
            obj("ship", 410, 230, 450, 270),
            obj("ship", 400, 20, 460, 60),
        ];
        assert_eq!(
            a2c_caption_spatial(&objects, 512, 512),
            "There are 2 ships in this image: 1 on the right side, 1 in the top-right corner."
        );
    }

    #[test]
    fn spatial_groups_shared_cells() {
        let objects = [
            obj("ship", 410, 230, 450, 270),
            obj("ship", 236, 236, 276, 276),
            obj("ship", 420, 240, 440, 260),
        ];
        assert_eq!(
            a2c_caption_spatial(&objects, 512, 512),
            "There are 3 ships in this image: 2 on the right side, 1 in the center."
        );
    }

    #[test]
    fn spatial_falls_back_above_three() {
        assert_eq!(
            a2c_caption_spatial(&ships(12), 512, 512),
            a2c_caption(&ships(12))
        );
        assert_eq!(
            a2c_caption_spatial(&ships(4), 512, 512),
            a2c_caption(&ships(4))
        );
        let mut mixed = ships(5);
        mixed.push(obj("bridge", 0, 0, 10, 10));
        assert_eq!(
            a2c_caption_spatial(&mixed, 512, 512),
            "There are 5 ships in this image. There is 1 bridge in the top-left corner of the image."
        );
    }
}
