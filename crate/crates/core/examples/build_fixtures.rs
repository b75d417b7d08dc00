//! Regenerates `fixtures/mini` (synthetic images, annotations, config and
//! replay cassette) and `fixtures/reference/cassette.jsonl`.
//!
//! Run with `cargo run -p sar-narrator-core --example build_fixtures`.
//! The cassette is recorded against a scripted endpoint whose answers are
//! the hand-written rewrites below.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sar_narrator::config::{Overrides, PipelineConfig};
use sar_narrator::pipeline::Pipeline;
use sar_narrator::rewrite::{
    read_icl_store, ChatRequest, EndpointError, FnEndpoint, RecordingEndpoint, RewriteJob,
    RewriteOptions,
};

const SIZE: u32 = 96;

struct Detection {
    stem: &'static str,
    seed: u64,
    boxes: &'static [(&'static str, [u32; 4])],
}

const COCO: &[Detection] = &[
    Detection {
        stem: "c0",
        seed: 10,
        boxes: &[("ship", [40, 42, 56, 54])],
    },
    Detection {
        stem: "c1",
        seed: 11,
        boxes: &[("ship", [4, 40, 20, 52]), ("ship", [76, 44, 92, 56])],
    },
    Detection {
        stem: "c2",
        seed: 12,
        boxes: &[
            ("ship", [6, 6, 18, 14]),
            ("ship", [40, 70, 52, 80]),
            ("ship", [70, 8, 84, 16]),
            ("storage tank", [44, 40, 54, 50]),
        ],
    },
    Detection {
        stem: "c3",
        seed: 13,
        boxes: &[
            ("ship", [2, 2, 10, 8]),
            ("ship", [14, 2, 22, 8]),
            ("ship", [26, 2, 34, 8]),
            ("ship", [38, 2, 46, 8]),
            ("ship", [50, 2, 58, 8]),
            ("ship", [62, 2, 70, 8]),
            ("ship", [2, 86, 10, 92]),
            ("ship", [14, 86, 22, 92]),
            ("ship", [26, 86, 34, 92]),
            ("ship", [38, 86, 46, 92]),
            ("ship", [50, 86, 58, 92]),
            ("ship", [62, 86, 70, 92]),
        ],
    },
];

const VOC: &[Detection] = &[
    Detection {
        stem: "v0",
        seed: 20,
        boxes: &[
            ("airplane", [10, 60, 30, 80]),
            ("airplane", [60, 62, 82, 84]),
        ],
    },
    Detection {
        stem: "v1",
        seed: 21,
        boxes: &[("bridge", [30, 10, 66, 24]), ("ship", [70, 70, 86, 80])],
    },
];

const MAPPING: &[([u8; 3], &str)] = &[
    ([0, 0, 255], "water"),
    ([255, 255, 0], "farmland"),
    ([255, 0, 0], "village"),
    ([0, 128, 0], "forest"),
    ([128, 128, 128], "road"),
];

/// Mask stem, pixel counts per mapping color (remainder unmapped), optical
/// caption, scripted fusion answer.
const MASKS: &[(&str, [u32; 5], &str, &str)] = &[
    (
        "s0",
        [8110, 276, 92, 0, 0],
        "An aerial photograph of a wide gray lake with a few small yellow fields along the northern shore.",
        "A wide lake dominates the scene, with a few small fields and houses along the northern shore.",
    ),
    (
        "s1",
        [0, 2765, 0, 4608, 1843],
        "Dense green forest covers the left part of the image, while a road, possibly a highway, cuts through farmland.",
        "Dense forest covers much of the area, while a road cuts through the farmland beside it.",
    ),
    (
        "s2",
        [3686, 0, 3226, 46, 2258],
        "The image shows a riverside village with white houses and a network of roads.",
        "A riverside village with a network of roads stretches along a broad river.",
    ),
    (
        "s3",
        [2304, 6451, 461, 0, 0],
        "A patchwork of brown and green farmland surrounds a small pond, captured from a high angle.",
        "A patchwork of farmland surrounds a pond, with a small settlement at one edge.",
    ),
    (
        "s4",
        [0, 0, 5530, 922, 2764],
        "A dense town with red roofs is crossed by several gray roads, likely the main streets.",
        "A dense town is crossed by several roads, with a strip of woodland at its edge.",
    ),
    (
        "s5",
        [46, 0, 0, 9170, 0],
        "A dark forest with tall trees fills the whole frame.",
        "A continuous forest fills the scene.",
    ),
];

/// Paired stem, optical caption, scripted rewrite.
const PAIRS: &[(&str, &str, &str)] = &[
    (
        "p0",
        "The aerial photograph shows a busy harbor with several white ships docked at gray piers.",
        "A busy harbor with several ships docked at piers.",
    ),
    (
        "p1",
        "A long runway, perhaps part of a regional airport, runs past a green field.",
        "A long runway runs past a field.",
    ),
    (
        "p2",
        "Rows of orange storage tanks stand beside a dark river, seen from a high angle.",
        "Rows of storage tanks stand beside a river.",
    ),
    (
        "p3",
        "The image depicts a suspension bridge crossing a blue bay, with trees on both banks.",
        "A suspension bridge crosses a bay.",
    ),
    (
        "p4",
        "A residential area with colorful houses appears to be built on a gentle hill.",
        "A residential area with houses is built on a gentle hill.",
    ),
    (
        "p5",
        "Large rectangular fields in shades of green and brown are separated by narrow roads.",
        "Large rectangular fields are separated by narrow roads.",
    ),
];

const REFERENCE_REWRITE_INPUT: &str = "The black and white aerial photograph depicts a landscape divided into two distinct sections by a diagonal line, with a large, rectangular farm or agricultural area on the left and a densely vegetated area on the right";
const REFERENCE_REWRITE_OUTPUT: &str =
    "A landscape divided by a diagonal line, with a large farm on the left and a densely vegetated area on the right.";
const REFERENCE_FUSION_A: &str = "This image contains farmland, village, and water. Water accounts for 88%, farmland accounts for 3%, and village accounts for 1%.";
const REFERENCE_FUSION_B: &str = "The image presents an aerial view of a field, captured from a high angle. The field is divided into sections by a network of roads or pathways, creating a grid-like pattern.";
const REFERENCE_FUSION_OUTPUT: &str = "The image showcases a vast water body dominating the scene, with a field divided into sections by a network of roads forming a grid-like pattern.";

/// Speckled dark background with bright returns.
fn speckle(seed: u64) -> (RgbImage, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = RgbImage::new(SIZE, SIZE);
    for p in img.pixels_mut() {
        let v: u8 = rng.random_range(10..70);
        *p = Rgb([v, v, v]);
    }
    (img, rng)
}

fn detection_image(d: &Detection) -> RgbImage {
    let (mut img, mut rng) = speckle(d.seed);
    for (_, [x0, y0, x1, y1]) in d.boxes {
        for y in *y0..*y1 {
            for x in *x0..*x1 {
                let v: u8 = rng.random_range(180..=255);
                img.put_pixel(x, y, Rgb([v, v, v]));
            }
        }
    }
    img
}

/// Mask filled row-major in mapping order, then the SAR image textured by class.
fn mask_images(seed: u64, counts: &[u32; 5]) -> (RgbImage, RgbImage) {
    let mut classes = Vec::with_capacity((SIZE * SIZE) as usize);
    for (i, c) in counts.iter().enumerate() {
        classes.extend(std::iter::repeat_n(Some(i), *c as usize));
    }
    classes.resize((SIZE * SIZE) as usize, None);
    let (mut sar, mut rng) = speckle(seed);
    let mut mask = RgbImage::new(SIZE, SIZE);
    for (n, class) in classes.into_iter().enumerate() {
        let (x, y) = (n as u32 % SIZE, n as u32 / SIZE);
        let (color, level) = match class {
            Some(i) => (MAPPING[i].0, [20u8, 140, 200, 110, 90][i]),
            None => ([0, 0, 0], 60),
        };
        mask.put_pixel(x, y, Rgb(color));
        let v = level.saturating_add(rng.random_range(0..40));
        sar.put_pixel(x, y, Rgb([v, v, v]));
    }
    (mask, sar)
}

fn save(img: &RgbImage, path: &Path) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    img.save(path).unwrap();
}

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

fn coco_document() -> String {
    let names = ["ship", "storage tank"];
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    // c4 repeats c1 byte for byte
    let entries: Vec<(&str, &Detection)> = COCO
        .iter()
        .map(|d| (d.stem, d))
        .chain(std::iter::once(("c4", &COCO[1])))
        .collect();
    for (i, (stem, d)) in entries.iter().enumerate() {
        images.push(serde_json::json!({
            "id": i + 1, "file_name": format!("images/{stem}.png"), "width": SIZE, "height": SIZE
        }));
        for (label, [x0, y0, x1, y1]) in d.boxes {
            annotations.push(serde_json::json!({
                "id": annotations.len() + 1,
                "image_id": i + 1,
                "category_id": names.iter().position(|n| n == label).unwrap() + 1,
                "bbox": [x0, y0, x1 - x0, y1 - y0],
            }));
        }
    }
    let categories: Vec<_> = names
        .iter()
        .enumerate()
        .map(|(i, n)| serde_json::json!({"id": i + 1, "name": n}))
        .collect();
    let doc =
        serde_json::json!({"images": images, "annotations": annotations, "categories": categories});
    serde_json::to_string_pretty(&doc).unwrap() + "\n"
}

fn voc_document(image: &str, d: &Detection) -> String {
    let mut out = format!(
        "<annotation>\n  <filename>{image}</filename>\n  <size><width>{SIZE}</width><height>{SIZE}</height><depth>3</depth></size>\n"
    );
    for (label, [x0, y0, x1, y1]) in d.boxes {
        out.push_str(&format!(
            "  <object>\n    <name>{label}</name>\n    <bndbox><xmin>{x0}</xmin><ymin>{y0}</ymin><xmax>{x1}</xmax><ymax>{y1}</ymax></bndbox>\n  </object>\n"
        ));
    }
    out + "</annotation>\n"
}

const CONFIG: &str = r#"# Synthetic mini corpus: 8 detection, 6 segmentation and 6 paired samples.
seed = 7
output_dir = "out"

[[sources]]
name = "ships-coco"
task = "detection"
adapter = "coco"
paths = ["detection/coco.json"]

[[sources]]
name = "ships-voc"
task = "detection"
adapter = "voc"
paths = ["detection/voc"]

[[sources]]
name = "landcover"
task = "segmentation"
adapter = "mask"
paths = ["segmentation/masks"]
image_dir = "segmentation/sar"
optical_captions = "segmentation/optical_captions.tsv"
mapping = [
  { color = [0, 0, 255], category = "water" },
  { color = [255, 255, 0], category = "farmland" },
  { color = [255, 0, 0], category = "village" },
  { color = [0, 128, 0], category = "forest" },
  { color = [128, 128, 128], category = "road" },
]

[[sources]]
name = "pairs"
task = "paired"
adapter = "paired_tsv"
paths = ["paired/captions.tsv"]
image_dir = "paired/sar"

[dedup]
global_max_distance = 0

[dedup.per_source_max_distance]
ships-coco = 2

[caption]
threshold_percent = 1.0
spatial_enabled = true

[rewrite]
mode = "replay"
model = "deepseek-chat"
n_examples = 3
max_concurrency = 4
cassette = "cassette.jsonl"
icl_store = "../icl_examples.jsonl"

[split]
train = 0.8
test = 0.2
"#;

/// Answers from the scripted tables, keyed by the optical caption in the prompt.
fn scripted(request: &ChatRequest) -> Result<String, EndpointError> {
    let prompt = &request.messages[0].content;
    let mut answers: HashMap<&str, &str> = HashMap::new();
    for (_, _, optical, fused) in MASKS {
        answers.insert(optical, fused);
    }
    for (_, optical, rewritten) in PAIRS {
        answers.insert(optical, rewritten);
    }
    let key = if let Some(i) = prompt.rfind("Caption B: ") {
        prompt[i + 11..].lines().next().unwrap_or_default()
    } else {
        let i = prompt
            .rfind("Input: ")
            .expect("rewrite prompt has an input");
        prompt[i + 7..].lines().next().unwrap_or_default()
    };
    answers
        .get(key)
        .map(|s| (*s).to_owned())
        .ok_or_else(|| EndpointError::InvalidResponse(format!("no scripted answer for {key:?}")))
}

fn main() {
    let root = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
        .canonicalize()
        .unwrap();
    let mini = root.join("mini");
    if mini.exists() {
        fs::remove_dir_all(&mini).unwrap();
    }

    let images = mini.join("detection/images");
    for d in COCO {
        save(&detection_image(d), &images.join(format!("{}.png", d.stem)));
    }
    fs::copy(images.join("c1.png"), images.join("c4.png")).unwrap();
    write(&mini.join("detection/coco.json"), &coco_document());
    for d in VOC {
        save(&detection_image(d), &images.join(format!("{}.png", d.stem)));
        let xml = voc_document(&format!("../images/{}.png", d.stem), d);
        write(&mini.join(format!("detection/voc/{}.xml", d.stem)), &xml);
    }
    // v2 repeats c0 byte for byte
    fs::copy(images.join("c0.png"), images.join("v2.png")).unwrap();
    write(
        &mini.join("detection/voc/v2.xml"),
        &voc_document("../images/v2.png", &COCO[0]),
    );

    let mut tsv = String::from("# mask stem\toptical caption\n");
    for (i, (stem, counts, optical, _)) in MASKS.iter().enumerate() {
        let (mask, sar) = mask_images(30 + i as u64, counts);
        save(&mask, &mini.join(format!("segmentation/masks/{stem}.png")));
        save(&sar, &mini.join(format!("segmentation/sar/{stem}.png")));
        tsv.push_str(&format!("{stem}\t{optical}\n"));
    }
    write(&mini.join("segmentation/optical_captions.tsv"), &tsv);

    let mut tsv = String::from("# image id\toptical caption\n");
    for (i, (stem, optical, _)) in PAIRS.iter().enumerate() {
        let (img, _) = speckle(40 + i as u64);
        save(&img, &mini.join(format!("paired/sar/{stem}.png")));
        tsv.push_str(&format!("{stem}\t{optical}\n"));
    }
    write(&mini.join("paired/captions.tsv"), &tsv);
    write(&mini.join("pipeline.toml"), CONFIG);

    let scratch = tempfile::tempdir().unwrap();
    let flags = Overrides {
        output_dir: Some(scratch.path().to_owned()),
        ..Overrides::default()
    };
    let config =
        PipelineConfig::load_with_env(&mini.join("pipeline.toml"), &flags, |_| None).unwrap();
    let cassette = mini.join("cassette.jsonl");
    let recorder = RecordingEndpoint::new(FnEndpoint(scripted), &cassette).unwrap();
    let pipeline = Pipeline::new(config).with_endpoint(Box::new(recorder));
    let report = pipeline.ingest().unwrap();
    assert_eq!(report.samples.len(), 20, "{:?}", report.entries);
    let captions = pipeline.caption(&report.samples).unwrap();
    let rewritten = pipeline.rewrite(&captions, &report.samples).unwrap();
    assert!(rewritten.iter().all(|r| !r.fallback_used));
    drop(pipeline);
    // workers append in completion order
    let mut lines: Vec<String> = fs::read_to_string(&cassette)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect();
    lines.sort();
    write(&cassette, &(lines.join("\n") + "\n"));

    let store_file = fs::File::open(root.join("icl_examples.jsonl")).unwrap();
    let store = read_icl_store(std::io::BufReader::new(store_file)).unwrap();
    let options = RewriteOptions::default();
    let reference = root.join("reference/cassette.jsonl");
    fs::create_dir_all(reference.parent().unwrap()).unwrap();
    let _ = fs::remove_file(&reference);
    let answers = [
        (
            RewriteJob::rewrite("reference/rewrite", REFERENCE_REWRITE_INPUT, &store, 3, 0)
                .unwrap(),
            REFERENCE_REWRITE_OUTPUT,
        ),
        (
            RewriteJob::fusion("", REFERENCE_FUSION_A, REFERENCE_FUSION_B, 0).unwrap(),
            REFERENCE_FUSION_OUTPUT,
        ),
    ];
    let table: HashMap<String, &str> = answers
        .iter()
        .map(|(job, out)| (job.request(&options).sha256(), *out))
        .collect();
    let recorder = RecordingEndpoint::new(
        FnEndpoint(move |r: &ChatRequest| Ok(table[&r.sha256()].to_owned())),
        &reference,
    )
    .unwrap();
    for (job, _) in &answers {
        sar_narrator::rewrite::rewrite_caption(&recorder, job, &options).unwrap();
    }
    println!("fixtures written under {}", root.display());
}
