//! Acceptance checks, one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sar_narrator::caption::{a2c_caption, category_proportions, sa2c_caption};
use sar_narrator::corpus::{compute_stats, read_manifest, CaptionRecord, HistogramBucket, Method};
use sar_narrator::dedup::{dedup_corpus, hamming, phash64, DedupPolicy, PHash};
use sar_narrator::eval::{
    evaluate_captions, evaluate_retrieval, parse_caption_items, recall_at_k, CaptionEvalItem,
    Direction, SimilarityMatrix, Smoothing,
};
use sar_narrator::ingest::{
    grid_from_rgb, AnnotatedSample, BoundingBox, CategoryMapping, DetectionObject, Payload,
};
use sar_narrator::rewrite::{
    fuse_captions, read_icl_store, rewrite_caption, rule_rewrite, ReplayEndpoint, RewriteJob,
    RewriteOptions,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

// 1

fn literal_class_name(class: &str, count: usize) -> String {
    if count == 1 {
        class.to_owned()
    } else {
        format!("{class}s")
    }
}

/// Line-by-line transcription of the count-only pseudocode, including its
/// missing spaces and trailing space.
fn literal_a2c(objects: &[DetectionObject]) -> String {
    let mut classes: Vec<&str> = Vec::new();
    let mut class_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in objects {
        if !classes.contains(&o.class_label.as_str()) {
            classes.push(&o.class_label);
        }
        *class_counts.entry(&o.class_label).or_insert(0) += 1;
    }
    let mut caption = String::new();
    if classes.len() == 1 {
        let class = classes[0];
        let count = class_counts[class];
        let name = literal_class_name(class, count);
        if count == 1 {
            caption = "There is 1".to_owned() + &name + " in this image.";
        } else if count == 2 {
            caption = "There are 2".to_owned() + &name + " in this image.";
        } else if count <= 10 {
            caption =
                "There are ".to_owned() + &count.to_string() + " " + &name + " in this image.";
        } else {
            caption = "There are more than ten ".to_owned() + &name + " in this image.";
        }
    } else {
        for class in classes {
            let count = class_counts[class];
            let name = literal_class_name(class, count);
            if count == 1 {
                caption += &("There is 1".to_owned() + &name + " in this image. ");
            } else if count <= 10 {
                caption += &("There are ".to_owned()
                    + &count.to_string()
                    + " "
                    + &name
                    + " in this image. ");
            } else {
                caption += &("There are more than ten ".to_owned() + &name + " in this image. ");
            }
        }
    }
    caption
}

fn normalize_spacing(s: &str) -> String {
    s.replace("There is 1", "There is 1 ")
        .replace("There are 2", "There are 2 ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_1() -> Check {
    const CLASSES: [&str; 3] = ["ship", "bridge", "tank"];
    const COUNTS: [usize; 6] = [1, 2, 3, 10, 11, 50];
    let bbox = BoundingBox::new(0, 0, 4, 4).map_err(|e| e.to_string())?;
    let mut cases: Vec<Vec<usize>> = Vec::new();
    for k in 1..=3u32 {
        for code in 0..COUNTS.len().pow(k) {
            let mut rest = code;
            let counts = (0..k)
                .map(|_| {
                    let c = COUNTS[rest % COUNTS.len()];
                    rest /= COUNTS.len();
                    c
                })
                .collect();
            cases.push(counts);
        }
    }
    let start = Instant::now();
    let mut total = 0;
    for counts in &cases {
        let grouped: Vec<DetectionObject> = counts
            .iter()
            .zip(CLASSES)
            .flat_map(|(&n, c)| (0..n).map(move |_| DetectionObject::new(c, bbox)))
            .collect();
        let max = *counts.iter().max().unwrap();
        let interleaved: Vec<DetectionObject> = (0..max)
            .flat_map(|i| {
                counts
                    .iter()
                    .zip(CLASSES)
                    .filter(move |(&n, _)| i < n)
                    .map(move |(_, c)| DetectionObject::new(c, bbox))
            })
            .collect();
        for objects in [grouped, interleaved] {
            let expected = normalize_spacing(&literal_a2c(&objects));
            let actual = a2c_caption(&objects);
            ensure(actual == expected, || {
                format!("counts {counts:?}: got {actual:?}, trace {expected:?}")
            })?;
            total += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("{total}/{total} object lists agree in {elapsed:?}"))
}

// 2

const MASK_COLORS: [([u8; 3], &str); 6] = [
    ([0, 0, 255], "water"),
    ([255, 255, 0], "farmland"),
    ([255, 0, 0], "village"),
    ([0, 128, 0], "forest"),
    ([0, 100, 0], "forest"),
    ([128, 128, 128], "road"),
];
const UNMAPPED_COLOR: [u8; 3] = [7, 7, 7];

fn brute_force_percents(rgb: &[u8], pixels: usize) -> BTreeMap<&'static str, f64> {
    let mut counts: BTreeMap<&str, usize> = MASK_COLORS.iter().map(|(_, n)| (*n, 0)).collect();
    for px in rgb.chunks(3) {
        for (color, name) in MASK_COLORS {
            if px == color {
                *counts.get_mut(name).unwrap() += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(k, v)| (k, v as f64 * 100.0 / pixels as f64))
        .collect()
}

/// Category names in the order the second sentence mentions them.
fn mentioned_order(caption: &str) -> Vec<String> {
    let body = caption.split_once(". ").map(|(_, b)| b).unwrap_or("");
    body.trim_end_matches('.')
        .split(", ")
        .map(|clause| clause.trim_start_matches("and "))
        .flat_map(|clause| clause.split(" and "))
        .filter_map(|clause| clause.split_once(" accounts for "))
        .map(|(name, _)| name.to_lowercase())
        .collect()
}

fn criterion_2() -> Check {
    let mapping = CategoryMapping::new(
        MASK_COLORS
            .iter()
            .map(|(c, n)| (*c, (*n).to_owned()))
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let palette: Vec<[u8; 3]> = MASK_COLORS
        .iter()
        .map(|(c, _)| *c)
        .chain([UNMAPPED_COLOR])
        .collect();
    let threshold = 1.0;
    let mut surviving = 0;
    for m in 0..25 {
        let weights: Vec<f64> = palette
            .iter()
            .map(|_| rng.random::<f64>().powi(3))
            .collect();
        let total_weight: f64 = weights.iter().sum();
        let rgb: Vec<u8> = (0..256)
            .flat_map(|_| {
                let mut pick = rng.random::<f64>() * total_weight;
                let mut idx = palette.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if pick < *w {
                        idx = i;
                        break;
                    }
                    pick -= w;
                }
                palette[idx]
            })
            .collect();
        let grid = grid_from_rgb(16, 16, &rgb, &mapping, 0);
        let oracle = brute_force_percents(&rgb, 256);
        let props = category_proportions(&grid, &mapping).map_err(|e| e.to_string())?;
        for p in &props {
            let expected = oracle[p.category.as_str()];
            ensure(close_rel(p.percent, expected, 1e-9), || {
                format!(
                    "mask {m} {}: {} vs brute force {expected}",
                    p.category, p.percent
                )
            })?;
        }
        let caption = sa2c_caption(&grid, &mapping, threshold).map_err(|e| e.to_string())?;
        let order = mentioned_order(&caption);
        let mut expected_set: Vec<&str> = oracle
            .iter()
            .filter(|(_, &p)| p >= threshold)
            .map(|(n, _)| *n)
            .collect();
        let mut seen: Vec<&str> = order.iter().map(String::as_str).collect();
        seen.sort_unstable();
        expected_set.sort_unstable();
        ensure(seen == expected_set, || {
            format!("mask {m}: caption {caption:?} lists {order:?}, expected {expected_set:?}")
        })?;
        ensure(
            order
                .windows(2)
                .all(|w| oracle[w[0].as_str()] >= oracle[w[1].as_str()]),
            || format!("mask {m}: order not non-increasing in {caption:?}"),
        )?;
        surviving += order.len();

        let max = oracle.values().copied().fold(0.0, f64::max);
        if max < 100.0 {
            let above = (max + 100.0) / 2.0;
            let none = sa2c_caption(&grid, &mapping, above).map_err(|e| e.to_string())?;
            ensure(none == "No significant categories found.", || {
                format!("mask {m} at threshold {above}: {none:?}")
            })?;
        }
    }
    let blank = grid_from_rgb(16, 16, &UNMAPPED_COLOR.repeat(256), &mapping, 0);
    let none = sa2c_caption(&blank, &mapping, threshold).map_err(|e| e.to_string())?;
    ensure(none == "No significant categories found.", || {
        format!("unmapped mask: {none:?}")
    })?;
    Ok(format!(
        "25 masks match brute force, {surviving} listed categories ordered, empty branch reproduced"
    ))
}

// 3

const REWRITE_INPUT: &str = "The black and white aerial photograph depicts a landscape divided into two distinct sections by a diagonal line, with a large, rectangular farm or agricultural area on the left and a densely vegetated area on the right";
const REWRITE_OUTPUT: &str = "A landscape divided by a diagonal line, with a large farm on the left and a densely vegetated area on the right.";
const FUSION_A: &str = "This image contains farmland, village, and water. Water accounts for 88%, farmland accounts for 3%, and village accounts for 1%.";
const FUSION_B: &str = "The image presents an aerial view of a field, captured from a high angle. The field is divided into sections by a network of roads or pathways, creating a grid-like pattern.";
const FUSION_OUTPUT: &str = "The image showcases a vast water body dominating the scene, with a field divided into sections by a network of roads forming a grid-like pattern.";

fn criterion_3() -> Check {
    let root = workspace_root().join("fixtures");
    let endpoint =
        ReplayEndpoint::open(&root.join("reference/cassette.jsonl")).map_err(|e| e.to_string())?;
    let store_file = fs::File::open(root.join("icl_examples.jsonl")).map_err(|e| e.to_string())?;
    let store = read_icl_store(std::io::BufReader::new(store_file)).map_err(|e| e.to_string())?;
    let options = RewriteOptions {
        fallback_enabled: false,
        ..RewriteOptions::default()
    };

    let fused =
        fuse_captions(&endpoint, FUSION_A, FUSION_B, &options).map_err(|e| e.to_string())?;
    ensure(fused.text == FUSION_OUTPUT && !fused.fallback_used, || {
        format!("fusion gave {:?}", fused.text)
    })?;

    let job = RewriteJob::rewrite("reference/rewrite", REWRITE_INPUT, &store, 3, 0)
        .map_err(|e| e.to_string())?;
    let rewritten = rewrite_caption(&endpoint, &job, &options).map_err(|e| e.to_string())?;
    ensure(
        rewritten.text == REWRITE_OUTPUT && !rewritten.fallback_used,
        || format!("rewrite gave {:?}", rewritten.text),
    )?;

    let ruled = rule_rewrite(REWRITE_INPUT);
    let lower = ruled.to_lowercase();
    ensure(
        !lower.contains("black and white") && lower.contains("diagonal line"),
        || format!("rule rewrite gave {ruled:?}"),
    )?;
    Ok(format!(
        "fusion and rewrite replayed byte-exact; rule rewrite: {ruled:?}"
    ))
}

// 4

fn smooth_image(rng: &mut ChaCha8Rng, size: u32) -> RgbImage {
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.5..4.0),
                rng.random_range(0.5..4.0),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(20.0..60.0),
            )
        })
        .collect();
    RgbImage::from_fn(size, size, |x, y| {
        let (u, v) = (x as f64 / size as f64, y as f64 / size as f64);
        let value = waves.iter().fold(128.0, |acc, (fx, fy, phase, amp)| {
            acc + amp * (std::f64::consts::TAU * (fx * u + fy * v) + phase).sin()
        });
        let g = value.clamp(0.0, 255.0) as u8;
        image::Rgb([g, g, g])
    })
}

fn hash_of(img: &RgbImage) -> Result<PHash, String> {
    phash64(img.width(), img.height(), img.as_raw()).map_err(|e| e.to_string())
}

fn bit_loop_hamming(a: u64, b: u64) -> u32 {
    let mut d = 0;
    for bit in 0..64 {
        if (a >> bit) & 1 != (b >> bit) & 1 {
            d += 1;
        }
    }
    d
}

fn criterion_4() -> Check {
    const SIZE: u32 = 64;
    const THRESHOLD: u32 = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;

    let mut bases: Vec<(RgbImage, PHash)> = Vec::new();
    while bases.len() < 170 {
        let img = smooth_image(&mut rng, SIZE);
        let h = hash_of(&img)?;
        if bases
            .iter()
            .all(|(_, other)| hamming(h, *other) > 2 * THRESHOLD)
        {
            bases.push((img, h));
        }
    }
    let mut images: Vec<(String, RgbImage)> = bases
        .iter()
        .enumerate()
        .map(|(i, (img, _))| (format!("base{i:03}"), img.clone()))
        .collect();
    for i in 0..20 {
        let src = rng.random_range(0..bases.len());
        images.push((format!("exact{i:02}"), bases[src].0.clone()));
    }
    let mut near = 0;
    while near < 10 {
        let src = rng.random_range(0..bases.len());
        let mut img = bases[src].0.clone();
        for px in img.pixels_mut() {
            let g = (px[0] as i32 + rng.random_range(-3..=3)).clamp(0, 255) as u8;
            *px = image::Rgb([g, g, g]);
        }
        let d = hamming(hash_of(&img)?, bases[src].1);
        if (1..=THRESHOLD).contains(&d) || (d == 0 && img != bases[src].0) {
            images.push((format!("near{near:02}"), img));
            near += 1;
        }
    }
    images.shuffle(&mut rng);

    let mut samples = Vec::new();
    for (id, img) in &images {
        let path = dir.path().join(format!("{id}.png"));
        img.save(&path).map_err(|e| e.to_string())?;
        samples.push(AnnotatedSample {
            id: id.clone(),
            image_path: path,
            width: SIZE,
            height: SIZE,
            source_dataset: "synthetic".to_owned(),
            payload: Payload::Detections(Vec::new()),
        });
    }
    let policy = DedupPolicy {
        global_max_distance: THRESHOLD,
        ..DedupPolicy::default()
    };

    let start = Instant::now();
    let (kept, dropped) = dedup_corpus(&samples, &policy).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let hashes: Vec<PHash> = images
        .iter()
        .map(|(_, img)| hash_of(img))
        .collect::<Result<_, _>>()?;
    let mut oracle_kept: Vec<usize> = Vec::new();
    let mut oracle_dropped: Vec<usize> = Vec::new();
    for i in 0..hashes.len() {
        let is_duplicate = (0..i).any(|j| {
            oracle_kept.contains(&j) && bit_loop_hamming(hashes[i].0, hashes[j].0) <= THRESHOLD
        });
        if is_duplicate {
            oracle_dropped.push(i);
        } else {
            oracle_kept.push(i);
        }
    }
    let kept_ids: Vec<&str> = kept.iter().map(|s| s.id.as_str()).collect();
    let oracle_kept_ids: Vec<&str> = oracle_kept.iter().map(|&i| images[i].0.as_str()).collect();
    let dropped_ids: Vec<&str> = dropped.iter().map(|d| d.dropped_id.as_str()).collect();
    let oracle_dropped_ids: Vec<&str> = oracle_dropped
        .iter()
        .map(|&i| images[i].0.as_str())
        .collect();
    ensure(
        kept_ids == oracle_kept_ids && dropped_ids == oracle_dropped_ids,
        || {
            format!(
                "partition differs: kept {} vs oracle {}",
                kept_ids.len(),
                oracle_kept_ids.len()
            )
        },
    )?;
    ensure(dropped.len() == 30, || {
        format!("{} dropped, fixture has 30", dropped.len())
    })?;

    for _ in 0..10_000 {
        let (a, b) = (rng.random::<u64>(), rng.random::<u64>());
        let (fast, slow) = (hamming(PHash(a), PHash(b)), bit_loop_hamming(a, b));
        ensure(fast == slow, || {
            format!("hamming({a:#x}, {b:#x}) = {fast}, bit loop {slow}")
        })?;
    }
    ensure(elapsed < Duration::from_secs(5), || {
        format!("dedup took {elapsed:?}")
    })?;
    Ok(format!(
        "200 images: {} kept, {} dropped, equal to all-pairs oracle in {elapsed:?}; 10000 hamming pairs agree",
        kept.len(),
        dropped.len()
    ))
}

// 5

fn items(pairs: &[(&str, &str)]) -> Vec<CaptionEvalItem> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, (c, r))| CaptionEvalItem {
            id: i.to_string(),
            candidate: (*c).to_owned(),
            references: vec![(*r).to_owned()],
        })
        .collect()
}

fn criterion_5() -> Check {
    const CAPTIONS: [&str; 5] = [
        "Several ships are moored along the northern pier.",
        "A long bridge spans the river near the town.",
        "Farmland and a small village surround the lake.",
        "An airport runway crosses the flat open plain.",
        "Storage tanks line the edge of the harbor basin.",
    ];
    let identical: Vec<(&str, &str)> = CAPTIONS.iter().map(|c| (*c, *c)).collect();
    let r = evaluate_captions(&items(&identical), Smoothing::None).map_err(|e| e.to_string())?;
    let tol = 1e-9;
    for (name, value, target) in [
        ("BLEU-1", r.bleu1, 1.0),
        ("BLEU-2", r.bleu2, 1.0),
        ("BLEU-3", r.bleu3, 1.0),
        ("BLEU-4", r.bleu4, 1.0),
        ("ROUGE-L", r.rouge_l, 1.0),
        ("CIDEr", r.cider, 10.0),
    ] {
        ensure((value - target).abs() <= tol, || {
            format!("identity {name} = {value}, expected {target}")
        })?;
    }
    let disjoint = [
        ("ships moored along piers", "green forest covers hillsides"),
        ("bridge spans river town", "desert dunes stretch far away"),
        (
            "airport runway crosses plain",
            "dense clouds hide mountain peaks",
        ),
    ];
    let r = evaluate_captions(&items(&disjoint), Smoothing::None).map_err(|e| e.to_string())?;
    for (name, value) in [
        ("BLEU-1", r.bleu1),
        ("BLEU-2", r.bleu2),
        ("BLEU-3", r.bleu3),
        ("BLEU-4", r.bleu4),
        ("ROUGE-L", r.rouge_l),
        ("CIDEr", r.cider),
    ] {
        ensure(value.abs() <= tol, || format!("disjoint {name} = {value}"))?;
    }
    Ok("identical captions score 1.0 (CIDEr 10.0), disjoint captions score 0.0".to_owned())
}

// 6

fn criterion_6() -> Check {
    let root = workspace_root().join("fixtures/eval");
    let corpus = fs::read_to_string(root.join("toy_corpus.jsonl")).map_err(|e| e.to_string())?;
    let expected: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(root.join("toy_expected.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let items = parse_caption_items(&corpus).map_err(|e| e.to_string())?;
    let r = evaluate_captions(&items, Smoothing::None).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (name, value) in [
        ("BLEU-1", r.bleu1),
        ("BLEU-2", r.bleu2),
        ("BLEU-3", r.bleu3),
        ("BLEU-4", r.bleu4),
        ("ROUGE-L", r.rouge_l),
        ("CIDEr", r.cider),
    ] {
        let target = expected[name]
            .as_f64()
            .ok_or_else(|| format!("oracle file lacks {name}"))?;
        let diff = (value - target).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-6, || {
            format!("{name} = {value}, oracle {target}")
        })?;
    }
    Ok(format!(
        "{} items, largest deviation {worst:.2e}",
        items.len()
    ))
}

// 7

fn full_sort_recall(m: &[Vec<f64>], k: usize, direction: Direction) -> f64 {
    let n = m.len();
    let score = |q: usize, c: usize| match direction {
        Direction::I2t => m[q][c],
        Direction::T2i => m[c][q],
    };
    let hits = (0..n)
        .filter(|&q| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| score(q, b).total_cmp(&score(q, a)).then(a.cmp(&b)));
            order.iter().position(|&c| c == q).unwrap() < k
        })
        .count();
    100.0 * hits as f64 / n as f64
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, quantized: bool) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let bias = if i == j { 0.3 } else { 0.0 };
                    let v = rng.random::<f64>() + bias;
                    if quantized {
                        (v * 4.0).floor()
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

fn recalls(m: &SimilarityMatrix) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for d in [Direction::I2t, Direction::T2i] {
        for k in [1, 5, 10] {
            out.push(recall_at_k(m, k, d).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

fn criterion_7() -> Check {
    let identity =
        evaluate_retrieval(&SimilarityMatrix::identity(20)).map_err(|e| e.to_string())?;
    let all = [
        identity.i2t_r1,
        identity.i2t_r5,
        identity.i2t_r10,
        identity.t2i_r1,
        identity.t2i_r5,
        identity.t2i_r10,
        identity.mean_recall,
    ];
    ensure(all.iter().all(|&v| v == 100.0), || {
        format!("identity recalls {all:?}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..50 {
        let rows = random_rows(&mut rng, 20, trial % 5 == 0);
        let m = SimilarityMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
        for d in [Direction::I2t, Direction::T2i] {
            let mut previous = 0.0;
            for k in [1, 5, 10] {
                let got = recall_at_k(&m, k, d).map_err(|e| e.to_string())?;
                let want = full_sort_recall(&rows, k, d);
                ensure(got == want, || {
                    format!("trial {trial} {d:?} R@{k}: {got} vs full sort {want}")
                })?;
                ensure(got >= previous, || {
                    format!("trial {trial} {d:?}: R@{k} decreased")
                })?;
                previous = got;
            }
        }
    }

    let transforms: [fn(f64) -> f64; 4] =
        [|x| x.exp(), |x| 3.0 * x - 7.0, |x| x.powi(3), |x| x.atan()];
    for trial in 0..20 {
        let rows = random_rows(&mut rng, 20, false);
        let m = SimilarityMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
        let f = transforms[trial % transforms.len()];
        let mapped = m.map(f).map_err(|e| e.to_string())?;
        let (a, b) = (recalls(&m)?, recalls(&mapped)?);
        ensure(a == b, || format!("trial {trial}: {a:?} became {b:?}"))?;
    }
    Ok("identity at 100.0; 50 matrices equal the full-sort oracle with R@1 <= R@5 <= R@10; 20 monotone transforms invariant".to_owned())
}

// 8

fn run_all(config: &Path, out: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    let output = Command::new(env!("CARGO_BIN_EXE_sar-narrator"))
        .env_remove("SAR_NARRATOR_SEED")
        .env_remove("SAR_NARRATOR_MODE")
        .env_remove("SAR_NARRATOR_OUT")
        .env_remove("SOURCE_DATE_EPOCH")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("run-all")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(output.status.success(), || {
        format!(
            "run-all exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr)
        )
    })?;
    Ok(elapsed)
}

fn criterion_8() -> Check {
    let config = workspace_root().join("fixtures/mini/pipeline.toml");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (first, second) = (dir.path().join("first"), dir.path().join("second"));
    let elapsed = run_all(&config, &first)?;
    ensure(elapsed < Duration::from_secs(30), || {
        format!("run-all took {elapsed:?}")
    })?;
    run_all(&config, &second)?;

    let manifest = read_manifest(&first.join("manifest.jsonl")).map_err(|e| e.to_string())?;
    let mut per_method: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &manifest.records {
        *per_method.entry(r.method.as_str()).or_insert(0) += 1;
    }
    let expected: BTreeMap<&str, usize> = [
        ("a2c_spatial", 6),
        ("paired_rewritten", 6),
        ("sa2c_fused", 6),
    ]
    .into();
    ensure(
        manifest.records.len() == 18 && per_method == expected,
        || {
            format!(
                "{} records, per method {per_method:?}",
                manifest.records.len()
            )
        },
    )?;

    for name in ["manifest.jsonl", "manifest.header.json"] {
        let a = fs::read(first.join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(second.join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name} differs between runs"))?;
    }
    Ok(format!(
        "18 records {per_method:?} in {elapsed:?}; rerun byte-identical"
    ))
}

// 9

const STATS_CAPTIONS: [&str; 10] = [
    "Ships at sea.",
    "A bridge crosses the river.",
    "Two ships are docked near the harbor.",
    "Farmland surrounds a small village.",
    "Water dominates the scene.",
    "A road runs past houses and fields toward the coast.",
    "Large rectangular fields are separated by narrow roads.",
    "There are more than ten ships in this image.",
    "An airport with two runways and several large hangars beside a busy highway interchange.",
    "Storage tanks.",
];

fn criterion_9() -> Check {
    let records: Vec<CaptionRecord> = STATS_CAPTIONS
        .iter()
        .enumerate()
        .map(|(i, c)| CaptionRecord {
            id: format!("s{i}"),
            image_path: format!("s{i}.png"),
            caption: (*c).to_owned(),
            raw_caption: None,
            method: Method::A2c,
            source_dataset: if i % 2 == 0 { "even" } else { "odd" }.to_owned(),
            fallback_used: false,
        })
        .collect();
    let stats = compute_stats(&records).map_err(|e| e.to_string())?;
    // lengths 3 5 7 5 4 10 8 9 14 2
    let histogram = vec![
        HistogramBucket {
            min_words: 0,
            max_words: 4,
            count: 3,
        },
        HistogramBucket {
            min_words: 5,
            max_words: 9,
            count: 5,
        },
        HistogramBucket {
            min_words: 10,
            max_words: 14,
            count: 2,
        },
    ];
    ensure(
        stats.total_words == 67 && stats.mean_caption_length_words == 6.7,
        || {
            format!(
                "{} words, mean {}",
                stats.total_words, stats.mean_caption_length_words
            )
        },
    )?;
    ensure(stats.length_histogram == histogram, || {
        format!("histogram {:?}", stats.length_histogram)
    })?;
    ensure(stats.share_over_10_words == 0.1, || {
        format!("share over 10 words {}", stats.share_over_10_words)
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut shuffled = records.clone();
    for _ in 0..10 {
        shuffled.shuffle(&mut rng);
        let again = compute_stats(&shuffled).map_err(|e| e.to_string())?;
        ensure(again == stats, || {
            "stats changed under permutation".to_owned()
        })?;
    }
    Ok("mean 6.7 and histogram [3, 5, 2] match; 10 permutations unchanged".to_owned())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("A2C conformance", criterion_1),
        ("SA2C oracle", criterion_2),
        ("worked example fidelity", criterion_3),
        ("dedup", criterion_4),
        ("metric identities", criterion_5),
        ("metric oracles", criterion_6),
        ("retrieval", criterion_7),
        ("end-to-end", criterion_8),
        ("stats", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
