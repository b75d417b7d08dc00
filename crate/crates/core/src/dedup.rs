//! Perceptual-hash deduplication.
//!
//! The hash is the common DCT variant: integer Rec.601 luma, area-average
//! resize to 32x32, 2-D DCT-II, top-left 8x8 block, each AC coefficient
//! compared with the median of the 63 AC coefficients. The resized block is
//! mean-centred in exact integer arithmetic first, so flat images hash to
//! zero and a uniform brightness offset leaves the hash unchanged.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const RESIZED: usize = 32;
const BLOCK: usize = 8;
const MIN_SIDE: u32 = 8;

/// Below this many samples the drop scan compares against every kept hash.
const INDEX_MIN_SAMPLES: usize = 10_000;
/// Band lookups are exact only while a match must share one 16-bit band.
const INDEX_MAX_DISTANCE: u32 = 3;

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("{}: image is {width}x{height}, both sides must be at least {MIN_SIDE}", path.display())]
    TooSmall {
        path: std::path::PathBuf,
        width: u32,
        height: u32,
    },
    #[error("{}: unreadable image: {message}", path.display())]
    UnreadableImage {
        path: std::path::PathBuf,
        message: String,
    },
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<DedupError>,
    },
    #[error("max distance {0} exceeds 64")]
    InvalidDistance(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PHash(pub u64);

impl fmt::Display for PHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

pub fn hamming(a: PHash, b: PHash) -> u32 {
    (a.0 ^ b.0).count_ones()
}

/// Hash of a file on disk.
pub fn phash_file(path: &Path) -> Result<PHash, DedupError> {
    let img = image::open(path).map_err(|e| DedupError::UnreadableImage {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    phash64(rgb.width(), rgb.height(), rgb.as_raw()).map_err(|e| match e {
        DedupError::TooSmall { width, height, .. } => DedupError::TooSmall {
            path: path.to_owned(),
            width,
            height,
        },
        other => other,
    })
}

/// Hash of packed RGB bytes.
pub fn phash64(width: u32, height: u32, rgb: &[u8]) -> Result<PHash, DedupError> {
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(DedupError::TooSmall {
            path: "<raster>".into(),
            width,
            height,
        });
    }
    let (w, h) = (width as usize, height as usize);
    assert_eq!(rgb.len(), w * h * 3, "rgb buffer does not match dimensions");
    // luma scaled by 1000 stays integral
    let luma: Vec<i64> = rgb
        .chunks_exact(3)
        .map(|p| 299 * i64::from(p[0]) + 587 * i64::from(p[1]) + 114 * i64::from(p[2]))
        .collect();

    let cells = area_sums(&luma, w, h);
    let total: i128 = cells.iter().sum();
    let n = (RESIZED * RESIZED) as i128;
    // n * (cell - mean), exact
    let centred: Vec<f64> = cells.iter().map(|&c| (c * n - total) as f64).collect();

    let coefficients = dct_block(&centred);
    let mut ac: Vec<f64> = coefficients[1..].to_vec();
    ac.sort_by(f64::total_cmp);
    let median = ac[ac.len() / 2];

    let mut bits = 0u64;
    for (i, &c) in coefficients.iter().enumerate().skip(1) {
        if c > median {
            bits |= 1 << (63 - i);
        }
    }
    Ok(PHash(bits))
}

/// Area-weighted sums over a 32x32 grid. In units where a source pixel spans
/// 32 sub-units along each axis, every output cell spans `w` by `h`
/// sub-units, so overlaps are whole numbers and all cells share the same
/// weight total.
fn area_sums(luma: &[i64], w: usize, h: usize) -> Vec<i128> {
    let x_overlaps = overlaps(w);
    let y_overlaps = overlaps(h);
    let mut out = vec![0i128; RESIZED * RESIZED];
    for (cy, ys) in y_overlaps.iter().enumerate() {
        for (cx, xs) in x_overlaps.iter().enumerate() {
            let mut acc = 0i128;
            for &(y, wy) in ys {
                let row = &luma[y * w..(y + 1) * w];
                for &(x, wx) in xs {
                    acc += i128::from(row[x]) * i128::from(wx * wy);
                }
            }
            out[cy * RESIZED + cx] = acc;
        }
    }
    out
}

/// For each output cell, the source pixels it covers and the overlap length.
fn overlaps(extent: usize) -> Vec<Vec<(usize, i64)>> {
    let e = extent as i64;
    let r = RESIZED as i64;
    (0..r)
        .map(|cell| {
            let (lo, hi) = (cell * e, (cell + 1) * e);
            let first = lo / r;
            let last = (hi - 1) / r;
            (first..=last)
                .map(|p| {
                    let (plo, phi) = (p * r, (p + 1) * r);
                    (p as usize, phi.min(hi) - plo.max(lo))
                })
                .collect()
        })
        .collect()
}

/// Top-left 8x8 DCT-II coefficients of a 32x32 block, row-major.
fn dct_block(input: &[f64]) -> [f64; BLOCK * BLOCK] {
    let n = RESIZED as f64;
    let basis: Vec<[f64; RESIZED]> = (0..BLOCK)
        .map(|u| {
            let mut row = [0.0; RESIZED];
            for (x, v) in row.iter_mut().enumerate() {
                *v = (std::f64::consts::PI * (2.0 * x as f64 + 1.0) * u as f64 / (2.0 * n)).cos();
            }
            row
        })
        .collect();
    // rows first: partial[y][u]
    let mut partial = vec![[0.0; BLOCK]; RESIZED];
    for (y, out) in partial.iter_mut().enumerate() {
        let row = &input[y * RESIZED..(y + 1) * RESIZED];
        for (u, slot) in out.iter_mut().enumerate() {
            *slot = row.iter().zip(&basis[u]).map(|(a, b)| a * b).sum();
        }
    }
    let mut coefficients = [0.0; BLOCK * BLOCK];
    for v in 0..BLOCK {
        for u in 0..BLOCK {
            coefficients[v * BLOCK + u] = (0..RESIZED).map(|y| partial[y][u] * basis[v][y]).sum();
        }
    }
    coefficients
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedupPolicy {
    /// Largest Hamming distance treated as a duplicate across sources.
    #[serde(default)]
    pub global_max_distance: u32,
    /// Per-source overrides, applied when both samples share the source.
    #[serde(default)]
    pub per_source_max_distance: BTreeMap<String, u32>,
}

impl DedupPolicy {
    pub fn validate(&self) -> Result<(), DedupError> {
        std::iter::once(self.global_max_distance)
            .chain(self.per_source_max_distance.values().copied())
            .find(|&d| d > 64)
            .map_or(Ok(()), |d| Err(DedupError::InvalidDistance(d)))
    }

    fn threshold(&self, a: &str, b: &str) -> (u32, Rule) {
        if a == b {
            if let Some(&d) = self.per_source_max_distance.get(a) {
                return (d, Rule::Source(a.to_owned()));
            }
        }
        (self.global_max_distance, Rule::Global)
    }

    fn max_distance(&self) -> u32 {
        self.per_source_max_distance
            .values()
            .copied()
            .chain(std::iter::once(self.global_max_distance))
            .max()
            .unwrap_or(0)
    }
}

/// Which threshold caused a drop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    Global,
    Source(String),
}

impl Serialize for Rule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Rule::Global => s.serialize_str("global"),
            Rule::Source(name) => s.serialize_str(&format!("source:{name}")),
        }
    }
}

impl<'de> Deserialize<'de> for Rule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.strip_prefix("source:") {
            Some(name) => Ok(Rule::Source(name.to_owned())),
            None if s == "global" => Ok(Rule::Global),
            None => Err(serde::de::Error::custom(format!("unknown rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropEntry {
    pub dropped_id: String,
    pub kept_id: String,
    pub distance: u32,
    pub rule: Rule,
}

/// Hash plus the identity fields the scan needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedItem {
    pub id: String,
    pub source: String,
    pub hash: PHash,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DedupOutcome {
    /// Indices into the input, in input order.
    pub kept: Vec<usize>,
    pub dropped: Vec<DropEntry>,
}

/// Greedy first-kept scan: an item is dropped when an earlier kept item lies
/// within the applicable distance; the ledger names the earliest such item.
pub fn dedup_hashes(
    items: &[HashedItem],
    policy: &DedupPolicy,
) -> Result<DedupOutcome, DedupError> {
    policy.validate()?;
    if items.len() >= INDEX_MIN_SAMPLES && policy.max_distance() <= INDEX_MAX_DISTANCE {
        Ok(scan(items, policy, BandIndex::default()))
    } else {
        Ok(scan(items, policy, Linear::default()))
    }
}

trait KeptSet {
    fn insert(&mut self, position: usize, hash: PHash);
    /// Kept positions that may lie within `max_distance` of `hash`, in
    /// ascending order.
    fn candidates(&self, hash: PHash, max_distance: u32) -> Vec<usize>;
}

#[derive(Default)]
struct Linear {
    kept: Vec<usize>,
}

impl KeptSet for Linear {
    fn insert(&mut self, position: usize, _: PHash) {
        self.kept.push(position);
    }

    fn candidates(&self, _: PHash, _: u32) -> Vec<usize> {
        self.kept.clone()
    }
}

/// Four 16-bit bands. Two hashes within distance 3 agree on at least one
/// band, so band buckets find every candidate.
#[derive(Default)]
struct BandIndex {
    bands: [HashMap<u16, Vec<usize>>; 4],
}

impl BandIndex {
    fn band(hash: PHash, i: usize) -> u16 {
        (hash.0 >> (16 * i)) as u16
    }
}

impl KeptSet for BandIndex {
    fn insert(&mut self, position: usize, hash: PHash) {
        for (i, band) in self.bands.iter_mut().enumerate() {
            band.entry(Self::band(hash, i)).or_default().push(position);
        }
    }

    fn candidates(&self, hash: PHash, max_distance: u32) -> Vec<usize> {
        debug_assert!(max_distance <= INDEX_MAX_DISTANCE);
        let mut out: Vec<usize> = (0..4)
            .filter_map(|i| self.bands[i].get(&Self::band(hash, i)))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn scan<K: KeptSet>(items: &[HashedItem], policy: &DedupPolicy, mut kept_set: K) -> DedupOutcome {
    let max = policy.max_distance();
    let mut outcome = DedupOutcome::default();
    for (i, item) in items.iter().enumerate() {
        let duplicate = kept_set
            .candidates(item.hash, max)
            .into_iter()
            .find_map(|k| {
                let other = &items[k];
                let (limit, rule) = policy.threshold(&item.source, &other.source);
                let d = hamming(item.hash, other.hash);
                (d <= limit).then(|| DropEntry {
                    dropped_id: item.id.clone(),
                    kept_id: other.id.clone(),
                    distance: d,
                    rule,
                })
            });
        match duplicate {
            Some(entry) => outcome.dropped.push(entry),
            None => {
                kept_set.insert(i, item.hash);
                outcome.kept.push(i);
            }
        }
    }
    outcome
}

/// Hashes every sample image (in parallel) and runs the drop scan.
pub fn dedup_corpus(
    samples: &[crate::ingest::AnnotatedSample],
    policy: &DedupPolicy,
) -> Result<(Vec<crate::ingest::AnnotatedSample>, Vec<DropEntry>), DedupError> {
    let hashes = crate::par::map(samples, |s| {
        phash_file(&s.image_path).map_err(|e| DedupError::Sample {
            id: s.id.clone(),
            source: Box::new(e),
        })
    });
    let items = samples
        .iter()
        .zip(hashes)
        .map(|(s, h)| {
            Ok(HashedItem {
                id: s.id.clone(),
                source: s.source_dataset.clone(),
                hash: h?,
            })
        })
        .collect::<Result<Vec<_>, DedupError>>()?;
    let outcome = dedup_hashes(&items, policy)?;
    let kept = outcome.kept.iter().map(|&i| samples[i].clone()).collect();
    Ok((kept, outcome.dropped))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn noise(seed: u64, w: u32, h: u32) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..w * h * 3).map(|_| rng.random_range(20..230)).collect()
    }

    #[test]
    fn constant_image_hashes_to_zero() {
        for v in [0u8, 77, 255] {
            assert_eq!(phash64(40, 24, &vec![v; 40 * 24 * 3]).unwrap(), PHash(0));
        }
    }

    #[test]
    fn deterministic_and_offset_invariant() {
        let img = noise(3, 64, 48);
        let a = phash64(64, 48, &img).unwrap();
        assert_eq!(a, phash64(64, 48, &img).unwrap());
        let brighter: Vec<u8> = img.iter().map(|v| v + 5).collect();
        assert_eq!(hamming(a, phash64(64, 48, &brighter).unwrap()), 0);
        assert_ne!(a, PHash(0));
    }

    #[test]
    fn unrelated_images_are_far_apart() {
        let a = phash64(64, 64, &noise(1, 64, 64)).unwrap();
        let b = phash64(64, 64, &noise(2, 64, 64)).unwrap();
        assert!(hamming(a, b) > 10);
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            phash64(7, 20, &[0; 7 * 20 * 3]),
            Err(DedupError::TooSmall { .. })
        ));
    }

    #[test]
    fn overlaps_cover_each_pixel_fully() {
        for extent in [8usize, 31, 32, 33, 100, 513] {
            let mut per_pixel = vec![0i64; extent];
            for cell in overlaps(extent) {
                let sum: i64 = cell.iter().map(|(_, w)| w).sum();
                assert_eq!(sum, extent as i64);
                for (p, w) in cell {
                    per_pixel[p] += w;
                }
            }
            assert!(per_pixel.iter().all(|&w| w == RESIZED as i64));
        }
    }

    #[test]
    fn hamming_extremes() {
        let h = PHash(0xdead_beef);
        assert_eq!(hamming(h, h), 0);
        assert_eq!(hamming(PHash(0), PHash(u64::MAX)), 64);
    }

    fn item(id: &str, source: &str, hash: u64) -> HashedItem {
        HashedItem {
            id: id.into(),
            source: source.into(),
            hash: PHash(hash),
        }
    }

    #[test]
    fn exact_duplicate_dropped_and_ledgered() {
        let items = [
            item("a", "s", 0xff),
            item("b", "s", 0x0f),
            item("c", "t", 0xff),
        ];
        let out = dedup_hashes(&items, &DedupPolicy::default()).unwrap();
        assert_eq!(out.kept, vec![0, 1]);
        assert_eq!(
            out.dropped,
            vec![DropEntry {
                dropped_id: "c".into(),
                kept_id: "a".into(),
                distance: 0,
                rule: Rule::Global
            }]
        );
        assert_eq!(
            dedup_hashes(&[], &DedupPolicy::default()).unwrap(),
            DedupOutcome::default()
        );
    }

    #[test]
    fn per_source_threshold_only_within_source() {
        let mut policy = DedupPolicy::default();
        policy.per_source_max_distance.insert("s".into(), 4);
        let items = [
            item("a", "s", 0b0000),
            item("b", "s", 0b0111),
            item("c", "t", 0b0001),
        ];
        let out = dedup_hashes(&items, &policy).unwrap();
        assert_eq!(out.kept, vec![0, 2]);
        assert_eq!(out.dropped[0].rule, Rule::Source("s".into()));
        assert_eq!(out.dropped[0].distance, 3);
        let json = serde_json::to_string(&out.dropped[0]).unwrap();
        assert_eq!(
            json,
            r#"{"dropped_id":"b","kept_id":"a","distance":3,"rule":"source:s"}"#
        );
    }

    #[test]
    fn band_index_agrees_with_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut items = Vec::new();
        for i in 0..3000 {
            let hash = if i > 0 && rng.random_bool(0.3) {
                let base: &HashedItem = &items[rng.random_range(0..items.len())];
                let mut h = base.hash.0;
                for _ in 0..rng.random_range(0..5) {
                    h ^= 1 << rng.random_range(0..64);
                }
                h
            } else {
                rng.random()
            };
            let source = if rng.random_bool(0.5) { "a" } else { "b" };
            items.push(item(&format!("{i}"), source, hash));
        }
        let mut policy = DedupPolicy {
            global_max_distance: 1,
            ..Default::default()
        };
        policy.per_source_max_distance.insert("a".into(), 3);
        let linear = scan(&items, &policy, Linear::default());
        let banded = scan(&items, &policy, BandIndex::default());
        assert_eq!(linear, banded);
        assert!(!linear.dropped.is_empty());
    }

    #[test]
    fn policy_rejects_out_of_range() {
        let policy = DedupPolicy {
            global_max_distance: 65,
            ..Default::default()
        };
        assert!(dedup_hashes(&[], &policy).is_err());
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric(a: u64, b: u64, c: u64) {
            let (a, b, c) = (PHash(a), PHash(b), PHash(c));
            prop_assert_eq!(hamming(a, b), hamming(b, a));
            prop_assert_eq!(hamming(a, b) == 0, a == b);
            prop_assert!(hamming(a, c) <= hamming(a, b) + hamming(b, c));
        }

        #[test]
        fn kept_and_dropped_partition_input(hashes in proptest::collection::vec(0u64..16, 0..40), d in 0u32..3) {
            let items: Vec<_> = hashes.iter().enumerate().map(|(i, &h)| item(&i.to_string(), "s", h)).collect();
            let policy = DedupPolicy { global_max_distance: d, ..Default::default() };
            let out = dedup_hashes(&items, &policy).unwrap();
            prop_assert_eq!(out.kept.len() + out.dropped.len(), items.len());
            for (x, &i) in out.kept.iter().enumerate() {
                for &j in &out.kept[x + 1..] {
                    prop_assert!(hamming(items[i].hash, items[j].hash) > d);
                }
            }
        }
    }
}
