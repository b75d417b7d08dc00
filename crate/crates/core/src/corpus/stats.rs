use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{CaptionRecord, CorpusError};
use crate::eval::tokenize;

/// Fixed English function-word list excluded from `top_words`.
pub const STOPWORDS: [&str; 50] = [
    "a", "an", "the", "and", "or", "but", "of", "in", "on", "at", "to", "for", "with", "by",
    "from", "as", "into", "onto", "over", "under", "near", "is", "are", "was", "were", "be",
    "been", "being", "it", "its", "this", "that", "these", "those", "there", "their", "they",
    "which", "while", "has", "have", "had", "some", "other", "can", "also", "such", "than", "then",
    "each",
];

pub const BUCKET_WIDTH: usize = 5;
pub const TOP_WORDS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBucket {
    /// Inclusive word-count range.
    pub min_words: usize,
    pub max_words: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_records: usize,
    pub total_words: u64,
    pub mean_caption_length_words: f64,
    /// Contiguous buckets from 0 up to the longest caption.
    pub length_histogram: Vec<HistogramBucket>,
    pub share_over_10_words: f64,
    pub top_words: Vec<(String, u64)>,
    pub per_source_counts: BTreeMap<String, usize>,
    pub per_method_counts: BTreeMap<String, usize>,
}

/// Words after lowercasing and ASCII punctuation removal.
pub fn word_count(caption: &str) -> usize {
    tokenize(caption).len()
}

#[derive(Default)]
struct Partial {
    total: usize,
    words: u64,
    over_10: usize,
    lengths: BTreeMap<usize, usize>,
    vocab: HashMap<String, u64>,
    sources: BTreeMap<String, usize>,
    methods: BTreeMap<String, usize>,
}

impl Partial {
    fn of(records: &[CaptionRecord]) -> Self {
        let mut p = Partial::default();
        for r in records {
            let tokens = tokenize(&r.caption);
            let len = tokens.len();
            p.total += 1;
            p.words += len as u64;
            p.over_10 += usize::from(len > 10);
            *p.lengths.entry(len / BUCKET_WIDTH).or_insert(0) += 1;
            for t in tokens.tokens() {
                if !STOPWORDS.contains(&t.as_str()) {
                    *p.vocab.entry(t.clone()).or_insert(0) += 1;
                }
            }
            *p.sources.entry(r.source_dataset.clone()).or_insert(0) += 1;
            *p.methods.entry(r.method.as_str().to_owned()).or_insert(0) += 1;
        }
        p
    }

    fn merge(mut self, other: Partial) -> Self {
        self.total += other.total;
        self.words += other.words;
        self.over_10 += other.over_10;
        for (k, v) in other.lengths {
            *self.lengths.entry(k).or_insert(0) += v;
        }
        for (k, v) in other.vocab {
            *self.vocab.entry(k).or_insert(0) += v;
        }
        for (k, v) in other.sources {
            *self.sources.entry(k).or_insert(0) += v;
        }
        for (k, v) in other.methods {
            *self.methods.entry(k).or_insert(0) += v;
        }
        self
    }
}

/// Corpus statistics; the result does not depend on record order.
pub fn compute_stats(records: &[CaptionRecord]) -> Result<CorpusStats, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyManifest);
    }
    let chunks: Vec<&[CaptionRecord]> = records.chunks(1024).collect();
    let p = crate::par::map(&chunks, |c| Partial::of(c))
        .into_iter()
        .fold(Partial::default(), Partial::merge);

    let last = p.lengths.keys().next_back().copied().unwrap_or(0);
    let length_histogram = (0..=last)
        .map(|b| HistogramBucket {
            min_words: b * BUCKET_WIDTH,
            max_words: b * BUCKET_WIDTH + BUCKET_WIDTH - 1,
            count: p.lengths.get(&b).copied().unwrap_or(0),
        })
        .collect();
    let mut top_words: Vec<(String, u64)> = p.vocab.into_iter().collect();
    top_words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top_words.truncate(TOP_WORDS);

    Ok(CorpusStats {
        total_records: p.total,
        total_words: p.words,
        mean_caption_length_words: p.words as f64 / p.total as f64,
        length_histogram,
        share_over_10_words: p.over_10 as f64 / p.total as f64,
        top_words,
        per_source_counts: p.sources,
        per_method_counts: p.methods,
    })
}

impl CorpusStats {
    /// Plain-text summary with the mean rounded to one decimal.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "records: {}\nmean caption length: {:.1} words\ncaptions over 10 words: {:.1}%\nlength histogram:\n",
            self.total_records,
            self.mean_caption_length_words,
            100.0 * self.share_over_10_words
        );
        for b in &self.length_histogram {
            out.push_str(&format!(
                "  {:>3}-{:<3} {}\n",
                b.min_words, b.max_words, b.count
            ));
        }
        out.push_str("top words:\n");
        for (w, c) in self.top_words.iter().take(20) {
            out.push_str(&format!("  {w} {c}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Method;

    fn rec(id: usize, caption: &str) -> CaptionRecord {
        CaptionRecord {
            id: id.to_string(),
            image_path: String::new(),
            caption: caption.into(),
            raw_caption: None,
            method: Method::A2c,
            source_dataset: "s".into(),
            fallback_used: false,
        }
    }

    #[test]
    fn single_caption() {
        let s = compute_stats(&[rec(0, "a b c")]).unwrap();
        assert_eq!(s.mean_caption_length_words, 3.0);
        assert_eq!(
            s.length_histogram,
            vec![HistogramBucket {
                min_words: 0,
                max_words: 4,
                count: 1
            }]
        );
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(
            compute_stats(&[]),
            Err(CorpusError::EmptyManifest)
        ));
    }

    #[test]
    fn stopwords_are_fifty_distinct() {
        let set: std::collections::HashSet<_> = STOPWORDS.iter().collect();
        assert_eq!(set.len(), 50);
    }

    #[test]
    fn ship_dominates() {
        let s = compute_stats(&[
            rec(0, "A ship in the harbor."),
            rec(1, "Two ships, one ship docked."),
            rec(2, "The ship and the harbor."),
        ])
        .unwrap();
        assert_eq!(s.top_words[0], ("ship".to_owned(), 3));
        assert_eq!(s.top_words[1], ("harbor".to_owned(), 2));
        assert!(s.top_words.iter().all(|(w, _)| w != "the"));
    }

    #[test]
    fn histogram_fills_gaps() {
        let long = ["w"; 12].join(" ");
        let s = compute_stats(&[rec(0, "one"), rec(1, &long)]).unwrap();
        let counts: Vec<usize> = s.length_histogram.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![1, 0, 1]);
        assert_eq!(s.share_over_10_words, 0.5);
    }
}
