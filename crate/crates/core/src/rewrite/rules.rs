//! Deterministic rule-based rewrite used when the chat endpoint is
//! unavailable.
//!
//! Four passes mirror the rewrite principles: color words, hedged clauses,
//! tree noun phrases, camera and imaging remarks. Passes repeat until the
//! text stops changing, which makes the rewrite idempotent.

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const COLOR_WORDS: &[&str] = &[
    "black and white",
    "shades of",
    "shade of",
    "gray",
    "grey",
    "black",
    "white",
    "shades",
    "shade",
    "colored",
    "colorful",
    "green",
    "blue",
    "brown",
    "red",
    "yellow",
    "orange",
    "dark",
    "light",
];

pub const HEDGE_MARKERS: &[&str] = &[
    "possibly",
    "likely",
    "perhaps",
    "appears to be",
    "seems to",
    "might be",
    "probably",
];

pub const TREE_HEADS: &[&str] = &["trees", "tree"];

pub const CAMERA_TERMS: &[&str] = &[
    "aerial photograph",
    "camera",
    "photograph",
    "photo",
    "image quality",
    "resolution",
    "angle",
    "lens",
];

/// Words a tree noun phrase may start with before its head.
const TREE_MODIFIERS: &[&str] = &[
    "a",
    "an",
    "the",
    "some",
    "several",
    "many",
    "few",
    "numerous",
    "scattered",
    "sparse",
    "dense",
    "densely",
    "tall",
    "small",
    "large",
    "big",
    "lush",
    "leafy",
    "mature",
    "rows",
    "row",
    "clusters",
    "cluster",
    "groups",
    "group",
    "patches",
    "patch",
    "lines",
    "line",
    "of",
    "few",
    "isolated",
    "clumps",
    "clump",
];

/// Function words stripped from the edges of a clause after a deletion.
const DANGLING_TAIL: &[&str] = &[
    "and", "or", "with", "by", "of", "in", "on", "at", "a", "an", "the", "is", "are", "was",
    "were", "be", "which", "that", "its", "their", "as", "such",
];
const DANGLING_HEAD: &[&str] = &["and", "or", "but", "with", "of"];

const FRAMING_SUBJECTS: &[&str] = &["photograph", "photo", "image", "picture", "view", "scene"];
const FRAMING_VERBS: &[&str] = &[
    "depicts",
    "shows",
    "presents",
    "captures",
    "showcases",
    "displays",
    "features",
    "illustrates",
    "portrays",
    "reveals",
];

/// Extra lexicon entries layered on the built-in lists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleExtensions {
    #[serde(default)]
    pub colors: Vec<String>,
    #[serde(default)]
    pub hedges: Vec<String>,
    #[serde(default)]
    pub camera_terms: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RuleRewriter {
    colors: Regex,
    color_words: Regex,
    hedge: Regex,
    trees: Regex,
    camera: Regex,
    framing: Regex,
    stray: Regex,
}

fn alternation(words: impl IntoIterator<Item = String>) -> String {
    let mut words: Vec<String> = words.into_iter().map(|w| w.to_lowercase()).collect();
    // longest first so multi-word entries win
    words.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    words.dedup();
    words
        .iter()
        .map(|w| regex::escape(w).replace(' ', r"\s+"))
        .collect::<Vec<_>>()
        .join("|")
}

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| (*w).to_owned()).collect()
}

impl Default for RuleRewriter {
    fn default() -> Self {
        Self::new(&RuleExtensions::default())
    }
}

impl RuleRewriter {
    pub fn new(ext: &RuleExtensions) -> Self {
        let colors = alternation(owned(COLOR_WORDS).into_iter().chain(ext.colors.clone()));
        let hedges = alternation(owned(HEDGE_MARKERS).into_iter().chain(ext.hedges.clone()));
        let camera = alternation(
            owned(CAMERA_TERMS)
                .into_iter()
                .chain(ext.camera_terms.clone()),
        );
        let modifiers = alternation(owned(TREE_MODIFIERS));
        let heads = alternation(owned(TREE_HEADS));
        let build = |p: String| Regex::new(&p).expect("lexicon regex compiles");
        Self {
            // a run of color words, optionally chained by commas/and/or
            colors: build(format!(
                r"(?i)\b(?:{colors})(?:\s*(?:,|\band\b|\bor\b|-)\s*(?:{colors}))*\b(?:-(?:colored|toned|tinted|hued))?"
            )),
            color_words: build(format!(r"(?i)\b(?:{colors})\b")),
            hedge: build(format!(r"(?i)\b(?:{hedges})\b")),
            trees: build(format!(
                r"(?i)(?:\b(?:with|and|or|among|including)\s+)?\b(?:(?:{modifiers})\s+)*(?:{heads})\b"
            )),
            camera: build(format!(r"(?i)\b(?:{camera})\b")),
            framing: build(format!(
                r"(?i)^(?:the|this|an?)\s+(?:[\w-]+\s+){{0,3}}?(?:{})\s+(?:{})\s+",
                FRAMING_SUBJECTS.join("|"),
                FRAMING_VERBS.join("|")
            )),
            stray: build(r"(?:^|\s)[-\u{2013}]+(?:\s|$)".into()),
        }
    }

    pub fn rewrite(&self, caption: &str) -> String {
        let mut current = caption.to_owned();
        for _ in 0..8 {
            let next = self.pass(&current);
            if next == current {
                break;
            }
            current = next;
        }
        current
    }

    /// True when the text still holds a color word or hedge marker.
    pub fn has_banned_token(&self, text: &str) -> bool {
        self.color_words.is_match(text) || self.hedge.is_match(text)
    }

    fn pass(&self, caption: &str) -> String {
        let mut sentences = split_sentences(caption);
        for s in &mut sentences {
            self.strip_colors(s);
            self.strip_hedges(s);
            self.strip_trees(s);
        }
        self.strip_camera(&mut sentences);
        sentences.retain(|s| !s.segments.is_empty());
        sentences
            .iter()
            .map(Sentence::render)
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn strip_colors(&self, s: &mut Sentence) {
        for i in 0..s.segments.len() {
            if self.colors.is_match(&s.segments[i]) {
                let replaced = self.colors.replace_all(&s.segments[i], "").into_owned();
                s.segments[i] = trim_edges(&self.stray.replace_all(&replaced, " "));
                s.dirty = true;
            }
        }
        s.tidy();
    }

    fn strip_hedges(&self, s: &mut Sentence) {
        let mut i = 0;
        while i < s.segments.len() {
            let Some(start) = self.hedge.find(&s.segments[i]).map(|m| m.start()) else {
                i += 1;
                continue;
            };
            s.dirty = true;
            if s.segments[i][..start].trim().is_empty() {
                // an appositive hedge: neighbors join without the commas
                s.segments.remove(i);
                if i > 0 && i < s.segments.len() {
                    let next = s.segments.remove(i);
                    s.segments[i - 1] =
                        format!("{} {}", s.segments[i - 1].trim_end(), next.trim_start());
                }
            } else {
                s.segments[i] = trim_edges(&s.segments[i][..start]);
                i += 1;
            }
        }
        s.tidy();
    }

    fn strip_trees(&self, s: &mut Sentence) {
        for i in 0..s.segments.len() {
            if self.trees.is_match(&s.segments[i]) {
                s.segments[i] = trim_edges(&self.trees.replace_all(&s.segments[i], ""));
                s.dirty = true;
            }
        }
        s.tidy();
    }

    fn strip_camera(&self, sentences: &mut Vec<Sentence>) {
        for s in sentences.iter_mut() {
            if let Some(first) = s.segments.first_mut() {
                let trimmed = first.trim_start();
                if let Some(end) = self.framing.find(trimmed).map(|m| m.end()) {
                    *first = trim_edges(&trimmed[end..]);
                    s.dirty = true;
                }
            }
            let before = s.segments.len();
            let mut index = 0;
            s.segments.retain(|seg| {
                let keep = index == 0 || !self.camera.is_match(seg);
                index += 1;
                keep
            });
            if s.segments.len() != before {
                s.dirty = true;
            }
            s.tidy();
        }
        let mentions: Vec<bool> = sentences
            .iter()
            .map(|s| s.segments.iter().any(|seg| self.camera.is_match(seg)))
            .collect();
        let clean = mentions.iter().filter(|m| !**m).count();
        if clean > 0 {
            let mut flags = mentions.into_iter();
            sentences.retain(|_| !flags.next().unwrap_or(false));
        }
    }
}

/// Applies the four rule passes with the built-in lexicons.
pub fn rule_rewrite(caption: &str) -> String {
    thread_local! {
        static DEFAULT: RuleRewriter = RuleRewriter::default();
    }
    DEFAULT.with(|r| r.rewrite(caption))
}

#[derive(Debug, Clone)]
struct Sentence {
    raw: String,
    segments: Vec<String>,
    terminator: String,
    dirty: bool,
}

impl Sentence {
    fn render(&self) -> String {
        if !self.dirty {
            return self.raw.trim().to_owned();
        }
        let body = self
            .segments
            .iter()
            .map(|s| s.trim())
            .collect::<Vec<_>>()
            .join(", ");
        let mut chars = body.chars();
        let capitalized: String = match chars.next() {
            Some(c) => c.to_uppercase().chain(chars).collect(),
            None => String::new(),
        };
        format!("{capitalized}{}", self.terminator)
    }

    /// Drops segments left without words.
    fn tidy(&mut self) {
        if self.dirty {
            self.segments
                .retain(|s| s.chars().any(char::is_alphanumeric));
        }
    }
}

/// Collapses whitespace and trims dangling function words from an edited
/// segment.
fn trim_edges(seg: &str) -> String {
    let mut words: Vec<&str> = seg.split_whitespace().collect();
    while words
        .last()
        .is_some_and(|w| DANGLING_TAIL.contains(&w.to_lowercase().as_str()))
    {
        words.pop();
    }
    while words
        .first()
        .is_some_and(|w| DANGLING_HEAD.contains(&w.to_lowercase().as_str()))
    {
        words.remove(0);
    }
    words.join(" ")
}

fn split_sentences(text: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i;
            while j + 1 < chars.len() && matches!(chars[j + 1].1, '.' | '!' | '?') {
                j += 1;
            }
            let at_boundary = j + 1 == chars.len() || chars[j + 1].1.is_whitespace();
            if at_boundary {
                let end = if j + 1 == chars.len() {
                    text.len()
                } else {
                    chars[j + 1].0
                };
                push_sentence(&mut out, &text[start..pos], &text[pos..end]);
                start = end;
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    if start < text.len() {
        push_sentence(&mut out, &text[start..], "");
    }
    out
}

fn push_sentence(out: &mut Vec<Sentence>, body: &str, terminator: &str) {
    if body.trim().is_empty() {
        return;
    }
    out.push(Sentence {
        raw: format!("{}{}", body.trim(), terminator),
        segments: body.split(',').map(str::to_owned).collect(),
        terminator: terminator.to_owned(),
        dirty: false,
    });
}
