//! Prompt templates for SAR-oriented rewriting and for fusing a proportion
//! caption with an optical-image caption.

use serde::{Deserialize, Serialize};

use super::icl::IclExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    SarRewrite,
    Fusion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub header: &'static str,
    pub principles: &'static [&'static str],
}

const REWRITE_HEADER: &str =
    "Rewrite the existing description to suit Radar images by following these principles:";

const REWRITE_PRINCIPLES: [&str; 4] = [
    "Remove color descriptions, such as gray, black, shades and white.",
    "Remove speculative or tentative descriptions, such as \u{201c}possibly buildings or storage facilities.\u{201d}",
    "Preserve primary visual objects but omit descriptions of trees.",
    "Remove irrelevant details unrelated to visual objects, such as references to camera properties or imaging conditions.",
];

const FUSION_HEADER: &str = "Rewrite the existing description to integrate object category proportions and their visual interpretations by following these principles:";

const FUSION_PRINCIPLES: [&str; 5] = [
    "Avoid specific numbers: Refrain from using specific numerical percentages. Instead, use qualitative terms such as \u{201c}dominates,\u{201d} \u{201c}covers a significant portion,\u{201d} or \u{201c}forms the majority\u{201d} to describe proportions.",
    "Use Specific Terminology: If the description provides more specific terms (e.g., \u{201c}river\u{201d} or \u{201c}lake\u{201d} instead of the general \u{201c}water\u{201d}), prioritize these specific terms and exclude the more general terms from the first description.",
    "Emphasize Dominant Features: Prioritize the most visually dominant features in the image, and mention the less prominent elements afterward. If multiple categories have similar proportions, mention them in descending order of visual significance.",
    "Ensure Clarity and Fluidity: The final sentence should be concise, clear, and read like a natural image caption. It should summarize the visual content effectively while maintaining fluency. Avoid redundancy.",
    "Describe All Major Categories: If the description lists multiple categories, ensure the final sentence reflects all significant elements, even if their proportions are small, but ensure brevity.",
];

pub const SAR_REWRITE: PromptTemplate = PromptTemplate {
    kind: PromptKind::SarRewrite,
    header: REWRITE_HEADER,
    principles: &REWRITE_PRINCIPLES,
};

pub const FUSION: PromptTemplate = PromptTemplate {
    kind: PromptKind::Fusion,
    header: FUSION_HEADER,
    principles: &FUSION_PRINCIPLES,
};

impl PromptTemplate {
    fn preamble(&self) -> String {
        let mut out = String::from(self.header);
        out.push('\n');
        for (i, p) in self.principles.iter().enumerate() {
            out.push_str(&format!("[{}] {p}\n", i + 1));
        }
        out
    }
}

/// Rewrite prompt: principles, then `Input:`/`Output:` example pairs, then
/// the caption to rewrite with an open `Output:`.
pub fn build_rewrite_prompt(caption: &str, examples: &[IclExample]) -> String {
    let mut out = SAR_REWRITE.preamble();
    if !examples.is_empty() {
        out.push_str("\nExamples:\n");
        for ex in examples {
            out.push_str(&format!(
                "Input: {}\nOutput: {}\n\n",
                ex.source_caption.trim(),
                ex.rewritten_caption.trim()
            ));
        }
    } else {
        out.push('\n');
    }
    out.push_str(&format!(
        "Rewrite the following description. Reply with the rewritten description only.\nInput: {}\nOutput:",
        caption.trim()
    ));
    out
}

/// Fusion prompt over a proportion caption (A) and an optical caption (B).
pub fn build_fusion_prompt(caption_a: &str, caption_b: &str) -> String {
    let mut out = FUSION.preamble();
    out.push_str(&format!(
        "\nCaption A: {}\nCaption B: {}\n\nCombine caption A and caption B into one caption. Reply with the caption only.\nOutput:",
        caption_a.trim(),
        caption_b.trim()
    ));
    out
}
