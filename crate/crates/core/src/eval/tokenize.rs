use serde::{Deserialize, Serialize};

/// Lowercase word tokens with ASCII punctuation removed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenizedCaption(Vec<String>);

impl TokenizedCaption {
    /// Wraps pre-split tokens; empty strings are discarded.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(
            tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All contiguous `n`-grams, in order.
    pub fn ngrams(&self, n: usize) -> impl Iterator<Item = &[String]> {
        let n = n.max(1);
        self.0.windows(n)
    }
}

pub fn tokenize(caption: &str) -> TokenizedCaption {
    let cleaned: String = caption
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .flat_map(char::to_lowercase)
        .collect();
    TokenizedCaption(cleaned.split_whitespace().map(str::to_owned).collect())
}
