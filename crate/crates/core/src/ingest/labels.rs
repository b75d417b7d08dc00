//! Class-label normalization and the matching pluralization used by captions.

/// (singular, plural) pairs that do not follow the suffix rules.
const IRREGULAR: &[(&str, &str)] = &[
    ("aircraft", "aircraft"),
    ("bus", "buses"),
    ("child", "children"),
    ("fish", "fish"),
    ("gas", "gases"),
    ("man", "men"),
    ("person", "people"),
    ("sheep", "sheep"),
    ("spacecraft", "spacecraft"),
    ("watercraft", "watercraft"),
    ("woman", "women"),
];

/// Lowercases, trims, maps `_`/`-` separators to spaces and singularizes the
/// last word.
pub fn normalize_label(raw: &str) -> String {
    let lowered = raw.trim().to_lowercase().replace(['_', '-'], " ");
    let words: Vec<&str> = lowered.split_whitespace().collect();
    match words.split_last() {
        None => String::new(),
        Some((last, rest)) => {
            let mut out: Vec<String> = rest.iter().map(|w| (*w).to_owned()).collect();
            out.push(singularize(last));
            out.join(" ")
        }
    }
}

pub fn singularize(word: &str) -> String {
    if let Some((singular, _)) = IRREGULAR.iter().find(|(s, p)| *p == word || *s == word) {
        return (*singular).to_owned();
    }
    if word.len() > 3 && word.ends_with("ies") {
        return format!("{}y", &word[..word.len() - 3]);
    }
    for suffix in ["ches", "shes", "sses", "xes", "zes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_owned();
        }
    }
    if word.len() > 2 && word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") {
        return word[..word.len() - 1].to_owned();
    }
    word.to_owned()
}

/// Plural of a normalized (singular) label; only the last word inflects.
pub fn pluralize(label: &str) -> String {
    let (head, last) = match label.rsplit_once(' ') {
        Some((h, l)) => (Some(h), l),
        None => (None, label),
    };
    let plural = plural_word(last);
    match head {
        Some(h) => format!("{h} {plural}"),
        None => plural,
    }
}

fn plural_word(word: &str) -> String {
    if let Some((_, plural)) = IRREGULAR.iter().find(|(s, _)| *s == word) {
        return (*plural).to_owned();
    }
    let bytes = word.as_bytes();
    if word.ends_with('y') && bytes.len() > 1 && !b"aeiou".contains(&bytes[bytes.len() - 2]) {
        return format!("{}ies", &word[..word.len() - 1]);
    }
    if ["s", "x", "z", "ch", "sh"]
        .iter()
        .any(|s| word.ends_with(s))
    {
        return format!("{word}es");
    }
    format!("{word}s")
}
