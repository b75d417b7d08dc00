use super::tokenize::TokenizedCaption;
use super::EvalError;

/// Recall weight in the LCS F-measure.
pub const ROUGE_BETA: f64 = 1.2;

/// Longest common subsequence length (two-row dynamic program).
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure, best over references.
pub fn rouge_l(
    candidate: &TokenizedCaption,
    references: &[TokenizedCaption],
) -> Result<f64, EvalError> {
    if references.is_empty() {
        return Err(EvalError::NoReferences);
    }
    let beta2 = ROUGE_BETA * ROUGE_BETA;
    Ok(references
        .iter()
        .map(|r| {
            let lcs = lcs_len(candidate.tokens(), r.tokens());
            if lcs == 0 {
                return 0.0;
            }
            let p = lcs as f64 / candidate.len() as f64;
            let rc = lcs as f64 / r.len() as f64;
            ((1.0 + beta2) * p * rc) / (rc + beta2 * p)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::tokenize;

    #[test]
    fn hand_values() {
        let a = tokenize("a b c d");
        assert!((rouge_l(&a, std::slice::from_ref(&a)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rouge_l(&a, &[tokenize("e f")]).unwrap(), 0.0);
        let r = tokenize("a c b d");
        assert_eq!(lcs_len(a.tokens(), r.tokens()), 3);
        assert!((rouge_l(&a, &[r]).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(
            rouge_l(&tokenize(""), std::slice::from_ref(&a)).unwrap(),
            0.0
        );
        assert_eq!(rouge_l(&a, &[]), Err(EvalError::NoReferences));
    }

    #[test]
    fn best_reference_wins() {
        let c = tokenize("ships near the harbor");
        let refs = [tokenize("a field"), tokenize("ships near the harbor")];
        assert!((rouge_l(&c, &refs).unwrap() - 1.0).abs() < 1e-12);
    }
}
