use serde::{Serialize, Serializer};

use super::bleu::{BleuStats, Smoothing};
use super::cider::cider;
use super::io::CaptionEvalItem;
use super::meteor::meteor_simplified;
use super::retrieval::{recall_at_k, Direction, SimilarityMatrix};
use super::rouge::rouge_l;
use super::tokenize::{tokenize, TokenizedCaption};
use super::EvalError;

/// Placeholder for metrics this crate does not compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NotComputed;

impl Serialize for NotComputed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("not computed")
    }
}

/// Caption metrics in the usual table column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaptionEvalReport {
    #[serde(rename = "SPICE")]
    pub spice: NotComputed,
    #[serde(rename = "BLEU-1")]
    pub bleu1: f64,
    #[serde(rename = "BLEU-2")]
    pub bleu2: f64,
    #[serde(rename = "BLEU-3")]
    pub bleu3: f64,
    #[serde(rename = "BLEU-4")]
    pub bleu4: f64,
    #[serde(rename = "METEOR")]
    pub meteor: f64,
    #[serde(rename = "ROUGE-L")]
    pub rouge_l: f64,
    #[serde(rename = "CIDEr")]
    pub cider: f64,
    pub items: usize,
}

/// Corpus BLEU (pooled counts), mean per-item METEOR and ROUGE-L, and
/// corpus CIDEr.
pub fn evaluate_captions(
    items: &[CaptionEvalItem],
    smoothing: Smoothing,
) -> Result<CaptionEvalReport, EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let tokenized: Vec<(TokenizedCaption, Vec<TokenizedCaption>)> = items
        .iter()
        .map(|it| {
            (
                tokenize(&it.candidate),
                it.references.iter().map(|r| tokenize(r)).collect(),
            )
        })
        .collect();

    let per_item = crate::par::map(&tokenized, |(cand, refs)| {
        Ok::<_, EvalError>((
            BleuStats::from_pair(cand, refs)?,
            meteor_simplified(cand, refs)?,
            rouge_l(cand, refs)?,
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let stats = per_item
        .iter()
        .fold(BleuStats::default(), |acc, (s, _, _)| acc.merge(s));
    let n = per_item.len() as f64;
    let meteor = per_item.iter().map(|(_, m, _)| m).sum::<f64>() / n;
    let rouge = per_item.iter().map(|(_, _, r)| r).sum::<f64>() / n;

    let (cands, refs): (Vec<_>, Vec<_>) = tokenized.into_iter().unzip();
    let cider = cider(&cands, &refs)?.mean;

    Ok(CaptionEvalReport {
        spice: NotComputed,
        bleu1: stats.score(1, smoothing),
        bleu2: stats.score(2, smoothing),
        bleu3: stats.score(3, smoothing),
        bleu4: stats.score(4, smoothing),
        meteor,
        rouge_l: rouge,
        cider,
        items: items.len(),
    })
}

/// Retrieval recalls (percent) in the usual table column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalReport {
    #[serde(rename = "i2t-R@1")]
    pub i2t_r1: f64,
    #[serde(rename = "i2t-R@5")]
    pub i2t_r5: f64,
    #[serde(rename = "i2t-R@10")]
    pub i2t_r10: f64,
    #[serde(rename = "t2i-R@1")]
    pub t2i_r1: f64,
    #[serde(rename = "t2i-R@5")]
    pub t2i_r5: f64,
    #[serde(rename = "t2i-R@10")]
    pub t2i_r10: f64,
    #[serde(rename = "Mean Recall")]
    pub mean_recall: f64,
    pub images: usize,
    pub texts: usize,
}

pub fn evaluate_retrieval(m: &SimilarityMatrix) -> Result<RetrievalReport, EvalError> {
    let r = |k, d| recall_at_k(m, k, d);
    let values = [
        r(1, Direction::I2t)?,
        r(5, Direction::I2t)?,
        r(10, Direction::I2t)?,
        r(1, Direction::T2i)?,
        r(5, Direction::T2i)?,
        r(10, Direction::T2i)?,
    ];
    Ok(RetrievalReport {
        i2t_r1: values[0],
        i2t_r5: values[1],
        i2t_r10: values[2],
        t2i_r1: values[3],
        t2i_r5: values[4],
        t2i_r10: values[5],
        mean_recall: values.iter().sum::<f64>() / 6.0,
        images: m.rows(),
        texts: m.cols(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_columns_follow_table_order() {
        let report = evaluate_retrieval(&SimilarityMatrix::identity(10)).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let order = [
            "i2t-R@1",
            "i2t-R@5",
            "i2t-R@10",
            "t2i-R@1",
            "t2i-R@5",
            "t2i-R@10",
            "Mean Recall",
        ];
        let positions: Vec<usize> = order
            .iter()
            .map(|k| json.find(&format!("\"{k}\"")).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{json}");
        assert_eq!(report.mean_recall, 100.0);
    }

    #[test]
    fn caption_report_identity() {
        let items: Vec<CaptionEvalItem> = [
            "there are three ships docked in the harbor",
            "a river crosses farmland near a small village",
        ]
        .iter()
        .enumerate()
        .map(|(i, s)| CaptionEvalItem {
            id: i.to_string(),
            candidate: (*s).into(),
            references: vec![(*s).into()],
        })
        .collect();
        let r = evaluate_captions(&items, Smoothing::None).unwrap();
        assert!((r.bleu4 - 1.0).abs() < 1e-12);
        assert!((r.rouge_l - 1.0).abs() < 1e-12);
        assert!((r.cider - 10.0).abs() < 1e-9);
        let json = serde_json::to_string(&r).unwrap();
        assert!(
            json.starts_with("{\"SPICE\":\"not computed\",\"BLEU-1\""),
            "{json}"
        );
        assert!(json.find("\"METEOR\"").unwrap() < json.find("\"ROUGE-L\"").unwrap());
        assert!(json.find("\"ROUGE-L\"").unwrap() < json.find("\"CIDEr\"").unwrap());
    }
}
