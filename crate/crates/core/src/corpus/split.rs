use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{assemble, CorpusError, CorpusManifest};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let ok = self.train > 0.0 && self.test > 0.0 && (self.train + self.test - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(CorpusError::InvalidRatios {
                train: self.train,
                test: self.test,
            })
        }
    }
}

/// Seeded split stratified by source dataset. The train total is
/// `round(n * train)`, apportioned across sources by largest remainder;
/// each side keeps the manifest's record order.
pub fn split(
    manifest: &CorpusManifest,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(CorpusManifest, CorpusManifest), CorpusError> {
    ratios.validate()?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in manifest.records.iter().enumerate() {
        groups.entry(r.source_dataset.as_str()).or_default().push(i);
    }
    let n = manifest.records.len();
    let target = (n as f64 * ratios.train).round() as usize;

    let mut quotas: Vec<(usize, f64)> = groups
        .values()
        .map(|g| {
            let exact = g.len() as f64 * ratios.train;
            (exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut remaining = target.saturating_sub(quotas.iter().map(|q| q.0).sum());
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.total_cmp(&quotas[a].1).then(a.cmp(&b)));
    for &g in &order {
        if remaining == 0 {
            break;
        }
        quotas[g].0 += 1;
        remaining -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; n];
    for (members, (quota, _)) in groups.values().zip(&quotas) {
        let quota = (*quota).min(members.len());
        for k in rand::seq::index::sample(&mut rng, members.len(), quota) {
            in_train[members[k]] = true;
        }
    }

    let train_count = in_train.iter().filter(|t| **t).count();
    if train_count == 0 || train_count == n {
        return Err(CorpusError::DegenerateSplit {
            train: train_count,
            test: n - train_count,
        });
    }
    let (train, test): (Vec<_>, Vec<_>) = manifest
        .records
        .iter()
        .cloned()
        .zip(in_train)
        .partition(|(_, t)| *t);
    let info = manifest.info();
    Ok((
        assemble(train.into_iter().map(|(r, _)| r), &info)?,
        assemble(test.into_iter().map(|(r, _)| r), &info)?,
    ))
}
