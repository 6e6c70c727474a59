use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RetrievalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitRates {
    pub n_queries: usize,
    /// k -> fraction of queries whose gold table ranked at or above k.
    pub hits_at: BTreeMap<usize, f64>,
}

/// Exact-match@k over gold ranks (1-based; use `len + 1` for "not retrieved").
pub fn exact_match_at_k(
    rankings: &BTreeMap<String, usize>,
    ks: &[usize],
) -> Result<HitRates, RetrievalError> {
    if rankings.is_empty() {
        return Err(RetrievalError::EmptyRankings);
    }
    if let Some((q, _)) = rankings.iter().find(|(_, r)| **r == 0) {
        return Err(RetrievalError::InvalidRank(q.clone()));
    }
    if ks.contains(&0) {
        return Err(RetrievalError::InvalidK);
    }
    let n = rankings.len();
    let hits_at = ks
        .iter()
        .map(|&k| {
            let hits = rankings.values().filter(|&&r| r <= k).count();
            (k, hits as f64 / n as f64)
        })
        .collect();
    Ok(HitRates {
        n_queries: n,
        hits_at,
    })
}
