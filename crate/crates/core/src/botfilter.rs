//! Bot-score thresholding.
//!
//! Per-user bot scores are clustered with an exact one-dimensional k-means
//! (dynamic programming over the sorted scores, O(k·n²)). With five clusters
//! the three lowest are taken as human-like; the threshold is the largest
//! score in the third cluster and any score strictly above it marks a bot.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::ingest::Corpus;

/// Number of clusters the human/bot split is defined for.
pub const BOT_CLUSTERS: usize = 5;
/// Clusters `0..HUMAN_CLUSTERS` (zero-based) are human-like.
pub const HUMAN_CLUSTERS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub k: usize,
    /// Input scores in ascending order.
    pub sorted: Vec<f64>,
    /// Zero-based cluster of each entry of `sorted`; nondecreasing.
    pub assignments: Vec<usize>,
    /// Cluster means, ascending.
    pub centers: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Within-cluster sum of squared deviations from each cluster mean.
    pub wcss: f64,
}

impl ClusterResult {
    /// `(min, max)` score of every cluster.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut bounds = Vec::with_capacity(self.k);
        let mut start = 0;
        for &size in &self.sizes {
            bounds.push((self.sorted[start], self.sorted[start + size - 1]));
            start += size;
        }
        bounds
    }

    /// Members of each cluster, in ascending order.
    pub fn clusters(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.k);
        let mut start = 0;
        for &size in &self.sizes {
            out.push(&self.sorted[start..start + size]);
            start += size;
        }
        out
    }
}

/// Optimal partition of `scores` into `k` contiguous groups minimising the
/// within-cluster sum of squares.
///
/// Equal scores never straddle a cluster boundary unless there are fewer
/// distinct values than clusters.
pub fn ckmeans_1d(scores: &[f64], k: usize) -> Result<ClusterResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > scores.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the number of scores ({})",
            scores.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite score {bad}")));
    }

    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();

    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    let may_start = |j: usize| -> bool { k > distinct || j == 0 || sorted[j - 1] != sorted[j] };

    // cost[c][i]: best cost of sorted[0..=i] in c+1 clusters; start[c][i]: first
    // index of the last cluster in that solution.
    let mut cost = vec![vec![f64::INFINITY; n]; k];
    let mut start = vec![vec![0usize; n]; k];

    let (mut mean, mut sse) = (0.0, 0.0);
    for (i, &x) in sorted.iter().enumerate() {
        let count = (i + 1) as f64;
        let delta = x - mean;
        mean += delta / count;
        sse += delta * (x - mean);
        cost[0][i] = sse;
    }

    for c in 1..k {
        for i in c..n {
            let mut best = f64::INFINITY;
            let mut best_start = i;
            let (mut mean, mut sse, mut count) = (0.0, 0.0, 0.0);
            // walk the last cluster's first index j down from i, growing it leftwards
            for j in (c..=i).rev() {
                let x = sorted[j];
                count += 1.0;
                let delta = x - mean;
                mean += delta / count;
                sse += delta * (x - mean);
                if !may_start(j) {
                    continue;
                }
                let total = cost[c - 1][j - 1] + sse;
                if total < best {
                    best = total;
                    best_start = j;
                }
            }
            cost[c][i] = best;
            start[c][i] = best_start;
        }
    }

    if !cost[k - 1][n - 1].is_finite() {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} scores into {k} clusters"
        )));
    }

    let mut boundaries = vec![0usize; k + 1];
    boundaries[k] = n;
    let mut end = n - 1;
    for c in (0..k).rev() {
        let first = if c == 0 { 0 } else { start[c][end] };
        boundaries[c] = first;
        if c > 0 {
            end = first - 1;
        }
    }

    let mut assignments = vec![0usize; n];
    let mut centers = Vec::with_capacity(k);
    let mut sizes = Vec::with_capacity(k);
    let mut wcss = 0.0;
    for c in 0..k {
        let members = &sorted[boundaries[c]..boundaries[c + 1]];
        let center = members.iter().sum::<f64>() / members.len() as f64;
        wcss += members.iter().map(|x| (x - center) * (x - center)).sum::<f64>();
        centers.push(center);
        sizes.push(members.len());
        assignments[boundaries[c]..boundaries[c + 1]].fill(c);
    }

    Ok(ClusterResult {
        k,
        sorted,
        assignments,
        centers,
        sizes,
        wcss,
    })
}

/// Clusters scores, optionally collapsing duplicate values first.
pub fn cluster_scores(scores: &[f64], k: usize, dedup: bool) -> Result<ClusterResult> {
    if dedup {
        let mut unique = scores.to_vec();
        unique.sort_by(f64::total_cmp);
        unique.dedup();
        ckmeans_1d(&unique, k)
    } else {
        ckmeans_1d(scores, k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BotThreshold {
    /// Scores strictly above this value are bots.
    pub value: f64,
    /// Zero-based indices of the human-like clusters.
    pub human_clusters: Vec<usize>,
    pub bot_clusters: Vec<usize>,
}

impl BotThreshold {
    pub fn new(value: f64) -> Self {
        BotThreshold {
            value,
            human_clusters: (0..HUMAN_CLUSTERS).collect(),
            bot_clusters: (HUMAN_CLUSTERS..BOT_CLUSTERS).collect(),
        }
    }

    pub fn is_bot(&self, score: f64) -> bool {
        score > self.value
    }
}

pub fn derive_bot_threshold(clusters: &ClusterResult) -> Result<BotThreshold> {
    if clusters.k != BOT_CLUSTERS {
        return Err(Error::InvalidArgument(format!(
            "bot threshold needs {BOT_CLUSTERS} clusters, got {}",
            clusters.k
        )));
    }
    let (_, max) = clusters.bounds()[HUMAN_CLUSTERS - 1];
    Ok(BotThreshold::new(max))
}

/// Removes every scored user above the threshold together with their tweets.
/// Users without a score are kept.
pub fn filter_bots(corpus: &Corpus, threshold: &BotThreshold) -> Corpus {
    let bots: HashSet<&str> = corpus
        .users()
        .values()
        .filter(|u| u.bot_score.is_some_and(|s| threshold.is_bot(s)))
        .map(|u| u.user_id.as_str())
        .collect();
    corpus.retain(|t| !bots.contains(t.author_id.as_str()))
}
