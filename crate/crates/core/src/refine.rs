//! Offline refinement: merge short-term tracklets into long-term identities.
//!
//! Pairwise tracklet distance is the mean cosine distance over all feature
//! pairs, or infinity when the two tracklets share a frame. Clustering is
//! agglomerative with average linkage; a merge is vetoed when any tracklet
//! pair across the two clusters co-occurs in time, so every cluster can be
//! relabelled as one identity.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::exec::Execution;
use crate::tracklet::{Observation, Tracklet, TrackletError};

pub const DEFAULT_TAU: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("tracklet {0} has no appearance features")]
    MissingFeatures(u32),
    #[error("cluster {cluster} has two observations at frame {frame}")]
    InconsistentCluster { cluster: u32, frame: u32 },
    #[error("feature dimensions differ between tracklets {a} and {b}")]
    DimensionMismatch { a: u32, b: u32 },
    #[error(transparent)]
    Tracklet(#[from] TrackletError),
}

fn features_of(t: &Tracklet) -> Result<&[Vec<f64>], RefineError> {
    t.features().ok_or(RefineError::MissingFeatures(t.id()))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean pairwise cosine distance, `f64::INFINITY` when the frames overlap.
pub fn tracklet_distance(a: &Tracklet, b: &Tracklet) -> Result<f64, RefineError> {
    // Fixed summation order keeps the result bit-symmetric.
    let (a, b) = if (b.id(), b.first_frame()) < (a.id(), a.first_frame()) {
        (b, a)
    } else {
        (a, b)
    };
    let fa = features_of(a)?;
    let fb = features_of(b)?;
    if a.overlaps(b) {
        return Ok(f64::INFINITY);
    }
    if fa.first().map(Vec::len) != fb.first().map(Vec::len) {
        return Err(RefineError::DimensionMismatch { a: a.id(), b: b.id() });
    }
    let nb: Vec<f64> = fb.iter().map(|f| norm(f)).collect();
    let mut sum = 0.0;
    for x in fa {
        let nx = norm(x);
        for (y, ny) in fb.iter().zip(&nb) {
            sum += 1.0 - dot(x, y) / (nx * ny);
        }
    }
    Ok(sum / (fa.len() * fb.len()) as f64)
}

/// Symmetric tracklet distance matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackletDistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TrackletDistanceMatrix {
    pub fn build(tracklets: &[Tracklet], exec: Execution) -> Result<Self, RefineError> {
        for t in tracklets {
            features_of(t)?;
        }
        let n = tracklets.len();
        let rows: Vec<Result<Vec<f64>, RefineError>> = exec.map_range(n, |i| {
            (i + 1..n)
                .map(|j| tracklet_distance(&tracklets[i], &tracklets[j]))
                .collect()
        });
        let mut data = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (k, d) in row?.into_iter().enumerate() {
                let j = i + 1 + k;
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix from explicit entries; `f(i, j)` is queried for `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = f(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Tracklet id → cluster id. A cluster's id is its smallest member id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Clustering {
    labels: BTreeMap<u32, u32>,
}

impl Clustering {
    pub fn cluster_of(&self, tracklet_id: u32) -> Option<u32> {
        self.labels.get(&tracklet_id).copied()
    }

    pub fn labels(&self) -> &BTreeMap<u32, u32> {
        &self.labels
    }

    /// Clusters as sorted member lists, ordered by cluster id.
    pub fn groups(&self) -> Vec<Vec<u32>> {
        let mut groups: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (&t, &c) in &self.labels {
            groups.entry(c).or_default().push(t);
        }
        groups.into_values().collect()
    }

    pub fn num_clusters(&self) -> usize {
        self.groups().len()
    }
}

struct Cluster {
    min_id: u32,
    members: Vec<usize>,
}

/// Greedy average-linkage agglomeration over a precomputed matrix.
///
/// `ids[i]` is the id of row `i`. The pair with the smallest linkage strictly
/// below `tau` merges first; ties go to the lexicographically smallest pair of
/// cluster ids.
pub fn cluster_matrix(ids: &[u32], matrix: &TrackletDistanceMatrix, tau: f64) -> Clustering {
    assert_eq!(ids.len(), matrix.len(), "one id per matrix row");
    let n = ids.len();
    let mut clusters: Vec<Option<Cluster>> = (0..n)
        .map(|i| {
            Some(Cluster {
                min_id: ids[i],
                members: vec![i],
            })
        })
        .collect();
    // Linkage sums between active clusters; infinity marks a veto.
    let mut sums: Vec<f64> = matrix.data.clone();

    loop {
        let mut best: Option<(f64, (u32, u32), usize, usize)> = None;
        for i in 0..n {
            let Some(ci) = &clusters[i] else { continue };
            for j in i + 1..n {
                let Some(cj) = &clusters[j] else { continue };
                let s = sums[i * n + j];
                if !s.is_finite() {
                    continue;
                }
                let d = s / (ci.members.len() * cj.members.len()) as f64;
                if d >= tau {
                    continue;
                }
                let key = if ci.min_id < cj.min_id {
                    (ci.min_id, cj.min_id)
                } else {
                    (cj.min_id, ci.min_id)
                };
                let better = match &best {
                    None => true,
                    Some((bd, bkey, _, _)) => d < *bd || (d == *bd && key < *bkey),
                };
                if better {
                    best = Some((d, key, i, j));
                }
            }
        }
        let Some((_, _, i, j)) = best else { break };

        let cj = clusters[j].take().expect("active");
        let ci = clusters[i].as_mut().expect("active");
        ci.min_id = ci.min_id.min(cj.min_id);
        ci.members.extend(cj.members);
        for k in 0..n {
            if k == i || clusters[k].is_none() {
                continue;
            }
            let merged = sums[i * n + k] + sums[j * n + k];
            sums[i * n + k] = merged;
            sums[k * n + i] = merged;
        }
    }

    let mut labels = BTreeMap::new();
    for c in clusters.into_iter().flatten() {
        for m in c.members {
            labels.insert(ids[m], c.min_id);
        }
    }
    Clustering { labels }
}

/// Clusters tracklets by appearance with threshold `tau`.
pub fn cluster(tracklets: &[Tracklet], tau: f64, exec: Execution) -> Result<Clustering, RefineError> {
    let matrix = TrackletDistanceMatrix::build(tracklets, exec)?;
    let ids: Vec<u32> = tracklets.iter().map(Tracklet::id).collect();
    Ok(cluster_matrix(&ids, &matrix, tau))
}

/// Merges each cluster into one tracklet carrying the smallest member id.
/// Tracklets absent from `clustering` stay on their own. Output is sorted by id.
pub fn relabel(tracklets: &[Tracklet], clustering: &Clustering) -> Result<Vec<Tracklet>, RefineError> {
    let mut groups: BTreeMap<u32, Vec<&Tracklet>> = BTreeMap::new();
    for t in tracklets {
        let c = clustering.cluster_of(t.id()).unwrap_or(t.id());
        groups.entry(c).or_default().push(t);
    }

    let mut out = Vec::with_capacity(groups.len());
    for (_, members) in groups {
        if let [single] = members.as_slice() {
            out.push((*single).clone());
            continue;
        }
        let id = members.iter().map(|t| t.id()).min().expect("non-empty group");
        let with_features = members.iter().all(|t| t.features().is_some());
        let mut rows: Vec<(Observation, Option<Vec<f64>>)> = Vec::new();
        for t in &members {
            let (_, obs, feats) = (*t).clone().into_parts();
            match feats {
                Some(f) if with_features => rows.extend(obs.into_iter().zip(f.into_iter().map(Some))),
                _ => rows.extend(obs.into_iter().map(|o| (o, None))),
            }
        }
        rows.sort_by_key(|(o, _)| o.frame);
        if let Some(w) = rows.windows(2).find(|w| w[0].0.frame == w[1].0.frame) {
            return Err(RefineError::InconsistentCluster {
                cluster: id,
                frame: w[0].0.frame,
            });
        }
        let (obs, feats): (Vec<Observation>, Vec<Option<Vec<f64>>>) = rows.into_iter().unzip();
        let mut merged = Tracklet::new(id, obs)?;
        if with_features {
            merged = merged.with_features(feats.into_iter().flatten().collect())?;
        }
        out.push(merged);
    }
    out.sort_by_key(Tracklet::id);
    Ok(out)
}

/// `cluster` followed by `relabel`.
pub fn refine(tracklets: &[Tracklet], tau: f64, exec: Execution) -> Result<Vec<Tracklet>, RefineError> {
    let clustering = cluster(tracklets, tau, exec)?;
    relabel(tracklets, &clustering)
}
