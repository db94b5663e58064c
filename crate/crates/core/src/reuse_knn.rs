//! Per-user recommendation models built with ReuseKNN neighbor selection.
//!
//! For a target user, every other user gets a combined score
//! `w * similarity + (1 - w) * gain`, where gain is the fraction of the
//! target's rated items the neighbor also rated. For each item the target has
//! not rated, the `k` best-scoring raters of that item contribute their
//! ratings to the model.

use std::collections::{BTreeMap, BTreeSet};

use crate::cluster::ItemVector;
use crate::dataset::RatingDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SimilarityKind {
    /// Cosine of the raw de-quantized co-rated sub-vectors.
    #[default]
    Raw,
    /// Cosine after subtracting each user's mean rating.
    Centered,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig<T> {
    pub k: usize,
    /// Weight `w` of similarity against gain.
    pub weight: T,
    pub similarity: SimilarityKind,
}

impl<T: Scalar> ModelConfig<T> {
    pub fn new(k: usize) -> Self {
        Self { k, weight: T::of(0.5), similarity: SimilarityKind::Raw }
    }

    /// Plain per-item top-k collaborative filtering (`w = 1`).
    pub fn similarity_only(k: usize) -> Self {
        Self { k, weight: T::one(), similarity: SimilarityKind::Raw }
    }

    pub fn with_weight(mut self, weight: T) -> Self {
        self.weight = weight;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > u16::MAX as usize {
            return Err(Error::InvalidK);
        }
        if !(self.weight >= T::zero() && self.weight <= T::one()) {
            return Err(Error::InvalidWeight(self.weight.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborScore<T> {
    pub neighbor: u32,
    pub similarity: T,
    pub gain: T,
    pub combined: T,
}

impl<T: Scalar> NeighborScore<T> {
    fn new(neighbor: u32, similarity: T, gain: T, weight: T) -> Self {
        let combined = weight * similarity + (T::one() - weight) * gain;
        Self { neighbor, similarity, gain, combined }
    }
}

/// Per-neighbor limits on how many model entries a user may appear in.
/// Users without an entry are unlimited; a cap of 0 means abstention.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VulnerabilityPolicy {
    caps: BTreeMap<u32, u32>,
}

impl VulnerabilityPolicy {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn with_cap(mut self, user: u32, cap: u32) -> Self {
        self.caps.insert(user, cap);
        self
    }

    pub fn abstain(self, user: u32) -> Self {
        self.with_cap(user, 0)
    }

    pub fn cap(&self, user: u32) -> Option<u32> {
        self.caps.get(&user).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RmEntry {
    pub item: u32,
    /// Neighbor ids, best first. Pad slots hold [`RecommendationModel::pad_neighbor`].
    pub neighbors: Vec<u32>,
    pub ratings: Vec<u16>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecommendationModel {
    pub target: u32,
    pub k: u16,
    /// Ascending by item.
    pub entries: Vec<RmEntry>,
    pub generation: u64,
    /// Generation of the dataset the model was built from.
    pub dataset_generation: u64,
    pub pad_neighbor: u32,
    pub pad_rating: u16,
}

impl RecommendationModel {
    /// Number of stored ratings, `(m - c_i) * k`.
    pub fn rating_cells(&self) -> usize {
        self.entries.len() * self.k as usize
    }

    pub fn entry(&self, item: u32) -> Option<&RmEntry> {
        self.entries.binary_search_by_key(&item, |e| e.item).ok().map(|p| &self.entries[p])
    }

    /// Item vectors: the `k` neighbor ratings of each entry, best neighbor first.
    pub fn item_vectors(&self) -> Vec<ItemVector> {
        self.entries
            .iter()
            .map(|e| ItemVector { item: e.item, coords: e.ratings.clone() })
            .collect()
    }

    pub fn is_pad(&self, neighbor: u32) -> bool {
        neighbor == self.pad_neighbor
    }
}

fn check_pair(ds: &RatingDataset, u: u32, v: u32) -> Result<()> {
    ds.check_user(u)?;
    ds.check_user(v)?;
    if u == v {
        return Err(Error::SameUser);
    }
    Ok(())
}

fn user_mean(ds: &RatingDataset, u: u32) -> f64 {
    let row = ds.user_ratings(u);
    if row.is_empty() {
        return 0.0;
    }
    let scale = ds.scale();
    row.iter().map(|&(_, r)| scale.dequantize(r)).sum::<f64>() / row.len() as f64
}

/// Cosine similarity over the items both users rated. Zero when they share
/// no items or either co-rated sub-vector is zero.
pub fn cosine_similarity<T: Scalar>(ds: &RatingDataset, u: u32, v: u32, kind: SimilarityKind) -> Result<T> {
    check_pair(ds, u, v)?;
    let scale = ds.scale();
    let (mu, mv) = match kind {
        SimilarityKind::Raw => (0.0, 0.0),
        SimilarityKind::Centered => (user_mean(ds, u), user_mean(ds, v)),
    };
    let (a, b) = (ds.user_ratings(u), ds.user_ratings(v));
    let (mut i, mut j) = (0, 0);
    let (mut dot, mut na, mut nb) = (T::zero(), T::zero(), T::zero());
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let x = T::of(scale.dequantize(a[i].1) - mu);
                let y = T::of(scale.dequantize(b[j].1) - mv);
                dot = dot + x * y;
                na = na + x * x;
                nb = nb + y * y;
                i += 1;
                j += 1;
            }
        }
    }
    if na == T::zero() || nb == T::zero() {
        return Ok(T::zero());
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Fraction of the target's rated items that `n` has also rated.
pub fn gain_score<T: Scalar>(ds: &RatingDataset, target: u32, n: u32) -> Result<T> {
    check_pair(ds, target, n)?;
    let rated = ds.user_ratings(target);
    if rated.is_empty() {
        return Ok(T::zero());
    }
    let theirs = ds.user_ratings(n);
    let (mut i, mut j, mut overlap) = (0, 0, 0usize);
    while i < rated.len() && j < theirs.len() {
        match rated[i].0.cmp(&theirs[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                overlap += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(T::of_usize(overlap) / T::of_usize(rated.len()))
}

/// Scores of every user against `target`, indexed by user. The target's own
/// slot carries `-inf`.
///
/// Accumulates over the raters of the target's items instead of merging rows
/// pairwise, so one call costs the number of ratings on the target's items.
pub fn neighbor_scores<T: Scalar>(ds: &RatingDataset, target: u32, cfg: &ModelConfig<T>) -> Result<Vec<NeighborScore<T>>> {
    ds.check_user(target)?;
    cfg.validate()?;
    let n = ds.num_users();
    let scale = ds.scale();
    let means: Vec<f64> = match cfg.similarity {
        SimilarityKind::Raw => vec![0.0; n],
        SimilarityKind::Centered => (0..n as u32).map(|u| user_mean(ds, u)).collect(),
    };
    let mut dot = vec![T::zero(); n];
    let mut nt = vec![T::zero(); n];
    let mut nv = vec![T::zero(); n];
    let mut overlap = vec![0usize; n];
    for &(item, rt) in ds.user_ratings(target) {
        let x = T::of(scale.dequantize(rt) - means[target as usize]);
        for &(v, rv) in ds.item_raters(item) {
            if v == target {
                continue;
            }
            let y = T::of(scale.dequantize(rv) - means[v as usize]);
            let v = v as usize;
            dot[v] = dot[v] + x * y;
            nt[v] = nt[v] + x * x;
            nv[v] = nv[v] + y * y;
            overlap[v] += 1;
        }
    }
    let c_t = ds.user_ratings(target).len();
    Ok((0..n)
        .map(|v| {
            if v == target as usize {
                return NeighborScore {
                    neighbor: v as u32,
                    similarity: T::zero(),
                    gain: T::zero(),
                    combined: T::neg_infinity(),
                };
            }
            let sim = if nt[v] == T::zero() || nv[v] == T::zero() {
                T::zero()
            } else {
                dot[v] / (nt[v].sqrt() * nv[v].sqrt())
            };
            let gain = if c_t == 0 { T::zero() } else { T::of_usize(overlap[v]) / T::of_usize(c_t) };
            NeighborScore::new(v as u32, sim, gain, cfg.weight)
        })
        .collect())
}

/// Orders neighbor candidates: higher combined score first, lower index on ties.
fn rank_order<T: Scalar>(scores: &[NeighborScore<T>]) -> impl Fn(&u32, &u32) -> std::cmp::Ordering + '_ {
    move |&a, &b| {
        let (sa, sb) = (scores[a as usize].combined, scores[b as usize].combined);
        sb.partial_cmp(&sa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    }
}

/// Builds the recommendation model of `target`.
pub fn build_rm<T: Scalar>(
    ds: &RatingDataset,
    target: u32,
    cfg: &ModelConfig<T>,
    policy: &VulnerabilityPolicy,
) -> Result<RecommendationModel> {
    cfg.validate()?;
    ds.check_user(target)?;
    if ds.num_users() < 2 {
        return Err(Error::NoNeighbors(target));
    }
    let scores = neighbor_scores(ds, target, cfg)?;
    let order = rank_order(&scores);
    let k = cfg.k;
    let pad_neighbor = ds.num_users() as u32;
    let pad_rating = ds.scale().neutral();

    let mut used: BTreeMap<u32, u32> = BTreeMap::new();
    let rated = ds.user_ratings(target);
    let mut rated_iter = rated.iter().peekable();
    let mut entries = Vec::with_capacity(ds.num_items() - rated.len());
    let mut eligible: Vec<u32> = Vec::new();

    for item in 0..ds.num_items() as u32 {
        if rated_iter.peek().is_some_and(|&&(i, _)| i == item) {
            rated_iter.next();
            continue;
        }
        eligible.clear();
        eligible.extend(ds.item_raters(item).iter().map(|&(v, _)| v).filter(|&v| {
            policy.cap(v).is_none_or(|cap| used.get(&v).copied().unwrap_or(0) < cap)
        }));
        if eligible.len() > k {
            eligible.select_nth_unstable_by(k - 1, &order);
            eligible.truncate(k);
        }
        eligible.sort_unstable_by(&order);

        let mut neighbors = Vec::with_capacity(k);
        let mut ratings = Vec::with_capacity(k);
        for &v in &eligible {
            if policy.cap(v).is_some() {
                *used.entry(v).or_insert(0) += 1;
            }
            neighbors.push(v);
            ratings.push(ds.rating(v, item).expect("rater has a rating"));
        }
        neighbors.resize(k, pad_neighbor);
        ratings.resize(k, pad_rating);
        entries.push(RmEntry { item, neighbors, ratings });
    }

    Ok(RecommendationModel {
        target,
        k: k as u16,
        entries,
        generation: 0,
        dataset_generation: ds.generation(),
        pad_neighbor,
        pad_rating,
    })
}

/// Builds one model per user.
pub fn build_all<T: Scalar>(
    ds: &RatingDataset,
    cfg: &ModelConfig<T>,
    policy: &VulnerabilityPolicy,
) -> Result<Vec<RecommendationModel>> {
    (0..ds.num_users() as u32).map(|u| build_rm(ds, u, cfg, policy)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExposureReport {
    /// Per user: distinct own ratings appearing in any model.
    pub exposure: Vec<usize>,
    pub baseline_exposure: Vec<usize>,
    pub mean_exposure: f64,
    pub mean_baseline: f64,
    /// `1 - mean_exposure / mean_baseline`.
    pub reduction: f64,
}

/// Distinct `(neighbor, item)` ratings used per neighbor across `rms`.
pub fn exposure_counts(rms: &[RecommendationModel], num_users: usize) -> Vec<usize> {
    let mut pairs: BTreeSet<(u32, u32)> = BTreeSet::new();
    for rm in rms {
        for e in &rm.entries {
            for &v in &e.neighbors {
                if !rm.is_pad(v) {
                    pairs.insert((v, e.item));
                }
            }
        }
    }
    let mut counts = vec![0usize; num_users];
    for (v, _) in pairs {
        counts[v as usize] += 1;
    }
    counts
}

/// Compares the exposure of `rms` with plain similarity-only top-`baseline_k`
/// models for the same targets.
pub fn exposure_report<T: Scalar>(rms: &[RecommendationModel], ds: &RatingDataset, baseline_k: usize) -> Result<ExposureReport> {
    for rm in rms {
        ds.check_user(rm.target)?;
        if rm.dataset_generation != ds.generation() {
            return Err(Error::GenerationMismatch(format!(
                "model for user {} was built from dataset generation {}, dataset is at {}",
                rm.target,
                rm.dataset_generation,
                ds.generation()
            )));
        }
    }
    let n = ds.num_users();
    let baseline_cfg = ModelConfig::<T>::similarity_only(baseline_k);
    let baseline: Vec<_> = rms
        .iter()
        .map(|rm| build_rm(ds, rm.target, &baseline_cfg, &VulnerabilityPolicy::unlimited()))
        .collect::<Result<_>>()?;
    let exposure = exposure_counts(rms, n);
    let baseline_exposure = exposure_counts(&baseline, n);
    let mean = |v: &[usize]| if n == 0 { 0.0 } else { v.iter().sum::<usize>() as f64 / n as f64 };
    let (mean_exposure, mean_baseline) = (mean(&exposure), mean(&baseline_exposure));
    let reduction = if mean_baseline == 0.0 { 0.0 } else { 1.0 - mean_exposure / mean_baseline };
    Ok(ExposureReport { exposure, baseline_exposure, mean_exposure, mean_baseline, reduction })
}

/// Records a rating from `target` and rebuilds only that user's model.
pub fn apply_feedback<T: Scalar>(
    ds: &RatingDataset,
    rm: &RecommendationModel,
    item: u32,
    rating: u16,
    cfg: &ModelConfig<T>,
    policy: &VulnerabilityPolicy,
) -> Result<(RatingDataset, RecommendationModel)> {
    let mut updated = ds.clone();
    updated.set_rating(rm.target, item, rating)?;
    let mut rebuilt = build_rm(&updated, rm.target, cfg, policy)?;
    rebuilt.generation = rm.generation + 1;
    Ok((updated, rebuilt))
}
