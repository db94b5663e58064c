//! Clustering of recommendation-model item vectors into fixed-capacity
//! buckets plus a stash, and the `PRSS` serialization of the result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Item id of padding records.
pub const PAD_ITEM: u32 = u32::MAX;
/// Lane value of the item id of padding records.
pub const PAD_LANE: u16 = 0xFFFF;

const SETS_MAGIC: &[u8; 4] = b"PRSS";
const SETS_VERSION: u16 = 1;
pub const SETS_HEADER_LEN: usize = 28;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ItemVector {
    pub item: u32,
    pub coords: Vec<u16>,
}

impl ItemVector {
    pub fn pad(dim: usize) -> Self {
        Self { item: PAD_ITEM, coords: vec![0; dim] }
    }

    pub fn is_pad(&self) -> bool {
        self.item == PAD_ITEM
    }

    /// Item id as a 16-bit lane.
    pub fn item_lane(&self) -> u16 {
        if self.is_pad() {
            PAD_LANE
        } else {
            self.item as u16
        }
    }

    pub fn squared_distance(&self, other: &[u16]) -> u64 {
        self.coords
            .iter()
            .zip(other)
            .map(|(&a, &b)| {
                let d = a as i64 - b as i64;
                (d * d) as u64
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans<T> {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
    pub objective: T,
    /// Objective after every completed iteration.
    pub trace: Vec<T>,
}

fn dist2<T: Scalar>(p: &[u16], c: &[T]) -> T {
    p.iter()
        .zip(c)
        .map(|(&x, &y)| {
            let d = T::of(x as f64) - y;
            d * d
        })
        .sum()
}

fn to_point<T: Scalar>(p: &[u16]) -> Vec<T> {
    p.iter().map(|&x| T::of(x as f64)).collect()
}

/// Sum of squared distances of every point to its assigned centroid.
pub fn objective<T: Scalar>(points: &[ItemVector], assignments: &[usize], centroids: &[Vec<T>]) -> T {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| dist2(&p.coords, &centroids[a]))
        .sum()
}

fn check_points(points: &[ItemVector]) -> Result<usize> {
    let first = points.first().ok_or(Error::EmptyInput)?;
    let dim = first.coords.len();
    if points.iter().any(|p| p.coords.len() != dim) {
        return Err(Error::Format("item vectors differ in dimension".into()));
    }
    Ok(dim)
}

fn seed_plus_plus<T: Scalar>(points: &[ItemVector], clusters: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<T>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![to_point::<T>(&points[first].coords)];
    let mut best: Vec<T> = points.iter().map(|p| dist2(&p.coords, &centroids[0])).collect();
    while centroids.len() < clusters {
        let total: T = best.iter().copied().sum();
        let pick = if total > T::zero() {
            let mut target = T::of(rng.gen::<f64>()) * total;
            let mut pick = None;
            for (i, &d) in best.iter().enumerate() {
                if d <= T::zero() {
                    continue;
                }
                if target < d {
                    pick = Some(i);
                    break;
                }
                target = target - d;
            }
            // Float round-off can run past the end; take the last positive weight.
            pick.unwrap_or_else(|| best.iter().rposition(|&d| d > T::zero()).expect("positive total"))
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = to_point::<T>(&points[pick].coords);
        for (b, p) in best.iter_mut().zip(points) {
            let d = dist2(&p.coords, &c);
            if d < *b {
                *b = d;
            }
        }
        centroids.push(c);
    }
    centroids
}

fn assign<T: Scalar>(points: &[ItemVector], centroids: &[Vec<T>], out: &mut [usize]) -> bool {
    let mut changed = false;
    for (p, a) in points.iter().zip(out.iter_mut()) {
        let mut best = 0;
        let mut best_d = dist2(&p.coords, &centroids[0]);
        for (j, c) in centroids.iter().enumerate().skip(1) {
            let d = dist2(&p.coords, c);
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        if *a != best {
            *a = best;
            changed = true;
        }
    }
    changed
}

fn update<T: Scalar>(points: &[ItemVector], assignments: &[usize], centroids: &mut [Vec<T>]) -> Vec<usize> {
    let dim = centroids[0].len();
    let mut sums = vec![vec![T::zero(); dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, &x) in sums[a].iter_mut().zip(&p.coords) {
            *s = *s + T::of(x as f64);
        }
    }
    for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
        if n > 0 {
            let n = T::of_usize(n);
            *c = s.into_iter().map(|v| v / n).collect();
        }
    }
    counts
}

/// Moves the point farthest from its centroid in the largest cluster into
/// each empty cluster. Returns whether anything moved.
fn repair_empty<T: Scalar>(points: &[ItemVector], assignments: &mut [usize], centroids: &mut [Vec<T>], counts: &mut [usize]) -> bool {
    let mut moved = false;
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let largest = (0..counts.len()).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).expect("clusters");
        if counts[largest] < 2 {
            break;
        }
        let mut far = None;
        let mut far_d = T::neg_infinity();
        for (i, p) in points.iter().enumerate() {
            if assignments[i] == largest {
                let d = dist2(&p.coords, &centroids[largest]);
                if d > far_d {
                    far = Some(i);
                    far_d = d;
                }
            }
        }
        let far = far.expect("non-empty cluster");
        assignments[far] = empty;
        counts[largest] -= 1;
        counts[empty] = 1;
        centroids[empty] = to_point(&points[far].coords);
        moved = true;
    }
    if moved {
        let fresh = update(points, assignments, centroids);
        counts.copy_from_slice(&fresh);
    }
    moved
}

/// Lloyd's algorithm with k-means++ seeding. Ties go to the lower cluster
/// index; empty clusters are refilled from the largest one.
pub fn kmeans<T: Scalar>(points: &[ItemVector], clusters: usize, max_iters: usize, seed: u64) -> Result<KMeans<T>> {
    check_points(points)?;
    if clusters == 0 || clusters > points.len() {
        return Err(Error::TooManyClusters { clusters, points: points.len() });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus::<T>(points, clusters, &mut rng);
    let mut assignments = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    for _ in 0..max_iters.max(1) {
        let changed = assign(points, &centroids, &mut assignments);
        if !changed && !trace.is_empty() {
            break;
        }
        let mut counts = update(points, &assignments, &mut centroids);
        repair_empty(points, &mut assignments, &mut centroids, &mut counts);
        trace.push(objective(points, &assignments, &centroids));
    }
    let objective = *trace.last().expect("one iteration");
    Ok(KMeans { assignments, centroids, objective, trace })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    /// Integer-rounded member mean.
    pub centroid: Vec<u16>,
    /// Real members followed by padding up to the cluster capacity.
    pub members: Vec<ItemVector>,
}

impl Cluster {
    pub fn real_members(&self) -> impl Iterator<Item = &ItemVector> {
        self.members.iter().filter(|m| !m.is_pad())
    }
}

/// Public shape of a [`PreparedSets`], everything the cloud needs to lay out
/// the encrypted sections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SetsLayout {
    pub k: u16,
    pub capacity: u32,
    pub num_clusters: u32,
    pub stash_size: u32,
}

impl SetsLayout {
    /// Lanes per record: item id followed by `k` ratings.
    pub fn record_lanes(&self) -> usize {
        1 + self.k as usize
    }

    pub fn centroid_lanes(&self) -> usize {
        self.num_clusters as usize * self.k as usize
    }

    pub fn cluster_lanes(&self) -> usize {
        self.capacity as usize * self.record_lanes()
    }

    pub fn stash_lanes(&self) -> usize {
        self.stash_size as usize * self.record_lanes()
    }

    pub fn cluster_offset(&self, j: usize) -> usize {
        self.centroid_lanes() + j * self.cluster_lanes()
    }

    pub fn stash_offset(&self) -> usize {
        self.cluster_offset(self.num_clusters as usize)
    }

    pub fn body_lanes(&self) -> usize {
        self.stash_offset() + self.stash_lanes()
    }

    pub fn serialized_len(&self) -> usize {
        SETS_HEADER_LEN + 2 * self.body_lanes()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreparedSets {
    pub layout: SetsLayout,
    pub clusters: Vec<Cluster>,
    /// Sorted by item, padded to the configured multiple.
    pub stash: Vec<ItemVector>,
    pub rm_generation: u64,
}

fn push_record(lanes: &mut Vec<u16>, v: &ItemVector) {
    lanes.push(v.item_lane());
    lanes.extend_from_slice(&v.coords);
}

impl PreparedSets {
    pub fn centroid_lanes(&self) -> Vec<u16> {
        self.clusters.iter().flat_map(|c| c.centroid.iter().copied()).collect()
    }

    pub fn cluster_lanes(&self, j: usize) -> Vec<u16> {
        let mut lanes = Vec::with_capacity(self.layout.cluster_lanes());
        for m in &self.clusters[j].members {
            push_record(&mut lanes, m);
        }
        lanes
    }

    pub fn stash_lanes(&self) -> Vec<u16> {
        let mut lanes = Vec::with_capacity(self.layout.stash_lanes());
        for m in &self.stash {
            push_record(&mut lanes, m);
        }
        lanes
    }

    /// Centroids, then every cluster, then the stash.
    pub fn body_lanes(&self) -> Vec<u16> {
        let mut lanes = self.centroid_lanes();
        for j in 0..self.clusters.len() {
            lanes.extend(self.cluster_lanes(j));
        }
        lanes.extend(self.stash_lanes());
        lanes
    }

    /// Non-padding items across clusters and stash.
    pub fn real_items(&self) -> Vec<u32> {
        let mut items: Vec<u32> = self
            .clusters
            .iter()
            .flat_map(|c| c.real_members().map(|m| m.item))
            .chain(self.stash.iter().filter(|m| !m.is_pad()).map(|m| m.item))
            .collect();
        items.sort_unstable();
        items
    }
}

fn split_group<T: Scalar>(points: &[ItemVector], group: Vec<usize>, max_size: usize, seed: u64, out: &mut Vec<Vec<usize>>) -> Result<()> {
    if group.len() <= max_size {
        out.push(group);
        return Ok(());
    }
    let (left, right) = if group.iter().all(|&i| points[i].coords == points[group[0]].coords) {
        // Identical points: halve in index order.
        let mut left = group;
        let right = left.split_off(left.len() / 2);
        (left, right)
    } else {
        let sub: Vec<ItemVector> = group.iter().map(|&i| points[i].clone()).collect();
        let km = kmeans::<T>(&sub, 2, 25, seed)?;
        let (l, r): (Vec<_>, Vec<_>) = group.iter().zip(&km.assignments).partition(|(_, &a)| a == 0);
        (l.into_iter().map(|(&i, _)| i).collect(), r.into_iter().map(|(&i, _)| i).collect())
    };
    split_group::<T>(points, left, max_size, seed.wrapping_mul(31).wrapping_add(1), out)?;
    split_group::<T>(points, right, max_size, seed.wrapping_mul(31).wrapping_add(2), out)
}

fn rounded_mean(points: &[ItemVector], members: &[usize], dim: usize) -> Vec<u16> {
    let n = members.len() as u64;
    (0..dim)
        .map(|d| {
            let sum: u64 = members.iter().map(|&i| points[i].coords[d] as u64).sum();
            ((2 * sum + n) / (2 * n)) as u16
        })
        .collect()
}

/// Turns a clustering into fixed-capacity buckets. Groups smaller than
/// `min_size` go to the stash, groups larger than `max_size` are split by
/// recursive 2-means. Every bucket is padded to `max_size`, the stash to a
/// multiple of `stash_multiple`.
pub fn partition_stash<T: Scalar>(
    points: &[ItemVector],
    assignments: &[usize],
    min_size: usize,
    max_size: usize,
    stash_multiple: usize,
    seed: u64,
) -> Result<PreparedSets> {
    if min_size > max_size || max_size == 0 {
        return Err(Error::InvalidSizes { min: min_size, max: max_size });
    }
    if assignments.len() != points.len() {
        return Err(Error::Format("one assignment per point required".into()));
    }
    let dim = check_points(points)?;
    if let Some(p) = points.iter().find(|p| p.item >= PAD_LANE as u32) {
        return Err(Error::LaneOverflow(p.item as u64));
    }
    let num_groups = assignments.iter().max().map_or(0, |&m| m + 1);
    let mut groups = vec![Vec::new(); num_groups];
    for (i, &a) in assignments.iter().enumerate() {
        groups[a].push(i);
    }

    let mut pieces = Vec::new();
    for (g, group) in groups.into_iter().enumerate() {
        if group.len() >= min_size {
            split_group::<T>(points, group, max_size, seed ^ (g as u64) << 20, &mut pieces)?;
        } else {
            pieces.push(group);
        }
    }

    let mut clusters = Vec::new();
    let mut stash = Vec::new();
    for piece in pieces {
        if piece.is_empty() {
            continue;
        }
        if piece.len() < min_size {
            stash.extend(piece.iter().map(|&i| points[i].clone()));
            continue;
        }
        let centroid = rounded_mean(points, &piece, dim);
        let mut members: Vec<ItemVector> = piece.iter().map(|&i| points[i].clone()).collect();
        members.resize(max_size, ItemVector::pad(dim));
        clusters.push(Cluster { centroid, members });
    }
    stash.sort_by_key(|v| v.item);
    let multiple = stash_multiple.max(1);
    let padded = stash.len().div_ceil(multiple) * multiple;
    stash.resize(padded, ItemVector::pad(dim));

    Ok(PreparedSets {
        layout: SetsLayout {
            k: dim as u16,
            capacity: max_size as u32,
            num_clusters: clusters.len() as u32,
            stash_size: stash.len() as u32,
        },
        clusters,
        stash,
        rm_generation: 0,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionConfig {
    /// Number of k-means clusters; `ceil(sqrt(n))` when unset.
    pub clusters: Option<usize>,
    pub capacity: usize,
    /// Smallest cluster kept out of the stash; `ceil(capacity / 4)` when unset.
    pub min_size: Option<usize>,
    pub max_iters: usize,
    pub stash_multiple: usize,
    pub seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { clusters: None, capacity: 64, min_size: None, max_iters: 50, stash_multiple: 1, seed: 0 }
    }
}

/// k-means followed by [`partition_stash`].
pub fn prepare_sets<T: Scalar>(points: &[ItemVector], cfg: &PartitionConfig, rm_generation: u64) -> Result<PreparedSets> {
    check_points(points)?;
    let n = points.len();
    let clusters = cfg.clusters.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize).clamp(1, n);
    let min_size = cfg.min_size.unwrap_or_else(|| cfg.capacity.div_ceil(4));
    let km = kmeans::<T>(points, clusters, cfg.max_iters, cfg.seed)?;
    let mut sets = partition_stash::<T>(points, &km.assignments, min_size, cfg.capacity, cfg.stash_multiple, cfg.seed)?;
    sets.rm_generation = rm_generation;
    Ok(sets)
}

pub fn serialize_sets(sets: &PreparedSets) -> Vec<u8> {
    let l = sets.layout;
    let mut out = Vec::with_capacity(l.serialized_len());
    out.extend_from_slice(SETS_MAGIC);
    out.extend_from_slice(&SETS_VERSION.to_le_bytes());
    out.extend_from_slice(&l.k.to_le_bytes());
    out.extend_from_slice(&l.capacity.to_le_bytes());
    out.extend_from_slice(&l.num_clusters.to_le_bytes());
    out.extend_from_slice(&l.stash_size.to_le_bytes());
    out.extend_from_slice(&sets.rm_generation.to_le_bytes());
    for lane in sets.body_lanes() {
        out.extend_from_slice(&lane.to_le_bytes());
    }
    out
}

/// Parses the fixed header only.
pub fn parse_sets_header(bytes: &[u8]) -> Result<(SetsLayout, u64)> {
    if bytes.len() < SETS_HEADER_LEN || &bytes[..4] != SETS_MAGIC {
        return Err(Error::Format("not a PRSS blob".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u16_at(4);
    if version != SETS_VERSION {
        return Err(Error::Format(format!("unsupported PRSS version {version}")));
    }
    let layout = SetsLayout { k: u16_at(6), capacity: u32_at(8), num_clusters: u32_at(12), stash_size: u32_at(16) };
    if layout.k == 0 {
        return Err(Error::Format("zero-dimensional item vectors".into()));
    }
    let generation = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    Ok((layout, generation))
}

/// Rebuilds sets from a header and body lanes.
pub fn sets_from_lanes(layout: SetsLayout, rm_generation: u64, lanes: &[u16]) -> Result<PreparedSets> {
    if lanes.len() != layout.body_lanes() {
        return Err(Error::Format(format!("expected {} lanes, got {}", layout.body_lanes(), lanes.len())));
    }
    let k = layout.k as usize;
    let rec = layout.record_lanes();
    let record = |chunk: &[u16]| ItemVector {
        item: if chunk[0] == PAD_LANE { PAD_ITEM } else { chunk[0] as u32 },
        coords: chunk[1..].to_vec(),
    };
    let mut clusters = Vec::with_capacity(layout.num_clusters as usize);
    for j in 0..layout.num_clusters as usize {
        let centroid = lanes[j * k..(j + 1) * k].to_vec();
        let off = layout.cluster_offset(j);
        let members = lanes[off..off + layout.cluster_lanes()].chunks(rec).map(record).collect();
        clusters.push(Cluster { centroid, members });
    }
    let stash = lanes[layout.stash_offset()..].chunks(rec).map(record).collect();
    Ok(PreparedSets { layout, clusters, stash, rm_generation })
}

pub fn deserialize_sets(bytes: &[u8]) -> Result<PreparedSets> {
    let (layout, generation) = parse_sets_header(bytes)?;
    if bytes.len() != layout.serialized_len() {
        return Err(Error::Format(format!("PRSS length {} does not match header ({})", bytes.len(), layout.serialized_len())));
    }
    let lanes: Vec<u16> = bytes[SETS_HEADER_LEN..].chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    sets_from_lanes(layout, generation, &lanes)
}
