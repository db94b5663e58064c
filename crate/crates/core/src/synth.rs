//! Synthetic data for tests and benchmarks: a latent-factor rating generator
//! shaped like MovieLens-100K, and random recommendation models of a given size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::dataset::{IdMap, RatingDataset, RatingScale};
use crate::reuse_knn::{RecommendationModel, RmEntry};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub min_per_user: usize,
    /// Dimension of the latent taste vectors.
    pub factors: usize,
    /// Exponent of the Zipf-like item popularity curve.
    pub popularity_skew: f64,
}

impl SynthConfig {
    /// 943 users, 1682 items, 100 000 ratings, at least 20 per user.
    pub fn movielens_100k() -> Self {
        Self { users: 943, items: 1682, ratings: 100_000, min_per_user: 20, factors: 5, popularity_skew: 0.9 }
    }

    pub fn small(users: usize, items: usize, ratings: usize) -> Self {
        let min_per_user = (ratings / users.max(1)).min(5).min(items);
        Self { users, items, ratings, min_per_user, factors: 3, popularity_skew: 0.8 }
    }
}

/// Per-user rating counts: heavy-tailed, at least `min_per_user`, at most
/// `items`, summing to `ratings`.
fn activity(cfg: &SynthConfig, rng: &mut ChaCha20Rng) -> Vec<usize> {
    let n = cfg.users;
    let floor = cfg.min_per_user.min(cfg.items);
    let mut counts = vec![floor; n];
    let mut left = cfg.ratings.saturating_sub(floor * n).min(n * (cfg.items - floor));
    let heavy = LogNormal::new(0.0, 1.1).unwrap();
    let w: Vec<f64> = (0..n).map(|_| heavy.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    for (c, wi) in counts.iter_mut().zip(&w) {
        let extra = ((left as f64 * wi / total).floor() as usize).min(cfg.items - *c);
        *c += extra;
    }
    left -= counts.iter().map(|c| c - floor).sum::<usize>();
    // Hand out the rounding remainder one by one, heaviest users first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
    while left > 0 {
        for &u in &order {
            if left == 0 {
                break;
            }
            if counts[u] < cfg.items {
                counts[u] += 1;
                left -= 1;
            }
        }
    }
    counts
}

/// Deterministic synthetic ratings on the 1..5 integer scale.
pub fn ratings(cfg: &SynthConfig, seed: u64) -> RatingDataset {
    assert!(cfg.ratings <= cfg.users * cfg.items, "more ratings than cells");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let counts = activity(cfg, &mut rng);

    let mut ranks: Vec<usize> = (0..cfg.items).collect();
    for i in (1..ranks.len()).rev() {
        ranks.swap(i, rng.gen_range(0..=i));
    }
    let popularity: Vec<f64> = ranks.iter().map(|&r| (r as f64 + 5.0).powf(-cfg.popularity_skew)).collect();

    let unit = Normal::new(0.0, 1.0).unwrap();
    let factor_sd = 0.6;
    let user_bias: Vec<f64> = (0..cfg.users).map(|_| 0.4 * unit.sample(&mut rng)).collect();
    let item_bias: Vec<f64> = popularity
        .iter()
        .map(|p| 0.5 * unit.sample(&mut rng) + 0.15 * (p * 1e2).ln_1p())
        .collect();
    let user_taste: Vec<Vec<f64>> = (0..cfg.users)
        .map(|_| (0..cfg.factors).map(|_| factor_sd * unit.sample(&mut rng)).collect())
        .collect();
    let item_traits: Vec<Vec<f64>> = (0..cfg.items)
        .map(|_| (0..cfg.factors).map(|_| factor_sd * unit.sample(&mut rng)).collect())
        .collect();

    let mut triples = Vec::with_capacity(cfg.ratings);
    let mut keys: Vec<(f64, u32)> = Vec::with_capacity(cfg.items);
    for (u, &c) in counts.iter().enumerate() {
        // Weighted sampling without replacement: largest u^(1/w) keys win.
        keys.clear();
        keys.extend(popularity.iter().enumerate().map(|(i, &w)| {
            let x: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (x.ln() / w, i as u32)
        }));
        keys.select_nth_unstable_by(c.saturating_sub(1).min(cfg.items - 1), |a, b| b.0.total_cmp(&a.0));
        let mut chosen: Vec<u32> = keys[..c].iter().map(|&(_, i)| i).collect();
        chosen.sort_unstable();
        for i in chosen {
            let affinity: f64 = user_taste[u].iter().zip(&item_traits[i as usize]).map(|(a, b)| a * b).sum();
            let raw = 3.5 + user_bias[u] + item_bias[i as usize] + affinity + 0.7 * unit.sample(&mut rng);
            let stars = raw.round().clamp(1.0, 5.0) as u16;
            triples.push((u as u32, i, stars - 1));
        }
    }
    RatingDataset::from_triples(RatingScale::five_stars(), IdMap::sequential(cfg.users), IdMap::sequential(cfg.items), triples)
        .expect("generator emits valid triples")
}

/// The 943 x 1682 MovieLens-100K shaped twin.
pub fn movielens_twin(seed: u64) -> RatingDataset {
    ratings(&SynthConfig::movielens_100k(), seed)
}

/// A random model with `items` entries of `k` ratings in `0..=qmax`, drawn
/// around a per-item quality level so that the item vectors cluster.
pub fn model(items: usize, k: u16, qmax: u16, seed: u64) -> RecommendationModel {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 0.8).unwrap();
    let pad_neighbor = 10_000;
    let entries = (0..items as u32)
        .map(|item| {
            let level = rng.gen_range(0.0..=qmax as f64);
            let ratings = (0..k)
                .map(|_| (level + jitter.sample(&mut rng)).round().clamp(0.0, qmax as f64) as u16)
                .collect();
            let neighbors = (0..k).map(|_| rng.gen_range(0..pad_neighbor)).collect();
            RmEntry { item, neighbors, ratings }
        })
        .collect();
    RecommendationModel {
        target: 0,
        k,
        entries,
        generation: 0,
        dataset_generation: 0,
        pad_neighbor,
        pad_rating: qmax / 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::dataset_stats;

    #[test]
    fn twin_has_movielens_shape() {
        let ds = movielens_twin(1);
        assert_eq!(ds.num_users(), 943);
        assert_eq!(ds.num_items(), 1682);
        let mut counted = 0;
        for u in 0..943 {
            let row = ds.user_ratings(u);
            assert!(row.len() >= 20);
            counted += row.len();
        }
        assert_eq!(counted, 100_000);
        let stats = dataset_stats(&ds);
        assert!((stats.density - 100_000.0 / (943.0 * 1682.0)).abs() < 1e-12);
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = SynthConfig::small(30, 50, 300);
        assert_eq!(ratings(&cfg, 4), ratings(&cfg, 4));
        assert_ne!(ratings(&cfg, 4), ratings(&cfg, 5));
        assert_eq!(ratings(&cfg, 4).num_ratings(), 300);
    }

    #[test]
    fn model_shape() {
        let rm = model(100, 3, 4, 2);
        assert_eq!(rm.entries.len(), 100);
        assert!(rm.entries.iter().all(|e| e.ratings.len() == 3 && e.ratings.iter().all(|&r| r <= 4)));
    }
}
