use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use prs_core::synth::{self, SynthConfig};
use prs_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_ds(seed: u64) -> RatingDataset {
    synth::ratings(&SynthConfig::small(50, 80, 900), seed)
}

#[test]
fn entry_count_is_unrated_items() {
    let ds = small_ds(1);
    for k in [2, 3] {
        let rms = build_all(&ds, &ModelConfig::<f64>::new(k), &VulnerabilityPolicy::unlimited()).unwrap();
        for rm in &rms {
            let rated = ds.user_ratings(rm.target).len();
            assert_eq!(rm.entries.len(), ds.num_items() - rated);
            assert_eq!(rm.rating_cells(), (ds.num_items() - rated) * k);
        }
    }
}

#[test]
fn caps_are_respected() {
    let ds = small_ds(2);
    let mut policy = VulnerabilityPolicy::unlimited();
    for u in 0..10 {
        policy = policy.with_cap(u, 3);
    }
    let rm = build_rm(&ds, 20, &ModelConfig::<f64>::new(3), &policy).unwrap();
    let mut uses: BTreeMap<u32, u32> = BTreeMap::new();
    for e in &rm.entries {
        for &n in &e.neighbors {
            *uses.entry(n).or_default() += 1;
        }
    }
    for u in 0..10 {
        assert!(uses.get(&u).copied().unwrap_or(0) <= 3);
    }
}

#[test]
fn exposure_matches_brute_force_recount() {
    let ds = small_ds(3);
    let rms = build_all(&ds, &ModelConfig::<f64>::new(3), &VulnerabilityPolicy::unlimited()).unwrap();
    let report = exposure_report::<f64>(&rms, &ds, 3).unwrap();

    let mut seen: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); ds.num_users()];
    for rm in &rms {
        for e in &rm.entries {
            for &n in e.neighbors.iter().filter(|&&n| (n as usize) < ds.num_users()) {
                seen[n as usize].insert(e.item);
            }
        }
    }
    let recount: Vec<usize> = seen.iter().map(BTreeSet::len).collect();
    assert_eq!(report.exposure, recount);
    let mean = recount.iter().sum::<usize>() as f64 / ds.num_users() as f64;
    assert!((report.mean_exposure - mean).abs() < 1e-12);
    assert!(report.reduction > 0.0, "reuse should shrink exposure: {report:?}");
}

#[test]
fn super_neighbor_dominates_exposure() {
    // The last user rates everything but disagrees with everyone on item 0,
    // which all other users rate identically. Pure gain (w = 0) picks that
    // user for every entry; pure similarity picks the agreeing users.
    let n = 20u32;
    let m = 30u32;
    let sup = n - 1;
    let mut t: Vec<(u32, u32, u16)> = (0..m).map(|i| (sup, i, if i == 0 { 0 } else { 4 })).collect();
    for u in 0..sup {
        t.push((u, 0, 4));
        for j in 0..3 {
            t.push((u, 1 + (u * 3 + j) % (m - 1), ((u + j) % 5) as u16));
        }
    }
    let ds = RatingDataset::from_triples(RatingScale::five_stars(), IdMap::sequential(n as usize), IdMap::sequential(m as usize), t)
        .unwrap();
    let cfg = ModelConfig::<f64>::new(1).with_weight(0.0);
    let rms = build_all(&ds, &cfg, &VulnerabilityPolicy::unlimited()).unwrap();
    let report = exposure_report::<f64>(&rms, &ds, 1).unwrap();
    let contributors = |v: &[usize]| v.iter().filter(|&&c| c > 0).count();
    assert_eq!(contributors(&report.exposure), 1);
    assert_eq!(report.exposure[sup as usize], m as usize - 1);
    assert!(contributors(&report.baseline_exposure) > contributors(&report.exposure));
}

#[test]
fn rm_file_round_trip_on_real_model() {
    let ds = small_ds(4);
    let rm = build_rm(&ds, 7, &ModelConfig::<f64>::new(3), &VulnerabilityPolicy::unlimited()).unwrap();
    let back = deserialize_rm(&serialize_rm(&rm)).unwrap();
    assert_eq!(back.entries, rm.entries);
    assert_eq!(back.target, 7);
}

/// Header reader written separately from the library parser.
fn header_fields(b: &[u8]) -> (u16, u16, u32, u32, u32, u64) {
    let mut c = std::io::Cursor::new(&b[4..]);
    use std::io::Read;
    let mut rd = |n: usize| {
        let mut v = vec![0u8; n];
        c.read_exact(&mut v).unwrap();
        v.iter().rev().fold(0u64, |acc, &x| acc << 8 | x as u64)
    };
    (rd(2) as u16, rd(2) as u16, rd(4) as u32, rd(4) as u32, rd(4) as u32, rd(8))
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<ItemVector> {
    let mut items: Vec<u32> = (0..3 * n as u32).collect();
    for i in (1..items.len()).rev() {
        items.swap(i, rng.gen_range(0..=i));
    }
    (0..n).map(|i| ItemVector { item: items[i], coords: (0..k).map(|_| rng.gen_range(0..5)).collect() }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kmeans_beats_random_assignment(seed in any::<u64>(), n in 10usize..120, clusters in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng, n, 3);
        let km = kmeans::<f64>(&pts, clusters, 50, seed).unwrap();
        prop_assert!(km.trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        let random: Vec<usize> = (0..n).map(|_| rng.gen_range(0..clusters)).collect();
        let mut cents = vec![vec![0.0f64; 3]; clusters];
        let mut counts = vec![0usize; clusters];
        for (p, &a) in pts.iter().zip(&random) {
            counts[a] += 1;
            for d in 0..3 { cents[a][d] += p.coords[d] as f64; }
        }
        for (c, &n) in cents.iter_mut().zip(&counts) {
            if n > 0 { c.iter_mut().for_each(|x| *x /= n as f64); }
        }
        let random_obj = prs_core::cluster::objective(&pts, &random, &cents);
        prop_assert!(km.objective <= random_obj + 1e-9);
    }

    #[test]
    fn partition_conserves_items(seed in any::<u64>(), n in 1usize..200, cap in 2usize..20, mult in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng, n, 2);
        let cfg = PartitionConfig { capacity: cap, stash_multiple: mult, seed, ..Default::default() };
        let sets = prepare_sets::<f64>(&pts, &cfg, 3).unwrap();
        let mut want: Vec<u32> = pts.iter().map(|p| p.item).collect();
        want.sort_unstable();
        prop_assert_eq!(sets.real_items(), want);
        prop_assert_eq!(sets.stash.len() % mult, 0);
        let min = cap.div_ceil(4);
        for c in &sets.clusters {
            prop_assert_eq!(c.members.len(), cap);
            let real = c.real_members().count();
            prop_assert!(real >= min && real <= cap);
        }
        let bytes = serialize_sets(&sets);
        let l = sets.layout;
        prop_assert_eq!(header_fields(&bytes), (1, l.k, l.capacity, l.num_clusters, l.stash_size, 3));
        prop_assert_eq!(deserialize_sets(&bytes).unwrap(), sets);
    }

    #[test]
    fn rm_entries_cover_unrated_items(seed in any::<u64>(), k in 1usize..5, w in 0.0f64..=1.0) {
        let ds = synth::ratings(&SynthConfig::small(15, 25, 120), seed);
        let t = (seed % 15) as u32;
        let rm = build_rm(&ds, t, &ModelConfig::new(k).with_weight(w), &VulnerabilityPolicy::unlimited()).unwrap();
        let unrated: Vec<u32> = (0..25).filter(|&i| ds.rating(t, i).is_none()).collect();
        prop_assert_eq!(rm.entries.iter().map(|e| e.item).collect::<Vec<_>>(), unrated);
        for e in &rm.entries {
            for (&n, &r) in e.neighbors.iter().zip(&e.ratings) {
                if n as usize == ds.num_users() {
                    prop_assert_eq!(r, ds.scale().neutral());
                } else {
                    prop_assert_eq!(ds.rating(n, e.item), Some(r));
                }
            }
        }
    }
}
