mod common;

use common::*;
use prs_core::{synth, ItemVector, PartitionConfig, RecommendationModel, RmEntry};
use prs_protocol::{query_local, DisclosureMode, ProtocolError, QueryOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[test]
fn single_item_model_returns_that_item() {
    let rm = RecommendationModel {
        target: 0,
        k: 3,
        entries: vec![RmEntry { item: 42, neighbors: vec![1, 2, 3], ratings: vec![1, 3, 0] }],
        generation: 0,
        dataset_generation: 0,
        pad_neighbor: 10_000,
        pad_rating: 2,
    };
    let mut w = world_from_model(rm, PartitionConfig::default(), 1);
    for q in [[0u16, 0, 0], [4, 4, 4], [1, 3, 0]] {
        let run = query_local(&mut w.client, &w.cloud, &q, &QueryOptions::default(), false).unwrap();
        assert_eq!(run.result.items, vec![42]);
        assert_eq!(run.result.external_ids, vec!["42".to_string()]);
    }
}

#[test]
fn planted_zero_distance_item_is_found() {
    let q = [3u16, 1, 4];
    let mut rm = synth::model(600, 3, 4, 5);
    // Items at distance zero from the query all tie; keep exactly one.
    for e in rm.entries.iter_mut().filter(|e| e.ratings == q) {
        e.ratings = vec![0, 4, 0];
    }
    rm.entries[123].ratings = q.to_vec();
    let mut w = world_from_model(rm, PartitionConfig { seed: 5, ..Default::default() }, 5);
    let sets = &w.owner.model(CLIENT).unwrap().sets;
    let in_stash = sets.stash.iter().any(|m| m.item == 123);
    let run = query_local(&mut w.client, &w.cloud, &q, &QueryOptions::default(), false).unwrap();
    assert_eq!(run.result.items[0], 123, "stash: {in_stash}");
}

#[test]
fn planted_item_in_the_stash() {
    let q = [2u16, 2];
    let mut sets = prs_core::prepare_sets::<f64>(&synth::model(300, 2, 4, 9).item_vectors(), &PartitionConfig { seed: 9, ..Default::default() }, 0).unwrap();
    for m in sets.stash.iter_mut().chain(sets.clusters.iter_mut().flat_map(|c| c.members.iter_mut())) {
        if m.coords == q {
            m.coords = vec![4, 0];
        }
    }
    assert!(!sets.stash.is_empty());
    sets.stash[0] = ItemVector { item: sets.stash[0].item, coords: q.to_vec() };
    let planted = sets.stash[0].item;
    let seeds = prs_protocol::SeedTree::from_u64(9);
    let mut owner = prs_protocol::DataOwner::without_dataset(PartitionConfig::default(), seeds.child("owner", 0));
    owner.install_sets(CLIENT, sets);
    let mut w = world(owner, seeds);
    let run = query_local(&mut w.client, &w.cloud, &q, &QueryOptions { k_out: 5, ..Default::default() }, false).unwrap();
    assert_eq!(run.result.items[0], planted);
}

#[test]
fn random_queries_match_the_plain_pipeline_and_exact_knn() {
    let mut w = synthetic(2000, 3, 11);
    let sets = w.owner.model(CLIENT).unwrap().sets.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let options = QueryOptions::default();
    let mut total = 0.0;
    for _ in 0..50 {
        let q: Vec<u16> = (0..3).map(|_| rng.gen_range(0..=4)).collect();
        let got = query_local(&mut w.client, &w.cloud, &q, &options, false).unwrap().result;
        assert_eq!(got.items, partition_oracle(&sets, &q, 10, 3), "query {q:?}");
        total += overlap(&got.items, &full_oracle(&sets, &q, 10));
    }
    let mean = total / 50.0;
    assert!(mean >= 0.9, "mean overlap {mean}");
}

#[test]
fn all_stash_partition_is_exact() {
    let all_stash = PartitionConfig { capacity: 4096, min_size: Some(4096), seed: 2, ..Default::default() };
    let mut w = world_from_model(synth::model(300, 3, 4, 2), all_stash, 2);
    let sets = w.owner.model(CLIENT).unwrap().sets.clone();
    assert_eq!(sets.layout.num_clusters, 0);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..5 {
        let q: Vec<u16> = (0..3).map(|_| rng.gen_range(0..=4)).collect();
        let got = query_local(&mut w.client, &w.cloud, &q, &QueryOptions::default(), false).unwrap().result;
        assert_eq!(got.items, full_oracle(&sets, &q, 10));
    }
}

#[test]
fn per_stage_disclosure_gives_the_same_result() {
    let mut w = synthetic(500, 3, 4);
    let sets = w.owner.model(CLIENT).unwrap().sets.clone();
    let q = [1u16, 2, 3];
    let final_only = query_local(&mut w.client, &w.cloud, &q, &QueryOptions::default(), false).unwrap().result;
    let per_stage = QueryOptions { disclosure: DisclosureMode::PerStage, ..Default::default() };
    let disclosed = query_local(&mut w.client, &w.cloud, &q, &per_stage, false).unwrap().result;
    assert_eq!(final_only.items, disclosed.items);
    assert!(final_only.disclosed.is_empty());
    for item in &disclosed.items {
        assert!(disclosed.disclosed.contains(item));
    }
    assert_eq!(disclosed.items, partition_oracle(&sets, &q, 10, 3));
}

#[test]
fn small_k_out_and_more_probes() {
    let mut w = synthetic(800, 2, 6);
    let sets = w.owner.model(CLIENT).unwrap().sets.clone();
    for (k_out, k_cl) in [(1, 1), (3, 5), (20, 2)] {
        let q = [4u16, 1];
        let options = QueryOptions { k_out, k_cl, ..Default::default() };
        let got = query_local(&mut w.client, &w.cloud, &q, &options, false).unwrap().result;
        assert_eq!(got.items, partition_oracle(&sets, &q, k_out, k_cl), "k_out {k_out}, k_cl {k_cl}");
    }
}

#[test]
fn malformed_queries_are_rejected_before_any_traffic() {
    let mut w = synthetic(100, 3, 8);
    let err = query_local(&mut w.client, &w.cloud, &[1, 2], &QueryOptions::default(), false).err().unwrap();
    assert!(matches!(err, ProtocolError::Invalid(_)), "{err}");
    let err = query_local(&mut w.client, &w.cloud, &[1, 2, 3], &QueryOptions { k_out: 0, ..Default::default() }, false).err().unwrap();
    assert!(matches!(err, ProtocolError::Invalid(_)), "{err}");
}
