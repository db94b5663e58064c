#![allow(dead_code)]

use prs_core::{synth, PartitionConfig, PreparedSets, RecommendationModel};
use prs_protocol::{distribute_local, Client, Cloud, DataOwner, SeedTree};

pub const CLIENT: u32 = 7;

pub struct World {
    pub owner: DataOwner,
    pub cloud: Cloud,
    pub client: Client,
}

pub fn world_from_model(rm: RecommendationModel, partition: PartitionConfig, seed: u64) -> World {
    let seeds = SeedTree::from_u64(seed);
    let mut owner = DataOwner::without_dataset(partition, seeds.child("owner", 0));
    owner.install_model(CLIENT, rm).unwrap();
    world(owner, seeds)
}

pub fn world(mut owner: DataOwner, seeds: SeedTree) -> World {
    let cloud = Cloud::new(seeds.child("cloud", 0)).unwrap();
    let run = distribute_local(&mut owner, &cloud, CLIENT).unwrap();
    let client = Client::new(run.bundle, seeds.child("client", 0)).unwrap();
    World { owner, cloud, client }
}

pub fn synthetic(items: usize, k: u16, seed: u64) -> World {
    world_from_model(synth::model(items, k, 4, seed), PartitionConfig { seed, ..Default::default() }, seed)
}

pub fn distance(a: &[u16], b: &[u16]) -> u64 {
    a.iter().zip(b).map(|(&x, &y)| (x as i64 - y as i64).pow(2) as u64).sum()
}

fn top(mut c: Vec<(u64, u32)>, k: usize) -> Vec<u32> {
    c.sort_unstable();
    c.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Exact result of the private pipeline computed in the clear: top-k over
/// the stash plus the members of the `k_cl` nearest centroids, ties to the
/// lower id.
pub fn partition_oracle(sets: &PreparedSets, q: &[u16], k_out: usize, k_cl: usize) -> Vec<u32> {
    let mut cand: Vec<(u64, u32)> = sets.stash.iter().filter(|m| !m.is_pad()).map(|m| (distance(&m.coords, q), m.item)).collect();
    let centroids: Vec<(u64, u32)> = sets.clusters.iter().enumerate().map(|(j, c)| (distance(&c.centroid, q), j as u32)).collect();
    for j in top(centroids, k_cl) {
        cand.extend(sets.clusters[j as usize].real_members().map(|m| (distance(&m.coords, q), m.item)));
    }
    top(cand, k_out)
}

/// Exact KNN over every item of the model.
pub fn full_oracle(sets: &PreparedSets, q: &[u16], k_out: usize) -> Vec<u32> {
    let all = sets
        .clusters
        .iter()
        .flat_map(|c| c.real_members())
        .chain(sets.stash.iter().filter(|m| !m.is_pad()))
        .map(|m| (distance(&m.coords, q), m.item))
        .collect();
    top(all, k_out)
}

pub fn overlap(a: &[u32], b: &[u32]) -> f64 {
    a.iter().filter(|x| b.contains(x)).count() as f64 / b.len() as f64
}
