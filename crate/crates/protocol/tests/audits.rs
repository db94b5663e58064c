mod common;

use common::*;
use prs_mpc::kreyvium::{keystream_bytes, keystream_lanes};
use prs_protocol::derive::{chunks, iv};
use prs_protocol::{
    audit_client, audit_client_transcript, audit_cloud, distribute_local, query_local, Cloud, DataOwner, Phase, QueryOptions,
    SeedTree, StateLog, StateView,
};
use prs_core::{synth, PartitionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Independent recomputation of the distribution keystream from the
/// cloud's primary key and the relayed masked key.
fn expected_stream(primary: &[u8; 16], masked_key: &[u8; 16], layout: &prs_core::SetsLayout, client: u32, generation: u64) -> Vec<u16> {
    let pad = keystream_bytes(primary, &iv("key", client, generation, 0), 16);
    let client_key: [u8; 16] = std::array::from_fn(|i| masked_key[i] ^ pad[i]);
    let region = |key: &[u8; 16], domain: &str, lanes: usize| -> Vec<u16> {
        chunks(lanes).enumerate().flat_map(|(c, (_, len))| keystream_lanes(key, &iv(domain, client, generation, c as u64), len)).collect()
    };
    let sc = region(&client_key, "sc", layout.centroid_lanes() + layout.stash_lanes());
    let mut out = sc[..layout.centroid_lanes()].to_vec();
    for j in 0..layout.num_clusters as usize {
        let subkey: [u8; 16] = keystream_bytes(primary, &iv("subkey", client, generation, j as u64), 16).try_into().unwrap();
        out.extend(region(&subkey, "cluster", layout.cluster_lanes()));
    }
    out.extend_from_slice(&sc[layout.centroid_lanes()..]);
    out
}

#[test]
fn masked_sets_unmask_only_with_the_right_stream() {
    let seed = 41;
    let w = synthetic(1500, 3, seed);
    let sets = &w.owner.model(CLIENT).unwrap().sets;
    let bundle = w.client.bundle();
    let primary: [u8; 16] = SeedTree::from_u64(seed).child("cloud", 0).seed("primary-key", 0)[..16].try_into().unwrap();
    let stream = expected_stream(&primary, &bundle.masked_key, &bundle.layout, CLIENT, 0);
    let unmasked: Vec<u16> = bundle.masked.iter().zip(&stream).map(|(m, s)| m ^ s).collect();
    assert_eq!(unmasked, sets.body_lanes());
    assert!(bundle.checksum_matches(&unmasked));

    // Without the primary key the client can only guess.
    assert!(!bundle.checksum_matches(&bundle.masked));
    let wrong = expected_stream(&[0; 16], &bundle.masked_key, &bundle.layout, CLIENT, 0);
    let guess: Vec<u16> = bundle.masked.iter().zip(&wrong).map(|(m, s)| m ^ s).collect();
    assert!(!bundle.checksum_matches(&guess));
}

#[test]
fn cloud_keeps_only_layout_after_setup() {
    let seeds = SeedTree::from_u64(42);
    let mut owner = DataOwner::without_dataset(PartitionConfig { seed: 42, ..Default::default() }, seeds.child("owner", 0));
    owner.install_model(CLIENT, synth::model(800, 3, 4, 42)).unwrap();
    let cloud = Cloud::new(seeds.child("cloud", 0)).unwrap();
    let run = distribute_local(&mut owner, &cloud, CLIENT).unwrap();
    let sets = &owner.model(CLIENT).unwrap().sets;
    assert_eq!(run.cloud_log.phases(), vec![Phase::Setup]);
    audit_cloud(&run.cloud_log, sets).unwrap();
    let view = cloud.state_view();
    let held: usize = view.buffers.iter().map(|(_, b)| b.len()).sum();
    assert_eq!(held, 16 + 14 + 8, "primary key plus one registration");
    assert_eq!(cloud.registration(CLIENT).unwrap().layout, sets.layout);
}

#[test]
fn every_query_phase_passes_both_audits() {
    let mut w = synthetic(1200, 3, 43);
    let sets = w.owner.model(CLIENT).unwrap().sets.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(44);
    for _ in 0..4 {
        let q: Vec<u16> = (0..3).map(|_| rng.gen_range(0..=4)).collect();
        let run = query_local(&mut w.client, &w.cloud, &q, &QueryOptions::default(), true).unwrap();
        let phases = run.cloud_log.phases();
        for p in [Phase::Handshake, Phase::Unmask, Phase::He, Phase::GcStash, Phase::Pir, Phase::HeMembers, Phase::GcMembers, Phase::Merge] {
            assert!(phases.contains(&p), "cloud checkpoint after {}", p.name());
        }
        audit_cloud(&run.cloud_log, &sets).unwrap();
        let mut with_state = run.cloud_log.clone();
        with_state.checkpoints.push((Phase::Merge, w.cloud.state_view()));
        audit_cloud(&with_state, &sets).unwrap();
        audit_client(&run.client_log, &run.cloud_log).unwrap();
        audit_client_transcript(&run.client.transcript.kinds_received()).unwrap();
    }
}

#[test]
fn audits_catch_planted_leaks() {
    let mut w = synthetic(300, 3, 45);
    let sets = w.owner.model(CLIENT).unwrap().sets.clone();
    let run = query_local(&mut w.client, &w.cloud, &[0, 0, 1], &QueryOptions::default(), true).unwrap();

    let mut leaky_cloud = run.cloud_log.clone();
    let mut v = StateView::default();
    v.lanes("debug", &sets.stash_lanes());
    leaky_cloud.checkpoints.push((Phase::Merge, v));
    assert!(audit_cloud(&leaky_cloud, &sets).is_err());

    let shares = run.cloud_log.checkpoints.iter().find(|(p, _)| *p == Phase::Unmask).unwrap().1.clone();
    let mut leaky_client = run.client_log.clone();
    let mut v = StateView::default();
    v.bytes("received", &shares.buffers[0].1);
    leaky_client.checkpoints.push((Phase::Merge, v));
    assert!(audit_client(&leaky_client, &run.cloud_log).is_err());
    assert!(audit_client(&run.client_log, &StateLog::default()).is_ok());
}
