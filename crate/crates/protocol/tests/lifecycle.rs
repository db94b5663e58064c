mod common;

use std::net::TcpListener;
use std::sync::Arc;

use common::*;
use prs_core::{synth, ModelConfig, PartitionConfig};
use prs_protocol::{
    distribute_local, feedback_local, query_local, Client, Cloud, DataOwner, ProtocolError, QueryOptions, SeedTree, Served,
};
use prs_wire::{Direction, Metered, TcpChannel, WireError};

fn dataset_world(seed: u64) -> World {
    let ds = synth::ratings(&synth::SynthConfig::small(80, 400, 4000), seed);
    let seeds = SeedTree::from_u64(seed);
    let mut owner = DataOwner::new(ds, ModelConfig::new(3), PartitionConfig { seed, ..Default::default() }, seeds.child("owner", 0));
    owner.prepare(CLIENT).unwrap();
    world(owner, seeds)
}

fn aborted_with(err: ProtocolError, needle: &str) -> bool {
    matches!(&err, ProtocolError::Wire(WireError::Aborted(m)) if m.contains(needle))
}

#[test]
fn feedback_removes_the_item_and_advances_one_generation() {
    let mut w = dataset_world(51);
    let q = [4u16, 4, 4];
    let first = query_local(&mut w.client, &w.cloud, &q, &QueryOptions::default(), false).unwrap().result;
    assert_eq!(first.rm_generation, 0);
    let item = first.items[0];
    let old_bundle = w.client.bundle().clone();

    let fb = feedback_local(&mut w.owner, &w.cloud, &mut w.client, item, 4).unwrap();
    assert_eq!(fb.generation, 1);
    assert_eq!(w.client.generation(), 1);
    assert_eq!(w.cloud.registration(CLIENT).unwrap().generation, 1);
    assert_eq!(w.owner.dataset().unwrap().rating(CLIENT, item), Some(4));

    let sets = w.owner.model(CLIENT).unwrap().sets.clone();
    let second = query_local(&mut w.client, &w.cloud, &q, &QueryOptions::default(), false).unwrap().result;
    assert_eq!(second.rm_generation, 1);
    assert!(!second.items.contains(&item));
    assert_eq!(second.items, partition_oracle(&sets, &q, 10, 3));

    // The previous generation's bundle is no longer served.
    let mut stale = Client::new(old_bundle, SeedTree::from_u64(0)).unwrap();
    let err = query_local(&mut stale, &w.cloud, &q, &QueryOptions::default(), false).err().unwrap();
    assert!(aborted_with(err, "generation"));
}

#[test]
fn feedback_on_an_item_outside_the_model_is_rejected() {
    let mut w = dataset_world(52);
    let rated = w.owner.dataset().unwrap().user_ratings(CLIENT)[0].0;
    let err = feedback_local(&mut w.owner, &w.cloud, &mut w.client, rated, 2).err().unwrap();
    assert!(aborted_with(err, "not in the client's model"));
    assert_eq!(w.client.generation(), 0);
}

#[test]
fn duplicate_and_stale_setups_are_refused() {
    let mut w = synthetic(200, 3, 53);
    let err = distribute_local(&mut w.owner, &w.cloud, CLIENT).err().unwrap();
    assert!(matches!(err, ProtocolError::DuplicateSetup { .. }), "{err}");

    let mut newer = synth::model(200, 3, 4, 54);
    newer.generation = 2;
    w.owner.install_model(CLIENT, newer).unwrap();
    distribute_local(&mut w.owner, &w.cloud, CLIENT).unwrap();
    let mut older = synth::model(200, 3, 4, 55);
    older.generation = 1;
    w.owner.install_model(CLIENT, older).unwrap();
    let err = distribute_local(&mut w.owner, &w.cloud, CLIENT).err().unwrap();
    assert!(matches!(err, ProtocolError::Generation { current: 2, got: 1, .. }), "{err}");
}

#[test]
fn unknown_clients_are_refused() {
    let w = synthetic(100, 3, 56);
    let other = Cloud::new(SeedTree::from_u64(99)).unwrap();
    let mut client = Client::new(w.client.bundle().clone(), SeedTree::from_u64(1)).unwrap();
    let err = query_local(&mut client, &other, &[1, 1, 1], &QueryOptions::default(), false).err().unwrap();
    assert!(aborted_with(err, "no distributed model"));
}

#[test]
fn sessions_over_tcp_match_socket_counters() {
    let seeds = SeedTree::from_u64(57);
    let mut owner = DataOwner::without_dataset(PartitionConfig { seed: 57, ..Default::default() }, seeds.child("owner", 0));
    owner.install_model(CLIENT, synth::model(500, 3, 4, 57)).unwrap();
    let sets = owner.model(CLIENT).unwrap().sets.clone();
    let cloud = Arc::new(Cloud::new(seeds.child("cloud", 0)).unwrap());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || cloud.serve_tcp(listener, move |r| tx.send(r.map_err(|e| e.to_string())).unwrap()));

    let mut link = Metered::new(TcpChannel::connect(&addr).unwrap());
    let bundle = owner.distribute(&mut link, CLIENT).unwrap();
    assert_eq!(rx.recv().unwrap().unwrap(), Served::Setup { client: CLIENT, generation: 0 });

    let mut client = Client::new(bundle, seeds.child("client", 0)).unwrap();
    let mut link = Metered::new(TcpChannel::connect(&addr).unwrap());
    let q = [3u16, 0, 4];
    let result = client.query(&mut link, &q, &QueryOptions::default(), &mut prs_protocol::NoAudit).unwrap();
    assert_eq!(rx.recv().unwrap().unwrap(), Served::Query { client: CLIENT, generation: 0 });
    assert_eq!(result.items, partition_oracle(&sets, &q, 10, 3));
    let counters = link.counters();
    assert_eq!(counters.sent, link.transcript().bytes(Direction::Sent));
    assert_eq!(counters.received, link.transcript().bytes(Direction::Received));
}
