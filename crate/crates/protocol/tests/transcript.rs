mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use prs_he::{encoded_len, HeContext, HeParams, PackingLayout};
use prs_mpc::session::run_bytes;
use prs_protocol::{plan_circuits, query_local, Phase, QueryOptions, QueryPlan, QueryRun};
use prs_wire::{Direction, HEADER_LEN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn phase_bytes(run: &QueryRun) -> BTreeMap<u16, (u64, u64)> {
    run.client.report.phases.iter().map(|(&p, r)| (p, (r.sent, r.received))).collect()
}

fn lanes(buf: &[u8]) -> Vec<u16> {
    buf.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()
}

fn buffer<'a>(log: &'a prs_protocol::StateLog, name: &str) -> &'a [u8] {
    log.checkpoints.iter().flat_map(|(_, v)| &v.buffers).find(|(n, _)| n == name).map(|(_, b)| b.as_slice()).unwrap()
}

#[test]
fn phase_bytes_do_not_depend_on_query_or_cluster_choice() {
    let mut w = synthetic(700, 3, 21);
    let sets = w.owner.model(CLIENT).unwrap().sets.clone();
    let options = QueryOptions { k_cl: 1, ..Default::default() };
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    let mut queries: Vec<Vec<u16>> = (0..20).map(|_| (0..3).map(|_| rng.gen_range(0..=4)).collect()).collect();
    // Each centroid as a query selects its own cluster unless an earlier
    // centroid coincides with it.
    queries.extend(sets.clusters.iter().map(|c| c.centroid.clone()));
    let mut reference = None;
    let mut selected = BTreeSet::new();
    for q in &queries {
        let run = query_local(&mut w.client, &w.cloud, q, &options, true).unwrap();
        let j = lanes(buffer(&run.client_log, "clusters"))[0];
        selected.insert(j);

        // Retrieved members reconstruct to the selected cluster exactly.
        let client = lanes(buffer(&run.client_log, "member_shares"));
        let cloud = lanes(buffer(&run.cloud_log, "member_shares"));
        let plain: Vec<u16> = client.iter().zip(&cloud).map(|(c, s)| c.wrapping_sub(*s)).collect();
        assert_eq!(plain, sets.cluster_lanes(j as usize));

        let bytes = phase_bytes(&run);
        match &reference {
            None => reference = Some(bytes),
            Some(r) => assert_eq!(&bytes, r, "query {q:?}"),
        }
    }
    let distinct: BTreeSet<&Vec<u16>> = sets.clusters.iter().map(|c| &c.centroid).collect();
    assert_eq!(selected.len(), distinct.len(), "every distinct centroid selected its cluster");
}

#[test]
fn transcript_sizes_follow_the_plan() {
    let mut w = synthetic(900, 3, 23);
    let layout = w.owner.model(CLIENT).unwrap().sets.layout;
    let options = QueryOptions::default();
    let run = query_local(&mut w.client, &w.cloud, &[2, 3, 4], &options, false).unwrap();
    let plan = QueryPlan::new(layout, &options).unwrap();

    let he = HeContext::new(HeParams::default()).unwrap();
    let packing = PackingLayout::folded(he.degree(), 3).unwrap();
    let he_frame = |n: usize| (HEADER_LEN + encoded_len(&he, packing.plaintexts_for(n))) as u64;
    let phases = &run.client.report.phases;
    let sc_candidates = (layout.num_clusters + layout.stash_size) as usize;
    assert_eq!(phases[&Phase::He.code()].sent, he_frame(sc_candidates));
    assert_eq!(phases[&Phase::He.code()].received, he_frame(sc_candidates));
    assert_eq!(phases[&Phase::HeMembers.code()].sent, he_frame(plan.member_n));

    let mut gc: BTreeMap<u16, u64> = BTreeMap::new();
    for (phase, c) in plan_circuits(&plan, CLIENT, 0).unwrap() {
        *gc.entry(phase.code()).or_default() += run_bytes(&c) as u64;
    }
    for (p, want) in gc {
        let r = &phases[&p];
        assert_eq!(r.sent + r.received, want, "phase {}", Phase::from_code(p).unwrap().name());
    }
}

#[test]
fn totals_reconcile_between_endpoints_and_counters() {
    let mut w = synthetic(400, 3, 24);
    let run = query_local(&mut w.client, &w.cloud, &[4, 4, 4], &QueryOptions::default(), false).unwrap();
    let (c, s) = (&run.client, &run.cloud);
    assert_eq!(c.report.sent, s.report.received);
    assert_eq!(c.report.received, s.report.sent);
    assert_eq!(c.report.sent, c.transcript.bytes(Direction::Sent));
    assert_eq!(c.counters.sent, c.report.sent);
    assert_eq!(c.counters.received, c.report.received);
    let phase_sum: u64 = c.report.phases.values().map(|r| r.sent + r.received).sum();
    assert_eq!(phase_sum, c.report.total());
    let phases: Vec<u16> = c.report.phases.keys().copied().collect();
    let mut sorted = phases.clone();
    sorted.sort_unstable();
    assert_eq!(phases, sorted);
}

#[test]
fn identical_seeds_give_identical_transcripts() {
    let runs: Vec<_> = [31u64, 31, 32]
        .into_iter()
        .map(|seed| {
            let mut w = synthetic(500, 3, seed);
            let run = query_local(&mut w.client, &w.cloud, &[1, 4, 2], &QueryOptions::default(), false).unwrap();
            (run.client.transcript.digest(), run.cloud.transcript.digest(), run.result)
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_ne!(runs[0].0, runs[2].0);
}

#[test]
fn repeated_queries_use_fresh_randomness() {
    let mut w = synthetic(300, 3, 33);
    let a = query_local(&mut w.client, &w.cloud, &[1, 1, 1], &QueryOptions::default(), false).unwrap();
    let b = query_local(&mut w.client, &w.cloud, &[1, 1, 1], &QueryOptions::default(), false).unwrap();
    assert_eq!(a.result, b.result);
    assert_ne!(a.client.transcript.digest(), b.client.transcript.digest());
    assert_eq!(phase_bytes(&a), phase_bytes(&b));
}
