use std::thread;

use prs_mpc::{Circuit, EvaluatorSession, GarblerSession};
use prs_wire::{loopback_pair, Metered};

pub struct PairRun {
    pub client: Vec<bool>,
    pub cloud: Vec<bool>,
    pub cloud_bytes: u64,
}

/// Runs each circuit in one session over a loopback link.
pub fn run_session(circuits: &[(Circuit, Vec<bool>, Vec<bool>)]) -> Vec<PairRun> {
    let (a, b) = loopback_pair();
    let jobs: Vec<(Circuit, Vec<bool>)> = circuits.iter().map(|(c, g, _)| (c.clone(), g.clone())).collect();
    let garbler = thread::spawn(move || {
        let mut link = Metered::new(a);
        let mut s = GarblerSession::setup(&mut link, [1; 32]).unwrap();
        let mut out = Vec::new();
        for (c, g) in &jobs {
            let before = link.transcript().bytes(prs_wire::Direction::Sent) + link.transcript().bytes(prs_wire::Direction::Received);
            let r = s.run(&mut link, c, g).unwrap();
            let after = link.transcript().bytes(prs_wire::Direction::Sent) + link.transcript().bytes(prs_wire::Direction::Received);
            out.push((r, after - before));
        }
        out
    });
    let mut link = Metered::new(b);
    let mut s = EvaluatorSession::setup(&mut link, [2; 32]).unwrap();
    let client: Vec<Vec<bool>> = circuits.iter().map(|(c, _, e)| s.run(&mut link, c, e).unwrap()).collect();
    let cloud = garbler.join().unwrap();
    client.into_iter().zip(cloud).map(|(client, (cloud, cloud_bytes))| PairRun { client, cloud, cloud_bytes }).collect()
}
