mod common;

use common::run_session;
use prs_mpc::block::Block;
use prs_mpc::garble::{cloud_colors, decode_client, evaluate, garble};
use prs_mpc::ot::{base_receive, BaseSender, ExtReceiver, ExtSender};
use prs_mpc::session::run_bytes;
use prs_mpc::{Builder, Circuit, Disclosure, Gates};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Random circuit over a pool of live wires; roughly half the gates are ANDs.
fn random_circuit(rng: &mut ChaCha20Rng, gates: usize, gin: usize, ein: usize) -> Circuit {
    let mut b = Builder::new(gin, ein);
    let mut pool = b.garbler_inputs();
    pool.extend(b.evaluator_inputs());
    while b.gate_count() < gates {
        let x = pool[rng.gen_range(0..pool.len())];
        let y = pool[rng.gen_range(0..pool.len())];
        let z = match rng.gen_range(0..5) {
            0 | 1 => b.and(x, y),
            2 | 3 => b.xor(x, y),
            _ => b.not(x),
        };
        pool.push(z);
    }
    let tags = [Disclosure::ToClient, Disclosure::ToCloud, Disclosure::ToBoth];
    for _ in 0..32 {
        let w = pool[rng.gen_range(0..pool.len())];
        b.output(&[w], tags[rng.gen_range(0..3)]);
    }
    b.finish()
}

fn split_plain(c: &Circuit, g: &[bool], e: &[bool]) -> (Vec<bool>, Vec<bool>) {
    c.evaluate_split(g, e).unwrap()
}

#[test]
fn hundred_random_circuits_match_plain_evaluation() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for trial in 0..100 {
        let c = random_circuit(&mut rng, 1000, 32, 32);
        c.validate().unwrap();
        assert!(c.gates.len() >= 1000);
        let g: Vec<bool> = (0..32).map(|_| rng.gen()).collect();
        let e: Vec<bool> = (0..32).map(|_| rng.gen()).collect();
        let gb = garble(&c, rng.gen(), trial);
        assert_eq!(gb.tables.len(), c.and_count());
        let pairs = gb.evaluator_pairs(&c);
        let labels: Vec<Block> = pairs.iter().zip(&e).map(|(&(a, b), &bit)| if bit { b } else { a }).collect();
        let gc = gb.for_evaluator(&c, &g).unwrap();
        let out = evaluate(&c, &gc, &labels, trial).unwrap();
        let client = decode_client(&c, &out, &gc.client_decode).unwrap();
        let cloud = gb.decode_cloud(&c, &cloud_colors(&c, &out)).unwrap();
        assert_eq!((client, cloud), split_plain(&c, &g, &e), "trial {trial}");
    }
}

#[test]
fn session_runs_match_plain_and_predicted_bytes() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let jobs: Vec<_> = (0..5)
        .map(|_| {
            let c = random_circuit(&mut rng, 1000, 16, 200);
            let g: Vec<bool> = (0..16).map(|_| rng.gen()).collect();
            let e: Vec<bool> = (0..200).map(|_| rng.gen()).collect();
            (c, g, e)
        })
        .collect();
    let runs = run_session(&jobs);
    for ((c, g, e), r) in jobs.iter().zip(&runs) {
        assert_eq!((r.client.clone(), r.cloud.clone()), split_plain(c, g, e));
        assert_eq!(r.cloud_bytes as usize, run_bytes(c));
    }
}

#[test]
fn wrong_circuit_is_detected() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let c1 = random_circuit(&mut rng, 100, 4, 4);
    let c2 = random_circuit(&mut rng, 100, 4, 4);
    let (a, b) = prs_wire::loopback_pair();
    let t = std::thread::spawn(move || {
        let mut link = prs_wire::Metered::new(a);
        let mut s = prs_mpc::GarblerSession::setup(&mut link, [0; 32]).unwrap();
        let _ = s.run(&mut link, &c1, &[false; 4]);
    });
    let mut link = prs_wire::Metered::new(b);
    let mut s = prs_mpc::EvaluatorSession::setup(&mut link, [0; 32]).unwrap();
    assert!(matches!(s.run(&mut link, &c2, &[false; 4]), Err(prs_mpc::MpcError::CircuitMismatch)));
    drop(link);
    t.join().unwrap();
}

fn ext_pair(rng: &mut ChaCha20Rng) -> (ExtSender, ExtReceiver) {
    let (base, setup) = BaseSender::new(rng);
    let (sender, reply) = ExtSender::from_base(&setup, rng).unwrap();
    (sender, ExtReceiver::from_base(&base, &reply).unwrap())
}

#[test]
fn ot_single_choices() {
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let (mut s, mut r) = ext_pair(&mut rng);
    let pair = (Block(111), Block(222));
    for (choice, want) in [(false, pair.0), (true, pair.1)] {
        let (m, pending) = r.request(&[choice]);
        let payload = s.send(&m, &[pair]).unwrap();
        assert_eq!(r.receive(pending, &payload).unwrap(), vec![want]);
    }
}

#[test]
fn ot_random_choices_match_sender_log() {
    let mut rng = ChaCha20Rng::seed_from_u64(15);
    let (mut s, mut r) = ext_pair(&mut rng);
    for m in [128usize, 300, 1] {
        let log: Vec<(Block, Block)> = (0..m).map(|_| (Block::random(&mut rng), Block::random(&mut rng))).collect();
        let choices: Vec<bool> = (0..m).map(|_| rng.gen()).collect();
        let (matrix, pending) = r.request(&choices);
        let payload = s.send(&matrix, &log).unwrap();
        let got = r.receive(pending, &payload).unwrap();
        for i in 0..m {
            assert_eq!(got[i], if choices[i] { log[i].1 } else { log[i].0 }, "m={m} i={i}");
        }
    }
}

#[test]
fn base_ot_rejects_garbage() {
    let mut rng = ChaCha20Rng::seed_from_u64(16);
    assert!(base_receive(&[0xff; 32], &[true], &mut rng).is_err());
    assert!(base_receive(&[0; 31], &[true], &mut rng).is_err());
}
