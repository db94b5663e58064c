mod common;

use common::run_session;
use prs_mpc::circuit::{bits_to_lanes, bytes_to_bits_msb};
use prs_mpc::kreyvium::{keystream_bits, keystream_lanes};
use prs_mpc::library::{cloud_share, INVALID_ID};
use prs_mpc::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Splits values into (client, cloud) shares with `v = client - cloud`.
fn share(values: &[u16], rng: &mut ChaCha20Rng) -> (Vec<u16>, Vec<u16>) {
    let cloud: Vec<u16> = values.iter().map(|_| rng.gen()).collect();
    let client = values.iter().zip(&cloud).map(|(&v, &s)| v.wrapping_add(s)).collect();
    (client, cloud)
}

fn topk_plain(spec: &TopkSpec, dist: &[u16], ids: &[u16], rng: &mut ChaCha20Rng) -> TopkOutput {
    let (cd, sd) = share(dist, rng);
    let (ci, si) = share(ids, rng);
    let masks: Vec<(u16, u16)> = if spec.mode == TopkMode::Final { vec![] } else { (0..spec.k_out).map(|_| (rng.gen(), rng.gen())).collect() };
    let c = spec.circuit();
    let out = c.evaluate(&spec.cloud_inputs(&sd, &si, &masks).unwrap(), &spec.client_inputs(&cd, &ci).unwrap()).unwrap();
    let mut decoded = spec.decode(&out).unwrap();
    for (w, &(md, mi)) in decoded.shared.iter_mut().zip(&masks) {
        w.distance = w.distance.wrapping_sub(cloud_share(md));
        w.id = w.id.wrapping_sub(cloud_share(mi));
    }
    decoded
}

/// Argsort prefix with lower-index tie-break.
fn argsort_prefix(dist: &[u16], k: usize) -> Vec<u16> {
    let mut idx: Vec<usize> = (0..dist.len()).collect();
    idx.sort_by_key(|&i| (dist[i], i));
    idx[..k].iter().map(|&i| i as u16).collect()
}

#[test]
fn topk_small_examples() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let one = TopkSpec::new(1, 1, TopkMode::Final, CandidateIds::Public).unwrap();
    assert_eq!(topk_plain(&one, &[777], &[], &mut rng).ids, vec![0]);
    let three = TopkSpec::new(3, 2, TopkMode::Final, CandidateIds::Public).unwrap();
    assert_eq!(topk_plain(&three, &[5, 2, 9], &[], &mut rng).ids, vec![1, 0]);
    assert!(TopkSpec::new(3, 4, TopkMode::Final, CandidateIds::Public).is_err());
}

#[test]
fn shared_ids_skip_padding_and_reshare() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let spec = TopkSpec::new(6, 4, TopkMode::Disclose, CandidateIds::Shared).unwrap();
    let dist = [40, 0, 7, 0, 7, 3];
    let ids = [900, INVALID_ID, 12, INVALID_ID, 11, 500];
    let out = topk_plain(&spec, &dist, &ids, &mut rng);
    assert_eq!(out.ids, vec![500, 11, 12, 900]);
    let pairs: Vec<(u16, u16)> = out.shared.iter().map(|w| (w.distance, w.id)).collect();
    assert_eq!(pairs, vec![(3, 500), (7, 11), (7, 12), (40, 900)]);
    // More slots than real candidates: padding fills the tail.
    let spec = TopkSpec::new(3, 3, TopkMode::Final, CandidateIds::Shared).unwrap();
    let out = topk_plain(&spec, &[9, 1, 4], &[5, INVALID_ID, 6], &mut rng);
    assert_eq!(out.ids, vec![6, 5, INVALID_ID]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn topk_matches_argsort(seed in any::<u64>(), n in 1usize..=64, k in 1usize..=10, narrow in any::<bool>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let k = k.min(n);
        let dist: Vec<u16> = (0..n).map(|_| if narrow { rng.gen_range(0..4) } else { rng.gen() }).collect();
        let spec = TopkSpec::new(n, k, TopkMode::Final, CandidateIds::Public).unwrap();
        prop_assert_eq!(topk_plain(&spec, &dist, &[], &mut rng).ids, argsort_prefix(&dist, k));
    }

    #[test]
    fn topk_ignores_common_share_offset(seed in any::<u64>(), n in 2usize..=24, offset in any::<u16>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let dist: Vec<u16> = (0..n).map(|_| rng.gen_range(0..50)).collect();
        let spec = TopkSpec::new(n, 3.min(n), TopkMode::Final, CandidateIds::Public).unwrap();
        let (cd, sd) = share(&dist, &mut rng);
        let c = spec.circuit();
        let eval = |cd: &[u16], sd: &[u16]| c.evaluate(&spec.cloud_inputs(sd, &[], &[]).unwrap(), &spec.client_inputs(cd, &[]).unwrap()).unwrap();
        let shifted = |v: &[u16]| v.iter().map(|x| x.wrapping_add(offset)).collect::<Vec<u16>>();
        prop_assert_eq!(eval(&cd, &sd), eval(&shifted(&cd), &shifted(&sd)));
    }
}

#[test]
fn kreyvium_circuit_matches_software() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let c = kreyvium_circuit(512).unwrap();
    let rounds = 1152 + 512;
    assert!(c.and_count() <= 3 * rounds, "{} ANDs", c.and_count());
    let mut jobs = Vec::new();
    let mut want = Vec::new();
    for _ in 0..10 {
        let key: [u8; 16] = rng.gen();
        let iv: [u8; 16] = rng.gen();
        want.push(keystream_bits(&key, &iv, 512));
        jobs.push((c.clone(), bytes_to_bits_msb(&key), bytes_to_bits_msb(&iv)));
    }
    for (run, w) in run_session(&jobs).into_iter().zip(want) {
        assert_eq!(run.client, w);
    }
}

#[test]
fn unmask_with_zero_stream_returns_masked_data() {
    let mut spec = UnmaskSpec::new(5, [0; 16], [0; 16]).unwrap();
    spec.stream = StreamSource::Zero;
    let data = [1u16, 2, 0xffff, 40000, 7];
    let c = spec.circuit();
    let out = c.evaluate(&spec.cloud_inputs(&[9; 16], &[0; 5]).unwrap(), &spec.client_inputs(&[3; 16], &data).unwrap()).unwrap();
    assert_eq!(bits_to_lanes(&out), data);
}

fn masked_setup(rng: &mut ChaCha20Rng, lanes: usize, iv_key: [u8; 16], iv_data: [u8; 16]) -> ([u8; 16], [u8; 16], Vec<u16>, Vec<u16>) {
    let kp: [u8; 16] = rng.gen();
    let kc: [u8; 16] = rng.gen();
    let pad = prs_mpc::kreyvium::keystream_bytes(&kp, &iv_key, 16);
    let mk: [u8; 16] = std::array::from_fn(|i| kc[i] ^ pad[i]);
    let data: Vec<u16> = (0..lanes).map(|_| rng.gen()).collect();
    let masked = data.iter().zip(keystream_lanes(&kc, &iv_data, lanes)).map(|(v, s)| v ^ s).collect();
    (kp, mk, data, masked)
}

#[test]
fn unmask_reconstructs_and_hides_data_length() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (iv_key, iv_data) = ([1; 16], [2; 16]);
    let spec = UnmaskSpec::new(40, iv_key, iv_data).unwrap();
    let c = spec.circuit();
    let mut jobs = Vec::new();
    let mut expect = Vec::new();
    for _ in 0..2 {
        let (kp, mk, data, masked) = masked_setup(&mut rng, 40, iv_key, iv_data);
        let r: Vec<u16> = (0..40).map(|_| rng.gen()).collect();
        jobs.push((c.clone(), spec.cloud_inputs(&kp, &r).unwrap(), spec.client_inputs(&mk, &masked).unwrap()));
        expect.push((data, r));
    }
    let runs = run_session(&jobs);
    for (run, (data, r)) in runs.iter().zip(&expect) {
        let client = bits_to_lanes(&run.client);
        let rebuilt: Vec<u16> = client.iter().zip(r).map(|(c, r)| c.wrapping_add(*r)).collect();
        assert_eq!(&rebuilt, data);
    }
    assert_eq!(runs[0].cloud_bytes, runs[1].cloud_bytes);
}

#[test]
fn pir_single_cluster_is_plain_kreyvium() {
    let spec = PirSpec::new(1, 200, [5; 16]).unwrap();
    let key = [8u8; 16];
    let c = spec.circuit();
    let out = c.evaluate(&spec.cloud_inputs(&[key]).unwrap(), &spec.client_inputs(0).unwrap()).unwrap();
    assert_eq!(out, keystream_bits(&key, &[5; 16], 200));
    assert!(spec.client_inputs(1).is_err());
}

#[test]
fn pir_unmasks_chosen_cluster_with_constant_traffic() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let (clusters, lanes, iv) = (5usize, 24usize, [6u8; 16]);
    let subkeys: Vec<[u8; 16]> = (0..clusters).map(|_| rng.gen()).collect();
    let truth: Vec<Vec<u16>> = (0..clusters).map(|_| (0..lanes).map(|_| rng.gen()).collect()).collect();
    let masked: Vec<Vec<u16>> =
        truth.iter().zip(&subkeys).map(|(t, k)| t.iter().zip(keystream_lanes(k, &iv, lanes)).map(|(v, s)| v ^ s).collect()).collect();

    let pir = PirSpec::new(clusters, 16 * lanes, iv).unwrap();
    let fused = PirUnmaskSpec::new(clusters, lanes, iv).unwrap();
    let (pc, fc) = (pir.circuit(), fused.circuit());
    let mut jobs = Vec::new();
    let mut masks = Vec::new();
    for j in 0..clusters {
        jobs.push((pc.clone(), pir.cloud_inputs(&subkeys).unwrap(), pir.client_inputs(j).unwrap()));
        let r: Vec<u16> = (0..lanes).map(|_| rng.gen()).collect();
        jobs.push((fc.clone(), fused.cloud_inputs(&subkeys, &r).unwrap(), fused.client_inputs(j, &masked[j]).unwrap()));
        masks.push(r);
    }
    let runs = run_session(&jobs);
    for j in 0..clusters {
        let stream = runs[2 * j].client.chunks(16).map(|c| c.iter().fold(0u16, |a, &b| (a << 1) | b as u16));
        let unmasked: Vec<u16> = masked[j].iter().zip(stream).map(|(m, s)| m ^ s).collect();
        assert_eq!(unmasked, truth[j]);
        let shares = bits_to_lanes(&runs[2 * j + 1].client);
        let rebuilt: Vec<u16> = shares.iter().zip(&masks[j]).map(|(c, r)| c.wrapping_add(*r)).collect();
        assert_eq!(rebuilt, truth[j]);
    }
    assert_eq!(runs[0].cloud_bytes, runs[2 * (clusters - 1)].cloud_bytes);
    assert_eq!(runs[1].cloud_bytes, runs[2 * clusters - 1].cloud_bytes);
}

#[test]
fn library_circuits_garble_like_plain() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut jobs = Vec::new();
    let rand_bits = |n: usize, rng: &mut ChaCha20Rng| (0..n).map(|_| rng.gen()).collect::<Vec<bool>>();
    let mut circuits = vec![
        TopkSpec::new(20, 4, TopkMode::Final, CandidateIds::Public).unwrap().circuit(),
        TopkSpec::new(20, 4, TopkMode::Reshare, CandidateIds::Shared).unwrap().circuit(),
        TopkSpec::new(20, 4, TopkMode::Disclose, CandidateIds::Shared).unwrap().circuit(),
        UnmaskSpec::new(8, [1; 16], [2; 16]).unwrap().circuit(),
        PirSpec::new(3, 64, [3; 16]).unwrap().circuit(),
        PirUnmaskSpec::new(3, 4, [4; 16]).unwrap().circuit(),
        kreyvium_circuit(64).unwrap(),
    ];
    for c in circuits.drain(..) {
        c.validate().unwrap();
        let g = rand_bits(c.garbler_inputs as usize, &mut rng);
        let e = rand_bits(c.evaluator_inputs as usize, &mut rng);
        jobs.push((c, g, e));
    }
    for (run, (c, g, e)) in run_session(&jobs).iter().zip(&jobs) {
        assert_eq!((run.client.clone(), run.cloud.clone()), c.evaluate_split(g, e).unwrap());
    }
}
