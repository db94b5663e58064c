//! Checks the keystream engines against the bit-level oracle.

use prs_mpc::circuit::{bits_to_bytes_msb, bytes_to_bits_msb};
use prs_mpc::kreyvium::{keystream_bits, keystream_bytes, keystream_lanes, kreyvium_bits};
use prs_mpc::Plain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[path = "oracle/kreyvium.rs"]
mod oracle;

use oracle::oracle_stream;

#[test]
fn software_engine_matches_bit_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut cases = vec![([0u8; 16], [0u8; 16]), ([0xff; 16], [0xff; 16])];
    for _ in 0..20 {
        cases.push((rng.gen(), rng.gen()));
    }
    for (key, iv) in cases {
        let want = oracle_stream(&key, &iv, 1000);
        assert_eq!(keystream_bits(&key, &iv, 1000), want);
        assert_eq!(keystream_bytes(&key, &iv, 125), bits_to_bytes_msb(&want));
    }
}

#[test]
fn lanes_read_stream_big_endian() {
    let key = [3u8; 16];
    let iv = [4u8; 16];
    let bits = oracle_stream(&key, &iv, 64);
    let lanes = keystream_lanes(&key, &iv, 4);
    for (i, lane) in lanes.iter().enumerate() {
        for j in 0..16 {
            assert_eq!((lane >> j) & 1 == 1, bits[16 * i + 15 - j]);
        }
    }
}

#[test]
fn gadget_version_matches_bit_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for _ in 0..3 {
        let key: [u8; 16] = rng.gen();
        let iv: [u8; 16] = rng.gen();
        let got = kreyvium_bits(&mut Plain, &bytes_to_bits_msb(&key), &bytes_to_bits_msb(&iv), 300);
        assert_eq!(got, oracle_stream(&key, &iv, 300));
    }
}

#[test]
fn deterministic_and_iv_sensitive() {
    let key = [42u8; 16];
    let a = keystream_bits(&key, &[0; 16], 512);
    assert_eq!(a, keystream_bits(&key, &[0; 16], 512));
    let mut iv = [0u8; 16];
    iv[15] = 1;
    assert_ne!(a, keystream_bits(&key, &iv, 512));
}
