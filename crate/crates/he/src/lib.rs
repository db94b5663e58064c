//! Leveled BFV over `Z_q[x] / (x^d + 1)` with RNS limbs, restricted to what
//! a masked squared-distance computation needs: encryption under a secret
//! or public key, additions, plaintext multiplication, noise flooding and
//! coefficient packing of vectors.

pub mod arith;
pub mod bfv;
pub mod error;
pub mod kernel;
pub mod layout;
pub mod ntt;
pub mod params;
pub mod wire;

pub use bfv::{add, add_plain, decrypt, encrypt_pk, encrypt_sk, keygen, mul_plain, noise_budget, sub, Ciphertext, PlainPoly, PublicKey, SecretKey};
pub use error::{HeError, Result};
pub use kernel::{
    decrypt_folded, decrypt_shared, decrypt_shares, distance_kernel, encrypt_blocks, encrypt_query, evaluate_folded, evaluate_shared,
    DistanceShares, MaskedBatch,
};
pub use layout::{encode_blocks, encode_items, encode_query, squared_distance, Packing, PackingLayout};
pub use params::{HeContext, HeParams};
pub use wire::{decode_ciphertexts, encode_ciphertexts, encoded_len};
