use prs_core::SetsLayout;
use prs_protocol::derive::{body_stream, chunks, sc_lanes};
use prs_protocol::{ClientBundle, DisclosureMode, Feedback, Hello, QueryOptions};
use proptest::prelude::*;

fn layout() -> impl Strategy<Value = SetsLayout> {
    (1u16..5, 1u32..40, 0u32..6, 0u32..30)
        .prop_filter("non-empty", |(_, _, n, s)| n + s > 0)
        .prop_map(|(k, capacity, num_clusters, stash_size)| SetsLayout { k, capacity, num_clusters, stash_size })
}

fn hello() -> impl Strategy<Value = Hello> {
    prop_oneof![
        (any::<u32>(), any::<u64>()).prop_map(|(client, generation)| Hello::Setup { client, generation }),
        (any::<u32>(), any::<u64>(), 1usize..=u16::MAX as usize, 0usize..=u16::MAX as usize, any::<bool>()).prop_map(
            |(client, generation, k_out, k_cl, per_stage)| Hello::Query {
                client,
                generation,
                options: QueryOptions {
                    k_out,
                    k_cl,
                    disclosure: if per_stage { DisclosureMode::PerStage } else { DisclosureMode::FinalOnly },
                },
            }
        ),
    ]
}

proptest! {
    #[test]
    fn hello_round_trips_and_rejects_truncation(h in hello(), cut in 1usize..8) {
        let bytes = h.encode();
        prop_assert_eq!(Hello::decode(&bytes).unwrap(), h);
        prop_assert!(Hello::decode(&bytes[..bytes.len().saturating_sub(cut)]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        prop_assert!(Hello::decode(&longer).is_err());
    }

    #[test]
    fn feedback_round_trips(client: u32, generation: u64, item: u32, rating: u16) {
        let fb = Feedback { client, generation, item, rating };
        prop_assert_eq!(Feedback::decode(&fb.encode()).unwrap(), fb);
    }

    #[test]
    fn chunks_tile_the_region(lanes in 0usize..10_000) {
        let mut next = 0;
        for (start, len) in chunks(lanes) {
            prop_assert_eq!(start, next);
            prop_assert!(len > 0 && len <= prs_protocol::CHUNK_LANES);
            next += len;
        }
        prop_assert_eq!(next, lanes);
    }

    #[test]
    fn body_stream_covers_the_body_and_masks_reversibly(l in layout(), key: [u8; 16], seed: u64) {
        let subkeys: Vec<[u8; 16]> = (0..l.num_clusters as u64).map(|j| {
            let mut k = key;
            k[..8].copy_from_slice(&(seed ^ j).to_le_bytes());
            k
        }).collect();
        let stream = body_stream(&l, &key, &subkeys, 3, 1);
        prop_assert_eq!(stream.len(), l.body_lanes());
        let body: Vec<u16> = (0..l.body_lanes()).map(|i| (i as u64 * 2_654_435_761 ^ seed) as u16).collect();
        let masked: Vec<u16> = body.iter().zip(&stream).map(|(b, s)| b ^ s).collect();
        let unmasked: Vec<u16> = masked.iter().zip(&stream).map(|(m, s)| m ^ s).collect();
        prop_assert_eq!(&unmasked, &body);
        prop_assert_eq!(sc_lanes(&l, &body).len(), l.centroid_lanes() + l.stash_lanes());
    }

    #[test]
    fn bundles_round_trip(l in layout(), client: u32, generation: u64, key: [u8; 16], ids in prop::collection::vec("[a-z0-9]{0,6}", 0..20)) {
        let b = ClientBundle {
            client,
            generation,
            layout: l,
            masked: (0..l.body_lanes()).map(|i| i as u16).collect(),
            masked_key: key,
            nonce: [9; 16],
            checksum: [4; 32],
            catalog: ids,
        };
        let bytes = b.encode();
        prop_assert_eq!(ClientBundle::decode(&bytes).unwrap(), b);
        prop_assert!(ClientBundle::decode(&bytes[..bytes.len() - 1]).is_err());
    }
}
