//! The per-query pipeline, cloud and client side.
//!
//! Both sides derive the same [`QueryPlan`] from the public layout and the
//! query options, so every circuit and message size is fixed before the
//! first frame. Nothing about the query vector or the selected clusters
//! changes the shape of the exchange.

use prs_core::SetsLayout;
use prs_he::{decode_ciphertexts, decrypt_folded, encode_ciphertexts, encrypt_blocks, evaluate_folded, keygen, HeContext, PackingLayout};
use prs_mpc::circuit::bits_to_lanes;
use prs_mpc::library::{cloud_share, INVALID_ID};
use prs_mpc::{CandidateIds, Circuit, EvaluatorSession, GarblerSession, PirUnmaskSpec, SharedWinner, TopkMode, TopkSpec, UnmaskSpec};
use prs_wire::MsgType;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::audit::{Observer, StateView};
use crate::derive::{chunks, iv, IV_CLUSTER, IV_KEY, IV_SC};
use crate::error::{ProtocolError, Result};
use crate::messages::{DisclosureMode, QueryOptions};
use crate::phase::{Phase, Session};

/// Sizes of every stage of one query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryPlan {
    pub layout: SetsLayout,
    pub k_out: usize,
    /// Clusters actually retrieved.
    pub k_cl: usize,
    pub disclosure: DisclosureMode,
    pub stash_k: usize,
    pub member_n: usize,
    pub member_k: usize,
    pub merge_n: usize,
    pub merge_k: usize,
}

impl QueryPlan {
    pub fn new(layout: SetsLayout, options: &QueryOptions) -> Result<Self> {
        if options.k_out == 0 {
            return Err(ProtocolError::Invalid("k_out must be positive".into()));
        }
        let nc = layout.num_clusters as usize;
        let stash = layout.stash_size as usize;
        let k_cl = options.k_cl.min(nc);
        let stash_k = options.k_out.min(stash);
        let member_n = k_cl * layout.capacity as usize;
        let member_k = options.k_out.min(member_n);
        let merge_n = stash_k + member_k;
        if merge_n == 0 {
            return Err(ProtocolError::Invalid("query would search no candidates".into()));
        }
        Ok(Self {
            layout,
            k_out: options.k_out,
            k_cl,
            disclosure: options.disclosure,
            stash_k,
            member_n,
            member_k,
            merge_n,
            merge_k: options.k_out.min(merge_n),
        })
    }

    fn k(&self) -> usize {
        self.layout.k as usize
    }

    fn rec(&self) -> usize {
        self.layout.record_lanes()
    }

    fn num_clusters(&self) -> usize {
        self.layout.num_clusters as usize
    }

    pub fn sc_lanes(&self) -> usize {
        self.layout.centroid_lanes() + self.layout.stash_lanes()
    }

    fn stage_mode(&self) -> TopkMode {
        match self.disclosure {
            DisclosureMode::FinalOnly => TopkMode::Reshare,
            DisclosureMode::PerStage => TopkMode::Disclose,
        }
    }

    pub fn unmask_spec(&self, client: u32, generation: u64, chunk: usize, lanes: usize) -> Result<UnmaskSpec> {
        Ok(UnmaskSpec::new(lanes, iv(IV_KEY, client, generation, 0), iv(IV_SC, client, generation, chunk as u64))?)
    }

    pub fn pir_spec(&self, client: u32, generation: u64, chunk: usize, lanes: usize) -> Result<PirUnmaskSpec> {
        Ok(PirUnmaskSpec::new(self.num_clusters(), lanes, iv(IV_CLUSTER, client, generation, chunk as u64))?)
    }

    pub fn stash_spec(&self) -> Result<TopkSpec> {
        Ok(TopkSpec::new(self.layout.stash_size as usize, self.stash_k, self.stage_mode(), CandidateIds::Shared)?)
    }

    pub fn cluster_spec(&self) -> Result<TopkSpec> {
        Ok(TopkSpec::new(self.num_clusters(), self.k_cl, TopkMode::Final, CandidateIds::Public)?)
    }

    pub fn member_spec(&self) -> Result<TopkSpec> {
        Ok(TopkSpec::new(self.member_n, self.member_k, self.stage_mode(), CandidateIds::Shared)?)
    }

    pub fn merge_spec(&self) -> Result<TopkSpec> {
        Ok(TopkSpec::new(self.merge_n, self.merge_k, TopkMode::Final, CandidateIds::Shared)?)
    }

    pub fn has_stash(&self) -> bool {
        self.stash_k > 0
    }

    pub fn has_clusters(&self) -> bool {
        self.k_cl > 0
    }
}

/// Splits record lanes into id lanes and coordinate vectors.
fn split_records(lanes: &[u16], rec: usize) -> (Vec<u16>, Vec<&[u16]>) {
    lanes.chunks(rec).map(|r| (r[0], &r[1..])).unzip()
}

fn random_lanes(rng: &mut ChaCha20Rng, n: usize) -> Vec<u16> {
    (0..n).map(|_| rng.gen()).collect()
}

fn checkpoint(obs: &mut dyn Observer, phase: Phase, fill: impl FnOnce(&mut StateView)) {
    if obs.enabled() {
        let mut view = StateView::default();
        fill(&mut view);
        obs.checkpoint(phase, view);
    }
}

fn winner_lanes(w: &[SharedWinner]) -> (Vec<u16>, Vec<u16>) {
    w.iter().map(|s| (s.distance, s.id)).unzip()
}

fn flat_winners(w: &[SharedWinner]) -> Vec<u16> {
    w.iter().flat_map(|s| [s.distance, s.id]).collect()
}

/// Secrets the cloud brings to a query.
pub struct CloudKeys<'a> {
    pub primary: &'a [u8; 16],
    pub subkeys: &'a [[u8; 16]],
}

/// Cloud side from the handshake on. The hello has been read and accepted.
#[allow(clippy::too_many_arguments)]
pub fn cloud_query<S: Session + ?Sized>(
    link: &mut S,
    he: &HeContext,
    plan: &QueryPlan,
    client: u32,
    generation: u64,
    keys: CloudKeys,
    rng: &mut ChaCha20Rng,
    obs: &mut dyn Observer,
) -> Result<()> {
    let rec = plan.rec();
    let packing = PackingLayout::folded(he.degree(), plan.k())?;

    link.enter(Phase::Handshake)?;
    link.send(MsgType::Ack, Vec::new())?;
    let mut gc = GarblerSession::setup(link, rng.gen())?;
    checkpoint(obs, Phase::Handshake, |v| {
        v.bytes("primary_key", keys.primary);
        v.bytes("subkeys", keys.subkeys.concat().as_slice());
    });

    link.enter(Phase::Unmask)?;
    let mut sc = Vec::with_capacity(plan.sc_lanes());
    for (c, (_, len)) in chunks(plan.sc_lanes()).enumerate() {
        let spec = plan.unmask_spec(client, generation, c, len)?;
        let masks = random_lanes(rng, len);
        gc.run(link, &spec.circuit(), &spec.cloud_inputs(keys.primary, &masks)?)?;
        sc.extend(masks.into_iter().map(cloud_share));
    }
    checkpoint(obs, Phase::Unmask, |v| {
        v.lanes("sc_shares", &sc);
    });

    let (centroids, stash) = sc.split_at(plan.layout.centroid_lanes());
    let (stash_ids, stash_coords) = split_records(stash, rec);
    link.enter(Phase::He)?;
    let items: Vec<Vec<u16>> = centroids
        .chunks(plan.k())
        .chain(stash_coords.iter().copied())
        .map(|s| s.iter().map(|x| x.wrapping_neg()).collect())
        .collect();
    let distances = cloud_distances(link, he, &packing, &items, rng)?;
    checkpoint(obs, Phase::He, |v| {
        v.lanes("distances", &distances);
    });
    let (centroid_d, stash_d) = distances.split_at(plan.num_clusters());

    let mut winners: Vec<(u16, u16)> = Vec::new();
    if plan.has_stash() {
        link.enter(Phase::GcStash)?;
        let spec = plan.stash_spec()?;
        winners.extend(cloud_topk_reshare(link, &mut gc, &spec, stash_d, &stash_ids, rng)?);
        checkpoint(obs, Phase::GcStash, |v| {
            v.lanes("stash_winners", &winners.iter().flat_map(|&(d, i)| [d, i]).collect::<Vec<_>>());
        });
    }

    if plan.has_clusters() {
        link.enter(Phase::GcCluster)?;
        let spec = plan.cluster_spec()?;
        gc.run(link, &spec.circuit(), &spec.cloud_inputs(centroid_d, &[], &[])?)?;

        link.enter(Phase::Pir)?;
        let mut members = Vec::with_capacity(plan.k_cl * plan.layout.cluster_lanes());
        for _ in 0..plan.k_cl {
            for (c, (_, len)) in chunks(plan.layout.cluster_lanes()).enumerate() {
                let spec = plan.pir_spec(client, generation, c, len)?;
                let masks = random_lanes(rng, len);
                gc.run(link, &spec.circuit(), &spec.cloud_inputs(keys.subkeys, &masks)?)?;
                members.extend(masks.into_iter().map(cloud_share));
            }
        }
        checkpoint(obs, Phase::Pir, |v| {
            v.lanes("member_shares", &members);
        });

        link.enter(Phase::HeMembers)?;
        let (member_ids, member_coords) = split_records(&members, rec);
        let items: Vec<Vec<u16>> = member_coords.iter().map(|s| s.iter().map(|x| x.wrapping_neg()).collect()).collect();
        let member_d = cloud_distances(link, he, &packing, &items, rng)?;
        checkpoint(obs, Phase::HeMembers, |v| {
            v.lanes("member_distances", &member_d);
        });

        link.enter(Phase::GcMembers)?;
        let spec = plan.member_spec()?;
        let member_winners = cloud_topk_reshare(link, &mut gc, &spec, &member_d, &member_ids, rng)?;
        checkpoint(obs, Phase::GcMembers, |v| {
            v.lanes("member_winners", &member_winners.iter().flat_map(|&(d, i)| [d, i]).collect::<Vec<_>>());
        });
        winners.extend(member_winners);
    }

    link.enter(Phase::Merge)?;
    let spec = plan.merge_spec()?;
    let (d, ids): (Vec<u16>, Vec<u16>) = winners.into_iter().unzip();
    gc.run(link, &spec.circuit(), &spec.cloud_inputs(&d, &ids, &[])?)?;
    checkpoint(obs, Phase::Merge, |_| {});
    Ok(())
}

fn cloud_distances<S: Session + ?Sized>(
    link: &mut S,
    he: &HeContext,
    packing: &PackingLayout,
    items: &[Vec<u16>],
    rng: &mut ChaCha20Rng,
) -> Result<Vec<u16>> {
    let cts = decode_ciphertexts(he, &link.recv(MsgType::HeQuery)?)?;
    let refs: Vec<&[u16]> = items.iter().map(Vec::as_slice).collect();
    let batch = evaluate_folded(he, packing, &cts, &refs, rng.gen())?;
    link.send(MsgType::HeResult, encode_ciphertexts(he, &batch.ciphertexts))?;
    Ok(batch.cloud_share)
}

/// Runs a resharing top-k; returns the cloud's shares of the winners.
fn cloud_topk_reshare<S: Session + ?Sized>(
    link: &mut S,
    gc: &mut GarblerSession,
    spec: &TopkSpec,
    distances: &[u16],
    ids: &[u16],
    rng: &mut ChaCha20Rng,
) -> Result<Vec<(u16, u16)>> {
    let masks: Vec<(u16, u16)> = (0..spec.k_out).map(|_| (rng.gen(), rng.gen())).collect();
    gc.run(link, &spec.circuit(), &spec.cloud_inputs(distances, ids, &masks)?)?;
    Ok(masks.into_iter().map(|(d, i)| (cloud_share(d), cloud_share(i))).collect())
}

/// What the client learns from one query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientOutcome {
    /// Final item lanes, best first, padding removed.
    pub items: Vec<u16>,
    /// Stage winners disclosed under [`DisclosureMode::PerStage`].
    pub disclosed: Vec<u16>,
}

/// Client-side inputs of a query.
pub struct ClientMaterial<'a> {
    pub masked_key: &'a [u8; 16],
    /// Masked centroid lanes followed by masked stash lanes.
    pub masked_sc: &'a [u16],
    /// The whole masked body, for cluster retrieval.
    pub masked_body: &'a [u16],
}

/// Client side from the handshake on, mirroring [`cloud_query`].
#[allow(clippy::too_many_arguments)]
pub fn client_query<S: Session + ?Sized>(
    link: &mut S,
    he: &HeContext,
    plan: &QueryPlan,
    client: u32,
    generation: u64,
    material: ClientMaterial,
    query: &[u16],
    rng: &mut ChaCha20Rng,
    obs: &mut dyn Observer,
) -> Result<ClientOutcome> {
    if query.len() != plan.k() {
        return Err(ProtocolError::Invalid(format!("query has {} coordinates, the model {}", query.len(), plan.k())));
    }
    let rec = plan.rec();
    let packing = PackingLayout::folded(he.degree(), plan.k())?;
    let mut disclosed = Vec::new();

    link.enter(Phase::Handshake)?;
    link.recv(MsgType::Ack)?;
    let mut gc = EvaluatorSession::setup(link, rng.gen())?;
    checkpoint(obs, Phase::Handshake, |v| {
        v.bytes("masked_key", material.masked_key);
        v.lanes("masked_sc", material.masked_sc);
    });

    link.enter(Phase::Unmask)?;
    let mut sc = Vec::with_capacity(plan.sc_lanes());
    for (c, (start, len)) in chunks(plan.sc_lanes()).enumerate() {
        let spec = plan.unmask_spec(client, generation, c, len)?;
        let out = gc.run(link, &spec.circuit(), &spec.client_inputs(material.masked_key, &material.masked_sc[start..start + len])?)?;
        sc.extend(bits_to_lanes(&out));
    }
    checkpoint(obs, Phase::Unmask, |v| {
        v.lanes("sc_shares", &sc);
    });

    let (centroids, stash) = sc.split_at(plan.layout.centroid_lanes());
    let (stash_ids, stash_coords) = split_records(stash, rec);
    link.enter(Phase::He)?;
    let a: Vec<Vec<u16>> = centroids
        .chunks(plan.k())
        .chain(stash_coords.iter().copied())
        .map(|c| query.iter().zip(c).map(|(q, c)| q.wrapping_sub(*c)).collect())
        .collect();
    let distances = client_distances(link, he, &packing, &a, rng)?;
    checkpoint(obs, Phase::He, |v| {
        v.lanes("distances", &distances);
    });
    let (centroid_d, stash_d) = distances.split_at(plan.num_clusters());

    let mut winners: Vec<SharedWinner> = Vec::new();
    if plan.has_stash() {
        link.enter(Phase::GcStash)?;
        let spec = plan.stash_spec()?;
        let out = spec.decode(&gc.run(link, &spec.circuit(), &spec.client_inputs(stash_d, &stash_ids)?)?)?;
        disclosed.extend(out.ids);
        winners.extend(&out.shared);
        checkpoint(obs, Phase::GcStash, |v| {
            v.lanes("stash_winners", &flat_winners(&out.shared));
        });
    }

    if plan.has_clusters() {
        link.enter(Phase::GcCluster)?;
        let spec = plan.cluster_spec()?;
        let selected = spec.decode(&gc.run(link, &spec.circuit(), &spec.client_inputs(centroid_d, &[])?)?)?.ids;
        checkpoint(obs, Phase::GcCluster, |v| {
            v.lanes("clusters", &selected);
        });

        link.enter(Phase::Pir)?;
        let mut members = Vec::with_capacity(plan.member_n * rec);
        for &j in &selected {
            let j = j as usize;
            if j >= plan.num_clusters() {
                return Err(ProtocolError::Malformed(format!("selected cluster {j} of {}", plan.num_clusters())));
            }
            let off = plan.layout.cluster_offset(j);
            let lanes = &material.masked_body[off..off + plan.layout.cluster_lanes()];
            for (c, (start, len)) in chunks(plan.layout.cluster_lanes()).enumerate() {
                let spec = plan.pir_spec(client, generation, c, len)?;
                let out = gc.run(link, &spec.circuit(), &spec.client_inputs(j, &lanes[start..start + len])?)?;
                members.extend(bits_to_lanes(&out));
            }
        }
        checkpoint(obs, Phase::Pir, |v| {
            v.lanes("member_shares", &members);
        });

        link.enter(Phase::HeMembers)?;
        let (member_ids, member_coords) = split_records(&members, rec);
        let a: Vec<Vec<u16>> = member_coords.iter().map(|c| query.iter().zip(*c).map(|(q, c)| q.wrapping_sub(*c)).collect()).collect();
        let member_d = client_distances(link, he, &packing, &a, rng)?;
        checkpoint(obs, Phase::HeMembers, |v| {
            v.lanes("member_distances", &member_d);
        });

        link.enter(Phase::GcMembers)?;
        let spec = plan.member_spec()?;
        let out = spec.decode(&gc.run(link, &spec.circuit(), &spec.client_inputs(&member_d, &member_ids)?)?)?;
        disclosed.extend(out.ids);
        checkpoint(obs, Phase::GcMembers, |v| {
            v.lanes("member_winners", &flat_winners(&out.shared));
        });
        winners.extend(out.shared);
    }

    link.enter(Phase::Merge)?;
    let spec = plan.merge_spec()?;
    let (d, ids) = winner_lanes(&winners);
    let out = spec.decode(&gc.run(link, &spec.circuit(), &spec.client_inputs(&d, &ids)?)?)?;
    let items: Vec<u16> = out.ids.into_iter().filter(|&i| i != INVALID_ID).collect();
    disclosed.retain(|&i| i != INVALID_ID);
    checkpoint(obs, Phase::Merge, |v| {
        v.lanes("result", &items);
    });
    Ok(ClientOutcome { items, disclosed })
}

fn client_distances<S: Session + ?Sized>(
    link: &mut S,
    he: &HeContext,
    packing: &PackingLayout,
    a: &[Vec<u16>],
    rng: &mut ChaCha20Rng,
) -> Result<Vec<u16>> {
    let (sk, _) = keygen(he, rng.gen());
    let refs: Vec<&[u16]> = a.iter().map(Vec::as_slice).collect();
    let cts = encrypt_blocks(he, &sk, &refs, packing, rng)?;
    link.send(MsgType::HeQuery, encode_ciphertexts(he, &cts))?;
    let reply = decode_ciphertexts(he, &link.recv(MsgType::HeResult)?)?;
    Ok(decrypt_folded(he, &sk, &reply, packing, &refs)?)
}

/// Every circuit of a plan in run order, as both sides build them. Used to
/// predict transcript sizes.
pub fn plan_circuits(plan: &QueryPlan, client: u32, generation: u64) -> Result<Vec<(Phase, Circuit)>> {
    let mut out = Vec::new();
    for (c, (_, len)) in chunks(plan.sc_lanes()).enumerate() {
        out.push((Phase::Unmask, plan.unmask_spec(client, generation, c, len)?.circuit()));
    }
    if plan.has_stash() {
        out.push((Phase::GcStash, plan.stash_spec()?.circuit()));
    }
    if plan.has_clusters() {
        out.push((Phase::GcCluster, plan.cluster_spec()?.circuit()));
        for _ in 0..plan.k_cl {
            for (c, (_, len)) in chunks(plan.layout.cluster_lanes()).enumerate() {
                out.push((Phase::Pir, plan.pir_spec(client, generation, c, len)?.circuit()));
            }
        }
        out.push((Phase::GcMembers, plan.member_spec()?.circuit()));
    }
    out.push((Phase::Merge, plan.merge_spec()?.circuit()));
    Ok(out)
}
