use std::collections::BTreeMap;

use prs_core::{
    apply_feedback, build_rm, prepare_sets, ItemVector, ModelConfig, PartitionConfig, PreparedSets, RatingDataset,
    RecommendationModel, SetsLayout, VulnerabilityPolicy,
};
use prs_wire::MsgType;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::derive::SeedTree;
use crate::error::{ProtocolError, Result};
use crate::messages::{bytes_to_lanes, decode_layout, encode_layout, Feedback, Hello, Reader, LAYOUT_LEN};
use crate::phase::{Phase, Session};

const BUNDLE_MAGIC: &[u8; 4] = b"PRSB";
const BUNDLE_VERSION: u16 = 1;

/// Everything the data owner hands a client: its masked sets, the masked
/// key relayed from the cloud and a checksum binding the plaintext.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientBundle {
    pub client: u32,
    pub generation: u64,
    pub layout: SetsLayout,
    /// Body lanes XORed with the cloud's keystream.
    pub masked: Vec<u16>,
    /// `k_c ^ Kreyvium(k_p, iv_key)`.
    pub masked_key: [u8; 16],
    pub nonce: [u8; 16],
    pub checksum: [u8; 32],
    /// External item ids, indexed by item lane.
    pub catalog: Vec<String>,
}

pub fn body_checksum(nonce: &[u8; 16], lanes: &[u16]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(nonce);
    for l in lanes {
        h.update(l.to_le_bytes());
    }
    h.finalize().into()
}

impl ClientBundle {
    pub fn cluster(&self, j: usize) -> &[u16] {
        let off = self.layout.cluster_offset(j);
        &self.masked[off..off + self.layout.cluster_lanes()]
    }

    /// Whether `lanes` is the plaintext body this bundle was made from.
    pub fn checksum_matches(&self, lanes: &[u16]) -> bool {
        body_checksum(&self.nonce, lanes) == self.checksum
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(128 + 2 * self.masked.len());
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.client.to_le_bytes());
        out.extend_from_slice(&self.generation.to_le_bytes());
        encode_layout(&self.layout, &mut out);
        out.extend_from_slice(&self.masked_key);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.checksum);
        out.extend_from_slice(&(self.catalog.len() as u32).to_le_bytes());
        for id in &self.catalog {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
        for l in &self.masked {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "client bundle");
        if r.take(4)? != BUNDLE_MAGIC {
            return Err(ProtocolError::Malformed("not a client bundle".into()));
        }
        let version = r.u16()?;
        if version != BUNDLE_VERSION {
            return Err(ProtocolError::Malformed(format!("bundle version {version}")));
        }
        let client = r.u32()?;
        let generation = r.u64()?;
        let layout = decode_layout(&mut r)?;
        let masked_key = r.array()?;
        let nonce = r.array()?;
        let checksum = r.array()?;
        let n = r.u32()? as usize;
        let mut catalog = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let len = r.u16()? as usize;
            let id = std::str::from_utf8(r.take(len)?).map_err(|_| ProtocolError::Malformed("catalog id is not utf-8".into()))?;
            catalog.push(id.to_string());
        }
        let masked = r.lanes(layout.body_lanes())?;
        r.finish()?;
        Ok(Self { client, generation, layout, masked, masked_key, nonce, checksum, catalog })
    }
}

/// One client's model as held by the data owner.
#[derive(Clone, Debug)]
pub struct OwnedModel {
    /// Absent for models installed from raw vectors.
    pub rm: Option<RecommendationModel>,
    pub sets: PreparedSets,
}

/// Holds the rating dataset and builds, partitions and distributes
/// per-client models.
pub struct DataOwner {
    dataset: Option<RatingDataset>,
    model: ModelConfig<f64>,
    policy: VulnerabilityPolicy,
    partition: PartitionConfig,
    seeds: SeedTree,
    clients: BTreeMap<u32, OwnedModel>,
}

impl DataOwner {
    pub fn new(dataset: RatingDataset, model: ModelConfig<f64>, partition: PartitionConfig, seeds: SeedTree) -> Self {
        Self { dataset: Some(dataset), model, policy: VulnerabilityPolicy::unlimited(), partition, seeds, clients: BTreeMap::new() }
    }

    /// An owner serving prebuilt models only; feedback is unavailable.
    pub fn without_dataset(partition: PartitionConfig, seeds: SeedTree) -> Self {
        Self {
            dataset: None,
            model: ModelConfig::new(3),
            policy: VulnerabilityPolicy::unlimited(),
            partition,
            seeds,
            clients: BTreeMap::new(),
        }
    }

    pub fn with_policy(mut self, policy: VulnerabilityPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn dataset(&self) -> Option<&RatingDataset> {
        self.dataset.as_ref()
    }

    pub fn model(&self, client: u32) -> Option<&OwnedModel> {
        self.clients.get(&client)
    }

    /// Builds and partitions the model of dataset user `client`.
    pub fn prepare(&mut self, client: u32) -> Result<&PreparedSets> {
        let ds = self.dataset.as_ref().ok_or_else(|| ProtocolError::Invalid("no dataset loaded".into()))?;
        let rm = build_rm(ds, client, &self.model, &self.policy)?;
        self.install_model(client, rm)
    }

    pub fn install_model(&mut self, client: u32, rm: RecommendationModel) -> Result<&PreparedSets> {
        let sets = prepare_sets::<f64>(&rm.item_vectors(), &self.partition, rm.generation)?;
        self.clients.insert(client, OwnedModel { rm: Some(rm), sets });
        Ok(&self.clients[&client].sets)
    }

    /// Installs arbitrary item vectors, e.g. full rating columns for a
    /// baseline without model reduction.
    pub fn install_vectors(&mut self, client: u32, vectors: &[ItemVector], generation: u64) -> Result<&PreparedSets> {
        let sets = prepare_sets::<f64>(vectors, &self.partition, generation)?;
        self.clients.insert(client, OwnedModel { rm: None, sets });
        Ok(&self.clients[&client].sets)
    }

    /// Installs an already partitioned model.
    pub fn install_sets(&mut self, client: u32, sets: PreparedSets) {
        self.clients.insert(client, OwnedModel { rm: None, sets });
    }

    fn catalog(&self, sets: &PreparedSets) -> Vec<String> {
        let top = sets.real_items().last().map_or(0, |&i| i as usize + 1);
        match &self.dataset {
            Some(ds) => (0..top as u32).map(|i| ds.items().id_of(i).map_or_else(|| i.to_string(), str::to_string)).collect(),
            None => (0..top).map(|i| i.to_string()).collect(),
        }
    }

    /// Data owner's side of distribution: sends the layout, receives the
    /// keystream and masked key from the cloud, returns the client's bundle.
    pub fn distribute<S: Session + ?Sized>(&mut self, link: &mut S, client: u32) -> Result<ClientBundle> {
        let owned = self.clients.get(&client).ok_or(ProtocolError::UnknownClient(client))?;
        let sets = &owned.sets;
        let generation = sets.rm_generation;
        link.enter(Phase::Hello)?;
        link.send(MsgType::Hello, Hello::Setup { client, generation }.encode())?;
        link.enter(Phase::Setup)?;
        let mut layout_bytes = Vec::with_capacity(LAYOUT_LEN);
        encode_layout(&sets.layout, &mut layout_bytes);
        link.send(MsgType::Layout, layout_bytes)?;
        let stream = bytes_to_lanes(&link.recv(MsgType::Keystream)?)?;
        let body = sets.body_lanes();
        if stream.len() != body.len() {
            return Err(ProtocolError::Malformed(format!("{} keystream lanes for a {}-lane body", stream.len(), body.len())));
        }
        let masked_key: [u8; 16] = link
            .recv(MsgType::MaskedKey)?
            .try_into()
            .map_err(|_| ProtocolError::Malformed("masked key must be 16 bytes".into()))?;
        let masked = body.iter().zip(&stream).map(|(v, s)| v ^ s).collect();
        let nonce: [u8; 16] = self.seeds.rng("bundle-nonce", (client as u64) << 32 ^ generation).gen();
        Ok(ClientBundle {
            client,
            generation,
            layout: sets.layout,
            masked,
            masked_key,
            nonce,
            checksum: body_checksum(&nonce, &body),
            catalog: self.catalog(sets),
        })
    }

    /// Records the rating, rebuilds the client's model and partitions it as
    /// the next generation. Returns that generation.
    pub fn apply_feedback(&mut self, fb: &Feedback) -> Result<u64> {
        let ds = self.dataset.as_ref().ok_or_else(|| ProtocolError::Invalid("feedback needs the rating dataset".into()))?;
        let owned = self.clients.get(&fb.client).ok_or(ProtocolError::UnknownClient(fb.client))?;
        let rm = owned.rm.as_ref().ok_or_else(|| ProtocolError::Invalid("model was not built from the dataset".into()))?;
        if rm.generation != fb.generation {
            return Err(ProtocolError::Generation { client: fb.client, current: rm.generation, got: fb.generation });
        }
        if rm.entry(fb.item).is_none() {
            return Err(ProtocolError::UnknownItem(fb.item));
        }
        let (ds, rm) = apply_feedback(ds, rm, fb.item, fb.rating, &self.model, &self.policy)?;
        let generation = rm.generation;
        self.dataset = Some(ds);
        self.install_model(fb.client, rm)?;
        Ok(generation)
    }

    /// Data owner's side of a feedback exchange with a client.
    pub fn serve_feedback<S: Session + ?Sized>(&mut self, link: &mut S) -> Result<(Feedback, u64)> {
        link.enter(Phase::Feedback)?;
        let fb = Feedback::decode(&link.recv(MsgType::Feedback)?)?;
        match self.apply_feedback(&fb) {
            Ok(generation) => {
                link.send(MsgType::Ack, generation.to_le_bytes().to_vec())?;
                Ok((fb, generation))
            }
            Err(e) => {
                link.abort(&e.to_string());
                Err(e)
            }
        }
    }
}

/// Client's side of a feedback exchange; returns the new generation.
pub fn send_feedback<S: Session + ?Sized>(link: &mut S, fb: &Feedback) -> Result<u64> {
    link.enter(Phase::Feedback)?;
    link.send(MsgType::Feedback, fb.encode())?;
    let ack = link.recv(MsgType::Ack)?;
    let mut r = Reader::new(&ack, "feedback ack");
    let generation = r.u64()?;
    r.finish()?;
    Ok(generation)
}
