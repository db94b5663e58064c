use std::collections::HashMap;
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use prs_core::SetsLayout;
use prs_he::{HeContext, HeParams};
use prs_wire::{Metered, MsgType, TcpChannel, WireError};
use rand::Rng;

use crate::audit::{NoAudit, Observer, StateView, PUBLIC_PREFIX};
use crate::derive::{body_stream, cluster_subkeys, key_pad, SeedTree};
use crate::error::{ProtocolError, Result};
use crate::messages::{decode_layout, lanes_to_bytes, Hello, Reader};
use crate::phase::{Phase, Session};
use crate::pipeline::{cloud_query, CloudKeys, QueryPlan};

/// What the cloud keeps per client: public shape only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Registration {
    pub layout: SetsLayout,
    pub generation: u64,
    /// Queries served for this generation.
    pub queries: u64,
}

/// Outcome of one served session.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Served {
    Setup { client: u32, generation: u64 },
    Query { client: u32, generation: u64 },
}

/// The cloud role. Holds the primary key and one registration per client;
/// serves any number of sessions concurrently.
pub struct Cloud {
    primary: [u8; 16],
    seeds: SeedTree,
    he: HeContext,
    registry: Mutex<HashMap<u32, Registration>>,
}

fn session_index(client: u32, generation: u64, n: u64) -> u64 {
    (client as u64) << 40 ^ generation << 20 ^ n
}

impl Cloud {
    pub fn new(seeds: SeedTree) -> Result<Self> {
        let primary = seeds.seed("primary-key", 0)[..16].try_into().unwrap();
        Ok(Self { primary, seeds, he: HeContext::new(HeParams::default())?, registry: Mutex::new(HashMap::new()) })
    }

    pub fn registration(&self, client: u32) -> Option<Registration> {
        self.registry.lock().unwrap().get(&client).copied()
    }

    /// The cloud's persistent state as bytes.
    pub fn state_view(&self) -> StateView {
        let mut v = StateView::default();
        v.bytes("primary_key", &self.primary);
        let registry = self.registry.lock().unwrap();
        let mut clients: Vec<_> = registry.iter().collect();
        clients.sort_by_key(|(c, _)| **c);
        for (c, r) in clients {
            let mut meta = Vec::new();
            crate::messages::encode_layout(&r.layout, &mut meta);
            meta.extend_from_slice(&r.generation.to_le_bytes());
            v.bytes(format!("{PUBLIC_PREFIX}registration/{c}"), &meta);
        }
        v
    }

    /// Serves one session: reads the hello and runs setup or a query. Any
    /// failure is reported to the peer with an abort frame.
    pub fn serve<S: Session + ?Sized>(&self, link: &mut S, obs: &mut dyn Observer) -> Result<Served> {
        let res = self.dispatch(link, obs);
        if let Err(e) = &res {
            if !matches!(e, ProtocolError::Wire(WireError::Aborted(_) | WireError::Disconnected | WireError::Io(_))) {
                link.abort(&e.to_string());
            }
        }
        res
    }

    fn dispatch<S: Session + ?Sized>(&self, link: &mut S, obs: &mut dyn Observer) -> Result<Served> {
        link.enter(Phase::Hello)?;
        match Hello::decode(&link.recv(MsgType::Hello)?)? {
            Hello::Setup { client, generation } => self.setup(link, client, generation, obs),
            Hello::Query { client, generation, options } => {
                let (reg, n) = {
                    let mut registry = self.registry.lock().unwrap();
                    let reg = registry.get_mut(&client).ok_or(ProtocolError::UnknownClient(client))?;
                    if reg.generation != generation {
                        return Err(ProtocolError::Generation { client, current: reg.generation, got: generation });
                    }
                    reg.queries += 1;
                    (*reg, reg.queries)
                };
                let plan = QueryPlan::new(reg.layout, &options)?;
                let subkeys = cluster_subkeys(&self.primary, client, generation, reg.layout.num_clusters as usize);
                let mut rng = self.seeds.rng("query", session_index(client, generation, n));
                let keys = CloudKeys { primary: &self.primary, subkeys: &subkeys };
                cloud_query(link, &self.he, &plan, client, generation, keys, &mut rng, obs)?;
                Ok(Served::Query { client, generation })
            }
        }
    }

    fn setup<S: Session + ?Sized>(&self, link: &mut S, client: u32, generation: u64, obs: &mut dyn Observer) -> Result<Served> {
        link.enter(Phase::Setup)?;
        let bytes = link.recv(MsgType::Layout)?;
        let mut r = Reader::new(&bytes, "layout");
        let layout = decode_layout(&mut r)?;
        r.finish()?;
        // Holding the lock across the exchange serializes setups of one
        // client with its queries' registration lookups.
        let mut registry = self.registry.lock().unwrap();
        if let Some(reg) = registry.get(&client) {
            if reg.generation == generation {
                return Err(ProtocolError::DuplicateSetup { client, generation });
            }
            if reg.generation > generation {
                return Err(ProtocolError::Generation { client, current: reg.generation, got: generation });
            }
        }
        let subkeys = cluster_subkeys(&self.primary, client, generation, layout.num_clusters as usize);
        let mut client_key: [u8; 16] = self.seeds.rng("client-key", session_index(client, generation, 0)).gen();
        link.send(MsgType::Keystream, lanes_to_bytes(&body_stream(&layout, &client_key, &subkeys, client, generation)))?;
        let pad = key_pad(&self.primary, client, generation);
        let masked_key: Vec<u8> = client_key.iter().zip(&pad).map(|(k, p)| k ^ p).collect();
        client_key.fill(0);
        link.send(MsgType::MaskedKey, masked_key)?;
        registry.insert(client, Registration { layout, generation, queries: 0 });
        drop(registry);
        if obs.enabled() {
            obs.checkpoint(Phase::Setup, self.state_view());
        }
        Ok(Served::Setup { client, generation })
    }

    /// Accepts TCP connections forever, one thread per session.
    pub fn serve_tcp(self: Arc<Self>, listener: TcpListener, mut on_session: impl FnMut(Result<Served>) + Send + 'static) -> Result<()> {
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            for r in rx {
                on_session(r);
            }
        });
        for stream in listener.incoming() {
            let stream = stream.map_err(WireError::Io)?;
            let cloud = Arc::clone(&self);
            let tx = tx.clone();
            std::thread::spawn(move || {
                let res = TcpChannel::new(stream).map_err(ProtocolError::from).and_then(|ch| {
                    let mut link = Metered::new(ch);
                    cloud.serve(&mut link, &mut NoAudit)
                });
                let _ = tx.send(res);
            });
        }
        Ok(())
    }
}
