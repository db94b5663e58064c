use prs_he::{HeContext, HeParams};
use prs_wire::{MsgType, WireError};

use crate::audit::Observer;
use crate::derive::{sc_lanes, SeedTree};
use crate::error::{ProtocolError, Result};
use crate::messages::{Hello, QueryOptions};
use crate::owner::ClientBundle;
use crate::phase::{Phase, Session};
use crate::pipeline::{client_query, ClientMaterial, QueryPlan};

/// Recommendations returned to the client.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryResult {
    /// Dataset item indices, nearest first.
    pub items: Vec<u32>,
    pub external_ids: Vec<String>,
    pub rm_generation: u64,
    /// Stage winners, only under per-stage disclosure.
    pub disclosed: Vec<u32>,
}

/// The client role: its bundle and query randomness.
pub struct Client {
    bundle: ClientBundle,
    masked_sc: Vec<u16>,
    seeds: SeedTree,
    he: HeContext,
    queries: u64,
}

impl Client {
    pub fn new(bundle: ClientBundle, seeds: SeedTree) -> Result<Self> {
        let masked_sc = sc_lanes(&bundle.layout, &bundle.masked);
        Ok(Self { bundle, masked_sc, seeds, he: HeContext::new(HeParams::default())?, queries: 0 })
    }

    pub fn id(&self) -> u32 {
        self.bundle.client
    }

    pub fn generation(&self) -> u64 {
        self.bundle.generation
    }

    pub fn bundle(&self) -> &ClientBundle {
        &self.bundle
    }

    /// Switches to a newly distributed generation.
    pub fn replace_bundle(&mut self, bundle: ClientBundle) -> Result<()> {
        if bundle.client != self.bundle.client {
            return Err(ProtocolError::Invalid(format!("bundle of client {} given to client {}", bundle.client, self.bundle.client)));
        }
        self.masked_sc = sc_lanes(&bundle.layout, &bundle.masked);
        self.bundle = bundle;
        Ok(())
    }

    pub fn query<S: Session + ?Sized>(
        &mut self,
        link: &mut S,
        query: &[u16],
        options: &QueryOptions,
        obs: &mut dyn Observer,
    ) -> Result<QueryResult> {
        let res = self.run(link, query, options, obs);
        if let Err(e) = &res {
            if !matches!(e, ProtocolError::Wire(WireError::Aborted(_) | WireError::Disconnected | WireError::Io(_))) {
                link.abort(&e.to_string());
            }
        }
        res
    }

    fn run<S: Session + ?Sized>(&mut self, link: &mut S, query: &[u16], options: &QueryOptions, obs: &mut dyn Observer) -> Result<QueryResult> {
        let b = &self.bundle;
        let plan = QueryPlan::new(b.layout, options)?;
        if query.len() != b.layout.k as usize {
            return Err(ProtocolError::Invalid(format!("query has {} coordinates, the model {}", query.len(), b.layout.k)));
        }
        self.queries += 1;
        let mut rng = self.seeds.rng("query", (b.client as u64) << 40 ^ b.generation << 20 ^ self.queries);
        link.enter(Phase::Hello)?;
        link.send(MsgType::Hello, Hello::Query { client: b.client, generation: b.generation, options: *options }.encode())?;
        let material = ClientMaterial { masked_key: &b.masked_key, masked_sc: &self.masked_sc, masked_body: &b.masked };
        let out = client_query(link, &self.he, &plan, b.client, b.generation, material, query, &mut rng, obs)?;
        let lookup = |i: u16| b.catalog.get(i as usize).cloned().unwrap_or_else(|| i.to_string());
        Ok(QueryResult {
            external_ids: out.items.iter().map(|&i| lookup(i)).collect(),
            items: out.items.into_iter().map(u32::from).collect(),
            rm_generation: b.generation,
            disclosed: out.disclosed.into_iter().map(u32::from).collect(),
        })
    }
}
