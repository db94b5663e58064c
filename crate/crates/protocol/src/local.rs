//! In-process runs of whole sessions over loopback channels, one thread
//! per role.

use prs_wire::{loopback_pair, Channel, Counters, MeterReport, Metered, Transcript};

use crate::audit::{NoAudit, Observer, StateLog};
use crate::client::{Client, QueryResult};
use crate::cloud::Cloud;
use crate::error::{ProtocolError, Result};
use crate::messages::{Feedback, QueryOptions};
use crate::owner::{send_feedback, ClientBundle, DataOwner};

/// One endpoint's view of a finished session.
#[derive(Clone)]
pub struct SessionRecord {
    pub report: MeterReport,
    pub transcript: Transcript,
    pub counters: Counters,
}

impl SessionRecord {
    fn of<C: Channel>(mut link: Metered<C>) -> Self {
        Self { report: link.report(), transcript: link.transcript().clone(), counters: link.counters() }
    }
}

pub struct DistributeRun {
    pub bundle: ClientBundle,
    pub owner: SessionRecord,
    pub cloud: SessionRecord,
    pub cloud_log: StateLog,
}

/// Runs setup between the owner and the cloud for `client`.
pub fn distribute_local(owner: &mut DataOwner, cloud: &Cloud, client: u32) -> Result<DistributeRun> {
    let (a, b) = loopback_pair();
    let mut owner_link = Metered::new(a);
    let mut cloud_link = Metered::new(b);
    let mut cloud_log = StateLog::default();
    let (bundle, served) = std::thread::scope(|s| {
        let h = s.spawn(|| cloud.serve(&mut cloud_link, &mut cloud_log));
        let bundle = owner.distribute(&mut owner_link, client);
        (bundle, h.join().expect("cloud thread panicked"))
    });
    served?;
    Ok(DistributeRun { bundle: bundle?, owner: SessionRecord::of(owner_link), cloud: SessionRecord::of(cloud_link), cloud_log })
}

pub struct QueryRun {
    pub result: QueryResult,
    pub client: SessionRecord,
    pub cloud: SessionRecord,
    pub client_log: StateLog,
    pub cloud_log: StateLog,
}

/// Runs one query between `client` and `cloud`. With `audit` set, both
/// sides record their state at every phase boundary.
pub fn query_local(client: &mut Client, cloud: &Cloud, query: &[u16], options: &QueryOptions, audit: bool) -> Result<QueryRun> {
    let (a, b) = loopback_pair();
    let mut client_link = Metered::new(a);
    let mut cloud_link = Metered::new(b);
    let mut client_log = StateLog::default();
    let mut cloud_log = StateLog::default();
    let (result, served) = std::thread::scope(|s| {
        let cloud_log = &mut cloud_log;
        let cloud_link = &mut cloud_link;
        let h = s.spawn(move || {
            let obs: &mut dyn Observer = if audit { cloud_log } else { &mut NoAudit };
            cloud.serve(cloud_link, obs)
        });
        let obs: &mut dyn Observer = if audit { &mut client_log } else { &mut NoAudit };
        let result = client.query(&mut client_link, query, options, obs);
        (result, h.join().expect("cloud thread panicked"))
    });
    // The client's error is the more specific one when both fail.
    let result = result?;
    served?;
    Ok(QueryRun {
        result,
        client: SessionRecord::of(client_link),
        cloud: SessionRecord::of(cloud_link),
        client_log,
        cloud_log,
    })
}

pub struct FeedbackRun {
    pub generation: u64,
    pub client: SessionRecord,
    pub distribute: DistributeRun,
}

/// Sends feedback from the client to the owner, redistributes the new
/// generation through the cloud and installs it at the client.
pub fn feedback_local(owner: &mut DataOwner, cloud: &Cloud, client: &mut Client, item: u32, rating: u16) -> Result<FeedbackRun> {
    let fb = Feedback { client: client.id(), generation: client.generation(), item, rating };
    let (a, b) = loopback_pair();
    let mut client_link = Metered::new(a);
    let mut owner_link = Metered::new(b);
    let (sent, served) = std::thread::scope(|s| {
        let h = s.spawn(|| owner.serve_feedback(&mut owner_link));
        let sent = send_feedback(&mut client_link, &fb);
        (sent, h.join().expect("owner thread panicked"))
    });
    // The client's error is the abort it received, as a remote client sees it.
    let sent = sent?;
    let (_, generation) = served?;
    if sent != generation {
        return Err(ProtocolError::Malformed("owner acknowledged a different generation".into()));
    }
    let distribute = distribute_local(owner, cloud, client.id())?;
    client.replace_bundle(distribute.bundle.clone())?;
    Ok(FeedbackRun { generation, client: SessionRecord::of(client_link), distribute })
}
