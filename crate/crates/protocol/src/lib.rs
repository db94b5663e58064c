//! The three-role private recommendation protocol: a data owner that builds
//! and masks per-client models, a cloud holding the primary key, and
//! clients that query their masked model through the cloud with HE
//! distances and garbled-circuit selection.
//!
//! Every exchange is a framed, metered session (see [`prs_wire`]) whose
//! phases follow [`Phase`].

pub mod audit;
pub mod client;
pub mod cloud;
pub mod derive;
pub mod error;
pub mod local;
pub mod messages;
pub mod owner;
pub mod phase;
pub mod pipeline;

pub use audit::{audit_client, audit_client_transcript, audit_cloud, NoAudit, Observer, Role, StateLog, StateView};
pub use client::{Client, QueryResult};
pub use cloud::{Cloud, Registration, Served};
pub use derive::{SeedTree, CHUNK_LANES};
pub use error::{ProtocolError, Result};
pub use local::{distribute_local, feedback_local, query_local, DistributeRun, FeedbackRun, QueryRun, SessionRecord};
pub use messages::{DisclosureMode, Feedback, Hello, QueryOptions};
pub use owner::{body_checksum, send_feedback, ClientBundle, DataOwner, OwnedModel};
pub use phase::{Phase, Session};
pub use pipeline::{plan_circuits, QueryPlan};
