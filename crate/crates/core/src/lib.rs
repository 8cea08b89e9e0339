//! Certificateless secure data sharing for UAV swarms.
//!
//! Two protocol engines built on a shared certificateless crypto layer:
//!
//! - **SeGDS** — a coordinator (group head) splits a file download across a
//!   UAV group; members fetch encrypted segments from the service provider,
//!   broadcast them to the group, and the coordinator releases the session
//!   key to well-behaved members via multi-receiver encryption.
//! - **SeDDS** — a single UE buys a cached file directly from a nearby UAV
//!   with deferred key release, percentage prepayment, and an adjudicator
//!   that settles or refunds based on signed hint/ack claims.
//!
//! Both run as message-driven state machines over a deterministic simulated
//! network ([`netsim`]), with every expensive operation recorded by an
//! observation-only cost meter ([`crypto::ledger`]).

pub mod crypto;
pub mod wire;
pub mod pki;
pub mod signcrypt;
pub mod mre;
pub mod runtime;
pub mod authority;
pub mod segds;
pub mod sedds;
pub mod netsim;
pub mod metering;
pub mod acceptance;
