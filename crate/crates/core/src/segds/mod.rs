//! Cooperative group download: a coordinator splits a provider-hosted file
//! across group members, every member re-shares its encrypted segment under
//! its own signature, and the session key is released only to members that
//! delivered their part.

pub mod messages;
pub mod plan;
pub mod roles;

pub use messages::{
    AssignMsg, ConsolidateMsg, SegdsMessage, SegmentMsg, SetupAnswer, SetupOffer, ShareMsg,
};
pub use plan::{split_span, Assignment, ByteRange, SegmentPlan};
pub use roles::{
    segment_aad, Coordinator, GroupConfig, Member, Provider, DEFAULT_FRESHNESS_WINDOW_MS,
    DEFAULT_TASK_DEADLINE_MS,
};
