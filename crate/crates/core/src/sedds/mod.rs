//! Direct device-to-device resale of provider-attested files, with
//! deferred key release, an escrowed prepayment, and arbiter-settled
//! delivery disputes.

pub mod messages;
pub mod roles;

pub use messages::{provider_attestation, Ack, DataMsg, Hint, KeyRelease, Req, SeddsMessage};
pub use roles::{
    resale_item, ResaleItem, Uav, UavConfig, Ue, UeConfig, DEFAULT_ACK_DEADLINE_MS,
    DEFAULT_DATA_DEADLINE_MS, DEFAULT_KEY_DEADLINE_MS, TIMER_ACK_DEADLINE, TIMER_DATA_DEADLINE,
    TIMER_KEY_DEADLINE,
};
