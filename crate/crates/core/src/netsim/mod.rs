//! Deterministic event-driven network simulator: delivers messages between
//! parties with fixed link delay, lets an adversary script drop/delay/tamper/
//! replay deliveries, and records a full transcript plus cost ledger.

pub mod adversary;
pub mod scenario;
pub mod sim;
pub mod transcript;

pub use adversary::{Action, AdversaryScript, Rule};
pub use scenario::{
    AnyParty, BuiltScenario, Check, CheckResult, Protocol, Scenario, ScenarioError,
    ScenarioOutcome,
};
pub use sim::{Party, RunReport, SimConfig, Simulator};
pub use transcript::{SendRecord, Transcript};
