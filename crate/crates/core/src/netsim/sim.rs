//! Deterministic discrete-event network: a priority queue of deliveries
//! and timers, a seeded RNG, fixed link delay, and an optional adversary
//! sitting on every link.
//!
//! Determinism contract: identical party set, seed, and adversary script
//! yield byte-identical transcripts. Ties in delivery time are broken by
//! enqueue order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

use crate::crypto::ledger::{self, CostLedger, LedgerGuard};
use crate::runtime::StepOutput;

use super::adversary::{apply_tamper, Action, AdversaryScript};
use super::transcript::Transcript;

/// A protocol endpoint the simulator can drive.
pub trait Party {
    fn id(&self) -> &str;
    fn on_message(&mut self, now: u64, from: &str, bytes: &[u8], rng: &mut ChaCha20Rng)
        -> StepOutput;
    fn on_timer(&mut self, now: u64, kind: u32, rng: &mut ChaCha20Rng) -> StepOutput;
}

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub seed: u64,
    pub link_delay_ms: u64,
    pub step_limit: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { seed: 1, link_delay_ms: 10, step_limit: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Job {
    Deliver { from: String, to: String, bytes: Vec<u8> },
    Timer { party: String, kind: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Pending {
    at: u64,
    seq: u64,
    job: Job,
}

/// Everything left when a run ends.
#[derive(Debug)]
pub struct RunReport {
    pub steps: u64,
    pub final_time: u64,
    pub truncated: bool,
    pub ledger: Option<CostLedger>,
    pub transcript: Transcript,
}

pub struct Simulator<P: Party> {
    cfg: SimConfig,
    parties: BTreeMap<String, P>,
    queue: BinaryHeap<Reverse<Pending>>,
    now: u64,
    seq: u64,
    steps: u64,
    truncated: bool,
    rng: ChaCha20Rng,
    pub adversary: AdversaryScript,
    pub transcript: Transcript,
    guard: Option<LedgerGuard>,
}

impl<P: Party> Simulator<P> {
    pub fn new(cfg: SimConfig, parties: Vec<P>) -> Self {
        let rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let parties = parties.into_iter().map(|p| (p.id().to_owned(), p)).collect();
        Simulator {
            cfg,
            parties,
            queue: BinaryHeap::new(),
            now: 0,
            seq: 0,
            steps: 0,
            truncated: false,
            rng,
            adversary: AdversaryScript::none(),
            transcript: Transcript::new(),
            guard: None,
        }
    }

    /// Opens the cost window. Everything from here to `finish` is metered;
    /// party construction (keys, precomputed DH shares) stays outside.
    pub fn start_metering(&mut self) {
        if self.guard.is_none() {
            self.guard = Some(ledger::begin());
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn party(&self, id: &str) -> &P {
        &self.parties[id]
    }

    pub fn party_mut(&mut self, id: &str) -> &mut P {
        self.parties.get_mut(id).expect("unknown party")
    }

    pub fn party_ids(&self) -> Vec<String> {
        self.parties.keys().cloned().collect()
    }

    /// Runs a closure against one party (e.g. a protocol start call) and
    /// absorbs its output as if it were a normal step.
    pub fn kick(
        &mut self,
        id: &str,
        f: impl FnOnce(&mut P, u64, &mut ChaCha20Rng) -> StepOutput,
    ) {
        ledger::set_party(Some(id));
        let now = self.now;
        let out = {
            let party = self.parties.get_mut(id).expect("unknown party");
            f(party, now, &mut self.rng)
        };
        ledger::set_party(None);
        self.absorb(&id.to_owned(), out);
    }

    /// Queues a raw frame for delivery, bypassing the adversary (used to
    /// inject crafted traffic in tests).
    pub fn inject(&mut self, at: u64, from: &str, to: &str, bytes: Vec<u8>) {
        self.transcript.log_note(self.now, &format!("inject from={from} to={to} at={at}"));
        self.push(
            at,
            Job::Deliver { from: from.to_owned(), to: to.to_owned(), bytes },
        );
    }

    fn push(&mut self, at: u64, job: Job) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse(Pending { at, seq, job }));
    }

    /// Dispatches a party's outbound messages, events, and timers.
    fn absorb(&mut self, from: &str, out: StepOutput) {
        for event in &out.events {
            self.transcript.log_event(self.now, from, event);
        }
        for outbound in out.outbound {
            let message = outbound.message;
            self.transcript.log_send(self.now, from, &outbound.to, &message);
            ledger::record_message_bytes(from, message.bytes.len() as u64, message.content_len());
            for to in outbound.to {
                let deliver_at = self.now + self.cfg.link_delay_ms;
                match self.adversary.decide(from, &to, message.tag()) {
                    None => {
                        let job =
                            Job::Deliver { from: from.to_owned(), to, bytes: message.bytes.clone() };
                        self.push(deliver_at, job);
                    }
                    Some(Action::Drop) => {
                        self.transcript.log_adversary(self.now, "drop", from, &to, message.tag());
                    }
                    Some(Action::DelayMs(d)) => {
                        self.transcript.log_adversary(self.now, "delay", from, &to, message.tag());
                        let job =
                            Job::Deliver { from: from.to_owned(), to, bytes: message.bytes.clone() };
                        self.push(deliver_at + d, job);
                    }
                    Some(action @ (Action::TamperContent | Action::TamperAt(_))) => {
                        self.transcript.log_adversary(
                            self.now,
                            action.name(),
                            from,
                            &to,
                            message.tag(),
                        );
                        let mut bytes = message.bytes.clone();
                        apply_tamper(&mut bytes, message.content.as_ref(), action);
                        self.push(deliver_at, Job::Deliver { from: from.to_owned(), to, bytes });
                    }
                    Some(Action::Replay { after_ms }) => {
                        self.transcript.log_adversary(self.now, "replay", from, &to, message.tag());
                        let job = Job::Deliver {
                            from: from.to_owned(),
                            to: to.clone(),
                            bytes: message.bytes.clone(),
                        };
                        self.push(deliver_at, job.clone());
                        self.push(deliver_at + after_ms, job);
                    }
                }
            }
        }
        for timer in out.timers {
            self.push(timer.at, Job::Timer { party: from.to_owned(), kind: timer.kind });
        }
    }

    /// Processes queued work until nothing is left or the step limit hits.
    pub fn run_until_idle(&mut self) {
        while let Some(Reverse(pending)) = self.queue.pop() {
            self.steps += 1;
            if self.steps > self.cfg.step_limit {
                self.truncated = true;
                self.transcript.log_note(self.now, "step limit reached; run truncated");
                break;
            }
            self.now = self.now.max(pending.at);
            match pending.job {
                Job::Deliver { from, to, bytes } => {
                    if !self.parties.contains_key(&to) {
                        self.transcript
                            .log_note(self.now, &format!("undeliverable to={to} (no such party)"));
                        continue;
                    }
                    ledger::set_party(Some(&to));
                    let now = self.now;
                    let out = {
                        let party = self.parties.get_mut(&to).expect("checked above");
                        party.on_message(now, &from, &bytes, &mut self.rng)
                    };
                    ledger::set_party(None);
                    self.absorb(&to, out);
                }
                Job::Timer { party, kind } => {
                    if !self.parties.contains_key(&party) {
                        continue;
                    }
                    ledger::set_party(Some(&party));
                    let now = self.now;
                    let out = {
                        let p = self.parties.get_mut(&party).expect("checked above");
                        p.on_timer(now, kind, &mut self.rng)
                    };
                    ledger::set_party(None);
                    self.absorb(&party, out);
                }
            }
        }
    }

    /// Closes the run and hands back the report plus the final party
    /// states for assertions.
    pub fn finish(mut self) -> (RunReport, BTreeMap<String, P>) {
        let ledger = self.guard.take().map(|g| g.finish());
        let report = RunReport {
            steps: self.steps,
            final_time: self.now,
            truncated: self.truncated,
            ledger,
            transcript: self.transcript,
        };
        (report, self.parties)
    }
}
