//! Shared plumbing for the protocol state machines.
//!
//! Role handlers are pure state transitions: they receive the virtual time,
//! the sender, and the raw message, and return a [`StepOutput`] — messages
//! to send, human-readable events for the transcript, and timers to arm.
//! The network layer owns delivery, so roles never block or sleep.

use std::ops::Range;

/// An encoded message plus the span of opaque carried content (file
/// ciphertext) inside it, used for byte accounting and content-targeted
/// tampering in adversary scripts.
#[derive(Debug, Clone)]
pub struct WireMessage {
    pub bytes: Vec<u8>,
    pub content: Option<Range<usize>>,
}

impl WireMessage {
    pub fn plain(bytes: Vec<u8>) -> Self {
        WireMessage { bytes, content: None }
    }

    pub fn tag(&self) -> u8 {
        self.bytes.first().copied().unwrap_or(0)
    }

    pub fn content_len(&self) -> u64 {
        self.content.as_ref().map(|r| r.len() as u64).unwrap_or(0)
    }
}

impl From<Vec<u8>> for WireMessage {
    fn from(bytes: Vec<u8>) -> Self {
        WireMessage::plain(bytes)
    }
}

impl From<(Vec<u8>, std::ops::Range<usize>)> for WireMessage {
    fn from((bytes, content): (Vec<u8>, std::ops::Range<usize>)) -> Self {
        WireMessage { bytes, content: Some(content) }
    }
}

/// A logical send: one message to one or more recipients (a broadcast is a
/// single logical send delivered to each recipient).
#[derive(Debug, Clone)]
pub struct Outbound {
    pub to: Vec<String>,
    pub message: WireMessage,
}

/// Request to fire `on_timer(kind)` at absolute virtual time `at`.
#[derive(Debug, Clone, Copy)]
pub struct TimerRequest {
    pub at: u64,
    pub kind: u32,
}

/// Result of one handler invocation.
#[derive(Debug, Default)]
pub struct StepOutput {
    pub outbound: Vec<Outbound>,
    pub events: Vec<String>,
    pub timers: Vec<TimerRequest>,
}

impl StepOutput {
    pub fn new() -> Self {
        StepOutput::default()
    }

    pub fn send_to(&mut self, to: &str, message: impl Into<WireMessage>) {
        self.outbound.push(Outbound { to: vec![to.to_owned()], message: message.into() });
    }

    /// One logical send delivered to every listed recipient.
    pub fn broadcast(&mut self, to: Vec<String>, message: impl Into<WireMessage>) {
        if !to.is_empty() {
            self.outbound.push(Outbound { to, message: message.into() });
        }
    }

    pub fn event(&mut self, text: String) {
        self.events.push(text);
    }

    pub fn timer(&mut self, at: u64, kind: u32) {
        self.timers.push(TimerRequest { at, kind });
    }

    pub fn reject(&mut self, kind: &str, from: &str, reason: &str) {
        self.events.push(format!("reject kind={kind} from={from} reason={reason}"));
    }
}

/// Replay and staleness protection shared by every receiver: a symmetric
/// freshness window over message timestamps plus a digest set that makes
/// in-window duplicate delivery idempotent.
#[derive(Debug)]
pub struct Guardrails {
    pub window_ms: u64,
    seen: std::collections::BTreeSet<[u8; 32]>,
}

impl Guardrails {
    pub fn new(window_ms: u64) -> Self {
        Guardrails { window_ms, seen: std::collections::BTreeSet::new() }
    }

    /// Timestamp within the window of `now` (both directions)?
    pub fn fresh(&self, now: u64, stamped: u64) -> bool {
        now.abs_diff(stamped) <= self.window_ms
    }

    /// True on first sighting of these exact bytes; false (and no state
    /// change) on any later sighting.
    pub fn first_sighting(&mut self, bytes: &[u8]) -> bool {
        self.seen.insert(crate::crypto::hashes::h3(bytes))
    }
}

/// Human-readable name for a message tag (for transcripts and scripts).
pub fn kind_name(tag: u8) -> &'static str {
    match tag {
        crate::segds::messages::TAG_SETUP_OFFER => "setup-offer",
        crate::segds::messages::TAG_SETUP_ANSWER => "setup-answer",
        crate::segds::messages::TAG_ASSIGN => "assign",
        crate::segds::messages::TAG_SEGMENT => "segment",
        crate::segds::messages::TAG_SHARE => "share",
        crate::segds::messages::TAG_CONSOLIDATE => "consolidate",
        crate::sedds::messages::TAG_REQUEST => "request",
        crate::sedds::messages::TAG_DATA => "data",
        crate::sedds::messages::TAG_HINT => "hint",
        crate::sedds::messages::TAG_KEY_RELEASE => "key-release",
        crate::sedds::messages::TAG_ACK => "ack",
        _ => "unknown",
    }
}

/// Parses a kind name back to its tag.
pub fn kind_tag(name: &str) -> Option<u8> {
    let tags = [
        crate::segds::messages::TAG_SETUP_OFFER,
        crate::segds::messages::TAG_SETUP_ANSWER,
        crate::segds::messages::TAG_ASSIGN,
        crate::segds::messages::TAG_SEGMENT,
        crate::segds::messages::TAG_SHARE,
        crate::segds::messages::TAG_CONSOLIDATE,
        crate::sedds::messages::TAG_REQUEST,
        crate::sedds::messages::TAG_DATA,
        crate::sedds::messages::TAG_HINT,
        crate::sedds::messages::TAG_KEY_RELEASE,
        crate::sedds::messages::TAG_ACK,
    ];
    tags.into_iter().find(|t| kind_name(*t) == name)
}
