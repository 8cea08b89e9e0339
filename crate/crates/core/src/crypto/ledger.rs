//! Operation-cost ledger.
//!
//! Counts expensive operations (group scalar multiplications, modular
//! exponentiations, symmetric cipher calls, point additions) and message
//! bytes, attributed per party. The ledger is a thread-local installed for
//! the duration of a run; when none is installed every recording call is a
//! no-op, so instrumentation never changes protocol behavior or output.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

/// Counters for one party (or the whole run).
///
/// `bytes_total` counts wire bytes of sent messages; `bytes_content` is the
/// portion that is opaque carried payload (file ciphertext), so
/// `overhead_bytes` isolates what the protocol itself adds.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounts {
    pub scalar_mults: u64,
    pub modexps: u64,
    pub sym_cipher_calls: u64,
    pub point_adds: u64,
    pub bytes_total: u64,
    pub bytes_content: u64,
}

impl OpCounts {
    pub fn overhead_bytes(&self) -> u64 {
        self.bytes_total - self.bytes_content
    }

    pub fn is_zero(&self) -> bool {
        *self == OpCounts::default()
    }
}

impl Add for OpCounts {
    type Output = OpCounts;
    fn add(self, rhs: OpCounts) -> OpCounts {
        OpCounts {
            scalar_mults: self.scalar_mults + rhs.scalar_mults,
            modexps: self.modexps + rhs.modexps,
            sym_cipher_calls: self.sym_cipher_calls + rhs.sym_cipher_calls,
            point_adds: self.point_adds + rhs.point_adds,
            bytes_total: self.bytes_total + rhs.bytes_total,
            bytes_content: self.bytes_content + rhs.bytes_content,
        }
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: OpCounts) {
        *self = *self + rhs;
    }
}

impl Sub for OpCounts {
    type Output = OpCounts;
    fn sub(self, rhs: OpCounts) -> OpCounts {
        OpCounts {
            scalar_mults: self.scalar_mults - rhs.scalar_mults,
            modexps: self.modexps - rhs.modexps,
            sym_cipher_calls: self.sym_cipher_calls - rhs.sym_cipher_calls,
            point_adds: self.point_adds - rhs.point_adds,
            bytes_total: self.bytes_total - rhs.bytes_total,
            bytes_content: self.bytes_content - rhs.bytes_content,
        }
    }
}

impl fmt::Display for OpCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "scalar_mults={} modexps={} sym_cipher_calls={} point_adds={} bytes_total={} bytes_content={}",
            self.scalar_mults,
            self.modexps,
            self.sym_cipher_calls,
            self.point_adds,
            self.bytes_total,
            self.bytes_content
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum OpKind {
    ScalarMult,
    ModExp,
    SymCipher,
    PointAdd,
}

/// Finished-run accounting: totals plus a per-party breakdown.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct CostLedger {
    pub total: OpCounts,
    pub per_party: BTreeMap<String, OpCounts>,
}

impl CostLedger {
    /// Counts attributed to `party` (zero if the party recorded nothing).
    pub fn party(&self, party: &str) -> OpCounts {
        self.per_party.get(party).copied().unwrap_or_default()
    }

    /// Deterministic text rendering, one party per line plus a total line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (party, counts) in &self.per_party {
            out.push_str(&format!("party {party}: {counts}\n"));
        }
        out.push_str(&format!("total: {}\n", self.total));
        out
    }
}

struct ActiveLedger {
    ledger: CostLedger,
    current_party: Option<String>,
}

thread_local! {
    static ACTIVE: RefCell<Option<ActiveLedger>> = const { RefCell::new(None) };
}

/// Handle for an installed ledger; dropping it uninstalls the ledger.
pub struct LedgerGuard {
    _priv: (),
}

impl LedgerGuard {
    /// Takes the accumulated ledger out and uninstalls it.
    pub fn finish(self) -> CostLedger {
        ACTIVE.with(|a| {
            a.borrow_mut()
                .take()
                .map(|active| active.ledger)
                .unwrap_or_default()
        })
    }
}

impl Drop for LedgerGuard {
    fn drop(&mut self) {
        ACTIVE.with(|a| {
            a.borrow_mut().take();
        });
    }
}

/// Installs a fresh ledger on this thread.
///
/// Panics if one is already installed: runs must not nest, otherwise the
/// inner run would silently swallow the outer run's counts.
pub fn begin() -> LedgerGuard {
    ACTIVE.with(|a| {
        let mut slot = a.borrow_mut();
        assert!(slot.is_none(), "a cost ledger is already installed on this thread");
        *slot = Some(ActiveLedger {
            ledger: CostLedger::default(),
            current_party: None,
        });
    });
    LedgerGuard { _priv: () }
}

/// True if a ledger is currently recording on this thread.
pub fn recording() -> bool {
    ACTIVE.with(|a| a.borrow().is_some())
}

/// Sets the party that subsequent operations are attributed to.
pub fn set_party(party: Option<&str>) {
    ACTIVE.with(|a| {
        if let Some(active) = a.borrow_mut().as_mut() {
            active.current_party = party.map(str::to_owned);
        }
    });
}

/// Runs `f` with operations attributed to `party`, restoring the previous
/// attribution afterwards.
pub fn with_party<T>(party: &str, f: impl FnOnce() -> T) -> T {
    let previous = ACTIVE.with(|a| {
        a.borrow_mut().as_mut().and_then(|active| {
            std::mem::replace(&mut active.current_party, Some(party.to_owned()))
        })
    });
    let result = f();
    ACTIVE.with(|a| {
        if let Some(active) = a.borrow_mut().as_mut() {
            active.current_party = previous;
        }
    });
    result
}

/// Current run totals (zero when no ledger is installed).
pub fn snapshot_total() -> OpCounts {
    ACTIVE.with(|a| {
        a.borrow()
            .as_ref()
            .map(|active| active.ledger.total)
            .unwrap_or_default()
    })
}

/// Current counts for one party (zero when no ledger is installed).
pub fn snapshot_party(party: &str) -> OpCounts {
    ACTIVE.with(|a| {
        a.borrow()
            .as_ref()
            .map(|active| active.ledger.party(party))
            .unwrap_or_default()
    })
}

pub(crate) fn bump(kind: OpKind, n: u64) {
    ACTIVE.with(|a| {
        if let Some(active) = a.borrow_mut().as_mut() {
            let mut delta = OpCounts::default();
            match kind {
                OpKind::ScalarMult => delta.scalar_mults = n,
                OpKind::ModExp => delta.modexps = n,
                OpKind::SymCipher => delta.sym_cipher_calls = n,
                OpKind::PointAdd => delta.point_adds = n,
            }
            active.ledger.total += delta;
            if let Some(party) = active.current_party.clone() {
                *active.ledger.per_party.entry(party).or_default() += delta;
            }
        }
    });
}

/// Records sent message bytes for `party`: full wire length plus how much of
/// it is opaque carried content.
pub fn record_message_bytes(party: &str, wire_len: u64, content_len: u64) {
    debug_assert!(content_len <= wire_len);
    ACTIVE.with(|a| {
        if let Some(active) = a.borrow_mut().as_mut() {
            let delta = OpCounts {
                bytes_total: wire_len,
                bytes_content: content_len,
                ..OpCounts::default()
            };
            active.ledger.total += delta;
            *active.ledger.per_party.entry(party.to_owned()).or_default() += delta;
        }
    });
}
