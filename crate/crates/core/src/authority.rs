//! Network-side authority: holds the registration service, the payment
//! escrow, and an authoritative copy of the file catalog, and settles
//! delivery disputes from the direct-exchange protocol.
//!
//! Claims arrive as full encoded messages, never as pre-parsed fields, so
//! a claimant cannot lie about what a message said: the arbiter re-parses
//! and re-verifies everything itself.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use crate::crypto::ledger;
use crate::pki::KgcState;
use crate::sedds::messages::{Ack, Hint};
use crate::signcrypt::verify;

/// Lifecycle of one escrow entry, keyed by (payer, file). Transitions are
/// monotone: an entry is opened once and closed once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaymentState {
    /// Deposit of the given percentage is held in escrow.
    Prepaid(u8),
    /// Full price released to the seller.
    Settled,
    /// Deposit returned to the payer.
    Refunded,
}

impl fmt::Display for PaymentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PaymentState::Prepaid(p) => write!(f, "prepaid({p}%)"),
            PaymentState::Settled => write!(f, "settled"),
            PaymentState::Refunded => write!(f, "refunded"),
        }
    }
}

/// Escrow book: one entry per (payer, file) pair.
#[derive(Debug, Default)]
pub struct PaymentLedger {
    entries: BTreeMap<(String, String), PaymentState>,
}

impl PaymentLedger {
    pub fn prepay(&mut self, payer: &str, file: &str, percent: u8) -> bool {
        let key = (payer.to_owned(), file.to_owned());
        if self.entries.contains_key(&key) {
            return false;
        }
        self.entries.insert(key, PaymentState::Prepaid(percent));
        true
    }

    fn close(&mut self, payer: &str, file: &str, terminal: PaymentState) -> bool {
        let key = (payer.to_owned(), file.to_owned());
        match self.entries.get(&key) {
            Some(PaymentState::Prepaid(_)) => {
                self.entries.insert(key, terminal);
                true
            }
            _ => false,
        }
    }

    pub fn settle(&mut self, payer: &str, file: &str) -> bool {
        self.close(payer, file, PaymentState::Settled)
    }

    pub fn refund(&mut self, payer: &str, file: &str) -> bool {
        self.close(payer, file, PaymentState::Refunded)
    }

    pub fn state(&self, payer: &str, file: &str) -> Option<PaymentState> {
        self.entries.get(&(payer.to_owned(), file.to_owned())).copied()
    }

    /// One `payer,file,state` line per entry, sorted.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for ((payer, file), state) in &self.entries {
            out.push_str(&format!("{payer},{file},{state}\n"));
        }
        out
    }
}

/// What a party submits when it wants the arbiter to rule on a session.
#[derive(Debug, Clone)]
pub enum Claim {
    /// Seller claims successful delivery, evidenced by the buyer's signed
    /// plaintext acknowledgement (full wire bytes).
    Delivery { ack_bytes: Vec<u8> },
    /// Buyer claims the seller never released the key, evidenced by the
    /// buyer's own signed ciphertext receipt (full wire bytes).
    Failure { hint_bytes: Vec<u8> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    SuccessfulTransfer,
    FailedConnection,
    InvalidClaim,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::SuccessfulTransfer => write!(f, "successful-transfer"),
            Outcome::FailedConnection => write!(f, "failed-connection"),
            Outcome::InvalidClaim => write!(f, "invalid-claim"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub claimant: String,
    pub outcome: Outcome,
    pub detail: String,
}

/// The arbiter service: registration authority plus escrow plus catalog.
pub struct AusfService {
    kgc: Rc<RefCell<KgcState>>,
    pub payments: PaymentLedger,
    catalog: BTreeMap<String, Vec<u8>>,
    verdicts: Vec<Verdict>,
    pub prepay_percent: u8,
}

impl AusfService {
    pub fn new(kgc: Rc<RefCell<KgcState>>, prepay_percent: u8) -> Self {
        AusfService {
            kgc,
            payments: PaymentLedger::default(),
            catalog: BTreeMap::new(),
            verdicts: Vec::new(),
            prepay_percent,
        }
    }

    pub fn kgc(&self) -> Rc<RefCell<KgcState>> {
        self.kgc.clone()
    }

    /// Registers the authoritative content of a published file.
    pub fn publish(&mut self, file_name: &str, content: &[u8]) {
        self.catalog.insert(file_name.to_owned(), content.to_vec());
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn last_verdict(&self) -> Option<&Verdict> {
        self.verdicts.last()
    }

    /// Escrow deposit a buyer places when it sends its ciphertext receipt.
    pub fn prepay(&mut self, payer: &str, file: &str) -> bool {
        self.payments.prepay(payer, file, self.prepay_percent)
    }

    /// Rules on a claim. All verification costs are booked to the arbiter,
    /// not to the claimant.
    pub fn adjudicate(&mut self, claimant: &str, claim: Claim) -> Verdict {
        let verdict = ledger::with_party("ausf", || match claim {
            Claim::Delivery { ack_bytes } => self.rule_on_delivery(claimant, &ack_bytes),
            Claim::Failure { hint_bytes } => self.rule_on_failure(claimant, &hint_bytes),
        });
        if verdict.outcome == Outcome::InvalidClaim {
            self.kgc.borrow_mut().report_offense(claimant);
        }
        self.verdicts.push(verdict.clone());
        verdict
    }

    fn rule_on_delivery(&mut self, claimant: &str, ack_bytes: &[u8]) -> Verdict {
        let fail = |detail: &str| Verdict {
            claimant: claimant.to_owned(),
            outcome: Outcome::InvalidClaim,
            detail: detail.to_owned(),
        };
        let Ok(ack) = Ack::decode(ack_bytes) else {
            return fail("ack-malformed");
        };
        if ack.uav != claimant {
            return fail("ack-names-other-seller");
        }
        let (params, buyer_pub) = {
            let kgc = self.kgc.borrow();
            let Some(pk) = kgc.public_key(&ack.ue).copied() else {
                return fail("buyer-unknown");
            };
            (*kgc.params(), pk)
        };
        if !verify(&params, &ack.ue, &buyer_pub, &ack.signed_input(), &ack.signature) {
            return fail("ack-signature-invalid");
        }
        let Some(content) = self.catalog.get(&ack.file_name) else {
            return fail("file-not-published");
        };
        if ack.proof != Ack::proof_for(&ack.file_name, content) {
            return fail("proof-mismatch");
        }
        if !self.payments.settle(&ack.ue, &ack.file_name) {
            return fail("no-open-escrow");
        }
        Verdict {
            claimant: claimant.to_owned(),
            outcome: Outcome::SuccessfulTransfer,
            detail: format!("payment settled payer={} file={}", ack.ue, ack.file_name),
        }
    }

    fn rule_on_failure(&mut self, claimant: &str, hint_bytes: &[u8]) -> Verdict {
        let fail = |detail: &str| Verdict {
            claimant: claimant.to_owned(),
            outcome: Outcome::InvalidClaim,
            detail: detail.to_owned(),
        };
        let Ok(hint) = Hint::decode(hint_bytes) else {
            return fail("hint-malformed");
        };
        if hint.ue != claimant {
            return fail("hint-names-other-buyer");
        }
        let (params, buyer_pub) = {
            let kgc = self.kgc.borrow();
            let Some(pk) = kgc.public_key(&hint.ue).copied() else {
                return fail("buyer-unknown");
            };
            (*kgc.params(), pk)
        };
        if !verify(&params, &hint.ue, &buyer_pub, &hint.signed_input(), &hint.signature) {
            return fail("hint-signature-invalid");
        }
        match self.payments.state(&hint.ue, &hint.file_name) {
            Some(PaymentState::Prepaid(_)) => {}
            // a failure claim against a session the buyer itself already
            // acknowledged is the buyer trying to claw back a settled payment
            Some(PaymentState::Settled) => return fail("already-settled"),
            Some(PaymentState::Refunded) => return fail("already-refunded"),
            None => return fail("no-open-escrow"),
        }
        self.payments.refund(&hint.ue, &hint.file_name);
        Verdict {
            claimant: claimant.to_owned(),
            outcome: Outcome::FailedConnection,
            detail: format!("payment refunded payer={} file={}", hint.ue, hint.file_name),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pki::enroll;
    use crate::signcrypt::sign;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    fn service() -> (Rc<RefCell<KgcState>>, AusfService, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let kgc = Rc::new(RefCell::new(crate::pki::setup(128, &mut rng)));
        let ausf = AusfService::new(kgc.clone(), 20);
        (kgc, ausf, rng)
    }

    #[test]
    fn escrow_transitions_are_monotone() {
        let mut book = PaymentLedger::default();
        assert!(book.prepay("ue-1", "a.bin", 20));
        assert!(!book.prepay("ue-1", "a.bin", 20), "no double prepay");
        assert!(book.settle("ue-1", "a.bin"));
        assert!(!book.refund("ue-1", "a.bin"), "settled is terminal");
        assert!(!book.settle("ue-1", "a.bin"), "settle is idempotent-fail");
        assert_eq!(book.state("ue-1", "a.bin"), Some(PaymentState::Settled));
        assert!(!book.settle("ue-2", "a.bin"), "no settle without prepay");
        assert_eq!(book.export(), "ue-1,a.bin,settled\n");
    }

    #[test]
    fn valid_delivery_claim_settles() {
        let (kgc, mut ausf, mut rng) = service();
        let ue = enroll(&mut kgc.borrow_mut(), "ue-1", &mut rng).unwrap();
        let params = *kgc.borrow().params();
        let content = b"the file content".to_vec();
        ausf.publish("a.bin", &content);
        ausf.prepay("ue-1", "a.bin");

        let mut ack = Ack {
            ue: "ue-1".into(),
            uav: "uav-1".into(),
            file_name: "a.bin".into(),
            proof: Ack::proof_for("a.bin", &content),
            sent_at: 5,
            signature: sign(&params, &ue, b"x", &mut rng),
        };
        ack.signature = sign(&params, &ue, &ack.signed_input(), &mut rng);
        let verdict = ausf.adjudicate("uav-1", Claim::Delivery { ack_bytes: ack.encode() });
        assert_eq!(verdict.outcome, Outcome::SuccessfulTransfer);
        assert_eq!(ausf.payments.state("ue-1", "a.bin"), Some(PaymentState::Settled));
        assert!(!kgc.borrow().is_blacklisted("uav-1"));
    }

    #[test]
    fn forged_delivery_claim_is_invalid_and_penalized() {
        let (kgc, mut ausf, mut rng) = service();
        let _ue = enroll(&mut kgc.borrow_mut(), "ue-1", &mut rng).unwrap();
        let uav = enroll(&mut kgc.borrow_mut(), "uav-1", &mut rng).unwrap();
        let params = *kgc.borrow().params();
        let content = b"the file content".to_vec();
        ausf.publish("a.bin", &content);
        ausf.prepay("ue-1", "a.bin");

        // seller forges an ack: right proof, but signed with its own key
        let mut ack = Ack {
            ue: "ue-1".into(),
            uav: "uav-1".into(),
            file_name: "a.bin".into(),
            proof: Ack::proof_for("a.bin", &content),
            sent_at: 5,
            signature: sign(&params, &uav, b"x", &mut rng),
        };
        ack.signature = sign(&params, &uav, &ack.signed_input(), &mut rng);
        let verdict = ausf.adjudicate("uav-1", Claim::Delivery { ack_bytes: ack.encode() });
        assert_eq!(verdict.outcome, Outcome::InvalidClaim);
        assert_eq!(verdict.detail, "ack-signature-invalid");
        // escrow untouched, offense recorded (threshold 1 revokes)
        assert_eq!(ausf.payments.state("ue-1", "a.bin"), Some(PaymentState::Prepaid(20)));
        assert!(kgc.borrow().is_blacklisted("uav-1"));
    }

    #[test]
    fn failure_claim_refunds_open_escrow_only() {
        let (kgc, mut ausf, mut rng) = service();
        let ue = enroll(&mut kgc.borrow_mut(), "ue-1", &mut rng).unwrap();
        let params = *kgc.borrow().params();
        ausf.publish("a.bin", b"content");
        ausf.prepay("ue-1", "a.bin");

        let mut hint = Hint {
            ue: "ue-1".into(),
            uav: "uav-1".into(),
            file_name: "a.bin".into(),
            receipt: Hint::receipt_for("a.bin", b"whatever-ciphertext"),
            sent_at: 9,
            signature: sign(&params, &ue, b"x", &mut rng),
        };
        hint.signature = sign(&params, &ue, &hint.signed_input(), &mut rng);
        let bytes = hint.encode();

        let verdict = ausf.adjudicate("ue-1", Claim::Failure { hint_bytes: bytes.clone() });
        assert_eq!(verdict.outcome, Outcome::FailedConnection);
        assert_eq!(ausf.payments.state("ue-1", "a.bin"), Some(PaymentState::Refunded));

        // a second failure claim finds no open escrow and is invalid
        let verdict = ausf.adjudicate("ue-1", Claim::Failure { hint_bytes: bytes });
        assert_eq!(verdict.outcome, Outcome::InvalidClaim);
    }

    #[test]
    fn adjudication_costs_land_on_the_arbiter() {
        let (kgc, mut ausf, mut rng) = service();
        let ue = enroll(&mut kgc.borrow_mut(), "ue-1", &mut rng).unwrap();
        let params = *kgc.borrow().params();
        let content = b"zz".to_vec();
        ausf.publish("a.bin", &content);
        ausf.prepay("ue-1", "a.bin");
        let mut ack = Ack {
            ue: "ue-1".into(),
            uav: "uav-1".into(),
            file_name: "a.bin".into(),
            proof: Ack::proof_for("a.bin", &content),
            sent_at: 5,
            signature: sign(&params, &ue, b"x", &mut rng),
        };
        ack.signature = sign(&params, &ue, &ack.signed_input(), &mut rng);

        let guard = ledger::begin();
        ledger::set_party(Some("uav-1"));
        ausf.adjudicate("uav-1", Claim::Delivery { ack_bytes: ack.encode() });
        let report = guard.finish();
        assert_eq!(report.party("ausf").scalar_mults, 3, "one verification");
        assert_eq!(report.party("uav-1").scalar_mults, 0, "claimant pays nothing");
    }
}
