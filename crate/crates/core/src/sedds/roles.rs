//! Direct-exchange state machines: the requesting device and the holder.
//!
//! Payment fairness rests on ordering: the holder sends ciphertext first,
//! the requester escrows a deposit together with a signed ciphertext
//! receipt, and only then does the holder release its half of the session
//! key. Either side can take its evidence — the receipt or the plaintext
//! acknowledgement — to the arbiter, which re-verifies everything itself.

use std::cell::RefCell;
use std::collections::{BTreeMap, VecDeque};
use std::rc::Rc;

use rand_core::Rng;

use crate::authority::{AusfService, Claim, Outcome};
use crate::crypto::aead::{sym_decrypt, sym_encrypt};
use crate::crypto::dh::{dh_exp, DhElement, DhExponent};
use crate::crypto::hashes::h3;
use crate::pki::{Directory, FullKeyPair, SystemParams};
use crate::runtime::{Guardrails, StepOutput};
use crate::signcrypt::{sign, verify, Signature};

use super::messages::*;

pub const DEFAULT_DATA_DEADLINE_MS: u64 = 10_000;
pub const DEFAULT_KEY_DEADLINE_MS: u64 = 10_000;
pub const DEFAULT_ACK_DEADLINE_MS: u64 = 15_000;

/// Timer kinds used by the two roles.
pub const TIMER_DATA_DEADLINE: u32 = 11;
pub const TIMER_KEY_DEADLINE: u32 = 12;
pub const TIMER_ACK_DEADLINE: u32 = 21;

fn placeholder_sig() -> Signature {
    Signature {
        commitment: crate::crypto::group::GroupElement::identity(),
        response: crate::crypto::group::Scalar::zero(),
    }
}

fn short_digest(d: &[u8; 32]) -> String {
    d[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct UeConfig {
    pub uav: String,
    pub file_name: String,
    pub freshness_window_ms: u64,
    pub data_deadline_ms: u64,
    pub key_deadline_ms: u64,
    /// Free-rider behavior: accept the ciphertext but never send the
    /// receipt (and therefore never pay).
    pub refuse_hint: bool,
    /// Free-rider behavior: complete the exchange honestly, then claim the
    /// key was never released to claw the payment back.
    pub false_claim: bool,
}

impl UeConfig {
    pub fn new(uav: &str, file_name: &str) -> Self {
        UeConfig {
            uav: uav.to_owned(),
            file_name: file_name.to_owned(),
            freshness_window_ms: crate::segds::DEFAULT_FRESHNESS_WINDOW_MS,
            data_deadline_ms: DEFAULT_DATA_DEADLINE_MS,
            key_deadline_ms: DEFAULT_KEY_DEADLINE_MS,
            refuse_hint: false,
            false_claim: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UePhase {
    Idle,
    AwaitData,
    AwaitKey,
    Refused,
    Done,
    Failed,
}

/// The requesting device.
pub struct Ue {
    params: SystemParams,
    key: FullKeyPair,
    cfg: UeConfig,
    dir: Directory,
    ausf: Rc<RefCell<AusfService>>,
    guard: Guardrails,
    phase: UePhase,
    dh_secret: Option<DhExponent>,
    session_start: u64,
    data_msg: Option<DataMsg>,
    hint_bytes: Option<Vec<u8>>,
    hint_time: u64,
    plaintext: Option<Vec<u8>>,
    dispute_outcome: Option<Outcome>,
}

impl Ue {
    pub fn new(
        params: SystemParams,
        key: FullKeyPair,
        cfg: UeConfig,
        dir: Directory,
        ausf: Rc<RefCell<AusfService>>,
    ) -> Self {
        let window = cfg.freshness_window_ms;
        Ue {
            params,
            key,
            cfg,
            dir,
            ausf,
            guard: Guardrails::new(window),
            phase: UePhase::Idle,
            dh_secret: None,
            session_start: 0,
            data_msg: None,
            hint_bytes: None,
            hint_time: 0,
            plaintext: None,
            dispute_outcome: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.key.id
    }

    pub fn plaintext(&self) -> Option<&Vec<u8>> {
        self.plaintext.as_ref()
    }

    pub fn succeeded(&self) -> bool {
        self.phase == UePhase::Done
    }

    pub fn refused(&self) -> bool {
        self.phase == UePhase::Refused
    }

    pub fn failed(&self) -> bool {
        self.phase == UePhase::Failed
    }

    pub fn dispute_outcome(&self) -> Option<Outcome> {
        self.dispute_outcome
    }

    /// Opens the session: fresh DH share, signed request, data deadline.
    pub fn start(&mut self, now: u64, rng: &mut impl Rng) -> StepOutput {
        let mut out = StepOutput::new();
        if self.phase != UePhase::Idle {
            return out;
        }
        let secret = DhExponent::random(rng);
        let share = dh_exp(&DhElement::generator(), &secret);
        self.dh_secret = Some(secret);
        self.session_start = now;
        let mut req = Req {
            ue: self.key.id.clone(),
            uav: self.cfg.uav.clone(),
            file_name: self.cfg.file_name.clone(),
            sent_at: now,
            dh_share: share,
            signature: placeholder_sig(),
        };
        req.signature = sign(&self.params, &self.key, &req.signed_input(), rng);
        out.event(format!("request sent uav={} file={}", self.cfg.uav, self.cfg.file_name));
        out.send_to(&self.cfg.uav.clone(), req.encode());
        out.timer(now + self.cfg.data_deadline_ms, TIMER_DATA_DEADLINE);
        self.phase = UePhase::AwaitData;
        out
    }

    pub fn on_message(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        rng: &mut impl Rng,
    ) -> StepOutput {
        let mut out = StepOutput::new();
        let msg = match SeddsMessage::decode(bytes) {
            Ok(m) => m,
            Err(_) => {
                let kind = crate::runtime::kind_name(bytes.first().copied().unwrap_or(0));
                out.reject(kind, from, "malformed");
                return out;
            }
        };
        match msg {
            SeddsMessage::Data(data) => self.handle_data(now, from, bytes, data, out, rng),
            SeddsMessage::KeyRelease(release) => {
                self.handle_key_release(now, from, bytes, release, out, rng)
            }
            _ => {
                let kind = crate::runtime::kind_name(bytes[0]);
                out.reject(kind, from, "unexpected-at-requester");
                out
            }
        }
    }

    fn handle_data(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        data: DataMsg,
        mut out: StepOutput,
        rng: &mut impl Rng,
    ) -> StepOutput {
        if self.phase != UePhase::AwaitData {
            out.reject("data", from, "unexpected-phase");
            return out;
        }
        if data.ue != self.key.id || data.uav != self.cfg.uav || data.file_name != self.cfg.file_name
        {
            out.reject("data", from, "wrong-recipient");
            return out;
        }
        if data.sent_at != self.session_start {
            out.reject("data", from, "session-mismatch");
            return out;
        }
        if !self.guard.fresh(now, data.sent_at) {
            out.reject("data", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("data", from, "duplicate");
            return out;
        }
        let Some(uav_pub) = self.dir.get(&self.cfg.uav).copied() else {
            out.reject("data", from, "unknown-sender");
            return out;
        };
        if !verify(&self.params, &self.cfg.uav, &uav_pub, &data.signed_input(), &data.signature) {
            out.reject("data", from, "bad-signature");
            return out;
        }
        out.event(format!("ciphertext received len={}", data.payload.len()));
        if self.cfg.refuse_hint {
            // free rider: walks away with an undecryptable ciphertext and
            // leaves no receipt, so no escrow ever opens
            out.event("receipt refused behavior=refuse-hint".to_owned());
            self.data_msg = Some(data);
            self.phase = UePhase::Refused;
            return out;
        }
        let mut hint = Hint {
            ue: self.key.id.clone(),
            uav: self.cfg.uav.clone(),
            file_name: self.cfg.file_name.clone(),
            receipt: Hint::receipt_for(&self.cfg.file_name, &data.payload),
            sent_at: now,
            signature: placeholder_sig(),
        };
        hint.signature = sign(&self.params, &self.key, &hint.signed_input(), rng);
        let percent = {
            let mut ausf = self.ausf.borrow_mut();
            ausf.prepay(&self.key.id, &self.cfg.file_name);
            ausf.prepay_percent
        };
        out.event(format!("prepaid percent={percent} file={}", self.cfg.file_name));
        out.event("receipt sent".to_owned());
        let wire = hint.encode();
        self.hint_bytes = Some(wire.clone());
        self.hint_time = now;
        self.data_msg = Some(data);
        out.send_to(&self.cfg.uav.clone(), wire);
        out.timer(now + self.cfg.key_deadline_ms, TIMER_KEY_DEADLINE);
        self.phase = UePhase::AwaitKey;
        out
    }

    fn handle_key_release(
        &mut self,
        _now: u64,
        from: &str,
        bytes: &[u8],
        release: KeyRelease,
        mut out: StepOutput,
        rng: &mut impl Rng,
    ) -> StepOutput {
        if self.phase != UePhase::AwaitKey {
            out.reject("key-release", from, "unexpected-phase");
            return out;
        }
        if release.ue != self.key.id
            || release.uav != self.cfg.uav
            || release.file_name != self.cfg.file_name
        {
            out.reject("key-release", from, "wrong-recipient");
            return out;
        }
        // no timestamp on a key release: it is bound to the session by the
        // names and is harmless to replay, so only deduplicate
        if !self.guard.first_sighting(bytes) {
            out.reject("key-release", from, "duplicate");
            return out;
        }
        let Some(uav_pub) = self.dir.get(&self.cfg.uav).copied() else {
            out.reject("key-release", from, "unknown-sender");
            return out;
        };
        if !verify(
            &self.params,
            &self.cfg.uav,
            &uav_pub,
            &release.signed_input(),
            &release.signature,
        ) {
            out.reject("key-release", from, "bad-signature");
            return out;
        }
        out.event("key received".to_owned());
        let secret = self.dh_secret.as_ref().expect("await-key implies a secret");
        let shared = dh_exp(&release.dh_share, secret);
        let content_key = h3(&shared.encode());
        let data = self.data_msg.as_ref().expect("await-key implies data");
        let plaintext =
            match sym_decrypt(&content_key, &data.payload, self.cfg.file_name.as_bytes()) {
                Ok(p) => p,
                Err(_) => {
                    out.event("content decrypt failed".to_owned());
                    self.dispute(&mut out);
                    self.phase = UePhase::Failed;
                    return out;
                }
            };
        let attestation = provider_attestation(&self.cfg.file_name, &plaintext);
        let provider_ok = self.dir.get(&data.provider).copied().is_some_and(|sp_pub| {
            verify(&self.params, &data.provider, &sp_pub, &attestation, &data.provider_sig)
        });
        if !provider_ok {
            out.event(format!("provider attestation failed origin={}", data.provider));
            self.dispute(&mut out);
            self.phase = UePhase::Failed;
            return out;
        }
        let digest = h3(&plaintext);
        out.event(format!(
            "content accepted len={} digest={}",
            plaintext.len(),
            short_digest(&digest)
        ));
        let mut ack = Ack {
            ue: self.key.id.clone(),
            uav: self.cfg.uav.clone(),
            file_name: self.cfg.file_name.clone(),
            proof: Ack::proof_for(&self.cfg.file_name, &plaintext),
            sent_at: self.hint_time,
            signature: placeholder_sig(),
        };
        ack.signature = sign(&self.params, &self.key, &ack.signed_input(), rng);
        out.event("ack sent".to_owned());
        out.send_to(&self.cfg.uav.clone(), ack.encode());
        self.plaintext = Some(plaintext);
        self.phase = UePhase::Done;
        out
    }

    /// Takes the signed receipt to the arbiter to recover the deposit.
    fn dispute(&mut self, out: &mut StepOutput) {
        let Some(hint_bytes) = self.hint_bytes.clone() else {
            out.event("dispute skipped reason=no-receipt".to_owned());
            return;
        };
        let verdict = self
            .ausf
            .borrow_mut()
            .adjudicate(&self.key.id, Claim::Failure { hint_bytes });
        out.event(format!("dispute outcome={} detail={}", verdict.outcome, verdict.detail));
        self.dispute_outcome = Some(verdict.outcome);
    }

    pub fn on_timer(&mut self, _now: u64, kind: u32, _rng: &mut impl Rng) -> StepOutput {
        let mut out = StepOutput::new();
        match kind {
            TIMER_DATA_DEADLINE if self.phase == UePhase::AwaitData => {
                // nothing was escrowed yet, so there is nothing to recover
                out.event("data deadline expired".to_owned());
                self.phase = UePhase::Failed;
            }
            TIMER_KEY_DEADLINE if self.phase == UePhase::AwaitKey => {
                out.event("key deadline expired".to_owned());
                self.dispute(&mut out);
                self.phase = UePhase::Failed;
            }
            TIMER_KEY_DEADLINE if self.phase == UePhase::Done && self.cfg.false_claim => {
                // the exchange finished, but this buyer tries to claw the
                // payment back anyway; by now the seller has long since
                // forwarded the ack, so the escrow is already settled
                out.event("false failure claim filed behavior=false-claim".to_owned());
                self.dispute(&mut out);
            }
            _ => {}
        }
        out
    }
}

/// A file the holder can resell: the content plus the provider's signature
/// over it, obtained when the holder itself downloaded the file.
#[derive(Debug, Clone)]
pub struct ResaleItem {
    pub provider: String,
    pub content: Vec<u8>,
    pub provider_sig: Signature,
}

/// Builds a resale item by having the provider attest the content.
pub fn resale_item(
    params: &SystemParams,
    provider: &FullKeyPair,
    file_name: &str,
    content: &[u8],
    rng: &mut impl Rng,
) -> ResaleItem {
    let provider_sig = sign(params, provider, &provider_attestation(file_name, content), rng);
    ResaleItem { provider: provider.id.clone(), content: content.to_vec(), provider_sig }
}

#[derive(Debug, Clone)]
pub struct UavConfig {
    pub freshness_window_ms: u64,
    pub ack_deadline_ms: u64,
    /// Cheating behavior: serve corrupted content under a valid session.
    pub tamper_content: bool,
    /// Cheating behavior: take the deposit context, never release the key,
    /// and later claim delivery with a self-signed acknowledgement.
    pub withhold_and_forge_ack: bool,
}

impl Default for UavConfig {
    fn default() -> Self {
        UavConfig {
            freshness_window_ms: crate::segds::DEFAULT_FRESHNESS_WINDOW_MS,
            ack_deadline_ms: DEFAULT_ACK_DEADLINE_MS,
            tamper_content: false,
            withhold_and_forge_ack: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UavState {
    AwaitHint,
    Withholding,
    AwaitAck,
    Done,
    Failed,
}

struct UavSession {
    ue: String,
    file_name: String,
    state: UavState,
    dh_public: DhElement,
    payload_digest: [u8; 32],
    hint_time: Option<u64>,
}

/// The holding device reselling provider-attested content.
pub struct Uav {
    params: SystemParams,
    key: FullKeyPair,
    cfg: UavConfig,
    dir: Directory,
    ausf: Rc<RefCell<AusfService>>,
    guard: Guardrails,
    items: BTreeMap<String, ResaleItem>,
    /// Sessions keyed by (requester, file, request timestamp).
    sessions: BTreeMap<(String, String, u64), UavSession>,
    ack_timer_queue: VecDeque<(String, String, u64)>,
    claim_outcomes: Vec<Outcome>,
}

impl Uav {
    pub fn new(
        params: SystemParams,
        key: FullKeyPair,
        cfg: UavConfig,
        dir: Directory,
        items: BTreeMap<String, ResaleItem>,
        ausf: Rc<RefCell<AusfService>>,
    ) -> Self {
        let window = cfg.freshness_window_ms;
        Uav {
            params,
            key,
            cfg,
            dir,
            ausf,
            guard: Guardrails::new(window),
            items,
            sessions: BTreeMap::new(),
            ack_timer_queue: VecDeque::new(),
            claim_outcomes: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.key.id
    }

    pub fn claim_outcomes(&self) -> &[Outcome] {
        &self.claim_outcomes
    }

    pub fn on_message(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        rng: &mut impl Rng,
    ) -> StepOutput {
        let mut out = StepOutput::new();
        let msg = match SeddsMessage::decode(bytes) {
            Ok(m) => m,
            Err(_) => {
                let kind = crate::runtime::kind_name(bytes.first().copied().unwrap_or(0));
                out.reject(kind, from, "malformed");
                return out;
            }
        };
        match msg {
            SeddsMessage::Req(req) => self.handle_req(now, from, bytes, req, out, rng),
            SeddsMessage::Hint(hint) => self.handle_hint(now, from, bytes, hint, out, rng),
            SeddsMessage::Ack(ack) => self.handle_ack(now, from, bytes, ack, out),
            _ => {
                let kind = crate::runtime::kind_name(bytes[0]);
                out.reject(kind, from, "unexpected-at-holder");
                out
            }
        }
    }

    fn handle_req(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        req: Req,
        mut out: StepOutput,
        rng: &mut impl Rng,
    ) -> StepOutput {
        if req.uav != self.key.id {
            out.reject("request", from, "wrong-recipient");
            return out;
        }
        if !self.guard.fresh(now, req.sent_at) {
            out.reject("request", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("request", from, "duplicate");
            return out;
        }
        let session_key = (req.ue.clone(), req.file_name.clone(), req.sent_at);
        if self.sessions.contains_key(&session_key) {
            out.reject("request", from, "duplicate");
            return out;
        }
        let Some(ue_pub) = self.dir.get(&req.ue).copied() else {
            out.reject("request", from, "unknown-sender");
            return out;
        };
        if !verify(&self.params, &req.ue, &ue_pub, &req.signed_input(), &req.signature) {
            out.reject("request", from, "bad-signature");
            return out;
        }
        let Some(item) = self.items.get(&req.file_name) else {
            out.reject("request", from, "unknown-file");
            return out;
        };

        let secret = DhExponent::random(rng);
        let dh_public = dh_exp(&DhElement::generator(), &secret);
        let shared = dh_exp(&req.dh_share, &secret);
        let content_key = h3(&shared.encode());

        let mut content = item.content.clone();
        if self.cfg.tamper_content && !content.is_empty() {
            content[0] ^= 0xFF;
            out.event("content tampered behavior=tamper-content".to_owned());
        }
        let payload = sym_encrypt(&content_key, &content, req.file_name.as_bytes(), rng);
        let payload_digest = h3(&payload);
        let mut data = DataMsg {
            uav: self.key.id.clone(),
            ue: req.ue.clone(),
            provider: item.provider.clone(),
            file_name: req.file_name.clone(),
            sent_at: req.sent_at,
            payload,
            provider_sig: item.provider_sig.clone(),
            signature: placeholder_sig(),
        };
        data.signature = sign(&self.params, &self.key, &data.signed_input(), rng);
        out.event(format!("ciphertext sent ue={} len={}", req.ue, data.payload.len()));
        out.send_to(&req.ue, data.encode_with_span());
        self.sessions.insert(
            session_key,
            UavSession {
                ue: req.ue,
                file_name: req.file_name,
                state: UavState::AwaitHint,
                dh_public,
                payload_digest,
                hint_time: None,
            },
        );
        out
    }

    /// Latest session for (requester, file) in the given state; sessions
    /// are keyed by request timestamp, so "latest" is the max key.
    fn find_session_key(
        &self,
        ue: &str,
        file_name: &str,
        state: UavState,
    ) -> Option<(String, String, u64)> {
        self.sessions
            .iter()
            .filter(|(_, s)| s.ue == ue && s.file_name == file_name && s.state == state)
            .map(|(k, _)| k.clone())
            .next_back()
    }

    fn handle_hint(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        hint: Hint,
        mut out: StepOutput,
        rng: &mut impl Rng,
    ) -> StepOutput {
        if hint.uav != self.key.id {
            out.reject("hint", from, "wrong-recipient");
            return out;
        }
        if !self.guard.fresh(now, hint.sent_at) {
            out.reject("hint", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("hint", from, "duplicate");
            return out;
        }
        let Some(ue_pub) = self.dir.get(&hint.ue).copied() else {
            out.reject("hint", from, "unknown-sender");
            return out;
        };
        if !verify(&self.params, &hint.ue, &ue_pub, &hint.signed_input(), &hint.signature) {
            out.reject("hint", from, "bad-signature");
            return out;
        }
        let Some(key) = self.find_session_key(&hint.ue, &hint.file_name, UavState::AwaitHint)
        else {
            out.reject("hint", from, "unknown-session");
            return out;
        };
        let session = self.sessions.get_mut(&key).expect("key just found");
        let expected =
            crate::crypto::hashes::xor32(&h3(hint.file_name.as_bytes()), &session.payload_digest);
        if hint.receipt != expected {
            out.reject("hint", from, "receipt-mismatch");
            return out;
        }
        session.hint_time = Some(hint.sent_at);
        if self.cfg.withhold_and_forge_ack {
            session.state = UavState::Withholding;
            out.event("key withheld behavior=withhold-and-forge-ack".to_owned());
            out.timer(now + self.cfg.ack_deadline_ms, TIMER_ACK_DEADLINE);
            self.ack_timer_queue.push_back(key);
            return out;
        }
        let mut release = KeyRelease {
            uav: self.key.id.clone(),
            ue: session.ue.clone(),
            file_name: session.file_name.clone(),
            dh_share: session.dh_public.clone(),
            signature: placeholder_sig(),
        };
        session.state = UavState::AwaitAck;
        let to = session.ue.clone();
        release.signature = sign(&self.params, &self.key, &release.signed_input(), rng);
        out.event("key released".to_owned());
        out.send_to(&to, release.encode());
        out
    }

    fn handle_ack(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        ack: Ack,
        mut out: StepOutput,
    ) -> StepOutput {
        if ack.uav != self.key.id {
            out.reject("ack", from, "wrong-recipient");
            return out;
        }
        if !self.guard.fresh(now, ack.sent_at) {
            out.reject("ack", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("ack", from, "duplicate");
            return out;
        }
        let Some(key) = self.find_session_key(&ack.ue, &ack.file_name, UavState::AwaitAck) else {
            out.reject("ack", from, "unknown-session");
            return out;
        };
        let session = self.sessions.get_mut(&key).expect("key just found");
        if session.hint_time != Some(ack.sent_at) {
            out.reject("ack", from, "session-mismatch");
            return out;
        }
        // the ack is forwarded to the arbiter as-is; the holder does not
        // verify it — the arbiter does, at its own expense
        session.state = UavState::Done;
        out.event("ack forwarded claim=delivery".to_owned());
        let verdict = self
            .ausf
            .borrow_mut()
            .adjudicate(&self.key.id, Claim::Delivery { ack_bytes: bytes.to_vec() });
        out.event(format!("claim outcome={} detail={}", verdict.outcome, verdict.detail));
        self.claim_outcomes.push(verdict.outcome);
        out
    }

    pub fn on_timer(&mut self, _now: u64, kind: u32, rng: &mut impl Rng) -> StepOutput {
        let mut out = StepOutput::new();
        if kind != TIMER_ACK_DEADLINE {
            return out;
        }
        let Some(session_key) = self.ack_timer_queue.pop_front() else {
            return out;
        };
        let Some(session) = self.sessions.get_mut(&session_key) else {
            return out;
        };
        if session.state != UavState::Withholding {
            return out;
        }
        // forge the strongest acknowledgement available without the
        // requester's key: correct proof, wrong signer
        let item = self.items.get(&session.file_name).expect("session implies item");
        let mut forged = Ack {
            ue: session.ue.clone(),
            uav: self.key.id.clone(),
            file_name: session.file_name.clone(),
            proof: Ack::proof_for(&session.file_name, &item.content),
            sent_at: session.hint_time.unwrap_or(0),
            signature: placeholder_sig(),
        };
        forged.signature = sign(&self.params, &self.key, &forged.signed_input(), rng);
        session.state = UavState::Failed;
        out.event("ack forged behavior=withhold-and-forge-ack".to_owned());
        let verdict = self
            .ausf
            .borrow_mut()
            .adjudicate(&self.key.id, Claim::Delivery { ack_bytes: forged.encode() });
        out.event(format!("claim outcome={} detail={}", verdict.outcome, verdict.detail));
        self.claim_outcomes.push(verdict.outcome);
        out
    }
}
