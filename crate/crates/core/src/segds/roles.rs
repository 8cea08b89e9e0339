//! Group-download state machines: coordinator, member, provider.
//!
//! The coordinator negotiates a session key with the provider over signed
//! DH shares, splits the file, and assigns ranges. Members forward their
//! signed assignment to the provider as fetch authorization, re-broadcast
//! the encrypted segment to the whole group under their own signature, and
//! reassemble once the coordinator releases the session key to the
//! well-behaved subset. Silent members are blacklisted at the round
//! deadline and their ranges re-split across survivors.
//!
//! Every receiver applies the same guardrails in order: freshness window,
//! duplicate suppression, then signature checks — so a stale or replayed
//! frame is dropped before any expensive verification.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use rand_core::Rng;

use crate::crypto::aead::{sym_decrypt, sym_encrypt};
use crate::crypto::dh::{dh_exp, DhElement, DhExponent};
use crate::crypto::hashes::h3;
use crate::mre::{mre_decrypt, mre_encrypt, MreError};
use crate::pki::{derive_verify_key, Directory, FullKeyPair, KgcState, SystemParams, VerifyKey};
use crate::runtime::{Guardrails, StepOutput};
use crate::signcrypt::{sign, verify};

use super::messages::*;
use super::plan::{split_span, Assignment, ByteRange, SegmentPlan};

pub const DEFAULT_FRESHNESS_WINDOW_MS: u64 = 30_000;
pub const DEFAULT_TASK_DEADLINE_MS: u64 = 10_000;

/// Static description of one download group.
#[derive(Debug, Clone)]
pub struct GroupConfig {
    pub coordinator: String,
    /// Group members, excluding the coordinator.
    pub members: Vec<String>,
    pub provider: String,
    pub file_name: String,
    /// Optional per-downloader weights (coordinator first, then members in
    /// order). Unset means an equal split.
    pub weights: Option<Vec<u64>>,
    pub freshness_window_ms: u64,
    pub task_deadline_ms: u64,
    /// Reassignment rounds allowed before aborting.
    pub max_rounds: u32,
}

impl GroupConfig {
    pub fn new(coordinator: &str, members: &[String], provider: &str, file_name: &str) -> Self {
        GroupConfig {
            coordinator: coordinator.to_owned(),
            members: members.to_vec(),
            provider: provider.to_owned(),
            file_name: file_name.to_owned(),
            weights: None,
            freshness_window_ms: DEFAULT_FRESHNESS_WINDOW_MS,
            task_deadline_ms: DEFAULT_TASK_DEADLINE_MS,
            max_rounds: (members.len() + 1) as u32,
        }
    }

    /// All downloaders: the coordinator first, then members in order.
    pub fn downloaders(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.members.len() + 1);
        out.push(self.coordinator.clone());
        out.extend(self.members.iter().cloned());
        out
    }

    pub fn group_size(&self) -> usize {
        self.members.len() + 1
    }

    fn weight_of(&self, id: &str) -> u64 {
        match &self.weights {
            None => 1,
            Some(w) => self
                .downloaders()
                .iter()
                .position(|d| d == id)
                .and_then(|i| w.get(i).copied())
                .unwrap_or(1),
        }
    }
}

/// Associated data binding a segment ciphertext to its session and place.
pub fn segment_aad(coordinator: &str, file_name: &str, range: &ByteRange) -> Vec<u8> {
    let mut out = Vec::with_capacity(coordinator.len() + file_name.len() + 18);
    out.extend_from_slice(&(coordinator.len() as u16).to_be_bytes());
    out.extend_from_slice(coordinator.as_bytes());
    out.extend_from_slice(file_name.as_bytes());
    out.extend_from_slice(&range.encode());
    out
}

fn short_digest(d: &[u8; 32]) -> String {
    hex_lower(&d[..8])
}

fn hex_lower(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Decrypts and reassembles the file described by `plan` from verified
/// segments, or explains what is missing.
fn reconstruct(
    session_key: &[u8; 32],
    coordinator: &str,
    plan: &SegmentPlan,
    shares: &BTreeMap<(String, u64), SegmentMsg>,
) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    for a in &plan.assignments {
        let segment = shares
            .get(&(a.member.clone(), a.range.start))
            .ok_or_else(|| format!("missing-share origin={} range={}", a.member, a.range))?;
        if segment.range != a.range {
            return Err(format!("range-mismatch origin={} range={}", a.member, a.range));
        }
        let aad = segment_aad(coordinator, &plan.file_name, &a.range);
        let piece = sym_decrypt(session_key, &segment.payload, &aad)
            .map_err(|_| format!("segment-decrypt-failed origin={} range={}", a.member, a.range))?;
        if piece.len() as u64 != a.range.len {
            return Err(format!("length-mismatch origin={} range={}", a.member, a.range));
        }
        out.extend_from_slice(&piece);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ChPhase {
    Idle,
    AwaitAnswer,
    Collecting,
    Done,
    Aborted,
}

#[derive(Debug, Clone)]
struct Slot {
    member: String,
    range: ByteRange,
    done: bool,
}

/// Group head: owns the session, the plan, and the blacklist decisions.
pub struct Coordinator {
    params: SystemParams,
    key: FullKeyPair,
    cfg: GroupConfig,
    dir: Directory,
    kgc: Option<Rc<RefCell<KgcState>>>,
    guard: Guardrails,
    dh_secret: DhExponent,
    dh_share: DhElement,
    phase: ChPhase,
    file_size: Option<u64>,
    session_key: Option<[u8; 32]>,
    round: u32,
    slots: Vec<Slot>,
    shares: BTreeMap<(String, u64), SegmentMsg>,
    share_msgs: BTreeMap<(String, u64), ShareMsg>,
    blacklist: BTreeSet<String>,
    vk_cache: BTreeMap<String, VerifyKey>,
    reconstructed: Option<Vec<u8>>,
}

impl Coordinator {
    /// Builds the coordinator; the DH share is precomputed here, during
    /// session start-up, like key registration.
    pub fn new(
        params: SystemParams,
        key: FullKeyPair,
        cfg: GroupConfig,
        dir: Directory,
        kgc: Option<Rc<RefCell<KgcState>>>,
        rng: &mut impl Rng,
    ) -> Self {
        let window = cfg.freshness_window_ms;
        let dh_secret = DhExponent::random(rng);
        let dh_share = dh_exp(&DhElement::generator(), &dh_secret);
        Coordinator {
            params,
            key,
            cfg,
            dir,
            kgc,
            guard: Guardrails::new(window),
            dh_secret,
            dh_share,
            phase: ChPhase::Idle,
            file_size: None,
            session_key: None,
            round: 0,
            slots: Vec::new(),
            shares: BTreeMap::new(),
            share_msgs: BTreeMap::new(),
            blacklist: BTreeSet::new(),
            vk_cache: BTreeMap::new(),
            reconstructed: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.key.id
    }

    pub fn session_established(&self) -> bool {
        self.session_key.is_some()
    }

    pub fn blacklist(&self) -> &BTreeSet<String> {
        &self.blacklist
    }

    pub fn reconstructed(&self) -> Option<&Vec<u8>> {
        self.reconstructed.as_ref()
    }

    pub fn completed(&self) -> bool {
        self.phase == ChPhase::Done
    }

    pub fn aborted(&self) -> bool {
        self.phase == ChPhase::Aborted
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    /// Kicks off the session: sends the signed DH share to the provider.
    pub fn start(&mut self, now: u64, rng: &mut impl Rng) -> StepOutput {
        let mut out = StepOutput::new();
        if self.phase != ChPhase::Idle {
            return out;
        }
        let mut offer = SetupOffer {
            coordinator: self.key.id.clone(),
            provider: self.cfg.provider.clone(),
            file_name: self.cfg.file_name.clone(),
            dh_share: self.dh_share.clone(),
            sent_at: now,
            signature: crate::signcrypt::Signature {
                commitment: crate::crypto::group::GroupElement::identity(),
                response: crate::crypto::group::Scalar::zero(),
            },
        };
        offer.signature = sign(&self.params, &self.key, &offer.signed_input(), rng);
        out.event(format!(
            "setup-offer sent provider={} file={}",
            self.cfg.provider, self.cfg.file_name
        ));
        out.send_to(&self.cfg.provider.clone(), offer.encode());
        self.phase = ChPhase::AwaitAnswer;
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
        let msg = match SegdsMessage::decode(bytes) {
            Ok(m) => m,
            Err(_) => {
                let kind = crate::runtime::kind_name(bytes.first().copied().unwrap_or(0));
                out.reject(kind, from, "malformed");
                return out;
            }
        };
        match msg {
            SegdsMessage::SetupAnswer(answer) => {
                self.handle_answer(now, from, bytes, answer, out, rng)
            }
            SegdsMessage::Segment(segment) => {
                self.handle_own_segment(now, from, bytes, segment, out, rng)
            }
            SegdsMessage::Share(share) => self.handle_share(now, from, bytes, share, out, rng),
            other => {
                let kind = match other {
                    SegdsMessage::SetupOffer(_) => "setup-offer",
                    SegdsMessage::Assign(_) => "assign",
                    SegdsMessage::Consolidate(_) => "consolidate",
                    _ => "unknown",
                };
                out.reject(kind, from, "unexpected-at-coordinator");
                out
            }
        }
    }

    fn handle_answer(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        answer: SetupAnswer,
        mut out: StepOutput,
        rng: &mut impl Rng,
    ) -> StepOutput {
        if self.phase != ChPhase::AwaitAnswer {
            out.reject("setup-answer", from, "unexpected-phase");
            return out;
        }
        if answer.provider != self.cfg.provider
            || answer.coordinator != self.key.id
            || answer.file_name != self.cfg.file_name
        {
            out.reject("setup-answer", from, "wrong-recipient");
            return out;
        }
        if !self.guard.fresh(now, answer.sent_at) {
            out.reject("setup-answer", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("setup-answer", from, "duplicate");
            return out;
        }
        let Some(sp_pub) = self.dir.get(&self.cfg.provider).copied() else {
            out.reject("setup-answer", from, "unknown-sender");
            return out;
        };
        if !verify(&self.params, &self.cfg.provider, &sp_pub, &answer.signed_input(), &answer.signature)
        {
            out.reject("setup-answer", from, "bad-signature");
            return out;
        }
        let shared = dh_exp(&answer.dh_share, &self.dh_secret);
        self.session_key = Some(h3(&shared.encode()));
        self.file_size = Some(answer.file_size);
        out.event(format!("session established file-size={}", answer.file_size));

        // initial plan and round-1 assignments
        let downloaders: Vec<(String, u64)> = self
            .cfg
            .downloaders()
            .iter()
            .map(|d| (d.clone(), self.cfg.weight_of(d)))
            .collect();
        let plan =
            SegmentPlan::weighted_split(&self.cfg.file_name, answer.file_size, &downloaders);
        self.slots = plan
            .assignments
            .iter()
            .map(|a| Slot { member: a.member.clone(), range: a.range, done: false })
            .collect();
        self.round = 1;
        self.phase = ChPhase::Collecting;
        self.issue_assignments(now, None, &mut out, rng);
        out.timer(now + self.cfg.task_deadline_ms, self.round);
        out
    }

    /// Signs and sends assignment messages for every undone slot, or only
    /// for the slots named in `only` (fresh reassignments).
    fn issue_assignments(
        &mut self,
        now: u64,
        only: Option<&BTreeSet<(String, u64)>>,
        out: &mut StepOutput,
        rng: &mut impl Rng,
    ) {
        let digest = self.current_plan().digest();
        let slots: Vec<(String, ByteRange)> = self
            .slots
            .iter()
            .filter(|s| !s.done)
            .filter(|s| only.is_none_or(|set| set.contains(&(s.member.clone(), s.range.start))))
            .map(|s| (s.member.clone(), s.range))
            .collect();
        for (member, range) in slots {
            let mut msg = AssignMsg {
                coordinator: self.key.id.clone(),
                member: member.clone(),
                file_name: self.cfg.file_name.clone(),
                range,
                sent_at: now,
                plan_digest: digest,
                signature: crate::signcrypt::Signature {
                    commitment: crate::crypto::group::GroupElement::identity(),
                    response: crate::crypto::group::Scalar::zero(),
                },
            };
            msg.signature = sign(&self.params, &self.key, &msg.signed_input(), rng);
            if member == self.key.id {
                out.event(format!("fetch own range={range} round={}", self.round));
                out.send_to(&self.cfg.provider.clone(), msg.encode());
            } else {
                out.event(format!("assign member={member} range={range} round={}", self.round));
                out.send_to(&member, msg.encode());
            }
        }
    }

    /// The current full plan: all slots in byte order.
    fn current_plan(&self) -> SegmentPlan {
        let mut assignments: Vec<Assignment> = self
            .slots
            .iter()
            .map(|s| Assignment { member: s.member.clone(), range: s.range })
            .collect();
        assignments.sort_by_key(|a| a.range.start);
        SegmentPlan { file_name: self.cfg.file_name.clone(), assignments }
    }

    fn handle_own_segment(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        segment: SegmentMsg,
        mut out: StepOutput,
        rng: &mut impl Rng,
    ) -> StepOutput {
        if self.phase != ChPhase::Collecting {
            out.reject("segment", from, "unexpected-phase");
            return out;
        }
        if segment.member != self.key.id
            || segment.provider != self.cfg.provider
            || segment.file_name != self.cfg.file_name
        {
            out.reject("segment", from, "wrong-recipient");
            return out;
        }
        if !self.guard.fresh(now, segment.sent_at) {
            out.reject("segment", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("segment", from, "duplicate");
            return out;
        }
        let matching = self
            .slots
            .iter()
            .any(|s| s.member == self.key.id && s.range == segment.range && !s.done);
        if !matching {
            out.reject("segment", from, "no-matching-assignment");
            return out;
        }
        let sp_pub = match self.dir.get(&self.cfg.provider) {
            Some(pk) => *pk,
            None => {
                out.reject("segment", from, "unknown-sender");
                return out;
            }
        };
        if !verify(&self.params, &self.cfg.provider, &sp_pub, &segment.signed_input(), &segment.signature)
        {
            out.reject("segment", from, "bad-signature");
            return out;
        }
        let mut share = ShareMsg {
            segment: segment.clone(),
            completed_at: now,
            signature: crate::signcrypt::Signature {
                commitment: crate::crypto::group::GroupElement::identity(),
                response: crate::crypto::group::Scalar::zero(),
            },
        };
        share.signature = sign(&self.params, &self.key, &share.signed_input(), rng);
        out.event(format!("share broadcast range={}", segment.range));
        out.broadcast(self.cfg.members.clone(), share.encode());
        self.store_share(self.key.id.clone(), share);
        self.after_progress(now, &mut out, rng);
        out
    }

    fn handle_share(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        share: ShareMsg,
        mut out: StepOutput,
        rng: &mut impl Rng,
    ) -> StepOutput {
        if self.phase != ChPhase::Collecting {
            out.reject("share", from, "unexpected-phase");
            return out;
        }
        let origin = share.segment.member.clone();
        if !self.guard.fresh(now, share.completed_at) {
            out.reject("share", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("share", from, "duplicate");
            return out;
        }
        if !self.cfg.members.contains(&origin) {
            out.reject("share", from, "unknown-sender");
            return out;
        }
        if self.blacklist.contains(&origin) {
            out.reject("share", from, "blacklisted-origin");
            return out;
        }
        if share.segment.file_name != self.cfg.file_name
            || share.segment.provider != self.cfg.provider
        {
            out.reject("share", from, "wrong-file");
            return out;
        }
        let Some(origin_pub) = self.dir.get(&origin).copied() else {
            out.reject("share", from, "unknown-sender");
            return out;
        };
        if !verify(&self.params, &origin, &origin_pub, &share.signed_input(), &share.signature) {
            out.reject("share", from, "bad-signature");
            return out;
        }
        let sp_pub = match self.dir.get(&self.cfg.provider) {
            Some(pk) => *pk,
            None => {
                out.reject("share", from, "unknown-sender");
                return out;
            }
        };
        if !verify(
            &self.params,
            &self.cfg.provider,
            &sp_pub,
            &share.segment.signed_input(),
            &share.segment.signature,
        ) {
            out.reject("share", from, "bad-provider-signature");
            return out;
        }
        let matching = self
            .slots
            .iter()
            .any(|s| s.member == origin && s.range == share.segment.range && !s.done);
        if !matching {
            out.reject("share", from, "no-matching-assignment");
            return out;
        }
        out.event(format!("share stored origin={origin} range={}", share.segment.range));
        self.store_share(origin, share);
        self.after_progress(now, &mut out, rng);
        out
    }

    fn store_share(&mut self, origin: String, share: ShareMsg) {
        for slot in &mut self.slots {
            if slot.member == origin && slot.range == share.segment.range {
                slot.done = true;
            }
        }
        let key = (origin, share.segment.range.start);
        self.shares.insert(key.clone(), share.segment.clone());
        self.share_msgs.insert(key, share);
    }

    fn after_progress(&mut self, now: u64, out: &mut StepOutput, rng: &mut impl Rng) {
        if self.slots.iter().all(|s| s.done) {
            self.consolidate(now, out, rng);
        }
    }

    fn consolidate(&mut self, now: u64, out: &mut StepOutput, rng: &mut impl Rng) {
        let session_key = self.session_key.expect("collecting implies session key");
        let mut recipients: Vec<(String, VerifyKey)> = Vec::new();
        for m in &self.cfg.members {
            if self.blacklist.contains(m) {
                continue;
            }
            let vk = match self.vk_cache.get(m) {
                Some(vk) => *vk,
                None => {
                    let vk = derive_verify_key(
                        &self.params,
                        m,
                        self.dir.get(m).expect("members are enrolled"),
                    );
                    self.vk_cache.insert(m.clone(), vk);
                    vk
                }
            };
            recipients.push((m.clone(), vk));
        }
        let plan = self.current_plan();
        let key_box = match mre_encrypt(&self.params, &recipients, &self.blacklist, &session_key, rng)
        {
            Ok(ct) => ct,
            Err(MreError::EmptyRecipientSet) => {
                // nobody left to serve: the coordinator still finishes its
                // own reconstruction below, but no release goes out
                out.event("consolidate skipped reason=no-eligible-members".to_owned());
                self.finish_own_reconstruction(&session_key, &plan, out);
                self.phase = ChPhase::Done;
                return;
            }
            Err(_) => unreachable!("mre_encrypt only fails on empty recipient sets"),
        };
        let mut msg = ConsolidateMsg {
            key_box,
            finalized_at: now,
            plan: plan.clone(),
            signature: crate::signcrypt::Signature {
                commitment: crate::crypto::group::GroupElement::identity(),
                response: crate::crypto::group::Scalar::zero(),
            },
        };
        msg.signature = sign(&self.params, &self.key, &msg.signed_input(), rng);
        out.event(format!(
            "consolidate recipients={} excluded={}",
            recipients.len(),
            self.blacklist.len()
        ));
        out.broadcast(self.cfg.members.clone(), msg.encode());
        self.finish_own_reconstruction(&session_key, &plan, out);
        self.phase = ChPhase::Done;
    }

    fn finish_own_reconstruction(
        &mut self,
        session_key: &[u8; 32],
        plan: &SegmentPlan,
        out: &mut StepOutput,
    ) {
        match reconstruct(session_key, &self.key.id, plan, &self.shares) {
            Ok(file) => {
                let digest = h3(&file);
                out.event(format!(
                    "reconstructed len={} digest={}",
                    file.len(),
                    short_digest(&digest)
                ));
                self.reconstructed = Some(file);
            }
            Err(reason) => out.event(format!("reconstruct failed {reason}")),
        }
    }

    pub fn on_timer(&mut self, now: u64, kind: u32, rng: &mut impl Rng) -> StepOutput {
        let mut out = StepOutput::new();
        if self.phase != ChPhase::Collecting || kind != self.round {
            return out; // stale timer
        }
        let missing: Vec<(String, ByteRange)> = self
            .slots
            .iter()
            .filter(|s| !s.done)
            .map(|s| (s.member.clone(), s.range))
            .collect();
        if missing.is_empty() {
            return out;
        }
        out.event(format!("deadline expired round={} missing={}", self.round, missing.len()));

        let offenders: BTreeSet<String> = missing
            .iter()
            .map(|(m, _)| m.clone())
            .filter(|m| *m != self.key.id)
            .collect();
        for offender in &offenders {
            self.blacklist.insert(offender.clone());
            if let Some(kgc) = &self.kgc {
                kgc.borrow_mut().report_offense(offender);
            }
            out.event(format!("blacklist member={offender} round={}", self.round));
        }

        if self.round >= self.cfg.max_rounds {
            self.phase = ChPhase::Aborted;
            out.event(format!("abort reason=round-limit round={}", self.round));
            return out;
        }

        let survivors: Vec<(String, u64)> = self
            .cfg
            .downloaders()
            .into_iter()
            .filter(|d| !self.blacklist.contains(d))
            .map(|d| {
                let w = self.cfg.weight_of(&d);
                (d, w)
            })
            .collect();
        if survivors.is_empty() {
            self.phase = ChPhase::Aborted;
            out.event("abort reason=no-eligible-members".to_owned());
            return out;
        }

        self.round += 1;
        let mut fresh: BTreeSet<(String, u64)> = BTreeSet::new();
        for (owner, range) in missing {
            if offenders.contains(&owner) {
                // re-split the offender's range across survivors
                self.slots.retain(|s| !(s.member == owner && s.range == range));
                for part in split_span(range.start, range.len, &survivors) {
                    out.event(format!(
                        "reassign range={} to={} round={}",
                        part.range, part.member, self.round
                    ));
                    fresh.insert((part.member.clone(), part.range.start));
                    self.slots.push(Slot { member: part.member, range: part.range, done: false });
                }
            } else {
                // own slot still outstanding (lost reply): fetch again
                fresh.insert((owner, range.start));
            }
        }
        self.issue_assignments(now, Some(&fresh), &mut out, rng);
        out.timer(now + self.cfg.task_deadline_ms, self.round);
        out
    }
}

/// Ordinary group member.
pub struct Member {
    params: SystemParams,
    key: FullKeyPair,
    cfg: GroupConfig,
    dir: Directory,
    guard: Guardrails,
    /// Free-rider behavior: do none of the assigned work (ignore
    /// assignments and peer shares) but still try to collect the final
    /// key release.
    pub silent: bool,
    /// Active assignments by range start.
    assignments: BTreeMap<u64, AssignMsg>,
    fetched: BTreeSet<u64>,
    shares: BTreeMap<(String, u64), SegmentMsg>,
    session_key: Option<[u8; 32]>,
    plan: Option<SegmentPlan>,
    excluded: bool,
    reconstructed: Option<Vec<u8>>,
}

impl Member {
    pub fn new(params: SystemParams, key: FullKeyPair, cfg: GroupConfig, dir: Directory) -> Self {
        let window = cfg.freshness_window_ms;
        Member {
            params,
            key,
            cfg,
            dir,
            guard: Guardrails::new(window),
            silent: false,
            assignments: BTreeMap::new(),
            fetched: BTreeSet::new(),
            shares: BTreeMap::new(),
            session_key: None,
            plan: None,
            excluded: false,
            reconstructed: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.key.id
    }

    pub fn reconstructed(&self) -> Option<&Vec<u8>> {
        self.reconstructed.as_ref()
    }

    pub fn excluded(&self) -> bool {
        self.excluded
    }

    pub fn session_key_received(&self) -> bool {
        self.session_key.is_some()
    }

    /// The data key this member ended the session with, if it was included
    /// in the key release.
    pub fn session_key(&self) -> Option<[u8; 32]> {
        self.session_key
    }

    pub fn on_message(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        rng: &mut impl Rng,
    ) -> StepOutput {
        let mut out = StepOutput::new();
        if self.silent && bytes.first() != Some(&TAG_CONSOLIDATE) {
            return out;
        }
        let msg = match SegdsMessage::decode(bytes) {
            Ok(m) => m,
            Err(_) => {
                let kind = crate::runtime::kind_name(bytes.first().copied().unwrap_or(0));
                out.reject(kind, from, "malformed");
                return out;
            }
        };
        match msg {
            SegdsMessage::Assign(assign) => self.handle_assign(now, from, bytes, assign, out),
            SegdsMessage::Segment(segment) => {
                self.handle_segment(now, from, bytes, segment, out, rng)
            }
            SegdsMessage::Share(share) => self.handle_peer_share(now, from, bytes, share, out),
            SegdsMessage::Consolidate(consolidate) => {
                self.handle_consolidate(now, from, bytes, consolidate, out)
            }
            SegdsMessage::SetupOffer(_) => {
                out.reject("setup-offer", from, "unexpected-at-member");
                out
            }
            SegdsMessage::SetupAnswer(_) => {
                out.reject("setup-answer", from, "unexpected-at-member");
                out
            }
        }
    }

    fn handle_assign(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        assign: AssignMsg,
        mut out: StepOutput,
    ) -> StepOutput {
        if assign.member != self.key.id {
            out.reject("assign", from, "wrong-recipient");
            return out;
        }
        if assign.coordinator != self.cfg.coordinator || assign.file_name != self.cfg.file_name {
            out.reject("assign", from, "wrong-file");
            return out;
        }
        if !self.guard.fresh(now, assign.sent_at) {
            out.reject("assign", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("assign", from, "duplicate");
            return out;
        }
        let Some(ch_pub) = self.dir.get(&self.cfg.coordinator).copied() else {
            out.reject("assign", from, "unknown-sender");
            return out;
        };
        if !verify(&self.params, &self.cfg.coordinator, &ch_pub, &assign.signed_input(), &assign.signature)
        {
            out.reject("assign", from, "bad-signature");
            return out;
        }
        out.event(format!("assignment accepted range={}", assign.range));
        // forward the coordinator's exact signed assignment as fetch
        // authorization
        let wire = assign.encode();
        self.assignments.insert(assign.range.start, assign);
        out.send_to(&self.cfg.provider.clone(), wire);
        out
    }

    fn handle_segment(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        segment: SegmentMsg,
        mut out: StepOutput,
        rng: &mut impl Rng,
    ) -> StepOutput {
        if segment.member != self.key.id
            || segment.provider != self.cfg.provider
            || segment.file_name != self.cfg.file_name
        {
            out.reject("segment", from, "wrong-recipient");
            return out;
        }
        if !self.guard.fresh(now, segment.sent_at) {
            out.reject("segment", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("segment", from, "duplicate");
            return out;
        }
        let expected = self.assignments.get(&segment.range.start);
        let matching = expected.map(|a| a.range == segment.range).unwrap_or(false)
            && !self.fetched.contains(&segment.range.start);
        if !matching {
            out.reject("segment", from, "no-matching-assignment");
            return out;
        }
        let Some(sp_pub) = self.dir.get(&self.cfg.provider).copied() else {
            out.reject("segment", from, "unknown-sender");
            return out;
        };
        if !verify(&self.params, &self.cfg.provider, &sp_pub, &segment.signed_input(), &segment.signature)
        {
            out.reject("segment", from, "bad-signature");
            return out;
        }
        self.fetched.insert(segment.range.start);
        out.event(format!("segment fetched range={}", segment.range));

        let mut share = ShareMsg {
            segment: segment.clone(),
            completed_at: now,
            signature: crate::signcrypt::Signature {
                commitment: crate::crypto::group::GroupElement::identity(),
                response: crate::crypto::group::Scalar::zero(),
            },
        };
        share.signature = sign(&self.params, &self.key, &share.signed_input(), rng);
        self.shares.insert((self.key.id.clone(), segment.range.start), segment.clone());
        out.event(format!("share broadcast range={}", segment.range));
        let recipients: Vec<String> = self
            .cfg
            .downloaders()
            .into_iter()
            .filter(|d| *d != self.key.id)
            .collect();
        out.broadcast(recipients, share.encode());
        out
    }

    fn handle_peer_share(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        share: ShareMsg,
        mut out: StepOutput,
    ) -> StepOutput {
        let origin = share.segment.member.clone();
        if !self.guard.fresh(now, share.completed_at) {
            out.reject("share", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("share", from, "duplicate");
            return out;
        }
        if origin == self.key.id {
            out.reject("share", from, "self-origin");
            return out;
        }
        if !self.cfg.downloaders().contains(&origin) {
            out.reject("share", from, "unknown-sender");
            return out;
        }
        if share.segment.file_name != self.cfg.file_name
            || share.segment.provider != self.cfg.provider
        {
            out.reject("share", from, "wrong-file");
            return out;
        }
        let Some(origin_pub) = self.dir.get(&origin).copied() else {
            out.reject("share", from, "unknown-sender");
            return out;
        };
        if !verify(&self.params, &origin, &origin_pub, &share.signed_input(), &share.signature) {
            out.reject("share", from, "bad-signature");
            return out;
        }
        let Some(sp_pub) = self.dir.get(&self.cfg.provider).copied() else {
            out.reject("share", from, "unknown-sender");
            return out;
        };
        if !verify(
            &self.params,
            &self.cfg.provider,
            &sp_pub,
            &share.segment.signed_input(),
            &share.segment.signature,
        ) {
            out.reject("share", from, "bad-provider-signature");
            return out;
        }
        out.event(format!("share stored origin={origin} range={}", share.segment.range));
        self.shares
            .entry((origin, share.segment.range.start))
            .or_insert(share.segment);
        out
    }

    fn handle_consolidate(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        consolidate: ConsolidateMsg,
        mut out: StepOutput,
    ) -> StepOutput {
        if !self.guard.fresh(now, consolidate.finalized_at) {
            out.reject("consolidate", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("consolidate", from, "duplicate");
            return out;
        }
        if self.session_key.is_some() || self.excluded {
            out.reject("consolidate", from, "already-finalized");
            return out;
        }
        let Some(ch_pub) = self.dir.get(&self.cfg.coordinator).copied() else {
            out.reject("consolidate", from, "unknown-sender");
            return out;
        };
        if !verify(
            &self.params,
            &self.cfg.coordinator,
            &ch_pub,
            &consolidate.signed_input(),
            &consolidate.signature,
        ) {
            out.reject("consolidate", from, "bad-signature");
            return out;
        }
        if consolidate.plan.file_name != self.cfg.file_name
            || consolidate.plan.validate().is_err()
        {
            out.reject("consolidate", from, "malformed-plan");
            return out;
        }
        let session_key = match mre_decrypt(&self.params, &self.key, &consolidate.key_box) {
            Ok(k) => k,
            Err(MreError::NoBoxForId) => {
                self.excluded = true;
                out.event("excluded from key release".to_owned());
                return out;
            }
            Err(_) => {
                out.reject("consolidate", from, "key-box-failure");
                return out;
            }
        };
        out.event("session key received".to_owned());
        self.session_key = Some(session_key);
        self.plan = Some(consolidate.plan.clone());
        match reconstruct(&session_key, &self.cfg.coordinator, &consolidate.plan, &self.shares) {
            Ok(file) => {
                let digest = h3(&file);
                out.event(format!(
                    "reconstructed len={} digest={}",
                    file.len(),
                    short_digest(&digest)
                ));
                self.reconstructed = Some(file);
            }
            Err(reason) => out.event(format!("reconstruct failed {reason}")),
        }
        out
    }

    pub fn on_timer(&mut self, _now: u64, _kind: u32, _rng: &mut impl Rng) -> StepOutput {
        StepOutput::new()
    }
}

struct SpSession {
    key: [u8; 32],
    file_name: String,
}

/// Service provider: negotiates per-coordinator session keys and serves
/// signed, encrypted segments against forwarded assignments.
pub struct Provider {
    params: SystemParams,
    key: FullKeyPair,
    dir: Directory,
    guard: Guardrails,
    files: BTreeMap<String, Vec<u8>>,
    dh_secret: DhExponent,
    dh_share: DhElement,
    sessions: BTreeMap<String, SpSession>,
}

impl Provider {
    pub fn new(
        params: SystemParams,
        key: FullKeyPair,
        dir: Directory,
        files: BTreeMap<String, Vec<u8>>,
        freshness_window_ms: u64,
        rng: &mut impl Rng,
    ) -> Self {
        let dh_secret = DhExponent::random(rng);
        let dh_share = dh_exp(&DhElement::generator(), &dh_secret);
        Provider {
            params,
            key,
            dir,
            guard: Guardrails::new(freshness_window_ms),
            files,
            dh_secret,
            dh_share,
            sessions: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.key.id
    }

    pub fn on_message(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        rng: &mut impl Rng,
    ) -> StepOutput {
        let mut out = StepOutput::new();
        let msg = match SegdsMessage::decode(bytes) {
            Ok(m) => m,
            Err(_) => {
                let kind = crate::runtime::kind_name(bytes.first().copied().unwrap_or(0));
                out.reject(kind, from, "malformed");
                return out;
            }
        };
        match msg {
            SegdsMessage::SetupOffer(offer) => self.handle_offer(now, from, bytes, offer, out, rng),
            SegdsMessage::Assign(assign) => self.handle_fetch(now, from, bytes, assign, out, rng),
            _ => {
                out.reject("unknown", from, "unexpected-at-provider");
                out
            }
        }
    }

    fn handle_offer(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        offer: SetupOffer,
        mut out: StepOutput,
        rng: &mut impl Rng,
    ) -> StepOutput {
        if offer.provider != self.key.id {
            out.reject("setup-offer", from, "wrong-recipient");
            return out;
        }
        if !self.guard.fresh(now, offer.sent_at) {
            out.reject("setup-offer", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("setup-offer", from, "duplicate");
            return out;
        }
        let Some(ch_pub) = self.dir.get(&offer.coordinator).copied() else {
            out.reject("setup-offer", from, "unknown-sender");
            return out;
        };
        if !verify(&self.params, &offer.coordinator, &ch_pub, &offer.signed_input(), &offer.signature)
        {
            out.reject("setup-offer", from, "bad-signature");
            return out;
        }
        let Some(content) = self.files.get(&offer.file_name) else {
            out.reject("setup-offer", from, "unknown-file");
            return out;
        };
        let file_size = content.len() as u64;
        let shared = dh_exp(&offer.dh_share, &self.dh_secret);
        self.sessions.insert(
            offer.coordinator.clone(),
            SpSession { key: h3(&shared.encode()), file_name: offer.file_name.clone() },
        );
        out.event(format!(
            "session established coordinator={} file={} size={file_size}",
            offer.coordinator, offer.file_name
        ));
        let mut answer = SetupAnswer {
            provider: self.key.id.clone(),
            coordinator: offer.coordinator.clone(),
            file_name: offer.file_name.clone(),
            file_size,
            dh_share: self.dh_share.clone(),
            sent_at: now,
            signature: crate::signcrypt::Signature {
                commitment: crate::crypto::group::GroupElement::identity(),
                response: crate::crypto::group::Scalar::zero(),
            },
        };
        answer.signature = sign(&self.params, &self.key, &answer.signed_input(), rng);
        out.send_to(&offer.coordinator, answer.encode());
        out
    }

    fn handle_fetch(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        assign: AssignMsg,
        mut out: StepOutput,
        rng: &mut impl Rng,
    ) -> StepOutput {
        if !self.guard.fresh(now, assign.sent_at) {
            out.reject("assign", from, "stale-timestamp");
            return out;
        }
        if !self.guard.first_sighting(bytes) {
            out.reject("assign", from, "duplicate");
            return out;
        }
        if from != assign.member {
            out.reject("assign", from, "sender-mismatch");
            return out;
        }
        let Some(session) = self.sessions.get(&assign.coordinator) else {
            out.reject("assign", from, "unknown-session");
            return out;
        };
        if session.file_name != assign.file_name {
            out.reject("assign", from, "wrong-file");
            return out;
        }
        let Some(ch_pub) = self.dir.get(&assign.coordinator).copied() else {
            out.reject("assign", from, "unknown-sender");
            return out;
        };
        if !verify(&self.params, &assign.coordinator, &ch_pub, &assign.signed_input(), &assign.signature)
        {
            out.reject("assign", from, "bad-signature");
            return out;
        }
        let content = self.files.get(&assign.file_name).expect("session implies file");
        if assign.range.end() > content.len() as u64 {
            out.reject("assign", from, "bad-range");
            return out;
        }
        let piece = &content[assign.range.start as usize..assign.range.end() as usize];
        let aad = segment_aad(&assign.coordinator, &assign.file_name, &assign.range);
        let payload = sym_encrypt(&session.key, piece, &aad, rng);
        let mut segment = SegmentMsg {
            provider: self.key.id.clone(),
            member: assign.member.clone(),
            file_name: assign.file_name.clone(),
            range: assign.range,
            payload,
            sent_at: now,
            signature: crate::signcrypt::Signature {
                commitment: crate::crypto::group::GroupElement::identity(),
                response: crate::crypto::group::Scalar::zero(),
            },
        };
        segment.signature = sign(&self.params, &self.key, &segment.signed_input(), rng);
        out.event(format!("segment served member={} range={}", assign.member, assign.range));
        out.send_to(&assign.member, segment.encode());
        out
    }

    pub fn on_timer(&mut self, _now: u64, _kind: u32, _rng: &mut impl Rng) -> StepOutput {
        StepOutput::new()
    }
}
