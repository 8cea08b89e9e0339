//! Group-download wire messages.
//!
//! Five protocol steps plus the two session-setup frames. Every message is
//! signed over all of its preceding fields (including the tag byte), except
//! the segment message, where the signature covers the digest of the
//! carried ciphertext followed by the header fields — so a relay can check
//! provenance against the stored digest without re-hauling the payload.

use crate::crypto::dh::{DhElement, DH_ELEMENT_LEN};
use crate::crypto::hashes::h3;
use crate::mre::MreCiphertext;
use crate::runtime::WireMessage;
use crate::signcrypt::{Signature, SIGNATURE_LEN};
use crate::wire::{MessageReader, MessageWriter, WireError};

use super::plan::{ByteRange, SegmentPlan};

pub const TAG_SETUP_OFFER: u8 = 0x10;
pub const TAG_SETUP_ANSWER: u8 = 0x11;
pub const TAG_ASSIGN: u8 = 0x01;
pub const TAG_SEGMENT: u8 = 0x02;
pub const TAG_SHARE: u8 = 0x03;
pub const TAG_CONSOLIDATE: u8 = 0x04;

fn read_signature(r: &mut MessageReader) -> Result<Signature, WireError> {
    let field = r.field()?;
    if field.len() != SIGNATURE_LEN {
        return Err(WireError::Malformed("signature field has wrong length"));
    }
    Signature::decode(field).map_err(|_| WireError::Malformed("signature does not decode"))
}

fn read_dh(r: &mut MessageReader) -> Result<DhElement, WireError> {
    let field = r.field()?;
    if field.len() != DH_ELEMENT_LEN {
        return Err(WireError::Malformed("DH element field has wrong length"));
    }
    DhElement::decode(field).map_err(|_| WireError::Malformed("DH element out of range"))
}

fn read_range(r: &mut MessageReader) -> Result<ByteRange, WireError> {
    ByteRange::decode(r.field()?)
}

/// Session-setup request: the coordinator's signed DH share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetupOffer {
    pub coordinator: String,
    pub provider: String,
    pub file_name: String,
    pub dh_share: DhElement,
    pub sent_at: u64,
    pub signature: Signature,
}

impl SetupOffer {
    fn core(&self) -> MessageWriter {
        let mut w = MessageWriter::new(TAG_SETUP_OFFER);
        w.field(self.coordinator.as_bytes())
            .field(self.provider.as_bytes())
            .field(self.file_name.as_bytes())
            .field(&self.dh_share.encode())
            .u64_field(self.sent_at);
        w
    }

    pub fn signed_input(&self) -> Vec<u8> {
        self.core().finish()
    }

    pub fn encode(&self) -> WireMessage {
        let mut w = self.core();
        w.field(&self.signature.encode());
        WireMessage::plain(w.finish())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = MessageReader::new(bytes);
        if r.tag()? != TAG_SETUP_OFFER {
            return Err(WireError::Malformed("wrong tag"));
        }
        let msg = SetupOffer {
            coordinator: r.str_field()?,
            provider: r.str_field()?,
            file_name: r.str_field()?,
            dh_share: read_dh(&mut r)?,
            sent_at: r.u64_field()?,
            signature: read_signature(&mut r)?,
        };
        r.finish()?;
        Ok(msg)
    }
}

/// Session-setup response: the provider's signed DH share plus file size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetupAnswer {
    pub provider: String,
    pub coordinator: String,
    pub file_name: String,
    pub file_size: u64,
    pub dh_share: DhElement,
    pub sent_at: u64,
    pub signature: Signature,
}

impl SetupAnswer {
    fn core(&self) -> MessageWriter {
        let mut w = MessageWriter::new(TAG_SETUP_ANSWER);
        w.field(self.provider.as_bytes())
            .field(self.coordinator.as_bytes())
            .field(self.file_name.as_bytes())
            .u64_field(self.file_size)
            .field(&self.dh_share.encode())
            .u64_field(self.sent_at);
        w
    }

    pub fn signed_input(&self) -> Vec<u8> {
        self.core().finish()
    }

    pub fn encode(&self) -> WireMessage {
        let mut w = self.core();
        w.field(&self.signature.encode());
        WireMessage::plain(w.finish())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = MessageReader::new(bytes);
        if r.tag()? != TAG_SETUP_ANSWER {
            return Err(WireError::Malformed("wrong tag"));
        }
        let msg = SetupAnswer {
            provider: r.str_field()?,
            coordinator: r.str_field()?,
            file_name: r.str_field()?,
            file_size: r.u64_field()?,
            dh_share: read_dh(&mut r)?,
            sent_at: r.u64_field()?,
            signature: read_signature(&mut r)?,
        };
        r.finish()?;
        Ok(msg)
    }
}

/// Task assignment: coordinator tells one member which range to fetch.
/// The member forwards these exact bytes to the provider as its fetch
/// authorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignMsg {
    pub coordinator: String,
    pub member: String,
    pub file_name: String,
    pub range: ByteRange,
    pub sent_at: u64,
    /// Digest of the round's full segment plan.
    pub plan_digest: [u8; 32],
    pub signature: Signature,
}

impl AssignMsg {
    fn core(&self) -> MessageWriter {
        let mut w = MessageWriter::new(TAG_ASSIGN);
        w.field(self.coordinator.as_bytes())
            .field(self.member.as_bytes())
            .field(self.file_name.as_bytes())
            .field(&self.range.encode())
            .u64_field(self.sent_at)
            .field(&self.plan_digest);
        w
    }

    pub fn signed_input(&self) -> Vec<u8> {
        self.core().finish()
    }

    pub fn encode(&self) -> WireMessage {
        let mut w = self.core();
        w.field(&self.signature.encode());
        WireMessage::plain(w.finish())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = MessageReader::new(bytes);
        if r.tag()? != TAG_ASSIGN {
            return Err(WireError::Malformed("wrong tag"));
        }
        let msg = AssignMsg {
            coordinator: r.str_field()?,
            member: r.str_field()?,
            file_name: r.str_field()?,
            range: read_range(&mut r)?,
            sent_at: r.u64_field()?,
            plan_digest: r.array_field::<32>()?,
            signature: read_signature(&mut r)?,
        };
        r.finish()?;
        Ok(msg)
    }
}

/// Encrypted segment from the provider to one downloader.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMsg {
    pub provider: String,
    pub member: String,
    pub file_name: String,
    pub range: ByteRange,
    /// Segment ciphertext under the session key.
    pub payload: Vec<u8>,
    pub sent_at: u64,
    pub signature: Signature,
}

impl SegmentMsg {
    /// Signature input: digest of the payload, then the header fields.
    pub fn signed_input(&self) -> Vec<u8> {
        let mut w = MessageWriter::new(TAG_SEGMENT);
        w.field(self.provider.as_bytes())
            .field(self.member.as_bytes())
            .field(self.file_name.as_bytes())
            .field(&self.range.encode())
            .u64_field(self.sent_at);
        let header = w.finish();
        let mut out = Vec::with_capacity(32 + header.len());
        out.extend_from_slice(&h3(&self.payload));
        out.extend_from_slice(&header);
        out
    }

    pub fn encode(&self) -> WireMessage {
        let mut w = MessageWriter::new(TAG_SEGMENT);
        w.field(self.provider.as_bytes())
            .field(self.member.as_bytes())
            .field(self.file_name.as_bytes())
            .field(&self.range.encode());
        let content_start = w.signed_so_far().len() + 4;
        w.blob(&self.payload);
        w.u64_field(self.sent_at).field(&self.signature.encode());
        let bytes = w.finish();
        WireMessage {
            content: Some(content_start..content_start + self.payload.len()),
            bytes,
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = MessageReader::new(bytes);
        if r.tag()? != TAG_SEGMENT {
            return Err(WireError::Malformed("wrong tag"));
        }
        let msg = SegmentMsg {
            provider: r.str_field()?,
            member: r.str_field()?,
            file_name: r.str_field()?,
            range: read_range(&mut r)?,
            payload: r.blob()?.to_vec(),
            sent_at: r.u64_field()?,
            signature: read_signature(&mut r)?,
        };
        r.finish()?;
        Ok(msg)
    }
}

/// A downloaded segment re-broadcast to the whole group, endorsed by the
/// downloader. Carries the provider message verbatim so every receiver can
/// check both signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareMsg {
    pub segment: SegmentMsg,
    pub completed_at: u64,
    pub signature: Signature,
}

impl ShareMsg {
    pub fn signed_input(&self) -> Vec<u8> {
        let mut w = MessageWriter::new(TAG_SHARE);
        w.blob(&self.segment.encode().bytes).u64_field(self.completed_at);
        w.finish()
    }

    pub fn encode(&self) -> WireMessage {
        let inner = self.segment.encode();
        let inner_shift = 1 + 4; // outer tag + blob length prefix
        let content = inner.content.as_ref().map(|r| r.start + inner_shift..r.end + inner_shift);
        let mut w = MessageWriter::new(TAG_SHARE);
        w.blob(&inner.bytes).u64_field(self.completed_at).field(&self.signature.encode());
        WireMessage { bytes: w.finish(), content }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = MessageReader::new(bytes);
        if r.tag()? != TAG_SHARE {
            return Err(WireError::Malformed("wrong tag"));
        }
        let segment = SegmentMsg::decode(r.blob()?)?;
        let msg = ShareMsg {
            segment,
            completed_at: r.u64_field()?,
            signature: read_signature(&mut r)?,
        };
        r.finish()?;
        Ok(msg)
    }
}

/// Final key release: the session key boxed to each well-behaved member,
/// plus the final plan describing reassembly order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsolidateMsg {
    pub key_box: MreCiphertext,
    pub finalized_at: u64,
    pub plan: SegmentPlan,
    pub signature: Signature,
}

impl ConsolidateMsg {
    fn core(&self) -> MessageWriter {
        let mut w = MessageWriter::new(TAG_CONSOLIDATE);
        w.blob(&self.key_box.encode()).u64_field(self.finalized_at).blob(&self.plan.encode());
        w
    }

    pub fn signed_input(&self) -> Vec<u8> {
        self.core().finish()
    }

    pub fn encode(&self) -> WireMessage {
        let mut w = self.core();
        w.field(&self.signature.encode());
        WireMessage::plain(w.finish())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = MessageReader::new(bytes);
        if r.tag()? != TAG_CONSOLIDATE {
            return Err(WireError::Malformed("wrong tag"));
        }
        let key_box =
            MreCiphertext::decode(r.blob()?).map_err(|_| WireError::Malformed("key box"))?;
        let finalized_at = r.u64_field()?;
        let plan = SegmentPlan::decode(r.blob()?)?;
        let msg = ConsolidateMsg { key_box, finalized_at, plan, signature: read_signature(&mut r)? };
        r.finish()?;
        Ok(msg)
    }
}

/// Any group-download message, decoded by tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegdsMessage {
    SetupOffer(SetupOffer),
    SetupAnswer(SetupAnswer),
    Assign(AssignMsg),
    Segment(SegmentMsg),
    Share(ShareMsg),
    Consolidate(ConsolidateMsg),
}

impl SegdsMessage {
    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        match bytes.first().copied().ok_or(WireError::UnexpectedEnd)? {
            TAG_SETUP_OFFER => SetupOffer::decode(bytes).map(SegdsMessage::SetupOffer),
            TAG_SETUP_ANSWER => SetupAnswer::decode(bytes).map(SegdsMessage::SetupAnswer),
            TAG_ASSIGN => AssignMsg::decode(bytes).map(SegdsMessage::Assign),
            TAG_SEGMENT => SegmentMsg::decode(bytes).map(SegdsMessage::Segment),
            TAG_SHARE => ShareMsg::decode(bytes).map(SegdsMessage::Share),
            TAG_CONSOLIDATE => ConsolidateMsg::decode(bytes).map(SegdsMessage::Consolidate),
            other => Err(WireError::BadTag(other)),
        }
    }
}
