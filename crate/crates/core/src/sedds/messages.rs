//! Wire formats for the direct device-to-device exchange.
//!
//! The requester commits to a session with a signed DH share; the holder
//! answers with the ciphertext plus the original provider's attestation of
//! the plaintext, but withholds its DH share (and therefore the content
//! key) until the requester returns a signed receipt for the ciphertext.
//! The final acknowledgement proves plaintext receipt and settles payment.

use crate::crypto::dh::DhElement;
use crate::crypto::hashes::h3;
use crate::signcrypt::{Signature, SIGNATURE_LEN};
use crate::wire::{MessageReader, MessageWriter, WireError};

pub const TAG_REQUEST: u8 = 0x21;
pub const TAG_DATA: u8 = 0x22;
pub const TAG_HINT: u8 = 0x23;
pub const TAG_KEY_RELEASE: u8 = 0x24;
pub const TAG_ACK: u8 = 0x25;

fn read_signature(r: &mut MessageReader) -> Result<Signature, WireError> {
    let bytes = r.field()?;
    if bytes.len() != SIGNATURE_LEN {
        return Err(WireError::Malformed("signature length"));
    }
    Signature::decode(bytes).map_err(|_| WireError::Malformed("signature encoding"))
}

fn read_dh(r: &mut MessageReader) -> Result<DhElement, WireError> {
    DhElement::decode(r.field()?).map_err(|_| WireError::Malformed("dh element"))
}

/// The byte string a provider signs when attesting file content; carried
/// alongside resales so the final recipient can check the plaintext came
/// from the provider unmodified.
pub fn provider_attestation(file_name: &str, content: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(file_name.len() + 35);
    out.push(0x2F);
    out.extend_from_slice(&(file_name.len() as u16).to_be_bytes());
    out.extend_from_slice(file_name.as_bytes());
    out.extend_from_slice(&h3(content));
    out
}

/// Opens a session: names the file and commits the requester's DH share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Req {
    pub ue: String,
    pub uav: String,
    pub file_name: String,
    pub sent_at: u64,
    pub dh_share: DhElement,
    pub signature: Signature,
}

impl Req {
    pub fn signed_input(&self) -> Vec<u8> {
        self.core().finish()
    }

    fn core(&self) -> MessageWriter {
        let mut w = MessageWriter::new(TAG_REQUEST);
        w.field(self.ue.as_bytes())
            .field(self.uav.as_bytes())
            .field(self.file_name.as_bytes())
            .u64_field(self.sent_at)
            .field(&self.dh_share.encode());
        w
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = self.core();
        w.field(&self.signature.encode());
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = MessageReader::new(bytes);
        if r.tag()? != TAG_REQUEST {
            return Err(WireError::Malformed("wrong tag"));
        }
        let ue = r.str_field()?;
        let uav = r.str_field()?;
        let file_name = r.str_field()?;
        let sent_at = r.u64_field()?;
        let dh_share = read_dh(&mut r)?;
        let signature = read_signature(&mut r)?;
        r.finish()?;
        Ok(Req { ue, uav, file_name, sent_at, dh_share, signature })
    }
}

/// Ciphertext delivery: the payload is encrypted under the session key the
/// holder can already compute, and rides with the provider's attestation of
/// the underlying plaintext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataMsg {
    pub uav: String,
    pub ue: String,
    pub provider: String,
    pub file_name: String,
    /// Echo of the request timestamp; binds delivery to the session.
    pub sent_at: u64,
    pub payload: Vec<u8>,
    pub provider_sig: Signature,
    pub signature: Signature,
}

impl DataMsg {
    pub fn signed_input(&self) -> Vec<u8> {
        let mut w = MessageWriter::new(TAG_DATA);
        w.field(self.uav.as_bytes())
            .field(self.ue.as_bytes())
            .field(self.provider.as_bytes())
            .field(self.file_name.as_bytes())
            .u64_field(self.sent_at)
            .field(&h3(&self.payload))
            .field(&self.provider_sig.encode());
        w.finish()
    }

    /// Returns the serialized message and the payload's span within it.
    pub fn encode_with_span(&self) -> (Vec<u8>, std::ops::Range<usize>) {
        let mut w = MessageWriter::new(TAG_DATA);
        w.field(self.uav.as_bytes())
            .field(self.ue.as_bytes())
            .field(self.provider.as_bytes())
            .field(self.file_name.as_bytes())
            .u64_field(self.sent_at);
        let content_start = w.signed_so_far().len() + 4;
        let content_end = content_start + self.payload.len();
        w.blob(&self.payload)
            .field(&self.provider_sig.encode())
            .field(&self.signature.encode());
        (w.finish(), content_start..content_end)
    }

    pub fn encode(&self) -> Vec<u8> {
        self.encode_with_span().0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = MessageReader::new(bytes);
        if r.tag()? != TAG_DATA {
            return Err(WireError::Malformed("wrong tag"));
        }
        let uav = r.str_field()?;
        let ue = r.str_field()?;
        let provider = r.str_field()?;
        let file_name = r.str_field()?;
        let sent_at = r.u64_field()?;
        let payload = r.blob()?.to_vec();
        let provider_sig = read_signature(&mut r)?;
        let signature = read_signature(&mut r)?;
        r.finish()?;
        Ok(DataMsg { uav, ue, provider, file_name, sent_at, payload, provider_sig, signature })
    }
}

/// Signed receipt for the ciphertext; sending it is the requester's
/// commitment (and triggers the escrow prepayment).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hint {
    pub ue: String,
    pub uav: String,
    pub file_name: String,
    /// H3(file name digest) XOR H3(ciphertext): proves which ciphertext
    /// was received without revealing anything the holder lacks.
    pub receipt: [u8; 32],
    pub sent_at: u64,
    pub signature: Signature,
}

impl Hint {
    pub fn receipt_for(file_name: &str, ciphertext: &[u8]) -> [u8; 32] {
        crate::crypto::hashes::xor32(&h3(file_name.as_bytes()), &h3(ciphertext))
    }

    fn core(&self) -> MessageWriter {
        let mut w = MessageWriter::new(TAG_HINT);
        w.field(self.ue.as_bytes())
            .field(self.uav.as_bytes())
            .field(self.file_name.as_bytes())
            .field(&self.receipt)
            .u64_field(self.sent_at);
        w
    }

    pub fn signed_input(&self) -> Vec<u8> {
        self.core().finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = self.core();
        w.field(&self.signature.encode());
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = MessageReader::new(bytes);
        if r.tag()? != TAG_HINT {
            return Err(WireError::Malformed("wrong tag"));
        }
        let ue = r.str_field()?;
        let uav = r.str_field()?;
        let file_name = r.str_field()?;
        let receipt = r.array_field::<32>()?;
        let sent_at = r.u64_field()?;
        let signature = read_signature(&mut r)?;
        r.finish()?;
        Ok(Hint { ue, uav, file_name, receipt, sent_at, signature })
    }
}

/// Deferred key release: the holder's DH share, held back until the
/// receipt arrived. Carries no timestamp; it is bound to the session by
/// the file name and is idempotent to replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyRelease {
    pub uav: String,
    pub ue: String,
    pub file_name: String,
    pub dh_share: DhElement,
    pub signature: Signature,
}

impl KeyRelease {
    fn core(&self) -> MessageWriter {
        let mut w = MessageWriter::new(TAG_KEY_RELEASE);
        w.field(self.uav.as_bytes())
            .field(self.ue.as_bytes())
            .field(self.file_name.as_bytes())
            .field(&self.dh_share.encode());
        w
    }

    pub fn signed_input(&self) -> Vec<u8> {
        self.core().finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = self.core();
        w.field(&self.signature.encode());
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = MessageReader::new(bytes);
        if r.tag()? != TAG_KEY_RELEASE {
            return Err(WireError::Malformed("wrong tag"));
        }
        let uav = r.str_field()?;
        let ue = r.str_field()?;
        let file_name = r.str_field()?;
        let dh_share = read_dh(&mut r)?;
        let signature = read_signature(&mut r)?;
        r.finish()?;
        Ok(KeyRelease { uav, ue, file_name, dh_share, signature })
    }
}

/// Plaintext acknowledgement: proves the requester recovered the real file
/// content, and releases the escrowed payment when the arbiter checks it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ack {
    pub ue: String,
    pub uav: String,
    pub file_name: String,
    /// H3(file name digest) XOR H3(plaintext).
    pub proof: [u8; 32],
    /// Echo of the receipt timestamp; ties the ack to the escrow entry.
    pub sent_at: u64,
    pub signature: Signature,
}

impl Ack {
    pub fn proof_for(file_name: &str, plaintext: &[u8]) -> [u8; 32] {
        crate::crypto::hashes::xor32(&h3(file_name.as_bytes()), &h3(plaintext))
    }

    fn core(&self) -> MessageWriter {
        let mut w = MessageWriter::new(TAG_ACK);
        w.field(self.ue.as_bytes())
            .field(self.uav.as_bytes())
            .field(self.file_name.as_bytes())
            .field(&self.proof)
            .u64_field(self.sent_at);
        w
    }

    pub fn signed_input(&self) -> Vec<u8> {
        self.core().finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = self.core();
        w.field(&self.signature.encode());
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = MessageReader::new(bytes);
        if r.tag()? != TAG_ACK {
            return Err(WireError::Malformed("wrong tag"));
        }
        let ue = r.str_field()?;
        let uav = r.str_field()?;
        let file_name = r.str_field()?;
        let proof = r.array_field::<32>()?;
        let sent_at = r.u64_field()?;
        let signature = read_signature(&mut r)?;
        r.finish()?;
        Ok(Ack { ue, uav, file_name, proof, sent_at, signature })
    }
}

/// Tag-dispatched decoding for everything a direct-exchange party can hear.
#[derive(Debug, Clone)]
pub enum SeddsMessage {
    Req(Req),
    Data(DataMsg),
    Hint(Hint),
    KeyRelease(KeyRelease),
    Ack(Ack),
}

impl SeddsMessage {
    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        match bytes.first() {
            Some(&TAG_REQUEST) => Req::decode(bytes).map(SeddsMessage::Req),
            Some(&TAG_DATA) => DataMsg::decode(bytes).map(SeddsMessage::Data),
            Some(&TAG_HINT) => Hint::decode(bytes).map(SeddsMessage::Hint),
            Some(&TAG_KEY_RELEASE) => KeyRelease::decode(bytes).map(SeddsMessage::KeyRelease),
            Some(&TAG_ACK) => Ack::decode(bytes).map(SeddsMessage::Ack),
            Some(&t) => Err(WireError::BadTag(t)),
            None => Err(WireError::UnexpectedEnd),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::dh::{dh_exp, DhExponent};
    use crate::pki::enroll;
    use crate::signcrypt::sign;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    #[test]
    fn all_five_messages_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let mut kgc = crate::pki::setup(128, &mut rng);
        let ue = enroll(&mut kgc, "ue-1", &mut rng).unwrap();
        let params = *kgc.params();
        let share = dh_exp(
            &crate::crypto::dh::DhElement::generator(),
            &DhExponent::random(&mut rng),
        );

        let mut req = Req {
            ue: "ue-1".into(),
            uav: "uav-1".into(),
            file_name: "clip.bin".into(),
            sent_at: 42,
            dh_share: share.clone(),
            signature: sign(&params, &ue, b"placeholder", &mut rng),
        };
        req.signature = sign(&params, &ue, &req.signed_input(), &mut rng);
        let back = Req::decode(&req.encode()).unwrap();
        assert_eq!(back, req);

        let mut data = DataMsg {
            uav: "uav-1".into(),
            ue: "ue-1".into(),
            provider: "sp".into(),
            file_name: "clip.bin".into(),
            sent_at: 42,
            payload: vec![7u8; 300],
            provider_sig: sign(&params, &ue, b"attest", &mut rng),
            signature: sign(&params, &ue, b"placeholder", &mut rng),
        };
        data.signature = sign(&params, &ue, &data.signed_input(), &mut rng);
        let (wire, span) = data.encode_with_span();
        assert_eq!(&wire[span.clone()], &data.payload[..]);
        let back = DataMsg::decode(&wire).unwrap();
        assert_eq!(back, data);

        let mut hint = Hint {
            ue: "ue-1".into(),
            uav: "uav-1".into(),
            file_name: "clip.bin".into(),
            receipt: Hint::receipt_for("clip.bin", &data.payload),
            sent_at: 50,
            signature: sign(&params, &ue, b"placeholder", &mut rng),
        };
        hint.signature = sign(&params, &ue, &hint.signed_input(), &mut rng);
        assert_eq!(Hint::decode(&hint.encode()).unwrap(), hint);

        let mut release = KeyRelease {
            uav: "uav-1".into(),
            ue: "ue-1".into(),
            file_name: "clip.bin".into(),
            dh_share: share,
            signature: sign(&params, &ue, b"placeholder", &mut rng),
        };
        release.signature = sign(&params, &ue, &release.signed_input(), &mut rng);
        assert_eq!(KeyRelease::decode(&release.encode()).unwrap(), release);

        let mut ack = Ack {
            ue: "ue-1".into(),
            uav: "uav-1".into(),
            file_name: "clip.bin".into(),
            proof: Ack::proof_for("clip.bin", b"the plaintext"),
            sent_at: 50,
            signature: sign(&params, &ue, b"placeholder", &mut rng),
        };
        ack.signature = sign(&params, &ue, &ack.signed_input(), &mut rng);
        assert_eq!(Ack::decode(&ack.encode()).unwrap(), ack);
    }

    #[test]
    fn receipt_and_proof_differ_per_input() {
        let r1 = Hint::receipt_for("a.bin", b"ct-one");
        let r2 = Hint::receipt_for("a.bin", b"ct-two");
        let r3 = Hint::receipt_for("b.bin", b"ct-one");
        assert_ne!(r1, r2);
        assert_ne!(r1, r3);
        let p = Ack::proof_for("a.bin", b"plain");
        assert_ne!(p, r1);
    }

    #[test]
    fn attestation_binds_name_and_content() {
        let a = provider_attestation("a.bin", b"content");
        let b = provider_attestation("b.bin", b"content");
        let c = provider_attestation("a.bin", b"different");
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
