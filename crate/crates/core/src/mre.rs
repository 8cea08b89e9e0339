//! Multi-receiver encryption of a 32-byte payload key.
//!
//! One ephemeral commitment `U = r*P` is shared by all recipients; each
//! admitted recipient `j` gets a box `sym_encrypt(h2(r*VK_j, U), key)` with
//! its identity as associated data. Blacklisted recipients are simply given
//! no box. Sender authenticity is provided by the signature of whatever
//! message carries the ciphertext, so no sender key enters here.
//!
//! Cost per call: encrypt `1 + admitted` mults and `admitted` cipher calls
//! (recipient verify keys arrive pre-derived); decrypt 1 mult + 1 cipher
//! call.
//!
//! Wire form: `U(33) || count(u16) || [id_len(u16) id box_len(u16) box]*`.

use std::collections::BTreeSet;

use rand_core::Rng;
use thiserror::Error;

use crate::crypto::aead::{sym_decrypt, sym_encrypt, AEAD_OVERHEAD};
use crate::crypto::group::{scalar_mult, GroupElement, Scalar, POINT_LEN};
use crate::crypto::hashes::h2;
use crate::pki::{FullKeyPair, SystemParams, VerifyKey};

pub const PAYLOAD_KEY_LEN: usize = 32;
/// Size of one recipient box on the wire (nonce + 32-byte key + tag).
pub const BOX_LEN: usize = PAYLOAD_KEY_LEN + AEAD_OVERHEAD;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MreError {
    #[error("no admissible recipients after blacklist filtering")]
    EmptyRecipientSet,
    #[error("ciphertext carries no box for this identity")]
    NoBoxForId,
    #[error("box decryption failed")]
    DecryptFailure,
    #[error("malformed ciphertext")]
    Malformed,
}

/// Multi-receiver ciphertext: shared ephemeral plus per-recipient boxes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MreCiphertext {
    pub ephemeral: GroupElement,
    /// `(recipient id, box)` in recipient-list order.
    pub boxes: Vec<(String, Vec<u8>)>,
}

impl MreCiphertext {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.ephemeral.encode());
        out.extend_from_slice(&(self.boxes.len() as u16).to_be_bytes());
        for (id, sealed) in &self.boxes {
            out.extend_from_slice(&(id.len() as u16).to_be_bytes());
            out.extend_from_slice(id.as_bytes());
            out.extend_from_slice(&(sealed.len() as u16).to_be_bytes());
            out.extend_from_slice(sealed);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, MreError> {
        let take = |pos: &mut usize, n: usize| -> Result<&[u8], MreError> {
            let end = pos.checked_add(n).ok_or(MreError::Malformed)?;
            let s = bytes.get(*pos..end).ok_or(MreError::Malformed)?;
            *pos = end;
            Ok(s)
        };
        let mut pos = 0usize;
        let ephemeral = GroupElement::decode(take(&mut pos, POINT_LEN)?)
            .map_err(|_| MreError::Malformed)?;
        let count =
            u16::from_be_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let mut boxes = Vec::with_capacity(count);
        for _ in 0..count {
            let id_len = u16::from_be_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
            let id = std::str::from_utf8(take(&mut pos, id_len)?)
                .map_err(|_| MreError::Malformed)?
                .to_owned();
            let box_len = u16::from_be_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
            boxes.push((id, take(&mut pos, box_len)?.to_vec()));
        }
        if pos != bytes.len() {
            return Err(MreError::Malformed);
        }
        Ok(MreCiphertext { ephemeral, boxes })
    }
}

/// Encrypts `payload_key` to every recipient not on `blacklist`.
/// Recipients are `(id, derived verify key)` pairs; box order follows the
/// given recipient order.
pub fn mre_encrypt(
    params: &SystemParams,
    recipients: &[(String, VerifyKey)],
    blacklist: &BTreeSet<String>,
    payload_key: &[u8; PAYLOAD_KEY_LEN],
    rng: &mut impl Rng,
) -> Result<MreCiphertext, MreError> {
    let _ = params;
    let admitted: Vec<&(String, VerifyKey)> =
        recipients.iter().filter(|(id, _)| !blacklist.contains(id)).collect();
    if admitted.is_empty() {
        return Err(MreError::EmptyRecipientSet);
    }
    let r = Scalar::random_nonzero(rng);
    let ephemeral = scalar_mult(&r, &GroupElement::generator());
    let mut boxes = Vec::with_capacity(admitted.len());
    for (id, vk) in admitted {
        let k = h2(&scalar_mult(&r, &vk.0), &ephemeral);
        let sealed = sym_encrypt(&k, payload_key, id.as_bytes(), rng);
        boxes.push((id.clone(), sealed));
    }
    Ok(MreCiphertext { ephemeral, boxes })
}

/// Opens the box addressed to `key.id`, if any.
pub fn mre_decrypt(
    params: &SystemParams,
    key: &FullKeyPair,
    ct: &MreCiphertext,
) -> Result<[u8; PAYLOAD_KEY_LEN], MreError> {
    let _ = params;
    let sealed = ct
        .boxes
        .iter()
        .find(|(id, _)| *id == key.id)
        .map(|(_, sealed)| sealed)
        .ok_or(MreError::NoBoxForId)?;
    let k = h2(&scalar_mult(&key.signing_secret(), &ct.ephemeral), &ct.ephemeral);
    let opened =
        sym_decrypt(&k, sealed, key.id.as_bytes()).map_err(|_| MreError::DecryptFailure)?;
    opened.try_into().map_err(|_| MreError::DecryptFailure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ledger;
    use crate::pki::{derive_verify_key, enroll, setup, KgcState};
    use rand_core::SeedableRng;

    type TestRng = rand_chacha::ChaCha20Rng;

    fn group(n: usize, seed: u64) -> (SystemParams, Vec<FullKeyPair>, KgcState) {
        let mut rng = TestRng::seed_from_u64(seed);
        let mut kgc = setup(128, &mut rng);
        let keys: Vec<FullKeyPair> = (0..n)
            .map(|i| enroll(&mut kgc, &format!("uav-{i}"), &mut rng).unwrap())
            .collect();
        (*kgc.params(), keys, kgc)
    }

    fn recipient_list(params: &SystemParams, keys: &[FullKeyPair]) -> Vec<(String, VerifyKey)> {
        keys.iter()
            .map(|k| (k.id.clone(), derive_verify_key(params, &k.id, &k.public)))
            .collect()
    }

    #[test]
    fn all_admitted_recipients_recover_the_key() {
        let (params, keys, _) = group(6, 81);
        let mut rng = TestRng::seed_from_u64(82);
        let recipients = recipient_list(&params, &keys);
        let payload = [0x5au8; PAYLOAD_KEY_LEN];
        let ct =
            mre_encrypt(&params, &recipients, &BTreeSet::new(), &payload, &mut rng).unwrap();
        assert_eq!(ct.boxes.len(), 6);
        for key in &keys {
            assert_eq!(mre_decrypt(&params, key, &ct).unwrap(), payload);
        }
    }

    #[test]
    fn blacklisted_recipients_get_nothing() {
        let (params, keys, _) = group(5, 83);
        let mut rng = TestRng::seed_from_u64(84);
        let recipients = recipient_list(&params, &keys);
        let blacklist: BTreeSet<String> = ["uav-1".to_owned(), "uav-3".to_owned()].into();
        let payload = [9u8; PAYLOAD_KEY_LEN];
        let ct = mre_encrypt(&params, &recipients, &blacklist, &payload, &mut rng).unwrap();
        assert_eq!(ct.boxes.len(), 3);
        for key in &keys {
            let out = mre_decrypt(&params, key, &ct);
            if blacklist.contains(&key.id) {
                assert_eq!(out, Err(MreError::NoBoxForId));
            } else {
                assert_eq!(out.unwrap(), payload);
            }
        }
        // everyone blacklisted: refuse to emit an empty ciphertext
        let all: BTreeSet<String> = keys.iter().map(|k| k.id.clone()).collect();
        assert_eq!(
            mre_encrypt(&params, &recipients, &all, &payload, &mut rng).unwrap_err(),
            MreError::EmptyRecipientSet
        );
    }

    #[test]
    fn cross_box_matrix_only_diagonal_opens() {
        let (params, keys, _) = group(5, 85);
        let mut rng = TestRng::seed_from_u64(86);
        let recipients = recipient_list(&params, &keys);
        let payload = [3u8; PAYLOAD_KEY_LEN];
        let ct =
            mre_encrypt(&params, &recipients, &BTreeSet::new(), &payload, &mut rng).unwrap();
        // every key against every single-box ciphertext: only its own opens
        for (i, key) in keys.iter().enumerate() {
            for (j, (id, sealed)) in ct.boxes.iter().enumerate() {
                let single = MreCiphertext {
                    ephemeral: ct.ephemeral,
                    boxes: vec![(key.id.clone(), sealed.clone())],
                };
                let _ = id;
                let out = mre_decrypt(&params, key, &single);
                if i == j {
                    assert_eq!(out.unwrap(), payload);
                } else {
                    // foreign box relabelled with our id: wrong key and aad
                    assert_eq!(out, Err(MreError::DecryptFailure));
                }
            }
        }
    }

    #[test]
    fn cross_session_boxes_do_not_open() {
        let (params, keys, _) = group(3, 87);
        let mut rng = TestRng::seed_from_u64(88);
        let recipients = recipient_list(&params, &keys);
        let a = mre_encrypt(&params, &recipients, &BTreeSet::new(), &[1u8; 32], &mut rng)
            .unwrap();
        let b = mre_encrypt(&params, &recipients, &BTreeSet::new(), &[2u8; 32], &mut rng)
            .unwrap();
        // boxes from session A paired with session B's ephemeral fail
        let frankenstein = MreCiphertext { ephemeral: b.ephemeral, boxes: a.boxes.clone() };
        for key in &keys {
            assert_eq!(mre_decrypt(&params, key, &frankenstein), Err(MreError::DecryptFailure));
        }
    }

    #[test]
    fn wire_codec_roundtrip_and_malformed_rejection() {
        let (params, keys, _) = group(4, 89);
        let mut rng = TestRng::seed_from_u64(90);
        let recipients = recipient_list(&params, &keys);
        let ct = mre_encrypt(&params, &recipients, &BTreeSet::new(), &[7u8; 32], &mut rng)
            .unwrap();
        let bytes = ct.encode();
        // layout: U(33) + count(2) + per box (2 + id + 2 + 60)
        let expected: usize = POINT_LEN
            + 2
            + ct.boxes.iter().map(|(id, b)| 2 + id.len() + 2 + b.len()).sum::<usize>();
        assert_eq!(bytes.len(), expected);
        assert!(ct.boxes.iter().all(|(_, b)| b.len() == BOX_LEN));
        assert_eq!(MreCiphertext::decode(&bytes).unwrap(), ct);

        assert_eq!(MreCiphertext::decode(&bytes[..10]), Err(MreError::Malformed));
        let mut extended = bytes.clone();
        extended.push(0);
        assert_eq!(MreCiphertext::decode(&extended), Err(MreError::Malformed));
    }

    #[test]
    fn per_op_ledger_costs_are_exact() {
        let (params, keys, _) = group(5, 91);
        let mut rng = TestRng::seed_from_u64(92);
        let recipients = recipient_list(&params, &keys);
        let blacklist: BTreeSet<String> = ["uav-0".to_owned()].into();

        let guard = ledger::begin();
        let ct = mre_encrypt(&params, &recipients, &blacklist, &[1u8; 32], &mut rng).unwrap();
        let after_enc = ledger::snapshot_total();
        // 4 admitted: 1 + 4 mults, 4 cipher calls
        assert_eq!((after_enc.scalar_mults, after_enc.sym_cipher_calls), (5, 4));

        mre_decrypt(&params, &keys[1], &ct).unwrap();
        let d = ledger::snapshot_total() - after_enc;
        assert_eq!((d.scalar_mults, d.sym_cipher_calls), (1, 1));
        guard.finish();
    }
}
