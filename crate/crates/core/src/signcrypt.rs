//! Certificateless signatures and signcryption.
//!
//! Schnorr-style over the certificateless keys: a signature is
//! `(R, s) = (r*P, r + e*(x+z))` with challenge `e = h1(R, signer_id, msg)`,
//! verified as `s*P == R + e*VerifyKey` against the verify key derived from
//! public data. Signcryption reuses the commitment `r` to derive a shared
//! key `k = h2(r*VerifyKey_recipient, R)`, encrypts, then signs the
//! ciphertext — so any relay can check authenticity without decrypting,
//! and the legitimate recipient recomputes `k = h2((x+z)*R, R)`.
//!
//! Cost contracts (ledger ticks per call): sign 1 mult; verify 3 mults;
//! signcrypt 2 mults + 1 cipher call (the recipient verify key arrives
//! pre-derived); unsigncrypt 4 mults + 1 cipher call.

use rand_core::Rng;
use thiserror::Error;

use crate::crypto::aead::{sym_decrypt, sym_encrypt};
use crate::crypto::group::{point_add, scalar_mult, GroupElement, Scalar, POINT_LEN, SCALAR_LEN};
use crate::crypto::hashes::{h1, h2};
use crate::crypto::CryptoError;
use crate::pki::{derive_verify_key, FullKeyPair, PublicKey, SystemParams, VerifyKey};

pub const SIGNATURE_LEN: usize = POINT_LEN + SCALAR_LEN; // 65

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SigncryptError {
    #[error("signature check failed")]
    AuthFailure,
    #[error("key recovery or decryption failed")]
    DecryptFailure,
}

/// A certificateless signature `(R, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub commitment: GroupElement,
    pub response: Scalar,
}

impl Signature {
    /// `R(33) || s(32)`.
    pub fn encode(&self) -> [u8; SIGNATURE_LEN] {
        let mut out = [0u8; SIGNATURE_LEN];
        out[..POINT_LEN].copy_from_slice(&self.commitment.encode());
        out[POINT_LEN..].copy_from_slice(&self.response.encode());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != SIGNATURE_LEN {
            return Err(CryptoError::Length { expected: SIGNATURE_LEN, got: bytes.len() });
        }
        Ok(Signature {
            commitment: GroupElement::decode(&bytes[..POINT_LEN])?,
            response: Scalar::decode(&bytes[POINT_LEN..])?,
        })
    }
}

/// Signs `message` under the full key pair.
pub fn sign(
    params: &SystemParams,
    key: &FullKeyPair,
    message: &[u8],
    rng: &mut impl Rng,
) -> Signature {
    let _ = params;
    let r = Scalar::random_nonzero(rng);
    let commitment = scalar_mult(&r, &GroupElement::generator());
    let e = h1(&commitment, key.id.as_bytes(), message);
    let response = r.add(&e.mul(&key.signing_secret()));
    Signature { commitment, response }
}

/// Verifies `sig` on `message` for the claimed `(signer_id, signer_pub)`,
/// deriving the verify key internally.
pub fn verify(
    params: &SystemParams,
    signer_id: &str,
    signer_pub: &PublicKey,
    message: &[u8],
    sig: &Signature,
) -> bool {
    if sig.response.is_zero() {
        return false;
    }
    let vk = derive_verify_key(params, signer_id, signer_pub);
    let e = h1(&sig.commitment, signer_id.as_bytes(), message);
    let lhs = scalar_mult(&sig.response, &GroupElement::generator());
    let rhs = point_add(&sig.commitment, &scalar_mult(&e, &vk.0));
    lhs == rhs
}

/// Signcrypted payload: commitment, response, ciphertext.
/// Wire form `R(33) || s(32) || ct`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigncryptedPayload {
    pub commitment: GroupElement,
    pub response: Scalar,
    pub ciphertext: Vec<u8>,
}

impl SigncryptedPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SIGNATURE_LEN + self.ciphertext.len());
        out.extend_from_slice(&self.commitment.encode());
        out.extend_from_slice(&self.response.encode());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < SIGNATURE_LEN {
            return Err(CryptoError::Length { expected: SIGNATURE_LEN, got: bytes.len() });
        }
        Ok(SigncryptedPayload {
            commitment: GroupElement::decode(&bytes[..POINT_LEN])?,
            response: Scalar::decode(&bytes[POINT_LEN..SIGNATURE_LEN])?,
            ciphertext: bytes[SIGNATURE_LEN..].to_vec(),
        })
    }
}

/// Encrypts `message` to the holder of `recipient_vk` and signs the
/// ciphertext, reusing one commitment for both.
pub fn signcrypt(
    params: &SystemParams,
    sender: &FullKeyPair,
    recipient_vk: &VerifyKey,
    message: &[u8],
    rng: &mut impl Rng,
) -> SigncryptedPayload {
    let _ = params;
    let r = Scalar::random_nonzero(rng);
    let commitment = scalar_mult(&r, &GroupElement::generator());
    let k = h2(&scalar_mult(&r, &recipient_vk.0), &commitment);
    let ciphertext = sym_encrypt(&k, message, b"", rng);
    let e = h1(&commitment, sender.id.as_bytes(), &ciphertext);
    let response = r.add(&e.mul(&sender.signing_secret()));
    SigncryptedPayload { commitment, response, ciphertext }
}

/// Recovers the plaintext iff both the signature over the ciphertext and
/// authenticated decryption succeed.
///
/// The full sequence (key recovery, decryption attempt, signature check)
/// always runs, so the ledger cost is identical on success and failure.
pub fn unsigncrypt(
    params: &SystemParams,
    recipient: &FullKeyPair,
    sender_id: &str,
    sender_pub: &PublicKey,
    payload: &SigncryptedPayload,
) -> Result<Vec<u8>, SigncryptError> {
    let k = h2(
        &scalar_mult(&recipient.signing_secret(), &payload.commitment),
        &payload.commitment,
    );
    let plaintext = sym_decrypt(&k, &payload.ciphertext, b"");
    let sig = Signature { commitment: payload.commitment, response: payload.response };
    let sig_ok = verify(params, sender_id, sender_pub, &payload.ciphertext, &sig);
    if !sig_ok {
        return Err(SigncryptError::AuthFailure);
    }
    plaintext.map_err(|_| SigncryptError::DecryptFailure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ledger;
    use crate::pki::{enroll, setup};
    use rand_core::SeedableRng;

    type TestRng = rand_chacha::ChaCha20Rng;

    fn two_parties(seed: u64) -> (SystemParams, FullKeyPair, FullKeyPair, crate::pki::KgcState) {
        let mut rng = TestRng::seed_from_u64(seed);
        let mut kgc = setup(128, &mut rng);
        let a = enroll(&mut kgc, "uav-1", &mut rng).unwrap();
        let b = enroll(&mut kgc, "uav-2", &mut rng).unwrap();
        (*kgc.params(), a, b, kgc)
    }

    #[test]
    fn sign_verify_roundtrip_and_misbinding() {
        let (params, a, b, _) = two_parties(61);
        let mut rng = TestRng::seed_from_u64(62);
        for i in 0..50 {
            let msg = vec![i as u8; (i * 7) % 200];
            let sig = sign(&params, &a, &msg, &mut rng);
            assert!(verify(&params, "uav-1", &a.public, &msg, &sig));
            // wrong message, wrong claimed signer, wrong key
            assert!(!verify(&params, "uav-1", &a.public, b"other", &sig));
            assert!(!verify(&params, "uav-2", &a.public, &msg, &sig));
            assert!(!verify(&params, "uav-1", &b.public, &msg, &sig));
        }
    }

    #[test]
    fn signature_bit_flip_sweep_rejects_all() {
        let (params, a, _, _) = two_parties(63);
        let mut rng = TestRng::seed_from_u64(64);
        let msg = b"audit me";
        let sig = sign(&params, &a, msg, &mut rng);
        let enc = sig.encode();
        for byte in 0..SIGNATURE_LEN {
            for bit in 0..8 {
                let mut bad = enc;
                bad[byte] ^= 1 << bit;
                let accepted = match Signature::decode(&bad) {
                    Ok(s) => verify(&params, "uav-1", &a.public, msg, &s),
                    Err(_) => false,
                };
                assert!(!accepted, "flip at byte {byte} bit {bit} was accepted");
            }
        }
    }

    #[test]
    fn signcrypt_roundtrip_and_binding() {
        let (params, a, b, _) = two_parties(65);
        let mut rng = TestRng::seed_from_u64(66);
        let vk_b = derive_verify_key(&params, "uav-2", &b.public);
        for len in [0usize, 1, 100, 4096] {
            let msg: Vec<u8> = (0..len).map(|i| (i * 31 % 256) as u8).collect();
            let payload = signcrypt(&params, &a, &vk_b, &msg, &mut rng);
            let out = unsigncrypt(&params, &b, "uav-1", &a.public, &payload).unwrap();
            assert_eq!(out, msg);
        }
        // ciphertext tamper: the signature covers the ciphertext
        let payload = signcrypt(&params, &a, &vk_b, b"secret", &mut rng);
        let mut bad = payload.clone();
        let last = bad.ciphertext.len() - 1;
        bad.ciphertext[last] ^= 1;
        assert_eq!(
            unsigncrypt(&params, &b, "uav-1", &a.public, &bad),
            Err(SigncryptError::AuthFailure)
        );
        // wrong recipient: the signature still verifies but key recovery
        // under a different full key yields a different k
        let out = unsigncrypt(&params, &a, "uav-1", &a.public, &payload);
        assert_eq!(out, Err(SigncryptError::DecryptFailure));
    }

    #[test]
    fn payload_codec_roundtrip() {
        let (params, a, b, _) = two_parties(68);
        let mut rng = TestRng::seed_from_u64(69);
        let vk_b = derive_verify_key(&params, "uav-2", &b.public);
        let payload = signcrypt(&params, &a, &vk_b, b"wire me", &mut rng);
        let bytes = payload.encode();
        assert_eq!(bytes.len(), SIGNATURE_LEN + payload.ciphertext.len());
        assert_eq!(SigncryptedPayload::decode(&bytes).unwrap(), payload);
        assert!(SigncryptedPayload::decode(&bytes[..40]).is_err());
    }

    #[test]
    fn per_op_ledger_costs_are_exact() {
        let (params, a, b, _) = two_parties(70);
        let mut rng = TestRng::seed_from_u64(71);
        let vk_b = derive_verify_key(&params, "uav-2", &b.public);

        let guard = ledger::begin();
        let sig = sign(&params, &a, b"m", &mut rng);
        let after_sign = ledger::snapshot_total();
        assert_eq!((after_sign.scalar_mults, after_sign.sym_cipher_calls), (1, 0));

        assert!(verify(&params, "uav-1", &a.public, b"m", &sig));
        let after_verify = ledger::snapshot_total() - after_sign;
        assert_eq!(after_verify.scalar_mults, 3);

        let mark = ledger::snapshot_total();
        let payload = signcrypt(&params, &a, &vk_b, b"m", &mut rng);
        let d = ledger::snapshot_total() - mark;
        assert_eq!((d.scalar_mults, d.sym_cipher_calls), (2, 1));

        let mark = ledger::snapshot_total();
        unsigncrypt(&params, &b, "uav-1", &a.public, &payload).unwrap();
        let d = ledger::snapshot_total() - mark;
        assert_eq!((d.scalar_mults, d.sym_cipher_calls), (4, 1));

        // failure path costs the same as success
        let mut bad = payload;
        bad.response = bad.response.add(&Scalar::one());
        let mark = ledger::snapshot_total();
        let _ = unsigncrypt(&params, &b, "uav-1", &a.public, &bad);
        let d = ledger::snapshot_total() - mark;
        assert_eq!((d.scalar_mults, d.sym_cipher_calls), (4, 1));
        guard.finish();
    }

    #[test]
    fn key_pair_binding_requires_registration_identity() {
        let (params, a, b, kgc) = two_parties(72);
        let mut rng = TestRng::seed_from_u64(73);
        // sender derives the recipient key from the registry: matches
        let vk = derive_verify_key(&params, "uav-2", kgc.public_key("uav-2").unwrap());
        let payload = signcrypt(&params, &a, &vk, b"bound", &mut rng);
        assert!(unsigncrypt(&params, &b, "uav-1", &a.public, &payload).is_ok());
        // a verify key derived for a different identity: recovery fails
        let vk_wrong = derive_verify_key(&params, "uav-2x", &b.public);
        let payload = signcrypt(&params, &a, &vk_wrong, b"bound", &mut rng);
        assert_eq!(
            unsigncrypt(&params, &b, "uav-1", &a.public, &payload),
            Err(SigncryptError::DecryptFailure)
        );
    }
}
