//! Authenticated symmetric encryption: AES-256-GCM.
//!
//! Wire form is `nonce(12) || ciphertext || tag(16)` — a fixed 28-byte
//! overhead. Both encrypt and decrypt count one `sym_cipher_calls` tick,
//! decrypt regardless of whether authentication succeeds.

use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes256Gcm, KeyInit};
use rand_core::Rng;

use super::ledger::{self, OpKind};
use super::CryptoError;

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
pub const AEAD_OVERHEAD: usize = NONCE_LEN + TAG_LEN;

/// Encrypts `plaintext` under `key`, binding `aad`. The nonce is drawn from
/// `rng` and prepended.
pub fn sym_encrypt(
    key: &[u8; 32],
    plaintext: &[u8],
    aad: &[u8],
    rng: &mut impl Rng,
) -> Vec<u8> {
    ledger::bump(OpKind::SymCipher, 1);
    let cipher = Aes256Gcm::new(key.into());
    let mut nonce_bytes = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce_bytes);
    let nonce: &aes_gcm::Nonce<_> = (&nonce_bytes).into();
    let body = cipher
        .encrypt(nonce, Payload { msg: plaintext, aad })
        .expect("AES-GCM encryption is total for in-memory sizes");
    let mut out = Vec::with_capacity(NONCE_LEN + body.len());
    out.extend_from_slice(&nonce_bytes);
    out.extend_from_slice(&body);
    out
}

/// Decrypts and authenticates; any key, aad, or ciphertext mismatch fails.
pub fn sym_decrypt(key: &[u8; 32], data: &[u8], aad: &[u8]) -> Result<Vec<u8>, CryptoError> {
    ledger::bump(OpKind::SymCipher, 1);
    if data.len() < AEAD_OVERHEAD {
        return Err(CryptoError::Length { expected: AEAD_OVERHEAD, got: data.len() });
    }
    let (nonce_bytes, body) = data.split_at(NONCE_LEN);
    let nonce_arr: [u8; NONCE_LEN] = nonce_bytes.try_into().unwrap();
    let nonce: &aes_gcm::Nonce<_> = (&nonce_arr).into();
    let cipher = Aes256Gcm::new(key.into());
    cipher
        .decrypt(nonce, Payload { msg: body, aad })
        .map_err(|_| CryptoError::AeadFailure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ledger;
    use rand_core::SeedableRng;

    type TestRng = rand_chacha::ChaCha20Rng;

    #[test]
    fn roundtrip_various_lengths() {
        let mut rng = TestRng::seed_from_u64(41);
        let key = [7u8; 32];
        for len in [0usize, 1, 15, 16, 17, 1000, 65536] {
            let msg: Vec<u8> = (0..len).map(|i| (i % 251) as u8).collect();
            let ct = sym_encrypt(&key, &msg, b"aad", &mut rng);
            assert_eq!(ct.len(), msg.len() + AEAD_OVERHEAD);
            assert_eq!(sym_decrypt(&key, &ct, b"aad").unwrap(), msg);
        }
    }

    #[test]
    fn rejects_wrong_key_wrong_aad_and_tampering() {
        let mut rng = TestRng::seed_from_u64(42);
        let key = [1u8; 32];
        let ct = sym_encrypt(&key, b"segment bytes", b"ctx", &mut rng);

        assert_eq!(sym_decrypt(&[2u8; 32], &ct, b"ctx"), Err(CryptoError::AeadFailure));
        assert_eq!(sym_decrypt(&key, &ct, b"other"), Err(CryptoError::AeadFailure));
        // flip every bit position once: all must fail
        for byte in 0..ct.len() {
            for bit in 0..8 {
                let mut bad = ct.clone();
                bad[byte] ^= 1 << bit;
                assert_eq!(sym_decrypt(&key, &bad, b"ctx"), Err(CryptoError::AeadFailure));
            }
        }
    }

    #[test]
    fn truncated_input_is_rejected() {
        assert!(matches!(
            sym_decrypt(&[0u8; 32], &[0u8; 10], b""),
            Err(CryptoError::Length { .. })
        ));
    }

    #[test]
    fn both_directions_tick_ledger() {
        let mut rng = TestRng::seed_from_u64(43);
        let key = [9u8; 32];
        let guard = ledger::begin();
        let ct = sym_encrypt(&key, b"x", b"", &mut rng);
        assert_eq!(ledger::snapshot_total().sym_cipher_calls, 1);
        let _ = sym_decrypt(&key, &ct, b"");
        let _ = sym_decrypt(&[0u8; 32], &ct, b""); // failure still counts
        assert_eq!(ledger::snapshot_total().sym_cipher_calls, 3);
        guard.finish();
    }
}
