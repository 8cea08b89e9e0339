//! Classic finite-field Diffie-Hellman in a fixed 1024-bit MODP group
//! (the well-known Oakley Group 2 safe prime, generator 2).
//!
//! Elements travel as 128-byte big-endian integers. Exponents are 256-bit.
//! Every `dh_exp` call counts one `modexps` tick.

use std::sync::OnceLock;

use num_bigint::BigUint;
use rand_core::Rng;

use super::ledger::{self, OpKind};
use super::CryptoError;

pub const DH_ELEMENT_LEN: usize = 128;
pub const DH_EXPONENT_LEN: usize = 32;

/// 1024-bit MODP safe prime (Oakley Group 2), big-endian hex.
pub const MODULUS_HEX: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE65381FFFFFFFFFFFFFFFF";

fn modulus() -> &'static BigUint {
    static MODULUS: OnceLock<BigUint> = OnceLock::new();
    MODULUS.get_or_init(|| {
        BigUint::parse_bytes(MODULUS_HEX.as_bytes(), 16).expect("fixed modulus parses")
    })
}

/// An element of the DH group, in `(1, modulus-1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhElement(BigUint);

impl DhElement {
    pub fn generator() -> Self {
        DhElement(BigUint::from(2u32))
    }

    /// Fixed-width 128-byte big-endian encoding.
    pub fn encode(&self) -> [u8; DH_ELEMENT_LEN] {
        let bytes = self.0.to_bytes_be();
        let mut out = [0u8; DH_ELEMENT_LEN];
        out[DH_ELEMENT_LEN - bytes.len()..].copy_from_slice(&bytes);
        out
    }

    /// Rejects 0, 1, and modulus-1 (degenerate / small-subgroup values) as
    /// well as anything >= modulus.
    pub fn decode(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != DH_ELEMENT_LEN {
            return Err(CryptoError::Length { expected: DH_ELEMENT_LEN, got: bytes.len() });
        }
        let v = BigUint::from_bytes_be(bytes);
        let m = modulus();
        if v <= BigUint::from(1u32) || v >= m - 1u32 {
            return Err(CryptoError::InvalidDhElement);
        }
        Ok(DhElement(v))
    }
}

/// A 256-bit DH exponent (kept far below the group order, which is fine for
/// a 128-bit security target).
#[derive(Debug, Clone)]
pub struct DhExponent(BigUint);

impl DhExponent {
    /// Uniform nonzero 256-bit exponent.
    pub fn random(rng: &mut impl Rng) -> Self {
        loop {
            let mut bytes = [0u8; DH_EXPONENT_LEN];
            rng.fill_bytes(&mut bytes);
            let v = BigUint::from_bytes_be(&bytes);
            if v.bits() != 0 {
                return DhExponent(v);
            }
        }
    }

    pub fn from_bytes(bytes: &[u8; DH_EXPONENT_LEN]) -> Option<Self> {
        let v = BigUint::from_bytes_be(bytes);
        if v.bits() == 0 { None } else { Some(DhExponent(v)) }
    }
}

/// Modular exponentiation `base^exp mod modulus`. Counts one `modexps` tick.
pub fn dh_exp(base: &DhElement, exp: &DhExponent) -> DhElement {
    ledger::bump(OpKind::ModExp, 1);
    DhElement(base.0.modpow(&exp.0, modulus()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ledger;
    use rand_core::SeedableRng;

    type TestRng = rand_chacha::ChaCha20Rng;

    /// Independent square-and-multiply reference driven off the exponent's
    /// big-endian bytes, using only BigUint multiplication and reduction.
    fn square_and_multiply(base: &DhElement, exp: &DhExponent) -> DhElement {
        let m = modulus();
        let mut acc = BigUint::from(1u32);
        for byte in exp.0.to_bytes_be() {
            for bit in (0..8).rev() {
                acc = &acc * &acc % m;
                if (byte >> bit) & 1 == 1 {
                    acc = &acc * &base.0 % m;
                }
            }
        }
        DhElement(acc)
    }

    #[test]
    fn modulus_has_its_published_shape() {
        // The fixed prime is 2^1024 - 2^960 - 1 + 2^64*k: exactly 1024 bits
        // with all-ones top and bottom 64-bit words.
        let m = modulus();
        assert_eq!(m.bits(), 1024);
        assert!(MODULUS_HEX.starts_with("FFFFFFFFFFFFFFFF"));
        assert!(MODULUS_HEX.ends_with("FFFFFFFFFFFFFFFF"));
        assert_eq!(MODULUS_HEX.len(), 256);
    }

    #[test]
    fn dh_exp_matches_square_and_multiply_oracle() {
        let mut rng = TestRng::seed_from_u64(21);
        let g = DhElement::generator();
        for _ in 0..20 {
            let e = DhExponent::random(&mut rng);
            let direct = dh_exp(&g, &e);
            assert_eq!(direct, square_and_multiply(&g, &e));
        }
    }

    #[test]
    fn shared_secret_commutes() {
        let mut rng = TestRng::seed_from_u64(22);
        let g = DhElement::generator();
        for _ in 0..100 {
            let a = DhExponent::random(&mut rng);
            let b = DhExponent::random(&mut rng);
            let ga = dh_exp(&g, &a);
            let gb = dh_exp(&g, &b);
            assert_eq!(dh_exp(&gb, &a), dh_exp(&ga, &b));
        }
    }

    #[test]
    fn element_codec_enforces_range() {
        let mut rng = TestRng::seed_from_u64(23);
        let share = dh_exp(&DhElement::generator(), &DhExponent::random(&mut rng));
        let enc = share.encode();
        assert_eq!(enc.len(), DH_ELEMENT_LEN);
        assert_eq!(DhElement::decode(&enc).unwrap(), share);

        assert!(DhElement::decode(&[0u8; DH_ELEMENT_LEN]).is_err()); // zero
        let mut one = [0u8; DH_ELEMENT_LEN];
        one[DH_ELEMENT_LEN - 1] = 1;
        assert!(DhElement::decode(&one).is_err());
        assert!(DhElement::decode(&[0xff; DH_ELEMENT_LEN]).is_err()); // >= modulus
        let pm1 = DhElement(modulus() - 1u32).encode();
        assert!(DhElement::decode(&pm1).is_err()); // order-2 subgroup
        assert!(DhElement::decode(&[0u8; 64]).is_err()); // wrong length
    }

    #[test]
    fn dh_exp_ticks_ledger() {
        let mut rng = TestRng::seed_from_u64(24);
        let e = DhExponent::random(&mut rng);
        let guard = ledger::begin();
        dh_exp(&DhElement::generator(), &e);
        assert_eq!(ledger::snapshot_total().modexps, 1);
        assert_eq!(ledger::snapshot_total().scalar_mults, 0);
        guard.finish();
    }
}
