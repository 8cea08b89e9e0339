//! Prime-order group arithmetic over secp256k1.
//!
//! Group elements travel as 33-byte compressed points (the identity encodes
//! as 33 zero bytes), scalars as 32-byte big-endian integers reduced mod the
//! group order. Scalar multiplication and point addition are the two
//! instrumented operations; scalar field arithmetic is treated as free.

use k256::elliptic_curve::group::GroupEncoding;
use k256::elliptic_curve::ops::Reduce;
use k256::elliptic_curve::PrimeField;
use k256::{ProjectivePoint, U256};
use rand_core::Rng;

use super::ledger::{self, OpKind};
use super::CryptoError;

pub const POINT_LEN: usize = 33;
pub const SCALAR_LEN: usize = 32;

/// Group order of secp256k1, big-endian hex (for documentation and tests).
pub const ORDER_HEX: &str = "fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141";

/// An element of the secp256k1 group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupElement(ProjectivePoint);

impl GroupElement {
    pub fn generator() -> Self {
        GroupElement(ProjectivePoint::GENERATOR)
    }

    pub fn identity() -> Self {
        GroupElement(ProjectivePoint::IDENTITY)
    }

    pub fn is_identity(&self) -> bool {
        self.0 == ProjectivePoint::IDENTITY
    }

    /// 33-byte compressed encoding; the identity encodes as all zeroes.
    pub fn encode(&self) -> [u8; POINT_LEN] {
        let bytes = self.0.to_bytes();
        let mut out = [0u8; POINT_LEN];
        out.copy_from_slice(bytes.as_slice());
        out
    }

    /// Rejects byte strings that are not valid curve points.
    pub fn decode(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != POINT_LEN {
            return Err(CryptoError::Length { expected: POINT_LEN, got: bytes.len() });
        }
        let arr: [u8; POINT_LEN] = bytes.try_into().unwrap();
        Option::<ProjectivePoint>::from(ProjectivePoint::from_bytes((&arr).into()))
            .map(GroupElement)
            .ok_or(CryptoError::InvalidPoint)
    }

    pub(crate) fn raw_add(&self, other: &GroupElement) -> GroupElement {
        GroupElement(self.0 + other.0)
    }

    pub(crate) fn raw_mul(&self, k: &Scalar) -> GroupElement {
        GroupElement(self.0 * k.0)
    }
}

/// An integer mod the group order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scalar(k256::Scalar);

impl Scalar {
    pub fn zero() -> Self {
        Scalar(k256::Scalar::ZERO)
    }

    pub fn one() -> Self {
        Scalar(k256::Scalar::ONE)
    }

    pub fn is_zero(&self) -> bool {
        self.0 == k256::Scalar::ZERO
    }

    /// Uniform scalar in `[0, q)` by rejection sampling.
    pub fn random(rng: &mut impl Rng) -> Self {
        loop {
            let mut bytes = [0u8; SCALAR_LEN];
            rng.fill_bytes(&mut bytes);
            if let Ok(s) = Scalar::decode(&bytes) {
                return s;
            }
        }
    }

    /// Uniform scalar in `[1, q)` (the usual ephemeral/secret domain).
    pub fn random_nonzero(rng: &mut impl Rng) -> Self {
        loop {
            let s = Scalar::random(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        Scalar(self.0 + other.0)
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        Scalar(self.0 - other.0)
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        Scalar(self.0 * other.0)
    }

    /// 32-byte big-endian encoding.
    pub fn encode(&self) -> [u8; SCALAR_LEN] {
        let bytes = self.0.to_repr();
        let mut out = [0u8; SCALAR_LEN];
        out.copy_from_slice(bytes.as_slice());
        out
    }

    /// Rejects non-canonical encodings (values >= q).
    pub fn decode(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != SCALAR_LEN {
            return Err(CryptoError::Length { expected: SCALAR_LEN, got: bytes.len() });
        }
        let arr = k256::FieldBytes::try_from(bytes).unwrap();
        Option::<k256::Scalar>::from(k256::Scalar::from_repr(arr))
            .map(Scalar)
            .ok_or(CryptoError::InvalidScalar)
    }

    /// Interprets 32 bytes as a big-endian integer reduced mod q.
    /// Used by the hash-to-scalar constructions.
    pub(crate) fn from_bytes_reduced(bytes: &[u8; 32]) -> Self {
        Scalar(<k256::Scalar as Reduce<U256>>::reduce(&U256::from_be_slice(bytes)))
    }
}

/// A scalar guaranteed nonzero, for secrets drawn from Z_q*.
#[derive(Debug, Clone, Copy)]
pub struct NonZeroScalar(Scalar);

impl NonZeroScalar {
    pub fn new(s: Scalar) -> Option<Self> {
        if s.is_zero() { None } else { Some(NonZeroScalar(s)) }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        NonZeroScalar(Scalar::random_nonzero(rng))
    }

    pub fn as_scalar(&self) -> &Scalar {
        &self.0
    }
}

/// Scalar multiplication `k * point`. Counts one `scalar_mults` tick.
pub fn scalar_mult(k: &Scalar, point: &GroupElement) -> GroupElement {
    ledger::bump(OpKind::ScalarMult, 1);
    point.raw_mul(k)
}

/// Point addition. Counts one `point_adds` tick.
pub fn point_add(a: &GroupElement, b: &GroupElement) -> GroupElement {
    ledger::bump(OpKind::PointAdd, 1);
    a.raw_add(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ledger;
    use rand_core::SeedableRng;

    type TestRng = rand_chacha::ChaCha20Rng;

    /// Independent double-and-add reference for scalar multiplication,
    /// driven bit by bit off the scalar's big-endian encoding.
    fn double_and_add(k: &Scalar, point: &GroupElement) -> GroupElement {
        let mut acc = GroupElement::identity();
        for byte in k.encode() {
            for bit in (0..8).rev() {
                acc = acc.raw_add(&acc);
                if (byte >> bit) & 1 == 1 {
                    acc = acc.raw_add(point);
                }
            }
        }
        acc
    }

    #[test]
    fn scalar_mult_matches_double_and_add_oracle() {
        let mut rng = TestRng::seed_from_u64(7);
        let g = GroupElement::generator();
        for _ in 0..100 {
            let k = Scalar::random(&mut rng);
            let base = scalar_mult(&Scalar::random_nonzero(&mut rng), &g);
            assert_eq!(scalar_mult(&k, &base), double_and_add(&k, &base));
        }
    }

    #[test]
    fn group_laws() {
        let mut rng = TestRng::seed_from_u64(8);
        let g = GroupElement::generator();
        for _ in 0..100 {
            let a = Scalar::random(&mut rng);
            let b = Scalar::random(&mut rng);
            let p = scalar_mult(&Scalar::random_nonzero(&mut rng), &g);
            // (a+b)P == aP + bP
            assert_eq!(
                scalar_mult(&a.add(&b), &p),
                point_add(&scalar_mult(&a, &p), &scalar_mult(&b, &p))
            );
            // a(bP) == b(aP)
            assert_eq!(
                scalar_mult(&a, &scalar_mult(&b, &p)),
                scalar_mult(&b, &scalar_mult(&a, &p))
            );
        }
        // additive identity and annihilator
        let p = scalar_mult(&Scalar::random_nonzero(&mut rng), &g);
        assert_eq!(point_add(&p, &GroupElement::identity()), p);
        assert!(scalar_mult(&Scalar::zero(), &p).is_identity());
    }

    #[test]
    fn order_annihilates_generator() {
        let order = hex_to_scalar_unchecked(ORDER_HEX);
        // q == 0 mod q, so q*P must be the identity; (q-1)*P + P likewise.
        assert!(scalar_mult(&order, &GroupElement::generator()).is_identity());
        let q_minus_1 = Scalar::zero().sub(&Scalar::one());
        let almost = scalar_mult(&q_minus_1, &GroupElement::generator());
        assert!(point_add(&almost, &GroupElement::generator()).is_identity());
    }

    fn hex_to_scalar_unchecked(h: &str) -> Scalar {
        // The order itself reduces to zero.
        let bytes: [u8; 32] = hex::decode(h).unwrap().try_into().unwrap();
        Scalar::from_bytes_reduced(&bytes)
    }

    #[test]
    fn point_codec_roundtrip_and_rejection() {
        let mut rng = TestRng::seed_from_u64(9);
        for _ in 0..50 {
            let p = scalar_mult(&Scalar::random_nonzero(&mut rng), &GroupElement::generator());
            let enc = p.encode();
            assert_eq!(GroupElement::decode(&enc).unwrap(), p);
        }
        // identity round-trips through the all-zero encoding
        let id = GroupElement::identity();
        assert_eq!(id.encode(), [0u8; POINT_LEN]);
        assert_eq!(GroupElement::decode(&id.encode()).unwrap(), id);
        // wrong length and malformed strings are rejected
        assert_eq!(
            GroupElement::decode(&[2u8; 32]),
            Err(CryptoError::Length { expected: POINT_LEN, got: 32 })
        );
        let mut junk = [0xffu8; POINT_LEN]; // x-coordinate not in the field
        junk[0] = 0x02;
        assert_eq!(GroupElement::decode(&junk), Err(CryptoError::InvalidPoint));
    }

    #[test]
    fn scalar_codec_rejects_order_and_above() {
        let order_bytes = hex::decode(ORDER_HEX).unwrap();
        assert_eq!(Scalar::decode(&order_bytes), Err(CryptoError::InvalidScalar));
        assert_eq!(Scalar::decode(&[0xff; 32]), Err(CryptoError::InvalidScalar));
        let mut below = [0xffu8; 32];
        below[0] = 0x01;
        let s = Scalar::decode(&below).unwrap();
        assert_eq!(s.encode(), below);
    }

    #[test]
    fn sampling_respects_nonzero_domain() {
        let mut rng = TestRng::seed_from_u64(10);
        for _ in 0..200 {
            assert!(!Scalar::random_nonzero(&mut rng).is_zero());
        }
        assert!(NonZeroScalar::new(Scalar::zero()).is_none());
    }

    #[test]
    fn ops_tick_ledger_exactly_once() {
        let mut rng = TestRng::seed_from_u64(11);
        let k = Scalar::random_nonzero(&mut rng);
        let p = GroupElement::generator();
        let guard = ledger::begin();
        let q = scalar_mult(&k, &p);
        let before = ledger::snapshot_total();
        assert_eq!(before.scalar_mults, 1);
        point_add(&q, &p);
        let after = ledger::snapshot_total();
        assert_eq!(after.scalar_mults, 1);
        assert_eq!(after.point_adds, 1);
        guard.finish();
    }
}
