//! Certificateless key infrastructure.
//!
//! A key generation center (run by the AUSF) holds the master secret and
//! issues each identity a partial key over an authenticated channel. A full
//! key pair combines the user-chosen secret `x` with the issued secret `z`;
//! the corresponding verify key is reconstructable by anyone from public
//! data alone, so no certificates circulate:
//!
//! ```text
//! z = y + x0 * h0(id, Y, X, Q)        (issued by the KGC, Y = y*P)
//! (x + z) * P == X + Y + h0(id, Y, X, Q) * Q
//! ```
//!
//! The KGC never learns `x` — registration submits only `X = x*P`. The KGC
//! also runs the behavior blacklist: revocation is append-only, and repeat
//! offenders are revoked automatically at a configurable threshold.

use std::collections::BTreeMap;

use rand_core::Rng;
use thiserror::Error;

use crate::crypto::group::{point_add, scalar_mult, GroupElement, NonZeroScalar, Scalar};
use crate::crypto::hashes::h0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PkiError {
    #[error("identity {0:?} is already registered")]
    DuplicateId(String),
    #[error("identity {0:?} is blacklisted")]
    BlacklistedId(String),
    #[error("identity {0:?} is not registered")]
    UnknownId(String),
    #[error("issued key for {0:?} fails the registration identity")]
    KeyMismatch(String),
}

/// Public system parameters fixed at setup.
#[derive(Debug, Clone, Copy)]
pub struct SystemParams {
    /// KGC master public key `Q = x0 * P`.
    pub master_pub: GroupElement,
}

impl SystemParams {
    /// Human-readable suite description (group, DH group, hashes, cipher).
    pub const SUITE: &'static str = "secp256k1 + modp1024-dh + sha256 + aes256gcm";

    pub fn generator(&self) -> GroupElement {
        GroupElement::generator()
    }
}

/// Public key of one identity: the user-chosen part `X` and the KGC part `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublicKey {
    pub user_pub: GroupElement,
    pub kgc_pub: GroupElement,
}

/// The KGC's answer to a registration: the issued public part and the
/// partial secret (delivered over the authenticated registration channel).
#[derive(Debug, Clone)]
pub struct IssuedShare {
    pub kgc_pub: GroupElement,
    pub issued_secret: Scalar,
}

/// A party's complete key material.
#[derive(Debug, Clone)]
pub struct FullKeyPair {
    pub id: String,
    pub public: PublicKey,
    user_secret: Scalar,
    issued_secret: Scalar,
}

impl FullKeyPair {
    /// Combines the user secret with an issued share, checking the
    /// registration identity before accepting the key.
    pub fn assemble(
        params: &SystemParams,
        id: &str,
        user_secret: Scalar,
        issued: IssuedShare,
    ) -> Result<FullKeyPair, PkiError> {
        let public = PublicKey {
            user_pub: scalar_mult(&user_secret, &GroupElement::generator()),
            kgc_pub: issued.kgc_pub,
        };
        let combined = user_secret.add(&issued.issued_secret);
        let lhs = scalar_mult(&combined, &GroupElement::generator());
        if lhs != derive_verify_key(params, id, &public).0 {
            return Err(PkiError::KeyMismatch(id.to_owned()));
        }
        Ok(FullKeyPair {
            id: id.to_owned(),
            public,
            user_secret,
            issued_secret: issued.issued_secret,
        })
    }

    /// The combined signing secret `x + z`.
    pub(crate) fn signing_secret(&self) -> Scalar {
        self.user_secret.add(&self.issued_secret)
    }
}

/// A derived verify key `X + Y + h0(id, Y, X, Q) * Q`.
///
/// Deriving costs one scalar multiplication; protocol parties derive each
/// peer's verify key once and reuse it where an operation's cost contract
/// expects the derived form as input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyKey(pub(crate) GroupElement);

/// Reconstructs the verify key for `id` from public data.
pub fn derive_verify_key(params: &SystemParams, id: &str, public: &PublicKey) -> VerifyKey {
    let e = h0(id.as_bytes(), &public.kgc_pub, &public.user_pub, &params.master_pub);
    let sum = point_add(&public.user_pub, &public.kgc_pub);
    VerifyKey(point_add(&sum, &scalar_mult(&e, &params.master_pub)))
}

/// True iff `probe_sig` on `probe_msg` verifies under the verify key derived
/// from `(id, public)` — i.e. the claimed key pair is internally consistent
/// and matches the registry without any certificate.
pub fn verify_public_key(
    params: &SystemParams,
    id: &str,
    public: &PublicKey,
    probe_msg: &[u8],
    probe_sig: &crate::signcrypt::Signature,
) -> bool {
    crate::signcrypt::verify(params, id, public, probe_msg, probe_sig)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Active,
    Revoked,
}

#[derive(Debug, Clone)]
struct RegistryEntry {
    public: PublicKey,
    status: Status,
    offenses: u32,
}

/// Key generation center state: master secret, registry, and blacklist.
#[derive(Debug)]
pub struct KgcState {
    params: SystemParams,
    master_secret: NonZeroScalar,
    registry: BTreeMap<String, RegistryEntry>,
    offense_threshold: u32,
}

/// Initializes the KGC for the fixed 128-bit profile.
pub fn setup(security_param: u32, rng: &mut impl Rng) -> KgcState {
    assert_eq!(security_param, 128, "only the 128-bit profile is defined");
    let master_secret = NonZeroScalar::random(rng);
    let master_pub = scalar_mult(master_secret.as_scalar(), &GroupElement::generator());
    KgcState {
        params: SystemParams { master_pub },
        master_secret,
        registry: BTreeMap::new(),
        offense_threshold: 1,
    }
}

impl KgcState {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Offenses needed before automatic revocation (default 1).
    pub fn set_offense_threshold(&mut self, threshold: u32) {
        self.offense_threshold = threshold.max(1);
    }

    /// Registers `id` with its user-chosen public part and issues the
    /// partial key. The user secret never reaches the KGC.
    pub fn register(
        &mut self,
        id: &str,
        user_pub: &GroupElement,
        rng: &mut impl Rng,
    ) -> Result<IssuedShare, PkiError> {
        match self.registry.get(id) {
            Some(e) if e.status == Status::Revoked => {
                return Err(PkiError::BlacklistedId(id.to_owned()))
            }
            Some(_) => return Err(PkiError::DuplicateId(id.to_owned())),
            None => {}
        }
        let y = Scalar::random_nonzero(rng);
        let kgc_pub = scalar_mult(&y, &GroupElement::generator());
        let e = h0(id.as_bytes(), &kgc_pub, user_pub, &self.params.master_pub);
        let issued_secret = y.add(&e.mul(self.master_secret.as_scalar()));
        self.registry.insert(
            id.to_owned(),
            RegistryEntry {
                public: PublicKey { user_pub: *user_pub, kgc_pub },
                status: Status::Active,
                offenses: 0,
            },
        );
        Ok(IssuedShare { kgc_pub, issued_secret })
    }

    /// Registered public key, if any (revoked identities still resolve —
    /// their key material stays on record).
    pub fn public_key(&self, id: &str) -> Option<&PublicKey> {
        self.registry.get(id).map(|e| &e.public)
    }

    pub fn is_blacklisted(&self, id: &str) -> bool {
        matches!(self.registry.get(id), Some(e) if e.status == Status::Revoked)
    }

    /// Puts `id` on the blacklist. Append-only: there is no un-revoke.
    pub fn revoke(&mut self, id: &str) -> Result<(), PkiError> {
        let entry = self
            .registry
            .get_mut(id)
            .ok_or_else(|| PkiError::UnknownId(id.to_owned()))?;
        entry.status = Status::Revoked;
        Ok(())
    }

    /// Records a misbehavior report; revokes once the threshold is reached.
    /// Returns true if the identity is (now) blacklisted.
    pub fn report_offense(&mut self, id: &str) -> bool {
        match self.registry.get_mut(id) {
            Some(entry) => {
                entry.offenses += 1;
                if entry.offenses >= self.offense_threshold {
                    entry.status = Status::Revoked;
                }
                entry.status == Status::Revoked
            }
            None => false,
        }
    }

    /// Registry snapshot as `id,status` lines (sorted by id).
    pub fn export_registry(&self) -> String {
        let mut out = String::new();
        for (id, entry) in &self.registry {
            let status = match entry.status {
                Status::Active => "active",
                Status::Revoked => "revoked",
            };
            out.push_str(&format!("{id},{status}\n"));
        }
        out
    }
}

/// Client-side enrollment: draw the user secret, register, and assemble the
/// checked key pair.
pub fn enroll(kgc: &mut KgcState, id: &str, rng: &mut impl Rng) -> Result<FullKeyPair, PkiError> {
    let user_secret = Scalar::random_nonzero(rng);
    let user_pub = scalar_mult(&user_secret, &GroupElement::generator());
    let issued = kgc.register(id, &user_pub, rng)?;
    let params = *kgc.params();
    FullKeyPair::assemble(&params, id, user_secret, issued)
}

/// Public-key directory a party carries into a session: a read-only
/// snapshot of the registry for the identities it will talk to.
#[derive(Debug, Clone, Default)]
pub struct Directory {
    entries: BTreeMap<String, PublicKey>,
}

impl Directory {
    pub fn from_kgc(kgc: &KgcState, ids: &[String]) -> Self {
        let mut entries = BTreeMap::new();
        for id in ids {
            if let Some(pk) = kgc.public_key(id) {
                entries.insert(id.clone(), *pk);
            }
        }
        Directory { entries }
    }

    pub fn insert(&mut self, id: &str, pk: PublicKey) {
        self.entries.insert(id.to_owned(), pk);
    }

    pub fn get(&self, id: &str) -> Option<&PublicKey> {
        self.entries.get(id)
    }
}
