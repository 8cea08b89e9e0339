//! Cryptographic primitives: prime-order group arithmetic, classic
//! finite-field Diffie-Hellman, hash functions, authenticated symmetric
//! encryption, and the operation-cost ledger that instruments all of them.

pub mod ledger;
pub mod group;
pub mod dh;
pub mod hashes;
pub mod aead;

use thiserror::Error;

/// Errors from primitive operations and codec validation.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("byte string is not a valid group element")]
    InvalidPoint,
    #[error("byte string is not a canonical scalar")]
    InvalidScalar,
    #[error("byte string is not a valid DH group element")]
    InvalidDhElement,
    #[error("authenticated decryption failed")]
    AeadFailure,
    #[error("wrong input length: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
}
