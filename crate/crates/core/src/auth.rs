//! Credential generation and hashing.
//!
//! Passwords are never chosen by people: they are generated with 12
//! alphanumeric characters (~71 bits), so a salted SHA-256 suffices and
//! keeps bulk generation for large classes fast.

use rand::distr::{Alphanumeric, SampleString};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const PASSWORD_LEN: usize = 12;
const USERNAME_LEN: usize = 8;
const USERNAME_ALPHABET: &[u8] = b"abcdefghjkmnpqrstuvwxyz23456789";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialHash {
    salt: String,
    digest: String,
}

impl CredentialHash {
    pub fn new(password: &str) -> Self {
        let mut salt = [0u8; 16];
        rand::rng().fill_bytes(&mut salt);
        let salt = hex::encode(salt);
        let digest = digest(&salt, password);
        CredentialHash { salt, digest }
    }

    pub fn verify(&self, password: &str) -> bool {
        constant_time_eq(
            digest(&self.salt, password).as_bytes(),
            self.digest.as_bytes(),
        )
    }
}

fn digest(salt: &str, password: &str) -> String {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update([0u8]);
    h.update(password.as_bytes());
    hex::encode(h.finalize())
}

pub(crate) fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Opaque login code with no relation to the person using it.
pub fn generate_username() -> String {
    let mut rng = rand::rng();
    (0..USERNAME_LEN)
        .map(|_| USERNAME_ALPHABET[rng.random_range(0..USERNAME_ALPHABET.len())] as char)
        .collect()
}

pub fn generate_password() -> String {
    Alphanumeric.sample_string(&mut rand::rng(), PASSWORD_LEN)
}

/// 256-bit random session token, hex encoded.
pub fn generate_token() -> String {
    let mut bytes = [0u8; 32];
    rand::rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}
