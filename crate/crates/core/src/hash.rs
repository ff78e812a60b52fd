//! Content hashing and seed derivation.

use sha2::{Digest, Sha256};

/// Converts CRLF and lone CR line endings to LF.
pub fn normalize_newlines(source: &str) -> String {
    if !source.contains('\r') {
        return source.to_string();
    }
    source.replace("\r\n", "\n").replace('\r', "\n")
}

/// Hex SHA-256 of the LF-normalized source.
pub fn content_hash(source: &str) -> String {
    sha256_hex(normalize_newlines(source).as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Per-stage seed: `seed XOR fnv1a64(stage)`.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    seed ^ fnv1a64(stage.as_bytes())
}
