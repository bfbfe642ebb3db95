//! SHA-256 helpers shared by ids, caches and manifests.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Digest of a text, used as the lookup key of file-backed adapter stores.
pub fn text_digest(text: &str) -> String {
    sha256_hex(text.as_bytes())
}

/// Digest of the compact JSON encoding of `value`. Struct fields serialize in
/// declaration order and maps are `BTreeMap`s, so the encoding is canonical.
pub fn json_digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    sha256_hex(bytes)
}

/// First 64 bits of SHA-256 over the given parts, separated by a unit separator.
pub fn hash_u64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0x1f]);
        }
        hasher.update(part);
    }
    let out = hasher.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}
