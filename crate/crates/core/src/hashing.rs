use sha2::{Digest, Sha256};

/// First 16 hex digits of SHA-256 over the parts, each length-prefixed so
/// that `["ab", "c"]` and `["a", "bc"]` differ.
pub(crate) fn stable_hash<S: AsRef<str>>(parts: &[S]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        let p = p.as_ref().as_bytes();
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
