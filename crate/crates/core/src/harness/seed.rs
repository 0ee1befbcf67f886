use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"scarv-seed-v1";

/// Seed for one consumer of randomness in an experiment.
///
/// The tuple is encoded as the domain tag `scarv-seed-v1`, then `master`,
/// `outer_run` and `index` as little-endian `u64`, with `role` in between as
/// its byte length (`u64` LE) followed by its UTF-8 bytes. The seed is the
/// first eight bytes of the SHA-256 digest read as a little-endian `u64`.
pub fn derive_seed(master: u64, outer_run: usize, role: &str, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(master.to_le_bytes());
    h.update((outer_run as u64).to_le_bytes());
    h.update((role.len() as u64).to_le_bytes());
    h.update(role.as_bytes());
    h.update((index as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
