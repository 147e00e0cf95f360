//! Content digests for snapshots, changesets, and log entries.
//!
//! Everything hashable in this crate is first rendered to canonical text, so a
//! simple, stable, dependency-free hash over those bytes is sufficient. We use
//! 64-bit FNV-1a and render digests as 16 lowercase hex characters.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the given bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Digest rendered the way it appears in logs and reports: 16 lowercase hex digits.
pub fn hex16(digest: u64) -> String {
    format!("{digest:016x}")
}

/// Convenience: hash canonical text straight to its rendered form.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex16(fnv1a64(bytes))
}

/// Parse a 16-character lowercase hex digest back to its integer form.
pub fn parse_hex16(s: &str) -> Option<u64> {
    if s.len() != 16 || !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return None;
    }
    u64::from_str_radix(s, 16).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_yields_offset_basis() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
    }

    #[test]
    fn known_vectors() {
        // Standard FNV-1a test vectors.
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn hex_rendering_is_lowercase_and_padded() {
        assert_eq!(hex16(0xA), "000000000000000a");
        assert_eq!(hex16(0xcbf29ce484222325), "cbf29ce484222325");
    }

    #[test]
    fn hex_round_trip() {
        for input in [0u64, 1, 0xdeadbeef, u64::MAX] {
            assert_eq!(parse_hex16(&hex16(input)), Some(input));
        }
        assert_eq!(parse_hex16("xyz"), None);
        assert_eq!(parse_hex16("ABCDEF0123456789"), None); // uppercase rejected
    }
}
