//! Variable-length integers with a two-bit length prefix (1, 2, 4 or 8
//! bytes, big-endian), as used by QUIC.

/// Largest encodable value, 2^62 - 1.
pub const VARINT_MAX: u64 = (1 << 62) - 1;

/// Bytes needed for the shortest encoding of `v`, or `None` if it is too
/// large.
pub fn varint_len(v: u64) -> Option<usize> {
    match v {
        0..=63 => Some(1),
        64..=16_383 => Some(2),
        16_384..=1_073_741_823 => Some(4),
        1_073_741_824..=VARINT_MAX => Some(8),
        _ => None,
    }
}

/// Appends the shortest encoding of `v`. Panics if `v > VARINT_MAX`.
pub fn encode_varint(v: u64, out: &mut Vec<u8>) {
    match varint_len(v).expect("varint out of range") {
        1 => out.push(v as u8),
        2 => out.extend_from_slice(&(0x4000 | v as u16).to_be_bytes()),
        4 => out.extend_from_slice(&(0x8000_0000 | v as u32).to_be_bytes()),
        _ => out.extend_from_slice(&(0xC000_0000_0000_0000 | v).to_be_bytes()),
    }
}

/// Decodes one varint from the front of `buf`, returning the value and the
/// bytes consumed. `None` when `buf` is too short.
pub fn decode_varint(buf: &[u8]) -> Option<(u64, usize)> {
    let first = *buf.first()?;
    let len = 1usize << (first >> 6);
    let bytes = buf.get(..len)?;
    let mut v = u64::from(first & 0x3F);
    for &b in &bytes[1..] {
        v = (v << 8) | u64::from(b);
    }
    Some((v, len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boundary_lengths() {
        for (v, len) in [
            (0, 1),
            (63, 1),
            (64, 2),
            (16_383, 2),
            (16_384, 4),
            (1 << 30, 8),
            (VARINT_MAX, 8),
        ] {
            let mut out = Vec::new();
            encode_varint(v, &mut out);
            assert_eq!(out.len(), len, "{v}");
            assert_eq!(decode_varint(&out), Some((v, len)));
        }
        assert_eq!(varint_len(VARINT_MAX + 1), None);
    }

    #[test]
    fn known_encodings() {
        let mut out = Vec::new();
        encode_varint(37, &mut out);
        encode_varint(15_293, &mut out);
        encode_varint(494_878_333, &mut out);
        assert_eq!(out, [0x25, 0x7b, 0xbd, 0x9d, 0x7f, 0x3e, 0x7d]);
    }

    #[test]
    fn truncated() {
        assert_eq!(decode_varint(&[]), None);
        assert_eq!(decode_varint(&[0x80, 0x01]), None);
    }

    proptest! {
        #[test]
        fn round_trip(v in 0..=VARINT_MAX) {
            let mut out = Vec::new();
            encode_varint(v, &mut out);
            prop_assert_eq!(decode_varint(&out), Some((v, out.len())));
        }
    }
}
