//! Binary envelope for shared-frame streams.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "SHRP" | version u8 | frame_count u32 | frame * frame_count | crc32 u32
//! ```
//!
//! A frame is 59 bytes: pseudonym u64, t (µs) u64, x/y/z/heading f64,
//! priority u8, stack_tag u8, sensor_kind u8, nominal_rate f32, size_bytes u32.
//! The checksum covers every byte before it.

use serde::{de::DeserializeOwned, Serialize};
use thiserror::Error;

use crate::obfuscation::{
    Micros, PayloadDescriptor, Priority, Pseudonym, SensorKind, SharedFrame, StackTag,
};
use crate::scene::Pose;

pub const MAGIC: [u8; 4] = *b"SHRP";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 9;
pub const FRAME_LEN: usize = 59;
pub const CHECKSUM_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("bad magic at byte {offset}")]
    BadMagic { offset: usize },
    #[error("unsupported version {version} at byte {offset}")]
    UnsupportedVersion { version: u8, offset: usize },
    #[error(
        "checksum mismatch at byte {offset}: stored {stored:#010x}, computed {computed:#010x}"
    )]
    ChecksumMismatch {
        offset: usize,
        stored: u32,
        computed: u32,
    },
    #[error("truncated payload at byte {offset}: need {needed} bytes, have {available}")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    /// More bytes than `frame_count` accounts for.
    #[error("trailing data at byte {offset}: expected {expected} bytes, got {actual}")]
    LengthMismatch {
        offset: usize,
        expected: usize,
        actual: usize,
    },
    #[error("invalid {field} code {value} at byte {offset}")]
    InvalidField {
        field: &'static str,
        value: u8,
        offset: usize,
    },
}

pub fn encoded_len(frame_count: usize) -> usize {
    HEADER_LEN + FRAME_LEN * frame_count + CHECKSUM_LEN
}

fn priority_code(p: Priority) -> u8 {
    match p {
        Priority::Normal => 0,
        Priority::Elevated => 1,
    }
}

fn stack_code(s: StackTag) -> u8 {
    match s {
        StackTag::Open => 0,
        StackTag::Proprietary => 1,
    }
}

fn sensor_code(s: SensorKind) -> u8 {
    match s {
        SensorKind::Camera => 0,
        SensorKind::Lidar => 1,
        SensorKind::Radar => 2,
    }
}

/// Encodes frames in the given order. Callers pass time-sorted frames.
pub fn encode(frames: &[SharedFrame]) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(frames.len()));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    for f in frames {
        out.extend_from_slice(&f.pseudonym.0.to_le_bytes());
        out.extend_from_slice(&f.t.0.to_le_bytes());
        let p = &f.forged_pose;
        for v in [p.x, p.y, p.z, p.heading] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(priority_code(f.priority));
        out.push(stack_code(f.stack_tag));
        out.push(sensor_code(f.payload.sensor_kind));
        out.extend_from_slice(&f.payload.nominal_rate.to_le_bytes());
        out.extend_from_slice(&f.payload.size_bytes.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N]
            .try_into()
            .expect("length checked");
        self.pos += N;
        out
    }

    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }

    fn code(&mut self, field: &'static str, max: u8) -> Result<u8, WireError> {
        let offset = self.pos;
        let value = self.u8();
        if value > max {
            return Err(WireError::InvalidField {
                field,
                value,
                offset,
            });
        }
        Ok(value)
    }
}

/// Validates structure, then checksum, then decodes. The structural checks
/// run first so a wrong version byte is reported as such.
pub fn decode(bytes: &[u8]) -> Result<Vec<SharedFrame>, WireError> {
    if bytes.len() < 4 {
        return Err(WireError::Truncated {
            offset: 0,
            needed: encoded_len(0),
            available: bytes.len(),
        });
    }
    if bytes[..4] != MAGIC {
        return Err(WireError::BadMagic { offset: 0 });
    }
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated {
            offset: bytes.len(),
            needed: encoded_len(0),
            available: bytes.len(),
        });
    }
    if bytes[4] != VERSION {
        return Err(WireError::UnsupportedVersion {
            version: bytes[4],
            offset: 4,
        });
    }
    let count = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let expected = encoded_len(count);
    if bytes.len() < expected {
        return Err(WireError::Truncated {
            offset: bytes.len(),
            needed: expected,
            available: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(WireError::LengthMismatch {
            offset: expected,
            expected,
            actual: bytes.len(),
        });
    }
    let body = expected - CHECKSUM_LEN;
    let stored = u32::from_le_bytes(bytes[body..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..body]);
    if stored != computed {
        return Err(WireError::ChecksumMismatch {
            offset: body,
            stored,
            computed,
        });
    }

    let mut c = Cursor {
        bytes,
        pos: HEADER_LEN,
    };
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        let pseudonym = Pseudonym(c.u64());
        let t = Micros(c.u64());
        let (x, y, z, heading) = (c.f64(), c.f64(), c.f64(), c.f64());
        let priority = match c.code("priority", 1)? {
            0 => Priority::Normal,
            _ => Priority::Elevated,
        };
        let stack_tag = match c.code("stack_tag", 1)? {
            0 => StackTag::Open,
            _ => StackTag::Proprietary,
        };
        let sensor_kind = match c.code("sensor_kind", 2)? {
            0 => SensorKind::Camera,
            1 => SensorKind::Lidar,
            _ => SensorKind::Radar,
        };
        let nominal_rate = c.f32();
        let size_bytes = c.u32();
        frames.push(SharedFrame {
            pseudonym,
            t,
            // fields are set directly so the heading bits survive untouched
            forged_pose: Pose { x, y, z, heading },
            payload: PayloadDescriptor {
                sensor_kind,
                nominal_rate,
                size_bytes,
            },
            priority,
            stack_tag,
        });
    }
    Ok(frames)
}

/// JSON mirror for debugging. The binary form is authoritative.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

pub fn from_json<T: DeserializeOwned>(s: &str) -> Result<T, serde_json::Error> {
    serde_json::from_str(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Vec<SharedFrame> {
        (0..n)
            .map(|i| SharedFrame {
                pseudonym: Pseudonym(0xdead_beef_0000 + i as u64),
                t: Micros(100_000 * i as u64),
                forged_pose: Pose::new(i as f64 * 1.5, -3.25, 0.5, 0.1 * i as f64),
                payload: PayloadDescriptor::default(),
                priority: if i % 2 == 0 {
                    Priority::Normal
                } else {
                    Priority::Elevated
                },
                stack_tag: StackTag::Open,
            })
            .collect()
    }

    #[test]
    fn empty_is_13_bytes() {
        let b = encode(&[]);
        assert_eq!(b.len(), 13);
        assert_eq!(&b[..4], b"SHRP");
        assert_eq!(decode(&b).unwrap(), vec![]);
    }

    #[test]
    fn roundtrip_and_determinism() {
        let frames = sample(5);
        let b = encode(&frames);
        assert_eq!(b.len(), encoded_len(5));
        assert_eq!(b, encode(&frames));
        assert_eq!(decode(&b).unwrap(), frames);
    }

    #[test]
    fn bit_flip_in_payload() {
        let mut b = encode(&sample(3));
        b[HEADER_LEN + 20] ^= 0x01;
        assert!(matches!(
            decode(&b),
            Err(WireError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn version_two_rejected() {
        let mut b = encode(&sample(1));
        b[4] = 2;
        assert_eq!(
            decode(&b),
            Err(WireError::UnsupportedVersion {
                version: 2,
                offset: 4
            })
        );
    }

    #[test]
    fn distinct_structural_errors() {
        let b = encode(&sample(2));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert_eq!(decode(&bad), Err(WireError::BadMagic { offset: 0 }));
        assert!(matches!(
            decode(&b[..b.len() - 1]),
            Err(WireError::Truncated { .. })
        ));
        assert!(matches!(decode(&b[..2]), Err(WireError::Truncated { .. })));
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(
            decode(&long),
            Err(WireError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn bad_enum_code_after_valid_checksum() {
        let mut b = encode(&sample(1));
        b.truncate(b.len() - CHECKSUM_LEN);
        b[HEADER_LEN + 48] = 7;
        let crc = crc32fast::hash(&b);
        b.extend_from_slice(&crc.to_le_bytes());
        assert_eq!(
            decode(&b),
            Err(WireError::InvalidField {
                field: "priority",
                value: 7,
                offset: HEADER_LEN + 48
            })
        );
    }

    #[test]
    fn json_mirror_roundtrip() {
        let frames = sample(3);
        let back: Vec<SharedFrame> = from_json(&to_json(&frames)).unwrap();
        assert_eq!(back, frames);
    }
}
