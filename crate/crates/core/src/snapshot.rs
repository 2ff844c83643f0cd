//! Self-describing binary snapshots: one UTF-8 JSON header line, then one
//! little-endian `f64` block per field (row-major, `x` fastest).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Field, State};

pub const FORMAT: &str = "vll-snapshot";
pub const VERSION: u32 = 1;
/// Longest header accepted by the decoder.
pub const MAX_HEADER: usize = 64 * 1024;
/// Largest sample count accepted per field.
pub const MAX_SAMPLES: usize = 1 << 26;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub nx: usize,
    pub ny: usize,
    pub time: f64,
    pub fields: Vec<String>,
    pub byte_order: String,
    /// Second axis label; `z_fast` for inner profiles, absent for physical `y`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
    /// Expansion order of an inner profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub header: Header,
    pub fields: Vec<Field>,
}

pub const STATE_FIELDS: [&str; 4] = ["u1", "u2", "theta", "p"];

impl Snapshot {
    pub fn from_state(s: &State) -> Self {
        Self::new(
            s.time,
            STATE_FIELDS
                .iter()
                .zip([&s.u1, &s.u2, &s.theta, &s.p])
                .map(|(n, f)| (n.to_string(), f.clone()))
                .collect(),
        )
    }

    /// Panics if the fields differ in shape.
    pub fn new(time: f64, named: Vec<(String, Field)>) -> Self {
        let (nx, ny) = named.first().map_or((0, 0), |(_, f)| (f.nx(), f.ny()));
        assert!(named.iter().all(|(_, f)| f.nx() == nx && f.ny() == ny));
        let (names, fields) = named.into_iter().unzip();
        Self {
            header: Header {
                format: FORMAT.into(),
                version: VERSION,
                nx,
                ny,
                time,
                fields: names,
                byte_order: "little".into(),
                axis: None,
                order: None,
            },
            fields,
        }
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.header
            .fields
            .iter()
            .position(|n| n == name)
            .map(|i| &self.fields[i])
    }

    pub fn to_state(&self) -> Result<State> {
        let get = |n: &str| {
            self.field(n)
                .cloned()
                .ok_or_else(|| Error::Format(format!("missing field `{n}`")))
        };
        Ok(State {
            u1: get("u1")?,
            u2: get("u2")?,
            theta: get("theta")?,
            p: get("p")?,
            time: self.header.time,
            wall_ghost: None,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.header).expect("header serialises");
        out.push(b'\n');
        for f in &self.fields {
            for v in f.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Snapshot> {
        let limit = bytes.len().min(MAX_HEADER);
        let nl = bytes[..limit]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("no header line terminator".into()))?;
        let text = std::str::from_utf8(&bytes[..nl])
            .map_err(|e| Error::Format(format!("header is not UTF-8: {e}")))?;
        let header: Header = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("header JSON: {e}")))?;
        if header.format != FORMAT {
            return Err(Error::Format(format!("unknown format `{}`", header.format)));
        }
        if header.version != VERSION {
            return Err(Error::Format(format!("unsupported version {}", header.version)));
        }
        if header.byte_order != "little" {
            return Err(Error::Format(format!(
                "unsupported byte order `{}`",
                header.byte_order
            )));
        }
        if !header.time.is_finite() {
            return Err(Error::Format("non-finite time".into()));
        }
        let samples = header
            .nx
            .checked_mul(header.ny)
            .filter(|&s| s <= MAX_SAMPLES)
            .ok_or_else(|| Error::Format("grid dimensions too large".into()))?;
        let mut seen = std::collections::HashSet::new();
        for n in &header.fields {
            if !seen.insert(n.as_str()) {
                return Err(Error::Format(format!("duplicate field `{n}`")));
            }
        }
        let payload = &bytes[nl + 1..];
        let expected = samples
            .checked_mul(8)
            .and_then(|b| b.checked_mul(header.fields.len()))
            .ok_or_else(|| Error::Format("payload size overflows".into()))?;
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "payload has {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let mut fields = Vec::with_capacity(header.fields.len());
        for (b, name) in header.fields.iter().enumerate() {
            let block = &payload[b * samples * 8..(b + 1) * samples * 8];
            let values: Vec<f64> = block
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("non-finite sample in `{name}`")));
            }
            fields.push(Field::from_vec(header.nx, header.ny, values)?);
        }
        Ok(Snapshot { header, fields })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Snapshot> {
        Snapshot::decode(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        let f = Field::from_vec(3, 2, vec![1.0, -2.5, 3.0, 0.0, 1e-300, 7.0]).unwrap();
        Snapshot::new(0.125, vec![("u1".into(), f.clone()), ("theta".into(), f.scale(2.0))])
    }

    #[test]
    fn roundtrip() {
        let s = sample();
        assert_eq!(Snapshot::decode(&s.encode()).unwrap(), s);
    }

    #[test]
    fn truncated_payload_rejected() {
        let mut b = sample().encode();
        b.pop();
        assert!(matches!(Snapshot::decode(&b), Err(Error::Format(_))));
    }

    #[test]
    fn header_is_one_json_line() {
        let b = sample().encode();
        let nl = b.iter().position(|&c| c == b'\n').unwrap();
        let v: serde_json::Value = serde_json::from_slice(&b[..nl]).unwrap();
        assert_eq!(v["byte_order"], "little");
        assert_eq!(v["fields"][1], "theta");
    }

    #[test]
    fn oversized_dimensions_rejected() {
        let h = r#"{"format":"vll-snapshot","version":1,"nx":18446744073709551615,"ny":2,"time":0,"fields":["a"],"byte_order":"little"}"#;
        let mut b = h.as_bytes().to_vec();
        b.push(b'\n');
        assert!(Snapshot::decode(&b).is_err());
    }
}
