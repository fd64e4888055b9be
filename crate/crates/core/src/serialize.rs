//! Flat binary container for network parameters.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! offset   size      field
//! 0        8         magic  b"SIAMNET\0"
//! 8        4         format version (u32, currently 1)
//! 12       4         header length H (u32)
//! 16       H         header: UTF-8 text, one `key=value` per line
//! 16+H     4         record count R (u32)
//!          R times:
//!            2       name length L (u16)
//!            L       name (UTF-8)
//!            1       rank r (u8)
//!            4*r     dims (u32 each)
//!            8*n     values (f64 each), n = product of dims
//! end-32   32        SHA-256 of every preceding byte
//! ```
//!
//! Header keys and values may not contain `=` in keys or newlines anywhere.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"SIAMNET\0";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

/// Header lines plus named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Container {
    pub header: Vec<(String, String)>,
    pub records: Vec<(String, Tensor)>,
}

impl Container {
    pub fn header_value(&self, key: &str) -> Result<String> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::Format(format!("header is missing '{key}'")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = String::new();
        for (k, v) in &self.header {
            if k.contains('=') || k.contains('\n') || v.contains('\n') {
                return Err(Error::Format(format!("unencodable header entry {k:?}={v:?}")));
            }
            header.push_str(k);
            header.push('=');
            header.push_str(v);
            header.push('\n');
        }
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (name, tensor) in &self.records {
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::Format(format!("record name too long: {name}")))?;
            let rank = u8::try_from(tensor.rank())
                .map_err(|_| Error::Format(format!("rank too large for {name}")))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(rank);
            for &d in tensor.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in tensor.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 12 + DIGEST_LEN {
            return Err(Error::Format("file too short for a model container".into()));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Format("bad magic; not a model container".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Format("checksum mismatch (truncated or corrupted file)".into()));
        }
        let mut r = Reader { buf: body, pos: 8 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported container version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let header_len = r.u32()? as usize;
        let header_text = std::str::from_utf8(r.take(header_len)?)
            .map_err(|_| Error::Format("header is not UTF-8".into()))?;
        let header = header_text
            .lines()
            .map(|line| {
                line.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::Format(format!("bad header line '{line}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let count = r.u32()? as usize;
        let mut records = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("record name is not UTF-8".into()))?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("record too large".into()))?)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let tensor = Tensor::new(shape, values).map_err(|e| Error::Format(e.to_string()))?;
            records.push((name, tensor));
        }
        if r.pos != body.len() {
            return Err(Error::Format("trailing bytes after last record".into()));
        }
        Ok(Container { header, records })
    }

    /// Write atomically: the target is replaced only once the new file is
    /// completely on disk.
    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        let mut file = fs::File::create(&tmp).map_err(|e| Error::storage(&tmp, e))?;
        file.write_all(&bytes)
            .and_then(|_| file.sync_all())
            .map_err(|e| Error::storage(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::storage(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::storage(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("unexpected end of container".into()))?;
        let slice = &self.buf[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Container {
        Container {
            header: vec![("kind".into(), "test".into()), ("n".into(), "3".into())],
            records: vec![
                ("a.weight".into(), Tensor::from_fn(vec![2, 3], |i| i as f64 * 0.5)),
                ("a.bias".into(), Tensor::vector(&[-1.0, f64::MIN_POSITIVE])),
            ],
        }
    }

    #[test]
    fn layout_starts_with_magic_and_version() {
        let bytes = sample().to_bytes().unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        assert_eq!(&bytes[16..16 + header_len], b"kind=test\nn=3\n");
    }

    #[test]
    fn truncation_and_corruption_are_format_errors() {
        let bytes = sample().to_bytes().unwrap();
        for cut in [0, 7, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(Container::from_bytes(&bytes[..cut]), Err(Error::Format(_))));
        }
        let mut flipped = bytes.clone();
        flipped[30] ^= 1;
        assert!(matches!(Container::from_bytes(&flipped), Err(Error::Format(_))));
    }

    #[test]
    fn header_lookup() {
        let c = sample();
        assert_eq!(c.header_value("n").unwrap(), "3");
        assert!(c.header_value("missing").is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_preserves_bits(values in proptest::collection::vec(any::<f64>(), 1..40),
                                    name in "[a-z._0-9]{1,20}") {
            let c = Container {
                header: vec![("k".into(), "v w".into())],
                records: vec![(name, Tensor::vector(&values))],
            };
            let back = Container::from_bytes(&c.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back.header, c.header);
            let (a, b) = (&back.records[0].1, &c.records[0].1);
            prop_assert_eq!(a.shape(), b.shape());
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
