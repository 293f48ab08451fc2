//! Binary embedding files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "QADSEMB1"  u32 dim  u64 count
//! count x { u32 id_len, id bytes (UTF-8), dim x f32 }
//! ```

use std::fs;
use std::path::Path;

use qads_core::geometry::EmbeddingSet;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"QADSEMB1";

pub fn encode(emb: &EmbeddingSet) -> Vec<u8> {
    let dim = emb.dim();
    let mut out = Vec::with_capacity(20 + emb.len() * (4 + 16 + 4 * dim));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(emb.len() as u64).to_le_bytes());
    for (id, row) in emb.rows() {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> std::result::Result<&'a [u8], String> {
        if self.buf.len() - self.pos < n {
            return Err(format!("truncated while reading {what} at byte {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<EmbeddingSet, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err("bad magic".to_string());
    }
    let dim = r.u32("dimension")? as usize;
    if dim == 0 {
        return Err("dimension is zero".to_string());
    }
    let count = r.u64("count")?;
    let mut emb = EmbeddingSet::new(dim).map_err(|e| e.to_string())?;
    let mut row = vec![0f32; dim];
    for i in 0..count {
        let len = r.u32("id length")? as usize;
        let id = std::str::from_utf8(r.take(len, "id")?).map_err(|e| format!("record {i}: id is not UTF-8: {e}"))?;
        let raw = r.take(4 * dim, "vector")?;
        for (v, chunk) in row.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        emb.push(id, &row).map_err(|e| format!("record {i}: {e}"))?;
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(emb)
}

pub fn save_embeddings(emb: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(emb)).map_err(Error::io(path))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode(&bytes).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingSet {
        let mut e = EmbeddingSet::new(3).unwrap();
        e.push("a", &[1.0, -0.5, 3.25]).unwrap();
        e.push("b:é", &[0.0, f32::MIN_POSITIVE, -0.0]).unwrap();
        e
    }

    #[test]
    fn exact_layout() {
        let mut e = EmbeddingSet::new(2).unwrap();
        e.push("ab", &[1.0, -2.0]).unwrap();
        let bytes = encode(&e);
        let mut expect = b"QADSEMB1".to_vec();
        expect.extend([2, 0, 0, 0]);
        expect.extend([1, 0, 0, 0, 0, 0, 0, 0]);
        expect.extend([2, 0, 0, 0, b'a', b'b']);
        expect.extend(1.0f32.to_le_bytes());
        expect.extend((-2.0f32).to_le_bytes());
        assert_eq!(bytes, expect);
    }

    #[test]
    fn round_trip_bits() {
        let e = sample();
        let back = decode(&encode(&e)).unwrap();
        assert_eq!(back.ids(), e.ids());
        for i in 0..e.len() {
            let a: Vec<u32> = e.row(i).iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.row(i).iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empty_set_is_valid() {
        let e = EmbeddingSet::new(64).unwrap();
        let back = decode(&encode(&e)).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.dim(), 64);
    }

    #[test]
    fn corruption_is_rejected() {
        let bytes = encode(&sample());
        for cut in 0..bytes.len() {
            assert!(decode(&bytes[..cut]).is_err(), "prefix of {cut} bytes accepted");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode(&bad).unwrap_err(), "bad magic");
        let mut zero_dim = bytes.clone();
        zero_dim[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(decode(&zero_dim).is_err());
        let mut wrong_dim = bytes.clone();
        wrong_dim[8..12].copy_from_slice(&4u32.to_le_bytes());
        assert!(decode(&wrong_dim).is_err());
        let mut trailing = bytes;
        trailing.push(0);
        assert!(decode(&trailing).unwrap_err().contains("trailing"));
    }

    #[test]
    fn load_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.qemb");
        std::fs::write(&p, b"QADS").unwrap();
        let err = load_embeddings(&p).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().contains("e.qemb"));
    }
}
