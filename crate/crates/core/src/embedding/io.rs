//! Store file format, little-endian:
//!
//! ```text
//! magic   8 bytes  "CREMB\0\0\0"
//! major   u16      readers refuse an unknown major
//! minor   u16
//! dim     u32
//! count   u32
//! count records of: id u32, then dim f32 values
//! ```
//!
//! Records are written in ascending id order.

use std::io::Write;

use super::{EmbeddingError, EmbeddingStore};
use crate::marketplace::DishId;

const MAGIC: &[u8; 8] = b"CREMB\0\0\0";
const MAJOR: u16 = 1;
const MINOR: u16 = 0;

impl EmbeddingStore {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::with_capacity(20 + self.len() * (4 + 4 * self.dim()));
        w.extend_from_slice(MAGIC);
        w.extend_from_slice(&MAJOR.to_le_bytes());
        w.extend_from_slice(&MINOR.to_le_bytes());
        w.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        w.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (id, v) in self.iter() {
            w.extend_from_slice(&id.0.to_le_bytes());
            for x in v {
                w.extend_from_slice(&x.to_le_bytes());
            }
        }
        w
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, EmbeddingError> {
        let corrupt = |m: &str| EmbeddingError::Corrupt(m.to_string());
        if b.len() < 20 || &b[..8] != MAGIC {
            return Err(corrupt("bad magic or short header"));
        }
        let u16_at = |i: usize| u16::from_le_bytes([b[i], b[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let (major, minor) = (u16_at(8), u16_at(10));
        if major != MAJOR {
            return Err(EmbeddingError::Version {
                major,
                minor,
                supported: MAJOR,
            });
        }
        let dim = u32_at(12) as usize;
        let count = u32_at(16) as usize;
        let record = 4 + 4 * dim;
        let expected = record
            .checked_mul(count)
            .and_then(|n| n.checked_add(20))
            .ok_or_else(|| corrupt("size overflow"))?;
        if b.len() != expected {
            return Err(corrupt(&format!("expected {expected} bytes, found {}", b.len())));
        }
        let mut store = EmbeddingStore::new(dim);
        for k in 0..count {
            let at = 20 + k * record;
            let id = DishId(u32_at(at));
            let v: Vec<f32> = (0..dim)
                .map(|j| f32::from_le_bytes(b[at + 4 + 4 * j..at + 8 + 4 * j].try_into().unwrap()))
                .collect();
            if store.get(id).is_some() {
                return Err(corrupt(&format!("duplicate id {id}")));
            }
            store.insert(id, v)?;
        }
        Ok(store)
    }

    /// Debug export: a `dim count` header line, then `id v1 v2 ...` per dish.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), EmbeddingError> {
        writeln!(w, "{} {}", self.dim(), self.len())?;
        for (id, v) in self.iter() {
            write!(w, "{id}")?;
            for x in v {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> EmbeddingStore {
        let mut s = EmbeddingStore::new(2);
        s.insert(DishId(3), vec![0.6, 0.8]).unwrap();
        s.insert(DishId(1), vec![1.0, 0.0]).unwrap();
        s
    }

    #[test]
    fn round_trip() {
        let s = store();
        assert_eq!(EmbeddingStore::from_bytes(&s.to_bytes()).unwrap(), s);
    }

    #[test]
    fn truncation_and_versions() {
        let b = store().to_bytes();
        assert!(matches!(
            EmbeddingStore::from_bytes(&b[..b.len() - 1]),
            Err(EmbeddingError::Corrupt(_))
        ));
        let mut v = b.clone();
        v[8] = 2;
        assert!(matches!(
            EmbeddingStore::from_bytes(&v),
            Err(EmbeddingError::Version { .. })
        ));
    }

    #[test]
    fn text_export_lists_every_vector() {
        let mut out = Vec::new();
        store().write_text(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "2 2\n1 1 0\n3 0.6 0.8\n");
    }
}
