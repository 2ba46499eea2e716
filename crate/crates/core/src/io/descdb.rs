//! Descriptor database, little-endian:
//! `"SDPR" | version u32 | count u32 | dim u32 | rgp_seed u64 | encoder_seed u64`
//! followed by `count` records of `id u32 | dim x f32`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Descriptor, DESCRIPTOR_DIM};

pub const DB_MAGIC: &[u8; 4] = b"SDPR";
pub const DB_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorDb {
    pub rgp_seed: u64,
    pub encoder_seed: u64,
    pub entries: Vec<(u32, Descriptor)>,
}

impl DescriptorDb {
    pub fn get(&self, id: u32) -> Option<&Descriptor> {
        self.entries.iter().find(|(i, _)| *i == id).map(|(_, d)| d)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.entries.len() * (4 + 4 * DESCRIPTOR_DIM));
        out.extend_from_slice(DB_MAGIC);
        out.extend_from_slice(&DB_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        out.extend_from_slice(&(DESCRIPTOR_DIM as u32).to_le_bytes());
        out.extend_from_slice(&self.rgp_seed.to_le_bytes());
        out.extend_from_slice(&self.encoder_seed.to_le_bytes());
        for (id, d) in &self.entries {
            out.extend_from_slice(&id.to_le_bytes());
            for &v in d.values() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fmt = |offset: usize, message: String| Error::Format {
            path: path.to_path_buf(),
            offset,
            message,
        };
        if bytes.len() < HEADER_LEN {
            return Err(fmt(bytes.len(), "truncated header".into()));
        }
        if &bytes[..4] != DB_MAGIC {
            return Err(fmt(0, "bad magic, expected SDPR".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != DB_VERSION {
            return Err(fmt(4, format!("unsupported version {version}")));
        }
        let count = u32_at(8) as usize;
        let dim = u32_at(12) as usize;
        if dim != DESCRIPTOR_DIM {
            return Err(fmt(12, format!("dimension {dim}, expected {DESCRIPTOR_DIM}")));
        }
        let rgp_seed = u64_at(16);
        let encoder_seed = u64_at(24);
        let rec_len = 4 + 4 * dim;
        let needed = HEADER_LEN + count * rec_len;
        if bytes.len() != needed {
            return Err(fmt(
                bytes.len().min(needed),
                format!("expected {needed} bytes for {count} records, found {}", bytes.len()),
            ));
        }
        let mut entries = Vec::with_capacity(count);
        for k in 0..count {
            let o = HEADER_LEN + k * rec_len;
            let id = u32_at(o);
            let values: Vec<f64> = bytes[o + 4..o + rec_len]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            let d = Descriptor::from_unit(values).map_err(|e| fmt(o, format!("record {id}: {e}")))?;
            entries.push((id, d));
        }
        Ok(Self {
            rgp_seed,
            encoder_seed,
            entries,
        })
    }
}

pub fn write_descriptor_db(db: &DescriptorDb, path: &Path) -> Result<()> {
    super::write_bytes(path, &db.to_bytes())
}

pub fn read_descriptor_db(path: &Path) -> Result<DescriptorDb> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    DescriptorDb::from_bytes(&bytes, path)
}
