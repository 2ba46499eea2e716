//! On-disk formats: 16-bit PGM images, the JSON dataset manifest and the
//! binary descriptor database.

mod descdb;
mod manifest;
mod pgm;

pub use descdb::{read_descriptor_db, write_descriptor_db, DescriptorDb, DB_MAGIC, DB_VERSION};
pub use manifest::{load_manifest, manifest_dir, manifest_to_json, parse_manifest, resolve_image_path, save_manifest};
pub use pgm::{encode_pgm, parse_pgm, read_image, read_pgm, write_image, write_pgm, PgmData, QUANTIZATION_ERROR};

use std::path::Path;

use crate::error::{Error, Result};

/// Write `bytes` to `path`, creating parent directories.
pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
