//! Binary PGM (P5) with 16-bit big-endian samples. Rows are beams, columns
//! are range bins.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{SonarConfig, SonarImage};

const MAXVAL: u32 = 65535;

/// Worst-case absolute error of a value after a write/read cycle.
pub const QUANTIZATION_ERROR: f64 = 1.0 / 131070.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PgmData {
    pub width: usize,
    pub height: usize,
    /// Row-major samples scaled to [0, 1].
    pub values: Vec<f64>,
}

/// Encode row-major `values` as a P5 file. Fails on non-finite or
/// out-of-range values.
pub fn encode_pgm(width: usize, height: usize, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != width * height {
        return Err(Error::Validation(format!(
            "{} values for a {width}x{height} image",
            values.len()
        )));
    }
    let header = format!("P5\n{width} {height}\n{MAXVAL}\n");
    let mut out = Vec::with_capacity(header.len() + 2 * values.len());
    out.extend_from_slice(header.as_bytes());
    for (i, &v) in values.iter().enumerate() {
        if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
            return Err(Error::Validation(format!(
                "cannot encode value {v} at row {}, column {}",
                i / width.max(1),
                i % width.max(1)
            )));
        }
        let q = (v * MAXVAL as f64).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let bytes = encode_pgm(width, height, values)?;
    super::write_bytes(path, &bytes)
}

pub fn write_image(image: &SonarImage, path: &Path) -> Result<()> {
    write_pgm(path, image.n_bins(), image.n_beams(), image.data())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn header_int(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format {
                path: self.path.to_path_buf(),
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

/// Parse a P5 byte buffer. `path` is only used for error messages.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<PgmData> {
    let mut cur = Cursor { bytes, pos: 0, path };
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(cur.err("missing P5 magic"));
    }
    cur.pos = 2;
    let width = cur.header_int("width")? as usize;
    let height = cur.header_int("height")? as usize;
    let maxval = cur.header_int("maxval")?;
    if maxval == 0 || maxval > MAXVAL {
        return Err(cur.err(format!("maxval {maxval} not in 1..=65535")));
    }
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(cur.err("expected single whitespace after maxval"));
    }
    cur.pos += 1;
    let sample_bytes = if maxval > 255 { 2 } else { 1 };
    let n = width * height;
    let needed = n * sample_bytes;
    let body = &bytes[cur.pos..];
    if body.len() < needed {
        cur.pos += body.len();
        return Err(cur.err(format!(
            "truncated raster: {} of {needed} sample bytes",
            body.len()
        )));
    }
    let scale = maxval as f64;
    let mut values = Vec::with_capacity(n);
    for (i, chunk) in body[..needed].chunks_exact(sample_bytes).enumerate() {
        let raw = if sample_bytes == 2 {
            u16::from_be_bytes([chunk[0], chunk[1]]) as u32
        } else {
            chunk[0] as u32
        };
        if raw > maxval {
            cur.pos += i * sample_bytes;
            return Err(cur.err(format!("sample {raw} exceeds maxval {maxval}")));
        }
        values.push(raw as f64 / scale);
    }
    Ok(PgmData {
        width,
        height,
        values,
    })
}

pub fn read_pgm(path: &Path) -> Result<PgmData> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
}

/// Read an image and check it against the manifest's sonar config.
pub fn read_image(path: &Path, config: &SonarConfig) -> Result<SonarImage> {
    let pgm = read_pgm(path)?;
    if pgm.height != config.n_beams || pgm.width != config.n_bins {
        return Err(Error::Validation(format!(
            "{}: image is {} beams x {} bins, manifest expects {}x{}",
            path.display(),
            pgm.height,
            pgm.width,
            config.n_beams,
            config.n_bins
        )));
    }
    SonarImage::new(*config, pgm.values)
}
