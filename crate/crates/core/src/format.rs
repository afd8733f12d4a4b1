//! Binary checkpoint format and the header shared with update-log files.
//!
//! ```text
//! "UNLB"            4 bytes
//! version           u16 LE
//! layer count       u16 LE
//! layer sizes       u32 LE each
//! params            f32 LE × |θ|        (checkpoint body)
//! ```

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Architecture, Model};

pub const MAGIC: [u8; 4] = *b"UNLB";
pub const FORMAT_VERSION: u16 = 1;

pub(crate) fn encode_header(arch: &Architecture, out: &mut Vec<u8>) {
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(arch.layer_sizes().len() as u16).to_le_bytes());
    for &s in arch.layer_sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
}

/// Fills `buf` completely or reports how many bytes were available.
pub(crate) fn read_full<R: Read>(r: &mut R, buf: &mut [u8], what: &'static str) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::Truncated {
                    what,
                    needed: buf.len(),
                    found: filled,
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io(what, e)),
        }
    }
    Ok(())
}

/// Parses the header; returns the architecture and the header length in bytes.
pub(crate) fn read_header<R: Read>(r: &mut R, what: &'static str) -> Result<(Architecture, u64)> {
    let mut fixed = [0u8; 8];
    read_full(r, &mut fixed, what)?;
    if fixed[..4] != MAGIC {
        return Err(Error::BadMagic {
            what,
            expected: u32::from_be_bytes(MAGIC),
            found: u32::from_be_bytes([fixed[0], fixed[1], fixed[2], fixed[3]]),
        });
    }
    let version = u16::from_le_bytes([fixed[4], fixed[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let layers = u16::from_le_bytes([fixed[6], fixed[7]]) as usize;
    let mut sizes_raw = vec![0u8; layers * 4];
    read_full(r, &mut sizes_raw, what)?;
    let sizes = sizes_raw
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
        .collect();
    let arch = Architecture::new(sizes)?;
    Ok((arch, 8 + sizes_raw.len() as u64))
}

pub(crate) fn f32s_from_le(raw: &[u8]) -> Vec<f32> {
    raw.chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect()
}

pub(crate) fn f32s_to_le(values: &[f32], out: &mut Vec<u8>) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(model: &Model) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + model.param_count() * 4);
    encode_header(model.arch(), &mut out);
    f32s_to_le(model.params(), &mut out);
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    let mut cursor = bytes;
    let (arch, _) = read_header(&mut cursor, "checkpoint")?;
    let needed = arch.param_count() * 4;
    if cursor.len() < needed {
        return Err(Error::Truncated {
            what: "checkpoint",
            needed,
            found: cursor.len(),
        });
    }
    if cursor.len() > needed {
        return Err(Error::CountMismatch(format!(
            "checkpoint has {} trailing bytes",
            cursor.len() - needed
        )));
    }
    Model::from_params(arch, f32s_from_le(cursor))
}

/// Writes to `<path>.tmp` and renames, so a crash never leaves a torn file.
pub fn save_checkpoint(path: &Path, model: &Model) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let disp = path.display().to_string();
    {
        let mut f = File::create(&tmp).map_err(|e| Error::io(&disp, e))?;
        f.write_all(&encode_checkpoint(model))
            .map_err(|e| Error::io(&disp, e))?;
        f.sync_all().map_err(|e| Error::io(&disp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(&disp, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    decode_checkpoint(&bytes)
}
