//! Persistence: binary field snapshots, CSV time series, JSON manifests.
//!
//! Three formats, each fully specified here:
//!
//! * **Field snapshot** (binary, little-endian): magic `PHI4`, version
//!   `u32` (currently 1), `K: u32`, `M: u32`, `m0: f64`, `t: f64`, then the
//!   (2K+1)³ retained coefficients in lexicographic k order as (re, im)
//!   `f64` pairs.
//! * **Enhancement snapshot** (binary, little-endian): magic `PH4E`,
//!   version `u32` (currently 1), `N: u32`, `m0: f64`, `c1: f64`,
//!   `c2: f64`, `t: f64`, `count: u32`, then `count` records of a 4-byte
//!   ASCII tag followed by a complete field snapshot blob. Tags appear in
//!   the fixed order `Z___ Z1__ Z2__ Z3__ Z02_ Z03_ J___ Z22_ Z23_`.
//! * **CSV**: comma-separated, one header line, floats as `{:.12e}`.
//!   Manifests are pretty-printed JSON.
//!
//! No output file is ever partially overwritten: every write lands in a
//! `.tmp` sibling first and is renamed into place.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::enhancement::EnhancedState;
use crate::error::{Error, Result};
use crate::renorm::RenormConstants;
use crate::spectral::{FourierField, TorusGrid};

const FIELD_MAGIC: &[u8; 4] = b"PHI4";
const ENHANCED_MAGIC: &[u8; 4] = b"PH4E";
const FORMAT_VERSION: u32 = 1;

/// Tags of the enhancement components, in serialization order.
const ENHANCED_TAGS: [&[u8; 4]; 9] = [
    b"Z___", b"Z1__", b"Z2__", b"Z3__", b"Z02_", b"Z03_", b"J___", b"Z22_", b"Z23_",
];

/// Writes `bytes` to `path` without ever exposing a partial file: the data
/// lands in a `.tmp` sibling first and is renamed over the destination.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Formats one CSV float cell.
pub fn fmt_csv_float(x: f64) -> String {
    format!("{x:.12e}")
}

/// Writes a CSV file with the given header and preformatted cells.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Writes a pretty-printed JSON manifest.
pub fn write_manifest(path: &Path, manifest: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// A cursor over a snapshot byte stream that fails with a format error
/// instead of panicking when the stream is short.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(Error::SnapshotFormat(format!(
                "truncated snapshot: ran out of bytes reading {what}"
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != expect {
            return Err(Error::SnapshotFormat(format!(
                "bad magic: expected {:?}, got {:?}",
                String::from_utf8_lossy(expect),
                String::from_utf8_lossy(got)
            )));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u32("version")?;
        if v != FORMAT_VERSION {
            return Err(Error::SnapshotFormat(format!(
                "unsupported snapshot version {v}, expected {FORMAT_VERSION}"
            )));
        }
        Ok(())
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// Serializes one field with its mass and timestamp.
pub fn field_to_bytes(f: &FourierField, m0: f64, t: f64) -> Vec<u8> {
    let grid = f.grid();
    let mut out = Vec::with_capacity(4 + 4 + 4 + 4 + 8 + 8 + 16 * grid.n_modes());
    out.extend_from_slice(FIELD_MAGIC);
    push_u32(&mut out, FORMAT_VERSION);
    push_u32(&mut out, grid.k_max() as u32);
    push_u32(&mut out, grid.m() as u32);
    push_f64(&mut out, m0);
    push_f64(&mut out, t);
    for c in f.coeff() {
        push_f64(&mut out, c.re);
        push_f64(&mut out, c.im);
    }
    out
}

fn field_from_reader(r: &mut Reader) -> Result<(FourierField, f64, f64)> {
    r.magic(FIELD_MAGIC)?;
    r.version()?;
    let k = r.u32("K")? as usize;
    let m = r.u32("M")? as usize;
    let m0 = r.f64("m0")?;
    let t = r.f64("t")?;
    let grid = TorusGrid::new(k, m)?;
    let mut f = FourierField::zero(grid);
    for c in f.coeff_mut() {
        let re = r.f64("coefficient")?;
        let im = r.f64("coefficient")?;
        *c = Complex64::new(re, im);
    }
    Ok((f, m0, t))
}

/// Deserializes a field snapshot produced by [`field_to_bytes`]; the whole
/// buffer must be consumed.
pub fn field_from_bytes(bytes: &[u8]) -> Result<(FourierField, f64, f64)> {
    let mut r = Reader::new(bytes);
    let out = field_from_reader(&mut r)?;
    if !r.done() {
        return Err(Error::SnapshotFormat(format!(
            "trailing bytes after field snapshot: {} of {}",
            bytes.len() - r.pos,
            bytes.len()
        )));
    }
    Ok(out)
}

/// Writes one field snapshot file.
pub fn write_field_snapshot(path: &Path, f: &FourierField, m0: f64, t: f64) -> Result<()> {
    write_atomic(path, &field_to_bytes(f, m0, t))
}

/// Reads one field snapshot file, returning (field, m0, t).
pub fn read_field_snapshot(path: &Path) -> Result<(FourierField, f64, f64)> {
    field_from_bytes(&fs::read(path)?)
}

/// Serializes a full enhancement state as a tagged concatenation of field
/// snapshots (see module docs for the layout).
pub fn enhanced_to_bytes(state: &EnhancedState) -> Vec<u8> {
    let c = state.consts;
    let fields: [&FourierField; 9] = [
        &state.z, &state.z1, &state.z2, &state.z3, &state.z02, &state.z03, &state.j, &state.z22,
        &state.z23,
    ];
    let mut out = Vec::new();
    out.extend_from_slice(ENHANCED_MAGIC);
    push_u32(&mut out, FORMAT_VERSION);
    push_u32(&mut out, c.n);
    push_f64(&mut out, c.m0);
    push_f64(&mut out, c.c1);
    push_f64(&mut out, c.c2);
    push_f64(&mut out, state.t);
    push_u32(&mut out, fields.len() as u32);
    for (tag, field) in ENHANCED_TAGS.iter().zip(fields) {
        out.extend_from_slice(*tag);
        out.extend_from_slice(&field_to_bytes(field, c.m0, state.t));
    }
    out
}

/// Deserializes an enhancement snapshot produced by [`enhanced_to_bytes`].
pub fn enhanced_from_bytes(bytes: &[u8]) -> Result<EnhancedState> {
    let mut r = Reader::new(bytes);
    r.magic(ENHANCED_MAGIC)?;
    r.version()?;
    let n = r.u32("N")?;
    let m0 = r.f64("m0")?;
    let c1 = r.f64("c1")?;
    let c2 = r.f64("c2")?;
    let t = r.f64("t")?;
    let count = r.u32("field count")? as usize;
    if count != ENHANCED_TAGS.len() {
        return Err(Error::SnapshotFormat(format!(
            "enhancement snapshot holds {count} fields, expected {}",
            ENHANCED_TAGS.len()
        )));
    }
    let mut fields = Vec::with_capacity(count);
    for tag in ENHANCED_TAGS {
        let got = r.take(4, "field tag")?;
        if got != tag {
            return Err(Error::SnapshotFormat(format!(
                "unexpected field tag {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(tag)
            )));
        }
        let (field, _, _) = field_from_reader(&mut r)?;
        fields.push(field);
    }
    if !r.done() {
        return Err(Error::SnapshotFormat(format!(
            "trailing bytes after enhancement snapshot: {} of {}",
            bytes.len() - r.pos,
            bytes.len()
        )));
    }
    let mut it = fields.into_iter();
    let mut next = || it.next().expect("nine fields read above");
    Ok(EnhancedState {
        t,
        consts: RenormConstants { n, m0, c1, c2 },
        z: next(),
        z1: next(),
        z2: next(),
        z3: next(),
        z02: next(),
        z03: next(),
        j: next(),
        z22: next(),
        z23: next(),
    })
}

/// Writes one enhancement snapshot file.
pub fn write_enhanced_snapshot(path: &Path, state: &EnhancedState) -> Result<()> {
    write_atomic(path, &enhanced_to_bytes(state))
}

/// Reads one enhancement snapshot file.
pub fn read_enhanced_snapshot(path: &Path) -> Result<EnhancedState> {
    enhanced_from_bytes(&fs::read(path)?)
}
