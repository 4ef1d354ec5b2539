//! On-disk formats. Every layout is described byte-for-byte in
//! `docs/formats.md`; all multi-byte integers are little-endian unless a
//! key encoding says otherwise.

pub mod btree;
pub mod catalog;
pub mod colgroup;
pub mod delta;
pub mod dict;
pub mod layout;
pub mod record;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::StorageError;
use crate::lang::{ScalarType, Schema};

pub const FORMAT_VERSION: u8 = 1;

pub(crate) fn type_tag(t: ScalarType) -> u8 {
    match t {
        ScalarType::I32 => 0,
        ScalarType::I64 => 1,
        ScalarType::Str => 2,
        ScalarType::Blob => 3,
    }
}

pub(crate) fn tag_type(tag: u8) -> Option<ScalarType> {
    Some(match tag {
        0 => ScalarType::I32,
        1 => ScalarType::I64,
        2 => ScalarType::Str,
        3 => ScalarType::Blob,
        _ => return None,
    })
}

pub(crate) fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_short_str(out: &mut Vec<u8>, s: &str) {
    put_u16(out, s.len() as u16);
    out.extend_from_slice(s.as_bytes());
}

/// Schema block: name, field count, then (name, type tag) per field.
pub(crate) fn encode_schema(schema: &Schema, out: &mut Vec<u8>) {
    put_short_str(out, &schema.name);
    put_u16(out, schema.fields.len() as u16);
    for f in &schema.fields {
        put_short_str(out, &f.name);
        out.push(type_tag(f.ty));
    }
}

pub(crate) fn decode_schema(r: &mut Cursor<'_>) -> Result<Schema, StorageError> {
    let name = r.short_str()?;
    let n = r.u16()? as usize;
    let mut fields = Vec::with_capacity(n);
    for _ in 0..n {
        let fname = r.short_str()?;
        let at = r.offset();
        let ty = tag_type(r.u8()?).ok_or_else(|| StorageError::decode(at, "bad type tag"))?;
        fields.push(crate::lang::Field { name: fname, ty });
    }
    if fields.is_empty() {
        return Err(StorageError::decode(r.offset(), "schema has no fields"));
    }
    Ok(Schema { name, fields })
}

/// Bounds-checked reader over a byte slice that reports absolute offsets.
pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    base: u64,
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8], base: u64) -> Self {
        Cursor { buf, pos: 0, base }
    }

    pub fn offset(&self) -> u64 {
        self.base + self.pos as u64
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], StorageError> {
        if self.remaining() < n {
            return Err(StorageError::decode(
                self.offset(),
                format!("truncated: need {n} bytes, have {}", self.remaining()),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, StorageError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, StorageError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, StorageError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, StorageError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn short_str(&mut self) -> Result<String, StorageError> {
        let n = self.u16()? as usize;
        let at = self.offset();
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| StorageError::decode(at, "invalid utf-8"))
    }

    pub fn magic(&mut self, want: &[u8; 4]) -> Result<(), StorageError> {
        let at = self.offset();
        let got = self.take(4)?;
        if got != want {
            return Err(StorageError::decode(
                at,
                format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(got), std::str::from_utf8(want).unwrap()),
            ));
        }
        Ok(())
    }

    pub fn version(&mut self) -> Result<(), StorageError> {
        let at = self.offset();
        let v = self.u8()?;
        if v != FORMAT_VERSION {
            return Err(StorageError::decode(at, format!("unsupported format version {v}")));
        }
        Ok(())
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, StorageError> {
    fs::read(path).map_err(|e| StorageError::io(path, e))
}

/// Write `bytes` to a sibling temp file, then rename over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StorageError> {
    let tmp = temp_sibling(path);
    let mut f = fs::File::create(&tmp).map_err(|e| StorageError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| StorageError::io(&tmp, e))?;
    f.sync_all().map_err(|e| StorageError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| StorageError::io(path, e))
}

pub(crate) fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

pub fn file_size(path: &Path) -> Result<u64, StorageError> {
    fs::metadata(path).map(|m| m.len()).map_err(|e| StorageError::io(path, e))
}
