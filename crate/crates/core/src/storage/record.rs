//! Row-oriented record files (`MMRF`): the raw input and output format.

use std::fs;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use super::{decode_schema, encode_schema, put_u32, put_u64, read_file, temp_sibling, Cursor, FORMAT_VERSION};
use crate::error::StorageError;
use crate::lang::{ScalarType, Schema};
use crate::value::{Record, Value};

pub const MAGIC: &[u8; 4] = b"MMRF";
pub const END_MAGIC: &[u8; 4] = b"MMRE";
const FOOTER_LEN: usize = 16;

/// Append the fields of `rec` in schema order: fixed-width little-endian
/// integers, u32-length-prefixed strings and blobs.
pub fn encode_record(schema: &Schema, rec: &[Value], out: &mut Vec<u8>) -> Result<(), StorageError> {
    if rec.len() != schema.fields.len() {
        return Err(StorageError::InvalidSpec(format!(
            "record has {} values, schema {} has {} fields",
            rec.len(),
            schema.name,
            schema.fields.len()
        )));
    }
    for (f, v) in schema.fields.iter().zip(rec) {
        encode_value(f.ty, v, out).map_err(|_| {
            StorageError::InvalidSpec(format!("field {} expects {}, got {v}", f.name, f.ty))
        })?;
    }
    Ok(())
}

pub(crate) fn encode_value(ty: ScalarType, v: &Value, out: &mut Vec<u8>) -> Result<(), ()> {
    match (ty, v) {
        (ScalarType::I32, Value::I32(x)) => out.extend_from_slice(&x.to_le_bytes()),
        (ScalarType::I64, Value::I64(x)) => out.extend_from_slice(&x.to_le_bytes()),
        (ScalarType::Str, Value::Str(s)) => {
            put_u32(out, s.len() as u32);
            out.extend_from_slice(s.as_bytes());
        }
        (ScalarType::Blob, Value::Blob(b)) => {
            put_u32(out, b.len() as u32);
            out.extend_from_slice(b);
        }
        _ => return Err(()),
    }
    Ok(())
}

pub(crate) fn decode_value(ty: ScalarType, r: &mut Cursor<'_>) -> Result<Value, StorageError> {
    Ok(match ty {
        ScalarType::I32 => Value::I32(r.u32()? as i32),
        ScalarType::I64 => Value::I64(r.u64()? as i64),
        ScalarType::Str => {
            let n = r.u32()? as usize;
            let at = r.offset();
            let s = String::from_utf8(r.take(n)?.to_vec())
                .map_err(|_| StorageError::decode(at, "invalid utf-8 in str field"))?;
            Value::Str(s)
        }
        ScalarType::Blob => {
            let n = r.u32()? as usize;
            Value::Blob(r.take(n)?.to_vec())
        }
    })
}

pub fn decode_record(schema: &Schema, bytes: &[u8], base: u64) -> Result<Record, StorageError> {
    let mut r = Cursor::new(bytes, base);
    let rec = schema
        .fields
        .iter()
        .map(|f| decode_value(f.ty, &mut r))
        .collect::<Result<Record, _>>()?;
    if r.remaining() != 0 {
        return Err(StorageError::decode(r.offset(), "trailing bytes after record"));
    }
    Ok(rec)
}

fn header_bytes(schema: &Schema) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    encode_schema(schema, &mut out);
    out
}

/// Streaming writer; the file appears at its final path only on `finish`.
pub struct RecordFileWriter {
    path: std::path::PathBuf,
    tmp: std::path::PathBuf,
    out: BufWriter<fs::File>,
    schema: Schema,
    crc: crc32fast::Hasher,
    count: u64,
    bytes: u64,
    buf: Vec<u8>,
}

impl RecordFileWriter {
    pub fn create(path: &Path, schema: &Schema) -> Result<Self, StorageError> {
        let tmp = temp_sibling(path);
        let f = fs::File::create(&tmp).map_err(|e| StorageError::io(&tmp, e))?;
        let mut out = BufWriter::new(f);
        let header = header_bytes(schema);
        out.write_all(&header).map_err(|e| StorageError::io(&tmp, e))?;
        Ok(RecordFileWriter {
            path: path.to_path_buf(),
            tmp,
            out,
            schema: schema.clone(),
            crc: crc32fast::Hasher::new(),
            count: 0,
            bytes: header.len() as u64,
            buf: Vec::new(),
        })
    }

    pub fn push(&mut self, rec: &[Value]) -> Result<(), StorageError> {
        self.buf.clear();
        self.buf.extend_from_slice(&[0; 4]);
        encode_record(&self.schema, rec, &mut self.buf)?;
        let len = (self.buf.len() - 4) as u32;
        self.buf[..4].copy_from_slice(&len.to_le_bytes());
        self.crc.update(&self.buf);
        self.out.write_all(&self.buf).map_err(|e| StorageError::io(&self.tmp, e))?;
        self.count += 1;
        self.bytes += self.buf.len() as u64;
        Ok(())
    }

    /// Write the footer and move the file into place; returns its size.
    pub fn finish(mut self) -> Result<u64, StorageError> {
        let mut footer = Vec::with_capacity(FOOTER_LEN);
        put_u64(&mut footer, self.count);
        put_u32(&mut footer, self.crc.clone().finalize());
        footer.extend_from_slice(END_MAGIC);
        self.out.write_all(&footer).map_err(|e| StorageError::io(&self.tmp, e))?;
        let f = self.out.into_inner().map_err(|e| StorageError::io(&self.tmp, e.into_error()))?;
        f.sync_all().map_err(|e| StorageError::io(&self.tmp, e))?;
        drop(f);
        fs::rename(&self.tmp, &self.path).map_err(|e| StorageError::io(&self.path, e))?;
        Ok(self.bytes + FOOTER_LEN as u64)
    }
}

pub fn write_records(path: &Path, schema: &Schema, records: &[Record]) -> Result<u64, StorageError> {
    let mut w = RecordFileWriter::create(path, schema)?;
    for r in records {
        w.push(r)?;
    }
    w.finish()
}

/// A fully validated record file held in memory.
pub struct RecordFile {
    pub schema: Schema,
    data: Vec<u8>,
    /// Byte offset of each record's length prefix.
    offsets: Vec<usize>,
    body_end: usize,
}

impl RecordFile {
    pub fn open(path: &Path) -> Result<Self, StorageError> {
        Self::from_bytes(read_file(path)?)
    }

    pub fn from_bytes(data: Vec<u8>) -> Result<Self, StorageError> {
        let mut r = Cursor::new(&data, 0);
        r.magic(MAGIC)?;
        r.version()?;
        let schema = decode_schema(&mut r)?;
        let body_start = r.pos();

        let has_footer = data.len() >= body_start + FOOTER_LEN && &data[data.len() - 4..] == END_MAGIC;
        let body_end = if has_footer { data.len() - FOOTER_LEN } else { data.len() };

        let mut offsets = Vec::new();
        let mut pos = body_start;
        while pos < body_end {
            if body_end - pos < 4 {
                return Err(StorageError::decode(pos as u64, "truncated record length"));
            }
            let len = u32::from_le_bytes(data[pos..pos + 4].try_into().unwrap()) as usize;
            if body_end - pos - 4 < len {
                return Err(StorageError::decode(
                    pos as u64,
                    format!("truncated record: length {len} exceeds remaining {} bytes", body_end - pos - 4),
                ));
            }
            offsets.push(pos);
            pos += 4 + len;
        }
        if !has_footer {
            return Err(StorageError::decode(data.len() as u64, "missing footer"));
        }
        let mut f = Cursor::new(&data[body_end..], body_end as u64);
        let count = f.u64()?;
        let crc = f.u32()?;
        if count != offsets.len() as u64 {
            return Err(StorageError::decode(
                body_end as u64,
                format!("footer count {count} but {} records present", offsets.len()),
            ));
        }
        if crc32fast::hash(&data[body_start..body_end]) != crc {
            return Err(StorageError::decode(body_end as u64 + 8, "checksum mismatch"));
        }
        Ok(RecordFile { schema, data, offsets, body_end })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn file_len(&self) -> u64 {
        self.data.len() as u64
    }

    /// Encoded size of records `range` including their length prefixes.
    pub fn span_bytes(&self, range: Range<usize>) -> u64 {
        if range.is_empty() {
            return 0;
        }
        let end = self.offsets.get(range.end).copied().unwrap_or(self.body_end);
        (end - self.offsets[range.start]) as u64
    }

    pub fn record(&self, i: usize) -> Result<Record, StorageError> {
        let pos = self.offsets[i];
        let len = u32::from_le_bytes(self.data[pos..pos + 4].try_into().unwrap()) as usize;
        decode_record(&self.schema, &self.data[pos + 4..pos + 4 + len], (pos + 4) as u64)
    }

    pub fn records(&self, range: Range<usize>) -> Result<Vec<Record>, StorageError> {
        range.map(|i| self.record(i)).collect()
    }

    pub fn all(&self) -> Result<Vec<Record>, StorageError> {
        self.records(0..self.len())
    }

    /// Partition the records into consecutive splits of roughly `target`
    /// encoded bytes each.
    pub fn splits(&self, target: u64) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.len() {
            let mut end = start + 1;
            while end < self.len() && self.span_bytes(start..end) < target {
                end += 1;
            }
            out.push(start..end);
            start = end;
        }
        out
    }
}

pub fn read_records(path: &Path) -> Result<(Schema, Vec<Record>), StorageError> {
    let f = RecordFile::open(path)?;
    let recs = f.all()?;
    Ok((f.schema, recs))
}
