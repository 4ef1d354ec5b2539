//! Column-group files (`MMCG`): retained fields only, stored column-wise
//! in row groups, each column segment with its own codec.

use std::path::Path;

use super::layout::{Codec, Layout};
use super::record::{decode_value, encode_value};
use super::{delta, put_u32, put_u64, read_file, write_atomic, Cursor, FORMAT_VERSION};
use crate::error::StorageError;
use crate::value::{Record, Value};

pub const MAGIC: &[u8; 4] = b"MMCG";
pub const END_MAGIC: &[u8; 4] = b"MMCE";
pub const DEFAULT_GROUP_ROWS: u32 = 16_384;
const TRAILER: usize = 4 + 8 + 4 + 4;

/// Accumulates rows in memory and writes the whole file on `finish`.
pub struct ColumnGroupWriter {
    layout: Layout,
    group_rows: usize,
    buf: Vec<u8>,
    body_start: usize,
    pending: Vec<Record>,
    offsets: Vec<u64>,
    rows: u64,
}

impl ColumnGroupWriter {
    pub fn new(layout: Layout, group_rows: u32) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.push(FORMAT_VERSION);
        put_u32(&mut buf, group_rows.max(1));
        layout.encode(&mut buf);
        let body_start = buf.len();
        ColumnGroupWriter {
            layout,
            group_rows: group_rows.max(1) as usize,
            buf,
            body_start,
            pending: Vec::new(),
            offsets: Vec::new(),
            rows: 0,
        }
    }

    /// `rec` is a full-width record; dict-coded positions hold tokens.
    pub fn push(&mut self, rec: Record) -> Result<(), StorageError> {
        self.pending.push(rec);
        self.rows += 1;
        if self.pending.len() == self.group_rows {
            self.flush_group()?;
        }
        Ok(())
    }

    fn flush_group(&mut self) -> Result<(), StorageError> {
        if self.pending.is_empty() {
            return Ok(());
        }
        self.offsets.push(self.buf.len() as u64);
        put_u32(&mut self.buf, self.pending.len() as u32);
        let mut seg = Vec::new();
        for (&i, &c) in self.layout.retained.iter().zip(&self.layout.codecs) {
            seg.clear();
            let f = &self.layout.schema.fields[i];
            let bad = |v: &Value| StorageError::InvalidSpec(format!("field {} cannot store {v} as {c:?}", f.name));
            match c {
                Codec::Plain => {
                    for r in &self.pending {
                        encode_value(f.ty, &r[i], &mut seg).map_err(|_| bad(&r[i]))?;
                    }
                }
                Codec::Delta => {
                    let vals = self
                        .pending
                        .iter()
                        .map(|r| r[i].as_int().ok_or_else(|| bad(&r[i])))
                        .collect::<Result<Vec<_>, _>>()?;
                    delta::encode(&vals, &mut seg);
                }
                Codec::Dict => {
                    for r in &self.pending {
                        let Value::Token(t) = r[i] else { return Err(bad(&r[i])) };
                        seg.extend_from_slice(&t.to_le_bytes());
                    }
                }
            }
            put_u32(&mut self.buf, seg.len() as u32);
            self.buf.extend_from_slice(&seg);
        }
        self.pending.clear();
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> Result<u64, StorageError> {
        self.flush_group()?;
        let crc = crc32fast::hash(&self.buf[self.body_start..]);
        for &o in &self.offsets {
            put_u64(&mut self.buf, o);
        }
        put_u32(&mut self.buf, self.offsets.len() as u32);
        put_u64(&mut self.buf, self.rows);
        put_u32(&mut self.buf, crc);
        self.buf.extend_from_slice(END_MAGIC);
        write_atomic(path, &self.buf)?;
        Ok(self.buf.len() as u64)
    }
}

pub struct ColumnGroupFile {
    pub layout: Layout,
    pub group_rows: u32,
    data: Vec<u8>,
    header_len: usize,
    offsets: Vec<u64>,
    body_end: usize,
    pub rows: u64,
}

impl ColumnGroupFile {
    pub fn open(path: &Path) -> Result<Self, StorageError> {
        Self::from_bytes(read_file(path)?)
    }

    pub fn from_bytes(data: Vec<u8>) -> Result<Self, StorageError> {
        let mut r = Cursor::new(&data, 0);
        r.magic(MAGIC)?;
        r.version()?;
        let group_rows = r.u32()?;
        let layout = Layout::decode(&mut r)?;
        let header_len = r.pos();
        if data.len() < header_len + TRAILER {
            return Err(StorageError::decode(data.len() as u64, "truncated column-group trailer"));
        }
        let tail = data.len() - TRAILER;
        let mut t = Cursor::new(&data[tail..], tail as u64);
        let groups = t.u32()? as usize;
        let rows = t.u64()?;
        let crc = t.u32()?;
        t.magic(END_MAGIC)?;
        let table = tail
            .checked_sub(groups * 8)
            .filter(|&s| s >= header_len)
            .ok_or_else(|| StorageError::decode(tail as u64, "bad row-group count"))?;
        let mut o = Cursor::new(&data[table..tail], table as u64);
        let offsets = (0..groups).map(|_| o.u64()).collect::<Result<Vec<_>, _>>()?;
        if crc32fast::hash(&data[header_len..table]) != crc {
            return Err(StorageError::decode(table as u64, "column-group checksum mismatch"));
        }
        if offsets.iter().any(|&x| (x as usize) < header_len || x as usize >= table) {
            return Err(StorageError::decode(table as u64, "row-group offset out of range"));
        }
        Ok(ColumnGroupFile { layout, group_rows, data, header_len, offsets, body_end: table, rows })
    }

    pub fn group_count(&self) -> usize {
        self.offsets.len()
    }

    pub fn header_len(&self) -> u64 {
        self.header_len as u64
    }

    pub fn group_bytes(&self, g: usize) -> u64 {
        let end = self.offsets.get(g + 1).map_or(self.body_end as u64, |&x| x);
        end - self.offsets[g]
    }

    /// Segment byte lengths for each retained field of group `g`.
    pub fn segment_sizes(&self, g: usize) -> Result<Vec<u64>, StorageError> {
        let start = self.offsets[g] as usize;
        let mut r = Cursor::new(&self.data[start..self.body_end], start as u64);
        r.u32()?;
        let mut out = Vec::new();
        for _ in &self.layout.retained {
            let n = r.u32()? as usize;
            r.take(n)?;
            out.push(n as u64);
        }
        Ok(out)
    }

    /// Decode group `g` into full-width records; dict fields come back as
    /// tokens and dropped fields as zero values.
    pub fn read_group(&self, g: usize) -> Result<Vec<Record>, StorageError> {
        let start = self.offsets[g] as usize;
        let mut r = Cursor::new(&self.data[start..self.body_end], start as u64);
        let n = r.u32()? as usize;
        let mut recs = vec![self.layout.zero_record(); n];
        for (&i, &c) in self.layout.retained.iter().zip(&self.layout.codecs) {
            let len = r.u32()? as usize;
            let base = r.offset();
            let seg = r.take(len)?;
            let ty = self.layout.schema.fields[i].ty;
            match c {
                Codec::Plain => {
                    let mut s = Cursor::new(seg, base);
                    for rec in recs.iter_mut() {
                        rec[i] = decode_value(ty, &mut s)?;
                    }
                    if s.remaining() != 0 {
                        return Err(StorageError::decode(s.offset(), "trailing bytes in plain segment"));
                    }
                }
                Codec::Delta => {
                    let vals = delta::decode_at(seg, n, base)?;
                    for (rec, v) in recs.iter_mut().zip(vals) {
                        rec[i] = match ty {
                            crate::lang::ScalarType::I32 => Value::I32(
                                i32::try_from(v).map_err(|_| StorageError::decode(base, "delta value exceeds i32"))?,
                            ),
                            _ => Value::I64(v),
                        };
                    }
                }
                Codec::Dict => {
                    if seg.len() != 4 * n {
                        return Err(StorageError::decode(base, "dict segment length mismatch"));
                    }
                    for (rec, t) in recs.iter_mut().zip(seg.chunks_exact(4)) {
                        rec[i] = Value::Token(u32::from_le_bytes(t.try_into().unwrap()));
                    }
                }
            }
        }
        Ok(recs)
    }

    pub fn file_len(&self) -> u64 {
        self.data.len() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{ScalarType, Schema};

    #[test]
    fn reassembly_identity() {
        let schema = Schema::new(
            "V",
            &[("ip", ScalarType::Str), ("url", ScalarType::Str), ("date", ScalarType::I32), ("junk", ScalarType::Str)],
        );
        let layout = Layout::new(schema, vec![0, 1, 2], vec![Codec::Plain, Codec::Dict, Codec::Delta]).unwrap();
        let recs: Vec<Record> = (0..100)
            .map(|i| {
                vec![
                    Value::Str(format!("10.0.0.{i}")),
                    Value::Token(i % 7),
                    Value::I32(1000 + i as i32 / 3),
                    Value::Str(String::new()),
                ]
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.mmc");
        let mut w = ColumnGroupWriter::new(layout, 32);
        for r in &recs {
            w.push(r.clone()).unwrap();
        }
        w.finish(&p).unwrap();
        let f = ColumnGroupFile::open(&p).unwrap();
        assert_eq!(f.group_count(), 4);
        assert_eq!(f.rows, 100);
        let back: Vec<Record> = (0..f.group_count()).flat_map(|g| f.read_group(g).unwrap()).collect();
        assert_eq!(back, recs);
        // slowly increasing dates cost one byte each after the first
        assert!(f.segment_sizes(0).unwrap()[2] < 40);
    }

    #[test]
    fn empty_and_corrupt() {
        let schema = Schema::new("S", &[("a", ScalarType::I64)]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.mmc");
        ColumnGroupWriter::new(Layout::plain(schema), 8).finish(&p).unwrap();
        let f = ColumnGroupFile::open(&p).unwrap();
        assert_eq!((f.group_count(), f.rows), (0, 0));
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        assert!(ColumnGroupFile::from_bytes(bytes).is_err());
    }
}
