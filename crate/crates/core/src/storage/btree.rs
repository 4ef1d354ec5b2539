//! Clustered B+Tree (`MMBT`), bulk-loaded bottom-up from key-sorted rows.
//!
//! Page 0 is the header. Nodes are extents of one or more consecutive pages;
//! a node spans several pages only when its entries cannot fit in one.
//! Leaves are written first, in key order, each linked to the next.

use std::fs;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::ops::Bound;
use std::path::{Path, PathBuf};

use super::layout::Layout;
use super::{put_u32, put_u64, temp_sibling, Cursor, FORMAT_VERSION};
use crate::error::StorageError;

pub const MAGIC: &[u8; 4] = b"MMBT";
pub const DEFAULT_PAGE_SIZE: u32 = 4096;
const NODE_HEADER: usize = 13;
const NONE: u32 = u32::MAX;
const KIND_LEAF: u8 = 1;
const KIND_INTERNAL: u8 = 2;

/// An interval over order-preserving key images.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ByteRange {
    pub lo: Bound<Vec<u8>>,
    pub hi: Bound<Vec<u8>>,
}

impl ByteRange {
    pub fn full() -> Self {
        ByteRange { lo: Bound::Unbounded, hi: Bound::Unbounded }
    }

    pub fn contains(&self, k: &[u8]) -> bool {
        let above = match &self.lo {
            Bound::Included(l) => k >= l.as_slice(),
            Bound::Excluded(l) => k > l.as_slice(),
            Bound::Unbounded => true,
        };
        above && !self.is_past(k)
    }

    fn is_past(&self, k: &[u8]) -> bool {
        match &self.hi {
            Bound::Included(h) => k > h.as_slice(),
            Bound::Excluded(h) => k >= h.as_slice(),
            Bound::Unbounded => false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanStats {
    pub pages_read: u64,
    pub records: u64,
    pub bytes_read: u64,
}

#[derive(Clone, Debug)]
pub struct BTreeHeader {
    pub page_size: u32,
    pub layout: Layout,
    pub key_field: usize,
    pub root: u32,
    pub height: u32,
    pub leaf_count: u32,
    pub first_leaf: u32,
    pub record_count: u64,
    pub page_count: u32,
}

/// Streaming bulk loader. Feed `(key image, row bytes)` in non-decreasing key order.
pub struct BTreeWriter {
    path: PathBuf,
    tmp: PathBuf,
    out: BufWriter<fs::File>,
    page_size: usize,
    layout: Layout,
    key_field: usize,
    next_page: u32,
    crc: crc32fast::Hasher,
    cur: Vec<(Vec<u8>, Vec<u8>)>,
    cur_bytes: usize,
    /// (first key, page id) of every leaf written so far.
    leaves: Vec<(Vec<u8>, u32)>,
    last_key: Option<Vec<u8>>,
    count: u64,
}

fn entry_len(k: &[u8], row: &[u8]) -> usize {
    8 + k.len() + row.len()
}

fn pages_for(bytes: usize, page_size: usize) -> usize {
    bytes.div_ceil(page_size).max(1)
}

impl BTreeWriter {
    pub fn create(path: &Path, layout: Layout, key_field: usize, page_size: u32) -> Result<Self, StorageError> {
        if layout.codec_of(key_field).is_none() {
            return Err(StorageError::InvalidSpec("index field must be retained".into()));
        }
        if page_size < 256 {
            return Err(StorageError::InvalidSpec("page size below 256 bytes".into()));
        }
        let tmp = temp_sibling(path);
        let f = fs::File::create(&tmp).map_err(|e| StorageError::io(&tmp, e))?;
        let mut out = BufWriter::new(f);
        // placeholder header page, rewritten by finish()
        out.write_all(&vec![0u8; page_size as usize]).map_err(|e| StorageError::io(&tmp, e))?;
        Ok(BTreeWriter {
            path: path.to_path_buf(),
            tmp,
            out,
            page_size: page_size as usize,
            layout,
            key_field,
            next_page: 1,
            crc: crc32fast::Hasher::new(),
            cur: Vec::new(),
            cur_bytes: NODE_HEADER,
            leaves: Vec::new(),
            last_key: None,
            count: 0,
        })
    }

    pub fn push(&mut self, key: Vec<u8>, row: Vec<u8>) -> Result<(), StorageError> {
        if self.last_key.as_ref().is_some_and(|last| key < *last) {
            return Err(StorageError::UnsortedInput { index: self.count });
        }
        self.last_key = Some(key.clone());
        self.count += 1;
        let e = entry_len(&key, &row);
        if !self.cur.is_empty() && self.cur_bytes + e > self.page_size {
            // Close the leaf unless it is under half full; then grow it into
            // a multi-page extent instead, which keeps every leaf >= 50% full.
            if self.cur_bytes * 2 >= self.page_size {
                self.flush_leaf(false)?;
            }
        }
        self.cur_bytes += e;
        self.cur.push((key, row));
        Ok(())
    }

    fn write_node(&mut self, bytes: &mut Vec<u8>) -> Result<u32, StorageError> {
        let span = pages_for(bytes.len(), self.page_size);
        bytes.resize(span * self.page_size, 0);
        let id = self.next_page;
        bytes[9..13].copy_from_slice(&(span as u32).to_le_bytes());
        self.crc.update(bytes);
        self.out.write_all(bytes).map_err(|e| StorageError::io(&self.tmp, e))?;
        self.next_page += span as u32;
        Ok(id)
    }

    fn flush_leaf(&mut self, last: bool) -> Result<(), StorageError> {
        if self.cur.is_empty() {
            return Ok(());
        }
        let span = pages_for(self.cur_bytes, self.page_size) as u32;
        let next = if last { NONE } else { self.next_page + span };
        let mut bytes = Vec::with_capacity(span as usize * self.page_size);
        bytes.push(KIND_LEAF);
        put_u32(&mut bytes, self.cur.len() as u32);
        put_u32(&mut bytes, next);
        put_u32(&mut bytes, 0);
        for (k, row) in &self.cur {
            put_u32(&mut bytes, k.len() as u32);
            bytes.extend_from_slice(k);
            put_u32(&mut bytes, row.len() as u32);
            bytes.extend_from_slice(row);
        }
        let first = self.cur[0].0.clone();
        let id = self.write_node(&mut bytes)?;
        self.leaves.push((first, id));
        self.cur.clear();
        self.cur_bytes = NODE_HEADER;
        Ok(())
    }

    fn build_level(&mut self, children: Vec<(Vec<u8>, u32)>) -> Result<Vec<(Vec<u8>, u32)>, StorageError> {
        let mut parents = Vec::new();
        let mut i = 0;
        while i < children.len() {
            let mut bytes = vec![KIND_INTERNAL];
            put_u32(&mut bytes, 0);
            put_u32(&mut bytes, NONE);
            put_u32(&mut bytes, 0);
            put_u32(&mut bytes, children[i].1);
            let first = children[i].0.clone();
            let mut n = 1u32;
            i += 1;
            while i < children.len() {
                let (k, c) = &children[i];
                let add = 8 + k.len();
                if n >= 2 && bytes.len() + add > self.page_size {
                    break;
                }
                put_u32(&mut bytes, k.len() as u32);
                bytes.extend_from_slice(k);
                put_u32(&mut bytes, *c);
                n += 1;
                i += 1;
            }
            bytes[1..5].copy_from_slice(&n.to_le_bytes());
            let id = self.write_node(&mut bytes)?;
            parents.push((first, id));
        }
        Ok(parents)
    }

    /// Write the interior levels and the header, then move the file into place.
    pub fn finish(mut self) -> Result<u64, StorageError> {
        self.flush_leaf(true)?;
        let leaf_count = self.leaves.len() as u32;
        let first_leaf = self.leaves.first().map_or(NONE, |l| l.1);
        let mut level = std::mem::take(&mut self.leaves);
        let mut height = u32::from(!level.is_empty());
        while level.len() > 1 {
            level = self.build_level(level)?;
            height += 1;
        }
        let root = level.first().map_or(NONE, |l| l.1);

        let mut header = Vec::with_capacity(self.page_size);
        header.extend_from_slice(MAGIC);
        header.push(FORMAT_VERSION);
        put_u32(&mut header, self.page_size as u32);
        self.layout.encode(&mut header);
        header.extend_from_slice(&(self.key_field as u16).to_le_bytes());
        put_u32(&mut header, root);
        put_u32(&mut header, height);
        put_u32(&mut header, leaf_count);
        put_u32(&mut header, first_leaf);
        put_u64(&mut header, self.count);
        put_u32(&mut header, self.next_page);
        put_u32(&mut header, self.crc.clone().finalize());
        if header.len() > self.page_size {
            return Err(StorageError::InvalidSpec("schema too large for the header page".into()));
        }
        header.resize(self.page_size, 0);
        let tmp = self.tmp.clone();
        let mut f = self.out.into_inner().map_err(|e| StorageError::io(&tmp, e.into_error()))?;
        f.seek(SeekFrom::Start(0)).map_err(|e| StorageError::io(&tmp, e))?;
        f.write_all(&header).map_err(|e| StorageError::io(&tmp, e))?;
        f.sync_all().map_err(|e| StorageError::io(&tmp, e))?;
        drop(f);
        fs::rename(&tmp, &self.path).map_err(|e| StorageError::io(&self.path, e))?;
        Ok(self.next_page as u64 * self.page_size as u64)
    }
}

/// Read handle; each concurrent scanner opens its own.
pub struct BTreeReader {
    path: PathBuf,
    file: fs::File,
    pub header: BTreeHeader,
}

struct Node {
    kind: u8,
    count: u32,
    next: u32,
    bytes: Vec<u8>,
    base: u64,
}

impl BTreeReader {
    pub fn open(path: &Path) -> Result<Self, StorageError> {
        let mut file = fs::File::open(path).map_err(|e| StorageError::io(path, e))?;
        let mut first = vec![0u8; 512];
        let n = read_up_to(&mut file, &mut first).map_err(|e| StorageError::io(path, e))?;
        let mut r = Cursor::new(&first[..n], 0);
        r.magic(MAGIC)?;
        r.version()?;
        let page_size = r.u32()?;
        let mut page = vec![0u8; page_size as usize];
        file.seek(SeekFrom::Start(0)).map_err(|e| StorageError::io(path, e))?;
        let n = read_up_to(&mut file, &mut page).map_err(|e| StorageError::io(path, e))?;
        if n < page_size as usize {
            return Err(StorageError::decode(n as u64, "truncated header page"));
        }
        let mut r = Cursor::new(&page, 0);
        r.take(9)?;
        let layout = Layout::decode(&mut r)?;
        let key_field = r.u16()? as usize;
        let header = BTreeHeader {
            page_size,
            layout,
            key_field,
            root: r.u32()?,
            height: r.u32()?,
            leaf_count: r.u32()?,
            first_leaf: r.u32()?,
            record_count: r.u64()?,
            page_count: r.u32()?,
        };
        let len = file.metadata().map_err(|e| StorageError::io(path, e))?.len();
        if len != header.page_count as u64 * page_size as u64 {
            return Err(StorageError::decode(len, "file length disagrees with page count"));
        }
        Ok(BTreeReader { path: path.to_path_buf(), file, header })
    }

    /// Recompute the page checksum; a whole-file pass.
    pub fn verify_checksum(&mut self) -> Result<(), StorageError> {
        let ps = self.header.page_size as u64;
        let mut full = vec![0u8; ps as usize];
        self.file.seek(SeekFrom::Start(0)).map_err(|e| StorageError::io(&self.path, e))?;
        read_up_to(&mut self.file, &mut full).map_err(|e| StorageError::io(&self.path, e))?;
        // stored crc sits right after page_count in the header
        let mut r = Cursor::new(&full, 0);
        r.take(9)?;
        Layout::decode(&mut r)?;
        r.take(2 + 4 * 4 + 8 + 4)?;
        let want = r.u32()?;
        let mut h = crc32fast::Hasher::new();
        let mut buf = vec![0u8; 1 << 16];
        loop {
            let n = self.file.read(&mut buf).map_err(|e| StorageError::io(&self.path, e))?;
            if n == 0 {
                break;
            }
            h.update(&buf[..n]);
        }
        if h.finalize() != want {
            return Err(StorageError::decode(ps, "index checksum mismatch"));
        }
        Ok(())
    }

    fn read_node(&mut self, id: u32, stats: &mut ScanStats) -> Result<Node, StorageError> {
        let ps = self.header.page_size as usize;
        if id == 0 || id >= self.header.page_count {
            return Err(StorageError::decode(0, format!("page id {id} out of range")));
        }
        let base = id as u64 * ps as u64;
        let mut bytes = vec![0u8; ps];
        self.file.seek(SeekFrom::Start(base)).map_err(|e| StorageError::io(&self.path, e))?;
        self.file.read_exact(&mut bytes).map_err(|e| StorageError::io(&self.path, e))?;
        let mut r = Cursor::new(&bytes, base);
        let kind = r.u8()?;
        let count = r.u32()?;
        let next = r.u32()?;
        let span = r.u32()?;
        if span == 0 || id as u64 + span as u64 > self.header.page_count as u64 {
            return Err(StorageError::decode(base + 9, format!("bad extent span {span}")));
        }
        if kind != KIND_LEAF && kind != KIND_INTERNAL {
            return Err(StorageError::decode(base, format!("bad node kind {kind}")));
        }
        if span > 1 {
            bytes.resize(span as usize * ps, 0);
            self.file.read_exact(&mut bytes[ps..]).map_err(|e| StorageError::io(&self.path, e))?;
        }
        stats.pages_read += span as u64;
        stats.bytes_read += span as u64 * ps as u64;
        Ok(Node { kind, count, next, bytes, base })
    }

    fn descend(&mut self, lo: &Bound<Vec<u8>>, stats: &mut ScanStats) -> Result<Option<u32>, StorageError> {
        let mut id = self.header.root;
        if id == NONE {
            return Ok(None);
        }
        if matches!(lo, Bound::Unbounded) {
            return Ok(Some(self.header.first_leaf));
        }
        loop {
            let node = self.read_node(id, stats)?;
            if node.kind == KIND_LEAF {
                return Ok(Some(id));
            }
            let mut r = Cursor::new(&node.bytes[NODE_HEADER..], node.base + NODE_HEADER as u64);
            let mut child = r.u32()?;
            for _ in 1..node.count {
                let klen = r.u32()? as usize;
                let sep = r.take(klen)?;
                let c = r.u32()?;
                let go_right = match lo {
                    Bound::Included(l) => sep < l.as_slice(),
                    Bound::Excluded(l) => sep <= l.as_slice(),
                    Bound::Unbounded => false,
                };
                if !go_right {
                    break;
                }
                child = c;
            }
            id = child;
        }
    }

    /// Visit every `(key, row)` whose key lies in one of `ranges`, in range
    /// order. Ranges must be sorted and disjoint.
    pub fn scan(
        &mut self,
        ranges: &[ByteRange],
        mut f: impl FnMut(&[u8], &[u8], u64) -> Result<(), StorageError>,
    ) -> Result<ScanStats, StorageError> {
        let mut stats = ScanStats::default();
        for range in ranges {
            let Some(mut leaf) = self.descend(&range.lo, &mut stats)? else {
                continue;
            };
            'leaves: while leaf != NONE {
                let node = self.read_node(leaf, &mut stats)?;
                if node.kind != KIND_LEAF {
                    return Err(StorageError::decode(node.base, "expected a leaf"));
                }
                let mut r = Cursor::new(&node.bytes[NODE_HEADER..], node.base + NODE_HEADER as u64);
                for _ in 0..node.count {
                    let klen = r.u32()? as usize;
                    let key = r.take(klen)?;
                    let rlen = r.u32()? as usize;
                    let at = r.offset();
                    let row = r.take(rlen)?;
                    if range.is_past(key) {
                        break 'leaves;
                    }
                    if range.contains(key) {
                        stats.records += 1;
                        f(key, row, at)?;
                    }
                }
                leaf = node.next;
            }
        }
        Ok(stats)
    }

    /// (used bytes, extent bytes) per leaf in chain order.
    pub fn leaf_fill(&mut self) -> Result<Vec<(usize, usize)>, StorageError> {
        let mut out = Vec::new();
        let mut stats = ScanStats::default();
        let mut leaf = self.header.first_leaf;
        while leaf != NONE {
            let node = self.read_node(leaf, &mut stats)?;
            let mut r = Cursor::new(&node.bytes[NODE_HEADER..], 0);
            for _ in 0..node.count {
                let k = r.u32()? as usize;
                r.take(k)?;
                let v = r.u32()? as usize;
                r.take(v)?;
            }
            out.push((NODE_HEADER + r.pos(), node.bytes.len()));
            leaf = node.next;
        }
        Ok(out)
    }
}

fn read_up_to(f: &mut fs::File, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        let k = f.read(&mut buf[n..])?;
        if k == 0 {
            break;
        }
        n += k;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{ScalarType, Schema};
    use crate::value::Value;

    fn layout() -> Layout {
        Layout::plain(Schema::new("T", &[("id", ScalarType::I32), ("pad", ScalarType::Str)]))
    }

    fn build(dir: &Path, keys: &[i32], pad: usize) -> PathBuf {
        let p = dir.join("t.mmb");
        let l = layout();
        let mut w = BTreeWriter::create(&p, l.clone(), 0, 512).unwrap();
        for &k in keys {
            let rec = vec![Value::I32(k), Value::Str("p".repeat(pad))];
            let mut row = Vec::new();
            l.encode_row(&rec, &mut row).unwrap();
            w.push(Value::I32(k).key_bytes(), row).unwrap();
        }
        w.finish().unwrap();
        p
    }

    fn collect(r: &mut BTreeReader, ranges: &[ByteRange]) -> Vec<i32> {
        let mut out = Vec::new();
        let l = r.header.layout.clone();
        r.scan(ranges, |_, row, at| {
            out.push(l.decode_row(row, at)?[0].as_int().unwrap() as i32);
            Ok(())
        })
        .unwrap();
        out
    }

    #[test]
    fn empty_tree() {
        let dir = tempfile::tempdir().unwrap();
        let p = build(dir.path(), &[], 0);
        let mut r = BTreeReader::open(&p).unwrap();
        assert_eq!(r.header.height, 0);
        assert!(collect(&mut r, &[ByteRange::full()]).is_empty());
    }

    #[test]
    fn unsorted_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = BTreeWriter::create(&dir.path().join("x"), layout(), 0, 512).unwrap();
        w.push(vec![2], vec![]).unwrap();
        assert!(matches!(w.push(vec![1], vec![]), Err(StorageError::UnsortedInput { index: 1 })));
    }

    #[test]
    fn range_and_height() {
        let dir = tempfile::tempdir().unwrap();
        let keys: Vec<i32> = (1..=1000).collect();
        let p = build(dir.path(), &keys, 3);
        let mut r = BTreeReader::open(&p).unwrap();
        r.verify_checksum().unwrap();
        let lo = Bound::Included(Value::I32(250).key_bytes());
        let hi = Bound::Excluded(Value::I32(750).key_bytes());
        let got = collect(&mut r, &[ByteRange { lo, hi }]);
        assert_eq!(got, (250..750).collect::<Vec<_>>());

        let fill = r.leaf_fill().unwrap();
        assert_eq!(fill.len() as u32, r.header.leaf_count);
        for &(used, ext) in &fill[..fill.len() - 1] {
            assert!(used * 2 >= ext, "{used}/{ext}");
        }
        // fanout from the smallest interior node bounds the height
        let leaves = r.header.leaf_count as f64;
        assert!(r.header.height >= 2 && (r.header.height as f64) <= leaves.log2().ceil() + 1.0);
    }

    #[test]
    fn oversize_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let mut keys = vec![5; 40];
        keys.extend([6, 7, 7, 9]);
        let p = build(dir.path(), &keys, 900);
        let mut r = BTreeReader::open(&p).unwrap();
        let k = Value::I32(5).key_bytes();
        let got = collect(&mut r, &[ByteRange { lo: Bound::Included(k.clone()), hi: Bound::Included(k) }]);
        assert_eq!(got.len(), 40);
        assert_eq!(collect(&mut r, &[ByteRange::full()]), keys);
        for &(used, ext) in &r.leaf_fill().unwrap() {
            assert!(used * 2 >= ext);
        }
    }
}
