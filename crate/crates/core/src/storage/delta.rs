//! Delta coding for integer columns: the first value, then successive
//! differences, each zigzag-mapped and written as an LEB128 varint.

use super::Cursor;
use crate::error::StorageError;

pub fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

pub fn unzigzag(u: u64) -> i64 {
    ((u >> 1) as i64) ^ -((u & 1) as i64)
}

pub fn put_varint(out: &mut Vec<u8>, mut u: u64) {
    while u >= 0x80 {
        out.push((u as u8) | 0x80);
        u >>= 7;
    }
    out.push(u as u8);
}

pub(crate) fn get_varint(r: &mut Cursor<'_>) -> Result<u64, StorageError> {
    let start = r.offset();
    let mut u = 0u64;
    for i in 0..10 {
        let b = r.u8()?;
        if i == 9 && b > 1 {
            return Err(StorageError::decode(start, "varint overflows 64 bits"));
        }
        u |= ((b & 0x7f) as u64) << (7 * i);
        if b & 0x80 == 0 {
            return Ok(u);
        }
    }
    Err(StorageError::decode(start, "varint longer than 10 bytes"))
}

pub fn encode(values: &[i64], out: &mut Vec<u8>) {
    let mut prev = 0i64;
    for &v in values {
        put_varint(out, zigzag(v.wrapping_sub(prev)));
        prev = v;
    }
}

/// Decode exactly `n` values.
pub fn decode(bytes: &[u8], n: usize) -> Result<Vec<i64>, StorageError> {
    decode_at(bytes, n, 0)
}

pub(crate) fn decode_at(bytes: &[u8], n: usize, base: u64) -> Result<Vec<i64>, StorageError> {
    let mut r = Cursor::new(bytes, base);
    let mut out = Vec::with_capacity(n);
    let mut prev = 0i64;
    for _ in 0..n {
        prev = prev.wrapping_add(unzigzag(get_varint(&mut r)?));
        out.push(prev);
    }
    if r.remaining() != 0 {
        return Err(StorageError::decode(r.offset(), "trailing bytes in delta segment"));
    }
    Ok(out)
}
