//! String dictionaries (`MMDI`): a bijection between distinct strings and
//! dense u32 tokens assigned in sorted string order.

use std::collections::HashMap;
use std::path::Path;

use super::{put_u32, put_u64, read_file, write_atomic, Cursor, FORMAT_VERSION};
use crate::error::StorageError;

pub const MAGIC: &[u8; 4] = b"MMDI";
pub const END_MAGIC: &[u8; 4] = b"MMDE";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dictionary {
    strings: Vec<String>,
    tokens: HashMap<String, u32>,
}

impl Dictionary {
    pub fn build<'a>(values: impl IntoIterator<Item = &'a str>) -> Result<Self, StorageError> {
        let mut strings: Vec<String> = values.into_iter().map(str::to_owned).collect();
        strings.sort_unstable();
        strings.dedup();
        Self::from_sorted(strings)
    }

    fn from_sorted(strings: Vec<String>) -> Result<Self, StorageError> {
        if strings.len() as u64 > u32::MAX as u64 + 1 {
            return Err(StorageError::DictionaryFull);
        }
        let tokens = strings.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        Ok(Dictionary { strings, tokens })
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    /// `None` means the string is absent: it equals no stored value.
    pub fn encode(&self, s: &str) -> Option<u32> {
        self.tokens.get(s).copied()
    }

    pub fn lookup(&self, t: u32) -> Option<&str> {
        self.strings.get(t as usize).map(String::as_str)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        put_u64(&mut out, self.strings.len() as u64);
        let body_start = out.len();
        for s in &self.strings {
            put_u32(&mut out, s.len() as u32);
            out.extend_from_slice(s.as_bytes());
        }
        let crc = crc32fast::hash(&out[body_start..]);
        put_u32(&mut out, crc);
        out.extend_from_slice(END_MAGIC);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StorageError> {
        let mut r = Cursor::new(bytes, 0);
        r.magic(MAGIC)?;
        r.version()?;
        let n = r.u64()?;
        let body_start = r.pos();
        let mut strings = Vec::with_capacity(n.min(1 << 20) as usize);
        for _ in 0..n {
            let len = r.u32()? as usize;
            let at = r.offset();
            let s = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| StorageError::decode(at, "invalid utf-8 in dictionary"))?;
            if strings.last().is_some_and(|p: &String| *p >= s) {
                return Err(StorageError::decode(at, "dictionary entries not strictly sorted"));
            }
            strings.push(s);
        }
        let body_end = r.pos();
        let crc = r.u32()?;
        r.magic(END_MAGIC)?;
        if crc32fast::hash(&bytes[body_start..body_end]) != crc {
            return Err(StorageError::decode(body_end as u64, "dictionary checksum mismatch"));
        }
        Self::from_sorted(strings)
    }

    pub fn write(&self, path: &Path) -> Result<u64, StorageError> {
        let bytes = self.to_bytes();
        write_atomic(path, &bytes)?;
        Ok(bytes.len() as u64)
    }

    pub fn read(path: &Path) -> Result<Self, StorageError> {
        Self::from_bytes(&read_file(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sorted_token_assignment() {
        let col = ["b", "a", "b"];
        let d = Dictionary::build(col).unwrap();
        assert_eq!(d.len(), 2);
        let enc: Vec<u32> = col.iter().map(|s| d.encode(s).unwrap()).collect();
        assert_eq!(enc, [1, 0, 1]);
        assert_eq!(d.encode("zzz"), None);
        assert!(Dictionary::build(Vec::<&str>::new()).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn bijection_and_file_roundtrip(col in proptest::collection::vec("[a-d]{0,4}", 0..60)) {
            let d = Dictionary::build(col.iter().map(String::as_str)).unwrap();
            for s in &col {
                let t = d.encode(s).unwrap();
                prop_assert_eq!(d.lookup(t), Some(s.as_str()));
            }
            for t in 0..d.len() as u32 {
                prop_assert_eq!(d.encode(d.lookup(t).unwrap()), Some(t));
            }
            prop_assert_eq!(Dictionary::from_bytes(&d.to_bytes()).unwrap(), d);
        }
    }
}
