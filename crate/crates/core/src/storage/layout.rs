//! Which fields an index file retains and how each one is coded.

use serde::{Deserialize, Serialize};

use super::record::{decode_value, encode_value};
use super::{decode_schema, encode_schema, put_u16, Cursor};
use crate::error::StorageError;
use crate::lang::{ScalarType, Schema};
use crate::value::{Record, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codec {
    Plain,
    Delta,
    Dict,
}

impl Codec {
    fn tag(self) -> u8 {
        match self {
            Codec::Plain => 0,
            Codec::Delta => 1,
            Codec::Dict => 2,
        }
    }

    fn from_tag(t: u8) -> Option<Self> {
        Some(match t {
            0 => Codec::Plain,
            1 => Codec::Delta,
            2 => Codec::Dict,
            _ => return None,
        })
    }
}

/// The source schema plus the retained fields (in schema order) and their codecs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub schema: Schema,
    pub retained: Vec<usize>,
    pub codecs: Vec<Codec>,
}

impl Layout {
    pub fn new(schema: Schema, retained: Vec<usize>, codecs: Vec<Codec>) -> Result<Self, StorageError> {
        if retained.is_empty() {
            return Err(StorageError::InvalidSpec("no retained fields".into()));
        }
        if retained.len() != codecs.len() || retained.windows(2).any(|w| w[0] >= w[1]) {
            return Err(StorageError::InvalidSpec("retained fields must be increasing with one codec each".into()));
        }
        for (&i, &c) in retained.iter().zip(&codecs) {
            let f = schema
                .fields
                .get(i)
                .ok_or_else(|| StorageError::InvalidSpec(format!("field index {i} out of range")))?;
            let ok = match c {
                Codec::Plain => true,
                Codec::Delta => f.ty.is_numeric(),
                Codec::Dict => f.ty == ScalarType::Str,
            };
            if !ok {
                return Err(StorageError::InvalidSpec(format!("codec {c:?} does not apply to {} field {}", f.ty, f.name)));
            }
        }
        Ok(Layout { schema, retained, codecs })
    }

    pub fn plain(schema: Schema) -> Self {
        let n = schema.fields.len();
        Layout { schema, retained: (0..n).collect(), codecs: vec![Codec::Plain; n] }
    }

    pub fn codec_of(&self, field: usize) -> Option<Codec> {
        self.retained.iter().position(|&i| i == field).map(|p| self.codecs[p])
    }

    pub fn retained_names(&self) -> Vec<String> {
        self.retained.iter().map(|&i| self.schema.fields[i].name.clone()).collect()
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        encode_schema(&self.schema, out);
        put_u16(out, self.retained.len() as u16);
        for (&i, &c) in self.retained.iter().zip(&self.codecs) {
            put_u16(out, i as u16);
            out.push(c.tag());
        }
    }

    pub(crate) fn decode(r: &mut Cursor<'_>) -> Result<Self, StorageError> {
        let schema = decode_schema(r)?;
        let n = r.u16()? as usize;
        let mut retained = Vec::with_capacity(n);
        let mut codecs = Vec::with_capacity(n);
        for _ in 0..n {
            retained.push(r.u16()? as usize);
            let at = r.offset();
            codecs.push(Codec::from_tag(r.u8()?).ok_or_else(|| StorageError::decode(at, "bad codec tag"))?);
        }
        Layout::new(schema, retained, codecs).map_err(|e| StorageError::decode(r.offset(), e.to_string()))
    }

    /// Row bytes for the B+Tree: retained fields in order, dictionary
    /// fields as u32 tokens. `rec` holds `Value::Token` in dict positions.
    pub fn encode_row(&self, rec: &[Value], out: &mut Vec<u8>) -> Result<(), StorageError> {
        for (&i, &c) in self.retained.iter().zip(&self.codecs) {
            let f = &self.schema.fields[i];
            let v = &rec[i];
            match (c, v) {
                (Codec::Dict, Value::Token(t)) => out.extend_from_slice(&t.to_le_bytes()),
                (Codec::Plain, _) => encode_value(f.ty, v, out).map_err(|_| {
                    StorageError::InvalidSpec(format!("field {} expects {}, got {v}", f.name, f.ty))
                })?,
                _ => return Err(StorageError::InvalidSpec(format!("field {} cannot be row-coded as {c:?}", f.name))),
            }
        }
        Ok(())
    }

    /// Inverse of `encode_row`; dropped fields read as their zero value.
    pub fn decode_row(&self, bytes: &[u8], base: u64) -> Result<Record, StorageError> {
        let mut rec = self.zero_record();
        let mut r = Cursor::new(bytes, base);
        for (&i, &c) in self.retained.iter().zip(&self.codecs) {
            rec[i] = match c {
                Codec::Dict => Value::Token(r.u32()?),
                _ => decode_value(self.schema.fields[i].ty, &mut r)?,
            };
        }
        if r.remaining() != 0 {
            return Err(StorageError::decode(r.offset(), "trailing bytes in row"));
        }
        Ok(rec)
    }

    pub fn zero_record(&self) -> Record {
        self.schema.fields.iter().map(|f| Value::zero(f.ty)).collect()
    }
}
