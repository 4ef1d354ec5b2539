//! Runtime values shared by the interpreter, the codecs and the shuffle.

use std::fmt;
use std::sync::Arc;

use crate::lang::ScalarType;

/// A decoded input record; one value per schema field, in schema order.
pub type Record = Vec<Value>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    I32(i32),
    I64(i64),
    Str(String),
    Blob(Vec<u8>),
    Bool(bool),
    /// Dictionary token standing in for a string under direct operation.
    Token(u32),
    Record(Arc<Record>),
}

impl Value {
    /// The value a projected-away field reads as.
    pub fn zero(ty: ScalarType) -> Value {
        match ty {
            ScalarType::I32 => Value::I32(0),
            ScalarType::I64 => Value::I64(0),
            ScalarType::Str => Value::Str(String::new()),
            ScalarType::Blob => Value::Blob(Vec::new()),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::I32(v) => Some(*v as i64),
            Value::I64(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    /// Order-preserving byte image: byte-wise comparison of two images of
    /// the same variant agrees with the value order of that variant.
    pub fn encode_key(&self, out: &mut Vec<u8>) {
        match self {
            Value::I32(v) => out.extend_from_slice(&((*v as u32) ^ 0x8000_0000).to_be_bytes()),
            Value::I64(v) => out.extend_from_slice(&((*v as u64) ^ 0x8000_0000_0000_0000).to_be_bytes()),
            Value::Str(s) => out.extend_from_slice(s.as_bytes()),
            Value::Blob(b) => out.extend_from_slice(b),
            Value::Bool(b) => out.push(*b as u8),
            Value::Token(t) => out.extend_from_slice(&t.to_be_bytes()),
            Value::Record(r) => {
                for v in r.iter() {
                    v.encode_tagged(out);
                }
            }
        }
    }

    pub fn key_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_key(&mut out);
        out
    }

    /// Self-describing encoding used for shuffle values and nested records.
    pub fn encode_tagged(&self, out: &mut Vec<u8>) {
        match self {
            Value::I32(v) => {
                out.push(1);
                out.extend_from_slice(&v.to_le_bytes());
            }
            Value::I64(v) => {
                out.push(2);
                out.extend_from_slice(&v.to_le_bytes());
            }
            Value::Str(s) => {
                out.push(3);
                out.extend_from_slice(&(s.len() as u32).to_le_bytes());
                out.extend_from_slice(s.as_bytes());
            }
            Value::Blob(b) => {
                out.push(4);
                out.extend_from_slice(&(b.len() as u32).to_le_bytes());
                out.extend_from_slice(b);
            }
            Value::Bool(b) => {
                out.push(5);
                out.push(*b as u8);
            }
            Value::Token(t) => {
                out.push(6);
                out.extend_from_slice(&t.to_le_bytes());
            }
            Value::Record(r) => {
                out.push(7);
                out.extend_from_slice(&(r.len() as u32).to_le_bytes());
                for v in r.iter() {
                    v.encode_tagged(out);
                }
            }
        }
    }

    /// Inverse of [`Value::encode_tagged`]; returns the value and the bytes consumed.
    pub fn decode_tagged(buf: &[u8]) -> Option<(Value, usize)> {
        let (&tag, rest) = buf.split_first()?;
        let fixed = |n: usize| rest.get(..n);
        let v = match tag {
            1 => (Value::I32(i32::from_le_bytes(fixed(4)?.try_into().ok()?)), 5),
            2 => (Value::I64(i64::from_le_bytes(fixed(8)?.try_into().ok()?)), 9),
            3 | 4 => {
                let len = u32::from_le_bytes(fixed(4)?.try_into().ok()?) as usize;
                let body = rest.get(4..4 + len)?;
                let v = if tag == 3 {
                    Value::Str(String::from_utf8(body.to_vec()).ok()?)
                } else {
                    Value::Blob(body.to_vec())
                };
                (v, 5 + len)
            }
            5 => (Value::Bool(*fixed(1)?.first()? != 0), 2),
            6 => (Value::Token(u32::from_le_bytes(fixed(4)?.try_into().ok()?)), 5),
            7 => {
                let n = u32::from_le_bytes(fixed(4)?.try_into().ok()?) as usize;
                let mut pos = 5;
                let mut fields = Vec::with_capacity(n);
                for _ in 0..n {
                    let (v, used) = Value::decode_tagged(&buf[pos..])?;
                    fields.push(v);
                    pos += used;
                }
                (Value::Record(Arc::new(fields)), pos)
            }
            _ => return None,
        };
        Some(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::I32(v) => write!(f, "{v}"),
            Value::I64(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Blob(b) => write!(f, "blob[{}]", b.len()),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Token(t) => write!(f, "#{t}"),
            Value::Record(r) => {
                write!(f, "{{")?;
                for (i, v) in r.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_key_images_sort_like_ints() {
        let mut xs = vec![-5i64, 7, 0, i64::MIN, i64::MAX, -1, 1];
        let mut images: Vec<Vec<u8>> = xs.iter().map(|&x| Value::I64(x).key_bytes()).collect();
        xs.sort();
        images.sort();
        let want: Vec<Vec<u8>> = xs.iter().map(|&x| Value::I64(x).key_bytes()).collect();
        assert_eq!(images, want);

        assert!(Value::I32(-1).key_bytes() < Value::I32(0).key_bytes());
        assert!(Value::I32(i32::MAX).key_bytes() > Value::I32(1).key_bytes());
    }

    #[test]
    fn tagged_roundtrip_nested() {
        let v = Value::Record(Arc::new(vec![
            Value::Str("a".into()),
            Value::I32(-3),
            Value::Blob(vec![1, 2]),
            Value::Token(9),
        ]));
        let mut buf = Vec::new();
        v.encode_tagged(&mut buf);
        let (back, used) = Value::decode_tagged(&buf).unwrap();
        assert_eq!(back, v);
        assert_eq!(used, buf.len());
        assert!(Value::decode_tagged(&buf[..buf.len() - 1]).is_none());
    }
}
