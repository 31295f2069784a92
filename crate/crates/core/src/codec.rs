//! Canonical JSON encoding.
//!
//! Every hash and signature in the system is taken over this encoding, so it
//! has to be bit-exact across nodes and across the browser client: object keys
//! sorted bytewise, no insignificant whitespace, integers in plain decimal and
//! byte strings rendered as lowercase hex by their owning types.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("non-encodable value at {path}: {kind}")]
    NotEncodable { path: String, kind: &'static str },
    #[error("malformed json: {0}")]
    Malformed(String),
    #[error("encoding is not canonical")]
    NotCanonical,
}

/// Encodes a structured value into its canonical byte form.
///
/// Only strings, integers, booleans, lists and string-keyed maps are accepted;
/// `null` and floating point numbers are rejected.
pub fn canonical_encode(value: &Value) -> Result<Vec<u8>, CodecError> {
    check_encodable(value, &mut String::from("$"))?;
    let mut out = Vec::with_capacity(128);
    write_value(value, &mut out);
    Ok(out)
}

/// Serializes any `Serialize` type through [`canonical_encode`].
pub fn to_canonical<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CodecError> {
    let value = serde_json::to_value(value).map_err(|e| CodecError::Malformed(e.to_string()))?;
    canonical_encode(&value)
}

/// Parses `bytes` and rejects any input that is not byte-identical to the
/// canonical encoding of the decoded value.
pub fn decode_canonical<T: DeserializeOwned + Serialize>(bytes: &[u8]) -> Result<T, CodecError> {
    let value: T = serde_json::from_slice(bytes).map_err(|e| CodecError::Malformed(e.to_string()))?;
    if to_canonical(&value)? != bytes {
        return Err(CodecError::NotCanonical);
    }
    Ok(value)
}

fn check_encodable(value: &Value, path: &mut String) -> Result<(), CodecError> {
    match value {
        Value::Null => Err(CodecError::NotEncodable { path: path.clone(), kind: "null" }),
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            Err(CodecError::NotEncodable { path: path.clone(), kind: "float" })
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                let len = path.len();
                path.push_str(&format!("[{i}]"));
                check_encodable(item, path)?;
                path.truncate(len);
            }
            Ok(())
        }
        Value::Object(map) => {
            for (k, v) in map {
                let len = path.len();
                path.push('.');
                path.push_str(k);
                check_encodable(v, path)?;
                path.truncate(len);
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn write_value(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out);
            }
            out.push(b']');
        }
        Value::Object(map) => {
            // serde_json's map iterates in insertion order when `preserve_order`
            // is enabled anywhere in the build graph, so sort explicitly.
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_unstable_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_scalar(&Value::String(k.clone()), out);
                out.push(b':');
                write_value(v, out);
            }
            out.push(b'}');
        }
        scalar => write_scalar(scalar, out),
    }
}

fn write_scalar(value: &Value, out: &mut Vec<u8>) {
    // Strings, booleans and integers have a single compact rendering in serde_json.
    serde_json::to_writer(out, value).expect("writing to a Vec cannot fail");
}
