//! Single-file weight archive: magic, a JSON manifest (schema version,
//! architecture tag, dtype, config, tensor index) and raw little-endian data.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::nn::{ParamKind, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"VSEGWTS1";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorIndex {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the data section.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub architecture: String,
    pub dtype: String,
    pub config: Value,
    pub tensors: Vec<TensorIndex>,
}

pub fn write_archive<T: Scalar>(path: &Path, architecture: &str, config: Value, store: &ParamStore<T>) -> Result<()> {
    let mut data = Vec::new();
    let mut tensors = Vec::with_capacity(store.len());
    for e in store.entries() {
        tensors.push(TensorIndex { name: e.name.clone(), kind: e.kind, shape: e.value.shape().to_vec(), offset: data.len() });
        for &v in e.value.data() {
            v.write_le(&mut data);
        }
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        architecture: architecture.to_string(),
        dtype: T::DTYPE.to_string(),
        config,
        tensors,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(MAGIC)?;
    f.write_all(&(json.len() as u64).to_le_bytes())?;
    f.write_all(&json)?;
    f.write_all(&data)?;
    f.sync_all()?;
    Ok(())
}

/// Parsed archive with tensors converted to `T`.
pub struct Archive<T> {
    pub manifest: Manifest,
    pub tensors: Vec<(TensorIndex, Tensor<T>)>,
}

fn decode<T: Scalar>(dtype: &str, bytes: &[u8]) -> Result<Vec<T>> {
    match dtype {
        "f32" => Ok(bytes.chunks_exact(4).map(|c| T::lit(f32::read_le(c) as f64)).collect()),
        "f64" => Ok(bytes.chunks_exact(8).map(|c| T::lit(f64::read_le(c))).collect()),
        other => Err(Error::CorruptArchive(format!("unknown dtype `{other}`"))),
    }
}

pub fn read_archive<T: Scalar>(path: &Path) -> Result<Archive<T>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path)?;
    let corrupt = |m: &str| Error::CorruptArchive(format!("{}: {m}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16usize.saturating_add(len)).ok_or_else(|| corrupt("truncated manifest"))?;
    let manifest: Manifest = serde_json::from_slice(body).map_err(|e| corrupt(&format!("manifest: {e}")))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(corrupt(&format!("unsupported schema version {}", manifest.schema_version)));
    }
    let width = match manifest.dtype.as_str() {
        "f32" => 4,
        "f64" => 8,
        other => return Err(corrupt(&format!("unknown dtype `{other}`"))),
    };
    let data = &bytes[16 + len..];
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for idx in &manifest.tensors {
        let n: usize = idx.shape.iter().product();
        let raw = data
            .get(idx.offset..idx.offset + n * width)
            .ok_or_else(|| corrupt(&format!("tensor `{}` runs past the end", idx.name)))?;
        let t = Tensor::new(&idx.shape, decode(&manifest.dtype, raw)?)?;
        tensors.push((idx.clone(), t));
    }
    Ok(Archive { manifest, tensors })
}

/// Copies archived tensors into `store`; names, kinds and shapes must match.
pub fn restore_store<T: Scalar>(store: &mut ParamStore<T>, tensors: Vec<(TensorIndex, Tensor<T>)>) -> Result<()> {
    if tensors.len() != store.len() {
        return Err(Error::CorruptArchive(format!("archive has {} tensors, model has {}", tensors.len(), store.len())));
    }
    for (idx, t) in tensors {
        let id = store
            .find(&idx.name)
            .ok_or_else(|| Error::CorruptArchive(format!("unknown tensor `{}`", idx.name)))?;
        if store.get(id).shape() != t.shape() || store.entry(id).kind != idx.kind {
            return Err(Error::CorruptArchive(format!("tensor `{}` has shape {:?}", idx.name, t.shape())));
        }
        *store.get_mut(id) = t;
    }
    Ok(())
}

/// Dotted paths of every leaf where two JSON values differ.
pub fn diff_fields(a: &Value, b: &Value) -> Vec<String> {
    fn walk(a: &Value, b: &Value, path: &str, out: &mut Vec<String>) {
        match (a, b) {
            (Value::Object(x), Value::Object(y)) => {
                let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
                keys.sort();
                keys.dedup();
                for k in keys {
                    let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                    walk(x.get(k).unwrap_or(&Value::Null), y.get(k).unwrap_or(&Value::Null), &p, out);
                }
            }
            _ if a != b => out.push(path.to_string()),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(a, b, "", &mut out);
    out
}
