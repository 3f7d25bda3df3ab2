//! Parameter checkpoints: one little-endian f64 blob plus a JSON manifest
//! (`<path>.json`) listing each tensor's name, shape, role and offset.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::param::Param;
use crate::error::{Error, Result};
use crate::io;

pub const CHECKPOINT_MAGIC: &str = "SOZGRAPH-CKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub role: String,
    pub shape: [usize; 2],
    /// Offset into the blob, in f64 elements.
    pub offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub magic: String,
    pub version: u32,
    pub tensors: Vec<TensorEntry>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub tensors: Vec<(TensorEntry, Array2<f64>)>,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.tensors.iter().find(|(e, _)| e.name == name).map(|(_, t)| t)
    }

    /// Copies stored values into `params` by name; every parameter must be present
    /// with the same shape.
    pub fn restore<'a>(&self, params: impl IntoIterator<Item = &'a mut Param>) -> Result<()> {
        for p in params {
            let t = self
                .get(&p.name)
                .ok_or_else(|| Error::config(format!("checkpoint lacks tensor {}", p.name)))?;
            if t.dim() != p.value.dim() {
                return Err(Error::config(format!(
                    "checkpoint tensor {} has shape {:?}, model expects {:?}",
                    p.name,
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value.assign(t);
        }
        Ok(())
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_checkpoint<'a>(
    path: &Path,
    params: impl IntoIterator<Item = &'a Param>,
    meta: serde_json::Value,
) -> Result<()> {
    let mut tensors = Vec::new();
    let mut blob = Vec::new();
    for p in params {
        tensors.push(TensorEntry {
            name: p.name.clone(),
            role: p.role.clone(),
            shape: [p.value.nrows(), p.value.ncols()],
            offset: blob.len(),
        });
        blob.extend(p.value.iter().copied());
    }
    io::write_f64(path, blob)?;
    io::write_json(
        &manifest_path(path),
        &Manifest {
            magic: CHECKPOINT_MAGIC.into(),
            version: CHECKPOINT_VERSION,
            tensors,
            meta,
        },
    )
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mpath = manifest_path(path);
    let manifest: Manifest = io::read_json(&mpath)?;
    if manifest.magic != CHECKPOINT_MAGIC {
        return Err(Error::Parse {
            path: mpath,
            offset: 0,
            msg: format!("bad magic {:?}", manifest.magic),
        });
    }
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            path: mpath,
            found: manifest.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let total: usize = manifest.tensors.iter().map(|t| t.shape[0] * t.shape[1]).sum();
    let blob = io::read_f64(path, total)?;
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for e in manifest.tensors {
        let n = e.shape[0] * e.shape[1];
        if e.offset + n > blob.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                offset: (e.offset * 8) as u64,
                msg: format!("tensor {} overruns blob", e.name),
            });
        }
        let arr = Array2::from_shape_vec((e.shape[0], e.shape[1]), blob[e.offset..e.offset + n].to_vec())
            .expect("shape matches slice length");
        tensors.push((e, arr));
    }
    Ok(Checkpoint {
        tensors,
        meta: manifest.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_preserves_values_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let a = Param::new("a.w", "weight", array![[1.0, -2.5], [1e-300, 3.0]]);
        let b = Param::new("a.b", "bias", array![[0.1, 0.2]]);
        save_checkpoint(&path, [&a, &b], serde_json::json!({"kind": "test"})).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.get("a.w").unwrap(), &a.value);
        assert_eq!(ck.get("a.b").unwrap(), &b.value);
        assert_eq!(ck.meta["kind"], "test");

        let mut c = Param::zeros("a.w", "weight", (2, 2));
        ck.restore([&mut c]).unwrap();
        assert_eq!(c.value, a.value);
        let mut wrong = Param::zeros("a.w", "weight", (3, 2));
        assert!(ck.restore([&mut wrong]).is_err());
    }
}
