//! Model file: a versioned binary container holding the projection and
//! everything needed to apply it.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic     8 bytes   "FDLSRMDL"
//! version   u32
//! meta_len  u64       length of the JSON metadata section
//! meta      JSON      method, class names, normalization, config, manifest
//! rows      u64
//! cols      u64
//! data      rows·cols f64, column-major, raw IEEE-754 bits
//! ```
//!
//! The projection is stored bit for bit, so a write/read cycle is exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Normalization, Normalizer};
use crate::solvers::{Method, Projection, SolverConfig};
use crate::{Error, Matrix, Result};

pub const MAGIC: &[u8; 8] = b"FDLSRMDL";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub method: Method,
    /// Label name of each class index.
    pub class_names: Vec<String>,
    pub normalization: Normalization,
    pub normalizer: Normalizer,
    pub config: SolverConfig,
    /// Run manifest of the command that produced the model.
    pub manifest: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub meta: ModelMeta,
    pub projection: Projection,
}

impl Model {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<model>", e);
        let meta = serde_json::to_vec(&self.meta)?;
        let q = self.projection.matrix();
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(meta.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&meta).map_err(io)?;
        w.write_all(&(q.nrows() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(q.ncols() as u64).to_le_bytes()).map_err(io)?;
        for v in q.iter() {
            w.write_all(&v.to_bits().to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Model("not a model file (bad magic)".into()));
        }
        let mut word = [0u8; 4];
        read_exact(&mut r, &mut word)?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(Error::Model(format!("unsupported version {version}")));
        }
        let meta_len = read_u64(&mut r)? as usize;
        let mut meta = vec![0u8; meta_len];
        read_exact(&mut r, &mut meta)?;
        let meta: ModelMeta = serde_json::from_slice(&meta)?;

        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Model("matrix size overflows".into()))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_bits(read_u64(&mut r)?));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| Error::io("<model>", e))? != 0 {
            return Err(Error::Model("trailing bytes after projection".into()));
        }
        Ok(Model {
            meta,
            projection: Projection::new(Matrix::from_vec(rows, cols, data))?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Model("truncated file".into()),
        _ => Error::io("<model>", e),
    })
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
