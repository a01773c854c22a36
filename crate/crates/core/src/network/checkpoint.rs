//! Versioned little-endian tensor container.
//!
//! ```text
//! "VRCK" | u32 version | u64 spec fingerprint | u32 tensor count
//! per tensor: u32 name length | name (UTF-8) | u8 dtype | u8 rank
//!             | u32 extent * rank | payload (little-endian)
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{AnyTensor, DType, Scalar, Tensor};
use crate::util::write_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VRCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_RANK: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub fingerprint: u64,
    entries: Vec<(String, AnyTensor)>,
}

impl Checkpoint {
    pub fn new(fingerprint: u64) -> Self {
        Checkpoint {
            fingerprint,
            entries: Vec::new(),
        }
    }

    /// Add or replace a named tensor. Order of first insertion is kept.
    pub fn insert(&mut self, name: impl Into<String>, tensor: impl Into<AnyTensor>) {
        let name = name.into();
        let tensor = tensor.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = tensor,
            None => self.entries.push((name, tensor)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&AnyTensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Named tensor of element type `T`; missing entries are format errors.
    pub fn tensor<T: Scalar>(&self, name: &str) -> Result<&Tensor<T>> {
        self.get(name)
            .ok_or_else(|| Error::Format {
                offset: 0,
                msg: format!("checkpoint has no tensor named {name:?}"),
            })?
            .typed()
    }

    pub fn entries(&self) -> &[(String, AnyTensor)] {
        &self.entries
    }

    pub fn names_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .map(|(n, _)| n.as_str())
            .filter(move |n| n.starts_with(prefix))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.fingerprint.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, tensor) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(tensor.dtype().code());
            out.push(tensor.shape().len() as u8);
            for &e in tensor.shape() {
                out.extend_from_slice(&(e as u32).to_le_bytes());
            }
            match tensor {
                AnyTensor::F32(t) => t.data().iter().for_each(|v| v.write_le(&mut out)),
                AnyTensor::F64(t) => t.data().iter().for_each(|v| v.write_le(&mut out)),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(r.error_at(0, "not a checkpoint (bad magic)"));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(r.error_at(4, format!("unsupported checkpoint version {version}")));
        }
        let fingerprint = r.u64("fingerprint")?;
        let count = r.u32("tensor count")? as usize;
        let mut ckpt = Checkpoint::new(fingerprint);
        for i in 0..count {
            let name_len = r.u32("name length")? as usize;
            let name_at = r.pos;
            let name = std::str::from_utf8(r.take(name_len, "name")?)
                .map_err(|_| r.error_at(name_at, format!("tensor {i} name is not UTF-8")))?
                .to_owned();
            let dtype_at = r.pos;
            let code = r.u8("dtype")?;
            let dtype = DType::from_code(code)
                .ok_or_else(|| r.error_at(dtype_at, format!("unknown dtype code {code} for {name:?}")))?;
            let rank_at = r.pos;
            let rank = r.u8("rank")? as usize;
            if rank == 0 || rank > MAX_RANK {
                return Err(r.error_at(rank_at, format!("rank {rank} for {name:?} outside 1..={MAX_RANK}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32("extent")? as usize);
            }
            let payload_at = r.pos;
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &e| acc.checked_mul(e))
                .and_then(|n| n.checked_mul(dtype.size()))
                .ok_or_else(|| r.error_at(payload_at, format!("extents of {name:?} overflow")))?;
            let payload = r.take(len, "payload")?;
            let bad_shape = |e: Error| r.error_at(payload_at, format!("tensor {name:?}: {e}"));
            let tensor = match dtype {
                DType::F32 => AnyTensor::F32(decode(&shape, payload).map_err(bad_shape)?),
                DType::F64 => AnyTensor::F64(decode(&shape, payload).map_err(bad_shape)?),
            };
            if ckpt.get(&name).is_some() {
                return Err(r.error_at(name_at, format!("duplicate tensor name {name:?}")));
            }
            ckpt.entries.push((name, tensor));
        }
        if r.pos != bytes.len() {
            return Err(r.error_at(r.pos, format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(ckpt)
    }

    /// Atomic write (temp file + rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn decode<T: Scalar>(shape: &[usize], payload: &[u8]) -> Result<Tensor<T>> {
    let size = T::DTYPE.size();
    Tensor::from_vec(shape, payload.chunks_exact(size).map(T::read_le).collect())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error_at(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::Format {
            offset: offset as u64,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.error_at(
                self.pos,
                format!("truncated: {what} needs {n} bytes, {} left", self.bytes.len() - self.pos),
            )),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}
