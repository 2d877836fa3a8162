//! Binary parameter archive.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"RMCKPT"
//! version  u32 (currently 1)
//! width    u32 (bytes per element: 4 or 8)
//! count    u32
//! count x { name_len u32, name utf-8, rank u32, dims u64 x rank, payload }
//! ```

use std::path::Path;

use crate::error::TensorError;
use crate::params::ParamStore;
use crate::tensor::{Scalar, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"RMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Ordered name -> tensor mapping.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<S> {
    entries: Vec<(String, Tensor<S>)>,
}

impl<S: Scalar> Default for Checkpoint<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Checkpoint<S> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Every parameter whose name starts with `prefix`.
    pub fn from_store(store: &ParamStore<S>, prefix: &str) -> Self {
        let entries = store
            .ids()
            .filter(|&id| store.name(id).starts_with(prefix))
            .map(|id| (store.name(id).to_string(), store.value(id).clone()))
            .collect();
        Self { entries }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<S>) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = tensor,
            None => self.entries.push((name, tensor)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries whose name starts with `prefix`.
    pub fn filter_prefix(&self, prefix: &str) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(n, _)| n.starts_with(prefix))
                .cloned()
                .collect(),
        }
    }

    /// Copies matching entries into `store`. Every entry must name an
    /// existing parameter of identical shape. Returns how many were loaded.
    pub fn load_into(&self, store: &mut ParamStore<S>) -> Result<usize, TensorError> {
        for (name, tensor) in &self.entries {
            let id = store
                .find(name)
                .ok_or_else(|| TensorError::Checkpoint(format!("unknown parameter {name:?}")))?;
            if store.value(id).shape() != tensor.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "checkpoint load",
                    lhs: store.value(id).shape().to_vec(),
                    rhs: tensor.shape().to_vec(),
                });
            }
        }
        for (name, tensor) in &self.entries {
            let id = store.find(name).expect("checked above");
            store.value_mut(id).data_mut().copy_from_slice(tensor.data());
        }
        Ok(self.entries.len())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(S::WIDTH as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, tensor) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
            for &d in tensor.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in tensor.data() {
                x.write_le(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TensorError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(TensorError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(TensorError::Checkpoint(format!(
                "unsupported format version {version}"
            )));
        }
        let width = r.u32()? as usize;
        if width != S::WIDTH {
            return Err(TensorError::Checkpoint(format!(
                "element width {width} does not match requested {}",
                S::WIDTH
            )));
        }
        let count = r.u32()?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|e| TensorError::Checkpoint(e.to_string()))?
                .to_string();
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let payload = r.take(n * width)?;
            let data = payload.chunks_exact(width).map(S::read_le).collect();
            entries.push((name, Tensor::new(shape, data)?));
        }
        if r.pos != bytes.len() {
            return Err(TensorError::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TensorError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TensorError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TensorError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| TensorError::Checkpoint("truncated archive".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, TensorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, TensorError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let mut c = Checkpoint::<f32>::new();
        c.insert("a", Tensor::from_f64([2], &[1.0, -2.0]).unwrap());
        let b = c.to_bytes();
        assert_eq!(&b[..6], b"RMCKPT");
        assert_eq!(u32::from_le_bytes(b[6..10].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[10..14].try_into().unwrap()), 4);
        // last payload element is -2.0f32 little-endian
        assert_eq!(&b[b.len() - 4..], &(-2.0f32).to_le_bytes());
    }

    #[test]
    fn rejects_truncation_and_width() {
        let mut c = Checkpoint::<f32>::new();
        c.insert("a", Tensor::zeros([3, 2]));
        let b = c.to_bytes();
        assert!(Checkpoint::<f32>::from_bytes(&b[..b.len() - 1]).is_err());
        assert!(Checkpoint::<f64>::from_bytes(&b).is_err());
        let mut bad = b.clone();
        bad[6] = 9;
        assert!(Checkpoint::<f32>::from_bytes(&bad).is_err());
    }

    #[test]
    fn load_checks_shapes() {
        let mut store = ParamStore::<f32>::new();
        store.add("w", Tensor::zeros([2, 2])).unwrap();
        let mut c = Checkpoint::new();
        c.insert("w", Tensor::zeros([4]));
        assert!(c.load_into(&mut store).is_err());
    }
}
