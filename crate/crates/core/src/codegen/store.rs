//! Dense row-major buffers backing program execution.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::schedule::{ElemKind, Program};

/// A scalar flowing through a computation body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Val {
    Int(i64),
    Float(f64),
}

impl Val {
    pub fn as_f64(self) -> f64 {
        match self {
            Val::Int(v) => v as f64,
            Val::Float(v) => v,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Val::Int(v) => v,
            Val::Float(v) => v as i64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    F32(Vec<f32>),
    F64(Vec<f64>),
    I32(Vec<i32>),
}

impl Data {
    fn zeros(kind: ElemKind, n: usize) -> Data {
        match kind {
            ElemKind::F32 => Data::F32(vec![0.0; n]),
            ElemKind::F64 => Data::F64(vec![0.0; n]),
            ElemKind::I32 => Data::I32(vec![0; n]),
        }
    }

    /// One-element buffer of the same element type.
    pub(crate) fn clone_empty_like(&self) -> Data {
        match self {
            Data::F32(_) => Data::F32(vec![0.0]),
            Data::F64(_) => Data::F64(vec![0.0]),
            Data::I32(_) => Data::I32(vec![0]),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Data::F32(v) => v.len(),
            Data::F64(v) => v.len(),
            Data::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Val {
        match self {
            Data::F32(v) => Val::Float(v[i] as f64),
            Data::F64(v) => Val::Float(v[i]),
            Data::I32(v) => Val::Int(v[i] as i64),
        }
    }

    pub fn set(&mut self, i: usize, x: Val) {
        match self {
            Data::F32(v) => v[i] = x.as_f64() as f32,
            Data::F64(v) => v[i] = x.as_f64(),
            Data::I32(v) => v[i] = x.as_i64() as i32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Buffer {
    pub kind: ElemKind,
    pub shape: Vec<usize>,
    pub data: Data,
}

impl Buffer {
    pub fn linear(&self, name: &str, idx: &[i64]) -> Result<usize> {
        if idx.len() != self.shape.len() {
            return Err(Error::Arity { expected: self.shape.len(), got: idx.len() });
        }
        let mut lin = 0usize;
        for (x, e) in idx.iter().zip(&self.shape) {
            if *x < 0 || *x as usize >= *e {
                return Err(Error::OutOfBounds { buffer: name.to_string(), index: idx.to_vec() });
            }
            lin = lin * e + *x as usize;
        }
        Ok(lin)
    }
}

/// Named buffers of a program, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BufferStore {
    bufs: BTreeMap<String, Buffer>,
}

impl BufferStore {
    /// Zero-filled buffers for every declaration of `prog`.
    pub fn for_program(prog: &Program) -> Result<Self> {
        let mut bufs = BTreeMap::new();
        for b in &prog.buffers {
            let shape = b.extents(&prog.params)?;
            let n = shape.iter().product();
            bufs.insert(b.name.clone(), Buffer { kind: b.kind, shape, data: Data::zeros(b.kind, n) });
        }
        Ok(BufferStore { bufs })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bufs.keys().map(|k| k.as_str())
    }

    pub fn get(&self, name: &str) -> Result<&Buffer> {
        self.bufs.get(name).ok_or_else(|| Error::Unknown { kind: "buffer", name: name.to_string() })
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Buffer> {
        self.bufs.get_mut(name).ok_or_else(|| Error::Unknown { kind: "buffer", name: name.to_string() })
    }

    pub fn load(&self, name: &str, idx: &[i64]) -> Result<Val> {
        let b = self.get(name)?;
        Ok(b.data.get(b.linear(name, idx)?))
    }

    pub fn store(&mut self, name: &str, idx: &[i64], v: Val) -> Result<()> {
        let b = self.get_mut(name)?;
        let i = b.linear(name, idx)?;
        b.data.set(i, v);
        Ok(())
    }

    /// Overwrite the contents of `name` from `f(linear index)`.
    pub fn fill(&mut self, name: &str, mut f: impl FnMut(usize) -> Val) -> Result<()> {
        let b = self.get_mut(name)?;
        for i in 0..b.data.len() {
            b.data.set(i, f(i));
        }
        Ok(())
    }

    /// Largest normwise relative difference over all buffers:
    /// `max|a-b| / max|b|` per buffer (absolute when `b` is all zero).
    pub fn max_rel_diff(&self, reference: &BufferStore) -> Result<f64> {
        let mut worst = 0.0f64;
        for (name, b) in &reference.bufs {
            let a = self.get(name)?;
            if a.data.len() != b.data.len() {
                return Err(Error::Shape(format!("buffer `{name}` differs in size")));
            }
            let (mut diff, mut norm) = (0.0f64, 0.0f64);
            for i in 0..b.data.len() {
                let (x, y) = (a.data.get(i).as_f64(), b.data.get(i).as_f64());
                diff = diff.max((x - y).abs());
                norm = norm.max(y.abs());
            }
            worst = worst.max(if norm > 0.0 { diff / norm } else { diff });
        }
        Ok(worst)
    }
}
