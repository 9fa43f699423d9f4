//! Binary tensor and CSR files. All integers and floats are little-endian.
//!
//! Tensor: `b"PLTN"`, `u32` version (1), `u32` element kind (0 = f32),
//! `u32` rank (4), rank `u64` dims, then the values in row-major order.
//!
//! CSR: `b"PLCS"`, `u32` version (1), `u64` out_features, in_features, k,
//! h_in, w_in, nnz, then `u32` rowptr (out_features + 1 entries), `u32`
//! colidx (nnz), `f32` value (nnz). Loading validates every invariant.

use std::io::{Read, Write};

use super::csr::CsrWeights;
use super::tensor::DenseTensor4;
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"PLTN";
pub const CSR_MAGIC: &[u8; 4] = b"PLCS";
pub const FORMAT_VERSION: u32 = 1;

/// Largest element count accepted when reading, to reject corrupt headers
/// before allocating.
const MAX_ELEMS: u64 = 1 << 32;

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated file: {e}")))?;
    Ok(b)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact(r)?))
}

fn header(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let m: [u8; 4] = read_exact(r)?;
    if &m != magic {
        return Err(Error::Format(format!("bad magic {m:?}, expected {magic:?}")));
    }
    let v = read_u32(r)?;
    if v != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {v}")));
    }
    Ok(())
}

fn count(v: u64, what: &str) -> Result<usize> {
    if v > MAX_ELEMS {
        return Err(Error::Format(format!("{what} {v} is implausibly large")));
    }
    Ok(v as usize)
}

pub fn write_tensor(w: &mut impl Write, t: &DenseTensor4) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&4u32.to_le_bytes())?;
    for d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor(r: &mut impl Read) -> Result<DenseTensor4> {
    header(r, TENSOR_MAGIC)?;
    let kind = read_u32(r)?;
    if kind != 0 {
        return Err(Error::Format(format!("unsupported element kind {kind}")));
    }
    let rank = read_u32(r)?;
    if rank != 4 {
        return Err(Error::Format(format!("expected rank 4, got {rank}")));
    }
    let mut dims = [0usize; 4];
    let mut total = 1u64;
    for d in &mut dims {
        let v = read_u64(r)?;
        total = total.saturating_mul(v);
        *d = count(v, "dimension")?;
    }
    let n = count(total, "element count")?;
    let data = (0..n).map(|_| Ok(f32::from_le_bytes(read_exact(r)?))).collect::<Result<Vec<_>>>()?;
    DenseTensor4::from_vec(dims, data)
}

pub fn write_csr(w: &mut impl Write, c: &CsrWeights) -> Result<()> {
    w.write_all(CSR_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for v in [c.out_features, c.in_features, c.k, c.h_in, c.w_in, c.nnz()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for v in c.rowptr.iter().chain(&c.colidx) {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in &c.value {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_csr(r: &mut impl Read) -> Result<CsrWeights> {
    header(r, CSR_MAGIC)?;
    let mut h = [0usize; 6];
    for (v, name) in h.iter_mut().zip(["out_features", "in_features", "k", "h_in", "w_in", "nnz"]) {
        *v = count(read_u64(r)?, name)?;
    }
    let [out, inf, k, h_in, w_in, nnz] = h;
    let u32s = |r: &mut _, n| (0..n).map(|_| read_u32(r)).collect::<Result<Vec<_>>>();
    let rowptr = u32s(r, out + 1)?;
    let colidx = u32s(r, nnz)?;
    let value = (0..nnz).map(|_| Ok(f32::from_le_bytes(read_exact(r)?))).collect::<Result<Vec<_>>>()?;
    CsrWeights::new(out, inf, k, h_in, w_in, rowptr, colidx, value)
}
