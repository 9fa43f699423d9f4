use super::tensor::{ConvShape, DenseTensor4};
use crate::error::{Error, Result};

/// Compressed rows of a conv weight tensor flattened to
/// `(out, in*k*k)`. Column indices are pre-linearized input offsets
/// `fin*h_in*w_in + k0*w_in + k1`, so the kernel adds them directly to
/// the position of an output pixel in the padded input.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrWeights {
    pub out_features: usize,
    pub in_features: usize,
    pub k: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub rowptr: Vec<u32>,
    pub colidx: Vec<u32>,
    pub value: Vec<f32>,
}

impl CsrWeights {
    /// Validated constructor.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        out_features: usize,
        in_features: usize,
        k: usize,
        h_in: usize,
        w_in: usize,
        rowptr: Vec<u32>,
        colidx: Vec<u32>,
        value: Vec<f32>,
    ) -> Result<Self> {
        let w = CsrWeights { out_features, in_features, k, h_in, w_in, rowptr, colidx, value };
        w.validate()?;
        Ok(w)
    }

    /// No invariant checks; for negative tests and trusted loaders.
    #[allow(clippy::too_many_arguments)]
    pub fn new_unchecked(
        out_features: usize,
        in_features: usize,
        k: usize,
        h_in: usize,
        w_in: usize,
        rowptr: Vec<u32>,
        colidx: Vec<u32>,
        value: Vec<f32>,
    ) -> Self {
        CsrWeights { out_features, in_features, k, h_in, w_in, rowptr, colidx, value }
    }

    pub fn from_dense(w: &DenseTensor4, shape: &ConvShape, zero_eps: f32) -> Result<Self> {
        shape.validate()?;
        shape.check("weights", w, shape.weight_dims())?;
        if !(zero_eps >= 0.0) {
            return Err(Error::Csr(format!("zero_eps must be >= 0, got {zero_eps}")));
        }
        let plane = shape.h_in * shape.w_in;
        if shape.in_features * plane > u32::MAX as usize {
            return Err(Error::Csr("input too large for 32-bit offsets".into()));
        }
        let mut rowptr = vec![0u32];
        let (mut colidx, mut value) = (Vec::new(), Vec::new());
        for n in 0..shape.out_features {
            for c in 0..shape.in_features {
                for k0 in 0..shape.k {
                    for k1 in 0..shape.k {
                        let v = w.get([n, c, k0, k1]);
                        if v.abs() > zero_eps {
                            colidx.push((c * plane + k0 * shape.w_in + k1) as u32);
                            value.push(v);
                        }
                    }
                }
            }
            rowptr.push(colidx.len() as u32);
        }
        CsrWeights::new(shape.out_features, shape.in_features, shape.k, shape.h_in, shape.w_in, rowptr, colidx, value)
    }

    /// `(fin, k0, k1)` of a column offset.
    pub fn decode(&self, col: u32) -> (usize, usize, usize) {
        let col = col as usize;
        let plane = self.h_in * self.w_in;
        let rest = col % plane;
        (col / plane, rest / self.w_in, rest % self.w_in)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Csr(m));
        if self.rowptr.len() != self.out_features + 1 {
            return bad(format!("rowptr has {} entries for {} rows", self.rowptr.len(), self.out_features));
        }
        if self.rowptr[0] != 0 {
            return bad("rowptr[0] is not 0".into());
        }
        if let Some(i) = self.rowptr.windows(2).position(|w| w[0] > w[1]) {
            return bad(format!("rowptr decreases at row {i}"));
        }
        let nnz = *self.rowptr.last().expect("non-empty") as usize;
        if nnz != self.colidx.len() || nnz != self.value.len() {
            return bad(format!("rowptr ends at {nnz}, colidx {} values {}", self.colidx.len(), self.value.len()));
        }
        if self.h_in < self.k || self.w_in < self.k {
            return bad("input smaller than kernel".into());
        }
        for n in 0..self.out_features {
            let row = self.rowptr[n] as usize..self.rowptr[n + 1] as usize;
            if let Some(i) = self.colidx[row.clone()].windows(2).position(|w| w[0] >= w[1]) {
                return bad(format!("row {n}: colidx not strictly increasing at {}", row.start + i));
            }
            for j in row {
                let (c, k0, k1) = self.decode(self.colidx[j]);
                if c >= self.in_features || k0 >= self.k || k1 >= self.k {
                    return bad(format!("row {n}: colidx {} is outside the kernel window", self.colidx[j]));
                }
                if self.value[j] == 0.0 || !self.value[j].is_finite() {
                    return bad(format!("row {n}: stored value {} at {j}", self.value[j]));
                }
            }
        }
        Ok(())
    }

    pub fn nnz(&self) -> usize {
        self.value.len()
    }

    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.out_features * self.in_features * self.k * self.k) as f64
    }

    pub fn to_dense(&self) -> DenseTensor4 {
        let mut t = DenseTensor4::zeros([self.out_features, self.in_features, self.k, self.k]);
        for n in 0..self.out_features {
            for j in self.rowptr[n] as usize..self.rowptr[n + 1] as usize {
                let (c, k0, k1) = self.decode(self.colidx[j]);
                t.set([n, c, k0, k1], self.value[j]);
            }
        }
        t
    }

    pub(crate) fn check_shape(&self, shape: &ConvShape) -> Result<()> {
        let mine = (self.out_features, self.in_features, self.k, self.h_in, self.w_in);
        let theirs = (shape.out_features, shape.in_features, shape.k, shape.h_in, shape.w_in);
        if mine != theirs {
            return Err(Error::Shape(format!("CSR built for {mine:?}, conv shape is {theirs:?}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_weights() {
        let s = ConvShape::same(1, 2, 3, 4, 4, 3).unwrap();
        let c = CsrWeights::from_dense(&DenseTensor4::zeros(s.weight_dims()), &s, 0.0).unwrap();
        assert_eq!(c.rowptr, vec![0, 0, 0, 0]);
        assert!(c.colidx.is_empty() && c.value.is_empty());
        assert_eq!(c.density(), 0.0);
    }

    #[test]
    fn single_weight_offset() {
        let s = ConvShape::new(1, 1, 1, 7, 9, 3).unwrap();
        let mut w = DenseTensor4::zeros(s.weight_dims());
        w.set([0, 0, 1, 2], 5.0);
        let c = CsrWeights::from_dense(&w, &s, 0.0).unwrap();
        assert_eq!(c.rowptr, vec![0, 1]);
        assert_eq!(c.colidx, vec![9 + 2]);
        assert_eq!(c.value, vec![5.0]);
        assert_eq!(c.to_dense(), w);
    }

    #[test]
    fn threshold_drops_small_weights() {
        let s = ConvShape::new(1, 1, 1, 3, 3, 3).unwrap();
        let w = DenseTensor4::from_fn(s.weight_dims(), |i| 0.1 * (i[2] * 3 + i[3]) as f32);
        let c = CsrWeights::from_dense(&w, &s, 0.25).unwrap();
        assert_eq!(c.nnz(), 6);
        assert!(CsrWeights::from_dense(&w, &s, -1.0).is_err());
    }

    #[test]
    fn broken_invariants_are_reported() {
        let ok = || CsrWeights::new_unchecked(2, 1, 3, 3, 3, vec![0, 1, 2], vec![0, 1], vec![1.0, 2.0]);
        assert!(ok().validate().is_ok());
        let mut c = ok();
        c.rowptr = vec![0, 2, 1];
        assert!(c.validate().unwrap_err().to_string().contains("decreases"));
        let mut c = ok();
        c.value[0] = 0.0;
        assert!(c.validate().is_err());
        let mut c = ok();
        c.colidx[1] = 3 * 3;
        assert!(c.validate().is_err());
        let c = CsrWeights::new_unchecked(1, 1, 3, 3, 3, vec![0, 2], vec![4, 4], vec![1.0, 1.0]);
        assert!(c.validate().unwrap_err().to_string().contains("strictly"));
    }
}
