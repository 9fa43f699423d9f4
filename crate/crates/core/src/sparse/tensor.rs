use crate::error::{Error, Result};

/// Row-major 4-d `f32` tensor: `(batch, chan, h, w)` for activations,
/// `(out, in, k, k)` for weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor4 {
    dims: [usize; 4],
    data: Vec<f32>,
}

impl DenseTensor4 {
    pub fn zeros(dims: [usize; 4]) -> Self {
        DenseTensor4 { dims, data: vec![0.0; dims.iter().product()] }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!("dims {dims:?} hold {n} values, got {}", data.len())));
        }
        Ok(DenseTensor4 { dims, data })
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut([usize; 4]) -> f32) -> Self {
        let mut t = DenseTensor4::zeros(dims);
        let mut i = 0;
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for c in 0..dims[2] {
                    for d in 0..dims[3] {
                        t.data[i] = f([a, b, c, d]);
                        i += 1;
                    }
                }
            }
        }
        t
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn offset(&self, i: [usize; 4]) -> usize {
        let d = self.dims;
        ((i[0] * d[1] + i[1]) * d[2] + i[2]) * d[3] + i[3]
    }

    pub fn get(&self, i: [usize; 4]) -> f32 {
        self.data[self.offset(i)]
    }

    pub fn set(&mut self, i: [usize; 4], v: f32) {
        let o = self.offset(i);
        self.data[o] = v;
    }

    /// Elements of one `[a][b]` plane.
    pub fn plane(&self, a: usize, b: usize) -> &[f32] {
        let n = self.dims[2] * self.dims[3];
        let o = (a * self.dims[1] + b) * n;
        &self.data[o..o + n]
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    /// Zero padding of `p` on every spatial border.
    pub fn padded(&self, p: usize) -> DenseTensor4 {
        let [b, c, h, w] = self.dims;
        let mut out = DenseTensor4::zeros([b, c, h + 2 * p, w + 2 * p]);
        for bi in 0..b {
            for ci in 0..c {
                for y in 0..h {
                    let src = self.offset([bi, ci, y, 0]);
                    let dst = out.offset([bi, ci, y + p, p]);
                    out.data[dst..dst + w].copy_from_slice(&self.data[src..src + w]);
                }
            }
        }
        out
    }

    /// `max|a-b| / max|b|` (absolute when `other` is all zero).
    pub fn rel_diff(&self, other: &DenseTensor4) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        let (mut diff, mut norm) = (0.0f64, 0.0f64);
        for (a, b) in self.data.iter().zip(&other.data) {
            diff = diff.max((*a as f64 - *b as f64).abs());
            norm = norm.max((*b as f64).abs());
        }
        Ok(if norm > 0.0 { diff / norm } else { diff })
    }
}

/// Convolution geometry. The input is already padded, stride is 1, and
/// `padding` only records how much of the input border is padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub batch: usize,
    pub in_features: usize,
    pub out_features: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub k: usize,
    pub padding: usize,
}

impl ConvShape {
    pub fn new(batch: usize, in_features: usize, out_features: usize, h_in: usize, w_in: usize, k: usize) -> Result<Self> {
        let s = ConvShape { batch, in_features, out_features, h_in, w_in, k, padding: 0 };
        s.validate()?;
        Ok(s)
    }

    /// Shape whose output is `h x w`, as for a "same" convolution of an
    /// unpadded `h x w` image.
    pub fn same(batch: usize, in_features: usize, out_features: usize, h: usize, w: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Shape("kernel size 0".into()));
        }
        let mut s = ConvShape::new(batch, in_features, out_features, h + k - 1, w + k - 1, k)?;
        s.padding = (k - 1) / 2;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.in_features == 0 || self.out_features == 0 || self.k == 0 {
            return Err(Error::Shape(format!("empty dimension in {self:?}")));
        }
        if self.h_in < self.k || self.w_in < self.k {
            return Err(Error::Shape(format!("input {}x{} smaller than kernel {}", self.h_in, self.w_in, self.k)));
        }
        Ok(())
    }

    pub fn h_out(&self) -> usize {
        self.h_in - self.k + 1
    }

    pub fn w_out(&self) -> usize {
        self.w_in - self.k + 1
    }

    pub fn input_dims(&self) -> [usize; 4] {
        [self.batch, self.in_features, self.h_in, self.w_in]
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.out_features, self.in_features, self.k, self.k]
    }

    pub fn output_dims(&self) -> [usize; 4] {
        [self.batch, self.out_features, self.h_out(), self.w_out()]
    }

    pub fn weight_len(&self) -> usize {
        self.weight_dims().iter().product()
    }

    pub(crate) fn check(&self, what: &str, t: &DenseTensor4, want: [usize; 4]) -> Result<()> {
        if t.dims() != want {
            return Err(Error::Shape(format!("{what} has dims {:?}, expected {want:?}", t.dims())));
        }
        Ok(())
    }
}
