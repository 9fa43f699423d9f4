use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::CsrWeights;

/// A gate weight matrix, dense row-major or compressed. Compressed
/// matrices are stored as 1x1-kernel conv weights, so column `c` has
/// offset `c` and the usual row invariants apply.
#[derive(Clone, Debug, PartialEq)]
pub enum Matrix {
    Dense { rows: usize, cols: usize, data: Vec<f64> },
    Sparse(CsrWeights),
}

impl Matrix {
    pub fn rows(&self) -> usize {
        match self {
            Matrix::Dense { rows, .. } => *rows,
            Matrix::Sparse(c) => c.out_features,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Dense { cols, .. } => *cols,
            Matrix::Sparse(c) => c.in_features,
        }
    }

    /// Compress a dense matrix, dropping exact zeros.
    pub fn to_sparse(&self) -> Result<Matrix> {
        match self {
            Matrix::Sparse(_) => Ok(self.clone()),
            Matrix::Dense { rows, cols, data } => {
                let mut rowptr = vec![0u32];
                let (mut colidx, mut value) = (Vec::new(), Vec::new());
                for r in 0..*rows {
                    for c in 0..*cols {
                        let v = data[r * cols + c];
                        if v != 0.0 {
                            colidx.push(c as u32);
                            value.push(v as f32);
                        }
                    }
                    rowptr.push(colidx.len() as u32);
                }
                Ok(Matrix::Sparse(CsrWeights::new(*rows, *cols, 1, 1, 1, rowptr, colidx, value)?))
            }
        }
    }

    /// `acc += self * x`
    pub fn mul_acc(&self, x: &[f64], acc: &mut [f64]) {
        match self {
            Matrix::Dense { cols, data, .. } => {
                for (r, a) in acc.iter_mut().enumerate() {
                    let row = &data[r * cols..][..*cols];
                    *a += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                }
            }
            Matrix::Sparse(c) => {
                for (r, a) in acc.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for j in c.rowptr[r] as usize..c.rowptr[r + 1] as usize {
                        s += c.value[j] as f64 * x[c.colidx[j] as usize];
                    }
                    *a += s;
                }
            }
        }
    }

    fn random(rows: usize, cols: usize, density: Option<f64>, rng: &mut impl Rng) -> Result<Matrix> {
        let scale = 1.0 / (cols.max(1) as f64).sqrt();
        let mut data = vec![0.0; rows * cols];
        match density {
            None => data.iter_mut().for_each(|v| *v = rng.gen_range(-scale..scale)),
            Some(d) => {
                if !(d > 0.0 && d <= 1.0) {
                    return Err(Error::Invalid(format!("density {d} outside (0, 1]")));
                }
                let nnz = (d * data.len() as f64).floor() as usize;
                for i in sample(rng, data.len(), nnz) {
                    // f32-representable and non-zero, so compression is lossless
                    let mut v = 0.0f32;
                    while v == 0.0 {
                        v = rng.gen_range(-scale..scale) as f32;
                    }
                    data[i] = v as f64;
                }
            }
        }
        let m = Matrix::Dense { rows, cols, data };
        if density.is_some() {
            m.to_sparse()
        } else {
            Ok(m)
        }
    }
}

/// Gate order used throughout: input, forget, cell candidate, output.
pub const GATES: [&str; 4] = ["i", "f", "g", "o"];

#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub input_dim: usize,
    pub hidden: usize,
    /// Input-to-gate matrices, `hidden x input_dim`.
    pub w: [Matrix; 4],
    /// Hidden-to-gate matrices, `hidden x hidden`.
    pub u: [Matrix; 4],
    pub b: [Vec<f64>; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: Vec<LstmLayer>,
}

impl LstmParams {
    /// Random weights, uniform in `±1/sqrt(fan_in)`. With `density`, every
    /// gate matrix keeps exactly that fraction of entries and is stored
    /// compressed.
    pub fn random(layers: usize, input_dim: usize, hidden: usize, density: Option<f64>, seed: u64) -> Result<Self> {
        if layers == 0 || input_dim == 0 || hidden == 0 {
            return Err(Error::Shape(format!("LSTM sizes L={layers} D={input_dim} H={hidden}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..layers)
            .map(|l| {
                let din = if l == 0 { input_dim } else { hidden };
                let mut mats = |cols| -> Result<[Matrix; 4]> {
                    Ok([
                        Matrix::random(hidden, cols, density, &mut rng)?,
                        Matrix::random(hidden, cols, density, &mut rng)?,
                        Matrix::random(hidden, cols, density, &mut rng)?,
                        Matrix::random(hidden, cols, density, &mut rng)?,
                    ])
                };
                let w = mats(din)?;
                let u = mats(hidden)?;
                let b = std::array::from_fn(|_| (0..hidden).map(|_| rng.gen_range(-0.1..0.1)).collect());
                Ok(LstmLayer { input_dim: din, hidden, w, u, b })
            })
            .collect::<Result<_>>()?;
        Ok(LstmParams { input_dim, hidden, layers })
    }

    pub fn validate(&self) -> Result<()> {
        for (l, layer) in self.layers.iter().enumerate() {
            let din = if l == 0 { self.input_dim } else { self.hidden };
            let ok = layer.input_dim == din
                && layer.hidden == self.hidden
                && layer.w.iter().all(|m| m.rows() == self.hidden && m.cols() == din)
                && layer.u.iter().all(|m| m.rows() == self.hidden && m.cols() == self.hidden)
                && layer.b.iter().all(|b| b.len() == self.hidden);
            if !ok {
                return Err(Error::Shape(format!("layer {l} does not match D={din} H={}", self.hidden)));
            }
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One step: `i,f,o = σ(W x + U h + b)`, `g = tanh(...)`,
/// `c = f*c_prev + i*g`, `h = o*tanh(c)`.
pub fn lstm_cell(layer: &LstmLayer, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = layer.hidden;
    if x.len() != layer.input_dim || h_prev.len() != h || c_prev.len() != h {
        return Err(Error::Shape(format!(
            "cell expects x={}, h=c={h}; got {}, {}, {}",
            layer.input_dim,
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut pre: [Vec<f64>; 4] = layer.b.clone();
    for g in 0..4 {
        layer.w[g].mul_acc(x, &mut pre[g]);
        layer.u[g].mul_acc(h_prev, &mut pre[g]);
    }
    let mut hn = vec![0.0; h];
    let mut cn = vec![0.0; h];
    for k in 0..h {
        let (i, f, g, o) = (sigmoid(pre[0][k]), sigmoid(pre[1][k]), pre[2][k].tanh(), sigmoid(pre[3][k]));
        cn[k] = f * c_prev[k] + i * g;
        hn[k] = o * cn[k].tanh();
    }
    Ok((hn, cn))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_layer(d: usize, h: usize) -> LstmLayer {
        let z = |r, c| Matrix::Dense { rows: r, cols: c, data: vec![0.0; r * c] };
        LstmLayer {
            input_dim: d,
            hidden: h,
            w: std::array::from_fn(|_| z(h, d)),
            u: std::array::from_fn(|_| z(h, h)),
            b: std::array::from_fn(|_| vec![0.0; h]),
        }
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let (h, c) = lstm_cell(&zero_layer(3, 2), &[1.0, 2.0, 3.0], &[0.0; 2], &[0.0; 2]).unwrap();
        assert_eq!((h, c), (vec![0.0; 2], vec![0.0; 2]));
    }

    #[test]
    fn saturated_gates_keep_cell_state() {
        let mut l = zero_layer(1, 2);
        l.b[0] = vec![-60.0; 2];
        l.b[1] = vec![60.0; 2];
        let (_, c) = lstm_cell(&l, &[0.5], &[0.3, -0.2], &[1.25, -4.0]).unwrap();
        assert!((c[0] - 1.25).abs() < 1e-12 && (c[1] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn matches_scalar_loop_oracle() {
        let p = LstmParams::random(1, 3, 2, None, 7).unwrap();
        let l = &p.layers[0];
        let (x, hp, cp) = ([0.3, -0.7, 0.2], [0.1, -0.4], [0.5, 0.25]);
        let dense = |m: &Matrix, r: usize, c: usize| match m {
            Matrix::Dense { cols, data, .. } => data[r * cols + c],
            Matrix::Sparse(_) => unreachable!(),
        };
        let (h, c) = lstm_cell(l, &x, &hp, &cp).unwrap();
        for k in 0..2 {
            let mut z = [0.0f64; 4];
            for g in 0..4 {
                z[g] = l.b[g][k];
                for j in 0..3 {
                    z[g] += dense(&l.w[g], k, j) * x[j];
                }
                for j in 0..2 {
                    z[g] += dense(&l.u[g], k, j) * hp[j];
                }
            }
            let s = |v: f64| 1.0 / (1.0 + (-v).exp());
            let cc = s(z[1]) * cp[k] + s(z[0]) * z[2].tanh();
            assert!((c[k] - cc).abs() < 1e-12);
            assert!((h[k] - s(z[3]) * cc.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_gates_match_dense() {
        let p = LstmParams::random(1, 20, 20, Some(0.15), 3).unwrap();
        let l = &p.layers[0];
        for m in l.w.iter().chain(&l.u) {
            let Matrix::Sparse(c) = m else { panic!("expected compressed gates") };
            c.validate().unwrap();
            assert_eq!(c.nnz(), 60);
        }
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut a = vec![0.0; 20];
        let mut b = vec![0.0; 20];
        l.w[0].mul_acc(&x, &mut a);
        let Matrix::Sparse(c) = &l.w[0] else { unreachable!() };
        let dense = c.to_dense();
        for r in 0..20 {
            for k in 0..20 {
                b[r] += dense.get([r, k, 0, 0]) as f64 * x[k];
            }
        }
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn shape_errors() {
        assert!(lstm_cell(&zero_layer(2, 2), &[1.0], &[0.0; 2], &[0.0; 2]).is_err());
        assert!(LstmParams::random(0, 1, 1, None, 0).is_err());
    }
}
