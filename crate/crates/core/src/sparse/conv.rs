//! Direct convolution kernels on pre-padded inputs, stride 1.
//!
//! Every kernel is built from one routine that accumulates a single output
//! row, so the fused pipeline adds the same terms in the same order as the
//! unfused one. Dense 3x3 kernels take all nine taps per pass over a row;
//! the sparse kernel makes one pass per stored weight.

use rayon::prelude::*;

use super::csr::CsrWeights;
use super::tensor::{ConvShape, DenseTensor4};
use crate::error::{Error, Result};

/// Weights accepted by the fused kernel.
#[derive(Clone, Copy, Debug)]
pub enum Weights<'a> {
    Dense(&'a DenseTensor4),
    Sparse(&'a CsrWeights),
}

impl Weights<'_> {
    fn check(&self, shape: &ConvShape) -> Result<()> {
        shape.validate()?;
        match self {
            Weights::Dense(w) => shape.check("weights", w, shape.weight_dims()),
            Weights::Sparse(w) => w.check_shape(shape),
        }
    }

    /// Accumulate output row `y` of channel `n` from one batch image.
    fn row(&self, img: &[f32], n: usize, y: usize, s: &ConvShape, out: &mut [f32]) {
        match self {
            Weights::Dense(w) => dense_row(img, w.data(), n, y, s, out),
            Weights::Sparse(w) => sparse_row(img, w, n, y, s, out),
        }
    }
}

fn dense_row(img: &[f32], w: &[f32], n: usize, y: usize, s: &ConvShape, out: &mut [f32]) {
    let (k, wo, plane) = (s.k, s.w_out(), s.h_in * s.w_in);
    let out = &mut out[..wo];
    for c in 0..s.in_features {
        let taps = &w[(n * s.in_features + c) * k * k..][..k * k];
        let rows = |k0: usize| &img[c * plane + (y + k0) * s.w_in..][..s.w_in];
        if k == 3 {
            // all nine taps in one pass over the output row
            let (r0, r1, r2) = (rows(0), rows(1), rows(2));
            let t: [f32; 9] = taps.try_into().expect("3x3");
            for (x, o) in out.iter_mut().enumerate() {
                let (a, b, d) = (&r0[x..x + 3], &r1[x..x + 3], &r2[x..x + 3]);
                *o += t[0] * a[0] + t[1] * a[1] + t[2] * a[2]
                    + t[3] * b[0] + t[4] * b[1] + t[5] * b[2]
                    + t[6] * d[0] + t[7] * d[1] + t[8] * d[2];
            }
        } else {
            for k0 in 0..k {
                let src = rows(k0);
                for (k1, &t) in taps[k0 * k..(k0 + 1) * k].iter().enumerate() {
                    for (o, i) in out.iter_mut().zip(&src[k1..]) {
                        *o += t * i;
                    }
                }
            }
        }
    }
}

fn sparse_row(img: &[f32], w: &CsrWeights, n: usize, y: usize, s: &ConvShape, out: &mut [f32]) {
    let wo = s.w_out();
    let row = y * s.w_in;
    for j in w.rowptr[n] as usize..w.rowptr[n + 1] as usize {
        let off = w.colidx[j] as usize;
        let coeff = w.value[j];
        let src = &img[row + off..row + off + wo];
        for (o, i) in out[..wo].iter_mut().zip(src) {
            *o += coeff * i;
        }
    }
}

fn conv_with(input: &DenseTensor4, w: Weights<'_>, s: &ConvShape) -> Result<DenseTensor4> {
    w.check(s)?;
    s.check("input", input, s.input_dims())?;
    let mut out = DenseTensor4::zeros(s.output_dims());
    let (ho, wo) = (s.h_out(), s.w_out());
    let img_len = s.in_features * s.h_in * s.w_in;
    out.data_mut().par_chunks_mut(ho * wo).enumerate().for_each(|(bn, plane)| {
        let (b, n) = (bn / s.out_features, bn % s.out_features);
        let img = &input.data()[b * img_len..][..img_len];
        for (y, row) in plane.chunks_mut(wo).enumerate() {
            w.row(img, n, y, s, row);
        }
    });
    Ok(out)
}

pub fn dense_conv(input: &DenseTensor4, w: &DenseTensor4, shape: &ConvShape) -> Result<DenseTensor4> {
    conv_with(input, Weights::Dense(w), shape)
}

/// Direct sparse convolution: for each nonzero `j` of row `n`,
/// `out[n][y][x] += value[j] * in[y*w_in + x + colidx[j]]`.
pub fn sparse_conv(input: &DenseTensor4, w: &CsrWeights, shape: &ConvShape) -> Result<DenseTensor4> {
    conv_with(input, Weights::Sparse(w), shape)
}

pub fn relu(t: &DenseTensor4) -> DenseTensor4 {
    let mut out = t.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

pub fn maxpool2x2(t: &DenseTensor4) -> Result<DenseTensor4> {
    let [b, c, h, w] = t.dims();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("maxpool needs even spatial dims, got {h}x{w}")));
    }
    Ok(DenseTensor4::from_fn([b, c, h / 2, w / 2], |[bi, ci, y, x]| {
        let at = |dy, dx| t.get([bi, ci, 2 * y + dy, 2 * x + dx]);
        at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1))
    }))
}

/// `maxpool2x2(relu(conv(input, w)))` computed two conv rows at a time,
/// without materializing the convolution output.
pub fn fused_conv_relu_maxpool(input: &DenseTensor4, w: Weights<'_>, s: &ConvShape) -> Result<DenseTensor4> {
    w.check(s)?;
    s.check("input", input, s.input_dims())?;
    let (ho, wo) = (s.h_out(), s.w_out());
    if ho % 2 != 0 || wo % 2 != 0 {
        return Err(Error::Shape(format!("maxpool needs even spatial dims, got {ho}x{wo}")));
    }
    let (ph, pw) = (ho / 2, wo / 2);
    let img_len = s.in_features * s.h_in * s.w_in;
    let mut out = DenseTensor4::zeros([s.batch, s.out_features, ph, pw]);
    out.data_mut().par_chunks_mut(ph * pw).enumerate().for_each(|(bn, plane)| {
        let (b, n) = (bn / s.out_features, bn % s.out_features);
        let img = &input.data()[b * img_len..][..img_len];
        let mut rows = vec![0.0f32; 2 * wo];
        for (py, prow) in plane.chunks_mut(pw).enumerate() {
            rows.iter_mut().for_each(|v| *v = 0.0);
            let (r0, r1) = rows.split_at_mut(wo);
            w.row(img, n, 2 * py, s, r0);
            w.row(img, n, 2 * py + 1, s, r1);
            for (px, o) in prow.iter_mut().enumerate() {
                let m = r0[2 * px].max(r0[2 * px + 1]).max(r1[2 * px]).max(r1[2 * px + 1]);
                *o = m.max(0.0);
            }
        }
    });
    Ok(out)
}

/// The same pipeline as three separate passes.
pub fn unfused_conv_relu_maxpool(input: &DenseTensor4, w: Weights<'_>, s: &ConvShape) -> Result<DenseTensor4> {
    let conv = conv_with(input, w, s)?;
    maxpool2x2(&relu(&conv))
}
