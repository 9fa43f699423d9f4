//! The conv kernels written as scheduling-IR programs, so they can be
//! lowered and executed by the loop generator and checked against the
//! native kernels.

use super::csr::CsrWeights;
use super::tensor::{ConvShape, DenseTensor4};
use crate::codegen::{BufferStore, Val};
use crate::error::Result;
use crate::schedule::{Access, BinOp, BoundRole, Computation, ElemKind, Index, OpaqueBound, Program, Value};
use crate::set::{Expr, IntegerSet, Params};

fn v(name: &str) -> Expr {
    Expr::var(name)
}

/// `out[b][n][y][x] += W[n][c][k0][k1] * inp[b][c][y+k0][x+k1]`.
pub fn conv_program(s: &ConvShape) -> Result<Program> {
    let params = Params::new()
        .with("B", s.batch as i64)
        .with("FOUT", s.out_features as i64)
        .with("FIN", s.in_features as i64)
        .with("HO", s.h_out() as i64)
        .with("WO", s.w_out() as i64)
        .with("HI", s.h_in as i64)
        .with("WI", s.w_in as i64)
        .with("K", s.k as i64);
    let mut p = Program::new(params);
    p.add_buffer("inp", ElemKind::F32, &["B", "FIN", "HI", "WI"])?;
    p.add_buffer("W", ElemKind::F32, &["FOUT", "FIN", "K", "K"])?;
    p.add_buffer("out", ElemKind::F32, &["B", "FOUT", "HO", "WO"])?;
    let dom = IntegerSet::parse(
        "[B, FOUT, FIN, HO, WO, K] -> {conv(b, n, c, y, x, k0, k1): 0 <= b < B and 0 <= n < FOUT and \
         0 <= c < FIN and 0 <= y < HO and 0 <= x < WO and 0 <= k0 < K and 0 <= k1 < K}",
    )?;
    let body = Value::bin(
        BinOp::Mul,
        Value::load("W", vec![v("n"), v("c"), v("k0"), v("k1")]),
        Value::load("inp", vec![v("b"), v("c"), v("y") + v("k0"), v("x") + v("k1")]),
    );
    let write = Access::affine("out", vec![v("b"), v("n"), v("y"), v("x")]);
    p.add(Computation::new(dom, write, body).accumulate())?;
    Ok(p)
}

/// Direct sparse conv with run-time row bounds:
/// `for j in rowptr[n]..rowptr[n+1]: out[b][n][y][x] += value[j] * inp[b][y*WI + x + colidx[j]]`.
pub fn sparse_conv_program(s: &ConvShape, nnz: usize) -> Result<Program> {
    let params = Params::new()
        .with("B", s.batch as i64)
        .with("FOUT", s.out_features as i64)
        .with("HO", s.h_out() as i64)
        .with("WO", s.w_out() as i64)
        .with("WI", s.w_in as i64)
        .with("FLAT", (s.in_features * s.h_in * s.w_in) as i64)
        .with("NNZ", nnz.max(1) as i64);
    let mut p = Program::new(params);
    p.add_buffer("inp", ElemKind::F32, &["B", "FLAT"])?;
    p.add_buffer("rowptr", ElemKind::I32, &["FOUT + 1"])?;
    p.add_buffer("colidx", ElemKind::I32, &["NNZ"])?;
    p.add_buffer("value", ElemKind::F32, &["NNZ"])?;
    p.add_buffer("out", ElemKind::F32, &["B", "FOUT", "HO", "WO"])?;
    let dom = IntegerSet::parse(
        "[B, FOUT, HO, WO, jlo, jhi] -> {sconv(b, n, j, y, x): 0 <= b < B and 0 <= n < FOUT and \
         jlo <= j < jhi and 0 <= y < HO and 0 <= x < WO}",
    )?;
    let gather = Access {
        buffer: "inp".into(),
        index: vec![
            Index::Affine(v("b")),
            Index::Indirect { offset: v("y").scaled(s.w_in as i64) + v("x"), table: "colidx".into(), at: vec![v("j")] },
        ],
    };
    let body = Value::bin(BinOp::Mul, Value::load("value", vec![v("j")]), Value::Load(gather));
    let write = Access::affine("out", vec![v("b"), v("n"), v("y"), v("x")]);
    let comp = Computation::new(dom, write, body)
        .accumulate()
        .with_opaque(OpaqueBound { symbol: "jlo".into(), role: BoundRole::Lower, buffer: "rowptr".into(), index: vec![v("n")] })
        .with_opaque(OpaqueBound { symbol: "jhi".into(), role: BoundRole::Upper, buffer: "rowptr".into(), index: vec![v("n") + 1] });
    p.add(comp)?;
    Ok(p)
}

fn floats(t: &[f32]) -> impl Fn(usize) -> Val + '_ {
    move |i| Val::Float(t[i] as f64)
}

/// Buffers for [`conv_program`] holding `input` and `w`.
pub fn conv_store(p: &Program, input: &DenseTensor4, w: &DenseTensor4) -> Result<BufferStore> {
    let mut st = BufferStore::for_program(p)?;
    st.fill("inp", floats(input.data()))?;
    st.fill("W", floats(w.data()))?;
    Ok(st)
}

/// Buffers for [`sparse_conv_program`] holding `input` and `w`.
pub fn sparse_store(p: &Program, input: &DenseTensor4, w: &CsrWeights) -> Result<BufferStore> {
    let mut st = BufferStore::for_program(p)?;
    st.fill("inp", floats(input.data()))?;
    st.fill("rowptr", |i| Val::Int(w.rowptr[i] as i64))?;
    st.fill("colidx", |i| Val::Int(w.colidx.get(i).copied().unwrap_or(0) as i64))?;
    st.fill("value", |i| Val::Float(w.value.get(i).copied().unwrap_or(0.0) as f64))?;
    Ok(st)
}

/// The `out` buffer as a tensor.
pub fn output_of(st: &BufferStore, s: &ConvShape) -> Result<DenseTensor4> {
    let b = st.get("out")?;
    DenseTensor4::from_vec(s.output_dims(), (0..b.data.len()).map(|i| b.data.get(i).as_f64() as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::{execute, lower, ExecOptions};
    use crate::sparse::{dense_conv, random_input, random_weights, sparse_conv};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_program_matches_kernel() {
        let s = ConvShape::same(2, 2, 3, 4, 5, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (input, w) = (random_input(&s, &mut rng), random_weights(&s, 0.7, &mut rng).unwrap());
        let p = conv_program(&s).unwrap().run_script("parallelize b").unwrap();
        let mut st = conv_store(&p, &input, &w).unwrap();
        let opts = ExecOptions { workers: 2, shuffle_seed: Some(3), strict_numerics: true };
        execute(&p, &lower(&p).unwrap(), &mut st, &opts).unwrap();
        let want = dense_conv(&input, &w, &s).unwrap();
        assert!(output_of(&st, &s).unwrap().rel_diff(&want).unwrap() < 1e-5);
    }

    #[test]
    fn sparse_program_loads_row_bounds() {
        let s = ConvShape::same(1, 3, 4, 5, 4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (input, w) = (random_input(&s, &mut rng), random_weights(&s, 0.2, &mut rng).unwrap());
        let csr = CsrWeights::from_dense(&w, &s, 0.0).unwrap();
        let p = sparse_conv_program(&s, csr.nnz()).unwrap();
        let ast = lower(&p).unwrap();
        assert!(ast.warnings.is_empty());
        let src = ast.emit_source(&p);
        assert!(src.contains("jlo = rowptr[n];") && src.contains("jhi = rowptr[n + 1];"), "{src}");
        assert!(src.contains("for (j in jlo..jhi)"), "{src}");
        let mut st = sparse_store(&p, &input, &csr).unwrap();
        execute(&p, &ast, &mut st, &ExecOptions::sequential()).unwrap();
        let want = sparse_conv(&input, &csr, &s).unwrap();
        assert!(output_of(&st, &s).unwrap().rel_diff(&want).unwrap() < 1e-5);
    }
}
