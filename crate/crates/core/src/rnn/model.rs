use crate::error::Result;
use crate::schedule::{Access, BinOp, Computation, ElemKind, Program, Value};
use crate::set::{Expr, IntegerSet, Params};

/// Skew time by layer, make the diagonal `t + l` outermost and run the
/// layers of one diagonal in parallel.
pub const WAVEFRONT_SCRIPT: &str = "skew t l 1; interchange l t+l; parallelize l";

/// Data flow of the LSTM grid as one computation over `0 <= l < L`,
/// `0 <= t < T`. Cell `(l, t)` writes `h[l+1][t+1]` from its left
/// neighbour `h[l+1][t]` and the layer below `h[l][t+1]`; row 0 and
/// column 0 hold the inputs and initial states. The integer body makes
/// any reordering of dependent cells visible in the result.
pub fn lstm_dependence_model(layers: usize, steps: usize) -> Result<Program> {
    let params = Params::new().with("L", layers as i64).with("T", steps as i64);
    let mut p = Program::new(params);
    p.add_buffer("h", ElemKind::I32, &["L + 1", "T + 1"])?;
    let dom = IntegerSet::parse("[L, T] -> {cell(l, t): 0 <= l < L and 0 <= t < T}")?;
    let (l, t) = (Expr::var("l"), Expr::var("t"));
    let left = Value::load("h", vec![l.clone() + 1, t.clone()]);
    let below = Value::load("h", vec![l.clone(), t.clone() + 1]);
    let body = Value::bin(
        BinOp::Add,
        Value::bin(BinOp::Mul, left, Value::Int(3)),
        Value::bin(BinOp::Add, Value::bin(BinOp::Mul, below, Value::Int(5)), Value::Int(1)),
    );
    p.add(Computation::new(dom, Access::affine("h", vec![l + 1, t + 1]), body))?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deps::{check_legality, check_parallel, compute_dependences, DepKind, ParallelVerdict, Verdict};
    use crate::schedule::Selection;

    #[test]
    fn two_flow_families() {
        let p = lstm_dependence_model(3, 4).unwrap();
        let g = compute_dependences(&p).unwrap();
        assert_eq!(g.len(), 2 * 3 * 4 - 3 - 4);
        for e in &g.edges {
            assert_eq!(e.kind, DepKind::Flow);
            let (s, k) = (&e.source.iter, &e.sink.iter);
            let right = s[0] == k[0] && s[1] + 1 == k[1];
            let up = s[1] == k[1] && s[0] + 1 == k[0];
            assert!(right ^ up, "{e}");
        }
    }

    #[test]
    fn wavefront_is_legal_and_parallel() {
        let p = lstm_dependence_model(3, 4).unwrap();
        let g = compute_dependences(&p).unwrap();
        let w = p.run_script(WAVEFRONT_SCRIPT).unwrap();
        assert_eq!(w.dump_schedules().trim(), "cell: (t + l, l@cpu, 0)");
        assert_eq!(check_legality(&w, &g).unwrap(), Verdict::Legal);
        assert_eq!(check_parallel(&w, &g, &Selection::all(), "l").unwrap(), ParallelVerdict::Parallel);
        let flat = p.run_script("parallelize t").unwrap();
        let ParallelVerdict::Carried(e) = check_parallel(&flat, &g, &Selection::all(), "t").unwrap() else {
            panic!("time loop must carry a dependence")
        };
        assert_eq!(e.to_string(), "flow cell(0,0) -> cell(0,1) via h[1][1]");
    }
}
