//! The two-statement loop nest `for i in 0..N, for j in 0..M { S1; S2 }`
//! and the command sequences producing its classic schedule variants.

use super::{Access, BinOp, Computation, ElemKind, Program, Value};
use crate::error::Result;
use crate::set::{Expr, IntegerSet, Params};

/// Parameter values used when the nest is executed.
pub const NEST_PARAMS: [(&str, i64); 3] = [("N", 4), ("M", 8), ("P", 2)];

/// `S1: A[i][j] = A[i][j] + B[i][j]`, `S2: C[i][j] = A[i][j] * 2`.
pub fn two_statement_nest() -> Program {
    let mut params = Params::new();
    for (n, v) in NEST_PARAMS {
        params.set(n, v);
    }
    let mut p = Program::new(params);
    for b in ["A", "B", "C"] {
        p.add_buffer(b, ElemKind::I32, &["N", "M"]).expect("fresh buffer");
    }
    let ij = || vec![Expr::var("i"), Expr::var("j")];
    let dom = |s: &str| IntegerSet::parse(&format!("[N, M] -> {{{s}(i, j): 0 <= i < N and 0 <= j < M}}"));
    let s1 = Computation::new(
        dom("S1").expect("valid set"),
        Access::affine("A", ij()),
        Value::bin(BinOp::Add, Value::load("A", ij()), Value::load("B", ij())),
    );
    let s2 = Computation::new(
        dom("S2").expect("valid set"),
        Access::affine("C", ij()),
        Value::bin(BinOp::Mul, Value::load("A", ij()), Value::Int(2)),
    );
    p.add(s1).expect("valid computation");
    p.add(s2).expect("valid computation");
    p
}

/// `(label, script)` for each variant, starting from the sequential order.
pub const VARIANT_SCRIPTS: [(&str, &str); 8] = [
    ("b", ""),
    ("c", "interchange i j"),
    ("d", "fission 1 S1 | S2"),
    ("e", "fission 0 S1 | S2"),
    ("f", "split i N"),
    ("g", "split i N; interchange i%N j"),
    ("h", "split i P; interchange i/P i%P; interchange i/P j; parallelize i%P"),
    ("i", "vectorize j 4"),
];

/// Every variant as `(label, script, program)`.
pub fn nest_variants() -> Result<Vec<(&'static str, &'static str, Program)>> {
    let base = two_statement_nest();
    VARIANT_SCRIPTS
        .iter()
        .map(|(label, script)| Ok((*label, *script, base.run_script(script)?)))
        .collect()
}

/// Two-line rendering with parenthesized tags.
pub fn tagged_text(p: &Program) -> String {
    p.schedules.iter().map(|s| s.tagged_text()).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_variant_is_bijective() {
        for (label, _, p) in nest_variants().unwrap() {
            p.check_bijective().unwrap_or_else(|e| panic!("variant {label}: {e}"));
        }
    }
}

#[cfg(test)]
mod golden {
    use super::*;

    const EXPECTED: [(&str, &str); 8] = [
        ("b", "S1: (i, j, 0)\nS2: (i, j, 1)"),
        ("c", "S1: (j, i, 0)\nS2: (j, i, 1)"),
        ("d", "S1: (i, 0, j)\nS2: (i, 1, j)"),
        ("e", "S1: (0, i, j)\nS2: (1, i, j)"),
        ("f", "S1: (i/N, i%N, j, 0)\nS2: (i/N, i%N, j, 1)"),
        ("g", "S1: (i/N, j, i%N, 0)\nS2: (i/N, j, i%N, 1)"),
        ("h", "S1: (i%P (cpu), j, i/P, 0)\nS2: (i%P (cpu), j, i/P, 1)"),
        ("i", "S1: (i, j/4, 0, j%4 (vec))\nS2: (i, j/4, 1, j%4 (vec))"),
    ];

    #[test]
    fn variants_render_exactly() {
        for ((label, _, p), (l2, want)) in nest_variants().unwrap().into_iter().zip(EXPECTED) {
            assert_eq!(label, l2);
            assert_eq!(tagged_text(&p), want, "variant {label}");
        }
    }
}
