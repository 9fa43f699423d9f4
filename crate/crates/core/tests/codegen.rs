use polyloom::codegen::{execute, lower, lower_checked, run_reference, BufferStore, ExecOptions, Node, Val};
use polyloom::deps::compute_dependences;
use polyloom::schedule::nest::{two_statement_nest, nest_variants};
use polyloom::schedule::Program;

fn seeded(p: &Program) -> BufferStore {
    let mut s = BufferStore::for_program(p).unwrap();
    s.fill("A", |i| Val::Int((i as i64 * 37) % 11 - 5)).unwrap();
    s.fill("B", |i| Val::Int(i as i64 % 7)).unwrap();
    s
}

fn check(p: &Program, what: &str) {
    let mut want = seeded(p);
    run_reference(p, &mut want).unwrap();
    let ast = lower(p).unwrap();
    assert!(ast.warnings.is_empty(), "{what}: {:?}", ast.warnings);
    for workers in [1, 3] {
        let mut got = seeded(p);
        let opts = ExecOptions { workers, shuffle_seed: Some(1), strict_numerics: true };
        execute(p, &ast, &mut got, &opts).unwrap();
        assert_eq!(got, want, "{what} with {workers} workers\n{}", ast.emit_source(p));
    }
}

#[test]
fn nest_variants_match_reference() {
    for (label, _, p) in nest_variants().unwrap() {
        check(&p, label);
    }
}

#[test]
fn transformed_nests_match_reference() {
    let scripts = [
        "split j 3",
        "tile i j 3 5",
        "skew j i 2",
        "skew i j -1; interchange i-j j",
        "reverse j",
        "on S2: reverse i",
        "fission 1 S1 | S2; on S2: interchange i j",
        "split i 3; split j 3; interchange i%3 j/3",
        "vectorize j 3; parallelize i",
    ];
    for s in scripts {
        let p = two_statement_nest().run_script(s).unwrap();
        check(&p, s);
    }
}

#[test]
fn checked_lowering_rejects_illegal_order() {
    let p = two_statement_nest();
    let deps = compute_dependences(&p).unwrap();
    assert!(lower_checked(&p, &deps).is_ok());
    let bad = p.run_script("fission 0 S2 | S1").unwrap();
    let err = lower_checked(&bad, &deps).unwrap_err().to_string();
    assert!(err.contains("flow S1("), "{err}");
}

#[test]
fn skewed_program_lowers_to_loops() {
    let p = two_statement_nest().run_script("skew j i 1; interchange i j+i").unwrap();
    let ast = lower(&p).unwrap();
    assert!(matches!(ast.root, Node::Loop { .. }));
    let src = ast.emit_source(&p);
    assert!(src.contains("max("), "{src}");
}

#[test]
fn wavefront_bounds_and_result() {
    use polyloom::rnn::{lstm_dependence_model, WAVEFRONT_SCRIPT};
    let base = lstm_dependence_model(3, 4).unwrap();
    let p = base.run_script(WAVEFRONT_SCRIPT).unwrap();
    let ast = lower(&p).unwrap();
    assert_eq!(
        ast.emit_source(&p),
        "for (c0 in 0..L + T - 1)\n  parallel for (l in max(0, c0 - T + 1)..min(L, c0 + 1))\n    \
         cell: h[l + 1][c0 - l + 1] = h[l + 1][c0 - l] * 3 + (h[l][c0 - l + 1] * 5 + 1);\n"
    );
    let init = |p: &Program| {
        let mut s = BufferStore::for_program(p).unwrap();
        s.fill("h", |i| Val::Int(i as i64 % 3 + 1)).unwrap();
        s
    };
    let mut want = init(&base);
    run_reference(&base, &mut want).unwrap();
    let mut got = init(&p);
    execute(&p, &ast, &mut got, &ExecOptions { workers: 2, shuffle_seed: Some(4), strict_numerics: true }).unwrap();
    assert_eq!(got, want);
}
