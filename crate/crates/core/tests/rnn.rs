use polyloom::codegen::{execute, lower, run_reference, ExecOptions};
use polyloom::randprog::random_store;
use polyloom::rnn::{
    lstm_dependence_model, lstm_forward_seq, lstm_forward_wavefront, LstmParams, Matrix, WAVEFRONT_SCRIPT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inputs(r: &mut ChaCha8Rng, t: usize, d: usize) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect()).collect()
}

#[test]
fn compressed_gates_match_dense_gates() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let dense = LstmParams::random(3, 5, 12, None, 4).unwrap();
    let mut sparse = dense.clone();
    for layer in &mut sparse.layers {
        for m in layer.w.iter_mut().chain(layer.u.iter_mut()) {
            *m = m.to_sparse().unwrap();
            assert!(matches!(m, Matrix::Sparse(_)));
        }
    }
    let x = inputs(&mut r, 7, 5);
    let a = lstm_forward_seq(&dense, &x).unwrap();
    let b = lstm_forward_wavefront(&sparse, &x, 3).unwrap();
    // compressed values are stored in single precision
    assert!(b.rel_diff(&a).unwrap() < 1e-5);
}

#[test]
fn wavefront_model_runs_in_any_order() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for (l, t) in [(1, 1), (1, 5), (4, 1), (3, 7), (4, 10)] {
        let p = lstm_dependence_model(l, t).unwrap();
        let w = p.run_script(WAVEFRONT_SCRIPT).unwrap();
        let ast = lower(&w).unwrap();
        let init = random_store(&p, &mut r).unwrap();
        let mut want = init.clone();
        run_reference(&p, &mut want).unwrap();
        for workers in 1..=3 {
            let mut got = init.clone();
            let opts = ExecOptions { workers, shuffle_seed: Some(r.gen()), strict_numerics: true };
            execute(&w, &ast, &mut got, &opts).unwrap();
            assert_eq!(got, want, "L={l} T={t} workers={workers}");
        }
    }
}

#[test]
fn bad_shapes_are_reported() {
    let p = LstmParams::random(2, 3, 4, None, 1).unwrap();
    assert!(lstm_forward_seq(&p, &[vec![0.0; 2]]).is_err());
    assert!(LstmParams::random(1, 3, 4, Some(0.0), 1).is_err());
    let mut broken = p.clone();
    broken.layers[1].b[0].pop();
    assert!(lstm_forward_wavefront(&broken, &[vec![0.0; 3]], 2).is_err());
}
