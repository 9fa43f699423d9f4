//! Cross-checks run by `polyloom verify`. Every suite compares two
//! independent routes to the same result.

use std::io::Cursor;

use anyhow::Result;
use polyloom::codegen::{execute, lower, run_reference, ExecOptions};
use polyloom::deps::{check_legality, compute_dependences, Verdict};
use polyloom::randprog::{legality_case, random_program, random_script, random_store, ScheduleKind};
use polyloom::rnn::{
    lstm_dependence_model, lstm_forward_seq, lstm_forward_wavefront, LstmParams, WAVEFRONT_SCRIPT,
};
use polyloom::schedule::nest::nest_variants;
use polyloom::sparse::io::{read_csr, write_csr};
use polyloom::sparse::{
    dense_conv, fused_conv_relu_maxpool, random_input, random_weights, sparse_conv, unfused_conv_relu_maxpool,
    ConvShape, CsrWeights, Weights, LAYER_DENSITIES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    pub workers: usize,
    /// Break one CSR matrix's row pointers so the invariant suite must fail.
    pub corrupt_csr: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        SuiteReport { name, cases: 0, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const SUITES: [&str; 6] =
    ["sparse-dense", "csr-invariants", "fused-unfused", "wavefront-sequential", "legal-schedules", "dependence-oracle"];

/// Run every suite. A suite that errors is reported as failed.
pub fn run_all(o: &VerifyOptions) -> Vec<SuiteReport> {
    let runs: [fn(&VerifyOptions) -> Result<SuiteReport>; 6] =
        [sparse_dense, csr_invariants, fused_unfused, wavefront_sequential, legal_schedules, dependence_oracle];
    runs.iter()
        .zip(SUITES)
        .map(|(run, name)| {
            run(o).unwrap_or_else(|e| SuiteReport { name, cases: 0, failures: vec![format!("error: {e:#}")] })
        })
        .collect()
}

/// Bit `k` set when suite `k` failed.
pub fn exit_code(reports: &[SuiteReport]) -> i32 {
    reports.iter().enumerate().filter(|(_, r)| !r.passed()).fold(0, |c, (k, _)| c | (1 << k))
}

fn small_shape(r: &mut ChaCha8Rng, even: bool) -> Result<ConvShape> {
    let side = |r: &mut ChaCha8Rng| if even { 2 * r.gen_range(1..=6) } else { r.gen_range(2..=12) };
    let (h, w) = (side(r), side(r));
    Ok(ConvShape::same(r.gen_range(1..=2), r.gen_range(1..=6), r.gen_range(1..=6), h, w, [1, 3, 5][r.gen_range(0..3)])?)
}

fn sparse_dense(o: &VerifyOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(SUITES[0]);
    let mut r = ChaCha8Rng::seed_from_u64(o.seed);
    for _ in 0..20 {
        let s = small_shape(&mut r, false)?;
        let x = random_input(&s, &mut r);
        for (layer, d) in LAYER_DENSITIES {
            let w = random_weights(&s, d, &mut r)?;
            let csr = CsrWeights::from_dense(&w, &s, 0.0)?;
            let e = sparse_conv(&x, &csr, &s)?.rel_diff(&dense_conv(&x, &w, &s)?)?;
            rep.check(e <= 1e-5, || format!("{s:?} at {layer} density: rel diff {e:e}"));
        }
    }
    Ok(rep)
}

fn csr_invariants(o: &VerifyOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(SUITES[1]);
    let mut r = ChaCha8Rng::seed_from_u64(o.seed ^ 1);
    let mut pending = o.corrupt_csr;
    for case in 0..20 {
        let s = small_shape(&mut r, false)?;
        let w = random_weights(&s, r.gen_range(0.05..1.0), &mut r)?;
        let mut csr = CsrWeights::from_dense(&w, &s, 0.0)?;
        if pending && csr.rowptr.len() > 2 {
            // row 0 now ends after row 1 does
            csr.rowptr[1] = csr.rowptr[2] + 1;
            pending = false;
        }
        rep.check(csr.validate().is_ok(), || format!("case {case}: rowptr/colidx invariants violated"));
        let mut bytes = Vec::new();
        let round = write_csr(&mut bytes, &csr).and_then(|_| read_csr(&mut Cursor::new(bytes)));
        rep.check(round.as_ref().is_ok_and(|c| *c == csr), || format!("case {case}: file round trip failed"));
        rep.check(csr.to_dense() == w, || format!("case {case}: decompressed weights differ"));
    }
    Ok(rep)
}

fn fused_unfused(o: &VerifyOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(SUITES[2]);
    let mut r = ChaCha8Rng::seed_from_u64(o.seed ^ 2);
    for case in 0..20 {
        let s = small_shape(&mut r, true)?;
        let x = random_input(&s, &mut r);
        let w = random_weights(&s, r.gen_range(0.05..1.0), &mut r)?;
        let csr = CsrWeights::from_dense(&w, &s, 0.0)?;
        let wts = if case % 2 == 0 { Weights::Dense(&w) } else { Weights::Sparse(&csr) };
        let e = fused_conv_relu_maxpool(&x, wts, &s)?.rel_diff(&unfused_conv_relu_maxpool(&x, wts, &s)?)?;
        rep.check(e <= 1e-6, || format!("case {case}: rel diff {e:e}"));
    }
    Ok(rep)
}

fn wavefront_sequential(o: &VerifyOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(SUITES[3]);
    let mut r = ChaCha8Rng::seed_from_u64(o.seed ^ 3);
    for case in 0..20 {
        let (l, t, h, d) = (r.gen_range(1..=4), r.gen_range(1..=16), r.gen_range(1..=32), r.gen_range(1..=8));
        let density = if case % 2 == 0 { None } else { Some(0.3) };
        let p = LstmParams::random(l, d, h, density, r.gen())?;
        let x: Vec<Vec<f64>> = (0..t).map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let e = lstm_forward_wavefront(&p, &x, o.workers.max(2))?.rel_diff(&lstm_forward_seq(&p, &x)?)?;
        rep.check(e <= 1e-5, || format!("L={l} T={t} H={h}: rel diff {e:e}"));
    }
    Ok(rep)
}

/// Legal schedules must not change results under any worker count or
/// iteration order.
fn legal_schedules(o: &VerifyOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(SUITES[4]);
    let mut r = ChaCha8Rng::seed_from_u64(o.seed ^ 4);
    let mut progs = Vec::new();
    for (label, script, q) in nest_variants()? {
        progs.push((format!("nest ({label}) {script}"), polyloom::schedule::nest::two_statement_nest(), q));
    }
    let lstm = lstm_dependence_model(4, 6)?;
    progs.push(("lstm wavefront".into(), lstm.clone(), lstm.run_script(WAVEFRONT_SCRIPT)?));
    for (what, base, q) in progs {
        let deps = compute_dependences(&base)?;
        rep.check(check_legality(&q, &deps)? == Verdict::Legal, || format!("{what}: rejected as illegal"));
        let ast = lower(&q)?;
        for _ in 0..3 {
            let init = random_store(&base, &mut r)?;
            let mut want = init.clone();
            run_reference(&base, &mut want)?;
            let mut got = init;
            let opts = ExecOptions { workers: o.workers.max(2), shuffle_seed: Some(r.gen()), strict_numerics: true };
            execute(&q, &ast, &mut got, &opts)?;
            rep.check(got == want, || format!("{what}: result changed"));
        }
    }
    Ok(rep)
}

fn dependence_oracle(o: &VerifyOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(SUITES[5]);
    let mut r = ChaCha8Rng::seed_from_u64(o.seed ^ 5);
    for _ in 0..100 {
        let p = random_program(&mut r);
        for kind in ScheduleKind::ALL {
            if let Some(script) = random_script(&p, kind, &mut r) {
                let c = legality_case(&p, &script, &mut r)?;
                rep.check(c.legal == c.same_result, || {
                    format!("{script:?}: verdict legal={} but result kept={}", c.legal, c.same_result)
                });
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_and_corruption_is_caught() {
        let o = VerifyOptions { seed: 3, workers: 2, corrupt_csr: false };
        let reps = run_all(&o);
        for r in &reps {
            assert!(r.passed(), "{}: {:?}", r.name, r.failures);
            assert!(r.cases > 0);
        }
        assert_eq!(exit_code(&reps), 0);
        let bad = csr_invariants(&VerifyOptions { corrupt_csr: true, ..o }).unwrap();
        assert!(!bad.passed());
    }

    #[test]
    fn exit_code_has_one_bit_per_suite() {
        let ok = SuiteReport::new("a");
        let mut bad = SuiteReport::new("b");
        bad.check(false, || "x".into());
        assert_eq!(exit_code(&[ok.clone(), bad.clone(), bad]), 0b110);
    }
}
