mod common;

use common::{box_points, brute, random_pred, set_text, Pred};
use polyloom::codegen::{execute, lower, run_reference, ExecOptions};
use polyloom::deps::{check_legality, check_parallel, compute_dependences, ParallelVerdict, Verdict};
use polyloom::randprog::{legality_case, random_program, random_script, random_store, ScheduleKind};
use polyloom::rnn::{diagonals, lstm_dependence_model, lstm_forward_seq, lstm_forward_wavefront, LstmParams};
use polyloom::schedule::{Computation, Program, ScheduleVector, Selection};
use polyloom::set::{lex_lt_relation, BoundingBox, Expr, IntegerSet, Params, Relation};
use polyloom::sparse::{ConvShape, CsrWeights, DenseTensor4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_set(r: &mut ChaCha8Rng, dim: usize, name: &str) -> (IntegerSet, Pred) {
    let p = random_pred(r, dim, 3);
    let s = IntegerSet::parse(&set_text(name, dim, &p)).unwrap_or_else(|e| panic!("{}: {e}", p.text()));
    (s, p)
}

fn members(s: &IntegerSet, dim: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    s.enumerate(&Params::new(), &BoundingBox::cube(dim, lo, hi)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn set_operations_match_pointwise(seed in any::<u64>(), dim in 1usize..=3) {
        let mut r = rng(seed);
        let (a, pa) = random_set(&mut r, dim, "S");
        let (b, pb) = random_set(&mut r, dim, "S");
        prop_assert_eq!(members(&a, dim, 0, 8), brute(dim, 0, 8, |x| pa.holds(x)));
        prop_assert_eq!(members(&a.intersect(&b).unwrap(), dim, 0, 8), brute(dim, 0, 8, |x| pa.holds(x) && pb.holds(x)));
        prop_assert_eq!(members(&a.union(&b).unwrap(), dim, 0, 8), brute(dim, 0, 8, |x| pa.holds(x) || pb.holds(x)));
        prop_assert_eq!(members(&a.subtract(&b).unwrap(), dim, 0, 8), brute(dim, 0, 8, |x| pa.holds(x) && !pb.holds(x)));
        let bx = BoundingBox::cube(dim, 0, 8);
        let params = Params::new();
        prop_assert_eq!(a.is_empty(&params, &bx).unwrap(), brute(dim, 0, 8, |x| pa.holds(x)).is_empty());
        prop_assert_eq!(
            a.is_subset(&b, &params, &bx).unwrap(),
            box_points(dim, 0, 8).iter().all(|x| !pa.holds(x) || pb.holds(x))
        );
    }

    #[test]
    fn de_morgan(seed in any::<u64>(), dim in 1usize..=3) {
        let mut r = rng(seed);
        let (a, _) = random_set(&mut r, dim, "S");
        let (b, _) = random_set(&mut r, dim, "S");
        let u = IntegerSet::universe("S", &common::VARS[..dim]);
        let lhs = u.subtract(&a.union(&b).unwrap()).unwrap();
        let rhs = u.subtract(&a).unwrap().intersect(&u.subtract(&b).unwrap()).unwrap();
        prop_assert_eq!(members(&lhs, dim, -3, 9), members(&rhs, dim, -3, 9));
    }

    #[test]
    fn parse_print_round_trip(seed in any::<u64>(), dim in 1usize..=3) {
        let (s, _) = random_set(&mut rng(seed), dim, "S");
        let again = IntegerSet::parse(&s.to_string()).unwrap();
        prop_assert_eq!(members(&again, dim, -2, 9), members(&s, dim, -2, 9));
    }

    #[test]
    fn map_image_and_inverse(seed in any::<u64>(), dim in 1usize..=3) {
        let mut r = rng(seed);
        let p = random_pred(&mut r, dim, 2);
        let vars = &common::VARS[..dim];
        let bounded = format!("{} and {}", vars.iter().map(|v| format!("0 <= {v} <= 8")).collect::<Vec<_>>().join(" and "), p.text());
        let s = IntegerSet::parse(&format!("{{S({}): {bounded}}}", vars.join(", "))).unwrap();
        let shift: Vec<i64> = (0..dim).map(|_| r.gen_range(-2..=2)).collect();
        let mut perm: Vec<usize> = (0..dim).collect();
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut r);
        let outs: Vec<String> = perm.iter().map(|&k| format!("{} + {}", vars[k], shift[k])).collect();
        let m = Relation::parse(&format!("{{S({}) -> T({})}}", vars.join(", "), outs.join(", "))).unwrap();
        let image = m.apply(&s).unwrap();
        let mut want: Vec<Vec<i64>> = brute(dim, 0, 8, |x| p.holds(x))
            .into_iter()
            .map(|x| perm.iter().map(|&k| x[k] + shift[k]).collect())
            .collect();
        want.sort();
        prop_assert_eq!(members(&image, dim, -4, 12), want);
        let back = m.inverse().apply(&image).unwrap();
        let back = members(&back, dim, -4, 12);
        for x in members(&s, dim, 0, 8) {
            prop_assert!(back.contains(&x));
        }
    }

    #[test]
    fn lex_order_matches_tuples(dim in 1usize..=3) {
        let r = lex_lt_relation(dim).unwrap();
        let pts = box_points(dim, 0, 2);
        for a in &pts {
            for b in &pts {
                prop_assert_eq!(r.contains(a, b, &Params::new()).unwrap(), a < b);
            }
        }
    }

    #[test]
    fn command_sequences_stay_bijective(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut p = random_program(&mut r);
        for _ in 0..r.gen_range(1..=3) {
            let kind = ScheduleKind::ALL[r.gen_range(0..ScheduleKind::ALL.len())];
            if let Some(s) = random_script(&p, kind, &mut r) {
                if let Ok(q) = p.run_script(&s) {
                    p = q;
                }
            }
        }
        for s in &p.schedules {
            s.validate().unwrap();
        }
        p.check_bijective().unwrap();
    }

    #[test]
    fn schedule_dump_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&mut r);
        let kind = ScheduleKind::ALL[r.gen_range(0..ScheduleKind::ALL.len())];
        let Some(script) = random_script(&p, kind, &mut r) else { return Ok(()) };
        let q = p.run_script(&script).unwrap();
        let mut back = q.clone();
        for (ci, line) in q.dump_schedules().lines().enumerate() {
            back.schedules[ci] = ScheduleVector::parse_dump(line, &q.constants()).unwrap();
        }
        let t = |p: &Program| p.timed_instances(&mut |_, _| unreachable!()).unwrap();
        prop_assert_eq!(t(&back), t(&q));
    }

    #[test]
    fn dependences_ignore_iterator_names(seed in any::<u64>()) {
        let p = random_program(&mut rng(seed));
        let mut q = Program::new(p.params.clone());
        q.buffers = p.buffers.clone();
        for c in &p.comps {
            let fresh: Vec<String> = c.iterators().iter().map(|v| format!("{v}_r")).collect();
            let map: Vec<(String, Expr)> = c.iterators().iter().cloned().zip(fresh.iter().map(Expr::var)).collect();
            let dom = c.domain.renamed(&fresh).unwrap();
            q.add(Computation::new(dom, c.write.substitute(&map), c.body.substitute(&map))).unwrap();
        }
        prop_assert_eq!(compute_dependences(&q).unwrap(), compute_dependences(&p).unwrap());
    }

    #[test]
    fn single_worker_and_vector_tags_are_exact(seed in any::<u64>(), width in 2u32..=4) {
        let mut r = rng(seed);
        let p = random_program(&mut r);
        let init = random_store(&p, &mut r).unwrap();
        let iters = p.comps[0].iterators().to_vec();
        let outer = &iters[0];
        let inner = &iters[iters.len() - 1];
        let variants = [format!("parallelize {outer}"), format!("vectorize {inner} {width}")];
        for script in variants {
            let q = p.run_script(&script).unwrap();
            // same order, tags ignored
            let mut want = init.clone();
            run_reference(&q, &mut want).unwrap();
            let mut got = init.clone();
            let opts = ExecOptions { workers: 1, shuffle_seed: None, strict_numerics: true };
            execute(&q, &lower(&q).unwrap(), &mut got, &opts).unwrap();
            prop_assert_eq!(&got, &want, "{}", script);
        }
    }

    #[test]
    fn csr_invariants_and_lossless(seed in any::<u64>(), eps in 0.0f32..0.5) {
        let mut r = rng(seed);
        let s = ConvShape::new(1, r.gen_range(1..4), r.gen_range(1..5), r.gen_range(3..7), r.gen_range(3..7), r.gen_range(1..4)).unwrap();
        let w = DenseTensor4::from_fn(s.weight_dims(), |_| if r.gen_bool(0.4) { 0.0 } else { r.gen_range(-1.0..1.0) });
        let c = CsrWeights::from_dense(&w, &s, eps).unwrap();
        c.validate().unwrap();
        let back = c.to_dense();
        for (a, b) in w.data().iter().zip(back.data()) {
            prop_assert_eq!(*b, if a.abs() > eps { *a } else { 0.0 });
        }
    }

    #[test]
    fn diagonals_cover_grid_once(l in 1usize..6, t in 1usize..20) {
        let d = diagonals(l, t);
        prop_assert_eq!(d.iter().map(|w| w.len()).sum::<usize>(), l * t);
        let mut all: Vec<_> = d.concat();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), l * t);
    }

    #[test]
    fn legal_verdicts_preserve_results(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&mut r);
        for kind in ScheduleKind::ALL {
            if let Some(script) = random_script(&p, kind, &mut r) {
                let c = legality_case(&p, &script, &mut r).unwrap();
                prop_assert!(!c.legal || c.same_result, "{}", script);
            }
        }
    }

    #[test]
    fn certified_loops_tolerate_any_order(seed in any::<u64>(), workers in 1usize..=3) {
        let mut r = rng(seed);
        let p = random_program(&mut r);
        let deps = compute_dependences(&p).unwrap();
        for v in p.comps[0].iterators().to_vec() {
            let q = p.run_script(&format!("parallelize {v}")).unwrap();
            if check_parallel(&q, &deps, &Selection::all(), &v).unwrap() != ParallelVerdict::Parallel {
                continue;
            }
            let init = random_store(&p, &mut r).unwrap();
            let mut want = init.clone();
            run_reference(&p, &mut want).unwrap();
            let mut got = init;
            let opts = ExecOptions { workers, shuffle_seed: Some(r.gen()), strict_numerics: true };
            execute(&q, &lower(&q).unwrap(), &mut got, &opts).unwrap();
            prop_assert_eq!(&got, &want, "parallel {}", v);
        }
    }

    #[test]
    fn lstm_schedules_legal_iff_result_kept(l in 1usize..=4, t in 1usize..=6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = lstm_dependence_model(l, t).unwrap();
        let deps = compute_dependences(&p).unwrap();
        let init = random_store(&p, &mut r).unwrap();
        let mut want = init.clone();
        run_reference(&p, &mut want).unwrap();
        for script in ["", "interchange l t", "skew t l 1; interchange l t+l", "reverse t"] {
            let q = p.run_script(script).unwrap();
            let legal = check_legality(&q, &deps).unwrap() == Verdict::Legal;
            let mut got = init.clone();
            execute(&q, &lower(&q).unwrap(), &mut got, &ExecOptions::sequential()).unwrap();
            prop_assert_eq!(legal, got == want, "{}", script);
            if script.starts_with("reverse") && t > 1 {
                prop_assert!(!legal);
            }
        }
    }

    #[test]
    fn wavefront_matches_sequential(l in 1usize..=4, t in 1usize..=12, h in 1usize..=16, workers in 1usize..=3, seed in any::<u64>()) {
        let mut r = rng(seed);
        let params = LstmParams::random(l, 3, h, None, seed).unwrap();
        let x: Vec<Vec<f64>> = (0..t).map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let seq = lstm_forward_seq(&params, &x).unwrap();
        let wave = lstm_forward_wavefront(&params, &x, workers).unwrap();
        if workers == 1 {
            prop_assert_eq!(&wave, &seq);
        }
        prop_assert!(wave.rel_diff(&seq).unwrap() < 1e-12);
    }
}
