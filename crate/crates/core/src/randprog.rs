//! Random small programs and schedules for oracle testing.
//!
//! Every body has the form `X[w] = X[w]*3 + R*5 + 7*i + 11*j + 13*k + c`
//! in wrapping 32-bit arithmetic. Multiplying by an odd constant is a
//! bijection, so a write never loses the value it overwrites and a read
//! always influences what it writes: moving any dependent pair of
//! instances changes the final buffers except by arithmetic coincidence.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::codegen::{execute, lower, run_reference, BufferStore, ExecOptions, Val};
use crate::deps::{check_legality, compute_dependences, Verdict};
use crate::error::Result;
use crate::schedule::{Access, BinOp, Computation, ElemKind, Program, Value};
use crate::set::{Expr, IntegerSet, Params};

const ITERS: [&str; 3] = ["i", "j", "k"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    Identity,
    Interchange,
    Split,
    Tile,
    Fission,
    Skew,
    Reversal,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 7] = [
        ScheduleKind::Identity,
        ScheduleKind::Interchange,
        ScheduleKind::Split,
        ScheduleKind::Tile,
        ScheduleKind::Fission,
        ScheduleKind::Skew,
        ScheduleKind::Reversal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Identity => "identity",
            ScheduleKind::Interchange => "interchange",
            ScheduleKind::Split => "split",
            ScheduleKind::Tile => "tile",
            ScheduleKind::Fission => "fission",
            ScheduleKind::Skew => "skew",
            ScheduleKind::Reversal => "reversal",
        }
    }
}

/// Extent of every buffer dimension: loop extents are at most 6 and
/// subscripts are `iter + 1 + {-1, 0, 1}`.
const BUF_EXTENT: i64 = 8;

/// 1 to 3 statements over a shared box of up to 6^3 points, touching
/// one or two buffers.
pub fn random_program(rng: &mut impl Rng) -> Program {
    let dim = rng.gen_range(1..=3);
    let extents: Vec<i64> = (0..dim).map(|_| rng.gen_range(1..=6)).collect();
    let nbuf = rng.gen_range(1..=2);
    let mut p = Program::new(Params::new());
    let names = ["X", "Y"];
    let shape: Vec<String> = (0..dim).map(|_| BUF_EXTENT.to_string()).collect();
    let shape: Vec<&str> = shape.iter().map(|s| s.as_str()).collect();
    for b in &names[..nbuf] {
        p.add_buffer(b, ElemKind::I32, &shape).expect("fresh buffer");
    }
    let ncomp = rng.gen_range(1..=3);
    for s in 0..ncomp {
        let vars = &ITERS[..dim];
        let lows: Vec<i64> = (0..dim).map(|_| rng.gen_range(0..=1)).collect();
        let cons: Vec<String> =
            (0..dim).map(|d| format!("{} <= {} < {}", lows[d], vars[d], extents[d].max(lows[d] + 1))).collect();
        let dom = IntegerSet::parse(&format!("{{S{s}({}): {}}}", vars.join(", "), cons.join(" and "))).expect("valid set");
        let sub = |rng: &mut dyn rand::RngCore, allow_const: bool| -> Vec<Expr> {
            vars.iter()
                .map(|v| {
                    if allow_const && rng.gen_bool(0.2) {
                        Expr::int(1)
                    } else {
                        Expr::var(*v) + (1 + rng.gen_range(-1..=1))
                    }
                })
                .collect()
        };
        let wbuf = names[rng.gen_range(0..nbuf)];
        let rbuf = names[rng.gen_range(0..nbuf)];
        let widx = sub(rng, true);
        let ridx = sub(rng, true);
        let mut body = Value::bin(BinOp::Mul, Value::load(wbuf, widx.clone()), Value::Int(3));
        body = Value::bin(BinOp::Add, body, Value::bin(BinOp::Mul, Value::load(rbuf, ridx), Value::Int(5)));
        for (v, m) in vars.iter().zip([7, 11, 13]) {
            body = Value::bin(BinOp::Add, body, Value::bin(BinOp::Mul, Value::iter(v), Value::Int(m)));
        }
        body = Value::bin(BinOp::Add, body, Value::Int(rng.gen_range(1..100)));
        p.add(Computation::new(dom, Access::affine(wbuf, widx), body)).expect("valid computation");
    }
    p
}

/// A script of the given kind for `p`, or `None` when the kind does not
/// apply (interchange of a 1-d nest, fission of a single statement).
pub fn random_script(p: &Program, kind: ScheduleKind, rng: &mut impl Rng) -> Option<String> {
    let dim = p.comps[0].iterators().len();
    let vars = &ITERS[..dim];
    let pick2 = |rng: &mut dyn rand::RngCore| {
        let a = rng.gen_range(0..dim);
        let mut b = rng.gen_range(0..dim - 1);
        if b >= a {
            b += 1;
        }
        (vars[a], vars[b])
    };
    let on = |rng: &mut dyn rand::RngCore| -> String {
        if p.comps.len() > 1 && rng.gen_bool(0.3) {
            format!("on {}: ", p.comps[rng.gen_range(0..p.comps.len())].name)
        } else {
            String::new()
        }
    };
    Some(match kind {
        ScheduleKind::Identity => String::new(),
        ScheduleKind::Interchange if dim >= 2 => {
            let (a, b) = pick2(rng);
            format!("{}interchange {a} {b}", on(rng))
        }
        ScheduleKind::Split => {
            let v = vars[rng.gen_range(0..dim)];
            format!("split {v} {}", rng.gen_range(2..=3))
        }
        ScheduleKind::Tile if dim >= 2 => {
            let d = rng.gen_range(0..dim - 1);
            format!("tile {} {} {} {}", vars[d], vars[d + 1], rng.gen_range(2..=3), rng.gen_range(2..=3))
        }
        ScheduleKind::Fission if p.comps.len() >= 2 => {
            let mut names: Vec<&str> = p.comps.iter().map(|c| c.name.as_str()).collect();
            names.shuffle(rng);
            let cut = rng.gen_range(1..names.len());
            let depth = rng.gen_range(0..=dim);
            format!("fission {depth} {} | {}", names[..cut].join(","), names[cut..].join(","))
        }
        ScheduleKind::Skew if dim >= 2 => {
            let (a, b) = pick2(rng);
            let f = [-1, 1, 2][rng.gen_range(0..3)];
            let skewed = Expr::var(a) + Expr::var(b).scaled(f);
            let skewed = crate::set::Linear::of(&skewed).to_expr().to_string().replace(' ', "");
            if rng.gen_bool(0.5) {
                format!("skew {a} {b} {f}; interchange {b} {skewed}")
            } else {
                format!("skew {a} {b} {f}")
            }
        }
        ScheduleKind::Reversal => {
            let v = vars[rng.gen_range(0..dim)];
            format!("{}reverse {v}", on(rng))
        }
        _ => return None,
    })
}

/// Buffers filled with pseudo-random 32-bit values.
pub fn random_store(p: &Program, rng: &mut impl Rng) -> Result<BufferStore> {
    let mut s = BufferStore::for_program(p)?;
    let names: Vec<String> = s.names().map(str::to_string).collect();
    for n in names {
        s.fill(&n, |_| Val::Int(rng.gen::<i32>() as i64))?;
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleCase {
    pub script: String,
    /// Verdict of the dependence check.
    pub legal: bool,
    /// Whether executing the scheduled program reproduced the original result.
    pub same_result: bool,
}

/// Compare the legality verdict for `script` with an execution of the
/// lowered, rescheduled program against the original order.
pub fn legality_case(p: &Program, script: &str, rng: &mut impl Rng) -> Result<OracleCase> {
    let q = p.run_script(script)?;
    let deps = compute_dependences(p)?;
    let legal = check_legality(&q, &deps)? == Verdict::Legal;
    let init = random_store(p, rng)?;
    let mut want = init.clone();
    run_reference(p, &mut want)?;
    let mut got = init;
    execute(&q, &lower(&q)?, &mut got, &ExecOptions::sequential())?;
    Ok(OracleCase { script: script.to_string(), legal, same_result: got == want })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn programs_are_small_and_bijective() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let p = random_program(&mut rng);
            for c in &p.comps {
                let n = p.timed_instances(&mut |_, _| unreachable!()).unwrap().len();
                assert!(n <= 3 * 216);
                assert!(c.iterators().len() <= 3);
            }
            for kind in ScheduleKind::ALL {
                if let Some(s) = random_script(&p, kind, &mut rng) {
                    let q = p.run_script(&s).unwrap_or_else(|e| panic!("{s}: {e}"));
                    q.check_bijective().unwrap_or_else(|e| panic!("{s}: {e}"));
                }
            }
        }
    }

    #[test]
    fn verdicts_agree_with_execution() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let p = random_program(&mut rng);
            for kind in ScheduleKind::ALL {
                if let Some(s) = random_script(&p, kind, &mut rng) {
                    let c = legality_case(&p, &s, &mut rng).unwrap();
                    assert_eq!(c.legal, c.same_result, "{s}\n{}", p.dump_schedules());
                }
            }
        }
    }
}
