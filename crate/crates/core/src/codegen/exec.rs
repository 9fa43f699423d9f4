//! Loop-tree executor.
//!
//! `cpu` loops run on a rayon pool. Each worker writes into a private
//! overlay over the shared store; overlays merge in worker order, with
//! elements only touched by reductions merged as deltas so concurrent
//! partial sums add up.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ast::{LoopAst, Node};
use super::store::{BufferStore, Val};
use crate::error::{Error, Result};
use crate::schedule::{BinOp, Computation, Index, Program, Tag, UnOp, Value};
use crate::set::{floor_div, Env, Universe};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "POLYLOOM_WORKERS";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecOptions {
    pub workers: usize,
    /// Shuffle the iterations of every `cpu` loop before distributing them.
    pub shuffle_seed: Option<u64>,
    /// Fail on NaN results instead of storing them.
    pub strict_numerics: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions::from_env()
    }
}

impl ExecOptions {
    pub fn sequential() -> Self {
        ExecOptions { workers: 1, shuffle_seed: None, strict_numerics: false }
    }

    /// Worker count from `POLYLOOM_WORKERS`, else the available parallelism.
    pub fn from_env() -> Self {
        ExecOptions { workers: workers_from_env(), shuffle_seed: None, strict_numerics: false }
    }
}

pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

pub(crate) trait Mem {
    fn load(&self, buf: &str, idx: &[i64]) -> Result<Val>;
    fn store(&mut self, buf: &str, idx: &[i64], v: Val, reduction: bool) -> Result<()>;
    fn root(&mut self) -> Option<&mut BufferStore>;
}

impl Mem for BufferStore {
    fn load(&self, buf: &str, idx: &[i64]) -> Result<Val> {
        BufferStore::load(self, buf, idx)
    }
    fn store(&mut self, buf: &str, idx: &[i64], v: Val, _reduction: bool) -> Result<()> {
        BufferStore::store(self, buf, idx, v)
    }
    fn root(&mut self) -> Option<&mut BufferStore> {
        Some(self)
    }
}

struct Overlay<'a> {
    base: &'a BufferStore,
    /// `(buffer, linear index) -> (value, written only by reductions)`
    writes: HashMap<(String, usize), (Val, bool)>,
}

impl Mem for Overlay<'_> {
    fn load(&self, buf: &str, idx: &[i64]) -> Result<Val> {
        let b = self.base.get(buf)?;
        let lin = b.linear(buf, idx)?;
        match self.writes.get(&(buf.to_string(), lin)) {
            Some((v, _)) => Ok(*v),
            None => Ok(b.data.get(lin)),
        }
    }
    fn store(&mut self, buf: &str, idx: &[i64], v: Val, reduction: bool) -> Result<()> {
        let b = self.base.get(buf)?;
        let lin = b.linear(buf, idx)?;
        // round through the element type so overlay reads match the store
        let mut cell = b.data.clone_empty_like();
        cell.set(0, v);
        let v = cell.get(0);
        let e = self.writes.entry((buf.to_string(), lin)).or_insert((v, true));
        *e = (v, e.1 && reduction);
        Ok(())
    }
    fn root(&mut self) -> Option<&mut BufferStore> {
        None
    }
}

fn arith(op: BinOp, a: Val, b: Val) -> Result<Val> {
    use Val::*;
    Ok(match (a, b) {
        (Int(x), Int(y)) => match op {
            BinOp::Add => Int(x.wrapping_add(y)),
            BinOp::Sub => Int(x.wrapping_sub(y)),
            BinOp::Mul => Int(x.wrapping_mul(y)),
            BinOp::Div if y == 0 => return Err(Error::Numeric("integer division by zero".into())),
            BinOp::Div => Int(floor_div(x, y)),
            BinOp::Min => Int(x.min(y)),
            BinOp::Max => Int(x.max(y)),
            BinOp::Lt => Int((x < y) as i64),
        },
        _ => {
            let (x, y) = (a.as_f64(), b.as_f64());
            match op {
                BinOp::Add => Float(x + y),
                BinOp::Sub => Float(x - y),
                BinOp::Mul => Float(x * y),
                BinOp::Div => Float(x / y),
                BinOp::Min => Float(x.min(y)),
                BinOp::Max => Float(x.max(y)),
                BinOp::Lt => Int((x < y) as i64),
            }
        }
    })
}

fn index_of(m: &impl Mem, a: &crate::schedule::Access, env: &Env) -> Result<Vec<i64>> {
    a.index
        .iter()
        .map(|i| match i {
            Index::Affine(e) => e.eval(env),
            Index::Indirect { offset, table, at } => {
                let at: Vec<i64> = at.iter().map(|e| e.eval(env)).collect::<Result<_>>()?;
                Ok(offset.eval(env)? + m.load(table, &at)?.as_i64())
            }
        })
        .collect()
}

fn eval(v: &Value, env: &Env, m: &impl Mem) -> Result<Val> {
    Ok(match v {
        Value::Int(x) => Val::Int(*x),
        Value::Float(x) => Val::Float(*x),
        Value::Affine(e) => Val::Int(e.eval(env)?),
        Value::Load(a) => m.load(&a.buffer, &index_of(m, a, env)?)?,
        Value::Bin(op, a, b) => arith(*op, eval(a, env, m)?, eval(b, env, m)?)?,
        Value::Un(op, a) => {
            let x = eval(a, env, m)?;
            match (op, x) {
                (UnOp::Neg, Val::Int(i)) => Val::Int(i.wrapping_neg()),
                (UnOp::Neg, x) => Val::Float(-x.as_f64()),
                (UnOp::Exp, x) => Val::Float(x.as_f64().exp()),
                (UnOp::Tanh, x) => Val::Float(x.as_f64().tanh()),
                (UnOp::Sigmoid, x) => Val::Float(1.0 / (1.0 + (-x.as_f64()).exp())),
            }
        }
        Value::Select(c, a, b) => {
            if eval(c, env, m)?.as_f64() != 0.0 {
                eval(a, env, m)?
            } else {
                eval(b, env, m)?
            }
        }
    })
}

/// Run one instance of `comp` whose iterators are the top entries of `env`.
pub(crate) fn exec_stmt(comp: &Computation, env: &Env, m: &mut impl Mem, strict: bool) -> Result<()> {
    let mut v = eval(&comp.body, env, m)?;
    let idx = index_of(m, &comp.write, env)?;
    if comp.reduction {
        v = arith(BinOp::Add, m.load(&comp.write.buffer, &idx)?, v)?;
    }
    if strict {
        if let Val::Float(x) = v {
            if x.is_nan() {
                return Err(Error::Numeric(format!("NaN written by {} at {idx:?}", comp.name)));
            }
        }
    }
    m.store(&comp.write.buffer, &idx, v, comp.reduction)
}

pub(crate) fn exec_instance(
    prog: &Program,
    ci: usize,
    iter: &[i64],
    env: &mut Env,
    m: &mut impl Mem,
    strict: bool,
) -> Result<()> {
    let comp = &prog.comps[ci];
    let mark = env.len();
    for (n, x) in comp.iterators().iter().zip(iter) {
        env.push(n.clone(), *x);
    }
    let r = exec_stmt(comp, env, m, strict);
    env.truncate(mark);
    r
}

struct Runner<'a> {
    prog: &'a Program,
    opts: &'a ExecOptions,
    universe: Universe,
    pool: Option<rayon::ThreadPool>,
}

enum Op {
    Set(String, usize, Val),
    Add(String, usize, Val),
}

impl Runner<'_> {
    fn run<M: Mem>(&self, node: &Node, env: &mut Env, m: &mut M, region: &mut u64) -> Result<()> {
        match node {
            Node::Seq(xs) => {
                for x in xs {
                    self.run(x, env, m, region)?;
                }
            }
            Node::Stmt { comp, iters } => {
                let it: Vec<i64> = iters.iter().map(|e| e.eval(env)).collect::<Result<_>>()?;
                exec_instance(self.prog, *comp, &it, env, m, self.opts.strict_numerics)?;
            }
            Node::Instances(list) => {
                for (ci, it) in list {
                    exec_instance(self.prog, *ci, it, env, m, self.opts.strict_numerics)?;
                }
            }
            Node::Guard { cond, body } => {
                if cond.eval(env, self.universe)? {
                    self.run(body, env, m, region)?;
                }
            }
            Node::Bind { symbol, buffer, index, body } => {
                let idx: Vec<i64> = index.iter().map(|e| e.eval(env)).collect::<Result<_>>()?;
                let v = m.load(buffer, &idx)?.as_i64();
                env.push(symbol.clone(), v);
                let r = self.run(body, env, m, region);
                env.pop();
                r?;
            }
            Node::Loop { var, lower, upper, tag, body } => {
                let (lo, hi) = (lower.eval_lower(env)?, upper.eval_upper(env)?);
                if lo > hi {
                    return Ok(());
                }
                let mut values: Vec<i64> = (lo..=hi).collect();
                let parallel = *tag == Tag::Cpu;
                if parallel {
                    if let Some(seed) = self.opts.shuffle_seed {
                        *region += 1;
                        values.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ region.wrapping_mul(0x9E37_79B9)));
                    }
                }
                let fan_out = parallel && self.opts.workers > 1 && values.len() > 1;
                match (fan_out, m.root()) {
                    (true, Some(store)) => self.run_parallel(var, &values, body, env, store)?,
                    _ => {
                        env.push(var.clone(), 0);
                        let slot = env.len() - 1;
                        for v in values {
                            env.set_at(slot, v);
                            if let Err(e) = self.run(body, env, m, region) {
                                env.pop();
                                return Err(e);
                            }
                        }
                        env.pop();
                    }
                }
            }
        }
        Ok(())
    }

    fn run_parallel(&self, var: &str, values: &[i64], body: &Node, env: &Env, store: &mut BufferStore) -> Result<()> {
        let workers = self.opts.workers.min(values.len());
        let chunk = values.len().div_ceil(workers);
        let base: &BufferStore = store;
        let work = |part: &[i64]| -> Result<HashMap<(String, usize), (Val, bool)>> {
            let mut ov = Overlay { base, writes: HashMap::new() };
            let mut env = env.clone();
            env.push(var.to_string(), 0);
            let slot = env.len() - 1;
            let mut region = 0;
            for &v in part {
                env.set_at(slot, v);
                self.run(body, &mut env, &mut ov, &mut region)?;
            }
            Ok(ov.writes)
        };
        let parts: Vec<&[i64]> = values.chunks(chunk).collect();
        let results: Vec<Result<_>> = match &self.pool {
            Some(pool) => pool.install(|| parts.par_iter().map(|p| work(p)).collect()),
            None => parts.iter().map(|p| work(p)).collect(),
        };
        let mut ops = Vec::new();
        for r in results {
            let mut writes: Vec<_> = r?.into_iter().collect();
            writes.sort_by(|a, b| a.0.cmp(&b.0));
            for ((buf, lin), (v, red)) in writes {
                if red {
                    let old = base.get(&buf)?.data.get(lin);
                    ops.push(Op::Add(buf, lin, arith(BinOp::Sub, v, old)?));
                } else {
                    ops.push(Op::Set(buf, lin, v));
                }
            }
        }
        for op in ops {
            match op {
                Op::Set(buf, lin, v) => store.get_mut(&buf)?.data.set(lin, v),
                Op::Add(buf, lin, d) => {
                    let data = &mut store.get_mut(&buf)?.data;
                    let cur = data.get(lin);
                    data.set(lin, arith(BinOp::Add, cur, d)?);
                }
            }
        }
        Ok(())
    }
}

/// Execute a lowered program against `store`.
pub fn execute(prog: &Program, ast: &LoopAst, store: &mut BufferStore, opts: &ExecOptions) -> Result<()> {
    let pool = if opts.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.workers)
                .build()
                .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let runner = Runner { prog, opts, universe: prog.params.universe(), pool };
    let mut env = prog.param_env();
    runner.run(&ast.root, &mut env, store, &mut 0)
}
