//! Schedule-to-loop lowering.
//!
//! Dynamic schedule entries are read as loop variables. Plain affine
//! entries and `e/N, e%N` pairs (with `e = N*q + r, 0 <= r < N`) form an
//! integer matrix over the iterators; when it is unimodular the iterators
//! are recovered as affine functions of the loop variables, substituted
//! into the domain, and Fourier–Motzkin projection yields per-loop bounds.
//! Each constraint is enforced exactly at the level of its innermost loop
//! variable, so no point outside the domain is ever visited. Schedules
//! outside this fragment fall back to an enumerated instance list.

use std::collections::{BTreeMap, HashMap};

use super::ast::{Bound, LoopAst, Node};
use crate::deps::{check_legality, DependenceGraph, Verdict};
use crate::error::{Error, Result};
use crate::schedule::{Entry, Program};
use crate::set::poly::{NotAffine, System};
use crate::set::{Divisor, Expr, Formula, Linear, RelOp};

fn placeholder(p: usize) -> String {
    format!("_c{p}")
}

struct CompPlan {
    /// Iterator values in terms of loop placeholders.
    xs: Vec<Expr>,
    /// Bounds per vector position of each dynamic entry.
    bounds: HashMap<usize, (Vec<Expr>, Vec<Expr>)>,
    guard: Vec<Formula>,
    /// `(dynamic depth after which it is bound, symbol, buffer, index)`.
    binds: Vec<(usize, String, String, Vec<Expr>)>,
}

#[derive(Clone, Copy, Debug)]
struct Frac {
    n: i128,
    d: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Frac {
    fn new(n: i128, d: i128) -> Frac {
        let g = gcd(n, d).max(1);
        let s = if d < 0 { -1 } else { 1 };
        Frac { n: s * n / g, d: s * d / g }
    }
    fn int(n: i64) -> Frac {
        Frac { n: n as i128, d: 1 }
    }
    fn is_zero(self) -> bool {
        self.n == 0
    }
    fn sub(self, o: Frac) -> Frac {
        Frac::new(self.n * o.d - o.n * self.d, self.d * o.d)
    }
    fn mul(self, o: Frac) -> Frac {
        Frac::new(self.n * o.n, self.d * o.d)
    }
    fn div(self, o: Frac) -> Frac {
        Frac::new(self.n * o.d, self.d * o.n)
    }
}

/// Integer inverse of a square matrix, if it exists.
fn integer_inverse(m: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    let n = m.len();
    let mut a: Vec<Vec<Frac>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r: Vec<Frac> = row.iter().map(|&x| Frac::int(x)).collect();
            r.extend((0..n).map(|j| Frac::int((i == j) as i64)));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let p = a[col][col];
        for x in a[col].iter_mut() {
            *x = x.div(p);
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col];
                for c in 0..2 * n {
                    let v = a[col][c].mul(f);
                    a[r][c] = a[r][c].sub(v);
                }
            }
        }
    }
    a.iter()
        .map(|row| {
            row[n..]
                .iter()
                .map(|f| if f.d == 1 { i64::try_from(f.n).ok() } else { None })
                .collect()
        })
        .collect()
}

fn plan(prog: &Program, ci: usize) -> std::result::Result<CompPlan, String> {
    let comp = &prog.comps[ci];
    let sched = &prog.schedules[ci];
    let iters = comp.iterators();
    let n = iters.len();
    let dyn_pos: Vec<usize> = (0..sched.entries.len()).filter(|&p| !sched.entries[p].is_static()).collect();

    // rows: (coefficients over iterators, parameter offset, loop-side value)
    let mut rows: Vec<(Vec<i64>, Expr, Expr)> = Vec::new();
    let mut extra: Vec<Formula> = Vec::new();
    let mut divs: Vec<(usize, Expr, Divisor)> = Vec::new();
    let mut mods: Vec<(usize, Expr, Divisor)> = Vec::new();
    let split_affine = |e: &Expr| -> std::result::Result<(Vec<i64>, Expr), String> {
        let lin = Linear::of(e);
        if !lin.is_affine() {
            return Err(format!("entry `{e}` is not affine"));
        }
        let coeffs: Vec<i64> = iters.iter().map(|v| lin.coeff(v)).collect();
        let mut rest = lin.clone();
        rest.terms.retain(|(t, _)| !iters.iter().any(|v| t.as_var() == Some(v)));
        Ok((coeffs, rest.to_expr()))
    };
    for &p in &dyn_pos {
        let e = sched.entries[p].expr().expect("dynamic");
        match e {
            Expr::Div(inner, d) => divs.push((p, inner.normalize(), d.clone())),
            Expr::Mod(inner, d) => mods.push((p, inner.normalize(), d.clone())),
            _ => {
                let (c, off) = split_affine(e)?;
                rows.push((c, off, Expr::var(placeholder(p))));
            }
        }
    }
    for (pq, e, d) in &divs {
        let k = mods
            .iter()
            .position(|(_, e2, d2)| e2.same_as(e) && d2 == d)
            .ok_or_else(|| format!("`{e}/{d}` has no matching `{e}%{d}`"))?;
        let (pr, _, _) = mods.remove(k);
        let (c, off) = split_affine(e)?;
        let value = Expr::var(placeholder(*pq)).scaled(d.value()) + Expr::var(placeholder(pr));
        rows.push((c, off, value));
        extra.push(Formula::atom(Expr::var(placeholder(pr)), RelOp::Ge, 0));
        extra.push(Formula::atom(Expr::var(placeholder(pr)), RelOp::Le, d.value() - 1));
    }
    if let Some((_, e, d)) = mods.first() {
        return Err(format!("`{e}%{d}` has no matching `{e}/{d}`"));
    }
    if rows.len() != n {
        return Err(format!("{} invertible rows for {n} iterators", rows.len()));
    }
    let matrix: Vec<Vec<i64>> = rows.iter().map(|r| r.0.clone()).collect();
    let inv = integer_inverse(&matrix).ok_or("schedule is not unimodular")?;
    let xs: Vec<Expr> = (0..n)
        .map(|k| {
            let mut acc = Expr::int(0);
            for (j, (_, off, val)) in rows.iter().enumerate() {
                if inv[k][j] != 0 {
                    acc = acc + (val.clone() - off.clone()).scaled(inv[k][j]);
                }
            }
            Linear::of(&acc).to_expr()
        })
        .collect();
    let map: Vec<(String, Expr)> = iters.iter().cloned().zip(xs.iter().cloned()).collect();

    let mut names: Vec<String> = dyn_pos.iter().map(|&p| placeholder(p)).collect();
    let mut atoms = Vec::new();
    let mut guard = Vec::new();
    for c in comp.domain.constraint().conjuncts() {
        let sub = c.substitute(&map);
        let touches_iter = c.free_vars().iter().any(|v| iters.contains(v));
        match (&sub, touches_iter) {
            (Formula::Atom(..), true) => atoms.push(sub),
            (Formula::True, _) => {}
            _ => guard.push(sub),
        }
    }
    atoms.extend(extra);
    for f in &atoms {
        for v in f.free_vars() {
            if !names.contains(&v) {
                names.push(v);
            }
        }
    }
    let mut sys = System::new(names);
    for f in atoms {
        let Formula::Atom(a, op, b) = &f else { unreachable!() };
        match sys.add_atom(a, *op, b) {
            Ok(()) => {}
            Err(NotAffine::Structure) => guard.push(f.clone()),
            Err(NotAffine::UnknownVar(v)) => return Err(format!("unknown variable `{v}`")),
        }
    }

    let mut binds = Vec::new();
    let mut bind_depth: HashMap<String, usize> = HashMap::new();
    for o in &comp.opaque {
        let index: Vec<Expr> = o.index.iter().map(|e| Linear::of(&e.substitute_all(&map)).to_expr()).collect();
        let depth = index
            .iter()
            .flat_map(|e| e.vars())
            .filter_map(|v| dyn_pos.iter().position(|&p| placeholder(p) == v))
            .map(|k| k + 1)
            .max()
            .unwrap_or(0);
        bind_depth.insert(o.symbol.clone(), depth);
        binds.push((depth, o.symbol.clone(), o.buffer.clone(), index));
    }

    let mut bounds = HashMap::new();
    for k in (0..dyn_pos.len()).rev() {
        let (lows, ups) = sys.bounds(k);
        if lows.is_empty() || ups.is_empty() {
            return Err(format!("loop {} of {} is unbounded", k, comp.name));
        }
        for e in lows.iter().chain(&ups) {
            for v in e.vars() {
                if bind_depth.get(&v).is_some_and(|&d| d > k) {
                    return Err(format!("bound of loop {k} needs `{v}` before it is loaded"));
                }
            }
        }
        bounds.insert(dyn_pos[k], (lows, ups));
        sys = sys.projected(k);
    }
    Ok(CompPlan { xs, bounds, guard, binds })
}

struct Builder<'a> {
    prog: &'a Program,
    plans: Vec<CompPlan>,
    reserved: Vec<String>,
}

fn same_exprs(a: &[Expr], b: &[Expr]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_as(y))
}

impl Builder<'_> {
    fn leaf(&self, ci: usize, extra: &HashMap<usize, Vec<Formula>>) -> Node {
        let plan = &self.plans[ci];
        let stmt = Node::Stmt { comp: ci, iters: plan.xs.clone() };
        let mut conds = plan.guard.clone();
        if let Some(x) = extra.get(&ci) {
            conds.extend(x.iter().cloned());
        }
        if conds.is_empty() {
            stmt
        } else {
            Node::Guard { cond: Formula::and(conds), body: Box::new(stmt) }
        }
    }

    fn build(
        &self,
        group: &[usize],
        p: usize,
        dyn_depth: usize,
        path: &mut Vec<String>,
        extra: &HashMap<usize, Vec<Formula>>,
    ) -> std::result::Result<Node, String> {
        let len = self.prog.schedules[group[0]].entries.len();
        if p == len {
            let mut leaves: Vec<Node> = group.iter().map(|&ci| self.leaf(ci, extra)).collect();
            return Ok(if leaves.len() == 1 { leaves.remove(0) } else { Node::Seq(leaves) });
        }
        let entries: Vec<&Entry> = group.iter().map(|&ci| &self.prog.schedules[ci].entries[p]).collect();
        if entries.iter().all(|e| e.is_static()) {
            let mut classes: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
            for (&ci, e) in group.iter().zip(&entries) {
                let Entry::Static(v) = e else { unreachable!() };
                classes.entry(*v).or_default().push(ci);
            }
            let mut kids = Vec::new();
            for g in classes.values() {
                kids.push(self.build(g, p + 1, dyn_depth, path, extra)?);
            }
            return Ok(if kids.len() == 1 { kids.remove(0) } else { Node::Seq(kids) });
        }
        if entries.iter().any(|e| e.is_static()) {
            return Err(format!("static and dynamic entries mixed at position {p}"));
        }
        let tag = entries[0].tag();
        if entries.iter().any(|e| e.tag() != tag) {
            return Err(format!("different tags share the loop at position {p}"));
        }
        let ph = placeholder(p);
        let per: Vec<&(Vec<Expr>, Vec<Expr>)> = group.iter().map(|&ci| &self.plans[ci].bounds[&p]).collect();
        let uniform = per.iter().all(|b| same_exprs(&b.0, &per[0].0) && same_exprs(&b.1, &per[0].1));
        let mut extra = extra.clone();
        let (lower, upper) = if uniform {
            (Bound::single(per[0].0.clone()), Bound::single(per[0].1.clone()))
        } else {
            for (&ci, (lows, ups)) in group.iter().zip(&per) {
                let g = extra.entry(ci).or_default();
                g.extend(lows.iter().map(|l| Formula::atom(Expr::var(ph.clone()), RelOp::Ge, l.clone())));
                g.extend(ups.iter().map(|u| Formula::atom(Expr::var(ph.clone()), RelOp::Le, u.clone())));
            }
            (
                Bound { alts: per.iter().map(|b| b.0.clone()).collect() },
                Bound { alts: per.iter().map(|b| b.1.clone()).collect() },
            )
        };
        let name = self.loop_name(&entries, p, path);
        path.push(name.clone());
        let mut body = self.build(group, p + 1, dyn_depth + 1, path, &extra)?;
        path.pop();
        for &ci in group.iter().rev() {
            for (d, sym, buf, idx) in self.plans[ci].binds.iter().rev() {
                if *d == dyn_depth + 1 {
                    body = Node::Bind { symbol: sym.clone(), buffer: buf.clone(), index: idx.clone(), body: Box::new(body) };
                }
            }
        }
        let mut node = Node::Loop { var: ph.clone(), lower, upper, tag, body: Box::new(body) };
        if let Node::Loop { var, body, .. } = &mut node {
            body.rename(&ph, &name);
            *var = name;
        }
        Ok(node)
    }

    fn loop_name(&self, entries: &[&Entry], p: usize, path: &[String]) -> String {
        let free = |n: &str| !self.reserved.iter().any(|r| r == n) && !path.iter().any(|q| q == n);
        let first = entries[0].expr().and_then(|e| e.as_var());
        if let Some(v) = first {
            if entries.iter().all(|e| e.expr().and_then(|x| x.as_var()) == Some(v)) && free(v) {
                return v.to_string();
            }
        }
        let c = format!("c{p}");
        if free(&c) {
            c
        } else {
            placeholder(p)
        }
    }
}

/// Lower `prog` without checking legality.
pub fn lower(prog: &Program) -> Result<LoopAst> {
    if prog.comps.is_empty() {
        return Ok(LoopAst { root: Node::Seq(Vec::new()), warnings: Vec::new() });
    }
    match closed_form(prog) {
        Ok(root) => Ok(LoopAst { root, warnings: Vec::new() }),
        Err(reason) => {
            let warning = format!("schedule outside the invertible fragment ({reason}); enumerating instances");
            log::warn!("{warning}");
            let inst = prog.timed_instances(&mut |b, _| {
                Err(Error::NonAffineComputation(format!("enumerated lowering cannot load bound from `{b}`")))
            })?;
            let list = inst.into_iter().map(|t| (t.comp, t.iter)).collect();
            Ok(LoopAst { root: Node::Instances(list), warnings: vec![warning] })
        }
    }
}

/// Lower after confirming that `prog` respects `deps`.
pub fn lower_checked(prog: &Program, deps: &DependenceGraph) -> Result<LoopAst> {
    match check_legality(prog, deps)? {
        Verdict::Legal => lower(prog),
        Verdict::Illegal(e) => Err(Error::Schedule(format!("illegal schedule, violates {e}"))),
    }
}

fn closed_form(prog: &Program) -> std::result::Result<Node, String> {
    let plans = (0..prog.comps.len()).map(|ci| plan(prog, ci)).collect::<std::result::Result<Vec<_>, _>>()?;
    let mut reserved: Vec<String> = prog.params.iter().map(|(n, _)| n.to_string()).collect();
    for c in &prog.comps {
        reserved.extend(c.opaque.iter().map(|o| o.symbol.clone()));
    }
    let b = Builder { prog, plans, reserved };
    let group: Vec<usize> = (0..prog.comps.len()).collect();
    let mut root = b.build(&group, 0, 0, &mut Vec::new(), &HashMap::new())?;
    for ci in group.iter().rev() {
        for (d, sym, buf, idx) in b.plans[*ci].binds.iter().rev() {
            if *d == 0 {
                root = Node::Bind { symbol: sym.clone(), buffer: buf.clone(), index: idx.clone(), body: Box::new(root) };
            }
        }
    }
    Ok(root)
}
