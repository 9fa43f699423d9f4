//! Exact scanning of an iteration domain in lexicographic order.
//!
//! Per-dimension bounds come from Fourier–Motzkin projection of the affine
//! conjuncts; every candidate point is then checked against the full
//! constraint, so the scan is exact even when the projection is loose.

use super::Computation;
use crate::error::{Error, Result};
use crate::set::poly::System;
use crate::set::{Env, Expr, Params};

impl Computation {
    /// Call `f` once per domain point with iterators, parameters and opaque
    /// symbols bound in the environment.
    pub fn scan(
        &self,
        params: &Params,
        load: &mut dyn FnMut(&str, &[i64]) -> Result<i64>,
        f: &mut dyn FnMut(&Env) -> Result<()>,
    ) -> Result<()> {
        let dims = self.iterators().to_vec();
        let mut names = dims.clone();
        for v in self.domain.constraint().free_vars() {
            if !names.contains(&v) {
                names.push(v);
            }
        }
        let mut sys = System::new(names);
        sys.add_formula(self.domain.constraint(), true).map_err(|e| {
            Error::Invalid(format!("domain of {} is not scannable: {e:?}", self.name))
        })?;
        let mut bounds = vec![(Vec::new(), Vec::new()); dims.len()];
        for k in (0..dims.len()).rev() {
            bounds[k] = sys.bounds(k);
            sys = sys.projected(k);
        }
        if sys.is_trivially_infeasible() {
            return Ok(());
        }
        // Opaque symbols become available once their index variables are bound.
        let mut ready = vec![Vec::new(); dims.len() + 1];
        for (oi, o) in self.opaque.iter().enumerate() {
            let depth = o
                .index
                .iter()
                .flat_map(|e| e.vars())
                .filter_map(|v| dims.iter().position(|d| *d == v))
                .map(|p| p + 1)
                .max()
                .unwrap_or(0);
            ready[depth].push(oi);
        }
        let mut env = Env::new();
        for (n, v) in params.iter() {
            env.push(n, v);
        }
        let mut cx = ScanCx { comp: self, params, bounds, ready, load, f };
        cx.rec(0, &mut env)
    }
}

struct ScanCx<'a> {
    comp: &'a Computation,
    params: &'a Params,
    bounds: Vec<(Vec<Expr>, Vec<Expr>)>,
    ready: Vec<Vec<usize>>,
    load: &'a mut dyn FnMut(&str, &[i64]) -> Result<i64>,
    f: &'a mut dyn FnMut(&Env) -> Result<()>,
}

impl ScanCx<'_> {
    fn rec(&mut self, depth: usize, env: &mut Env) -> Result<()> {
        let mark = env.len();
        for &oi in &self.ready[depth] {
            let o = &self.comp.opaque[oi];
            let at = o.index.iter().map(|e| e.eval(&*env)).collect::<Result<Vec<_>>>()?;
            let v = (self.load)(&o.buffer, &at)?;
            env.push(o.symbol.clone(), v);
        }
        let dims = self.comp.iterators();
        if depth == dims.len() {
            let ok = self.comp.domain.constraint().eval(env, self.params.universe())?;
            if ok {
                (self.f)(env)?;
            }
            env.truncate(mark);
            return Ok(());
        }
        let (lows, ups) = &self.bounds[depth];
        if lows.is_empty() || ups.is_empty() {
            return Err(Error::UnboundedBox(depth));
        }
        let mut lo = i64::MIN;
        for e in lows {
            lo = lo.max(e.eval(&*env)?);
        }
        let mut hi = i64::MAX;
        for e in ups {
            hi = hi.min(e.eval(&*env)?);
        }
        let slot = env.len();
        env.push(dims[depth].clone(), lo);
        let mut v = lo;
        while v <= hi {
            env.set_at(slot, v);
            self.rec(depth + 1, env)?;
            v += 1;
        }
        env.truncate(mark);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::schedule::{Access, BoundRole, Computation, OpaqueBound, Value};
    use crate::set::{BoundingBox, IntegerSet, Params};

    fn points(c: &Computation, p: &Params) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        c.scan(p, &mut |_, _| unreachable!(), &mut |env| {
            out.push(c.iteration(env)?);
            Ok(())
        })
        .unwrap();
        out
    }

    #[test]
    fn matches_box_enumeration() {
        for text in [
            "[L, T] -> {S(l,t): 0<=l<L and 0<=t<T}",
            "[L, T] -> {S(w,l): 0<=l<L and 0<=w-l<T}",
            "{S(i,j): 0<=i<7 and 0<=j<=i and (i+j) mod 3 = 1}",
            "{S(i): 0<=i<=9 and (exists k. i = 2k)}",
            "{S(i,j): 1<=i<=0 and 0<=j<3}",
        ] {
            let d = IntegerSet::parse(text).unwrap();
            let p = Params::new().with("L", 3).with("T", 4);
            let c = Computation::new(d.clone(), Access::affine("A", vec![]), Value::Int(0));
            let want = d.enumerate(&p, &BoundingBox::cube(d.dim(), -2, 12)).unwrap();
            assert_eq!(points(&c, &p), want, "{text}");
        }
    }

    #[test]
    fn opaque_bounds_are_loaded() {
        let d = IntegerSet::parse("{S(n,j): 0<=n<3 and lo<=j<hi}").unwrap();
        let rowptr = [0i64, 2, 2, 5];
        let c = Computation::new(d, Access::affine("A", vec![]), Value::Int(0))
            .with_opaque(OpaqueBound {
                symbol: "lo".into(),
                role: BoundRole::Lower,
                buffer: "rowptr".into(),
                index: vec!["n".into()],
            })
            .with_opaque(OpaqueBound {
                symbol: "hi".into(),
                role: BoundRole::Upper,
                buffer: "rowptr".into(),
                index: vec![crate::set::Expr::var("n") + 1],
            });
        let mut got = Vec::new();
        c.scan(&Params::new(), &mut |_, at| Ok(rowptr[at[0] as usize]), &mut |env| {
            got.push(c.iteration(env)?);
            Ok(())
        })
        .unwrap();
        assert_eq!(got, vec![vec![0, 0], vec![0, 1], vec![2, 2], vec![2, 3], vec![2, 4]]);
    }
}
