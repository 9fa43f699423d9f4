//! Maps between integer sets, `{ A(s) -> B(o) : f(s, o, p) }`.

use std::fmt;

use super::expr::Expr;
use super::formula::{fresh_name, Formula, RelOp};
use super::parse::parse_space;
use super::space::{fmt_space_prefix, merge_names, BoundingBox, IntegerSet, Params};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    in_name: String,
    in_vars: Vec<String>,
    out_name: String,
    out_vars: Vec<String>,
    params: Vec<String>,
    constraint: Formula,
}

fn fresh_vars(prefix: &str, n: usize, taken: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(n);
    for k in 0..n {
        let mut name = format!("{prefix}{k}");
        while taken.contains(&name) || out.contains(&name) {
            name = fresh_name(&name, taken);
        }
        out.push(name);
    }
    out
}

fn rename_map(from: &[String], to: &[String]) -> Vec<(String, Expr)> {
    from.iter()
        .zip(to)
        .map(|(a, b)| (a.clone(), Expr::var(b.clone())))
        .collect()
}

impl Relation {
    pub fn new(
        in_name: impl Into<String>,
        in_vars: Vec<String>,
        out_name: impl Into<String>,
        out_vars: Vec<String>,
        params: Vec<String>,
        constraint: Formula,
    ) -> Result<Self> {
        let all: Vec<&String> = in_vars.iter().chain(&out_vars).collect();
        for (i, v) in all.iter().enumerate() {
            if all[..i].contains(v) {
                return Err(Error::Invalid(format!("tuple variable `{v}` repeated")));
            }
            if params.contains(v) {
                return Err(Error::Invalid(format!("`{v}` is both a tuple variable and a parameter")));
            }
        }
        let free: Vec<String> = constraint
            .free_vars()
            .into_iter()
            .filter(|v| !in_vars.contains(v) && !out_vars.contains(v))
            .collect();
        let params = merge_names(&params, &free);
        Ok(Relation {
            in_name: in_name.into(),
            in_vars,
            out_name: out_name.into(),
            out_vars,
            params,
            constraint,
        })
    }

    /// Parse `{A(i,j) -> B(e1, e2) : f}`. Range entries that are not fresh
    /// variables are bound through equalities on generated names.
    pub fn parse(text: &str) -> Result<Self> {
        let raw = parse_space(text)?;
        let Some((out_name, out_entries)) = raw.range else {
            return Err(Error::Syntax { pos: 0, msg: "expected a relation, found a set".into() });
        };
        let (in_name, in_entries) = raw.domain;
        let mut in_vars = Vec::new();
        for (e, pos) in in_entries {
            match e {
                Expr::Var(v) if !in_vars.contains(&v) => in_vars.push(v),
                other => {
                    return Err(Error::Syntax {
                        pos,
                        msg: format!("domain tuple entries must be distinct variables, found `{other}`"),
                    })
                }
            }
        }
        let mut taken: Vec<String> = in_vars.clone();
        taken.extend(raw.params.iter().cloned());
        taken.extend(raw.constraint.free_vars());
        for (e, _) in &out_entries {
            taken.extend(e.vars());
        }
        let mut out_vars = Vec::new();
        let mut eqs = Vec::new();
        for (k, (e, _)) in out_entries.into_iter().enumerate() {
            match e {
                Expr::Var(v)
                    if !in_vars.contains(&v) && !raw.params.contains(&v) && !out_vars.contains(&v) =>
                {
                    out_vars.push(v)
                }
                other => {
                    let fresh = fresh_vars(&format!("_o{k}_"), 1, &taken).remove(0);
                    taken.push(fresh.clone());
                    eqs.push(Formula::Atom(Expr::var(fresh.clone()), RelOp::Eq, other));
                    out_vars.push(fresh);
                }
            }
        }
        let constraint = Formula::and(eqs.into_iter().chain([raw.constraint]));
        Relation::new(
            in_name.unwrap_or_default(),
            in_vars,
            out_name.unwrap_or_default(),
            out_vars,
            raw.params,
            constraint,
        )
    }

    pub fn identity(name: &str, dim: usize) -> Relation {
        let ins: Vec<String> = (0..dim).map(|k| format!("a{k}")).collect();
        let outs: Vec<String> = (0..dim).map(|k| format!("b{k}")).collect();
        let f = Formula::and(
            ins.iter()
                .zip(&outs)
                .map(|(a, b)| Formula::atom(Expr::var(b.clone()), RelOp::Eq, Expr::var(a.clone()))),
        );
        Relation::new(name, ins, name, outs, Vec::new(), f).expect("distinct names")
    }

    pub fn in_name(&self) -> &str {
        &self.in_name
    }

    pub fn out_name(&self) -> &str {
        &self.out_name
    }

    pub fn in_dim(&self) -> usize {
        self.in_vars.len()
    }

    pub fn out_dim(&self) -> usize {
        self.out_vars.len()
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn constraint(&self) -> &Formula {
        &self.constraint
    }

    pub fn contains(&self, src: &[i64], dst: &[i64], params: &Params) -> Result<bool> {
        if src.len() != self.in_dim() {
            return Err(Error::Arity { expected: self.in_dim(), got: src.len() });
        }
        if dst.len() != self.out_dim() {
            return Err(Error::Arity { expected: self.out_dim(), got: dst.len() });
        }
        let mut env = params.env_for(&self.params)?;
        for (v, x) in self.in_vars.iter().zip(src).chain(self.out_vars.iter().zip(dst)) {
            env.push(v.clone(), *x);
        }
        self.constraint.eval(&mut env, params.universe())
    }

    /// All related pairs with `src` in `in_box` and `dst` in `out_box`.
    pub fn enumerate(
        &self,
        params: &Params,
        in_box: &BoundingBox,
        out_box: &BoundingBox,
    ) -> Result<Vec<(Vec<i64>, Vec<i64>)>> {
        let mut out = Vec::new();
        for s in in_box.points()? {
            for d in out_box.points()? {
                if self.contains(&s, &d, params)? {
                    out.push((s.clone(), d));
                }
            }
        }
        Ok(out)
    }

    /// The set of sources that have at least one image.
    pub fn domain(&self) -> IntegerSet {
        IntegerSet::new(
            self.in_name.clone(),
            self.in_vars.clone(),
            self.params.clone(),
            Formula::exists(&self.out_vars, self.constraint.clone()),
        )
        .expect("relation names are distinct")
    }

    pub fn range(&self) -> IntegerSet {
        IntegerSet::new(
            self.out_name.clone(),
            self.out_vars.clone(),
            self.params.clone(),
            Formula::exists(&self.in_vars, self.constraint.clone()),
        )
        .expect("relation names are distinct")
    }

    pub fn inverse(&self) -> Relation {
        Relation {
            in_name: self.out_name.clone(),
            in_vars: self.out_vars.clone(),
            out_name: self.in_name.clone(),
            out_vars: self.in_vars.clone(),
            params: self.params.clone(),
            constraint: self.constraint.clone(),
        }
    }

    /// Image of `s` under the relation.
    pub fn apply(&self, s: &IntegerSet) -> Result<IntegerSet> {
        if s.name() != self.in_name || s.dim() != self.in_dim() {
            return Err(Error::SpaceMismatch(format!(
                "cannot apply relation on {}/{} to set {}/{}",
                self.in_name,
                self.in_dim(),
                s.name(),
                s.dim()
            )));
        }
        let params = merge_names(&self.params, s.params());
        let taken = merge_names(&merge_names(&self.out_vars, &params), &self.in_vars);
        let mid = fresh_vars("_d", self.in_dim(), &taken);
        let src = s.renamed(&mid)?;
        let rel = self.constraint.substitute(&rename_map(&self.in_vars, &mid));
        let body = Formula::and([src.constraint().clone(), rel]);
        IntegerSet::new(
            self.out_name.clone(),
            self.out_vars.clone(),
            params,
            Formula::exists(&mid, body),
        )
    }
}

/// `outer ∘ inner`: relate `a` to `c` when `inner(a, b)` and `outer(b, c)`.
pub fn compose(outer: &Relation, inner: &Relation) -> Result<Relation> {
    if inner.out_name != outer.in_name || inner.out_dim() != outer.in_dim() {
        return Err(Error::SpaceMismatch(format!(
            "cannot compose {}/{} after {}/{}",
            outer.in_name,
            outer.in_dim(),
            inner.out_name,
            inner.out_dim()
        )));
    }
    let params = merge_names(&inner.params, &outer.params);
    let mut taken = merge_names(&inner.in_vars, &params);
    taken = merge_names(&taken, &inner.out_vars);
    taken = merge_names(&taken, &outer.in_vars);
    taken = merge_names(&taken, &outer.out_vars);
    let mid = fresh_vars("_m", inner.out_dim(), &taken);
    taken = merge_names(&taken, &mid);
    // Output names must not collide with the input names kept from `inner`.
    let outs: Vec<String> = if outer.out_vars.iter().any(|v| inner.in_vars.contains(v)) {
        fresh_vars("_c", outer.out_dim(), &taken)
    } else {
        outer.out_vars.clone()
    };
    let first = inner.constraint.substitute(&rename_map(&inner.out_vars, &mid));
    let mut second_map = rename_map(&outer.in_vars, &mid);
    second_map.extend(rename_map(&outer.out_vars, &outs));
    let second = outer.constraint.substitute(&second_map);
    Relation::new(
        inner.in_name.clone(),
        inner.in_vars.clone(),
        outer.out_name.clone(),
        outs,
        params,
        Formula::exists(&mid, Formula::and([first, second])),
    )
}

/// Relation holding `(a, b)` iff `a` strictly precedes `b` lexicographically.
pub fn lex_lt_relation(d: usize) -> Result<Relation> {
    if d == 0 {
        return Err(Error::Invalid("lexicographic order needs at least one dimension".into()));
    }
    let a: Vec<String> = (0..d).map(|k| format!("a{k}")).collect();
    let b: Vec<String> = (0..d).map(|k| format!("b{k}")).collect();
    let cases = (0..d).map(|k| {
        let eqs = (0..k).map(|p| Formula::atom(Expr::var(a[p].clone()), RelOp::Eq, Expr::var(b[p].clone())));
        let lt = Formula::atom(Expr::var(a[k].clone()), RelOp::Lt, Expr::var(b[k].clone()));
        Formula::and(eqs.chain([lt]))
    });
    let f = Formula::or(cases.collect::<Vec<_>>());
    Relation::new("L", a, "L", b, Vec::new(), f)
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_space_prefix(f, &self.params)?;
        write!(
            f,
            "{{ {}({}) -> {}({})",
            self.in_name,
            self.in_vars.join(", "),
            self.out_name,
            self.out_vars.join(", ")
        )?;
        if self.constraint != Formula::True {
            write!(f, " : {}", self.constraint)?;
        }
        f.write_str(" }")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shift() -> Relation {
        Relation::parse("{S1(i,j) -> S1(i+2,j+2): 1<=i<=3 and 1<=j<=2}").unwrap()
    }

    #[test]
    fn shift_map_image() {
        let s = IntegerSet::parse("{S1(i,j): 1<=i<=3 and 1<=j<=2}").unwrap();
        let img = shift().apply(&s).unwrap();
        let mut pts = img.enumerate(&Params::new(), &BoundingBox::cube(2, 0, 10)).unwrap();
        pts.sort();
        let mut want = vec![
            vec![3, 3], vec![4, 3], vec![5, 3], vec![3, 4], vec![4, 4], vec![5, 4],
        ];
        want.sort();
        assert_eq!(pts, want);
    }

    #[test]
    fn apply_checks_space() {
        let s = IntegerSet::parse("{S2(i,j): 1<=i<=3}").unwrap();
        assert!(matches!(shift().apply(&s), Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn lex_order_small_cases() {
        let r1 = lex_lt_relation(1).unwrap();
        let p = Params::new();
        assert!(r1.contains(&[3], &[5], &p).unwrap());
        assert!(!r1.contains(&[5], &[3], &p).unwrap());
        let r2 = lex_lt_relation(2).unwrap();
        assert!(r2.contains(&[1, 9], &[2, 0], &p).unwrap());
        assert!(lex_lt_relation(0).is_err());
    }

    #[test]
    fn swap_relation_via_fresh_names() {
        let r = Relation::parse("{A(i,j) -> A(j,i)}").unwrap();
        let p = Params::new();
        assert!(r.contains(&[1, 2], &[2, 1], &p).unwrap());
        assert!(!r.contains(&[1, 2], &[1, 2], &p).unwrap());
    }

    #[test]
    fn compose_with_identity() {
        let m = shift();
        let c = compose(&Relation::identity("S1", 2), &m).unwrap();
        let p = Params::new();
        let b = BoundingBox::cube(2, 0, 6);
        assert_eq!(c.enumerate(&p, &b, &b).unwrap(), m.enumerate(&p, &b, &b).unwrap());
    }

    #[test]
    fn domain_and_range() {
        let m = shift();
        let p = Params::new();
        let b = BoundingBox::cube(2, 0, 6);
        assert_eq!(m.domain().enumerate(&p, &b).unwrap().len(), 6);
        assert!(m.range().is_element(&[5, 4], &p).unwrap());
        assert!(!m.range().is_element(&[1, 1], &p).unwrap());
    }
}
