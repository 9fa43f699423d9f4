//! Affine inequality systems and Fourier–Motzkin projection.
//!
//! Used for loop-bound generation and for bounding boxes of iteration
//! domains. Every constraint reads `Σ coeff[v]·v + constant >= 0` over a
//! fixed variable order; bounds come out as quasi-affine expressions in the
//! variables that remain.

use super::expr::{Divisor, Expr, Linear};
use super::formula::{Formula, RelOp};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub coeffs: Vec<i64>,
    pub constant: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Constraint {
    fn normalized(mut self) -> Constraint {
        let g = self.coeffs.iter().fold(0, |g, c| gcd(g, *c));
        if g > 1 {
            for c in &mut self.coeffs {
                *c /= g;
            }
            self.constant = self.constant.div_euclid(g);
        }
        self
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0)
    }

    pub fn involves(&self, idx: usize) -> bool {
        self.coeffs[idx] != 0
    }

    /// Innermost variable (highest index) with a non-zero coefficient.
    pub fn innermost(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| *c != 0)
    }
}

/// A conjunction of affine inequalities over named variables.
#[derive(Clone, Debug)]
pub struct System {
    pub vars: Vec<String>,
    pub cons: Vec<Constraint>,
}

/// Why a formula could not be turned into an inequality system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NotAffine {
    Structure,
    UnknownVar(String),
}

impl System {
    pub fn new(vars: Vec<String>) -> Self {
        System { vars, cons: Vec::new() }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    fn linear_to_row(&self, l: &Linear) -> Result<Vec<i64>, NotAffine> {
        let mut row = vec![0; self.vars.len()];
        for (t, c) in &l.terms {
            let Some(name) = t.as_var() else { return Err(NotAffine::Structure) };
            let idx = self.index(name).ok_or_else(|| NotAffine::UnknownVar(name.to_string()))?;
            row[idx] += c;
        }
        Ok(row)
    }

    /// Add `lhs op rhs`.
    pub fn add_atom(&mut self, lhs: &Expr, op: RelOp, rhs: &Expr) -> Result<(), NotAffine> {
        // diff = rhs - lhs
        let diff = Linear::of(&(rhs.clone() - lhs.clone()));
        let row = self.linear_to_row(&diff)?;
        let k = diff.constant;
        let mut push = |coeffs: Vec<i64>, constant: i64| {
            self.cons.push(Constraint { coeffs, constant }.normalized());
        };
        let neg = |r: &[i64]| r.iter().map(|c| -c).collect::<Vec<_>>();
        match op {
            RelOp::Le => push(row, k),
            RelOp::Lt => push(row, k - 1),
            RelOp::Ge => push(neg(&row), -k),
            RelOp::Gt => push(neg(&row), -k - 1),
            RelOp::Eq => {
                push(row.clone(), k);
                push(neg(&row), -k);
            }
        }
        Ok(())
    }

    /// Add every top-level conjunct of `f`. With `relaxed`, conjuncts that
    /// are not affine atoms are skipped, producing an over-approximation.
    pub fn add_formula(&mut self, f: &Formula, relaxed: bool) -> Result<(), NotAffine> {
        for c in f.conjuncts() {
            let res = match c {
                Formula::Atom(a, op, b) => self.add_atom(a, *op, b),
                _ => Err(NotAffine::Structure),
            };
            match res {
                Ok(()) => {}
                Err(NotAffine::Structure) if relaxed => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    /// Fold a concrete value for variable `idx` into the constants.
    pub fn fix(&mut self, idx: usize, value: i64) {
        for c in &mut self.cons {
            c.constant += c.coeffs[idx] * value;
            c.coeffs[idx] = 0;
        }
    }

    /// Constraints implied after projecting out variable `idx`.
    pub fn eliminate(&self, idx: usize) -> Vec<Constraint> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut out = Vec::new();
        for c in &self.cons {
            match c.coeffs[idx].signum() {
                1 => lower.push(c),
                -1 => upper.push(c),
                _ => out.push(c.clone()),
            }
        }
        for l in &lower {
            for u in &upper {
                let a = l.coeffs[idx];
                let b = -u.coeffs[idx];
                let coeffs = l
                    .coeffs
                    .iter()
                    .zip(&u.coeffs)
                    .map(|(x, y)| b * x + a * y)
                    .collect();
                let constant = b * l.constant + a * u.constant;
                out.push(Constraint { coeffs, constant }.normalized());
            }
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|c| !(c.is_constant() && c.constant >= 0) && seen.insert(c.clone()));
        out
    }

    pub fn projected(&self, idx: usize) -> System {
        System { vars: self.vars.clone(), cons: self.eliminate(idx) }
    }

    pub fn is_trivially_infeasible(&self) -> bool {
        self.cons.iter().any(|c| c.is_constant() && c.constant < 0)
    }

    fn rest_expr(&self, c: &Constraint, skip: usize, sign: i64) -> Expr {
        let mut l = Linear::zero();
        for (i, k) in c.coeffs.iter().enumerate() {
            if i != skip && *k != 0 {
                l.terms.push((Expr::var(self.vars[i].clone()), sign * k));
            }
        }
        l.constant = sign * c.constant;
        l.to_expr()
    }

    /// Lower and upper bounds on variable `idx` from the constraints that
    /// mention it; `lower <= v <= upper` for every listed expression.
    pub fn bounds(&self, idx: usize) -> (Vec<Expr>, Vec<Expr>) {
        let mut lows = Vec::new();
        let mut ups = Vec::new();
        for c in &self.cons {
            let a = c.coeffs[idx];
            if a > 0 {
                // a*v >= -rest  ->  v >= ceil(-rest / a)
                let num = self.rest_expr(c, idx, -1);
                lows.push(ceil_div_expr(num, a));
            } else if a < 0 {
                // -|a|*v + rest >= 0  ->  v <= floor(rest / |a|)
                let num = self.rest_expr(c, idx, 1);
                ups.push(floor_div_expr(num, -a));
            }
        }
        dedup(&mut lows);
        dedup(&mut ups);
        (lows, ups)
    }
}

fn dedup(v: &mut Vec<Expr>) {
    let mut out: Vec<Expr> = Vec::new();
    for e in v.drain(..) {
        if !out.iter().any(|o| o.same_as(&e)) {
            out.push(e);
        }
    }
    *v = out;
}

pub fn floor_div_expr(num: Expr, d: i64) -> Expr {
    if d == 1 {
        num.normalize()
    } else {
        num.normalize().fdiv(Divisor::new(d).expect("positive"))
    }
}

pub fn ceil_div_expr(num: Expr, d: i64) -> Expr {
    if d == 1 {
        num.normalize()
    } else {
        (num + (d - 1)).normalize().fdiv(Divisor::new(d).expect("positive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::set::parse::parse_formula;

    fn system(vars: &[&str], f: &str) -> System {
        let mut s = System::new(vars.iter().map(|v| v.to_string()).collect());
        s.add_formula(&parse_formula(f).unwrap(), false).unwrap();
        s
    }

    #[test]
    fn skewed_wavefront_bounds() {
        // w = t + l, so t = w - l
        let s = system(&["w", "l", "L", "T"], "0 <= l <= L - 1 and 0 <= w - l <= T - 1");
        let (lo, up) = s.bounds(1);
        let lo: Vec<String> = lo.iter().map(|e| e.to_string()).collect();
        let up: Vec<String> = up.iter().map(|e| e.to_string()).collect();
        assert_eq!(lo, vec!["0", "w - T + 1"]);
        assert_eq!(up, vec!["L - 1", "w"]);
        let outer = s.projected(1);
        let (lo, up) = outer.bounds(0);
        assert_eq!(lo.iter().map(|e| e.to_string()).collect::<Vec<_>>(), vec!["0"]);
        assert_eq!(up.iter().map(|e| e.to_string()).collect::<Vec<_>>(), vec!["L + T - 2"]);
    }

    #[test]
    fn non_unit_coefficients_round_inward() {
        let s = system(&["x"], "2x >= 3 and 3x <= 10");
        let (lo, up) = s.bounds(0);
        assert_eq!(lo[0].to_string(), "2");
        assert_eq!(up[0].to_string(), "3");
    }

    #[test]
    fn relaxed_skips_non_affine_conjuncts() {
        let mut s = System::new(vec!["i".into()]);
        let f = parse_formula("0 <= i < 10 and i mod 3 = 0").unwrap();
        assert_eq!(s.add_formula(&f, false), Err(NotAffine::Structure));
        let mut s = System::new(vec!["i".into()]);
        s.add_formula(&f, true).unwrap();
        assert_eq!(s.cons.len(), 2);
    }

    #[test]
    fn infeasible_detected_after_projection() {
        let s = system(&["i"], "1 <= i and i <= 0");
        assert!(s.projected(0).is_trivially_infeasible());
    }
}
