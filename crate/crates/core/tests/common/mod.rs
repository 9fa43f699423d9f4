//! Random Presburger sets with an independent membership predicate.
#![allow(dead_code)]

use rand::Rng;

pub const VARS: [&str; 3] = ["i", "j", "k"];

#[derive(Clone, Debug)]
pub enum Pred {
    /// `sum(coeffs * x) + c  op  0` with op in {<=, <, =, >=}.
    Lin(Vec<i64>, i64, u8),
    /// `x_v mod m = r`
    Mod(usize, i64, i64),
    /// `exists e in 0..=8. x_v = a*e + c`
    Exists(usize, i64, i64),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
}

impl Pred {
    pub fn holds(&self, x: &[i64]) -> bool {
        match self {
            Pred::Lin(a, c, op) => {
                let s: i64 = a.iter().zip(x).map(|(a, x)| a * x).sum::<i64>() + c;
                match op {
                    0 => s <= 0,
                    1 => s < 0,
                    2 => s == 0,
                    _ => s >= 0,
                }
            }
            Pred::Mod(v, m, r) => x[*v].rem_euclid(*m) == *r,
            Pred::Exists(v, a, c) => (0..=8).any(|e| x[*v] == a * e + c),
            Pred::And(p, q) => p.holds(x) && q.holds(x),
            Pred::Or(p, q) => p.holds(x) || q.holds(x),
            Pred::Not(p) => !p.holds(x),
        }
    }

    /// Text accepted by the set parser.
    pub fn text(&self) -> String {
        match self {
            Pred::Lin(a, c, op) => {
                let side = |sign: i64| {
                    let mut terms: Vec<String> = a
                        .iter()
                        .zip(VARS)
                        .filter(|(a, _)| a.signum() == sign)
                        .map(|(a, v)| format!("{}*{v}", a.abs()))
                        .collect();
                    if c.signum() == sign {
                        terms.push(c.abs().to_string());
                    }
                    if terms.is_empty() {
                        "0".to_string()
                    } else {
                        terms.join(" + ")
                    }
                };
                let op = ["<=", "<", "=", ">="][*op as usize];
                format!("{} {op} {}", side(1), side(-1))
            }
            Pred::Mod(v, m, r) => format!("{} mod {m} = {r}", VARS[*v]),
            Pred::Exists(v, a, c) => format!("(exists e. 0 <= e <= 8 and {} = {a}*e + {c})", VARS[*v]),
            Pred::And(p, q) => format!("({} and {})", p.text(), q.text()),
            Pred::Or(p, q) => format!("({} or {})", p.text(), q.text()),
            Pred::Not(p) => format!("not ({})", p.text()),
        }
    }
}

pub fn random_pred(rng: &mut impl Rng, dim: usize, depth: u32) -> Pred {
    let leaf = depth == 0 || rng.gen_bool(0.35);
    if leaf {
        match rng.gen_range(0..6) {
            0 => Pred::Mod(rng.gen_range(0..dim), rng.gen_range(2..=4), rng.gen_range(0..2)),
            1 => Pred::Exists(rng.gen_range(0..dim), rng.gen_range(1..=3), rng.gen_range(-2..=2)),
            _ => {
                let a = (0..dim).map(|_| rng.gen_range(-2..=2)).collect();
                Pred::Lin(a, rng.gen_range(-8..=8), rng.gen_range(0..4))
            }
        }
    } else {
        let p = Box::new(random_pred(rng, dim, depth - 1));
        match rng.gen_range(0..5) {
            0 | 1 => Pred::And(p, Box::new(random_pred(rng, dim, depth - 1))),
            2 | 3 => Pred::Or(p, Box::new(random_pred(rng, dim, depth - 1))),
            _ => Pred::Not(p),
        }
    }
}

pub fn set_text(name: &str, dim: usize, p: &Pred) -> String {
    format!("{{{name}({}): {}}}", VARS[..dim].join(", "), p.text())
}

/// Points of `[lo..=hi]^dim` in lexicographic order.
pub fn box_points(dim: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out.into_iter().flat_map(|p| (lo..=hi).map(move |x| [p.clone(), vec![x]].concat())).collect();
    }
    out
}

pub fn brute(dim: usize, lo: i64, hi: i64, f: impl Fn(&[i64]) -> bool) -> Vec<Vec<i64>> {
    box_points(dim, lo, hi).into_iter().filter(|p| f(p)).collect()
}
