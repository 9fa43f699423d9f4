//! Text notation for expressions, formulas, sets and relations.
//!
//! ```text
//! set       := [ '[' params ']' '->' ] '{' tuple [ ':' formula ] '}'
//! relation  := [ '[' params ']' '->' ] '{' tuple '->' tuple [ ':' formula ] '}'
//! tuple     := [name] '(' [expr {',' expr}] ')'
//! formula   := conj {'or' conj}
//! conj      := unary {'and' unary}
//! unary     := 'not' unary | ('exists'|'forall') var {',' var} '.' formula
//!            | '(' formula ')' | 'true' | 'false' | expr relop expr {relop expr}
//! relop     := '<' | '<=' | '=' | '==' | '>=' | '>' | '!='
//! expr      := term {('+'|'-') term}
//! term      := factor {('*' factor) | ('/' lit) | (('%'|'mod') lit)}
//! factor    := '-' factor | int [var | '(' expr ')'] | var | '(' expr ')'
//! ```
//!
//! `∧`, `∨`, `¬`, `≤`, `≥`, `≠`, `&&`, `||` are accepted as aliases.

use super::expr::{Divisor, Expr};
use super::formula::{Formula, RelOp};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: usize,
}

const KEYWORDS: &[&str] = &["and", "or", "not", "exists", "forall", "mod", "true", "false"];

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].1.is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().map(|(_, c)| c).collect();
            let v = s.parse::<i64>().map_err(|_| Error::Syntax {
                pos,
                msg: format!("integer literal `{s}` out of range"),
            })?;
            out.push(Token { tok: Tok::Int(v), pos });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].1.is_alphanumeric() || chars[i].1 == '_' || chars[i].1 == '\'')
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().map(|(_, c)| c).collect();
            out.push(Token { tok: Tok::Ident(s), pos });
            continue;
        }
        let next = chars.get(i + 1).map(|(_, c)| *c);
        let (sym, len): (&'static str, usize) = match (c, next) {
            ('<', Some('=')) => ("<=", 2),
            ('>', Some('=')) => (">=", 2),
            ('=', Some('=')) => ("=", 2),
            ('!', Some('=')) => ("!=", 2),
            ('-', Some('>')) => ("->", 2),
            ('&', Some('&')) => ("and", 2),
            ('|', Some('|')) => ("or", 2),
            ('<', _) => ("<", 1),
            ('>', _) => (">", 1),
            ('=', _) => ("=", 1),
            ('!', _) => ("not", 1),
            ('≤', _) => ("<=", 1),
            ('≥', _) => (">=", 1),
            ('≠', _) => ("!=", 1),
            ('∧', _) => ("and", 1),
            ('∨', _) => ("or", 1),
            ('¬', _) => ("not", 1),
            ('→', _) => ("->", 1),
            ('+', _) => ("+", 1),
            ('-', _) => ("-", 1),
            ('*', _) => ("*", 1),
            ('·', _) => ("*", 1),
            ('/', _) => ("/", 1),
            ('%', _) => ("%", 1),
            ('(', _) => ("(", 1),
            (')', _) => (")", 1),
            ('{', _) => ("{", 1),
            ('}', _) => ("}", 1),
            ('[', _) => ("[", 1),
            (']', _) => ("]", 1),
            (',', _) => (",", 1),
            (':', _) => (":", 1),
            ('|', _) => (":", 1),
            ('.', _) => (".", 1),
            _ => {
                return Err(Error::Syntax { pos, msg: format!("unexpected character `{c}`") });
            }
        };
        out.push(Token { tok: Tok::Sym(sym), pos });
        i += len;
    }
    Ok(out)
}

/// Recursive-descent parser; named constants may appear as divisors.
pub struct Parser<'c> {
    toks: Vec<Token>,
    at: usize,
    end: usize,
    constants: &'c [(String, i64)],
}

impl<'c> Parser<'c> {
    pub fn new(text: &str, constants: &'c [(String, i64)]) -> Result<Self> {
        let mut toks = lex(text)?;
        // Keywords are lexed as identifiers; promote them to symbols.
        for t in &mut toks {
            if let Tok::Ident(s) = &t.tok {
                if let Some(k) = KEYWORDS.iter().find(|k| **k == s.as_str()) {
                    t.tok = Tok::Sym(k);
                }
            }
        }
        Ok(Parser { toks, at: 0, end: text.len(), constants })
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.pos).unwrap_or(self.end)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{s}`")))
        }
    }

    fn syntax(&self, msg: String) -> Error {
        let found = match self.peek() {
            Some(Tok::Int(v)) => format!("`{v}`"),
            Some(Tok::Ident(s)) => format!("`{s}`"),
            Some(Tok::Sym(s)) => format!("`{s}`"),
            None => "end of input".to_string(),
        };
        Error::Syntax { pos: self.pos(), msg: format!("{msg}, found {found}") }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.at += 1;
                Ok(s)
            }
            _ => Err(self.syntax("expected identifier".into())),
        }
    }

    pub fn finish(&self) -> Result<()> {
        if self.at == self.toks.len() {
            Ok(())
        } else {
            Err(self.syntax("unexpected trailing input".into()))
        }
    }

    pub fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat("+") {
                acc = acc + self.term()?;
            } else if self.eat("-") {
                acc = acc - self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            let pos = self.pos();
            if self.eat("*") {
                let rhs = self.factor()?;
                acc = product(acc, rhs, pos)?;
            } else if self.eat("/") {
                let d = self.divisor(pos)?;
                acc = acc.fdiv(d);
            } else if self.eat("%") || self.eat("mod") {
                let d = self.divisor(pos)?;
                acc = acc.fmod(d);
            } else {
                return Ok(acc);
            }
        }
    }

    fn divisor(&mut self, op_pos: usize) -> Result<Divisor> {
        let pos = self.pos();
        if let Some(Tok::Ident(name)) = self.peek().cloned() {
            if let Some((_, v)) = self.constants.iter().find(|(n, _)| *n == name) {
                self.at += 1;
                return Divisor::named(*v, name.clone()).map_err(|_| Error::NonAffine {
                    pos,
                    msg: format!("constant `{name}` = {v} is not a positive divisor"),
                });
            }
        }
        let e = self.factor()?;
        match e.normalize().as_const() {
            Some(v) if v > 0 => Divisor::new(v),
            Some(v) => Err(Error::NonAffine {
                pos: op_pos,
                msg: format!("divisor must be a positive literal, got {v}"),
            }),
            None => Err(Error::NonAffine {
                pos: op_pos,
                msg: format!("divisor `{e}` is not an integer literal"),
            }),
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat("-") {
            let inner = self.factor()?;
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                other => -other,
            });
        }
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.at += 1;
                // implicit product: `2k`, `3(i+1)`
                match self.peek() {
                    Some(Tok::Ident(_)) => {
                        let name = self.ident()?;
                        Ok(Expr::var(name).scaled(v))
                    }
                    Some(Tok::Sym("(")) => {
                        self.at += 1;
                        let e = self.expr()?;
                        self.expect(")")?;
                        Ok(e.scaled(v))
                    }
                    _ => Ok(Expr::Const(v)),
                }
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                Ok(Expr::Var(name))
            }
            Some(Tok::Sym("(")) => {
                self.at += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => Err(self.syntax("expected expression".into())),
        }
    }

    fn relop(&mut self) -> Option<(RelOp, bool)> {
        let op = match self.peek() {
            Some(Tok::Sym("<")) => (RelOp::Lt, false),
            Some(Tok::Sym("<=")) => (RelOp::Le, false),
            Some(Tok::Sym("=")) => (RelOp::Eq, false),
            Some(Tok::Sym(">=")) => (RelOp::Ge, false),
            Some(Tok::Sym(">")) => (RelOp::Gt, false),
            Some(Tok::Sym("!=")) => (RelOp::Eq, true),
            _ => return None,
        };
        self.at += 1;
        Some(op)
    }

    pub fn formula(&mut self) -> Result<Formula> {
        let mut parts = vec![self.conj()?];
        while self.eat("or") {
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    fn conj(&mut self) -> Result<Formula> {
        let mut parts = vec![self.unary()?];
        while self.eat("and") {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.eat("not") {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.eat("true") {
            return Ok(Formula::True);
        }
        if self.eat("false") {
            return Ok(Formula::False);
        }
        for (kw, universal) in [("exists", false), ("forall", true)] {
            if self.eat(kw) {
                let mut vars = vec![self.ident()?];
                while self.eat(",") {
                    vars.push(self.ident()?);
                }
                self.expect(".")?;
                let body = self.formula()?;
                return Ok(vars.into_iter().rev().fold(body, |acc, v| {
                    if universal {
                        Formula::Forall(v, Box::new(acc))
                    } else {
                        Formula::Exists(v, Box::new(acc))
                    }
                }));
            }
        }
        if self.peek_sym("(") {
            let save = self.at;
            self.at += 1;
            if let Ok(f) = self.formula() {
                if self.eat(")") && !self.continues_expr() {
                    return Ok(f);
                }
            }
            self.at = save;
        }
        self.comparison()
    }

    fn continues_expr(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Sym("<" | "<=" | "=" | ">=" | ">" | "!=" | "+" | "-" | "*" | "/" | "%" | "mod"))
        )
    }

    fn comparison(&mut self) -> Result<Formula> {
        let mut lhs = self.expr()?;
        let mut parts = Vec::new();
        let Some((op, negate)) = self.relop() else {
            return Err(self.syntax("expected comparison operator".into()));
        };
        let rhs = self.expr()?;
        parts.push(atom(lhs, op, negate, rhs.clone()));
        lhs = rhs;
        while let Some((op, negate)) = self.relop() {
            let rhs = self.expr()?;
            parts.push(atom(lhs, op, negate, rhs.clone()));
            lhs = rhs;
        }
        Ok(Formula::and(parts))
    }

    fn params(&mut self) -> Result<Vec<String>> {
        let mut params = Vec::new();
        if self.peek_sym("[") {
            self.at += 1;
            if !self.peek_sym("]") {
                params.push(self.ident()?);
                while self.eat(",") {
                    params.push(self.ident()?);
                }
            }
            self.expect("]")?;
            self.expect("->")?;
        }
        Ok(params)
    }

    fn tuple(&mut self) -> Result<(Option<String>, Vec<(Expr, usize)>)> {
        let name = match self.peek() {
            Some(Tok::Ident(_)) => Some(self.ident()?),
            _ => None,
        };
        self.expect("(")?;
        let mut entries = Vec::new();
        if !self.peek_sym(")") {
            let pos = self.pos();
            entries.push((self.expr()?, pos));
            while self.eat(",") {
                let pos = self.pos();
                entries.push((self.expr()?, pos));
            }
        }
        self.expect(")")?;
        Ok((name, entries))
    }
}

fn atom(lhs: Expr, op: RelOp, negate: bool, rhs: Expr) -> Formula {
    let a = Formula::Atom(lhs, op, rhs);
    if negate {
        Formula::Not(Box::new(a))
    } else {
        a
    }
}

fn product(a: Expr, b: Expr, pos: usize) -> Result<Expr> {
    if let Some(c) = a.normalize().as_const() {
        return Ok(b.scaled(c));
    }
    if let Some(c) = b.normalize().as_const() {
        return Ok(a.scaled(c));
    }
    Err(Error::NonAffine {
        pos,
        msg: format!("product `({a})*({b})` has no literal factor"),
    })
}

pub(crate) struct RawSpace {
    pub params: Vec<String>,
    pub domain: (Option<String>, Vec<(Expr, usize)>),
    pub range: Option<(Option<String>, Vec<(Expr, usize)>)>,
    pub constraint: Formula,
}

pub(crate) fn parse_space(text: &str) -> Result<RawSpace> {
    let mut p = Parser::new(text, &[])?;
    let params = p.params()?;
    p.expect("{")?;
    let domain = p.tuple()?;
    let range = if p.eat("->") { Some(p.tuple()?) } else { None };
    let constraint = if p.eat(":") { p.formula()? } else { Formula::True };
    p.expect("}")?;
    p.finish()?;
    Ok(RawSpace { params, domain, range, constraint })
}

pub fn parse_expr(text: &str) -> Result<Expr> {
    parse_expr_with(text, &[])
}

/// Parse an expression whose divisors may name the given constants.
pub fn parse_expr_with(text: &str, constants: &[(String, i64)]) -> Result<Expr> {
    let mut p = Parser::new(text, constants)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

pub fn parse_formula(text: &str) -> Result<Formula> {
    let mut p = Parser::new(text, &[])?;
    let f = p.formula()?;
    p.finish()?;
    Ok(f)
}
