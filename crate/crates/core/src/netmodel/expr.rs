//! Rate-law expressions: a small arithmetic language over species
//! concentrations `x(S)`, named parameters and numeric literals.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Pow,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Pow => "pow",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

/// Expression tree. Species and parameters are resolved at parse time.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Conc { index: usize, name: String },
    Param { name: String, value: f64 },
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Conc { index, .. } => x[*index],
            Expr::Param { value, .. } => *value,
            Expr::Neg(e) => -e.eval(x),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, args) => match f {
                Func::Exp => args[0].eval(x).exp(),
                Func::Ln => args[0].eval(x).ln(),
                Func::Pow => args[0].eval(x).powf(args[1].eval(x)),
            },
        }
    }

    /// Species indices referenced anywhere in the tree.
    pub fn species_refs(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Conc { index, .. } => out.push(*index),
            Expr::Neg(e) => e.species_refs(out),
            Expr::Binary(_, a, b) => {
                a.species_refs(out);
                b.species_refs(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.species_refs(out)),
            Expr::Num(_) | Expr::Param { .. } => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 => write!(f, "({v:?})"),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Conc { name, .. } => write!(f, "x({name})"),
            Expr::Param { name, .. } => write!(f, "{name}"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_child(f, e, e.precedence() < 3)
            }
            Expr::Binary(op, a, b) => {
                let p = self.precedence();
                let (sym, left_paren, right_paren) = match op {
                    BinOp::Add => (" + ", a.precedence() < p, b.precedence() <= p),
                    BinOp::Sub => (" - ", a.precedence() < p, b.precedence() <= p),
                    BinOp::Mul => (" * ", a.precedence() < p, b.precedence() <= p),
                    BinOp::Div => (" / ", a.precedence() < p, b.precedence() <= p),
                    BinOp::Pow => ("^", a.precedence() <= p, b.precedence() < 3),
                };
                write_child(f, a, left_paren)?;
                f.write_str(sym)?;
                write_child(f, b, right_paren)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Name resolution context for expression parsing.
pub struct Scope<'a> {
    pub species: &'a [String],
    pub params: &'a BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

/// Parse `src`. Error columns are offset by `col0` so they point into the
/// enclosing file line.
pub fn parse_expr(src: &str, scope: &Scope<'_>, line: usize, col0: usize) -> Result<Expr> {
    let toks = lex(src, line, col0)?;
    let mut p = ExprParser {
        toks,
        pos: 0,
        scope,
        line,
        end_col: col0 + src.chars().count(),
    };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(p.err_at(p.pos, "unexpected token in expression"));
    }
    Ok(e)
}

fn lex(src: &str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                line,
                column: col,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((Tok::Num(v), col));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else if c == '\u{2212}' {
            out.push((Tok::Op('-'), col));
            i += 1;
        } else {
            return Err(Error::Syntax {
                line,
                column: col,
                message: format!("unexpected character '{c}' in expression"),
            });
        }
    }
    Ok(out)
}

struct ExprParser<'s, 'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    scope: &'s Scope<'a>,
    line: usize,
    end_col: usize,
}

impl ExprParser<'_, '_> {
    fn err_at(&self, pos: usize, msg: &str) -> Error {
        let column = self.toks.get(pos).map_or(self.end_col, |t| t.1);
        Error::Syntax {
            line: self.line,
            column,
            message: msg.to_string(),
        }
    }

    fn peek_op(&self, c: char) -> bool {
        matches!(self.toks.get(self.pos), Some((Tok::Op(o), _)) if *o == c)
    }

    fn expect_op(&mut self, c: char) -> Result<()> {
        if self.peek_op(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err_at(self.pos, &format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.peek_op('+') {
                BinOp::Add
            } else if self.peek_op('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.peek_op('*') {
                BinOp::Mul
            } else if self.peek_op('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek_op('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let pos = self.pos;
        let Some((tok, _)) = self.toks.get(pos).cloned() else {
            return Err(self.err_at(pos, "unexpected end of expression"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Tok::Ident(name) if self.peek_op('(') => {
                self.pos += 1;
                if name == "x" {
                    let arg_pos = self.pos;
                    let Some((Tok::Ident(sp), _)) = self.toks.get(arg_pos).cloned() else {
                        return Err(self.err_at(arg_pos, "expected species name inside x(...)"));
                    };
                    self.pos += 1;
                    self.expect_op(')')?;
                    return self.species(&sp, arg_pos);
                }
                let func = match name.as_str() {
                    "exp" => Func::Exp,
                    "ln" => Func::Ln,
                    "pow" => Func::Pow,
                    _ => return Err(self.err_at(pos, &format!("unknown function '{name}'"))),
                };
                let mut args = vec![self.expr()?];
                while self.peek_op(',') {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                self.expect_op(')')?;
                if args.len() != func.arity() {
                    return Err(self.err_at(pos, &format!("{} takes {} argument(s)", func.name(), func.arity())));
                }
                Ok(Expr::Call(func, args))
            }
            Tok::Ident(name) => {
                if let Some(&value) = self.scope.params.get(&name) {
                    Ok(Expr::Param { name, value })
                } else {
                    self.species(&name, pos)
                }
            }
            Tok::Op(c) => Err(self.err_at(pos, &format!("unexpected '{c}'"))),
        }
    }

    fn species(&self, name: &str, pos: usize) -> Result<Expr> {
        match self.scope.species.iter().position(|s| s == name) {
            Some(index) => Ok(Expr::Conc {
                index,
                name: name.to_string(),
            }),
            None => Err(self.err_at(pos, &format!("undeclared identifier '{name}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scope_parse(src: &str) -> Result<Expr> {
        let species = vec!["A".to_string(), "B".to_string()];
        let mut params = BTreeMap::new();
        params.insert("k".to_string(), 2.0);
        parse_expr(
            src,
            &Scope {
                species: &species,
                params: &params,
            },
            1,
            1,
        )
    }

    #[test]
    fn precedence_and_associativity() {
        let e = scope_parse("1 + 2 * 3 ^ 2 ^ 0.5").unwrap();
        let want = 1.0 + 2.0 * 3f64.powf(2f64.powf(0.5));
        assert!((e.eval(&[0.0, 0.0]) - want).abs() < 1e-14);
        assert_eq!(scope_parse("-2^2").unwrap().eval(&[0.0, 0.0]), -4.0);
        assert_eq!(scope_parse("8 / 4 / 2").unwrap().eval(&[0.0, 0.0]), 1.0);
        assert_eq!(scope_parse("2^-1").unwrap().eval(&[0.0, 0.0]), 0.5);
    }

    #[test]
    fn species_params_and_functions() {
        let e = scope_parse("k * x(A)^2 / (1 + B) + ln(exp(1)) + pow(2, 3)").unwrap();
        let v = e.eval(&[3.0, 1.0]);
        assert!((v - (2.0 * 9.0 / 2.0 + 1.0 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn undeclared_and_bad_arity() {
        let err = scope_parse("x(C) + 1").unwrap_err();
        assert!(matches!(err, Error::Syntax { ref message, .. } if message.contains("undeclared")));
        assert!(scope_parse("pow(1)").is_err());
        assert!(scope_parse("sin(1)").is_err());
        assert!(scope_parse("1 +").is_err());
        assert!(scope_parse("(1").is_err());
    }

    #[test]
    fn display_reparses_to_same_tree() {
        for src in [
            "k * x(A)^2 / (1 + x(B))",
            "-(x(A) - 1)^-2",
            "(x(A)^2)^3 - -x(B)",
            "1 - (2 - 3) / (4 * 5)",
            "exp(-k * x(A)) + ln(1e-7 + x(B))",
        ] {
            let e = scope_parse(src).unwrap();
            let again = scope_parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }
}
