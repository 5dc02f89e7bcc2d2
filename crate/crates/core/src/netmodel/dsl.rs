//! Line-oriented `.crn` reader and canonical writer.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::expr::{parse_expr, Scope};
use super::{RateLaw, Reaction, ReactionNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Colon,
    Arrow,
    Pipe,
    Comma,
    Eq,
    Plus,
}

struct Lexed {
    toks: Vec<(Tok, usize)>,
    end_col: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex_line(text: &str, line: usize) -> Result<Lexed> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            ':' => {
                toks.push((Tok::Colon, col));
                i += 1;
            }
            '|' => {
                toks.push((Tok::Pipe, col));
                i += 1;
            }
            ',' => {
                toks.push((Tok::Comma, col));
                i += 1;
            }
            '=' => {
                toks.push((Tok::Eq, col));
                i += 1;
            }
            '+' => {
                toks.push((Tok::Plus, col));
                i += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                toks.push((Tok::Arrow, col));
                i += 2;
            }
            '"' => {
                let start = i + 1;
                let Some(len) = chars[start..].iter().position(|&ch| ch == '"') else {
                    return Err(syntax(line, col, "unterminated string"));
                };
                toks.push((Tok::Str(chars[start..start + len].iter().collect()), col));
                i = start + len + 1;
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' => {
                let start = i;
                i += 1;
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
                toks.push((Tok::Number(chars[start..i].iter().collect()), col));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
            }
            other => return Err(syntax(line, col, format!("unexpected character '{other}'"))),
        }
    }
    Ok(Lexed {
        toks,
        end_col: chars.len() + 1,
    })
}

struct Cursor<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.1)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        syntax(self.line, self.col(), msg)
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.peek();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<()> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize)> {
        let col = self.col();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok((s.clone(), col))
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let col = self.col();
        match self.peek() {
            Some(Tok::Number(s)) => {
                self.pos += 1;
                s.parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| syntax(self.line, col, format!("malformed number '{s}'")))
            }
            _ => Err(self.err("expected number")),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.pos < self.toks.len() {
            Err(self.err("unexpected trailing input"))
        } else {
            Ok(())
        }
    }
}

struct RawTerm {
    coeff: u32,
    species: String,
    line: usize,
    col: usize,
}

enum RawLaw {
    Constant { value: f64 },
    Expr { src: String, line: usize, col: usize },
}

struct RawReaction {
    label: String,
    line: usize,
    lhs: Vec<RawTerm>,
    rhs: Vec<RawTerm>,
    forward: Option<RawLaw>,
    backward: Option<RawLaw>,
}

fn parse_side(cur: &mut Cursor<'_>) -> Result<Vec<RawTerm>> {
    if matches!(cur.peek(), Some(Tok::Number(n)) if n == "0")
        && !matches!(cur.toks.get(cur.pos + 1), Some((Tok::Ident(_), _)))
    {
        cur.pos += 1;
        return Ok(Vec::new());
    }
    let mut terms = Vec::new();
    loop {
        let col = cur.col();
        let coeff = match cur.peek() {
            Some(Tok::Number(s)) => {
                let c: u32 = s.parse().map_err(|_| {
                    cur.err(format!(
                        "stoichiometric coefficient must be a nonnegative integer, got '{s}'"
                    ))
                })?;
                cur.pos += 1;
                c
            }
            _ => 1,
        };
        let (species, _) = cur.ident("species name")?;
        terms.push(RawTerm {
            coeff,
            species,
            line: cur.line,
            col,
        });
        if cur.peek() == Some(&Tok::Plus) {
            cur.pos += 1;
        } else {
            return Ok(terms);
        }
    }
}

fn parse_reaction(cur: &mut Cursor<'_>, label: String) -> Result<RawReaction> {
    let lhs = parse_side(cur)?;
    cur.expect(&Tok::Arrow, "'->'")?;
    let rhs = parse_side(cur)?;
    cur.expect(&Tok::Pipe, "'|' before rate specification")?;
    let mut r = RawReaction {
        label,
        line: cur.line,
        lhs,
        rhs,
        forward: None,
        backward: None,
    };
    for k in 0..2 {
        if k == 1 {
            if cur.peek() != Some(&Tok::Comma) {
                break;
            }
            cur.pos += 1;
        }
        let (key, key_col) = cur.ident("rate key (kf, kr, fwd, rev)")?;
        cur.expect(&Tok::Eq, "'='")?;
        let law = match key.as_str() {
            "kf" | "kr" => RawLaw::Constant { value: cur.number()? },
            "fwd" | "rev" => {
                let col = cur.col();
                match cur.next() {
                    Some(Tok::Str(s)) => RawLaw::Expr {
                        src: s.clone(),
                        line: cur.line,
                        col: col + 1,
                    },
                    _ => return Err(syntax(cur.line, col, "expected quoted expression")),
                }
            }
            other => return Err(syntax(cur.line, key_col, format!("unknown rate key '{other}'"))),
        };
        let slot = if key == "kf" || key == "fwd" {
            &mut r.forward
        } else {
            &mut r.backward
        };
        if slot.is_some() {
            return Err(syntax(cur.line, key_col, "rate direction specified twice"));
        }
        *slot = Some(law);
    }
    cur.finish()?;
    if r.forward.is_none() {
        return Err(syntax(cur.line, cur.end_col, "missing forward rate (kf or fwd)"));
    }
    Ok(r)
}

/// Parse `.crn` text into a validated network. Species are ordered by
/// declaration.
pub fn parse_network(text: &str) -> Result<ReactionNetwork> {
    let mut species: Vec<String> = Vec::new();
    let mut params: BTreeMap<String, f64> = BTreeMap::new();
    let mut volume = None;
    let mut conc: Vec<(String, f64, usize, usize)> = Vec::new();
    let mut raw = Vec::new();

    for (i, text) in text.lines().enumerate() {
        let line = i + 1;
        let lexed = lex_line(text, line)?;
        if lexed.toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks: &lexed.toks,
            pos: 0,
            line,
            end_col: lexed.end_col,
        };
        let (head, head_col) = cur.ident("declaration or reaction label")?;
        if cur.peek() == Some(&Tok::Colon) {
            cur.pos += 1;
            raw.push(parse_reaction(&mut cur, head)?);
            continue;
        }
        match head.as_str() {
            "species" => {
                if cur.peek().is_none() {
                    return Err(cur.err("expected species name"));
                }
                while cur.peek().is_some() {
                    let (name, col) = cur.ident("species name")?;
                    if species.contains(&name) {
                        return Err(syntax(line, col, format!("duplicate species '{name}'")));
                    }
                    species.push(name);
                }
            }
            "param" => {
                let (name, col) = cur.ident("parameter name")?;
                cur.expect(&Tok::Eq, "'='")?;
                let v = cur.number()?;
                cur.finish()?;
                if params.insert(name.clone(), v).is_some() {
                    return Err(syntax(line, col, format!("duplicate parameter '{name}'")));
                }
            }
            "volume" => {
                let v = cur.number()?;
                cur.finish()?;
                volume = Some(v);
            }
            "conc" => {
                let (name, col) = cur.ident("species name")?;
                cur.expect(&Tok::Eq, "'='")?;
                let v = cur.number()?;
                cur.finish()?;
                conc.push((name, v, line, col));
            }
            other => {
                return Err(syntax(line, head_col, format!("unknown declaration '{other}'")));
            }
        }
    }

    let index_of = |name: &str, line: usize, col: usize| {
        species
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| syntax(line, col, format!("undeclared identifier '{name}'")))
    };

    let initial_conc = if conc.is_empty() {
        None
    } else {
        let mut c = vec![f64::NAN; species.len()];
        for (name, v, line, col) in &conc {
            c[index_of(name, *line, *col)?] = *v;
        }
        if let Some(j) = c.iter().position(|v| v.is_nan()) {
            return Err(Error::Invalid(format!("missing conc for species {}", species[j])));
        }
        Some(c)
    };

    let scope = Scope {
        species: &species,
        params: &params,
    };
    let law = |l: RawLaw| -> Result<RateLaw> {
        Ok(match l {
            RawLaw::Constant { value } => RateLaw::MassAction { rate_constant: value },
            RawLaw::Expr { src, line, col } => RateLaw::Expression(parse_expr(&src, &scope, line, col)?),
        })
    };

    let mut reactions = Vec::with_capacity(raw.len());
    for r in raw {
        let mut nu_plus = vec![0u32; species.len()];
        let mut nu_minus = vec![0u32; species.len()];
        for (terms, nu) in [(&r.lhs, &mut nu_plus), (&r.rhs, &mut nu_minus)] {
            for t in terms {
                nu[index_of(&t.species, t.line, t.col)?] += t.coeff;
            }
        }
        if nu_plus == nu_minus {
            return Err(Error::Invalid(format!(
                "line {}: zero net-change reaction {}",
                r.line, r.label
            )));
        }
        reactions.push(Reaction {
            label: r.label,
            nu_plus,
            nu_minus,
            forward: law(r.forward.expect("checked during parse"))?,
            backward: r.backward.map(law).transpose()?,
        });
    }

    ReactionNetwork::new(species, reactions, params, volume, initial_conc)
}

fn write_side(out: &mut String, coeffs: &[u32], names: &[String]) {
    let terms: Vec<String> = coeffs
        .iter()
        .zip(names)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, n)| if c == 1 { n.clone() } else { format!("{c}{n}") })
        .collect();
    if terms.is_empty() {
        out.push('0');
    } else {
        out.push_str(&terms.join(" + "));
    }
}

fn write_law(out: &mut String, law: &RateLaw, forward: bool) {
    match (law, forward) {
        (RateLaw::MassAction { rate_constant }, true) => write!(out, "kf={rate_constant:?}"),
        (RateLaw::MassAction { rate_constant }, false) => write!(out, "kr={rate_constant:?}"),
        (RateLaw::Expression(e), true) => write!(out, "fwd=\"{e}\""),
        (RateLaw::Expression(e), false) => write!(out, "rev=\"{e}\""),
    }
    .expect("writing to String");
}

pub(super) fn write_network(net: &ReactionNetwork) -> String {
    let names = net.species_names();
    let mut out = String::new();
    if !names.is_empty() {
        writeln!(out, "species {}", names.join(" ")).unwrap();
    }
    for (k, v) in net.params() {
        writeln!(out, "param {k} = {v:?}").unwrap();
    }
    if let Some(v) = net.default_volume() {
        writeln!(out, "volume {v:?}").unwrap();
    }
    if let Some(c) = net.initial_conc() {
        for (name, v) in names.iter().zip(c) {
            writeln!(out, "conc {name} = {v:?}").unwrap();
        }
    }
    for r in net.reactions() {
        write!(out, "{}: ", r.label).unwrap();
        write_side(&mut out, &r.nu_plus, &names);
        out.push_str(" -> ");
        write_side(&mut out, &r.nu_minus, &names);
        out.push_str(" | ");
        write_law(&mut out, &r.forward, true);
        if let Some(b) = &r.backward {
            out.push_str(", ");
            write_law(&mut out, b, false);
        }
        out.push('\n');
    }
    out
}
