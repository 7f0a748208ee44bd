//! Integer expressions, polynomial strings and `{...}` name templates.

use std::collections::HashMap;

use crate::series_ring::{GaussianRational, TruncatedSeries};

use super::CatalogError;

pub type Env = HashMap<String, i64>;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(i64),
    Ident(String),
    Op(char),
}

fn lex(s: &str) -> Result<Vec<Tok>, CatalogError> {
    let mut out = vec![];
    let cs: Vec<char> = s.chars().collect();
    let mut k = 0;
    while k < cs.len() {
        let c = cs[k];
        if c.is_whitespace() {
            k += 1;
        } else if c.is_ascii_digit() {
            let st = k;
            while k < cs.len() && cs[k].is_ascii_digit() {
                k += 1;
            }
            let t: String = cs[st..k].iter().collect();
            out.push(Tok::Num(t.parse().map_err(|_| bad(s))?));
        } else if c.is_ascii_alphabetic() {
            let st = k;
            while k < cs.len() && (cs[k].is_ascii_alphanumeric() || cs[k] == '_') {
                k += 1;
            }
            out.push(Tok::Ident(cs[st..k].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            k += 1;
        } else {
            return Err(bad(s));
        }
    }
    Ok(out)
}

fn bad(s: &str) -> CatalogError {
    CatalogError::Parse(s.to_string())
}

struct P<'a> {
    toks: Vec<Tok>,
    pos: usize,
    src: &'a str,
    env: &'a Env,
}

impl<'a> P<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn done(&self) -> Result<(), CatalogError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(bad(self.src))
        }
    }

    fn int_expr(&mut self) -> Result<i64, CatalogError> {
        let mut v = self.int_term()?;
        loop {
            if self.eat('+') {
                v += self.int_term()?;
            } else if self.eat('-') {
                v -= self.int_term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn int_term(&mut self) -> Result<i64, CatalogError> {
        let mut v = self.int_atom()?;
        loop {
            if self.eat('*') {
                v *= self.int_atom()?;
            } else if self.eat('/') {
                let d = self.int_atom()?;
                if d == 0 || v % d != 0 {
                    return Err(CatalogError::Inexact(self.src.to_string()));
                }
                v /= d;
            } else {
                return Ok(v);
            }
        }
    }

    fn int_atom(&mut self) -> Result<i64, CatalogError> {
        if self.eat('-') {
            return Ok(-self.int_atom()?);
        }
        if self.eat('(') {
            let v = self.int_expr()?;
            return if self.eat(')') { Ok(v) } else { Err(bad(self.src)) };
        }
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                self.env
                    .get(&name)
                    .copied()
                    .ok_or(CatalogError::UnboundSymbol(name))
            }
            _ => Err(bad(self.src)),
        }
    }
}

/// Evaluates an integer expression over n, l, j and friends.
pub fn eval_int(s: &str, env: &Env) -> Result<i64, CatalogError> {
    let mut p = P {
        toks: lex(s)?,
        pos: 0,
        src: s,
        env,
    };
    let v = p.int_expr()?;
    p.done()?;
    Ok(v)
}

struct PolyCtx<'a> {
    vars: &'a [String],
    nvars: usize,
    trunc: u32,
}

impl<'a> P<'a> {
    fn poly(&mut self, c: &PolyCtx) -> Result<TruncatedSeries, CatalogError> {
        let mut v = self.poly_term(c)?;
        loop {
            if self.eat('+') {
                v = &v + &self.poly_term(c)?;
            } else if self.eat('-') {
                v = &v - &self.poly_term(c)?;
            } else {
                return Ok(v);
            }
        }
    }

    fn poly_term(&mut self, c: &PolyCtx) -> Result<TruncatedSeries, CatalogError> {
        let mut v = self.poly_factor(c)?;
        while self.eat('*') {
            v = &v * &self.poly_factor(c)?;
        }
        Ok(v)
    }

    fn poly_factor(&mut self, c: &PolyCtx) -> Result<TruncatedSeries, CatalogError> {
        if self.eat('-') {
            return Ok(self.poly_factor(c)?.neg());
        }
        let base = self.poly_atom(c)?;
        if self.eat('^') {
            let e = self.int_atom()?;
            if e < 0 {
                return Err(bad(self.src));
            }
            return Ok(base.pow(e as u32));
        }
        Ok(base)
    }

    fn poly_atom(&mut self, c: &PolyCtx) -> Result<TruncatedSeries, CatalogError> {
        let konst = |g: GaussianRational| TruncatedSeries::constant(c.nvars, c.trunc, g);
        if self.eat('(') {
            let v = self.poly(c)?;
            return if self.eat(')') { Ok(v) } else { Err(bad(self.src)) };
        }
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(konst(GaussianRational::from_ints(v, 0)))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(k) = c.vars.iter().position(|v| *v == name) {
                    Ok(TruncatedSeries::var(c.nvars, c.trunc, k))
                } else if name == "i" {
                    Ok(konst(GaussianRational::i()))
                } else if let Some(v) = self.env.get(&name) {
                    Ok(konst(GaussianRational::from_ints(*v, 0)))
                } else {
                    Err(CatalogError::UnboundSymbol(name))
                }
            }
            _ => Err(bad(self.src)),
        }
    }
}

/// Parses a polynomial in the given variables; `i` is the imaginary unit.
pub fn parse_poly(s: &str, vars: &[String], trunc: u32, env: &Env) -> Result<TruncatedSeries, CatalogError> {
    let mut p = P {
        toks: lex(s)?,
        pos: 0,
        src: s,
        env,
    };
    let c = PolyCtx {
        vars,
        nvars: vars.len(),
        trunc,
    };
    let v = p.poly(&c)?;
    p.done()?;
    Ok(v)
}

/// Replaces each `{expr}` by its integer value.
pub fn expand(s: &str, env: &Env) -> Result<String, CatalogError> {
    let mut out = String::new();
    let mut rest = s;
    while let Some(a) = rest.find('{') {
        out.push_str(&rest[..a]);
        let b = rest[a..].find('}').ok_or_else(|| bad(s))? + a;
        out.push_str(&eval_int(&rest[a + 1..b], env)?.to_string());
        rest = &rest[b + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Expands a member spec that may carry a range, as in `N_{1..l}`.
pub fn expand_range(s: &str, env: &Env) -> Result<Vec<String>, CatalogError> {
    let (Some(a), Some(b)) = (s.find('{'), s.find('}')) else {
        return Ok(vec![s.to_string()]);
    };
    let inner = &s[a + 1..b];
    let Some((lo, hi)) = inner.split_once("..") else {
        return Ok(vec![expand(s, env)?]);
    };
    let (lo, hi) = (eval_int(lo, env)?, eval_int(hi, env)?);
    Ok((lo..=hi)
        .map(|v| format!("{}{}{}", &s[..a], v, &s[b + 1..]))
        .collect())
}

fn split_top(s: &str) -> Vec<&str> {
    let mut out = vec![];
    let (mut depth, mut st) = (0i32, 0);
    for (k, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[st..k]);
                st = k + 1;
            }
            _ => {}
        }
    }
    out.push(&s[st..]);
    out
}

/// Expands `each(var, from, to, body)` loops, then templates.
pub fn expand_trace(s: &str, env: &Env) -> Result<String, CatalogError> {
    let mut out = String::new();
    let mut rest = s;
    while let Some(a) = rest.find("each(") {
        let boundary = a == 0 || !rest[..a].ends_with(|c: char| c.is_alphanumeric() || c == '_');
        if !boundary {
            out.push_str(&expand(&rest[..a + 5], env)?);
            rest = &rest[a + 5..];
            continue;
        }
        out.push_str(&expand(&rest[..a], env)?);
        let body_start = a + 5;
        let mut depth = 1;
        let mut end = None;
        for (k, c) in rest[body_start..].char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(body_start + k);
                        break;
                    }
                }
                _ => {}
            }
        }
        let end = end.ok_or_else(|| bad(s))?;
        let parts = split_top(&rest[body_start..end]);
        if parts.len() < 4 {
            return Err(bad(s));
        }
        let var = parts[0].trim().to_string();
        let (from, to) = (eval_int(parts[1], env)?, eval_int(parts[2], env)?);
        let body = parts[3..].join(",");
        // counts down; empty when from < to
        let idx: Vec<i64> = (to..=from).rev().collect();
        let mut items = vec![];
        for v in idx {
            let mut e = env.clone();
            e.insert(var.clone(), v);
            items.push(expand_trace(body.trim(), &e)?);
        }
        rest = &rest[end + 1..];
        if items.is_empty() {
            let tail = rest.trim_start();
            if let Some(t) = tail.strip_prefix(',') {
                rest = t.trim_start();
            } else if let Some(head) = out.trim_end().strip_suffix(',') {
                out = head.to_string();
            }
        } else {
            out.push_str(&items.join(", "));
        }
    }
    out.push_str(&expand(rest, env)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, i64)]) -> Env {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn integer_expressions() {
        let e = env(&[("n", 8), ("j", 2)]);
        assert_eq!(eval_int("(n-4)/2", &e).unwrap(), 2);
        assert_eq!(eval_int("n-j-2", &e).unwrap(), 4);
        assert_eq!(eval_int("-j+3*2", &e).unwrap(), 4);
        assert!(matches!(eval_int("(n-3)/2", &e), Err(CatalogError::Inexact(_))));
        assert!(matches!(eval_int("k", &e), Err(CatalogError::UnboundSymbol(_))));
    }

    #[test]
    fn polynomial_strings() {
        let vars = vec!["x".to_string(), "y".to_string()];
        let e = env(&[("n", 6)]);
        let f = parse_poly("x^2*y + y^(n-1)", &vars, 12, &e).unwrap();
        let x = TruncatedSeries::var(2, 12, 0);
        let y = TruncatedSeries::var(2, 12, 1);
        assert_eq!(f, &(&x.pow(2) * &y) + &y.pow(5));
        let g = parse_poly("x - i*y^2", &vars, 12, &e).unwrap();
        let iy2 = y.pow(2).scale(&GaussianRational::i());
        assert_eq!(g, &x - &iy2);
        assert_eq!(parse_poly("-x", &vars, 12, &e).unwrap(), x.neg());
    }

    #[test]
    fn templates() {
        let e = env(&[("l", 3), ("j", 1)]);
        assert_eq!(expand("M_{j+1}", &e).unwrap(), "M_2");
        assert_eq!(expand("rho_{l}", &e).unwrap(), "rho_3");
        assert_eq!(expand_range("N_{1..l}", &e).unwrap(), vec!["N_1", "N_2", "N_3"]);
        assert!(expand_range("N_{1..0}", &env(&[])).unwrap().is_empty());
    }

    #[test]
    fn trace_loops() {
        let e = env(&[("l", 2)]);
        let t = expand_trace("chain(a, each(j, l, 1, s_{j}, r_{j-1}), d_{l})", &e).unwrap();
        assert_eq!(t, "chain(a, s_2, r_1, s_1, r_0, d_2)");
        let t = expand_trace("chain(a, each(j, l, 1, x_{j}), b)", &env(&[("l", 0)])).unwrap();
        assert_eq!(t, "chain(a, b)");
    }
}
