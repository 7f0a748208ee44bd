//! Short exact sequences as name multisets, and the operations that build new
//! ones from old: exact-square composition, cancellation and syzygy transport.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::catalog::SingularityDef;
use crate::matfac::{ext1_dim_stable, mf_direct_sum_all, ChiVector, MatFac};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("cannot glue {0} onto {1}")]
    GlueError(String, String),
    #[error("cancellation shape mismatch: {0}")]
    CancelError(String),
    #[error("no syzygy for {0}")]
    UnknownName(String),
    #[error("malformed sequence `{0}`")]
    Parse(String),
    #[error("trace: {0}")]
    Trace(String),
}

pub const FREE: &str = "R";
pub const FREE_ALLOWANCE: &str = "R*";

/// 0 → ⊕left → ⊕mid → ⊕right → 0, plus optionally any number of free summands in mid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExtRule {
    pub left: Vec<String>,
    pub mid: Vec<String>,
    pub right: Vec<String>,
    pub free_allowance: bool,
    pub provenance: String,
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

/// Removes `small` from `big` as multisets; missing R is forgiven when `allow` is set.
fn ms_sub(big: &[String], small: &[String], allow: bool) -> Option<Vec<String>> {
    let mut rest = big.to_vec();
    for s in small {
        if let Some(k) = rest.iter().position(|b| b == s) {
            rest.remove(k);
        } else if !(allow && s == FREE) {
            return None;
        }
    }
    Some(rest)
}

fn without_free(v: &[String]) -> Vec<String> {
    v.iter().filter(|s| *s != FREE).cloned().collect()
}

impl ExtRule {
    pub fn new(left: Vec<String>, mid: Vec<String>, right: Vec<String>, provenance: &str) -> Self {
        let free_allowance = mid.iter().any(|m| m == FREE_ALLOWANCE);
        let mid = mid.into_iter().filter(|m| m != FREE_ALLOWANCE).collect();
        ExtRule {
            left: sorted(left),
            mid: sorted(mid),
            right: sorted(right),
            free_allowance,
            provenance: provenance.to_string(),
        }
    }

    /// The split sequence 0 → L → L ⊕ R → R → 0.
    pub fn split(left: Vec<String>, right: Vec<String>) -> Self {
        let mid = left.iter().chain(&right).cloned().collect();
        ExtRule::new(left, mid, right, "split")
    }

    pub fn with_allowance(mut self, allow: bool) -> Self {
        self.free_allowance = allow;
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.left.iter().chain(&self.mid).chain(&self.right)
    }

    pub fn is_split(&self) -> bool {
        sorted(self.left.iter().chain(&self.right).cloned().collect()) == self.mid
    }

    /// Equality of the three multisets; mids are compared without R under an allowance.
    pub fn same_as(&self, o: &ExtRule) -> bool {
        if self.left != o.left || self.right != o.right || self.free_allowance != o.free_allowance {
            return false;
        }
        if self.free_allowance {
            without_free(&self.mid) == without_free(&o.mid)
        } else {
            self.mid == o.mid
        }
    }
}

fn side(v: &[String]) -> String {
    if v.is_empty() {
        "0".into()
    } else {
        v.join(", ")
    }
}

impl fmt::Display for ExtRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut mid = self.mid.clone();
        if self.free_allowance {
            mid.push(FREE_ALLOWANCE.into());
        }
        write!(f, "{} -> {} -> {}", side(&self.left), side(&mid), side(&self.right))
    }
}

/// Splits `L -> M -> R` into its three comma-separated sides; `0` is empty.
pub fn parse_sides(seq: &str) -> Result<[Vec<String>; 3], RuleError> {
    let parts: Vec<&str> = seq.split(" -> ").collect();
    if parts.len() != 3 {
        return Err(RuleError::Parse(seq.into()));
    }
    let names = |s: &str| -> Vec<String> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty() && *t != "0")
            .map(String::from)
            .collect()
    };
    Ok([names(parts[0]), names(parts[1]), names(parts[2])])
}

/// Glues r1 = 0→A→B→C→0 and r2 = 0→D→E→F→0 along D ⊆ B and C ⊆ E.
pub fn compose_exact_squares(r1: &ExtRule, r2: &ExtRule) -> Result<ExtRule, RuleError> {
    let glue = || RuleError::GlueError(r2.to_string(), r1.to_string());
    let top = ms_sub(&r1.mid, &r2.left, r1.free_allowance).ok_or_else(glue)?;
    let bottom = ms_sub(&r2.mid, &r1.right, r2.free_allowance).ok_or_else(glue)?;
    let mid = top.into_iter().chain(bottom).collect();
    Ok(ExtRule::new(r1.left.clone(), mid, r2.right.clone(), "compose")
        .with_allowance(r1.free_allowance || r2.free_allowance))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Cancels an end of `r` against an auxiliary sequence.
///
/// Left: r = 0→A→B⊕C→D→0 and aux = 0→E→A→B→0 give 0→E→C→D→0.
/// Right: r = 0→A→B⊕C→D→0 and aux = 0→B→D→E→0 give 0→A→C→E→0.
pub fn cancel(r: &ExtRule, aux: &ExtRule, side: Side) -> Result<ExtRule, RuleError> {
    let err = |what: &str| RuleError::CancelError(format!("{what}: {r} against {aux}"));
    match side {
        Side::Left => {
            if without_free(&aux.mid) != without_free(&r.left) || (aux.mid != r.left && !aux.free_allowance) {
                return Err(err("middle of aux is not the left end"));
            }
            let mid = ms_sub(&r.mid, &aux.right, r.free_allowance).ok_or_else(|| err("right of aux not in middle"))?;
            Ok(ExtRule::new(aux.left.clone(), mid, r.right.clone(), "cancel")
                .with_allowance(r.free_allowance))
        }
        Side::Right => {
            if without_free(&aux.mid) != without_free(&r.right) || (aux.mid != r.right && !aux.free_allowance) {
                return Err(err("middle of aux is not the right end"));
            }
            let mid = ms_sub(&r.mid, &aux.left, r.free_allowance).ok_or_else(|| err("left of aux not in middle"))?;
            Ok(ExtRule::new(r.left.clone(), mid, aux.right.clone(), "cancel")
                .with_allowance(r.free_allowance))
        }
    }
}

/// Applies Ω to every name; R has no syzygy and disappears, and mid gains a free allowance.
pub fn syzygy_transport(r: &ExtRule, syz: &HashMap<String, String>) -> Result<ExtRule, RuleError> {
    let map = |v: &[String]| -> Result<Vec<String>, RuleError> {
        v.iter()
            .filter(|n| *n != FREE)
            .map(|n| syz.get(n).cloned().ok_or_else(|| RuleError::UnknownName(n.clone())))
            .collect()
    };
    let mut out = ExtRule::new(map(&r.left)?, map(&r.mid)?, map(&r.right)?, &format!("syz({})", r.provenance));
    out.free_allowance = true;
    Ok(out)
}

/// Derivation recipe for a stored sequence.
#[derive(Clone, Debug, PartialEq)]
pub enum Trace {
    Label(String),
    Chain(Vec<Trace>),
    Sum(Vec<Trace>),
    Split(Vec<String>, Vec<String>),
    Syz(Box<Trace>),
    CancelLeft(Box<Trace>, Box<Trace>),
    CancelRight(Box<Trace>, Box<Trace>),
}

#[derive(Clone, Debug, PartialEq)]
enum TTok {
    Word(String),
    Open,
    Close,
    Comma,
    Bar,
}

fn lex_trace(s: &str) -> Vec<TTok> {
    let mut out = vec![];
    let mut word = String::new();
    let flush = |w: &mut String, out: &mut Vec<TTok>| {
        if !w.is_empty() {
            out.push(TTok::Word(std::mem::take(w)));
        }
    };
    for c in s.chars() {
        let t = match c {
            '(' => Some(TTok::Open),
            ')' => Some(TTok::Close),
            ',' => Some(TTok::Comma),
            '|' => Some(TTok::Bar),
            c if c.is_whitespace() => None,
            c => {
                word.push(c);
                continue;
            }
        };
        flush(&mut word, &mut out);
        if let Some(t) = t {
            out.push(t);
        }
    }
    flush(&mut word, &mut out);
    out
}

struct TraceParser<'a> {
    toks: Vec<TTok>,
    pos: usize,
    src: &'a str,
}

impl TraceParser<'_> {
    fn err(&self) -> RuleError {
        RuleError::Trace(format!("cannot parse `{}`", self.src))
    }

    fn next(&mut self) -> Option<TTok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: TTok) -> Result<(), RuleError> {
        if self.next() == Some(t) {
            Ok(())
        } else {
            Err(self.err())
        }
    }

    fn args(&mut self) -> Result<Vec<Trace>, RuleError> {
        self.expect(TTok::Open)?;
        let mut out = vec![self.item()?];
        loop {
            match self.next() {
                Some(TTok::Comma) => out.push(self.item()?),
                Some(TTok::Close) => return Ok(out),
                _ => return Err(self.err()),
            }
        }
    }

    fn split_args(&mut self) -> Result<Trace, RuleError> {
        self.expect(TTok::Open)?;
        let (mut l, mut r) = (vec![], vec![]);
        let mut right = false;
        loop {
            match self.next() {
                Some(TTok::Word(w)) => {
                    if w != "0" {
                        if right { r.push(w) } else { l.push(w) }
                    }
                }
                Some(TTok::Comma) => {}
                Some(TTok::Bar) if !right => right = true,
                Some(TTok::Close) => return Ok(Trace::Split(l, r)),
                _ => return Err(self.err()),
            }
        }
    }

    fn item(&mut self) -> Result<Trace, RuleError> {
        let Some(TTok::Word(w)) = self.next() else {
            return Err(self.err());
        };
        if self.toks.get(self.pos) != Some(&TTok::Open) {
            return Ok(Trace::Label(w));
        }
        if w == "split" {
            return self.split_args();
        }
        let mut a = self.args()?;
        let two = |a: &mut Vec<Trace>| -> Option<(Box<Trace>, Box<Trace>)> {
            (a.len() == 2).then(|| {
                let y = a.pop().unwrap();
                let x = a.pop().unwrap();
                (Box::new(x), Box::new(y))
            })
        };
        match w.as_str() {
            "chain" => Ok(Trace::Chain(a)),
            "sum" => Ok(Trace::Sum(a)),
            "syz" if a.len() == 1 => Ok(Trace::Syz(Box::new(a.remove(0)))),
            "cancel_left" => two(&mut a).map(|(x, y)| Trace::CancelLeft(x, y)).ok_or_else(|| self.err()),
            "cancel_right" => two(&mut a).map(|(x, y)| Trace::CancelRight(x, y)).ok_or_else(|| self.err()),
            _ => Err(self.err()),
        }
    }
}

pub fn parse_trace(s: &str) -> Result<Trace, RuleError> {
    let mut p = TraceParser {
        toks: lex_trace(s),
        pos: 0,
        src: s,
    };
    let t = p.item()?;
    if p.pos != p.toks.len() {
        return Err(p.err());
    }
    Ok(t)
}

/// What a trace needs from its surroundings.
pub trait TraceContext {
    fn rule(&self, label: &str) -> Option<ExtRule>;
    /// Canonical names for a raw name, after aliases.
    fn resolve(&self, name: &str) -> Result<Vec<String>, RuleError>;
    fn syzygies(&self) -> HashMap<String, String>;
}

pub fn eval_trace(t: &Trace, ctx: &dyn TraceContext) -> Result<ExtRule, RuleError> {
    match t {
        Trace::Label(l) => ctx
            .rule(l)
            .ok_or_else(|| RuleError::Trace(format!("unknown rule {l}"))),
        Trace::Chain(items) => {
            let mut it = items.iter();
            let first = it.next().ok_or_else(|| RuleError::Trace("empty chain".into()))?;
            let mut acc = eval_trace(first, ctx)?;
            for x in it {
                acc = compose_exact_squares(&acc, &eval_trace(x, ctx)?)?;
            }
            Ok(acc)
        }
        Trace::Sum(items) => {
            let (mut l, mut m, mut r, mut allow) = (vec![], vec![], vec![], false);
            for x in items {
                let e = eval_trace(x, ctx)?;
                l.extend(e.left);
                m.extend(e.mid);
                r.extend(e.right);
                allow |= e.free_allowance;
            }
            Ok(ExtRule::new(l, m, r, "sum").with_allowance(allow))
        }
        Trace::Split(l, r) => {
            let res = |v: &[String]| -> Result<Vec<String>, RuleError> {
                let mut out = vec![];
                for n in v {
                    out.extend(ctx.resolve(n)?);
                }
                Ok(out)
            };
            Ok(ExtRule::split(res(l)?, res(r)?))
        }
        Trace::Syz(x) => syzygy_transport(&eval_trace(x, ctx)?, &ctx.syzygies()),
        Trace::CancelLeft(r, a) => cancel(&eval_trace(r, ctx)?, &eval_trace(a, ctx)?, Side::Left),
        Trace::CancelRight(r, a) => cancel(&eval_trace(r, ctx)?, &eval_trace(a, ctx)?, Side::Right),
    }
}

/// Outcome of checking a rule against the members' presentations.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleReport {
    pub rule: ExtRule,
    /// `None` when some member has no χ.
    pub chi_additive: Option<bool>,
    /// `None` when some member has no presentation.
    pub size_additive: Option<bool>,
    pub sizes: Option<(usize, usize, usize)>,
    /// Ext¹(⊕right, ⊕left) when computable.
    pub ext_right_left: Option<usize>,
    pub split: bool,
}

impl RuleReport {
    pub fn nonsplit_evidence(&self) -> bool {
        !self.split || self.ext_right_left.map(|e| e > 0).unwrap_or(false)
    }
}

pub fn validate_rule(r: &ExtRule, def: &SingularityDef) -> RuleReport {
    let chi_sum = |v: &[String]| -> Option<ChiVector> {
        v.iter().try_fold(ChiVector::zero(def.primes.len()), |acc, n| {
            Some(acc.add(def.chi_of_name(n)?))
        })
    };
    let chi_additive = if r.free_allowance {
        // the number of free summands is open; compare non-free parts up to a multiple of χ(R)
        match (chi_sum(&r.left), chi_sum(&without_free(&r.mid)), chi_sum(&r.right), def.chi_of_name(FREE)) {
            (Some(l), Some(m), Some(rr), Some(free)) => {
                let need = l.add(&rr);
                Some((0..=8).any(|k| m.add(&free.scaled(k)) == need))
            }
            _ => None,
        }
    } else {
        match (chi_sum(&r.left), chi_sum(&r.mid), chi_sum(&r.right)) {
            (Some(l), Some(m), Some(rr)) => Some(m == l.add(&rr)),
            _ => None,
        }
    };
    let size = |v: &[String]| -> Option<usize> {
        v.iter().try_fold(0, |acc, n| Some(acc + def.mf_of_name(n)?.size))
    };
    let sizes = match (size(&r.left), size(&r.mid), size(&r.right)) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let size_additive = if r.free_allowance {
        sizes.map(|(a, b, c)| b <= a + c)
    } else {
        sizes.map(|(a, b, c)| b == a + c)
    };
    let split = r.is_split();
    let ext_right_left = if split {
        let sum = |v: &[String]| -> Option<MatFac> {
            let ms: Option<Vec<&MatFac>> = v.iter().map(|n| def.mf_of_name(n)).collect();
            mf_direct_sum_all(&def.f, &ms?).ok()
        };
        match (sum(&r.right), sum(&r.left)) {
            (Some(a), Some(b)) if a.size > 0 && b.size > 0 => ext1_dim_stable(&a, &b, def.trunc).ok(),
            (Some(_), Some(_)) => Some(0),
            _ => None,
        }
    } else {
        None
    };
    RuleReport {
        rule: r.clone(),
        chi_additive,
        size_additive,
        sizes,
        ext_right_left,
        split,
    }
}
