//! Singularity definitions loaded from the TOML files under `data/`.
//!
//! Each file describes one ring: its equation, the indecomposables with their
//! factorizations, the known exact sequences, axioms, minimal primes and the
//! expected lattice. Names may carry `{expr}` templates over `n`, `l` and `j`.

pub mod expr;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Deserialize;
use thiserror::Error;

use crate::closure::SubcatSet;
use crate::linalg;
use crate::matfac::{chi, ChiVector, DecompTable, MatFac, MatFacError, PolyMatrix};
use crate::rules::{parse_sides, ExtRule, RuleError, TraceContext, FREE_ALLOWANCE};
use crate::series_ring::{CurveParam, TruncatedSeries};

use expr::{eval_int, expand, expand_range, expand_trace, parse_poly, Env};

pub const DEFAULT_WINDOW: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("unsupported singularity {0}")]
    UnsupportedSingularity(String),
    #[error("{0} has no minimal primes")]
    NoPrimes(String),
    #[error("unknown module name {0}")]
    UnknownName(String),
    #[error("cannot parse `{0}`")]
    Parse(String),
    #[error("non-integral value in `{0}`")]
    Inexact(String),
    #[error("unbound symbol {0}")]
    UnboundSymbol(String),
    #[error("bad data file: {0}")]
    Data(String),
    #[error("window {0} needs more than 64 slots")]
    WindowTooLarge(usize),
    #[error(transparent)]
    MatFac(#[from] MatFacError),
}

impl From<CatalogError> for RuleError {
    fn from(e: CatalogError) -> Self {
        RuleError::Trace(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    A,
    Ainf,
    D,
    Dinf,
    E6,
    E7,
    E8,
}

impl Family {
    pub fn is_countable(self) -> bool {
        matches!(self, Family::Ainf | Family::Dinf)
    }

    pub fn is_exceptional(self) -> bool {
        matches!(self, Family::E6 | Family::E7 | Family::E8)
    }
}

impl FromStr for Family {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "A" => Family::A,
            "Ainf" | "A∞" => Family::Ainf,
            "D" => Family::D,
            "Dinf" | "D∞" => Family::Dinf,
            "E6" => Family::E6,
            "E7" => Family::E7,
            "E8" => Family::E8,
            _ => return Err(CatalogError::UnsupportedSingularity(s.to_string())),
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::A => "A",
            Family::Ainf => "Ainf",
            Family::D => "D",
            Family::Dinf => "Dinf",
            Family::E6 => "E6",
            Family::E7 => "E7",
            Family::E8 => "E8",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Presentation {
    Free(MatFac),
    Matrix(MatFac),
    /// Known only by generators of an ideal.
    Ideal(Vec<String>),
    /// No presentation in the data.
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    Bit(usize),
    Tail(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndecSpec {
    pub name: String,
    pub presentation: Presentation,
    /// Family stem such as `M_`, with the index, for family members and tails.
    pub family: Option<String>,
    pub index: Option<i64>,
    pub tail: bool,
    pub flags: Vec<String>,
    pub syzygy: Option<String>,
    pub slot: Slot,
}

impl IndecSpec {
    pub fn mf(&self) -> Option<&MatFac> {
        match &self.presentation {
            Presentation::Free(m) | Presentation::Matrix(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self.presentation, Presentation::Free(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Axiom {
    FullClosure { name: String, cite: String },
    MemberImplies { member: String, implies: Vec<String>, cite: String },
    FullnessTransportsAlongSyzygy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Derived {
    pub rule: ExtRule,
    pub trace: String,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Golden {
    /// Label and member names; `*` stands for every token.
    pub vertices: Vec<(String, Vec<String>)>,
    pub edges: Vec<(String, String)>,
}

#[derive(Clone, Debug)]
pub struct TailFamily {
    pub stem: String,
    pub lo: i64,
    pub tail: String,
}

#[derive(Debug)]
pub struct SingularityDef {
    pub family: Family,
    pub n: Option<u32>,
    pub dim: u32,
    pub label: String,
    pub vars: Vec<String>,
    pub f: TruncatedSeries,
    /// Truncation for Ext computations.
    pub trunc: u32,
    pub window: Option<usize>,
    pub indecs: Vec<IndecSpec>,
    pub rules: Vec<ExtRule>,
    pub derived: Vec<Derived>,
    pub axioms: Vec<Axiom>,
    pub primes: Vec<CurveParam>,
    pub probes: Vec<MatFac>,
    pub golden: Golden,
    pub trivial_type: bool,
    pub syzygy_fullness: bool,
    pub chi: Vec<Option<ChiVector>>,
    pub tails: Vec<TailFamily>,
    aliases: HashMap<String, Vec<String>>,
    ranges: Vec<(String, i64, Option<i64>)>,
    table: OnceLock<Result<DecompTable, MatFacError>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawMat {
    Adj(String),
    Rows(Vec<Vec<String>>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndec {
    name: String,
    range: Option<[String; 2]>,
    phi: Option<RawMat>,
    psi: Option<RawMat>,
    syzygy: Option<String>,
    #[serde(default)]
    flags: Vec<String>,
    ideal: Option<Vec<String>>,
    chi: Option<Vec<usize>>,
    #[serde(default)]
    symbolic: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlag {
    name: String,
    set: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlias {
    name: String,
    to: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrime {
    label: String,
    curve: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    phi: Vec<Vec<String>>,
    psi: Vec<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxiom {
    full_closure: Option<String>,
    range: Option<[String; 2]>,
    member: Option<String>,
    implies: Option<Vec<String>>,
    cite: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    label: String,
    range: Option<[String; 2]>,
    seq: String,
    trace: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGolden {
    #[serde(default)]
    vertices: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    edges: Vec<[String; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDef {
    family: String,
    parity: Option<String>,
    dim: u32,
    vars: Vec<String>,
    f: String,
    index: Option<u32>,
    #[serde(default)]
    syzygy_fullness: bool,
    #[serde(default)]
    trivial: bool,
    #[serde(default)]
    params: BTreeMap<String, String>,
    #[serde(default)]
    indec: Vec<RawIndec>,
    #[serde(default)]
    flag: Vec<RawFlag>,
    #[serde(default)]
    alias: Vec<RawAlias>,
    #[serde(default)]
    prime: Vec<RawPrime>,
    #[serde(default)]
    probe: Vec<RawProbe>,
    #[serde(default)]
    axiom: Vec<RawAxiom>,
    #[serde(default)]
    rule: Vec<RawRule>,
    #[serde(default)]
    derived: Vec<RawRule>,
    #[serde(default)]
    golden: RawGolden,
}

fn source(family: Family, n: Option<u32>, dim: u32) -> Option<&'static str> {
    let odd = n.map(|n| n % 2 == 1);
    Some(match (family, dim, odd) {
        (Family::A, 0, _) => include_str!("../../data/a_zero.toml"),
        (Family::A, 1, Some(false)) => include_str!("../../data/a_even.toml"),
        (Family::A, 1, Some(true)) => include_str!("../../data/a_odd.toml"),
        (Family::A, 2, _) => include_str!("../../data/a_dim2.toml"),
        (Family::D, 1, Some(false)) => include_str!("../../data/d_even.toml"),
        (Family::D, 1, Some(true)) => include_str!("../../data/d_odd.toml"),
        (Family::D, 2, _) => include_str!("../../data/d_dim2.toml"),
        (Family::E6, 1, _) => include_str!("../../data/e6.toml"),
        (Family::E6, 2, _) => include_str!("../../data/e6_dim2.toml"),
        (Family::E7, 1, _) => include_str!("../../data/e7.toml"),
        (Family::E7, 2, _) => include_str!("../../data/e7_dim2.toml"),
        (Family::E8, 1, _) => include_str!("../../data/e8.toml"),
        (Family::E8, 2, _) => include_str!("../../data/e8_dim2.toml"),
        (Family::Ainf, 1, _) => include_str!("../../data/a_inf1.toml"),
        (Family::Ainf, 2, _) => include_str!("../../data/a_inf2.toml"),
        (Family::Dinf, 1, _) => include_str!("../../data/d_inf1.toml"),
        (Family::Dinf, 2, _) => include_str!("../../data/d_inf2.toml"),
        _ => return None,
    })
}

/// Edge lists of the unlabeled lattices of the singularity category.
pub fn stable_graphs() -> Vec<(String, Vec<(String, String)>)> {
    #[derive(Deserialize)]
    struct G {
        name: String,
        edges: Vec<[String; 2]>,
    }
    #[derive(Deserialize)]
    struct Gs {
        graph: Vec<G>,
    }
    let gs: Gs = toml::from_str(include_str!("../../data/stable_graphs.toml")).expect("stable graph data");
    gs.graph
        .into_iter()
        .map(|g| (g.name, g.edges.into_iter().map(|[a, b]| (a, b)).collect()))
        .collect()
}

fn unsupported(family: Family, n: Option<u32>, dim: u32) -> CatalogError {
    let n = n.map(|n| n.to_string()).unwrap_or_default();
    CatalogError::UnsupportedSingularity(format!("{family}{n} in dimension {dim}"))
}

/// Reduces the dimension to at most 2 keeping its parity.
pub fn knorrer_reduce(family: Family, n: Option<u32>, dim: u32) -> Result<(Family, Option<u32>, u32), CatalogError> {
    let d = match (family, dim) {
        (Family::A, 0) => 0,
        (_, 0) => return Err(unsupported(family, n, dim)),
        (_, d) if d % 2 == 1 => 1,
        _ => 2,
    };
    Ok((family, n, d))
}

pub fn get_singularity(family: Family, n: Option<u32>, dim: u32) -> Result<SingularityDef, CatalogError> {
    get_singularity_window(family, n, dim, DEFAULT_WINDOW)
}

/// Like [`get_singularity`], with infinite families cut at index `window`.
pub fn get_singularity_window(
    family: Family,
    n: Option<u32>,
    dim: u32,
    window: usize,
) -> Result<SingularityDef, CatalogError> {
    let (family, n, dim) = knorrer_reduce(family, n, dim)?;
    let n = match family {
        Family::A if n.map(|n| n >= 1).unwrap_or(false) => n,
        Family::D if n.map(|n| n >= 4).unwrap_or(false) => n,
        Family::A | Family::D => return Err(unsupported(family, n, dim)),
        _ => None,
    };
    let src = source(family, n, dim).ok_or_else(|| unsupported(family, n, dim))?;
    let raw: RawDef = toml::from_str(src).map_err(|e| CatalogError::Data(e.to_string()))?;
    if raw.family.parse::<Family>()? != family || raw.dim != dim {
        return Err(CatalogError::Data(format!("{} does not describe {family}", raw.family)));
    }
    if let (Some(p), Some(n)) = (&raw.parity, n) {
        if (p == "odd") != (n % 2 == 1) {
            return Err(CatalogError::Data(format!("parity {p} for n = {n}")));
        }
    }
    build(raw, family, n, dim, window)
}

fn label_of(family: Family, n: Option<u32>, dim: u32) -> String {
    match (family, n) {
        (Family::Ainf, _) => format!("A_inf^{dim}"),
        (Family::Dinf, _) => format!("D_inf^{dim}"),
        (f, Some(n)) => format!("{f}_{n}^{dim}"),
        (f, None) => format!("{}_{}^{dim}", &f.to_string()[..1], &f.to_string()[1..]),
    }
}

fn template_stem(name: &str) -> Option<&str> {
    name.find('{').map(|k| &name[..k])
}

fn tail_name(stem: &str) -> String {
    format!("{}*", stem.trim_end_matches('_'))
}

fn adjugate3(m: &PolyMatrix) -> Result<PolyMatrix, CatalogError> {
    if m.len() != 3 || m.iter().any(|r| r.len() != 3) {
        return Err(CatalogError::Data("adj needs a 3x3 matrix".into()));
    }
    let minor = |r: usize, c: usize| {
        let rs: Vec<usize> = (0..3).filter(|&k| k != r).collect();
        let cs: Vec<usize> = (0..3).filter(|&k| k != c).collect();
        &(&m[rs[0]][cs[0]] * &m[rs[1]][cs[1]]) - &(&m[rs[0]][cs[1]] * &m[rs[1]][cs[0]])
    };
    Ok((0..3)
        .map(|i| {
            (0..3)
                .map(|j| {
                    let c = minor(j, i);
                    if (i + j) % 2 == 1 {
                        c.neg()
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect())
}

struct Builder<'a> {
    vars: &'a [String],
    storage: u32,
}

impl Builder<'_> {
    fn matrix(&self, rows: &[Vec<String>], env: &Env) -> Result<PolyMatrix, CatalogError> {
        rows.iter()
            .map(|r| r.iter().map(|e| parse_poly(e, self.vars, self.storage, env)).collect())
            .collect()
    }

    fn mf(&self, f: &TruncatedSeries, phi: &RawMat, psi: &RawMat, env: &Env) -> Result<MatFac, CatalogError> {
        for m in [phi, psi] {
            if let RawMat::Adj(s) = m {
                if s != "adj" {
                    return Err(CatalogError::Parse(s.clone()));
                }
            }
        }
        let (phi, psi) = match (phi, psi) {
            (RawMat::Rows(a), RawMat::Rows(b)) => (self.matrix(a, env)?, self.matrix(b, env)?),
            (RawMat::Rows(a), RawMat::Adj(_)) => {
                let a = self.matrix(a, env)?;
                let b = adjugate3(&a)?;
                (a, b)
            }
            (RawMat::Adj(_), RawMat::Rows(b)) => {
                let b = self.matrix(b, env)?;
                (adjugate3(&b)?, b)
            }
            _ => return Err(CatalogError::Data("both matrices are adjugates".into())),
        };
        Ok(MatFac::new(f.clone(), phi, psi))
    }
}

fn bound(s: &str, env: &Env) -> Result<Option<i64>, CatalogError> {
    if s == "inf" {
        Ok(None)
    } else {
        eval_int(s, env).map(Some)
    }
}

fn build(raw: RawDef, family: Family, n: Option<u32>, dim: u32, window: usize) -> Result<SingularityDef, CatalogError> {
    let mut env = Env::new();
    if let Some(n) = n.or(raw.index) {
        env.insert("n".into(), n as i64);
    }
    for (k, v) in &raw.params {
        let val = eval_int(v, &env)?;
        env.insert(k.clone(), val);
    }
    let infinite = raw
        .indec
        .iter()
        .any(|i| i.range.as_ref().map(|r| r[1] == "inf").unwrap_or(false));
    let window = infinite.then_some(window);
    let size_index = match (n, raw.index, window) {
        (Some(n), _, _) => n,
        (_, Some(k), _) => k,
        (_, _, Some(w)) => w as u32,
        _ => DEFAULT_WINDOW as u32,
    };
    let trunc = 2 * (size_index + 3);
    let storage = 2 * trunc + 8;
    let vars = raw.vars.clone();
    let b = Builder {
        vars: &vars,
        storage,
    };
    let f = parse_poly(&raw.f, &vars, storage, &env)?;

    // indecomposables, with tails last
    let mut indecs: Vec<IndecSpec> = vec![];
    let mut tails: Vec<TailFamily> = vec![];
    let mut ranges = vec![];
    let mut hints: HashMap<String, Vec<usize>> = HashMap::new();
    let mut syz_templates: Vec<(usize, String, Env)> = vec![];
    let flag_of: HashMap<String, Vec<String>> = raw.flag.iter().map(|fl| (fl.name.clone(), fl.set.clone())).collect();
    let mut pending_tails = vec![];
    for ri in &raw.indec {
        let instances: Vec<(Option<i64>, Env)> = match &ri.range {
            None => vec![(None, env.clone())],
            Some([lo, hi]) => {
                let lo = eval_int(lo, &env)?;
                let hi = bound(hi, &env)?;
                let stem = template_stem(&ri.name).ok_or_else(|| CatalogError::Parse(ri.name.clone()))?;
                ranges.push((stem.to_string(), lo, hi));
                let top = hi.unwrap_or(window.unwrap_or(0) as i64);
                if hi.is_none() {
                    pending_tails.push((stem.to_string(), lo, ri));
                }
                (lo..=top)
                    .map(|j| {
                        let mut e = env.clone();
                        e.insert("j".into(), j);
                        (Some(j), e)
                    })
                    .collect()
            }
        };
        if ri.symbolic && (ri.phi.is_some() || ri.psi.is_some()) {
            return Err(CatalogError::Data(format!("symbolic {} has matrices", ri.name)));
        }
        for (j, e) in instances {
            let name = expand(&ri.name, &e)?;
            let presentation = match (&ri.phi, &ri.psi) {
                (Some(phi), Some(psi)) => Presentation::Matrix(b.mf(&f, phi, psi, &e)?),
                _ if ri.flags.iter().any(|fl| fl == "free") => Presentation::Free(MatFac::free(&f)),
                _ if ri.ideal.is_some() => Presentation::Ideal(ri.ideal.clone().unwrap()),
                _ => Presentation::External,
            };
            let mut flags = ri.flags.clone();
            flags.extend(flag_of.get(&name).cloned().unwrap_or_default());
            if let Some(c) = &ri.chi {
                hints.insert(name.clone(), c.clone());
            }
            if let Some(s) = &ri.syzygy {
                syz_templates.push((indecs.len(), s.clone(), e.clone()));
            }
            indecs.push(IndecSpec {
                name,
                presentation,
                family: j.and(template_stem(&ri.name).map(String::from)),
                index: j,
                tail: false,
                flags,
                syzygy: None,
                slot: Slot::Bit(indecs.len()),
            });
        }
    }
    for (stem, lo, ri) in pending_tails {
        let w = window.unwrap_or(0) as i64;
        let mut e = env.clone();
        e.insert("j".into(), w + 1);
        let presentation = match (&ri.phi, &ri.psi) {
            (Some(phi), Some(psi)) => Presentation::Matrix(b.mf(&f, phi, psi, &e)?),
            _ => Presentation::External,
        };
        if let Some(s) = &ri.syzygy {
            syz_templates.push((indecs.len(), s.clone(), e.clone()));
        }
        let tail = tail_name(&stem);
        indecs.push(IndecSpec {
            name: tail.clone(),
            presentation,
            family: Some(stem.clone()),
            index: None,
            tail: true,
            flags: vec![],
            syzygy: None,
            slot: Slot::Tail(tails.len()),
        });
        tails.push(TailFamily { stem, lo, tail });
    }
    if indecs.iter().filter(|i| !i.tail).count() > 64 || tails.len() > 64 {
        return Err(CatalogError::WindowTooLarge(window.unwrap_or(0)));
    }

    let mut aliases = HashMap::new();
    for a in &raw.alias {
        let to = a.to.iter().map(|t| expand(t, &env)).collect::<Result<Vec<_>, _>>()?;
        aliases.insert(expand(&a.name, &env)?, to);
    }

    let mut def = SingularityDef {
        family,
        n,
        dim,
        label: label_of(family, n, dim),
        vars: vars.clone(),
        f: f.clone(),
        trunc,
        window,
        indecs,
        rules: vec![],
        derived: vec![],
        axioms: vec![],
        primes: vec![],
        probes: vec![],
        golden: Golden::default(),
        trivial_type: raw.trivial,
        syzygy_fullness: raw.syzygy_fullness,
        chi: vec![],
        tails,
        aliases,
        ranges,
        table: OnceLock::new(),
    };

    for (k, s, e) in syz_templates {
        let target = expand(&s, &e)?;
        let resolved = def.resolve(&target)?;
        match resolved.as_deref() {
            Some([one]) => def.indecs[k].syzygy = Some(one.clone()),
            _ => return Err(CatalogError::UnknownName(target)),
        }
    }
    for t in 0..def.tails.len() {
        let syz = def
            .family_members(t)
            .find_map(|m| def.indecs[m].syzygy.clone())
            .and_then(|s| def.indec(&s).and_then(|i| i.family.clone()))
            .and_then(|stem| def.tails.iter().find(|u| u.stem == stem))
            .map(|u| u.tail.clone());
        let k = def.index_of(&def.tails[t].tail).expect("tail token");
        def.indecs[k].syzygy = syz;
    }

    let t_var = vec!["t".to_string()];
    for p in &raw.prime {
        let subs = p
            .curve
            .iter()
            .map(|c| parse_poly(c, &t_var, storage, &env))
            .collect::<Result<Vec<_>, _>>()?;
        def.primes.push(CurveParam::new(&p.label, subs));
    }
    for p in &raw.probe {
        def.probes
            .push(b.mf(&f, &RawMat::Rows(p.phi.clone()), &RawMat::Rows(p.psi.clone()), &env)?);
    }

    for a in &raw.axiom {
        if let Some(fc) = &a.full_closure {
            let names = match &a.range {
                None => vec![expand(fc, &env)?],
                Some([lo, hi]) => {
                    let (lo, hi) = (eval_int(lo, &env)?, eval_int(hi, &env)?);
                    (lo..=hi)
                        .map(|j| {
                            let mut e = env.clone();
                            e.insert("j".into(), j);
                            expand(fc, &e)
                        })
                        .collect::<Result<_, _>>()?
                }
            };
            for nm in names {
                for r in def.resolve_strict(&nm)? {
                    def.axioms.push(Axiom::FullClosure {
                        name: r,
                        cite: a.cite.clone(),
                    });
                }
            }
        } else if let (Some(m), Some(imp)) = (&a.member, &a.implies) {
            let mut implies = vec![];
            for i in imp {
                implies.extend(def.resolve_strict(&expand(i, &env)?)?);
            }
            for member in def.resolve_strict(&expand(m, &env)?)? {
                def.axioms.push(Axiom::MemberImplies {
                    member,
                    implies: implies.clone(),
                    cite: a.cite.clone(),
                });
            }
        } else {
            return Err(CatalogError::Data("axiom without a kind".into()));
        }
    }
    if def.syzygy_fullness {
        def.axioms.push(Axiom::FullnessTransportsAlongSyzygy);
    }

    def.rules = def.instantiate(&raw.rule, &env)?.into_iter().map(|(r, _)| r).collect();
    def.derived = def
        .instantiate(&raw.derived, &env)?
        .into_iter()
        .map(|(rule, trace)| Derived {
            rule,
            trace: trace.unwrap_or_default(),
        })
        .collect();

    for (label, members) in &raw.golden.vertices {
        let mut out = vec![];
        for m in members {
            if m == "*" || m.ends_with('*') {
                out.push(m.clone());
                continue;
            }
            for nm in expand_range(m, &env)? {
                out.extend(def.resolve_strict(&nm)?);
            }
        }
        def.golden.vertices.push((label.clone(), out));
    }
    def.golden.edges = raw.golden.edges.iter().map(|[a, b]| (a.clone(), b.clone())).collect();

    def.chi = def.compute_chi(&hints)?;
    Ok(def)
}

impl SingularityDef {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.indecs.iter().position(|i| i.name == name)
    }

    pub fn indec(&self, name: &str) -> Option<&IndecSpec> {
        self.indecs.iter().find(|i| i.name == name)
    }

    pub fn mf_of_name(&self, name: &str) -> Option<&MatFac> {
        self.indec(name).and_then(|i| i.mf())
    }

    pub fn chi_of_name(&self, name: &str) -> Option<&ChiVector> {
        self.index_of(name).and_then(|k| self.chi[k].as_ref())
    }

    pub fn is_countable(&self) -> bool {
        self.window.is_some()
    }

    /// Canonical names for a raw name; `None` when it lies outside every range.
    pub fn resolve(&self, raw: &str) -> Result<Option<Vec<String>>, CatalogError> {
        if let Some(to) = self.aliases.get(raw) {
            let mut out = vec![];
            for t in to {
                match self.resolve(t)? {
                    Some(v) => out.extend(v),
                    None => return Ok(None),
                }
            }
            return Ok(Some(out));
        }
        if raw == FREE_ALLOWANCE || self.index_of(raw).is_some() {
            return Ok(Some(vec![raw.to_string()]));
        }
        for (stem, lo, hi) in &self.ranges {
            let Some(idx) = raw.strip_prefix(stem.as_str()).and_then(|s| s.parse::<i64>().ok()) else {
                continue;
            };
            if idx < *lo || hi.map(|h| idx > h).unwrap_or(false) {
                return Ok(None);
            }
            if hi.is_none() {
                if let Some(t) = self.tails.iter().find(|t| &t.stem == stem) {
                    return Ok(Some(vec![t.tail.clone()]));
                }
            }
        }
        Err(CatalogError::UnknownName(raw.to_string()))
    }

    pub fn resolve_strict(&self, raw: &str) -> Result<Vec<String>, CatalogError> {
        self.resolve(raw)?
            .ok_or_else(|| CatalogError::UnknownName(raw.to_string()))
    }

    fn instantiate(&self, raws: &[RawRule], env: &Env) -> Result<Vec<(ExtRule, Option<String>)>, CatalogError> {
        let mut out = vec![];
        for rr in raws {
            let js: Vec<Option<i64>> = match &rr.range {
                None => vec![None],
                Some([lo, hi]) => {
                    let lo = eval_int(lo, env)?;
                    let hi = match bound(hi, env)? {
                        Some(h) => h,
                        None => self.window.unwrap_or(0) as i64 + 1,
                    };
                    (lo..=hi).map(Some).collect()
                }
            };
            'inst: for j in js {
                let mut e = env.clone();
                if let Some(j) = j {
                    e.insert("j".into(), j);
                }
                let label = expand(&rr.label, &e)?;
                let sides = parse_sides(&expand(&rr.seq, &e)?).map_err(|_| CatalogError::Parse(rr.seq.clone()))?;
                let mut res: [Vec<String>; 3] = Default::default();
                for (k, side) in sides.iter().enumerate() {
                    for nm in side {
                        match self.resolve(nm)? {
                            Some(v) => res[k].extend(v),
                            None => continue 'inst,
                        }
                    }
                }
                let [l, m, r] = res;
                let trace = rr.trace.as_ref().map(|t| expand_trace(t, &e)).transpose()?;
                out.push((ExtRule::new(l, m, r, &label), trace));
            }
        }
        Ok(out)
    }

    fn compute_chi(&self, hints: &HashMap<String, Vec<usize>>) -> Result<Vec<Option<ChiVector>>, CatalogError> {
        let k = self.primes.len();
        let mut out: Vec<Option<ChiVector>> = self
            .indecs
            .iter()
            .map(|i| match i.mf() {
                Some(m) if k > 0 => chi(m, &self.primes).map(Some),
                _ => Ok(hints.get(&i.name).map(|d| ChiVector { dims: d.clone() })),
            })
            .collect::<Result<_, _>>()?;
        if k == 0 {
            return Ok(out);
        }
        let unknown: Vec<usize> = (0..out.len()).filter(|&i| out[i].is_none()).collect();
        if unknown.is_empty() {
            return Ok(out);
        }
        let col = |name: &str| unknown.iter().position(|&u| self.indecs[u].name == name);
        let rules: Vec<&ExtRule> = self
            .all_rules()
            .filter(|r| !r.free_allowance && r.names().any(|n| col(n).is_some()))
            .collect();
        let mut solved: Vec<Vec<usize>> = vec![vec![0; k]; unknown.len()];
        for p in 0..k {
            let mut a = vec![];
            let mut rhs = vec![];
            for r in &rules {
                let mut row = vec![BigRational::zero(); unknown.len()];
                let mut b = BigRational::zero();
                let mut add = |names: &[String], sign: i64| {
                    for nm in names {
                        let s = BigRational::from_integer(sign.into());
                        match col(nm) {
                            Some(c) => row[c] += &s,
                            None => {
                                let v = self
                                    .index_of(nm)
                                    .and_then(|k| out[k].as_ref())
                                    .map(|c| c.dims[p])
                                    .unwrap_or(0);
                                b -= s * BigRational::from_integer((v as i64).into());
                            }
                        }
                    }
                };
                add(&r.mid, 1);
                add(&r.left, -1);
                add(&r.right, -1);
                a.push(row);
                rhs.push(b);
            }
            let Some(sol) = linalg::solve_unique(&a, &rhs, unknown.len()) else {
                return Ok(out);
            };
            for (u, v) in sol.iter().enumerate() {
                if !v.is_integer() || v < &BigRational::zero() {
                    return Ok(out);
                }
                solved[u][p] = v.to_integer().to_usize().unwrap_or(0);
            }
        }
        for (u, &i) in unknown.iter().enumerate() {
            out[i] = Some(ChiVector {
                dims: solved[u].clone(),
            });
        }
        Ok(out)
    }

    pub fn all_rules(&self) -> impl Iterator<Item = &ExtRule> {
        self.rules.iter().chain(self.derived.iter().map(|d| &d.rule))
    }

    pub fn syzygy_map(&self) -> HashMap<String, String> {
        self.indecs
            .iter()
            .filter_map(|i| i.syzygy.clone().map(|s| (i.name.clone(), s)))
            .collect()
    }

    /// Name-to-slot encoding; `*` is every token and `F*` also sets the family's members.
    pub fn set_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<SubcatSet, CatalogError> {
        let mut s = SubcatSet::default();
        for nm in names {
            let nm = nm.as_ref();
            if nm == "*" {
                return Ok(self.full_set());
            }
            let k = self.index_of(nm).ok_or_else(|| CatalogError::UnknownName(nm.to_string()))?;
            s.insert(self.indecs[k].slot);
            if let Slot::Tail(t) = self.indecs[k].slot {
                for m in self.family_members(t) {
                    s.insert(self.indecs[m].slot);
                }
            }
        }
        Ok(s)
    }

    pub fn family_members(&self, tail: usize) -> impl Iterator<Item = usize> + '_ {
        let stem = &self.tails[tail].stem;
        (0..self.indecs.len()).filter(move |&k| !self.indecs[k].tail && self.indecs[k].family.as_deref() == Some(stem.as_str()))
    }

    pub fn full_set(&self) -> SubcatSet {
        let mut s = SubcatSet::default();
        for i in &self.indecs {
            s.insert(i.slot);
        }
        s
    }

    pub fn members(&self, s: &SubcatSet) -> Vec<usize> {
        (0..self.indecs.len()).filter(|&k| s.contains(self.indecs[k].slot)).collect()
    }

    /// Sorted member names; a complete family is shown by its tail alone.
    pub fn canonical_names(&self, s: &SubcatSet) -> Vec<String> {
        let mut hidden = vec![false; self.indecs.len()];
        for (t, _) in self.tails.iter().enumerate() {
            let members: Vec<usize> = self.family_members(t).collect();
            if s.contains(Slot::Tail(t)) && members.iter().all(|&m| s.contains(self.indecs[m].slot)) {
                for m in members {
                    hidden[m] = true;
                }
            }
        }
        let mut v: Vec<String> = self
            .members(s)
            .into_iter()
            .filter(|&k| !hidden[k])
            .map(|k| self.indecs[k].name.clone())
            .collect();
        v.sort();
        v
    }

    /// Fingerprint table over every presented indecomposable, built on first use.
    pub fn decomp_table(&self) -> Result<&DecompTable, MatFacError> {
        self.table
            .get_or_init(|| {
                let cands: Vec<(String, MatFac)> = self
                    .indecs
                    .iter()
                    .filter(|i| !i.tail)
                    .filter_map(|i| i.mf().map(|m| (i.name.clone(), m.clone())))
                    .collect();
                DecompTable::build(&self.f, &self.primes, self.trunc, &cands, &self.probes)
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

impl TraceContext for SingularityDef {
    fn rule(&self, label: &str) -> Option<ExtRule> {
        self.all_rules().find(|r| r.provenance == label).cloned()
    }

    fn resolve(&self, name: &str) -> Result<Vec<String>, RuleError> {
        Ok(self.resolve_strict(name)?)
    }

    fn syzygies(&self) -> HashMap<String, String> {
        self.syzygy_map()
    }
}

pub fn base_rules(def: &SingularityDef) -> Vec<ExtRule> {
    def.rules.clone()
}

pub fn minimal_primes(def: &SingularityDef) -> Result<Vec<CurveParam>, CatalogError> {
    if def.dim == 0 {
        return Err(CatalogError::NoPrimes(def.label.clone()));
    }
    Ok(def.primes.clone())
}

/// Every supported definition with n up to `max_n`.
pub fn supported(max_n: u32) -> Vec<(Family, Option<u32>, u32)> {
    let mut out = vec![];
    for n in 1..=max_n {
        out.push((Family::A, Some(n), 1));
    }
    for n in 4..=max_n {
        out.push((Family::D, Some(n), 1));
    }
    for f in [Family::E6, Family::E7, Family::E8] {
        out.push((f, None, 1));
    }
    for n in 1..=max_n {
        out.push((Family::A, Some(n), 0));
        out.push((Family::A, Some(n), 2));
    }
    for n in 4..=max_n {
        out.push((Family::D, Some(n), 2));
    }
    for f in [Family::E6, Family::E7, Family::E8] {
        out.push((f, None, 2));
    }
    for f in [Family::Ainf, Family::Dinf] {
        out.push((f, None, 1));
        out.push((f, None, 2));
    }
    out
}
