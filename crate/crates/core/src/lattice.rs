//! Enumeration of closed subcategories, Hasse diagrams, the stable
//! projection, rendering and golden comparison.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use petgraph::algo::is_isomorphic;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{stable_graphs, Family, SingularityDef};
use crate::closure::{CertKind, Certificate, Certifier, ClosureError, Engine, SubcatSet};
use crate::exec::Exec;
use crate::matfac::is_rigid;
use crate::rules::{eval_trace, parse_trace, validate_rule, FREE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("fixed point {{{}}} has no certificate", .0.join(","))]
    UncertifiedCandidate(Vec<String>),
    #[error("unknown format {0}")]
    FormatError(String),
    #[error("bad lattice json: {0}")]
    Parse(String),
    #[error(transparent)]
    Closure(#[from] ClosureError),
}

/// Closed subcategories by canonical member names, with covering pairs (lower, upper).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HassePoset {
    pub vertices: Vec<Vec<String>>,
    pub edges: Vec<(usize, usize)>,
}

/// Whether the named set covers `n`, reading `F*` as every `F_j`.
fn has_name(set: &[String], n: &str) -> bool {
    set.iter().any(|m| {
        m == n
            || m.strip_suffix('*')
                .and_then(|stem| n.strip_prefix(stem))
                .and_then(|rest| rest.strip_prefix('_'))
                .map(|k| k.parse::<u64>().is_ok())
                .unwrap_or(false)
    })
}

fn names_subset(a: &[String], b: &[String]) -> bool {
    a.iter().all(|n| has_name(b, n))
}

impl HassePoset {
    /// Transitive reduction of inclusion on the given name sets.
    pub fn from_sets(mut vertices: Vec<Vec<String>>) -> HassePoset {
        for v in vertices.iter_mut() {
            v.sort();
        }
        vertices.sort();
        vertices.dedup();
        let n = vertices.len();
        let lt = |i: usize, j: usize| i != j && names_subset(&vertices[i], &vertices[j]);
        let mut edges = vec![];
        for i in 0..n {
            for j in 0..n {
                if lt(i, j) && !(0..n).any(|k| lt(i, k) && lt(k, j)) {
                    edges.push((i, j));
                }
            }
        }
        HassePoset { vertices, edges }
    }

    pub fn index_of(&self, names: &[String]) -> Option<usize> {
        self.vertices.iter().position(|v| v.as_slice() == names)
    }

    /// Length of the longest chain from a minimal vertex.
    pub fn ranks(&self) -> Vec<usize> {
        let n = self.vertices.len();
        let mut rank = vec![0; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| self.vertices[i].len());
        for _ in 0..n {
            for &(a, b) in &self.edges {
                rank[b] = rank[b].max(rank[a] + 1);
            }
        }
        rank
    }

    fn digraph(&self) -> DiGraph<(), ()> {
        let mut g = DiGraph::new();
        let ns: Vec<_> = (0..self.vertices.len()).map(|_| g.add_node(())).collect();
        for &(a, b) in &self.edges {
            g.add_edge(ns[a], ns[b], ());
        }
        g
    }
}

pub fn display_name(v: &[String]) -> String {
    if v.is_empty() {
        "0".to_string()
    } else {
        format!("add{{{}}}", v.join(","))
    }
}

/// All fixed points, each carrying a certificate.
pub fn enumerate_closed(def: &SingularityDef, exec: Exec) -> Result<Vec<SubcatSet>, LatticeError> {
    enumerate_certified(def, exec, &[]).map(|v| v.into_iter().map(|(s, _)| s).collect())
}

/// Like [`enumerate_closed`] with some certificate kinds switched off.
pub fn enumerate_certified(
    def: &SingularityDef,
    exec: Exec,
    disabled: &[CertKind],
) -> Result<Vec<(SubcatSet, Certificate)>, LatticeError> {
    let eng = Engine::new(def)?;
    let fps = eng.fixed_points(exec)?;
    let mut cert = Certifier::new(def, fps.clone());
    for k in disabled {
        cert = cert.disable(*k);
    }
    fps.into_iter()
        .map(|s| match cert.certify(s) {
            Some(c) => Ok((s, c)),
            None => Err(LatticeError::UncertifiedCandidate(def.canonical_names(&s))),
        })
        .collect()
}

pub fn hasse(def: &SingularityDef, closed: &[SubcatSet]) -> HassePoset {
    HassePoset::from_sets(closed.iter().map(|s| def.canonical_names(s)).collect())
}

/// Induced order on the vertices containing R, with R dropped from the names.
pub fn stable_projection(p: &HassePoset) -> HassePoset {
    HassePoset::from_sets(
        p.vertices
            .iter()
            .filter(|v| v.iter().any(|n| n == FREE))
            .map(|v| v.iter().filter(|n| *n != FREE).cloned().collect())
            .collect(),
    )
}

/// Name of the reference stable graph isomorphic to `p`, if any.
pub fn match_stable_graph(p: &HassePoset) -> Option<String> {
    let g = p.digraph();
    for (name, edges) in stable_graphs() {
        let mut h = DiGraph::<(), ()>::new();
        let mut ids = BTreeMap::new();
        for (a, b) in &edges {
            for v in [a, b] {
                if !ids.contains_key(v) {
                    ids.insert(v.clone(), h.add_node(()));
                }
            }
            h.add_edge(ids[a], ids[b], ());
        }
        if is_isomorphic(&g, &h) {
            return Some(name);
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Dot,
    Json,
    Text,
}

impl FromStr for Format {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(Format::Dot),
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            _ => Err(LatticeError::FormatError(s.to_string())),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonPoset {
    vertices: Vec<Vec<String>>,
    edges: Vec<[usize; 2]>,
}

pub fn render(p: &HassePoset, format: Format) -> String {
    render_labeled(p, format, &HashMap::new())
}

/// Rendering with optional aliases shown beside the canonical names.
pub fn render_labeled(p: &HassePoset, format: Format, labels: &HashMap<Vec<String>, String>) -> String {
    let label = |v: &Vec<String>| match labels.get(v) {
        Some(a) => format!("{a} = {}", display_name(v)),
        None => display_name(v),
    };
    match format {
        Format::Dot => {
            let mut s = String::from("digraph lattice {\n  rankdir=BT;\n");
            for (i, v) in p.vertices.iter().enumerate() {
                let _ = writeln!(s, "  n{i} [label=\"{}\"];", label(v));
            }
            for (a, b) in &p.edges {
                let _ = writeln!(s, "  n{a} -> n{b};");
            }
            s.push_str("}\n");
            s
        }
        Format::Json => {
            let mut edges: Vec<[usize; 2]> = p.edges.iter().map(|&(a, b)| [a.min(b), a.max(b)]).collect();
            edges.sort();
            let j = JsonPoset {
                vertices: p.vertices.clone(),
                edges,
            };
            serde_json::to_string(&j).expect("plain data") + "\n"
        }
        Format::Text => {
            let ranks = p.ranks();
            let top = ranks.iter().copied().max().unwrap_or(0);
            let mut s = String::new();
            for r in 0..=top {
                let row: Vec<String> = (0..p.vertices.len())
                    .filter(|&i| ranks[i] == r)
                    .map(|i| label(&p.vertices[i]))
                    .collect();
                let _ = writeln!(s, "{r}: {}", row.join("  "));
            }
            let _ = writeln!(s, "{} vertices, {} edges", p.vertices.len(), p.edges.len());
            s
        }
    }
}

pub fn parse_json(s: &str) -> Result<HassePoset, LatticeError> {
    let j: JsonPoset = serde_json::from_str(s).map_err(|e| LatticeError::Parse(e.to_string()))?;
    let n = j.vertices.len();
    let mut edges = vec![];
    for [a, b] in j.edges {
        if a >= n || b >= n {
            return Err(LatticeError::Parse(format!("edge {a}-{b} out of range")));
        }
        if names_subset(&j.vertices[a], &j.vertices[b]) {
            edges.push((a, b));
        } else {
            edges.push((b, a));
        }
    }
    edges.sort();
    Ok(HassePoset {
        vertices: j.vertices,
        edges,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GoldenReport {
    pub missing_vertices: Vec<String>,
    pub extra_vertices: Vec<String>,
    pub missing_edges: Vec<(String, String)>,
    pub extra_edges: Vec<(String, String)>,
}

impl GoldenReport {
    pub fn pass(&self) -> bool {
        self.missing_vertices.is_empty()
            && self.extra_vertices.is_empty()
            && self.missing_edges.is_empty()
            && self.extra_edges.is_empty()
    }
}

/// Golden vertex labels keyed by canonical names.
pub fn golden_labels(def: &SingularityDef) -> Result<HashMap<Vec<String>, String>, LatticeError> {
    let mut out = HashMap::new();
    for (label, members) in &def.golden.vertices {
        let s = def.set_from_names(members).map_err(ClosureError::from)?;
        out.insert(def.canonical_names(&s), label.clone());
    }
    Ok(out)
}

pub fn compare_golden(p: &HassePoset, def: &SingularityDef) -> Result<GoldenReport, LatticeError> {
    let labels = golden_labels(def)?;
    let by_label: HashMap<&String, &Vec<String>> = labels.iter().map(|(k, v)| (v, k)).collect();
    let want_v: BTreeSet<Vec<String>> = labels.keys().cloned().collect();
    let have_v: BTreeSet<Vec<String>> = p.vertices.iter().cloned().collect();
    let mut want_e = BTreeSet::new();
    for (a, b) in &def.golden.edges {
        let get = |l: &String| {
            by_label
                .get(l)
                .map(|v| (*v).clone())
                .ok_or_else(|| LatticeError::Parse(format!("golden edge names unknown vertex {l}")))
        };
        want_e.insert((get(a)?, get(b)?));
    }
    let have_e: BTreeSet<(Vec<String>, Vec<String>)> = p
        .edges
        .iter()
        .map(|&(a, b)| (p.vertices[a].clone(), p.vertices[b].clone()))
        .collect();
    let dn = |v: &Vec<String>| display_name(v);
    Ok(GoldenReport {
        missing_vertices: want_v.difference(&have_v).map(dn).collect(),
        extra_vertices: have_v.difference(&want_v).map(dn).collect(),
        missing_edges: want_e.difference(&have_e).map(|(a, b)| (dn(a), dn(b))).collect(),
        extra_edges: have_e.difference(&want_e).map(|(a, b)| (dn(a), dn(b))).collect(),
    })
}

/// The poset for a definition, optionally projected.
pub fn lattice_of(def: &SingularityDef, stable: bool, exec: Exec) -> Result<HassePoset, LatticeError> {
    let p = hasse(def, &enumerate_closed(def, exec)?);
    Ok(if stable { stable_projection(&p) } else { p })
}

/// Aliases worth printing next to canonical names.
pub fn display_labels(def: &SingularityDef) -> Result<HashMap<Vec<String>, String>, LatticeError> {
    let even_d = def.family == Family::D && def.n.map(|n| n % 2 == 0).unwrap_or(false) && def.dim == 1;
    if even_d {
        golden_labels(def)
    } else {
        Ok(HashMap::new())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    /// Reported but not part of the verdict.
    pub advisory: bool,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub label: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass || c.advisory)
    }

    fn push(&mut self, name: &str, pass: bool, detail: String, advisory: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            detail,
            advisory,
        });
    }
}

/// Rule validation, trace replay, rigidity re-check and golden comparison.
pub fn verify(def: &SingularityDef, exec: Exec) -> Result<VerifyReport, LatticeError> {
    let mut rep = VerifyReport {
        label: def.label.clone(),
        ..Default::default()
    };

    let reports: Vec<_> = def.all_rules().map(|r| validate_rule(r, def)).collect();
    let chi_bad: Vec<String> = reports
        .iter()
        .filter(|r| r.chi_additive == Some(false))
        .map(|r| r.rule.to_string())
        .collect();
    let chi_unknown = reports.iter().filter(|r| r.chi_additive.is_none()).count();
    rep.push(
        "chi-additive",
        chi_bad.is_empty(),
        format!("{} rules, {} without chi, failing: {:?}", reports.len(), chi_unknown, chi_bad),
        false,
    );
    let size_bad: Vec<String> = reports
        .iter()
        .filter(|r| r.size_additive == Some(false))
        .map(|r| format!("{} {:?}", r.rule, r.sizes.unwrap_or_default()))
        .collect();
    rep.push(
        "size-additive",
        size_bad.is_empty(),
        format!("failing: {size_bad:?}"),
        true,
    );

    let mut trace_bad = vec![];
    for d in &def.derived {
        let ok = parse_trace(&d.trace)
            .and_then(|t| eval_trace(&t, def))
            .map(|r| r.same_as(&d.rule))
            .unwrap_or(false);
        if !ok {
            trace_bad.push(d.rule.provenance.clone());
        }
    }
    rep.push(
        "derived-replay",
        trace_bad.is_empty(),
        format!("{} derived, failing: {:?}", def.derived.len(), trace_bad),
        false,
    );

    let certified = enumerate_certified(def, exec, &[])?;
    let mut rigid_bad = vec![];
    let mut rigid_n = 0;
    for (s, c) in &certified {
        if *c != Certificate::Rigid {
            continue;
        }
        rigid_n += 1;
        let mods: Vec<_> = def
            .members(s)
            .into_iter()
            .filter_map(|k| def.indecs[k].mf())
            .collect();
        if !matches!(is_rigid(&mods, def.trunc), Ok(true)) {
            rigid_bad.push(display_name(&def.canonical_names(s)));
        }
    }
    rep.push(
        "rigid-sums",
        rigid_bad.is_empty(),
        format!("{rigid_n} rigid vertices, failing: {rigid_bad:?}"),
        false,
    );

    let closed: Vec<SubcatSet> = certified.iter().map(|(s, _)| *s).collect();
    let p = hasse(def, &closed);
    let g = compare_golden(&p, def)?;
    rep.push(
        "golden",
        g.pass(),
        format!("{} vertices, {} edges; diff {:?}", p.vertices.len(), p.edges.len(), g),
        false,
    );
    Ok(rep)
}
