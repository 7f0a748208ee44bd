//! Extension closure over a singularity's named indecomposables, and the
//! certificates that a fixed point is really extension-closed.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::catalog::{get_singularity_window, Axiom, CatalogError, Family, SingularityDef, Slot};
use crate::exec::Exec;
use crate::matfac::{ext1_dim_stable, MatFacError};
use crate::rules::{syzygy_transport, FREE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosureError {
    #[error("closure of {{{0}}} differs between window {1} and {2}")]
    WindowUnstable(String, usize, usize),
    #[error("too many indecomposables to enumerate ({0})")]
    TooLarge(usize),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    MatFac(#[from] MatFacError),
}

/// Membership over windowed tokens plus one flag per infinite family tail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubcatSet {
    pub bits: u64,
    pub tails: u64,
}

impl SubcatSet {
    pub fn contains(&self, s: Slot) -> bool {
        match s {
            Slot::Bit(k) => self.bits >> k & 1 == 1,
            Slot::Tail(k) => self.tails >> k & 1 == 1,
        }
    }

    pub fn insert(&mut self, s: Slot) {
        match s {
            Slot::Bit(k) => self.bits |= 1 << k,
            Slot::Tail(k) => self.tails |= 1 << k,
        }
    }

    pub fn remove(&mut self, s: Slot) {
        match s {
            Slot::Bit(k) => self.bits &= !(1 << k),
            Slot::Tail(k) => self.tails &= !(1 << k),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0 && self.tails == 0
    }

    pub fn is_subset(&self, o: &SubcatSet) -> bool {
        self.bits & !o.bits == 0 && self.tails & !o.tails == 0
    }

    pub fn union(&self, o: &SubcatSet) -> SubcatSet {
        SubcatSet {
            bits: self.bits | o.bits,
            tails: self.tails | o.tails,
        }
    }

    pub fn intersection(&self, o: &SubcatSet) -> SubcatSet {
        SubcatSet {
            bits: self.bits & o.bits,
            tails: self.tails & o.tails,
        }
    }

    pub fn len(&self) -> usize {
        (self.bits.count_ones() + self.tails.count_ones()) as usize
    }
}

#[derive(Clone, Copy, Debug)]
struct Compiled {
    ends: SubcatSet,
    mid: SubcatSet,
}

/// Rule saturation at one window.
#[derive(Clone, Debug)]
struct Saturator {
    rules: Vec<Compiled>,
    implies: Vec<(SubcatSet, SubcatSet)>,
    full_gens: SubcatSet,
    full: SubcatSet,
}

fn slot_of(def: &SingularityDef, name: &str) -> Result<Slot, ClosureError> {
    def.indec(name)
        .map(|i| i.slot)
        .ok_or_else(|| CatalogError::UnknownName(name.to_string()).into())
}

fn set_of<S: AsRef<str>>(def: &SingularityDef, names: &[S]) -> Result<SubcatSet, ClosureError> {
    let mut s = SubcatSet::default();
    for n in names {
        s.insert(slot_of(def, n.as_ref())?);
    }
    Ok(s)
}

impl Saturator {
    fn new(def: &SingularityDef) -> Result<Self, ClosureError> {
        let syz = def.syzygy_map();
        let mut rules = vec![];
        for r in def.all_rules() {
            let mut ends = set_of(def, &r.left)?;
            ends = ends.union(&set_of(def, &r.right)?);
            rules.push(Compiled {
                ends,
                mid: set_of(def, &r.mid)?,
            });
            if let Ok(t) = syzygy_transport(r, &syz) {
                let ends = set_of(def, &t.left)?.union(&set_of(def, &t.right)?);
                rules.push(Compiled {
                    ends,
                    mid: set_of(def, &t.mid)?,
                });
            }
        }
        let mut implies = vec![];
        let mut full_gens = SubcatSet::default();
        for a in &def.axioms {
            match a {
                Axiom::FullClosure { name, .. } => full_gens.insert(slot_of(def, name)?),
                Axiom::MemberImplies { member, implies: to, .. } => {
                    implies.push((set_of(def, &[member])?, set_of(def, to)?));
                }
                Axiom::FullnessTransportsAlongSyzygy => {}
            }
        }
        let mut sat = Saturator {
            rules,
            implies,
            full_gens,
            full: def.full_set(),
        };
        sat.grow_full_gens(def, &syz)?;
        Ok(sat)
    }

    fn grow_full_gens(&mut self, def: &SingularityDef, syz: &HashMap<String, String>) -> Result<(), ClosureError> {
        loop {
            let before = self.full_gens;
            for i in &def.indecs {
                if self.full_gens.contains(i.slot) {
                    if def.syzygy_fullness {
                        if let Some(s) = syz.get(&i.name) {
                            self.full_gens.insert(slot_of(def, s)?);
                        }
                    }
                    continue;
                }
                let mut g = SubcatSet::default();
                g.insert(i.slot);
                if self.saturate(g) == self.full {
                    self.full_gens.insert(i.slot);
                }
            }
            if self.full_gens == before {
                return Ok(());
            }
        }
    }

    fn saturate(&self, mut s: SubcatSet) -> SubcatSet {
        loop {
            if !s.intersection(&self.full_gens).is_empty() {
                return self.full;
            }
            let before = s;
            for r in &self.rules {
                if r.ends.is_subset(&s) {
                    s = s.union(&r.mid);
                }
            }
            for (m, to) in &self.implies {
                if m.is_subset(&s) {
                    s = s.union(to);
                }
            }
            if s == before {
                return s;
            }
        }
    }
}

/// The same ring at window W + 2, with the token correspondence.
struct Wide {
    window: usize,
    sat: Saturator,
    /// For each token at window W, its slots at W + 2.
    lift: Vec<(Slot, Vec<Slot>)>,
}

/// Closure engine for one definition.
pub struct Engine<'a> {
    pub def: &'a SingularityDef,
    sat: Saturator,
    wide: Option<Wide>,
}

impl<'a> Engine<'a> {
    pub fn new(def: &'a SingularityDef) -> Result<Self, ClosureError> {
        let sat = Saturator::new(def)?;
        let wide = match def.window {
            None => None,
            Some(w) => {
                let wd = get_singularity_window(def.family, def.n, def.dim, w + 2)?;
                let mut lift = vec![];
                for i in &def.indecs {
                    let names: Vec<String> = match (&i.family, i.tail) {
                        (Some(stem), true) => {
                            vec![format!("{stem}{}", w + 1), format!("{stem}{}", w + 2), i.name.clone()]
                        }
                        _ => vec![i.name.clone()],
                    };
                    let slots = names.iter().map(|n| slot_of(&wd, n)).collect::<Result<_, _>>()?;
                    lift.push((i.slot, slots));
                }
                Some(Wide {
                    window: w + 2,
                    sat: Saturator::new(&wd)?,
                    lift,
                })
            }
        };
        Ok(Engine { def, sat, wide })
    }

    pub fn full(&self) -> SubcatSet {
        self.sat.full
    }

    /// Tokens whose closure is everything.
    pub fn full_generators(&self) -> SubcatSet {
        self.sat.full_gens
    }

    /// Closure without the window comparison.
    pub fn saturate(&self, gens: SubcatSet) -> SubcatSet {
        self.sat.saturate(gens)
    }

    pub fn ext_closure(&self, gens: SubcatSet) -> Result<SubcatSet, ClosureError> {
        let c = self.sat.saturate(gens);
        let Some(wide) = &self.wide else {
            return Ok(c);
        };
        let mut g = SubcatSet::default();
        for (s, up) in &wide.lift {
            if gens.contains(*s) {
                for u in up {
                    g.insert(*u);
                }
            }
        }
        let cw = wide.sat.saturate(g);
        let unstable = || {
            ClosureError::WindowUnstable(
                self.def.canonical_names(&gens).join(","),
                self.def.window.unwrap_or(0),
                wide.window,
            )
        };
        let mut p = SubcatSet::default();
        for (s, up) in &wide.lift {
            let hit = up.iter().filter(|u| cw.contains(**u)).count();
            if hit == up.len() {
                p.insert(*s);
            } else if hit > 0 {
                return Err(unstable());
            }
        }
        if p != c {
            return Err(unstable());
        }
        Ok(c)
    }

    /// Every distinct closure of a generator set.
    pub fn fixed_points(&self, exec: Exec) -> Result<Vec<SubcatSet>, ClosureError> {
        let mut out: BTreeSet<SubcatSet> = BTreeSet::new();
        if self.def.is_countable() {
            let blocks = self.token_blocks();
            let mut frontier = vec![self.ext_closure(SubcatSet::default())?];
            out.insert(frontier[0]);
            while !frontier.is_empty() {
                let jobs: Vec<SubcatSet> = frontier
                    .iter()
                    .flat_map(|s| blocks.iter().filter(|b| !b.is_subset(s)).map(|b| s.union(b)))
                    .collect::<HashSet<_>>()
                    .into_iter()
                    .collect();
                let got = exec.map(&jobs, |g| self.ext_closure(*g));
                frontier.clear();
                for c in got {
                    let c = c?;
                    if out.insert(c) {
                        frontier.push(c);
                    }
                }
            }
        } else {
            let k = self.def.indecs.len();
            if k > 24 {
                return Err(ClosureError::TooLarge(k));
            }
            let masks: Vec<u64> = (0..1u64 << k).collect();
            let got = exec.map(&masks, |&m| self.ext_closure(self.mask_set(m)));
            for c in got {
                out.insert(c?);
            }
        }
        Ok(out.into_iter().collect())
    }

    /// The subset of tokens picked by bit positions of `m`.
    pub fn mask_set(&self, m: u64) -> SubcatSet {
        let mut s = SubcatSet::default();
        for (k, i) in self.def.indecs.iter().enumerate() {
            if m >> k & 1 == 1 {
                s.insert(i.slot);
            }
        }
        s
    }

    /// Single tokens, with a tail carrying its windowed family along.
    fn token_blocks(&self) -> Vec<SubcatSet> {
        self.def
            .indecs
            .iter()
            .map(|i| self.def.set_from_names(&[&i.name]).expect("own token"))
            .collect()
    }
}

pub fn ext_closure(gens: SubcatSet, def: &SingularityDef) -> Result<SubcatSet, ClosureError> {
    Engine::new(def)?.ext_closure(gens)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CertKind {
    Zero,
    Full,
    Rigid,
    SupportCut,
    AdjoinR,
    SyzygyImage,
    Intersection,
    AInfFamily,
    AxiomTrivialType,
}

impl CertKind {
    pub const ALL: [CertKind; 9] = [
        CertKind::Zero,
        CertKind::Full,
        CertKind::Rigid,
        CertKind::SupportCut,
        CertKind::AdjoinR,
        CertKind::SyzygyImage,
        CertKind::Intersection,
        CertKind::AInfFamily,
        CertKind::AxiomTrivialType,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Certificate {
    Zero,
    Full,
    Rigid,
    /// Indices into the definition's primes.
    SupportCut(Vec<usize>),
    AdjoinR(Box<Certificate>),
    SyzygyImage(Box<Certificate>),
    Intersection(Box<Certificate>, Box<Certificate>),
    AInfFamily,
    AxiomTrivialType,
}

impl Certificate {
    pub fn kind(&self) -> CertKind {
        match self {
            Certificate::Zero => CertKind::Zero,
            Certificate::Full => CertKind::Full,
            Certificate::Rigid => CertKind::Rigid,
            Certificate::SupportCut(_) => CertKind::SupportCut,
            Certificate::AdjoinR(_) => CertKind::AdjoinR,
            Certificate::SyzygyImage(_) => CertKind::SyzygyImage,
            Certificate::Intersection(..) => CertKind::Intersection,
            Certificate::AInfFamily => CertKind::AInfFamily,
            Certificate::AxiomTrivialType => CertKind::AxiomTrivialType,
        }
    }
}

impl std::fmt::Display for Certificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Certificate::SupportCut(p) => write!(f, "SupportCut{p:?}"),
            Certificate::AdjoinR(b) => write!(f, "AdjoinR({b})"),
            Certificate::SyzygyImage(b) => write!(f, "SyzygyImage({b})"),
            Certificate::Intersection(a, b) => write!(f, "Intersection({a}, {b})"),
            c => write!(f, "{:?}", c.kind()),
        }
    }
}

/// Proof search for extension-closedness over a pool of known fixed points.
pub struct Certifier<'a> {
    def: &'a SingularityDef,
    pool: Vec<SubcatSet>,
    disabled: HashSet<CertKind>,
    full: SubcatSet,
    memo: RefCell<HashMap<SubcatSet, Option<Certificate>>>,
    ext: RefCell<HashMap<(usize, usize), bool>>,
}

impl<'a> Certifier<'a> {
    pub fn new(def: &'a SingularityDef, pool: Vec<SubcatSet>) -> Self {
        Certifier {
            def,
            pool,
            disabled: HashSet::new(),
            full: def.full_set(),
            memo: RefCell::new(HashMap::new()),
            ext: RefCell::new(HashMap::new()),
        }
    }

    pub fn disable(mut self, k: CertKind) -> Self {
        self.disabled.insert(k);
        self
    }

    pub fn certify(&self, s: SubcatSet) -> Option<Certificate> {
        if let Some(c) = self.memo.borrow().get(&s) {
            return c.clone();
        }
        let c = self.search(s, &mut HashSet::new());
        self.memo.borrow_mut().insert(s, c.clone());
        c
    }

    fn on(&self, k: CertKind) -> bool {
        !self.disabled.contains(&k)
    }

    fn search(&self, s: SubcatSet, visiting: &mut HashSet<SubcatSet>) -> Option<Certificate> {
        if let Some(Some(c)) = self.memo.borrow().get(&s) {
            return Some(c.clone());
        }
        if !visiting.insert(s) {
            return None;
        }
        let c = self.attempt(s, visiting);
        visiting.remove(&s);
        if let Some(c) = &c {
            self.memo.borrow_mut().insert(s, Some(c.clone()));
        }
        c
    }

    fn attempt(&self, s: SubcatSet, visiting: &mut HashSet<SubcatSet>) -> Option<Certificate> {
        if s.is_empty() {
            return self.on(CertKind::Zero).then_some(Certificate::Zero);
        }
        if s == self.full && self.on(CertKind::Full) {
            return Some(Certificate::Full);
        }
        if self.on(CertKind::Rigid) && self.rigid(&s) {
            return Some(Certificate::Rigid);
        }
        if self.on(CertKind::SupportCut) {
            if let Some(p) = self.support_cut(&s) {
                return Some(Certificate::SupportCut(p));
            }
        }
        let r = self.def.indec(FREE).map(|i| i.slot);
        if self.on(CertKind::AdjoinR) {
            if let Some(r) = r.filter(|r| s.contains(*r)) {
                let mut base = s;
                base.remove(r);
                if let Some(c) = self.search(base, visiting) {
                    return Some(Certificate::AdjoinR(Box::new(c)));
                }
            }
        }
        if self.on(CertKind::SyzygyImage) {
            if let Some(c) = self.syzygy_image(&s, r, visiting) {
                return Some(c);
            }
        }
        if self.on(CertKind::Intersection) {
            let above: Vec<SubcatSet> = self
                .pool
                .iter()
                .filter(|p| s.is_subset(p) && **p != s)
                .copied()
                .collect();
            for (i, a) in above.iter().enumerate() {
                for b in &above[i + 1..] {
                    if a.intersection(b) != s {
                        continue;
                    }
                    let Some(ca) = self.search(*a, visiting) else { continue };
                    let Some(cb) = self.search(*b, visiting) else { continue };
                    return Some(Certificate::Intersection(Box::new(ca), Box::new(cb)));
                }
            }
        }
        if self.on(CertKind::AInfFamily) && self.ainf_family(&s) {
            return Some(Certificate::AInfFamily);
        }
        if self.on(CertKind::AxiomTrivialType) && self.def.trivial_type {
            let r_only = r.map(|r| {
                let mut t = SubcatSet::default();
                t.insert(r);
                t == s
            });
            if s == self.full || r_only == Some(true) {
                return Some(Certificate::AxiomTrivialType);
            }
        }
        None
    }

    fn rigid(&self, s: &SubcatSet) -> bool {
        if s.tails != 0 {
            return false;
        }
        let ms: Vec<usize> = self
            .def
            .members(s)
            .into_iter()
            .filter(|&k| !self.def.indecs[k].is_free())
            .collect();
        if ms.iter().any(|&k| self.def.indecs[k].mf().is_none()) {
            return false;
        }
        for &a in &ms {
            for &b in &ms {
                if !self.ext_vanishes(a, b) {
                    return false;
                }
            }
        }
        true
    }

    fn ext_vanishes(&self, a: usize, b: usize) -> bool {
        if let Some(v) = self.ext.borrow().get(&(a, b)) {
            return *v;
        }
        let (ma, mb) = (self.def.indecs[a].mf(), self.def.indecs[b].mf());
        let v = match (ma, mb) {
            (Some(ma), Some(mb)) => matches!(ext1_dim_stable(ma, mb, self.def.trunc), Ok(0)),
            _ => false,
        };
        self.ext.borrow_mut().insert((a, b), v);
        v
    }

    /// Tokens whose χ vanishes at every listed prime.
    pub fn support_set(&self, primes: &[usize]) -> SubcatSet {
        let mut cut = SubcatSet::default();
        for (i, spec) in self.def.indecs.iter().enumerate() {
            if let Some(chi) = &self.def.chi[i] {
                if primes.iter().all(|&q| chi.dims[q] == 0) {
                    cut.insert(spec.slot);
                }
            }
        }
        cut
    }

    fn support_cut(&self, s: &SubcatSet) -> Option<Vec<usize>> {
        let k = self.def.primes.len();
        if k == 0 || k > 16 || self.def.chi.iter().any(|c| c.is_none()) {
            return None;
        }
        (1..1usize << k)
            .map(|p| (0..k).filter(|i| p >> i & 1 == 1).collect::<Vec<_>>())
            .find(|primes| self.support_set(primes) == *s)
    }

    /// s = add(Ω base ∪ {R}) for a certified base with nonzero image.
    fn syzygy_image(&self, s: &SubcatSet, r: Option<Slot>, visiting: &mut HashSet<SubcatSet>) -> Option<Certificate> {
        let r = r.filter(|r| s.contains(*r))?;
        let mut pre = SubcatSet::default();
        for k in self.def.members(s) {
            let spec = &self.def.indecs[k];
            if spec.slot == r {
                continue;
            }
            pre.insert(self.def.indec(spec.syzygy.as_ref()?)?.slot);
        }
        if pre.is_empty() {
            return None;
        }
        let mut with_r = pre;
        with_r.insert(r);
        for base in [pre, with_r] {
            if base == *s {
                continue;
            }
            let mut img = self.image(&base, Some(r))?;
            img.insert(r);
            if img != *s {
                continue;
            }
            if let Some(c) = self.search(base, visiting) {
                return Some(Certificate::SyzygyImage(Box::new(c)));
            }
        }
        None
    }

    /// Ω of the non-free members.
    fn image(&self, base: &SubcatSet, r: Option<Slot>) -> Option<SubcatSet> {
        let mut out = SubcatSet::default();
        for k in self.def.members(base) {
            let spec = &self.def.indecs[k];
            if Some(spec.slot) == r {
                continue;
            }
            out.insert(self.def.indec(spec.syzygy.as_ref()?)?.slot);
        }
        Some(out)
    }

    fn ainf_family(&self, s: &SubcatSet) -> bool {
        let d = self.def;
        if d.family != Family::Ainf || d.dim != 2 {
            return false;
        }
        let Some(r) = d.indec(FREE).map(|i| i.slot) else {
            return false;
        };
        let w = d.window.unwrap_or(0);
        for (t, fam) in d.tails.iter().enumerate() {
            let mut want = SubcatSet::default();
            want.insert(r);
            want.insert(Slot::Tail(t));
            for m in d.family_members(t) {
                want.insert(d.indecs[m].slot);
            }
            if want != *s {
                continue;
            }
            let lengths: Vec<usize> = (1..=w).collect();
            for r_len in 1..=2 {
                for ls in product(&lengths, r_len) {
                    for units in 0..1u32 << r_len {
                        let us: Vec<bool> = (0..r_len).map(|i| units >> i & 1 == 1).collect();
                        for nm in classify_ainf_extension(&ls, &us) {
                            let nm = match nm.strip_prefix("I_") {
                                Some(i) => format!("{}{i}", fam.stem),
                                None => nm,
                            };
                            let ok = d
                                .resolve(&nm)
                                .ok()
                                .flatten()
                                .map(|v| v.iter().all(|x| d.indec(x).map(|i| s.contains(i.slot)).unwrap_or(false)))
                                .unwrap_or(false);
                            if !ok {
                                return false;
                            }
                        }
                    }
                }
            }
            return true;
        }
        false
    }
}

fn product(xs: &[usize], r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..r {
        out = out
            .into_iter()
            .flat_map(|p| {
                xs.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn certify(s: SubcatSet, def: &SingularityDef) -> Result<Option<Certificate>, ClosureError> {
    let pool = Engine::new(def)?.fixed_points(Exec::default())?;
    Ok(Certifier::new(def, pool).certify(s))
}

pub fn is_closed(s: SubcatSet, def: &SingularityDef) -> Result<bool, ClosureError> {
    let eng = Engine::new(def)?;
    if eng.ext_closure(s)? != s {
        return Ok(false);
    }
    let pool = eng.fixed_points(Exec::default())?;
    Ok(Certifier::new(def, pool).certify(s).is_some())
}

/// Summands of an extension of I_1 by I_{l_1} ⊕ … ⊕ I_{l_r} over k[[x,y,z]]/(xy),
/// given which coupling entries are units.
pub fn classify_ainf_extension(lengths: &[usize], units: &[bool]) -> Vec<String> {
    assert_eq!(lengths.len(), units.len());
    let top = (0..lengths.len()).filter(|&i| units[i]).max_by_key(|&i| (lengths[i], std::cmp::Reverse(i)));
    let mut out: Vec<String> = vec![];
    for (i, l) in lengths.iter().enumerate() {
        if Some(i) == top {
            out.push(format!("I_{}", l + 1));
        } else {
            out.push(format!("I_{l}"));
        }
    }
    match top {
        Some(_) => out.push(FREE.to_string()),
        None => out.push("I_1".to_string()),
    }
    out.sort();
    out
}
