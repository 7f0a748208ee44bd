//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Criterion 5 is reported but does not fail the run.

use std::collections::{BTreeSet, HashMap};
use std::process::{Command, ExitCode};
use std::time::Instant;

use proptest::collection::vec as pvec;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use cmlat::catalog::{get_singularity, get_singularity_window, stable_graphs, supported, Family, SingularityDef};
use cmlat::closure::{classify_ainf_extension, CertKind, Engine, SubcatSet};
use cmlat::exec::Exec;
use cmlat::lattice::{
    compare_golden, enumerate_certified, enumerate_closed, hasse, lattice_of, match_stable_graph, stable_projection,
    verify, HassePoset, LatticeError,
};
use cmlat::matfac::{ext1_dim_stable, is_rigid, mf_decompose, mf_direct_sum_all, mf_validate, MatFac, PolyMatrix};
use cmlat::rules::validate_rule;
use cmlat::series_ring::{GaussianRational, TruncatedSeries};

type Outcome = Result<String, String>;

fn load(f: Family, n: Option<u32>, d: u32) -> SingularityDef {
    get_singularity(f, n, d).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn vertex_names(p: &HassePoset) -> BTreeSet<Vec<String>> {
    p.vertices.iter().cloned().collect()
}

// 1

fn golden_lattices() -> Outcome {
    let t0 = Instant::now();
    let mut cases: Vec<(Family, Option<u32>, u32, usize)> = vec![];
    for n in 1..=7 {
        cases.push((Family::A, Some(n), 1, if n % 2 == 1 { 7 } else { 3 }));
    }
    for n in 4..=8 {
        cases.push((Family::D, Some(n), 1, if n % 2 == 1 { 10 } else { 36 }));
    }
    cases.extend([
        (Family::E6, None, 1, 3),
        (Family::E7, None, 1, 10),
        (Family::E8, None, 1, 3),
        (Family::A, Some(2), 0, 3),
        (Family::A, Some(3), 0, 3),
        (Family::Ainf, None, 1, 3),
        (Family::Dinf, None, 2, 3),
        (Family::Ainf, None, 2, 5),
        (Family::Dinf, None, 1, 10),
    ]);
    for &(f, n, d, count) in &cases {
        let def = load(f, n, d);
        let rep = verify(&def, Exec::Parallel).map_err(|e| format!("{}: {e}", def.label))?;
        ensure(rep.pass(), || format!("{} failed verification: {:?}", def.label, rep.checks))?;
        let p = lattice_of(&def, false, Exec::Parallel).map_err(|e| e.to_string())?;
        ensure(p.vertices.len() == count, || {
            format!("{}: {} vertices, want {count}", def.label, p.vertices.len())
        })?;
    }
    for f in [Family::Ainf, Family::Dinf] {
        let d = if f == Family::Ainf { 2 } else { 1 };
        let at = |w| {
            let def = get_singularity_window(f, None, d, w).unwrap();
            lattice_of(&def, false, Exec::Parallel).map(|p| vertex_names(&p))
        };
        let (w6, w8) = (at(6).map_err(|e| e.to_string())?, at(8).map_err(|e| e.to_string())?);
        ensure(w6 == w8, || format!("{f} dim {d}: lattice differs between windows 6 and 8"))?;
    }
    let out = Command::new(env!("CARGO_BIN_EXE_cmlat"))
        .args(["verify", "--family", "E7", "--dim", "1"])
        .output()
        .map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout);
    ensure(out.status.success() && text.contains("verified"), || format!("cmlat verify E7: {text}"))?;
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 300.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{} types verified, windows 6/8 agree, {secs:.1}s", cases.len()))
}

// 2

fn stable_shapes() -> Outcome {
    let graphs: HashMap<String, Vec<(String, String)>> = stable_graphs().into_iter().collect();
    let cases = [
        (Family::A, Some(2), 1, "G1"),
        (Family::E6, None, 1, "G1"),
        (Family::E8, None, 2, "G1"),
        (Family::A, Some(3), 1, "G2"),
        (Family::Ainf, None, 2, "G2"),
        (Family::E7, None, 1, "G3"),
        (Family::D, Some(5), 1, "G3"),
        (Family::Dinf, None, 1, "G3"),
        (Family::D, Some(6), 1, "G4"),
        (Family::D, Some(8), 1, "G4"),
        (Family::E7, None, 3, "G3"),
        (Family::A, Some(5), 3, "G2"),
        (Family::D, Some(6), 4, "G1"),
        (Family::Ainf, None, 4, "G2"),
    ];
    for (f, n, d, want) in cases {
        let def = load(f, n, d);
        let s = lattice_of(&def, true, Exec::Parallel).map_err(|e| e.to_string())?;
        let g = &graphs[want];
        let nodes: BTreeSet<&String> = g.iter().flat_map(|(a, b)| [a, b]).collect();
        ensure(s.vertices.len() == nodes.len() && s.edges.len() == g.len(), || {
            format!("{} dim {d}: {}v/{}e against {want}", def.label, s.vertices.len(), s.edges.len())
        })?;
        let got = match_stable_graph(&s);
        ensure(got.as_deref() == Some(want), || format!("{} dim {d}: shape {got:?}, want {want}", def.label))?;
    }
    Ok(format!("{} types, sizes 2/4/6/20, dims 1-4", cases.len()))
}

// 3

fn chi_tables() -> Outcome {
    let d6: &[(&str, [usize; 3])] = &[
        ("R", [1, 1, 1]),
        ("X_", [1, 1, 1]),
        ("Y_", [1, 1, 1]),
        ("A", [1, 0, 0]),
        ("B", [0, 1, 1]),
        ("M_", [0, 1, 1]),
        ("C+", [1, 1, 0]),
        ("C-", [1, 0, 1]),
        ("D+", [0, 0, 1]),
        ("D-", [0, 1, 0]),
        ("N_", [2, 1, 1]),
    ];
    let d7: &[(&str, [usize; 2])] = &[
        ("R", [1, 1]),
        ("A", [1, 0]),
        ("B", [0, 1]),
        ("M_", [0, 1]),
        ("N_", [2, 1]),
        ("X_", [1, 1]),
        ("Y_", [1, 1]),
    ];
    fn check(def: &SingularityDef, table: &[(&str, Vec<usize>)]) -> Result<usize, String> {
        for i in &def.indecs {
            let key = i.family.as_deref().unwrap_or(&i.name);
            let want = table
                .iter()
                .find(|(k, _)| *k == key)
                .ok_or_else(|| format!("{}: no table row for {}", def.label, i.name))?;
            let got = def.chi_of_name(&i.name).ok_or_else(|| format!("{}: no chi for {}", def.label, i.name))?;
            ensure(got.dims == want.1, || format!("{}: chi({}) = {got}, want {:?}", def.label, i.name, want.1))?;
        }
        Ok(def.indecs.len())
    }
    let a = check(&load(Family::D, Some(6), 1), &d6.iter().map(|(k, v)| (*k, v.to_vec())).collect::<Vec<_>>())?;
    let b = check(&load(Family::D, Some(7), 1), &d7.iter().map(|(k, v)| (*k, v.to_vec())).collect::<Vec<_>>())?;
    Ok(format!("{a} modules over D_6, {b} over D_7"))
}

// 4

fn rigidity() -> Outcome {
    let rigid = |def: &SingularityDef, names: &[&str]| -> Result<bool, String> {
        let ms: Vec<&MatFac> = names.iter().map(|n| def.mf_of_name(n).unwrap()).collect();
        is_rigid(&ms, def.trunc).map_err(|e| format!("{} {names:?}: {e}", def.label))
    };
    let mut yes: Vec<(SingularityDef, Vec<&str>)> = vec![];
    for n in [1, 3, 5, 7] {
        let def = load(Family::A, Some(n), 1);
        yes.push((def, vec!["N+"]));
        yes.push((load(Family::A, Some(n), 1), vec!["N-"]));
    }
    for n in 4..=8 {
        for m in ["A", "B"] {
            yes.push((load(Family::D, Some(n), 1), vec![m]));
        }
    }
    for m in ["R", "C+", "C-", "D+", "D-"] {
        yes.push((load(Family::D, Some(6), 1), vec![m]));
    }
    for pair in [["C+", "D-"], ["C-", "D+"], ["C+", "A"], ["D+", "B"], ["A", "C-"], ["B", "D-"]] {
        for n in [4, 6, 8] {
            yes.push((load(Family::D, Some(n), 1), pair.to_vec()));
        }
    }
    for (def, names) in &yes {
        ensure(rigid(def, names)?, || format!("{} {names:?} not rigid", def.label))?;
    }
    let mut no = vec![(load(Family::A, Some(3), 1), vec!["N+", "N-"])];
    for n in 4..=8 {
        no.push((load(Family::D, Some(n), 1), vec!["A", "B"]));
    }
    for (def, names) in &no {
        ensure(!rigid(def, names)?, || format!("{} {names:?} rigid", def.label))?;
    }
    let mut pairs = 0;
    for (f, n, d) in supported(8) {
        let def = load(f, n, d);
        if def.is_countable() {
            continue;
        }
        let ms: Vec<(&str, &MatFac)> = def.indecs.iter().filter_map(|i| Some((i.name.as_str(), i.mf()?))).collect();
        for (a, ma) in &ms {
            for (b, mb) in &ms {
                ext1_dim_stable(ma, mb, def.trunc).map_err(|e| format!("{} Ext({a},{b}): {e}", def.label))?;
                pairs += 1;
            }
        }
    }
    Ok(format!("{} rigid, {} non-rigid, {pairs} Ext pairs stable at N and N+2", yes.len(), no.len()))
}

// 5

fn rule_validation() -> Outcome {
    let (mut rules, mut derived) = (0, 0);
    let mut chi_bad = vec![];
    let mut size_bad = vec![];
    let mut replay_bad = vec![];
    for (f, n, d) in supported(8) {
        let def = load(f, n, d);
        for r in def.all_rules() {
            rules += 1;
            let rep = validate_rule(r, &def);
            if rep.chi_additive == Some(false) {
                chi_bad.push(format!("{}: {r}", def.label));
            }
            if rep.size_additive == Some(false) {
                size_bad.push(format!("{}: {r} {:?}", def.label, rep.sizes.unwrap()));
            }
        }
        let rep = verify(&def, Exec::Parallel).map_err(|e| e.to_string())?;
        derived += def.derived.len();
        for c in rep.checks.iter().filter(|c| c.name == "derived-replay" && !c.pass) {
            replay_bad.push(format!("{}: {}", def.label, c.detail));
        }
    }
    let summary = format!(
        "{rules} rules: {} not chi-additive, {} not size-additive (e.g. {}); {derived} derived, {} not replayed",
        chi_bad.len(),
        size_bad.len(),
        size_bad.iter().take(3).cloned().collect::<Vec<_>>().join("; "),
        replay_bad.len()
    );
    if chi_bad.is_empty() && size_bad.is_empty() && replay_bad.is_empty() {
        Ok(summary)
    } else {
        Err(summary)
    }
}

// 6

fn coupling(def: &SingularityDef, lengths: &[usize], units: &[bool]) -> MatFac {
    let t = def.f.trunc();
    let v = |k| TruncatedSeries::var(3, t, k);
    let (x, y, z) = (v(0), v(1), v(2));
    let zero = TruncatedSeries::zero(3, t);
    let unit = TruncatedSeries::constant(3, t, GaussianRational::from_ints(2, 0));
    let n = 2 * lengths.len() + 2;
    let mut phi: PolyMatrix = vec![vec![zero.clone(); n]; n];
    let mut psi = phi.clone();
    let mut ls = lengths.to_vec();
    ls.push(1);
    for (b, l) in ls.iter().enumerate() {
        let (i, zl) = (2 * b, z.pow(*l as u32));
        phi[i][i] = y.clone();
        phi[i][i + 1] = zl.neg();
        phi[i + 1][i + 1] = x.clone();
        psi[i][i] = x.clone();
        psi[i][i + 1] = zl;
        psi[i + 1][i + 1] = y.clone();
    }
    for (b, u) in units.iter().enumerate() {
        if *u {
            phi[2 * b][n - 1] = unit.clone();
            psi[2 * b][n - 1] = unit.neg();
        }
    }
    MatFac::new(def.f.clone(), phi, psi)
}

fn tuples(r: usize, hi: usize) -> Vec<Vec<usize>> {
    (0..r).fold(vec![vec![]], |acc, _| {
        acc.into_iter()
            .flat_map(|t| {
                (1..=hi).map(move |l| {
                    let mut t = t.clone();
                    t.push(l);
                    t
                })
            })
            .collect()
    })
}

fn ainf_normal_form() -> Outcome {
    let def = load(Family::Ainf, None, 2);
    let table = def.decomp_table().map_err(|e| e.to_string())?;
    let mut cases: Vec<(Vec<usize>, Vec<bool>)> = vec![];
    for r in 1..=3 {
        for ls in tuples(r, 4) {
            for pat in 0..1u32 << r {
                cases.push((ls.clone(), (0..r).map(|i| pat >> i & 1 == 1).collect()));
            }
        }
    }
    let r3 = cases.iter().filter(|c| c.0.len() == 3).count();
    let results = Exec::Parallel.map(&cases, |(ls, us)| -> Result<(), String> {
        let m = coupling(&def, ls, us);
        ensure(mf_validate(&m), || format!("{ls:?} {us:?}: not a factorization"))?;
        let got = mf_decompose(&m, table).map_err(|e| format!("{ls:?} {us:?}: {e}"))?;
        let want = classify_ainf_extension(ls, us);
        ensure(got == want, || format!("{ls:?} {us:?}: {got:?} vs {want:?}"))
    });
    results.into_iter().collect::<Result<Vec<()>, _>>()?;
    for p in 1..=4usize {
        let want = vec![format!("I_{}", p + 1), "R".to_string()];
        ensure(classify_ainf_extension(&[p], &[true]) == want, || format!("D(h) for p = {p}"))?;
    }
    Ok(format!("{} cases ({r3} with r = 3), D(h) gives I_(p+1) + R", cases.len()))
}

// 7

fn closure_laws(def: &SingularityDef) -> Result<usize, String> {
    let eng = Engine::new(def).map_err(|e| e.to_string())?;
    let k = def.indecs.len();
    let masks: Vec<u64> = (0..1u64 << k).collect();
    let index: HashMap<Vec<usize>, u64> = def
        .indecs
        .iter()
        .enumerate()
        .map(|(b, i)| (def.members(&def.set_from_names(&[&i.name]).unwrap()), 1u64 << b))
        .collect();
    let to_mask = |s: &SubcatSet| -> u64 {
        def.members(s)
            .into_iter()
            .map(|m| index[&vec![m]])
            .fold(0, |a, b| a | b)
    };
    let table: Vec<u64> = Exec::Parallel
        .map(&masks, |&m| eng.ext_closure(eng.mask_set(m)).map(|c| to_mask(&c)))
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for (m, &c) in table.iter().enumerate() {
        let m = m as u64;
        ensure(m & !c == 0, || format!("{}: not extensive at {m:#x}", def.label))?;
        ensure(table[c as usize] == c, || format!("{}: not idempotent at {m:#x}", def.label))?;
        for b in 0..k {
            let up = table[(m | 1 << b) as usize];
            ensure(c & !up == 0, || format!("{}: not monotone at {m:#x} + {b}", def.label))?;
        }
    }
    Ok(masks.len())
}

fn reach(p: &HassePoset) -> Vec<Vec<bool>> {
    let n = p.vertices.len();
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in &p.edges {
        r[a][b] = true;
    }
    for m in 0..n {
        for i in 0..n {
            if r[i][m] {
                for j in 0..n {
                    if r[m][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

fn order_embeds(def: &SingularityDef, p: &HassePoset) -> Result<(), String> {
    let s = stable_projection(p);
    let (rp, rs) = (reach(p), reach(&s));
    let lift = |v: &Vec<String>| {
        let mut w = v.clone();
        w.push("R".to_string());
        w.sort();
        p.index_of(&w).ok_or_else(|| format!("{}: {w:?} not a vertex", def.label))
    };
    let ids: Vec<usize> = s.vertices.iter().map(lift).collect::<Result<_, _>>()?;
    for i in 0..ids.len() {
        for j in 0..ids.len() {
            ensure(rs[i][j] == rp[ids[i]][ids[j]], || {
                format!("{}: order differs at {:?} {:?}", def.label, s.vertices[i], s.vertices[j])
            })?;
        }
    }
    Ok(())
}

fn property_suites() -> Outcome {
    let mut subsets = 0;
    let mut meets = 0;
    for (f, n, d) in supported(8) {
        let def = load(f, n, d);
        if !def.is_countable() {
            subsets += closure_laws(&def)?;
        }
        let closed = enumerate_closed(&def, Exec::Parallel).map_err(|e| e.to_string())?;
        let set: BTreeSet<_> = closed.iter().map(|s| def.members(s)).collect();
        let eng = Engine::new(&def).map_err(|e| e.to_string())?;
        for a in &closed {
            for b in &closed {
                let m = a.intersection(b);
                ensure(eng.ext_closure(m).map_err(|e| e.to_string())? == m, || {
                    format!("{}: meet of {:?} and {:?} not closed", def.label, def.canonical_names(a), def.canonical_names(b))
                })?;
                if !def.is_countable() {
                    ensure(set.contains(&def.members(&m)), || format!("{}: meet missing", def.label))?;
                }
                meets += 1;
            }
        }
        order_embeds(&def, &hasse(&def, &closed))?;
    }

    let defs: Vec<SingularityDef> = [
        (Family::A, Some(3), 1),
        (Family::D, Some(6), 1),
        (Family::D, Some(7), 1),
        (Family::E7, None, 1),
        (Family::E8, None, 1),
        (Family::A, Some(4), 2),
    ]
    .into_iter()
    .map(|(f, n, d)| load(f, n, d))
    .collect();
    let mut runner = TestRunner::new(Config {
        cases: 100,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (0..defs.len()).prop_flat_map(|k| (Just(k), pvec(any::<prop::sample::Index>(), 1..=4)));
    let rounds = std::cell::Cell::new(0);
    runner
        .run(&strategy, |(k, picks)| {
            let def = &defs[k];
            let presented: Vec<(&str, &MatFac)> =
                def.indecs.iter().filter_map(|i| Some((i.name.as_str(), i.mf()?))).collect();
            let chosen: Vec<&(&str, &MatFac)> = picks.iter().map(|ix| ix.get(&presented)).collect();
            let ms: Vec<&MatFac> = chosen.iter().map(|c| c.1).collect();
            let sum = mf_direct_sum_all(&def.f, &ms).unwrap();
            let got = mf_decompose(&sum, def.decomp_table().unwrap()).unwrap();
            let mut want: Vec<String> = chosen.iter().map(|c| c.0.to_string()).collect();
            want.sort();
            prop_assert_eq!(got, want);
            rounds.set(rounds.get() + 1);
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;
    Ok(format!("{subsets} subsets, {meets} meets, stable order embeds, {} round trips", rounds.get()))
}

// 8

fn negative_control() -> Outcome {
    let mut runs = 0;
    for (f, n, d) in supported(8) {
        let def = load(f, n, d);
        let truth: BTreeSet<_> = enumerate_closed(&def, Exec::Parallel)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|s| def.members(s))
            .collect();
        for k in CertKind::ALL {
            runs += 1;
            match enumerate_certified(&def, Exec::Parallel, &[k]) {
                Ok(v) => {
                    let got: BTreeSet<_> = v.iter().map(|(s, _)| def.members(s)).collect();
                    ensure(got == truth, || format!("{} without {k:?}: wrong lattice", def.label))?;
                }
                Err(LatticeError::UncertifiedCandidate(_)) => {}
                Err(e) => return Err(format!("{} without {k:?}: {e}", def.label)),
            }
        }
    }

    // For each kind, a type and a set of companions such that the lattice still
    // comes out with the companions off and is refused once the kind goes too.
    let witnesses: Vec<SingularityDef> = [
        (Family::A, Some(2), 1),
        (Family::A, Some(3), 1),
        (Family::D, Some(5), 1),
        (Family::D, Some(6), 1),
        (Family::E7, None, 1),
        (Family::Ainf, None, 2),
        (Family::A, Some(3), 2),
    ]
    .into_iter()
    .map(|(f, n, d)| load(f, n, d))
    .collect();
    let works = |def: &SingularityDef, off: &[CertKind]| -> Result<bool, String> {
        match enumerate_certified(def, Exec::Parallel, off) {
            Ok(v) => {
                let p = hasse(def, &v.iter().map(|(s, _)| *s).collect::<Vec<_>>());
                let rep = compare_golden(&p, def).map_err(|e| e.to_string())?;
                ensure(rep.pass(), || format!("{} without {off:?}: wrong lattice", def.label))?;
                Ok(true)
            }
            Err(LatticeError::UncertifiedCandidate(_)) => Ok(false),
            Err(e) => Err(e.to_string()),
        }
    };
    let mut found = vec![];
    let mut shadowed = vec![];
    for k in CertKind::ALL {
        let others: Vec<CertKind> = CertKind::ALL.into_iter().filter(|o| *o != k).collect();
        let mut companions: Vec<Vec<CertKind>> = vec![vec![]];
        companions.extend(others.iter().map(|o| vec![*o]));
        for (i, a) in others.iter().enumerate() {
            for b in &others[i + 1..] {
                companions.push(vec![*a, *b]);
            }
        }
        let mut hit = None;
        'search: for c in &companions {
            for def in &witnesses {
                if !works(def, c)? {
                    continue;
                }
                let mut off = c.clone();
                off.push(k);
                if !works(def, &off)? {
                    hit = Some((def.label.clone(), c.clone()));
                    break 'search;
                }
            }
        }
        let (label, c) = hit.ok_or_else(|| format!("{k:?} is never load-bearing"))?;
        if !c.is_empty() {
            shadowed.push(format!("{k:?} (with {c:?} off, {label})"));
        }
        found.push(k);
    }
    Ok(format!(
        "{runs} single-kind runs never gave a wrong lattice; all {} kinds load-bearing; needing companions: {}",
        found.len(),
        shadowed.join(", ")
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 8] = [
        (1, "golden lattices", golden_lattices),
        (2, "stable projections", stable_shapes),
        (3, "chi tables", chi_tables),
        (4, "rigidity", rigidity),
        (5, "rule validation", rule_validation),
        (6, "A_inf^2 normal form", ainf_normal_form),
        (7, "property suites", property_suites),
        (8, "negative control", negative_control),
    ];
    let mut blocking = false;
    for (n, name, run) in criteria {
        let t0 = Instant::now();
        let out = run();
        let secs = t0.elapsed().as_secs_f64();
        match &out {
            Ok(d) => println!("criterion {n} ({name}): PASS [{secs:.1}s] {d}"),
            Err(d) => println!("criterion {n} ({name}): FAIL [{secs:.1}s] {d}"),
        }
        if out.is_err() && n != 5 {
            blocking = true;
        }
    }
    if blocking {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
