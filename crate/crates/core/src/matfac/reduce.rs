//! Unit-pivot reduction of presentation matrices and decomposition by fingerprint.

use std::collections::{HashMap, HashSet};

use crate::linalg;
use crate::series_ring::{invert_unit, CurveParam, GaussianRational, TruncatedSeries};

use super::{chi_of_presentation, ext1_to_presentation, ChiVector, MatFac, MatFacError, PolyMatrix};

const CLEANUP_CAP: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub reduced: PolyMatrix,
    pub split_identity: usize,
    pub split_zero: usize,
}

/// Normal form of `e` modulo f: terms divisible by a monomial f are dropped,
/// otherwise the leading term of f (degree-lex) is divided out.
pub fn normalize_mod(e: &TruncatedSeries, f: &TruncatedSeries) -> TruncatedSeries {
    if e.is_zero() || f.is_zero() {
        return e.clone();
    }
    let lead = f
        .terms()
        .max_by(|a, b| {
            let da: u32 = a.0.iter().sum();
            let db: u32 = b.0.iter().sum();
            da.cmp(&db).then(a.0.cmp(b.0))
        })
        .map(|(e, c)| (e.clone(), c.clone()))
        .unwrap();
    let lead_inv = lead.1.inv().unwrap();
    let mut r = e.clone();
    loop {
        let hit = r
            .terms()
            .find(|(t, _)| t.iter().zip(&lead.0).all(|(a, b)| a >= b))
            .map(|(t, c)| (t.clone(), c.clone()));
        let Some((t, c)) = hit else {
            return r;
        };
        let q: Vec<u32> = t.iter().zip(&lead.0).map(|(a, b)| a - b).collect();
        let sub = f.shift(&q).scale(&(&c * &lead_inv));
        r = &r - &sub;
    }
}

struct Work<'a> {
    m: PolyMatrix,
    f: &'a TruncatedSeries,
}

impl<'a> Work<'a> {
    fn rows(&self) -> usize {
        self.m.len()
    }

    fn cols(&self) -> usize {
        self.m.first().map(|r| r.len()).unwrap_or(0)
    }

    /// row_i −= q·row_r
    fn row_op(&mut self, i: usize, r: usize, q: &TruncatedSeries) {
        for j in 0..self.cols() {
            if self.m[r][j].is_zero() {
                continue;
            }
            let v = &self.m[i][j] - &(q * &self.m[r][j]);
            self.m[i][j] = normalize_mod(&v, self.f);
        }
    }

    /// col_j −= q·col_c
    fn col_op(&mut self, j: usize, c: usize, q: &TruncatedSeries) {
        for i in 0..self.rows() {
            if self.m[i][c].is_zero() {
                continue;
            }
            let v = &self.m[i][j] - &(&self.m[i][c] * q);
            self.m[i][j] = normalize_mod(&v, self.f);
        }
    }

    fn remove(&mut self, r: usize, c: usize) {
        self.m.remove(r);
        for row in &mut self.m {
            row.remove(c);
        }
    }

    fn find_unit(&self) -> Option<(usize, usize)> {
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                if self.m[i][j].is_unit() {
                    return Some((i, j));
                }
            }
        }
        None
    }

    fn split_units(&mut self) -> usize {
        let mut count = 0;
        while let Some((r, c)) = self.find_unit() {
            let inv = invert_unit(&self.m[r][c]).expect("pivot is a unit");
            for i in 0..self.rows() {
                if i != r && !self.m[i][c].is_zero() {
                    let q = &self.m[i][c] * &inv;
                    self.row_op(i, r, &q);
                }
            }
            // column c now holds only the pivot, so clearing row r is local
            self.remove(r, c);
            count += 1;
        }
        count
    }

    /// One sweep of monomial-divisibility clearing; returns whether anything changed.
    fn cleanup_pass(&mut self) -> bool {
        let mut changed = false;
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                let Some((pe, pc)) = self.m[r][c].as_monomial().map(|(e, c)| (e.clone(), c.clone())) else {
                    continue;
                };
                for j in 0..self.cols() {
                    if j == c || self.m[r][j].is_zero() {
                        continue;
                    }
                    if let Some(q) = self.m[r][j].div_monomial(&pe, &pc) {
                        self.col_op(j, c, &q);
                        changed = true;
                    }
                }
                for i in 0..self.rows() {
                    if i == r || self.m[i][c].is_zero() {
                        continue;
                    }
                    if let Some(q) = self.m[i][c].div_monomial(&pe, &pc) {
                        self.row_op(i, r, &q);
                        changed = true;
                    }
                }
            }
        }
        changed
    }
}

/// Splits off unit pivots and free summands from a presentation over R = S/(f).
pub fn unit_reduce(mat: &PolyMatrix, f: &TruncatedSeries) -> Reduction {
    let mut w = Work {
        m: mat
            .iter()
            .map(|r| r.iter().map(|e| normalize_mod(e, f)).collect())
            .collect(),
        f,
    };
    let mut split_identity = w.split_units();
    for _ in 0..CLEANUP_CAP {
        if !w.cleanup_pass() {
            break;
        }
        split_identity += w.split_units();
    }
    let zero_rows: Vec<usize> = (0..w.rows())
        .filter(|&i| w.m[i].iter().all(|e| e.is_zero()))
        .collect();
    let zero_cols: HashSet<usize> = (0..w.cols())
        .filter(|&j| w.m.iter().all(|r| r[j].is_zero()))
        .collect();
    let reduced: PolyMatrix = w
        .m
        .iter()
        .enumerate()
        .filter(|(i, _)| !zero_rows.contains(i))
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| !zero_cols.contains(j))
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect();
    Reduction {
        reduced,
        split_identity,
        split_zero: zero_rows.len(),
    }
}

/// Splits (1, f) and (f, 1) summands off a factorization, working over S so
/// that ψ tracks every operation. Returns the residual pair and the number of
/// free summands of cok φ.
pub fn split_trivial_pairs(m: &MatFac) -> (MatFac, usize) {
    let mut pair = [m.phi.clone(), m.psi.clone()];
    let mut free = 0;
    for side in 0..2 {
        while let Some((r, c)) = unit_entry(&pair[side]) {
            let [a, b] = &mut pair;
            let (p, q) = if side == 0 { (a, b) } else { (b, a) };
            pivot_pair(p, q, r, c);
            p.remove(r);
            p.iter_mut().for_each(|row| {
                row.remove(c);
            });
            q.remove(c);
            q.iter_mut().for_each(|row| {
                row.remove(r);
            });
            free += side;
        }
    }
    let [phi, psi] = pair;
    (MatFac::new(m.f.clone(), phi, psi), free)
}

fn unit_entry(m: &PolyMatrix) -> Option<(usize, usize)> {
    (0..m.len()).find_map(|i| (0..m[i].len()).find(|&j| m[i][j].is_unit()).map(|j| (i, j)))
}

/// Clears row r and column c of `p` around the unit at (r, c), applying the
/// inverse operations to `q` so that p·q stays fixed.
fn pivot_pair(p: &mut PolyMatrix, q: &mut PolyMatrix, r: usize, c: usize) {
    let inv = invert_unit(&p[r][c]).expect("pivot is a unit");
    let n = p.len();
    for i in 0..n {
        if i == r || p[i][c].is_zero() {
            continue;
        }
        // row_i(p) -= k·row_r(p); col_r(q) += col_i(q)·k
        let k = &p[i][c] * &inv;
        for j in 0..n {
            if !p[r][j].is_zero() {
                p[i][j] = &p[i][j] - &(&k * &p[r][j]);
            }
        }
        for row in q.iter_mut() {
            if !row[i].is_zero() {
                row[r] = &row[r] + &(&row[i] * &k);
            }
        }
    }
    for j in 0..n {
        if j == c || p[r][j].is_zero() {
            continue;
        }
        // col_j(p) -= col_c(p)·k; row_c(q) += k·row_j(q)
        let k = &inv * &p[r][j];
        for row in p.iter_mut() {
            if !row[c].is_zero() {
                row[j] = &row[j] - &(&row[c] * &k);
            }
        }
        let add: Vec<TruncatedSeries> = q[j].iter().map(|e| &k * e).collect();
        for (e, a) in q[c].iter_mut().zip(add) {
            *e = &*e + &a;
        }
    }
}

/// Connected blocks of a matrix under the row/column incidence of nonzero entries.
pub(crate) fn blocks(m: &PolyMatrix) -> Vec<(Vec<usize>, Vec<usize>)> {
    let rows = m.len();
    let cols = m.first().map(|r| r.len()).unwrap_or(0);
    let mut seen_r = vec![false; rows];
    let mut seen_c = vec![false; cols];
    let mut out = vec![];
    for start in 0..rows {
        if seen_r[start] {
            continue;
        }
        let (mut rs, mut cs) = (vec![], vec![]);
        let mut stack = vec![(true, start)];
        seen_r[start] = true;
        while let Some((is_row, k)) = stack.pop() {
            if is_row {
                rs.push(k);
                for j in 0..cols {
                    if !seen_c[j] && !m[k][j].is_zero() {
                        seen_c[j] = true;
                        stack.push((false, j));
                    }
                }
            } else {
                cs.push(k);
                for i in 0..rows {
                    if !seen_r[i] && !m[i][k].is_zero() {
                        seen_r[i] = true;
                        stack.push((true, i));
                    }
                }
            }
        }
        rs.sort();
        cs.sort();
        out.push((rs, cs));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    pub size: usize,
    pub chi: ChiVector,
    pub hilbert: Vec<usize>,
    pub ext: Vec<usize>,
}

const HILBERT_DEPTH: u32 = 5;

fn monomials_below(nvars: usize, k: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..nvars {
        out = out
            .into_iter()
            .flat_map(|e: Vec<u32>| {
                let used: u32 = e.iter().sum();
                (0..k - used).map(move |a| {
                    let mut e = e.clone();
                    e.push(a);
                    e
                })
            })
            .collect();
    }
    out
}

/// dim N/m^k N for k = 1..depth, where N = cok φ.
pub fn hilbert_profile(phi: &PolyMatrix, nvars: usize, depth: u32) -> Vec<usize> {
    let r = phi.len();
    let c = phi.first().map(|row| row.len()).unwrap_or(0);
    (1..=depth)
        .map(|k| {
            let mons = monomials_below(nvars, k);
            let idx: HashMap<&Vec<u32>, usize> = mons.iter().enumerate().map(|(i, e)| (e, i)).collect();
            let mut rows = vec![];
            for j in 0..c {
                for g in &mons {
                    let mut row: Vec<(usize, GaussianRational)> = vec![];
                    for i in 0..r {
                        for (e, v) in phi[i][j].terms() {
                            let prod: Vec<u32> = e.iter().zip(g).map(|(a, b)| a + b).collect();
                            if let Some(&m) = idx.get(&prod) {
                                row.push((i * mons.len() + m, v.clone()));
                            }
                        }
                    }
                    if !row.is_empty() {
                        row.sort_by_key(|t| t.0);
                        rows.push(row);
                    }
                }
            }
            r * mons.len() - linalg::rank(&rows)
        })
        .collect()
}

/// [φ ⊗ 1 | 1 ⊗ φ_P], presenting cok φ ⊗ cok φ_P.
fn tensor_presentation(phi: &PolyMatrix, q: &PolyMatrix, zero: &TruncatedSeries) -> PolyMatrix {
    let (ra, rb) = (phi.len(), q.len());
    let mut out = vec![vec![]; ra * rb];
    for i in 0..ra {
        for k in 0..rb {
            let row = &mut out[i * rb + k];
            for j in 0..ra {
                for l in 0..rb {
                    row.push(if k == l { phi[i][j].clone() } else { zero.clone() });
                }
            }
            for j in 0..ra {
                for l in 0..rb {
                    row.push(if i == j { q[k][l].clone() } else { zero.clone() });
                }
            }
        }
    }
    out
}

/// Ext¹(P, cok φ) followed by the Hilbert profile of cok φ ⊗ P.
fn probe_column(p: &MatFac, phi: &PolyMatrix, trunc: u32) -> Result<Vec<usize>, MatFacError> {
    let zero = TruncatedSeries::zero(p.f.nvars(), p.f.trunc());
    let mut out = vec![ext1_to_presentation(p, phi, trunc)?];
    out.extend(hilbert_profile(&tensor_presentation(phi, &p.phi, &zero), p.f.nvars(), HILBERT_DEPTH));
    Ok(out)
}

/// Catalog fingerprints together with the probes that separate them.
#[derive(Clone, Debug)]
pub struct DecompTable {
    pub f: TruncatedSeries,
    pub primes: Vec<CurveParam>,
    pub trunc: u32,
    pub probes: Vec<MatFac>,
    pub entries: Vec<(String, Fingerprint)>,
}

impl DecompTable {
    /// Picks probes greedily from `extra` then `candidates` until fingerprints separate.
    pub fn build(
        f: &TruncatedSeries,
        primes: &[CurveParam],
        trunc: u32,
        candidates: &[(String, MatFac)],
        extra: &[MatFac],
    ) -> Result<DecompTable, MatFacError> {
        let mut entries = candidates
            .iter()
            .map(|(n, m)| {
                Ok((
                    n.clone(),
                    Fingerprint {
                        size: m.size,
                        chi: chi_of_presentation(&m.phi, primes)?,
                        hilbert: hilbert_profile(&m.phi, f.nvars(), HILBERT_DEPTH),
                        ext: vec![],
                    },
                ))
            })
            .collect::<Result<Vec<_>, MatFacError>>()?;
        let mut probes = vec![];
        let pool: Vec<&MatFac> = extra.iter().chain(candidates.iter().map(|(_, m)| m)).collect();
        for p in pool {
            let distinct = count_distinct(&entries);
            if distinct == entries.len() {
                break;
            }
            let col = candidates
                .iter()
                .map(|(_, m)| probe_column(p, &m.phi, trunc))
                .collect::<Result<Vec<_>, _>>()?;
            let mut trial = entries.clone();
            for (e, v) in trial.iter_mut().zip(col) {
                e.1.ext.extend(v);
            }
            if count_distinct(&trial) > distinct {
                entries = trial;
                probes.push(p.clone());
            }
        }
        Ok(DecompTable {
            f: f.clone(),
            primes: primes.to_vec(),
            trunc,
            probes,
            entries,
        })
    }

    /// The unique multiset of two or more entries whose fingerprints add up to `fp`.
    pub fn split(&self, fp: &Fingerprint) -> Option<Vec<String>> {
        let mut found: Vec<Vec<usize>> = vec![];
        let mut stack = vec![];
        self.split_rec(fp, 0, fp.size, &mut stack, &mut found);
        found.retain(|f| f.len() >= 2);
        match found.as_slice() {
            [one] => Some(one.iter().map(|&k| self.entries[k].0.clone()).collect()),
            _ => None,
        }
    }

    fn split_rec(&self, fp: &Fingerprint, from: usize, left: usize, stack: &mut Vec<usize>, found: &mut Vec<Vec<usize>>) {
        if left == 0 {
            if self.sum(stack).as_ref() == Some(fp) {
                found.push(stack.clone());
            }
            return;
        }
        for k in from..self.entries.len() {
            let size = self.entries[k].1.size;
            if size == 0 || size > left {
                continue;
            }
            stack.push(k);
            self.split_rec(fp, k, left - size, stack, found);
            stack.pop();
        }
    }

    fn sum(&self, ks: &[usize]) -> Option<Fingerprint> {
        let mut it = ks.iter().map(|&k| &self.entries[k].1);
        let mut acc = it.next()?.clone();
        for e in it {
            acc.size += e.size;
            acc.chi = acc.chi.add(&e.chi);
            for (a, b) in acc.hilbert.iter_mut().zip(&e.hilbert) {
                *a += b;
            }
            for (a, b) in acc.ext.iter_mut().zip(&e.ext) {
                *a += b;
            }
        }
        Some(acc)
    }

    /// Names whose fingerprints collide.
    pub fn collisions(&self) -> Vec<(String, String)> {
        let mut out = vec![];
        for (i, a) in self.entries.iter().enumerate() {
            for b in &self.entries[i + 1..] {
                if a.1 == b.1 {
                    out.push((a.0.clone(), b.0.clone()));
                }
            }
        }
        out
    }

    pub fn fingerprint(&self, phi: &PolyMatrix) -> Result<Fingerprint, MatFacError> {
        Ok(Fingerprint {
            size: phi.len(),
            chi: chi_of_presentation(phi, &self.primes)?,
            hilbert: hilbert_profile(phi, self.f.nvars(), HILBERT_DEPTH),
            ext: self
                .probes
                .iter()
                .map(|p| probe_column(p, phi, self.trunc))
                .collect::<Result<Vec<_>, _>>()?
                .concat(),
        })
    }
}

fn count_distinct(entries: &[(String, Fingerprint)]) -> usize {
    entries.iter().map(|e| &e.1).collect::<HashSet<_>>().len()
}

/// Indecomposable summands of cok φ, with R for each free summand.
pub fn mf_decompose(m: &MatFac, table: &DecompTable) -> Result<Vec<String>, MatFacError> {
    if m.f != table.f {
        return Err(MatFacError::MixedRings);
    }
    let (core, free) = split_trivial_pairs(m);
    let red = unit_reduce(&core.phi, &m.f);
    let mut names: Vec<String> = vec!["R".to_string(); free + red.split_zero];
    for (rs, cs) in blocks(&red.reduced) {
        let block: PolyMatrix = rs
            .iter()
            .map(|&i| cs.iter().map(|&j| red.reduced[i][j].clone()).collect())
            .collect();
        if rs.len() != cs.len() {
            return Err(MatFacError::UnknownIndecomposable(block));
        }
        let fp = table.fingerprint(&block)?;
        match table.entries.iter().find(|(_, e)| *e == fp) {
            Some((n, _)) => names.push(n.clone()),
            None => match table.split(&fp) {
                Some(parts) => names.extend(parts),
                None => return Err(MatFacError::UnknownIndecomposable(block)),
            },
        }
    }
    names.sort();
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series_ring::GaussianRational as G;

    const T: u32 = 30;

    fn v(k: usize) -> TruncatedSeries {
        TruncatedSeries::var(3, T, k)
    }

    fn zero() -> TruncatedSeries {
        TruncatedSeries::zero(3, T)
    }

    fn one() -> TruncatedSeries {
        TruncatedSeries::one(3, T)
    }

    fn same_up_to_permutation(a: &PolyMatrix, b: &PolyMatrix) -> bool {
        let key = |m: &PolyMatrix| {
            let mut rows: Vec<Vec<String>> = m
                .iter()
                .map(|r| {
                    let mut r: Vec<String> = r.iter().map(|e| e.to_string()).collect();
                    r.sort();
                    r
                })
                .collect();
            rows.sort();
            rows
        };
        a.len() == b.len() && key(a) == key(b)
    }

    #[test]
    fn d_of_unit_splits() {
        // over k[[x,y,z]]/(xy), p = 2
        let (x, y, z) = (v(0), v(1), v(2));
        let f = &x * &y;
        let p = 2;
        let m = vec![
            vec![y.clone(), z.pow(p).neg(), zero(), one()],
            vec![zero(), x.clone(), zero(), zero()],
            vec![zero(), zero(), y.clone(), z.neg()],
            vec![zero(), zero(), zero(), x.clone()],
        ];
        let red = unit_reduce(&m, &f);
        assert_eq!(red.split_identity, 1);
        assert_eq!(red.split_zero, 1);
        let want = vec![vec![y.clone(), z.pow(p + 1).neg()], vec![zero(), x.clone()]];
        assert!(same_up_to_permutation(&red.reduced, &want), "{:?}", red.reduced);
    }

    #[test]
    fn free_summand_leaves_a_square_core() {
        // extension of I_1 by I_2 ⊕ I_1 ⊕ I_1 with three unit couplings
        let (x, y, z) = (v(0), v(1), v(2));
        let f = &x * &y;
        let two = TruncatedSeries::constant(3, T, G::from_ints(2, 0));
        let mut phi = vec![vec![zero(); 8]; 8];
        let mut psi = phi.clone();
        for (b, l) in [2u32, 1, 1, 1].into_iter().enumerate() {
            let i = 2 * b;
            phi[i][i] = y.clone();
            phi[i][i + 1] = z.pow(l).neg();
            phi[i + 1][i + 1] = x.clone();
            psi[i][i] = x.clone();
            psi[i][i + 1] = z.pow(l);
            psi[i + 1][i + 1] = y.clone();
        }
        for b in 0..3 {
            phi[2 * b][7] = two.clone();
            psi[2 * b][7] = two.neg();
        }
        let m = MatFac::new(f.clone(), phi, psi);
        let (core, free) = split_trivial_pairs(&m);
        assert_eq!((core.size, free), (6, 1));
        assert!(crate::matfac::mf_validate(&core));
        assert_eq!(unit_reduce(&core.phi, &f).split_zero, 0);
    }

    #[test]
    fn identity_vanishes() {
        let f = &v(0) * &v(1);
        let id: PolyMatrix = (0..3)
            .map(|i| (0..3).map(|j| if i == j { one() } else { zero() }).collect())
            .collect();
        let red = unit_reduce(&id, &f);
        assert!(red.reduced.is_empty());
        assert_eq!(red.split_identity, 3);
        assert_eq!(red.split_zero, 0);
    }

    #[test]
    fn maximal_ideal_unchanged() {
        let (x, y) = (v(0), v(1));
        let f = &x.pow(2) + &y.pow(3);
        let m = vec![vec![x.clone(), y.clone()], vec![y.clone(), x.clone()]];
        let red = unit_reduce(&m, &f);
        assert_eq!(red.reduced, m);
        assert_eq!((red.split_identity, red.split_zero), (0, 0));
    }

    #[test]
    fn normalize_polynomial_modulus() {
        let (x, y) = (v(0), v(1));
        let f = &x.pow(2) + &y.pow(3);
        // y³ ≡ −x² (leading term y³ in degree-lex)
        let r = normalize_mod(&y.pow(3), &f);
        assert_eq!(r, x.pow(2).neg());
        let g = &x * &y;
        assert!(normalize_mod(&(&x.pow(2) * &y), &g).is_zero());
        assert_eq!(normalize_mod(&x.scale(&G::from_ints(2, 0)), &g), x.scale(&G::from_ints(2, 0)));
    }

    #[test]
    fn hilbert_separates_transposes() {
        // cok [[x, y], [y^4, -xy]] and its transpose over x^2 y + y^5
        let (x, y) = (v(0), v(1));
        let a = vec![vec![x.clone(), y.clone()], vec![y.pow(4), (&x * &y).neg()]];
        let b = vec![vec![&x * &y, y.clone()], vec![y.pow(4), x.neg()]];
        let (ha, hb) = (hilbert_profile(&a, 2, 3), hilbert_profile(&b, 2, 3));
        assert_eq!(ha[..2], [2, 4]);
        assert_eq!(hb[..2], [2, 5]);
        assert_ne!(ha, hb);
    }

    #[test]
    fn blocks_of_diagonal() {
        let (x, y) = (v(0), v(1));
        let m = vec![vec![x.clone(), zero()], vec![zero(), y.clone()]];
        assert_eq!(blocks(&m), vec![(vec![0], vec![0]), (vec![1], vec![1])]);
    }
}
