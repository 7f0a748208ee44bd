//! Graded Ext¹ between a factorization and a finitely presented module.
//!
//! For M = cok φ_M with syzygy matrix ψ_M and N = cok φ_N, Ext¹(M, N) is the
//! space of X with Xψ_M ∈ im φ_N modulo {Zφ_M + φ_N W}. Everything is
//! weighted-homogeneous, so the system splits into finite slices by degree.

use std::collections::HashMap;

use crate::linalg::{self, SparseRow};
use crate::series_ring::{GaussianRational, TruncatedSeries};

use super::{entry_degree, infer_weights, mf_direct_sum_all, MatFac, MatFacError, PolyMatrix};

/// Dimension of each degree slice of Ext¹, starting at `d_lo`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtProfile {
    pub d_lo: i64,
    pub dims: Vec<usize>,
}

impl ExtProfile {
    pub fn total(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn total_prefix(&self, slices: usize) -> usize {
        self.dims.iter().take(slices).sum()
    }
}

fn shifts(mat: &PolyMatrix, w: &[u32]) -> Result<(Vec<i64>, Vec<i64>), MatFacError> {
    let n = mat.len();
    let m = mat.first().map(|r| r.len()).unwrap_or(0);
    let mut deg = vec![vec![None; m]; n];
    for (i, row) in mat.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            deg[i][j] = entry_degree(e, w)?;
        }
    }
    let mut a: Vec<Option<i64>> = vec![None; n];
    let mut b: Vec<Option<i64>> = vec![None; m];
    for start in 0..n {
        if a[start].is_some() {
            continue;
        }
        a[start] = Some(0);
        let mut stack = vec![(true, start)];
        while let Some((is_row, k)) = stack.pop() {
            if is_row {
                let ai = a[k].unwrap();
                for j in 0..m {
                    if let Some(d) = deg[k][j] {
                        match b[j] {
                            None => {
                                b[j] = Some(ai + d);
                                stack.push((false, j));
                            }
                            Some(bj) if bj != ai + d => return Err(MatFacError::NotGraded),
                            _ => {}
                        }
                    }
                }
            } else {
                let bj = b[k].unwrap();
                for i in 0..n {
                    if let Some(d) = deg[i][k] {
                        match a[i] {
                            None => {
                                a[i] = Some(bj - d);
                                stack.push((true, i));
                            }
                            Some(ai) if ai != bj - d => return Err(MatFacError::NotGraded),
                            _ => {}
                        }
                    }
                }
            }
        }
    }
    Ok((
        a.into_iter().map(|v| v.unwrap_or(0)).collect(),
        b.into_iter().map(|v| v.unwrap_or(0)).collect(),
    ))
}

struct Monomials<'a> {
    w: &'a [u32],
    cache: HashMap<i64, Vec<Vec<u32>>>,
}

impl<'a> Monomials<'a> {
    fn new(w: &'a [u32]) -> Self {
        Monomials {
            w,
            cache: HashMap::new(),
        }
    }

    fn of_degree(&mut self, d: i64) -> Vec<Vec<u32>> {
        if d < 0 {
            return vec![];
        }
        if let Some(v) = self.cache.get(&d) {
            return v.clone();
        }
        let mut out = vec![];
        let mut cur = vec![0u32; self.w.len()];
        fill(self.w, 0, d, &mut cur, &mut out);
        self.cache.insert(d, out.clone());
        out
    }
}

fn fill(w: &[u32], k: usize, rest: i64, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if k == w.len() {
        if rest == 0 {
            out.push(cur.clone());
        }
        return;
    }
    let wk = w[k] as i64;
    let mut e = 0;
    while e * wk <= rest {
        cur[k] = e as u32;
        fill(w, k + 1, rest - e * wk, cur, out);
        e += 1;
    }
    cur[k] = 0;
}

fn mul_exp(a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[derive(Default)]
struct Indexer {
    map: HashMap<(usize, usize, Vec<u32>), usize>,
}

impl Indexer {
    fn get(&mut self, i: usize, k: usize, e: Vec<u32>) -> usize {
        let n = self.map.len();
        *self.map.entry((i, k, e)).or_insert(n)
    }
}

fn push_terms(row: &mut SparseRow<GaussianRational>, idx: usize, c: &GaussianRational) {
    row.push((idx, c.clone()));
}

/// Collapses repeated indices by summing.
fn canon(mut row: SparseRow<GaussianRational>) -> SparseRow<GaussianRational> {
    row.sort_by_key(|(k, _)| *k);
    let mut out: SparseRow<GaussianRational> = Vec::with_capacity(row.len());
    for (k, v) in row {
        match out.last_mut() {
            Some((k0, v0)) if *k0 == k => *v0 = &*v0 + &v,
            _ => out.push((k, v)),
        }
    }
    out
}

struct Problem<'a> {
    phi_m: &'a PolyMatrix,
    psi_m: &'a PolyMatrix,
    phi_n: &'a PolyMatrix,
    a_m: Vec<i64>,
    b_m: Vec<i64>,
    c_m: Vec<i64>,
    a_n: Vec<i64>,
    b_n: Vec<i64>,
    n_injective: bool,
}

impl<'a> Problem<'a> {
    fn slice(&self, d: i64, mons: &mut Monomials) -> usize {
        let m = self.phi_m.len();
        let n = self.phi_n.len();
        let np = self.b_n.len();

        // cycles: X ψ_M − φ_N Y = 0
        let mut eq = Indexer::default();
        let mut x_vecs = vec![];
        let mut x_index = Indexer::default();
        for i in 0..n {
            for j in 0..m {
                for mu in mons.of_degree(d + self.b_m[j] - self.a_n[i]) {
                    x_index.get(i, j, mu.clone());
                    let mut row = vec![];
                    for k in 0..m {
                        for (e, c) in self.psi_m[j][k].terms() {
                            push_terms(&mut row, eq.get(i, k, mul_exp(&mu, e)), c);
                        }
                    }
                    x_vecs.push(canon(row));
                }
            }
        }
        let n_x = x_vecs.len();
        if n_x == 0 {
            return 0;
        }
        let mut y_vecs = vec![];
        for ip in 0..np {
            for k in 0..m {
                for mu in mons.of_degree(d + self.c_m[k] - self.b_n[ip]) {
                    let mut row = vec![];
                    for i in 0..n {
                        for (e, c) in self.phi_n[i][ip].terms() {
                            push_terms(&mut row, eq.get(i, k, mul_exp(&mu, e)), &-c.clone());
                        }
                    }
                    y_vecs.push(canon(row));
                }
            }
        }
        let rank_y = if self.n_injective {
            y_vecs.len()
        } else {
            linalg::rank(&y_vecs)
        };
        let mut all = x_vecs;
        all.extend(y_vecs);
        let cycles = n_x + rank_y - linalg::rank(&all);

        // boundaries: Z φ_M + φ_N W inside X-space
        let mut b_vecs = vec![];
        for i in 0..n {
            for a in 0..m {
                for mu in mons.of_degree(d + self.a_m[a] - self.a_n[i]) {
                    let mut row = vec![];
                    for j in 0..m {
                        for (e, c) in self.phi_m[a][j].terms() {
                            push_terms(&mut row, x_index.get(i, j, mul_exp(&mu, e)), c);
                        }
                    }
                    b_vecs.push(canon(row));
                }
            }
        }
        for ip in 0..np {
            for j in 0..m {
                for mu in mons.of_degree(d + self.b_m[j] - self.b_n[ip]) {
                    let mut row = vec![];
                    for i in 0..n {
                        for (e, c) in self.phi_n[i][ip].terms() {
                            push_terms(&mut row, x_index.get(i, j, mul_exp(&mu, e)), c);
                        }
                    }
                    b_vecs.push(canon(row));
                }
            }
        }
        debug_assert_eq!(x_index.map.len(), n_x);
        cycles - linalg::rank(&b_vecs)
    }
}

/// Per-degree Ext¹(cok φ_M, cok φ_N) over `slices` consecutive degrees.
fn profile(
    m: &MatFac,
    phi_n: &PolyMatrix,
    n_injective: bool,
    w: &[u32],
    slices: usize,
) -> Result<ExtProfile, MatFacError> {
    if m.size == 0 || phi_n.is_empty() {
        return Ok(ExtProfile {
            d_lo: 0,
            dims: vec![0; slices],
        });
    }
    let deg_f = entry_degree(&m.f, w)?.ok_or(MatFacError::InvalidMF)?;
    let (a_m, b_m) = shifts(&m.phi, w)?;
    let c_m: Vec<i64> = a_m.iter().map(|a| a + deg_f).collect();
    for (j, row) in m.psi.iter().enumerate() {
        for (k, e) in row.iter().enumerate() {
            if let Some(dg) = entry_degree(e, w)? {
                if dg != c_m[k] - b_m[j] {
                    return Err(MatFacError::NotGraded);
                }
            }
        }
    }
    let (a_n, b_n) = shifts(phi_n, w)?;
    let d_lo = a_n
        .iter()
        .flat_map(|ai| b_m.iter().map(move |bj| ai - bj))
        .min()
        .unwrap_or(0);
    let p = Problem {
        phi_m: &m.phi,
        psi_m: &m.psi,
        phi_n,
        a_m,
        b_m,
        c_m,
        a_n,
        b_n,
        n_injective,
    };
    let mut mons = Monomials::new(w);
    let dims = (0..slices as i64).map(|s| p.slice(d_lo + s, &mut mons)).collect();
    Ok(ExtProfile { d_lo, dims })
}

fn slices_for(trunc: u32, w: &[u32]) -> usize {
    (trunc as usize) * (*w.iter().min().unwrap_or(&1) as usize) + 1
}

fn weights_of(f: &TruncatedSeries) -> Result<Vec<u32>, MatFacError> {
    infer_weights(f).ok_or(MatFacError::NotGraded)
}

/// Ext¹ at `trunc` and at `trunc + 2`, from one profile.
fn ext_pair(
    m: &MatFac,
    phi_n: &PolyMatrix,
    n_injective: bool,
    trunc: u32,
) -> Result<(usize, usize), MatFacError> {
    let w = weights_of(&m.f)?;
    let lo = slices_for(trunc, &w);
    let hi = slices_for(trunc + 2, &w);
    let p = profile(m, phi_n, n_injective, &w, hi)?;
    Ok((p.total_prefix(lo), p.total()))
}

pub fn ext1_dim(m: &MatFac, n: &MatFac, trunc: u32) -> Result<usize, MatFacError> {
    if m.f != n.f {
        return Err(MatFacError::MixedRings);
    }
    let w = weights_of(&m.f)?;
    Ok(profile(m, &n.phi, true, &w, slices_for(trunc, &w))?.total())
}

/// Ext¹ checked for agreement at `trunc` and `trunc + 2`.
pub fn ext1_dim_stable(m: &MatFac, n: &MatFac, trunc: u32) -> Result<usize, MatFacError> {
    if m.f != n.f {
        return Err(MatFacError::MixedRings);
    }
    let (at, next) = ext_pair(m, &n.phi, true, trunc)?;
    if at != next {
        return Err(MatFacError::Unstabilized { at, next });
    }
    Ok(at)
}

/// Ext¹(cok φ_M, N) for N = cok φ over R, presented over the ambient ring by [φ | f·I].
pub fn ext1_to_presentation(m: &MatFac, phi: &PolyMatrix, trunc: u32) -> Result<usize, MatFacError> {
    let n = phi.len();
    let z = TruncatedSeries::zero(m.f.nvars(), m.f.trunc());
    let ext: PolyMatrix = phi
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|k| if k == i { m.f.clone() } else { z.clone() }));
            row
        })
        .collect();
    let (at, next) = ext_pair(m, &ext, false, trunc)?;
    if at != next {
        return Err(MatFacError::Unstabilized { at, next });
    }
    Ok(at)
}

/// Whether Ext¹(⊕mods, ⊕mods) vanishes, with stabilization enforced.
pub fn is_rigid(mods: &[&MatFac], trunc: u32) -> Result<bool, MatFacError> {
    let Some(first) = mods.first() else {
        return Ok(true);
    };
    if mods.iter().any(|m| m.f != first.f) {
        return Err(MatFacError::MixedRings);
    }
    let sum = mf_direct_sum_all(&first.f, mods)?;
    Ok(ext1_dim_stable(&sum, &sum, trunc)? == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series_ring::GaussianRational as G;

    const T: u32 = 40;

    fn x() -> TruncatedSeries {
        TruncatedSeries::var(2, T, 0)
    }
    fn y() -> TruncatedSeries {
        TruncatedSeries::var(2, T, 1)
    }

    /// A_n with n odd: N± = cok(y^{l+1} ± i x).
    fn a_odd(l: u32, sign: i64) -> MatFac {
        let f = &x().pow(2) + &y().pow(2 * l + 2);
        let ix = x().scale(&G::from_ints(0, sign));
        MatFac::new(f, vec![vec![&y().pow(l + 1) + &ix]], vec![vec![&y().pow(l + 1) - &ix]])
    }

    #[test]
    fn monomial_enumeration() {
        let w = [3u32, 2];
        let mut m = Monomials::new(&w);
        assert_eq!(m.of_degree(6).len(), 2);
        assert_eq!(m.of_degree(1).len(), 0);
        assert_eq!(m.of_degree(0), vec![vec![0, 0]]);
    }

    #[test]
    fn n_plus_rigid() {
        let np = a_odd(1, 1);
        assert_eq!(ext1_dim_stable(&np, &np, 8).unwrap(), 0);
    }

    #[test]
    fn n_plus_n_minus() {
        let np = a_odd(1, 1);
        let nm = a_odd(1, -1);
        let e = ext1_dim_stable(&np, &nm, 8).unwrap();
        assert!(e >= 1);
    }

    #[test]
    fn free_source_vanishes() {
        let np = a_odd(1, 1);
        let r = MatFac::free(&np.f);
        assert_eq!(ext1_dim_stable(&r, &np, 8).unwrap(), 0);
        assert_eq!(ext1_dim_stable(&np, &r, 8).unwrap(), 0);
    }

    #[test]
    fn presentation_path_agrees() {
        let np = a_odd(2, 1);
        let nm = a_odd(2, -1);
        for (a, b) in [(&np, &nm), (&nm, &np), (&np, &np)] {
            let direct = ext1_dim_stable(a, b, 10).unwrap();
            let pres = ext1_to_presentation(a, &b.phi, 10).unwrap();
            assert_eq!(direct, pres);
        }
    }

    #[test]
    fn mixed_rings() {
        let a = a_odd(1, 1);
        let b = a_odd(2, 1);
        assert_eq!(ext1_dim(&a, &b, 8), Err(MatFacError::MixedRings));
    }

    #[test]
    fn rigid_sums() {
        let np = a_odd(1, 1);
        let nm = a_odd(1, -1);
        assert!(is_rigid(&[&np], 8).unwrap());
        assert!(!is_rigid(&[&np, &nm], 8).unwrap());
    }
}
