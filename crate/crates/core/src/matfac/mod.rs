//! Matrix factorizations of a defining polynomial and the invariants
//! computed from them.

mod ext;
mod reduce;

pub use ext::{ext1_dim, ext1_dim_stable, ext1_to_presentation, is_rigid, ExtProfile};
pub use reduce::{
    hilbert_profile, mf_decompose, normalize_mod, split_trivial_pairs, unit_reduce, DecompTable, Fingerprint, Reduction,
};

use thiserror::Error;

use crate::linalg;
use crate::series_ring::{substitute, CurveParam, GaussianRational, SeriesError, TruncatedSeries};

pub type PolyMatrix = Vec<Vec<TruncatedSeries>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatFacError {
    #[error("not a matrix factorization")]
    InvalidMF,
    #[error("factorizations are over different rings")]
    MixedRings,
    #[error("matrix entries are not weighted-homogeneous")]
    NotGraded,
    #[error("Ext dimension did not stabilize: {at} at trunc, {next} at trunc+2")]
    Unstabilized { at: usize, next: usize },
    #[error("no catalog entry matches a {}x{} block", .0.len(), .0.first().map(|r| r.len()).unwrap_or(0))]
    UnknownIndecomposable(PolyMatrix),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// A pair (φ, ψ) with φψ = ψφ = f·I presenting cok φ.
#[derive(Clone, Debug, PartialEq)]
pub struct MatFac {
    pub f: TruncatedSeries,
    pub size: usize,
    pub phi: PolyMatrix,
    pub psi: PolyMatrix,
}

/// Localization ranks, one per minimal prime.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChiVector {
    pub dims: Vec<usize>,
}

impl ChiVector {
    pub fn zero(k: usize) -> Self {
        ChiVector { dims: vec![0; k] }
    }

    pub fn add(&self, o: &ChiVector) -> ChiVector {
        ChiVector {
            dims: self.dims.iter().zip(&o.dims).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scaled(&self, k: usize) -> ChiVector {
        ChiVector {
            dims: self.dims.iter().map(|a| a * k).collect(),
        }
    }
}

impl std::fmt::Display for ChiVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

pub fn mat_mul(a: &PolyMatrix, b: &PolyMatrix, zero: &TruncatedSeries) -> PolyMatrix {
    let n = a.len();
    let k = b.len();
    let m = b.first().map(|r| r.len()).unwrap_or(0);
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = zero.clone();
                    for (l, brow) in b.iter().enumerate().take(k) {
                        if a[i][l].is_zero() || brow[j].is_zero() {
                            continue;
                        }
                        acc = &acc + &(&a[i][l] * &brow[j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn is_square(m: &PolyMatrix, n: usize) -> bool {
    m.len() == n && m.iter().all(|r| r.len() == n)
}

impl MatFac {
    pub fn new(f: TruncatedSeries, phi: PolyMatrix, psi: PolyMatrix) -> Self {
        let size = phi.len();
        MatFac { f, size, phi, psi }
    }

    /// The factorization (f, 1) presenting R itself.
    pub fn free(f: &TruncatedSeries) -> Self {
        let one = TruncatedSeries::one(f.nvars(), f.trunc());
        MatFac::new(f.clone(), vec![vec![f.clone()]], vec![vec![one]])
    }

    /// The factorization (1, f) presenting the zero module.
    pub fn trivial(f: &TruncatedSeries) -> Self {
        let one = TruncatedSeries::one(f.nvars(), f.trunc());
        MatFac::new(f.clone(), vec![vec![one]], vec![vec![f.clone()]])
    }

    pub fn empty(f: &TruncatedSeries) -> Self {
        MatFac::new(f.clone(), vec![], vec![])
    }

    fn zero_entry(&self) -> TruncatedSeries {
        TruncatedSeries::zero(self.f.nvars(), self.f.trunc())
    }
}

pub fn mf_validate(m: &MatFac) -> bool {
    if !is_square(&m.phi, m.size) || !is_square(&m.psi, m.size) {
        return false;
    }
    let shape_ok = m
        .phi
        .iter()
        .chain(&m.psi)
        .flatten()
        .all(|e| e.nvars() == m.f.nvars() && e.trunc() == m.f.trunc());
    if !shape_ok {
        return false;
    }
    // products must not reach the truncation, else equality is not exact
    let deg = |mm: &PolyMatrix| mm.iter().flatten().filter_map(|e| e.max_degree()).max().unwrap_or(0);
    if deg(&m.phi) + deg(&m.psi) >= m.f.trunc() || m.f.max_degree().unwrap_or(0) >= m.f.trunc() {
        return false;
    }
    let z = m.zero_entry();
    let target: PolyMatrix = (0..m.size)
        .map(|i| {
            (0..m.size)
                .map(|j| if i == j { m.f.clone() } else { z.clone() })
                .collect()
        })
        .collect();
    mat_mul(&m.phi, &m.psi, &z) == target && mat_mul(&m.psi, &m.phi, &z) == target
}

pub fn mf_syzygy(m: &MatFac) -> Result<MatFac, MatFacError> {
    if !mf_validate(m) {
        return Err(MatFacError::InvalidMF);
    }
    Ok(MatFac::new(m.f.clone(), m.psi.clone(), m.phi.clone()))
}

fn block_diag(a: &PolyMatrix, b: &PolyMatrix, z: &TruncatedSeries) -> PolyMatrix {
    let (na, nb) = (a.len(), b.len());
    let ca = a.first().map(|r| r.len()).unwrap_or(0);
    let cb = b.first().map(|r| r.len()).unwrap_or(0);
    let mut out = Vec::with_capacity(na + nb);
    for r in a {
        let mut row = r.clone();
        row.extend(std::iter::repeat(z.clone()).take(cb));
        out.push(row);
    }
    for r in b {
        let mut row: Vec<TruncatedSeries> = std::iter::repeat(z.clone()).take(ca).collect();
        row.extend(r.iter().cloned());
        out.push(row);
    }
    out
}

pub fn mf_direct_sum(a: &MatFac, b: &MatFac) -> Result<MatFac, MatFacError> {
    if a.f != b.f {
        return Err(MatFacError::MixedRings);
    }
    let z = a.zero_entry();
    Ok(MatFac::new(
        a.f.clone(),
        block_diag(&a.phi, &b.phi, &z),
        block_diag(&a.psi, &b.psi, &z),
    ))
}

pub fn mf_direct_sum_all(f: &TruncatedSeries, ms: &[&MatFac]) -> Result<MatFac, MatFacError> {
    let mut acc = MatFac::empty(f);
    for m in ms {
        acc = mf_direct_sum(&acc, m)?;
    }
    Ok(acc)
}

/// Rank of a polynomial matrix over the fraction field of the parameter ring,
/// after substituting a curve into every entry.
fn generic_rank(mat: &PolyMatrix, curve: &CurveParam) -> Result<usize, MatFacError> {
    let rows = mat.len();
    let cols = mat.first().map(|r| r.len()).unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Ok(0);
    }
    let entry_deg = mat.iter().flatten().filter_map(|e| e.max_degree()).max().unwrap_or(0);
    let curve_deg = curve
        .substitutions
        .iter()
        .filter_map(|s| s.max_degree())
        .max()
        .unwrap_or(0);
    let trunc = entry_deg * curve_deg.max(1) + 1;
    let exact = CurveParam::new(
        &curve.label,
        curve.substitutions.iter().map(|s| s.retrunc(trunc)).collect(),
    );
    let uni: Vec<Vec<TruncatedSeries>> = mat
        .iter()
        .map(|r| r.iter().map(|e| substitute(e, &exact)).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;
    // a nonzero maximal minor has degree ≤ rows·(trunc−1), so it cannot vanish
    // at that many + 1 distinct points; the maximum over them is the generic rank
    let max_t = rows.min(cols) as u32 * trunc + 1;
    let full = rows.min(cols);
    let mut best = 0;
    for t in 1..=max_t as i64 {
        let v = GaussianRational::from_ints(t, 0);
        let evald: Vec<Vec<GaussianRational>> = uni
            .iter()
            .map(|r| r.iter().map(|e| e.eval_univariate(&v)).collect())
            .collect();
        best = best.max(linalg::rank_dense(&evald));
        if best == full {
            break;
        }
    }
    Ok(best)
}

/// Dimension of cok φ at each minimal prime: size − generic rank of φ on the branch.
pub fn chi(m: &MatFac, primes: &[CurveParam]) -> Result<ChiVector, MatFacError> {
    chi_of_presentation(&m.phi, primes)
}

pub fn chi_of_presentation(phi: &PolyMatrix, primes: &[CurveParam]) -> Result<ChiVector, MatFacError> {
    let dims = primes
        .iter()
        .map(|c| generic_rank(phi, c).map(|r| phi.len() - r))
        .collect::<Result<_, _>>()?;
    Ok(ChiVector { dims })
}

/// Positive integer weights making f weighted-homogeneous, smallest first.
pub fn infer_weights(f: &TruncatedSeries) -> Option<Vec<u32>> {
    let n = f.nvars();
    let terms: Vec<&Vec<u32>> = f.terms().map(|(e, _)| e).collect();
    let wdeg = |w: &[u32], e: &[u32]| -> u32 { w.iter().zip(e).map(|(a, b)| a * b).sum() };
    let ok = |w: &[u32]| terms.windows(2).all(|p| wdeg(w, p[0]) == wdeg(w, p[1]));
    let ones = vec![1u32; n];
    if ok(&ones) {
        return Some(ones);
    }
    const BOUND: u32 = 24;
    let mut best: Option<Vec<u32>> = None;
    let mut w = vec![1u32; n];
    loop {
        if ok(&w) && best.as_ref().map(|b| w.iter().sum::<u32>() < b.iter().sum()).unwrap_or(true) {
            best = Some(w.clone());
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            w[k] += 1;
            if w[k] <= BOUND {
                break;
            }
            w[k] = 1;
            k += 1;
        }
    }
}

/// Weighted degree of a homogeneous entry; `Err` if inhomogeneous, `Ok(None)` for zero.
pub(crate) fn entry_degree(e: &TruncatedSeries, w: &[u32]) -> Result<Option<i64>, MatFacError> {
    let mut d = None;
    for (exp, _) in e.terms() {
        let k: i64 = exp.iter().zip(w).map(|(a, b)| (*a as i64) * (*b as i64)).sum();
        match d {
            None => d = Some(k),
            Some(d0) if d0 != k => return Err(MatFacError::NotGraded),
            _ => {}
        }
    }
    Ok(d)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::series_ring::GaussianRational as G;

    const T: u32 = 24;

    fn x() -> TruncatedSeries {
        TruncatedSeries::var(2, T, 0)
    }
    fn y() -> TruncatedSeries {
        TruncatedSeries::var(2, T, 1)
    }
    fn i() -> G {
        G::i()
    }

    fn a1_n(sign: i64) -> MatFac {
        let f = &x().pow(2) + &y().pow(2);
        let iy = y().scale(&G::from_ints(0, sign));
        MatFac::new(f, vec![vec![&x() + &iy]], vec![vec![&x() - &iy]])
    }

    #[test]
    fn validate_a1() {
        assert!(mf_validate(&a1_n(1)));
        assert!(mf_validate(&a1_n(-1)));
    }

    #[test]
    fn validate_trivial() {
        let f = &x().pow(3) + &y().pow(4);
        assert!(mf_validate(&MatFac::trivial(&f)));
        assert!(mf_validate(&MatFac::free(&f)));
    }

    #[test]
    fn validate_rejects_wrong_product() {
        let f = &x().pow(3) + &y().pow(4);
        let m = MatFac::new(f, vec![vec![x()]], vec![vec![x().pow(2)]]);
        assert!(!mf_validate(&m));
    }

    #[test]
    fn syzygy_is_involution() {
        let m = a1_n(1);
        assert_eq!(mf_syzygy(&mf_syzygy(&m).unwrap()).unwrap(), m);
        assert_eq!(mf_syzygy(&m).unwrap(), a1_n(-1));
    }

    #[test]
    fn syzygy_rejects_invalid() {
        let f = &x().pow(3) + &y().pow(4);
        let m = MatFac::new(f, vec![vec![x()]], vec![vec![x().pow(2)]]);
        assert_eq!(mf_syzygy(&m), Err(MatFacError::InvalidMF));
    }

    #[test]
    fn direct_sum_trivial() {
        let f = &x().pow(2) + &y().pow(2);
        let t = MatFac::trivial(&f);
        let s = mf_direct_sum(&t, &t).unwrap();
        assert_eq!(s.size, 2);
        assert!(mf_validate(&s));
        assert_eq!(s.phi[0][1], TruncatedSeries::zero(2, T));
    }

    #[test]
    fn direct_sum_mixed() {
        let a = a1_n(1);
        let f2 = &x().pow(3) + &y().pow(4);
        assert_eq!(mf_direct_sum(&a, &MatFac::free(&f2)), Err(MatFacError::MixedRings));
    }

    #[test]
    fn weights() {
        let f = &x().pow(3) + &y().pow(4);
        assert_eq!(infer_weights(&f), Some(vec![4, 3]));
        // D_6: x²y + y⁵
        let f = &(&x().pow(2) * &y()) + &y().pow(5);
        assert_eq!(infer_weights(&f), Some(vec![2, 1]));
        let f = &x() * &y();
        assert_eq!(infer_weights(&f), Some(vec![1, 1]));
    }

    #[test]
    fn chi_a1_branches() {
        // branches x = ∓i t, y = t
        let p = CurveParam::from_monomials("p", T, &[(G::from_ints(0, -1), 1), (G::from_ints(1, 0), 1)]);
        let q = CurveParam::from_monomials("q", T, &[(i(), 1), (G::from_ints(1, 0), 1)]);
        let primes = [p, q];
        let f = a1_n(1).f.clone();
        assert_eq!(chi(&a1_n(1), &primes).unwrap().dims, vec![1, 0]);
        assert_eq!(chi(&a1_n(-1), &primes).unwrap().dims, vec![0, 1]);
        assert_eq!(chi(&MatFac::free(&f), &primes).unwrap().dims, vec![1, 1]);
        let s = mf_direct_sum(&a1_n(1), &a1_n(-1)).unwrap();
        assert_eq!(chi(&s, &primes).unwrap().dims, vec![1, 1]);
    }
}
