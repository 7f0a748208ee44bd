//! Exact rank of sparse matrices over ℚ(i).
//!
//! Elimination first runs over machine-word Gaussian rationals with overflow
//! checks and restarts over big rationals when a value leaves range.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::series_ring::GaussianRational;

pub type SparseRow<T> = Vec<(usize, T)>;

pub trait Scalar: Clone + PartialEq + Sized {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn sub(&self, o: &Self) -> Option<Self>;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn inv(&self) -> Option<Self>;
}

/// (a + b·i)/d with d > 0 and gcd(a, b, d) = 1.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SmallGq {
    a: i64,
    b: i64,
    d: i64,
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    a.gcd(&b)
}

impl SmallGq {
    fn reduce(a: i128, b: i128, d: i128) -> Option<SmallGq> {
        if a == 0 && b == 0 {
            return Some(SmallGq { a: 0, b: 0, d: 1 });
        }
        let mut g = gcd_i128(gcd_i128(a, b), d);
        if d < 0 {
            g = -g;
        }
        let (a, b, d) = (a / g, b / g, d / g);
        Some(SmallGq {
            a: i64::try_from(a).ok()?,
            b: i64::try_from(b).ok()?,
            d: i64::try_from(d).ok()?,
        })
    }

    pub fn from_gq(c: &GaussianRational) -> Option<SmallGq> {
        let d = c.re.denom().lcm(c.im.denom());
        let a = c.re.numer() * (&d / c.re.denom());
        let b = c.im.numer() * (&d / c.im.denom());
        Self::reduce(a.to_i128()?, b.to_i128()?, d.to_i128()?)
    }
}

impl Scalar for SmallGq {
    fn zero() -> Self {
        SmallGq { a: 0, b: 0, d: 1 }
    }

    fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    fn sub(&self, o: &Self) -> Option<Self> {
        let (d1, d2) = (self.d as i128, o.d as i128);
        let a = (self.a as i128).checked_mul(d2)?.checked_sub((o.a as i128).checked_mul(d1)?)?;
        let b = (self.b as i128).checked_mul(d2)?.checked_sub((o.b as i128).checked_mul(d1)?)?;
        Self::reduce(a, b, d1.checked_mul(d2)?)
    }

    fn mul(&self, o: &Self) -> Option<Self> {
        let (a1, b1, a2, b2) = (self.a as i128, self.b as i128, o.a as i128, o.b as i128);
        let a = a1.checked_mul(a2)?.checked_sub(b1.checked_mul(b2)?)?;
        let b = a1.checked_mul(b2)?.checked_add(b1.checked_mul(a2)?)?;
        Self::reduce(a, b, (self.d as i128).checked_mul(o.d as i128)?)
    }

    fn inv(&self) -> Option<Self> {
        // d/(a+bi) = d(a−bi)/(a²+b²)
        let (a, b, d) = (self.a as i128, self.b as i128, self.d as i128);
        let n = a.checked_mul(a)?.checked_add(b.checked_mul(b)?)?;
        Self::reduce(d.checked_mul(a)?, d.checked_mul(-b)?, n)
    }
}

impl Scalar for GaussianRational {
    fn zero() -> Self {
        <GaussianRational as Zero>::zero()
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }

    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }

    fn inv(&self) -> Option<Self> {
        GaussianRational::inv(self)
    }
}

/// Incremental row echelon basis; `insert` reports whether a row was independent.
pub struct Echelon<T: Scalar> {
    pivots: HashMap<usize, SparseRow<T>>,
}

impl<T: Scalar> Default for Echelon<T> {
    fn default() -> Self {
        Echelon {
            pivots: HashMap::new(),
        }
    }
}

impl<T: Scalar> Echelon<T> {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// `None` signals arithmetic overflow.
    pub fn insert(&mut self, mut row: SparseRow<T>) -> Option<bool> {
        row.retain(|(_, v)| !v.is_zero());
        row.sort_by_key(|(c, _)| *c);
        while let Some((lead, c)) = row.first().cloned() {
            match self.pivots.get(&lead) {
                Some(p) => row = axpy(&row, &c, p)?,
                None => {
                    let ci = c.inv()?;
                    let mut norm = Vec::with_capacity(row.len());
                    for (k, v) in row {
                        norm.push((k, v.mul(&ci)?));
                    }
                    self.pivots.insert(lead, norm);
                    return Some(true);
                }
            }
        }
        Some(false)
    }
}

/// row − c·p over sorted sparse rows.
fn axpy<T: Scalar>(row: &[(usize, T)], c: &T, p: &[(usize, T)]) -> Option<SparseRow<T>> {
    let mut out = Vec::with_capacity(row.len() + p.len());
    let (mut i, mut j) = (0, 0);
    while i < row.len() || j < p.len() {
        let ki = row.get(i).map(|e| e.0).unwrap_or(usize::MAX);
        let kj = p.get(j).map(|e| e.0).unwrap_or(usize::MAX);
        if ki < kj {
            out.push(row[i].clone());
            i += 1;
        } else {
            let v = c.mul(&p[j].1)?;
            let r = if ki == kj {
                let r = row[i].1.sub(&v)?;
                i += 1;
                r
            } else {
                T::zero().sub(&v)?
            };
            if !r.is_zero() {
                out.push((kj, r));
            }
            j += 1;
        }
    }
    Some(out)
}

fn rank_with<T: Scalar>(rows: Vec<SparseRow<T>>) -> Option<usize> {
    let mut e = Echelon::default();
    for r in rows {
        e.insert(r)?;
    }
    Some(e.rank())
}

/// Exact rank of the matrix whose rows are the given sparse vectors.
pub fn rank(rows: &[SparseRow<GaussianRational>]) -> usize {
    let small: Option<Vec<SparseRow<SmallGq>>> = rows
        .iter()
        .map(|r| r.iter().map(|(k, v)| SmallGq::from_gq(v).map(|s| (*k, s))).collect())
        .collect();
    if let Some(small) = small {
        if let Some(r) = rank_with(small) {
            return r;
        }
    }
    rank_with(rows.to_vec()).expect("big rationals do not overflow")
}

/// Rank of a dense matrix.
pub fn rank_dense(m: &[Vec<GaussianRational>]) -> usize {
    let rows: Vec<SparseRow<GaussianRational>> = m
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, v)| !Zero::is_zero(*v))
                .map(|(k, v)| (k, v.clone()))
                .collect()
        })
        .collect();
    rank(&rows)
}

/// Fraction-free rank over ℤ\[i\], used as an independent cross-check.
pub fn rank_bareiss(m: &[Vec<GaussianRational>]) -> usize {
    // clear denominators row by row
    let mut a: Vec<Vec<(BigInt, BigInt)>> = m
        .iter()
        .map(|r| {
            let den = r.iter().fold(BigInt::from(1), |acc, v| {
                acc.lcm(v.re.denom()).lcm(v.im.denom())
            });
            r.iter()
                .map(|v| {
                    let s = BigRational::from_integer(den.clone());
                    ((&v.re * &s).to_integer(), (&v.im * &s).to_integer())
                })
                .collect()
        })
        .collect();
    let rows = a.len();
    let cols = a.first().map(|r| r.len()).unwrap_or(0);
    let zero = (BigInt::zero(), BigInt::zero());
    let mul = |x: &(BigInt, BigInt), y: &(BigInt, BigInt)| {
        (&x.0 * &y.0 - &x.1 * &y.1, &x.0 * &y.1 + &x.1 * &y.0)
    };
    let mut prev = (BigInt::from(1), BigInt::zero());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| a[i][c] != zero) else {
            continue;
        };
        a.swap(r, p);
        let norm = &prev.0 * &prev.0 + &prev.1 * &prev.1;
        let conj = (prev.0.clone(), -prev.1.clone());
        for i in r + 1..rows {
            for j in c + 1..cols {
                let t1 = mul(&a[r][c], &a[i][j]);
                let t2 = mul(&a[i][c], &a[r][j]);
                let num = mul(&(&t1.0 - &t2.0, &t1.1 - &t2.1), &conj);
                a[i][j] = (&num.0 / &norm, &num.1 / &norm);
            }
            a[i][c] = zero.clone();
        }
        prev = a[r][c].clone();
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

/// Solves A·v = b over ℚ; `None` unless the system is consistent with a unique solution.
pub fn solve_unique(a: &[Vec<BigRational>], b: &[BigRational], unknowns: usize) -> Option<Vec<BigRational>> {
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .zip(b)
        .map(|(r, v)| {
            let mut r = r.clone();
            r.push(v.clone());
            r
        })
        .collect();
    let mut row = 0;
    for col in 0..unknowns {
        let Some(p) = (row..m.len()).find(|&k| !m[k][col].is_zero()) else {
            return None;
        };
        m.swap(row, p);
        let inv = BigRational::from_integer(1.into()) / m[row][col].clone();
        for v in m[row].iter_mut() {
            *v = &*v * &inv;
        }
        for k in 0..m.len() {
            if k != row && !m[k][col].is_zero() {
                let c = m[k][col].clone();
                for c2 in 0..=unknowns {
                    let d = &c * &m[row][c2];
                    m[k][c2] = &m[k][c2] - &d;
                }
            }
        }
        row += 1;
    }
    if m[row..].iter().any(|r| !r[unknowns].is_zero()) {
        return None;
    }
    Some((0..unknowns).map(|k| m[k][unknowns].clone()).collect())
}
