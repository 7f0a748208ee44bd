//! Truncated multivariate power series over the Gaussian rationals.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("exponent vector has {got} entries, expected {expected}")]
    ArityError { expected: usize, got: usize },
    #[error("series shapes differ: ({0} vars, trunc {1}) vs ({2} vars, trunc {3})")]
    ShapeError(usize, u32, usize, u32),
    #[error("series has zero constant term")]
    NotAUnit,
}

/// An element re + im·i of ℚ(i).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GaussianRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussianRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussianRational { re, im }
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        GaussianRational {
            re: BigRational::from_integer(BigInt::from(re)),
            im: BigRational::from_integer(BigInt::from(im)),
        }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        GaussianRational {
            re: BigRational::new(BigInt::from(num), BigInt::from(den)),
            im: BigRational::zero(),
        }
    }

    pub fn i() -> Self {
        Self::from_ints(0, 1)
    }

    pub fn conj(&self) -> Self {
        GaussianRational {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn norm(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplicative inverse, `None` for zero.
    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm();
        Some(GaussianRational {
            re: &self.re / &n,
            im: -(&self.im / &n),
        })
    }

    pub fn is_gaussian_integer(&self) -> bool {
        self.re.is_integer() && self.im.is_integer()
    }
}

impl Zero for GaussianRational {
    fn zero() -> Self {
        GaussianRational {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl One for GaussianRational {
    fn one() -> Self {
        Self::from_ints(1, 0)
    }
}

impl Add for GaussianRational {
    type Output = GaussianRational;
    fn add(self, o: Self) -> Self {
        &self + &o
    }
}

impl<'a> Add<&'a GaussianRational> for &'a GaussianRational {
    type Output = GaussianRational;
    fn add(self, o: &GaussianRational) -> GaussianRational {
        GaussianRational {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }
}

impl Sub for GaussianRational {
    type Output = GaussianRational;
    fn sub(self, o: Self) -> Self {
        &self - &o
    }
}

impl<'a> Sub<&'a GaussianRational> for &'a GaussianRational {
    type Output = GaussianRational;
    fn sub(self, o: &GaussianRational) -> GaussianRational {
        GaussianRational {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }
}

impl Mul for GaussianRational {
    type Output = GaussianRational;
    fn mul(self, o: Self) -> Self {
        &self * &o
    }
}

impl<'a> Mul<&'a GaussianRational> for &'a GaussianRational {
    type Output = GaussianRational;
    fn mul(self, o: &GaussianRational) -> GaussianRational {
        GaussianRational {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}

impl Div for GaussianRational {
    type Output = GaussianRational;
    /// Panics on division by zero.
    fn div(self, o: Self) -> Self {
        &self * &o.inv().expect("division by zero")
    }
}

impl Neg for GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> Self {
        GaussianRational {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write!(f, "{}i", self.im),
            (false, false) => {
                let sign = if self.im.is_negative() { "-" } else { "+" };
                write!(f, "({}{}{}i)", self.re, sign, self.im.abs())
            }
        }
    }
}

pub type Exponent = Vec<u32>;

/// Element of k[[x_0..x_{n-1}]] modulo terms of total degree ≥ `trunc`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct TruncatedSeries {
    nvars: usize,
    trunc: u32,
    coeffs: BTreeMap<Exponent, GaussianRational>,
}

fn total_degree(e: &[u32]) -> u32 {
    e.iter().sum()
}

impl TruncatedSeries {
    pub fn zero(nvars: usize, trunc: u32) -> Self {
        TruncatedSeries {
            nvars,
            trunc,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize, trunc: u32) -> Self {
        Self::constant(nvars, trunc, GaussianRational::one())
    }

    pub fn constant(nvars: usize, trunc: u32, c: GaussianRational) -> Self {
        let mut s = Self::zero(nvars, trunc);
        if !c.is_zero() && trunc > 0 {
            s.coeffs.insert(vec![0; nvars], c);
        }
        s
    }

    /// The variable x_k.
    pub fn var(nvars: usize, trunc: u32, k: usize) -> Self {
        let mut e = vec![0; nvars];
        e[k] = 1;
        Self::monomial(nvars, trunc, e, GaussianRational::one())
    }

    pub fn monomial(nvars: usize, trunc: u32, exp: Exponent, c: GaussianRational) -> Self {
        let mut s = Self::zero(nvars, trunc);
        if !c.is_zero() && total_degree(&exp) < trunc {
            s.coeffs.insert(exp, c);
        }
        s
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &GaussianRational)> {
        self.coeffs.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, exp: &[u32]) -> GaussianRational {
        self.coeffs.get(exp).cloned().unwrap_or_else(GaussianRational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn constant_term(&self) -> GaussianRational {
        self.coeff(&vec![0; self.nvars])
    }

    pub fn is_unit(&self) -> bool {
        !self.constant_term().is_zero()
    }

    /// Lowest total degree of a stored term.
    pub fn order(&self) -> Option<u32> {
        self.coeffs.keys().map(|e| total_degree(e)).min()
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|e| total_degree(e)).max()
    }

    /// Single term c·x^e, if the series has exactly one.
    pub fn as_monomial(&self) -> Option<(&Exponent, &GaussianRational)> {
        if self.coeffs.len() == 1 {
            self.coeffs.iter().next()
        } else {
            None
        }
    }

    pub fn retrunc(&self, trunc: u32) -> Self {
        TruncatedSeries {
            nvars: self.nvars,
            trunc,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(e, _)| total_degree(e) < trunc)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    fn check_shape(&self, o: &Self) -> Result<(), SeriesError> {
        if self.nvars != o.nvars || self.trunc != o.trunc {
            return Err(SeriesError::ShapeError(
                self.nvars, self.trunc, o.nvars, o.trunc,
            ));
        }
        Ok(())
    }

    fn add_term(&mut self, e: Exponent, c: GaussianRational) {
        if c.is_zero() || total_degree(&e) >= self.trunc {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.coeffs.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = &*o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn try_add(&self, o: &Self) -> Result<Self, SeriesError> {
        self.check_shape(o)?;
        let mut r = self.clone();
        for (e, c) in &o.coeffs {
            r.add_term(e.clone(), c.clone());
        }
        Ok(r)
    }

    pub fn try_sub(&self, o: &Self) -> Result<Self, SeriesError> {
        self.try_add(&o.neg())
    }

    pub fn try_mul(&self, o: &Self) -> Result<Self, SeriesError> {
        self.check_shape(o)?;
        let mut r = Self::zero(self.nvars, self.trunc);
        for (e1, c1) in &self.coeffs {
            let d1 = total_degree(e1);
            for (e2, c2) in &o.coeffs {
                if d1 + total_degree(e2) >= self.trunc {
                    continue;
                }
                let e: Exponent = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                r.add_term(e, c1 * c2);
            }
        }
        Ok(r)
    }

    pub fn neg(&self) -> Self {
        TruncatedSeries {
            nvars: self.nvars,
            trunc: self.trunc,
            coeffs: self
                .coeffs
                .iter()
                .map(|(e, c)| (e.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, k: &GaussianRational) -> Self {
        if k.is_zero() {
            return Self::zero(self.nvars, self.trunc);
        }
        TruncatedSeries {
            nvars: self.nvars,
            trunc: self.trunc,
            coeffs: self.coeffs.iter().map(|(e, c)| (e.clone(), c * k)).collect(),
        }
    }

    /// Multiplies by the monomial x^e.
    pub fn shift(&self, e: &[u32]) -> Self {
        let mut r = Self::zero(self.nvars, self.trunc);
        for (e1, c) in &self.coeffs {
            let s: Exponent = e1.iter().zip(e).map(|(a, b)| a + b).collect();
            r.add_term(s, c.clone());
        }
        r
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut r = Self::one(self.nvars, self.trunc);
        for _ in 0..k {
            r = &r * self;
        }
        r
    }

    /// Exact quotient by the monomial c·x^e when every term is divisible by it.
    pub fn div_monomial(&self, e: &[u32], c: &GaussianRational) -> Option<Self> {
        let ci = c.inv()?;
        let mut r = Self::zero(self.nvars, self.trunc);
        for (e1, c1) in &self.coeffs {
            if e1.iter().zip(e).any(|(a, b)| a < b) {
                return None;
            }
            let q: Exponent = e1.iter().zip(e).map(|(a, b)| a - b).collect();
            r.coeffs.insert(q, c1 * &ci);
        }
        Some(r)
    }

    /// Whether the series lies in ℤ\[i\]\[x\].
    pub fn has_integral_coeffs(&self) -> bool {
        self.coeffs.values().all(|c| c.is_gaussian_integer())
    }

    /// Evaluates a univariate series at t = v.
    pub fn eval_univariate(&self, v: &GaussianRational) -> GaussianRational {
        let mut acc = GaussianRational::zero();
        for (e, c) in &self.coeffs {
            let mut p = GaussianRational::one();
            for _ in 0..e[0] {
                p = &p * v;
            }
            acc = &acc + &(c * &p);
        }
        acc
    }
}

impl<'a> Add<&'a TruncatedSeries> for &'a TruncatedSeries {
    type Output = TruncatedSeries;
    /// Panics on shape mismatch; use `try_add` to recover.
    fn add(self, o: &TruncatedSeries) -> TruncatedSeries {
        self.try_add(o).expect("series shape mismatch")
    }
}

impl<'a> Sub<&'a TruncatedSeries> for &'a TruncatedSeries {
    type Output = TruncatedSeries;
    fn sub(self, o: &TruncatedSeries) -> TruncatedSeries {
        self.try_sub(o).expect("series shape mismatch")
    }
}

impl<'a> Mul<&'a TruncatedSeries> for &'a TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, o: &TruncatedSeries) -> TruncatedSeries {
        self.try_mul(o).expect("series shape mismatch")
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        const NAMES: [&str; 4] = ["x", "y", "z", "w"];
        let mut first = true;
        for (e, c) in self.coeffs.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| {
                    let v = NAMES.get(i).map(|s| s.to_string()).unwrap_or(format!("x{i}"));
                    if k == 1 {
                        v
                    } else {
                        format!("{v}^{k}")
                    }
                })
                .collect();
            if mono.is_empty() {
                write!(f, "{c}")?;
            } else if c.is_one() {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{c}*{}", mono.join("*"))?;
            }
        }
        Ok(())
    }
}

pub fn series_make(
    nvars: usize,
    trunc: u32,
    terms: Vec<(Exponent, GaussianRational)>,
) -> Result<TruncatedSeries, SeriesError> {
    let mut s = TruncatedSeries::zero(nvars, trunc);
    for (e, c) in terms {
        if e.len() != nvars {
            return Err(SeriesError::ArityError {
                expected: nvars,
                got: e.len(),
            });
        }
        s.add_term(e, c);
    }
    Ok(s)
}

pub fn series_mul(a: &TruncatedSeries, b: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
    a.try_mul(b)
}

/// Inverse of a unit, summed as a geometric series.
pub fn invert_unit(a: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
    let c0 = a.constant_term();
    let c0_inv = c0.inv().ok_or(SeriesError::NotAUnit)?;
    // a = c0·(1 − u) with u in the maximal ideal; 1/a = c0⁻¹·Σ u^k
    let one = TruncatedSeries::one(a.nvars, a.trunc);
    let u = &one - &a.scale(&c0_inv);
    let mut sum = one.clone();
    let mut p = one;
    for _ in 1..a.trunc.max(1) {
        p = &p * &u;
        if p.is_zero() {
            break;
        }
        sum = &sum + &p;
    }
    Ok(sum.scale(&c0_inv))
}

/// A parametrized branch t ↦ (x_0(t), …) of a minimal prime.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveParam {
    pub substitutions: Vec<TruncatedSeries>,
    pub label: String,
}

impl CurveParam {
    pub fn new(label: &str, substitutions: Vec<TruncatedSeries>) -> Self {
        CurveParam {
            substitutions,
            label: label.to_string(),
        }
    }

    /// Builds a curve from monomial substitutions c·t^k, one per variable.
    pub fn from_monomials(label: &str, trunc: u32, subs: &[(GaussianRational, u32)]) -> Self {
        let substitutions = subs
            .iter()
            .map(|(c, k)| TruncatedSeries::monomial(1, trunc, vec![*k], c.clone()))
            .collect();
        CurveParam::new(label, substitutions)
    }

    pub fn arity(&self) -> usize {
        self.substitutions.len()
    }
}

pub fn substitute(a: &TruncatedSeries, curve: &CurveParam) -> Result<TruncatedSeries, SeriesError> {
    if curve.arity() != a.nvars {
        return Err(SeriesError::ArityError {
            expected: a.nvars,
            got: curve.arity(),
        });
    }
    let trunc = curve.substitutions.first().map(|s| s.trunc).unwrap_or(a.trunc);
    let mut powers: Vec<Vec<TruncatedSeries>> = curve
        .substitutions
        .iter()
        .map(|s| vec![TruncatedSeries::one(1, trunc), s.retrunc(trunc)])
        .collect();
    let mut out = TruncatedSeries::zero(1, trunc);
    for (e, c) in &a.coeffs {
        let mut term = TruncatedSeries::constant(1, trunc, c.clone());
        for (v, &k) in e.iter().enumerate() {
            while powers[v].len() <= k as usize {
                let next = &powers[v][powers[v].len() - 1] * &powers[v][1];
                powers[v].push(next);
            }
            term = &term * &powers[v][k as usize];
            if term.is_zero() {
                break;
            }
        }
        out = &out + &term;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(re: i64, im: i64) -> GaussianRational {
        GaussianRational::from_ints(re, im)
    }

    fn xy(trunc: u32) -> (TruncatedSeries, TruncatedSeries) {
        (TruncatedSeries::var(2, trunc, 0), TruncatedSeries::var(2, trunc, 1))
    }

    #[test]
    fn i_squared_is_minus_one() {
        assert_eq!(&GaussianRational::i() * &GaussianRational::i(), g(-1, 0));
    }

    #[test]
    fn make_constant_one() {
        let s = series_make(2, 8, vec![(vec![0, 0], g(1, 0))]).unwrap();
        assert_eq!(s, TruncatedSeries::one(2, 8));
    }

    #[test]
    fn make_e6_polynomial() {
        let s = series_make(2, 8, vec![(vec![3, 0], g(1, 0)), (vec![0, 4], g(1, 0))]).unwrap();
        let (x, y) = xy(8);
        assert_eq!(s, &x.pow(3) + &y.pow(4));
        assert_eq!(s.num_terms(), 2);
    }

    #[test]
    fn make_discards_high_degree() {
        let s = series_make(2, 2, vec![(vec![3, 0], g(1, 0))]).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn make_arity_error() {
        let e = series_make(2, 4, vec![(vec![1], g(1, 0))]).unwrap_err();
        assert_eq!(e, SeriesError::ArityError { expected: 2, got: 1 });
    }

    #[test]
    fn difference_of_squares() {
        let (x, y) = xy(8);
        let iy = y.scale(&GaussianRational::i());
        let p = series_mul(&(&x + &iy), &(&x - &iy)).unwrap();
        assert_eq!(p, &x.pow(2) + &y.pow(2));
    }

    #[test]
    fn product_truncates() {
        let (x, y) = xy(2);
        assert!(series_mul(&x, &y).unwrap().is_zero());
    }

    #[test]
    fn shape_mismatch() {
        let a = TruncatedSeries::one(2, 4);
        let b = TruncatedSeries::one(2, 5);
        assert!(matches!(series_mul(&a, &b), Err(SeriesError::ShapeError(..))));
    }

    #[test]
    fn geometric_series() {
        let x = TruncatedSeries::var(1, 6, 0);
        let a = &TruncatedSeries::one(1, 6) + &x;
        let r = invert_unit(&a).unwrap();
        for k in 0..6u32 {
            let sign = if k % 2 == 0 { 1 } else { -1 };
            assert_eq!(r.coeff(&[k]), g(sign, 0));
        }
    }

    #[test]
    fn invert_constant() {
        let two = TruncatedSeries::constant(2, 5, g(2, 0));
        let r = invert_unit(&two).unwrap();
        assert_eq!(r, TruncatedSeries::constant(2, 5, GaussianRational::from_ratio(1, 2)));
    }

    #[test]
    fn invert_non_unit() {
        let (x, _) = xy(5);
        assert_eq!(invert_unit(&x), Err(SeriesError::NotAUnit));
    }

    #[test]
    fn substitute_kills_component() {
        // x²y + z² on the line x = t
        let t = 10;
        let x = TruncatedSeries::var(3, t, 0);
        let y = TruncatedSeries::var(3, t, 1);
        let z = TruncatedSeries::var(3, t, 2);
        let f = &(&x.pow(2) * &y) + &z.pow(2);
        let c = CurveParam::from_monomials("(y,z)", t, &[(g(1, 0), 1), (g(0, 0), 0), (g(0, 0), 0)]);
        assert!(substitute(&f, &c).unwrap().is_zero());
    }

    #[test]
    fn substitute_d_primes() {
        let (x, y) = xy(20);
        let p = CurveParam::from_monomials("p", 20, &[(g(1, 0), 1), (g(0, 0), 0)]);
        assert!(substitute(&y, &p).unwrap().is_zero());
        let l = 2;
        let a = &x - &y.pow(l + 1).scale(&GaussianRational::i());
        let q = CurveParam::from_monomials("q", 20, &[(g(0, 1), l + 1), (g(1, 0), 1)]);
        assert!(substitute(&a, &q).unwrap().is_zero());
    }

    #[test]
    fn substitute_arity() {
        let (x, _) = xy(4);
        let c = CurveParam::from_monomials("c", 4, &[(g(1, 0), 1)]);
        assert!(matches!(substitute(&x, &c), Err(SeriesError::ArityError { .. })));
    }

    fn arb_series(trunc: u32) -> impl Strategy<Value = TruncatedSeries> {
        prop::collection::vec(((0u32..5, 0u32..5), -3i64..4, -3i64..4), 0..6).prop_map(
            move |terms| {
                let terms = terms
                    .into_iter()
                    .map(|((a, b), re, im)| (vec![a, b], g(re, im)))
                    .collect();
                series_make(2, trunc, terms).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn ring_laws(a in arb_series(7), b in arb_series(7), c in arb_series(7)) {
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&TruncatedSeries::one(2, 7) * &a, a.clone());
        }

        #[test]
        fn inverse_round_trip(a in arb_series(7), re in 1i64..5, im in -2i64..3) {
            let u = &a.retrunc(7) + &TruncatedSeries::constant(2, 7, g(re, im));
            let u = if u.is_unit() { u } else { &u + &TruncatedSeries::one(2, 7) };
            let r = invert_unit(&u).unwrap();
            prop_assert_eq!(series_mul(&u, &r).unwrap(), TruncatedSeries::one(2, 7));
        }

        #[test]
        fn truncation_coherence(a in arb_series(9), b in arb_series(9)) {
            let hi = (&a * &b).retrunc(5);
            let lo = &a.retrunc(5) * &b.retrunc(5);
            prop_assert_eq!(hi, lo);
        }

        #[test]
        fn substitute_is_homomorphism(a in arb_series(30), b in arb_series(30), k in 1u32..3) {
            let c = CurveParam::from_monomials("c", 30, &[(g(0, 1), k), (g(2, 0), 1)]);
            let ab = substitute(&(&a * &b), &c).unwrap();
            let sa = substitute(&a, &c).unwrap();
            let sb = substitute(&b, &c).unwrap();
            prop_assert_eq!(ab, &sa * &sb);
        }
    }
}
