//! Prime-field arithmetic, the canonical ordering of `F_p^n`, and dense
//! tables of functions on it.
//!
//! Points of `F_p^n` are enumerated in little-endian radix-`p` order: the
//! point `x` sits at index `x_1 + x_2 p + ... + x_n p^(n-1)`, so the first
//! coordinate varies fastest. Every table in the crate (and every file format)
//! uses this order.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{checked_pow, Error, Result};

pub(crate) fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= p as u64 {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// `a^e mod p`.
pub(crate) fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * a % p;
        }
        a = a * a % p;
        e >>= 1;
    }
    acc
}

/// Multiplicative inverse of a nonzero element of `F_p`.
pub(crate) fn inv_mod(a: u32, p: u32) -> u32 {
    debug_assert!(a % p != 0);
    pow_mod(a as u64, p as u64 - 2, p as u64) as u32
}

/// The prime `p` and dimension `n` of the domain `F_p^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct FieldParams {
    p: u32,
    n: usize,
    size: usize,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    p: u32,
    n: usize,
}

impl TryFrom<RawParams> for FieldParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        FieldParams::new(raw.p, raw.n)
    }
}

impl From<FieldParams> for RawParams {
    fn from(f: FieldParams) -> Self {
        RawParams { p: f.p, n: f.n }
    }
}

impl FieldParams {
    pub fn new(p: u32, n: usize) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let size = checked_pow(p as u128, n)
            .filter(|&s| s <= usize::MAX as u128)
            .ok_or(Error::DomainTooLarge { p, n })? as usize;
        Ok(FieldParams { p, n, size })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of points, `p^n`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Same prime, different dimension.
    pub fn with_dim(&self, n: usize) -> Result<Self> {
        FieldParams::new(self.p, n)
    }

    /// Canonical index of `x`.
    pub fn index_of(&self, x: &FieldVec) -> Result<usize> {
        if x.0.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.0.len(),
            });
        }
        let p = self.p as usize;
        Ok(x.0.iter().rev().fold(0usize, |acc, &c| acc * p + c as usize))
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn vector_at(&self, index: usize) -> FieldVec {
        let mut coords = vec![0u32; self.n];
        self.digits_into(index, &mut coords);
        FieldVec(coords)
    }

    pub(crate) fn digits_into(&self, mut index: usize, out: &mut [u32]) {
        let p = self.p as usize;
        for c in out.iter_mut() {
            *c = (index % p) as u32;
            index /= p;
        }
    }

    /// Index of `x + y` given the indices of `x` and `y`.
    pub fn add_indices(&self, a: usize, b: usize) -> usize {
        if self.p == 2 {
            return a ^ b;
        }
        let p = self.p as usize;
        let (mut a, mut b) = (a, b);
        let mut out = 0usize;
        let mut place = 1usize;
        for _ in 0..self.n {
            let d = (a % p + b % p) % p;
            out += d * place;
            place *= p;
            a /= p;
            b /= p;
        }
        out
    }

    /// Index of `c * x` given the index of `x`.
    pub fn scale_index(&self, c: u32, a: usize) -> usize {
        let c = (c % self.p) as usize;
        if c == 1 {
            return a;
        }
        let p = self.p as usize;
        let mut a = a;
        let mut out = 0usize;
        let mut place = 1usize;
        for _ in 0..self.n {
            out += (a % p * c % p) * place;
            place *= p;
            a /= p;
        }
        out
    }

    /// Index of `-x` given the index of `x`.
    pub fn neg_index(&self, a: usize) -> usize {
        self.scale_index(self.p - 1, a)
    }

    /// Componentwise `x + y`.
    pub fn add(&self, x: &FieldVec, y: &FieldVec) -> FieldVec {
        FieldVec(
            x.0.iter()
                .zip(&y.0)
                .map(|(&a, &b)| (a + b) % self.p)
                .collect(),
        )
    }

    /// Componentwise `c * x`.
    pub fn scale(&self, c: u32, x: &FieldVec) -> FieldVec {
        let p = self.p as u64;
        FieldVec(
            x.0.iter()
                .map(|&a| ((c as u64 % p) * a as u64 % p) as u32)
                .collect(),
        )
    }

    pub fn zero(&self) -> FieldVec {
        FieldVec(vec![0; self.n])
    }
}

/// Free-function form of [`FieldParams::index_of`].
pub fn canonical_index(x: &FieldVec, params: &FieldParams) -> Result<usize> {
    params.index_of(x)
}

/// A point of `F_p^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldVec(Vec<u32>);

impl FieldVec {
    /// Builds a point, reducing every coordinate mod `p`.
    pub fn new(coords: Vec<u32>, params: &FieldParams) -> Result<Self> {
        if coords.len() != params.n() {
            return Err(Error::DimensionMismatch {
                expected: params.n(),
                found: coords.len(),
            });
        }
        Ok(FieldVec(coords.into_iter().map(|c| c % params.p()).collect()))
    }

    pub fn coords(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `e^{2 pi i a / p}`.
pub fn e_p(a: u32, p: u32) -> Complex64 {
    let theta = 2.0 * std::f64::consts::PI * (a % p) as f64 / p as f64;
    Complex64::from_polar(1.0, theta)
}

/// Lookup table of the `p`-th roots of unity `e_p(0), ..., e_p(p-1)`.
#[derive(Debug, Clone)]
pub struct Characters {
    roots: Vec<Complex64>,
}

impl Characters {
    pub fn new(p: u32) -> Self {
        let roots = (0..p)
            .map(|a| match (a, p) {
                (0, _) => Complex64::new(1.0, 0.0),
                (1, 2) => Complex64::new(-1.0, 0.0),
                _ => e_p(a, p),
            })
            .collect();
        Characters { roots }
    }

    #[inline]
    pub fn get(&self, a: u32) -> Complex64 {
        self.roots[a as usize]
    }
}

/// A function `F_p^n -> [R]` stored densely in canonical order.
///
/// Labels are 1-based at every interface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionTable {
    params: FieldParams,
    range: u32,
    values: Vec<u32>,
}

impl FunctionTable {
    pub fn new(params: FieldParams, range: u32, values: Vec<u32>) -> Result<Self> {
        if range < 1 {
            return Err(Error::InvalidArgument("range size R must be at least 1".into()));
        }
        if values.len() != params.size() {
            return Err(Error::DimensionMismatch {
                expected: params.size(),
                found: values.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|&&v| v < 1 || v > range) {
            return Err(Error::LabelOutOfRange { label: bad, range });
        }
        Ok(FunctionTable {
            params,
            range,
            values,
        })
    }

    /// Tabulates `f` over the whole domain.
    pub fn from_fn(params: FieldParams, range: u32, mut f: impl FnMut(&FieldVec) -> u32) -> Result<Self> {
        let values = (0..params.size()).map(|i| f(&params.vector_at(i))).collect();
        FunctionTable::new(params, range, values)
    }

    pub fn constant(params: FieldParams, range: u32, label: u32) -> Result<Self> {
        FunctionTable::new(params, range, vec![label; params.size()])
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    #[inline]
    pub fn label(&self, index: usize) -> u32 {
        self.values[index]
    }

    pub fn label_at(&self, x: &FieldVec) -> Result<u32> {
        Ok(self.values[self.params.index_of(x)?])
    }

    /// The `{0,1}` indicator of `f^{-1}(label)`.
    pub fn indicator(&self, label: u32) -> RealTable {
        RealTable {
            params: self.params,
            values: self
                .values
                .iter()
                .map(|&v| if v == label { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    /// All `R` indicator slices, label 1 first.
    pub fn slices(&self) -> Vec<RealTable> {
        (1..=self.range).map(|l| self.indicator(l)).collect()
    }

    /// Labels cast to reals.
    pub fn to_real(&self) -> RealTable {
        RealTable {
            params: self.params,
            values: self.values.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Sorted set of labels the function attains.
    pub fn attained_labels(&self) -> Vec<u32> {
        let mut seen = vec![false; self.range as usize + 1];
        for &v in &self.values {
            seen[v as usize] = true;
        }
        (1..=self.range).filter(|&l| seen[l as usize]).collect()
    }
}

/// A real-valued function on `F_p^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealTable {
    params: FieldParams,
    values: Vec<f64>,
}

impl RealTable {
    pub fn new(params: FieldParams, values: Vec<f64>) -> Result<Self> {
        if values.len() != params.size() {
            return Err(Error::DimensionMismatch {
                expected: params.size(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("real table entries must be finite".into()));
        }
        Ok(RealTable { params, values })
    }

    pub fn from_fn(params: FieldParams, mut f: impl FnMut(&FieldVec) -> f64) -> Result<Self> {
        let values = (0..params.size()).map(|i| f(&params.vector_at(i))).collect();
        RealTable::new(params, values)
    }

    pub fn zeros(params: FieldParams) -> Self {
        RealTable {
            params,
            values: vec![0.0; params.size()],
        }
    }

    pub fn constant(params: FieldParams, c: f64) -> Self {
        RealTable {
            params,
            values: vec![c; params.size()],
        }
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `||f||_2 = sqrt(E f^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn zip_with(&self, other: &RealTable, op: impl Fn(f64, f64) -> f64) -> Result<RealTable> {
        if self.params != other.params {
            return Err(Error::ShapeMismatch("real tables over different domains".into()));
        }
        Ok(RealTable {
            params: self.params,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &RealTable) -> Result<RealTable> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RealTable) -> Result<RealTable> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `max_x |f(x) - g(x)|`.
    pub fn max_abs_diff(&self, other: &RealTable) -> Result<f64> {
        Ok(self.zip_with(other, |a, b| (a - b).abs())?.max().max(0.0))
    }
}

/// Fraction of points where `f` and `g` disagree.
pub fn distance(f: &FunctionTable, g: &FunctionTable) -> Result<f64> {
    Ok(disagreements(f, g)? as f64 / f.params.size() as f64)
}

/// Number of points where `f` and `g` disagree.
pub fn disagreements(f: &FunctionTable, g: &FunctionTable) -> Result<usize> {
    if f.params != g.params || f.range != g.range {
        return Err(Error::ShapeMismatch(format!(
            "tables over F_{}^{} / R={} and F_{}^{} / R={}",
            f.params.p(),
            f.params.n(),
            f.range,
            g.params.p(),
            g.params.n(),
            g.range
        )));
    }
    Ok(f.values.iter().zip(&g.values).filter(|(a, b)| a != b).count())
}

/// The parametrized affine span `{x_1 + sum_{j>=2} c_j x_j}` of a list of
/// points, addressed by the coefficient vector `(c_2, ..., c_l)`.
#[derive(Debug, Clone)]
pub struct AffineSpan {
    outer: FieldParams,
    inner: FieldParams,
    base: usize,
    directions: Vec<usize>,
}

impl AffineSpan {
    pub fn new(params: &FieldParams, points: &[FieldVec]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("affine span of zero points".into()));
        }
        let idx = points
            .iter()
            .map(|x| params.index_of(x))
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(params, &idx)
    }

    pub fn from_indices(params: &FieldParams, points: &[usize]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("affine span of zero points".into()));
        }
        Ok(AffineSpan {
            outer: *params,
            inner: params.with_dim(points.len() - 1)?,
            base: points[0],
            directions: points[1..].to_vec(),
        })
    }

    /// Parameter space `F_p^{l-1}`.
    pub fn inner(&self) -> &FieldParams {
        &self.inner
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn directions(&self) -> &[usize] {
        &self.directions
    }

    /// Domain index of `sum_j c_j x_{j+1}` (the linear part, no base point).
    pub fn linear_point(&self, c_index: usize) -> usize {
        let mut digits = vec![0u32; self.inner.n()];
        self.inner.digits_into(c_index, &mut digits);
        digits
            .iter()
            .zip(&self.directions)
            .filter(|(&c, _)| c != 0)
            .fold(0usize, |acc, (&c, &d)| {
                self.outer.add_indices(acc, self.outer.scale_index(c, d))
            })
    }

    /// Domain index of `x_1 + sum_j c_j x_{j+1}`.
    pub fn point(&self, c_index: usize) -> usize {
        self.outer.add_indices(self.base, self.linear_point(c_index))
    }

    pub fn points(&self) -> Vec<usize> {
        (0..self.inner.size()).map(|c| self.point(c)).collect()
    }
}

/// Restriction of `f` to the affine span of `points`, as a table over
/// `F_p^{l-1}`.
pub fn restrict_to_affine_span(f: &FunctionTable, points: &[FieldVec]) -> Result<FunctionTable> {
    let span = AffineSpan::new(f.params(), points)?;
    Ok(restrict_to_span(f, &span))
}

pub(crate) fn restrict_to_span(f: &FunctionTable, span: &AffineSpan) -> FunctionTable {
    let values = (0..span.inner().size()).map(|c| f.label(span.point(c))).collect();
    FunctionTable {
        params: *span.inner(),
        range: f.range,
        values,
    }
}
