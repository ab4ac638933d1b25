//! Polynomials over `F_p^n`, polynomial factors and the partition of the
//! domain into cells.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_budget, Error, Result};
use crate::field::{Characters, FieldParams, FieldVec, FunctionTable, RealTable};
use crate::forms::{consistency_check, mixed_dimension, AffineConstraint, CellImage};
use crate::{par, DEFAULT_ENUMERATION_BUDGET};

/// Largest number of cells a factor may have, `p^C`.
pub const MAX_CELLS: u128 = 1 << 24;

/// Reduces an exponent with `x^p = x`.
fn reduce_exponent(e: u32, p: u32) -> u32 {
    if e == 0 {
        0
    } else {
        (e - 1) % (p - 1) + 1
    }
}

/// A polynomial function `F_p^n -> F_p` in reduced form: every exponent is at
/// most `p - 1` and only nonzero coefficients are stored.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPolynomial", into = "RawPolynomial")]
pub struct Polynomial {
    p: u32,
    n: usize,
    terms: BTreeMap<Vec<u32>, u32>,
}

#[derive(Serialize, Deserialize)]
struct RawPolynomial {
    p: u32,
    n: usize,
    terms: Vec<(u32, Vec<u32>)>,
}

impl TryFrom<RawPolynomial> for Polynomial {
    type Error = Error;
    fn try_from(raw: RawPolynomial) -> Result<Self> {
        Polynomial::from_terms(raw.p, raw.n, raw.terms)
    }
}

impl From<Polynomial> for RawPolynomial {
    fn from(q: Polynomial) -> Self {
        RawPolynomial {
            p: q.p,
            n: q.n,
            terms: q.terms.into_iter().map(|(e, c)| (c, e)).collect(),
        }
    }
}

impl Polynomial {
    pub fn zero(p: u32, n: usize) -> Self {
        Polynomial {
            p,
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(p: u32, n: usize, c: u32) -> Self {
        let mut q = Polynomial::zero(p, n);
        q.add_term(vec![0; n], c);
        q
    }

    /// `sum_i coeffs[i] x_{i+1}`.
    pub fn linear(p: u32, coeffs: &[u32]) -> Self {
        let n = coeffs.len();
        let mut q = Polynomial::zero(p, n);
        for (i, &c) in coeffs.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            q.add_term(e, c);
        }
        q
    }

    /// The monomial `x_{v_1} x_{v_2} ...` for 0-based variable indices.
    pub fn product(p: u32, n: usize, vars: &[usize]) -> Result<Self> {
        let mut e = vec![0u32; n];
        for &v in vars {
            if v >= n {
                return Err(Error::DimensionMismatch { expected: n, found: v + 1 });
            }
            e[v] += 1;
        }
        Polynomial::from_terms(p, n, [(1, e)])
    }

    /// Builds a polynomial from `(coefficient, exponents)` pairs, reducing and
    /// merging like terms.
    pub fn from_terms(p: u32, n: usize, terms: impl IntoIterator<Item = (u32, Vec<u32>)>) -> Result<Self> {
        if !crate::field::is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let mut q = Polynomial::zero(p, n);
        for (c, e) in terms {
            if e.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: e.len(),
                });
            }
            q.add_term(e, c);
        }
        Ok(q)
    }

    fn add_term(&mut self, e: Vec<u32>, c: u32) {
        let c = c % self.p;
        if c == 0 {
            return;
        }
        let e: Vec<u32> = e.into_iter().map(|x| reduce_exponent(x, self.p)).collect();
        let slot = self.terms.entry(e.clone()).or_insert(0);
        *slot = (*slot + c) % self.p;
        if *slot == 0 {
            self.terms.remove(&e);
        }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum total degree; 0 for constants and the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// `(exponents, coefficient)` pairs in exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], u32)> {
        self.terms.iter().map(|(e, &c)| (e.as_slice(), c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut q = self.clone();
        for (e, &c) in &other.terms {
            q.add_term(e.clone(), c);
        }
        Ok(q)
    }

    pub fn scale(&self, c: u32) -> Polynomial {
        let mut q = Polynomial::zero(self.p, self.n);
        for (e, &v) in &self.terms {
            q.add_term(e.clone(), (v as u64 * c as u64 % self.p as u64) as u32);
        }
        q
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut q = Polynomial::zero(self.p, self.n);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                q.add_term(e, (ca as u64 * cb as u64 % self.p as u64) as u32);
            }
        }
        Ok(q)
    }

    fn check_same(&self, other: &Polynomial) -> Result<()> {
        if self.p != other.p || self.n != other.n {
            return Err(Error::ShapeMismatch(format!(
                "polynomials over F_{}^{} and F_{}^{}",
                self.p, self.n, other.p, other.n
            )));
        }
        Ok(())
    }

    /// Value at a point.
    pub fn eval(&self, x: &FieldVec) -> u32 {
        let p = self.p as u64;
        self.terms
            .iter()
            .fold(0u64, |acc, (e, &c)| {
                let m = e
                    .iter()
                    .zip(x.coords())
                    .fold(c as u64, |m, (&k, &xi)| m * crate::field::pow_mod(xi as u64, k as u64, p) % p);
                (acc + m) % p
            }) as u32
    }

    /// Values at every point of `F_p^n` in canonical order.
    pub fn values(&self, params: &FieldParams) -> Result<Vec<u32>> {
        if params.p() != self.p || params.n() != self.n {
            return Err(Error::ShapeMismatch("polynomial and domain disagree".into()));
        }
        let p = self.p as usize;
        // pow[a * p + k] = a^k
        let pow: Vec<u32> = (0..p * p)
            .map(|i| crate::field::pow_mod((i / p) as u64, (i % p) as u64, p as u64) as u32)
            .collect();
        let terms: Vec<(&[u32], u32)> = self.terms().collect();
        let size = params.size();
        let out = par::map_chunks(size, par::CHUNK, |range| {
            let mut digits = vec![0u32; self.n];
            params.digits_into(range.start, &mut digits);
            let mut out = Vec::with_capacity(range.len());
            for _ in range {
                let v = terms.iter().fold(0usize, |acc, (e, c)| {
                    let m = e.iter().zip(&digits).fold(*c as usize, |m, (&k, &x)| {
                        if k == 0 {
                            m
                        } else {
                            m * pow[x as usize * p + k as usize] as usize % p
                        }
                    });
                    (acc + m) % p
                });
                out.push(v as u32);
                for d in digits.iter_mut() {
                    *d += 1;
                    if (*d as usize) < p {
                        break;
                    }
                    *d = 0;
                }
            }
            out
        });
        Ok(out.concat())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial(F_{}^{}: {})", self.p, self.n, self)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // Highest degree first, then the stored exponent order.
        let mut terms: Vec<(&Vec<u32>, &u32)> = self.terms.iter().collect();
        terms.sort_by(|(a, _), (b, _)| b.iter().sum::<u32>().cmp(&a.iter().sum::<u32>()).then(b.cmp(a)));
        for (k, (e, &c)) in terms.into_iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            let vars: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &x)| x > 0)
                .map(|(i, &x)| if x == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, x) })
                .collect();
            match (c, vars.is_empty()) {
                (_, true) => write!(f, "{c}")?,
                (1, false) => write!(f, "{}", vars.join("*"))?,
                _ => write!(f, "{c}*{}", vars.join("*"))?,
            }
        }
        Ok(())
    }
}

/// Exponent vectors of total degree `1..=d` with entries at most `p - 1`,
/// ordered by degree and then lexicographically descending, so that `x_1`
/// comes before `x_2`.
pub fn monomials(p: u32, n: usize, d: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for deg in 1..=d {
        let mut level = Vec::new();
        let mut e = vec![0u32; n];
        fn go(k: usize, left: u32, p: u32, e: &mut Vec<u32>, level: &mut Vec<Vec<u32>>) {
            if k == e.len() {
                if left == 0 {
                    level.push(e.clone());
                }
                return;
            }
            for v in (0..=left.min(p - 1)).rev() {
                e[k] = v;
                go(k + 1, left - v, p, e, level);
            }
            e[k] = 0;
        }
        go(0, deg, p, &mut e, &mut level);
        out.extend(level);
    }
    out
}

/// Image of a point under a factor, an element of `F_p^C`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId(pub Vec<u32>);

impl CellId {
    /// Little-endian index in `[0, p^C)`.
    pub fn index(&self, p: u32) -> usize {
        self.0.iter().rev().fold(0usize, |acc, &c| acc * p as usize + c as usize)
    }

    pub fn from_index(mut index: usize, p: u32, c: usize) -> Self {
        let mut v = vec![0u32; c];
        for x in v.iter_mut() {
            *x = (index % p as usize) as u32;
            index /= p as usize;
        }
        CellId(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// An ordered list of polynomials sharing a domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolynomialFactor {
    params: FieldParams,
    polys: Vec<Polynomial>,
}

impl PolynomialFactor {
    pub fn new(params: FieldParams, polys: Vec<Polynomial>) -> Result<Self> {
        if let Some(bad) = polys.iter().find(|q| q.p() != params.p() || q.n() != params.n()) {
            return Err(Error::ShapeMismatch(format!(
                "polynomial over F_{}^{} in a factor over F_{}^{}",
                bad.p(),
                bad.n(),
                params.p(),
                params.n()
            )));
        }
        Ok(PolynomialFactor { params, polys })
    }

    /// The factor with no polynomials and a single cell.
    pub fn trivial(params: FieldParams) -> Self {
        PolynomialFactor {
            params,
            polys: Vec::new(),
        }
    }

    /// Factor of the linear polynomials with the given coefficient rows.
    pub fn linear(params: FieldParams, rows: &[Vec<u32>]) -> Result<Self> {
        PolynomialFactor::new(params, rows.iter().map(|r| Polynomial::linear(params.p(), r)).collect())
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    /// Complexity `C`.
    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.polys.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    /// Per-polynomial degrees, constants counted as degree 1.
    pub fn degrees(&self) -> Vec<usize> {
        self.polys.iter().map(|q| q.degree().max(1) as usize).collect()
    }

    pub fn push(&mut self, q: Polynomial) -> Result<()> {
        if q.p() != self.params.p() || q.n() != self.params.n() {
            return Err(Error::ShapeMismatch("polynomial over a different domain".into()));
        }
        self.polys.push(q);
        Ok(())
    }

    pub fn with(&self, q: Polynomial) -> Result<Self> {
        let mut b = self.clone();
        b.push(q)?;
        Ok(b)
    }

    /// Whether `self` starts with the polynomials of `base`.
    pub fn extends(&self, base: &PolynomialFactor) -> bool {
        self.params == base.params && self.polys.len() >= base.polys.len() && self.polys[..base.polys.len()] == base.polys[..]
    }

    /// Number of cells `p^C`, within [`MAX_CELLS`].
    pub fn num_cells(&self) -> Result<usize> {
        Ok(ensure_budget("cell count", self.params.p() as u128, self.len(), MAX_CELLS)? as usize)
    }

    pub fn eval(&self, x: &FieldVec) -> CellId {
        CellId(self.polys.iter().map(|q| q.eval(x)).collect())
    }
}

/// Evaluates the factor at `x`.
pub fn eval_factor(b: &PolynomialFactor, x: &FieldVec) -> CellId {
    b.eval(x)
}

/// The partition of the domain induced by a factor: the cell index of every
/// point and the size of every cell.
#[derive(Debug, Clone)]
pub struct CellPartition {
    p: u32,
    c: usize,
    cell_of: Vec<usize>,
    counts: Vec<u64>,
}

impl CellPartition {
    pub fn new(b: &PolynomialFactor) -> Result<Self> {
        Self::with_budget(b, DEFAULT_ENUMERATION_BUDGET)
    }

    pub fn with_budget(b: &PolynomialFactor, budget: u128) -> Result<Self> {
        let params = b.params();
        if params.size() as u128 > budget {
            return Err(Error::budget("cell partition", params.size() as u128, budget));
        }
        let ncells = b.num_cells()?;
        let p = params.p() as usize;
        let mut cell_of = vec![0usize; params.size()];
        let mut place = 1usize;
        for q in b.polys() {
            let vals = q.values(params)?;
            for (c, v) in cell_of.iter_mut().zip(vals) {
                *c += v as usize * place;
            }
            place *= p;
        }
        let mut counts = vec![0u64; ncells];
        for &c in &cell_of {
            counts[c] += 1;
        }
        Ok(CellPartition {
            p: params.p(),
            c: b.len(),
            cell_of,
            counts,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Complexity of the factor.
    pub fn width(&self) -> usize {
        self.c
    }

    pub fn num_cells(&self) -> usize {
        self.counts.len()
    }

    /// Cell index of every point.
    pub fn cell_of(&self) -> &[usize] {
        &self.cell_of
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn num_nonempty(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Per-cell sums of `values`.
    pub fn cell_sums(&self, values: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.counts.len()];
        for (&c, &v) in self.cell_of.iter().zip(values) {
            sums[c] += v;
        }
        sums
    }

    /// Per-cell means; `NaN` on empty cells.
    pub fn cell_means(&self, values: &[f64]) -> Vec<f64> {
        self.cell_sums(values)
            .into_iter()
            .zip(&self.counts)
            .map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
            .collect()
    }

    /// `E[f|B]` as a table.
    pub fn conditional_expectation(&self, f: &RealTable) -> RealTable {
        let means = self.cell_means(f.values());
        let values = self.cell_of.iter().map(|&c| means[c]).collect();
        RealTable::new(*f.params(), values).expect("cell means of a finite table are finite")
    }
}

/// Exact cell sizes, indexed by the little-endian cell index.
pub fn cell_histogram(b: &PolynomialFactor) -> Result<Vec<u64>> {
    Ok(CellPartition::new(b)?.counts)
}

/// `E[f|B]`.
pub fn conditional_expectation(f: &RealTable, b: &PolynomialFactor) -> Result<RealTable> {
    if f.params() != b.params() {
        return Err(Error::ShapeMismatch("table and factor over different domains".into()));
    }
    Ok(CellPartition::new(b)?.conditional_expectation(f))
}

/// `sum_i E[(E[f_i|B])^2]`.
pub fn density_index(fs: &[RealTable], b: &PolynomialFactor) -> Result<f64> {
    let part = CellPartition::new(b)?;
    Ok(density_index_on(fs, &part))
}

pub(crate) fn density_index_on(fs: &[RealTable], part: &CellPartition) -> f64 {
    let size: u64 = part.counts.iter().sum();
    fs.iter()
        .map(|f| {
            let sums = part.cell_sums(f.values());
            sums.iter()
                .zip(&part.counts)
                .filter(|(_, &c)| c > 0)
                .map(|(s, &c)| s * s / c as f64)
                .sum::<f64>()
                / size as f64
        })
        .sum()
}

/// Counts of defining polynomials by exact degree; entry `k` is `i_k`.
/// Trailing zeros are trimmed so equality matches the order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DegreeIndex(Vec<usize>);

impl DegreeIndex {
    pub fn of(b: &PolynomialFactor) -> Self {
        let mut v = vec![0usize; b.degree() as usize + 1];
        for q in b.polys() {
            v[q.degree() as usize] += 1;
        }
        Self::from_counts(v)
    }

    pub fn from_counts(mut counts: Vec<usize>) -> Self {
        while counts.last() == Some(&0) {
            counts.pop();
        }
        DegreeIndex(counts)
    }

    /// `i_k`.
    pub fn get(&self, k: usize) -> usize {
        self.0.get(k).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }
}

impl Ord for DegreeIndex {
    /// Anti-lexicographic: the largest degree at which the counts differ decides.
    fn cmp(&self, other: &Self) -> Ordering {
        let top = self.0.len().max(other.0.len());
        for k in (0..top).rev() {
            match self.get(k).cmp(&other.get(k)) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for DegreeIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `DegreeIndex::of`, as a free function.
pub fn degree_index(b: &PolynomialFactor) -> DegreeIndex {
    DegreeIndex::of(b)
}

/// Exact `|E_x e_p(P(x))|`.
pub fn polynomial_bias(q: &Polynomial) -> Result<f64> {
    let params = FieldParams::new(q.p(), q.n())?;
    if params.size() as u128 > DEFAULT_ENUMERATION_BUDGET {
        return Err(Error::budget("polynomial bias", params.size() as u128, DEFAULT_ENUMERATION_BUDGET));
    }
    let vals = q.values(&params)?;
    Ok(phase_bias(&vals, q.p()))
}

fn phase_bias(vals: &[u32], p: u32) -> f64 {
    if p == 2 {
        let ones = vals.iter().filter(|&&v| v == 1).count() as f64;
        let n = vals.len() as f64;
        return ((n - 2.0 * ones) / n).abs();
    }
    let chars = Characters::new(p);
    let s: Complex64 = par::sum(vals.len(), |i| chars.get(vals[i]));
    s.norm() / vals.len() as f64
}

/// Operational rank surrogate: the largest bias of a nonzero combination of
/// the defining polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCertificate {
    pub max_bias: f64,
    pub checked_combinations: u64,
    pub exhaustive: bool,
}

/// Number of combinations checked when `p^C - 1` exceeds the budget.
pub const DEFAULT_BIAS_BUDGET: u128 = 1 << 12;

/// Max over nonzero `lambda` of `|E e_p(sum_i lambda_i P_i)|`; exhaustive when
/// `p^C - 1 <= budget`, otherwise over `budget` seeded random combinations.
pub fn bias_certificate(b: &PolynomialFactor, budget: u128, seed: u64) -> Result<BiasCertificate> {
    let params = b.params();
    let p = params.p();
    let c = b.len();
    if c == 0 {
        return Ok(BiasCertificate {
            max_bias: 0.0,
            checked_combinations: 0,
            exhaustive: true,
        });
    }
    let tables = b.polys().iter().map(|q| q.values(params)).collect::<Result<Vec<_>>>()?;
    let combos = crate::error::checked_pow(p as u128, c).map(|v| v - 1);
    let bias_of = |lambda: &[u32]| {
        let vals: Vec<u32> = (0..params.size())
            .map(|x| {
                tables
                    .iter()
                    .zip(lambda)
                    .fold(0u64, |acc, (t, &l)| (acc + l as u64 * t[x] as u64) % p as u64) as u32
            })
            .collect();
        phase_bias(&vals, p)
    };
    match combos {
        Some(total) if total <= budget => {
            let mut max_bias: f64 = 0.0;
            for code in 1..=total as usize {
                let lambda = CellId::from_index(code, p, c).0;
                max_bias = max_bias.max(bias_of(&lambda));
            }
            Ok(BiasCertificate {
                max_bias,
                checked_combinations: total as u64,
                exhaustive: true,
            })
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut max_bias: f64 = 0.0;
            for _ in 0..budget {
                let lambda: Vec<u32> = loop {
                    let l: Vec<u32> = (0..c).map(|_| rng.random_range(0..p)).collect();
                    if l.iter().any(|&v| v != 0) {
                        break l;
                    }
                };
                max_bias = max_bias.max(bias_of(&lambda));
            }
            Ok(BiasCertificate {
                max_bias,
                checked_combinations: budget as u64,
                exhaustive: false,
            })
        }
    }
}

/// Whether `B'(x) = B'(y)` implies `B(x) = B(y)` for all points.
pub fn is_semantic_refinement(refined: &PolynomialFactor, base: &PolynomialFactor) -> Result<bool> {
    if refined.params() != base.params() {
        return Err(Error::ShapeMismatch("factors over different domains".into()));
    }
    let fine = CellPartition::new(refined)?;
    let coarse = CellPartition::new(base)?;
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (&a, &b) in fine.cell_of().iter().zip(coarse.cell_of()) {
        if *seen.entry(a).or_insert(b) != b {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `B` followed by the polynomials of `B'` not already present.
pub fn common_refinement(b: &PolynomialFactor, other: &PolynomialFactor) -> Result<PolynomialFactor> {
    if b.params() != other.params() {
        return Err(Error::ShapeMismatch("factors over different domains".into()));
    }
    let mut out = b.clone();
    for q in other.polys() {
        if !out.polys.contains(q) {
            out.polys.push(q.clone());
        }
    }
    Ok(out)
}

/// Fraction of nonempty `B`-cells with more than a `zeta` fraction of their
/// nonempty subcells deviating by more than `zeta` in some label frequency.
pub fn representation_defect(f: &FunctionTable, refined: &PolynomialFactor, base: &PolynomialFactor, zeta: f64) -> Result<f64> {
    if !refined.extends(base) {
        return Err(Error::InvalidArgument("refined factor must extend the base factor".into()));
    }
    if f.params() != base.params() {
        return Err(Error::ShapeMismatch("table and factor over different domains".into()));
    }
    let fine = CellPartition::new(refined)?;
    let coarse = CellPartition::new(base)?;
    let nc = coarse.num_cells();
    let slices = f.slices();
    let coarse_means: Vec<Vec<f64>> = slices.iter().map(|s| coarse.cell_means(s.values())).collect();
    let fine_means: Vec<Vec<f64>> = slices.iter().map(|s| fine.cell_means(s.values())).collect();
    let mut bad_cells = 0usize;
    let mut nonempty = 0usize;
    for c in 0..nc {
        if coarse.counts()[c] == 0 {
            continue;
        }
        nonempty += 1;
        let (mut sub, mut deviating) = (0usize, 0usize);
        for s in 0..fine.num_cells() / nc {
            let cs = c + nc * s;
            if fine.counts()[cs] == 0 {
                continue;
            }
            sub += 1;
            if (0..slices.len()).any(|i| (coarse_means[i][c] - fine_means[i][cs]).abs() > zeta) {
                deviating += 1;
            }
        }
        if deviating as f64 > zeta * sub as f64 {
            bad_cells += 1;
        }
    }
    Ok(bad_cells as f64 / nonempty as f64)
}

/// Whether `B'` `zeta`-represents `B` with respect to every label of `f`.
pub fn represents(f: &FunctionTable, refined: &PolynomialFactor, base: &PolynomialFactor, zeta: f64) -> Result<bool> {
    Ok(representation_defect(f, refined, base, zeta)? <= zeta)
}

/// How [`pattern_probability`] computes its answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternMode {
    Predicted,
    Bruteforce,
}

/// The prediction for a pattern: zero when inconsistent, else `p^{-s}`
/// within `band`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternPrediction {
    pub consistent: bool,
    pub exponent: usize,
    pub probability: f64,
    /// `max_bias * p^{mC}` when a certificate was supplied.
    pub band: Option<f64>,
}

pub fn predict_pattern(
    b: &PolynomialFactor,
    constraint: &AffineConstraint,
    images: &CellImage,
    certificate: Option<&BiasCertificate>,
) -> Result<PatternPrediction> {
    let degrees = b.degrees();
    let consistent = consistency_check(constraint, &degrees, images)?;
    let exponent = mixed_dimension(constraint.forms(), &degrees, b.params().p())?;
    let p = b.params().p() as f64;
    let band = certificate.map(|c| c.max_bias * p.powi((constraint.m() * b.len()) as i32));
    Ok(PatternPrediction {
        consistent,
        exponent,
        probability: if consistent { p.powi(-(exponent as i32)) } else { 0.0 },
        band,
    })
}

/// Exact number of tuples `(x_1..x_l)` with `B(a_j(x)) = b_j` for all `j`,
/// and the number of tuples.
pub fn pattern_count(b: &PolynomialFactor, constraint: &AffineConstraint, images: &CellImage, budget: u128) -> Result<(u64, u64)> {
    let params = *b.params();
    if constraint.p() != params.p() {
        return Err(Error::ShapeMismatch("constraint and factor over different fields".into()));
    }
    if images.m() != constraint.m() || images.width() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            found: images.width(),
        });
    }
    let total = ensure_budget("pattern enumeration", params.size() as u128, constraint.ell(), budget)? as usize;
    let part = CellPartition::new(b)?;
    let p = params.p();
    let targets: Vec<usize> = images.images().iter().map(|v| CellId(v.clone()).index(p)).collect();
    let size = params.size();
    let ell = constraint.ell();
    let count: u64 = par::map_chunks(total, par::CHUNK, |range| {
        let mut xs = vec![0usize; ell];
        let mut hits = 0u64;
        for t in range {
            let mut rest = t;
            for x in xs.iter_mut() {
                *x = rest % size;
                rest /= size;
            }
            let ok = constraint
                .forms()
                .iter()
                .zip(&targets)
                .all(|(f, &tgt)| part.cell_of()[crate::forms::eval_form_indices(&params, f.coeffs(), &xs)] == tgt);
            hits += ok as u64;
        }
        hits
    })
    .into_iter()
    .sum();
    Ok((count, total as u64))
}

/// Probability that a random tuple realizes the images.
pub fn pattern_probability(b: &PolynomialFactor, constraint: &AffineConstraint, images: &CellImage, mode: PatternMode) -> Result<f64> {
    match mode {
        PatternMode::Bruteforce => {
            let (k, t) = pattern_count(b, constraint, images, DEFAULT_ENUMERATION_BUDGET)?;
            Ok(k as f64 / t as f64)
        }
        PatternMode::Predicted => Ok(predict_pattern(b, constraint, images, None)?.probability),
    }
}
