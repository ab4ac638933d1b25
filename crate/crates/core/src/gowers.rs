//! Gowers uniformity norms, correlation with polynomial phases, and an
//! exhaustive search for the best-correlating low-degree polynomial.
//!
//! The exact norm enumerates every `(x, y_1, ..., y_k)` through iterated
//! multiplicative derivatives `g(x + y) conj(g(x))`. `U^1` is only a
//! seminorm: it equals `|E f|`.

use std::ops::{Add, Mul};

use log::warn;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{checked_pow, ensure_budget, Error, Result};
use crate::field::{Characters, FieldParams, RealTable};
use crate::forms::{eval_form_indices, LinearForm};
use crate::poly::{monomials, Polynomial};
use crate::{par, DEFAULT_ENUMERATION_BUDGET, DEFAULT_SEARCH_BUDGET};

/// Radicands above this are rounding noise and clamp to zero silently.
const CLAMP_QUIET: f64 = -1e-12;
/// Radicands below this indicate an accumulation bug.
const CLAMP_HARD: f64 = -1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GowersMode {
    Exact,
    MonteCarlo,
}

/// How to evaluate a Gowers norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GowersMethod {
    /// Full enumeration within the given point budget.
    Exact { budget: u128 },
    /// Sample mean over `samples` random `(x, y)` tuples.
    MonteCarlo { samples: u64, seed: u64 },
}

impl Default for GowersMethod {
    fn default() -> Self {
        GowersMethod::Exact {
            budget: DEFAULT_ENUMERATION_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GowersResult {
    pub value: f64,
    pub stderr: f64,
    pub mode: GowersMode,
    pub samples: u64,
    pub seed: u64,
}

trait Scalar: Copy + Send + Sync + Default + Add<Output = Self> + Mul<Output = Self> {
    fn conj(self) -> Self;
    fn re(self) -> f64;
}

impl Scalar for f64 {
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
}

impl Scalar for Complex64 {
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
}

/// `||f||_{U^k}` of a real table.
pub fn gowers_norm(f: &RealTable, k: usize, method: GowersMethod) -> Result<GowersResult> {
    gowers_generic(f.params(), f.values(), k, method)
}

/// `||f||_{U^k}` of a complex-valued function given in canonical order.
pub fn gowers_norm_complex(params: &FieldParams, values: &[Complex64], k: usize, method: GowersMethod) -> Result<GowersResult> {
    if values.len() != params.size() {
        return Err(Error::DimensionMismatch {
            expected: params.size(),
            found: values.len(),
        });
    }
    gowers_generic(params, values, k, method)
}

fn gowers_generic<T: Scalar>(params: &FieldParams, values: &[T], k: usize, method: GowersMethod) -> Result<GowersResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("Gowers norm order must be at least 1".into()));
    }
    let exponent = 1.0 / (1u64 << k.min(63)) as f64;
    match method {
        GowersMethod::Exact { budget } => {
            let total = ensure_budget("exact Gowers norm", params.size() as u128, k + 1, budget)?;
            let sum = exact_sum(params, values, k);
            let mean = sum / total as f64;
            Ok(GowersResult {
                value: root(mean, exponent)?,
                stderr: 0.0,
                mode: GowersMode::Exact,
                samples: total as u64,
                seed: 0,
            })
        }
        GowersMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidArgument("Monte-Carlo mode needs at least two samples".into()));
            }
            if k >= 20 {
                return Err(Error::budget("Gowers cube size", 1u128 << k, 1 << 20));
            }
            let (mean, var) = mc_moments(params, values, k, samples, seed);
            let se = (var / samples as f64).sqrt();
            let value = root(mean, exponent)?;
            let stderr = if mean > 0.0 {
                se * exponent * mean.powf(exponent - 1.0)
            } else {
                se.powf(exponent)
            };
            Ok(GowersResult {
                value,
                stderr,
                mode: GowersMode::MonteCarlo,
                samples,
                seed,
            })
        }
    }
}

fn root(mean: f64, exponent: f64) -> Result<f64> {
    if mean >= 0.0 {
        return Ok(mean.powf(exponent));
    }
    if mean < CLAMP_HARD {
        return Err(Error::Numerical(format!("negative Gowers radicand {mean:e}")));
    }
    if mean < CLAMP_QUIET {
        warn!("clamping negative Gowers radicand {mean:e} to zero");
    }
    Ok(0.0)
}

/// `sum_{x, y_1..y_k} prod_S C^{k-|S|} f(x + sum_S y)`, real part.
fn exact_sum<T: Scalar>(params: &FieldParams, values: &[T], k: usize) -> f64 {
    let size = params.size();
    // Parallel over y_1; each branch reduces its own subtree sequentially.
    let parts = par::map_chunks(size, 1, |r| {
        let y1 = r.start;
        let g = derivative(params, values, y1);
        level_sum(params, &g, k - 1)
    });
    parts.into_iter().sum()
}

fn derivative<T: Scalar>(params: &FieldParams, g: &[T], y: usize) -> Vec<T> {
    (0..g.len()).map(|x| g[params.add_indices(x, y)] * g[x].conj()).collect()
}

fn level_sum<T: Scalar>(params: &FieldParams, g: &[T], depth: usize) -> f64 {
    if depth == 0 {
        return g.iter().fold(T::default(), |a, &b| a + b).re();
    }
    (0..g.len())
        .map(|y| {
            let h = derivative(params, g, y);
            level_sum(params, &h, depth - 1)
        })
        .sum()
}

const MC_CHUNK: u64 = 1 << 10;

fn mc_moments<T: Scalar>(params: &FieldParams, values: &[T], k: usize, samples: u64, seed: u64) -> (f64, f64) {
    let size = params.size();
    let chunks = samples.div_ceil(MC_CHUNK) as usize;
    let per_chunk = par::map_chunks(chunks, 1, |r| {
        let c = r.start as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c);
        let count = MC_CHUNK.min(samples - c * MC_CHUNK);
        let mut ys = vec![0usize; k];
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        for _ in 0..count {
            let x = rng.random_range(0..size);
            for y in ys.iter_mut() {
                *y = rng.random_range(0..size);
            }
            let mut prod = T::default();
            for mask in 0..(1usize << k) {
                let mut point = x;
                for (i, &y) in ys.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        point = params.add_indices(point, y);
                    }
                }
                let v = values[point];
                let conj = (k - mask.count_ones() as usize) % 2 == 1;
                let v = if conj { v.conj() } else { v };
                prod = if mask == 0 { v } else { prod * v };
            }
            let r = prod.re();
            s1 += r;
            s2 += r * r;
        }
        (s1, s2)
    });
    let (s1, s2) = per_chunk.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s1 / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, var)
}

/// `|E_x f(x) e_p(P(x))|`.
pub fn correlation(f: &RealTable, q: &Polynomial) -> Result<f64> {
    let vals = q.values(f.params())?;
    Ok(correlation_with_values(f.values(), &vals, q.p()))
}

fn correlation_with_values(f: &[f64], vals: &[u32], p: u32) -> f64 {
    if p == 2 {
        let s: f64 = f.iter().zip(vals).map(|(&a, &v)| if v == 0 { a } else { -a }).sum();
        return s.abs() / f.len() as f64;
    }
    let chars = Characters::new(p);
    let s: Complex64 = f.iter().zip(vals).map(|(&a, &v)| chars.get(v) * a).sum();
    s.norm() / f.len() as f64
}

/// A polynomial together with its correlation with the searched function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationWitness {
    pub polynomial: Polynomial,
    pub correlation: f64,
}

/// Correlations within this of the best are treated as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Maximizes `|E f e_p(P)|` over every polynomial of degree at most `d` with
/// zero constant term; ties go to the lexicographically least coefficient
/// vector over [`monomials`]. Only classical polynomials are searched, so
/// for `d >= p` this is not the full inverse-theorem class.
pub fn inverse_gowers_search(f: &RealTable, d: u32, budget: u128) -> Result<CorrelationWitness> {
    let params = *f.params();
    let p = params.p();
    let mons = monomials(p, params.n(), d);
    let m = mons.len();
    let space = checked_pow(p as u128, m).unwrap_or(u128::MAX);
    if space > budget {
        return Err(Error::budget("inverse Gowers search", space, budget));
    }
    let size = params.size();
    let tables: Vec<Vec<u32>> = mons
        .iter()
        .map(|e| Polynomial::from_terms(p, params.n(), [(1, e.clone())]).and_then(|q| q.values(&params)))
        .collect::<Result<_>>()?;

    // Split on a prefix of the coefficient vector; each chunk searches the rest.
    let mut prefix_len = 0;
    while prefix_len < m && (p as usize).pow(prefix_len as u32) < 256 {
        prefix_len += 1;
    }
    let prefixes = (p as usize).pow(prefix_len as u32);
    let fv = f.values();
    let results = par::map_chunks(prefixes, 1, |r| {
        let code = r.start;
        let mut coeffs = vec![0u32; m];
        // Most significant digit first, so codes ascend lexicographically.
        let mut rest = code;
        for j in (0..prefix_len).rev() {
            coeffs[j] = (rest % p as usize) as u32;
            rest /= p as usize;
        }
        let mut acc = vec![0u32; size];
        for (j, &c) in coeffs[..prefix_len].iter().enumerate() {
            for (a, &t) in acc.iter_mut().zip(&tables[j]) {
                *a = (*a + c * t) % p;
            }
        }
        let mut best = (f64::NEG_INFINITY, Vec::new());
        search(fv, &tables, p, prefix_len, &mut coeffs, &acc, &mut best);
        best
    });
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for r in results {
        if r.0 > best.0 + TIE_TOLERANCE {
            best = r;
        }
    }
    let polynomial = Polynomial::from_terms(p, params.n(), best.1.iter().zip(&mons).map(|(&c, e)| (c, e.clone())))?;
    let correlation = correlation(f, &polynomial)?;
    Ok(CorrelationWitness { polynomial, correlation })
}

fn search(f: &[f64], tables: &[Vec<u32>], p: u32, j: usize, coeffs: &mut Vec<u32>, acc: &[u32], best: &mut (f64, Vec<u32>)) {
    if j == tables.len() {
        let c = correlation_with_values(f, acc, p);
        if c > best.0 + TIE_TOLERANCE {
            *best = (c, coeffs.clone());
        }
        return;
    }
    let mut next = acc.to_vec();
    for c in 0..p {
        coeffs[j] = c;
        if c > 0 {
            for (a, &t) in next.iter_mut().zip(&tables[j]) {
                *a = if *a + t >= p { *a + t - p } else { *a + t };
            }
        }
        search(f, tables, p, j + 1, coeffs, &next, best);
    }
    coeffs[j] = 0;
}

/// [`inverse_gowers_search`] with [`DEFAULT_SEARCH_BUDGET`].
pub fn best_correlating_polynomial(f: &RealTable, d: u32) -> Result<CorrelationWitness> {
    inverse_gowers_search(f, d, DEFAULT_SEARCH_BUDGET)
}

/// Exact `E_{x_1..x_l} prod_i f_i(L_i(x))`.
pub fn form_average(fs: &[RealTable], forms: &[LinearForm], budget: u128) -> Result<f64> {
    if fs.len() != forms.len() || fs.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: forms.len(),
            found: fs.len(),
        });
    }
    let params = *fs[0].params();
    if fs.iter().any(|f| *f.params() != params) {
        return Err(Error::ShapeMismatch("tables over different domains".into()));
    }
    let ell = forms[0].ell();
    let total = ensure_budget("form average", params.size() as u128, ell, budget)? as usize;
    let size = params.size();
    let sum: f64 = par::map_chunks(total, par::CHUNK, |r| {
        let mut xs = vec![0usize; ell];
        let mut s = 0.0;
        for t in r {
            let mut rest = t;
            for x in xs.iter_mut() {
                *x = rest % size;
                rest /= size;
            }
            s += fs
                .iter()
                .zip(forms)
                .map(|(f, l)| f.get(eval_form_indices(&params, l.coeffs(), &xs)))
                .product::<f64>();
        }
        s
    })
    .into_iter()
    .sum();
    Ok(sum / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{cs_complexity, AffineConstraint, Complexity, ComplexityBudget};
        use proptest::prelude::*;
    use rand::Rng;

    fn params(p: u32, n: usize) -> FieldParams {
        FieldParams::new(p, n).unwrap()
    }

    fn exact(f: &RealTable, k: usize) -> f64 {
        gowers_norm(f, k, GowersMethod::default()).unwrap().value
    }

    // Direct definition: loop over every (x, y_1..y_k) and every subset S.
    fn gowers_direct(f: &RealTable, k: usize) -> f64 {
        let fp = f.params();
        let size = fp.size();
        let total = size.pow(k as u32 + 1);
        let mut sum = 0.0;
        for t in 0..total {
            let x = t % size;
            let ys: Vec<usize> = (0..k).map(|i| t / size.pow(i as u32 + 1) % size).collect();
            let mut prod = 1.0;
            for mask in 0..1usize << k {
                let mut pt = fp.vector_at(x);
                for (i, &y) in ys.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        pt = fp.add(&pt, &fp.vector_at(y));
                    }
                }
                prod *= f.get(fp.index_of(&pt).unwrap());
            }
            sum += prod;
        }
        (sum / total as f64).max(0.0).powf(1.0 / (1 << k) as f64)
    }

    fn random_table(rng: &mut impl Rng, fp: FieldParams, lo: f64) -> RealTable {
        RealTable::new(fp, (0..fp.size()).map(|_| lo + (1.0 - lo) * rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn examples() {
        let fp = params(2, 3);
        for k in 1..=3 {
            assert!((exact(&RealTable::constant(fp, 0.3), k) - 0.3).abs() < 1e-12);
        }
        let x1 = RealTable::from_fn(fp, |x| x.coords()[0] as f64).unwrap();
        assert!((exact(&x1, 1) - 0.5).abs() < 1e-15);
        let chi = RealTable::from_fn(fp, |x| if x.coords()[0] == 0 { 1.0 } else { -1.0 }).unwrap();
        assert!((exact(&chi, 2) - 1.0).abs() < 1e-12);
        assert!(gowers_norm(&chi, 0, GowersMethod::default()).is_err());
        let tight = GowersMethod::Exact { budget: 100 };
        assert!(gowers_norm(&chi, 3, tight).unwrap_err().is_budget());
    }

    #[test]
    fn exact_matches_direct_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (p, n, k) in [(2, 3, 1), (2, 3, 3), (3, 2, 2), (5, 1, 3)] {
            let f = random_table(&mut rng, params(p, n), -1.0);
            assert!((exact(&f, k) - gowers_direct(&f, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn polynomial_phases_have_unit_norm() {
        for (p, n, d) in [(2, 3, 1), (2, 3, 2), (3, 2, 1), (3, 2, 2), (3, 3, 2)] {
            let fp = params(p, n);
            let mut rng = ChaCha8Rng::seed_from_u64(p as u64 * 10 + d as u64);
            let terms: Vec<(u32, Vec<u32>)> = monomials(p, n, d).into_iter().map(|e| (rng.random_range(0..p), e)).collect();
            let q = Polynomial::from_terms(p, n, terms).unwrap();
            let chars = Characters::new(p);
            let vals: Vec<Complex64> = q.values(&fp).unwrap().iter().map(|&v| chars.get(v)).collect();
            let r = gowers_norm_complex(&fp, &vals, d as usize + 1, GowersMethod::default()).unwrap();
            assert!((r.value - 1.0).abs() < 1e-9, "p={p} n={n} d={d}: {}", r.value);
        }
    }

    #[test]
    fn ladder_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = random_table(&mut rng, params(2, 4), -1.0);
            let u: Vec<f64> = (1..=3).map(|k| exact(&f, k)).collect();
            assert!(u[0] <= u[1] + 1e-9 && u[1] <= u[2] + 1e-9, "{u:?}");
        }
    }

    #[test]
    fn monte_carlo_is_reproducible_and_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_table(&mut rng, params(2, 4), 0.2);
        let m = GowersMethod::MonteCarlo { samples: 5000, seed: 42 };
        let a = gowers_norm(&f, 2, m).unwrap();
        assert_eq!(a, gowers_norm(&f, 2, m).unwrap());
        let truth = exact(&f, 2);
        assert!((a.value - truth).abs() < 5.0 * a.stderr, "{} vs {truth} ± {}", a.value, a.stderr);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_table(&mut rng, params(3, 3), -1.0);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| (exact(&f, 2), gowers_norm(&f, 2, GowersMethod::MonteCarlo { samples: 3000, seed: 5 }).unwrap().value))
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn correlation_examples() {
        let fp = params(2, 3);
        let q = Polynomial::linear(2, &[1, 1, 0]);
        assert_eq!(correlation(&RealTable::zeros(fp), &q).unwrap(), 0.0);
        let f = RealTable::from_fn(fp, |x| if q.eval(x) == 0 { 1.0 } else { -1.0 }).unwrap();
        assert_eq!(correlation(&f, &q).unwrap(), 1.0);
    }

    #[test]
    fn best_affine_correlation_is_walsh_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let fp = params(2, 4);
        for _ in 0..10 {
            let f = random_table(&mut rng, fp, -1.0);
            // Walsh coefficients by direct summation.
            let walsh_max = (0..16usize)
                .map(|a| {
                    let s: f64 = (0..16usize).map(|x| if (a & x).count_ones() % 2 == 0 { f.get(x) } else { -f.get(x) }).sum();
                    s.abs() / 16.0
                })
                .fold(0.0, f64::max);
            let w = inverse_gowers_search(&f, 1, DEFAULT_SEARCH_BUDGET).unwrap();
            assert!((w.correlation - walsh_max).abs() < 1e-12);
            assert!((correlation(&f, &w.polynomial).unwrap() - w.correlation).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_search_examples() {
        let fp = params(2, 2);
        let f = RealTable::from_fn(fp, |x| if x.coords()[0] * x.coords()[1] == 0 { 1.0 } else { -1.0 }).unwrap();
        let f = f.sub(&RealTable::constant(fp, f.mean())).unwrap();
        let w = inverse_gowers_search(&f, 2, DEFAULT_SEARCH_BUDGET).unwrap();
        let direct = correlation(&f, &Polynomial::product(2, 2, &[0, 1]).unwrap()).unwrap();
        assert!((w.correlation - direct).abs() < 1e-12);
        assert_eq!(w.polynomial, Polynomial::product(2, 2, &[0, 1]).unwrap());

        let raw = RealTable::from_fn(fp, |x| if x.coords()[0] * x.coords()[1] == 0 { 1.0 } else { -1.0 }).unwrap();
        let w = inverse_gowers_search(&raw, 2, DEFAULT_SEARCH_BUDGET).unwrap();
        assert_eq!(w.correlation, 1.0);
        assert_eq!(w.polynomial, Polynomial::product(2, 2, &[0, 1]).unwrap());

        let w = inverse_gowers_search(&RealTable::zeros(params(3, 2)), 2, DEFAULT_SEARCH_BUDGET).unwrap();
        assert_eq!(w.correlation, 0.0);
        assert!(w.polynomial.is_zero());

        assert!(inverse_gowers_search(&raw, 2, 4).unwrap_err().is_budget());
    }

    #[test]
    fn counting_lemma_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 40 {
            let p = [2u32, 3][rng.random_range(0..2)];
            let n = if p == 2 { rng.random_range(1..=4) } else { rng.random_range(1..=2) };
            let ell = rng.random_range(2..=3);
            let m = rng.random_range(1..=4);
            let rows: Vec<Vec<u32>> = (0..m)
                .map(|j| (0..ell).map(|k| if k == 0 { 1 } else if j == 0 { 0 } else { rng.random_range(0..p) }).collect())
                .collect();
            let a = AffineConstraint::new(p, rows).unwrap();
            let Complexity::Exact(s) = cs_complexity(a.forms(), p, ComplexityBudget::default()).unwrap() else {
                continue;
            };
            let fp = params(p, n);
            let fs: Vec<RealTable> = (0..m).map(|_| random_table(&mut rng, fp, -1.0)).collect();
            let lhs = form_average(&fs, a.forms(), DEFAULT_ENUMERATION_BUDGET).unwrap().abs();
            let rhs = fs.iter().map(|f| exact(f, s + 1)).fold(f64::INFINITY, f64::min);
            assert!(lhs <= rhs + 1e-9, "{:?}: {lhs} > {rhs}", a.rows());
            checked += 1;
        }
    }

    #[test]
    fn form_average_of_constants_is_product() {
        let fp = params(2, 3);
        let f = RealTable::constant(fp, 0.5);
        let a = AffineConstraint::derivative(2).unwrap();
        let v = form_average(&[f.clone(), f.clone(), f.clone(), f], a.forms(), 1 << 20).unwrap();
        assert_eq!(v, 0.0625);
    }

    proptest! {
        #[test]
        fn u1_is_absolute_mean(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_table(&mut rng, params(3, 2), -1.0);
            prop_assert!((exact(&f, 1) - f.mean().abs()).abs() < 1e-9);
        }
    }
}
