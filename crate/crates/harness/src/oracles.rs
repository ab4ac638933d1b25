//! Brute-force reference computations. These work on coordinate vectors with
//! plain loops and share no enumeration code with the library.

use std::collections::{BTreeMap, BTreeSet};

use affinv::field::{FieldParams, FieldVec, FunctionTable, RealTable};
use affinv::forms::{AffineConstraint, ConstraintCollection, InducedConstraint, LinearForm};
use affinv::poly::PolynomialFactor;

/// All points of `F_p^n` as coordinate vectors, in canonical order.
pub fn points(p: u32, n: usize) -> Vec<Vec<u32>> {
    let size = (p as usize).pow(n as u32);
    (0..size)
        .map(|mut i| {
            (0..n)
                .map(|_| {
                    let d = (i % p as usize) as u32;
                    i /= p as usize;
                    d
                })
                .collect()
        })
        .collect()
}

fn index(p: u32, x: &[u32]) -> usize {
    x.iter().rev().fold(0, |acc, &c| acc * p as usize + c as usize)
}

fn combine(p: u32, coeffs: &[u32], xs: &[&[u32]]) -> Vec<u32> {
    let n = xs[0].len();
    (0..n)
        .map(|k| coeffs.iter().zip(xs).map(|(&c, x)| c * x[k]).sum::<u32>() % p)
        .collect()
}

/// All tuples of `len` elements from `0..size`.
fn tuples(size: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..size).map(move |i| {
                    let mut u = t.clone();
                    u.push(i);
                    u
                })
            })
            .collect();
    }
    out
}

/// `E_x prod_i f_i(L_i(x))` by direct summation.
pub fn form_average(fs: &[RealTable], forms: &[LinearForm]) -> f64 {
    let fp = *fs[0].params();
    let pts = points(fp.p(), fp.n());
    let ell = forms[0].ell();
    let mut total = 0.0;
    let mut count = 0usize;
    for t in tuples(pts.len(), ell) {
        let xs: Vec<&[u32]> = t.iter().map(|&i| pts[i].as_slice()).collect();
        let mut prod = 1.0;
        for (f, a) in fs.iter().zip(forms) {
            prod *= f.get(index(fp.p(), &combine(fp.p(), a.coeffs(), &xs)));
        }
        total += prod;
        count += 1;
    }
    total / count as f64
}

/// `||f||_{U^k}` from the definition: the average over `x, h_1..h_k` of the
/// product over the cube `x + sum_i w_i h_i`.
pub fn gowers_norm(f: &RealTable, k: usize) -> f64 {
    let fp = *f.params();
    let p = fp.p();
    let pts = points(p, fp.n());
    let mut total = 0.0;
    let mut count = 0usize;
    for t in tuples(pts.len(), k + 1) {
        let mut prod = 1.0;
        for w in 0..1usize << k {
            let mut y = pts[t[0]].clone();
            for i in 0..k {
                if w >> i & 1 == 1 {
                    for (c, h) in y.iter_mut().zip(&pts[t[i + 1]]) {
                        *c = (*c + h) % p;
                    }
                }
            }
            prod *= f.get(index(p, &y));
        }
        total += prod;
        count += 1;
    }
    let mean = total / count as f64;
    mean.max(0.0).powf(1.0 / (1u64 << k) as f64)
}

/// Cell of every point, from evaluating each polynomial on coordinates.
pub fn cells(b: &PolynomialFactor) -> Vec<Vec<u32>> {
    let fp = b.params();
    points(fp.p(), fp.n())
        .iter()
        .map(|x| {
            let v = FieldVec::new(x.clone(), fp).expect("point");
            b.polys().iter().map(|q| q.eval(&v)).collect()
        })
        .collect()
}

pub fn cell_counts(b: &PolynomialFactor) -> BTreeMap<Vec<u32>, u64> {
    let mut out = BTreeMap::new();
    for c in cells(b) {
        *out.entry(c).or_insert(0) += 1;
    }
    out
}

/// `E[f | B]` by grouping points on their cells.
pub fn conditional_expectation(f: &RealTable, b: &PolynomialFactor) -> Vec<f64> {
    let cs = cells(b);
    let mut sums: BTreeMap<&Vec<u32>, (f64, usize)> = BTreeMap::new();
    for (x, c) in cs.iter().enumerate() {
        let e = sums.entry(c).or_insert((0.0, 0));
        e.0 += f.get(x);
        e.1 += 1;
    }
    cs.iter().map(|c| sums[c].0 / sums[c].1 as f64).collect()
}

/// Largest `|E e_p(sum lambda_i P_i)|` over all nonzero `lambda`.
pub fn max_bias(b: &PolynomialFactor) -> f64 {
    let p = b.params().p();
    let cs = cells(b);
    let c = b.len();
    let mut best: f64 = 0.0;
    for lambda in tuples(p as usize, c).into_iter().skip(1) {
        let (mut re, mut im) = (0.0, 0.0);
        for cell in &cs {
            let v: usize = lambda.iter().zip(cell).map(|(&l, &x)| l * x as usize).sum::<usize>() % p as usize;
            let theta = 2.0 * std::f64::consts::PI * v as f64 / p as f64;
            re += theta.cos();
            im += theta.sin();
        }
        best = best.max((re * re + im * im).sqrt() / cs.len() as f64);
    }
    best
}

/// Number of tuples realizing every image pattern `(B(a_1(x)), ..., B(a_m(x)))`.
pub fn pattern_histogram(b: &PolynomialFactor, a: &AffineConstraint) -> (BTreeMap<Vec<Vec<u32>>, u64>, u64) {
    let fp = b.params();
    let p = fp.p();
    let pts = points(p, fp.n());
    let cs = cells(b);
    let mut hist = BTreeMap::new();
    let mut total = 0;
    for t in tuples(pts.len(), a.ell()) {
        let xs: Vec<&[u32]> = t.iter().map(|&i| pts[i].as_slice()).collect();
        let pattern: Vec<Vec<u32>> = a.forms().iter().map(|f| cs[index(p, &combine(p, f.coeffs(), &xs))].clone()).collect();
        *hist.entry(pattern).or_insert(0) += 1;
        total += 1;
    }
    (hist, total)
}

/// Dimension of the span of `vectors`, by counting distinct combinations.
pub fn span_dimension(p: u32, vectors: &[Vec<u32>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let mut seen = BTreeSet::new();
    for lambda in tuples(p as usize, vectors.len()) {
        let v: Vec<u32> = (0..vectors[0].len())
            .map(|k| lambda.iter().zip(vectors).map(|(&l, w)| l as u32 * w[k]).sum::<u32>() % p)
            .collect();
        seen.insert(v);
    }
    let mut dim = 0;
    let mut size = 1;
    while size < seen.len() {
        size *= p as usize;
        dim += 1;
    }
    assert_eq!(size, seen.len(), "span size is a power of p");
    dim
}

/// `a^{(x)d}` with entry `(i_1..i_d)` equal to `prod_k a_{i_k}`.
pub fn tensor_power(p: u32, a: &[u32], d: usize) -> Vec<u32> {
    tuples(a.len(), d)
        .into_iter()
        .map(|idx| idx.iter().fold(1u32, |acc, &i| acc * a[i] % p))
        .collect()
}

pub fn dimension(p: u32, forms: &[LinearForm], d: usize) -> usize {
    let vs: Vec<Vec<u32>> = forms.iter().map(|f| tensor_power(p, f.coeffs(), d)).collect();
    span_dimension(p, &vs)
}

/// Rank of the coefficient matrix of a constraint.
pub fn rank(a: &AffineConstraint) -> usize {
    span_dimension(a.p(), &a.rows())
}

fn induces(f: &FunctionTable, ic: &InducedConstraint, zs: &[&[u32]]) -> bool {
    let p = f.params().p();
    ic.constraint()
        .forms()
        .iter()
        .zip(ic.sigma())
        .all(|(a, &s)| f.label(index(p, &combine(p, a.coeffs(), zs))) == s)
}

/// Whether `f` induces `ic` anywhere, by full enumeration.
pub fn induces_somewhere(f: &FunctionTable, ic: &InducedConstraint) -> bool {
    let fp = f.params();
    let pts = points(fp.p(), fp.n());
    tuples(pts.len(), ic.ell()).into_iter().any(|t| {
        let zs: Vec<&[u32]> = t.iter().map(|&i| pts[i].as_slice()).collect();
        induces(f, ic, &zs)
    })
}

pub fn is_free(f: &FunctionTable, c: &ConstraintCollection) -> bool {
    c.members().iter().all(|ic| !induces_somewhere(f, ic))
}

/// Exact probability that one tester trial with `ell` sampled points
/// rejects: over all sample tuples, whether some member is induced with
/// `z_1` in `x_1 + span(x_2..)` and the other variables in `span(x_2..)`.
pub fn trial_rejection_probability(f: &FunctionTable, c: &ConstraintCollection, ell: usize) -> f64 {
    let fp: FieldParams = *f.params();
    let p = fp.p();
    let pts = points(p, fp.n());
    let samples = tuples(pts.len(), ell);
    let mut rejecting = 0usize;
    for s in &samples {
        let dirs: Vec<&[u32]> = s[1..].iter().map(|&i| pts[i].as_slice()).collect();
        let mut lin: BTreeSet<Vec<u32>> = BTreeSet::new();
        for cs in tuples(p as usize, dirs.len()) {
            let coeffs: Vec<u32> = cs.iter().map(|&c| c as u32).collect();
            lin.insert(if dirs.is_empty() { vec![0; fp.n()] } else { combine(p, &coeffs, &dirs) });
        }
        let base = &pts[s[0]];
        let aff: Vec<Vec<u32>> = lin.iter().map(|v| v.iter().zip(base).map(|(a, b)| (a + b) % p).collect()).collect();
        let lin: Vec<Vec<u32>> = lin.into_iter().collect();
        let hit = c.members().iter().any(|ic| {
            let l = ic.ell();
            (0..aff.len()).any(|z1| {
                tuples(lin.len(), l - 1).into_iter().any(|rest| {
                    let mut zs: Vec<&[u32]> = vec![aff[z1].as_slice()];
                    zs.extend(rest.iter().map(|&i| lin[i].as_slice()));
                    induces(f, ic, &zs)
                })
            })
        });
        rejecting += hit as usize;
    }
    rejecting as f64 / samples.len() as f64
}

/// Distance from `f` to the nearest affine table over `F_2^n`, enumerating
/// every `c_0 + sum c_i x_i`.
pub fn distance_to_affine_f2(f: &FunctionTable) -> f64 {
    let n = f.params().n();
    let pts = points(2, n);
    let mut best = usize::MAX;
    for code in 0..1usize << (n + 1) {
        let wrong = pts
            .iter()
            .enumerate()
            .filter(|(x, v)| {
                let val = (code & 1) as u32 + v.iter().enumerate().map(|(i, &c)| c * ((code >> (i + 1)) & 1) as u32).sum::<u32>();
                f.label(*x) != val % 2 + 1
            })
            .count();
        best = best.min(wrong);
    }
    best as f64 / pts.len() as f64
}
