//! Seeded fixture generators. Every generator is a pure function of its
//! arguments.

use affinv::field::{FieldParams, FunctionTable};
use affinv::forms::{AffineConstraint, ConstraintCollection, InducedConstraint};
use affinv::linalg::SpanBasis;
use affinv::poly::{monomials, Polynomial, PolynomialFactor};
use affinv::tester::violation_density;
use affinv::{Error, Result, DEFAULT_ENUMERATION_BUDGET};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_function(p: u32, n: usize, r: u32, seed: u64) -> Result<FunctionTable> {
    let fp = FieldParams::new(p, n)?;
    let mut rng = rng(seed);
    FunctionTable::new(fp, r, (0..fp.size()).map(|_| rng.random_range(1..=r)).collect())
}

/// A random polynomial of degree exactly `d` (for `d >= 1`) with a random
/// constant term.
pub fn random_polynomial(p: u32, n: usize, d: u32, rng: &mut impl Rng) -> Result<Polynomial> {
    let mons = monomials(p, n, d);
    loop {
        let mut terms: Vec<(u32, Vec<u32>)> = mons.iter().map(|e| (rng.random_range(0..p), e.clone())).collect();
        terms.push((rng.random_range(0..p), vec![0; n]));
        let q = Polynomial::from_terms(p, n, terms)?;
        if q.degree() == d || d == 0 {
            return Ok(q);
        }
    }
}

/// Table of a random polynomial of degree at most `d`, label `v + 1` for
/// the value `v`.
pub fn degree_d_table(p: u32, n: usize, d: u32, seed: u64) -> Result<FunctionTable> {
    let fp = FieldParams::new(p, n)?;
    let mut rng = rng(seed);
    let q = random_polynomial(p, n, rng.random_range(0..=d), &mut rng)?;
    let values = q.values(&fp)?.into_iter().map(|v| v + 1).collect();
    FunctionTable::new(fp, p, values)
}

/// `c` linear polynomials with linearly independent linear parts and random
/// constant terms.
pub fn linear_factor(p: u32, n: usize, c: usize, seed: u64) -> Result<PolynomialFactor> {
    if c > n {
        return Err(Error::InvalidArgument(format!("{c} independent linear forms in {n} variables")));
    }
    let fp = FieldParams::new(p, n)?;
    let mut rng = rng(seed);
    let mut basis = SpanBasis::new(p);
    let mut polys = Vec::new();
    while polys.len() < c {
        let v: Vec<u32> = (0..n).map(|_| rng.random_range(0..p)).collect();
        if basis.insert(&v) {
            let q = Polynomial::linear(p, &v).add(&Polynomial::constant(p, n, rng.random_range(0..p)))?;
            polys.push(q);
        }
    }
    PolynomialFactor::new(fp, polys)
}

/// `c` random polynomials, each of degree exactly `d`.
pub fn random_factor(p: u32, n: usize, c: usize, d: u32, seed: u64) -> Result<PolynomialFactor> {
    let fp = FieldParams::new(p, n)?;
    let mut rng = rng(seed);
    let polys = (0..c).map(|_| random_polynomial(p, n, d, &mut rng)).collect::<Result<Vec<_>>>()?;
    PolynomialFactor::new(fp, polys)
}

/// The four-form derivative constraint; `sigma` defaults to the first
/// pattern forbidden for degree-1 tables.
pub fn blr_constraint(p: u32, sigma: Option<Vec<u32>>) -> Result<InducedConstraint> {
    match sigma {
        Some(s) => InducedConstraint::new(AffineConstraint::derivative(p)?, s),
        None => Ok(ConstraintCollection::degree_one(p)?.members()[0].clone()),
    }
}

/// The `k`-term progression constraint; `sigma` defaults to all ones.
pub fn ap_constraint(p: u32, k: usize, sigma: Option<Vec<u32>>) -> Result<InducedConstraint> {
    InducedConstraint::new(AffineConstraint::progression(p, k)?, sigma.unwrap_or(vec![1; k]))
}

/// A degree-1 table with `count` points moved to another label, and the
/// recomputed fraction of triples violating the degree-1 family.
pub struct PlantedViolations {
    pub table: FunctionTable,
    pub planted: Vec<usize>,
    pub violation_density: f64,
}

pub fn planted_violations(p: u32, n: usize, count: usize, seed: u64) -> Result<PlantedViolations> {
    let base = degree_d_table(p, n, 1, seed)?;
    let mut rng = rng(seed ^ 0x9e37_79b9);
    let size = base.params().size();
    if count > size {
        return Err(Error::InvalidArgument(format!("cannot plant {count} points in {size}")));
    }
    let mut values = base.values().to_vec();
    let mut planted = Vec::new();
    while planted.len() < count {
        let x = rng.random_range(0..size);
        if planted.contains(&x) {
            continue;
        }
        values[x] = (values[x] - 1 + rng.random_range(1..p)) % p + 1;
        planted.push(x);
    }
    planted.sort_unstable();
    let table = FunctionTable::new(*base.params(), p, values)?;
    // the members fix all four labels, so distinct members never share a triple
    let violation_density = ConstraintCollection::degree_one(p)?
        .members()
        .iter()
        .map(|ic| violation_density(&table, ic, DEFAULT_ENUMERATION_BUDGET))
        .sum::<Result<f64>>()?;
    Ok(PlantedViolations {
        table,
        planted,
        violation_density,
    })
}

/// A function of one linear form over `F_2^n` whose value is changed on the
/// points where `k in {n - 1, n}` chosen coordinates all equal 1. With `r = 3`
/// those points get the label 3 instead of the flipped bit.
pub fn sparse_noise_table(n: usize, seed: u64) -> Result<FunctionTable> {
    let fp = FieldParams::new(2, n)?;
    let mut rng = rng(seed);
    let k = rng.random_range(n - 1..=n);
    let r = rng.random_range(2..=3u32);
    let lin: Vec<u32> = loop {
        let v: Vec<u32> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if v.contains(&1) {
            break v;
        }
    };
    let mut coords: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let j = rng.random_range(i..n);
        coords.swap(i, j);
    }
    let support = coords[..k].to_vec();
    FunctionTable::from_fn(fp, r, |x| {
        let v = x.coords().iter().zip(&lin).map(|(a, b)| a * b).sum::<u32>() % 2;
        if !support.iter().all(|&i| x.coords()[i] == 1) {
            v + 1
        } else if r == 3 {
            3
        } else {
            2 - v
        }
    })
}
