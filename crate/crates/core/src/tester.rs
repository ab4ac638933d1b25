//! Induced-constraint search and the one-sided affine-subspace tester.
//!
//! A function `f` induces `(A, sigma)` at `x_1..x_l` when
//! `f(a_j(x_1..x_l)) = sigma_j` for every form `a_j` of `A`. Exhaustive
//! searches scan tuples in lexicographic order of their canonical indices,
//! `x_1` most significant, so the first witness is well defined.
//!
//! ```
//! use affinv::field::{FieldParams, FunctionTable};
//! use affinv::forms::ConstraintCollection;
//! use affinv::tester::{affine_subspace_test, Verdict};
//!
//! let fp = FieldParams::new(2, 4).unwrap();
//! let affine = FunctionTable::from_fn(fp, 2, |x| (x.coords()[0] + x.coords()[3] + 1) % 2 + 1).unwrap();
//! let family = ConstraintCollection::degree_one(2).unwrap();
//! let report = affine_subspace_test(&affine, &family, None, 200, 7, 1 << 20).unwrap();
//! assert_eq!(report.verdict, Verdict::Accept);
//! assert_eq!(report.rejections, 0);
//! ```

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_budget, Error, Result};
use crate::field::{restrict_to_span, AffineSpan, FieldParams, FieldVec, FunctionTable};
use crate::forms::{allowed_rows, eval_form_indices, CellImage, ConstraintCollection, InducedConstraint};
use crate::linalg::SpanBasis;
use crate::par;
use crate::poly::{monomials, CellId, CellPartition, PolynomialFactor};

/// Points `x_1..x_l` at which a function induces a constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    points: Vec<FieldVec>,
}

impl Witness {
    /// Checks that `f` induces `ic` at `points`.
    pub fn new(f: &FunctionTable, ic: &InducedConstraint, points: Vec<FieldVec>) -> Result<Self> {
        let idx = points.iter().map(|x| f.params().index_of(x)).collect::<Result<Vec<_>>>()?;
        if idx.len() != ic.ell() {
            return Err(Error::DimensionMismatch {
                expected: ic.ell(),
                found: idx.len(),
            });
        }
        if !induces_at(f, ic, &idx) {
            return Err(Error::InvalidArgument("points do not induce the constraint".into()));
        }
        Ok(Witness { points })
    }

    fn from_indices(f: &FunctionTable, ic: &InducedConstraint, idx: &[usize]) -> Result<Self> {
        Witness::new(f, ic, idx.iter().map(|&i| f.params().vector_at(i)).collect())
    }

    pub fn points(&self) -> &[FieldVec] {
        &self.points
    }
}

/// Result of a search under a budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Found(T),
    /// Definitively absent.
    Absent,
    /// Nothing found before the budget ran out.
    Inconclusive,
}

impl<T> Outcome<T> {
    pub fn found(&self) -> Option<&T> {
        match self {
            Outcome::Found(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_definitive(&self) -> bool {
        !matches!(self, Outcome::Inconclusive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    /// Uniformly random tuples; `budget` is the number of samples.
    Randomized,
}

fn induces_at(f: &FunctionTable, ic: &InducedConstraint, xs: &[usize]) -> bool {
    ic.constraint()
        .forms()
        .iter()
        .zip(ic.sigma())
        .all(|(a, &s)| f.label(eval_form_indices(f.params(), a.coeffs(), xs)) == s)
}

fn decode_tuple(mut t: usize, size: usize, out: &mut [usize]) {
    for x in out.iter_mut().rev() {
        *x = t % size;
        t /= size;
    }
}

fn labels_attained(f: &FunctionTable, ic: &InducedConstraint) -> bool {
    let attained = f.attained_labels();
    ic.sigma().iter().all(|s| attained.contains(s))
}

/// Searches for points at which `f` induces `ic`.
pub fn find_induced_occurrence(f: &FunctionTable, ic: &InducedConstraint, mode: SearchMode, budget: u128, seed: u64) -> Result<Outcome<Witness>> {
    if ic.constraint().p() != f.params().p() {
        return Err(Error::ShapeMismatch("constraint and function over different fields".into()));
    }
    let size = f.params().size();
    let ell = ic.ell();
    match mode {
        SearchMode::Exhaustive => {
            let total = ensure_budget("induced occurrence search", size as u128, ell, budget)?;
            if !labels_attained(f, ic) {
                return Ok(Outcome::Absent);
            }
            let hit = par::find_first(total as usize, |t| {
                let mut xs = vec![0; ell];
                decode_tuple(t, size, &mut xs);
                induces_at(f, ic, &xs)
            });
            match hit {
                Some(t) => {
                    let mut xs = vec![0; ell];
                    decode_tuple(t, size, &mut xs);
                    Ok(Outcome::Found(Witness::from_indices(f, ic, &xs)?))
                }
                None => Ok(Outcome::Absent),
            }
        }
        SearchMode::Randomized => {
            if !labels_attained(f, ic) {
                return Ok(Outcome::Absent);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut xs = vec![0; ell];
            for _ in 0..budget {
                xs.iter_mut().for_each(|x| *x = rng.random_range(0..size));
                if induces_at(f, ic, &xs) {
                    return Ok(Outcome::Found(Witness::from_indices(f, ic, &xs)?));
                }
            }
            Ok(Outcome::Inconclusive)
        }
    }
}

/// Whether `f` is free of every member, decided exhaustively.
pub fn is_free(f: &FunctionTable, collection: &ConstraintCollection, budget: u128) -> Result<bool> {
    for ic in collection.members() {
        if find_induced_occurrence(f, ic, SearchMode::Exhaustive, budget, 0)?.found().is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exact fraction of `l`-tuples at which `f` induces `ic`.
pub fn violation_density(f: &FunctionTable, ic: &InducedConstraint, budget: u128) -> Result<f64> {
    let size = f.params().size();
    let ell = ic.ell();
    let total = ensure_budget("violation density", size as u128, ell, budget)?;
    let hits = par::count(total as usize, |t| {
        let mut xs = vec![0; ell];
        decode_tuple(t, size, &mut xs);
        induces_at(f, ic, &xs)
    });
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
    /// No rejection, but some trial exceeded its budget.
    Inconclusive,
}

/// A rejecting trial: the member found and its points in the domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub trial: u64,
    pub member: usize,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub verdict: Verdict,
    pub trials: u64,
    pub rejections: u64,
    pub inconclusive: u64,
    /// First rejecting trial, if any.
    pub witness: Option<Rejection>,
    pub seed: u64,
    pub ell: usize,
    pub empirical_rejection_rate: f64,
    pub stderr: f64,
    /// The collection was replaced by its concise form before testing.
    pub normalized: bool,
    /// Largest `l` of the collection as given, before normalization.
    pub input_max_ell: usize,
}

enum Trial {
    Accept,
    Reject(usize, Witness),
    Inconclusive,
}

/// Points of `f`'s domain sampled by trial `t`.
pub fn trial_points(params: &FieldParams, ell: usize, seed: u64, trial: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    (0..ell).map(|_| rng.random_range(0..params.size())).collect()
}

/// Looks for a member induced by `f` on the affine span of `points`; the
/// witness is returned in domain coordinates.
pub fn witness_in_span(f: &FunctionTable, collection: &ConstraintCollection, points: &[usize], budget: u128) -> Result<Option<(usize, Witness)>> {
    let span = AffineSpan::from_indices(f.params(), points)?;
    let g = restrict_to_span(f, &span);
    for (k, ic) in collection.members().iter().enumerate() {
        if let Outcome::Found(w) = find_induced_occurrence(&g, ic, SearchMode::Exhaustive, budget, 0)? {
            // x_1 carries the base point, the other variables only directions
            let idx: Vec<usize> = w
                .points()
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let c = g.params().index_of(c).expect("restricted point");
                    if i == 0 {
                        span.point(c)
                    } else {
                        span.linear_point(c)
                    }
                })
                .collect();
            return Ok(Some((k, Witness::from_indices(f, ic, &idx)?)));
        }
    }
    Ok(None)
}

/// Repeats: sample `ell` points, restrict `f` to their affine span, and
/// reject on any verified induced member. A free `f` is never rejected.
pub fn affine_subspace_test(
    f: &FunctionTable,
    collection: &ConstraintCollection,
    ell_test: Option<usize>,
    trials: u64,
    seed: u64,
    budget: u128,
) -> Result<TestReport> {
    let normalized = !collection.is_concise();
    let concise = if normalized { collection.to_concise()? } else { collection.clone() };
    if let Some(ic) = concise.members().iter().find(|ic| ic.constraint().p() != f.params().p()) {
        return Err(Error::ShapeMismatch(format!("constraint over F_{} against a function over F_{}", ic.constraint().p(), f.params().p())));
    }
    let ell = ell_test.unwrap_or(concise.max_ell()).max(1);
    let outcomes: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            if concise.is_empty() {
                return Ok(Trial::Accept);
            }
            let pts = trial_points(f.params(), ell, seed, t);
            match witness_in_span(f, &concise, &pts, budget) {
                Ok(Some((k, w))) => Ok(Trial::Reject(k, w)),
                Ok(None) => Ok(Trial::Accept),
                Err(e) if e.is_budget() => Ok(Trial::Inconclusive),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut rejections = 0;
    let mut inconclusive = 0;
    let mut witness = None;
    for (t, o) in outcomes.into_iter().enumerate() {
        match o {
            Trial::Accept => {}
            Trial::Inconclusive => inconclusive += 1,
            Trial::Reject(member, w) => {
                rejections += 1;
                if witness.is_none() {
                    witness = Some(Rejection {
                        trial: t as u64,
                        member,
                        witness: w,
                    });
                }
            }
        }
    }
    let rate = if trials == 0 { 0.0 } else { rejections as f64 / trials as f64 };
    let verdict = if rejections > 0 {
        Verdict::Reject
    } else if inconclusive > 0 {
        Verdict::Inconclusive
    } else {
        Verdict::Accept
    };
    Ok(TestReport {
        verdict,
        trials,
        rejections,
        inconclusive,
        witness,
        seed,
        ell,
        empirical_rejection_rate: rate,
        stderr: if trials == 0 { 0.0 } else { (rate * (1.0 - rate) / trials as f64).sqrt() },
        normalized,
        input_max_ell: collection.max_ell(),
    })
}

/// A property given by finitely many tables.
#[derive(Debug, Clone, PartialEq)]
pub enum Property {
    /// Tables of polynomials of degree at most `d`, with label `l` standing
    /// for the field element `l - 1`; needs `R = p`.
    DegreeAtMost(u32),
    Explicit(Vec<FunctionTable>),
}

/// Exact `min_{g in P} Pr[f(x) != g(x)]`.
pub fn distance_to_enumerable_property(f: &FunctionTable, property: &Property, budget: u128) -> Result<f64> {
    let size = f.params().size();
    match property {
        Property::Explicit(tables) => {
            if tables.is_empty() {
                return Err(Error::InvalidArgument("empty property".into()));
            }
            tables
                .iter()
                .map(|g| crate::field::distance(f, g))
                .try_fold(f64::INFINITY, |a, d| d.map(|d| a.min(d)))
        }
        Property::DegreeAtMost(d) => {
            let p = f.params().p();
            if f.range() != p {
                return Err(Error::InvalidArgument(format!("degree property needs R = p = {p}, got R = {}", f.range())));
            }
            let mons = monomials(p, f.params().n(), *d);
            let k = mons.len() + 1;
            let total = ensure_budget("polynomial enumeration", p as u128, k, budget)? as usize;
            // value tables of 1 and of every monomial
            let mut tables = vec![vec![1u32; size]];
            for e in &mons {
                tables.push(
                    (0..size)
                        .map(|x| {
                            let v = f.params().vector_at(x);
                            e.iter().zip(v.coords()).fold(1u64, |acc, (&k, &c)| acc * (c as u64).pow(k) % p as u64) as u32
                        })
                        .collect(),
                );
            }
            let labels: Vec<u32> = f.values().iter().map(|l| l - 1).collect();
            let best = par::map_chunks(total, 64, |r| {
                let mut coeffs = vec![0u32; k];
                r.map(|code| {
                    let mut c = code;
                    for x in coeffs.iter_mut() {
                        *x = (c % p as usize) as u32;
                        c /= p as usize;
                    }
                    (0..size)
                        .filter(|&x| {
                            let v = tables.iter().zip(&coeffs).fold(0u32, |acc, (t, &c)| (acc + c * t[x]) % p);
                            v != labels[x]
                        })
                        .count()
                })
                .min()
                .unwrap_or(usize::MAX)
            })
            .into_iter()
            .min()
            .unwrap_or(usize::MAX);
            Ok(best as f64 / size as f64)
        }
    }
}

/// Labels attained on each nonempty cell of a factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigPicture {
    pub p: u32,
    pub width: usize,
    pub cells: BTreeMap<CellId, Vec<u32>>,
}

impl BigPicture {
    /// A hand-built map from cells of width `C` to label sets.
    pub fn from_map(p: u32, width: usize, cells: BTreeMap<CellId, Vec<u32>>) -> Result<Self> {
        for (c, labels) in &cells {
            if c.len() != width || c.0.iter().any(|&v| v >= p) {
                return Err(Error::ShapeMismatch(format!("cell {:?} is not in F_{p}^{width}", c.0)));
            }
            if labels.is_empty() {
                return Err(Error::InvalidArgument(format!("cell {:?} has no labels", c.0)));
            }
        }
        Ok(BigPicture { p, width, cells })
    }

    pub fn labels(&self, cell: &CellId) -> Option<&[u32]> {
        self.cells.get(cell).map(Vec::as_slice)
    }
}

pub fn big_picture(f: &FunctionTable, b: &PolynomialFactor) -> Result<BigPicture> {
    let part = CellPartition::new(b)?;
    let mut sets: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    for (x, &label) in f.values().iter().enumerate() {
        sets.entry(part.cell_of()[x]).or_insert_with(|| vec![false; f.range() as usize])[label as usize - 1] = true;
    }
    let p = b.params().p();
    let cells = sets
        .into_iter()
        .map(|(c, s)| {
            let labels = (1..=f.range()).filter(|&l| s[l as usize - 1]).collect();
            (CellId::from_index(c, p, b.len()), labels)
        })
        .collect();
    Ok(BigPicture { p, width: b.len(), cells })
}

/// Whether cells `b_1..b_m`, consistent with `A` and the degrees, exist with
/// `sigma_j` among the labels of `b_j`. Depth-first over `j`; each row of
/// the partial image must stay in the projection of its allowed row space.
/// `budget` bounds the number of search nodes.
pub fn partially_induces(g: &BigPicture, degrees: &[usize], ic: &InducedConstraint, budget: u128) -> Result<Outcome<Vec<CellId>>> {
    if degrees.len() != g.width {
        return Err(Error::DimensionMismatch {
            expected: g.width,
            found: degrees.len(),
        });
    }
    let p = g.p;
    if ic.constraint().p() != p {
        return Err(Error::ShapeMismatch("constraint and cells over different fields".into()));
    }
    let m = ic.m();
    let candidates: Vec<Vec<&CellId>> = ic
        .sigma()
        .iter()
        .map(|s| g.cells.iter().filter(|(_, ls)| ls.contains(s)).map(|(c, _)| c).collect())
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return Ok(Outcome::Absent);
    }
    // prefixes[i][j]: span of the allowed rows for degree d_i cut to j + 1 entries
    let mut prefixes = Vec::with_capacity(g.width);
    for &d in degrees {
        let rows = allowed_rows(ic.constraint().forms(), d, p)?;
        let mut per = Vec::with_capacity(m);
        for j in 0..m {
            let mut sb = SpanBasis::new(p);
            for r in &rows {
                sb.insert(&r[..=j]);
            }
            per.push(sb);
        }
        prefixes.push(per);
    }
    let mut search = PartialSearch {
        candidates: &candidates,
        prefixes: &prefixes,
        rows: vec![Vec::with_capacity(m); g.width],
        chosen: Vec::with_capacity(m),
        nodes: 0,
        budget,
    };
    match search.dfs(0) {
        Some(true) => {
            let cells: Vec<CellId> = search.chosen.iter().map(|c| (*c).clone()).collect();
            let images = CellImage::new(cells.iter().map(|c| c.0.clone()).collect())?;
            debug_assert!(crate::forms::consistency_check(ic.constraint(), degrees, &images)?);
            Ok(Outcome::Found(cells))
        }
        Some(false) => Ok(Outcome::Absent),
        None => Ok(Outcome::Inconclusive),
    }
}

struct PartialSearch<'a> {
    candidates: &'a [Vec<&'a CellId>],
    prefixes: &'a [Vec<SpanBasis>],
    rows: Vec<Vec<u32>>,
    chosen: Vec<&'a CellId>,
    nodes: u128,
    budget: u128,
}

impl<'a> PartialSearch<'a> {
    /// `None` when the node budget runs out.
    fn dfs(&mut self, j: usize) -> Option<bool> {
        if j == self.candidates.len() {
            return Some(true);
        }
        for &cell in &self.candidates[j] {
            self.nodes += 1;
            if self.nodes > self.budget {
                return None;
            }
            let ok = self.rows.iter_mut().zip(self.prefixes).zip(&cell.0).all(|((row, pre), &v)| {
                row.push(v);
                pre[j].contains(row)
            });
            if ok {
                self.chosen.push(cell);
                match self.dfs(j + 1) {
                    Some(true) => return Some(true),
                    None => return None,
                    Some(false) => {}
                }
                self.chosen.pop();
            }
            for row in &mut self.rows {
                row.truncate(j);
            }
        }
        Some(false)
    }
}

/// Smallest `m` over members partially induced by `g`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinInduced {
    pub size: Option<usize>,
    /// Some member was undecided within the budget; `size` is then `None`.
    pub inconclusive: bool,
}

pub fn min_partially_induced_size(g: &BigPicture, degrees: &[usize], collection: &ConstraintCollection, budget: u128) -> Result<MinInduced> {
    let mut best: Option<usize> = None;
    for ic in collection.members() {
        match partially_induces(g, degrees, ic, budget)? {
            Outcome::Found(_) => best = Some(best.map_or(ic.m(), |b| b.min(ic.m()))),
            Outcome::Absent => {}
            Outcome::Inconclusive => {
                return Ok(MinInduced {
                    size: None,
                    inconclusive: true,
                })
            }
        }
    }
    Ok(MinInduced {
        size: best,
        inconclusive: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::cleanup;
    use crate::forms::{make_concise, AffineConstraint};
    use crate::poly::Polynomial;
    use proptest::prelude::*;
    use rand::Rng;

    const BUDGET: u128 = 1 << 24;

    fn params(p: u32, n: usize) -> FieldParams {
        FieldParams::new(p, n).unwrap()
    }

    fn random_function(rng: &mut impl Rng, fp: FieldParams, r: u32) -> FunctionTable {
        FunctionTable::new(fp, r, (0..fp.size()).map(|_| rng.random_range(1..=r)).collect()).unwrap()
    }

    fn blr(sigma: [u32; 4]) -> InducedConstraint {
        InducedConstraint::new(AffineConstraint::derivative(2).unwrap(), sigma.to_vec()).unwrap()
    }

    /// Every tuple, checked by evaluating each form from scratch.
    fn brute_hits(f: &FunctionTable, ic: &InducedConstraint) -> Vec<Vec<usize>> {
        let size = f.params().size();
        let ell = ic.ell();
        let mut out = Vec::new();
        for t in 0..size.pow(ell as u32) {
            let xs: Vec<FieldVec> = (0..ell).map(|k| f.params().vector_at(t / size.pow((ell - 1 - k) as u32) % size)).collect();
            let ok = ic.constraint().forms().iter().zip(ic.sigma()).all(|(a, &s)| {
                let y = crate::forms::eval_form(a, &xs, f.params()).unwrap();
                f.label_at(&y).unwrap() == s
            });
            if ok {
                out.push(xs.iter().map(|x| f.params().index_of(x).unwrap()).collect());
            }
        }
        out
    }

    #[test]
    fn occurrence_examples() {
        let fp = params(2, 3);
        let c = FunctionTable::constant(fp, 2, 2).unwrap();
        let w = find_induced_occurrence(&c, &blr([2, 2, 2, 2]), SearchMode::Exhaustive, BUDGET, 0).unwrap();
        assert_eq!(w.found().unwrap().points(), &[fp.vector_at(0), fp.vector_at(0), fp.vector_at(0)]);
        let none = find_induced_occurrence(&c, &blr([2, 1, 2, 2]), SearchMode::Exhaustive, BUDGET, 0).unwrap();
        assert_eq!(none, Outcome::Absent);
        let none = find_induced_occurrence(&c, &blr([2, 1, 2, 2]), SearchMode::Randomized, 10, 0).unwrap();
        assert_eq!(none, Outcome::Absent);
        let err = find_induced_occurrence(&c, &blr([2, 2, 2, 2]), SearchMode::Exhaustive, 100, 0).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn occurrence_matches_full_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fp = params(2, 3);
        for _ in 0..30 {
            let f = random_function(&mut rng, fp, 2);
            let sigma = [rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(1..=2)];
            let ic = blr(sigma);
            let hits = brute_hits(&f, &ic);
            let got = find_induced_occurrence(&f, &ic, SearchMode::Exhaustive, BUDGET, 0).unwrap();
            match got {
                Outcome::Found(w) => {
                    let idx: Vec<usize> = w.points().iter().map(|x| fp.index_of(x).unwrap()).collect();
                    assert_eq!(Some(&idx), hits.first());
                }
                Outcome::Absent => assert!(hits.is_empty()),
                Outcome::Inconclusive => unreachable!(),
            }
            let rho = violation_density(&f, &ic, BUDGET).unwrap();
            assert_eq!(rho, hits.len() as f64 / 512.0);
            if let Outcome::Found(w) = find_induced_occurrence(&f, &ic, SearchMode::Randomized, 5000, 3).unwrap() {
                assert!(Witness::new(&f, &ic, w.points().to_vec()).is_ok());
            }
        }
    }

    #[test]
    fn density_examples() {
        let fp = params(3, 2);
        let c = FunctionTable::constant(fp, 3, 3).unwrap();
        let ic = InducedConstraint::new(AffineConstraint::derivative(3).unwrap(), vec![3; 4]).unwrap();
        assert_eq!(violation_density(&c, &ic, BUDGET).unwrap(), 1.0);
        let lin = FunctionTable::from_fn(fp, 3, |x| (x.coords()[0] + 2 * x.coords()[1] + 1) % 3 + 1).unwrap();
        for ic in ConstraintCollection::degree_one(3).unwrap().members() {
            assert_eq!(violation_density(&lin, ic, BUDGET).unwrap(), 0.0);
        }
    }

    #[test]
    fn witness_rejects_wrong_points() {
        let fp = params(2, 2);
        let f = FunctionTable::from_fn(fp, 2, |x| x.coords()[0] + 1).unwrap();
        let pts = vec![fp.vector_at(0), fp.vector_at(1), fp.vector_at(2)];
        assert!(Witness::new(&f, &blr([2, 2, 2, 2]), pts).is_err());
    }

    #[test]
    fn tester_examples() {
        let fp = params(2, 5);
        let family = ConstraintCollection::degree_one(2).unwrap();
        let lin = FunctionTable::from_fn(fp, 2, |x| (x.coords()[1] + x.coords()[4]) % 2 + 1).unwrap();
        let r = affine_subspace_test(&lin, &family, None, 1000, 1, BUDGET).unwrap();
        assert_eq!((r.verdict, r.rejections), (Verdict::Accept, 0));
        let empty = ConstraintCollection::new(vec![]);
        let f = FunctionTable::from_fn(fp, 2, |x| x.coords()[0] * x.coords()[1] + 1).unwrap();
        assert_eq!(affine_subspace_test(&f, &empty, None, 50, 1, BUDGET).unwrap().verdict, Verdict::Accept);
        let r = affine_subspace_test(&f, &family, None, 200, 1, BUDGET).unwrap();
        assert_eq!(r.verdict, Verdict::Reject);
        let rej = r.witness.unwrap();
        assert!(Witness::new(&f, &family.members()[rej.member], rej.witness.points().to_vec()).is_ok());
        let tiny = affine_subspace_test(&f, &family, None, 20, 1, 2).unwrap();
        assert_eq!(tiny.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn tester_is_deterministic_across_threads() {
        let fp = params(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_function(&mut rng, fp, 2);
        let family = ConstraintCollection::degree_one(2).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| affine_subspace_test(&f, &family, None, 300, 9, BUDGET).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn distance_examples() {
        let fp = params(2, 2);
        let prod = FunctionTable::from_fn(fp, 2, |x| x.coords()[0] * x.coords()[1] + 1).unwrap();
        assert_eq!(distance_to_enumerable_property(&prod, &Property::DegreeAtMost(1), BUDGET).unwrap(), 0.25);
        let lin = FunctionTable::from_fn(fp, 2, |x| (x.coords()[0] + x.coords()[1]) % 2 + 1).unwrap();
        assert_eq!(distance_to_enumerable_property(&lin, &Property::DegreeAtMost(1), BUDGET).unwrap(), 0.0);
        let single = Property::Explicit(vec![lin.clone()]);
        assert_eq!(
            distance_to_enumerable_property(&prod, &single, BUDGET).unwrap(),
            crate::field::distance(&prod, &lin).unwrap()
        );
        let r3 = FunctionTable::constant(fp, 3, 1).unwrap();
        assert!(distance_to_enumerable_property(&r3, &Property::DegreeAtMost(1), BUDGET).is_err());
        let q = FunctionTable::from_fn(params(3, 2), 3, |x| (x.coords()[0] * x.coords()[0] + 1) % 3 + 1).unwrap();
        assert_eq!(distance_to_enumerable_property(&q, &Property::DegreeAtMost(2), BUDGET).unwrap(), 0.0);
    }

    #[test]
    fn big_picture_examples() {
        let fp = params(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_function(&mut rng, fp, 3);
        let g = big_picture(&f, &PolynomialFactor::trivial(fp)).unwrap();
        assert_eq!(g.cells.len(), 1);
        assert_eq!(g.labels(&CellId(vec![])).unwrap(), f.attained_labels().as_slice());

        let b = PolynomialFactor::linear(fp, &[vec![1, 0, 0]]).unwrap();
        let g = big_picture(&f, &b).unwrap();
        for v in 0..2u32 {
            let mut want: Vec<u32> = (0..8).filter(|&x| fp.vector_at(x).coords()[0] == v).map(|x| f.label(x)).collect();
            want.sort();
            want.dedup();
            assert_eq!(g.labels(&CellId(vec![v])).unwrap(), want.as_slice());
        }
        let m = FunctionTable::from_fn(fp, 2, |x| x.coords()[0] + 1).unwrap();
        assert!(big_picture(&m, &b).unwrap().cells.values().all(|s| s.len() == 1));
    }

    fn full_picture(p: u32, width: usize, r: u32) -> BigPicture {
        let cells = (0..(p as usize).pow(width as u32))
            .map(|c| (CellId::from_index(c, p, width), (1..=r).collect()))
            .collect();
        BigPicture::from_map(p, width, cells).unwrap()
    }

    #[test]
    fn partial_induction_examples() {
        let ic = blr([1, 2, 2, 2]);
        let g = full_picture(2, 2, 2);
        let cells = partially_induces(&g, &[1, 2], &ic, BUDGET).unwrap();
        let cells = cells.found().unwrap();
        assert!(cells.iter().all(|c| c == &cells[0]));

        let mut cells = BTreeMap::new();
        cells.insert(CellId(vec![0]), vec![1]);
        cells.insert(CellId(vec![1]), vec![1]);
        let g = BigPicture::from_map(2, 1, cells).unwrap();
        assert_eq!(partially_induces(&g, &[1], &ic, BUDGET).unwrap(), Outcome::Absent);
        assert_eq!(partially_induces(&full_picture(2, 3, 2), &[1, 1, 1], &ic, 0).unwrap(), Outcome::Inconclusive);
    }

    #[test]
    fn partial_induction_respects_consistency() {
        // one cell per label, on a single linear polynomial: labels 1 and 2
        // sit on different cells, so (1, 2, 2, 2) needs b1 + b4 = b2 + b3
        // with b1 != b2 = b3 = b4, which is inconsistent in degree 1
        let mut cells = BTreeMap::new();
        cells.insert(CellId(vec![0]), vec![1]);
        cells.insert(CellId(vec![1]), vec![2]);
        let g = BigPicture::from_map(2, 1, cells).unwrap();
        assert_eq!(partially_induces(&g, &[1], &blr([1, 2, 2, 2]), BUDGET).unwrap(), Outcome::Absent);
        assert!(partially_induces(&g, &[1], &blr([1, 2, 2, 1]), BUDGET).unwrap().found().is_some());
    }

    #[test]
    fn partial_induction_agrees_with_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..40 {
            let p = 2;
            let width = rng.random_range(1..=2usize);
            let degrees: Vec<usize> = (0..width).map(|_| rng.random_range(1..=2)).collect();
            let ncells = 1usize << width;
            let mut cells = BTreeMap::new();
            for c in 0..ncells {
                if !rng.random_bool(0.8) {
                    continue;
                }
                let mut ls: Vec<u32> = (1..=2).filter(|_| rng.random_bool(0.5)).collect();
                if ls.is_empty() {
                    ls.push(1);
                }
                cells.insert(CellId::from_index(c, p, width), ls);
            }
            if cells.is_empty() {
                continue;
            }
            let g = BigPicture::from_map(p, width, cells).unwrap();
            let ic = blr([rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(1..=2)]);
            let keys: Vec<&CellId> = g.cells.keys().collect();
            let mut any = false;
            for code in 0..keys.len().pow(4) {
                let pick: Vec<&CellId> = (0..4).map(|j| keys[code / keys.len().pow(j) % keys.len()]).collect();
                if (0..4).any(|j| !g.cells[pick[j]].contains(&ic.sigma()[j])) {
                    continue;
                }
                let images = CellImage::new(pick.iter().map(|c| c.0.clone()).collect()).unwrap();
                if crate::forms::consistency_check(ic.constraint(), &degrees, &images).unwrap() {
                    any = true;
                    break;
                }
            }
            let got = partially_induces(&g, &degrees, &ic, BUDGET).unwrap();
            assert_eq!(got.found().is_some(), any);
        }
    }

    #[test]
    fn induction_implies_partial_induction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fp = params(2, 4);
        let family = ConstraintCollection::degree_one(2).unwrap();
        for _ in 0..20 {
            let f = random_function(&mut rng, fp, 2);
            let b = PolynomialFactor::new(
                fp,
                vec![
                    Polynomial::linear(2, &[1, 1, 0, 0]),
                    Polynomial::product(2, 4, &[1, 3]).unwrap(),
                ],
            )
            .unwrap();
            let g = big_picture(&f, &b).unwrap();
            for ic in family.members() {
                if find_induced_occurrence(&f, ic, SearchMode::Exhaustive, BUDGET, 0).unwrap().found().is_some() {
                    assert!(partially_induces(&g, &b.degrees(), ic, BUDGET).unwrap().found().is_some());
                }
            }
        }
    }

    #[test]
    fn cleanup_output_picture_still_induces() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let fp = params(2, 4);
        let family = ConstraintCollection::degree_one(2).unwrap();
        let b = PolynomialFactor::linear(fp, &[vec![1, 0, 1, 0]]).unwrap();
        let fine = b.with(Polynomial::linear(2, &[0, 1, 0, 0])).unwrap();
        let mut checked = 0;
        for _ in 0..30 {
            let f = random_function(&mut rng, fp, 2);
            let big = distance_to_enumerable_property(&f, &Property::DegreeAtMost(1), BUDGET).unwrap();
            let cleaned = cleanup(&f, &b, &fine, &[1], 0.05).unwrap();
            if big <= 0.05 * 5.0 {
                continue;
            }
            let g = big_picture(&cleaned, &b).unwrap();
            for ic in family.members() {
                if find_induced_occurrence(&cleaned, ic, SearchMode::Exhaustive, BUDGET, 0).unwrap().found().is_some() {
                    assert!(partially_induces(&g, &b.degrees(), ic, BUDGET).unwrap().found().is_some());
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn min_size_examples() {
        let g = full_picture(2, 1, 2);
        let four = blr([1, 1, 1, 1]);
        let one = ConstraintCollection::new(vec![four.clone()]);
        assert_eq!(min_partially_induced_size(&g, &[1], &one, BUDGET).unwrap().size, Some(4));
        let mut cells = BTreeMap::new();
        cells.insert(CellId(vec![0]), vec![1]);
        let g1 = BigPicture::from_map(2, 1, cells).unwrap();
        let none = ConstraintCollection::new(vec![blr([2, 2, 2, 2])]);
        assert_eq!(min_partially_induced_size(&g1, &[1], &none, BUDGET).unwrap().size, None);
        // 6 forms over l = 3: the derivative pattern plus x1 + x2 + x3 twice
        let six = InducedConstraint::new(
            AffineConstraint::new(2, vec![vec![1, 0, 0], vec![1, 1, 0], vec![1, 0, 1], vec![1, 1, 1], vec![1, 1, 1], vec![1, 0, 0]]).unwrap(),
            vec![1; 6],
        )
        .unwrap();
        let both = ConstraintCollection::new(vec![six.clone(), four.clone()]);
        assert!(partially_induces(&g, &[1], &six, BUDGET).unwrap().found().is_some());
        assert!(partially_induces(&g, &[1], &four, BUDGET).unwrap().found().is_some());
        assert_eq!(min_partially_induced_size(&g, &[1], &both, BUDGET).unwrap().size, Some(4));
    }

    #[test]
    fn conciseness_preserves_freeness() {
        let fp = params(2, 2);
        // x1, x1, x1 + x2 + x3 + x4 with repeated columns: l = 4 > m = 3
        let rows = vec![vec![1, 0, 0, 0], vec![1, 1, 1, 0], vec![1, 0, 1, 1]];
        let a = AffineConstraint::new(2, rows).unwrap();
        for sigma in [[1, 1, 2], [1, 2, 2], [2, 1, 1]] {
            let ic = InducedConstraint::new(a.clone(), sigma.to_vec()).unwrap();
            let c = make_concise(&ic).unwrap();
            assert!(c.is_concise());
            for code in 0..16u32 {
                let f = FunctionTable::new(fp, 2, (0..4).map(|x| (code >> x) & 1).map(|b| b + 1).collect()).unwrap();
                let one = ConstraintCollection::new(vec![ic.clone()]);
                let other = ConstraintCollection::new(vec![c.clone()]);
                assert_eq!(is_free(&f, &one, BUDGET).unwrap(), is_free(&f, &other, BUDGET).unwrap());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn degree_one_tables_are_never_rejected(seed in 0u64..1000, coeffs in proptest::collection::vec(0u32..2, 5)) {
            let fp = params(2, 4);
            let f = FunctionTable::from_fn(fp, 2, |x| {
                (coeffs[4] + x.coords().iter().zip(&coeffs).map(|(a, b)| a * b).sum::<u32>()) % 2 + 1
            }).unwrap();
            let r = affine_subspace_test(&f, &ConstraintCollection::degree_one(2).unwrap(), None, 50, seed, BUDGET).unwrap();
            prop_assert_eq!(r.rejections, 0);
        }

        #[test]
        fn big_picture_covers_image(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fp = params(3, 2);
            let f = random_function(&mut rng, fp, 4);
            let b = PolynomialFactor::linear(fp, &[vec![1, 2]]).unwrap();
            let g = big_picture(&f, &b).unwrap();
            let mut union: Vec<u32> = g.cells.values().flatten().copied().collect();
            union.sort();
            union.dedup();
            prop_assert_eq!(union, f.attained_labels());
        }
    }
}
