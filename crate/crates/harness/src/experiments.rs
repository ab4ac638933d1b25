//! One experiment per acceptance criterion. Each returns a report carrying
//! its verdict, the tolerances and budgets used, and summary statistics.

use std::collections::BTreeMap;

use affinv::decompose::{cleanup, cleanup_bound, select_subcell, strong_decompose, super_decompose, DecompositionConfig, Schedule};
use affinv::field::{distance, FieldParams, FunctionTable, RealTable};
use affinv::forms::{
    change_of_view, consistency_check, cs_complexity, dimension_d, juxtapose, make_concise, AffineConstraint, CellImage, Complexity,
    ComplexityBudget, ConstraintCollection, InducedConstraint, LinearForm,
};
use affinv::gowers::{form_average, gowers_norm, GowersMethod};
use affinv::linalg::Matrix;
use affinv::poly::{bias_certificate, pattern_count, predict_pattern, CellId, Polynomial, PolynomialFactor};
use affinv::tester::{affine_subspace_test, distance_to_enumerable_property, is_free, Property};
use affinv::{Result, DEFAULT_ENUMERATION_BUDGET};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{fixtures, oracles};

/// Which criterion to run, and its seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub criterion: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub seed: u64,
    pub passed: bool,
    pub summary: String,
    pub tolerances: BTreeMap<String, f64>,
    pub budgets: BTreeMap<String, f64>,
    pub stats: BTreeMap<String, f64>,
}

pub const CRITERIA: [(u32, &str); 11] = [
    (1, "counting-lemma"),
    (2, "pattern-probability"),
    (3, "cell-size-band"),
    (4, "dimension-invariance"),
    (5, "conciseness"),
    (6, "decomposition-contract"),
    (7, "subcell-selection"),
    (8, "cleanup-bound"),
    (9, "tester-one-sided"),
    (10, "tester-rejection-rate"),
    (11, "gowers-ladder"),
];

pub const DEFAULT_SEED: u64 = 20240601;

pub fn default_suite() -> Vec<ExperimentSpec> {
    CRITERIA
        .iter()
        .map(|&(id, name)| ExperimentSpec {
            name: name.to_string(),
            criterion: id,
            seed: DEFAULT_SEED,
        })
        .collect()
}

pub fn run(spec: &ExperimentSpec) -> Result<CriterionReport> {
    let seed = spec.seed;
    match spec.criterion {
        1 => counting_lemma(seed),
        2 => pattern_probability(seed),
        3 => cell_size_band(seed),
        4 => dimension_invariance(seed),
        5 => conciseness(seed),
        6 => decomposition_contract(seed),
        7 => subcell_selection(seed),
        8 => cleanup_bound_check(seed),
        9 => tester_one_sided(seed),
        10 => tester_rejection_rate(seed),
        11 => gowers_ladder(seed),
        other => Err(affinv::Error::InvalidArgument(format!("no criterion {other}"))),
    }
}

struct Report {
    id: u32,
    seed: u64,
    tolerances: BTreeMap<String, f64>,
    budgets: BTreeMap<String, f64>,
    stats: BTreeMap<String, f64>,
}

impl Report {
    fn new(id: u32, seed: u64) -> Self {
        Report {
            id,
            seed,
            tolerances: BTreeMap::new(),
            budgets: BTreeMap::new(),
            stats: BTreeMap::new(),
        }
    }

    fn tol(mut self, k: &str, v: f64) -> Self {
        self.tolerances.insert(k.into(), v);
        self
    }

    fn budget(mut self, k: &str, v: f64) -> Self {
        self.budgets.insert(k.into(), v);
        self
    }

    fn stat(&mut self, k: &str, v: f64) {
        self.stats.insert(k.into(), v);
    }

    fn finish(self, passed: bool, summary: String) -> CriterionReport {
        CriterionReport {
            id: self.id,
            name: CRITERIA[self.id as usize - 1].1.to_string(),
            seed: self.seed,
            passed,
            summary,
            tolerances: self.tolerances,
            budgets: self.budgets,
            stats: self.stats,
        }
    }
}

fn stream(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// Random normal-form rows: the first is `X_1`, the others start with 1.
fn random_rows(rng: &mut impl Rng, p: u32, ell: usize, m: usize) -> Vec<Vec<u32>> {
    let mut rows = vec![(0..ell).map(|k| (k == 0) as u32).collect::<Vec<u32>>()];
    for _ in 1..m {
        let mut r: Vec<u32> = (0..ell).map(|_| rng.random_range(0..p)).collect();
        r[0] = 1;
        rows.push(r);
    }
    rows
}

fn random_invertible(rng: &mut impl Rng, p: u32, ell: usize) -> Matrix {
    loop {
        let rows: Vec<Vec<u32>> = (0..ell).map(|_| (0..ell).map(|_| rng.random_range(0..p)).collect()).collect();
        let m = Matrix::from_rows(p, ell, &rows).expect("square");
        if m.is_invertible() {
            return m;
        }
    }
}

fn bounded_table(rng: &mut impl Rng, fp: FieldParams, s: usize) -> Result<RealTable> {
    let p = fp.p();
    match rng.random_range(0..3) {
        0 => RealTable::new(fp, (0..fp.size()).map(|_| rng.random_range(-1.0..=1.0)).collect()),
        1 => RealTable::new(fp, (0..fp.size()).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()),
        _ => {
            let d = rng.random_range(1..=(s as u32 + 1).min(3));
            let q = fixtures::random_polynomial(p, fp.n(), d, rng)?;
            let vals = q.values(&fp)?;
            RealTable::new(fp, vals.iter().map(|&v| (2.0 * std::f64::consts::PI * v as f64 / p as f64).cos()).collect())
        }
    }
}

fn counting_lemma(seed: u64) -> Result<CriterionReport> {
    const INSTANCES: usize = 200;
    const TOL: f64 = 1e-9;
    let mut rep = Report::new(1, seed).tol("slack", TOL).tol("oracle_agreement", TOL).budget("enumeration", DEFAULT_ENUMERATION_BUDGET as f64);
    let (mut done, mut attempts, mut violations, mut mismatches) = (0usize, 0u64, 0usize, 0usize);
    let mut max_ratio: f64 = 0.0;
    let mut by_s = [0usize; 4];
    while done < INSTANCES {
        let mut rng = stream(seed, attempts);
        attempts += 1;
        let p = if rng.random_bool(0.6) { 2 } else { 3 };
        let n = if p == 2 { rng.random_range(2..=4) } else { rng.random_range(1..=3) };
        let ell = rng.random_range(2..=3);
        let m = rng.random_range(2..=4);
        let forms: Vec<LinearForm> = random_rows(&mut rng, p, ell, m).into_iter().map(|r| LinearForm::new(r, p)).collect();
        let Complexity::Exact(s) = cs_complexity(&forms, p, ComplexityBudget::default())? else {
            continue;
        };
        let fp = FieldParams::new(p, n)?;
        let fs: Vec<RealTable> = (0..m).map(|_| bounded_table(&mut rng, fp, s)).collect::<Result<_>>()?;
        let lib = form_average(&fs, &forms, DEFAULT_ENUMERATION_BUDGET)?;
        let brute = oracles::form_average(&fs, &forms);
        if (lib - brute).abs() > TOL {
            mismatches += 1;
        }
        let bound = fs
            .iter()
            .map(|f| gowers_norm(f, s + 1, GowersMethod::default()).map(|g| g.value))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if brute.abs() > bound + TOL {
            violations += 1;
        }
        if bound > 0.0 {
            max_ratio = max_ratio.max(brute.abs() / bound);
        }
        by_s[s.min(3)] += 1;
        done += 1;
    }
    rep.stat("instances", done as f64);
    rep.stat("violations", violations as f64);
    rep.stat("oracle_mismatches", mismatches as f64);
    rep.stat("max_ratio", max_ratio);
    for (s, &c) in by_s.iter().enumerate() {
        rep.stat(&format!("complexity_{s}"), c as f64);
    }
    let passed = violations == 0 && mismatches == 0;
    Ok(rep.finish(
        passed,
        format!("{done} instances, {violations} violations, {mismatches} oracle mismatches, max |avg|/bound {max_ratio:.4}"),
    ))
}

fn pattern_probability(seed: u64) -> Result<CriterionReport> {
    const PER_FACTOR: usize = 40;
    let mut rep = Report::new(2, seed).tol("exact", 0.0).budget("enumeration", DEFAULT_ENUMERATION_BUDGET as f64);
    let a = AffineConstraint::derivative(2)?;
    let (mut consistent, mut inconsistent, mut failures) = (0usize, 0usize, 0usize);
    let mut case = 0u64;
    for (p, n) in [(2u32, 4usize), (3, 3)] {
        let a = if p == 2 { a.clone() } else { AffineConstraint::derivative(3)? };
        let s_rank = oracles::rank(&a);
        for c in 1..=2usize {
            case += 1;
            let b = fixtures::linear_factor(p, n, c, seed.wrapping_add(case))?;
            let (hist, total) = oracles::pattern_histogram(&b, &a);
            let s = c * s_rank;
            let ncell = (p as usize).pow(c as u32);
            let mut rng = stream(seed, case);
            let (mut k_cons, mut k_inc) = (0, 0);
            let mut tries = 0;
            while (k_cons < PER_FACTOR || k_inc < PER_FACTOR) && tries < 20_000 {
                tries += 1;
                let imgs: Vec<Vec<u32>> = (0..a.m()).map(|_| CellId::from_index(rng.random_range(0..ncell), p, c).0).collect();
                let images = CellImage::new(imgs.clone())?;
                let cons = consistency_check(&a, &vec![1; c], &images)?;
                if (cons && k_cons >= PER_FACTOR) || (!cons && k_inc >= PER_FACTOR) {
                    continue;
                }
                let (count, tot) = pattern_count(&b, &a, &images, DEFAULT_ENUMERATION_BUDGET)?;
                let oracle = hist.get(&imgs).copied().unwrap_or(0);
                let predicted = predict_pattern(&b, &a, &images, None)?;
                let ok_exact = if cons { count * (p as u64).pow(s as u32) == tot } else { count == 0 };
                if !ok_exact || count != oracle || tot != total || predicted.consistent != cons {
                    failures += 1;
                }
                if cons {
                    k_cons += 1;
                } else {
                    k_inc += 1;
                }
            }
            consistent += k_cons;
            inconsistent += k_inc;
        }
    }
    rep.stat("consistent", consistent as f64);
    rep.stat("inconsistent", inconsistent as f64);
    rep.stat("failures", failures as f64);
    let passed = failures == 0 && consistent >= 50 && inconsistent >= 50;
    Ok(rep.finish(
        passed,
        format!("{consistent} consistent tuples at p^-s, {inconsistent} inconsistent at 0, {failures} failures"),
    ))
}

fn cell_size_band(seed: u64) -> Result<CriterionReport> {
    const INSTANCES: usize = 24;
    let mut rep = Report::new(3, seed).tol("bias_agreement", 1e-12).budget("bias_combinations", 16.0);
    let (mut violations, mut failures) = (0usize, 0usize);
    let mut tightest: f64 = 0.0;
    for i in 0..INSTANCES as u64 {
        let mut rng = stream(seed, i);
        let n = rng.random_range(4..=10);
        let c = rng.random_range(1..=4);
        let b = fixtures::random_factor(2, n, c, 2, seed.wrapping_add(i))?;
        let cert = bias_certificate(&b, 16, 0)?;
        if !cert.exhaustive || (cert.max_bias - oracles::max_bias(&b)).abs() > 1e-12 {
            failures += 1;
        }
        let counts = oracles::cell_counts(&b);
        for code in 0..1usize << c {
            let cell = CellId::from_index(code, 2, c).0;
            let k = counts.get(&cell).copied().unwrap_or(0);
            // |k / 2^n - 2^-C| = |k 2^C - 2^n| / 2^(n+C), exact in f64 at these sizes
            let lhs = ((k as i64) * (1i64 << c) - (1i64 << n)).unsigned_abs() as f64 / (1u64 << (n + c)) as f64;
            if lhs > cert.max_bias {
                violations += 1;
            }
            if cert.max_bias > 0.0 {
                tightest = tightest.max(lhs / cert.max_bias);
            }
        }
    }
    rep.stat("factors", INSTANCES as f64);
    rep.stat("violations", violations as f64);
    rep.stat("certificate_failures", failures as f64);
    rep.stat("max_lhs_over_bias", tightest);
    Ok(rep.finish(
        violations == 0 && failures == 0,
        format!("{INSTANCES} factors, {violations} band violations, {failures} certificate failures, max lhs/bias {tightest:.4}"),
    ))
}

fn dimension_invariance(seed: u64) -> Result<CriterionReport> {
    let mut rep = Report::new(4, seed).tol("exact", 0.0);
    let (mut view_fail, mut jux_fail) = (0usize, 0usize);
    const VIEWS: u64 = 120;
    const JUX: u64 = 60;
    for i in 0..VIEWS {
        let mut rng = stream(seed, i);
        let p = [2, 3, 5][rng.random_range(0..3)];
        let ell = rng.random_range(1..=4);
        let m = rng.random_range(1..=5);
        let d = rng.random_range(1..=3);
        let forms: Vec<LinearForm> = random_rows(&mut rng, p, ell, m).into_iter().map(|r| LinearForm::new(r, p)).collect();
        let mat = random_invertible(&mut rng, p, ell);
        let viewed = change_of_view(&forms, &mat)?;
        let (a, b) = (dimension_d(&forms, d, p)?, dimension_d(&viewed, d, p)?);
        if a != b || a != oracles::dimension(p, &forms, d) || b != oracles::dimension(p, &viewed, d) {
            view_fail += 1;
        }
    }
    for i in 0..JUX {
        let mut rng = stream(seed ^ 0x5eed, i);
        let p = [2, 3][rng.random_range(0..2)];
        let ell = rng.random_range(1..=3);
        let m = rng.random_range(1..=4);
        let d = rng.random_range(1..=3);
        let a = AffineConstraint::new(p, random_rows(&mut rng, p, ell, m))?;
        let q = dimension_d(a.forms(), d, p)?;
        let doubled = juxtapose(&a);
        let got = dimension_d(&doubled, d, p)?;
        if got != 2 * q - 1 || got != oracles::dimension(p, &doubled, d) {
            jux_fail += 1;
        }
    }
    rep.stat("view_pairs", VIEWS as f64);
    rep.stat("juxtapositions", JUX as f64);
    rep.stat("view_failures", view_fail as f64);
    rep.stat("juxtaposition_failures", jux_fail as f64);
    Ok(rep.finish(
        view_fail == 0 && jux_fail == 0,
        format!("{VIEWS} changes of view ({view_fail} failures), {JUX} juxtapositions at 2q-1 ({jux_fail} failures)"),
    ))
}

fn conciseness(seed: u64) -> Result<CriterionReport> {
    const INSTANCES: u64 = 12;
    let mut rep = Report::new(5, seed).tol("exact", 0.0).budget("enumeration", DEFAULT_ENUMERATION_BUDGET as f64);
    let fp = FieldParams::new(2, 2)?;
    let (mut mismatches, mut lib_mismatches, mut changed_ell) = (0usize, 0usize, 0usize);
    for i in 0..INSTANCES {
        let mut rng = stream(seed, i);
        let ell = rng.random_range(3..=5);
        let m = rng.random_range(1..ell);
        let a = AffineConstraint::new(2, random_rows(&mut rng, 2, ell, m))?;
        let sigma: Vec<u32> = (0..m).map(|_| rng.random_range(1..=2)).collect();
        let ic = InducedConstraint::new(a, sigma)?;
        let concise = make_concise(&ic)?;
        if concise.ell() != ic.ell() {
            changed_ell += 1;
        }
        let before = ConstraintCollection::new(vec![ic]);
        let after = ConstraintCollection::new(vec![concise]);
        for code in 0..16u32 {
            let f = FunctionTable::new(fp, 2, (0..4).map(|x| ((code >> x) & 1) + 1).collect())?;
            let (x, y) = (oracles::is_free(&f, &before), oracles::is_free(&f, &after));
            if x != y {
                mismatches += 1;
            }
            if is_free(&f, &before, DEFAULT_ENUMERATION_BUDGET)? != x || is_free(&f, &after, DEFAULT_ENUMERATION_BUDGET)? != y {
                lib_mismatches += 1;
            }
        }
    }
    rep.stat("constraints", INSTANCES as f64);
    rep.stat("mismatches", mismatches as f64);
    rep.stat("library_mismatches", lib_mismatches as f64);
    rep.stat("ell_reduced", changed_ell as f64);
    Ok(rep.finish(
        mismatches == 0 && lib_mismatches == 0,
        format!("{INSTANCES} non-concise constraints x 16 functions, {mismatches} freeness mismatches"),
    ))
}

fn linear_part(q: &Polynomial) -> Vec<u32> {
    let mut v = vec![0; q.n()];
    for (e, c) in q.terms() {
        if let Some(i) = e.iter().position(|&x| x == 1) {
            if e.iter().sum::<u32>() == 1 {
                v[i] = c;
            }
        }
    }
    v
}

fn decomposition_contract(seed: u64) -> Result<CriterionReport> {
    const INSTANCES: u64 = 20;
    const TOL: f64 = 1e-9;
    let cfg = DecompositionConfig::new(1);
    let mut rep = Report::new(6, seed)
        .tol("pointwise", TOL)
        .tol("range", TOL)
        .tol("delta", cfg.delta.at(0))
        .budget("gowers", cfg.gowers_budget as f64)
        .budget("search", cfg.search_budget as f64);
    let mut failed: BTreeMap<&str, usize> = ["sum", "conditional", "gowers", "l2", "range", "rank"].iter().map(|&k| (k, 0)).collect();
    let mut worst_u2: f64 = 0.0;
    let mut sizes = Vec::new();
    let fp = FieldParams::new(2, 5)?;
    for i in 0..INSTANCES {
        let r = 2 + (i % 2) as u32;
        let f = fixtures::random_function(2, 5, r, seed.wrapping_add(i))?;
        let d = strong_decompose(&f, &cfg, &PolynomialFactor::trivial(fp))?;
        let eta = cfg.eta.at(d.refined.len());
        sizes.push(d.refined.len() as f64);
        for (l, slice) in f.slices().iter().enumerate() {
            let e = oracles::conditional_expectation(slice, &d.refined);
            let (f1, f2, f3) = (&d.f1[l], &d.f2[l], &d.f3[l]);
            for x in 0..fp.size() {
                if (f1.get(x) + f2.get(x) + f3.get(x) - slice.get(x)).abs() > TOL {
                    *failed.get_mut("sum").unwrap() += 1;
                }
                if (f1.get(x) - e[x]).abs() > TOL {
                    *failed.get_mut("conditional").unwrap() += 1;
                }
                let in01 = |v: f64| (-TOL..=1.0 + TOL).contains(&v);
                let in11 = |v: f64| (-1.0 - TOL..=1.0 + TOL).contains(&v);
                if !in01(f1.get(x)) || !in01(f1.get(x) + f3.get(x)) || !in11(f2.get(x)) || !in11(f3.get(x)) {
                    *failed.get_mut("range").unwrap() += 1;
                }
            }
            let u2 = oracles::gowers_norm(f2, 2);
            worst_u2 = worst_u2.max(u2 / eta);
            if u2 > eta + TOL {
                *failed.get_mut("gowers").unwrap() += 1;
            }
            let l2 = (f3.values().iter().map(|v| v * v).sum::<f64>() / fp.size() as f64).sqrt();
            if l2 > cfg.delta.at(0) + TOL {
                *failed.get_mut("l2").unwrap() += 1;
            }
        }
        let lin: Vec<Vec<u32>> = d.refined.polys().iter().map(linear_part).collect();
        if oracles::span_dimension(2, &lin) != d.refined.len() || d.refined.degree() > 1 {
            *failed.get_mut("rank").unwrap() += 1;
        }
    }
    let total: usize = failed.values().sum();
    for (k, v) in &failed {
        rep.stat(&format!("failures_{k}"), *v as f64);
    }
    rep.stat("tables", INSTANCES as f64);
    rep.stat("max_u2_over_eta", worst_u2);
    rep.stat("min_factor_size", sizes.iter().copied().fold(f64::INFINITY, f64::min));
    rep.stat("mean_factor_size", sizes.iter().sum::<f64>() / sizes.len() as f64);
    Ok(rep.finish(
        total == 0,
        format!("{INSTANCES} tables, {total} bullet failures, max U2/eta {worst_u2:.4}"),
    ))
}

/// The configuration for super decompositions feeding subcell selection.
fn subcell_config(zeta: f64) -> DecompositionConfig {
    let mut cfg = DecompositionConfig::new(1);
    cfg.zeta = zeta / 4.0;
    cfg.coarse_gamma = Some(0.05);
    cfg.delta = Schedule::for_subcells(Schedule::DefaultDelta, 2);
    cfg
}

fn subcell_selection(seed: u64) -> Result<CriterionReport> {
    const SEEDS: usize = 200;
    const ZETA: f64 = 0.1;
    const N: usize = 8;
    let cfg = subcell_config(ZETA);
    let mut rep = Report::new(7, seed)
        .tol("zeta", ZETA)
        .tol("decomposition_zeta", cfg.zeta)
        .tol("coarse_gamma", cfg.coarse_gamma())
        .tol("target_frequency", 0.5)
        .tol("stderr_multiple", 3.0)
        .budget("attempts_per_seed", 1.0);
    let (mut certified, mut accepted, mut nontrivial, mut tried) = (0usize, 0usize, 0usize, 0u64);
    while certified < SEEDS && tried < 2 * SEEDS as u64 {
        let s = seed.wrapping_add(tried);
        tried += 1;
        let f = fixtures::sparse_noise_table(N, s)?;
        let d = super_decompose(&f, &cfg)?;
        if !d.certificates.certified {
            continue;
        }
        certified += 1;
        nontrivial += (d.refined.len() > d.coarse.len()) as usize;
        let delta = Schedule::DefaultDelta.at(d.coarse.len());
        if select_subcell(&f, &d, delta, ZETA, s, 1).is_ok() {
            accepted += 1;
        }
    }
    let freq = accepted as f64 / certified.max(1) as f64;
    let threshold = 0.5 - 3.0 * (0.25 / certified.max(1) as f64).sqrt();
    rep.stat("certified", certified as f64);
    rep.stat("accepted", accepted as f64);
    rep.stat("refined_strictly", nontrivial as f64);
    rep.stat("frequency", freq);
    rep.stat("threshold", threshold);
    Ok(rep.finish(
        certified >= SEEDS && freq >= threshold,
        format!("{accepted}/{certified} accepted on first attempt ({freq:.3} >= {threshold:.3}), {nontrivial} with B' != B"),
    ))
}

fn cleanup_bound_check(seed: u64) -> Result<CriterionReport> {
    const INSTANCES: usize = 60;
    let mut rep = Report::new(8, seed).tol("zeta_a", 0.1).tol("zeta_b", 0.2).budget("attempts_per_seed", 20.0);
    let (mut accepted, mut violations, mut tried) = (0usize, 0usize, 0u64);
    let mut worst: f64 = 0.0;
    while accepted < INSTANCES && tried < 4 * INSTANCES as u64 {
        let s = seed.wrapping_add(1_000 + tried);
        let zeta = if tried % 2 == 0 { 0.1 } else { 0.2 };
        let n = 7 + (tried % 3 == 0) as usize;
        tried += 1;
        let cfg = subcell_config(zeta);
        let f = fixtures::sparse_noise_table(n, s)?;
        let d = super_decompose(&f, &cfg)?;
        if !d.certificates.certified {
            continue;
        }
        let delta = Schedule::DefaultDelta.at(d.coarse.len());
        let Ok(sel) = select_subcell(&f, &d, delta, zeta, s, 20) else {
            continue;
        };
        accepted += 1;
        let out = cleanup(&f, &d.coarse, &d.refined, &sel.s, zeta)?;
        let cert = bias_certificate(&d.coarse, u128::MAX, 0)?;
        let bound = cleanup_bound(f.range(), zeta, &d.coarse, &cert);
        let dist = distance(&f, &out)?;
        if dist > bound || !cert.exhaustive {
            violations += 1;
        }
        worst = worst.max(dist / bound);
    }
    rep.stat("accepted", accepted as f64);
    rep.stat("violations", violations as f64);
    rep.stat("max_distance_over_bound", worst);
    Ok(rep.finish(
        accepted >= 50 && violations == 0,
        format!("{accepted} accepted instances, {violations} violations, max distance/bound {worst:.4}"),
    ))
}

fn tester_one_sided(seed: u64) -> Result<CriterionReport> {
    const TABLES: u64 = 50;
    const TRIALS: u64 = 1000;
    let budget = 1u128 << 20;
    let mut rep = Report::new(9, seed).tol("rejections", 0.0).budget("trial_search", budget as f64).budget("trials", TRIALS as f64);
    let family = ConstraintCollection::degree_one(2)?;
    let (mut rejections, mut inconclusive) = (0u64, 0u64);
    for i in 0..TABLES {
        let f = fixtures::degree_d_table(2, 5, 1, seed.wrapping_add(i))?;
        let r = affine_subspace_test(&f, &family, None, TRIALS, seed.wrapping_add(i), budget)?;
        rejections += r.rejections;
        inconclusive += r.inconclusive;
        if let Some(w) = r.witness {
            // a reported rejection must carry a witness valid for f
            affinv::tester::Witness::new(&f, &family.members()[w.member], w.witness.points().to_vec())?;
        }
    }
    rep.stat("tables", TABLES as f64);
    rep.stat("rejections", rejections as f64);
    rep.stat("inconclusive", inconclusive as f64);
    Ok(rep.finish(
        rejections == 0 && inconclusive == 0,
        format!("{TABLES} degree-1 tables x {TRIALS} trials, {rejections} rejections"),
    ))
}

fn tester_rejection_rate(seed: u64) -> Result<CriterionReport> {
    const FUNCTIONS: usize = 20;
    const SEEDS: u64 = 20;
    const TRIALS: u64 = 400;
    const MIN_DISTANCE: f64 = 0.2;
    let budget = 1u128 << 20;
    let mut rep = Report::new(10, seed)
        .tol("min_distance", MIN_DISTANCE)
        .tol("stderr_multiple", 3.0)
        .tol("seed_fraction", 0.95)
        .budget("trials", TRIALS as f64)
        .budget("seeds_per_function", SEEDS as f64);
    let family = ConstraintCollection::degree_one(2)?;
    let (mut found, mut within, mut total, mut dist_mismatch, mut k) = (0usize, 0usize, 0usize, 0usize, 0u64);
    let mut probs = Vec::new();
    while found < FUNCTIONS && k < 10_000 {
        let f = fixtures::random_function(2, 3, 2, seed.wrapping_add(k))?;
        k += 1;
        let dist = oracles::distance_to_affine_f2(&f);
        if distance_to_enumerable_property(&f, &Property::DegreeAtMost(1), budget)? != dist {
            dist_mismatch += 1;
        }
        if dist < MIN_DISTANCE {
            continue;
        }
        found += 1;
        let q = oracles::trial_rejection_probability(&f, &family, 3);
        probs.push(q);
        let se = (q * (1.0 - q) / TRIALS as f64).sqrt();
        for s in 0..SEEDS {
            let r = affine_subspace_test(&f, &family, Some(3), TRIALS, seed.wrapping_mul(31).wrapping_add(s + 100 * k), budget)?;
            total += 1;
            if (r.empirical_rejection_rate - q).abs() <= 3.0 * se {
                within += 1;
            }
        }
    }
    let frac = within as f64 / total.max(1) as f64;
    rep.stat("functions", found as f64);
    rep.stat("runs", total as f64);
    rep.stat("within", within as f64);
    rep.stat("fraction_within", frac);
    rep.stat("distance_mismatches", dist_mismatch as f64);
    rep.stat("min_probability", probs.iter().copied().fold(f64::INFINITY, f64::min));
    rep.stat("max_probability", probs.iter().copied().fold(0.0, f64::max));
    Ok(rep.finish(
        found >= FUNCTIONS && frac >= 0.95 && dist_mismatch == 0,
        format!("{found} functions x {SEEDS} seeds, {within}/{total} runs within 3 stderr ({frac:.3})"),
    ))
}

fn gowers_ladder(seed: u64) -> Result<CriterionReport> {
    const LADDERS: u64 = 50;
    const MC_RUNS: u64 = 100;
    const SAMPLES: u64 = 1 << 14;
    const TOL: f64 = 1e-12;
    let mut rep = Report::new(11, seed)
        .tol("ladder_slack", TOL)
        .tol("oracle_agreement", 1e-9)
        .tol("stderr_multiple", 4.0)
        .tol("run_fraction", 0.95)
        .budget("mc_samples", SAMPLES as f64);
    let (mut ladder_fail, mut oracle_fail) = (0usize, 0usize);
    for i in 0..LADDERS {
        let mut rng = stream(seed, i);
        let (p, n) = if rng.random_bool(0.5) { (2, rng.random_range(1..=4)) } else { (3, rng.random_range(1..=2)) };
        let fp = FieldParams::new(p, n)?;
        let f = RealTable::new(fp, (0..fp.size()).map(|_| rng.random_range(-1.0..=1.0)).collect())?;
        let u: Vec<f64> = (1..=3).map(|k| gowers_norm(&f, k, GowersMethod::default()).map(|g| g.value)).collect::<Result<_>>()?;
        if u[0] > u[1] + TOL || u[1] > u[2] + TOL || (u[0] - f.mean().abs()).abs() > TOL {
            ladder_fail += 1;
        }
        if (1..=3).any(|k| (oracles::gowers_norm(&f, k) - u[k - 1]).abs() > 1e-9) {
            oracle_fail += 1;
        }
    }
    let mut within = 0;
    for i in 0..MC_RUNS {
        let mut rng = stream(seed ^ 0x6c, i);
        let fp = FieldParams::new(2, rng.random_range(4..=6))?;
        let f = if i % 2 == 0 {
            RealTable::new(fp, (0..fp.size()).map(|_| rng.random_range(0.0..=1.0)).collect())?
        } else {
            RealTable::new(fp, (0..fp.size()).map(|_| if rng.random_bool(0.75) { 1.0 } else { -1.0 }).collect())?
        };
        let k = 2 + (i % 2) as usize;
        let exact = gowers_norm(&f, k, GowersMethod::default())?.value;
        let mc = gowers_norm(&f, k, GowersMethod::MonteCarlo { samples: SAMPLES, seed: seed.wrapping_add(i) })?;
        if (mc.value - exact).abs() <= 4.0 * mc.stderr {
            within += 1;
        }
    }
    let frac = within as f64 / MC_RUNS as f64;
    rep.stat("ladders", LADDERS as f64);
    rep.stat("ladder_failures", ladder_fail as f64);
    rep.stat("oracle_failures", oracle_fail as f64);
    rep.stat("mc_runs", MC_RUNS as f64);
    rep.stat("mc_fraction_within", frac);
    Ok(rep.finish(
        ladder_fail == 0 && oracle_fail == 0 && frac >= 0.95,
        format!("{LADDERS} ladders ({ladder_fail} failures), {within}/{MC_RUNS} Monte-Carlo runs within 4 stderr"),
    ))
}
