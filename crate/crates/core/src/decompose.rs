//! Refinement of polynomial factors against a labelled function, and the
//! decompositions `f = f1 + f2 + f3` built from them.
//!
//! Every decomposition works on the `R` indicator slices of a
//! [`FunctionTable`] at once and keeps all refinements syntactic: new
//! polynomials are only ever appended. Size-dependent bounds are described
//! by a [`Schedule`].
//!
//! ```
//! use affinv::decompose::{strong_decompose, DecompositionConfig};
//! use affinv::field::{FieldParams, FunctionTable};
//! use affinv::poly::PolynomialFactor;
//!
//! let fp = FieldParams::new(2, 4).unwrap();
//! let f = FunctionTable::from_fn(fp, 2, |x| (x.coords()[0] + x.coords()[2]) % 2 + 1).unwrap();
//! let cfg = DecompositionConfig::new(1);
//! let d = strong_decompose(&f, &cfg, &PolynomialFactor::trivial(fp)).unwrap();
//! assert_eq!(d.refined.len(), 1);
//! assert!(d.certificates.certified);
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FunctionTable, RealTable};
use crate::gowers::{gowers_norm, inverse_gowers_search, CorrelationWitness, GowersMethod, GowersMode, GowersResult};
use crate::linalg::SpanBasis;
use crate::poly::{bias_certificate, density_index_on, represents, BiasCertificate, CellPartition, Polynomial, PolynomialFactor, DEFAULT_BIAS_BUDGET};
use crate::{DEFAULT_ENUMERATION_BUDGET, DEFAULT_SEARCH_BUDGET};

/// A bound depending on the complexity `C` of a factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Constant(f64),
    /// `1 / (4 (C + 1) 3^C)`.
    DefaultEta,
    /// `0.1 / 2^C`.
    DefaultDelta,
    /// `factor * base(C) / p^C`.
    Scaled { base: Box<Schedule>, factor: f64, p: u32 },
}

impl Schedule {
    pub fn at(&self, c: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::DefaultEta => 1.0 / (4.0 * (c as f64 + 1.0) * 3f64.powi(c as i32)),
            Schedule::DefaultDelta => 0.1 / 2f64.powi(c as i32),
            Schedule::Scaled { base, factor, p } => factor * base.at(c) / (*p as f64).powi(c as i32),
        }
    }

    /// The tightened schedule `0.1 delta(C) / p^C` under which a uniformly
    /// random subcell is good with constant probability.
    pub fn for_subcells(delta: Schedule, p: u32) -> Schedule {
        Schedule::Scaled {
            base: Box::new(delta),
            factor: 0.1,
            p,
        }
    }
}

/// Parameters of the decompositions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig {
    /// Polynomial degree bound `d`; must be below `p`.
    pub degree: u32,
    /// Bound on `||f3||_2` as a function of the coarse factor size.
    pub delta: Schedule,
    /// Bound on `||f2||_{U^{d+1}}` as a function of the inner factor size.
    pub eta: Schedule,
    pub zeta: f64,
    /// Minimum index gain for robust refinement of the coarse factor in
    /// [`super_decompose`]; defaults to `zeta^3 / 24`.
    pub coarse_gamma: Option<f64>,
    pub max_factor_size: usize,
    pub max_iterations: usize,
    pub search_budget: u128,
    /// Exact Gowers norms are used while `p^{n(d+2)}` stays within this.
    pub gowers_budget: u128,
    pub mc_samples: u64,
    /// For `d >= 2`, a factor whose bias certificate reaches this is rejected.
    pub bias_abort: f64,
    pub seed: u64,
}

impl DecompositionConfig {
    pub fn new(degree: u32) -> Self {
        DecompositionConfig {
            degree,
            delta: Schedule::DefaultDelta,
            eta: Schedule::DefaultEta,
            zeta: 0.1,
            coarse_gamma: None,
            max_factor_size: 12,
            max_iterations: 64,
            search_budget: DEFAULT_SEARCH_BUDGET,
            gowers_budget: DEFAULT_ENUMERATION_BUDGET,
            mc_samples: 1 << 16,
            bias_abort: 1.0 - 1e-9,
            seed: 0,
        }
    }

    pub fn coarse_gamma(&self) -> f64 {
        self.coarse_gamma.unwrap_or(self.zeta.powi(3) / 24.0)
    }

    fn validate(&self, p: u32) -> Result<()> {
        if self.degree == 0 || self.degree >= p {
            return Err(Error::InvalidArgument(format!("degree must lie in [1, p) = [1, {p}), got {}", self.degree)));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::InvalidArgument(format!("zeta must lie in (0, 1], got {}", self.zeta)));
        }
        if self.max_factor_size == 0 || self.max_iterations == 0 || self.search_budget == 0 {
            return Err(Error::InvalidArgument("budgets must be positive".into()));
        }
        Ok(())
    }
}

/// One audit record of the refinement loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub phase: String,
    pub factor_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl TraceEvent {
    fn new(phase: &str, factor_size: usize) -> Self {
        TraceEvent {
            phase: phase.to_string(),
            factor_size,
            slice: None,
            polynomial: None,
            gain: None,
            value: None,
        }
    }
}

/// Machine-checkable claims attached to a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    /// `||f2^{(i)}||_{U^{d+1}}` for every label `i`.
    pub gowers: Vec<GowersResult>,
    pub eta_bound: f64,
    /// `||f3^{(i)}||_2` for every label `i`.
    pub l2_f3: Vec<f64>,
    pub delta_bound: f64,
    pub bias_coarse: BiasCertificate,
    pub bias_refined: BiasCertificate,
    /// Whether the refined factor represents the coarse one (super mode).
    pub represents: Option<bool>,
    /// All bounds hold and every norm was computed exactly.
    pub certified: bool,
}

/// `f = f1 + f2 + f3` per label, over a coarse factor `B` and its syntactic
/// refinement `B'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub coarse: PolynomialFactor,
    pub refined: PolynomialFactor,
    /// The further refinement against which `f2` is small.
    pub inner: PolynomialFactor,
    pub f1: Vec<RealTable>,
    pub f2: Vec<RealTable>,
    pub f3: Vec<RealTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcell: Option<Vec<u32>>,
    pub certificates: Certificates,
    pub trace: Vec<TraceEvent>,
}

/// A successful refinement step.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineStep {
    pub factor: PolynomialFactor,
    pub witness: CorrelationWitness,
    /// Realized gain of `E[(E[f|B])^2]` for the refined slice.
    pub gain: f64,
}

const ZERO_CORRELATION: f64 = 1e-12;

/// Appends the polynomial best correlated with `f - E[f|B]`, or returns
/// `None` when every candidate has zero correlation.
pub fn refine_step(f_slice: &RealTable, b: &PolynomialFactor, d: u32, budget: u128) -> Result<Option<RefineStep>> {
    let part = CellPartition::new(b)?;
    let g = f_slice.sub(&part.conditional_expectation(f_slice))?;
    let witness = inverse_gowers_search(&g, d, budget)?;
    if witness.correlation <= ZERO_CORRELATION {
        return Ok(None);
    }
    let factor = b.with(witness.polynomial.clone())?;
    let fine = CellPartition::new(&factor)?;
    let gain = density_index_on(std::slice::from_ref(f_slice), &fine) - density_index_on(std::slice::from_ref(f_slice), &part);
    Ok(Some(RefineStep { factor, witness, gain }))
}

/// Drops linear polynomials whose linear part is spanned by earlier ones.
/// Factors with a polynomial of degree at least 2 are returned unchanged.
pub fn regularize_linear(b: &PolynomialFactor) -> PolynomialFactor {
    if b.degree() > 1 {
        return b.clone();
    }
    let p = b.params().p();
    let n = b.params().n();
    let mut basis = SpanBasis::new(p);
    let mut kept = Vec::new();
    for q in b.polys() {
        let mut lin = vec![0u32; n];
        for (e, c) in q.terms() {
            if let Some(i) = e.iter().position(|&x| x == 1) {
                lin[i] = c;
            }
        }
        if basis.insert(&lin) {
            kept.push(q.clone());
        }
    }
    PolynomialFactor::new(*b.params(), kept).expect("same domain")
}

struct Refiner<'a> {
    slices: Vec<RealTable>,
    cfg: &'a DecompositionConfig,
    trace: Vec<TraceEvent>,
}

impl<'a> Refiner<'a> {
    fn new(f: &FunctionTable, cfg: &'a DecompositionConfig) -> Result<Self> {
        cfg.validate(f.params().p())?;
        Ok(Refiner {
            slices: f.slices(),
            cfg,
            trace: Vec::new(),
        })
    }

    fn index(&self, b: &PolynomialFactor) -> Result<f64> {
        Ok(density_index_on(&self.slices, &CellPartition::new(b)?))
    }

    /// Appends `q` and restores the rank requirement.
    fn append(&mut self, b: &PolynomialFactor, q: Polynomial) -> Result<PolynomialFactor> {
        let next = b.with(q)?;
        let next = if self.cfg.degree == 1 {
            regularize_linear(&next)
        } else {
            let cert = bias_certificate(&next, DEFAULT_BIAS_BUDGET, self.cfg.seed)?;
            if cert.max_bias >= self.cfg.bias_abort {
                return Err(Error::RankDegenerate(format!(
                    "factor of size {} has a combination of bias {}",
                    next.len(),
                    cert.max_bias
                )));
            }
            next
        };
        if next.len() > self.cfg.max_factor_size {
            return Err(Error::budget("factor size", next.len() as u128, self.cfg.max_factor_size as u128));
        }
        Ok(next)
    }

    fn robust(&mut self, b: &PolynomialFactor, gamma: f64) -> Result<PolynomialFactor> {
        let mut b = b.clone();
        let mut rounds = 0;
        loop {
            let mut progressed = false;
            for i in 0..self.slices.len() {
                let Some(step) = refine_step(&self.slices[i], &b, self.cfg.degree, self.cfg.search_budget)? else {
                    continue;
                };
                let before = self.index(&b)?;
                let next = self.append(&b, step.witness.polynomial.clone())?;
                let gain = self.index(&next)? - before;
                if gain >= gamma && next.len() > b.len() {
                    self.trace.push(TraceEvent {
                        slice: Some(i as u32 + 1),
                        polynomial: Some(step.witness.polynomial.to_string()),
                        gain: Some(gain),
                        ..TraceEvent::new("robust", next.len())
                    });
                    b = next;
                    progressed = true;
                }
            }
            rounds += 1;
            if !progressed || rounds >= self.cfg.max_iterations {
                return Ok(b);
            }
        }
    }

    fn residual_norms(&self, b: &PolynomialFactor) -> Result<Vec<GowersResult>> {
        let part = CellPartition::new(b)?;
        let k = self.cfg.degree as usize + 1;
        self.slices
            .iter()
            .map(|s| {
                let r = s.sub(&part.conditional_expectation(s))?;
                match gowers_norm(&r, k, GowersMethod::Exact { budget: self.cfg.gowers_budget }) {
                    Err(e) if e.is_budget() => gowers_norm(
                        &r,
                        k,
                        GowersMethod::MonteCarlo {
                            samples: self.cfg.mc_samples,
                            seed: self.cfg.seed,
                        },
                    ),
                    other => other,
                }
            })
            .collect()
    }

    /// Refines `b` until every residual has small `U^{d+1}` norm. Returns the
    /// refinement, the final norms, and whether the bound was reached.
    fn uniformize(&mut self, b: &PolynomialFactor) -> Result<(PolynomialFactor, Vec<GowersResult>, bool)> {
        let mut inner = b.clone();
        for _ in 0..self.cfg.max_iterations {
            let norms = self.residual_norms(&inner)?;
            let bound = self.cfg.eta.at(inner.len());
            let (worst, value) = norms
                .iter()
                .enumerate()
                .map(|(i, g)| (i, g.value))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            if value <= bound {
                return Ok((inner, norms, true));
            }
            let Some(step) = refine_step(&self.slices[worst], &inner, self.cfg.degree, self.cfg.search_budget)? else {
                return Ok((inner, norms, false));
            };
            let next = self.append(&inner, step.witness.polynomial.clone())?;
            if next.len() == inner.len() {
                return Ok((inner, norms, false));
            }
            self.trace.push(TraceEvent {
                slice: Some(worst as u32 + 1),
                polynomial: Some(step.witness.polynomial.to_string()),
                gain: Some(step.gain),
                value: Some(value),
                ..TraceEvent::new("inner", next.len())
            });
            inner = next;
        }
        let norms = self.residual_norms(&inner)?;
        Ok((inner, norms, false))
    }

    /// Strong decomposition from `b0` with the fixed L2 bound `delta`.
    fn strong(&mut self, b0: &PolynomialFactor, delta: f64) -> Result<Strong> {
        let mut b = if self.cfg.degree == 1 { regularize_linear(b0) } else { b0.clone() };
        for _ in 0..self.cfg.max_iterations {
            b = self.robust(&b, delta * delta)?;
            let (inner, norms, reached) = self.uniformize(&b)?;
            let coarse = CellPartition::new(&b)?;
            let fine = CellPartition::new(&inner)?;
            let mut f1 = Vec::new();
            let mut f2 = Vec::new();
            let mut f3 = Vec::new();
            for s in &self.slices {
                let e = coarse.conditional_expectation(s);
                let ei = fine.conditional_expectation(s);
                f2.push(s.sub(&ei)?);
                f3.push(ei.sub(&e)?);
                f1.push(e);
            }
            let l2: Vec<f64> = f3.iter().map(RealTable::l2_norm).collect();
            let worst = l2.iter().copied().fold(0.0, f64::max);
            self.trace.push(TraceEvent {
                value: Some(worst),
                ..TraceEvent::new("l2", inner.len())
            });
            if worst <= delta || inner.len() == b.len() {
                return Ok(Strong {
                    factor: b,
                    inner,
                    f1,
                    f2,
                    f3,
                    norms,
                    l2,
                    uniform: reached,
                });
            }
            b = inner;
        }
        Err(Error::budget("strong decomposition iterations", self.cfg.max_iterations as u128 + 1, self.cfg.max_iterations as u128))
    }
}

struct Strong {
    factor: PolynomialFactor,
    inner: PolynomialFactor,
    f1: Vec<RealTable>,
    f2: Vec<RealTable>,
    f3: Vec<RealTable>,
    norms: Vec<GowersResult>,
    l2: Vec<f64>,
    uniform: bool,
}

/// Refines `b` while some label slice gains at least `gamma` in density index.
pub fn robust_refine(f: &FunctionTable, b: &PolynomialFactor, gamma: f64, cfg: &DecompositionConfig) -> Result<PolynomialFactor> {
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    Refiner::new(f, cfg)?.robust(b, gamma)
}

fn certificates(
    cfg: &DecompositionConfig,
    s: &Strong,
    coarse: &PolynomialFactor,
    delta: f64,
    represents: Option<bool>,
) -> Result<Certificates> {
    let eta_bound = cfg.eta.at(s.inner.len());
    let exact = s.norms.iter().all(|g| g.mode == GowersMode::Exact);
    let gowers_ok = s.norms.iter().all(|g| g.value <= eta_bound);
    let l2_ok = s.l2.iter().all(|&v| v <= delta);
    Ok(Certificates {
        gowers: s.norms.clone(),
        eta_bound,
        l2_f3: s.l2.clone(),
        delta_bound: delta,
        bias_coarse: bias_certificate(coarse, DEFAULT_BIAS_BUDGET, cfg.seed)?,
        bias_refined: bias_certificate(&s.factor, DEFAULT_BIAS_BUDGET, cfg.seed)?,
        represents,
        certified: exact && gowers_ok && l2_ok && s.uniform && represents.unwrap_or(true),
    })
}

/// Decomposes every label slice of `f` as `E[f|B] + (f - E[f|B_inner]) +
/// (E[f|B_inner] - E[f|B])` for a syntactic refinement `B` of `b0` and a
/// further refinement `B_inner`, with `||f3||_2 <= delta(|b0|)`.
pub fn strong_decompose(f: &FunctionTable, cfg: &DecompositionConfig, b0: &PolynomialFactor) -> Result<DecompositionResult> {
    if b0.degree() > cfg.degree {
        return Err(Error::InvalidArgument(format!("initial factor has degree {} > {}", b0.degree(), cfg.degree)));
    }
    let mut r = Refiner::new(f, cfg)?;
    let delta = cfg.delta.at(b0.len());
    let s = r.strong(b0, delta)?;
    let certificates = certificates(cfg, &s, &s.factor, delta, None)?;
    Ok(DecompositionResult {
        coarse: s.factor.clone(),
        refined: s.factor,
        inner: s.inner,
        f1: s.f1,
        f2: s.f2,
        f3: s.f3,
        subcell: None,
        certificates,
        trace: r.trace,
    })
}

/// A coarse factor `B` and a refinement `B'` that `zeta`-represents it, with
/// `f` decomposed over `B'` and `||f3||_2 <= delta(|B|)`.
pub fn super_decompose(f: &FunctionTable, cfg: &DecompositionConfig) -> Result<DecompositionResult> {
    let mut r = Refiner::new(f, cfg)?;
    let mut b = PolynomialFactor::trivial(*f.params());
    for _ in 0..cfg.max_iterations {
        b = r.robust(&b, cfg.coarse_gamma())?;
        let delta = cfg.delta.at(b.len());
        let s = r.strong(&b, delta)?;
        let rep = represents(f, &s.factor, &b, cfg.zeta)?;
        r.trace.push(TraceEvent {
            value: Some(rep as u8 as f64),
            ..TraceEvent::new("represents", s.factor.len())
        });
        if rep {
            let certificates = certificates(cfg, &s, &b, delta, Some(true))?;
            return Ok(DecompositionResult {
                coarse: b,
                refined: s.factor,
                inner: s.inner,
                f1: s.f1,
                f2: s.f2,
                f3: s.f3,
                subcell: None,
                certificates,
                trace: r.trace,
            });
        }
        b = s.factor;
    }
    Err(Error::budget("super decomposition iterations", cfg.max_iterations as u128 + 1, cfg.max_iterations as u128))
}

/// Outcome of testing one subcell id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcellCheck {
    /// Every subcell `(c, s)` of a nonempty cell is nonempty with
    /// `E[(f3^{(i)})^2 | (c, s)] < delta^2` for all labels.
    pub f3_small: bool,
    /// Fraction of nonempty cells where some label frequency moves by more
    /// than `zeta` between `c` and `(c, s)`.
    pub deviating_fraction: f64,
    pub accepted: bool,
}

/// Evaluates both subcell conditions for a fixed `s`.
pub fn check_subcell(f: &FunctionTable, result: &DecompositionResult, s: &[u32], delta: f64, zeta: f64) -> Result<SubcellCheck> {
    let coarse = CellPartition::new(&result.coarse)?;
    let fine = CellPartition::new(&result.refined)?;
    check_with(f, result, &coarse, &fine, s, delta, zeta)
}

fn check_with(
    f: &FunctionTable,
    result: &DecompositionResult,
    coarse: &CellPartition,
    fine: &CellPartition,
    s: &[u32],
    delta: f64,
    zeta: f64,
) -> Result<SubcellCheck> {
    let p = result.coarse.params().p();
    let extra = result.refined.len() - result.coarse.len();
    if s.len() != extra {
        return Err(Error::DimensionMismatch { expected: extra, found: s.len() });
    }
    let nc = coarse.num_cells();
    let s_index = crate::poly::CellId(s.to_vec()).index(p);
    let sq: Vec<Vec<f64>> = result
        .f3
        .iter()
        .map(|t| fine.cell_means(&t.values().iter().map(|v| v * v).collect::<Vec<_>>()))
        .collect();
    let slices = f.slices();
    let coarse_means: Vec<Vec<f64>> = slices.iter().map(|t| coarse.cell_means(t.values())).collect();
    let fine_means: Vec<Vec<f64>> = slices.iter().map(|t| fine.cell_means(t.values())).collect();
    let mut f3_small = true;
    let (mut nonempty, mut deviating) = (0usize, 0usize);
    for c in 0..nc {
        if coarse.counts()[c] == 0 {
            continue;
        }
        nonempty += 1;
        let cs = c + nc * s_index;
        if fine.counts()[cs] == 0 {
            f3_small = false;
            deviating += 1;
            continue;
        }
        if sq.iter().any(|m| m[cs] >= delta * delta) {
            f3_small = false;
        }
        if (0..slices.len()).any(|i| (coarse_means[i][c] - fine_means[i][cs]).abs() > zeta) {
            deviating += 1;
        }
    }
    let deviating_fraction = deviating as f64 / nonempty as f64;
    Ok(SubcellCheck {
        f3_small,
        deviating_fraction,
        accepted: f3_small && deviating_fraction < zeta,
    })
}

/// A chosen subcell id and the attempt that found it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcellSelection {
    pub s: Vec<u32>,
    pub attempts: usize,
    pub check: SubcellCheck,
}

/// Samples subcell ids uniformly until one satisfies both conditions of
/// [`check_subcell`]. Attempt `a` draws from stream `a` of the seeded RNG.
/// When `B' = B` the only id is the empty one.
pub fn select_subcell(
    f: &FunctionTable,
    result: &DecompositionResult,
    delta: f64,
    zeta: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<SubcellSelection> {
    let p = result.coarse.params().p();
    let extra = result.refined.len().checked_sub(result.coarse.len()).filter(|_| result.refined.extends(&result.coarse));
    let Some(extra) = extra else {
        return Err(Error::InvalidArgument("refined factor must extend the coarse factor".into()));
    };
    let coarse = CellPartition::new(&result.coarse)?;
    let fine = CellPartition::new(&result.refined)?;
    for attempt in 0..max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let s: Vec<u32> = (0..extra).map(|_| rng.random_range(0..p)).collect();
        let check = check_with(f, result, &coarse, &fine, &s, delta, zeta)?;
        if check.accepted {
            return Ok(SubcellSelection {
                s,
                attempts: attempt + 1,
                check,
            });
        }
        if extra == 0 {
            break;
        }
    }
    Err(Error::NoSubcellAccepted { attempts: max_attempts })
}

/// The `zeta`-cleanup of `f` according to `B`, `B'` and the subcell id `s`.
pub fn cleanup(f: &FunctionTable, coarse: &PolynomialFactor, refined: &PolynomialFactor, s: &[u32], zeta: f64) -> Result<FunctionTable> {
    if !refined.extends(coarse) {
        return Err(Error::InvalidArgument("refined factor must extend the coarse factor".into()));
    }
    if s.len() != refined.len() - coarse.len() {
        return Err(Error::DimensionMismatch {
            expected: refined.len() - coarse.len(),
            found: s.len(),
        });
    }
    let p = coarse.params().p();
    let cp = CellPartition::new(coarse)?;
    let fp = CellPartition::new(refined)?;
    let nc = cp.num_cells();
    let r = f.range() as usize;
    let s_index = crate::poly::CellId(s.to_vec()).index(p);
    // label counts per coarse cell and per selected subcell
    let mut in_cell = vec![0u64; nc * r];
    let mut in_sub = vec![0u64; nc * r];
    for (x, &label) in f.values().iter().enumerate() {
        let c = cp.cell_of()[x];
        in_cell[c * r + label as usize - 1] += 1;
        if fp.cell_of()[x] == c + nc * s_index {
            in_sub[c * r + label as usize - 1] += 1;
        }
    }
    // (overwrite whole cell, majority label, rare labels) per coarse cell
    let mut plan: Vec<Option<(bool, u32, Vec<bool>)>> = vec![None; nc];
    for c in 0..nc {
        let size_c = cp.counts()[c];
        if size_c == 0 {
            continue;
        }
        let size_cs = fp.counts()[c + nc * s_index];
        if size_cs == 0 {
            return Err(Error::EmptySubcell {
                cell: crate::poly::CellId::from_index(c, p, coarse.len()).0,
                subcell: s.to_vec(),
            });
        }
        let sub = &in_sub[c * r..(c + 1) * r];
        let cell = &in_cell[c * r..(c + 1) * r];
        // first maximum, so ties go to the smallest label
        let majority = (0..r).fold(0, |best, i| if sub[i] > sub[best] { i } else { best }) as u32 + 1;
        let freq_sub: Vec<f64> = sub.iter().map(|&k| k as f64 / size_cs as f64).collect();
        let overwrite = (0..r).any(|i| (cell[i] as f64 / size_c as f64 - freq_sub[i]).abs() > zeta);
        let rare = freq_sub.iter().map(|&q| q < zeta).collect();
        plan[c] = Some((overwrite, majority, rare));
    }
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(x, &label)| {
            let (overwrite, majority, rare) = plan[cp.cell_of()[x]].as_ref().expect("cell of a point is nonempty");
            if *overwrite || rare[label as usize - 1] {
                *majority
            } else {
                label
            }
        })
        .collect();
    FunctionTable::new(*f.params(), f.range(), values)
}

/// `(2R + 1 + beta) zeta` with `beta = p^{|B|} max_bias`.
pub fn cleanup_bound(range: u32, zeta: f64, coarse: &PolynomialFactor, bias: &BiasCertificate) -> f64 {
    let beta = (coarse.params().p() as f64).powi(coarse.len() as i32) * bias.max_bias;
    (2.0 * range as f64 + 1.0 + beta) * zeta
}
