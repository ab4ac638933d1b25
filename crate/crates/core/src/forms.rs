//! Linear forms, affine constraints in normal form, and the linear algebra
//! of their tensor powers.
//!
//! An affine constraint on `l` variables is a tuple of forms
//! `a_j = X_1 + sum_{k>=2} c_{j,k} X_k` with `a_1 = X_1`. Constraints are
//! checked against this normal form on construction; the only place
//! non-normal form lists appear is the output of [`change_of_view`].

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_budget, Error, Result};
use crate::field::{FieldParams, FieldVec};
use crate::linalg::{rank_of, Matrix, SpanBasis};

/// Default cap on `l^d` for tensor-power computations.
pub const DEFAULT_TENSOR_BUDGET: u128 = 1 << 20;

/// A linear form `sum_k coeffs[k] X_{k+1}` over `F_p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinearForm {
    coeffs: Vec<u32>,
}

impl LinearForm {
    pub fn new(coeffs: Vec<u32>, p: u32) -> Self {
        LinearForm {
            coeffs: coeffs.into_iter().map(|c| c % p).collect(),
        }
    }

    /// The form `X_{k+1}` on `ell` variables.
    pub fn variable(k: usize, ell: usize) -> Self {
        let mut coeffs = vec![0; ell];
        coeffs[k] = 1;
        LinearForm { coeffs }
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }

    /// Number of variables.
    pub fn ell(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }
}

/// Evaluates `form` at `points`, returning `sum_k coeffs[k] x_k`.
pub fn eval_form(form: &LinearForm, points: &[FieldVec], params: &FieldParams) -> Result<FieldVec> {
    if points.len() != form.ell() {
        return Err(Error::DimensionMismatch {
            expected: form.ell(),
            found: points.len(),
        });
    }
    let mut acc = params.zero();
    for (x, &c) in points.iter().zip(form.coeffs()) {
        if x.len() != params.n() {
            return Err(Error::DimensionMismatch {
                expected: params.n(),
                found: x.len(),
            });
        }
        if c != 0 {
            acc = params.add(&acc, &params.scale(c, x));
        }
    }
    Ok(acc)
}

/// Index-level form evaluation used by every enumeration kernel.
#[inline]
pub(crate) fn eval_form_indices(params: &FieldParams, coeffs: &[u32], points: &[usize]) -> usize {
    coeffs
        .iter()
        .zip(points)
        .filter(|(&c, _)| c != 0)
        .fold(0usize, |acc, (&c, &x)| params.add_indices(acc, params.scale_index(c, x)))
}

/// An affine constraint `A = (a_1, ..., a_m)` in normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineConstraint {
    p: u32,
    ell: usize,
    forms: Vec<LinearForm>,
}

impl AffineConstraint {
    /// Builds a constraint from coefficient rows; every row must have
    /// coefficient 1 on `X_1`, and the first row must be exactly `X_1`.
    pub fn new(p: u32, rows: Vec<Vec<u32>>) -> Result<Self> {
        if !crate::field::is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let forms: Vec<LinearForm> = rows.into_iter().map(|r| LinearForm::new(r, p)).collect();
        Self::from_forms(p, forms)
    }

    pub fn from_forms(p: u32, forms: Vec<LinearForm>) -> Result<Self> {
        let Some(first) = forms.first() else {
            return Err(Error::InvalidArgument("affine constraint with no forms".into()));
        };
        let ell = first.ell();
        if ell == 0 {
            return Err(Error::InvalidArgument("affine constraint on zero variables".into()));
        }
        for (j, f) in forms.iter().enumerate() {
            if f.ell() != ell {
                return Err(Error::DimensionMismatch {
                    expected: ell,
                    found: f.ell(),
                });
            }
            if f.coeffs()[0] != 1 {
                return Err(Error::NormalForm(format!("form {} has X_1 coefficient {}", j + 1, f.coeffs()[0])));
            }
        }
        if first.coeffs()[1..].iter().any(|&c| c != 0) {
            return Err(Error::NormalForm("first form must be X_1".into()));
        }
        Ok(AffineConstraint { p, ell, forms })
    }

    /// The derivative constraint `(X_1, X_1+X_2, X_1+X_3, X_1+X_2+X_3)`,
    /// whose second differences vanish exactly on degree-1 functions.
    pub fn derivative(p: u32) -> Result<Self> {
        AffineConstraint::new(p, vec![vec![1, 0, 0], vec![1, 1, 0], vec![1, 0, 1], vec![1, 1, 1]])
    }

    /// The `k`-term progression `(X_1, X_1+X_2, ..., X_1+(k-1)X_2)`.
    pub fn progression(p: u32, k: usize) -> Result<Self> {
        AffineConstraint::new(p, (0..k as u32).map(|i| vec![1, i % p]).collect())
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn m(&self) -> usize {
        self.forms.len()
    }

    pub fn forms(&self) -> &[LinearForm] {
        &self.forms
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        self.forms.iter().map(|f| f.coeffs().to_vec()).collect()
    }

    /// Domain indices of `a_1(x), ..., a_m(x)` for point indices `x`.
    pub fn eval_indices(&self, params: &FieldParams, xs: &[usize], out: &mut [usize]) {
        for (o, f) in out.iter_mut().zip(&self.forms) {
            *o = eval_form_indices(params, f.coeffs(), xs);
        }
    }
}

/// An induced affine constraint `(A, sigma)` with 1-based labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InducedConstraint {
    constraint: AffineConstraint,
    sigma: Vec<u32>,
}

impl InducedConstraint {
    pub fn new(constraint: AffineConstraint, sigma: Vec<u32>) -> Result<Self> {
        if sigma.len() != constraint.m() {
            return Err(Error::DimensionMismatch {
                expected: constraint.m(),
                found: sigma.len(),
            });
        }
        if let Some(&bad) = sigma.iter().find(|&&s| s == 0) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                range: u32::MAX,
            });
        }
        Ok(InducedConstraint { constraint, sigma })
    }

    pub fn constraint(&self) -> &AffineConstraint {
        &self.constraint
    }

    pub fn sigma(&self) -> &[u32] {
        &self.sigma
    }

    pub fn m(&self) -> usize {
        self.constraint.m()
    }

    pub fn ell(&self) -> usize {
        self.constraint.ell()
    }

    pub fn is_concise(&self) -> bool {
        self.ell() <= self.m()
    }
}

/// A finite collection of induced constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCollection {
    members: Vec<InducedConstraint>,
    concise: bool,
}

impl ConstraintCollection {
    pub fn new(members: Vec<InducedConstraint>) -> Self {
        let concise = members.iter().all(InducedConstraint::is_concise);
        ConstraintCollection { members, concise }
    }

    /// The degree-1 property over `F_p`, labels standing for `value + 1`:
    /// every derivative pattern whose second difference is nonzero.
    pub fn degree_one(p: u32) -> Result<Self> {
        let a = AffineConstraint::derivative(p)?;
        let mut members = Vec::new();
        let q = p as usize;
        for code in 0..q.pow(4) {
            let v: Vec<u32> = (0..4).map(|k| ((code / q.pow(k)) % q) as u32).collect();
            // f(x) - f(x+y) - f(x+z) + f(x+y+z)
            let second = (v[0] + v[3] + (p - v[1]) + (p - v[2])) % p;
            if second != 0 {
                members.push(InducedConstraint::new(a.clone(), v.iter().map(|x| x + 1).collect())?);
            }
        }
        Ok(ConstraintCollection::new(members))
    }

    pub fn members(&self) -> &[InducedConstraint] {
        &self.members
    }

    pub fn is_concise(&self) -> bool {
        self.concise
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Replaces every member by its concise equivalent.
    pub fn to_concise(&self) -> Result<ConstraintCollection> {
        let members = self.members.iter().map(make_concise).collect::<Result<Vec<_>>>()?;
        Ok(ConstraintCollection::new(members))
    }

    pub fn max_ell(&self) -> usize {
        self.members.iter().map(InducedConstraint::ell).max().unwrap_or(0)
    }
}

/// Cell images `b_1, ..., b_m`, each an element of `F_p^C`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellImage {
    images: Vec<Vec<u32>>,
}

impl CellImage {
    pub fn new(images: Vec<Vec<u32>>) -> Result<Self> {
        if let Some(first) = images.first() {
            let c = first.len();
            if let Some(bad) = images.iter().find(|b| b.len() != c) {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: bad.len(),
                });
            }
        }
        Ok(CellImage { images })
    }

    pub fn images(&self) -> &[Vec<u32>] {
        &self.images
    }

    pub fn m(&self) -> usize {
        self.images.len()
    }

    /// Width `C` of every image.
    pub fn width(&self) -> usize {
        self.images.first().map_or(0, Vec::len)
    }

    /// Row `i`: `(b_{i,1}, ..., b_{i,m})`.
    pub fn row(&self, i: usize) -> Vec<u32> {
        self.images.iter().map(|b| b[i]).collect()
    }

    /// Appends the same block `s` to every image.
    pub fn concat(&self, s: &[u32]) -> CellImage {
        CellImage {
            images: self
                .images
                .iter()
                .map(|b| b.iter().chain(s).copied().collect())
                .collect(),
        }
    }
}

/// Result of the Cauchy-Schwarz complexity search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Complexity {
    Exact(usize),
    /// Some form is a scalar multiple of another, so no partition works.
    Infinite,
    /// The search budget ran out; the complexity lies in `[lower, upper]`.
    Unknown { lower: usize, upper: usize },
}

/// Limits for [`cs_complexity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityBudget {
    pub max_forms: usize,
    pub max_nodes: u64,
}

impl Default for ComplexityBudget {
    fn default() -> Self {
        ComplexityBudget {
            max_forms: 8,
            max_nodes: 10_000_000,
        }
    }
}

/// Cauchy-Schwarz complexity: the least `s` such that for every `i` the other
/// forms split into `s + 1` groups none of whose spans contains form `i`.
pub fn cs_complexity(forms: &[LinearForm], p: u32, budget: ComplexityBudget) -> Result<Complexity> {
    let m = forms.len();
    if m == 0 {
        return Err(Error::InvalidArgument("complexity of an empty system".into()));
    }
    let ell = forms[0].ell();
    if forms.iter().any(|f| f.ell() != ell) {
        return Err(Error::ShapeMismatch("forms on different variable counts".into()));
    }
    if m == 1 {
        return Ok(Complexity::Exact(0));
    }
    // A part containing a multiple of L_i always has L_i in its span.
    for i in 0..m {
        for j in 0..m {
            if i != j && rank_of(p, ell, &[forms[i].coeffs().to_vec(), forms[j].coeffs().to_vec()]) < 2 {
                return Ok(Complexity::Infinite);
            }
        }
    }
    let upper = m - 2;
    if m > budget.max_forms {
        return Ok(Complexity::Unknown { lower: 0, upper });
    }
    let mut nodes = 0u64;
    let mut s = 0usize;
    for i in 0..m {
        let target = forms[i].coeffs();
        let rest: Vec<&[u32]> = (0..m).filter(|&j| j != i).map(|j| forms[j].coeffs()).collect();
        // Parts needed for this i; at least the current s + 1.
        let mut parts = s + 1;
        loop {
            match partition_exists(p, target, &rest, parts, &mut nodes, budget.max_nodes) {
                Some(true) => break,
                Some(false) => parts += 1,
                None => return Ok(Complexity::Unknown { lower: parts - 1, upper }),
            }
        }
        s = parts - 1;
    }
    Ok(Complexity::Exact(s))
}

/// Whether `rest` splits into at most `parts` groups avoiding `target` in
/// every span. `None` when the node budget runs out.
fn partition_exists(p: u32, target: &[u32], rest: &[&[u32]], parts: usize, nodes: &mut u64, max_nodes: u64) -> Option<bool> {
    fn go(
        p: u32,
        target: &[u32],
        rest: &[&[u32]],
        k: usize,
        groups: &mut Vec<SpanBasis>,
        parts: usize,
        nodes: &mut u64,
        max_nodes: u64,
    ) -> Option<bool> {
        if k == rest.len() {
            return Some(true);
        }
        *nodes += 1;
        if *nodes > max_nodes {
            return None;
        }
        for g in 0..groups.len() {
            let mut b = groups[g].clone();
            b.insert(rest[k]);
            if b.contains(target) {
                continue;
            }
            let saved = std::mem::replace(&mut groups[g], b);
            let r = go(p, target, rest, k + 1, groups, parts, nodes, max_nodes);
            groups[g] = saved;
            if r != Some(false) {
                return r;
            }
        }
        if groups.len() < parts {
            let mut b = SpanBasis::new(p);
            b.insert(rest[k]);
            if !b.contains(target) {
                groups.push(b);
                let r = go(p, target, rest, k + 1, groups, parts, nodes, max_nodes);
                groups.pop();
                if r != Some(false) {
                    return r;
                }
            }
        }
        Some(false)
    }
    go(p, target, rest, 0, &mut Vec::new(), parts, nodes, max_nodes)
}

/// The `d`-th tensor power of a form, indexed little-endian in radix `l`.
/// The 0-th power is the scalar 1.
pub fn tensor_power(form: &LinearForm, d: usize, p: u32) -> Result<Vec<u32>> {
    tensor_power_with_budget(form, d, p, DEFAULT_TENSOR_BUDGET)
}

pub fn tensor_power_with_budget(form: &LinearForm, d: usize, p: u32, budget: u128) -> Result<Vec<u32>> {
    if d == 0 {
        return Ok(vec![1]);
    }
    let ell = form.ell();
    ensure_budget("tensor power", ell as u128, d, budget)?;
    let p64 = p as u64;
    let mut t: Vec<u32> = form.coeffs().to_vec();
    for _ in 1..d {
        let block = t.len();
        let mut next = vec![0u32; block * ell];
        for (j, &a) in form.coeffs().iter().enumerate() {
            for (idx, &v) in t.iter().enumerate() {
                next[idx + block * j] = (v as u64 * a as u64 % p64) as u32;
            }
        }
        t = next;
    }
    Ok(t)
}

/// `d`-dimension: the rank of `{a_1^{(x)d}, ..., a_m^{(x)d}}`.
pub fn dimension_d(forms: &[LinearForm], d: usize, p: u32) -> Result<usize> {
    let Some(first) = forms.first() else {
        return Ok(0);
    };
    let vectors = forms
        .iter()
        .map(|f| tensor_power(f, d, p))
        .collect::<Result<Vec<_>>>()?;
    let dim = first.ell().pow(d as u32);
    Ok(rank_of(p, dim, &vectors))
}

/// `(d_1, ..., d_C)`-dimension: the sum of the `d_i`-dimensions.
pub fn mixed_dimension(forms: &[LinearForm], degrees: &[usize], p: u32) -> Result<usize> {
    degrees.iter().map(|&d| dimension_d(forms, d, p)).sum()
}

/// Applies the change of view `a'(v) = a(M v)` to every form.
pub fn change_of_view(forms: &[LinearForm], m: &Matrix) -> Result<Vec<LinearForm>> {
    let ell = forms.first().map_or(m.rows(), LinearForm::ell);
    if m.rows() != ell || m.cols() != ell {
        return Err(Error::ShapeMismatch(format!(
            "change of view needs a {ell}x{ell} matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_invertible() {
        return Err(Error::Singular);
    }
    let p = m.p() as u64;
    Ok(forms
        .iter()
        .map(|f| {
            let coeffs = (0..ell)
                .map(|k| {
                    let s = f
                        .coeffs()
                        .iter()
                        .enumerate()
                        .fold(0u64, |acc, (i, &a)| (acc + a as u64 * m.get(i, k) as u64) % p);
                    s as u32
                })
                .collect();
            LinearForm { coeffs }
        })
        .collect())
}

/// The `2m` forms `a_j(Z, X_2.., )` followed by `a_j(Z, Y_2, ..)` over the
/// variables `(Z, X_2, ..., X_l, Y_2, ..., Y_l)`.
pub fn juxtapose(constraint: &AffineConstraint) -> Vec<LinearForm> {
    let ell = constraint.ell();
    let width = 2 * ell - 1;
    let mut out = Vec::with_capacity(2 * constraint.m());
    for shift in [0, ell - 1] {
        for f in constraint.forms() {
            let mut c = vec![0u32; width];
            c[0] = f.coeffs()[0];
            for k in 1..ell {
                c[k + shift] = f.coeffs()[k];
            }
            out.push(LinearForm { coeffs: c });
        }
    }
    out
}

/// Rewrites a constraint on more variables than forms as an equivalent one on
/// at most `m` variables, keeping `sigma`.
pub fn make_concise(ic: &InducedConstraint) -> Result<InducedConstraint> {
    if ic.is_concise() {
        return Ok(ic.clone());
    }
    let a = ic.constraint();
    let (p, ell) = (a.p(), a.ell());
    let forms_matrix = Matrix::from_rows(p, ell, &a.rows())?;
    let kernel = forms_matrix.kernel();

    // Basis: kernel vectors, then standard vectors e_2.. as needed, then e_1.
    let mut basis = SpanBasis::new(p);
    let mut columns: Vec<Vec<u32>> = Vec::with_capacity(ell);
    for v in &kernel {
        basis.insert(v);
        columns.push(v.clone());
    }
    let e = |k: usize| {
        let mut v = vec![0u32; ell];
        v[k] = 1;
        v
    };
    if !basis.insert(&e(0)) {
        return Err(Error::NormalForm("e_1 lies in the kernel of a_1 = X_1".into()));
    }
    let mut completion = Vec::new();
    for k in 1..ell {
        if basis.dim() == ell {
            break;
        }
        if basis.insert(&e(k)) {
            completion.push(e(k));
        }
    }
    if basis.dim() != ell {
        return Err(Error::NormalForm("basis completion fell short".into()));
    }
    columns.extend(completion);
    columns.push(e(0));

    let mut m = Matrix::zeros(p, ell, ell);
    for (c, col) in columns.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            m.set(r, c, v);
        }
    }
    let viewed = change_of_view(a.forms(), &m)?;
    let dropped = kernel.len();
    for f in &viewed {
        if f.coeffs()[..dropped].iter().any(|&c| c != 0) {
            return Err(Error::NormalForm("kernel column survived the change of view".into()));
        }
    }
    // Keep the completion variables, then move the e_1 variable to the front.
    let rows = viewed
        .iter()
        .map(|f| {
            let kept = &f.coeffs()[dropped..];
            let mut r = Vec::with_capacity(kept.len());
            r.push(kept[kept.len() - 1]);
            r.extend_from_slice(&kept[..kept.len() - 1]);
            r
        })
        .collect();
    let concise = AffineConstraint::new(p, rows)?;
    InducedConstraint::new(concise, ic.sigma().to_vec())
}

type KernelKey = (u32, usize, Vec<Vec<u32>>, usize);

fn kernel_cache() -> &'static RwLock<HashMap<KernelKey, Arc<Vec<Vec<u32>>>>> {
    static CACHE: OnceLock<RwLock<HashMap<KernelKey, Arc<Vec<Vec<u32>>>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Basis of `{lambda in F_p^m : sum_j lambda_j a_j^{(x)d} = 0}`; cached per
/// `(constraint, d)`.
pub fn dependency_kernel(forms: &[LinearForm], d: usize, p: u32) -> Result<Arc<Vec<Vec<u32>>>> {
    let key: KernelKey = (
        p,
        d,
        forms.iter().map(|f| f.coeffs().to_vec()).collect(),
        forms.first().map_or(0, LinearForm::ell),
    );
    if let Some(k) = kernel_cache().read().expect("kernel cache poisoned").get(&key) {
        return Ok(Arc::clone(k));
    }
    let vectors = forms
        .iter()
        .map(|f| tensor_power(f, d, p))
        .collect::<Result<Vec<_>>>()?;
    let dim = vectors.first().map_or(0, Vec::len);
    let k = if dim == 0 {
        Vec::new()
    } else {
        // Columns are the tensor powers; its right kernel is the set of lambdas.
        Matrix::from_rows(p, dim, &vectors)?.transpose().kernel()
    };
    let k = Arc::new(k);
    kernel_cache()
        .write()
        .expect("kernel cache poisoned")
        .entry(key)
        .or_insert_with(|| Arc::clone(&k));
    Ok(k)
}

/// Whether the images `b_1..b_m` are consistent with `A` and the degrees:
/// each row `(b_{i,1}, ..., b_{i,m})` is orthogonal to the `d_i` dependency
/// kernel of the forms.
pub fn consistency_check(constraint: &AffineConstraint, degrees: &[usize], images: &CellImage) -> Result<bool> {
    if images.m() != constraint.m() {
        return Err(Error::DimensionMismatch {
            expected: constraint.m(),
            found: images.m(),
        });
    }
    if images.width() != degrees.len() && images.m() > 0 {
        return Err(Error::DimensionMismatch {
            expected: degrees.len(),
            found: images.width(),
        });
    }
    let p = constraint.p();
    for (i, &d) in degrees.iter().enumerate() {
        let kernel = dependency_kernel(constraint.forms(), d, p)?;
        let row = images.row(i);
        if kernel.iter().any(|lambda| crate::linalg::dot(p, lambda, &row) != 0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Basis of the rows `(b_1, ..., b_m)` allowed by degree `d`: the orthogonal
/// complement of the dependency kernel.
pub(crate) fn allowed_rows(forms: &[LinearForm], d: usize, p: u32) -> Result<Vec<Vec<u32>>> {
    let kernel = dependency_kernel(forms, d, p)?;
    let m = forms.len();
    if kernel.is_empty() {
        return Ok((0..m).map(|j| LinearForm::variable(j, m).coeffs).collect());
    }
    Ok(Matrix::from_rows(p, m, &kernel)?.kernel())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn forms(p: u32, rows: &[&[u32]]) -> Vec<LinearForm> {
        rows.iter().map(|r| LinearForm::new(r.to_vec(), p)).collect()
    }

    fn random_constraint(rng: &mut impl Rng, p: u32, ell: usize, m: usize) -> AffineConstraint {
        let mut rows = vec![{
            let mut r = vec![0; ell];
            r[0] = 1;
            r
        }];
        for _ in 1..m {
            let mut r: Vec<u32> = (0..ell).map(|_| rng.random_range(0..p)).collect();
            r[0] = 1;
            rows.push(r);
        }
        AffineConstraint::new(p, rows).unwrap()
    }

    fn random_invertible(rng: &mut impl Rng, p: u32, ell: usize) -> Matrix {
        loop {
            let rows: Vec<Vec<u32>> = (0..ell).map(|_| (0..ell).map(|_| rng.random_range(0..p)).collect()).collect();
            let m = Matrix::from_rows(p, ell, &rows).unwrap();
            if m.is_invertible() {
                return m;
            }
        }
    }

    // Span membership by enumerating every combination; independent of the
    // elimination code.
    fn span_contains_brute(p: u32, set: &[&[u32]], target: &[u32]) -> bool {
        let k = set.len();
        let total = (p as usize).pow(k as u32);
        (0..total).any(|code| {
            let mut acc = vec![0u32; target.len()];
            let mut c = code;
            for v in set {
                let lam = (c % p as usize) as u32;
                c /= p as usize;
                for (a, &x) in acc.iter_mut().zip(v.iter()) {
                    *a = (*a + lam * x) % p;
                }
            }
            acc == target
        })
    }

    // Complexity by trying every labelling of the other forms with s+1 labels.
    fn complexity_brute(p: u32, fs: &[LinearForm]) -> Option<usize> {
        let m = fs.len();
        if m == 1 {
            return Some(0);
        }
        for s in 0..m - 1 {
            let parts = s + 1;
            let ok = (0..m).all(|i| {
                let rest: Vec<&[u32]> = (0..m).filter(|&j| j != i).map(|j| fs[j].coeffs()).collect();
                let total = parts.pow(rest.len() as u32);
                (0..total).any(|code| {
                    (0..parts).all(|g| {
                        let group: Vec<&[u32]> = rest
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| (code / parts.pow(*k as u32)) % parts == g)
                            .map(|(_, v)| *v)
                            .collect();
                        !span_contains_brute(p, &group, fs[i].coeffs())
                    })
                })
            });
            if ok {
                return Some(s);
            }
        }
        None
    }

    #[test]
    fn eval_form_examples() {
        let fp = FieldParams::new(2, 3).unwrap();
        let x = FieldVec::new(vec![1, 0, 1], &fp).unwrap();
        let y = FieldVec::new(vec![0, 1, 1], &fp).unwrap();
        let id = LinearForm::new(vec![1, 0], 2);
        assert_eq!(eval_form(&id, &[x.clone(), y.clone()], &fp).unwrap(), x);
        let sum = LinearForm::new(vec![1, 1], 2);
        assert_eq!(eval_form(&sum, &[x.clone(), x.clone()], &fp).unwrap(), fp.zero());
        assert!(eval_form(&sum, &[x], &fp).is_err());
    }

    #[test]
    fn eval_form_matches_coordinate_recount() {
        let fp = FieldParams::new(3, 2).unwrap();
        let form = LinearForm::new(vec![2, 1, 2], 3);
        let pts: Vec<FieldVec> = [[1u32, 2], [2, 2], [0, 1]]
            .iter()
            .map(|c| FieldVec::new(c.to_vec(), &fp).unwrap())
            .collect();
        let got = eval_form(&form, &pts, &fp).unwrap();
        // coordinate 0: 2*1 + 1*2 + 2*0 = 4 = 1; coordinate 1: 2*2 + 2 + 2 = 8 = 2
        assert_eq!(got.coords(), &[1, 2]);
        let idx: Vec<usize> = pts.iter().map(|x| fp.index_of(x).unwrap()).collect();
        assert_eq!(eval_form_indices(&fp, form.coeffs(), &idx), fp.index_of(&got).unwrap());
    }

    #[test]
    fn normal_form_is_enforced() {
        assert!(matches!(AffineConstraint::new(2, vec![vec![1, 1]]), Err(Error::NormalForm(_))));
        assert!(matches!(AffineConstraint::new(3, vec![vec![1, 0], vec![2, 1]]), Err(Error::NormalForm(_))));
        assert!(AffineConstraint::new(4, vec![vec![1]]).is_err());
        let a = AffineConstraint::derivative(2).unwrap();
        assert!(InducedConstraint::new(a, vec![1, 2]).is_err());
    }

    #[test]
    fn complexity_examples() {
        let b = ComplexityBudget::default();
        assert_eq!(cs_complexity(&forms(2, &[&[1]]), 2, b).unwrap(), Complexity::Exact(0));
        let blr = AffineConstraint::derivative(2).unwrap();
        assert_eq!(cs_complexity(blr.forms(), 2, b).unwrap(), Complexity::Exact(1));
        assert_eq!(complexity_brute(2, blr.forms()), Some(1));
        let ap = AffineConstraint::progression(5, 4).unwrap();
        assert_eq!(cs_complexity(ap.forms(), 5, b).unwrap(), Complexity::Exact(2));
        assert_eq!(complexity_brute(5, ap.forms()), Some(2));
        let dup = forms(3, &[&[1, 0], &[2, 0]]);
        assert_eq!(cs_complexity(&dup, 3, b).unwrap(), Complexity::Infinite);
        let tight = ComplexityBudget { max_forms: 8, max_nodes: 1 };
        assert!(matches!(cs_complexity(ap.forms(), 5, tight).unwrap(), Complexity::Unknown { .. }));
    }

    #[test]
    fn complexity_matches_brute_force_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let p = [2, 3, 5][rng.random_range(0..3)];
            let ell = rng.random_range(2..=3);
            let m = rng.random_range(1..=5);
            let a = random_constraint(&mut rng, p, ell, m);
            let got = cs_complexity(a.forms(), p, ComplexityBudget::default()).unwrap();
            match complexity_brute(p, a.forms()) {
                Some(s) => assert_eq!(got, Complexity::Exact(s), "{:?}", a.rows()),
                None => assert_eq!(got, Complexity::Infinite, "{:?}", a.rows()),
            }
        }
    }

    #[test]
    fn tensor_power_examples() {
        let x1 = LinearForm::new(vec![1, 0], 2);
        assert_eq!(tensor_power(&x1, 2, 2).unwrap(), vec![1, 0, 0, 0]);
        let f = LinearForm::new(vec![1, 2], 3);
        assert_eq!(tensor_power(&f, 1, 3).unwrap(), vec![1, 2]);
        // (i1, i2) little-endian: (1,1)=1, (2,1)=2, (1,2)=2, (2,2)=4=1
        assert_eq!(tensor_power(&f, 2, 3).unwrap(), vec![1, 2, 2, 1]);
        assert!(tensor_power_with_budget(&f, 30, 3, 1 << 20).unwrap_err().is_budget());
    }

    #[test]
    fn dimension_examples() {
        let same = forms(3, &[&[1, 0, 0], &[1, 0, 0], &[1, 0, 0]]);
        for d in 1..4 {
            assert_eq!(dimension_d(&same, d, 3).unwrap(), 1);
        }
        let blr = AffineConstraint::derivative(2).unwrap();
        assert_eq!(dimension_d(blr.forms(), 1, 2).unwrap(), 3);
        assert_eq!(mixed_dimension(blr.forms(), &[1, 1], 2).unwrap(), 6);
        assert_eq!(mixed_dimension(blr.forms(), &[2], 2).unwrap(), dimension_d(blr.forms(), 2, 2).unwrap());
        // the four 2nd tensor powers over F_2 are independent
        let t: Vec<Vec<u32>> = blr.forms().iter().map(|f| tensor_power(f, 2, 2).unwrap()).collect();
        assert_eq!(rank_of(2, 9, &t), 4);
        assert_eq!(mixed_dimension(blr.forms(), &[1, 2], 2).unwrap(), 7);
    }

    #[test]
    fn change_of_view_examples() {
        let blr = AffineConstraint::derivative(2).unwrap();
        let id = Matrix::identity(2, 3);
        assert_eq!(change_of_view(blr.forms(), &id).unwrap(), blr.forms().to_vec());
        let swap = Matrix::from_rows(2, 3, &[vec![1, 0, 0], vec![0, 0, 1], vec![0, 1, 0]]).unwrap();
        let swapped = change_of_view(blr.forms(), &swap).unwrap();
        let mut got: Vec<Vec<u32>> = swapped.iter().map(|f| vec![f.coeffs()[0], f.coeffs()[2], f.coeffs()[1]]).collect();
        let mut want = blr.rows();
        got.sort();
        want.sort();
        assert_eq!(got, want);
        let singular = Matrix::from_rows(2, 3, &[vec![1, 0, 0], vec![1, 0, 0], vec![0, 1, 0]]).unwrap();
        assert_eq!(change_of_view(blr.forms(), &singular), Err(Error::Singular));
    }

    #[test]
    fn change_of_view_preserves_dimension_and_complexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..120 {
            let p = [2, 3, 5][rng.random_range(0..3)];
            let ell = rng.random_range(1..=4);
            let m = rng.random_range(1..=5);
            let a = random_constraint(&mut rng, p, ell, m);
            let mat = random_invertible(&mut rng, p, ell);
            let viewed = change_of_view(a.forms(), &mat).unwrap();
            for d in 1..=3 {
                assert_eq!(dimension_d(a.forms(), d, p).unwrap(), dimension_d(&viewed, d, p).unwrap());
            }
            let b = ComplexityBudget::default();
            assert_eq!(cs_complexity(a.forms(), p, b).unwrap(), cs_complexity(&viewed, p, b).unwrap());
        }
    }

    #[test]
    fn juxtaposition_doubles_dimension_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..60 {
            let p = [2, 3, 5][rng.random_range(0..3)];
            let ell = rng.random_range(1..=3);
            let m = rng.random_range(1..=4);
            let a = random_constraint(&mut rng, p, ell, m);
            let doubled = juxtapose(&a);
            for d in 1..=3 {
                let q = dimension_d(a.forms(), d, p).unwrap();
                assert_eq!(dimension_d(&doubled, d, p).unwrap(), 2 * q - 1);
            }
        }
    }

    #[test]
    fn consistency_examples() {
        let blr = AffineConstraint::derivative(2).unwrap();
        let imgs = |bs: [u32; 4]| CellImage::new(bs.iter().map(|&b| vec![b]).collect()).unwrap();
        for code in 0..16u32 {
            let bs = [code & 1, (code >> 1) & 1, (code >> 2) & 1, (code >> 3) & 1];
            let want = bs.iter().sum::<u32>() % 2 == 0;
            assert_eq!(consistency_check(&blr, &[1], &imgs(bs)).unwrap(), want);
        }
        assert!(!consistency_check(&blr, &[1], &imgs([1, 0, 0, 0])).unwrap());
        let equal = CellImage::new(vec![vec![1, 2, 0]; 4]).unwrap();
        let a3 = AffineConstraint::derivative(3).unwrap();
        assert!(consistency_check(&a3, &[1, 2, 1], &equal).unwrap());
        assert!(consistency_check(&a3, &[1], &equal).is_err());
    }

    #[test]
    fn per_row_consistency_matches_joint_kernel() {
        // Joint formulation: Lambda ranges over the kernel of the block matrix
        // diag(T_{d_1}, ..., T_{d_C}); consistency asks the full double sum to vanish.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let p = [2, 3][rng.random_range(0..2)];
            let ell = rng.random_range(1..=3);
            let m = rng.random_range(1..=4);
            let a = random_constraint(&mut rng, p, ell, m);
            let c = rng.random_range(1..=3);
            let degrees: Vec<usize> = (0..c).map(|_| rng.random_range(1..=2)).collect();
            let imgs = CellImage::new((0..m).map(|_| (0..c).map(|_| rng.random_range(0..p)).collect()).collect()).unwrap();

            let blocks: Vec<Vec<Vec<u32>>> = degrees
                .iter()
                .map(|&d| a.forms().iter().map(|f| tensor_power(f, d, p).unwrap()).collect())
                .collect();
            let widths: Vec<usize> = blocks.iter().map(|b| b[0].len()).collect();
            let total_w: usize = widths.iter().sum();
            // rows indexed by (i, j): lambda_{i,j}
            let mut rows = Vec::new();
            let mut off = 0;
            for (i, b) in blocks.iter().enumerate() {
                for v in b {
                    let mut r = vec![0u32; total_w];
                    r[off..off + widths[i]].copy_from_slice(v);
                    rows.push(r);
                }
                off += widths[i];
            }
            let kernel = Matrix::from_rows(p, total_w, &rows).unwrap().transpose().kernel();
            let flat: Vec<u32> = (0..c).flat_map(|i| imgs.row(i)).collect();
            let joint = kernel.iter().all(|lam| dot(p, lam, &flat) == 0);
            assert_eq!(consistency_check(&a, &degrees, &imgs).unwrap(), joint);
        }
    }

    proptest! {
        #[test]
        fn all_ones_entry_of_tensor_power_is_one(p in prop::sample::select(vec![2u32, 3, 5]), seed in any::<u64>(), d in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_constraint(&mut rng, p, 3, 4);
            for f in a.forms() {
                prop_assert_eq!(tensor_power(f, d, p).unwrap()[0], 1);
            }
        }

        #[test]
        fn constant_blocks_preserve_consistency(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = [2u32, 3][rng.random_range(0..2)];
            let a = random_constraint(&mut rng, p, 3, 4);
            let c = rng.random_range(1..=2);
            let degrees: Vec<usize> = (0..c).map(|_| rng.random_range(1..=2)).collect();
            let imgs = CellImage::new((0..4).map(|_| (0..c).map(|_| rng.random_range(0..p)).collect()).collect()).unwrap();
            let extra = rng.random_range(1..=2);
            let s: Vec<u32> = (0..extra).map(|_| rng.random_range(0..p)).collect();
            let more: Vec<usize> = degrees.iter().copied().chain((0..extra).map(|_| rng.random_range(1..=2))).collect();
            if consistency_check(&a, &degrees, &imgs).unwrap() {
                prop_assert!(consistency_check(&a, &more, &imgs.concat(&s)).unwrap());
            }
        }

        #[test]
        fn concise_output_is_small(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = [2u32, 3, 5][rng.random_range(0..3)];
            let m = rng.random_range(1..=4);
            let ell = m + rng.random_range(0..=3);
            let a = random_constraint(&mut rng, p, ell, m);
            let ic = InducedConstraint::new(a, vec![1; m]).unwrap();
            let c = make_concise(&ic).unwrap();
            prop_assert!(c.ell() <= c.m());
            prop_assert_eq!(c.sigma(), ic.sigma());
        }
    }

    #[test]
    fn concise_examples() {
        let a = AffineConstraint::new(2, vec![vec![1, 0], vec![1, 1]]).unwrap();
        let ic = InducedConstraint::new(a, vec![1, 2]).unwrap();
        assert_eq!(make_concise(&ic).unwrap(), ic);

        let a = AffineConstraint::new(2, vec![vec![1, 0, 0], vec![1, 1, 1]]).unwrap();
        let ic = InducedConstraint::new(a, vec![1, 2]).unwrap();
        let c = make_concise(&ic).unwrap();
        assert_eq!(c.ell(), 2);
        assert_eq!(c.constraint().rows(), vec![vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn degree_one_family() {
        let fam = ConstraintCollection::degree_one(2).unwrap();
        assert_eq!(fam.len(), 8);
        assert!(fam.is_concise());
        for ic in fam.members() {
            let s: u32 = ic.sigma().iter().map(|l| l - 1).sum();
            assert_eq!(s % 2, 1);
        }
        let fam3 = ConstraintCollection::degree_one(3).unwrap();
        assert_eq!(fam3.len(), 81 - 27);
    }
}
