//! Dense matrices over `F_p` and Gaussian elimination.

use crate::error::{Error, Result};
use crate::field::inv_mod;

/// Row-major matrix over `F_p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    p: u32,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

/// Reduced row echelon form together with its pivot columns.
#[derive(Debug, Clone)]
pub struct Echelon {
    pub matrix: Matrix,
    pub pivots: Vec<usize>,
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

impl Matrix {
    pub fn zeros(p: u32, rows: usize, cols: usize) -> Self {
        Matrix {
            p,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(p: u32, n: usize) -> Self {
        let mut m = Matrix::zeros(p, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds a matrix from rows, reducing entries mod `p`.
    pub fn from_rows(p: u32, cols: usize, rows: &[Vec<u32>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend(r.iter().map(|&v| v % p));
        }
        Ok(Matrix {
            p,
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.cols + c] = v % self.p;
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.p, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows || self.p != other.p {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let p = self.p as u64;
        let mut out = Matrix::zeros(self.p, self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = 0u64;
                for k in 0..self.cols {
                    acc = (acc + self.get(r, k) as u64 * other.get(k, c) as u64) % p;
                }
                out.set(r, c, acc as u32);
            }
        }
        Ok(out)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Reduced row echelon form.
    pub fn echelon(&self) -> Echelon {
        let p = self.p as u64;
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(pr) = (row..m.rows).find(|&r| m.get(r, col) != 0) else {
                continue;
            };
            m.swap_rows(row, pr);
            let inv = inv_mod(m.get(row, col), m.p) as u64;
            for c in col..m.cols {
                let v = m.get(row, c) as u64 * inv % p;
                m.set(row, c, v as u32);
            }
            for r in 0..m.rows {
                if r == row {
                    continue;
                }
                let factor = m.get(r, col) as u64;
                if factor == 0 {
                    continue;
                }
                for c in col..m.cols {
                    let v = (m.get(r, c) as u64 + p * p - factor * m.get(row, c) as u64) % p;
                    m.set(r, c, v as u32);
                }
            }
            pivots.push(col);
            row += 1;
        }
        Echelon { matrix: m, pivots }
    }

    pub fn rank(&self) -> usize {
        self.echelon().rank()
    }

    /// Basis of the right null space `{v : M v = 0}`.
    pub fn kernel(&self) -> Vec<Vec<u32>> {
        let e = self.echelon();
        let p = self.p;
        let free: Vec<usize> = (0..self.cols).filter(|c| !e.pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![0u32; self.cols];
                v[f] = 1;
                for (r, &pc) in e.pivots.iter().enumerate() {
                    let a = e.matrix.get(r, f);
                    v[pc] = (p - a) % p;
                }
                v
            })
            .collect()
    }

    /// Inverse of a square matrix.
    pub fn inverse(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = Matrix::zeros(self.p, n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug.set(r, c, self.get(r, c));
            }
            aug.set(r, n + r, 1);
        }
        let e = aug.echelon();
        if e.pivots.len() < n || e.pivots[n - 1] != n - 1 {
            return Err(Error::Singular);
        }
        let mut inv = Matrix::zeros(self.p, n, n);
        for r in 0..n {
            for c in 0..n {
                inv.set(r, c, e.matrix.get(r, n + c));
            }
        }
        Ok(inv)
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.rank() == self.rows
    }
}

/// Rank of a list of vectors.
pub fn rank_of(p: u32, dim: usize, vectors: &[Vec<u32>]) -> usize {
    if vectors.is_empty() || dim == 0 {
        return 0;
    }
    Matrix::from_rows(p, dim, vectors)
        .expect("vectors share a dimension")
        .rank()
}

/// Whether `target` lies in the span of `vectors`.
pub fn in_span(p: u32, vectors: &[Vec<u32>], target: &[u32]) -> bool {
    if target.iter().all(|&t| t % p == 0) {
        return true;
    }
    if vectors.is_empty() {
        return false;
    }
    let dim = target.len();
    let mut with = vectors.to_vec();
    with.push(target.to_vec());
    rank_of(p, dim, &with) == rank_of(p, dim, vectors)
}

/// Dot product mod `p`.
pub fn dot(p: u32, a: &[u32], b: &[u32]) -> u32 {
    let p = p as u64;
    (a.iter()
        .zip(b)
        .fold(0u64, |acc, (&x, &y)| (acc + x as u64 * y as u64) % p)) as u32
}

/// Incrementally maintained echelon basis, used for span tests inside
/// searches.
#[derive(Debug, Clone)]
pub struct SpanBasis {
    p: u32,
    /// Rows in echelon form, each paired with its pivot column.
    rows: Vec<(usize, Vec<u32>)>,
}

impl SpanBasis {
    pub fn new(p: u32) -> Self {
        SpanBasis { p, rows: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the basis; returns the residual.
    pub fn reduce(&self, v: &[u32]) -> Vec<u32> {
        let p = self.p as u64;
        let mut v: Vec<u32> = v.iter().map(|&x| x % self.p).collect();
        for (pc, row) in &self.rows {
            let f = v[*pc] as u64;
            if f == 0 {
                continue;
            }
            for (x, &r) in v.iter_mut().zip(row) {
                *x = ((*x as u64 + p * p - f * r as u64) % p) as u32;
            }
        }
        v
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        self.reduce(v).iter().all(|&x| x == 0)
    }

    /// Adds `v`; returns false if it was already in the span.
    pub fn insert(&mut self, v: &[u32]) -> bool {
        let r = self.reduce(v);
        let Some(pc) = r.iter().position(|&x| x != 0) else {
            return false;
        };
        let p = self.p as u64;
        let inv = inv_mod(r[pc], self.p) as u64;
        let r: Vec<u32> = r.iter().map(|&x| (x as u64 * inv % p) as u32).collect();
        for (_, row) in self.rows.iter_mut() {
            let f = row[pc] as u64;
            if f != 0 {
                for (x, &y) in row.iter_mut().zip(&r) {
                    *x = ((*x as u64 + p * p - f * y as u64) % p) as u32;
                }
            }
        }
        self.rows.push((pc, r));
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_and_kernel_small() {
        let m = Matrix::from_rows(2, 3, &[vec![1, 0, 0], vec![1, 1, 0], vec![1, 0, 1], vec![1, 1, 1]]).unwrap();
        assert_eq!(m.rank(), 3);
        let k = m.transpose().kernel();
        assert_eq!(k, vec![vec![1, 1, 1, 1]]);
    }

    #[test]
    fn inverse_roundtrip_and_singular() {
        let m = Matrix::from_rows(5, 2, &[vec![2, 3], vec![1, 1]]).unwrap();
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv).unwrap(), Matrix::identity(5, 2));
        let s = Matrix::from_rows(3, 2, &[vec![1, 2], vec![2, 1]]).unwrap();
        assert_eq!(s.inverse(), Err(Error::Singular));
    }

    #[test]
    fn span_membership() {
        let vs = vec![vec![1, 0, 2], vec![0, 1, 1]];
        assert!(in_span(3, &vs, &[1, 1, 0]));
        assert!(!in_span(3, &vs, &[0, 0, 1]));
        assert!(in_span(3, &[], &[0, 0, 0]));
        let mut b = SpanBasis::new(3);
        assert!(b.insert(&vs[0]));
        assert!(b.insert(&vs[1]));
        assert!(!b.insert(&[2, 2, 0]));
        assert!(b.contains(&[1, 1, 0]));
        assert!(!b.contains(&[0, 0, 1]));
    }

    proptest! {
        #[test]
        fn kernel_vectors_are_annihilated(p in prop::sample::select(vec![2u32, 3, 5, 7]),
                                          entries in prop::collection::vec(0u32..7, 12)) {
            let rows: Vec<Vec<u32>> = entries.chunks(4).map(|c| c.to_vec()).collect();
            let m = Matrix::from_rows(p, 4, &rows).unwrap();
            let k = m.kernel();
            prop_assert_eq!(k.len() + m.rank(), 4);
            for v in &k {
                for r in 0..m.rows() {
                    prop_assert_eq!(dot(p, m.row(r), v), 0);
                }
            }
        }
    }
}
