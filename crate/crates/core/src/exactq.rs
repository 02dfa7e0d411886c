//! Exact linear algebra over the rationals.
//!
//! Everything else in the crate reduces to the handful of operations here:
//! kernels, images, sums and intersections of subspaces, and explicit
//! presentations of quotients. All matrices are dense and act on column
//! vectors, so a map `V -> W` is stored as a `dim W x dim V` matrix.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// The ground field.
pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_rational(s: &str) -> Result<Rational, LinAlgError> {
    let t = s.trim();
    let bad = || LinAlgError::BadRational(s.to_string());
    match t.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(t.parse().map_err(|_| bad())?)),
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinAlgError {
    #[error("ambient dimension mismatch: {left} vs {right}")]
    AmbientMismatch { left: usize, right: usize },
    #[error("subspace is not contained in the numerator")]
    NotContained,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed rational `{0}`")]
    BadRational(String),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RatMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", self[(i, j)])?;
            }
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for RatMatrix {
    type Output = Rational;

    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        RatMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Builds a matrix with an explicit shape; needed for `0 x n` and `n x 0`.
    pub fn from_rows_shaped(rows: usize, cols: usize, entries: Vec<Vec<Rational>>) -> Self {
        assert_eq!(entries.len(), rows);
        assert!(entries.iter().all(|row| row.len() == cols), "ragged rows");
        RatMatrix {
            rows,
            cols,
            data: entries.into_iter().flatten().collect(),
        }
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| rat(x)).collect())
                .collect(),
        )
    }

    pub fn from_columns(rows: usize, columns: &[Vec<Rational>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (i, x) in col.iter().enumerate() {
                m[(i, j)] = x.clone();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Rational> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn columns(&self) -> Vec<Vec<Rational>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(
            self.cols, other.rows,
            "product of {}x{} and {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = Rational::zero();
                for (a, b) in self.row(i).iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        acc += a * b;
                    }
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: &Rational) -> RatMatrix {
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub fn neg(&self) -> RatMatrix {
        self.scale(&-Rational::one())
    }

    pub fn hstack(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.rows, other.rows);
        let mut out = Self::zeros(self.rows, self.cols + other.cols);
        out.set_block(0, 0, self);
        out.set_block(0, self.cols, other);
        out
    }

    pub fn vstack(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.cols, other.cols);
        let mut out = Self::zeros(self.rows + other.rows, self.cols);
        out.set_block(0, 0, self);
        out.set_block(self.rows, 0, other);
        out
    }

    /// Overwrites the block whose top-left corner is `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &RatMatrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)].clone();
            }
        }
    }

    /// Adds `block` into the block at `(r0, c0)`.
    pub fn add_block(&mut self, r0: usize, c0: usize, block: &RatMatrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                let b = &block[(i, j)];
                if !b.is_zero() {
                    self[(r0 + i, c0 + j)] += b;
                }
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> RatMatrix {
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = self[(r0 + i, c0 + j)].clone();
            }
        }
        out
    }

    pub fn select_columns(&self, idx: &[usize]) -> RatMatrix {
        let mut out = Self::zeros(self.rows, idx.len());
        for (jj, &j) in idx.iter().enumerate() {
            for i in 0..self.rows {
                out[(i, jj)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> RatMatrix {
        let mut out = Self::zeros(idx.len(), self.cols);
        for (ii, &i) in idx.iter().enumerate() {
            for j in 0..self.cols {
                out[(ii, j)] = self[(i, j)].clone();
            }
        }
        out
    }

    /// Kronecker product, row index `i * rhs.rows + k`.
    pub fn kron(&self, rhs: &RatMatrix) -> RatMatrix {
        let mut out = Self::zeros(self.rows * rhs.rows, self.cols * rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = &self[(i, j)];
                if a.is_zero() {
                    continue;
                }
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        let b = &rhs[(k, l)];
                        if !b.is_zero() {
                            out[(i * rhs.rows + k, j * rhs.cols + l)] = a * b;
                        }
                    }
                }
            }
        }
        out
    }

    /// Reduced row echelon form together with the pivot columns.
    ///
    /// Pivots are taken as the first nonzero entry in column order.
    pub fn rref(&self) -> (RatMatrix, Vec<usize>) {
        let mut m = self.clone();
        let pivots = m.rref_in_place();
        (m, pivots)
    }

    fn rref_in_place(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self[(i, c)].is_zero()) else {
                continue;
            };
            self.swap_rows(p, r);
            let inv = self[(r, c)].recip();
            for j in c..self.cols {
                if !self[(r, j)].is_zero() {
                    let v = &self[(r, j)] * &inv;
                    self[(r, j)] = v;
                }
            }
            for i in 0..self.rows {
                if i == r || self[(i, c)].is_zero() {
                    continue;
                }
                let factor = self[(i, c)].clone();
                for j in c..self.cols {
                    if self[(r, j)].is_zero() {
                        continue;
                    }
                    let delta = &factor * &self[(r, j)];
                    self[(i, j)] -= delta;
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Inverse of a square matrix, `None` if singular.
    pub fn inverse(&self) -> Option<RatMatrix> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return Some(Self::zeros(0, 0));
        }
        let (r, pivots) = self.hstack(&Self::identity(n)).rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        Some(r.block(0, n, n, n))
    }
}

/// A linear subspace of `Q^ambient_dim`, stored by a canonical basis.
///
/// The basis columns are the rows of the reduced row echelon form of any
/// spanning set, so two subspaces are equal iff their structs are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subspace {
    ambient_dim: usize,
    basis: RatMatrix,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: RatMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: RatMatrix::identity(ambient_dim),
        }
    }

    /// Column span of `vectors` (an `ambient x k` matrix).
    pub fn span(vectors: &RatMatrix) -> Self {
        let ambient_dim = vectors.rows();
        let (r, pivots) = vectors.transpose().rref();
        let k = pivots.len();
        Subspace {
            ambient_dim,
            basis: r.block(0, 0, k, ambient_dim).transpose(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn basis(&self) -> &RatMatrix {
        &self.basis
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn contains_vector(&self, v: &[Rational]) -> bool {
        assert_eq!(v.len(), self.ambient_dim);
        let col = RatMatrix::from_columns(self.ambient_dim, &[v.to_vec()]);
        self.basis.hstack(&col).rank() == self.dim()
    }

    pub fn contains(&self, other: &Subspace) -> bool {
        assert_eq!(self.ambient_dim, other.ambient_dim);
        other.dim() == 0 || self.basis.hstack(&other.basis).rank() == self.dim()
    }

    /// Row index of the leading entry of each basis column; the basis
    /// restricted to these rows is the identity.
    pub fn pivot_rows(&self) -> Vec<usize> {
        (0..self.dim())
            .map(|j| {
                (0..self.ambient_dim)
                    .find(|&i| !self.basis[(i, j)].is_zero())
                    .expect("basis columns are nonzero")
            })
            .collect()
    }

    /// Coordinates of the columns of `m` in this basis, `None` if some
    /// column lies outside the subspace.
    pub fn coordinates(&self, m: &RatMatrix) -> Option<RatMatrix> {
        assert_eq!(m.rows(), self.ambient_dim);
        let coords = m.select_rows(&self.pivot_rows());
        (self.basis.mul(&coords) == *m).then_some(coords)
    }

    /// Image of this subspace under `map` (`target x ambient`).
    pub fn map(&self, map: &RatMatrix) -> Subspace {
        assert_eq!(map.cols(), self.ambient_dim);
        Subspace::span(&map.mul(&self.basis))
    }
}

/// Basis of `{v : Av = 0}`.
pub fn kernel(a: &RatMatrix) -> Subspace {
    let n = a.cols();
    let (r, pivots) = a.rref();
    let mut vectors = Vec::new();
    let mut is_pivot = vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    for free in (0..n).filter(|&j| !is_pivot[j]) {
        let mut v = vec![Rational::zero(); n];
        v[free] = Rational::one();
        for (row, &p) in pivots.iter().enumerate() {
            v[p] = -r[(row, free)].clone();
        }
        vectors.push(v);
    }
    Subspace::span(&RatMatrix::from_columns(n, &vectors))
}

pub fn image(a: &RatMatrix) -> Subspace {
    Subspace::span(a)
}

/// Returns `(U + W, U ∩ W)`.
pub fn sum_and_intersection(
    u: &Subspace,
    w: &Subspace,
) -> Result<(Subspace, Subspace), LinAlgError> {
    if u.ambient_dim != w.ambient_dim {
        return Err(LinAlgError::AmbientMismatch {
            left: u.ambient_dim,
            right: w.ambient_dim,
        });
    }
    let sum = Subspace::span(&u.basis.hstack(&w.basis));
    // (x, y) with Ux = Wy; the intersection is the image of x under U.
    let joint = u.basis.hstack(&w.basis.neg());
    let k = kernel(&joint);
    let top = k.basis().block(0, 0, u.dim(), k.dim());
    let inter = Subspace::span(&u.basis.mul(&top));
    Ok((sum, inter))
}

pub fn sum(u: &Subspace, w: &Subspace) -> Subspace {
    assert_eq!(u.ambient_dim, w.ambient_dim);
    Subspace::span(&u.basis.hstack(&w.basis))
}

pub fn intersection(u: &Subspace, w: &Subspace) -> Subspace {
    sum_and_intersection(u, w)
        .expect("intersection of subspaces with different ambient spaces")
        .1
}

/// An explicit presentation of `numerator / denominator`.
///
/// `projection` is a `dim x ambient` matrix that sends any vector of the
/// numerator to its quotient coordinates; `section` is `ambient x dim` and
/// picks a representative for each quotient basis vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuotientPresentation {
    numerator: Subspace,
    denominator: Subspace,
    projection: RatMatrix,
    section: RatMatrix,
}

impl QuotientPresentation {
    pub fn dim(&self) -> usize {
        self.section.cols()
    }

    pub fn numerator(&self) -> &Subspace {
        &self.numerator
    }

    pub fn denominator(&self) -> &Subspace {
        &self.denominator
    }

    pub fn projection(&self) -> &RatMatrix {
        &self.projection
    }

    pub fn section(&self) -> &RatMatrix {
        &self.section
    }

    pub fn ambient_dim(&self) -> usize {
        self.numerator.ambient_dim()
    }
}

pub fn quotient_present(
    numerator: &Subspace,
    denominator: &Subspace,
) -> Result<QuotientPresentation, LinAlgError> {
    if numerator.ambient_dim != denominator.ambient_dim {
        return Err(LinAlgError::AmbientMismatch {
            left: numerator.ambient_dim,
            right: denominator.ambient_dim,
        });
    }
    if !numerator.contains(denominator) {
        return Err(LinAlgError::NotContained);
    }
    let n = numerator.ambient_dim;
    let d = denominator.dim();
    // Extend the denominator basis by numerator basis vectors.
    let stacked = denominator.basis.hstack(&numerator.basis);
    let (_, pivots) = stacked.rref();
    let chosen: Vec<usize> = pivots.iter().filter(|&&p| p >= d).map(|&p| p - d).collect();
    let section = numerator.basis.select_columns(&chosen);
    let q = section.cols();

    // Left inverse of [D | C] from an invertible set of rows.
    let full = denominator.basis.hstack(&section);
    let (_, row_pivots) = full.transpose().rref();
    let square = full.select_rows(&row_pivots);
    let inv = square
        .inverse()
        .expect("independent columns restrict to an invertible minor");
    let mut select = RatMatrix::zeros(row_pivots.len(), n);
    for (i, &r) in row_pivots.iter().enumerate() {
        select[(i, r)] = Rational::one();
    }
    let left_inverse = inv.mul(&select);
    let projection = left_inverse.block(d, 0, q, n);

    Ok(QuotientPresentation {
        numerator: numerator.clone(),
        denominator: denominator.clone(),
        projection,
        section,
    })
}

/// Some `x` with `Ax = b`, or `None` when the system is inconsistent.
pub fn solve_linear(a: &RatMatrix, b: &[Rational]) -> Result<Option<Vec<Rational>>, LinAlgError> {
    if a.rows() != b.len() {
        return Err(LinAlgError::DimensionMismatch {
            expected: a.rows(),
            found: b.len(),
        });
    }
    let n = a.cols();
    let aug = a.hstack(&RatMatrix::from_columns(a.rows(), &[b.to_vec()]));
    let (r, pivots) = aug.rref();
    if pivots.last() == Some(&n) {
        return Ok(None);
    }
    let mut x = vec![Rational::zero(); n];
    for (row, &p) in pivots.iter().enumerate() {
        x[p] = r[(row, n)].clone();
    }
    Ok(Some(x))
}

/// Largest absolute numerator or denominator bit length; handy for tests.
pub fn max_height(m: &RatMatrix) -> u64 {
    m.data
        .iter()
        .map(|x| x.numer().abs().bits().max(x.denom().bits()))
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| rat(x)).collect()
    }

    #[test]
    fn kernel_of_zero_scalar_is_everything() {
        let k = kernel(&RatMatrix::from_i64(&[&[0]]));
        assert_eq!(k, Subspace::full(1));
    }

    #[test]
    fn kernel_of_identity_is_trivial() {
        assert_eq!(kernel(&RatMatrix::identity(2)).dim(), 0);
    }

    #[test]
    fn kernel_of_row_vector() {
        // x + 2y = 0 is spanned by (-2, 1); echelon form scales the pivot to 1.
        let k = kernel(&RatMatrix::from_i64(&[&[1, 2]]));
        assert_eq!(k.dim(), 1);
        assert_eq!(k.basis().column(0), vec![rat(1), ratio(-1, 2)]);
        assert!(k.contains_vector(&v(&[-2, 1])));
    }

    #[test]
    fn images() {
        assert_eq!(image(&RatMatrix::zeros(3, 2)).dim(), 0);
        assert_eq!(image(&RatMatrix::identity(4)), Subspace::full(4));
        let im = image(&RatMatrix::from_i64(&[&[1], &[2]]));
        assert_eq!(im.basis().column(0), v(&[1, 2]));
    }

    #[test]
    fn sum_and_intersection_examples() {
        let line = Subspace::span(&RatMatrix::from_i64(&[&[1], &[1]]));
        let (s, i) = sum_and_intersection(&line, &line).unwrap();
        assert_eq!((s, i), (line.clone(), line.clone()));

        let other = Subspace::span(&RatMatrix::from_i64(&[&[1], &[0]]));
        let (s, i) = sum_and_intersection(&line, &other).unwrap();
        assert_eq!(s, Subspace::full(2));
        assert_eq!(i.dim(), 0);

        let u = Subspace::span(&RatMatrix::from_i64(&[&[1, 0], &[0, 1], &[0, 0]]));
        let w = Subspace::span(&RatMatrix::from_i64(&[&[0, 0], &[1, 0], &[0, 1]]));
        let (s, i) = sum_and_intersection(&u, &w).unwrap();
        assert_eq!(s, Subspace::full(3));
        assert_eq!(i, Subspace::span(&RatMatrix::from_i64(&[&[0], &[1], &[0]])));
    }

    #[test]
    fn ambient_mismatch_is_an_error() {
        let err = sum_and_intersection(&Subspace::full(2), &Subspace::full(3)).unwrap_err();
        assert_eq!(err, LinAlgError::AmbientMismatch { left: 2, right: 3 });
    }

    #[test]
    fn quotient_examples() {
        let full = Subspace::full(3);
        let q = quotient_present(&full, &Subspace::zero(3)).unwrap();
        assert_eq!(q.dim(), 3);
        assert_eq!(q.projection().mul(q.section()), RatMatrix::identity(3));

        let q = quotient_present(&full, &full).unwrap();
        assert_eq!(q.dim(), 0);

        let diag = Subspace::span(&RatMatrix::from_i64(&[&[1], &[1]]));
        let q = quotient_present(&Subspace::full(2), &diag).unwrap();
        assert_eq!(q.dim(), 1);
        assert!(q.projection().mul_vec(&v(&[1, 1])).iter().all(Zero::is_zero));
        assert_eq!(q.projection().mul(q.section()), RatMatrix::identity(1));
    }

    #[test]
    fn quotient_requires_containment() {
        let x = Subspace::span(&RatMatrix::from_i64(&[&[1], &[0]]));
        let y = Subspace::span(&RatMatrix::from_i64(&[&[0], &[1]]));
        assert_eq!(quotient_present(&x, &y).unwrap_err(), LinAlgError::NotContained);
    }

    #[test]
    fn solve_examples() {
        let b = v(&[3, -4, 5]);
        assert_eq!(solve_linear(&RatMatrix::identity(3), &b).unwrap(), Some(b.clone()));
        assert_eq!(solve_linear(&RatMatrix::zeros(1, 1), &v(&[1])).unwrap(), None);

        let a = RatMatrix::from_i64(&[&[1, 2], &[2, 4]]);
        let x = solve_linear(&a, &v(&[1, 2])).unwrap().unwrap();
        assert_eq!(&x[0] + rat(2) * &x[1], rat(1));
        assert!(matches!(
            solve_linear(&a, &v(&[1])),
            Err(LinAlgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("3/6").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("-7").unwrap(), rat(-7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert_eq!(ratio(-4, 6).to_string(), "-2/3");
    }

    #[test]
    fn inverse_round_trip() {
        let a = RatMatrix::from_i64(&[&[2, 1], &[7, 4]]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv), RatMatrix::identity(2));
        assert!(RatMatrix::from_i64(&[&[1, 2], &[2, 4]]).inverse().is_none());
    }
}
