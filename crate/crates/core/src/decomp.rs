//! Splitting a bicomplex into squares and zig-zags.
//!
//! Squares are split off with an explicit chain projection built from a
//! right inverse of `∂∂̄`. What is left has `∂∂̄ = 0`; in each total degree
//! `k` it is a representation of a zig-zag quiver (sources in degree `k`,
//! their images in degree `k+1`), which is decomposed into intervals by a
//! left-to-right sweep. Each interval is one zig-zag summand.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bicomplex::{
    self, all_cohomology, cohomology, direct_sum_all, square, sub_bicomplex, tensor, zigzag_shape,
    Bicomplex, BicomplexError, Bidegree, CohomologyKind, Family, LocalSubspaces,
};
use crate::exactq::{kernel, quotient_present, solve_linear, RatMatrix, Rational, Subspace};
use crate::par::Exec;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecompError {
    #[error(transparent)]
    Bicomplex(#[from] BicomplexError),
    #[error("invalid zig-zag parameter {family}_{n}")]
    InvalidParameter { family: Family, n: i32 },
    #[error("not minimal: del delbar != 0 at {0}")]
    NotMinimal(Bidegree),
    #[error("not an indecomposable zig-zag: {0}")]
    NotIndecomposable(String),
    #[error("malformed zig-zag descriptor `{0}`")]
    BadDescriptor(String),
}

/// A zig-zag up to isomorphism: family, parameter and the bidegree of its
/// leftmost source (the dot itself for `A_0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ZigZagDescriptor {
    pub family: Family,
    pub n: i32,
    pub anchor: Bidegree,
}

impl ZigZagDescriptor {
    pub fn new(family: Family, n: i32, anchor: Bidegree) -> Result<Self, DecompError> {
        if family != Family::A && n < 1 {
            return Err(DecompError::InvalidParameter { family, n });
        }
        Ok(ZigZagDescriptor { family, n, anchor })
    }

    pub fn dim(&self) -> usize {
        match self.family {
            Family::A => 2 * self.n.unsigned_abs() as usize + 1,
            Family::B | Family::C => 2 * self.n as usize,
        }
    }

    /// `(family, n)` without the anchor.
    pub fn shape(&self) -> (Family, i32) {
        (self.family, self.n)
    }
}

impl fmt::Display for ZigZagDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}@{}", self.family, self.n, self.anchor)
    }
}

impl FromStr for ZigZagDescriptor {
    type Err = DecompError;

    /// Parses `A_-2@(0,1)`; the anchor defaults to `(0,0)`.
    fn from_str(s: &str) -> Result<Self, DecompError> {
        let bad = || DecompError::BadDescriptor(s.to_string());
        let (head, anchor) = match s.split_once('@') {
            Some((h, a)) => {
                let a = a.trim().trim_start_matches('(').trim_end_matches(')');
                let (p, q) = a.split_once(',').ok_or_else(bad)?;
                let p = p.trim().parse().map_err(|_| bad())?;
                let q = q.trim().parse().map_err(|_| bad())?;
                (h, Bidegree::new(p, q))
            }
            None => (s, Bidegree::new(0, 0)),
        };
        let head = head.trim();
        let family = match head.chars().next() {
            Some('A') => Family::A,
            Some('B') => Family::B,
            Some('C') => Family::C,
            _ => return Err(bad()),
        };
        let n = head[1..].trim_start_matches('_').parse().map_err(|_| bad())?;
        ZigZagDescriptor::new(family, n, anchor)
    }
}

/// The pictured zig-zag with every structure map equal to one.
pub fn make_zigzag(d: &ZigZagDescriptor) -> Result<Bicomplex, DecompError> {
    ZigZagDescriptor::new(d.family, d.n, d.anchor)?;
    Ok(zigzag_shape(d.family, d.n, d.anchor))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum PieceKind {
    Square(Bidegree),
    ZigZag(ZigZagDescriptor),
}

/// One summand with its basis, one vector per bidegree of the shape.
#[derive(Clone, Debug)]
struct Piece {
    kind: PieceKind,
    vectors: BTreeMap<Bidegree, Vec<Rational>>,
}

impl Piece {
    fn shape(&self) -> Bicomplex {
        match self.kind {
            PieceKind::Square(at) => square(at),
            PieceKind::ZigZag(d) => zigzag_shape(d.family, d.n, d.anchor),
        }
    }

    fn map_vectors(self, bases: &BTreeMap<Bidegree, RatMatrix>) -> Piece {
        let vectors = self
            .vectors
            .into_iter()
            .map(|(at, v)| (at, bases[&at].mul_vec(&v)))
            .collect();
        Piece {
            kind: self.kind,
            vectors,
        }
    }
}

/// Sorts the pieces and stacks their vectors into a basis change.
fn assemble(b: &Bicomplex, mut pieces: Vec<Piece>) -> (Vec<Piece>, BTreeMap<Bidegree, RatMatrix>) {
    pieces.sort_by(|x, y| x.kind.cmp(&y.kind));
    let mut columns: BTreeMap<Bidegree, Vec<Vec<Rational>>> = BTreeMap::new();
    for piece in &pieces {
        for (&at, v) in &piece.vectors {
            columns.entry(at).or_default().push(v.clone());
        }
    }
    let basis = columns
        .into_iter()
        .map(|(at, cols)| (at, RatMatrix::from_columns(b.dim(at), &cols)))
        .collect();
    (pieces, basis)
}

#[derive(Clone, Debug)]
pub struct SquareSplit {
    /// Anchor (corner `x`) of each square, sorted, with repetition.
    pub squares: Vec<Bidegree>,
    /// The complementary sub-bicomplex, in the canonical basis of its
    /// underlying subspaces.
    pub minimal: Bicomplex,
    /// Columns: basis of the minimal part inside the input, per bidegree.
    pub minimal_basis: BTreeMap<Bidegree, RatMatrix>,
    /// Conjugating the input by this yields `squares ⊕ minimal`.
    pub basis_change: BTreeMap<Bidegree, RatMatrix>,
}

fn zeros_unless_present(m: Option<&RatMatrix>, rows: usize, cols: usize) -> RatMatrix {
    m.cloned().unwrap_or_else(|| RatMatrix::zeros(rows, cols))
}

/// Columns chosen from `extra` extending the independent columns of `base`
/// to a basis of the span of both, by echelon pivots.
fn extend_by_pivots(base: &RatMatrix, extra: &RatMatrix) -> Vec<usize> {
    let (_, pivots) = base.hstack(extra).rref();
    pivots
        .into_iter()
        .filter(|&p| p >= base.cols())
        .map(|p| p - base.cols())
        .collect()
}

/// Splits off every square. Works on a valid bicomplex.
pub fn split_squares(b: &Bicomplex) -> Result<SquareSplit, DecompError> {
    b.ensure_valid()?;
    let (pieces, split) = split_squares_pieces(b);
    let (pieces, mut basis) = assemble(b, pieces);
    for (at, w) in &split.minimal_basis {
        let cur = basis.remove(at);
        let m = match cur {
            Some(c) => c.hstack(w),
            None => w.clone(),
        };
        basis.insert(*at, m);
    }
    Ok(SquareSplit {
        squares: pieces
            .iter()
            .map(|p| match p.kind {
                PieceKind::Square(at) => at,
                PieceKind::ZigZag(_) => unreachable!(),
            })
            .collect(),
        minimal: split.minimal,
        minimal_basis: split.minimal_basis,
        basis_change: basis,
    })
}

struct MinimalPart {
    minimal: Bicomplex,
    minimal_basis: BTreeMap<Bidegree, RatMatrix>,
}

fn split_squares_pieces(b: &Bicomplex) -> (Vec<Piece>, MinimalPart) {
    let one_one = Bidegree::new(1, 1);
    let ddbar: BTreeMap<Bidegree, RatMatrix> =
        b.support().map(|at| (at, b.del_delbar_block(at))).collect();
    // A complement X of ker ∂∂̄ spanned by standard vectors.
    let x: BTreeMap<Bidegree, RatMatrix> = b
        .support()
        .map(|at| {
            let k = kernel(&ddbar[&at]);
            let chosen = extend_by_pivots(k.basis(), &RatMatrix::identity(b.dim(at)));
            (at, RatMatrix::identity(b.dim(at)).select_columns(&chosen))
        })
        .collect();
    let x_at = |at: Bidegree| zeros_unless_present(x.get(&at), b.dim(at), 0);

    // λ: V^c -> V^{c-(1,1)} inverts ∂∂̄ on ∂∂̄X and kills a complement
    // containing X ⊕ ∂X ⊕ ∂̄X.
    let lambda: BTreeMap<Bidegree, RatMatrix> = b
        .support()
        .map(|c| {
            let from = c - one_one;
            let xs = x_at(from);
            let d = b.del_delbar_block(from).mul(&xs);
            let g = x_at(c)
                .hstack(&b.del_block(c - Bidegree::DEL).mul(&x_at(c - Bidegree::DEL)))
                .hstack(&b.delbar_block(c - Bidegree::DELBAR).mul(&x_at(c - Bidegree::DELBAR)));
            let extension = extend_by_pivots(&d, &g.hstack(&RatMatrix::identity(b.dim(c))));
            assert!(
                (0..g.cols()).all(|j| extension.contains(&j)),
                "square generators are independent"
            );
            let cols = d.hstack(&g.hstack(&RatMatrix::identity(b.dim(c))).select_columns(&extension));
            let inv = cols.inverse().expect("complement spans");
            let mut values = RatMatrix::zeros(b.dim(from), cols.cols());
            values.set_block(0, 0, &xs);
            (c, values.mul(&inv))
        })
        .collect();
    let lam = |c: Bidegree| zeros_unless_present(lambda.get(&c), b.dim(c - one_one), b.dim(c));

    // P = ∂∂̄λ - ∂λ∂̄ + ∂̄λ∂ + λ∂∂̄ projects onto the squares and commutes
    // with both differentials; its kernel is the minimal part.
    let mut minimal_subspaces = BTreeMap::new();
    for c in b.support() {
        let p = b
            .del_delbar_block(c - one_one)
            .mul(&lam(c))
            .sub(
                &b.del_block(c - Bidegree::DEL)
                    .mul(&lam(c + Bidegree::DELBAR))
                    .mul(&b.delbar_block(c)),
            )
            .add(
                &b.delbar_block(c - Bidegree::DELBAR)
                    .mul(&lam(c + Bidegree::DEL))
                    .mul(&b.del_block(c)),
            )
            .add(&lam(c + one_one).mul(&ddbar[&c]));
        debug_assert_eq!(p.mul(&p), p);
        minimal_subspaces.insert(c, kernel(&p));
    }
    let (minimal, inc) =
        sub_bicomplex(b, &minimal_subspaces).expect("kernel of a chain projection is a sub-bicomplex");
    debug_assert!(minimal.is_minimal());

    let mut pieces = Vec::new();
    for (&at, xs) in &x {
        for j in 0..xs.cols() {
            let v = xs.column(j);
            let dv = b.del_block(at).mul_vec(&v);
            let dbv = b.delbar_block(at).mul_vec(&v);
            let top = b.del_block(at + Bidegree::DELBAR).mul_vec(&dbv);
            pieces.push(Piece {
                kind: PieceKind::Square(at),
                vectors: BTreeMap::from([
                    (at, v),
                    (at + Bidegree::DEL, dv),
                    (at + Bidegree::DELBAR, dbv),
                    (at + one_one, top),
                ]),
            });
        }
    }
    (
        pieces,
        MinimalPart {
            minimal,
            minimal_basis: inc,
        },
    )
}

/// A zig-zag quiver representation: vertices `V_0 .. V_m` with maps between
/// neighbours, each pointing forward (`V_i -> V_{i+1}`) or backward.
struct ZigZagRep {
    dims: Vec<usize>,
    /// `arrows[i]` connects `V_i` and `V_{i+1}`.
    arrows: Vec<Arrow>,
}

enum Arrow {
    Forward(RatMatrix),
    Backward(RatMatrix),
}

#[derive(Clone, Debug)]
struct Interval {
    start: usize,
    end: usize,
    /// Born as a kernel vector of a backward map.
    kernel_born: bool,
    /// `vectors[v - start]` lives in `V_v`.
    vectors: Vec<Vec<Rational>>,
}

impl Interval {
    /// `a` may be added into `b` when `key(a) < key(b)`.
    fn key(&self) -> (u8, i64) {
        if self.kernel_born {
            (0, -(self.start as i64))
        } else {
            (1, self.start as i64)
        }
    }
}

fn axpy(target: &mut [Rational], c: &Rational, source: &[Rational]) {
    for (t, s) in target.iter_mut().zip(source) {
        if !s.is_zero() {
            *t += c * s;
        }
    }
}

/// `intervals[t] += c * intervals[u]` on their common range up to `upto`.
fn add_into(intervals: &mut [Interval], t: usize, u: usize, c: &Rational, upto: usize) {
    let from = intervals[t].start.max(intervals[u].start);
    for v in from..=upto {
        let src = intervals[u].vectors[v - intervals[u].start].clone();
        let st = intervals[t].start;
        axpy(&mut intervals[t].vectors[v - st], c, &src);
    }
}

fn unit(n: usize, j: usize) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); n];
    v[j] = Rational::one();
    v
}

fn decompose_rep(rep: &ZigZagRep) -> Vec<Interval> {
    let m = rep.dims.len();
    let mut intervals: Vec<Interval> = Vec::new();
    let mut alive: Vec<usize> = Vec::new();
    for j in 0..rep.dims[0] {
        intervals.push(Interval {
            start: 0,
            end: 0,
            kernel_born: false,
            vectors: vec![unit(rep.dims[0], j)],
        });
        alive.push(intervals.len() - 1);
    }
    for i in 0..m - 1 {
        alive.sort_by_key(|&t| intervals[t].key());
        let next_dim = rep.dims[i + 1];
        let vec_at = |iv: &Interval, v: usize| iv.vectors[v - iv.start].clone();
        let mut continuing: Vec<(usize, Vec<Rational>)> = Vec::new();
        let mut newborn: Vec<(Vec<Rational>, bool)> = Vec::new();
        match &rep.arrows[i] {
            Arrow::Forward(f) => {
                let mut kept_images: Vec<Vec<Rational>> = Vec::new();
                let mut kept: Vec<usize> = Vec::new();
                for &t in &alive {
                    let y = f.mul_vec(&vec_at(&intervals[t], i));
                    let k = RatMatrix::from_columns(next_dim, &kept_images);
                    match solve_linear(&k, &y).expect("shapes agree") {
                        Some(coeffs) => {
                            for (u, c) in kept.iter().zip(coeffs) {
                                if !c.is_zero() {
                                    add_into(&mut intervals, t, *u, &-c, i);
                                }
                            }
                            debug_assert!(f.mul_vec(&vec_at(&intervals[t], i)).iter().all(Zero::is_zero));
                            intervals[t].end = i;
                        }
                        None => {
                            kept.push(t);
                            kept_images.push(y);
                        }
                    }
                }
                let k = RatMatrix::from_columns(next_dim, &kept_images);
                for j in extend_by_pivots(&k, &RatMatrix::identity(next_dim)) {
                    newborn.push((unit(next_dim, j), false));
                }
                continuing.extend(kept.into_iter().zip(kept_images));
            }
            Arrow::Backward(g) => {
                let cur_dim = rep.dims[i];
                let basis = RatMatrix::from_columns(
                    cur_dim,
                    &alive.iter().map(|&t| vec_at(&intervals[t], i)).collect::<Vec<_>>(),
                );
                let inv = basis.inverse().expect("alive vectors form a basis");
                // Image of g in interval coordinates, echelon with the pivot
                // at the last nonzero coordinate.
                let coords = inv.mul(Subspace::span(g).basis());
                let reversed: Vec<usize> = (0..cur_dim).rev().collect();
                let echelon = Subspace::span(&coords.select_rows(&reversed));
                let u = echelon.basis().select_rows(&reversed);
                let pivots: Vec<usize> = echelon
                    .pivot_rows()
                    .into_iter()
                    .map(|r| cur_dim - 1 - r)
                    .collect();
                for (l, &p) in pivots.iter().enumerate() {
                    for r in 0..p {
                        let c = u[(r, l)].clone();
                        if !c.is_zero() {
                            add_into(&mut intervals, alive[p], alive[r], &c, i);
                        }
                    }
                }
                for (pos, &t) in alive.iter().enumerate() {
                    if pivots.contains(&pos) {
                        let target = vec_at(&intervals[t], i);
                        let y = solve_linear(g, &target)
                            .expect("shapes agree")
                            .expect("pivot vectors lie in the image");
                        continuing.push((t, y));
                    } else {
                        intervals[t].end = i;
                    }
                }
                let ker = kernel(g);
                for j in 0..ker.dim() {
                    newborn.push((ker.basis().column(j), true));
                }
            }
        }
        let mut next_alive = Vec::new();
        for (t, v) in continuing {
            intervals[t].vectors.push(v);
            intervals[t].end = i + 1;
            next_alive.push(t);
        }
        for (v, kernel_born) in newborn {
            intervals.push(Interval {
                start: i + 1,
                end: i + 1,
                kernel_born,
                vectors: vec![v],
            });
            next_alive.push(intervals.len() - 1);
        }
        debug_assert_eq!(next_alive.len(), next_dim);
        alive = next_alive;
    }
    intervals
}

/// The degree-`k` slice of a minimal bicomplex: sources `S_a` (a complement
/// of `ker∂ ∩ ker∂̄` at `(a, k-a)`) and sinks `I_a = (im∂ + im∂̄)` at
/// `(a, k+1-a)`, arranged as `I_lo, S_lo, I_lo+1, …, S_hi, I_hi+1`.
struct Slice {
    rep: ZigZagRep,
    /// Bidegree and local basis of each vertex.
    vertices: Vec<(Bidegree, RatMatrix)>,
    lo: i32,
    k: i32,
}

fn slice(m: &Bicomplex, k: i32, locals: &BTreeMap<Bidegree, LocalSubspaces>) -> Option<Slice> {
    let relevant: Vec<i32> = m
        .support()
        .filter(|b| b.total() == k || b.total() == k + 1)
        .map(|b| b.p)
        .collect();
    let lo = *relevant.iter().min()?;
    let hi = *relevant.iter().max()?;
    let source_basis = |a: i32| {
        let at = Bidegree::new(a, k - a);
        let n = m.dim(at);
        match locals.get(&at) {
            Some(l) => {
                let z = l.cycles();
                let chosen = extend_by_pivots(z.basis(), &RatMatrix::identity(n));
                RatMatrix::identity(n).select_columns(&chosen)
            }
            None => RatMatrix::zeros(n, 0),
        }
    };
    let sink_basis = |a: i32| {
        let at = Bidegree::new(a, k + 1 - a);
        match locals.get(&at) {
            Some(l) => l.boundaries().basis().clone(),
            None => RatMatrix::zeros(m.dim(at), 0),
        }
    };
    let mut vertices = Vec::new();
    for a in lo..=hi {
        vertices.push((Bidegree::new(a, k + 1 - a), sink_basis(a)));
        vertices.push((Bidegree::new(a, k - a), source_basis(a)));
    }
    vertices.push((Bidegree::new(hi + 1, k - hi), sink_basis(hi + 1)));
    let coords = |target: &(Bidegree, RatMatrix), image: RatMatrix| {
        Subspace::span(&target.1)
            .coordinates(&image)
            .map(|c| {
                // canonical basis vs chosen basis: both are the canonical one
                c
            })
            .expect("differentials of sources land in the sinks")
    };
    let mut arrows = Vec::new();
    for i in 0..vertices.len() - 1 {
        if i % 2 == 0 {
            // I_a <- S_a via ∂̄
            let (at, s) = &vertices[i + 1];
            arrows.push(Arrow::Backward(coords(&vertices[i], m.delbar_block(*at).mul(s))));
        } else {
            // S_a -> I_{a+1} via ∂
            let (at, s) = &vertices[i];
            arrows.push(Arrow::Forward(coords(&vertices[i + 1], m.del_block(*at).mul(s))));
        }
    }
    let dims = vertices.iter().map(|(_, b)| b.cols()).collect();
    Some(Slice {
        rep: ZigZagRep { dims, arrows },
        vertices,
        lo,
        k,
    })
}

/// The zig-zag occupying chain positions `s..=e` of a slice.
fn classify_interval(s: usize, e: usize, lo: i32, k: i32) -> ZigZagDescriptor {
    let a = lo + (s / 2) as i32;
    let anchor = Bidegree::new(a, k - a);
    let len = (e - s) as i32;
    let (family, n) = match (s % 2, e % 2) {
        (0, 0) => (Family::A, len / 2),
        (1, 1) => (Family::A, -(len / 2)),
        (0, 1) => (Family::B, (len + 1) / 2),
        _ => (Family::C, (len + 1) / 2),
    };
    ZigZagDescriptor { family, n, anchor }
}

fn zigzag_pieces(m: &Bicomplex) -> Vec<Piece> {
    let locals: BTreeMap<Bidegree, LocalSubspaces> =
        m.support().map(|at| (at, LocalSubspaces::at(m, at))).collect();
    let mut pieces = Vec::new();
    if let Some((lo, hi)) = m.degree_range() {
        for k in lo..=hi {
            let Some(sl) = slice(m, k, &locals) else {
                continue;
            };
            for iv in decompose_rep(&sl.rep) {
                let d = classify_interval(iv.start, iv.end, sl.lo, sl.k);
                let vectors = (iv.start..=iv.end)
                    .map(|v| {
                        let (at, basis) = &sl.vertices[v];
                        (*at, basis.mul_vec(&iv.vectors[v - iv.start]))
                    })
                    .collect();
                pieces.push(Piece {
                    kind: PieceKind::ZigZag(d),
                    vectors,
                });
            }
        }
    }
    for (&at, l) in &locals {
        let dots = quotient_present(&l.cycles(), &l.boundaries()).expect("boundaries are cycles");
        for j in 0..dots.dim() {
            pieces.push(Piece {
                kind: PieceKind::ZigZag(ZigZagDescriptor {
                    family: Family::A,
                    n: 0,
                    anchor: at,
                }),
                vectors: BTreeMap::from([(at, dots.section().column(j))]),
            });
        }
    }
    pieces
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub squares: BTreeMap<Bidegree, usize>,
    pub zigzags: BTreeMap<ZigZagDescriptor, usize>,
    /// Conjugating the input by this gives [`Decomposition::reassemble`].
    pub basis_change: BTreeMap<Bidegree, RatMatrix>,
}

impl Decomposition {
    /// The summands in basis order: squares by anchor, then zig-zags by
    /// descriptor, each repeated by multiplicity.
    pub fn pieces(&self) -> Vec<Bicomplex> {
        let mut out = Vec::new();
        for (&at, &n) in &self.squares {
            out.extend(std::iter::repeat_n(square(at), n));
        }
        for (d, &n) in &self.zigzags {
            out.extend(std::iter::repeat_n(zigzag_shape(d.family, d.n, d.anchor), n));
        }
        out
    }

    pub fn reassemble(&self) -> Bicomplex {
        direct_sum_all(&self.pieces())
    }

    /// The basis change is invertible and turns `input` into the sum of the
    /// pieces exactly.
    pub fn verify(&self, input: &Bicomplex) -> bool {
        if self.basis_change.keys().ne(input.dims().keys()) {
            return false;
        }
        if self
            .basis_change
            .iter()
            .any(|(&at, t)| t.rows() != input.dim(at) || t.cols() != input.dim(at) || t.inverse().is_none())
        {
            return false;
        }
        input.conjugate(&self.basis_change) == self.reassemble()
    }

    pub fn square_count(&self) -> usize {
        self.squares.values().sum()
    }

    /// Multiplicities of `(family, n)` ignoring anchors.
    pub fn shapes(&self) -> BTreeMap<(Family, i32), usize> {
        let mut out = BTreeMap::new();
        for (d, &n) in &self.zigzags {
            *out.entry(d.shape()).or_insert(0) += n;
        }
        out
    }
}

fn tally<T: Ord + Copy>(items: impl IntoIterator<Item = T>) -> BTreeMap<T, usize> {
    let mut out = BTreeMap::new();
    for t in items {
        *out.entry(t).or_insert(0) += 1;
    }
    out
}

fn finish(b: &Bicomplex, pieces: Vec<Piece>) -> Decomposition {
    let (pieces, basis_change) = assemble(b, pieces);
    let squares = tally(pieces.iter().filter_map(|p| match p.kind {
        PieceKind::Square(at) => Some(at),
        PieceKind::ZigZag(_) => None,
    }));
    let zigzags = tally(pieces.iter().filter_map(|p| match p.kind {
        PieceKind::ZigZag(d) => Some(d),
        PieceKind::Square(_) => None,
    }));
    debug_assert!(pieces.iter().all(|p| p.shape().total_dim() == p.vectors.len()));
    Decomposition {
        squares,
        zigzags,
        basis_change,
    }
}

/// Decomposes a minimal bicomplex into zig-zags.
pub fn zigzag_decompose(m: &Bicomplex) -> Result<Decomposition, DecompError> {
    m.ensure_valid()?;
    if let Some(at) = m.first_non_minimal() {
        return Err(DecompError::NotMinimal(at));
    }
    Ok(finish(m, zigzag_pieces(m)))
}

/// Squares plus zig-zags for any valid bicomplex.
pub fn decompose(b: &Bicomplex) -> Result<Decomposition, DecompError> {
    b.ensure_valid()?;
    let (mut pieces, minimal) = split_squares_pieces(b);
    pieces.extend(
        zigzag_pieces(&minimal.minimal)
            .into_iter()
            .map(|p| p.map_vectors(&minimal.minimal_basis)),
    );
    Ok(finish(b, pieces))
}

/// Decomposes an indecomposable minimal bicomplex and reads its family off
/// the Dolbeault dimensions; the two must agree.
pub fn classify_zigzag(z: &Bicomplex) -> Result<ZigZagDescriptor, DecompError> {
    let d = zigzag_decompose(z)?;
    let found: Vec<_> = d.zigzags.iter().collect();
    if found.len() != 1 || *found[0].1 != 1 {
        return Err(DecompError::NotIndecomposable(format!(
            "{} summands",
            d.zigzags.values().sum::<usize>()
        )));
    }
    let dol = |kind| cohomology(z, kind).map(|t| t.total_dim());
    let family = match (dol(CohomologyKind::Del)?, dol(CohomologyKind::Delbar)?) {
        (1, 1) => Family::A,
        (2, 0) => Family::B,
        (0, 2) => Family::C,
        other => {
            return Err(DecompError::NotIndecomposable(format!(
                "Dolbeault dimensions {other:?}"
            )))
        }
    };
    let dim = z.total_dim() as i32;
    let n = match family {
        Family::A => {
            let bc = cohomology(z, CohomologyKind::BottChern)?.total_dim() as i32;
            let a = cohomology(z, CohomologyKind::Aeppli)?.total_dim() as i32;
            (bc - a).signum() * (dim - 1) / 2
        }
        _ => dim / 2,
    };
    let anchor = z
        .support()
        .min_by_key(|b| (b.total(), b.p))
        .expect("nonzero");
    let by_signature = ZigZagDescriptor { family, n, anchor };
    let constructive = *found[0].0;
    if constructive != by_signature {
        return Err(DecompError::NotIndecomposable(format!(
            "sweep found {constructive}, Dolbeault signature gives {by_signature}"
        )));
    }
    Ok(by_signature)
}

/// Zig-zag multiplicities computed without the sweep: in each slice the
/// number of intervals containing `[s, e]` is the rank of the map from the
/// limit to the colimit of the restricted diagram, and interval counts
/// follow by inclusion-exclusion. Dots are counted as `dim H_dot`.
pub fn rank_invariant_multiset(m: &Bicomplex) -> Result<BTreeMap<ZigZagDescriptor, usize>, DecompError> {
    m.ensure_valid()?;
    if let Some(at) = m.first_non_minimal() {
        return Err(DecompError::NotMinimal(at));
    }
    let locals: BTreeMap<Bidegree, LocalSubspaces> =
        m.support().map(|at| (at, LocalSubspaces::at(m, at))).collect();
    let mut out = BTreeMap::new();
    if let Some((lo, hi)) = m.degree_range() {
        for k in lo..=hi {
            let Some(sl) = slice(m, k, &locals) else {
                continue;
            };
            let n = sl.rep.dims.len();
            let mut rk = vec![vec![0usize; n]; n];
            for s in 0..n {
                for e in s..n {
                    rk[s][e] = limit_to_colimit_rank(&sl.rep, s, e);
                }
            }
            let get = |s: isize, e: usize| -> isize {
                if s < 0 || e >= n {
                    0
                } else {
                    rk[s as usize][e] as isize
                }
            };
            for s in 0..n {
                for e in s..n {
                    let si = s as isize;
                    let mult = get(si, e) - get(si - 1, e) - get(si, e + 1) + get(si - 1, e + 1);
                    assert!(mult >= 0, "negative interval multiplicity");
                    if mult > 0 {
                        *out.entry(classify_interval(s, e, sl.lo, sl.k)).or_insert(0) += mult as usize;
                    }
                }
            }
        }
    }
    let dots = bicomplex::cohomology(m, CohomologyKind::Dot)?;
    for (at, d) in dots.dims() {
        *out.entry(ZigZagDescriptor {
            family: Family::A,
            n: 0,
            anchor: at,
        })
        .or_insert(0) += d;
    }
    Ok(out)
}

fn limit_to_colimit_rank(rep: &ZigZagRep, s: usize, e: usize) -> usize {
    let offsets: Vec<usize> = (s..=e)
        .scan(0, |acc, i| {
            let o = *acc;
            *acc += rep.dims[i];
            Some(o)
        })
        .collect();
    let total: usize = (s..=e).map(|i| rep.dims[i]).sum();
    if total == 0 {
        return 0;
    }
    let mut constraints: Vec<RatMatrix> = Vec::new();
    let mut relations: Vec<RatMatrix> = Vec::new();
    for i in s..e {
        let (oi, oj) = (offsets[i - s], offsets[i + 1 - s]);
        let (di, dj) = (rep.dims[i], rep.dims[i + 1]);
        match &rep.arrows[i] {
            Arrow::Forward(f) => {
                // f v_i = v_{i+1}; relation ι_{i+1}(f x) - ι_i(x)
                let mut c = RatMatrix::zeros(dj, total);
                c.set_block(0, oi, f);
                c.set_block(0, oj, &RatMatrix::identity(dj).neg());
                constraints.push(c);
                let mut r = RatMatrix::zeros(total, di);
                r.set_block(oj, 0, f);
                r.set_block(oi, 0, &RatMatrix::identity(di).neg());
                relations.push(r);
            }
            Arrow::Backward(g) => {
                let mut c = RatMatrix::zeros(di, total);
                c.set_block(0, oj, g);
                c.set_block(0, oi, &RatMatrix::identity(di).neg());
                constraints.push(c);
                let mut r = RatMatrix::zeros(total, dj);
                r.set_block(oi, 0, g);
                r.set_block(oj, 0, &RatMatrix::identity(dj).neg());
                relations.push(r);
            }
        }
    }
    let c = constraints
        .into_iter()
        .fold(RatMatrix::zeros(0, total), |acc, m| acc.vstack(&m));
    let r = relations
        .into_iter()
        .fold(RatMatrix::zeros(total, 0), |acc, m| acc.hstack(&m));
    let lim = kernel(&c);
    r.hstack(lim.basis()).rank() - r.rank()
}

/// Dimension tables of every cohomology of the sum of the listed summands.
pub fn predicted_cohomology(
    d: &Decomposition,
) -> Result<BTreeMap<CohomologyKind, BTreeMap<Bidegree, usize>>, DecompError> {
    let mut out: BTreeMap<CohomologyKind, BTreeMap<Bidegree, usize>> = BTreeMap::new();
    for (desc, &mult) in &d.zigzags {
        let tables = all_cohomology(&make_zigzag(desc)?, Exec::Sequential)?;
        for (kind, t) in tables {
            let entry = out.entry(kind).or_default();
            for (at, dim) in t.dims() {
                *entry.entry(at).or_insert(0) += dim * mult;
            }
        }
    }
    Ok(out)
}

/// One row of the tensor table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorRow {
    pub left: ZigZagDescriptor,
    pub right: ZigZagDescriptor,
    pub clause: &'static str,
    pub expected: BTreeMap<(Family, i32), usize>,
    /// Surviving zig-zags with their anchors.
    pub found: BTreeMap<ZigZagDescriptor, usize>,
    pub squares: usize,
    pub reassembled: bool,
    pub kunneth: bool,
}

impl TensorRow {
    pub fn found_shapes(&self) -> BTreeMap<(Family, i32), usize> {
        let mut out = BTreeMap::new();
        for (d, &n) in &self.found {
            *out.entry(d.shape()).or_insert(0) += n;
        }
        out
    }

    pub fn ok(&self) -> bool {
        self.found_shapes() == self.expected && self.reassembled && self.kunneth
    }
}

/// The predicted product of two zig-zags modulo squares and shifts.
/// For two C's the smaller parameter survives, mirroring the B case under
/// the symmetry exchanging `∂` and `∂̄`.
pub fn expected_product(l: (Family, i32), r: (Family, i32)) -> (&'static str, BTreeMap<(Family, i32), usize>) {
    use Family::*;
    let one = |f, n| BTreeMap::from([((f, n), 1)]);
    match (l, r) {
        ((A, i), (A, j)) => ("A_i*A_j = A_{i+j}", one(A, i + j)),
        ((A, _), (B, j)) | ((B, j), (A, _)) => ("A_i*B_j = B_j", one(B, j)),
        ((A, _), (C, j)) | ((C, j), (A, _)) => ("A_i*C_j = C_j", one(C, j)),
        ((B, i), (B, j)) => ("B_i*B_j = 2B_min(i,j)", BTreeMap::from([((B, i.min(j)), 2)])),
        ((C, i), (C, j)) => ("C_i*C_j = 2C_min(i,j)", BTreeMap::from([((C, i.min(j)), 2)])),
        ((B, _), (C, _)) | ((C, _), (B, _)) => ("B_i*C_j = 0", BTreeMap::new()),
    }
}

/// Per-bidegree Dolbeault dimensions of `X ⊗ Y` equal the convolution of
/// those of the factors.
fn kunneth_holds(x: &Bicomplex, y: &Bicomplex, xy: &Bicomplex) -> Result<bool, DecompError> {
    for kind in [CohomologyKind::Del, CohomologyKind::Delbar] {
        let hx = cohomology(x, kind)?.dims();
        let hy = cohomology(y, kind)?.dims();
        let mut conv: BTreeMap<Bidegree, usize> = BTreeMap::new();
        for (&a, &da) in &hx {
            for (&b, &db) in &hy {
                *conv.entry(a + b).or_insert(0) += da * db;
            }
        }
        if cohomology(xy, kind)?.dims() != conv {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn tensor_row(left: ZigZagDescriptor, right: ZigZagDescriptor) -> Result<TensorRow, DecompError> {
    let x = make_zigzag(&left)?;
    let y = make_zigzag(&right)?;
    let xy = tensor(&x, &y);
    let d = decompose(&xy)?;
    let (clause, expected) = expected_product(left.shape(), right.shape());
    Ok(TensorRow {
        left,
        right,
        clause,
        expected,
        found: d.zigzags.clone(),
        squares: d.square_count(),
        reassembled: d.verify(&xy),
        kunneth: kunneth_holds(&x, &y, &xy)?,
    })
}

/// All pairs with `|n| ≤ max` for A and `1 ≤ n ≤ max` for B and C:
/// `(A,A)`, `(A,B)`, `(A,C)`, `(B,B)` and `(C,C)` with `i ≤ j`, `(B,C)`.
pub fn tensor_table(max: i32, exec: Exec) -> Result<Vec<TensorRow>, DecompError> {
    let origin = Bidegree::new(0, 0);
    let a: Vec<i32> = (-max..=max).collect();
    let bc: Vec<i32> = (1..=max).collect();
    let d = |f, n| ZigZagDescriptor { family: f, n, anchor: origin };
    let mut pairs = Vec::new();
    for &i in &a {
        for &j in &a {
            pairs.push((d(Family::A, i), d(Family::A, j)));
        }
        for &j in &bc {
            pairs.push((d(Family::A, i), d(Family::B, j)));
            pairs.push((d(Family::A, i), d(Family::C, j)));
        }
    }
    for &i in &bc {
        for &j in &bc {
            if i <= j {
                pairs.push((d(Family::B, i), d(Family::B, j)));
                pairs.push((d(Family::C, i), d(Family::C, j)));
            }
            pairs.push((d(Family::B, i), d(Family::C, j)));
        }
    }
    exec.map(pairs, |(l, r)| tensor_row(l, r)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicomplex::{direct_sum, dot, minimal_model};

    fn bd(p: i32, q: i32) -> Bidegree {
        Bidegree::new(p, q)
    }

    fn zz(s: &str) -> ZigZagDescriptor {
        s.parse().unwrap()
    }

    #[test]
    fn descriptors_parse_and_build() {
        assert_eq!(make_zigzag(&zz("A_0@(0,0)")).unwrap(), dot(bd(0, 0)));
        let b1 = make_zigzag(&zz("B_1")).unwrap();
        assert_eq!(b1.dims(), &BTreeMap::from([(bd(0, 0), 1), (bd(0, 1), 1)]));
        let c2 = make_zigzag(&zz("C2")).unwrap();
        assert_eq!(c2.total_dim(), 4);
        assert_eq!(cohomology(&c2, CohomologyKind::Del).unwrap().total_dim(), 0);
        assert_eq!(cohomology(&c2, CohomologyKind::Delbar).unwrap().total_dim(), 2);
        assert!("B_0".parse::<ZigZagDescriptor>().is_err());
        assert!("D_1".parse::<ZigZagDescriptor>().is_err());
        assert_eq!(zz("A_-2@(1,-1)").to_string(), "A_-2@(1,-1)");
    }

    #[test]
    fn split_square_and_dot() {
        let s = split_squares(&square(bd(0, 0))).unwrap();
        assert_eq!(s.squares, vec![bd(0, 0)]);
        assert!(s.minimal.is_zero());
        let d = split_squares(&dot(bd(0, 0))).unwrap();
        assert!(d.squares.is_empty());
        assert_eq!(d.minimal, dot(bd(0, 0)));
    }

    #[test]
    fn split_reassembles() {
        let b = direct_sum(&square(bd(0, 0)), &make_zigzag(&zz("A_1")).unwrap());
        let s = split_squares(&b).unwrap();
        assert_eq!(s.squares.len(), 1);
        let mut expect = square(bd(0, 0));
        expect = direct_sum(&expect, &s.minimal);
        assert_eq!(b.conjugate(&s.basis_change), expect);
    }

    #[test]
    fn single_zigzags_classify() {
        for s in ["A_0", "A_1", "A_-1", "A_3@(1,2)", "A_-3", "B_1", "B_3@(-1,0)", "C_1", "C_4"] {
            let d = zz(s);
            let z = make_zigzag(&d).unwrap();
            assert_eq!(classify_zigzag(&z).unwrap(), d, "{s}");
            let dec = zigzag_decompose(&z).unwrap();
            assert!(dec.verify(&z));
        }
        let two = direct_sum(&dot(bd(0, 0)), &dot(bd(1, 0)));
        assert!(classify_zigzag(&two).is_err());
    }

    #[test]
    fn sums_decompose() {
        let pieces = ["A_1", "B_2@(0,1)", "C_1@(1,0)", "A_-2", "A_0@(1,1)"];
        let b = direct_sum_all(&pieces.iter().map(|s| make_zigzag(&zz(s)).unwrap()).collect::<Vec<_>>());
        let d = decompose(&b).unwrap();
        assert!(d.verify(&b));
        let expected: BTreeMap<_, _> = pieces.iter().map(|s| (zz(s), 1)).collect();
        assert_eq!(d.zigzags, expected);
        assert_eq!(rank_invariant_multiset(&b).unwrap(), expected);
    }

    #[test]
    fn overlapping_slices_decompose() {
        // Two zig-zags sharing bidegrees, glued by a basis change.
        let b = direct_sum(&make_zigzag(&zz("A_2")).unwrap(), &make_zigzag(&zz("A_-1@(0,1)")).unwrap());
        let b = direct_sum(&b, &make_zigzag(&zz("B_1@(1,0)")).unwrap());
        let mut t = BTreeMap::new();
        for (&at, &n) in b.dims() {
            let mut m = RatMatrix::identity(n);
            for i in 0..n {
                for j in 0..n {
                    if i < j {
                        m[(i, j)] = Rational::from_integer(((i + 2 * j) as i64 % 3 - 1).into());
                    }
                }
            }
            t.insert(at, m);
        }
        let scrambled = b.conjugate(&t);
        let d = decompose(&scrambled).unwrap();
        assert!(d.verify(&scrambled));
        assert_eq!(d.zigzags, decompose(&b).unwrap().zigzags);
    }

    #[test]
    fn minimal_model_of_product() {
        let a1 = make_zigzag(&zz("A_1")).unwrap();
        let mm = minimal_model(&tensor(&a1, &a1)).unwrap();
        let d = zigzag_decompose(&mm).unwrap();
        assert_eq!(d.shapes(), BTreeMap::from([((Family::A, 2), 1)]));
    }

    #[test]
    fn dimension_tables_do_not_determine_the_summands() {
        let x = direct_sum(&make_zigzag(&zz("A_1")).unwrap(), &make_zigzag(&zz("A_-1")).unwrap());
        let y = direct_sum(&make_zigzag(&zz("B_2")).unwrap(), &make_zigzag(&zz("C_1")).unwrap());
        for kind in [
            CohomologyKind::BottChern,
            CohomologyKind::Aeppli,
            CohomologyKind::Del,
            CohomologyKind::Delbar,
        ] {
            assert_eq!(cohomology(&x, kind).unwrap().dims(), cohomology(&y, kind).unwrap().dims(), "{kind}");
        }
        assert_ne!(rank_invariant_multiset(&x).unwrap(), rank_invariant_multiset(&y).unwrap());
    }

    #[test]
    fn tensor_rows() {
        let row = tensor_row(zz("A_1"), zz("A_-1")).unwrap();
        assert_eq!(row.found_shapes(), BTreeMap::from([((Family::A, 0), 1)]));
        assert!(row.ok());
        let row = tensor_row(zz("B_1"), zz("C_1")).unwrap();
        assert!(row.found.is_empty());
        assert!(row.ok());
        let row = tensor_row(zz("B_1"), zz("B_2")).unwrap();
        assert_eq!(row.found_shapes(), BTreeMap::from([((Family::B, 1), 2)]));
        assert!(row.ok());
    }
}
