//! Finite bicomplexes over the rationals.
//!
//! A [`Bicomplex`] is a finitely supported bigraded vector space with two
//! differentials: `del` of bidegree (1,0) and `delbar` of bidegree (0,1).
//! They square to zero and anticommute. Every bidegree carries the standard
//! basis `e_0..e_{d-1}` and blocks are stored as matrices acting on column
//! vectors; absent blocks are zero maps.

pub(crate) mod cohomology;
pub(crate) mod truncation;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactq::{rat, RatMatrix, Rational};

pub use cohomology::{
    all_cohomology, cohomology, cohomology_with, connectivity, is_contractible, CohomologyKind,
    CohomologyTable, Connectivity, LocalSubspaces,
};
pub use truncation::{
    cohomology_bicomplex, minimal_model, quotient_bicomplex, sub_bicomplex, truncate,
    Side, Truncation,
};

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct Bidegree {
    pub p: i32,
    pub q: i32,
}

impl Bidegree {
    pub const fn new(p: i32, q: i32) -> Self {
        Bidegree { p, q }
    }

    pub const fn total(self) -> i32 {
        self.p + self.q
    }

    pub const DEL: Bidegree = Bidegree::new(1, 0);
    pub const DELBAR: Bidegree = Bidegree::new(0, 1);
}

impl Add for Bidegree {
    type Output = Bidegree;
    fn add(self, o: Bidegree) -> Bidegree {
        Bidegree::new(self.p + o.p, self.q + o.q)
    }
}

impl Sub for Bidegree {
    type Output = Bidegree;
    fn sub(self, o: Bidegree) -> Bidegree {
        Bidegree::new(self.p - o.p, self.q - o.q)
    }
}

impl Neg for Bidegree {
    type Output = Bidegree;
    fn neg(self) -> Bidegree {
        Bidegree::new(-self.p, -self.q)
    }
}

impl fmt::Display for Bidegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.p, self.q)
    }
}

/// Which of the two differentials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Differential {
    Del,
    Delbar,
}

impl Differential {
    pub fn step(self) -> Bidegree {
        match self {
            Differential::Del => Bidegree::DEL,
            Differential::Delbar => Bidegree::DELBAR,
        }
    }
}

impl fmt::Display for Differential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Differential::Del => "del",
            Differential::Delbar => "delbar",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum IdentityKind {
    DelSquared,
    DelbarSquared,
    Anticommutation,
}

impl fmt::Display for IdentityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdentityKind::DelSquared => "del^2 != 0",
            IdentityKind::DelbarSquared => "delbar^2 != 0",
            IdentityKind::Anticommutation => "del delbar + delbar del != 0",
        })
    }
}

/// One failing identity, located at the source bidegree of the composite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub identity: IdentityKind,
    pub at: Bidegree,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}", self.identity, self.at)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BicomplexError {
    #[error("{which} block at {at} has shape {found:?}, expected {expected:?}")]
    Shape {
        which: Differential,
        at: Bidegree,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid bicomplex: {}", join(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("bicomplex is not minimal (del delbar != 0 at {0})")]
    NotMinimal(Bidegree),
    #[error("{0}")]
    Unsupported(String),
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Clone, PartialEq, Eq, Default)]
pub struct Bicomplex {
    dims: BTreeMap<Bidegree, usize>,
    del: BTreeMap<Bidegree, RatMatrix>,
    delbar: BTreeMap<Bidegree, RatMatrix>,
}

impl fmt::Debug for Bicomplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bicomplex")
            .field("dims", &self.dims)
            .field("del", &self.del)
            .field("delbar", &self.delbar)
            .finish()
    }
}

impl Bicomplex {
    pub fn zero() -> Self {
        Bicomplex::default()
    }

    /// Assembles a bicomplex from its blocks, checking only block shapes.
    ///
    /// Zero-dimensional entries and zero blocks are dropped. Use
    /// [`Bicomplex::validate`] for the differential identities.
    pub fn from_blocks(
        dims: BTreeMap<Bidegree, usize>,
        del: BTreeMap<Bidegree, RatMatrix>,
        delbar: BTreeMap<Bidegree, RatMatrix>,
    ) -> Result<Self, BicomplexError> {
        let dims: BTreeMap<_, _> = dims.into_iter().filter(|&(_, d)| d > 0).collect();
        let dim = |b: &Bidegree| dims.get(b).copied().unwrap_or(0);
        let mut out = Bicomplex {
            dims: dims.clone(),
            ..Default::default()
        };
        for (which, blocks) in [(Differential::Del, del), (Differential::Delbar, delbar)] {
            for (at, m) in blocks {
                let expected = (dim(&(at + which.step())), dim(&at));
                if (m.rows(), m.cols()) != expected {
                    return Err(BicomplexError::Shape {
                        which,
                        at,
                        expected,
                        found: (m.rows(), m.cols()),
                    });
                }
                if !m.is_zero() {
                    out.blocks_mut(which).insert(at, m);
                }
            }
        }
        Ok(out)
    }

    /// Like [`Bicomplex::from_blocks`] but also requires the identities.
    pub fn new(
        dims: BTreeMap<Bidegree, usize>,
        del: BTreeMap<Bidegree, RatMatrix>,
        delbar: BTreeMap<Bidegree, RatMatrix>,
    ) -> Result<Self, BicomplexError> {
        let b = Self::from_blocks(dims, del, delbar)?;
        b.ensure_valid()?;
        Ok(b)
    }

    fn blocks_mut(&mut self, which: Differential) -> &mut BTreeMap<Bidegree, RatMatrix> {
        match which {
            Differential::Del => &mut self.del,
            Differential::Delbar => &mut self.delbar,
        }
    }

    pub fn blocks(&self, which: Differential) -> &BTreeMap<Bidegree, RatMatrix> {
        match which {
            Differential::Del => &self.del,
            Differential::Delbar => &self.delbar,
        }
    }

    pub fn dim(&self, b: Bidegree) -> usize {
        self.dims.get(&b).copied().unwrap_or(0)
    }

    pub fn dims(&self) -> &BTreeMap<Bidegree, usize> {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.values().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = Bidegree> + '_ {
        self.dims.keys().copied()
    }

    /// `(min, max)` total degree of the support.
    pub fn degree_range(&self) -> Option<(i32, i32)> {
        let min = self.support().map(Bidegree::total).min()?;
        let max = self.support().map(Bidegree::total).max()?;
        Some((min, max))
    }

    /// Smallest box `[pmin, pmax] x [qmin, qmax]` containing the support.
    pub fn bounding_box(&self) -> Option<(Bidegree, Bidegree)> {
        let pmin = self.support().map(|b| b.p).min()?;
        let pmax = self.support().map(|b| b.p).max()?;
        let qmin = self.support().map(|b| b.q).min()?;
        let qmax = self.support().map(|b| b.q).max()?;
        Some((Bidegree::new(pmin, qmin), Bidegree::new(pmax, qmax)))
    }

    /// The block of `which` leaving `at`; zero if absent.
    pub fn block(&self, which: Differential, at: Bidegree) -> RatMatrix {
        match self.blocks(which).get(&at) {
            Some(m) => m.clone(),
            None => RatMatrix::zeros(self.dim(at + which.step()), self.dim(at)),
        }
    }

    pub fn del_block(&self, at: Bidegree) -> RatMatrix {
        self.block(Differential::Del, at)
    }

    pub fn delbar_block(&self, at: Bidegree) -> RatMatrix {
        self.block(Differential::Delbar, at)
    }

    /// The composite `del ∘ delbar` leaving `at`.
    pub fn del_delbar_block(&self, at: Bidegree) -> RatMatrix {
        self.del_block(at + Bidegree::DELBAR).mul(&self.delbar_block(at))
    }

    /// Checks `del^2 = 0`, `delbar^2 = 0` and anticommutation blockwise.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for at in self.support() {
            let d = self.del_block(at);
            let db = self.delbar_block(at);
            if !self.del_block(at + Bidegree::DEL).mul(&d).is_zero() {
                out.push(Diagnostic {
                    identity: IdentityKind::DelSquared,
                    at,
                });
            }
            if !self.delbar_block(at + Bidegree::DELBAR).mul(&db).is_zero() {
                out.push(Diagnostic {
                    identity: IdentityKind::DelbarSquared,
                    at,
                });
            }
            let top = at + Bidegree::new(1, 1);
            let anti = self
                .del_block(at + Bidegree::DELBAR)
                .mul(&db)
                .add(&self.delbar_block(at + Bidegree::DEL).mul(&d));
            if self.dim(top) > 0 && !anti.is_zero() {
                out.push(Diagnostic {
                    identity: IdentityKind::Anticommutation,
                    at,
                });
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<(), BicomplexError> {
        let diagnostics = self.validate();
        if diagnostics.is_empty() {
            Ok(())
        } else {
            Err(BicomplexError::Invalid(diagnostics))
        }
    }

    /// `del delbar = 0` everywhere.
    pub fn is_minimal(&self) -> bool {
        self.first_non_minimal().is_none()
    }

    pub fn first_non_minimal(&self) -> Option<Bidegree> {
        self.support().find(|&b| !self.del_delbar_block(b).is_zero())
    }

    /// Applies a bidegree-wise change of basis. Column `j` of `basis[b]` is
    /// the `j`-th new basis vector of `V^b` in old coordinates; the result
    /// expresses the differentials in the new basis.
    pub fn conjugate(&self, basis: &BTreeMap<Bidegree, RatMatrix>) -> Bicomplex {
        let inverses: BTreeMap<Bidegree, RatMatrix> = basis
            .iter()
            .map(|(&b, t)| (b, t.inverse().expect("change of basis must be invertible")))
            .collect();
        let get = |b: Bidegree| basis.get(&b).cloned().unwrap_or_else(|| RatMatrix::identity(self.dim(b)));
        let get_inv = |b: Bidegree| {
            inverses
                .get(&b)
                .cloned()
                .unwrap_or_else(|| RatMatrix::identity(self.dim(b)))
        };
        let mut out = Bicomplex {
            dims: self.dims.clone(),
            ..Default::default()
        };
        for which in [Differential::Del, Differential::Delbar] {
            for (&at, m) in self.blocks(which) {
                let conj = get_inv(at + which.step()).mul(m).mul(&get(at));
                if !conj.is_zero() {
                    out.blocks_mut(which).insert(at, conj);
                }
            }
        }
        out
    }

    /// Translates the support by `shift` without changing any signs.
    pub fn translate(&self, shift: Bidegree) -> Bicomplex {
        Bicomplex {
            dims: self.dims.iter().map(|(&b, &d)| (b + shift, d)).collect(),
            del: self.del.iter().map(|(&b, m)| (b + shift, m.clone())).collect(),
            delbar: self.delbar.iter().map(|(&b, m)| (b + shift, m.clone())).collect(),
        }
    }
}

/// The one-dimensional bicomplex at `at`.
pub fn dot(at: Bidegree) -> Bicomplex {
    Bicomplex {
        dims: BTreeMap::from([(at, 1)]),
        ..Default::default()
    }
}

/// The square generated by `x` at `at`, basis `(x, ∂x, ∂̄x, ∂∂̄x)` with
/// `∂̄(∂x) = -∂∂̄x`.
pub fn square(at: Bidegree) -> Bicomplex {
    let one = RatMatrix::from_i64(&[&[1]]);
    let minus = RatMatrix::from_i64(&[&[-1]]);
    let dims = BTreeMap::from([
        (at, 1),
        (at + Bidegree::DEL, 1),
        (at + Bidegree::DELBAR, 1),
        (at + Bidegree::new(1, 1), 1),
    ]);
    let del = BTreeMap::from([(at, one.clone()), (at + Bidegree::DELBAR, one.clone())]);
    let delbar = BTreeMap::from([(at, one), (at + Bidegree::DEL, minus)]);
    Bicomplex { dims, del, delbar }
}

/// Zig-zag families: balanced (A), vertical ends (B), horizontal ends (C).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::A => "A",
            Family::B => "B",
            Family::C => "C",
        })
    }
}

/// The dots of a zig-zag as `(sources, sinks)` plus the arrows between them.
///
/// `anchor` is the leftmost source (the dot itself for `A_0`). Sources sit
/// at total degree `anchor.total()`, sinks one degree higher.
pub(crate) struct ZigZagLayout {
    pub sources: Vec<Bidegree>,
    pub sinks: Vec<Bidegree>,
    /// `(source index, sink index, differential)`.
    pub arrows: Vec<(usize, usize, Differential)>,
}

pub(crate) fn zigzag_layout(family: Family, n: i32, anchor: Bidegree) -> ZigZagLayout {
    let (a, b) = (anchor.p, anchor.q);
    let src = |i: i32| Bidegree::new(a + i, b - i);
    let mut arrows = Vec::new();
    let (sources, sinks): (Vec<_>, Vec<_>) = match family {
        Family::A if n == 0 => (vec![anchor], vec![]),
        Family::A if n > 0 => {
            // sinks (a+i, b+1-i), i = 0..=n; source i hits sinks i (delbar), i+1 (del)
            for i in 0..n as usize {
                arrows.push((i, i, Differential::Delbar));
                arrows.push((i, i + 1, Differential::Del));
            }
            (
                (0..n).map(src).collect(),
                (0..=n).map(|i| Bidegree::new(a + i, b + 1 - i)).collect(),
            )
        }
        Family::A => {
            let m = -n;
            // sources i = 0..=m, sinks (a+i+1, b-i), i < m
            for i in 0..m as usize {
                arrows.push((i, i, Differential::Del));
                arrows.push((i + 1, i, Differential::Delbar));
            }
            (
                (0..=m).map(src).collect(),
                (0..m).map(|i| Bidegree::new(a + i + 1, b - i)).collect(),
            )
        }
        Family::B => {
            // sinks (a+i, b+1-i), sources (a+i, b-i), i < n
            for i in 0..n as usize {
                arrows.push((i, i, Differential::Delbar));
                if i + 1 < n as usize {
                    arrows.push((i, i + 1, Differential::Del));
                }
            }
            (
                (0..n).map(src).collect(),
                (0..n).map(|i| Bidegree::new(a + i, b + 1 - i)).collect(),
            )
        }
        Family::C => {
            // sinks (a+i+1, b-i), i < n
            for i in 0..n as usize {
                arrows.push((i, i, Differential::Del));
                if i > 0 {
                    arrows.push((i, i - 1, Differential::Delbar));
                }
            }
            (
                (0..n).map(src).collect(),
                (0..n).map(|i| Bidegree::new(a + i + 1, b - i)).collect(),
            )
        }
    };
    ZigZagLayout {
        sources,
        sinks,
        arrows,
    }
}

/// Builds the zig-zag with every structure map equal to `+1`.
pub(crate) fn zigzag_shape(family: Family, n: i32, anchor: Bidegree) -> Bicomplex {
    let layout = zigzag_layout(family, n, anchor);
    let mut dims = BTreeMap::new();
    for &b in layout.sources.iter().chain(&layout.sinks) {
        *dims.entry(b).or_insert(0) += 1;
    }
    debug_assert!(dims.values().all(|&d| d == 1));
    let mut del = BTreeMap::new();
    let mut delbar = BTreeMap::new();
    for &(s, t, which) in &layout.arrows {
        let from = layout.sources[s];
        debug_assert_eq!(from + which.step(), layout.sinks[t]);
        let target = match which {
            Differential::Del => &mut del,
            Differential::Delbar => &mut delbar,
        };
        target.insert(from, RatMatrix::from_i64(&[&[1]]));
    }
    Bicomplex { dims, del, delbar }
}

/// The three-dot shape with a source corner at `(-1,-1)`; `V[1] = L ⊗ V`.
pub fn shift_up_shape() -> Bicomplex {
    zigzag_shape(Family::A, 1, Bidegree::new(-1, -1))
}

/// The three-dot shape with a sink corner at `(1,1)`; `V[-1] = L' ⊗ V`.
pub fn shift_down_shape() -> Bicomplex {
    zigzag_shape(Family::A, -1, Bidegree::new(0, 1))
}

/// `V[direction]` for `direction = ±1`.
pub fn shift(v: &Bicomplex, direction: i32) -> Result<Bicomplex, BicomplexError> {
    match direction {
        1 => Ok(tensor(&shift_up_shape(), v)),
        -1 => Ok(tensor(&shift_down_shape(), v)),
        other => Err(BicomplexError::Unsupported(format!(
            "shift direction must be +1 or -1, got {other}"
        ))),
    }
}

pub fn direct_sum(x: &Bicomplex, y: &Bicomplex) -> Bicomplex {
    let mut dims = x.dims.clone();
    for (&b, &d) in &y.dims {
        *dims.entry(b).or_insert(0) += d;
    }
    let mut out = Bicomplex {
        dims,
        ..Default::default()
    };
    for which in [Differential::Del, Differential::Delbar] {
        let keys: std::collections::BTreeSet<Bidegree> = x
            .blocks(which)
            .keys()
            .chain(y.blocks(which).keys())
            .copied()
            .collect();
        for at in keys {
            let to = at + which.step();
            let mut m = RatMatrix::zeros(out.dim(to), out.dim(at));
            m.set_block(0, 0, &x.block(which, at));
            m.set_block(x.dim(to), x.dim(at), &y.block(which, at));
            out.blocks_mut(which).insert(at, m);
        }
    }
    out
}

pub fn direct_sum_all<'a>(parts: impl IntoIterator<Item = &'a Bicomplex>) -> Bicomplex {
    parts
        .into_iter()
        .fold(Bicomplex::zero(), |acc, b| direct_sum(&acc, b))
}

/// Basis bookkeeping for a tensor product: at each bidegree the basis is the
/// concatenation, over pairs `(a, b)` with `a + b` fixed and `a` ascending,
/// of the Kronecker basis of `X^a ⊗ Y^b`.
pub(crate) struct TensorLayout {
    pub offsets: BTreeMap<(Bidegree, Bidegree), usize>,
    pub dims: BTreeMap<Bidegree, usize>,
}

pub(crate) fn tensor_layout(x: &Bicomplex, y: &Bicomplex) -> TensorLayout {
    let mut offsets = BTreeMap::new();
    let mut dims: BTreeMap<Bidegree, usize> = BTreeMap::new();
    let mut pairs: Vec<(Bidegree, Bidegree, Bidegree)> = Vec::new();
    for a in x.support() {
        for b in y.support() {
            pairs.push((a + b, a, b));
        }
    }
    pairs.sort();
    for (t, a, b) in pairs {
        let entry = dims.entry(t).or_insert(0);
        offsets.insert((a, b), *entry);
        *entry += x.dim(a) * y.dim(b);
    }
    TensorLayout { offsets, dims }
}

/// `X ⊗ Y` with `∂(a⊗b) = ∂a⊗b + (-1)^{|a|} a⊗∂b`, likewise for `∂̄`.
pub fn tensor(x: &Bicomplex, y: &Bicomplex) -> Bicomplex {
    let layout = tensor_layout(x, y);
    let mut out = Bicomplex {
        dims: layout.dims.clone(),
        ..Default::default()
    };
    for which in [Differential::Del, Differential::Delbar] {
        let step = which.step();
        let mut blocks: BTreeMap<Bidegree, RatMatrix> = BTreeMap::new();
        for (&(a, b), &off) in &layout.offsets {
            let src = a + b;
            let tgt = src + step;
            let (da, db) = (x.dim(a), y.dim(b));
            let rows = out.dim(tgt);
            if rows == 0 {
                continue;
            }
            let cols = out.dim(src);
            let m = blocks
                .entry(src)
                .or_insert_with(|| RatMatrix::zeros(rows, cols));
            if let Some(dx) = x.blocks(which).get(&a) {
                let to = layout.offsets[&(a + step, b)];
                m.add_block(to, off, &dx.kron(&RatMatrix::identity(db)));
            }
            if let Some(dy) = y.blocks(which).get(&b) {
                let to = layout.offsets[&(a, b + step)];
                let sign = if a.total().rem_euclid(2) == 0 {
                    Rational::one()
                } else {
                    -Rational::one()
                };
                m.add_block(to, off, &RatMatrix::identity(da).kron(dy).scale(&sign));
            }
        }
        for (at, m) in blocks {
            if !m.is_zero() {
                out.blocks_mut(which).insert(at, m);
            }
        }
    }
    out
}

/// Layout of `Hom(X, Y)`: in bidegree `(r,s)` the basis runs over source
/// bidegrees `b` (ascending) and, within one block, over matrix entries
/// `(i, j)` of `X^b -> Y^{b+(r,s)}` in row-major order.
pub(crate) struct HomLayout {
    pub offsets: BTreeMap<(Bidegree, Bidegree), usize>,
    pub dims: BTreeMap<Bidegree, usize>,
}

pub(crate) fn hom_layout(x: &Bicomplex, y: &Bicomplex) -> HomLayout {
    let mut offsets = BTreeMap::new();
    let mut dims: BTreeMap<Bidegree, usize> = BTreeMap::new();
    let mut pairs: Vec<(Bidegree, Bidegree)> = Vec::new();
    for b in x.support() {
        for c in y.support() {
            pairs.push((c - b, b));
        }
    }
    pairs.sort();
    for (rs, b) in pairs {
        let entry = dims.entry(rs).or_insert(0);
        offsets.insert((rs, b), *entry);
        *entry += x.dim(b) * y.dim(b + rs);
    }
    HomLayout { offsets, dims }
}

/// The internal Hom bicomplex with `∂ψ = ∂_Y ψ - (-1)^{|ψ|} ψ ∂_X`.
pub fn hom(x: &Bicomplex, y: &Bicomplex) -> Bicomplex {
    let layout = hom_layout(x, y);
    let mut out = Bicomplex {
        dims: layout.dims.clone(),
        ..Default::default()
    };
    for which in [Differential::Del, Differential::Delbar] {
        let step = which.step();
        let mut blocks: BTreeMap<Bidegree, RatMatrix> = BTreeMap::new();
        for (&(rs, b), &off) in &layout.offsets {
            let tgt_rs = rs + step;
            let rows = out.dim(tgt_rs);
            if rows == 0 {
                continue;
            }
            let (dx, dy) = (x.dim(b), y.dim(b + rs));
            let cols = out.dim(rs);
            let m = blocks
                .entry(rs)
                .or_insert_with(|| RatMatrix::zeros(rows, cols));
            let sign = if rs.total().rem_euclid(2) == 0 {
                -Rational::one()
            } else {
                Rational::one()
            };
            // ψ = E_ij in block b.
            let dy_block = y.blocks(which).get(&(b + rs));
            let dx_block = x.blocks(which).get(&(b - step));
            for i in 0..dy {
                for j in 0..dx {
                    let col = off + i * dx + j;
                    if let Some(d) = dy_block {
                        // ∂_Y E_ij lives in block b of Hom^{rs+step}
                        let to = layout.offsets[&(tgt_rs, b)];
                        for k in 0..d.rows() {
                            let c = &d[(k, i)];
                            if !c.is_zero() {
                                m[(to + k * dx + j, col)] += c;
                            }
                        }
                    }
                    if let Some(d) = dx_block {
                        // E_ij ∂_X lives in block b - step
                        let src = b - step;
                        let to = layout.offsets[&(tgt_rs, src)];
                        let width = x.dim(src);
                        for l in 0..width {
                            let c = &d[(j, l)];
                            if !c.is_zero() {
                                m[(to + i * width + l, col)] += &sign * c;
                            }
                        }
                    }
                }
            }
        }
        for (at, m) in blocks {
            if !m.is_zero() {
                out.blocks_mut(which).insert(at, m);
            }
        }
    }
    out
}

/// The scalar `(-1)^n`.
pub(crate) fn sign(n: i32) -> Rational {
    if n.rem_euclid(2) == 0 {
        rat(1)
    } else {
        rat(-1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bd(p: i32, q: i32) -> Bidegree {
        Bidegree::new(p, q)
    }

    #[test]
    fn fixtures_are_valid() {
        assert!(square(bd(0, 0)).validate().is_empty());
        assert!(dot(bd(2, -1)).validate().is_empty());
        for n in -3..=3 {
            assert!(zigzag_shape(Family::A, n, bd(0, 0)).validate().is_empty());
        }
        for n in 1..=3 {
            assert!(zigzag_shape(Family::B, n, bd(1, 1)).validate().is_empty());
            assert!(zigzag_shape(Family::C, n, bd(1, 1)).validate().is_empty());
        }
    }

    #[test]
    fn commuting_sign_error_is_reported() {
        // x at (0,0) with ∂x = a, ∂̄x = b, and one top dot t with ∂b = t, ∂̄a = t:
        // anticommutation would need ∂̄a = -t.
        let dims = BTreeMap::from([(bd(0, 0), 1), (bd(1, 0), 1), (bd(0, 1), 1), (bd(1, 1), 1)]);
        let one = RatMatrix::from_i64(&[&[1]]);
        let del = BTreeMap::from([(bd(0, 0), one.clone()), (bd(0, 1), one.clone())]);
        let delbar = BTreeMap::from([(bd(0, 0), one.clone()), (bd(1, 0), one)]);
        let b = Bicomplex::from_blocks(dims, del, delbar).unwrap();
        assert_eq!(
            b.validate(),
            vec![Diagnostic {
                identity: IdentityKind::Anticommutation,
                at: bd(0, 0)
            }]
        );
        assert!(Bicomplex::new(b.dims.clone(), b.del.clone(), b.delbar.clone()).is_err());
    }

    #[test]
    fn shape_errors_name_the_block() {
        let dims = BTreeMap::from([(bd(0, 0), 1), (bd(1, 0), 2)]);
        let del = BTreeMap::from([(bd(0, 0), RatMatrix::from_i64(&[&[1]]))]);
        let err = Bicomplex::from_blocks(dims, del, BTreeMap::new()).unwrap_err();
        assert!(matches!(
            err,
            BicomplexError::Shape {
                which: Differential::Del,
                at,
                expected: (2, 1),
                found: (1, 1)
            } if at == bd(0, 0)
        ));
    }

    #[test]
    fn shift_of_a_dot_places_the_corner() {
        let up = shift(&dot(bd(0, 0)), 1).unwrap();
        assert_eq!(up.total_dim(), 3);
        assert_eq!(up.dim(bd(-1, -1)), 1);
        assert_eq!(up.dim(bd(0, -1)), 1);
        assert_eq!(up.dim(bd(-1, 0)), 1);
        assert!(!up.del_block(bd(-1, -1)).is_zero());
        assert!(!up.delbar_block(bd(-1, -1)).is_zero());
        let down = shift(&dot(bd(0, 0)), -1).unwrap();
        assert_eq!(down.dim(bd(1, 1)), 1);
        assert!(shift(&Bicomplex::zero(), 1).unwrap().is_zero());
        assert!(shift(&dot(bd(0, 0)), 2).is_err());
    }

    #[test]
    fn tensor_with_unit_dot_is_identity() {
        let z = zigzag_shape(Family::B, 2, bd(0, 1));
        assert_eq!(tensor(&dot(bd(0, 0)), &z), z);
        assert_eq!(tensor(&z, &dot(bd(0, 0))), z);
    }

    #[test]
    fn tensor_and_sum_are_valid() {
        let a = zigzag_shape(Family::A, 1, bd(0, 0));
        let b = zigzag_shape(Family::C, 2, bd(1, 0));
        let t = tensor(&a, &b);
        assert!(t.validate().is_empty());
        assert_eq!(t.total_dim(), 3 * 4);
        let s = direct_sum(&square(bd(0, 0)), &a);
        assert!(s.validate().is_empty());
        assert_eq!(s.total_dim(), 7);
        let sq = tensor(&square(bd(0, 0)), &square(bd(1, 1)));
        assert!(sq.validate().is_empty());
    }

    #[test]
    fn hom_is_a_bicomplex() {
        let x = zigzag_shape(Family::A, -1, bd(0, 1));
        let y = direct_sum(&square(bd(0, 0)), &zigzag_shape(Family::B, 2, bd(0, 1)));
        let h = hom(&x, &y);
        assert!(h.validate().is_empty());
        assert_eq!(h.total_dim(), x.total_dim() * y.total_dim());
    }

    #[test]
    fn conjugation_by_identity_is_trivial() {
        let s = square(bd(0, 0));
        let basis: BTreeMap<_, _> = s.support().map(|b| (b, RatMatrix::identity(1))).collect();
        assert_eq!(s.conjugate(&basis), s);
    }
}
