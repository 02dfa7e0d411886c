//! Bicomplex maps, induced maps on cohomology and mapping cones.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::bicomplex::{
    self, cohomology_with, direct_sum, quotient_bicomplex, square, sub_bicomplex, tensor,
    tensor_layout, truncate, Bicomplex, BicomplexError, Bidegree, CohomologyKind, CohomologyTable,
    Connectivity, Differential, Side,
};
use crate::exactq::{kernel, RatMatrix, Subspace};
use crate::par::Exec;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MorphismError {
    #[error(transparent)]
    Bicomplex(#[from] BicomplexError),
    #[error("map block at {at} has shape {found:?}, expected {expected:?}")]
    Shape {
        at: Bidegree,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("not a bicomplex map: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<MapDiagnostic>),
    #[error("maps are not composable")]
    NotComposable,
    #[error("reduced cone data violates: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    ReducedCone(Vec<ReducedConeViolation>),
    #[error("map connectivity disagrees: cone gives {cone}, cohomology criterion gives {lemma}")]
    Disagreement {
        cone: Connectivity,
        lemma: Connectivity,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MapDiagnostic {
    Shape {
        at: Bidegree,
        expected: (usize, usize),
        found: (usize, usize),
    },
    NotChainMap {
        which: Differential,
        at: Bidegree,
    },
}

impl fmt::Display for MapDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapDiagnostic::Shape { at, expected, found } => {
                write!(f, "block at {at} has shape {found:?}, expected {expected:?}")
            }
            MapDiagnostic::NotChainMap { which, at } => {
                write!(f, "does not commute with {which} at {at}")
            }
        }
    }
}

/// A bidegree-(0,0) linear map between bicomplexes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BicomplexMap {
    source: Bicomplex,
    target: Bicomplex,
    blocks: BTreeMap<Bidegree, RatMatrix>,
}

impl BicomplexMap {
    /// Assembles a map, checking block shapes only.
    pub fn from_blocks(
        source: Bicomplex,
        target: Bicomplex,
        blocks: BTreeMap<Bidegree, RatMatrix>,
    ) -> Result<Self, MorphismError> {
        let mut kept = BTreeMap::new();
        for (at, m) in blocks {
            let expected = (target.dim(at), source.dim(at));
            if (m.rows(), m.cols()) != expected {
                return Err(MorphismError::Shape {
                    at,
                    expected,
                    found: (m.rows(), m.cols()),
                });
            }
            if !m.is_zero() {
                kept.insert(at, m);
            }
        }
        Ok(BicomplexMap {
            source,
            target,
            blocks: kept,
        })
    }

    /// Like [`BicomplexMap::from_blocks`] but also requires the chain-map
    /// identities.
    pub fn new(
        source: Bicomplex,
        target: Bicomplex,
        blocks: BTreeMap<Bidegree, RatMatrix>,
    ) -> Result<Self, MorphismError> {
        let f = Self::from_blocks(source, target, blocks)?;
        f.ensure_valid()?;
        Ok(f)
    }

    pub fn identity(b: &Bicomplex) -> Self {
        BicomplexMap {
            source: b.clone(),
            target: b.clone(),
            blocks: b.dims().iter().map(|(&at, &d)| (at, RatMatrix::identity(d))).collect(),
        }
    }

    pub fn zero(source: &Bicomplex, target: &Bicomplex) -> Self {
        BicomplexMap {
            source: source.clone(),
            target: target.clone(),
            blocks: BTreeMap::new(),
        }
    }

    pub fn source(&self) -> &Bicomplex {
        &self.source
    }

    pub fn target(&self) -> &Bicomplex {
        &self.target
    }

    pub fn blocks(&self) -> &BTreeMap<Bidegree, RatMatrix> {
        &self.blocks
    }

    pub fn block(&self, at: Bidegree) -> RatMatrix {
        self.blocks
            .get(&at)
            .cloned()
            .unwrap_or_else(|| RatMatrix::zeros(self.target.dim(at), self.source.dim(at)))
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &BicomplexMap) -> Result<BicomplexMap, MorphismError> {
        if first.target != self.source {
            return Err(MorphismError::NotComposable);
        }
        let blocks = first
            .blocks
            .keys()
            .filter(|at| self.blocks.contains_key(at))
            .map(|&at| (at, self.blocks[&at].mul(&first.blocks[&at])))
            .collect();
        BicomplexMap::from_blocks(first.source.clone(), self.target.clone(), blocks)
    }

    pub fn validate(&self) -> Vec<MapDiagnostic> {
        let mut out = Vec::new();
        for (&at, m) in &self.blocks {
            let expected = (self.target.dim(at), self.source.dim(at));
            if (m.rows(), m.cols()) != expected {
                out.push(MapDiagnostic::Shape {
                    at,
                    expected,
                    found: (m.rows(), m.cols()),
                });
            }
        }
        if !out.is_empty() {
            return out;
        }
        for which in [Differential::Del, Differential::Delbar] {
            for at in self.source.support() {
                let to = at + which.step();
                let lhs = self.block(to).mul(&self.source.block(which, at));
                let rhs = self.target.block(which, at).mul(&self.block(at));
                if lhs != rhs {
                    out.push(MapDiagnostic::NotChainMap { which, at });
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<(), MorphismError> {
        self.source.ensure_valid()?;
        self.target.ensure_valid()?;
        let d = self.validate();
        if d.is_empty() {
            Ok(())
        } else {
            Err(MorphismError::Invalid(d))
        }
    }

    /// Bidegrees where either side is nonzero.
    fn joint_support(&self) -> BTreeSet<Bidegree> {
        self.source.support().chain(self.target.support()).collect()
    }
}

/// Pointwise kernel of a map, as a sub-bicomplex of the source.
pub fn kernel_of(f: &BicomplexMap) -> Result<(Bicomplex, BicomplexMap), MorphismError> {
    let subspaces: BTreeMap<Bidegree, Subspace> = f
        .source
        .support()
        .map(|at| (at, kernel(&f.block(at))))
        .collect();
    let (k, inc) = sub_bicomplex(&f.source, &subspaces)?;
    let map = BicomplexMap::from_blocks(k.clone(), f.source.clone(), inc)?;
    Ok((k, map))
}

/// The maps induced on cohomology of `kind`, one matrix per bidegree in the
/// joint support, in the bases of the quotient presentations.
pub fn induced_map(
    f: &BicomplexMap,
    kind: CohomologyKind,
) -> Result<BTreeMap<Bidegree, RatMatrix>, MorphismError> {
    f.ensure_valid()?;
    let hs = cohomology_with(&f.source, kind, Exec::default())?;
    let ht = cohomology_with(&f.target, kind, Exec::default())?;
    Ok(induced_unchecked(f, &hs, &ht))
}

pub(crate) fn induced_unchecked(
    f: &BicomplexMap,
    hs: &CohomologyTable,
    ht: &CohomologyTable,
) -> BTreeMap<Bidegree, RatMatrix> {
    f.joint_support()
        .into_iter()
        .map(|at| {
            let m = match (hs.entries.get(&at), ht.entries.get(&at)) {
                (Some(qs), Some(qt)) => {
                    let fb = f.block(at);
                    assert!(
                        qt.numerator().contains(&qs.numerator().map(&fb)),
                        "induced map leaves the cycles at {at}"
                    );
                    assert!(
                        qt.projection().mul(&fb).mul(qs.denominator().basis()).is_zero(),
                        "induced map depends on representatives at {at}"
                    );
                    qt.projection().mul(&fb).mul(qs.section())
                }
                (Some(qs), None) => RatMatrix::zeros(0, qs.dim()),
                (None, Some(qt)) => RatMatrix::zeros(qt.dim(), 0),
                (None, None) => RatMatrix::zeros(0, 0),
            };
            (at, m)
        })
        .collect()
}

/// Induced maps for Bott-Chern and Aeppli cohomology are all bijective.
pub fn is_quasi_iso(f: &BicomplexMap) -> Result<bool, MorphismError> {
    f.ensure_valid()?;
    Ok(is_quasi_iso_unchecked(f, Exec::default()))
}

pub(crate) fn is_quasi_iso_unchecked(f: &BicomplexMap, exec: Exec) -> bool {
    [CohomologyKind::BottChern, CohomologyKind::Aeppli]
        .into_iter()
        .all(|kind| {
            let hs = bicomplex::cohomology::cohomology_unchecked(&f.source, kind, exec);
            let ht = bicomplex::cohomology::cohomology_unchecked(&f.target, kind, exec);
            induced_unchecked(f, &hs, &ht)
                .values()
                .all(|m| m.rows() == m.cols() && m.rank() == m.rows())
        })
}

/// `Cone(f)` with the canonical maps around it.
#[derive(Clone, Debug)]
pub struct ConeResult {
    pub cone: Bicomplex,
    /// `W -> Cone(f)`.
    pub inclusion: BicomplexMap,
    /// `Cone(f) -> V[1]`.
    pub projection: BicomplexMap,
}

/// Offsets of the four components `(w, a, c, b)` at a cone bidegree, where
/// `a ∈ V^{p+1,q+1}`, `c ∈ V^{p+1,q}`, `b ∈ V^{p,q+1}`.
#[derive(Clone, Copy)]
struct ConeSlots {
    w: usize,
    a: usize,
    c: usize,
    b: usize,
    dw: usize,
    dim: usize,
}

fn cone_slots(w: &Bicomplex, v: &Bicomplex, at: Bidegree) -> ConeSlots {
    let dw = w.dim(at);
    let da = v.dim(at + Bidegree::new(1, 1));
    let dc = v.dim(at + Bidegree::DEL);
    let db = v.dim(at + Bidegree::DELBAR);
    ConeSlots {
        w: 0,
        a: dw,
        c: dw + da,
        b: dw + da + dc,
        dw,
        dim: dw + da + dc + db,
    }
}

fn cone_support(w: &Bicomplex, v: &Bicomplex) -> BTreeSet<Bidegree> {
    let mut out: BTreeSet<Bidegree> = w.support().collect();
    for at in v.support() {
        for shift in [Bidegree::new(-1, -1), Bidegree::new(-1, 0), Bidegree::new(0, -1)] {
            out.insert(at + shift);
        }
    }
    out
}

/// The mapping cone from its explicit differentials:
/// `∂(w,c,a,b) = (∂w - fc, -∂c, ∂a, a - ∂b)` and
/// `∂̄(w,c,a,b) = (∂̄w + fb, a - ∂̄c, ∂̄a, -∂̄b)`.
pub fn cone(f: &BicomplexMap) -> Result<ConeResult, MorphismError> {
    f.ensure_valid()?;
    Ok(cone_unchecked(f))
}

pub(crate) fn cone_unchecked(f: &BicomplexMap) -> ConeResult {
    let (v, w) = (&f.source, &f.target);
    let support = cone_support(w, v);
    let dims: BTreeMap<Bidegree, usize> = support
        .iter()
        .map(|&at| (at, cone_slots(w, v, at).dim))
        .collect();
    let mut del = BTreeMap::new();
    let mut delbar = BTreeMap::new();
    for &at in &support {
        let s = cone_slots(w, v, at);
        let pa = at + Bidegree::new(1, 1);
        let pc = at + Bidegree::DEL;
        let pb = at + Bidegree::DELBAR;

        let to = at + Bidegree::DEL;
        let t = cone_slots(w, v, to);
        let mut m = RatMatrix::zeros(t.dim, s.dim);
        m.add_block(t.w, s.w, &w.del_block(at));
        m.add_block(t.w, s.c, &f.block(pc).neg());
        m.add_block(t.c, s.c, &v.del_block(pc).neg());
        m.add_block(t.a, s.a, &v.del_block(pa));
        m.add_block(t.b, s.a, &RatMatrix::identity(v.dim(pa)));
        m.add_block(t.b, s.b, &v.del_block(pb).neg());
        del.insert(at, m);

        let to = at + Bidegree::DELBAR;
        let t = cone_slots(w, v, to);
        let mut m = RatMatrix::zeros(t.dim, s.dim);
        m.add_block(t.w, s.w, &w.delbar_block(at));
        m.add_block(t.w, s.b, &f.block(pb));
        m.add_block(t.c, s.a, &RatMatrix::identity(v.dim(pa)));
        m.add_block(t.c, s.c, &v.delbar_block(pc).neg());
        m.add_block(t.a, s.a, &v.delbar_block(pa));
        m.add_block(t.b, s.b, &v.delbar_block(pb).neg());
        delbar.insert(at, m);
    }
    let c = Bicomplex::from_blocks(dims, del, delbar).expect("cone blocks have consistent shapes");
    debug_assert!(c.validate().is_empty());

    let inclusion_blocks = w
        .support()
        .map(|at| {
            let s = cone_slots(w, v, at);
            let mut m = RatMatrix::zeros(s.dim, s.dw);
            m.set_block(0, 0, &RatMatrix::identity(s.dw));
            (at, m)
        })
        .collect();
    let inclusion = BicomplexMap::from_blocks(w.clone(), c.clone(), inclusion_blocks)
        .expect("inclusion shapes");

    let shifted = bicomplex::shift(v, 1).expect("shift by one");
    let projection_blocks = support
        .iter()
        .map(|&at| {
            let s = cone_slots(w, v, at);
            let mut m = RatMatrix::zeros(s.dim - s.dw, s.dim);
            m.set_block(0, s.dw, &RatMatrix::identity(s.dim - s.dw));
            (at, m)
        })
        .collect();
    let projection =
        BicomplexMap::from_blocks(c.clone(), shifted, projection_blocks).expect("projection shapes");
    ConeResult {
        cone: c,
        inclusion,
        projection,
    }
}

/// The cone as `coker(V -> W ⊕ □⊗V)`, `v ↦ (fv, ∂∂̄x ⊗ v)`, where `□` is
/// the square on `x` at `(-1,-1)`. Also returns the comparison map from the
/// explicit cone, `(w,a,c,b) ↦ [w + x⊗a + ∂̄x⊗c + ∂x⊗b]`.
pub fn cone_via_cokernel(f: &BicomplexMap) -> Result<(Bicomplex, BicomplexMap), MorphismError> {
    f.ensure_valid()?;
    let (v, w) = (&f.source, &f.target);
    let corner = Bidegree::new(-1, -1);
    let sq = square(corner);
    let sqv = tensor(&sq, v);
    let layout = tensor_layout(&sq, v);
    let big = direct_sum(w, &sqv);

    // The image of V is the span of the columns of g at each bidegree.
    let top = Bidegree::new(0, 0);
    let g_block = |at: Bidegree| {
        let mut m = RatMatrix::zeros(big.dim(at), v.dim(at));
        m.set_block(0, 0, &f.block(at));
        if v.dim(at) > 0 {
            let off = layout.offsets[&(top, at)];
            m.set_block(w.dim(at) + off, 0, &RatMatrix::identity(v.dim(at)));
        }
        m
    };
    let subspaces: BTreeMap<Bidegree, Subspace> = big
        .support()
        .map(|at| (at, Subspace::span(&g_block(at))))
        .collect();
    let (coker, proj) = quotient_bicomplex(&big, &subspaces)?;

    let explicit = cone_unchecked(f);
    let mut blocks = BTreeMap::new();
    for at in explicit.cone.support() {
        let s = cone_slots(w, v, at);
        let mut embed = RatMatrix::zeros(big.dim(at), s.dim);
        embed.set_block(0, 0, &RatMatrix::identity(s.dw));
        let dw = w.dim(at);
        for (slot, sq_at, len) in [
            (s.a, corner, s.c - s.a),
            (s.c, corner + Bidegree::DELBAR, s.b - s.c),
            (s.b, corner + Bidegree::DEL, s.dim - s.b),
        ] {
            if len > 0 {
                let off = layout.offsets[&(sq_at, at - sq_at)];
                embed.set_block(dw + off, slot, &RatMatrix::identity(len));
            }
        }
        let p = proj
            .get(&at)
            .cloned()
            .unwrap_or_else(|| RatMatrix::zeros(0, big.dim(at)));
        blocks.insert(at, p.mul(&embed));
    }
    let comparison = BicomplexMap::from_blocks(explicit.cone, coker.clone(), blocks)?;
    Ok((coker, comparison))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReducedConeViolation {
    DelPhi(Bidegree),
    DelbarPhibar(Bidegree),
    Mixed(Bidegree),
}

impl fmt::Display for ReducedConeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReducedConeViolation::DelPhi(at) => write!(f, "del phi + phi del != 0 at {at}"),
            ReducedConeViolation::DelbarPhibar(at) => {
                write!(f, "delbar phibar + phibar delbar != 0 at {at}")
            }
            ReducedConeViolation::Mixed(at) => write!(
                f,
                "del phibar + phibar del + delbar phi + phi delbar != 0 at {at}"
            ),
        }
    }
}

/// Maps `V -> W` of bidegrees (1,0) and (0,1), keyed by source bidegree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhiPair {
    pub phi: BTreeMap<Bidegree, RatMatrix>,
    pub phibar: BTreeMap<Bidegree, RatMatrix>,
}

impl PhiPair {
    fn get(map: &BTreeMap<Bidegree, RatMatrix>, at: Bidegree, rows: usize, cols: usize) -> RatMatrix {
        map.get(&at).cloned().unwrap_or_else(|| RatMatrix::zeros(rows, cols))
    }

    pub fn phi_block(&self, w: &Bicomplex, v: &Bicomplex, at: Bidegree) -> RatMatrix {
        Self::get(&self.phi, at, w.dim(at + Bidegree::DEL), v.dim(at))
    }

    pub fn phibar_block(&self, w: &Bicomplex, v: &Bicomplex, at: Bidegree) -> RatMatrix {
        Self::get(&self.phibar, at, w.dim(at + Bidegree::DELBAR), v.dim(at))
    }
}

fn check_phi_shapes(w: &Bicomplex, v: &Bicomplex, phis: &PhiPair) -> Result<(), MorphismError> {
    for (map, step) in [(&phis.phi, Bidegree::DEL), (&phis.phibar, Bidegree::DELBAR)] {
        for (&at, m) in map {
            let expected = (w.dim(at + step), v.dim(at));
            if (m.rows(), m.cols()) != expected {
                return Err(MorphismError::Shape {
                    at,
                    expected,
                    found: (m.rows(), m.cols()),
                });
            }
        }
    }
    Ok(())
}

pub fn reduced_cone_violations(w: &Bicomplex, v: &Bicomplex, phis: &PhiPair) -> Vec<ReducedConeViolation> {
    let mut out = Vec::new();
    for at in v.support() {
        let phi = |b| phis.phi_block(w, v, b);
        let phibar = |b| phis.phibar_block(w, v, b);
        let dd = w.del_block(at + Bidegree::DEL).mul(&phi(at)).add(&phi(at + Bidegree::DEL).mul(&v.del_block(at)));
        if !dd.is_zero() {
            out.push(ReducedConeViolation::DelPhi(at));
        }
        let bb = w
            .delbar_block(at + Bidegree::DELBAR)
            .mul(&phibar(at))
            .add(&phibar(at + Bidegree::DELBAR).mul(&v.delbar_block(at)));
        if !bb.is_zero() {
            out.push(ReducedConeViolation::DelbarPhibar(at));
        }
        let mixed = w
            .del_block(at + Bidegree::DELBAR)
            .mul(&phibar(at))
            .add(&phibar(at + Bidegree::DEL).mul(&v.del_block(at)))
            .add(&w.delbar_block(at + Bidegree::DEL).mul(&phi(at)))
            .add(&phi(at + Bidegree::DELBAR).mul(&v.delbar_block(at)));
        if !mixed.is_zero() {
            out.push(ReducedConeViolation::Mixed(at));
        }
    }
    out
}

/// `W ⊕ V` with `∂(w, v) = (∂w + φv, ∂v)` and `∂̄(w, v) = (∂̄w + φ̄v, ∂̄v)`.
pub fn reduced_cone(w: &Bicomplex, v: &Bicomplex, phis: &PhiPair) -> Result<Bicomplex, MorphismError> {
    w.ensure_valid()?;
    v.ensure_valid()?;
    check_phi_shapes(w, v, phis)?;
    let violations = reduced_cone_violations(w, v, phis);
    if !violations.is_empty() {
        return Err(MorphismError::ReducedCone(violations));
    }
    let sum = direct_sum(w, v);
    let mut blocks: [BTreeMap<Bidegree, RatMatrix>; 2] = Default::default();
    for (slot, which) in [Differential::Del, Differential::Delbar].into_iter().enumerate() {
        for at in sum.support() {
            let to = at + which.step();
            let mut m = sum.block(which, at);
            if v.dim(at) > 0 && w.dim(to) > 0 {
                let phi = match which {
                    Differential::Del => phis.phi_block(w, v, at),
                    Differential::Delbar => phis.phibar_block(w, v, at),
                };
                m.add_block(0, w.dim(at), &phi);
            }
            blocks[slot].insert(at, m);
        }
    }
    let [del, delbar] = blocks;
    Ok(Bicomplex::from_blocks(sum.dims().clone(), del, delbar)?)
}

/// The map `Φ: V[-1] -> W` matching a reduced cone. On the three pieces of
/// `V[-1]` (sources `y` at (0,1), `z` at (1,0), sink `x` at (1,1), with
/// `∂y = x`, `∂̄z = x`) it is `Φ(y⊗v) = -φ̄v`, `Φ(z⊗v) = φv` and
/// `Φ(x⊗v) = (∂̄φ + φ∂̄)v`.
pub fn full_cone_map(w: &Bicomplex, v: &Bicomplex, phis: &PhiPair) -> Result<BicomplexMap, MorphismError> {
    check_phi_shapes(w, v, phis)?;
    let shape = bicomplex::shift_down_shape();
    let source = tensor(&shape, v);
    let layout = tensor_layout(&shape, v);
    let (y, z, x) = (Bidegree::new(0, 1), Bidegree::new(1, 0), Bidegree::new(1, 1));
    let mut blocks = BTreeMap::new();
    for at in source.support() {
        let mut m = RatMatrix::zeros(w.dim(at), source.dim(at));
        if m.rows() == 0 {
            continue;
        }
        let place = |m: &mut RatMatrix, piece: Bidegree, block: RatMatrix| {
            let vb = at - piece;
            if v.dim(vb) > 0 {
                m.set_block(0, layout.offsets[&(piece, vb)], &block);
            }
        };
        place(&mut m, y, phis.phibar_block(w, v, at - y).neg());
        place(&mut m, z, phis.phi_block(w, v, at - z));
        let vb = at - x;
        let corner = w
            .delbar_block(vb + Bidegree::DEL)
            .mul(&phis.phi_block(w, v, vb))
            .add(&phis.phi_block(w, v, vb + Bidegree::DELBAR).mul(&v.delbar_block(vb)));
        place(&mut m, x, corner);
        blocks.insert(at, m);
    }
    BicomplexMap::from_blocks(source, w.clone(), blocks)
}

/// Both characterizations of map connectivity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapConnectivity {
    /// `connectivity(Cone f) + 1`.
    pub via_cone: Connectivity,
    /// The largest `k` with `H_A^{≤k-1}(f)` surjective and
    /// `H_BC^{≤k+1}(f)` injective.
    pub via_cohomology: Connectivity,
}

pub fn map_connectivity_both(f: &BicomplexMap) -> Result<MapConnectivity, MorphismError> {
    f.ensure_valid()?;
    let exec = Exec::default();
    let via_cone = bicomplex::cohomology::connectivity_unchecked(&cone_unchecked(f).cone, exec).plus(1);

    let first_failure = |kind: CohomologyKind, bad: &dyn Fn(&RatMatrix) -> bool| {
        let hs = bicomplex::cohomology::cohomology_unchecked(&f.source, kind, exec);
        let ht = bicomplex::cohomology::cohomology_unchecked(&f.target, kind, exec);
        induced_unchecked(f, &hs, &ht)
            .into_iter()
            .filter(|(_, m)| bad(m))
            .map(|(at, _)| at.total())
            .min()
    };
    let not_surjective = first_failure(CohomologyKind::Aeppli, &|m| m.rank() < m.rows());
    let not_injective = first_failure(CohomologyKind::BottChern, &|m| m.rank() < m.cols());
    let via_cohomology = match (not_surjective, not_injective) {
        (None, None) => Connectivity::Infinite,
        (Some(s), None) => Connectivity::Finite(s),
        (None, Some(j)) => Connectivity::Finite(j - 2),
        (Some(s), Some(j)) => Connectivity::Finite(s.min(j - 2)),
    };
    Ok(MapConnectivity {
        via_cone,
        via_cohomology,
    })
}

/// The largest `k` such that `f` is `k`-connected; fails if the two
/// characterizations disagree.
pub fn map_connectivity(f: &BicomplexMap) -> Result<Connectivity, MorphismError> {
    let both = map_connectivity_both(f)?;
    if both.via_cone != both.via_cohomology {
        return Err(MorphismError::Disagreement {
            cone: both.via_cone,
            lemma: both.via_cohomology,
        });
    }
    Ok(both.via_cone)
}

/// Outcome of checking that `τ≤k V -> V -> τ≥k+1 V` is distinguished.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TriangleReport {
    /// `Cone(τ≤k V -> V) -> τ≥k+1 V` is a quasi-isomorphism.
    pub cone_quasi_iso: bool,
    /// `coker(τ≤k V -> V) -> τ≥k+1 V` is a quasi-isomorphism.
    pub cokernel_quasi_iso: bool,
    /// The kernel of the latter is contractible.
    pub kernel_contractible: bool,
}

impl TriangleReport {
    pub fn passed(&self) -> bool {
        self.cone_quasi_iso && self.cokernel_quasi_iso && self.kernel_contractible
    }
}

pub fn triangle_checks(b: &Bicomplex, k: i32) -> Result<TriangleReport, MorphismError> {
    b.ensure_valid()?;
    let exec = Exec::default();
    let lower = truncate(b, k, Side::Below)?;
    let upper = truncate(b, k + 1, Side::Above)?;
    let pi = &upper.map;
    let c = cone_unchecked(&lower.map);

    // (w, a, c, b) ↦ π(w)
    let blocks = c
        .cone
        .support()
        .map(|at| {
            let mut m = RatMatrix::zeros(upper.bicomplex.dim(at), c.cone.dim(at));
            m.set_block(0, 0, &pi.block(at));
            (at, m)
        })
        .collect();
    let to_upper = BicomplexMap::from_blocks(c.cone.clone(), upper.bicomplex.clone(), blocks)?;
    to_upper.ensure_valid()?;
    let cone_quasi_iso = is_quasi_iso_unchecked(&to_upper, exec);

    let image: BTreeMap<Bidegree, Subspace> = b
        .support()
        .map(|at| (at, Subspace::span(&lower.map.block(at))))
        .collect();
    let (coker, proj) = quotient_bicomplex(b, &image)?;
    // π factors through the cokernel: π = π' ∘ proj, with π' = π ∘ section.
    let factored = coker
        .support()
        .map(|at| {
            let section = Subspace::full(b.dim(at));
            let q = crate::exactq::quotient_present(&section, &image[&at])
                .expect("image lies in the ambient space");
            debug_assert_eq!(q.projection(), &proj[&at]);
            (at, pi.block(at).mul(q.section()))
        })
        .collect();
    let from_coker = BicomplexMap::from_blocks(coker, upper.bicomplex.clone(), factored)?;
    from_coker.ensure_valid()?;
    let cokernel_quasi_iso = is_quasi_iso_unchecked(&from_coker, exec);
    let (kern, _) = kernel_of(&from_coker)?;
    let kernel_contractible = bicomplex::cohomology::is_contractible_unchecked(&kern, exec);
    Ok(TriangleReport {
        cone_quasi_iso,
        cokernel_quasi_iso,
        kernel_contractible,
    })
}

/// The four characterizations of `k`-connectedness, evaluated separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Connectedness {
    /// `τ≤k V` is contractible.
    pub truncation_contractible: bool,
    /// `V -> τ≥k+1 V` is a quasi-isomorphism.
    pub projection_quasi_iso: bool,
    /// `H^j V = 0` for all `j ≤ k`.
    pub cohomology_vanishes: bool,
    /// `H_A^{≤k} V = 0`.
    pub aeppli_vanishes: bool,
}

impl Connectedness {
    pub fn agree(&self) -> bool {
        let all = [
            self.truncation_contractible,
            self.projection_quasi_iso,
            self.cohomology_vanishes,
            self.aeppli_vanishes,
        ];
        all.iter().all(|&x| x == all[0])
    }
}

pub fn connectedness(b: &Bicomplex, k: i32) -> Result<Connectedness, MorphismError> {
    b.ensure_valid()?;
    let exec = Exec::default();
    let lower = truncate(b, k, Side::Below)?;
    let upper = truncate(b, k + 1, Side::Above)?;
    let lo = b.degree_range().map_or(k, |(lo, _)| lo - 1);
    let mut cohomology_vanishes = true;
    for j in lo..=k {
        if !bicomplex::cohomology_bicomplex(b, j)?.is_zero() {
            cohomology_vanishes = false;
            break;
        }
    }
    let aeppli = bicomplex::cohomology::cohomology_unchecked(b, CohomologyKind::Aeppli, exec);
    Ok(Connectedness {
        truncation_contractible: bicomplex::cohomology::is_contractible_unchecked(&lower.bicomplex, exec),
        projection_quasi_iso: is_quasi_iso_unchecked(&upper.map, exec),
        cohomology_vanishes,
        aeppli_vanishes: aeppli.dims().iter().all(|(at, _)| at.total() > k),
    })
}

/// The truncation lemma as dimension facts: `H^{≥k+1}(τ≤k V) = 0`,
/// `H^{≤k}(τ≤k V) ≅ H^{≤k} V`, `H^{≤k-1}(τ≥k V) = 0` and
/// `H^{≥k}(τ≥k V) ≅ H^{≥k} V`. Returns the failing statements.
pub fn truncation_lemma_defects(b: &Bicomplex, k: i32) -> Result<Vec<String>, MorphismError> {
    b.ensure_valid()?;
    let lower = truncate(b, k, Side::Below)?.bicomplex;
    let upper = truncate(b, k, Side::Above)?.bicomplex;
    let (lo, hi) = b.degree_range().unwrap_or((k, k));
    let mut out = Vec::new();
    for j in (lo.min(k) - 1)..=(hi.max(k) + 1) {
        let h = bicomplex::cohomology_bicomplex(b, j)?;
        let hl = bicomplex::cohomology_bicomplex(&lower, j)?;
        let hu = bicomplex::cohomology_bicomplex(&upper, j)?;
        if j >= k + 1 && !hl.is_zero() {
            out.push(format!("H^{j}(tau<={k} V) != 0"));
        }
        if j <= k && hl.dims() != h.dims() {
            out.push(format!("H^{j}(tau<={k} V) differs from H^{j} V"));
        }
        if j <= k - 1 && !hu.is_zero() {
            out.push(format!("H^{j}(tau>={k} V) != 0"));
        }
        if j >= k && hu.dims() != h.dims() {
            out.push(format!("H^{j}(tau>={k} V) differs from H^{j} V"));
        }
    }
    Ok(out)
}

/// Rank bookkeeping of the long exact sequence at the middle term:
/// `rank H(f) + rank H(j) = dim H(W)` at every bidegree, with `j` the
/// inclusion of `W` into the cone. Returns the failing bidegrees.
pub fn exactness_defects(f: &BicomplexMap, kind: CohomologyKind) -> Result<Vec<Bidegree>, MorphismError> {
    f.ensure_valid()?;
    let exec = Exec::default();
    let c = cone_unchecked(f);
    let hv = bicomplex::cohomology::cohomology_unchecked(&f.source, kind, exec);
    let hw = bicomplex::cohomology::cohomology_unchecked(&f.target, kind, exec);
    let hc = bicomplex::cohomology::cohomology_unchecked(&c.cone, kind, exec);
    let hf = induced_unchecked(f, &hv, &hw);
    let hj = induced_unchecked(&c.inclusion, &hw, &hc);
    Ok(f.target
        .support()
        .filter(|at| {
            let rf = hf.get(at).map_or(0, RatMatrix::rank);
            let rj = hj.get(at).map_or(0, RatMatrix::rank);
            rf + rj != hw.dim_at(*at)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicomplex::{dot, is_contractible, shift, zigzag_shape, Family};

    fn bd(p: i32, q: i32) -> Bidegree {
        Bidegree::new(p, q)
    }

    fn one() -> RatMatrix {
        RatMatrix::from_i64(&[&[1]])
    }

    #[test]
    fn validate_examples() {
        let s = square(bd(0, 0));
        assert!(BicomplexMap::identity(&s).validate().is_empty());
        assert!(BicomplexMap::zero(&s, &dot(bd(0, 0))).validate().is_empty());
        let err = BicomplexMap::from_blocks(dot(bd(0, 0)), dot(bd(1, 0)), BTreeMap::from([(bd(0, 0), one())]));
        assert!(matches!(err, Err(MorphismError::Shape { .. })));
    }

    #[test]
    fn identity_induces_identity() {
        let z = zigzag_shape(Family::A, 2, bd(0, 0));
        for kind in CohomologyKind::ALL {
            for (_, m) in induced_map(&BicomplexMap::identity(&z), kind).unwrap() {
                assert_eq!(m, RatMatrix::identity(m.rows()));
            }
        }
    }

    #[test]
    fn corner_inclusion_into_square() {
        // x ↦ x is not a chain map (∂x ≠ 0); the inclusion of the top ∂∂̄x is.
        let f = BicomplexMap::new(dot(bd(1, 1)), square(bd(0, 0)), BTreeMap::from([(bd(1, 1), one())])).unwrap();
        let h = induced_map(&f, CohomologyKind::BottChern).unwrap();
        assert_eq!(h[&bd(1, 1)].rows(), 0);
        let c = cone(&f).unwrap();
        assert_eq!(c.cone.total_dim(), 4 + 3);
        assert!(!is_contractible(&c.cone).unwrap());
        assert!(exactness_defects(&f, CohomologyKind::Aeppli).unwrap().is_empty());
    }

    #[test]
    fn cone_of_identity_and_zero() {
        let d = dot(bd(0, 0));
        let c = cone(&BicomplexMap::identity(&d)).unwrap();
        assert_eq!(c.cone.total_dim(), 4);
        assert!(is_contractible(&c.cone).unwrap());
        let to_zero = BicomplexMap::zero(&d, &Bicomplex::zero());
        assert_eq!(cone(&to_zero).unwrap().cone, shift(&d, 1).unwrap());
        assert!(c.projection.validate().is_empty());
        assert!(c.inclusion.validate().is_empty());
    }

    #[test]
    fn cokernel_cone_matches_explicit_cone() {
        let v = zigzag_shape(Family::A, 1, bd(0, 0));
        let f = BicomplexMap::identity(&v);
        let (coker, cmp) = cone_via_cokernel(&f).unwrap();
        assert!(coker.validate().is_empty());
        assert!(cmp.validate().is_empty());
        assert!(is_quasi_iso(&cmp).unwrap());
    }

    #[test]
    fn quasi_isomorphisms() {
        let s = square(bd(0, 0));
        assert!(is_quasi_iso(&BicomplexMap::identity(&s)).unwrap());
        assert!(is_quasi_iso(&BicomplexMap::zero(&s, &Bicomplex::zero())).unwrap());
        let d = dot(bd(0, 0));
        assert!(!is_quasi_iso(&BicomplexMap::zero(&d, &Bicomplex::zero())).unwrap());
    }

    #[test]
    fn projection_of_shift_composite_is_quasi_iso() {
        // L ⊗ L' -> dot: any functional at (0,0) killing im ∂ + im ∂̄ is a
        // chain map, and a nonzero one is a quasi-isomorphism.
        let ll = tensor(&bicomplex::shift_up_shape(), &bicomplex::shift_down_shape());
        let at = bd(0, 0);
        let into = ll
            .del_block(at - Bidegree::DEL)
            .hstack(&ll.delbar_block(at - Bidegree::DELBAR));
        let functionals = kernel(&into.transpose());
        assert_eq!(functionals.dim(), 1);
        let m = functionals.basis().transpose();
        let f = BicomplexMap::new(ll, dot(at), BTreeMap::from([(at, m)])).unwrap();
        assert!(is_quasi_iso(&f).unwrap());
    }

    #[test]
    fn map_connectivity_examples() {
        let d = dot(bd(0, 0));
        assert_eq!(map_connectivity(&BicomplexMap::identity(&d)).unwrap(), Connectivity::Infinite);
        let both = map_connectivity_both(&BicomplexMap::zero(&d, &d)).unwrap();
        assert_eq!(both.via_cone, both.via_cohomology);
        // The shifted dot has Aeppli cohomology at (-1,-1).
        assert_eq!(both.via_cone, Connectivity::Finite(-2));
    }

    #[test]
    fn reduced_cone_builds_a_zigzag() {
        let w = direct_sum(&dot(bd(1, 0)), &dot(bd(0, 1)));
        let v = dot(bd(0, 0));
        let phis = PhiPair {
            phi: BTreeMap::from([(bd(0, 0), one())]),
            phibar: BTreeMap::from([(bd(0, 0), one())]),
        };
        let r = reduced_cone(&w, &v, &phis).unwrap();
        assert_eq!(r.dims(), zigzag_shape(Family::A, 1, bd(0, 0)).dims());
        let full = full_cone_map(&w, &v, &phis).unwrap();
        assert!(full.validate().is_empty());
        let zero = PhiPair {
            phi: BTreeMap::new(),
            phibar: BTreeMap::new(),
        };
        assert_eq!(reduced_cone(&w, &v, &zero).unwrap(), direct_sum(&w, &v));
    }

    #[test]
    fn broken_reduced_cone_is_rejected() {
        // φ into a dot that ∂ then hits again.
        let w = zigzag_shape(Family::C, 1, bd(1, 0));
        let v = dot(bd(0, 0));
        let phis = PhiPair {
            phi: BTreeMap::from([(bd(0, 0), one())]),
            phibar: BTreeMap::new(),
        };
        assert!(matches!(reduced_cone(&w, &v, &phis), Err(MorphismError::ReducedCone(_))));
    }

    #[test]
    fn triangles() {
        assert!(triangle_checks(&dot(bd(0, 0)), 0).unwrap().passed());
        for k in -1..=2 {
            assert!(triangle_checks(&square(bd(0, 0)), k).unwrap().passed());
        }
        let z = direct_sum(&zigzag_shape(Family::A, 2, bd(0, 0)), &square(bd(0, 0)));
        for k in -1..=3 {
            assert!(triangle_checks(&z, k).unwrap().passed(), "k = {k}");
        }
    }
}
