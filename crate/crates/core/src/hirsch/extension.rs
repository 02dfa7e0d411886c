use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, Zero};

use super::algebra::{format_monomial, free_cbba, CbbaMap, Elem, GeneratorSpec, TruncatedCbba};
use super::HirschError;
use crate::bicomplex::{
    cohomology, hom, shift_down_shape, sign, tensor, Bicomplex, Bidegree, CohomologyKind,
    CohomologyTable, Differential, IdentityKind, LocalSubspaces,
};
use crate::decomp::{make_zigzag, ZigZagDescriptor};
use crate::bicomplex::Family;
use crate::exactq::{solve_linear, RatMatrix, Rational};

/// `Θ(w) = Σ_m m ⊗ Θ_m w`, keyed by base monomial index; each `Θ_m` is a
/// square matrix on the global basis of `V`.
pub type Twisting = BTreeMap<usize, RatMatrix>;

/// Global basis of `V`: bidegrees ascending, then the local basis.
#[derive(Clone, Debug)]
pub struct VBasis {
    degrees: Vec<Bidegree>,
    offsets: BTreeMap<Bidegree, usize>,
    del: RatMatrix,
    delbar: RatMatrix,
}

impl VBasis {
    pub fn new(v: &Bicomplex) -> Self {
        let mut degrees = Vec::new();
        let mut offsets = BTreeMap::new();
        for b in v.support() {
            offsets.insert(b, degrees.len());
            degrees.extend(std::iter::repeat_n(b, v.dim(b)));
        }
        let n = degrees.len();
        let global = |which: Differential| {
            let mut m = RatMatrix::zeros(n, n);
            for (&at, block) in v.blocks(which) {
                m.set_block(offsets[&(at + which.step())], offsets[&at], block);
            }
            m
        };
        VBasis {
            del: global(Differential::Del),
            delbar: global(Differential::Delbar),
            degrees,
            offsets,
        }
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn degree(&self, w: usize) -> Bidegree {
        self.degrees[w]
    }

    /// Global index of basis vector `i` of `V^at`.
    pub fn global(&self, at: Bidegree, i: usize) -> usize {
        self.offsets[&at] + i
    }

    fn d(&self, which: Differential) -> &RatMatrix {
        match which {
            Differential::Del => &self.del,
            Differential::Delbar => &self.delbar,
        }
    }
}

/// A commuting pair of local systems on a fixed base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalSystemPair {
    pub v: Bicomplex,
    pub theta: Twisting,
    pub thetabar: Twisting,
}

impl LocalSystemPair {
    pub fn untwisted(v: Bicomplex) -> Self {
        LocalSystemPair {
            v,
            theta: Twisting::new(),
            thetabar: Twisting::new(),
        }
    }

    pub fn twisting(&self, which: Differential) -> &Twisting {
        match which {
            Differential::Del => &self.theta,
            Differential::Delbar => &self.thetabar,
        }
    }

    fn twisting_mut(&mut self, which: Differential) -> &mut Twisting {
        match which {
            Differential::Del => &mut self.theta,
            Differential::Delbar => &mut self.thetabar,
        }
    }

    pub fn is_untwisted(&self) -> bool {
        self.theta.values().chain(self.thetabar.values()).all(RatMatrix::is_zero)
    }
}

/// `𝒜 ⊗ ΛV` with `∂ = ∂_V + φ + Θ` and `∂̄ = ∂̄_V + φ̄ + Θ̄` on `V`.
/// `phi` and `phibar` are `dim 𝒜 × dim V` matrices on global bases.
#[derive(Clone, Debug)]
pub struct HirschExtension {
    pub base: TruncatedCbba,
    pub system: LocalSystemPair,
    pub phi: RatMatrix,
    pub phibar: RatMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Equation {
    /// `∂_Θ² = 0`
    DelSquared,
    /// `∂̄_Θ̄² = 0`
    DelbarSquared,
    /// `∂_Θ∂̄_Θ̄ + ∂̄_Θ̄∂_Θ = 0`
    Anticommutation,
    /// `∂_Θφ = 0`
    DelPhi,
    /// `∂̄_Θ̄φ̄ = 0`
    DelbarPhibar,
    /// `∂_Θφ̄ + ∂̄_Θ̄φ = 0`
    Mixed,
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Equation::DelSquared => "del_theta^2 = 0",
            Equation::DelbarSquared => "delbar_thetabar^2 = 0",
            Equation::Anticommutation => "del_theta delbar_thetabar + delbar_thetabar del_theta = 0",
            Equation::DelPhi => "del_theta phi = 0",
            Equation::DelbarPhibar => "delbar_thetabar phibar = 0",
            Equation::Mixed => "del_theta phibar + delbar_thetabar phi = 0",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SystemDiagnostic {
    Shape(String),
    Degree(String),
    /// Fails on `Hom(V, 𝒜)` in the given bidegree (for the φ equations:
    /// the bidegree of the offending basis vector of `V`).
    Equation { equation: Equation, at: Bidegree },
}

impl fmt::Display for SystemDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemDiagnostic::Shape(s) => write!(f, "shape: {s}"),
            SystemDiagnostic::Degree(s) => write!(f, "degree: {s}"),
            SystemDiagnostic::Equation { equation, at } => write!(f, "{equation} fails at {at}"),
        }
    }
}

/// Sparse `∂_Θ ψ` for `ψ = α·E_{i,j}` (the map sending basis vector `j` of
/// `V` to `α·m_i`), of total degree `deg`:
/// `∂_Θψ = ∂ψ - (-1)^{|ψ|} ψ∂_V - (-1)^{|ψ|} (1⊗ψ)Θ`, where
/// `(1⊗ψ)(m⊗w) = (-1)^{|ψ||m|} m·ψ(w)`.
fn twisted_entry(
    base: &TruncatedCbba,
    vb: &VBasis,
    theta: &Twisting,
    which: Differential,
    (i, j): (usize, usize),
    alpha: &Rational,
    deg: i32,
    out: &mut BTreeMap<(usize, usize), Rational>,
) {
    let mut push = |k: usize, w: usize, c: Rational| {
        if c.is_zero() {
            return;
        }
        let e = out.entry((k, w)).or_insert_with(Rational::zero);
        *e += c;
    };
    for (k, c) in base.d_index(which, i) {
        push(*k, j, alpha * c);
    }
    let s = sign(deg);
    let dv = vb.d(which);
    for w in 0..vb.dim() {
        let beta = &dv[(j, w)];
        if !beta.is_zero() {
            push(i, w, -(&s * alpha * beta));
        }
    }
    for (&m, tm) in theta {
        let Some((sigma, k)) = base.mul_index(m, i) else {
            continue;
        };
        let koszul = sign(deg * base.total_degree(m));
        for w in 0..vb.dim() {
            let gamma = &tm[(j, w)];
            if !gamma.is_zero() {
                push(k, w, -(&s * &koszul * gamma * alpha * &sigma));
            }
        }
    }
}

/// `∂_Θψ` (or `∂̄_Θ̄ψ`) for a homogeneous `ψ` of total degree `deg`.
pub fn twisted_apply(
    base: &TruncatedCbba,
    sys: &LocalSystemPair,
    which: Differential,
    psi: &RatMatrix,
    deg: i32,
) -> RatMatrix {
    let vb = VBasis::new(&sys.v);
    twisted_apply_with(base, &vb, sys.twisting(which), which, psi, deg)
}

fn twisted_apply_with(
    base: &TruncatedCbba,
    vb: &VBasis,
    theta: &Twisting,
    which: Differential,
    psi: &RatMatrix,
    deg: i32,
) -> RatMatrix {
    let mut acc = BTreeMap::new();
    for i in 0..psi.rows() {
        for j in 0..psi.cols() {
            let a = &psi[(i, j)];
            if !a.is_zero() {
                twisted_entry(base, vb, theta, which, (i, j), a, deg, &mut acc);
            }
        }
    }
    let mut out = RatMatrix::zeros(base.dim(), vb.dim());
    for ((k, w), c) in acc {
        out[(k, w)] = c;
    }
    out
}

/// Basis of `Hom(V, 𝒜)`: in bidegree `(r,s)`, source bidegrees `b`
/// ascending, then base monomials, then basis vectors of `V^b`.
#[derive(Clone, Debug)]
struct HomBasis {
    entries: BTreeMap<Bidegree, Vec<(usize, usize)>>,
    position: HashMap<(usize, usize), (Bidegree, usize)>,
}

impl HomBasis {
    fn new(base: &TruncatedCbba, vb: &VBasis) -> Self {
        let mut entries: BTreeMap<Bidegree, Vec<(usize, usize)>> = BTreeMap::new();
        let mut position = HashMap::new();
        for (&b, &off) in &vb.offsets {
            let n = vb.degrees.iter().filter(|&&d| d == b).count();
            for i in 0..base.dim() {
                let rs = base.degree(i) - b;
                for j in off..off + n {
                    let list = entries.entry(rs).or_default();
                    position.insert((i, j), (rs, list.len()));
                    list.push((i, j));
                }
            }
        }
        HomBasis { entries, position }
    }

    fn dim(&self, rs: Bidegree) -> usize {
        self.entries.get(&rs).map_or(0, Vec::len)
    }
}

/// `Hom(V, 𝒜)` with `∂_Θ, ∂̄_Θ̄` and the corner complex `Hom(V[-1], 𝒜)`
/// built from it in `(f, h, g)` coordinates.
#[derive(Clone, Debug)]
pub struct TwistedHomComplex {
    /// `Hom(V, 𝒜)` with the twisted differentials.
    pub hom: Bicomplex,
    /// `Hom(V[-1], 𝒜)`; at `(r,s)` the basis is `f ∈ Hom^{(r,s+1)}`, then
    /// `h ∈ Hom^{(r+1,s+1)}`, then `g ∈ Hom^{(r+1,s)}`.
    pub corner: Bicomplex,
    basis: HomBasis,
    base_dim: usize,
    v_dim: usize,
}

fn twisted_hom_bicomplex(base: &TruncatedCbba, sys: &LocalSystemPair) -> (Bicomplex, HomBasis) {
    let vb = VBasis::new(&sys.v);
    let basis = HomBasis::new(base, &vb);
    let dims: BTreeMap<Bidegree, usize> = basis.entries.iter().map(|(&b, l)| (b, l.len())).collect();
    let mut blocks: [BTreeMap<Bidegree, RatMatrix>; 2] = Default::default();
    for (slot, which) in [Differential::Del, Differential::Delbar].into_iter().enumerate() {
        let theta = sys.twisting(which);
        for (&rs, list) in &basis.entries {
            let t = rs + which.step();
            let rows = basis.dim(t);
            let mut m = RatMatrix::zeros(rows, list.len());
            for (col, &ij) in list.iter().enumerate() {
                let mut acc = BTreeMap::new();
                twisted_entry(base, &vb, theta, which, ij, &Rational::one(), rs.total(), &mut acc);
                for (kw, c) in acc {
                    if c.is_zero() {
                        continue;
                    }
                    let (at, row) = basis.position[&kw];
                    assert_eq!(at, t, "twisting coefficients have the wrong bidegree");
                    m[(row, col)] = c;
                }
            }
            if rows > 0 && !m.is_zero() {
                blocks[slot].insert(rs, m);
            }
        }
    }
    let [del, delbar] = blocks;
    (
        Bicomplex::from_blocks(dims, del, delbar).expect("shaped by construction"),
        basis,
    )
}

/// Slots of the corner complex at `(r,s)`: `(f, h, g)` bidegrees in `Hom`.
fn corner_slots(rs: Bidegree) -> [Bidegree; 3] {
    [
        rs + Bidegree::DELBAR,
        rs + Bidegree::new(1, 1),
        rs + Bidegree::DEL,
    ]
}

/// `Hom(V[-1], 𝒜)` from `Hom(V, 𝒜)`, with `ε = (-1)^{r+s}`:
/// `∂(f,h,g) = (h - ε∂f, -ε∂h, -ε∂g)`,
/// `∂̄(f,h,g) = (-ε∂̄f, -ε∂̄h, -h - ε∂̄g)`.
pub(crate) fn corner_complex(h: &Bicomplex) -> Bicomplex {
    let mut dims = BTreeMap::new();
    for c in h.support() {
        for rs in [
            c - Bidegree::DELBAR,
            c - Bidegree::new(1, 1),
            c - Bidegree::DEL,
        ] {
            let d: usize = corner_slots(rs).iter().map(|&s| h.dim(s)).sum();
            if d > 0 {
                dims.insert(rs, d);
            }
        }
    }
    let mut del = BTreeMap::new();
    let mut delbar = BTreeMap::new();
    for &rs in dims.keys() {
        let eps = sign(rs.total());
        let [fs, hs, gs] = corner_slots(rs);
        let (df, dh, dg) = (h.dim(fs), h.dim(hs), h.dim(gs));
        for which in [Differential::Del, Differential::Delbar] {
            let t = rs + which.step();
            let [tf, th, tg] = corner_slots(t);
            let (rf, rh, rg) = (h.dim(tf), h.dim(th), h.dim(tg));
            if rf + rh + rg == 0 {
                continue;
            }
            let mut m = RatMatrix::zeros(rf + rh + rg, df + dh + dg);
            let minus_eps = -eps.clone();
            match which {
                Differential::Del => {
                    // f' = h - ε∂f, with f' and h both in Hom^{(r+1,s+1)}
                    m.set_block(0, df, &RatMatrix::identity(dh));
                    m.set_block(0, 0, &h.del_block(fs).scale(&minus_eps));
                    m.set_block(rf, df, &h.del_block(hs).scale(&minus_eps));
                    m.set_block(rf + rh, df + dh, &h.del_block(gs).scale(&minus_eps));
                }
                Differential::Delbar => {
                    m.set_block(0, 0, &h.delbar_block(fs).scale(&minus_eps));
                    m.set_block(rf, df, &h.delbar_block(hs).scale(&minus_eps));
                    // g' = -h - ε∂̄g, with g' and h both in Hom^{(r+1,s+1)}
                    m.set_block(rf + rh, df, &RatMatrix::identity(dh).neg());
                    m.set_block(rf + rh, df + dh, &h.delbar_block(gs).scale(&minus_eps));
                }
            }
            if !m.is_zero() {
                match which {
                    Differential::Del => del.insert(rs, m),
                    Differential::Delbar => delbar.insert(rs, m),
                };
            }
        }
    }
    Bicomplex::from_blocks(dims, del, delbar).expect("shaped by construction")
}

impl TwistedHomComplex {
    fn build(base: &TruncatedCbba, sys: &LocalSystemPair) -> Self {
        let (hom, basis) = twisted_hom_bicomplex(base, sys);
        let corner = corner_complex(&hom);
        TwistedHomComplex {
            hom,
            corner,
            basis,
            base_dim: base.dim(),
            v_dim: sys.v.total_dim(),
        }
    }

    /// Coordinates of a homogeneous `ψ: V -> 𝒜` in `Hom^{rs}`; `None` if
    /// `ψ` has entries outside that bidegree.
    pub fn hom_vector(&self, rs: Bidegree, psi: &RatMatrix) -> Option<Vec<Rational>> {
        let mut out = vec![Rational::zero(); self.basis.dim(rs)];
        for i in 0..psi.rows() {
            for j in 0..psi.cols() {
                let c = &psi[(i, j)];
                if c.is_zero() {
                    continue;
                }
                let (at, k) = self.basis.position[&(i, j)];
                if at != rs {
                    return None;
                }
                out[k] = c.clone();
            }
        }
        Some(out)
    }

    pub fn hom_matrix(&self, rs: Bidegree, coords: &[Rational]) -> RatMatrix {
        let mut m = RatMatrix::zeros(self.base_dim, self.v_dim);
        if let Some(list) = self.basis.entries.get(&rs) {
            for (&(i, j), c) in list.iter().zip(coords) {
                m[(i, j)] = c.clone();
            }
        }
        m
    }

    pub fn triple_vector(&self, rs: Bidegree, parts: [&RatMatrix; 3]) -> Option<Vec<Rational>> {
        let mut out = Vec::new();
        for (slot, psi) in corner_slots(rs).into_iter().zip(parts) {
            out.extend(self.hom_vector(slot, psi)?);
        }
        Some(out)
    }

    /// `(f, h, g)` as maps `V -> 𝒜`.
    pub fn triple_parts(&self, rs: Bidegree, v: &[Rational]) -> [RatMatrix; 3] {
        let mut start = 0;
        corner_slots(rs).map(|slot| {
            let n = self.hom.dim(slot);
            let m = self.hom_matrix(slot, &v[start..start + n]);
            start += n;
            m
        })
    }
}

fn check_twisting(
    base: &TruncatedCbba,
    vb: &VBasis,
    theta: &Twisting,
    which: Differential,
    diags: &mut Vec<SystemDiagnostic>,
) {
    let n = vb.dim();
    for (&m, tm) in theta {
        if m >= base.dim() {
            diags.push(SystemDiagnostic::Shape(format!("{which} twisting uses monomial #{m} outside the base")));
            continue;
        }
        if tm.rows() != n || tm.cols() != n {
            diags.push(SystemDiagnostic::Shape(format!(
                "{which} twisting coefficient has shape {}x{}, expected {n}x{n}",
                tm.rows(),
                tm.cols()
            )));
            continue;
        }
        for r in 0..n {
            for c in 0..n {
                if tm[(r, c)].is_zero() {
                    continue;
                }
                if m == base.unit() {
                    diags.push(SystemDiagnostic::Degree(format!(
                        "{which} twisting has a constant coefficient (must lie in the augmentation ideal)"
                    )));
                } else if base.degree(m) + vb.degree(r) != vb.degree(c) + which.step() {
                    diags.push(SystemDiagnostic::Degree(format!(
                        "{which} twisting term {}⊗v{r} on v{c} has the wrong bidegree",
                        base.format_elem(&base.basis_elem(m))
                    )));
                }
            }
        }
    }
}

/// Checks shapes, degrees and the three commuting-pair equations on
/// `Hom(V, 𝒜)`; empty iff all hold.
pub fn validate_system(sys: &LocalSystemPair, base: &TruncatedCbba) -> Vec<SystemDiagnostic> {
    let mut diags = Vec::new();
    if !sys.v.validate().is_empty() {
        diags.push(SystemDiagnostic::Shape("V is not a bicomplex".into()));
        return diags;
    }
    if let Some(b) = sys.v.support().find(|b| b.p < 0 || b.q < 0) {
        diags.push(SystemDiagnostic::Degree(format!("V has a nonzero space at {b} outside the first quadrant")));
    }
    let vb = VBasis::new(&sys.v);
    check_twisting(base, &vb, &sys.theta, Differential::Del, &mut diags);
    check_twisting(base, &vb, &sys.thetabar, Differential::Delbar, &mut diags);
    if !diags.is_empty() {
        return diags;
    }
    let (h, _) = twisted_hom_bicomplex(base, sys);
    for d in h.validate() {
        let equation = match d.identity {
            IdentityKind::DelSquared => Equation::DelSquared,
            IdentityKind::DelbarSquared => Equation::DelbarSquared,
            IdentityKind::Anticommutation => Equation::Anticommutation,
        };
        diags.push(SystemDiagnostic::Equation { equation, at: d.at });
    }
    diags
}

fn check_phi(base: &TruncatedCbba, vb: &VBasis, phi: &RatMatrix, which: Differential, diags: &mut Vec<SystemDiagnostic>) {
    if phi.rows() != base.dim() || phi.cols() != vb.dim() {
        diags.push(SystemDiagnostic::Shape(format!(
            "{which} component of phi has shape {}x{}, expected {}x{}",
            phi.rows(),
            phi.cols(),
            base.dim(),
            vb.dim()
        )));
        return;
    }
    for i in 0..phi.rows() {
        for w in 0..phi.cols() {
            if !phi[(i, w)].is_zero() && base.degree(i) != vb.degree(w) + which.step() {
                diags.push(SystemDiagnostic::Degree(format!(
                    "{which} component of phi sends v{w} to a term of bidegree {}",
                    base.degree(i)
                )));
            }
        }
    }
}

fn first_nonzero_column(m: &RatMatrix, vb: &VBasis) -> Option<Bidegree> {
    (0..m.cols()).find(|&w| (0..m.rows()).any(|i| !m[(i, w)].is_zero())).map(|w| vb.degree(w))
}

impl HirschExtension {
    /// Unchecked; see [`HirschExtension::diagnostics`].
    pub fn from_parts(base: TruncatedCbba, system: LocalSystemPair, phi: RatMatrix, phibar: RatMatrix) -> Self {
        HirschExtension {
            base,
            system,
            phi,
            phibar,
        }
    }

    pub fn new(base: TruncatedCbba, system: LocalSystemPair, phi: RatMatrix, phibar: RatMatrix) -> Result<Self, HirschError> {
        let e = HirschExtension::from_parts(base, system, phi, phibar);
        let diags = e.diagnostics();
        if diags.is_empty() {
            Ok(e)
        } else {
            Err(HirschError::InvalidExtension(diags))
        }
    }

    /// The trivial extension (`φ = φ̄ = 0`) by a local system.
    pub fn trivial(base: TruncatedCbba, system: LocalSystemPair) -> Result<Self, HirschError> {
        let z = RatMatrix::zeros(base.dim(), system.v.total_dim());
        HirschExtension::new(base, system, z.clone(), z)
    }

    /// Shapes, degrees and the structure equations: the three
    /// commuting-pair equations, `∂_Θφ = 0`, `∂̄_Θ̄φ̄ = 0` and
    /// `∂_Θφ̄ + ∂̄_Θ̄φ = 0`.
    pub fn diagnostics(&self) -> Vec<SystemDiagnostic> {
        let mut diags = validate_system(&self.system, &self.base);
        if diags.iter().any(|d| !matches!(d, SystemDiagnostic::Equation { .. })) {
            return diags;
        }
        let vb = VBasis::new(&self.system.v);
        check_phi(&self.base, &vb, &self.phi, Differential::Del, &mut diags);
        check_phi(&self.base, &vb, &self.phibar, Differential::Delbar, &mut diags);
        if diags.iter().any(|d| !matches!(d, SystemDiagnostic::Equation { .. })) {
            return diags;
        }
        let t = |which, psi: &RatMatrix| {
            twisted_apply_with(&self.base, &vb, self.system.twisting(which), which, psi, 1)
        };
        let dphi = t(Differential::Del, &self.phi);
        let dbphibar = t(Differential::Delbar, &self.phibar);
        let mixed = t(Differential::Del, &self.phibar).add(&t(Differential::Delbar, &self.phi));
        for (m, equation) in [
            (dphi, Equation::DelPhi),
            (dbphibar, Equation::DelbarPhibar),
            (mixed, Equation::Mixed),
        ] {
            if let Some(at) = first_nonzero_column(&m, &vb) {
                diags.push(SystemDiagnostic::Equation { equation, at });
            }
        }
        diags
    }

    pub fn v(&self) -> &Bicomplex {
        &self.system.v
    }

    pub fn phi_part(&self, which: Differential) -> &RatMatrix {
        match which {
            Differential::Del => &self.phi,
            Differential::Delbar => &self.phibar,
        }
    }

    fn phi_part_mut(&mut self, which: Differential) -> &mut RatMatrix {
        match which {
            Differential::Del => &mut self.phi,
            Differential::Delbar => &mut self.phibar,
        }
    }
}

/// An element of the part of `𝒜 ⊗ ΛV` linear in `V`: `base + Σ_w coeff[w]·w`.
#[derive(Clone, Debug, PartialEq)]
struct LinearElem {
    base: Elem,
    coeff: Vec<Elem>,
}

impl LinearElem {
    fn zero(a: &TruncatedCbba, n: usize) -> Self {
        LinearElem {
            base: a.zero_elem(),
            coeff: vec![a.zero_elem(); n],
        }
    }

    fn generator(a: &TruncatedCbba, n: usize, w: usize) -> Self {
        let mut e = LinearElem::zero(a, n);
        e.coeff[w][a.unit()] = Rational::one();
        e
    }

    fn is_zero(&self) -> bool {
        self.base.iter().chain(self.coeff.iter().flatten()).all(Zero::is_zero)
    }

    fn add(&self, other: &LinearElem) -> LinearElem {
        let add = |a: &Elem, b: &Elem| a.iter().zip(b).map(|(x, y)| x + y).collect::<Elem>();
        LinearElem {
            base: add(&self.base, &other.base),
            coeff: self.coeff.iter().zip(&other.coeff).map(|(a, b)| add(a, b)).collect(),
        }
    }

    fn sub(&self, other: &LinearElem) -> LinearElem {
        let sub = |a: &Elem, b: &Elem| a.iter().zip(b).map(|(x, y)| x - y).collect::<Elem>();
        LinearElem {
            base: sub(&self.base, &other.base),
            coeff: self.coeff.iter().zip(&other.coeff).map(|(a, b)| sub(a, b)).collect(),
        }
    }
}

/// The differential of the extension on its `V`-linear part, from the
/// algebra structure: `∂(m·w) = ∂m·w + (-1)^{|m|} m·(∂_V w + φw + Θw)`.
fn extension_d(e: &HirschExtension, vb: &VBasis, which: Differential, x: &LinearElem) -> LinearElem {
    let a = &e.base;
    let n = vb.dim();
    let mut out = LinearElem::zero(a, n);
    out.base = a.apply(which, &x.base);
    let dv = vb.d(which);
    let phi = e.phi_part(which);
    let theta = e.system.twisting(which);
    for w in 0..n {
        for (i, alpha) in x.coeff[w].iter().enumerate() {
            if alpha.is_zero() {
                continue;
            }
            for (k, c) in a.d_index(which, i) {
                out.coeff[w][*k] += alpha * c;
            }
            let s = sign(a.total_degree(i));
            let sa = &s * alpha;
            for w2 in 0..n {
                let beta = &dv[(w2, w)];
                if !beta.is_zero() {
                    out.coeff[w2][i] += &sa * beta;
                }
            }
            for l in 0..a.dim() {
                let gamma = &phi[(l, w)];
                if gamma.is_zero() {
                    continue;
                }
                if let Some((sigma, k)) = a.mul_index(i, l) {
                    out.base[k] += &sa * gamma * sigma;
                }
            }
            for (&m, tm) in theta {
                let Some((sigma, k)) = a.mul_index(i, m) else {
                    continue;
                };
                for w2 in 0..n {
                    let gamma = &tm[(w2, w)];
                    if !gamma.is_zero() {
                        out.coeff[w2][k] += &sa * gamma * &sigma;
                    }
                }
            }
        }
    }
    out
}

/// Identities among `∂, ∂̄` that fail on some generator of `V`, computed
/// in the extension algebra itself.
pub fn d_squared_defects(e: &HirschExtension) -> Vec<(IdentityKind, Bidegree)> {
    let vb = VBasis::new(&e.system.v);
    let n = vb.dim();
    let mut out = Vec::new();
    let d = |which, x: &LinearElem| extension_d(e, &vb, which, x);
    for w in 0..n {
        let x = LinearElem::generator(&e.base, n, w);
        let dx = d(Differential::Del, &x);
        let bx = d(Differential::Delbar, &x);
        let checks = [
            (IdentityKind::DelSquared, d(Differential::Del, &dx)),
            (IdentityKind::DelbarSquared, d(Differential::Delbar, &bx)),
            (IdentityKind::Anticommutation, d(Differential::Del, &bx).add(&d(Differential::Delbar, &dx))),
        ];
        for (kind, v) in checks {
            if !v.is_zero() {
                out.push((kind, vb.degree(w)));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// An algebra automorphism of `𝒜 ⊗ ΛV` fixing `𝒜` and sending
/// `w ↦ w + H(w)`, with `H = to_base + Σ_m m ⊗ to_module[m]` of degree 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelativeAutomorphism {
    pub to_base: Option<RatMatrix>,
    pub to_module: Twisting,
}

impl RelativeAutomorphism {
    pub fn from_base(h: RatMatrix) -> Self {
        RelativeAutomorphism {
            to_base: Some(h),
            to_module: Twisting::new(),
        }
    }

    /// `x ↦ σ(x) - x`.
    fn nilpotent_part(&self, a: &TruncatedCbba, x: &LinearElem) -> LinearElem {
        let n = x.coeff.len();
        let mut out = LinearElem::zero(a, n);
        for w in 0..n {
            let c = &x.coeff[w];
            if c.iter().all(Zero::is_zero) {
                continue;
            }
            if let Some(h) = &self.to_base {
                let col = h.column(w);
                let prod = a.mul(c, &col);
                for (o, p) in out.base.iter_mut().zip(prod) {
                    *o += p;
                }
            }
            for (&m, tm) in &self.to_module {
                let cm = a.mul(c, &a.basis_elem(m));
                for w2 in 0..n {
                    let gamma = &tm[(w2, w)];
                    if gamma.is_zero() {
                        continue;
                    }
                    for (o, p) in out.coeff[w2].iter_mut().zip(&cm) {
                        *o += gamma * p;
                    }
                }
            }
        }
        out
    }

    fn apply(&self, a: &TruncatedCbba, x: &LinearElem) -> LinearElem {
        x.add(&self.nilpotent_part(a, x))
    }

    /// Solves `σ(z) = y` by the fixed-point iteration `z = y - N z`; `N`
    /// raises the degree of the coefficient so the iteration stops.
    fn apply_inverse(&self, a: &TruncatedCbba, y: &LinearElem) -> LinearElem {
        let mut z = y.clone();
        for _ in 0..(a.truncation() as usize + 3) {
            let next = y.sub(&self.nilpotent_part(a, &z));
            if next == z {
                return z;
            }
            z = next;
        }
        panic!("relative automorphism is not unipotent");
    }

    fn check_degrees(&self, a: &TruncatedCbba, vb: &VBasis) -> Result<(), HirschError> {
        let bad = |s: String| Err(HirschError::Degree(s));
        if let Some(h) = &self.to_base {
            if h.rows() != a.dim() || h.cols() != vb.dim() {
                return bad("automorphism base part has the wrong shape".into());
            }
            for i in 0..h.rows() {
                for w in 0..h.cols() {
                    if !h[(i, w)].is_zero() && a.degree(i) != vb.degree(w) {
                        return bad(format!("automorphism sends v{w} to a term of bidegree {}", a.degree(i)));
                    }
                }
            }
        }
        for (&m, tm) in &self.to_module {
            for r in 0..tm.rows() {
                for c in 0..tm.cols() {
                    if tm[(r, c)].is_zero() {
                        continue;
                    }
                    if m == a.unit() || a.degree(m) + vb.degree(r) != vb.degree(c) {
                        return bad(format!("automorphism module term on v{c} has the wrong bidegree"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `σ⁻¹(∂, ∂̄)σ`, computed literally in the extension algebra and read off
/// on the generators of `V`.
pub fn conjugate_extension(e: &HirschExtension, sigma: &RelativeAutomorphism) -> Result<HirschExtension, HirschError> {
    let vb = VBasis::new(&e.system.v);
    sigma.check_degrees(&e.base, &vb)?;
    let a = &e.base;
    let n = vb.dim();
    let mut out = e.clone();
    for which in [Differential::Del, Differential::Delbar] {
        let mut phi = RatMatrix::zeros(a.dim(), n);
        let mut theta = Twisting::new();
        for w in 0..n {
            let x = LinearElem::generator(a, n, w);
            let y = sigma.apply_inverse(a, &extension_d(e, &vb, which, &sigma.apply(a, &x)));
            for (k, c) in y.base.iter().enumerate() {
                phi[(k, w)] = c.clone();
            }
            for w2 in 0..n {
                for (m, c) in y.coeff[w2].iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    if m == a.unit() {
                        if c != &vb.d(which)[(w2, w)] {
                            return Err(HirschError::Mismatch("conjugation changed the differential of V".into()));
                        }
                        continue;
                    }
                    theta.entry(m).or_insert_with(|| RatMatrix::zeros(n, n))[(w2, w)] = c.clone();
                }
            }
        }
        *out.phi_part_mut(which) = phi;
        *out.system.twisting_mut(which) = theta;
    }
    for w in [&mut out.system.theta, &mut out.system.thetabar] {
        w.retain(|_, m| !m.is_zero());
    }
    Ok(out)
}

/// `[V[-1], 𝒜]_{Θ,Θ̄}`: Bott-Chern cohomology of the corner complex.
pub fn twisted_homotopy(base: &TruncatedCbba, sys: &LocalSystemPair) -> Result<CohomologyTable, HirschError> {
    let t = twisted_hom(base, sys)?;
    Ok(cohomology(&t.corner, CohomologyKind::BottChern)?)
}

/// Homotopy classes `V[-1] -> 𝒜` from the ordinary Hom bicomplex of
/// `revL ⊗ V` and the underlying bicomplex of `𝒜`.
pub fn untwisted_homotopy(base: &TruncatedCbba, v: &Bicomplex) -> Result<CohomologyTable, HirschError> {
    let h = hom(&tensor(&shift_down_shape(), v), &base.bicomplex());
    Ok(cohomology(&h, CohomologyKind::BottChern)?)
}

pub fn twisted_hom(base: &TruncatedCbba, sys: &LocalSystemPair) -> Result<TwistedHomComplex, HirschError> {
    let diags = validate_system(sys, base);
    if !diags.is_empty() {
        return Err(HirschError::InvalidSystem(diags));
    }
    Ok(TwistedHomComplex::build(base, sys))
}

/// The k-invariant: the cocycle `Φ = (φ̄, ∂_Θφ̄, φ)` at `(0,0)` of the
/// corner complex and its Bott-Chern class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KInvariant {
    pub cocycle: Vec<Rational>,
    /// Coordinates in `[V[-1], 𝒜]^{(0,0)}`.
    pub class: Vec<Rational>,
}

impl KInvariant {
    pub fn is_zero(&self) -> bool {
        self.class.iter().all(Zero::is_zero)
    }

    pub fn homotopy_dim(&self) -> usize {
        self.class.len()
    }
}

fn phi_cocycle(e: &HirschExtension, t: &TwistedHomComplex) -> Result<Vec<Rational>, HirschError> {
    let h = twisted_apply(&e.base, &e.system, Differential::Del, &e.phibar, 1);
    let origin = Bidegree::new(0, 0);
    let v = t
        .triple_vector(origin, [&e.phibar, &h, &e.phi])
        .ok_or_else(|| HirschError::Degree("phi components have the wrong bidegree".into()))?;
    for which in [Differential::Del, Differential::Delbar] {
        if !t.corner.block(which, origin).mul_vec(&v).iter().all(Zero::is_zero) {
            return Err(HirschError::Mismatch(format!("Phi is not {which}-closed")));
        }
    }
    Ok(v)
}

fn class_at_origin(t: &TwistedHomComplex, v: &[Rational]) -> Vec<Rational> {
    let q = LocalSubspaces::at(&t.corner, Bidegree::new(0, 0)).quotient(CohomologyKind::BottChern);
    q.projection().mul_vec(v)
}

pub fn k_invariant(e: &HirschExtension) -> Result<KInvariant, HirschError> {
    let diags = e.diagnostics();
    if !diags.is_empty() {
        return Err(HirschError::InvalidExtension(diags));
    }
    let t = TwistedHomComplex::build(&e.base, &e.system);
    let cocycle = phi_cocycle(e, &t)?;
    let class = class_at_origin(&t, &cocycle);
    Ok(KInvariant { cocycle, class })
}

/// `Ψ` at `(-1,-1)` with `∂∂̄Ψ = v`, if any.
fn solve_ddbar(t: &TwistedHomComplex, v: &[Rational]) -> Option<Vec<Rational>> {
    let at = Bidegree::new(-1, -1);
    let a = t.corner.del_delbar_block(at);
    solve_linear(&a, v).expect("shapes agree")
}

/// `h - ∂_Θf + ∂̄_Θ̄g` for `Ψ = (f, h, g)` at `(-1,-1)`.
fn witness_from(base: &TruncatedCbba, sys: &LocalSystemPair, t: &TwistedHomComplex, psi: &[Rational]) -> RatMatrix {
    let [f, h, g] = t.triple_parts(Bidegree::new(-1, -1), psi);
    h.sub(&twisted_apply(base, sys, Differential::Del, &f, -1))
        .add(&twisted_apply(base, sys, Differential::Delbar, &g, -1))
}

#[derive(Clone, Debug)]
pub struct IsoOutcome {
    pub isomorphic: bool,
    /// `H: V -> 𝒜` with `σ_H⁻¹ e1 σ_H = e2`, checked by literal conjugation.
    pub witness: Option<RatMatrix>,
    pub reason: String,
}

pub fn extensions_isomorphic(e1: &HirschExtension, e2: &HirschExtension) -> Result<IsoOutcome, HirschError> {
    if e1.base != e2.base {
        return Err(HirschError::Mismatch("extensions have different bases".into()));
    }
    if e1.system.v != e2.system.v {
        return Err(HirschError::Mismatch("extensions have different V".into()));
    }
    for e in [e1, e2] {
        let d = e.diagnostics();
        if !d.is_empty() {
            return Err(HirschError::InvalidExtension(d));
        }
    }
    if e1.system != e2.system {
        return Ok(IsoOutcome {
            isomorphic: false,
            witness: None,
            reason: "local systems differ".into(),
        });
    }
    let t = TwistedHomComplex::build(&e1.base, &e1.system);
    let diff: Vec<Rational> = phi_cocycle(e1, &t)?
        .into_iter()
        .zip(phi_cocycle(e2, &t)?)
        .map(|(a, b)| a - b)
        .collect();
    let Some(psi) = solve_ddbar(&t, &diff) else {
        return Ok(IsoOutcome {
            isomorphic: false,
            witness: None,
            reason: "k-invariants differ".into(),
        });
    };
    let h = witness_from(&e1.base, &e1.system, &t, &psi);
    let conj = conjugate_extension(e1, &RelativeAutomorphism::from_base(h.clone()))?;
    if conj.phi != e2.phi || conj.phibar != e2.phibar || conj.system != e2.system {
        return Err(HirschError::Mismatch("reconstructed witness does not conjugate e1 to e2".into()));
    }
    Ok(IsoOutcome {
        isomorphic: true,
        witness: Some(h),
        reason: "k-invariants agree".into(),
    })
}

#[derive(Clone, Debug)]
pub enum ObstructionResult {
    /// `H: V -> 𝒞` with `fφ = ∂_ΘH` and `fφ̄ = ∂̄_Θ̄H`.
    Extends { h: RatMatrix },
    /// The nonzero class of `fΦ`.
    Obstructed { class: Vec<Rational> },
}

/// The data of `e` pushed along `f`.
pub fn push_forward(f: &CbbaMap, e: &HirschExtension) -> Result<HirschExtension, HirschError> {
    if f.source() != &e.base {
        return Err(HirschError::Mismatch("map source is not the base of the extension".into()));
    }
    let c = f.target();
    let fm = f.matrix();
    let n = e.system.v.total_dim();
    let push = |theta: &Twisting| {
        let mut out = Twisting::new();
        for (&m, tm) in theta {
            for k in 0..c.dim() {
                let coef = &fm[(k, m)];
                if coef.is_zero() {
                    continue;
                }
                let entry = out.entry(k).or_insert_with(|| RatMatrix::zeros(n, n));
                *entry = entry.add(&tm.scale(coef));
            }
        }
        out.retain(|_, m| !m.is_zero());
        out
    };
    let system = LocalSystemPair {
        v: e.system.v.clone(),
        theta: push(&e.system.theta),
        thetabar: push(&e.system.thetabar),
    };
    HirschExtension::new(c.clone(), system, fm.mul(&e.phi), fm.mul(&e.phibar))
}

pub fn obstruction_extend(f: &CbbaMap, e: &HirschExtension) -> Result<ObstructionResult, HirschError> {
    let d = e.diagnostics();
    if !d.is_empty() {
        return Err(HirschError::InvalidExtension(d));
    }
    let pushed = push_forward(f, e)?;
    let t = TwistedHomComplex::build(&pushed.base, &pushed.system);
    let v = phi_cocycle(&pushed, &t)?;
    let Some(psi) = solve_ddbar(&t, &v) else {
        return Ok(ObstructionResult::Obstructed {
            class: class_at_origin(&t, &v),
        });
    };
    let h = witness_from(&pushed.base, &pushed.system, &t, &psi).neg();
    for which in [Differential::Del, Differential::Delbar] {
        if twisted_apply(&pushed.base, &pushed.system, which, &h, 0) != *pushed.phi_part(which) {
            return Err(HirschError::Mismatch(format!("null-homotopy does not solve the {which} equation")));
        }
    }
    Ok(ObstructionResult::Extends { h })
}

/// The extension algebra `𝒜 ⊗ ΛV` written as a free cbba on the base
/// generators and one generator per basis vector of `V`, with the inclusion
/// of the base. Needs `V` in total degrees ≥ 1.
pub fn total_algebra(e: &HirschExtension) -> Result<(TruncatedCbba, CbbaMap), HirschError> {
    let a = &e.base;
    let vb = VBasis::new(&e.system.v);
    let names = a.names();
    let mut vnames = Vec::new();
    for w in 0..vb.dim() {
        let mut name = format!("v{w}");
        while names.contains(&name) {
            name.push('_');
        }
        vnames.push(name);
    }
    let mono = |i: usize| format_monomial(a.monomial(i), &names);
    let mut specs: Vec<GeneratorSpec> = a.specs().to_vec();
    for w in 0..vb.dim() {
        let mut d = [String::new(), String::new()];
        for (slot, which) in [Differential::Del, Differential::Delbar].into_iter().enumerate() {
            let mut terms: Vec<(Rational, String)> = Vec::new();
            for w2 in 0..vb.dim() {
                terms.push((vb.d(which)[(w2, w)].clone(), vnames[w2].clone()));
            }
            let phi = e.phi_part(which);
            for i in 0..a.dim() {
                terms.push((phi[(i, w)].clone(), mono(i)));
            }
            for (&m, tm) in e.system.twisting(which) {
                for w2 in 0..vb.dim() {
                    terms.push((tm[(w2, w)].clone(), format!("{}*{}", mono(m), vnames[w2])));
                }
            }
            let mut text = String::new();
            for (c, word) in terms.into_iter().filter(|(c, _)| !c.is_zero()) {
                let neg = c < Rational::zero();
                text.push_str(if neg { " - " } else { " + " });
                let abs = if neg { -c } else { c };
                text.push_str(&format!("{abs}*{word}"));
            }
            d[slot] = if text.is_empty() { "0".into() } else { text };
        }
        let b = vb.degree(w);
        let [del, delbar] = d;
        specs.push(GeneratorSpec::new(&vnames[w], b.p, b.q, &del, &delbar));
    }
    let total = free_cbba(&specs, a.truncation())?;
    let images = a
        .generators()
        .iter()
        .map(|g| total.parse_elem(&g.name))
        .collect::<Result<Vec<_>, _>>()?;
    let inclusion = CbbaMap::new(a.clone(), total.clone(), &images)?;
    Ok((total, inclusion))
}

/// Base `Λ(x)` with `x` at `(1,1)`, truncated at `2n+2`.
pub fn projective_base(n: u32) -> TruncatedCbba {
    free_cbba(&[GeneratorSpec::new("x", 1, 1, "0", "0")], 2 * n as i32 + 2).expect("valid")
}

/// `V = span(y, ∂y, ∂̄y)` with `y` at `(n,n)`, and `φ(∂̄y) = x^{n+1}`,
/// `φ̄(∂y) = -x^{n+1}`, so that `∂∂̄y = x^{n+1}`.
pub fn projective_extension(n: u32) -> HirschExtension {
    let base = projective_base(n);
    let ni = n as i32;
    let v = make_zigzag(&ZigZagDescriptor::new(Family::A, 1, Bidegree::new(ni, ni)).expect("valid")).expect("valid");
    let vb = VBasis::new(&v);
    let top = base.parse_elem(&format!("x^{}", n + 1)).expect("valid");
    let k = top.iter().position(|c| !c.is_zero()).expect("x^(n+1) survives the truncation");
    let mut phi = RatMatrix::zeros(base.dim(), 3);
    let mut phibar = RatMatrix::zeros(base.dim(), 3);
    phi[(k, vb.global(Bidegree::new(ni, ni + 1), 0))] = Rational::one();
    phibar[(k, vb.global(Bidegree::new(ni + 1, ni), 0))] = -Rational::one();
    HirschExtension::new(base, LocalSystemPair::untwisted(v), phi, phibar).expect("projective fixture is valid")
}

/// The total algebra of [`projective_extension`] as a free cbba on
/// `x, y, dy, dby`.
pub fn projective_total_space(n: u32) -> TruncatedCbba {
    let ni = n as i32;
    let top = format!("x^{}", n + 1);
    free_cbba(
        &[
            GeneratorSpec::new("x", 1, 1, "0", "0"),
            GeneratorSpec::new("y", ni, ni, "dy", "dby"),
            GeneratorSpec::new("dy", ni + 1, ni, "0", &format!("-{top}")),
            GeneratorSpec::new("dby", ni, ni + 1, &top, "0"),
        ],
        2 * ni + 2,
    )
    .expect("valid")
}

/// Base with `a` at (1,0), `b` at (0,1), `z` at (1,1), `∂̄a = z`, `∂b = -z`;
/// `V = span(v1, v2)` at `(0,0)` with `Θv1 = a⊗v2`, `Θ̄v1 = ±b⊗v2`. The
/// plus sign gives a commuting pair, the minus sign breaks anticommutation.
pub fn twisted_pair_fixture(broken: bool) -> (TruncatedCbba, LocalSystemPair) {
    let base = free_cbba(
        &[
            GeneratorSpec::new("a", 1, 0, "0", "z"),
            GeneratorSpec::new("b", 0, 1, "-z", "0"),
            GeneratorSpec::new("z", 1, 1, "0", "0"),
        ],
        4,
    )
    .expect("valid");
    let origin = Bidegree::new(0, 0);
    let v = Bicomplex::from_blocks(BTreeMap::from([(origin, 2)]), BTreeMap::new(), BTreeMap::new()).expect("valid");
    let idx = |s: &str| base.parse_elem(s).unwrap().iter().position(|c| !c.is_zero()).unwrap();
    let mut t = RatMatrix::zeros(2, 2);
    t[(1, 0)] = Rational::one();
    let tb = if broken { t.neg() } else { t.clone() };
    let sys = LocalSystemPair {
        v,
        theta: Twisting::from([(idx("a"), t)]),
        thetabar: Twisting::from([(idx("b"), tb)]),
    };
    (base, sys)
}
