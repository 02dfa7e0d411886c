//! Seeded random inputs: scrambled sums of known summands, chain maps,
//! small truncated algebras and Hirsch extensions over them.

use std::collections::BTreeMap;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
pub use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::bicomplex::{direct_sum_all, hom, hom_layout, square, Bicomplex, Bidegree, Family};
use crate::decomp::{make_zigzag, ZigZagDescriptor};
use crate::exactq::{kernel, rat, RatMatrix, Rational};
use crate::hirsch::{
    conjugate_extension, free_cbba, twisted_hom, twisted_pair_fixture, GeneratorSpec, HirschExtension, LocalSystemPair,
    RelativeAutomorphism, TruncatedCbba, Twisting, VBasis,
};
use crate::morphism::BicomplexMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in `-k..=k`.
pub fn small<R: Rng>(rng: &mut R, k: i64) -> Rational {
    rat(rng.gen_range(-k..=k))
}

/// A random invertible matrix: permuted product of unit lower and upper
/// triangular matrices with small entries, times a diagonal of ±1, ±2.
pub fn random_invertible<R: Rng>(rng: &mut R, n: usize) -> RatMatrix {
    let mut l = RatMatrix::identity(n);
    let mut u = RatMatrix::identity(n);
    for i in 0..n {
        for j in 0..i {
            l[(i, j)] = small(rng, 2);
            u[(j, i)] = small(rng, 2);
        }
        u[(i, i)] = rat(*[-2, -1, 1, 2].choose(rng).unwrap());
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    l.mul(&u).select_rows(&perm)
}

pub fn random_basis_change<R: Rng>(rng: &mut R, b: &Bicomplex) -> BTreeMap<Bidegree, RatMatrix> {
    b.dims().iter().map(|(&at, &d)| (at, random_invertible(rng, d))).collect()
}

pub fn scramble<R: Rng>(rng: &mut R, b: &Bicomplex) -> Bicomplex {
    b.conjugate(&random_basis_change(rng, b))
}

/// A direct sum of squares and zig-zags with its summands recorded.
#[derive(Clone, Debug)]
pub struct KnownSum {
    pub bicomplex: Bicomplex,
    pub squares: BTreeMap<Bidegree, usize>,
    pub zigzags: BTreeMap<ZigZagDescriptor, usize>,
}

pub fn random_descriptor<R: Rng>(rng: &mut R, max_n: i32, anchors: std::ops::RangeInclusive<i32>) -> ZigZagDescriptor {
    let family = *[Family::A, Family::B, Family::C].choose(rng).unwrap();
    let n = match family {
        Family::A => rng.gen_range(-max_n..=max_n),
        _ => rng.gen_range(1..=max_n),
    };
    let anchor = Bidegree::new(rng.gen_range(anchors.clone()), rng.gen_range(anchors));
    ZigZagDescriptor::new(family, n, anchor).expect("valid parameters")
}

/// Summands are added while they fit in `max_dim`; at least one is placed
/// when `max_dim >= 1`.
pub fn random_known_sum<R: Rng>(rng: &mut R, max_dim: usize, max_n: i32) -> KnownSum {
    let target = rng.gen_range(1..=max_dim.max(1));
    let mut squares = BTreeMap::new();
    let mut zigzags = BTreeMap::new();
    let mut parts = Vec::new();
    let mut dim = 0;
    for _ in 0..4 * target {
        if dim >= target {
            break;
        }
        if rng.gen_bool(0.25) {
            let at = Bidegree::new(rng.gen_range(-2..=2), rng.gen_range(-2..=2));
            if dim + 4 <= max_dim {
                *squares.entry(at).or_insert(0) += 1;
                parts.push(square(at));
                dim += 4;
            }
        } else {
            let d = random_descriptor(rng, max_n, -2..=2);
            if dim + d.dim() <= max_dim {
                *zigzags.entry(d).or_insert(0) += 1;
                parts.push(make_zigzag(&d).expect("valid descriptor"));
                dim += d.dim();
            }
        }
    }
    KnownSum {
        bicomplex: direct_sum_all(&parts),
        squares,
        zigzags,
    }
}

/// A scrambled random sum; every finite bicomplex has this form.
pub fn random_bicomplex<R: Rng>(rng: &mut R, max_dim: usize) -> Bicomplex {
    let k = random_known_sum(rng, max_dim, 3);
    scramble(rng, &k.bicomplex)
}

/// A random chain map: a small integer combination of a basis of the
/// (0,0) cycles of `Hom(V, W)`.
pub fn random_chain_map<R: Rng>(rng: &mut R, v: &Bicomplex, w: &Bicomplex) -> BicomplexMap {
    let h = hom(v, w);
    let origin = Bidegree::new(0, 0);
    let z = kernel(&h.del_block(origin).vstack(&h.delbar_block(origin)));
    let mut x = vec![Rational::zero(); h.dim(origin)];
    for j in 0..z.dim() {
        let c = small(rng, 2);
        for (xi, bi) in x.iter_mut().zip(z.basis().column(j)) {
            *xi += &c * bi;
        }
    }
    let layout = hom_layout(v, w);
    let mut blocks = BTreeMap::new();
    for (&(rs, b), &off) in &layout.offsets {
        if rs != origin {
            continue;
        }
        let (rows, cols) = (w.dim(b), v.dim(b));
        let mut m = RatMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = x[off + i * cols + j].clone();
            }
        }
        blocks.insert(b, m);
    }
    BicomplexMap::new(v.clone(), w.clone(), blocks).expect("cycles of Hom are chain maps")
}

/// A random first-quadrant bicomplex of dimension `1..=max_dim` in total
/// degrees `min_total..`.
pub fn random_coefficients<R: Rng>(rng: &mut R, max_dim: usize, min_total: i32) -> Bicomplex {
    loop {
        let k = random_known_sum(rng, max_dim, 1);
        let b = &k.bicomplex;
        if b.is_zero() {
            continue;
        }
        let (lo, _) = b.bounding_box().expect("nonzero");
        let mut shift = Bidegree::new(-lo.p + rng.gen_range(0..=1), -lo.q + rng.gen_range(0..=1));
        let low = b.degree_range().expect("nonzero").0 + shift.total();
        if low < min_total {
            shift = shift + Bidegree::new(min_total - low, 0);
        }
        return scramble(rng, &b.translate(shift));
    }
}

/// A random truncated free cbba with `1..=max_gens` generators. Each
/// generator is closed, or has one differential equal to a multiple of a
/// product of earlier closed generators.
pub fn random_cbba<R: Rng>(rng: &mut R, max_gens: usize, truncation: i32) -> TruncatedCbba {
    let count = rng.gen_range(1..=max_gens.max(1));
    let mut specs: Vec<GeneratorSpec> = Vec::new();
    let mut closed: Vec<(String, Bidegree)> = Vec::new();
    for k in 0..count {
        let name = format!("{}", (b'a' + k as u8) as char);
        let try_exact = !closed.is_empty() && rng.gen_bool(0.4);
        if try_exact {
            // target monomial: product of one or two closed generators
            let mut factors = vec![closed.choose(rng).unwrap().clone()];
            if rng.gen_bool(0.4) {
                factors.push(closed.choose(rng).unwrap().clone());
            }
            let deg = factors.iter().fold(Bidegree::new(0, 0), |acc, f| acc + f.1);
            let del_side = rng.gen_bool(0.5);
            let g = if del_side { deg - Bidegree::DEL } else { deg - Bidegree::DELBAR };
            if g.p >= 0 && g.q >= 0 && g.total() >= 1 && deg.total() <= truncation {
                let word = factors.iter().map(|f| f.0.clone()).collect::<Vec<_>>().join("*");
                let c = rng.gen_range(1..=2);
                let value = format!("{c}*{word}");
                let (del, delbar) = if del_side { (value, "0".to_string()) } else { ("0".to_string(), value) };
                specs.push(GeneratorSpec::new(&name, g.p, g.q, &del, &delbar));
                continue;
            }
        }
        let (p, q) = loop {
            let p = rng.gen_range(0..=2);
            let q = rng.gen_range(0..=2);
            if p + q >= 1 {
                break (p, q);
            }
        };
        closed.push((name.clone(), Bidegree::new(p, q)));
        specs.push(GeneratorSpec::new(&name, p, q, "0", "0"));
    }
    free_cbba(&specs, truncation).expect("random cbba is valid by construction")
}

/// A relative automorphism `w ↦ w + H(w)` with `H` a random degree-0 map
/// into the base, and optionally a random part in `𝒜⁺ ⊗ V`.
pub fn random_automorphism<R: Rng>(rng: &mut R, base: &TruncatedCbba, v: &Bicomplex, module: bool) -> RelativeAutomorphism {
    let vb = VBasis::new(v);
    let n = vb.dim();
    let mut h = RatMatrix::zeros(base.dim(), n);
    for w in 0..n {
        for i in base.indices_at(vb.degree(w)) {
            if rng.gen_bool(0.6) {
                h[(i, w)] = small(rng, 2);
            }
        }
    }
    let mut to_module = Twisting::new();
    if module {
        for m in 0..base.dim() {
            if m == base.unit() {
                continue;
            }
            let mut t = RatMatrix::zeros(n, n);
            for r in 0..n {
                for c in 0..n {
                    if base.degree(m) + vb.degree(r) == vb.degree(c) && rng.gen_bool(0.6) {
                        t[(r, c)] = small(rng, 2);
                    }
                }
            }
            if !t.is_zero() {
                to_module.insert(m, t);
            }
        }
    }
    RelativeAutomorphism {
        to_base: Some(h),
        to_module,
    }
}

/// A random element of the `(0,0)` cocycles of the corner complex, read as
/// `(φ̄, ∂_Θφ̄, φ)`.
pub fn random_phi<R: Rng>(rng: &mut R, base: &TruncatedCbba, sys: &LocalSystemPair) -> (RatMatrix, RatMatrix) {
    let t = twisted_hom(base, sys).expect("valid system");
    let origin = Bidegree::new(0, 0);
    let z = kernel(&t.corner.del_block(origin).vstack(&t.corner.delbar_block(origin)));
    let mut x = vec![Rational::zero(); t.corner.dim(origin)];
    for j in 0..z.dim() {
        let c = small(rng, 2);
        for (xi, bi) in x.iter_mut().zip(z.basis().column(j)) {
            *xi += &c * bi;
        }
    }
    let [f, _, g] = t.triple_parts(origin, &x);
    (g, f)
}

/// A random valid extension: a random base and coefficients (or, one time
/// in five, the twisted pair fixture), twisting changed by a random gauge,
/// then a random cocycle for `(φ, φ̄)`.
pub fn random_extension<R: Rng>(rng: &mut R, max_gens: usize, max_v: usize, truncation: i32) -> HirschExtension {
    let (base, sys) = if rng.gen_bool(0.2) {
        twisted_pair_fixture(false)
    } else {
        let v = random_coefficients(rng, max_v, 1);
        (random_cbba(rng, max_gens, truncation), LocalSystemPair::untwisted(v))
    };
    let v = sys.v.clone();
    let trivial = HirschExtension::trivial(base.clone(), sys).expect("valid");
    let mut gauge = random_automorphism(rng, &base, &v, true);
    gauge.to_base = None;
    let twisted = conjugate_extension(&trivial, &gauge).expect("gauge preserves validity");
    let (phi, phibar) = random_phi(rng, &base, &twisted.system);
    let e = HirschExtension::from_parts(base, twisted.system, phi, phibar);
    debug_assert!(e.diagnostics().is_empty());
    e
}

/// Perturbs one degree-compatible entry of `φ`, `φ̄`, `Θ` or `Θ̄`; the
/// result may or may not satisfy the structure equations. When no such
/// entry exists the input is returned unchanged.
pub fn mutate_extension<R: Rng>(rng: &mut R, e: &HirschExtension) -> HirschExtension {
    let mut out = e.clone();
    let vb = VBasis::new(&e.system.v);
    let n = vb.dim();
    let a = &e.base;
    for _ in 0..32 {
        let del = rng.gen_bool(0.5);
        let step = if del { Bidegree::DEL } else { Bidegree::DELBAR };
        let c = rat(*[-1, 1, 2].choose(rng).unwrap());
        if rng.gen_bool(0.5) {
            let w = rng.gen_range(0..n);
            let slots: Vec<usize> = a.indices_at(vb.degree(w) + step).collect();
            if let Some(&i) = slots.choose(rng) {
                let phi = if del { &mut out.phi } else { &mut out.phibar };
                phi[(i, w)] += c;
                return out;
            }
        } else {
            let mut slots = Vec::new();
            for m in 0..a.dim() {
                if m == a.unit() {
                    continue;
                }
                for r in 0..n {
                    for col in 0..n {
                        if a.degree(m) + vb.degree(r) == vb.degree(col) + step {
                            slots.push((m, r, col));
                        }
                    }
                }
            }
            if let Some(&(m, r, col)) = slots.choose(rng) {
                let theta = if del { &mut out.system.theta } else { &mut out.system.thetabar };
                let t = theta.entry(m).or_insert_with(|| RatMatrix::zeros(n, n));
                t[(r, col)] += c;
                if t.is_zero() {
                    theta.remove(&m);
                }
                return out;
            }
        }
    }
    // No homogeneous slot was hit; a bidegree-breaking edit is not an
    // extension at all, so the input comes back unchanged.
    out
}
