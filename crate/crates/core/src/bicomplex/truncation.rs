use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{direct_sum_all, Bicomplex, BicomplexError, Bidegree, Differential};
use crate::exactq::{intersection, quotient_present, RatMatrix, Subspace};
use crate::morphism::BicomplexMap;

use super::cohomology::LocalSubspaces;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `τ≤k`, a sub-bicomplex.
    Below,
    /// `τ≥k`, a quotient bicomplex.
    Above,
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "below" | "le" => Ok(Side::Below),
            "above" | "ge" => Ok(Side::Above),
            _ => Err(format!("unknown truncation side `{s}` (expected below or above)")),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Below => "below",
            Side::Above => "above",
        })
    }
}

/// A truncation together with its canonical map: the inclusion
/// `τ≤k V -> V` or the projection `V -> τ≥k V`.
#[derive(Clone, Debug)]
pub struct Truncation {
    pub bicomplex: Bicomplex,
    pub map: BicomplexMap,
}

/// The sub-bicomplex spanned by `subspaces` (missing bidegrees mean zero),
/// in the canonical bases of the subspaces. Fails with the offending
/// bidegree if the family is not closed under both differentials.
pub fn sub_bicomplex(
    b: &Bicomplex,
    subspaces: &BTreeMap<Bidegree, Subspace>,
) -> Result<(Bicomplex, BTreeMap<Bidegree, RatMatrix>), BicomplexError> {
    let zero = |at: Bidegree| Subspace::zero(b.dim(at));
    let get = |at: Bidegree| subspaces.get(&at).cloned().unwrap_or_else(|| zero(at));
    let dims = subspaces.iter().map(|(&at, s)| (at, s.dim())).collect();
    let mut blocks: [BTreeMap<Bidegree, RatMatrix>; 2] = Default::default();
    for (slot, which) in [Differential::Del, Differential::Delbar].into_iter().enumerate() {
        for (&at, u) in subspaces {
            if u.is_zero() {
                continue;
            }
            let image = b.block(which, at).mul(u.basis());
            let coords = get(at + which.step()).coordinates(&image).ok_or_else(|| {
                BicomplexError::Unsupported(format!(
                    "subspace family is not closed under {which} at {at}"
                ))
            })?;
            blocks[slot].insert(at, coords);
        }
    }
    let [del, delbar] = blocks;
    let sub = Bicomplex::from_blocks(dims, del, delbar)?;
    let inclusion = subspaces
        .iter()
        .filter(|(_, s)| !s.is_zero())
        .map(|(&at, s)| (at, s.basis().clone()))
        .collect();
    Ok((sub, inclusion))
}

/// `V / U` for a sub-bicomplex `U` given by `subspaces`, together with the
/// projection blocks `V^b -> (V/U)^b`.
pub fn quotient_bicomplex(
    b: &Bicomplex,
    subspaces: &BTreeMap<Bidegree, Subspace>,
) -> Result<(Bicomplex, BTreeMap<Bidegree, RatMatrix>), BicomplexError> {
    let presentations: BTreeMap<Bidegree, _> = b
        .support()
        .map(|at| {
            let full = Subspace::full(b.dim(at));
            let den = subspaces
                .get(&at)
                .cloned()
                .unwrap_or_else(|| Subspace::zero(b.dim(at)));
            let q = quotient_present(&full, &den)
                .map_err(|e| BicomplexError::Unsupported(format!("at {at}: {e}")))?;
            Ok((at, q))
        })
        .collect::<Result<_, BicomplexError>>()?;
    let dims = presentations.iter().map(|(&at, q)| (at, q.dim())).collect();
    let mut blocks: [BTreeMap<Bidegree, RatMatrix>; 2] = Default::default();
    for (slot, which) in [Differential::Del, Differential::Delbar].into_iter().enumerate() {
        for (&at, q) in &presentations {
            let Some(qt) = presentations.get(&(at + which.step())) else {
                continue;
            };
            let d = b.block(which, at);
            if !qt.projection().mul(&d).mul(q.denominator().basis()).is_zero() {
                return Err(BicomplexError::Unsupported(format!(
                    "quotient is not a bicomplex: {which} does not preserve the submodule at {at}"
                )));
            }
            blocks[slot].insert(at, qt.projection().mul(&d).mul(q.section()));
        }
    }
    let [del, delbar] = blocks;
    let quotient = Bicomplex::from_blocks(dims, del, delbar)?;
    let projection = presentations
        .into_iter()
        .map(|(at, q)| (at, q.projection().clone()))
        .collect();
    Ok((quotient, projection))
}

/// The subspaces cut out by `τ≤k`.
fn below_subspaces(b: &Bicomplex, k: i32) -> BTreeMap<Bidegree, Subspace> {
    b.support()
        .map(|at| {
            let n = at.total();
            let s = if n <= k - 1 {
                Subspace::full(b.dim(at))
            } else if n == k {
                LocalSubspaces::at(b, at).ker_del_delbar
            } else if n == k + 1 {
                let local = LocalSubspaces::at(b, at);
                intersection(&local.cycles(), &local.boundaries())
            } else {
                Subspace::zero(b.dim(at))
            };
            (at, s)
        })
        .collect()
}

/// The sub-bicomplex whose quotient is `τ≥k`.
fn above_kernel_subspaces(b: &Bicomplex, k: i32) -> BTreeMap<Bidegree, Subspace> {
    b.support()
        .map(|at| {
            let n = at.total();
            let s = if n <= k - 1 {
                Subspace::full(b.dim(at))
            } else if n == k {
                LocalSubspaces::at(b, at).boundaries()
            } else if n == k + 1 {
                LocalSubspaces::at(b, at).im_del_delbar
            } else {
                Subspace::zero(b.dim(at))
            };
            (at, s)
        })
        .collect()
}

pub fn truncate(b: &Bicomplex, k: i32, side: Side) -> Result<Truncation, BicomplexError> {
    b.ensure_valid()?;
    Ok(truncate_unchecked(b, k, side))
}

pub(crate) fn truncate_unchecked(b: &Bicomplex, k: i32, side: Side) -> Truncation {
    match side {
        Side::Below => {
            let (t, inc) = sub_bicomplex(b, &below_subspaces(b, k))
                .expect("lower truncation is a sub-bicomplex");
            let map = BicomplexMap::from_blocks(t.clone(), b.clone(), inc)
                .expect("inclusion blocks have the right shapes");
            Truncation { bicomplex: t, map }
        }
        Side::Above => {
            let (t, proj) = quotient_bicomplex(b, &above_kernel_subspaces(b, k))
                .expect("upper truncation kernel is a sub-bicomplex");
            let map = BicomplexMap::from_blocks(b.clone(), t.clone(), proj)
                .expect("projection blocks have the right shapes");
            Truncation { bicomplex: t, map }
        }
    }
}

/// `H^k = τ≤k τ≥k`, concentrated in total degrees `k` and `k+1`.
pub fn cohomology_bicomplex(b: &Bicomplex, k: i32) -> Result<Bicomplex, BicomplexError> {
    b.ensure_valid()?;
    Ok(cohomology_bicomplex_unchecked(b, k))
}

pub(crate) fn cohomology_bicomplex_unchecked(b: &Bicomplex, k: i32) -> Bicomplex {
    let upper = truncate_unchecked(b, k, Side::Above).bicomplex;
    truncate_unchecked(&upper, k, Side::Below).bicomplex
}

/// `⊕_k H^k`.
pub fn minimal_model(b: &Bicomplex) -> Result<Bicomplex, BicomplexError> {
    b.ensure_valid()?;
    let Some((lo, hi)) = b.degree_range() else {
        return Ok(Bicomplex::zero());
    };
    let pieces: Vec<Bicomplex> = (lo - 1..=hi)
        .map(|k| cohomology_bicomplex_unchecked(b, k))
        .collect();
    Ok(direct_sum_all(&pieces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicomplex::{
        cohomology, direct_sum, dot, square, zigzag_shape, CohomologyKind, Family,
    };

    fn bd(p: i32, q: i32) -> Bidegree {
        Bidegree::new(p, q)
    }

    #[test]
    fn dot_truncations() {
        let d = dot(bd(0, 0));
        assert_eq!(truncate(&d, 0, Side::Below).unwrap().bicomplex, d);
        assert!(truncate(&d, 1, Side::Above).unwrap().bicomplex.is_zero());
        assert_eq!(truncate(&d, 0, Side::Above).unwrap().bicomplex, d);
    }

    #[test]
    fn square_lower_truncation_at_corner() {
        // ker ∂∂̄ = 0 at the corner; ∂x and ∂̄x are not closed under the other
        // differential, so nothing survives in degree 1 either.
        let t = truncate(&square(bd(0, 0)), 0, Side::Below).unwrap();
        assert!(t.bicomplex.is_zero());
        assert!(t.map.validate().is_empty());
        // One degree higher everything but the corner survives.
        let t = truncate(&square(bd(0, 0)), 1, Side::Below).unwrap();
        assert_eq!(t.bicomplex.total_dim(), 4);
        assert_eq!(truncate(&square(bd(0, 0)), 2, Side::Below).unwrap().bicomplex.total_dim(), 4);
        let u = truncate(&square(bd(0, 0)), 1, Side::Below).unwrap();
        assert!(u.map.validate().is_empty());
        assert!(!u.bicomplex.blocks(Differential::Del).is_empty());
    }

    #[test]
    fn cohomology_bicomplexes() {
        for k in -2..=3 {
            assert!(cohomology_bicomplex(&square(bd(0, 0)), k).unwrap().is_zero());
        }
        let d = dot(bd(0, 0));
        assert_eq!(cohomology_bicomplex(&d, 0).unwrap(), d);
        let a1 = zigzag_shape(Family::A, 1, bd(0, 0));
        let h = cohomology_bicomplex(&a1, 0).unwrap();
        assert_eq!(h.dims(), a1.dims());
        assert!(h.is_minimal());
    }

    #[test]
    fn minimal_models() {
        assert!(minimal_model(&square(bd(1, 0))).unwrap().is_zero());
        let d = dot(bd(0, 0));
        assert_eq!(minimal_model(&direct_sum(&square(bd(0, 0)), &d)).unwrap().dims(), d.dims());
        let z = direct_sum(
            &zigzag_shape(Family::B, 2, bd(0, 1)),
            &zigzag_shape(Family::A, -2, bd(0, 0)),
        );
        let m = minimal_model(&z).unwrap();
        assert_eq!(m.dims(), z.dims());
        assert!(m.is_minimal());
        for kind in CohomologyKind::ALL {
            assert_eq!(
                cohomology(&m, kind).unwrap().dims(),
                cohomology(&z, kind).unwrap().dims()
            );
        }
    }
}
