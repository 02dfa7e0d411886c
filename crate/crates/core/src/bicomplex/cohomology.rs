use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Bicomplex, BicomplexError, Bidegree};
use crate::exactq::{image, kernel, quotient_present, sum, intersection, QuotientPresentation, Subspace};
use crate::par::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CohomologyKind {
    BottChern,
    BottChernReduced,
    Dot,
    Aeppli,
    AeppliReduced,
    Del,
    Delbar,
}

impl CohomologyKind {
    pub const ALL: [CohomologyKind; 7] = [
        CohomologyKind::BottChern,
        CohomologyKind::BottChernReduced,
        CohomologyKind::Dot,
        CohomologyKind::Aeppli,
        CohomologyKind::AeppliReduced,
        CohomologyKind::Del,
        CohomologyKind::Delbar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CohomologyKind::BottChern => "BC",
            CohomologyKind::BottChernReduced => "BC_red",
            CohomologyKind::Dot => "dot",
            CohomologyKind::Aeppli => "A",
            CohomologyKind::AeppliReduced => "A_red",
            CohomologyKind::Del => "Dol_del",
            CohomologyKind::Delbar => "Dol_delbar",
        }
    }
}

impl fmt::Display for CohomologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CohomologyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        CohomologyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!(
                    "unknown cohomology kind `{s}` (expected one of {})",
                    CohomologyKind::ALL.map(|k| k.name()).join(", ")
                )
            })
    }
}

/// The kernels and images meeting at one bidegree.
#[derive(Clone, Debug)]
pub struct LocalSubspaces {
    pub ker_del: Subspace,
    pub ker_delbar: Subspace,
    pub ker_del_delbar: Subspace,
    pub im_del: Subspace,
    pub im_delbar: Subspace,
    pub im_del_delbar: Subspace,
}

impl LocalSubspaces {
    pub fn at(b: &Bicomplex, at: Bidegree) -> Self {
        let one_one = Bidegree::new(1, 1);
        LocalSubspaces {
            ker_del: kernel(&b.del_block(at)),
            ker_delbar: kernel(&b.delbar_block(at)),
            ker_del_delbar: kernel(&b.del_delbar_block(at)),
            im_del: image(&b.del_block(at - Bidegree::DEL)),
            im_delbar: image(&b.delbar_block(at - Bidegree::DELBAR)),
            im_del_delbar: image(&b.del_delbar_block(at - one_one)),
        }
    }

    /// `ker ∂ ∩ ker ∂̄`
    pub fn cycles(&self) -> Subspace {
        intersection(&self.ker_del, &self.ker_delbar)
    }

    /// `im ∂ + im ∂̄`
    pub fn boundaries(&self) -> Subspace {
        sum(&self.im_del, &self.im_delbar)
    }

    pub fn quotient(&self, kind: CohomologyKind) -> QuotientPresentation {
        let (num, den) = match kind {
            CohomologyKind::BottChern => (self.cycles(), self.im_del_delbar.clone()),
            CohomologyKind::BottChernReduced => (
                intersection(&self.cycles(), &self.boundaries()),
                self.im_del_delbar.clone(),
            ),
            CohomologyKind::Dot => {
                let z = self.cycles();
                let red = intersection(&z, &self.boundaries());
                (z, red)
            }
            CohomologyKind::Aeppli => (self.ker_del_delbar.clone(), self.boundaries()),
            CohomologyKind::AeppliReduced => (
                self.ker_del_delbar.clone(),
                sum(&self.cycles(), &self.boundaries()),
            ),
            CohomologyKind::Del => (self.ker_del.clone(), self.im_del.clone()),
            CohomologyKind::Delbar => (self.ker_delbar.clone(), self.im_delbar.clone()),
        };
        quotient_present(&num, &den).expect("cohomology denominators lie in their numerators")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CohomologyTable {
    pub kind: CohomologyKind,
    pub entries: BTreeMap<Bidegree, QuotientPresentation>,
}

impl CohomologyTable {
    pub fn dim_at(&self, b: Bidegree) -> usize {
        self.entries.get(&b).map_or(0, QuotientPresentation::dim)
    }

    /// Nonzero dimensions only.
    pub fn dims(&self) -> BTreeMap<Bidegree, usize> {
        self.entries
            .iter()
            .filter(|(_, q)| q.dim() > 0)
            .map(|(&b, q)| (b, q.dim()))
            .collect()
    }

    pub fn total_dim(&self) -> usize {
        self.entries.values().map(QuotientPresentation::dim).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.total_dim() == 0
    }

    /// Dimension in total degree `k`.
    pub fn degree_dim(&self, k: i32) -> usize {
        self.entries
            .iter()
            .filter(|(b, _)| b.total() == k)
            .map(|(_, q)| q.dim())
            .sum()
    }
}

pub fn cohomology(b: &Bicomplex, kind: CohomologyKind) -> Result<CohomologyTable, BicomplexError> {
    cohomology_with(b, kind, Exec::default())
}

pub fn cohomology_with(
    b: &Bicomplex,
    kind: CohomologyKind,
    exec: Exec,
) -> Result<CohomologyTable, BicomplexError> {
    b.ensure_valid()?;
    Ok(cohomology_unchecked(b, kind, exec))
}

pub(crate) fn cohomology_unchecked(b: &Bicomplex, kind: CohomologyKind, exec: Exec) -> CohomologyTable {
    let support: Vec<Bidegree> = b.support().collect();
    let entries = exec.map(support, |at| (at, LocalSubspaces::at(b, at).quotient(kind)));
    CohomologyTable {
        kind,
        entries: entries.into_iter().collect(),
    }
}

/// All seven tables, sharing the per-bidegree kernel and image computations.
pub fn all_cohomology(
    b: &Bicomplex,
    exec: Exec,
) -> Result<BTreeMap<CohomologyKind, CohomologyTable>, BicomplexError> {
    b.ensure_valid()?;
    let support: Vec<Bidegree> = b.support().collect();
    let per_point = exec.map(support, |at| {
        let local = LocalSubspaces::at(b, at);
        let qs: Vec<_> = CohomologyKind::ALL.iter().map(|&k| local.quotient(k)).collect();
        (at, qs)
    });
    let mut out: BTreeMap<CohomologyKind, CohomologyTable> = CohomologyKind::ALL
        .iter()
        .map(|&kind| {
            (
                kind,
                CohomologyTable {
                    kind,
                    entries: BTreeMap::new(),
                },
            )
        })
        .collect();
    for (at, qs) in per_point {
        for (kind, q) in CohomologyKind::ALL.iter().zip(qs) {
            out.get_mut(kind).unwrap().entries.insert(at, q);
        }
    }
    Ok(out)
}

/// Connectivity of a bicomplex or a map; `Infinite` means all Aeppli
/// cohomology vanishes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Connectivity {
    Finite(i32),
    Infinite,
}

impl Connectivity {
    pub fn plus(self, n: i32) -> Connectivity {
        match self {
            Connectivity::Finite(k) => Connectivity::Finite(k + n),
            Connectivity::Infinite => Connectivity::Infinite,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Connectivity::Infinite
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Connectivity::Finite(k) => write!(f, "{k}"),
            Connectivity::Infinite => f.write_str("+inf"),
        }
    }
}

/// The largest `k` with `H_A^{≤k} = 0`.
pub fn connectivity(b: &Bicomplex) -> Result<Connectivity, BicomplexError> {
    b.ensure_valid()?;
    Ok(connectivity_unchecked(b, Exec::default()))
}

pub(crate) fn connectivity_unchecked(b: &Bicomplex, exec: Exec) -> Connectivity {
    let a = cohomology_unchecked(b, CohomologyKind::Aeppli, exec);
    a.dims()
        .keys()
        .map(|b| b.total())
        .min()
        .map_or(Connectivity::Infinite, |k| Connectivity::Finite(k - 1))
}

pub fn is_contractible(b: &Bicomplex) -> Result<bool, BicomplexError> {
    b.ensure_valid()?;
    Ok(is_contractible_unchecked(b, Exec::default()))
}

pub(crate) fn is_contractible_unchecked(b: &Bicomplex, exec: Exec) -> bool {
    cohomology_unchecked(b, CohomologyKind::BottChern, exec).is_zero()
        && cohomology_unchecked(b, CohomologyKind::Aeppli, exec).is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicomplex::{direct_sum, dot, square, zigzag_shape, Family};

    fn bd(p: i32, q: i32) -> Bidegree {
        Bidegree::new(p, q)
    }

    #[test]
    fn square_has_no_cohomology() {
        let s = square(bd(0, 0));
        for (_, t) in all_cohomology(&s, Exec::Sequential).unwrap() {
            assert!(t.is_zero(), "{}", t.kind);
        }
        assert!(is_contractible(&s).unwrap());
        assert_eq!(connectivity(&s).unwrap(), Connectivity::Infinite);
    }

    #[test]
    fn dot_cohomology() {
        let d = dot(bd(0, 0));
        let all = all_cohomology(&d, Exec::Sequential).unwrap();
        for kind in [
            CohomologyKind::BottChern,
            CohomologyKind::Aeppli,
            CohomologyKind::Dot,
            CohomologyKind::Del,
            CohomologyKind::Delbar,
        ] {
            assert_eq!(all[&kind].dims(), BTreeMap::from([(bd(0, 0), 1)]), "{kind}");
        }
        assert!(all[&CohomologyKind::BottChernReduced].is_zero());
        assert!(all[&CohomologyKind::AeppliReduced].is_zero());
        assert!(!is_contractible(&d).unwrap());
        assert_eq!(connectivity(&d).unwrap(), Connectivity::Finite(-1));
        assert_eq!(connectivity(&dot(bd(1, 2))).unwrap(), Connectivity::Finite(2));
    }

    #[test]
    fn vertical_pair_dolbeault() {
        let b1 = zigzag_shape(Family::B, 1, bd(0, 0));
        assert_eq!(cohomology(&b1, CohomologyKind::Del).unwrap().total_dim(), 2);
        assert_eq!(cohomology(&b1, CohomologyKind::Delbar).unwrap().total_dim(), 0);
    }

    #[test]
    fn reduced_parts_add_up() {
        let b = direct_sum(
            &zigzag_shape(Family::A, 2, bd(0, 0)),
            &direct_sum(&zigzag_shape(Family::C, 2, bd(1, 0)), &square(bd(0, 0))),
        );
        let all = all_cohomology(&b, Exec::Parallel).unwrap();
        for at in b.support() {
            let d = |k| all[&k].dim_at(at);
            assert_eq!(
                d(CohomologyKind::BottChern),
                d(CohomologyKind::BottChernReduced) + d(CohomologyKind::Dot)
            );
            assert_eq!(
                d(CohomologyKind::Aeppli),
                d(CohomologyKind::AeppliReduced) + d(CohomologyKind::Dot)
            );
        }
    }

    #[test]
    fn kind_names_parse() {
        for k in CohomologyKind::ALL {
            assert_eq!(k.name().parse::<CohomologyKind>().unwrap(), k);
        }
        assert!("Hodge".parse::<CohomologyKind>().is_err());
    }
}
