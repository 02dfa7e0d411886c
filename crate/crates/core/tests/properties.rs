use std::collections::BTreeMap;

use proptest::prelude::*;

use bicx::bicomplex::{
    all_cohomology, connectivity, minimal_model, shift_up_shape, tensor, Bidegree, CohomologyKind,
    Connectivity,
};
use bicx::decomp::decompose;
use bicx::exactq::{image, kernel, quotient_present, sum_and_intersection, RatMatrix, Subspace};
use bicx::hirsch::{
    conjugate_extension, d_squared_defects, k_invariant, twisted_hom, LocalSystemPair, RelativeAutomorphism,
};
use bicx::morphism::{cone, exactness_defects, map_connectivity_both};
use bicx::par::Exec;
use bicx::random::{
    random_automorphism, random_bicomplex, random_chain_map, random_coefficients, random_extension,
    random_known_sum, rng, scramble, small,
};
use rand::Rng;

fn random_matrix(seed: u64) -> RatMatrix {
    let mut r = rng(seed);
    let (m, n) = (r.gen_range(0..7), r.gen_range(0..7));
    let mut a = RatMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            if r.gen_bool(0.5) {
                a[(i, j)] = small(&mut r, 3);
            }
        }
    }
    a
}

fn dims(t: &bicx::bicomplex::CohomologyTable) -> BTreeMap<Bidegree, usize> {
    t.dims()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_nullity(seed in any::<u64>()) {
        let a = random_matrix(seed);
        prop_assert_eq!(kernel(&a).dim() + image(&a).dim(), a.cols());
        prop_assert!(a.mul(kernel(&a).basis()).is_zero());
    }

    #[test]
    fn sum_and_intersection_dimensions(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = random_matrix(s1);
        let mut b = random_matrix(s2);
        if b.rows() != a.rows() {
            b = RatMatrix::zeros(a.rows(), 2);
        }
        let (u, w) = (Subspace::span(&a), Subspace::span(&b));
        let (s, i) = sum_and_intersection(&u, &w).unwrap();
        prop_assert_eq!(s.dim() + i.dim(), u.dim() + w.dim());
        prop_assert!(u.contains(&i) && w.contains(&i) && s.contains(&u) && s.contains(&w));
    }

    #[test]
    fn quotient_projection_and_section(seed in any::<u64>()) {
        let a = random_matrix(seed);
        let num = Subspace::span(&a);
        let den = Subspace::span(&a.select_columns(&(0..a.cols() / 2).collect::<Vec<_>>()));
        let q = quotient_present(&num, &den).unwrap();
        prop_assert_eq!(q.projection().mul(q.section()), RatMatrix::identity(q.dim()));
        prop_assert!(q.projection().mul(den.basis()).is_zero());
        prop_assert_eq!(q.dim(), num.dim() - den.dim());
    }

    #[test]
    fn reduced_cohomology_splits_off_the_dot_part(seed in any::<u64>()) {
        let b = random_bicomplex(&mut rng(seed), 14);
        let t = all_cohomology(&b, Exec::Sequential).unwrap();
        let at = |k: CohomologyKind, x: Bidegree| t[&k].dim_at(x);
        for x in b.support() {
            prop_assert_eq!(at(CohomologyKind::BottChern, x), at(CohomologyKind::BottChernReduced, x) + at(CohomologyKind::Dot, x));
            prop_assert_eq!(at(CohomologyKind::Aeppli, x), at(CohomologyKind::AeppliReduced, x) + at(CohomologyKind::Dot, x));
        }
    }

    #[test]
    fn cohomology_ignores_basis_changes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = random_bicomplex(&mut r, 14);
        let s = scramble(&mut r, &b);
        let x = all_cohomology(&b, Exec::Sequential).unwrap();
        let y = all_cohomology(&s, Exec::Parallel).unwrap();
        for k in CohomologyKind::ALL {
            prop_assert_eq!(dims(&x[&k]), dims(&y[&k]));
        }
    }

    #[test]
    fn minimal_model_is_idempotent_and_keeps_cohomology(seed in any::<u64>()) {
        let b = random_bicomplex(&mut rng(seed), 16);
        let m = minimal_model(&b).unwrap();
        prop_assert!(m.is_minimal());
        let mm = minimal_model(&m).unwrap();
        prop_assert_eq!(mm.dims(), m.dims());
        let (x, y) = (all_cohomology(&b, Exec::Sequential).unwrap(), all_cohomology(&m, Exec::Sequential).unwrap());
        for k in CohomologyKind::ALL {
            prop_assert_eq!(dims(&x[&k]), dims(&y[&k]));
        }
    }

    #[test]
    fn decomposition_reassembles_and_is_basis_independent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let known = random_known_sum(&mut r, 20, 3);
        let b = scramble(&mut r, &known.bicomplex);
        let d = decompose(&b).unwrap();
        prop_assert!(d.verify(&b));
        prop_assert_eq!(&d.zigzags, &known.zigzags);
        let again = decompose(&scramble(&mut r, &b)).unwrap();
        prop_assert_eq!(&again.zigzags, &d.zigzags);
        prop_assert_eq!(&again.squares, &d.squares);
        let m = decompose(&minimal_model(&b).unwrap()).unwrap();
        prop_assert_eq!(&m.zigzags, &d.zigzags);
        prop_assert!(m.squares.is_empty());
    }

    #[test]
    fn tensor_connectivity_adds(s1 in any::<u64>(), s2 in any::<u64>()) {
        let v = random_coefficients(&mut rng(s1), 5, 0);
        let w = random_coefficients(&mut rng(s2), 5, 0);
        let (cv, cw) = (connectivity(&v).unwrap(), connectivity(&w).unwrap());
        let cvw = connectivity(&tensor(&v, &w)).unwrap();
        let bound = match (cv, cw) {
            (Connectivity::Finite(a), Connectivity::Finite(b)) => Connectivity::Finite(a + b + 1),
            _ => Connectivity::Infinite,
        };
        prop_assert!(cvw >= bound, "{} < {}", cvw, bound);
    }

    #[test]
    fn cone_dimensions_and_exactness(seed in any::<u64>()) {
        let mut r = rng(seed);
        let v = random_bicomplex(&mut r, 8);
        let w = random_bicomplex(&mut r, 8);
        let f = random_chain_map(&mut r, &v, &w);
        let c = cone(&f).unwrap();
        let shifted = tensor(&shift_up_shape(), &v);
        let mut support: Vec<Bidegree> = c.cone.support().chain(w.support()).chain(shifted.support()).collect();
        support.dedup();
        for x in support {
            prop_assert_eq!(c.cone.dim(x), w.dim(x) + shifted.dim(x));
        }
        prop_assert!(exactness_defects(&f, CohomologyKind::Aeppli).unwrap().is_empty());
        prop_assert!(exactness_defects(&f, CohomologyKind::BottChern).unwrap().is_empty());
        let both = map_connectivity_both(&f).unwrap();
        prop_assert_eq!(both.via_cone, both.via_cohomology);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn extensions_satisfy_their_equations_and_conjugation_keeps_the_class(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(4..=8);
        let e = random_extension(&mut r, 3, 3, n);
        prop_assert!(e.diagnostics().is_empty());
        prop_assert!(d_squared_defects(&e).is_empty());
        let k = k_invariant(&e).unwrap();
        let sigma = RelativeAutomorphism {
            to_module: Default::default(),
            ..random_automorphism(&mut r, &e.base, e.v(), false)
        };
        let c = conjugate_extension(&e, &sigma).unwrap();
        prop_assert!(c.diagnostics().is_empty());
        prop_assert_eq!(k_invariant(&c).unwrap().class, k.class);
    }

    #[test]
    fn zero_twisting_is_plain_hom(seed in any::<u64>()) {
        let mut r = rng(seed);
        let e = random_extension(&mut r, 3, 3, 6);
        let plain = LocalSystemPair::untwisted(e.v().clone());
        let t = twisted_hom(&e.base, &plain).unwrap();
        prop_assert_eq!(t.hom, bicx::bicomplex::hom(e.v(), &e.base.bicomplex()));
    }
}
