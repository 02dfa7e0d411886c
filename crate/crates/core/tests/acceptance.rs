//! Acceptance criteria 1-8, one PASS/FAIL line each.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use bicx::bicomplex::{
    all_cohomology, cohomology, connectivity, hom, square, tensor, Bidegree, CohomologyKind,
    Connectivity, Differential, Family,
};
use bicx::decomp::{
    decompose, make_zigzag, split_squares, predicted_cohomology, rank_invariant_multiset, tensor_table, ZigZagDescriptor,
};
use bicx::hirsch::{
    conjugate_extension, d_squared_defects, extensions_isomorphic, k_invariant, obstruction_extend,
    projective_extension, push_forward, total_algebra, twisted_apply, twisted_hom, twisted_homotopy,
    untwisted_homotopy, wedge_power, CbbaMap, HirschExtension, LocalSystemPair, ObstructionResult,
    RelativeAutomorphism,
};
use bicx::morphism::{connectedness, cone_via_cokernel, is_quasi_iso, map_connectivity_both, triangle_checks, truncation_lemma_defects};
use bicx::par::Exec;
use bicx::random::{
    mutate_extension, random_automorphism, random_bicomplex, random_chain_map, random_coefficients,
    random_extension, random_known_sum, rng, scramble,
};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Runs `n` seeded cases in parallel; the first failure wins.
fn cases(n: usize, seed: u64, f: impl Fn(u64) -> Result<(), String> + Sync + Send) -> Result<(), String> {
    let results = Exec::default().map_range(n, |i| f(seed.wrapping_mul(1_000_003) + i as u64));
    results
        .into_iter()
        .enumerate()
        .find_map(|(i, r)| r.err().map(|e| format!("case {i}: {e}")))
        .map_or(Ok(()), Err)
}

fn bd(p: i32, q: i32) -> Bidegree {
    Bidegree::new(p, q)
}

fn criterion_1() -> Check {
    let mut checked = 0;
    for family in [Family::A, Family::B, Family::C] {
        let range: Vec<i32> = match family {
            Family::A => (-4..=4).collect(),
            _ => (1..=4).collect(),
        };
        for n in range {
            for anchor in [bd(0, 0), bd(2, -1)] {
                let d = ZigZagDescriptor::new(family, n, anchor).map_err(|e| e.to_string())?;
                let z = make_zigzag(&d).map_err(|e| e.to_string())?;
                let del = cohomology(&z, CohomologyKind::Del).unwrap().total_dim();
                let delbar = cohomology(&z, CohomologyKind::Delbar).unwrap().total_dim();
                let expected = match family {
                    Family::A => (1, 1),
                    Family::B => (2, 0),
                    Family::C => (0, 2),
                };
                ensure((del, delbar) == expected, || format!("{d}: Dolbeault ({del},{delbar}), expected {expected:?}"))?;
                checked += 1;
            }
        }
    }
    let tables = all_cohomology(&square(bd(0, 0)), Exec::default()).unwrap();
    ensure(tables.len() == 7 && tables.values().all(|t| t.is_zero()), || "square has nonzero cohomology".into())?;
    Ok(format!("{checked} zig-zags, square has all seven tables zero"))
}

fn criterion_2() -> Check {
    let rows = tensor_table(4, Exec::default()).map_err(|e| e.to_string())?;
    let mut clauses: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &rows {
        ensure(r.ok(), || format!("{} x {}: expected {:?}, found {:?}", r.left, r.right, r.expected, r.found_shapes()))?;
        *clauses.entry(r.clause).or_insert(0) += 1;
    }
    let zero_rows = rows.iter().filter(|r| r.left.family == Family::B && r.right.family == Family::C).count();
    let factor_two = rows.iter().filter(|r| r.expected.values().any(|&m| m == 2)).count();
    ensure(zero_rows == 16 && factor_two > 0, || "missing B x C or factor-2 rows".into())?;
    Ok(format!("{} rows over {} clauses ({zero_rows} B x C rows, {factor_two} factor-2 rows)", rows.len(), clauses.len()))
}

fn criterion_3() -> Check {
    cases(1000, 3, |seed| {
        let mut r = rng(seed);
        let known = random_known_sum(&mut r, 40, 4);
        let b = scramble(&mut r, &known.bicomplex);
        let d = decompose(&b).map_err(|e| e.to_string())?;
        ensure(d.squares == known.squares && d.zigzags == known.zigzags, || {
            format!("decomposed {:?} + {:?}, built {:?} + {:?}", d.zigzags, d.squares, known.zigzags, known.squares)
        })?;
        ensure(d.verify(&b), || "basis change does not reassemble the input".into())?;
        let minimal = split_squares(&b).map_err(|e| e.to_string())?.minimal;
        let oracle = rank_invariant_multiset(&minimal).map_err(|e| e.to_string())?;
        ensure(oracle == d.zigzags, || "rank invariant disagrees with the decomposition".into())?;
        let predicted = predicted_cohomology(&d).map_err(|e| e.to_string())?;
        let actual = all_cohomology(&b, Exec::Sequential).map_err(|e| e.to_string())?;
        for (kind, table) in actual {
            let p = predicted.get(&kind).cloned().unwrap_or_default();
            ensure(p == table.dims(), || format!("{kind} table differs from the predicted one"))?;
        }
        Ok(())
    })?;
    Ok("1000 scrambled sums recovered exactly".into())
}

fn criterion_4() -> Check {
    let counts = std::sync::atomic::AtomicUsize::new(0);
    cases(500, 4, |seed| {
        let mut r = rng(seed);
        let b = random_bicomplex(&mut r, 14);
        let Some((lo, hi)) = b.degree_range() else {
            return Ok(());
        };
        for k in (lo - 1)..=hi {
            let c = connectedness(&b, k).map_err(|e| e.to_string())?;
            ensure(c.agree(), || format!("k={k}: connectedness conditions disagree: {c:?}"))?;
            let t = triangle_checks(&b, k).map_err(|e| e.to_string())?;
            ensure(t.passed(), || format!("k={k}: triangle not distinguished: {t:?}"))?;
            let defects = truncation_lemma_defects(&b, k).map_err(|e| e.to_string())?;
            ensure(defects.is_empty(), || format!("k={k}: {}", defects.join("; ")))?;
            counts.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        }
        Ok(())
    })?;
    Ok(format!("500 bicomplexes, {} (V, k) pairs", counts.into_inner()))
}

fn criterion_5() -> Check {
    cases(200, 5, |seed| {
        let mut r = rng(seed);
        let v = random_bicomplex(&mut r, 10);
        let w = random_bicomplex(&mut r, 10);
        let f = random_chain_map(&mut r, &v, &w);
        let (_, comparison) = cone_via_cokernel(&f).map_err(|e| e.to_string())?;
        ensure(is_quasi_iso(&comparison).map_err(|e| e.to_string())?, || "cone comparison is not a quasi-isomorphism".into())?;
        let both = map_connectivity_both(&f).map_err(|e| e.to_string())?;
        ensure(both.via_cone == both.via_cohomology, || format!("map connectivity disagrees: {both:?}"))?;
        Ok(())
    })?;
    Ok("200 random maps".into())
}

fn criterion_6() -> Check {
    cases(500, 6, |seed| {
        let mut r = rng(seed);
        let v = random_bicomplex(&mut r, 8);
        let w = random_bicomplex(&mut r, 8);
        let (cv, cw) = (connectivity(&v).unwrap(), connectivity(&w).unwrap());
        let ct = connectivity(&tensor(&v, &w)).unwrap();
        let bound = match (cv, cw) {
            (Connectivity::Finite(a), Connectivity::Finite(b)) => Connectivity::Finite(a + b + 1),
            _ => Connectivity::Infinite,
        };
        ensure(ct >= bound, || format!("conn(V x W) = {ct} < {bound}"))?;
        Ok(())
    })?;
    cases(100, 66, |seed| {
        let mut r = rng(seed);
        let v = random_coefficients(&mut r, 4, 1);
        let low = v.degree_range().unwrap().0;
        let cv = connectivity(&v).unwrap();
        for n in 1..=3u32 {
            let wn = wedge_power(&v, n);
            if let Some((lw, _)) = wn.degree_range() {
                ensure(lw >= n as i32 * low, || format!("wedge^{n} has degree {lw} below {}", n as i32 * low))?;
            }
            if let Connectivity::Finite(c) = cv {
                let bound = Connectivity::Finite(n as i32 * (c + 1) - 1);
                let cw = connectivity(&wn).unwrap();
                ensure(cw >= bound, || format!("conn(wedge^{n} V) = {cw} < {bound}"))?;
            }
        }
        Ok(())
    })?;
    Ok("500 tensor pairs, 100 wedge powers".into())
}

/// `(a)`: structure equations hold iff `d² = 0` in the extension algebra.
fn check_equivalence(e: &HirschExtension) -> Result<bool, String> {
    let structure = e.diagnostics().is_empty();
    let dsquared = d_squared_defects(e).is_empty();
    ensure(structure == dsquared, || format!("structure equations {structure}, d^2 = 0 {dsquared}"))?;
    Ok(structure)
}

fn criterion_7() -> Check {
    let invalid_mutants = std::sync::atomic::AtomicUsize::new(0);
    let via_total = std::sync::atomic::AtomicUsize::new(0);
    cases(100, 7, |seed| {
        let mut r = rng(seed);
        let n = r.gen_range(4..=8);
        let e = random_extension(&mut r, 3, 3, n);
        ensure(e.v().total_dim() <= 3 && e.base.generators().len() <= 3, || "extension too large".into())?;

        // (a)
        ensure(check_equivalence(&e)?, || "random extension is invalid".into())?;
        for _ in 0..3 {
            if !check_equivalence(&mutate_extension(&mut r, &e))? {
                invalid_mutants.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            }
        }

        // (b)
        let k = k_invariant(&e).map_err(|x| x.to_string())?;
        let sigma = RelativeAutomorphism {
            to_module: Default::default(),
            ..random_automorphism(&mut r, &e.base, e.v(), false)
        };
        let conj = conjugate_extension(&e, &sigma).map_err(|x| x.to_string())?;
        ensure(check_equivalence(&conj)?, || "conjugate is invalid".into())?;
        ensure(k_invariant(&conj).map_err(|x| x.to_string())?.class == k.class, || "k-invariant changed".into())?;
        let iso = extensions_isomorphic(&e, &conj).map_err(|x| x.to_string())?;
        let h = iso.witness.ok_or("no witness for a conjugate")?;
        let back = conjugate_extension(&e, &RelativeAutomorphism::from_base(h)).map_err(|x| x.to_string())?;
        ensure(back.phi == conj.phi && back.phibar == conj.phibar, || "witness does not conjugate".into())?;
        let gauged = conjugate_extension(&e, &random_automorphism(&mut r, &e.base, e.v(), true)).map_err(|x| x.to_string())?;
        ensure(check_equivalence(&gauged)?, || "module gauge broke the extension".into())?;

        // (c) along the inclusion into the extension algebra itself
        if let Ok((_, incl)) = total_algebra(&e) {
            let ObstructionResult::Extends { h } = obstruction_extend(&incl, &e).map_err(|x| x.to_string())? else {
                return Err("extension algebra reported as obstructed".into());
            };
            let pushed = push_forward(&incl, &e).map_err(|x| x.to_string())?;
            for which in [Differential::Del, Differential::Delbar] {
                let dh = twisted_apply(&pushed.base, &pushed.system, which, &h, 0);
                ensure(&dh == pushed.phi_part(which), || format!("f phi != {which}_theta H"))?;
            }
            via_total.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        }
        // (c) an extension built to extend along the identity
        let h0 = random_automorphism(&mut r, &e.base, e.v(), false).to_base.unwrap();
        let built = HirschExtension::from_parts(
            e.base.clone(),
            e.system.clone(),
            twisted_apply(&e.base, &e.system, Differential::Del, &h0, 0),
            twisted_apply(&e.base, &e.system, Differential::Delbar, &h0, 0),
        );
        let ObstructionResult::Extends { h } = obstruction_extend(&CbbaMap::identity(&e.base), &built).map_err(|x| x.to_string())? else {
            return Err("coboundary extension reported as obstructed".into());
        };
        for which in [Differential::Del, Differential::Delbar] {
            let dh = twisted_apply(&e.base, &e.system, which, &h, 0);
            ensure(&dh == built.phi_part(which), || format!("phi != {which}_theta H"))?;
        }

        // (d)
        let plain = LocalSystemPair::untwisted(e.v().clone());
        let t = twisted_hom(&e.base, &plain).map_err(|x| x.to_string())?;
        ensure(t.hom == hom(e.v(), &e.base.bicomplex()), || "zero twisting differs from Hom".into())?;
        let tw = twisted_homotopy(&e.base, &plain).map_err(|x| x.to_string())?;
        let un = untwisted_homotopy(&e.base, e.v()).map_err(|x| x.to_string())?;
        ensure(tw.dims() == un.dims(), || "twisted homotopy with zero twisting differs".into())?;
        Ok(())
    })?;
    Ok(format!(
        "100 extensions, {} invalid mutants agreed, {} obstruction round trips through the extension algebra",
        invalid_mutants.into_inner(),
        via_total.into_inner()
    ))
}

fn criterion_8() -> Check {
    for n in 1..=3 {
        let e = projective_extension(n);
        ensure(e.diagnostics().is_empty() && d_squared_defects(&e).is_empty(), || format!("CP^{n} invalid"))?;
        let k = k_invariant(&e).map_err(|x| x.to_string())?;
        ensure(!k.is_zero(), || format!("CP^{n}: k-invariant vanishes"))?;
        let trivial = HirschExtension::trivial(e.base.clone(), e.system.clone()).map_err(|x| x.to_string())?;
        let iso = extensions_isomorphic(&e, &trivial).map_err(|x| x.to_string())?;
        ensure(!iso.isomorphic, || format!("CP^{n} isomorphic to the trivial extension"))?;
    }
    Ok("n = 1, 2, 3".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check, Option<Duration>); 8] = [
        ("cohomology signatures", criterion_1, Some(Duration::from_secs(1))),
        ("tensor theorem", criterion_2, Some(Duration::from_secs(30))),
        ("decomposition round trip", criterion_3, Some(Duration::from_secs(120))),
        ("truncation and triangles", criterion_4, Some(Duration::from_secs(120))),
        ("cone consistency", criterion_5, None),
        ("tensor connectivity", criterion_6, None),
        ("Hirsch classification", criterion_7, Some(Duration::from_secs(120))),
        ("projective space fixture", criterion_8, None),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let over = budget.is_some_and(|b| elapsed > b);
        let (status, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {:?} budget", budget.unwrap())),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {} ({name}): {status} [{:.2}s] {detail}", i + 1, elapsed.as_secs_f64());
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
