use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bicx::bicomplex::{square, Bicomplex, Bidegree};
use bicx_cli::format;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bicx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bicx")).args(args).output().expect("binary runs")
}

fn fx(name: &str) -> String {
    fixture(name).display().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn square_fixture_parses_to_the_square() {
    let b = format::parse_bicomplex(&fixture("square.bcx")).unwrap();
    assert_eq!(b, square(Bidegree::new(0, 0)));
    assert_eq!(b.dims().len(), 4);
}

#[test]
fn empty_file_is_the_zero_bicomplex() {
    let b = format::parse_bicomplex(&fixture("empty.bcx")).unwrap();
    assert_eq!(b, Bicomplex::zero());
}

#[test]
fn parse_errors_name_the_place() {
    let e = format!("{:#}", format::parse_bicomplex(&fixture("bad_shape.bcx")).unwrap_err());
    assert!(e.contains("(0,0)") && e.contains("shape"), "{e}");
    let e = format!("{:#}", format::parse_bicomplex(&fixture("bad_rational.bcx")).unwrap_err());
    assert!(e.contains("row 1, column 1") && e.contains("1/0"), "{e}");
    let e = format!("{:#}", format::parse_bicomplex(&fixture("overlap.bcx")).unwrap_err());
    assert!(e.contains("declared twice"), "{e}");
    let e = format!("{:#}", format::parse_bicomplex(&fixture("not_bicomplex.bcx")).unwrap_err());
    assert!(e.contains("not a bicomplex"), "{e}");

    let dir = tempfile::tempdir().unwrap();
    let typo = dir.path().join("typo.bcx");
    fs::write(&typo, "version = 1\nkind = \"bicomplex\"\n[[space]]\np = 0\nq = 0\ndimm = 1\n").unwrap();
    let e = format!("{:#}", format::parse_bicomplex(&typo).unwrap_err());
    assert!(e.contains("line 6") && e.contains("dimm"), "{e}");
}

#[test]
fn every_fixture_round_trips() {
    for name in ["square.bcx", "a1.bcx", "b2.bcx", "scrambled.bcx", "empty.bcx", "a1_at_11.bcx"] {
        let b = format::parse_bicomplex(&fixture(name)).unwrap();
        let again = format::parse_bicomplex_str(&format::write_bicomplex(&b), Path::new(name)).unwrap();
        assert_eq!(again, b, "{name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let tmp = |name: &str, text: String| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    };
    for name in ["id_a1.bmap", "zero_a1.bmap"] {
        let f = format::parse_map(&fixture(name)).unwrap();
        assert_eq!(format::parse_map(&tmp(name, format::write_map(&f))).unwrap(), f, "{name}");
    }
    for name in ["cp1.cbba", "cp2_base.cbba"] {
        let a = format::parse_cbba(&fixture(name)).unwrap();
        let b = format::parse_cbba(&tmp(name, format::write_cbba(&a))).unwrap();
        assert_eq!((a.specs(), a.truncation(), a.dims()), (b.specs(), b.truncation(), b.dims()), "{name}");
    }
    for name in ["cp2_identity.cmap", "cp2_into_total.cmap"] {
        let f = format::parse_cbba_map(&fixture(name)).unwrap();
        let g = format::parse_cbba_map(&tmp(name, format::write_cbba_map(&f))).unwrap();
        assert_eq!(f.matrix(), g.matrix(), "{name}");
        assert_eq!(f.target().specs(), g.target().specs(), "{name}");
    }
    for name in ["cp1.hext", "cp2.hext", "cp2_trivial.hext", "twisted.hext", "twisted_broken.hext"] {
        let e = format::parse_extension(&fixture(name)).unwrap();
        let f = format::parse_extension(&tmp(name, format::write_extension(&e))).unwrap();
        assert_eq!(e.base.specs(), f.base.specs(), "{name}");
        assert_eq!(e.system, f.system, "{name}");
        assert_eq!((&e.phi, &e.phibar), (&f.phi, &f.phibar), "{name}");
    }
}

#[test]
fn aeppli_of_the_square_vanishes() {
    let o = bicx(&["cohomology", "--kind", "A", &fx("square.bcx")]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "A (total 0)\n  q\\p  0  1\n    1  .  .\n    0  .  .\n");
}

#[test]
fn tensor_table_up_to_three() {
    let o = bicx(&["tensor-table", "--max", "3"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains(" 0 mismatches"));
}

#[test]
fn decompose_lists_the_summands() {
    let o = bicx(&["decompose", &fx("scrambled.bcx"), "--seed", "9"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    for line in ["1 x A_1@(0,0)", "1 x B_2@(1,0)", "1 x square@(0,1)", "2 zig-zags, 1 squares"] {
        assert!(out.contains(line), "{out}");
    }
}

#[test]
fn exit_codes() {
    let cases: &[(&[&str], i32)] = &[
        (&["validate", "square.bcx"], 0),
        (&["validate", "not_bicomplex.bcx"], 1),
        (&["validate", "bad_shape.bcx"], 2),
        (&["validate", "missing.bcx"], 2),
        (&["cohomology", "not_bicomplex.bcx"], 2),
        (&["truncate", "--degree", "1", "--side", "above", "a1.bcx"], 0),
        (&["minimal-model", "scrambled.bcx"], 0),
        (&["shift", "--degree", "-1", "a1.bcx"], 0),
        (&["shift", "--degree", "2", "a1.bcx"], 2),
        (&["sum", "a1.bcx", "b2.bcx"], 0),
        (&["tensor", "a1.bcx", "b2.bcx"], 0),
        (&["connectivity", "b2.bcx"], 0),
        (&["classify", "b2.bcx"], 0),
        (&["classify", "scrambled.bcx"], 1),
        (&["cone", "id_a1.bmap"], 0),
        (&["map-check", "id_a1.bmap"], 0),
        (&["cbba-validate", "cp2_base.cbba"], 0),
        (&["cbba-validate", "dsquared.cbba"], 1),
        (&["hirsch-validate", "cp1.hext"], 0),
        (&["hirsch-validate", "twisted_broken.hext"], 1),
        (&["twisted-homotopy", "twisted.hext"], 0),
        (&["twisted-homotopy", "twisted_broken.hext"], 2),
        (&["k-invariant", "cp1.hext"], 0),
        (&["k-invariant", "twisted_broken.hext"], 2),
        (&["ext-iso", "cp2.hext", "cp2_trivial.hext"], 0),
        (&["ext-iso", "cp2.hext"], 2),
        (&["obstruct", "cp2_identity.cmap", "cp2.hext"], 0),
    ];
    for (args, want) in cases {
        let args: Vec<String> = args
            .iter()
            .map(|a| if a.contains('.') { fx(a) } else { a.to_string() })
            .collect();
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = bicx(&refs);
        assert_eq!(code(&o), *want, "{args:?}\n{}{}", stdout(&o), stderr(&o));
    }
}

#[test]
fn unknown_verb_is_rejected_before_reading() {
    let o = bicx(&["frobnicate", "/nonexistent/input.bcx"]);
    assert_eq!(code(&o), 2);
    assert!(!stderr(&o).contains("cannot read"));
    assert!(stderr(&o).contains("frobnicate"));
}

#[test]
fn projective_plane_is_a_nontrivial_extension() {
    let o = bicx(&["k-invariant", &fx("cp1.hext")]);
    assert!(stdout(&o).contains("nonzero"));
    let o = bicx(&["ext-iso", &fx("cp2.hext"), &fx("cp2_trivial.hext")]);
    assert!(stdout(&o).contains("isomorphic: false"));
    let o = bicx(&["ext-iso", &fx("cp2.hext"), "--seed", "4"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("isomorphic: true"));
    let o = bicx(&["obstruct", &fx("cp2_identity.cmap"), &fx("cp2.hext")]);
    assert!(stdout(&o).contains("obstructed"));
    let o = bicx(&["obstruct", &fx("cp2_into_total.cmap"), &fx("cp2.hext")]);
    assert!(stdout(&o).contains("extends"));
}

#[test]
fn reports_are_deterministic_and_mirrored_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let run = |k: usize| {
        let json = dir.path().join(format!("r{k}.json"));
        let emit = dir.path().join(format!("m{k}.bcx"));
        let o = bicx(&[
            "minimal-model",
            &fx("scrambled.bcx"),
            "--emit",
            emit.to_str().unwrap(),
            "--out",
            json.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        (stdout(&o), fs::read_to_string(&json).unwrap(), fs::read_to_string(&emit).unwrap())
    };
    let (out1, json1, bcx1) = run(1);
    let (out2, json2, bcx2) = run(2);
    assert_eq!(out1, out2);
    assert_eq!(bcx1, bcx2);
    assert_eq!(json1.replace("r1.json", "").replace("m1.bcx", ""), json2.replace("r2.json", "").replace("m2.bcx", ""));

    let v: serde_json::Value = serde_json::from_str(&json1).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["verb"], "minimal-model");
    let cells = v["tables"]["dims"].as_array().unwrap();
    let total: u64 = cells.iter().map(|c| c["dim"].as_u64().unwrap()).sum();
    assert_eq!(total, 7);

    let o = bicx(&["cohomology", &fx("a1.bcx"), "--out", dir.path().join("c.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(v["tables"].as_object().unwrap().len(), 7);
    assert_eq!(v["tables"]["BC"].as_array().unwrap().len(), 2);
}
