use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use num_traits::Zero;

use bicx::bicomplex::{
    all_cohomology, cohomology, connectivity, direct_sum, minimal_model, shift, tensor, truncate, Bicomplex,
    Bidegree, CohomologyKind, Side,
};
use bicx::decomp::{classify_zigzag, decompose, tensor_table, DecompError, Decomposition};
use bicx::exactq::RatMatrix;
use bicx::hirsch::{
    conjugate_extension, d_squared_defects, extensions_isomorphic, free_cbba, k_invariant, obstruction_extend,
    twisted_homotopy, validate_system, HirschError, HirschExtension, ObstructionResult, RelativeAutomorphism,
    TruncatedCbba, VBasis,
};
use bicx::morphism::{cone, is_quasi_iso, map_connectivity_both, reduced_cone, reduced_cone_violations};
use bicx::par::Exec;
use bicx::random::{random_automorphism, rng, scramble};

use crate::format;
use crate::report::{Report, Status};

#[derive(Debug, Parser)]
#[command(name = "bicx", version, about = "Bicomplexes over Q: cohomology, decomposition, Hirsch extensions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the report as JSON to this path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the differential identities of a .bcx file.
    Validate { file: PathBuf },
    /// Per-bidegree cohomology tables (all seven kinds by default).
    Cohomology {
        #[arg(long)]
        kind: Option<CohomologyKind>,
        file: PathBuf,
    },
    /// Total-degree truncation below or above `--degree`.
    Truncate {
        #[arg(long, allow_hyphen_values = true)]
        degree: i32,
        #[arg(long, default_value = "below")]
        side: Side,
        file: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// The square-free part.
    MinimalModel {
        file: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Shift by one total degree (`--degree 1` or `--degree -1`).
    Shift {
        #[arg(long, allow_hyphen_values = true)]
        degree: i32,
        file: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Direct sum.
    Sum {
        left: PathBuf,
        right: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Tensor product.
    Tensor {
        left: PathBuf,
        right: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// The largest k with vanishing Aeppli cohomology up to degree k.
    Connectivity { file: PathBuf },
    /// Squares and zig-zags with multiplicities. `--seed` also decomposes
    /// a randomly rebased copy and compares.
    Decompose {
        file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Name the zig-zag a .bcx file is isomorphic to.
    Classify { file: PathBuf },
    /// All pairwise zig-zag tensor products with parameters up to `--max`.
    TensorTable {
        #[arg(long, default_value_t = 4)]
        max: i32,
    },
    /// Mapping cone of a .bmap chain map.
    Cone {
        map: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Reduced cone of a .phi file.
    ReducedCone {
        file: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Chain-map identities, quasi-isomorphism and connectivity of a map.
    MapCheck { map: PathBuf },
    /// Build a truncated free algebra and check its differentials.
    CbbaValidate { file: PathBuf },
    /// Structure equations and d^2 = 0 for a .hext file.
    HirschValidate { file: PathBuf },
    /// Bott-Chern cohomology of the corner complex of the local system.
    TwistedHomotopy { file: PathBuf },
    /// The class obstructing triviality of an extension.
    KInvariant { file: PathBuf },
    /// Decide isomorphism of two extensions. With one file and `--seed`,
    /// compares it with a random conjugate of itself.
    ExtIso {
        first: PathBuf,
        second: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extend a .cmap algebra map across a .hext extension.
    Obstruct { map: PathBuf, extension: PathBuf },
}

impl Command {
    pub fn verb(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Cohomology { .. } => "cohomology",
            Command::Truncate { .. } => "truncate",
            Command::MinimalModel { .. } => "minimal-model",
            Command::Shift { .. } => "shift",
            Command::Sum { .. } => "sum",
            Command::Tensor { .. } => "tensor",
            Command::Connectivity { .. } => "connectivity",
            Command::Decompose { .. } => "decompose",
            Command::Classify { .. } => "classify",
            Command::TensorTable { .. } => "tensor-table",
            Command::Cone { .. } => "cone",
            Command::ReducedCone { .. } => "reduced-cone",
            Command::MapCheck { .. } => "map-check",
            Command::CbbaValidate { .. } => "cbba-validate",
            Command::HirschValidate { .. } => "hirsch-validate",
            Command::TwistedHomotopy { .. } => "twisted-homotopy",
            Command::KInvariant { .. } => "k-invariant",
            Command::ExtIso { .. } => "ext-iso",
            Command::Obstruct { .. } => "obstruct",
        }
    }
}

/// Exit status: 0 ok, 1 mathematical failure, 2 input error.
pub fn exit_code(result: &Result<Report>) -> u8 {
    match result {
        Ok(r) if r.status == Status::Ok => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}

/// Runs the command and writes `--out`. An `Err` is an input error.
pub fn execute(cli: &Cli) -> Result<Report> {
    let mut report = run(&cli.command)?;
    if let Some(out) = &cli.out {
        report.artifacts.push(out.display().to_string());
        fs::write(out, report.json()).with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(report)
}

pub fn run(command: &Command) -> Result<Report> {
    let mut r = Report::new(command.verb());
    match command {
        Command::Validate { file } => {
            let b = format::parse_bicomplex_unchecked(file)?;
            r.table("dims", b.dims(), b.bounding_box());
            let diags = b.validate();
            r.value("diagnostics", diags.iter().map(ToString::to_string).collect::<Vec<_>>());
            for d in &diags {
                r.line(format!("violated: {d}"));
            }
            if diags.is_empty() {
                r.line("valid bicomplex");
            } else {
                r.fail(format!("{} identities fail", diags.len()));
            }
        }
        Command::Cohomology { kind, file } => {
            let b = format::parse_bicomplex(file)?;
            let tables = match kind {
                Some(k) => BTreeMap::from([(*k, cohomology(&b, *k)?)]),
                None => all_cohomology(&b, Exec::default())?,
            };
            for (k, t) in tables {
                r.table(k.name(), &t.dims(), b.bounding_box());
            }
        }
        Command::Truncate {
            degree,
            side,
            file,
            emit,
        } => {
            let b = format::parse_bicomplex(file)?;
            let t = truncate(&b, *degree, *side)?;
            r.line(format!("truncation {side} total degree {degree}"));
            r.table("dims", t.bicomplex.dims(), b.bounding_box());
            emit_bicomplex(&mut r, &t.bicomplex, emit)?;
        }
        Command::MinimalModel { file, emit } => {
            let b = format::parse_bicomplex(file)?;
            let m = minimal_model(&b)?;
            r.table("dims", m.dims(), b.bounding_box());
            emit_bicomplex(&mut r, &m, emit)?;
        }
        Command::Shift { degree, file, emit } => {
            if degree.abs() != 1 {
                bail!("--degree must be 1 or -1 for shift");
            }
            let b = format::parse_bicomplex(file)?;
            let s = shift(&b, *degree)?;
            r.table("dims", s.dims(), None);
            emit_bicomplex(&mut r, &s, emit)?;
        }
        Command::Sum { left, right, emit } => {
            let s = direct_sum(&format::parse_bicomplex(left)?, &format::parse_bicomplex(right)?);
            r.table("dims", s.dims(), None);
            emit_bicomplex(&mut r, &s, emit)?;
        }
        Command::Tensor { left, right, emit } => {
            let t = tensor(&format::parse_bicomplex(left)?, &format::parse_bicomplex(right)?);
            r.table("dims", t.dims(), None);
            emit_bicomplex(&mut r, &t, emit)?;
        }
        Command::Connectivity { file } => {
            let b = format::parse_bicomplex(file)?;
            let c = connectivity(&b)?;
            r.line(format!("connectivity {c}"));
            r.value("connectivity", c.to_string());
            let aeppli = cohomology(&b, CohomologyKind::Aeppli)?;
            r.table(CohomologyKind::Aeppli.name(), &aeppli.dims(), b.bounding_box());
        }
        Command::Decompose { file, seed } => {
            let b = format::parse_bicomplex(file)?;
            let d = decompose(&b)?;
            manifest(&mut r, &d);
            if !d.verify(&b) {
                r.fail("basis change does not reassemble the input");
            }
            if let Some(seed) = seed {
                let s = scramble(&mut rng(*seed), &b);
                let again = decompose(&s)?;
                let same = again.squares == d.squares && again.zigzags == d.zigzags && again.verify(&s);
                r.value("scrambled_agrees", same);
                if same {
                    r.line(format!("rebased copy (seed {seed}) decomposes identically"));
                } else {
                    r.fail(format!("rebased copy (seed {seed}) decomposes differently"));
                }
            }
        }
        Command::Classify { file } => {
            let b = format::parse_bicomplex(file)?;
            match classify_zigzag(&b) {
                Ok(d) => {
                    r.line(format!("zig-zag {d}"));
                    r.value("zigzag", d.to_string());
                }
                Err(e @ (DecompError::NotIndecomposable(_) | DecompError::NotMinimal(_))) => r.fail(e.to_string()),
                Err(e) => return Err(e.into()),
            }
        }
        Command::TensorTable { max } => {
            if *max < 1 {
                bail!("--max must be at least 1");
            }
            let rows = tensor_table(*max, Exec::default())?;
            let mut bad = 0;
            let mut json = Vec::new();
            for row in &rows {
                let found: Vec<String> = row
                    .found
                    .iter()
                    .map(|(d, n)| if *n == 1 { d.to_string() } else { format!("{n} x {d}") })
                    .collect();
                let verdict = if row.ok() { "ok" } else { "MISMATCH" };
                r.line(format!(
                    "{} (x) {}: [{}] {}, {} squares  {verdict}",
                    row.left,
                    row.right,
                    row.clause,
                    if found.is_empty() { "0".to_string() } else { found.join(" + ") },
                    row.squares
                ));
                json.push(serde_json::json!({
                    "left": row.left.to_string(),
                    "right": row.right.to_string(),
                    "clause": row.clause,
                    "found": found,
                    "squares": row.squares,
                    "reassembled": row.reassembled,
                    "kunneth": row.kunneth,
                    "ok": row.ok(),
                }));
                bad += usize::from(!row.ok());
            }
            r.value("rows", json);
            r.line(format!("{} products, {bad} mismatches", rows.len()));
            if bad > 0 {
                r.fail(format!("{bad} products disagree with the expected decomposition"));
            }
        }
        Command::Cone { map, emit } => {
            let f = format::parse_map(map)?;
            f.ensure_valid().with_context(|| format!("{} is not a chain map", map.display()))?;
            let c = cone(&f)?;
            r.table("dims", c.cone.dims(), None);
            let a = cohomology(&c.cone, CohomologyKind::Aeppli)?;
            r.table(CohomologyKind::Aeppli.name(), &a.dims(), c.cone.bounding_box());
            emit_bicomplex(&mut r, &c.cone, emit)?;
        }
        Command::ReducedCone { file, emit } => {
            let (v, w, phis) = format::parse_phi_pair(file)?;
            let bad = reduced_cone_violations(&w, &v, &phis);
            if bad.is_empty() {
                let c = reduced_cone(&w, &v, &phis)?;
                r.table("dims", c.dims(), None);
                emit_bicomplex(&mut r, &c, emit)?;
            } else {
                for x in &bad {
                    r.line(format!("violated: {x}"));
                }
                r.value("violations", bad.iter().map(ToString::to_string).collect::<Vec<_>>());
                r.fail(format!("{} reduced-cone conditions fail", bad.len()));
            }
        }
        Command::MapCheck { map } => {
            let f = format::parse_map(map)?;
            let diags = f.validate();
            for d in &diags {
                r.line(format!("violated: {d}"));
            }
            if !diags.is_empty() {
                r.value("diagnostics", diags.iter().map(ToString::to_string).collect::<Vec<_>>());
                r.fail("not a chain map");
                return Ok(r);
            }
            let qi = is_quasi_iso(&f)?;
            let c = map_connectivity_both(&f)?;
            r.line(format!("chain map, quasi-isomorphism: {qi}"));
            r.line(format!("connectivity via cone {}, via cohomology {}", c.via_cone, c.via_cohomology));
            r.value("quasi_iso", qi);
            r.value("connectivity", c.via_cone.to_string());
            if c.via_cone != c.via_cohomology {
                r.fail("the two connectivity characterizations disagree");
            }
        }
        Command::CbbaValidate { file } => {
            let doc = format::read_cbba_doc(file)?;
            match free_cbba(&doc.generator, doc.truncation) {
                Ok(a) => describe_algebra(&mut r, &a),
                Err(e @ HirschError::DSquared { .. }) => r.fail(e.to_string()),
                Err(e) => return Err(anyhow::Error::new(e).context(format!("in {}", file.display()))),
            }
        }
        Command::HirschValidate { file } => {
            let e = format::parse_extension(file)?;
            let diags = e.diagnostics();
            let defects = d_squared_defects(&e);
            for d in &diags {
                r.line(format!("violated: {d}"));
            }
            for (kind, at) in &defects {
                r.line(format!("d^2 defect: {kind} at {at}"));
            }
            r.value("diagnostics", diags.iter().map(ToString::to_string).collect::<Vec<_>>());
            r.value("d_squared_zero", defects.is_empty());
            if diags.is_empty() {
                r.line("structure equations hold");
            } else {
                r.fail(format!("{} structure equations fail", diags.len()));
            }
        }
        Command::TwistedHomotopy { file } => {
            let e = format::parse_extension(file)?;
            ensure_system(&e, file)?;
            let t = twisted_homotopy(&e.base, &e.system)?;
            r.table("BC", &t.dims(), None);
        }
        Command::KInvariant { file } => {
            let e = valid_extension(file)?;
            let k = k_invariant(&e)?;
            let coords: Vec<String> = k.class.iter().map(ToString::to_string).collect();
            r.line(format!("k-invariant class [{}]", coords.join(", ")));
            r.line(if k.is_zero() { "zero: the extension is trivial" } else { "nonzero" });
            r.value("class", coords);
            r.value("zero", k.is_zero());
        }
        Command::ExtIso { first, second, seed } => {
            let e1 = valid_extension(first)?;
            let (e2, self_test) = match (second, seed) {
                (Some(path), _) => (valid_extension(path)?, false),
                (None, Some(seed)) => {
                    let mut g = rng(*seed);
                    let sigma = RelativeAutomorphism {
                        to_module: Default::default(),
                        ..random_automorphism(&mut g, &e1.base, e1.v(), false)
                    };
                    r.line(format!("comparing with a random conjugate (seed {seed})"));
                    (conjugate_extension(&e1, &sigma)?, true)
                }
                (None, None) => bail!("ext-iso needs a second extension or --seed"),
            };
            let iso = extensions_isomorphic(&e1, &e2)?;
            r.line(format!("isomorphic: {}", iso.isomorphic));
            r.line(&iso.reason);
            r.value("isomorphic", iso.isomorphic);
            if let Some(h) = &iso.witness {
                r.line("witness H:");
                let lines = map_lines(&e1, h);
                for l in &lines {
                    r.line(format!("  {l}"));
                }
                r.value("witness", lines);
            }
            if self_test && !iso.isomorphic {
                r.fail("a conjugate was reported non-isomorphic");
            }
        }
        Command::Obstruct { map, extension } => {
            let f = format::parse_cbba_map(map)?;
            let e = valid_extension(extension)?;
            match obstruction_extend(&f, &e)? {
                ObstructionResult::Extends { h } => {
                    let pushed = HirschExtension { base: f.target().clone(), ..e.clone() };
                    let lines = map_lines(&pushed, &h);
                    r.line("extends; H:");
                    for l in &lines {
                        r.line(format!("  {l}"));
                    }
                    r.value("extends", true);
                    r.value("h", lines);
                }
                ObstructionResult::Obstructed { class } => {
                    let coords: Vec<String> = class.iter().map(ToString::to_string).collect();
                    r.line(format!("obstructed, class [{}]", coords.join(", ")));
                    r.value("extends", false);
                    r.value("class", coords);
                }
            }
        }
    }
    Ok(r)
}

fn emit_bicomplex(r: &mut Report, b: &Bicomplex, emit: &Option<PathBuf>) -> Result<()> {
    if let Some(path) = emit {
        fs::write(path, format::write_bicomplex(b)).with_context(|| format!("cannot write {}", path.display()))?;
        r.artifacts.push(path.display().to_string());
    }
    Ok(())
}

fn manifest(r: &mut Report, d: &Decomposition) {
    let squares: usize = d.squares.values().sum();
    for (z, n) in &d.zigzags {
        r.line(format!("{n} x {z}"));
    }
    for (at, n) in &d.squares {
        r.line(format!("{n} x square@{at}"));
    }
    r.line(format!(
        "{} zig-zags, {squares} squares",
        d.zigzags.values().sum::<usize>()
    ));
    let zig: BTreeMap<String, usize> = d.zigzags.iter().map(|(z, &n)| (z.to_string(), n)).collect();
    let sq: BTreeMap<String, usize> = d.squares.iter().map(|(at, &n)| (at.to_string(), n)).collect();
    r.value("zigzags", zig);
    r.value("squares", sq);
}

fn describe_algebra(r: &mut Report, a: &TruncatedCbba) {
    r.table("dims", &a.dims(), None);
    for (at, words) in a.monomial_basis() {
        r.line(format!("{at}: {}", words.join(" ")));
    }
    r.line(format!("products cut off by the truncation: {}", a.cutoff_products()));
    r.value("cutoff_products", a.cutoff_products());
}

fn ensure_system(e: &HirschExtension, file: &Path) -> Result<()> {
    let bad = validate_system(&e.system, &e.base);
    if !bad.is_empty() {
        let text: Vec<String> = bad.iter().map(ToString::to_string).collect();
        bail!("{}: invalid local system: {}", file.display(), text.join("; "));
    }
    Ok(())
}

fn valid_extension(file: &Path) -> Result<HirschExtension> {
    let e = format::parse_extension(file)?;
    let bad = e.diagnostics();
    if !bad.is_empty() {
        let text: Vec<String> = bad.iter().map(ToString::to_string).collect();
        bail!("{}: invalid extension: {}", file.display(), text.join("; "));
    }
    Ok(e)
}

/// `H: V -> 𝒜` as one line per basis vector of `V`.
fn map_lines(e: &HirschExtension, h: &RatMatrix) -> Vec<String> {
    let vb = VBasis::new(e.v());
    let mut seen: BTreeMap<Bidegree, usize> = BTreeMap::new();
    (0..vb.dim())
        .map(|w| {
            let at = vb.degree(w);
            let i = seen.entry(at).or_insert(0);
            let col = h.column(w);
            let value = if col.iter().all(Zero::is_zero) { "0".to_string() } else { e.base.format_elem(&col) };
            let line = format!("v{at}#{i} -> {value}");
            *i += 1;
            line
        })
        .collect()
}
