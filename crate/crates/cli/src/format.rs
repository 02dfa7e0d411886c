//! TOML file formats. Every file carries `version = 1` and a `kind` tag.
//! Rationals are written as `"p/q"` or `"p"` strings; bare integers are
//! accepted on input. Referenced files are resolved relative to the file
//! that names them.
//!
//! | extension | kind                |
//! |-----------|---------------------|
//! | `.bcx`    | `bicomplex`         |
//! | `.bmap`   | `map`               |
//! | `.phi`    | `phi-pair`          |
//! | `.cbba`   | `cbba`              |
//! | `.cmap`   | `cbba-map`          |
//! | `.hext`   | `hirsch-extension`  |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use bicx::bicomplex::{Bicomplex, Bidegree, Differential};
use bicx::exactq::{parse_rational, RatMatrix, Rational};
use bicx::hirsch::{CbbaMap, GeneratorSpec, HirschExtension, LocalSystemPair, TruncatedCbba, Twisting, VBasis};
use bicx::morphism::{BicomplexMap, PhiPair};

pub const VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Text(String),
}

impl Scalar {
    fn to_rational(&self) -> Result<Rational> {
        match self {
            Scalar::Int(n) => Ok(Rational::from_integer((*n).into())),
            Scalar::Text(s) => parse_rational(s).map_err(|e| anyhow!("{e}")),
        }
    }

    fn from_rational(r: &Rational) -> Self {
        Scalar::Text(r.to_string())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub p: i32,
    pub q: i32,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BlockDoc {
    pub p: i32,
    pub q: i32,
    pub rows: Vec<Vec<Scalar>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BicomplexDoc {
    #[serde(default = "version")]
    pub version: u32,
    #[serde(default = "bicomplex_kind")]
    pub kind: String,
    #[serde(default)]
    pub space: Vec<SpaceDoc>,
    #[serde(default)]
    pub del: Vec<BlockDoc>,
    #[serde(default)]
    pub delbar: Vec<BlockDoc>,
}

fn version() -> u32 {
    VERSION
}

fn bicomplex_kind() -> String {
    "bicomplex".into()
}

/// A bicomplex given by path or inline.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum BicomplexRef {
    Path(String),
    Inline(BicomplexDoc),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MapDoc {
    pub version: u32,
    pub kind: String,
    pub source: BicomplexRef,
    pub target: BicomplexRef,
    #[serde(default)]
    pub block: Vec<BlockDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PhiPairDoc {
    pub version: u32,
    pub kind: String,
    /// `V`, the source of `φ` and `φ̄`.
    pub source: BicomplexRef,
    /// `W`.
    pub target: BicomplexRef,
    #[serde(default)]
    pub phi: Vec<BlockDoc>,
    #[serde(default)]
    pub phibar: Vec<BlockDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CbbaDoc {
    pub version: u32,
    pub kind: String,
    pub truncation: i32,
    #[serde(default)]
    pub generator: Vec<GeneratorSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CbbaRef {
    Path(String),
    Inline(CbbaDoc),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CbbaMapDoc {
    pub version: u32,
    pub kind: String,
    pub source: CbbaRef,
    pub target: CbbaRef,
    /// Generator name of the source -> expression in the target.
    #[serde(default)]
    pub images: BTreeMap<String, String>,
}

/// A basis vector `i` of `V^{(p,q)}`.
pub type VRef = [i32; 3];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TwistDoc {
    pub source: VRef,
    pub target: VRef,
    pub monomial: String,
    pub coeff: Scalar,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PhiDoc {
    pub source: VRef,
    pub value: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExtensionDoc {
    pub version: u32,
    pub kind: String,
    pub base: CbbaRef,
    pub v: BicomplexRef,
    #[serde(default)]
    pub theta: Vec<TwistDoc>,
    #[serde(default)]
    pub thetabar: Vec<TwistDoc>,
    #[serde(default)]
    pub phi: Vec<PhiDoc>,
    #[serde(default)]
    pub phibar: Vec<PhiDoc>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, origin: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| anyhow!("{}: {e}", origin.display()))
}

fn check_header(version: u32, kind: &str, want: &str, origin: &Path) -> Result<()> {
    if version != VERSION {
        bail!("{}: unsupported version {version}", origin.display());
    }
    if kind != want {
        bail!("{}: expected kind `{want}`, found `{kind}`", origin.display());
    }
    Ok(())
}

fn matrix(rows: &[Vec<Scalar>], expected: (usize, usize), what: &str) -> Result<RatMatrix> {
    let (r, c) = expected;
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        let found_cols = rows.first().map_or(0, Vec::len);
        bail!("{what} has shape {}x{found_cols}, expected {r}x{c}", rows.len());
    }
    let mut m = RatMatrix::zeros(r, c);
    for (i, row) in rows.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = x.to_rational().with_context(|| format!("{what}, row {}, column {}", i + 1, j + 1))?;
        }
    }
    Ok(m)
}

fn rows_of(m: &RatMatrix) -> Vec<Vec<Scalar>> {
    (0..m.rows()).map(|i| m.row(i).iter().map(Scalar::from_rational).collect()).collect()
}

fn collect_blocks(
    docs: &[BlockDoc],
    name: &str,
    shape: impl Fn(Bidegree) -> (usize, usize),
) -> Result<BTreeMap<Bidegree, RatMatrix>> {
    let mut out = BTreeMap::new();
    for b in docs {
        let at = Bidegree::new(b.p, b.q);
        let what = format!("{name} block at {at}");
        if out.contains_key(&at) {
            bail!("{what} is declared twice");
        }
        out.insert(at, matrix(&b.rows, shape(at), &what)?);
    }
    Ok(out)
}

/// The bicomplex without checking the identities (block shapes are
/// checked).
pub fn bicomplex_from_doc(doc: &BicomplexDoc, origin: &Path) -> Result<Bicomplex> {
    check_header(doc.version, &doc.kind, "bicomplex", origin)?;
    let mut dims = BTreeMap::new();
    for s in &doc.space {
        let at = Bidegree::new(s.p, s.q);
        if dims.insert(at, s.dim).is_some() {
            bail!("{}: space at {at} is declared twice", origin.display());
        }
    }
    let dim = |b: Bidegree| dims.get(&b).copied().unwrap_or(0);
    let wrap = |e: anyhow::Error| e.context(format!("in {}", origin.display()));
    let del = collect_blocks(&doc.del, "del", |at| (dim(at + Bidegree::DEL), dim(at))).map_err(wrap)?;
    let delbar = collect_blocks(&doc.delbar, "delbar", |at| (dim(at + Bidegree::DELBAR), dim(at))).map_err(wrap)?;
    Ok(Bicomplex::from_blocks(dims.clone(), del, delbar)?)
}

pub fn bicomplex_to_doc(b: &Bicomplex) -> BicomplexDoc {
    let blocks = |which| {
        b.blocks(which)
            .iter()
            .map(|(at, m): (&Bidegree, &RatMatrix)| BlockDoc {
                p: at.p,
                q: at.q,
                rows: rows_of(m),
            })
            .collect()
    };
    BicomplexDoc {
        version: VERSION,
        kind: bicomplex_kind(),
        space: b.dims().iter().map(|(at, &dim)| SpaceDoc { p: at.p, q: at.q, dim }).collect(),
        del: blocks(Differential::Del),
        delbar: blocks(Differential::Delbar),
    }
}

pub fn parse_bicomplex_str(text: &str, origin: &Path) -> Result<Bicomplex> {
    bicomplex_from_doc(&parse_toml(text, origin)?, origin)
}

/// Parses without checking `∂² = ∂̄² = ∂∂̄ + ∂̄∂ = 0`.
pub fn parse_bicomplex_unchecked(path: &Path) -> Result<Bicomplex> {
    parse_bicomplex_str(&read(path)?, path)
}

/// Parses and validates.
pub fn parse_bicomplex(path: &Path) -> Result<Bicomplex> {
    let b = parse_bicomplex_unchecked(path)?;
    b.ensure_valid().with_context(|| format!("{} is not a bicomplex", path.display()))?;
    Ok(b)
}

pub fn write_bicomplex(b: &Bicomplex) -> String {
    toml::to_string(&bicomplex_to_doc(b)).expect("serializable")
}

fn resolve(origin: &Path, rel: &str) -> PathBuf {
    origin.parent().unwrap_or(Path::new(".")).join(rel)
}

fn load_bicomplex_ref(r: &BicomplexRef, origin: &Path) -> Result<Bicomplex> {
    let b = match r {
        BicomplexRef::Path(p) => parse_bicomplex_unchecked(&resolve(origin, p))?,
        BicomplexRef::Inline(doc) => bicomplex_from_doc(doc, origin)?,
    };
    b.ensure_valid().with_context(|| format!("bicomplex referenced from {} is invalid", origin.display()))?;
    Ok(b)
}

/// Parses a map; the chain-map identities are not checked.
pub fn parse_map(path: &Path) -> Result<BicomplexMap> {
    let doc: MapDoc = parse_toml(&read(path)?, path)?;
    check_header(doc.version, &doc.kind, "map", path)?;
    let source = load_bicomplex_ref(&doc.source, path)?;
    let target = load_bicomplex_ref(&doc.target, path)?;
    let blocks = collect_blocks(&doc.block, "map", |at| (target.dim(at), source.dim(at)))
        .with_context(|| format!("in {}", path.display()))?;
    Ok(BicomplexMap::from_blocks(source, target, blocks)?)
}

pub fn write_map(f: &BicomplexMap) -> String {
    let doc = MapDoc {
        version: VERSION,
        kind: "map".into(),
        source: BicomplexRef::Inline(bicomplex_to_doc(f.source())),
        target: BicomplexRef::Inline(bicomplex_to_doc(f.target())),
        block: f
            .blocks()
            .iter()
            .map(|(at, m)| BlockDoc {
                p: at.p,
                q: at.q,
                rows: rows_of(m),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("serializable")
}

/// `(V, W, φ/φ̄)` for the reduced cone.
pub fn parse_phi_pair(path: &Path) -> Result<(Bicomplex, Bicomplex, PhiPair)> {
    let doc: PhiPairDoc = parse_toml(&read(path)?, path)?;
    check_header(doc.version, &doc.kind, "phi-pair", path)?;
    let v = load_bicomplex_ref(&doc.source, path)?;
    let w = load_bicomplex_ref(&doc.target, path)?;
    let ctx = || format!("in {}", path.display());
    let phi = collect_blocks(&doc.phi, "phi", |at| (w.dim(at + Bidegree::DEL), v.dim(at))).with_context(ctx)?;
    let phibar =
        collect_blocks(&doc.phibar, "phibar", |at| (w.dim(at + Bidegree::DELBAR), v.dim(at))).with_context(ctx)?;
    Ok((v, w, PhiPair { phi, phibar }))
}

fn cbba_from_doc(doc: &CbbaDoc, origin: &Path) -> Result<TruncatedCbba> {
    check_header(doc.version, &doc.kind, "cbba", origin)?;
    Ok(bicx::hirsch::free_cbba(&doc.generator, doc.truncation)?)
}

pub fn cbba_to_doc(a: &TruncatedCbba) -> CbbaDoc {
    CbbaDoc {
        version: VERSION,
        kind: "cbba".into(),
        truncation: a.truncation(),
        generator: a.specs().to_vec(),
    }
}

/// TOML parse errors are input errors; algebra errors (degrees, `d²`)
/// come back as [`bicx::hirsch::HirschError`] in the chain.
pub fn parse_cbba(path: &Path) -> Result<TruncatedCbba> {
    let doc = read_cbba_doc(path)?;
    cbba_from_doc(&doc, path).with_context(|| format!("in {}", path.display()))
}

/// The generator list and truncation, header checked, algebra not built.
pub fn read_cbba_doc(path: &Path) -> Result<CbbaDoc> {
    let doc: CbbaDoc = parse_toml(&read(path)?, path)?;
    check_header(doc.version, &doc.kind, "cbba", path)?;
    Ok(doc)
}

pub fn write_cbba(a: &TruncatedCbba) -> String {
    toml::to_string(&cbba_to_doc(a)).expect("serializable")
}

fn load_cbba_ref(r: &CbbaRef, origin: &Path) -> Result<TruncatedCbba> {
    match r {
        CbbaRef::Path(p) => parse_cbba(&resolve(origin, p)),
        CbbaRef::Inline(doc) => cbba_from_doc(doc, origin),
    }
}

pub fn parse_cbba_map(path: &Path) -> Result<CbbaMap> {
    let doc: CbbaMapDoc = parse_toml(&read(path)?, path)?;
    check_header(doc.version, &doc.kind, "cbba-map", path)?;
    let source = load_cbba_ref(&doc.source, path)?;
    let target = load_cbba_ref(&doc.target, path)?;
    for name in doc.images.keys() {
        if !source.names().contains(name) {
            bail!("{}: `{name}` is not a generator of the source", path.display());
        }
    }
    let mut images = Vec::new();
    for g in source.generators() {
        let text = doc.images.get(&g.name).map_or("0", String::as_str);
        images.push(target.parse_elem(text).with_context(|| format!("image of `{}`", g.name))?);
    }
    Ok(CbbaMap::new(source, target, &images)?)
}

pub fn write_cbba_map(f: &CbbaMap) -> String {
    let src = f.source();
    let images = src
        .generators()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let i = src.index_of(&generator_monomial(src, k)).expect("generators survive");
            (g.name.clone(), f.target().format_elem(&f.matrix().column(i)))
        })
        .collect();
    let doc = CbbaMapDoc {
        version: VERSION,
        kind: "cbba-map".into(),
        source: CbbaRef::Inline(cbba_to_doc(src)),
        target: CbbaRef::Inline(cbba_to_doc(f.target())),
        images,
    };
    toml::to_string(&doc).expect("serializable")
}

fn generator_monomial(a: &TruncatedCbba, k: usize) -> bicx::hirsch::Monomial {
    let mut e = vec![0; a.generators().len()];
    e[k] = 1;
    bicx::hirsch::Monomial(e)
}

fn v_index(vb: &VBasis, v: &Bicomplex, r: VRef, what: &str) -> Result<usize> {
    let at = Bidegree::new(r[0], r[1]);
    if r[2] < 0 || r[2] as usize >= v.dim(at) {
        bail!("{what}: V has no basis vector {} at {at}", r[2]);
    }
    Ok(vb.global(at, r[2] as usize))
}

fn v_ref(vb: &VBasis, w: usize) -> VRef {
    let at = vb.degree(w);
    let first = (0..w).rev().take_while(|&u| vb.degree(u) == at).count();
    [at.p, at.q, first as i32]
}

fn monomial_index(a: &TruncatedCbba, text: &str, what: &str) -> Result<(usize, Rational)> {
    let e = a.parse_elem(text).with_context(|| what.to_string())?;
    let nz: Vec<usize> = (0..e.len()).filter(|&i| !e[i].is_zero()).collect();
    match nz.as_slice() {
        [i] => Ok((*i, e[*i].clone())),
        _ => bail!("{what}: `{text}` is not a single nonzero monomial"),
    }
}

/// Parses an extension; structure equations are not checked.
pub fn parse_extension(path: &Path) -> Result<HirschExtension> {
    let doc: ExtensionDoc = parse_toml(&read(path)?, path)?;
    check_header(doc.version, &doc.kind, "hirsch-extension", path)?;
    let base = load_cbba_ref(&doc.base, path)?;
    let v = load_bicomplex_ref(&doc.v, path)?;
    let vb = VBasis::new(&v);
    let n = vb.dim();
    let twist = |docs: &[TwistDoc], name: &str| -> Result<Twisting> {
        let mut out = Twisting::new();
        for (k, t) in docs.iter().enumerate() {
            let what = format!("{name} entry {}", k + 1);
            let s = v_index(&vb, &v, t.source, &what)?;
            let r = v_index(&vb, &v, t.target, &what)?;
            let (m, sign) = monomial_index(&base, &t.monomial, &what)?;
            let c = t.coeff.to_rational().with_context(|| what.clone())? * sign;
            let e = out.entry(m).or_insert_with(|| RatMatrix::zeros(n, n));
            e[(r, s)] += c;
        }
        out.retain(|_, m| !m.is_zero());
        Ok(out)
    };
    let theta = twist(&doc.theta, "theta")?;
    let thetabar = twist(&doc.thetabar, "thetabar")?;
    let phis = |docs: &[PhiDoc], name: &str| -> Result<RatMatrix> {
        let mut m = RatMatrix::zeros(base.dim(), n);
        for (k, p) in docs.iter().enumerate() {
            let what = format!("{name} entry {}", k + 1);
            let w = v_index(&vb, &v, p.source, &what)?;
            let value = base.parse_elem(&p.value).with_context(|| what.clone())?;
            for (i, c) in value.into_iter().enumerate() {
                m[(i, w)] += c;
            }
        }
        Ok(m)
    };
    let phi = phis(&doc.phi, "phi")?;
    let phibar = phis(&doc.phibar, "phibar")?;
    Ok(HirschExtension::from_parts(base, LocalSystemPair { v, theta, thetabar }, phi, phibar))
}

pub fn write_extension(e: &HirschExtension) -> String {
    let a = &e.base;
    let vb = VBasis::new(e.v());
    let twists = |t: &Twisting| {
        let mut out = Vec::new();
        for (&m, tm) in t {
            let word = a.format_elem(&a.basis_elem(m));
            for s in 0..vb.dim() {
                for r in 0..vb.dim() {
                    if !tm[(r, s)].is_zero() {
                        out.push(TwistDoc {
                            source: v_ref(&vb, s),
                            target: v_ref(&vb, r),
                            monomial: word.clone(),
                            coeff: Scalar::from_rational(&tm[(r, s)]),
                        });
                    }
                }
            }
        }
        out
    };
    let phis = |m: &RatMatrix| {
        (0..vb.dim())
            .filter(|&w| (0..m.rows()).any(|i| !m[(i, w)].is_zero()))
            .map(|w| PhiDoc {
                source: v_ref(&vb, w),
                value: a.format_elem(&m.column(w)),
            })
            .collect()
    };
    let doc = ExtensionDoc {
        version: VERSION,
        kind: "hirsch-extension".into(),
        base: CbbaRef::Inline(cbba_to_doc(a)),
        v: BicomplexRef::Inline(bicomplex_to_doc(e.v())),
        theta: twists(&e.system.theta),
        thetabar: twists(&e.system.thetabar),
        phi: phis(&e.phi),
        phibar: phis(&e.phibar),
    };
    toml::to_string(&doc).expect("serializable")
}
