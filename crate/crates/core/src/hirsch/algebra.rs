use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::HirschError;
use crate::bicomplex::{sign, Bicomplex, Bidegree, Differential};
use crate::exactq::{parse_rational, RatMatrix, Rational};

/// Exponent vector over the generators in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn word_length(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Generators with repetition, in order.
    fn word(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(i, &e)| std::iter::repeat_n(i, e as usize))
            .collect()
    }

    fn from_word(n: usize, word: &[usize]) -> Self {
        let mut e = vec![0; n];
        for &i in word {
            e[i] += 1;
        }
        Monomial(e)
    }
}

pub(crate) type Poly = BTreeMap<Monomial, Rational>;

fn add_term(p: &mut Poly, m: Monomial, c: Rational) {
    if c.is_zero() {
        return;
    }
    let entry = p.entry(m.clone()).or_insert_with(Rational::zero);
    *entry += c;
    if entry.is_zero() {
        p.remove(&m);
    }
}

/// The free graded-commutative algebra on generators of the given
/// bidegrees; parity is that of the total degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct FreeGc {
    pub degrees: Vec<Bidegree>,
}

impl FreeGc {
    fn odd(&self, i: usize) -> bool {
        self.degrees[i].total().rem_euclid(2) == 1
    }

    /// No odd generator occurs twice.
    pub fn is_reduced(&self, m: &Monomial) -> bool {
        m.0.iter().enumerate().all(|(i, &e)| e <= 1 || !self.odd(i))
    }

    pub fn degree(&self, m: &Monomial) -> Bidegree {
        m.0.iter()
            .zip(&self.degrees)
            .fold(Bidegree::new(0, 0), |acc, (&e, &d)| {
                acc + Bidegree::new(d.p * e as i32, d.q * e as i32)
            })
    }

    /// `a·b` normalized to generator order, or `None` if an odd generator
    /// would appear twice. The sign counts odd generators of `b` moved past
    /// later odd generators of `a`.
    pub fn mul_mono(&self, a: &Monomial, b: &Monomial) -> Option<(Rational, Monomial)> {
        let n = self.degrees.len();
        let mut swaps = 0u32;
        let mut out = vec![0; n];
        for j in 0..n {
            out[j] = a.0[j] + b.0[j];
            if self.odd(j) && out[j] > 1 {
                return None;
            }
            if self.odd(j) && b.0[j] == 1 {
                swaps += ((j + 1)..n).filter(|&i| self.odd(i)).map(|i| a.0[i]).sum::<u32>();
            }
        }
        Some((sign(swaps as i32), Monomial(out)))
    }

    pub fn mul(&self, a: &Poly, b: &Poly, keep: &dyn Fn(&Monomial) -> bool) -> Poly {
        let mut out = Poly::new();
        for (ma, ca) in a {
            for (mb, cb) in b {
                if let Some((s, m)) = self.mul_mono(ma, mb) {
                    if keep(&m) {
                        add_term(&mut out, m, s * ca * cb);
                    }
                }
            }
        }
        out
    }

    /// Extends an odd derivation from its values on generators.
    pub fn derivation(&self, m: &Monomial, images: &[Poly], keep: &dyn Fn(&Monomial) -> bool) -> Poly {
        let n = self.degrees.len();
        let word = m.word();
        let mut out = Poly::new();
        for t in 0..word.len() {
            let prefix = Monomial::from_word(n, &word[..t]);
            let suffix = Monomial::from_word(n, &word[t + 1..]);
            let s = sign(self.degree(&prefix).total());
            let left = Poly::from([(prefix, s)]);
            let right = Poly::from([(suffix, Rational::one())]);
            let everything = |_: &Monomial| true;
            let middle = self.mul(&left, &images[word[t]], &everything);
            for (mm, c) in self.mul(&middle, &right, &everything) {
                if keep(&mm) {
                    add_term(&mut out, mm, c);
                }
            }
        }
        out
    }

    /// Reduced monomials of total degree at most `n` (generators of positive
    /// degree) or of word length exactly `n`.
    fn enumerate(&self, limit: Limit) -> Vec<Monomial> {
        let n = self.degrees.len();
        let mut out = Vec::new();
        let mut cur = vec![0u32; n];
        self.enumerate_rec(0, &mut cur, limit, 0, 0, &mut out);
        out
    }

    fn enumerate_rec(
        &self,
        i: usize,
        cur: &mut Vec<u32>,
        limit: Limit,
        total: i32,
        length: u32,
        out: &mut Vec<Monomial>,
    ) {
        if i == self.degrees.len() {
            let ok = match limit {
                Limit::Degree(_) => true,
                Limit::Length(l) => length == l,
            };
            if ok {
                out.push(Monomial(cur.clone()));
            }
            return;
        }
        let max_e = if self.odd(i) { 1 } else { u32::MAX };
        let d = self.degrees[i].total();
        let mut e = 0u32;
        loop {
            let t = total + d * e as i32;
            let l = length + e;
            let fits = match limit {
                Limit::Degree(nmax) => t <= nmax,
                Limit::Length(lmax) => l <= lmax,
            };
            if !fits {
                break;
            }
            cur[i] = e;
            self.enumerate_rec(i + 1, cur, limit, t, l, out);
            if e == max_e {
                break;
            }
            e += 1;
        }
        cur[i] = 0;
    }
}

#[derive(Clone, Copy)]
enum Limit {
    Degree(i32),
    Length(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub name: String,
    pub bidegree: Bidegree,
}

/// Input for [`free_cbba`]: differentials of generators as polynomial
/// strings such as `"2*x^2*y - 1/3 z"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    pub p: i32,
    pub q: i32,
    #[serde(default = "zero_string")]
    pub del: String,
    #[serde(default = "zero_string")]
    pub delbar: String,
}

fn zero_string() -> String {
    "0".to_string()
}

impl GeneratorSpec {
    pub fn new(name: &str, p: i32, q: i32, del: &str, delbar: &str) -> Self {
        GeneratorSpec {
            name: name.to_string(),
            p,
            q,
            del: del.to_string(),
            delbar: delbar.to_string(),
        }
    }
}

/// A free commutative bigraded bidifferential algebra modulo everything of
/// total degree above `truncation`. Elements are dense coefficient vectors
/// over the global monomial basis (sorted by bidegree, then exponents).
#[derive(Clone, Debug)]
pub struct TruncatedCbba {
    generators: Vec<Generator>,
    specs: Vec<GeneratorSpec>,
    truncation: i32,
    monomials: Vec<Monomial>,
    degrees: Vec<Bidegree>,
    index: BTreeMap<Monomial, usize>,
    offsets: BTreeMap<Bidegree, (usize, usize)>,
    mult: Vec<Vec<Option<(bool, usize)>>>,
    del: Vec<Vec<(usize, Rational)>>,
    delbar: Vec<Vec<(usize, Rational)>>,
    cutoff_products: usize,
}

impl PartialEq for TruncatedCbba {
    fn eq(&self, other: &Self) -> bool {
        self.generators == other.generators
            && self.truncation == other.truncation
            && self.del == other.del
            && self.delbar == other.delbar
    }
}

pub type Elem = Vec<Rational>;

fn valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses `"x^2*y - 3/2 z + 1"` into monomial terms over `names`. Factors
/// may be written in any order; moving odd generators past each other into
/// the generator order costs the Koszul sign.
pub(crate) fn parse_poly(s: &str, names: &[String], odd: &[bool]) -> Result<Poly, String> {
    let n = names.len();
    let mut out = Poly::new();
    let cleaned = s.replace('-', " - ").replace('+', " + ");
    let mut sign_neg = false;
    let mut term: Vec<&str> = Vec::new();
    let mut terms: Vec<(bool, Vec<&str>)> = Vec::new();
    for tok in cleaned.split_whitespace() {
        match tok {
            "+" | "-" => {
                if !term.is_empty() {
                    terms.push((sign_neg, std::mem::take(&mut term)));
                    sign_neg = false;
                }
                if tok == "-" {
                    sign_neg = !sign_neg;
                }
            }
            _ => term.push(tok),
        }
    }
    if !term.is_empty() {
        terms.push((sign_neg, term));
    } else if sign_neg {
        return Err(format!("dangling sign in `{s}`"));
    }
    for (neg, toks) in terms {
        let mut coeff = Rational::one();
        let mut exps = vec![0u32; n];
        let mut odd_seen: Vec<usize> = Vec::new();
        for factor in toks.iter().flat_map(|t| t.split('*')).filter(|f| !f.is_empty()) {
            if factor.starts_with(|c: char| c.is_ascii_digit()) {
                coeff *= parse_rational(factor).map_err(|e| format!("{e} in `{s}`"))?;
                continue;
            }
            let (name, power) = match factor.split_once('^') {
                Some((a, b)) => (a, b.parse::<u32>().map_err(|_| format!("bad exponent in `{factor}`"))?),
                None => (factor, 1),
            };
            let i = names
                .iter()
                .position(|x| x == name)
                .ok_or_else(|| format!("unknown generator `{name}` in `{s}`"))?;
            exps[i] += power;
            if odd[i] {
                for _ in 0..power {
                    if odd_seen.iter().filter(|&&j| j > i).count() % 2 == 1 {
                        coeff = -coeff;
                    }
                    odd_seen.push(i);
                }
            }
        }
        if neg {
            coeff = -coeff;
        }
        add_term(&mut out, Monomial(exps), coeff);
    }
    Ok(out)
}

pub(crate) fn format_poly(p: &Poly, names: &[String]) -> String {
    if p.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (k, (m, c)) in p.iter().enumerate() {
        let neg = c < &Rational::zero();
        let abs = if neg { -c.clone() } else { c.clone() };
        if k == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let word = format_monomial(m, names);
        if word == "1" {
            write!(out, "{abs}").unwrap();
        } else if abs.is_one() {
            out.push_str(&word);
        } else {
            write!(out, "{abs}*{word}").unwrap();
        }
    }
    out
}

pub(crate) fn format_monomial(m: &Monomial, names: &[String]) -> String {
    let parts: Vec<String> = m
        .0
        .iter()
        .zip(names)
        .filter(|(&e, _)| e > 0)
        .map(|(&e, n)| if e == 1 { n.clone() } else { format!("{n}^{e}") })
        .collect();
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join("*")
    }
}

/// Builds the truncated free cbba and checks it.
///
/// Generators are sorted by (total degree, p, name). Differentials must be
/// homogeneous of the right bidegree; terms above the truncation degree are
/// dropped. `∂² = ∂̄² = ∂∂̄ + ∂̄∂ = 0` is checked on every generator, which
/// suffices since these are derivations and the truncation ideal is closed
/// under both differentials.
pub fn free_cbba(specs: &[GeneratorSpec], truncation: i32) -> Result<TruncatedCbba, HirschError> {
    let mut specs = specs.to_vec();
    specs.sort_by(|a, b| ((a.p + a.q), a.p, &a.name).cmp(&((b.p + b.q), b.p, &b.name)));
    let mut seen = BTreeSet::new();
    for s in &specs {
        if !valid_name(&s.name) {
            return Err(HirschError::Parse(format!("invalid generator name `{}`", s.name)));
        }
        if !seen.insert(s.name.clone()) {
            return Err(HirschError::Parse(format!("duplicate generator `{}`", s.name)));
        }
        if s.p < 0 || s.q < 0 || s.p + s.q < 1 {
            return Err(HirschError::Degree(format!(
                "generator `{}` at ({},{}) must have p, q >= 0 and positive total degree",
                s.name, s.p, s.q
            )));
        }
    }
    if truncation < 0 {
        return Err(HirschError::Degree("negative truncation degree".into()));
    }
    let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let generators: Vec<Generator> = specs
        .iter()
        .map(|s| Generator {
            name: s.name.clone(),
            bidegree: Bidegree::new(s.p, s.q),
        })
        .collect();
    let gc = FreeGc {
        degrees: generators.iter().map(|g| g.bidegree).collect(),
    };
    let odd: Vec<bool> = (0..generators.len()).map(|i| gc.odd(i)).collect();
    let mut monomials = gc.enumerate(Limit::Degree(truncation));
    monomials.sort_by(|a, b| (gc.degree(a), a).cmp(&(gc.degree(b), b)));
    let degrees: Vec<Bidegree> = monomials.iter().map(|m| gc.degree(m)).collect();
    let index: BTreeMap<Monomial, usize> = monomials.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let mut offsets: BTreeMap<Bidegree, (usize, usize)> = BTreeMap::new();
    for (i, &d) in degrees.iter().enumerate() {
        offsets.entry(d).or_insert((i, 0)).1 += 1;
    }
    let keep = |m: &Monomial| gc.degree(m).total() <= truncation;

    let mut del_gen = Vec::new();
    let mut delbar_gen = Vec::new();
    for (s, g) in specs.iter().zip(&generators) {
        for (which, text, store) in [
            (Differential::Del, &s.del, &mut del_gen),
            (Differential::Delbar, &s.delbar, &mut delbar_gen),
        ] {
            let p = parse_poly(text, &names, &odd).map_err(HirschError::Parse)?;
            let want = g.bidegree + which.step();
            for m in p.keys() {
                if gc.degree(m) != want {
                    return Err(HirschError::Degree(format!(
                        "{which}{} has a term `{}` of bidegree {} instead of {want}",
                        g.name,
                        format_monomial(m, &names),
                        gc.degree(m)
                    )));
                }
            }
            // a repeated odd generator makes the term vanish
            store.push(
                p.into_iter()
                    .filter(|(m, _)| keep(m) && gc.is_reduced(m))
                    .collect::<Poly>(),
            );
        }
    }

    let to_sparse = |p: Poly| -> Vec<(usize, Rational)> {
        p.into_iter().map(|(m, c)| (index[&m], c)).collect()
    };
    let del: Vec<_> = monomials
        .iter()
        .map(|m| to_sparse(gc.derivation(m, &del_gen, &keep)))
        .collect();
    let delbar: Vec<_> = monomials
        .iter()
        .map(|m| to_sparse(gc.derivation(m, &delbar_gen, &keep)))
        .collect();
    let mut cutoff_products = 0;
    let mult: Vec<Vec<Option<(bool, usize)>>> = monomials
        .iter()
        .map(|a| {
            monomials
                .iter()
                .map(|b| match gc.mul_mono(a, b) {
                    Some((s, m)) => match index.get(&m) {
                        Some(&k) => Some((s < Rational::zero(), k)),
                        None => {
                            cutoff_products += 1;
                            None
                        }
                    },
                    None => None,
                })
                .collect()
        })
        .collect();
    let cbba = TruncatedCbba {
        generators,
        specs,
        truncation,
        monomials,
        degrees,
        index,
        offsets,
        mult,
        del,
        delbar,
        cutoff_products,
    };
    for (gi, g) in cbba.generators.iter().enumerate() {
        let mut e = Monomial::one(cbba.generators.len());
        e.0[gi] = 1;
        let Some(&i) = cbba.index.get(&e) else {
            continue;
        };
        let unit = cbba.basis_elem(i);
        let d = |w: Differential, x: &Elem| cbba.apply(w, x);
        let dd = d(Differential::Del, &d(Differential::Del, &unit));
        let bb = d(Differential::Delbar, &d(Differential::Delbar, &unit));
        let db: Elem = d(Differential::Del, &d(Differential::Delbar, &unit))
            .iter()
            .zip(d(Differential::Delbar, &d(Differential::Del, &unit)))
            .map(|(a, b)| a + b)
            .collect();
        for (what, v) in [("del^2", dd), ("delbar^2", bb), ("del delbar + delbar del", db)] {
            if v.iter().any(|c| !c.is_zero()) {
                return Err(HirschError::DSquared {
                    generator: g.name.clone(),
                    identity: what.to_string(),
                });
            }
        }
    }
    Ok(cbba)
}

impl TruncatedCbba {
    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn specs(&self) -> &[GeneratorSpec] {
        &self.specs
    }

    pub fn names(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.name.clone()).collect()
    }

    pub fn truncation(&self) -> i32 {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        self.monomials.len()
    }

    pub fn monomial(&self, i: usize) -> &Monomial {
        &self.monomials[i]
    }

    pub fn degree(&self, i: usize) -> Bidegree {
        self.degrees[i]
    }

    pub fn total_degree(&self, i: usize) -> i32 {
        self.degrees[i].total()
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn unit(&self) -> usize {
        self.index[&Monomial::one(self.generators.len())]
    }

    /// Products that fall above the truncation degree and are set to zero.
    pub fn cutoff_products(&self) -> usize {
        self.cutoff_products
    }

    /// Global indices of the monomials of one bidegree.
    pub fn indices_at(&self, at: Bidegree) -> std::ops::Range<usize> {
        match self.offsets.get(&at) {
            Some(&(o, n)) => o..o + n,
            None => 0..0,
        }
    }

    pub fn dims(&self) -> BTreeMap<Bidegree, usize> {
        self.offsets.iter().map(|(&b, &(_, n))| (b, n)).collect()
    }

    /// Monomial names grouped by bidegree.
    pub fn monomial_basis(&self) -> BTreeMap<Bidegree, Vec<String>> {
        let names = self.names();
        self.offsets
            .keys()
            .map(|&b| {
                (
                    b,
                    self.indices_at(b)
                        .map(|i| format_monomial(&self.monomials[i], &names))
                        .collect(),
                )
            })
            .collect()
    }

    pub fn basis_elem(&self, i: usize) -> Elem {
        let mut v = vec![Rational::zero(); self.dim()];
        v[i] = Rational::one();
        v
    }

    pub fn zero_elem(&self) -> Elem {
        vec![Rational::zero(); self.dim()]
    }

    /// `m_i · m_j` as `(sign, index)`.
    pub fn mul_index(&self, i: usize, j: usize) -> Option<(Rational, usize)> {
        self.mult[i][j].map(|(neg, k)| (if neg { -Rational::one() } else { Rational::one() }, k))
    }

    pub fn mul(&self, a: &[Rational], b: &[Rational]) -> Elem {
        let mut out = self.zero_elem();
        for (i, ca) in a.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            for (j, cb) in b.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                if let Some((neg, k)) = self.mult[i][j] {
                    let t = ca * cb;
                    if neg {
                        out[k] -= t;
                    } else {
                        out[k] += t;
                    }
                }
            }
        }
        out
    }

    /// Sparse image of a basis monomial under a differential.
    pub fn d_index(&self, which: Differential, i: usize) -> &[(usize, Rational)] {
        match which {
            Differential::Del => &self.del[i],
            Differential::Delbar => &self.delbar[i],
        }
    }

    pub fn apply(&self, which: Differential, a: &[Rational]) -> Elem {
        let mut out = self.zero_elem();
        for (i, c) in a.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            for (k, d) in self.d_index(which, i) {
                out[*k] += c * d;
            }
        }
        out
    }

    /// Full matrix of a differential on the global basis.
    pub fn d_matrix(&self, which: Differential) -> RatMatrix {
        let mut m = RatMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            for (k, c) in self.d_index(which, i) {
                m[(*k, i)] = c.clone();
            }
        }
        m
    }

    /// The underlying bicomplex.
    pub fn bicomplex(&self) -> Bicomplex {
        let dims = self.dims();
        let mut blocks: [BTreeMap<Bidegree, RatMatrix>; 2] = Default::default();
        for (slot, which) in [Differential::Del, Differential::Delbar].into_iter().enumerate() {
            for &b in dims.keys() {
                let t = b + which.step();
                let (src, tgt) = (self.indices_at(b), self.indices_at(t));
                if tgt.is_empty() {
                    continue;
                }
                let mut m = RatMatrix::zeros(tgt.len(), src.len());
                for (col, i) in src.clone().enumerate() {
                    for (k, c) in self.d_index(which, i) {
                        m[(k - tgt.start, col)] = c.clone();
                    }
                }
                if !m.is_zero() {
                    blocks[slot].insert(b, m);
                }
            }
        }
        let [del, delbar] = blocks;
        Bicomplex::from_blocks(dims, del, delbar).expect("blocks are shaped by construction")
    }

    pub fn parse_elem(&self, s: &str) -> Result<Elem, HirschError> {
        let odd: Vec<bool> = self.generators.iter().map(|g| g.bidegree.total() % 2 != 0).collect();
        let p = parse_poly(s, &self.names(), &odd).map_err(HirschError::Parse)?;
        let mut out = self.zero_elem();
        for (m, c) in p {
            // above the truncation or with a repeated odd generator: zero
            if let Some(i) = self.index_of(&m) {
                out[i] += c;
            }
        }
        Ok(out)
    }

    pub fn format_elem(&self, a: &[Rational]) -> String {
        let p: Poly = a
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (self.monomials[i].clone(), c.clone()))
            .collect();
        format_poly(&p, &self.names())
    }

    /// Bidegree of a nonzero homogeneous element, `None` if zero or mixed.
    pub fn homogeneous_degree(&self, a: &[Rational]) -> Option<Bidegree> {
        let mut degs = a
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, _)| self.degrees[i]);
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }
}

/// A cbba map between truncated free algebras, fixed by generator images.
#[derive(Clone, Debug)]
pub struct CbbaMap {
    source: TruncatedCbba,
    target: TruncatedCbba,
    /// `target.dim() × source.dim()`.
    matrix: RatMatrix,
}

impl CbbaMap {
    /// Extends the generator images multiplicatively and checks that the
    /// result is well defined on the truncation, multiplicative, and commutes
    /// with both differentials.
    pub fn new(source: TruncatedCbba, target: TruncatedCbba, images: &[Elem]) -> Result<Self, HirschError> {
        if images.len() != source.generators.len() {
            return Err(HirschError::InvalidMap(format!(
                "{} generator images for {} generators",
                images.len(),
                source.generators.len()
            )));
        }
        for (g, img) in source.generators.iter().zip(images) {
            if img.len() != target.dim() {
                return Err(HirschError::InvalidMap(format!("image of `{}` has the wrong length", g.name)));
            }
            if let Some(d) = target.homogeneous_degree(img) {
                if d != g.bidegree {
                    return Err(HirschError::InvalidMap(format!(
                        "image of `{}` has bidegree {d}, expected {}",
                        g.name, g.bidegree
                    )));
                }
            } else if img.iter().any(|c| !c.is_zero()) {
                return Err(HirschError::InvalidMap(format!("image of `{}` is not homogeneous", g.name)));
            }
        }
        let mut matrix = RatMatrix::zeros(target.dim(), source.dim());
        let unit = target.basis_elem(target.unit());
        for (col, m) in source.monomials.iter().enumerate() {
            let mut v = unit.clone();
            for g in m.word() {
                v = target.mul(&v, &images[g]);
            }
            for (r, c) in v.into_iter().enumerate() {
                matrix[(r, col)] = c;
            }
        }
        let f = CbbaMap { source, target, matrix };
        for which in [Differential::Del, Differential::Delbar] {
            let lhs = f.matrix.mul(&f.source.d_matrix(which));
            let rhs = f.target.d_matrix(which).mul(&f.matrix);
            if lhs != rhs {
                return Err(HirschError::InvalidMap(format!("does not commute with {which}")));
            }
        }
        for i in 0..f.source.dim() {
            for j in 0..f.source.dim() {
                let fij = f.target.mul(&f.matrix.column(i), &f.matrix.column(j));
                let prod = match f.source.mul_index(i, j) {
                    Some((s, k)) => f.matrix.column(k).into_iter().map(|c| c * &s).collect(),
                    None => f.target.zero_elem(),
                };
                if fij != prod {
                    return Err(HirschError::InvalidMap(format!(
                        "not well defined on the truncation: f({})·f({}) != f(product)",
                        format_monomial(&f.source.monomials[i], &f.source.names()),
                        format_monomial(&f.source.monomials[j], &f.source.names())
                    )));
                }
            }
        }
        Ok(f)
    }

    pub fn identity(a: &TruncatedCbba) -> Self {
        let images: Vec<Elem> = (0..a.generators.len())
            .map(|g| {
                let mut e = Monomial::one(a.generators.len());
                e.0[g] = 1;
                a.index_of(&e).map_or_else(|| a.zero_elem(), |i| a.basis_elem(i))
            })
            .collect();
        CbbaMap::new(a.clone(), a.clone(), &images).expect("identity is a cbba map")
    }

    pub fn source(&self) -> &TruncatedCbba {
        &self.source
    }

    pub fn target(&self) -> &TruncatedCbba {
        &self.target
    }

    pub fn matrix(&self) -> &RatMatrix {
        &self.matrix
    }
}

/// `ΛⁿV`: word-length-`n` part of the free graded-commutative algebra on a
/// basis of `V`, with the differentials extended as derivations.
pub fn wedge_power(v: &Bicomplex, n: u32) -> Bicomplex {
    let mut degrees = Vec::new();
    let mut offsets = BTreeMap::new();
    for b in v.support() {
        offsets.insert(b, degrees.len());
        degrees.extend(std::iter::repeat_n(b, v.dim(b)));
    }
    let gc = FreeGc { degrees };
    let k = gc.degrees.len();
    let unit_poly = |i: usize, c: Rational| {
        let mut e = Monomial::one(k);
        e.0[i] = 1;
        (e, c)
    };
    let images = |which: Differential| -> Vec<Poly> {
        (0..k)
            .map(|i| {
                let at = gc.degrees[i];
                let local = i - offsets[&at];
                let mut p = Poly::new();
                if let Some(d) = v.blocks(which).get(&at) {
                    let to = offsets[&(at + which.step())];
                    for r in 0..d.rows() {
                        let (m, c) = unit_poly(to + r, d[(r, local)].clone());
                        add_term(&mut p, m, c);
                    }
                }
                p
            })
            .collect()
    };
    let mut monomials = gc.enumerate(Limit::Length(n));
    monomials.sort_by(|a, b| (gc.degree(a), a).cmp(&(gc.degree(b), b)));
    let mut dims: BTreeMap<Bidegree, usize> = BTreeMap::new();
    let mut local: BTreeMap<Monomial, usize> = BTreeMap::new();
    for m in &monomials {
        let e = dims.entry(gc.degree(m)).or_insert(0);
        local.insert(m.clone(), *e);
        *e += 1;
    }
    let all = |_: &Monomial| true;
    let mut blocks: [BTreeMap<Bidegree, RatMatrix>; 2] = Default::default();
    for (slot, which) in [Differential::Del, Differential::Delbar].into_iter().enumerate() {
        let imgs = images(which);
        for m in &monomials {
            let at = gc.degree(m);
            let t = at + which.step();
            let Some(&rows) = dims.get(&t) else {
                continue;
            };
            let cols = dims[&at];
            for (mm, c) in gc.derivation(m, &imgs, &all) {
                let block = blocks[slot]
                    .entry(at)
                    .or_insert_with(|| RatMatrix::zeros(rows, cols));
                block[(local[&mm], local[m])] += c;
            }
        }
        blocks[slot].retain(|_, m| !m.is_zero());
    }
    let [del, delbar] = blocks;
    Bicomplex::from_blocks(dims, del, delbar).expect("blocks are shaped by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicomplex::{connectivity, dot, Connectivity, Family};
    use crate::decomp::{make_zigzag, ZigZagDescriptor};

    fn bd(p: i32, q: i32) -> Bidegree {
        Bidegree::new(p, q)
    }

    #[test]
    fn polynomial_on_even_generator() {
        let a = free_cbba(&[GeneratorSpec::new("x", 1, 1, "0", "0")], 6).unwrap();
        assert_eq!(a.dim(), 4);
        let basis = a.monomial_basis();
        assert_eq!(basis[&bd(3, 3)], vec!["x^3".to_string()]);
        let x = a.parse_elem("x").unwrap();
        let x2 = a.mul(&x, &x);
        assert_eq!(a.format_elem(&x2), "x^2");
        assert!(a.mul(&x2, &a.mul(&x2, &x)).iter().all(Zero::is_zero));
        assert!(a.cutoff_products() > 0);
    }

    #[test]
    fn odd_generators_square_to_zero() {
        let a = free_cbba(
            &[GeneratorSpec::new("y", 1, 0, "0", "0"), GeneratorSpec::new("z", 0, 1, "0", "0")],
            4,
        )
        .unwrap();
        assert_eq!(a.dim(), 4);
        let y = a.parse_elem("y").unwrap();
        let z = a.parse_elem("z").unwrap();
        assert!(a.mul(&y, &y).iter().all(Zero::is_zero));
        let yz = a.mul(&y, &z);
        let zy = a.mul(&z, &y);
        assert_eq!(yz, zy.iter().map(|c| -c).collect::<Vec<_>>());
    }

    #[test]
    fn leibniz_signs() {
        // ∂(y z) = ∂y z - y ∂z with y, z odd.
        let a = free_cbba(
            &[
                GeneratorSpec::new("y", 1, 0, "0", "u"),
                GeneratorSpec::new("z", 0, 1, "w", "0"),
                GeneratorSpec::new("u", 1, 1, "0", "0"),
                GeneratorSpec::new("w", 1, 1, "0", "0"),
            ],
            4,
        )
        .unwrap();
        let yz = a.mul(&a.parse_elem("y").unwrap(), &a.parse_elem("z").unwrap());
        assert_eq!(a.format_elem(&a.apply(Differential::Del, &yz)), "-y*w");
        assert_eq!(a.format_elem(&a.apply(Differential::Delbar, &yz)), "z*u");
        assert_eq!(a.parse_elem("y*z").unwrap(), yz);
        assert_eq!(a.format_elem(&a.parse_elem("y*z + z*y").unwrap()), "0");
        assert_eq!(a.parse_elem("u*y").unwrap(), a.parse_elem("y*u").unwrap());
        assert!(a.bicomplex().validate().is_empty());
    }

    #[test]
    fn projective_space_total_algebra() {
        let a = free_cbba(
            &[
                GeneratorSpec::new("x", 1, 1, "0", "0"),
                GeneratorSpec::new("y", 2, 2, "dy", "dby"),
                GeneratorSpec::new("dy", 3, 2, "0", "-x^3"),
                GeneratorSpec::new("dby", 2, 3, "x^3", "0"),
            ],
            6,
        )
        .unwrap();
        let y = a.parse_elem("y").unwrap();
        let ddb = a.apply(Differential::Del, &a.apply(Differential::Delbar, &y));
        assert_eq!(a.format_elem(&ddb), "x^3");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            free_cbba(&[GeneratorSpec::new("x", 1, 1, "x", "0")], 4),
            Err(HirschError::Degree(_))
        ));
        assert!(matches!(
            free_cbba(&[GeneratorSpec::new("x", 0, 0, "0", "0")], 4),
            Err(HirschError::Degree(_))
        ));
        assert!(matches!(
            free_cbba(&[GeneratorSpec::new("x", 1, 0, "0", "q")], 4),
            Err(HirschError::Parse(_))
        ));
        // ∂̄∂a + ∂∂̄a = z + z
        let err = free_cbba(
            &[
                GeneratorSpec::new("a", 0, 0, "0", "0"),
                GeneratorSpec::new("b", 1, 0, "0", "z"),
                GeneratorSpec::new("c", 0, 1, "z", "0"),
                GeneratorSpec::new("z", 1, 1, "0", "0"),
            ],
            4,
        );
        assert!(err.is_err());
        let err = free_cbba(
            &[
                GeneratorSpec::new("u", 0, 1, "b", "0"),
                GeneratorSpec::new("b", 1, 1, "0", "z"),
                GeneratorSpec::new("z", 1, 2, "0", "0"),
            ],
            4,
        );
        assert!(matches!(err, Err(HirschError::DSquared { .. })));
    }

    #[test]
    fn maps_are_checked() {
        let a = free_cbba(&[GeneratorSpec::new("x", 1, 1, "0", "0")], 4).unwrap();
        let id = CbbaMap::identity(&a);
        assert_eq!(id.matrix(), &RatMatrix::identity(a.dim()));
        let b = free_cbba(&[GeneratorSpec::new("x", 1, 1, "0", "0")], 6).unwrap();
        // x^3 = 0 in the source but not in the target.
        assert!(CbbaMap::new(a.clone(), b.clone(), &[b.parse_elem("x").unwrap()]).is_err());
        assert!(CbbaMap::new(b.clone(), a.clone(), &[a.parse_elem("x").unwrap()]).is_ok());
        assert!(CbbaMap::new(b, a.clone(), &[a.parse_elem("x^2").unwrap()]).is_err());
    }

    #[test]
    fn wedge_powers() {
        let d = dot(bd(1, 0));
        assert!(wedge_power(&d, 2).is_zero());
        let e = dot(bd(1, 1));
        assert_eq!(wedge_power(&e, 3).dims(), &BTreeMap::from([(bd(3, 3), 1)]));
        let a1 = make_zigzag(&ZigZagDescriptor::new(Family::A, 1, bd(1, 1)).unwrap()).unwrap();
        let w = wedge_power(&a1, 2);
        assert!(w.validate().is_empty());
        // y², y∂y, y∂̄y, ∂y∂̄y; the odd generators square to zero
        assert_eq!(w.total_dim(), 4);
        let c = connectivity(&a1).unwrap();
        let Connectivity::Finite(k) = c else { panic!() };
        assert!(connectivity(&w).unwrap() >= Connectivity::Finite(2 * (k + 1) - 1));
    }
}
