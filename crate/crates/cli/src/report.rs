use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use bicx::bicomplex::Bidegree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub p: i32,
    pub q: i32,
    pub dim: usize,
}

/// What a verb produced. Nothing in here depends on time or on the
/// thread schedule, so equal inputs give byte-equal output.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub verb: String,
    pub status: Status,
    pub tables: BTreeMap<String, Vec<Cell>>,
    pub values: BTreeMap<String, serde_json::Value>,
    pub artifacts: Vec<String>,
    pub log: String,
}

impl Report {
    pub fn new(verb: &str) -> Self {
        Report {
            verb: verb.to_string(),
            status: Status::Ok,
            tables: BTreeMap::new(),
            values: BTreeMap::new(),
            artifacts: Vec::new(),
            log: String::new(),
        }
    }

    pub fn line(&mut self, text: impl AsRef<str>) {
        self.log.push_str(text.as_ref());
        self.log.push('\n');
    }

    pub fn fail(&mut self, why: impl AsRef<str>) {
        self.status = Status::Fail;
        self.line(format!("FAIL: {}", why.as_ref()));
    }

    pub fn value(&mut self, key: &str, v: impl Serialize) {
        self.values.insert(key.to_string(), serde_json::to_value(v).expect("serializable"));
    }

    /// Records a table and prints it as a grid over `frame` (plus the
    /// table's own support).
    pub fn table(&mut self, name: &str, dims: &BTreeMap<Bidegree, usize>, frame: Option<(Bidegree, Bidegree)>) {
        let cells = dims
            .iter()
            .filter(|(_, &d)| d > 0)
            .map(|(at, &dim)| Cell { p: at.p, q: at.q, dim })
            .collect();
        self.tables.insert(name.to_string(), cells);
        let text = grid(name, dims, frame);
        self.log.push_str(&text);
    }

    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

pub fn grid(name: &str, dims: &BTreeMap<Bidegree, usize>, frame: Option<(Bidegree, Bidegree)>) -> String {
    let total: usize = dims.values().sum();
    let mut out = format!("{name} (total {total})\n");
    let mut corners: Vec<Bidegree> = dims.iter().filter(|(_, &d)| d > 0).map(|(&at, _)| at).collect();
    if let Some((lo, hi)) = frame {
        corners.extend([lo, hi]);
    }
    if corners.is_empty() {
        out.push_str("  zero\n");
        return out;
    }
    let p0 = corners.iter().map(|b| b.p).min().unwrap();
    let p1 = corners.iter().map(|b| b.p).max().unwrap();
    let q0 = corners.iter().map(|b| b.q).min().unwrap();
    let q1 = corners.iter().map(|b| b.q).max().unwrap();
    let cell = |p: i32, q: i32| match dims.get(&Bidegree::new(p, q)) {
        Some(&d) if d > 0 => d.to_string(),
        _ => ".".to_string(),
    };
    let mut width = 3;
    for p in p0..=p1 {
        width = width.max(p.to_string().len() + 1);
        for q in q0..=q1 {
            width = width.max(cell(p, q).len() + 1);
        }
    }
    let label = (q0..=q1).map(|q| q.to_string().len()).max().unwrap().max(3);
    let _ = write!(out, "  {:>label$}", "q\\p");
    for p in p0..=p1 {
        let _ = write!(out, "{p:>width$}");
    }
    out.push('\n');
    for q in (q0..=q1).rev() {
        let _ = write!(out, "  {q:>label$}");
        for p in p0..=p1 {
            let _ = write!(out, "{:>width$}", cell(p, q));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_puts_q_upwards() {
        let dims = BTreeMap::from([(Bidegree::new(0, 0), 1), (Bidegree::new(1, 1), 2)]);
        let g = grid("BC", &dims, None);
        assert_eq!(g, "BC (total 3)\n  q\\p  0  1\n    1  .  2\n    0  1  .\n");
        assert_eq!(grid("A", &BTreeMap::new(), None), "A (total 0)\n  zero\n");
    }
}
