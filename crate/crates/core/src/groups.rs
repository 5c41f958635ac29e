//! Evaluable groups with marked generating sets, word-metric balls and the
//! hop/length metrics of a step relation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::metric::{bfs_hops, dijkstra, FiniteMetricSpace};
use crate::numeric::Real;

pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GroupError {
    #[error("node budget exhausted after {0} nodes")]
    BudgetExceeded(usize),
    #[error("element not found within radius {0}")]
    NotFoundWithinRadius(u32),
    #[error("step relation does not connect {0} and {1}")]
    NotConnected(String, String),
    #[error("generating sets do not generate each other: {0}")]
    GenerationFailure(String),
    #[error("bad group spec `{0}`")]
    BadSpec(String),
    #[error("unknown generator `{0}`")]
    UnknownLetter(String),
    #[error("generator list is not symmetric: inverse of `{0}` missing")]
    NotSymmetric(String),
    #[error("element does not belong to this group")]
    WrongFamily,
    #[error("ball cache: {0}")]
    Cache(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Family {
    FreeGroup(usize),
    FreeAbelian(usize),
    Heisenberg,
    BS1m(u32),
    Lamplighter(u32),
    SLnZ(usize),
    FiniteTable(String),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::FreeGroup(k) => write!(f, "free:{k}"),
            Family::FreeAbelian(n) => write!(f, "abelian:{n}"),
            Family::Heisenberg => write!(f, "heisenberg"),
            Family::BS1m(m) => write!(f, "bs:{m}"),
            Family::Lamplighter(n) => write!(f, "lamplighter:{n}"),
            Family::SLnZ(n) => write!(f, "sl:{n}"),
            Family::FiniteTable(name) => write!(f, "{name}"),
        }
    }
}

/// Group elements; each variant belongs to one family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Element {
    /// Freely reduced word; letter `i + 1` is generator `i`, `-(i + 1)` its inverse.
    Word(Vec<i32>),
    Vector(Vec<i64>),
    /// `(a, b, c)` stands for the unipotent matrix with entries a, b above and c in the corner.
    Heisenberg([i64; 3]),
    /// `(a, x)` with `x` in `Z[1/m]`.
    Affine(i64, BigRational),
    /// Finitely supported lamp configuration and cursor position.
    Lamp(BTreeMap<i64, u32>, i64),
    /// Row-major square integer matrix.
    Matrix(Vec<i64>),
    Table(usize),
}

/// Multiplication table of a finite group with element names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CayleyTable {
    pub name: String,
    pub names: Vec<String>,
    pub mul: Vec<Vec<usize>>,
    pub identity: usize,
}

impl CayleyTable {
    /// Dihedral group of order `2n`; element `i + n j` is `r^i s^j`.
    pub fn dihedral(n: usize) -> CayleyTable {
        assert!(n >= 1);
        let idx = |i: usize, j: usize| i % n + n * (j % 2);
        let mut mul = vec![vec![0; 2 * n]; 2 * n];
        for (a, row) in mul.iter_mut().enumerate() {
            let (i, j) = (a % n, a / n);
            for (b, cell) in row.iter_mut().enumerate() {
                let (k, l) = (b % n, b / n);
                let rot = if j == 0 { i + k } else { i + n - k };
                *cell = idx(rot, j + l);
            }
        }
        let names = (0..2 * n).map(|a| format!("r{}s{}", a % n, a / n)).collect();
        CayleyTable { name: format!("dihedral:{n}"), names, mul, identity: 0 }
    }

    pub fn order(&self) -> usize {
        self.names.len()
    }

    pub fn inverse(&self, a: usize) -> usize {
        (0..self.order()).find(|&b| self.mul[a][b] == self.identity).expect("table is a group")
    }
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub label: String,
    pub element: Element,
}

/// A concrete group with a marked symmetric generating list.
#[derive(Clone, Debug)]
pub struct GroupOracle {
    family: Family,
    generators: Vec<Generator>,
    table: Option<Arc<CayleyTable>>,
}

fn letter_label(i: usize, inverse: bool) -> String {
    if i < 26 {
        let c = (b'a' + i as u8) as char;
        if inverse {
            c.to_ascii_uppercase().to_string()
        } else {
            c.to_string()
        }
    } else if inverse {
        format!("X{i}")
    } else {
        format!("x{i}")
    }
}

fn unit_vector(n: usize, i: usize, sign: i64) -> Vec<i64> {
    let mut v = vec![0; n];
    v[i] = sign;
    v
}

fn identity_matrix(n: usize) -> Vec<i64> {
    let mut m = vec![0; n * n];
    for i in 0..n {
        m[i * n + i] = 1;
    }
    m
}

/// Elementary matrix `1 + sign * E_ij` (0-based indices).
pub fn elementary(n: usize, i: usize, j: usize, sign: i64) -> Vec<i64> {
    let mut m = identity_matrix(n);
    m[i * n + j] = sign;
    m
}

fn matrix_label(n: usize, i: usize, j: usize) -> String {
    if n < 10 {
        format!("{}{}", i + 1, j + 1)
    } else {
        format!("{}_{}", i + 1, j + 1)
    }
}

impl GroupOracle {
    pub fn free(k: usize) -> GroupOracle {
        assert!(k >= 1);
        let mut generators = Vec::new();
        for i in 0..k {
            let g = i as i32 + 1;
            generators.push(Generator { label: letter_label(i, false), element: Element::Word(vec![g]) });
            generators.push(Generator { label: letter_label(i, true), element: Element::Word(vec![-g]) });
        }
        GroupOracle { family: Family::FreeGroup(k), generators, table: None }
    }

    pub fn free_abelian(n: usize) -> GroupOracle {
        assert!(n >= 1);
        let mut generators = Vec::new();
        for i in 0..n {
            generators.push(Generator { label: letter_label(i, false), element: Element::Vector(unit_vector(n, i, 1)) });
            generators.push(Generator { label: letter_label(i, true), element: Element::Vector(unit_vector(n, i, -1)) });
        }
        GroupOracle { family: Family::FreeAbelian(n), generators, table: None }
    }

    /// Generators `s, t` and the central `u = s^-1 t^-1 s t`, with inverses `S, T, U`.
    pub fn heisenberg() -> GroupOracle {
        let g = |label: &str, v: [i64; 3]| Generator { label: label.into(), element: Element::Heisenberg(v) };
        let generators = vec![
            g("s", [1, 0, 0]),
            g("S", [-1, 0, 0]),
            g("t", [0, 1, 0]),
            g("T", [0, -1, 0]),
            g("u", [0, 0, 1]),
            g("U", [0, 0, -1]),
        ];
        GroupOracle { family: Family::Heisenberg, generators, table: None }
    }

    /// `BS(1, m)` as affine maps: `s = (0, 1)`, `t = (1, 0)`, so `t s t^-1 = s^m`.
    pub fn baumslag_solitar(m: u32) -> GroupOracle {
        assert!(m >= 2);
        let g = |label: &str, a: i64, x: i64| Generator {
            label: label.into(),
            element: Element::Affine(a, BigRational::from_integer(BigInt::from(x))),
        };
        let generators = vec![g("s", 0, 1), g("S", 0, -1), g("t", 1, 0), g("T", -1, 0)];
        GroupOracle { family: Family::BS1m(m), generators, table: None }
    }

    /// `Z/n wr Z` with cursor moves `t, T` and lamp toggles `a` (and `A` when n > 2).
    pub fn lamplighter(n: u32) -> GroupOracle {
        assert!(n >= 2);
        let mut generators = vec![
            Generator { label: "t".into(), element: Element::Lamp(BTreeMap::new(), 1) },
            Generator { label: "T".into(), element: Element::Lamp(BTreeMap::new(), -1) },
            Generator { label: "a".into(), element: Element::Lamp(BTreeMap::from([(0, 1)]), 0) },
        ];
        if n > 2 {
            generators.push(Generator { label: "A".into(), element: Element::Lamp(BTreeMap::from([(0, n - 1)]), 0) });
        }
        GroupOracle { family: Family::Lamplighter(n), generators, table: None }
    }

    /// `SL(n, Z)` generated by elementary matrices `e_ij` and their inverses `E_ij`.
    pub fn special_linear(n: usize) -> GroupOracle {
        assert!(n >= 2);
        let mut generators = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let l = matrix_label(n, i, j);
                    generators.push(Generator { label: format!("e{l}"), element: Element::Matrix(elementary(n, i, j, 1)) });
                    generators.push(Generator { label: format!("E{l}"), element: Element::Matrix(elementary(n, i, j, -1)) });
                }
            }
        }
        GroupOracle { family: Family::SLnZ(n), generators, table: None }
    }

    pub fn finite(table: CayleyTable, generators: Vec<(String, usize)>) -> Result<GroupOracle, GroupError> {
        let family = Family::FiniteTable(table.name.clone());
        let oracle = GroupOracle {
            family,
            generators: generators.into_iter().map(|(label, i)| Generator { label, element: Element::Table(i) }).collect(),
            table: Some(Arc::new(table)),
        };
        oracle.check_symmetric()?;
        Ok(oracle)
    }

    /// Dihedral group of order `2n` with rotation `r`, `R` and reflection `s`.
    pub fn dihedral(n: usize) -> GroupOracle {
        let table = CayleyTable::dihedral(n);
        let r = 1 % n;
        let rr = (n - 1) % n;
        Self::finite(table, vec![("r".into(), r), ("R".into(), rr), ("s".into(), n)]).expect("symmetric")
    }

    /// Parses `free:2`, `abelian:2`, `heisenberg`, `bs:2`, `lamplighter:2`, `sl:3`, `dihedral:4`.
    pub fn from_spec(spec: &str) -> Result<GroupOracle, GroupError> {
        let bad = || GroupError::BadSpec(spec.to_string());
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim().parse::<usize>().map_err(|_| bad())?)),
            None => (spec.trim(), None),
        };
        let need = |lo: usize| arg.filter(|&a| a >= lo).ok_or_else(bad);
        Ok(match name {
            "free" => Self::free(need(1)?),
            "abelian" | "free-abelian" | "z" => Self::free_abelian(need(1)?),
            "heisenberg" if arg.is_none() => Self::heisenberg(),
            "bs" => Self::baumslag_solitar(need(2)? as u32),
            "lamplighter" => Self::lamplighter(need(2)? as u32),
            "sl" => Self::special_linear(need(2)?),
            "dihedral" => Self::dihedral(need(1)?),
            _ => return Err(bad()),
        })
    }

    /// Replaces the marked generating list.
    pub fn with_generators(mut self, generators: Vec<(String, Element)>) -> Result<GroupOracle, GroupError> {
        for (_, e) in &generators {
            if !self.owns(e) {
                return Err(GroupError::WrongFamily);
            }
        }
        self.generators = generators.into_iter().map(|(label, element)| Generator { label, element }).collect();
        self.check_symmetric()?;
        Ok(self)
    }

    fn check_symmetric(&self) -> Result<(), GroupError> {
        if self.generators.is_empty() {
            return Err(GroupError::BadSpec("empty generating list".into()));
        }
        let keys: Vec<String> = self.generators.iter().map(|g| self.key(&g.element)).collect();
        for g in &self.generators {
            let inv = self.key(&self.inverse(&g.element));
            if !keys.contains(&inv) {
                return Err(GroupError::NotSymmetric(g.label.clone()));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn generator_labels(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.label.clone()).collect()
    }

    pub fn generator(&self, label: &str) -> Result<&Element, GroupError> {
        self.generators
            .iter()
            .find(|g| g.label == label)
            .map(|g| &g.element)
            .ok_or_else(|| GroupError::UnknownLetter(label.to_string()))
    }

    pub fn table(&self) -> Option<&CayleyTable> {
        self.table.as_deref()
    }

    fn owns(&self, e: &Element) -> bool {
        match (&self.family, e) {
            (Family::FreeGroup(k), Element::Word(w)) => w.iter().all(|&l| l != 0 && l.unsigned_abs() as usize <= *k),
            (Family::FreeAbelian(n), Element::Vector(v)) => v.len() == *n,
            (Family::Heisenberg, Element::Heisenberg(_)) => true,
            (Family::BS1m(_), Element::Affine(..)) => true,
            (Family::Lamplighter(n), Element::Lamp(f, _)) => f.values().all(|&v| v > 0 && v < *n),
            (Family::SLnZ(n), Element::Matrix(m)) => m.len() == n * n,
            (Family::FiniteTable(_), Element::Table(i)) => *i < self.table.as_ref().map_or(0, |t| t.order()),
            _ => false,
        }
    }

    pub fn identity(&self) -> Element {
        match &self.family {
            Family::FreeGroup(_) => Element::Word(Vec::new()),
            Family::FreeAbelian(n) => Element::Vector(vec![0; *n]),
            Family::Heisenberg => Element::Heisenberg([0; 3]),
            Family::BS1m(_) => Element::Affine(0, BigRational::zero()),
            Family::Lamplighter(_) => Element::Lamp(BTreeMap::new(), 0),
            Family::SLnZ(n) => Element::Matrix(identity_matrix(*n)),
            Family::FiniteTable(_) => Element::Table(self.table.as_ref().unwrap().identity),
        }
    }

    pub fn multiply(&self, g: &Element, h: &Element) -> Element {
        match (&self.family, g, h) {
            (Family::FreeGroup(_), Element::Word(a), Element::Word(b)) => {
                let mut w = a.clone();
                for &l in b {
                    if w.last() == Some(&-l) {
                        w.pop();
                    } else {
                        w.push(l);
                    }
                }
                Element::Word(w)
            }
            (Family::FreeAbelian(_), Element::Vector(a), Element::Vector(b)) => {
                Element::Vector(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (Family::Heisenberg, Element::Heisenberg([a, b, c]), Element::Heisenberg([x, y, z])) => {
                Element::Heisenberg([a + x, b + y, c + z + a * y])
            }
            (Family::BS1m(m), Element::Affine(a, x), Element::Affine(b, y)) => {
                Element::Affine(a + b, x + m_power(*m, *a) * y)
            }
            (Family::Lamplighter(n), Element::Lamp(f, p), Element::Lamp(g, q)) => {
                let mut out = f.clone();
                for (&pos, &v) in g {
                    let slot = out.entry(pos + p).or_insert(0);
                    *slot = (*slot + v) % n;
                    if *slot == 0 {
                        out.remove(&(pos + p));
                    }
                }
                Element::Lamp(out, p + q)
            }
            (Family::SLnZ(n), Element::Matrix(a), Element::Matrix(b)) => Element::Matrix(mat_mul(*n, a, b)),
            (Family::FiniteTable(_), Element::Table(a), Element::Table(b)) => {
                Element::Table(self.table.as_ref().unwrap().mul[*a][*b])
            }
            _ => panic!("element does not belong to {}", self.family),
        }
    }

    pub fn inverse(&self, g: &Element) -> Element {
        match (&self.family, g) {
            (Family::FreeGroup(_), Element::Word(w)) => Element::Word(w.iter().rev().map(|l| -l).collect()),
            (Family::FreeAbelian(_), Element::Vector(v)) => Element::Vector(v.iter().map(|x| -x).collect()),
            (Family::Heisenberg, Element::Heisenberg([a, b, c])) => Element::Heisenberg([-a, -b, a * b - c]),
            (Family::BS1m(m), Element::Affine(a, x)) => Element::Affine(-a, -(m_power(*m, -a) * x)),
            (Family::Lamplighter(n), Element::Lamp(f, p)) => {
                let g = f.iter().map(|(&pos, &v)| (pos - p, n - v)).collect();
                Element::Lamp(g, -p)
            }
            (Family::SLnZ(n), Element::Matrix(a)) => Element::Matrix(sl_inverse(*n, a)),
            (Family::FiniteTable(_), Element::Table(a)) => Element::Table(self.table.as_ref().unwrap().inverse(*a)),
            _ => panic!("element does not belong to {}", self.family),
        }
    }

    pub fn power(&self, g: &Element, n: i64) -> Element {
        let base = if n < 0 { self.inverse(g) } else { g.clone() };
        let mut result = self.identity();
        let mut square = base;
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                result = self.multiply(&result, &square);
            }
            k >>= 1;
            if k > 0 {
                square = self.multiply(&square, &square);
            }
        }
        result
    }

    /// Canonical key; equal keys iff equal elements.
    pub fn key(&self, g: &Element) -> String {
        match g {
            Element::Word(w) if w.is_empty() => "1".into(),
            Element::Word(w) => w
                .iter()
                .map(|&l| letter_label(l.unsigned_abs() as usize - 1, l < 0))
                .collect::<Vec<_>>()
                .join(if matches!(self.family, Family::FreeGroup(k) if k > 26) { "." } else { "" }),
            Element::Vector(v) => format!("({})", join(v)),
            Element::Heisenberg(v) => format!("({})", join(v)),
            Element::Affine(a, x) => {
                let Family::BS1m(m) = self.family else { panic!("affine element outside BS(1,m)") };
                let (num, e) = m_adic(m, x);
                format!("({a},{num},{e})")
            }
            Element::Lamp(f, p) => {
                let lamps: Vec<String> = f.iter().map(|(k, v)| format!("{k}:{v}")).collect();
                format!("{{{}}}@{p}", lamps.join(","))
            }
            Element::Matrix(m) => {
                let n = (m.len() as f64).sqrt() as usize;
                let rows: Vec<String> = m.chunks(n).map(|r| format!("[{}]", join(r))).collect();
                format!("[{}]", rows.join(","))
            }
            Element::Table(i) => self.table.as_ref().unwrap().names[*i].clone(),
        }
    }

    pub fn is_identity(&self, g: &Element) -> bool {
        self.key(g) == self.key(&self.identity())
    }

    /// Evaluates a word of `(generator label, exponent)` pairs.
    pub fn evaluate<S: AsRef<str>>(&self, word: &[(S, i64)]) -> Result<Element, GroupError> {
        let mut acc = self.identity();
        for (label, exp) in word {
            let g = self.generator(label.as_ref())?;
            acc = self.multiply(&acc, &self.power(g, *exp));
        }
        Ok(acc)
    }

    /// Parses words such as `u^4`, `s t S` or `s*t^-2`; `1` and the empty
    /// string denote the identity.
    pub fn parse_word(&self, text: &str) -> Result<Element, GroupError> {
        let mut word = Vec::new();
        for token in text.split(|c: char| c.is_whitespace() || c == '*' || c == '.').filter(|t| !t.is_empty()) {
            if token == "1" || token == "e" && self.generator("e").is_err() {
                continue;
            }
            let (label, exp) = match token.split_once('^') {
                Some((l, e)) => (l, e.parse::<i64>().map_err(|_| GroupError::UnknownLetter(token.to_string()))?),
                None => (token, 1),
            };
            word.push((label.to_string(), exp));
        }
        self.evaluate(&word)
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn m_power(m: u32, a: i64) -> BigRational {
    let base = BigInt::from(m).pow(a.unsigned_abs() as u32);
    if a >= 0 {
        BigRational::from_integer(base)
    } else {
        BigRational::new(BigInt::one(), base)
    }
}

/// Writes `x = num / m^e` with the least `e >= 0`.
fn m_adic(m: u32, x: &BigRational) -> (BigInt, u32) {
    let mut e = 0u32;
    let mut scaled = x.clone();
    let m_big = BigRational::from_integer(BigInt::from(m));
    while !scaled.is_integer() {
        scaled *= &m_big;
        e += 1;
        assert!(e < 4096, "denominator is not a power of the base");
    }
    (scaled.to_integer(), e)
}

fn mat_mul(n: usize, a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut out = vec![0i64; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0 {
                continue;
            }
            for j in 0..n {
                let t = aik.checked_mul(b[k * n + j]).expect("SL(n,Z) entry overflow");
                out[i * n + j] = out[i * n + j].checked_add(t).expect("SL(n,Z) entry overflow");
            }
        }
    }
    out
}

/// Inverse of a determinant-one integer matrix via the adjugate.
fn sl_inverse(n: usize, a: &[i64]) -> Vec<i64> {
    if n == 1 {
        return vec![1];
    }
    let mut inv = vec![0i64; n * n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<i64> = (0..n)
                .filter(|&r| r != j)
                .flat_map(|r| (0..n).filter(move |&c| c != i).map(move |c| (r, c)))
                .map(|(r, c)| a[r * n + c])
                .collect();
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            inv[i * n + j] = sign * det(n - 1, &minor);
        }
    }
    inv
}

fn det(n: usize, a: &[i64]) -> i64 {
    match n {
        0 => 1,
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => {
            let mut total = 0i64;
            for c in 0..n {
                if a[c] == 0 {
                    continue;
                }
                let minor: Vec<i64> =
                    (1..n).flat_map(|r| (0..n).filter(move |&k| k != c).map(move |k| (r, k))).map(|(r, k)| a[r * n + k]).collect();
                let sign = if c % 2 == 0 { 1 } else { -1 };
                total += sign * a[c] * det(n - 1, &minor);
            }
            total
        }
    }
}

/// Breadth-first word-metric ball with parent pointers.
#[derive(Clone, Debug)]
pub struct BallTable {
    family: String,
    generators: Vec<String>,
    radius: u32,
    keys: Vec<String>,
    lens: Vec<u32>,
    parents: Vec<Option<usize>>,
    letters: Vec<Option<usize>>,
    elements: Vec<Element>,
    index: HashMap<String, usize>,
    level_starts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    family: String,
    generators: Vec<String>,
    radius: u32,
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    len: u32,
    parent: Option<String>,
    letter: Option<String>,
}

impl BallTable {
    fn seed(oracle: &GroupOracle) -> BallTable {
        let e = oracle.identity();
        let key = oracle.key(&e);
        BallTable {
            family: oracle.family().to_string(),
            generators: oracle.generator_labels(),
            radius: 0,
            keys: vec![key.clone()],
            lens: vec![0],
            parents: vec![None],
            letters: vec![None],
            elements: vec![e],
            index: HashMap::from([(key, 0)]),
            level_starts: vec![0],
        }
    }

    /// Ball of the given radius, or `BudgetExceeded` once more than
    /// `node_budget` elements have been seen.
    pub fn build(oracle: &GroupOracle, radius: u32, node_budget: usize) -> Result<BallTable, GroupError> {
        let mut table = Self::seed(oracle);
        table.grow(oracle, radius, node_budget)?;
        Ok(table)
    }

    /// Extends complete levels up to `radius`. On budget exhaustion the
    /// partial level is dropped and the table stays valid at its last
    /// complete radius.
    pub fn grow(&mut self, oracle: &GroupOracle, radius: u32, node_budget: usize) -> Result<(), GroupError> {
        if self.len() > node_budget {
            return Err(GroupError::BudgetExceeded(self.len()));
        }
        while self.radius < radius {
            let start = self.level_starts[self.radius as usize];
            let end = self.keys.len();
            let mut fresh: Vec<(String, Element, usize, usize)> = Vec::new();
            let mut fresh_index: HashMap<String, ()> = HashMap::new();
            for parent in start..end {
                for (li, gen) in oracle.generators().iter().enumerate() {
                    let h = oracle.multiply(&self.elements[parent], &gen.element);
                    let key = oracle.key(&h);
                    if self.index.contains_key(&key) || fresh_index.contains_key(&key) {
                        continue;
                    }
                    fresh_index.insert(key.clone(), ());
                    fresh.push((key, h, parent, li));
                    if end + fresh.len() > node_budget {
                        return Err(GroupError::BudgetExceeded(end + fresh.len()));
                    }
                }
            }
            fresh.sort_by(|a, b| a.0.cmp(&b.0));
            self.radius += 1;
            self.level_starts.push(end);
            for (key, h, parent, li) in fresh {
                self.index.insert(key.clone(), self.keys.len());
                self.keys.push(key);
                self.lens.push(self.radius);
                self.parents.push(Some(parent));
                self.letters.push(Some(li));
                self.elements.push(h);
            }
        }
        Ok(())
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn length_of_index(&self, i: usize) -> u32 {
        self.lens[i]
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn length(&self, key: &str) -> Option<u32> {
        self.index_of(key).map(|i| self.lens[i])
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parents[i]
    }

    pub fn letter(&self, i: usize) -> Option<&str> {
        self.letters[i].map(|l| self.generators[l].as_str())
    }

    /// A geodesic word for the entry, as generator labels.
    pub fn geodesic(&self, mut i: usize) -> Vec<String> {
        let mut word = Vec::new();
        while let (Some(p), Some(l)) = (self.parents[i], self.letters[i]) {
            word.push(self.generators[l].clone());
            i = p;
        }
        word.reverse();
        word
    }

    /// `|B(r)|` for `r = 0..=radius`.
    pub fn sphere_counts(&self) -> Vec<u64> {
        let mut counts: Vec<u64> = self
            .level_starts
            .windows(2)
            .map(|w| (w[1] - w[0]) as u64)
            .collect();
        counts.push((self.keys.len() - self.level_starts.last().copied().unwrap_or(0)) as u64);
        counts
    }

    pub fn ball_sizes(&self) -> Vec<u64> {
        self.sphere_counts()
            .into_iter()
            .scan(0u64, |acc, s| {
                *acc += s;
                Some(*acc)
            })
            .collect()
    }

    /// Restriction to entries of length `<= r`.
    pub fn truncate(&self, r: u32) -> BallTable {
        if r >= self.radius {
            return self.clone();
        }
        let end = self.level_starts[r as usize + 1];
        BallTable {
            family: self.family.clone(),
            generators: self.generators.clone(),
            radius: r,
            keys: self.keys[..end].to_vec(),
            lens: self.lens[..end].to_vec(),
            parents: self.parents[..end].to_vec(),
            letters: self.letters[..end].to_vec(),
            elements: self.elements[..end].to_vec(),
            index: self.keys[..end].iter().enumerate().map(|(i, k)| (k.clone(), i)).collect(),
            level_starts: self.level_starts[..=r as usize].to_vec(),
        }
    }

    /// JSON Lines: a header, then one record per element in `(len, key)` order.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&CacheHeader {
            family: self.family.clone(),
            generators: self.generators.clone(),
            radius: self.radius,
        })
        .unwrap();
        out.push('\n');
        for i in 0..self.len() {
            let rec = CacheRecord {
                key: self.keys[i].clone(),
                len: self.lens[i],
                parent: self.parents[i].map(|p| self.keys[p].clone()),
                letter: self.letters[i].map(|l| self.generators[l].clone()),
            };
            out.push_str(&serde_json::to_string(&rec).unwrap());
            out.push('\n');
        }
        out
    }

    /// Rebuilds a table by replaying parent pointers through the oracle;
    /// every replayed key must match its record.
    pub fn from_jsonl(oracle: &GroupOracle, text: &str) -> Result<BallTable, GroupError> {
        let cache = |m: String| GroupError::Cache(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: CacheHeader = serde_json::from_str(lines.next().ok_or_else(|| cache("empty file".into()))?)
            .map_err(|e| cache(e.to_string()))?;
        if header.family != oracle.family().to_string() || header.generators != oracle.generator_labels() {
            return Err(cache(format!("cache is for {} {:?}", header.family, header.generators)));
        }
        let mut table = Self::seed(oracle);
        table.keys.clear();
        table.lens.clear();
        table.parents.clear();
        table.letters.clear();
        table.elements.clear();
        table.index.clear();
        table.level_starts.clear();
        for line in lines {
            let rec: CacheRecord = serde_json::from_str(line).map_err(|e| cache(e.to_string()))?;
            let (element, parent, letter) = match (&rec.parent, &rec.letter) {
                (None, None) => (oracle.identity(), None, None),
                (Some(p), Some(l)) => {
                    let pi = table.index_of(p).ok_or_else(|| cache(format!("parent {p} precedes no record")))?;
                    let li = header.generators.iter().position(|g| g == l).ok_or_else(|| cache(format!("unknown letter {l}")))?;
                    if table.lens[pi] + 1 != rec.len {
                        return Err(cache(format!("length of {} inconsistent with parent", rec.key)));
                    }
                    (oracle.multiply(&table.elements[pi], &oracle.generators()[li].element), Some(pi), Some(li))
                }
                _ => return Err(cache("parent and letter must both be set".into())),
            };
            if oracle.key(&element) != rec.key {
                return Err(cache(format!("record {} does not replay", rec.key)));
            }
            let expected_len = table.level_starts.len() as u32;
            if rec.len == expected_len {
                table.level_starts.push(table.keys.len());
            } else if rec.len + 1 != expected_len {
                return Err(cache("records not sorted by length".into()));
            }
            table.index.insert(rec.key.clone(), table.keys.len());
            table.keys.push(rec.key);
            table.lens.push(rec.len);
            table.parents.push(parent);
            table.letters.push(letter);
            table.elements.push(element);
        }
        if table.level_starts.is_empty() || table.lens[0] != 0 {
            return Err(cache("missing identity record".into()));
        }
        table.radius = header.radius;
        if table.level_starts.len() as u32 > header.radius + 1 {
            return Err(cache("radius does not match records".into()));
        }
        // spheres beyond a finite group's diameter have no records
        while (table.level_starts.len() as u32) < header.radius + 1 {
            table.level_starts.push(table.keys.len());
        }
        Ok(table)
    }
}

pub fn word_ball(oracle: &GroupOracle, radius: u32, node_budget: usize) -> Result<BallTable, GroupError> {
    BallTable::build(oracle, radius, node_budget)
}

/// Word-length evaluator that keeps and extends one ball table.
pub struct WordLength<'a> {
    oracle: &'a GroupOracle,
    table: BallTable,
}

impl<'a> WordLength<'a> {
    pub fn new(oracle: &'a GroupOracle) -> Self {
        WordLength { oracle, table: BallTable::seed(oracle) }
    }

    pub fn from_table(oracle: &'a GroupOracle, table: BallTable) -> Self {
        WordLength { oracle, table }
    }

    pub fn table(&self) -> &BallTable {
        &self.table
    }

    /// Exact `l_S(g)` if it is at most `max_radius`.
    pub fn length(&mut self, g: &Element, max_radius: u32, node_budget: usize) -> Result<u32, GroupError> {
        let key = self.oracle.key(g);
        loop {
            if let Some(l) = self.table.length(&key) {
                return Ok(l);
            }
            if self.table.radius() >= max_radius {
                return Err(GroupError::NotFoundWithinRadius(max_radius));
            }
            let next = self.table.radius() + 1;
            self.table.grow(self.oracle, next, node_budget)?;
        }
    }
}

pub fn word_length(oracle: &GroupOracle, g: &Element, max_radius: u32, node_budget: usize) -> Result<u32, GroupError> {
    WordLength::new(oracle).length(g, max_radius, node_budget)
}

/// `(B(radius), d_S)` with canonical keys as point ids.
pub fn ball_metric_space(oracle: &GroupOracle, radius: u32, node_budget: usize) -> Result<FiniteMetricSpace, GroupError> {
    let big = BallTable::build(oracle, 2 * radius, node_budget)?;
    Ok(ball_metric_space_from(oracle, &big, radius))
}

/// Uses a table of radius at least `2 * radius`.
pub fn ball_metric_space_from(oracle: &GroupOracle, big: &BallTable, radius: u32) -> FiniteMetricSpace {
    assert!(big.radius() >= 2 * radius, "table too small for the ball metric");
    let ball = big.truncate(radius);
    let inverses: Vec<Element> = ball.elements().iter().map(|g| oracle.inverse(g)).collect();
    FiniteMetricSpace::from_fn(format!("{}/B({radius})", oracle.family()), ball.keys().to_vec(), |i, j| {
        let h = oracle.multiply(&inverses[i], &ball.elements()[j]);
        let len = big.length(&oracle.key(&h)).expect("d(g,h) <= 2r");
        Real::int(len as i64)
    })
}

/// `(n, l_S(z^n))` for `n = 0..=n_max`; `None` where the element lies
/// beyond the explored radius.
pub fn distortion_profile(
    oracle: &GroupOracle,
    z: &Element,
    n_max: u32,
    max_radius: u32,
    node_budget: usize,
) -> Vec<(u32, Option<u32>)> {
    let mut table = BallTable::seed(oracle);
    let _ = table.grow(oracle, max_radius, node_budget);
    let mut out = Vec::with_capacity(n_max as usize + 1);
    let mut zn = oracle.identity();
    for n in 0..=n_max {
        out.push((n, table.length(&oracle.key(&zn))));
        zn = oracle.multiply(&zn, z);
    }
    out
}

/// Symmetric relation `E` on a finite space; the diagonal is implicit.
#[derive(Clone, Debug)]
pub struct StepRelation {
    base: FiniteMetricSpace,
    adjacency: Vec<Vec<usize>>,
}

impl StepRelation {
    pub fn new(base: FiniteMetricSpace, pairs: &[(usize, usize)]) -> Result<StepRelation, GroupError> {
        let n = base.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in pairs {
            if a != b && !adjacency[a].contains(&b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        let rel = StepRelation { base, adjacency };
        if n > 0 {
            let hops = bfs_hops(&rel.adjacency, 0);
            if let Some(t) = hops.iter().position(Option::is_none) {
                return Err(GroupError::NotConnected(rel.base.point(0).to_string(), rel.base.point(t).to_string()));
            }
        }
        Ok(rel)
    }

    /// All pairs at distance at most `radius`.
    pub fn within(base: FiniteMetricSpace, radius: Real) -> Result<StepRelation, GroupError> {
        let n = base.len();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| base.d(i, j).le_tol(&radius))
            .collect();
        Self::new(base, &pairs)
    }

    pub fn base(&self) -> &FiniteMetricSpace {
        &self.base
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        a == b || self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.adjacency.len())
            .flat_map(|a| self.adjacency[a].iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
            .collect()
    }

    /// `B(x, c) ⊂ E(x) ⊂ B(x, C)` for every point.
    pub fn is_controlled(&self, c: Real, big_c: Real) -> bool {
        let n = self.base.len();
        (0..n).all(|a| {
            (0..n).all(|b| {
                let d = self.base.d(a, b);
                let inside = self.contains(a, b);
                (!d.le_tol(&c) || inside) && (!inside || d.le_tol(&big_c))
            })
        })
    }

    /// Hop-count metric `nu_E`.
    pub fn nu_metric(&self) -> FiniteMetricSpace {
        let n = self.base.len();
        let rows: Vec<Vec<Option<usize>>> = (0..n).map(|s| bfs_hops(&self.adjacency, s)).collect();
        FiniteMetricSpace::from_fn(format!("{}/nu", self.base.label()), self.base.points().to_vec(), |i, j| {
            Real::int(rows[i][j].expect("connected") as i64)
        })
    }

    /// Length metric `delta_{E,d}`: shortest `E`-path weighted by `d`.
    pub fn delta_metric(&self) -> FiniteMetricSpace {
        let n = self.base.len();
        let weighted: Vec<Vec<(usize, Real)>> = (0..n)
            .map(|a| self.adjacency[a].iter().map(|&b| (b, self.base.d(a, b))).collect())
            .collect();
        let rows: Vec<Vec<Option<Real>>> = (0..n).map(|s| dijkstra(&weighted, s)).collect();
        FiniteMetricSpace::from_fn(format!("{}/delta", self.base.label()), self.base.points().to_vec(), |i, j| {
            rows[i][j].expect("connected")
        })
    }
}

/// Empirical bilipschitz constants between the word metrics of two
/// generating sets of the same group, on the `gens1` ball of `radius`.
pub fn bilipschitz_constants(
    g1: &GroupOracle,
    g2: &GroupOracle,
    radius: u32,
    node_budget: usize,
) -> Result<(Rational64, Rational64), GroupError> {
    if g1.family() != g2.family() {
        return Err(GroupError::WrongFamily);
    }
    let reach = |from: &GroupOracle, to: &GroupOracle| -> Result<u32, GroupError> {
        let mut wl = WordLength::new(to);
        let mut worst = 0;
        for g in from.generators() {
            match wl.length(&g.element, radius.max(1), node_budget) {
                Ok(l) => worst = worst.max(l),
                Err(GroupError::NotFoundWithinRadius(_)) => {
                    return Err(GroupError::GenerationFailure(format!("{} not reached", g.label)))
                }
                Err(e) => return Err(e),
            }
        }
        Ok(worst)
    };
    let stretch = reach(g1, g2)?;
    reach(g2, g1)?;
    let b1 = BallTable::build(g1, radius, node_budget)?;
    let b2 = BallTable::build(g2, radius * stretch, node_budget)?;
    let mut lo: Option<Rational64> = None;
    let mut hi: Option<Rational64> = None;
    for (i, g) in b1.elements().iter().enumerate().skip(1) {
        let l1 = b1.length_of_index(i) as i64;
        let l2 = b2.length(&g2.key(g)).expect("within stretched radius") as i64;
        let q = Rational64::new(l2, l1);
        lo = Some(lo.map_or(q, |x| x.min(q)));
        hi = Some(hi.map_or(q, |x| x.max(q)));
    }
    let one = Rational64::from_integer(1);
    Ok((lo.unwrap_or(one), hi.unwrap_or(one)))
}

impl fmt::Display for GroupOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <{}>", self.family, self.generator_labels().join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_axioms_on_generators() {
        for spec in ["free:2", "abelian:3", "heisenberg", "bs:2", "bs:3", "lamplighter:2", "lamplighter:3", "sl:3", "dihedral:4"] {
            let g = GroupOracle::from_spec(spec).unwrap();
            let e = g.identity();
            for a in g.generators() {
                assert!(g.is_identity(&g.multiply(&a.element, &g.inverse(&a.element))), "{spec}");
                assert_eq!(g.key(&g.multiply(&e, &a.element)), g.key(&a.element));
                for b in g.generators() {
                    for c in g.generators() {
                        let l = g.multiply(&g.multiply(&a.element, &b.element), &c.element);
                        let r = g.multiply(&a.element, &g.multiply(&b.element, &c.element));
                        assert_eq!(g.key(&l), g.key(&r), "{spec}");
                    }
                }
            }
        }
    }

    #[test]
    fn heisenberg_commutator() {
        let h = GroupOracle::heisenberg();
        let u = h.parse_word("S T s t").unwrap();
        assert_eq!(h.key(&u), "(0,0,1)");
    }

    #[test]
    fn baumslag_solitar_relation() {
        let g = GroupOracle::baumslag_solitar(2);
        let lhs = g.parse_word("t s T").unwrap();
        assert_eq!(g.key(&lhs), g.key(&g.parse_word("s^2").unwrap()));
        let half = g.parse_word("T s t").unwrap();
        assert_eq!(g.key(&half), "(0,1,1)");
    }

    #[test]
    fn ball_sizes_small() {
        assert_eq!(word_ball(&GroupOracle::free(2), 2, DEFAULT_BUDGET).unwrap().len(), 17);
        assert_eq!(word_ball(&GroupOracle::free_abelian(2), 2, DEFAULT_BUDGET).unwrap().len(), 13);
        assert_eq!(word_ball(&GroupOracle::heisenberg(), 0, DEFAULT_BUDGET).unwrap().len(), 1);
        assert_eq!(word_ball(&GroupOracle::dihedral(4), 10, DEFAULT_BUDGET).unwrap().len(), 8);
        assert_eq!(word_ball(&GroupOracle::free(2), 5, 50).unwrap_err(), GroupError::BudgetExceeded(51));
    }

    #[test]
    fn cache_round_trip() {
        let g = GroupOracle::lamplighter(2);
        let t = word_ball(&g, 4, DEFAULT_BUDGET).unwrap();
        let text = t.to_jsonl();
        let back = BallTable::from_jsonl(&g, &text).unwrap();
        assert_eq!(back.to_jsonl(), text);
        assert!(BallTable::from_jsonl(&GroupOracle::free(2), &text).is_err());
    }

    #[test]
    fn word_lengths() {
        let h = GroupOracle::heisenberg();
        let mut wl = WordLength::new(&h);
        assert_eq!(wl.length(&h.identity(), 5, DEFAULT_BUDGET), Ok(0));
        let s3 = h.parse_word("s^3").unwrap();
        assert_eq!(wl.length(&s3, 5, DEFAULT_BUDGET), Ok(3));
        let far = h.parse_word("s^9").unwrap();
        assert_eq!(wl.length(&far, 5, DEFAULT_BUDGET), Err(GroupError::NotFoundWithinRadius(5)));
    }

    #[test]
    fn sl_inverse_is_inverse() {
        let g = GroupOracle::special_linear(4);
        let w = g.parse_word("e12 e23 E34 e41 e13^3").unwrap();
        assert!(g.is_identity(&g.multiply(&w, &g.inverse(&w))));
    }

    #[test]
    fn step_relation_on_line() {
        let x = FiniteMetricSpace::line(&[0, 1, 2, 3]);
        let rel = StepRelation::within(x, Real::int(1)).unwrap();
        assert_eq!(rel.nu_metric().d(0, 3), Real::int(3));
        assert_eq!(rel.delta_metric().d(0, 3), Real::int(3));
        let far = FiniteMetricSpace::line(&[0, 5]);
        assert!(matches!(StepRelation::within(far, Real::int(1)), Err(GroupError::NotConnected(..))));
    }
}
