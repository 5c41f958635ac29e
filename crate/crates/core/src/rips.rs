//! Rips 2-complexes, combinatorial loops, integral H1 certificates, bounded
//! contraction search and the circle rotation number.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet, VecDeque};

use num_integer::Integer;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::metric::{bfs_hops, FiniteMetricSpace, UnionFind};
use crate::numeric::{Real, TOLERANCE};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RipsError {
    #[error("loop is empty")]
    EmptyLoop,
    #[error("loop is not closed")]
    NotClosed,
    #[error("loop step {0} is not an edge of the complex")]
    LoopInvalid(usize),
    #[error("vertex index {0} out of range")]
    BadVertex(usize),
    #[error("move {0} cannot be applied")]
    BadMove(usize),
    #[error("integer overflow while reducing relator lattice")]
    Overflow,
    #[error("interleaving hypothesis fails at index {index}: {reason}")]
    HypothesisViolated { index: usize, reason: String },
    #[error("point {0} is not on the circle")]
    PointOffCircle(usize),
    #[error("bad fixture parameters: {0}")]
    BadParams(String),
}

/// Flag 2-complex of a finite space at scale `c`.
#[derive(Clone, Debug)]
pub struct Rips2Complex {
    c: Real,
    space: FiniteMetricSpace,
    edges: Vec<(usize, usize)>,
    triangles: Vec<(usize, usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    linked: Vec<bool>,
}

pub fn build_rips(space: &FiniteMetricSpace, c: Real) -> Rips2Complex {
    let n = space.len();
    let mut linked = vec![false; n * n];
    let mut adjacency = vec![Vec::new(); n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if space.d(i, j).le_tol(&c) {
                linked[i * n + j] = true;
                linked[j * n + i] = true;
                adjacency[i].push(j);
                adjacency[j].push(i);
                edges.push((i, j));
            }
        }
    }
    let mut triangles = Vec::new();
    for &(i, j) in &edges {
        for &k in &adjacency[j] {
            if k > j && linked[i * n + k] {
                triangles.push((i, j, k));
            }
        }
    }
    triangles.sort_unstable();
    Rips2Complex { c, space: space.clone(), edges, triangles, adjacency, linked }
}

impl Rips2Complex {
    pub fn scale(&self) -> Real {
        self.c
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    pub fn vertex_count(&self) -> usize {
        self.space.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn triangles(&self) -> &[(usize, usize, usize)] {
        &self.triangles
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    /// Adjacent or equal.
    #[inline]
    pub fn joined(&self, a: usize, b: usize) -> bool {
        a == b || self.linked[a * self.space.len() + b]
    }

    pub fn has_triangle(&self, a: usize, b: usize, c: usize) -> bool {
        self.joined(a, b) && self.joined(b, c) && self.joined(a, c)
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut uf = UnionFind::new(self.space.len());
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        uf.blocks()
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    pub fn check_loop(&self, lp: &[usize]) -> Result<(), RipsError> {
        let Some((&first, _)) = lp.split_first() else { return Err(RipsError::EmptyLoop) };
        if let Some(&v) = lp.iter().find(|&&v| v >= self.space.len()) {
            return Err(RipsError::BadVertex(v));
        }
        if lp.last() != Some(&first) {
            return Err(RipsError::NotClosed);
        }
        self.check_path(lp)
    }

    pub fn check_path(&self, path: &[usize]) -> Result<(), RipsError> {
        for (i, w) in path.windows(2).enumerate() {
            if !self.joined(w[0], w[1]) {
                return Err(RipsError::LoopInvalid(i));
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> ComplexDump {
        ComplexDump {
            c: self.c,
            vertices: self.space.points().to_vec(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            triangles: self.triangles.iter().map(|&(a, b, c)| [a, b, c]).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComplexDump {
    pub c: Real,
    pub vertices: Vec<String>,
    pub edges: Vec<[usize; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

type SparseRow = Vec<(usize, i128)>;

/// Spanning forest, non-tree edge coordinates and an echelon basis of the
/// triangle relator lattice.
#[derive(Clone, Debug)]
pub struct Pi1Data {
    parent: Vec<Option<usize>>,
    generator_of: HashMap<(usize, usize), usize>,
    generators: Vec<(usize, usize)>,
    basis: BTreeMap<usize, SparseRow>,
}

/// Class of a loop in `H1` of the complex.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct H1Class {
    /// Signed count per non-tree edge `(a, b)` with `a < b`.
    pub raw: Vec<((usize, usize), i64)>,
    /// Remainder after reduction by the relator lattice; empty iff zero.
    pub residual: Vec<((usize, usize), i64)>,
    pub is_zero: bool,
}

fn add_scaled(a: &SparseRow, k: i128, b: &SparseRow) -> Result<SparseRow, RipsError> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len() || (i < a.len() && a[i].0 < b[j].0);
        let take_b = i >= a.len() || (j < b.len() && b[j].0 < a[i].0);
        if take_a {
            out.push(a[i]);
            i += 1;
        } else if take_b {
            let v = b[j].1.checked_mul(k).ok_or(RipsError::Overflow)?;
            out.push((b[j].0, v));
            j += 1;
        } else {
            let v = b[j].1.checked_mul(k).and_then(|v| v.checked_add(a[i].1)).ok_or(RipsError::Overflow)?;
            if v != 0 {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    Ok(out)
}

fn combine(x: i128, a: &SparseRow, y: i128, b: &SparseRow) -> Result<SparseRow, RipsError> {
    let scaled: SparseRow = a
        .iter()
        .map(|&(c, v)| v.checked_mul(x).map(|v| (c, v)))
        .collect::<Option<_>>()
        .ok_or(RipsError::Overflow)?;
    add_scaled(&scaled, y, b)
}

fn normalize_sign(row: &mut SparseRow) {
    if row.first().is_some_and(|&(_, v)| v < 0) {
        for e in row.iter_mut() {
            e.1 = -e.1;
        }
    }
}

impl Pi1Data {
    pub fn new(complex: &Rips2Complex) -> Result<Pi1Data, RipsError> {
        let n = complex.vertex_count();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut tree_edges = HashSet::new();
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut queue = VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                for &w in complex.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        parent[w] = Some(v);
                        tree_edges.insert((v.min(w), v.max(w)));
                        queue.push_back(w);
                    }
                }
            }
        }
        let generators: Vec<(usize, usize)> =
            complex.edges().iter().copied().filter(|e| !tree_edges.contains(e)).collect();
        let generator_of = generators.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut data = Pi1Data { parent, generator_of, generators, basis: BTreeMap::new() };
        for &(a, b, c) in complex.triangles() {
            let row = data.chain_row(&[a, b, c, a]);
            if !row.is_empty() {
                data.insert_relator(row)?;
            }
        }
        Ok(data)
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub fn relator_rank(&self) -> usize {
        self.basis.len()
    }

    /// Rank of the free part of H1.
    pub fn betti_1(&self) -> usize {
        self.generators.len() - self.basis.len()
    }

    fn chain_row(&self, path: &[usize]) -> SparseRow {
        let mut acc: BTreeMap<usize, i128> = BTreeMap::new();
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if let Some(&g) = self.generator_of.get(&key) {
                *acc.entry(g).or_insert(0) += if a < b { 1 } else { -1 };
            }
        }
        acc.into_iter().filter(|&(_, v)| v != 0).collect()
    }

    fn insert_relator(&mut self, mut row: SparseRow) -> Result<(), RipsError> {
        while let Some(&(p, a)) = row.first() {
            let Some(b) = self.basis.get(&p) else {
                normalize_sign(&mut row);
                self.basis.insert(p, row);
                return Ok(());
            };
            let bp = b[0].1;
            if a % bp == 0 {
                row = add_scaled(&row, -(a / bp), b)?;
            } else {
                let e = bp.extended_gcd(&a);
                let g = e.gcd;
                let mut pivot = combine(e.x, b, e.y, &row)?;
                let rest = combine(a / g, b, -(bp / g), &row)?;
                normalize_sign(&mut pivot);
                self.basis.insert(p, pivot);
                row = rest;
            }
        }
        Ok(())
    }

    fn reduce(&self, mut row: SparseRow) -> Result<SparseRow, RipsError> {
        let mut residual = Vec::new();
        while let Some(&(p, a)) = row.first() {
            match self.basis.get(&p) {
                Some(b) => {
                    let bp = b[0].1;
                    let q = a.div_euclid(bp);
                    row = add_scaled(&row, -q, b)?;
                    if let Some(&(c, v)) = row.first() {
                        if c == p {
                            residual.push((c, v));
                            row.remove(0);
                        }
                    }
                }
                None => {
                    residual.push((p, a));
                    row.remove(0);
                }
            }
        }
        Ok(residual)
    }

    fn labelled(&self, row: &SparseRow) -> Vec<((usize, usize), i64)> {
        row.iter().map(|&(g, v)| (self.generators[g], v as i64)).collect()
    }

    pub fn class_of(&self, lp: &[usize]) -> Result<H1Class, RipsError> {
        let raw = self.chain_row(lp);
        let residual = self.reduce(raw.clone())?;
        Ok(H1Class { raw: self.labelled(&raw), is_zero: residual.is_empty(), residual: self.labelled(&residual) })
    }

    /// Tree path from `v` up to its root, `v` first.
    fn path_to_root(&self, mut v: usize) -> Vec<usize> {
        let mut out = vec![v];
        while let Some(p) = self.parent[v] {
            out.push(p);
            v = p;
        }
        out
    }

    /// Loop through the tree closed by the non-tree edge `g`.
    pub fn fundamental_cycle(&self, g: usize) -> Vec<usize> {
        let (a, b) = self.generators[g];
        let mut up_a = self.path_to_root(a);
        let mut up_b = self.path_to_root(b);
        while up_a.len() > 1 && up_b.len() > 1 && up_a[up_a.len() - 2] == up_b[up_b.len() - 2] {
            up_a.pop();
            up_b.pop();
        }
        let mut lp: Vec<usize> = up_a.into_iter().rev().collect();
        lp.extend(up_b);
        lp
    }

    /// Invariant factors of H1: free rank and torsion coefficients.
    pub fn invariants(&self) -> Result<(usize, Vec<i128>), RipsError> {
        let cols: Vec<usize> = {
            let mut c: Vec<usize> = self.basis.values().flat_map(|r| r.iter().map(|e| e.0)).collect();
            c.sort_unstable();
            c.dedup();
            c
        };
        let col_index: HashMap<usize, usize> = cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut m: Vec<Vec<i128>> = self
            .basis
            .values()
            .map(|r| {
                let mut dense = vec![0i128; cols.len()];
                for &(c, v) in r {
                    dense[col_index[&c]] = v;
                }
                dense
            })
            .collect();
        let diag = smith_diagonal(&mut m)?;
        let torsion = diag.into_iter().filter(|&d| d > 1).collect();
        Ok((self.betti_1(), torsion))
    }
}

/// Diagonal of the Smith normal form of a full-row-rank integer matrix.
fn smith_diagonal(m: &mut [Vec<i128>]) -> Result<Vec<i128>, RipsError> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut diag = Vec::new();
    for t in 0..rows.min(cols) {
        let Some((pr, pc)) = (t..rows)
            .flat_map(|r| (t..cols).map(move |c| (r, c)))
            .filter(|&(r, c)| m[r][c] != 0)
            .min_by_key(|&(r, c)| m[r][c].abs())
        else {
            break;
        };
        m.swap(t, pr);
        for row in m.iter_mut() {
            row.swap(t, pc);
        }
        loop {
            let mut clean = true;
            for r in (t + 1)..rows {
                if m[r][t] != 0 {
                    let q = m[r][t] / m[t][t];
                    for c in t..cols {
                        m[r][c] = m[r][c].checked_sub(q.checked_mul(m[t][c]).ok_or(RipsError::Overflow)?).ok_or(RipsError::Overflow)?;
                    }
                    if m[r][t] != 0 {
                        clean = false;
                        m.swap(t, r);
                    }
                }
            }
            for c in (t + 1)..cols {
                if m[t][c] != 0 {
                    let q = m[t][c] / m[t][t];
                    for row in m.iter_mut().skip(t) {
                        row[c] = row[c].checked_sub(q.checked_mul(row[t]).ok_or(RipsError::Overflow)?).ok_or(RipsError::Overflow)?;
                    }
                    if m[t][c] != 0 {
                        clean = false;
                        for row in m.iter_mut() {
                            row.swap(t, c);
                        }
                    }
                }
            }
            if clean {
                let p = m[t][t];
                let bad = ((t + 1)..rows).flat_map(|r| ((t + 1)..cols).map(move |c| (r, c))).find(|&(r, c)| m[r][c] % p != 0);
                match bad {
                    Some((r, _)) => {
                        for c in t..cols {
                            m[t][c] += m[r][c];
                        }
                    }
                    None => break,
                }
            }
        }
        diag.push(m[t][t].abs());
    }
    Ok(diag)
}

pub fn h1_class(complex: &Rips2Complex, lp: &[usize]) -> Result<H1Class, RipsError> {
    complex.check_loop(lp)?;
    Pi1Data::new(complex)?.class_of(lp)
}

/// Single-point insertion or deletion; interior positions only.
#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Move {
    Delete { at: usize },
    Insert { at: usize, vertex: usize },
}

impl Move {
    /// Applies the move if the result is still a path in the complex.
    pub fn apply(&self, complex: &Rips2Complex, path: &[usize]) -> Option<Vec<usize>> {
        let n = path.len();
        match *self {
            Move::Delete { at } => {
                if at == 0 || at + 1 >= n || !complex.joined(path[at - 1], path[at + 1]) {
                    return None;
                }
                let mut out = path.to_vec();
                out.remove(at);
                Some(out)
            }
            Move::Insert { at, vertex } => {
                if at == 0 || at >= n || vertex >= complex.vertex_count() {
                    return None;
                }
                if !complex.joined(path[at - 1], vertex) || !complex.joined(vertex, path[at]) {
                    return None;
                }
                let mut out = path.to_vec();
                out.insert(at, vertex);
                Some(out)
            }
        }
    }
}

pub fn replay(complex: &Rips2Complex, lp: &[usize], moves: &[Move]) -> Result<Vec<usize>, RipsError> {
    let mut cur = lp.to_vec();
    for (i, m) in moves.iter().enumerate() {
        cur = m.apply(complex, &cur).ok_or(RipsError::BadMove(i))?;
    }
    Ok(cur)
}

pub fn is_constant(lp: &[usize]) -> bool {
    lp.windows(2).all(|w| w[0] == w[1])
}

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Contracted { trace: Vec<Move> },
    NontrivialH1 { certificate: H1Class },
    Unknown { explored: usize },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Contracted { .. } => "contracted",
            Verdict::NontrivialH1 { .. } => "nontrivial_h1",
            Verdict::Unknown { .. } => "unknown",
        }
    }
}

type SearchNode = (Vec<usize>, Option<(usize, Move)>);

/// Three-valued contraction test: a nonzero H1 class is a sound no, a
/// replayable move trace is a sound yes, otherwise the budget ran out.
///
/// The search expands shortest loops first; insertions are allowed up to
/// two vertices beyond the starting length.
pub fn contract_loop(complex: &Rips2Complex, lp: &[usize], move_budget: usize) -> Result<Verdict, RipsError> {
    let data = Pi1Data::new(complex)?;
    contract_with(complex, &data, lp, move_budget)
}

pub fn contract_with(complex: &Rips2Complex, data: &Pi1Data, lp: &[usize], move_budget: usize) -> Result<Verdict, RipsError> {
    complex.check_loop(lp)?;
    if is_constant(lp) {
        return Ok(Verdict::Contracted { trace: Vec::new() });
    }
    let class = data.class_of(lp)?;
    if !class.is_zero {
        return Ok(Verdict::NontrivialH1 { certificate: class });
    }
    let cap = lp.len().max(3) + 2;
    let n = complex.vertex_count();
    // each node: the loop and the (parent, move) that produced it
    let mut nodes: Vec<SearchNode> = vec![(lp.to_vec(), None)];
    let mut seen: HashSet<Vec<usize>> = HashSet::from([lp.to_vec()]);
    let mut heap = BinaryHeap::from([Reverse((lp.len(), 0usize))]);
    let mut explored = 0;
    while let Some(Reverse((_, id))) = heap.pop() {
        if explored >= move_budget {
            return Ok(Verdict::Unknown { explored });
        }
        explored += 1;
        let cur = nodes[id].0.clone();
        let mut children: Vec<(Vec<usize>, Move)> = Vec::new();
        for at in 1..cur.len().saturating_sub(1) {
            let m = Move::Delete { at };
            if let Some(next) = m.apply(complex, &cur) {
                children.push((next, m));
            }
        }
        if cur.len() < cap {
            for at in 1..cur.len() {
                let (a, b) = (cur[at - 1], cur[at]);
                let candidates = complex.neighbors(a).iter().copied().chain(std::iter::once(a));
                for vertex in candidates.filter(|&v| v < n && complex.joined(v, b)) {
                    let m = Move::Insert { at, vertex };
                    if let Some(next) = m.apply(complex, &cur) {
                        children.push((next, m));
                    }
                }
            }
        }
        for (next, m) in children {
            if seen.contains(&next) {
                continue;
            }
            let done = is_constant(&next);
            seen.insert(next.clone());
            let len = next.len();
            nodes.push((next, Some((id, m))));
            let child = nodes.len() - 1;
            if done {
                let mut trace = Vec::new();
                let mut at = child;
                while let Some((p, m)) = nodes[at].1 {
                    trace.push(m);
                    at = p;
                }
                trace.reverse();
                return Ok(Verdict::Contracted { trace });
            }
            heap.push(Reverse((len, child)));
        }
    }
    Ok(Verdict::Unknown { explored })
}

/// True when `b` arises from `a` by inserting or deleting one interior
/// point and both are `scale`-paths.
pub fn is_elementary_step(space: &FiniteMetricSpace, a: &[usize], b: &[usize], scale: Real) -> bool {
    let is_path = |p: &[usize]| p.windows(2).all(|w| space.d(w[0], w[1]).le_tol(&scale));
    let (short, long) = if a.len() + 1 == b.len() {
        (a, b)
    } else if b.len() + 1 == a.len() {
        (b, a)
    } else {
        return false;
    };
    if short.first() != long.first() || short.last() != long.last() || !is_path(a) || !is_path(b) {
        return false;
    }
    (1..long.len() - 1).any(|i| long[..i] == short[..i] && long[i + 1..] == short[i..])
}

/// The ladder of intermediate paths between two `c`-near `c`-paths with
/// the same number of steps; consecutive paths are elementarily
/// `2c`-homotopic.
pub fn interleave_homotopy(
    space: &FiniteMetricSpace,
    xi: &[usize],
    eta: &[usize],
    c: Real,
) -> Result<Vec<Vec<usize>>, RipsError> {
    let violated = |index: usize, reason: &str| RipsError::HypothesisViolated { index, reason: reason.to_string() };
    if xi.len() != eta.len() || xi.is_empty() {
        return Err(violated(0, "paths must have the same positive number of points"));
    }
    let n = xi.len() - 1;
    if xi[0] != eta[0] {
        return Err(violated(0, "origins differ"));
    }
    if xi[n] != eta[n] {
        return Err(violated(n, "ends differ"));
    }
    for i in 1..=n {
        if !space.d(xi[i - 1], xi[i]).le_tol(&c) || !space.d(eta[i - 1], eta[i]).le_tol(&c) {
            return Err(violated(i, "step longer than c"));
        }
    }
    for i in 1..n {
        if !space.d(xi[i], eta[i]).le_tol(&c) {
            return Err(violated(i, "paths are more than c apart"));
        }
    }
    let mut ladder = Vec::with_capacity(2 * n.saturating_sub(1));
    for k in 1..n {
        let mut odd: Vec<usize> = eta[..=k].to_vec();
        odd.extend_from_slice(&xi[k..]);
        ladder.push(odd);
        let mut even: Vec<usize> = eta[..=k].to_vec();
        even.extend_from_slice(&xi[k + 1..]);
        ladder.push(even);
    }
    let two_c = c + c;
    let mut prev: &[usize] = xi;
    for (j, step) in ladder.iter().enumerate() {
        if !is_elementary_step(space, prev, step, two_c) {
            return Err(violated(j + 1, "ladder step is not elementary at scale 2c"));
        }
        prev = step;
    }
    Ok(ladder)
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopReport {
    pub vertices: Vec<String>,
    pub verdict: &'static str,
    pub moves: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScReport {
    pub c_prime: Real,
    pub c_second: Real,
    pub seed: u64,
    pub loops: Vec<LoopReport>,
    pub contracted: usize,
    pub nontrivial_h1: usize,
    pub unknown: usize,
    /// Whether `j_*` kills every class of the smaller complex.
    pub h1_map_zero: bool,
    pub h1_map_rank: usize,
    /// Certified failure of SC(c', c'') from a nonzero H1 image.
    pub sc_fails: bool,
}

/// Samples seeded random `c'`-loops at `x0`, tests each for contraction in
/// `Rips_{c''}` and computes whether `H1(Rips_{c'}) -> H1(Rips_{c''})` is zero.
pub fn sc_probe(
    space: &FiniteMetricSpace,
    x0: usize,
    c_prime: Real,
    c_second: Real,
    sample_size: usize,
    move_budget: usize,
    seed: u64,
) -> Result<ScReport, RipsError> {
    if x0 >= space.len() {
        return Err(RipsError::BadVertex(x0));
    }
    let small = build_rips(space, c_prime);
    let big = build_rips(space, c_second);
    let small_data = Pi1Data::new(&small)?;
    let big_data = Pi1Data::new(&big)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut loops = Vec::with_capacity(sample_size);
    let (mut contracted, mut nontrivial, mut unknown) = (0, 0, 0);
    for _ in 0..sample_size {
        let lp = random_loop(&small, x0, &mut rng);
        let verdict = contract_with(&big, &big_data, &lp, move_budget)?;
        let moves = match &verdict {
            Verdict::Contracted { trace } => {
                contracted += 1;
                trace.len()
            }
            Verdict::NontrivialH1 { .. } => {
                nontrivial += 1;
                0
            }
            Verdict::Unknown { explored } => {
                unknown += 1;
                *explored
            }
        };
        loops.push(LoopReport {
            vertices: lp.iter().map(|&v| space.point(v).to_string()).collect(),
            verdict: verdict.name(),
            moves,
        });
    }
    let mut image = big_data.clone();
    let base_rank = image.relator_rank();
    let mut zero = true;
    for g in 0..small_data.generator_count() {
        let cycle = small_data.fundamental_cycle(g);
        let class = big_data.class_of(&cycle)?;
        if !class.is_zero {
            zero = false;
            let row = big_data.chain_row(&cycle);
            image.insert_relator(row)?;
        }
    }
    let rank = image.relator_rank() - base_rank;
    Ok(ScReport {
        c_prime,
        c_second,
        seed,
        loops,
        contracted,
        nontrivial_h1: nontrivial,
        unknown,
        h1_map_zero: zero,
        h1_map_rank: rank,
        sc_fails: !zero,
    })
}

/// Random walk of 1 to 16 steps from `x0`, closed by a shortest path back.
fn random_loop(complex: &Rips2Complex, x0: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let steps = rng.gen_range(1..=16);
    let mut walk = vec![x0];
    let mut cur = x0;
    for _ in 0..steps {
        let nb = complex.neighbors(cur);
        if nb.is_empty() {
            break;
        }
        cur = nb[rng.gen_range(0..nb.len())];
        walk.push(cur);
    }
    if cur == x0 {
        if walk.len() == 1 {
            walk.push(x0);
        }
        return walk;
    }
    let adjacency: Vec<Vec<usize>> = (0..complex.vertex_count()).map(|v| complex.neighbors(v).to_vec()).collect();
    let hops = bfs_hops(&adjacency, x0);
    while cur != x0 {
        let h = hops[cur].expect("walk stays in the component");
        cur = *complex.neighbors(cur).iter().find(|&&w| hops[w] == Some(h - 1)).unwrap();
        walk.push(cur);
    }
    walk
}

/// A point of the circle of radius `R` centred at the origin.
#[derive(Clone, Copy, Debug)]
pub enum CirclePoint {
    /// Fraction of a full turn, exact.
    Turn(Rational64),
    /// Angle in radians.
    Angle(f64),
    Cartesian(f64, f64),
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RotationCertificate {
    pub counts: [[u64; 3]; 3],
    pub rho: i64,
    pub radius: Real,
    pub arcs: Vec<u8>,
}

fn arc_of(p: &CirclePoint, radius: f64, index: usize) -> Result<u8, RipsError> {
    let turn = match *p {
        CirclePoint::Turn(t) => {
            let three = (t * Rational64::from_integer(3)).floor().to_integer();
            return Ok(three.rem_euclid(3) as u8);
        }
        CirclePoint::Angle(a) => a / std::f64::consts::TAU,
        CirclePoint::Cartesian(x, y) => {
            if ((x * x + y * y).sqrt() - radius).abs() > TOLERANCE * radius.max(1.0) {
                return Err(RipsError::PointOffCircle(index));
            }
            y.atan2(x) / std::f64::consts::TAU
        }
    };
    let third = (3.0 * turn.rem_euclid(1.0) + TOLERANCE).floor() as i64;
    Ok(third.rem_euclid(3) as u8)
}

/// Arc-crossing count `rho` of a loop on the circle.
pub fn rotation_number(points: &[CirclePoint], radius: Real) -> Result<RotationCertificate, RipsError> {
    let r = radius.to_f64();
    let arcs = points.iter().enumerate().map(|(i, p)| arc_of(p, r, i)).collect::<Result<Vec<u8>, _>>()?;
    let mut counts = [[0u64; 3]; 3];
    for w in arcs.windows(2) {
        counts[w[0] as usize][w[1] as usize] += 1;
    }
    let rho = (0..3).map(|a| counts[a][(a + 1) % 3] as i64 - counts[(a + 1) % 3][a] as i64).sum();
    Ok(RotationCertificate { counts, rho, radius, arcs })
}

/// `m` equally spaced points on the circle of radius `r` with the chordal metric.
pub fn circle(r: Real, m: usize) -> Result<FiniteMetricSpace, RipsError> {
    if m < 3 {
        return Err(RipsError::BadParams(format!("circle needs m >= 3, got {m}")));
    }
    if !Real::ZERO.lt_tol(&r) {
        return Err(RipsError::BadParams("circle radius must be positive".into()));
    }
    let points = (0..m).map(|j| format!("c{j}")).collect();
    let rf = r.to_f64();
    Ok(FiniteMetricSpace::from_fn(format!("circle({r},{m})"), points, |j, k| {
        let steps = j.abs_diff(k).min(m - j.abs_diff(k));
        let x = 2.0 * rf * (std::f64::consts::PI * steps as f64 / m as f64).sin();
        if (x - x.round()).abs() < 1e-12 {
            Real::int(x.round() as i64)
        } else {
            Real::Float(x)
        }
    }))
}

/// Turn coordinates of the circle fixture's points.
pub fn circle_turns(m: usize) -> Vec<Rational64> {
    (0..m).map(|j| Rational64::new(j as i64, m as i64)).collect()
}

/// Index of `u_k` in the highway fixture.
pub fn highway_last(n_max: u32) -> usize {
    10usize.pow(n_max) + 3 * n_max as usize
}

/// The line `u_0, u_1, ...` with a shortcut of `n` edges from `u_{10^n}` to
/// `u_{10^n + 3n}` for every `n <= n_max`, restricted to the `u` vertices.
pub fn highway(n_max: u32) -> Result<FiniteMetricSpace, RipsError> {
    if !(2..=5).contains(&n_max) {
        return Err(RipsError::BadParams(format!("highway needs 2 <= n_max <= 5, got {n_max}")));
    }
    let last = highway_last(n_max);
    let count_u = last + 1;
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); count_u];
    let link = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize| {
        adj[a].push(b);
        adj[b].push(a);
    };
    for k in 0..last {
        link(&mut adjacency, k, k + 1);
    }
    for n in 1..=n_max as usize {
        let start = 10usize.pow(n as u32);
        let end = start + 3 * n;
        let mut prev = start;
        for _ in 1..n {
            adjacency.push(Vec::new());
            let v = adjacency.len() - 1;
            link(&mut adjacency, prev, v);
            prev = v;
        }
        link(&mut adjacency, prev, end);
    }
    let hops: Vec<Vec<Option<usize>>> = (0..count_u).map(|s| bfs_hops(&adjacency, s)).collect();
    let points = (0..count_u).map(|k| format!("u{k}")).collect();
    Ok(FiniteMetricSpace::from_fn(format!("highway({n_max})"), points, |a, b| {
        Real::int(hops[a][b].expect("connected") as i64)
    }))
}
