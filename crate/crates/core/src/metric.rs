//! Finite pseudo-metric spaces and their coarse invariants at a fixed scale.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::numeric::Real;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("row {row} has {len} entries, expected {expected}")]
    DimensionMismatch { row: usize, len: usize, expected: usize },
    #[error("d({0},{0}) is not zero")]
    NonzeroDiagonal(String),
    #[error("d({0},{1}) is not symmetric")]
    NotSymmetric(String, String),
    #[error("negative distance between {0} and {1}")]
    Negative(String, String),
    #[error("triangle inequality fails on ({0}, {1}, {2})")]
    TriangleViolation(String, String, String),
    #[error("graph metric is disconnected: no path from {0} to {1}")]
    DisconnectedGraph(String, String),
    #[error("edge references unknown vertex index {0}")]
    BadEdge(usize),
    #[error("duplicate point id {0}")]
    DuplicatePoint(String),
    #[error("unknown point id {0}")]
    UnknownPoint(String),
    #[error("space is not coarsely connected at this scale: {0} and {1} are unreachable")]
    NotCoarselyConnected(String, String),
    #[error("map samples have different domain or codomain")]
    DomainMismatch,
    #[error("witness pieces do not partition the point set: {0}")]
    NotAPartition(String),
    #[error("scale must be positive")]
    NonPositiveScale,
}

/// A finite set of labelled points with a symmetric pseudo-metric table.
#[derive(Clone, Debug)]
pub struct FiniteMetricSpace {
    label: String,
    points: Vec<String>,
    dist: Vec<Real>,
}

impl FiniteMetricSpace {
    /// Builds a space from a full distance table. Symmetry, zero diagonal
    /// and non-negativity are checked here; the cubic triangle check is
    /// left to [`FiniteMetricSpace::check_triangle_inequality`].
    pub fn from_table(
        label: impl Into<String>,
        points: Vec<String>,
        rows: Vec<Vec<Real>>,
    ) -> Result<Self, MetricError> {
        let n = points.len();
        check_unique(&points)?;
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(MetricError::DimensionMismatch { row: i, len: row.len(), expected: n });
            }
            dist.extend_from_slice(row);
        }
        if rows.len() != n {
            return Err(MetricError::DimensionMismatch { row: rows.len(), len: 0, expected: n });
        }
        let space = FiniteMetricSpace { label: label.into(), points, dist };
        for i in 0..n {
            if !space.d(i, i).is_zero() {
                return Err(MetricError::NonzeroDiagonal(space.points[i].clone()));
            }
            for j in 0..n {
                let d = space.d(i, j);
                if d.is_negative() {
                    return Err(MetricError::Negative(space.points[i].clone(), space.points[j].clone()));
                }
                if !d.eq_tol(&space.d(j, i)) {
                    return Err(MetricError::NotSymmetric(space.points[i].clone(), space.points[j].clone()));
                }
            }
        }
        Ok(space)
    }

    /// Builds a space from a distance function evaluated on index pairs.
    /// The function is trusted to be a pseudo-metric.
    pub fn from_fn(
        label: impl Into<String>,
        points: Vec<String>,
        mut f: impl FnMut(usize, usize) -> Real,
    ) -> Self {
        let n = points.len();
        let mut dist = vec![Real::ZERO; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        FiniteMetricSpace { label: label.into(), points, dist }
    }

    /// Points on the real line with `|x - y|`.
    pub fn from_line(label: impl Into<String>, points: Vec<String>, coords: &[Real]) -> Result<Self, MetricError> {
        if coords.len() != points.len() {
            return Err(MetricError::DimensionMismatch { row: 0, len: coords.len(), expected: points.len() });
        }
        check_unique(&points)?;
        Ok(Self::from_fn(label, points, |i, j| (coords[i] - coords[j]).abs()))
    }

    /// Line points labelled by their coordinates.
    pub fn line(coords: &[i64]) -> Self {
        let points = coords.iter().map(|c| c.to_string()).collect();
        let reals: Vec<Real> = coords.iter().map(|&c| Real::int(c)).collect();
        Self::from_line("line", points, &reals).expect("distinct integer coordinates")
    }

    /// Shortest-path metric of a weighted graph on `points`.
    pub fn from_graph(
        label: impl Into<String>,
        points: Vec<String>,
        edges: &[(usize, usize, Real)],
    ) -> Result<Self, MetricError> {
        check_unique(&points)?;
        let n = points.len();
        let mut adj: Vec<Vec<(usize, Real)>> = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            if a >= n {
                return Err(MetricError::BadEdge(a));
            }
            if b >= n {
                return Err(MetricError::BadEdge(b));
            }
            if w.is_negative() {
                return Err(MetricError::Negative(points[a].clone(), points[b].clone()));
            }
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        let mut dist = vec![Real::ZERO; n * n];
        for s in 0..n {
            let row = dijkstra(&adj, s);
            for (t, d) in row.into_iter().enumerate() {
                match d {
                    Some(d) => dist[s * n + t] = d,
                    None => return Err(MetricError::DisconnectedGraph(points[s].clone(), points[t].clone())),
                }
            }
        }
        Ok(FiniteMetricSpace { label: label.into(), points, dist })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &str {
        &self.points[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.points.iter().position(|p| p == id)
    }

    pub fn require(&self, id: &str) -> Result<usize, MetricError> {
        self.index_of(id).ok_or_else(|| MetricError::UnknownPoint(id.to_string()))
    }

    /// Distance between the points at indices `i` and `j`.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> Real {
        self.dist[i * self.points.len() + j]
    }

    pub fn rows(&self) -> Vec<Vec<Real>> {
        self.dist.chunks(self.len().max(1)).take(self.len()).map(|r| r.to_vec()).collect()
    }

    /// True when every distance is an exact rational.
    pub fn is_exact(&self) -> bool {
        self.dist.iter().all(Real::is_exact)
    }

    pub fn diameter(&self) -> Real {
        self.dist.iter().copied().fold(Real::ZERO, Real::max)
    }

    /// Returns the first violating triple, if any.
    pub fn check_triangle_inequality(&self) -> Result<(), MetricError> {
        let n = self.len();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if !self.d(x, z).le_tol(&(self.d(x, y) + self.d(y, z))) {
                        return Err(MetricError::TriangleViolation(
                            self.points[x].clone(),
                            self.points[y].clone(),
                            self.points[z].clone(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Sub-space on the given indices, keeping their order.
    pub fn restrict(&self, indices: &[usize]) -> FiniteMetricSpace {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        Self::from_fn(self.label.clone(), points, |a, b| self.d(indices[a], indices[b]))
    }

    /// Partition into c-path components, blocks in first-point order.
    pub fn c_components(&self, c: Real) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut uf = UnionFind::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if self.d(i, j).le_tol(&c) {
                    uf.union(i, j);
                }
            }
        }
        uf.blocks()
    }

    pub fn is_c_connected(&self, c: Real) -> bool {
        self.c_components(c).len() <= 1
    }

    /// True iff every pair is joined by a c-path whose step lengths sum to
    /// the distance of the pair.
    pub fn is_c_geodesic(&self, c: Real) -> bool {
        let n = self.len();
        let adj = self.scale_adjacency(c);
        for s in 0..n {
            let row = dijkstra(&adj, s);
            for (t, d) in row.into_iter().enumerate() {
                match d {
                    Some(d) if d.eq_tol(&self.d(s, t)) => {}
                    _ => return false,
                }
            }
        }
        true
    }

    fn scale_adjacency(&self, c: Real) -> Vec<Vec<(usize, Real)>> {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && self.d(i, j).le_tol(&c) {
                    adj[i].push((j, self.d(i, j)));
                }
            }
        }
        adj
    }

    /// The minimax chain pseudo-metric `d^u(x, y)`: the least possible
    /// largest step over chains from `x` to `y`.
    ///
    /// Computed on a minimum spanning tree (Prim, quadratic), where the
    /// bottleneck of the unique tree path is the minimax value.
    pub fn ultrametrize(&self) -> FiniteMetricSpace {
        let n = self.len();
        if n == 0 {
            return self.clone();
        }
        let mut in_tree = vec![false; n];
        let mut best: Vec<Option<(Real, usize)>> = vec![None; n];
        let mut tree: Vec<Vec<(usize, Real)>> = vec![Vec::new(); n];
        best[0] = Some((Real::ZERO, 0));
        for _ in 0..n {
            let next = (0..n)
                .filter(|&v| !in_tree[v])
                .filter_map(|v| best[v].map(|(w, _)| (v, w)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            let Some((v, w)) = next else { break };
            in_tree[v] = true;
            let parent = best[v].unwrap().1;
            if parent != v {
                tree[v].push((parent, w));
                tree[parent].push((v, w));
            }
            for u in 0..n {
                if !in_tree[u] {
                    let d = self.d(v, u);
                    if best[u].is_none_or(|(b, _)| d < b) {
                        best[u] = Some((d, v));
                    }
                }
            }
        }
        let mut dist = vec![Real::ZERO; n * n];
        for s in 0..n {
            let mut stack = vec![(s, usize::MAX, Real::ZERO)];
            while let Some((v, from, m)) = stack.pop() {
                dist[s * n + v] = m;
                for &(u, w) in &tree[v] {
                    if u != from {
                        stack.push((u, v, m.max(w)));
                    }
                }
            }
        }
        FiniteMetricSpace { label: format!("{}/ultra", self.label), points: self.points.clone(), dist }
    }

    /// Largest diameter of an r-chain component.
    pub fn chain_diameter_profile(&self, r: Real) -> Real {
        self.c_components(r)
            .iter()
            .map(|block| self.subset_diameter(block))
            .fold(Real::ZERO, Real::max)
    }

    pub fn subset_diameter(&self, block: &[usize]) -> Real {
        let mut m = Real::ZERO;
        for (a, &i) in block.iter().enumerate() {
            for &j in &block[a + 1..] {
                m = m.max(self.d(i, j));
            }
        }
        m
    }

    /// Distance between two non-empty subsets.
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> Option<Real> {
        a.iter()
            .flat_map(|&i| b.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.d(i, j))
            .reduce(Real::min)
    }

    /// Collapses zero-distance classes and returns the graph metric
    /// `c * hops` on the quotient, with edges for `0 < d <= c`.
    pub fn scale_graph(&self, c: Real) -> Result<ScaleGraph, MetricError> {
        if !Real::ZERO.lt_tol(&c) {
            return Err(MetricError::NonPositiveScale);
        }
        let n = self.len();
        let mut quotient = vec![usize::MAX; n];
        let mut reps: Vec<usize> = Vec::new();
        for i in 0..n {
            if quotient[i] != usize::MAX {
                continue;
            }
            let class = reps.len();
            reps.push(i);
            for j in i..n {
                if quotient[j] == usize::MAX && self.d(i, j).is_zero() {
                    quotient[j] = class;
                }
            }
        }
        let k = reps.len();
        let mut adj = vec![Vec::new(); k];
        for a in 0..k {
            for b in 0..k {
                if a != b && self.d(reps[a], reps[b]).le_tol(&c) {
                    adj[a].push(b);
                }
            }
        }
        let mut hops = vec![0usize; k * k];
        for s in 0..k {
            let row = bfs_hops(&adj, s);
            for (t, h) in row.into_iter().enumerate() {
                match h {
                    Some(h) => hops[s * k + t] = h,
                    None => {
                        return Err(MetricError::NotCoarselyConnected(
                            self.points[reps[s]].clone(),
                            self.points[reps[t]].clone(),
                        ))
                    }
                }
            }
        }
        let points = reps.iter().map(|&r| self.points[r].clone()).collect();
        let space = Self::from_fn(format!("{}/X_c", self.label), points, |a, b| c * Real::int(hops[a * k + b] as i64));
        Ok(ScaleGraph { quotient, space })
    }
}

fn check_unique(points: &[String]) -> Result<(), MetricError> {
    let mut seen = HashMap::new();
    for p in points {
        if seen.insert(p.as_str(), ()).is_some() {
            return Err(MetricError::DuplicatePoint(p.clone()));
        }
    }
    Ok(())
}

#[derive(PartialEq)]
struct HeapEntry(Real, usize);

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.partial_cmp(&self.0).unwrap().then(other.1.cmp(&self.1))
    }
}

/// Dijkstra with a binary heap; `None` marks unreachable targets.
pub(crate) fn dijkstra(adj: &[Vec<(usize, Real)>], source: usize) -> Vec<Option<Real>> {
    let n = adj.len();
    let mut dist: Vec<Option<Real>> = vec![None; n];
    let mut done = vec![false; n];
    dist[source] = Some(Real::ZERO);
    let mut heap = std::collections::BinaryHeap::from([HeapEntry(Real::ZERO, source)]);
    while let Some(HeapEntry(dv, v)) = heap.pop() {
        if std::mem::replace(&mut done[v], true) {
            continue;
        }
        for &(u, w) in &adj[v] {
            let cand = dv + w;
            if !done[u] && dist[u].is_none_or(|du| cand < du) {
                dist[u] = Some(cand);
                heap.push(HeapEntry(cand, u));
            }
        }
    }
    dist
}

pub(crate) fn bfs_hops(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut hops = vec![None; adj.len()];
    hops[source] = Some(0);
    let mut queue = std::collections::VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let h = hops[v].unwrap();
        for &u in &adj[v] {
            if hops[u].is_none() {
                hops[u] = Some(h + 1);
                queue.push_back(u);
            }
        }
    }
    hops
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // smaller root wins so block order stays stable
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }

    pub(crate) fn blocks(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut order = Vec::new();
        for i in 0..n {
            let r = self.find(i);
            by_root.entry(r).or_insert_with(|| {
                order.push(r);
                Vec::new()
            });
            by_root.get_mut(&r).unwrap().push(i);
        }
        order.into_iter().map(|r| by_root.remove(&r).unwrap()).collect()
    }
}

/// Output of [`FiniteMetricSpace::scale_graph`].
#[derive(Clone, Debug)]
pub struct ScaleGraph {
    /// Index of each original point's class in `space`.
    pub quotient: Vec<usize>,
    pub space: FiniteMetricSpace,
}

/// Piecewise-constant control function read off observed distances.
#[derive(Clone, Debug, Serialize)]
pub struct ControlFunction {
    pub breakpoints: Vec<(Real, Real)>,
    pub tail: ControlTail,
    pub kind: ControlKind,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ControlTail {
    Slope(Real),
    Infinite,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    /// Step-constant from the left: value at the last breakpoint `<= t`.
    Upper,
    /// Step-constant from the right: value at the first breakpoint `>= t`.
    Lower,
}

impl ControlFunction {
    /// `None` stands for `+inf`.
    pub fn eval(&self, t: Real) -> Option<Real> {
        match self.kind {
            ControlKind::Upper => {
                let last = self.breakpoints.iter().rev().find(|(b, _)| b.le_tol(&t));
                match last {
                    Some((b, v)) => match self.tail {
                        ControlTail::Slope(s) if Some(b) == self.breakpoints.last().map(|x| &x.0) => {
                            Some(*v + s * (t - *b).max(Real::ZERO))
                        }
                        _ => Some(*v),
                    },
                    None => Some(Real::ZERO),
                }
            }
            ControlKind::Lower => match self.breakpoints.iter().find(|(b, _)| t.le_tol(b)) {
                Some((_, v)) => Some(*v),
                None => match self.tail {
                    ControlTail::Infinite => None,
                    ControlTail::Slope(s) => {
                        let (b, v) = self.breakpoints.last().copied().unwrap_or((Real::ZERO, Real::ZERO));
                        Some(v + s * (t - b))
                    }
                },
            },
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.breakpoints.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1.le_tol(&w[1].1))
    }

    /// Lower controls must diverge at infinity.
    pub fn diverges(&self) -> bool {
        match self.tail {
            ControlTail::Infinite => true,
            ControlTail::Slope(s) => Real::ZERO.lt_tol(&s),
        }
    }
}

/// A map between two finite spaces given by its values on domain indices.
#[derive(Clone, Debug)]
pub struct MapSample<'a> {
    pub domain: &'a FiniteMetricSpace,
    pub codomain: &'a FiniteMetricSpace,
    pub image: Vec<usize>,
}

impl<'a> MapSample<'a> {
    pub fn new(domain: &'a FiniteMetricSpace, codomain: &'a FiniteMetricSpace, image: Vec<usize>) -> Result<Self, MetricError> {
        if image.len() != domain.len() {
            return Err(MetricError::DomainMismatch);
        }
        if let Some(&bad) = image.iter().find(|&&y| y >= codomain.len()) {
            return Err(MetricError::UnknownPoint(bad.to_string()));
        }
        Ok(MapSample { domain, codomain, image })
    }

    /// Lower and upper envelopes of image distances against domain distances.
    pub fn empirical_controls(&self) -> (ControlFunction, ControlFunction) {
        let n = self.domain.len();
        let mut pairs: Vec<(Real, Real)> = Vec::with_capacity(n * n / 2 + 1);
        for i in 0..n {
            for j in i..n {
                pairs.push((self.domain.d(i, j), self.codomain.d(self.image[i], self.image[j])));
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut ts: Vec<Real> = pairs.iter().map(|p| p.0).collect();
        ts.dedup_by(|a, b| a == b);

        let mut upper = Vec::with_capacity(ts.len());
        let mut running = Real::ZERO;
        let mut k = 0;
        for &t in &ts {
            while k < pairs.len() && pairs[k].0 <= t {
                running = running.max(pairs[k].1);
                k += 1;
            }
            upper.push((t, running));
        }

        let mut lower = vec![(Real::ZERO, Real::ZERO); ts.len()];
        let mut running: Option<Real> = None;
        let mut k = pairs.len();
        for (idx, &t) in ts.iter().enumerate().rev() {
            while k > 0 && pairs[k - 1].0 >= t {
                let v = pairs[k - 1].1;
                running = Some(running.map_or(v, |r| r.min(v)));
                k -= 1;
            }
            lower[idx] = (t, running.unwrap_or(Real::ZERO));
        }

        (
            ControlFunction { breakpoints: lower, tail: ControlTail::Infinite, kind: ControlKind::Lower },
            ControlFunction { breakpoints: upper, tail: ControlTail::Slope(Real::ZERO), kind: ControlKind::Upper },
        )
    }

    /// `sup_x d(f(x), g(x))`.
    pub fn closeness(&self, other: &MapSample<'_>) -> Result<Real, MetricError> {
        if !std::ptr::eq(self.domain, other.domain) && !same_space(self.domain, other.domain)
            || !std::ptr::eq(self.codomain, other.codomain) && !same_space(self.codomain, other.codomain)
        {
            return Err(MetricError::DomainMismatch);
        }
        Ok(self
            .image
            .iter()
            .zip(&other.image)
            .map(|(&a, &b)| self.codomain.d(a, b))
            .fold(Real::ZERO, Real::max))
    }
}

fn same_space(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> bool {
    a.points == b.points && a.dist.iter().zip(&b.dist).all(|(x, y)| x.eq_tol(y))
}

/// Candidate witness for asymptotic dimension at one scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsdimWitness {
    pub r: Real,
    /// `families[i]` is a list of pieces, each a list of point ids.
    pub families: Vec<Vec<Vec<String>>>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct AsdimReport {
    pub holds: bool,
    pub max_piece_diameter: Real,
}

impl FiniteMetricSpace {
    /// Checks that distinct pieces of one family are at least `r` apart.
    pub fn verify_asdim_witness(&self, witness: &AsdimWitness) -> Result<AsdimReport, MetricError> {
        let mut seen = vec![false; self.len()];
        let mut families: Vec<Vec<Vec<usize>>> = Vec::new();
        for family in &witness.families {
            let mut pieces = Vec::new();
            for piece in family {
                let mut idx = Vec::with_capacity(piece.len());
                for id in piece {
                    let i = self.require(id)?;
                    if std::mem::replace(&mut seen[i], true) {
                        return Err(MetricError::NotAPartition(format!("{id} appears twice")));
                    }
                    idx.push(i);
                }
                pieces.push(idx);
            }
            families.push(pieces);
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(MetricError::NotAPartition(format!("{} is not covered", self.points[i])));
        }
        let mut holds = true;
        let mut max_diam = Real::ZERO;
        for pieces in &families {
            for (a, pa) in pieces.iter().enumerate() {
                max_diam = max_diam.max(self.subset_diameter(pa));
                for pb in &pieces[a + 1..] {
                    if let Some(d) = self.set_distance(pa, pb) {
                        if d.lt_tol(&witness.r) {
                            holds = false;
                        }
                    }
                }
            }
        }
        Ok(AsdimReport { holds, max_piece_diameter: max_diam })
    }
}

/// On-disk space description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceFile {
    pub label: String,
    pub points: Vec<serde_json::Value>,
    pub metric: MetricSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    Table { rows: Vec<Vec<Real>> },
    Graph { edges: Vec<(usize, usize, Real)> },
    Line { coords: Vec<Real> },
}

#[derive(Debug, thiserror::Error)]
pub enum SpaceFileError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("point ids must be strings or numbers")]
    BadPointId,
}

impl SpaceFile {
    pub fn into_space(self) -> Result<FiniteMetricSpace, SpaceFileError> {
        let points = self
            .points
            .iter()
            .map(|p| match p {
                serde_json::Value::String(s) => Ok(s.clone()),
                serde_json::Value::Number(n) => Ok(n.to_string()),
                _ => Err(SpaceFileError::BadPointId),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let space = match self.metric {
            MetricSpec::Table { rows } => {
                let s = FiniteMetricSpace::from_table(self.label, points, rows)?;
                s.check_triangle_inequality()?;
                s
            }
            MetricSpec::Graph { edges } => FiniteMetricSpace::from_graph(self.label, points, &edges)?,
            MetricSpec::Line { coords } => FiniteMetricSpace::from_line(self.label, points, &coords)?,
        };
        Ok(space)
    }

    pub fn from_space(space: &FiniteMetricSpace) -> SpaceFile {
        SpaceFile {
            label: space.label.clone(),
            points: space.points.iter().map(|p| serde_json::Value::String(p.clone())).collect(),
            metric: MetricSpec::Table { rows: space.rows() },
        }
    }
}

impl FiniteMetricSpace {
    pub fn from_json(text: &str) -> Result<Self, SpaceFileError> {
        serde_json::from_str::<SpaceFile>(text)?.into_space()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SpaceFile::from_space(self)).expect("space serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(space: &FiniteMetricSpace, blocks: Vec<Vec<usize>>) -> Vec<Vec<String>> {
        blocks.into_iter().map(|b| b.into_iter().map(|i| space.point(i).to_string()).collect()).collect()
    }

    #[test]
    fn components_on_a_line() {
        let x = FiniteMetricSpace::line(&[0, 1, 2, 10]);
        assert_eq!(ids(&x, x.c_components(Real::int(1))), vec![vec!["0", "1", "2"], vec!["10"]]);
        assert_eq!(x.c_components(Real::ratio(1, 2)).len(), 4);
        assert_eq!(x.c_components(Real::int(8)).len(), 1);
        let empty = FiniteMetricSpace::line(&[]);
        assert!(empty.c_components(Real::int(1)).is_empty());
    }

    #[test]
    fn geodesic_examples() {
        assert!(FiniteMetricSpace::line(&[0, 1, 2, 3]).is_c_geodesic(Real::int(1)));
        assert!(!FiniteMetricSpace::line(&[0, 2]).is_c_geodesic(Real::int(1)));
        assert!(FiniteMetricSpace::line(&[0, 1, 3]).is_c_geodesic(Real::int(2)));
    }

    #[test]
    fn ultrametrize_small() {
        let x = FiniteMetricSpace::line(&[0, 1, 2]);
        let u = x.ultrametrize();
        assert_eq!(u.d(0, 2), Real::int(1));
        let again = u.ultrametrize();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(u.d(i, j), again.d(i, j));
            }
        }
    }

    #[test]
    fn chain_profile() {
        let x = FiniteMetricSpace::line(&[0, 1, 2, 10]);
        assert_eq!(x.chain_diameter_profile(Real::int(1)), Real::int(2));
        assert_eq!(x.chain_diameter_profile(Real::ratio(1, 2)), Real::ZERO);
    }

    #[test]
    fn scale_graph_examples() {
        let coords = ["0", "0.6", "1.2"].map(|s| s.parse::<Real>().unwrap());
        let x = FiniteMetricSpace::from_line("l", vec!["a".into(), "b".into(), "c".into()], &coords).unwrap();
        let g = x.scale_graph(Real::int(1)).unwrap();
        assert_eq!(g.space.d(g.quotient[0], g.quotient[2]), Real::int(2));

        let twin = FiniteMetricSpace::from_fn("t", vec!["p".into(), "q".into()], |_, _| Real::ZERO);
        assert_eq!(twin.scale_graph(Real::int(1)).unwrap().space.len(), 1);

        let far = FiniteMetricSpace::line(&[0, 5]);
        assert!(matches!(far.scale_graph(Real::int(1)), Err(MetricError::NotCoarselyConnected(..))));
    }

    #[test]
    fn controls_of_doubling() {
        let dom = FiniteMetricSpace::line(&[-3, -2, -1, 0, 1, 2, 3]);
        let cod = FiniteMetricSpace::line(&[-6, -5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 6]);
        let image = (-3..=3).map(|n: i64| (2 * n + 6) as usize).collect();
        let f = MapSample::new(&dom, &cod, image).unwrap();
        let (lower, upper) = f.empirical_controls();
        for (t, v) in &upper.breakpoints {
            assert_eq!(*v, Real::int(2) * *t);
        }
        assert!(lower.diverges() && upper.is_nondecreasing() && lower.is_nondecreasing());
        assert_eq!(lower.eval(Real::int(7)), None);
    }

    #[test]
    fn constant_map_has_zero_upper_control() {
        let dom = FiniteMetricSpace::line(&[0, 4, 9]);
        let f = MapSample::new(&dom, &dom, vec![1, 1, 1]).unwrap();
        let (_, upper) = f.empirical_controls();
        assert!(upper.breakpoints.iter().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn closeness_of_shift() {
        let x = FiniteMetricSpace::line(&[-3, -2, -1, 0, 1, 2, 3, 4]);
        let dom = x.restrict(&(0..7).collect::<Vec<_>>());
        let id = MapSample::new(&dom, &x, (0..7).collect()).unwrap();
        let shift = MapSample::new(&dom, &x, (1..8).collect()).unwrap();
        assert_eq!(id.closeness(&shift).unwrap(), Real::int(1));
        assert_eq!(id.closeness(&id).unwrap(), Real::ZERO);
        let other = FiniteMetricSpace::line(&[0]);
        let g = MapSample::new(&other, &x, vec![0]).unwrap();
        assert_eq!(id.closeness(&g), Err(MetricError::DomainMismatch));
    }

    #[test]
    fn asdim_witness_examples() {
        let x = FiniteMetricSpace::line(&[0, 1, 2, 3]);
        let all = AsdimWitness { r: Real::int(100), families: vec![vec![vec!["0".into(), "1".into(), "2".into(), "3".into()]]] };
        assert!(x.verify_asdim_witness(&all).unwrap().holds);
        let split = AsdimWitness {
            r: Real::int(2),
            families: vec![vec![vec!["0".into(), "1".into()], vec!["2".into(), "3".into()]]],
        };
        let rep = x.verify_asdim_witness(&split).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.max_piece_diameter, Real::int(1));
        let missing = AsdimWitness { r: Real::int(1), families: vec![vec![vec!["0".into()]]] };
        assert!(matches!(x.verify_asdim_witness(&missing), Err(MetricError::NotAPartition(_))));
    }

    #[test]
    fn json_formats() {
        let line = r#"{"label":"l","points":[0,1,2],"metric":{"kind":"line","coords":[0,1,2.5]}}"#;
        let x = FiniteMetricSpace::from_json(line).unwrap();
        assert_eq!(x.d(0, 2), Real::ratio(5, 2));
        let graph = r#"{"label":"g","points":["a","b","c"],"metric":{"kind":"graph","edges":[[0,1,1],[1,2,1]]}}"#;
        let g = FiniteMetricSpace::from_json(graph).unwrap();
        assert_eq!(g.d(0, 2), Real::int(2));
        let back = FiniteMetricSpace::from_json(&g.to_json()).unwrap();
        assert_eq!(back.rows(), g.rows());
        let bad = r#"{"label":"t","points":["a","b","c"],"metric":{"kind":"table","rows":[[0,1,5],[1,0,1],[5,1,0]]}}"#;
        assert!(FiniteMetricSpace::from_json(bad).is_err());
    }
}
