//! Growth series and their comparison preorder, polynomial-degree fits,
//! greedy metric lattices, Følner searches and the isoperimetric check on
//! regular trees.

use std::collections::{HashMap, HashSet};

use num_rational::Rational64;
use serde::Serialize;

use crate::groups::{BallTable, Element, GroupError, GroupOracle};
use crate::metric::FiniteMetricSpace;
use crate::numeric::Real;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GrowthError {
    #[error("need at least 4 samples with r >= 2, got {0}")]
    TooFewSamples(usize),
    #[error("adjacency contains a cycle through vertex {0}")]
    NotATree(usize),
    #[error("vertex {0} has degree below 3")]
    DegreeTooSmall(usize),
    #[error("vertex {0} out of range")]
    BadVertex(usize),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Sampled ball sizes `r -> |B(r)|`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct GrowthSeries {
    pub label: String,
    pub samples: Vec<(Real, u64)>,
}

impl GrowthSeries {
    pub fn new(label: impl Into<String>, samples: Vec<(Real, u64)>) -> GrowthSeries {
        GrowthSeries { label: label.into(), samples }
    }

    /// Integer radii `0..=r_max` of a ball table (capped at its radius).
    pub fn from_ball_table(table: &BallTable, r_max: u32) -> GrowthSeries {
        let samples = table
            .ball_sizes()
            .into_iter()
            .take(r_max as usize + 1)
            .enumerate()
            .map(|(r, n)| (Real::int(r as i64), n))
            .collect();
        GrowthSeries { label: table.family().to_string(), samples }
    }

    /// Ball sizes around `base` at every observed distance up to `r_max`.
    pub fn from_space(space: &FiniteMetricSpace, base: usize, r_max: Option<Real>) -> GrowthSeries {
        let mut ds: Vec<Real> = (0..space.len()).map(|j| space.d(base, j)).collect();
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut samples: Vec<(Real, u64)> = Vec::new();
        let mut radii = vec![Real::ZERO];
        radii.extend(ds.iter().copied().filter(|d| !d.is_zero()));
        radii.dedup_by(|a, b| a == b);
        for r in radii {
            if r_max.is_some_and(|m| !r.le_tol(&m)) {
                break;
            }
            let count = ds.iter().filter(|d| d.le_tol(&r)).count() as u64;
            samples.push((r, count));
        }
        GrowthSeries { label: format!("{}@{}", space.label(), space.point(base)), samples }
    }

    /// Ball sizes at integer radii `0..=r_max`.
    pub fn from_space_integer(space: &FiniteMetricSpace, base: usize, r_max: u32) -> GrowthSeries {
        let samples = (0..=r_max)
            .map(|r| {
                let r = Real::int(r as i64);
                (r, (0..space.len()).filter(|&j| space.d(base, j).le_tol(&r)).count() as u64)
            })
            .collect();
        GrowthSeries { label: format!("{}@{}", space.label(), space.point(base)), samples }
    }

    pub fn max_radius(&self) -> Option<Real> {
        self.samples.last().map(|s| s.0)
    }

    pub fn min_radius(&self) -> Option<Real> {
        self.samples.first().map(|s| s.0)
    }

    /// Step-function value; `None` outside the sampled range.
    pub fn eval(&self, r: Real) -> Option<u64> {
        if self.max_radius().is_none_or(|m| !r.le_tol(&m)) {
            return None;
        }
        self.samples.iter().rev().find(|(s, _)| s.le_tol(&r)).map(|(_, n)| *n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,count\n");
        for (r, n) in &self.samples {
            out.push_str(&format!("{r},{n}\n"));
        }
        out
    }
}

/// `beta(r) <= lambda * beta'(mu * r + c)` on a checked range.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct GrowthWitness {
    #[serde(with = "crate::numeric::ratio_serde")]
    pub lambda: Rational64,
    #[serde(with = "crate::numeric::ratio_serde")]
    pub mu: Rational64,
    #[serde(with = "crate::numeric::ratio_serde")]
    pub c: Rational64,
    pub range: (Real, Real),
    pub checked: usize,
}

impl GrowthWitness {
    /// Witness for `beta <= beta''` from witnesses for `beta <= beta'` and `beta' <= beta''`.
    pub fn compose(&self, next: &GrowthWitness) -> (Rational64, Rational64, Rational64) {
        (self.lambda * next.lambda, self.mu * next.mu, next.mu * self.c + next.c)
    }
}

#[derive(Clone, Debug)]
pub struct ComparisonGrid {
    pub lambdas: Vec<Rational64>,
    pub mus: Vec<Rational64>,
    pub cs: Vec<Rational64>,
    /// Fraction of the common range that a witness must cover.
    pub min_coverage: Rational64,
}

impl Default for ComparisonGrid {
    fn default() -> Self {
        let r = |v: &[i64]| v.iter().map(|&x| Rational64::from_integer(x)).collect();
        ComparisonGrid { lambdas: r(&[1, 2, 4, 8]), mus: r(&[1, 2, 4, 8]), cs: r(&[0, 1, 2, 4]), min_coverage: Rational64::new(1, 2) }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Comparison {
    PreceqWitness(GrowthWitness),
    /// Inconclusive: no grid triple works on the sampled range.
    NoWitnessInGrid,
}

/// Checks one triple on every sample `r` of `beta` for which
/// `mu * r + c` stays within the range of `beta_p`.
pub fn check_triple(
    beta: &GrowthSeries,
    beta_p: &GrowthSeries,
    lambda: Rational64,
    mu: Rational64,
    c: Rational64,
) -> Option<(Real, Real, usize)> {
    let top = beta_p.max_radius()?;
    let lo = beta.min_radius()?;
    let mut hi = lo;
    let mut checked = 0;
    for &(r, count) in &beta.samples {
        let target = Real::from(mu) * r + Real::from(c);
        if !target.le_tol(&top) {
            break;
        }
        let bound = beta_p.eval(target)?;
        let lhs = Real::int(count as i64);
        let rhs = Real::from(lambda) * Real::int(bound as i64);
        if !lhs.le_tol(&rhs) {
            return None;
        }
        hi = r;
        checked += 1;
    }
    (checked > 0).then_some((lo, hi, checked))
}

pub fn compare_growth(beta: &GrowthSeries, beta_p: &GrowthSeries, grid: &ComparisonGrid) -> Comparison {
    let (Some(lo), Some(b_hi), Some(p_lo), Some(p_hi)) = (beta.min_radius(), beta.max_radius(), beta_p.min_radius(), beta_p.max_radius())
    else {
        return Comparison::NoWitnessInGrid;
    };
    let common_lo = lo.max(p_lo);
    let common_hi = b_hi.min(p_hi);
    let needed = common_lo + Real::from(grid.min_coverage) * (common_hi - common_lo);
    for &lambda in &grid.lambdas {
        for &mu in &grid.mus {
            for &c in &grid.cs {
                if let Some((r0, r1, checked)) = check_triple(beta, beta_p, lambda, mu, c) {
                    if needed.le_tol(&r1) {
                        return Comparison::PreceqWitness(GrowthWitness { lambda, mu, c, range: (r0, r1), checked });
                    }
                }
            }
        }
    }
    Comparison::NoWitnessInGrid
}

/// Least-squares fit of `ln y` against `ln x`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PowerFit {
    pub exponent: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    /// Residual of the fit of `ln y` against `x`.
    pub semilog_residual: f64,
    /// Set when the semilog fit is markedly better.
    pub exponential: bool,
    pub samples_used: usize,
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let rms = (points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

/// Fits `y ~ x^k` on the trailing `tail_fraction` of points with `x >= 2`.
pub fn fit_exponent(points: &[(f64, f64)], tail_fraction: f64) -> Result<PowerFit, GrowthError> {
    let eligible: Vec<(f64, f64)> = points.iter().copied().filter(|&(x, y)| x >= 2.0 && y > 0.0).collect();
    if eligible.len() < 4 {
        return Err(GrowthError::TooFewSamples(eligible.len()));
    }
    let keep = ((eligible.len() as f64 * tail_fraction.clamp(0.0, 1.0)).ceil() as usize).clamp(4, eligible.len());
    let tail = &eligible[eligible.len() - keep..];
    let loglog: Vec<(f64, f64)> = tail.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let semilog: Vec<(f64, f64)> = tail.iter().map(|&(x, y)| (x, y.ln())).collect();
    let (exponent, _, residual) = least_squares(&loglog);
    let (rate, _, semilog_residual) = least_squares(&semilog);
    Ok(PowerFit {
        exponent,
        residual,
        semilog_residual,
        exponential: rate > 1e-9 && semilog_residual < 0.5 * residual,
        samples_used: keep,
    })
}

pub fn poldeg_estimate(beta: &GrowthSeries, tail_fraction: f64) -> Result<PowerFit, GrowthError> {
    let points: Vec<(f64, f64)> = beta.samples.iter().map(|(r, n)| (r.to_f64(), *n as f64)).collect();
    fit_exponent(&points, tail_fraction)
}

/// Greedy `c`-separated subset: the seed, then every point in id order that
/// is at distance at least `c` from all points chosen so far.
pub fn greedy_lattice(space: &FiniteMetricSpace, c: Real, seed: usize) -> Vec<usize> {
    let mut chosen = vec![seed];
    for p in (0..space.len()).filter(|&p| p != seed) {
        if chosen.iter().all(|&q| c.le_tol(&space.d(p, q))) {
            chosen.push(p);
        }
    }
    chosen
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct LatticeCheck {
    pub separated: bool,
    pub covering_radius: Real,
    /// `covering_radius <= 2c`.
    pub cobounded: bool,
}

pub fn check_lattice(space: &FiniteMetricSpace, lattice: &[usize], c: Real) -> LatticeCheck {
    let separated = lattice
        .iter()
        .enumerate()
        .all(|(i, &a)| lattice[i + 1..].iter().all(|&b| c.le_tol(&space.d(a, b))));
    let covering_radius = (0..space.len())
        .map(|p| lattice.iter().map(|&l| space.d(p, l)).reduce(Real::min).unwrap_or(Real::ZERO))
        .fold(Real::ZERO, Real::max);
    LatticeCheck { separated, covering_radius, cobounded: covering_radius.le_tol(&(c + c)) }
}

/// Verdict of a connected-subset visitor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    /// Do not extend the current subset.
    Prune,
    Stop,
}

/// Graph explored while enumerating connected subsets.
pub trait NeighborSource {
    fn neighbors(&mut self, v: usize) -> Vec<usize>;
}

/// Enumerates every connected vertex set containing `root` with at most
/// `max_size` vertices, each exactly once (Redelmeier's algorithm). The
/// visitor also receives the number of excluded vertices, all of which are
/// adjacent to the current set.
pub fn enumerate_connected<G: NeighborSource>(
    graph: &mut G,
    root: usize,
    max_size: usize,
    visit: &mut dyn FnMut(&mut G, &[usize], usize) -> Flow,
) -> bool {
    let mut current = Vec::with_capacity(max_size);
    let mut seen = HashSet::from([root]);
    extend(graph, &mut current, vec![root], &mut seen, 0, max_size, visit)
}

fn extend<G: NeighborSource>(
    graph: &mut G,
    current: &mut Vec<usize>,
    mut untried: Vec<usize>,
    seen: &mut HashSet<usize>,
    mut excluded: usize,
    max_size: usize,
    visit: &mut dyn FnMut(&mut G, &[usize], usize) -> Flow,
) -> bool {
    while let Some(v) = untried.pop() {
        current.push(v);
        match visit(graph, current, excluded) {
            Flow::Stop => return true,
            Flow::Prune => {}
            Flow::Continue if current.len() < max_size => {
                let mut next = untried.clone();
                let mut added = Vec::new();
                for w in graph.neighbors(v) {
                    if seen.insert(w) {
                        added.push(w);
                        next.push(w);
                    }
                }
                let stop = extend(graph, current, next, seen, excluded, max_size, visit);
                for w in added {
                    seen.remove(&w);
                }
                if stop {
                    return true;
                }
            }
            Flow::Continue => {}
        }
        current.pop();
        excluded += 1;
    }
    false
}

/// Finite set with `|B^F(r)| / |F| <= 1 + epsilon`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FolnerWitness {
    pub set: Vec<String>,
    pub r: u32,
    #[serde(with = "crate::numeric::ratio_serde")]
    pub ratio: Rational64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FolnerStrategy {
    Balls,
    Greedy,
    Exhaustive,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FolnerVerdict {
    Witness(FolnerWitness),
    NoWitnessWithinBudget { examined: usize },
}

/// Interned view of a group for subset searches.
struct GroupGraph<'a> {
    oracle: &'a GroupOracle,
    elements: Vec<Element>,
    keys: Vec<String>,
    index: HashMap<String, usize>,
    offsets: Vec<Element>,
}

impl<'a> GroupGraph<'a> {
    fn new(oracle: &'a GroupOracle, r: u32, budget: usize) -> Result<Self, GroupError> {
        let ball = BallTable::build(oracle, r, budget)?;
        let mut g = GroupGraph { oracle, elements: Vec::new(), keys: Vec::new(), index: HashMap::new(), offsets: ball.elements().to_vec() };
        g.intern(oracle.identity());
        Ok(g)
    }

    fn intern(&mut self, e: Element) -> usize {
        let key = self.oracle.key(&e);
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.elements.push(e);
        self.keys.len() - 1
    }

    /// `|F B(r)|`.
    fn neighborhood_size(&self, set: &[usize]) -> usize {
        let mut keys = HashSet::new();
        for &f in set {
            for w in &self.offsets {
                keys.insert(self.oracle.key(&self.oracle.multiply(&self.elements[f], w)));
            }
        }
        keys.len()
    }

    fn witness(&self, set: &[usize], r: u32) -> FolnerWitness {
        let mut ids: Vec<String> = set.iter().map(|&i| self.keys[i].clone()).collect();
        ids.sort();
        FolnerWitness { set: ids, r, ratio: Rational64::new(self.neighborhood_size(set) as i64, set.len() as i64) }
    }
}

impl NeighborSource for GroupGraph<'_> {
    fn neighbors(&mut self, v: usize) -> Vec<usize> {
        let gens: Vec<Element> = self.oracle.generators().iter().map(|g| g.element.clone()).collect();
        let base = self.elements[v].clone();
        gens.iter().map(|s| self.intern(self.oracle.multiply(&base, s))).collect()
    }
}

fn within(ratio: Rational64, epsilon: Rational64) -> bool {
    ratio <= Rational64::from_integer(1) + epsilon
}

/// Searches the Cayley graph of `oracle` for a Følner set; `budget` caps
/// the number of candidate sets (and ball sizes for the ball strategy).
pub fn folner_search(
    oracle: &GroupOracle,
    r: u32,
    epsilon: Rational64,
    strategy: FolnerStrategy,
    max_size: usize,
    budget: usize,
) -> Result<FolnerVerdict, GrowthError> {
    let mut graph = GroupGraph::new(oracle, r, budget)?;
    match strategy {
        FolnerStrategy::Balls => {
            let mut table = BallTable::build(oracle, r, budget)?;
            let mut k = 0;
            loop {
                if table.radius() < k + r && table.grow(oracle, k + r, budget).is_err() {
                    return Ok(FolnerVerdict::NoWitnessWithinBudget { examined: k as usize });
                }
                let sizes = table.ball_sizes();
                let ratio = Rational64::new(sizes[(k + r) as usize] as i64, sizes[k as usize] as i64);
                if within(ratio, epsilon) {
                    let set: Vec<usize> = table.truncate(k).elements().iter().map(|e| graph.intern(e.clone())).collect();
                    let w = graph.witness(&set, r);
                    debug_assert_eq!(w.ratio, ratio);
                    return Ok(FolnerVerdict::Witness(w));
                }
                if sizes[k as usize] as usize >= max_size {
                    return Ok(FolnerVerdict::NoWitnessWithinBudget { examined: k as usize + 1 });
                }
                k += 1;
            }
        }
        FolnerStrategy::Greedy => {
            let mut set = vec![0usize];
            let mut examined = 0;
            loop {
                let ratio = Rational64::new(graph.neighborhood_size(&set) as i64, set.len() as i64);
                if within(ratio, epsilon) {
                    return Ok(FolnerVerdict::Witness(graph.witness(&set, r)));
                }
                if set.len() >= max_size || examined >= budget {
                    return Ok(FolnerVerdict::NoWitnessWithinBudget { examined });
                }
                let mut frontier: Vec<usize> = Vec::new();
                for &v in &set.clone() {
                    for w in graph.neighbors(v) {
                        if !set.contains(&w) && !frontier.contains(&w) {
                            frontier.push(w);
                        }
                    }
                }
                let mut best: Option<(Rational64, String, usize)> = None;
                for w in frontier {
                    examined += 1;
                    set.push(w);
                    let q = Rational64::new(graph.neighborhood_size(&set) as i64, set.len() as i64);
                    set.pop();
                    let cand = (q, graph.keys[w].clone(), w);
                    if best.as_ref().is_none_or(|b| (cand.0, &cand.1) < (b.0, &b.1)) {
                        best = Some(cand);
                    }
                }
                match best {
                    Some((_, _, w)) => set.push(w),
                    None => return Ok(FolnerVerdict::NoWitnessWithinBudget { examined }),
                }
            }
        }
        FolnerStrategy::Exhaustive => {
            let slack = epsilon * Rational64::from_integer(max_size as i64);
            let mut examined = 0usize;
            let mut found: Option<Vec<usize>> = None;
            enumerate_connected(&mut graph, 0, max_size, &mut |g, set, excluded| {
                if examined >= budget {
                    return Flow::Stop;
                }
                examined += 1;
                let ratio = Rational64::new(g.neighborhood_size(set) as i64, set.len() as i64);
                if within(ratio, epsilon) {
                    found = Some(set.to_vec());
                    return Flow::Stop;
                }
                if r >= 1 && Rational64::from_integer(excluded as i64) > slack {
                    Flow::Prune
                } else {
                    Flow::Continue
                }
            });
            Ok(match found {
                Some(set) => FolnerVerdict::Witness(graph.witness(&set, r)),
                None => FolnerVerdict::NoWitnessWithinBudget { examined },
            })
        }
    }
}

/// Recomputes the ratio of a witness from its keys.
pub fn recheck_folner(oracle: &GroupOracle, witness: &FolnerWitness, budget: usize) -> Result<Rational64, GrowthError> {
    let ball = BallTable::build(oracle, witness.r, budget)?;
    // witness sets are connected and contain the identity
    let explore = BallTable::build(oracle, witness.set.len() as u32, budget)?;
    let mut members = Vec::new();
    for key in &witness.set {
        let i = explore.index_of(key).ok_or(GroupError::NotFoundWithinRadius(explore.radius()))?;
        members.push(explore.elements()[i].clone());
    }
    let mut keys = HashSet::new();
    for f in &members {
        for w in ball.elements() {
            keys.insert(oracle.key(&oracle.multiply(f, w)));
        }
    }
    Ok(Rational64::new(keys.len() as i64, members.len() as i64))
}

/// Complete tree of the given degree and depth as adjacency lists; vertex 0 is the root.
pub fn regular_tree(degree: usize, depth: usize) -> Vec<Vec<usize>> {
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new()];
    let mut level = vec![0usize];
    for d in 0..depth {
        let mut next = Vec::new();
        for &v in &level {
            let children = if d == 0 { degree } else { degree - 1 };
            for _ in 0..children {
                let w = adjacency.len();
                adjacency.push(vec![v]);
                adjacency[v].push(w);
                next.push(w);
            }
        }
        level = next;
    }
    adjacency
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct TreeBoundary {
    pub size: usize,
    pub boundary: usize,
    /// `|boundary| >= |U| / 2`.
    pub holds: bool,
}

/// Vertices of `u` with a neighbour outside `u`, and the isoperimetric verdict.
pub fn tree_boundary_check(adjacency: &[Vec<usize>], u: &[usize]) -> Result<TreeBoundary, GrowthError> {
    check_forest(adjacency)?;
    let inside: HashSet<usize> = u.iter().copied().collect();
    for &v in u {
        let nb = adjacency.get(v).ok_or(GrowthError::BadVertex(v))?;
        if nb.len() < 3 {
            return Err(GrowthError::DegreeTooSmall(v));
        }
    }
    Ok(boundary_of(adjacency, &inside, u))
}

fn boundary_of(adjacency: &[Vec<usize>], inside: &HashSet<usize>, u: &[usize]) -> TreeBoundary {
    let boundary = u.iter().filter(|&&v| adjacency[v].iter().any(|w| !inside.contains(w))).count();
    TreeBoundary { size: u.len(), boundary, holds: 2 * boundary >= u.len() }
}

fn check_forest(adjacency: &[Vec<usize>]) -> Result<(), GrowthError> {
    let mut uf = crate::metric::UnionFind::new(adjacency.len());
    for (v, nb) in adjacency.iter().enumerate() {
        for &w in nb {
            if w >= adjacency.len() {
                return Err(GrowthError::BadVertex(w));
            }
            if v < w && !uf.union(v, w) {
                return Err(GrowthError::NotATree(w));
            }
        }
    }
    Ok(())
}

struct TreeGraph<'a>(&'a [Vec<usize>]);

impl NeighborSource for TreeGraph<'_> {
    fn neighbors(&mut self, v: usize) -> Vec<usize> {
        self.0[v].clone()
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct TreeSweep {
    pub subsets: usize,
    pub all_hold: bool,
    pub worst: Option<TreeBoundary>,
}

/// Checks every connected subset of size at most `max_size` containing
/// `root`; subsets touching vertices of degree below 3 are rejected.
pub fn tree_boundary_sweep(adjacency: &[Vec<usize>], root: usize, max_size: usize) -> Result<TreeSweep, GrowthError> {
    check_forest(adjacency)?;
    let mut subsets = 0;
    let mut all_hold = true;
    let mut worst: Option<TreeBoundary> = None;
    let mut error = None;
    let mut graph = TreeGraph(adjacency);
    enumerate_connected(&mut graph, root, max_size, &mut |g, set, _| {
        let v = *set.last().unwrap();
        if g.0[v].len() < 3 {
            error = Some(GrowthError::DegreeTooSmall(v));
            return Flow::Stop;
        }
        let inside: HashSet<usize> = set.iter().copied().collect();
        let b = boundary_of(g.0, &inside, set);
        subsets += 1;
        all_hold &= b.holds;
        let slack = |t: &TreeBoundary| 2 * t.boundary as i64 - t.size as i64;
        if worst.as_ref().is_none_or(|w| slack(&b) < slack(w)) {
            worst = Some(b);
        }
        Flow::Continue
    });
    match error {
        Some(e) => Err(e),
        None => Ok(TreeSweep { subsets, all_hold, worst }),
    }
}
