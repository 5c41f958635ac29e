use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use coarse_kit::groups::{self, BallTable, GroupError, GroupOracle, DEFAULT_BUDGET};
use coarse_kit::growth::{self, Comparison, ComparisonGrid, FolnerStrategy, GrowthError, GrowthSeries};
use coarse_kit::metric::{SpaceFileError, MetricError};
use coarse_kit::rips::{self, CirclePoint, RipsError};
use coarse_kit::splitting::{self, Presentation, SplittingError, ValuationVector};
use coarse_kit::{FiniteMetricSpace, MapSample, Real, TOLERANCE};

#[derive(Parser)]
#[command(name = "coarse-kit", version, about = "Coarse geometry of groups and finite metric spaces")]
struct Cli {
    /// Node, move and subset budget.
    #[arg(long, global = true, env = "COARSEKIT_BUDGET", default_value_t = DEFAULT_BUDGET, value_parser = positive_budget)]
    budget: usize,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate a word-metric ball, optionally through a cache file.
    Ball(BallArgs),
    /// Ball sizes of a group or of a space around a base point.
    Growth(GrowthArgs),
    /// Search a (lambda, mu, c) grid for beta_a <= beta_b.
    CompareGrowth(CompareArgs),
    /// Fitted polynomial degree of a growth series.
    Poldeg(PoldegArgs),
    /// Word lengths of the powers of an element.
    Distortion(DistortionArgs),
    /// Greedy c-separated, cobounded subset of a space.
    Lattice(LatticeArgs),
    /// Search for a Følner set.
    Folner(FolnerArgs),
    /// Boundary check on a regular tree.
    TreeCheck(TreeArgs),
    /// Minimax chain distance of a space.
    Ultrametrize(SpaceArgs),
    /// c-connected components.
    Components(ScaleArgs),
    /// Empirical controls of a map between spaces.
    Controls(ControlsArgs),
    /// Rips 2-complex at scale c.
    Rips(ScaleArgs),
    /// H1 class of a loop in a Rips complex.
    H1(LoopArgs),
    /// Contract a loop in a Rips complex.
    Contract(LoopArgs),
    /// Sample loops and test SC(c', c'').
    ScProbe(ScProbeArgs),
    /// Rotation number of a loop on a circle.
    Rotation(RotationArgs),
    /// Emit a fixture space as JSON.
    Fixture(FixtureArgs),
    /// Rewrite a presentation over a ball with relators of length <= 3.
    DefiningSubset(DefiningArgs),
    /// Evaluate relators in the attached group.
    VerifyPresentation(VerifyArgs),
    /// Whether multiplication by lambda engulfs Z[1/P] into Z.
    Engulfs(LambdaArgs),
    /// Finiteness class of Z[1/P] ⋊_lambda Z.
    ClassifyBs(LambdaArgs),
    /// Compact presentability from hom data.
    ClassifySemidirect(SemidirectArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ball(_) => "ball",
            Command::Growth(_) => "growth",
            Command::CompareGrowth(_) => "compare-growth",
            Command::Poldeg(_) => "poldeg",
            Command::Distortion(_) => "distortion",
            Command::Lattice(_) => "lattice",
            Command::Folner(_) => "folner",
            Command::TreeCheck(_) => "tree-check",
            Command::Ultrametrize(_) => "ultrametrize",
            Command::Components(_) => "components",
            Command::Controls(_) => "controls",
            Command::Rips(_) => "rips",
            Command::H1(_) => "h1",
            Command::Contract(_) => "contract",
            Command::ScProbe(_) => "sc-probe",
            Command::Rotation(_) => "rotation",
            Command::Fixture(_) => "fixture",
            Command::DefiningSubset(_) => "defining-subset",
            Command::VerifyPresentation(_) => "verify-presentation",
            Command::Engulfs(_) => "engulfs",
            Command::ClassifyBs(_) => "classify-bs",
            Command::ClassifySemidirect(_) => "classify-semidirect",
        }
    }

    fn inputs(&self) -> Value {
        let v = match self {
            Command::Ball(a) => serde_json::to_value(a),
            Command::Growth(a) => serde_json::to_value(a),
            Command::CompareGrowth(a) => serde_json::to_value(a),
            Command::Poldeg(a) => serde_json::to_value(a),
            Command::Distortion(a) => serde_json::to_value(a),
            Command::Lattice(a) => serde_json::to_value(a),
            Command::Folner(a) => serde_json::to_value(a),
            Command::TreeCheck(a) => serde_json::to_value(a),
            Command::Ultrametrize(a) => serde_json::to_value(a),
            Command::Components(a) | Command::Rips(a) => serde_json::to_value(a),
            Command::Controls(a) => serde_json::to_value(a),
            Command::H1(a) | Command::Contract(a) => serde_json::to_value(a),
            Command::ScProbe(a) => serde_json::to_value(a),
            Command::Rotation(a) => serde_json::to_value(a),
            Command::Fixture(a) => serde_json::to_value(a),
            Command::DefiningSubset(a) => serde_json::to_value(a),
            Command::VerifyPresentation(a) => serde_json::to_value(a),
            Command::Engulfs(a) | Command::ClassifyBs(a) => serde_json::to_value(a),
            Command::ClassifySemidirect(a) => serde_json::to_value(a),
        };
        v.expect("arguments serialize")
    }
}

#[derive(Args, Serialize)]
struct BallArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    radius: u32,
    /// JSON Lines ball cache, loaded when present and saved afterwards.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GrowthArgs {
    #[arg(long, conflicts_with = "space")]
    family: Option<String>,
    #[arg(long, requires = "base")]
    space: Option<PathBuf>,
    #[arg(long)]
    base: Option<String>,
    /// Integer radii 0..=radius; for spaces without it, every observed distance.
    #[arg(long)]
    radius: Option<u32>,
}

#[derive(Args, Serialize)]
struct CompareArgs {
    /// Family spec such as `free:2`, or `@file.csv` with `r,count` rows.
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    /// Radius for family sources.
    #[arg(long, default_value_t = 8)]
    radius: u32,
}

#[derive(Args, Serialize)]
struct PoldegArgs {
    /// Family spec or `@file.csv`.
    #[arg(long)]
    source: String,
    #[arg(long, default_value_t = 8)]
    radius: u32,
    /// Trailing fraction of the samples used by the fit.
    #[arg(long, default_value_t = 0.5)]
    tail: f64,
}

#[derive(Args, Serialize)]
struct DistortionArgs {
    #[arg(long)]
    family: String,
    /// Word such as `u` or `s t^-1`.
    #[arg(long)]
    element: String,
    #[arg(long)]
    n_max: u32,
    #[arg(long, default_value_t = 24)]
    max_radius: u32,
    #[arg(long, default_value_t = 0.5)]
    tail: f64,
}

#[derive(Args, Serialize)]
struct LatticeArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    c: String,
    /// Point id to start from; defaults to the first point.
    #[arg(long)]
    start: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum StrategyArg {
    Balls,
    Greedy,
    Exhaustive,
}

#[derive(Args, Serialize)]
struct FolnerArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 1)]
    r: u32,
    #[arg(long)]
    epsilon: String,
    #[arg(long, value_enum, default_value_t = StrategyArg::Greedy)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 12)]
    max_size: usize,
}

#[derive(Args, Serialize)]
struct TreeArgs {
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, default_value_t = 12)]
    depth: usize,
    /// Check every connected subset through the root up to this size.
    #[arg(long, conflicts_with = "subset")]
    max_size: Option<usize>,
    /// Comma-separated vertex indices (root is 0, breadth-first numbering).
    #[arg(long)]
    subset: Option<String>,
}

#[derive(Args, Serialize)]
struct SpaceArgs {
    #[arg(long)]
    space: PathBuf,
}

#[derive(Args, Serialize)]
struct ScaleArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    c: String,
}

#[derive(Args, Serialize)]
struct ControlsArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long)]
    codomain: PathBuf,
    /// JSON object mapping domain ids to codomain ids.
    #[arg(long)]
    map: PathBuf,
}

#[derive(Args, Serialize)]
struct LoopArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    c: String,
    /// Point ids separated by commas, or by semicolons when ids contain commas;
    /// first equal to last.
    #[arg(long = "loop")]
    #[serde(rename = "loop")]
    lp: String,
}

#[derive(Args, Serialize)]
struct ScProbeArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    base: String,
    #[arg(long)]
    c1: String,
    #[arg(long)]
    c2: String,
    #[arg(long, default_value_t = 32)]
    samples: usize,
}

#[derive(Args, Serialize)]
struct RotationArgs {
    /// `R:m`, the m-point circle of radius R.
    #[arg(long)]
    circle: String,
    /// `polygon`, `constant`, or comma-separated point indices.
    #[arg(long = "loop")]
    #[serde(rename = "loop")]
    lp: String,
}

#[derive(Args, Serialize)]
struct FixtureArgs {
    /// `circle:R:m`, `highway:n`, `line:a:b` or `ball:<family>:<radius>`.
    kind: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DefiningArgs {
    #[arg(long, conflicts_with = "steinberg")]
    presentation: Option<PathBuf>,
    /// Use the Steinberg presentation of SL_n(Z).
    #[arg(long)]
    steinberg: Option<usize>,
    /// Write the transformed presentation here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare presented and evaluated orders (finite groups only).
    #[arg(long)]
    order_check: bool,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    presentation: PathBuf,
    #[arg(long)]
    order_check: bool,
}

#[derive(Args, Serialize)]
struct LambdaArgs {
    #[arg(long)]
    lambda: String,
    /// Comma-separated primes; may be empty.
    #[arg(long, default_value = "")]
    primes: String,
}

#[derive(Args, Serialize)]
struct SemidirectArgs {
    /// JSON file with a list of `{"direction": [...], "scale": q}` entries.
    #[arg(long, conflicts_with = "lambda")]
    hom: Option<PathBuf>,
    #[arg(long, requires = "primes")]
    lambda: Option<String>,
    #[arg(long)]
    primes: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Budget(String),
}

impl CliError {
    fn usage(e: impl Display) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<GroupError> for CliError {
    fn from(e: GroupError) -> Self {
        match e {
            GroupError::BudgetExceeded(_) => CliError::Budget(e.to_string()),
            e => CliError::usage(e),
        }
    }
}

impl From<GrowthError> for CliError {
    fn from(e: GrowthError) -> Self {
        match e {
            GrowthError::Group(g) => g.into(),
            e => CliError::usage(e),
        }
    }
}

impl From<SplittingError> for CliError {
    fn from(e: SplittingError) -> Self {
        match e {
            SplittingError::BudgetExceeded(_) => CliError::Budget(e.to_string()),
            SplittingError::Group(g) => g.into(),
            e => CliError::usage(e),
        }
    }
}

macro_rules! usage_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::usage(e)
            }
        }
    )*};
}

usage_errors!(RipsError, MetricError, SpaceFileError, serde_json::Error);

#[derive(Serialize)]
struct RunConfig {
    budget: usize,
    seed: u64,
    tolerance: f64,
    format: Format,
    inputs: Value,
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    config: RunConfig,
    result: Value,
}

enum Output {
    Json(Value),
    Csv(String),
    Raw(String),
}

struct Ctx {
    budget: usize,
    seed: u64,
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_format = if matches!(cli.command, Command::Growth(_)) { Format::Csv } else { Format::Json };
    let ctx = Ctx { budget: cli.budget, seed: cli.seed, format: cli.format.unwrap_or(default_format) };
    let config = RunConfig { budget: ctx.budget, seed: ctx.seed, tolerance: TOLERANCE, format: ctx.format, inputs: cli.command.inputs() };
    let name = cli.command.name();
    match run(&cli.command, &ctx) {
        Ok(Output::Json(result)) => {
            let report = Report { command: name, config, result };
            emit(&format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")))
        }
        Ok(Output::Csv(body)) => {
            let inputs = serde_json::to_string(&config.inputs).expect("inputs serialize");
            let tolerance = serde_json::to_string(&config.tolerance).expect("tolerance serializes");
            emit(&format!("# coarse-kit {name} budget={} seed={} tolerance={tolerance} inputs={inputs}\n{body}", config.budget, config.seed))
        }
        Ok(Output::Raw(text)) => emit(&format!("{text}\n")),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Budget(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn positive_budget(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("budget must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn emit(text: &str) -> ExitCode {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    // a closed pipe downstream is not an error of the run
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
    ExitCode::SUCCESS
}

fn parse_real(s: &str) -> Result<Real, CliError> {
    s.parse().map_err(CliError::usage)
}

fn positive(s: &str) -> Result<Real, CliError> {
    let r = parse_real(s)?;
    if !Real::ZERO.lt_tol(&r) {
        return Err(CliError::Usage(format!("expected a positive number, got `{s}`")));
    }
    Ok(r)
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_space(path: &Path) -> Result<FiniteMetricSpace, CliError> {
    Ok(FiniteMetricSpace::from_json(&read(path)?)?)
}

fn ids(space: &FiniteMetricSpace, list: &str) -> Result<Vec<usize>, CliError> {
    let sep = if list.contains(';') { ';' } else { ',' };
    list.split(sep).map(|t| Ok(space.require(t.trim())?)).collect()
}

fn names(space: &FiniteMetricSpace, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| space.point(i).to_string()).collect()
}

fn oracle(spec: &str) -> Result<GroupOracle, CliError> {
    Ok(GroupOracle::from_spec(spec)?)
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

fn series_source(src: &str, radius: u32, budget: usize) -> Result<GrowthSeries, CliError> {
    if let Some(path) = src.strip_prefix('@') {
        let text = read(Path::new(path))?;
        let mut samples = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#') && *l != "r,count") {
            let (r, n) = line.split_once(',').ok_or_else(|| CliError::Usage(format!("bad CSV row `{line}`")))?;
            samples.push((parse_real(r)?, n.trim().parse::<u64>().map_err(CliError::usage)?));
        }
        return Ok(GrowthSeries::new(path, samples));
    }
    let table = BallTable::build(&oracle(src)?, radius, budget)?;
    Ok(GrowthSeries::from_ball_table(&table, radius))
}

/// FNV-1a over a canonical serialization.
fn fingerprint(text: &str) -> String {
    let hash = text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    format!("{hash:016x}")
}

fn rational(s: &str) -> Result<num_rational::Rational64, CliError> {
    parse_real(s)?.exact().ok_or_else(|| CliError::Usage(format!("`{s}` must be an exact rational")))
}

fn primes(s: &str) -> Result<Vec<u64>, CliError> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(|t| t.parse().map_err(CliError::usage)).collect()
}

fn run(command: &Command, ctx: &Ctx) -> Result<Output, CliError> {
    let budget = ctx.budget;
    Ok(match command {
        Command::Ball(a) => {
            let o = oracle(&a.family)?;
            let mut table = match &a.cache {
                Some(p) if p.exists() => BallTable::from_jsonl(&o, &read(p)?)?,
                _ => BallTable::build(&o, 0, budget)?,
            };
            let loaded = table.radius();
            if table.radius() < a.radius {
                table.grow(&o, a.radius, budget)?;
            }
            if let Some(p) = &a.cache {
                if loaded < table.radius() || !p.exists() {
                    write(p, &table.to_jsonl())?;
                }
            }
            let view = table.truncate(a.radius);
            Output::Json(json!({
                "family": o.family().to_string(),
                "generators": o.generator_labels(),
                "radius": a.radius,
                "size": view.len(),
                "sphere_counts": view.sphere_counts(),
                "cached_radius": table.radius(),
            }))
        }
        Command::Growth(a) => {
            let series = match (&a.family, &a.space) {
                (Some(f), None) => {
                    let r = a.radius.ok_or_else(|| CliError::usage("--radius is required with --family"))?;
                    GrowthSeries::from_ball_table(&BallTable::build(&oracle(f)?, r, budget)?, r)
                }
                (None, Some(p)) => {
                    let space = load_space(p)?;
                    let base = space.require(a.base.as_deref().unwrap_or_default())?;
                    match a.radius {
                        Some(r) => GrowthSeries::from_space_integer(&space, base, r),
                        None => GrowthSeries::from_space(&space, base, None),
                    }
                }
                _ => return Err(CliError::usage("give exactly one of --family and --space")),
            };
            match ctx.format {
                Format::Csv => Output::Csv(series.to_csv()),
                Format::Json => Output::Json(to_json(&series)),
            }
        }
        Command::CompareGrowth(a) => {
            let sa = series_source(&a.a, a.radius, budget)?;
            let sb = series_source(&a.b, a.radius, budget)?;
            let verdict = growth::compare_growth(&sa, &sb, &ComparisonGrid::default());
            let recheck = match &verdict {
                Comparison::PreceqWitness(w) => {
                    Some(growth::check_triple(&sa, &sb, w.lambda, w.mu, w.c).is_some())
                }
                Comparison::NoWitnessInGrid => None,
            };
            let hash = fingerprint(&format!("{}|{}|{}", sa.to_csv(), sb.to_csv(), serde_json::to_string(&verdict)?));
            Output::Json(json!({ "comparison": verdict, "recheck": recheck, "recheck_hash": hash }))
        }
        Command::Poldeg(a) => {
            let s = series_source(&a.source, a.radius, budget)?;
            Output::Json(json!({ "fit": growth::poldeg_estimate(&s, a.tail)?, "series": s }))
        }
        Command::Distortion(a) => {
            let o = oracle(&a.family)?;
            let z = o.parse_word(&a.element)?;
            let profile = groups::distortion_profile(&o, &z, a.n_max, a.max_radius, budget);
            let points: Vec<(f64, f64)> = profile.iter().filter_map(|&(n, l)| l.map(|l| (n as f64, l as f64))).collect();
            let fit = growth::fit_exponent(&points, a.tail).ok();
            let rows: Vec<Value> = profile.iter().map(|(n, l)| json!({ "n": n, "length": l })).collect();
            Output::Json(json!({ "profile": rows, "fit": fit }))
        }
        Command::Lattice(a) => {
            let space = load_space(&a.space)?;
            let c = positive(&a.c)?;
            let start = match &a.start {
                Some(s) => space.require(s)?,
                None => 0,
            };
            let lattice = growth::greedy_lattice(&space, c, start);
            let check = growth::check_lattice(&space, &lattice, c);
            Output::Json(json!({ "points": names(&space, &lattice), "check": check }))
        }
        Command::Folner(a) => {
            let o = oracle(&a.family)?;
            let eps = rational(&a.epsilon)?;
            let strategy = match a.strategy {
                StrategyArg::Balls => FolnerStrategy::Balls,
                StrategyArg::Greedy => FolnerStrategy::Greedy,
                StrategyArg::Exhaustive => FolnerStrategy::Exhaustive,
            };
            Output::Json(to_json(&growth::folner_search(&o, a.r, eps, strategy, a.max_size, budget)?))
        }
        Command::TreeCheck(a) => {
            if a.degree < 2 {
                return Err(CliError::usage("degree must be at least 2"));
            }
            let tree = growth::regular_tree(a.degree, a.depth);
            match (&a.subset, a.max_size) {
                (Some(list), _) => {
                    let u = list.split(',').map(|t| t.trim().parse::<usize>().map_err(CliError::usage)).collect::<Result<Vec<_>, _>>()?;
                    Output::Json(to_json(&growth::tree_boundary_check(&tree, &u)?))
                }
                (None, Some(k)) => Output::Json(to_json(&growth::tree_boundary_sweep(&tree, 0, k)?)),
                (None, None) => return Err(CliError::usage("give --subset or --max-size")),
            }
        }
        Command::Ultrametrize(a) => {
            let space = load_space(&a.space)?;
            let u = space.ultrametrize();
            let unchanged = (0..space.len()).all(|i| (0..space.len()).all(|j| space.d(i, j).eq_tol(&u.d(i, j))));
            Output::Json(json!({ "input_is_ultrametric": unchanged, "space": serde_json::from_str::<Value>(&u.to_json())? }))
        }
        Command::Components(a) => {
            let space = load_space(&a.space)?;
            let c = positive(&a.c)?;
            let blocks: Vec<Vec<String>> = space.c_components(c).iter().map(|b| names(&space, b)).collect();
            Output::Json(json!({ "blocks": blocks, "connected": blocks.len() <= 1, "geodesic": space.is_c_geodesic(c) }))
        }
        Command::Controls(a) => {
            let dom = load_space(&a.domain)?;
            let cod = load_space(&a.codomain)?;
            let map: BTreeMap<String, Value> = serde_json::from_str(&read(&a.map)?)?;
            let image = (0..dom.len())
                .map(|i| {
                    let target = map.get(dom.point(i)).ok_or_else(|| CliError::Usage(format!("no image for `{}`", dom.point(i))))?;
                    let id = match target {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    Ok(cod.require(&id)?)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let sample = MapSample::new(&dom, &cod, image)?;
            let (lower, upper) = sample.empirical_controls();
            Output::Json(json!({ "lower": lower, "upper": upper, "lower_diverges": lower.diverges() }))
        }
        Command::Rips(a) => {
            let space = load_space(&a.space)?;
            let complex = rips::build_rips(&space, positive(&a.c)?);
            let data = rips::Pi1Data::new(&complex)?;
            let (betti, torsion) = data.invariants()?;
            Output::Json(json!({
                "complex": complex.dump(),
                "components": complex.components().len(),
                "generators": data.generator_count(),
                "relator_rank": data.relator_rank(),
                "betti_1": betti,
                "torsion": torsion.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            }))
        }
        Command::H1(a) => {
            let space = load_space(&a.space)?;
            let complex = rips::build_rips(&space, positive(&a.c)?);
            Output::Json(to_json(&rips::h1_class(&complex, &ids(&space, &a.lp)?)?))
        }
        Command::Contract(a) => {
            let space = load_space(&a.space)?;
            let complex = rips::build_rips(&space, positive(&a.c)?);
            Output::Json(to_json(&rips::contract_loop(&complex, &ids(&space, &a.lp)?, budget)?))
        }
        Command::ScProbe(a) => {
            let space = load_space(&a.space)?;
            let x0 = space.require(&a.base)?;
            let report = rips::sc_probe(&space, x0, positive(&a.c1)?, positive(&a.c2)?, a.samples, budget, ctx.seed)?;
            Output::Json(to_json(&report))
        }
        Command::Rotation(a) => {
            let (r, m) = a.circle.split_once(':').ok_or_else(|| CliError::usage("--circle expects R:m"))?;
            let radius = positive(r)?;
            let m: usize = m.parse().map_err(CliError::usage)?;
            let turns = rips::circle_turns(m);
            let idx: Vec<usize> = match a.lp.as_str() {
                "polygon" => (0..=m).map(|j| j % m).collect(),
                "constant" => vec![0, 0],
                list => list.split(',').map(|t| t.trim().parse::<usize>().map_err(CliError::usage)).collect::<Result<_, _>>()?,
            };
            if let Some(&bad) = idx.iter().find(|&&j| j >= m) {
                return Err(CliError::Usage(format!("point index {bad} out of range")));
            }
            let points: Vec<CirclePoint> = idx.iter().map(|&j| CirclePoint::Turn(turns[j])).collect();
            Output::Json(to_json(&rips::rotation_number(&points, radius)?))
        }
        Command::Fixture(a) => {
            let space = fixture(&a.kind, budget)?;
            let text = space.to_json();
            match &a.out {
                Some(p) => {
                    write(p, &text)?;
                    Output::Json(json!({ "label": space.label(), "points": space.len(), "fingerprint": fingerprint(&text) }))
                }
                None => Output::Raw(text),
            }
        }
        Command::DefiningSubset(a) => {
            let p = match (&a.presentation, a.steinberg) {
                (Some(path), None) => Presentation::from_json(&read(path)?)?,
                (None, Some(n)) => splitting::steinberg_presentation(n)?,
                _ => return Err(CliError::usage("give exactly one of --presentation and --steinberg")),
            };
            let q = splitting::defining_subset_presentation(&p, budget)?;
            let text = q.to_json();
            if let Some(out) = &a.out {
                write(out, &text)?;
            }
            let order = if a.order_check { Some(splitting::order_check(&q, budget)?) } else { None };
            Output::Json(json!({
                "input_max_relator_length": p.max_relator_length(),
                "m": splitting::defining_exponent(p.max_relator_length()),
                "letters": q.letters().len(),
                "relators": q.relators().len(),
                "max_relator_length": q.max_relator_length(),
                "relators_hold": q.relators_hold()?,
                "order_check": order,
                "fingerprint": fingerprint(&text),
            }))
        }
        Command::VerifyPresentation(a) => {
            let p = Presentation::from_json(&read(&a.presentation)?)?;
            let order = if a.order_check { Some(splitting::order_check(&p, budget)?) } else { None };
            Output::Json(json!({
                "letters": p.letters().len(),
                "relators": p.relators().len(),
                "max_relator_length": p.max_relator_length(),
                "convention": p.convention(),
                "relators_hold": p.relators_hold()?,
                "order_check": order,
            }))
        }
        Command::Engulfs(a) => {
            let v = ValuationVector::new(rational(&a.lambda)?, &primes(&a.primes)?)?;
            Output::Json(json!({ "input": v, "engulfs": splitting::engulfs(&v)?, "inverse_engulfs": splitting::engulfs(&v.inverse())? }))
        }
        Command::ClassifyBs(a) => {
            let v = ValuationVector::new(rational(&a.lambda)?, &primes(&a.primes)?)?;
            Output::Json(json!({ "input": v, "verdict": splitting::classify_gamma_lambda(&v)? }))
        }
        Command::ClassifySemidirect(a) => {
            let hom: Vec<splitting::HomEntry> = match (&a.hom, &a.lambda, &a.primes) {
                (Some(path), None, _) => serde_json::from_str(&read(path)?)?,
                (None, Some(l), Some(p)) => splitting::hom_vector(&ValuationVector::new(rational(l)?, &primes(p)?)?),
                _ => return Err(CliError::usage("give --hom or --lambda with --primes")),
            };
            if hom.is_empty() {
                return Err(CliError::usage("hom data needs at least one factor"));
            }
            Output::Json(json!({ "input": hom, "verdict": splitting::classify_semidirect(&hom)? }))
        }
    })
}

fn fixture(kind: &str, budget: usize) -> Result<FiniteMetricSpace, CliError> {
    let bad = || CliError::Usage(format!("unknown fixture `{kind}`"));
    let (name, rest) = kind.split_once(':').ok_or_else(bad)?;
    Ok(match name {
        "circle" => {
            let (r, m) = rest.split_once(':').ok_or_else(bad)?;
            rips::circle(positive(r)?, m.parse().map_err(CliError::usage)?)?
        }
        "highway" => rips::highway(rest.parse().map_err(CliError::usage)?)?,
        "line" => {
            let (a, b) = rest.split_once(':').ok_or_else(bad)?;
            let (a, b): (i64, i64) = (a.parse().map_err(CliError::usage)?, b.parse().map_err(CliError::usage)?);
            if a > b {
                return Err(bad());
            }
            FiniteMetricSpace::line(&(a..=b).collect::<Vec<_>>()).with_label(format!("line({a}..{b})"))
        }
        "ball" => {
            let (family, r) = rest.rsplit_once(':').ok_or_else(bad)?;
            groups::ball_metric_space(&oracle(family)?, r.parse().map_err(CliError::usage)?, budget)?
        }
        _ => return Err(bad()),
    })
}
