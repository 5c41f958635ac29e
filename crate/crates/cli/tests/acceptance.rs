use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use coarse_kit::groups::{distortion_profile, word_length, BallTable, GroupOracle, StepRelation};
use coarse_kit::growth::{
    fit_exponent, folner_search, poldeg_estimate, recheck_folner, regular_tree, tree_boundary_sweep, FolnerStrategy,
    FolnerVerdict, GrowthSeries,
};
use coarse_kit::rips::{build_rips, circle, circle_turns, h1_class, highway, rotation_number, sc_probe, CirclePoint, Pi1Data};
use coarse_kit::splitting::{
    classify_gamma_lambda, classify_semidirect, defining_subset_presentation, engulfs, hom_vector, order_check,
    steinberg_presentation, GammaClass, Presentation, SemidirectClass, ValuationVector,
};
use coarse_kit::{FiniteMetricSpace, Real};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUDGET: usize = 1_000_000;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn heisenberg_distortion() -> Outcome {
    let start = Instant::now();
    let h = GroupOracle::heisenberg();
    for k in 1..=6u32 {
        for g in ["s", "t"] {
            let e = h.parse_word(&format!("{g}^{k}")).map_err(err)?;
            let l = word_length(&h, &e, 8, BUDGET).map_err(err)?;
            ensure(l == k, format!("l({g}^{k}) = {l}"))?;
        }
    }
    for k in 1..=3u32 {
        let e = h.parse_word(&format!("u^{}", k * k)).map_err(err)?;
        let l = word_length(&h, &e, 4 * k, BUDGET).map_err(err)?;
        ensure(l <= 4 * k, format!("l(u^{}) = {l}", k * k))?;
    }
    let u = h.parse_word("u").map_err(err)?;
    let profile = distortion_profile(&h, &u, 36, 24, BUDGET);
    let mut points = Vec::new();
    for (n, l) in profile {
        let l = l.ok_or(format!("l(u^{n}) beyond radius 24"))?;
        points.push((n as f64, l as f64));
    }
    let fit = fit_exponent(&points, 0.5).map_err(err)?;
    ensure((0.4..=0.6).contains(&fit.exponent), format!("exponent {:.4}", fit.exponent))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("exponent {:.4} on {} points, {:.2?}", fit.exponent, fit.samples_used, elapsed))
}

fn ball_closed_forms() -> Outcome {
    let z2 = BallTable::build(&GroupOracle::free_abelian(2), 20, BUDGET).map_err(err)?;
    for (r, n) in z2.ball_sizes().into_iter().take(9).enumerate() {
        let r = r as u64;
        ensure(n == 2 * r * r + 2 * r + 1, format!("|B_Z2({r})| = {n}"))?;
    }
    let f2 = BallTable::build(&GroupOracle::free(2), 7, BUDGET).map_err(err)?;
    for (r, n) in f2.ball_sizes().into_iter().enumerate() {
        ensure(n == 2 * 3u64.pow(r as u32) - 1, format!("|B_F2({r})| = {n}"))?;
    }
    let fit = poldeg_estimate(&GrowthSeries::from_ball_table(&z2, 20), 0.5).map_err(err)?;
    ensure((1.7..=2.3).contains(&fit.exponent), format!("poldeg {:.4}", fit.exponent))?;
    Ok(format!("poldeg(Z2) = {:.4}", fit.exponent))
}

fn random_graph_space(rng: &mut ChaCha8Rng, max_points: usize) -> FiniteMetricSpace {
    let n = rng.gen_range(2..=max_points);
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.gen_range(0..i), i, Real::ratio(rng.gen_range(1..=12), rng.gen_range(1..=4))));
    }
    for _ in 0..rng.gen_range(0..=n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        edges.push((a, b, Real::ratio(rng.gen_range(1..=12), rng.gen_range(1..=4))));
    }
    let points = (0..n).map(|i| format!("x{i}")).collect();
    FiniteMetricSpace::from_graph("random", points, &edges).unwrap()
}

fn step_metric_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for trial in 0..100 {
        let space = random_graph_space(&mut rng, 20);
        let n = space.len();
        let c = space.ultrametrize().diameter().max(Real::ratio(1, 4));
        let big_c = c + Real::ratio(rng.gen_range(0..=8), 2);
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = space.d(i, j);
                if d.le_tol(&c) || (d.le_tol(&big_c) && rng.gen_bool(0.5)) {
                    pairs.push((i, j));
                }
            }
        }
        let rel = StepRelation::new(space, &pairs).map_err(err)?;
        ensure(rel.is_controlled(c, big_c), format!("trial {trial}: relation not controlled"))?;
        let (nu, delta) = (rel.nu_metric(), rel.delta_metric());
        for i in 0..n {
            for j in 0..n {
                ensure(delta.d(i, j).le_tol(&(big_c * nu.d(i, j))), format!("trial {trial}: delta > C nu at ({i},{j})"))?;
                let lower = c * Real::ratio(1, 2) * (nu.d(i, j) - Real::int(1));
                ensure(lower.le_tol(&delta.d(i, j)), format!("trial {trial}: delta < (c/2)(nu - 1) at ({i},{j})"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("100 relations, {checked} pairs"))
}

fn minimax_brute(space: &FiniteMetricSpace, a: usize, b: usize) -> Real {
    fn walk(space: &FiniteMetricSpace, at: usize, b: usize, used: &mut [bool], worst: Real, best: &mut Option<Real>) {
        if at == b {
            if best.is_none_or(|x| worst < x) {
                *best = Some(worst);
            }
            return;
        }
        for next in 0..space.len() {
            if !used[next] {
                used[next] = true;
                walk(space, next, b, used, worst.max(space.d(at, next)), best);
                used[next] = false;
            }
        }
    }
    let mut used = vec![false; space.len()];
    used[a] = true;
    let mut best = None;
    walk(space, a, b, &mut used, Real::ZERO, &mut best);
    best.unwrap()
}

fn ultrametrize_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..200 {
        let space = random_graph_space(&mut rng, 8);
        let u = space.ultrametrize();
        let twice = u.ultrametrize();
        let n = space.len();
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { Real::ZERO } else { minimax_brute(&space, i, j) };
                ensure(u.d(i, j) == expected, format!("trial {trial}: d_u({i},{j}) = {} vs {expected}", u.d(i, j)))?;
                ensure(twice.d(i, j) == u.d(i, j), format!("trial {trial}: not idempotent"))?;
                for k in 0..n {
                    ensure(u.d(i, k) <= u.d(i, j).max(u.d(j, k)), format!("trial {trial}: not ultrametric"))?;
                }
            }
        }
    }
    Ok("200 spaces".into())
}

fn rips_simple_connectivity() -> Outcome {
    let z = FiniteMetricSpace::line(&(-12..=12).collect::<Vec<_>>());
    let complex = build_rips(&z, Real::int(1));
    let betti = Pi1Data::new(&complex).map_err(err)?.betti_1();
    ensure(betti == 0, format!("betti_1(Z ball) = {betti}"))?;
    let zero = z.require("0").map_err(err)?;
    let probe = sc_probe(&z, zero, Real::int(1), Real::int(1), 32, BUDGET, 0).map_err(err)?;
    ensure(probe.contracted == 32, format!("{} of 32 loops contracted", probe.contracted))?;
    ensure(probe.h1_map_zero && !probe.sc_fails, "Z ball reported as not simply connected")?;
    let hexagon = circle(Real::int(1), 6).map_err(err)?;
    let probe = sc_probe(&hexagon, 0, Real::int(1), Real::int(1), 32, BUDGET, 0).map_err(err)?;
    ensure(!probe.h1_map_zero, "hexagon H1 map is zero")?;
    ensure(probe.sc_fails, "hexagon sc_fails unset")?;
    Ok(format!("Z ball 32/32 contracted; hexagon H1 map rank {}", probe.h1_map_rank))
}

fn rho(points: &[CirclePoint]) -> Result<i64, String> {
    Ok(rotation_number(points, Real::int(1)).map_err(err)?.rho)
}

fn chord(a: f64, b: f64) -> f64 {
    2.0 * ((a - b) / 2.0).sin().abs()
}

fn rotation_invariance() -> Outcome {
    for m in [6usize, 12, 24] {
        let turns = circle_turns(m);
        let polygon: Vec<CirclePoint> = (0..=m).map(|j| CirclePoint::Turn(turns[j % m])).collect();
        ensure(rho(&polygon)? == 3, format!("rho({m}-gon) != 3"))?;
        ensure(rho(&[CirclePoint::Turn(turns[0]), CirclePoint::Turn(turns[0])])? == 0, "rho(constant) != 0")?;
    }
    let bound = 3f64.sqrt() - 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut lp: Vec<f64> = (0..=12).map(|j| TAU * (j % 12) as f64 / 12.0).collect();
    let angles = |lp: &[f64]| lp.iter().map(|&a| CirclePoint::Angle(a)).collect::<Vec<_>>();
    let start = rho(&angles(&lp))?;
    let mut applied = 0;
    while applied < 1000 {
        if rng.gen_bool(0.5) || lp.len() < 4 {
            let at = rng.gen_range(1..lp.len());
            let x = rng.gen_range(0.0..TAU);
            if chord(lp[at - 1], x) >= bound || chord(x, lp[at]) >= bound {
                continue;
            }
            lp.insert(at, x);
        } else {
            let at = rng.gen_range(1..lp.len() - 1);
            if chord(lp[at - 1], lp[at + 1]) >= bound {
                continue;
            }
            lp.remove(at);
        }
        applied += 1;
        let now = rho(&angles(&lp))?;
        ensure(now == start, format!("move {applied}: rho {start} -> {now}"))?;
    }
    Ok(format!("rho = {start} after 1000 moves"))
}

fn highway_checks() -> Outcome {
    let space = highway(3).map_err(err)?;
    for n in 2..=3u32 {
        let a = space.require(&format!("u{}", 10usize.pow(n))).map_err(err)?;
        let b = space.require(&format!("u{}", 10usize.pow(n) + 3 * n as usize)).map_err(err)?;
        for quarter in 0..4 {
            let c = Real::int(n as i64) + Real::ratio(quarter, 4);
            let complex = build_rips(&space, c);
            ensure(complex.joined(a, b), format!("n = {n}, c = {c}: shortcut missing"))?;
            let witness = (0..space.len()).find(|&w| w != a && w != b && complex.has_triangle(a, b, w));
            ensure(witness.is_none(), format!("n = {n}, c = {c}: shortcut lies in a triangle"))?;
            let mut lp = vec![a];
            lp.extend((a..=b).rev());
            ensure(!h1_class(&complex, &lp).map_err(err)?.is_zero, format!("n = {n}, c = {c}: class is zero"))?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let (m, n) = (rng.gen_range(0..space.len()), rng.gen_range(0..space.len()));
        let gap = Real::int((m as i64 - n as i64).abs());
        let d = space.d(m, n);
        ensure((gap * Real::ratio(1, 3)).le_tol(&d) && d.le_tol(&gap), format!("d(u{m}, u{n}) = {d}"))?;
    }
    Ok("n = 2, 3 at four scales; 500 pairs".into())
}

fn tree_isoperimetry() -> Outcome {
    let start = Instant::now();
    let tree = regular_tree(3, 12);
    let sweep = tree_boundary_sweep(&tree, 0, 10).map_err(err)?;
    let elapsed = start.elapsed();
    ensure(sweep.all_hold, format!("violation {:?}", sweep.worst))?;
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("{} subsets, {:.2?}", sweep.subsets, elapsed))
}

fn folner_sets() -> Outcome {
    let z = GroupOracle::free_abelian(1);
    let w = match folner_search(&z, 1, Rational64::new(1, 2), FolnerStrategy::Greedy, 12, BUDGET).map_err(err)? {
        FolnerVerdict::Witness(w) => w,
        other => return Err(format!("Z: {other:?}")),
    };
    ensure(w.set.len() == 4 && w.ratio == Rational64::new(3, 2), format!("Z: |F| = {}, ratio {}", w.set.len(), w.ratio))?;
    ensure(recheck_folner(&z, &w, BUDGET).map_err(err)? == w.ratio, "Z: recheck differs")?;
    let f2 = GroupOracle::free(2);
    match folner_search(&f2, 1, Rational64::new(1, 10), FolnerStrategy::Exhaustive, 12, BUDGET).map_err(err)? {
        FolnerVerdict::NoWitnessWithinBudget { examined } => Ok(format!("Z: |F| = 4; F2: none in {examined} sets")),
        FolnerVerdict::Witness(w) => Err(format!("F2 witness {:?}", w.set)),
    }
}

fn defining_subsets() -> Outcome {
    let sl3 = steinberg_presentation(3).map_err(err)?;
    let q = defining_subset_presentation(&sl3, BUDGET).map_err(err)?;
    ensure(q.max_relator_length() <= 3, format!("max relator length {}", q.max_relator_length()))?;
    let check = q.relators_hold().map_err(err)?;
    ensure(check.holds, format!("failing relator {:?}", check.failing))?;
    let d4 = Presentation::from_labels(&["r", "s"], &[&[("r", 4)], &[("s", 2)], &[("r", 1), ("s", 1), ("r", 1), ("s", 1)]])
        .map_err(err)?
        .evaluate_by_label(GroupOracle::dihedral(4), "dihedral:4")
        .map_err(err)?;
    let q4 = defining_subset_presentation(&d4, BUDGET).map_err(err)?;
    let order = order_check(&q4, BUDGET).map_err(err)?;
    ensure(order.passes, format!("D4 orders {} vs {}", order.presented_order, order.evaluated_order))?;
    Ok(format!("SL3: {} letters, {} relators; D4 order {}", q.letters().len(), check.checked, order.presented_order))
}

fn classifiers() -> Outcome {
    let classify = |n, d| -> Result<GammaClass, String> {
        classify_gamma_lambda(&ValuationVector::new(Rational64::new(n, d), &[2, 3]).map_err(err)?).map_err(err)
    };
    ensure(classify(1, 6)? == GammaClass::FinitelyPresented, "1/6")?;
    ensure(classify(2, 3)? == GammaClass::FgNotFp, "2/3")?;
    ensure(classify(3, 2)? == GammaClass::FgNotFp, "3/2")?;
    ensure(classify(3, 1)? == GammaClass::NotFinitelyGenerated, "3")?;
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..500 {
        let k = rng.gen_range(1..=4);
        let mut primes = PRIMES.to_vec();
        for i in 0..k {
            let j = rng.gen_range(i..primes.len());
            primes.swap(i, j);
        }
        primes.truncate(k);
        let mut lambda = Rational64::from_integer(if rng.gen_bool(0.5) { -1 } else { 1 });
        for &p in &primes {
            lambda *= Rational64::from_integer(p as i64).pow(rng.gen_range(-3..=3));
        }
        let v = ValuationVector::new(lambda, &primes).map_err(err)?;
        let gamma = classify_gamma_lambda(&v).map_err(err)?;
        let semidirect = classify_semidirect(&hom_vector(&v)).map_err(err)?;
        ensure(semidirect == SemidirectClass::from(gamma), format!("trial {trial}: lambda {lambda} over {primes:?}"))?;
        let ascending = engulfs(&v).map_err(err)? || engulfs(&v.inverse()).map_err(err)?;
        ensure(ascending == (gamma == GammaClass::FinitelyPresented), format!("trial {trial}: engulfing disagrees"))?;
    }
    Ok("4 examples, 500 random units".into())
}

fn binary(args: &[String]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_coarse-kit"))
        .args(args)
        .env_remove("COARSEKIT_BUDGET")
        .output()
        .map_err(err)?;
    ensure(out.status.success(), format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok(out.stdout)
}

fn cli_determinism() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).map_err(err)?;
    let path = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let (hex, line, line2, z2) = (path("hex.json"), path("line.json"), path("line2.json"), path("z2.json"));
    for (kind, p) in [("circle:1:6", &hex), ("line:-4:4", &line), ("line:0:8", &line2), ("ball:abelian:2:2", &z2)] {
        binary(&["fixture".into(), kind.into(), "--out".into(), p.clone()])?;
    }
    std::fs::write(path("map.json"), r#"{"-4":"0","-3":"0","-2":"2","-1":"2","0":"4","1":"4","2":"6","3":"6","4":"8"}"#).map_err(err)?;
    std::fs::write(path("hom.json"), r#"[{"direction": [1], "scale": 2}, {"direction": [-1], "scale": 3}]"#).map_err(err)?;
    std::fs::write(path("series.csv"), "r,count\n0,1\n1,3\n2,5\n3,7\n4,9\n5,11\n6,13\n").map_err(err)?;
    let d4 = Presentation::from_labels(&["r", "s"], &[&[("r", 4)], &[("s", 2)], &[("r", 1), ("s", 1), ("r", 1), ("s", 1)]])
        .map_err(err)?
        .evaluate_by_label(GroupOracle::dihedral(4), "dihedral:4")
        .map_err(err)?;
    std::fs::write(path("d4.json"), d4.to_json()).map_err(err)?;
    let _ = std::fs::remove_file(path("heis.jsonl"));
    let series = format!("@{}", path("series.csv"));
    let runs: Vec<Vec<String>> = vec![
        vec!["ball", "--family", "heisenberg", "--radius", "5", "--cache", &path("heis.jsonl")],
        vec!["growth", "--family", "free:2", "--radius", "5"],
        vec!["growth", "--space", &hex, "--base", "c0"],
        vec!["compare-growth", "--a", "abelian:2", "--b", "free:2", "--radius", "6"],
        vec!["compare-growth", "--a", &series, "--b", "abelian:1", "--radius", "6"],
        vec!["poldeg", "--source", "abelian:2", "--radius", "12"],
        vec!["distortion", "--family", "heisenberg", "--element", "u", "--n-max", "16", "--max-radius", "12"],
        vec!["lattice", "--space", &z2, "--c", "2"],
        vec!["folner", "--family", "abelian:1", "--epsilon", "1/2"],
        vec!["tree-check", "--depth", "8", "--max-size", "7"],
        vec!["tree-check", "--depth", "4", "--subset", "0,1,2"],
        vec!["ultrametrize", "--space", &hex],
        vec!["components", "--space", &line, "--c", "1"],
        vec!["controls", "--domain", &line, "--codomain", &line2, "--map", &path("map.json")],
        vec!["rips", "--space", &hex, "--c", "1"],
        vec!["h1", "--space", &hex, "--c", "1", "--loop", "c0,c1,c2,c3,c4,c5,c0"],
        vec!["contract", "--space", &z2, "--c", "1", "--loop", "(0,0);(1,0);(1,1);(0,1);(0,0)"],
        vec!["sc-probe", "--space", &hex, "--base", "c0", "--c1", "1", "--c2", "1", "--samples", "8"],
        vec!["--seed", "9", "sc-probe", "--space", &line, "--base", "0", "--c1", "1", "--c2", "1"],
        vec!["rotation", "--circle", "1:12", "--loop", "polygon"],
        vec!["fixture", "highway:2"],
        vec!["defining-subset", "--presentation", &path("d4.json"), "--order-check"],
        vec!["verify-presentation", "--presentation", &path("d4.json"), "--order-check"],
        vec!["engulfs", "--lambda", "6", "--primes", "2,3"],
        vec!["classify-bs", "--lambda", "3/2", "--primes", "2,3"],
        vec!["classify-semidirect", "--hom", &path("hom.json")],
        vec!["classify-semidirect", "--lambda", "1/6", "--primes", "2,3"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    let mut commands = std::collections::BTreeSet::new();
    for args in &runs {
        let first = binary(args)?;
        ensure(!first.is_empty(), format!("{args:?}: empty output"))?;
        for rep in 1..10 {
            ensure(binary(args)? == first, format!("{args:?}: run {rep} differs"))?;
        }
        commands.insert(args.iter().find(|a| !a.starts_with('-') && a.parse::<u64>().is_err()).cloned().unwrap_or_default());
    }
    Ok(format!("{} invocations over {} subcommands, 10 runs each", runs.len(), commands.len()))
}

fn main() {
    let criteria: [(&str, Check); 12] = [
        ("heisenberg distortion", heisenberg_distortion),
        ("ball sizes and growth degree", ball_closed_forms),
        ("step metric bounds", step_metric_bounds),
        ("ultrametrization", ultrametrize_oracle),
        ("rips simple connectivity", rips_simple_connectivity),
        ("circle rotation number", rotation_invariance),
        ("highway space", highway_checks),
        ("tree isoperimetry", tree_isoperimetry),
        ("folner sets", folner_sets),
        ("defining subsets", defining_subsets),
        ("splitting classifiers", classifiers),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panic: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
