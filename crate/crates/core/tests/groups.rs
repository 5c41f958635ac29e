use std::collections::{HashMap, VecDeque};

use coarse_kit::groups::{word_length, BallTable, GroupOracle, StepRelation, DEFAULT_BUDGET};
use coarse_kit::{FiniteMetricSpace, Real};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Mat3 = [[i64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn unitriangular(a: i64, b: i64, c: i64) -> Mat3 {
    [[1, a, c], [0, 1, b], [0, 0, 1]]
}

/// Word lengths in the integer Heisenberg group by breadth-first search on
/// unitriangular matrices.
fn heisenberg_lengths(radius: u32) -> HashMap<Mat3, u32> {
    let gens = [
        unitriangular(1, 0, 0),
        unitriangular(-1, 0, 0),
        unitriangular(0, 1, 0),
        unitriangular(0, -1, 0),
        unitriangular(0, 0, 1),
        unitriangular(0, 0, -1),
    ];
    let mut seen = HashMap::from([(unitriangular(0, 0, 0), 0)]);
    let mut queue = VecDeque::from([unitriangular(0, 0, 0)]);
    while let Some(g) = queue.pop_front() {
        let l = seen[&g];
        if l == radius {
            continue;
        }
        for s in &gens {
            let h = mat_mul(&g, s);
            if let std::collections::hash_map::Entry::Vacant(slot) = seen.entry(h) {
                slot.insert(l + 1);
                queue.push_back(h);
            }
        }
    }
    seen
}

#[test]
fn abelian_and_free_ball_sizes_follow_closed_forms() {
    let z2 = BallTable::build(&GroupOracle::free_abelian(2), 8, DEFAULT_BUDGET).unwrap();
    for (r, n) in z2.ball_sizes().into_iter().enumerate() {
        let r = r as u64;
        assert_eq!(n, 2 * r * r + 2 * r + 1);
    }
    let f2 = BallTable::build(&GroupOracle::free(2), 7, DEFAULT_BUDGET).unwrap();
    for (r, n) in f2.ball_sizes().into_iter().enumerate() {
        assert_eq!(n, 2 * 3u64.pow(r as u32) - 1);
    }
}

#[test]
fn heisenberg_lengths_match_matrix_search() {
    let oracle = GroupOracle::heisenberg();
    let table = BallTable::build(&oracle, 8, DEFAULT_BUDGET).unwrap();
    let reference = heisenberg_lengths(8);
    assert_eq!(table.len(), reference.len());
    for n in 0..=12i64 {
        let u = oracle.parse_word(&format!("u^{n}")).unwrap();
        let expected = reference.get(&unitriangular(0, 0, n)).copied();
        assert_eq!(table.length(&oracle.key(&u)), expected, "u^{n}");
    }
}

#[test]
fn heisenberg_generators_are_undistorted_and_center_is_quadratic() {
    let oracle = GroupOracle::heisenberg();
    for k in 1..=6 {
        for g in ["s", "t"] {
            let e = oracle.parse_word(&format!("{g}^{k}")).unwrap();
            assert_eq!(word_length(&oracle, &e, 10, DEFAULT_BUDGET).unwrap(), k as u32);
        }
    }
    for k in 1..=3i64 {
        let e = oracle.parse_word(&format!("u^{}", k * k)).unwrap();
        assert!(word_length(&oracle, &e, 12, DEFAULT_BUDGET).unwrap() <= 4 * k as u32);
    }
}

#[test]
fn baumslag_solitar_powers_are_exponentially_distorted() {
    let oracle = GroupOracle::baumslag_solitar(2);
    for k in 1..=5u32 {
        let e = oracle.parse_word(&format!("s^{}", 2i64.pow(k))).unwrap();
        assert!(word_length(&oracle, &e, 2 * k + 1, DEFAULT_BUDGET).unwrap() <= 2 * k + 1);
    }
}

#[test]
fn ball_cache_round_trips_bitwise() {
    for spec in ["free:2", "heisenberg", "bs:2", "lamplighter:2", "dihedral:4"] {
        let oracle = GroupOracle::from_spec(spec).unwrap();
        let table = BallTable::build(&oracle, 4, DEFAULT_BUDGET).unwrap();
        let text = table.to_jsonl();
        let back = BallTable::from_jsonl(&oracle, &text).unwrap();
        assert_eq!(back.to_jsonl(), text, "{spec}");
    }
}

fn random_space(rng: &mut ChaCha8Rng) -> FiniteMetricSpace {
    let n = rng.gen_range(2..=20);
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

#[test]
fn step_metrics_satisfy_the_two_sided_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let space = random_space(&mut rng);
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
        let rel = StepRelation::new(space.clone(), &pairs).unwrap();
        assert!(rel.is_controlled(c, big_c));
        let (nu, delta) = (rel.nu_metric(), rel.delta_metric());
        for i in 0..n {
            for j in 0..n {
                assert!(delta.d(i, j).le_tol(&(big_c * nu.d(i, j))));
                let lower = c * Real::ratio(1, 2) * (nu.d(i, j) - Real::int(1));
                assert!(lower.le_tol(&delta.d(i, j)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn word_length_is_symmetric_and_subadditive(
        spec in prop::sample::select(vec!["free:2", "abelian:3", "heisenberg", "bs:2", "lamplighter:2"]),
        a in prop::collection::vec(0usize..8, 0..5),
        b in prop::collection::vec(0usize..8, 0..5),
    ) {
        let oracle = GroupOracle::from_spec(spec).unwrap();
        let gens = oracle.generators();
        let build = |w: &[usize]| w.iter().fold(oracle.identity(), |acc, &i| oracle.multiply(&acc, &gens[i % gens.len()].element));
        let (g, h) = (build(&a), build(&b));
        let len = |e: &coarse_kit::groups::Element| word_length(&oracle, e, 10, DEFAULT_BUDGET).unwrap();
        let (lg, lh) = (len(&g), len(&h));
        prop_assert!(lg as usize <= a.len());
        let inv = oracle.inverse(&g);
        prop_assert_eq!(lg, len(&inv));
        let gh = oracle.multiply(&g, &h);
        prop_assert!(len(&gh) <= lg + lh);
    }
}
