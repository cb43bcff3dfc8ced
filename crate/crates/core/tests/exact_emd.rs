use gmdalign_core::gmd::{exact_emd, exact_transport_plan, greedy_transport, CostMatrix};
use proptest::prelude::*;

/// With uniform weights on both sides the optimum sits at a permutation
/// (Birkhoff), so brute force over all of them is an exact oracle.
fn best_permutation(n: usize, cost: &CostMatrix) -> f64 {
    fn go(i: usize, used: &mut Vec<bool>, acc: f64, n: usize, cost: &CostMatrix, best: &mut f64) {
        if i == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                go(i + 1, used, acc + cost.get(i, j), n, cost, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, &mut vec![false; n], 0.0, n, cost, &mut best);
    best / n as f64
}

/// A feasible plan is optimal iff its residual graph has no negative cycle.
/// Floyd-Warshall over sources `0..m` and sinks `m..m+n`.
fn has_negative_cycle(plan: &[f64], m: usize, n: usize, cost: &CostMatrix) -> bool {
    let size = m + n;
    let mut d = vec![vec![f64::INFINITY; size]; size];
    for (k, row) in d.iter_mut().enumerate() {
        row[k] = 0.0;
    }
    for i in 0..m {
        for j in 0..n {
            // Forward arcs are uncapacitated; a reverse arc exists where flow > 0.
            d[i][m + j] = d[i][m + j].min(cost.get(i, j));
            if plan[i * n + j] > 1e-12 {
                d[m + j][i] = d[m + j][i].min(-cost.get(i, j));
            }
        }
    }
    for k in 0..size {
        for i in 0..size {
            for j in 0..size {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    (0..size).any(|k| d[k][k] < -1e-9)
}

fn simplex(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, CostMatrix)> {
    (1usize..=8, 1usize..=8).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(0.01f64..1.0, m),
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(0.0f64..10.0, m * n),
        )
            .prop_map(move |(a, b, c)| (simplex(a), simplex(b), CostMatrix::new(m, n, c)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_permutation_brute_force(n in 1usize..=6, c in prop::collection::vec(0.0f64..10.0, 36)) {
        let cost = CostMatrix::from_fn(n, n, |i, j| c[i * 6 + j]);
        let w = vec![1.0 / n as f64; n];
        let exact = exact_emd(&w, &w, &cost).unwrap();
        let brute = best_permutation(n, &cost);
        prop_assert!((exact - brute).abs() <= 1e-9, "exact {} brute {}", exact, brute);
    }

    #[test]
    fn plan_is_feasible_and_optimal((a, b, cost) in instance()) {
        let (m, n) = (a.len(), b.len());
        let plan = exact_transport_plan(&a, &b, &cost).unwrap();
        prop_assert!(plan.iter().all(|&f| f >= -1e-12));
        for i in 0..m {
            let row: f64 = plan[i * n..(i + 1) * n].iter().sum();
            prop_assert!((row - a[i]).abs() <= 1e-9);
        }
        for j in 0..n {
            let col: f64 = (0..m).map(|i| plan[i * n + j]).sum();
            prop_assert!((col - b[j]).abs() <= 1e-9);
        }
        prop_assert!(!has_negative_cycle(&plan, m, n, &cost));
    }

    #[test]
    fn greedy_is_feasible_and_never_below_exact((a, b, cost) in instance()) {
        let trace = greedy_transport(&a, &b, &cost).unwrap();
        let (m, n) = (a.len(), b.len());
        let mut rows = vec![0.0; m];
        let mut cols = vec![0.0; n];
        for mv in &trace.moves {
            prop_assert!(mv.flow > 0.0);
            rows[mv.source] += mv.flow;
            cols[mv.target] += mv.flow;
        }
        for i in 0..m {
            prop_assert!((rows[i] - a[i]).abs() <= 1e-9);
        }
        for j in 0..n {
            prop_assert!((cols[j] - b[j]).abs() <= 1e-9);
        }
        prop_assert!(trace.total_cost >= exact_emd(&a, &b, &cost).unwrap() - 1e-9);
    }
}

#[test]
fn greedy_can_be_strictly_worse() {
    // Greedy grabs the 0-cost cell and is forced onto the 10-cost one; the
    // optimum pays 1 + 1.
    let cost = CostMatrix::new(2, 2, vec![0.0, 1.0, 1.0, 10.0]);
    let w = [0.5, 0.5];
    let g = greedy_transport(&w, &w, &cost).unwrap().total_cost;
    let e = exact_emd(&w, &w, &cost).unwrap();
    assert!((g - 5.0).abs() < 1e-12);
    assert!((e - 1.0).abs() < 1e-12);
}

#[test]
fn symmetric_under_ties() {
    // Integer costs make ties common. Tied cells (i, j) and (j, i) never share
    // a row or column, so both directions move the same flows; only the
    // order of the additions into the total can differ.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5000 {
        let (m, n) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let a = simplex((0..m).map(|_| rng.random_range(0.01..1.0)).collect());
        let b = simplex((0..n).map(|_| rng.random_range(0.01..1.0)).collect());
        let c = CostMatrix::from_fn(m, n, |_, _| f64::from(rng.random_range(0u8..3)));
        let ab = greedy_transport(&a, &b, &c).unwrap();
        let ba = greedy_transport(&b, &a, &c.transpose()).unwrap();
        let key = |v: Vec<(usize, usize, f64)>| {
            let mut v: Vec<(usize, usize, u64)> = v.into_iter().map(|(i, j, f)| (i, j, f.to_bits())).collect();
            v.sort_unstable();
            v
        };
        let forward = key(ab.moves.iter().map(|mv| (mv.source, mv.target, mv.flow)).collect());
        let backward = key(ba.moves.iter().map(|mv| (mv.target, mv.source, mv.flow)).collect());
        assert_eq!(forward, backward, "{m}x{n}");
        assert!((ab.total_cost - ba.total_cost).abs() <= 1e-12 * ab.total_cost.max(1.0));
    }
}
