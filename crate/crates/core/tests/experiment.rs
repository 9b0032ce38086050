use hls_lab_core::experiment::*;
use hls_lab_testkit as oracle;
use proptest::prelude::*;

#[test]
fn normal_quantile_matches_quadrature() {
    let mut p = 1e-6;
    while p < 1.0 - 1e-6 {
        let got: f64 = inverse_normal(p).unwrap();
        let want = oracle::normal_quantile(p);
        assert!((got - want).abs() <= 1e-7, "p={p}: {got} vs {want}");
        p += if p < 0.01 || p > 0.99 { 7.3e-4 } else { 0.0173 };
    }
    assert_eq!(inverse_normal(0.5f64).unwrap(), 0.0);
    assert!((inverse_normal(0.841_344_746_1f64).unwrap() - 1.0).abs() <= 1e-6);
    for p in [0.001, 0.2, 0.37] {
        let a: f64 = inverse_normal(p).unwrap();
        let b: f64 = inverse_normal(1.0 - p).unwrap();
        assert!((a + b).abs() < 1e-12);
    }
    assert!(inverse_normal(0.0f64).is_err() && inverse_normal(1.0f64).is_err());
}

#[test]
fn t_quantile_matches_quadrature() {
    for df in [1.0, 2.0, 3.0, 5.0, 9.0, 14.0, 30.0] {
        for p in [0.6, 0.9, 0.975, 0.995] {
            let got: f64 = t_quantile(p, df).unwrap();
            let want = oracle::t_quantile(p, df);
            assert!((got - want).abs() <= 1e-7 * want.abs().max(1.0), "df={df} p={p}: {got} vs {want}");
        }
    }
}

#[test]
fn session_arithmetic() {
    let conds = ["d1", "d05", "d0", "f05", "ext"];
    assert_eq!(build_pairs(&conds).len(), 20);
    let words: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
    let items4: Vec<String> = (0..4).map(|i| format!("i{i}")).collect();
    let conds: Vec<String> = conds.iter().map(|s| s.to_string()).collect();
    assert_eq!(build_session("a", &words, &conds, Phase::Main, 1).unwrap().trials.len(), 200);
    assert_eq!(build_session("b", &items4, &conds, Phase::Main, 1).unwrap().trials.len(), 80);
    let s = PassThreshold::SPEECH;
    assert!(s.passes(10, 12) && !s.passes(9, 12));
    let i = PassThreshold::INSTRUMENT;
    assert!(i.passes(7, 8) && !i.passes(6, 8));
}

fn matrix(counts: Vec<Vec<u32>>) -> PreferenceMatrix {
    let labels: Vec<String> = (0..counts.len()).map(|i| format!("c{i}")).collect();
    PreferenceMatrix::from_counts(&labels, counts).unwrap()
}

fn counts_strategy(k: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(0u32..20, k), k).prop_map(|mut c| {
        for (i, row) in c.iter_mut().enumerate() {
            row[i] = 0;
        }
        // every pair needs at least one trial
        let k = c.len();
        for i in 0..k {
            for j in i + 1..k {
                if c[i][j] + c[j][i] == 0 {
                    c[i][j] = 1;
                }
            }
        }
        c
    })
}

#[test]
fn uniform_preferences_give_zero_scores() {
    for k in 2..7 {
        let c = (0..k).map(|i| (0..k).map(|j| if i == j { 0 } else { 10 }).collect()).collect();
        let s: Vec<f64> = thurstone_scores(&matrix(c), ScalingOptions::default()).unwrap();
        assert!(s.iter().all(|v| v.abs() <= 1e-9));
    }
}

#[test]
fn unit_separation_example() {
    // p(c0 preferred) = Phi(1): scores +-0.5
    let p = oracle::normal_cdf(1.0);
    let s: Vec<f64> = thurstone_from_proportions(&[vec![0.5, p], vec![1.0 - p, 0.5]]).unwrap();
    assert!((s[0] - 0.5).abs() < 1e-9 && (s[1] + 0.5).abs() < 1e-9);
}

#[test]
fn thousand_random_matrices_sum_to_zero() {
    let mut g = oracle::rng(99);
    use rand::Rng;
    for _ in 0..1000 {
        let k = g.random_range(2..8);
        let mut c = vec![vec![0u32; k]; k];
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    c[i][j] = g.random_range(0..15);
                }
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                if c[i][j] + c[j][i] == 0 {
                    c[j][i] = 1;
                }
            }
        }
        let s: Vec<f64> = thurstone_scores(&matrix(c), ScalingOptions::default()).unwrap();
        assert!(s.iter().sum::<f64>().abs() <= 1e-9);
    }
}

proptest! {
    #[test]
    fn relabeling_permutes_scores(c in counts_strategy(5), perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
        let s: Vec<f64> = thurstone_scores(&matrix(c.clone()), ScalingOptions::default()).unwrap();
        let pc: Vec<Vec<u32>> = (0..5).map(|i| (0..5).map(|j| c[perm[i]][perm[j]]).collect()).collect();
        let ps: Vec<f64> = thurstone_scores(&matrix(pc), ScalingOptions::default()).unwrap();
        for i in 0..5 {
            prop_assert!((ps[i] - s[perm[i]]).abs() <= 1e-12);
        }
    }

    #[test]
    fn preferring_a_condition_never_lowers_its_score(c in counts_strategy(4), i in 0usize..4, j in 0usize..4) {
        prop_assume!(i != j);
        let before: Vec<f64> = thurstone_scores(&matrix(c.clone()), ScalingOptions::default()).unwrap();
        let mut more = c;
        more[j][i] += 1; // j judged more distorted than i once more
        let after: Vec<f64> = thurstone_scores(&matrix(more), ScalingOptions::default()).unwrap();
        prop_assert!(after[i] >= before[i] - 1e-12);
    }
}

/// 15 listeners, each judging every unordered pair of 5 conditions 20 times
/// (10 items x 20 ordered pairs = 200 trials).
fn planted_run(latent: &[f64], seed: u64) -> bool {
    let mut g = oracle::rng(seed);
    let table: Vec<Vec<f64>> = (0..15)
        .map(|_| thurstone_scores(&matrix(oracle::simulate_counts(latent, 20, &mut g)), ScalingOptions::default()).unwrap())
        .collect();
    let means = mean_ci(&table, 0.99).unwrap().means;
    let mut order: Vec<usize> = (0..latent.len()).collect();
    order.sort_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap());
    let mut planted: Vec<usize> = (0..latent.len()).collect();
    planted.sort_by(|&a, &b| latent[a].partial_cmp(&latent[b]).unwrap());
    order == planted
}

#[test]
fn planted_ordering_is_recovered() {
    let latent = [0.6, -0.3, 0.0, 0.3, -0.6];
    let hits = (0..100).filter(|&s| planted_run(&latent, 1000 + s)).count();
    assert!(hits >= 99, "{hits}/100");
}

#[test]
fn ci_two_listener_example() {
    let r = mean_ci(&[vec![0.0f64, 0.0], vec![2.0, -2.0]], 0.99).unwrap();
    assert!((r.means[0] - 1.0).abs() < 1e-12);
    let t = oracle::t_quantile(0.995, 1.0);
    assert!((r.half_widths[0] - t).abs() <= 1e-6 * t);
    assert!(r.means.iter().sum::<f64>().abs() < 1e-12);
}

#[test]
fn hsd_agrees_with_permutation_test_on_direction() {
    // conditions 0,1 high, 2,3 low, large separation
    let mut g = oracle::rng(5);
    use rand::Rng;
    let table: Vec<Vec<f64>> = (0..12)
        .map(|_| {
            let mut row: Vec<f64> = [1.0, 1.0, -1.0, -1.0].iter().map(|m| m + g.random_range(-0.2..0.2)).collect();
            let mean = row.iter().sum::<f64>() / 4.0;
            row.iter_mut().for_each(|v| *v -= mean);
            row
        })
        .collect();
    let hsd = tukey_hsd(&table, Some(4.0)).unwrap();
    for p in &hsd.pairs {
        let diffs: Vec<f64> = table.iter().map(|r| r[p.i] - r[p.j]).collect();
        let pv = oracle::sign_flip_p_value(&diffs);
        let perm_sig = pv < 0.01;
        assert_eq!(p.significant, perm_sig, "pair ({}, {}): q={} p={pv}", p.i, p.j, p.q);
        if p.significant {
            assert_eq!(p.mean_difference > 0.0, diffs.iter().sum::<f64>() > 0.0);
        }
    }
    assert!(hsd.pair(0, 2).unwrap().significant && !hsd.pair(0, 1).unwrap().significant);
}

#[test]
fn fixture_log_scores_bit_stably() {
    let mut g = oracle::rng(8);
    let conds = ["A", "B", "C"];
    let latent = [0.4, 0.0, -0.4];
    let mut log = String::new();
    for l in 0..4 {
        let c = oracle::simulate_counts(&latent, 6, &mut g);
        let mut n = 0;
        for i in 0..3 {
            for j in 0..3 {
                for _ in 0..c[i][j] {
                    let r = ResponseRecord {
                        session_id: format!("s{l}"),
                        participant_id: format!("p{l}"),
                        trial_index: n,
                        item: "w".into(),
                        pair: (conds[i].into(), conds[j].into()),
                        choice: Choice::First,
                        timestamp: 1,
                        phase: Phase::Main,
                    };
                    n += 1;
                    log.push_str(&serde_json::to_string(&r).unwrap());
                    log.push('\n');
                }
            }
        }
    }
    let run = || {
        let r = parse_response_log(&log).unwrap();
        let c = conditions_in_log(&r);
        serde_json::to_string(&score_responses::<f64>(&r, &c, &ScoreOptions::default()).unwrap()).unwrap()
    };
    assert_eq!(run(), run());
}
