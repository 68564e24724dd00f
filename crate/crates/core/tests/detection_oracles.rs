use chrono::{Duration, NaiveDate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wlan_core::detection::{
    average_path_length, c_factor, dbscan, dynamic_threshold_alerts, fit_isolation_forest,
    iforest_score, score_from_path, threshold_alert_indices, ForestParams, Label, Node,
};
use wlan_core::{AnomalyType, Metric};

// ---- DBSCAN reference -------------------------------------------------------

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Brute-force DBSCAN: core points are those with at least `min_pts`
/// neighbours (self included) within `eps`; clusters are the connected
/// components of the core graph, numbered by their smallest core index; a
/// border point takes the smallest cluster number among its core neighbours.
fn reference_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Label> {
    let n = points.len();
    let near = |i: usize, j: usize| dist(&points[i], &points[j]) <= eps;
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts)
        .collect();

    // component id per core point, by repeated relaxation to the minimum index
    let mut comp: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if core[i] && core[j] && near(i, j) && comp[j] < comp[i] {
                    comp[i] = comp[j];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut roots: Vec<usize> = (0..n).filter(|&i| core[i]).map(|i| comp[i]).collect();
    roots.sort_unstable();
    roots.dedup();
    let number = |root: usize| roots.iter().position(|&r| r == root).unwrap();

    (0..n)
        .map(|i| {
            if core[i] {
                Label::Cluster(number(comp[i]))
            } else {
                (0..n)
                    .filter(|&j| core[j] && near(i, j))
                    .map(|j| number(comp[j]))
                    .min()
                    .map_or(Label::Noise, Label::Cluster)
            }
        })
        .collect()
}

/// Partition as a sorted list of sorted member lists, noise listed last.
fn canonical(labels: &[Label], ids: &[usize]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut clusters: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    let mut noise = Vec::new();
    for (l, &id) in labels.iter().zip(ids) {
        match l {
            Label::Cluster(c) => clusters.entry(*c).or_default().push(id),
            Label::Noise => noise.push(id),
        }
    }
    let mut parts: Vec<Vec<usize>> = clusters
        .into_values()
        .map(|mut v| {
            v.sort_unstable();
            v
        })
        .collect();
    parts.sort();
    noise.sort_unstable();
    (parts, noise)
}

fn blobs_and_scatter(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::new();
    for c in [[0.0, 0.0], [10.0, 10.0]] {
        for _ in 0..20 {
            pts.push(vec![
                c[0] + rng.random_range(-1.0..1.0),
                c[1] + rng.random_range(-1.0..1.0),
            ]);
        }
    }
    pts.extend([vec![30.0, -5.0], vec![-20.0, 25.0], vec![5.0, 40.0]]);
    pts
}

#[test]
fn dbscan_matches_reference_on_two_blobs() {
    let pts = blobs_and_scatter(1);
    let got = dbscan(&pts, 1.5, 4);
    assert_eq!(got, reference_dbscan(&pts, 1.5, 4));
    assert_eq!(got[40..], [Label::Noise; 3]);
    assert!(got[..20].iter().all(|l| *l == Label::Cluster(0)));
    assert!(got[20..40].iter().all(|l| *l == Label::Cluster(1)));
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, f64, usize)> {
    (1usize..=4).prop_flat_map(|d| {
        (
            prop::collection::vec(prop::collection::vec(-10.0..10.0f64, d), 0..=60),
            0.5..6.0f64,
            1usize..6,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dbscan_equals_reference((pts, eps, min_pts) in instance()) {
        prop_assert_eq!(dbscan(&pts, eps, min_pts), reference_dbscan(&pts, eps, min_pts));
    }

    #[test]
    fn dbscan_partition_survives_permutation((pts, eps, min_pts) in instance(), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..pts.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<Vec<f64>> = order.iter().map(|&i| pts[i].clone()).collect();
        let got = canonical(&dbscan(&permuted, eps, min_pts), &order);
        let want = canonical(&reference_dbscan(&permuted, eps, min_pts), &order);
        prop_assert_eq!(&got, &want);
        // noise never depends on order
        let base = canonical(&dbscan(&pts, eps, min_pts), &(0..pts.len()).collect::<Vec<_>>());
        prop_assert_eq!(got.1, base.1);
    }

    #[test]
    fn dbscan_partition_is_scale_free((pts, eps, min_pts) in instance(), exp in -3i32..=3) {
        // powers of two scale distances without rounding
        let s = 2f64.powi(exp);
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x * s).collect()).collect();
        prop_assert_eq!(dbscan(&scaled, eps * s, min_pts), dbscan(&pts, eps, min_pts));
    }
}

// ---- isolation forest -------------------------------------------------------

#[test]
fn hand_traced_single_tree() {
    // c(8) = 2 H(7) - 2*7/8, H(7) = 363/140
    let c8 = 2.0 * 363.0 / 140.0 - 1.75;
    assert!((c_factor(8) - c8).abs() < 1e-12);

    let pts: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 50.0]
        .iter()
        .map(|&x| vec![x, x * 0.5])
        .collect();
    let model = fit_isolation_forest(
        &pts,
        &ForestParams {
            n_trees: 1,
            subsample_size: 8,
            seed: 3,
        },
    )
    .unwrap();
    assert_eq!(model.depth_limit(), 3);
    let nodes = &model.trees[0].nodes;

    // Seed 3 builds (values rounded):
    //   0: y < 7.46   -> 1 | 8 (leaf, the outlier)
    //   1: y < 0.61   -> 2 | 5
    //   5: x < 3.00   -> 6 (leaf {x=2}) | 7 (leaf {3,4,5,6})
    // so (2, 1) goes 0 -> 1 -> 5 -> 6 and is isolated at depth 3.
    let split = |i: usize| match nodes[i] {
        Node::Split {
            dim,
            value,
            left,
            right,
        } => (dim, value, left as usize, right as usize),
        Node::Leaf { .. } => panic!("node {i} should split"),
    };
    let (d0, v0, l0, r0) = split(0);
    assert!(d0 == 1 && (3.0..25.0).contains(&v0));
    assert_eq!(nodes[r0], Node::Leaf { size: 1 });
    let (d1, v1, _, r1) = split(l0);
    assert!(d1 == 1 && (0.5..1.0).contains(&v1));
    let (d5, v5, l5, r5) = split(r1);
    assert!(d5 == 0 && (2.0..3.0).contains(&v5));
    assert_eq!(nodes[l5], Node::Leaf { size: 1 });
    assert_eq!(nodes[r5], Node::Leaf { size: 4 });

    let x = &pts[2];
    assert_eq!(model.trees[0].path_length(x), 3.0);
    let want = 2f64.powf(-3.0 / c8);
    assert!((iforest_score(&model, x) - want).abs() < 1e-12);
    // the outlier is cut off at the root
    assert!((iforest_score(&model, &pts[7]) - 2f64.powf(-1.0 / c8)).abs() < 1e-12);
}

#[test]
fn planted_outlier_scores_highest() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pts: Vec<Vec<f64>> = (0..100)
        .map(|_| {
            vec![
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect();
    pts.push(vec![25.0, -25.0, 25.0]);
    let model = fit_isolation_forest(
        &pts,
        &ForestParams {
            n_trees: 100,
            subsample_size: 64,
            seed: 11,
        },
    )
    .unwrap();
    let scores: Vec<f64> = pts.iter().map(|p| iforest_score(&model, p)).collect();
    let paths: Vec<f64> = pts.iter().map(|p| average_path_length(&model, p)).collect();
    for i in 0..100 {
        assert!(scores[100] > scores[i]);
        assert!(paths[100] < paths[i]);
    }
    assert!(scores.iter().all(|&s| s > 0.0 && s <= 1.0));
}

#[test]
fn forest_is_deterministic_per_seed() {
    let pts = blobs_and_scatter(4);
    let p = ForestParams {
        n_trees: 50,
        subsample_size: 32,
        seed: 99,
    };
    assert_eq!(
        fit_isolation_forest(&pts, &p).unwrap(),
        fit_isolation_forest(&pts, &p).unwrap()
    );
    let other = ForestParams { seed: 100, ..p };
    assert_ne!(
        fit_isolation_forest(&pts, &p).unwrap(),
        fit_isolation_forest(&pts, &other).unwrap()
    );
}

proptest! {
    #[test]
    fn score_is_monotone_in_path_length(a in 0.0..40.0f64, b in 0.0..40.0f64, psi in 2usize..300) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (s_lo, s_hi) = (score_from_path(lo, psi), score_from_path(hi, psi));
        prop_assert!(s_hi <= s_lo);
        prop_assert!(s_hi > 0.0 && s_lo <= 1.0);
    }
}

// ---- dynamic thresholds -----------------------------------------------------

#[test]
fn dated_alerts_carry_type_and_day() {
    let d0 = NaiveDate::from_ymd_opt(2025, 4, 7).unwrap();
    let series: Vec<(NaiveDate, f64)> = [100.0, 102.0, 98.0, 101.0, 250.0]
        .iter()
        .enumerate()
        .map(|(i, &v)| (d0 + Duration::days(i as i64), v))
        .collect();
    let found = dynamic_threshold_alerts(
        &series,
        4,
        3.0,
        AnomalyType::AuthBurst,
        Metric::AuthFailures,
    )
    .unwrap();
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].day, d0 + Duration::days(4));
    assert_eq!(found[0].kind, AnomalyType::AuthBurst);
}

proptest! {
    #[test]
    fn threshold_alerts_are_translation_invariant(
        values in prop::collection::vec(0.0..500.0f64, 6..60),
        c in -1e4..1e4f64,
        window in 2usize..6,
        k in 1.0..4.0f64,
    ) {
        let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
        let a = threshold_alert_indices(&values, window, k).unwrap();
        let b = threshold_alert_indices(&shifted, window, k).unwrap();
        // points sitting on the band edge may flip on rounding; skip them
        let edge = |t: usize| {
            let w = &values[t - window..t];
            let m = w.iter().sum::<f64>() / window as f64;
            let sd = (w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (window - 1) as f64).sqrt();
            ((values[t] - m).abs() - k * sd).abs() < 1e-6 * (1.0 + k * sd + c.abs())
        };
        let ia: Vec<usize> = a.iter().map(|x| x.index).filter(|&t| !edge(t)).collect();
        let ib: Vec<usize> = b.iter().map(|x| x.index).filter(|&t| !edge(t)).collect();
        prop_assert_eq!(ia, ib);
    }
}
