use rand::Rng;

use cpalign::rng;
use cpalign::sim::average_precision;

/// 11-point AP from every score cutoff, enumerated directly.
fn brute_ap(scored: &[(f64, bool)], n_gt: usize) -> f64 {
    let cutoffs: Vec<(f64, f64)> = scored
        .iter()
        .map(|&(thr, _)| {
            let kept: Vec<bool> = scored.iter().filter(|(s, _)| *s >= thr).map(|(_, tp)| *tp).collect();
            let tp = kept.iter().filter(|&&t| t).count() as f64;
            (tp / n_gt as f64, tp / kept.len() as f64)
        })
        .collect();
    (0..=10)
        .map(|k| {
            cutoffs
                .iter()
                .filter(|(rec, _)| *rec >= k as f64 / 10.0 - 1e-12)
                .map(|(_, p)| *p)
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 11.0
}

#[test]
fn ap_matches_enumeration() {
    let mut r = rng::stream(21, 0);
    for _ in 0..200 {
        let n = r.random_range(1..20);
        // distinct scores so every cutoff is a prefix
        let scored: Vec<(f64, bool)> = (0..n).map(|i| (i as f64 + r.random::<f64>() * 0.5, r.random_bool(0.6))).collect();
        let tps = scored.iter().filter(|(_, t)| *t).count();
        let n_gt = tps + r.random_range(0..4);
        if n_gt == 0 {
            continue;
        }
        let got = average_precision(&scored, n_gt);
        assert!((got - brute_ap(&scored, n_gt)).abs() < 1e-12);
    }
}

#[test]
fn ap_edge_cases() {
    assert_eq!(average_precision(&[], 3), 0.0);
    assert_eq!(average_precision(&[(0.9, true)], 0), 0.0);
    assert!((average_precision(&[(0.9, true), (0.8, true)], 2) - 1.0).abs() < 1e-12);
}
