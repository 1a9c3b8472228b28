//! Farthest point sampling.

use crate::error::{Error, Result};

/// Number of points kept when sampling `n` points at ratio `beta`: `⌈β·n⌉`.
///
/// A small slack absorbs products such as `0.6 · 100 = 60.000000000000007`.
pub fn sample_count(n: usize, beta: f64) -> usize {
    if n == 0 {
        return 0;
    }
    let raw = (beta * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy farthest point sampling of `⌈β·n⌉` points.
///
/// The first pick is the point farthest from the centroid; each later pick
/// maximises its minimum distance to the picks so far. Ties go to the lowest
/// index. Returned indices are in ascending (input) order.
pub fn fps<P: AsRef<[f64]>>(points: &[P], beta: f64) -> Result<Vec<usize>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::OutOfRange(format!("sampling ratio {beta} outside (0, 1]")));
    }
    let n = points.len();
    let k = sample_count(n, beta);
    if k == n {
        return Ok((0..n).collect());
    }
    let dim = points[0].as_ref().len();
    let mut centroid = vec![0.0; dim];
    for p in points {
        for (c, v) in centroid.iter_mut().zip(p.as_ref()) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);

    let mut seed = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = dist2(p.as_ref(), &centroid);
        if d > best {
            best = d;
            seed = i;
        }
    }

    // flat coordinates and a shrinking list of unpicked indices
    let flat: Vec<f64> = points.iter().flat_map(|p| p.as_ref().iter().copied()).collect();
    let mut chosen = vec![false; n];
    let mut open: Vec<usize> = (0..n).collect();
    let mut min_d = vec![f64::INFINITY; n];
    let mut pick = seed;
    for _ in 0..k {
        chosen[pick] = true;
        if let Some(pos) = open.iter().position(|&i| i == pick) {
            open.swap_remove(pos);
        }
        let anchor = &flat[pick * dim..(pick + 1) * dim];
        let mut next = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for &i in &open {
            let d = dist2(&flat[i * dim..(i + 1) * dim], anchor);
            let m = &mut min_d[i];
            if d < *m {
                *m = d;
            }
            if *m > best || (*m == best && i < next) {
                best = *m;
                next = i;
            }
        }
        pick = next;
    }
    Ok((0..n).filter(|&i| chosen[i]).collect())
}
