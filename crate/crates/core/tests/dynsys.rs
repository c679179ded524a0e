//! Return-time structure of the LSV first-return map against the preimage
//! sequence of 1/2 under the left branch, computed here by bisection.

use wiplab::dynsys::{InducedMap, MapSystem, OrbitSampler};

const GAMMA: f64 = 0.25;

fn left_branch(x: f64) -> f64 {
    x * (1.0 + (2.0 * x).powf(GAMMA))
}

/// `x_0 = 1/2` and `x_{k+1}` the left-branch preimage of `x_k`.
fn preimages(count: usize) -> Vec<f64> {
    let mut xs = vec![0.5];
    for _ in 1..count {
        let target = *xs.last().unwrap();
        let (mut lo, mut hi) = (0.0, target);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if left_branch(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        xs.push(0.5 * (lo + hi));
    }
    xs
}

#[test]
fn return_time_matches_preimage_intervals() {
    let induced = InducedMap::new(MapSystem::lsv(GAMMA).unwrap()).unwrap();
    let xs = preimages(300);
    // T y = 2y − 1 in (x_k, x_{k−1}] needs k further steps to re-enter Y.
    for k in 1..xs.len() {
        let mid = 0.5 * (xs[k] + xs[k - 1]);
        let y = 0.5 * (1.0 + mid);
        assert_eq!(induced.return_time(y).unwrap(), k as u64 + 1, "k = {k}");
    }
    assert_eq!(induced.return_time(0.9).unwrap(), 1);
}

#[test]
fn return_time_tail_has_exponent_one_over_gamma() {
    let xs = preimages(2048);
    // P_Y(τ > k + 1) = x_k for y uniform on Y.
    let pts: Vec<(f64, f64)> = (64..2048)
        .step_by(64)
        .map(|k| ((k as f64).ln(), xs[k].ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0 / GAMMA).abs() < 0.5, "{slope}");

    let induced = InducedMap::new(MapSystem::lsv(GAMMA).unwrap()).unwrap();
    let samples = 100_000;
    let taus: Vec<u64> = (0..samples)
        .map(|i| {
            induced
                .return_time(0.5 + 0.5 * (i as f64 + 0.5) / samples as f64)
                .unwrap()
        })
        .collect();
    for k in 1..6 {
        let freq = taus.iter().filter(|&&t| t > k as u64 + 1).count() as f64 / samples as f64;
        assert!((freq - xs[k]).abs() < 2e-5, "k = {k}: {freq} vs {}", xs[k]);
    }
}

#[test]
fn lsv_orbit_lingers_near_the_fixed_point() {
    // The invariant density blows up like x^{-γ} at 0, so an orbit spends
    // more than Lebesgue's share of time in (0, 0.1).
    let orbit = OrbitSampler::new(MapSystem::lsv(0.4).unwrap(), 3)
        .sample_orbit(200_000)
        .unwrap();
    let frac = orbit.iter().filter(|&&x| x < 0.1).count() as f64 / orbit.len() as f64;
    assert!(frac > 0.1, "{frac}");
}
