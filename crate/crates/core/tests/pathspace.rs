use wiplab::pathspace::{build_bn, sample_brownian, PiecewisePath};
use wiplab::rng::mix;
use wiplab::FnObservable;

#[test]
fn brownian_endpoint_has_unit_variance() {
    let samples = 10_000;
    let ends: Vec<f64> = (0..samples)
        .map(|s| {
            sample_brownian(&[vec![1.0]], 16, mix(5, s))
                .unwrap()
                .value(16)[0]
        })
        .collect();
    let mean = ends.iter().sum::<f64>() / samples as f64;
    let var = ends.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    assert!((var - 1.0).abs() < 0.05, "{var}");
    // E[exp(sup|W|)] is finite (about 4.5); a heavy-tailed bug would show here.
    let exp_sup = (0..samples)
        .map(|s| {
            sample_brownian(&[vec![1.0]], 16, mix(5, s))
                .unwrap()
                .sup_norm()
                .exp()
        })
        .sum::<f64>()
        / samples as f64;
    assert!(exp_sup < 1e3, "{exp_sup}");
}

#[test]
fn brownian_covariance_follows_sigma_and_time() {
    let sigma = vec![vec![2.0, 0.6], vec![0.6, 0.5]];
    let samples = 20_000;
    let (i, j) = (4, 12);
    let (mut c_ij, mut c_cross) = (0.0, 0.0);
    for s in 0..samples {
        let w = sample_brownian(&sigma, 16, mix(9, s)).unwrap();
        c_ij += w.value(i)[0] * w.value(j)[0];
        c_cross += w.value(j)[0] * w.value(j)[1];
    }
    let (c_ij, c_cross) = (c_ij / samples as f64, c_cross / samples as f64);
    // Cov(W(s), W(t)) = min(s, t) Σ.
    assert!((c_ij - 0.25 * 2.0).abs() < 0.05, "{c_ij}");
    assert!((c_cross - 0.75 * 0.6).abs() < 0.05, "{c_cross}");
}

#[test]
fn birkhoff_path_by_hand() {
    let v = FnObservable::new(1, |x: f64, out: &mut [f64]| out[0] = x);
    let p = build_bn(&[0.1, 0.2, 0.7, 0.4], &v, 4).unwrap();
    let expected = [0.0, 0.05, 0.15, 0.5, 0.7];
    for (k, e) in expected.iter().enumerate() {
        assert!((p.value(k)[0] - e).abs() < 1e-15, "k = {k}");
    }
    let zero = FnObservable::new(1, |_: f64, out: &mut [f64]| out[0] = 0.0);
    let z = build_bn(&[0.3; 8], &zero, 8).unwrap();
    assert_eq!(z.sup_norm(), 0.0);
}

#[test]
fn restriction_keeps_grid_values() {
    let values: Vec<f64> = (0..=16).map(|i| (i as f64).sin()).collect();
    let p = PiecewisePath::on_grid(16, 1, values.clone()).unwrap();
    let r = p.restrict(4).unwrap();
    for k in 0..=4 {
        assert_eq!(r.value(k)[0], values[4 * k]);
    }
}
