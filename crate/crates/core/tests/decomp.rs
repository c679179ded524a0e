use wiplab::decomp::{
    green_kubo_sigma, primary_decomposition, secondary_decomposition, Function, TransferOperator,
    TrigPoly,
};
use wiplab::dynsys::{MapSystem, OrbitSampler};
use wiplab::FnObservable;

fn mixed_poly() -> TrigPoly {
    TrigPoly::from_coefficients(
        vec![0.0, 0.4, 1.0, -0.3, 0.0, 0.6],
        vec![0.0, 0.0, 0.0, 0.5],
    )
}

#[test]
fn coboundary_identity_on_a_fine_grid() {
    let op = TransferOperator::exact_doubling();
    let d = primary_decomposition(&op, &Function::scalar_trig(mixed_poly()), 1e-12).unwrap();
    let p = mixed_poly();
    let at = |f: &Function, x: f64| f.try_eval(x).unwrap()[0];
    let worst = (0..2048)
        .map(|i| {
            let x = i as f64 / 2048.0;
            let tx = (2.0 * x) % 1.0;
            (p.eval(x) - at(&d.m, x) - at(&d.chi, tx) + at(&d.chi, x)).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn green_kubo_agrees_with_the_quadrature_sigma() {
    let op = TransferOperator::exact_doubling();
    let d = primary_decomposition(&op, &Function::scalar_trig(mixed_poly()), 1e-12).unwrap();
    let exact = d.sigma[0][0];
    let p = mixed_poly();
    let v = FnObservable::new(1, move |x: f64, out: &mut [f64]| out[0] = p.eval(x));
    let gk = green_kubo_sigma(
        &OrbitSampler::new(MapSystem::doubling(), 4),
        &v,
        30,
        1_000_000,
    )
    .unwrap()[0][0];
    assert!((gk / exact - 1.0).abs() < 0.02, "{gk} vs {exact}");
}

#[test]
fn variance_process_error_decays_like_root_n() {
    // V_n(k) − (k/n)σ² is n⁻¹ times a Birkhoff sum of the secondary
    // observable, so its running maximum shrinks roughly like n^{-1/2}.
    let op = TransferOperator::exact_doubling();
    let d =
        primary_decomposition(&op, &Function::scalar_trig(TrigPoly::cos(2, 1.0)), 1e-12).unwrap();
    let phi = secondary_decomposition(&op, &d).unwrap();
    let sampler = OrbitSampler::new(MapSystem::doubling(), 12);
    let mut pts = Vec::new();
    for e in 7..=13 {
        let n = 1usize << e;
        let mut maxima: Vec<f64> = (0..31)
            .map(|s| {
                let orbit = sampler.stream(s).take(n);
                let mut acc = 0.0f64;
                let mut worst = 0.0f64;
                for x in orbit {
                    acc += phi.try_eval(x).unwrap()[0];
                    worst = worst.max(acc.abs());
                }
                worst / n as f64
            })
            .collect();
        maxima.sort_by(f64::total_cmp);
        pts.push(((n as f64).ln(), maxima[15].ln()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((-0.7..=-0.3).contains(&slope), "{slope}");
}
