use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wiplab::dynsys::{MapSystem, OrbitSampler};
use wiplab::suspension::{FlowObservable, RoofFunction, SuspensionFlow, DEFAULT_DT};

#[test]
fn flowing_in_two_steps_equals_flowing_once() {
    let flows = [
        SuspensionFlow::testbed(),
        SuspensionFlow::new(
            MapSystem::lsv(0.3).unwrap(),
            RoofFunction::affine(1.5, -0.4).unwrap(),
        )
        .unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for flow in &flows {
        for _ in 0..5_000 {
            let x: f64 = rng.random();
            let u = rng.random::<f64>() * flow.roof.eval(x);
            let (t, s) = (rng.random_range(0.0..6.0), rng.random_range(0.0..6.0));
            let (x1, u1) = flow.flow_point(x, u, t).unwrap();
            let (x2, u2) = flow.flow_point(x1, u1, s).unwrap();
            let (x3, u3) = flow.flow_point(x, u, t + s).unwrap();
            assert!(
                (x2 - x3).abs() < 1e-10 && (u2 - u3).abs() < 1e-10,
                "({x}, {u}) by {t} then {s}"
            );
        }
    }
}

#[test]
fn flow_integral_stays_close_to_the_induced_birkhoff_sum() {
    // |∫₀ⁿ v∘Ψ_s ds − Σ_{j<N(n)} v_X(Tʲx)| is bounded by sup|v| · sup r.
    let flow = SuspensionFlow::testbed();
    let v = FlowObservable::testbed();
    let bound = 2.0 * 1.0 * flow.roof.sup();
    let sampler = OrbitSampler::new(MapSystem::doubling(), 8);
    for stream in 0..4 {
        let orbit = sampler.stream(stream).take(12_000);
        let checkpoints: Vec<f64> = (1..=100).map(|i| 100.0 * i as f64).collect();
        let integrals = flow
            .cumulative_integrals(&v, orbit.iter().copied(), 0.0, &checkpoints, DEFAULT_DT)
            .unwrap();
        let mut elapsed = 0.0;
        let mut sum = 0.0;
        let mut j = 0;
        for (t, integral) in checkpoints.iter().zip(&integrals) {
            while elapsed + flow.roof.eval(orbit[j]) <= *t {
                elapsed += flow.roof.eval(orbit[j]);
                sum += flow.induced_observable(&v, orbit[j], DEFAULT_DT).unwrap()[0];
                j += 1;
            }
            let gap = (integral[0] - sum).abs();
            assert!(gap <= bound, "t = {t}: gap {gap}");
        }
    }
}

#[test]
fn induced_testbed_observable_matches_its_closed_form() {
    let flow = SuspensionFlow::testbed();
    let v = FlowObservable::testbed();
    for i in 0..=50 {
        let x = i as f64 / 50.0;
        let got = flow.induced_observable(&v, x, DEFAULT_DT).unwrap()[0];
        let expected = (2.0 * std::f64::consts::PI * x).cos() * (1.0 + x / 2.0);
        assert!((got - expected).abs() < 1e-12, "x = {x}");
    }
    let mean = flow.lebesgue_base_mean(&v, 4096, DEFAULT_DT).unwrap()[0];
    assert!(mean.abs() < 1e-8, "{mean}");
}
