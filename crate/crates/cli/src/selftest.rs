//! Fast oracle checks, one line each.

use wiplab::decomp::{
    green_kubo_sigma, primary_decomposition, Function, TransferOperator, TrigPoly,
};
use wiplab::dynsys::{MapSystem, OrbitSampler};
use wiplab::otmetrics::{
    check_inequalities_from_costs, prokhorov_from_costs, wasserstein1_from_costs, CostMatrix,
};
use wiplab::rng::mix;
use wiplab::FnObservable;

/// Uniform numbers in `[0, 1)` from a counter.
struct Uniforms {
    seed: u64,
    count: u64,
}

impl Uniforms {
    fn next(&mut self) -> f64 {
        self.count += 1;
        (mix(self.seed, self.count) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn costs(&mut self, m: usize) -> CostMatrix {
        let data = (0..m * m)
            .map(|_| (self.next() * 8.0).floor() / 8.0)
            .collect();
        CostMatrix::new(m, data).expect("valid costs")
    }
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..m {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

fn brute_w1(c: &CostMatrix) -> f64 {
    let m = c.size();
    permutations(m)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / m as f64
}

/// Least `ε` among the candidates such that every row subset `A` has at
/// least `|A| − Mε` columns within `ε` of it.
fn brute_prokhorov(c: &CostMatrix) -> f64 {
    let m = c.size();
    let mut cands: Vec<f64> = c.as_slice().to_vec();
    cands.extend((0..=m).map(|k| k as f64 / m as f64));
    cands.sort_by(f64::total_cmp);
    for &eps in &cands {
        let ok = (1u32..1 << m).all(|set| {
            let rows: Vec<usize> = (0..m).filter(|i| set >> i & 1 == 1).collect();
            let nbhd = (0..m)
                .filter(|&j| rows.iter().any(|&i| c.get(i, j) <= eps))
                .count();
            rows.len().saturating_sub(nbhd) as f64 / m as f64 <= eps
        });
        if ok {
            return eps.min(1.0);
        }
    }
    1.0
}

fn line(name: &str, ok: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

pub fn run() -> bool {
    let mut all = true;

    let d = primary_decomposition(
        &TransferOperator::exact_doubling(),
        &Function::scalar_trig(TrigPoly::cos(2, 1.0)),
        1e-10,
    );
    all &= match d {
        Ok(d) => line(
            "exact decomposition of cos(4πx)",
            (d.sigma[0][0] - 0.5).abs() < 1e-12 && d.residual < 1e-10,
            format!("sigma = {}, residual = {:.1e}", d.sigma[0][0], d.residual),
        ),
        Err(e) => line("exact decomposition of cos(4πx)", false, e.to_string()),
    };

    let v = FnObservable::new(1, |x: f64, out: &mut [f64]| {
        out[0] = (4.0 * std::f64::consts::PI * x).cos()
    });
    all &= match green_kubo_sigma(
        &OrbitSampler::new(MapSystem::doubling(), 1),
        &v,
        20,
        200_000,
    ) {
        Ok(s) => line(
            "Green-Kubo on the doubling map",
            (s[0][0] - 0.5).abs() < 0.05,
            format!("sigma = {:.4}", s[0][0]),
        ),
        Err(e) => line("Green-Kubo on the doubling map", false, e.to_string()),
    };

    let mut u = Uniforms { seed: 17, count: 0 };
    let mismatches = (0..50)
        .filter(|k| {
            let c = u.costs(1 + k % 6);
            (wasserstein1_from_costs(&c) - brute_w1(&c)).abs() > 1e-10
        })
        .count();
    all &= line(
        "assignment vs permutation search",
        mismatches == 0,
        format!("{mismatches} mismatches in 50"),
    );

    let mismatches = (0..50)
        .filter(|k| {
            let c = u.costs(1 + k % 8);
            prokhorov_from_costs(&c) != brute_prokhorov(&c)
        })
        .count();
    all &= line(
        "matching vs subset search",
        mismatches == 0,
        format!("{mismatches} mismatches in 50"),
    );

    let violations = (0..20)
        .filter(|_| {
            let c = u.costs(16);
            check_inequalities_from_costs(&c, Some(c.index_coupling_sup())).is_err()
        })
        .count();
    all &= line(
        "Pi <= sqrt(W1) and Pi <= coupled sup",
        violations == 0,
        format!("{violations} violations in 20"),
    );
    all
}
