//! Proven rate exponents for the distance between the rescaled Birkhoff
//! process and its Brownian limit. A bound `C n^{-a} (log n)^b` is returned
//! as `(a, b)`; bounds that hold for every `ε > 0` as `n^{-a+ε}` carry
//! `epsilon_loss = true` and `b = 0`.

use serde::{Deserialize, Serialize};

use super::config::Metric;
use super::RatelabError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSetting {
    pub metric: Metric,
    /// Moment order of the return time; `f64::INFINITY` for exponential tails.
    pub p: Option<f64>,
    pub dim: usize,
    /// LSV parameter. Takes precedence over `p`.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub exponent: f64,
    pub log_power: f64,
    pub epsilon_loss: bool,
    pub source: String,
}

impl Exponent {
    fn new(exponent: f64, log_power: f64, epsilon_loss: bool, source: &str) -> Self {
        Self {
            exponent,
            log_power,
            epsilon_loss,
            source: source.to_owned(),
        }
    }
}

const W1_ORDER_P: &str = "1-Wasserstein bound n^{-(p-2)/(2p)} (log n)^{(p-1)/(2p)}, p in (2, 3)";
const W1_SATURATED: &str = "1-Wasserstein bound saturates at n^{-1/6+eps} for p >= 3";
const PI_SCALAR_P: &str = "Prokhorov bound n^{-(p-2)/(4p)} for scalar observables, finite p";
const PI_SCALAR_INF: &str =
    "Prokhorov bound n^{-1/4} (log n)^{3/4} for scalar observables, p = infinity";
const PI_VIA_W1: &str =
    "Prokhorov bound via Pi <= sqrt(W1): n^{-(p-2)/(4p)} (log n)^{(p-1)/(4p)}, p in (2, 3)";
const PI_VIA_W1_SATURATED: &str = "Prokhorov bound via Pi <= sqrt(W1): n^{-1/12+eps} for p >= 3";
const LSV_W1: &str =
    "LSV map, 1-Wasserstein: n^{-1/6+eps} for gamma <= 1/3, n^{-(1-2 gamma)/2+eps} above";
const LSV_PI_SCALAR: &str = "LSV map, Prokhorov for scalar observables: n^{-(1-2 gamma)/4+eps}";
const LSV_PI_VECTOR: &str = "LSV map, Prokhorov via Pi <= sqrt(W1): n^{-1/12+eps} for gamma <= 1/3, n^{-(1-2 gamma)/4+eps} above";

/// The exponent pair the theory guarantees in the requested regime.
pub fn theoretical_exponent(setting: &RateSetting) -> Result<Exponent, RatelabError> {
    let out = |why: String| Err(RatelabError::OutOfRegime(why));
    if setting.dim == 0 {
        return out("observable dimension must be at least 1".into());
    }
    let scalar = setting.dim == 1;
    if let Some(gamma) = setting.gamma {
        if !(gamma > 0.0 && gamma < 0.5) {
            return out(format!("gamma = {gamma} is outside (0, 1/2)"));
        }
        let slow = (1.0 - 2.0 * gamma) / 2.0;
        return Ok(match (setting.metric, scalar) {
            (Metric::W1, _) if gamma <= 1.0 / 3.0 => Exponent::new(1.0 / 6.0, 0.0, true, LSV_W1),
            (Metric::W1, _) => Exponent::new(slow, 0.0, true, LSV_W1),
            (Metric::Pi, true) => Exponent::new(slow / 2.0, 0.0, true, LSV_PI_SCALAR),
            (Metric::Pi, false) if gamma <= 1.0 / 3.0 => {
                Exponent::new(1.0 / 12.0, 0.0, true, LSV_PI_VECTOR)
            }
            (Metric::Pi, false) => Exponent::new(slow / 2.0, 0.0, true, LSV_PI_VECTOR),
        });
    }
    let Some(p) = setting.p else {
        return out("either p or gamma must be given".into());
    };
    if p.is_nan() || p <= 2.0 {
        return out(format!("p = {p} is not in (2, infinity]"));
    }
    let finite_below_3 = p < 3.0;
    Ok(match (setting.metric, scalar) {
        (Metric::W1, _) if finite_below_3 => Exponent::new(
            (p - 2.0) / (2.0 * p),
            (p - 1.0) / (2.0 * p),
            false,
            W1_ORDER_P,
        ),
        (Metric::W1, _) => Exponent::new(1.0 / 6.0, 0.0, true, W1_SATURATED),
        (Metric::Pi, true) if p.is_infinite() => Exponent::new(0.25, 0.75, false, PI_SCALAR_INF),
        (Metric::Pi, true) => Exponent::new((p - 2.0) / (4.0 * p), 0.0, false, PI_SCALAR_P),
        (Metric::Pi, false) if finite_below_3 => Exponent::new(
            (p - 2.0) / (4.0 * p),
            (p - 1.0) / (4.0 * p),
            false,
            PI_VIA_W1,
        ),
        (Metric::Pi, false) => Exponent::new(1.0 / 12.0, 0.0, true, PI_VIA_W1_SATURATED),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setting(metric: Metric, p: Option<f64>, dim: usize, gamma: Option<f64>) -> RateSetting {
        RateSetting {
            metric,
            p,
            dim,
            gamma,
        }
    }

    #[test]
    fn examples() {
        let e = theoretical_exponent(&setting(Metric::W1, Some(2.5), 1, None)).unwrap();
        assert!((e.exponent - 0.1).abs() < 1e-15 && (e.log_power - 0.3).abs() < 1e-15);
        let e = theoretical_exponent(&setting(Metric::Pi, Some(f64::INFINITY), 1, None)).unwrap();
        assert_eq!((e.exponent, e.log_power), (0.25, 0.75));
        let e = theoretical_exponent(&setting(Metric::W1, None, 2, Some(0.4))).unwrap();
        assert!((e.exponent - 0.1).abs() < 1e-15 && e.epsilon_loss);
    }

    #[test]
    fn vector_prokhorov_halves_the_wasserstein_rate() {
        for p in [2.2, 2.5, 2.9] {
            let w = theoretical_exponent(&setting(Metric::W1, Some(p), 3, None)).unwrap();
            let pi = theoretical_exponent(&setting(Metric::Pi, Some(p), 3, None)).unwrap();
            assert!((pi.exponent - w.exponent / 2.0).abs() < 1e-15);
            assert!((pi.log_power - w.log_power / 2.0).abs() < 1e-15);
        }
        let pi = theoretical_exponent(&setting(Metric::Pi, Some(f64::INFINITY), 2, None)).unwrap();
        assert_eq!(pi.exponent, 1.0 / 12.0);
    }

    #[test]
    fn lsv_exponents_do_not_increase_with_gamma() {
        for metric in [Metric::W1, Metric::Pi] {
            for dim in [1, 2] {
                let mut last = f64::INFINITY;
                for g in [0.05, 0.1, 0.25, 1.0 / 3.0, 0.4, 0.45] {
                    let e = theoretical_exponent(&setting(metric, None, dim, Some(g)))
                        .unwrap()
                        .exponent;
                    assert!(e <= last + 1e-15);
                    last = e;
                }
            }
        }
    }

    #[test]
    fn out_of_regime() {
        for bad in [
            setting(Metric::W1, Some(2.0), 1, None),
            setting(Metric::Pi, Some(1.0), 1, None),
            setting(Metric::W1, Some(f64::NAN), 1, None),
            setting(Metric::W1, None, 1, None),
            setting(Metric::W1, None, 1, Some(0.5)),
            setting(Metric::Pi, None, 1, Some(0.0)),
            setting(Metric::Pi, Some(4.0), 0, None),
        ] {
            assert!(
                matches!(
                    theoretical_exponent(&bad),
                    Err(RatelabError::OutOfRegime(_))
                ),
                "{bad:?}"
            );
        }
    }
}
