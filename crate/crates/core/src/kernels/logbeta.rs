//! The logBeta law: the total `Σ −ln(1 − p)` over the atoms of a beta
//! process with mass `γ₀` and concentration `a`.
//!
//! In the variable `q = −ln(1 − p)` the atoms form a Poisson process with
//! intensity `γ₀ e^{−a q} / (1 − e^{−q})`. Jumps above [`TRUNCATION`] are
//! simulated by thinning a piecewise envelope; the infinitely many jumps
//! below it are replaced by their (tiny) expected total.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::variates::poisson;
use crate::error::{Error, Result};

/// Jumps `q ≤ TRUNCATION` are compensated by their mean instead of simulated.
pub const TRUNCATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogBetaParams {
    mass: f64,
    concentration: f64,
}

impl LogBetaParams {
    pub fn new(mass: f64, concentration: f64) -> Result<Self> {
        for (what, v) in [("logBeta mass", mass), ("logBeta concentration", concentration)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain { what, value: v });
            }
        }
        Ok(Self { mass, concentration })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }
}

fn intensity(q: f64, a: f64) -> f64 {
    (-a * q).exp() / -(-q).exp_m1()
}

/// Dominates `intensity`: `1/(1 − e^{−q}) ≤ 1/q + 1`, then `e^{−aq}/q` is
/// bounded by `1/q` on (0, 1] and by `e^{−aq}` beyond 1.
fn envelope(q: f64, a: f64) -> f64 {
    let tail = (-a * q).exp();
    if q <= 1.0 {
        1.0 / q + tail
    } else {
        2.0 * tail
    }
}

/// Expected total of the jumps below the truncation point,
/// `γ₀ ∫_0^ε q e^{−aq}/(1 − e^{−q}) dq`, by composite Simpson (the
/// integrand is smooth and equals 1 at 0).
fn small_jump_mean(params: &LogBetaParams) -> f64 {
    let a = params.concentration;
    let f = |q: f64| if q == 0.0 { 1.0 } else { q * intensity(q, a) };
    let panels = 16;
    let h = TRUNCATION / panels as f64;
    let mut s = f(0.0) + f(TRUNCATION);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    params.mass * s * h / 3.0
}

pub fn sample_logbeta<R: Rng + ?Sized>(params: &LogBetaParams, rng: &mut R) -> f64 {
    let a = params.concentration;
    let mass_log = -TRUNCATION.ln();
    let mass_far = (-a).exp() / a;
    let mass_near = (-a * TRUNCATION).exp() / a;
    let total = mass_log + mass_far + mass_near;
    let exp = Exp::new(a).expect("positive rate");

    let n = poisson(params.mass * total, rng);
    let mut sum = 0.0;
    for _ in 0..n {
        let pick = rng.random::<f64>() * total;
        let q = if pick < mass_log {
            TRUNCATION.powf(1.0 - rng.random::<f64>())
        } else if pick < mass_log + mass_far {
            1.0 + exp.sample(rng)
        } else {
            TRUNCATION + exp.sample(rng)
        };
        if q <= TRUNCATION {
            continue;
        }
        if rng.random::<f64>() * envelope(q, a) < intensity(q, a) {
            sum += q;
        }
    }
    sum + small_jump_mean(params)
}

impl Distribution<f64> for LogBetaParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_logbeta(self, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::special::{digamma, trigamma};
    use crate::kernels::RngHandle;

    /// Lévy–Khintchine exponent `∫ (1 − e^{−s q}) e^{−a q}/(1 − e^{−q}) dq`
    /// by substitution `q = −ln x` and midpoint quadrature on (0, 1).
    fn laplace_exponent_numeric(s: f64, a: f64) -> f64 {
        // with x = e^{−q}: ∫_0^1 (1 − x^s) x^{a−1} / (1 − x) dx
        let n = 2_000_000;
        let h = 1.0 / n as f64;
        (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                (1.0 - x.powf(s)) * x.powf(a - 1.0) / (1.0 - x)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn laplace_exponent_is_digamma_difference() {
        for (s, a) in [(1.0, 2.0), (0.5, 2.0), (2.0, 5.5)] {
            let exact = digamma(a + s).unwrap() - digamma(a).unwrap();
            assert!((laplace_exponent_numeric(s, a) - exact).abs() < 1e-5, "s={s} a={a}");
        }
    }

    #[test]
    fn envelope_dominates() {
        for a in [0.05, 0.7, 1.0, 3.0, 80.0] {
            let mut q = 1e-6;
            while q < 60.0 {
                assert!(intensity(q, a) <= envelope(q, a) * (1.0 + 1e-12), "a={a} q={q}");
                q *= 1.07;
            }
        }
    }

    #[test]
    fn laplace_transform_identity() {
        let params = LogBetaParams::new(1.0, 2.0).unwrap();
        let mut rng = RngHandle::new(10, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| (-sample_logbeta(&params, &mut rng)).exp()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = (-laplace_exponent_numeric(1.0, 2.0)).exp();
        assert!((target - (-0.5f64).exp()).abs() < 1e-5);
        assert!((m - target).abs() < 3.0 * (v / n as f64).sqrt(), "{m} vs {target}");
    }

    #[test]
    fn mean_is_mass_times_trigamma() {
        for (g, a) in [(1.0, 2.0), (3.0, 0.6), (0.5, 25.0)] {
            let params = LogBetaParams::new(g, a).unwrap();
            let mut rng = RngHandle::new(11, 0);
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| sample_logbeta(&params, &mut rng)).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            let want = g * trigamma(a).unwrap();
            assert!((m - want).abs() < 4.0 * (v / n as f64).sqrt(), "g={g} a={a}: {m} vs {want}");
        }
    }

    #[test]
    fn vanishing_mass_gives_zero() {
        let params = LogBetaParams::new(1e-9, 2.0).unwrap();
        let mut rng = RngHandle::new(12, 0);
        let hits = (0..10_000).filter(|_| sample_logbeta(&params, &mut rng) > 1e-6).count();
        assert!(hits <= 2);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(LogBetaParams::new(0.0, 1.0).is_err());
        assert!(LogBetaParams::new(1.0, -1.0).is_err());
        assert!(LogBetaParams::new(f64::NAN, 1.0).is_err());
    }
}
