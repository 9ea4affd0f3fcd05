use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use crate::error::{Error, Result};

/// Gamma(shape, scale) draw. Shapes below one use the boosted
/// `Gamma(shape + 1) · U^(1/shape)` construction. Invalid parameters
/// yield NaN so callers can report a numerical failure with context.
pub fn gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    match Gamma::new(shape, scale) {
        Ok(g) => g.sample(rng),
        Err(_) => f64::NAN,
    }
}

/// Independent Gamma(a, 1) and Gamma(b, 1) draws `(x, y)`; `x / (x + y)`
/// is Beta(a, b). Keeping the pair lets callers form the odds `x / y` and
/// `ln(1 − p) = −ln(1 + x / y)` without cancellation.
pub fn beta_pair<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> (f64, f64) {
    (gamma(a, 1.0, rng), gamma(b, 1.0, rng))
}

pub fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let (x, y) = beta_pair(a, b, rng);
    x / (x + y)
}

/// Poisson(λ) draw; λ ≤ 0 gives 0.
pub fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(p) => {
            let x: f64 = p.sample(rng);
            x as u64
        }
        Err(_) => u64::MAX,
    }
}

pub fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).map_or(0, |b| b.sample(rng))
}

/// Multinomial split of `n` over unnormalized nonnegative `weights`, by
/// sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(n: u64, weights: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0; weights.len()];
    let mut remaining = n;
    let mut mass: f64 = weights.iter().sum();
    for (i, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == weights.len() {
            out[i] = remaining;
            break;
        }
        let p = if mass > 0.0 { (w / mass).min(1.0) } else { 0.0 };
        let x = binomial(remaining, p, rng);
        out[i] = x;
        remaining -= x;
        mass -= w;
    }
    out
}

/// NB(r, p) with mean `r p / (1 − p)`, drawn as a gamma-mixed Poisson.
#[derive(Debug, Clone, Copy)]
pub struct NegBinomial {
    shape: f64,
    odds: f64,
}

impl NegBinomial {
    pub fn new(shape: f64, p: f64) -> Result<Self> {
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(Error::Domain {
                what: "negative binomial shape",
                value: shape,
            });
        }
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain {
                what: "negative binomial probability",
                value: p,
            });
        }
        Ok(Self {
            shape,
            odds: p / (1.0 - p),
        })
    }

    /// NB with the given shape and odds `p / (1 − p)`.
    pub fn from_odds(shape: f64, odds: f64) -> Result<Self> {
        if !(odds >= 0.0) || !odds.is_finite() {
            return Err(Error::Domain {
                what: "negative binomial odds",
                value: odds,
            });
        }
        Self::new(shape, 0.5).map(|nb| Self { odds, ..nb })
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.odds
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.odds * (1.0 + self.odds)
    }
}

impl Distribution<u64> for NegBinomial {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.odds == 0.0 {
            return 0;
        }
        poisson(gamma(self.shape, self.odds, rng), rng)
    }
}

pub fn sample_nb<R: Rng + ?Sized>(r: f64, p: f64, rng: &mut R) -> Result<u64> {
    Ok(NegBinomial::new(r, p)?.sample(rng))
}

/// Logarithmic series law on {1, 2, ...} with P(u) = p^u / (−u ln(1 − p)).
#[derive(Debug, Clone, Copy)]
pub struct Logarithmic {
    p: f64,
    log_q: f64,
}

impl Logarithmic {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain {
                what: "logarithmic parameter",
                value: p,
            });
        }
        Ok(Self {
            p,
            log_q: (-p).ln_1p(),
        })
    }

    pub fn pmf(&self, u: u64) -> f64 {
        if u == 0 {
            return 0.0;
        }
        let u = u as f64;
        (u * self.p.ln() - u.ln() - (-self.log_q).ln()).exp()
    }

    pub fn mean(&self) -> f64 {
        -self.p / ((1.0 - self.p) * self.log_q)
    }
}

impl Distribution<u64> for Logarithmic {
    // Kemp's LK algorithm.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let v: f64 = rng.random();
        if v >= self.p {
            return 1;
        }
        let u: f64 = rng.random();
        let q = -(self.log_q * u).exp_m1();
        if v <= q * q {
            let x = 1.0 + (v.ln() / q.ln()).floor();
            if x.is_finite() && x < u64::MAX as f64 {
                x as u64
            } else {
                u64::MAX
            }
        } else if v <= q {
            2
        } else {
            1
        }
    }
}

pub fn sample_logarithmic<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64> {
    Ok(Logarithmic::new(p)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RngHandle;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn logarithmic_pmf_closed_form() {
        let d = Logarithmic::new(0.5).unwrap();
        assert!((d.pmf(1) - 0.5 / std::f64::consts::LN_2).abs() < 1e-12);
        assert!((d.pmf(1) - 0.721_347_520_444_481_7).abs() < 1e-12);
        let total: f64 = (1..200).map(|u| d.pmf(u)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((d.mean() - 1.442_695_040_888_963_4).abs() < 1e-12);
    }

    #[test]
    fn logarithmic_small_p_is_one() {
        let mut rng = RngHandle::new(1, 0);
        let d = Logarithmic::new(1e-9).unwrap();
        assert!((0..10_000).all(|_| d.sample(&mut rng) == 1));
        assert!((1.0 - Logarithmic::new(1e-6).unwrap().pmf(1)).abs() < 1e-6);
    }

    #[test]
    fn logarithmic_rejects_bad_p() {
        assert!(Logarithmic::new(0.0).is_err());
        assert!(Logarithmic::new(1.0).is_err());
        assert!(sample_logarithmic(-0.2, &mut RngHandle::new(0, 0)).is_err());
    }

    #[test]
    fn logarithmic_empirical_mean_and_pmf() {
        let mut rng = RngHandle::new(2, 0);
        let d = Logarithmic::new(0.5).unwrap();
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng) as f64).collect();
        let (m, v) = mean_var(&xs);
        let se = (v / n as f64).sqrt();
        assert!((m - 1.442_695).abs() < 3.0 * se, "mean {m} se {se}");
        let ones = xs.iter().filter(|&&x| x == 1.0).count() as f64 / n as f64;
        let p1 = d.pmf(1);
        assert!((ones - p1).abs() < 3.0 * (p1 * (1.0 - p1) / n as f64).sqrt());
    }

    #[test]
    fn logarithmic_high_p_matches_pmf() {
        let mut rng = RngHandle::new(3, 0);
        let d = Logarithmic::new(0.97).unwrap();
        let n = 200_000;
        let mut hist = [0usize; 6];
        for _ in 0..n {
            let u = d.sample(&mut rng) as usize;
            if u <= 5 {
                hist[u] += 1;
            }
        }
        for u in 1..=5 {
            let p = d.pmf(u as u64);
            let f = hist[u] as f64 / n as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "u={u}");
        }
    }

    #[test]
    fn nb_moments() {
        let mut rng = RngHandle::new(4, 0);
        let d = NegBinomial::new(2.0, 0.5).unwrap();
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng) as f64).collect();
        let (m, v) = mean_var(&xs);
        assert!((m - 2.0).abs() / 2.0 < 0.05, "mean {m}");
        assert!((v - 4.0).abs() / 4.0 < 0.05, "var {v}");
    }

    #[test]
    fn nb_tiny_p_is_zero() {
        let mut rng = RngHandle::new(5, 0);
        let d = NegBinomial::new(2.0, 1e-12).unwrap();
        assert!((0..10_000).all(|_| d.sample(&mut rng) == 0));
    }

    #[test]
    fn nb_domain_errors() {
        let mut rng = RngHandle::new(0, 0);
        assert!(sample_nb(0.0, 0.5, &mut rng).is_err());
        assert!(sample_nb(1.0, 1.0, &mut rng).is_err());
        assert!(sample_nb(1.0, -0.1, &mut rng).is_err());
        assert!(NegBinomial::from_odds(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn multinomial_conserves_total() {
        let mut rng = RngHandle::new(6, 0);
        for n in [0u64, 1, 17, 1000] {
            let x = multinomial(n, &[0.2, 0.0, 1.3, 0.5], &mut rng);
            assert_eq!(x.iter().sum::<u64>(), n);
            assert_eq!(x[1], 0);
        }
    }

    #[test]
    fn gamma_small_shape_mean() {
        let mut rng = RngHandle::new(8, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| gamma(0.05, 2.0, &mut rng)).collect();
        let (m, v) = mean_var(&xs);
        assert!((m - 0.1).abs() < 4.0 * (v / n as f64).sqrt());
        assert!(gamma(-1.0, 1.0, &mut rng).is_nan());
    }

    #[test]
    fn beta_pair_mean() {
        let mut rng = RngHandle::new(9, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| beta(2.0, 6.0, &mut rng)).collect();
        let (m, v) = mean_var(&xs);
        assert!((m - 0.25).abs() < 4.0 * (v / n as f64).sqrt());
    }
}
