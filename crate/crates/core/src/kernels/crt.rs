//! Chinese restaurant table (CRT) distribution.
//!
//! `CRT(m, r)` is the law of `Σ_{t=1..m} b_t` with independent
//! `b_t ~ Bernoulli(r / (t − 1 + r))`: the number of occupied tables after
//! `m` customers arrive at a Chinese restaurant with concentration `r`.

use rand::Rng;

use super::special::ln_gamma;
use crate::error::{Error, Result};

/// Below this many customers the Bernoulli chain is summed directly.
const DIRECT_MAX: u64 = 64;

/// Largest `m` accepted by [`crt_pmf_oracle`].
pub const ORACLE_MAX_M: u64 = 25;

/// Draws `ℓ ~ CRT(m, r)`; the result lies in `[min(m, 1), m]`.
pub fn sample_crt<R: Rng + ?Sized>(m: u64, r: f64, rng: &mut R) -> u64 {
    if m <= 1 {
        return m;
    }
    // Skipping pays off when tables are sparse relative to customers.
    let expected_tables = r * (1.0 + m as f64 / r).ln();
    if m <= DIRECT_MAX || expected_tables * 32.0 > m as f64 {
        crt_direct(m, r, rng)
    } else {
        crt_by_jumps(m, r, rng)
    }
}

pub(crate) fn crt_direct<R: Rng + ?Sized>(m: u64, r: f64, rng: &mut R) -> u64 {
    let mut tables = 1;
    for t in 1..m {
        let u: f64 = rng.random();
        if u * (t as f64 + r) < r {
            tables += 1;
        }
    }
    tables
}

/// Exact CRT draw that jumps from one new table to the next.
///
/// After a table opens at customer `t`, the chance that customers
/// `t+1..=s` all join existing tables is
/// `S(s) = Γ(s) Γ(t + r) / (Γ(t) Γ(s + r))`. The next opening is the first
/// `s` with `S(s) < U`, found by galloping then bisection, so the cost is
/// logarithmic in the gap instead of linear in `m`.
pub(crate) fn crt_by_jumps<R: Rng + ?Sized>(m: u64, r: f64, rng: &mut R) -> u64 {
    let mut tables = 1;
    let mut t = 1u64;
    while t < m {
        let log_u = rng.random::<f64>().ln();
        let base = ln_gamma(t as f64 + r) - ln_gamma(t as f64);
        let log_survival = |s: u64| ln_gamma(s as f64) - ln_gamma(s as f64 + r) + base;
        if log_survival(m) >= log_u {
            break;
        }
        // find the smallest s in (t, m] with log_survival(s) < log_u,
        // galloping out from the asymptotic inverse s ≈ e^{(base − ln u)/r} − (r − 1)/2
        let guess = ((base - log_u) / r).exp() - 0.5 * (r - 1.0);
        let start = if guess.is_finite() { guess.ceil().clamp((t + 1) as f64, m as f64) as u64 } else { m };
        let (mut lo, mut hi);
        let mut step = 1u64;
        if log_survival(start) < log_u {
            hi = start;
            lo = loop {
                let probe = hi.saturating_sub(step).max(t);
                if probe == t || log_survival(probe) >= log_u {
                    break probe;
                }
                hi = probe;
                step *= 2;
            };
        } else {
            lo = start;
            hi = loop {
                let probe = (lo + step).min(m);
                if log_survival(probe) < log_u {
                    break probe;
                }
                lo = probe;
                step *= 2;
            };
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if log_survival(mid) < log_u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        tables += 1;
        t = hi;
    }
    tables
}

/// Exact PMF of `CRT(m, r)` over `{0, ..., m}` by convolving the Bernoulli
/// chain one customer at a time.
pub fn crt_pmf_oracle(m: u64, r: f64) -> Result<Vec<f64>> {
    if m > ORACLE_MAX_M {
        return Err(Error::Scale(format!(
            "CRT oracle supports m <= {ORACLE_MAX_M}, got {m}"
        )));
    }
    let mut pmf = vec![1.0];
    for t in 1..=m {
        let p = r / (t as f64 - 1.0 + r);
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &mass) in pmf.iter().enumerate() {
            next[k] += mass * (1.0 - p);
            next[k + 1] += mass * p;
        }
        pmf = next;
    }
    Ok(pmf)
}

/// `E[CRT(m, r)] = Σ_{t=1..m} r / (t − 1 + r)`.
pub fn crt_mean(m: u64, r: f64) -> f64 {
    (1..=m).map(|t| r / (t as f64 - 1.0 + r)).sum()
}
