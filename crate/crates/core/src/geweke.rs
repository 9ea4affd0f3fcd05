//! Joint-distribution ("get it right") checks for the samplers.
//!
//! Two simulators should produce the same joint law of parameters and data:
//! independent draws from the prior followed by data, and a chain that
//! alternates one Gibbs sweep with a fresh draw of the data given the
//! current parameters. Moments of the global parameters are compared with
//! z-scores; the chain's standard error uses batch means.
//!
//! Data regeneration only needs the parameters the next sweep reads before
//! refreshing: expressed atoms keep their weights, while the unobserved part
//! of the random measure is integrated out and contributes new genes through
//! a Chinese restaurant process.

use rand::Rng;
use rand_distr::Distribution;

use crate::data::CountMatrix;
use crate::error::Result;
use crate::kernels::{beta, beta_pair, digamma, gamma, poisson, Logarithmic, NegBinomial, RngHandle};
use crate::model::bnbp::{self, BnbpState};
use crate::model::gnbp::{self, GnbpState};
use crate::model::nbp::{self, nbp_generate_columnwise, NbpHyper, NbpState};
use crate::model::{Hyper, SparseCounts};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GewekeConfig {
    pub rounds: usize,
    pub n_samples: usize,
    pub n_batches: usize,
    pub seed: u64,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        Self {
            rounds: 10_000,
            n_samples: 3,
            n_batches: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GewekeRow {
    /// Statistic name, e.g. `gamma0` or `gamma0^2`.
    pub name: String,
    pub prior_mean: f64,
    pub chain_mean: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GewekeReport {
    pub model: &'static str,
    pub rows: Vec<GewekeRow>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }
}

const PRIOR: u64 = 1;
const CHAIN: u64 = 2;
const REGEN: u64 = 3;

/// Small toy hyperparameters that keep the number of expressed genes low.
pub fn toy_hyper() -> Hyper {
    Hyper {
        e0: 2.0,
        f0: 1.0,
        a0: 5.0,
        b0: 5.0,
        c0: 5.0,
        d0: 5.0,
    }
}

/// Concentration held fixed in the BNBP check.
pub const BNBP_FROZEN_C: f64 = 2.0;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn batch_means_var(xs: &[f64], n_batches: usize) -> f64 {
    let size = xs.len() / n_batches;
    let means: Vec<f64> = xs.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    mean_var(&means).1 / means.len() as f64
}

fn compare(model: &'static str, names: &[&str], prior: &[Vec<f64>], chain: &[Vec<f64>], n_batches: usize) -> GewekeReport {
    let mut rows = Vec::new();
    for (i, name) in names.iter().enumerate() {
        for power in [1, 2] {
            let p: Vec<f64> = prior.iter().map(|s| s[i].powi(power)).collect();
            let c: Vec<f64> = chain.iter().map(|s| s[i].powi(power)).collect();
            let (pm, pv) = mean_var(&p);
            let cm = c.iter().sum::<f64>() / c.len() as f64;
            let se = (pv / p.len() as f64 + batch_means_var(&c, n_batches)).sqrt();
            rows.push(GewekeRow {
                name: if power == 1 { name.to_string() } else { format!("{name}^2") },
                prior_mean: pm,
                chain_mean: cm,
                z: if se > 0.0 { (pm - cm) / se } else { 0.0 },
            });
        }
    }
    GewekeReport { model, rows }
}

fn to_matrix(n_samples: usize, columns: &[Vec<u64>]) -> CountMatrix {
    let sample_ids: Vec<String> = (1..=n_samples).map(|j| format!("s{j}")).collect();
    let gene_ids: Vec<String> = (1..=columns.len()).map(|k| format!("g{k}")).collect();
    let mut counts = vec![0; n_samples * columns.len()];
    for (k, col) in columns.iter().enumerate() {
        for (j, &n) in col.iter().enumerate() {
            counts[j * columns.len() + k] = n;
        }
    }
    CountMatrix::new(sample_ids, gene_ids, counts).expect("consistent dimensions")
}

/// Seats one customer: an existing table with probability proportional to
/// its occupancy, a new one with weight `gamma0`.
fn crp_seat<R: Rng + ?Sized>(occupancy: &mut Vec<u64>, gamma0: f64, rng: &mut R) -> usize {
    let total = occupancy.iter().sum::<u64>() as f64;
    let mut u = rng.random::<f64>() * (total + gamma0);
    for (t, n) in occupancy.iter_mut().enumerate() {
        u -= *n as f64;
        if u < 0.0 {
            *n += 1;
            return t;
        }
    }
    occupancy.push(1);
    occupancy.len() - 1
}

/// Gene columns drawn from the unobserved part of a gamma process with
/// total mass `g_rest`: `Pois(q_j g_rest)` draws per sample, seated by a
/// CRP. Each draw adds `unit(j)` counts to its gene. Returns the columns
/// and the number of draws per new gene.
fn gamma_rest_columns<R: Rng + ?Sized>(q: &[f64], g_rest: f64, gamma0: f64, rng: &mut R, mut unit: impl FnMut(usize, &mut R) -> u64) -> (Vec<Vec<u64>>, Vec<u64>) {
    let mut occupancy = Vec::new();
    let mut columns: Vec<Vec<u64>> = Vec::new();
    for (j, &q_j) in q.iter().enumerate() {
        for _ in 0..poisson(q_j * g_rest, rng) {
            let t = crp_seat(&mut occupancy, gamma0, rng);
            if t == columns.len() {
                columns.push(vec![0; q.len()]);
            }
            columns[t][j] += unit(j, rng);
        }
    }
    (columns, occupancy)
}

/// Weights of the newly occupied atoms given their occupancy:
/// `g_rest · Dirichlet(m_1, …, m_T, γ₀)` restricted to the first T parts.
fn dirichlet_weights<R: Rng + ?Sized>(occupancy: &[u64], gamma0: f64, g_rest: f64, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = occupancy.iter().map(|&m| gamma(m as f64, 1.0, rng)).collect();
    let rest = gamma(gamma0, 1.0, rng);
    let total = raw.iter().sum::<f64>() + rest;
    raw.iter().map(|x| g_rest * x / total).collect()
}

fn drop_empty(columns: Vec<Vec<u64>>, atoms: Vec<f64>) -> (Vec<Vec<u64>>, Vec<f64>) {
    columns.into_iter().zip(atoms).filter(|(c, _)| c.iter().any(|&n| n > 0)).unzip()
}

/// Scaled NBP: compares γ₀, c, q. and the number of expressed genes.
pub fn geweke_nbp(cfg: &GewekeConfig) -> Result<GewekeReport> {
    let h = toy_hyper();
    let hyper = NbpHyper { prior: h, scaled: true };
    let root = RngHandle::new(cfg.seed, 0x6e62);
    let j_n = cfg.n_samples;

    let draw_prior = |g: &mut RngHandle| -> Result<(f64, f64, Vec<f64>, CountMatrix)> {
        let gamma0 = gamma(h.e0, 1.0 / h.f0, g);
        let c = gamma(h.c0, 1.0 / h.d0, g);
        let q: Vec<f64> = (0..j_n).map(|_| gamma(h.a0, 1.0 / h.b0, g)).collect();
        let m = nbp_generate_columnwise(gamma0, c, &q, g)?;
        Ok((gamma0, c, q, m))
    };

    let mut prior = Vec::with_capacity(cfg.rounds);
    for i in 0..cfg.rounds {
        let (gamma0, c, q, m) = draw_prior(&mut root.derive(&[PRIOR, i as u64]))?;
        prior.push(vec![gamma0, c, q.iter().sum(), m.n_genes() as f64]);
    }

    let (gamma0, c, q, mut matrix) = draw_prior(&mut root.derive(&[CHAIN]))?;
    let mut state = NbpState { gamma0, c, r: vec![0.0; matrix.n_genes()], q, g_rest: 0.0 };
    let chain_rng = root.derive(&[CHAIN, 1]);
    let mut chain = Vec::with_capacity(cfg.rounds);
    for t in 0..cfg.rounds {
        nbp::sweep_prepared(&mut state, &SparseCounts::new(&matrix), &hyper, &chain_rng, t as u64)?;
        chain.push(vec![state.gamma0, state.c, state.q_sum(), matrix.n_genes() as f64]);

        let mut g = root.derive(&[REGEN, t as u64]);
        let mut columns: Vec<Vec<u64>> = state.r.iter().map(|&r| state.q.iter().map(|&q_j| poisson(q_j * r, &mut g)).collect()).collect();
        let (fresh, _) = gamma_rest_columns(&state.q, state.g_rest, state.gamma0, &mut g, |_, _| 1);
        columns.extend(fresh);
        columns.retain(|c| c.iter().any(|&n| n > 0));
        matrix = to_matrix(j_n, &columns);
        state.r = vec![0.0; matrix.n_genes()];
    }
    Ok(compare("nbp-scaled", &["gamma0", "c", "q_sum", "n_genes"], &prior, &chain, cfg.n_batches))
}

/// GNBP: compares γ₀, c, the mean of p_j and the number of expressed genes.
pub fn geweke_gnbp(cfg: &GewekeConfig) -> Result<GewekeReport> {
    let h = Hyper { a0: 2.0, ..toy_hyper() };
    let root = RngHandle::new(cfg.seed, 0x676e);
    let j_n = cfg.n_samples;

    let draw_prior = |g: &mut RngHandle| -> Result<(GnbpState, Vec<Vec<u64>>)> {
        let gamma0 = gamma(h.e0, 1.0 / h.f0, g);
        let c = gamma(h.c0, 1.0 / h.d0, g);
        let p: Vec<f64> = (0..j_n).map(|_| beta(h.a0, h.b0, g)).collect();
        let q: Vec<f64> = p.iter().map(|p| -(-p).ln_1p()).collect();
        let total = gamma(gamma0, 1.0 / c, g);
        let (columns, r) = gamma_rest_gnbp(&p, &q, total, gamma0, g)?;
        let state = GnbpState { gamma0, c, p, q, r, g_rest: 0.0, l: Vec::new() };
        Ok((state, columns))
    };

    let mut prior = Vec::with_capacity(cfg.rounds);
    for i in 0..cfg.rounds {
        let (s, columns) = draw_prior(&mut root.derive(&[PRIOR, i as u64]))?;
        prior.push(vec![s.gamma0, s.c, s.p_mean(), columns.len() as f64]);
    }

    let (mut state, mut columns) = draw_prior(&mut root.derive(&[CHAIN]))?;
    let chain_rng = root.derive(&[CHAIN, 1]);
    let mut chain = Vec::with_capacity(cfg.rounds);
    for t in 0..cfg.rounds {
        let sparse = SparseCounts::new(&to_matrix(j_n, &columns));
        state.l = vec![1; sparse.vals.len()];
        gnbp::sweep_prepared(&mut state, &sparse, &h, &chain_rng, t as u64)?;
        chain.push(vec![state.gamma0, state.c, state.p_mean(), columns.len() as f64]);

        let mut g = root.derive(&[REGEN, t as u64]);
        let mut next = Vec::with_capacity(state.r.len());
        for &r in &state.r {
            let col = state.p.iter().map(|&p| Ok(NegBinomial::new(r, p)?.sample(&mut g))).collect::<Result<Vec<u64>>>()?;
            next.push(col);
        }
        let mut atoms = state.r.clone();
        let (fresh, fresh_r) = gamma_rest_gnbp(&state.p, &state.q, state.g_rest, state.gamma0, &mut g)?;
        next.extend(fresh);
        atoms.extend(fresh_r);
        (columns, state.r) = drop_empty(next, atoms);
    }
    Ok(compare("gnbp", &["gamma0", "c", "p_mean", "n_genes"], &prior, &chain, cfg.n_batches))
}

/// New GNBP genes from an unobserved gamma-process part of mass `g_rest`:
/// each CRP draw is one table holding Logarithmic(p_j) counts.
fn gamma_rest_gnbp<R: Rng + ?Sized>(p: &[f64], q: &[f64], g_rest: f64, gamma0: f64, rng: &mut R) -> Result<(Vec<Vec<u64>>, Vec<f64>)> {
    let logs = p.iter().map(|&p| Logarithmic::new(p)).collect::<Result<Vec<_>>>()?;
    let (columns, occupancy) = gamma_rest_columns(q, g_rest, gamma0, rng, |j, g| logs[j].sample(g));
    let r = dirichlet_weights(&occupancy, gamma0, g_rest, rng);
    Ok((columns, r))
}

/// New BNBP genes from the unobserved beta-process part, integrated out:
/// their number is `Pois(γ₀[ψ(a + r.) − ψ(a)])` and each gene's `p` has
/// density proportional to `p^{-1}(1 − p)^{a−1}(1 − (1 − p)^{r.})`, drawn by
/// rejection from Beta(1, a). Counts are `NB(r_j, p)` conditioned on the
/// column being nonzero. Returns the columns and their odds.
pub fn beta_rest_columns<R: Rng + ?Sized>(gamma0: f64, a: f64, r: &[f64], rng: &mut R) -> Result<(Vec<Vec<u64>>, Vec<f64>)> {
    let r_sum: f64 = r.iter().sum();
    let n = poisson(gamma0 * (digamma(a + r_sum)? - digamma(a)?), rng);
    let bound = r_sum.max(1.0);
    let mut columns = Vec::with_capacity(n as usize);
    let mut odds = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let o = loop {
            let (x, y) = beta_pair(1.0, a, rng);
            let o = x / y;
            let p = x / (x + y);
            let hit = -(-r_sum * o.ln_1p()).exp_m1();
            if rng.random::<f64>() * p * bound < hit {
                break o;
            }
        };
        let dists = r.iter().map(|&r_j| NegBinomial::from_odds(r_j, o)).collect::<Result<Vec<_>>>()?;
        let col = loop {
            let col: Vec<u64> = dists.iter().map(|d| d.sample(rng)).collect();
            if col.iter().any(|&x| x > 0) {
                break col;
            }
        };
        columns.push(col);
        odds.push(o);
    }
    Ok((columns, odds))
}

/// BNBP with `c` frozen at [`BNBP_FROZEN_C`]: compares γ₀, r. and the
/// number of expressed genes.
pub fn geweke_bnbp(cfg: &GewekeConfig) -> Result<GewekeReport> {
    let h = toy_hyper();
    let c = BNBP_FROZEN_C;
    let root = RngHandle::new(cfg.seed, 0x626e);
    let j_n = cfg.n_samples;

    let draw_prior = |g: &mut RngHandle| -> Result<(BnbpState, Vec<Vec<u64>>)> {
        let gamma0 = gamma(h.e0, 1.0 / h.f0, g);
        let r: Vec<f64> = (0..j_n).map(|_| gamma(h.a0, 1.0 / h.b0, g)).collect();
        let (columns, odds) = beta_rest_columns(gamma0, c, &r, g)?;
        let state = BnbpState { gamma0, c, log1m: odds.iter().map(|o| o.ln_1p()).collect(), odds, p_star: 0.0, r, l: Vec::new() };
        Ok((state, columns))
    };

    let mut prior = Vec::with_capacity(cfg.rounds);
    for i in 0..cfg.rounds {
        let (s, columns) = draw_prior(&mut root.derive(&[PRIOR, i as u64]))?;
        prior.push(vec![s.gamma0, s.r_sum(), columns.len() as f64]);
    }

    let (mut state, mut columns) = draw_prior(&mut root.derive(&[CHAIN]))?;
    let chain_rng = root.derive(&[CHAIN, 1]);
    let mut chain = Vec::with_capacity(cfg.rounds);
    for t in 0..cfg.rounds {
        let sparse = SparseCounts::new(&to_matrix(j_n, &columns));
        state.l = vec![1; sparse.vals.len()];
        bnbp::sweep_prepared(&mut state, &sparse, &h, true, &chain_rng, t as u64)?;
        chain.push(vec![state.gamma0, state.r_sum(), columns.len() as f64]);

        let mut g = root.derive(&[REGEN, t as u64]);
        let mut next = Vec::with_capacity(state.odds.len());
        for &o in &state.odds {
            let col = state.r.iter().map(|&r_j| Ok(NegBinomial::from_odds(r_j, o)?.sample(&mut g))).collect::<Result<Vec<u64>>>()?;
            next.push(col);
        }
        let mut atoms = state.odds.clone();
        let (fresh, fresh_odds) = beta_rest_columns(state.gamma0, c + state.r_sum(), &state.r, &mut g)?;
        next.extend(fresh);
        atoms.extend(fresh_odds);
        (columns, state.odds) = drop_empty(next, atoms);
        state.log1m = state.odds.iter().map(|o| o.ln_1p()).collect();
    }
    Ok(compare("bnbp", &["gamma0", "r_sum", "n_genes"], &prior, &chain, cfg.n_batches))
}
