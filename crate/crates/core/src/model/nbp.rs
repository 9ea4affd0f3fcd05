//! Negative binomial process with optional sample-specific scaling.
//!
//! Counts are `n_jk ~ Pois(q_j r_k)` with gene rates `r_k` the atoms of a
//! gamma process `ΓP(G_0, 1/c)` of mass `γ₀`. The unscaled process pins
//! every `q_j = 1`; the scaled one gives each sample its own `q_j`.

use rand::Rng;
use rand_distr::Distribution;

use super::{positive, var, Chain, Hyper, PosteriorTrace, SparseCounts, GENE_BLOCK};
use crate::data::CountMatrix;
use crate::error::{Error, Result};
use crate::kernels::{gamma, ln_gamma, poisson, Logarithmic, multinomial, NegBinomial, RngHandle};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbpHyper {
    pub prior: Hyper,
    pub scaled: bool,
}

impl Default for NbpHyper {
    fn default() -> Self {
        Self {
            prior: Hyper::default(),
            scaled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbpState {
    pub gamma0: f64,
    pub c: f64,
    /// Sample scaling factors; all ones when unscaled.
    pub q: Vec<f64>,
    /// Gene rates; exactly zero for genes never observed.
    pub r: Vec<f64>,
    /// Total weight `G(Ω \ D_J)` of the atoms with no observed counts.
    pub g_rest: f64,
}

impl NbpState {
    /// Deterministic starting point for `data`.
    pub fn initial(data: &CountMatrix) -> Self {
        let (j, totals) = (data.n_samples(), data.gene_totals());
        let q_sum = j as f64;
        Self {
            gamma0: 1.0,
            c: 1.0,
            q: vec![1.0; j],
            r: totals.iter().map(|&n| n as f64 / (1.0 + q_sum)).collect(),
            g_rest: 1.0,
        }
    }

    pub fn q_sum(&self) -> f64 {
        self.q.iter().sum()
    }

    /// `G(Ω) = G(Ω \ D_J) + Σ r_k`.
    pub fn total_mass(&self) -> f64 {
        self.g_rest + self.r.iter().sum::<f64>()
    }
}

pub(crate) fn sweep_prepared(state: &mut NbpState, data: &SparseCounts, hyper: &NbpHyper, rng: &RngHandle, sweep: u64) -> Result<()> {
    let h = &hyper.prior;
    if !hyper.scaled {
        state.q.iter_mut().for_each(|q| *q = 1.0);
    }
    let q_sum = state.q_sum();
    let rate = state.c + q_sum;

    let mut g = rng.derive(&[sweep, var::GAMMA0]);
    let k_j = data.n_expressed() as f64;
    state.gamma0 = positive(gamma(h.e0 + k_j, 1.0 / (h.f0 + (q_sum / state.c).ln_1p()), &mut g), sweep, "gamma0")?;

    for (b, block) in data.expressed.chunks(GENE_BLOCK).enumerate() {
        let mut g = rng.derive(&[sweep, var::RATE, b as u64]);
        for &k in block {
            let r = gamma(data.gene_totals[k] as f64, 1.0 / rate, &mut g);
            state.r[k] = positive(r, sweep, "r_k")?;
        }
    }

    let mut g = rng.derive(&[sweep, var::REST]);
    state.g_rest = gamma(state.gamma0, 1.0 / rate, &mut g);
    if !(state.g_rest >= 0.0 && state.g_rest.is_finite()) {
        return Err(Error::numerical(sweep, "g_rest"));
    }
    let total = state.total_mass();

    if hyper.scaled {
        let mut g = rng.derive(&[sweep, var::SAMPLE]);
        for (q, &n) in state.q.iter_mut().zip(&data.sample_totals) {
            *q = positive(gamma(h.a0 + n as f64, 1.0 / (h.b0 + total), &mut g), sweep, "q_j")?;
        }
    }

    let mut g = rng.derive(&[sweep, var::CONC]);
    state.c = positive(gamma(h.c0 + state.gamma0, 1.0 / (h.d0 + total), &mut g), sweep, "c")?;
    Ok(())
}

/// One full-conditional sweep in the order γ₀, r_k, G(Ω \ D_J), q_j, c.
pub fn nbp_gibbs_sweep(state: &mut NbpState, data: &CountMatrix, hyper: &NbpHyper, rng: &RngHandle, sweep: u64) -> Result<()> {
    if state.q.len() != data.n_samples() || state.r.len() != data.n_genes() {
        return Err(Error::Mismatch("state dimensions do not match the data".into()));
    }
    sweep_prepared(state, &SparseCounts::new(data), hyper, rng, sweep)
}

pub struct NbpSampler {
    data: SparseCounts,
    hyper: NbpHyper,
    state: NbpState,
    rng: RngHandle,
}

impl NbpSampler {
    pub fn new(data: &CountMatrix, hyper: NbpHyper, rng: RngHandle) -> Self {
        Self {
            data: SparseCounts::new(data),
            hyper,
            state: NbpState::initial(data),
            rng,
        }
    }

    pub fn state(&self) -> &NbpState {
        &self.state
    }
}

impl Chain for NbpSampler {
    fn sweep(&mut self, sweep: u64) -> Result<()> {
        sweep_prepared(&mut self.state, &self.data, &self.hyper, &self.rng, sweep)
    }

    fn global_names(&self) -> Vec<String> {
        ["gamma0", "c", "q_sum", "g_total"].map(String::from).to_vec()
    }

    fn globals(&self) -> Vec<f64> {
        vec![self.state.gamma0, self.state.c, self.state.q_sum(), self.state.total_mass()]
    }

    fn statistic(&self, out: &mut [f64]) {
        out.copy_from_slice(&self.state.r);
    }
}

/// Rescales one draw of rates onto the simplex; an all-zero draw stays zero.
pub fn normalize_rates(draw: &mut [f64]) {
    let total: f64 = draw.iter().sum();
    if total > 0.0 {
        draw.iter_mut().for_each(|r| *r /= total);
    }
}

/// Ranking statistic from a trace of raw rates: unchanged for the scaled
/// process, normalized within each draw for the unscaled one.
pub fn nbp_rank_statistic(mut trace: PosteriorTrace, scaled: bool) -> PosteriorTrace {
    if scaled {
        trace.statistic = "rate".into();
    } else {
        let k = trace.n_genes();
        if k > 0 {
            trace.values.chunks_mut(k).for_each(normalize_rates);
        }
        trace.statistic = "normalized_rate".into();
    }
    trace
}

fn check_params(gamma0: f64, c: f64, q: &[f64]) -> Result<()> {
    for (what, v) in [("gamma0", gamma0), ("c", c)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain { what, value: v });
        }
    }
    if let Some(&bad) = q.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain { what: "q_j", value: bad });
    }
    Ok(())
}

fn matrix_from_columns(n_samples: usize, columns: &[Vec<u64>]) -> CountMatrix {
    let rows: Vec<Vec<u64>> = (0..n_samples).map(|j| columns.iter().map(|col| col[j]).collect()).collect();
    if columns.is_empty() {
        let sample_ids = (1..=n_samples).map(|j| format!("s{j}")).collect();
        return CountMatrix::new(sample_ids, Vec::new(), Vec::new()).expect("empty matrix");
    }
    CountMatrix::from_rows(&rows).expect("rectangular by construction")
}

/// Draws a random count matrix one i.i.d. column at a time:
/// `K_J ~ Pois(γ₀ ln((c + q.)/c))`, each column total
/// `~ Logarithmic(q./(c + q.))`, split across samples in proportion to `q_j`.
pub fn nbp_generate_columnwise<R: Rng + ?Sized>(gamma0: f64, c: f64, q: &[f64], rng: &mut R) -> Result<CountMatrix> {
    check_params(gamma0, c, q)?;
    let q_sum: f64 = q.iter().sum();
    let n_cols = poisson(gamma0 * (q_sum / c).ln_1p(), rng);
    let totals = Logarithmic::new(q_sum / (c + q_sum))?;
    let columns: Vec<Vec<u64>> = (0..n_cols).map(|_| multinomial(totals.sample(rng), q, rng)).collect();
    Ok(matrix_from_columns(q.len(), &columns))
}

/// Draws the next sample's counts given the current matrix (prediction
/// rule): `NB(n_.k, p')` at existing columns with
/// `p' = q_new/(c + q. + q_new)`, then a Poisson number of new columns
/// with Logarithmic(p') entries. Returns (existing, new) counts.
pub fn nbp_predict_row<R: Rng + ?Sized>(gene_totals: &[u64], gamma0: f64, c: f64, q_sum: f64, q_new: f64, rng: &mut R) -> Result<(Vec<u64>, Vec<u64>)> {
    check_params(gamma0, c, &[q_new])?;
    let denom = c + q_sum + q_new;
    let odds = q_new / (c + q_sum);
    let existing = gene_totals
        .iter()
        .map(|&n| {
            if n == 0 {
                Ok(0)
            } else {
                Ok(NegBinomial::from_odds(n as f64, odds)?.sample(rng))
            }
        })
        .collect::<Result<Vec<u64>>>()?;
    let n_new = poisson(gamma0 * (q_new / (c + q_sum)).ln_1p(), rng);
    let entry = Logarithmic::new(q_new / denom)?;
    let new = (0..n_new).map(|_| entry.sample(rng)).collect();
    Ok((existing, new))
}

/// Builds the matrix sample by sample with [`nbp_predict_row`]. Columns
/// appear in order of first expression.
pub fn nbp_generate_rowwise<R: Rng + ?Sized>(gamma0: f64, c: f64, q: &[f64], rng: &mut R) -> Result<CountMatrix> {
    check_params(gamma0, c, q)?;
    let mut columns: Vec<Vec<u64>> = Vec::new();
    let mut totals: Vec<u64> = Vec::new();
    let mut q_sum = 0.0;
    for (j, &q_j) in q.iter().enumerate() {
        let (existing, new) = nbp_predict_row(&totals, gamma0, c, q_sum, q_j, rng)?;
        for (k, n) in existing.into_iter().enumerate() {
            columns[k][j] = n;
            totals[k] += n;
        }
        for n in new {
            let mut col = vec![0; q.len()];
            col[j] = n;
            columns.push(col);
            totals.push(n);
        }
        q_sum += q_j;
    }
    Ok(matrix_from_columns(q.len(), &columns))
}

/// Log-probability of an ordered count matrix whose columns are all
/// expressed. A column of zeros has probability zero.
pub fn nbp_matrix_log_pmf(matrix: &CountMatrix, gamma0: f64, c: f64, q: &[f64]) -> Result<f64> {
    check_params(gamma0, c, q)?;
    if q.len() != matrix.n_samples() {
        return Err(Error::Mismatch("one q_j per sample required".into()));
    }
    let q_sum: f64 = q.iter().sum();
    let totals = matrix.gene_totals();
    if totals.iter().any(|&t| t == 0) {
        return Ok(f64::NEG_INFINITY);
    }
    let k = matrix.n_genes() as f64;
    let mut lp = k * gamma0.ln() - gamma0 * (q_sum / c).ln_1p() - ln_gamma(k + 1.0);
    let log_denom = (c + q_sum).ln();
    for &t in &totals {
        lp += ln_gamma(t as f64) - t as f64 * log_denom;
    }
    lp -= matrix.counts().iter().map(|&n| ln_gamma(n as f64 + 1.0)).sum::<f64>();
    for (n_j, q_j) in matrix.sample_totals().iter().zip(q) {
        lp += *n_j as f64 * q_j.ln();
    }
    Ok(lp)
}
