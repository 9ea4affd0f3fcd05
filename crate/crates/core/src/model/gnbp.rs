//! Gamma–negative binomial process.
//!
//! Counts are `n_jk ~ NB(r_k, p_j)`: each gene has a shape `r_k` drawn from
//! a gamma process and each sample a probability `p_j ~ Beta(a0, b0)`.
//! Shapes are updated through CRT table counts `l_jk`, which are stored only
//! for nonzero cells.

use super::{positive, var, Chain, Hyper, SparseCounts, GENE_BLOCK};
use crate::data::CountMatrix;
use crate::error::{Error, Result};
use crate::kernels::{beta_pair, gamma, sample_crt, RngHandle};

#[derive(Debug, Clone, PartialEq)]
pub struct GnbpState {
    pub gamma0: f64,
    pub c: f64,
    pub p: Vec<f64>,
    /// `q_j = −ln(1 − p_j)`, kept alongside `p` for precision near 1.
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub g_rest: f64,
    /// Table counts for the nonzero cells, gene-major with samples ascending.
    pub l: Vec<u64>,
}

impl GnbpState {
    pub fn initial(data: &CountMatrix) -> Self {
        let sparse = SparseCounts::new(data);
        Self::initial_sparse(&sparse)
    }

    fn initial_sparse(data: &SparseCounts) -> Self {
        let mut r = vec![0.0; data.n_genes];
        for &k in &data.expressed {
            r[k] = 1.0;
        }
        Self {
            gamma0: 1.0,
            c: 1.0,
            p: vec![0.5; data.n_samples],
            q: vec![std::f64::consts::LN_2; data.n_samples],
            r,
            g_rest: 1.0,
            l: vec![1; data.vals.len()],
        }
    }

    pub fn q_sum(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.g_rest + self.r.iter().sum::<f64>()
    }

    pub fn p_mean(&self) -> f64 {
        self.p.iter().sum::<f64>() / self.p.len().max(1) as f64
    }
}

pub(crate) fn sweep_prepared(state: &mut GnbpState, data: &SparseCounts, h: &Hyper, rng: &RngHandle, sweep: u64) -> Result<()> {
    let q_sum = state.q_sum();
    let rate = state.c + q_sum;

    let mut g = rng.derive(&[sweep, var::GAMMA0]);
    let k_j = data.n_expressed() as f64;
    state.gamma0 = positive(gamma(h.e0 + k_j, 1.0 / (h.f0 + (q_sum / state.c).ln_1p()), &mut g), sweep, "gamma0")?;

    for (b, block) in data.expressed.chunks(GENE_BLOCK).enumerate() {
        let mut g = rng.derive(&[sweep, var::TABLES, b as u64]);
        for &k in block {
            let r_k = state.r[k];
            let mut l_total = 0;
            for i in data.cells(k) {
                let l = sample_crt(data.vals[i], r_k, &mut g);
                state.l[i] = l;
                l_total += l;
            }
            state.r[k] = positive(gamma(l_total as f64, 1.0 / rate, &mut g), sweep, "r_k")?;
        }
    }

    let mut g = rng.derive(&[sweep, var::REST]);
    state.g_rest = gamma(state.gamma0, 1.0 / rate, &mut g);
    if !(state.g_rest >= 0.0 && state.g_rest.is_finite()) {
        return Err(Error::numerical(sweep, "g_rest"));
    }
    let total = state.total_mass();

    let mut g = rng.derive(&[sweep, var::PROB]);
    for j in 0..data.n_samples {
        let (x, y) = beta_pair(h.a0 + data.sample_totals[j] as f64, h.b0 + total, &mut g);
        let ratio = x / y;
        state.q[j] = positive(ratio.ln_1p(), sweep, "q_j")?;
        state.p[j] = x / (x + y);
    }

    let mut g = rng.derive(&[sweep, var::CONC]);
    state.c = positive(gamma(h.c0 + state.gamma0, 1.0 / (h.d0 + total), &mut g), sweep, "c")?;
    Ok(())
}

/// One sweep in the order γ₀, (l_jk, r_k) gene by gene, G(Ω \ D_J), p_j, c.
pub fn gnbp_gibbs_sweep(state: &mut GnbpState, data: &CountMatrix, hyper: &Hyper, rng: &RngHandle, sweep: u64) -> Result<()> {
    let sparse = SparseCounts::new(data);
    if state.p.len() != sparse.n_samples || state.r.len() != sparse.n_genes || state.l.len() != sparse.vals.len() {
        return Err(Error::Mismatch("state dimensions do not match the data".into()));
    }
    sweep_prepared(state, &sparse, hyper, rng, sweep)
}

pub struct GnbpSampler {
    data: SparseCounts,
    hyper: Hyper,
    state: GnbpState,
    rng: RngHandle,
}

impl GnbpSampler {
    pub fn new(data: &CountMatrix, hyper: Hyper, rng: RngHandle) -> Self {
        let data = SparseCounts::new(data);
        Self {
            state: GnbpState::initial_sparse(&data),
            data,
            hyper,
            rng,
        }
    }

    pub fn state(&self) -> &GnbpState {
        &self.state
    }
}

impl Chain for GnbpSampler {
    fn sweep(&mut self, sweep: u64) -> Result<()> {
        sweep_prepared(&mut self.state, &self.data, &self.hyper, &self.rng, sweep)
    }

    fn global_names(&self) -> Vec<String> {
        ["gamma0", "c", "p_mean", "g_total"].map(String::from).to_vec()
    }

    fn globals(&self) -> Vec<f64> {
        vec![self.state.gamma0, self.state.c, self.state.p_mean(), self.state.total_mass()]
    }

    fn statistic(&self, out: &mut [f64]) {
        out.copy_from_slice(&self.state.r);
    }
}
