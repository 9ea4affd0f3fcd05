//! Beta–negative binomial process.
//!
//! Counts are `n_jk ~ NB(r_j, p_k)`: each gene has a probability `p_k`, an
//! atom of a beta process with concentration `c`, and each sample a shape
//! `r_j ~ Gamma(a0, 1/b0)`. The concentration is updated by an
//! independence Metropolis-Hastings step that proposes from its prior.

use rand::Rng;

use super::{positive, var, Chain, Hyper, SparseCounts, GENE_BLOCK};
use crate::data::CountMatrix;
use crate::error::{Error, Result};
use crate::kernels::{beta_pair, digamma, gamma, ln_beta, sample_crt, sample_logbeta, LogBetaParams, RngHandle};

#[derive(Debug, Clone, PartialEq)]
pub struct BnbpState {
    pub gamma0: f64,
    pub c: f64,
    /// Gene odds `p_k / (1 − p_k)`; zero for genes never observed.
    pub odds: Vec<f64>,
    /// `−ln(1 − p_k)`.
    pub log1m: Vec<f64>,
    /// `Σ −ln(1 − p)` over the unobserved atoms.
    pub p_star: f64,
    pub r: Vec<f64>,
    /// Table counts for the nonzero cells, gene-major with samples ascending.
    pub l: Vec<u64>,
}

impl BnbpState {
    pub fn initial(data: &CountMatrix) -> Self {
        Self::initial_sparse(&SparseCounts::new(data))
    }

    fn initial_sparse(data: &SparseCounts) -> Self {
        Self {
            gamma0: 1.0,
            c: 1.0,
            odds: vec![0.0; data.n_genes],
            log1m: vec![0.0; data.n_genes],
            p_star: 0.0,
            r: vec![1.0; data.n_samples],
            l: vec![1; data.vals.len()],
        }
    }

    pub fn r_sum(&self) -> f64 {
        self.r.iter().sum()
    }

    /// `p_k` recovered from the odds.
    pub fn p(&self, k: usize) -> f64 {
        self.odds[k] / (1.0 + self.odds[k])
    }
}

/// Log of the `c`-dependent factor of the matrix likelihood with every `p`
/// integrated out: `−γ₀[ψ(c + r.) − ψ(c)] + Σ_k ln B(n_.k, c + r.)` over
/// expressed genes.
pub fn c_log_target(c: f64, gamma0: f64, r_sum: f64, expressed_totals: &[u64]) -> Result<f64> {
    let a = c + r_sum;
    let mut lp = -gamma0 * (digamma(a)? - digamma(c)?);
    for &n in expressed_totals {
        lp += ln_beta(n as f64, a);
    }
    Ok(lp)
}

/// Independence MH update of `c` with a Gamma(c0, 1/d0) proposal; returns
/// whether the proposal was accepted.
pub fn bnbp_update_c<R: Rng + ?Sized>(state: &mut BnbpState, expressed_totals: &[u64], hyper: &Hyper, rng: &mut R) -> bool {
    let proposal = gamma(hyper.c0, 1.0 / hyper.d0, rng);
    let u: f64 = rng.random();
    accept_c(state, proposal, u, expressed_totals)
}

fn accept_c(state: &mut BnbpState, proposal: f64, u: f64, expressed_totals: &[u64]) -> bool {
    if !(proposal > 0.0 && proposal.is_finite()) {
        return false;
    }
    let r_sum = state.r_sum();
    let (Ok(new), Ok(old)) = (
        c_log_target(proposal, state.gamma0, r_sum, expressed_totals),
        c_log_target(state.c, state.gamma0, r_sum, expressed_totals),
    ) else {
        return false;
    };
    if u.ln() < new - old {
        state.c = proposal;
        true
    } else {
        false
    }
}

pub(crate) fn sweep_prepared(state: &mut BnbpState, data: &SparseCounts, h: &Hyper, freeze_c: bool, rng: &RngHandle, sweep: u64) -> Result<Option<bool>> {
    let a = state.c + state.r_sum();
    let numerical = |_| Error::numerical(sweep, "digamma");

    let mut g = rng.derive(&[sweep, var::GAMMA0]);
    let k_j = data.n_expressed() as f64;
    let psi_gap = digamma(a).map_err(numerical)? - digamma(state.c).map_err(numerical)?;
    state.gamma0 = positive(gamma(h.e0 + k_j, 1.0 / (h.f0 + psi_gap), &mut g), sweep, "gamma0")?;

    for (b, block) in data.expressed.chunks(GENE_BLOCK).enumerate() {
        let mut g = rng.derive(&[sweep, var::PROB, b as u64]);
        for &k in block {
            let (x, y) = beta_pair(data.gene_totals[k] as f64, a, &mut g);
            let odds = positive(x / y, sweep, "p_k odds")?;
            state.odds[k] = odds;
            state.log1m[k] = odds.ln_1p();
        }
    }

    let mut g = rng.derive(&[sweep, var::PSTAR]);
    let params = LogBetaParams::new(state.gamma0, a).map_err(|_| Error::numerical(sweep, "p_star"))?;
    state.p_star = sample_logbeta(&params, &mut g);

    let mut l_rows = vec![0u64; data.n_samples];
    for (b, block) in data.expressed.chunks(GENE_BLOCK).enumerate() {
        let mut g = rng.derive(&[sweep, var::TABLES, b as u64]);
        for &k in block {
            for i in data.cells(k) {
                let j = data.rows[i];
                let l = sample_crt(data.vals[i], state.r[j], &mut g);
                state.l[i] = l;
                l_rows[j] += l;
            }
        }
    }

    let rate = h.b0 + state.p_star + state.log1m.iter().sum::<f64>();
    let mut g = rng.derive(&[sweep, var::SAMPLE]);
    for (r, &l) in state.r.iter_mut().zip(&l_rows) {
        *r = positive(gamma(h.a0 + l as f64, 1.0 / rate, &mut g), sweep, "r_j")?;
    }

    if freeze_c {
        return Ok(None);
    }
    let totals: Vec<u64> = data.expressed.iter().map(|&k| data.gene_totals[k]).collect();
    let mut g = rng.derive(&[sweep, var::CONC]);
    Ok(Some(bnbp_update_c(state, &totals, h, &mut g)))
}

/// One sweep in the order γ₀, p_k, p_*, l_jk, r_j, then the MH move on `c`
/// unless frozen. Returns the MH decision.
pub fn bnbp_gibbs_sweep(state: &mut BnbpState, data: &CountMatrix, hyper: &Hyper, freeze_c: bool, rng: &RngHandle, sweep: u64) -> Result<Option<bool>> {
    let sparse = SparseCounts::new(data);
    if state.r.len() != sparse.n_samples || state.odds.len() != sparse.n_genes || state.l.len() != sparse.vals.len() {
        return Err(Error::Mismatch("state dimensions do not match the data".into()));
    }
    sweep_prepared(state, &sparse, hyper, freeze_c, rng, sweep)
}

pub struct BnbpSampler {
    data: SparseCounts,
    hyper: Hyper,
    freeze_c: bool,
    state: BnbpState,
    rng: RngHandle,
    accepted: Option<bool>,
}

impl BnbpSampler {
    pub fn new(data: &CountMatrix, hyper: Hyper, freeze_c: bool, rng: RngHandle) -> Self {
        let data = SparseCounts::new(data);
        Self {
            state: BnbpState::initial_sparse(&data),
            data,
            hyper,
            freeze_c,
            rng,
            accepted: None,
        }
    }

    pub fn state(&self) -> &BnbpState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut BnbpState {
        &mut self.state
    }
}

impl Chain for BnbpSampler {
    fn sweep(&mut self, sweep: u64) -> Result<()> {
        self.accepted = sweep_prepared(&mut self.state, &self.data, &self.hyper, self.freeze_c, &self.rng, sweep)?;
        Ok(())
    }

    fn global_names(&self) -> Vec<String> {
        ["gamma0", "c", "r_sum", "p_star"].map(String::from).to_vec()
    }

    fn globals(&self) -> Vec<f64> {
        vec![self.state.gamma0, self.state.c, self.state.r_sum(), self.state.p_star]
    }

    fn statistic(&self, out: &mut [f64]) {
        out.copy_from_slice(&self.state.odds);
    }

    fn last_accept(&self) -> Option<bool> {
        self.accepted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::NegBinomial;
    use crate::model::{fit, run_chain, McmcConfig, ModelKind};
    use rand_distr::Distribution;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn odds_conditional_mean() {
        // Beta(6, 2 + 5): E[p/(1 − p)] = 6/(2 + 5 − 1)
        let mut g = RngHandle::new(1, 0);
        let odds: Vec<f64> = (0..200_000)
            .map(|_| {
                let (x, y) = beta_pair(6.0, 7.0, &mut g);
                x / y
            })
            .collect();
        let (m, se) = mean_se(&odds);
        assert!((m - 1.0).abs() < 4.0 * se, "{m}");

        // same thing through a sweep: r. = 5 from five unit shapes, c = 2, frozen
        let data = CountMatrix::from_rows(&[vec![6], vec![0], vec![0], vec![0], vec![0]]).unwrap();
        let base = RngHandle::new(2, 0);
        let draws: Vec<f64> = (0..20_000)
            .map(|i| {
                let mut s = BnbpState::initial(&data);
                s.c = 2.0;
                bnbp_gibbs_sweep(&mut s, &data, &Hyper::default(), true, &base, i).unwrap();
                s.odds[0]
            })
            .collect();
        let (m, se) = mean_se(&draws);
        assert!((m - 1.0).abs() < 4.0 * se, "{m}");
    }

    #[test]
    fn unexpressed_gene_odds_stay_zero() {
        let data = CountMatrix::from_rows(&[vec![3, 0, 50], vec![1, 0, 70], vec![0, 0, 64]]).unwrap();
        let mut s = BnbpState::initial(&data);
        let rng = RngHandle::new(3, 0);
        let sparse = SparseCounts::new(&data);
        for sweep in 0..300 {
            bnbp_gibbs_sweep(&mut s, &data, &Hyper::default(), false, &rng, sweep).unwrap();
            assert_eq!(s.odds[1], 0.0);
            assert!(s.r.iter().all(|&r| r > 0.0));
            let mut rows = [0u64; 3];
            for k in 0..3 {
                for i in sparse.cells(k) {
                    rows[sparse.rows[i]] += s.l[i];
                }
            }
            for (l, n) in rows.iter().zip(&sparse.sample_totals) {
                assert!(l <= n);
            }
        }
    }

    #[test]
    fn odds_transform_examples() {
        let data = CountMatrix::from_rows(&[vec![1]]).unwrap();
        let mut s = BnbpState::initial(&data);
        s.odds[0] = 1.0;
        assert_eq!(s.p(0), 0.5);
        // odds are monotone in p, so rankings agree
        let ps = [0.01, 0.2, 0.5, 0.77, 0.999];
        let odds: Vec<f64> = ps.iter().map(|p| p / (1.0 - p)).collect();
        assert!(odds.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mh_accepts_identical_proposal() {
        let data = CountMatrix::from_rows(&[vec![4, 9], vec![2, 0]]).unwrap();
        let mut s = BnbpState::initial(&data);
        s.c = 1.3;
        for u in [1e-9, 0.5, 1.0 - 1e-12] {
            assert!(accept_c(&mut s, 1.3, u, &[6, 9]));
        }
    }

    #[test]
    fn empty_data_target_is_levy_factor_only() {
        let (g0, r_sum) = (2.0, 3.0);
        for c in [0.3, 1.0, 4.0] {
            let want = -g0 * (digamma(c + r_sum).unwrap() - digamma(c).unwrap());
            assert!((c_log_target(c, g0, r_sum, &[]).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mh_acceptance_rate_is_interior() {
        let data = CountMatrix::from_rows(&[vec![5, 0, 12, 1], vec![3, 2, 20, 0], vec![8, 1, 9, 0]]).unwrap();
        let mut chain = BnbpSampler::new(&data, Hyper::default(), false, RngHandle::new(4, 0));
        let mcmc = McmcConfig { burn_in: 0, retained: 100_000, ..McmcConfig::default() };
        let (_, diag) = run_chain(&mut chain, data.gene_ids(), "odds", &mcmc).unwrap();
        let rate = diag.acceptance_rate().unwrap();
        assert!(rate > 0.0 && rate < 1.0, "{rate}");
    }

    #[test]
    fn vmr_identity() {
        let p = 0.35;
        let dist = NegBinomial::new(3.0, p).unwrap();
        let mut g = RngHandle::new(5, 0);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut g) as f64).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((v / m - 1.0 / (1.0 - p)).abs() / (1.0 / (1.0 - p)) < 0.05);
    }

    #[test]
    fn recovers_known_odds() {
        let truth = [0.5, 1.0, 2.0];
        let j = 20;
        let mut g = RngHandle::new(6, 0);
        let r: Vec<f64> = (0..j).map(|i| 5.0 + 10.0 * i as f64 / j as f64).collect();
        let rows: Vec<Vec<u64>> = r
            .iter()
            .map(|&r_j| truth.iter().map(|&o| NegBinomial::from_odds(r_j, o).unwrap().sample(&mut g)).collect())
            .collect();
        let data = CountMatrix::from_rows(&rows).unwrap();
        // three genes say little about the sample shapes, so the prior on r_j
        // is centred on the simulated range
        let hyper = Hyper { a0: 10.0, b0: 1.0, ..Hyper::default() };
        let fit = fit(ModelKind::Bnbp, &data, &hyper, &McmcConfig::default(), 0).unwrap();
        assert_eq!(fit.trace.n_draws(), 1000);
        for (m, t) in fit.trace.gene_means().iter().zip(truth) {
            assert!((m - t).abs() / t < 0.3, "posterior mean odds {m} vs {t}");
        }
    }
}
