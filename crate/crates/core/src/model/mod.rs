//! Gibbs samplers for the negative-binomial-process family.
//!
//! Each model fits one group of samples and produces a [`PosteriorTrace`]
//! of a per-gene ranking statistic:
//!
//! | model        | statistic                        |
//! |--------------|----------------------------------|
//! | `nbp`        | Poisson rate, normalized per draw |
//! | `nbp-scaled` | Poisson rate `r_k`               |
//! | `gnbp`       | NB shape `r_k`                   |
//! | `bnbp`       | NB odds `p_k / (1 − p_k)`        |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::CountMatrix;
use crate::error::{Error, Result};
use crate::kernels::{stream_key, RngHandle};

pub mod bnbp;
pub mod gnbp;
pub mod nbp;

/// Genes are updated in fixed blocks, each with its own random stream per
/// sweep, so results do not depend on how blocks are scheduled.
pub(crate) const GENE_BLOCK: usize = 64;

/// Stream tags for the variables updated in a sweep.
pub(crate) mod var {
    pub const GAMMA0: u64 = 1;
    pub const RATE: u64 = 2;
    pub const REST: u64 = 3;
    pub const SAMPLE: u64 = 4;
    pub const CONC: u64 = 5;
    pub const TABLES: u64 = 6;
    pub const PROB: u64 = 7;
    pub const PSTAR: u64 = 8;
}

/// Gamma/beta prior hyperparameters shared by all models.
///
/// `γ₀ ~ Gamma(e0, 1/f0)`, `c ~ Gamma(c0, 1/d0)`; `(a0, b0)` parameterize
/// the sample-specific prior: Gamma(a0, 1/b0) for the scaled NBP's `q_j`
/// and the BNBP's `r_j`, Beta(a0, b0) for the GNBP's `p_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub e0: f64,
    pub f0: f64,
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    pub d0: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            e0: 0.01,
            f0: 0.01,
            a0: 1.0,
            b0: 1.0,
            c0: 1.0,
            d0: 1.0,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("e0", self.e0),
            ("f0", self.f0),
            ("a0", self.a0),
            ("b0", self.b0),
            ("c0", self.c0),
            ("d0", self.d0),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("hyperparameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "nbp")]
    Nbp,
    #[serde(rename = "nbp-scaled")]
    NbpScaled,
    #[serde(rename = "gnbp")]
    Gnbp,
    #[serde(rename = "bnbp")]
    Bnbp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Nbp, ModelKind::NbpScaled, ModelKind::Gnbp, ModelKind::Bnbp];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Nbp => "nbp",
            ModelKind::NbpScaled => "nbp-scaled",
            ModelKind::Gnbp => "gnbp",
            ModelKind::Bnbp => "bnbp",
        }
    }

    /// Name of the per-gene quantity compared between groups.
    pub fn statistic(self) -> &'static str {
        match self {
            ModelKind::Nbp => "normalized_rate",
            ModelKind::NbpScaled => "rate",
            ModelKind::Gnbp => "shape",
            ModelKind::Bnbp => "odds",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?} (expected nbp, nbp-scaled, gnbp or bnbp)")))
    }
}

/// Burn-in, retention and thinning for one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub retained: usize,
    pub thin: usize,
    pub seed: u64,
    /// Keep the BNBP concentration `c` at its initial value.
    pub freeze_c: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            retained: 1000,
            thin: 1,
            seed: 0,
            freeze_c: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.retained < 1 {
            return Err(Error::Config("retained must be at least 1".into()));
        }
        if self.thin < 1 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> usize {
        self.burn_in + self.retained * self.thin
    }
}

/// Retained draws of one chain: a per-gene statistic plus global parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTrace {
    pub statistic: String,
    pub gene_ids: Vec<String>,
    pub global_names: Vec<String>,
    /// Row-major, `n_draws × global_names.len()`.
    pub globals: Vec<f64>,
    /// Row-major, `n_draws × gene_ids.len()`.
    pub values: Vec<f64>,
}

impl PosteriorTrace {
    pub fn new(statistic: impl Into<String>, gene_ids: Vec<String>, global_names: Vec<String>) -> Self {
        Self {
            statistic: statistic.into(),
            gene_ids,
            global_names,
            globals: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n_draws(&self) -> usize {
        if self.gene_ids.is_empty() {
            self.globals.len() / self.global_names.len().max(1)
        } else {
            self.values.len() / self.gene_ids.len()
        }
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn push(&mut self, globals: &[f64], values: &[f64]) {
        debug_assert_eq!(globals.len(), self.global_names.len());
        debug_assert_eq!(values.len(), self.gene_ids.len());
        self.globals.extend_from_slice(globals);
        self.values.extend_from_slice(values);
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        let k = self.n_genes();
        &self.values[i * k..(i + 1) * k]
    }

    pub fn draw_globals(&self, i: usize) -> &[f64] {
        let g = self.global_names.len();
        &self.globals[i * g..(i + 1) * g]
    }

    /// All draws for one gene.
    pub fn gene(&self, k: usize) -> Vec<f64> {
        let n = self.n_genes();
        self.values.iter().skip(k).step_by(n).copied().collect()
    }

    pub fn global(&self, name: &str) -> Option<Vec<f64>> {
        let g = self.global_names.iter().position(|n| n == name)?;
        let width = self.global_names.len();
        Some(self.globals.iter().skip(g).step_by(width).copied().collect())
    }

    /// Posterior mean of every gene's statistic.
    pub fn gene_means(&self) -> Vec<f64> {
        let n = self.n_draws().max(1) as f64;
        let mut means = vec![0.0; self.n_genes()];
        for i in 0..self.n_draws() {
            for (m, v) in means.iter_mut().zip(self.draw(i)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        means
    }
}

/// Global parameters after every sweep, for convergence plots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub global_names: Vec<String>,
    pub rows: Vec<DiagnosticRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub sweep: u64,
    pub retained: bool,
    pub globals: Vec<f64>,
    /// Whether the Metropolis-Hastings move on `c` was accepted (BNBP only).
    pub accepted: Option<bool>,
}

impl Diagnostics {
    pub fn acceptance_rate(&self) -> Option<f64> {
        let flags: Vec<bool> = self.rows.iter().filter_map(|r| r.accepted).collect();
        if flags.is_empty() {
            return None;
        }
        Some(flags.iter().filter(|&&a| a).count() as f64 / flags.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ModelKind,
    pub trace: PosteriorTrace,
    pub diagnostics: Diagnostics,
}

/// One Markov chain over a fixed data set.
pub trait Chain {
    fn sweep(&mut self, sweep: u64) -> Result<()>;
    fn global_names(&self) -> Vec<String>;
    fn globals(&self) -> Vec<f64>;
    /// Ranking statistic of every gene in the current state.
    fn statistic(&self, out: &mut [f64]);
    fn last_accept(&self) -> Option<bool> {
        None
    }
}

/// Runs burn-in then retention sweeps, keeping every `thin`-th draw.
pub fn run_chain<C: Chain>(chain: &mut C, gene_ids: &[String], statistic: &str, mcmc: &McmcConfig) -> Result<(PosteriorTrace, Diagnostics)> {
    mcmc.validate()?;
    let names = chain.global_names();
    let mut trace = PosteriorTrace::new(statistic, gene_ids.to_vec(), names.clone());
    trace.values.reserve(mcmc.retained * gene_ids.len());
    let mut diagnostics = Diagnostics {
        global_names: names,
        rows: Vec::with_capacity(mcmc.total_sweeps()),
    };
    let mut stat = vec![0.0; gene_ids.len()];
    for sweep in 0..mcmc.total_sweeps() {
        chain.sweep(sweep as u64)?;
        let after_burn = sweep + 1 > mcmc.burn_in;
        let keep = after_burn && (sweep + 1 - mcmc.burn_in) % mcmc.thin == 0;
        let globals = chain.globals();
        if keep {
            chain.statistic(&mut stat);
            trace.push(&globals, &stat);
        }
        diagnostics.rows.push(DiagnosticRow {
            sweep: sweep as u64,
            retained: keep,
            globals,
            accepted: chain.last_accept(),
        });
    }
    Ok((trace, diagnostics))
}

/// Root random stream of chain `chain_id` under `seed`.
pub fn chain_rng(seed: u64, chain_id: u64) -> RngHandle {
    RngHandle::new(seed, stream_key(0, &[chain_id]))
}

/// Fits `model` to one group's counts.
pub fn fit(model: ModelKind, data: &CountMatrix, hyper: &Hyper, mcmc: &McmcConfig, chain_id: u64) -> Result<FitResult> {
    hyper.validate()?;
    mcmc.validate()?;
    if data.n_samples() == 0 || data.n_genes() == 0 {
        return Err(Error::Schema("cannot fit an empty count matrix".into()));
    }
    let rng = chain_rng(mcmc.seed, chain_id);
    let (trace, diagnostics) = match model {
        ModelKind::Nbp | ModelKind::NbpScaled => {
            let scaled = model == ModelKind::NbpScaled;
            let mut chain = nbp::NbpSampler::new(data, nbp::NbpHyper { prior: *hyper, scaled }, rng);
            let (trace, diag) = run_chain(&mut chain, data.gene_ids(), "rate", mcmc)?;
            (nbp::nbp_rank_statistic(trace, scaled), diag)
        }
        ModelKind::Gnbp => {
            let mut chain = gnbp::GnbpSampler::new(data, *hyper, rng);
            run_chain(&mut chain, data.gene_ids(), model.statistic(), mcmc)?
        }
        ModelKind::Bnbp => {
            let mut chain = bnbp::BnbpSampler::new(data, *hyper, mcmc.freeze_c, rng);
            run_chain(&mut chain, data.gene_ids(), model.statistic(), mcmc)?
        }
    };
    Ok(FitResult {
        model,
        trace,
        diagnostics,
    })
}

/// Column-compressed view of the nonzero cells of a count matrix.
#[derive(Debug, Clone)]
pub(crate) struct SparseCounts {
    pub n_samples: usize,
    pub n_genes: usize,
    pub sample_totals: Vec<u64>,
    pub gene_totals: Vec<u64>,
    /// Genes with a nonzero total, ascending.
    pub expressed: Vec<usize>,
    /// Nonzero cells of gene `k` are `col_start[k]..col_start[k + 1]`.
    pub col_start: Vec<usize>,
    pub rows: Vec<usize>,
    pub vals: Vec<u64>,
}

impl SparseCounts {
    pub fn new(m: &CountMatrix) -> Self {
        let (j_n, k_n) = (m.n_samples(), m.n_genes());
        let mut col_start = Vec::with_capacity(k_n + 1);
        let mut rows = Vec::new();
        let mut vals = Vec::new();
        for k in 0..k_n {
            col_start.push(rows.len());
            for j in 0..j_n {
                let n = m.get(j, k);
                if n > 0 {
                    rows.push(j);
                    vals.push(n);
                }
            }
        }
        col_start.push(rows.len());
        let gene_totals = m.gene_totals();
        Self {
            n_samples: j_n,
            n_genes: k_n,
            sample_totals: m.sample_totals(),
            expressed: (0..k_n).filter(|&k| gene_totals[k] > 0).collect(),
            gene_totals,
            col_start,
            rows,
            vals,
        }
    }

    pub fn n_expressed(&self) -> usize {
        self.expressed.len()
    }

    pub fn cells(&self, k: usize) -> std::ops::Range<usize> {
        self.col_start[k]..self.col_start[k + 1]
    }
}

/// Fails with a numerical error unless `x` is finite and positive.
pub(crate) fn positive(x: f64, sweep: u64, name: &str) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::numerical(sweep, format!("{name} = {x}")))
    }
}
