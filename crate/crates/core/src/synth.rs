//! Synthetic two-group count data with known differential expression.
//!
//! Three generating regimes are supported: GNBP (`NB(r_k, p_j)`, fold change
//! on the gene shape), BNBP (`NB(r_j, p_k)`, fold change on the gene odds)
//! and a baySeq-style regime (per-gene mean and dispersion, fold change on
//! the mean). Low-expression filtering runs on a provisional null matrix
//! before any gene is made DE, so DE genes are never dropped.

use std::fmt;
use std::path::PathBuf;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::data::{load_counts, low_expression_survivors, CountMatrix, GroupedDataset};
use crate::error::{Error, Result};
use crate::eval::TruthLabels;
use crate::kernels::{beta, gamma, poisson, NegBinomial, RngHandle};
use crate::model::bnbp::BnbpSampler;
use crate::model::gnbp::GnbpSampler;
use crate::model::{chain_rng, Chain, Hyper, McmcConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setup {
    Gnbp,
    Bnbp,
    Bayseq,
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Setup::Gnbp => "gnbp",
            Setup::Bnbp => "bnbp",
            Setup::Bayseq => "bayseq",
        })
    }
}

impl std::str::FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gnbp" => Ok(Setup::Gnbp),
            "bnbp" => Ok(Setup::Bnbp),
            "bayseq" => Ok(Setup::Bayseq),
            _ => Err(Error::Config(format!("unknown setup {s:?} (expected gnbp, bnbp or bayseq)"))),
        }
    }
}

/// A fixed fold `b > 1`, or folds drawn uniformly from `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FoldChange {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterSource {
    Defaults,
    /// Fit the setup's model to a reference count matrix and resample its
    /// posterior-mean parameters.
    FitFromData(PathBuf),
}

/// Parameter distributions used when no reference data is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorDefaults {
    /// `r_k ~ Gamma(shape, scale)` for the GNBP setup.
    pub gnbp_r: (f64, f64),
    /// `p_j ~ Beta(a, b)` for the GNBP setup.
    pub gnbp_p: (f64, f64),
    /// `r_j ~ Gamma(shape, scale)` for the BNBP setup.
    pub bnbp_r: (f64, f64),
    /// `p_k ~ Beta(a, b)` for the BNBP setup.
    pub bnbp_p: (f64, f64),
    /// `μ_k ~ LogNormal(location, scale)` for the baySeq setup.
    pub bayseq_mu: (f64, f64),
    /// `φ_k ~ Gamma(shape, scale)` for the baySeq setup.
    pub bayseq_phi: (f64, f64),
}

impl Default for GeneratorDefaults {
    fn default() -> Self {
        Self {
            gnbp_r: (0.5, 2.0),
            gnbp_p: (8.0, 2.0),
            bnbp_r: (10.0, 1.0),
            bnbp_p: (1.0, 3.0),
            bayseq_mu: (50f64.ln(), 1.5),
            bayseq_phi: (1.0, 0.25),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub setup: Setup,
    pub n_genes: usize,
    pub replicates: usize,
    pub de_fraction: f64,
    pub fold_change: FoldChange,
    pub up_fraction: f64,
    pub qc_drop_fraction: f64,
    pub parameter_source: ParameterSource,
    pub defaults: GeneratorDefaults,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            setup: Setup::Gnbp,
            n_genes: 10_000,
            replicates: 5,
            de_fraction: 0.1,
            fold_change: FoldChange::Fixed(2.0),
            up_fraction: 0.5,
            qc_drop_fraction: 0.1,
            parameter_source: ParameterSource::Defaults,
            defaults: GeneratorDefaults::default(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_genes == 0 || self.replicates == 0 {
            return bad("n_genes and replicates must be positive".into());
        }
        for (name, v) in [("de_fraction", self.de_fraction), ("up_fraction", self.up_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.qc_drop_fraction) {
            return bad(format!("qc_drop_fraction must lie in [0, 1), got {}", self.qc_drop_fraction));
        }
        match self.fold_change {
            FoldChange::Fixed(b) if !(b > 1.0 && b.is_finite()) => bad(format!("fold change must exceed 1, got {b}")),
            FoldChange::Uniform { lo, hi } if !(lo > 1.0 && hi >= lo && hi.is_finite()) => bad(format!("fold interval must satisfy 1 < lo <= hi, got [{lo}, {hi}]")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    None,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub gene_ids: Vec<String>,
    pub direction: Vec<Direction>,
    /// 1 for genes that are not DE.
    pub realized_fold: Vec<f64>,
}

impl SynthTruth {
    pub fn is_de(&self, k: usize) -> bool {
        self.direction[k] != Direction::None
    }

    pub fn n_de(&self) -> usize {
        (0..self.gene_ids.len()).filter(|&k| self.is_de(k)).count()
    }

    pub fn labels(&self) -> TruthLabels {
        TruthLabels {
            gene_ids: self.gene_ids.clone(),
            de: (0..self.gene_ids.len()).map(|k| self.is_de(k)).collect(),
        }
    }

    /// `gene_id,de,direction,realized_fold`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gene_id,de,direction,realized_fold\n");
        for k in 0..self.gene_ids.len() {
            s.push_str(&format!("{},{},{},{}\n", self.gene_ids[k], self.is_de(k), self.direction[k].as_str(), self.realized_fold[k]));
        }
        s
    }
}

/// Per-gene and per-sample parameters of one generating regime.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorParams {
    /// Gene shapes `r_k` and sample probabilities `p_j`.
    Gnbp { r: Vec<f64>, p: Vec<f64> },
    /// Sample shapes `r_j` and gene probabilities `p_k`.
    Bnbp { r: Vec<f64>, p: Vec<f64> },
    /// Gene means and dispersions.
    Bayseq { mu: Vec<f64>, phi: Vec<f64> },
}

/// Posterior means of the setup's parameters on a reference matrix, or
/// moment estimates for the baySeq setup.
pub fn fit_generator_params(data: &CountMatrix, setup: Setup, hyper: &Hyper, mcmc: &McmcConfig) -> Result<GeneratorParams> {
    if data.n_samples() < 2 {
        return Err(Error::Schema(format!("reference data needs at least 2 samples, found {}", data.n_samples())));
    }
    match setup {
        Setup::Bayseq => {
            let j = data.n_samples() as f64;
            let (mut mu, mut phi) = (Vec::new(), Vec::new());
            for k in 0..data.n_genes() {
                let col: Vec<f64> = data.column(k).iter().map(|&x| x as f64).collect();
                let m = col.iter().sum::<f64>() / j;
                let s2 = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (j - 1.0);
                mu.push(m);
                phi.push(if m > 0.0 { ((s2 - m) / (m * m)).max(0.0) } else { 0.0 });
            }
            Ok(GeneratorParams::Bayseq { mu, phi })
        }
        Setup::Gnbp => {
            let mut chain = GnbpSampler::new(data, *hyper, chain_rng(mcmc.seed, 0));
            let (r, p) = posterior_means(&mut chain, mcmc, data.n_genes(), data.n_samples(), |c, r, p| {
                accumulate(r, &c.state().r);
                accumulate(p, &c.state().p);
            })?;
            Ok(GeneratorParams::Gnbp { r, p })
        }
        Setup::Bnbp => {
            let mut chain = BnbpSampler::new(data, *hyper, mcmc.freeze_c, chain_rng(mcmc.seed, 0));
            let (p, r) = posterior_means(&mut chain, mcmc, data.n_genes(), data.n_samples(), |c, p, r| {
                let s = c.state();
                accumulate(p, &(0..s.odds.len()).map(|k| s.p(k)).collect::<Vec<_>>());
                accumulate(r, &s.r);
            })?;
            Ok(GeneratorParams::Bnbp { r, p })
        }
    }
}

fn accumulate(sum: &mut [f64], x: &[f64]) {
    sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
}

fn posterior_means<C: Chain>(chain: &mut C, mcmc: &McmcConfig, n_genes: usize, n_samples: usize, mut add: impl FnMut(&C, &mut Vec<f64>, &mut Vec<f64>)) -> Result<(Vec<f64>, Vec<f64>)> {
    mcmc.validate()?;
    let (mut genes, mut samples) = (vec![0.0; n_genes], vec![0.0; n_samples]);
    let mut kept = 0usize;
    for sweep in 0..mcmc.total_sweeps() {
        chain.sweep(sweep as u64)?;
        if sweep + 1 > mcmc.burn_in && (sweep + 1 - mcmc.burn_in) % mcmc.thin == 0 {
            add(chain, &mut genes, &mut samples);
            kept += 1;
        }
    }
    let n = kept as f64;
    genes.iter_mut().chain(samples.iter_mut()).for_each(|v| *v /= n);
    Ok((genes, samples))
}

fn resample<R: Rng + ?Sized>(pool: &[f64], n: usize, what: &str, rng: &mut R) -> Result<Vec<f64>> {
    if pool.is_empty() {
        return Err(Error::Schema(format!("reference fit produced no usable {what}")));
    }
    Ok((0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect())
}

/// Parameters for `n_genes` genes and `n_samples` samples, either drawn
/// from the defaults or resampled with replacement from a fitted bundle.
pub fn draw_params(spec: &SynthSpec, fitted: Option<&GeneratorParams>, n_samples: usize, rng: &mut RngHandle) -> Result<GeneratorParams> {
    let d = &spec.defaults;
    let k = spec.n_genes;
    let gammas = |(shape, scale): (f64, f64), n: usize, rng: &mut RngHandle| (0..n).map(|_| gamma(shape, scale, rng)).collect::<Vec<f64>>();
    let betas = |(a, b): (f64, f64), n: usize, rng: &mut RngHandle| (0..n).map(|_| beta(a, b, rng)).collect::<Vec<f64>>();
    let params = match (spec.setup, fitted) {
        (Setup::Gnbp, None) => GeneratorParams::Gnbp { r: gammas(d.gnbp_r, k, rng), p: betas(d.gnbp_p, n_samples, rng) },
        (Setup::Bnbp, None) => GeneratorParams::Bnbp { r: gammas(d.bnbp_r, n_samples, rng), p: betas(d.bnbp_p, k, rng) },
        (Setup::Bayseq, None) => {
            let ln = LogNormal::new(d.bayseq_mu.0, d.bayseq_mu.1).map_err(|e| Error::Config(format!("bayseq_mu: {e}")))?;
            GeneratorParams::Bayseq { mu: (0..k).map(|_| ln.sample(rng)).collect(), phi: gammas(d.bayseq_phi, k, rng) }
        }
        (Setup::Gnbp, Some(GeneratorParams::Gnbp { r, p })) => {
            let r_pool: Vec<f64> = r.iter().copied().filter(|&x| x > 0.0).collect();
            GeneratorParams::Gnbp { r: resample(&r_pool, k, "gene shapes", rng)?, p: resample(p, n_samples, "sample probabilities", rng)? }
        }
        (Setup::Bnbp, Some(GeneratorParams::Bnbp { r, p })) => {
            let p_pool: Vec<f64> = p.iter().copied().filter(|&x| x > 0.0).collect();
            GeneratorParams::Bnbp { r: resample(r, n_samples, "sample shapes", rng)?, p: resample(&p_pool, k, "gene probabilities", rng)? }
        }
        (Setup::Bayseq, Some(GeneratorParams::Bayseq { mu, phi })) => {
            let pairs: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
            if pairs.is_empty() {
                return Err(Error::Schema("reference fit produced no expressed genes".into()));
            }
            let pick: Vec<usize> = (0..k).map(|_| pairs[rng.random_range(0..pairs.len())]).collect();
            GeneratorParams::Bayseq { mu: pick.iter().map(|&i| mu[i]).collect(), phi: pick.iter().map(|&i| phi[i]).collect() }
        }
        _ => return Err(Error::Mismatch(format!("fitted parameters do not match the {} setup", spec.setup))),
    };
    Ok(params)
}

/// Gene `k`'s counts in the given samples, with an optional fold applied
/// to the gene parameter (a factor on the shape, odds or mean).
fn gene_counts(params: &GeneratorParams, k: usize, samples: std::ops::Range<usize>, fold: f64, rng: &mut RngHandle) -> Result<Vec<u64>> {
    samples
        .map(|j| {
            Ok(match params {
                GeneratorParams::Gnbp { r, p } => NegBinomial::new(r[k] * fold, p[j])?.sample(rng),
                GeneratorParams::Bnbp { r, p } => NegBinomial::from_odds(r[j], fold * p[k] / (1.0 - p[k]))?.sample(rng),
                GeneratorParams::Bayseq { mu, phi } => {
                    let m = mu[k] * fold;
                    if phi[k] > 0.0 {
                        NegBinomial::from_odds(1.0 / phi[k], m * phi[k])?.sample(rng)
                    } else {
                        poisson(m, rng)
                    }
                }
            })
        })
        .collect()
}

/// Fold applied to each group for one gene. The BNBP down case follows the
/// literal convention: group A receives the reduced odds.
fn group_folds(setup: Setup, direction: Direction, b: f64) -> (f64, f64) {
    match (direction, setup) {
        (Direction::None, _) => (1.0, 1.0),
        (Direction::Up, _) => (1.0, b),
        (Direction::Down, Setup::Bnbp) => (1.0 / b, 1.0),
        (Direction::Down, _) => (1.0, 1.0 / b),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub data: GroupedDataset,
    pub truth: SynthTruth,
}

const PARAMS: u64 = 1;
const NULL_COUNTS: u64 = 2;
const DE_PICK: u64 = 3;
const DE_COUNTS: u64 = 4;

fn assemble(ids: &[String], sample_ids: Vec<String>, columns: &[Vec<u64>]) -> Result<CountMatrix> {
    let j = sample_ids.len();
    let mut counts = vec![0; j * columns.len()];
    for (k, col) in columns.iter().enumerate() {
        for (s, &n) in col.iter().enumerate() {
            counts[s * columns.len() + k] = n;
        }
    }
    CountMatrix::new(sample_ids, ids.to_vec(), counts)
}

/// Generates a two-group data set and its truth labels. Fit-from-data
/// sources are loaded and fitted with the default prior and MCMC settings.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthOutput> {
    let fitted = match &spec.parameter_source {
        ParameterSource::Defaults => None,
        ParameterSource::FitFromData(path) => Some(fit_generator_params(&load_counts(path)?, spec.setup, &Hyper::default(), &McmcConfig::default())?),
    };
    synth_generate_with(spec, fitted.as_ref())
}

pub fn synth_generate_with(spec: &SynthSpec, fitted: Option<&GeneratorParams>) -> Result<SynthOutput> {
    spec.validate()?;
    let root = RngHandle::new(spec.seed, 0x73796e);
    let reps = spec.replicates;
    let params = draw_params(spec, fitted, 2 * reps, &mut root.derive(&[PARAMS]))?;

    // provisional null counts decide which genes survive QC
    let null: Vec<Vec<u64>> = (0..spec.n_genes)
        .map(|k| gene_counts(&params, k, 0..2 * reps, 1.0, &mut root.derive(&[NULL_COUNTS, k as u64])))
        .collect::<Result<_>>()?;
    let totals: Vec<u64> = null.iter().map(|c| c.iter().sum()).collect();
    let keep = low_expression_survivors(&totals, spec.qc_drop_fraction);
    let n_after = keep.len();

    let mut pick = root.derive(&[DE_PICK]);
    let n_de = ((spec.de_fraction * n_after as f64).round() as usize).min(n_after);
    let n_up = (spec.up_fraction * n_de as f64).round() as usize;
    let chosen = sample_indices(&mut pick, n_after, n_de).into_vec();
    let mut direction = vec![Direction::None; n_after];
    let mut fold = vec![1.0; n_after];
    for (i, &pos) in chosen.iter().enumerate() {
        direction[pos] = if i < n_up { Direction::Up } else { Direction::Down };
        fold[pos] = match spec.fold_change {
            FoldChange::Fixed(b) => b,
            FoldChange::Uniform { lo, hi } => lo + (hi - lo) * pick.random::<f64>(),
        };
    }

    let mut cols_a = Vec::with_capacity(n_after);
    let mut cols_b = Vec::with_capacity(n_after);
    let mut gene_ids = Vec::with_capacity(n_after);
    for (pos, &k) in keep.iter().enumerate() {
        let (fa, fb) = group_folds(spec.setup, direction[pos], fold[pos]);
        let mut g = root.derive(&[DE_COUNTS, k as u64]);
        let a = if fa == 1.0 { null[k][..reps].to_vec() } else { gene_counts(&params, k, 0..reps, fa, &mut g)? };
        let b = if fb == 1.0 { null[k][reps..].to_vec() } else { gene_counts(&params, k, reps..2 * reps, fb, &mut g)? };
        cols_a.push(a);
        cols_b.push(b);
        gene_ids.push(format!("g{}", k + 1));
    }
    let ids_a = (1..=reps).map(|j| format!("a{j}")).collect();
    let ids_b = (1..=reps).map(|j| format!("b{j}")).collect();
    let data = GroupedDataset::new(assemble(&gene_ids, ids_a, &cols_a)?, assemble(&gene_ids, ids_b, &cols_b)?)?;
    Ok(SynthOutput {
        data,
        truth: SynthTruth { gene_ids, direction, realized_fold: fold },
    })
}
