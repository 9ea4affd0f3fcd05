//! Repeated fit → rank → evaluate runs over several models and scenarios.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{filter_low_expression, load_counts, GroupedDataset};
use crate::error::{Error, Result};
use crate::eval::{intensities_from_csv, label_from_intensity, roc_pr_report, EvalReport, TruthLabels};
use crate::kernels::stream_key;
use crate::model::{fit, Hyper, McmcConfig, ModelKind};
use crate::ranking::{rank_genes, HistogramConfig};
use crate::synth::{fit_generator_params, synth_generate_with, GeneratorParams, ParameterSource, SynthSpec};

/// How ground truth is obtained for observed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    /// CSV with `gene_id` and `de` columns.
    Labels(PathBuf),
    /// CSV `gene_id,intensity_a,intensity_b`, thresholded on `|log2(a/b)|`.
    Intensity { path: PathBuf, log2_cutoff: f64 },
}

impl TruthSource {
    pub fn load(&self) -> Result<TruthLabels> {
        let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        match self {
            TruthSource::Labels(path) => TruthLabels::from_csv(&read(path)?),
            TruthSource::Intensity { path, log2_cutoff } => {
                let (ids, a, b) = intensities_from_csv(&read(path)?)?;
                label_from_intensity(&ids, &a, &b, *log2_cutoff)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SynthSpec),
    Observed {
        group_a: PathBuf,
        group_b: PathBuf,
        truth: TruthSource,
        #[serde(default)]
        qc_drop_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub source: DataSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub models: Vec<ModelKind>,
    pub trials: usize,
    /// Upper limit of the partial ROC and PR areas.
    pub tau: f64,
    /// Root of every per-trial data and chain seed.
    pub seed: u64,
    pub mcmc: McmcConfig,
    pub hyper: Hyper,
    pub histogram: HistogramConfig,
    pub scenarios: Vec<Scenario>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("pipeline needs at least one model".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("pipeline needs at least one scenario".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        self.mcmc.validate()?;
        self.hyper.validate()?;
        self.histogram.validate()?;
        for s in &self.scenarios {
            if let DataSource::Synthetic(spec) = &s.source {
                spec.validate()?;
            }
        }
        Ok(())
    }

    /// Seed of the synthetic data for `trial`; shared by every model and
    /// scenario so comparisons are paired.
    pub fn data_seed(&self, trial: usize) -> u64 {
        stream_key(self.seed, &[trial as u64, 0])
    }

    pub fn chain_seed(&self, trial: usize) -> u64 {
        stream_key(self.seed, &[trial as u64, 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub scenario: String,
    pub trial: usize,
    pub model: ModelKind,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; `None` with fewer than two values.
    pub sd: Option<f64>,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(Self { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub scenario: String,
    pub model: ModelKind,
    pub n_ok: usize,
    pub n_failed: usize,
    pub auc_roc: Option<MeanSd>,
    pub auc_pr: Option<MeanSd>,
    pub partial_auc_roc: Option<MeanSd>,
    pub partial_auc_pr: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub summaries: Vec<ModelSummary>,
    pub trials: Vec<TrialOutcome>,
}

impl PipelineReport {
    pub fn summary(&self, scenario: &str, model: ModelKind) -> Option<&ModelSummary> {
        self.summaries.iter().find(|s| s.scenario == scenario && s.model == model)
    }

    /// Per-trial AUC-ROC values of one model in one scenario, skipping failures.
    pub fn aucs(&self, scenario: &str, model: ModelKind) -> Vec<f64> {
        self.trials
            .iter()
            .filter(|t| t.scenario == scenario && t.model == model)
            .filter_map(|t| t.report.as_ref().map(|r| r.auc_roc))
            .collect()
    }

    /// `scenario,model,n_ok,n_failed,<metric>_mean,<metric>_sd,...`.
    pub fn summary_csv(&self) -> String {
        let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from("scenario,model,n_ok,n_failed,auc_roc_mean,auc_roc_sd,auc_pr_mean,auc_pr_sd,partial_auc_roc_mean,partial_auc_roc_sd,partial_auc_pr_mean,partial_auc_pr_sd\n");
        for s in &self.summaries {
            out.push_str(&format!("{},{},{},{}", s.scenario, s.model, s.n_ok, s.n_failed));
            for m in [s.auc_roc, s.auc_pr, s.partial_auc_roc, s.partial_auc_pr] {
                out.push_str(&format!(",{},{}", fmt(m.map(|m| m.mean)), fmt(m.and_then(|m| m.sd))));
            }
            out.push('\n');
        }
        out
    }

    /// `scenario,trial,model,auc_roc,auc_pr,partial_auc_roc,partial_auc_pr,error`.
    pub fn trials_csv(&self) -> String {
        let mut out = String::from("scenario,trial,model,auc_roc,auc_pr,partial_auc_roc,partial_auc_pr,error\n");
        for t in &self.trials {
            match (&t.report, &t.error) {
                (Some(r), _) => out.push_str(&format!("{},{},{},{},{},{},{},\n", t.scenario, t.trial, t.model, r.auc_roc, r.auc_pr, r.partial_auc_roc, r.partial_auc_pr)),
                (None, e) => out.push_str(&format!("{},{},{},,,,,{}\n", t.scenario, t.trial, t.model, e.as_deref().unwrap_or("").replace([',', '\n'], ";"))),
            }
        }
        out
    }
}

/// Scenario inputs that are loaded or fitted once and reused by every trial.
enum Prepared {
    Synthetic { spec: SynthSpec, fitted: Option<GeneratorParams> },
    Observed { data: GroupedDataset, truth: TruthLabels },
}

fn prepare(source: &DataSource, cfg: &PipelineConfig) -> Result<Prepared> {
    match source {
        DataSource::Synthetic(spec) => {
            let fitted = match &spec.parameter_source {
                ParameterSource::Defaults => None,
                ParameterSource::FitFromData(path) => Some(fit_generator_params(&load_counts(path)?, spec.setup, &cfg.hyper, &McmcConfig { seed: cfg.seed, ..cfg.mcmc })?),
            };
            Ok(Prepared::Synthetic { spec: spec.clone(), fitted })
        }
        DataSource::Observed { group_a, group_b, truth, qc_drop_fraction } => {
            let data = GroupedDataset::new(load_counts(group_a)?, load_counts(group_b)?)?;
            let data = if *qc_drop_fraction > 0.0 { filter_low_expression(&data, *qc_drop_fraction) } else { data };
            Ok(Prepared::Observed { data, truth: truth.load()? })
        }
    }
}

fn run_one(prepared: &Prepared, cfg: &PipelineConfig, trial: usize, model: ModelKind) -> Result<EvalReport> {
    let generated;
    let (data, truth) = match prepared {
        Prepared::Synthetic { spec, fitted } => {
            let spec = SynthSpec { seed: cfg.data_seed(trial), ..spec.clone() };
            let out = synth_generate_with(&spec, fitted.as_ref())?;
            generated = (out.data, out.truth.labels());
            (&generated.0, &generated.1)
        }
        Prepared::Observed { data, truth } => (data, truth),
    };
    let mcmc = McmcConfig { seed: cfg.chain_seed(trial), ..cfg.mcmc };
    let a = fit(model, data.group_a(), &cfg.hyper, &mcmc, 0)?;
    let b = fit(model, data.group_b(), &cfg.hyper, &mcmc, 1)?;
    let ranking = rank_genes(&a.trace, &b.trace, &cfg.histogram)?;
    roc_pr_report(&ranking, truth, cfg.tau)
}

fn summarize(scenario: &str, model: ModelKind, outcomes: &[TrialOutcome]) -> ModelSummary {
    let reports: Vec<&EvalReport> = outcomes.iter().filter(|t| t.scenario == scenario && t.model == model).filter_map(|t| t.report.as_ref()).collect();
    let n_all = outcomes.iter().filter(|t| t.scenario == scenario && t.model == model).count();
    let metric = |f: fn(&EvalReport) -> f64| MeanSd::of(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
    ModelSummary {
        scenario: scenario.to_string(),
        model,
        n_ok: reports.len(),
        n_failed: n_all - reports.len(),
        auc_roc: metric(|r| r.auc_roc),
        auc_pr: metric(|r| r.auc_pr),
        partial_auc_roc: metric(|r| r.partial_auc_roc),
        partial_auc_pr: metric(|r| r.partial_auc_pr),
    }
}

/// Runs every (scenario, trial, model) combination on the rayon pool. A
/// failing combination is recorded in the report and the rest continue;
/// only an invalid configuration or an unreadable scenario input aborts.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let prepared = cfg.scenarios.iter().map(|s| prepare(&s.source, cfg)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize, ModelKind)> = (0..cfg.scenarios.len())
        .flat_map(|s| (0..cfg.trials).flat_map(move |t| cfg.models.iter().map(move |&m| (s, t, m))))
        .collect();
    let trials: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(s, trial, model)| {
            let result = run_one(&prepared[s], cfg, trial, model);
            TrialOutcome {
                scenario: cfg.scenarios[s].name.clone(),
                trial,
                model,
                error: result.as_ref().err().map(ToString::to_string),
                report: result.ok(),
            }
        })
        .collect();
    let summaries = cfg
        .scenarios
        .iter()
        .flat_map(|s| cfg.models.iter().map(move |&m| (s, m)))
        .map(|(s, m)| summarize(&s.name, m, &trials))
        .collect();
    Ok(PipelineReport { summaries, trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(models: Vec<ModelKind>, trials: usize) -> PipelineConfig {
        let spec = SynthSpec { n_genes: 120, replicates: 3, seed: 0, ..SynthSpec::default() };
        PipelineConfig {
            models,
            trials,
            tau: 0.1,
            seed: 4,
            mcmc: McmcConfig { burn_in: 20, retained: 30, ..McmcConfig::default() },
            hyper: Hyper::default(),
            histogram: HistogramConfig::default(),
            scenarios: vec![Scenario { name: "base".into(), source: DataSource::Synthetic(spec) }],
        }
    }

    #[test]
    fn mean_and_sample_sd() {
        let m = MeanSd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.sd.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanSd::of(&[0.7]).unwrap().sd, None);
        assert!(MeanSd::of(&[]).is_none());
    }

    #[test]
    fn single_trial_embeds_one_report() {
        let report = run_pipeline(&small(vec![ModelKind::Gnbp], 1)).unwrap();
        assert_eq!(report.trials.len(), 1);
        let t = &report.trials[0];
        assert!(t.error.is_none());
        let s = report.summary("base", ModelKind::Gnbp).unwrap();
        assert_eq!(s.auc_roc.unwrap().mean, t.report.as_ref().unwrap().auc_roc);
        assert_eq!(s.auc_roc.unwrap().sd, None);
    }

    #[test]
    fn models_share_trial_data_and_runs_repeat() {
        let cfg = small(vec![ModelKind::NbpScaled, ModelKind::Nbp], 3);
        let a = run_pipeline(&cfg).unwrap();
        assert_eq!(a, run_pipeline(&cfg).unwrap());
        assert_eq!(a.trials.len(), 6);
        for pair in a.trials.chunks(2) {
            let (x, y) = (pair[0].report.as_ref().unwrap(), pair[1].report.as_ref().unwrap());
            assert_eq!((x.n_positive, x.n_negative), (y.n_positive, y.n_negative));
        }
        assert_eq!(a.summary("base", ModelKind::Nbp).unwrap().n_ok, 3);
        assert!(a.summary_csv().lines().count() == 3);
    }

    #[test]
    fn failures_are_recorded_per_trial() {
        // no DE genes, so every evaluation lacks positives
        let mut cfg = small(vec![ModelKind::Gnbp], 2);
        cfg.scenarios[0].source = DataSource::Synthetic(SynthSpec { n_genes: 10, de_fraction: 0.0, replicates: 1, ..SynthSpec::default() });
        let report = run_pipeline(&cfg).unwrap();
        assert!(report.trials.iter().all(|t| t.error.is_some() && t.report.is_none()));
        let s = report.summary("base", ModelKind::Gnbp).unwrap();
        assert_eq!((s.n_ok, s.n_failed), (0, 2));
        assert!(s.auc_roc.is_none());
        assert!(report.trials_csv().contains("base,0,gnbp,,,,,"));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = small(vec![], 1);
        assert!(matches!(run_pipeline(&cfg), Err(Error::Config(_))));
        cfg.models = vec![ModelKind::Gnbp];
        cfg.tau = 0.0;
        assert!(run_pipeline(&cfg).is_err());
    }
}
