//! Compare models over repeated synthetic trials, in parallel.
use nbdiff::model::{Hyper, McmcConfig, ModelKind};
use nbdiff::pipeline::{run_pipeline, DataSource, PipelineConfig, Scenario};
use nbdiff::ranking::HistogramConfig;
use nbdiff::synth::{FoldChange, SynthSpec};

fn main() -> nbdiff::Result<()> {
    let base = SynthSpec { n_genes: 500, replicates: 5, ..SynthSpec::default() };
    let scenarios = [2.0, 3.0]
        .iter()
        .map(|&b| Scenario {
            name: format!("fold{b}"),
            source: DataSource::Synthetic(SynthSpec { fold_change: FoldChange::Fixed(b), ..base.clone() }),
        })
        .collect();
    let cfg = PipelineConfig {
        models: vec![ModelKind::Gnbp, ModelKind::NbpScaled],
        trials: 3,
        tau: 0.1,
        seed: 12,
        mcmc: McmcConfig { burn_in: 300, retained: 300, ..McmcConfig::default() },
        hyper: Hyper::default(),
        histogram: HistogramConfig::default(),
        scenarios,
    };
    let report = run_pipeline(&cfg)?;
    print!("{}", report.summary_csv());
    for t in report.trials.iter().filter(|t| t.error.is_some()) {
        eprintln!("{} trial {} {}: {}", t.scenario, t.trial, t.model, t.error.as_deref().unwrap());
    }
    Ok(())
}
