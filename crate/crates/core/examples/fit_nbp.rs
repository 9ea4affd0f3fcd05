//! Fit the NB process, with and without per-sample scale factors.
use nbdiff::model::{fit, Hyper, McmcConfig, ModelKind};
use nbdiff::synth::{synth_generate, Setup, SynthSpec};

fn main() -> nbdiff::Result<()> {
    let spec = SynthSpec { setup: Setup::Gnbp, n_genes: 300, replicates: 4, seed: 1, ..SynthSpec::default() };
    let counts = synth_generate(&spec)?.data.group_a().clone();
    let mcmc = McmcConfig { burn_in: 300, retained: 300, ..McmcConfig::default() };

    for model in [ModelKind::Nbp, ModelKind::NbpScaled] {
        let res = fit(model, &counts, &Hyper::default(), &mcmc, 0)?;
        let means = res.trace.gene_means();
        println!("{model}: {} draws of {} ({} genes)", res.trace.n_draws(), res.trace.statistic, means.len());
        for name in &res.trace.global_names {
            let g = res.trace.global(name).unwrap();
            println!("  {name:>10} posterior mean {:.4}", g.iter().sum::<f64>() / g.len() as f64);
        }
        println!("  first genes: {:.4?}", &means[..5]);
    }
    Ok(())
}
