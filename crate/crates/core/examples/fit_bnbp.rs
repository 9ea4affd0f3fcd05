//! Fit the beta-NB process and watch the Metropolis-Hastings move on c.
use nbdiff::model::{fit, Hyper, McmcConfig, ModelKind};
use nbdiff::synth::{synth_generate, Setup, SynthSpec};

fn main() -> nbdiff::Result<()> {
    let spec = SynthSpec { setup: Setup::Bnbp, n_genes: 500, replicates: 5, seed: 3, ..SynthSpec::default() };
    let counts = synth_generate(&spec)?.data.group_b().clone();

    let mcmc = McmcConfig { burn_in: 500, retained: 500, ..McmcConfig::default() };
    let res = fit(ModelKind::Bnbp, &counts, &Hyper::default(), &mcmc, 1)?;
    let c = res.trace.global("c").unwrap();
    println!("c: posterior mean {:.3}, acceptance {:.2}", c.iter().sum::<f64>() / c.len() as f64, res.diagnostics.acceptance_rate().unwrap());

    let frozen = fit(ModelKind::Bnbp, &counts, &Hyper::default(), &McmcConfig { freeze_c: true, ..mcmc }, 1)?;
    println!("with c frozen at its start value: {:?}", frozen.trace.global("c").unwrap()[0]);

    let odds = res.trace.gene_means();
    println!("gene {} posterior odds {:.4}", res.trace.gene_ids[0], odds[0]);
    Ok(())
}
