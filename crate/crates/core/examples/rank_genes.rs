//! Rank genes by the symmetric KL divergence between their posterior histograms.
use nbdiff::model::{fit, Hyper, McmcConfig, ModelKind};
use nbdiff::ranking::{gene_kl, rank_genes, symmetric_kl, HistogramConfig};
use nbdiff::synth::{synth_generate, Direction, SynthSpec};

fn main() -> nbdiff::Result<()> {
    println!("KL([0.5, 0.5], [0.9, 0.1]) = {:.4}", symmetric_kl(&[0.5, 0.5], &[0.9, 0.1], 1e-10)?);
    let hist = HistogramConfig::default();
    println!("shifted samples: {:.4}", gene_kl(&[1.0, 1.1, 1.2, 1.3], &[2.0, 2.1, 2.2, 2.3], &hist)?);

    let spec = SynthSpec { n_genes: 400, replicates: 5, seed: 4, ..SynthSpec::default() };
    let out = synth_generate(&spec)?;
    let mcmc = McmcConfig { burn_in: 400, retained: 400, ..McmcConfig::default() };
    let a = fit(ModelKind::Gnbp, out.data.group_a(), &Hyper::default(), &mcmc, 0)?;
    let b = fit(ModelKind::Gnbp, out.data.group_b(), &Hyper::default(), &mcmc, 1)?;
    let ranking = rank_genes(&a.trace, &b.trace, &hist)?;

    let de: std::collections::HashMap<_, _> = out.truth.gene_ids.iter().enumerate().map(|(k, id)| (id.as_str(), out.truth.direction[k])).collect();
    println!("top of the ranking:");
    for g in ranking.genes.iter().take(10) {
        println!("  {:>6}  kl {:8.4}  truth {}", g.gene_id, g.kl, de[g.gene_id.as_str()].as_str());
    }
    let top = ranking.len() / 10;
    let hits = ranking.genes[..top].iter().filter(|g| de[g.gene_id.as_str()] != Direction::None).count();
    println!("{hits} of the top {top} genes are DE ({} DE overall)", out.truth.n_de());
    Ok(())
}
