//! Fit the gamma-NB process to one group and report the per-gene shapes.
use nbdiff::model::{fit, Hyper, McmcConfig, ModelKind};
use nbdiff::synth::{synth_generate, Setup, SynthSpec};

fn main() -> nbdiff::Result<()> {
    let spec = SynthSpec { setup: Setup::Gnbp, n_genes: 500, replicates: 5, seed: 2, ..SynthSpec::default() };
    let out = synth_generate(&spec)?;
    let counts = out.data.group_a();
    let mcmc = McmcConfig { burn_in: 500, retained: 500, ..McmcConfig::default() };
    let res = fit(ModelKind::Gnbp, counts, &Hyper::default(), &mcmc, 0)?;

    let means = res.trace.gene_means();
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&x, &y| means[y].total_cmp(&means[x]));
    println!("largest posterior shapes:");
    for &k in order.iter().take(8) {
        let total: u64 = counts.column(k).iter().sum();
        println!("  {:>6}  r = {:8.3}  total reads {total}", res.trace.gene_ids[k], means[k]);
    }
    for name in ["gamma0", "p_mean"] {
        let g = res.trace.global(name).unwrap();
        println!("{name} posterior mean {:.4}", g.iter().sum::<f64>() / g.len() as f64);
    }
    Ok(())
}
