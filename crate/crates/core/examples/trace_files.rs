//! Write a fitted trace as CSV and as binary, then rank from the files.
use nbdiff::model::{fit, Hyper, McmcConfig, ModelKind};
use nbdiff::ranking::{rank_genes, HistogramConfig};
use nbdiff::synth::{synth_generate, SynthSpec};
use nbdiff::trace_io::{read_trace, write_trace};

fn main() -> nbdiff::Result<()> {
    let out = synth_generate(&SynthSpec { n_genes: 200, replicates: 3, seed: 8, ..SynthSpec::default() })?;
    let mcmc = McmcConfig { burn_in: 200, retained: 200, ..McmcConfig::default() };
    let a = fit(ModelKind::NbpScaled, out.data.group_a(), &Hyper::default(), &mcmc, 0)?;
    let b = fit(ModelKind::NbpScaled, out.data.group_b(), &Hyper::default(), &mcmc, 1)?;

    let dir = std::env::temp_dir().join("nbdiff-trace-example");
    std::fs::create_dir_all(&dir).map_err(|e| nbdiff::Error::Io { path: dir.clone(), source: e })?;
    let (pa, pb) = (dir.join("a.trace.csv"), dir.join("b.trace.bin"));
    write_trace(&pa, &a.trace, &["# group A".to_string()])?;
    write_trace(&pb, &b.trace, &[])?;
    for p in [&pa, &pb] {
        println!("{}: {} bytes", p.display(), std::fs::metadata(p).map(|m| m.len()).unwrap_or(0));
    }

    let (ra, rb) = (read_trace(&pa)?, read_trace(&pb)?);
    assert_eq!((rb.n_draws(), rb.n_genes()), (b.trace.n_draws(), b.trace.n_genes()));
    let ranking = rank_genes(&ra, &rb, &HistogramConfig::default())?;
    println!("top gene {} (kl {:.3}), {} alignment notes", ranking.genes[0].gene_id, ranking.genes[0].kl, ranking.warnings.len());
    Ok(())
}
