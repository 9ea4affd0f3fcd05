//! Draw synthetic data sets under each generator setup.
use nbdiff::synth::{synth_generate, FoldChange, Setup, SynthSpec};

fn main() -> nbdiff::Result<()> {
    for setup in [Setup::Gnbp, Setup::Bnbp, Setup::Bayseq] {
        let spec = SynthSpec {
            setup,
            n_genes: 2_000,
            replicates: 4,
            fold_change: FoldChange::Uniform { lo: 1.5, hi: 3.0 },
            up_fraction: 0.7,
            seed: 9,
            ..SynthSpec::default()
        };
        let out = synth_generate(&spec)?;
        let a: u64 = out.data.group_a().counts().iter().sum();
        let b: u64 = out.data.group_b().counts().iter().sum();
        println!("{:>6}: {} genes after QC, {} DE, reads A {a}, B {b}", setup, out.data.n_genes(), out.truth.n_de());
    }
    let out = synth_generate(&SynthSpec { n_genes: 30, replicates: 2, seed: 1, ..SynthSpec::default() })?;
    print!("{}", out.truth.to_csv().lines().take(6).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
