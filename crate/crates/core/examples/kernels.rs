//! The sampling primitives behind the Gibbs updates.
use nbdiff::kernels::{crt_mean, crt_pmf_oracle, sample_crt, sample_logbeta, LogBetaParams, Logarithmic, NegBinomial, RngHandle};
use rand::distr::Distribution;

fn main() -> nbdiff::Result<()> {
    let mut rng = RngHandle::new(7, 0);

    // tables occupied by 50 customers under concentration 2
    let draws: Vec<u64> = (0..20_000).map(|_| sample_crt(50, 2.0, &mut rng)).collect();
    let mean = draws.iter().sum::<u64>() as f64 / draws.len() as f64;
    println!("CRT(50, 2): mean {mean:.3}, exact {:.3}", crt_mean(50, 2.0));
    let pmf = crt_pmf_oracle(5, 1.0)?;
    println!("CRT(5, 1) pmf: {pmf:.4?}");

    let lb = LogBetaParams::new(3.0, 1.5)?;
    let mean = (0..20_000).map(|_| sample_logbeta(&lb, &mut rng)).sum::<f64>() / 20_000.0;
    println!("logBeta(3, 1.5): sample mean {mean:.4}");

    let nb = NegBinomial::new(4.0, 0.3)?;
    let xs: Vec<u64> = nb.sample_iter(&mut rng).take(20_000).collect();
    let m = xs.iter().sum::<u64>() as f64 / xs.len() as f64;
    println!("NB(4, 0.3): mean {m:.3}, exact {:.3}, variance {:.3}", nb.mean(), nb.variance());

    let log = Logarithmic::new(0.6)?;
    println!("Log(0.6): P(1) = {:.4}, mean {:.4}", log.pmf(1), log.mean());

    // child streams are independent of the order they are requested in
    let gene = RngHandle::new(7, 0).derive(&[3, 42]);
    println!("stream {} of seed {}", gene.stream_id(), gene.seed());
    Ok(())
}
