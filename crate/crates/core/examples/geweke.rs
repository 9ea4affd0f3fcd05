//! Get-it-right checks: the Gibbs kernels against forward draws from the prior.
//! Pass a round count to trade time for precision, e.g. `-- 2000`.
use nbdiff::geweke::{geweke_bnbp, geweke_gnbp, geweke_nbp, GewekeConfig};

fn main() -> nbdiff::Result<()> {
    let rounds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2_000);
    let cfg = GewekeConfig { rounds, ..GewekeConfig::default() };
    for report in [geweke_nbp(&cfg)?, geweke_gnbp(&cfg)?, geweke_bnbp(&cfg)?] {
        println!("{} (max |z| = {:.2})", report.model, report.max_abs_z());
        for row in &report.rows {
            println!("  {:>12}  prior {:9.4}  chain {:9.4}  z {:6.2}", row.name, row.prior_mean, row.chain_mean, row.z);
        }
    }
    Ok(())
}
