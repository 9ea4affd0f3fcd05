//! Random-variate kernels and special functions shared by the samplers.
//!
//! Every sampler takes an explicit [`RngHandle`]; nothing here owns global
//! random state.

mod crt;
mod logbeta;
mod rng;
mod special;
mod variates;

pub use crt::{crt_mean, crt_pmf_oracle, sample_crt, ORACLE_MAX_M};
pub use logbeta::{sample_logbeta, LogBetaParams, TRUNCATION};
pub use rng::{stream_key, RngHandle};
pub use special::{digamma, ln_beta, ln_gamma, trigamma};
pub use variates::{
    beta, beta_pair, binomial, gamma, multinomial, poisson, sample_logarithmic, sample_nb,
    Logarithmic, NegBinomial,
};
