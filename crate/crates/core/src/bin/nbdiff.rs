use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nbdiff::cli::{cmd_evaluate, cmd_fit, cmd_pipeline, cmd_rank, cmd_simulate, resolve_out_dir, EvaluateCommand, FitCommand, RankCommand, RunConfig};
use nbdiff::model::{McmcConfig, ModelKind};
use nbdiff::pipeline::TruthSource;
use nbdiff::synth::{FoldChange, Setup};
use nbdiff::trace_io::TraceFormat;
use nbdiff::{Error, Result};

#[derive(Parser)]
#[command(name = "nbdiff", version, about = "Negative-binomial-process differential expression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $NBDIFF_OUT_DIR, else ./nbdiff-out)
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct McmcFlags {
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    retained: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hold the BNBP concentration c fixed
    #[arg(long)]
    freeze_c: bool,
}

impl McmcFlags {
    fn apply(&self, m: &mut McmcConfig) {
        if let Some(v) = self.burn_in {
            m.burn_in = v;
        }
        if let Some(v) = self.retained {
            m.retained = v;
        }
        if let Some(v) = self.thin {
            m.thin = v;
        }
        if let Some(v) = self.seed {
            m.seed = v;
        }
        m.freeze_c |= self.freeze_c;
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit one group's count matrix and write its trace and diagnostics
    Fit {
        /// Count matrix: header of gene ids, one row per sample
        counts: PathBuf,
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long, value_parser = ["csv", "binary"], default_value = "csv")]
        format: String,
        /// Output file stem (default: counts file stem)
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        mcmc: McmcFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Rank genes by symmetric KL divergence between two traces
    Rank {
        trace_a: PathBuf,
        trace_b: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        whisker: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate synthetic two-group data with known DE genes
    Simulate {
        #[arg(long)]
        setup: Option<Setup>,
        #[arg(long)]
        genes: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        fold: Option<f64>,
        #[arg(long)]
        de_fraction: Option<f64>,
        #[arg(long)]
        up_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a ranking against truth labels or intensity ratios
    Evaluate {
        ranking: PathBuf,
        #[arg(long, conflicts_with = "intensity")]
        truth: Option<PathBuf>,
        #[arg(long, requires = "cutoff")]
        intensity: Option<PathBuf>,
        /// Threshold on |log2(intensity_a / intensity_b)|
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Repeated simulate/fit/rank/evaluate over models and scenarios
    Pipeline {
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ModelKind>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        retained: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    common.config.as_deref().map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit { counts, model, format, name, mcmc, common } => {
            let cfg = load(&common)?;
            let mut m = cfg.mcmc;
            mcmc.apply(&mut m);
            let model = model.or(cfg.model).ok_or_else(|| Error::Config("no model given (--model or `model` in the config)".into()))?;
            let format = if format == "binary" { TraceFormat::Binary } else { TraceFormat::Csv };
            let out = cmd_fit(&FitCommand { model, counts, mcmc: m, hyper: cfg.hyper, format, name }, &resolve_out_dir(common.out_dir))?;
            println!("trace {}\ndiagnostics {}", out.trace.display(), out.diagnostics.display());
            if let Some(rate) = out.acceptance_rate {
                println!("c acceptance rate {rate:.3}");
            }
        }
        Command::Rank { trace_a, trace_b, bins, epsilon, whisker, common } => {
            let mut histogram = load(&common)?.histogram;
            histogram.n_bins = bins.unwrap_or(histogram.n_bins);
            histogram.epsilon = epsilon.unwrap_or(histogram.epsilon);
            histogram.whisker = whisker.unwrap_or(histogram.whisker);
            let out = cmd_rank(&RankCommand { trace_a, trace_b, histogram }, &resolve_out_dir(common.out_dir))?;
            println!("ranking {}", out.ranking.display());
            if out.n_warnings > 0 {
                println!("{} alignment warnings in {}", out.n_warnings, out.warnings.display());
            }
        }
        Command::Simulate { setup, genes, replicates, fold, de_fraction, up_fraction, seed, common } => {
            let mut spec = load(&common)?.synth_spec()?;
            spec.setup = setup.unwrap_or(spec.setup);
            spec.n_genes = genes.unwrap_or(spec.n_genes);
            spec.replicates = replicates.unwrap_or(spec.replicates);
            spec.fold_change = fold.map_or(spec.fold_change, FoldChange::Fixed);
            spec.de_fraction = de_fraction.unwrap_or(spec.de_fraction);
            spec.up_fraction = up_fraction.unwrap_or(spec.up_fraction);
            spec.seed = seed.unwrap_or(spec.seed);
            let out = cmd_simulate(&spec, &resolve_out_dir(common.out_dir))?;
            println!("{} genes, {} DE; truth {}", out.n_genes, out.n_de, out.truth.display());
        }
        Command::Evaluate { ranking, truth, intensity, cutoff, tau, common } => {
            let cfg = load(&common)?;
            let truth = match (truth, intensity, cutoff) {
                (Some(p), _, _) => TruthSource::Labels(p),
                (None, Some(path), Some(log2_cutoff)) => TruthSource::Intensity { path, log2_cutoff },
                _ => cfg.data.clone().unwrap_or_default().truth_source()?,
            };
            let tau = tau.or(cfg.tau).unwrap_or(0.1);
            let out = cmd_evaluate(&EvaluateCommand { ranking, truth, tau }, &resolve_out_dir(common.out_dir))?;
            println!("auc_roc {:.4} auc_pr {:.4}; report {}", out.auc_roc, out.auc_pr, out.report.display());
        }
        Command::Pipeline { models, trials, seed, burn_in, retained, common } => {
            let mut cfg = load(&common)?;
            cfg.models = models.or(cfg.models);
            cfg.trials = trials.or(cfg.trials);
            cfg.seed = seed.or(cfg.seed);
            cfg.mcmc.burn_in = burn_in.unwrap_or(cfg.mcmc.burn_in);
            cfg.mcmc.retained = retained.unwrap_or(cfg.mcmc.retained);
            let out = cmd_pipeline(&cfg.pipeline_config()?, &resolve_out_dir(common.out_dir))?;
            for s in &out.report.summaries {
                let auc = s.auc_roc.map_or("n/a".to_string(), |m| format!("{:.4} ± {:.4}", m.mean, m.sd.unwrap_or(0.0)));
                println!("{:<12} {:<11} auc_roc {auc} ({} ok, {} failed)", s.scenario, s.model.name(), s.n_ok, s.n_failed);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
