use std::path::{Path, PathBuf};
use std::process::Command;

use nbdiff::cli::{cmd_evaluate, cmd_fit, cmd_pipeline, cmd_rank, cmd_simulate, EvaluateCommand, FitCommand, RankCommand, OUT_DIR_ENV};
use nbdiff::model::{Hyper, McmcConfig, ModelKind};
use nbdiff::pipeline::{DataSource, PipelineConfig, Scenario, TruthSource};
use nbdiff::ranking::{GeneRanking, HistogramConfig};
use nbdiff::synth::SynthSpec;
use nbdiff::trace_io::{diagnostics_from_csv, read_trace, TraceFormat};
use tempfile::TempDir;

fn simulated(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let spec = SynthSpec { n_genes: 150, replicates: 3, seed: 5, ..SynthSpec::default() };
    let out = cmd_simulate(&spec, &dir.join("sim")).unwrap();
    (out.group_a, out.group_b, out.truth)
}

fn fit_cmd(model: ModelKind, counts: &Path, mcmc: McmcConfig) -> FitCommand {
    FitCommand { model, counts: counts.to_path_buf(), mcmc, hyper: Hyper::default(), format: TraceFormat::Csv, name: None }
}

fn short() -> McmcConfig {
    McmcConfig { burn_in: 20, retained: 40, seed: 3, ..McmcConfig::default() }
}

#[test]
fn fit_is_byte_identical_for_a_fixed_seed() {
    let tmp = TempDir::new().unwrap();
    let (a, _, _) = simulated(tmp.path());
    let cmd = fit_cmd(ModelKind::Gnbp, &a, short());
    let x = cmd_fit(&cmd, &tmp.path().join("x")).unwrap();
    let y = cmd_fit(&cmd, &tmp.path().join("y")).unwrap();
    assert_eq!(std::fs::read(&x.trace).unwrap(), std::fs::read(&y.trace).unwrap());
    assert_eq!(std::fs::read(&x.diagnostics).unwrap(), std::fs::read(&y.diagnostics).unwrap());
    let z = cmd_fit(&FitCommand { mcmc: McmcConfig { seed: 4, ..short() }, ..cmd }, &tmp.path().join("z")).unwrap();
    assert_ne!(std::fs::read(&x.trace).unwrap(), std::fs::read(&z.trace).unwrap());
}

#[test]
fn trace_has_one_row_per_retained_draw() {
    let tmp = TempDir::new().unwrap();
    let (a, _, _) = simulated(tmp.path());
    let mcmc = McmcConfig { burn_in: 5, retained: 1000, thin: 1, ..McmcConfig::default() };
    let out = cmd_fit(&fit_cmd(ModelKind::NbpScaled, &a, mcmc), tmp.path()).unwrap();
    let trace = read_trace(&out.trace).unwrap();
    assert_eq!(trace.n_draws(), 1000);
    assert_eq!(trace.statistic, "rate");
    let diag = diagnostics_from_csv(&std::fs::read_to_string(&out.diagnostics).unwrap()).unwrap();
    assert_eq!(diag.rows.len(), 1005);
    assert_eq!(diag.rows.iter().filter(|r| r.retained).count(), 1000);
}

#[test]
fn frozen_concentration_is_constant_in_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let (a, _, _) = simulated(tmp.path());
    let out = cmd_fit(&fit_cmd(ModelKind::Bnbp, &a, McmcConfig { freeze_c: true, ..short() }), tmp.path()).unwrap();
    let diag = diagnostics_from_csv(&std::fs::read_to_string(&out.diagnostics).unwrap()).unwrap();
    let c = diag.global_names.iter().position(|n| n == "c").unwrap();
    let first = diag.rows[0].globals[c];
    assert!(diag.rows.iter().all(|r| r.globals[c] == first));
    assert_eq!(out.acceptance_rate, None);
}

#[test]
fn binary_and_csv_traces_hold_the_same_draws() {
    let tmp = TempDir::new().unwrap();
    let (a, _, _) = simulated(tmp.path());
    let csv = cmd_fit(&fit_cmd(ModelKind::Gnbp, &a, short()), &tmp.path().join("c")).unwrap();
    let bin = cmd_fit(&FitCommand { format: TraceFormat::Binary, ..fit_cmd(ModelKind::Gnbp, &a, short()) }, &tmp.path().join("b")).unwrap();
    assert!(bin.trace.to_string_lossy().ends_with(".bin"));
    assert_eq!(read_trace(&csv.trace).unwrap(), read_trace(&bin.trace).unwrap());
}

#[test]
fn identical_traces_rank_with_zero_divergence() {
    let tmp = TempDir::new().unwrap();
    let (a, _, _) = simulated(tmp.path());
    let fit = cmd_fit(&fit_cmd(ModelKind::Gnbp, &a, short()), tmp.path()).unwrap();
    let out = cmd_rank(&RankCommand { trace_a: fit.trace.clone(), trace_b: fit.trace, histogram: HistogramConfig::default() }, &tmp.path().join("rank")).unwrap();
    let text = std::fs::read_to_string(&out.ranking).unwrap();
    assert!(text.starts_with("# nbdiff "));
    assert_eq!(text.lines().nth(1), Some("gene_id,kl,rank"));
    let ranking = GeneRanking::from_csv(&text).unwrap();
    assert_eq!(ranking.len(), 135);
    assert!(ranking.genes.iter().all(|g| g.kl == 0.0));
    assert_eq!(out.n_warnings, 0);
}

#[test]
fn gene_missing_from_one_trace_is_noted_in_sidecar() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    std::fs::write(&a, "# nbdiff-trace 1\n# statistic=shape\ndraw,@c,g1,g2,g3\n1,1,0.5,2,3\n2,1,0.6,2.5,3.5\n3,1,0.4,1.5,4\n").unwrap();
    std::fs::write(&b, "# nbdiff-trace 1\n# statistic=shape\ndraw,@c,g1,g2\n1,1,0.5,9\n2,1,0.6,8\n3,1,0.4,7\n").unwrap();
    let out = cmd_rank(&RankCommand { trace_a: a, trace_b: b, histogram: HistogramConfig::default() }, tmp.path()).unwrap();
    assert_eq!(out.n_warnings, 1);
    let notes = std::fs::read_to_string(&out.warnings).unwrap();
    assert!(notes.contains("gene g3 missing from trace B"));
    let ranking = GeneRanking::from_csv(&std::fs::read_to_string(&out.ranking).unwrap()).unwrap();
    let ids: Vec<&str> = ranking.genes.iter().map(|g| g.gene_id.as_str()).collect();
    assert_eq!(ids.len(), 3);
    assert_eq!(*ids.last().unwrap(), "g1");
    for w in ranking.genes.windows(2) {
        assert!(w[0].kl >= w[1].kl);
    }
}

#[test]
fn simulate_writes_stamped_groups_and_truth() {
    let tmp = TempDir::new().unwrap();
    let spec = SynthSpec { n_genes: 200, replicates: 2, seed: 1, ..SynthSpec::default() };
    let out = cmd_simulate(&spec, tmp.path()).unwrap();
    assert_eq!(out.n_genes, 180);
    assert_eq!(out.n_de, 18);
    for path in [&out.group_a, &out.group_b, &out.truth] {
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("# nbdiff 0.1.0 manifest="), "{}", path.display());
    }
    let truth = std::fs::read_to_string(&out.truth).unwrap();
    assert_eq!(truth.lines().nth(1), Some("gene_id,de,direction,realized_fold"));
    let a = nbdiff::data::load_counts(&out.group_a).unwrap();
    assert_eq!((a.n_samples(), a.n_genes()), (2, 180));
}

#[test]
fn evaluate_matches_hand_enumeration() {
    let tmp = TempDir::new().unwrap();
    let ranking = tmp.path().join("ranking.csv");
    let truth = tmp.path().join("truth.csv");
    std::fs::write(&ranking, "gene_id,kl,rank\nw,4,1\nx,3,2\ny,2,3\nz,1,4\n").unwrap();
    std::fs::write(&truth, "gene_id,de\nw,1\nx,0\ny,1\nz,0\n").unwrap();
    let out = cmd_evaluate(&EvaluateCommand { ranking: ranking.clone(), truth: TruthSource::Labels(truth), tau: 0.1 }, &tmp.path().join("eval")).unwrap();
    assert!((out.auc_roc - 0.75).abs() < 1e-12);
    let roc = std::fs::read_to_string(tmp.path().join("eval/roc.csv")).unwrap();
    assert!(roc.ends_with("fpr,tpr\n0,0\n0,0.5\n0.5,0.5\n0.5,1\n1,1\n"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out.report).unwrap()).unwrap();
    assert_eq!(json["tool_version"], "0.1.0");
    assert_eq!(json["manifest_hash"].as_str().unwrap().len(), 64);

    // intensities (8, 2) have |log2 ratio| = 2, so cutoff 2 keeps only w and y
    let intensity = tmp.path().join("intensity.csv");
    std::fs::write(&intensity, "gene_id,intensity_a,intensity_b\nw,8,2\nx,3,2\ny,1,4\nz,5,5\n").unwrap();
    let out = cmd_evaluate(&EvaluateCommand { ranking, truth: TruthSource::Intensity { path: intensity, log2_cutoff: 2.0 }, tau: 0.1 }, &tmp.path().join("eval2")).unwrap();
    assert!((out.auc_roc - 0.75).abs() < 1e-12);
}

#[test]
fn every_pipeline_output_carries_the_manifest_hash() {
    let tmp = TempDir::new().unwrap();
    let (a, b, truth) = simulated(tmp.path());
    let cfg = PipelineConfig {
        models: vec![ModelKind::NbpScaled],
        trials: 2,
        tau: 0.1,
        seed: 0,
        mcmc: short(),
        hyper: Hyper::default(),
        histogram: HistogramConfig::default(),
        scenarios: vec![Scenario { name: "data".into(), source: DataSource::Observed { group_a: a, group_b: b, truth: TruthSource::Labels(truth), qc_drop_fraction: 0.0 } }],
    };
    let out = cmd_pipeline(&cfg, &tmp.path().join("pipe")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out.manifest).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap().to_string();
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 3);
    for path in [&out.summary, &out.trials, &out.report_path] {
        assert!(std::fs::read_to_string(path).unwrap().contains(&hash), "{}", path.display());
    }
    assert_eq!(out.report.trials.len(), 2);
    assert!(out.report.trials.iter().all(|t| t.report.is_some()));
}

fn nbdiff(args: &[&str], env_out: Option<&Path>) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nbdiff"));
    cmd.args(args).env_remove(OUT_DIR_ENV);
    if let Some(dir) = env_out {
        cmd.env(OUT_DIR_ENV, dir);
    }
    cmd.output().unwrap()
}

#[test]
fn binary_exit_codes_and_output_env() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(nbdiff(&["--help"], None).status.code(), Some(0));
    assert_eq!(nbdiff(&["fit", "--bogus"], None).status.code(), Some(1));
    let missing = tmp.path().join("missing.tsv");
    let out = nbdiff(&["fit", missing.to_str().unwrap(), "--model", "gnbp"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.tsv"));

    let env_dir = tmp.path().join("from-env");
    let out = nbdiff(&["simulate", "--genes", "50", "--replicates", "2"], Some(&env_dir));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env_dir.join("truth.csv").exists());

    let flag_dir = tmp.path().join("from-flag");
    let out = nbdiff(&["simulate", "--genes", "50", "--replicates", "2", "--out-dir", flag_dir.to_str().unwrap()], Some(&env_dir));
    assert_eq!(out.status.code(), Some(0));
    assert!(flag_dir.join("group_a.tsv").exists());

    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "[synth]\nfold_change = 0.5\n").unwrap();
    let out = nbdiff(&["simulate", "--config", cfg.to_str().unwrap()], Some(&env_dir));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cli_round_trip_from_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "models = [\"nbp-scaled\", \"gnbp\"]\ntrials = 2\nseed = 3\n[mcmc]\nburn_in = 20\nretained = 20\n[synth]\nn_genes = 100\nreplicates = 3\n[[scenario]]\nname = \"b2\"\n[[scenario]]\nname = \"b3\"\nfold_change = 3.0\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = nbdiff(&["pipeline", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().filter(|l| l.starts_with("b2,") || l.starts_with("b3,")).count(), 4);
}
