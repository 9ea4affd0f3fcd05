//! File-level commands: each reads its inputs, writes its outputs into one
//! directory and records a manifest whose hash is stamped into every file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{load_counts, write_counts};
use crate::error::{Error, Result};
use crate::eval::roc_pr_report;
use crate::model::{fit, Hyper, McmcConfig, ModelKind};
use crate::pipeline::{run_pipeline, DataSource, PipelineConfig, PipelineReport, Scenario, TruthSource};
use crate::ranking::{rank_genes, GeneRanking, HistogramConfig};
use crate::synth::{synth_generate, ParameterSource, SynthSpec};
use crate::trace_io::{diagnostics_to_csv, read_trace, write_trace, TraceFormat};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NBDIFF_OUT_DIR";

/// `flag`, else `$NBDIFF_OUT_DIR`, else `nbdiff-out`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("nbdiff-out"))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub models: Vec<ModelKind>,
    pub hyper: Option<Hyper>,
    /// Fully resolved command settings.
    pub settings: serde_json::Value,
    pub inputs: Vec<InputFile>,
    pub output_dir: PathBuf,
    /// SHA-256 over the canonical JSON of everything above except
    /// `output_dir` and input paths; inputs enter by content digest.
    pub config_hash: String,
}

impl RunManifest {
    pub fn new(command: &str, models: Vec<ModelKind>, hyper: Option<Hyper>, settings: &impl Serialize, inputs: &[(&str, &Path)], output_dir: &Path) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|(role, path)| {
                let bytes = std::fs::read(path).map_err(|e| Error::io(*path, e))?;
                Ok(InputFile { role: role.to_string(), path: path.to_path_buf(), sha256: sha256_hex(&bytes) })
            })
            .collect::<Result<Vec<_>>>()?;
        let settings = serde_json::to_value(settings)?;
        let canonical = serde_json::json!({
            "tool_version": VERSION,
            "command": command,
            "models": models,
            "hyper": hyper,
            "settings": settings,
            "inputs": inputs.iter().map(|i| serde_json::json!({"role": i.role, "sha256": i.sha256})).collect::<Vec<_>>(),
        });
        let config_hash = sha256_hex(serde_json::to_string(&canonical)?.as_bytes());
        Ok(Self {
            tool_version: VERSION.to_string(),
            command: command.to_string(),
            models,
            hyper,
            settings,
            inputs,
            output_dir: output_dir.to_path_buf(),
            config_hash,
        })
    }

    /// Comment line placed at the top of every text output.
    pub fn header_line(&self) -> String {
        format!("nbdiff {} manifest={}", self.tool_version, self.config_hash)
    }

    fn provenance(&self) -> Vec<String> {
        vec![self.header_line()]
    }

    fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        write_json(&dir.join(format!("{stem}.manifest.json")), self)
    }
}

/// JSON outputs carry the tool version and manifest hash next to their payload.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    tool_version: &'a str,
    manifest_hash: &'a str,
    #[serde(flatten)]
    payload: &'a T,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_stamped(path: &Path, manifest: &RunManifest, payload: &impl Serialize) -> Result<PathBuf> {
    write_json(path, &Stamped { tool_version: &manifest.tool_version, manifest_hash: &manifest.config_hash, payload })
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn with_header(manifest: &RunManifest, body: &str) -> String {
    format!("# {}\n{body}", manifest.header_line())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitCommand {
    pub model: ModelKind,
    pub counts: PathBuf,
    pub mcmc: McmcConfig,
    pub hyper: Hyper,
    pub format: TraceFormat,
    /// Output file stem; defaults to the counts file stem.
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutputs {
    pub trace: PathBuf,
    pub diagnostics: PathBuf,
    pub manifest: PathBuf,
    pub acceptance_rate: Option<f64>,
}

pub fn cmd_fit(cmd: &FitCommand, out_dir: &Path) -> Result<FitOutputs> {
    let name = match &cmd.name {
        Some(n) => n.clone(),
        None => cmd.counts.file_stem().and_then(|s| s.to_str()).unwrap_or("fit").to_string(),
    };
    let settings = serde_json::json!({ "mcmc": cmd.mcmc, "format": cmd.format, "name": name });
    let manifest = RunManifest::new("fit", vec![cmd.model], Some(cmd.hyper), &settings, &[("counts", &cmd.counts)], out_dir)?;
    let data = load_counts(&cmd.counts)?;
    let result = fit(cmd.model, &data, &cmd.hyper, &cmd.mcmc, 0)?;

    ensure_dir(out_dir)?;
    let ext = match cmd.format {
        TraceFormat::Csv => "csv",
        TraceFormat::Binary => "bin",
    };
    let trace = out_dir.join(format!("{name}.trace.{ext}"));
    write_trace(&trace, &result.trace, &manifest.provenance())?;
    let diagnostics = write_text(&out_dir.join(format!("{name}.diagnostics.csv")), &diagnostics_to_csv(&result.diagnostics, &manifest.provenance()))?;
    Ok(FitOutputs {
        trace,
        diagnostics,
        manifest: manifest.write(out_dir, &name)?,
        acceptance_rate: result.diagnostics.acceptance_rate(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankCommand {
    pub trace_a: PathBuf,
    pub trace_b: PathBuf,
    pub histogram: HistogramConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOutputs {
    pub ranking: PathBuf,
    pub warnings: PathBuf,
    pub manifest: PathBuf,
    pub n_warnings: usize,
}

/// Writes `ranking.csv` and a `ranking.warnings.txt` sidecar listing genes
/// that were missing from one trace.
pub fn cmd_rank(cmd: &RankCommand, out_dir: &Path) -> Result<RankOutputs> {
    let manifest = RunManifest::new("rank", Vec::new(), None, &serde_json::json!({ "histogram": cmd.histogram }), &[("trace_a", &cmd.trace_a), ("trace_b", &cmd.trace_b)], out_dir)?;
    let ranking = rank_genes(&read_trace(&cmd.trace_a)?, &read_trace(&cmd.trace_b)?, &cmd.histogram)?;
    ensure_dir(out_dir)?;
    let mut notes = String::new();
    for w in &ranking.warnings {
        notes.push_str(w);
        notes.push('\n');
    }
    Ok(RankOutputs {
        ranking: write_text(&out_dir.join("ranking.csv"), &with_header(&manifest, &ranking.to_csv()))?,
        warnings: write_text(&out_dir.join("ranking.warnings.txt"), &with_header(&manifest, &notes))?,
        manifest: manifest.write(out_dir, "rank")?,
        n_warnings: ranking.warnings.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutputs {
    pub group_a: PathBuf,
    pub group_b: PathBuf,
    pub truth: PathBuf,
    pub manifest: PathBuf,
    pub n_genes: usize,
    pub n_de: usize,
}

pub fn cmd_simulate(spec: &SynthSpec, out_dir: &Path) -> Result<SimulateOutputs> {
    spec.validate()?;
    let reference: Vec<(&str, &Path)> = match &spec.parameter_source {
        ParameterSource::FitFromData(p) => vec![("reference", p.as_path())],
        ParameterSource::Defaults => Vec::new(),
    };
    let manifest = RunManifest::new("simulate", Vec::new(), None, spec, &reference, out_dir)?;
    let out = synth_generate(spec)?;
    ensure_dir(out_dir)?;
    let group_a = out_dir.join("group_a.tsv");
    let group_b = out_dir.join("group_b.tsv");
    write_counts(&group_a, out.data.group_a(), &manifest.provenance())?;
    write_counts(&group_b, out.data.group_b(), &manifest.provenance())?;
    Ok(SimulateOutputs {
        group_a,
        group_b,
        truth: write_text(&out_dir.join("truth.csv"), &with_header(&manifest, &out.truth.to_csv()))?,
        manifest: manifest.write(out_dir, "simulate")?,
        n_genes: out.data.n_genes(),
        n_de: out.truth.n_de(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateCommand {
    pub ranking: PathBuf,
    pub truth: TruthSource,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOutputs {
    pub report: PathBuf,
    pub manifest: PathBuf,
    pub auc_roc: f64,
    pub auc_pr: f64,
}

/// Writes `eval.json` plus `roc.csv`, `pr.csv` and `fd.csv`.
pub fn cmd_evaluate(cmd: &EvaluateCommand, out_dir: &Path) -> Result<EvaluateOutputs> {
    let truth_path = match &cmd.truth {
        TruthSource::Labels(p) => p,
        TruthSource::Intensity { path, .. } => path,
    };
    let manifest = RunManifest::new("evaluate", Vec::new(), None, cmd, &[("ranking", &cmd.ranking), ("truth", truth_path)], out_dir)?;
    let ranking = GeneRanking::from_csv(&read_text(&cmd.ranking)?)?;
    let report = roc_pr_report(&ranking, &cmd.truth.load()?, cmd.tau)?;
    ensure_dir(out_dir)?;
    write_text(&out_dir.join("roc.csv"), &with_header(&manifest, &report.roc_csv()))?;
    write_text(&out_dir.join("pr.csv"), &with_header(&manifest, &report.pr_csv()))?;
    write_text(&out_dir.join("fd.csv"), &with_header(&manifest, &report.fd_csv()))?;
    Ok(EvaluateOutputs {
        report: write_stamped(&out_dir.join("eval.json"), &manifest, &report)?,
        manifest: manifest.write(out_dir, "evaluate")?,
        auc_roc: report.auc_roc,
        auc_pr: report.auc_pr,
    })
}

fn pipeline_inputs(cfg: &PipelineConfig) -> Vec<(String, PathBuf)> {
    let mut inputs = Vec::new();
    for s in &cfg.scenarios {
        match &s.source {
            DataSource::Synthetic(spec) => {
                if let ParameterSource::FitFromData(p) = &spec.parameter_source {
                    inputs.push((format!("{}:reference", s.name), p.clone()));
                }
            }
            DataSource::Observed { group_a, group_b, truth, .. } => {
                inputs.push((format!("{}:group_a", s.name), group_a.clone()));
                inputs.push((format!("{}:group_b", s.name), group_b.clone()));
                let t = match truth {
                    TruthSource::Labels(p) => p,
                    TruthSource::Intensity { path, .. } => path,
                };
                inputs.push((format!("{}:truth", s.name), t.clone()));
            }
        }
    }
    inputs
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutputs {
    pub report: PipelineReport,
    pub report_path: PathBuf,
    pub summary: PathBuf,
    pub trials: PathBuf,
    pub manifest: PathBuf,
}

/// Writes `report.json`, `summary.csv` and `trials.csv`.
pub fn cmd_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> Result<PipelineOutputs> {
    cfg.validate()?;
    let inputs = pipeline_inputs(cfg);
    let refs: Vec<(&str, &Path)> = inputs.iter().map(|(r, p)| (r.as_str(), p.as_path())).collect();
    let settings = serde_json::json!({
        "trials": cfg.trials,
        "tau": cfg.tau,
        "seed": cfg.seed,
        "mcmc": cfg.mcmc,
        "histogram": cfg.histogram,
        "scenarios": cfg.scenarios,
    });
    let manifest = RunManifest::new("pipeline", cfg.models.clone(), Some(cfg.hyper), &settings, &refs, out_dir)?;
    let report = run_pipeline(cfg)?;
    ensure_dir(out_dir)?;
    Ok(PipelineOutputs {
        report_path: write_stamped(&out_dir.join("report.json"), &manifest, &report)?,
        summary: write_text(&out_dir.join("summary.csv"), &with_header(&manifest, &report.summary_csv()))?,
        trials: write_text(&out_dir.join("trials.csv"), &with_header(&manifest, &report.trials_csv()))?,
        manifest: manifest.write(out_dir, "pipeline")?,
        report,
    })
}

/// Observed two-group data named in a config file.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub group_a: Option<PathBuf>,
    pub group_b: Option<PathBuf>,
    /// Truth labels CSV (`gene_id`, `de`).
    pub truth: Option<PathBuf>,
    /// Intensity CSV (`gene_id,intensity_a,intensity_b`), used with `log2_cutoff`.
    pub intensity: Option<PathBuf>,
    pub log2_cutoff: Option<f64>,
    pub qc_drop_fraction: f64,
}

impl DataConfig {
    pub fn truth_source(&self) -> Result<TruthSource> {
        match (&self.truth, &self.intensity, self.log2_cutoff) {
            (Some(p), None, _) => Ok(TruthSource::Labels(p.clone())),
            (None, Some(p), Some(c)) => Ok(TruthSource::Intensity { path: p.clone(), log2_cutoff: c }),
            (None, Some(_), None) => Err(Error::Config("an intensity file needs log2_cutoff".into())),
            (Some(_), Some(_), _) => Err(Error::Config("give either truth or intensity, not both".into())),
            (None, None, _) => Err(Error::Config("evaluation needs a truth or intensity file".into())),
        }
    }
}

/// A named variation of the base `[synth]` table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(flatten)]
    pub overrides: toml::Table,
}

/// The declarative run file shared by all commands. Each command reads the
/// sections it needs; command-line flags override individual values.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelKind>,
    pub models: Option<Vec<ModelKind>>,
    pub trials: Option<usize>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    pub mcmc: McmcConfig,
    pub hyper: Hyper,
    pub histogram: HistogramConfig,
    pub synth: toml::Table,
    pub scenario: Vec<ScenarioConfig>,
    pub data: Option<DataConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?)
    }

    fn spec_from(table: toml::Table) -> Result<SynthSpec> {
        let spec: SynthSpec = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn synth_spec(&self) -> Result<SynthSpec> {
        Self::spec_from(self.synth.clone())
    }

    /// Scenarios from `[data]`, or from `[[scenario]]` overrides of
    /// `[synth]`, or the bare `[synth]` table as a scenario named `base`.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        if let Some(d) = &self.data {
            if !self.scenario.is_empty() {
                return Err(Error::Config("[[scenario]] tables apply to synthetic data only".into()));
            }
            let (Some(a), Some(b)) = (&d.group_a, &d.group_b) else {
                return Err(Error::Config("[data] needs group_a and group_b".into()));
            };
            let source = DataSource::Observed { group_a: a.clone(), group_b: b.clone(), truth: d.truth_source()?, qc_drop_fraction: d.qc_drop_fraction };
            return Ok(vec![Scenario { name: "data".into(), source }]);
        }
        if self.scenario.is_empty() {
            return Ok(vec![Scenario { name: "base".into(), source: DataSource::Synthetic(self.synth_spec()?) }]);
        }
        self.scenario
            .iter()
            .map(|s| {
                let mut table = self.synth.clone();
                table.extend(s.overrides.clone());
                Ok(Scenario { name: s.name.clone(), source: DataSource::Synthetic(Self::spec_from(table)?) })
            })
            .collect()
    }

    /// Defaults: all three sampler families with the scaled NBP, 10 trials,
    /// `tau = 0.1`, seed 0.
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let cfg = PipelineConfig {
            models: self.models.clone().unwrap_or_else(|| vec![ModelKind::Gnbp, ModelKind::Bnbp, ModelKind::NbpScaled]),
            trials: self.trials.unwrap_or(10),
            tau: self.tau.unwrap_or(0.1),
            seed: self.seed.unwrap_or(0),
            mcmc: self.mcmc,
            hyper: self.hyper,
            histogram: self.histogram,
            scenarios: self.scenarios()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
