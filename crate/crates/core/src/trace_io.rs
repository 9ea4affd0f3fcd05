//! Persisted posterior traces and sweep diagnostics.
//!
//! Trace CSV, version 1:
//!
//! ```text
//! # nbdiff-trace 1
//! # statistic=shape
//! # <provenance lines>
//! draw,@gamma0,@c,...,g1,g7,...
//! 1,0.93,1.2,...,0.41,3.7,...
//! ```
//!
//! Columns prefixed with `@` are global parameters. The rest hold the ranking
//! statistic of every gene whose trace is not identically zero. Genes that
//! stayed at zero are only named, in a `# zero_genes=g2,g5` line, and are
//! restored as zero columns after the stored genes when read back.
//!
//! The binary form carries the same content: the magic `NBDTRACE`, a
//! little-endian `u32` version and `u32` header length, a JSON header, then
//! one row of little-endian `f64` per draw (globals first, then genes).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiagnosticRow, Diagnostics, PosteriorTrace};

pub const TRACE_VERSION: u32 = 1;
pub const MAGIC: &[u8; 8] = b"NBDTRACE";
const CSV_TAG: &str = "nbdiff-trace";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Csv,
    Binary,
}

impl TraceFormat {
    /// `.bin` and `.nbt` files are binary, everything else CSV.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin" | "nbt") => TraceFormat::Binary,
            _ => TraceFormat::Csv,
        }
    }
}

fn zero_genes(trace: &PosteriorTrace, keep: &[usize]) -> Vec<String> {
    let mut stored = vec![false; trace.n_genes()];
    keep.iter().for_each(|&k| stored[k] = true);
    (0..trace.n_genes()).filter(|&k| !stored[k]).map(|k| trace.gene_ids[k].clone()).collect()
}

/// Appends constant-zero columns for `zero`.
fn with_zero_genes(trace: PosteriorTrace, zero: Vec<String>) -> PosteriorTrace {
    if zero.is_empty() {
        return trace;
    }
    let mut ids = trace.gene_ids.clone();
    ids.extend(zero.iter().cloned());
    let mut out = PosteriorTrace::new(trace.statistic.clone(), ids, trace.global_names.clone());
    let pad = vec![0.0; zero.len()];
    for i in 0..trace.n_draws() {
        let row: Vec<f64> = trace.draw(i).iter().chain(&pad).copied().collect();
        out.push(trace.draw_globals(i), &row);
    }
    out
}

/// Indices of genes with at least one nonzero draw.
fn stored_genes(trace: &PosteriorTrace) -> Vec<usize> {
    let n = trace.n_genes();
    let mut keep = vec![false; n];
    for (i, v) in trace.values.iter().enumerate() {
        if *v != 0.0 {
            keep[i % n] = true;
        }
    }
    (0..n).filter(|&k| keep[k]).collect()
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains([',', '\n', '\r']) || name.starts_with('@') {
        return Err(Error::Schema(format!("name {name:?} cannot be stored in a trace file")));
    }
    Ok(())
}

pub fn trace_to_csv(trace: &PosteriorTrace, provenance: &[String]) -> Result<String> {
    let keep = stored_genes(trace);
    let mut out = format!("# {CSV_TAG} {TRACE_VERSION}\n# statistic={}\n", trace.statistic);
    let zero = zero_genes(trace, &keep);
    if !zero.is_empty() {
        for id in &zero {
            check_name(id)?;
        }
        let _ = writeln!(out, "# zero_genes={}", zero.join(","));
    }
    for line in provenance {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("draw");
    for g in &trace.global_names {
        check_name(g)?;
        let _ = write!(out, ",@{g}");
    }
    for &k in &keep {
        check_name(&trace.gene_ids[k])?;
        let _ = write!(out, ",{}", trace.gene_ids[k]);
    }
    out.push('\n');
    for i in 0..trace.n_draws() {
        let _ = write!(out, "{}", i + 1);
        for v in trace.draw_globals(i) {
            let _ = write!(out, ",{v}");
        }
        let row = trace.draw(i);
        for &k in &keep {
            let _ = write!(out, ",{}", row[k]);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn trace_from_csv(text: &str) -> Result<PosteriorTrace> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).enumerate();
    let mut statistic = None;
    let mut version = None;
    let mut zero = Vec::new();
    let header = loop {
        let (_, line) = lines.next().ok_or_else(|| Error::Schema("trace file has no header".into()))?;
        match line.strip_prefix('#') {
            Some(comment) => {
                let comment = comment.trim();
                if let Some(v) = comment.strip_prefix(CSV_TAG) {
                    version = Some(v.trim().parse::<u32>().map_err(|_| Error::Schema(format!("bad trace version {v:?}")))?);
                } else if let Some(s) = comment.strip_prefix("statistic=") {
                    statistic = Some(s.to_string());
                } else if let Some(z) = comment.strip_prefix("zero_genes=") {
                    zero = z.split(',').map(str::to_string).collect();
                }
            }
            None if line.is_empty() => {}
            None => break line,
        }
    };
    match version {
        Some(TRACE_VERSION) => {}
        Some(v) => return Err(Error::Schema(format!("unsupported trace version {v}"))),
        None => return Err(Error::Schema("not a trace file: missing version line".into())),
    }
    let mut cols = header.split(',');
    if cols.next() != Some("draw") {
        return Err(Error::Schema("trace header must start with \"draw\"".into()));
    }
    let mut global_names = Vec::new();
    let mut gene_ids = Vec::new();
    for c in cols {
        match c.strip_prefix('@') {
            Some(g) => {
                if !gene_ids.is_empty() {
                    return Err(Error::Schema(format!("global {g:?} listed after gene columns")));
                }
                global_names.push(g.to_string());
            }
            None => gene_ids.push(c.to_string()),
        }
    }
    let mut trace = PosteriorTrace::new(statistic.unwrap_or_default(), gene_ids, global_names);
    let width = 1 + trace.global_names.len() + trace.gene_ids.len();
    let mut row = Vec::with_capacity(width);
    for (i, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        row.clear();
        for (g, cell) in line.split(',').enumerate() {
            let v = cell.parse::<f64>().map_err(|_| Error::Parse {
                row: i + 1,
                gene: g + 1,
                message: format!("{cell:?} is not a number"),
            })?;
            row.push(v);
        }
        if row.len() != width {
            return Err(Error::Parse {
                row: i + 1,
                gene: row.len().min(width),
                message: format!("expected {width} fields, found {}", row.len()),
            });
        }
        let g = trace.global_names.len();
        trace.push(&row[1..1 + g], &row[1 + g..]);
    }
    Ok(with_zero_genes(trace, zero))
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    statistic: String,
    global_names: Vec<String>,
    gene_ids: Vec<String>,
    n_draws: usize,
    #[serde(default)]
    zero_genes: Vec<String>,
    provenance: Vec<String>,
}

pub fn trace_to_bytes(trace: &PosteriorTrace, provenance: &[String]) -> Result<Vec<u8>> {
    let keep = stored_genes(trace);
    let header = BinaryHeader {
        statistic: trace.statistic.clone(),
        global_names: trace.global_names.clone(),
        gene_ids: keep.iter().map(|&k| trace.gene_ids[k].clone()).collect(),
        n_draws: trace.n_draws(),
        zero_genes: zero_genes(trace, &keep),
        provenance: provenance.to_vec(),
    };
    let json = serde_json::to_vec(&header)?;
    let json_len = u32::try_from(json.len()).map_err(|_| Error::Schema("trace header too large".into()))?;
    let mut out = Vec::with_capacity(16 + json.len() + 8 * (trace.globals.len() + trace.n_draws() * keep.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&TRACE_VERSION.to_le_bytes());
    out.extend_from_slice(&json_len.to_le_bytes());
    out.extend_from_slice(&json);
    for i in 0..trace.n_draws() {
        for v in trace.draw_globals(i) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let row = trace.draw(i);
        for &k in &keep {
            out.extend_from_slice(&row[k].to_le_bytes());
        }
    }
    Ok(out)
}

pub fn trace_from_bytes(bytes: &[u8]) -> Result<PosteriorTrace> {
    let truncated = || Error::Schema("binary trace is truncated".into());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Schema("not a binary trace: bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != TRACE_VERSION {
        return Err(Error::Schema(format!("unsupported trace version {version}")));
    }
    let json_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let json = bytes.get(16..16 + json_len).ok_or_else(truncated)?;
    let header: BinaryHeader = serde_json::from_slice(json)?;
    let width = header.global_names.len() + header.gene_ids.len();
    let body = &bytes[16 + json_len..];
    if body.len() != 8 * width * header.n_draws {
        return Err(truncated());
    }
    let values: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let g = header.global_names.len();
    let mut trace = PosteriorTrace::new(header.statistic, header.gene_ids, header.global_names);
    if width > 0 {
        for row in values.chunks_exact(width) {
            trace.push(&row[..g], &row[g..]);
        }
    }
    Ok(with_zero_genes(trace, header.zero_genes))
}

pub fn write_trace(path: impl AsRef<Path>, trace: &PosteriorTrace, provenance: &[String]) -> Result<()> {
    let path = path.as_ref();
    let bytes = match TraceFormat::for_path(path) {
        TraceFormat::Csv => trace_to_csv(trace, provenance)?.into_bytes(),
        TraceFormat::Binary => trace_to_bytes(trace, provenance)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads either format, recognising binary files by their magic.
pub fn read_trace(path: impl AsRef<Path>) -> Result<PosteriorTrace> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        return trace_from_bytes(&bytes);
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::Schema(format!("{} is neither UTF-8 CSV nor a binary trace", path.display())))?;
    trace_from_csv(&text)
}

/// `sweep,retained,accepted,<globals...>`; `accepted` is empty for models
/// without a Metropolis step.
pub fn diagnostics_to_csv(diag: &Diagnostics, provenance: &[String]) -> String {
    let mut out = String::new();
    for line in provenance {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("sweep,retained,accepted");
    for g in &diag.global_names {
        let _ = write!(out, ",{g}");
    }
    out.push('\n');
    for row in &diag.rows {
        let accepted = match row.accepted {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        let _ = write!(out, "{},{},{accepted}", row.sweep, u8::from(row.retained));
        for v in &row.globals {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn diagnostics_from_csv(text: &str) -> Result<Diagnostics> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).enumerate().filter(|(_, l)| !l.starts_with('#') && !l.is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Schema("diagnostics file is empty".into()))?;
    let global_names: Vec<String> = header
        .strip_prefix("sweep,retained,accepted")
        .ok_or_else(|| Error::Schema(format!("unexpected diagnostics header {header:?}")))?
        .split(',')
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let bad = |gene: usize, message: String| Error::Parse { row: i + 1, gene, message };
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 + global_names.len() {
            return Err(bad(cells.len(), format!("expected {} fields", 3 + global_names.len())));
        }
        let sweep = cells[0].parse().map_err(|_| bad(1, format!("bad sweep {:?}", cells[0])))?;
        let retained = match cells[1] {
            "1" => true,
            "0" => false,
            other => return Err(bad(2, format!("bad retained flag {other:?}"))),
        };
        let accepted = match cells[2] {
            "" => None,
            "1" => Some(true),
            "0" => Some(false),
            other => return Err(bad(3, format!("bad accepted flag {other:?}"))),
        };
        let globals = cells[3..]
            .iter()
            .enumerate()
            .map(|(g, c)| c.parse::<f64>().map_err(|_| bad(4 + g, format!("{c:?} is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(DiagnosticRow { sweep, retained, globals, accepted });
    }
    Ok(Diagnostics { global_names, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> PosteriorTrace {
        let mut t = PosteriorTrace::new("shape", vec!["g1".into(), "g2".into(), "g3".into()], vec!["gamma0".into(), "c".into()]);
        t.push(&[1.5, 0.25], &[0.1, 0.0, 3.0]);
        t.push(&[1.0 / 3.0, 2.0], &[1e-300, 0.0, 7.25]);
        t
    }

    /// Zero genes come back after the stored ones.
    fn zero_genes_last(t: &PosteriorTrace) -> PosteriorTrace {
        let mut out = PosteriorTrace::new(t.statistic.clone(), vec!["g1".into(), "g3".into(), "g2".into()], t.global_names.clone());
        for i in 0..t.n_draws() {
            let d = t.draw(i);
            out.push(t.draw_globals(i), &[d[0], d[2], d[1]]);
        }
        out
    }

    #[test]
    fn csv_round_trip_is_exact_and_names_zero_genes() {
        let t = sample_trace();
        let text = trace_to_csv(&t, &["nbdiff 0.1.0 manifest=abc".into()]).unwrap();
        assert!(text.starts_with("# nbdiff-trace 1\n"));
        assert!(text.contains("# zero_genes=g2\n"));
        assert!(text.contains("draw,@gamma0,@c,g1,g3\n"));
        assert_eq!(trace_from_csv(&text).unwrap(), zero_genes_last(&t));
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let t = sample_trace();
        let bytes = trace_to_bytes(&t, &[]).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(trace_from_bytes(&bytes).unwrap(), zero_genes_last(&t));
        assert!(trace_from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn rejects_other_versions_and_foreign_files() {
        let text = trace_to_csv(&sample_trace(), &[]).unwrap().replace("nbdiff-trace 1", "nbdiff-trace 9");
        assert!(matches!(trace_from_csv(&text), Err(Error::Schema(_))));
        assert!(trace_from_csv("gene_id,kl,rank\n").is_err());
        let mut bytes = trace_to_bytes(&sample_trace(), &[]).unwrap();
        bytes[8] = 2;
        assert!(trace_from_bytes(&bytes).is_err());
    }

    #[test]
    fn malformed_rows_are_parse_errors() {
        let text = "# nbdiff-trace 1\ndraw,@c,g1\n1,2.0,x\n";
        assert!(matches!(trace_from_csv(text), Err(Error::Parse { row: 3, gene: 3, .. })));
        let text = "# nbdiff-trace 1\ndraw,@c,g1\n1,2.0\n";
        assert!(matches!(trace_from_csv(text), Err(Error::Parse { row: 3, .. })));
    }

    #[test]
    fn diagnostics_round_trip() {
        let d = Diagnostics {
            global_names: vec!["gamma0".into(), "c".into()],
            rows: vec![
                DiagnosticRow { sweep: 1, retained: false, globals: vec![1.0, 2.5], accepted: Some(true) },
                DiagnosticRow { sweep: 2, retained: true, globals: vec![0.5, 2.5], accepted: Some(false) },
                DiagnosticRow { sweep: 3, retained: true, globals: vec![0.1, 1e-9], accepted: None },
            ],
        };
        let text = diagnostics_to_csv(&d, &["x".into()]);
        assert!(text.contains("sweep,retained,accepted,gamma0,c\n1,0,1,1,2.5\n"));
        assert!(text.ends_with("\n3,1,,0.1,0.000000001\n"));
        assert_eq!(diagnostics_from_csv(&text).unwrap(), d);
    }

    #[test]
    fn format_follows_extension() {
        assert_eq!(TraceFormat::for_path(Path::new("a/trace.bin")), TraceFormat::Binary);
        assert_eq!(TraceFormat::for_path(Path::new("trace.csv")), TraceFormat::Csv);
        assert_eq!(TraceFormat::for_path(Path::new("trace")), TraceFormat::Csv);
    }
}
