//! Gene ranking by the symmetric KL divergence between the two groups'
//! posterior samples.
//!
//! For each gene the pooled samples define a support interval from their
//! quartiles, each group's samples are binned on it, and the two
//! histograms are compared with `Σ (π_a − π_b) ln((π_a + ε)/(π_b + ε))`.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PosteriorTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistogramConfig {
    pub n_bins: usize,
    pub epsilon: f64,
    /// Whisker length in interquartile ranges.
    pub whisker: f64,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            n_bins: 100,
            epsilon: 1e-10,
            whisker: 1.5,
        }
    }
}

impl HistogramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 {
            return Err(Error::Config(format!("n_bins must be at least 2, got {}", self.n_bins)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.whisker >= 0.0) || !self.whisker.is_finite() {
            return Err(Error::Config(format!("whisker must be nonnegative, got {}", self.whisker)));
        }
        Ok(())
    }
}

/// Linear-interpolation quantile of sorted data (`x[(n−1)p]`).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `[max(0, Q1 − w·IQR), Q3 + w·IQR]` from the pooled samples. A zero-width
/// interval is widened to `1e-12` (relative to `lo` when `|lo| > 1`).
pub fn build_support(a: &[f64], b: &[f64], cfg: &HistogramConfig) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Mismatch("support needs samples from both groups".into()));
    }
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    if let Some(bad) = pooled.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain { what: "posterior sample", value: *bad });
    }
    pooled.sort_by(f64::total_cmp);
    let (q1, q3) = (quantile_sorted(&pooled, 0.25), quantile_sorted(&pooled, 0.75));
    let iqr = q3 - q1;
    let lo = (q1 - cfg.whisker * iqr).max(0.0);
    let mut hi = q3 + cfg.whisker * iqr;
    if hi <= lo {
        hi = lo + 1e-12 * lo.abs().max(1.0);
    }
    Ok((lo, hi))
}

/// Equal-width bins on `[lo, hi]`, half-open except the last; samples
/// outside the interval fall into the edge bins.
pub fn histogram_probability(samples: &[f64], support: (f64, f64), cfg: &HistogramConfig) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Mismatch("cannot bin an empty sample".into()));
    }
    let (lo, hi) = support;
    let n = cfg.n_bins;
    let width = hi - lo;
    let edge = |i: usize| lo + width * (i as f64 / n as f64);
    let mut counts = vec![0u64; n];
    for &x in samples {
        let mut i = (((x - lo) / width) * n as f64).floor().clamp(0.0, (n - 1) as f64) as usize;
        // settle floating-point rounding against the exact edges
        while i > 0 && x < edge(i) {
            i -= 1;
        }
        while i + 1 < n && x >= edge(i + 1) {
            i += 1;
        }
        counts[i] += 1;
    }
    let total = samples.len() as f64;
    Ok(counts.iter().map(|&c| c as f64 / total).collect())
}

/// `Σ_i (a_i − b_i) ln((a_i + ε)/(b_i + ε))`, natural log.
pub fn symmetric_kl(a: &[f64], b: &[f64], epsilon: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Mismatch(format!("histograms have {} and {} bins", a.len(), b.len())));
    }
    for v in [a, b] {
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Domain { what: "probability vector sum", value: s });
        }
    }
    Ok(a.iter().zip(b).map(|(&p, &q)| (p - q) * ((p + epsilon) / (q + epsilon)).ln()).sum())
}

/// Support, both histograms and their divergence for one gene.
pub fn gene_kl(a: &[f64], b: &[f64], cfg: &HistogramConfig) -> Result<f64> {
    let support = build_support(a, b, cfg)?;
    let pa = histogram_probability(a, support, cfg)?;
    let pb = histogram_probability(b, support, cfg)?;
    symmetric_kl(&pa, &pb, cfg.epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedGene {
    pub gene_id: String,
    pub kl: f64,
}

/// Genes sorted by decreasing divergence, ties by gene id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GeneRanking {
    pub genes: Vec<RankedGene>,
    /// Alignment notes, one per gene missing from a trace.
    pub warnings: Vec<String>,
}

impl GeneRanking {
    pub fn from_scores(scores: Vec<RankedGene>) -> Self {
        let mut genes = scores;
        genes.sort_by(|x, y| y.kl.total_cmp(&x.kl).then_with(|| x.gene_id.cmp(&y.gene_id)));
        Self { genes, warnings: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn score_map(&self) -> HashMap<&str, f64> {
        self.genes.iter().map(|g| (g.gene_id.as_str(), g.kl)).collect()
    }

    /// `gene_id,kl,rank` with 1-based ranks.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gene_id,kl,rank\n");
        for (i, g) in self.genes.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", g.gene_id, g.kl, i + 1));
        }
        out
    }

    /// Parses [`GeneRanking::to_csv`] output; `#` lines are skipped and the
    /// order is taken from the `rank` column.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).filter(|l| !l.starts_with('#') && !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Schema("ranking file is empty".into()))?;
        if header != "gene_id,kl,rank" {
            return Err(Error::Schema(format!("unexpected ranking header {header:?}")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            let bad = |message: String| Error::Parse { row: i + 1, gene: 0, message };
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", fields.len())));
            }
            let kl: f64 = fields[1].parse().map_err(|_| bad(format!("invalid kl {:?}", fields[1])))?;
            let rank: usize = fields[2].parse().map_err(|_| bad(format!("invalid rank {:?}", fields[2])))?;
            rows.push((rank, RankedGene { gene_id: fields[0].to_string(), kl }));
        }
        rows.sort_by_key(|(rank, _)| *rank);
        Ok(Self { genes: rows.into_iter().map(|(_, g)| g).collect(), warnings: Vec::new() })
    }
}

fn index_of(trace: &PosteriorTrace, side: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::with_capacity(trace.n_genes());
    for (k, id) in trace.gene_ids.iter().enumerate() {
        if map.insert(id.clone(), k).is_some() {
            return Err(Error::Mismatch(format!("gene {id:?} appears twice in trace {side}")));
        }
    }
    Ok(map)
}

/// Ranks the union of both traces' genes. A gene absent from one trace is
/// compared against a constant-zero trace, matching the convention that
/// unexpressed genes keep a zero statistic.
pub fn rank_genes(a: &PosteriorTrace, b: &PosteriorTrace, cfg: &HistogramConfig) -> Result<GeneRanking> {
    cfg.validate()?;
    if a.n_draws() == 0 || b.n_draws() == 0 {
        return Err(Error::Mismatch("both traces need at least one draw".into()));
    }
    if !a.statistic.is_empty() && !b.statistic.is_empty() && a.statistic != b.statistic {
        return Err(Error::Mismatch(format!("cannot compare statistic {:?} with {:?}", a.statistic, b.statistic)));
    }
    let (ia, ib) = (index_of(a, "A")?, index_of(b, "B")?);
    let mut universe: Vec<&String> = a.gene_ids.iter().collect();
    let seen: HashSet<&String> = universe.iter().copied().collect();
    universe.extend(b.gene_ids.iter().filter(|id| !seen.contains(id)));

    let mut warnings = Vec::new();
    for id in &universe {
        for (side, index) in [("A", &ia), ("B", &ib)] {
            if !index.contains_key(*id) {
                warnings.push(format!("gene {id} missing from trace {side}; using a constant-zero trace"));
            }
        }
    }

    let scores = universe
        .par_iter()
        .map(|id| {
            let samples = |t: &PosteriorTrace, idx: &HashMap<String, usize>| idx.get(*id).map_or_else(|| vec![0.0; t.n_draws()], |&k| t.gene(k));
            let kl = gene_kl(&samples(a, &ia), &samples(b, &ib), cfg)?;
            Ok(RankedGene { gene_id: (*id).clone(), kl })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ranking = GeneRanking::from_scores(scores);
    ranking.warnings = warnings;
    Ok(ranking)
}
