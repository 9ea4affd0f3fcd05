//! Ground-truth labels and ranking accuracy: ROC and precision-recall
//! curves, full and partial areas, and false-discovery counts.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::GeneRanking;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruthLabels {
    pub gene_ids: Vec<String>,
    pub de: Vec<bool>,
}

impl TruthLabels {
    pub fn new(gene_ids: Vec<String>, de: Vec<bool>) -> Result<Self> {
        if gene_ids.len() != de.len() {
            return Err(Error::Mismatch(format!("{} gene ids but {} labels", gene_ids.len(), de.len())));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = gene_ids.iter().find(|id| !seen.insert(*id)) {
            return Err(Error::Schema(format!("duplicate gene id {dup:?} in truth labels")));
        }
        Ok(Self { gene_ids, de })
    }

    pub fn n_positive(&self) -> usize {
        self.de.iter().filter(|&&d| d).count()
    }

    /// Reads a CSV whose header has `gene_id` and `de` columns; `de`
    /// accepts `true/false` or `1/0`. Other columns are ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).filter(|l| !l.starts_with('#') && !l.is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| Error::Schema("truth file is empty".into()))?.split(',').collect();
        let col = |name: &str| header.iter().position(|h| *h == name).ok_or_else(|| Error::Schema(format!("truth file lacks a {name} column")));
        let (id_col, de_col) = (col("gene_id")?, col("de")?);
        let (mut ids, mut de) = (Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            let bad = |message: String| Error::Parse { row: i + 1, gene: 0, message };
            if fields.len() != header.len() {
                return Err(bad(format!("expected {} fields, found {}", header.len(), fields.len())));
            }
            ids.push(fields[id_col].to_string());
            de.push(match fields[de_col] {
                "true" | "1" => true,
                "false" | "0" => false,
                other => return Err(bad(format!("invalid de flag {other:?}"))),
            });
        }
        Self::new(ids, de)
    }
}

/// DE iff `|log2(a/b)| ≥ cutoff`.
pub fn label_from_intensity(gene_ids: &[String], a: &[f64], b: &[f64], log2_cutoff: f64) -> Result<TruthLabels> {
    if a.len() != gene_ids.len() || b.len() != gene_ids.len() {
        return Err(Error::Mismatch("intensity vectors must match the gene list".into()));
    }
    let mut de = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        for v in [x, y] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain { what: "intensity", value: v });
            }
        }
        de.push((x / y).log2().abs() >= log2_cutoff);
    }
    TruthLabels::new(gene_ids.to_vec(), de)
}

/// Reads `gene_id,intensity_a,intensity_b` rows.
pub fn intensities_from_csv(text: &str) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).filter(|l| !l.starts_with('#') && !l.is_empty());
    let header = lines.next().ok_or_else(|| Error::Schema("intensity file is empty".into()))?;
    if header != "gene_id,intensity_a,intensity_b" {
        return Err(Error::Schema(format!("unexpected intensity header {header:?}")));
    }
    let (mut ids, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let bad = |message: String| Error::Parse { row: i + 1, gene: 0, message };
        if f.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("invalid intensity {s:?}")));
        ids.push(f[0].to_string());
        a.push(num(f[1])?);
        b.push(num(f[2])?);
    }
    Ok((ids, a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub partial_auc_roc: f64,
    pub partial_auc_pr: f64,
    pub tau: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub roc_points: Vec<(f64, f64)>,
    /// `(recall, precision)` at each distinct score.
    pub pr_points: Vec<(f64, f64)>,
    /// False positives among the top `N` genes, `N = 1..=n_positive`.
    pub fd_curve: Vec<u64>,
}

impl EvalReport {
    pub fn roc_csv(&self) -> String {
        let mut s = String::from("fpr,tpr\n");
        for (x, y) in &self.roc_points {
            s.push_str(&format!("{x},{y}\n"));
        }
        s
    }

    pub fn pr_csv(&self) -> String {
        let mut s = String::from("recall,precision\n");
        for (x, y) in &self.pr_points {
            s.push_str(&format!("{x},{y}\n"));
        }
        s
    }

    pub fn fd_csv(&self) -> String {
        let mut s = String::from("n,false_discoveries\n");
        for (i, v) in self.fd_curve.iter().enumerate() {
            s.push_str(&format!("{},{v}\n", i + 1));
        }
        s
    }
}

/// Area under a piecewise-linear curve up to `x = limit`.
fn trapezoid_until(points: &[(f64, f64)], limit: f64) -> f64 {
    let mut area = 0.0;
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= limit {
            break;
        }
        if x1 <= limit {
            area += (x1 - x0) * (y0 + y1) / 2.0;
        } else {
            let y = y0 + (y1 - y0) * (limit - x0) / (x1 - x0);
            area += (limit - x0) * (y0 + y) / 2.0;
        }
    }
    area
}

/// Step-wise area: each recall increment is weighted by the precision
/// reached at its end.
fn rectangles_until(points: &[(f64, f64)], limit: f64) -> f64 {
    let mut area = 0.0;
    let mut prev = 0.0;
    for &(recall, precision) in points {
        let hi = recall.min(limit);
        if hi > prev {
            area += (hi - prev) * precision;
        }
        prev = recall;
        if prev >= limit {
            break;
        }
    }
    area
}

/// Scores genes in the truth universe by their divergence. Equal scores form
/// one step: a diagonal ROC segment and a single PR point.
pub fn roc_pr_report(ranking: &GeneRanking, truth: &TruthLabels, tau: f64) -> Result<EvalReport> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("tau must lie in (0, 1], got {tau}")));
    }
    let scores = ranking.score_map();
    let order: HashMap<&str, usize> = ranking.genes.iter().enumerate().map(|(i, g)| (g.gene_id.as_str(), i)).collect();
    let mut rows = Vec::with_capacity(truth.gene_ids.len());
    for (id, &de) in truth.gene_ids.iter().zip(&truth.de) {
        let s = *scores.get(id.as_str()).ok_or_else(|| Error::Mismatch(format!("gene {id:?} has a label but no score")))?;
        rows.push((s, order[id.as_str()], de));
    }
    let n_pos = truth.n_positive();
    let n_neg = rows.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Mismatch("evaluation needs at least one DE and one non-DE gene".into()));
    }
    rows.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let (p, n) = (n_pos as f64, n_neg as f64);
    let mut roc = vec![(0.0, 0.0)];
    let mut pr = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        while j < rows.len() && rows[j].0 == rows[i].0 {
            if rows[j].2 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        roc.push((fp as f64 / n, tp as f64 / p));
        pr.push((tp as f64 / p, tp as f64 / (tp + fp) as f64));
        i = j;
    }

    let mut fd_curve = Vec::with_capacity(n_pos);
    let mut false_pos = 0;
    for row in rows.iter().take(n_pos) {
        if !row.2 {
            false_pos += 1;
        }
        fd_curve.push(false_pos);
    }

    Ok(EvalReport {
        auc_roc: trapezoid_until(&roc, 1.0),
        auc_pr: rectangles_until(&pr, 1.0),
        partial_auc_roc: trapezoid_until(&roc, tau),
        partial_auc_pr: rectangles_until(&pr, tau),
        tau,
        n_positive: n_pos,
        n_negative: n_neg,
        roc_points: roc,
        pr_points: pr,
        fd_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RngHandle;
    use crate::ranking::RankedGene;
    use proptest::prelude::*;
    use rand::Rng;

    fn ranked(scores: &[f64]) -> GeneRanking {
        GeneRanking::from_scores(scores.iter().enumerate().map(|(i, &kl)| RankedGene { gene_id: format!("g{i}"), kl }).collect())
    }

    fn labels(flags: &[bool]) -> TruthLabels {
        TruthLabels::new((0..flags.len()).map(|i| format!("g{i}")).collect(), flags.to_vec()).unwrap()
    }

    #[test]
    fn intensity_labels() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let t = label_from_intensity(&ids, &[8.0, 3.0], &[2.0, 3.0], 2.0).unwrap();
        assert_eq!(t.de, vec![true, false]);
        assert!(label_from_intensity(&ids, &[0.0, 1.0], &[1.0, 1.0], 1.0).is_err());
        let a: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let b = vec![7.0; 50];
        let ids: Vec<String> = (0..50).map(|i| i.to_string()).collect();
        let mut last = usize::MAX;
        for cutoff in [0.5, 1.0, 1.5, 2.0] {
            let n = label_from_intensity(&ids, &a, &b, cutoff).unwrap().n_positive();
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn hand_enumerated_roc() {
        let r = roc_pr_report(&ranked(&[4.0, 3.0, 2.0, 1.0]), &labels(&[true, false, true, false]), 0.1).unwrap();
        assert_eq!(r.roc_points, vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]);
        assert!((r.auc_roc - 0.75).abs() < 1e-15);
        // precision at recall 0.5 is 1, at recall 1 is 2/3
        assert!((r.auc_pr - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(r.fd_curve, vec![0, 1]);
    }

    #[test]
    fn perfect_ranking() {
        let r = roc_pr_report(&ranked(&[9.0, 8.0, 7.0, 1.0, 0.5]), &labels(&[true, true, true, false, false]), 0.1).unwrap();
        assert_eq!((r.auc_roc, r.auc_pr), (1.0, 1.0));
        assert!((r.partial_auc_roc - 0.1).abs() < 1e-15);
        assert!((r.partial_auc_pr - 0.1).abs() < 1e-15);
        assert!(r.fd_curve.iter().all(|&x| x == 0));
    }

    #[test]
    fn ties_count_half() {
        let r = roc_pr_report(&ranked(&[1.0; 6]), &labels(&[true, false, true, false, true, false]), 0.1).unwrap();
        assert!((r.auc_roc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn random_ranking_averages_half() {
        let mut rng = RngHandle::new(0, 0);
        let flags: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let truth = labels(&flags);
        let trials = 2000;
        let mean: f64 = (0..trials)
            .map(|_| {
                let scores: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
                roc_pr_report(&ranked(&scores), &truth, 0.1).unwrap().auc_roc
            })
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn degenerate_truth_is_rejected() {
        assert!(roc_pr_report(&ranked(&[1.0, 2.0]), &labels(&[true, true]), 0.1).is_err());
        assert!(roc_pr_report(&ranked(&[1.0, 2.0]), &labels(&[false, false]), 0.1).is_err());
        assert!(roc_pr_report(&ranked(&[1.0]), &labels(&[true, false]), 0.1).is_err());
    }

    #[test]
    fn truth_csv_parsing() {
        let t = TruthLabels::from_csv("# note\ngene_id,de,direction,realized_fold\na,true,up,2\nb,false,none,1\n").unwrap();
        assert_eq!(t.de, vec![true, false]);
        assert!(TruthLabels::from_csv("gene_id,de\na,maybe\n").is_err());
        let (ids, a, b) = intensities_from_csv("gene_id,intensity_a,intensity_b\nx,1.5,3\n").unwrap();
        assert_eq!((ids, a, b), (vec!["x".to_string()], vec![1.5], vec![3.0]));
    }

    proptest! {
        #[test]
        fn report_properties(flags in prop::collection::vec(any::<bool>(), 2..60), seed in 0u64..10_000) {
            prop_assume!(flags.iter().any(|&f| f) && flags.iter().any(|&f| !f));
            let mut rng = RngHandle::new(seed, 0);
            let scores: Vec<f64> = flags.iter().map(|_| (rng.random::<f64>() * 8.0).floor()).collect();
            let truth = labels(&flags);
            let r = roc_pr_report(&ranked(&scores), &truth, 0.1).unwrap();
            // strictly monotone transform of the scores
            let transformed: Vec<f64> = scores.iter().map(|s| (s * 0.5).exp() + 3.0).collect();
            let t = roc_pr_report(&ranked(&transformed), &truth, 0.1).unwrap();
            prop_assert!((r.auc_roc - t.auc_roc).abs() < 1e-12);
            prop_assert!(r.fd_curve.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(r.partial_auc_roc <= r.auc_roc + 1e-15 && r.partial_auc_pr <= r.auc_pr + 1e-15);
            let full = roc_pr_report(&ranked(&scores), &truth, 1.0).unwrap();
            prop_assert!((full.partial_auc_roc - full.auc_roc).abs() < 1e-12);
            let p = truth.n_positive();
            let ranking = ranked(&scores);
            let tp_top = ranking.genes.iter().take(p).filter(|g| truth.de[truth.gene_ids.iter().position(|id| *id == g.gene_id).unwrap()]).count();
            prop_assert_eq!(*r.fd_curve.last().unwrap() as usize, p - tp_top);
            prop_assert!(r.roc_points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        }
    }
}
