//! Count-matrix data model, delimited-text I/O and quality-control filters.
//!
//! Counts are kept exactly as read. Nothing in this crate rescales or
//! normalizes them; sequencing-depth differences are absorbed by the
//! sample-specific parameters of the models.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Nonnegative integer matrix with samples as rows and genes as columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    corner: String,
    sample_ids: Vec<String>,
    gene_ids: Vec<String>,
    counts: Vec<u64>,
}

impl CountMatrix {
    /// Builds a matrix from row-major counts (`sample_ids.len()` rows).
    pub fn new(sample_ids: Vec<String>, gene_ids: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != sample_ids.len() * gene_ids.len() {
            return Err(Error::Schema(format!(
                "{} counts for {} samples x {} genes",
                counts.len(),
                sample_ids.len(),
                gene_ids.len()
            )));
        }
        check_unique(&sample_ids, "sample")?;
        check_unique(&gene_ids, "gene")?;
        Ok(Self {
            corner: "sample".to_string(),
            sample_ids,
            gene_ids,
            counts,
        })
    }

    /// Matrix with generated ids `s1..sJ` and `g1..gK`.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n_genes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_genes) {
            return Err(Error::Schema("ragged rows".into()));
        }
        let sample_ids = (1..=rows.len()).map(|j| format!("s{j}")).collect();
        let gene_ids = (1..=n_genes).map(|k| format!("g{k}")).collect();
        Self::new(sample_ids, gene_ids, rows.concat())
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn get(&self, sample: usize, gene: usize) -> u64 {
        self.counts[sample * self.n_genes() + gene]
    }

    pub fn row(&self, sample: usize) -> &[u64] {
        let k = self.n_genes();
        &self.counts[sample * k..(sample + 1) * k]
    }

    pub fn column(&self, gene: usize) -> Vec<u64> {
        (0..self.n_samples()).map(|j| self.get(j, gene)).collect()
    }

    /// Row-major counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Per-sample totals `n_j`.
    pub fn sample_totals(&self) -> Vec<u64> {
        (0..self.n_samples()).map(|j| self.row(j).iter().sum()).collect()
    }

    /// Per-gene totals `n_.k`.
    pub fn gene_totals(&self) -> Vec<u64> {
        let mut totals = vec![0; self.n_genes()];
        for j in 0..self.n_samples() {
            for (t, &n) in totals.iter_mut().zip(self.row(j)) {
                *t += n;
            }
        }
        totals
    }

    /// Number of genes with at least one nonzero count (`K_J`).
    pub fn n_expressed(&self) -> usize {
        self.gene_totals().iter().filter(|&&t| t > 0).count()
    }

    /// Keeps the listed gene columns, in the order given.
    pub fn select_genes(&self, keep: &[usize]) -> CountMatrix {
        let mut counts = Vec::with_capacity(self.n_samples() * keep.len());
        for j in 0..self.n_samples() {
            let row = self.row(j);
            counts.extend(keep.iter().map(|&k| row[k]));
        }
        CountMatrix {
            corner: self.corner.clone(),
            sample_ids: self.sample_ids.clone(),
            gene_ids: keep.iter().map(|&k| self.gene_ids[k].clone()).collect(),
            counts,
        }
    }

    /// Same counts with new sample ids.
    pub fn with_sample_ids(mut self, sample_ids: Vec<String>) -> Result<Self> {
        if sample_ids.len() != self.n_samples() {
            return Err(Error::Schema("sample id count does not match rows".into()));
        }
        check_unique(&sample_ids, "sample")?;
        self.sample_ids = sample_ids;
        Ok(self)
    }

    /// Same counts with new gene ids.
    pub fn with_gene_ids(mut self, gene_ids: Vec<String>) -> Result<Self> {
        if gene_ids.len() != self.n_genes() {
            return Err(Error::Schema("gene id count does not match columns".into()));
        }
        check_unique(&gene_ids, "gene")?;
        self.gene_ids = gene_ids;
        Ok(self)
    }

    /// Parses delimited text: a header of gene ids (the first header cell
    /// labels the sample column), then one row per sample. Lines starting
    /// with `#` are ignored.
    pub fn parse(text: &str, delimiter: char) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .filter(|l| !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Schema("missing header row".into()))?;
        let mut cells = header.split(delimiter);
        let corner = cells.next().unwrap_or_default().to_string();
        let gene_ids: Vec<String> = cells.map(str::to_string).collect();
        if gene_ids.is_empty() {
            return Err(Error::Schema("header names no genes".into()));
        }

        let mut sample_ids = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in lines.filter(|l| !l.is_empty()).enumerate() {
            let row = i + 1;
            let mut cells = line.split(delimiter);
            sample_ids.push(cells.next().unwrap_or_default().to_string());
            let before = counts.len();
            for (g, cell) in cells.enumerate() {
                let value = cell.trim().parse::<u64>().map_err(|_| Error::Parse {
                    row,
                    gene: g + 1,
                    message: format!("{cell:?} is not a nonnegative integer"),
                })?;
                counts.push(value);
            }
            let got = counts.len() - before;
            if got != gene_ids.len() {
                return Err(Error::Parse {
                    row,
                    gene: got.min(gene_ids.len()) + 1,
                    message: format!("expected {} counts, found {got}", gene_ids.len()),
                });
            }
        }
        if sample_ids.is_empty() {
            return Err(Error::Schema("no sample rows".into()));
        }
        let mut m = Self::new(sample_ids, gene_ids, counts)?;
        m.corner = corner;
        Ok(m)
    }

    /// Renders the matrix in the layout accepted by [`CountMatrix::parse`].
    pub fn to_delimited(&self, delimiter: char) -> String {
        let mut out = String::new();
        out.push_str(&self.corner);
        for g in &self.gene_ids {
            out.push(delimiter);
            out.push_str(g);
        }
        out.push('\n');
        for (j, s) in self.sample_ids.iter().enumerate() {
            out.push_str(s);
            for n in self.row(j) {
                out.push(delimiter);
                let _ = write!(out, "{n}");
            }
            out.push('\n');
        }
        out
    }
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Schema(format!("duplicate {what} id {id:?}")));
        }
    }
    Ok(())
}

/// Delimiter implied by a file extension: `.csv` is comma, anything else tab.
pub fn delimiter_for(path: &Path) -> char {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => ',',
        _ => '\t',
    }
}

pub fn load_counts(path: impl AsRef<Path>) -> Result<CountMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CountMatrix::parse(&text, delimiter_for(path))
}

/// Writes `matrix`, optionally preceded by `#` comment lines.
pub fn write_counts(path: impl AsRef<Path>, matrix: &CountMatrix, comments: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for c in comments {
        text.push_str("# ");
        text.push_str(c);
        text.push('\n');
    }
    text.push_str(&matrix.to_delimited(delimiter_for(path)));
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Two groups of samples measured on the same genes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupedDataset {
    group_a: CountMatrix,
    group_b: CountMatrix,
}

impl GroupedDataset {
    pub fn new(group_a: CountMatrix, group_b: CountMatrix) -> Result<Self> {
        if group_a.gene_ids != group_b.gene_ids {
            return Err(Error::Mismatch(
                "groups must list the same genes in the same order".into(),
            ));
        }
        Ok(Self { group_a, group_b })
    }

    pub fn group_a(&self) -> &CountMatrix {
        &self.group_a
    }

    pub fn group_b(&self) -> &CountMatrix {
        &self.group_b
    }

    pub fn gene_ids(&self) -> &[String] {
        self.group_a.gene_ids()
    }

    pub fn n_genes(&self) -> usize {
        self.group_a.n_genes()
    }

    /// Gene totals pooled over both groups.
    pub fn pooled_totals(&self) -> Vec<u64> {
        self.group_a
            .gene_totals()
            .into_iter()
            .zip(self.group_b.gene_totals())
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn select_genes(&self, keep: &[usize]) -> GroupedDataset {
        GroupedDataset {
            group_a: self.group_a.select_genes(keep),
            group_b: self.group_b.select_genes(keep),
        }
    }

    pub fn into_parts(self) -> (CountMatrix, CountMatrix) {
        (self.group_a, self.group_b)
    }
}

/// Indices (ascending) of genes that survive dropping the lowest
/// `floor(drop_fraction * K)` pooled totals. Ties keep the earlier gene lower.
pub fn low_expression_survivors(totals: &[u64], drop_fraction: f64) -> Vec<usize> {
    let n_drop = ((drop_fraction.clamp(0.0, 1.0) * totals.len() as f64).floor() as usize)
        .min(totals.len());
    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by_key(|&k| totals[k]);
    let mut keep = order.split_off(n_drop);
    keep.sort_unstable();
    keep
}

/// Removes the `floor(drop_fraction * K)` genes with the lowest pooled totals.
pub fn filter_low_expression(data: &GroupedDataset, drop_fraction: f64) -> GroupedDataset {
    let keep = low_expression_survivors(&data.pooled_totals(), drop_fraction);
    data.select_genes(&keep)
}

/// Removes genes whose pooled total is strictly below `min_total`.
pub fn min_total_filter(data: &GroupedDataset, min_total: u64) -> GroupedDataset {
    let keep: Vec<usize> = data
        .pooled_totals()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= min_total)
        .map(|(k, _)| k)
        .collect();
    data.select_genes(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grouped(a: &[Vec<u64>], b: &[Vec<u64>]) -> GroupedDataset {
        GroupedDataset::new(
            CountMatrix::from_rows(a).unwrap(),
            CountMatrix::from_rows(b).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn parses_small_csv() {
        let m = CountMatrix::parse("sample,g1,g2,g3\ns1,0,5,2\ns2,1,0,7\n", ',').unwrap();
        assert_eq!(m.n_samples(), 2);
        assert_eq!(m.n_genes(), 3);
        assert_eq!(m.sample_totals(), vec![7, 8]);
        assert_eq!(m.gene_totals(), vec![1, 5, 9]);
        assert_eq!(m.n_expressed(), 3);
    }

    #[test]
    fn empty_data_section_is_schema_error() {
        let err = CountMatrix::parse("sample,g1,g2\n", ',').unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn negative_cell_reports_position() {
        let err = CountMatrix::parse("sample,g1,g2\ns1,4,-3\n", ',').unwrap_err();
        match err {
            Error::Parse { row, gene, .. } => assert_eq!((row, gene), (1, 2)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn non_integer_and_ragged_rows_rejected() {
        assert!(matches!(
            CountMatrix::parse("x\tg1\ns1\t1.5\n", '\t'),
            Err(Error::Parse { row: 1, gene: 1, .. })
        ));
        assert!(matches!(
            CountMatrix::parse("x\tg1\tg2\ns1\t1\n", '\t'),
            Err(Error::Parse { row: 1, gene: 2, .. })
        ));
    }

    #[test]
    fn duplicate_ids_are_schema_errors() {
        assert!(matches!(
            CountMatrix::parse("x,g1,g1\ns1,1,2\n", ','),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            CountMatrix::parse("x,g1\ns1,1\ns1,2\n", ','),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn round_trip_preserves_bytes() {
        let text = "gene\tA\tB\tC\nrep1\t0\t12\t3\nrep2\t7\t0\t0\n";
        let m = CountMatrix::parse(text, '\t').unwrap();
        assert_eq!(m.to_delimited('\t'), text);
        let crlf = text.replace('\n', "\r\n");
        assert_eq!(CountMatrix::parse(&crlf, '\t').unwrap(), m);
    }

    #[test]
    fn comments_are_skipped() {
        let m = CountMatrix::parse("# hash=abc\nsample,g1\ns1,3\n", ',').unwrap();
        assert_eq!(m.get(0, 0), 3);
    }

    #[test]
    fn zero_drop_fraction_is_identity() {
        let d = grouped(&[vec![1, 2, 3]], &[vec![0, 0, 1]]);
        assert_eq!(filter_low_expression(&d, 0.0), d);
    }

    #[test]
    fn drops_lowest_total() {
        // pooled totals 1..10 in scrambled order; the gene with total 1 is index 6
        let a = vec![vec![3, 7, 2, 9, 5, 4, 1, 10, 8, 6]];
        let b = vec![vec![0; 10]];
        let d = grouped(&a, &b);
        let f = filter_low_expression(&d, 0.1);
        assert_eq!(f.n_genes(), 9);
        assert!(!f.gene_ids().contains(&"g7".to_string()));
        let expected: Vec<String> = (1..=10).filter(|&k| k != 7).map(|k| format!("g{k}")).collect();
        assert_eq!(f.gene_ids(), expected.as_slice());
    }

    #[test]
    fn ties_dropped_in_gene_order() {
        let d = grouped(&[vec![1, 1, 1, 5]], &[vec![0, 0, 0, 0]]);
        let f = filter_low_expression(&d, 0.5);
        assert_eq!(f.gene_ids(), &["g3".to_string(), "g4".to_string()]);
    }

    #[test]
    fn ten_thousand_gene_drop_count() {
        let totals: Vec<u64> = (0..10_000).map(|k| (k * 7919 % 10_007) as u64).collect();
        assert_eq!(low_expression_survivors(&totals, 0.1).len(), 9_000);
    }

    #[test]
    fn min_total_threshold_is_strict() {
        let d = grouped(&[vec![10, 10, 0]], &[vec![9, 10, 0]]);
        let f = min_total_filter(&d, 20);
        assert_eq!(f.gene_ids(), &["g2".to_string()]);
        assert_eq!(min_total_filter(&d, 0), d);
    }

    #[test]
    fn grouped_requires_same_genes() {
        let a = CountMatrix::from_rows(&[vec![1, 2]]).unwrap();
        let b = CountMatrix::from_rows(&[vec![1, 2, 3]]).unwrap();
        assert!(matches!(GroupedDataset::new(a, b), Err(Error::Mismatch(_))));
    }

    fn small_grouped() -> impl Strategy<Value = GroupedDataset> {
        (1usize..4, 1usize..4, 1usize..12).prop_flat_map(|(ja, jb, k)| {
            (
                proptest::collection::vec(proptest::collection::vec(0u64..30, k), ja),
                proptest::collection::vec(proptest::collection::vec(0u64..30, k), jb),
            )
                .prop_map(|(a, b)| grouped(&a, &b))
        })
    }

    proptest! {
        #[test]
        fn min_total_filter_is_idempotent(d in small_grouped(), t in 0u64..60) {
            let once = min_total_filter(&d, t);
            prop_assert_eq!(min_total_filter(&once, t), once);
        }

        #[test]
        fn filtered_totals_match_recomputation(d in small_grouped(), frac in 0.0f64..0.99) {
            let totals = d.pooled_totals();
            let keep = low_expression_survivors(&totals, frac);
            let f = d.select_genes(&keep);
            let brute: Vec<u64> = keep.iter().map(|&k| totals[k]).collect();
            prop_assert_eq!(f.pooled_totals(), brute.clone());
            prop_assert_eq!(
                f.group_a().n_expressed(),
                keep.iter().filter(|&&k| d.group_a().gene_totals()[k] > 0).count()
            );
            // every dropped gene has a total no larger than every survivor
            let min_kept = brute.iter().copied().min().unwrap_or(u64::MAX);
            for k in (0..totals.len()).filter(|k| !keep.contains(k)) {
                prop_assert!(totals[k] <= min_kept);
            }
        }
    }
}
