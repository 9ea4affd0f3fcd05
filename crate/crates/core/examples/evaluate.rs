//! ROC and precision-recall summaries of a ranking against known labels.
use nbdiff::eval::{label_from_intensity, roc_pr_report, TruthLabels};
use nbdiff::ranking::{GeneRanking, RankedGene};

fn main() -> nbdiff::Result<()> {
    let scores = [("g1", 9.0), ("g2", 7.5), ("g3", 7.5), ("g4", 3.0), ("g5", 1.0), ("g6", 0.2)];
    let ranking = GeneRanking::from_scores(scores.iter().map(|&(id, kl)| RankedGene { gene_id: id.into(), kl }).collect());
    let ids: Vec<String> = scores.iter().map(|(id, _)| id.to_string()).collect();

    let truth = TruthLabels::new(ids.clone(), vec![true, false, true, false, true, false])?;
    let report = roc_pr_report(&ranking, &truth, 0.5)?;
    println!("AUC-ROC {:.4}  AUC-PR {:.4}", report.auc_roc, report.auc_pr);
    println!("partial to FPR/recall 0.5: {:.4} / {:.4}", report.partial_auc_roc, report.partial_auc_pr);
    println!("false discoveries in the top N: {:?}", report.fd_curve);
    print!("{}", report.roc_csv());

    // labels from a reference assay: DE when |log2(a / b)| reaches the cutoff
    let a = [40.0, 10.0, 3.0, 12.0, 100.0, 7.0];
    let b = [10.0, 11.0, 12.0, 12.0, 20.0, 6.0];
    let truth = label_from_intensity(&ids, &a, &b, 1.5)?;
    let report = roc_pr_report(&ranking, &truth, 0.5)?;
    println!("intensity truth: {} positive, AUC-ROC {:.4}", report.n_positive, report.auc_roc);
    Ok(())
}
