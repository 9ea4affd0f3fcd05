//! Parse a small count table, drop the least expressed genes and write it back.
use nbdiff::data::{filter_low_expression, min_total_filter, CountMatrix, GroupedDataset};

fn main() -> nbdiff::Result<()> {
    let a = CountMatrix::parse("gene1\tgene2\tgene3\tgene4\n12\t0\t340\t5\n9\t1\t410\t3\n", '\t')?;
    let b = CountMatrix::parse("gene1,gene2,gene3,gene4\n# second group is comma separated\n30,0,290,4\n25,0,388,8\n", ',')?;
    let data = GroupedDataset::new(a, b)?;
    println!("pooled totals: {:?}", data.pooled_totals());

    let kept = filter_low_expression(&data, 0.25);
    println!("after dropping the lowest 25%: {:?}", kept.gene_ids());
    let kept = min_total_filter(&data, 20);
    println!("genes with at least 20 reads: {:?}", kept.gene_ids());
    print!("{}", kept.group_a().to_delimited('\t'));
    Ok(())
}
