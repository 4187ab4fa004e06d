//! Descriptor vectors and the CDF normalizer fitted on a corpus.

use smiles_bert::chem::{parse_smiles, read_smiles_lines};
use smiles_bert::descriptors::{compute_descriptors, fit_normalizer, DescriptorSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let set = DescriptorSet::parse("DRUGLIKENESS_CORE")?;
    let corpus: Vec<_> = read_smiles_lines(include_str!("../data/corpus.smi"))
        .iter()
        .filter_map(|r| parse_smiles(&r.smiles).ok())
        .collect();
    let normalizer = fit_normalizer(&set, corpus.iter().map(|m| compute_descriptors(m, &set)), 0)?;
    println!("fitted on {} molecules, {} descriptors", corpus.len(), set.len());

    let aspirin = parse_smiles("CC(=O)Oc1ccccc1C(=O)O")?;
    let raw = compute_descriptors(&aspirin, &set);
    let scaled = normalizer.normalize(&raw)?;
    println!("{:<24} {:>10} {:>8}", "descriptor", "raw", "cdf");
    for ((id, r), s) in set.members().iter().zip(&raw.values).zip(&scaled) {
        println!("{:<24} {r:>10.3} {s:>8.3}", id.name());
    }
    Ok(())
}
