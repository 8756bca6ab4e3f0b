//! Score predictions and merge several runs into one comparison table.

use std::collections::BTreeMap;

use sarcfuse::corpus::Label;
use sarcfuse::evalkit::{render_results_table, score};

fn main() -> sarcfuse::Result<()> {
    let gold: Vec<Label> = (0..20).map(|i| Label::from_index(i % 2).expect("binary")).collect();
    let always_sarcastic = vec![Label::Sarcastic; gold.len()];
    let mostly_right: Vec<Label> = gold.iter().enumerate().map(|(i, l)| if i % 5 == 0 { l.flipped() } else { *l }).collect();

    let mut runs = BTreeMap::new();
    runs.insert(("toy".to_string(), "constant".to_string()), score(&always_sarcastic, &gold)?);
    runs.insert(("toy".to_string(), "oracle_80".to_string()), score(&mostly_right, &gold)?);
    let per_class = &runs[&("toy".to_string(), "constant".to_string())].per_class;
    println!("constant run per class: {}", serde_json::to_string(per_class)?);

    let table = render_results_table(&runs);
    print!("{table}");
    print!("{}", table.to_csv()?);
    Ok(())
}
