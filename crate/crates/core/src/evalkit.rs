//! Classification metrics and Table-style comparison reports.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    /// Keyed by label name (`non_sarcastic`, `sarcastic`).
    pub per_class: BTreeMap<String, ClassMetrics>,
}

impl MetricsReport {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        &self.per_class[label.as_str()]
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Scores predictions against gold labels. A class whose precision or
/// recall denominator is zero gets 0 for that quantity.
pub fn score(predictions: &[Label], gold: &[Label]) -> Result<MetricsReport> {
    if predictions.len() != gold.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Contract("cannot score an empty prediction set".into()));
    }
    // confusion[gold][pred]
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &g) in predictions.iter().zip(gold) {
        confusion[g.index()][p.index()] += 1;
    }
    let n = gold.len();
    let mut per_class = BTreeMap::new();
    let (mut pm, mut rm, mut fm, mut pw, mut rw, mut fw) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for label in Label::ALL {
        let c = label.index();
        let tp = confusion[c][c];
        let predicted = confusion[0][c] + confusion[1][c];
        let support = confusion[c][0] + confusion[c][1];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = harmonic(precision, recall);
        let w = support as f64 / n as f64;
        pm += precision / 2.0;
        rm += recall / 2.0;
        fm += f1 / 2.0;
        pw += w * precision;
        rw += w * recall;
        fw += w * f1;
        per_class.insert(
            label.as_str().to_string(),
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            },
        );
    }
    Ok(MetricsReport {
        accuracy: ratio(confusion[0][0] + confusion[1][1], n),
        precision_macro: pm,
        recall_macro: rm,
        f1_macro: fm,
        precision_weighted: pw,
        recall_weighted: rw,
        f1_weighted: fw,
        per_class,
    })
}

/// One scored run, as written to `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub model: String,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub dataset: String,
    pub model: String,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub f1_weighted: f64,
    pub precision_sarcastic: f64,
    pub recall_sarcastic: f64,
    /// Highest macro F1 within its dataset.
    pub best: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultsRow>,
}

/// Rows ordered by dataset then model; the max-F1 row of each dataset is
/// flagged (all tied rows are flagged).
pub fn render_results_table(reports: &BTreeMap<(String, String), MetricsReport>) -> ResultsTable {
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for ((dataset, _), m) in reports {
        let e = best.entry(dataset.as_str()).or_insert(f64::NEG_INFINITY);
        *e = e.max(m.f1_macro);
    }
    let rows = reports
        .iter()
        .map(|((dataset, model), m)| {
            let sarc = m.class(Label::Sarcastic);
            ResultsRow {
                dataset: dataset.clone(),
                model: model.clone(),
                precision: m.precision_macro,
                recall: m.recall_macro,
                accuracy: m.accuracy,
                f1: m.f1_macro,
                f1_weighted: m.f1_weighted,
                precision_sarcastic: sarc.precision,
                recall_sarcastic: sarc.recall,
                best: m.f1_macro == best[dataset.as_str()],
            }
        })
        .collect();
    ResultsTable { rows }
}

impl ResultsTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Contract(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Contract(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

impl fmt::Display for ResultsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let model_w = self.rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
        let data_w = self.rows.iter().map(|r| r.dataset.len()).max().unwrap_or(7).max(7);
        writeln!(
            f,
            "{:<data_w$}  {:<model_w$}  {:>9}  {:>6}  {:>5}  {:>5}",
            "Dataset", "Model", "Precision", "Recall", "Acc.", "F1"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<data_w$}  {:<model_w$}  {:>9.2}  {:>6.2}  {:>5.2}  {:>5.2}{}",
                r.dataset,
                r.model,
                r.precision,
                r.recall,
                r.accuracy,
                r.f1,
                if r.best { " *" } else { "" }
            )?;
        }
        Ok(())
    }
}
