//! Scoring of predictions produced by external systems.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::corpus::{DatasetBundle, Label};
use crate::error::{Error, Result};
use crate::evalkit::{score, MetricsReport};

#[derive(Deserialize)]
struct PredictionRecord {
    id: serde_json::Value,
    label: serde_json::Value,
}

fn id_string(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Reads a JSONL file of `{"id", "label"}` predictions, joins it on id with
/// the test split and scores it. Missing or surplus ids are errors.
pub fn import_external_predictions(path: &Path, bundle: &DatasetBundle) -> Result<MetricsReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut predicted: BTreeMap<String, Label> = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let label = Label::parse_value(&rec.label).ok_or_else(|| Error::Label {
            path: path.to_path_buf(),
            line: line_no,
            value: rec.label.to_string(),
        })?;
        let id = id_string(&rec.id);
        if predicted.insert(id.clone(), label).is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("duplicate prediction for id `{id}`"),
            });
        }
    }
    let test = bundle.test();
    let test_ids: BTreeSet<&str> = test.iter().map(|e| e.id.as_str()).collect();
    let missing: Vec<String> = test_ids.iter().filter(|id| !predicted.contains_key(**id)).map(|s| s.to_string()).collect();
    let surplus: Vec<String> = predicted.keys().filter(|id| !test_ids.contains(id.as_str())).cloned().collect();
    if !missing.is_empty() || !surplus.is_empty() {
        return Err(Error::Coverage { missing, surplus });
    }
    let preds: Vec<Label> = test.iter().map(|e| predicted[&e.id]).collect();
    let gold: Vec<Label> = test.iter().map(|e| e.label).collect();
    score(&preds, &gold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DatasetName, Example, Split};

    fn bundle() -> DatasetBundle {
        let test = (0..4)
            .map(|i| Example {
                id: format!("t{i}"),
                text: "x".into(),
                label: Label::from_index(i % 2).unwrap(),
                dataset: DatasetName::IacV2,
                split: Split::Test,
            })
            .collect();
        DatasetBundle::new(DatasetName::IacV2, Vec::new(), test).unwrap()
    }

    fn write(lines: &[String]) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), lines.join("\n")).unwrap();
        f
    }

    #[test]
    fn perfect_and_flipped_predictions() {
        let b = bundle();
        let gold: Vec<String> = (0..4).map(|i| format!("{{\"id\":\"t{i}\",\"label\":{}}}", i % 2)).collect();
        let m = import_external_predictions(write(&gold).path(), &b).unwrap();
        assert_eq!((m.accuracy, m.f1_macro), (1.0, 1.0));
        let flipped: Vec<String> = (0..4).map(|i| format!("{{\"id\":\"t{i}\",\"label\":{}}}", 1 - i % 2)).collect();
        assert_eq!(import_external_predictions(write(&flipped).path(), &b).unwrap().accuracy, 0.0);
    }

    #[test]
    fn missing_id_is_named() {
        let lines: Vec<String> = (0..3).map(|i| format!("{{\"id\":\"t{i}\",\"label\":0}}")).collect();
        match import_external_predictions(write(&lines).path(), &bundle()) {
            Err(Error::Coverage { missing, surplus }) => {
                assert_eq!(missing, vec!["t3"]);
                assert!(surplus.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_a_label_error() {
        let lines = vec!["{\"id\":\"t0\",\"label\":7}".to_string()];
        assert!(matches!(import_external_predictions(write(&lines).path(), &bundle()), Err(Error::Label { line: 1, .. })));
    }
}
