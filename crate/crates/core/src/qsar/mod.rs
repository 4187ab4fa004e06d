//! Property prediction on top of the encoder: kernel SVMs on frozen
//! embeddings, or fine-tuning with a fresh linear head.

mod finetune;
mod svm;

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use finetune::{finetune, FinetuneConfig, FinetuneResult, LinearHead};
pub use svm::{rbf, scale_gamma, svm_fit_classify, svm_fit_regress, KernelMachine, SvmConfig, SvmKind};

use crate::evalbench::{auroc, mean_std, EvalError};

#[derive(Debug, Error)]
pub enum QsarError {
    #[error("classifier needs both classes in the training data")]
    SingleClass,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("empty {0} split")]
    EmptyFold(&'static str),
    #[error("{file}:{line}: {message}")]
    Data { file: String, line: usize, message: String },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Regression,
    Classification,
}

impl FromStr for TaskType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regression" => Ok(TaskType::Regression),
            "classification" => Ok(TaskType::Classification),
            _ => Err(format!("unknown task '{s}' (regression, classification)")),
        }
    }
}

/// Index lists of one cross-validation split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsarDataset {
    pub smiles: Vec<String>,
    pub labels: Vec<f64>,
    /// Fold id per molecule when the file provides one.
    pub fold_ids: Option<Vec<usize>>,
}

impl QsarDataset {
    /// CSV with header and columns `smiles,label[,fold]`.
    pub fn parse_csv(text: &str, file: &str) -> Result<QsarDataset, QsarError> {
        let err = |line: usize, message: String| QsarError::Data {
            file: file.into(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let has_fold = match cols.as_slice() {
            ["smiles", "label"] => false,
            ["smiles", "label", "fold"] => true,
            _ => return Err(err(1, format!("expected header smiles,label[,fold], got '{header}'"))),
        };
        let mut ds = QsarDataset {
            smiles: Vec::new(),
            labels: Vec::new(),
            fold_ids: has_fold.then(Vec::new),
        };
        for (i, line) in lines {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != cols.len() {
                return Err(err(i + 1, format!("expected {} fields, got {}", cols.len(), f.len())));
            }
            let label: f64 = f[1]
                .parse()
                .map_err(|_| err(i + 1, format!("label '{}' is not a number", f[1])))?;
            if !label.is_finite() {
                return Err(err(i + 1, "non-finite label".into()));
            }
            crate::chem::parse_smiles(f[0]).map_err(|e| err(i + 1, format!("{}: {e}", f[0])))?;
            ds.smiles.push(f[0].to_string());
            ds.labels.push(label);
            if let Some(folds) = &mut ds.fold_ids {
                folds.push(f[2].parse().map_err(|_| err(i + 1, format!("fold '{}' is not an integer", f[2])))?);
            }
        }
        if ds.smiles.is_empty() {
            return Err(err(2, "no data rows".into()));
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.smiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smiles.is_empty()
    }

    /// Class labels (label > 0.5).
    pub fn classes(&self) -> Vec<u8> {
        self.labels.iter().map(|&l| (l > 0.5) as u8).collect()
    }

    /// Cross-validation splits. Split k tests on fold k and validates on
    /// fold k+1 (cyclically); without a fold column the molecules are dealt
    /// into `k` seeded folds.
    pub fn folds(&self, k: usize, seed: u64) -> Vec<Fold> {
        let ids: Vec<usize> = match &self.fold_ids {
            Some(f) => {
                let mut distinct: Vec<usize> = f.clone();
                distinct.sort_unstable();
                distinct.dedup();
                f.iter().map(|x| distinct.binary_search(x).unwrap()).collect()
            }
            None => {
                let mut order: Vec<usize> = (0..self.len()).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let mut ids = vec![0; self.len()];
                for (r, &i) in order.iter().enumerate() {
                    ids[i] = r % k.max(1);
                }
                ids
            }
        };
        let k = ids.iter().max().map_or(0, |m| m + 1);
        (0..k)
            .map(|f| {
                let val = if k > 1 { (f + 1) % k } else { usize::MAX };
                let pick = |want: &dyn Fn(usize) -> bool| (0..ids.len()).filter(|&i| want(ids[i])).collect();
                Fold {
                    test: pick(&|x| x == f),
                    validation: pick(&|x| x == val),
                    train: pick(&|x| x != f && x != val),
                }
            })
            .collect()
    }
}

pub fn rmse(pred: &[f64], y: &[f64]) -> f64 {
    let n = pred.len().max(1) as f64;
    (pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n).sqrt()
}

/// AUROC of decision values against {0,1} labels.
pub fn classification_auroc(decision: &[f64], y: &[f64]) -> Result<f64, QsarError> {
    let labels: Vec<bool> = y.iter().map(|&v| v > 0.5).collect();
    Ok(auroc(decision, &labels)?)
}

/// The metric for a task: RMSE for regression, AUROC for classification.
pub fn task_metric(task: TaskType, pred: &[f64], y: &[f64]) -> Result<f64, QsarError> {
    match task {
        TaskType::Regression => Ok(rmse(pred, y)),
        TaskType::Classification => classification_auroc(pred, y),
    }
}

pub fn metric_name(task: TaskType) -> &'static str {
    match task {
        TaskType::Regression => "rmse",
        TaskType::Classification => "auroc",
    }
}

/// Per-fold rows then `mean` and `std` rows; header `fold,metric,value`.
pub fn metrics_csv(task: TaskType, per_fold: &[f64]) -> String {
    let name = metric_name(task);
    let mut out = String::from("fold,metric,value\n");
    for (i, v) in per_fold.iter().enumerate() {
        let _ = writeln!(out, "{i},{name},{v:.6}");
    }
    let (m, s) = mean_std(per_fold);
    let _ = writeln!(out, "mean,{name},{m:.6}");
    let _ = writeln!(out, "std,{name},{s:.6}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_basics() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(rmse(&[2.0, 3.0], &[1.0, 2.0]), 1.0);
    }

    #[test]
    fn csv_and_folds() {
        let ds = QsarDataset::parse_csv("smiles,label,fold\nCCO,1.5,0\nCCN,2,1\nCCC,0,2\nCCCl,1,0\n", "d.csv").unwrap();
        let folds = ds.folds(5, 0);
        assert_eq!(folds.len(), 3);
        assert_eq!(folds[0].test, vec![0, 3]);
        assert_eq!(folds[0].validation, vec![1]);
        assert_eq!(folds[0].train, vec![2]);
        let bad = QsarDataset::parse_csv("smiles,label\nCCO,abc\n", "d.csv").unwrap_err();
        assert_eq!(bad.to_string(), "d.csv:2: label 'abc' is not a number");
        assert!(QsarDataset::parse_csv("smi,y\n", "d.csv").is_err());
    }

    #[test]
    fn dealt_folds_partition() {
        let text: String = std::iter::once("smiles,label\n".to_string())
            .chain((0..23).map(|i| format!("{},{}\n", "C".repeat(i + 1), i)))
            .collect();
        let ds = QsarDataset::parse_csv(&text, "d.csv").unwrap();
        let folds = ds.folds(5, 9);
        assert_eq!(folds.len(), 5);
        let mut tests: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        tests.sort_unstable();
        assert_eq!(tests, (0..23).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.train.len() + f.validation.len() + f.test.len(), 23);
        }
    }
}
