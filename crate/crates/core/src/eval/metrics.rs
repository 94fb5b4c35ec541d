//! Accuracy, per-class precision/recall/F1 and the confusion matrix.

use serde::{Deserialize, Serialize};

use crate::model::ModelBundle;
use crate::text::Dataset;
use crate::{Error, Result};

/// Per-class evaluation scores with the 0/0 := 0 convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True examples of this class.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    /// `confusion[truth][predicted]`, row sums equal class support.
    pub confusion: Vec<Vec<usize>>,
    pub examples: usize,
}

impl EvalReport {
    /// Builds the report from aligned prediction/truth id slices.
    pub fn from_predictions(
        predictions: &[u32],
        truths: &[u32],
        labels: &[String],
    ) -> Result<EvalReport> {
        if predictions.len() != truths.len() {
            return Err(Error::DimMismatch {
                op: "evaluate",
                expected: format!("{} predictions", truths.len()),
                got: format!("{}", predictions.len()),
            });
        }
        if predictions.is_empty() {
            return Err(Error::InvalidInput("cannot evaluate an empty dataset".into()));
        }
        let c = labels.len();
        let mut confusion = vec![vec![0usize; c]; c];
        for (&p, &t) in predictions.iter().zip(truths) {
            if p as usize >= c || t as usize >= c {
                return Err(Error::LabelOutOfRange {
                    label: p.max(t) as usize,
                    classes: c,
                });
            }
            confusion[t as usize][p as usize] += 1;
        }
        let total = predictions.len();
        let correct: usize = (0..c).map(|i| confusion[i][i]).sum();
        let per_class = (0..c)
            .map(|i| {
                let support: usize = confusion[i].iter().sum();
                let predicted: usize = (0..c).map(|t| confusion[t][i]).sum();
                let tp = confusion[i][i];
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassScores { label: labels[i].clone(), precision, recall, f1, support }
            })
            .collect();
        Ok(EvalReport {
            accuracy: correct as f64 / total as f64,
            per_class,
            confusion,
            examples: total,
        })
    }

    pub fn f1(&self, label: &str) -> Option<f64> {
        self.per_class.iter().find(|s| s.label == label).map(|s| s.f1)
    }
}

fn ratio(num: usize, denom: usize) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

/// Runs the bundle over every example and scores argmax predictions.
pub fn evaluate(bundle: &ModelBundle, ds: &Dataset) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate an empty dataset".into()));
    }
    if ds.header.labels != bundle.labels.names() {
        return Err(Error::InvalidInput(format!(
            "dataset labels {:?} do not match bundle labels {:?}",
            ds.header.labels,
            bundle.labels.names()
        )));
    }
    let mut predictions = Vec::with_capacity(ds.len());
    let mut truths = Vec::with_capacity(ds.len());
    for e in &ds.examples {
        let dist = bundle.predict_encoded(&e.ids, e.locale, &e.features)?;
        predictions.push(dist.argmax);
        truths.push(e.label);
    }
    EvalReport::from_predictions(&predictions, &truths, &ds.header.labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn all_correct_is_all_ones() {
        let r = EvalReport::from_predictions(&[0, 1, 2], &[0, 1, 2], &labels(&["a", "b", "c"]))
            .unwrap();
        assert_eq!(r.accuracy, 1.0);
        for s in &r.per_class {
            assert_eq!(s.f1, 1.0);
        }
    }

    #[test]
    fn hand_confusion_matrix_case() {
        // predictions [A, A, B] against truth [A, B, B]:
        // accuracy 2/3, F1(A) = F1(B) = 2/3.
        let r = EvalReport::from_predictions(&[0, 0, 1], &[0, 1, 1], &labels(&["A", "B"])).unwrap();
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1("A").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1("B").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.confusion, vec![vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn absent_class_scores_zero_with_zero_support() {
        let r = EvalReport::from_predictions(&[0, 0], &[0, 0], &labels(&["a", "ghost"])).unwrap();
        let ghost = &r.per_class[1];
        assert_eq!(ghost.f1, 0.0);
        assert_eq!(ghost.support, 0);
    }

    #[test]
    fn confusion_rows_sum_to_support_and_accuracy_is_trace() {
        let preds = vec![0, 1, 1, 2, 2, 0, 1];
        let truth = vec![0, 1, 2, 2, 0, 0, 1];
        let r = EvalReport::from_predictions(&preds, &truth, &labels(&["x", "y", "z"])).unwrap();
        for (i, s) in r.per_class.iter().enumerate() {
            assert_eq!(r.confusion[i].iter().sum::<usize>(), s.support);
        }
        let trace: usize = (0..3).map(|i| r.confusion[i][i]).sum();
        assert!((r.accuracy - trace as f64 / truth.len() as f64).abs() < 1e-15);
    }

    #[test]
    fn micro_accuracy_equals_support_weighted_recall() {
        let preds = vec![0, 1, 1, 2, 0, 0, 1, 2, 2, 1];
        let truth = vec![0, 1, 2, 2, 1, 0, 1, 0, 2, 1];
        let r = EvalReport::from_predictions(&preds, &truth, &labels(&["x", "y", "z"])).unwrap();
        let weighted: f64 = r
            .per_class
            .iter()
            .map(|s| s.recall * s.support as f64)
            .sum::<f64>()
            / truth.len() as f64;
        assert!((r.accuracy - weighted).abs() < 1e-12);
    }

    #[test]
    fn evaluation_is_permutation_invariant() {
        let preds = vec![0, 1, 1, 0, 1];
        let truth = vec![0, 1, 0, 0, 1];
        let a = EvalReport::from_predictions(&preds, &truth, &labels(&["a", "b"])).unwrap();
        let perm = [4, 2, 0, 3, 1];
        let preds_p: Vec<u32> = perm.iter().map(|&i| preds[i]).collect();
        let truth_p: Vec<u32> = perm.iter().map(|&i| truth[i]).collect();
        let b = EvalReport::from_predictions(&preds_p, &truth_p, &labels(&["a", "b"])).unwrap();
        assert_eq!(a, b);
    }
}
