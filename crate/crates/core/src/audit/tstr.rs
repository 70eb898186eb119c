use std::collections::HashMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::diffusion::{stream, Purpose};
use crate::error::{Error, Result};
use crate::table::Table;

pub const INCOME_COLUMN: &str = "income";
pub const POSITIVE_CLASS: &str = ">50K";

/// A binary classifier over dense row-major features.
pub trait Classifier {
    fn fit(&mut self, x: &[f64], dim: usize, y: &[bool]);
    fn predict(&self, x: &[f64], dim: usize) -> Vec<bool>;
}

/// Logistic regression fitted by full-batch gradient descent on mean log loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    pub fn new(seed: u64) -> Self {
        LogisticRegression {
            iterations: 500,
            learning_rate: 0.5,
            l2: 1e-4,
            seed,
            weights: Vec::new(),
            bias: 0.0,
        }
    }

    fn logits(&self, x: &[f64], dim: usize) -> Vec<f64> {
        x.chunks(dim)
            .map(|r| self.bias + r.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>())
            .collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Classifier for LogisticRegression {
    fn fit(&mut self, x: &[f64], dim: usize, y: &[bool]) {
        let n = y.len() as f64;
        let init = Normal::new(0.0, 0.01).unwrap();
        let mut rng = stream(self.seed, Purpose::Classifier, 0, 0, 0);
        self.weights = (0..dim).map(|_| init.sample(&mut rng)).collect();
        self.bias = 0.0;
        let mut grad = vec![0.0; dim];
        for _ in 0..self.iterations {
            grad.fill(0.0);
            let mut gb = 0.0;
            for (r, (&z, &t)) in x.chunks(dim).zip(self.logits(x, dim).iter().zip(y)) {
                let e = sigmoid(z) - t as u8 as f64;
                gb += e;
                for (g, a) in grad.iter_mut().zip(r) {
                    *g += e * a;
                }
            }
            for (w, g) in self.weights.iter_mut().zip(&grad) {
                *w -= self.learning_rate * (g / n + self.l2 * *w);
            }
            self.bias -= self.learning_rate * gb / n;
        }
    }

    fn predict(&self, x: &[f64], dim: usize) -> Vec<bool> {
        self.logits(x, dim).into_iter().map(|z| z > 0.0).collect()
    }
}

/// Standardized numerics and one-hot categoricals, income excluded.
///
/// Fitted on the training table; test categories unseen at fit time encode
/// as an all-zero block.
#[derive(Clone, Debug)]
pub struct FeatureEncoder {
    columns: Vec<EncodedColumn>,
    dim: usize,
}

#[derive(Clone, Debug)]
enum EncodedColumn {
    Numeric { name: String, mean: f64, std: f64 },
    OneHot { name: String, index: HashMap<String, usize> },
}

impl FeatureEncoder {
    pub fn fit(train: &Table, label: &str) -> Self {
        let schema = train.schema();
        let mut columns = Vec::new();
        let mut dim = 0;
        for (c, spec) in schema.columns().iter().enumerate() {
            if spec.name == label {
                continue;
            }
            if spec.is_numeric() {
                let v = train.numeric_column(c);
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
                let std = if var > 0.0 { var.sqrt() } else { 1.0 };
                columns.push(EncodedColumn::Numeric {
                    name: spec.name.clone(),
                    mean,
                    std,
                });
                dim += 1;
            } else {
                let index: HashMap<String, usize> = spec
                    .vocabulary
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v.clone(), dim + i))
                    .collect();
                dim += spec.vocabulary.len();
                columns.push(EncodedColumn::OneHot {
                    name: spec.name.clone(),
                    index,
                });
            }
        }
        FeatureEncoder { columns, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transform(&self, table: &Table) -> Result<Vec<f64>> {
        let schema = table.schema();
        let mut cols = Vec::with_capacity(self.columns.len());
        for ec in &self.columns {
            let name = match ec {
                EncodedColumn::Numeric { name, .. } | EncodedColumn::OneHot { name, .. } => name,
            };
            let idx = schema
                .index_of(name)
                .ok_or_else(|| Error::Audit(format!("table lacks feature column `{name}`")))?;
            cols.push(idx);
        }
        let mut out = vec![0.0; table.len() * self.dim];
        for (r, row) in table.rows().iter().enumerate() {
            let dst = &mut out[r * self.dim..(r + 1) * self.dim];
            let mut slot = 0;
            for (ec, &c) in self.columns.iter().zip(&cols) {
                match ec {
                    EncodedColumn::Numeric { mean, std, .. } => {
                        dst[slot] = (row[c].as_number().unwrap_or(*mean) - mean) / std;
                        slot += 1;
                    }
                    EncodedColumn::OneHot { index, .. } => {
                        if let Some(&k) = row[c]
                            .as_category()
                            .and_then(|k| index.get(table.category_name(c, k)))
                        {
                            dst[k] = 1.0;
                        }
                        slot += index.len();
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TstrResult {
    pub accuracy: f64,
    /// `[[tn, fp], [fn, tp]]` with `>50K` as the positive class.
    pub confusion: [[usize; 2]; 2],
    pub negative: ClassMetrics,
    pub positive: ClassMetrics,
    /// Training labels held a single class; predictions are the majority.
    pub degenerate: bool,
    pub classifier: String,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn class_metrics(class: &str, tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    ClassMetrics {
        class: class.to_string(),
        precision,
        recall,
        f1: f1(precision, recall),
        support: tp + fn_,
    }
}

/// Metrics from true and predicted labels (`true` = positive class).
pub fn evaluate(truth: &[bool], pred: &[bool], negative: &str, positive: &str) -> (f64, [[usize; 2]; 2], ClassMetrics, ClassMetrics) {
    let mut m = [[0usize; 2]; 2];
    for (&t, &p) in truth.iter().zip(pred) {
        m[t as usize][p as usize] += 1;
    }
    let [[tn, fp], [fn_, tp]] = m;
    (
        ratio(tn + tp, truth.len()),
        m,
        class_metrics(negative, tn, fn_, fp),
        class_metrics(positive, tp, fp, fn_),
    )
}

fn labels(table: &Table, label: &str) -> Result<Vec<bool>> {
    let c = table
        .schema()
        .index_of(label)
        .ok_or_else(|| Error::Audit(format!("TSTR needs label column `{label}`")))?;
    if table.schema().column(c).is_numeric() {
        return Err(Error::Audit(format!("label column `{label}` must be categorical")));
    }
    Ok(table
        .category_codes(c)
        .into_iter()
        .map(|k| table.category_name(c, k) == POSITIVE_CLASS)
        .collect())
}

/// Train on `train`, score on `test`, with the built-in logistic regression.
pub fn tstr(train: &Table, test: &Table, seed: u64) -> Result<TstrResult> {
    tstr_with(train, test, &mut LogisticRegression::new(seed), "logistic-regression")
}

pub fn tstr_with(
    train: &Table,
    test: &Table,
    classifier: &mut dyn Classifier,
    classifier_name: &str,
) -> Result<TstrResult> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::Audit("TSTR needs nonempty train and test tables".into()));
    }
    let y_train = labels(train, INCOME_COLUMN)?;
    let y_test = labels(test, INCOME_COLUMN)?;
    let positives = y_train.iter().filter(|&&y| y).count();
    let degenerate = positives == 0 || positives == y_train.len();
    let negative_name = {
        let c = test.schema().index_of(INCOME_COLUMN).unwrap();
        test.schema().column(c)
            .vocabulary
            .iter()
            .find(|v| v.as_str() != POSITIVE_CLASS)
            .cloned()
            .unwrap_or_else(|| "<=50K".into())
    };
    let pred = if degenerate {
        vec![positives > 0; test.len()]
    } else {
        let enc = FeatureEncoder::fit(train, INCOME_COLUMN);
        classifier.fit(&enc.transform(train)?, enc.dim(), &y_train);
        classifier.predict(&enc.transform(test)?, enc.dim())
    };
    let (accuracy, confusion, negative, positive) =
        evaluate(&y_test, &pred, &negative_name, POSITIVE_CLASS);
    Ok(TstrResult {
        accuracy,
        confusion,
        negative,
        positive,
        degenerate,
        classifier: classifier_name.to_string(),
    })
}
