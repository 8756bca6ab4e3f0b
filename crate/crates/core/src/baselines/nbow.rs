//! Averaged-word-vector logistic regression.

use nalgebra::{DMatrix, DVector};

use super::spec::BaselineSpec;
use crate::corpus::{DatasetBundle, Example, Label};
use crate::error::{Error, Result};
use crate::evalkit::{score, MetricsReport};
use crate::lexical::{word_tokenize, EmbeddingTable, Provenance, Vocabulary};

/// Mean of the vectors of the text's words that have a pretrained (or
/// stem-matched) vector; the zero vector when none do.
pub fn sentence_vector(text: &str, vocab: &Vocabulary, table: &EmbeddingTable) -> Vec<f64> {
    let mut sum = vec![0f64; table.dim()];
    let mut n = 0usize;
    for tok in word_tokenize(text) {
        let Some(i) = vocab.index(&tok) else { continue };
        if !matches!(table.provenance(i), Provenance::Pretrained | Provenance::StemmedFallback) {
            continue;
        }
        for (s, &v) in sum.iter_mut().zip(table.row(i)) {
            *s += v as f64;
        }
        n += 1;
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    sum
}

/// Binary logistic regression fit by Newton's method on
/// `0.5·‖w‖² + C·Σ logloss`; the intercept is not penalized.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticRegression {
    pub weights: DVector<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log1pexp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl LogisticRegression {
    pub fn fit(x: &DMatrix<f64>, y: &[Label], c: f64, tol: f64, max_iter: usize) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 || n != y.len() {
            return Err(Error::EmptyCorpus("logistic regression needs labelled rows".into()));
        }
        // augmented design with a trailing intercept column
        let xa = x.clone().insert_column(d, 1.0);
        let t = DVector::from_iterator(n, y.iter().map(|l| l.index() as f64));
        let mut beta = DVector::<f64>::zeros(d + 1);
        let objective = |b: &DVector<f64>| -> f64 {
            let z = &xa * b;
            let reg = 0.5 * b.rows(0, d).norm_squared();
            reg + c * z.iter().zip(t.iter()).map(|(&zi, &ti)| log1pexp(zi) - ti * zi).sum::<f64>()
        };
        let mut iterations = 0;
        for it in 0..max_iter {
            iterations = it + 1;
            let z = &xa * &beta;
            let p = z.map(sigmoid);
            let mut grad = xa.transpose() * (&p - &t) * c;
            for j in 0..d {
                grad[j] += beta[j];
            }
            if grad.amax() < tol {
                break;
            }
            let s = p.map(|pi| c * pi * (1.0 - pi));
            let mut h = xa.transpose() * DMatrix::from_diagonal(&s) * &xa;
            for j in 0..d {
                h[(j, j)] += 1.0;
            }
            // tiny ridge on the intercept keeps the system positive definite
            h[(d, d)] += 1e-12;
            let step = h
                .cholesky()
                .ok_or_else(|| Error::Contract("logistic regression Hessian is not positive definite".into()))?
                .solve(&grad);
            let f0 = objective(&beta);
            let slope = grad.dot(&step);
            let mut alpha = 1.0;
            loop {
                let cand = &beta - &step * alpha;
                if objective(&cand) <= f0 - 1e-4 * alpha * slope || alpha < 1e-10 {
                    beta = cand;
                    break;
                }
                alpha *= 0.5;
            }
        }
        Ok(LogisticRegression {
            weights: beta.rows(0, d).into_owned(),
            intercept: beta[d],
            iterations,
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<Label> {
        let z = x * &self.weights;
        z.iter()
            .map(|&zi| {
                if zi + self.intercept > 0.0 {
                    Label::Sarcastic
                } else {
                    Label::NonSarcastic
                }
            })
            .collect()
    }
}

fn design(examples: &[Example], vocab: &Vocabulary, table: &EmbeddingTable) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = examples.iter().map(|e| sentence_vector(&e.text, vocab, table)).collect();
    DMatrix::from_fn(rows.len(), table.dim(), |i, j| rows[i][j])
}

/// Fits on the train split and scores the test split. `vocab`/`table` are
/// the lookup for the pretrained vectors.
pub fn nbow_train_eval(
    bundle: &DatasetBundle,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    spec: &BaselineSpec,
) -> Result<MetricsReport> {
    if bundle.train().is_empty() {
        return Err(Error::EmptyCorpus("train split".into()));
    }
    let x = design(bundle.train(), vocab, table);
    let y: Vec<Label> = bundle.train().iter().map(|e| e.label).collect();
    let model = LogisticRegression::fit(
        &x,
        &y,
        spec.f64("l2_strength")?,
        spec.f64("tolerance")?,
        spec.usize("max_iterations")?,
    )?;
    let test = bundle.test();
    let preds = model.predict(&design(test, vocab, table));
    let gold: Vec<Label> = test.iter().map(|e| e.label).collect();
    score(&preds, &gold)
}
