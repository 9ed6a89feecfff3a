// SPDX-License-Identifier: MIT OR Apache-2.0

//! Models of human category judgements over projection features.
//!
//! Stimuli are projected onto the probable−improbable, improbable−impossible
//! and impossible−inconceivable difference vectors (each at its own layer).
//! A multinomial logistic regression is fit to the population response
//! distributions with soft-label cross-entropy, 200 epochs of full-batch
//! Adam at learning rate 0.01 from zero initialisation, and evaluated by
//! leave-one-out prediction.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::{ActivationArchive, ResponseSet};
use crate::category::CategoryPair;
use crate::diffvec::DifferenceVector;
use crate::error::{Error, Result};
use crate::numerics::{
    adam_fit, check_distribution, dot, dot_state, entropy, mean_squared_error, pearson, AdamConfig,
};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Per-column z-score parameters (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(rows: &[Vec<f64>], columns: &[String]) -> Result<Self> {
        let n = rows.len() as f64;
        let f = columns.len();
        let mut mean = vec![0.0; f];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; f];
        for r in rows {
            for j in 0..f {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
        if let Some(j) = std.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::DegenerateData(format!(
                "feature column `{}` has zero variance",
                columns[j]
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

/// Per-stimulus projection features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub stimulus_ids: Vec<String>,
    pub columns: Vec<String>,
    /// `n x columns.len()`; z-scored when `standardization` is set.
    pub features: Vec<Vec<f64>>,
    pub standardization: Option<Standardization>,
}

impl FeatureSpace {
    pub fn new(stimulus_ids: Vec<String>, columns: Vec<String>, features: Vec<Vec<f64>>) -> Result<Self> {
        if stimulus_ids.len() != features.len() {
            return Err(Error::Validation(format!(
                "{} ids for {} feature rows",
                stimulus_ids.len(),
                features.len()
            )));
        }
        if columns.is_empty() {
            return Err(Error::Validation("feature space needs at least one column".into()));
        }
        for (id, row) in stimulus_ids.iter().zip(&features) {
            if row.len() != columns.len() {
                return Err(Error::Validation(format!("feature row `{id}` has wrong width")));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("feature row `{id}` is not finite")));
            }
        }
        Ok(Self {
            stimulus_ids,
            columns,
            features,
            standardization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Z-score every column in place and record the parameters.
    pub fn standardize(mut self) -> Result<Self> {
        if self.standardization.is_some() {
            return Ok(self);
        }
        let s = Standardization::fit(&self.features, &self.columns)?;
        self.features = self.features.iter().map(|r| s.apply(r)).collect();
        self.standardization = Some(s);
        Ok(self)
    }

    /// Feature column `j` across stimuli.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[j]).collect()
    }
}

/// Raw projections of every archive row onto each vector at its layer.
pub fn project(archive: &ActivationArchive, vectors: &[DifferenceVector]) -> Result<FeatureSpace> {
    for v in vectors {
        if v.vector.len() != archive.hidden_dim() {
            return Err(Error::Precondition(format!(
                "{} vector has dimension {}, archive has {}",
                v.category_pair,
                v.vector.len(),
                archive.hidden_dim()
            )));
        }
        archive.layer(v.layer)?;
    }
    let features = (0..archive.len())
        .map(|row| {
            vectors
                .iter()
                .map(|v| dot_state(archive.state(v.layer, row), &v.vector))
                .collect()
        })
        .collect();
    FeatureSpace::new(
        archive.stimulus_ids().to_vec(),
        vectors.iter().map(|v| v.category_pair.slug()).collect(),
        features,
    )
}

/// Three-axis modal feature space.
///
/// `vectors` must be the probable−improbable, improbable−impossible and
/// impossible−inconceivable vectors, in that order, from the archive's model.
pub fn build_feature_space(
    archive: &ActivationArchive,
    vectors: &[DifferenceVector; 3],
    standardize: bool,
) -> Result<FeatureSpace> {
    for (v, axis) in vectors.iter().zip(CategoryPair::feature_axes()) {
        if v.category_pair != axis {
            return Err(Error::Precondition(format!(
                "feature column expects the {axis} vector, got {}",
                v.category_pair
            )));
        }
        if v.model_id != archive.model_id() {
            return Err(Error::Precondition(format!(
                "{} vector comes from model `{}`, archive is `{}`",
                v.category_pair,
                v.model_id,
                archive.model_id()
            )));
        }
    }
    let fs = project(archive, vectors)?;
    if standardize {
        fs.standardize()
    } else {
        Ok(fs)
    }
}

/// Multinomial logistic regression `softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLogisticModel {
    pub labels: Vec<String>,
    /// `K x F`
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
}

impl SoftLogisticModel {
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, x) + b)
            .collect();
        softmax(&logits)
    }
}

struct Problem<'a> {
    x: &'a [Vec<f64>],
    t: &'a [Vec<f64>],
    k: usize,
    f: usize,
}

impl Problem<'_> {
    fn logits(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let (w, b) = params.split_at(self.k * self.f);
        (0..self.k)
            .map(|c| dot(&w[c * self.f..(c + 1) * self.f], x) + b[c])
            .collect()
    }

    fn loss(&self, params: &[f64]) -> f64 {
        let total: f64 = self
            .x
            .iter()
            .zip(self.t)
            .map(|(x, t)| {
                let lp = log_softmax(&self.logits(params, x));
                -t.iter().zip(&lp).map(|(ti, li)| if *ti == 0.0 { 0.0 } else { ti * li }).sum::<f64>()
            })
            .sum();
        total / self.x.len() as f64
    }

    fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let (k, f) = (self.k, self.f);
        let mut g = vec![0.0; k * f + k];
        for (x, t) in self.x.iter().zip(self.t) {
            let p = softmax(&self.logits(params, x));
            for c in 0..k {
                let r = p[c] - t[c];
                for j in 0..f {
                    g[c * f + j] += r * x[j];
                }
                g[k * f + c] += r;
            }
        }
        let n = self.x.len() as f64;
        g.iter_mut().for_each(|v| *v /= n);
        g
    }
}

/// Fit on explicit rows: `x` is `n x F`, `targets` is `n x K`.
pub fn fit_rows(
    x: &[Vec<f64>],
    targets: &[Vec<f64>],
    labels: &[String],
    config: &AdamConfig,
) -> Result<SoftLogisticModel> {
    let k = labels.len();
    if k < 2 {
        return Err(Error::Precondition("label set needs at least two labels".into()));
    }
    if x.is_empty() || x.len() != targets.len() {
        return Err(Error::Precondition(format!(
            "{} feature rows for {} targets",
            x.len(),
            targets.len()
        )));
    }
    let f = x[0].len();
    for t in targets {
        if t.len() != k {
            return Err(Error::Precondition("target width differs from label count".into()));
        }
        check_distribution(t)?;
    }
    let problem = Problem { x, t: targets, k, f };
    let init = vec![0.0; k * f + k];
    let initial_loss = problem.loss(&init);
    let params = adam_fit(|p| problem.gradient(p), &init, config)?;
    let final_loss = problem.loss(&params);
    if !final_loss.is_finite() {
        return Err(Error::NonFinite {
            epoch: config.epochs,
            parameter_norm: crate::numerics::norm(&params),
            what: "loss".into(),
        });
    }
    let (w, b) = params.split_at(k * f);
    Ok(SoftLogisticModel {
        labels: labels.to_vec(),
        weights: w.chunks(f).map(<[f64]>::to_vec).collect(),
        bias: b.to_vec(),
        initial_loss,
        final_loss,
    })
}

/// Fit on a feature space, with one target distribution per stimulus.
pub fn fit_soft_logreg(
    features: &FeatureSpace,
    targets: &ResponseSet,
    config: &AdamConfig,
) -> Result<SoftLogisticModel> {
    let t = targets.aligned(&features.stimulus_ids)?;
    fit_rows(&features.features, &t, &targets.labels, config)
}

/// Leave-one-out settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorConfig {
    pub adam: AdamConfig,
    /// Z-score features on each training fold.
    pub standardize: bool,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            standardize: true,
        }
    }
}

/// Predicted distributions, aligned with `stimulus_ids`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub stimulus_ids: Vec<String>,
    pub labels: Vec<String>,
    pub distributions: Vec<Vec<f64>>,
}

/// For every stimulus, fit on all others and predict the held-out one.
pub fn loo_predict(
    features: &FeatureSpace,
    targets: &ResponseSet,
    config: &BehaviorConfig,
) -> Result<Predictions> {
    let n = features.len();
    if n < 3 {
        return Err(Error::Precondition(format!(
            "leave-one-out needs at least 3 stimuli, got {n}"
        )));
    }
    let t = targets.aligned(&features.stimulus_ids)?;
    let distributions = (0..n)
        .into_par_iter()
        .map(|i| {
            let fold = || -> Result<Vec<f64>> {
                let mut train_x: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
                let mut train_t: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
                for j in (0..n).filter(|&j| j != i) {
                    train_x.push(features.features[j].clone());
                    train_t.push(t[j].clone());
                }
                let mut held_out = features.features[i].clone();
                if config.standardize {
                    let s = Standardization::fit(&train_x, &features.columns)?;
                    train_x = train_x.iter().map(|r| s.apply(r)).collect();
                    held_out = s.apply(&held_out);
                }
                let model = fit_rows(&train_x, &train_t, &targets.labels, &config.adam)?;
                Ok(model.predict(&held_out))
            };
            fold().map_err(|e| Error::Fold {
                index: i,
                id: features.stimulus_ids[i].clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Predictions {
        stimulus_ids: features.stimulus_ids.clone(),
        labels: targets.labels.clone(),
        distributions,
    })
}

/// Agreement between predicted and empirical response distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub stimulus_ids: Vec<String>,
    pub labels: Vec<String>,
    pub predicted: Vec<Vec<f64>>,
    pub empirical: Vec<Vec<f64>>,
    pub predicted_entropy: Vec<f64>,
    pub empirical_entropy: Vec<f64>,
    /// Pearson over the first K−1 entries of every distribution, pooled
    /// across stimuli (the last label is dropped).
    pub pearson_nminus1: f64,
    /// Mean over stimuli of the mean squared difference over all K entries.
    pub mse: f64,
    /// Pearson between per-stimulus entropies.
    pub entropy_pearson: f64,
}

fn metric_error(metric: &str, e: Error) -> Error {
    match e {
        Error::UndefinedCorrelation(msg) => Error::UndefinedCorrelation(format!(
            "{metric}: {msg}; inspect the predicted and empirical distributions for constant values"
        )),
        other => other,
    }
}

pub fn evaluate_predictions(
    stimulus_ids: &[String],
    predicted: &[Vec<f64>],
    empirical: &[Vec<f64>],
    labels: &[String],
) -> Result<BehaviorReport> {
    let n = stimulus_ids.len();
    if predicted.len() != n || empirical.len() != n {
        return Err(Error::Precondition(format!(
            "{n} stimuli, {} predictions, {} empirical distributions",
            predicted.len(),
            empirical.len()
        )));
    }
    let k = labels.len();
    if k < 2 {
        return Err(Error::Precondition("label set needs at least two labels".into()));
    }
    for d in predicted.iter().chain(empirical) {
        if d.len() != k {
            return Err(Error::Precondition("distribution width differs from label count".into()));
        }
        check_distribution(d)?;
    }
    let head = |ds: &[Vec<f64>]| -> Vec<f64> { ds.iter().flat_map(|d| d[..k - 1].to_vec()).collect() };
    let pearson_nminus1 =
        pearson(&head(predicted), &head(empirical)).map_err(|e| metric_error("pearson_nminus1", e))?;
    let mse = mean_squared_error(predicted, empirical)?;
    let predicted_entropy = predicted.iter().map(|d| entropy(d)).collect::<Result<Vec<_>>>()?;
    let empirical_entropy = empirical.iter().map(|d| entropy(d)).collect::<Result<Vec<_>>>()?;
    let entropy_pearson = pearson(&predicted_entropy, &empirical_entropy)
        .map_err(|e| metric_error("entropy_pearson", e))?;
    Ok(BehaviorReport {
        stimulus_ids: stimulus_ids.to_vec(),
        labels: labels.to_vec(),
        predicted: predicted.to_vec(),
        empirical: empirical.to_vec(),
        predicted_entropy,
        empirical_entropy,
        pearson_nminus1,
        mse,
        entropy_pearson,
    })
}

/// Evaluate leave-one-out predictions against the response table.
pub fn evaluate(predictions: &Predictions, targets: &ResponseSet) -> Result<BehaviorReport> {
    if predictions.labels != targets.labels {
        return Err(Error::Precondition("prediction and target label sets differ".into()));
    }
    let empirical = targets.aligned(&predictions.stimulus_ids)?;
    evaluate_predictions(
        &predictions.stimulus_ids,
        &predictions.distributions,
        &empirical,
        &predictions.labels,
    )
}

#[derive(Serialize)]
struct MetricsSummary<'a> {
    n_stimuli: usize,
    labels: &'a [String],
    dropped_label: &'a str,
    pearson_nminus1: f64,
    mse: f64,
    entropy_pearson: f64,
}

impl BehaviorReport {
    /// Write `predictions.csv` (one row per stimulus) and `metrics.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("predictions.csv");
        let wrap = |e: csv::Error| Error::parse(&path, e.to_string());
        let mut w = csv::Writer::from_path(&path).map_err(wrap)?;
        let mut header = vec!["id".to_string()];
        header.extend(self.labels.iter().map(|l| format!("empirical_{l}")));
        header.extend(self.labels.iter().map(|l| format!("predicted_{l}")));
        header.push("empirical_entropy".into());
        header.push("predicted_entropy".into());
        w.write_record(&header).map_err(wrap)?;
        for i in 0..self.stimulus_ids.len() {
            let mut rec = vec![self.stimulus_ids[i].clone()];
            rec.extend(self.empirical[i].iter().map(|x| x.to_string()));
            rec.extend(self.predicted[i].iter().map(|x| x.to_string()));
            rec.push(self.empirical_entropy[i].to_string());
            rec.push(self.predicted_entropy[i].to_string());
            w.write_record(&rec).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let summary = MetricsSummary {
            n_stimuli: self.stimulus_ids.len(),
            labels: &self.labels,
            dropped_label: self.labels.last().map(String::as_str).unwrap_or(""),
            pearson_nminus1: self.pearson_nminus1,
            mse: self.mse,
            entropy_pearson: self.entropy_pearson,
        };
        let mpath = dir.join("metrics.json");
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::parse(&mpath, e.to_string()))?;
        fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::HumanResponses;

    fn labels(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("l{i}")).collect()
    }

    fn responses(ids: &[String], dists: &[Vec<f64>]) -> ResponseSet {
        let k = dists[0].len();
        ResponseSet::new(
            labels(k),
            ids.iter()
                .zip(dists)
                .map(|(id, d)| HumanResponses {
                    stimulus_id: id.clone(),
                    distribution: d.clone(),
                    respondent_count: 10,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[1000.0, 999.0, -5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[0] > p[1] && p[1] > p[2]);
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
    }

    #[test]
    fn uniform_targets_stay_uniform() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64 * 0.1, -1.0]).collect();
        let t = vec![vec![0.25; 4]; 10];
        let m = fit_rows(&x, &t, &labels(4), &AdamConfig::default()).unwrap();
        assert!((m.final_loss - 4f64.ln()).abs() < 1e-12);
        for row in &x {
            for p in m.predict(row) {
                assert!((p - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn separated_clusters_one_hot() {
        let mut x = Vec::new();
        let mut t = Vec::new();
        for i in 0..20 {
            let jitter = (i as f64) * 0.05;
            x.push(vec![3.0 + jitter]);
            t.push(vec![1.0, 0.0]);
            x.push(vec![-3.0 - jitter]);
            t.push(vec![0.0, 1.0]);
        }
        let m = fit_rows(&x, &t, &labels(2), &AdamConfig::default()).unwrap();
        assert!(m.final_loss <= m.initial_loss);
        for (row, target) in x.iter().zip(&t) {
            let p = m.predict(row);
            let true_class = if target[0] == 1.0 { 0 } else { 1 };
            assert!(p[true_class] >= 0.9, "{p:?}");
        }
    }

    #[test]
    fn fit_is_reproducible() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
        let t: Vec<Vec<f64>> = (0..12)
            .map(|i| softmax(&[(i as f64).sin(), 0.0, (i as f64).cos()]))
            .collect();
        let a = fit_rows(&x, &t, &labels(3), &AdamConfig::default()).unwrap();
        let b = fit_rows(&x, &t, &labels(3), &AdamConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.final_loss <= a.initial_loss);
    }

    #[test]
    fn loo_exchangeable_stimuli() {
        let ids: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        let fs = FeatureSpace::new(ids.clone(), labels(2), vec![vec![1.0, 2.0]; 5]).unwrap();
        let r = responses(&ids, &vec![vec![0.6, 0.3, 0.1]; 5]);
        let cfg = BehaviorConfig {
            standardize: false,
            ..BehaviorConfig::default()
        };
        let p = loo_predict(&fs, &r, &cfg).unwrap();
        for d in &p.distributions {
            assert_eq!(d, &p.distributions[0]);
        }
        // Constant columns cannot be standardized; the error names the fold.
        let err = loo_predict(&fs, &r, &BehaviorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Fold { index: 0, .. }), "{err}");
    }

    #[test]
    fn loo_needs_three() {
        let ids: Vec<String> = (0..2).map(|i| format!("s{i}")).collect();
        let fs = FeatureSpace::new(ids.clone(), labels(1), vec![vec![1.0], vec![2.0]]).unwrap();
        let r = responses(&ids, &vec![vec![0.5, 0.5]; 2]);
        assert!(loo_predict(&fs, &r, &BehaviorConfig::default()).is_err());
    }

    #[test]
    fn identity_metrics() {
        let ids: Vec<String> = (0..3).map(|i| format!("s{i}")).collect();
        let d = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8], vec![0.3, 0.4, 0.3]];
        let r = evaluate_predictions(&ids, &d, &d, &labels(3)).unwrap();
        assert!((r.pearson_nminus1 - 1.0).abs() < 1e-12);
        assert_eq!(r.mse, 0.0);
        assert!((r.entropy_pearson - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_prediction_mse_by_hand() {
        // K = 4, predicted uniform. Per-stimulus MSE = mean_k (e_k - 0.25)^2:
        //   [1,0,0,0]:        (0.5625 + 3 * 0.0625) / 4 = 0.1875
        //   [0.5,0.5,0,0]:    (2 * 0.0625 + 2 * 0.0625) / 4 = 0.0625
        //   [0.25,...]:       0
        // mean = 0.25 / 3
        let ids: Vec<String> = (0..3).map(|i| format!("s{i}")).collect();
        let emp = vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.25; 4],
        ];
        let pred = vec![vec![0.25; 4]; 3];
        let mse = mean_squared_error(&pred, &emp).unwrap();
        assert!((mse - 0.25 / 3.0).abs() < 1e-4);
        // The uniform prediction is constant, so the correlations are undefined.
        let err = evaluate_predictions(&ids, &pred, &emp, &labels(4)).unwrap_err();
        assert!(err.to_string().contains("inspect"), "{err}");
    }

    #[test]
    fn metrics_invariant_to_stimulus_order() {
        let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
        let pred = vec![
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.5, 0.3],
            vec![0.1, 0.1, 0.8],
            vec![0.4, 0.4, 0.2],
        ];
        let emp = vec![
            vec![0.7, 0.2, 0.1],
            vec![0.3, 0.3, 0.4],
            vec![0.0, 0.2, 0.8],
            vec![0.5, 0.25, 0.25],
        ];
        let a = evaluate_predictions(&ids, &pred, &emp, &labels(3)).unwrap();
        let perm = [2, 0, 3, 1];
        let pids: Vec<String> = perm.iter().map(|&i| ids[i].clone()).collect();
        let ppred: Vec<Vec<f64>> = perm.iter().map(|&i| pred[i].clone()).collect();
        let pemp: Vec<Vec<f64>> = perm.iter().map(|&i| emp[i].clone()).collect();
        let b = evaluate_predictions(&pids, &ppred, &pemp, &labels(3)).unwrap();
        assert!((a.pearson_nminus1 - b.pearson_nminus1).abs() < 1e-12);
        assert!((a.mse - b.mse).abs() < 1e-15);
        assert!((a.entropy_pearson - b.entropy_pearson).abs() < 1e-12);
    }

    #[test]
    fn standardized_columns() {
        let ids: Vec<String> = (0..6).map(|i| format!("s{i}")).collect();
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 3.0 + 1.0, (i as f64).powi(2)]).collect();
        let fs = FeatureSpace::new(ids, labels(2), rows).unwrap().standardize().unwrap();
        for j in 0..2 {
            let c = fs.column(j);
            let m = c.iter().sum::<f64>() / 6.0;
            let sd = (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 6.0).sqrt();
            assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
        }
    }
}
