// SPDX-License-Identifier: MIT OR Apache-2.0

//! Modal difference vectors.
//!
//! A difference vector for a category pair at one layer is the mean, over
//! minimal pairs, of `state(positive) - state(negative)`. A held-out pair is
//! classified correct when the positive stimulus projects strictly higher
//! onto the vector than the negative one. The layer is chosen by k-fold
//! cross-validation over pairs; ties go to the lower median of the tied
//! layers, and the final vector is re-estimated on every pair at that layer.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::{read_f32_file, write_f32_file, ActivationArchive, MANIFEST_FILE};
use crate::category::CategoryPair;
use crate::error::{Error, Result};

/// Mean accuracies closer than this count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Two stimulus ids, the first from the positive category.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MinimalPair {
    pub positive: String,
    pub negative: String,
}

impl MinimalPair {
    pub fn new(positive: impl Into<String>, negative: impl Into<String>) -> Self {
        Self {
            positive: positive.into(),
            negative: negative.into(),
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            positive: self.negative.clone(),
            negative: self.positive.clone(),
        }
    }
}

/// Minimal pairs for one category pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSet {
    category_pair: CategoryPair,
    pairs: Vec<MinimalPair>,
}

impl PairSet {
    pub fn new(category_pair: CategoryPair, pairs: Vec<MinimalPair>) -> Self {
        Self {
            category_pair,
            pairs,
        }
    }

    pub fn category_pair(&self) -> CategoryPair {
        self.category_pair
    }

    pub fn pairs(&self) -> &[MinimalPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Same pairs with roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            category_pair: self.category_pair.swapped(),
            pairs: self.pairs.iter().map(MinimalPair::swapped).collect(),
        }
    }

    /// Archive row indices `(positive, negative)` for every pair.
    pub fn resolve(&self, archive: &ActivationArchive) -> Result<Vec<(usize, usize)>> {
        self.pairs
            .iter()
            .map(|p| Ok((archive.row_of(&p.positive)?, archive.row_of(&p.negative)?)))
            .collect()
    }
}

/// Outcome of classifying one minimal pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Correct,
    Incorrect,
}

impl Decision {
    /// Strictly positive margins are correct; ties are not.
    pub fn from_margin(margin: f64) -> Self {
        if margin > 0.0 {
            Self::Correct
        } else {
            Self::Incorrect
        }
    }

    pub fn is_correct(self) -> bool {
        self == Self::Correct
    }
}

/// Mean pair difference for one category pair at one layer (unnormalised).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceVector {
    pub category_pair: CategoryPair,
    pub layer: usize,
    pub vector: Vec<f64>,
    pub n_pairs: usize,
    /// Contributing pairs whose two states were identical.
    pub identical_pairs: usize,
    pub model_id: String,
    pub checkpoint_id: String,
}

impl DifferenceVector {
    pub fn is_zero(&self) -> bool {
        self.vector.iter().all(|x| *x == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            vector: self.vector.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }
}

/// Projection margin `(state[pos] - state[neg]) . direction` at `layer`.
pub(crate) fn pair_margin(
    archive: &ActivationArchive,
    layer: usize,
    (pos, neg): (usize, usize),
    direction: &[f64],
) -> f64 {
    let a = archive.state(layer, pos);
    let b = archive.state(layer, neg);
    a.iter()
        .zip(b)
        .zip(direction)
        .map(|((&x, &y), &v)| (f64::from(x) - f64::from(y)) * v)
        .sum()
}

fn mean_difference(
    archive: &ActivationArchive,
    layer: usize,
    rows: &[(usize, usize)],
) -> (Vec<f64>, usize) {
    let d = archive.hidden_dim();
    let mut sum = vec![0.0; d];
    let mut identical = 0;
    for &(pos, neg) in rows {
        let a = archive.state(layer, pos);
        let b = archive.state(layer, neg);
        if a == b {
            identical += 1;
        }
        for ((s, &x), &y) in sum.iter_mut().zip(a).zip(b) {
            *s += f64::from(x) - f64::from(y);
        }
    }
    let n = rows.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    (sum, identical)
}

fn check_layer(archive: &ActivationArchive, layer: usize) -> Result<()> {
    if layer >= archive.layer_count() {
        return Err(Error::Precondition(format!(
            "layer {layer} out of range for {} layers",
            archive.layer_count()
        )));
    }
    Ok(())
}

/// Mean over `pairs` of the positive-minus-negative state at `layer`.
pub fn estimate_vector(
    archive: &ActivationArchive,
    pairs: &PairSet,
    layer: usize,
) -> Result<DifferenceVector> {
    if pairs.is_empty() {
        return Err(Error::Precondition("empty pair list".into()));
    }
    check_layer(archive, layer)?;
    let rows = pairs.resolve(archive)?;
    let (vector, identical_pairs) = mean_difference(archive, layer, &rows);
    Ok(DifferenceVector {
        category_pair: pairs.category_pair(),
        layer,
        vector,
        n_pairs: rows.len(),
        identical_pairs,
        model_id: archive.model_id().to_string(),
        checkpoint_id: archive.checkpoint_id().to_string(),
    })
}

fn check_vector(v: &DifferenceVector, archive: &ActivationArchive) -> Result<()> {
    check_layer(archive, v.layer)?;
    if v.vector.len() != archive.hidden_dim() {
        return Err(Error::Precondition(format!(
            "vector has dimension {}, archive has {}",
            v.vector.len(),
            archive.hidden_dim()
        )));
    }
    if v.is_zero() {
        return Err(Error::UninformativeVector(format!(
            "{} vector at layer {} is zero",
            v.category_pair, v.layer
        )));
    }
    Ok(())
}

/// Correct iff `state[pos] . v > state[neg] . v` at the vector's layer.
pub fn classify_pair(
    v: &DifferenceVector,
    archive: &ActivationArchive,
    pos_id: &str,
    neg_id: &str,
) -> Result<Decision> {
    check_vector(v, archive)?;
    let rows = (archive.row_of(pos_id)?, archive.row_of(neg_id)?);
    Ok(Decision::from_margin(pair_margin(archive, v.layer, rows, &v.vector)))
}

/// Fraction of `pairs` classified correct by `v`.
pub fn pairwise_accuracy(
    v: &DifferenceVector,
    archive: &ActivationArchive,
    pairs: &PairSet,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Precondition("empty pair list".into()));
    }
    check_vector(v, archive)?;
    let rows = pairs.resolve(archive)?;
    Ok(accuracy_on(archive, v.layer, &rows, &v.vector))
}

pub(crate) fn accuracy_on(
    archive: &ActivationArchive,
    layer: usize,
    rows: &[(usize, usize)],
    direction: &[f64],
) -> f64 {
    let correct = rows
        .iter()
        .filter(|&&r| Decision::from_margin(pair_margin(archive, layer, r, direction)).is_correct())
        .count();
    correct as f64 / rows.len() as f64
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

/// Seeded fold assignment over pair indices.
///
/// Indices are shuffled once with ChaCha8 seeded by `seed` and cut into
/// `folds` contiguous blocks; the first `n % folds` blocks get one extra
/// pair. Every method evaluated with the same plan sees identical splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    order: Vec<usize>,
    bounds: Vec<(usize, usize)>,
}

impl FoldPlan {
    pub fn new(n_pairs: usize, folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::Precondition(format!("folds = {folds}, need at least 2")));
        }
        if n_pairs < folds {
            return Err(Error::Precondition(format!(
                "{n_pairs} pairs is fewer than {folds} folds"
            )));
        }
        let mut order: Vec<usize> = (0..n_pairs).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let base = n_pairs / folds;
        let extra = n_pairs % folds;
        let mut bounds = Vec::with_capacity(folds);
        let mut start = 0;
        for f in 0..folds {
            let len = base + usize::from(f < extra);
            bounds.push((start, start + len));
            start += len;
        }
        Ok(Self { order, bounds })
    }

    pub fn folds(&self) -> usize {
        self.bounds.len()
    }

    /// Held-out pair indices of fold `f`.
    pub fn test(&self, f: usize) -> &[usize] {
        let (a, b) = self.bounds[f];
        &self.order[a..b]
    }

    /// Training pair indices of fold `f`, in shuffled order.
    pub fn train(&self, f: usize) -> Vec<usize> {
        let (a, b) = self.bounds[f];
        self.order[..a].iter().chain(&self.order[b..]).copied().collect()
    }
}

/// Per-layer cross-validated accuracies for one category pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub category_pair: CategoryPair,
    pub folds: usize,
    pub seed: u64,
    pub n_pairs: usize,
    /// `fold_accuracies[layer][fold]`, held-out accuracy.
    pub fold_accuracies: Vec<Vec<f64>>,
    /// Unweighted mean over folds, per layer.
    pub mean_accuracy: Vec<f64>,
    pub best_layer: usize,
    /// Layers whose mean accuracy ties the maximum, ascending.
    pub tie_set: Vec<usize>,
    /// Non-fatal problems, such as zero training vectors.
    pub warnings: Vec<String>,
}

impl CvReport {
    pub fn best_accuracy(&self) -> f64 {
        self.mean_accuracy[self.best_layer]
    }
}

/// Lower median of an ascending, non-empty list.
pub fn lower_median(sorted: &[usize]) -> usize {
    sorted[(sorted.len() - 1) / 2]
}

/// Indices attaining the maximum (within [`TIE_TOLERANCE`]).
pub(crate) fn argmax_ties(values: &[f64]) -> Vec<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len())
        .filter(|&i| (values[i] - max).abs() <= TIE_TOLERANCE)
        .collect()
}

pub(crate) fn gather(rows: &[(usize, usize)], idx: &[usize]) -> Vec<(usize, usize)> {
    idx.iter().map(|&i| rows[i]).collect()
}

/// Held-out accuracy per fold for the CAA estimator at one layer.
fn layer_fold_accuracies(
    archive: &ActivationArchive,
    rows: &[(usize, usize)],
    plan: &FoldPlan,
    layer: usize,
) -> (Vec<f64>, Vec<String>) {
    let mut accs = Vec::with_capacity(plan.folds());
    let mut warnings = Vec::new();
    for f in 0..plan.folds() {
        let train = gather(rows, &plan.train(f));
        let test = gather(rows, plan.test(f));
        let (v, _) = mean_difference(archive, layer, &train);
        if v.iter().all(|x| *x == 0.0) {
            warnings.push(format!(
                "layer {layer}, fold {f}: zero training vector, held-out pairs scored incorrect"
            ));
            accs.push(0.0);
        } else {
            accs.push(accuracy_on(archive, layer, &test, &v));
        }
    }
    (accs, warnings)
}

/// Pick the layer for a category pair by `folds`-fold cross-validation.
pub fn crossval_select_layer(
    archive: &ActivationArchive,
    pairs: &PairSet,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    let plan = FoldPlan::new(pairs.len(), folds, seed)?;
    crossval_with_plan(archive, pairs, &plan, seed)
}

/// Cross-validation with a precomputed fold plan.
pub fn crossval_with_plan(
    archive: &ActivationArchive,
    pairs: &PairSet,
    plan: &FoldPlan,
    seed: u64,
) -> Result<CvReport> {
    let rows = pairs.resolve(archive)?;
    if rows.len() != plan.order.len() {
        return Err(Error::Precondition(format!(
            "fold plan covers {} pairs, pair set has {}",
            plan.order.len(),
            rows.len()
        )));
    }
    let per_layer: Vec<(Vec<f64>, Vec<String>)> = (0..archive.layer_count())
        .into_par_iter()
        .map(|layer| layer_fold_accuracies(archive, &rows, plan, layer))
        .collect();

    let mut fold_accuracies = Vec::with_capacity(per_layer.len());
    let mut warnings = Vec::new();
    for (accs, w) in per_layer {
        fold_accuracies.push(accs);
        warnings.extend(w);
    }
    let mean_accuracy: Vec<f64> = fold_accuracies
        .iter()
        .map(|a| a.iter().sum::<f64>() / a.len() as f64)
        .collect();
    let tie_set = argmax_ties(&mean_accuracy);
    Ok(CvReport {
        category_pair: pairs.category_pair(),
        folds: plan.folds(),
        seed,
        n_pairs: rows.len(),
        fold_accuracies,
        mean_accuracy,
        best_layer: lower_median(&tie_set),
        tie_set,
        warnings,
    })
}

/// Held-out accuracy with the selection step repeated inside every outer
/// training fold, so the held-out pairs never influence the choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedCv {
    pub fold_accuracies: Vec<f64>,
    /// Layer chosen on each outer training fold.
    pub fold_layers: Vec<usize>,
    /// Candidate index chosen on each outer training fold (0 for diffvec).
    pub fold_candidates: Vec<usize>,
    pub accuracy: f64,
}

/// Seed of the inner fold plan for outer fold `fold`.
pub(crate) fn inner_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// A selection step: from training rows and an inner fold plan, return the
/// chosen `(layer, candidate, direction)`.
pub(crate) fn nested_with<S>(
    archive: &ActivationArchive,
    rows: &[(usize, usize)],
    plan: &FoldPlan,
    seed: u64,
    select: S,
) -> Result<NestedCv>
where
    S: Fn(&[(usize, usize)], &FoldPlan) -> Result<(usize, usize, Vec<f64>)> + Sync,
{
    if rows.len() != plan.order.len() {
        return Err(Error::Precondition(format!(
            "fold plan covers {} pairs, pair set has {}",
            plan.order.len(),
            rows.len()
        )));
    }
    let per_fold = (0..plan.folds())
        .into_par_iter()
        .map(|f| {
            let train = gather(rows, &plan.train(f));
            let test = gather(rows, plan.test(f));
            let inner = FoldPlan::new(train.len(), plan.folds().min(train.len()), inner_seed(seed, f))?;
            let (layer, index, dir) = select(&train, &inner)?;
            Ok((accuracy_on(archive, layer, &test, &dir), layer, index))
        })
        .collect::<Result<Vec<_>>>()?;
    let fold_accuracies: Vec<f64> = per_fold.iter().map(|x| x.0).collect();
    Ok(NestedCv {
        accuracy: fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64,
        fold_accuracies,
        fold_layers: per_fold.iter().map(|x| x.1).collect(),
        fold_candidates: per_fold.iter().map(|x| x.2).collect(),
    })
}

/// Nested cross-validation of the difference-vector classifier: each outer
/// fold selects its layer by inner cross-validation on its training pairs,
/// refits there, and is scored on its held-out pairs.
pub fn nested_crossval(
    archive: &ActivationArchive,
    pairs: &PairSet,
    plan: &FoldPlan,
    seed: u64,
) -> Result<NestedCv> {
    let rows = pairs.resolve(archive)?;
    nested_with(archive, &rows, plan, seed, |train, inner| {
        let means: Vec<f64> = (0..archive.layer_count())
            .map(|l| {
                let (accs, _) = layer_fold_accuracies(archive, train, inner, l);
                accs.iter().sum::<f64>() / accs.len() as f64
            })
            .collect();
        let layer = lower_median(&argmax_ties(&means));
        Ok((layer, 0, mean_difference(archive, layer, train).0))
    })
}

/// Re-estimate the vector on every pair at the selected layer.
pub fn refit_full(
    archive: &ActivationArchive,
    pairs: &PairSet,
    cv: &CvReport,
) -> Result<DifferenceVector> {
    if cv.category_pair != pairs.category_pair() || cv.n_pairs != pairs.len() {
        return Err(Error::Precondition(
            "cross-validation report was produced from a different pair set".into(),
        ));
    }
    estimate_vector(archive, pairs, cv.best_layer)
}

/// Cross-validate and refit, or estimate directly at `layer` when given.
pub fn fit_vector(
    archive: &ActivationArchive,
    pairs: &PairSet,
    folds: usize,
    seed: u64,
    layer: Option<usize>,
) -> Result<(DifferenceVector, Option<CvReport>)> {
    match layer {
        Some(l) => Ok((estimate_vector(archive, pairs, l)?, None)),
        None => {
            let cv = crossval_select_layer(archive, pairs, folds, seed)?;
            Ok((refit_full(archive, pairs, &cv)?, Some(cv)))
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

const VECTOR_FORMAT: &str = "modalprobe-vector";
const VECTOR_BLOB: &str = "vector.f32";

#[derive(Debug, Serialize, Deserialize)]
struct VectorManifest {
    format: String,
    format_version: u32,
    positive: crate::category::Category,
    negative: crate::category::Category,
    layer: usize,
    hidden_dim: usize,
    n_pairs: usize,
    #[serde(default)]
    identical_pairs: usize,
    model_id: String,
    checkpoint_id: String,
    /// Multiplier suggested to steering consumers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    steering_multiplier: Option<f64>,
}

/// Write a vector as `manifest.json` plus a raw little-endian f32 blob.
///
/// The blob is f32, so a reloaded vector carries f32-rounded entries.
pub fn write_vector(
    v: &DifferenceVector,
    dir: impl AsRef<Path>,
    steering_multiplier: Option<f64>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let blob: Vec<f32> = v.vector.iter().map(|&x| x as f32).collect();
    write_f32_file(&dir.join(VECTOR_BLOB), &blob)?;
    let manifest = VectorManifest {
        format: VECTOR_FORMAT.into(),
        format_version: 1,
        positive: v.category_pair.positive,
        negative: v.category_pair.negative,
        layer: v.layer,
        hidden_dim: v.vector.len(),
        n_pairs: v.n_pairs,
        identical_pairs: v.identical_pairs,
        model_id: v.model_id.clone(),
        checkpoint_id: v.checkpoint_id.clone(),
        steering_multiplier,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::parse(&path, e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Load a vector written by [`write_vector`].
pub fn read_vector(dir: impl AsRef<Path>) -> Result<DifferenceVector> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: VectorManifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
    if m.format != VECTOR_FORMAT {
        return Err(Error::parse(&path, format!("unexpected format `{}`", m.format)));
    }
    if m.n_pairs == 0 {
        return Err(Error::Validation("vector manifest declares n_pairs = 0".into()));
    }
    let blob = read_f32_file(&dir.join(VECTOR_BLOB), m.hidden_dim)?;
    if blob.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("vector has non-finite entries".into()));
    }
    Ok(DifferenceVector {
        category_pair: CategoryPair::new(m.positive, m.negative)?,
        layer: m.layer,
        vector: blob.into_iter().map(f64::from).collect(),
        n_pairs: m.n_pairs,
        identical_pairs: m.identical_pairs,
        model_id: m.model_id,
        checkpoint_id: m.checkpoint_id,
    })
}
