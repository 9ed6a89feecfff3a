// SPDX-License-Identifier: MIT OR Apache-2.0

//! Comparison classifiers: summed log-probability ordering, principal
//! components of a reference corpus, and random directions.
//!
//! Direction baselines share the difference-vector cross-validation: for
//! each fold the orientation of every candidate direction is fit on the
//! training pairs and accuracy is measured on the held-out pairs. Reported
//! method accuracies are nested: the candidate is chosen inside each outer
//! training fold.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::{read_f32_file, write_f32_file, ActivationArchive, MANIFEST_FILE};
use crate::category::{Category, CategoryPair};
use crate::diffvec::{
    accuracy_on, argmax_ties, crossval_with_plan, gather, lower_median, nested_crossval, nested_with,
    pair_margin, CvReport, Decision, FoldPlan, NestedCv, PairSet,
};
use crate::error::{Error, Result};
use crate::numerics::{dot, norm, pca_directions, Principal};
use crate::synth::gaussian;

/// Number of reference principal components kept per layer.
pub const REFERENCE_COMPONENTS: usize = 3;

/// Default cap on reference-corpus sentences.
pub const REFERENCE_SENTENCE_CAP: usize = 2000;

/// Expected order of sentence probability, least to most probable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoryOrdering;

impl CategoryOrdering {
    pub const ORDER: [Category; 4] = [
        Category::Inconceivable,
        Category::Impossible,
        Category::Improbable,
        Category::Probable,
    ];

    /// Whether `a` is expected to be more probable than `b`.
    pub fn ranks_higher(a: Category, b: Category) -> bool {
        a.plausibility_rank() > b.plausibility_rank()
    }
}

/// Two stimuli with their categories, for the log-probability baseline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPair {
    pub id_a: String,
    pub cat_a: Category,
    pub id_b: String,
    pub cat_b: Category,
}

fn logprob_decision(archive: &ActivationArchive, (a, b): (usize, usize), ca: Category, cb: Category) -> Decision {
    let lp = archive.summed_logprob();
    let (hi, lo) = if CategoryOrdering::ranks_higher(ca, cb) { (a, b) } else { (b, a) };
    Decision::from_margin(lp[hi] - lp[lo])
}

/// Correct iff the stimulus of the more probable category has strictly
/// greater summed log-probability.
pub fn logprob_classify_pair(archive: &ActivationArchive, pair: &LabeledPair) -> Result<Decision> {
    if pair.cat_a == pair.cat_b {
        return Err(Error::Precondition(format!(
            "log-probability comparison needs distinct categories, both are {}",
            pair.cat_a
        )));
    }
    let rows = (archive.row_of(&pair.id_a)?, archive.row_of(&pair.id_b)?);
    Ok(logprob_decision(archive, rows, pair.cat_a, pair.cat_b))
}

fn logprob_accuracy(archive: &ActivationArchive, rows: &[(usize, usize)], cp: CategoryPair) -> f64 {
    let correct = rows
        .iter()
        .filter(|&&r| logprob_decision(archive, r, cp.positive, cp.negative).is_correct())
        .count();
    correct as f64 / rows.len() as f64
}

/// Log-probability accuracy over a pair set.
pub fn logprob_pairwise_accuracy(archive: &ActivationArchive, pairs: &PairSet) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Precondition("empty pair list".into()));
    }
    let rows = pairs.resolve(archive)?;
    Ok(logprob_accuracy(archive, &rows, pairs.category_pair()))
}

/// Held-out log-probability accuracy per fold. Nothing is trained; the folds
/// only make the numbers comparable with the other methods.
pub fn logprob_fold_accuracies(
    archive: &ActivationArchive,
    pairs: &PairSet,
    plan: &FoldPlan,
) -> Result<Vec<f64>> {
    let rows = pairs.resolve(archive)?;
    Ok((0..plan.folds())
        .map(|f| logprob_accuracy(archive, &gather(&rows, plan.test(f)), pairs.category_pair()))
        .collect())
}

// ---------------------------------------------------------------------------
// Reference principal components
// ---------------------------------------------------------------------------

/// Top principal directions of a reference corpus, per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDirections {
    pub source: String,
    pub layers: Vec<Principal>,
}

impl ReferenceDirections {
    pub fn hidden_dim(&self) -> usize {
        self.layers
            .first()
            .and_then(|p| p.directions.first())
            .map_or(0, Vec::len)
    }

    pub fn negated(&self, layer: usize, index: usize) -> Self {
        let mut out = self.clone();
        out.layers[layer].directions[index].iter_mut().for_each(|x| *x = -*x);
        out
    }
}

/// Top-3 principal components of every layer of the reference archive.
pub fn fit_reference_pcs(reference: &ActivationArchive) -> Result<ReferenceDirections> {
    let (n, d) = (reference.len(), reference.hidden_dim());
    let layers = (0..reference.layer_count())
        .into_par_iter()
        .map(|l| {
            pca_directions(reference.layer(l)?, n, d, REFERENCE_COMPONENTS).map_err(|e| match e {
                Error::DegenerateData(m) => Error::DegenerateData(format!("layer {l}: {m}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReferenceDirections {
        source: format!("{}@{}", reference.model_id(), reference.checkpoint_id()),
        layers,
    })
}

#[derive(Serialize, Deserialize)]
struct ReferenceManifest {
    format: String,
    format_version: u32,
    source: String,
    layer_count: usize,
    components: usize,
    hidden_dim: usize,
    variances: Vec<Vec<f64>>,
}

const REFERENCE_FORMAT: &str = "modalprobe-reference-pcs";

/// Write as `manifest.json` plus `layer_<l>.f32` (k x d, row-major).
pub fn write_reference(dirs: &ReferenceDirections, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (l, p) in dirs.layers.iter().enumerate() {
        let flat: Vec<f32> = p.directions.iter().flatten().map(|&x| x as f32).collect();
        write_f32_file(&dir.join(format!("layer_{l}.f32")), &flat)?;
    }
    let m = ReferenceManifest {
        format: REFERENCE_FORMAT.into(),
        format_version: 1,
        source: dirs.source.clone(),
        layer_count: dirs.layers.len(),
        components: dirs.layers.first().map_or(0, |p| p.directions.len()),
        hidden_dim: dirs.hidden_dim(),
        variances: dirs.layers.iter().map(|p| p.variances.clone()).collect(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&m).map_err(|e| Error::parse(&path, e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_reference(dir: impl AsRef<Path>) -> Result<ReferenceDirections> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: ReferenceManifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
    if m.format != REFERENCE_FORMAT || m.variances.len() != m.layer_count {
        return Err(Error::parse(&path, "not a reference-direction manifest"));
    }
    let mut layers = Vec::with_capacity(m.layer_count);
    for (l, variances) in m.variances.into_iter().enumerate() {
        let flat = read_f32_file(&dir.join(format!("layer_{l}.f32")), m.components * m.hidden_dim)?;
        let directions = flat
            .chunks(m.hidden_dim.max(1))
            .map(|c| c.iter().map(|&x| f64::from(x)).collect())
            .collect();
        layers.push(Principal { directions, variances });
    }
    Ok(ReferenceDirections {
        source: m.source,
        layers,
    })
}

// ---------------------------------------------------------------------------
// Direction baselines
// ---------------------------------------------------------------------------

/// Sign making a fixed direction agree with the training pairs: the one with
/// higher training accuracy; ties go to the sign of the summed margin, then
/// to +1. Negating the direction negates the chosen sign.
fn fit_orientation(archive: &ActivationArchive, layer: usize, train: &[(usize, usize)], u: &[f64]) -> f64 {
    let mut plus = 0usize;
    let mut minus = 0usize;
    let mut total = 0.0;
    for &r in train {
        let m = pair_margin(archive, layer, r, u);
        total += m;
        if m > 0.0 {
            plus += 1;
        } else if m < 0.0 {
            minus += 1;
        }
    }
    match plus.cmp(&minus) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => -1.0,
        std::cmp::Ordering::Equal if total < 0.0 => -1.0,
        std::cmp::Ordering::Equal => 1.0,
    }
}

/// Cross-validated score of one fixed direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub layer: usize,
    pub index: usize,
    pub fold_accuracies: Vec<f64>,
    pub fold_orientations: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Outcome of a direction-baseline selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSelection {
    pub layer: usize,
    /// Candidate index within the layer (principal-component index for the
    /// PC baseline, always 0 for random directions).
    pub index: usize,
    /// Sign fit on all pairs for the selected direction.
    pub orientation: f64,
    /// Per-layer view: each layer's best candidate.
    pub report: CvReport,
    pub candidates: Vec<CandidateScore>,
}

impl DirectionSelection {
    pub fn accuracy(&self) -> f64 {
        self.report.best_accuracy()
    }
}

fn check_candidates(archive: &ActivationArchive, candidates: &[Vec<Vec<f64>>]) -> Result<()> {
    if candidates.len() != archive.layer_count() {
        return Err(Error::Precondition(format!(
            "{} candidate layers for an archive with {}",
            candidates.len(),
            archive.layer_count()
        )));
    }
    if candidates.iter().any(Vec::is_empty) {
        return Err(Error::Precondition("every layer needs at least one candidate".into()));
    }
    for dirs in candidates {
        for u in dirs {
            if u.len() != archive.hidden_dim() {
                return Err(Error::Precondition(format!(
                    "candidate direction has dimension {}, archive has {}",
                    u.len(),
                    archive.hidden_dim()
                )));
            }
        }
    }
    Ok(())
}

fn score_candidates(
    archive: &ActivationArchive,
    rows: &[(usize, usize)],
    plan: &FoldPlan,
    candidates: &[Vec<Vec<f64>>],
) -> Vec<CandidateScore> {
    let jobs: Vec<(usize, usize)> = candidates
        .iter()
        .enumerate()
        .flat_map(|(l, dirs)| (0..dirs.len()).map(move |i| (l, i)))
        .collect();
    jobs.par_iter()
        .map(|&(layer, index)| {
            let u = &candidates[layer][index];
            let mut fold_accuracies = Vec::with_capacity(plan.folds());
            let mut fold_orientations = Vec::with_capacity(plan.folds());
            for f in 0..plan.folds() {
                let train = gather(rows, &plan.train(f));
                let test = gather(rows, plan.test(f));
                let s = fit_orientation(archive, layer, &train, u);
                let oriented: Vec<f64> = u.iter().map(|x| x * s).collect();
                fold_accuracies.push(accuracy_on(archive, layer, &test, &oriented));
                fold_orientations.push(s);
            }
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / plan.folds() as f64;
            CandidateScore {
                layer,
                index,
                fold_accuracies,
                fold_orientations,
                mean_accuracy,
            }
        })
        .collect()
}

/// `(layer, index, tied layers)` of the winning candidate.
fn choose(scores: &[CandidateScore]) -> (usize, usize, Vec<usize>) {
    let means: Vec<f64> = scores.iter().map(|s| s.mean_accuracy).collect();
    let tied: Vec<&CandidateScore> = argmax_ties(&means).into_iter().map(|i| &scores[i]).collect();
    let mut tie_layers: Vec<usize> = tied.iter().map(|s| s.layer).collect();
    tie_layers.dedup();
    let layer = lower_median(&tie_layers);
    let index = tied
        .iter()
        .filter(|s| s.layer == layer)
        .map(|s| s.index)
        .min()
        .unwrap_or(0);
    (layer, index, tie_layers)
}

/// Cross-validate fixed candidate directions (`candidates[layer]` lists the
/// directions available at that layer) and select one.
///
/// Selection maximises mean held-out accuracy; ties go to the lower median
/// of the tied layers, then the lowest candidate index in that layer.
pub fn select_direction(
    archive: &ActivationArchive,
    pairs: &PairSet,
    plan: &FoldPlan,
    seed: u64,
    candidates: &[Vec<Vec<f64>>],
) -> Result<DirectionSelection> {
    check_candidates(archive, candidates)?;
    let rows = pairs.resolve(archive)?;
    let scores = score_candidates(archive, &rows, plan, candidates);
    let (layer, index, tie_layers) = choose(&scores);

    let mut fold_accuracies = Vec::with_capacity(candidates.len());
    let mut mean_accuracy = Vec::with_capacity(candidates.len());
    for l in 0..candidates.len() {
        let best = scores
            .iter()
            .filter(|s| s.layer == l)
            .fold(None::<&CandidateScore>, |acc, s| match acc {
                Some(a) if a.mean_accuracy >= s.mean_accuracy => Some(a),
                _ => Some(s),
            })
            .expect("every layer has a candidate");
        let chosen = if l == layer {
            scores.iter().find(|s| s.layer == l && s.index == index).unwrap_or(best)
        } else {
            best
        };
        fold_accuracies.push(chosen.fold_accuracies.clone());
        mean_accuracy.push(chosen.mean_accuracy);
    }
    let orientation = fit_orientation(archive, layer, &rows, &candidates[layer][index]);
    Ok(DirectionSelection {
        layer,
        index,
        orientation,
        report: CvReport {
            category_pair: pairs.category_pair(),
            folds: plan.folds(),
            seed,
            n_pairs: rows.len(),
            fold_accuracies,
            mean_accuracy,
            best_layer: layer,
            tie_set: tie_layers,
            warnings: Vec::new(),
        },
        candidates: scores,
    })
}

/// Nested cross-validation of a direction baseline: each outer fold picks
/// its candidate and orientation from its training pairs only.
pub fn nested_direction(
    archive: &ActivationArchive,
    pairs: &PairSet,
    plan: &FoldPlan,
    seed: u64,
    candidates: &[Vec<Vec<f64>>],
) -> Result<NestedCv> {
    check_candidates(archive, candidates)?;
    let rows = pairs.resolve(archive)?;
    nested_with(archive, &rows, plan, seed, |train, inner| {
        let (layer, index, _) = choose(&score_candidates(archive, train, inner, candidates));
        let u = &candidates[layer][index];
        let s = fit_orientation(archive, layer, train, u);
        Ok((layer, index, u.iter().map(|x| x * s).collect()))
    })
}

/// PC baseline: the candidates are the reference components of each layer.
pub fn pc_baseline_select(
    archive: &ActivationArchive,
    pairs: &PairSet,
    directions: &ReferenceDirections,
    folds: usize,
    seed: u64,
) -> Result<DirectionSelection> {
    let plan = FoldPlan::new(pairs.len(), folds, seed)?;
    pc_baseline_with_plan(archive, pairs, directions, &plan, seed)
}

pub fn pc_baseline_with_plan(
    archive: &ActivationArchive,
    pairs: &PairSet,
    directions: &ReferenceDirections,
    plan: &FoldPlan,
    seed: u64,
) -> Result<DirectionSelection> {
    if directions.layers.len() != archive.layer_count() {
        return Err(Error::Precondition(format!(
            "reference has {} layers, archive has {}",
            directions.layers.len(),
            archive.layer_count()
        )));
    }
    let candidates: Vec<Vec<Vec<f64>>> =
        directions.layers.iter().map(|p| p.directions.clone()).collect();
    select_direction(archive, pairs, plan, seed, &candidates)
}

/// One unit direction per layer with standard-normal entries, drawn from a
/// ChaCha8 stream keyed by `seed` (separate from the fold shuffle). When
/// `orthogonal_to` is non-empty the draws are projected off those
/// directions before normalising.
pub fn random_directions(
    layers: usize,
    d: usize,
    seed: u64,
    orthogonal_to: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    if orthogonal_to.len() >= d {
        return Err(Error::Precondition(
            "cannot draw a direction orthogonal to a spanning set".into(),
        ));
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for u in orthogonal_to {
        let mut v = u.clone();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = norm(&v);
        if n > 1e-12 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut out = Vec::with_capacity(layers);
    while out.len() < layers {
        let mut v: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = norm(&v);
        if n > 1e-12 {
            v.iter_mut().for_each(|x| *x /= n);
            out.push(v);
        }
    }
    Ok(out)
}

/// Random-direction selection plus the directions that were scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSelection {
    pub directions: Vec<Vec<f64>>,
    pub selection: DirectionSelection,
}

pub fn random_baseline_select(
    archive: &ActivationArchive,
    pairs: &PairSet,
    folds: usize,
    seed: u64,
) -> Result<RandomSelection> {
    let plan = FoldPlan::new(pairs.len(), folds, seed)?;
    random_baseline_with_plan(archive, pairs, &plan, seed, &[])
}

pub fn random_baseline_with_plan(
    archive: &ActivationArchive,
    pairs: &PairSet,
    plan: &FoldPlan,
    seed: u64,
    orthogonal_to: &[Vec<f64>],
) -> Result<RandomSelection> {
    let directions = random_directions(archive.layer_count(), archive.hidden_dim(), seed, orthogonal_to)?;
    let candidates: Vec<Vec<Vec<f64>>> = directions.iter().map(|u| vec![u.clone()]).collect();
    let selection = select_direction(archive, pairs, plan, seed, &candidates)?;
    Ok(RandomSelection {
        directions,
        selection,
    })
}

// ---------------------------------------------------------------------------
// Paired comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Diffvec,
    Logprob,
    Pc,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Diffvec, Method::Logprob, Method::Pc, Method::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Diffvec => "diffvec",
            Self::Logprob => "logprob",
            Self::Pc => "pc",
            Self::Random => "random",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffvec" => Ok(Self::Diffvec),
            "logprob" => Ok(Self::Logprob),
            "pc" => Ok(Self::Pc),
            "random" => Ok(Self::Random),
            other => Err(Error::Validation(format!("unknown method `{other}`"))),
        }
    }
}

/// Held-out accuracy of one method on one category pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub category_pair: CategoryPair,
    /// Nested cross-validated accuracy; equal to the plain fold mean for
    /// log-probability, which selects nothing.
    pub accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    /// Cross-validated accuracy of the candidate chosen on all pairs. The
    /// choice saw the held-out folds, so this is optimistic.
    pub selection_accuracy: f64,
    /// Layer and candidate chosen on all pairs.
    pub layer: Option<usize>,
    pub index: Option<usize>,
}

fn direction_result(
    method: Method,
    archive: &ActivationArchive,
    pairs: &PairSet,
    plan: &FoldPlan,
    seed: u64,
    candidates: &[Vec<Vec<f64>>],
) -> Result<MethodResult> {
    let sel = select_direction(archive, pairs, plan, seed, candidates)?;
    let nested = nested_direction(archive, pairs, plan, seed, candidates)?;
    Ok(MethodResult {
        method,
        category_pair: pairs.category_pair(),
        accuracy: nested.accuracy,
        fold_accuracies: nested.fold_accuracies,
        selection_accuracy: sel.accuracy(),
        layer: Some(sel.layer),
        index: Some(sel.index),
    })
}

/// Evaluate the requested methods on one fold plan, so the comparison is
/// paired. The PC method is skipped when no reference is supplied.
pub fn compare_methods(
    archive: &ActivationArchive,
    pairs: &PairSet,
    reference: Option<&ReferenceDirections>,
    methods: &[Method],
    folds: usize,
    seed: u64,
) -> Result<Vec<MethodResult>> {
    let plan = FoldPlan::new(pairs.len(), folds, seed)?;
    let cp = pairs.category_pair();
    let mut out = Vec::new();
    for &method in methods {
        let result = match method {
            Method::Diffvec => {
                let cv = crossval_with_plan(archive, pairs, &plan, seed)?;
                let nested = nested_crossval(archive, pairs, &plan, seed)?;
                MethodResult {
                    method,
                    category_pair: cp,
                    accuracy: nested.accuracy,
                    fold_accuracies: nested.fold_accuracies,
                    selection_accuracy: cv.best_accuracy(),
                    layer: Some(cv.best_layer),
                    index: None,
                }
            }
            Method::Logprob => {
                let accs = logprob_fold_accuracies(archive, pairs, &plan)?;
                let mean = accs.iter().sum::<f64>() / accs.len() as f64;
                MethodResult {
                    method,
                    category_pair: cp,
                    accuracy: mean,
                    fold_accuracies: accs,
                    selection_accuracy: mean,
                    layer: None,
                    index: None,
                }
            }
            Method::Pc => {
                let Some(reference) = reference else { continue };
                if reference.layers.len() != archive.layer_count() {
                    return Err(Error::Precondition(format!(
                        "reference has {} layers, archive has {}",
                        reference.layers.len(),
                        archive.layer_count()
                    )));
                }
                let candidates: Vec<Vec<Vec<f64>>> =
                    reference.layers.iter().map(|p| p.directions.clone()).collect();
                direction_result(method, archive, pairs, &plan, seed, &candidates)?
            }
            Method::Random => {
                let dirs = random_directions(archive.layer_count(), archive.hidden_dim(), seed, &[])?;
                let candidates: Vec<Vec<Vec<f64>>> = dirs.into_iter().map(|u| vec![u]).collect();
                direction_result(method, archive, pairs, &plan, seed, &candidates)?
            }
        };
        out.push(result);
    }
    Ok(out)
}
