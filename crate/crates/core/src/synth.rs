// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic archives with planted linear structure.
//!
//! At the planted layer every category `c` is an isotropic Gaussian around
//! `mu_c = (separation / sqrt 2) * e_c`, where `e_0..e_3` are random
//! orthonormal directions. Any two category means are therefore exactly
//! `separation` apart, and the planted direction of a pair is
//! `(e_pos - e_neg) / sqrt 2`. All other layers are pure noise.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::archive::{
    write_archive, write_stimuli, ActivationArchive, FeatureRatings, HumanResponses, RatingsTable,
    ResponseSet, Stimulus, StimulusSet,
};
use crate::behavior::build_feature_space;
use crate::diffvec::{fit_vector, DifferenceVector};
use crate::category::{Category, CategoryPair};
use crate::error::{Error, Result};
use crate::numerics::{dot, norm};

/// Summed log-probabilities are centred this far below zero.
const LOGPROB_OFFSET: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub layers: usize,
    pub hidden_dim: usize,
    pub per_category: usize,
    pub planted_layer: usize,
    /// Distance between any two category means at the planted layer.
    /// Zero gives a null archive with no class structure.
    pub separation: f64,
    pub noise_sd: f64,
    /// Mean summed-log-probability gap between adjacent categories of the
    /// plausibility ordering.
    pub logprob_gap: f64,
    /// Per-stimulus log-probability noise. The expected ordering violation
    /// rate for categories `r` ranks apart is
    /// `Phi(-r * logprob_gap / (sqrt 2 * logprob_noise))`.
    pub logprob_noise: f64,
    pub seed: u64,
    pub model_id: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            layers: 6,
            hidden_dim: 32,
            per_category: 100,
            planted_layer: 3,
            separation: 10.0,
            noise_sd: 1.0,
            logprob_gap: 2.0,
            logprob_noise: 1.0,
            seed: 0,
            model_id: "synthetic".into(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Validation(format!("synth spec: {m}")));
        if self.layers == 0 {
            return fail("layers must be positive");
        }
        if self.hidden_dim < Category::ALL.len() {
            return fail("hidden_dim must be at least 4 to hold orthogonal category means");
        }
        if self.per_category == 0 {
            return fail("per_category must be positive");
        }
        if self.planted_layer >= self.layers {
            return fail("planted_layer out of range");
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return fail("separation must be finite and non-negative");
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return fail("noise_sd must be positive");
        }
        if !(self.logprob_gap >= 0.0) || !(self.logprob_noise >= 0.0) {
            return fail("log-probability gap and noise must be non-negative");
        }
        Ok(())
    }
}

/// Planted quantities, for comparing estimator output against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub planted_layer: usize,
    /// Orthonormal `e_c`, in canonical category order.
    pub category_axes: Vec<Vec<f64>>,
    /// Category means at the planted layer, canonical order.
    pub category_means: Vec<Vec<f64>>,
    pub separation: f64,
    pub noise_sd: f64,
}

impl GroundTruth {
    fn axis(&self, c: Category) -> &[f64] {
        let i = Category::ALL.iter().position(|&x| x == c).unwrap_or(0);
        &self.category_axes[i]
    }

    /// Unit direction from the negative towards the positive category mean.
    pub fn pair_direction(&self, pair: CategoryPair) -> Vec<f64> {
        let (p, n) = (self.axis(pair.positive), self.axis(pair.negative));
        p.iter()
            .zip(n)
            .map(|(a, b)| (a - b) / std::f64::consts::SQRT_2)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub archive: ActivationArchive,
    pub stimuli: StimulusSet,
    pub truth: GroundTruth,
}

impl SynthOutput {
    /// Write `archive/`, `stimuli.csv` and `ground_truth.json` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_archive(&self.archive, dir.join("archive"))?;
        write_stimuli(&self.stimuli, dir.join("stimuli.csv"))?;
        let path = dir.join("ground_truth.json");
        let text = serde_json::to_string_pretty(&self.truth)
            .map_err(|e| Error::parse(&path, e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `k` orthonormal vectors in `R^d` via Gram-Schmidt on Gaussian draws.
pub fn random_orthonormal(k: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = norm(&v);
        if n > 1e-6 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

/// Stimulus id of item `i` in category `c`.
pub fn stimulus_id(item: usize, c: Category) -> String {
    format!("item{item:04}-{c}")
}

/// Generate an archive, its stimulus table and the planted truth.
///
/// Stimuli are item-major: item `i` contributes one stimulus per category,
/// all sharing `pair_id = item{i}`, so every category pair has
/// `per_category` minimal pairs.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.hidden_dim;
    let axes = random_orthonormal(Category::ALL.len(), d, &mut rng);
    let scale = spec.separation / std::f64::consts::SQRT_2;
    let means: Vec<Vec<f64>> = axes
        .iter()
        .map(|a| a.iter().map(|x| x * scale).collect())
        .collect();

    let n = spec.per_category * Category::ALL.len();
    let mut ids = Vec::with_capacity(n);
    let mut stimuli = Vec::with_capacity(n);
    let mut logprob = Vec::with_capacity(n);
    let mut cats = Vec::with_capacity(n);
    for item in 0..spec.per_category {
        for &c in &Category::ALL {
            let id = stimulus_id(item, c);
            ids.push(id.clone());
            stimuli.push(
                Stimulus::new(id, format!("Synthetic {c} sentence number {item}."))
                    .with_category(c)
                    .with_pair(format!("item{item:04}"))
                    .with_source("synthetic"),
            );
            cats.push(c);
        }
    }
    for &c in &cats {
        let below = f64::from(3 - c.plausibility_rank());
        let lp = -LOGPROB_OFFSET - spec.logprob_gap * below + spec.logprob_noise * gaussian(&mut rng);
        logprob.push(lp.min(-1e-6));
    }

    let mut states = Vec::with_capacity(spec.layers);
    for layer in 0..spec.layers {
        let mut m = Vec::with_capacity(n * d);
        for &c in &cats {
            let ci = Category::ALL.iter().position(|&x| x == c).unwrap_or(0);
            for j in 0..d {
                let mut x = spec.noise_sd * gaussian(&mut rng);
                if layer == spec.planted_layer {
                    x += means[ci][j];
                }
                m.push(x as f32);
            }
        }
        states.push(m);
    }

    let archive = ActivationArchive::new(
        spec.model_id.clone(),
        format!("seed{}", spec.seed),
        d,
        ids,
        states,
        logprob,
    )?;
    Ok(SynthOutput {
        archive,
        stimuli: StimulusSet::new(stimuli)?,
        truth: GroundTruth {
            planted_layer: spec.planted_layer,
            category_axes: axes,
            category_means: means,
            separation: spec.separation,
            noise_sd: spec.noise_sd,
        },
    })
}

/// Reference-corpus archive: isotropic noise plus, per layer, an optional
/// dominant direction with its own standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpec {
    pub hidden_dim: usize,
    pub n: usize,
    pub noise_sd: f64,
    /// One entry per layer; `Some(u)` adds `dominant_sd * z * u` per row.
    pub dominant: Vec<Option<Vec<f64>>>,
    pub dominant_sd: f64,
    pub seed: u64,
}

pub fn generate_reference(spec: &ReferenceSpec) -> Result<ActivationArchive> {
    if spec.n == 0 || spec.hidden_dim == 0 || spec.dominant.is_empty() {
        return Err(Error::Validation(
            "reference spec needs rows, dimensions and layers".into(),
        ));
    }
    let d = spec.hidden_dim;
    // separate stream: a reference must not reuse the noise of a `generate`
    // archive built from the same seed
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let mut states = Vec::with_capacity(spec.dominant.len());
    for dom in &spec.dominant {
        if let Some(u) = dom {
            if u.len() != d {
                return Err(Error::Validation("dominant direction has wrong dimension".into()));
            }
        }
        let mut m = Vec::with_capacity(spec.n * d);
        for _ in 0..spec.n {
            let z = gaussian(&mut rng);
            for j in 0..d {
                let mut x = spec.noise_sd * gaussian(&mut rng);
                if let Some(u) = dom {
                    x += spec.dominant_sd * z * u[j];
                }
                m.push(x as f32);
            }
        }
        states.push(m);
    }
    let ids = (0..spec.n).map(|i| format!("ref{i:05}")).collect();
    ActivationArchive::new(
        "synthetic-reference",
        format!("seed{}", spec.seed),
        d,
        ids,
        states,
        vec![-LOGPROB_OFFSET; spec.n],
    )
}

/// Softmax of `weights . x + bias` for each feature row.
pub fn softmax_targets(features: &[Vec<f64>], weights: &[Vec<f64>], bias: &[f64]) -> Vec<Vec<f64>> {
    features
        .iter()
        .map(|x| {
            let logits: Vec<f64> = weights
                .iter()
                .zip(bias)
                .map(|(w, b)| dot(w, x) + b)
                .collect();
            crate::behavior::softmax(&logits)
        })
        .collect()
}

/// Human-response fixture generated by a known soft-label logistic model.
#[derive(Debug, Clone)]
pub struct SoftFixture {
    pub ids: Vec<String>,
    /// Raw features, `n x f`.
    pub features: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub responses: ResponseSet,
}

/// Labels used by generated response tables: the four categories for
/// `k = 4`, `label<i>` otherwise.
pub fn response_labels(k: usize) -> Vec<String> {
    if k == Category::ALL.len() {
        Category::ALL.iter().map(|c| c.to_string()).collect()
    } else {
        (0..k).map(|i| format!("label{i}")).collect()
    }
}

/// Draw a `k`-class generator with weights in `[-weight_scale,
/// weight_scale]` and bias in `[-0.5, 0.5]`, and apply it to `features`.
pub fn planted_responses(
    ids: &[String],
    features: &[Vec<f64>],
    k: usize,
    weight_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, ResponseSet)> {
    let f = features.first().map_or(0, Vec::len);
    if ids.is_empty() || f == 0 || k < 2 || ids.len() != features.len() {
        return Err(Error::Validation("soft fixture needs n > 0, f > 0, k >= 2".into()));
    }
    let weights: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..f).map(|_| rng.random_range(-weight_scale..=weight_scale)).collect())
        .collect();
    let bias: Vec<f64> = (0..k).map(|_| rng.random_range(-0.5..=0.5)).collect();
    let rows = ids
        .iter()
        .zip(softmax_targets(features, &weights, &bias))
        .map(|(id, t)| HumanResponses {
            stimulus_id: id.clone(),
            distribution: t,
            respondent_count: 20,
        })
        .collect();
    let responses = ResponseSet::new(response_labels(k), rows)?;
    Ok((weights, bias, responses))
}

/// Draw `n` standard-normal feature rows of width `f` and a `k`-class
/// generator; targets are the generator's softmax outputs.
pub fn soft_fixture(n: usize, f: usize, k: usize, weight_scale: f64, seed: u64) -> Result<SoftFixture> {
    if n == 0 || f == 0 || k < 2 {
        return Err(Error::Validation("soft fixture needs n > 0, f > 0, k >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..f).map(|_| gaussian(&mut rng)).collect())
        .collect();
    let ids: Vec<String> = (0..n).map(|i| format!("s{i:04}")).collect();
    let (weights, bias, responses) = planted_responses(&ids, &features, k, weight_scale, &mut rng)?;
    Ok(SoftFixture {
        ids,
        features,
        weights,
        bias,
        responses,
    })
}

/// Human data attached to a synthetic archive.
#[derive(Debug, Clone)]
pub struct PlantedHuman {
    /// The three feature-axis vectors the generator was applied to.
    pub vectors: Vec<DifferenceVector>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub responses: ResponseSet,
    /// `event_likelihood` is an affine function of the probable−improbable
    /// projection plus noise; `unrelated` is pure noise.
    pub ratings: RatingsTable,
}

/// Fit the three feature-axis vectors (cross-validated with `folds` and
/// `seed`), then generate category responses from a softmax over the
/// standardized projections, and feature ratings.
pub fn planted_human(out: &SynthOutput, folds: usize, seed: u64, weight_scale: f64) -> Result<PlantedHuman> {
    let mut vectors = Vec::with_capacity(3);
    for axis in CategoryPair::feature_axes() {
        let pairs = out.stimuli.pair_set(axis);
        vectors.push(fit_vector(&out.archive, &pairs, folds, seed, None)?.0);
    }
    let axes: [DifferenceVector; 3] = vectors.clone().try_into().expect("three axes");
    let raw = build_feature_space(&out.archive, &axes, false)?;
    let z = raw.clone().standardize()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let (weights, bias, responses) =
        planted_responses(&z.stimulus_ids, &z.features, Category::ALL.len(), weight_scale, &mut rng)?;
    let features = vec!["event_likelihood".to_string(), "unrelated".to_string()];
    let sd = z.standardization.as_ref().map_or(1.0, |s| s.std[0]);
    let rows = raw
        .stimulus_ids
        .iter()
        .zip(&raw.features)
        .map(|(id, x)| {
            let likely = 2.0 * x[0] + 1.0 + 0.3 * sd * gaussian(&mut rng);
            FeatureRatings {
                stimulus_id: id.clone(),
                ratings: features
                    .iter()
                    .cloned()
                    .zip([Some(likely), Some(gaussian(&mut rng))])
                    .collect::<BTreeMap<_, _>>(),
            }
        })
        .collect();
    Ok(PlantedHuman {
        vectors,
        weights,
        bias,
        responses,
        ratings: RatingsTable::new(features, rows)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::validate_stimuli;

    fn small() -> SynthSpec {
        SynthSpec {
            layers: 3,
            hidden_dim: 8,
            per_category: 10,
            planted_layer: 1,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn same_seed_same_archive() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.archive, b.archive);
        let c = generate(&SynthSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a.archive, c.archive);
    }

    #[test]
    fn output_is_valid_and_paired() {
        let out = generate(&small()).unwrap();
        assert_eq!(out.archive.len(), 40);
        out.archive.check_stimuli(&out.stimuli).unwrap();
        assert!(validate_stimuli(&out.stimuli, None).is_clean());
        for cp in CategoryPair::all() {
            assert_eq!(out.stimuli.pair_set(cp).len(), 10);
        }
        assert!(out.archive.summed_logprob().iter().all(|&x| x < 0.0));
    }

    #[test]
    fn means_are_separated_by_delta() {
        let out = generate(&small()).unwrap();
        let m = &out.truth.category_means;
        for i in 0..4 {
            for j in i + 1..4 {
                let diff: Vec<f64> = m[i].iter().zip(&m[j]).map(|(a, b)| a - b).collect();
                assert!((norm(&diff) - 10.0).abs() < 1e-9);
            }
        }
        for cp in CategoryPair::all() {
            assert!((norm(&out.truth.pair_direction(cp)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&SynthSpec { planted_layer: 3, ..small() }).is_err());
        assert!(generate(&SynthSpec { noise_sd: 0.0, ..small() }).is_err());
        assert!(generate(&SynthSpec { hidden_dim: 3, ..small() }).is_err());
        assert!(generate(&SynthSpec { separation: -1.0, ..small() }).is_err());
    }

    #[test]
    fn orthonormal_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = random_orthonormal(5, 9, &mut rng);
        for i in 0..5 {
            assert!((norm(&b[i]) - 1.0).abs() < 1e-12);
            for j in 0..i {
                assert!(dot(&b[i], &b[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn soft_fixture_targets_are_distributions() {
        let fx = soft_fixture(20, 3, 4, 1.5, 7).unwrap();
        for r in &fx.responses.rows {
            assert!((r.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(fx.responses.labels[0], "probable");
    }
}
