// SPDX-License-Identifier: MIT OR Apache-2.0

use modalprobe::archive::{HumanResponses, ResponseSet};
use modalprobe::baselines::{compare_methods, fit_reference_pcs, Method};
use modalprobe::behavior::{loo_predict, BehaviorConfig, FeatureSpace};
use modalprobe::diffvec::{MinimalPair, PairSet};
use modalprobe::synth::{generate, generate_reference, ReferenceSpec, SynthSpec};
use modalprobe::{Category, CategoryPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Flipping the labels of a random half of the pairs must drive every
/// method to chance on average, even on a strongly planted archive.
#[test]
fn label_shuffle_gives_chance() {
    let spec = SynthSpec {
        per_category: 30,
        ..SynthSpec::default()
    };
    let out = generate(&spec).unwrap();
    let cp = CategoryPair::new(Category::Probable, Category::Impossible).unwrap();
    let mut dominant = vec![None; spec.layers];
    dominant[spec.planted_layer] = Some(out.truth.pair_direction(cp));
    let reference = generate_reference(&ReferenceSpec {
        hidden_dim: spec.hidden_dim,
        n: 500,
        noise_sd: 1.0,
        dominant,
        dominant_sd: 5.0,
        seed: 0,
    })
    .unwrap();
    let pcs = fit_reference_pcs(&reference).unwrap();
    let base = out.stimuli.pair_set(cp);

    let shuffles = 200;
    let mut totals = [0.0; 4];
    for s in 0..shuffles {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
        let flipped: Vec<MinimalPair> = base
            .pairs()
            .iter()
            .map(|p| if rng.random_bool(0.5) { p.swapped() } else { p.clone() })
            .collect();
        let pairs = PairSet::new(cp, flipped);
        let results = compare_methods(&out.archive, &pairs, Some(&pcs), &Method::ALL, 5, s).unwrap();
        for (t, r) in totals.iter_mut().zip(&results) {
            *t += r.accuracy;
        }
    }
    for (m, t) in Method::ALL.iter().zip(totals) {
        let mean = t / shuffles as f64;
        assert!((mean - 0.5).abs() <= 0.05, "{}: mean {mean:.3}", m.as_str());
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Binary logistic regression with soft targets by Newton's method.
fn newton_logistic(x: &[f64], t: &[f64]) -> (f64, f64) {
    let (mut w, mut b) = (0.0, 0.0);
    for _ in 0..50 {
        let (mut gw, mut gb, mut hww, mut hwb, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &ti) in x.iter().zip(t) {
            let p = sigmoid(w * xi + b);
            let s = p * (1.0 - p);
            gw += (p - ti) * xi;
            gb += p - ti;
            hww += s * xi * xi;
            hwb += s * xi;
            hbb += s;
        }
        let det = hww * hbb - hwb * hwb;
        w -= (hbb * gw - hwb * gb) / det;
        b -= (hww * gb - hwb * gw) / det;
    }
    (w, b)
}

/// With two labels the soft softmax model is binary logistic regression, so
/// its leave-one-out predictions should track an independent Newton fit.
#[test]
fn two_label_loo_matches_newton() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 60;
    let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let t: Vec<f64> = x.iter().map(|&xi| sigmoid(1.0 * xi + 0.2)).collect();
    let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let features = FeatureSpace::new(ids.clone(), vec!["x".into()], x.iter().map(|&v| vec![v]).collect()).unwrap();
    let responses = ResponseSet::new(
        vec!["a".into(), "b".into()],
        ids.iter()
            .zip(&t)
            .map(|(id, &p)| HumanResponses {
                stimulus_id: id.clone(),
                distribution: vec![1.0 - p, p],
                respondent_count: 20,
            })
            .collect(),
    )
    .unwrap();
    let config = BehaviorConfig {
        standardize: false,
        ..BehaviorConfig::default()
    };
    let preds = loo_predict(&features, &responses, &config).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let (xs, ts): (Vec<f64>, Vec<f64>) = (0..n).filter(|&j| j != i).map(|j| (x[j], t[j])).unzip();
        let (w, b) = newton_logistic(&xs, &ts);
        let p = sigmoid(w * x[i] + b);
        worst = worst.max((preds.distributions[i][1] - p).abs());
    }
    assert!(worst <= 0.05, "max |adam - newton| = {worst}");
}
