// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fixtures and invariant checks shared by the property tests and the
//! acceptance harness.

#![allow(dead_code)]

use modalprobe::archive::ActivationArchive;
use modalprobe::baselines::{logprob_classify_pair, LabeledPair};
use modalprobe::diffvec::{
    classify_pair, crossval_select_layer, estimate_vector, Decision, DifferenceVector, MinimalPair,
    PairSet,
};
use modalprobe::{Category, CategoryPair};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: u32 = 200;

pub fn pp() -> CategoryPair {
    CategoryPair::new(Category::Probable, Category::Impossible).unwrap()
}

/// Archive with `2 * n` rows; row `2i` is the positive and `2i + 1` the
/// negative of pair `i`. Integer states keep sums and translations exact.
pub fn int_archive(seed: u64, layers: usize, d: usize, n: usize, shift: &[f32]) -> (ActivationArchive, PairSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = 2 * n;
    let states = (0..layers)
        .map(|_| {
            (0..rows * d)
                .map(|k| rng.random_range(-50i32..=50) as f32 + shift[k % d])
                .collect()
        })
        .collect();
    let ids: Vec<String> = (0..rows).map(|i| format!("s{i}")).collect();
    let lp: Vec<f64> = (0..rows).map(|_| -rng.random_range(1.0..50.0)).collect();
    let archive = ActivationArchive::new("m", "c", d, ids, states, lp).unwrap();
    let pairs = PairSet::new(
        pp(),
        (0..n).map(|i| MinimalPair::new(format!("s{}", 2 * i), format!("s{}", 2 * i + 1))).collect(),
    );
    (archive, pairs)
}

pub fn float_archive(seed: u64, layers: usize, d: usize, n: usize) -> (ActivationArchive, PairSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = 2 * n;
    let states = (0..layers)
        .map(|_| (0..rows * d).map(|_| rng.random_range(-3.0f32..3.0)).collect())
        .collect();
    let ids: Vec<String> = (0..rows).map(|i| format!("s{i}")).collect();
    let archive = ActivationArchive::new("m", "c", d, ids, states, vec![-1.0; rows]).unwrap();
    let pairs = PairSet::new(
        pp(),
        (0..n).map(|i| MinimalPair::new(format!("s{}", 2 * i), format!("s{}", 2 * i + 1))).collect(),
    );
    (archive, pairs)
}

pub fn decisions(v: &DifferenceVector, a: &ActivationArchive, pairs: &PairSet) -> Vec<Decision> {
    pairs
        .pairs()
        .iter()
        .map(|p| classify_pair(v, a, &p.positive, &p.negative).unwrap())
        .collect()
}

pub fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}


pub fn antisymmetry_inputs() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 1usize..4, 1usize..9, 1usize..20)
}

pub fn antisymmetry((seed, layers, d, n): (u64, usize, usize, usize)) -> Result<(), TestCaseError> {
    let (a, pairs) = float_archive(seed, layers, d, n);
    let layer = (seed as usize) % layers;
    let v = estimate_vector(&a, &pairs, layer).unwrap();
    let w = estimate_vector(&a, &pairs.swapped(), layer).unwrap();
    let neg: Vec<f64> = v.vector.iter().map(|x| -x).collect();
    prop_assert_eq!(w.vector, neg);
    prop_assert_eq!(w.category_pair, v.category_pair.swapped());
    Ok(())
}


pub fn positive_scaling_inputs() -> impl Strategy<Value = (u64, usize, usize, i32, f64)> {
    (any::<u64>(), 1usize..9, 1usize..20, -30i32..30, 1e-3f64..1e3)
}

pub fn positive_scaling((seed, d, n, exp, c): (u64, usize, usize, i32, f64)) -> Result<(), TestCaseError> {
    let (a, pairs) = float_archive(seed, 1, d, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let v = DifferenceVector {
        category_pair: pp(),
        layer: 0,
        vector: random_direction(&mut rng, d),
        n_pairs: n,
        identical_pairs: 0,
        model_id: "m".into(),
        checkpoint_id: "c".into(),
    };
    let base = decisions(&v, &a, &pairs);
    // powers of two scale every product exactly
    prop_assert_eq!(&decisions(&v.scaled(2f64.powi(exp)), &a, &pairs), &base);
    // arbitrary c > 0 can only change a decision through rounding of a
    // margin that is already within a few ulps of zero
    let scaled = decisions(&v.scaled(c), &a, &pairs);
    for (p, (x, y)) in pairs.pairs().iter().zip(scaled.iter().zip(&base)) {
        if x != y {
            let i = a.row_of(&p.positive).unwrap();
            let j = a.row_of(&p.negative).unwrap();
            let m: f64 = a.state(0, i).iter().zip(a.state(0, j)).zip(&v.vector)
                .map(|((&s, &t), &w)| (f64::from(s) - f64::from(t)) * w).sum();
            prop_assert!(m.abs() < 1e-12, "decision changed with margin {m}");
        }
    }
    Ok(())
}


pub fn translation_inputs() -> impl Strategy<Value = (u64, usize, usize, usize, Vec<i32>)> {
    (any::<u64>(), 1usize..4, 1usize..9, 2usize..20, prop::collection::vec(-1000i32..1000, 8))
}

pub fn translation((seed, layers, d, n, shift): (u64, usize, usize, usize, Vec<i32>)) -> Result<(), TestCaseError> {
    let zero = vec![0.0f32; d];
    let t: Vec<f32> = shift.iter().take(d).map(|&x| x as f32).collect();
    let (a, pairs) = int_archive(seed, layers, d, n, &zero);
    let (b, _) = int_archive(seed, layers, d, n, &t);
    for layer in 0..layers {
        let va = estimate_vector(&a, &pairs, layer).unwrap();
        let vb = estimate_vector(&b, &pairs, layer).unwrap();
        prop_assert_eq!(&va.vector, &vb.vector);
        if !va.is_zero() {
            prop_assert_eq!(decisions(&va, &a, &pairs), decisions(&va, &b, &pairs));
        }
    }
    Ok(())
}


pub fn ties_incorrect_inputs() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 1usize..9)
}

pub fn ties_incorrect((seed, d): (u64, usize)) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row: Vec<f32> = (0..d).map(|_| rng.random_range(-5.0f32..5.0)).collect();
    let mut states = row.clone();
    states.extend(&row);
    let a = ActivationArchive::new("m", "c", d, vec!["p".into(), "q".into()], vec![states], vec![-1.0, -1.0]).unwrap();
    let mut dir = random_direction(&mut rng, d);
    if dir.iter().all(|x| *x == 0.0) {
        dir[0] = 1.0;
    }
    let v = DifferenceVector {
        category_pair: pp(),
        layer: 0,
        vector: dir,
        n_pairs: 1,
        identical_pairs: 0,
        model_id: "m".into(),
        checkpoint_id: "c".into(),
    };
    prop_assert_eq!(classify_pair(&v, &a, "p", "q").unwrap(), Decision::Incorrect);
    prop_assert_eq!(classify_pair(&v, &a, "q", "p").unwrap(), Decision::Incorrect);
    let lp = logprob_classify_pair(&a, &LabeledPair {
        id_a: "p".into(),
        cat_a: Category::Probable,
        id_b: "q".into(),
        cat_b: Category::Inconceivable,
    }).unwrap();
    prop_assert_eq!(lp, Decision::Incorrect);
    Ok(())
}


pub fn crossval_determinism_inputs() -> impl Strategy<Value = (u64, usize, usize, usize, usize)> {
    (any::<u64>(), 1usize..4, 1usize..6, 5usize..25, 2usize..6)
}

pub fn crossval_determinism((seed, layers, d, n, folds): (u64, usize, usize, usize, usize)) -> Result<(), TestCaseError> {
    let (a, pairs) = float_archive(seed, layers, d, n);
    let r1 = crossval_select_layer(&a, &pairs, folds, seed).unwrap();
    let r2 = crossval_select_layer(&a, &pairs, folds, seed).unwrap();
    prop_assert_eq!(r1, r2);
    Ok(())
}
