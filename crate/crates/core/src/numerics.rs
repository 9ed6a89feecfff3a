// SPDX-License-Identifier: MIT OR Apache-2.0

//! Numerical kernels shared by the analyses: correlation, entropy, PCA and
//! full-batch Adam.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

/// Dot product of an f32 state with an f64 direction, accumulated in f64.
pub fn dot_state(state: &[f32], direction: &[f64]) -> f64 {
    state
        .iter()
        .zip(direction)
        .map(|(&s, &v)| f64::from(s) * v)
        .sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; zero-norm inputs give `None`.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let denom = norm(a) * norm(b);
    (denom > 0.0).then(|| dot(a, b) / denom)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample Pearson correlation.
///
/// Errors on length mismatch, fewer than two points, or a constant input.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Precondition(format!(
            "pearson needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Precondition(
            "pearson needs at least two points".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Precondition("pearson input has non-finite values".into()));
    }
    let constant = |s: &[f64]| s.iter().all(|v| *v == s[0]);
    if constant(x) || constant(y) {
        return Err(Error::UndefinedCorrelation(
            "one input sequence is constant".into(),
        ));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "one input sequence has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Check that `p` is a probability vector (entries >= 0, sum 1 within 1e-9).
pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Precondition("empty distribution".into()));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Precondition(
            "distribution has negative or non-finite entries".into(),
        ));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::Precondition(format!("distribution sums to {sum}, not 1")));
    }
    Ok(())
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(-p
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>())
}

/// Mean over rows of the mean squared difference across entries.
pub fn mean_squared_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Precondition(format!(
            "mse needs equal non-empty row counts, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut total = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        if ra.len() != rb.len() || ra.is_empty() {
            return Err(Error::Precondition("mse rows differ in length".into()));
        }
        total += ra.iter().zip(rb).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / ra.len() as f64;
    }
    Ok(total / a.len() as f64)
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

/// Leading principal directions of a data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Principal {
    /// Unit-norm directions, by descending variance.
    pub directions: Vec<Vec<f64>>,
    /// Sample variance (divisor n-1) along each direction.
    pub variances: Vec<f64>,
}

/// Top-`k` principal directions of the row-major `n x d` matrix `data`.
///
/// Eigendecomposition of the column-centred sample covariance. Each
/// direction is signed so that its largest-magnitude entry is positive.
pub fn pca_directions<T>(data: &[T], n: usize, d: usize, k: usize) -> Result<Principal>
where
    T: Copy + Into<f64>,
{
    if data.len() != n * d {
        return Err(Error::Precondition(format!(
            "matrix holds {} values, expected {n}x{d}",
            data.len()
        )));
    }
    if n < 2 {
        return Err(Error::Precondition("PCA needs at least two rows".into()));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::Precondition(format!(
            "k = {k} must satisfy 1 <= k <= min(n-1, d) = {}",
            (n - 1).min(d)
        )));
    }
    let mut means = vec![0.0; d];
    for row in data.chunks_exact(d) {
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v.into();
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, d, |i, j| data[i * d + j].into() - means[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let total: f64 = cov.diagonal().iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateData("total variance is zero".into()));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut directions = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for &col in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let nrm = norm(&v);
        v.iter_mut().for_each(|x| *x /= nrm);
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        directions.push(v);
        variances.push(eig.eigenvalues[col].max(0.0));
    }
    Ok(Principal {
        directions,
        variances,
    })
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Full-batch Adam settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 200,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation("learning_rate must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Validation(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Validation("epsilon must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Validation("epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Run exactly `config.epochs` bias-corrected Adam updates from `init`.
pub fn adam_fit<G>(gradient: G, init: &[f64], config: &AdamConfig) -> Result<Vec<f64>>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    adam_fit_observed(gradient, init, config, |_, _| {})
}

/// [`adam_fit`] with a callback invoked after every epoch with the
/// 1-based epoch number and the updated parameters.
pub fn adam_fit_observed<G, O>(
    mut gradient: G,
    init: &[f64],
    config: &AdamConfig,
    mut observe: O,
) -> Result<Vec<f64>>
where
    G: FnMut(&[f64]) -> Vec<f64>,
    O: FnMut(usize, &[f64]),
{
    config.validate()?;
    let mut params = init.to_vec();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let (b1, b2) = (config.beta1, config.beta2);
    for epoch in 1..=config.epochs {
        let g = gradient(&params);
        if g.len() != params.len() {
            return Err(Error::Precondition(format!(
                "gradient has {} entries for {} parameters",
                g.len(),
                params.len()
            )));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                epoch,
                parameter_norm: norm(&params),
                what: "gradient".into(),
            });
        }
        let bc1 = 1.0 - b1.powi(epoch as i32);
        let bc2 = 1.0 - b2.powi(epoch as i32);
        for i in 0..params.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                epoch,
                parameter_norm: norm(&params),
                what: "parameters".into(),
            });
        }
        observe(epoch, &params);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pearson_fixtures() {
        assert!(close(pearson(&[1., 2., 3.], &[2., 4., 6.]).unwrap(), 1.0, 1e-12));
        assert!(close(pearson(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), -1.0, 1e-12));
        // cov = 0.5, var_x = 1, var_y = 1/3  ->  0.5 / sqrt(1/3) = sqrt(3)/2
        let r = pearson(&[1., 2., 3.], &[1., 1., 2.]).unwrap();
        assert!(close(r, 0.8660, 1e-4), "{r}");
        assert!(close(r, 3f64.sqrt() / 2.0, 1e-12));
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson(&[1., 1., 1.], &[1., 2., 3.]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(pearson(&[1., 2.], &[1., 2., 3.]), Err(Error::Precondition(_))));
        assert!(pearson(&[1.], &[1.]).is_err());
    }

    #[test]
    fn entropy_fixtures() {
        assert!(close(entropy(&[0.25; 4]).unwrap(), 4f64.ln(), 1e-12));
        assert_eq!(entropy(&[1., 0., 0., 0.]).unwrap(), 0.0);
        // 0.5 ln 2 + 2 * 0.25 ln 4 = 1.5 ln 2
        let h = entropy(&[0.5, 0.25, 0.25]).unwrap();
        assert!(close(h, 1.0397, 1e-4), "{h}");
        assert!(close(h, 1.5 * 2f64.ln(), 1e-12));
        assert!(entropy(&[0.5, 0.6]).is_err());
        assert!(entropy(&[-0.5, 1.5]).is_err());
    }

    #[test]
    fn mse_fixture() {
        let a = vec![vec![0.5, 0.5], vec![1.0, 0.0]];
        let b = vec![vec![0.5, 0.5], vec![0.0, 1.0]];
        assert!(close(mean_squared_error(&a, &b).unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn pca_diagonal_covariance() {
        // Columns uncorrelated with variances 4 and 1.
        let data = [2.0, 1.0, -2.0, 1.0, 2.0, -1.0, -2.0, -1.0];
        let p = pca_directions(&data, 4, 2, 2).unwrap();
        // Sample variance with divisor n-1: 16/3 and 4/3, ratio 4.
        assert!(close(p.directions[0][0], 1.0, 1e-12));
        assert!(close(p.directions[0][1], 0.0, 1e-12));
        assert!(close(p.variances[0], 16.0 / 3.0, 1e-12));
        assert!(close(p.variances[1], 4.0 / 3.0, 1e-12));
    }

    #[test]
    fn pca_preconditions() {
        let same = [1.0f64; 6];
        assert!(matches!(pca_directions(&same, 3, 2, 1), Err(Error::DegenerateData(_))));
        let data = [1.0, 0.0, 0.0, 1.0, 2.0, 2.0f64, 3.0, 1.0, 0.0];
        assert!(matches!(pca_directions(&data, 3, 3, 3), Err(Error::Precondition(_))));
        assert!(pca_directions(&data, 3, 3, 2).is_ok());
    }

    #[test]
    fn adam_quadratic_matches_reference() {
        // Reference: torch.optim.Adam(lr=0.01) in float64 on (w-3)^2 from 0,
        // 200 steps, ends at w = 1.6865753858747534.
        let w = adam_fit(|p| vec![2.0 * (p[0] - 3.0)], &[0.0], &AdamConfig::default()).unwrap();
        assert!(close(w[0], 1.6865753858747534, 1e-12), "{}", w[0]);
        assert!((w[0] - 3.0).powi(2) < 9.0);
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let init = [1.5, -2.0, 0.25];
        let out = adam_fit(|p| vec![0.0; p.len()], &init, &AdamConfig::default()).unwrap();
        assert_eq!(out, init);
    }

    #[test]
    fn adam_is_deterministic() {
        let g = |p: &[f64]| p.iter().map(|x| 2.0 * (x - 1.0) + x.sin()).collect();
        let a = adam_fit(g, &[0.3, -4.0], &AdamConfig::default()).unwrap();
        let b = adam_fit(g, &[0.3, -4.0], &AdamConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adam_reports_non_finite_gradient() {
        let err = adam_fit(
            |p| if p[0] < -0.02 { vec![f64::NAN] } else { vec![1.0] },
            &[0.0],
            &AdamConfig::default(),
        )
        .unwrap_err();
        match err {
            Error::NonFinite { epoch, .. } => assert!(epoch > 1),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn adam_config_rules() {
        let bad = AdamConfig { beta1: 1.0, ..AdamConfig::default() };
        assert!(bad.validate().is_err());
        let bad = AdamConfig { learning_rate: 0.0, ..AdamConfig::default() };
        assert!(bad.validate().is_err());
        let bad = AdamConfig { epochs: 0, ..AdamConfig::default() };
        assert!(bad.validate().is_err());
    }
}
