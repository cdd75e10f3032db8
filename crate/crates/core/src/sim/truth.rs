//! Sampling the plant's true trajectory.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{OspError, Result};
use crate::kalman::{propagate_estimate, InputSchedule};
use crate::linalg::{CovMatrix, Matrix, Vector};
use crate::model::SystemModel;

/// Diagonal jitter, relative to the largest diagonal entry, tried once when
/// the covariance is only semidefinite.
const JITTER: f64 = 1e-12;

/// Lower factor `L` with `L Lᵀ ≈ cov`. `None` when the covariance is zero.
pub fn gaussian_factor(cov: &CovMatrix) -> Result<Option<Matrix>> {
    let m = cov.as_matrix();
    let scale = m.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if scale == 0.0 {
        return Ok(None);
    }
    if let Some(ch) = m.clone().cholesky() {
        return Ok(Some(ch.l()));
    }
    let n = m.nrows();
    let jittered = m + Matrix::identity(n, n) * (JITTER * scale);
    jittered
        .cholesky()
        .map(|ch| Some(ch.l()))
        .ok_or_else(|| OspError::Numeric("covariance factorization failed after jitter".into()))
}

/// Zero-mean Gaussian draw with covariance `L Lᵀ`.
pub fn sample_gaussian<R: Rng + ?Sized>(factor: Option<&Matrix>, dim: usize, rng: &mut R) -> Vector {
    match factor {
        None => Vector::zeros(dim),
        Some(l) => {
            let z = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            l * z
        }
    }
}

/// `x(t) = Φ(s,t)x(s) + (input term) + ν(s,t)`, `ν ~ N(0, Q(s,t))`.
pub fn step_true_state<R: Rng + ?Sized>(
    model: &SystemModel,
    x: &Vector,
    inputs: &InputSchedule,
    s: f64,
    t: f64,
    rng: &mut R,
) -> Result<Vector> {
    let mean = propagate_estimate(model, x, inputs, s, t)?;
    if s == t {
        return Ok(mean);
    }
    let noise = model.process_noise_cov(s, t)?;
    let factor = gaussian_factor(&noise)?;
    Ok(mean + sample_gaussian(factor.as_ref(), model.state_dim(), rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(a: f64, q: f64) -> SystemModel {
        SystemModel::new(
            Matrix::from_element(1, 1, a),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, q),
            Matrix::from_element(1, 1, 0.1),
            0.01,
            vec![0.01],
        )
        .unwrap()
    }

    #[test]
    fn noiseless_step_is_exact_transition() {
        let m = scalar(-2.0, 0.0);
        let x = Vector::from_element(1, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = step_true_state(&m, &x, &InputSchedule::Zero, 0.0, 0.5, &mut rng).unwrap();
        let want = m.transition_phi(0.0, 0.5).unwrap() * &x;
        assert!((got[0] - want[0]).abs() <= 1e-14 * want[0].abs());
    }

    #[test]
    fn integrator_variance_matches_closed_form() {
        let (q, dt) = (0.4, 0.25);
        let m = scalar(0.0, q);
        let x = Vector::zeros(1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| step_true_state(&m, &x, &InputSchedule::Zero, 0.0, dt, &mut rng).unwrap()[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / (q * dt) - 1.0).abs() < 0.05, "var = {var}");
    }

    #[test]
    fn same_seed_same_trajectory() {
        let m = scalar(-1.0, 0.3);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = Vector::from_element(1, 1.0);
            for i in 0..20 {
                let s = i as f64 * 0.01;
                x = step_true_state(&m, &x, &InputSchedule::Zero, s, s + 0.01, &mut rng).unwrap();
            }
            x
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn semidefinite_covariance_uses_jitter() {
        let cov = CovMatrix::checked(Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        let l = gaussian_factor(&cov).unwrap().unwrap();
        let back = &l * l.transpose();
        assert!((back - cov.as_matrix()).abs().max() < 1e-6);
        assert!(gaussian_factor(&CovMatrix::zeros(2)).unwrap().is_none());
    }
}
