//! Continuous-time LTI plant observed by scalar sensors at their own periods.

use crate::error::{OspError, Result};
use crate::linalg::{self, CovMatrix, Matrix, Vector};

/// `x' = A x + B u + v`, `y = C x + w`, with decision period `T` and one
/// sampling period per observer.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    q: CovMatrix,
    r: Vec<f64>,
    period: f64,
    observer_periods: Vec<f64>,
}

/// Discretization of the plant over one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub phi: Matrix,
    pub noise: CovMatrix,
}

impl SystemModel {
    /// Validates every dimension and sign constraint.
    ///
    /// `r` is the full observation-noise covariance; it must be diagonal,
    /// because each observation is fused as an independent scalar update.
    pub fn new(
        a: Matrix,
        b: Matrix,
        c: Matrix,
        q: Matrix,
        r: Matrix,
        period: f64,
        observer_periods: Vec<f64>,
    ) -> Result<Self> {
        let s = a.nrows();
        if s == 0 || !a.is_square() {
            return Err(OspError::Dimension(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        linalg::ensure_finite(&a, "A")?;
        if b.nrows() != s {
            return Err(OspError::Dimension(format!(
                "B must have {s} rows, got {}",
                b.nrows()
            )));
        }
        linalg::ensure_finite(&b, "B")?;
        let n = c.nrows();
        if c.ncols() != s {
            return Err(OspError::Dimension(format!(
                "C must have {s} columns, got {}",
                c.ncols()
            )));
        }
        linalg::ensure_finite(&c, "C")?;
        if q.nrows() != s || q.ncols() != s {
            return Err(OspError::Dimension(format!(
                "Q must be {s}x{s}, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        let q = CovMatrix::checked(q).map_err(|e| OspError::Domain(format!("Q: {e}")))?;
        if r.nrows() != n || r.ncols() != n {
            return Err(OspError::Dimension(format!(
                "R must be {n}x{n}, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        linalg::ensure_finite(&r, "R")?;
        for i in 0..n {
            for j in 0..n {
                if i != j && r[(i, j)] != 0.0 {
                    return Err(OspError::Domain(format!(
                        "R must be diagonal (observations are fused as independent scalar \
                         updates), but R[{i}][{j}] = {}",
                        r[(i, j)]
                    )));
                }
            }
        }
        let r_diag: Vec<f64> = (0..n).map(|i| r[(i, i)]).collect();
        if let Some((i, v)) = r_diag.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(OspError::Domain(format!(
                "R diagonal must be nonnegative, R[{i}][{i}] = {v}"
            )));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(OspError::Domain(format!(
                "decision period must be positive, got {period}"
            )));
        }
        if observer_periods.len() != n {
            return Err(OspError::Dimension(format!(
                "expected {n} observer periods (one per row of C), got {}",
                observer_periods.len()
            )));
        }
        if let Some((i, p)) = observer_periods
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p > 0.0 && p.is_finite()))
        {
            return Err(OspError::Domain(format!(
                "observer period {i} must be positive, got {p}"
            )));
        }
        Ok(Self {
            a,
            b,
            c,
            q,
            r: r_diag,
            period,
            observer_periods,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn num_observers(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn q(&self) -> &CovMatrix {
        &self.q
    }

    pub fn r_diag(&self) -> &[f64] {
        &self.r
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn observer_periods(&self) -> &[f64] {
        &self.observer_periods
    }

    /// Row of `C` for `observer`, as a column vector.
    pub fn obs_row(&self, observer: usize) -> Result<Vector> {
        self.check_observer(observer)?;
        Ok(self.c.row(observer).transpose())
    }

    pub fn obs_noise(&self, observer: usize) -> Result<f64> {
        self.check_observer(observer)?;
        Ok(self.r[observer])
    }

    fn check_observer(&self, observer: usize) -> Result<()> {
        if observer >= self.num_observers() {
            return Err(OspError::Domain(format!(
                "observer {observer} out of range (model has {})",
                self.num_observers()
            )));
        }
        Ok(())
    }

    /// `Φ(s,t) = e^{A(t−s)}`; exactly the identity when `s == t`.
    pub fn transition_phi(&self, s: f64, t: f64) -> Result<Matrix> {
        check_order(s, t)?;
        let dim = self.state_dim();
        if s == t {
            return Ok(Matrix::identity(dim, dim));
        }
        linalg::mat_exp(&self.a, t - s)
    }

    /// `Λ(r,s,t) = e^{A(t−s)}·(∫₀^{s−r} e^{Aτ}dτ)·B`.
    pub fn input_lambda(&self, r: f64, s: f64, t: f64) -> Result<Matrix> {
        check_order(r, s)?;
        check_order(s, t)?;
        if r == s {
            return Ok(Matrix::zeros(self.state_dim(), self.input_dim()));
        }
        let (_, gain) = linalg::transition_and_input(&self.a, &self.b, s - r)?;
        Ok(self.transition_phi(s, t)? * gain)
    }

    /// `Q(s,t) = ∫₀^{t−s} e^{Aτ} Q e^{Aᵀτ} dτ`.
    pub fn process_noise_cov(&self, s: f64, t: f64) -> Result<CovMatrix> {
        Ok(self.step(s, t)?.noise)
    }

    /// `Φ(s,t)` and `Q(s,t)` together.
    pub fn step(&self, s: f64, t: f64) -> Result<Step> {
        check_order(s, t)?;
        let dim = self.state_dim();
        if s == t {
            return Ok(Step {
                phi: Matrix::identity(dim, dim),
                noise: CovMatrix::zeros(dim),
            });
        }
        let (_, noise) = linalg::integrated_noise(&self.a, self.q.as_matrix(), t - s)?;
        let phi = linalg::mat_exp(&self.a, t - s)?;
        Ok(Step { phi, noise })
    }
}

pub(crate) fn check_order(s: f64, t: f64) -> Result<()> {
    if !(s.is_finite() && t.is_finite()) {
        return Err(OspError::Domain(format!("non-finite time ({s}, {t})")));
    }
    if s > t {
        return Err(OspError::Ordering(format!("interval start {s} after end {t}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(a: f64, b: f64, q: f64) -> SystemModel {
        SystemModel::new(
            Matrix::from_element(1, 1, a),
            Matrix::from_element(1, 1, b),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, q),
            Matrix::from_element(1, 1, 0.1),
            0.01,
            vec![0.01],
        )
        .unwrap()
    }

    #[test]
    fn phi_is_identity_on_empty_interval() {
        let m = scalar(-3.0, 1.0, 1.0);
        assert_eq!(m.transition_phi(0.3, 0.3).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn phi_scalar_closed_form() {
        let m = scalar(-3.0, 1.0, 1.0);
        let phi = m.transition_phi(0.0, 0.25).unwrap();
        assert_relative_eq!(phi[(0, 0)], (-0.75f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn phi_rejects_reversed_interval() {
        let m = scalar(-3.0, 1.0, 1.0);
        assert!(matches!(
            m.transition_phi(0.2, 0.1),
            Err(OspError::Ordering(_))
        ));
        assert!(matches!(
            m.input_lambda(0.2, 0.1, 0.3),
            Err(OspError::Ordering(_))
        ));
        assert!(matches!(
            m.process_noise_cov(0.2, 0.1),
            Err(OspError::Ordering(_))
        ));
    }

    #[test]
    fn lambda_empty_integration_interval() {
        let m = scalar(-3.0, 2.0, 1.0);
        assert_eq!(m.input_lambda(0.1, 0.1, 0.4).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn lambda_scalar_closed_form() {
        let (a, b) = (-3.0, 2.0);
        let m = scalar(a, b, 1.0);
        let (r, s, t) = (0.1, 0.35, 0.6);
        let got = m.input_lambda(r, s, t).unwrap()[(0, 0)];
        let want = b / a * (a * (t - s)).exp() * ((a * (s - r)).exp() - 1.0);
        assert_relative_eq!(got, want, max_relative = 1e-12);
    }

    #[test]
    fn lambda_singular_a_is_quadrature() {
        let model = SystemModel::new(
            Matrix::zeros(2, 2),
            Matrix::from_column_slice(2, 1, &[1.5, -0.5]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::identity(2, 2),
            Matrix::from_element(1, 1, 0.1),
            0.01,
            vec![0.01],
        )
        .unwrap();
        let l = model.input_lambda(0.2, 0.5, 0.9).unwrap();
        assert_relative_eq!(l[(0, 0)], 0.3 * 1.5, max_relative = 1e-13);
        assert_relative_eq!(l[(1, 0)], 0.3 * -0.5, max_relative = 1e-13);
    }

    #[test]
    fn noise_zero_interval_and_integrator() {
        let m = scalar(0.0, 1.0, 0.4);
        assert_eq!(m.process_noise_cov(0.2, 0.2).unwrap().trace(), 0.0);
        let q = m.process_noise_cov(0.2, 0.7).unwrap();
        assert_relative_eq!(q.trace(), 0.4 * 0.5, max_relative = 1e-13);
    }

    #[test]
    fn rejects_non_diagonal_r() {
        let err = SystemModel::new(
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
            Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.0]),
            0.01,
            vec![0.01, 0.01],
        )
        .unwrap_err();
        assert!(err.to_string().contains("diagonal"));
    }

    #[test]
    fn rejects_shape_mismatches() {
        let err = SystemModel::new(
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            Matrix::zeros(1, 3),
            Matrix::identity(2, 2),
            Matrix::identity(1, 1),
            0.01,
            vec![0.01],
        )
        .unwrap_err();
        assert!(matches!(err, OspError::Dimension(_)));
        let err = SystemModel::new(
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            Matrix::zeros(1, 2),
            Matrix::identity(2, 2),
            Matrix::identity(1, 1),
            -1.0,
            vec![0.01],
        )
        .unwrap_err();
        assert!(matches!(err, OspError::Domain(_)));
    }
}
