//! Dense small-matrix numerics for continuous-time LTI discretization.
//!
//! Everything here operates on `nalgebra::DMatrix<f64>`. The matrix exponential
//! is Higham's scaling-and-squaring with diagonal Padé approximants of degree
//! 3, 5, 7, 9 or 13. The input integral and the integrated process noise are
//! read off block-triangular exponentials (the Van Loan construction), so a
//! singular state matrix needs no special treatment.

use nalgebra::{DMatrix, DVector};

use crate::error::{OspError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Absolute symmetry tolerance accepted for covariance inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Minimum eigenvalue tolerated for a covariance to count as PSD.
pub const PSD_TOL: f64 = -1e-10;

// Padé degrees with their theta bounds on the 1-norm (Higham 2005, Table 2.3).
const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const PADE_9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Symmetric positive semi-definite matrix.
///
/// Construction symmetrizes as `(X + Xᵀ)/2`; callers that need the PSD check
/// use [`CovMatrix::checked`].
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix(Matrix);

impl CovMatrix {
    /// Wraps `m`, replacing it by its symmetric part.
    pub fn symmetrized(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(OspError::Dimension(format!(
                "covariance must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        ensure_finite(&m, "covariance")?;
        Ok(Self(symmetrize(m)))
    }

    /// Validates symmetry and positive semi-definiteness before wrapping.
    pub fn checked(m: Matrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(OspError::Dimension(format!(
                "covariance must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        ensure_finite(&m, "covariance")?;
        let defect = symmetry_defect(&m);
        if defect > SYMMETRY_TOL {
            return Err(OspError::Domain(format!(
                "covariance is not symmetric (max |X - Xᵀ| = {defect:e})"
            )));
        }
        let cov = Self(symmetrize(m));
        let min_eig = cov.min_eigenvalue();
        if min_eig < PSD_TOL {
            return Err(OspError::Domain(format!(
                "covariance is not positive semi-definite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(cov)
    }

    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim, dim))
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self(Matrix::identity(dim, dim) * scale)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(Matrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `Φ·P·Φᵀ + add`, symmetrized.
    pub fn congruence_plus(&self, phi: &Matrix, add: &CovMatrix) -> CovMatrix {
        CovMatrix(symmetrize(phi * &self.0 * phi.transpose() + &add.0))
    }
}

pub fn symmetrize(m: Matrix) -> Matrix {
    let t = m.transpose();
    (m + t) * 0.5
}

pub fn symmetry_defect(m: &Matrix) -> f64 {
    (m - m.transpose()).amax()
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(OspError::Domain(format!("{what} has non-finite entries")))
    }
}

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^{M·t}`.
pub fn mat_exp(m: &Matrix, t: f64) -> Result<Matrix> {
    if !m.is_square() {
        return Err(OspError::Dimension(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !t.is_finite() {
        return Err(OspError::Domain("exponential time is not finite".into()));
    }
    ensure_finite(m, "exponent matrix")?;
    expm(&(m * t))
}

/// `e^X` by scaling and squaring.
pub fn expm(x: &Matrix) -> Result<Matrix> {
    let n = x.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let norm = one_norm(x);
    if norm == 0.0 {
        return Ok(Matrix::identity(n, n));
    }

    let eye = Matrix::identity(n, n);
    let x2 = x * x;
    let (u, v) = if norm <= THETA_3 {
        pade_low(x, &x2, &eye, &PADE_3)
    } else if norm <= THETA_5 {
        pade_low(x, &x2, &eye, &PADE_5)
    } else if norm <= THETA_7 {
        pade_low(x, &x2, &eye, &PADE_7)
    } else if norm <= THETA_9 {
        pade_low(x, &x2, &eye, &PADE_9)
    } else {
        let squarings = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scaled = x / 2f64.powi(squarings);
        let r = pade_13(&scaled, &eye)?;
        let mut out = r;
        for _ in 0..squarings {
            out = &out * &out;
        }
        ensure_finite(&out, "matrix exponential")?;
        return Ok(out);
    };
    let r = pade_solve(u, v)?;
    ensure_finite(&r, "matrix exponential")?;
    Ok(r)
}

fn pade_low(x: &Matrix, x2: &Matrix, eye: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    // Even powers X^0, X^2, ... up to the degree.
    let degree = b.len() - 1;
    let mut powers = vec![eye.clone(), x2.clone()];
    while powers.len() - 1 < degree / 2 {
        let next = powers.last().unwrap() * x2;
        powers.push(next);
    }
    let n = x.nrows();
    let mut odd = Matrix::zeros(n, n);
    let mut even = Matrix::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        if 2 * k < b.len() {
            even += p * b[2 * k];
        }
        if 2 * k + 1 < b.len() {
            odd += p * b[2 * k + 1];
        }
    }
    (x * odd, even)
}

fn pade_13(x: &Matrix, eye: &Matrix) -> Result<Matrix> {
    let b = &PADE_13;
    let x2 = x * x;
    let x4 = &x2 * &x2;
    let x6 = &x2 * &x4;
    let u_inner = &x6 * (&x6 * b[13] + &x4 * b[11] + &x2 * b[9])
        + &x6 * b[7]
        + &x4 * b[5]
        + &x2 * b[3]
        + eye * b[1];
    let u = x * u_inner;
    let v = &x6 * (&x6 * b[12] + &x4 * b[10] + &x2 * b[8])
        + &x6 * b[6]
        + &x4 * b[4]
        + &x2 * b[2]
        + eye * b[0];
    pade_solve(u, v)
}

fn pade_solve(u: Matrix, v: Matrix) -> Result<Matrix> {
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| OspError::Numeric("singular Padé denominator".into()))
}

/// `e^{A·dt}` and `(∫₀^dt e^{Aτ}dτ)·B` from one augmented exponential.
pub fn transition_and_input(a: &Matrix, b: &Matrix, dt: f64) -> Result<(Matrix, Matrix)> {
    let s = a.nrows();
    let m = b.ncols();
    let mut aug = Matrix::zeros(s + m, s + m);
    aug.view_mut((0, 0), (s, s)).copy_from(a);
    aug.view_mut((0, s), (s, m)).copy_from(b);
    let e = mat_exp(&aug, dt)?;
    Ok((
        e.view((0, 0), (s, s)).into_owned(),
        e.view((0, s), (s, m)).into_owned(),
    ))
}

/// Integrated process noise `∫₀^dt e^{Aτ} Q e^{Aᵀτ} dτ` by Van Loan's method.
///
/// The horizon is halved until `‖A‖₁·h ≤ 1` so the block exponential never
/// carries the growth of `e^{-A·dt}`; the halves are recombined with
/// `Q(2h) = Φ(h)·Q(h)·Φ(h)ᵀ + Q(h)`.
pub fn integrated_noise(a: &Matrix, q: &Matrix, dt: f64) -> Result<(Matrix, CovMatrix)> {
    let s = a.nrows();
    if dt == 0.0 {
        return Ok((Matrix::identity(s, s), CovMatrix::zeros(s)));
    }
    let reach = one_norm(a) * dt.abs();
    let halvings = if reach > 1.0 {
        reach.log2().ceil() as i32
    } else {
        0
    };
    let h = dt / 2f64.powi(halvings);

    let mut aug = Matrix::zeros(2 * s, 2 * s);
    aug.view_mut((0, 0), (s, s)).copy_from(&(-a));
    aug.view_mut((0, s), (s, s)).copy_from(q);
    aug.view_mut((s, s), (s, s)).copy_from(&a.transpose());
    let e = mat_exp(&aug, h)?;
    let phi_t = e.view((s, s), (s, s)).into_owned();
    let phi = phi_t.transpose();
    let f12 = e.view((0, s), (s, s)).into_owned();
    let mut noise = CovMatrix::symmetrized(&phi * f12)?;
    let mut step = phi;
    for _ in 0..halvings {
        noise = noise.congruence_plus(&step, &noise);
        step = &step * &step;
    }
    Ok((step, noise))
}

pub fn frobenius(m: &Matrix) -> f64 {
    m.norm()
}

/// `‖a − b‖_F / max(‖b‖_F, floor)`.
pub fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    let denom = frobenius(b).max(f64::MIN_POSITIVE);
    frobenius(&(a - b)) / denom
}
