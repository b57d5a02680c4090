//! Closed-form bounds and stability checks.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::controller::ControlGains;
use crate::error::{Error, Result};
use crate::sensing::NoiseBounds;

/// Exact spectral norm of `[[1, T], [0, 1]]`.
pub fn spectral_norm_a(sampling_time: f64) -> f64 {
    (sampling_time + (sampling_time * sampling_time + 4.0).sqrt()) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimationStatus {
    Satisfied,
    Violated,
    /// `β = 0`: every innovation is saturated to zero.
    Unsatisfiable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationVerdict {
    pub k_star: f64,
    pub q_const: f64,
    /// `(1-k*)‖A‖q + 3/2(ε+μ) + √2/2 β`, compared strictly against `q`.
    pub lhs: f64,
    /// `q - lhs`.
    pub margin: f64,
    pub passes: bool,
    /// Upper bound on `limsup ρ(t)`, when it exists.
    pub alpha: Option<f64>,
    pub status: EstimationStatus,
}

pub fn check_estimation_condition(bounds: &NoiseBounds, beta: f64, norm_a: f64) -> EstimationVerdict {
    let noise_sum = bounds.epsilon + bounds.mu;
    let q_const = 1.5 * noise_sum + std::f64::consts::FRAC_1_SQRT_2 * beta;
    let k_star = if beta > 0.0 {
        (beta / (norm_a * bounds.q + noise_sum)).min(1.0)
    } else {
        0.0
    };
    let lhs = (1.0 - k_star) * norm_a * bounds.q + q_const;
    let contraction = (1.0 - k_star) * norm_a;
    let alpha = if beta <= 0.0 {
        None
    } else if k_star == 1.0 {
        Some(q_const)
    } else if contraction < 1.0 {
        Some(q_const / (1.0 - contraction))
    } else {
        None
    };
    let passes = beta > 0.0 && lhs < bounds.q;
    let status = if beta <= 0.0 {
        EstimationStatus::Unsatisfiable
    } else if passes {
        EstimationStatus::Satisfied
    } else {
        EstimationStatus::Violated
    };
    EstimationVerdict {
        k_star,
        q_const,
        lhs,
        margin: bounds.q - lhs,
        passes,
        alpha,
        status,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootRegime {
    /// Complex-conjugate pair sharing one modulus.
    Complex,
    /// Two real roots; the larger absolute value is reported.
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRoots {
    pub lambda: f64,
    pub modulus: f64,
    pub regime: RootRegime,
    /// Moduli of both roots.
    pub moduli: [f64; 2],
}

/// Roots of `s² + (λTg_v - 2)s + λT²g_s - λTg_v + 1`.
pub fn root_modulus(lambda: f64, gains: &ControlGains, sampling_time: f64) -> ModeRoots {
    let t = sampling_time;
    let b = lambda * t * gains.g_v - 2.0;
    let c = lambda * t * t * gains.g_s - lambda * t * gains.g_v + 1.0;
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        let m = c.sqrt();
        ModeRoots {
            lambda,
            modulus: m,
            regime: RootRegime::Complex,
            moduli: [m, m],
        }
    } else {
        let sq = disc.sqrt();
        // stable form of the two roots
        let big = -0.5 * (b + b.signum() * sq);
        let (r1, r2) = if big == 0.0 { (0.0, 0.0) } else { (big, c / big) };
        let moduli = [r1.abs(), r2.abs()];
        ModeRoots {
            lambda,
            modulus: moduli[0].max(moduli[1]),
            regime: RootRegime::Real,
            moduli,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopSpectrum {
    pub p_matrix: DMatrix<f64>,
    /// Sorted ascending.
    pub eigenvalue_moduli: Vec<f64>,
    pub spectral_radius: f64,
    pub per_mode: Vec<ModeRoots>,
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::validation(format!("{what} must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::validation(format!("{what} must be symmetric")));
    }
    Ok(())
}

fn eigen_moduli(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// `P = I ⊗ A - L_g ⊗ F` with `F = [[0, 0], [T g_s, T g_v]]`, its spectrum
/// and the per-mode root moduli.
pub fn closed_loop_matrix(l_g: &DMatrix<f64>, gains: &ControlGains, sampling_time: f64) -> Result<ClosedLoopSpectrum> {
    check_symmetric(l_g, "ground Laplacian")?;
    let t = sampling_time;
    let a = DMatrix::from_row_slice(2, 2, &[1.0, t, 0.0, 1.0]);
    let f = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, t * gains.g_s, t * gains.g_v]);
    let n = l_g.nrows();
    let p = DMatrix::<f64>::identity(n, n).kronecker(&a) - l_g.kronecker(&f);
    let eigenvalue_moduli = eigen_moduli(&p);
    let spectral_radius = eigenvalue_moduli.last().copied().unwrap_or(0.0);
    let mut lambdas: Vec<f64> = l_g.clone().symmetric_eigenvalues().iter().copied().collect();
    lambdas.sort_by(f64::total_cmp);
    let per_mode = lambdas.into_iter().map(|l| root_modulus(l, gains, t)).collect();
    Ok(ClosedLoopSpectrum {
        p_matrix: p,
        eigenvalue_moduli,
        spectral_radius,
        per_mode,
    })
}

/// Lyapunov certificate and the resulting limsup bound on `‖x(t)‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiboBound {
    /// Solution of `FᵀPF - P = -I`.
    pub p: DMatrix<f64>,
    pub lambda: f64,
    pub beta_lyap: f64,
    pub bound: f64,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

const SERIES_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 10_000_000;

/// `P = Σ (Fᵀ)^k F^k`, checked against a direct solve of the vectorized
/// equation `(I - Fᵀ⊗Fᵀ) vec P = vec I`.
pub fn lyapunov_solution(f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !f.is_square() {
        return Err(Error::validation("system matrix must be square"));
    }
    let no_solution = || Error::Numerical("Lyapunov equation has no positive definite solution".into());
    if eigen_moduli(f).last().is_some_and(|r| *r >= 1.0) {
        return Err(no_solution());
    }
    let n = f.nrows();
    let ft = f.transpose();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut p = term.clone();
    let mut terms = 0;
    while term.amax() >= SERIES_TOL {
        term = &ft * &term * f;
        p += &term;
        terms += 1;
        if terms > SERIES_MAX_TERMS || !term.amax().is_finite() {
            return Err(no_solution());
        }
    }

    let lhs = DMatrix::<f64>::identity(n * n, n * n) - ft.kronecker(&ft);
    let vec_i = DVector::from_column_slice(DMatrix::<f64>::identity(n, n).as_slice());
    let direct = lhs.lu().solve(&vec_i).ok_or_else(no_solution)?;
    let direct = DMatrix::from_column_slice(n, n, direct.as_slice());
    if (&p - &direct).amax() > 1e-8 * p.amax() {
        return Err(Error::Numerical(format!(
            "Lyapunov series and direct solve disagree by {:e}",
            (&p - &direct).amax()
        )));
    }
    Ok(p)
}

/// Bound on `limsup ‖x(t)‖²` for `x(t+1) = F x(t) + G(t)` with `‖G(t)‖ ≤ α`.
pub fn bibo_bound(f: &DMatrix<f64>, input_bound: f64) -> Result<BiboBound> {
    if !(input_bound.is_finite() && input_bound >= 0.0) {
        return Err(Error::validation(format!("input bound must be finite and >= 0, got {input_bound}")));
    }
    let p = lyapunov_solution(f)?;
    let eig = p.clone().symmetric_eigenvalues();
    let lambda_max = eig.max();
    let lambda_min = eig.min();
    let lambda = 1.0 - 1.0 / (2.0 * lambda_max);
    let pf = spectral_norm(&(&p * f));
    let beta_lyap = lambda_max + 2.0 * pf * pf;
    let bound = beta_lyap * input_bound * input_bound / (lambda_min * (1.0 - lambda));
    Ok(BiboBound {
        p,
        lambda,
        beta_lyap,
        bound,
    })
}

/// Scalar helper used by the observer error analysis: `‖(1-k)A‖`.
pub fn scaled_transition_norm(k: f64, sampling_time: f64) -> f64 {
    let a = Matrix2::new(1.0, sampling_time, 0.0, 1.0);
    ((1.0 - k) * a).svd(false, false).singular_values.max()
}
