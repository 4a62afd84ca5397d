//! Channel estimation from sign-quantized training.
//!
//! The training observation of node `k` has the same form as the data
//! phase with the roles of channel and symbols swapped, so the probit
//! likelihood of the data detector becomes a likelihood in `h_R`:
//!
//! ```text
//! F(h) = Σ_{i<2T} log Φ(√(2ρ/Nt) · x̃_R,iᵀ h),   x̃_R,i = ŷ_R,i · x_R,i
//! ```
//!
//! `F` is concave (log Φ is log-concave), so [`ml_channel_estimate`] runs a
//! damped Newton ascent. When the signs are linearly separable the supremum
//! is at infinity; the search is confined to `‖h‖ ≤ 4√Nt` and reports
//! whether that bound is active. [`zf_channel_estimate`] is the
//! pseudo-inverse of `X_Rᵀ` applied to the signs.
//!
//! Signs carry no amplitude information, so estimates are compared through
//! [`normalized_mse`] only.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::likelihood::ProbitObjective;
use crate::linalg::{cholesky, cholesky_solve, dot, norm, spd_solve};
use crate::model::{QuantizedBlock, RealLiftedChannel, TrainingBlock};

/// Sign-refined training columns `x̃_R,i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignRefinedTraining {
    nt: usize,
    rows: Vec<f64>,
}

impl SignRefinedTraining {
    pub fn new(training: &TrainingBlock, obs: &QuantizedBlock) -> Result<Self> {
        if obs.len() != training.t() {
            return Err(Error::InvalidArgument("training observation length differs from T"));
        }
        let signs = obs.signs_real();
        let mut rows = Vec::with_capacity(4 * training.t() * training.nt());
        for (i, s) in signs.iter().enumerate() {
            rows.extend(training.column(i).iter().map(|v| s * v));
        }
        Ok(Self {
            nt: training.nt(),
            rows,
        })
    }

    pub fn from_rows(nt: usize, rows: Vec<f64>) -> Result<Self> {
        if nt == 0 || rows.is_empty() || !rows.len().is_multiple_of(2 * nt) {
            return Err(Error::InvalidArgument("refined rows must have length 2Nt"));
        }
        Ok(Self { nt, rows })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    /// Number of real-domain observations, `2T`.
    pub fn len(&self) -> usize {
        self.rows.len() / (2 * self.nt)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        let d = 2 * self.nt;
        &self.rows[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    /// Probit log-likelihood `F(h)` and its gradient.
    pub fn log_likelihood(&self, h_r: &[f64], rho: f64, grad: Option<&mut [f64]>) -> f64 {
        let c = libm::sqrt(2.0 * rho / self.nt as f64);
        let obj = ProbitObjective::new(&self.rows, 2 * self.nt, c);
        match grad {
            Some(g) => obj.gradient(h_r, g),
            None => obj.value(h_r),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    Ml,
    Zf,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SolverInfo {
    pub iterations: usize,
    /// Full gradient norm at an interior solution, tangential norm when the
    /// norm bound is active.
    pub gradient_norm: f64,
    pub boundary_active: bool,
    /// Gradient component along `h/‖h‖` at the returned point.
    pub radial_gradient: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelEstimate {
    pub h_r_hat: Vec<f64>,
    /// `h_r_hat / ‖h_r_hat‖`, all zeros if the estimate vanished.
    pub normalized: Vec<f64>,
    pub method: EstimatorKind,
    pub solver: SolverInfo,
}

impl ChannelEstimate {
    fn new(h_r_hat: Vec<f64>, method: EstimatorKind, solver: SolverInfo) -> Self {
        let n = norm(&h_r_hat);
        let normalized = if n > 0.0 {
            h_r_hat.iter().map(|v| v / n).collect()
        } else {
            vec![0.0; h_r_hat.len()]
        };
        Self {
            h_r_hat,
            normalized,
            method,
            solver,
        }
    }

    /// Unit-norm estimate as a lifted channel (for fusion-center use).
    pub fn normalized_channel(&self) -> Result<RealLiftedChannel> {
        RealLiftedChannel::from_stacked(&self.normalized)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Stop when the gradient norm drops below this times `2T`.
    pub gradient_tol: f64,
    pub step_tol: f64,
    /// Norm bound; `None` means `4√Nt`.
    pub radius: Option<f64>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tol: 1e-8,
            step_tol: 1e-12,
            radius: None,
        }
    }
}

const ARMIJO: f64 = 1e-4;
const BOUNDARY_SLACK: f64 = 1e-10;

fn project_to_ball(x: &mut [f64], radius: f64) {
    let n = norm(x);
    if n > radius {
        x.iter_mut().for_each(|v| *v *= radius / n);
    }
}

/// Newton direction `M⁻¹ rhs`, or `None` when `M` is numerically singular.
fn newton_direction(neg_hess: &[f64], d: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let mut l = neg_hess.to_vec();
    cholesky(&mut l, d, 1e-10).ok()?;
    let mut z = rhs.to_vec();
    cholesky_solve(&l, d, &mut z);
    z.iter().all(|v| v.is_finite()).then_some(z)
}

/// ML channel estimate: maximize the concave probit likelihood over the
/// ball `‖h‖ ≤ R`, starting from the ZF direction scaled to `√Nt`.
pub fn ml_channel_estimate(
    refined: &SignRefinedTraining,
    nt: usize,
    rho: f64,
    opts: &NewtonOptions,
) -> Result<ChannelEstimate> {
    if nt != refined.nt() {
        return Err(Error::InvalidArgument("antenna count does not match refined training"));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidArgument("SNR must be positive and finite"));
    }
    let d = 2 * nt;
    let radius = opts.radius.unwrap_or(4.0 * libm::sqrt(nt as f64));
    let gtol = opts.gradient_tol * refined.len() as f64;
    let obj = ProbitObjective::new(&refined.rows, d, libm::sqrt(2.0 * rho / nt as f64));

    // X_R ŷ_R is proportional to the ZF estimate for every (Nt, T)
    let mut x = obj.row_sum();
    let n0 = norm(&x);
    if n0 > 0.0 {
        let s = libm::sqrt(nt as f64).min(radius) / n0;
        x.iter_mut().for_each(|v| *v *= s);
    } else {
        x.iter_mut().for_each(|v| *v = 0.0);
    }

    let mut g = vec![0.0; d];
    let mut m = vec![0.0; d * d];
    let mut trial = vec![0.0; d];
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let f = obj.second_order(&x, &mut g, &mut m);
        let r = norm(&x);
        let radial = if r > 0.0 { dot(&g, &x) / r } else { 0.0 };
        let on_boundary = r >= radius * (1.0 - BOUNDARY_SLACK) && radial >= 0.0;

        let accepted = if on_boundary {
            // maximize on the sphere ‖h‖ = R
            let gt: Vec<f64> = g.iter().zip(&x).map(|(gi, xi)| gi - radial * xi / r).collect();
            if norm(&gt) < gtol {
                break;
            }
            let (dir, mut step) = match newton_direction(&m, d, &gt) {
                Some(z) => {
                    let zr = dot(&z, &x) / r;
                    let p: Vec<f64> = z.iter().zip(&x).map(|(zi, xi)| zi - zr * xi / r).collect();
                    if dot(&p, &gt) > 0.0 {
                        (p, 1.0)
                    } else {
                        let s = 0.5 * radius / norm(&gt);
                        (gt.clone(), s)
                    }
                }
                None => {
                    let s = 0.5 * radius / norm(&gt);
                    (gt.clone(), s)
                }
            };
            let slope = dot(&dir, &gt);
            let mut ok = None;
            for _ in 0..60 {
                for p in 0..d {
                    trial[p] = x[p] + step * dir[p];
                }
                let tn = norm(&trial);
                trial.iter_mut().for_each(|v| *v *= radius / tn);
                let ft = obj.value(&trial);
                if ft >= f + ARMIJO * step * slope {
                    ok = Some(ft);
                    break;
                }
                step *= 0.5;
            }
            ok
        } else {
            if norm(&g) < gtol {
                break;
            }
            let (dir, mut step) = match newton_direction(&m, d, &g) {
                Some(z) => (z, 1.0),
                None => {
                    let s = 2.0 * radius / norm(&g);
                    (g.clone(), s)
                }
            };
            let mut ok = None;
            for _ in 0..60 {
                for p in 0..d {
                    trial[p] = x[p] + step * dir[p];
                }
                project_to_ball(&mut trial, radius);
                let moved: f64 = g.iter().zip(trial.iter().zip(&x)).map(|(gi, (t, xi))| gi * (t - xi)).sum();
                let ft = obj.value(&trial);
                if ft >= f + ARMIJO * moved && moved > 0.0 {
                    ok = Some(ft);
                    break;
                }
                step *= 0.5;
            }
            ok
        };
        iterations += 1;
        if accepted.is_none() {
            break;
        }
        let moved = trial.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        core::mem::swap(&mut x, &mut trial);
        if libm::sqrt(moved) < opts.step_tol {
            break;
        }
    }

    obj.gradient(&x, &mut g);
    let r = norm(&x);
    let radial = if r > 0.0 { dot(&g, &x) / r } else { 0.0 };
    let boundary_active = r >= radius * (1.0 - BOUNDARY_SLACK) && radial >= 0.0;
    let gradient_norm = if boundary_active {
        let gt: Vec<f64> = g.iter().zip(&x).map(|(gi, xi)| gi - radial * xi / r).collect();
        norm(&gt)
    } else {
        norm(&g)
    };
    Ok(ChannelEstimate::new(
        x,
        EstimatorKind::Ml,
        SolverInfo {
            iterations,
            gradient_norm,
            boundary_active,
            radial_gradient: radial,
        },
    ))
}

/// ZF channel estimate `(X_Rᵀ)† ŷ_R`; uses the closed form
/// `(Nt/T) X_R ŷ_R` when `Nt < T`.
pub fn zf_channel_estimate(training: &TrainingBlock, obs: &QuantizedBlock) -> Result<ChannelEstimate> {
    zf_channel_estimate_real(training, obs.signs_real())
}

/// ZF estimate from arbitrary real-domain observations (e.g. the raw,
/// unquantized training response).
pub fn zf_channel_estimate_real(training: &TrainingBlock, y_r: &[f64]) -> Result<ChannelEstimate> {
    let h = if training.nt() < training.t() {
        zf_closed_form(training, y_r)?
    } else {
        zf_pseudo_inverse(training, y_r)?
    };
    Ok(ChannelEstimate::new(h, EstimatorKind::Zf, SolverInfo::default()))
}

fn check_len(training: &TrainingBlock, y_r: &[f64]) -> Result<()> {
    if y_r.len() != 2 * training.t() {
        return Err(Error::InvalidArgument("real-domain observation must have length 2T"));
    }
    Ok(())
}

/// `(Nt/T) X_R y_R`, valid when `XXᴴ = (T/Nt) I`.
pub fn zf_closed_form(training: &TrainingBlock, y_r: &[f64]) -> Result<Vec<f64>> {
    check_len(training, y_r)?;
    let d = 2 * training.nt();
    let scale = training.nt() as f64 / training.t() as f64;
    let mut h = vec![0.0; d];
    for (i, y) in y_r.iter().enumerate() {
        for (hp, c) in h.iter_mut().zip(training.column(i)) {
            *hp += scale * y * c;
        }
    }
    Ok(h)
}

/// `(X_Rᵀ)† y_R` through the normal equations of whichever Gram matrix is
/// smaller; works for any training matrix of full rank.
pub fn zf_pseudo_inverse(training: &TrainingBlock, y_r: &[f64]) -> Result<Vec<f64>> {
    check_len(training, y_r)?;
    let d = 2 * training.nt();
    let n = 2 * training.t();
    if n >= d {
        // (X_R X_Rᵀ)⁻¹ X_R y
        let mut gram = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        for (i, y) in y_r.iter().enumerate() {
            let c = training.column(i);
            for p in 0..d {
                rhs[p] += c[p] * y;
                for q in 0..d {
                    gram[p * d + q] += c[p] * c[q];
                }
            }
        }
        spd_solve(gram, d, &mut rhs)?;
        Ok(rhs)
    } else {
        // X_R (X_Rᵀ X_R)⁻¹ y
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] = dot(training.column(i), training.column(j));
            }
        }
        let mut z = y_r.to_vec();
        spd_solve(gram, n, &mut z)?;
        let mut h = vec![0.0; d];
        for (i, zi) in z.iter().enumerate() {
            for (hp, c) in h.iter_mut().zip(training.column(i)) {
                *hp += zi * c;
            }
        }
        Ok(h)
    }
}

/// `(1/Nt) ‖h_R/‖h_R‖ − ĥ_R/‖ĥ_R‖‖²`, in `[0, 4/Nt]`.
pub fn normalized_mse(truth: &RealLiftedChannel, est: &ChannelEstimate, nt: usize) -> Result<f64> {
    if nt == 0 || truth.nt() != nt || est.h_r_hat.len() != 2 * nt {
        return Err(Error::InvalidArgument("dimension mismatch in normalized MSE"));
    }
    let tn = truth.norm();
    let en = norm(&est.h_r_hat);
    if !(tn > 0.0) || !(en > 0.0) {
        return Err(Error::Domain("normalized MSE of a zero-norm channel"));
    }
    let sq: f64 = truth
        .h_r_stack()
        .iter()
        .zip(&est.h_r_hat)
        .map(|(a, b)| {
            let diff = a / tn - b / en;
            diff * diff
        })
        .sum();
    Ok(sq / nt as f64)
}

fn positive(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Domain(what))
    }
}

fn non_negative(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::Domain(what))
    }
}

/// Training-phase ZF MSE law `(Nt³/ρ + Nt² σ²_q,train) / T`, for `Nt < T`.
pub fn corollary1_mse(nt: usize, rho: f64, sigma_q_train_sq: f64, t: usize) -> Result<f64> {
    if nt == 0 || t == 0 {
        return Err(Error::Domain("Nt and T must be positive"));
    }
    if nt >= t {
        return Err(Error::Domain("training MSE law requires Nt < T"));
    }
    let rho = positive(rho, "SNR must be positive")?;
    let s = non_negative(sigma_q_train_sq, "quantization variance must be non-negative")?;
    let n = nt as f64;
    Ok((n * n * n / rho + n * n * s) / t as f64)
}

/// Data-phase ZF MSE law `(Nt/ρ + σ²_q) / K`.
pub fn lemma2_mse(nt: usize, rho: f64, sigma_q_sq: f64, k: usize) -> Result<f64> {
    if nt == 0 || k == 0 {
        return Err(Error::Domain("Nt and K must be positive"));
    }
    let rho = positive(rho, "SNR must be positive")?;
    let s = non_negative(sigma_q_sq, "quantization variance must be non-negative")?;
    Ok((nt as f64 / rho + s) / k as f64)
}
