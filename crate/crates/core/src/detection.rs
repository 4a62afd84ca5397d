//! Fusion-center data detection from sign-quantized observations.
//!
//! * [`ml_receive`]: exhaustive maximum likelihood over `S_R^Nt`.
//! * [`ml_estimate_relaxed`]: the same likelihood maximized over the sphere
//!   `‖x_R‖² = Nt` (non-convex, multi-start projected gradient ascent).
//! * [`zf_receive`]: pseudo-inverse of `Hᴴ` applied to the quantized vector,
//!   followed by symbol-by-symbol nearest-point decisions.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::likelihood::ProbitObjective;
use crate::linalg::{hermitian_cholesky, hermitian_solve, norm};
use crate::model::{stack_real, Constellation, QuantizedBlock, RealLiftedChannel};
use crate::numerics::log_phi;

/// Largest `M^Nt` that [`ml_receive`] will enumerate.
pub const MAX_ML_CANDIDATES: u128 = 1_000_000;

/// Sign-refined lifted channel columns `h̃_R,k,i = ŷ_R,k,i · h_R,k,i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignRefinedChannels {
    nt: usize,
    /// Row `2k + i` is `h̃_R,k,i`.
    rows: Vec<f64>,
}

impl SignRefinedChannels {
    pub fn from_rows(nt: usize, rows: Vec<f64>) -> Result<Self> {
        if nt == 0 || rows.is_empty() || !rows.len().is_multiple_of(4 * nt) {
            return Err(Error::InvalidArgument("refined rows must come in pairs of length 2Nt"));
        }
        Ok(Self { nt, rows })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    /// Number of receive nodes.
    pub fn nodes(&self) -> usize {
        self.rows.len() / (4 * self.nt)
    }

    pub fn vector(&self, k: usize, i: usize) -> &[f64] {
        let d = 2 * self.nt;
        let r = 2 * k + i;
        &self.rows[r * d..(r + 1) * d]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }
}

pub fn sign_refine(channels: &[RealLiftedChannel], obs: &QuantizedBlock) -> Result<SignRefinedChannels> {
    if channels.is_empty() || channels.len() != obs.len() {
        return Err(Error::InvalidArgument("need one quantized entry per channel"));
    }
    let nt = channels[0].nt();
    if channels.iter().any(|h| h.nt() != nt) {
        return Err(Error::InvalidArgument("channels have different antenna counts"));
    }
    let mut rows = Vec::with_capacity(channels.len() * 4 * nt);
    for (k, h) in channels.iter().enumerate() {
        for i in 0..2 {
            let s = obs.real_sign(k, i);
            rows.extend(h.column(i).iter().map(|v| s * v));
        }
    }
    Ok(SignRefinedChannels { nt, rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionResult {
    /// Constellation indices per antenna; empty for the relaxed estimator.
    pub symbols: Vec<usize>,
    /// Real-domain estimate `x_R` (length `2Nt`).
    pub soft: Vec<f64>,
    /// Log-likelihood at `soft` (NaN for ZF).
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Objective after every accepted step of the winning start, when
    /// [`SphereOptions::record_trace`] is set.
    pub objective_trace: Vec<f64>,
}

impl DetectionResult {
    pub fn soft_complex(&self) -> Vec<Complex64> {
        let nt = self.soft.len() / 2;
        (0..nt)
            .map(|a| Complex64::new(self.soft[a], self.soft[nt + a]))
            .collect()
    }
}

fn likelihood_scale(nt: usize, rho: f64) -> Result<f64> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidArgument("SNR must be positive and finite"));
    }
    Ok(libm::sqrt(2.0 * rho / nt as f64))
}

/// Exhaustive ML detection. Candidates are visited in lexicographic order of
/// their index vectors (antenna 0 most significant) and only a strictly
/// larger log-likelihood replaces the incumbent.
pub fn ml_receive(
    refined: &SignRefinedChannels,
    constellation: &Constellation,
    nt: usize,
    rho: f64,
) -> Result<DetectionResult> {
    if nt != refined.nt() {
        return Err(Error::InvalidArgument("antenna count does not match refined channels"));
    }
    let c = likelihood_scale(nt, rho)?;
    let m = constellation.len();
    let candidates = (m as u128).checked_pow(nt as u32).unwrap_or(u128::MAX);
    if candidates > MAX_ML_CANDIDATES {
        return Err(Error::Capacity {
            candidates,
            limit: MAX_ML_CANDIDATES,
        });
    }
    let d = 2 * nt;
    let rows = refined.rows.len() / d;
    // table[(row * nt + antenna) * m + symbol] = c * contribution to the margin
    let mut table = vec![0.0; rows * nt * m];
    for (r, v) in refined.rows.chunks_exact(d).enumerate() {
        for a in 0..nt {
            for (s, p) in constellation.real_pairs().iter().enumerate() {
                table[(r * nt + a) * m + s] = c * (v[a] * p[0] + v[nt + a] * p[1]);
            }
        }
    }
    let mut idx = vec![0usize; nt];
    let mut best = idx.clone();
    let mut best_ll = f64::NEG_INFINITY;
    loop {
        let ll: f64 = (0..rows)
            .map(|r| {
                let t: f64 = (0..nt).map(|a| table[(r * nt + a) * m + idx[a]]).sum();
                log_phi(t)
            })
            .sum();
        if ll > best_ll {
            best_ll = ll;
            best.copy_from_slice(&idx);
        }
        // odometer, last antenna fastest
        let mut pos = nt;
        loop {
            if pos == 0 {
                let points = constellation.symbols(&best);
                return Ok(DetectionResult {
                    symbols: best,
                    soft: stack_real(&points),
                    log_likelihood: best_ll,
                    iterations: candidates as usize,
                    objective_trace: Vec::new(),
                });
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < m {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Options for [`ml_estimate_relaxed`].
#[derive(Clone, Debug, PartialEq)]
pub struct SphereOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step improves the objective by less than
    /// this fraction of its magnitude.
    pub rel_tol: f64,
    pub starts: usize,
    pub record_trace: bool,
}

impl Default for SphereOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tol: 1e-10,
            starts: 8,
            record_trace: false,
        }
    }
}

/// Start `s` on the sphere of radius `√Nt`: the matched-filter direction
/// for `s = 0` (when non-zero), otherwise a unit-modulus phase pattern.
fn sphere_start(objective: &ProbitObjective<'_>, nt: usize, s: usize, starts: usize) -> Vec<f64> {
    let radius = libm::sqrt(nt as f64);
    if s == 0 {
        let mut v = objective.row_sum();
        let n = norm(&v);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x *= radius / n);
            return v;
        }
    }
    let base = 2.0 * PI * s as f64 / starts.max(1) as f64;
    let mut v = vec![0.0; 2 * nt];
    for a in 0..nt {
        let phase = base + 2.4 * a as f64;
        v[a] = libm::cos(phase);
        v[nt + a] = libm::sin(phase);
    }
    v
}

struct SphereRun {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn ascend_on_sphere(
    objective: &ProbitObjective<'_>,
    mut x: Vec<f64>,
    radius: f64,
    opts: &SphereOptions,
) -> SphereRun {
    let d = objective.dim();
    let mut g = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut f = objective.gradient(&x, &mut g);
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(f);
    }
    let mut step = f64::NAN;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        // tangent component of the gradient
        let radial = crate::linalg::dot(&g, &x) / (radius * radius);
        for (gi, xi) in g.iter_mut().zip(&x) {
            *gi -= radial * xi;
        }
        let gnorm2: f64 = g.iter().map(|v| v * v).sum();
        if !(gnorm2 > 0.0) {
            break;
        }
        if !step.is_finite() {
            step = 0.5 * radius / libm::sqrt(gnorm2);
        }
        let mut accepted = None;
        for _ in 0..60 {
            for p in 0..d {
                trial[p] = x[p] + step * g[p];
            }
            let n = norm(&trial);
            trial.iter_mut().for_each(|v| *v *= radius / n);
            let ft = objective.value(&trial);
            if ft >= f + 1e-4 * step * gnorm2 {
                accepted = Some(ft);
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some(ft) = accepted else { break };
        let gain = ft - f;
        core::mem::swap(&mut x, &mut trial);
        f = objective.gradient(&x, &mut g);
        debug_assert!(f >= ft - 1e-9 * ft.abs().max(1.0));
        if opts.record_trace {
            trace.push(f);
        }
        if gain <= opts.rel_tol * f.abs() {
            break;
        }
        step *= 2.0;
    }
    SphereRun {
        x,
        value: f,
        iterations,
        trace,
    }
}

/// Relaxed ML estimate on the sphere `‖x_R‖² = Nt`; best of several
/// deterministic starts (earliest start wins ties).
pub fn ml_estimate_relaxed(
    refined: &SignRefinedChannels,
    nt: usize,
    rho: f64,
    opts: &SphereOptions,
) -> Result<DetectionResult> {
    if nt != refined.nt() {
        return Err(Error::InvalidArgument("antenna count does not match refined channels"));
    }
    let c = likelihood_scale(nt, rho)?;
    let objective = ProbitObjective::new(&refined.rows, 2 * nt, c);
    let radius = libm::sqrt(nt as f64);
    let mut best: Option<SphereRun> = None;
    let mut total = 0;
    for s in 0..opts.starts.max(1) {
        let run = ascend_on_sphere(&objective, sphere_start(&objective, nt, s, opts.starts), radius, opts);
        total += run.iterations;
        // later starts must win by more than rounding noise
        if best
            .as_ref()
            .is_none_or(|b| run.value > b.value + 1e-12 * b.value.abs().max(1e-300))
        {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    Ok(DetectionResult {
        symbols: Vec::new(),
        soft: best.x,
        log_likelihood: best.value,
        iterations: total,
        objective_trace: best.trace,
    })
}

/// Zero-forcing receiver `x̌ = (Hᴴ)† ŷ = (HHᴴ)⁻¹ H ŷ`, factored once per
/// channel realization.
#[derive(Clone, Debug)]
pub struct ZfReceiver {
    nt: usize,
    /// Column `k` of `(HHᴴ)⁻¹ H`, stored back to back.
    weights: Vec<Complex64>,
}

impl ZfReceiver {
    pub fn new(channels: &[RealLiftedChannel]) -> Result<Self> {
        let nt = channels.first().map(|h| h.nt()).unwrap_or(0);
        if nt == 0 || channels.iter().any(|h| h.nt() != nt) {
            return Err(Error::InvalidArgument("channels must share a positive antenna count"));
        }
        let mut gram = vec![Complex64::new(0.0, 0.0); nt * nt];
        for h in channels {
            let v = h.complex();
            for a in 0..nt {
                for b in 0..nt {
                    gram[a * nt + b] += v[a] * v[b].conj();
                }
            }
        }
        let l = hermitian_cholesky(&gram, nt)?;
        let mut weights = Vec::with_capacity(nt * channels.len());
        for h in channels {
            let mut col = h.complex().to_vec();
            hermitian_solve(&l, nt, &mut col);
            weights.extend(col);
        }
        Ok(Self { nt, weights })
    }

    pub fn nodes(&self) -> usize {
        self.weights.len() / self.nt
    }

    pub fn soft(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.nodes() {
            return Err(Error::InvalidArgument("observation length differs from node count"));
        }
        let mut x = vec![Complex64::new(0.0, 0.0); self.nt];
        for (col, yk) in self.weights.chunks_exact(self.nt).zip(y) {
            for (xa, w) in x.iter_mut().zip(col) {
                *xa += w * yk;
            }
        }
        Ok(x)
    }
}

/// Symbol-by-symbol nearest-point decisions.
pub fn detect_symbols(soft: &[Complex64], constellation: &Constellation) -> Vec<usize> {
    soft.iter().map(|&z| constellation.nearest(z)).collect()
}

pub fn zf_receive(
    channels: &[RealLiftedChannel],
    obs: &QuantizedBlock,
    constellation: &Constellation,
) -> Result<DetectionResult> {
    let rx = ZfReceiver::new(channels)?;
    let soft = rx.soft(obs.quantized())?;
    Ok(DetectionResult {
        symbols: detect_symbols(&soft, constellation),
        soft: stack_real(&soft),
        log_likelihood: f64::NAN,
        iterations: 0,
        objective_trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{draw_channel, draw_symbols, make_psk, quantize, transmit_data, transmit_data_with, NoiseMode};
    use crate::numerics::RandomStream;

    #[test]
    fn refinement_flips_columns() {
        let h = RealLiftedChannel::from_complex(vec![Complex64::new(0.5, -1.5), Complex64::new(2.0, 0.25)]);
        let obs = quantize(&[Complex64::new(1.0, -1.0)]).unwrap();
        let r = sign_refine(core::slice::from_ref(&h), &obs).unwrap();
        assert_eq!(r.vector(0, 0), h.column(0));
        let neg: Vec<f64> = h.column(1).iter().map(|v| -v).collect();
        assert_eq!(r.vector(0, 1), &neg[..]);
        assert_eq!(crate::linalg::dot(r.vector(0, 0), r.vector(0, 1)), 0.0);
        let two = quantize(&[Complex64::new(1.0, 1.0); 2]).unwrap();
        assert!(sign_refine(core::slice::from_ref(&h), &two).is_err());
    }

    #[test]
    fn degenerate_channel_ties_to_first_candidate() {
        let zero = RealLiftedChannel::from_complex(vec![Complex64::new(0.0, 0.0); 2]);
        let obs = quantize(&[Complex64::new(1.0, 1.0); 3]).unwrap();
        let r = sign_refine(&[zero.clone(), zero.clone(), zero], &obs).unwrap();
        let res = ml_receive(&r, &make_psk(4).unwrap(), 2, 3.0).unwrap();
        assert_eq!(res.symbols, vec![0, 0]);
    }

    #[test]
    fn enumeration_guard() {
        let mut s = RandomStream::new(1, 0);
        let hs = draw_channel(7, 2, &mut s);
        let obs = quantize(&[Complex64::new(1.0, 1.0); 2]).unwrap();
        let r = sign_refine(&hs, &obs).unwrap();
        assert!(matches!(
            ml_receive(&r, &make_psk(8).unwrap(), 7, 1.0),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn relaxed_collinear_rows_point_along_shared_vector() {
        let v = [0.3, -1.2, 0.7, 0.4];
        let rows: Vec<f64> = (0..6).flat_map(|_| v).collect();
        let r = SignRefinedChannels::from_rows(2, rows).unwrap();
        let res = ml_estimate_relaxed(&r, 2, 5.0, &SphereOptions::default()).unwrap();
        let scale = 2f64.sqrt() / norm(&v);
        // objective-value acceptance resolves the optimum to ~sqrt(eps)
        for (a, b) in res.soft.iter().zip(v) {
            assert!((a - b * scale).abs() < 1e-6);
        }
    }

    #[test]
    fn relaxed_stays_on_sphere_and_ascends() {
        let mut s = RandomStream::new(4, 0);
        let c = make_psk(4).unwrap();
        for _ in 0..20 {
            let hs = draw_channel(2, 16, &mut s);
            let (_, x) = draw_symbols(&c, 2, &mut s);
            let obs = transmit_data(&hs, &x, 10.0, &mut s).unwrap();
            let r = sign_refine(&hs, &obs).unwrap();
            let opts = SphereOptions {
                record_trace: true,
                ..SphereOptions::default()
            };
            let res = ml_estimate_relaxed(&r, 2, 10.0, &opts).unwrap();
            let n2: f64 = res.soft.iter().map(|v| v * v).sum();
            assert!((n2 - 2.0).abs() < 1e-9);
            assert!(res.objective_trace.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn zf_noiseless_unquantized_recovers_scaled_symbols() {
        let mut s = RandomStream::new(8, 0);
        let c = make_psk(8).unwrap();
        let hs = draw_channel(4, 12, &mut s);
        let (_, x) = draw_symbols(&c, 4, &mut s);
        let rho = 7.0;
        let obs = transmit_data_with(&hs, &x, rho, &mut s, NoiseMode::Noiseless).unwrap();
        let soft = ZfReceiver::new(&hs).unwrap().soft(obs.raw()).unwrap();
        let amp = (rho / 4.0f64).sqrt();
        for (a, b) in soft.iter().zip(&x) {
            assert!((a - b * amp).norm() / amp < 1e-10);
        }
    }

    #[test]
    fn zf_nearest_point_and_rank_guard() {
        let q = make_psk(4).unwrap();
        assert_eq!(detect_symbols(&[Complex64::new(2.0, 0.0)], &q), vec![0]);
        let mut s = RandomStream::new(2, 0);
        let hs = draw_channel(4, 3, &mut s);
        assert!(matches!(ZfReceiver::new(&hs), Err(Error::Singular { .. })));
    }
}
