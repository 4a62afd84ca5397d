//! System model: PSK constellations, Rayleigh channel draws, the two-bit
//! sign quantizer, real-domain lifting and unitary training matrices.
//!
//! Real-domain index convention: for a complex vector `v` of length `n`,
//! real component `i` is `Re(v[i])` and component `n + i` is `Im(v[i])`.
//! Lifted channels and training columns follow the block structure
//! `[[Re, -Im], [Im, Re]]`, so `H_Rᵀ x_R = [Re(hᴴx); Im(hᴴx)]`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::RandomStream;

/// Unit-modulus `M`-PSK constellation with zero phase offset.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    real_pairs: Vec<[f64; 2]>,
}

impl Constellation {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn real_pairs(&self) -> &[[f64; 2]] {
        &self.real_pairs
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Nearest point by Euclidean distance; ties go to the smallest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (m, s) in self.points.iter().enumerate() {
            let d = (z - s).norm_sqr();
            if d < best_d {
                best_d = d;
                best = m;
            }
        }
        best
    }

    /// Symbol vector for a list of indices.
    pub fn symbols(&self, indices: &[usize]) -> Vec<Complex64> {
        indices.iter().map(|&i| self.points[i]).collect()
    }
}

pub fn make_psk(m: usize) -> Result<Constellation> {
    if m < 2 {
        return Err(Error::InvalidArgument("PSK order must be at least 2"));
    }
    let points: Vec<Complex64> = (0..m)
        .map(|i| {
            // exact axes for the common quarter-turn points
            let (num, den) = reduce(4 * i, m);
            match (num, den) {
                (0, 1) => Complex64::new(1.0, 0.0),
                (1, 1) => Complex64::new(0.0, 1.0),
                (2, 1) => Complex64::new(-1.0, 0.0),
                (3, 1) => Complex64::new(0.0, -1.0),
                _ => Complex64::from_polar(1.0, 2.0 * PI * i as f64 / m as f64),
            }
        })
        .collect();
    let real_pairs = points.iter().map(|p| [p.re, p.im]).collect();
    Ok(Constellation { points, real_pairs })
}

fn reduce(num: usize, den: usize) -> (usize, usize) {
    let (mut a, mut b) = (num, den);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    let g = a.max(1);
    (num / g, den / g)
}

/// Channel of one receive node together with its real lifting.
#[derive(Clone, Debug, PartialEq)]
pub struct RealLiftedChannel {
    h: Vec<Complex64>,
    /// `h_R,1 = [Re(h); Im(h)]`, which is also the stacked real channel.
    col1: Vec<f64>,
    /// `h_R,2 = [-Im(h); Re(h)]`.
    col2: Vec<f64>,
}

impl RealLiftedChannel {
    pub fn from_complex(h: Vec<Complex64>) -> Self {
        let nt = h.len();
        let mut col1 = vec![0.0; 2 * nt];
        let mut col2 = vec![0.0; 2 * nt];
        for (a, z) in h.iter().enumerate() {
            col1[a] = z.re;
            col1[nt + a] = z.im;
            col2[a] = -z.im;
            col2[nt + a] = z.re;
        }
        Self { h, col1, col2 }
    }

    /// Inverse of the stacking `[Re(h); Im(h)]`.
    pub fn from_stacked(h_r: &[f64]) -> Result<Self> {
        if h_r.is_empty() || !h_r.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument("stacked channel must have even, non-zero length"));
        }
        let nt = h_r.len() / 2;
        Ok(Self::from_complex(
            (0..nt).map(|a| Complex64::new(h_r[a], h_r[nt + a])).collect(),
        ))
    }

    pub fn nt(&self) -> usize {
        self.h.len()
    }

    pub fn complex(&self) -> &[Complex64] {
        &self.h
    }

    pub fn h_r_stack(&self) -> &[f64] {
        &self.col1
    }

    /// Lifted column `i ∈ {0, 1}`.
    pub fn column(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.col1,
            1 => &self.col2,
            _ => panic!("lifted channel has two columns"),
        }
    }

    /// `H_R` as a row-major `2Nt × 2` matrix.
    pub fn lifted_matrix(&self) -> Vec<f64> {
        (0..2 * self.nt())
            .flat_map(|r| [self.col1[r], self.col2[r]])
            .collect()
    }

    /// `H_Rᵀ x_R`.
    pub fn project(&self, x_r: &[f64]) -> [f64; 2] {
        [
            crate::linalg::dot(&self.col1, x_r),
            crate::linalg::dot(&self.col2, x_r),
        ]
    }

    /// `hᴴ x` in the complex domain.
    pub fn inner(&self, x: &[Complex64]) -> Complex64 {
        self.h.iter().zip(x).map(|(h, x)| h.conj() * x).sum()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.col1)
    }
}

/// `[Re(v); Im(v)]`.
pub fn stack_real(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

/// Training matrix `X ∈ C^{Nt×T}` and its lifted columns.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingBlock {
    nt: usize,
    t: usize,
    /// Row-major `Nt × T`.
    x: Vec<Complex64>,
    /// `2T` lifted columns, each of length `2Nt`, stored back to back.
    columns: Vec<f64>,
}

impl TrainingBlock {
    pub fn from_matrix(nt: usize, t: usize, x: Vec<Complex64>) -> Result<Self> {
        if nt == 0 || t == 0 {
            return Err(Error::InvalidArgument("training dimensions must be positive"));
        }
        if x.len() != nt * t {
            return Err(Error::InvalidArgument("training matrix size does not match Nt x T"));
        }
        let d = 2 * nt;
        let mut columns = vec![0.0; 2 * t * d];
        for i in 0..t {
            for a in 0..nt {
                let z = x[a * t + i];
                let re = &mut columns[i * d..(i + 1) * d];
                re[a] = z.re;
                re[nt + a] = z.im;
                let im = &mut columns[(t + i) * d..(t + i + 1) * d];
                im[a] = -z.im;
                im[nt + a] = z.re;
            }
        }
        Ok(Self { nt, t, x, columns })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn entry(&self, antenna: usize, use_index: usize) -> Complex64 {
        self.x[antenna * self.t + use_index]
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.x
    }

    /// Lifted column `x_R,i` for `i ∈ 0..2T`.
    pub fn column(&self, i: usize) -> &[f64] {
        let d = 2 * self.nt;
        &self.columns[i * d..(i + 1) * d]
    }

    /// `X_R` as a row-major `2Nt × 2T` matrix.
    pub fn lifted_matrix(&self) -> Vec<f64> {
        let d = 2 * self.nt;
        let cols = 2 * self.t;
        let mut m = vec![0.0; d * cols];
        for i in 0..cols {
            for r in 0..d {
                m[r * cols + i] = self.columns[i * d + r];
            }
        }
        m
    }

    /// `Xᴴ h`, the noiseless training response before scaling.
    pub fn response(&self, h: &[Complex64]) -> Vec<Complex64> {
        (0..self.t)
            .map(|i| (0..self.nt).map(|a| self.entry(a, i).conj() * h[a]).sum())
            .collect()
    }
}

/// Deterministic unitary training from the discrete Fourier matrix.
///
/// `Nt < T`: the first `Nt` rows of the unitary `T`-point DFT scaled by
/// `√(T/Nt)`, so `XXᴴ = (T/Nt) I`. `Nt ≥ T`: the first `T` columns of the
/// unitary `Nt`-point DFT, so `XᴴX = I`.
pub fn make_training(nt: usize, t: usize) -> Result<TrainingBlock> {
    if nt == 0 || t == 0 {
        return Err(Error::InvalidArgument("training dimensions must be positive"));
    }
    let n = nt.max(t);
    let gain = if nt < t {
        libm::sqrt(t as f64 / nt as f64)
    } else {
        1.0
    };
    let amp = gain / libm::sqrt(n as f64);
    let mut x = Vec::with_capacity(nt * t);
    for a in 0..nt {
        for i in 0..t {
            let k = (a * i) % n;
            let angle = -2.0 * PI * k as f64 / n as f64;
            x.push(Complex64::from_polar(amp, angle));
        }
    }
    TrainingBlock::from_matrix(nt, t, x)
}

/// Random unitary training satisfying the same Gram conditions as
/// [`make_training`]: complex Gaussian rows (`Nt < T`) or columns
/// (`Nt ≥ T`) orthonormalized by modified Gram-Schmidt.
pub fn draw_training(nt: usize, t: usize, stream: &mut RandomStream) -> Result<TrainingBlock> {
    if nt == 0 || t == 0 {
        return Err(Error::InvalidArgument("training dimensions must be positive"));
    }
    // vectors to orthonormalize: `count` vectors of length `len`
    let (count, len) = if nt < t { (nt, t) } else { (t, nt) };
    let mut v: Vec<Complex64> = (0..count * len).map(|_| stream.complex_normal()).collect();
    for j in 0..count {
        // two passes keep the Gram residual at rounding level
        for _ in 0..2 {
            for p in 0..j {
                let proj: Complex64 = (0..len).map(|e| v[p * len + e].conj() * v[j * len + e]).sum();
                for e in 0..len {
                    let q = v[p * len + e];
                    v[j * len + e] -= proj * q;
                }
            }
        }
        let nrm = libm::sqrt((0..len).map(|e| v[j * len + e].norm_sqr()).sum::<f64>());
        if !(nrm > 1e-12) {
            return Err(Error::Singular {
                dimension: j,
                size: count,
            });
        }
        for e in 0..len {
            v[j * len + e] /= nrm;
        }
    }
    let x = if nt < t {
        let gain = libm::sqrt(t as f64 / nt as f64);
        v.into_iter().map(|z| z * gain).collect()
    } else {
        let mut x = vec![Complex64::new(0.0, 0.0); nt * t];
        for i in 0..t {
            for a in 0..nt {
                x[a * t + i] = v[i * len + a];
            }
        }
        x
    };
    TrainingBlock::from_matrix(nt, t, x)
}

/// Two-bit quantized observations and the raw values they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedBlock {
    raw: Vec<Complex64>,
    quantized: Vec<Complex64>,
    signs_real: Vec<f64>,
}

impl QuantizedBlock {
    pub fn len(&self) -> usize {
        self.quantized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quantized.is_empty()
    }

    pub fn raw(&self) -> &[Complex64] {
        &self.raw
    }

    pub fn quantized(&self) -> &[Complex64] {
        &self.quantized
    }

    /// Stacked real-domain signs `[sgn Re(y); sgn Im(y)]`.
    pub fn signs_real(&self) -> &[f64] {
        &self.signs_real
    }

    /// Sign of part `i` (0 = real, 1 = imaginary) of entry `k`.
    pub fn real_sign(&self, k: usize, i: usize) -> f64 {
        self.signs_real[i * self.len() + k]
    }
}

/// `sgn(x) = 1` for `x ≥ 0`, `-1` otherwise.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn quantize(y: &[Complex64]) -> Result<QuantizedBlock> {
    if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("non-finite observation"));
    }
    let quantized: Vec<Complex64> = y.iter().map(|z| Complex64::new(sgn(z.re), sgn(z.im))).collect();
    let signs_real = stack_real(&quantized);
    Ok(QuantizedBlock {
        raw: y.to_vec(),
        quantized,
        signs_real,
    })
}

/// `K` i.i.d. `CN(0, I_Nt)` channels.
pub fn draw_channel(nt: usize, k: usize, stream: &mut RandomStream) -> Vec<RealLiftedChannel> {
    (0..k)
        .map(|_| RealLiftedChannel::from_complex((0..nt).map(|_| stream.complex_normal()).collect()))
        .collect()
}

/// Uniform i.i.d. data symbols: indices and the corresponding vector.
pub fn draw_symbols(
    constellation: &Constellation,
    nt: usize,
    stream: &mut RandomStream,
) -> (Vec<usize>, Vec<Complex64>) {
    let idx: Vec<usize> = (0..nt).map(|_| stream.index(constellation.len())).collect();
    let x = constellation.symbols(&idx);
    (idx, x)
}

/// Whether receiver noise is drawn. `Noiseless` is a diagnostic limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Awgn,
    Noiseless,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("SNR must be positive and finite"))
    }
}

/// Data phase: `y_k = √(ρ/Nt) h_kᴴ x + n_k` at every node, then quantized.
pub fn transmit_data(
    channels: &[RealLiftedChannel],
    x: &[Complex64],
    rho: f64,
    stream: &mut RandomStream,
) -> Result<QuantizedBlock> {
    transmit_data_with(channels, x, rho, stream, NoiseMode::Awgn)
}

pub fn transmit_data_with(
    channels: &[RealLiftedChannel],
    x: &[Complex64],
    rho: f64,
    stream: &mut RandomStream,
    noise: NoiseMode,
) -> Result<QuantizedBlock> {
    check_rho(rho)?;
    let nt = x.len();
    if nt == 0 || channels.iter().any(|h| h.nt() != nt) {
        return Err(Error::InvalidArgument("channel and symbol dimensions differ"));
    }
    let energy: f64 = x.iter().map(|s| s.norm_sqr()).sum();
    if (energy - nt as f64).abs() > 1e-9 * nt as f64 {
        return Err(Error::InvalidArgument("symbol vector must satisfy ||x||^2 = Nt"));
    }
    let amp = libm::sqrt(rho / nt as f64);
    let y: Vec<Complex64> = channels
        .iter()
        .map(|h| {
            let s = h.inner(x) * amp;
            match noise {
                NoiseMode::Awgn => s + stream.complex_normal(),
                NoiseMode::Noiseless => s,
            }
        })
        .collect();
    quantize(&y)
}

/// Training phase at one node: `y = √(ρ/Nt) Xᴴ h + n`, quantized.
/// Real-domain sign `i` multiplies lifted training column `i`.
pub fn transmit_training(
    h: &RealLiftedChannel,
    training: &TrainingBlock,
    rho: f64,
    stream: &mut RandomStream,
) -> Result<QuantizedBlock> {
    transmit_training_with(h, training, rho, stream, NoiseMode::Awgn)
}

pub fn transmit_training_with(
    h: &RealLiftedChannel,
    training: &TrainingBlock,
    rho: f64,
    stream: &mut RandomStream,
    noise: NoiseMode,
) -> Result<QuantizedBlock> {
    check_rho(rho)?;
    if h.nt() != training.nt() {
        return Err(Error::InvalidArgument("channel and training dimensions differ"));
    }
    let amp = libm::sqrt(rho / h.nt() as f64);
    let y: Vec<Complex64> = training
        .response(h.complex())
        .into_iter()
        .map(|s| match noise {
            NoiseMode::Awgn => s * amp + stream.complex_normal(),
            NoiseMode::Noiseless => s * amp,
        })
        .collect();
    quantize(&y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_gram_error(tb: &TrainingBlock) -> f64 {
        let (nt, t) = (tb.nt(), tb.t());
        let mut worst: f64 = 0.0;
        if nt < t {
            let target = t as f64 / nt as f64;
            for a in 0..nt {
                for b in 0..nt {
                    let g: Complex64 = (0..t).map(|i| tb.entry(a, i) * tb.entry(b, i).conj()).sum();
                    let want = if a == b { target } else { 0.0 };
                    worst = worst.max((g - want).norm());
                }
            }
        } else {
            for i in 0..t {
                for j in 0..t {
                    let g: Complex64 = (0..nt).map(|a| tb.entry(a, i).conj() * tb.entry(a, j)).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((g - want).norm());
                }
            }
        }
        worst
    }

    #[test]
    fn psk_points() {
        let c = make_psk(2).unwrap();
        assert_eq!(c.points(), &[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        let q = make_psk(4).unwrap();
        assert_eq!(
            q.points(),
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, -1.0)
            ]
        );
        let e = make_psk(8).unwrap();
        let mut dmin = f64::INFINITY;
        for (i, a) in e.points().iter().enumerate() {
            assert!((a.norm_sqr() - 1.0).abs() < 1e-15);
            assert_eq!(e.real_pairs()[i], [a.re, a.im]);
            for b in &e.points()[i + 1..] {
                dmin = dmin.min((a - b).norm());
            }
        }
        assert!((dmin - 2.0 * (PI / 8.0).sin()).abs() < 1e-12);
        assert!(make_psk(1).is_err());
        assert!(make_psk(3).is_ok());
    }

    #[test]
    fn quantizer_edges() {
        let q = quantize(&[Complex64::new(0.3, -0.2), Complex64::new(0.0, 0.0)]).unwrap();
        assert_eq!(q.quantized(), &[Complex64::new(1.0, -1.0), Complex64::new(1.0, 1.0)]);
        assert_eq!(q.signs_real(), &[1.0, 1.0, -1.0, 1.0]);
        assert_eq!(q.real_sign(0, 1), -1.0);
        let again = quantize(q.quantized()).unwrap();
        assert_eq!(again.quantized(), q.quantized());
        assert!(quantize(&[Complex64::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn small_training_examples() {
        let tb = make_training(1, 2).unwrap();
        assert!((tb.entry(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((tb.entry(0, 1) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(max_gram_error(&make_training(2, 2).unwrap()) < 1e-12);
        assert!(max_gram_error(&make_training(4, 64).unwrap()) < 1e-12);
    }

    #[test]
    fn gram_conditions_hold_on_grid() {
        let mut stream = RandomStream::new(5, 0);
        for nt in [1, 2, 4, 8] {
            for p in 0..=9 {
                let t = 1 << p;
                let det = make_training(nt, t).unwrap();
                assert!(max_gram_error(&det) < 1e-12, "dft nt={nt} t={t}");
                let rnd = draw_training(nt, t, &mut stream).unwrap();
                assert!(max_gram_error(&rnd) < 1e-12, "random nt={nt} t={t}");
            }
        }
    }

    #[test]
    fn training_lifting_matches_block_structure() {
        let tb = make_training(3, 5).unwrap();
        let m = tb.lifted_matrix();
        let (d, cols) = (6, 10);
        for a in 0..3 {
            for i in 0..5 {
                let z = tb.entry(a, i);
                assert_eq!(m[a * cols + i], z.re);
                assert_eq!(m[a * cols + 5 + i], -z.im);
                assert_eq!(m[(3 + a) * cols + i], z.im);
                assert_eq!(m[(3 + a) * cols + 5 + i], z.re);
            }
        }
        assert_eq!(m.len(), d * cols);
    }

    #[test]
    fn noiseless_training_example() {
        let h = RealLiftedChannel::from_complex(vec![Complex64::new(1.0, 0.0)]);
        let tb = make_training(1, 2).unwrap();
        let mut s = RandomStream::new(1, 0);
        let q = transmit_training_with(&h, &tb, 4.0, &mut s, NoiseMode::Noiseless).unwrap();
        let raw = stack_real(q.raw());
        assert!(raw[0] > 0.0 && raw[0] == raw[1]);
        assert_eq!(&raw[2..], &[0.0, 0.0]);
        assert_eq!(q.signs_real(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn noiseless_data_is_sign_of_signal() {
        let mut s = RandomStream::new(3, 0);
        let hs = draw_channel(2, 6, &mut s);
        let c = make_psk(4).unwrap();
        let (_, x) = draw_symbols(&c, 2, &mut s);
        let q = transmit_data_with(&hs, &x, 10.0, &mut s, NoiseMode::Noiseless).unwrap();
        for (k, h) in hs.iter().enumerate() {
            let z = h.inner(&x);
            assert_eq!(q.quantized()[k], Complex64::new(sgn(z.re), sgn(z.im)));
        }
        let bad = [Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(transmit_data(&hs, &bad, 1.0, &mut s).is_err());
        assert!(transmit_data(&hs, &x, 0.0, &mut s).is_err());
    }

    #[test]
    fn mismatched_training_dimension_rejected() {
        let h = RealLiftedChannel::from_complex(vec![Complex64::new(1.0, 0.0); 2]);
        let tb = make_training(3, 4).unwrap();
        let mut s = RandomStream::new(1, 0);
        assert!(matches!(
            transmit_training(&h, &tb, 1.0, &mut s),
            Err(Error::InvalidArgument(_))
        ));
    }
}
