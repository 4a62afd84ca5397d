//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls the solvers under test.

#![allow(dead_code)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use qdr_core::{Complex64, Constellation, QuantizedBlock, RealLiftedChannel};

/// Φ(t) straight from erfc; only accurate while it does not underflow.
pub fn cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
}

/// `log Φ(t)` for `t < -20` from the Laplace continued fraction of the Mills
/// ratio, `Q(u)/φ(u) = 1/(u + 1/(u + 2/(u + 3/(u + ...))))`.
pub fn log_cdf_tail(t: f64) -> f64 {
    let u = -t;
    let mut frac = u;
    for n in (1..200).rev() {
        frac = u + n as f64 / frac;
    }
    -0.5 * u * u - 0.5 * (2.0 * PI).ln() - frac.ln()
}

/// Brute-force ML detector working in the complex domain; candidate `c`
/// maps to digits of `c` in base `M` (antenna 0 most significant).
/// `product` selects the literal product of Φ instead of the log-sum.
pub fn naive_ml(
    channels: &[RealLiftedChannel],
    obs: &QuantizedBlock,
    constellation: &Constellation,
    rho: f64,
    product: bool,
) -> Vec<usize> {
    let nt = channels[0].nt();
    let m = constellation.len();
    let total = m.pow(nt as u32);
    let scale = (2.0 * rho / nt as f64).sqrt();
    let mut best = None::<(f64, usize)>;
    for c in 0..total {
        let idx = digits(c, m, nt);
        let x: Vec<Complex64> = idx.iter().map(|&i| constellation.point(i)).collect();
        let mut prod = 1.0;
        let mut sum = 0.0;
        for (k, h) in channels.iter().enumerate() {
            let z: Complex64 = h.complex().iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
            let q = obs.quantized()[k];
            for t in [scale * q.re * z.re, scale * q.im * z.im] {
                let p = cdf(t);
                prod *= p;
                sum += p.ln();
            }
        }
        let score = if product { prod } else { sum };
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, c));
        }
    }
    digits(best.unwrap().1, m, nt)
}

fn digits(mut c: usize, m: usize, nt: usize) -> Vec<usize> {
    let mut out = vec![0; nt];
    for a in (0..nt).rev() {
        out[a] = c % m;
        c /= m;
    }
    out
}

/// Log-likelihood of a 2-D probit model via direct erfc evaluation.
pub fn probit_2d(rows: &[[f64; 2]], scale: f64, x: [f64; 2]) -> f64 {
    rows.iter()
        .map(|r| cdf(scale * (r[0] * x[0] + r[1] * x[1])).ln())
        .sum()
}

/// Angle on the unit circle maximizing the probit likelihood, by grid
/// search at `step` radians.
pub fn circle_argmax(rows: &[[f64; 2]], scale: f64, radius: f64, step: f64) -> f64 {
    let n = (2.0 * PI / step).ceil() as usize;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let th = i as f64 * step;
        let v = probit_2d(rows, scale, [radius * th.cos(), radius * th.sin()]);
        if v > best.0 {
            best = (v, th);
        }
    }
    best.1
}

/// Maximizer over the disc `r ≤ radius`: golden-section search in `r` (the
/// likelihood is concave along rays) for every grid angle.
pub fn disc_argmax(rows: &[[f64; 2]], scale: f64, radius: f64, step: f64) -> f64 {
    let n = (2.0 * PI / step).ceil() as usize;
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let th = i as f64 * step;
        let (c, s) = (th.cos(), th.sin());
        let f = |r: f64| probit_2d(rows, scale, [r * c, r * s]);
        let (mut a, mut b) = (0.0, radius);
        let mut x1 = b - golden * (b - a);
        let mut x2 = a + golden * (b - a);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..40 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + golden * (b - a);
                f2 = f(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - golden * (b - a);
                f1 = f(x1);
            }
        }
        let v = f(radius).max(f1.max(f2));
        if v > best.0 {
            best = (v, th);
        }
    }
    best.1
}

pub fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}
