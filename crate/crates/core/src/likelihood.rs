//! Probit log-likelihood `F(x) = Σ_i log Φ(c · a_iᵀ x)` shared by the
//! relaxed ML detector and the ML channel estimator.

use alloc::vec::Vec;

use crate::numerics::{d2log_phi, dlog_phi, log_phi};

pub(crate) struct ProbitObjective<'a> {
    /// Sign-refined rows `a_i`, each of length `dim`, back to back.
    rows: &'a [f64],
    dim: usize,
    scale: f64,
}

impl<'a> ProbitObjective<'a> {
    pub(crate) fn new(rows: &'a [f64], dim: usize, scale: f64) -> Self {
        debug_assert!(dim > 0 && rows.len().is_multiple_of(dim));
        Self { rows, dim, scale }
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    fn margins<'s>(&'s self, x: &'s [f64]) -> impl Iterator<Item = (&'a [f64], f64)> + 's {
        let scale = self.scale;
        self.rows
            .chunks_exact(self.dim)
            .map(move |r| (r, scale * crate::linalg::dot(r, x)))
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        self.margins(x).map(|(_, t)| log_phi(t)).sum()
    }

    pub(crate) fn gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut f = 0.0;
        for (r, t) in self.margins(x) {
            f += log_phi(t);
            let w = self.scale * dlog_phi(t);
            for (g, a) in grad.iter_mut().zip(r) {
                *g += w * a;
            }
        }
        f
    }

    /// Value, gradient and the negated Hessian (positive semidefinite,
    /// row-major `dim × dim`).
    pub(crate) fn second_order(&self, x: &[f64], grad: &mut [f64], neg_hess: &mut [f64]) -> f64 {
        let d = self.dim;
        grad.iter_mut().for_each(|g| *g = 0.0);
        neg_hess.iter_mut().for_each(|h| *h = 0.0);
        let mut f = 0.0;
        let s2 = self.scale * self.scale;
        for (r, t) in self.margins(x) {
            f += log_phi(t);
            let lambda = dlog_phi(t);
            let w = self.scale * lambda;
            let curv = -s2 * d2log_phi(t, lambda);
            for p in 0..d {
                grad[p] += w * r[p];
                let cp = curv * r[p];
                for q in 0..=p {
                    neg_hess[p * d + q] += cp * r[q];
                }
            }
        }
        for p in 0..d {
            for q in 0..p {
                neg_hess[q * d + p] = neg_hess[p * d + q];
            }
        }
        f
    }

    pub(crate) fn row_sum(&self) -> Vec<f64> {
        let mut s = alloc::vec![0.0; self.dim];
        for r in self.rows.chunks_exact(self.dim) {
            for (acc, a) in s.iter_mut().zip(r) {
                *acc += a;
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;
    use alloc::vec;

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut s = RandomStream::new(11, 0);
        let dim = 4;
        let rows: Vec<f64> = (0..12 * dim).map(|_| s.standard_normal()).collect();
        let f = ProbitObjective::new(&rows, dim, 1.7);
        for _ in 0..20 {
            let x: Vec<f64> = (0..dim).map(|_| s.standard_normal()).collect();
            let mut g = vec![0.0; dim];
            let mut h = vec![0.0; dim * dim];
            f.second_order(&x, &mut g, &mut h);
            let eps = 1e-5;
            for p in 0..dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[p] += eps;
                xm[p] -= eps;
                let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * eps);
                assert!((fd - g[p]).abs() <= 1e-6 * (1.0 + g[p].abs()), "grad {p}");
                let mut gp = vec![0.0; dim];
                let mut gm = vec![0.0; dim];
                f.gradient(&xp, &mut gp);
                f.gradient(&xm, &mut gm);
                for q in 0..dim {
                    let fdh = -(gp[q] - gm[q]) / (2.0 * eps);
                    assert!((fdh - h[q * dim + p]).abs() <= 1e-5 * (1.0 + fdh.abs()));
                }
            }
        }
    }
}
