//! Loop-level Iwasawa splitting Φ = F·B via spectral factorization of
//! P = Φ*Φ (block-Toeplitz Cholesky).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::loops::{circle_samples, loop_eval, loop_mul, loop_star, plus_inverse, LaurentLoop, Mat2C, Window};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IwasawaOptions {
    pub tol: f64,
    /// Initial number of Toeplitz block rows; 0 means 4·N.
    pub blocks: usize,
    /// Refinement adds max(N, 8) block rows per round up to this limit.
    pub max_blocks: usize,
    /// When false, a single factorization with `blocks` rows is used as is.
    /// Neighbouring evaluations then share one truncation, which keeps
    /// finite differences smooth.
    pub adaptive: bool,
}

impl Default for IwasawaOptions {
    fn default() -> Self {
        IwasawaOptions { tol: 1e-9, blocks: 0, max_blocks: 512, adaptive: true }
    }
}

#[derive(Debug, Clone)]
pub struct IwasawaResult {
    pub phi: LaurentLoop,
    pub f: LaurentLoop,
    pub b: LaurentLoop,
    /// max ‖F F† − I‖ over 32 circle samples (pointwise F = Φ·B⁻¹).
    pub unitarity_error: f64,
    /// max ‖Φ − F·B‖ over the same samples, F from the truncated loop.
    pub residual: f64,
    /// Toeplitz block rows used by the accepted factor.
    pub blocks: usize,
}

impl IwasawaResult {
    /// F(λ) = Φ(λ)·B(λ)⁻¹ evaluated directly, without truncating F.
    pub fn frame_at(&self, lambda: Complex64) -> Result<Mat2C> {
        let b = loop_eval(&self.b, lambda)?;
        let binv = b
            .try_inv()
            .ok_or_else(|| Error::Factorization(format!("plus factor singular at lambda = {lambda}")))?;
        Ok(loop_eval(&self.phi, lambda)? * binv)
    }
}

const PD_SAMPLES: usize = 32;

/// Smallest eigenvalue of the Hermitian part of a 2×2 matrix.
fn min_eig_hermitian(m: &Mat2C) -> f64 {
    let h = (*m + m.dagger()).scale_re(0.5);
    let a = h.get(0, 0).re;
    let d = h.get(1, 1).re;
    let b = h.get(0, 1);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    mean - rad
}

fn cholesky_last_row(p: &LaurentLoop, m: usize, n_out: usize) -> Result<Vec<Mat2C>> {
    let dim = 2 * m;
    let mut t = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..m {
        for j in 0..m {
            let blk = p.coeff(j as i32 - i as i32);
            for r in 0..2 {
                for c in 0..2 {
                    t[(2 * i + r, 2 * j + c)] = blk.get(r, c);
                }
            }
        }
    }
    // Enforce exact Hermitian symmetry against round-off in P.
    let t = (&t + t.adjoint()) * Complex64::new(0.5, 0.0);
    let chol = t
        .cholesky()
        .ok_or_else(|| Error::Factorization(format!("block Toeplitz matrix with {m} blocks is not positive definite")))?;
    let l = chol.l();
    let last = 2 * (m - 1);
    let n = n_out.min(m - 1);
    let mut out = Vec::with_capacity(n + 1);
    for s in 0..=n {
        let col = 2 * (m - 1 - s);
        let blk = Mat2C::new(l[(last, col)], l[(last, col + 1)], l[(last + 1, col)], l[(last + 1, col + 1)]);
        out.push(blk.dagger());
    }
    Ok(out)
}

/// QR-type split of a constant matrix: A = Q·R, Q unitary, R upper
/// triangular with positive diagonal.
pub fn qr2(a: &Mat2C) -> Option<(Mat2C, Mat2C)> {
    let c0 = [a.get(0, 0), a.get(1, 0)];
    let c1 = [a.get(0, 1), a.get(1, 1)];
    let r00 = (c0[0].norm_sqr() + c0[1].norm_sqr()).sqrt();
    if r00 == 0.0 {
        return None;
    }
    let q0 = [c0[0] / r00, c0[1] / r00];
    let r01 = q0[0].conj() * c1[0] + q0[1].conj() * c1[1];
    let v = [c1[0] - q0[0] * r01, c1[1] - q0[1] * r01];
    let r11 = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    if r11 == 0.0 {
        return None;
    }
    let q1 = [v[0] / r11, v[1] / r11];
    let q = Mat2C::new(q0[0], q1[0], q0[1], q1[1]);
    let r = Mat2C::new(r00.into(), r01, 0.0.into(), r11.into());
    Some((q, r))
}

/// Plus-loop B on `window` (degrees 0..=window.hi) with B*·B = P on the
/// circle and B₀ upper triangular with positive diagonal.
pub fn spectral_factor_plus(p: &LaurentLoop, window: Window, opts: &IwasawaOptions) -> Result<LaurentLoop> {
    factor_with_blocks(p, window, opts).map(|(b, _)| b)
}

fn factor_with_blocks(p: &LaurentLoop, window: Window, opts: &IwasawaOptions) -> Result<(LaurentLoop, usize)> {
    let herm = p.max_coeff_diff(&loop_star(p));
    let scale = p.coeffs().iter().map(Mat2C::max_abs).fold(0.0, f64::max).max(1.0);
    if herm > 1e-8 * scale {
        return Err(Error::Factorization(format!("P is not Hermitian on the circle (defect {herm:.3e})")));
    }
    for lam in circle_samples(PD_SAMPLES) {
        let v = loop_eval(p, lam)?;
        if !v.is_finite() || min_eig_hermitian(&v) <= 0.0 {
            return Err(Error::NotPositiveDefinite { lambda: lam });
        }
    }
    let p = p.trimmed(0.0);
    let n_out = window.hi.max(0) as usize;
    let mut m = if opts.blocks == 0 { 4 * n_out.max(1) } else { opts.blocks };
    m = m.max(2);
    let mut prev = cholesky_last_row(&p, m, n_out)?;
    let step = n_out.max(8);
    while opts.adaptive {
        let next_m = m + step;
        if next_m > opts.max_blocks.max(m) {
            return Err(Error::Convergence(format!(
                "plus factor not stable to {:.1e} with {m} Toeplitz blocks",
                opts.tol
            )));
        }
        let next = cholesky_last_row(&p, next_m, n_out)?;
        let diff = prev
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (*a - *b).max_abs())
            .chain(next.iter().skip(prev.len()).map(Mat2C::max_abs))
            .fold(0.0, f64::max);
        m = next_m;
        prev = next;
        if diff <= opts.tol {
            break;
        }
    }
    let b = LaurentLoop::new(0, prev);
    // Final constant correction so that B₀ is exactly upper triangular with
    // positive diagonal (Cholesky already gives this up to round-off).
    let (q, _) = qr2(&b.coeff(0)).ok_or_else(|| Error::Factorization("singular constant term".into()))?;
    Ok((b.left_mul(&q.dagger()).with_tail_norm(0.0), m))
}

/// Φ = F·B with F unitary on the circle and B a normalized plus-loop.
pub fn iwasawa(phi: &LaurentLoop, window: Window, opts: &IwasawaOptions) -> Result<IwasawaResult> {
    let full = Window::new(
        (phi.k_min() - phi.k_max()).min(0),
        (phi.k_max() - phi.k_min()).max(0),
    );
    let p = loop_mul(&loop_star(phi), phi, full);
    let (b, blocks) = factor_with_blocks(&p, Window::plus(window.hi.max(0)), opts)?;
    let binv = plus_inverse(&b, Window::plus(window.hi.max(0)))?;
    let f = loop_mul(phi, &binv, window);
    let mut res = IwasawaResult {
        phi: phi.clone(),
        f,
        b,
        unitarity_error: 0.0,
        residual: 0.0,
        blocks,
    };
    for lam in circle_samples(PD_SAMPLES) {
        let fp = res.frame_at(lam)?;
        res.unitarity_error = res.unitarity_error.max(fp.unitarity_error());
        let fb = loop_eval(&res.f, lam)? * loop_eval(&res.b, lam)?;
        res.residual = res.residual.max((loop_eval(phi, lam)? - fb).max_abs());
    }
    Ok(res)
}
