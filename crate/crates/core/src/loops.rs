//! 2×2 complex matrices and finite Laurent series in the spectral parameter λ.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense 2×2 complex matrix, row major.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2C(pub [[Complex64; 2]; 2]);

impl fmt::Debug for Mat2C {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]
        )
    }
}

impl Default for Mat2C {
    fn default() -> Self {
        Mat2C::zero()
    }
}

impl Mat2C {
    pub const fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Mat2C([[a, b], [c, d]])
    }

    pub fn from_real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2C::new(a.into(), b.into(), c.into(), d.into())
    }

    pub const fn zero() -> Self {
        Mat2C([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        Mat2C([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn diag(a: Complex64, d: Complex64) -> Self {
        Mat2C::new(a, ZERO, ZERO, d)
    }

    /// Matrix unit E_ij (0-based indices).
    pub fn unit(i: usize, j: usize) -> Self {
        let mut m = Mat2C::zero();
        m.0[i][j] = ONE;
        m
    }

    pub fn pauli(k: usize) -> Self {
        let i = Complex64::i();
        match k {
            1 => Mat2C::new(ZERO, ONE, ONE, ZERO),
            2 => Mat2C::new(ZERO, -i, i, ZERO),
            3 => Mat2C::new(ONE, ZERO, ZERO, -ONE),
            _ => panic!("pauli index must be 1, 2 or 3"),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[i][j]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2C::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn conj(&self) -> Self {
        let m = &self.0;
        Mat2C::new(m[0][0].conj(), m[0][1].conj(), m[1][0].conj(), m[1][1].conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.0;
        Mat2C::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Inverse via the adjugate; `None` when |det| is below `1e-300`.
    pub fn try_inv(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() < 1e-300 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        let r = d.inv();
        Some(Mat2C::new(m[1][1] * r, -m[0][1] * r, -m[1][0] * r, m[0][0] * r))
    }

    /// Inverse; panics on a singular matrix. Use [`Mat2C::try_inv`] when
    /// singularity is possible.
    pub fn inv(&self) -> Self {
        self.try_inv().expect("singular 2x2 matrix")
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|c| c.is_finite())
    }

    /// max |entry| of A·A† − I.
    pub fn unitarity_error(&self) -> f64 {
        (*self * self.dagger() - Mat2C::identity()).max_abs()
    }

    /// Principal square root of a matrix with no eigenvalue on (−∞, 0].
    /// Uses the Cayley–Hamilton formula √A = (A + s·I)/t with s = √det A
    /// and t = √(tr A + 2s).
    pub fn sqrtm(&self) -> Option<Self> {
        let s = self.det().sqrt();
        let t = (self.trace() + s * 2.0).sqrt();
        if t.norm() < 1e-300 {
            return None;
        }
        Some((*self + Mat2C::identity().scale(s)).scale(t.inv()))
    }

    /// Matrix exponential via exp(A) = e^{tr/2}(cosh(δ)I + sinh(δ)/δ·(A − tr/2·I)),
    /// δ² = −det(A − tr/2·I).
    pub fn expm(&self) -> Self {
        let h = self.trace() * 0.5;
        let a0 = *self - Mat2C::identity().scale(h);
        let d2 = -a0.det();
        let d = d2.sqrt();
        let sinhc = if d.norm() < 1e-8 {
            ONE + d2 / 6.0 + d2 * d2 / 120.0
        } else {
            d.sinh() / d
        };
        (Mat2C::identity().scale(d.cosh()) + a0.scale(sinhc)).scale(h.exp())
    }
}

impl Add for Mat2C {
    type Output = Mat2C;
    fn add(self, o: Mat2C) -> Mat2C {
        let (a, b) = (&self.0, &o.0);
        Mat2C::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl AddAssign for Mat2C {
    fn add_assign(&mut self, o: Mat2C) {
        *self = *self + o;
    }
}

impl Sub for Mat2C {
    type Output = Mat2C;
    fn sub(self, o: Mat2C) -> Mat2C {
        let (a, b) = (&self.0, &o.0);
        Mat2C::new(a[0][0] - b[0][0], a[0][1] - b[0][1], a[1][0] - b[1][0], a[1][1] - b[1][1])
    }
}

impl Neg for Mat2C {
    type Output = Mat2C;
    fn neg(self) -> Mat2C {
        self.scale_re(-1.0)
    }
}

impl Mul for Mat2C {
    type Output = Mat2C;
    #[inline]
    fn mul(self, o: Mat2C) -> Mat2C {
        let (a, b) = (&self.0, &o.0);
        Mat2C::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Mul<Complex64> for Mat2C {
    type Output = Mat2C;
    fn mul(self, s: Complex64) -> Mat2C {
        self.scale(s)
    }
}

/// Closed degree range [lo, hi] with lo ≤ 0 ≤ hi.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: i32,
    pub hi: i32,
}

impl Window {
    pub const DEFAULT_N: i32 = 16;

    pub fn new(lo: i32, hi: i32) -> Self {
        assert!(lo <= 0 && hi >= 0, "window must contain degree 0");
        Window { lo, hi }
    }

    /// [−n, n].
    pub fn symmetric(n: i32) -> Self {
        Window::new(-n, n)
    }

    /// [0, n], the window for plus-loops.
    pub fn plus(n: i32) -> Self {
        Window::new(0, n)
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: i32) -> bool {
        k >= self.lo && k <= self.hi
    }
}

impl Default for Window {
    fn default() -> Self {
        Window::symmetric(Window::DEFAULT_N)
    }
}

/// Finite Laurent series Σ_k A_k λ^k with 2×2 complex coefficients.
///
/// Coefficients are stored densely over [k_min, k_max]; `tail_norm` is the
/// accumulated Frobenius norm of coefficients dropped by truncation while
/// building this loop.
#[derive(Clone, PartialEq)]
pub struct LaurentLoop {
    k_min: i32,
    coeffs: Vec<Mat2C>,
    tail_norm: f64,
}

impl fmt::Debug for LaurentLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_map();
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.max_abs() > 0.0 {
                d.entry(&(self.k_min + i as i32), c);
            }
        }
        d.finish()
    }
}

impl LaurentLoop {
    /// Loop with coefficients `coeffs[i]` at degree `k_min + i`. The stored
    /// range is widened to contain degree 0.
    pub fn new(k_min: i32, coeffs: Vec<Mat2C>) -> Self {
        let mut l = LaurentLoop { k_min, coeffs, tail_norm: 0.0 };
        l.normalize_range();
        l
    }

    pub fn zero() -> Self {
        LaurentLoop::constant(Mat2C::zero())
    }

    pub fn identity() -> Self {
        LaurentLoop::constant(Mat2C::identity())
    }

    pub fn constant(m: Mat2C) -> Self {
        LaurentLoop { k_min: 0, coeffs: vec![m], tail_norm: 0.0 }
    }

    /// m·λ^k.
    pub fn monomial(k: i32, m: Mat2C) -> Self {
        LaurentLoop::from_terms(&[(k, m)])
    }

    /// Σ m·λ^k over the given terms (repeated degrees add).
    pub fn from_terms(terms: &[(i32, Mat2C)]) -> Self {
        let lo = terms.iter().map(|t| t.0).min().unwrap_or(0).min(0);
        let hi = terms.iter().map(|t| t.0).max().unwrap_or(0).max(0);
        let mut coeffs = vec![Mat2C::zero(); (hi - lo + 1) as usize];
        for &(k, m) in terms {
            coeffs[(k - lo) as usize] += m;
        }
        LaurentLoop { k_min: lo, coeffs, tail_norm: 0.0 }
    }

    fn normalize_range(&mut self) {
        if self.coeffs.is_empty() {
            self.k_min = 0;
            self.coeffs.push(Mat2C::zero());
        }
        if self.k_min > 0 {
            let pad = self.k_min as usize;
            let mut c = vec![Mat2C::zero(); pad];
            c.append(&mut self.coeffs);
            self.coeffs = c;
            self.k_min = 0;
        }
        while self.k_max() < 0 {
            self.coeffs.push(Mat2C::zero());
        }
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.k_min + self.coeffs.len() as i32 - 1
    }

    pub fn window(&self) -> Window {
        Window::new(self.k_min, self.k_max())
    }

    pub fn tail_norm(&self) -> f64 {
        self.tail_norm
    }

    pub fn with_tail_norm(mut self, t: f64) -> Self {
        self.tail_norm = t;
        self
    }

    /// Coefficient at degree k (zero outside the stored range).
    pub fn coeff(&self, k: i32) -> Mat2C {
        let i = k - self.k_min;
        if i < 0 || i as usize >= self.coeffs.len() {
            Mat2C::zero()
        } else {
            self.coeffs[i as usize]
        }
    }

    pub fn coeffs(&self) -> &[Mat2C] {
        &self.coeffs
    }

    /// Iterator over (degree, coefficient).
    pub fn terms(&self) -> impl Iterator<Item = (i32, &Mat2C)> + '_ {
        self.coeffs.iter().enumerate().map(move |(i, c)| (self.k_min + i as i32, c))
    }

    /// True when every negative-degree coefficient vanishes.
    pub fn is_plus(&self) -> bool {
        self.terms().all(|(k, c)| k >= 0 || c.max_abs() == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(Mat2C::is_finite)
    }

    /// Restrict to `w`, adding the dropped Frobenius mass to the tail norm.
    pub fn truncate(&self, w: Window) -> Self {
        let mut dropped = 0.0;
        let mut coeffs = vec![Mat2C::zero(); w.len()];
        for (k, c) in self.terms() {
            if w.contains(k) {
                coeffs[(k - w.lo) as usize] = *c;
            } else {
                dropped += c.frobenius();
            }
        }
        LaurentLoop { k_min: w.lo, coeffs, tail_norm: self.tail_norm + dropped }
    }

    /// Remove zero coefficients at both ends (keeping degree 0).
    pub fn trimmed(&self, eps: f64) -> Self {
        let mut lo = self.k_min;
        while lo < 0 && self.coeff(lo).max_abs() <= eps {
            lo += 1;
        }
        let mut hi = self.k_max();
        while hi > 0 && self.coeff(hi).max_abs() <= eps {
            hi -= 1;
        }
        let coeffs = (lo..=hi).map(|k| self.coeff(k)).collect();
        LaurentLoop { k_min: lo, coeffs, tail_norm: self.tail_norm }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        LaurentLoop {
            k_min: self.k_min,
            coeffs: self.coeffs.iter().map(|c| c.scale(s)).collect(),
            tail_norm: self.tail_norm * s.norm(),
        }
    }

    pub fn add(&self, o: &LaurentLoop) -> Self {
        let lo = self.k_min.min(o.k_min);
        let hi = self.k_max().max(o.k_max());
        let coeffs = (lo..=hi).map(|k| self.coeff(k) + o.coeff(k)).collect();
        LaurentLoop { k_min: lo, coeffs, tail_norm: self.tail_norm + o.tail_norm }
    }

    pub fn sub(&self, o: &LaurentLoop) -> Self {
        self.add(&o.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Multiply every coefficient on the left by a constant matrix.
    pub fn left_mul(&self, m: &Mat2C) -> Self {
        LaurentLoop {
            k_min: self.k_min,
            coeffs: self.coeffs.iter().map(|c| *m * *c).collect(),
            tail_norm: self.tail_norm * m.frobenius(),
        }
    }

    /// Multiply every coefficient on the right by a constant matrix.
    pub fn right_mul(&self, m: &Mat2C) -> Self {
        LaurentLoop {
            k_min: self.k_min,
            coeffs: self.coeffs.iter().map(|c| *c * *m).collect(),
            tail_norm: self.tail_norm * m.frobenius(),
        }
    }

    /// Largest coefficient-wise max-entry distance to another loop.
    pub fn max_coeff_diff(&self, o: &LaurentLoop) -> f64 {
        let lo = self.k_min.min(o.k_min);
        let hi = self.k_max().max(o.k_max());
        (lo..=hi).map(|k| (self.coeff(k) - o.coeff(k)).max_abs()).fold(0.0, f64::max)
    }

    /// Fit a loop on `w` from values at `n` equispaced unit-circle samples
    /// (λ_j = e^{2πij/n}) by discrete Fourier transform. Requires n > w.len().
    pub fn from_circle_samples(values: &[Mat2C], w: Window) -> Self {
        let n = values.len();
        assert!(n >= w.len(), "need at least as many samples as coefficients");
        let nf = n as f64;
        let mut coeffs = vec![Mat2C::zero(); w.len()];
        for (k, slot) in (w.lo..=w.hi).zip(coeffs.iter_mut()) {
            let mut acc = Mat2C::zero();
            for (j, v) in values.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * ((k as i64 * j as i64).rem_euclid(n as i64)) as f64 / nf;
                acc += v.scale(Complex64::from_polar(1.0, ang));
            }
            *slot = acc.scale_re(1.0 / nf);
        }
        LaurentLoop { k_min: w.lo, coeffs, tail_norm: 0.0 }
    }
}

/// n equispaced points e^{2πij/n} on the unit circle.
pub fn circle_samples(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64))
        .collect()
}

/// Windowed Cauchy product: (AB)_k = Σ_j A_j B_{k−j} for k in `window`.
pub fn loop_mul(a: &LaurentLoop, b: &LaurentLoop, window: Window) -> LaurentLoop {
    let lo = a.k_min + b.k_min;
    let hi = a.k_max() + b.k_max();
    let mut coeffs = vec![Mat2C::zero(); window.len()];
    let mut dropped = 0.0;
    for k in lo..=hi {
        let j_lo = a.k_min.max(k - b.k_max());
        let j_hi = a.k_max().min(k - b.k_min);
        let mut acc = Mat2C::zero();
        for j in j_lo..=j_hi {
            acc += a.coeff(j) * b.coeff(k - j);
        }
        if window.contains(k) {
            coeffs[(k - window.lo) as usize] = acc;
        } else {
            dropped += acc.frobenius();
        }
    }
    LaurentLoop { k_min: window.lo, coeffs, tail_norm: a.tail_norm + b.tail_norm + dropped }
}

/// Σ_k A_k λ^k.
pub fn loop_eval(a: &LaurentLoop, lambda: Complex64) -> Result<Mat2C> {
    if lambda == ZERO {
        if a.k_min < 0 {
            return Err(Error::Domain("loop with negative degrees evaluated at lambda = 0".into()));
        }
        return Ok(a.coeff(0));
    }
    // Horner on the nonnegative part, then on the negative part in 1/λ.
    let mut pos = Mat2C::zero();
    for k in (0..=a.k_max()).rev() {
        pos = pos.scale(lambda) + a.coeff(k);
    }
    let inv = lambda.inv();
    let mut neg = Mat2C::zero();
    for k in a.k_min..0 {
        neg = (neg + a.coeff(k)).scale(inv);
    }
    Ok(pos + neg)
}

/// Circle adjoint: (A*)_k = (A_{−k})†, so A*(λ) = A(1/λ̄)†.
pub fn loop_star(a: &LaurentLoop) -> LaurentLoop {
    let coeffs = (-a.k_max()..=-a.k_min).map(|k| a.coeff(-k).dagger()).collect();
    LaurentLoop { k_min: -a.k_max(), coeffs, tail_norm: a.tail_norm }
}

/// Inverse of a plus-loop by power-series recursion, on [0, window.hi].
pub fn plus_inverse(b: &LaurentLoop, window: Window) -> Result<LaurentLoop> {
    if !b.is_plus() {
        return Err(Error::Validation("plus_inverse needs a loop without negative degrees".into()));
    }
    let b0inv = b
        .coeff(0)
        .try_inv()
        .ok_or_else(|| Error::Factorization("singular constant term".into()))?;
    let n = window.hi.max(0);
    let mut c: Vec<Mat2C> = Vec::with_capacity(n as usize + 1);
    c.push(b0inv);
    for k in 1..=n {
        let mut acc = Mat2C::zero();
        for j in 1..=k.min(b.k_max()) {
            acc += b.coeff(j) * c[(k - j) as usize];
        }
        c.push(-(b0inv * acc));
    }
    let tail: f64 = (n + 1..=n + b.k_max())
        .map(|k| {
            let mut acc = Mat2C::zero();
            for j in (k - n).max(1)..=b.k_max() {
                if k - j <= n {
                    acc += b.coeff(j) * c[(k - j) as usize];
                }
            }
            acc.frobenius()
        })
        .sum();
    Ok(LaurentLoop { k_min: 0, coeffs: c, tail_norm: b.tail_norm + tail })
}

/// Sup-norms of the coefficients violating the twist σA(λ) = A(−λ):
/// off-diagonal parts at even degrees, diagonal parts at odd degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityReport {
    pub max_even_offdiag: f64,
    pub max_odd_diag: f64,
}

impl ParityReport {
    pub fn is_twisted(&self, tol: f64) -> bool {
        self.max_even_offdiag <= tol && self.max_odd_diag <= tol
    }
}

pub fn twist_check(a: &LaurentLoop) -> ParityReport {
    let mut r = ParityReport { max_even_offdiag: 0.0, max_odd_diag: 0.0 };
    for (k, c) in a.terms() {
        if k.rem_euclid(2) == 0 {
            let off = (c.0[0][1].norm_sqr() + c.0[1][0].norm_sqr()).sqrt();
            r.max_even_offdiag = r.max_even_offdiag.max(off);
        } else {
            let dia = (c.0[0][0].norm_sqr() + c.0[1][1].norm_sqr()).sqrt();
            r.max_odd_diag = r.max_odd_diag.max(dia);
        }
    }
    r
}
