//! Exact frames for the basic families, the equivariant frame with its
//! elliptic profile, and the closing / admissibility criteria.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::loops::Mat2C;
use crate::{Error, Result};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn check_unit(lambda: Complex64) -> Result<()> {
    if (lambda.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("|lambda| = {} is not 1", lambda.norm())));
    }
    Ok(())
}

/// Extended frame of the totally geodesic sphere.
pub fn sphere_frame(z: Complex64, lambda: Complex64) -> Result<Mat2C> {
    check_unit(lambda)?;
    let n = (1.0 + z.norm_sqr()).sqrt().recip();
    Ok(Mat2C::new(c(1.0, 0.0), z / lambda, -z.conj() * lambda, c(1.0, 0.0)).scale_re(n))
}

/// Extended frame of the totally geodesic torus.
pub fn torus_frame(z: Complex64, lambda: Complex64) -> Result<Mat2C> {
    check_unit(lambda)?;
    let w = z / lambda - z.conj() * lambda;
    let (ch, sh) = (w.cosh(), w.sinh());
    Ok(Mat2C::new(ch, sh, sh, ch))
}

/// Conformal factor e^u and α of the sphere family at λ₀ = 1.
pub fn sphere_invariants(z: Complex64) -> (f64, Complex64) {
    ((1.0 + z.norm_sqr()).powi(-2), c(0.0, 0.0))
}

/// u_zz̄ of the sphere family.
pub fn sphere_u_zzbar(z: Complex64) -> f64 {
    -2.0 * (1.0 + z.norm_sqr()).powi(-2)
}

/// Conformal factor e^u and α of the torus family at λ₀ = 1.
pub fn torus_invariants(_z: Complex64) -> (f64, Complex64) {
    (2.0, c(2.0, 0.0))
}

/// Solution of v'' = −2v³ + 4(a²+b²)v, v(0) = 2b, v'(0) = 0 on a uniform
/// grid over [0, x_max]; v is even, so negative x is served by symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivariantProfile {
    pub a: f64,
    pub b: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
}

fn profile_rhs(k: f64, v: f64, vp: f64) -> (f64, f64) {
    (vp, -2.0 * v * v * v + k * v)
}

pub fn equivariant_profile(a: f64, b: f64, x_max: f64, step: f64) -> Result<EquivariantProfile> {
    if a == 0.0 || b == 0.0 || !a.is_finite() || !b.is_finite() {
        return Err(Error::Validation("profile needs nonzero finite a, b".into()));
    }
    if !(x_max >= 0.0) || !x_max.is_finite() {
        return Err(Error::Validation("x_max must be a nonnegative number".into()));
    }
    if !(step > 1e-9) {
        return Err(Error::Integration { z: c(0.0, 0.0), msg: format!("step {step} too small") });
    }
    let n = ((x_max / step).ceil() as usize).max(1);
    let h = x_max / n as f64;
    let k = 4.0 * (a * a + b * b);
    let mut xs = Vec::with_capacity(n + 1);
    let mut vs = Vec::with_capacity(n + 1);
    let mut ps = Vec::with_capacity(n + 1);
    let (mut v, mut p) = (2.0 * b, 0.0);
    xs.push(0.0);
    vs.push(v);
    ps.push(p);
    for i in 0..n {
        let (k1v, k1p) = profile_rhs(k, v, p);
        let (k2v, k2p) = profile_rhs(k, v + 0.5 * h * k1v, p + 0.5 * h * k1p);
        let (k3v, k3p) = profile_rhs(k, v + 0.5 * h * k2v, p + 0.5 * h * k2p);
        let (k4v, k4p) = profile_rhs(k, v + h * k3v, p + h * k3p);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        if !v.is_finite() || !p.is_finite() {
            return Err(Error::Integration { z: c(h * (i + 1) as f64, 0.0), msg: "profile blew up".into() });
        }
        xs.push(h * (i + 1) as f64);
        vs.push(v);
        ps.push(p);
    }
    Ok(EquivariantProfile { a, b, x: xs, v: vs, v_prime: ps })
}

impl EquivariantProfile {
    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap_or(&0.0)
    }

    /// v'² + (v² − 4a²)(v² − 4b²) at grid node i (zero for the exact solution).
    pub fn energy(&self, i: usize) -> f64 {
        let (v, p) = (self.v[i], self.v_prime[i]);
        p * p + (v * v - 4.0 * self.a * self.a) * (v * v - 4.0 * self.b * self.b)
    }

    pub fn max_energy_residual(&self) -> f64 {
        (0..self.x.len()).map(|i| self.energy(i).abs()).fold(0.0, f64::max)
    }

    fn k(&self) -> f64 {
        4.0 * (self.a * self.a + self.b * self.b)
    }

    /// (v, v') at any |x| ≤ x_max, by quintic Hermite interpolation using the
    /// ODE for the higher derivatives.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let ax = x.abs();
        let xm = self.x_max();
        if ax > xm * (1.0 + 1e-12) + 1e-14 {
            return Err(Error::Range(format!("x = {x} outside the profile range [-{xm}, {xm}]")));
        }
        let n = self.x.len() - 1;
        if n == 0 {
            return Ok((self.v[0], 0.0));
        }
        let h = xm / n as f64;
        let i = ((ax / h).floor() as usize).min(n - 1);
        let t = ((ax - self.x[i]) / h).clamp(0.0, 1.0);
        let k = self.k();
        let d = |j: usize| {
            let (v, p) = (self.v[j], self.v_prime[j]);
            let pp = -2.0 * v * v * v + k * v;
            let ppp = (-6.0 * v * v + k) * p;
            let pppp = -12.0 * v * p * p + (-6.0 * v * v + k) * pp;
            (v, p, pp, ppp, pppp)
        };
        let (v0, p0, q0, r0, s0) = d(i);
        let (v1, p1, q1, r1, s1) = d(i + 1);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
        let h3 = 0.5 * t3 - t4 + 0.5 * t5;
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let herm = |y0: f64, d0: f64, e0: f64, y1: f64, d1: f64, e1: f64| {
            y0 * h0 + h * d0 * h1 + h * h * e0 * h2 + h * h * e1 * h3 + h * d1 * h4 + y1 * h5
        };
        let v = herm(v0, p0, q0, v1, p1, q1);
        let p = herm(p0, q0, r0, p1, q1, r1);
        let _ = (s0, s1);
        Ok((v, if x < 0.0 { -p } else { p }))
    }

    /// 𝐟(x) = ∫₀ˣ 2 dt / (1 + v(t)²/(4abλ²)) by composite Simpson.
    pub fn f_integral(&self, x: f64, lambda: Complex64) -> Result<Complex64> {
        let ax = x.abs();
        if ax == 0.0 {
            return Ok(c(0.0, 0.0));
        }
        let n = self.x.len().max(2) - 1;
        let h0 = self.x_max() / n as f64;
        let mut m = ((ax / h0).ceil() as usize).max(1);
        if m % 2 == 1 {
            m += 1;
        }
        let h = ax / m as f64;
        let denom = 4.0 * self.a * self.b * lambda * lambda;
        let g = |t: f64| -> Result<Complex64> {
            let (v, _) = self.eval(t)?;
            Ok(2.0 / (1.0 + v * v / denom))
        };
        let mut s = g(0.0)? + g(ax)?;
        for j in 1..m {
            let w = if j % 2 == 1 { 4.0 } else { 2.0 };
            s += g(h * j as f64)? * w;
        }
        let val = s * (h / 3.0);
        if !val.is_finite() {
            return Err(Error::Domain(format!("profile integral is singular at lambda = {lambda}")));
        }
        Ok(if x < 0.0 { -val } else { val })
    }
}

/// Explicit extended frame of the equivariant family with c = 0, in the
/// logarithmic coordinate z (the potential's coordinate is e^z).
pub fn equivariant_frame(a: f64, b: f64, profile: &EquivariantProfile, z: Complex64, lambda: Complex64) -> Result<Mat2C> {
    check_unit(lambda)?;
    if profile.a != a || profile.b != b {
        return Err(Error::Validation("profile was built for different (a, b)".into()));
    }
    let (v, vp) = profile.eval(z.re)?;
    let f = profile.f_integral(z.re, lambda)?;
    let l = lambda;
    let l2 = l * l;
    let q = 4.0 * a * b * l2 + v * v;
    let pa = a * l2 + b;
    let pb = a + b * l2;
    // One root per factor, reused everywhere so the entries share branches.
    let (ra, rp, rq, rv) = (q.sqrt(), pa.sqrt(), pb.sqrt(), (2.0 * v).sqrt());
    let t = rp * rq / l;
    let s = t * z - t * f;
    let (ch, sh) = (s.cosh(), s.sinh());
    let f11 = ra / (rv * rp) * ch;
    let f12 = l * vp * ch / (rv * rp * ra) + rv * rq / ra * sh;
    let f21 = ra / (rv * rq) * sh;
    let f22 = l * vp * sh / (rv * rq * ra) + rv * rp / ra * ch;
    let m = Mat2C::new(f11, f12, f21, f22);
    if !m.is_finite() {
        return Err(Error::Domain(format!("explicit frame is singular at lambda = {lambda}")));
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosingReport {
    pub mu1: f64,
    pub mu2: f64,
    pub closes_q2: bool,
    pub closes_s3: bool,
}

const INT_TOL: f64 = 1e-9;

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() <= INT_TOL
}

/// Closing of the equivariant surface around the puncture: the monodromy
/// exp(2πiD(λ)) is ±I exactly when μ is an integer (sign (−1)^μ).
pub fn cylinder_closing(a: f64, b: f64, c0: f64, lambda0: Complex64) -> ClosingReport {
    let mu1 = 2.0 * (c0 * c0 + (lambda0 * a + b / lambda0).norm_sqr()).sqrt();
    let mu2 = 2.0 * (c0 * c0 + (lambda0 * a - b / lambda0).norm_sqr()).sqrt();
    let q2 = is_integer(mu1) && is_integer(mu2);
    let s3 = q2 && (mu1.round() + mu2.round()) as i64 % 2 == 0;
    ClosingReport { mu1, mu2, closes_q2: q2, closes_s3: s3 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// Values at λ = −1 for the punctures 0, 1, ∞.
    pub n: [f64; 3],
    /// Values at λ = 1.
    pub m: [f64; 3],
    pub h_at_one: f64,
    pub h_at_minus_one: f64,
    pub admissible: bool,
    pub violated: Vec<String>,
}

/// h(λ) = λ⁻¹(λ − λ₀)(λ − λ₀⁻¹).
pub fn trinoid_h(lambda0: Complex64, lambda: Complex64) -> Complex64 {
    (lambda - lambda0) * (lambda - lambda0.inv()) / lambda
}

/// Evaluates the admissibility inequalities for trinoid weights v₀, v₁, v∞.
pub fn trinoid_admissible(lambda0: Complex64, v0: f64, v1: f64, v_inf: f64) -> Result<AdmissibilityReport> {
    if (lambda0 - c(0.0, 1.0)).norm() > 1e-12 && (lambda0 + c(0.0, 1.0)).norm() > 1e-12 {
        return Err(Error::Validation("admissibility is stated for lambda0 = ±i".into()));
    }
    let h1 = trinoid_h(lambda0, c(1.0, 0.0)).re;
    let hm1 = trinoid_h(lambda0, c(-1.0, 0.0)).re;
    let vs = [v0, v1, v_inf];
    let names = ["0", "1", "inf"];
    let mut violated = Vec::new();
    let mut val = |v: f64, h: f64, label: &str, k: usize| {
        let r = 1.0 + v * h / 4.0;
        if r < 0.0 {
            violated.push(format!("radicand_{label}_{}", names[k]));
            f64::NAN
        } else {
            0.5 - 0.5 * r.sqrt()
        }
    };
    let mut n = [0.0; 3];
    let mut m = [0.0; 3];
    for k in 0..3 {
        n[k] = val(vs[k], hm1, "n", k);
        m[k] = val(vs[k], h1, "m", k);
    }
    if violated.is_empty() {
        for (label, w) in [("n", n), ("m", m)] {
            let a = w.map(f64::abs);
            if a[0] + a[1] + a[2] > 1.0 + 1e-12 {
                violated.push(format!("sum_{label}"));
            }
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                if a[i] > a[j] + a[k] + 1e-12 {
                    violated.push(format!("triangle_{label}_{}", names[i]));
                }
            }
        }
    }
    Ok(AdmissibilityReport { n, m, h_at_one: h1, h_at_minus_one: hm1, admissible: violated.is_empty(), violated })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrinoidClosingReport {
    pub closes_q2: bool,
    /// +1 / −1 when H is within tol of ±I, 0 otherwise; rows per spectral
    /// value, columns for the punctures 0, 1, ∞.
    pub signs: [[i8; 3]; 2],
    /// Largest distance of any H to the nearer of ±I.
    pub max_sign_defect: f64,
    /// max ‖H∞H₁H₀ − I‖ over the two spectral values.
    pub product_defect: f64,
}

/// Monodromies (H₀, H₁, H∞) at the two spectral values of the surface.
pub fn trinoid_closing_check(first: &[Mat2C; 3], second: &[Mat2C; 3], tol: f64) -> TrinoidClosingReport {
    let id = Mat2C::identity();
    let mut signs = [[0i8; 3]; 2];
    let mut defect: f64 = 0.0;
    let mut product: f64 = 0.0;
    for (row, hs) in [first, second].into_iter().enumerate() {
        for (k, h) in hs.iter().enumerate() {
            let dp = (*h - id).max_abs();
            let dm = (*h + id).max_abs();
            defect = defect.max(dp.min(dm));
            signs[row][k] = if dp <= tol { 1 } else if dm <= tol { -1 } else { 0 };
        }
        product = product.max((hs[2] * hs[1] * hs[0] - id).max_abs());
    }
    let closes = signs.iter().flatten().all(|&s| s != 0);
    TrinoidClosingReport { closes_q2: closes, signs, max_sign_defect: defect, product_defect: product }
}

/// Positive Hermitian P with H†PH = P for every H, returned as P^{1/2}
/// (normalized to det 1). Conjugating by it makes the monodromies unitary.
pub fn unitarizer(hs: &[Mat2C]) -> Result<Mat2C> {
    // Already unitary (includes H = ±I, where every form is invariant).
    if hs.iter().all(|h| h.unitarity_error() < 1e-12) {
        return Ok(Mat2C::identity());
    }
    // P = [[p, q], [q̄, r]] with unknowns (p, r, Re q, Im q).
    let basis = [
        Mat2C::from_real(1.0, 0.0, 0.0, 0.0),
        Mat2C::from_real(0.0, 0.0, 0.0, 1.0),
        Mat2C::from_real(0.0, 1.0, 1.0, 0.0),
        Mat2C::new(c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)),
    ];
    let rows = 8 * hs.len();
    let mut a = DMatrix::<f64>::zeros(rows, 4);
    for (n, h) in hs.iter().enumerate() {
        for (col, e) in basis.iter().enumerate() {
            let r = h.dagger() * *e * *h - *e;
            for i in 0..2 {
                for j in 0..2 {
                    let base = 8 * n + 4 * i + 2 * j;
                    a[(base, col)] = r.get(i, j).re;
                    a[(base + 1, col)] = r.get(i, j).im;
                }
            }
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Factorization("SVD failed".into()))?;
    let (mut k, mut smin) = (0, f64::INFINITY);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s < smin {
            smin = *s;
            k = i;
        }
    }
    let x: Vec<f64> = (0..4).map(|j| vt[(k, j)]).collect();
    let mut p = Mat2C::new(c(x[0], 0.0), c(x[2], x[3]), c(x[2], -x[3]), c(x[1], 0.0));
    if p.trace().re < 0.0 {
        p = -p;
    }
    let det = p.det().re;
    if !(det > 0.0) || !(p.trace().re > 0.0) {
        return Err(Error::Factorization("monodromy group has no invariant positive Hermitian form".into()));
    }
    let p = p.scale_re(1.0 / det.sqrt());
    p.sqrtm().ok_or_else(|| Error::Factorization("square root of the invariant form failed".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_frame_examples() {
        assert_eq!(sphere_frame(c(0.0, 0.0), c(1.0, 0.0)).unwrap(), Mat2C::identity());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let f = sphere_frame(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!((f - Mat2C::from_real(s, s, -s, s)).max_abs() < 1e-15);
        let f = sphere_frame(c(0.3, -1.2), Complex64::from_polar(1.0, 2.1)).unwrap();
        assert!(f.unitarity_error() < 1e-14 && (f.det() - 1.0).norm() < 1e-14);
        assert!(sphere_frame(c(0.0, 0.0), c(2.0, 0.0)).is_err());
    }

    #[test]
    fn torus_frame_examples() {
        assert_eq!(torus_frame(c(0.0, 0.0), c(1.0, 0.0)).unwrap(), Mat2C::identity());
        let f = torus_frame(c(0.0, std::f64::consts::FRAC_PI_4), c(1.0, 0.0)).unwrap();
        let want = Mat2C::new(c(0.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(0.0, 0.0));
        assert!((f - want).max_abs() < 1e-15);
        let f = torus_frame(c(0.7, 0.4), Complex64::from_polar(1.0, -0.5)).unwrap();
        assert!(f.unitarity_error() < 1e-14 && (f.det() - 1.0).norm() < 1e-14);
    }

    #[test]
    fn profile_properties() {
        let p = equivariant_profile(1.0, 0.5, 3.0, 1e-3).unwrap();
        assert_eq!(p.v[0], 1.0);
        assert_eq!(p.v_prime[0], 0.0);
        assert!(p.max_energy_residual() < 1e-9, "{}", p.max_energy_residual());
        let (lo, hi) = p.v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(lo >= 1.0 - 1e-9 && hi <= 2.0 + 1e-9 && hi > 1.9);
        let q = equivariant_profile(0.5, 0.5, 1.0, 1e-2).unwrap();
        assert!(q.v.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        assert!(matches!(equivariant_profile(1.0, 0.5, 1.0, 0.0), Err(Error::Integration { .. })));
        let (v, vp) = p.eval(-0.12345).unwrap();
        let (w, wp) = p.eval(0.12345).unwrap();
        assert_eq!(v, w);
        assert_eq!(vp, -wp);
        assert!(matches!(p.eval(3.5), Err(Error::Range(_))));
        let e = vp * vp + (v * v - 4.0) * (v * v - 1.0);
        assert!(e.abs() < 1e-9);
    }

    #[test]
    fn equivariant_frame_basics() {
        let p = equivariant_profile(1.0, 0.5, 2.0, 1e-3).unwrap();
        let f = equivariant_frame(1.0, 0.5, &p, c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!((f - Mat2C::identity()).max_abs() < 1e-14);
        for lam in [c(1.0, 0.0), Complex64::from_polar(1.0, 0.3)] {
            for z in [c(0.4, 0.2), c(-0.6, 1.1)] {
                let f = equivariant_frame(1.0, 0.5, &p, z, lam).unwrap();
                assert!(f.unitarity_error() < 1e-9);
            }
        }
        assert!(matches!(equivariant_frame(1.0, 0.5, &p, c(2.5, 0.0), c(1.0, 0.0)), Err(Error::Range(_))));
        // D(−λ) = σ₃D(λ)σ₃, so the frame must satisfy the same relation.
        let s3 = Mat2C::pauli(3);
        for k in 0..8 {
            let lam = Complex64::from_polar(1.0, 0.3 + std::f64::consts::FRAC_PI_4 * k as f64);
            let z = c(0.4, -0.7);
            let f = equivariant_frame(1.0, 0.5, &p, z, lam).unwrap();
            let g = equivariant_frame(1.0, 0.5, &p, z, -lam).unwrap();
            assert!((g - s3 * f * s3).max_abs() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn closing_examples() {
        let r = cylinder_closing(0.75, 0.25, 0.0, c(1.0, 0.0));
        assert!((r.mu1 - 2.0).abs() < 1e-15 && (r.mu2 - 1.0).abs() < 1e-15);
        assert!(r.closes_q2 && !r.closes_s3);
        let r = cylinder_closing(1.0, 1.0, 0.0, c(1.0, 0.0));
        assert!((r.mu1 - 4.0).abs() < 1e-15 && r.mu2.abs() < 1e-15 && r.closes_q2 && r.closes_s3);
        let r = cylinder_closing(1.0, 2f64.sqrt(), 0.0, c(1.0, 0.0));
        assert!(!r.closes_q2 && !r.closes_s3);
    }

    #[test]
    fn admissibility_examples() {
        let i = c(0.0, 1.0);
        let r = trinoid_admissible(i, 1.0, 1.0, 1.0).unwrap();
        assert!((r.h_at_one - 2.0).abs() < 1e-15 && (r.h_at_minus_one + 2.0).abs() < 1e-15);
        for k in 0..3 {
            assert!((r.n[k] - 0.5 * (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
            assert!((r.m[k] - 0.5 * (1.0 - 1.5f64.sqrt())).abs() < 1e-15);
        }
        assert!(r.admissible);
        let r = trinoid_admissible(i, 3.0, 1.0, 1.0).unwrap();
        assert!(!r.admissible && r.violated.iter().any(|v| v.starts_with("radicand")));
        // n(v) > 1/3 once v > 16/9
        let r = trinoid_admissible(i, 1.9, 1.9, 1.9).unwrap();
        assert!(!r.admissible && r.violated.contains(&"sum_n".to_string()));
        assert!(trinoid_admissible(c(1.0, 0.0), 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn trinoid_closing_examples() {
        let id = Mat2C::identity();
        let all = [id; 3];
        assert!(trinoid_closing_check(&all, &all, 1e-8).closes_q2);
        let r = trinoid_closing_check(&[-id, id, -id], &all, 1e-8);
        assert!(r.closes_q2 && r.signs[0] == [-1, 1, -1]);
        let rot = Mat2C::from_real(0.1f64.cos(), -0.1f64.sin(), 0.1f64.sin(), 0.1f64.cos());
        let r = trinoid_closing_check(&[rot, id, rot.inv()], &all, 1e-8);
        assert!(!r.closes_q2 && r.product_defect < 1e-15);
    }

    #[test]
    fn unitarizer_recovers_conjugation() {
        let u1 = (Mat2C::pauli(1).scale(c(0.0, 0.7))).expm();
        let u2 = (Mat2C::pauli(2).scale(c(0.0, -0.4)) + Mat2C::pauli(3).scale(c(0.0, 0.9))).expm();
        let g = Mat2C::new(c(1.3, 0.2), c(0.5, -0.1), c(0.0, 0.4), c(0.9, 0.0));
        let gi = g.inv();
        let hs = [gi * u1 * g, gi * u2 * g];
        let s = unitarizer(&hs).unwrap();
        for h in hs {
            assert!((s * h * s.inv()).unitarity_error() < 1e-12);
        }
    }
}
