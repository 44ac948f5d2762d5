//! Solving dΦ = Φξ along polygonal paths, for whole loops or at fixed λ.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::loops::{circle_samples, LaurentLoop, Mat2C, Window};
use crate::potentials::Potential;
use crate::{Error, Result};

/// Default minimum distance between a path and a singular point.
pub const EPS_POLE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPath {
    pub vertices: Vec<Complex64>,
    pub closed: bool,
}

impl DomainPath {
    pub fn segment(a: Complex64, b: Complex64) -> Self {
        DomainPath { vertices: vec![a, b], closed: false }
    }

    pub fn polyline(vertices: Vec<Complex64>) -> Self {
        DomainPath { vertices, closed: false }
    }

    /// Regular n-gon inscribed in the circle |z − center| = r, starting at
    /// angle `start`, counter-clockwise when `ccw`. The last vertex repeats
    /// the first.
    pub fn circle(center: Complex64, r: f64, n: usize, start: f64, ccw: bool) -> Self {
        let s = if ccw { 1.0 } else { -1.0 };
        let vertices = (0..=n)
            .map(|j| {
                if j == n {
                    center + Complex64::from_polar(r, start)
                } else {
                    center + Complex64::from_polar(r, start + s * 2.0 * std::f64::consts::PI * j as f64 / n as f64)
                }
            })
            .collect();
        DomainPath { vertices, closed: true }
    }

    /// `self` followed by `other` (which must start where `self` ends).
    pub fn then(mut self, other: &DomainPath) -> Self {
        let skip = usize::from(self.vertices.last() == other.vertices.first());
        self.vertices.extend_from_slice(&other.vertices[skip..]);
        self.closed = self.vertices.first() == self.vertices.last() && self.vertices.len() > 1;
        self
    }

    pub fn start(&self) -> Option<Complex64> {
        self.vertices.first().copied()
    }

    pub fn end(&self) -> Option<Complex64> {
        self.vertices.last().copied()
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Check vertex distinctness and clearance `eps` from the singular set.
    pub fn validate(&self, p: &Potential, eps: f64) -> Result<()> {
        if self.closed && self.vertices.first() != self.vertices.last() {
            return Err(Error::Path("closed path must end at its start".into()));
        }
        for w in self.vertices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Path("consecutive vertices coincide".into()));
            }
            for &s in &p.singular_points {
                if segment_distance(w[0], w[1], s) < eps {
                    return Err(Error::Path(format!(
                        "segment {} -> {} passes within {eps} of singular point {s}",
                        w[0], w[1]
                    )));
                }
            }
        }
        if self.vertices.len() == 1 && p.distance_to_singular(self.vertices[0]) < eps {
            return Err(Error::Path("path sits on a singular point".into()));
        }
        Ok(())
    }
}

fn segment_distance(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    let d = b - a;
    let t = ((p - a) * d.conj()).re / d.norm_sqr();
    let t = t.clamp(0.0, 1.0);
    (a + d * t - p).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeMethod {
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdeOptions {
    pub method: OdeMethod,
    /// Absolute per-component tolerance (adaptive) .
    pub tol: f64,
    /// Step length in z (fixed-step method).
    pub step: f64,
    pub det_renormalize: bool,
    /// Truncation window for loop-level integration.
    pub window: Window,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            method: OdeMethod::Rk45Adaptive,
            tol: 1e-10,
            step: 1e-2,
            det_renormalize: true,
            window: Window::default(),
        }
    }
}

impl OdeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.step > 0.0) {
            return Err(Error::Validation("ODE tolerance and step must be positive".into()));
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Right-hand side: writes dY/dz at z into the output slice.
trait Rhs {
    fn eval(&self, z: Complex64, y: &[Complex64], out: &mut [Complex64]) -> Result<()>;
    fn renormalize(&self, y: &mut [Complex64]);
}

fn integrate_path<R: Rhs>(path: &DomainPath, y: &mut Vec<Complex64>, opts: &OdeOptions, rhs: &R) -> Result<()> {
    for w in path.vertices.windows(2) {
        integrate_segment(w[0], w[1], y, opts, rhs)?;
    }
    Ok(())
}

fn integrate_segment<R: Rhs>(
    a: Complex64,
    b: Complex64,
    y: &mut Vec<Complex64>,
    opts: &OdeOptions,
    rhs: &R,
) -> Result<()> {
    let len = (b - a).norm();
    if len == 0.0 {
        return Ok(());
    }
    let u = (b - a) / len;
    let n = y.len();
    let mut k: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    let mut s = 0.0;

    // dY/ds = (dY/dz)·u
    let stage = |s: f64, yy: &[Complex64], out: &mut [Complex64]| -> Result<()> {
        rhs.eval(a + u * s, yy, out)?;
        for o in out.iter_mut() {
            *o *= u;
        }
        Ok(())
    };

    match opts.method {
        OdeMethod::Rk4Fixed => {
            let steps = (len / opts.step).ceil().max(1.0) as usize;
            let h = len / steps as f64;
            for _ in 0..steps {
                stage(s, y, &mut k[0])?;
                for i in 0..n {
                    tmp[i] = y[i] + k[0][i] * (0.5 * h);
                }
                stage(s + 0.5 * h, &tmp, &mut k[1])?;
                for i in 0..n {
                    tmp[i] = y[i] + k[1][i] * (0.5 * h);
                }
                stage(s + 0.5 * h, &tmp, &mut k[2])?;
                for i in 0..n {
                    tmp[i] = y[i] + k[2][i] * h;
                }
                stage(s + h, &tmp, &mut k[3])?;
                for i in 0..n {
                    y[i] += (k[0][i] + k[1][i] * 2.0 + k[2][i] * 2.0 + k[3][i]) * (h / 6.0);
                }
                s += h;
                if opts.det_renormalize {
                    rhs.renormalize(y);
                }
            }
        }
        OdeMethod::Rk45Adaptive => {
            let mut h = (0.05f64).min(len);
            let h_min = 1e-12 * len.max(1.0);
            let mut fsal = false;
            while s < len {
                if s + h > len {
                    h = len - s;
                }
                if !fsal {
                    stage(s, y, &mut k[0])?;
                }
                for st in 1..7 {
                    for i in 0..n {
                        let mut acc = y[i];
                        for j in 0..st {
                            if A[st][j] != 0.0 {
                                acc += k[j][i] * (A[st][j] * h);
                            }
                        }
                        tmp[i] = acc;
                    }
                    stage(s + C[st] * h, &tmp, &mut k[st])?;
                }
                // tmp now holds the 5th-order solution (row 7 of A equals B5).
                let mut err: f64 = 0.0;
                for i in 0..n {
                    let mut e = Complex64::new(0.0, 0.0);
                    for st in 0..7 {
                        e += k[st][i] * ((B5[st] - B4[st]) * h);
                    }
                    err = err.max(e.norm());
                }
                if !err.is_finite() {
                    return Err(Error::Integration { z: a + u * s, msg: "non-finite state".into() });
                }
                let ratio = err / opts.tol;
                if ratio <= 1.0 {
                    s += h;
                    y.copy_from_slice(&tmp);
                    if opts.det_renormalize {
                        rhs.renormalize(y);
                        fsal = false;
                    } else {
                        let (first, rest) = k.split_at_mut(6);
                        first[0].copy_from_slice(&rest[0]);
                        fsal = true;
                    }
                } else {
                    // rejected: k[0] still belongs to the unchanged state
                    fsal = true;
                }
                let fac = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                h *= fac;
                if h < h_min && s < len {
                    return Err(Error::Integration { z: a + u * s, msg: "step size underflow".into() });
                }
            }
        }
    }
    Ok(())
}

struct PointRhs<'a> {
    p: &'a Potential,
    lambda: Complex64,
}

fn mat_from(y: &[Complex64]) -> Mat2C {
    Mat2C::new(y[0], y[1], y[2], y[3])
}

fn mat_into(m: &Mat2C, y: &mut [Complex64]) {
    y[0] = m.0[0][0];
    y[1] = m.0[0][1];
    y[2] = m.0[1][0];
    y[3] = m.0[1][1];
}

impl Rhs for PointRhs<'_> {
    fn eval(&self, z: Complex64, y: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let xi = self.p.xi_at_lambda(z, self.lambda)?;
        mat_into(&(mat_from(y) * xi), out);
        Ok(())
    }

    fn renormalize(&self, y: &mut [Complex64]) {
        let m = mat_from(y);
        let d = m.det().sqrt();
        if d.norm() > 0.0 {
            mat_into(&m.scale(d.inv()), y);
        }
    }
}

struct LoopRhs<'a> {
    p: &'a Potential,
    w: Window,
    samples: Vec<Complex64>,
    pow: Vec<Complex64>,
    dropped: std::cell::Cell<f64>,
}

impl Rhs for LoopRhs<'_> {
    fn eval(&self, z: Complex64, y: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let terms = self.p.xi_terms(z)?;
        for o in out.iter_mut() {
            *o = Complex64::new(0.0, 0.0);
        }
        let len = self.w.len() as i32;
        let mut dropped = 0.0;
        for i in 0..len {
            let phi = mat_from(&y[4 * i as usize..4 * i as usize + 4]);
            if phi.max_abs() == 0.0 {
                continue;
            }
            for (d, x) in &terms {
                let j = i + d;
                let prod = phi * *x;
                if j >= 0 && j < len {
                    let o = &mut out[4 * j as usize..4 * j as usize + 4];
                    o[0] += prod.0[0][0];
                    o[1] += prod.0[0][1];
                    o[2] += prod.0[1][0];
                    o[3] += prod.0[1][1];
                } else {
                    dropped += prod.frobenius();
                }
            }
        }
        self.dropped.set(self.dropped.get().max(dropped));
        Ok(())
    }

    fn renormalize(&self, y: &mut [Complex64]) {
        // Sample on the circle, divide by √det, refit by DFT. `pow[j*len+i]`
        // holds λ_j^(lo+i).
        let len = self.w.len();
        let ns = self.samples.len();
        let mut acc = vec![Complex64::new(0.0, 0.0); 4 * len];
        for j in 0..ns {
            let row = &self.pow[j * len..(j + 1) * len];
            let mut m = [Complex64::new(0.0, 0.0); 4];
            for i in 0..len {
                for c in 0..4 {
                    m[c] += y[4 * i + c] * row[i];
                }
            }
            let mm = mat_from(&m);
            let d = mm.det().sqrt();
            if d.norm() == 0.0 || !d.is_finite() {
                continue;
            }
            let s = d.inv() / ns as f64;
            for i in 0..len {
                let t = row[i].conj() * s;
                for c in 0..4 {
                    acc[4 * i + c] += m[c] * t;
                }
            }
        }
        y.copy_from_slice(&acc);
    }
}

fn flatten_into(l: &LaurentLoop, w: Window, y: &mut [Complex64]) {
    for (i, k) in (w.lo..=w.hi).enumerate() {
        mat_into(&l.coeff(k), &mut y[4 * i..4 * i + 4]);
    }
}

fn unflatten(y: &[Complex64], w: Window) -> LaurentLoop {
    let coeffs = (0..w.len()).map(|i| mat_from(&y[4 * i..4 * i + 4])).collect();
    LaurentLoop::new(w.lo, coeffs)
}

/// Φ at the end of `path`, solving dΦ = Φξ with Φ(start) = Φ₀, coefficient
/// by coefficient on `opts.window`.
pub fn integrate_frame(p: &Potential, path: &DomainPath, phi0: &LaurentLoop, opts: &OdeOptions) -> Result<LaurentLoop> {
    opts.validate()?;
    path.validate(p, EPS_POLE)?;
    let w = opts.window;
    let start = phi0.truncate(w);
    let mut y = vec![Complex64::new(0.0, 0.0); 4 * w.len()];
    flatten_into(&start, w, &mut y);
    let n_samples = (2 * w.len()).next_power_of_two().max(16);
    let samples = circle_samples(n_samples);
    let pow = samples
        .iter()
        .flat_map(|&lam| (w.lo..=w.hi).map(move |k| lam.powi(k)))
        .collect();
    let rhs = LoopRhs { p, w, samples, pow, dropped: std::cell::Cell::new(0.0) };
    integrate_path(path, &mut y, opts, &rhs)?;
    let out = unflatten(&y, w);
    if !out.is_finite() {
        return Err(Error::Integration { z: path.end().unwrap_or_default(), msg: "non-finite result".into() });
    }
    // The recorded tail is the largest coefficient mass pushed outside the
    // window by a single product, scaled by the path length.
    let tail = start.tail_norm() + rhs.dropped.get() * path.length();
    Ok(out.with_tail_norm(tail))
}

/// Φ(λ) at the end of `path` for a fixed spectral value.
pub fn integrate_at_lambda(
    p: &Potential,
    path: &DomainPath,
    phi0: Mat2C,
    lambda: Complex64,
    opts: &OdeOptions,
) -> Result<Mat2C> {
    opts.validate()?;
    if path.vertices.len() < 2 {
        return Ok(phi0);
    }
    path.validate(p, EPS_POLE)?;
    let mut y = vec![Complex64::new(0.0, 0.0); 4];
    mat_into(&phi0, &mut y);
    integrate_path(path, &mut y, opts, &PointRhs { p, lambda })?;
    let m = mat_from(&y);
    if !m.is_finite() {
        return Err(Error::Integration { z: path.end().unwrap_or_default(), msg: "non-finite result".into() });
    }
    Ok(m)
}

/// Straight path from the potential's base point to z.
pub fn path_from_base(p: &Potential, z: Complex64) -> DomainPath {
    DomainPath::segment(p.base_point, z)
}

/// Left monodromy H(γ) = Φ_after·Φ_before⁻¹ at λ, with Φ = Φ₀ at the base
/// point and γ starting anywhere (Φ_before is transported from the base
/// point to γ's start along a straight segment).
pub fn monodromy_with_initial(
    p: &Potential,
    gamma: &DomainPath,
    lambda: Complex64,
    phi0: Mat2C,
    opts: &OdeOptions,
) -> Result<Mat2C> {
    if !gamma.closed {
        return Err(Error::Path("monodromy needs a closed path".into()));
    }
    let start = gamma.start().ok_or_else(|| Error::Path("empty path".into()))?;
    let before = if start == p.base_point {
        phi0
    } else {
        integrate_at_lambda(p, &DomainPath::segment(p.base_point, start), phi0, lambda, opts)?
    };
    let after = integrate_at_lambda(p, gamma, before, lambda, opts)?;
    let inv = before
        .try_inv()
        .ok_or_else(|| Error::Integration { z: start, msg: "singular frame at base point".into() })?;
    Ok(after * inv)
}

/// Monodromy with Φ₀ = I.
pub fn monodromy(p: &Potential, gamma: &DomainPath, lambda: Complex64, opts: &OdeOptions) -> Result<Mat2C> {
    monodromy_with_initial(p, gamma, lambda, Mat2C::identity(), opts)
}

/// Closed loop from the base point around the singular point `center`:
/// straight out to the circle of radius ½·(distance to the nearest other
/// singular point, or to the base point when there is none), once around it
/// counter-clockwise as a 64-gon, and back.
pub fn loop_around(p: &Potential, center: Complex64) -> Result<DomainPath> {
    let others = p
        .singular_points
        .iter()
        .filter(|&&s| s != center)
        .map(|s| (s - center).norm())
        .fold(f64::INFINITY, f64::min);
    let base = p.base_point;
    let reach = if others.is_finite() { others } else { 2.0 * (base - center).norm() };
    let r = 0.5 * reach;
    if r <= 0.0 {
        return Err(Error::Path("cannot place a loop at the base point".into()));
    }
    let ang = (base - center).arg();
    let circle = DomainPath::circle(center, r, 64, ang, true);
    let mut v = Vec::with_capacity(circle.vertices.len() + 2);
    if (circle.vertices[0] - base).norm() < 1e-14 {
        v.push(base);
        v.extend_from_slice(&circle.vertices[1..circle.vertices.len() - 1]);
    } else {
        v.push(base);
        v.extend_from_slice(&circle.vertices);
    }
    v.push(base);
    Ok(DomainPath { vertices: v, closed: true })
}

/// Closed loop from the base point around ∞ (positively oriented at ∞,
/// i.e. clockwise in the plane): down to base − iR, clockwise around the
/// circle of radius R about the base point, and back up, with R one unit
/// beyond the farthest finite singular point.
pub fn loop_around_infinity(p: &Potential) -> DomainPath {
    let base = p.base_point;
    let far = p.singular_points.iter().map(|s| (s - base).norm()).fold(0.0, f64::max);
    let r = far + 1.0;
    let circle = DomainPath::circle(base, r, 128, -std::f64::consts::FRAC_PI_2, false);
    let mut v = vec![base];
    v.extend_from_slice(&circle.vertices);
    v.push(base);
    DomainPath { vertices: v, closed: true }
}
