//! From unitary frames to surfaces: the SU(2)×SU(2) → SO(4) map, the X/Y
//! matrices, the Q₂ point, the S³ pair and the S²×S² pair, plus a cached
//! evaluator that runs the whole DPW pipeline at a point.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::holonomy::{integrate_frame, path_from_base, DomainPath, OdeOptions, EPS_POLE};
use crate::iwasawa::{iwasawa, IwasawaOptions, IwasawaResult};
use crate::loops::{LaurentLoop, Mat2C};
use crate::potentials::Potential;
use crate::verify::InvariantReport;
use crate::{Error, Result};

const UNITARY_TOL: f64 = 1e-8;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn check_su2(m: &Mat2C, what: &str) -> Result<()> {
    if !m.is_finite() || m.unitarity_error() > UNITARY_TOL || (m.det() - 1.0).norm() > UNITARY_TOL {
        return Err(Error::Validation(format!("{what} is not in SU(2)")));
    }
    Ok(())
}

/// Quaternion components (p₀, p₁, p₂, p₃) of p = [[p₀+p₁i, p₂+p₃i], [−p₂+p₃i, p₀−p₁i]].
pub fn quaternion(p: &Mat2C) -> [f64; 4] {
    [p.get(0, 0).re, p.get(0, 0).im, p.get(0, 1).re, p.get(0, 1).im]
}

/// ψ(p, q) = L(p)·R(q) ∈ SO(4).
pub fn psi_so4(p: &Mat2C, q: &Mat2C) -> Result<[[f64; 4]; 4]> {
    check_su2(p, "p")?;
    check_su2(q, "q")?;
    let [p0, p1, p2, p3] = quaternion(p);
    let [q0, q1, q2, q3] = quaternion(q);
    let l = [
        [p0, -p1, -p2, -p3],
        [p1, p0, -p3, p2],
        [p2, p3, p0, -p1],
        [p3, -p2, p1, p0],
    ];
    let r = [
        [q0, q1, q2, q3],
        [-q1, q0, -q3, q2],
        [-q2, q3, q0, -q1],
        [-q3, -q2, q1, q0],
    ];
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| l[i][k] * r[k][j]).sum();
        }
    }
    Ok(out)
}

/// Frames at the two spectral values of a surface point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePointPair {
    /// F(λ₀)
    pub f1: Mat2C,
    /// F at the partner value (−iλ₀ for twisted potentials)
    pub f2: Mat2C,
    pub lambda0: Complex64,
}

impl FramePointPair {
    pub fn new(f1: Mat2C, f2: Mat2C, lambda0: Complex64) -> Result<Self> {
        check_su2(&f1, "F1")?;
        check_su2(&f2, "F2")?;
        if (lambda0.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("|lambda0| = {} is not 1", lambda0.norm())));
        }
        Ok(FramePointPair { f1, f2, lambda0 })
    }
}

/// X = F1·F2⁻¹, Y = i·F1·σ₃·F2⁻¹.
pub fn xy_matrices(fp: &FramePointPair) -> (Mat2C, Mat2C) {
    let f2i = fp.f2.dagger();
    let x = fp.f1 * f2i;
    let y = (fp.f1 * Mat2C::pauli(3) * f2i).scale(c(0.0, 1.0));
    (x, y)
}

/// Homogeneous Q₂ coordinate (Re X₁₁ + i Re Y₁₁, Im X₁₁ + i Im Y₁₁,
/// Re X₁₂ + i Re Y₁₂, Im X₁₂ + i Im Y₁₂)/√2, of unit Hermitian norm.
pub fn q2_point(x: &Mat2C, y: &Mat2C) -> [Complex64; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (x11, x12, y11, y12) = (x.get(0, 0), x.get(0, 1), y.get(0, 0), y.get(0, 1));
    [
        c(x11.re, y11.re) * s,
        c(x11.im, y11.im) * s,
        c(x12.re, y12.re) * s,
        c(x12.im, y12.im) * s,
    ]
}

/// (f_min, N): quaternion components of X and Y.
pub fn s3_pair(fp: &FramePointPair) -> ([f64; 4], [f64; 4]) {
    let (x, y) = xy_matrices(fp);
    (quaternion(&x), quaternion(&y))
}

fn pauli_vector(m: &Mat2C) -> [f64; 3] {
    let comp = |k: usize| 0.5 * (*m * Mat2C::pauli(k)).trace().re;
    [comp(1), comp(2), comp(3)]
}

/// (φ, ψ) ∈ S²×S² from F1σ₃F1⁻¹ and F2σ₃F2⁻¹. The first factor is read
/// through the orientation-reversed identification (−σ₁, σ₂, σ₃), which
/// makes the two Jacobians opposite.
pub fn sphere_pair(fp: &FramePointPair) -> ([f64; 3], [f64; 3]) {
    let s3 = Mat2C::pauli(3);
    let mut phi = pauli_vector(&(fp.f1 * s3 * fp.f1.dagger()));
    phi[0] = -phi[0];
    let psi = pauli_vector(&(fp.f2 * s3 * fp.f2.dagger()));
    (phi, psi)
}

/// Constant phase making β ≥ 0 for the lift: e^{−iπ/4} for twisted
/// potentials (partner −iλ₀), 1 for untwisted ones (partner −λ₀).
pub fn lift_phase(twisted: bool) -> Complex64 {
    if twisted {
        Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4)
    } else {
        c(1.0, 0.0)
    }
}

/// Phase-fixed lift of a twisted-family point, e^{−iπ/4}·v.
pub fn hat_lift(v: &[Complex64; 4]) -> [Complex64; 4] {
    let ph = lift_phase(true);
    v.map(|x| x * ph)
}

/// Bilinear ⟨v, w⟩ = Σ vᵢwᵢ.
pub fn bilinear(v: &[Complex64; 4], w: &[Complex64; 4]) -> Complex64 {
    v.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Hermitian ⟨v, w⟩_H = Σ vᵢ·conj(wᵢ).
pub fn hermitian(v: &[Complex64; 4], w: &[Complex64; 4]) -> Complex64 {
    v.iter().zip(w).map(|(a, b)| a * b.conj()).sum()
}

/// Unit norm, largest-modulus coordinate real positive (ties: lowest index).
pub fn normalize_projective(v: &[Complex64; 4]) -> Result<[Complex64; 4]> {
    let n = hermitian(v, v).re.sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Degenerate("zero homogeneous vector".into()));
    }
    let mut k = 0;
    for i in 1..4 {
        if v[i].norm() > v[k].norm() * (1.0 + 1e-12) {
            k = i;
        }
    }
    let ph = v[k].conj() / (v[k].norm() * n);
    Ok(v.map(|x| x * ph))
}

/// sqrt(1 − |⟨v,w⟩_H|²/(|v|²|w|²)); invariant under rescaling of either
/// side. Computed as the norm of the part of ŵ orthogonal to v̂.
pub fn projective_distance(v: &[Complex64; 4], w: &[Complex64; 4]) -> f64 {
    let nv = hermitian(v, v).re.sqrt();
    let nw = hermitian(w, w).re.sqrt();
    if !(nv > 0.0) || !(nw > 0.0) {
        return 1.0;
    }
    let vh = v.map(|x| x / nv);
    let wh = w.map(|x| x / nw);
    let k = hermitian(&wh, &vh);
    let r: [Complex64; 4] = std::array::from_fn(|i| wh[i] - k * vh[i]);
    hermitian(&r, &r).re.sqrt().min(1.0)
}

/// Rectangular grid of z values, nodes in row-major order (imaginary part
/// outer, real part inner).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl ZGrid {
    pub fn node(&self, i_re: usize, i_im: usize) -> Complex64 {
        let t = |lo: f64, hi: f64, i: usize, n: usize| if n <= 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
        c(t(self.re_min, self.re_max, i_re, self.n_re), t(self.im_min, self.im_max, i_im, self.n_im))
    }

    pub fn nodes(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.n_re * self.n_im);
        for j in 0..self.n_im {
            for i in 0..self.n_re {
                out.push(self.node(i, j));
            }
        }
        out
    }

    /// Rejects grids with a node within `eps` of a finite singular point.
    pub fn check_singular(&self, p: &Potential, eps: f64) -> Result<()> {
        for z in self.nodes() {
            if let Some(s) = p.singular_points.iter().find(|s| (z - **s).norm() < eps) {
                return Err(Error::Pole { z: *s });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceOptions {
    pub ode: OdeOptions,
    pub iwasawa: IwasawaOptions,
    /// Constant initial value Φ₀ at the base point.
    pub phi0: Mat2C,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        SurfaceOptions { ode: OdeOptions::default(), iwasawa: IwasawaOptions::default(), phi0: Mat2C::identity() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub z: Complex64,
    pub q2_hom: [Complex64; 4],
    pub s2_pair: ([f64; 3], [f64; 3]),
    pub s3_pair: ([f64; 4], [f64; 4]),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<InvariantReport>,
    /// Truncation tail of the loop-level Φ at z.
    pub tail_norm: f64,
}

impl SurfaceSample {
    pub fn from_pair(z: Complex64, fp: &FramePointPair, tail_norm: f64) -> Self {
        let (x, y) = xy_matrices(fp);
        SurfaceSample {
            z,
            q2_hom: q2_point(&x, &y),
            s2_pair: sphere_pair(fp),
            s3_pair: s3_pair(fp),
            diagnostics: None,
            tail_norm,
        }
    }
}

/// Runs the DPW steps at single points for a fixed potential.
#[derive(Debug, Clone)]
pub struct SurfaceEvaluator {
    pub potential: Potential,
    pub lambda0: Complex64,
    pub opts: SurfaceOptions,
    /// Extra rotation e^{i·angle} of the second spectral value. Nonzero
    /// values pair two unrelated harmonic maps (a negative control).
    pub partner_angle: f64,
    /// ε in F2 ↦ F2·exp(iε·Re z·σ₁). Nonzero values break the harmonic
    /// pairing (a negative control).
    pub frame_perturbation: f64,
}

impl SurfaceEvaluator {
    pub fn new(potential: Potential, lambda0: Complex64, opts: SurfaceOptions) -> Result<Self> {
        if (lambda0.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("|lambda0| = {} is not 1", lambda0.norm())));
        }
        opts.ode.validate()?;
        Ok(SurfaceEvaluator { potential, lambda0, opts, partner_angle: 0.0, frame_perturbation: 0.0 })
    }

    fn phi0(&self) -> LaurentLoop {
        LaurentLoop::constant(self.opts.phi0)
    }

    /// Loop-level Φ at z along the straight path from the base point.
    pub fn phi(&self, z: Complex64) -> Result<LaurentLoop> {
        if z == self.potential.base_point {
            return Ok(self.phi0().truncate(self.opts.ode.window));
        }
        integrate_frame(&self.potential, &path_from_base(&self.potential, z), &self.phi0(), &self.opts.ode)
    }

    /// Loop-level Φ at the end of `path`, which must start at the base point.
    pub fn phi_along(&self, path: &DomainPath) -> Result<LaurentLoop> {
        match path.start() {
            Some(s) if s == self.potential.base_point => {}
            _ => return Err(Error::Path("path must start at the base point".into())),
        }
        integrate_frame(&self.potential, path, &self.phi0(), &self.opts.ode)
    }

    /// Continues a known Φ(from) to z along a straight segment.
    pub fn phi_from(&self, from: Complex64, phi_from: &LaurentLoop, z: Complex64) -> Result<LaurentLoop> {
        if from == z {
            return Ok(phi_from.clone());
        }
        integrate_frame(&self.potential, &DomainPath::segment(from, z), phi_from, &self.opts.ode)
    }

    pub fn factor(&self, phi: &LaurentLoop, fixed_blocks: Option<usize>) -> Result<IwasawaResult> {
        let mut o = self.opts.iwasawa;
        if let Some(m) = fixed_blocks {
            o.blocks = m;
            o.adaptive = false;
        }
        iwasawa(phi, self.opts.ode.window, &o)
    }

    pub fn partner(&self, lambda0: Complex64) -> Complex64 {
        let p = self.potential.partner_lambda(lambda0);
        if self.partner_angle == 0.0 {
            p
        } else {
            p * Complex64::from_polar(1.0, self.partner_angle)
        }
    }

    /// Frames at (λ₀, partner) read off a factorization at z.
    pub fn pair_at(&self, r: &IwasawaResult, z: Complex64, lambda0: Complex64) -> Result<FramePointPair> {
        let f1 = r.frame_at(lambda0)?;
        let mut f2 = r.frame_at(self.partner(lambda0))?;
        if self.frame_perturbation != 0.0 {
            f2 = f2 * Mat2C::pauli(1).scale(Complex64::new(0.0, self.frame_perturbation * z.re)).expm();
        }
        FramePointPair::new(f1, f2, lambda0).map_err(|e| match e {
            Error::Validation(m) => Error::Factorization(format!("frame left SU(2): {m}")),
            e => e,
        })
    }

    pub fn sample(&self, z: Complex64) -> Result<SurfaceSample> {
        let phi = self.phi(z)?;
        let r = self.factor(&phi, None)?;
        let fp = self.pair_at(&r, z, self.lambda0)?;
        Ok(SurfaceSample::from_pair(z, &fp, phi.tail_norm()))
    }

    /// Local patch around `center` for finite differences.
    pub fn patch(&self, center: Complex64) -> Result<SurfacePatch<'_>> {
        let phi_c = self.phi(center)?;
        let r = self.factor(&phi_c, None)?;
        let blocks = r.blocks;
        let patch = SurfacePatch { ev: self, center, phi_c, blocks, cache: Mutex::new(HashMap::new()) };
        patch.cache.lock().expect("cache").insert(key(center), r);
        Ok(patch)
    }
}

fn key(z: Complex64) -> (u64, u64) {
    (z.re.to_bits(), z.im.to_bits())
}

/// Evaluations near a fixed center. Φ at nearby points is continued from
/// Φ(center) and all factorizations share the center's Toeplitz size, so
/// the numerical error is a smooth function of z and does not pollute
/// finite differences. Factorizations are cached by exact z; safe to call
/// from several threads.
#[derive(Debug)]
pub struct SurfacePatch<'a> {
    ev: &'a SurfaceEvaluator,
    center: Complex64,
    phi_c: LaurentLoop,
    blocks: usize,
    cache: Mutex<HashMap<(u64, u64), IwasawaResult>>,
}

impl SurfacePatch<'_> {
    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn evaluator(&self) -> &SurfaceEvaluator {
        self.ev
    }

    pub fn factorization(&self, z: Complex64) -> Result<IwasawaResult> {
        if let Some(r) = self.cache.lock().expect("cache").get(&key(z)) {
            return Ok(r.clone());
        }
        if self.ev.potential.distance_to_singular(z) < EPS_POLE {
            return Err(Error::Pole { z });
        }
        let phi = self.ev.phi_from(self.center, &self.phi_c, z)?;
        let r = self.ev.factor(&phi, Some(self.blocks))?;
        self.cache.lock().expect("cache").insert(key(z), r.clone());
        Ok(r)
    }

    pub fn pair_at(&self, z: Complex64, lambda0: Complex64) -> Result<FramePointPair> {
        self.ev.pair_at(&self.factorization(z)?, z, lambda0)
    }

    pub fn pair(&self, z: Complex64) -> Result<FramePointPair> {
        self.pair_at(z, self.ev.lambda0)
    }

    /// Phase-fixed Q₂ lift at spectral value λ₀.
    pub fn lift_at(&self, z: Complex64, lambda0: Complex64) -> Result<[Complex64; 4]> {
        let (x, y) = xy_matrices(&self.pair_at(z, lambda0)?);
        let ph = lift_phase(self.ev.potential.twisted);
        Ok(q2_point(&x, &y).map(|v| v * ph))
    }

    pub fn lift(&self, z: Complex64) -> Result<[Complex64; 4]> {
        self.lift_at(z, self.ev.lambda0)
    }

    pub fn s2(&self, z: Complex64) -> Result<([f64; 3], [f64; 3])> {
        Ok(sphere_pair(&self.pair(z)?))
    }
}

/// Evaluates every grid node; failures are kept per node.
pub fn build_surface(
    p: &Potential,
    grid: &[Complex64],
    lambda0: Complex64,
    opts: &SurfaceOptions,
) -> Result<Vec<Result<SurfaceSample>>> {
    let ev = SurfaceEvaluator::new(p.clone(), lambda0, *opts)?;
    Ok(grid.iter().map(|&z| ev.sample(z)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{sphere_frame, torus_frame};
    use crate::potentials::{make_potential, PotentialSpec};

    fn exp_i_sigma(k: usize, t: f64) -> Mat2C {
        (Mat2C::pauli(k).scale(c(0.0, t))).expm()
    }

    fn pair(f1: Mat2C, f2: Mat2C) -> FramePointPair {
        FramePointPair::new(f1, f2, c(1.0, 0.0)).unwrap()
    }

    #[test]
    fn psi_examples() {
        let id = Mat2C::identity();
        let m = psi_so4(&id, &id).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        let m = psi_so4(&Mat2C::diag(c(0.0, 1.0), c(0.0, -1.0)), &id).unwrap();
        let want = [[0.0, -1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, -1.0], [0.0, 0.0, 1.0, 0.0]];
        assert_eq!(m, want);
        assert!(matches!(psi_so4(&Mat2C::from_real(2.0, 0.0, 0.0, 0.5), &id), Err(Error::Validation(_))));
    }

    #[test]
    fn xy_and_q2_examples() {
        let id = Mat2C::identity();
        let (x, y) = xy_matrices(&pair(id, id));
        assert!((x - id).max_abs() < 1e-15);
        assert!((y - Mat2C::pauli(3).scale(c(0.0, 1.0))).max_abs() < 1e-15);
        let v = q2_point(&x, &y);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let want = [c(s, 0.0), c(0.0, s), c(0.0, 0.0), c(0.0, 0.0)];
        for i in 0..4 {
            assert!((v[i] - want[i]).norm() < 1e-15);
        }
        assert!(bilinear(&v, &v).norm() < 1e-15);
        let r = exp_i_sigma(1, 0.4);
        let (x, _) = xy_matrices(&pair(r, id));
        assert!((x - r).max_abs() < 1e-15);
        let (fmin, n) = s3_pair(&pair(id, id));
        assert_eq!(fmin, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(n, [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn sphere_pair_examples() {
        let id = Mat2C::identity();
        assert_eq!(sphere_pair(&pair(id, id)), ([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]));
        let f1 = exp_i_sigma(2, std::f64::consts::FRAC_PI_4);
        let (phi, _) = sphere_pair(&pair(f1, id));
        assert!((phi[0] - 1.0).abs() < 1e-15 && phi[1].abs() < 1e-15 && phi[2].abs() < 1e-15);
        let g = Mat2C::diag(Complex64::from_polar(1.0, 0.7), Complex64::from_polar(1.0, -0.7));
        let f1 = exp_i_sigma(1, 0.3) * exp_i_sigma(2, -1.1);
        let (a, _) = sphere_pair(&pair(f1, id));
        let (b, _) = sphere_pair(&pair(f1 * g, id));
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_family_q2_matches_displayed_vector() {
        for (z, lam) in [(c(0.3, 0.2), c(1.0, 0.0)), (c(-0.7, 1.1), Complex64::from_polar(1.0, 0.9))] {
            let fp = pair(sphere_frame(z, lam).unwrap(), sphere_frame(z, c(0.0, -1.0) * lam).unwrap());
            let (x, y) = xy_matrices(&fp);
            let v = q2_point(&x, &y);
            let r2 = z.norm_sqr();
            let i = c(0.0, 1.0);
            let want = [
                c(1.0, -r2),
                c(-r2, 1.0),
                z / lam + i * z.conj() * lam,
                -z.conj() * lam - i * z / lam,
            ];
            assert!(projective_distance(&v, &want) < 1e-8);
            assert!(bilinear(&v, &v).norm() < 1e-14);
        }
        let fp = pair(sphere_frame(c(0.0, 0.0), c(1.0, 0.0)).unwrap(), sphere_frame(c(0.0, 0.0), c(0.0, -1.0)).unwrap());
        assert_eq!(s3_pair(&fp).0, [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn torus_family_q2_matches_displayed_vector() {
        let lam = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        for z in [c(0.3, 0.2), c(-0.4, 0.9)] {
            let fp = pair(torus_frame(z, lam).unwrap(), torus_frame(z, -i * lam).unwrap());
            let (x, y) = xy_matrices(&fp);
            let v = q2_point(&x, &y);
            let s = z / lam + z.conj() * lam;
            let d = z / lam - z.conj() * lam;
            let a = s + i * d;
            let b = s - i * d;
            let want = [a.cos(), i * b.cos(), i * b.sin(), -a.sin()];
            assert!(projective_distance(&v, &want) < 1e-8, "{v:?} {want:?}");
        }
    }

    #[test]
    fn projective_helpers() {
        let v = [c(0.1, 0.2), c(-0.3, 0.0), c(0.0, 0.5), c(0.2, -0.1)];
        let w = v.map(|x| x * c(-1.3, 0.4));
        assert!(projective_distance(&v, &w) < 1e-15);
        let nv = normalize_projective(&v).unwrap();
        let nw = normalize_projective(&w).unwrap();
        for k in 0..4 {
            assert!((nv[k] - nw[k]).norm() < 1e-14);
        }
        assert!((hermitian(&nv, &nv).re - 1.0).abs() < 1e-14);
        assert!(normalize_projective(&[c(0.0, 0.0); 4]).is_err());
    }

    #[test]
    fn pipeline_sphere_grid_invariants() {
        let p = make_potential(PotentialSpec::Sphere).unwrap();
        let g = ZGrid { re_min: -1.0, re_max: 1.0, im_min: -1.0, im_max: 1.0, n_re: 3, n_im: 3 };
        let out = build_surface(&p, &g.nodes(), c(1.0, 0.0), &SurfaceOptions::default()).unwrap();
        assert_eq!(out.len(), 9);
        for s in out {
            let s = s.unwrap();
            assert!(bilinear(&s.q2_hom, &s.q2_hom).norm() < 1e-9);
            assert!((hermitian(&s.q2_hom, &s.q2_hom).re - 1.0).abs() < 1e-9);
            let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n(&s.s2_pair.0) - 1.0).abs() < 1e-9 && (n(&s.s2_pair.1) - 1.0).abs() < 1e-9);
            assert!((n(&s.s3_pair.0) - 1.0).abs() < 1e-9 && (n(&s.s3_pair.1) - 1.0).abs() < 1e-9);
            let dot: f64 = s.s3_pair.0.iter().zip(&s.s3_pair.1).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-9);
            let want = sphere_frame(s.z, c(1.0, 0.0)).unwrap();
            let want2 = sphere_frame(s.z, c(0.0, -1.0)).unwrap();
            let (x, y) = xy_matrices(&pair(want, want2));
            assert!(projective_distance(&q2_point(&x, &y), &s.q2_hom) < 1e-9);
        }
        assert!(build_surface(&p, &[], c(1.0, 0.0), &SurfaceOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn patch_matches_direct_evaluation() {
        let p = make_potential(PotentialSpec::Equivariant { a: 0.75, b: 0.25, c: 0.0 }).unwrap();
        let ev = SurfaceEvaluator::new(p, c(1.0, 0.0), SurfaceOptions::default()).unwrap();
        let z0 = c(0.4, 0.3);
        let patch = ev.patch(z0).unwrap();
        let z = z0 + c(2e-3, -1e-3);
        let a = patch.pair(z).unwrap();
        let s = ev.sample(z).unwrap();
        let (x, y) = xy_matrices(&a);
        assert!(projective_distance(&q2_point(&x, &y), &s.q2_hom) < 1e-9);
    }
}
