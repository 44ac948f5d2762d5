//! Finite-difference verification of the surface invariants: conformal
//! factor, α, β, φ, the sinh-Gordon equation, the S²×S² geometry and the
//! Castro–Urbano quantities, plus symmetry and closing residuals.
//!
//! Derivatives use 5-point central stencils on the lattice z + h·(a + ib)
//! with integer offsets, so overlapping stencils hit identical points and a
//! caching surface callable evaluates each point once.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::closedform::{trinoid_closing_check, unitarizer, TrinoidClosingReport};
use crate::frames::{hermitian, projective_distance, SurfaceEvaluator};
use crate::holonomy::{loop_around, loop_around_infinity, monodromy_with_initial, DomainPath, OdeOptions};
use crate::loops::{circle_samples, Mat2C};
use crate::potentials::{Potential, PotentialSpec};
use crate::{Error, Result};

/// Surface callable returning the phase-fixed C⁴ lift. Must be safe to call
/// concurrently.
pub type LiftFn<'a> = dyn Fn(Complex64) -> Result<[Complex64; 4]> + Sync + 'a;
/// Surface callable returning the S²×S² pair (φ, ψ).
pub type PairFn<'a> = dyn Fn(Complex64) -> Result<([f64; 3], [f64; 3])> + Sync + 'a;

/// Default finite-difference step.
pub const DEFAULT_H: f64 = 1e-3;
/// Conformal factors below this are treated as a degenerate immersion.
pub const DEGENERATE_EU: f64 = 1e-12;

/// Offsets of the 9-point cross stencil, in the order used by every
/// stencil array in this module.
pub const STENCIL: [(i32, i32); 9] = [(0, 0), (1, 0), (-1, 0), (2, 0), (-2, 0), (0, 1), (0, -1), (0, 2), (0, -2)];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Cached evaluations on the lattice around a center.
struct Lattice<'a, const N: usize> {
    f: &'a (dyn Fn(Complex64) -> Result<[Complex64; N]> + Sync + 'a),
    z: Complex64,
    h: f64,
    cache: Mutex<HashMap<(i32, i32), [Complex64; N]>>,
}

impl<'a, const N: usize> Lattice<'a, N> {
    fn new(f: &'a (dyn Fn(Complex64) -> Result<[Complex64; N]> + Sync + 'a), z: Complex64, h: f64) -> Self {
        Lattice { f, z, h, cache: Mutex::new(HashMap::new()) }
    }

    fn at(&self, a: i32, b: i32) -> Result<[Complex64; N]> {
        if let Some(v) = self.cache.lock().expect("lattice cache").get(&(a, b)) {
            return Ok(*v);
        }
        let v = (self.f)(self.z + c(a as f64 * self.h, b as f64 * self.h))?;
        self.cache.lock().expect("lattice cache").insert((a, b), v);
        Ok(v)
    }

    fn comb(&self, pts: &[((i32, i32), f64)], scale: f64) -> Result<[Complex64; N]> {
        let mut out = [c(0.0, 0.0); N];
        for &((a, b), w) in pts {
            let v = self.at(a, b)?;
            for i in 0..N {
                out[i] += v[i] * w;
            }
        }
        Ok(out.map(|x| x * scale))
    }

    fn dx(&self, a: i32, b: i32) -> Result<[Complex64; N]> {
        let p = [((a + 2, b), -1.0), ((a + 1, b), 8.0), ((a - 1, b), -8.0), ((a - 2, b), 1.0)];
        self.comb(&p, 1.0 / (12.0 * self.h))
    }

    fn dy(&self, a: i32, b: i32) -> Result<[Complex64; N]> {
        let p = [((a, b + 2), -1.0), ((a, b + 1), 8.0), ((a, b - 1), -8.0), ((a, b - 2), 1.0)];
        self.comb(&p, 1.0 / (12.0 * self.h))
    }

    fn laplacian(&self, a: i32, b: i32) -> Result<[Complex64; N]> {
        let p = [
            ((a + 2, b), -1.0),
            ((a + 1, b), 16.0),
            ((a, b), -60.0),
            ((a - 1, b), 16.0),
            ((a - 2, b), -1.0),
            ((a, b + 2), -1.0),
            ((a, b + 1), 16.0),
            ((a, b - 1), 16.0),
            ((a, b - 2), -1.0),
        ];
        self.comb(&p, 1.0 / (12.0 * self.h * self.h))
    }

    /// (f, f_z, f_z̄, f_zz̄) at a lattice offset.
    fn jet(&self, a: i32, b: i32) -> Result<Jet<N>> {
        let f = self.at(a, b)?;
        let fx = self.dx(a, b)?;
        let fy = self.dy(a, b)?;
        let lap = self.laplacian(a, b)?;
        let i = c(0.0, 1.0);
        Ok(Jet {
            f,
            fx,
            fy,
            fz: std::array::from_fn(|k| 0.5 * (fx[k] - i * fy[k])),
            fzb: std::array::from_fn(|k| 0.5 * (fx[k] + i * fy[k])),
            fzzb: lap.map(|x| 0.25 * x),
        })
    }
}

struct Jet<const N: usize> {
    f: [Complex64; N],
    fx: [Complex64; N],
    fy: [Complex64; N],
    fz: [Complex64; N],
    fzb: [Complex64; N],
    fzzb: [Complex64; N],
}

fn bil<const N: usize>(a: &[Complex64; N], b: &[Complex64; N]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// 5-point first derivative along one axis from values at offsets −2..=2.
fn d1(v: [f64; 5], h: f64) -> f64 {
    (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h)
}

fn d1c(v: [Complex64; 5], h: f64) -> Complex64 {
    (v[0] - v[1] * 8.0 + v[3] * 8.0 - v[4]) / (12.0 * h)
}

/// FD Laplacian at the center of a stencil array ordered as [`STENCIL`].
pub fn stencil_laplacian(v: &[f64; 9], h: f64) -> f64 {
    let ax = -v[3] + 16.0 * v[1] - 30.0 * v[0] + 16.0 * v[2] - v[4];
    let ay = -v[7] + 16.0 * v[5] - 30.0 * v[0] + 16.0 * v[6] - v[8];
    (ax + ay) / (12.0 * h * h)
}

/// ∂_z at the center of a stencil array ordered as [`STENCIL`].
pub fn stencil_dz(v: &[f64; 9], h: f64) -> Complex64 {
    let dx = d1([v[4], v[2], v[0], v[1], v[3]], h);
    let dy = d1([v[8], v[6], v[0], v[5], v[7]], h);
    c(0.5 * dx, -0.5 * dy)
}

/// ∂_z̄ of a complex field at the center of a stencil array.
pub fn stencil_dzbar(v: &[Complex64; 9], h: f64) -> Complex64 {
    let dx = d1c([v[4], v[2], v[0], v[1], v[3]], h);
    let dy = d1c([v[8], v[6], v[0], v[5], v[7]], h);
    0.5 * (dx + c(0.0, 1.0) * dy)
}

/// Pointwise invariants of the lift at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointInvariants {
    pub eu: f64,
    pub u: f64,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub phi: Complex64,
    /// e^û = e^u + |β|; equals e^u + √(e^{2u} − |α|²) when the e^{2u}
    /// relation holds, but stays smooth where β vanishes.
    pub e_uhat: f64,
    pub u_hat: f64,
    /// e^{2u} − |α|²
    pub discriminant: f64,
    pub horizontality: f64,
    pub quadric: f64,
}

impl PointInvariants {
    /// C = ½e^{−u}|β|.
    pub fn c(&self) -> f64 {
        0.5 * self.beta.norm() / self.eu
    }

    /// p·r = −α/2 and |r|² = e^û/2 of the real-form parametrization.
    pub fn p_times_r(&self) -> Complex64 {
        -0.5 * self.alpha
    }

    pub fn r_norm_sqr(&self) -> f64 {
        0.5 * self.e_uhat
    }
}

fn point_from_jet(j: &Jet<4>) -> Result<PointInvariants> {
    let conj_fz = j.fz.map(|x| x.conj());
    let eu = bil(&j.fz, &conj_fz).re;
    if !(eu >= DEGENERATE_EU) {
        return Err(Error::Degenerate(format!("conformal factor {eu:.3e} below {DEGENERATE_EU:.0e}")));
    }
    let alpha = bil(&j.fz, &j.fz);
    let beta = bil(&j.fz, &j.fzb);
    let phi = bil(&j.fzzb, &j.fzb.map(|x| x.conj())) / eu;
    let e_uhat = eu + beta.norm();
    Ok(PointInvariants {
        eu,
        u: eu.ln(),
        alpha,
        beta,
        phi,
        e_uhat,
        u_hat: e_uhat.ln(),
        discriminant: eu * eu - alpha.norm_sqr(),
        horizontality: bil(&j.fz, &j.f.map(|x| x.conj())).norm(),
        quadric: bil(&j.f, &j.f).norm(),
    })
}

/// Invariants at z from central differences of the lift.
pub fn point_invariants(lift: &LiftFn, z: Complex64, h: f64) -> Result<PointInvariants> {
    let lat = Lattice::new(lift, z, h);
    point_from_jet(&lat.jet(0, 0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub z: Complex64,
    pub h: f64,
    pub u: f64,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub phi_inv: Complex64,
    pub u_hat: f64,
    /// arg β of the phase-fixed lift (0 when β ≥ 0 holds).
    pub beta_arg: f64,
    pub residuals: BTreeMap<String, f64>,
}

/// Relative size of a negative e^{2u} − |α|² tolerated as round-off.
const DISCRIMINANT_TOL: f64 = 1e-6;

fn check_discriminant(p: &PointInvariants) -> Result<()> {
    if p.discriminant < -DISCRIMINANT_TOL * p.eu * p.eu {
        return Err(Error::Domain(format!(
            "e^(2u) - |alpha|^2 = {:.3e} is negative; the e^(2u) relation is violated",
            p.discriminant
        )));
    }
    Ok(())
}

/// |Δû/4 + e^û − |α|²e^{−û}| at the center of a stencil of invariants.
pub fn sinh_gordon_residual(stencil: &[PointInvariants; 9], h: f64) -> Result<f64> {
    for p in stencil {
        check_discriminant(p)?;
    }
    let uh = stencil.map(|p| p.u_hat);
    let c0 = &stencil[0];
    Ok((stencil_laplacian(&uh, h) / 4.0 + c0.e_uhat - c0.alpha.norm_sqr() / c0.e_uhat).abs())
}

fn stencil_invariants(lat: &Lattice<4>) -> Result<[PointInvariants; 9]> {
    let mut out = Vec::with_capacity(9);
    for (a, b) in STENCIL {
        out.push(point_from_jet(&lat.jet(a, b)?)?);
    }
    Ok(out.try_into().expect("nine stencil points"))
}

fn report_from_stencil(z: Complex64, h: f64, st: &[PointInvariants; 9]) -> Result<InvariantReport> {
    let p = &st[0];
    check_discriminant(p)?;
    let alpha_holo = stencil_dzbar(&st.map(|q| q.alpha), h).norm();
    let sg = sinh_gordon_residual(st, h)?;
    let mut r = BTreeMap::new();
    r.insert("alpha_holomorphy".to_string(), alpha_holo);
    r.insert("beta_phase".to_string(), p.beta.im.abs() + (-p.beta.re).max(0.0));
    r.insert("phi_norm".to_string(), p.phi.norm());
    r.insert("quadric".to_string(), p.quadric);
    r.insert("horizontality".to_string(), p.horizontality);
    r.insert("sinh_gordon".to_string(), sg);
    r.insert(
        "metric_identity".to_string(),
        (2.0 * p.eu - (p.e_uhat + p.alpha.norm_sqr() / p.e_uhat)).abs(),
    );
    r.insert("relation_e2u".to_string(), (p.eu * p.eu - p.beta.norm_sqr() - p.alpha.norm_sqr()).abs());
    Ok(InvariantReport {
        z,
        h,
        u: p.u,
        alpha: p.alpha,
        beta: p.beta,
        phi_inv: p.phi,
        u_hat: p.u_hat,
        beta_arg: p.beta.arg(),
        residuals: r,
    })
}

/// Full invariant report at z, including the stencil-based residuals
/// (holomorphy of α, sinh-Gordon).
pub fn invariants_report(lift: &LiftFn, z: Complex64, h: f64) -> Result<InvariantReport> {
    let lat = Lattice::new(lift, z, h);
    report_from_stencil(z, h, &stencil_invariants(&lat)?)
}

/// Geometry of the S²×S² pair at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointGeometryReport {
    pub conformal_residual: f64,
    pub lagrangian_residual: f64,
    pub harmonic_residual: f64,
    pub jacobian_sum: f64,
    /// Jac = det{x, x_x, x_y}/(8e^u) for each factor, with 8e^u = 2|Φ_z|².
    pub jac_phi: f64,
    pub jac_psi: f64,
    /// Bilinear ⟨φ_z, φ_z⟩ and ⟨ψ_z, ψ_z⟩.
    pub theta_phi: Complex64,
    pub theta_psi: Complex64,
    /// |Φ_z|² = |φ_z|² + |ψ_z|² (= 4e^u).
    pub metric: f64,
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn split3(v: &[Complex64; 6], k: usize) -> [f64; 3] {
    [v[3 * k].re, v[3 * k + 1].re, v[3 * k + 2].re]
}

fn split3c(v: &[Complex64; 6], k: usize) -> [Complex64; 3] {
    [v[3 * k], v[3 * k + 1], v[3 * k + 2]]
}

pub fn geometry_report(pair: &PairFn, z: Complex64, h: f64) -> Result<PointGeometryReport> {
    let f = |w: Complex64| -> Result<[Complex64; 6]> {
        let (a, b) = pair(w)?;
        Ok([a[0], a[1], a[2], b[0], b[1], b[2]].map(|x| c(x, 0.0)))
    };
    let lat = Lattice::new(&f, z, h);
    let j = lat.jet(0, 0)?;
    let norm2 = |v: &[Complex64; 3]| v.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let (pz, qz) = (split3c(&j.fz, 0), split3c(&j.fz, 1));
    let (np, nq) = (norm2(&pz), norm2(&qz));
    let metric = np + nq;
    if !(metric >= DEGENERATE_EU) {
        return Err(Error::Degenerate(format!("|Phi_z|^2 = {metric:.3e}")));
    }
    let theta_phi = bil(&pz, &pz);
    let theta_psi = bil(&qz, &qz);
    let dphi = det3(split3(&j.f, 0), split3(&j.fx, 0), split3(&j.fy, 0));
    let dpsi = det3(split3(&j.f, 1), split3(&j.fx, 1), split3(&j.fy, 1));
    let harm = |k: usize, n: f64| {
        let x = split3(&j.f, k);
        let l = split3c(&j.fzzb, k);
        (0..3).map(|i| (l[i] + n * x[i]).norm_sqr()).sum::<f64>().sqrt()
    };
    let jac_phi = dphi / (2.0 * metric);
    let jac_psi = dpsi / (2.0 * metric);
    Ok(PointGeometryReport {
        conformal_residual: (np - nq).abs() + (theta_phi + theta_psi).norm(),
        lagrangian_residual: (dphi + dpsi).abs(),
        harmonic_residual: harm(0, np) + harm(1, nq),
        jacobian_sum: (jac_phi + jac_psi).abs(),
        jac_phi,
        jac_psi,
        theta_phi,
        theta_psi,
        metric,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CUReport {
    /// C = ½e^{−u}|β|
    pub c: f64,
    /// Θ = ⟨ψ_z, ψ_z⟩
    pub theta: Complex64,
    /// ⟨φ_z, φ_z⟩ (= −Θ)
    pub theta_phi: Complex64,
    /// |Θ − 2α|
    pub theta_residual: f64,
    /// |Jac(φ) − C| + |Jac(ψ) + C|
    pub jacobian_match: f64,
    /// None when 1 − 4C² is too small for the Gauss equation.
    pub gauss_residual: Option<f64>,
    pub gauss_skipped: bool,
    /// K = −e^{−u}u_zz̄
    pub curvature: f64,
}

/// Gauss-term cutoff on 1 − 4C².
pub const GAUSS_SKIP_TOL: f64 = 1e-6;

pub fn cu_report(stencil: &[PointInvariants; 9], geo: &PointGeometryReport, h: f64) -> CUReport {
    let p = &stencil[0];
    let cval = p.c();
    let u_zzb = stencil_laplacian(&stencil.map(|q| q.u), h) / 4.0;
    let cz = stencil_dz(&stencil.map(|q| q.c()), h);
    let gap = 1.0 - 4.0 * cval * cval;
    let gauss = if gap > GAUSS_SKIP_TOL {
        Some((u_zzb + 8.0 * p.eu * cval * cval - 4.0 * cz.norm_sqr() / gap).abs())
    } else {
        None
    };
    CUReport {
        c: cval,
        theta: geo.theta_psi,
        theta_phi: geo.theta_phi,
        theta_residual: (geo.theta_psi - 2.0 * p.alpha).norm(),
        jacobian_match: (geo.jac_phi - cval).abs() + (geo.jac_psi + cval).abs(),
        gauss_skipped: gauss.is_none(),
        gauss_residual: gauss,
        curvature: -u_zzb / p.eu,
    }
}

/// Everything at one point from a lift and a pair callable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub invariants: InvariantReport,
    pub geometry: PointGeometryReport,
    pub cu: CUReport,
}

pub fn point_report(lift: &LiftFn, pair: &PairFn, z: Complex64, h: f64) -> Result<PointReport> {
    let lat = Lattice::new(lift, z, h);
    let st = stencil_invariants(&lat)?;
    let invariants = report_from_stencil(z, h, &st)?;
    let geometry = geometry_report(pair, z, h)?;
    let cu = cu_report(&st, &geometry, h);
    Ok(PointReport { invariants, geometry, cu })
}

/// Full report at z through the DPW pipeline of `ev`.
pub fn pipeline_report(ev: &SurfaceEvaluator, z: Complex64, h: f64) -> Result<PointReport> {
    let patch = ev.patch(z)?;
    let lift = |w: Complex64| patch.lift(w);
    let pair = |w: Complex64| patch.s2(w);
    point_report(&lift, &pair, z, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymmetryTransform {
    /// z ↦ e^{2πiℓ/(k+2)}z acting as blockdiag(I₂, rotation) on the lift.
    Rotation { k: u32, l: u32 },
    /// Continuation once around `center` (counter-clockwise).
    Deck { center: Complex64 },
}

/// Largest truncation window tried for deck continuation.
pub const DECK_MAX_N: i32 = 128;

/// Q₂ point at z after continuing once around `center`. The monodromy
/// loop has slowly decaying Fourier coefficients, so the window is doubled
/// until the truncation tail is negligible.
fn deck_continued(ev: &SurfaceEvaluator, center: Complex64, z: Complex64) -> Result<[Complex64; 4]> {
    let r = (z - center).norm();
    if r == 0.0 {
        return Err(Error::Path("sample sits on the deck center".into()));
    }
    let circle = DomainPath::circle(center, r, 64, (z - center).arg(), true);
    let path = DomainPath::segment(ev.potential.base_point, z).then(&circle);
    let mut n = ev.opts.ode.window.hi.max(-ev.opts.ode.window.lo).max(16);
    loop {
        let mut wide = ev.clone();
        wide.opts.ode.window = crate::loops::Window::symmetric(n);
        let phi = wide.phi_along(&path)?;
        if phi.tail_norm() <= 1e-10 || n >= DECK_MAX_N {
            let fr = wide.factor(&phi, None)?;
            let fp = wide.pair_at(&fr, z, ev.lambda0)?;
            return Ok(crate::frames::SurfaceSample::from_pair(z, &fp, phi.tail_norm()).q2_hom);
        }
        n *= 2;
    }
}

fn block_rotation(theta: f64, v: &[Complex64; 4]) -> [Complex64; 4] {
    let (s, co) = theta.sin_cos();
    [v[0], v[1], v[2] * co - v[3] * s, v[2] * s + v[3] * co]
}

/// Largest projective distance between the lift at the transformed point
/// and the expected image over the samples.
pub fn symmetry_check(ev: &SurfaceEvaluator, t: SymmetryTransform, samples: &[Complex64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &z in samples {
        let d = match t {
            SymmetryTransform::Rotation { k, l } => {
                let theta = 2.0 * std::f64::consts::PI * l as f64 / (k as f64 + 2.0);
                let a = ev.sample(z)?.q2_hom;
                let b = ev.sample(Complex64::from_polar(1.0, theta) * z)?.q2_hom;
                projective_distance(&b, &block_rotation(theta, &a))
            }
            SymmetryTransform::Deck { center } => {
                let direct = ev.sample(z)?.q2_hom;
                let cont = deck_continued(ev, center, z)?;
                projective_distance(&cont, &direct)
            }
        };
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Largest |u(λ) − u(λ₀)| and |α(λ) − (λ₀/λ)²α(λ₀)| at z over the given
/// spectral values, using one patch of `ev` (whose λ₀ is the reference).
/// Untwisted potentials use the first power of λ₀/λ.
pub fn associated_family_deviation(ev: &SurfaceEvaluator, z: Complex64, lambdas: &[Complex64], h: f64) -> Result<(f64, f64)> {
    let patch = ev.patch(z)?;
    let base = {
        let f = |w: Complex64| patch.lift(w);
        point_invariants(&f, z, h)?
    };
    let (mut du, mut da): (f64, f64) = (0.0, 0.0);
    for &lam in lambdas {
        let f = |w: Complex64| patch.lift_at(w, lam);
        let p = point_invariants(&f, z, h)?;
        du = du.max((p.u - base.u).abs());
        let r = ev.lambda0 / lam;
        let scale = if ev.potential.twisted { r * r } else { r };
        da = da.max((p.alpha - scale * base.alpha).norm());
    }
    Ok((du, da))
}

/// Numerical monodromy verification for a trinoid potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrinoidMonodromyReport {
    /// ±I test of (H₀, H₁, H∞) at λ₀ and at the partner value.
    pub closing: TrinoidClosingReport,
    /// (λ, ‖H∞H₁H₀ − I‖) at λ₀ and −iλ₀.
    pub product_defects: Vec<(Complex64, f64)>,
    /// max ‖HH† − I‖ over circle samples with Φ₀ = I.
    pub raw_unitarity: f64,
    /// Same after conjugating by the invariant-form square root.
    pub unitarized_unitarity: f64,
    pub samples: usize,
}

fn trinoid_monodromies(
    p: &Potential,
    loops: &[DomainPath; 3],
    lambda: Complex64,
    phi0: Mat2C,
    opts: &OdeOptions,
) -> Result<[Mat2C; 3]> {
    Ok([
        monodromy_with_initial(p, &loops[0], lambda, phi0, opts)?,
        monodromy_with_initial(p, &loops[1], lambda, phi0, opts)?,
        monodromy_with_initial(p, &loops[2], lambda, phi0, opts)?,
    ])
}

pub fn trinoid_monodromy_report(p: &Potential, opts: &OdeOptions, samples: usize, tol: f64) -> Result<TrinoidMonodromyReport> {
    let lambda0 = match p.spec {
        PotentialSpec::Trinoid { lambda0, .. } => lambda0,
        _ => return Err(Error::Validation("trinoid monodromy needs a trinoid potential".into())),
    };
    let loops = [loop_around(p, c(0.0, 0.0))?, loop_around(p, c(1.0, 0.0))?, loop_around_infinity(p)];
    let id = Mat2C::identity();
    let first = trinoid_monodromies(p, &loops, lambda0, id, opts)?;
    let second = trinoid_monodromies(p, &loops, p.partner_lambda(lambda0), id, opts)?;
    let closing = trinoid_closing_check(&first, &second, tol);
    let mut product_defects = Vec::new();
    for lam in [lambda0, c(0.0, -1.0) * lambda0] {
        let h = trinoid_monodromies(p, &loops, lam, id, opts)?;
        product_defects.push((lam, (h[2] * h[1] * h[0] - id).max_abs()));
    }
    let (mut raw, mut fixed): (f64, f64) = (0.0, 0.0);
    for lam in circle_samples(samples) {
        let h = trinoid_monodromies(p, &loops, lam, id, opts)?;
        raw = h.iter().map(Mat2C::unitarity_error).fold(raw, f64::max);
        let s = unitarizer(&h[..2])?;
        let hu = trinoid_monodromies(p, &loops, lam, s, opts)?;
        fixed = hu.iter().map(Mat2C::unitarity_error).fold(fixed, f64::max);
    }
    Ok(TrinoidMonodromyReport { closing, product_defects, raw_unitarity: raw, unitarized_unitarity: fixed, samples })
}

/// Hermitian norm of a lift (1 for q2_point output).
pub fn lift_norm(v: &[Complex64; 4]) -> f64 {
    hermitian(v, v).re.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{sphere_frame, torus_frame};
    use crate::frames::{hat_lift, q2_point, sphere_pair, xy_matrices, FramePointPair};
    use crate::potentials::make_potential;

    fn cf_pair(frame: fn(Complex64, Complex64) -> Result<Mat2C>, z: Complex64) -> FramePointPair {
        let l = c(1.0, 0.0);
        FramePointPair::new(frame(z, l).unwrap(), frame(z, c(0.0, -1.0) * l).unwrap(), l).unwrap()
    }

    fn cf_lift(frame: fn(Complex64, Complex64) -> Result<Mat2C>) -> impl Fn(Complex64) -> Result<[Complex64; 4]> + Sync {
        move |z| {
            let (x, y) = xy_matrices(&cf_pair(frame, z));
            Ok(hat_lift(&q2_point(&x, &y)))
        }
    }

    fn cf_s2(frame: fn(Complex64, Complex64) -> Result<Mat2C>) -> impl Fn(Complex64) -> Result<([f64; 3], [f64; 3])> + Sync {
        move |z| Ok(sphere_pair(&cf_pair(frame, z)))
    }

    #[test]
    fn torus_invariants() {
        let lift = cf_lift(torus_frame);
        let z = c(0.3, 0.2);
        let r = invariants_report(&lift, z, DEFAULT_H).unwrap();
        assert!((r.alpha.norm() - r.u.exp()).abs() < 1e-8);
        assert!(r.beta.norm() < 1e-8 && r.phi_inv.norm() < 1e-8);
        for (k, v) in &r.residuals {
            assert!(*v < 1e-6, "{k} = {v}");
        }
        let g = geometry_report(&cf_s2(torus_frame), z, DEFAULT_H).unwrap();
        assert!(g.conformal_residual < 1e-8 && g.lagrangian_residual < 1e-8 && g.harmonic_residual < 1e-6);
    }

    #[test]
    fn sphere_invariants() {
        let lift = cf_lift(sphere_frame);
        let pair = cf_s2(sphere_frame);
        let z = c(0.3, 0.2);
        let rep = point_report(&lift, &pair, z, DEFAULT_H).unwrap();
        let r = &rep.invariants;
        assert!(r.alpha.norm() < 1e-8);
        let (eu, _) = crate::closedform::sphere_invariants(z);
        assert!((r.u - eu.ln()).abs() < 1e-8);
        for (k, v) in &r.residuals {
            assert!(*v < 1e-6, "{k} = {v}");
        }
        assert!(rep.cu.gauss_skipped);
        assert!((rep.cu.curvature - 2.0).abs() < 1e-6);
        assert!((rep.cu.c - 0.5).abs() < 1e-8);
        assert!(rep.cu.jacobian_match < 1e-6, "{:?}", rep);
        assert!(rep.geometry.jacobian_sum < 1e-8);
    }

    #[test]
    fn constant_map_is_degenerate() {
        let lift = |_z: Complex64| Ok([c(0.5, 0.0), c(0.0, 0.5), c(0.5, 0.0), c(0.0, 0.5)]);
        assert!(matches!(invariants_report(&lift, c(0.0, 0.0), DEFAULT_H), Err(Error::Degenerate(_))));
        let pair = |_z: Complex64| Ok(([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]));
        assert!(matches!(geometry_report(&pair, c(0.0, 0.0), DEFAULT_H), Err(Error::Degenerate(_))));
    }

    #[test]
    fn stencil_helpers_exact_on_polynomials() {
        let h = 0.1;
        let f = |x: f64, y: f64| x * x * x - 2.0 * x * y * y + 0.5 * y;
        let v: [f64; 9] = STENCIL.map(|(a, b)| f(0.3 + a as f64 * h, -0.2 + b as f64 * h));
        // Δf = 6x − 4x
        assert!((stencil_laplacian(&v, h) - 2.0 * 0.3).abs() < 1e-12);
        let fx = 3.0 * 0.09 - 2.0 * 0.04;
        let fy = -4.0 * 0.3 * (-0.2) + 0.5;
        let dz = stencil_dz(&v, h);
        assert!((dz - c(0.5 * fx, -0.5 * fy)).norm() < 1e-12);
    }

    #[test]
    fn trinoid_monodromy() {
        let p = make_potential(PotentialSpec::Trinoid { lambda0: c(0.0, 1.0), v0: 1.0, v1: 1.0, v_inf: 1.0 }).unwrap();
        let r = trinoid_monodromy_report(&p, &OdeOptions::default(), 8, 1e-6).unwrap();
        assert!(r.closing.closes_q2, "{r:?}");
        for (_, d) in &r.product_defects {
            assert!(*d < 1e-8, "{r:?}");
        }
        assert!(r.unitarized_unitarity < 1e-6, "{r:?}");
    }
}
