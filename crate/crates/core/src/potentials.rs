//! Holomorphic potential families ξ(z)·dz as loop-valued coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::loops::{twist_check, LaurentLoop, Mat2C};
use crate::{Error, Result};

/// One term M·r(z)·λ^d of a custom potential, with r = numerator/denominator
/// given by ascending polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomTerm {
    pub matrix: Mat2C,
    pub lambda_degree: i32,
    pub numerator: Vec<Complex64>,
    #[serde(default = "one_poly")]
    pub denominator: Vec<Complex64>,
}

fn one_poly() -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialSpec {
    Sphere,
    Torus,
    Equivariant {
        a: f64,
        b: f64,
        #[serde(default)]
        c: f64,
    },
    Radial {
        c: Complex64,
        k: u32,
    },
    Trinoid {
        lambda0: Complex64,
        v0: f64,
        v1: f64,
        v_inf: f64,
    },
    Custom {
        terms: Vec<CustomTerm>,
        #[serde(default)]
        poles: Vec<Complex64>,
        base_point: Complex64,
    },
}

impl PotentialSpec {
    pub fn family(&self) -> &'static str {
        match self {
            PotentialSpec::Sphere => "sphere",
            PotentialSpec::Torus => "torus",
            PotentialSpec::Equivariant { .. } => "equivariant",
            PotentialSpec::Radial { .. } => "radial",
            PotentialSpec::Trinoid { .. } => "trinoid",
            PotentialSpec::Custom { .. } => "custom",
        }
    }
}

/// A validated potential with its singular set and integration base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub spec: PotentialSpec,
    pub singular_points: Vec<Complex64>,
    /// The trinoid's third puncture at ∞ (symbolic only).
    pub singular_at_infinity: bool,
    pub base_point: Complex64,
    /// Whether ξ lies in the twisted loop algebra.
    pub twisted: bool,
}

fn poly(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

const POLE_EPS: f64 = 1e-12;

pub fn make_potential(spec: PotentialSpec) -> Result<Potential> {
    let finite = |x: f64, name: &str| {
        if x.is_finite() {
            Ok(())
        } else {
            Err(Error::Validation(format!("{name} must be finite")))
        }
    };
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let (singular, at_inf, base, twisted) = match &spec {
        PotentialSpec::Sphere | PotentialSpec::Torus => (vec![], false, zero, true),
        PotentialSpec::Equivariant { a, b, c } => {
            finite(*a, "a")?;
            finite(*b, "b")?;
            finite(*c, "c")?;
            (vec![zero], false, one, true)
        }
        PotentialSpec::Radial { c, k } => {
            if !c.is_finite() {
                return Err(Error::Validation("radial c must be finite".into()));
            }
            if c.norm() == 0.0 {
                return Err(Error::Validation("radial c must be nonzero".into()));
            }
            if (c.norm() - 1.0).abs() <= 1e-12 {
                return Err(Error::Validation("radial c must not lie on the unit circle".into()));
            }
            if *k < 1 {
                return Err(Error::Validation("radial k must be at least 1".into()));
            }
            (vec![], false, zero, true)
        }
        PotentialSpec::Trinoid { lambda0, v0, v1, v_inf } => {
            let i = Complex64::i();
            if (*lambda0 - i).norm() > 1e-12 && (*lambda0 + i).norm() > 1e-12 {
                return Err(Error::Validation("trinoid lambda0 must be +i or -i".into()));
            }
            for (v, n) in [(v0, "v0"), (v1, "v1"), (v_inf, "v_inf")] {
                finite(*v, n)?;
                if *v == 0.0 {
                    return Err(Error::Validation(format!("trinoid {n} must be nonzero")));
                }
            }
            (vec![zero, one], true, Complex64::new(0.5, 0.0), false)
        }
        PotentialSpec::Custom { terms, poles, base_point } => {
            if !base_point.is_finite() {
                return Err(Error::Validation("custom base_point must be finite".into()));
            }
            for t in terms {
                if t.denominator.iter().all(|c| c.norm() == 0.0) {
                    return Err(Error::Validation("custom denominator is identically zero".into()));
                }
                if !t.matrix.is_finite() {
                    return Err(Error::Validation("custom matrix must be finite".into()));
                }
            }
            if poles.iter().any(|p| (*p - *base_point).norm() <= POLE_EPS) {
                return Err(Error::Validation("custom base_point coincides with a declared pole".into()));
            }
            let mut p = Potential {
                spec: spec.clone(),
                singular_points: poles.clone(),
                singular_at_infinity: false,
                base_point: *base_point,
                twisted: true,
            };
            let xi = p.eval_xi(*base_point)?;
            p.twisted = twist_check(&xi).is_twisted(0.0);
            return Ok(p);
        }
    };
    Ok(Potential { spec, singular_points: singular, singular_at_infinity: at_inf, base_point: base, twisted })
}

impl Potential {
    /// Distance from z to the nearest finite singular point (∞ if none).
    pub fn distance_to_singular(&self, z: Complex64) -> f64 {
        self.singular_points.iter().map(|s| (z - s).norm()).fold(f64::INFINITY, f64::min)
    }

    fn check_pole(&self, z: Complex64) -> Result<()> {
        if !z.is_finite() || self.distance_to_singular(z) <= POLE_EPS {
            return Err(Error::Pole { z });
        }
        Ok(())
    }

    /// Terms (λ-degree, coefficient) of ξ at z.
    pub fn xi_terms(&self, z: Complex64) -> Result<Vec<(i32, Mat2C)>> {
        self.check_pole(z)?;
        let e12 = Mat2C::unit(0, 1);
        let e21 = Mat2C::unit(1, 0);
        let t = match &self.spec {
            PotentialSpec::Sphere => vec![(-1, e12)],
            PotentialSpec::Torus => vec![(-1, e12 + e21)],
            PotentialSpec::Equivariant { a, b, c } => {
                let r = z.inv();
                vec![
                    (-1, Mat2C::from_real(0.0, *a, *b, 0.0).scale(r)),
                    (0, Mat2C::from_real(*c, 0.0, 0.0, -*c).scale(r)),
                    (1, Mat2C::from_real(0.0, *b, *a, 0.0).scale(r)),
                ]
            }
            PotentialSpec::Radial { c, k } => {
                vec![(-1, e12 + e21.scale(*c * z.powu(*k)))]
            }
            PotentialSpec::Trinoid { lambda0, .. } => {
                let q = self.trinoid_q(z);
                // λ·h(λ) = λ² − (λ₀ + λ₀⁻¹)λ + 1
                let s = *lambda0 + lambda0.inv();
                vec![(-1, e12), (0, e21.scale(q)), (1, e21.scale(-s * q)), (2, e21.scale(q))]
            }
            PotentialSpec::Custom { terms, .. } => {
                let mut out = Vec::with_capacity(terms.len());
                for t in terms {
                    let den = poly(&t.denominator, z);
                    if den.norm() <= 1e-300 {
                        return Err(Error::Pole { z });
                    }
                    out.push((t.lambda_degree, t.matrix.scale(poly(&t.numerator, z) / den)));
                }
                out
            }
        };
        Ok(t)
    }

    /// q(z) = Q/dz² of the trinoid family; zero for other families.
    pub fn trinoid_q(&self, z: Complex64) -> Complex64 {
        match &self.spec {
            PotentialSpec::Trinoid { v0, v1, v_inf, .. } => {
                let num = z * z * *v_inf + z * (v1 - v0 - v_inf) + *v0;
                let zm1 = z - 1.0;
                num / (z * z * zm1 * zm1 * 16.0)
            }
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Matrix coefficient of ξ at z (the 1-form is this times dz).
    pub fn eval_xi(&self, z: Complex64) -> Result<LaurentLoop> {
        Ok(LaurentLoop::from_terms(&self.xi_terms(z)?))
    }

    /// ξ(z) evaluated at a fixed spectral value λ.
    pub fn xi_at_lambda(&self, z: Complex64, lambda: Complex64) -> Result<Mat2C> {
        let mut m = Mat2C::zero();
        for (k, c) in self.xi_terms(z)? {
            m += c.scale(lambda.powi(k));
        }
        Ok(m)
    }

    /// Lowest and highest λ-degree ξ can carry.
    pub fn degree_range(&self) -> (i32, i32) {
        match &self.spec {
            PotentialSpec::Sphere | PotentialSpec::Torus | PotentialSpec::Radial { .. } => (-1, -1),
            PotentialSpec::Equivariant { .. } => (-1, 1),
            PotentialSpec::Trinoid { .. } => (-1, 2),
            PotentialSpec::Custom { terms, .. } => {
                let lo = terms.iter().map(|t| t.lambda_degree).min().unwrap_or(0);
                let hi = terms.iter().map(|t| t.lambda_degree).max().unwrap_or(0);
                (lo, hi)
            }
        }
    }

    /// D(λ) of the equivariant family; `None` for other families.
    pub fn equivariant_d(&self, lambda: Complex64) -> Option<Mat2C> {
        match &self.spec {
            PotentialSpec::Equivariant { .. } => {
                let one = Complex64::new(1.0, 0.0);
                self.xi_at_lambda(one, lambda).ok()
            }
            _ => None,
        }
    }

    /// λ-value of the second frame of the pair. In the twisted picture this
    /// is −iλ₀; untwisted families use −λ₀ (the image of −iλ₀ under the
    /// twisted/untwisted isomorphism).
    pub fn partner_lambda(&self, lambda0: Complex64) -> Complex64 {
        if self.twisted {
            -Complex64::i() * lambda0
        } else {
            -lambda0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::loop_eval;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn singular_sets() {
        assert!(make_potential(PotentialSpec::Sphere).unwrap().singular_points.is_empty());
        let e = make_potential(PotentialSpec::Equivariant { a: 0.75, b: 0.25, c: 0.0 }).unwrap();
        assert_eq!(e.singular_points, vec![c(0.0, 0.0)]);
        let t = make_potential(PotentialSpec::Trinoid { lambda0: Complex64::i(), v0: 1.0, v1: 1.0, v_inf: 1.0 })
            .unwrap();
        assert!(t.singular_points.contains(&c(0.0, 0.0)) && t.singular_points.contains(&c(1.0, 0.0)));
        assert!(t.singular_at_infinity && !t.twisted);
    }

    #[test]
    fn validation_errors() {
        let bad = [
            PotentialSpec::Trinoid { lambda0: c(1.0, 0.0), v0: 1.0, v1: 1.0, v_inf: 1.0 },
            PotentialSpec::Trinoid { lambda0: Complex64::i(), v0: 0.0, v1: 1.0, v_inf: 1.0 },
            PotentialSpec::Radial { c: c(0.6, 0.8), k: 1 },
            PotentialSpec::Radial { c: c(0.0, 0.0), k: 1 },
            PotentialSpec::Radial { c: c(0.5, 0.0), k: 0 },
        ];
        for s in bad {
            assert!(matches!(make_potential(s), Err(Error::Validation(_))));
        }
    }

    #[test]
    fn xi_examples() {
        let s = make_potential(PotentialSpec::Sphere).unwrap();
        let x = s.eval_xi(c(3.0, -2.0)).unwrap();
        assert_eq!(x.coeff(-1), Mat2C::unit(0, 1));
        assert_eq!(x.coeff(0), Mat2C::zero());

        let e = make_potential(PotentialSpec::Equivariant { a: 0.75, b: 0.25, c: 0.0 }).unwrap();
        let x = e.eval_xi(c(1.0, 0.0)).unwrap();
        assert_eq!(x.coeff(-1), Mat2C::from_real(0.0, 0.75, 0.25, 0.0));
        assert_eq!(x.coeff(1), Mat2C::from_real(0.0, 0.25, 0.75, 0.0));
        assert!(matches!(e.eval_xi(c(0.0, 0.0)), Err(Error::Pole { .. })));

        let t = make_potential(PotentialSpec::Trinoid { lambda0: Complex64::i(), v0: 1.0, v1: 1.0, v_inf: 1.0 })
            .unwrap();
        for lam in [c(0.3, 0.8), c(-1.0, 0.2)] {
            let m = t.xi_at_lambda(c(2.0, 0.0), lam).unwrap();
            let want = (lam * lam + 1.0) * (3.0 / 64.0);
            assert!((m.get(1, 0) - want).norm() < 1e-15);
            assert!((m.get(0, 1) - lam.inv()).norm() < 1e-15);
        }
    }

    #[test]
    fn twist_parity_by_family() {
        let z = c(0.4, 0.3);
        for s in [
            PotentialSpec::Sphere,
            PotentialSpec::Torus,
            PotentialSpec::Equivariant { a: 1.0, b: 0.5, c: 0.3 },
            PotentialSpec::Radial { c: c(0.5, 0.0), k: 2 },
        ] {
            let p = make_potential(s).unwrap();
            assert!(twist_check(&p.eval_xi(z).unwrap()).is_twisted(0.0));
        }
        let t = make_potential(PotentialSpec::Trinoid { lambda0: Complex64::i(), v0: 1.0, v1: 1.0, v_inf: 1.0 })
            .unwrap();
        assert!(twist_check(&t.eval_xi(z).unwrap()).max_even_offdiag > 0.0);
    }

    #[test]
    fn holomorphic_in_z() {
        let h = 1e-5;
        let z = c(0.7, -0.4);
        for s in [
            PotentialSpec::Equivariant { a: 1.0, b: 0.5, c: 0.3 },
            PotentialSpec::Radial { c: c(0.5, 0.2), k: 3 },
            PotentialSpec::Trinoid { lambda0: Complex64::i(), v0: 1.0, v1: 2.0, v_inf: -1.0 },
        ] {
            let p = make_potential(s).unwrap();
            let lam = c(0.6, 0.8);
            let f = |w: Complex64| p.xi_at_lambda(w, lam).unwrap();
            let dx = (f(z + h) - f(z - h)).scale_re(0.5 / h);
            let dy = (f(z + c(0.0, h)) - f(z - c(0.0, h))).scale_re(0.5 / h);
            let dzb = (dx + dy.scale(Complex64::i())).scale_re(0.5);
            assert!(dzb.max_abs() < 1e-8);
            let via_loop = loop_eval(&p.eval_xi(z).unwrap(), lam).unwrap();
            assert!((via_loop - f(z)).max_abs() < 1e-14);
        }
    }

    #[test]
    fn equivariant_simple_pole() {
        let p = make_potential(PotentialSpec::Equivariant { a: 1.0, b: 0.5, c: 0.3 }).unwrap();
        let lam = c(0.0, 1.0);
        let z = c(1e-9, 1e-9);
        let m = p.xi_at_lambda(z, lam).unwrap().scale(z);
        assert!((m - p.equivariant_d(lam).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn custom_roundtrip_json() {
        let spec = PotentialSpec::Custom {
            terms: vec![CustomTerm {
                matrix: Mat2C::unit(0, 1),
                lambda_degree: -1,
                numerator: vec![c(0.0, 0.0), c(1.0, 0.0)],
                denominator: vec![c(-2.0, 0.0), c(1.0, 0.0)],
            }],
            poles: vec![c(2.0, 0.0)],
            base_point: c(0.0, 0.0),
        };
        let s = serde_json::to_string(&spec).unwrap();
        let back: PotentialSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let p = make_potential(back).unwrap();
        assert!(p.twisted);
        let x = p.xi_at_lambda(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!((x.get(0, 1) + 1.0).norm() < 1e-15);
    }
}
