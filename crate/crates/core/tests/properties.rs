use mlq::frames::{
    hermitian, projective_distance, psi_so4, q2_point, quaternion, s3_pair, sphere_pair, xy_matrices,
    FramePointPair,
};
use mlq::iwasawa::{iwasawa, qr2, IwasawaOptions};
use mlq::loops::{loop_eval, loop_mul, loop_star, LaurentLoop, Mat2C, Window};
use mlq::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cplx() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c(a, b))
}

fn mat() -> impl Strategy<Value = Mat2C> {
    (cplx(), cplx(), cplx(), cplx()).prop_map(|(a, b, d, e)| Mat2C::new(a, b, d, e))
}

/// Unit quaternion [[a, b], [−b̄, ā]].
fn su2() -> impl Strategy<Value = Mat2C> {
    prop::array::uniform4(-1.0..1.0f64)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        .prop_map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let a = c(v[0] / n, v[1] / n);
            let b = c(v[2] / n, v[3] / n);
            Mat2C::new(a, b, -b.conj(), a.conj())
        })
}

fn unit_lambda() -> impl Strategy<Value = Complex64> {
    (0.0..std::f64::consts::TAU).prop_map(|t| Complex64::from_polar(1.0, t))
}

fn laurent(lo: i32, hi: i32) -> impl Strategy<Value = LaurentLoop> {
    prop::collection::vec(mat(), (hi - lo + 1) as usize).prop_map(move |cs| LaurentLoop::new(lo, cs))
}

fn mat_dist(a: &Mat2C, b: &Mat2C) -> f64 {
    (*a - *b).max_abs()
}

fn matmul4(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut o = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            o[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    o
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_is_orthogonal_homomorphism(p1 in su2(), q1 in su2(), p2 in su2(), q2 in su2()) {
        let a = psi_so4(&p1, &q1).unwrap();
        let b = psi_so4(&p2, &q2).unwrap();
        let ab = psi_so4(&(p1 * p2), &(q1 * q2)).unwrap();
        let prod = matmul4(&a, &b);
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((prod[i][j] - ab[i][j]).abs() < 1e-12);
                let gram: f64 = (0..4).map(|k| a[k][i] * a[k][j]).sum();
                let delta = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram - delta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psi_acts_by_left_right_multiplication(p in su2(), q in su2(), x in su2()) {
        // ψ(p, q)·x = p·x·q⁻¹ on quaternion coordinates.
        let m = psi_so4(&p, &q).unwrap();
        let xv = quaternion(&x);
        let lhs: Vec<f64> = (0..4).map(|i| (0..4).map(|k| m[i][k] * xv[k]).sum()).collect();
        let rhs = quaternion(&(p * x * q.dagger()));
        for i in 0..4 {
            prop_assert!((lhs[i] - rhs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn loop_mul_is_associative(a in laurent(-2, 1), b in laurent(-1, 2), d in laurent(0, 2)) {
        let w = Window::new(-8, 8);
        let l = loop_mul(&loop_mul(&a, &b, w), &d, w);
        let r = loop_mul(&a, &loop_mul(&b, &d, w), w);
        prop_assert!(l.max_coeff_diff(&r) < 1e-12);
    }

    #[test]
    fn loop_eval_is_multiplicative(a in laurent(-2, 2), b in laurent(-1, 3), lam in unit_lambda()) {
        let ab = loop_mul(&a, &b, Window::new(-8, 8));
        let lhs = loop_eval(&ab, lam).unwrap();
        let rhs = loop_eval(&a, lam).unwrap() * loop_eval(&b, lam).unwrap();
        prop_assert!(mat_dist(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn loop_star_reverses_products(a in laurent(-2, 1), b in laurent(-1, 2), lam in unit_lambda()) {
        let w = Window::new(-8, 8);
        let lhs = loop_star(&loop_mul(&a, &b, w));
        let rhs = loop_mul(&loop_star(&b), &loop_star(&a), w);
        prop_assert!(lhs.max_coeff_diff(&rhs) < 1e-12);
        // On the unit circle the star is the pointwise adjoint.
        let v = loop_eval(&loop_star(&a), lam).unwrap();
        prop_assert!(mat_dist(&v, &loop_eval(&a, lam).unwrap().dagger()) < 1e-12);
    }

    #[test]
    fn qr2_splits_constant_matrices(a in mat()) {
        prop_assume!(a.det().norm() > 1e-3);
        let (q, r) = qr2(&a).unwrap();
        prop_assert!(q.unitarity_error() < 1e-12);
        prop_assert!(r.get(1, 0).norm() == 0.0 && r.get(0, 0).re > 0.0 && r.get(1, 1).re > 0.0);
        prop_assert!(r.get(0, 0).im == 0.0 && r.get(1, 1).im == 0.0);
        prop_assert!(mat_dist(&(q * r), &a) < 1e-12);
    }

    #[test]
    fn iwasawa_of_constant_loop_is_qr(a in mat(), lam in unit_lambda()) {
        prop_assume!(a.det().norm() > 1e-2);
        let res = iwasawa(&LaurentLoop::constant(a), Window::symmetric(4), &IwasawaOptions::default()).unwrap();
        let (q, r) = qr2(&a).unwrap();
        prop_assert!(mat_dist(&res.frame_at(lam).unwrap(), &q) < 1e-9);
        prop_assert!(mat_dist(&loop_eval(&res.b, lam).unwrap(), &r) < 1e-9);
    }

    #[test]
    fn q2_point_lies_on_quadric(f1 in su2(), f2 in su2(), lam in unit_lambda()) {
        let fp = FramePointPair::new(f1, f2, lam).unwrap();
        let (x, y) = xy_matrices(&fp);
        let v = q2_point(&x, &y);
        let quad: Complex64 = v.iter().map(|z| z * z).sum();
        prop_assert!(quad.norm() < 1e-12);
        prop_assert!((hermitian(&v, &v).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn s3_pair_is_orthonormal(f1 in su2(), f2 in su2(), lam in unit_lambda()) {
        let (f, n) = s3_pair(&FramePointPair::new(f1, f2, lam).unwrap());
        let dot: f64 = f.iter().zip(&n).map(|(a, b)| a * b).sum();
        prop_assert!(dot.abs() < 1e-12);
        prop_assert!((f.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((n.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_pair_ignores_diagonal_gauge(f1 in su2(), f2 in su2(), t1 in 0.0..6.3f64, t2 in 0.0..6.3f64) {
        let lam = c(1.0, 0.0);
        let g = |t: f64| Mat2C::diag(Complex64::from_polar(1.0, t), Complex64::from_polar(1.0, -t));
        let (a, b) = sphere_pair(&FramePointPair::new(f1, f2, lam).unwrap());
        let (a2, b2) = sphere_pair(&FramePointPair::new(f1 * g(t1), f2 * g(t2), lam).unwrap());
        for k in 0..3 {
            prop_assert!((a[k] - a2[k]).abs() < 1e-12 && (b[k] - b2[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn projective_distance_ignores_scale(
        v in prop::array::uniform4(cplx()),
        w in prop::array::uniform4(cplx()),
        s in cplx(),
    ) {
        prop_assume!(s.norm() > 1e-2);
        prop_assume!(hermitian(&v, &v).re > 1e-3 && hermitian(&w, &w).re > 1e-3);
        let d = projective_distance(&v, &w);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((projective_distance(&v, &w.map(|x| x * s)) - d).abs() < 1e-9);
        prop_assert!(projective_distance(&v, &v.map(|x| x * s)) < 1e-7);
    }
}
