use num_complex::Complex64;
use proptest::prelude::*;

use dirichlet_zeros::dbar::Rect;
use dirichlet_zeros::dirichlet::DirichletPolynomial;
use dirichlet_zeros::verifier::{count_zeros, count_zeros_in_box, find_zeros, vertical_repetition_scan, Contour};
use dirichlet_zeros::Error;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn quadrants(r: Rect, sm: f64, tm: f64) -> [Rect; 4] {
    [
        Rect::new(r.sigma0, sm, r.t0, tm).unwrap(),
        Rect::new(sm, r.sigma1, r.t0, tm).unwrap(),
        Rect::new(r.sigma0, sm, tm, r.t1).unwrap(),
        Rect::new(sm, r.sigma1, tm, r.t1).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn polynomial_roots_are_counted(
        roots in prop::collection::vec((0.0f64..3.0, -2.0f64..2.0), 0..6),
    ) {
        let rs: Vec<Complex64> = roots.iter().map(|&(a, b)| c(a, b)).collect();
        let f = |s: Complex64| rs.iter().map(|r| s - r).product::<Complex64>();
        let rect = Rect::new(0.6, 2.5, -1.0, 1.0).unwrap();
        let near_edge = rs.iter().any(|r| rect.distance(*r) < 1e-3 && !rect.contains(*r)
            || rect.contains(*r) && [r.re - 0.6, 2.5 - r.re, r.im + 1.0, 1.0 - r.im].iter().any(|d| *d < 1e-3));
        prop_assume!(!near_edge);
        let expected = rs.iter().filter(|r| rect.contains(**r)).count() as i64;
        let got = count_zeros_in_box(f, rect, 1e-12).unwrap();
        prop_assert_eq!(got.count, expected);
        prop_assert!((got.winding - got.winding.round()).abs() <= 1e-3);
    }

    #[test]
    fn counts_add_over_quadrants(
        coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..8),
        s0 in 0.6f64..1.5, t0 in -20.0f64..20.0, w in 0.3f64..2.0, h in 1.0f64..8.0,
        us in 0.2f64..0.8, ut in 0.2f64..0.8,
    ) {
        let mut a: Vec<Complex64> = coeffs.iter().map(|&(x, y)| c(x, y)).collect();
        a[0] = c(1.0, 0.0);
        let f = DirichletPolynomial::new(1, a);
        let eval = |s: Complex64| f.evaluate(s);
        let rect = Rect::new(s0, s0 + w, t0, t0 + h).unwrap();
        let tol = 1e-6;
        let whole = match count_zeros_in_box(eval, rect, tol) {
            Ok(v) => v,
            Err(Error::BoundaryTooClose { .. }) => return Err(TestCaseError::reject("boundary")),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!((whole.winding - whole.winding.round()).abs() <= 1e-3);
        let mut total = 0;
        for q in quadrants(rect, s0 + us * w, t0 + ut * h) {
            match count_zeros_in_box(eval, q, tol) {
                Ok(v) => total += v.count,
                Err(Error::BoundaryTooClose { .. }) => return Err(TestCaseError::reject("cut")),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
        prop_assert_eq!(total, whole.count);
    }
}

#[test]
fn eta_like_zero_at_one() {
    let f = |s: Complex64| 1.0 - (c(1.0, 0.0) - s).exp2();
    let rect = Rect::new(0.9, 1.1, -1.0, 1.0).unwrap();
    assert_eq!(count_zeros_in_box(f, rect, 1e-12).unwrap().count, 1);
    let zeros = find_zeros(f, rect, 1e-12, 1e-6).unwrap();
    assert_eq!(zeros.len(), 1);
    assert!((zeros[0].sigma - 1.0).abs() < 1e-5 && zeros[0].t.abs() < 1e-5);
}

#[test]
fn circle_contour_counts_multiplicity() {
    let f = |s: Complex64| (s - c(1.0, 0.5)).powu(3) * (s - c(3.0, 0.0));
    let n = count_zeros(f, Contour::circle(c(1.0, 0.5), 0.5).unwrap(), 1e-12).unwrap();
    assert_eq!(n.count, 3);
}

#[test]
fn boundary_zero_is_refused() {
    let f = |s: Complex64| s - c(1.0, 0.0);
    let rect = Rect::new(1.0, 2.0, -1.0, 1.0).unwrap();
    assert!(matches!(count_zeros_in_box(f, rect, 1e-8), Err(Error::BoundaryTooClose { .. })));
}

#[test]
fn lattice_repetitions_are_found() {
    let f = DirichletPolynomial::from_real_sparse(&[(1, 1.0), (2, -2.0)]).unwrap();
    let period = 2.0 * std::f64::consts::PI / 2f64.ln();
    let hits = vertical_repetition_scan(&f, c(1.0, 0.0), (-30.0, 30.0), 1e-6).unwrap();
    for k in [-3i32, -2, -1, 1, 2, 3] {
        let want = k as f64 * period;
        assert!(hits.iter().any(|h| (h.offset - want).abs() < 1e-5), "missing {want}");
    }
    let mono = DirichletPolynomial::from_real_sparse(&[(3, 2.0)]).unwrap();
    assert!(vertical_repetition_scan(&mono, c(1.0, 0.0), (-100.0, 100.0), 1e-2).unwrap().is_empty());
}
