use num_complex::Complex64;
use proptest::prelude::*;

use dirichlet_zeros::dirichlet::{DivisorTable, SpaceWeight};
use dirichlet_zeros::laplace::{
    build_h2_coefficients, build_weighted_grid, defect_bound_check_h2, DefectFunction, FastDefect, GridFunction,
};

// 10-point Gauss-Legendre on [-1, 1]
const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// `int phi(xi) e^{-(s-1/2) xi} dxi` by composite Gauss-Legendre per cell.
fn laplace_by_quadrature(phi: &GridFunction, s: Complex64) -> Complex64 {
    let z = s - 0.5;
    let mut total = Complex64::new(0.0, 0.0);
    for (a, b, v) in phi.cells() {
        let pieces = ((b - a) / 0.02).ceil().max(1.0) as usize;
        let w = (b - a) / pieces as f64;
        for k in 0..pieces {
            let mid = a + (k as f64 + 0.5) * w;
            for (x, g) in GL_X.iter().zip(GL_W) {
                for sign in [-1.0, 1.0] {
                    let xi = mid + sign * x * w / 2.0;
                    total += v * (-z * xi).exp() * g * w / 2.0;
                }
            }
        }
    }
    total
}

fn grid_strategy(max_cells: usize, max_span: f64) -> impl Strategy<Value = (usize, GridFunction)> {
    (
        prop::sample::select(vec![1usize, 2, 4, 8, 16]),
        0.0f64..0.5,
        prop::collection::vec((0.01f64..1.0, -2.0f64..2.0, -2.0f64..2.0), 1..max_cells),
    )
        .prop_map(move |(n, offset, cells)| {
            let total: f64 = cells.iter().map(|c| c.0).sum();
            let scale = if total > max_span { max_span / total } else { 1.0 };
            let mut bps = vec![(n as f64).ln() + offset];
            let mut vals = Vec::new();
            for (w, re, im) in cells {
                bps.push(bps.last().unwrap() + w * scale);
                vals.push(Complex64::new(re, im));
            }
            (n, GridFunction::new(bps, vals).unwrap())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn coefficient_map_is_a_contraction((n, phi) in grid_strategy(30, 4.0)) {
        let f = build_h2_coefficients(&phi, n).unwrap();
        prop_assert!(f.norm_h2() <= phi.norm_l2() * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn defect_matches_numerical_quadrature(
        (n, phi) in grid_strategy(12, 3.0),
        pts in prop::collection::vec((0.6f64..3.0, -30.0f64..30.0), 50),
    ) {
        let f = build_h2_coefficients(&phi, n).unwrap();
        let exact = DefectFunction::new(&phi, &f);
        let fast = FastDefect::new(&phi, &f);
        for (sigma, t) in pts {
            let s = Complex64::new(sigma, t);
            let oracle = laplace_by_quadrature(&phi, s) - f.evaluate(s);
            prop_assert!((exact.eval(s) - oracle).norm() <= 1e-8, "at {}", s);
            prop_assert!((fast.eval(s) - oracle).norm() <= 1e-8, "fast at {}", s);
        }
    }

    #[test]
    fn defect_bound_holds(
        (n, phi) in grid_strategy(20, 5.0),
        pts in prop::collection::vec((0.5f64..3.0, -30.0f64..30.0), 50),
    ) {
        let f = build_h2_coefficients(&phi, n).unwrap();
        let samples: Vec<Complex64> = pts.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        prop_assert!(defect_bound_check_h2(&phi, n, &f, &samples).is_ok());
    }

    #[test]
    fn weighted_grid_is_monotone_and_closes(
        alpha in prop::sample::select(vec![0.3, 0.5, 1.0, 2.0, f64::INFINITY]),
        gamma in 0.55f64..0.95,
        n in 2usize..64,
        xi_max in 4.0f64..7.0,
    ) {
        let weight = if alpha.is_finite() { SpaceWeight::Finite(alpha) } else { SpaceWeight::Infinite };
        let divisors = DivisorTable::sieve(200_000);
        let grid = match build_weighted_grid(weight, gamma, n, xi_max, &divisors) {
            Ok(g) => g,
            // only a too-small divisor table is acceptable here
            Err(e) => return Err(TestCaseError::reject(e.to_string())),
        };
        prop_assert!(grid.nodes().windows(2).all(|w| w[0] <= w[1]));
        for b in grid.blocks() {
            prop_assert!(grid.node(b.end) - grid.node(b.first) > 0.0);
        }
        if alpha.is_finite() {
            prop_assert!(grid.nodes().windows(2).all(|w| w[0] < w[1]));
        }
        prop_assert!(grid.max_closure_error() <= 1e-12);
    }
}

#[test]
fn unit_density_on_two_cells() {
    let phi = GridFunction::constant(2f64.ln(), 4f64.ln(), Complex64::new(1.0, 0.0)).unwrap();
    let f = build_h2_coefficients(&phi, 2).unwrap();
    assert!((f.coeff(2).re - 2f64.sqrt() * 1.5f64.ln()).abs() < 1e-14);
    assert!((f.coeff(3).re - 3f64.sqrt() * (4.0f64 / 3.0).ln()).abs() < 1e-14);
    assert_eq!(f.max_index(), 3);
    let s = Complex64::new(1.5, 0.0);
    let hand = 0.25 - 1.5f64.ln() / 2.0 - (4.0f64 / 3.0).ln() / 3.0;
    assert!((DefectFunction::new(&phi, &f).eval(s).re - hand).abs() < 1e-14);
}
