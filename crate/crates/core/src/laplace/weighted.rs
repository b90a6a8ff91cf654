use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{DirichletPolynomial, DivisorTable, SpaceWeight};
use crate::error::{Error, Result};
use crate::geometry::StripRegion;
use crate::sum::Accumulator;

use super::{FastDefect, GridFunction};

/// One block `[first, end)` of the divisor-weighted grid, closing from
/// `xi_start` to the anchor `xi_end = (j+1)^gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBlock {
    pub j: u64,
    pub first: usize,
    pub end: usize,
    pub xi_start: f64,
    pub xi_end: f64,
    /// `sum_{first <= n < end} d(n)^{-alpha}`.
    pub weight_sum: f64,
    /// The normaliser `A_j` making the increments close the block.
    pub normalizer: f64,
}

/// Nodes `xi_n`, `n >= N`, with increments proportional to `d(n)^{-alpha}`
/// inside each block and block ends pinned to `j^gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedGrid {
    pub weight: SpaceWeight,
    pub gamma: f64,
    start: usize,
    nodes: Vec<f64>,
    blocks: Vec<GridBlock>,
}

fn anchor_index(j: u64, gamma: f64) -> usize {
    (j as f64).powf(gamma).exp().ceil() as usize
}

impl WeightedGrid {
    pub fn start(&self) -> usize {
        self.start
    }

    /// One past the last coefficient index: nodes run over `start..=end`.
    pub fn end(&self) -> usize {
        self.start + self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> f64 {
        self.nodes[n - self.start]
    }

    pub fn blocks(&self) -> &[GridBlock] {
        &self.blocks
    }

    pub fn xi_range(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    /// Largest relative closure error `|sum increments - block width| / width`.
    pub fn max_closure_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            let mut acc = Accumulator::new();
            for n in b.first..b.end {
                acc.add(self.node(n + 1) - self.node(n));
            }
            let width = b.xi_end - b.xi_start;
            worst = worst.max((acc.value() - width).abs() / width);
        }
        worst
    }
}

/// `d(n)^{-alpha}`; for `alpha = inf`, 1 on 1 and the primes and 0 elsewhere.
fn node_weight(weight: SpaceWeight, d: u32) -> f64 {
    weight.inverse_weight(d)
}

/// Builds the weighted grid covering `[log N, xi_max]`.
///
/// The first anchor is the least `j` with `ceil(e^{j^gamma}) > N`; the
/// partial block from `N` closes at that anchor. Blocks carrying no weight
/// (possible only for `alpha = inf`) are merged into the next one.
pub fn build_weighted_grid(
    weight: SpaceWeight,
    gamma: f64,
    n_start: usize,
    xi_max: f64,
    divisors: &DivisorTable,
) -> Result<WeightedGrid> {
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    if n_start < 1 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let log_n = (n_start as f64).ln();
    let mut j = 1u64;
    while anchor_index(j, gamma) <= n_start {
        j += 1;
    }
    let beta = weight.beta();
    let mut nodes = vec![log_n];
    let mut blocks = Vec::new();
    let mut first = n_start;
    let mut xi_start = log_n;
    let mut block_j = j - 1;
    loop {
        let end = anchor_index(j, gamma);
        let xi_end = (j as f64).powf(gamma);
        if end > divisors.max_index() + 1 {
            return Err(Error::invalid(format!(
                "divisor table covers n <= {}, grid needs {}",
                divisors.max_index(),
                end - 1
            )));
        }
        let weights: Vec<f64> = (first..end)
            .map(|n| node_weight(weight, divisors.get(n)))
            .collect();
        let mut total = Accumulator::new();
        for &w in &weights {
            total.add(w);
        }
        let weight_sum = total.value();
        if weight_sum > 0.0 && end > first {
            let width = xi_end - xi_start;
            let mut cum = Accumulator::new();
            for &w in &weights[..weights.len() - 1] {
                cum.add(w);
                nodes.push(xi_start + width * (cum.value() / weight_sum));
            }
            nodes.push(xi_end);
            let jf = block_j.max(1) as f64;
            let shape = (-jf.powf(gamma)).exp() * jf.powf(gamma * beta);
            blocks.push(GridBlock {
                j: block_j,
                first,
                end,
                xi_start,
                xi_end,
                weight_sum,
                normalizer: width / (weight_sum * shape),
            });
            first = end;
            xi_start = xi_end;
            block_j = j;
            if xi_end >= xi_max {
                break;
            }
        }
        j += 1;
    }
    Ok(WeightedGrid {
        weight,
        gamma,
        start: n_start,
        nodes,
        blocks,
    })
}

/// `a_n = sqrt(n) int_{xi_n}^{xi_{n+1}} phi` over the grid nodes.
pub fn build_dalpha_coefficients(
    phi: &GridFunction,
    grid: &WeightedGrid,
) -> Result<DirichletPolynomial> {
    let (g0, g1) = grid.xi_range();
    if let Some((p0, p1)) = phi.support() {
        let tol = 1e-12 * g1.abs().max(1.0);
        if p0 < g0 - tol || p1 > g1 + tol {
            return Err(Error::GridMismatch {
                phi_start: p0,
                phi_end: p1,
                grid_start: g0,
                grid_end: g1,
            });
        }
    } else {
        return Ok(DirichletPolynomial::zero());
    }
    let integrals = phi.node_integrals(grid.nodes(), None);
    let coeffs = integrals
        .into_iter()
        .enumerate()
        .map(|(k, w)| w * ((grid.start() + k) as f64).sqrt())
        .collect();
    Ok(DirichletPolynomial::new(grid.start(), coeffs))
}

/// `eta = (2 - gamma (2 + 2^{-alpha}))/gamma` and `nu = 2/gamma - 2`.
pub fn defect_exponents(weight: SpaceWeight, gamma: f64) -> (f64, f64) {
    let eta = (2.0 - gamma * (2.0 + weight.two_pow_neg_alpha())) / gamma;
    let nu = 2.0 / gamma - 2.0;
    (eta, nu)
}

/// Fails with `GammaTooLarge` unless `eta > 1/2` and `nu > 1`.
pub fn check_exponents(weight: SpaceWeight, gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    let (eta, nu) = defect_exponents(weight, gamma);
    if !(eta > 0.5) || !(nu > 1.0) {
        return Err(Error::GammaTooLarge { gamma, eta, nu });
    }
    Ok((eta, nu))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedDefectReport {
    pub eta: f64,
    pub nu: f64,
    pub phi_norm: f64,
    /// `max |Phi(s)| / (|s - 1/2| N^{1/2 - sigma} (log N)^{-eta} ||phi||_{2,beta})`.
    pub pointwise_ratio: f64,
    /// `int_K |Phi'|^2 (sigma - 1/2)^{2^{-alpha}} dm`.
    pub derivative_integral: f64,
    /// The integral over `(log N)^{-nu} ||phi||_{2,beta}^2`.
    pub derivative_ratio: f64,
}

/// Empirical constants for the pointwise and area-integral defect bounds.
pub fn weighted_defect_bounds(
    phi: &GridFunction,
    grid: &WeightedGrid,
    f: &DirichletPolynomial,
    k: StripRegion,
    samples: &[Complex64],
    quad_h: f64,
) -> Result<WeightedDefectReport> {
    let (eta, nu) = check_exponents(grid.weight, grid.gamma)?;
    let n = grid.start();
    if n < 2 {
        return Err(Error::invalid("weighted defect bounds need N >= 2"));
    }
    let beta = grid.weight.beta();
    let log_n = (n as f64).ln();
    let phi_norm = phi.norm_weighted(beta, log_n);
    let defect = FastDefect::new(phi, f);
    let mut pointwise_ratio: f64 = 0.0;
    let mut derivative_integral = 0.0;
    if phi_norm > 0.0 {
        for &s in samples {
            let z = s - 0.5;
            if z.norm() == 0.0 {
                continue;
            }
            let scale = z.norm() * (n as f64).powf(0.5 - s.re) * log_n.powf(-eta) * phi_norm;
            pointwise_ratio = pointwise_ratio.max(defect.eval(s).norm() / scale);
        }
        let ns = (k.tau / quad_h).ceil().max(1.0) as usize;
        let nt = (2.0 * k.r / quad_h).ceil().max(1.0) as usize;
        let (hs, ht) = (k.tau / ns as f64, 2.0 * k.r / nt as f64);
        let expo = grid.weight.two_pow_neg_alpha();
        let mut acc = Accumulator::new();
        for i in 0..ns {
            let sigma = 0.5 + (i as f64 + 0.5) * hs;
            let w = (sigma - 0.5).powf(expo) * hs * ht;
            for m in 0..nt {
                let t = -k.r + (m as f64 + 0.5) * ht;
                let d = defect.eval_with_derivative(Complex64::new(sigma, t)).1;
                acc.add(d.norm_sqr() * w);
            }
        }
        derivative_integral = acc.value();
    }
    let derivative_ratio = if phi_norm > 0.0 {
        derivative_integral / (log_n.powf(-nu) * phi_norm * phi_norm)
    } else {
        0.0
    };
    Ok(WeightedDefectReport {
        eta,
        nu,
        phi_norm,
        pointwise_ratio,
        derivative_integral,
        derivative_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_range() {
        let d = DivisorTable::sieve(100);
        for g in [0.5, 1.0, 0.2, f64::NAN] {
            assert!(matches!(
                build_weighted_grid(SpaceWeight::Finite(1.0), g, 4, 3.0, &d),
                Err(Error::GammaOutOfRange(_))
            ));
        }
    }

    #[test]
    fn anchors_and_closure() {
        let d = DivisorTable::sieve(200_000);
        for alpha in [0.0, 1.0, 2.5] {
            let g = build_weighted_grid(SpaceWeight::Finite(alpha), 0.6, 20, 11.0, &d).unwrap();
            assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(g.max_closure_error() < 1e-12);
            assert_eq!(g.node(20), 20f64.ln());
            for b in &g.blocks()[1..] {
                assert_eq!(g.node(b.first), (b.j as f64).powf(0.6));
                assert_eq!(b.first, (b.j as f64).powf(0.6).exp().ceil() as usize);
            }
            assert!(g.xi_range().1 >= 11.0);
            // first anchor is the least j^gamma at or above log N (with n_j > N)
            let b0 = &g.blocks()[0];
            assert!(b0.xi_end >= 20f64.ln());
            assert!(((b0.j as f64).powf(0.6)) < 20f64.ln());
        }
    }

    #[test]
    fn alpha_zero_gives_uniform_increments() {
        let d = DivisorTable::sieve(5000);
        let g = build_weighted_grid(SpaceWeight::Finite(0.0), 0.6, 10, 7.0, &d).unwrap();
        for b in g.blocks() {
            let step = (b.xi_end - b.xi_start) / (b.end - b.first) as f64;
            for n in b.first..b.end {
                let inc = g.node(n + 1) - g.node(n);
                assert!((inc - step).abs() < 1e-13, "n = {n}");
            }
        }
    }

    #[test]
    fn infinite_alpha_puts_mass_on_primes() {
        let d = DivisorTable::sieve(5000);
        let g = build_weighted_grid(SpaceWeight::Infinite, 0.6, 10, 7.0, &d).unwrap();
        for n in g.start()..g.end() {
            let inc = g.node(n + 1) - g.node(n);
            if d.get(n) > 2 {
                assert_eq!(inc, 0.0, "composite {n}");
            } else {
                assert!(inc > 0.0, "prime {n}");
            }
        }
        assert!(g.max_closure_error() < 1e-12);
    }

    #[test]
    fn single_cell_coefficient() {
        let d = DivisorTable::sieve(5000);
        let g = build_weighted_grid(SpaceWeight::Finite(1.0), 0.6, 16, 6.0, &d).unwrap();
        let n = 40;
        let (a, b) = (g.node(n), g.node(n + 1));
        let v = Complex64::new(0.3, -1.2);
        let phi = GridFunction::constant(a, b, v).unwrap();
        let f = build_dalpha_coefficients(&phi, &g).unwrap();
        for (m, c) in f.nonzero_terms() {
            assert_eq!(m, n);
            assert!((c - v * (n as f64).sqrt() * (b - a)).norm() < 1e-15);
        }
        assert_eq!(f.nonzero_terms().count(), 1);

        let zero = GridFunction::zero(g.node(16));
        assert!(build_dalpha_coefficients(&zero, &g).unwrap().is_zero());

        let outside = GridFunction::constant(1.0, 2.0, v).unwrap();
        assert!(matches!(
            build_dalpha_coefficients(&outside, &g),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn exponents() {
        let (eta, nu) = defect_exponents(SpaceWeight::Finite(1.0), 0.6);
        assert!((eta - 0.5 / 0.6).abs() < 1e-14);
        assert!((nu - (2.0 / 0.6 - 2.0)).abs() < 1e-14);
        assert!(check_exponents(SpaceWeight::Finite(1.0), 0.6).is_ok());
        assert!(matches!(
            check_exponents(SpaceWeight::Finite(0.05), 0.6),
            Err(Error::GammaTooLarge { .. })
        ));
        assert!(matches!(
            check_exponents(SpaceWeight::Finite(1.0), 0.7),
            Err(Error::GammaTooLarge { .. })
        ));
    }
}
