use num_complex::Complex64;

use crate::dirichlet::DirichletPolynomial;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const MAX_ORDER: usize = 48;
const TAIL_TOL: f64 = 1e-17;

#[derive(Clone, Debug)]
struct Cluster {
    center: f64,
    radius: f64,
    moments: Vec<Complex64>,
    first: usize,
    last: usize,
}

/// Fast multipoint evaluation of a Dirichlet polynomial.
///
/// Consecutive terms whose `log n` lie within `width` of each other are
/// grouped, and `sum_n w_n n^{-z}` over a group is expanded about the group
/// centre `c` as `e^{-z c} sum_k mu_k (-z)^k / k!` with
/// `mu_k = sum_n w_n (log n - c)^k`. Groups whose expansion would not
/// converge to rounding level fall back to direct summation.
#[derive(Clone, Debug)]
pub struct MomentEvaluator {
    clusters: Vec<Cluster>,
    log_n: Vec<f64>,
    weights: Vec<Complex64>,
}

impl MomentEvaluator {
    pub fn new(poly: &DirichletPolynomial, width: f64) -> Self {
        let mut log_n = Vec::new();
        let mut weights = Vec::new();
        for (n, a) in poly.nonzero_terms() {
            let nf = n as f64;
            log_n.push(nf.ln());
            // n^{-s} = n^{-1/2} n^{-(s - 1/2)}
            weights.push(a / nf.sqrt());
        }
        let mut clusters = Vec::new();
        let mut i = 0;
        while i < log_n.len() {
            let mut j = i;
            while j + 1 < log_n.len() && log_n[j + 1] - log_n[i] <= width {
                j += 1;
            }
            let center = 0.5 * (log_n[i] + log_n[j]);
            let radius = 0.5 * (log_n[j] - log_n[i]);
            let mut moments = vec![ZERO; MAX_ORDER + 1];
            for m in i..=j {
                let d = log_n[m] - center;
                let mut p = weights[m];
                for mu in moments.iter_mut() {
                    *mu += p;
                    p *= d;
                }
            }
            clusters.push(Cluster {
                center,
                radius,
                moments,
                first: i,
                last: j,
            });
            i = j + 1;
        }
        Self {
            clusters,
            log_n,
            weights,
        }
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// `F(s)`.
    pub fn evaluate(&self, s: Complex64) -> Complex64 {
        self.evaluate_with_derivative(s).0
    }

    /// `(F(s), F'(s))`.
    pub fn evaluate_with_derivative(&self, s: Complex64) -> (Complex64, Complex64) {
        let z = s - 0.5;
        let x = -z;
        let zabs = z.norm();
        let mut value = ZERO;
        let mut deriv = ZERO;
        for cl in &self.clusters {
            let (v, d) = match series(cl, x, zabs) {
                Some(sd) => {
                    let e = (x * cl.center).exp();
                    // d/dz [e^{-zc} S(z)] = -c e^{-zc} S - e^{-zc} S_1
                    (e * sd.0, -e * (sd.0 * cl.center + sd.1))
                }
                None => self.direct(cl, z),
            };
            value += v;
            deriv += d;
        }
        (value, deriv)
    }

    fn direct(&self, cl: &Cluster, z: Complex64) -> (Complex64, Complex64) {
        let mut v = ZERO;
        let mut d = ZERO;
        for m in cl.first..=cl.last {
            let t = self.weights[m] * (-z * self.log_n[m]).exp();
            v += t;
            d -= t * self.log_n[m];
        }
        (v, d)
    }
}

/// `(sum_k mu_k x^k/k!, sum_{k>=1} mu_k x^{k-1}/(k-1)!)`, or `None` if the
/// tail does not fall below rounding within `MAX_ORDER` terms.
fn series(cl: &Cluster, x: Complex64, xabs: f64) -> Option<(Complex64, Complex64)> {
    let mut sum = cl.moments[0];
    if cl.radius == 0.0 {
        return Some((sum, ZERO));
    }
    let rho = xabs * cl.radius;
    if rho == 0.0 {
        return Some((sum, cl.moments[1]));
    }
    let mut dsum = ZERO;
    let mut p = Complex64::new(1.0, 0.0);
    let mut bound = 1.0;
    for k in 1..=MAX_ORDER {
        // p = x^{k-1}/(k-1)! before the update
        dsum += cl.moments[k] * p;
        p *= x / k as f64;
        sum += cl.moments[k] * p;
        bound *= rho / k as f64;
        // remaining terms of both series relative to sum |w_n|
        if bound * (1.0 + k as f64 / rho) < TAIL_TOL {
            return Some((sum, dsum));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_evaluation() {
        let coeffs: Vec<Complex64> = (0..20_000)
            .map(|k| {
                let n = (k + 7) as f64;
                Complex64::new((n * 0.37).sin(), (n * 0.11).cos()) / n.sqrt()
            })
            .collect();
        let poly = DirichletPolynomial::new(7, coeffs);
        let fast = MomentEvaluator::new(&poly, 0.05);
        assert!(fast.num_clusters() < 300);
        for s in [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.51, 4.7),
            Complex64::new(1.3, -9.0),
            Complex64::new(2.5, 5.0),
            Complex64::new(0.6, 60.0),
        ] {
            let (v, d) = fast.evaluate_with_derivative(s);
            let v0 = poly.evaluate(s);
            let d0 = poly.evaluate_derivative(s, 1);
            assert!((v - v0).norm() < 1e-12 * (1.0 + v0.norm()), "{s}: {v} vs {v0}");
            assert!((d - d0).norm() < 1e-11 * (1.0 + d0.norm()), "{s}: {d} vs {d0}");
        }
    }

    #[test]
    fn empty_polynomial() {
        let fast = MomentEvaluator::new(&DirichletPolynomial::zero(), 0.05);
        assert_eq!(fast.evaluate(Complex64::new(1.0, 1.0)), ZERO);
    }
}
