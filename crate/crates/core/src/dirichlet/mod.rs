//! Dirichlet polynomials `sum a_n n^{-s}`, their norms and products.

mod divisor;

pub use divisor::{
    divisor_power_sum, divisor_sum_asymptotic, prime_count, DivisorSumReport, DivisorTable,
    SpaceWeight,
};

use std::fmt;

use num_complex::Complex64;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{Accumulator, ComplexAccumulator};

/// A finite Dirichlet polynomial `sum_{n=start}^{start+len-1} a_n n^{-s}`.
///
/// Coefficients below `start` are identically zero. Indices are 1-based as
/// in the series itself.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletPolynomial {
    start: usize,
    coeffs: Vec<Complex64>,
}

impl DirichletPolynomial {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

impl Default for DirichletPolynomial {
    fn default() -> Self {
        Self::zero()
    }
}

impl DirichletPolynomial {
    /// Dense polynomial whose first coefficient is `a_start`.
    pub fn new(start: usize, coeffs: Vec<Complex64>) -> Self {
        assert!(start >= 1, "Dirichlet indices start at 1");
        Self { start, coeffs }
    }

    pub fn zero() -> Self {
        Self {
            start: 1,
            coeffs: Vec::new(),
        }
    }

    /// Builds a polynomial from `(n, a_n)` pairs. Repeated indices are an error.
    pub fn from_sparse(terms: &[(usize, Complex64)]) -> Result<Self> {
        if terms.is_empty() {
            return Ok(Self::zero());
        }
        let mut sorted: Vec<_> = terms.to_vec();
        sorted.sort_by_key(|&(n, _)| n);
        if sorted[0].0 == 0 {
            return Err(Error::invalid("Dirichlet index 0"));
        }
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid(format!("repeated index {}", w[0].0)));
            }
        }
        let start = sorted[0].0;
        let end = sorted[sorted.len() - 1].0;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); end - start + 1];
        for (n, a) in sorted {
            coeffs[n - start] = a;
        }
        Ok(Self { start, coeffs })
    }

    pub fn from_real_sparse(terms: &[(usize, f64)]) -> Result<Self> {
        let terms: Vec<_> = terms
            .iter()
            .map(|&(n, a)| (n, Complex64::new(a, 0.0)))
            .collect();
        Self::from_sparse(&terms)
    }

    /// Smallest index that may carry a nonzero coefficient.
    pub fn start(&self) -> usize {
        self.start
    }

    /// One past the largest stored index.
    pub fn end(&self) -> usize {
        self.start + self.coeffs.len()
    }

    /// Largest stored index `M` (0 for the empty polynomial).
    pub fn max_index(&self) -> usize {
        if self.coeffs.is_empty() {
            0
        } else {
            self.end() - 1
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|a| *a == Complex64::new(0.0, 0.0))
    }

    pub fn coeff(&self, n: usize) -> Complex64 {
        if n < self.start || n >= self.end() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[n - self.start]
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `(n, a_n)` for every stored index, including zeros.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(k, &a)| (self.start + k, a))
    }

    pub fn nonzero_terms(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.iter().filter(|(_, a)| a.re != 0.0 || a.im != 0.0)
    }

    /// `sum a_n n^{-s}` with `n^{-s} = exp(-s log n)`.
    pub fn evaluate(&self, s: Complex64) -> Complex64 {
        self.evaluate_derivative(s, 0)
    }

    /// The `order`-th derivative in `s`: `sum a_n (-log n)^order n^{-s}`.
    pub fn evaluate_derivative(&self, s: Complex64, order: u32) -> Complex64 {
        let mut acc = ComplexAccumulator::new();
        for (n, a) in self.nonzero_terms() {
            let ln = (n as f64).ln();
            let mut term = a * (-s * ln).exp();
            if order > 0 {
                term *= (-ln).powi(order as i32);
            }
            acc.add(term);
        }
        acc.value()
    }

    /// `(sum |a_n|^2)^{1/2}`, accumulated left to right.
    pub fn norm_h2(&self) -> f64 {
        let mut acc = Accumulator::new();
        for a in &self.coeffs {
            acc.add(a.norm_sqr());
        }
        acc.value().sqrt()
    }

    /// `(sum |a_n|^2 d(n)^alpha)^{1/2}`; for `alpha = inf` the polynomial
    /// must be supported on 1 and the primes.
    pub fn norm_dalpha(&self, weight: SpaceWeight, divisors: &DivisorTable) -> Result<f64> {
        if self.max_index() > divisors.max_index() {
            return Err(Error::invalid(format!(
                "divisor table covers n <= {}, polynomial needs {}",
                divisors.max_index(),
                self.max_index()
            )));
        }
        let mut acc = Accumulator::new();
        for (n, a) in self.nonzero_terms() {
            let d = divisors.get(n);
            match weight {
                SpaceWeight::Infinite => {
                    if d > 2 {
                        return Err(Error::UnsupportedIndex { index: n });
                    }
                    acc.add(a.norm_sqr());
                }
                SpaceWeight::Finite(alpha) => acc.add(a.norm_sqr() * (d as f64).powf(alpha)),
            }
        }
        Ok(acc.value().sqrt())
    }

    /// Coefficients of the product series: `b_n = sum_{k | n} a_k c_{n/k}`.
    pub fn convolve(&self, other: &Self) -> Self {
        if self.is_empty() || other.is_empty() {
            return Self::zero();
        }
        let start = self.start * other.start;
        let end = self.max_index() * other.max_index();
        let mut acc = vec![ComplexAccumulator::new(); end - start + 1];
        for (k, a) in self.nonzero_terms() {
            for (m, c) in other.nonzero_terms() {
                acc[k * m - start].add(a * c);
            }
        }
        Self {
            start,
            coeffs: acc.into_iter().map(|c| c.value()).collect(),
        }
    }

    /// Adds `other` into `self`, widening the index range as needed.
    pub fn add_assign(&mut self, other: &Self) {
        if other.is_empty() {
            return;
        }
        if self.is_empty() {
            *self = other.clone();
            return;
        }
        let start = self.start.min(other.start);
        let end = self.end().max(other.end());
        if start != self.start || end != self.end() {
            let mut coeffs = vec![Complex64::new(0.0, 0.0); end - start];
            for (n, a) in self.iter() {
                coeffs[n - start] = a;
            }
            self.start = start;
            self.coeffs = coeffs;
        }
        for (n, a) in other.iter() {
            self.coeffs[n - self.start] += a;
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            start: self.start,
            coeffs: self.coeffs.iter().map(|a| a * factor).collect(),
        }
    }
}

impl Serialize for DirichletPolynomial {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<_> = self.nonzero_terms().collect();
        let mut seq = serializer.serialize_seq(Some(terms.len()))?;
        for (n, a) in terms {
            seq.serialize_element(&(n, a.re, a.im))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for DirichletPolynomial {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct Triples;

        impl<'de> Visitor<'de> for Triples {
            type Value = DirichletPolynomial;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array of [n, re, im] triples sorted by n")
            }

            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut terms = Vec::new();
                let mut last = 0usize;
                while let Some((n, re, im)) = seq.next_element::<(usize, f64, f64)>()? {
                    if n == 0 {
                        return Err(de::Error::custom("Dirichlet index 0"));
                    }
                    if n <= last {
                        return Err(de::Error::custom(format!(
                            "indices must be strictly increasing (got {n} after {last})"
                        )));
                    }
                    last = n;
                    terms.push((n, Complex64::new(re, im)));
                }
                DirichletPolynomial::from_sparse(&terms).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_seq(Triples)
    }
}
