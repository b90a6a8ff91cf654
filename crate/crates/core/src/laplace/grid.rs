use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{Accumulator, ComplexAccumulator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `(e^w - 1)/w`, accurate near `w = 0`.
pub(crate) fn exprel(w: Complex64) -> Complex64 {
    if w.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..40 {
            term *= w / k as f64;
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        (w.exp() - 1.0) / w
    }
}

/// `int_0^1 x e^{w x} dx = (e^w (w - 1) + 1)/w^2`, accurate near `w = 0`.
pub(crate) fn exprel_moment(w: Complex64) -> Complex64 {
    if w.norm() < 1.0 {
        // sum_k w^k / (k! (k + 2))
        let mut fact = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.5, 0.0);
        for k in 1..60 {
            fact *= w / k as f64;
            let term = fact / (k + 2) as f64;
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        (w.exp() * (w - 1.0) + 1.0) / (w * w)
    }
}

/// A piecewise-constant complex function on `[xi_0, xi_K]`, zero elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridFunction {
    breakpoints: Vec<f64>,
    values: Vec<Complex64>,
}

#[derive(Deserialize)]
struct RawGrid {
    breakpoints: Vec<f64>,
    values: Vec<Complex64>,
}

impl<'de> Deserialize<'de> for GridFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawGrid::deserialize(d)?;
        GridFunction::new(raw.breakpoints, raw.values).map_err(serde::de::Error::custom)
    }
}

impl GridFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::invalid("grid function needs at least one breakpoint"));
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::invalid(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                values.len()
            )));
        }
        if breakpoints.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite breakpoint"));
        }
        if let Some(k) = breakpoints.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(format!(
                "breakpoints not strictly increasing at index {k}: {} >= {}",
                breakpoints[k],
                breakpoints[k + 1]
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("non-finite value"));
        }
        Ok(Self { breakpoints, values })
    }

    /// The zero function, represented with no cells.
    pub fn zero(start: f64) -> Self {
        Self {
            breakpoints: vec![start],
            values: Vec::new(),
        }
    }

    pub fn constant(a: f64, b: f64, value: Complex64) -> Result<Self> {
        Self::new(vec![a, b], vec![value])
    }

    /// Cell values taken as `f` at cell midpoints.
    pub fn from_midpoints(breakpoints: Vec<f64>, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = breakpoints
            .windows(2)
            .map(|w| f(0.5 * (w[0] + w[1])))
            .collect();
        Self::new(breakpoints, values)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn cell(&self, k: usize) -> (f64, f64, Complex64) {
        (self.breakpoints[k], self.breakpoints[k + 1], self.values[k])
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, Complex64)> + '_ {
        (0..self.values.len()).map(move |k| self.cell(k))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == ZERO)
    }

    /// `[first, last]` breakpoints of the nonzero cells, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.values.iter().position(|v| *v != ZERO)?;
        let last = self.values.iter().rposition(|v| *v != ZERO)?;
        Some((self.breakpoints[first], self.breakpoints[last + 1]))
    }

    /// Value at `xi`; cells are closed on the left.
    pub fn value_at(&self, xi: f64) -> Complex64 {
        if xi < self.start() || xi >= self.end() {
            return ZERO;
        }
        let k = self.breakpoints.partition_point(|&b| b <= xi) - 1;
        self.values[k]
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `int_a^b phi`.
    pub fn integral(&self, a: f64, b: f64) -> Complex64 {
        let mut acc = ComplexAccumulator::new();
        for (lo, hi, v) in self.cells() {
            let l = lo.max(a);
            let h = hi.min(b);
            if h > l {
                acc.add(v * (h - l));
            }
        }
        acc.value()
    }

    /// `||phi||_2`.
    pub fn norm_l2(&self) -> f64 {
        let mut acc = Accumulator::new();
        for (a, b, v) in self.cells() {
            acc.add(v.norm_sqr() * (b - a));
        }
        acc.value().sqrt()
    }

    /// `(int_lower^inf |phi|^2 xi^beta dxi)^{1/2}`, exact per cell.
    pub fn norm_weighted(&self, beta: f64, lower: f64) -> f64 {
        let mut acc = Accumulator::new();
        for (a, b, v) in self.cells() {
            let a = a.max(lower).max(0.0);
            if b <= a {
                continue;
            }
            acc.add(v.norm_sqr() * power_integral(a, b, beta));
        }
        acc.value().sqrt()
    }

    /// The `D_beta` norm `(int |phi|^2 (1 + xi^beta) dxi)^{1/2}`.
    pub fn norm_dbeta(&self, beta: f64) -> f64 {
        let mut acc = Accumulator::new();
        for (a, b, v) in self.cells() {
            let lo = a.max(0.0);
            let extra = if b > lo { power_integral(lo, b, beta) } else { 0.0 };
            acc.add(v.norm_sqr() * ((b - a) + extra));
        }
        acc.value().sqrt()
    }

    /// `f(s) = int phi(xi) e^{-(s-1/2) xi} dxi`, exact cell by cell.
    pub fn laplace_transform(&self, s: Complex64) -> Complex64 {
        let z = s - 0.5;
        let mut acc = ComplexAccumulator::new();
        for (a, b, v) in self.cells() {
            if v == ZERO {
                continue;
            }
            let width = b - a;
            acc.add(v * (-z * a).exp() * width * exprel(-z * width));
        }
        acc.value()
    }

    /// `f'(s) = -int xi phi(xi) e^{-(s-1/2) xi} dxi`.
    pub fn laplace_derivative(&self, s: Complex64) -> Complex64 {
        let z = s - 0.5;
        let mut acc = ComplexAccumulator::new();
        for (a, b, v) in self.cells() {
            if v == ZERO {
                continue;
            }
            let width = b - a;
            let w = -z * width;
            let cell = (-z * a).exp() * (a * width * exprel(w) + width * width * exprel_moment(w));
            acc.add(-v * cell);
        }
        acc.value()
    }

    /// Integrals of `phi` over consecutive node intervals `[nodes[i], nodes[i+1]]`.
    ///
    /// `widths[i]` may override `nodes[i+1] - nodes[i]` for intervals lying
    /// inside one cell, which avoids cancellation when nodes are `log n`.
    pub fn node_integrals(&self, nodes: &[f64], widths: Option<&[f64]>) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(nodes.len().saturating_sub(1));
        let mut k = 0usize;
        let cells = self.values.len();
        for i in 0..nodes.len().saturating_sub(1) {
            let (a, b) = (nodes[i], nodes[i + 1]);
            while k < cells && self.breakpoints[k + 1] <= a {
                k += 1;
            }
            if k >= cells || b <= self.breakpoints[k] {
                out.push(ZERO);
                continue;
            }
            if a >= self.breakpoints[k] && b <= self.breakpoints[k + 1] {
                let width = widths.map_or(b - a, |w| w[i]);
                out.push(self.values[k] * width);
                continue;
            }
            let mut acc = ComplexAccumulator::new();
            let mut m = k;
            while m < cells && self.breakpoints[m] < b {
                let l = self.breakpoints[m].max(a);
                let h = self.breakpoints[m + 1].min(b);
                if h > l {
                    acc.add(self.values[m] * (h - l));
                }
                m += 1;
            }
            out.push(acc.value());
        }
        out
    }
}

/// `int_a^b x^beta dx` for `0 <= a < b`.
fn power_integral(a: f64, b: f64, beta: f64) -> f64 {
    let p = beta + 1.0;
    (b.powf(p) - a.powf(p)) / p
}
