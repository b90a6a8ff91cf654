//! Argument-principle zero counts, zero location by subdivision, and scans
//! for vertical near-repetitions of zeros.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dbar::Rect;
use crate::dirichlet::DirichletPolynomial;
use crate::error::{Error, Result};

const BASE_SAMPLES: usize = 512;
const MAX_DEPTH: u32 = 40;

/// Closed, positively oriented contour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Contour {
    Box(Rect),
    Circle { center: Complex64, radius: f64 },
}

impl Contour {
    pub fn circle(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("radius {radius} must be positive")));
        }
        Ok(Contour::Circle { center, radius })
    }

    /// Point at parameter `u` in `[0, 1)`.
    pub fn point(&self, u: f64) -> Complex64 {
        match *self {
            Contour::Circle { center, radius } => center + Complex64::from_polar(radius, 2.0 * PI * u),
            Contour::Box(r) => {
                let (w, h) = (r.sigma1 - r.sigma0, r.t1 - r.t0);
                let perim = 2.0 * (w + h);
                let mut d = u.rem_euclid(1.0) * perim;
                if d < w {
                    return Complex64::new(r.sigma0 + d, r.t0);
                }
                d -= w;
                if d < h {
                    return Complex64::new(r.sigma1, r.t0 + d);
                }
                d -= h;
                if d < w {
                    return Complex64::new(r.sigma1 - d, r.t1);
                }
                d -= w;
                Complex64::new(r.sigma0, r.t1 - d)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroCount {
    pub count: i64,
    /// Accumulated phase change over `2 pi`, before rounding.
    pub winding: f64,
    pub min_boundary_abs: f64,
    pub evaluations: usize,
}

struct Tracker<'a, F: Fn(Complex64) -> Complex64> {
    f: &'a F,
    contour: Contour,
    tol: f64,
    min_abs: f64,
    evaluations: usize,
}

impl<F: Fn(Complex64) -> Complex64> Tracker<'_, F> {
    fn sample(&mut self, u: f64) -> Result<Complex64> {
        let s = self.contour.point(u);
        let v = (self.f)(s);
        self.evaluations += 1;
        let a = v.norm();
        if !(a >= self.tol) {
            return Err(Error::BoundaryTooClose { point: s, value: a });
        }
        self.min_abs = self.min_abs.min(a);
        Ok(v)
    }

    fn phase(&mut self, ua: f64, fa: Complex64, ub: f64, fb: Complex64, depth: u32) -> Result<f64> {
        let d = (fb / fa).arg();
        if d.abs() <= PI / 2.0 || depth >= MAX_DEPTH {
            return Ok(d);
        }
        let um = 0.5 * (ua + ub);
        let fm = self.sample(um)?;
        Ok(self.phase(ua, fa, um, fm, depth + 1)? + self.phase(um, fm, ub, fb, depth + 1)?)
    }

    fn run(&mut self, n: usize) -> Result<f64> {
        let first = self.sample(0.0)?;
        let mut prev = first;
        let mut total = 0.0;
        for k in 1..=n {
            let u = k as f64 / n as f64;
            let cur = if k == n { first } else { self.sample(u)? };
            total += self.phase((k - 1) as f64 / n as f64, prev, u, cur, 0)?;
            prev = cur;
        }
        Ok(total / (2.0 * PI))
    }
}

/// Number of zeros of `f` inside `contour`, with multiplicity.
///
/// Requires `|f| >= tol` at every boundary sample.
pub fn count_zeros<F: Fn(Complex64) -> Complex64>(f: F, contour: Contour, tol: f64) -> Result<ZeroCount> {
    let mut n = BASE_SAMPLES;
    loop {
        let mut tr = Tracker {
            f: &f,
            contour,
            tol,
            min_abs: f64::INFINITY,
            evaluations: 0,
        };
        let winding = tr.run(n)?;
        let count = winding.round();
        if (winding - count).abs() <= 1e-3 || n >= BASE_SAMPLES << 6 {
            return Ok(ZeroCount {
                count: count as i64,
                winding,
                min_boundary_abs: tr.min_abs,
                evaluations: tr.evaluations,
            });
        }
        n *= 2;
    }
}

pub fn count_zeros_in_box<F: Fn(Complex64) -> Complex64>(f: F, rect: Rect, tol: f64) -> Result<ZeroCount> {
    count_zeros(f, Contour::Box(rect), tol)
}

/// A zero isolated to a small box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocatedZero {
    pub sigma: f64,
    pub t: f64,
    pub multiplicity_estimate: i64,
}

fn split(r: Rect) -> [Rect; 4] {
    // off-centre cuts make a zero on a symmetric split line unlikely
    let sm = r.sigma0 + 0.5013 * (r.sigma1 - r.sigma0);
    let tm = r.t0 + 0.4987 * (r.t1 - r.t0);
    [
        Rect { sigma1: sm, t1: tm, ..r },
        Rect { sigma0: sm, t1: tm, ..r },
        Rect { sigma1: sm, t0: tm, ..r },
        Rect { sigma0: sm, t0: tm, ..r },
    ]
}

fn locate<F: Fn(Complex64) -> Complex64>(
    f: &F,
    rect: Rect,
    count: i64,
    tol: f64,
    size: f64,
    out: &mut Vec<LocatedZero>,
) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    let diam = (rect.sigma1 - rect.sigma0).max(rect.t1 - rect.t0);
    if diam <= size {
        let c = rect.center();
        out.push(LocatedZero {
            sigma: c.re,
            t: c.im,
            multiplicity_estimate: count,
        });
        return Ok(());
    }
    let parts = split(rect);
    let mut counts = [0i64; 4];
    for (k, p) in parts.iter().enumerate() {
        match count_zeros_in_box(f, *p, tol) {
            Ok(z) => counts[k] = z.count,
            // a zero sits on an internal cut: stop here
            Err(Error::BoundaryTooClose { .. }) => {
                let c = rect.center();
                out.push(LocatedZero {
                    sigma: c.re,
                    t: c.im,
                    multiplicity_estimate: count,
                });
                return Ok(());
            }
            Err(e) => return Err(e),
        }
    }
    for (p, c) in parts.iter().zip(counts) {
        locate(f, *p, c, tol, size, out)?;
    }
    Ok(())
}

/// Zeros of `f` in `rect`, located to boxes of diameter at most `size`.
pub fn find_zeros<F: Fn(Complex64) -> Complex64>(f: F, rect: Rect, tol: f64, size: f64) -> Result<Vec<LocatedZero>> {
    let total = count_zeros_in_box(&f, rect, tol)?;
    let mut out = Vec::new();
    locate(&f, rect, total.count, tol, size, &mut out)?;
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.sigma.total_cmp(&b.sigma)));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NecessityReport {
    pub rect: Rect,
    pub zeros: Vec<LocatedZero>,
    /// `sum (sigma - 1/2)` with multiplicity.
    pub blaschke_sum: f64,
    pub norm_h2: f64,
    /// `blaschke_sum / (t1 - t0)`.
    pub sum_per_unit_height: f64,
}

/// Zeros of `f` in `rect` and their Blaschke sum.
pub fn necessity_check(f: &DirichletPolynomial, rect: Rect) -> Result<NecessityReport> {
    let norm = f.norm_h2();
    let tol = 1e-12 * norm.max(f64::MIN_POSITIVE);
    let zeros = if f.is_zero() {
        Vec::new()
    } else {
        find_zeros(|s| f.evaluate(s), rect, tol, 1e-4)?
    };
    let blaschke_sum = zeros
        .iter()
        .map(|z| (z.sigma - 0.5) * z.multiplicity_estimate as f64)
        .sum();
    Ok(NecessityReport {
        rect,
        zeros,
        blaschke_sum,
        norm_h2: norm,
        sum_per_unit_height: blaschke_sum / (rect.t1 - rect.t0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearZero {
    pub offset: f64,
    pub abs: f64,
}

/// Offsets `tau` in `t_range` (excluding a neighbourhood of 0) where
/// `|f(base + i tau)| < tol`, each refined to a local minimum.
pub fn vertical_repetition_scan(
    f: &DirichletPolynomial,
    base: Complex64,
    t_range: (f64, f64),
    tol: f64,
) -> Result<Vec<NearZero>> {
    if f.nonzero_terms().nth(1).is_none() {
        // a single term never vanishes
        return Ok(Vec::new());
    }
    let at = |tau: f64| f.evaluate(base + Complex64::new(0.0, tau)).norm();
    let base_abs = at(0.0);
    if !(base_abs < tol) {
        return Err(Error::invalid(format!(
            "|f(base)| = {base_abs:e} is not below tol = {tol:e}"
        )));
    }
    let (lo, hi) = t_range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("empty scan range"));
    }
    let terms: Vec<(f64, Complex64)> = f
        .nonzero_terms()
        .map(|(n, a)| {
            let ln = (n as f64).ln();
            (ln, a * (-base * ln).exp())
        })
        .collect();
    let max_ln = terms.iter().map(|t| t.0).fold(0.0, f64::max);
    let h = 0.05 / max_ln.max(1.0);
    let steps = ((hi - lo) / h).ceil() as usize;
    let h = (hi - lo) / steps as f64;

    // values along the line by per-term rotation, resynchronised periodically
    let mut values = Vec::with_capacity(steps + 1);
    let rot: Vec<Complex64> = terms.iter().map(|t| Complex64::from_polar(1.0, -t.0 * h)).collect();
    let mut cur: Vec<Complex64> = Vec::new();
    for k in 0..=steps {
        if k % 1024 == 0 {
            let tau = lo + k as f64 * h;
            cur = terms.iter().map(|t| t.1 * Complex64::from_polar(1.0, -t.0 * tau)).collect();
        }
        values.push(cur.iter().sum::<Complex64>().norm());
        if k % 1024 != 1023 {
            for (c, r) in cur.iter_mut().zip(&rot) {
                *c *= r;
            }
        }
    }

    let exclusion = 4.0 * h;
    let mut out: Vec<NearZero> = Vec::new();
    for k in 1..steps {
        if values[k] <= values[k - 1] && values[k] < values[k + 1] {
            let (mut a, mut b) = (lo + (k - 1) as f64 * h, lo + (k + 1) as f64 * h);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..80 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if at(c) < at(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let offset = 0.5 * (a + b);
            let v = at(offset);
            if v < tol && offset.abs() > exclusion {
                out.push(NearZero { offset, abs: v });
            }
        }
    }
    Ok(out)
}

/// Writes `sigma,t,multiplicity_estimate` rows.
pub fn write_zero_csv<W: Write>(mut out: W, zeros: &[LocatedZero]) -> Result<()> {
    writeln!(out, "sigma,t,multiplicity_estimate")?;
    for z in zeros {
        writeln!(out, "{},{},{}", z.sigma, z.t, z.multiplicity_estimate)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quadratic_in_box() {
        let r = Rect::new(0.6, 2.5, -1.0, 1.0).unwrap();
        let z = count_zeros_in_box(|s| (s - 1.0) * (s - 2.0), r, 1e-8).unwrap();
        assert_eq!(z.count, 2);
        assert!((z.winding - 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_has_none() {
        let r = Rect::new(0.6, 2.5, -1.0, 1.0).unwrap();
        assert_eq!(count_zeros_in_box(|_| c(1.0, 0.0), r, 0.5).unwrap().count, 0);
    }

    #[test]
    fn eta_factor_zero_at_one() {
        let r = Rect::new(0.9, 1.1, -1.0, 1.0).unwrap();
        let f = |s: Complex64| 1.0 - (c(1.0, 0.0) - s).expf(2.0);
        assert_eq!(count_zeros_in_box(f, r, 1e-8).unwrap().count, 1);
    }

    #[test]
    fn boundary_too_close() {
        let r = Rect::new(1.0, 2.0, -1.0, 1.0).unwrap();
        assert!(matches!(
            count_zeros_in_box(|s| s - 1.0, r, 1e-6),
            Err(Error::BoundaryTooClose { .. })
        ));
    }

    #[test]
    fn circle_counts_double_zero() {
        let k = Contour::circle(c(1.0, 0.5), 0.01).unwrap();
        let z = count_zeros(|s| (s - c(1.0, 0.5)).powu(2) * (s + 3.0), k, 1e-9).unwrap();
        assert_eq!(z.count, 2);
    }

    #[test]
    fn quadrants_add_up() {
        let r = Rect::new(0.6, 2.5, -1.0, 1.0).unwrap();
        let f = |s: Complex64| (s - c(1.0, 0.3)) * (s - c(2.0, -0.4)) * (s - c(0.8, 0.9));
        let whole = count_zeros_in_box(f, r, 1e-8).unwrap().count;
        let parts: i64 = split(r).iter().map(|p| count_zeros_in_box(f, *p, 1e-8).unwrap().count).sum();
        assert_eq!(whole, 3);
        assert_eq!(parts, whole);
    }

    #[test]
    fn repetition_lattice() {
        let f = DirichletPolynomial::from_real_sparse(&[(1, 1.0), (2, -2.0)]).unwrap();
        let hits = vertical_repetition_scan(&f, c(1.0, 0.0), (-1.0, 47.0), 1e-6).unwrap();
        let period = 2.0 * PI / 2f64.ln();
        assert_eq!(hits.len(), 5);
        for (k, h) in hits.iter().enumerate() {
            assert!((h.offset - period * (k + 1) as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn monomial_has_no_repetitions() {
        let f = DirichletPolynomial::from_real_sparse(&[(3, 2.0)]).unwrap();
        assert!(vertical_repetition_scan(&f, c(1.0, 0.0), (0.0, 10.0), 1e-3).unwrap().is_empty());
        let g = DirichletPolynomial::from_real_sparse(&[(1, 1.0), (2, 1.0)]).unwrap();
        assert!(vertical_repetition_scan(&g, c(1.0, 0.0), (0.0, 10.0), 1e-3).is_err());
    }

    #[test]
    fn necessity_on_lattice() {
        let f = DirichletPolynomial::from_real_sparse(&[(1, 1.0), (2, -2.0)]).unwrap();
        let r = Rect::new(0.6, 1.4, -20.0, 20.0).unwrap();
        let rep = necessity_check(&f, r).unwrap();
        assert_eq!(rep.zeros.len(), 5);
        assert!((rep.blaschke_sum - 2.5).abs() < 1e-3);
        let one = DirichletPolynomial::from_real_sparse(&[(1, 1.0)]).unwrap();
        assert!(necessity_check(&one, r).unwrap().zeros.is_empty());
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_zero_csv(&mut buf, &[LocatedZero { sigma: 1.0, t: 0.0, multiplicity_estimate: 2 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sigma,t,multiplicity_estimate\n1,0,2\n");
    }
}
