//! Cauchy-transform solution of `dbar u = g` for compactly supported `g`,
//! and the smooth cutoff used by the correction step.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::StripRegion;
use crate::sum::ComplexAccumulator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Axis-aligned rectangle `[sigma0, sigma1] x [t0, t1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub sigma0: f64,
    pub sigma1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Rect {
    pub fn new(sigma0: f64, sigma1: f64, t0: f64, t1: f64) -> Result<Self> {
        if !(sigma0 < sigma1 && t0 < t1) || !(sigma0.is_finite() && sigma1.is_finite()) {
            return Err(Error::invalid("rectangle must have positive extent"));
        }
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(Error::invalid("rectangle must be finite"));
        }
        Ok(Self {
            sigma0,
            sigma1,
            t0,
            t1,
        })
    }

    pub fn from_region(region: StripRegion) -> Self {
        Self {
            sigma0: 0.5,
            sigma1: 0.5 + region.tau,
            t0: -region.r,
            t1: region.r,
        }
    }

    pub fn area(&self) -> f64 {
        (self.sigma1 - self.sigma0) * (self.t1 - self.t0)
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.sigma0 + self.sigma1),
            0.5 * (self.t0 + self.t1),
        )
    }

    pub fn contains(&self, s: Complex64) -> bool {
        s.re >= self.sigma0 && s.re <= self.sigma1 && s.im >= self.t0 && s.im <= self.t1
    }

    pub fn distance(&self, s: Complex64) -> f64 {
        let dx = (self.sigma0 - s.re).max(s.re - self.sigma1).max(0.0);
        let dy = (self.t0 - s.im).max(s.im - self.t1).max(0.0);
        dx.hypot(dy)
    }
}

// Antiderivative of p/(p^2+q^2) and q/(p^2+q^2) in both variables.
fn corner(p: f64, q: f64) -> Complex64 {
    let r2 = p * p + q * q;
    if r2 == 0.0 {
        return ZERO;
    }
    let l = r2.ln();
    let re = 0.5 * q * l + if p == 0.0 { 0.0 } else { p * (q / p).atan() };
    let im = 0.5 * p * l + if q == 0.0 { 0.0 } else { q * (p / q).atan() };
    Complex64::new(re, -im)
}

/// `(1/pi) int_rect dm(w) / (s - w)` in closed form.
pub fn rect_cauchy(s: Complex64, rect: &Rect) -> Complex64 {
    let (p0, p1) = (s.re - rect.sigma1, s.re - rect.sigma0);
    let (q0, q1) = (s.im - rect.t1, s.im - rect.t0);
    (corner(p1, q1) - corner(p0, q1) - corner(p1, q0) + corner(p0, q0)) / PI
}

/// The transition `x -> 1/(1 + exp(kappa (1/x - 1/(1-x))))` on `[0, 1]` and
/// its derivative.
fn ramp(x: f64, kappa: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let e = kappa * (1.0 / x - 1.0 / (1.0 - x));
    let p = 1.0 / (1.0 + e.exp());
    let d = kappa * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x))) * p * (1.0 - p);
    (p, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaValue {
    pub value: f64,
    /// `(d/dsigma, d/dt)`.
    pub gradient: [f64; 2],
}

/// Smooth cutoff equal to 1 on `Omega(R-1, 1)` and 0 off `Omega(R, 2)`.
///
/// Tensor product of a sigma ramp over `[3/2, 5/2]` and a t ramp over
/// `R-1 <= |t| <= R`. For `sigma < 1/2` the sigma factor is taken as 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffTheta {
    pub r: f64,
    pub sharpness: f64,
    pub max_gradient: f64,
}

const GRADIENT_CAP: f64 = 2.0;

impl CutoffTheta {
    /// Builds the cutoff, softening the ramps until the measured gradient
    /// stays within 2.
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 1.0) || !r.is_finite() {
            return Err(Error::invalid(format!("cutoff needs R > 1, got {r}")));
        }
        let mut kappa = 1.0;
        loop {
            let g = corner_gradient_max(kappa);
            if g <= GRADIENT_CAP {
                return Ok(Self {
                    r,
                    sharpness: kappa,
                    max_gradient: g,
                });
            }
            kappa *= 0.95;
        }
    }

    pub fn inner(&self) -> StripRegion {
        StripRegion {
            r: self.r - 1.0,
            tau: 1.0,
        }
    }

    pub fn support(&self) -> StripRegion {
        StripRegion { r: self.r, tau: 2.0 }
    }

    pub fn eval(&self, s: Complex64) -> ThetaValue {
        let (ps, dps) = ramp(s.re - 1.5, self.sharpness);
        let at = s.im.abs();
        let (pt, dpt) = ramp(at - (self.r - 1.0), self.sharpness);
        let (a, b) = (1.0 - ps, 1.0 - pt);
        let sign = if s.im < 0.0 { -1.0 } else { 1.0 };
        ThetaValue {
            value: a * b,
            gradient: [-dps * b, -a * dpt * sign],
        }
    }

    /// `dbar Theta = (Theta_sigma + i Theta_t) / 2`.
    pub fn dbar(&self, s: Complex64) -> Complex64 {
        let g = self.eval(s).gradient;
        Complex64::new(0.5 * g[0], 0.5 * g[1])
    }

    /// Largest `|grad Theta|` over a grid of spacing `h` on `Omega(R+1/2, 5/2)`.
    pub fn measured_max_gradient(&self, h: f64) -> f64 {
        let ns = (2.5 / h).ceil() as usize;
        let nt = (2.0 * (self.r + 0.5) / h).ceil() as usize;
        let mut worst: f64 = 0.0;
        for i in 0..=ns {
            let sigma = 0.5 + i as f64 * h;
            for j in 0..=nt {
                let t = -(self.r + 0.5) + j as f64 * h;
                let g = self.eval(Complex64::new(sigma, t)).gradient;
                worst = worst.max(g[0].hypot(g[1]));
            }
        }
        worst
    }
}

fn corner_gradient_max(kappa: f64) -> f64 {
    const M: usize = 2000;
    let prof: Vec<(f64, f64)> = (0..=M).map(|i| ramp(i as f64 / M as f64, kappa)).collect();
    let mut worst: f64 = 0.0;
    for &(px, dx) in &prof {
        for &(py, dy) in &prof {
            let g = (dx * (1.0 - py)).hypot((1.0 - px) * dy);
            worst = worst.max(g);
        }
    }
    worst
}

/// Uniform cell decomposition of a rectangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaQuadrature {
    pub rect: Rect,
    pub n_sigma: usize,
    pub n_t: usize,
}

impl AreaQuadrature {
    /// Cells of size at most `h` on each side.
    pub fn new(rect: Rect, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("cell size must be positive"));
        }
        let n_sigma = ((rect.sigma1 - rect.sigma0) / h - 1e-9).ceil().max(1.0) as usize;
        let n_t = ((rect.t1 - rect.t0) / h - 1e-9).ceil().max(1.0) as usize;
        Ok(Self { rect, n_sigma, n_t })
    }

    pub fn on_region(region: StripRegion, h: f64) -> Result<Self> {
        Self::new(Rect::from_region(region), h)
    }

    pub fn h_sigma(&self) -> f64 {
        (self.rect.sigma1 - self.rect.sigma0) / self.n_sigma as f64
    }

    pub fn h_t(&self) -> f64 {
        (self.rect.t1 - self.rect.t0) / self.n_t as f64
    }

    pub fn num_cells(&self) -> usize {
        self.n_sigma * self.n_t
    }

    pub fn cell_area(&self) -> f64 {
        self.h_sigma() * self.h_t()
    }

    /// Sum of all cell weights.
    pub fn total_weight(&self) -> f64 {
        self.cell_area() * self.num_cells() as f64
    }

    pub fn cell_rect(&self, i: usize, j: usize) -> Rect {
        let (hs, ht) = (self.h_sigma(), self.h_t());
        Rect {
            sigma0: self.rect.sigma0 + i as f64 * hs,
            sigma1: self.rect.sigma0 + (i + 1) as f64 * hs,
            t0: self.rect.t0 + j as f64 * ht,
            t1: self.rect.t0 + (j + 1) as f64 * ht,
        }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(
            self.rect.sigma0 + (i as f64 + 0.5) * self.h_sigma(),
            self.rect.t0 + (j as f64 + 0.5) * self.h_t(),
        )
    }

    /// Cell containing `s`, if any.
    pub fn locate(&self, s: Complex64) -> Option<(usize, usize)> {
        if !self.rect.contains(s) {
            return None;
        }
        let i = ((s.re - self.rect.sigma0) / self.h_sigma()) as usize;
        let j = ((s.im - self.rect.t0) / self.h_t()) as usize;
        Some((i.min(self.n_sigma - 1), j.min(self.n_t - 1)))
    }
}

/// Piecewise-constant field holding one average per quadrature cell,
/// indexed `i * n_t + j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellField {
    pub quad: AreaQuadrature,
    pub values: Vec<Complex64>,
}

pub(crate) const GAUSS2: f64 = 0.288_675_134_594_812_9; // 1/(2 sqrt 3)

impl CellField {
    pub fn zero(quad: AreaQuadrature) -> Self {
        let n = quad.num_cells();
        Self {
            quad,
            values: vec![ZERO; n],
        }
    }

    /// Cell averages by the 2x2 Gauss rule.
    pub fn sampled(quad: AreaQuadrature, f: impl Fn(Complex64) -> Complex64) -> Self {
        let (hs, ht) = (quad.h_sigma(), quad.h_t());
        let mut values = Vec::with_capacity(quad.num_cells());
        for i in 0..quad.n_sigma {
            for j in 0..quad.n_t {
                let c = quad.cell_center(i, j);
                let mut acc = ZERO;
                for a in [-GAUSS2, GAUSS2] {
                    for b in [-GAUSS2, GAUSS2] {
                        acc += f(c + Complex64::new(a * hs, b * ht));
                    }
                }
                values.push(acc * 0.25);
            }
        }
        Self { quad, values }
    }

    /// Area fraction of each cell where `inside` holds, by `levels` rounds of
    /// subdivision of cells cut by the boundary.
    pub fn indicator(quad: AreaQuadrature, inside: impl Fn(Complex64) -> bool, levels: u32) -> Self {
        let mut values = Vec::with_capacity(quad.num_cells());
        for i in 0..quad.n_sigma {
            for j in 0..quad.n_t {
                let frac = fraction(&quad.cell_rect(i, j), &inside, levels);
                values.push(Complex64::new(frac, 0.0));
            }
        }
        Self { quad, values }
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.quad.n_t + j]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `int g dm` of the piecewise-constant field.
    pub fn integral(&self) -> Complex64 {
        let mut acc = ComplexAccumulator::new();
        for &v in &self.values {
            acc.add(v);
        }
        acc.value() * self.quad.cell_area()
    }
}

fn fraction(rect: &Rect, inside: &impl Fn(Complex64) -> bool, levels: u32) -> f64 {
    let corners = [
        Complex64::new(rect.sigma0, rect.t0),
        Complex64::new(rect.sigma1, rect.t0),
        Complex64::new(rect.sigma0, rect.t1),
        Complex64::new(rect.sigma1, rect.t1),
        rect.center(),
    ];
    let hits = corners.iter().filter(|&&c| inside(c)).count();
    if hits == 0 || hits == corners.len() || levels == 0 {
        if levels == 0 {
            return if inside(rect.center()) { 1.0 } else { 0.0 };
        }
        // no boundary detected at corners and centre
        return if hits == 0 { 0.0 } else { 1.0 };
    }
    let c = rect.center();
    let quads = [
        Rect { sigma0: rect.sigma0, sigma1: c.re, t0: rect.t0, t1: c.im },
        Rect { sigma0: c.re, sigma1: rect.sigma1, t0: rect.t0, t1: c.im },
        Rect { sigma0: rect.sigma0, sigma1: c.re, t0: c.im, t1: rect.t1 },
        Rect { sigma0: c.re, sigma1: rect.sigma1, t0: c.im, t1: rect.t1 },
    ];
    quads.iter().map(|q| fraction(q, inside, levels - 1)).sum::<f64>() * 0.25
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    center: Complex64,
    rect: Rect,
    value: Complex64,
}

/// Evaluator of `u(s) = (1/pi) int g(w)/(s-w) dm(w)` for a piecewise-constant
/// `g`.
///
/// Cells within `NEAR` cell diameters of `s` use the exact rectangle
/// integral; farther cells use their multipole expansion through fourth
/// order. Points far from the whole support use one global expansion.
#[derive(Clone, Debug)]
pub struct CauchySolver {
    cells: Vec<Cell>,
    area: f64,
    m2: Complex64,
    m4: Complex64,
    near: f64,
    center: Complex64,
    radius: f64,
    moments: Vec<Complex64>,
}

const NEAR: f64 = 4.0;
const GLOBAL_ORDER: usize = 60;

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

impl CauchySolver {
    pub fn new(field: &CellField) -> Self {
        let q = &field.quad;
        let (hs, ht) = (q.h_sigma(), q.h_t());
        let mut cells = Vec::new();
        for i in 0..q.n_sigma {
            for j in 0..q.n_t {
                let v = field.value(i, j);
                if v != ZERO {
                    cells.push(Cell {
                        center: q.cell_center(i, j),
                        rect: q.cell_rect(i, j),
                        value: v,
                    });
                }
            }
        }
        // normalised cell moments E[(w - w_c)^k] for k = 2, 4
        let m2 = Complex64::new((hs * hs - ht * ht) / 12.0, 0.0);
        let m4 = Complex64::new(
            hs.powi(4) / 80.0 - hs * hs * ht * ht / 24.0 + ht.powi(4) / 80.0,
            0.0,
        );
        let area = hs * ht;
        let center = q.rect.center();
        let mut radius: f64 = 0.0;
        for c in &cells {
            for w in [
                Complex64::new(c.rect.sigma0, c.rect.t0),
                Complex64::new(c.rect.sigma1, c.rect.t0),
                Complex64::new(c.rect.sigma0, c.rect.t1),
                Complex64::new(c.rect.sigma1, c.rect.t1),
            ] {
                radius = radius.max((w - center).norm());
            }
        }
        let mut moments = vec![ZERO; GLOBAL_ORDER + 1];
        for c in &cells {
            let d = c.center - center;
            // powers d^k
            let mut pw = vec![Complex64::new(1.0, 0.0); GLOBAL_ORDER + 1];
            for k in 1..=GLOBAL_ORDER {
                pw[k] = pw[k - 1] * d;
            }
            for (k, mk) in moments.iter_mut().enumerate() {
                let mut e = pw[k];
                if k >= 2 {
                    e += pw[k - 2] * m2 * binomial(k, 2);
                }
                if k >= 4 {
                    e += pw[k - 4] * m4 * binomial(k, 4);
                }
                *mk += c.value * e;
            }
        }
        for m in moments.iter_mut() {
            *m *= area / PI;
        }
        Self {
            cells,
            area,
            m2,
            m4,
            near: NEAR * hs.max(ht),
            center,
            radius,
            moments,
        }
    }

    pub fn num_active_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        if self.cells.is_empty() {
            return ZERO;
        }
        let zc = s - self.center;
        if zc.norm() > 2.0 * self.radius {
            let inv = 1.0 / zc;
            let mut p = inv;
            let mut acc = ZERO;
            for &m in &self.moments {
                acc += m * p;
                p *= inv;
            }
            return acc;
        }
        let near2 = self.near * self.near;
        let mut far = ZERO;
        let mut close = ZERO;
        for c in &self.cells {
            let z = s - c.center;
            if z.norm_sqr() < near2 {
                close += c.value * rect_cauchy(s, &c.rect);
            } else {
                let inv = 1.0 / z;
                let inv2 = inv * inv;
                far += c.value * inv * (1.0 + inv2 * (self.m2 + inv2 * self.m4));
            }
        }
        far * (self.area / PI) + close
    }

    pub fn eval_many(&self, points: &[Complex64]) -> Vec<Complex64> {
        points.iter().map(|&s| self.eval(s)).collect()
    }
}

/// `(1/pi) int g(w)/(s-w) dm(w)` for the piecewise-constant field `g`.
pub fn cauchy_transform(g: &CellField, s: Complex64) -> Complex64 {
    CauchySolver::new(g).eval(s)
}

/// `max |dbar u - g| / (1 + |g|)` over the probes, with `dbar` by central
/// differences of step `h`.
pub fn dbar_residual(
    u: impl Fn(Complex64) -> Complex64,
    g: impl Fn(Complex64) -> Complex64,
    probes: &[Complex64],
    h: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for &p in probes {
        let ds = (u(p + h) - u(p - h)) / (2.0 * h);
        let dt = (u(p + Complex64::new(0.0, h)) - u(p - Complex64::new(0.0, h))) / (2.0 * h);
        let dbar = 0.5 * (ds + Complex64::i() * dt);
        let gv = g(p);
        worst = worst.max((dbar - gv).norm() / (1.0 + gv.norm()));
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lem1Report {
    pub max_abs_u: f64,
    /// `max |u| / (eps log R)` over all probes.
    pub empirical_c: f64,
    /// `max |u(s)| pi dist(s, Omega) / (area(Omega) eps)` over probes
    /// outside `Omega`; at most 1 by the triangle inequality.
    pub far_field_ratio: f64,
    /// The same maximum against `R eps / (pi dist)`, i.e. without the area
    /// factor `4` of `Omega(R, 2)`. Reported only.
    pub r_form_ratio: f64,
    pub probes_outside: usize,
}

/// Empirical constant of the sup bound and the far-field check
/// `|u(s)| <= area(Omega) eps / (pi dist(s, Omega))`.
pub fn lem1_bounds_check(
    u: impl Fn(Complex64) -> Complex64,
    eps: f64,
    region: StripRegion,
    probes: &[Complex64],
) -> Result<Lem1Report> {
    let mut max_abs: f64 = 0.0;
    let mut far: f64 = 0.0;
    let mut outside = 0;
    let mut r_form: f64 = 0.0;
    for &s in probes {
        let v = u(s).norm();
        max_abs = max_abs.max(v);
        let d = region.distance(s);
        if d > 0.0 {
            outside += 1;
            let bound = region.area() * eps / (PI * d);
            r_form = r_form.max(v * PI * d / (region.r * eps));
            let ratio = if v == 0.0 { 0.0 } else { v / bound };
            // allow rounding in the quadrature sum
            if v > bound * (1.0 + 1e-9) + 1e-300 {
                return Err(Error::FarFieldViolation {
                    point: s,
                    value: v,
                    bound,
                });
            }
            far = far.max(ratio);
        }
    }
    let scale = eps * region.r.ln();
    Ok(Lem1Report {
        max_abs_u: max_abs,
        empirical_c: if max_abs == 0.0 { 0.0 } else { max_abs / scale },
        far_field_ratio: far,
        r_form_ratio: r_form,
        probes_outside: outside,
    })
}

/// Writes `sigma,t,re_u,im_u` rows for `u` on a uniform grid.
pub fn write_grid_csv(
    out: &mut impl Write,
    u: impl Fn(Complex64) -> Complex64,
    rect: &Rect,
    n_sigma: usize,
    n_t: usize,
) -> Result<()> {
    writeln!(out, "sigma,t,re_u,im_u")?;
    for i in 0..=n_sigma {
        let sigma = rect.sigma0 + (rect.sigma1 - rect.sigma0) * i as f64 / n_sigma.max(1) as f64;
        for j in 0..=n_t {
            let t = rect.t0 + (rect.t1 - rect.t0) * j as f64 / n_t.max(1) as f64;
            let v = u(Complex64::new(sigma, t));
            writeln!(out, "{sigma},{t},{},{}", v.re, v.im)?;
        }
    }
    Ok(())
}
