//! The correction operator `T_N` and the iteration `F = sum F_j` producing
//! Dirichlet series that vanish on, or interpolate along, a finite sequence.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dbar::{AreaQuadrature, CauchySolver, CellField, CutoffTheta, GAUSS2};
use crate::dirichlet::{DirichletPolynomial, DivisorTable, SpaceWeight};
use crate::error::{Error, Result};
use crate::geometry::{BlaschkeProduct, PointSequence, StripRegion};
use crate::laplace::{
    build_dalpha_coefficients, build_h2_coefficients, build_weighted_grid, check_exponents,
    exprel, exprel_moment, GridFunction, MomentEvaluator, WeightedGrid, CLUSTER_WIDTH,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Lower bound required of `|G|` where `grad Theta != 0`.
pub const DIVISOR_THRESHOLD: f64 = 1e-3;

/// Target space of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Space {
    H2,
    Dalpha(SpaceWeight),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSpace {
    Text(String),
    Number(f64),
}

impl Serialize for Space {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Space::H2 => RawSpace::Text("h2".into()),
            Space::Dalpha(SpaceWeight::Infinite) => RawSpace::Text("inf".into()),
            Space::Dalpha(SpaceWeight::Finite(a)) => RawSpace::Number(a),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Space {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RawSpace::deserialize(d)? {
            RawSpace::Text(t) if t.eq_ignore_ascii_case("h2") => Ok(Space::H2),
            RawSpace::Text(t) if t.eq_ignore_ascii_case("inf") => {
                Ok(Space::Dalpha(SpaceWeight::Infinite))
            }
            RawSpace::Text(t) => t
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("unknown space {t:?}")))
                .and_then(|a| SpaceWeight::finite(a).map_err(serde::de::Error::custom))
                .map(Space::Dalpha),
            RawSpace::Number(a) => SpaceWeight::finite(a)
                .map(Space::Dalpha)
                .map_err(serde::de::Error::custom),
        }
    }
}

/// Run parameters. Every key is optional in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "R")]
    pub r: f64,
    pub gamma: f64,
    /// `"h2"`, a number `alpha >= 0`, or `"inf"`.
    pub alpha: Space,
    pub rho_target: f64,
    pub eps_stop: f64,
    pub eps_vanish: f64,
    pub quad_h: f64,
    pub seed: u64,
    #[serde(rename = "N_cap")]
    pub n_cap: usize,
    #[serde(rename = "N_start")]
    pub n_start: usize,
    /// Length of the density support `[log N, log N + xi_span]`.
    pub xi_span: f64,
    /// Cell width of the density grid.
    pub cell_width: f64,
    /// Offset of the inversion line `sigma = 1/2 + h_line`.
    pub h_line: f64,
    /// The inversion integral runs over `|t| <= t_max` with step `dt`.
    pub t_max: f64,
    pub dt: f64,
    pub trials: usize,
    pub max_iter: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            r: 5.0,
            gamma: 0.6,
            alpha: Space::H2,
            rho_target: 0.5,
            eps_stop: 1e-6,
            eps_vanish: 1e-3,
            quad_h: 0.05,
            seed: 0x5eed_2011,
            n_cap: 2048,
            n_start: 16,
            xi_span: 7.0,
            cell_width: 0.01,
            h_line: 0.01,
            t_max: 60.0,
            dt: 0.01,
            trials: 3,
            max_iter: 80,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        if !(self.r > 2.0) || !self.r.is_finite() {
            return Err(Error::invalid(format!("R must exceed 2, got {}", self.r)));
        }
        pos(self.eps_stop, "eps_stop")?;
        pos(self.eps_vanish, "eps_vanish")?;
        pos(self.quad_h, "quad_h")?;
        pos(self.xi_span, "xi_span")?;
        pos(self.cell_width, "cell_width")?;
        pos(self.h_line, "h_line")?;
        pos(self.t_max, "t_max")?;
        pos(self.dt, "dt")?;
        if !(self.rho_target > 0.0 && self.rho_target < 1.0) {
            return Err(Error::invalid("rho_target must lie in (0, 1)"));
        }
        if self.n_start < 2 || self.n_cap < self.n_start {
            return Err(Error::invalid("need 2 <= N_start <= N_cap"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if let Space::Dalpha(w) = self.alpha {
            check_exponents(w, self.gamma)?;
        }
        Ok(())
    }
}

/// `E_N(s) = N^{-s+1/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialShift {
    pub n: usize,
}

impl ExponentialShift {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("E_N needs N >= 2"));
        }
        Ok(Self { n })
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        (-(s - 0.5) * (self.n as f64).ln()).exp()
    }

    /// `|E_N(sigma + it)| = N^{-(sigma - 1/2)}`.
    pub fn modulus(&self, sigma: f64) -> f64 {
        (self.n as f64).powf(0.5 - sigma)
    }
}

/// The divisor in the correction quotient.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeG {
    Blaschke(BlaschkeProduct),
    /// `G = 1`: no vanishing constraint.
    One,
}

impl ModeG {
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        match self {
            ModeG::Blaschke(b) => b.eval(s),
            ModeG::One => Ok(ONE),
        }
    }
}

/// `j`-th derivatives, `j <= order`, from the trapezoid rule on a circle.
pub(crate) fn contour_derivatives(
    f: impl Fn(Complex64) -> Complex64,
    s: Complex64,
    order: usize,
    radius: f64,
) -> Vec<Complex64> {
    const M: usize = 32;
    let vals: Vec<(Complex64, Complex64)> = (0..M)
        .map(|m| {
            let e = Complex64::from_polar(1.0, 2.0 * PI * m as f64 / M as f64);
            (e, f(s + radius * e))
        })
        .collect();
    let mut out = Vec::with_capacity(order + 1);
    let mut fact = 1.0;
    for j in 0..=order {
        if j > 0 {
            fact *= j as f64;
        }
        let mut acc = ZERO;
        for &(e, v) in &vals {
            acc += v * e.powi(-(j as i32));
        }
        out.push(acc * fact / (M as f64 * radius.powi(j as i32)));
    }
    out
}

/// Laplace transform of a density, with a Horner fast path for uniform
/// cells.
struct DensityEval<'a> {
    phi: &'a GridFunction,
    uniform: Option<(f64, f64)>,
}

impl<'a> DensityEval<'a> {
    fn new(phi: &'a GridFunction) -> Self {
        let b = phi.breakpoints();
        let uniform = if b.len() >= 2 {
            let d = (b[b.len() - 1] - b[0]) / (b.len() - 1) as f64;
            let ok = b
                .windows(2)
                .all(|w| ((w[1] - w[0]) - d).abs() <= 1e-9 * d);
            ok.then_some((b[0], d))
        } else {
            None
        };
        Self { phi, uniform }
    }

    fn laplace(&self, s: Complex64) -> Complex64 {
        match self.uniform {
            None => self.phi.laplace_transform(s),
            Some((a0, d)) => {
                let z = s - 0.5;
                let w = (-z * d).exp();
                let mut p = ZERO;
                for &v in self.phi.values().iter().rev() {
                    p = p * w + v;
                }
                (-z * a0).exp() * d * exprel(-z * d) * p
            }
        }
    }

    #[allow(dead_code)]
    fn laplace_derivative(&self, s: Complex64) -> Complex64 {
        match self.uniform {
            None => self.phi.laplace_derivative(s),
            Some((a0, d)) => {
                let z = s - 0.5;
                let w = (-z * d).exp();
                let (mut p, mut dp) = (ZERO, ZERO);
                for &v in self.phi.values().iter().rev() {
                    dp = dp * w + p;
                    p = p * w + v;
                }
                let e = (-z * a0).exp();
                -e * (d * exprel(-z * d) * (a0 * p + d * w * dp) + d * d * exprel_moment(-z * d) * p)
            }
        }
    }
}

fn uniform_grid(a0: f64, d: f64, values: Vec<Complex64>) -> Result<GridFunction> {
    let bps = (0..=values.len()).map(|k| a0 + k as f64 * d).collect();
    GridFunction::new(bps, values)
}

/// The part of `phi` on `[a, b)`, if any.
fn restrict(phi: &GridFunction, a: f64, b: f64) -> Option<GridFunction> {
    let mut bps = Vec::new();
    let mut vals = Vec::new();
    for (l, h, v) in phi.cells() {
        let (l2, h2) = (l.max(a), h.min(b));
        if h2 > l2 {
            if bps.last() != Some(&l2) {
                if !bps.is_empty() {
                    // gap: keep zero cell
                    vals.push(ZERO);
                }
                bps.push(l2);
            }
            bps.push(h2);
            vals.push(v);
        }
    }
    if vals.is_empty() {
        None
    } else {
        GridFunction::new(bps, vals).ok()
    }
}

/// Per-cell Gauss points on the ramp of `Theta` with the factor
/// `dbar Theta / (G E_N)` at each.
#[derive(Clone, Debug)]
struct RampCell {
    index: usize,
    points: [Complex64; 4],
    factors: [Complex64; 4],
}

/// Output of one application of `T_N`.
#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Density of `T_N f` on `[log N, log N + xi_span]`.
    pub next: GridFunction,
    /// The Dirichlet polynomial built from the input density.
    pub f_step: DirichletPolynomial,
    /// `max |T_N f - Phi|` and derivative gaps at the zeros, via the
    /// re-expanded density before the truncation correction.
    pub interp_residual: f64,
    /// Norm of the correction restoring `Lap(next) = Phi` on the zeros
    /// after the density is cut at `log N + xi_span`.
    pub anchor_norm: f64,
    /// `max |dbar T_N f| / max |dbar(Theta Phi)|` at probe cell centres.
    pub analyticity_residual: f64,
    pub input_norm: f64,
    pub output_norm: f64,
}

/// `T_N f = Theta Phi - G E_N u` with `dbar u = dbar(Theta Phi)/(G E_N)`,
/// acting on densities supported in `[log N, log N + xi_span]`.
#[derive(Clone, Debug)]
pub struct TOperator {
    pub n: usize,
    pub space: Space,
    pub theta: CutoffTheta,
    pub inf_g: f64,
    shift: ExponentialShift,
    quad: AreaQuadrature,
    ramp: Vec<RampCell>,
    sigma0: f64,
    line: Vec<(Complex64, f64, f64, Complex64)>,
    a0: f64,
    cell_width: f64,
    n_cells: usize,
    zeros: Vec<(Complex64, u32)>,
    weighted: Option<WeightedGrid>,
    divisors: Option<DivisorTable>,
    /// `eta^j e^{-eta} / j!`, `j < K`, and their jets at the zeros.
    anchor: Vec<GridFunction>,
    anchor_jets: Vec<Vec<Complex64>>,
}

impl TOperator {
    pub fn new(n: usize, g: ModeG, config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let shift = ExponentialShift::new(n)?;
        let theta = CutoffTheta::new(config.r)?;
        let zeros: Vec<(Complex64, u32)> = match &g {
            ModeG::Blaschke(b) => b.zeros().points().iter().map(|p| (p.z(), p.multiplicity)).collect(),
            ModeG::One => Vec::new(),
        };
        let allowed = StripRegion {
            r: config.r - 2.0,
            tau: 0.5,
        };
        for &(z, _) in &zeros {
            if !(z.re > 0.5) || !allowed.contains(z) {
                return Err(Error::SupportViolation {
                    point: z,
                    r: config.r,
                });
            }
        }
        let quad = AreaQuadrature::on_region(theta.support(), config.quad_h)?;
        let (hs, ht) = (quad.h_sigma(), quad.h_t());
        let mut ramp = Vec::new();
        let mut inf_g = f64::INFINITY;
        for i in 0..quad.n_sigma {
            for j in 0..quad.n_t {
                let c = quad.cell_center(i, j);
                let mut points = [ZERO; 4];
                let mut factors = [ZERO; 4];
                let mut any = false;
                let mut k = 0;
                for a in [-GAUSS2, GAUSS2] {
                    for b in [-GAUSS2, GAUSS2] {
                        let w = c + Complex64::new(a * hs, b * ht);
                        let db = theta.dbar(w);
                        points[k] = w;
                        if db != ZERO {
                            let gv = g.eval(w)?;
                            inf_g = inf_g.min(gv.norm());
                            factors[k] = db / (gv * shift.eval(w));
                            any = true;
                        }
                        k += 1;
                    }
                }
                if any {
                    ramp.push(RampCell {
                        index: i * quad.n_t + j,
                        points,
                        factors,
                    });
                }
            }
        }
        if inf_g < DIVISOR_THRESHOLD {
            return Err(Error::DivisorTooSmall {
                inf: inf_g,
                threshold: DIVISOR_THRESHOLD,
            });
        }
        let sigma0 = 0.5 + config.h_line;
        let nt = (config.t_max / config.dt).round() as i64;
        let mut line = Vec::with_capacity(2 * nt as usize + 1);
        for k in -nt..=nt {
            let t = k as f64 * config.dt;
            let s = Complex64::new(sigma0, t);
            let w = if k.abs() == nt { 0.5 } else { 1.0 } * config.dt;
            let th = theta.eval(s).value;
            let ge = g.eval(s)? * shift.eval(s);
            line.push((s, w, th, ge));
        }
        let a0 = (n as f64).ln();
        let n_cells = (config.xi_span / config.cell_width).round().max(1.0) as usize;
        let xi_end = a0 + n_cells as f64 * config.cell_width;
        let (weighted, divisors) = match config.alpha {
            Space::H2 => (None, None),
            Space::Dalpha(w) => {
                // the last block may run past xi_end
                let cap = ((xi_end + 1.0).exp().ceil() as usize).max(n + 2);
                let table = DivisorTable::sieve(cap);
                let grid = build_weighted_grid(w, config.gamma, n, xi_end, &table)?;
                let table = DivisorTable::sieve(grid.end() + 1);
                (Some(grid), Some(table))
            }
        };
        let mut op = Self {
            n,
            space: config.alpha,
            theta,
            inf_g,
            shift,
            quad,
            ramp,
            sigma0,
            line,
            a0,
            cell_width: config.cell_width,
            n_cells,
            zeros,
            weighted,
            divisors,
            anchor: Vec::new(),
            anchor_jets: Vec::new(),
        };
        let k: usize = op.zeros.iter().map(|z| z.1 as usize).sum();
        op.anchor = (0..k).map(|j| op.exp_poly(j)).collect::<Result<_>>()?;
        let cols: Vec<Vec<Complex64>> = op
            .anchor
            .iter()
            .map(|f| {
                let ev = DensityEval::new(f);
                op.jets(|s| ev.laplace(s))
            })
            .collect();
        op.anchor_jets = (0..k).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
        Ok(op)
    }

    /// `eta^j e^{-eta} / j!` with `eta = xi - log N`, cell-averaged.
    fn exp_poly(&self, j: usize) -> Result<GridFunction> {
        let a0 = self.a0;
        self.density_from_fn(move |x| {
            let eta = x - a0;
            let mut term = 1.0;
            for i in 1..=j {
                term *= eta / i as f64;
            }
            Complex64::new(term * (-eta).exp(), 0.0)
        })
    }

    /// Values and derivatives up to multiplicity at every zero, in order.
    fn jets(&self, f: impl Fn(Complex64) -> Complex64) -> Vec<Complex64> {
        let mut out = Vec::new();
        for &(z, m) in &self.zeros {
            let radius = 0.5 * (z.re - 0.5).min(0.5);
            out.extend(contour_derivatives(&f, z, m as usize - 1, radius));
        }
        out
    }

    /// Adds the combination of anchor densities that moves the jets of
    /// `Lap(phi)` on the zeros by `delta`.
    fn anchored(&self, phi: GridFunction, delta: Vec<Complex64>) -> Result<(GridFunction, f64)> {
        if self.anchor.is_empty() {
            return Ok((phi, 0.0));
        }
        let c = solve(self.anchor_jets.clone(), delta)
            .ok_or_else(|| Error::invalid("anchor system is singular"))?;
        let values: Vec<Complex64> = (0..phi.num_cells())
            .map(|i| {
                self.anchor
                    .iter()
                    .zip(&c)
                    .map(|(f, w)| f.values()[i] * w)
                    .sum()
            })
            .collect();
        let fix = uniform_grid(self.a0, self.cell_width, values)?;
        let norm = self.density_norm(&fix);
        let out = phi
            .values()
            .iter()
            .zip(fix.values())
            .map(|(a, b)| a + b)
            .collect();
        Ok((uniform_grid(self.a0, self.cell_width, out)?, norm))
    }

    pub fn shift(&self) -> ExponentialShift {
        self.shift
    }

    /// `[log N, log N + xi_span]`.
    pub fn support(&self) -> (f64, f64) {
        (self.a0, self.a0 + self.n_cells as f64 * self.cell_width)
    }

    pub fn divisors(&self) -> Option<&DivisorTable> {
        self.divisors.as_ref()
    }

    /// Density norm in the run's space: `||phi||_2`, or
    /// `(int |phi|^2 (1 + xi^beta))^{1/2}` for `D_alpha`.
    pub fn density_norm(&self, phi: &GridFunction) -> f64 {
        match self.space {
            Space::H2 => phi.norm_l2(),
            Space::Dalpha(w) => phi.norm_dbeta(w.beta()),
        }
    }

    /// Coefficient norm in the run's space.
    pub fn series_norm(&self, f: &DirichletPolynomial) -> Result<f64> {
        match (self.space, &self.divisors) {
            (Space::Dalpha(w), Some(d)) => {
                if f.max_index() > d.max_index() {
                    let big = DivisorTable::sieve(f.max_index());
                    f.norm_dalpha(w, &big)
                } else {
                    f.norm_dalpha(w, d)
                }
            }
            _ => Ok(f.norm_h2()),
        }
    }

    /// The Dirichlet polynomial attached to a density on `[log N, inf)`.
    pub fn coefficients(&self, phi: &GridFunction) -> Result<DirichletPolynomial> {
        match &self.weighted {
            None => build_h2_coefficients(phi, self.n),
            Some(grid) => build_dalpha_coefficients(phi, grid),
        }
    }

    /// Projects a density onto the operator's uniform grid by cell averages.
    pub fn project(&self, phi: &GridFunction) -> Result<GridFunction> {
        let d = self.cell_width;
        let values = (0..self.n_cells)
            .map(|k| {
                let a = self.a0 + k as f64 * d;
                phi.integral(a, a + d) / d
            })
            .collect();
        uniform_grid(self.a0, d, values)
    }

    /// Density cells from a function of `xi`, averaged by 3-point Gauss.
    pub fn density_from_fn(&self, f: impl Fn(f64) -> Complex64) -> Result<GridFunction> {
        let d = self.cell_width;
        let x = (0.6f64).sqrt() * 0.5;
        let values = (0..self.n_cells)
            .map(|k| {
                let c = self.a0 + (k as f64 + 0.5) * d;
                (f(c - x * d) * 5.0 + f(c) * 8.0 + f(c + x * d) * 5.0) / 18.0
            })
            .collect();
        uniform_grid(self.a0, d, values)
    }

    pub fn apply(&self, phi: &GridFunction) -> Result<StepOutput> {
        let f_step = self.coefficients(phi)?;
        let fast = MomentEvaluator::new(&f_step, CLUSTER_WIDTH);
        let lap = DensityEval::new(phi);
        let defect = |s: Complex64| lap.laplace(s) - fast.evaluate(s);

        let mut field = CellField::zero(self.quad.clone());
        for cell in &self.ramp {
            let mut acc = ZERO;
            for k in 0..4 {
                if cell.factors[k] != ZERO {
                    acc += defect(cell.points[k]) * cell.factors[k];
                }
            }
            field.values[cell.index] = acc * 0.25;
        }
        let solver = CauchySolver::new(&field);
        let tf = |s: Complex64, th: f64, ge: Complex64| -> Complex64 {
            let mut v = -ge * solver.eval(s);
            if th != 0.0 {
                v += defect(s) * th;
            }
            v
        };

        // vertical-line inversion, cell by cell
        let d = self.cell_width;
        let c = self.sigma0 - 0.5;
        let mut values = vec![ZERO; self.n_cells];
        for &(s, w, th, ge) in &self.line {
            let value = tf(s, th, ge);
            if value == ZERO {
                continue;
            }
            let z = Complex64::new(c, s.im);
            let mut p = value * w * exprel(z * d) * (z * self.a0).exp() / (2.0 * PI);
            let r = (z * d).exp();
            for v in values.iter_mut() {
                *v += p;
                p *= r;
            }
        }
        let next = uniform_grid(self.a0, d, values)?;

        // interpolation datum at the zeros
        let next_eval = DensityEval::new(&next);
        let gap: Vec<Complex64> = self
            .jets(defect)
            .iter()
            .zip(self.jets(|s| next_eval.laplace(s)))
            .map(|(want, got)| want - got)
            .collect();
        let interp = gap.iter().fold(0.0, |m: f64, g| m.max(g.norm()));
        let (next, anchor_norm) = self.anchored(next, gap)?;

        // Cauchy-Riemann check at a spread of ramp cell centres
        let hs = 0.25 * self.quad.h_sigma().min(self.quad.h_t());
        let stride = (self.ramp.len() / 24).max(1);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for cell in self.ramp.iter().step_by(stride) {
            let (i, j) = (cell.index / self.quad.n_t, cell.index % self.quad.n_t);
            let p = self.quad.cell_center(i, j);
            let full = |s: Complex64| -> Result<Complex64> {
                let th = self.theta.eval(s).value;
                let ge = self.g_times_shift(s)?;
                Ok(tf(s, th, ge))
            };
            let ds = (full(p + hs)? - full(p - hs)?) / (2.0 * hs);
            let iv = Complex64::new(0.0, hs);
            let dt = (full(p + iv)? - full(p - iv)?) / (2.0 * hs);
            let dbar = 0.5 * (ds + Complex64::i() * dt);
            worst = worst.max(dbar.norm());
            scale = scale.max((defect(p) * self.theta.dbar(p)).norm());
        }
        let analyticity_residual = if scale > 0.0 { worst / scale } else { worst };

        Ok(StepOutput {
            input_norm: self.density_norm(phi),
            output_norm: self.density_norm(&next),
            next,
            f_step,
            interp_residual: interp,
            anchor_norm,
            analyticity_residual,
        })
    }

    fn g_times_shift(&self, s: Complex64) -> Result<Complex64> {
        let mut g = ONE;
        for &(z, m) in &self.zeros {
            g *= crate::geometry::blaschke_factor(z, s)?.powu(m);
        }
        Ok(g * self.shift.eval(s))
    }

    /// Random unit-norm density on the operator's support: piecewise-linear
    /// interpolation of uniform complex knots spaced `1/2` apart.
    pub fn random_density(&self, rng: &mut impl Rng) -> Result<GridFunction> {
        let (a, b) = self.support();
        let knots = ((b - a) / 0.5).ceil() as usize + 1;
        let kv: Vec<Complex64> = (0..knots)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let phi = self.density_from_fn(|x| {
            let u = (x - a) / 0.5;
            let k = (u.floor() as usize).min(knots - 2);
            let f = u - k as f64;
            kv[k] * (1.0 - f) + kv[k + 1] * f
        })?;
        let norm = self.density_norm(&phi);
        Ok(phi.scale(Complex64::new(1.0 / norm, 0.0)))
    }

    /// `e^{-(xi - log N)}`, the density of `E_N/(s+1/2)`, at unit norm.
    pub fn exponential_density(&self) -> Result<GridFunction> {
        let a = self.a0;
        let phi = self.density_from_fn(|x| Complex64::new((a - x).exp(), 0.0))?;
        let norm = self.density_norm(&phi);
        Ok(phi.scale(Complex64::new(1.0 / norm, 0.0)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    pub n: usize,
    pub rho: f64,
    pub ratios: Vec<f64>,
}

/// `max ||T_N f|| / ||f||` over the exponential density and `trials - 1`
/// random ones.
pub fn estimate_contraction(op: &TOperator, trials: usize, seed: u64) -> Result<ContractionEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(trials);
    for k in 0..trials.max(1) {
        let phi = if k == 0 {
            op.exponential_density()?
        } else {
            op.random_density(&mut rng)?
        };
        let out = op.apply(&phi)?;
        ratios.push(out.output_norm / out.input_norm);
    }
    let rho = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ContractionEstimate {
        n: op.n,
        rho,
        ratios,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub j: usize,
    /// `||f_j||` on the density side.
    pub density_norm: f64,
    /// `||F_j||` in the target space.
    pub series_norm: f64,
    pub abs_at_three_halves: f64,
    /// `||f_{j+1}|| / ||f_j||`.
    pub step_ratio: f64,
    pub interp_residual: f64,
    pub analyticity_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub sigma: f64,
    pub t: f64,
    pub order: u32,
    pub abs: f64,
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationCertificate {
    pub space: Space,
    pub n: usize,
    pub r: f64,
    pub n_search: Vec<ContractionEstimate>,
    /// Largest sampled `||T_N f|| / ||f||`, including the run's own steps
    /// from `j >= 1`.
    pub rho_hat: f64,
    pub rho_target_met: bool,
    pub inf_g: f64,
    pub theta_max_gradient: f64,
    /// `||f_0||` on the density side and `sqrt(2 pi)` times it.
    pub f0_density_norm: f64,
    pub f0_hardy_norm: f64,
    /// `||f_1|| / ||f_0||` for interpolation runs, where `f_0` is not in
    /// `E_N H^2`.
    pub first_step_ratio: Option<f64>,
    pub records: Vec<IterationRecord>,
    pub series_norm: f64,
    pub sum_of_norms: f64,
    pub norm_cap: f64,
    pub residuals: Vec<PointResidual>,
    pub max_relative_residual: f64,
    pub nontriviality_head: Option<f64>,
    pub nontriviality_tail: Option<f64>,
    pub geometric_decay: bool,
    pub vanishing_ok: bool,
    pub nontrivial_ok: bool,
    pub certified: bool,
}

impl IterationCertificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Result of a construction: the series and its certificate.
#[derive(Clone, Debug)]
pub struct Construction {
    pub series: DirichletPolynomial,
    pub cert: IterationCertificate,
    pub parts: Vec<DirichletPolynomial>,
}

fn mode_g(seq: &PointSequence) -> ModeG {
    if seq.is_empty() {
        ModeG::One
    } else {
        ModeG::Blaschke(BlaschkeProduct::new(seq.clone()))
    }
}

/// Doubling search for `N` with `rho_hat(N) < rho_target`.
fn search_n(
    g: &ModeG,
    config: &RunConfig,
    start: usize,
) -> Result<(TOperator, Vec<ContractionEstimate>)> {
    let mut n = start;
    let mut history = Vec::new();
    loop {
        let op = TOperator::new(n, g.clone(), config)?;
        let est = estimate_contraction(&op, config.trials, config.seed)?;
        let rho = est.rho;
        history.push(est);
        if rho < config.rho_target {
            return Ok((op, history));
        }
        if n * 2 > config.n_cap {
            if rho < 1.0 {
                return Ok((op, history));
            }
            return Err(Error::NoContraction {
                rho,
                n,
                n_cap: config.n_cap,
            });
        }
        n *= 2;
    }
}

/// Taylor coefficients in `y = z + 1` of `prod (z - z_k)^{m_k}`, `z = s - 1/2`.
fn shifted_product(seq: &PointSequence) -> Vec<Complex64> {
    let mut q = vec![ONE];
    for p in seq.points() {
        let root = p.z() - 0.5 + 1.0;
        for _ in 0..p.multiplicity {
            let mut next = vec![ZERO; q.len() + 1];
            for (i, &c) in q.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * root;
            }
            q = next;
        }
    }
    q
}

/// Density of `f_0 = E_N prod (s - s_k)^{m_k} / (s + 1/2)^{K+1}` on the
/// working grid, with its lower `K` polynomial coefficients adjusted so the
/// truncated, cell-averaged density still vanishes on `seq`.
fn initial_density(op: &TOperator, seq: &PointSequence) -> Result<GridFunction> {
    let q = shifted_product(seq);
    let kk = q.len() - 1;
    let lead = op.exp_poly(kk)?;
    let mut values: Vec<Complex64> = lead.values().iter().map(|v| v * q[0]).collect();
    for j in 0..kk {
        for (v, b) in values.iter_mut().zip(op.anchor[j].values()) {
            *v += q[kk - j] * b;
        }
    }
    let f0 = uniform_grid(op.a0, op.cell_width, values)?;
    let ev = DensityEval::new(&f0);
    let gap = op.jets(|s| -ev.laplace(s));
    Ok(op.anchored(f0, gap)?.0)
}

struct Chain {
    parts: Vec<DirichletPolynomial>,
    records: Vec<IterationRecord>,
    observed: f64,
}

fn run_chain(op: &TOperator, f0: GridFunction, config: &RunConfig) -> Result<Chain> {
    let three_halves = Complex64::new(1.5, 0.0);
    let mut parts = Vec::new();
    let mut records = Vec::new();
    let mut observed: f64 = 0.0;
    let mut phi = f0;
    let first_norm = op.density_norm(&phi);
    for j in 0..config.max_iter {
        let out = op.apply(&phi)?;
        let series_norm = op.series_norm(&out.f_step)?;
        let ratio = if out.input_norm > 0.0 {
            out.output_norm / out.input_norm
        } else {
            0.0
        };
        if j >= 1 {
            observed = observed.max(ratio);
        }
        records.push(IterationRecord {
            j,
            density_norm: out.input_norm,
            series_norm,
            abs_at_three_halves: out.f_step.evaluate(three_halves).norm(),
            step_ratio: ratio,
            interp_residual: out.interp_residual,
            analyticity_residual: out.analyticity_residual,
        });
        parts.push(out.f_step);
        if out.output_norm < config.eps_stop * first_norm || out.output_norm == 0.0 {
            break;
        }
        phi = out.next;
    }
    Ok(Chain {
        parts,
        records,
        observed,
    })
}

fn sum_parts(parts: &[DirichletPolynomial]) -> DirichletPolynomial {
    let mut total = DirichletPolynomial::zero();
    for p in parts {
        total.add_assign(p);
    }
    total
}

fn residuals(
    seq: &PointSequence,
    series: &DirichletPolynomial,
    target: Option<&dyn Fn(Complex64, u32) -> Complex64>,
    scale: f64,
) -> Vec<PointResidual> {
    let mut out = Vec::new();
    for p in seq.points() {
        for order in 0..p.multiplicity {
            let mut v = series.evaluate_derivative(p.z(), order);
            if let Some(f) = target {
                v -= f(p.z(), order);
            }
            out.push(PointResidual {
                sigma: p.sigma(),
                t: p.t,
                order,
                abs: v.norm(),
                relative: if scale > 0.0 { v.norm() / scale } else { v.norm() },
            });
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn certify(
    op: &TOperator,
    history: Vec<ContractionEstimate>,
    chain: &Chain,
    series: &DirichletPolynomial,
    residuals: Vec<PointResidual>,
    f0_norm: f64,
    first_step_ratio: Option<f64>,
    nontrivial: Option<(f64, f64)>,
    config: &RunConfig,
) -> Result<IterationCertificate> {
    let sampled = history.last().map_or(0.0, |e| e.rho);
    let rho_hat = sampled.max(chain.observed);
    let norms: Vec<f64> = chain.records.iter().map(|r| r.series_norm).collect();
    let mut geometric = rho_hat < 1.0;
    for j in 1..norms.len().saturating_sub(1) {
        if norms[j + 1] > rho_hat * norms[j] * 1.1 {
            geometric = false;
        }
    }
    let series_norm = op.series_norm(series)?;
    let sum_of_norms: f64 = norms.iter().sum();
    let norm_cap = if rho_hat < 1.0 {
        norms.first().copied().unwrap_or(0.0) / (1.0 - rho_hat)
    } else {
        f64::INFINITY
    };
    let max_rel = residuals.iter().fold(0.0, |m: f64, r| m.max(r.relative));
    let vanishing_ok = max_rel <= config.eps_vanish;
    let nontrivial_ok = nontrivial.map_or(true, |(h, t)| h > t);
    let rho_target_met = rho_hat < config.rho_target;
    Ok(IterationCertificate {
        space: op.space,
        n: op.n,
        r: config.r,
        n_search: history,
        rho_hat,
        rho_target_met,
        inf_g: op.inf_g,
        theta_max_gradient: op.theta.max_gradient,
        f0_density_norm: f0_norm,
        f0_hardy_norm: (2.0 * PI).sqrt() * f0_norm,
        first_step_ratio,
        records: chain.records.clone(),
        series_norm,
        sum_of_norms,
        norm_cap,
        residuals,
        max_relative_residual: max_rel,
        nontriviality_head: nontrivial.map(|x| x.0),
        nontriviality_tail: nontrivial.map(|x| x.1),
        geometric_decay: geometric,
        vanishing_ok,
        nontrivial_ok,
        certified: rho_target_met && geometric && vanishing_ok && nontrivial_ok,
    })
}

/// A nontrivial Dirichlet series vanishing on `seq` (with multiplicity).
///
/// Starts from `f_0 = E_N prod (s - s_k)^{m_k} / (s + 1/2)^{K+1}`, `K` the
/// total multiplicity, whose density is `e^{-eta}` times a polynomial in
/// `eta = xi - log N`; for an empty sequence this is `E_N/(s + 1/2)` and no
/// correction is needed.
pub fn construct_vanishing(seq: &PointSequence, config: &RunConfig) -> Result<Construction> {
    config.validate()?;
    let g = mode_g(seq);
    let mut start = config.n_start;
    loop {
        let (op, history) = search_n(&g, config, start)?;
        let f0 = initial_density(&op, seq)?;
        let f0_norm = op.density_norm(&f0);
        let chain = if seq.is_empty() {
            let f_step = op.coefficients(&f0)?;
            Chain {
                records: vec![IterationRecord {
                    j: 0,
                    density_norm: f0_norm,
                    series_norm: op.series_norm(&f_step)?,
                    abs_at_three_halves: f_step.evaluate(Complex64::new(1.5, 0.0)).norm(),
                    step_ratio: 0.0,
                    interp_residual: 0.0,
                    analyticity_residual: 0.0,
                }],
                parts: vec![f_step],
                observed: 0.0,
            }
        } else {
            run_chain(&op, f0, config)?
        };
        let series = sum_parts(&chain.parts);
        let scale = op.series_norm(&series)?;
        let res = residuals(seq, &series, None, scale);
        let head = chain.records[0].abs_at_three_halves;
        let tail: f64 = chain.records[1..].iter().map(|r| r.abs_at_three_halves).sum();
        if head <= tail {
            if op.n * 2 <= config.n_cap {
                start = op.n * 2;
                continue;
            }
            return Err(Error::NontrivialityFailed { n: op.n, head, tail });
        }
        let cert = certify(
            &op,
            history,
            &chain,
            &series,
            res,
            f0_norm,
            None,
            Some((head, tail)),
            config,
        )?;
        return Ok(Construction {
            series,
            cert,
            parts: chain.parts,
        });
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0, |m: f64, v| m.max(v.norm()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() <= 1e-10 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = vec![ZERO; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Some(x)
}

/// Dirichlet polynomial on `K` consecutive indices matching the given
/// values and derivatives at the sequence points.
fn finite_interpolant(
    seq: &PointSequence,
    values: &[Vec<Complex64>],
    max_first: usize,
) -> Result<DirichletPolynomial> {
    let k: usize = seq.total_multiplicity() as usize;
    if k == 0 {
        return Ok(DirichletPolynomial::zero());
    }
    let mut rhs = Vec::with_capacity(k);
    for v in values {
        rhs.extend_from_slice(v);
    }
    for first in 1..=max_first.max(1) {
        let mut rows = Vec::with_capacity(k);
        for p in seq.points() {
            for order in 0..p.multiplicity {
                let row = (first..first + k)
                    .map(|n| {
                        let ln = (n as f64).ln();
                        (-ln).powi(order as i32) * (-p.z() * ln).exp()
                    })
                    .collect();
                rows.push(row);
            }
        }
        if let Some(x) = solve(rows, rhs.clone()) {
            return Ok(DirichletPolynomial::new(first, x));
        }
    }
    Err(Error::invalid("no well-conditioned finite interpolant found"))
}

/// A Dirichlet series agreeing with the Laplace transform of `target` on
/// `seq` (with multiplicity).
///
/// The density below `log N` is discretised by the unit grid and its defect
/// at the points is absorbed by a `K`-term Dirichlet polynomial; the part on
/// `[log N, log N + xi_span]` is averaged onto the working grid and corrected
/// by the `T_N` chain. Density beyond `log N + xi_span` is dropped.
pub fn interpolate_on_sequence(
    seq: &PointSequence,
    target: &GridFunction,
    config: &RunConfig,
) -> Result<Construction> {
    config.validate()?;
    if target.start() < 0.0 {
        return Err(Error::SupportMismatch {
            log_n: 0.0,
            support_start: target.start(),
        });
    }
    let g = mode_g(seq);
    let (op, history) = search_n(&g, config, config.n_start)?;
    let (a0, _) = op.support();
    let lo = restrict(target, target.start(), a0);
    let mut head = DirichletPolynomial::zero();
    let mut lo_defect: Vec<Vec<Complex64>> = Vec::new();
    if let Some(lo) = &lo {
        let q = build_h2_coefficients(lo, 1)?;
        for p in seq.points() {
            let radius = 0.5 * (p.z().re - 0.5).min(0.5);
            let d = contour_derivatives(
                |s| lo.laplace_transform(s) - q.evaluate(s),
                p.z(),
                p.multiplicity as usize - 1,
                radius,
            );
            lo_defect.push(d);
        }
        head.add_assign(&q);
        head.add_assign(&finite_interpolant(seq, &lo_defect, 8)?);
    }
    let f0 = op.project(target)?;
    let f0_norm = op.density_norm(&f0);
    let chain = if f0.is_zero() {
        Chain {
            parts: Vec::new(),
            records: Vec::new(),
            observed: 0.0,
        }
    } else {
        run_chain(&op, f0, config)?
    };
    let first_step_ratio = chain.records.first().map(|r| r.step_ratio);
    let mut parts = vec![head];
    parts.extend(chain.parts.iter().cloned());
    let series = sum_parts(&parts);
    let target_norm = op.density_norm(target);
    let tgt = |s: Complex64, order: u32| -> Complex64 {
        match order {
            0 => target.laplace_transform(s),
            1 => target.laplace_derivative(s),
            _ => {
                let radius = 0.5 * (s.re - 0.5).min(0.5);
                contour_derivatives(|w| target.laplace_transform(w), s, order as usize, radius)
                    [order as usize]
            }
        }
    };
    let res = residuals(seq, &series, Some(&tgt), target_norm);
    let cert = certify(
        &op,
        history,
        &chain,
        &series,
        res,
        f0_norm,
        first_step_ratio,
        None,
        config,
    )?;
    Ok(Construction {
        series,
        cert,
        parts,
    })
}

/// `s -> B_disk(2^{-s})` with disk zeros `2^{-s_j}`: bounded by 1 on
/// `Re s > 0` and vanishing exactly on the sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct HInftyVanishing {
    zeros: Vec<(Complex64, u32)>,
}

impl HInftyVanishing {
    pub fn disk_zeros(&self) -> &[(Complex64, u32)] {
        &self.zeros
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let z = (-s * std::f64::consts::LN_2).exp();
        let mut acc = ONE;
        for &(a, m) in &self.zeros {
            acc *= ((z - a) / (1.0 - a.conj() * z)).powu(m);
        }
        acc
    }
}

/// Points are taken in `Re s > 0`, via `sigma = 1/2 + depth`.
pub fn construct_hinfty_vanishing(seq: &PointSequence) -> Result<HInftyVanishing> {
    let zeros = seq
        .points()
        .iter()
        .map(|p| ((-p.z() * std::f64::consts::LN_2).exp(), p.multiplicity))
        .collect();
    Ok(HInftyVanishing { zeros })
}
