//! Half-plane geometry on `Re s > 1/2`: point sequences, the rectangles
//! `Omega(R, tau)`, Blaschke products and the zero-set criteria for the
//! weighted Dirichlet spaces `D_beta`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::Accumulator;

const HALF: f64 = 0.5;

/// One point `sigma + i t` of a zero sequence, repeated `multiplicity` times.
///
/// The distance to the boundary line, `depth = sigma - 1/2`, is stored
/// directly so that points like `1/2 + e^{-49}` survive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeqPoint {
    pub depth: f64,
    pub t: f64,
    pub multiplicity: u32,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<f64>,
    t: f64,
    #[serde(default = "one")]
    multiplicity: u32,
}

fn one() -> u32 {
    1
}

impl Serialize for SeqPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let sigma = self.sigma();
        let lossy = sigma - HALF != self.depth;
        RawPoint {
            sigma: Some(sigma),
            depth: lossy.then_some(self.depth),
            t: self.t,
            multiplicity: self.multiplicity,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SeqPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawPoint::deserialize(d)?;
        let depth = match (raw.depth, raw.sigma) {
            (Some(depth), _) => depth,
            (None, Some(sigma)) => sigma - HALF,
            (None, None) => return Err(serde::de::Error::missing_field("sigma")),
        };
        Ok(SeqPoint {
            depth,
            t: raw.t,
            multiplicity: raw.multiplicity,
        })
    }
}

impl SeqPoint {
    pub fn new(sigma: f64, t: f64, multiplicity: u32) -> Self {
        Self {
            depth: sigma - HALF,
            t,
            multiplicity,
        }
    }

    pub fn simple(sigma: f64, t: f64) -> Self {
        Self::new(sigma, t, 1)
    }

    /// The point `1/2 + depth + i t`.
    pub fn at_depth(depth: f64, t: f64) -> Self {
        Self {
            depth,
            t,
            multiplicity: 1,
        }
    }

    pub fn sigma(&self) -> f64 {
        HALF + self.depth
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.sigma(), self.t)
    }
}

/// A finite sequence in `Re s > 1/2`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PointSequence {
    points: Vec<SeqPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceBounds {
    pub max_sigma: f64,
    pub max_abs_t: f64,
}

impl PointSequence {
    pub fn new(points: Vec<SeqPoint>) -> Result<Self> {
        for (k, p) in points.iter().enumerate() {
            if !(p.depth > 0.0) || !p.depth.is_finite() || !p.t.is_finite() {
                return Err(Error::invalid(format!(
                    "point {k}: sigma = {}, t = {} is not in Re s > 1/2",
                    p.sigma(),
                    p.t
                )));
            }
            if p.multiplicity == 0 {
                return Err(Error::invalid(format!("point {k}: multiplicity 0")));
            }
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new() }
    }

    pub fn points(&self) -> &[SeqPoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn total_multiplicity(&self) -> u32 {
        self.points.iter().map(|p| p.multiplicity).sum()
    }

    pub fn bounds(&self) -> SequenceBounds {
        SequenceBounds {
            max_sigma: self.points.iter().map(|p| p.sigma()).fold(HALF, f64::max),
            max_abs_t: self.points.iter().map(|p| p.t.abs()).fold(0.0, f64::max),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let points: Vec<SeqPoint> = serde_json::from_str(text)?;
        Self::new(points)
    }
}

impl<'de> Deserialize<'de> for PointSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let points = Vec::<SeqPoint>::deserialize(d)?;
        PointSequence::new(points).map_err(serde::de::Error::custom)
    }
}

/// `Omega(R, tau) = [1/2, 1/2 + tau] x [-R, R]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripRegion {
    pub r: f64,
    pub tau: f64,
}

impl StripRegion {
    pub fn new(r: f64, tau: f64) -> Result<Self> {
        if !(r > 0.0) || !(tau > 0.0) {
            return Err(Error::invalid(format!("Omega(R={r}, tau={tau}) needs R, tau > 0")));
        }
        Ok(Self { r, tau })
    }

    pub fn contains(&self, s: Complex64) -> bool {
        s.re >= HALF && s.re <= HALF + self.tau && s.im.abs() <= self.r
    }

    pub fn area(&self) -> f64 {
        2.0 * self.r * self.tau
    }

    /// Euclidean distance from `s` to the closed rectangle.
    pub fn distance(&self, s: Complex64) -> f64 {
        let dx = if s.re < HALF {
            HALF - s.re
        } else if s.re > HALF + self.tau {
            s.re - HALF - self.tau
        } else {
            0.0
        };
        let dy = (s.im.abs() - self.r).max(0.0);
        dx.hypot(dy)
    }

    pub fn centroid(&self) -> Complex64 {
        Complex64::new(HALF + self.tau / 2.0, 0.0)
    }
}

/// The factor `(s - w) / (s + conj(w) - 1)`, zero at `w` and unimodular on `Re s = 1/2`.
pub fn blaschke_factor(w: Complex64, s: Complex64) -> Result<Complex64> {
    if !(w.re > HALF) {
        return Err(Error::invalid(format!("Blaschke zero {w} not in Re s > 1/2")));
    }
    let den = s + w.conj() - 1.0;
    if den == Complex64::new(0.0, 0.0) {
        return Err(Error::PoleHit { point: s });
    }
    Ok((s - w) / den)
}

/// `phi(s) = (s - 3/2)/(s + 1/2)`, mapping `Re s > 1/2` onto the unit disk.
pub fn disk_map(s: Complex64) -> Result<Complex64> {
    blaschke_factor(Complex64::new(1.5, 0.0), s)
}

/// Finite Blaschke product with zeros (and multiplicities) from a sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct BlaschkeProduct {
    zeros: PointSequence,
}

impl BlaschkeProduct {
    pub fn new(zeros: PointSequence) -> Self {
        Self { zeros }
    }

    pub fn zeros(&self) -> &PointSequence {
        &self.zeros
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        for p in self.zeros.points() {
            let f = blaschke_factor(p.z(), s)?;
            acc *= f.powu(p.multiplicity);
        }
        Ok(acc)
    }

    /// `B'(s)` from the logarithmic derivative where `B(s) != 0`, by the
    /// product rule otherwise.
    pub fn derivative(&self, s: Complex64) -> Result<Complex64> {
        let pts = self.zeros.points();
        let mut total = Complex64::new(0.0, 0.0);
        for (k, p) in pts.iter().enumerate() {
            let w = p.z();
            let den = s + w.conj() - 1.0;
            if den == Complex64::new(0.0, 0.0) {
                return Err(Error::PoleHit { point: s });
            }
            // d/ds of factor^m = m factor^{m-1} * (2 Re w - 1) / den^2
            let factor = (s - w) / den;
            let dfactor = (2.0 * w.re - 1.0) / (den * den);
            let mut term = dfactor * p.multiplicity as f64 * factor.powu(p.multiplicity - 1);
            for (j, q) in pts.iter().enumerate() {
                if j != k {
                    term *= blaschke_factor(q.z(), s)?.powu(q.multiplicity);
                }
            }
            total += term;
        }
        Ok(total)
    }
}

/// A partial sum together with its growth over doubling prefixes.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConditionReport {
    pub sum: f64,
    /// Always true for a finite sequence; see `growth` for the trend.
    pub satisfied: bool,
    pub growth: GrowthReport,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GrowthReport {
    pub prefix_lengths: Vec<usize>,
    pub prefix_sums: Vec<f64>,
    /// Increments `S(2k) - S(k)` over successive doublings.
    pub doubling_increments: Vec<f64>,
    /// Set when the last doubling increment has not shrunk below 3/4 of the previous one.
    pub divergence_suspected: bool,
}

fn growth_report(terms: &[f64]) -> GrowthReport {
    let mut prefix = Vec::with_capacity(terms.len());
    let mut acc = Accumulator::new();
    for &t in terms {
        acc.add(t);
        prefix.push(acc.value());
    }
    let mut prefix_lengths = Vec::new();
    let mut k = 1;
    while k <= terms.len() {
        prefix_lengths.push(k);
        k *= 2;
    }
    if let Some(&last) = prefix_lengths.last() {
        if last != terms.len() {
            prefix_lengths.push(terms.len());
        }
    }
    let prefix_sums: Vec<f64> = prefix_lengths.iter().map(|&k| prefix[k - 1]).collect();
    // Increments only over complete doublings.
    let doubling_increments: Vec<f64> = prefix_lengths
        .windows(2)
        .zip(prefix_sums.windows(2))
        .filter(|(len, _)| len[1] == 2 * len[0])
        .map(|(_, s)| s[1] - s[0])
        .collect();
    let n = doubling_increments.len();
    let divergence_suspected =
        n >= 2 && doubling_increments[n - 1] >= 0.75 * doubling_increments[n - 2];
    GrowthReport {
        prefix_lengths,
        prefix_sums,
        doubling_increments,
        divergence_suspected,
    }
}

fn condition_from_terms(terms: Vec<f64>) -> ConditionReport {
    let growth = growth_report(&terms);
    ConditionReport {
        sum: growth.prefix_sums.last().copied().unwrap_or(0.0),
        satisfied: true,
        growth,
    }
}

fn expand_multiplicity<F: Fn(&SeqPoint) -> f64>(seq: &PointSequence, f: F) -> Vec<f64> {
    seq.points()
        .iter()
        .flat_map(|p| std::iter::repeat(f(p)).take(p.multiplicity as usize))
        .collect()
}

/// `sum_j (sigma_j - 1/2)`.
pub fn blaschke_condition(seq: &PointSequence) -> ConditionReport {
    condition_from_terms(expand_multiplicity(seq, |p| p.depth))
}

/// `sum_j (sigma_j - 1/2)^{1 - beta}`, sufficient for `D_beta` zero sets when `0 < beta < 1`.
pub fn carleson_condition(seq: &PointSequence, beta: f64) -> Result<ConditionReport> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta = {beta} must lie in [0, 1)")));
    }
    Ok(condition_from_terms(expand_multiplicity(seq, |p| {
        p.depth.powf(1.0 - beta)
    })))
}

/// `sum_j |log(sigma_j - 1/2)|^{-1}`, sufficient for `D_1` zero sets.
pub fn shapiro_shields_condition(seq: &PointSequence) -> Result<ConditionReport> {
    for (k, p) in seq.points().iter().enumerate() {
        if p.depth == 1.0 {
            return Err(Error::LogSingular { index: k });
        }
    }
    Ok(condition_from_terms(expand_multiplicity(seq, |p| {
        1.0 / p.depth.ln().abs()
    })))
}

/// Whether every point satisfies `|t_j - t0| <= c (sigma_j - 1/2)`.
pub fn cone_condition(seq: &PointSequence, t0: f64, c: f64) -> bool {
    seq.points()
        .iter()
        .all(|p| (p.t - t0).abs() <= c * p.depth)
}

/// Smallest aperture `c` of a cone at `t0` containing the sequence.
pub fn cone_aperture(seq: &PointSequence, t0: f64) -> f64 {
    seq.points()
        .iter()
        .map(|p| (p.t - t0).abs() / p.depth)
        .fold(0.0, f64::max)
}

/// `s -> f(phi(s)) (s + 1/2)^{beta - 2}`: carries `D_beta(disk)` to `D_beta` of the half-plane.
pub fn conformal_transfer<F>(
    f_disk: F,
    beta: f64,
) -> Result<impl Fn(Complex64) -> Result<Complex64>>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid(format!("beta = {beta} must lie in (0, 1]")));
    }
    Ok(move |s: Complex64| {
        let shifted = s + HALF;
        if shifted == Complex64::new(0.0, 0.0) {
            return Err(Error::PoleHit { point: s });
        }
        let z = disk_map(s)?;
        Ok(f_disk(z) * shifted.powf(beta - 2.0))
    })
}
