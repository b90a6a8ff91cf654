//! Exact `H^p` norms of Dirichlet polynomials for dyadic `p` and the
//! embeddings `D_alpha -> H^p`.

use serde::{Deserialize, Serialize};

use crate::dirichlet::{DirichletPolynomial, DivisorTable, SpaceWeight};
use crate::error::{Error, Result};
use crate::geometry::{blaschke_condition, carleson_condition, cone_aperture, ConditionReport, PointSequence};

/// Largest coefficient index a convolution power may reach.
pub const COEFFICIENT_CAP: usize = 1_000_000;

fn dyadic_log(exponent: u32) -> Result<u32> {
    if exponent < 2 || !exponent.is_power_of_two() {
        return Err(Error::invalid(format!(
            "exponent {exponent} is not 2^m with m >= 1"
        )));
    }
    Ok(exponent.trailing_zeros())
}

/// `f^{2^k}` by repeated squaring, refusing to pass `cap`.
pub fn dyadic_power(f: &DirichletPolynomial, k: u32, cap: usize) -> Result<DirichletPolynomial> {
    let mut g = f.clone();
    for _ in 0..k {
        if g.is_zero() {
            break;
        }
        let needed = (g.max_index() as u128) * (g.max_index() as u128);
        if needed > cap as u128 {
            return Err(Error::IndexOverflow { needed, cap });
        }
        g = g.convolve(&g);
    }
    Ok(g)
}

/// `lim (1/T) int_0^T |f(it)|^p dt` to the power `1/p`, for `p = 2^m`.
///
/// The mean of `|g|^2` over a vertical line is `sum |b_n|^2`, so
/// `||f||_p^p = ||f^{p/2}||_2^2`.
pub fn hp_norm_even(f: &DirichletPolynomial, exponent: u32) -> Result<f64> {
    hp_norm_even_capped(f, exponent, COEFFICIENT_CAP)
}

pub fn hp_norm_even_capped(f: &DirichletPolynomial, exponent: u32, cap: usize) -> Result<f64> {
    let m = dyadic_log(exponent)?;
    let g = dyadic_power(f, m - 1, cap)?;
    Ok(g.norm_h2().powf(2.0 / exponent as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCheck {
    pub alpha: u32,
    pub exponent: u32,
    /// `||f||_{2^{alpha+1}}`.
    pub lhs: f64,
    /// `||f||_{D_alpha}`.
    pub rhs: f64,
    pub ok: bool,
}

/// Compares `||f||_{2^{alpha+1}}` with `||f||_{D_alpha}`.
pub fn verify_contractive_embedding(f: &DirichletPolynomial, alpha: u32) -> Result<EmbeddingCheck> {
    if alpha > 4 {
        return Err(Error::invalid(format!("alpha = {alpha} needs exponent beyond 2^5")));
    }
    let exponent = 1u32 << (alpha + 1);
    let lhs = hp_norm_even(f, exponent)?;
    let divisors = DivisorTable::sieve(f.max_index().max(1));
    let rhs = f.norm_dalpha(SpaceWeight::Finite(alpha as f64), &divisors)?;
    Ok(EmbeddingCheck {
        alpha,
        exponent,
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-12 * rhs,
    })
}

/// `p = 2^{[alpha]+2} / (2 + [alpha] - alpha)`.
pub fn embedding_exponent(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha = {alpha} must be positive and finite")));
    }
    let k = alpha.floor();
    Ok(2f64.powf(k + 2.0) / (2.0 + k - alpha))
}

/// `||f||_4 / ||f||_{D_inf}` for a polynomial supported on 1 and the primes.
pub fn dinfty_h4_ratio(f: &DirichletPolynomial) -> Result<f64> {
    let divisors = DivisorTable::sieve(f.max_index().max(1));
    let rhs = f.norm_dalpha(SpaceWeight::Infinite, &divisors)?;
    if rhs == 0.0 {
        return Ok(0.0);
    }
    Ok(hp_norm_even(f, 4)? / rhs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeCheck {
    pub t0: f64,
    pub aperture: f64,
    /// Aperture needed by the first half of the sequence.
    pub head_aperture: f64,
    /// The second half stays inside the head's cone.
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpCriterion {
    pub p: f64,
    /// `1 - 2^{-2 + 4/p}`.
    pub beta_needed: f64,
    pub carleson: ConditionReport,
    pub blaschke: ConditionReport,
    pub cone: Option<ConeCheck>,
    pub certified_by_carleson: bool,
    pub certified_by_cone: bool,
}

impl HpCriterion {
    pub fn certified(&self) -> bool {
        self.certified_by_carleson || self.certified_by_cone
    }
}

/// Vertex `t0` minimising the cone aperture, by ternary search on the
/// convex function `t0 -> max |t_j - t0| / depth_j`.
fn best_vertex(seq: &PointSequence) -> f64 {
    let (mut lo, mut hi) = seq
        .points()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.t), b.max(p.t)));
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if cone_aperture(seq, m1) <= cone_aperture(seq, m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

/// Sufficient conditions for a nontrivial `H^p` function, `2 < p < 4`,
/// vanishing on `seq`.
pub fn zero_criterion_for_hp(seq: &PointSequence, p: f64) -> Result<HpCriterion> {
    if !(p > 2.0 && p < 4.0) {
        return Err(Error::invalid(format!("p = {p} must lie in (2, 4)")));
    }
    let beta_needed = 1.0 - 2f64.powf(-2.0 + 4.0 / p);
    let carleson = carleson_condition(seq, beta_needed)?;
    let blaschke = blaschke_condition(seq);
    let cone = (!seq.is_empty()).then(|| {
        let t0 = best_vertex(seq);
        let aperture = cone_aperture(seq, t0);
        let half = seq.len().div_ceil(2);
        let head = PointSequence::new(seq.points()[..half].to_vec())
            .expect("prefix of a valid sequence");
        let head_aperture = cone_aperture(&head, t0);
        ConeCheck {
            t0,
            aperture,
            head_aperture,
            stable: aperture <= head_aperture * (1.0 + 1e-12),
        }
    });
    let certified_by_carleson = carleson.satisfied && !carleson.growth.divergence_suspected;
    let certified_by_cone = cone.as_ref().is_some_and(|c| c.stable)
        && blaschke.satisfied
        && !blaschke.growth.divergence_suspected;
    Ok(HpCriterion {
        p,
        beta_needed,
        carleson,
        blaschke,
        cone,
        certified_by_carleson,
        certified_by_cone,
    })
}
