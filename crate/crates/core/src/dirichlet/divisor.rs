use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::Accumulator;

/// The divisor-counting function `d(n)` for `1 <= n <= M`, built by a sieve.
#[derive(Clone, Debug)]
pub struct DivisorTable {
    values: Vec<u32>,
}

impl DivisorTable {
    /// `O(M log M)` sieve: every `k` bumps each of its multiples.
    pub fn sieve(max_index: usize) -> Self {
        let mut values = vec![0u32; max_index + 1];
        for k in 1..=max_index {
            let mut m = k;
            while m <= max_index {
                values[m] += 1;
                m += k;
            }
        }
        Self { values }
    }

    pub fn max_index(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    /// `d(n)`; panics outside `1..=max_index`.
    pub fn get(&self, n: usize) -> u32 {
        assert!(n >= 1 && n < self.values.len(), "d({n}) outside table");
        self.values[n]
    }

    pub fn is_prime(&self, n: usize) -> bool {
        self.get(n) == 2
    }
}

/// The parameter `alpha` of `D_alpha`; `Infinite` restricts support to 1 and the primes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpaceWeight {
    Finite(f64),
    Infinite,
}

impl SpaceWeight {
    pub fn finite(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha = {alpha} must be finite and >= 0")));
        }
        Ok(SpaceWeight::Finite(alpha))
    }

    /// `2^{-alpha}`, zero for `alpha = inf`.
    pub fn two_pow_neg_alpha(&self) -> f64 {
        match *self {
            SpaceWeight::Finite(a) => (-a).exp2(),
            SpaceWeight::Infinite => 0.0,
        }
    }

    /// `beta = 1 - 2^{-alpha}`, the weighted Dirichlet-space index.
    pub fn beta(&self) -> f64 {
        1.0 - self.two_pow_neg_alpha()
    }

    /// `d^{-alpha}`; for `alpha = inf` the limit normalised so that 1 and
    /// the primes keep unit weight.
    pub fn inverse_weight(&self, d: u32) -> f64 {
        match *self {
            SpaceWeight::Finite(a) => (d as f64).powf(-a),
            SpaceWeight::Infinite => {
                if d <= 2 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DivisorSumReport {
    pub m: u64,
    pub partial_sum: f64,
    pub normalized_ratio: f64,
}

fn normalize(weight: SpaceWeight, m: u64, partial_sum: f64) -> DivisorSumReport {
    let mf = m as f64;
    let exponent = weight.two_pow_neg_alpha() - 1.0;
    DivisorSumReport {
        m,
        partial_sum,
        normalized_ratio: partial_sum / (mf * mf.ln().powf(exponent)),
    }
}

/// `sum_{n <= M} d(n)^{-alpha}` from the table, normalised by `M (log M)^{2^{-alpha} - 1}`.
pub fn divisor_sum_asymptotic(
    weight: SpaceWeight,
    m: usize,
    divisors: &DivisorTable,
) -> Result<DivisorSumReport> {
    if m < 3 {
        return Err(Error::invalid(format!("M = {m} must be at least 3")));
    }
    if m > divisors.max_index() {
        return Err(Error::invalid(format!(
            "divisor table covers n <= {}, need {m}",
            divisors.max_index()
        )));
    }
    let mut acc = Accumulator::new();
    for n in 1..=m {
        acc.add(weight.inverse_weight(divisors.get(n)));
    }
    Ok(normalize(weight, m as u64, acc.value()))
}

fn isqrt(x: u64) -> u64 {
    let mut r = (x as f64).sqrt() as u64;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r
}

/// Prime counts `pi(v)` for every distinct `v = floor(x / i)` (Lucy's method).
struct PrimeCounts {
    x: u64,
    root: u64,
    small: Vec<u64>,
    large: Vec<u64>,
}

impl PrimeCounts {
    fn new(x: u64) -> Self {
        let root = isqrt(x);
        // small[v] = pi(v) for v <= root, large[i] = pi(x / i) for i <= root.
        let mut small: Vec<u64> = (0..=root).map(|v| v.saturating_sub(1)).collect();
        let mut large: Vec<u64> = (0..=root)
            .map(|i| if i == 0 { 0 } else { (x / i).saturating_sub(1) })
            .collect();
        for p in 2..=root {
            if small[p as usize] == small[p as usize - 1] {
                continue;
            }
            let below = small[p as usize - 1];
            let p2 = p * p;
            let big_limit = root.min(x / p2);
            for i in 1..=big_limit {
                let d = i * p;
                let sub = if d <= root {
                    large[d as usize]
                } else {
                    small[(x / d) as usize]
                };
                large[i as usize] -= sub - below;
            }
            if p2 <= root {
                for v in (p2..=root).rev() {
                    small[v as usize] -= small[(v / p) as usize] - below;
                }
            }
        }
        Self {
            x,
            root,
            small,
            large,
        }
    }

    fn get(&self, v: u64) -> u64 {
        if v <= self.root {
            self.small[v as usize]
        } else {
            self.large[(self.x / v) as usize]
        }
    }
}

/// Number of primes `<= x`.
pub fn prime_count(x: u64) -> u64 {
    if x < 2 {
        return 0;
    }
    PrimeCounts::new(x).get(x)
}

fn small_primes(limit: u64) -> Vec<u64> {
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    for p in 2..=limit {
        if !composite[p] {
            primes.push(p as u64);
            let mut m = p * p;
            while m <= limit {
                composite[m] = true;
                m += p;
            }
        }
    }
    primes
}

/// `sum_{n <= x} d(n)^{-alpha}` without a table, by the min_25 sieve for the
/// multiplicative function `n -> d(n)^{-alpha}` (`O(x^{3/4})`).
///
/// For `alpha = inf` this is `1 + pi(x)`.
pub fn divisor_power_sum(weight: SpaceWeight, x: u64) -> DivisorSumReport {
    let counts = PrimeCounts::new(x.max(1));
    let total = match weight {
        SpaceWeight::Infinite => 1.0 + if x >= 2 { counts.get(x) as f64 } else { 0.0 },
        SpaceWeight::Finite(alpha) => {
            let primes = small_primes(isqrt(x));
            let f_prime_power = |e: u32| ((e + 1) as f64).powf(-alpha);
            let fp = f_prime_power(1);
            // Sum of f(n) over 2 <= n <= v whose least prime factor is >= primes[k].
            fn rec(
                v: u64,
                k: usize,
                primes: &[u64],
                counts: &PrimeCounts,
                fp: f64,
                f: &dyn Fn(u32) -> f64,
            ) -> f64 {
                let pi_v = if v >= 2 { counts.get(v) } else { 0 };
                if pi_v <= k as u64 {
                    return 0.0;
                }
                let mut acc = fp * (pi_v - k as u64) as f64;
                for (i, &p) in primes.iter().enumerate().skip(k) {
                    if p * p > v {
                        break;
                    }
                    let mut pe = p;
                    let mut e = 1u32;
                    while pe * p <= v {
                        acc += f(e) * rec(v / pe, i + 1, primes, counts, fp, f) + f(e + 1);
                        pe *= p;
                        e += 1;
                    }
                }
                acc
            }
            if x == 0 {
                0.0
            } else {
                1.0 + rec(x, 0, &primes, &counts, fp, &f_prime_power)
            }
        }
    };
    if x < 3 {
        return DivisorSumReport {
            m: x,
            partial_sum: total,
            normalized_ratio: f64::NAN,
        };
    }
    normalize(weight, x, total)
}
