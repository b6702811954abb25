//! Binary symmetric channel, the binary adder MAC seen through hard
//! decisions, and the two block-error models that tie code rate, block
//! length, crossover probability and block error probability together.
//!
//! Analytic code paths use the real-valued block length `n = k / R`; the
//! simulator transmits `ceil(k / R)` bits per block.

use std::f64::consts::SQRT_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rlnc::{superpose, BitBlock};

/// ε is kept inside this band whenever the PPV model feeds a simulator or optimizer.
pub const PPV_EPS_FLOOR: f64 = 1e-12;
pub const PPV_EPS_CEIL: f64 = 1.0 - 1e-12;

/// Crossover probability of a BSC, 0 <= p <= 0.5.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Crossover(f64);

impl Crossover {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::Config(format!("crossover probability {p} outside [0, 0.5]")));
        }
        Ok(Self(p))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Flips every bit independently with probability `p`.
pub fn bsc_transmit<R: Rng + ?Sized>(block: &BitBlock, p: Crossover, rng: &mut R) -> BitBlock {
    let mut out = block.clone();
    let p = p.get();
    if p == 0.0 {
        return out;
    }
    for w in out.words_mut() {
        let mut mask = 0u64;
        for i in 0..64 {
            if rng.gen_bool(p) {
                mask |= 1 << i;
            }
        }
        *w ^= mask;
    }
    out.clear_tail();
    out
}

/// What the relay decides after all sources transmit at once: the modulo-2
/// sum of the coded blocks sent through a BSC with crossover `p_mac`.
pub fn adder_mac<R: Rng + ?Sized>(blocks: &[BitBlock], p_mac: Crossover, rng: &mut R) -> Result<BitBlock> {
    Ok(bsc_transmit(&superpose(blocks)?, p_mac, rng))
}

/// Binary entropy in bits.
pub fn entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// BSC capacity 1 - H(p).
pub fn capacity(p: f64) -> f64 {
    1.0 - entropy(p)
}

/// Cutoff rate R0 = -log2(1/2 + sqrt(p(1-p))).
pub fn cutoff_rate(p: f64) -> f64 {
    -(0.5 + (p * (1.0 - p)).sqrt()).log2()
}

/// Block error probability from the union-bound error exponent E(R) = R0 - R,
/// ε = 2^(-n (R0 - R)) with n = k / R.
pub fn block_error_ee(rate: f64, k: f64, p: f64) -> Result<f64> {
    let r0 = cutoff_rate(p);
    if !(rate > 0.0 && rate < r0) {
        return Err(Error::ModelDomain(format!(
            "rate {rate} outside (0, R0 = {r0}) for p = {p}"
        )));
    }
    Ok((-k * (r0 / rate - 1.0)).exp2())
}

/// Gaussian tail probability Q(x).
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

fn ln_q(x: f64) -> f64 {
    if x < 30.0 {
        q_func(x).ln()
    } else {
        // Mills-ratio expansion; erfc underflows long before this loses accuracy.
        let x2 = x * x;
        -0.5 * x2 - x.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2)).ln()
    }
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`q_func`] on (0, 1), by Newton iteration on ln Q inside a
/// shrinking bisection bracket.
pub fn q_inv(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::ModelDomain(format!("Q^-1 argument {y} outside (0, 1)")));
    }
    if y == 0.5 {
        return Ok(0.0);
    }
    if y > 0.5 {
        return Ok(-q_inv(1.0 - y)?);
    }
    let target = y.ln();
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    let mut x = (-2.0 * target).sqrt().min(39.0);
    for _ in 0..200 {
        let h = ln_q(x) - target;
        if h > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let q = if x < 30.0 { q_func(x) } else { ln_q(x).exp() };
        let slope = if q > 0.0 { -std_normal_pdf(x) / q } else { -x };
        let mut next = x - h / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo < 1e-15 {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

fn ppv_dispersion_terms(n: f64, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::ModelDomain(format!(
            "PPV model needs 0 < p < 0.5, got {p}"
        )));
    }
    if !(n >= 1.0) {
        return Err(Error::ModelDomain(format!("PPV model needs n >= 1, got {n}")));
    }
    let spread = (p * (1.0 - p) / n).sqrt() * ((1.0 - p) / p).log2();
    let correction = n.log2() / (2.0 * n);
    Ok((spread, correction))
}

/// Normal-approximation achievable rate at block length `n` and block error `eps`:
/// R = C - sqrt(p(1-p)/n) log2((1-p)/p) Q^-1(ε) + log2(n)/(2n).
///
/// ε is clamped to [1e-12, 1 - 1e-12] before inversion.
pub fn ppv_rate(n: f64, p: f64, eps: f64) -> Result<f64> {
    let (spread, correction) = ppv_dispersion_terms(n, p)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::ModelDomain(format!("block error {eps} outside (0, 1)")));
    }
    let eps = eps.clamp(PPV_EPS_FLOOR, PPV_EPS_CEIL);
    Ok(capacity(p) - spread * q_inv(eps)? + correction)
}

/// Block error probability that [`ppv_rate`] maps to `rate` (not clamped).
pub fn ppv_epsilon(n: f64, p: f64, rate: f64) -> Result<f64> {
    let (spread, correction) = ppv_dispersion_terms(n, p)?;
    Ok(q_func((capacity(p) - rate + correction) / spread))
}

/// Block-error model used to turn (R, k, p) into ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodingModel {
    /// Union-bound random-coding exponent with E(R) = R0 - R; valid for R < R0.
    ErrorExponent,
    /// Finite-blocklength normal approximation, inverted for ε; valid up to
    /// the rate where ε reaches its upper clamp.
    Ppv,
}

impl CodingModel {
    /// ε for a block of `k` information bits at rate `rate` over BSC(p).
    pub fn block_error(self, rate: f64, k: f64, p: f64) -> Result<f64> {
        match self {
            CodingModel::ErrorExponent => block_error_ee(rate, k, p),
            CodingModel::Ppv => {
                if !(rate > 0.0 && rate <= 1.0) {
                    return Err(Error::ModelDomain(format!("rate {rate} outside (0, 1]")));
                }
                let eps = ppv_epsilon(k / rate, p, rate)?;
                Ok(eps.clamp(PPV_EPS_FLOOR, PPV_EPS_CEIL))
            }
        }
    }

    /// Upper end of the usable rate range for blocks of `k` bits.
    ///
    /// R0 for the error-exponent model; for the PPV model, the rate at which
    /// ε reaches the upper clamp (capped at 1).
    pub fn rate_limit(self, k: f64, p: f64) -> Result<f64> {
        match self {
            CodingModel::ErrorExponent => {
                let r0 = cutoff_rate(p);
                if r0 <= 0.0 {
                    return Err(Error::ModelDomain(format!("R0 = 0 at p = {p}")));
                }
                Ok(r0)
            }
            CodingModel::Ppv => {
                let eps_at = |r: f64| ppv_epsilon(k / r, p, r);
                if eps_at(1.0)? < PPV_EPS_CEIL {
                    return Ok(1.0);
                }
                let (mut lo, mut hi) = (1e-6f64, 1.0f64);
                if eps_at(lo)? >= PPV_EPS_CEIL {
                    return Err(Error::ModelDomain(format!(
                        "no usable PPV rate for k = {k}, p = {p}"
                    )));
                }
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if eps_at(mid)? < PPV_EPS_CEIL {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(lo)
            }
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            CodingModel::ErrorExponent => "ee",
            CodingModel::Ppv => "ppv",
        }
    }
}

impl std::str::FromStr for CodingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ee" | "error-exponent" | "errorexponent" => Ok(CodingModel::ErrorExponent),
            "ppv" => Ok(CodingModel::Ppv),
            other => Err(Error::Config(format!("unknown coding model '{other}'"))),
        }
    }
}

/// Rate and block sizes of one channel-coded block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    pub rate: f64,
    /// Bits entering the channel encoder, K/m + h.
    pub k: f64,
}

impl CodeParams {
    pub fn new(rate: f64, k: f64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::Config(format!("code rate {rate} outside (0, 1]")));
        }
        if !(k > 0.0) {
            return Err(Error::Config(format!("block must carry bits, got k = {k}")));
        }
        Ok(Self { rate, k })
    }

    /// Real-valued coded length k / R used by the analytics.
    pub fn n(&self) -> f64 {
        self.k / self.rate
    }

    /// Whole bits actually transmitted per block.
    pub fn n_bits(&self) -> u64 {
        // Guard against k/R landing a hair above an integer through rounding.
        let n = self.n();
        let r = n.round();
        if (n - r).abs() < 1e-9 * n.max(1.0) {
            r as u64
        } else {
            n.ceil() as u64
        }
    }
}
